//! Rule-based placement validators and whole-prompt evaluation.

mod check;
mod config;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use check::{
    between_ok, check_between, check_facing, check_physical, check_proximity, check_vertical, check_visibility, evaluate_constraint,
    evaluate_prompt, facing_ok, largest_instance, proximity_ok, support_gap, vertical_ok, Proximity, Vertical, VisibilityMode,
};
pub use config::{BetweenMode, ThresholdConfig};

/// One prompt constraint. Anchors are referenced by class label; a constraint holds if
/// any instance of the class satisfies it (visibility uses the largest instance).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Constraint {
    Plausible,
    Near { anchor: String },
    Adjacent { anchor: String },
    On { anchor: String },
    Above { anchor: String },
    Below { anchor: String },
    Between { anchor1: String, anchor2: String },
    Facing { anchor: String },
    Visible { anchor: String },
    NotVisible { anchor: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Physical,
    Spatial,
    Rotational,
    Visibility,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::Physical, Group::Spatial, Group::Rotational, Group::Visibility];

    pub fn name(self) -> &'static str {
        match self {
            Group::Physical => "physical",
            Group::Spatial => "spatial",
            Group::Rotational => "rotational",
            Group::Visibility => "visibility",
        }
    }
}

/// Relationship names, in template-file order.
pub const RELATIONSHIPS: [&str; 10] = [
    "plausible",
    "adjacent",
    "between",
    "facing",
    "near",
    "on",
    "above",
    "below",
    "is_visible",
    "not_visible",
];

impl Constraint {
    pub fn relationship(&self) -> &'static str {
        match self {
            Constraint::Plausible => "plausible",
            Constraint::Near { .. } => "near",
            Constraint::Adjacent { .. } => "adjacent",
            Constraint::On { .. } => "on",
            Constraint::Above { .. } => "above",
            Constraint::Below { .. } => "below",
            Constraint::Between { .. } => "between",
            Constraint::Facing { .. } => "facing",
            Constraint::Visible { .. } => "is_visible",
            Constraint::NotVisible { .. } => "not_visible",
        }
    }

    /// Builds a constraint from a relationship name and its anchor classes.
    pub fn from_relationship(rel: &str, anchors: &[&str]) -> Option<Constraint> {
        let one = |f: fn(String) -> Constraint| match anchors {
            [a] => Some(f(a.to_string())),
            _ => None,
        };
        match rel {
            "plausible" if anchors.is_empty() => Some(Constraint::Plausible),
            "near" => one(|anchor| Constraint::Near { anchor }),
            "adjacent" => one(|anchor| Constraint::Adjacent { anchor }),
            "on" => one(|anchor| Constraint::On { anchor }),
            "above" => one(|anchor| Constraint::Above { anchor }),
            "below" => one(|anchor| Constraint::Below { anchor }),
            "facing" => one(|anchor| Constraint::Facing { anchor }),
            "is_visible" => one(|anchor| Constraint::Visible { anchor }),
            "not_visible" => one(|anchor| Constraint::NotVisible { anchor }),
            "between" => match anchors {
                [a, b] => Some(Constraint::Between {
                    anchor1: a.to_string(),
                    anchor2: b.to_string(),
                }),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn group(&self) -> Group {
        match self {
            Constraint::Plausible => Group::Physical,
            Constraint::Facing { .. } => Group::Rotational,
            Constraint::Visible { .. } | Constraint::NotVisible { .. } => Group::Visibility,
            _ => Group::Spatial,
        }
    }

    /// Anchor classes referenced, in order.
    pub fn anchors(&self) -> Vec<&str> {
        match self {
            Constraint::Plausible => vec![],
            Constraint::Between { anchor1, anchor2 } => vec![anchor1, anchor2],
            Constraint::Near { anchor }
            | Constraint::Adjacent { anchor }
            | Constraint::On { anchor }
            | Constraint::Above { anchor }
            | Constraint::Below { anchor }
            | Constraint::Facing { anchor }
            | Constraint::Visible { anchor }
            | Constraint::NotVisible { anchor } => vec![anchor],
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = self.anchors();
        if a.is_empty() {
            write!(f, "{}", self.relationship())
        } else {
            write!(f, "{}({})", self.relationship(), a.join(", "))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub constraint: Constraint,
    pub group: Group,
    pub satisfied: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Per-constraint verdicts plus group flags. The first verdict is always physical
/// plausibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub verdicts: Vec<Verdict>,
    pub physical: bool,
    pub spatial: bool,
    pub rotational: bool,
    pub visibility: bool,
    pub language_ok: bool,
    pub complete_ok: bool,
}

impl ValidityReport {
    pub fn from_verdicts(verdicts: Vec<Verdict>) -> ValidityReport {
        let all = |g: Group| verdicts.iter().filter(|v| v.group == g).all(|v| v.satisfied);
        let physical = all(Group::Physical);
        let spatial = all(Group::Spatial);
        let rotational = all(Group::Rotational);
        let visibility = all(Group::Visibility);
        let language_ok = spatial && rotational && visibility;
        ValidityReport {
            physical,
            spatial,
            rotational,
            visibility,
            language_ok,
            complete_ok: language_ok && physical,
            verdicts,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relationship_names_roundtrip() {
        for rel in RELATIONSHIPS {
            let anchors: &[&str] = match rel {
                "plausible" => &[],
                "between" => &["a", "b"],
                _ => &["a"],
            };
            let c = Constraint::from_relationship(rel, anchors).unwrap();
            assert_eq!(c.relationship(), rel);
            assert_eq!(c.anchors(), anchors);
        }
        assert!(Constraint::from_relationship("near", &[]).is_none());
    }

    #[test]
    fn flag_algebra() {
        let v = |c: Constraint, s| Verdict {
            group: c.group(),
            constraint: c,
            satisfied: s,
            error: None,
        };
        let r = ValidityReport::from_verdicts(vec![v(Constraint::Plausible, true), v(Constraint::Facing { anchor: "tv".into() }, false)]);
        assert!(r.physical && r.spatial && r.visibility);
        assert!(!r.rotational && !r.language_ok && !r.complete_ok);
    }
}
