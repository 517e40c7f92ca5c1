//! Template library, constraint sampling, prompt rendering and parsing.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::{Constraint, Group, ThresholdConfig, RELATIONSHIPS};
use crate::error::{Error, Result};
use crate::geometry::obb_min_distance;
use crate::masks::{prompt_mask, PlacementMask};
use crate::scene::{Asset, SceneModel};

pub const PREFIX: &str = "Place the asset ";
pub const JOINER: &str = ", and ";

const BUILTIN_YAML: &str = include_str!("../data/templates.yaml");

const ANCHOR: &str = "anchor_class";
const ANCHOR1: &str = "anchor1_class";
const ANCHOR2: &str = "anchor2_class";

/// Random streams derived from one seed. Keeping them apart means that, say, adding a
/// template does not change which anchors are drawn.
const CONSTRAINT_STREAM: u64 = 1;
const TEMPLATE_STREAM: u64 = 2;

fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationshipTemplates {
    pub name: String,
    pub templates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateLibrary {
    pub relationships: Vec<RelationshipTemplates>,
}

impl TemplateLibrary {
    /// The library shipped with the crate.
    pub fn builtin() -> TemplateLibrary {
        TemplateLibrary::from_yaml_str(BUILTIN_YAML).expect("bundled template library is valid")
    }

    pub fn from_yaml_str(s: &str) -> Result<TemplateLibrary> {
        let lib: TemplateLibrary = serde_yaml::from_str(s)?;
        lib.validate()?;
        Ok(lib)
    }

    pub fn from_json_str(s: &str) -> Result<TemplateLibrary> {
        let lib: TemplateLibrary = serde_json::from_str(s)?;
        lib.validate()?;
        Ok(lib)
    }

    /// Loads `.json` files as JSON and anything else as YAML.
    pub fn load(path: &Path) -> Result<TemplateLibrary> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => TemplateLibrary::from_json_str(&text),
            _ => TemplateLibrary::from_yaml_str(&text),
        }
    }

    pub fn to_yaml(&self) -> Result<String> {
        Ok(serde_yaml::to_string(self)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn validate(&self) -> Result<()> {
        for rel in RELATIONSHIPS {
            match self.relationships.iter().filter(|r| r.name == rel).count() {
                0 => return Err(Error::validation(format!("template library has no `{rel}` relationship"))),
                1 => {}
                _ => return Err(Error::validation(format!("relationship `{rel}` listed twice"))),
            }
        }
        for r in &self.relationships {
            if !RELATIONSHIPS.contains(&r.name.as_str()) {
                return Err(Error::validation(format!("unknown relationship `{}`", r.name)));
            }
            if r.templates.is_empty() {
                return Err(Error::validation(format!("relationship `{}` has no templates", r.name)));
            }
            let want: &[usize] = match r.name.as_str() {
                "plausible" => &[0, 0, 0],
                "between" => &[0, 1, 1],
                _ => &[1, 0, 0],
            };
            for t in &r.templates {
                let have = [t.matches(ANCHOR).count(), t.matches(ANCHOR1).count(), t.matches(ANCHOR2).count()];
                if have != want {
                    return Err(Error::validation(format!("template `{t}` for `{}` has the wrong placeholders", r.name)));
                }
                if t.contains(JOINER.trim_end()) {
                    return Err(Error::validation(format!("template `{t}` contains the clause separator")));
                }
            }
        }
        Ok(())
    }

    pub fn templates(&self, relationship: &str) -> Option<&[String]> {
        self.relationships.iter().find(|r| r.name == relationship).map(|r| r.templates.as_slice())
    }

    pub fn template_count(&self) -> usize {
        self.relationships.iter().map(|r| r.templates.len()).sum()
    }
}

/// A sampled constraint set with its rendered text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub constraints: Vec<Constraint>,
    pub text: String,
    pub seed: u64,
}

fn fill(template: &str, c: &Constraint) -> String {
    match c.anchors()[..] {
        [a, b] => template.replace(ANCHOR1, a).replace(ANCHOR2, b),
        [a] => template.replace(ANCHOR, a),
        _ => template.to_string(),
    }
}

/// Renders with explicit template indices, one per constraint.
pub fn render_with(constraints: &[Constraint], library: &TemplateLibrary, choices: &[usize]) -> Result<String> {
    if constraints.is_empty() || constraints.len() != choices.len() {
        return Err(Error::validation("need one template choice per constraint, and at least one constraint"));
    }
    let clauses = constraints
        .iter()
        .zip(choices)
        .map(|(c, &k)| {
            let list = library
                .templates(c.relationship())
                .ok_or_else(|| Error::validation(format!("no templates for `{}`", c.relationship())))?;
            let t = list
                .get(k)
                .ok_or_else(|| Error::validation(format!("`{}` has no template {k}", c.relationship())))?;
            Ok(fill(t, c))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(format!("{PREFIX}{}", clauses.join(JOINER)))
}

/// One uniformly chosen template per constraint.
pub fn render_prompt(constraints: &[Constraint], library: &TemplateLibrary, seed: u64) -> Result<String> {
    let mut rng = substream(seed, TEMPLATE_STREAM);
    let choices = constraints
        .iter()
        .map(|c| library.templates(c.relationship()).map_or(0, |t| rng.gen_range(0..t.len())))
        .collect::<Vec<_>>();
    render_with(constraints, library, &choices)
}

enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn pieces(template: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let mut rest = template;
    loop {
        let next = [ANCHOR, ANCHOR1, ANCHOR2]
            .iter()
            .filter_map(|p| rest.find(p).map(|i| (i, *p)))
            .min_by_key(|&(i, _)| i);
        match next {
            Some((i, p)) => {
                if i > 0 {
                    out.push(Piece::Text(&rest[..i]));
                }
                out.push(Piece::Slot(p));
                rest = &rest[i + p.len()..];
            }
            None => {
                if !rest.is_empty() {
                    out.push(Piece::Text(rest));
                }
                return out;
            }
        }
    }
}

/// Every way the clause matches the template, as (slot, text) bindings.
fn bindings<'c>(ps: &[Piece<'_>], clause: &'c str, bound: &mut Vec<(&'static str, &'c str)>, out: &mut Vec<Vec<(&'static str, &'c str)>>) {
    match ps.split_first() {
        None => {
            if clause.is_empty() {
                out.push(bound.clone());
            }
        }
        Some((Piece::Text(t), rest)) => {
            if let Some(tail) = clause.strip_prefix(t) {
                bindings(rest, tail, bound, out);
            }
        }
        Some((Piece::Slot(slot), rest)) => {
            let slot: &'static str = [ANCHOR, ANCHOR1, ANCHOR2].into_iter().find(|s| s == slot).unwrap();
            for end in (1..=clause.len()).filter(|&e| clause.is_char_boundary(e)) {
                bound.push((slot, &clause[..end]));
                bindings(rest, &clause[end..], bound, out);
                bound.pop();
            }
        }
    }
}

struct Candidate {
    constraint: Constraint,
    literal: usize,
    unknown: Option<String>,
}

fn parse_clause(clause: &str, library: &TemplateLibrary, vocab: &[String]) -> Vec<Candidate> {
    let mut found = Vec::new();
    for r in &library.relationships {
        for t in &r.templates {
            let ps = pieces(t);
            let literal = ps.iter().map(|p| if let Piece::Text(s) = p { s.len() } else { 0 }).sum();
            let mut matches = Vec::new();
            bindings(&ps, clause, &mut Vec::new(), &mut matches);
            for b in matches {
                let get = |slot: &str| b.iter().find(|(s, _)| *s == slot).map(|(_, v)| *v);
                let anchors: Vec<&str> = match r.name.as_str() {
                    "plausible" => vec![],
                    "between" => vec![get(ANCHOR1).unwrap_or_default(), get(ANCHOR2).unwrap_or_default()],
                    _ => vec![get(ANCHOR).unwrap_or_default()],
                };
                let Some(constraint) = Constraint::from_relationship(&r.name, &anchors) else {
                    continue;
                };
                let unknown = anchors.iter().find(|a| !vocab.iter().any(|v| v == *a)).map(|a| a.to_string());
                found.push(Candidate { constraint, literal, unknown });
            }
        }
    }
    found
}

/// Inverse of rendering: splits clauses on the joiner and matches each against the longest
/// fitting template. Anchor labels must appear in `vocab`.
pub fn parse_prompt(text: &str, library: &TemplateLibrary, vocab: &[String]) -> Result<Vec<Constraint>> {
    let body = text.strip_prefix(PREFIX).ok_or_else(|| Error::Prompt {
        start: 0,
        end: text.len().min(PREFIX.len()),
        message: format!("prompt must start with `{PREFIX}`"),
    })?;
    let mut out = Vec::new();
    let mut offset = PREFIX.len();
    for clause in body.split(JOINER) {
        let span = (offset, offset + clause.len());
        offset += clause.len() + JOINER.len();
        let cands = parse_clause(clause, library, vocab);
        let known: Vec<&Candidate> = cands.iter().filter(|c| c.unknown.is_none()).collect();
        let best = known.iter().map(|c| c.literal).max();
        match best {
            Some(len) => {
                let mut top: Vec<&Constraint> = known.iter().filter(|c| c.literal == len).map(|c| &c.constraint).collect();
                top.dedup();
                if top.len() > 1 {
                    return Err(Error::Prompt {
                        start: span.0,
                        end: span.1,
                        message: format!("clause `{clause}` is ambiguous"),
                    });
                }
                out.push(top[0].clone());
            }
            None => {
                if let Some(c) = cands.iter().max_by_key(|c| c.literal) {
                    return Err(Error::UnknownAnchor(c.unknown.clone().unwrap_or_default()));
                }
                return Err(Error::Prompt {
                    start: span.0,
                    end: span.1,
                    message: format!("clause `{clause}` matches no template"),
                });
            }
        }
    }
    Ok(out)
}

const SPATIAL: [&str; 6] = ["adjacent", "between", "near", "on", "above", "below"];
const MAX_DRAWS: usize = 32;

/// Draws one constraint per requested group from the scene's anchors.
///
/// Anchors are drawn per instance, so a class with several instances is proportionally
/// more likely. `between` only pairs instances of different classes at most
/// `between_anchor_max_dist` apart; visibility only uses `visibility_classes`.
pub fn sample_constraint_set(scene: &SceneModel, groups: &[Group], cfg: &ThresholdConfig, seed: u64) -> Result<Vec<Constraint>> {
    if groups.is_empty() || groups.len() > 4 {
        return Err(Error::Sampling(format!("a prompt holds 1 to 4 constraints, asked for {}", groups.len())));
    }
    if scene.anchors.is_empty() {
        return Err(Error::Sampling(format!("scene `{}` has no anchors", scene.scene_id)));
    }
    let mut rng = substream(seed, CONSTRAINT_STREAM);
    let mut pairs = Vec::new();
    for (i, a) in scene.anchors.iter().enumerate() {
        for b in &scene.anchors[i + 1..] {
            if a.class_label != b.class_label && obb_min_distance(&a.obb, &b.obb) <= cfg.between_anchor_max_dist {
                pairs.push((a.class_label.as_str(), b.class_label.as_str()));
            }
        }
    }
    let visible: Vec<&str> = scene
        .anchors
        .iter()
        .map(|a| a.class_label.as_str())
        .filter(|c| cfg.visibility_classes.iter().any(|v| v == c))
        .collect();
    let any = |rng: &mut ChaCha8Rng| scene.anchors[rng.gen_range(0..scene.anchors.len())].class_label.clone();
    let mut out: Vec<Constraint> = Vec::new();
    for &g in groups {
        let mut drawn = None;
        for _ in 0..MAX_DRAWS {
            let c = match g {
                Group::Physical => Constraint::Plausible,
                Group::Rotational => Constraint::Facing { anchor: any(&mut rng) },
                Group::Visibility => {
                    let anchor = visible
                        .choose(&mut rng)
                        .ok_or_else(|| Error::Sampling(format!("scene `{}` has no anchor eligible for visibility", scene.scene_id)))?
                        .to_string();
                    if rng.gen_bool(0.5) {
                        Constraint::Visible { anchor }
                    } else {
                        Constraint::NotVisible { anchor }
                    }
                }
                Group::Spatial => {
                    let rels: Vec<&str> = SPATIAL.iter().copied().filter(|r| *r != "between" || !pairs.is_empty()).collect();
                    let rel = *rels.choose(&mut rng).unwrap();
                    if rel == "between" {
                        let (a, b) = pairs[rng.gen_range(0..pairs.len())];
                        let (a, b) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
                        Constraint::from_relationship(rel, &[a, b]).unwrap()
                    } else {
                        let a = any(&mut rng);
                        Constraint::from_relationship(rel, &[&a]).unwrap()
                    }
                }
            };
            if !out.contains(&c) {
                drawn = Some(c);
                break;
            }
        }
        out.push(drawn.ok_or_else(|| Error::Sampling(format!("could not draw {} distinct constraints", groups.len())))?);
    }
    Ok(out)
}

/// Combined mask for the constraints; satisfiable when any point survives.
pub fn verify_prompt(scene: &SceneModel, asset: &Asset, constraints: &[Constraint], cfg: &ThresholdConfig) -> Result<(bool, PlacementMask)> {
    let text = render_with(constraints, &TemplateLibrary::builtin(), &vec![0; constraints.len()])?;
    let mask = prompt_mask(scene, asset, constraints, &text, cfg)?;
    Ok((mask.valid_count() > 0, mask))
}
