//! Dataset generation, submission scoring, the rule-based baseline and placement extraction.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constraints::{evaluate_prompt, Constraint, Group, ThresholdConfig, ValidityReport, Verdict};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::masks::{apply_constraints, constraint_point_mask, lift_to_center_frame, physical_mask, prompt_hash, PlacementMask};
use crate::plausibility::{bin_yaw, BINS};
use crate::prompts::{render_prompt, sample_constraint_set, TemplateLibrary};
use crate::scene::{Asset, Placement, SceneModel};

/// One manifest row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkExample {
    pub example_id: String,
    pub scene_id: String,
    pub asset_id: String,
    pub prompt: String,
    pub constraints: Vec<Constraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_file: Option<String>,
}

/// One submission row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub example_id: String,
    pub t: [f64; 3],
    pub yaw: f64,
}

impl Prediction {
    pub fn placement(&self) -> Placement {
        Placement {
            t: Vec3::from(self.t),
            yaw: self.yaw,
        }
    }
}

/// Reads a JSON-lines file, skipping blank lines.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(n + 1, format!("{}: line {}: {e}", path.display(), n + 1)))?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in rows {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

/// A ratio kept as integer counts so reports compare exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Count {
    pub satisfied: u64,
    pub total: u64,
}

impl Count {
    fn add(&mut self, ok: bool) {
        self.total += 1;
        self.satisfied += ok as u64;
    }

    /// Percentage, or `None` when nothing was counted.
    pub fn percent(&self) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.satisfied as f64 / self.total as f64)
    }
}

impl fmt::Display for Count {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.percent() {
            Some(p) => write!(f, "{p:.2}% ({}/{})", self.satisfied, self.total),
            None => write!(f, "n/a (0/0)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleResult {
    pub example_id: String,
    pub complete_ok: bool,
    pub language_ok: bool,
    pub verdicts: Vec<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub examples: u64,
    pub global_constraint_accuracy: Option<f64>,
    pub complete_placement_success: Option<f64>,
    pub language_adherence_success: Option<f64>,
    pub group_accuracy: BTreeMap<Group, Option<f64>>,
    pub constraints: Count,
    pub complete: Count,
    pub language: Count,
    pub group_counts: BTreeMap<Group, Count>,
    pub per_example: Vec<ExampleResult>,
}

/// Report in which every constraint of the example failed, for examples that could not be
/// evaluated at all.
fn all_failed(ex: &BenchmarkExample, why: &str) -> ValidityReport {
    let mut list = vec![Constraint::Plausible];
    list.extend(ex.constraints.iter().filter(|c| **c != Constraint::Plausible).cloned());
    ValidityReport::from_verdicts(
        list.into_iter()
            .map(|c| Verdict {
                group: c.group(),
                constraint: c,
                satisfied: false,
                error: Some(why.to_string()),
            })
            .collect(),
    )
}

/// Scores predictions with the benchmark-exact checkers. Physical plausibility is counted
/// once per example whether or not the example lists it.
pub fn evaluate_submission(
    examples: &[BenchmarkExample],
    scenes: &HashMap<String, SceneModel>,
    assets: &HashMap<String, Asset>,
    predictions: &[Prediction],
    cfg: &ThresholdConfig,
) -> Result<MetricsReport> {
    if examples.len() != predictions.len() {
        return Err(Error::validation(format!("{} examples but {} predictions", examples.len(), predictions.len())));
    }
    let mut by_id: HashMap<&str, &Prediction> = HashMap::new();
    for p in predictions {
        if by_id.insert(p.example_id.as_str(), p).is_some() {
            return Err(Error::validation(format!("duplicate prediction for `{}`", p.example_id)));
        }
    }
    let rows = examples
        .iter()
        .map(|ex| {
            by_id
                .get(ex.example_id.as_str())
                .copied()
                .ok_or_else(|| Error::validation(format!("no prediction for `{}`", ex.example_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let reports: Vec<ValidityReport> = examples
        .par_iter()
        .zip(rows)
        .map(|(ex, pred)| {
            let (Some(scene), Some(asset)) = (scenes.get(&ex.scene_id), assets.get(&ex.asset_id)) else {
                return all_failed(ex, "scene or asset not found");
            };
            if !pred.t.iter().all(|v| v.is_finite()) || !pred.yaw.is_finite() {
                return all_failed(ex, "prediction is not finite");
            }
            evaluate_prompt(scene, asset, &pred.placement(), &ex.constraints, cfg)
        })
        .collect();
    let mut constraints = Count::default();
    let mut complete = Count::default();
    let mut language = Count::default();
    let mut group_counts: BTreeMap<Group, Count> = Group::ALL.iter().map(|&g| (g, Count::default())).collect();
    let mut per_example = Vec::with_capacity(examples.len());
    for (ex, r) in examples.iter().zip(reports) {
        for v in &r.verdicts {
            constraints.add(v.satisfied);
            group_counts.get_mut(&v.group).unwrap().add(v.satisfied);
        }
        complete.add(r.complete_ok);
        language.add(r.language_ok);
        per_example.push(ExampleResult {
            example_id: ex.example_id.clone(),
            complete_ok: r.complete_ok,
            language_ok: r.language_ok,
            verdicts: r.verdicts,
        });
    }
    Ok(MetricsReport {
        examples: examples.len() as u64,
        global_constraint_accuracy: constraints.percent(),
        complete_placement_success: complete.percent(),
        language_adherence_success: language.percent(),
        group_accuracy: group_counts.iter().map(|(g, c)| (*g, c.percent())).collect(),
        constraints,
        complete,
        language,
        group_counts,
        per_example,
    })
}

/// How the baseline walks the mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CandidateOrder {
    /// Farthest from any invalid point first.
    #[default]
    DistanceToInvalid,
    /// Closest to the centroid of the valid points first.
    CenterOut,
    Random { seed: u64 },
}

/// Distance from every valid point to the nearest invalid one (capped at `cap`), using a
/// uniform hash grid over the invalid points.
fn distance_to_invalid(points: &[Vec3], mask: &PlacementMask, cell: f64, cap: f64) -> Vec<f64> {
    let key = |p: Vec3| ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64, (p.z / cell).floor() as i64);
    let mut grid: HashMap<(i64, i64, i64), Vec<Vec3>> = HashMap::new();
    for (i, &p) in points.iter().enumerate() {
        if !mask.is_valid(i) {
            grid.entry(key(p)).or_default().push(p);
        }
    }
    let rings = (cap / cell).ceil() as i64;
    points
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            if !mask.is_valid(i) {
                return 0.0;
            }
            let (kx, ky, kz) = key(p);
            let mut best = cap;
            for r in 0..=rings {
                // every point in ring r is at least (r - 1) cells away
                if (r - 1) as f64 * cell >= best {
                    break;
                }
                for dx in -r..=r {
                    for dy in -r..=r {
                        for dz in -r..=r {
                            if dx.abs().max(dy.abs()).max(dz.abs()) != r {
                                continue;
                            }
                            if let Some(list) = grid.get(&(kx + dx, ky + dy, kz + dz)) {
                                for q in list {
                                    best = best.min(p.distance(*q));
                                }
                            }
                        }
                    }
                }
            }
            best
        })
        .collect()
}

/// Valid (point, bin) pairs in the order the solver tries them.
pub fn candidate_order(points: &[Vec3], mask: &PlacementMask, order: CandidateOrder) -> Vec<(usize, usize)> {
    let mut idx = mask.valid_indices();
    match order {
        CandidateOrder::DistanceToInvalid => {
            let d = distance_to_invalid(points, mask, 0.1, 2.0);
            idx.sort_by(|&a, &b| d[b].total_cmp(&d[a]).then(a.cmp(&b)));
        }
        CandidateOrder::CenterOut => {
            let n = idx.len().max(1) as f64;
            let c = idx.iter().fold(Vec3::ZERO, |s, &i| s + points[i]) * (1.0 / n);
            idx.sort_by(|&a, &b| points[a].distance(c).total_cmp(&points[b].distance(c)).then(a.cmp(&b)));
        }
        CandidateOrder::Random { seed } => idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed)),
    }
    idx.into_iter()
        .flat_map(|i| (0..BINS).filter(move |b| mask.rotation_bits(i) >> b & 1 == 1).map(move |b| (i, b)))
        .collect()
}

/// Walks the prompt mask and returns the first candidate the benchmark-exact checkers accept.
pub fn solve_baseline(
    scene: &SceneModel,
    asset: &Asset,
    constraints: &[Constraint],
    cfg: &ThresholdConfig,
    order: CandidateOrder,
) -> Result<Placement> {
    let physical = physical_mask(scene, asset, cfg)?;
    let mask = apply_constraints(scene, asset, constraints, physical, "", cfg)?;
    solve_with_mask(scene, asset, constraints, &mask, cfg, order)
}

pub fn solve_with_mask(
    scene: &SceneModel,
    asset: &Asset,
    constraints: &[Constraint],
    mask: &PlacementMask,
    cfg: &ThresholdConfig,
    order: CandidateOrder,
) -> Result<Placement> {
    if mask.valid_count() == 0 {
        return Err(Error::NoSolution("the combined mask is empty".into()));
    }
    let points: Vec<Vec3> = scene.points.iter().map(|p| p.position).collect();
    let cands = candidate_order(&points, mask, order);
    for (k, &(i, b)) in cands.iter().enumerate() {
        let p = lift_to_center_frame(points[i], asset, bin_yaw(b));
        if evaluate_prompt(scene, asset, &p, constraints, cfg).complete_ok {
            log::debug!("baseline accepted candidate {k} of {}", cands.len());
            return Ok(p);
        }
    }
    Err(Error::NoSolution(format!("none of {} mask candidates passes the exact checkers", cands.len())))
}

/// Model-style output: a location score per point and 8 rotation scores per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredMask {
    pub location: Vec<f64>,
    pub rotation: Vec<[f64; 8]>,
}

/// Index of the largest finite value; ties go to the lowest index.
fn argmax(values: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if v.is_finite() && best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Best-scoring point, its best rotation bin, lifted by half the asset height.
pub fn extract_placement(scored: &ScoredMask, asset: &Asset, points: &[Vec3]) -> Result<Placement> {
    if points.is_empty() || scored.location.len() != points.len() || scored.rotation.len() != points.len() {
        return Err(Error::validation(format!(
            "scores cover {}/{} points, cloud has {}",
            scored.location.len(),
            scored.rotation.len(),
            points.len()
        )));
    }
    let k = argmax(scored.location.iter().copied()).ok_or_else(|| Error::validation("no finite location score"))?;
    let b = argmax(scored.rotation[k].iter().copied()).ok_or_else(|| Error::validation(format!("no finite rotation score at point {k}")))?;
    Ok(lift_to_center_frame(points[k], asset, bin_yaw(b)))
}

/// Target distribution for a generated dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    /// Number of examples with exactly k constraints, for k in 1..=4.
    pub examples_per_count: BTreeMap<usize, usize>,
    /// Constraint totals per group across the whole dataset; must sum to the slot total.
    pub group_totals: BTreeMap<Group, usize>,
    /// Satisfiability attempts per example before giving up.
    #[serde(default = "default_retries")]
    pub retry_budget: usize,
}

/// Mask candidates tried against the exact checkers before an example is accepted.
const VERIFY_CANDIDATES: usize = 256;

/// Whether some mask candidate, among a seeded sample, passes the benchmark-exact checkers.
fn has_exact_solution(scene: &SceneModel, asset: &Asset, constraints: &[Constraint], mask: &PlacementMask, cfg: &ThresholdConfig, seed: u64) -> bool {
    let points: Vec<Vec3> = scene.points.iter().map(|p| p.position).collect();
    candidate_order(&points, mask, CandidateOrder::Random { seed })
        .into_iter()
        .take(VERIFY_CANDIDATES)
        .any(|(i, b)| evaluate_prompt(scene, asset, &lift_to_center_frame(points[i], asset, bin_yaw(b)), constraints, cfg).complete_ok)
}

/// Candidate draws per constraint slot within one attempt.
const SLOT_DRAWS: usize = 8;

fn default_retries() -> usize {
    64
}

fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let short = total - out.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        out[i] += 1;
    }
    out
}

impl GenConfig {
    /// Benchmark proportions scaled to `n` examples: 900 / 1,871 / 729 examples with one, two
    /// and three-plus constraints; 4,208 spatial, 1,503 rotational and 1,210 visibility
    /// constraints. Three-plus examples get three constraints, plus a fourth where needed to
    /// reach the scaled constraint total.
    pub fn table1(n: usize) -> Result<GenConfig> {
        let per = largest_remainder(&[900.0, 1871.0, 729.0], n);
        let groups = largest_remainder(&[4208.0, 1503.0, 1210.0], ((4208.0 + 1503.0 + 1210.0) * n as f64 / 3500.0).round() as usize);
        let total: usize = groups.iter().sum();
        let base = per[0] + 2 * per[1] + 3 * per[2];
        let fours = total
            .checked_sub(base)
            .filter(|f| *f <= per[2])
            .ok_or_else(|| Error::validation(format!("cannot spread {total} constraints over {n} examples")))?;
        let cfg = GenConfig {
            examples_per_count: [(1, per[0]), (2, per[1]), (3, per[2] - fours), (4, fours)].into_iter().filter(|e| e.1 > 0).collect(),
            group_totals: [(Group::Spatial, groups[0]), (Group::Rotational, groups[1]), (Group::Visibility, groups[2])].into(),
            retry_budget: default_retries(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `n` examples with one constraint of the given group each.
    pub fn uniform(n: usize, group: Group) -> GenConfig {
        GenConfig {
            examples_per_count: [(1, n)].into(),
            group_totals: [(group, n)].into(),
            retry_budget: default_retries(),
        }
    }

    pub fn example_count(&self) -> usize {
        self.examples_per_count.values().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.examples_per_count.keys().any(|&k| !(1..=4).contains(&k)) {
            return Err(Error::validation("examples hold 1 to 4 constraints"));
        }
        if self.group_totals.contains_key(&Group::Physical) {
            return Err(Error::validation("physical plausibility is implicit and cannot be requested"));
        }
        let slots: usize = self.examples_per_count.iter().map(|(k, n)| k * n).sum();
        let groups: usize = self.group_totals.values().sum();
        if slots != groups {
            return Err(Error::validation(format!("{slots} constraint slots but group totals sum to {groups}")));
        }
        // at most one rotational and one visibility constraint per example
        let n = self.example_count();
        let rot = self.group_totals.get(&Group::Rotational).copied().unwrap_or(0);
        let vis = self.group_totals.get(&Group::Visibility).copied().unwrap_or(0);
        let multi: usize = self.examples_per_count.iter().filter(|(k, _)| **k >= 2).map(|(_, n)| n).sum();
        if rot.saturating_sub(multi) + vis.saturating_sub(multi) > n - multi {
            return Err(Error::validation("too many rotational or visibility constraints to spread one per example"));
        }
        if self.retry_budget == 0 {
            return Err(Error::validation("retry budget must be positive"));
        }
        Ok(())
    }

    /// Group slots per example, in example order. Rotational and visibility constraints go to
    /// distinct examples (at most one of each per example); the rest are spatial.
    pub fn plan(&self, seed: u64) -> Result<Vec<Vec<Group>>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0x9e);
        let mut sizes: Vec<usize> = self.examples_per_count.iter().flat_map(|(&k, &n)| std::iter::repeat_n(k, n)).collect();
        sizes.shuffle(&mut rng);
        let mut plan: Vec<Vec<Group>> = vec![Vec::new(); sizes.len()];
        let rot = self.group_totals.get(&Group::Rotational).copied().unwrap_or(0);
        let vis = self.group_totals.get(&Group::Visibility).copied().unwrap_or(0);
        let mut order: Vec<usize> = (0..sizes.len()).collect();
        order.shuffle(&mut rng);
        let mut multi: Vec<usize> = order.iter().copied().filter(|&i| sizes[i] >= 2).collect();
        let single: Vec<usize> = order.iter().copied().filter(|&i| sizes[i] == 1).collect();
        let (n, m, s) = (sizes.len(), multi.len(), single.len());
        // single-constraint examples get their proportional share of each group
        let share = |total: usize| ((total * s) as f64 / n as f64).round() as usize;
        let (r_min, v_min) = (rot.saturating_sub(m), vis.saturating_sub(m));
        let r1 = share(rot).clamp(r_min, s - v_min).min(rot);
        let v1 = share(vis).clamp(v_min, s - r1).min(vis);
        for &i in &single[..r1] {
            plan[i].push(Group::Rotational);
        }
        for &i in &single[r1..r1 + v1] {
            plan[i].push(Group::Visibility);
        }
        for &i in &multi[..rot - r1] {
            plan[i].push(Group::Rotational);
        }
        multi.shuffle(&mut rng);
        for &i in &multi[..vis - v1] {
            plan[i].push(Group::Visibility);
        }
        for (i, p) in plan.iter_mut().enumerate() {
            while p.len() < sizes[i] {
                p.push(Group::Spatial);
            }
            p.shuffle(&mut rng);
        }
        Ok(plan)
    }
}

/// Stable 64-bit seed derived from a base seed and a path of indices.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in path {
        h.update(p.to_le_bytes());
    }
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}

#[derive(Debug, Clone)]
pub struct GeneratedExample {
    pub example: BenchmarkExample,
    pub mask: PlacementMask,
    pub attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationFailure {
    pub index: usize,
    pub groups: Vec<Group>,
    pub last_error: String,
}

#[derive(Debug, Clone, Default)]
pub struct GenerationOutput {
    pub examples: Vec<GeneratedExample>,
    pub failures: Vec<GenerationFailure>,
}

impl GenerationOutput {
    /// Emitted constraints per group and examples per constraint count.
    pub fn histogram(&self) -> (BTreeMap<Group, usize>, BTreeMap<usize, usize>) {
        let mut groups = BTreeMap::new();
        let mut counts = BTreeMap::new();
        for e in &self.examples {
            *counts.entry(e.example.constraints.len()).or_insert(0) += 1;
            for c in &e.example.constraints {
                *groups.entry(c.group()).or_insert(0) += 1;
            }
        }
        (groups, counts)
    }

    /// Writes `manifest.jsonl` and `masks/<example_id>.{plmk,json}`; failures, if any, go to
    /// `failures.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let masks = dir.join("masks");
        std::fs::create_dir_all(&masks)?;
        for e in &self.examples {
            e.mask.save(&masks, &e.example.example_id)?;
        }
        let rows: Vec<&BenchmarkExample> = self.examples.iter().map(|e| &e.example).collect();
        write_jsonl(&dir.join("manifest.jsonl"), &rows)?;
        let failures = dir.join("failures.json");
        if self.failures.is_empty() {
            if failures.exists() {
                std::fs::remove_file(failures)?;
            }
        } else {
            std::fs::write(failures, serde_json::to_string_pretty(&self.failures)? + "\n")?;
        }
        Ok(())
    }
}

/// Generates one verified example per planned slot list. Each attempt draws a scene and an
/// asset from its own derived seed, then fills the slots in order, keeping only constraints
/// that leave some placement valid. The finished mask must hold a candidate that the
/// benchmark-exact checkers accept.
pub fn generate_dataset(
    scenes: &[SceneModel],
    assets: &[Asset],
    gen: &GenConfig,
    library: &TemplateLibrary,
    cfg: &ThresholdConfig,
    seed: u64,
) -> Result<GenerationOutput> {
    if scenes.is_empty() || assets.is_empty() {
        return Err(Error::validation("generation needs at least one scene and one asset"));
    }
    let plan = gen.plan(seed)?;
    let physical: Vec<OnceLock<std::result::Result<PlacementMask, String>>> = (0..scenes.len() * assets.len()).map(|_| OnceLock::new()).collect();
    let results: Vec<std::result::Result<GeneratedExample, GenerationFailure>> = plan
        .par_iter()
        .enumerate()
        .map(|(k, groups)| {
            let mut last_error = String::from("no attempt made");
            for attempt in 0..gen.retry_budget {
                let s = derive_seed(seed, &[k as u64, attempt as u64]);
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let (si, ai) = (rng.gen_range(0..scenes.len()), rng.gen_range(0..assets.len()));
                let (scene, asset) = (&scenes[si], &assets[ai]);
                let phys = physical[si * assets.len() + ai].get_or_init(|| physical_mask(scene, asset, cfg).map_err(|e| e.to_string()));
                let mut mask = match phys {
                    Ok(m) => m.clone(),
                    Err(e) => {
                        last_error = e.clone();
                        continue;
                    }
                };
                // constraints are drawn one slot at a time; a draw that empties the mask is
                // replaced by another for the same slot
                let mut constraints: Vec<Constraint> = Vec::with_capacity(groups.len());
                for (slot, &g) in groups.iter().enumerate() {
                    let mut kept = None;
                    for draw in 0..SLOT_DRAWS {
                        let ds = derive_seed(s, &[slot as u64, draw as u64]);
                        let c = match sample_constraint_set(scene, &[g], cfg, ds) {
                            Ok(mut c) => c.remove(0),
                            Err(e) => {
                                last_error = e.to_string();
                                break;
                            }
                        };
                        if constraints.contains(&c) {
                            continue;
                        }
                        match constraint_point_mask(scene, asset, &c, &mask, cfg) {
                            Ok(m) if m.valid_count() > 0 => {
                                kept = Some((c, m));
                                break;
                            }
                            Ok(_) => last_error = format!("unsatisfiable after {} constraints", constraints.len() + 1),
                            Err(e) => last_error = e.to_string(),
                        }
                    }
                    match kept {
                        Some((c, m)) => {
                            constraints.push(c);
                            mask = m;
                        }
                        None => break,
                    }
                }
                if constraints.len() < groups.len() {
                    continue;
                }
                let prompt = match render_prompt(&constraints, library, s) {
                    Ok(p) => p,
                    Err(e) => {
                        last_error = e.to_string();
                        continue;
                    }
                };
                if !has_exact_solution(scene, asset, &constraints, &mask, cfg, s) {
                    last_error = format!("no mask candidate passes the exact checkers: {prompt}");
                    continue;
                }
                mask.prompt_hash = prompt_hash(&prompt);
                let example_id = format!("ex{k:05}");
                return Ok(GeneratedExample {
                    example: BenchmarkExample {
                        mask_file: Some(format!("masks/{example_id}.plmk")),
                        example_id,
                        scene_id: scene.scene_id.clone(),
                        asset_id: asset.asset_id.clone(),
                        prompt,
                        constraints,
                    },
                    mask,
                    attempts: attempt + 1,
                });
            }
            Err(GenerationFailure {
                index: k,
                groups: groups.clone(),
                last_error,
            })
        })
        .collect();
    let mut out = GenerationOutput::default();
    for r in results {
        match r {
            Ok(e) => out.examples.push(e),
            Err(f) => out.failures.push(f),
        }
    }
    if !out.failures.is_empty() {
        log::warn!("{} of {} examples exhausted the retry budget", out.failures.len(), plan.len());
    }
    Ok(out)
}
