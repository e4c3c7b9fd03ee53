//! Pareto fronts over (average AoI, average power), Monte-Carlo
//! hypervolume, and the random and exhaustive baselines.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::agents::Evaluation;
use crate::aoi::ObjectivePoint;
use crate::env::{EnvConfig, Environment, OrderSpace};
use crate::rng::{stream, stream_rng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyTag {
    #[serde(rename = "hybrid")]
    Hybrid,
    #[serde(rename = "meta")]
    Meta,
    #[serde(rename = "meta+ft")]
    MetaFineTuned,
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "exhaustive")]
    Exhaustive,
}

impl PolicyTag {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Hybrid => "hybrid",
            Self::Meta => "meta",
            Self::MetaFineTuned => "meta+ft",
            Self::Random => "random",
            Self::Exhaustive => "exhaustive",
        }
    }
}

impl fmt::Display for PolicyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoPoint {
    pub zeta: f64,
    pub avg_aoi: f64,
    pub avg_power: f64,
    pub dominated: bool,
    pub tag: PolicyTag,
    pub seed: u64,
}

impl ParetoPoint {
    pub fn objectives(&self) -> (f64, f64) {
        (self.avg_aoi, self.avg_power)
    }
}

/// `a` is no worse than `b` in both coordinates and better in one.
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1)
}

/// Indices of the non-dominated points, in input order.
pub fn dominance_filter(points: &[(f64, f64)]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| points[a].0.total_cmp(&points[b].0).then(points[a].1.total_cmp(&points[b].1)));
    let mut keep = Vec::new();
    let mut best_before = f64::INFINITY;
    let mut k = 0;
    while k < idx.len() {
        let x = points[idx[k]].0;
        let y_min = points[idx[k]].1;
        let mut end = k;
        while end < idx.len() && points[idx[end]].0 == x {
            // equal x: only the points sharing the group minimum can survive
            if points[idx[end]].1 == y_min && best_before > y_min {
                keep.push(idx[end]);
            }
            end += 1;
        }
        best_before = best_before.min(y_min);
        k = end;
    }
    keep.sort_unstable();
    keep
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypervolumeResult {
    pub value: f64,
    pub reference: (f64, f64),
    pub samples: usize,
    pub stderr: f64,
}

/// Area dominated by `points` and bounded by `reference`, estimated from
/// uniform samples over the bounding box of the points and the reference.
pub fn hypervolume_mc<R: Rng + ?Sized>(
    points: &[(f64, f64)],
    reference: (f64, f64),
    samples: usize,
    rng: &mut R,
) -> Result<HypervolumeResult> {
    if let Some(p) = points.iter().find(|p| !(p.0 <= reference.0 && p.1 <= reference.1)) {
        return Err(Error::OutsideReferenceBox(p.0, p.1));
    }
    let empty = HypervolumeResult { value: 0.0, reference, samples, stderr: 0.0 };
    if points.is_empty() || samples == 0 {
        return Ok(empty);
    }
    // staircase sorted by x with strictly falling y
    let mut front: Vec<(f64, f64)> = dominance_filter(points).into_iter().map(|k| points[k]).collect();
    front.sort_by(|a, b| a.0.total_cmp(&b.0));
    front.dedup();
    let lo = (front[0].0, front.iter().map(|p| p.1).fold(f64::INFINITY, f64::min));
    let area = (reference.0 - lo.0) * (reference.1 - lo.1);
    if !(area > 0.0) {
        return Ok(empty);
    }
    let mut hits = 0usize;
    for _ in 0..samples {
        let u = lo.0 + (reference.0 - lo.0) * rng.random::<f64>();
        let v = lo.1 + (reference.1 - lo.1) * rng.random::<f64>();
        let n = front.partition_point(|p| p.0 <= u);
        if n > 0 && front[n - 1].1 <= v {
            hits += 1;
        }
    }
    let f = hits as f64 / samples as f64;
    Ok(HypervolumeResult {
        value: area * f,
        reference,
        samples,
        stderr: area * libm::sqrt(f * (1.0 - f) / samples as f64),
    })
}

/// Uniform order index and α ∈ [0,1]^F.
pub fn random_action<R: Rng + ?Sized>(orders: usize, processes: usize, rng: &mut R) -> (usize, Vec<f64>) {
    let order = rng.random_range(0..orders);
    let alpha = (0..processes).map(|_| rng.random::<f64>()).collect();
    (order, alpha)
}

/// Random order and power every slot, scored at `zeta`.
pub fn random_policy_eval(config: &EnvConfig, zeta: f64, episodes: usize, seed: u64) -> Result<Evaluation> {
    let orders = OrderSpace::new(config.network.processes);
    let mut env = Environment::new(config.clone(), zeta)?;
    let mut seeds = stream_rng(seed, stream::EVAL);
    let mut rng = stream_rng(seed, stream::BASELINE);
    let mut points = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        env.reset(seeds.next_u64())?;
        while !env.is_done() {
            let (order, alpha) = random_action(orders.len(), config.network.processes, &mut rng);
            env.step(orders.get(order), &alpha)?;
        }
        points.push(env.episode_objective()?);
    }
    Evaluation::from_points(zeta, points)
}

pub const MAX_EXHAUSTIVE_PROCESSES: usize = 4;
pub const MAX_POWER_LEVELS: usize = 10;

/// Every α on the grid `{j/(K−1)}^F` with `Σα ≤ 1`, zero power first.
pub fn power_grid(processes: usize, levels: usize) -> Vec<Vec<f64>> {
    let step = 1.0 / (levels - 1) as f64;
    let mut out = Vec::new();
    let mut digits = alloc::vec![0usize; processes];
    loop {
        if digits.iter().sum::<usize>() < levels {
            out.push(digits.iter().map(|&d| d as f64 * step).collect());
        }
        let mut k = processes;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < levels {
                break;
            }
            digits[k] = 0;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveRun {
    pub evaluation: Evaluation,
    /// Chosen (order index, α) per slot of every episode.
    pub actions: Vec<Vec<(usize, Vec<f64>)>>,
}

/// Per-slot greedy search over all orders and power-grid points, minimizing
/// the slot's contribution `ζ·ΣrΔ/(Δ̄max−Δ̄min) + (1−ζ)·p/P_max`.
pub fn exhaustive_search(config: &EnvConfig, levels: usize, zeta: f64, episodes: usize, seed: u64) -> Result<ExhaustiveRun> {
    let f = config.network.processes;
    if f > MAX_EXHAUSTIVE_PROCESSES || !(2..=MAX_POWER_LEVELS).contains(&levels) {
        return Err(Error::InstanceTooLarge(alloc::format!(
            "F={f}, K={levels}; need F ≤ {MAX_EXHAUSTIVE_PROCESSES} and 2 ≤ K ≤ {MAX_POWER_LEVELS}"
        )));
    }
    let orders = OrderSpace::new(f);
    let grid = power_grid(f, levels);
    let mut env = Environment::new(config.clone(), zeta)?;
    let bounds = env.bounds();
    let span = bounds.max - bounds.min;
    if !(span > 0.0) {
        return Err(Error::DegenerateBounds);
    }
    let p_max = config.network.p_max;
    let mut seeds = stream_rng(seed, stream::EVAL);
    let mut points = Vec::with_capacity(episodes);
    let mut actions = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        env.reset(seeds.next_u64())?;
        let mut chosen = Vec::with_capacity(env.horizon());
        while !env.is_done() {
            let mut best = (f64::INFINITY, 0, 0);
            for (o, order) in orders.iter().enumerate() {
                for (g, alpha) in grid.iter().enumerate() {
                    let pv = env.preview(order, alpha)?;
                    let cost = zeta * pv.demanded_aoi / span + (1.0 - zeta) * pv.slot_power / p_max;
                    if cost < best.0 {
                        best = (cost, o, g);
                    }
                }
            }
            env.step(orders.get(best.1), &grid[best.2])?;
            chosen.push((best.1, grid[best.2].clone()));
        }
        points.push(env.episode_objective()?);
        actions.push(chosen);
    }
    Ok(ExhaustiveRun { evaluation: Evaluation::from_points(zeta, points)?, actions })
}

/// The 11-point grid 0, 0.1, …, 1.
pub fn zeta_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => alloc::vec![0.5],
        n => (0..n).map(|k| k as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Front {
    pub tag: PolicyTag,
    pub points: Vec<ParetoPoint>,
    pub hypervolume: HypervolumeResult,
}

/// Evaluates `source` at every ζ, flags dominated points and computes the
/// hypervolume against `reference`. Points outside the reference box add
/// no area and are left out of the hypervolume.
pub fn build_front(
    tag: PolicyTag,
    zetas: &[f64],
    seed: u64,
    reference: (f64, f64),
    samples: usize,
    mut source: impl FnMut(f64) -> Result<ObjectivePoint>,
) -> Result<Front> {
    if let Some(z) = zetas.iter().find(|z| !(0.0..=1.0).contains(*z)) {
        return Err(Error::config("zeta", alloc::format!("grid value {z} outside [0, 1]")));
    }
    let mut points = Vec::with_capacity(zetas.len());
    for &zeta in zetas {
        let p = source(zeta)?;
        points.push(ParetoPoint { zeta, avg_aoi: p.avg_aoi, avg_power: p.avg_power, dominated: true, tag, seed });
    }
    let objectives: Vec<(f64, f64)> = points.iter().map(ParetoPoint::objectives).collect();
    for k in dominance_filter(&objectives) {
        points[k].dominated = false;
    }
    let inside: Vec<(f64, f64)> =
        objectives.into_iter().filter(|p| p.0 <= reference.0 && p.1 <= reference.1).collect();
    let hypervolume = hypervolume_mc(&inside, reference, samples, &mut stream_rng(seed, stream::HYPERVOLUME))?;
    Ok(Front { tag, points, hypervolume })
}

/// Total training episodes needed for a front of `points` preference weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingCost {
    pub points: usize,
    pub meta_total: usize,
    pub hybrid_total: usize,
}

impl TrainingCost {
    pub fn new(points: usize, meta_iterations: usize, finetune_steps: usize, hybrid_episodes: usize) -> Self {
        Self { points, meta_total: meta_iterations + finetune_steps * points, hybrid_total: hybrid_episodes * points }
    }

    pub fn ratio(&self) -> f64 {
        self.meta_total as f64 / self.hybrid_total as f64
    }
}

pub fn describe_front(front: &Front) -> String {
    alloc::format!(
        "{}: {} points, {} non-dominated, hypervolume {:.6} ± {:.6}",
        front.tag,
        front.points.len(),
        front.points.iter().filter(|p| !p.dominated).count(),
        front.hypervolume.value,
        front.hypervolume.stderr
    )
}
