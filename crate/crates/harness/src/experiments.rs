//! Named experiments. Each writes its CSVs, snapshots and manifest into
//! one run directory.

use std::path::{Path, PathBuf};

use noma_aoi_core::agents::{evaluate_policy, train_hybrid, Evaluation, HybridPolicy};
use noma_aoi_core::env::{EnvConfig, Environment, OrderSpace};
use noma_aoi_core::meta::{fine_tune as meta_fine_tune, meta_train as run_meta_train, MetaParams};
use noma_aoi_core::pareto::{
    build_front, exhaustive_search, hypervolume_mc, random_policy_eval, Front, PolicyTag, TrainingCost,
    MAX_EXHAUSTIVE_PROCESSES,
};
use noma_aoi_core::rng::{stream, stream_rng};
use rand::RngCore;

use crate::config::{demand_for_processes, ExperimentConfig};
use crate::error::{Error, Result};
use crate::output::{self, HypervolumeRow, RunDir, RunManifest, SweepRow, TraceRow};
use crate::snapshot;

pub const POLICY_DIR: &str = "policy";
pub const META_DIR: &str = "meta";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    Random,
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    Zeta,
    Vehicles,
    Processes,
    Demand,
    Speed,
    Environment,
    FinetuneSteps,
}

impl Sweep {
    pub fn name(self) -> &'static str {
        match self {
            Sweep::Zeta => "zeta",
            Sweep::Vehicles => "vehicles",
            Sweep::Processes => "processes",
            Sweep::Demand => "demand",
            Sweep::Speed => "speed",
            Sweep::Environment => "environment",
            Sweep::FinetuneSteps => "finetune-steps",
        }
    }

    pub fn file(self) -> &'static str {
        match self {
            Sweep::Zeta => "objective_vs_zeta.csv",
            Sweep::Vehicles => "objective_vs_vehicles.csv",
            Sweep::Processes => "objective_vs_processes.csv",
            Sweep::Demand => "objective_vs_demand.csv",
            Sweep::Speed => "speed_generalization.csv",
            Sweep::Environment => "environment_generalization.csv",
            Sweep::FinetuneSteps => "objective_vs_finetune_steps.csv",
        }
    }
}

/// A validated config, master seed and run directory.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub out: PathBuf,
}

impl Context {
    pub fn new(config: ExperimentConfig, seed: u64, out: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, seed, out: out.into() })
    }

    fn env(&self) -> EnvConfig {
        self.config.env_config()
    }

    fn evaluate(&self, policy: &HybridPolicy, env: &EnvConfig, zeta: f64) -> Result<Evaluation> {
        Ok(evaluate_policy(policy, env, zeta, self.config.run.eval_episodes, self.seed)?)
    }

    fn train(&self, env: &EnvConfig, zeta: f64) -> Result<HybridPolicy> {
        Ok(train_hybrid(env, zeta, &self.config.train, self.seed)?.0)
    }

    fn random(&self, env: &EnvConfig, zeta: f64) -> Result<Evaluation> {
        Ok(random_policy_eval(env, zeta, self.config.run.eval_episodes, self.seed)?)
    }

    fn exhaustive(&self, env: &EnvConfig, zeta: f64) -> Result<Evaluation> {
        let run = &self.config.run;
        Ok(exhaustive_search(env, run.power_levels, zeta, run.exhaustive_episodes, self.seed)?.evaluation)
    }

    /// (Δ̄_max, P_max) of the configured instance.
    pub fn reference(&self) -> Result<(f64, f64)> {
        let env = Environment::new(self.env(), 0.5)?;
        Ok((env.bounds().max, self.config.network.p_max))
    }

    fn front(&self, tag: PolicyTag, source: impl FnMut(f64) -> noma_aoi_core::Result<noma_aoi_core::aoi::ObjectivePoint>) -> Result<Front> {
        let zetas = self.config.zetas();
        Ok(build_front(tag, &zetas, self.seed, self.reference()?, self.config.run.hypervolume_samples, source)?)
    }
}

/// Greedy rollout of one episode with its per-slot record.
pub fn trace_episode(policy: &HybridPolicy, env_config: &EnvConfig, zeta: f64, episode_seed: u64) -> Result<Vec<TraceRow>> {
    let orders = OrderSpace::new(policy.processes());
    let mut env = Environment::new(env_config.clone(), zeta)?;
    let mut state = env.reset(episode_seed)?;
    let mut rows = Vec::with_capacity(env.horizon());
    while !env.is_done() {
        let slot = env.slot();
        let (order, alpha) = policy.act_greedy(&state)?;
        let out = env.step(orders.get(order), &alpha)?;
        let process_aoi = env.aoi().map(|a| a.column_sums(env.demand())).unwrap_or_default();
        rows.push(TraceRow {
            slot,
            order: orders.get(order).as_slice().to_vec(),
            alpha,
            reward: out.reward,
            slot_power: out.slot_power,
            delivered: out.delivered,
            process_aoi,
        });
        state = out.state;
    }
    Ok(rows)
}

pub fn train(ctx: &Context, zeta: Option<f64>) -> Result<RunManifest> {
    let zeta = zeta.unwrap_or(ctx.config.run.zeta);
    let mut run = RunDir::create(&ctx.out, "train", ctx.seed)?;
    let env = ctx.env();
    let (policy, curve) = train_hybrid(&env, zeta, &ctx.config.train, ctx.seed)?;
    output::write_learning_curve(&run.artifact("learning_curve.csv"), &curve)?;
    let eval = ctx.evaluate(&policy, &env, zeta)?;
    output::write_evaluation(&run.artifact("evaluation.csv"), PolicyTag::Hybrid, &eval)?;
    save_policy(&mut run, &policy, PolicyTag::Hybrid, ctx.seed, ctx.config.train.episodes)?;
    run.finish(&ctx.config)
}

pub fn meta_train(ctx: &Context) -> Result<RunManifest> {
    let mut run = RunDir::create(&ctx.out, "meta-train", ctx.seed)?;
    let (meta, history) = run_meta_train(&ctx.env(), &ctx.config.train, &ctx.config.meta, ctx.seed)?;
    output::write_meta_history(&run.artifact("meta_history.csv"), &history)?;
    save_meta(&mut run, &meta, ctx.seed, ctx.config.meta.iterations)?;
    run.finish(&ctx.config)
}

pub fn fine_tune(ctx: &Context, meta_dir: &Path, zeta: Option<f64>, steps: Option<usize>) -> Result<RunManifest> {
    let zeta = zeta.unwrap_or(ctx.config.run.zeta);
    let steps = steps.unwrap_or(ctx.config.meta.finetune_steps);
    let (_, meta) = snapshot::load_meta(meta_dir)?;
    let mut run = RunDir::create(&ctx.out, "fine-tune", ctx.seed)?;
    let env = ctx.env();
    let (policy, curve) = meta_fine_tune(&meta, &env, zeta, steps, &ctx.config.train, &ctx.config.meta, ctx.seed)?;
    output::write_learning_curve(&run.artifact("learning_curve.csv"), &curve)?;
    let eval = ctx.evaluate(&policy, &env, zeta)?;
    output::write_evaluation(&run.artifact("evaluation.csv"), PolicyTag::MetaFineTuned, &eval)?;
    save_policy(&mut run, &policy, PolicyTag::MetaFineTuned, ctx.seed, steps)?;
    run.finish(&ctx.config)
}

/// Evaluates a saved policy at `zeta` (default: the policy's own) and
/// records the first evaluation episode slot by slot.
pub fn eval(ctx: &Context, policy_dir: &Path, zeta: Option<f64>) -> Result<RunManifest> {
    let (header, policy) = snapshot::load_policy(policy_dir)?;
    let zeta = zeta.unwrap_or(policy.zeta);
    let mut run = RunDir::create(&ctx.out, "eval", ctx.seed)?;
    let env = ctx.env();
    let eval = ctx.evaluate(&policy, &env, zeta)?;
    output::write_evaluation(&run.artifact("evaluation.csv"), header.tag, &eval)?;
    let first_episode = stream_rng(ctx.seed, stream::EVAL).next_u64();
    let rows = trace_episode(&policy, &env, zeta, first_episode)?;
    output::write_trace(&run.artifact("trace.csv"), policy.processes(), &rows)?;
    run.finish(&ctx.config)
}

fn front_file(tag: PolicyTag) -> &'static str {
    match tag {
        PolicyTag::Hybrid => "front_hybrid.csv",
        PolicyTag::Meta => "front_meta.csv",
        PolicyTag::MetaFineTuned => "front_meta_ft.csv",
        PolicyTag::Random => "front_random.csv",
        PolicyTag::Exhaustive => "front_exhaustive.csv",
    }
}

/// Fronts of the hybrid, meta zero-shot, meta fine-tuned and random
/// policies over the ζ grid, with hypervolumes and training cost.
pub fn pareto(ctx: &Context) -> Result<(RunManifest, Vec<Front>)> {
    let mut run = RunDir::create(&ctx.out, "pareto", ctx.seed)?;
    let env = ctx.env();
    let cfg = &ctx.config;

    let hybrid = ctx.front(PolicyTag::Hybrid, |z| {
        let policy = train_hybrid(&env, z, &cfg.train, ctx.seed)?.0;
        Ok(evaluate_policy(&policy, &env, z, cfg.run.eval_episodes, ctx.seed)?.mean)
    })?;
    let (meta, _) = run_meta_train(&env, &cfg.train, &cfg.meta, ctx.seed)?;
    save_meta(&mut run, &meta, ctx.seed, cfg.meta.iterations)?;
    let zero_shot = ctx.front(PolicyTag::Meta, |z| {
        Ok(evaluate_policy(&meta.policy(z), &env, z, cfg.run.eval_episodes, ctx.seed)?.mean)
    })?;
    let tuned = ctx.front(PolicyTag::MetaFineTuned, |z| {
        let policy = meta_fine_tune(&meta, &env, z, cfg.meta.finetune_steps, &cfg.train, &cfg.meta, ctx.seed)?.0;
        Ok(evaluate_policy(&policy, &env, z, cfg.run.eval_episodes, ctx.seed)?.mean)
    })?;
    let random = ctx.front(PolicyTag::Random, |z| Ok(random_policy_eval(&env, z, cfg.run.eval_episodes, ctx.seed)?.mean))?;

    let fronts = vec![random, zero_shot, tuned, hybrid];
    write_fronts(&mut run, &fronts, ctx.seed)?;
    let costs: Vec<TrainingCost> = (1..=cfg.zetas().len())
        .map(|j| TrainingCost::new(j, cfg.meta.iterations, cfg.meta.finetune_steps, cfg.train.episodes))
        .collect();
    output::write_training_cost(&run.artifact("training_cost.csv"), &costs)?;
    Ok((run.finish(cfg)?, fronts))
}

fn write_fronts(run: &mut RunDir, fronts: &[Front], seed: u64) -> Result<()> {
    for front in fronts {
        output::write_front(&run.artifact(front_file(front.tag)), front)?;
    }
    let rows: Vec<HypervolumeRow> = fronts.iter().map(|f| HypervolumeRow::from_front(f, seed)).collect();
    output::write_hypervolume(&run.artifact("hypervolume.csv"), &rows)
}

/// Recomputes hypervolumes of saved front CSVs against the configured
/// reference point.
pub fn hypervolume(ctx: &Context, fronts: &[PathBuf]) -> Result<RunManifest> {
    let mut run = RunDir::create(&ctx.out, "hypervolume", ctx.seed)?;
    let reference = ctx.reference()?;
    let mut rows = Vec::with_capacity(fronts.len());
    for path in fronts {
        let points = output::read_front(path)?;
        let first = points.first().ok_or_else(|| Error::Format { path: path.clone(), reason: "front has no points".into() })?;
        let inside: Vec<(f64, f64)> = points
            .iter()
            .map(|p| (p.avg_aoi, p.avg_power))
            .filter(|p| p.0 <= reference.0 && p.1 <= reference.1)
            .collect();
        let mut rng = stream_rng(ctx.seed, stream::HYPERVOLUME);
        let hv = hypervolume_mc(&inside, reference, ctx.config.run.hypervolume_samples, &mut rng)?;
        rows.push(HypervolumeRow {
            tag: first.tag,
            hypervolume: hv.value,
            stderr: hv.stderr,
            samples: hv.samples,
            ref_aoi: reference.0,
            ref_power: reference.1,
            points: points.len(),
            non_dominated: points.iter().filter(|p| !p.dominated).count(),
            seed: ctx.seed,
        });
    }
    output::write_hypervolume(&run.artifact("hypervolume.csv"), &rows)?;
    run.finish(&ctx.config)
}

pub fn baseline(ctx: &Context, kind: Baseline) -> Result<RunManifest> {
    let command = match kind {
        Baseline::Random => "baseline random",
        Baseline::Exhaustive => "baseline exhaustive",
    };
    let mut run = RunDir::create(&ctx.out, command, ctx.seed)?;
    let env = ctx.env();
    let front = match kind {
        Baseline::Random => ctx.front(PolicyTag::Random, |z| Ok(random_policy_eval(&env, z, ctx.config.run.eval_episodes, ctx.seed)?.mean))?,
        Baseline::Exhaustive => {
            let run = &ctx.config.run;
            ctx.front(PolicyTag::Exhaustive, |z| {
                Ok(exhaustive_search(&env, run.power_levels, z, run.exhaustive_episodes, ctx.seed)?.evaluation.mean)
            })?
        }
    };
    write_fronts(&mut run, &[front], ctx.seed)?;
    run.finish(&ctx.config)
}

fn exhaustive_fits(env: &EnvConfig) -> bool {
    env.network.processes <= MAX_EXHAUSTIVE_PROCESSES
}

/// Hybrid, random and (optionally) exhaustive evaluations of one instance.
fn compare_cell(ctx: &Context, env: &EnvConfig, zeta: f64, sweep: Sweep, value: String, rows: &mut Vec<SweepRow>) -> Result<()> {
    let policy = ctx.train(env, zeta)?;
    rows.push(SweepRow::new(sweep.name(), &value, PolicyTag::Hybrid, &ctx.evaluate(&policy, env, zeta)?, ctx.seed));
    rows.push(SweepRow::new(sweep.name(), &value, PolicyTag::Random, &ctx.random(env, zeta)?, ctx.seed));
    if ctx.config.sweep.include_exhaustive && exhaustive_fits(env) {
        rows.push(SweepRow::new(sweep.name(), &value, PolicyTag::Exhaustive, &ctx.exhaustive(env, zeta)?, ctx.seed));
    }
    Ok(())
}

fn sweep_error(field: &'static str, reason: &str) -> Error {
    noma_aoi_core::Error::InvalidConfig { field, reason: reason.into() }.into()
}

pub fn sweep(ctx: &Context, kind: Sweep) -> Result<RunManifest> {
    let mut run = RunDir::create(&ctx.out, &format!("sweep {}", kind.name()), ctx.seed)?;
    let cfg = &ctx.config;
    let base = ctx.env();
    let zeta = cfg.sweep.zeta;
    let mut rows = Vec::new();
    match kind {
        Sweep::Zeta => {
            for z in cfg.zetas() {
                compare_cell(ctx, &base, z, kind, z.to_string(), &mut rows)?;
            }
        }
        Sweep::Vehicles => {
            if base.fixed_vehicles.is_some() {
                return Err(sweep_error("fixed_vehicles", "cannot sweep the vehicle count with frozen vehicles"));
            }
            for &v in &cfg.sweep.vehicles {
                let mut env = base.clone();
                env.network.vehicles = v;
                compare_cell(ctx, &env, zeta, kind, v.to_string(), &mut rows)?;
            }
        }
        Sweep::Processes => {
            if base.demand.matrix.is_some() {
                return Err(sweep_error("demand.matrix", "cannot sweep the process count with an explicit demand matrix"));
            }
            for &f in &cfg.sweep.processes {
                let mut env = base.clone();
                env.network.processes = f;
                env.demand.per_vehicle = demand_for_processes(f);
                env.validate()?;
                compare_cell(ctx, &env, zeta, kind, f.to_string(), &mut rows)?;
            }
        }
        Sweep::Demand => {
            if base.demand.matrix.is_some() {
                return Err(sweep_error("demand.matrix", "cannot sweep |R_i| with an explicit demand matrix"));
            }
            for &r in &cfg.sweep.demand {
                if r > base.network.processes {
                    return Err(sweep_error("sweep.demand", "|R_i| cannot exceed the number of processes"));
                }
                let mut env = base.clone();
                env.demand.per_vehicle = r;
                compare_cell(ctx, &env, zeta, kind, r.to_string(), &mut rows)?;
            }
        }
        Sweep::Speed | Sweep::Environment => {
            // Trained once on the base instance, evaluated on shifted ones.
            let policy = ctx.train(&base, zeta)?;
            let variants: Vec<(String, EnvConfig)> = if kind == Sweep::Speed {
                cfg.sweep
                    .speeds
                    .iter()
                    .map(|&(lo, hi)| {
                        let mut env = base.clone();
                        env.road.speed_range = (lo, hi);
                        (format!("{lo}-{hi}"), env)
                    })
                    .collect()
            } else {
                cfg.sweep
                    .lanes
                    .iter()
                    .map(|&lanes| {
                        let mut env = base.clone();
                        env.road.lane_count = lanes;
                        (lanes.to_string(), env)
                    })
                    .collect()
            };
            for (value, env) in variants {
                env.validate()?;
                rows.push(SweepRow::new(kind.name(), &value, PolicyTag::Hybrid, &ctx.evaluate(&policy, &env, zeta)?, ctx.seed));
                rows.push(SweepRow::new(kind.name(), &value, PolicyTag::Random, &ctx.random(&env, zeta)?, ctx.seed));
            }
        }
        Sweep::FinetuneSteps => {
            let (meta, _) = run_meta_train(&base, &cfg.train, &cfg.meta, ctx.seed)?;
            for &steps in &cfg.sweep.finetune_steps {
                let policy = meta_fine_tune(&meta, &base, zeta, steps, &cfg.train, &cfg.meta, ctx.seed)?.0;
                let tag = if steps == 0 { PolicyTag::Meta } else { PolicyTag::MetaFineTuned };
                rows.push(SweepRow::new(kind.name(), steps, tag, &ctx.evaluate(&policy, &base, zeta)?, ctx.seed));
            }
        }
    }
    output::write_sweep(&run.artifact(kind.file()), &rows)?;
    run.finish(cfg)
}

fn save_policy(run: &mut RunDir, policy: &HybridPolicy, tag: PolicyTag, seed: u64, episodes: usize) -> Result<()> {
    snapshot::save_policy(&run.root().join(POLICY_DIR), policy, tag, seed, episodes)?;
    run.artifact(&format!("{POLICY_DIR}/{}", snapshot::NETWORKS_FILE));
    run.artifact(&format!("{POLICY_DIR}/{}", snapshot::HEADER_FILE));
    Ok(())
}

fn save_meta(run: &mut RunDir, meta: &MetaParams, seed: u64, iterations: usize) -> Result<()> {
    snapshot::save_meta(&run.root().join(META_DIR), meta, seed, iterations)?;
    run.artifact(&format!("{META_DIR}/{}", snapshot::NETWORKS_FILE));
    run.artifact(&format!("{META_DIR}/{}", snapshot::HEADER_FILE));
    Ok(())
}
