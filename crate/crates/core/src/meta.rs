//! Multi-step MAML over preference weights and per-weight fine-tuning.
//!
//! Each task is a value of ζ. The inner loop runs `inner_steps` plain
//! gradient steps from the meta initialization, one fresh episode per step.
//! The outer loop moves the initialization along the mean post-adaptation
//! gradient, either first-order or back-propagated through every inner step
//! with exact Hessian-vector products.

use alloc::vec::Vec;

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{
    self, act_continuous, act_discrete, continue_training, Batch, HybridPolicy, LearningCurve, TrainConfig, Transition,
};
use crate::env::{EnvConfig, Environment, OrderSpace};
use crate::nn::{self, to_duals, Mlp};
use crate::rng::{stream, stream_rng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetaMode {
    /// Uses the post-adaptation gradient directly.
    FirstOrder,
    /// Multiplies by `Π (I − α H_k)` over the inner steps.
    Exact,
}

/// Sampling rule for task preference weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskDistribution {
    pub low: f64,
    pub high: f64,
    pub tasks_per_iteration: usize,
}

impl Default for TaskDistribution {
    fn default() -> Self {
        Self { low: 0.0, high: 1.0, tasks_per_iteration: 4 }
    }
}

impl TaskDistribution {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.low && self.low <= self.high && self.high <= 1.0) {
            return Err(Error::config("tasks", alloc::format!("need 0 ≤ low ≤ high ≤ 1, got [{}, {}]", self.low, self.high)));
        }
        if self.tasks_per_iteration == 0 {
            return Err(Error::config("tasks_per_iteration", "must be at least 1"));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.low + (self.high - self.low) * rng.random::<f64>()
    }
}

/// Step sizes for the three networks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSizes {
    pub dqn: f64,
    pub critic: f64,
    pub actor: f64,
}

impl StepSizes {
    pub fn scaled(self, k: f64) -> Self {
        Self { dqn: self.dqn * k, critic: self.critic * k, actor: self.actor * k }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaConfig {
    pub inner: StepSizes,
    pub outer: StepSizes,
    pub inner_steps: usize,
    pub iterations: usize,
    pub mode: MetaMode,
    pub tasks: TaskDistribution,
    /// ε̄ and noise scale of the inner-loop rollouts.
    pub rollout_epsilon: f64,
    pub rollout_noise: f64,
    pub finetune_steps: usize,
    pub finetune_epsilon: f64,
    pub finetune_noise: f64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            inner: StepSizes { dqn: 0.1, critic: 0.01, actor: 0.001 },
            outer: StepSizes { dqn: 0.01, critic: 0.01, actor: 0.001 },
            inner_steps: 50,
            iterations: 500,
            mode: MetaMode::FirstOrder,
            tasks: TaskDistribution::default(),
            rollout_epsilon: 0.2,
            rollout_noise: 0.1,
            finetune_steps: 50,
            finetune_epsilon: 0.1,
            finetune_noise: 0.05,
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        for (field, s) in [("inner", self.inner), ("outer", self.outer)] {
            for v in [s.dqn, s.critic, s.actor] {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::config(field, alloc::format!("step sizes must be non-negative, got {v}")));
                }
            }
        }
        for (field, v) in [
            ("rollout_epsilon", self.rollout_epsilon),
            ("finetune_epsilon", self.finetune_epsilon),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(field, alloc::format!("must lie in [0, 1], got {v}")));
            }
        }
        if !(self.rollout_noise >= 0.0 && self.finetune_noise >= 0.0) {
            return Err(Error::config("rollout_noise", "noise scales must be non-negative"));
        }
        self.tasks.validate()
    }
}

/// Meta initializations of the three online networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaParams {
    pub dqn: Mlp,
    pub actor: Mlp,
    pub critic: Mlp,
}

impl MetaParams {
    pub fn init<R: Rng + ?Sized>(processes: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let p = HybridPolicy::new(processes, hidden, 0.5, rng)?;
        Ok(Self { dqn: p.dqn, actor: p.actor, critic: p.critic })
    }

    /// A policy at preference `zeta` whose online and target networks are
    /// copies of the meta initialization.
    pub fn policy(&self, zeta: f64) -> HybridPolicy {
        HybridPolicy::from_online(zeta, self.dqn.clone(), self.actor.clone(), self.critic.clone())
    }
}

/// Parameter gradients of the three networks.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub dqn: Vec<f64>,
    pub actor: Vec<f64>,
    pub critic: Vec<f64>,
}

impl Gradients {
    fn zeros_like(meta: &MetaParams) -> Self {
        Self {
            dqn: alloc::vec![0.0; meta.dqn.params().len()],
            actor: alloc::vec![0.0; meta.actor.params().len()],
            critic: alloc::vec![0.0; meta.critic.params().len()],
        }
    }

    pub fn norm(&self) -> f64 {
        let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        libm::sqrt(sq(&self.dqn) + sq(&self.actor) + sq(&self.critic))
    }
}

/// Mini-batch and fixed regression targets of one inner or outer step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepData {
    pub batch: Batch,
    pub dqn_targets: Vec<f64>,
    pub critic_targets: Vec<f64>,
}

/// Parameters before an inner step together with the data it used.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerRecord {
    pub params: MetaParams,
    pub data: StepData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adaptation {
    pub zeta: f64,
    pub adapted: MetaParams,
    pub records: Vec<InnerRecord>,
}

/// `steps` plain gradient-descent steps on `params`; `grad(k, θ)` supplies
/// the gradient for step `k`.
pub fn gradient_descent(
    params: &mut [f64],
    steps: usize,
    step_size: f64,
    mut grad: impl FnMut(usize, &[f64]) -> Result<Vec<f64>>,
) -> Result<()> {
    for k in 0..steps {
        let g = grad(k, params)?;
        nn::sgd_step(params, &g, step_size)?;
    }
    Ok(())
}

/// Task gradients at `params` on `data`; the actor uses `params.critic`.
pub fn task_gradients(params: &MetaParams, data: &StepData) -> Result<Gradients> {
    let b = &data.batch;
    let (_, dqn) = agents::regression_loss_grad(params.dqn.architecture(), params.dqn.params(), &b.states, &b.orders, &data.dqn_targets)?;
    let zeros = alloc::vec![0; b.size];
    let (_, critic) =
        agents::regression_loss_grad(params.critic.architecture(), params.critic.params(), &b.critic_inputs(), &zeros, &data.critic_targets)?;
    let (_, actor) = agents::actor_loss_grad(params.actor.architecture(), params.actor.params(), &params.critic, &b.states, &b.ranks)?;
    Ok(Gradients { dqn, actor, critic })
}

/// Hessian-vector products of the three task losses at `params`, one
/// direction per network. Cross-network curvature is not included.
pub fn task_hvp(params: &MetaParams, data: &StepData, v: &Gradients) -> Result<Gradients> {
    let b = &data.batch;
    let eps = |g: Vec<nn::Dual>| g.into_iter().map(|d| d.eps).collect::<Vec<_>>();
    let (_, dqn) = agents::regression_loss_grad(
        params.dqn.architecture(),
        &to_duals(params.dqn.params(), Some(&v.dqn)),
        &b.states,
        &b.orders,
        &data.dqn_targets,
    )?;
    let zeros = alloc::vec![0; b.size];
    let (_, critic) = agents::regression_loss_grad(
        params.critic.architecture(),
        &to_duals(params.critic.params(), Some(&v.critic)),
        &b.critic_inputs(),
        &zeros,
        &data.critic_targets,
    )?;
    let (_, actor) = agents::actor_loss_grad(
        params.actor.architecture(),
        &to_duals(params.actor.params(), Some(&v.actor)),
        &params.critic,
        &b.states,
        &b.ranks,
    )?;
    Ok(Gradients { dqn: eps(dqn), actor: eps(actor), critic: eps(critic) })
}

fn sgd(params: &mut MetaParams, g: &Gradients, step: StepSizes) -> Result<()> {
    nn::sgd_step(params.dqn.params_mut(), &g.dqn, step.dqn)?;
    nn::sgd_step(params.critic.params_mut(), &g.critic, step.critic)?;
    nn::sgd_step(params.actor.params_mut(), &g.actor, step.actor)
}

/// Rolls out one episode and packs a mini-batch with targets from the
/// frozen `targets` networks.
struct Sampler<'a> {
    env: Environment,
    orders: OrderSpace,
    targets: &'a MetaParams,
    batch_size: usize,
    discount: f64,
    epsilon: f64,
    noise: f64,
}

impl Sampler<'_> {
    fn rollout(&mut self, params: &MetaParams, rng: &mut ChaCha8Rng) -> Result<StepData> {
        let mut state = self.env.reset(rng.next_u64())?;
        let mut episode = Vec::with_capacity(self.env.horizon());
        while !self.env.is_done() {
            let order = act_discrete(&params.dqn, &state, self.epsilon, rng)?;
            let alpha = act_continuous(&params.actor, &state, self.noise, rng)?;
            let out = self.env.step(self.orders.get(order), &alpha)?;
            episode.push(Transition {
                state: core::mem::take(&mut state),
                order,
                alpha,
                reward: out.reward,
                next_state: out.state.clone(),
                done: out.done,
            });
            state = out.state;
        }
        let picks = rand::seq::index::sample(rng, episode.len(), self.batch_size.min(episode.len()));
        let batch = Batch::from_transitions(picks.iter().map(|k| &episode[k]))?;
        let t = self.targets;
        Ok(StepData {
            dqn_targets: agents::dqn_targets(&t.dqn, &batch, self.discount)?,
            critic_targets: agents::critic_targets(&t.critic, &t.actor, &t.dqn, &batch, self.discount)?,
            batch,
        })
    }
}

/// Inner adaptation for task `zeta`: `inner_steps` gradient steps from
/// `meta`, each on a fresh episode. Targets stay at `meta` throughout.
pub fn inner_adapt(
    meta: &MetaParams,
    zeta: f64,
    env_config: &EnvConfig,
    hp: &TrainConfig,
    cfg: &MetaConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Adaptation, StepData)> {
    let mut sampler = Sampler {
        env: Environment::new(env_config.clone(), zeta)?,
        orders: OrderSpace::new(meta.actor.architecture().output_width()),
        targets: meta,
        batch_size: hp.batch_size,
        discount: hp.discount,
        epsilon: cfg.rollout_epsilon,
        noise: cfg.rollout_noise,
    };
    let mut params = meta.clone();
    let mut records = Vec::new();
    for _ in 0..cfg.inner_steps {
        let data = sampler.rollout(&params, rng)?;
        let g = task_gradients(&params, &data)?;
        if cfg.mode == MetaMode::Exact {
            records.push(InnerRecord { params: params.clone(), data });
        }
        sgd(&mut params, &g, cfg.inner)?;
    }
    // independent data for the outer gradient
    let outer = sampler.rollout(&params, rng)?;
    Ok((Adaptation { zeta, adapted: params, records }, outer))
}

/// Meta-gradient contribution of one task.
pub fn task_meta_gradient(adaptation: &Adaptation, outer: &StepData, cfg: &MetaConfig) -> Result<Gradients> {
    let mut v = task_gradients(&adaptation.adapted, outer)?;
    if cfg.mode == MetaMode::Exact {
        if adaptation.records.len() != cfg.inner_steps {
            return Err(Error::MissingCache);
        }
        for rec in adaptation.records.iter().rev() {
            let hv = task_hvp(&rec.params, &rec.data, &v)?;
            let step = |v: &mut [f64], h: &[f64], a: f64| v.iter_mut().zip(h).for_each(|(x, y)| *x -= a * y);
            step(&mut v.dqn, &hv.dqn, cfg.inner.dqn);
            step(&mut v.critic, &hv.critic, cfg.inner.critic);
            step(&mut v.actor, &hv.actor, cfg.inner.actor);
        }
    }
    Ok(v)
}

/// `meta − β · mean_j g_j`.
pub fn outer_update(meta: &MetaParams, task_grads: &[Gradients], outer: StepSizes) -> Result<MetaParams> {
    let mean = mean_gradients(meta, task_grads)?;
    let mut next = meta.clone();
    sgd(&mut next, &mean, outer)?;
    Ok(next)
}

pub fn mean_gradients(meta: &MetaParams, task_grads: &[Gradients]) -> Result<Gradients> {
    if task_grads.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut mean = Gradients::zeros_like(meta);
    let w = 1.0 / task_grads.len() as f64;
    for g in task_grads {
        for (acc, src) in [(&mut mean.dqn, &g.dqn), (&mut mean.actor, &g.actor), (&mut mean.critic, &g.critic)] {
            if acc.len() != src.len() {
                return Err(Error::ShapeMismatch { expected: acc.len(), got: src.len() });
            }
            acc.iter_mut().zip(src).for_each(|(a, s)| *a += w * s);
        }
    }
    Ok(mean)
}

/// Per-iteration trace of meta-training.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetaHistory {
    pub zetas: Vec<Vec<f64>>,
    pub grad_norms: Vec<f64>,
}

pub fn meta_train(
    env_config: &EnvConfig,
    hp: &TrainConfig,
    cfg: &MetaConfig,
    seed: u64,
) -> Result<(MetaParams, MetaHistory)> {
    let meta = MetaParams::init(env_config.network.processes, &hp.hidden, &mut stream_rng(seed, stream::INIT))?;
    meta_train_from(meta, env_config, hp, cfg, seed)
}

pub fn meta_train_from(
    mut meta: MetaParams,
    env_config: &EnvConfig,
    hp: &TrainConfig,
    cfg: &MetaConfig,
    seed: u64,
) -> Result<(MetaParams, MetaHistory)> {
    env_config.validate()?;
    hp.validate()?;
    cfg.validate()?;
    let mut rng = stream_rng(seed, stream::META);
    let mut history = MetaHistory::default();

    for _ in 0..cfg.iterations {
        let zetas: Vec<f64> = (0..cfg.tasks.tasks_per_iteration).map(|_| cfg.tasks.sample(&mut rng)).collect();
        let mut grads = Vec::with_capacity(zetas.len());
        for &zeta in &zetas {
            let (adaptation, outer) = inner_adapt(&meta, zeta, env_config, hp, cfg, &mut rng)?;
            grads.push(task_meta_gradient(&adaptation, &outer, cfg)?);
        }
        let mean_norm = grads.iter().map(Gradients::norm).sum::<f64>() / grads.len() as f64;
        meta = outer_update(&meta, &grads, cfg.outer)?;
        history.zetas.push(zetas);
        history.grad_norms.push(mean_norm);
    }
    Ok((meta, history))
}

/// Copies the meta initialization into a policy at `zeta` and trains it
/// for `steps` episodes with fine-tuning exploration.
pub fn fine_tune(
    meta: &MetaParams,
    env_config: &EnvConfig,
    zeta: f64,
    steps: usize,
    hp: &TrainConfig,
    cfg: &MetaConfig,
    seed: u64,
) -> Result<(HybridPolicy, LearningCurve)> {
    let tuned = TrainConfig {
        epsilon_start: cfg.finetune_epsilon,
        epsilon_end: cfg.finetune_epsilon.min(hp.epsilon_end),
        noise_start: cfg.finetune_noise,
        noise_end: cfg.finetune_noise.min(hp.noise_end),
        ..hp.clone()
    };
    let mut policy = meta.policy(0.0);
    policy.zeta = zeta;
    continue_training(policy, env_config, &tuned, steps, seed)
}
