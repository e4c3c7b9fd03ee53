//! Hybrid agent: a DQN picks the SIC order, a DDPG actor–critic picks the
//! power fractions, and both learn from the same reward.

use alloc::vec::Vec;

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::aoi::ObjectivePoint;
use crate::env::{EnvConfig, Environment, OrderSpace};
use crate::nn::{self, Adam, Architecture, Mlp, OutputActivation, Real};
use crate::rng::{stream, stream_rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    /// Index into [`OrderSpace`].
    pub order: usize,
    pub alpha: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Fixed-capacity ring buffer; the oldest transition is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity: capacity.max(1), items: Vec::new(), next: 0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Stored transitions, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// Up to `batch` distinct transitions drawn uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Batch> {
        if self.items.is_empty() || batch == 0 {
            return Err(Error::EmptyBatch);
        }
        let picks = rand::seq::index::sample(rng, self.items.len(), batch.min(self.items.len()));
        Batch::from_transitions(picks.iter().map(|k| &self.items[k]))
    }
}

/// Column-packed mini-batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub size: usize,
    pub states: Vec<f64>,
    pub orders: Vec<usize>,
    pub alphas: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<f64>,
    pub dones: Vec<bool>,
    /// Decoding rank of every process under the stored order.
    pub ranks: Vec<f64>,
}

impl Batch {
    pub fn from_transitions<'a>(items: impl IntoIterator<Item = &'a Transition>) -> Result<Self> {
        let mut b = Batch {
            size: 0,
            states: Vec::new(),
            orders: Vec::new(),
            alphas: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            dones: Vec::new(),
            ranks: Vec::new(),
        };
        for t in items {
            b.size += 1;
            b.states.extend_from_slice(&t.state);
            b.orders.push(t.order);
            b.alphas.extend_from_slice(&t.alpha);
            b.rewards.push(t.reward);
            b.next_states.extend_from_slice(&t.next_state);
            b.dones.push(t.done);
            b.ranks.extend(order_ranks(&nth_permutation(t.order, t.alpha.len())));
        }
        if b.size == 0 {
            return Err(Error::EmptyBatch);
        }
        Ok(b)
    }

    /// Rows of `s ‖ α ‖ ranks`, the critic input.
    pub fn critic_inputs(&self) -> Vec<f64> {
        critic_rows(&self.states, &self.alphas, &self.ranks, self.size)
    }
}

/// The `index`-th permutation of `0..n` in lexicographic order.
pub fn nth_permutation(mut index: usize, n: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    let mut fact: usize = (1..n).product();
    let mut out = Vec::with_capacity(n);
    for k in (1..=n).rev() {
        let q = index / fact.max(1);
        index %= fact.max(1);
        out.push(pool.remove(q));
        if k > 1 {
            fact /= k - 1;
        }
    }
    out
}

/// Position of each process in `order`, scaled to [0, 1].
pub fn order_ranks(order: &[usize]) -> Vec<f64> {
    let n = order.len();
    let mut ranks = alloc::vec![0.0; n];
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    for (pos, &p) in order.iter().enumerate() {
        ranks[p] = pos as f64 / denom;
    }
    ranks
}

fn critic_rows<T: Copy>(states: &[T], alphas: &[T], ranks: &[T], rows: usize) -> Vec<T> {
    join_rows(&join_rows(states, alphas, rows), ranks, rows)
}

fn join_rows<T: Copy>(a: &[T], b: &[T], rows: usize) -> Vec<T> {
    let (wa, wb) = (a.len() / rows, b.len() / rows);
    let mut out = Vec::with_capacity(a.len() + b.len());
    for r in 0..rows {
        out.extend_from_slice(&a[r * wa..(r + 1) * wa]);
        out.extend_from_slice(&b[r * wb..(r + 1) * wb]);
    }
    out
}

/// ε-greedy over the order Q-values; ties go to the lowest index.
pub fn act_discrete<R: Rng + ?Sized>(dqn: &Mlp, state: &[f64], epsilon: f64, rng: &mut R) -> Result<usize> {
    let n = dqn.architecture().output_width();
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return Ok(rng.random_range(0..n));
    }
    Ok(argmax(&dqn.forward(state)?))
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = k;
        }
    }
    best
}

/// Actor output plus Gaussian noise, clipped to [0, 1].
pub fn act_continuous<R: Rng + ?Sized>(actor: &Mlp, state: &[f64], noise: f64, rng: &mut R) -> Result<Vec<f64>> {
    let mut alpha = actor.forward(state)?;
    if noise > 0.0 {
        let dist = Normal::new(0.0, noise).map_err(|_| Error::config("noise", "must be finite"))?;
        for a in &mut alpha {
            *a = (*a + dist.sample(rng)).clamp(0.0, 1.0);
        }
    }
    Ok(alpha)
}

/// Mean squared error between the picked outputs and `targets`, with its
/// parameter gradient. `picks[b]` selects the output unit of row `b`.
pub fn regression_loss_grad<T: Real>(
    arch: &Architecture,
    params: &[T],
    inputs: &[f64],
    picks: &[usize],
    targets: &[f64],
) -> Result<(T, Vec<T>)> {
    let batch = targets.len();
    if batch == 0 {
        return Err(Error::EmptyBatch);
    }
    let x: Vec<T> = inputs.iter().map(|&v| T::from_f64(v)).collect();
    let tape = nn::forward_tape(arch, params, &x, batch)?;
    let out = tape.output();
    let width = arch.output_width();
    let scale = T::from_f64(1.0 / batch as f64);
    let mut loss = T::default();
    let mut upstream = alloc::vec![T::default(); out.len()];
    for b in 0..batch {
        let k = b * width + picks[b];
        let diff = out[k] - T::from_f64(targets[b]);
        loss += diff * diff * scale;
        upstream[k] = T::from_f64(2.0) * diff * scale;
    }
    let (grad, _) = nn::backward(arch, params, &tape, &upstream)?;
    Ok((loss, grad))
}

/// `−mean Qc(s, μ(s), ranks)` and its gradient w.r.t. the actor only.
pub fn actor_loss_grad<T: Real>(
    actor: &Architecture,
    params: &[T],
    critic: &Mlp,
    states: &[f64],
    ranks: &[f64],
) -> Result<(T, Vec<T>)> {
    let batch = states.len() / actor.input().max(1);
    if batch == 0 {
        return Err(Error::EmptyBatch);
    }
    let s: Vec<T> = states.iter().map(|&v| T::from_f64(v)).collect();
    let actor_tape = nn::forward_tape(actor, params, &s, batch)?;
    let r: Vec<T> = ranks.iter().map(|&v| T::from_f64(v)).collect();
    let inputs = critic_rows(&s, actor_tape.output(), &r, batch);
    let critic_params: Vec<T> = critic.params().iter().map(|&v| T::from_f64(v)).collect();
    let critic_tape = nn::forward_tape(critic.architecture(), &critic_params, &inputs, batch)?;
    let scale = T::from_f64(-1.0 / batch as f64);
    let mut loss = T::default();
    for &q in critic_tape.output() {
        loss += q * scale;
    }
    let upstream = alloc::vec![scale; batch];
    let (_, d_input) = nn::backward(critic.architecture(), &critic_params, &critic_tape, &upstream)?;
    let ws = actor.input();
    let wa = actor.output_width();
    let width = critic.architecture().input();
    let mut d_alpha = Vec::with_capacity(batch * wa);
    for b in 0..batch {
        d_alpha.extend_from_slice(&d_input[b * width + ws..b * width + ws + wa]);
    }
    let (grad, _) = nn::backward(actor, params, &actor_tape, &d_alpha)?;
    Ok((loss, grad))
}

/// `ρ + γ·max_a Q'(s', a)`, bootstrap dropped on terminal rows.
pub fn dqn_targets(target: &Mlp, batch: &Batch, discount: f64) -> Result<Vec<f64>> {
    let q_next = target.forward_batch(&batch.next_states, batch.size)?;
    let width = target.architecture().output_width();
    Ok((0..batch.size)
        .map(|b| {
            let boot = if batch.dones[b] {
                0.0
            } else {
                q_next[b * width..(b + 1) * width].iter().copied().fold(f64::NEG_INFINITY, f64::max)
            };
            batch.rewards[b] + discount * boot
        })
        .collect())
}

/// `ρ + γ·Qc'(s', μ'(s'), o')` with `o'` the target DQN's greedy order;
/// bootstrap dropped on terminal rows.
pub fn critic_targets(critic_target: &Mlp, actor_target: &Mlp, dqn_target: &Mlp, batch: &Batch, discount: f64) -> Result<Vec<f64>> {
    let mu = actor_target.forward_batch(&batch.next_states, batch.size)?;
    let q_orders = dqn_target.forward_batch(&batch.next_states, batch.size)?;
    let width = dqn_target.architecture().output_width();
    let f = mu.len() / batch.size;
    let ranks: Vec<f64> = (0..batch.size)
        .flat_map(|b| order_ranks(&nth_permutation(argmax(&q_orders[b * width..(b + 1) * width]), f)))
        .collect();
    let q = critic_target.forward_batch(&critic_rows(&batch.next_states, &mu, &ranks, batch.size), batch.size)?;
    Ok((0..batch.size)
        .map(|b| batch.rewards[b] + if batch.dones[b] { 0.0 } else { discount * q[b] })
        .collect())
}

pub fn dqn_loss(online: &Mlp, target: &Mlp, batch: &Batch, discount: f64) -> Result<(f64, Vec<f64>)> {
    let y = dqn_targets(target, batch, discount)?;
    regression_loss_grad(online.architecture(), online.params(), &batch.states, &batch.orders, &y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdpgLosses {
    pub critic_loss: f64,
    pub critic_grad: Vec<f64>,
    pub actor_loss: f64,
    pub actor_grad: Vec<f64>,
}

/// Critic and actor losses; `dqn_target` supplies the bootstrap order.
pub fn ddpg_losses(
    critic: &Mlp,
    critic_target: &Mlp,
    actor: &Mlp,
    actor_target: &Mlp,
    dqn_target: &Mlp,
    batch: &Batch,
    discount: f64,
) -> Result<DdpgLosses> {
    let y = critic_targets(critic_target, actor_target, dqn_target, batch, discount)?;
    let zeros = alloc::vec![0; batch.size];
    let (critic_loss, critic_grad) =
        regression_loss_grad(critic.architecture(), critic.params(), &batch.critic_inputs(), &zeros, &y)?;
    let (actor_loss, actor_grad) = actor_loss_grad(actor.architecture(), actor.params(), critic, &batch.states, &batch.ranks)?;
    Ok(DdpgLosses { critic_loss, critic_grad, actor_loss, actor_grad })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateCadence {
    /// One mini-batch update after every environment step.
    PerStep,
    /// One mini-batch update at the end of every episode.
    PerEpisode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub lr_dqn: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub batch_size: usize,
    pub discount: f64,
    pub episodes: usize,
    pub replay_capacity: usize,
    pub tau: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the run over which ε decays linearly.
    pub epsilon_decay: f64,
    pub noise_start: f64,
    pub noise_end: f64,
    pub cadence: UpdateCadence,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: alloc::vec![512, 256, 128],
            lr_dqn: 1e-3,
            lr_actor: 1e-4,
            lr_critic: 1e-3,
            batch_size: 64,
            discount: 0.5,
            episodes: 1000,
            replay_capacity: 100_000,
            tau: 0.005,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay: 0.5,
            noise_start: 0.2,
            noise_end: 0.02,
            cadence: UpdateCadence::PerStep,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lr_dqn", self.lr_dqn),
            ("lr_actor", self.lr_actor),
            ("lr_critic", self.lr_critic),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(field, alloc::format!("must be positive, got {v}")));
            }
        }
        let unit = [
            ("discount", self.discount),
            ("tau", self.tau),
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
            ("epsilon_decay", self.epsilon_decay),
        ];
        for (field, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(field, alloc::format!("must lie in [0, 1], got {v}")));
            }
        }
        if !(self.noise_start >= 0.0 && self.noise_end >= 0.0) {
            return Err(Error::config("noise_start", "noise scales must be non-negative"));
        }
        if self.batch_size == 0 || self.replay_capacity == 0 {
            return Err(Error::config("batch_size", "batch size and replay capacity must be positive"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden", "layer widths must be positive"));
        }
        Ok(())
    }

    /// ε̄ for `episode` of a run of `total` episodes.
    pub fn epsilon_at(&self, episode: usize, total: usize) -> f64 {
        let span = self.epsilon_decay * total as f64;
        let frac = if span > 0.0 { (episode as f64 / span).min(1.0) } else { 1.0 };
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }

    pub fn noise_at(&self, episode: usize, total: usize) -> f64 {
        let frac = if total > 1 { episode as f64 / (total - 1) as f64 } else { 1.0 };
        self.noise_start + (self.noise_end - self.noise_start) * frac
    }
}

/// Online and target networks of both agents for one preference weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridPolicy {
    pub zeta: f64,
    pub dqn: Mlp,
    pub dqn_target: Mlp,
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub critic: Mlp,
    pub critic_target: Mlp,
}

impl HybridPolicy {
    pub fn new<R: Rng + ?Sized>(processes: usize, hidden: &[usize], zeta: f64, rng: &mut R) -> Result<Self> {
        if !(0.0..=1.0).contains(&zeta) {
            return Err(Error::config("zeta", alloc::format!("must lie in [0, 1], got {zeta}")));
        }
        let s = 2 * processes;
        let orders = OrderSpace::new(processes).len();
        let dqn = Mlp::new(Architecture::new(s, hidden, orders, OutputActivation::Identity), rng);
        let actor = Mlp::new(Architecture::new(s, hidden, processes, OutputActivation::Sigmoid), rng);
        let critic = Mlp::new(Architecture::new(s + 2 * processes, hidden, 1, OutputActivation::Identity), rng);
        Ok(Self::from_online(zeta, dqn, actor, critic))
    }

    /// Targets start as copies of the online networks.
    pub fn from_online(zeta: f64, dqn: Mlp, actor: Mlp, critic: Mlp) -> Self {
        Self {
            zeta,
            dqn_target: dqn.clone(),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            dqn,
            actor,
            critic,
        }
    }

    pub fn processes(&self) -> usize {
        self.actor.architecture().output_width()
    }

    /// Greedy hybrid action: (order index, α).
    pub fn act_greedy(&self, state: &[f64]) -> Result<(usize, Vec<f64>)> {
        Ok((argmax(&self.dqn.forward(state)?), self.actor.forward(state)?))
    }

    fn check_env(&self, config: &EnvConfig) -> Result<()> {
        if config.network.processes != self.processes() {
            return Err(Error::ShapeMismatch { expected: self.processes(), got: config.network.processes });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearningCurve {
    /// Mean per-slot reward of each episode.
    pub rewards: Vec<f64>,
}

impl LearningCurve {
    pub const WINDOW: usize = 20;

    /// Trailing mean over at most [`Self::WINDOW`] episodes.
    pub fn running_mean(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rewards.len());
        let mut sum = 0.0;
        for (k, r) in self.rewards.iter().enumerate() {
            sum += r;
            if k >= Self::WINDOW {
                sum -= self.rewards[k - Self::WINDOW];
            }
            out.push(sum / (k + 1).min(Self::WINDOW) as f64);
        }
        out
    }
}

/// Single-task training state: the policy plus optimizers, replay and RNGs.
pub struct Trainer {
    pub policy: HybridPolicy,
    pub config: TrainConfig,
    orders: OrderSpace,
    opt_dqn: Adam,
    opt_actor: Adam,
    opt_critic: Adam,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    episode_seeds: ChaCha8Rng,
}

impl Trainer {
    pub fn new(policy: HybridPolicy, config: TrainConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            orders: OrderSpace::new(policy.processes()),
            opt_dqn: Adam::new(config.lr_dqn, policy.dqn.params().len()),
            opt_actor: Adam::new(config.lr_actor, policy.actor.params().len()),
            opt_critic: Adam::new(config.lr_critic, policy.critic.params().len()),
            buffer: ReplayBuffer::new(config.replay_capacity),
            rng: stream_rng(seed, stream::AGENT),
            episode_seeds: stream_rng(seed, stream::ENV),
            policy,
            config,
        })
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    /// Runs `episodes` episodes of act / store / update on `env`.
    pub fn run(&mut self, env: &mut Environment, episodes: usize) -> Result<LearningCurve> {
        self.policy.check_env(env.config())?;
        env.set_zeta(self.policy.zeta)?;
        let mut curve = LearningCurve::default();
        for ep in 0..episodes {
            let epsilon = self.config.epsilon_at(ep, episodes);
            let noise = self.config.noise_at(ep, episodes);
            let mut state = env.reset(self.episode_seeds.next_u64())?;
            let mut total = 0.0;
            let mut slots = 0;
            loop {
                let order = act_discrete(&self.policy.dqn, &state, epsilon, &mut self.rng)?;
                let alpha = act_continuous(&self.policy.actor, &state, noise, &mut self.rng)?;
                let out = env.step(self.orders.get(order), &alpha)?;
                total += out.reward;
                slots += 1;
                self.buffer.push(Transition {
                    state: core::mem::take(&mut state),
                    order,
                    alpha,
                    reward: out.reward,
                    next_state: out.state.clone(),
                    done: out.done,
                });
                state = out.state;
                if self.config.cadence == UpdateCadence::PerStep {
                    self.update()?;
                }
                if out.done {
                    break;
                }
            }
            if self.config.cadence == UpdateCadence::PerEpisode {
                self.update()?;
            }
            curve.rewards.push(total / slots as f64);
        }
        Ok(curve)
    }

    /// One mini-batch update of all three networks and their targets.
    /// Skipped until the buffer holds a full batch.
    pub fn update(&mut self) -> Result<()> {
        if self.buffer.len() < self.config.batch_size {
            return Ok(());
        }
        let batch = self.buffer.sample(self.config.batch_size, &mut self.rng)?;
        let gamma = self.config.discount;
        let p = &mut self.policy;

        let (_, g) = dqn_loss(&p.dqn, &p.dqn_target, &batch, gamma)?;
        self.opt_dqn.step(p.dqn.params_mut(), &g)?;

        let y = critic_targets(&p.critic_target, &p.actor_target, &p.dqn_target, &batch, gamma)?;
        let zeros = alloc::vec![0; batch.size];
        let (_, g) = regression_loss_grad(p.critic.architecture(), p.critic.params(), &batch.critic_inputs(), &zeros, &y)?;
        self.opt_critic.step(p.critic.params_mut(), &g)?;

        let (_, g) = actor_loss_grad(p.actor.architecture(), p.actor.params(), &p.critic, &batch.states, &batch.ranks)?;
        self.opt_actor.step(p.actor.params_mut(), &g)?;

        let tau = self.config.tau;
        nn::soft_update(&mut p.dqn_target, &p.dqn, tau)?;
        nn::soft_update(&mut p.critic_target, &p.critic, tau)?;
        nn::soft_update(&mut p.actor_target, &p.actor, tau)?;
        Ok(())
    }
}

/// Trains a fresh hybrid policy at preference `zeta`.
pub fn train_hybrid(config: &EnvConfig, zeta: f64, hp: &TrainConfig, seed: u64) -> Result<(HybridPolicy, LearningCurve)> {
    let policy = HybridPolicy::new(config.network.processes, &hp.hidden, zeta, &mut stream_rng(seed, stream::INIT))?;
    continue_training(policy, config, hp, hp.episodes, seed)
}

/// Trains an existing policy for `episodes` more episodes with fresh
/// optimizer state and an empty replay buffer.
pub fn continue_training(
    policy: HybridPolicy,
    config: &EnvConfig,
    hp: &TrainConfig,
    episodes: usize,
    seed: u64,
) -> Result<(HybridPolicy, LearningCurve)> {
    let mut env = Environment::new(config.clone(), policy.zeta)?;
    let mut trainer = Trainer::new(policy, hp.clone(), seed)?;
    let curve = trainer.run(&mut env, episodes)?;
    Ok((trainer.policy, curve))
}

/// Mean objectives of greedy rollouts with their standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub episodes: Vec<ObjectivePoint>,
    pub mean: ObjectivePoint,
    pub aoi_stderr: f64,
    pub power_stderr: f64,
    pub objective_stderr: f64,
}

impl Evaluation {
    pub fn from_points(zeta: f64, episodes: Vec<ObjectivePoint>) -> Result<Self> {
        if episodes.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let col = |f: fn(&ObjectivePoint) -> f64| episodes.iter().map(f).collect::<Vec<_>>();
        let (aoi, aoi_stderr) = mean_stderr(&col(|p| p.avg_aoi));
        let (power, power_stderr) = mean_stderr(&col(|p| p.avg_power));
        let (objective, objective_stderr) = mean_stderr(&col(|p| p.objective));
        Ok(Self {
            mean: ObjectivePoint { avg_aoi: aoi, avg_power: power, objective, zeta },
            episodes,
            aoi_stderr,
            power_stderr,
            objective_stderr,
        })
    }
}

pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var / n))
}

/// Greedy rollouts (no exploration) scored at `zeta`.
pub fn evaluate_policy(policy: &HybridPolicy, config: &EnvConfig, zeta: f64, episodes: usize, seed: u64) -> Result<Evaluation> {
    policy.check_env(config)?;
    let orders = OrderSpace::new(policy.processes());
    let mut env = Environment::new(config.clone(), zeta)?;
    let mut seeds = stream_rng(seed, stream::EVAL);
    let mut points = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut state = env.reset(seeds.next_u64())?;
        while !env.is_done() {
            let (order, alpha) = policy.act_greedy(&state)?;
            state = env.step(orders.get(order), &alpha)?.state;
        }
        points.push(env.episode_objective()?);
    }
    Evaluation::from_points(zeta, points)
}
