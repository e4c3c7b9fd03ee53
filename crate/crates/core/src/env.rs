//! Episodic MDP over the dissemination system: state encoding, hybrid action
//! application (decoding order + power fractions) and reward emission.

use alloc::vec::Vec;

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aoi::{aoi_bounds, normalized_aoi, scalarize, AoiBounds, AoiState, DemandMatrix, ObjectivePoint, TrajectoryAccumulator};
use crate::channel::{self, ChannelSnapshot};
use crate::geometry::{self, RoadConfig, VehicleState};
use crate::phy::{sic_chain, DecodingOrder, LinkBudget};
use crate::rng::{stream_rng, stream};
use crate::{Error, Result};

/// Largest process count whose F! order space is enumerated.
pub const MAX_PROCESSES: usize = 6;

/// Radio and traffic parameters. Defaults are the reference simulation values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkParams {
    pub vehicles: usize,
    pub processes: usize,
    pub antennas: usize,
    pub carrier_hz: f64,
    pub light_speed: f64,
    pub bandwidth_hz: f64,
    pub payload_bits: f64,
    /// Watts.
    pub p_max: f64,
    /// σ² in watts.
    pub noise_power: f64,
    pub max_error: f64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self {
            vehicles: 10,
            processes: 4,
            antennas: 64,
            carrier_hz: 3e9,
            light_speed: 2.99e8,
            bandwidth_hz: 10e6,
            payload_bits: 1024.0,
            p_max: 1.0,
            noise_power: 0.1,
            max_error: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemandSpec {
    /// |R_i|, used when `matrix` is absent.
    pub per_vehicle: usize,
    /// Explicit V×F 0/1 matrix.
    pub matrix: Option<Vec<Vec<u8>>>,
    /// Seed of the random demand draw.
    pub seed: u64,
}

impl Default for DemandSpec {
    fn default() -> Self {
        Self { per_vehicle: 2, matrix: None, seed: 0 }
    }
}

impl DemandSpec {
    pub fn build(&self, vehicles: usize, processes: usize) -> Result<DemandMatrix> {
        match &self.matrix {
            Some(rows) => {
                let rows: Vec<Vec<bool>> = rows.iter().map(|r| r.iter().map(|&x| x != 0).collect()).collect();
                let d = DemandMatrix::from_rows(&rows)?;
                if d.vehicles() != vehicles || d.processes() != processes {
                    return Err(Error::config("demand.matrix", "shape must be vehicles x processes"));
                }
                Ok(d)
            }
            None => DemandMatrix::random(vehicles, processes, self.per_vehicle, &mut stream_rng(self.seed, stream::DEMAND)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub network: NetworkParams,
    pub road: RoadConfig,
    pub demand: DemandSpec,
    /// Penalty constant κ for Σα > 1.
    pub penalty: f64,
    /// Frozen vehicle placement used on every reset instead of a random draw.
    pub fixed_vehicles: Option<Vec<VehicleState>>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            network: NetworkParams::default(),
            road: RoadConfig::default(),
            demand: DemandSpec::default(),
            penalty: 1.0,
            fixed_vehicles: None,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let n = &self.network;
        if n.vehicles == 0 {
            return Err(Error::config("vehicles", "must be at least 1"));
        }
        if n.processes == 0 || n.processes > MAX_PROCESSES {
            return Err(Error::config("processes", alloc::format!("must lie in 1..={MAX_PROCESSES}")));
        }
        if n.antennas == 0 {
            return Err(Error::config("antennas", "must be at least 1"));
        }
        for (field, v) in [
            ("carrier_hz", n.carrier_hz),
            ("light_speed", n.light_speed),
            ("bandwidth_hz", n.bandwidth_hz),
            ("payload_bits", n.payload_bits),
            ("p_max", n.p_max),
            ("noise_power", n.noise_power),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(field, "must be positive and finite"));
            }
        }
        if !(n.max_error > 0.0 && n.max_error < 1.0) {
            return Err(Error::config("max_error", "must lie in (0, 1)"));
        }
        if !(self.penalty >= 0.0) {
            return Err(Error::config("penalty", "must be non-negative"));
        }
        self.road.validate()?;
        if self.road.transmission_time() * n.bandwidth_hz < 1.0 {
            return Err(Error::config("bandwidth_hz", "blocklength (δ−δ1)·ω must be at least 1"));
        }
        if let Some(fixed) = &self.fixed_vehicles {
            if fixed.len() != n.vehicles {
                return Err(Error::config("fixed_vehicles", "length must equal vehicles"));
            }
        }
        self.demand.build(n.vehicles, n.processes).map(|_| ())
    }

    pub fn link_budget(&self) -> LinkBudget {
        LinkBudget {
            noise_power: self.network.noise_power,
            payload_bits: self.network.payload_bits,
            transmission_time: self.road.transmission_time(),
            bandwidth: self.network.bandwidth_hz,
            max_error: self.network.max_error,
        }
    }

    pub fn state_len(&self) -> usize {
        2 * self.network.processes
    }
}

/// Every full permutation of the processes, indexed lexicographically.
#[derive(Debug, Clone)]
pub struct OrderSpace {
    orders: Vec<DecodingOrder>,
}

impl OrderSpace {
    pub fn new(processes: usize) -> Self {
        let orders = (0..processes)
            .permutations(processes)
            .map(|p| DecodingOrder::new(p, processes).expect("permutation is a valid order"))
            .collect();
        Self { orders }
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn get(&self, index: usize) -> &DecodingOrder {
        &self.orders[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &DecodingOrder> {
        self.orders.iter()
    }
}

/// Raw 2F state: per process Σ_i r|χ_i| then per process Σ_i r Δ.
pub fn encode_state(snapshot: &ChannelSnapshot, aoi: &AoiState, demand: &DemandMatrix) -> Vec<f64> {
    let f = demand.processes();
    let mut s = alloc::vec![0.0; 2 * f];
    for i in 0..demand.vehicles() {
        let chi = snapshot.large_scale[i].norm();
        for l in 0..f {
            if demand.get(i, l) {
                s[l] += chi;
            }
        }
    }
    for (l, age) in aoi.column_sums(demand).into_iter().enumerate() {
        s[f + l] = age;
    }
    s
}

/// Maps raw states to the network input scale: χ features over their
/// analytic maximum, age features over the per-process AoI ceiling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateScaler {
    chi_scale: f64,
    age_scale: f64,
}

impl StateScaler {
    pub fn new(config: &EnvConfig, demand: &DemandMatrix) -> Self {
        let max_col = demand.column_sums().into_iter().max().unwrap_or(1).max(1) as f64;
        let (d_min, _) = config.road.distance_range();
        let chi_max = channel::path_power(d_min.max(1e-3), config.network.carrier_hz, config.network.light_speed);
        let age_scale = config.road.slot_duration * (config.road.horizon as f64 + 1.0) / 2.0 * max_col;
        Self { chi_scale: 1.0 / (chi_max * max_col), age_scale: 1.0 / age_scale }
    }

    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        let f = raw.len() / 2;
        raw.iter()
            .enumerate()
            .map(|(k, &x)| if k < f { x * self.chi_scale } else { x * self.age_scale })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Scaled next state.
    pub state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    /// Σ_l p_l actually transmitted this slot, watts.
    pub slot_power: f64,
    pub penalty: f64,
    /// Demanded (vehicle, process) pairs decoded this slot.
    pub delivered: usize,
    /// Σ r Δ recorded for this slot.
    pub demanded_aoi: f64,
}

/// What a candidate action would do in the current slot, without committing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotPreview {
    pub demanded_aoi: f64,
    pub slot_power: f64,
    pub delivered: usize,
}

/// Hinge penalty `κ [Σα − 1]⁺`.
pub fn feasibility_penalty(alpha: &[f64], kappa: f64) -> f64 {
    kappa * (alpha.iter().sum::<f64>() - 1.0).max(0.0)
}

/// Transmitted fractions: α clipped to [0,1] and scaled down onto Σα ≤ 1.
pub fn feasible_fractions(alpha: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = alpha.iter().map(|a| a.clamp(0.0, 1.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total > 1.0 {
        clipped.iter().map(|a| a / total).collect()
    } else {
        clipped
    }
}

/// `exp(−ζ·a − (1−ζ)·p) − Υ` with `a` the normalized running AoI and `p`
/// the normalized running power.
pub fn reward(zeta: f64, normalized_aoi: f64, normalized_power: f64, penalty: f64) -> f64 {
    libm::exp(-zeta * normalized_aoi - (1.0 - zeta) * normalized_power) - penalty
}

#[derive(Debug, Clone)]
pub struct Environment {
    config: EnvConfig,
    demand: DemandMatrix,
    link: LinkBudget,
    scaler: StateScaler,
    zeta: f64,
    rng: ChaCha8Rng,
    vehicles: Vec<VehicleState>,
    snapshot: Option<ChannelSnapshot>,
    aoi: Option<AoiState>,
    acc: TrajectoryAccumulator,
    slot: usize,
}

impl Environment {
    pub fn new(config: EnvConfig, zeta: f64) -> Result<Self> {
        config.validate()?;
        if !(0.0..=1.0).contains(&zeta) {
            return Err(Error::config("zeta", "must lie in [0, 1]"));
        }
        let demand = config.demand.build(config.network.vehicles, config.network.processes)?;
        let scaler = StateScaler::new(&config, &demand);
        let link = config.link_budget();
        Ok(Self {
            config,
            demand,
            link,
            scaler,
            zeta,
            rng: ChaCha8Rng::seed_from_u64(0),
            vehicles: Vec::new(),
            snapshot: None,
            aoi: None,
            acc: TrajectoryAccumulator::default(),
            slot: 0,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn demand(&self) -> &DemandMatrix {
        &self.demand
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn set_zeta(&mut self, zeta: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&zeta) {
            return Err(Error::config("zeta", "must lie in [0, 1]"));
        }
        self.zeta = zeta;
        Ok(())
    }

    pub fn processes(&self) -> usize {
        self.config.network.processes
    }

    pub fn horizon(&self) -> usize {
        self.config.road.horizon
    }

    /// Current 1-based slot; `horizon + 1` once the episode is over.
    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn is_done(&self) -> bool {
        self.slot == 0 || self.slot > self.horizon()
    }

    pub fn bounds(&self) -> AoiBounds {
        aoi_bounds(&self.demand, self.config.road.slot_duration, self.horizon())
    }

    pub fn snapshot(&self) -> Option<&ChannelSnapshot> {
        self.snapshot.as_ref()
    }

    pub fn vehicles(&self) -> &[VehicleState] {
        &self.vehicles
    }

    pub fn aoi(&self) -> Option<&AoiState> {
        self.aoi.as_ref()
    }

    /// Starts a new episode; vehicles are redrawn from `seed`.
    pub fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        self.rng = stream_rng(seed, stream::ENV);
        self.vehicles = match &self.config.fixed_vehicles {
            Some(v) => v.clone(),
            None => geometry::place_vehicles(&self.config.road, self.config.network.vehicles, &mut self.rng),
        };
        self.snapshot = Some(self.compute_snapshot()?);
        self.aoi = Some(AoiState::initial(&self.demand, self.config.road.slot_duration));
        self.acc = TrajectoryAccumulator::default();
        self.slot = 1;
        Ok(self.state())
    }

    fn compute_snapshot(&self) -> Result<ChannelSnapshot> {
        let n = &self.config.network;
        let geoms = self
            .vehicles
            .iter()
            .map(|v| geometry::sample_geometry(v, self.config.road.rsu_position, n.carrier_hz, n.light_speed))
            .collect::<Result<Vec<_>>>()?;
        channel::snapshot(&geoms, n.carrier_hz, n.light_speed, n.antennas)
    }

    /// Unscaled 2F state.
    pub fn raw_state(&self) -> Vec<f64> {
        match (&self.snapshot, &self.aoi) {
            (Some(s), Some(a)) => encode_state(s, a, &self.demand),
            _ => alloc::vec![0.0; self.config.state_len()],
        }
    }

    /// Scaled state fed to the networks.
    pub fn state(&self) -> Vec<f64> {
        self.scaler.apply(&self.raw_state())
    }

    /// Per-(vehicle, process) decode flags for an action in the current slot.
    fn decode_flags(&self, order: &DecodingOrder, powers: &[f64]) -> Vec<bool> {
        let f = self.processes();
        let snapshot = self.snapshot.as_ref().expect("episode started");
        let active = order.without_silent(powers);
        let mut decoded = alloc::vec![false; self.demand.entries().len()];
        for (i, &gain) in snapshot.gains.iter().enumerate() {
            for (pos, outcome) in sic_chain(gain, &active, powers, &self.link).iter().enumerate() {
                decoded[i * f + active.as_slice()[pos]] = outcome.decoded;
            }
        }
        decoded
    }

    fn check_action(&self, order: &DecodingOrder, alpha: &[f64]) -> Result<()> {
        if self.is_done() {
            return Err(Error::EpisodeDone);
        }
        if alpha.len() != self.processes() {
            return Err(Error::ShapeMismatch { expected: self.processes(), got: alpha.len() });
        }
        if order.as_slice().iter().any(|&p| p >= self.processes()) {
            return Err(Error::InvalidOrder(alloc::format!("{:?}", order.as_slice())));
        }
        Ok(())
    }

    fn apply_slot(&self, order: &DecodingOrder, alpha: &[f64]) -> (AoiState, SlotPreview) {
        let p_max = self.config.network.p_max;
        let powers: Vec<f64> = feasible_fractions(alpha).iter().map(|a| a * p_max).collect();
        let decoded = self.decode_flags(order, &powers);
        let current = self.aoi.as_ref().expect("episode started");
        // slot 1 keeps the initial ages (see `aoi` module docs)
        let next = if self.slot == 1 { current.clone() } else { current.evolve(&decoded, self.config.road.slot_duration) };
        let delivered = decoded.iter().zip(self.demand.entries()).filter(|(&d, &r)| d && r).count();
        let preview = SlotPreview { demanded_aoi: next.demanded_sum(&self.demand), slot_power: powers.iter().sum(), delivered };
        (next, preview)
    }

    /// Outcome of an action in the current slot without advancing time.
    pub fn preview(&self, order: &DecodingOrder, alpha: &[f64]) -> Result<SlotPreview> {
        self.check_action(order, alpha)?;
        Ok(self.apply_slot(order, alpha).1)
    }

    /// Applies the hybrid action for the current slot.
    pub fn step(&mut self, order: &DecodingOrder, alpha: &[f64]) -> Result<StepOutcome> {
        self.check_action(order, alpha)?;
        let (next, preview) = self.apply_slot(order, alpha);
        self.aoi = Some(next);
        self.acc.record(preview.demanded_aoi, preview.slot_power);

        let t = self.slot;
        let slot = self.config.road.slot_duration;
        let norm_aoi = if t == 1 { 0.0 } else { normalized_aoi(self.acc.avg_aoi(), &aoi_bounds(&self.demand, slot, t))? };
        let norm_power = self.acc.avg_power() / self.config.network.p_max;
        let penalty = feasibility_penalty(alpha, self.config.penalty);
        let reward = reward(self.zeta, norm_aoi, norm_power, penalty);

        self.vehicles = geometry::advance_mobility(&self.vehicles, slot, self.config.road.segment_length);
        self.snapshot = Some(self.compute_snapshot()?);
        self.slot += 1;
        Ok(StepOutcome {
            state: self.state(),
            reward,
            done: self.slot > self.horizon(),
            slot_power: preview.slot_power,
            penalty,
            delivered: preview.delivered,
            demanded_aoi: preview.demanded_aoi,
        })
    }

    /// Time averages of the slots played so far, scalarized against the
    /// full-horizon bounds.
    pub fn episode_objective(&self) -> Result<ObjectivePoint> {
        let avg_aoi = self.acc.avg_aoi();
        let avg_power = self.acc.avg_power();
        let objective = scalarize(avg_aoi, avg_power, self.zeta, &self.bounds(), self.config.network.p_max)?;
        Ok(ObjectivePoint { avg_aoi, avg_power, objective, zeta: self.zeta })
    }

    pub fn trajectory(&self) -> &TrajectoryAccumulator {
        &self.acc
    }
}
