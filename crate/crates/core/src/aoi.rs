//! Demand matrix, AoI evolution, analytic AoI bounds and the scalarized
//! (AoI, power) objective.
//!
//! Slot-1 convention: every demanded entry starts at δ and that value *is* the
//! AoI of the first slot, whatever is decoded there. The evolution rule
//! (reset to δ on decode, otherwise grow by δ) applies from slot 2 onwards.
//! With this convention an always-decoding trajectory attains the lower
//! bound and a never-decoding one attains the upper bound exactly.

use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Binary V×F matrix: `r[i][l]` is set when vehicle i wants process l.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemandMatrix {
    vehicles: usize,
    processes: usize,
    entries: Vec<bool>,
}

impl DemandMatrix {
    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let processes = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || processes == 0 {
            return Err(Error::config("demand", "need at least one vehicle and one process"));
        }
        for row in rows {
            if row.len() != processes {
                return Err(Error::config("demand", "rows have different lengths"));
            }
            if !row.iter().any(|&r| r) {
                return Err(Error::config("demand", "every vehicle must want at least one process"));
            }
        }
        Ok(Self { vehicles: rows.len(), processes, entries: rows.concat() })
    }

    /// Each vehicle wants `per_vehicle` distinct processes chosen uniformly.
    pub fn random<R: Rng + ?Sized>(vehicles: usize, processes: usize, per_vehicle: usize, rng: &mut R) -> Result<Self> {
        if vehicles == 0 || processes == 0 {
            return Err(Error::config("demand", "need at least one vehicle and one process"));
        }
        if per_vehicle == 0 || per_vehicle > processes {
            return Err(Error::config("demand_per_vehicle", "must lie in 1..=processes"));
        }
        let mut entries = alloc::vec![false; vehicles * processes];
        for i in 0..vehicles {
            for l in index::sample(rng, processes, per_vehicle) {
                entries[i * processes + l] = true;
            }
        }
        Ok(Self { vehicles, processes, entries })
    }

    pub fn vehicles(&self) -> usize {
        self.vehicles
    }

    pub fn processes(&self) -> usize {
        self.processes
    }

    pub fn get(&self, vehicle: usize, process: usize) -> bool {
        self.entries[vehicle * self.processes + process]
    }

    pub fn entries(&self) -> &[bool] {
        &self.entries
    }

    /// Σ_{i,l} r_{i,l}.
    pub fn total(&self) -> usize {
        self.entries.iter().filter(|&&r| r).count()
    }

    pub fn column_sums(&self) -> Vec<usize> {
        (0..self.processes)
            .map(|l| (0..self.vehicles).filter(|&i| self.get(i, l)).count())
            .collect()
    }

    pub fn rows(&self) -> Vec<Vec<bool>> {
        self.entries.chunks(self.processes).map(<[bool]>::to_vec).collect()
    }
}

/// Instantaneous ages Δ (seconds), V×F row-major. Entries outside the demand
/// are carried along but never summed.
#[derive(Debug, Clone, PartialEq)]
pub struct AoiState {
    processes: usize,
    ages: Vec<f64>,
}

impl AoiState {
    pub fn initial(demand: &DemandMatrix, slot: f64) -> Self {
        Self { processes: demand.processes(), ages: alloc::vec![slot; demand.entries().len()] }
    }

    pub fn from_ages(processes: usize, ages: Vec<f64>) -> Self {
        Self { processes, ages }
    }

    pub fn get(&self, vehicle: usize, process: usize) -> f64 {
        self.ages[vehicle * self.processes + process]
    }

    pub fn ages(&self) -> &[f64] {
        &self.ages
    }

    /// Σ_{i,l} r_{i,l} Δ_{i,l}.
    pub fn demanded_sum(&self, demand: &DemandMatrix) -> f64 {
        self.ages.iter().zip(demand.entries()).filter(|(_, &r)| r).map(|(a, _)| a).sum()
    }

    /// Σ_i r_{i,l} Δ_{i,l} for every process l.
    pub fn column_sums(&self, demand: &DemandMatrix) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.processes];
        for (k, (&age, &r)) in self.ages.iter().zip(demand.entries()).enumerate() {
            if r {
                out[k % self.processes] += age;
            }
        }
        out
    }

    /// One slot of age evolution: `δ` where decoded, previous + `δ` elsewhere.
    pub fn evolve(&self, decoded: &[bool], slot: f64) -> Self {
        debug_assert_eq!(decoded.len(), self.ages.len());
        let ages = self
            .ages
            .iter()
            .zip(decoded)
            .map(|(&a, &d)| if d { slot } else { a + slot })
            .collect();
        Self { processes: self.processes, ages }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoiBounds {
    pub min: f64,
    pub max: f64,
}

/// `Δ̄_min = δ Σr`, `Δ̄_max = δ (T+1)/2 Σr`.
pub fn aoi_bounds(demand: &DemandMatrix, slot: f64, horizon: usize) -> AoiBounds {
    let total = demand.total() as f64;
    AoiBounds { min: slot * total, max: slot * (horizon as f64 + 1.0) / 2.0 * total }
}

/// Normalized position of `avg_aoi` between the bounds.
pub fn normalized_aoi(avg_aoi: f64, bounds: &AoiBounds) -> Result<f64> {
    let span = bounds.max - bounds.min;
    if !(span > 0.0) {
        return Err(Error::DegenerateBounds);
    }
    Ok((avg_aoi - bounds.min) / span)
}

/// `ζ (Δ̄ − Δ̄_min)/(Δ̄_max − Δ̄_min) + (1 − ζ) p̄ / P_max` with `P_min = 0`.
pub fn scalarize(avg_aoi: f64, avg_power: f64, zeta: f64, bounds: &AoiBounds, p_max: f64) -> Result<f64> {
    Ok(zeta * normalized_aoi(avg_aoi, bounds)? + (1.0 - zeta) * avg_power / p_max)
}

/// Time-averaged (AoI, power) of a trajectory with its scalarized objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePoint {
    /// Δ̄ in seconds.
    pub avg_aoi: f64,
    /// p̄ in watts.
    pub avg_power: f64,
    pub objective: f64,
    pub zeta: f64,
}

/// Running sums of Σ r Δ and slot power over an episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryAccumulator {
    slots: usize,
    aoi_sum: f64,
    power_sum: f64,
}

impl TrajectoryAccumulator {
    pub fn record(&mut self, demanded_aoi: f64, slot_power: f64) {
        self.slots += 1;
        self.aoi_sum += demanded_aoi;
        self.power_sum += slot_power;
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    /// Δ̄_t = (1/t) Σ_τ Σ r Δ^(τ).
    pub fn avg_aoi(&self) -> f64 {
        if self.slots == 0 { 0.0 } else { self.aoi_sum / self.slots as f64 }
    }

    /// p̂_t = (1/t) Σ_τ Σ_l p_l^(τ).
    pub fn avg_power(&self) -> f64 {
        if self.slots == 0 { 0.0 } else { self.power_sum / self.slots as f64 }
    }
}
