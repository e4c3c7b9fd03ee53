//! Road layout, constant-velocity mobility, and the per-slot geometric
//! quantities (distance, azimuth, Doppler) that drive the channel model.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Straight multi-lane road segment along the x-axis with one RSU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoadConfig {
    /// Segment length in meters.
    pub segment_length: f64,
    pub lane_count: usize,
    /// Lane width in meters.
    pub lane_width: f64,
    /// RSU coordinates in meters.
    pub rsu_position: (f64, f64),
    /// Slot duration δ in seconds.
    pub slot_duration: f64,
    /// Per-slot time spent acquiring vehicle positions and speeds (δ1), seconds.
    pub acquisition_time: f64,
    /// Episode horizon T in slots.
    pub horizon: usize,
    /// Vehicle speeds are drawn from U(min, max) m/s.
    pub speed_range: (f64, f64),
}

impl Default for RoadConfig {
    fn default() -> Self {
        Self {
            segment_length: 3000.0,
            lane_count: 2,
            lane_width: 3.0,
            rsu_position: (1500.0, 50.0),
            slot_duration: 1e-3,
            acquisition_time: 1e-4,
            horizon: 500,
            speed_range: (10.0, 15.0),
        }
    }
}

impl RoadConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.segment_length > 0.0) {
            return Err(Error::config("segment_length", "must be positive"));
        }
        if self.lane_count == 0 {
            return Err(Error::config("lane_count", "must be at least 1"));
        }
        if !(self.lane_width > 0.0) {
            return Err(Error::config("lane_width", "must be positive"));
        }
        if !(self.slot_duration > 0.0) {
            return Err(Error::config("slot_duration", "must be positive"));
        }
        if !(self.acquisition_time > 0.0 && self.acquisition_time < self.slot_duration) {
            return Err(Error::config("acquisition_time", "must lie in (0, slot_duration)"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        let (lo, hi) = self.speed_range;
        if !(lo >= 0.0 && hi >= lo) {
            return Err(Error::config("speed_range", "need 0 <= min <= max"));
        }
        Ok(())
    }

    /// Information transmission time δ2 = δ − δ1.
    pub fn transmission_time(&self) -> f64 {
        self.slot_duration - self.acquisition_time
    }

    /// y-coordinate of a lane's center line.
    pub fn lane_center(&self, lane: usize) -> f64 {
        (lane as f64 + 0.5) * self.lane_width
    }

    /// Smallest and largest RSU distance reachable by any vehicle on the road.
    pub fn distance_range(&self) -> (f64, f64) {
        let (x0, y0) = self.rsu_position;
        let (mut dy_min, mut dy_max) = (f64::INFINITY, 0.0f64);
        for lane in 0..self.lane_count {
            let dy = libm::fabs(self.lane_center(lane) - y0);
            dy_min = dy_min.min(dy);
            dy_max = dy_max.max(dy);
        }
        let dx_min = if (0.0..=self.segment_length).contains(&x0) {
            0.0
        } else {
            libm::fabs(x0).min(libm::fabs(x0 - self.segment_length))
        };
        let dx_max = libm::fabs(x0).max(libm::fabs(x0 - self.segment_length));
        (libm::hypot(dx_min, dy_min), libm::hypot(dx_max, dy_max))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    /// Speed c_i in m/s.
    pub speed: f64,
    /// +1 or −1 along the x-axis.
    pub direction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometrySample {
    /// Distance to the RSU in meters.
    pub distance: f64,
    /// Azimuth angle in [0, π].
    pub angle: f64,
    /// Doppler shift in hertz.
    pub doppler: f64,
}

/// Places `count` vehicles uniformly on the segment. The lane is uniform and
/// fixes the direction: even lanes drive towards +x, odd lanes towards −x.
pub fn place_vehicles<R: Rng + ?Sized>(road: &RoadConfig, count: usize, rng: &mut R) -> Vec<VehicleState> {
    let (lo, hi) = road.speed_range;
    (0..count)
        .map(|_| {
            let x = rng.random::<f64>() * road.segment_length;
            let lane = rng.random_range(0..road.lane_count);
            let speed = lo + (hi - lo) * rng.random::<f64>();
            VehicleState {
                x,
                y: road.lane_center(lane),
                speed,
                direction: if lane % 2 == 0 { 1.0 } else { -1.0 },
            }
        })
        .collect()
}

/// Constant-velocity update over `dt` seconds. Vehicles leaving the segment
/// re-enter from the opposite end so the population stays constant.
pub fn advance_mobility(vehicles: &[VehicleState], dt: f64, segment_length: f64) -> Vec<VehicleState> {
    vehicles
        .iter()
        .map(|v| {
            let mut x = v.x + v.direction * v.speed * dt;
            x = libm::fmod(x, segment_length);
            if x < 0.0 {
                x += segment_length;
            }
            VehicleState { x, ..*v }
        })
        .collect()
}

/// Distance, azimuth `arccos((x_i − x_0)/ℓ)` and Doppler `c_i f_c cos φ / c_0`.
pub fn sample_geometry(
    vehicle: &VehicleState,
    rsu: (f64, f64),
    carrier_hz: f64,
    light_speed: f64,
) -> Result<GeometrySample> {
    let dx = vehicle.x - rsu.0;
    let dy = vehicle.y - rsu.1;
    let distance = libm::hypot(dx, dy);
    if distance == 0.0 {
        return Err(Error::CoincidentPosition);
    }
    let angle = libm::acos((dx / distance).clamp(-1.0, 1.0));
    debug_assert!((0.0..=PI).contains(&angle));
    let doppler = vehicle.speed * carrier_hz * libm::cos(angle) / light_speed;
    Ok(GeometrySample { distance, angle, doppler })
}
