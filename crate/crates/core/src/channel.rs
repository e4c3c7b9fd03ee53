//! ULA steering vectors, line-of-sight channel vectors with Doppler phase,
//! and the MRT beamformer shared by every vehicle in a slot.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::geometry::GeometrySample;
use crate::{Error, Result};

/// Per-slot channel state for every vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSnapshot {
    /// Channel vector h_i (length N) per vehicle.
    pub vectors: Vec<Vec<Complex64>>,
    /// Large-scale attenuation χ_i, including its Doppler phase.
    pub large_scale: Vec<Complex64>,
    /// Effective beamformed power gain g_i = |h_iᴴ w|².
    pub gains: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    pub weights: Vec<Complex64>,
    /// ξ̃: squared norm of the unnormalized MRT combination.
    pub normalization: f64,
}

/// Element k equals `exp(j k π sin φ)`.
pub fn steering_vector(angle: f64, antennas: usize) -> Vec<Complex64> {
    let s = libm::sin(angle);
    (0..antennas)
        .map(|k| Complex64::from_polar(1.0, k as f64 * PI * s))
        .collect()
}

/// Per-element path power `c0 / (4π fc ℓ²)`.
pub fn path_power(distance: f64, carrier_hz: f64, light_speed: f64) -> f64 {
    light_speed / (4.0 * PI * carrier_hz * distance * distance)
}

/// Large-scale attenuation `χ = c0/(4π fc ℓ²) · exp(−j2πϱ)`.
pub fn large_scale(geom: &GeometrySample, carrier_hz: f64, light_speed: f64) -> Result<Complex64> {
    if !(geom.distance > 0.0) {
        return Err(Error::ZeroDistance);
    }
    Ok(Complex64::from_polar(
        path_power(geom.distance, carrier_hz, light_speed),
        -2.0 * PI * geom.doppler,
    ))
}

/// `h = sqrt(c0/(4π fc ℓ²)) · conj(a(φ)) · exp(j2πϱ)`, as a length-N column.
pub fn channel_vector(
    geom: &GeometrySample,
    carrier_hz: f64,
    light_speed: f64,
    antennas: usize,
) -> Result<Vec<Complex64>> {
    if !(geom.distance > 0.0) {
        return Err(Error::ZeroDistance);
    }
    let amplitude = libm::sqrt(path_power(geom.distance, carrier_hz, light_speed));
    let doppler = Complex64::from_polar(amplitude, 2.0 * PI * geom.doppler);
    Ok(steering_vector(geom.angle, antennas)
        .into_iter()
        .map(|a| a.conj() * doppler)
        .collect())
}

/// `hᴴ w`.
pub fn inner(h: &[Complex64], w: &[Complex64]) -> Complex64 {
    h.iter().zip(w).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn effective_gain(h: &[Complex64], w: &[Complex64]) -> f64 {
    inner(h, w).norm_sqr()
}

/// MRT beamformer `w ∝ Σ_i h_i / sqrt(N |χ_i|)`, scaled to unit power.
pub fn mrt_beamformer(vectors: &[Vec<Complex64>], large_scale: &[Complex64]) -> Result<Beamformer> {
    let antennas = vectors.first().map(Vec::len).ok_or(Error::DegenerateChannel)?;
    if large_scale.len() != vectors.len() {
        return Err(Error::ShapeMismatch { expected: vectors.len(), got: large_scale.len() });
    }
    let mut sum = alloc::vec![Complex64::new(0.0, 0.0); antennas];
    for (h, chi) in vectors.iter().zip(large_scale) {
        if h.len() != antennas {
            return Err(Error::ShapeMismatch { expected: antennas, got: h.len() });
        }
        let scale = 1.0 / libm::sqrt(antennas as f64 * chi.norm());
        for (acc, z) in sum.iter_mut().zip(h) {
            *acc += z * scale;
        }
    }
    let normalization = norm_sqr(&sum);
    if !(normalization > 0.0) || !normalization.is_finite() {
        return Err(Error::DegenerateChannel);
    }
    let inv = 1.0 / libm::sqrt(normalization);
    Ok(Beamformer { weights: sum.into_iter().map(|z| z * inv).collect(), normalization })
}

/// Builds channel vectors for every vehicle, the MRT beamformer and gains.
pub fn snapshot(
    geometry: &[GeometrySample],
    carrier_hz: f64,
    light_speed: f64,
    antennas: usize,
) -> Result<ChannelSnapshot> {
    let vectors = geometry
        .iter()
        .map(|g| channel_vector(g, carrier_hz, light_speed, antennas))
        .collect::<Result<Vec<_>>>()?;
    let large_scale = geometry
        .iter()
        .map(|g| large_scale(g, carrier_hz, light_speed))
        .collect::<Result<Vec<_>>>()?;
    let bf = mrt_beamformer(&vectors, &large_scale)?;
    let gains = vectors.iter().map(|h| effective_gain(h, &bf.weights)).collect();
    Ok(ChannelSnapshot { vectors, large_scale, gains })
}
