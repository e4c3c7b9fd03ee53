//! Superposition-coding SINR, finite-blocklength decoding error and the
//! per-vehicle SIC decode chain.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{LN_2, SQRT_2};

use crate::{Error, Result};

/// SIC order over process indices (0-based). May list fewer than F processes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DecodingOrder(Vec<usize>);

impl DecodingOrder {
    pub fn new(order: Vec<usize>, processes: usize) -> Result<Self> {
        if order.len() > processes {
            return Err(Error::InvalidOrder(format!("{} entries for {processes} processes", order.len())));
        }
        let mut seen = alloc::vec![false; processes];
        for &p in &order {
            if p >= processes {
                return Err(Error::InvalidOrder(format!("process {p} out of range 0..{processes}")));
            }
            if core::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidOrder(format!("process {p} repeated")));
            }
        }
        Ok(Self(order))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Keeps only processes whose power is strictly positive.
    pub fn without_silent(&self, powers: &[f64]) -> Self {
        Self(self.0.iter().copied().filter(|&p| powers[p] > 0.0).collect())
    }
}

/// Per-process transmit power as fractions of `p_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub fractions: Vec<f64>,
    pub p_max: f64,
}

impl PowerAllocation {
    pub fn powers(&self) -> Vec<f64> {
        self.fractions.iter().map(|a| a * self.p_max).collect()
    }

    pub fn total(&self) -> f64 {
        self.fractions.iter().sum::<f64>() * self.p_max
    }

    pub fn is_feasible(&self) -> bool {
        self.fractions.iter().all(|&a| a >= 0.0) && self.total() <= self.p_max * (1.0 + 1e-12)
    }
}

/// Finite-blocklength link parameters shared by every decode attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// Noise power σ² in watts.
    pub noise_power: f64,
    /// Payload size L in bits.
    pub payload_bits: f64,
    /// Transmission time δ2 in seconds.
    pub transmission_time: f64,
    /// Bandwidth ω in hertz.
    pub bandwidth: f64,
    /// Maximum tolerated decoding error probability.
    pub max_error: f64,
}

impl LinkBudget {
    pub fn blocklength(&self) -> f64 {
        self.transmission_time * self.bandwidth
    }
}

/// SINR of the message at `position` (0-based) in `order` for a vehicle with
/// effective gain `gain`: later messages are interference, earlier ones were
/// cancelled.
pub fn sinr(gain: f64, order: &DecodingOrder, powers: &[f64], noise_power: f64, position: usize) -> f64 {
    let order = order.as_slice();
    let interference: f64 = order[position + 1..].iter().map(|&p| powers[p]).sum::<f64>() * gain;
    powers[order[position]] * gain / (interference + noise_power)
}

/// Gaussian tail probability `Q(x) = P(Z > x)`.
pub fn gaussian_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Finite-blocklength decoding error probability for SINR `gamma`.
pub fn decode_error(gamma: f64, payload_bits: f64, transmission_time: f64, bandwidth: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::NonPositiveSinr(gamma));
    }
    let n = transmission_time * bandwidth;
    // 1 - 1/(1+γ)² written to avoid cancellation for small γ
    let dispersion = gamma * (2.0 + gamma) / ((1.0 + gamma) * (1.0 + gamma));
    let arg = libm::sqrt(n / dispersion) * (libm::log1p(gamma) - payload_bits * LN_2 / n);
    Ok(gaussian_tail(arg))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionOutcome {
    pub sinr: f64,
    pub error_prob: f64,
    pub decoded: bool,
}

/// Runs SIC down `order`: a position decodes only if it and every earlier
/// position meet the error target. Zero SINR counts as certain failure.
pub fn sic_chain(gain: f64, order: &DecodingOrder, powers: &[f64], link: &LinkBudget) -> Vec<PositionOutcome> {
    let mut ok = true;
    (0..order.len())
        .map(|pos| {
            let gamma = sinr(gain, order, powers, link.noise_power, pos);
            let error_prob = if gamma > 0.0 {
                decode_error(gamma, link.payload_bits, link.transmission_time, link.bandwidth).unwrap_or(1.0)
            } else {
                1.0
            };
            ok = ok && error_prob <= link.max_error;
            PositionOutcome { sinr: gamma, error_prob, decoded: ok }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn link() -> LinkBudget {
        LinkBudget { noise_power: 0.1, payload_bits: 1024.0, transmission_time: 9e-4, bandwidth: 1e7, max_error: 1e-6 }
    }

    #[test]
    fn order_validation() {
        assert!(DecodingOrder::new(alloc::vec![2, 0, 1], 3).is_ok());
        assert!(DecodingOrder::new(alloc::vec![1], 3).is_ok());
        assert!(DecodingOrder::new(alloc::vec![0, 0], 3).is_err());
        assert!(DecodingOrder::new(alloc::vec![3], 3).is_err());
        assert!(DecodingOrder::new(alloc::vec![0, 1, 2, 3], 3).is_err());
    }

    #[test]
    fn two_message_sinr() {
        let order = DecodingOrder::new(alloc::vec![0, 1], 2).unwrap();
        let p = [0.6, 0.4];
        assert_relative_eq!(sinr(2.0, &order, &p, 0.1, 0), 1.2 / 0.9, max_relative = 1e-12);
        assert_relative_eq!(sinr(2.0, &order, &p, 0.1, 1), 8.0, max_relative = 1e-12);
    }

    #[test]
    fn q_function_against_high_precision_values() {
        // mpmath, 40 digits: erfc(x/sqrt(2))/2
        let table = [
            (-8.0, 0.999_999_999_999_999_377_903_942_572_821_6),
            (-3.0, 0.998_650_101_968_369_905_473_348_185_232_4),
            (-1.0, 0.841_344_746_068_542_948_585_232_545_632_1),
            (0.0, 0.5),
            (0.5, 0.308_537_538_725_986_896_362_295_389_391_7),
            (1.0, 0.158_655_253_931_457_051_414_767_454_367_9),
            (2.5, 0.006_209_665_325_776_135_166_978_104_574_192),
            (4.0, 3.167_124_183_311_992_125_377_075_672_215e-5),
            (6.0, 9.865_876_450_376_981_407_008_641_323_98e-10),
            (8.0, 6.220_960_574_271_784_123_515_995_172_588e-16),
        ];
        for (x, q) in table {
            assert_relative_eq!(gaussian_tail(x), q, max_relative = 1e-12);
        }
    }

    #[test]
    fn decode_error_against_high_precision_values() {
        let table = [
            (0.1, 9.020_367_988_646_904_763e-5),
            (0.105, 1.446_889_769_433_851_848e-6),
            (0.11, 1.254_050_462_385_896_782e-8),
            (0.12, 1.933_294_864_664_648_497e-13),
        ];
        for (g, want) in table {
            let got = decode_error(g, 1024.0, 9e-4, 1e7).unwrap();
            assert_relative_eq!(got, want, max_relative = 1e-9);
        }
    }

    #[test]
    fn decode_error_at_capacity_is_half() {
        let rate = 1024.0 * LN_2 / 9000.0;
        let gamma = libm::expm1(rate);
        assert_relative_eq!(decode_error(gamma, 1024.0, 9e-4, 1e7).unwrap(), 0.5, epsilon = 1e-9);
        assert!(decode_error(1e6, 1024.0, 9e-4, 1e7).unwrap() < 1e-300);
        assert!(decode_error(0.0, 1024.0, 9e-4, 1e7).is_err());
        assert!(decode_error(-1.0, 1024.0, 9e-4, 1e7).is_err());
    }

    #[test]
    fn decode_error_strictly_decreasing_on_grid() {
        let grid: Vec<f64> = (0..100).map(|k| 0.06 + 0.0006 * k as f64).collect();
        let eps: Vec<f64> = grid.iter().map(|&g| decode_error(g, 1024.0, 9e-4, 1e7).unwrap()).collect();
        for w in eps.windows(2) {
            assert!(w[1] < w[0], "{} !< {}", w[1], w[0]);
        }
    }

    fn outcome_flags(gain: f64, order: &[usize], powers: &[f64]) -> Vec<bool> {
        let order = DecodingOrder::new(order.to_vec(), powers.len()).unwrap();
        sic_chain(gain, &order, powers, &link()).iter().map(|o| o.decoded).collect()
    }

    #[test]
    fn strong_link_decodes_everything() {
        assert_eq!(outcome_flags(100.0, &[0, 1, 2], &[0.6, 0.3, 0.1]), [true; 3]);
    }

    #[test]
    fn first_failure_blocks_the_rest() {
        // first message buried under the others
        assert_eq!(outcome_flags(100.0, &[0, 1, 2], &[0.01, 0.5, 0.4]), [false; 3]);
        // middle message fails, last one would be fine on its own
        let flags = outcome_flags(10.0, &[0, 1, 2], &[0.6, 0.001, 0.3]);
        assert_eq!(flags, [true, false, false]);
    }

    #[test]
    fn zero_power_counts_as_failure() {
        let order = DecodingOrder::new(alloc::vec![0, 1], 2).unwrap();
        let out = sic_chain(100.0, &order, &[0.0, 0.5], &link());
        assert_eq!(out[0].error_prob, 1.0);
        assert!(!out[1].decoded);
    }

    proptest! {
        #[test]
        fn interference_monotone(gain in 0.01f64..100.0, p in proptest::collection::vec(0.0f64..1.0, 4), bump in 0.0f64..1.0, later in 1usize..4) {
            let order = DecodingOrder::new(alloc::vec![0, 1, 2, 3], 4).unwrap();
            let before = sinr(gain, &order, &p, 0.1, 0);
            let mut q = p.clone();
            q[later] += bump;
            prop_assert!(sinr(gain, &order, &q, 0.1, 0) <= before);
        }

        #[test]
        fn sinr_depends_on_successor_set(gain in 0.01f64..100.0, p in proptest::collection::vec(0.01f64..1.0, 4)) {
            // process 2 followed by {1, 3} in two different arrangements
            let a = DecodingOrder::new(alloc::vec![0, 2, 1, 3], 4).unwrap();
            let b = DecodingOrder::new(alloc::vec![0, 2, 3, 1], 4).unwrap();
            let direct = p[2] * gain / (gain * (p[1] + p[3]) + 0.1);
            prop_assert!((sinr(gain, &a, &p, 0.1, 1) - direct).abs() <= 1e-12 * direct);
            prop_assert!((sinr(gain, &b, &p, 0.1, 1) - direct).abs() <= 1e-12 * direct);
        }

        #[test]
        fn decoded_positions_form_prefix(gain in 0.01f64..50.0, p in proptest::collection::vec(0.0f64..0.5, 4)) {
            let order = DecodingOrder::new(alloc::vec![3, 1, 0, 2], 4).unwrap();
            let out = sic_chain(gain, &order, &p, &link());
            let k = out.iter().take_while(|o| o.decoded).count();
            prop_assert!(out[k..].iter().all(|o| !o.decoded));
            for o in &out {
                prop_assert!((0.0..=1.0).contains(&o.error_prob));
            }
        }
    }
}
