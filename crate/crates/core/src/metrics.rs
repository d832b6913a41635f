//! Link budget, per-UE SINR and capacity, and empirical distributions.

use serde::{Deserialize, Serialize};

use crate::precoding::{EquivalentMatrix, PrecoderKind};
use crate::{Error, Result};

/// Thermal noise density at room temperature, dBm/Hz.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Receiver noise power `-174 + 10 log10(B) + NF` in dBm.
pub fn noise_power_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    THERMAL_NOISE_DBM_PER_HZ + 10.0 * bandwidth_hz.log10() + noise_figure_db
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
    pub bandwidth_hz: f64,
    pub per_ue_path_loss_db: Vec<f64>,
}

impl LinkBudget {
    pub fn noise_power_dbm(&self) -> f64 {
        noise_power_dbm(self.bandwidth_hz, self.noise_figure_db)
    }

    /// `P_T - PL_m - sigma^2` in dB. Negative infinity for a link in outage.
    pub fn snr_db(&self, ue: usize) -> f64 {
        self.tx_power_dbm - self.per_ue_path_loss_db[ue] - self.noise_power_dbm()
    }

    pub fn snr_linear(&self, ue: usize) -> f64 {
        db_to_linear(self.snr_db(ue))
    }

    pub fn snrs_linear(&self) -> Vec<f64> {
        (0..self.per_ue_path_loss_db.len())
            .map(|m| self.snr_linear(m))
            .collect()
    }

    /// Arithmetic mean of the per-UE linear SNRs.
    pub fn mean_snr_linear(&self) -> f64 {
        let snrs = self.snrs_linear();
        snrs.iter().sum::<f64>() / snrs.len() as f64
    }
}

/// `SINR_m = |h̄_mm|^2 / (1/SNR_m + sum_{i != m} |h̄_mi|^2)`, linear.
pub fn sinr(h_bar: &EquivalentMatrix, snrs: &[f64]) -> Vec<f64> {
    let h = &h_bar.h_bar;
    assert_eq!(h.nrows(), snrs.len(), "one SNR per UE");
    (0..h.nrows())
        .map(|m| {
            let signal = h[(m, m)].norm_sqr();
            let interference: f64 = (0..h.ncols())
                .filter(|&i| i != m)
                .map(|i| h[(m, i)].norm_sqr())
                .sum();
            signal / (1.0 / snrs[m] + interference)
        })
        .collect()
}

/// Shannon capacity `log2(1 + SINR)` in bits/s/Hz.
pub fn capacity(sinr_linear: f64) -> f64 {
    (1.0 + sinr_linear).log2()
}

/// Metrics of one precoder in one drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropMetrics {
    pub drop: u64,
    pub precoder: PrecoderKind,
    pub seed: u64,
    pub sinr_db: Vec<f64>,
    pub capacity_bits: Vec<f64>,
    pub snr_db: Vec<f64>,
    /// Codebook indices for grid-of-beams precoders.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beams: Option<Vec<usize>>,
}

impl DropMetrics {
    pub fn new(
        drop: u64,
        precoder: PrecoderKind,
        seed: u64,
        sinr_linear: &[f64],
        snr_db: Vec<f64>,
        beams: Option<Vec<usize>>,
    ) -> Self {
        DropMetrics {
            drop,
            precoder,
            seed,
            sinr_db: sinr_linear.iter().map(|&s| linear_to_db(s)).collect(),
            capacity_bits: sinr_linear.iter().map(|&s| capacity(s)).collect(),
            snr_db,
            beams,
        }
    }

    pub fn sum_capacity(&self) -> f64 {
        self.capacity_bits.iter().sum()
    }
}

/// Sorted sample set with nearest-rank percentiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    sorted_samples: Vec<f64>,
}

impl EmpiricalDistribution {
    /// Sorts `samples` ascending. NaNs are rejected as a config-independent
    /// invariant violation.
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        assert!(
            samples.iter().all(|x| !x.is_nan()),
            "empirical distribution received NaN"
        );
        samples.sort_by(f64::total_cmp);
        Ok(EmpiricalDistribution {
            sorted_samples: samples,
        })
    }

    pub fn count(&self) -> usize {
        self.sorted_samples.len()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted_samples
    }

    /// Nearest-rank percentile: the `ceil(p/100 * N)`-th order statistic
    /// (the minimum for `p = 0`).
    pub fn percentile(&self, p: f64) -> f64 {
        assert!(
            (0.0..=100.0).contains(&p),
            "percentile {p} outside [0, 100]"
        );
        self.sorted_samples[self.rank(p) - 1]
    }

    fn rank(&self, p: f64) -> usize {
        let n = self.count();
        let x = p / 100.0 * n as f64;
        // Absorb rounding in p so that p = 100 k / N maps back to rank k.
        let rank = (x - x * 1e-12).ceil() as usize;
        rank.clamp(1, n)
    }

    pub fn median(&self) -> f64 {
        self.percentile(50.0)
    }

    /// Fraction of samples `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let below = self.sorted_samples.partition_point(|&s| s <= x);
        below as f64 / self.count() as f64
    }

    pub fn mean(&self) -> f64 {
        self.sorted_samples.iter().sum::<f64>() / self.count() as f64
    }

    /// Distribution-free ~95% confidence interval of the median from order
    /// statistics at ranks `N/2 -/+ 1.96 sqrt(N)/2`.
    pub fn median_confidence_interval(&self) -> (f64, f64) {
        let n = self.count() as f64;
        let half_width = 1.96 * n.sqrt() / 2.0;
        let lo = ((n / 2.0 - half_width).floor() as usize).clamp(1, self.count());
        let hi = ((n / 2.0 + half_width).ceil() as usize).clamp(1, self.count());
        (self.sorted_samples[lo - 1], self.sorted_samples[hi - 1])
    }
}

pub fn ecdf(samples: Vec<f64>) -> Result<EmpiricalDistribution> {
    EmpiricalDistribution::new(samples)
}

/// Difference of medians `a - b` (inputs in dB).
pub fn median_gap(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    a.median() - b.median()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::C64;

    fn eq(h: DMatrix<C64>) -> EquivalentMatrix {
        EquivalentMatrix {
            h_bar: h,
            precoder_kind: PrecoderKind::MatchedFilter,
        }
    }

    #[test]
    fn noise_floor_one_gigahertz() {
        assert!((noise_power_dbm(1e9, 7.0) + 77.0).abs() < 1e-12);
    }

    #[test]
    fn snr_chain() {
        let budget = LinkBudget {
            tx_power_dbm: 30.0,
            noise_figure_db: 7.0,
            bandwidth_hz: 1e9,
            per_ue_path_loss_db: vec![101.4, f64::INFINITY],
        };
        assert!((budget.snr_db(0) - 5.6).abs() < 1e-9);
        assert!((budget.snr_linear(0) - 3.630780547701014).abs() < 1e-9);
        assert_eq!(budget.snr_linear(1), 0.0);
    }

    #[test]
    fn sinr_single_ue_equals_snr() {
        let h = DMatrix::from_element(1, 1, C64::from(1.0));
        assert!((sinr(&eq(h), &[7.5])[0] - 7.5).abs() < 1e-12);
    }

    #[test]
    fn sinr_of_scaled_identity() {
        let c = 0.3;
        let h = DMatrix::<C64>::identity(4, 4) * C64::from(c);
        let snrs = [1.0, 2.0, 10.0, 100.0];
        for (s, snr) in sinr(&eq(h), &snrs).iter().zip(snrs) {
            assert!((s - snr * c * c).abs() < 1e-12);
        }
    }

    #[test]
    fn sinr_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = DMatrix::from_fn(4, 4, |_, _| C64::new(rng.random(), rng.random()));
        let snrs: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..100.0)).collect();
        let got = sinr(&eq(h.clone()), &snrs);
        for m in 0..4 {
            let mut interference = 0.0;
            for i in 0..4 {
                if i != m {
                    let z = h[(m, i)];
                    interference += z.re * z.re + z.im * z.im;
                }
            }
            let d = h[(m, m)];
            let expected = (d.re * d.re + d.im * d.im) / (1.0 / snrs[m] + interference);
            assert!((got[m] - expected).abs() <= 1e-12 * expected.max(1.0));
        }
    }

    #[test]
    fn capacity_values() {
        assert_eq!(capacity(0.0), 0.0);
        assert_eq!(capacity(1.0), 1.0);
        assert!((capacity(3.63) - 2.2110).abs() < 1e-4);
    }

    #[test]
    fn nearest_rank_percentiles() {
        let d = ecdf(vec![4.0, 2.0, 3.0, 1.0]).unwrap();
        assert_eq!(d.percentile(50.0), 2.0);
        assert_eq!(d.percentile(0.0), 1.0);
        assert_eq!(d.percentile(100.0), 4.0);
        assert_eq!(d.percentile(75.0), 3.0);
        assert_eq!(d.percentile(76.0), 4.0);
        let c = ecdf(vec![2.5; 7]).unwrap();
        for p in [0.0, 5.0, 50.0, 99.0, 100.0] {
            assert_eq!(c.percentile(p), 2.5);
        }
        assert!(matches!(ecdf(vec![]), Err(Error::EmptySamples)));
    }

    #[test]
    fn uniform_median() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = ecdf((0..100_000).map(|_| rng.random::<f64>()).collect()).unwrap();
        assert!((d.median() - 0.5).abs() < 0.01);
        let (lo, hi) = d.median_confidence_interval();
        assert!(lo <= d.median() && d.median() <= hi);
        assert!((d.cdf(0.5) - 0.5).abs() < 0.01);
    }

    #[test]
    fn median_gap_shift() {
        let a = ecdf(vec![1.0, 5.0, 9.0]).unwrap();
        assert_eq!(median_gap(&a, &a), 0.0);
        let b = ecdf(vec![4.0, 8.0, 12.0]).unwrap();
        assert_eq!(median_gap(&a, &b), -3.0);
    }

    #[test]
    fn drop_metrics_capacity_consistent() {
        let m = DropMetrics::new(0, PrecoderKind::Mmse, 1, &[0.5, 3.0], vec![0.0, 0.0], None);
        for (db, c) in m.sinr_db.iter().zip(&m.capacity_bits) {
            assert!((capacity(db_to_linear(*db)) - c).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn percentile_roundtrip(mut v in prop::collection::vec(-1e6f64..1e6, 1..300)) {
            let d = ecdf(v.clone()).unwrap();
            v.sort_by(f64::total_cmp);
            let n = v.len();
            for k in 1..=n {
                prop_assert_eq!(d.percentile(100.0 * k as f64 / n as f64), v[k - 1]);
            }
        }

        #[test]
        fn sinr_is_homogeneous(
            entries in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 9),
            snrs in prop::collection::vec(0.01f64..1e4, 3),
            scale in 0.01f64..100.0,
        ) {
            let h = DMatrix::from_iterator(3, 3, entries.iter().map(|&(r, i)| C64::new(r, i)));
            let base = sinr(&eq(h.clone()), &snrs);
            // |h| scaled by sqrt(scale) and 1/SNR by scale leaves SINR unchanged.
            let scaled_snrs: Vec<f64> = snrs.iter().map(|s| s / scale).collect();
            let scaled = sinr(&eq(h * C64::from(scale.sqrt())), &scaled_snrs);
            for (a, b) in base.iter().zip(&scaled) {
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-12));
            }
        }

        #[test]
        fn sinr_ignores_column_phase(
            entries in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16),
            phase in -3.2f64..3.2,
            column in 0usize..4,
        ) {
            let h = DMatrix::from_iterator(4, 4, entries.iter().map(|&(r, i)| C64::new(r, i)));
            let mut rotated = h.clone();
            let mut col = rotated.column_mut(column);
            col *= C64::from_polar(1.0, phase);
            let snrs = [3.0; 4];
            let a = sinr(&eq(h), &snrs);
            let b = sinr(&eq(rotated), &snrs);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }

        #[test]
        fn capacity_is_increasing(a in 0.0f64..1e6, delta in 1e-6f64..1e3) {
            prop_assert!(capacity(a + delta) > capacity(a));
        }
    }
}
