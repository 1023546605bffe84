//! Closed-form complex operation counts per received symbol.
//!
//! MF evaluates, for every hypothesis `b`, the channel coefficient `C_b[k]`
//! (`K` multiplications per sample), the weighting of the dechirped samples and
//! a single DFT bin. RAKE computes one FFT and then combines `K` bins per
//! hypothesis with rotated gains.

use std::ops::Add;

use serde::Serialize;

use crate::waveform::LoRaParams;

/// Complex multiplications and additions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct OpCount {
    pub cmult: u64,
    pub cadd: u64,
}

impl OpCount {
    pub fn new(cmult: u64, cadd: u64) -> Self {
        OpCount { cmult, cadd }
    }

    pub fn total(&self) -> u64 {
        self.cmult + self.cadd
    }
}

impl Add for OpCount {
    type Output = OpCount;

    fn add(self, rhs: OpCount) -> OpCount {
        OpCount::new(self.cmult + rhs.cmult, self.cadd + rhs.cadd)
    }
}

/// Receivers with a closed-form cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Receiver {
    Mf,
    CandMf,
    Rake,
    CandRake,
    /// Dechirp-and-FFT legacy detectors: the FFT only.
    Legacy,
    /// Genie MF: one coefficient (`KM` cmult), the weighting and a full FFT.
    IdealMf,
    /// TDEL baseline: data FFT, FFT and inverse FFT of the magnitudes, and the
    /// `M` products with the pilot profile.
    Tdel,
}

/// Radix-2 FFT cost: `(M/2) log2 M` multiplications and `M log2 M` additions.
pub fn fft_count(params: &LoRaParams) -> OpCount {
    let m = params.m() as u64;
    let log = u64::from(params.sf());
    OpCount::new(m / 2 * log, m * log)
}

/// Operation count of one symbol decision with `k` paths and `n_c`
/// candidates (ignored by the full detectors). `k` is at least 1.
///
/// * MF: `M(2M + KM + K)` cmult, `M(MK - 1)` cadd; candidates replace the
///   leading `M` by `N_c`.
/// * RAKE: the FFT plus `2KM` cmult and `(K - 1)M` cadd for combining;
///   candidates replace `M` by `N_c` in the combining terms.
pub fn op_count(receiver: Receiver, params: &LoRaParams, k: u64, n_c: u64) -> OpCount {
    let m = params.m() as u64;
    let k = k.max(1);
    let mf_per_hypothesis = OpCount::new(2 * m + k * m + k, m * k - 1);
    let combine = |n: u64| OpCount::new(2 * k * n, (k - 1) * n);
    match receiver {
        Receiver::Mf => scale(mf_per_hypothesis, m),
        Receiver::CandMf => scale(mf_per_hypothesis, n_c),
        Receiver::Rake => fft_count(params) + combine(m),
        Receiver::CandRake => fft_count(params) + combine(n_c),
        Receiver::Legacy => fft_count(params),
        Receiver::IdealMf => fft_count(params) + OpCount::new(k * m + m, (k - 1) * m),
        Receiver::Tdel => scale(fft_count(params), 3) + OpCount::new(m, 0),
    }
}

fn scale(c: OpCount, n: u64) -> OpCount {
    OpCount::new(c.cmult * n, c.cadd * n)
}

/// `(cmult + cadd)` of `a` over that of `b`.
pub fn complexity_ratio(a: OpCount, b: OpCount) -> f64 {
    a.total() as f64 / b.total() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(sf: u32) -> LoRaParams {
        LoRaParams::new(sf).unwrap()
    }

    #[test]
    fn sf7_three_paths() {
        assert_eq!(op_count(Receiver::Mf, &p(7), 3, 0), OpCount::new(82_304, 49_024));
        assert_eq!(op_count(Receiver::Rake, &p(7), 3, 0), OpCount::new(1_216, 1_152));
        assert_eq!(op_count(Receiver::Legacy, &p(7), 3, 0), OpCount::new(448, 896));
    }

    #[test]
    fn candidate_variants_at_full_size_match_full_detectors() {
        for sf in 7..=12 {
            let m = 1u64 << sf;
            for k in 1..=4 {
                assert_eq!(
                    op_count(Receiver::CandMf, &p(sf), k, m),
                    op_count(Receiver::Mf, &p(sf), k, 0)
                );
                assert_eq!(
                    op_count(Receiver::CandRake, &p(sf), k, m),
                    op_count(Receiver::Rake, &p(sf), k, 0)
                );
            }
        }
    }

    #[test]
    fn ratio_at_sf12() {
        let r = complexity_ratio(
            op_count(Receiver::Mf, &p(12), 3, 0),
            op_count(Receiver::Rake, &p(12), 3, 0),
        );
        assert!(r > 1e3);
        assert!((r - 1260.0).abs() < 5.0, "{r}");
        let c = OpCount::new(3, 4);
        assert_eq!(complexity_ratio(c, c), 1.0);
    }

    #[test]
    fn ratio_grows_with_sf() {
        let ratios: Vec<f64> = (7..=12)
            .map(|sf| {
                complexity_ratio(
                    op_count(Receiver::Mf, &p(sf), 3, 0),
                    op_count(Receiver::Rake, &p(sf), 3, 0),
                )
            })
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] > w[0]), "{ratios:?}");
    }

    #[test]
    fn candidate_ratio_nearly_constant_over_sf() {
        let ratios: Vec<f64> = (7..=12)
            .map(|sf| {
                complexity_ratio(
                    op_count(Receiver::CandMf, &p(sf), 3, 4),
                    op_count(Receiver::CandRake, &p(sf), 3, 4),
                )
            })
            .collect();
        let max = ratios.iter().copied().fold(f64::MIN, f64::max);
        let min = ratios.iter().copied().fold(f64::MAX, f64::min);
        assert!(max / min < 2.0, "{ratios:?}");
    }
}
