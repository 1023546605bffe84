//! Pilot-based estimation of path delays and dechirped gains.
//!
//! A frame starts with `N_p` pilot symbols of value 0. After dechirping, path
//! `i` of a pilot shows up as a spectral peak `M * alpha~(i)` at bin
//! `M - k_i` (bin 0 for the first path). Averaging the pilot spectra cuts the
//! noise power by `N_p`; the echoes are then found by thresholding the bins
//! `M - k_max .. M - 1` relative to bin 0.

use serde::{Deserialize, Serialize};

use crate::channel::{DechirpedGains, MultipathChannel};
use crate::waveform::LoRaParams;
use crate::{Error, Result, SpectrumBuffer, C64};

/// Pilot count, threshold and search range of the path detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub n_p: usize,
    pub rho_p: f64,
    pub k_max: usize,
    /// True number of paths. When set, the `K - 1` strongest bins of the search
    /// range are taken instead of thresholding.
    pub known_k: Option<usize>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            n_p: 6,
            rho_p: 0.4,
            k_max: 10,
            known_k: None,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self, params: &LoRaParams) -> Result<()> {
        if self.n_p == 0 {
            return Err(Error::config("n_p", "at least one pilot is required"));
        }
        if !(self.rho_p > 0.0 && self.rho_p < 1.0) {
            return Err(Error::config("rho_p", format!("{} is outside (0, 1)", self.rho_p)));
        }
        if self.k_max == 0 || self.k_max >= params.m() {
            return Err(Error::config(
                "k_max",
                format!("{} is outside 1..{}", self.k_max, params.m()),
            ));
        }
        if self.known_k == Some(0) {
            return Err(Error::config("known_k", "a channel has at least one path"));
        }
        Ok(())
    }
}

/// Element-wise mean of the pilot spectra.
pub fn average_pilot_dft(pilot_spectra: &[SpectrumBuffer]) -> Result<SpectrumBuffer> {
    let first = pilot_spectra.first().ok_or(Error::Empty("pilot spectra"))?;
    let m = first.len();
    let mut acc = vec![C64::new(0.0, 0.0); m];
    for spec in pilot_spectra {
        if spec.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                actual: spec.len(),
            });
        }
        for (a, z) in acc.iter_mut().zip(spec.iter()) {
            *a += z;
        }
    }
    let scale = 1.0 / pilot_spectra.len() as f64;
    for a in &mut acc {
        *a *= scale;
    }
    Ok(SpectrumBuffer::from_vec(acc))
}

/// Delays and gains read from an averaged pilot spectrum.
///
/// Bin 0 is always kept as the synchronized first path. An echo at delay `k`
/// is accepted when `|avg[M - k]| > rho_p * |avg[0]|` (or, with `known_k`,
/// when it is among the `K - 1` strongest bins of the range). Gains are the
/// bin values divided by `M`, on the scale of
/// [`crate::channel::dechirped_gain`].
pub fn detect_paths(avg: &SpectrumBuffer, cfg: &EstimatorConfig) -> DechirpedGains {
    let m = avg.len();
    let k_max = cfg.k_max.min(m - 1);
    let bin = |k: usize| avg[(m - k) % m];
    let mut delays: Vec<usize> = match cfg.known_k {
        Some(k) => {
            let mut range: Vec<usize> = (1..=k_max).collect();
            // Strongest first, shorter delay first on ties.
            range.sort_by(|&a, &b| bin(b).norm_sqr().total_cmp(&bin(a).norm_sqr()).then(a.cmp(&b)));
            range.truncate(k.saturating_sub(1));
            range
        }
        None => {
            let lambda = cfg.rho_p * avg[0].norm();
            (1..=k_max).filter(|&k| bin(k).norm() > lambda).collect()
        }
    };
    delays.sort_unstable();
    gains_at(avg, std::iter::once(0).chain(delays))
}

/// Gains at a forced list of delays (strictly increasing), read from bins
/// `M - k`. Used to study under- and over-estimated delay sets.
pub fn estimate_gains_at(avg: &SpectrumBuffer, delays: &[usize]) -> Result<DechirpedGains> {
    let m = avg.len();
    if let Some(&k) = delays.iter().find(|&&k| k >= m) {
        return Err(Error::DelayTooLarge { delay: k, m });
    }
    DechirpedGains::new(delays.iter().map(|&k| (k, avg[(m - k) % m] / m as f64)).collect())
}

fn gains_at(avg: &SpectrumBuffer, delays: impl Iterator<Item = usize>) -> DechirpedGains {
    let m = avg.len();
    let taps = delays.map(|k| (k, avg[(m - k) % m] / m as f64)).collect();
    DechirpedGains::new(taps).expect("delays are strictly increasing from 0")
}

/// Comparison of estimated delays with the true channel.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PathDiagnostics {
    /// True delays that were found.
    pub detected: Vec<usize>,
    /// True delays within `k_max` that were not found.
    pub missed: Vec<usize>,
    /// True delays beyond `k_max`; the estimator cannot see them.
    pub beyond_range: Vec<usize>,
    /// Estimated delays with no true path.
    pub spurious: Vec<usize>,
}

impl PathDiagnostics {
    pub fn exact(&self) -> bool {
        self.missed.is_empty() && self.beyond_range.is_empty() && self.spurious.is_empty()
    }
}

pub fn diagnose(estimate: &DechirpedGains, truth: &MultipathChannel, cfg: &EstimatorConfig) -> PathDiagnostics {
    let est: Vec<usize> = estimate.delays().collect();
    let mut d = PathDiagnostics::default();
    for tap in truth.taps() {
        if est.contains(&tap.delay) {
            d.detected.push(tap.delay);
        } else if tap.delay > cfg.k_max {
            d.beyond_range.push(tap.delay);
        } else {
            d.missed.push(tap.delay);
        }
    }
    d.spurious = est
        .into_iter()
        .filter(|k| !truth.taps().iter().any(|t| t.delay == *k))
        .collect();
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{add_awgn, apply_channel, build_frame, dechirped_gain, Tap};
    use crate::waveform::{Modem, Symbol};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Spectra of `n` steady-state pilots (each preceded by another pilot).
    fn pilot_spectra(modem: &Modem, ch: &MultipathChannel, n: usize, sigma2: f64, seed: u64) -> Vec<SpectrumBuffer> {
        let params = *modem.params();
        let frame = build_frame(&params, n + 1, &[]);
        let mut rx = apply_channel(&params, &frame, ch).unwrap();
        add_awgn(&mut rx, sigma2, &mut ChaCha8Rng::seed_from_u64(seed));
        (1..=n)
            .map(|i| modem.demodulate(frame.window(&rx, i)).unwrap().1)
            .collect()
    }

    fn assert_gains_close(a: &DechirpedGains, b: &DechirpedGains, tol: f64) {
        assert_eq!(a.delays().collect::<Vec<_>>(), b.delays().collect::<Vec<_>>());
        for (x, y) in a.taps().iter().zip(b.taps()) {
            assert!((x.1 - y.1).norm() < tol, "{:?} vs {:?}", x, y);
        }
    }

    #[test]
    fn config_validation() {
        let params = LoRaParams::new(7).unwrap();
        assert!(EstimatorConfig::default().validate(&params).is_ok());
        let bad = [
            EstimatorConfig {
                n_p: 0,
                ..Default::default()
            },
            EstimatorConfig {
                rho_p: 0.0,
                ..Default::default()
            },
            EstimatorConfig {
                rho_p: 1.0,
                ..Default::default()
            },
            EstimatorConfig {
                k_max: 0,
                ..Default::default()
            },
            EstimatorConfig {
                k_max: 128,
                ..Default::default()
            },
            EstimatorConfig {
                known_k: Some(0),
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(
                matches!(cfg.validate(&params), Err(Error::InvalidConfig { .. })),
                "{cfg:?}"
            );
        }
    }

    #[test]
    fn averaging() {
        let params = LoRaParams::new(4).unwrap();
        assert!(matches!(average_pilot_dft(&[]), Err(Error::Empty(_))));
        let a = SpectrumBuffer::new(&params, vec![C64::new(1.0, 2.0); 16]).unwrap();
        let b = SpectrumBuffer::new(&params, vec![C64::new(3.0, 0.0); 16]).unwrap();
        assert_eq!(average_pilot_dft(std::slice::from_ref(&a)).unwrap(), a);
        let avg = average_pilot_dft(&[a, b]).unwrap();
        assert!(avg.iter().all(|z| *z == C64::new(2.0, 1.0)));
        let short = LoRaParams::new(3).unwrap();
        let c = SpectrumBuffer::zeros(&short);
        let d = SpectrumBuffer::zeros(&params);
        assert!(matches!(average_pilot_dft(&[d, c]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn noise_free_exact_on_reference_channels() {
        let params = LoRaParams::new(7).unwrap();
        let modem = Modem::new(params);
        let cfg = EstimatorConfig::default();
        for ch in [
            MultipathChannel::c1(),
            MultipathChannel::c2(),
            MultipathChannel::identity(),
        ] {
            let avg = average_pilot_dft(&pilot_spectra(&modem, &ch, 6, 0.0, 0)).unwrap();
            let est = detect_paths(&avg, &cfg);
            assert_gains_close(&est, &dechirped_gain(&params, &ch), 1e-9);
            assert!(diagnose(&est, &ch, &cfg).exact());
        }
    }

    #[test]
    fn high_threshold_misses_weak_echo() {
        let params = LoRaParams::new(7).unwrap();
        let modem = Modem::new(params);
        let ch = MultipathChannel::c1();
        let avg = average_pilot_dft(&pilot_spectra(&modem, &ch, 1, 0.0, 0)).unwrap();
        let cfg = EstimatorConfig {
            rho_p: 0.6,
            ..Default::default()
        };
        let est = detect_paths(&avg, &cfg);
        assert_eq!(est.delays().collect::<Vec<_>>(), vec![0, 2]);
        let diag = diagnose(&est, &ch, &cfg);
        assert_eq!(diag.missed, vec![3]);
        assert!(!diag.exact());
    }

    #[test]
    fn known_path_count_takes_strongest_bins() {
        let params = LoRaParams::new(7).unwrap();
        let modem = Modem::new(params);
        let ch = MultipathChannel::c1();
        let avg = average_pilot_dft(&pilot_spectra(&modem, &ch, 1, 0.0, 0)).unwrap();
        for (k, expected) in [(1, vec![0]), (2, vec![0, 2]), (3, vec![0, 2, 3])] {
            let cfg = EstimatorConfig {
                known_k: Some(k),
                rho_p: 0.9,
                ..Default::default()
            };
            assert_eq!(detect_paths(&avg, &cfg).delays().collect::<Vec<_>>(), expected);
        }
    }

    #[test]
    fn echo_beyond_range_reported() {
        let params = LoRaParams::new(7).unwrap();
        let modem = Modem::new(params);
        let ch = MultipathChannel::new(vec![Tap::real(0, 1.0), Tap::real(12, 0.9)]).unwrap();
        let avg = average_pilot_dft(&pilot_spectra(&modem, &ch, 1, 0.0, 0)).unwrap();
        let cfg = EstimatorConfig::default();
        let est = detect_paths(&avg, &cfg);
        assert_eq!(est.len(), 1);
        assert_eq!(diagnose(&est, &ch, &cfg).beyond_range, vec![12]);
    }

    #[test]
    fn forced_delays() {
        let params = LoRaParams::new(7).unwrap();
        let modem = Modem::new(params);
        let ch = MultipathChannel::c1();
        let avg = average_pilot_dft(&pilot_spectra(&modem, &ch, 1, 0.0, 0)).unwrap();
        let truth = dechirped_gain(&params, &ch);
        let only_first = estimate_gains_at(&avg, &[0]).unwrap();
        assert!((only_first.taps()[0].1 - truth.taps()[0].1).norm() < 1e-9);
        let ghost = estimate_gains_at(&avg, &[0, 2, 3, 5]).unwrap();
        assert!(ghost.taps()[3].1.norm() < 1e-9);
        assert!(estimate_gains_at(&avg, &[0, 200]).is_err());
        assert!(estimate_gains_at(&avg, &[2, 0]).is_err());
    }

    #[test]
    fn averaging_reduces_bin_zero_variance() {
        let params = LoRaParams::new(6).unwrap();
        let modem = Modem::new(params);
        let ch = MultipathChannel::identity();
        let sigma2 = 1.0;
        let runs = 10_000;
        let variance = |n_p: usize| {
            let mut acc = 0.0;
            for run in 0..runs {
                let avg = average_pilot_dft(&pilot_spectra(&modem, &ch, n_p, sigma2, run)).unwrap();
                acc += (avg[0] - C64::new(64.0, 0.0)).norm_sqr();
            }
            acc / runs as f64
        };
        for n_p in [1usize, 4, 8] {
            let expected = 64.0 * sigma2 / n_p as f64;
            let v = variance(n_p);
            assert!((v / expected - 1.0).abs() < 0.1, "n_p={n_p}: {v} vs {expected}");
        }
    }

    proptest! {
        #[test]
        fn noise_free_exact_for_strong_echoes(
            echoes in proptest::collection::btree_map(1usize..=10, (0.45f64..1.0, -3.2f64..3.2), 0..4),
        ) {
            let params = LoRaParams::new(7).unwrap();
            let modem = Modem::new(params);
            let taps = std::iter::once(Tap::real(0, 1.0))
                .chain(echoes.iter().map(|(&k, &(mag, ph))| Tap::new(k, C64::from_polar(mag, ph))))
                .collect();
            let ch = MultipathChannel::new(taps).unwrap();
            let avg = average_pilot_dft(&pilot_spectra(&modem, &ch, 2, 0.0, 0)).unwrap();
            let est = detect_paths(&avg, &EstimatorConfig::default());
            let truth = dechirped_gain(&params, &ch);
            prop_assert_eq!(est.delays().collect::<Vec<_>>(), truth.delays().collect::<Vec<_>>());
            for (x, y) in est.taps().iter().zip(truth.taps()) {
                prop_assert!((x.1 - y.1).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn first_pilot_after_silence_is_not_exact() {
        // Documents why exactness is stated for steady-state pilots.
        let params = LoRaParams::new(7).unwrap();
        let modem = Modem::new(params);
        let ch = MultipathChannel::c1();
        let frame = build_frame(&params, 1, &[Symbol::new(0, &params).unwrap()]);
        let rx = apply_channel(&params, &frame, &ch).unwrap();
        let (_, first) = modem.demodulate(frame.window(&rx, 0)).unwrap();
        let est = detect_paths(&first, &EstimatorConfig::default());
        let truth = dechirped_gain(&params, &ch);
        let err = est.taps()[1].1 - truth.taps()[1].1;
        assert!(err.norm() > 1e-6);
        assert!(err.norm() < 0.05);
    }
}
