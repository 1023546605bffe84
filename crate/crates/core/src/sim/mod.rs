//! Monte Carlo harness: SER sweeps, indicator and complexity tables, the
//! estimation and candidate studies, and wall-clock timing.
//!
//! Every trial is one frame of `n_p` pilots and `n_d` random data symbols
//! passed through the exact channel. Trial `t` draws its symbols and a unit
//! noise sequence from ChaCha stream `t` of the master seed. That noise is
//! scaled for each Eb/N0 point and shared by all detectors, so comparisons
//! across detectors and noise levels use common random numbers. Results do not
//! depend on the number of worker threads.

pub mod config;
mod csv_out;
mod reports;
mod timing;

pub use config::{ChannelSpec, Csir, DetectorKind, EbN0Axis, SimConfig};
pub use csv_out::{to_csv_string, write_csv, CsvRow};
pub use reports::{
    run_candidate_sweep, run_complexity_report, run_delta_report, run_demo, run_estimation_study, CandidateRow,
    ComplexityRow, DeltaReport, DeltaRow, DemoRow, StudyRow, CANDIDATE_NORMS, FORCED_DELAYS, STUDY_N_P, STUDY_RHO_P,
};
pub use timing::{run_timing, TimingRow};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{apply_channel, build_frame, complex_gaussian, convolve, dechirped_gain, MultipathChannel};
use crate::complexity::{op_count, OpCount, Receiver};
use crate::detect::{
    ideal_mf_detect, rake_decide, select_candidates_fixed, select_candidates_threshold, CandidateSet, Observation,
    SelectionMode, TdelReference,
};
use crate::estimator::{average_pilot_dft, detect_paths, estimate_gains_at, EstimatorConfig};
use crate::waveform::{argmax, detect_legacy, noise_variance, snr_from_ebn0_db, LegacyMode, Modem, Symbol};
use crate::{detect, DechirpedGains, LoRaParams, Result, SpectrumBuffer, C64};

/// A detector with its candidate rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Detector {
    Coh,
    NonCoh,
    CohAwgn,
    IdealMf,
    Mf,
    Rake,
    CandMf(SelectionMode),
    CandRake(SelectionMode),
    Tdel,
}

impl Detector {
    pub fn from_kind(kind: DetectorKind, selection: SelectionMode) -> Self {
        match kind {
            DetectorKind::Coh => Detector::Coh,
            DetectorKind::NonCoh => Detector::NonCoh,
            DetectorKind::CohAwgn => Detector::CohAwgn,
            DetectorKind::IdealMf => Detector::IdealMf,
            DetectorKind::Mf => Detector::Mf,
            DetectorKind::Rake => Detector::Rake,
            DetectorKind::CandMf => Detector::CandMf(selection),
            DetectorKind::CandRake => Detector::CandRake(selection),
            DetectorKind::Tdel => Detector::Tdel,
        }
    }

    pub fn kind(&self) -> DetectorKind {
        match self {
            Detector::Coh => DetectorKind::Coh,
            Detector::NonCoh => DetectorKind::NonCoh,
            Detector::CohAwgn => DetectorKind::CohAwgn,
            Detector::IdealMf => DetectorKind::IdealMf,
            Detector::Mf => DetectorKind::Mf,
            Detector::Rake => DetectorKind::Rake,
            Detector::CandMf(_) => DetectorKind::CandMf,
            Detector::CandRake(_) => DetectorKind::CandRake,
            Detector::Tdel => DetectorKind::Tdel,
        }
    }
}

/// SER estimate of one detector at one Eb/N0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SerPoint {
    pub detector: DetectorKind,
    pub ebn0_db: f64,
    pub errors: u64,
    pub symbols: u64,
    pub ser: f64,
    /// Half-width of the normal-approximation 95% binomial interval.
    pub ci95: f64,
    /// Mean number of tested hypotheses per symbol (`M` for full detectors).
    pub nc_avg: f64,
    /// Mean complex multiplications per symbol.
    pub cmult: f64,
    /// Mean complex additions per symbol.
    pub cadd: f64,
}

impl SerPoint {
    /// Binomial standard error `sqrt(p (1 - p) / n)`.
    pub fn std_error(&self) -> f64 {
        binomial_std_error(self.errors, self.symbols)
    }
}

pub fn binomial_std_error(errors: u64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = errors as f64 / n as f64;
    (p * (1.0 - p) / n as f64).sqrt()
}

pub fn binomial_ci95(errors: u64, n: u64) -> f64 {
    1.96 * binomial_std_error(errors, n)
}

/// `sqrt(se_a^2 + se_b^2)`.
pub fn combined_std_error(a: &SerPoint, b: &SerPoint) -> f64 {
    a.std_error().hypot(b.std_error())
}

/// SER of every configured detector at every Eb/N0, ordered by detector then
/// Eb/N0.
pub fn run_ser_sweep(cfg: &SimConfig) -> Result<Vec<SerPoint>> {
    cfg.validate()?;
    let dets: Vec<Detector> = cfg
        .detectors
        .iter()
        .map(|&k| Detector::from_kind(k, cfg.selection()))
        .collect();
    run_detectors(cfg, &dets)
}

/// Like [`run_ser_sweep`] with an explicit detector list, which may hold the
/// same kind several times with different candidate rules. `cfg.detectors` is
/// ignored.
pub fn run_detectors(cfg: &SimConfig, dets: &[Detector]) -> Result<Vec<SerPoint>> {
    let cfg = SimConfig {
        detectors: dets.iter().map(Detector::kind).collect(),
        ..cfg.clone()
    };
    cfg.validate()?;
    let setup = Setup::new(&cfg, dets)?;
    let per_trial: Vec<Vec<Tally>> = (0..cfg.n_trials).into_par_iter().map(|t| setup.run_trial(t)).collect();
    let mut total = vec![Tally::default(); setup.sigma2.len() * dets.len()];
    for trial in &per_trial {
        for (acc, t) in total.iter_mut().zip(trial) {
            acc.add(t);
        }
    }
    let symbols = cfg.n_trials * cfg.n_d as u64;
    let ebn0 = cfg.ebn0_values()?;
    let mut out = Vec::with_capacity(total.len());
    for (di, det) in dets.iter().enumerate() {
        for (si, &e) in ebn0.iter().enumerate() {
            let t = &total[si * dets.len() + di];
            out.push(SerPoint {
                detector: det.kind(),
                ebn0_db: e,
                errors: t.errors,
                symbols,
                ser: t.errors as f64 / symbols as f64,
                ci95: binomial_ci95(t.errors, symbols),
                nc_avg: t.candidates as f64 / symbols as f64,
                cmult: t.ops.cmult as f64 / symbols as f64,
                cadd: t.ops.cadd as f64 / symbols as f64,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    errors: u64,
    candidates: u64,
    ops: OpCount,
}

impl Tally {
    fn add(&mut self, other: &Tally) {
        self.errors += other.errors;
        self.candidates += other.candidates;
        self.ops = self.ops + other.ops;
    }
}

/// Everything shared read-only by the trials.
struct Setup<'a> {
    cfg: &'a SimConfig,
    dets: &'a [Detector],
    params: LoRaParams,
    modem: Modem,
    channel: MultipathChannel,
    /// Single-tap channel of equal energy for the flat-channel reference.
    flat: Option<MultipathChannel>,
    true_gains: DechirpedGains,
    estimator: EstimatorConfig,
    sigma2: Vec<f64>,
    full: CandidateSet,
}

impl<'a> Setup<'a> {
    fn new(cfg: &'a SimConfig, dets: &'a [Detector]) -> Result<Self> {
        let params = cfg.params()?;
        let channel = cfg.resolve_channel()?;
        let flat = dets
            .contains(&Detector::CohAwgn)
            .then(|| MultipathChannel::flat(C64::new(channel.energy().sqrt(), 0.0)));
        let sigma2 = cfg
            .ebn0_values()?
            .iter()
            .map(|&e| noise_variance(snr_from_ebn0_db(&params, e)))
            .collect();
        let estimator = EstimatorConfig {
            known_k: (cfg.csir == Csir::KnownK).then_some(channel.len()),
            ..cfg.estimator()
        };
        Ok(Setup {
            cfg,
            dets,
            params,
            modem: Modem::new(params),
            true_gains: dechirped_gain(&params, &channel),
            channel,
            flat,
            estimator,
            sigma2,
            full: CandidateSet::full(&params),
        })
    }

    fn receiver_gains(&self, avg: Option<&SpectrumBuffer>) -> DechirpedGains {
        match (&self.cfg.csir, avg) {
            (Csir::Perfect, _) | (_, None) => self.true_gains.clone(),
            (Csir::Estimated | Csir::KnownK, Some(avg)) => detect_paths(avg, &self.estimator),
            (Csir::Forced(delays), Some(avg)) => estimate_gains_at(avg, delays).expect("forced delays are validated"),
        }
    }

    fn run_trial(&self, trial: u64) -> Vec<Tally> {
        let m = self.params.m();
        let n_p = self.cfg.n_p;
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.master_seed);
        rng.set_stream(trial);
        let data: Vec<Symbol> = (0..self.cfg.n_d).map(|_| Symbol(rng.random_range(0..m))).collect();
        let frame = build_frame(&self.params, n_p, &data);
        let clean = apply_channel(&self.params, &frame, &self.channel).expect("channel is validated");
        // Data-region noise is drawn first so it does not depend on n_p.
        let pilot_len = n_p * m;
        let data_noise: Vec<C64> = (pilot_len..clean.len())
            .map(|_| complex_gaussian(&mut rng, 1.0))
            .collect();
        let mut unit: Vec<C64> = (0..pilot_len).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        unit.extend(data_noise);
        let clean_flat = self.flat.as_ref().map(|ch| convolve(frame.samples(), ch));
        let needs_tdel = self.dets.contains(&Detector::Tdel);

        let mut tallies = vec![Tally::default(); self.sigma2.len() * self.dets.len()];
        for (si, &s2) in self.sigma2.iter().enumerate() {
            let sigma = s2.sqrt();
            let noisy = |clean: &[C64]| -> Vec<C64> { clean.iter().zip(&unit).map(|(c, u)| c + u * sigma).collect() };
            let rx = noisy(&clean);
            let rx_flat = clean_flat.as_deref().map(noisy);

            let avg = (n_p > 0).then(|| {
                let spectra: Vec<SpectrumBuffer> = (0..n_p)
                    .map(|i| {
                        self.modem
                            .demodulate(frame.window(&rx, i))
                            .expect("window length is M")
                            .1
                    })
                    .collect();
                average_pilot_dft(&spectra).expect("at least one pilot")
            });
            let gains = self.receiver_gains(avg.as_ref());
            let k_hat = gains.len() as u64;
            let ref_gain = gains.taps()[0].1;
            let derotate = if ref_gain.norm() > 0.0 {
                ref_gain.conj() / ref_gain.norm()
            } else {
                C64::new(1.0, 0.0)
            };
            let tdel = match (&avg, needs_tdel) {
                (Some(avg), true) => Some(TdelReference::new(self.modem.dft(), avg, self.cfg.rho_tdel)),
                _ => None,
            };

            let row = &mut tallies[si * self.dets.len()..(si + 1) * self.dets.len()];
            for (i, &a) in data.iter().enumerate() {
                let (r, spec) = self
                    .modem
                    .demodulate(frame.window(&rx, n_p + i))
                    .expect("window length is M");
                for (tally, det) in row.iter_mut().zip(self.dets) {
                    let (decision, n_cand, ops) = match *det {
                        Detector::Coh => (
                            Symbol(argmax(spec.iter().map(|z| (z * derotate).re).enumerate())),
                            m,
                            op_count(Receiver::Legacy, &self.params, 1, 0),
                        ),
                        Detector::NonCoh => (
                            detect_legacy(&spec, LegacyMode::NonCoherent),
                            m,
                            op_count(Receiver::Legacy, &self.params, 1, 0),
                        ),
                        Detector::CohAwgn => {
                            let rx_flat = rx_flat.as_ref().expect("flat reference prepared");
                            let (_, s) = self
                                .modem
                                .demodulate(frame.window(rx_flat, n_p + i))
                                .expect("window length is M");
                            (
                                detect_legacy(&s, LegacyMode::Coherent),
                                m,
                                op_count(Receiver::Legacy, &self.params, 1, 0),
                            )
                        }
                        Detector::IdealMf => (
                            ideal_mf_detect(&self.modem, &r, &gains, a),
                            m,
                            op_count(Receiver::IdealMf, &self.params, k_hat, 0),
                        ),
                        Detector::Mf => (
                            detect::detect(&self.modem, Observation::Time(&r), &gains, &self.full).symbol,
                            m,
                            op_count(Receiver::Mf, &self.params, k_hat, 0),
                        ),
                        Detector::Rake => (
                            rake_decide(&self.modem, &spec, &gains, self.full.indices()),
                            m,
                            op_count(Receiver::Rake, &self.params, k_hat, 0),
                        ),
                        Detector::CandMf(sel) => {
                            let cand = select(&spec, sel, &self.full);
                            let n = cand.len();
                            (
                                detect::detect(&self.modem, Observation::Time(&r), &gains, &cand).symbol,
                                n,
                                op_count(Receiver::CandMf, &self.params, k_hat, n as u64),
                            )
                        }
                        Detector::CandRake(sel) => {
                            let cand = select(&spec, sel, &self.full);
                            let n = cand.len();
                            (
                                rake_decide(&self.modem, &spec, &gains, cand.indices()),
                                n,
                                op_count(Receiver::CandRake, &self.params, k_hat, n as u64),
                            )
                        }
                        Detector::Tdel => (
                            tdel.as_ref().expect("validated: TDEL needs pilots").detect(&spec),
                            m,
                            op_count(Receiver::Tdel, &self.params, 1, 0),
                        ),
                    };
                    tally.errors += u64::from(decision != a);
                    tally.candidates += n_cand as u64;
                    tally.ops = tally.ops + ops;
                }
            }
        }
        tallies
    }
}

/// Candidate set of a spectrum under `mode`. `Full` and `Explicit` test every
/// symbol.
pub fn select(spec: &SpectrumBuffer, mode: SelectionMode, full: &CandidateSet) -> CandidateSet {
    match mode {
        SelectionMode::Fixed(n) => select_candidates_fixed(spec, n),
        SelectionMode::Threshold(rho) => select_candidates_threshold(spec, rho),
        SelectionMode::Full | SelectionMode::Explicit => full.clone(),
    }
}
