use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{select, CsvRow, DetectorKind};
use crate::channel::{add_awgn, apply_channel, build_frame, dechirped_gain, MultipathChannel};
use crate::detect::{detect, rake_decide, CandidateSet, Observation, SelectionMode, TdelReference, DEFAULT_RHO_TDEL};
use crate::estimator::average_pilot_dft;
use crate::waveform::{
    detect_legacy, noise_variance, LegacyMode, LoRaParams, Modem, SampleBuffer, SpectrumBuffer, Symbol,
};
use crate::Result;

/// Median wall-clock time per symbol of one detector.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub detector: DetectorKind,
    pub sf: u32,
    pub symbols: usize,
    pub runs: usize,
    pub median_ns_per_symbol: f64,
}

impl CsvRow for TimingRow {
    fn header() -> &'static [&'static str] {
        &["detector", "sf", "symbols", "runs", "median_ns_per_symbol"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.detector.to_string(),
            self.sf.to_string(),
            self.symbols.to_string(),
            self.runs.to_string(),
            self.median_ns_per_symbol.to_string(),
        ]
    }
}

/// Times the decision stage of each detector (dechirping and FFT included)
/// on `symbols` noisy received windows at 0 dB SNR. One warm-up pass, then the
/// median of `runs` passes.
pub fn run_timing(
    params: &LoRaParams,
    channel: &MultipathChannel,
    detectors: &[DetectorKind],
    selection: SelectionMode,
    symbols: usize,
    runs: usize,
    seed: u64,
) -> Result<Vec<TimingRow>> {
    let modem = Modem::new(*params);
    let m = params.m();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<Symbol> = (0..symbols).map(|_| Symbol(rng.random_range(0..m))).collect();
    let frame = build_frame(params, 1, &data);
    let mut rx = apply_channel(params, &frame, channel)?;
    add_awgn(&mut rx, noise_variance(0.0), &mut rng);
    let windows: Vec<&[_]> = (1..=symbols).map(|i| frame.window(&rx, i)).collect();
    let (_, pilot) = modem.demodulate(frame.window(&rx, 0))?;
    let tdel = TdelReference::new(modem.dft(), &average_pilot_dft(&[pilot])?, DEFAULT_RHO_TDEL);
    let gains = dechirped_gain(params, channel);
    let full = CandidateSet::full(params);

    let decide = |det: DetectorKind, r: &SampleBuffer, spec: &SpectrumBuffer| -> Symbol {
        match det {
            DetectorKind::Coh | DetectorKind::CohAwgn => detect_legacy(spec, LegacyMode::Coherent),
            DetectorKind::NonCoh => detect_legacy(spec, LegacyMode::NonCoherent),
            DetectorKind::IdealMf => crate::detect::ideal_mf_detect(&modem, r, &gains, Symbol(0)),
            DetectorKind::Mf => detect(&modem, Observation::Time(r), &gains, &full).symbol,
            DetectorKind::Rake => rake_decide(&modem, spec, &gains, full.indices()),
            DetectorKind::CandMf => {
                detect(&modem, Observation::Time(r), &gains, &select(spec, selection, &full)).symbol
            }
            DetectorKind::CandRake => rake_decide(&modem, spec, &gains, select(spec, selection, &full).indices()),
            DetectorKind::Tdel => tdel.detect(spec),
        }
    };

    let mut rows = Vec::new();
    for &det in detectors {
        let pass = || -> Result<f64> {
            let start = Instant::now();
            let mut sink = 0usize;
            for w in &windows {
                let (r, spec) = modem.demodulate(w)?;
                sink = sink.wrapping_add(decide(det, &r, &spec).value());
            }
            std::hint::black_box(sink);
            Ok(start.elapsed().as_nanos() as f64 / symbols.max(1) as f64)
        };
        pass()?;
        let mut times = (0..runs.max(1)).map(|_| pass()).collect::<Result<Vec<f64>>>()?;
        times.sort_by(f64::total_cmp);
        rows.push(TimingRow {
            detector: det,
            sf: params.sf(),
            symbols,
            runs: times.len(),
            median_ns_per_symbol: times[times.len() / 2],
        });
    }
    Ok(rows)
}
