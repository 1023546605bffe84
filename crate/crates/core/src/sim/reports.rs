use super::{run_detectors, Csir, CsvRow, Detector, SerPoint, SimConfig};
use crate::channel::{apply_channel, build_frame, dechirped_gain, MultipathChannel};
use crate::complexity::{complexity_ratio, op_count, OpCount, Receiver};
use crate::detect::{delta_indicator, ideal_mf_spectrum, rake_statistic, IndicatorVariant, SelectionMode};
use crate::sim::config::ChannelSpec;
use crate::waveform::{LoRaParams, Modem, Symbol};
use crate::Result;

/// Indicators of one transmitted symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaRow {
    pub a: usize,
    pub coh: f64,
    pub noncoh: f64,
    pub ideal_mf: f64,
    pub mf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaReport {
    pub rows: Vec<DeltaRow>,
    /// `max_a coh / max_a ideal_mf`, or 0 when the channel has no parasitic
    /// peaks.
    pub max_ratio: f64,
}

impl DeltaReport {
    fn column_max(&self, f: impl Fn(&DeltaRow) -> f64) -> f64 {
        self.rows.iter().map(f).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_coh(&self) -> f64 {
        self.column_max(|r| r.coh)
    }

    pub fn max_ideal_mf(&self) -> f64 {
        self.column_max(|r| r.ideal_mf)
    }

    /// One line per symbol followed by a `max_ratio` summary line.
    pub fn to_csv(&self) -> String {
        let mut out = super::to_csv_string(&self.rows);
        out.push_str(&format!("max_ratio,{},,,\n", self.max_ratio));
        out
    }
}

impl CsvRow for DeltaRow {
    fn header() -> &'static [&'static str] {
        &["a", "delta_coh", "delta_noncoh", "delta_ideal_mf", "delta_mf"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.a.to_string(),
            self.coh.to_string(),
            self.noncoh.to_string(),
            self.ideal_mf.to_string(),
            self.mf.to_string(),
        ]
    }
}

pub fn run_delta_report(channel: &MultipathChannel, params: &LoRaParams) -> DeltaReport {
    let g = dechirped_gain(params, channel);
    let rows: Vec<DeltaRow> = (0..params.m())
        .map(|a| {
            let s = Symbol(a);
            DeltaRow {
                a,
                coh: delta_indicator(&g, s, IndicatorVariant::Coherent, params),
                noncoh: delta_indicator(&g, s, IndicatorVariant::NonCoherent, params),
                ideal_mf: delta_indicator(&g, s, IndicatorVariant::IdealMf, params),
                mf: delta_indicator(&g, s, IndicatorVariant::Mf, params),
            }
        })
        .collect();
    let mut report = DeltaReport { rows, max_ratio: 0.0 };
    let denom = report.max_ideal_mf();
    if denom > 0.0 {
        report.max_ratio = report.max_coh() / denom;
    }
    report
}

/// Costs of the four receivers at one spreading factor and candidate count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityRow {
    pub sf: u32,
    pub k: u64,
    pub n_c: u64,
    pub mf: OpCount,
    pub rake: OpCount,
    pub cand_mf: OpCount,
    pub cand_rake: OpCount,
}

impl ComplexityRow {
    pub fn ratio_full(&self) -> f64 {
        complexity_ratio(self.mf, self.rake)
    }

    pub fn ratio_cand(&self) -> f64 {
        complexity_ratio(self.cand_mf, self.cand_rake)
    }
}

impl CsvRow for ComplexityRow {
    fn header() -> &'static [&'static str] {
        &[
            "sf",
            "k",
            "n_c",
            "mf_cmult",
            "mf_cadd",
            "rake_cmult",
            "rake_cadd",
            "ratio_mf_rake",
            "cand_mf_cmult",
            "cand_mf_cadd",
            "cand_rake_cmult",
            "cand_rake_cadd",
            "ratio_cand_mf_cand_rake",
        ]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.sf.to_string(),
            self.k.to_string(),
            self.n_c.to_string(),
            self.mf.cmult.to_string(),
            self.mf.cadd.to_string(),
            self.rake.cmult.to_string(),
            self.rake.cadd.to_string(),
            self.ratio_full().to_string(),
            self.cand_mf.cmult.to_string(),
            self.cand_mf.cadd.to_string(),
            self.cand_rake.cmult.to_string(),
            self.cand_rake.cadd.to_string(),
            self.ratio_cand().to_string(),
        ]
    }
}

pub fn run_complexity_report(sf_list: &[u32], k: u64, n_c_list: &[u64]) -> Result<Vec<ComplexityRow>> {
    let mut rows = Vec::new();
    for &sf in sf_list {
        let params = LoRaParams::new(sf)?;
        for &n_c in n_c_list {
            rows.push(ComplexityRow {
                sf,
                k,
                n_c,
                mf: op_count(Receiver::Mf, &params, k, 0),
                rake: op_count(Receiver::Rake, &params, k, 0),
                cand_mf: op_count(Receiver::CandMf, &params, k, n_c),
                cand_rake: op_count(Receiver::CandRake, &params, k, n_c),
            });
        }
    }
    Ok(rows)
}

/// Pilot counts of the estimation study.
pub const STUDY_N_P: [usize; 6] = [1, 2, 3, 4, 6, 8];
/// Path-detection thresholds of the estimation study.
pub const STUDY_RHO_P: [f64; 4] = [0.2, 0.4, 0.6, 0.8];
/// Forced delay sets on C1 (true delays 0, 2, 3): under-, exact and
/// over-estimation, and a misplaced path.
pub const FORCED_DELAYS: [&[usize]; 6] = [&[0], &[0, 2], &[0, 2, 4], &[0, 2, 3], &[0, 2, 3, 5], &[0, 2, 3, 5, 9]];

/// One SER point of a study, labelled by the varied setting.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub study: String,
    pub setting: String,
    pub point: SerPoint,
}

impl CsvRow for StudyRow {
    fn header() -> &'static [&'static str] {
        &[
            "study", "setting", "detector", "ebn0_db", "errors", "symbols", "ser", "ci95", "nc_avg", "cmult", "cadd",
        ]
    }

    fn fields(&self) -> Vec<String> {
        let mut f = vec![self.study.clone(), self.setting.clone()];
        f.extend(self.point.fields());
        f
    }
}

/// RAKE SER under estimated CSIR while varying the pilot count, the path
/// threshold (both on the configured channel) and forced delay sets on C1,
/// each next to its perfect-CSIR reference. The forced study also carries the
/// legacy coherent detector on C1.
pub fn run_estimation_study(cfg: &SimConfig) -> Result<Vec<StudyRow>> {
    let mut rows = Vec::new();
    let mut push = |study: &str, setting: String, points: Vec<SerPoint>| {
        rows.extend(points.into_iter().map(|point| StudyRow {
            study: study.to_string(),
            setting: setting.clone(),
            point,
        }));
    };
    let rake = [Detector::Rake];
    let perfect = SimConfig {
        csir: Csir::Perfect,
        ..cfg.clone()
    };
    push("reference", "perfect".into(), run_detectors(&perfect, &rake)?);
    for n_p in STUDY_N_P {
        let c = SimConfig {
            csir: Csir::Estimated,
            n_p,
            ..cfg.clone()
        };
        push("n_p", n_p.to_string(), run_detectors(&c, &rake)?);
    }
    for rho_p in STUDY_RHO_P {
        let c = SimConfig {
            csir: Csir::Estimated,
            rho_p,
            ..cfg.clone()
        };
        push("rho_p", rho_p.to_string(), run_detectors(&c, &rake)?);
    }
    let c1 = SimConfig {
        channel: ChannelSpec::Named("c1".into()),
        csir: Csir::Perfect,
        n_p: cfg.n_p.max(1),
        ..cfg.clone()
    };
    push("forced", "perfect".into(), run_detectors(&c1, &rake)?);
    // The legacy receiver gets the same pilot-estimated phase as the forced runs.
    let pilot_phase = SimConfig {
        csir: Csir::Forced(vec![0]),
        ..c1.clone()
    };
    push(
        "forced",
        "legacy-coh".into(),
        run_detectors(&pilot_phase, &[Detector::Coh])?,
    );
    for delays in FORCED_DELAYS {
        let csir = Csir::Forced(delays.to_vec());
        let label = csir.to_string();
        let c = SimConfig { csir, ..c1.clone() };
        push("forced", label, run_detectors(&c, &rake)?);
    }
    Ok(rows)
}

/// Normalized candidate counts `N_c / M` of the candidate sweep.
pub const CANDIDATE_NORMS: [f64; 9] = [0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.5, 1.0];

/// cand-RAKE SER for one candidate count.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRow {
    pub sf: u32,
    /// `None` for the full-RAKE reference.
    pub n_c: Option<usize>,
    pub n_c_norm: f64,
    pub point: SerPoint,
}

impl CsvRow for CandidateRow {
    fn header() -> &'static [&'static str] {
        &[
            "sf", "n_c", "n_c_norm", "detector", "ebn0_db", "errors", "symbols", "ser", "ci95", "nc_avg", "cmult",
            "cadd",
        ]
    }

    fn fields(&self) -> Vec<String> {
        let mut f = vec![
            self.sf.to_string(),
            self.n_c.map_or_else(String::new, |n| n.to_string()),
            self.n_c_norm.to_string(),
        ];
        f.extend(self.point.fields());
        f
    }
}

/// cand-RAKE with a fixed number of candidates `N_c = round(norm * M)` against
/// full RAKE, for every spreading factor in `sf_list`. All candidate counts of
/// one spreading factor share the same frames and noise.
pub fn run_candidate_sweep(cfg: &SimConfig, sf_list: &[u32], norms: &[f64]) -> Result<Vec<CandidateRow>> {
    let mut rows = Vec::new();
    for &sf in sf_list {
        let params = LoRaParams::new(sf)?;
        let m = params.m();
        let mut counts: Vec<usize> = norms
            .iter()
            .map(|&x| ((x * m as f64).round() as usize).clamp(1, m))
            .collect();
        counts.sort_unstable();
        counts.dedup();
        let mut dets = vec![Detector::Rake];
        dets.extend(counts.iter().map(|&n| Detector::CandRake(SelectionMode::Fixed(n))));
        let c = SimConfig { sf, ..cfg.clone() };
        let points = run_detectors(&c, &dets)?;
        let per_det = points.len() / dets.len();
        for (di, chunk) in points.chunks(per_det).enumerate() {
            let n_c = (di > 0).then(|| counts[di - 1]);
            let norm = n_c.map_or(1.0, |n| n as f64 / m as f64);
            rows.extend(chunk.iter().map(|p| CandidateRow {
                sf,
                n_c,
                n_c_norm: norm,
                point: p.clone(),
            }));
        }
    }
    Ok(rows)
}

/// Noise-free detector outputs for one symbol, per bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoRow {
    pub bin: usize,
    pub spectrum_abs: f64,
    pub rake: f64,
    pub ideal_mf: f64,
}

impl CsvRow for DemoRow {
    fn header() -> &'static [&'static str] {
        &["bin", "spectrum_abs", "rake_re", "ideal_mf_re"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.bin.to_string(),
            self.spectrum_abs.to_string(),
            self.rake.to_string(),
            self.ideal_mf.to_string(),
        ]
    }
}

/// Dechirped spectrum magnitude, RAKE statistic and ideal-MF output of symbol
/// `a` after a pilot, without noise.
pub fn run_demo(channel: &MultipathChannel, params: &LoRaParams, a: Symbol) -> Result<Vec<DemoRow>> {
    let modem = Modem::new(*params);
    let frame = build_frame(params, 1, &[a]);
    let rx = apply_channel(params, &frame, channel)?;
    let (r, spec) = modem.demodulate(frame.window(&rx, 1))?;
    let g = dechirped_gain(params, channel);
    let ideal = ideal_mf_spectrum(&modem, &r, &g, a);
    Ok((0..params.m())
        .map(|n| DemoRow {
            bin: n,
            spectrum_abs: spec[n].norm(),
            rake: rake_statistic(&modem, &spec, &g, Symbol(n)).re,
            ideal_mf: ideal[n].re,
        })
        .collect())
}
