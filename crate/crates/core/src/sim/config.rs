use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{MultipathChannel, TapRecord};
use crate::detect::{SelectionMode, DEFAULT_RHO_TDEL};
use crate::estimator::EstimatorConfig;
use crate::waveform::LoRaParams;
use crate::{Error, Result};

/// Monte Carlo experiment description. Field names double as the keys of the
/// TOML config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub sf: u32,
    pub channel: ChannelSpec,
    pub detectors: Vec<DetectorKind>,
    pub ebn0: EbN0Axis,
    pub n_trials: u64,
    pub n_d: usize,
    pub n_p: usize,
    pub rho_p: f64,
    /// Threshold of the candidate detectors. Ignored when `n_c` is set.
    pub rho_c: f64,
    /// Fixed candidate count; takes precedence over `rho_c`.
    pub n_c: Option<usize>,
    pub rho_tdel: f64,
    pub k_max: usize,
    pub csir: Csir,
    pub master_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let est = EstimatorConfig::default();
        SimConfig {
            sf: 7,
            channel: ChannelSpec::Named("c2".into()),
            detectors: vec![DetectorKind::Rake, DetectorKind::Coh, DetectorKind::NonCoh],
            ebn0: EbN0Axis::Range("-4:1:4".into()),
            n_trials: 100,
            n_d: 1000,
            n_p: est.n_p,
            rho_p: est.rho_p,
            rho_c: 0.3,
            n_c: None,
            rho_tdel: DEFAULT_RHO_TDEL,
            k_max: est.k_max,
            csir: Csir::Perfect,
            master_seed: 1,
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            what: "config".into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn params(&self) -> Result<LoRaParams> {
        LoRaParams::new(self.sf).map_err(|e| Error::config("sf", e.to_string()))
    }

    pub fn resolve_channel(&self) -> Result<MultipathChannel> {
        self.channel.resolve().map_err(|e| match e {
            e @ Error::InvalidConfig { .. } => e,
            other => Error::config("channel", other.to_string()),
        })
    }

    pub fn ebn0_values(&self) -> Result<Vec<f64>> {
        self.ebn0.values().map_err(|e| Error::config("ebn0", e))
    }

    pub fn estimator(&self) -> EstimatorConfig {
        EstimatorConfig {
            n_p: self.n_p,
            rho_p: self.rho_p,
            k_max: self.k_max,
            known_k: None,
        }
    }

    pub fn selection(&self) -> SelectionMode {
        match self.n_c {
            Some(n) => SelectionMode::Fixed(n),
            None => SelectionMode::Threshold(self.rho_c),
        }
    }

    /// Checks every field; the error names the first offending one.
    pub fn validate(&self) -> Result<()> {
        let params = self.params()?;
        let m = params.m();
        let ch = self.resolve_channel()?;
        ch.check_fits(&params)
            .map_err(|e| Error::config("channel", e.to_string()))?;
        if self.detectors.is_empty() {
            return Err(Error::config("detectors", "at least one detector is required"));
        }
        self.ebn0_values()?;
        if self.n_trials == 0 {
            return Err(Error::config("n_trials", "must be at least 1"));
        }
        if self.n_d == 0 {
            return Err(Error::config("n_d", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.rho_c) {
            return Err(Error::config("rho_c", format!("{} is outside [0, 1)", self.rho_c)));
        }
        if let Some(n) = self.n_c {
            if n == 0 || n > m {
                return Err(Error::config("n_c", format!("{n} is outside 1..={m}")));
            }
        }
        if !(0.0..=1.0).contains(&self.rho_tdel) {
            return Err(Error::config(
                "rho_tdel",
                format!("{} is outside [0, 1]", self.rho_tdel),
            ));
        }
        let needs_pilots = self.csir != Csir::Perfect || self.detectors.contains(&DetectorKind::Tdel);
        if needs_pilots || self.n_p > 0 {
            let est = EstimatorConfig {
                n_p: self.n_p.max(1),
                ..self.estimator()
            };
            est.validate(&params)?;
        }
        if needs_pilots && self.n_p == 0 {
            return Err(Error::config("n_p", "estimated CSIR and TDEL need at least one pilot"));
        }
        if let Csir::Forced(delays) = &self.csir {
            if delays.is_empty() {
                return Err(Error::config("csir", "forced delay list is empty"));
            }
            if let Some(&k) = delays.iter().find(|&&k| k >= m) {
                return Err(Error::config("csir", format!("forced delay {k} is not below M = {m}")));
            }
            if delays.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::config("csir", "forced delays must be strictly increasing"));
            }
        }
        Ok(())
    }
}

/// A built-in channel (`c1`, `c2`, `identity`), a channel file path, or
/// inline taps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelSpec {
    Named(String),
    Inline(Vec<TapRecord>),
}

impl ChannelSpec {
    pub fn resolve(&self) -> Result<MultipathChannel> {
        match self {
            ChannelSpec::Named(name) => match name.to_ascii_lowercase().as_str() {
                "c1" => Ok(MultipathChannel::c1()),
                "c2" => Ok(MultipathChannel::c2()),
                "identity" | "awgn" => Ok(MultipathChannel::identity()),
                _ => {
                    let path = Path::new(name);
                    if !path.exists() {
                        return Err(Error::config(
                            "channel",
                            format!("`{name}` is neither c1, c2, identity nor an existing file"),
                        ));
                    }
                    MultipathChannel::load(path)
                }
            },
            ChannelSpec::Inline(taps) => MultipathChannel::from_records(taps),
        }
    }
}

impl FromStr for ChannelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(ChannelSpec::Named(s.trim().to_string()))
    }
}

/// Eb/N0 grid in dB: `start:step:stop` (inclusive) or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EbN0Axis {
    Range(String),
    List(Vec<f64>),
}

impl EbN0Axis {
    pub fn values(&self) -> std::result::Result<Vec<f64>, String> {
        let values = match self {
            EbN0Axis::List(v) => v.clone(),
            EbN0Axis::Range(s) => parse_axis(s)?,
        };
        if values.is_empty() {
            return Err("no Eb/N0 values".into());
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(format!("{v} is not finite"));
        }
        Ok(values)
    }
}

impl FromStr for EbN0Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let axis = EbN0Axis::Range(s.trim().to_string());
        axis.values().map_err(|e| Error::config("ebn0", e))?;
        Ok(axis)
    }
}

fn parse_axis(s: &str) -> std::result::Result<Vec<f64>, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number"));
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, step, stop] = parts[..] else {
            return Err(format!("`{s}` is not start:step:stop"));
        };
        let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
        if step == 0.0 || (stop - start) * step < 0.0 {
            return Err(format!("step {step} does not lead from {start} to {stop}"));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        if n > 10_000 {
            return Err(format!("{n} points is too many"));
        }
        // Rounded so that 0.1-style steps print cleanly.
        Ok((0..n)
            .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
            .collect())
    } else {
        s.split(',').filter(|t| !t.trim().is_empty()).map(num).collect()
    }
}

/// Detectors known to the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DetectorKind {
    /// Legacy coherent: `argmax Re` of the spectrum after removing the phase of
    /// the first-path gain.
    Coh,
    NonCoh,
    /// Legacy coherent on a single-tap channel with the same energy.
    CohAwgn,
    IdealMf,
    Mf,
    Rake,
    CandMf,
    CandRake,
    Tdel,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 9] = [
        DetectorKind::Coh,
        DetectorKind::NonCoh,
        DetectorKind::CohAwgn,
        DetectorKind::IdealMf,
        DetectorKind::Mf,
        DetectorKind::Rake,
        DetectorKind::CandMf,
        DetectorKind::CandRake,
        DetectorKind::Tdel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Coh => "coh",
            DetectorKind::NonCoh => "noncoh",
            DetectorKind::CohAwgn => "coh-awgn",
            DetectorKind::IdealMf => "ideal-mf",
            DetectorKind::Mf => "mf",
            DetectorKind::Rake => "rake",
            DetectorKind::CandMf => "cand-mf",
            DetectorKind::CandRake => "cand-rake",
            DetectorKind::Tdel => "tdel",
        }
    }

    /// Comma-separated list, e.g. `rake,coh,noncoh`.
    pub fn parse_list(s: &str) -> Result<Vec<DetectorKind>> {
        s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect()
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        DetectorKind::ALL.into_iter().find(|d| d.name() == key).ok_or_else(|| {
            let known: Vec<&str> = DetectorKind::ALL.iter().map(|d| d.name()).collect();
            Error::config(
                "detectors",
                format!("unknown detector `{s}` (known: {})", known.join(", ")),
            )
        })
    }
}

impl TryFrom<String> for DetectorKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DetectorKind> for String {
    fn from(d: DetectorKind) -> String {
        d.name().to_string()
    }
}

/// Channel knowledge at the receiver.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CsirRepr", into = "CsirRepr")]
pub enum Csir {
    /// True delays and gains.
    Perfect,
    /// Delays and gains from the pilots of each frame.
    Estimated,
    /// Estimated, but told the true number of paths.
    KnownK,
    /// Gains estimated at a fixed list of delays.
    Forced(Vec<usize>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CsirRepr {
    Mode(String),
    Forced(Vec<usize>),
}

impl TryFrom<CsirRepr> for Csir {
    type Error = Error;

    fn try_from(r: CsirRepr) -> Result<Self> {
        match r {
            CsirRepr::Mode(s) => s.parse(),
            CsirRepr::Forced(v) => Ok(Csir::Forced(v)),
        }
    }
}

impl From<Csir> for CsirRepr {
    fn from(c: Csir) -> CsirRepr {
        match c {
            Csir::Forced(v) => CsirRepr::Forced(v),
            other => CsirRepr::Mode(other.to_string()),
        }
    }
}

impl fmt::Display for Csir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Csir::Perfect => f.write_str("perfect"),
            Csir::Estimated => f.write_str("estimated"),
            Csir::KnownK => f.write_str("known-k"),
            Csir::Forced(v) => {
                let parts: Vec<String> = v.iter().map(|k| k.to_string()).collect();
                write!(f, "[{}]", parts.join(" "))
            }
        }
    }
}

/// `perfect`, `estimated`, `known-k`, or a forced delay list such as
/// `0,2,3,5` or `[0 2 3 5]`.
impl FromStr for Csir {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "perfect" => return Ok(Csir::Perfect),
            "estimated" => return Ok(Csir::Estimated),
            "known-k" | "known_k" => return Ok(Csir::KnownK),
            _ => {}
        }
        let inner = t.trim_start_matches('[').trim_end_matches(']');
        let delays: std::result::Result<Vec<usize>, _> = inner
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|p| !p.is_empty())
            .map(str::parse)
            .collect();
        match delays {
            Ok(v) if !v.is_empty() => Ok(Csir::Forced(v)),
            _ => Err(Error::config(
                "csir",
                format!("`{s}` is not perfect, estimated, known-k or a delay list"),
            )),
        }
    }
}
