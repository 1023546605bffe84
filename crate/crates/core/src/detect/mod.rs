//! Matched-filter and RAKE symbol detectors.
//!
//! For a symbol hypothesis `b` both detectors compute the same statistic
//! `Z_{a,b}[b]`:
//!
//! * **MF** works in the time domain: the dechirped symbol is weighted by the
//!   conjugate channel coefficient `C_b[k]` and the DFT is evaluated at bin `b`.
//! * **RAKE** works on the spectrum computed once per symbol, combining the
//!   bins `b - k_i` with the conjugated rotated gains.
//!
//! The decision is `argmax Re{Z_{a,b}[b]}` over a [`CandidateSet`]: all `M`
//! symbols for the full detectors, or the strongest spectrum bins for the
//! candidate variants.

mod correlation;
mod indicator;
mod tdel;

pub use correlation::{auto_cross_correlation, CorrelationTable};
pub use indicator::{delta_indicator, parasitic_lags, IndicatorVariant};
pub use tdel::{tdel_detect, TdelReference, DEFAULT_RHO_TDEL};

use crate::channel::DechirpedGains;
use crate::waveform::{argmax, LoRaParams, Modem, SampleBuffer, SpectrumBuffer, Symbol};
use crate::{Error, Result, C64};

/// How a [`CandidateSet`] was built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionMode {
    /// Every symbol.
    Full,
    /// The `N_c` strongest bins.
    Fixed(usize),
    /// Bins strictly above `rho_c` times the strongest magnitude.
    Threshold(f64),
    /// Supplied explicitly.
    Explicit,
}

/// Symbol hypotheses tested by a detector.
///
/// Never empty, no duplicates. Sets selected from a spectrum always contain
/// its non-coherent argmax.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    indices: Vec<Symbol>,
    mode: SelectionMode,
}

impl CandidateSet {
    pub fn full(params: &LoRaParams) -> Self {
        CandidateSet {
            indices: (0..params.m()).map(|v| Symbol::wrapping(v as i64, params)).collect(),
            mode: SelectionMode::Full,
        }
    }

    pub fn from_indices(params: &LoRaParams, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Empty("candidate set"));
        }
        let mut seen = vec![false; params.m()];
        let mut out = Vec::with_capacity(indices.len());
        for &v in indices {
            let s = Symbol::new(v, params)?;
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::InvalidConfig {
                    field: "candidates".into(),
                    message: format!("duplicate candidate {v}"),
                });
            }
            out.push(s);
        }
        Ok(CandidateSet {
            indices: out,
            mode: SelectionMode::Explicit,
        })
    }

    pub fn indices(&self) -> &[Symbol] {
        &self.indices
    }

    pub fn mode(&self) -> SelectionMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, s: Symbol) -> bool {
        self.indices.contains(&s)
    }
}

/// Candidates from the `n_c` largest-magnitude bins, strongest first, lower
/// index first among equal magnitudes. `n_c` is clamped to `1..=M`.
pub fn select_candidates_fixed(spec: &SpectrumBuffer, n_c: usize) -> CandidateSet {
    let m = spec.len();
    let n_c = n_c.clamp(1, m);
    let mags: Vec<f64> = spec.iter().map(|z| z.norm_sqr()).collect();
    let order = |a: &usize, b: &usize| mags[*b].total_cmp(&mags[*a]).then(a.cmp(b));
    let mut idx: Vec<usize> = (0..m).collect();
    if n_c < m {
        idx.select_nth_unstable_by(n_c - 1, order);
        idx.truncate(n_c);
    }
    idx.sort_unstable_by(order);
    CandidateSet {
        indices: idx.into_iter().map(Symbol).collect(),
        mode: SelectionMode::Fixed(n_c),
    }
}

/// Candidates whose magnitude is strictly above `rho_c * max_n |R[n]|`, in
/// increasing index order.
///
/// An all-zero spectrum yields `{0}`.
pub fn select_candidates_threshold(spec: &SpectrumBuffer, rho_c: f64) -> CandidateSet {
    let mags: Vec<f64> = spec.iter().map(|z| z.norm_sqr()).collect();
    let max = mags.iter().copied().fold(0.0, f64::max);
    let lambda2 = rho_c * rho_c * max;
    let mut indices: Vec<Symbol> = mags
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > lambda2)
        .map(|(n, _)| Symbol(n))
        .collect();
    if indices.is_empty() {
        indices.push(Symbol(argmax(mags.iter().copied().enumerate())));
    }
    CandidateSet {
        indices,
        mode: SelectionMode::Threshold(rho_c),
    }
}

/// Scores of one detection.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionStatistic {
    /// Winning symbol.
    pub symbol: Symbol,
    /// Tested hypotheses, aligned with `values`.
    pub candidates: Vec<Symbol>,
    /// Raw `Z_{a,b}[b]` per candidate; the score is the real part.
    pub values: Vec<C64>,
    /// Every statistic was exactly zero (e.g. an all-zero input).
    pub degenerate: bool,
}

impl DetectionStatistic {
    fn from_values(candidates: &CandidateSet, values: Vec<C64>) -> Self {
        let symbol = Symbol(argmax(
            candidates.indices.iter().zip(&values).map(|(s, z)| (s.value(), z.re)),
        ));
        let degenerate = values.iter().all(|z| *z == C64::new(0.0, 0.0));
        DetectionStatistic {
            symbol,
            candidates: candidates.indices.clone(),
            values,
            degenerate,
        }
    }

    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(|z| z.re)
    }
}

/// Input of [`detect`]: the dechirped samples select the MF route, the
/// spectrum the RAKE route.
#[derive(Debug, Clone, Copy)]
pub enum Observation<'a> {
    Time(&'a SampleBuffer),
    Spectrum(&'a SpectrumBuffer),
}

/// MF statistic: DFT of `conj(C_b[k]) * r[k]` evaluated at bin `b` only.
pub fn mf_statistic(modem: &Modem, r: &SampleBuffer, g: &DechirpedGains, b: Symbol) -> C64 {
    let mask = modem.m() - 1;
    let b = b.value();
    let rotated: Vec<(usize, C64)> = g.taps().iter().map(|&(k, a)| (k, a * modem.twiddle(k * b))).collect();
    let mut acc = C64::new(0.0, 0.0);
    for (k, &x) in r.iter().enumerate() {
        let coef: C64 = rotated.iter().map(|&(ki, a)| a * modem.twiddle((k * ki) & mask)).sum();
        acc += x * coef.conj() * modem.twiddle((b * k) & mask);
    }
    acc
}

/// RAKE statistic: `sum_i conj(alpha~_b(i)) * R[(b - k_i) mod M]`.
pub fn rake_statistic(modem: &Modem, spec: &SpectrumBuffer, g: &DechirpedGains, b: Symbol) -> C64 {
    let mask = modem.m() - 1;
    let b = b.value();
    g.taps()
        .iter()
        .map(|&(k, a)| {
            let gain = a * modem.twiddle(k * b);
            gain.conj() * spec[b.wrapping_sub(k) & mask]
        })
        .sum()
}

/// Evaluates the statistic for every candidate and returns the argmax of the
/// real part (lowest symbol on ties).
pub fn detect(modem: &Modem, obs: Observation<'_>, g: &DechirpedGains, cand: &CandidateSet) -> DetectionStatistic {
    let values = match obs {
        Observation::Time(r) => cand.indices.iter().map(|&b| mf_statistic(modem, r, g, b)).collect(),
        Observation::Spectrum(spec) => cand
            .indices
            .iter()
            .map(|&b| rake_statistic(modem, spec, g, b))
            .collect(),
    };
    DetectionStatistic::from_values(cand, values)
}

/// RAKE decision without keeping the per-candidate values.
pub fn rake_decide(modem: &Modem, spec: &SpectrumBuffer, g: &DechirpedGains, cand: &[Symbol]) -> Symbol {
    Symbol(argmax(
        cand.iter().map(|&b| (b.value(), rake_statistic(modem, spec, g, b).re)),
    ))
}

/// Genie-aided MF output `Z_{a,a}[n]` for every bin `n`, built with the
/// coefficient of the true symbol.
pub fn ideal_mf_spectrum(modem: &Modem, r: &SampleBuffer, g: &DechirpedGains, true_a: Symbol) -> SpectrumBuffer {
    let coef = g.coefficient(true_a, modem.params());
    let mut z: Vec<C64> = r.iter().zip(coef.iter()).map(|(x, c)| x * c.conj()).collect();
    modem.dft().forward_in_place(&mut z);
    SpectrumBuffer::from_vec(z)
}

/// Genie-aided MF decision `argmax_n Re{Z_{a,a}[n]}`. Needs the transmitted
/// symbol, so it is only a simulation bound.
pub fn ideal_mf_detect(modem: &Modem, r: &SampleBuffer, g: &DechirpedGains, true_a: Symbol) -> Symbol {
    let z = ideal_mf_spectrum(modem, r, g, true_a);
    Symbol(argmax(z.iter().map(|v| v.re).enumerate()))
}
