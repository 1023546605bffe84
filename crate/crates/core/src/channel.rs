//! Integer-delay multipath channels and the dechirped path-gain algebra.
//!
//! A channel is a tapped delay line `c[k] = sum_i alpha(i) delta[k - k_i]` at
//! chip rate with the receiver synchronized on the first path (`k_0 = 0`).
//! After dechirping, path `i` turns into a tone offset by `-k_i` bins whose
//! complex amplitude is the *dechirped gain* `alpha(i) * x_0[-k_i]`, further
//! rotated by `exp(-2j*pi*k_i*b/M)` for a symbol hypothesis `b`.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::waveform::{chirp_sample, gen_chirp, LoRaParams, SampleBuffer, Symbol};
use crate::{Error, Result, C64};

/// One path of a multipath channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    /// Delay in samples.
    pub delay: usize,
    pub gain: C64,
}

impl Tap {
    pub fn new(delay: usize, gain: C64) -> Self {
        Tap { delay, gain }
    }

    pub fn real(delay: usize, gain: f64) -> Self {
        Tap::new(delay, C64::new(gain, 0.0))
    }
}

/// Discrete multipath channel.
///
/// Invariants: at least one tap, delays strictly increasing, first delay 0.
/// Gains are kept exactly as given, without power normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct MultipathChannel {
    taps: Vec<Tap>,
}

impl MultipathChannel {
    pub fn new(taps: Vec<Tap>) -> Result<Self> {
        check_delays(taps.iter().map(|t| t.delay), true)?;
        Ok(MultipathChannel { taps })
    }

    /// Single unit tap.
    pub fn identity() -> Self {
        Self::flat(C64::new(1.0, 0.0))
    }

    /// Single tap with the given gain.
    pub fn flat(gain: C64) -> Self {
        MultipathChannel {
            taps: vec![Tap::new(0, gain)],
        }
    }

    /// Three-path benchmark channel `delta[k] + 0.8 delta[k-2] + 0.5 delta[k-3]`.
    pub fn c1() -> Self {
        MultipathChannel {
            taps: vec![Tap::real(0, 1.0), Tap::real(2, 0.8), Tap::real(3, 0.5)],
        }
    }

    /// Two-path benchmark channel `delta[k] + 0.8 delta[k-5]`.
    pub fn c2() -> Self {
        MultipathChannel {
            taps: vec![Tap::real(0, 1.0), Tap::real(5, 0.8)],
        }
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    /// Number of paths `K`.
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn max_delay(&self) -> usize {
        self.taps.last().map_or(0, |t| t.delay)
    }

    /// `sum_i |alpha(i)|^2`.
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t.gain.norm_sqr()).sum()
    }

    /// Fails unless every delay is smaller than `M`.
    pub fn check_fits(&self, params: &LoRaParams) -> Result<()> {
        match self.taps.iter().find(|t| t.delay >= params.m()) {
            Some(t) => Err(Error::DelayTooLarge {
                delay: t.delay,
                m: params.m(),
            }),
            None => Ok(()),
        }
    }

    /// Parses a channel description.
    ///
    /// ```toml
    /// [[tap]]
    /// delay = 0
    /// gain_re = 1.0
    /// gain_im = 0.0
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ChannelFile = toml::from_str(text).map_err(|e| Error::Parse {
            what: "channel file".into(),
            message: e.to_string(),
        })?;
        Self::from_records(&file.tap)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_records(records: &[TapRecord]) -> Result<Self> {
        Self::new(
            records
                .iter()
                .map(|r| Tap::new(r.delay, C64::new(r.gain_re, r.gain_im)))
                .collect(),
        )
    }

    pub fn to_records(&self) -> Vec<TapRecord> {
        self.taps
            .iter()
            .map(|t| TapRecord {
                delay: t.delay,
                gain_re: t.gain.re,
                gain_im: t.gain.im,
            })
            .collect()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&ChannelFile { tap: self.to_records() }).expect("channel records always serialize")
    }
}

/// One record of a channel description file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TapRecord {
    pub delay: usize,
    pub gain_re: f64,
    #[serde(default)]
    pub gain_im: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelFile {
    #[serde(alias = "taps")]
    tap: Vec<TapRecord>,
}

fn check_delays(delays: impl Iterator<Item = usize>, first_zero: bool) -> Result<()> {
    let mut prev: Option<usize> = None;
    for d in delays {
        match prev {
            None if first_zero && d != 0 => {
                return Err(Error::InvalidChannel(format!("first tap must have delay 0, got {d}")))
            }
            Some(p) if d <= p => {
                return Err(Error::InvalidChannel(format!(
                    "delays must be strictly increasing ({p} then {d})"
                )))
            }
            _ => {}
        }
        prev = Some(d);
    }
    if prev.is_none() {
        return Err(Error::InvalidChannel("channel needs at least one tap".into()));
    }
    Ok(())
}

/// Per-path dechirped gains `(k_i, alpha~(i))`.
///
/// The same type carries true gains (from [`dechirped_gain`]) and receiver
/// estimates, and after [`DechirpedGains::rotate`] the gains for a symbol
/// hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct DechirpedGains {
    taps: Vec<(usize, C64)>,
}

impl DechirpedGains {
    /// Delays must be strictly increasing; at least one tap.
    pub fn new(taps: Vec<(usize, C64)>) -> Result<Self> {
        check_delays(taps.iter().map(|t| t.0), false)?;
        Ok(DechirpedGains { taps })
    }

    pub fn taps(&self) -> &[(usize, C64)] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn delays(&self) -> impl Iterator<Item = usize> + '_ {
        self.taps.iter().map(|t| t.0)
    }

    pub fn max_delay(&self) -> usize {
        self.taps.last().map_or(0, |t| t.0)
    }

    /// `sum_i |alpha~(i)|^2`, equal to the channel energy for true gains.
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t.1.norm_sqr()).sum()
    }

    /// Gains for symbol hypothesis `b`: each multiplied by `exp(-2j*pi*k_i*b/M)`.
    pub fn rotate(&self, b: Symbol, params: &LoRaParams) -> DechirpedGains {
        DechirpedGains {
            taps: self
                .taps
                .iter()
                .map(|&(k, g)| (k, g * rotation(k, b.value(), params)))
                .collect(),
        }
    }

    /// Zero-padded tap vector of length `max_delay + 1`.
    pub fn padded(&self) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); self.max_delay() + 1];
        for &(k, g) in &self.taps {
            v[k] = g;
        }
        v
    }

    /// Symbol-dependent channel coefficient
    /// `C_b[k] = sum_i alpha~_b(i) exp(-2j*pi*k*k_i/M)`.
    pub fn coefficient(&self, b: Symbol, params: &LoRaParams) -> SampleBuffer {
        let m = params.m();
        let rotated = self.rotate(b, params);
        let coef = (0..m)
            .map(|k| rotated.taps.iter().map(|&(ki, g)| g * rotation(ki, k, params)).sum())
            .collect();
        SampleBuffer::from_vec(coef)
    }
}

/// `exp(-2j*pi*k*b/M)` with the product reduced modulo `M` first.
pub(crate) fn rotation(k: usize, b: usize, params: &LoRaParams) -> C64 {
    let m = params.m();
    let idx = ((k % m) * (b % m)) % m;
    C64::from_polar(1.0, -2.0 * std::f64::consts::PI * idx as f64 / m as f64)
}

/// True dechirped gains `alpha~(i) = alpha(i) * x_0[-k_i]`.
pub fn dechirped_gain(params: &LoRaParams, ch: &MultipathChannel) -> DechirpedGains {
    DechirpedGains {
        taps: ch
            .taps
            .iter()
            .map(|t| (t.delay, t.gain * chirp_sample(params, 0, -(t.delay as i64))))
            .collect(),
    }
}

/// Free-function form of [`DechirpedGains::rotate`].
pub fn rotate_gains(g: &DechirpedGains, b: Symbol, params: &LoRaParams) -> DechirpedGains {
    g.rotate(b, params)
}

/// Free-function form of [`DechirpedGains::coefficient`].
pub fn channel_coefficient(g: &DechirpedGains, b: Symbol, params: &LoRaParams) -> SampleBuffer {
    g.coefficient(b, params)
}

pub fn channel_energy(ch: &MultipathChannel) -> f64 {
    ch.energy()
}

/// A burst of `n_p` pilot symbols (value 0) followed by `n_d` data symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    n_p: usize,
    symbols: Vec<Symbol>,
    samples: Vec<C64>,
    m: usize,
}

impl Frame {
    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn n_d(&self) -> usize {
        self.symbols.len() - self.n_p
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn data(&self) -> &[Symbol] {
        &self.symbols[self.n_p..]
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Window of symbol `index` inside any signal aligned with this frame.
    pub fn window<'a>(&self, signal: &'a [C64], index: usize) -> &'a [C64] {
        &signal[index * self.m..(index + 1) * self.m]
    }
}

/// Concatenates the chirps of `pilots` zero symbols and `data`.
pub fn build_frame(params: &LoRaParams, pilots: usize, data: &[Symbol]) -> Frame {
    let pilot = Symbol::new(0, params).expect("0 is always a valid symbol");
    let symbols: Vec<Symbol> = std::iter::repeat_n(pilot, pilots).chain(data.iter().copied()).collect();
    let mut samples = Vec::with_capacity(symbols.len() * params.m());
    let mut cache: Option<(Symbol, SampleBuffer)> = None;
    for &s in &symbols {
        match &cache {
            Some((c, chirp)) if *c == s => samples.extend_from_slice(chirp),
            _ => {
                let chirp = gen_chirp(params, s);
                samples.extend_from_slice(&chirp);
                cache = Some((s, chirp));
            }
        }
    }
    Frame {
        n_p: pilots,
        symbols,
        samples,
        m: params.m(),
    }
}

/// Exact linear convolution of `signal` with the channel, truncated to the
/// input length. Samples before the start of the signal are silence.
pub fn convolve(signal: &[C64], ch: &MultipathChannel) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); signal.len()];
    for tap in &ch.taps {
        if tap.delay >= signal.len() {
            continue;
        }
        for (o, s) in out[tap.delay..].iter_mut().zip(signal) {
            *o += tap.gain * s;
        }
    }
    out
}

/// Passes a frame through the channel (noise-free).
///
/// The first `k_max` samples of every symbol carry ISI from the previous
/// symbol; the first symbol of the frame sees silence before it.
pub fn apply_channel(params: &LoRaParams, frame: &Frame, ch: &MultipathChannel) -> Result<Vec<C64>> {
    ch.check_fits(params)?;
    Ok(convolve(&frame.samples, ch))
}

/// Draws one circular complex Gaussian sample of variance `sigma2`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, sigma2: f64) -> C64 {
    let s = (sigma2 / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

/// Adds i.i.d. circular complex Gaussian noise of variance `sigma2` per sample
/// (`sigma2 / 2` on each of the real and imaginary parts).
pub fn add_awgn<R: Rng + ?Sized>(samples: &mut [C64], sigma2: f64, rng: &mut R) {
    if sigma2 == 0.0 {
        return;
    }
    for z in samples.iter_mut() {
        *z += complex_gaussian(rng, sigma2);
    }
}

/// Dechirped symbol under the ISI-free approximation:
/// `sum_i alpha~_a(i) exp(2j*pi*k*(a - k_i)/M)`.
///
/// Simulation never uses this; it is the reference the exact model is compared
/// against.
pub fn approximate_dechirped(params: &LoRaParams, g: &DechirpedGains, a: Symbol) -> SampleBuffer {
    let m = params.m();
    let rotated = g.rotate(a, params);
    let out = (0..m)
        .map(|k| {
            rotated
                .taps
                .iter()
                .map(|&(ki, gain)| {
                    let idx = (k * ((a.value() + m - ki % m) % m)) % m;
                    gain * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * idx as f64 / m as f64)
                })
                .sum()
        })
        .collect();
    SampleBuffer::from_vec(out)
}
