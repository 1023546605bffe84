//! LoRa waveforms, dechirping and the legacy detectors.
//!
//! Everything is expressed in chip-rate discrete time: a symbol spans `M = 2^SF`
//! samples and the bandwidth, symbol period and sampling period only appear
//! through their ratios.

use std::f64::consts::PI;
use std::ops::{Deref, DerefMut};

use crate::dft::Dft;
use crate::{Error, Result, C64};

/// Modulation constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LoRaParams {
    sf: u32,
    m: usize,
}

impl LoRaParams {
    /// Smallest and largest spreading factor accepted by [`LoRaParams::new`].
    pub const SF_RANGE: std::ops::RangeInclusive<u32> = 2..=16;

    /// Creates the parameters for spreading factor `sf`.
    ///
    /// Deployed LoRa uses 7..=12; smaller values are accepted so tests can work
    /// on tiny alphabets.
    pub fn new(sf: u32) -> Result<Self> {
        if !Self::SF_RANGE.contains(&sf) {
            return Err(Error::InvalidSpreadingFactor(sf));
        }
        Ok(LoRaParams { sf, m: 1 << sf })
    }

    pub fn sf(&self) -> u32 {
        self.sf
    }

    /// Alphabet size, equal to the number of samples per symbol.
    pub fn m(&self) -> usize {
        self.m
    }

    /// True for the spreading factors used on air (7 to 12).
    pub fn is_standard(&self) -> bool {
        (7..=12).contains(&self.sf)
    }

    pub fn symbol(&self, value: usize) -> Result<Symbol> {
        Symbol::new(value, self)
    }
}

/// A LoRa symbol value in `0..M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(pub(crate) usize);

impl Symbol {
    pub fn new(value: usize, params: &LoRaParams) -> Result<Self> {
        if value >= params.m() {
            return Err(Error::SymbolOutOfRange { value, m: params.m() });
        }
        Ok(Symbol(value))
    }

    /// Reduces `value` modulo `M`.
    pub fn wrapping(value: i64, params: &LoRaParams) -> Self {
        Symbol(value.rem_euclid(params.m() as i64) as usize)
    }

    pub fn value(self) -> usize {
        self.0
    }
}

impl From<Symbol> for usize {
    fn from(s: Symbol) -> usize {
        s.0
    }
}

macro_rules! buffer_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(Vec<C64>);

        impl $name {
            /// Wraps `values`, checking that it holds exactly `M` entries.
            pub fn new(params: &LoRaParams, values: Vec<C64>) -> Result<Self> {
                if values.len() != params.m() {
                    return Err(Error::LengthMismatch {
                        expected: params.m(),
                        actual: values.len(),
                    });
                }
                Ok($name(values))
            }

            pub fn zeros(params: &LoRaParams) -> Self {
                $name(vec![C64::new(0.0, 0.0); params.m()])
            }

            pub(crate) fn from_vec(values: Vec<C64>) -> Self {
                $name(values)
            }

            pub fn into_vec(self) -> Vec<C64> {
                self.0
            }

            /// Sum of squared magnitudes.
            pub fn energy(&self) -> f64 {
                self.0.iter().map(|z| z.norm_sqr()).sum()
            }
        }

        impl Deref for $name {
            type Target = [C64];

            fn deref(&self) -> &[C64] {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut [C64] {
                &mut self.0
            }
        }
    };
}

buffer_type!(
    /// One symbol of `M` time-domain samples.
    SampleBuffer
);
buffer_type!(
    /// `M` DFT bins; bin arithmetic is modulo `M`.
    SpectrumBuffer
);

/// `exp(j*pi*num/M)` with `num` already reduced to `[0, 2M)`.
fn unit_phasor(num: i64, m: usize) -> C64 {
    C64::from_polar(1.0, PI * num as f64 / m as f64)
}

/// Sample `k` of the chirp for symbol `a`, for any integer `k`.
///
/// The phase `2*pi*k*(a/M - 1/2 + k/(2M))` equals `pi*k*(2a + k - M)/M`; the
/// integer numerator is reduced modulo `2M` before the exponential so the
/// result stays exact for large `k`.
pub fn chirp_sample(params: &LoRaParams, a: usize, k: i64) -> C64 {
    let m = params.m() as i64;
    let num = (k * (2 * a as i64 + k - m)).rem_euclid(2 * m);
    unit_phasor(num, params.m())
}

/// Synthesizes the chirp carrying symbol `a`.
pub fn gen_chirp(params: &LoRaParams, a: Symbol) -> SampleBuffer {
    SampleBuffer(
        (0..params.m() as i64)
            .map(|k| chirp_sample(params, a.value(), k))
            .collect(),
    )
}

/// Normalized instantaneous frequency of symbol `a` from forward phase
/// differences, optionally wrapped into `[-1/2, 1/2)`.
pub fn instantaneous_frequency(params: &LoRaParams, a: Symbol, wrap: bool) -> Vec<f64> {
    let m = params.m() as f64;
    (0..params.m())
        .map(|k| {
            let f = (a.value() + k) as f64 / m - 0.5 + 0.5 / m;
            if wrap {
                f - (f + 0.5).floor()
            } else {
                f
            }
        })
        .collect()
}

/// Multiplies `r` by the conjugate base up-chirp.
pub fn dechirp(params: &LoRaParams, r: &SampleBuffer) -> SampleBuffer {
    SampleBuffer(
        r.iter()
            .enumerate()
            .map(|(k, &x)| x * chirp_sample(params, 0, k as i64).conj())
            .collect(),
    )
}

/// Decision rule of the legacy demodulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LegacyMode {
    /// `argmax Re{R[n]}`; assumes the channel phase has been compensated.
    Coherent,
    /// `argmax |R[n]|`.
    NonCoherent,
}

/// Index of the largest score, lowest index on ties.
pub(crate) fn argmax<I>(scores: I) -> usize
where
    I: IntoIterator<Item = (usize, f64)>,
{
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    for (idx, score) in scores {
        if score > best.1 || (score == best.1 && idx < best.0) {
            best = (idx, score);
        }
    }
    if best.0 == usize::MAX {
        0
    } else {
        best.0
    }
}

/// Legacy LoRa detection on a spectrum.
pub fn detect_legacy(spec: &SpectrumBuffer, mode: LegacyMode) -> Symbol {
    let idx = match mode {
        LegacyMode::Coherent => argmax(spec.iter().map(|z| z.re).enumerate()),
        // Squared magnitude has the same argmax and no square root.
        LegacyMode::NonCoherent => argmax(spec.iter().map(|z| z.norm_sqr()).enumerate()),
    };
    Symbol(idx)
}

/// `10*log10(M/SF)`, the offset between per-sample SNR and Eb/N0.
pub fn ebn0_offset_db(params: &LoRaParams) -> f64 {
    10.0 * (params.m() as f64 / params.sf() as f64).log10()
}

pub fn ebn0_from_snr_db(params: &LoRaParams, snr_db: f64) -> f64 {
    snr_db + ebn0_offset_db(params)
}

pub fn snr_from_ebn0_db(params: &LoRaParams, ebn0_db: f64) -> f64 {
    ebn0_db - ebn0_offset_db(params)
}

/// Per-sample complex noise variance for unit-power samples.
pub fn noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Precomputed tables for one spreading factor.
///
/// Holds the DFT plans, the down-chirp and the twiddle table
/// `exp(-2j*pi*n/M)`. Cheap to share between threads.
#[derive(Clone)]
pub struct Modem {
    params: LoRaParams,
    dft: Dft,
    downchirp: Vec<C64>,
    twiddles: Vec<C64>,
}

impl std::fmt::Debug for Modem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Modem").field("params", &self.params).finish()
    }
}

impl Modem {
    pub fn new(params: LoRaParams) -> Self {
        let m = params.m();
        let downchirp = (0..m as i64).map(|k| chirp_sample(&params, 0, k).conj()).collect();
        let twiddles = (0..m)
            .map(|n| C64::from_polar(1.0, -2.0 * PI * n as f64 / m as f64))
            .collect();
        Modem {
            params,
            dft: Dft::new(m),
            downchirp,
            twiddles,
        }
    }

    pub fn params(&self) -> &LoRaParams {
        &self.params
    }

    pub fn m(&self) -> usize {
        self.params.m()
    }

    pub fn dft(&self) -> &Dft {
        &self.dft
    }

    /// `exp(-2j*pi*n/M)` for any integer `n`.
    #[inline]
    pub fn twiddle(&self, n: usize) -> C64 {
        self.twiddles[n & (self.m() - 1)]
    }

    /// Dechirps one received symbol window of `M` samples.
    pub fn dechirp(&self, window: &[C64]) -> Result<SampleBuffer> {
        if window.len() != self.m() {
            return Err(Error::LengthMismatch {
                expected: self.m(),
                actual: window.len(),
            });
        }
        Ok(SampleBuffer(
            window.iter().zip(&self.downchirp).map(|(x, d)| x * d).collect(),
        ))
    }

    /// Dechirp followed by the forward DFT.
    pub fn demodulate(&self, window: &[C64]) -> Result<(SampleBuffer, SpectrumBuffer)> {
        let dechirped = self.dechirp(window)?;
        let spectrum = self.dft.forward(&dechirped);
        Ok((dechirped, spectrum))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dft::naive_dft;
    use proptest::prelude::*;

    fn p(sf: u32) -> LoRaParams {
        LoRaParams::new(sf).unwrap()
    }

    #[test]
    fn rejects_bad_sf_and_symbols() {
        assert!(LoRaParams::new(1).is_err());
        assert!(LoRaParams::new(17).is_err());
        let params = p(7);
        assert_eq!(params.m(), 128);
        assert!(params.is_standard());
        assert!(!p(3).is_standard());
        assert!(Symbol::new(128, &params).is_err());
        assert_eq!(Symbol::wrapping(-1, &params).value(), 127);
    }

    #[test]
    fn chirp_starts_at_one_and_has_unit_modulus() {
        let params = p(7);
        for a in [0, 1, 64, 127] {
            let x = gen_chirp(&params, Symbol(a));
            assert!((x[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
            assert!(x.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn chirp_matches_direct_formula() {
        let params = p(7);
        let m = 128.0;
        for a in [0usize, 5, 100] {
            let x = gen_chirp(&params, Symbol(a));
            for k in 0..128 {
                let kf = k as f64;
                let direct = C64::from_polar(1.0, 2.0 * PI * kf * (a as f64 / m - 0.5 + kf / (2.0 * m)));
                assert!((x[k] - direct).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn chirps_are_orthogonal_at_sf7() {
        let params = p(7);
        let chirps: Vec<_> = (0..128).map(|a| gen_chirp(&params, Symbol(a))).collect();
        for a in 0..128 {
            for b in 0..128 {
                let ip: C64 = chirps[a].iter().zip(chirps[b].iter()).map(|(x, y)| x * y.conj()).sum();
                let expected = if a == b { 128.0 } else { 0.0 };
                assert!((ip - C64::new(expected, 0.0)).norm() < 1e-9, "a={a} b={b}");
            }
        }
    }

    #[test]
    fn periodicity_of_negative_indices() {
        let params = p(5);
        for a in 0..32 {
            for n in 0..32i64 {
                let lhs = chirp_sample(&params, a, 32 - n);
                let rhs = chirp_sample(&params, a, -n);
                assert!((lhs - rhs).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn instantaneous_frequency_values() {
        let params = p(3);
        let f0 = instantaneous_frequency(&params, Symbol(0), false);
        assert!((f0[0] + 0.4375).abs() < 1e-15);
        let f7 = instantaneous_frequency(&params, Symbol(7), false);
        assert!((f7[0] - 0.4375).abs() < 1e-15);
        for a in 0..8 {
            for f in instantaneous_frequency(&params, Symbol(a), true) {
                assert!((-0.5..0.5).contains(&f));
            }
        }
        // Unwrapped frequency crosses 1/2 for a=7, k=1; the wrapped one doesn't.
        let w = instantaneous_frequency(&params, Symbol(7), true);
        assert!((w[1] - (f7[1] - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn dechirp_produces_tone() {
        let params = p(7);
        let a = 37;
        let d = dechirp(&params, &gen_chirp(&params, Symbol(a)));
        for (k, z) in d.iter().enumerate() {
            let tone = C64::from_polar(1.0, 2.0 * PI * (k * a) as f64 / 128.0);
            assert!((z - tone).norm() < 1e-12);
        }
        let ones = dechirp(&params, &gen_chirp(&params, Symbol(0)));
        assert!(ones.iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn dechirped_chirp_has_single_bin() {
        let params = p(7);
        let modem = Modem::new(params);
        for a in [0usize, 1, 64, 127] {
            let x = gen_chirp(&params, Symbol(a));
            let (_, spec) = modem.demodulate(&x).unwrap();
            for (n, z) in spec.iter().enumerate() {
                let expected = if n == a { 128.0 } else { 0.0 };
                assert!((z - C64::new(expected, 0.0)).norm() < 1e-9 * 128.0);
            }
        }
    }

    #[test]
    fn legacy_detectors() {
        let params = p(7);
        let modem = Modem::new(params);
        let (_, spec) = modem.demodulate(&gen_chirp(&params, Symbol(64))).unwrap();
        assert_eq!(detect_legacy(&spec, LegacyMode::Coherent).value(), 64);
        assert_eq!(detect_legacy(&spec, LegacyMode::NonCoherent).value(), 64);

        let mut tie = vec![C64::new(0.0, 0.0); 8];
        tie[0] = C64::new(3.0, 0.0);
        tie[1] = C64::new(3.0, 0.0);
        tie[2] = C64::new(1.0, 0.0);
        let tie = SpectrumBuffer::new(&p(3), tie).unwrap();
        assert_eq!(detect_legacy(&tie, LegacyMode::Coherent).value(), 0);
        assert_eq!(detect_legacy(&tie, LegacyMode::NonCoherent).value(), 0);

        // Phase-rotated peak: magnitude still finds it, real part does not.
        let mut rot = vec![C64::new(0.1, 0.0); 8];
        rot[5] = C64::new(-4.0, 0.0);
        let rot = SpectrumBuffer::new(&p(3), rot).unwrap();
        assert_eq!(detect_legacy(&rot, LegacyMode::NonCoherent).value(), 5);
        assert_eq!(detect_legacy(&rot, LegacyMode::Coherent).value(), 0);
    }

    #[test]
    fn snr_conversions() {
        let p7 = p(7);
        assert!(ebn0_from_snr_db(&p7, -12.62).abs() < 0.01);
        let p12 = p(12);
        let x = 3.5;
        let expected = x - 10.0 * (4096.0f64 / 12.0).log10();
        assert!((snr_from_ebn0_db(&p12, x) - expected).abs() < 1e-12);
        for v in [-20.0, -3.3, 0.0, 7.25] {
            assert!((ebn0_from_snr_db(&p7, snr_from_ebn0_db(&p7, v)) - v).abs() < 1e-12);
        }
        assert_eq!(noise_variance(0.0), 1.0);
        assert!((noise_variance(10.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn buffer_length_is_checked() {
        let params = p(4);
        assert!(SampleBuffer::new(&params, vec![C64::new(0.0, 0.0); 15]).is_err());
        assert!(SpectrumBuffer::new(&params, vec![C64::new(0.0, 0.0); 16]).is_ok());
        let modem = Modem::new(params);
        assert!(modem.dechirp(&[C64::new(0.0, 0.0); 3]).is_err());
    }

    #[test]
    fn modem_tables_match_naive_transform() {
        let params = p(5);
        let modem = Modem::new(params);
        let x = gen_chirp(&params, Symbol(9));
        let (d, spec) = modem.demodulate(&x).unwrap();
        assert_eq!(d, dechirp(&params, &x));
        let naive = naive_dft(&d);
        for (a, b) in spec.iter().zip(&naive) {
            assert!((a - b).norm() < 1e-9);
        }
        assert!((modem.twiddle(5) - C64::from_polar(1.0, -2.0 * PI * 5.0 / 32.0)).norm() < 1e-15);
        assert_eq!(modem.twiddle(37), modem.twiddle(5));
    }

    proptest! {
        #[test]
        fn dechirp_preserves_norm(vals in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 32)) {
            let params = p(5);
            let r = SampleBuffer::new(&params, vals.iter().map(|&(re, im)| C64::new(re, im)).collect()).unwrap();
            let d = dechirp(&params, &r);
            prop_assert!((d.energy() - r.energy()).abs() < 1e-9 * (1.0 + r.energy()));
        }

        #[test]
        fn legacy_detectors_are_shift_equivariant(
            vals in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 32),
            shift in 0usize..32,
        ) {
            let params = p(5);
            let modem = Modem::new(params);
            let base: Vec<C64> = vals.iter().map(|&(re, im)| C64::new(re, im)).collect();
            let rotated: Vec<C64> = base
                .iter()
                .enumerate()
                .map(|(k, z)| z * modem.twiddle(k * shift).conj())
                .collect();
            let s0 = modem.dft().forward(&SampleBuffer::new(&params, base).unwrap());
            let s1 = modem.dft().forward(&SampleBuffer::new(&params, rotated).unwrap());
            for mode in [LegacyMode::Coherent, LegacyMode::NonCoherent] {
                let d0 = detect_legacy(&s0, mode).value();
                let d1 = detect_legacy(&s1, mode).value();
                prop_assert_eq!(d1, (d0 + shift) % 32);
            }
        }
    }
}
