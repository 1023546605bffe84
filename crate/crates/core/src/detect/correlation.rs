use crate::channel::DechirpedGains;
use crate::waveform::{LoRaParams, Symbol};
use crate::C64;

/// Lag-indexed table `Gamma[l]` for `l` in `-max_lag..=max_lag`, zero outside.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    max_lag: usize,
    values: Vec<C64>,
}

impl CorrelationTable {
    pub fn zeros(max_lag: usize) -> Self {
        CorrelationTable {
            max_lag,
            values: vec![C64::new(0.0, 0.0); 2 * max_lag + 1],
        }
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    pub fn get(&self, lag: i64) -> C64 {
        if lag.unsigned_abs() as usize > self.max_lag {
            return C64::new(0.0, 0.0);
        }
        self.values[(lag + self.max_lag as i64) as usize]
    }

    fn add(&mut self, lag: i64, v: C64) {
        self.values[(lag + self.max_lag as i64) as usize] += v;
    }

    /// `(lag, value)` pairs from `-max_lag` upwards.
    pub fn iter(&self) -> impl Iterator<Item = (i64, C64)> + '_ {
        let off = self.max_lag as i64;
        self.values.iter().enumerate().map(move |(i, &v)| (i as i64 - off, v))
    }

    /// Lags whose value is not exactly zero.
    pub fn support(&self) -> Vec<i64> {
        self.iter()
            .filter(|(_, v)| v.norm_sqr() != 0.0)
            .map(|(l, _)| l)
            .collect()
    }
}

/// `Gamma_{a,b}[l] = sum_{k_i - k_j = l} alpha~_a(i) conj(alpha~_b(j))`, the
/// correlation of the gains rotated for symbols `a` and `b`.
///
/// `Gamma_{a,a}[0]` is the channel energy; the noise-free detector output at
/// hypothesis `b` is `M * Gamma_{a,b}[a - b]` when no ISI is present.
pub fn auto_cross_correlation(params: &LoRaParams, g: &DechirpedGains, a: Symbol, b: Symbol) -> CorrelationTable {
    let ga = g.rotate(a, params);
    let gb = g.rotate(b, params);
    let mut table = CorrelationTable::zeros(g.max_delay());
    for &(ki, ai) in ga.taps() {
        for &(kj, bj) in gb.taps() {
            table.add(ki as i64 - kj as i64, ai * bj.conj());
        }
    }
    table
}
