//! Equivalent-system simulation of the RAKE detector.
//!
//! Without ISI the RAKE statistic for transmitted `a` and hypothesis `b` is
//! `Z_{a,b}[b] = M * Gamma_{a,b}[a - b] + W~_b[b]`. The first term depends only
//! on the channel and is stored once in an `M x M` matrix. The noise term is
//! `W~_b[b] = sum_i conj(alpha~_b(i)) W[b - k_i]` with `W` the DFT of white
//! noise, i.i.d. `CN(0, M sigma^2)` across bins. Drawing `W` and combining `K`
//! bins per hypothesis samples the correlated noise exactly, with covariance
//! `M sigma^2 conj(Gamma_{b,b'}[b - b'])` between hypotheses `b` and `b'`.
//!
//! A dense Cholesky factor of that covariance is also provided to check the
//! sparse construction.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{complex_gaussian, DechirpedGains};
use crate::detect::{auto_cross_correlation, CandidateSet};
use crate::waveform::{argmax, LoRaParams, Symbol};
use crate::{Error, Result, C64};

/// Precomputed noise-free statistics and per-hypothesis gains of a channel.
#[derive(Debug, Clone)]
pub struct FastSimModel {
    params: LoRaParams,
    gains: DechirpedGains,
    /// Row-major `z[a * M + b]`.
    z: Vec<C64>,
    /// Row-major `alpha~_b(i)` at `[b * K + i]`.
    rotated: Vec<C64>,
}

impl FastSimModel {
    pub fn params(&self) -> &LoRaParams {
        &self.params
    }

    pub fn gains(&self) -> &DechirpedGains {
        &self.gains
    }

    /// Noise-free `Z_{a,b}[b]`.
    pub fn z(&self, a: Symbol, b: Symbol) -> C64 {
        self.z[a.value() * self.params.m() + b.value()]
    }

    /// Row `a` of the statistic matrix.
    pub fn z_row(&self, a: Symbol) -> &[C64] {
        let m = self.params.m();
        &self.z[a.value() * m..(a.value() + 1) * m]
    }

    fn rotated(&self, b: usize) -> &[C64] {
        let k = self.gains.len();
        &self.rotated[b * k..(b + 1) * k]
    }

    /// DFT-domain noise term of hypothesis `b` given the noise spectrum `w`.
    pub fn noise_at(&self, w: &[C64], b: Symbol) -> C64 {
        let mask = self.params.m() - 1;
        let b = b.value();
        self.gains
            .delays()
            .zip(self.rotated(b))
            .map(|(k, g)| g.conj() * w[b.wrapping_sub(k) & mask])
            .sum()
    }

    /// Noisy `Z_{a,b}[b]` for every candidate.
    pub fn statistics(&self, a: Symbol, w: &[C64], cand: &[Symbol]) -> Vec<C64> {
        cand.iter().map(|&b| self.z(a, b) + self.noise_at(w, b)).collect()
    }

    /// RAKE decision, lowest symbol on ties.
    pub fn decide(&self, a: Symbol, w: &[C64], cand: &[Symbol]) -> Symbol {
        Symbol(argmax(
            cand.iter()
                .map(|&b| (b.value(), (self.z(a, b) + self.noise_at(w, b)).re)),
        ))
    }

    /// Noise-free dechirped spectrum of symbol `a`: `M alpha~_a(i)` at bins
    /// `a - k_i`. Adding `w` gives the spectrum seen by the detectors.
    pub fn clean_spectrum(&self, a: Symbol) -> Vec<C64> {
        let m = self.params.m();
        let mut out = vec![C64::new(0.0, 0.0); m];
        for (k, g) in self.gains.delays().zip(self.rotated(a.value())) {
            out[(a.value() + m - k % m) % m] += g * m as f64;
        }
        out
    }
}

/// Builds the statistic matrix `z[a][b] = M * Gamma_{a,b}[l]` with `l = a - b`
/// as a signed lag in `[-M/2, M/2)`.
///
/// The sum runs over tap pairs with `(k_i - k_j) mod M = (a - b) mod M`, which
/// equals the signed-lag definition whenever the maximum delay is below `M/2`.
pub fn build_fast_sim(g: &DechirpedGains, params: &LoRaParams) -> FastSimModel {
    let m = params.m();
    let kk = g.len();
    let mut rotated = Vec::with_capacity(m * kk);
    for b in 0..m {
        rotated.extend(g.rotate(Symbol(b), params).taps().iter().map(|t| t.1));
    }
    let delays: Vec<usize> = g.delays().collect();
    let mut z = vec![C64::new(0.0, 0.0); m * m];
    for a in 0..m {
        let ra = &rotated[a * kk..(a + 1) * kk];
        for (i, &ki) in delays.iter().enumerate() {
            for (j, &kj) in delays.iter().enumerate() {
                let b = (a + m + kj % m - ki % m) % m;
                let rb = rotated[b * kk + j];
                z[a * m + b] += ra[i] * rb.conj() * m as f64;
            }
        }
    }
    FastSimModel {
        params: *params,
        gains: g.clone(),
        z,
        rotated,
    }
}

/// Draws the noise spectrum `W` (i.i.d. `CN(0, M sigma^2)`) and returns the
/// noise term of every candidate.
pub fn sample_correlated_noise<R: Rng + ?Sized>(
    model: &FastSimModel,
    cand: &CandidateSet,
    sigma2: f64,
    rng: &mut R,
) -> Vec<C64> {
    let w = sample_noise_spectrum(model.params(), sigma2, rng);
    cand.indices().iter().map(|&b| model.noise_at(&w, b)).collect()
}

pub fn sample_noise_spectrum<R: Rng + ?Sized>(params: &LoRaParams, sigma2: f64, rng: &mut R) -> Vec<C64> {
    let var = params.m() as f64 * sigma2;
    (0..params.m()).map(|_| complex_gaussian(rng, var)).collect()
}

/// Covariance `E[W~_b W~_{b'}^*] = M sigma^2 conj(Gamma_{b,b'}[b - b'])` of the
/// candidate noise terms.
pub fn noise_covariance(model: &FastSimModel, cand: &CandidateSet, sigma2: f64) -> Vec<Vec<C64>> {
    let params = model.params();
    let m = params.m() as i64;
    let var = m as f64 * sigma2;
    let idx = cand.indices();
    idx.iter()
        .map(|&b| {
            idx.iter()
                .map(|&bp| {
                    let gamma = auto_cross_correlation(params, model.gains(), b, bp);
                    // Lags are taken modulo M so that wrapped tap pairs count.
                    let lag = (b.value() as i64 - bp.value() as i64).rem_euclid(m);
                    let v = gamma.get(lag)
                        + if lag != 0 {
                            gamma.get(lag - m)
                        } else {
                            C64::new(0.0, 0.0)
                        };
                    v.conj() * var
                })
                .collect()
        })
        .collect()
}

/// Lower-triangular `L` with `L L^H = cov`.
///
/// Checks that `cov` is Hermitian and positive semidefinite. Zero pivots from
/// exact rank deficiency are handled by adding `1e-12` to the diagonal.
pub fn cholesky(cov: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
    let n = cov.len();
    let scale = (0..n).map(|i| cov[i][i].re.abs()).fold(0.0, f64::max).max(1.0);
    let tol = 1e-9 * scale;
    for (i, row) in cov.iter().enumerate() {
        if row.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: row.len(),
            });
        }
        for (j, &v) in row.iter().enumerate().take(i + 1) {
            if (v - cov[j][i].conj()).norm() > tol {
                return Err(Error::NotPositiveSemidefinite(format!("not Hermitian at ({i}, {j})")));
            }
        }
    }
    match factor(cov, 0.0, tol) {
        Ok(l) => Ok(l),
        Err(Pivot::Zero) => factor(cov, 1e-12 * scale, tol)
            .map_err(|_| Error::NotPositiveSemidefinite("singular after regularization".into())),
        Err(Pivot::Negative(i, v)) => Err(Error::NotPositiveSemidefinite(format!("pivot {i} is {v}"))),
    }
}

enum Pivot {
    Zero,
    Negative(usize, f64),
}

fn factor(cov: &[Vec<C64>], reg: f64, tol: f64) -> std::result::Result<Vec<Vec<C64>>, Pivot> {
    let n = cov.len();
    let mut l = vec![vec![C64::new(0.0, 0.0); n]; n];
    for j in 0..n {
        let d = cov[j][j].re + reg - (0..j).map(|k| l[j][k].norm_sqr()).sum::<f64>();
        if d < -tol {
            return Err(Pivot::Negative(j, d));
        }
        if d <= 0.0 {
            return Err(Pivot::Zero);
        }
        let djj = d.sqrt();
        l[j][j] = C64::new(djj, 0.0);
        for i in j + 1..n {
            let s: C64 = (0..j).map(|k| l[i][k] * l[j][k].conj()).sum();
            l[i][j] = (cov[i][j] - s) / djj;
        }
    }
    Ok(l)
}

/// `L u` with `u` i.i.d. `CN(0, 1)`.
pub fn sample_dense<R: Rng + ?Sized>(l: &[Vec<C64>], rng: &mut R) -> Vec<C64> {
    let u: Vec<C64> = (0..l.len()).map(|_| complex_gaussian(rng, 1.0)).collect();
    l.iter()
        .map(|row| row.iter().zip(&u).map(|(a, b)| a * b).sum())
        .collect()
}

/// Symbol errors of a fast full-RAKE run at one noise level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FastSerCount {
    pub errors: u64,
    pub symbols: u64,
}

/// Full-RAKE SER with perfect CSIR for each `sigma2`, `n_symbols` random
/// symbols per point. Symbol block `t` uses ChaCha stream `t` of `seed`, and
/// the same unit noise is reused (scaled) at every noise level.
pub fn fast_rake_ser(model: &FastSimModel, sigma2s: &[f64], n_symbols: u64, seed: u64) -> Vec<FastSerCount> {
    const BLOCK: u64 = 1000;
    let params = *model.params();
    let m = params.m();
    let full: Vec<Symbol> = (0..m).map(Symbol).collect();
    let blocks = n_symbols.div_ceil(BLOCK);
    let errors: Vec<Vec<u64>> = (0..blocks)
        .into_par_iter()
        .map(|blk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(blk);
            let count = BLOCK.min(n_symbols - blk * BLOCK);
            let mut errs = vec![0u64; sigma2s.len()];
            let mut w = vec![C64::new(0.0, 0.0); m];
            for _ in 0..count {
                let a = Symbol(rng.random_range(0..m));
                let unit = sample_noise_spectrum(&params, 1.0, &mut rng);
                for (e, &s2) in errs.iter_mut().zip(sigma2s) {
                    let s = s2.sqrt();
                    for (wi, ui) in w.iter_mut().zip(&unit) {
                        *wi = ui * s;
                    }
                    if model.decide(a, &w, &full) != a {
                        *e += 1;
                    }
                }
            }
            errs
        })
        .collect();
    (0..sigma2s.len())
        .map(|i| FastSerCount {
            errors: errors.iter().map(|e| e[i]).sum(),
            symbols: n_symbols,
        })
        .collect()
}
