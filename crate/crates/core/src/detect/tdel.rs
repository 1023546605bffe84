use crate::dft::Dft;
use crate::waveform::{argmax, SpectrumBuffer, Symbol};
use crate::C64;

/// Default pilot threshold of the TDEL baseline.
pub const DEFAULT_RHO_TDEL: f64 = 0.2;

/// Thresholded pilot magnitude profile of one frame, kept in the frequency
/// domain so that every data symbol costs two FFTs.
///
/// The baseline cyclically correlates `|<R_0>[n]|` (bins below
/// `rho * max` zeroed) with the data magnitudes `|R_a[n]|` and returns the best
/// shift. Only magnitudes are used, so channel phases never matter.
#[derive(Clone)]
pub struct TdelReference {
    dft: Dft,
    profile: Vec<f64>,
    conj_spectrum: Vec<C64>,
}

impl std::fmt::Debug for TdelReference {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TdelReference").field("profile", &self.profile).finish()
    }
}

impl TdelReference {
    pub fn new(dft: &Dft, avg_pilot: &SpectrumBuffer, rho_tdel: f64) -> Self {
        let profile = threshold_profile(avg_pilot, rho_tdel);
        let mut conj_spectrum: Vec<C64> = profile.iter().map(|&p| C64::new(p, 0.0)).collect();
        dft.forward_in_place(&mut conj_spectrum);
        for z in &mut conj_spectrum {
            *z = z.conj();
        }
        TdelReference {
            dft: dft.clone(),
            profile,
            conj_spectrum,
        }
    }

    /// Thresholded pilot magnitudes `p[n]`.
    pub fn profile(&self) -> &[f64] {
        &self.profile
    }

    /// `Gamma[d] = sum_n p[n] * |R[(n + d) mod M]|` for every shift `d`.
    pub fn correlation(&self, data: &SpectrumBuffer) -> Vec<f64> {
        let mut q: Vec<C64> = data.iter().map(|z| C64::new(z.norm(), 0.0)).collect();
        self.dft.forward_in_place(&mut q);
        for (z, p) in q.iter_mut().zip(&self.conj_spectrum) {
            *z *= p;
        }
        self.dft.inverse_in_place(&mut q);
        q.into_iter().map(|z| z.re).collect()
    }

    pub fn detect(&self, data: &SpectrumBuffer) -> Symbol {
        Symbol(argmax(self.correlation(data).into_iter().enumerate()))
    }
}

/// Pilot magnitudes with bins strictly below `rho * max` set to zero. If that
/// would clear everything (only possible for `rho > 1`), the strongest bin is
/// kept alone.
fn threshold_profile(avg_pilot: &SpectrumBuffer, rho: f64) -> Vec<f64> {
    let mags: Vec<f64> = avg_pilot.iter().map(|z| z.norm()).collect();
    let max = mags.iter().copied().fold(0.0, f64::max);
    let lambda = rho * max;
    let mut out: Vec<f64> = mags.iter().map(|&v| if v < lambda { 0.0 } else { v }).collect();
    if out.iter().all(|&v| v == 0.0) && max > 0.0 {
        let best = argmax(mags.iter().copied().enumerate());
        out[best] = mags[best];
    }
    out
}

/// One-shot TDEL decision. Plans transforms on every call; loops should keep a
/// [`TdelReference`].
pub fn tdel_detect(avg_pilot: &SpectrumBuffer, data: &SpectrumBuffer, rho_tdel: f64) -> Symbol {
    TdelReference::new(&Dft::new(avg_pilot.len()), avg_pilot, rho_tdel).detect(data)
}
