use super::correlation::auto_cross_correlation;
use crate::channel::DechirpedGains;
use crate::waveform::{LoRaParams, Symbol};

/// Which detector a [`delta_indicator`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndicatorVariant {
    Coherent,
    NonCoherent,
    IdealMf,
    Mf,
}

/// Nonzero pairwise delay differences `k_i - k_j`, ascending.
pub fn parasitic_lags(g: &DechirpedGains) -> Vec<i64> {
    let mut lags: Vec<i64> = g
        .delays()
        .flat_map(|ki| g.delays().map(move |kj| ki as i64 - kj as i64))
        .filter(|&l| l != 0)
        .collect();
    lags.sort_unstable();
    lags.dedup();
    lags
}

/// Ratio of the largest parasitic peak to the peak of interest when symbol
/// `a` is sent. Larger values mean a detector is more easily fooled.
///
/// The first tap of `g` is the reference path. A single-path channel has no
/// parasitic peaks and gives 0.
pub fn delta_indicator(g: &DechirpedGains, a: Symbol, variant: IndicatorVariant, params: &LoRaParams) -> f64 {
    match variant {
        IndicatorVariant::Coherent | IndicatorVariant::NonCoherent => {
            let rotated = g.rotate(a, params);
            let taps = rotated.taps();
            let ref_gain = taps[0].1;
            let coherent = variant == IndicatorVariant::Coherent;
            max_or_zero(taps[1..].iter().map(|&(_, v)| {
                if coherent {
                    (v * ref_gain.conj()).re / ref_gain.norm_sqr()
                } else {
                    v.norm() / ref_gain.norm()
                }
            }))
        }
        IndicatorVariant::IdealMf => {
            let gamma = auto_cross_correlation(params, g, a, a);
            let peak = gamma.get(0).re;
            max_or_zero(parasitic_lags(g).into_iter().map(|l| gamma.get(l).re / peak))
        }
        IndicatorVariant::Mf => {
            let peak = auto_cross_correlation(params, g, a, a).get(0).re;
            max_or_zero(parasitic_lags(g).into_iter().map(|l| {
                let b = Symbol::wrapping(a.value() as i64 - l, params);
                auto_cross_correlation(params, g, a, b).get(l).re / peak
            }))
        }
    }
}

fn max_or_zero(values: impl Iterator<Item = f64>) -> f64 {
    values.reduce(f64::max).unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{dechirped_gain, MultipathChannel};

    fn c1() -> (LoRaParams, DechirpedGains) {
        let params = LoRaParams::new(7).unwrap();
        (params, dechirped_gain(&params, &MultipathChannel::c1()))
    }

    fn column(params: &LoRaParams, g: &DechirpedGains, v: IndicatorVariant) -> Vec<f64> {
        (0..params.m())
            .map(|a| delta_indicator(g, Symbol(a), v, params))
            .collect()
    }

    fn max(v: &[f64]) -> f64 {
        v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn lags_of_c1() {
        let (_, g) = c1();
        assert_eq!(parasitic_lags(&g), vec![-3, -2, -1, 1, 2, 3]);
    }

    #[test]
    fn non_coherent_constant_on_c1() {
        let (params, g) = c1();
        for v in column(&params, &g, IndicatorVariant::NonCoherent) {
            assert!((v - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn coherent_to_ideal_mf_ratio_is_energy() {
        let (params, g) = c1();
        let coh = max(&column(&params, &g, IndicatorVariant::Coherent));
        let ideal = max(&column(&params, &g, IndicatorVariant::IdealMf));
        assert!((coh - 0.8).abs() < 1e-12);
        assert!((coh / ideal - 1.89).abs() < 1e-9);
    }

    #[test]
    fn mf_is_ideal_mf_up_to_peak_shifts() {
        // Each lag of C1 comes from a single tap pair, so MF sees the same peak
        // values as the ideal MF, shifted in a by the delay of that pair.
        let (params, g) = c1();
        let values = |v| {
            let mut out: Vec<f64> = (0..128)
                .flat_map(|a| {
                    let a = Symbol(a);
                    parasitic_lags(&g).into_iter().map(move |l| (a, l))
                })
                .map(|(a, l)| {
                    let peak = auto_cross_correlation(&params, &g, a, a).get(0).re;
                    let b = match v {
                        IndicatorVariant::Mf => Symbol::wrapping(a.value() as i64 - l, &params),
                        _ => a,
                    };
                    auto_cross_correlation(&params, &g, a, b).get(l).re / peak
                })
                .collect();
            out.sort_by(f64::total_cmp);
            out
        };
        let mf = values(IndicatorVariant::Mf);
        let ideal = values(IndicatorVariant::IdealMf);
        assert_eq!(mf.len(), ideal.len());
        for (x, y) in mf.iter().zip(&ideal) {
            assert!((x - y).abs() < 1e-9);
        }
        let mf_max = max(&column(&params, &g, IndicatorVariant::Mf));
        let ideal_max = max(&column(&params, &g, IndicatorVariant::IdealMf));
        assert!((mf_max - ideal_max).abs() < 1e-9, "{mf_max} vs {ideal_max}");
    }

    #[test]
    fn identity_channel_is_zero() {
        let params = LoRaParams::new(7).unwrap();
        let g = dechirped_gain(&params, &MultipathChannel::identity());
        for v in [
            IndicatorVariant::Coherent,
            IndicatorVariant::NonCoherent,
            IndicatorVariant::IdealMf,
            IndicatorVariant::Mf,
        ] {
            assert!(column(&params, &g, v).iter().all(|&x| x == 0.0));
        }
    }
}
