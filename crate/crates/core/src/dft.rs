use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::waveform::{SampleBuffer, SpectrumBuffer};
use crate::C64;

/// Planned forward and inverse `M`-point transforms.
///
/// The forward transform is unnormalized (`X[n] = sum_k x[k] exp(-2j*pi*n*k/M)`),
/// the inverse carries the `1/M` factor so that `inverse(forward(x)) == x`.
#[derive(Clone)]
pub struct Dft {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Dft {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Dft {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn forward(&self, buf: &SampleBuffer) -> SpectrumBuffer {
        let mut out = buf.to_vec();
        self.forward_in_place(&mut out);
        SpectrumBuffer::from_vec(out)
    }

    pub fn inverse(&self, spec: &SpectrumBuffer) -> SampleBuffer {
        let mut out = spec.to_vec();
        self.inverse_in_place(&mut out);
        SampleBuffer::from_vec(out)
    }

    pub fn forward_in_place(&self, data: &mut [C64]) {
        assert_eq!(data.len(), self.len);
        self.forward.process(data);
    }

    pub fn inverse_in_place(&self, data: &mut [C64]) {
        assert_eq!(data.len(), self.len);
        self.inverse.process(data);
        let scale = 1.0 / self.len as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }
}

/// One-shot forward DFT. Plans a transform on every call; hot loops should
/// keep a [`Dft`] (or a [`crate::Modem`]) instead.
pub fn dft(buf: &SampleBuffer) -> SpectrumBuffer {
    Dft::new(buf.len()).forward(buf)
}

/// One-shot inverse DFT, see [`dft`].
pub fn idft(spec: &SpectrumBuffer) -> SampleBuffer {
    Dft::new(spec.len()).inverse(spec)
}

/// Direct O(M^2) evaluation, used as the test oracle.
#[cfg(test)]
pub(crate) fn naive_dft(x: &[C64]) -> Vec<C64> {
    let m = x.len();
    (0..m)
        .map(|n| {
            x.iter()
                .enumerate()
                .map(|(k, v)| {
                    let ang = -2.0 * std::f64::consts::PI * ((n * k) % m) as f64 / m as f64;
                    v * C64::from_polar(1.0, ang)
                })
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::LoRaParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn forward_matches_naive_and_round_trips() {
        let params = LoRaParams::new(7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<C64> = (0..128)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let buf = SampleBuffer::new(&params, x.clone()).unwrap();
        let spec = dft(&buf);
        let naive = naive_dft(&x);
        for (a, b) in spec.iter().zip(&naive) {
            assert!((a - b).norm() < 1e-10);
        }
        let back = idft(&spec);
        let err = back.iter().zip(&x).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn all_ones_concentrates_in_bin_zero() {
        let params = LoRaParams::new(6).unwrap();
        let ones = SampleBuffer::new(&params, vec![C64::new(1.0, 0.0); 64]).unwrap();
        let spec = dft(&ones);
        assert!((spec[0] - C64::new(64.0, 0.0)).norm() < 1e-12);
        assert!(spec[1..].iter().all(|z| z.norm() < 1e-12));
    }
}
