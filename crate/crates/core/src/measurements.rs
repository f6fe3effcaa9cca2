//! Seeded measurement ensembles, harmonic test signals and the overcomplete
//! Vandermonde dictionary.
//!
//! Signal indices run `n = 1..N` (so `v(ω) = [e^{jω}, …, e^{jNω}]ᵀ`); DFT
//! rows use the 0-based convention `F[m, n] = e^{−j2πmn/N}` without
//! normalization.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::{self, Stream};
use crate::scalar::{Cplx, Real};
use crate::signal::{ComplexSignal, EnsembleKind, MeasurementEnsemble};

/// Entries with i.i.d. standard-normal real and imaginary parts.
pub fn gaussian_ensemble<T: Real>(n: usize, m: usize, seed: u64) -> Result<MeasurementEnsemble<T>> {
    if n == 0 || m == 0 {
        return Err(Error::invalid("gaussian ensemble needs N >= 1 and M >= 1"));
    }
    let mut r = rng::stream(seed, Stream::Ensemble);
    let data = (0..n * m)
        .map(|_| {
            let re = rng::normal::<T, _>(&mut r);
            let im = rng::normal::<T, _>(&mut r);
            Cplx::new(re, im)
        })
        .collect();
    MeasurementEnsemble::new(n, m, data, EnsembleKind::Gaussian, seed)
}

/// Draws `K` diagonal masks of length `N` with entries `b₁b₂`,
/// `b₁ ∈ {1, −1, −j, j}` uniformly and `b₂ = √2/2` (p = 0.8) or `√3` (p = 0.2).
pub fn draw_masks<T: Real>(n: usize, k: usize, seed: u64) -> Vec<Vec<Cplx<T>>> {
    let mut r = rng::stream(seed, Stream::Ensemble);
    let low = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    let high = T::lit(3f64.sqrt());
    (0..k)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let b1 = match r.gen_range(0..4u8) {
                        0 => Cplx::new(T::one(), T::zero()),
                        1 => Cplx::new(-T::one(), T::zero()),
                        2 => Cplx::new(T::zero(), -T::one()),
                        _ => Cplx::new(T::zero(), T::one()),
                    };
                    let b2 = if r.gen::<f64>() < 0.8 { low } else { high };
                    b1 * b2
                })
                .collect()
        })
        .collect()
}

/// Masked Fourier ensemble `Aᴴ = [F D₁; …; F D_K]` with `M = K·N`.
pub fn masked_fourier_ensemble<T: Real>(n: usize, k: usize, seed: u64) -> Result<MeasurementEnsemble<T>> {
    if n == 0 || k == 0 {
        return Err(Error::invalid("masked Fourier ensemble needs N >= 1 and K >= 1"));
    }
    masked_fourier_from_masks(n, &draw_masks(n, k, seed), seed)
}

/// Masked Fourier ensemble from explicit masks (one length-N diagonal per block).
pub fn masked_fourier_from_masks<T: Real>(
    n: usize,
    masks: &[Vec<Cplx<T>>],
    seed: u64,
) -> Result<MeasurementEnsemble<T>> {
    if n == 0 || masks.is_empty() {
        return Err(Error::invalid("masked Fourier ensemble needs N >= 1 and K >= 1"));
    }
    let two_pi_over_n = T::lit(2.0 * std::f64::consts::PI / n as f64);
    let mut data = Vec::with_capacity(n * n * masks.len());
    for mask in masks {
        check_dim("mask length", n, mask.len())?;
        for row in 0..n {
            // a_r = conj(F[row, :] ⊙ d)
            for (col, d) in mask.iter().enumerate() {
                let angle = -two_pi_over_n * T::from_usize_lossy((row * col) % n);
                let f = Cplx::from_polar(T::one(), angle);
                data.push((f * d).conj());
            }
        }
    }
    MeasurementEnsemble::new(n, n * masks.len(), data, EnsembleKind::MaskedFourier, seed)
}

/// Sum of `L` complex exponentials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HarmonicModel<T: Real> {
    pub frequencies: Vec<T>,
    pub amplitudes: Vec<Cplx<T>>,
    pub n: usize,
}

impl<T: Real> HarmonicModel<T> {
    pub fn new(frequencies: Vec<T>, amplitudes: Vec<Cplx<T>>, n: usize) -> Result<Self> {
        let model = HarmonicModel { frequencies, amplitudes, n };
        model.validate()?;
        Ok(model)
    }

    /// Unit-amplitude harmonics at the given frequencies.
    pub fn unit(frequencies: Vec<T>, n: usize) -> Result<Self> {
        let l = frequencies.len();
        Self::new(frequencies, vec![Cplx::new(T::one(), T::zero()); l], n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequencies.is_empty() {
            return Err(Error::invalid("harmonic model needs L >= 1"));
        }
        if self.n == 0 {
            return Err(Error::invalid("harmonic model needs N >= 1"));
        }
        check_dim("harmonic amplitudes", self.frequencies.len(), self.amplitudes.len())?;
        for &w in &self.frequencies {
            if !(w > -T::PI() && w <= T::PI()) {
                return Err(Error::invalid("frequencies must lie in (-pi, pi]"));
            }
        }
        for (i, a) in self.frequencies.iter().enumerate() {
            if self.frequencies[i + 1..].iter().any(|b| b == a) {
                return Err(Error::invalid("frequencies must be pairwise distinct"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }
}

/// `v(ω) = [e^{jω}, …, e^{jNω}]ᵀ`.
pub fn vandermonde<T: Real>(omega: T, n: usize) -> Vec<Cplx<T>> {
    (1..=n).map(|k| Cplx::from_polar(T::one(), omega * T::from_usize_lossy(k))).collect()
}

/// `x = Σ γ_ℓ v(ω_ℓ)`.
pub fn harmonic_signal<T: Real>(model: &HarmonicModel<T>) -> Result<ComplexSignal<T>> {
    model.validate()?;
    let mut x = vec![Cplx::new(T::zero(), T::zero()); model.n];
    for (&w, &g) in model.frequencies.iter().zip(&model.amplitudes) {
        for (xk, vk) in x.iter_mut().zip(vandermonde(w, model.n)) {
            *xk += g * vk;
        }
    }
    ComplexSignal::new(x)
}

/// Overcomplete Vandermonde dictionary on a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Dictionary<T: Real> {
    pub grid: Vec<T>,
    n: usize,
    /// Column-major N × P.
    matrix: Vec<Cplx<T>>,
}

impl<T: Real> Dictionary<T> {
    /// Dictionary on an arbitrary grid. Unlike [`build_dictionary`] this does
    /// not require `P > N`.
    pub fn from_grid(n: usize, grid: Vec<T>) -> Result<Self> {
        if n == 0 || grid.is_empty() {
            return Err(Error::invalid("dictionary needs N >= 1 and P >= 1"));
        }
        let matrix = grid.iter().flat_map(|&w| vandermonde(w, n)).collect();
        Ok(Dictionary { grid, n, matrix })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.grid.len()
    }

    pub fn column(&self, p: usize) -> &[Cplx<T>] {
        &self.matrix[p * self.n..(p + 1) * self.n]
    }

    /// Synthesizes `Ṽx̃`.
    pub fn synthesize(&self, coeffs: &[Cplx<T>]) -> Result<ComplexSignal<T>> {
        check_dim("dictionary coefficients", self.p(), coeffs.len())?;
        let mut x = vec![Cplx::new(T::zero(), T::zero()); self.n];
        for (p, c) in coeffs.iter().enumerate() {
            for (xk, vk) in x.iter_mut().zip(self.column(p)) {
                *xk += vk * c;
            }
        }
        ComplexSignal::new(x)
    }
}

/// `P` uniformly spaced grid points on `[lo, hi]` (inclusive) with `P > N`.
pub fn build_dictionary<T: Real>(n: usize, p: usize, band: (T, T)) -> Result<Dictionary<T>> {
    let (lo, hi) = band;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid("dictionary band must satisfy lo < hi"));
    }
    if p <= n {
        return Err(Error::invalid(format!("dictionary must be overcomplete (P={p}, N={n})")));
    }
    let step = (hi - lo) / T::from_usize_lossy(p - 1);
    let grid = (0..p).map(|k| if k == p - 1 { hi } else { lo + step * T::from_usize_lossy(k) }).collect();
    Dictionary::from_grid(n, grid)
}

/// Projects each measurement vector onto the dictionary, `b_i = Ṽᴴa_i`.
///
/// The result is itself an ensemble of dimension `P`, so `|b_iᴴx̃|² = |a_iᴴṼx̃|²`.
pub fn project_dictionary<T: Real>(
    ensemble: &MeasurementEnsemble<T>,
    dict: &Dictionary<T>,
) -> Result<MeasurementEnsemble<T>> {
    check_dim("dictionary N vs ensemble N", ensemble.n(), dict.n())?;
    let p = dict.p();
    let mut data = Vec::with_capacity(p * ensemble.m());
    for a in ensemble.columns() {
        for k in 0..p {
            data.push(crate::scalar::inner(dict.column(k), a));
        }
    }
    MeasurementEnsemble::new(p, ensemble.m(), data, EnsembleKind::Custom, ensemble.seed())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::measure;
    use std::f64::consts::PI;

    #[test]
    fn gaussian_is_deterministic() {
        let a = gaussian_ensemble::<f64>(2, 3, 7).unwrap();
        let b = gaussian_ensemble::<f64>(2, 3, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gaussian_ensemble::<f64>(2, 3, 8).unwrap());
    }

    #[test]
    fn mask_magnitudes_are_exact() {
        let masks = draw_masks::<f64>(8, 50, 3);
        let lo = std::f64::consts::FRAC_1_SQRT_2;
        let hi = 3f64.sqrt();
        for d in masks.iter().flatten() {
            let m = d.norm();
            assert!(m == lo || m == hi || (m - lo).abs() < 1e-16 || (m - hi).abs() < 1e-16);
        }
    }

    #[test]
    fn unit_masks_reduce_to_dft_magnitudes() {
        let n = 5;
        let ones = vec![vec![Cplx::new(1.0, 0.0); n]];
        let e = masked_fourier_from_masks::<f64>(n, &ones, 0).unwrap();
        let x = ComplexSignal::new(vec![
            Cplx::new(1.0, 0.5),
            Cplx::new(-0.3, 2.0),
            Cplx::new(0.0, -1.0),
            Cplx::new(0.7, 0.7),
            Cplx::new(-1.2, 0.1),
        ])
        .unwrap();
        let y = measure(&e, &x).unwrap();
        for (m, ym) in y.iter().enumerate() {
            let dft: Cplx<f64> = x
                .values()
                .iter()
                .enumerate()
                .map(|(k, v)| v * Cplx::from_polar(1.0, -2.0 * PI * (m * k) as f64 / n as f64))
                .sum();
            assert!((dft.norm_sqr() - ym).abs() < 1e-12);
        }
    }

    #[test]
    fn masked_fourier_has_m_equal_kn() {
        let e = masked_fourier_ensemble::<f64>(16, 4, 1).unwrap();
        assert_eq!(e.m(), 64);
        assert_eq!(e.kind(), EnsembleKind::MaskedFourier);
    }

    #[test]
    fn harmonic_examples() {
        let x = harmonic_signal(&HarmonicModel::unit(vec![0.0], 4).unwrap()).unwrap();
        assert!(x.values().iter().all(|v| (v - Cplx::new(1.0, 0.0)).norm() < 1e-15));
        let x = harmonic_signal(&HarmonicModel::unit(vec![0.16 * PI], 16).unwrap()).unwrap();
        for (t, v) in x.values().iter().enumerate() {
            let expect = Cplx::from_polar(1.0, 0.16 * PI * (t + 1) as f64);
            assert!((v - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn harmonic_model_validation() {
        assert!(HarmonicModel::<f64>::unit(vec![], 4).is_err());
        assert!(HarmonicModel::unit(vec![0.1, 0.1], 4).is_err());
        assert!(HarmonicModel::unit(vec![4.0], 4).is_err());
        assert!(HarmonicModel::unit(vec![PI], 4).is_ok());
    }

    #[test]
    fn dictionary_examples() {
        let d = build_dictionary::<f64>(8, 51, (-PI / 2.0, PI / 2.0)).unwrap();
        assert_eq!(d.grid[0], -PI / 2.0);
        assert_eq!(d.grid[50], PI / 2.0);
        assert!((d.grid[1] - d.grid[0] - PI / 50.0).abs() < 1e-15);
        for p in 0..d.p() {
            let nrm: f64 = d.column(p).iter().map(|v| v.norm_sqr()).sum();
            assert!((nrm - 8.0).abs() < 1e-12);
        }
        let d = build_dictionary::<f64>(4, 9, (0.0, PI)).unwrap();
        let col = d.column(4);
        let expect = [Cplx::new(0.0, 1.0), Cplx::new(-1.0, 0.0), Cplx::new(0.0, -1.0), Cplx::new(1.0, 0.0)];
        for (a, b) in col.iter().zip(expect) {
            assert!((a - b).norm() < 1e-14);
        }
        assert!(build_dictionary::<f64>(8, 8, (0.0, 1.0)).is_err());
        assert!(build_dictionary::<f64>(8, 20, (1.0, 1.0)).is_err());
    }

    #[test]
    fn projection_of_zero_ensemble_is_zero() {
        let e = MeasurementEnsemble::<f64>::new(4, 3, vec![Cplx::new(0.0, 0.0); 12], EnsembleKind::Custom, 0).unwrap();
        let d = build_dictionary(4, 9, (-1.0, 1.0)).unwrap();
        let b = project_dictionary(&e, &d).unwrap();
        assert_eq!((b.n(), b.m()), (9, 3));
        assert!(b.data().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn square_dictionary_projection_is_vandermonde_adjoint() {
        let e = gaussian_ensemble::<f64>(3, 4, 2).unwrap();
        let d = Dictionary::from_grid(3, vec![-0.5, 0.1, 0.9]).unwrap();
        let b = project_dictionary(&e, &d).unwrap();
        for i in 0..4 {
            for p in 0..3 {
                let expect: Cplx<f64> = (0..3).map(|k| d.column(p)[k].conj() * e.entry(k, i)).sum();
                assert!((b.entry(p, i) - expect).norm() < 1e-14);
            }
        }
    }
}
