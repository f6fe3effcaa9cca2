//! Domain types, the squared-magnitude forward model, noise injection and
//! estimation-error metrics.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::{self, Stream};
use crate::scalar::{inner, norm_sqr, to_db, wrap_phase, Cplx, Real};

/// A complex signal of length `N ≥ 1` with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", try_from = "Vec<Cplx<T>>", into = "Vec<Cplx<T>>")]
pub struct ComplexSignal<T: Real> {
    values: Vec<Cplx<T>>,
}

impl<T: Real> ComplexSignal<T> {
    pub fn new(values: Vec<Cplx<T>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("signal must have at least one entry"));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::invalid("signal entries must be finite"));
        }
        Ok(ComplexSignal { values })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![Cplx::new(T::zero(), T::zero()); n])
    }

    /// Builds a signal from real samples.
    pub fn from_real(values: &[T]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Cplx::new(v, T::zero())).collect())
    }

    /// Draws i.i.d. circularly-symmetric complex normal entries with unit variance.
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        let mut r = rng::stream(seed, Stream::Signal);
        Self::new((0..n).map(|_| rng::complex_normal(&mut r, 1.0)).collect())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn values(&self) -> &[Cplx<T>] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Cplx<T>> {
        self.values
    }

    pub fn norm_sqr(&self) -> T {
        norm_sqr(&self.values)
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.re == T::zero() && v.im == T::zero())
    }

    /// Amplitudes `|x_i|`.
    pub fn amplitudes(&self) -> Vec<T> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Phases `∠x_i` in `(-π, π]`.
    pub fn phases(&self) -> Vec<T> {
        self.values.iter().map(|v| wrap_phase(v.arg())).collect()
    }

    pub fn scaled(&self, s: T) -> Self {
        ComplexSignal { values: self.values.iter().map(|v| v * s).collect() }
    }

    /// `e^{jφ}·x`.
    pub fn rotated(&self, phi: T) -> Self {
        let r = Cplx::from_polar(T::one(), phi);
        ComplexSignal { values: self.values.iter().map(|v| v * r).collect() }
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == T::zero())
    }
}

impl<T: Real> TryFrom<Vec<Cplx<T>>> for ComplexSignal<T> {
    type Error = Error;
    fn try_from(v: Vec<Cplx<T>>) -> Result<Self> {
        Self::new(v)
    }
}

impl<T: Real> From<ComplexSignal<T>> for Vec<Cplx<T>> {
    fn from(s: ComplexSignal<T>) -> Self {
        s.values
    }
}

/// Provenance of a measurement ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    Gaussian,
    MaskedFourier,
    Custom,
}

/// Measurement matrix `A = [a_1 … a_M]` (N × M, column-major) plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", try_from = "EnsembleRepr<T>", into = "EnsembleRepr<T>")]
pub struct MeasurementEnsemble<T: Real> {
    n: usize,
    m: usize,
    columns: Vec<Cplx<T>>,
    kind: EnsembleKind,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct EnsembleRepr<T: Real> {
    kind: EnsembleKind,
    seed: u64,
    rows: usize,
    cols: usize,
    /// Column-major entries as `[re, im]` pairs.
    data: Vec<Cplx<T>>,
}

impl<T: Real> TryFrom<EnsembleRepr<T>> for MeasurementEnsemble<T> {
    type Error = Error;
    fn try_from(r: EnsembleRepr<T>) -> Result<Self> {
        Self::new(r.n_rows_checked()?, r.cols, r.data, r.kind, r.seed)
    }
}

impl<T: Real> EnsembleRepr<T> {
    fn n_rows_checked(&self) -> Result<usize> {
        check_dim("ensemble data length", self.rows * self.cols, self.data.len())?;
        Ok(self.rows)
    }
}

impl<T: Real> From<MeasurementEnsemble<T>> for EnsembleRepr<T> {
    fn from(e: MeasurementEnsemble<T>) -> Self {
        EnsembleRepr { kind: e.kind, seed: e.seed, rows: e.n, cols: e.m, data: e.columns }
    }
}

impl<T: Real> MeasurementEnsemble<T> {
    /// `columns` holds the N × M matrix in column-major order.
    pub fn new(n: usize, m: usize, columns: Vec<Cplx<T>>, kind: EnsembleKind, seed: u64) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::invalid("ensemble needs N >= 1 and M >= 1"));
        }
        check_dim("ensemble data length", n * m, columns.len())?;
        if columns.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::invalid("ensemble entries must be finite"));
        }
        if kind == EnsembleKind::MaskedFourier && !m.is_multiple_of(n) {
            return Err(Error::invalid(format!("masked Fourier ensemble needs M a multiple of N (N={n}, M={m})")));
        }
        Ok(MeasurementEnsemble { n, m, columns, kind, seed })
    }

    /// Builds an ensemble from a list of measurement vectors `a_i`.
    pub fn from_columns(cols: &[Vec<Cplx<T>>], kind: EnsembleKind, seed: u64) -> Result<Self> {
        let n = cols.first().map_or(0, Vec::len);
        for c in cols {
            check_dim("measurement vector length", n, c.len())?;
        }
        Self::new(n, cols.len(), cols.concat(), kind, seed)
    }

    /// Signal dimension N.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of measurements M.
    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn kind(&self) -> EnsembleKind {
        self.kind
    }

    #[inline]
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Measurement vector `a_i`.
    #[inline]
    pub fn column(&self, i: usize) -> &[Cplx<T>] {
        &self.columns[i * self.n..(i + 1) * self.n]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[Cplx<T>]> + '_ {
        self.columns.chunks_exact(self.n)
    }

    /// Entry `A[row, col]`.
    #[inline]
    pub fn entry(&self, row: usize, col: usize) -> Cplx<T> {
        self.columns[col * self.n + row]
    }

    pub fn data(&self) -> &[Cplx<T>] {
        &self.columns
    }

    /// `Aᴴx`, i.e. the M scalars `a_iᴴx`.
    pub fn project(&self, x: &[Cplx<T>]) -> Result<Vec<Cplx<T>>> {
        check_dim("signal length vs ensemble N", self.n, x.len())?;
        Ok(self.columns().map(|a| inner(a, x)).collect())
    }

    /// Mean of `‖a_i‖²/N`; equals one for isotropic unit-variance vectors.
    pub fn mean_power(&self) -> T {
        let total: T = self.columns.iter().map(|v| v.norm_sqr()).sum();
        total / T::from_usize_lossy(self.n * self.m)
    }

    /// Ensemble made of the first `m` columns.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.m {
            return Err(Error::invalid(format!("cannot keep {m} of {} columns", self.m)));
        }
        let kind = if m.is_multiple_of(self.n) { self.kind } else { EnsembleKind::Custom };
        Self::new(self.n, m, self.columns[..m * self.n].to_vec(), kind, self.seed)
    }

    /// Ensemble with one extra measurement vector appended.
    pub fn with_column(&self, a: &[Cplx<T>]) -> Result<Self> {
        check_dim("appended column length", self.n, a.len())?;
        let mut cols = self.columns.clone();
        cols.extend_from_slice(a);
        Self::new(self.n, self.m + 1, cols, EnsembleKind::Custom, self.seed)
    }
}

/// Inputs handed to every solver: ensemble, measurements, noise level and
/// (for simulations) the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RetrievalInstance<T: Real> {
    pub ensemble: MeasurementEnsemble<T>,
    pub y: Vec<T>,
    pub sigma_n: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<ComplexSignal<T>>,
}

impl<T: Real> RetrievalInstance<T> {
    pub fn new(
        ensemble: MeasurementEnsemble<T>,
        y: Vec<T>,
        sigma_n: T,
        truth: Option<ComplexSignal<T>>,
    ) -> Result<Self> {
        let inst = RetrievalInstance { ensemble, y, sigma_n, truth };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        check_dim("measurement vector length", self.ensemble.m(), self.y.len())?;
        if !(self.sigma_n >= T::zero()) {
            return Err(Error::invalid("sigma_n must be nonnegative"));
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("measurements must be finite"));
        }
        if let Some(t) = &self.truth {
            check_dim("truth length vs ensemble N", self.ensemble.n(), t.len())?;
        }
        Ok(())
    }

    /// Simulates `y = |Aᴴx|² + n` with noise of standard deviation `sigma_n`.
    pub fn simulate(
        ensemble: MeasurementEnsemble<T>,
        truth: ComplexSignal<T>,
        sigma_n: T,
        noise_seed: u64,
    ) -> Result<Self> {
        let clean = measure(&ensemble, &truth)?;
        let y = add_noise(&clean, sigma_n, noise_seed)?;
        Self::new(ensemble, y, sigma_n, Some(truth))
    }

    /// Least-squares cost `Σ (y_i − |a_iᴴx|²)²`.
    pub fn ls_cost(&self, x: &[Cplx<T>]) -> Result<T> {
        let p = self.ensemble.project(x)?;
        Ok(p.iter()
            .zip(&self.y)
            .map(|(u, &y)| {
                let r = y - u.norm_sqr();
                r * r
            })
            .sum())
    }
}

/// Squared-magnitude measurements `y_i = |a_iᴴx|²`.
pub fn measure<T: Real>(ensemble: &MeasurementEnsemble<T>, x: &ComplexSignal<T>) -> Result<Vec<T>> {
    Ok(ensemble.project(x.values())?.iter().map(|u| u.norm_sqr()).collect())
}

/// Adds i.i.d. zero-mean Gaussian noise of standard deviation `sigma_n`.
pub fn add_noise<T: Real>(y: &[T], sigma_n: T, seed: u64) -> Result<Vec<T>> {
    if !(sigma_n >= T::zero()) || !sigma_n.is_finite() {
        return Err(Error::invalid("noise standard deviation must be finite and nonnegative"));
    }
    if sigma_n == T::zero() {
        return Ok(y.to_vec());
    }
    let mut r = rng::stream(seed, Stream::Noise);
    Ok(y.iter().map(|&v| v + sigma_n * rng::normal::<T, _>(&mut r)).collect())
}

/// Noise level giving `SNR = Σ|a_iᴴx|⁴ / (M σ_n²)` equal to `snr_linear`.
pub fn sigma_from_snr<T: Real>(ensemble: &MeasurementEnsemble<T>, x: &ComplexSignal<T>, snr_linear: T) -> Result<T> {
    if !(snr_linear > T::zero()) || !snr_linear.is_finite() {
        return Err(Error::invalid("SNR must be positive and finite"));
    }
    let fourth = fourth_moment_sum(ensemble, x)?;
    if fourth == T::zero() {
        return Err(Error::ZeroSignal("SNR is undefined for a signal with zero measurements"));
    }
    Ok((fourth / (T::from_usize_lossy(ensemble.m()) * snr_linear)).sqrt())
}

/// Inverse of [`sigma_from_snr`].
pub fn snr_from_sigma<T: Real>(ensemble: &MeasurementEnsemble<T>, x: &ComplexSignal<T>, sigma_n: T) -> Result<T> {
    if !(sigma_n > T::zero()) {
        return Err(Error::invalid("sigma_n must be positive"));
    }
    let fourth = fourth_moment_sum(ensemble, x)?;
    Ok(fourth / (T::from_usize_lossy(ensemble.m()) * sigma_n * sigma_n))
}

fn fourth_moment_sum<T: Real>(ensemble: &MeasurementEnsemble<T>, x: &ComplexSignal<T>) -> Result<T> {
    Ok(measure(ensemble, x)?.iter().map(|&y| y * y).sum())
}

/// Converts decibels to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Rotates `estimate` by the global phase minimizing `‖e^{jφ}·estimate − truth‖₂`.
///
/// Returns the aligned signal and `φ*` in `(-π, π]`.
pub fn align_global_phase<T: Real>(
    estimate: &ComplexSignal<T>,
    truth: &ComplexSignal<T>,
) -> Result<(ComplexSignal<T>, T)> {
    check_dim("estimate length vs truth", truth.len(), estimate.len())?;
    if truth.is_zero() {
        return Err(Error::ZeroSignal("cannot align against a zero truth vector"));
    }
    // φ* = ∠(x̂ᴴx); zero correlation leaves the estimate unchanged.
    let c = inner(estimate.values(), truth.values());
    let phi = if c.norm() == T::zero() { T::zero() } else { wrap_phase(c.arg()) };
    Ok((estimate.rotated(phi), phi))
}

/// Signal, amplitude and phase errors of one estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub mse_signal_db: f64,
    pub mse_amplitude_db: f64,
    pub mse_phase_db: f64,
    /// Global phase applied to the estimate before measuring the error.
    pub aligned_phase: f64,
    pub is_outage: bool,
    /// `‖x̂ − x‖²` after alignment (linear units).
    pub sq_err_signal: f64,
    /// `‖|x̂| − |x|‖²`.
    pub sq_err_amplitude: f64,
    /// `Σ wrap(∠x̂_i − ∠x_i)²`.
    pub sq_err_phase: f64,
}

/// Computes the error report of `estimate` against `truth`, after global
/// phase alignment. An outage is a signal MSE above 0 dB.
pub fn error_report<T: Real>(estimate: &ComplexSignal<T>, truth: &ComplexSignal<T>) -> Result<ErrorReport> {
    let (aligned, phi) = align_global_phase(estimate, truth)?;
    let sq_signal: T = aligned.values().iter().zip(truth.values()).map(|(a, b)| (a - b).norm_sqr()).sum();
    let sq_amp: T = aligned
        .values()
        .iter()
        .zip(truth.values())
        .map(|(a, b)| {
            let d = a.norm() - b.norm();
            d * d
        })
        .sum();
    let sq_phase: T = phase_differences(&aligned, truth).into_iter().map(|d| d * d).sum();
    let mse_signal_db = to_db(sq_signal);
    Ok(ErrorReport {
        mse_signal_db,
        mse_amplitude_db: to_db(sq_amp),
        mse_phase_db: to_db(sq_phase),
        aligned_phase: phi.to_f64().unwrap_or(f64::NAN),
        is_outage: mse_signal_db > 0.0,
        sq_err_signal: sq_signal.to_f64().unwrap_or(f64::NAN),
        sq_err_amplitude: sq_amp.to_f64().unwrap_or(f64::NAN),
        sq_err_phase: sq_phase.to_f64().unwrap_or(f64::NAN),
    })
}

/// Per-entry phase differences `∠a_i − ∠b_i`, each wrapped to `(-π, π]`.
pub fn phase_differences<T: Real>(a: &ComplexSignal<T>, b: &ComplexSignal<T>) -> Vec<T> {
    a.values().iter().zip(b.values()).map(|(u, v)| wrap_phase(u.arg() - v.arg())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    type C = Cplx<f64>;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn sig(v: &[C]) -> ComplexSignal<f64> {
        ComplexSignal::new(v.to_vec()).unwrap()
    }

    fn toy_ensemble() -> MeasurementEnsemble<f64> {
        MeasurementEnsemble::from_columns(
            &[vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.5, -1.0), c(2.0, 0.3)]],
            EnsembleKind::Custom,
            0,
        )
        .unwrap()
    }

    #[test]
    fn measure_picks_first_coordinate() {
        let e = toy_ensemble();
        let y = measure(&e, &sig(&[c(2.0, 0.0), c(0.0, 3.0)])).unwrap();
        assert_eq!(y[0], 4.0);
    }

    #[test]
    fn measure_of_zero_signal_is_zero() {
        let e = toy_ensemble();
        let y = measure(&e, &ComplexSignal::zeros(2).unwrap()).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn measure_rejects_wrong_length() {
        let e = toy_ensemble();
        let err = measure(&e, &sig(&[c(1.0, 0.0)])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn signal_rejects_empty_and_nonfinite() {
        assert!(ComplexSignal::<f64>::new(vec![]).is_err());
        assert!(ComplexSignal::new(vec![c(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn masked_fourier_kind_requires_multiple_of_n() {
        let err = MeasurementEnsemble::new(2, 3, vec![c(1.0, 0.0); 6], EnsembleKind::MaskedFourier, 0);
        assert!(err.is_err());
    }

    #[test]
    fn add_noise_zero_sigma_is_identity_and_negative_is_error() {
        let y = vec![1.0, 2.5, -3.0];
        assert_eq!(add_noise(&y, 0.0, 9).unwrap(), y);
        assert!(add_noise(&y, -0.1, 9).is_err());
    }

    #[test]
    fn add_noise_is_deterministic() {
        let y = vec![0.0; 16];
        assert_eq!(add_noise(&y, 0.3, 5).unwrap(), add_noise(&y, 0.3, 5).unwrap());
        assert_ne!(add_noise(&y, 0.3, 5).unwrap(), add_noise(&y, 0.3, 6).unwrap());
    }

    #[test]
    fn sigma_from_snr_single_term() {
        // |a_1ᴴx|² = 2 → σ = sqrt(4 / 1)
        let e = MeasurementEnsemble::from_columns(&[vec![c(1.0, 0.0)]], EnsembleKind::Custom, 0).unwrap();
        let x = sig(&[c(1.0, 1.0)]);
        assert!((sigma_from_snr(&e, &x, 1.0).unwrap() - 2.0).abs() < 1e-15);
        let s1 = sigma_from_snr(&e, &x, 3.0).unwrap();
        let s2 = sigma_from_snr(&e, &x, 6.0).unwrap();
        assert!((s1 / s2 - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn sigma_from_snr_rejects_zero_signal() {
        let e = toy_ensemble();
        let err = sigma_from_snr(&e, &ComplexSignal::zeros(2).unwrap(), 10.0).unwrap_err();
        assert!(matches!(err, Error::ZeroSignal(_)));
    }

    #[test]
    fn alignment_examples() {
        let truth = sig(&[c(1.0, 2.0), c(-0.5, 0.25), c(3.0, -1.0)]);
        let (a, phi) = align_global_phase(&truth.rotated(0.7), &truth).unwrap();
        assert!((phi + 0.7).abs() < 1e-12);
        for (u, v) in a.values().iter().zip(truth.values()) {
            assert!((u - v).norm() < 1e-12);
        }
        let (_, phi0) = align_global_phase(&truth, &truth).unwrap();
        assert_eq!(phi0, 0.0);
        let est = truth.rotated(PI / 3.0).scaled(2.0);
        let (a, phi) = align_global_phase(&est, &truth).unwrap();
        assert!((wrap_phase(phi + PI / 3.0)).abs() < 1e-12);
        for (u, v) in a.values().iter().zip(truth.values()) {
            assert!((u - v * 2.0).norm() < 1e-12);
        }
        assert!(align_global_phase(&truth, &ComplexSignal::zeros(3).unwrap()).is_err());
    }

    #[test]
    fn error_report_examples() {
        let truth = sig(&[c(1.0, 2.0), c(-0.5, 0.25), c(3.0, -1.0)]);
        let r = error_report(&truth, &truth).unwrap();
        assert_eq!(r.mse_signal_db, crate::scalar::DB_FLOOR);
        assert_eq!(r.mse_amplitude_db, crate::scalar::DB_FLOOR);
        assert_eq!(r.mse_phase_db, crate::scalar::DB_FLOOR);
        assert!(!r.is_outage);

        // perturbation orthogonal to truth keeps the alignment at zero
        let t2 = sig(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let est = sig(&[c(1.0, 0.0), c(10.0, 0.0)]);
        let r = error_report(&est, &t2).unwrap();
        assert!((r.mse_signal_db - 20.0).abs() < 1e-12);
        assert!(r.is_outage);

        let r = error_report(&truth.rotated(PI), &truth).unwrap();
        assert!(r.mse_signal_db < -290.0);
        assert!(!r.is_outage);
    }

    #[test]
    fn wrapped_phase_errors_stay_in_range() {
        let a = sig(&[c(-1.0, 1e-9), c(-1.0, -1e-9), c(1.0, 0.0)]);
        let b = sig(&[c(-1.0, -1e-9), c(-1.0, 1e-9), c(-1.0, 0.0)]);
        for d in phase_differences(&a, &b) {
            assert!(d > -PI && d <= PI);
        }
    }

    #[test]
    fn ensemble_json_schema_uses_pairs_and_dims() {
        let e = toy_ensemble();
        let v: serde_json::Value = serde_json::to_value(&e).unwrap();
        assert_eq!(v["rows"], 2);
        assert_eq!(v["cols"], 2);
        assert_eq!(v["kind"], "custom");
        assert_eq!(v["data"][2], serde_json::json!([0.5, -1.0]));
        let back: MeasurementEnsemble<f64> = serde_json::from_value(v).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn ensemble_json_rejects_bad_dims() {
        let bad = serde_json::json!({"kind":"custom","seed":0,"rows":2,"cols":2,"data":[[1.0,0.0]]});
        assert!(serde_json::from_value::<MeasurementEnsemble<f64>>(bad).is_err());
    }
}
