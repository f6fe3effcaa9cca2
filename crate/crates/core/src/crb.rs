//! Fisher information and Cramér-Rao bounds for the intensity model
//! `y_i = |a_iᴴx|² + n_i`, `n_i ~ N(0, σ²)`.
//!
//! Every FIM has the form `(4/σ²)·G·Gᵀ` where column `i` of `G` is half the
//! gradient of `|a_iᴴx|²` with respect to the chosen real parameters. Four
//! parametrizations are covered:
//!
//! - `complex_reim`: `(Re x; Im x)`, 2N parameters, rank 2N−1 (global phase).
//! - `real`: `x ∈ ℝᴺ`, N parameters, full rank.
//! - `amp_phase`: `(b; θ)` with `x_m = b_m e^{jθ_m}`, rank 2N−1.
//! - `harmonic`: `(ω; Re γ; Im γ)` for `x = Σ γ_ℓ v(ω_ℓ)`, rank 3L−1.
//!
//! Bounds are eigendecomposition pseudo-inverses. The amplitude-phase and
//! harmonic FIMs also have an independent element-wise assembly used to
//! cross-check the stacked-`G` product.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{symmetric_eigen, Mat};
use crate::measurements::{vandermonde, HarmonicModel};
use crate::scalar::{inner, Cplx, Real};
use crate::signal::{ComplexSignal, MeasurementEnsemble};

/// Eigenvalues below `rank_tol · λ_max` are treated as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parametrization {
    ComplexReim,
    Real,
    AmpPhase,
    Harmonic,
}

/// A Fisher information matrix together with its pseudo-inverse.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FimResult<T> {
    pub parametrization: Parametrization,
    pub fim: Mat<T>,
    pub rank: usize,
    /// Columns span the numerical null space of `fim`.
    pub null_basis: Mat<T>,
    pub crb: Mat<T>,
    pub sigma_n: T,
    /// Ascending eigenvalues of `fim`.
    pub eigenvalues: Vec<T>,
}

impl<T: Real> FimResult<T> {
    pub fn dim(&self) -> usize {
        self.fim.rows()
    }

    pub fn crb_trace(&self) -> T {
        self.crb.trace()
    }

    /// Trace of the diagonal block `[start, start + len)` of the bound.
    pub fn block_trace(&self, start: usize, len: usize) -> T {
        (start..start + len).map(|k| self.crb[(k, k)]).sum()
    }

    /// `‖F·v‖ / (‖F‖_F · ‖v‖)`.
    pub fn relative_annihilation(&self, v: &[T]) -> T {
        let fv = self.fim.matvec(v);
        let num = fv.iter().map(|&a| a * a).sum::<T>().sqrt();
        let vn = v.iter().map(|&a| a * a).sum::<T>().sqrt();
        num / (self.fim.frobenius() * vn)
    }
}

/// Amplitude-phase bound with the Schur-complement marginal bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct AmpPhaseCrb<T> {
    pub full: FimResult<T>,
    /// `(F_θθ − F_θb F_bb⁻¹ F_bθ)†`.
    pub crb_theta: Mat<T>,
    /// `(F_bb − F_bθ F_θθ† F_θb)†`.
    pub crb_b: Mat<T>,
    /// Set when `F_bb` was numerically singular and a pseudo-inverse was used.
    pub f_bb_pinv_fallback: bool,
}

/// Pseudo-inverse, rank and null-space basis of a symmetric PSD matrix.
pub fn pseudo_inverse_psd<T: Real>(fim: &Mat<T>, rank_tol: T) -> Result<(Mat<T>, usize, Mat<T>)> {
    let (pinv, rank, null, _) = pinv_with_spectrum(fim, rank_tol)?;
    Ok((pinv, rank, null))
}

/// Pseudo-inverse, rank, null-space basis and ascending eigenvalues.
type PinvParts<T> = (Mat<T>, usize, Mat<T>, Vec<T>);

fn pinv_with_spectrum<T: Real>(fim: &Mat<T>, rank_tol: T) -> Result<PinvParts<T>> {
    check_dim("pseudo_inverse_psd", fim.rows(), fim.cols())?;
    let scale = fim.max_abs();
    let asym = fim.asymmetry();
    if asym > T::lit(1e-10) * scale.max(T::one()) {
        return Err(Error::NotSymmetric(asym.to_f64().unwrap_or(f64::NAN)));
    }
    let n = fim.rows();
    let eig = symmetric_eigen(fim);
    let lmax = eig.values.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    let cutoff = rank_tol * lmax;
    let kept: Vec<usize> = (0..n).filter(|&k| lmax > T::zero() && eig.values[k] > cutoff).collect();
    let dropped: Vec<usize> = (0..n).filter(|k| !kept.contains(k)).collect();

    let mut pinv = Mat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: T = kept.iter().map(|&k| eig.vectors[(i, k)] * eig.vectors[(j, k)] / eig.values[k]).sum();
            pinv[(i, j)] = v;
            pinv[(j, i)] = v;
        }
    }
    let null = Mat::from_fn(n, dropped.len(), |r, c| eig.vectors[(r, dropped[c])]);
    Ok((pinv, kept.len(), null, eig.values))
}

fn finish<T: Real>(p: Parametrization, g: &Mat<T>, sigma_n: T) -> Result<FimResult<T>> {
    let fim = g.gram_rows().scale(T::lit(4.0) / (sigma_n * sigma_n));
    from_fim(p, fim, sigma_n)
}

fn from_fim<T: Real>(p: Parametrization, fim: Mat<T>, sigma_n: T) -> Result<FimResult<T>> {
    let (crb, rank, null_basis, eigenvalues) = pinv_with_spectrum(&fim, T::lit(DEFAULT_RANK_TOL))?;
    Ok(FimResult { parametrization: p, fim, rank, null_basis, crb, sigma_n, eigenvalues })
}

fn check_sigma<T: Real>(sigma_n: T) -> Result<()> {
    if sigma_n > T::zero() && sigma_n.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("sigma_n must be positive and finite"))
    }
}

fn check_signal<T: Real>(ens: &MeasurementEnsemble<T>, x: &ComplexSignal<T>) -> Result<()> {
    check_dim("signal length", ens.n(), x.len())?;
    if x.is_zero() {
        return Err(Error::ZeroSignal("Fisher information"));
    }
    Ok(())
}

/// `G_c = [Re{A diag(Aᴴx)}; Im{A diag(Aᴴx)}]`, 2N × M.
pub fn g_complex<T: Real>(ens: &MeasurementEnsemble<T>, x: &ComplexSignal<T>) -> Result<Mat<T>> {
    check_signal(ens, x)?;
    let n = ens.n();
    let u = ens.project(x.values())?;
    let mut g = Mat::zeros(2 * n, ens.m());
    for (i, ui) in u.iter().enumerate() {
        let a = ens.column(i);
        for m in 0..n {
            let z = a[m] * ui;
            g[(m, i)] = z.re;
            g[(n + m, i)] = z.im;
        }
    }
    Ok(g)
}

/// FIM over `(Re x; Im x)`.
pub fn fim_complex<T: Real>(ens: &MeasurementEnsemble<T>, x: &ComplexSignal<T>, sigma_n: T) -> Result<FimResult<T>> {
    check_sigma(sigma_n)?;
    finish(Parametrization::ComplexReim, &g_complex(ens, x)?, sigma_n)
}

/// FIM for a real signal; the bound is a plain inverse.
pub fn fim_real<T: Real>(ens: &MeasurementEnsemble<T>, x: &[T], sigma_n: T) -> Result<FimResult<T>> {
    check_sigma(sigma_n)?;
    let xs = ComplexSignal::from_real(x)?;
    check_signal(ens, &xs)?;
    let n = ens.n();
    let u = ens.project(xs.values())?;
    let g = Mat::from_fn(n, ens.m(), |m, i| (ens.column(i)[m] * u[i]).re);
    let fim = g.gram_rows().scale(T::lit(4.0) / (sigma_n * sigma_n));
    let eig = symmetric_eigen(&fim);
    let lmax = eig.values.last().copied().unwrap_or(T::zero());
    let lmin = eig.values.first().copied().unwrap_or(T::zero());
    if !(lmin > T::lit(DEFAULT_RANK_TOL) * lmax) {
        return Err(Error::Singular(format!(
            "real-signal FIM has eigenvalue range [{:e}, {:e}]",
            lmin.to_f64().unwrap_or(f64::NAN),
            lmax.to_f64().unwrap_or(f64::NAN)
        )));
    }
    let crb = crate::linalg::spd_inverse(&fim)?;
    Ok(FimResult {
        parametrization: Parametrization::Real,
        fim,
        rank: n,
        null_basis: Mat::zeros(n, 0),
        crb,
        sigma_n,
        eigenvalues: eig.values,
    })
}

fn check_amplitudes<T: Real>(x: &ComplexSignal<T>) -> Result<()> {
    if let Some(k) = x.values().iter().position(|v| v.norm() == T::zero()) {
        return Err(Error::invalid(format!("coordinate {k} has zero amplitude; its phase is undefined")));
    }
    Ok(())
}

/// `G = [Re{diag(e^{−jθ}) A diag(Aᴴx)}; Im{diag(x*) A diag(Aᴴx)}]`, rows
/// ordered `(b; θ)`.
pub fn g_amp_phase<T: Real>(ens: &MeasurementEnsemble<T>, x: &ComplexSignal<T>) -> Result<Mat<T>> {
    check_signal(ens, x)?;
    check_amplitudes(x)?;
    let n = ens.n();
    let u = ens.project(x.values())?;
    let unit: Vec<Cplx<T>> = x.values().iter().map(|v| v / v.norm()).collect();
    let mut g = Mat::zeros(2 * n, ens.m());
    for (i, ui) in u.iter().enumerate() {
        let a = ens.column(i);
        for m in 0..n {
            let z = a[m] * ui;
            g[(m, i)] = (unit[m].conj() * z).re;
            g[(n + m, i)] = (x.values()[m].conj() * z).im;
        }
    }
    Ok(g)
}

/// FIM over `(b; θ)` plus the marginal amplitude and phase bounds.
pub fn fim_amp_phase<T: Real>(
    ens: &MeasurementEnsemble<T>,
    x: &ComplexSignal<T>,
    sigma_n: T,
) -> Result<AmpPhaseCrb<T>> {
    check_sigma(sigma_n)?;
    let full = finish(Parametrization::AmpPhase, &g_amp_phase(ens, x)?, sigma_n)?;
    marginals(full)
}

fn marginals<T: Real>(full: FimResult<T>) -> Result<AmpPhaseCrb<T>> {
    let n = full.dim() / 2;
    let tol = T::lit(DEFAULT_RANK_TOL);
    let f_bb = full.fim.block(0, 0, n, n);
    let f_bt = full.fim.block(0, n, n, n);
    let f_tb = full.fim.block(n, 0, n, n);
    let f_tt = full.fim.block(n, n, n, n);

    let (f_bb_inv, f_bb_pinv_fallback) = match crate::linalg::spd_inverse(&f_bb) {
        Ok(inv) if well_conditioned(&f_bb, tol) => (inv, false),
        _ => (pseudo_inverse_psd(&f_bb, tol)?.0, true),
    };
    let schur_t = f_tt.sub(&f_tb.matmul(&f_bb_inv).matmul(&f_bt)).symmetrized();
    let crb_theta = pseudo_inverse_psd(&schur_t, tol)?.0;

    let f_tt_pinv = pseudo_inverse_psd(&f_tt, tol)?.0;
    let schur_b = f_bb.sub(&f_bt.matmul(&f_tt_pinv).matmul(&f_tb)).symmetrized();
    let crb_b = pseudo_inverse_psd(&schur_b, tol)?.0;
    Ok(AmpPhaseCrb { full, crb_theta, crb_b, f_bb_pinv_fallback })
}

fn well_conditioned<T: Real>(a: &Mat<T>, tol: T) -> bool {
    let e = symmetric_eigen(a);
    match (e.values.first(), e.values.last()) {
        (Some(&lo), Some(&hi)) => lo > tol * hi,
        _ => false,
    }
}

/// Amplitude-phase FIM assembled block by block from per-entry derivative
/// sums with `A_i = a_i a_iᴴ`. Independent of [`g_amp_phase`].
pub fn fim_amp_phase_blockwise<T: Real>(
    ens: &MeasurementEnsemble<T>,
    x: &ComplexSignal<T>,
    sigma_n: T,
) -> Result<Mat<T>> {
    check_sigma(sigma_n)?;
    check_signal(ens, x)?;
    check_amplitudes(x)?;
    let n = ens.n();
    let xv = x.values();
    let theta = x.phases();
    // d_b[i][m] = ½ ∂(xᴴA_i x)/∂b_m = Re{e^{−jθ_m} A_i(m,:) x}
    // d_t[i][m] = ½ ∂(xᴴA_i x)/∂θ_m = Re{−j x_m* A_i(m,:) x}
    let mut d_b = Vec::with_capacity(ens.m());
    let mut d_t = Vec::with_capacity(ens.m());
    for a in ens.columns() {
        let row_times_x: Vec<Cplx<T>> = (0..n)
            .map(|m| (0..n).fold(Cplx::new(T::zero(), T::zero()), |acc, k| acc + a[m] * a[k].conj() * xv[k]))
            .collect();
        d_b.push((0..n).map(|m| (Cplx::from_polar(T::one(), -theta[m]) * row_times_x[m]).re).collect::<Vec<T>>());
        d_t.push(
            (0..n).map(|m| (Cplx::new(T::zero(), -T::one()) * xv[m].conj() * row_times_x[m]).re).collect::<Vec<T>>(),
        );
    }
    let c = T::lit(4.0) / (sigma_n * sigma_n);
    let sum = |p: &[Vec<T>], q: &[Vec<T>], r: usize, s: usize| -> T {
        p.iter().zip(q).map(|(u, v)| u[r] * v[s]).sum::<T>() * c
    };
    let f_bb = Mat::from_fn(n, n, |r, s| sum(&d_b, &d_b, r, s));
    let f_tt = Mat::from_fn(n, n, |r, s| sum(&d_t, &d_t, r, s));
    let f_tb = Mat::from_fn(n, n, |r, s| sum(&d_t, &d_b, r, s));
    let mut f = Mat::zeros(2 * n, 2 * n);
    f.set_block(0, 0, &f_bb);
    f.set_block(n, n, &f_tt);
    f.set_block(n, 0, &f_tb);
    f.set_block(0, n, &f_tb.transpose());
    Ok(f.symmetrized())
}

fn dvandermonde<T: Real>(omega: T, n: usize) -> Vec<Cplx<T>> {
    vandermonde(omega, n)
        .into_iter()
        .enumerate()
        .map(|(k, v)| v * Cplx::new(T::zero(), T::from_usize_lossy(k + 1)))
        .collect()
}

/// `G_v` with rows `Re{Xᴴ A_i x}`, `Re{Vᴴ A_i x}`, `Im{Vᴴ A_i x}`, where
/// `X = [γ_ℓ ∂v_ℓ/∂ω_ℓ]` and `V = [v(ω_ℓ)]`.
pub fn g_harmonic<T: Real>(ens: &MeasurementEnsemble<T>, model: &HarmonicModel<T>) -> Result<Mat<T>> {
    model.validate()?;
    check_dim("harmonic model length", ens.n(), model.n)?;
    let l = model.len();
    let x = crate::measurements::harmonic_signal(model)?;
    let u = ens.project(x.values())?;
    let xcols: Vec<Vec<Cplx<T>>> = model
        .frequencies
        .iter()
        .zip(&model.amplitudes)
        .map(|(&w, &g)| dvandermonde(w, model.n).into_iter().map(|d| d * g).collect())
        .collect();
    let vcols: Vec<Vec<Cplx<T>>> = model.frequencies.iter().map(|&w| vandermonde(w, model.n)).collect();
    let mut g = Mat::zeros(3 * l, ens.m());
    for (i, ui) in u.iter().enumerate() {
        let a = ens.column(i);
        for k in 0..l {
            // vᴴ A_i x = (vᴴ a_i) u_i = conj(a_iᴴ v) u_i
            g[(k, i)] = (inner(a, &xcols[k]).conj() * ui).re;
            let z = inner(a, &vcols[k]).conj() * ui;
            g[(l + k, i)] = z.re;
            g[(2 * l + k, i)] = z.im;
        }
    }
    Ok(g)
}

/// FIM over `(ω; Re γ; Im γ)`.
pub fn fim_harmonic<T: Real>(
    ens: &MeasurementEnsemble<T>,
    model: &HarmonicModel<T>,
    sigma_n: T,
) -> Result<FimResult<T>> {
    check_sigma(sigma_n)?;
    let g = g_harmonic(ens, model)?;
    if g.max_abs() == T::zero() {
        return Err(Error::ZeroSignal("harmonic Fisher information"));
    }
    finish(Parametrization::Harmonic, &g, sigma_n)
}

/// Harmonic FIM from entry-wise sums `Σ_i Re/Im{·}·Re/Im{·}` with
/// `A_i x` formed explicitly. Independent of [`g_harmonic`].
pub fn fim_harmonic_elementwise<T: Real>(
    ens: &MeasurementEnsemble<T>,
    model: &HarmonicModel<T>,
    sigma_n: T,
) -> Result<Mat<T>> {
    check_sigma(sigma_n)?;
    model.validate()?;
    check_dim("harmonic model length", ens.n(), model.n)?;
    let l = model.len();
    let n = model.n;
    let x = crate::measurements::harmonic_signal(model)?;
    let xv = x.values();
    let c = T::lit(4.0) / (sigma_n * sigma_n);
    let zero = Cplx::new(T::zero(), T::zero());

    let mut f = Mat::zeros(3 * l, 3 * l);
    for a in ens.columns() {
        let ax: Vec<Cplx<T>> = {
            let s = (0..n).fold(zero, |acc, k| acc + a[k].conj() * xv[k]);
            (0..n).map(|r| a[r] * s).collect()
        };
        // Per-parameter half-derivatives of xᴴA_i x.
        let mut d = vec![T::zero(); 3 * l];
        for k in 0..l {
            let w = model.frequencies[k];
            let gk = model.amplitudes[k];
            let mut dv_ax = zero;
            let mut v_ax = zero;
            for (r, &ax_r) in ax.iter().enumerate().take(n) {
                let kr = T::from_usize_lossy(r + 1);
                let e = Cplx::from_polar(T::one(), w * kr);
                // (∂v/∂ω)_r = j r e^{jωr}
                let dv = Cplx::new(T::zero(), kr) * e;
                dv_ax += dv.conj() * ax_r;
                v_ax += e.conj() * ax_r;
            }
            d[k] = (gk.conj() * dv_ax).re;
            d[l + k] = v_ax.re;
            d[2 * l + k] = v_ax.im;
        }
        for r in 0..3 * l {
            for s in 0..3 * l {
                f[(r, s)] += c * d[r] * d[s];
            }
        }
    }
    Ok(f.symmetrized())
}

/// Outcome of [`crb_monotonicity_check`] for one step `M → M'`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotonicityStep {
    pub m_from: usize,
    pub m_to: usize,
    /// Smallest eigenvalue of `CRB(M) − CRB(M')`.
    pub min_eigenvalue: f64,
    pub trace_from: f64,
    pub trace_to: f64,
    pub rank_from: usize,
    pub rank_to: usize,
    /// `‖F(M') − F(M) − (4/σ²) Σ g_i g_iᵀ‖_max / ‖F(M')‖_max` over the added columns.
    pub update_residual: f64,
    pub monotone: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub parametrization: Parametrization,
    pub steps: Vec<MonotonicityStep>,
}

impl MonotonicityReport {
    pub fn all_monotone(&self) -> bool {
        self.steps.iter().all(|s| s.monotone)
    }

    pub fn max_update_residual(&self) -> f64 {
        self.steps.iter().fold(0.0, |m, s| m.max(s.update_residual))
    }
}

/// Tolerance on `λ_min(CRB(M) − CRB(M'))`.
pub const MONOTONICITY_TOL: f64 = 1e-9;

/// Checks that the bound shrinks in the Loewner order as measurement columns
/// `1..M` grow through `m_values`, and that the FIM grows by exactly the
/// rank-one terms of the added columns.
///
/// `parametrization` must be `AmpPhase`, `ComplexReim` or `Real` (the latter
/// uses the real part of `x`).
pub fn crb_monotonicity_check<T: Real>(
    ens: &MeasurementEnsemble<T>,
    x: &ComplexSignal<T>,
    sigma_n: T,
    m_values: &[usize],
    parametrization: Parametrization,
) -> Result<MonotonicityReport> {
    check_sigma(sigma_n)?;
    check_signal(ens, x)?;
    if m_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("m_values must be strictly increasing"));
    }
    if let Some(&m) = m_values.iter().find(|&&m| m < ens.n() || m > ens.m()) {
        return Err(Error::invalid(format!("M = {m} outside [N, {}]", ens.m())));
    }
    let g_all = match parametrization {
        Parametrization::AmpPhase => g_amp_phase(ens, x)?,
        Parametrization::ComplexReim => g_complex(ens, x)?,
        Parametrization::Real => {
            let re: Vec<T> = x.values().iter().map(|v| v.re).collect();
            let xs = ComplexSignal::from_real(&re)?;
            let g = g_complex(ens, &xs)?;
            g.block(0, 0, ens.n(), ens.m())
        }
        Parametrization::Harmonic => {
            return Err(Error::invalid("monotonicity check is defined for signal parametrizations"))
        }
    };
    let c = T::lit(4.0) / (sigma_n * sigma_n);
    let p = g_all.rows();
    let fim_for = |m: usize| g_all.block(0, 0, p, m).gram_rows().scale(c);
    let tol = T::lit(DEFAULT_RANK_TOL);

    let mut steps = Vec::new();
    for w in m_values.windows(2) {
        let (m0, m1) = (w[0], w[1]);
        let f0 = fim_for(m0);
        let f1 = fim_for(m1);
        let mut rebuilt = f0.clone();
        for i in m0..m1 {
            let gi = g_all.column(i);
            for r in 0..p {
                for s in 0..p {
                    rebuilt[(r, s)] += c * gi[r] * gi[s];
                }
            }
        }
        let update_residual =
            (f1.sub(&rebuilt).max_abs() / f1.max_abs().max(T::min_positive_value())).to_f64().unwrap_or(f64::NAN);
        let (c0, r0, _) = pseudo_inverse_psd(&f0, tol)?;
        let (c1, r1, _) = pseudo_inverse_psd(&f1, tol)?;
        let diff = c0.sub(&c1).symmetrized();
        let min_eig = symmetric_eigen(&diff).values.first().copied().unwrap_or(T::zero());
        let min_eigenvalue = min_eig.to_f64().unwrap_or(f64::NAN);
        steps.push(MonotonicityStep {
            m_from: m0,
            m_to: m1,
            min_eigenvalue,
            trace_from: c0.trace().to_f64().unwrap_or(f64::NAN),
            trace_to: c1.trace().to_f64().unwrap_or(f64::NAN),
            rank_from: r0,
            rank_to: r1,
            update_residual,
            monotone: min_eigenvalue >= -MONOTONICITY_TOL,
        });
    }
    Ok(MonotonicityReport { parametrization, steps })
}
