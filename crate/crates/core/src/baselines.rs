//! Reference solvers: spectral initialization, Wirtinger Flow and
//! Gerchberg-Saxton.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{complex_cholesky, complex_cholesky_solve, leading_eigenvector, CMat};
use crate::scalar::{norm_sqr, Cplx, Real};
use crate::signal::{ComplexSignal, MeasurementEnsemble, RetrievalInstance};
use crate::trace::{converged, Trace, TraceRecord};

/// How an iterative solver picks its starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Real")]
pub enum InitStrategy<T: Real> {
    Spectral,
    /// `CN(0, 1)` entries drawn from `seed`.
    Random {
        seed: u64,
    },
    Given {
        signal: ComplexSignal<T>,
    },
}

/// Eigen-residual tolerance for the spectral initializer's power iteration.
pub const SPECTRAL_TOL: f64 = 1e-10;
const SPECTRAL_MAX_ITER: usize = 100_000;

/// Leading eigenvector of `Σ y_i a_i a_iᴴ`, scaled to norm
/// `sqrt(mean(y) / mean(‖a_i‖²/N))`. Returns the signal and the norm.
pub fn spectral_init<T: Real>(inst: &RetrievalInstance<T>) -> Result<(ComplexSignal<T>, T)> {
    spectral_init_from(&inst.ensemble, &inst.y)
}

/// [`spectral_init`] on a bare ensemble and measurement vector.
pub fn spectral_init_from<T: Real>(ens: &MeasurementEnsemble<T>, y: &[T]) -> Result<(ComplexSignal<T>, T)> {
    check_dim("measurement vector length", ens.m(), y.len())?;
    if ens.m() == 0 {
        return Err(Error::invalid("spectral initialization needs at least one measurement"));
    }
    if y.iter().all(|&v| v == T::zero()) {
        return Err(Error::ZeroSignal("all measurements are zero"));
    }
    let n = ens.n();
    let mut h = CMat::zeros(n);
    for (a, &yi) in ens.columns().zip(y) {
        h.add_outer(yi, a);
    }
    let indefinite = y.iter().any(|&v| v < T::zero());
    let pi = leading_eigenvector(&h, T::lit(SPECTRAL_TOL), SPECTRAL_MAX_ITER, indefinite);
    if !(pi.residual <= T::lit(SPECTRAL_TOL) * pi.value.abs()) {
        warn!(
            "spectral init: power iteration stopped at residual {:e} after {} iterations",
            pi.residual.to_f64().unwrap_or(f64::NAN),
            pi.iterations
        );
    }
    let mean_y = y.iter().copied().sum::<T>() / T::from_usize_lossy(y.len());
    let kappa = ens.mean_power();
    if !(mean_y > T::zero()) || !(kappa > T::zero()) {
        return Err(Error::ZeroSignal("mean measurement power is not positive"));
    }
    let scale = (mean_y / kappa).sqrt();
    let v = ComplexSignal::new(pi.vector)?;
    let unit = v.scaled(T::one() / v.norm());
    Ok((unit.scaled(scale), scale))
}

/// Resolves an [`InitStrategy`] for an ensemble of dimension `ens.n()`.
/// The second value is the spectral scale when that initializer ran.
pub fn initial_point<T: Real>(
    ens: &MeasurementEnsemble<T>,
    y: &[T],
    init: &InitStrategy<T>,
) -> Result<(ComplexSignal<T>, Option<T>)> {
    match init {
        InitStrategy::Spectral => spectral_init_from(ens, y).map(|(x, s)| (x, Some(s))),
        InitStrategy::Random { seed } => Ok((ComplexSignal::random(ens.n(), *seed)?, None)),
        InitStrategy::Given { signal } => {
            check_dim("initial point length", ens.n(), signal.len())?;
            Ok((signal.clone(), None))
        }
    }
}

/// WF step schedule `μ_k = μ_max · min(1 − e^{−k/τ₀}, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub mu_max: f64,
    pub tau0: f64,
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule { mu_max: 0.4, tau0: 330.0 }
    }
}

impl StepSchedule {
    pub fn mu(&self, k: usize) -> f64 {
        self.mu_max * (1.0 - (-(k as f64) / self.tau0).exp()).min(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BaselineConfig<T: Real> {
    pub max_iter: usize,
    pub tol: f64,
    pub step_schedule: StepSchedule,
    pub init: InitStrategy<T>,
}

impl<T: Real> Default for BaselineConfig<T> {
    fn default() -> Self {
        BaselineConfig {
            max_iter: 2000,
            tol: 1e-7,
            step_schedule: StepSchedule::default(),
            init: InitStrategy::Spectral,
        }
    }
}

impl<T: Real> BaselineConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol must be positive"));
        }
        if !(self.step_schedule.mu_max > 0.0) || !(self.step_schedule.tau0 > 0.0) {
            return Err(Error::invalid("step schedule constants must be positive"));
        }
        Ok(())
    }
}

/// Costs below `LS_FLOOR · Σ y_i²` are at round-off level.
const LS_FLOOR: f64 = 1e-26;

fn f64_of<T: Real>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Gradient of `f(x) = Σ (y_i − |a_iᴴx|²)²` with respect to `(Re x, Im x)`,
/// packed as a complex vector: `4 Σ (|a_iᴴx|² − y_i) a_i (a_iᴴx)`.
pub fn ls_gradient<T: Real>(inst: &RetrievalInstance<T>, x: &[Cplx<T>]) -> Result<Vec<Cplx<T>>> {
    let u = inst.ensemble.project(x)?;
    let mut g = vec![Cplx::new(T::zero(), T::zero()); x.len()];
    for (i, (ui, &yi)) in u.iter().zip(&inst.y).enumerate() {
        let c = T::lit(4.0) * (ui.norm_sqr() - yi);
        for (gk, ak) in g.iter_mut().zip(inst.ensemble.column(i)) {
            *gk += ak * ui * c;
        }
    }
    Ok(g)
}

/// Wirtinger Flow from the configured initial point.
///
/// Update `x ← x − (μ_k/‖x₀‖²)·(1/(Mκ²))·Σ(|a_iᴴx|² − y_i) a_i a_iᴴx`,
/// with `κ = mean ‖a_i‖²/N` normalizing the ensemble to unit per-entry power.
pub fn wirtinger_flow<T: Real>(
    inst: &RetrievalInstance<T>,
    cfg: &BaselineConfig<T>,
) -> Result<(ComplexSignal<T>, Trace)> {
    inst.validate()?;
    cfg.validate()?;
    let (x0, scale) = initial_point(&inst.ensemble, &inst.y, &cfg.init)?;
    let mut trace = Trace::new("wf");
    trace.init_scale = scale.map(f64_of);
    let x0_norm2 = x0.norm_sqr();
    if x0_norm2 == T::zero() {
        return Err(Error::ZeroSignal("Wirtinger Flow initial point"));
    }
    let kappa = inst.ensemble.mean_power();
    let m = T::from_usize_lossy(inst.ensemble.m());
    let floor = LS_FLOOR * inst.y.iter().map(|&v| f64_of(v * v)).sum::<f64>();

    let mut x = x0.into_values();
    let mut prev = f64_of(inst.ls_cost(&x)?);
    for k in 1..=cfg.max_iter {
        let g = ls_gradient(inst, &x)?;
        // ls_gradient carries a factor 4 relative to the WF gradient.
        let step = T::lit(cfg.step_schedule.mu(k)) / (x0_norm2 * m * kappa * kappa * T::lit(4.0));
        for (xk, gk) in x.iter_mut().zip(&g) {
            *xk -= gk * step;
        }
        let cost = f64_of(inst.ls_cost(&x)?);
        if !cost.is_finite() || x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NumericalFailure {
                iteration: k,
                reason: "Wirtinger Flow iterate is not finite".into(),
            });
        }
        trace.push(TraceRecord {
            iteration: k,
            objective: cost,
            slack_sum: 0.0,
            estimate_norm: f64_of(norm_sqr(&x).sqrt()),
            ls_cost: cost,
            inherited_violation: 0.0,
            inner_iterations: 0,
            inexact: false,
        });
        if converged(prev, cost, cfg.tol, floor) {
            trace.converged = true;
            break;
        }
        prev = cost;
    }
    Ok((ComplexSignal::new(x)?, trace))
}

/// Gerchberg-Saxton: alternate `u ← phase(Aᴴx)` and
/// `x ← (AAᴴ)⁻¹ A (√y⁺ ⊙ u)`.
///
/// The recorded objective is the alternating cost `‖√y⁺ ⊙ u − Aᴴx‖²`
/// after each full sweep; the stopping rule runs on the LS cost.
pub fn gerchberg_saxton<T: Real>(
    inst: &RetrievalInstance<T>,
    cfg: &BaselineConfig<T>,
) -> Result<(ComplexSignal<T>, Trace)> {
    let (x, trace, _) = gerchberg_saxton_detailed(inst, cfg)?;
    Ok((x, trace))
}

/// As [`gerchberg_saxton`], also returning the alternating cost after every
/// half-step (phase update, then LS update).
pub fn gerchberg_saxton_detailed<T: Real>(
    inst: &RetrievalInstance<T>,
    cfg: &BaselineConfig<T>,
) -> Result<(ComplexSignal<T>, Trace, Vec<f64>)> {
    inst.validate()?;
    cfg.validate()?;
    let ens = &inst.ensemble;
    if ens.m() < ens.n() {
        return Err(Error::invalid("Gerchberg-Saxton needs M ≥ N"));
    }
    let n = ens.n();
    let mut gram = CMat::zeros(n);
    for a in ens.columns() {
        gram.add_outer(T::one(), a);
    }
    let chol = complex_cholesky(&gram).map_err(|_| Error::Singular("measurement matrix is rank deficient".into()))?;
    let mag: Vec<T> = inst.y.iter().map(|&v| v.max(T::zero()).sqrt()).collect();

    let (x0, scale) = initial_point(ens, &inst.y, &cfg.init)?;
    let mut trace = Trace::new("gs");
    trace.init_scale = scale.map(f64_of);
    let floor = LS_FLOOR * inst.y.iter().map(|&v| f64_of(v * v)).sum::<f64>();
    let mut half_costs = Vec::new();

    let alt_cost = |u: &[Cplx<T>], p: &[Cplx<T>]| -> T {
        u.iter().zip(p).zip(&mag).map(|((ui, pi), &r)| (ui * r - pi).norm_sqr()).sum()
    };

    let mut x = x0.into_values();
    let mut prev = f64_of(inst.ls_cost(&x)?);
    for k in 1..=cfg.max_iter {
        let p = ens.project(&x)?;
        let u: Vec<Cplx<T>> = p
            .iter()
            .map(|v| {
                let r = v.norm();
                if r > T::zero() {
                    v / r
                } else {
                    Cplx::new(T::one(), T::zero())
                }
            })
            .collect();
        half_costs.push(f64_of(alt_cost(&u, &p)));
        let mut rhs = vec![Cplx::new(T::zero(), T::zero()); n];
        for (i, (ui, &r)) in u.iter().zip(&mag).enumerate() {
            let t = ui * r;
            for (rk, ak) in rhs.iter_mut().zip(ens.column(i)) {
                *rk += ak * t;
            }
        }
        x = complex_cholesky_solve(&chol, &rhs);
        let p_new = ens.project(&x)?;
        let alt = f64_of(alt_cost(&u, &p_new));
        half_costs.push(alt);
        let cost = f64_of(inst.ls_cost(&x)?);
        if !cost.is_finite() {
            return Err(Error::NumericalFailure {
                iteration: k,
                reason: "Gerchberg-Saxton iterate is not finite".into(),
            });
        }
        trace.push(TraceRecord {
            iteration: k,
            objective: alt,
            slack_sum: 0.0,
            estimate_norm: f64_of(norm_sqr(&x).sqrt()),
            ls_cost: cost,
            inherited_violation: 0.0,
            inner_iterations: 0,
            inexact: false,
        });
        if converged(prev, cost, cfg.tol, floor) {
            trace.converged = true;
            break;
        }
        prev = cost;
    }
    Ok((ComplexSignal::new(x)?, trace, half_costs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurements::gaussian_ensemble;
    use crate::signal::error_report;
    use rand::Rng;

    fn noiseless(n: usize, m: usize, seed: u64) -> RetrievalInstance<f64> {
        let ens = gaussian_ensemble(n, m, seed).unwrap();
        let x = ComplexSignal::random(n, seed + 1000).unwrap();
        RetrievalInstance::simulate(ens, x, 0.0, 0).unwrap()
    }

    fn rel_err(inst: &RetrievalInstance<f64>, x: &ComplexSignal<f64>) -> f64 {
        let t = inst.truth.as_ref().unwrap();
        (error_report(x, t).unwrap().sq_err_signal / t.norm_sqr()).sqrt()
    }

    fn cosine(a: &[Cplx<f64>], b: &[Cplx<f64>]) -> f64 {
        crate::scalar::inner(a, b).norm() / (norm_sqr(a) * norm_sqr(b)).sqrt()
    }

    #[test]
    fn spectral_picks_dominant_measurement() {
        let ens = gaussian_ensemble::<f64>(4, 12, 1).unwrap();
        let mut y = vec![0.01; 12];
        y[5] = 1e9;
        let inst = RetrievalInstance::new(ens.clone(), y, 0.0, None).unwrap();
        let (z, _) = spectral_init(&inst).unwrap();
        assert!(1.0 - cosine(z.values(), ens.column(5)) < 1e-12);
    }

    #[test]
    fn spectral_aligns_with_truth_and_is_deterministic() {
        let inst = noiseless(4, 256, 2);
        let (z, s) = spectral_init(&inst).unwrap();
        assert!(cosine(z.values(), inst.truth.as_ref().unwrap().values()) > 0.9);
        assert!((z.norm() - s).abs() < 1e-12);
        let (z2, _) = spectral_init(&inst).unwrap();
        assert_eq!(z, z2);
    }

    #[test]
    fn spectral_rejects_zero_measurements() {
        let ens = gaussian_ensemble::<f64>(3, 6, 3).unwrap();
        let inst = RetrievalInstance::new(ens, vec![0.0; 6], 0.0, None).unwrap();
        assert!(matches!(spectral_init(&inst), Err(Error::ZeroSignal(_))));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = crate::rng::stream(7, crate::rng::Stream::Init);
        let ens = gaussian_ensemble::<f64>(5, 20, 4).unwrap();
        let y: Vec<f64> = (0..20).map(|_| rng.gen_range(0.0..10.0)).collect();
        let inst = RetrievalInstance::new(ens, y, 0.1, None).unwrap();
        for _ in 0..20 {
            let x: Vec<Cplx<f64>> = (0..5).map(|_| crate::rng::complex_normal(&mut rng, 1.0)).collect();
            let d: Vec<Cplx<f64>> = (0..5).map(|_| crate::rng::complex_normal(&mut rng, 1.0)).collect();
            let g = ls_gradient(&inst, &x).unwrap();
            let analytic: f64 = g.iter().zip(&d).map(|(a, b)| (a.conj() * b).re).sum();
            let h = 1e-6;
            let shift = |s: f64| -> Vec<Cplx<f64>> { x.iter().zip(&d).map(|(a, b)| a + b * s).collect() };
            let numeric = (inst.ls_cost(&shift(h)).unwrap() - inst.ls_cost(&shift(-h)).unwrap()) / (2.0 * h);
            assert!((analytic - numeric).abs() <= 1e-5 * analytic.abs().max(1.0));
        }
    }

    #[test]
    fn wf_at_truth_is_stationary() {
        let inst = noiseless(6, 48, 5);
        let t = inst.truth.clone().unwrap();
        let g = ls_gradient(&inst, t.values()).unwrap();
        assert!(norm_sqr(&g).sqrt() < 1e-10);
        let cfg = BaselineConfig { init: InitStrategy::Given { signal: t.clone() }, ..Default::default() };
        let (x, tr) = wirtinger_flow(&inst, &cfg).unwrap();
        assert!(tr.converged && tr.iterations == 1);
        assert!(rel_err(&inst, &x) < 1e-12);
    }

    #[test]
    fn wf_recovers_noiseless_signal() {
        let inst = noiseless(16, 128, 6);
        let (x, tr) = wirtinger_flow(&inst, &BaselineConfig::default()).unwrap();
        assert!(rel_err(&inst, &x) < 1e-3, "err {} after {}", rel_err(&inst, &x), tr.iterations);
    }

    #[test]
    fn wf_reports_nan_as_numerical_failure() {
        let mut inst = noiseless(4, 16, 7);
        inst.y[0] = 1e300;
        let cfg = BaselineConfig {
            step_schedule: StepSchedule { mu_max: 1e6, tau0: 1e-3 },
            init: InitStrategy::Random { seed: 1 },
            ..Default::default()
        };
        match wirtinger_flow(&inst, &cfg) {
            Err(e) => assert!(e.is_numerical()),
            Ok((x, _)) => panic!("expected failure, got {:?}", x.values()[0]),
        }
    }

    #[test]
    fn gs_fixed_point_at_truth() {
        let inst = noiseless(6, 48, 8);
        let t = inst.truth.clone().unwrap();
        let cfg = BaselineConfig { init: InitStrategy::Given { signal: t }, ..Default::default() };
        let (x, tr) = gerchberg_saxton(&inst, &cfg).unwrap();
        assert!(tr.records[0].objective < 1e-20);
        assert!(rel_err(&inst, &x) < 1e-12);
    }

    #[test]
    fn gs_alternating_cost_is_monotone() {
        let ens = gaussian_ensemble::<f64>(8, 40, 9).unwrap();
        let x = ComplexSignal::random(8, 9).unwrap();
        let inst = RetrievalInstance::simulate(ens, x, 0.5, 3).unwrap();
        let cfg = BaselineConfig { init: InitStrategy::Random { seed: 4 }, max_iter: 300, ..Default::default() };
        let (_, _, half) = gerchberg_saxton_detailed(&inst, &cfg).unwrap();
        for w in half.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
        }
    }

    #[test]
    fn gs_recovers_noiseless_signal() {
        let inst = noiseless(8, 64, 10);
        let (x, _) = gerchberg_saxton(&inst, &BaselineConfig::default()).unwrap();
        assert!(rel_err(&inst, &x) < 1e-3);
    }

    #[test]
    fn baselines_are_phase_equivariant() {
        let inst = noiseless(6, 48, 11);
        let z = ComplexSignal::random(6, 99).unwrap();
        let cfg_a =
            BaselineConfig { init: InitStrategy::Given { signal: z.clone() }, max_iter: 50, ..Default::default() };
        let cfg_b = BaselineConfig { init: InitStrategy::Given { signal: z.rotated(0.9) }, ..cfg_a.clone() };
        for f in [wirtinger_flow::<f64>, gerchberg_saxton::<f64>] {
            let (a, _) = f(&inst, &cfg_a).unwrap();
            let (b, _) = f(&inst, &cfg_b).unwrap();
            let d: f64 = a.rotated(0.9).values().iter().zip(b.values()).map(|(p, q)| (p - q).norm_sqr()).sum();
            assert!(d.sqrt() < 1e-9 * a.norm());
        }
    }

    #[test]
    fn step_schedule_ramps_to_cap() {
        let s = StepSchedule::default();
        assert!(s.mu(1) < 0.01);
        assert!((s.mu(50_000) - 0.4).abs() < 1e-15);
    }
}
