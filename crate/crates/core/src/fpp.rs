//! Feasible point pursuit for phase retrieval.
//!
//! Each outer iteration linearizes the non-convex lower bound
//! `|a_iᴴx|² ≥ t` around the current point `z` via
//! `|a_iᴴx|² ≥ 2Re{(a_iᴴz)*(a_iᴴx)} − |a_iᴴz|²`, solves the resulting convex
//! program and moves `z` to its solution. The previous solution stays
//! feasible for the next program, so the optimal values never increase.
//!
//! - B-FPP, bounded errors `|y_i − |a_iᴴx|²| ≤ ε`:
//!   `min ‖x‖² + λΣs_i` s.t. `|a_iᴴx|² ≤ y_i + ε`,
//!   `2Re{(a_iᴴz)*(a_iᴴx)} + s_i ≥ |a_iᴴz|² + y_i − ε`, `s ≥ 0`.
//! - LS-FPP, least squares with `w_i = y_i − |a_iᴴx|²`:
//!   `min ‖w‖² + λΣs_i` s.t. `2Re{(a_iᴴz)*(a_iᴴx)} + w_i + s_i ≥ y_i + |a_iᴴz|²`,
//!   `|a_iᴴx|² + w_i ≤ y_i`, `s ≥ 0`.
//!
//! The sparse variants run the same loops over dictionary coefficients `x̃`
//! with `b_i = Ṽᴴa_i`, adding an ℓ1 penalty on `x̃`.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::baselines::{initial_point, InitStrategy};
use crate::conic::{
    solve, AffineExpr, BlockId, BlockValues, ConicProgram, ConicStatus, Constraint, ObjectiveTerm, SolverOptions,
};
use crate::error::{check_dim, Error, Result};
use crate::measurements::Dictionary;
use crate::scalar::{inner, norm_sqr, Cplx, Real};
use crate::signal::{ComplexSignal, MeasurementEnsemble, RetrievalInstance};
use crate::trace::{converged, Trace, TraceRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FppConfig<T: Real> {
    /// Slack penalty of the plain variants.
    pub lambda: T,
    /// B-FPP half-width in squared-magnitude units; `None` uses `σ_n`.
    pub epsilon: Option<T>,
    /// Sparse B-FPP: slack penalty. Sparse LS-FPP: ℓ1 weight.
    pub lambda1: T,
    /// Sparse LS-FPP: slack penalty.
    pub lambda2: T,
    pub outer_tol: f64,
    pub max_outer: usize,
    pub init: InitStrategy<T>,
    /// Absolute duality-gap tolerance of each convex solve.
    pub inner_tol: f64,
    pub inner_max_iter: u32,
}

impl<T: Real> Default for FppConfig<T> {
    fn default() -> Self {
        FppConfig {
            lambda: T::lit(10.0),
            epsilon: None,
            lambda1: T::one(),
            lambda2: T::lit(10.0),
            outer_tol: 1e-7,
            max_outer: 100,
            init: InitStrategy::Spectral,
            inner_tol: 1e-8,
            inner_max_iter: 100,
        }
    }
}

impl<T: Real> FppConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: T, name: &str| -> Result<()> {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive")))
            }
        };
        pos(self.lambda, "lambda")?;
        pos(self.lambda1, "lambda1")?;
        pos(self.lambda2, "lambda2")?;
        if let Some(e) = self.epsilon {
            if !(e >= T::zero()) || !e.is_finite() {
                return Err(Error::invalid("epsilon must be nonnegative"));
            }
        }
        if !(self.outer_tol > 0.0) {
            return Err(Error::invalid("outer_tol must be positive"));
        }
        if self.max_outer < 1 {
            return Err(Error::invalid("max_outer must be at least 1"));
        }
        if !(self.inner_tol > 0.0) || self.inner_max_iter < 1 {
            return Err(Error::invalid("inner solver settings must be positive"));
        }
        Ok(())
    }

    pub fn epsilon_for(&self, sigma_n: T) -> T {
        self.epsilon.unwrap_or(sigma_n)
    }

    fn solver_options(&self) -> SolverOptions<T> {
        SolverOptions { tol: T::lit(self.inner_tol), max_iter: self.inner_max_iter }
    }
}

/// Block handles of a subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubproblemVars {
    pub x: BlockId,
    pub s: BlockId,
    /// Residual split `w` (LS variants only).
    pub w: Option<BlockId>,
}

/// Penalty on the signal block.
#[derive(Debug, Clone, Copy, PartialEq)]
enum SignalTerm<T> {
    SquaredNorm,
    L1(T),
    None,
}

fn add_signal_term<T: Real>(p: &mut ConicProgram<T>, x: BlockId, term: SignalTerm<T>) {
    match term {
        SignalTerm::SquaredNorm => p.add_objective(ObjectiveTerm::SquaredNorm { block: x, weight: T::one() }),
        SignalTerm::L1(w) => p.add_objective(ObjectiveTerm::L1 { block: x, weight: w }),
        SignalTerm::None => {}
    }
}

fn slack_objective<T: Real>(p: &mut ConicProgram<T>, s: BlockId, m: usize, weight: T) {
    let e = (0..m).fold(AffineExpr::constant(T::zero()), |e, i| e.real(s, i, weight));
    p.add_objective(ObjectiveTerm::Linear(e));
    for i in 0..m {
        p.add_constraint(Constraint::Linear(AffineExpr::constant(T::zero()).real(s, i, T::one())));
    }
}

fn bounded_program<T: Real>(
    ens: &MeasurementEnsemble<T>,
    y: &[T],
    z: &[Cplx<T>],
    eps: T,
    signal: SignalTerm<T>,
    slack_weight: T,
) -> Result<(ConicProgram<T>, SubproblemVars)> {
    check_dim("measurement vector length", ens.m(), y.len())?;
    check_dim("linearization point length", ens.n(), z.len())?;
    let m = ens.m();
    let mut p = ConicProgram::new();
    let x = p.complex_block("x", ens.n());
    let s = p.real_block("s", m);
    add_signal_term(&mut p, x, signal);
    slack_objective(&mut p, s, m, slack_weight);
    let two = T::lit(2.0);
    for (i, (a, &yi)) in ens.columns().zip(y).enumerate() {
        let upper = (yi + eps).max(T::zero());
        p.add_constraint(Constraint::SocRank1 { block: x, a: a.to_vec(), rhs: AffineExpr::constant(upper) });
        let c = inner(a, z);
        let g: Vec<Cplx<T>> = a.iter().map(|ak| ak * c).collect();
        p.add_constraint(Constraint::Linear(
            AffineExpr::constant(-(c.norm_sqr() + yi - eps)).re_inner(x, &g, two).real(s, i, T::one()),
        ));
    }
    Ok((p, SubproblemVars { x, s, w: None }))
}

fn ls_program<T: Real>(
    ens: &MeasurementEnsemble<T>,
    y: &[T],
    z: &[Cplx<T>],
    signal: SignalTerm<T>,
    slack_weight: T,
) -> Result<(ConicProgram<T>, SubproblemVars)> {
    check_dim("measurement vector length", ens.m(), y.len())?;
    check_dim("linearization point length", ens.n(), z.len())?;
    let m = ens.m();
    let mut p = ConicProgram::new();
    let x = p.complex_block("x", ens.n());
    let w = p.real_block("w", m);
    let s = p.real_block("s", m);
    p.add_objective(ObjectiveTerm::SquaredNorm { block: w, weight: T::one() });
    add_signal_term(&mut p, x, signal);
    slack_objective(&mut p, s, m, slack_weight);
    let two = T::lit(2.0);
    for (i, (a, &yi)) in ens.columns().zip(y).enumerate() {
        let c = inner(a, z);
        let g: Vec<Cplx<T>> = a.iter().map(|ak| ak * c).collect();
        p.add_constraint(Constraint::Linear(
            AffineExpr::constant(-(yi + c.norm_sqr())).re_inner(x, &g, two).real(w, i, T::one()).real(s, i, T::one()),
        ));
        p.add_constraint(Constraint::SocRank1 {
            block: x,
            a: a.to_vec(),
            rhs: AffineExpr::constant(yi).real(w, i, -T::one()),
        });
    }
    Ok((p, SubproblemVars { x, s, w: Some(w) }))
}

/// Logs once per solve how many upper bounds `y_i + ε` are negative; the
/// programs clip them to 0.
fn warn_clipped<T: Real>(name: &str, y: &[T], eps: T) {
    let neg: Vec<usize> = y.iter().enumerate().filter(|(_, &v)| v + eps < T::zero()).map(|(i, _)| i).collect();
    if let Some(&first) = neg.first() {
        warn!("{name}: {} upper bounds y + eps are negative (first: measurement {first}); clipped to 0", neg.len());
    }
}

/// B-FPP subproblem linearized at `z`.
pub fn build_bfpp_subproblem<T: Real>(
    inst: &RetrievalInstance<T>,
    z: &ComplexSignal<T>,
    cfg: &FppConfig<T>,
) -> Result<(ConicProgram<T>, SubproblemVars)> {
    let eps = cfg.epsilon_for(inst.sigma_n);
    warn_clipped("bfpp", &inst.y, eps);
    bounded_program(&inst.ensemble, &inst.y, z.values(), eps, SignalTerm::SquaredNorm, cfg.lambda)
}

/// LS-FPP subproblem linearized at `z`.
pub fn build_lsfpp_subproblem<T: Real>(
    inst: &RetrievalInstance<T>,
    z: &ComplexSignal<T>,
    cfg: &FppConfig<T>,
) -> Result<(ConicProgram<T>, SubproblemVars)> {
    ls_program(&inst.ensemble, &inst.y, z.values(), SignalTerm::None, cfg.lambda)
}

/// Sparse B-FPP subproblem over dictionary coefficients.
pub fn build_sparse_bfpp_subproblem<T: Real>(
    projected: &MeasurementEnsemble<T>,
    y: &[T],
    z: &[Cplx<T>],
    eps: T,
    cfg: &FppConfig<T>,
) -> Result<(ConicProgram<T>, SubproblemVars)> {
    warn_clipped("sparse_bfpp", y, eps);
    bounded_program(projected, y, z, eps, SignalTerm::L1(T::one()), cfg.lambda1)
}

/// Sparse LS-FPP subproblem over dictionary coefficients.
pub fn build_sparse_lsfpp_subproblem<T: Real>(
    projected: &MeasurementEnsemble<T>,
    y: &[T],
    z: &[Cplx<T>],
    cfg: &FppConfig<T>,
) -> Result<(ConicProgram<T>, SubproblemVars)> {
    ls_program(projected, y, z, SignalTerm::L1(cfg.lambda1), cfg.lambda2)
}

/// Moves a point onto the exact feasible set of a program: `x` is scaled
/// into the cone constraints (shrinking toward zero keeps every
/// `|a_iᴴx|² ≤ r_i` with `r_i > 0` satisfiable), then the split and slack
/// variables are set to their optimal values for that `x`.
fn repair<T: Real>(
    ens: &MeasurementEnsemble<T>,
    y: &[T],
    z: &[Cplx<T>],
    eps: Option<T>,
    slack_weight: T,
    vars: SubproblemVars,
    values: &mut BlockValues<T>,
) {
    let mut x = values.complex(vars.x).to_vec();
    let c: Vec<Cplx<T>> = ens.columns().map(|a| inner(a, z)).collect();
    let two = T::lit(2.0);
    let s = match (vars.w, eps) {
        (None, Some(eps)) => {
            // Bounds clipped to zero force a_iᴴx = 0, which scaling cannot
            // reach: project x off the span of those columns first.
            let mut basis: Vec<Vec<Cplx<T>>> = Vec::new();
            for (a, &yi) in ens.columns().zip(y) {
                if yi + eps <= T::zero() {
                    let mut q = a.to_vec();
                    for b in &basis {
                        let p = inner(b, &q);
                        q.iter_mut().zip(b).for_each(|(qk, bk)| *qk -= bk * p);
                    }
                    let nq = norm_sqr(&q).sqrt();
                    if nq > T::lit(1e-12) * norm_sqr(a).sqrt() {
                        basis.push(q.into_iter().map(|v| v / nq).collect());
                    }
                }
            }
            for b in &basis {
                let p = inner(b, &x);
                x.iter_mut().zip(b).for_each(|(xk, bk)| *xk -= bk * p);
            }
            let mut t = T::one();
            for (a, &yi) in ens.columns().zip(y) {
                let r = (yi + eps).max(T::zero());
                let p = inner(a, &x).norm_sqr();
                if p > r && r > T::zero() {
                    t = t.min((r / p).sqrt());
                }
            }
            if t < T::one() {
                x.iter_mut().for_each(|v| *v *= t);
            }
            ens.columns()
                .enumerate()
                .map(|(i, a)| {
                    let need = c[i].norm_sqr() + y[i] - eps - two * (c[i].conj() * inner(a, &x)).re;
                    need.max(T::zero())
                })
                .collect()
        }
        (Some(wid), _) => {
            // Per measurement: min w² + λ·max(0, lo − w) over w ≤ y − |u|².
            let half = slack_weight / two;
            let mut w = Vec::with_capacity(y.len());
            let mut s = Vec::with_capacity(y.len());
            for (i, a) in ens.columns().enumerate() {
                let u = inner(a, &x);
                let lo = y[i] + c[i].norm_sqr() - two * (c[i].conj() * u).re;
                let hi = y[i] - u.norm_sqr();
                let wi = if lo > T::zero() { lo.min(half) } else { T::zero() }.min(hi);
                w.push(wi);
                s.push((lo - wi).max(T::zero()));
            }
            values.set_real(wid, w);
            s
        }
        (None, None) => unreachable!("bounded programs carry epsilon"),
    };
    values.set_complex(vars.x, x);
    values.set_real(vars.s, s);
}

fn f64_of<T: Real>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

fn ls_cost<T: Real>(ens: &MeasurementEnsemble<T>, y: &[T], x: &[Cplx<T>]) -> f64 {
    ens.columns()
        .zip(y)
        .map(|(a, &yi)| {
            let r = f64_of(yi - inner(a, x).norm_sqr());
            r * r
        })
        .sum()
}

/// Shared outer loop. `build` returns the subproblem at `z`.
fn outer_loop<T: Real>(
    name: &str,
    ens: &MeasurementEnsemble<T>,
    y: &[T],
    eps: Option<T>,
    slack_weight: T,
    cfg: &FppConfig<T>,
    build: impl Fn(&[Cplx<T>]) -> Result<(ConicProgram<T>, SubproblemVars)>,
) -> Result<(ComplexSignal<T>, Trace)> {
    cfg.validate()?;
    let (z0, scale) = initial_point(ens, y, &cfg.init)?;
    let mut trace = Trace::new(name);
    trace.init_scale = scale.map(f64_of);
    let floor = cfg.inner_tol;

    let mut z = z0.into_values();
    let mut prev_values: Option<(SubproblemVars, BlockValues<T>)> = None;
    let mut prev_obj = f64::INFINITY;
    for k in 1..=cfg.max_outer {
        let (program, vars) = build(&z)?;
        let inherited_violation = match &prev_values {
            Some((pv, v)) => {
                debug_assert_eq!(*pv, vars);
                f64_of(program.max_violation(v))
            }
            None => 0.0,
        };
        let sol = solve(&program, cfg.solver_options())?;
        let inexact = sol.status != ConicStatus::Optimal;
        let inner_iterations = sol.iterations;
        if sol.status == ConicStatus::Infeasible || (inexact && prev_values.is_none()) {
            return Err(Error::SolverFailure { iteration: k, status: format!("{} ({})", sol.status, sol.raw_status) });
        }
        let mut values = sol.values;
        repair(ens, y, &z, eps, slack_weight, vars, &mut values);
        if let Some((_, mut inherited)) = prev_values.take() {
            // The previous iterate stays feasible for this subproblem, so its
            // value bounds the optimum; a solver point worse by more than the
            // solve tolerance is inaccurate and loses to it.
            repair(ens, y, &z, eps, slack_weight, vars, &mut inherited);
            let cand = program.objective_value(&values);
            let keep = program.objective_value(&inherited) + T::lit(cfg.inner_tol);
            if inexact && cand <= keep {
                debug!(
                    "{name}: outer iteration {k}: inner solve ended with {} ({}); accepting repaired point",
                    sol.status, sol.raw_status
                );
            } else if inexact {
                warn!(
                    "{name}: outer iteration {k}: inner solve ended with {} ({}); keeping previous point",
                    sol.status, sol.raw_status
                );
            }
            if !(cand <= keep) {
                values = inherited;
            }
        }
        let obj = f64_of(program.objective_value(&values));
        let x = values.complex(vars.x).to_vec();
        if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NumericalFailure { iteration: k, reason: "subproblem solution is not finite".into() });
        }
        trace.push(TraceRecord {
            iteration: k,
            objective: obj,
            slack_sum: f64_of(values.real(vars.s).iter().copied().sum::<T>()),
            estimate_norm: f64_of(norm_sqr(&x).sqrt()),
            ls_cost: ls_cost(ens, y, &x),
            inherited_violation,
            inner_iterations,
            inexact,
        });
        z = x;
        prev_values = Some((vars, values));
        if k > 1 && converged(prev_obj, obj, cfg.outer_tol, floor) {
            trace.converged = true;
            break;
        }
        prev_obj = obj;
    }
    Ok((ComplexSignal::new(z)?, trace))
}

/// Runs B-FPP from `cfg.init`; ε defaults to the instance σ_n.
pub fn run_bfpp<T: Real>(inst: &RetrievalInstance<T>, cfg: &FppConfig<T>) -> Result<(ComplexSignal<T>, Trace)> {
    inst.validate()?;
    let eps = cfg.epsilon_for(inst.sigma_n);
    warn_clipped("bfpp", &inst.y, eps);
    outer_loop("bfpp", &inst.ensemble, &inst.y, Some(eps), cfg.lambda, cfg, |z| {
        bounded_program(&inst.ensemble, &inst.y, z, eps, SignalTerm::SquaredNorm, cfg.lambda)
    })
}

/// Runs LS-FPP from `cfg.init`.
pub fn run_lsfpp<T: Real>(inst: &RetrievalInstance<T>, cfg: &FppConfig<T>) -> Result<(ComplexSignal<T>, Trace)> {
    inst.validate()?;
    outer_loop("lsfpp", &inst.ensemble, &inst.y, None, cfg.lambda, cfg, |z| {
        ls_program(&inst.ensemble, &inst.y, z, SignalTerm::None, cfg.lambda)
    })
}

fn check_projected<T: Real>(projected: &MeasurementEnsemble<T>, y: &[T], dict: &Dictionary<T>) -> Result<()> {
    check_dim("projected ensemble dimension vs dictionary size", dict.p(), projected.n())?;
    check_dim("measurement vector length", projected.m(), y.len())?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("measurements must be finite"));
    }
    Ok(())
}

/// Sparse B-FPP over `x̃ ∈ ℂᴾ`: `min ‖x̃‖₁ + λ₁Σs_i` with the interval
/// constraints in `b_i = Ṽᴴa_i`. `epsilon` must be set in `cfg` or is taken as 0.
pub fn run_sparse_bfpp<T: Real>(
    projected: &MeasurementEnsemble<T>,
    y: &[T],
    dict: &Dictionary<T>,
    cfg: &FppConfig<T>,
) -> Result<(ComplexSignal<T>, Trace)> {
    check_projected(projected, y, dict)?;
    let eps = cfg.epsilon.unwrap_or(T::zero());
    warn_clipped("sparse_bfpp", y, eps);
    outer_loop("sparse_bfpp", projected, y, Some(eps), cfg.lambda1, cfg, |z| {
        bounded_program(projected, y, z, eps, SignalTerm::L1(T::one()), cfg.lambda1)
    })
}

/// Sparse LS-FPP over `x̃ ∈ ℂᴾ`: `min ‖w‖² + λ₁‖x̃‖₁ + λ₂Σs_i`.
pub fn run_sparse_lsfpp<T: Real>(
    projected: &MeasurementEnsemble<T>,
    y: &[T],
    dict: &Dictionary<T>,
    cfg: &FppConfig<T>,
) -> Result<(ComplexSignal<T>, Trace)> {
    check_projected(projected, y, dict)?;
    outer_loop("sparse_lsfpp", projected, y, None, cfg.lambda2, cfg, |z| {
        ls_program(projected, y, z, SignalTerm::L1(cfg.lambda1), cfg.lambda2)
    })
}

/// Grid frequencies of the `l` largest-magnitude entries of `coeffs`,
/// skipping bins adjacent to an already selected one. Ascending order;
/// ties go to the lower frequency.
pub fn refine_frequencies<T: Real>(coeffs: &[Cplx<T>], dict: &Dictionary<T>, l: usize) -> Result<Vec<T>> {
    check_dim("coefficient length vs dictionary size", dict.p(), coeffs.len())?;
    if l == 0 {
        return Err(Error::invalid("need at least one frequency"));
    }
    let mut order: Vec<usize> = (0..coeffs.len()).filter(|&p| coeffs[p].norm() > T::zero()).collect();
    order.sort_by(|&a, &b| {
        coeffs[b]
            .norm()
            .partial_cmp(&coeffs[a].norm())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(dict.grid[a].partial_cmp(&dict.grid[b]).unwrap_or(std::cmp::Ordering::Equal))
    });
    let mut picked: Vec<usize> = Vec::with_capacity(l);
    for p in order {
        if picked.iter().all(|&q| p.abs_diff(q) > 1) {
            picked.push(p);
            if picked.len() == l {
                break;
            }
        }
    }
    if picked.len() < l {
        return Err(Error::invalid(format!("only {} separated nonzero bins, {l} requested", picked.len())));
    }
    let mut f: Vec<T> = picked.into_iter().map(|p| dict.grid[p]).collect();
    f.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(f)
}
