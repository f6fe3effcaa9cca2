//! Monte-Carlo execution of an [`ExperimentSpec`].

use fpp_core::baselines::{gerchberg_saxton, wirtinger_flow};
use fpp_core::crb::{fim_amp_phase, fim_complex};
use fpp_core::fpp::{refine_frequencies, run_bfpp, run_lsfpp, run_sparse_bfpp, run_sparse_lsfpp};
use fpp_core::measurements::{project_dictionary, Dictionary};
use fpp_core::rng::{derive_seed, label};
use fpp_core::scalar::to_db;
use fpp_core::signal::{db_to_linear, error_report, sigma_from_snr, ComplexSignal, ErrorReport, MeasurementEnsemble};
use fpp_core::{Instance, Signal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::spec::{Algorithm, ExperimentSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    /// Signal MSE above 0 dB.
    Outage,
    /// The solver returned an error; no estimate.
    Failure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub algorithm: Algorithm,
    pub snr_db: f64,
    pub trial: usize,
    pub sigma_n: f64,
    pub outcome: Outcome,
    pub report: Option<ErrorReport>,
    pub iterations: usize,
    pub inexact_steps: usize,
    pub ls_cost: Option<f64>,
    pub error: Option<String>,
    /// Sparse variants: peak-picked frequencies (radians, ascending).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<Vec<f64>>,
    /// Sparse variants: `|x̃|` over the dictionary grid, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<Vec<f64>>,
}

/// Bounds of one trial instance; shared by every algorithm of that trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrbSample {
    pub snr_db: f64,
    pub trial: usize,
    /// `tr CRB` of the (Re, Im) parametrization.
    pub signal: Option<f64>,
    pub amplitude: Option<f64>,
    pub phase: Option<f64>,
}

/// Aggregates of one (algorithm, SNR) cell. MSEs average the squared errors
/// of successful trials linearly, then convert to dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub algorithm: Algorithm,
    pub snr_db: f64,
    pub trials: usize,
    pub successes: usize,
    pub outages: usize,
    pub failures: usize,
    pub outage_fraction: f64,
    pub failure_fraction: f64,
    pub mse_signal_db: Option<f64>,
    pub mse_amplitude_db: Option<f64>,
    pub mse_phase_db: Option<f64>,
    /// Mean and standard error of the linear signal squared error.
    pub mse_signal_linear: Option<f64>,
    pub mse_signal_stderr: Option<f64>,
    pub crb_signal_db: Option<f64>,
    pub crb_amplitude_db: Option<f64>,
    pub crb_phase_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub cells: Vec<CellSummary>,
    pub records: Vec<TrialRecord>,
    pub crb: Vec<CrbSample>,
}

impl ExperimentResult {
    pub fn cell(&self, algorithm: Algorithm, snr_db: f64) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.algorithm == algorithm && c.snr_db.to_bits() == snr_db.to_bits())
    }
}

/// Seed labels. Instance draws never depend on the algorithm, so every
/// solver sees the same ensemble and noise in a given trial.
pub fn ensemble_seed(spec: &ExperimentSpec, trial: usize) -> u64 {
    if spec.fixed_ensemble {
        derive_seed(spec.base_seed, &[label("ensemble")])
    } else {
        derive_seed(spec.base_seed, &[label("ensemble"), trial as u64])
    }
}

pub fn noise_seed(spec: &ExperimentSpec, snr_db: f64, trial: usize) -> u64 {
    derive_seed(spec.base_seed, &[label("noise"), snr_db.to_bits(), trial as u64])
}

pub fn algorithm_seed(spec: &ExperimentSpec, algorithm: Algorithm, snr_db: f64, trial: usize) -> u64 {
    derive_seed(spec.base_seed, &[label(algorithm.name()), snr_db.to_bits(), trial as u64])
}

/// Noise level for a target SNR on a given ensemble; `+inf` is noiseless.
pub fn sigma_for(ens: &MeasurementEnsemble<f64>, x: &Signal, snr_db: f64) -> Result<f64> {
    if snr_db == f64::INFINITY {
        Ok(0.0)
    } else {
        Ok(sigma_from_snr(ens, x, db_to_linear(snr_db))?)
    }
}

/// Runs every (algorithm, SNR, trial) combination. Deterministic given
/// `spec`; `jobs` caps the worker count (`None` uses the global pool).
pub fn run_experiment(spec: &ExperimentSpec, jobs: Option<usize>) -> Result<ExperimentResult> {
    spec.validate()?;
    let truth = spec.signal.build(spec.ensemble.n)?;
    let sparse = if spec.algorithms.iter().any(|a| a.is_sparse()) {
        Some(spec.dictionary().build(spec.ensemble.n)?)
    } else {
        None
    };
    let tasks: Vec<(f64, usize)> =
        spec.snr_grid_db.iter().flat_map(|&s| (0..spec.trials).map(move |t| (s, t))).collect();
    let work = || -> Result<Vec<(Vec<TrialRecord>, CrbSample)>> {
        tasks.par_iter().map(|&(snr, t)| run_trial(spec, &truth, sparse.as_ref(), snr, t)).collect()
    };
    let out = crate::sweep::with_jobs(jobs, work)??;
    let mut records = Vec::with_capacity(out.len() * spec.algorithms.len());
    let mut crb = Vec::with_capacity(out.len());
    for (r, c) in out {
        records.extend(r);
        crb.push(c);
    }
    let snr_index = |s: f64| spec.snr_grid_db.iter().position(|g| g.to_bits() == s.to_bits()).unwrap_or(0);
    let alg_index = |a: Algorithm| spec.algorithms.iter().position(|&b| b == a).unwrap_or(0);
    records.sort_by_key(|r| (alg_index(r.algorithm), snr_index(r.snr_db), r.trial));
    crb.sort_by_key(|c| (snr_index(c.snr_db), c.trial));
    let cells = summarize(spec, &records, &crb);
    Ok(ExperimentResult { spec: spec.clone(), cells, records, crb })
}

fn run_trial(
    spec: &ExperimentSpec,
    truth: &Signal,
    dict: Option<&Dictionary<f64>>,
    snr_db: f64,
    trial: usize,
) -> Result<(Vec<TrialRecord>, CrbSample)> {
    let ens = spec.ensemble.draw(ensemble_seed(spec, trial))?;
    let sigma = sigma_for(&ens, truth, snr_db)?;
    let inst = Instance::simulate(ens, truth.clone(), sigma, noise_seed(spec, snr_db, trial))?;
    let crb = if spec.crb { crb_sample(&inst, truth, snr_db, trial) } else { CrbSample::empty(snr_db, trial) };
    let projected = match dict {
        Some(d) => Some(project_dictionary(&inst.ensemble, d)?),
        None => None,
    };
    let records = spec
        .algorithms
        .iter()
        .map(|&alg| {
            let init = spec.init.strategy(algorithm_seed(spec, alg, snr_db, trial));
            let sparse = match (dict, projected.as_ref()) {
                (Some(d), Some(p)) => Some((d, p)),
                _ => None,
            };
            solve_one(spec, &inst, truth, sparse, alg, init, snr_db, trial)
        })
        .collect();
    Ok((records, crb))
}

impl CrbSample {
    fn empty(snr_db: f64, trial: usize) -> Self {
        CrbSample { snr_db, trial, signal: None, amplitude: None, phase: None }
    }
}

fn crb_sample(inst: &Instance, truth: &Signal, snr_db: f64, trial: usize) -> CrbSample {
    let mut s = CrbSample::empty(snr_db, trial);
    if !(inst.sigma_n > 0.0) {
        return s;
    }
    s.signal = fim_complex(&inst.ensemble, truth, inst.sigma_n).ok().map(|f| f.crb_trace());
    if let Ok(ap) = fim_amp_phase(&inst.ensemble, truth, inst.sigma_n) {
        s.amplitude = Some(ap.crb_b.trace());
        s.phase = Some(ap.crb_theta.trace());
    }
    s
}

#[allow(clippy::too_many_arguments)]
fn solve_one(
    spec: &ExperimentSpec,
    inst: &Instance,
    truth: &Signal,
    sparse: Option<(&Dictionary<f64>, &MeasurementEnsemble<f64>)>,
    alg: Algorithm,
    init: fpp_core::baselines::InitStrategy<f64>,
    snr_db: f64,
    trial: usize,
) -> TrialRecord {
    let mut rec = TrialRecord {
        algorithm: alg,
        snr_db,
        trial,
        sigma_n: inst.sigma_n,
        outcome: Outcome::Failure,
        report: None,
        iterations: 0,
        inexact_steps: 0,
        ls_cost: None,
        error: None,
        frequencies: None,
        spectrum: None,
    };
    let fpp = spec.fpp.config(init.clone());
    let base = spec.baseline.config(init);
    let solved: fpp_core::Result<(Signal, fpp_core::Trace)> = match alg {
        Algorithm::Bfpp => run_bfpp(inst, &fpp),
        Algorithm::Lsfpp => run_lsfpp(inst, &fpp),
        Algorithm::Wf => wirtinger_flow(inst, &base),
        Algorithm::Gs => gerchberg_saxton(inst, &base),
        Algorithm::SparseBfpp | Algorithm::SparseLsfpp => {
            let (dict, projected) = sparse.expect("dictionary built for sparse algorithms");
            // ε defaults to σ_n, as for the plain variant.
            let mut cfg = fpp.clone();
            cfg.epsilon = Some(fpp.epsilon_for(inst.sigma_n));
            let run = if alg == Algorithm::SparseBfpp {
                run_sparse_bfpp(projected, &inst.y, dict, &cfg)
            } else {
                run_sparse_lsfpp(projected, &inst.y, dict, &cfg)
            };
            run.and_then(|(coeffs, trace)| {
                let l = spec.signal.num_harmonics().unwrap_or(1);
                rec.frequencies = refine_frequencies(coeffs.values(), dict, l).ok();
                if spec.keep_spectra {
                    rec.spectrum = Some(coeffs.values().iter().map(|c| c.norm()).collect());
                }
                Ok((dict.synthesize(coeffs.values())?, trace))
            })
        }
    };
    match solved {
        Ok((x, trace)) => {
            rec.iterations = trace.iterations;
            rec.inexact_steps = trace.inexact_steps();
            rec.ls_cost = inst.ls_cost(x.values()).ok();
            finish(&mut rec, &x, truth);
        }
        Err(e) => {
            log::warn!("{alg} failed at SNR {snr_db} dB, trial {trial}: {e}");
            rec.error = Some(e.to_string());
        }
    }
    rec
}

fn finish(rec: &mut TrialRecord, x: &ComplexSignal<f64>, truth: &Signal) {
    let finite = x.values().iter().all(|v| v.re.is_finite() && v.im.is_finite());
    match error_report(x, truth) {
        Ok(r) if finite => {
            rec.outcome = if r.is_outage { Outcome::Outage } else { Outcome::Success };
            rec.report = Some(r);
        }
        Ok(_) => rec.error = Some("non-finite estimate".into()),
        Err(e) => rec.error = Some(e.to_string()),
    }
}

/// Linear mean of the present values, in dB.
fn mean_db(v: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let vals: Vec<f64> = v.flatten().collect();
    if vals.is_empty() {
        None
    } else {
        Some(to_db(vals.iter().sum::<f64>() / vals.len() as f64))
    }
}

fn summarize(spec: &ExperimentSpec, records: &[TrialRecord], crb: &[CrbSample]) -> Vec<CellSummary> {
    let mut cells = Vec::new();
    for &alg in &spec.algorithms {
        for &snr in &spec.snr_grid_db {
            let rs: Vec<&TrialRecord> =
                records.iter().filter(|r| r.algorithm == alg && r.snr_db.to_bits() == snr.to_bits()).collect();
            let cs: Vec<&CrbSample> = crb.iter().filter(|c| c.snr_db.to_bits() == snr.to_bits()).collect();
            cells.push(summarize_cell(alg, snr, &rs, &cs));
        }
    }
    cells
}

/// Summary of one cell from its trial records and CRB samples.
pub fn summarize_cell(alg: Algorithm, snr_db: f64, rs: &[&TrialRecord], cs: &[&CrbSample]) -> CellSummary {
    let count = |o: Outcome| rs.iter().filter(|r| r.outcome == o).count();
    let ok: Vec<&ErrorReport> =
        rs.iter().filter(|r| r.outcome == Outcome::Success).filter_map(|r| r.report.as_ref()).collect();
    let trials = rs.len();
    let frac = |k: usize| if trials == 0 { 0.0 } else { k as f64 / trials as f64 };
    let sq: Vec<f64> = ok.iter().map(|r| r.sq_err_signal).collect();
    let (mean, stderr) = if sq.is_empty() {
        (None, None)
    } else {
        let n = sq.len() as f64;
        let m = sq.iter().sum::<f64>() / n;
        let var = if sq.len() > 1 { sq.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        (Some(m), Some((var / n).sqrt()))
    };
    CellSummary {
        algorithm: alg,
        snr_db,
        trials,
        successes: ok.len(),
        outages: count(Outcome::Outage),
        failures: count(Outcome::Failure),
        outage_fraction: frac(count(Outcome::Outage)),
        failure_fraction: frac(count(Outcome::Failure)),
        mse_signal_db: mean.map(to_db),
        mse_amplitude_db: mean_db(ok.iter().map(|r| Some(r.sq_err_amplitude))),
        mse_phase_db: mean_db(ok.iter().map(|r| Some(r.sq_err_phase))),
        mse_signal_linear: mean,
        mse_signal_stderr: stderr,
        crb_signal_db: mean_db(cs.iter().map(|c| c.signal)),
        crb_amplitude_db: mean_db(cs.iter().map(|c| c.amplitude)),
        crb_phase_db: mean_db(cs.iter().map(|c| c.phase)),
    }
}
