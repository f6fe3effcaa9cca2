//! Sweeps that are not (algorithm × SNR) grids: B-FPP against ε, and
//! CRB-only curves.

use fpp_core::crb::{fim_amp_phase, fim_complex, fim_harmonic};
use fpp_core::fpp::run_bfpp;
use fpp_core::measurements::HarmonicModel;
use fpp_core::rng::{derive_seed, label};
use fpp_core::scalar::to_db;
use fpp_core::signal::{error_report, snr_from_sigma};
use fpp_core::Instance;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{HarnessError, Result};
use crate::run::sigma_for;
use crate::spec::{EnsembleSpec, FppParams, InitKind, SignalSpec};

/// B-FPP error against ε. One ensemble and one signal are drawn once and
/// held fixed; only the noise changes from trial to trial, and trial `t`
/// uses the same noise draw at every ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSpec {
    pub ensemble: EnsembleSpec,
    pub signal: SignalSpec,
    pub sigma_n: f64,
    pub eps_grid: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    #[serde(default = "spectral")]
    pub init: InitKind,
    #[serde(default)]
    pub fpp: FppParams,
}

fn spectral() -> InitKind {
    InitKind::Spectral
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonPoint {
    pub epsilon: f64,
    pub trials: usize,
    pub failures: usize,
    pub outages: usize,
    /// Mean over every non-failed trial, outages included.
    pub mse_db: Option<f64>,
    pub mse_linear: Option<f64>,
    /// Per-trial squared errors; `None` marks a failed solve.
    pub sq_errors: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonCurve {
    pub spec: EpsilonSpec,
    pub snr_db: f64,
    pub points: Vec<EpsilonPoint>,
}

impl EpsilonSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(HarnessError::Spec("trials must be at least 1".into()));
        }
        if !(self.sigma_n >= 0.0) || !self.sigma_n.is_finite() {
            return Err(HarnessError::Spec("sigma_n must be nonnegative".into()));
        }
        if self.eps_grid.is_empty()
            || self.eps_grid.iter().any(|e| !(*e > 0.0) || !e.is_finite())
            || self.eps_grid.windows(2).any(|w| !(w[0] < w[1]))
        {
            return Err(HarnessError::Spec("eps_grid must be positive and strictly ascending".into()));
        }
        self.ensemble.m()?;
        self.signal.build(self.ensemble.n)?;
        Ok(())
    }
}

pub fn epsilon_sweep(spec: &EpsilonSpec, jobs: Option<usize>) -> Result<EpsilonCurve> {
    spec.validate()?;
    let ens = spec.ensemble.draw(derive_seed(spec.base_seed, &[label("ensemble")]))?;
    let x = spec.signal.build(spec.ensemble.n)?;
    let snr_db = if spec.sigma_n > 0.0 { to_db(snr_from_sigma(&ens, &x, spec.sigma_n)?) } else { f64::INFINITY };
    let instances: Vec<Instance> = (0..spec.trials)
        .map(|t| {
            let seed = derive_seed(spec.base_seed, &[label("noise"), t as u64]);
            Instance::simulate(ens.clone(), x.clone(), spec.sigma_n, seed)
        })
        .collect::<fpp_core::Result<_>>()?;
    let tasks: Vec<(usize, usize)> =
        (0..spec.eps_grid.len()).flat_map(|e| (0..spec.trials).map(move |t| (e, t))).collect();
    let work = || -> Vec<Option<f64>> {
        tasks
            .par_iter()
            .map(|&(e, t)| {
                let init_seed = derive_seed(spec.base_seed, &[label("bfpp"), t as u64]);
                let mut cfg = spec.fpp.config(spec.init.strategy(init_seed));
                cfg.epsilon = Some(spec.eps_grid[e]);
                match run_bfpp(&instances[t], &cfg) {
                    Ok((xh, _)) => error_report(&xh, &x).ok().map(|r| r.sq_err_signal).filter(|v| v.is_finite()),
                    Err(err) => {
                        log::warn!("bfpp failed at eps {}, trial {t}: {err}", spec.eps_grid[e]);
                        None
                    }
                }
            })
            .collect()
    };
    let sq = with_jobs(jobs, work)?;
    let points = spec
        .eps_grid
        .iter()
        .enumerate()
        .map(|(e, &eps)| {
            let errs: Vec<Option<f64>> = sq[e * spec.trials..(e + 1) * spec.trials].to_vec();
            let ok: Vec<f64> = errs.iter().flatten().copied().collect();
            let mean = if ok.is_empty() { None } else { Some(ok.iter().sum::<f64>() / ok.len() as f64) };
            EpsilonPoint {
                epsilon: eps,
                trials: spec.trials,
                failures: errs.iter().filter(|v| v.is_none()).count(),
                outages: ok.iter().filter(|&&v| to_db(v) > 0.0).count(),
                mse_db: mean.map(to_db),
                mse_linear: mean,
                sq_errors: errs,
            }
        })
        .collect();
    Ok(EpsilonCurve { spec: spec.clone(), snr_db, points })
}

/// Amplitude and phase CRB against SNR for several measurement counts
/// `M = factor·N`, averaged over independent ensembles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrbSweepSpec {
    pub n: usize,
    pub m_factors: Vec<usize>,
    pub signal: SignalSpec,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrbRow {
    pub m: usize,
    pub snr_db: f64,
    pub crb_amp_db: Option<f64>,
    pub crb_phase_db: Option<f64>,
    pub crb_signal_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrbCurves {
    pub spec: CrbSweepSpec,
    pub rows: Vec<CrbRow>,
}

/// Unit-σ traces `(signal, amplitude, phase)`; the bound scales as σ².
type UnitTraces = (Option<f64>, Option<f64>, Option<f64>);

pub fn crb_sweep(spec: &CrbSweepSpec, jobs: Option<usize>) -> Result<CrbCurves> {
    if spec.trials < 1 || spec.m_factors.is_empty() || spec.snr_grid_db.is_empty() {
        return Err(HarnessError::Spec("crb sweep needs trials, m_factors and snr_grid_db".into()));
    }
    let x = spec.signal.build(spec.n)?;
    let tasks: Vec<(usize, usize)> =
        spec.m_factors.iter().flat_map(|&f| (0..spec.trials).map(move |t| (f, t))).collect();
    let work = || -> Result<Vec<(UnitTraces, Vec<f64>)>> {
        tasks
            .par_iter()
            .map(|&(f, t)| {
                let m = f * spec.n;
                let seed = derive_seed(spec.base_seed, &[label("ensemble"), m as u64, t as u64]);
                let ens = EnsembleSpec::gaussian(spec.n, m).draw(seed)?;
                let ap = fim_amp_phase(&ens, &x, 1.0).ok();
                let unit = (
                    fim_complex(&ens, &x, 1.0).ok().map(|r| r.crb_trace()),
                    ap.as_ref().map(|r| r.crb_b.trace()),
                    ap.as_ref().map(|r| r.crb_theta.trace()),
                );
                let sig2 = spec
                    .snr_grid_db
                    .iter()
                    .map(|&s| sigma_for(&ens, &x, s).map(|v| v * v))
                    .collect::<Result<Vec<f64>>>()?;
                Ok((unit, sig2))
            })
            .collect()
    };
    let per = with_jobs(jobs, work)??;
    let mut rows = Vec::new();
    for (fi, &f) in spec.m_factors.iter().enumerate() {
        let block = &per[fi * spec.trials..(fi + 1) * spec.trials];
        for (si, &snr) in spec.snr_grid_db.iter().enumerate() {
            let avg = |pick: fn(&UnitTraces) -> Option<f64>| -> Option<f64> {
                let v: Option<Vec<f64>> = block.iter().map(|(u, s2)| pick(u).map(|c| c * s2[si])).collect();
                v.map(|v| to_db(v.iter().sum::<f64>() / v.len() as f64))
            };
            rows.push(CrbRow {
                m: f * spec.n,
                snr_db: snr,
                crb_amp_db: avg(|u| u.1),
                crb_phase_db: avg(|u| u.2),
                crb_signal_db: avg(|u| u.0),
            });
        }
    }
    Ok(CrbCurves { spec: spec.clone(), rows })
}

/// Frequency-block CRB of a harmonic signal against SNR, for several
/// frequency configurations sharing the same ensembles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicCrbSpec {
    pub n: usize,
    pub m: usize,
    /// Each case lists its frequencies in multiples of π.
    pub cases: Vec<Vec<f64>>,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicCrbRow {
    pub case: usize,
    pub snr_db: f64,
    /// Linear average over ensembles of `Σ_ℓ CRB(ω_ℓ)`.
    pub crb_omega: f64,
    pub crb_omega_db: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicCrbCurves {
    pub spec: HarmonicCrbSpec,
    pub rows: Vec<HarmonicCrbRow>,
}

pub fn harmonic_crb(spec: &HarmonicCrbSpec, jobs: Option<usize>) -> Result<HarmonicCrbCurves> {
    if spec.trials < 1 || spec.cases.is_empty() || spec.snr_grid_db.is_empty() {
        return Err(HarnessError::Spec("harmonic crb needs trials, cases and snr_grid_db".into()));
    }
    let models: Vec<HarmonicModel<f64>> = spec
        .cases
        .iter()
        .map(|c| HarmonicModel::unit(c.iter().map(|f| f * PI).collect(), spec.n))
        .collect::<fpp_core::Result<_>>()?;
    let work = || -> Result<Vec<Vec<(f64, usize)>>> {
        (0..spec.trials)
            .into_par_iter()
            .map(|t| {
                let seed = derive_seed(spec.base_seed, &[label("ensemble"), t as u64]);
                let ens = EnsembleSpec::gaussian(spec.n, spec.m).draw(seed)?;
                let mut out = Vec::with_capacity(models.len() * spec.snr_grid_db.len());
                for model in &models {
                    let x = fpp_core::measurements::harmonic_signal(model)?;
                    let unit = fim_harmonic(&ens, model, 1.0)?;
                    let tr = unit.block_trace(0, model.len());
                    for &snr in &spec.snr_grid_db {
                        let s = sigma_for(&ens, &x, snr)?;
                        out.push((tr * s * s, unit.rank));
                    }
                }
                Ok(out)
            })
            .collect()
    };
    let per = with_jobs(jobs, work)??;
    let mut rows = Vec::new();
    for c in 0..models.len() {
        for (si, &snr) in spec.snr_grid_db.iter().enumerate() {
            let idx = c * spec.snr_grid_db.len() + si;
            let mean = per.iter().map(|v| v[idx].0).sum::<f64>() / per.len() as f64;
            let rank = per.iter().map(|v| v[idx].1).min().unwrap_or(0);
            rows.push(HarmonicCrbRow { case: c, snr_db: snr, crb_omega: mean, crb_omega_db: to_db(mean), rank });
        }
    }
    Ok(HarmonicCrbCurves { spec: spec.clone(), rows })
}

pub(crate) fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match jobs {
        Some(j) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| HarnessError::Spec(format!("thread pool: {e}")))?
            .install(f)),
        None => Ok(f()),
    }
}
