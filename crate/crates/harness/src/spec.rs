//! Experiment descriptions. Every field has a serde form so specs can live in
//! TOML preset files and be echoed verbatim into result metadata.

use std::f64::consts::PI;
use std::fmt;

use fpp_core::baselines::{BaselineConfig, InitStrategy, StepSchedule};
use fpp_core::fpp::FppConfig;
use fpp_core::measurements::{
    build_dictionary, gaussian_ensemble, harmonic_signal, masked_fourier_ensemble, Dictionary, HarmonicModel,
};
use fpp_core::signal::{ComplexSignal, MeasurementEnsemble};
use fpp_core::C64;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Bfpp,
    Lsfpp,
    SparseBfpp,
    SparseLsfpp,
    Wf,
    Gs,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Bfpp,
        Algorithm::Lsfpp,
        Algorithm::SparseBfpp,
        Algorithm::SparseLsfpp,
        Algorithm::Wf,
        Algorithm::Gs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Bfpp => "bfpp",
            Algorithm::Lsfpp => "lsfpp",
            Algorithm::SparseBfpp => "sparse_bfpp",
            Algorithm::SparseLsfpp => "sparse_lsfpp",
            Algorithm::Wf => "wf",
            Algorithm::Gs => "gs",
        }
    }

    /// Accepts both `sparse_bfpp` and `sparse-bfpp`.
    pub fn parse(s: &str) -> Option<Algorithm> {
        let s = s.replace('-', "_");
        Algorithm::ALL.into_iter().find(|a| a.name() == s)
    }

    pub fn is_sparse(self) -> bool {
        matches!(self, Algorithm::SparseBfpp | Algorithm::SparseLsfpp)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKindSpec {
    Gaussian,
    MaskedFourier,
}

/// Measurement ensemble; masked Fourier takes `k` masks (M = K·N) or an `m`
/// that must be a multiple of `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub kind: EnsembleKindSpec,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

impl EnsembleSpec {
    pub fn gaussian(n: usize, m: usize) -> Self {
        EnsembleSpec { kind: EnsembleKindSpec::Gaussian, n, m: Some(m), k: None }
    }

    pub fn masked_fourier(n: usize, k: usize) -> Self {
        EnsembleSpec { kind: EnsembleKindSpec::MaskedFourier, n, m: None, k: Some(k) }
    }

    pub fn m(&self) -> Result<usize> {
        if self.n == 0 {
            return Err(HarnessError::Spec("ensemble n must be positive".into()));
        }
        match self.kind {
            EnsembleKindSpec::Gaussian => match (self.m, self.k) {
                (Some(m), None) if m > 0 => Ok(m),
                _ => Err(HarnessError::Spec("gaussian ensemble needs a positive m and no k".into())),
            },
            EnsembleKindSpec::MaskedFourier => match (self.m, self.k) {
                (None, Some(k)) if k > 0 => Ok(k * self.n),
                (Some(m), None) if m > 0 && m % self.n == 0 => Ok(m),
                (Some(m), None) => Err(HarnessError::Spec(format!(
                    "masked Fourier m = {m} is not a positive multiple of n = {}",
                    self.n
                ))),
                _ => Err(HarnessError::Spec("masked Fourier ensemble needs exactly one of m, k".into())),
            },
        }
    }

    pub fn draw(&self, seed: u64) -> Result<MeasurementEnsemble<f64>> {
        let m = self.m()?;
        Ok(match self.kind {
            EnsembleKindSpec::Gaussian => gaussian_ensemble(self.n, m, seed)?,
            EnsembleKindSpec::MaskedFourier => masked_fourier_ensemble(self.n, m / self.n, seed)?,
        })
    }

    pub fn label(&self) -> String {
        let m = self.m().map(|m| m.to_string()).unwrap_or_else(|_| "?".into());
        match self.kind {
            EnsembleKindSpec::Gaussian => format!("gaussian N={} M={m}", self.n),
            EnsembleKindSpec::MaskedFourier => format!("masked_fourier N={} M={m}", self.n),
        }
    }
}

/// Ground-truth signal, fixed across all trials of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    /// Sum of unit-amplitude harmonics; frequencies in multiples of π.
    Harmonic {
        frequencies_pi: Vec<f64>,
    },
    /// Circular complex Gaussian entries of unit variance.
    Gaussian {
        seed: u64,
    },
    Custom {
        re: Vec<f64>,
        im: Vec<f64>,
    },
}

impl SignalSpec {
    pub fn build(&self, n: usize) -> Result<ComplexSignal<f64>> {
        Ok(match self {
            SignalSpec::Harmonic { .. } => harmonic_signal(&self.harmonic_model(n)?.expect("harmonic"))?,
            SignalSpec::Gaussian { seed } => ComplexSignal::random(n, *seed)?,
            SignalSpec::Custom { re, im } => {
                if re.len() != n || im.len() != n {
                    return Err(HarnessError::Spec(format!("custom signal must have {n} entries")));
                }
                ComplexSignal::new(re.iter().zip(im).map(|(&a, &b)| C64::new(a, b)).collect())?
            }
        })
    }

    pub fn harmonic_model(&self, n: usize) -> Result<Option<HarmonicModel<f64>>> {
        match self {
            SignalSpec::Harmonic { frequencies_pi } => {
                Ok(Some(HarmonicModel::unit(frequencies_pi.iter().map(|f| f * PI).collect(), n)?))
            }
            _ => Ok(None),
        }
    }

    pub fn num_harmonics(&self) -> Option<usize> {
        match self {
            SignalSpec::Harmonic { frequencies_pi } => Some(frequencies_pi.len()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Spectral,
    Random,
}

impl InitKind {
    pub fn strategy(self, seed: u64) -> InitStrategy<f64> {
        match self {
            InitKind::Spectral => InitStrategy::Spectral,
            InitKind::Random => InitStrategy::Random { seed },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InitKind::Spectral => "spectral",
            InitKind::Random => "random",
        }
    }
}

/// Uniform frequency grid over `[lo_pi·π, hi_pi·π]` with `p` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionarySpec {
    pub p: usize,
    pub lo_pi: f64,
    pub hi_pi: f64,
}

impl Default for DictionarySpec {
    fn default() -> Self {
        DictionarySpec { p: 51, lo_pi: -0.5, hi_pi: 0.5 }
    }
}

impl DictionarySpec {
    pub fn build(&self, n: usize) -> Result<Dictionary<f64>> {
        Ok(build_dictionary(n, self.p, (self.lo_pi * PI, self.hi_pi * PI))?)
    }
}

/// FPP settings; unset fields keep the library defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FppParams {
    pub lambda: f64,
    /// `None` sets ε = σ_n for every trial.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub outer_tol: f64,
    pub max_outer: usize,
    pub inner_tol: f64,
    pub inner_max_iter: u32,
}

impl Default for FppParams {
    fn default() -> Self {
        let d = FppConfig::<f64>::default();
        FppParams {
            lambda: d.lambda,
            epsilon: d.epsilon,
            lambda1: d.lambda1,
            lambda2: d.lambda2,
            outer_tol: d.outer_tol,
            max_outer: d.max_outer,
            inner_tol: d.inner_tol,
            inner_max_iter: d.inner_max_iter,
        }
    }
}

impl FppParams {
    pub fn config(&self, init: InitStrategy<f64>) -> FppConfig<f64> {
        FppConfig {
            lambda: self.lambda,
            epsilon: self.epsilon,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            outer_tol: self.outer_tol,
            max_outer: self.max_outer,
            init,
            inner_tol: self.inner_tol,
            inner_max_iter: self.inner_max_iter,
        }
    }
}

/// Wirtinger flow and Gerchberg-Saxton settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineParams {
    pub max_iter: usize,
    pub tol: f64,
    pub mu_max: f64,
    pub tau0: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        let d = BaselineConfig::<f64>::default();
        BaselineParams { max_iter: d.max_iter, tol: d.tol, mu_max: d.step_schedule.mu_max, tau0: d.step_schedule.tau0 }
    }
}

impl BaselineParams {
    pub fn config(&self, init: InitStrategy<f64>) -> BaselineConfig<f64> {
        BaselineConfig {
            max_iter: self.max_iter,
            tol: self.tol,
            step_schedule: StepSchedule { mu_max: self.mu_max, tau0: self.tau0 },
            init,
        }
    }
}

fn default_true() -> bool {
    true
}

/// One Monte-Carlo MSE study: a grid of SNRs, a set of algorithms and a
/// number of trials per (algorithm, SNR) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Row label used by table emitters.
    #[serde(default)]
    pub label: String,
    pub ensemble: EnsembleSpec,
    pub signal: SignalSpec,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub algorithms: Vec<Algorithm>,
    pub init: InitKind,
    pub base_seed: u64,
    /// Draw one ensemble for the whole experiment instead of one per trial.
    #[serde(default)]
    pub fixed_ensemble: bool,
    /// Compute the averaged CRB traces for every cell.
    #[serde(default = "default_true")]
    pub crb: bool,
    /// Keep per-trial sparse spectra in the records.
    #[serde(default)]
    pub keep_spectra: bool,
    #[serde(default)]
    pub fpp: FppParams,
    #[serde(default)]
    pub baseline: BaselineParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dictionary: Option<DictionarySpec>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(HarnessError::Spec("trials must be at least 1".into()));
        }
        if self.snr_grid_db.is_empty() {
            return Err(HarnessError::Spec("snr_grid_db must be nonempty".into()));
        }
        // +inf stands for noiseless measurements.
        if self.snr_grid_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return Err(HarnessError::Spec("snr_grid_db entries must be numbers or +inf".into()));
        }
        if self.algorithms.is_empty() {
            return Err(HarnessError::Spec("at least one algorithm is required".into()));
        }
        self.ensemble.m()?;
        self.signal.build(self.ensemble.n)?;
        self.fpp.config(InitStrategy::Spectral).validate()?;
        self.baseline.config(InitStrategy::Spectral).validate()?;
        if self.algorithms.iter().any(|a| a.is_sparse()) {
            self.signal
                .num_harmonics()
                .ok_or_else(|| HarnessError::Spec("sparse algorithms need a harmonic signal".into()))?;
            self.dictionary().build(self.ensemble.n)?;
        }
        Ok(())
    }

    pub fn dictionary(&self) -> DictionarySpec {
        self.dictionary.clone().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masked_fourier_m_must_be_multiple_of_n() {
        let mut e = EnsembleSpec::masked_fourier(16, 4);
        assert_eq!(e.m().unwrap(), 64);
        e.k = None;
        e.m = Some(63);
        assert!(e.m().is_err());
        e.m = Some(48);
        assert_eq!(e.m().unwrap(), 48);
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(Algorithm::parse(a.name()), Some(a));
        }
        assert_eq!(Algorithm::parse("sparse-lsfpp"), Some(Algorithm::SparseLsfpp));
        assert_eq!(Algorithm::parse("phaselift"), None);
    }

    #[test]
    fn harmonic_signal_matches_test_signal() {
        let x = SignalSpec::Harmonic { frequencies_pi: vec![0.16] }.build(16).unwrap();
        for (t, v) in x.values().iter().enumerate() {
            let w = 0.16 * PI * (t + 1) as f64;
            assert!((v - C64::new(w.cos(), w.sin())).norm() < 1e-12);
        }
    }

    #[test]
    fn validate_rejects_empty_grids_and_zero_trials() {
        let mut s = ExperimentSpec {
            label: String::new(),
            ensemble: EnsembleSpec::gaussian(4, 16),
            signal: SignalSpec::Gaussian { seed: 1 },
            snr_grid_db: vec![20.0],
            trials: 1,
            algorithms: vec![Algorithm::Gs],
            init: InitKind::Spectral,
            base_seed: 0,
            fixed_ensemble: false,
            crb: true,
            keep_spectra: false,
            fpp: FppParams::default(),
            baseline: BaselineParams::default(),
            dictionary: None,
        };
        assert!(s.validate().is_ok());
        s.trials = 0;
        assert!(s.validate().is_err());
        s.trials = 1;
        s.snr_grid_db.clear();
        assert!(s.validate().is_err());
        s.snr_grid_db = vec![f64::INFINITY];
        assert!(s.validate().is_ok());
        s.algorithms = vec![Algorithm::SparseLsfpp];
        assert!(s.validate().is_err(), "sparse needs a harmonic signal");
    }
}
