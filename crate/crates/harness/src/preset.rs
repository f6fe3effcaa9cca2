//! Named experiment presets. Definitions are TOML files under `presets/`,
//! compiled in so the binary is self-contained.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::report::{emit_figure_data, StudyResult};
use crate::run::run_experiment;
use crate::spec::ExperimentSpec;
use crate::sweep::{crb_sweep, epsilon_sweep, harmonic_crb, CrbSweepSpec, EpsilonSpec, HarmonicCrbSpec};

const PRESET_FILES: [(&str, &str); 8] = [
    ("fig1", include_str!("../presets/fig1.toml")),
    ("fig2", include_str!("../presets/fig2.toml")),
    ("fig5", include_str!("../presets/fig5.toml")),
    ("fig6", include_str!("../presets/fig6.toml")),
    ("fig7", include_str!("../presets/fig7.toml")),
    ("fig8", include_str!("../presets/fig8.toml")),
    ("table1", include_str!("../presets/table1.toml")),
    ("table2", include_str!("../presets/table2.toml")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESET_FILES.iter().map(|(n, _)| *n).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Study {
    Mse { experiments: Vec<ExperimentSpec> },
    Epsilon(EpsilonSpec),
    Crb(CrbSweepSpec),
    Harmonic(HarmonicCrbSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub id: String,
    pub description: String,
    /// Figure ids emitted from the study result.
    pub figures: Vec<String>,
    /// Trial count of the full-scale run; the study's own count is the
    /// desk-scale default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_trials: Option<usize>,
    pub study: Study,
}

impl Preset {
    pub fn named(name: &str) -> Result<Preset> {
        let text = PRESET_FILES
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| HarnessError::UnknownPreset(name.into(), preset_names().join(", ")))?;
        Preset::from_toml(text)
    }

    pub fn from_toml(text: &str) -> Result<Preset> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Preset> {
        Preset::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn trials(&self) -> usize {
        match &self.study {
            Study::Mse { experiments } => experiments.iter().map(|e| e.trials).max().unwrap_or(0),
            Study::Epsilon(s) => s.trials,
            Study::Crb(s) => s.trials,
            Study::Harmonic(s) => s.trials,
        }
    }

    pub fn set_trials(&mut self, trials: usize) {
        match &mut self.study {
            Study::Mse { experiments } => experiments.iter_mut().for_each(|e| e.trials = trials),
            Study::Epsilon(s) => s.trials = trials,
            Study::Crb(s) => s.trials = trials,
            Study::Harmonic(s) => s.trials = trials,
        }
    }

    /// Offsets every base seed by `seed` (wrapping), so one flag reseeds a
    /// whole preset while keeping its settings paired.
    pub fn reseed(&mut self, seed: u64) {
        let f = |s: &mut u64| *s = fpp_core::rng::derive_seed(*s, &[seed]);
        match &mut self.study {
            Study::Mse { experiments } => experiments.iter_mut().for_each(|e| f(&mut e.base_seed)),
            Study::Epsilon(s) => f(&mut s.base_seed),
            Study::Crb(s) => f(&mut s.base_seed),
            Study::Harmonic(s) => f(&mut s.base_seed),
        }
    }

    pub fn run(&self, jobs: Option<usize>) -> Result<StudyResult> {
        Ok(match &self.study {
            Study::Mse { experiments } => StudyResult::Mse {
                experiments: experiments.iter().map(|e| run_experiment(e, jobs)).collect::<Result<_>>()?,
            },
            Study::Epsilon(s) => StudyResult::Epsilon(epsilon_sweep(s, jobs)?),
            Study::Crb(s) => StudyResult::Crb(crb_sweep(s, jobs)?),
            Study::Harmonic(s) => StudyResult::Harmonic(harmonic_crb(s, jobs)?),
        })
    }

    pub fn emit(&self, result: &StudyResult, out_dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        let mut out = Vec::new();
        for f in &self.figures {
            out.extend(emit_figure_data(result, f, out_dir)?);
        }
        Ok(out)
    }
}
