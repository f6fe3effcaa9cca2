//! Per-iteration convergence records shared by all iterative solvers.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

/// One outer (or descent) iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Cost the stopping rule is applied to: the subproblem optimum for
    /// the FPP variants, `Σ(y_i − |a_iᴴx|²)²` for WF, the alternating
    /// magnitude-fit cost for GS.
    pub objective: f64,
    /// `Σ s_i` (zero for solvers without slack).
    pub slack_sum: f64,
    pub estimate_norm: f64,
    /// `Σ(y_i − |a_iᴴx|²)²` at the current estimate.
    pub ls_cost: f64,
    /// Largest violation of this subproblem's constraints by the previous
    /// iterate (FPP only; zero otherwise).
    #[serde(default)]
    pub inherited_violation: f64,
    /// Interior-point iterations of this step's convex solve (FPP only).
    #[serde(default)]
    pub inner_iterations: u32,
    /// The convex solve stopped short of its tolerance and a repaired or
    /// carried-over point was used instead.
    #[serde(default)]
    pub inexact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub algorithm: String,
    pub records: Vec<TraceRecord>,
    pub converged: bool,
    pub iterations: usize,
    /// Norm the spectral initializer scaled its eigenvector to, if used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_scale: Option<f64>,
}

impl Trace {
    pub fn new(algorithm: &str) -> Self {
        Trace {
            algorithm: algorithm.to_string(),
            records: Vec::new(),
            converged: false,
            iterations: 0,
            init_scale: None,
        }
    }

    pub fn push(&mut self, r: TraceRecord) {
        self.iterations = r.iteration;
        self.records.push(r);
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    pub fn inexact_steps(&self) -> usize {
        self.records.iter().filter(|r| r.inexact).count()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Largest increase `objective[k+1] − objective[k]` (≤ 0 when monotone).
    pub fn max_increase(&self) -> f64 {
        self.records.windows(2).map(|w| w[1].objective - w[0].objective).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Writes one JSON object per record.
    pub fn write_json_lines(&self, mut w: impl Write) -> io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Relative-improvement stopping rule `|f_{k−1} − f_k| ≤ tol · f_{k−1}`,
/// plus an absolute floor below which further progress is not resolvable.
pub fn converged(prev: f64, cur: f64, tol: f64, floor: f64) -> bool {
    let delta = (prev - cur).abs();
    delta <= tol * prev.abs() || cur.abs() <= floor || delta <= floor
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_lines_one_record_per_line() {
        let mut t = Trace::new("x");
        for k in 1..=3 {
            t.push(TraceRecord {
                iteration: k,
                objective: 1.0 / k as f64,
                slack_sum: 0.0,
                estimate_norm: 1.0,
                ls_cost: 0.0,
                inherited_violation: 0.0,
                inner_iterations: 0,
                inexact: false,
            });
        }
        let mut buf = Vec::new();
        t.write_json_lines(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        let r: TraceRecord = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(r.iteration, 1);
        assert!(t.max_increase() < 0.0);
        assert_eq!(t.iterations, 3);
    }

    #[test]
    fn stopping_rule() {
        assert!(converged(1.0, 1.0 - 1e-9, 1e-7, 0.0));
        assert!(!converged(1.0, 0.5, 1e-7, 0.0));
        assert!(converged(1e-3, 1e-12, 1e-7, 1e-10));
    }
}
