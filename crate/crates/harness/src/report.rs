//! Outage statistics and figure-data emission (RFC-4180 CSV plus a JSON
//! metadata sidecar). Floats are written with 17 significant digits.

use std::fs;
use std::path::{Path, PathBuf};

use fpp_core::scalar::to_db;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{HarnessError, Result};
use crate::run::{ExperimentResult, Outcome};
use crate::spec::Algorithm;
use crate::sweep::{CrbCurves, EpsilonCurve, HarmonicCrbCurves};

pub const FIGURE_IDS: [&str; 8] = ["fig1", "fig2", "fig3_4", "fig5_6", "fig7", "fig8", "table1", "table2"];

/// Version of the code that produced a file.
pub const GIT_DESCRIBE: &str = env!("FPP_GIT_DESCRIBE");

/// Histogram bin edges (dB) for per-trial signal MSEs; the outer bins are
/// open-ended.
pub const HIST_LO_DB: f64 = -40.0;
pub const HIST_HI_DB: f64 = 20.0;
pub const HIST_STEP_DB: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageRow {
    pub setting: String,
    pub init: String,
    pub algorithm: Algorithm,
    pub trials: usize,
    pub outages: usize,
    pub failures: usize,
    pub outage_pct: f64,
    pub failure_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub setting: String,
    pub init: String,
    pub algorithm: Algorithm,
    pub lo_db: f64,
    pub hi_db: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutageTable {
    pub rows: Vec<OutageRow>,
    pub histogram: Vec<HistogramBin>,
}

/// Outage percentages per (algorithm, init), pooled over the SNR grid, and
/// a histogram of per-trial signal MSEs. Failed trials have no MSE and are
/// counted separately.
pub fn outage_table(result: &ExperimentResult) -> OutageTable {
    let setting = setting_label(result);
    let init = result.spec.init.name().to_string();
    let mut table = OutageTable::default();
    for &alg in &result.spec.algorithms {
        let rs: Vec<_> = result.records.iter().filter(|r| r.algorithm == alg).collect();
        let trials = rs.len();
        let outages = rs.iter().filter(|r| r.outcome == Outcome::Outage).count();
        let failures = rs.iter().filter(|r| r.outcome == Outcome::Failure).count();
        let pct = |k: usize| {
            if trials == 0 {
                0.0
            } else {
                100.0 * k as f64 / trials as f64
            }
        };
        table.rows.push(OutageRow {
            setting: setting.clone(),
            init: init.clone(),
            algorithm: alg,
            trials,
            outages,
            failures,
            outage_pct: pct(outages),
            failure_pct: pct(failures),
        });
        let edges = hist_edges();
        let mut counts = vec![0usize; edges.len() - 1];
        for r in rs.iter().filter_map(|r| r.report.as_ref()) {
            let v = r.mse_signal_db;
            if let Some(i) = (0..counts.len()).find(|&i| v >= edges[i] && v < edges[i + 1]) {
                counts[i] += 1;
            }
        }
        for (i, count) in counts.into_iter().enumerate() {
            table.histogram.push(HistogramBin {
                setting: setting.clone(),
                init: init.clone(),
                algorithm: alg,
                lo_db: edges[i],
                hi_db: edges[i + 1],
                count,
            });
        }
    }
    table
}

fn hist_edges() -> Vec<f64> {
    let k = ((HIST_HI_DB - HIST_LO_DB) / HIST_STEP_DB).round() as usize;
    let mut e = vec![f64::NEG_INFINITY];
    e.extend((0..=k).map(|i| HIST_LO_DB + HIST_STEP_DB * i as f64));
    e.push(f64::INFINITY);
    e
}

fn setting_label(r: &ExperimentResult) -> String {
    if r.spec.label.is_empty() {
        r.spec.ensemble.label()
    } else {
        r.spec.label.clone()
    }
}

/// Everything a figure can be drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StudyResult {
    Mse { experiments: Vec<ExperimentResult> },
    Epsilon(EpsilonCurve),
    Crb(CrbCurves),
    Harmonic(HarmonicCrbCurves),
}

impl StudyResult {
    fn kind(&self) -> &'static str {
        match self {
            StudyResult::Mse { .. } => "mse",
            StudyResult::Epsilon(_) => "epsilon",
            StudyResult::Crb(_) => "crb",
            StudyResult::Harmonic(_) => "harmonic",
        }
    }

    fn spec_echo(&self) -> serde_json::Value {
        match self {
            StudyResult::Mse { experiments } => json!(experiments.iter().map(|e| &e.spec).collect::<Vec<_>>()),
            StudyResult::Epsilon(c) => json!(c.spec),
            StudyResult::Crb(c) => json!(c.spec),
            StudyResult::Harmonic(c) => json!(c.spec),
        }
    }

    fn seeds(&self) -> Vec<u64> {
        match self {
            StudyResult::Mse { experiments } => experiments.iter().map(|e| e.spec.base_seed).collect(),
            StudyResult::Epsilon(c) => vec![c.spec.base_seed],
            StudyResult::Crb(c) => vec![c.spec.base_seed],
            StudyResult::Harmonic(c) => vec![c.spec.base_seed],
        }
    }
}

/// Float cell with 17 significant digits; missing values are empty.
pub fn fmt_f(v: Option<f64>) -> String {
    match v {
        Some(v) if v.is_nan() => "nan".into(),
        Some(v) if v == f64::INFINITY => "inf".into(),
        Some(v) if v == f64::NEG_INFINITY => "-inf".into(),
        Some(v) => format!("{v:.16e}"),
        None => String::new(),
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Writes `<out_dir>/<figure_id>.csv` (plus auxiliary CSVs for some
/// figures) and `<out_dir>/<figure_id>.json`; returns the paths written.
pub fn emit_figure_data(result: &StudyResult, figure_id: &str, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if !FIGURE_IDS.contains(&figure_id) {
        return Err(HarnessError::UnknownFigure(figure_id.into(), FIGURE_IDS.join(", ")));
    }
    let wrong = || HarnessError::WrongStudy(figure_id.into(), result.kind());
    let mut tables: Vec<(String, Table)> = Vec::new();
    let mut extra = serde_json::Map::new();
    match (figure_id, result) {
        ("fig1", StudyResult::Epsilon(c)) => {
            let mut t = Table::new(&["epsilon", "mse_db", "mse_linear", "outages", "failures", "trials"]);
            for p in &c.points {
                t.rows.push(vec![
                    fmt_f(Some(p.epsilon)),
                    fmt_f(p.mse_db),
                    fmt_f(p.mse_linear),
                    p.outages.to_string(),
                    p.failures.to_string(),
                    p.trials.to_string(),
                ]);
            }
            extra.insert("snr_db".into(), json!(fmt_f(Some(c.snr_db))));
            tables.push(("fig1".into(), t));
        }
        ("fig2", StudyResult::Crb(c)) => {
            let mut t = Table::new(&["m", "snr_db", "crb_amp_db", "crb_phase_db", "crb_signal_db"]);
            for r in &c.rows {
                t.rows.push(vec![
                    r.m.to_string(),
                    fmt_f(Some(r.snr_db)),
                    fmt_f(r.crb_amp_db),
                    fmt_f(r.crb_phase_db),
                    fmt_f(r.crb_signal_db),
                ]);
            }
            tables.push(("fig2".into(), t));
        }
        ("fig7", StudyResult::Harmonic(c)) => {
            let mut t = Table::new(&["case", "frequencies_pi", "snr_db", "crb_omega", "crb_omega_db", "rank"]);
            for r in &c.rows {
                let f: Vec<String> = c.spec.cases[r.case].iter().map(|v| v.to_string()).collect();
                t.rows.push(vec![
                    r.case.to_string(),
                    f.join(";"),
                    fmt_f(Some(r.snr_db)),
                    fmt_f(Some(r.crb_omega)),
                    fmt_f(Some(r.crb_omega_db)),
                    r.rank.to_string(),
                ]);
            }
            tables.push(("fig7".into(), t));
        }
        ("fig5_6", StudyResult::Mse { experiments }) => {
            let mut t = Table::new(&[
                "setting",
                "algorithm",
                "snr_db",
                "trials",
                "successes",
                "outages",
                "failures",
                "mse_amp_db",
                "mse_phase_db",
                "mse_signal_db",
                "crb_amp_db",
                "crb_phase_db",
                "crb_signal_db",
            ]);
            for e in experiments {
                for c in &e.cells {
                    t.rows.push(vec![
                        setting_label(e),
                        c.algorithm.to_string(),
                        fmt_f(Some(c.snr_db)),
                        c.trials.to_string(),
                        c.successes.to_string(),
                        c.outages.to_string(),
                        c.failures.to_string(),
                        fmt_f(c.mse_amplitude_db),
                        fmt_f(c.mse_phase_db),
                        fmt_f(c.mse_signal_db),
                        fmt_f(c.crb_amplitude_db),
                        fmt_f(c.crb_phase_db),
                        fmt_f(c.crb_signal_db),
                    ]);
                }
            }
            tables.push(("fig5_6".into(), t));
        }
        ("fig8", StudyResult::Mse { experiments }) => {
            let mut spec_t = Table::new(&["setting", "algorithm", "omega", "omega_over_pi", "mean_abs_coefficient"]);
            let mut peaks = Table::new(&["setting", "algorithm", "snr_db", "trial", "peak", "omega", "omega_over_pi"]);
            let mut hit_rates = serde_json::Map::new();
            for e in experiments {
                let dict = e.spec.dictionary().build(e.spec.ensemble.n)?;
                let truth: Vec<f64> = match &e.spec.signal {
                    crate::spec::SignalSpec::Harmonic { frequencies_pi } => {
                        frequencies_pi.iter().map(|f| f * std::f64::consts::PI).collect()
                    }
                    _ => Vec::new(),
                };
                let step = dict_step(&dict.grid);
                for &alg in e.spec.algorithms.iter().filter(|a| a.is_sparse()) {
                    let rs: Vec<_> = e.records.iter().filter(|r| r.algorithm == alg).collect();
                    let spectra: Vec<&Vec<f64>> = rs.iter().filter_map(|r| r.spectrum.as_ref()).collect();
                    for (k, &w) in dict.grid.iter().enumerate() {
                        let mean = if spectra.is_empty() {
                            None
                        } else {
                            Some(spectra.iter().map(|s| s[k]).sum::<f64>() / spectra.len() as f64)
                        };
                        spec_t.rows.push(vec![
                            setting_label(e),
                            alg.to_string(),
                            fmt_f(Some(w)),
                            fmt_f(Some(w / std::f64::consts::PI)),
                            fmt_f(mean),
                        ]);
                    }
                    let mut hits = 0usize;
                    for r in &rs {
                        if let Some(f) = &r.frequencies {
                            if peaks_hit(f, &truth, step) {
                                hits += 1;
                            }
                            for (i, &w) in f.iter().enumerate() {
                                peaks.rows.push(vec![
                                    setting_label(e),
                                    alg.to_string(),
                                    fmt_f(Some(r.snr_db)),
                                    r.trial.to_string(),
                                    i.to_string(),
                                    fmt_f(Some(w)),
                                    fmt_f(Some(w / std::f64::consts::PI)),
                                ]);
                            }
                        }
                    }
                    hit_rates
                        .insert(format!("{}/{alg}", setting_label(e)), json!({ "hits": hits, "trials": rs.len() }));
                }
            }
            extra.insert("peaks_within_one_grid_step".into(), serde_json::Value::Object(hit_rates));
            tables.push(("fig8".into(), spec_t));
            tables.push(("fig8_peaks".into(), peaks));
        }
        ("table1", StudyResult::Mse { experiments }) => {
            let mut t = Table::new(&["setting", "init", "crb", "bfpp", "lsfpp", "phaselift", "phasecut", "wf", "gs"]);
            for e in experiments {
                let snr = e.spec.snr_grid_db[0];
                let cell = |a: Algorithm| e.cell(a, snr);
                let crb = e.cells.first().and_then(|c| c.crb_signal_db);
                let mut row = vec![setting_label(e), e.spec.init.name().to_string(), fmt_f(crb)];
                for a in [Algorithm::Bfpp, Algorithm::Lsfpp] {
                    row.push(fmt_f(cell(a).and_then(|c| c.mse_signal_db)));
                }
                row.push("n/a".into());
                row.push("n/a".into());
                for a in [Algorithm::Wf, Algorithm::Gs] {
                    row.push(fmt_f(cell(a).and_then(|c| c.mse_signal_db)));
                }
                t.rows.push(row);
            }
            tables.push(("table1".into(), t));
        }
        ("table2", StudyResult::Mse { experiments }) => {
            let mut t = Table::new(&["setting", "init", "bfpp", "lsfpp", "phaselift", "phasecut", "wf", "gs"]);
            let mut failures = Vec::new();
            for e in experiments {
                let o = outage_table(e);
                let pct = |a: Algorithm| o.rows.iter().find(|r| r.algorithm == a).map(|r| r.outage_pct);
                let mut row = vec![setting_label(e), e.spec.init.name().to_string()];
                for a in [Algorithm::Bfpp, Algorithm::Lsfpp] {
                    row.push(fmt_f(pct(a)));
                }
                row.push("n/a".into());
                row.push("n/a".into());
                for a in [Algorithm::Wf, Algorithm::Gs] {
                    row.push(fmt_f(pct(a)));
                }
                t.rows.push(row);
                failures.extend(o.rows);
            }
            extra.insert("rows".into(), json!(failures));
            tables.push(("table2".into(), t));
        }
        ("fig3_4", StudyResult::Mse { experiments }) => {
            let mut t = Table::new(&["setting", "init", "algorithm", "lo_db", "hi_db", "count"]);
            for e in experiments {
                for b in outage_table(e).histogram {
                    t.rows.push(vec![
                        b.setting,
                        b.init,
                        b.algorithm.to_string(),
                        fmt_f(Some(b.lo_db)),
                        fmt_f(Some(b.hi_db)),
                        b.count.to_string(),
                    ]);
                }
            }
            tables.push(("fig3_4".into(), t));
        }
        _ => return Err(wrong()),
    }

    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let mut files = Vec::new();
    for (name, t) in &tables {
        let p = out_dir.join(format!("{name}.csv"));
        t.write(&p)?;
        files.push(json!({ "file": format!("{name}.csv"), "columns": t.header }));
        written.push(p);
    }
    let meta = json!({
        "figure_id": figure_id,
        "generator": format!("fpp-harness {}", env!("CARGO_PKG_VERSION")),
        "git_describe": GIT_DESCRIBE,
        "study": result.kind(),
        "base_seeds": result.seeds(),
        "spec": result.spec_echo(),
        "files": files,
        "extra": serde_json::Value::Object(extra),
    });
    let p = out_dir.join(format!("{figure_id}.json"));
    fs::write(&p, serde_json::to_string_pretty(&meta)? + "\n")?;
    written.push(p);
    Ok(written)
}

fn dict_step(grid: &[f64]) -> f64 {
    if grid.len() < 2 {
        f64::INFINITY
    } else {
        (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64
    }
}

/// True when every true frequency has an estimate within `step` (sorted
/// pairing; both lists ascending).
pub fn peaks_hit(estimates: &[f64], truth: &[f64], step: f64) -> bool {
    let mut t = truth.to_vec();
    t.sort_by(|a, b| a.total_cmp(b));
    estimates.len() == t.len() && estimates.iter().zip(&t).all(|(e, w)| (e - w).abs() <= step * (1.0 + 1e-9))
}

/// Mean signal MSE in dB of a set of squared errors.
pub fn mean_db(sq: &[f64]) -> Option<f64> {
    if sq.is_empty() {
        None
    } else {
        Some(to_db(sq.iter().sum::<f64>() / sq.len() as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::run::{summarize_cell, TrialRecord};
    use crate::spec::{BaselineParams, EnsembleSpec, ExperimentSpec, FppParams, InitKind, SignalSpec};
    use fpp_core::signal::ErrorReport;

    fn record(trial: usize, mse_db: f64) -> TrialRecord {
        let sq = 10f64.powf(mse_db / 10.0);
        TrialRecord {
            algorithm: Algorithm::Lsfpp,
            snr_db: 25.0,
            trial,
            sigma_n: 0.1,
            outcome: if mse_db > 0.0 { Outcome::Outage } else { Outcome::Success },
            report: Some(ErrorReport {
                mse_signal_db: mse_db,
                mse_amplitude_db: mse_db,
                mse_phase_db: mse_db,
                aligned_phase: 0.0,
                is_outage: mse_db > 0.0,
                sq_err_signal: sq,
                sq_err_amplitude: sq,
                sq_err_phase: sq,
            }),
            iterations: 1,
            inexact_steps: 0,
            ls_cost: Some(0.0),
            error: None,
            frequencies: None,
            spectrum: None,
        }
    }

    fn result(records: Vec<TrialRecord>) -> ExperimentResult {
        let spec = ExperimentSpec {
            label: "synthetic".into(),
            ensemble: EnsembleSpec::gaussian(4, 16),
            signal: SignalSpec::Gaussian { seed: 1 },
            snr_grid_db: vec![25.0],
            trials: records.len().max(1),
            algorithms: vec![Algorithm::Lsfpp],
            init: InitKind::Spectral,
            base_seed: 0,
            fixed_ensemble: false,
            crb: false,
            keep_spectra: false,
            fpp: FppParams::default(),
            baseline: BaselineParams::default(),
            dictionary: None,
        };
        let rs: Vec<&TrialRecord> = records.iter().collect();
        let cells = vec![summarize_cell(Algorithm::Lsfpp, 25.0, &rs, &[])];
        ExperimentResult { spec, cells, records, crb: Vec::new() }
    }

    #[test]
    fn three_of_ten_outages_is_thirty_percent() {
        let recs: Vec<_> = (0..10).map(|t| record(t, if t < 3 { 3.0 } else { -12.0 })).collect();
        let r = result(recs);
        let o = outage_table(&r);
        assert_eq!(o.rows.len(), 1);
        assert!((o.rows[0].outage_pct - 30.0).abs() < 1e-12);
        let c = &r.cells[0];
        assert_eq!(c.successes + c.outages + c.failures, c.trials);
        assert!((c.mse_signal_db.unwrap() - (-12.0)).abs() < 1e-9, "outages excluded from the mean");
    }

    #[test]
    fn all_trials_at_floor_have_no_outage() {
        let recs: Vec<_> = (0..5).map(|t| record(t, fpp_core::scalar::DB_FLOOR)).collect();
        let o = outage_table(&result(recs));
        assert_eq!(o.rows[0].outage_pct, 0.0);
        let total: usize = o.histogram.iter().map(|b| b.count).sum();
        assert_eq!(total, 5);
        assert_eq!(o.histogram[0].count, 5, "floor lands in the open lower bin");
    }

    #[test]
    fn empty_result_gives_header_only_csv() {
        let dir = tempfile::tempdir().unwrap();
        let r = StudyResult::Mse { experiments: vec![] };
        let files = emit_figure_data(&r, "fig5_6", dir.path()).unwrap();
        let csv = fs::read_to_string(&files[0]).unwrap();
        assert_eq!(csv.lines().count(), 1);
        assert!(csv.starts_with("setting,algorithm,snr_db,"));
    }

    #[test]
    fn table1_has_crb_four_algorithms_and_two_na_columns() {
        let dir = tempfile::tempdir().unwrap();
        let recs: Vec<_> = (0..4).map(|t| record(t, -11.0)).collect();
        let r = StudyResult::Mse { experiments: vec![result(recs)] };
        let files = emit_figure_data(&r, "table1", dir.path()).unwrap();
        let csv = fs::read_to_string(&files[0]).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "setting,init,crb,bfpp,lsfpp,phaselift,phasecut,wf,gs");
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 9);
        assert_eq!(row[5], "n/a");
        assert_eq!(row[6], "n/a");
        assert_eq!(row[4], format!("{:.16e}", -11.0f64));
        let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(&files[1]).unwrap()).unwrap();
        assert_eq!(meta["figure_id"], "table1");
        assert!(meta["git_describe"].is_string());
    }

    #[test]
    fn unknown_figure_and_mismatched_study_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let r = StudyResult::Mse { experiments: vec![] };
        assert!(matches!(emit_figure_data(&r, "fig9", dir.path()), Err(HarnessError::UnknownFigure(..))));
        assert!(matches!(emit_figure_data(&r, "fig1", dir.path()), Err(HarnessError::WrongStudy(..))));
    }

    #[test]
    fn floats_use_seventeen_significant_digits() {
        assert_eq!(fmt_f(Some(0.1)), "1.0000000000000001e-1");
        assert_eq!(fmt_f(None), "");
        let back: f64 = fmt_f(Some(std::f64::consts::PI)).parse().unwrap();
        assert_eq!(back, std::f64::consts::PI);
    }

    #[test]
    fn peak_hits_pair_sorted_lists() {
        let step = std::f64::consts::PI / 50.0;
        let t = [0.5, -0.5];
        assert!(peaks_hit(&[-0.5 + 0.9 * step, 0.5], &t, step));
        assert!(!peaks_hit(&[-0.5 + 1.5 * step, 0.5], &t, step));
        assert!(!peaks_hit(&[0.5], &t, step));
    }
}
