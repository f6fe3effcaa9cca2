use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use fpp_core::baselines::{gerchberg_saxton, wirtinger_flow};
use fpp_core::crb::{fim_amp_phase, fim_complex, fim_harmonic, fim_real, FimResult};
use fpp_core::fpp::{refine_frequencies, run_bfpp, run_lsfpp, run_sparse_bfpp, run_sparse_lsfpp};
use fpp_core::measurements::{build_dictionary, harmonic_signal, project_dictionary, HarmonicModel};
use fpp_core::rng::{derive_seed, label};
use fpp_core::scalar::to_db;
use fpp_core::signal::{db_to_linear, error_report, sigma_from_snr, ErrorReport};
use fpp_core::{Instance, Signal, Trace};
use fpp_harness::spec::{BaselineParams, EnsembleKindSpec, FppParams};
use fpp_harness::{Algorithm, EnsembleSpec, InitKind, Preset};

use crate::config::{echo, usage};

fn skip_false(b: &bool) -> bool {
    !*b
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading instance {}", path.display()))?;
    let inst: Instance = serde_json::from_str(&text).map_err(|e| usage(format!("instance {}: {e}", path.display())))?;
    inst.validate()?;
    Ok(inst)
}

fn harmonic_model(freqs_pi: &[f64], n: usize) -> Result<HarmonicModel<f64>> {
    Ok(HarmonicModel::unit(freqs_pi.iter().map(|f| f * PI).collect(), n)?)
}

#[derive(Debug, Default, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenArgs {
    /// Measurement ensemble.
    #[arg(long, value_parser = ["gaussian", "masked-fourier"])]
    pub kind: Option<String>,
    /// Signal length N.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of measurements M (a multiple of N for masked Fourier).
    #[arg(long)]
    pub m: Option<usize>,
    /// Number of masks K for masked Fourier (M = K·N).
    #[arg(long)]
    pub k: Option<usize>,
    /// Seed for the ensemble, signal and noise draws.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Ground-truth signal: circular Gaussian entries or unit harmonics.
    #[arg(long, value_parser = ["random", "harmonic"])]
    pub signal: Option<String>,
    /// Harmonic frequencies in multiples of π.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub freqs: Option<Vec<f64>>,
    /// Adds Gaussian noise at this SNR; noiseless when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub snr_db: Option<f64>,
    /// Leaves the ground truth out of the instance file.
    #[arg(long)]
    #[serde(skip_serializing_if = "skip_false")]
    pub no_truth: bool,
    /// Instance file, relative to the output directory.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct GenResolved {
    ensemble: EnsembleSpec,
    seed: u64,
    signal: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    freqs: Option<Vec<f64>>,
    snr_db: Option<f64>,
    no_truth: bool,
    output: PathBuf,
}

pub fn gen(args: GenArgs, out_dir: &Path) -> Result<()> {
    let kind = match args.kind.as_deref() {
        Some("gaussian") => EnsembleKindSpec::Gaussian,
        Some("masked-fourier") | Some("masked_fourier") => EnsembleKindSpec::MaskedFourier,
        Some(k) => return Err(usage(format!("unknown ensemble kind `{k}` (gaussian, masked-fourier)"))),
        None => return Err(usage("--kind is required")),
    };
    let n = args.n.ok_or_else(|| usage("--n is required"))?;
    let seed = args.seed.ok_or_else(|| usage("--seed is required: every draw is seeded explicitly"))?;
    let ensemble = EnsembleSpec { kind, n, m: args.m, k: args.k };
    ensemble.m()?;
    let signal = args.signal.unwrap_or_else(|| "random".into());
    let freqs = match signal.as_str() {
        "harmonic" => Some(args.freqs.unwrap_or_else(|| vec![0.16])),
        "random" => None,
        s => return Err(usage(format!("unknown signal `{s}` (random, harmonic)"))),
    };
    let resolved = GenResolved {
        ensemble,
        seed,
        signal,
        freqs,
        snr_db: args.snr_db,
        no_truth: args.no_truth,
        output: out_dir.join(args.output.unwrap_or_else(|| "instance.json".into())),
    };
    echo("gen", &resolved)?;

    let ens = resolved.ensemble.draw(derive_seed(seed, &[label("ensemble")]))?;
    let x: Signal = match &resolved.freqs {
        Some(f) => harmonic_signal(&harmonic_model(f, n)?)?,
        None => Signal::random(n, derive_seed(seed, &[label("signal")]))?,
    };
    let sigma = match resolved.snr_db {
        Some(db) => sigma_from_snr(&ens, &x, db_to_linear(db))?,
        None => 0.0,
    };
    let mut inst = Instance::simulate(ens, x, sigma, derive_seed(seed, &[label("noise")]))?;
    if resolved.no_truth {
        inst.truth = None;
    }
    if let Some(dir) = resolved.output.parent() {
        fs::create_dir_all(dir)?;
    }
    write_json(&resolved.output, &inst)?;
    println!("wrote {}: {}, sigma_n {:.6e}", resolved.output.display(), resolved.ensemble.label(), sigma);
    Ok(())
}

#[derive(Debug, Default, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveArgs {
    /// Instance file written by `gen`.
    pub instance: Option<PathBuf>,
    /// Algorithm: bfpp, lsfpp, sparse-bfpp, sparse-lsfpp, wf or gs.
    #[arg(long)]
    pub algo: Option<String>,
    /// Slack penalty of B-FPP and LS-FPP.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// B-FPP interval half-width; defaults to the instance's sigma_n.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Sparse B-FPP slack penalty, or sparse LS-FPP l1 weight.
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// Sparse LS-FPP slack penalty.
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    #[arg(long)]
    pub outer_tol: Option<f64>,
    #[arg(long)]
    pub inner_tol: Option<f64>,
    #[arg(long)]
    pub inner_max_iter: Option<u32>,
    /// WF and GS iteration cap.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// WF and GS relative stopping tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Initial point: spectral or random (random needs --seed).
    #[arg(long, value_parser = ["spectral", "random"])]
    pub init: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sparse variants: dictionary size P.
    #[arg(long)]
    pub dict_p: Option<usize>,
    /// Sparse variants: dictionary band edges in multiples of π.
    #[arg(long, allow_hyphen_values = true)]
    pub band_lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub band_hi: Option<f64>,
    /// Sparse variants: number of spectral peaks to report.
    #[arg(long)]
    pub peaks: Option<usize>,
}

#[derive(Debug, Serialize)]
struct SolveResolved {
    instance: PathBuf,
    algo: Algorithm,
    init: InitKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fpp: Option<FppParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline: Option<BaselineParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dictionary: Option<(usize, f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    peaks: Option<usize>,
}

#[derive(Debug, Serialize)]
struct Estimate {
    algorithm: Algorithm,
    estimate: Signal,
    #[serde(skip_serializing_if = "Option::is_none")]
    coefficients: Option<Signal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    frequencies: Option<Vec<f64>>,
    iterations: usize,
    converged: bool,
    objective: Option<f64>,
    ls_cost: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<ErrorReport>,
}

pub fn solve(args: SolveArgs, out_dir: &Path) -> Result<()> {
    let instance = args.instance.ok_or_else(|| usage("an instance file is required"))?;
    let algo = match args.algo.as_deref() {
        Some(a) => Algorithm::parse(a).ok_or_else(|| {
            usage(format!("unknown algorithm `{a}` (bfpp, lsfpp, sparse-bfpp, sparse-lsfpp, wf, gs)"))
        })?,
        None => return Err(usage("--algo is required")),
    };
    let init = match args.init.as_deref() {
        None | Some("spectral") => InitKind::Spectral,
        Some("random") => InitKind::Random,
        Some(s) => return Err(usage(format!("unknown init `{s}` (spectral, random)"))),
    };
    if init == InitKind::Random && args.seed.is_none() {
        return Err(usage("--init random needs --seed"));
    }
    let uses_fpp = !matches!(algo, Algorithm::Wf | Algorithm::Gs);
    let fpp = uses_fpp.then(|| {
        let d = FppParams::default();
        FppParams {
            lambda: args.lambda.unwrap_or(d.lambda),
            epsilon: args.epsilon.or(d.epsilon),
            lambda1: args.lambda1.unwrap_or(d.lambda1),
            lambda2: args.lambda2.unwrap_or(d.lambda2),
            outer_tol: args.outer_tol.unwrap_or(d.outer_tol),
            max_outer: args.max_outer.unwrap_or(d.max_outer),
            inner_tol: args.inner_tol.unwrap_or(d.inner_tol),
            inner_max_iter: args.inner_max_iter.unwrap_or(d.inner_max_iter),
        }
    });
    let baseline = (!uses_fpp).then(|| {
        let d = BaselineParams::default();
        BaselineParams { max_iter: args.max_iter.unwrap_or(d.max_iter), tol: args.tol.unwrap_or(d.tol), ..d }
    });
    let dictionary = algo
        .is_sparse()
        .then(|| (args.dict_p.unwrap_or(51), args.band_lo.unwrap_or(-0.5), args.band_hi.unwrap_or(0.5)));
    let resolved = SolveResolved {
        instance,
        algo,
        init,
        seed: args.seed,
        fpp,
        baseline,
        dictionary,
        peaks: algo.is_sparse().then(|| args.peaks.unwrap_or(1)),
    };
    echo("solve", &resolved)?;

    let inst = read_instance(&resolved.instance)?;
    let strategy = init.strategy(resolved.seed.unwrap_or(0));
    let mut coefficients = None;
    let mut frequencies = None;
    let (x, trace): (Signal, Trace) = match algo {
        Algorithm::Bfpp => run_bfpp(&inst, &resolved.fpp.as_ref().unwrap().config(strategy))?,
        Algorithm::Lsfpp => run_lsfpp(&inst, &resolved.fpp.as_ref().unwrap().config(strategy))?,
        Algorithm::Wf => wirtinger_flow(&inst, &resolved.baseline.as_ref().unwrap().config(strategy))?,
        Algorithm::Gs => gerchberg_saxton(&inst, &resolved.baseline.as_ref().unwrap().config(strategy))?,
        Algorithm::SparseBfpp | Algorithm::SparseLsfpp => {
            let (p, lo, hi) = resolved.dictionary.unwrap();
            let dict = build_dictionary(inst.ensemble.n(), p, (lo * PI, hi * PI))?;
            let projected = project_dictionary(&inst.ensemble, &dict)?;
            let mut cfg = resolved.fpp.as_ref().unwrap().config(strategy);
            cfg.epsilon = Some(cfg.epsilon_for(inst.sigma_n));
            let (c, tr) = if algo == Algorithm::SparseBfpp {
                run_sparse_bfpp(&projected, &inst.y, &dict, &cfg)?
            } else {
                run_sparse_lsfpp(&projected, &inst.y, &dict, &cfg)?
            };
            frequencies = Some(refine_frequencies(c.values(), &dict, resolved.peaks.unwrap())?);
            let x = dict.synthesize(c.values())?;
            coefficients = Some(c);
            (x, tr)
        }
    };
    let error = inst.truth.as_ref().map(|t| error_report(&x, t)).transpose()?;
    let est = Estimate {
        algorithm: algo,
        ls_cost: inst.ls_cost(x.values())?,
        objective: trace.last().map(|r| r.objective),
        iterations: trace.iterations,
        converged: trace.converged,
        estimate: x,
        coefficients,
        frequencies,
        error,
    };
    fs::create_dir_all(out_dir)?;
    let est_path = out_dir.join("estimate.json");
    write_json(&est_path, &est)?;
    let trace_path = out_dir.join("trace.jsonl");
    let mut w =
        BufWriter::new(File::create(&trace_path).with_context(|| format!("creating {}", trace_path.display()))?);
    trace.write_json_lines(&mut w)?;
    w.flush()?;

    let mut line = format!(
        "{algo}: {} iterations ({}), final cost {:.6e}, ls cost {:.6e}",
        est.iterations,
        if est.converged { "converged" } else { "iteration cap" },
        est.objective.unwrap_or(f64::NAN),
        est.ls_cost
    );
    if let Some(e) = &est.error {
        line += &format!(", mse {:.4} dB", e.mse_signal_db);
    }
    if let Some(f) = &est.frequencies {
        let pi: Vec<String> = f.iter().map(|w| format!("{:.4}", w / PI)).collect();
        line += &format!(", peaks/pi [{}]", pi.join(", "));
    }
    println!("{line}");
    println!("wrote {} and {}", est_path.display(), trace_path.display());
    Ok(())
}

#[derive(Debug, Default, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrbArgs {
    /// Instance file written by `gen`.
    pub instance: Option<PathBuf>,
    /// Parametrization of the bound.
    #[arg(long, value_parser = ["complex", "real", "amp-phase", "harmonic"])]
    pub param: Option<String>,
    /// Noise standard deviation; defaults to the instance's sigma_n.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Harmonic model frequencies in multiples of π (unit amplitudes).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub freqs: Option<Vec<f64>>,
}

#[derive(Debug, Serialize)]
struct CrbResolved {
    instance: PathBuf,
    param: String,
    sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    freqs: Option<Vec<f64>>,
}

pub fn crb(args: CrbArgs, out_dir: &Path) -> Result<()> {
    let instance = args.instance.ok_or_else(|| usage("an instance file is required"))?;
    let param = args.param.ok_or_else(|| usage("--param is required"))?;
    let param = param.replace('_', "-");
    let inst = read_instance(&instance)?;
    let sigma = match args.sigma {
        Some(s) => s,
        None if inst.sigma_n > 0.0 => inst.sigma_n,
        None => return Err(usage("noiseless instance: pass --sigma")),
    };
    let freqs = if param == "harmonic" {
        Some(args.freqs.ok_or_else(|| usage("--param harmonic needs --freqs"))?)
    } else {
        None
    };
    let resolved = CrbResolved { instance, param, sigma, freqs };
    echo("crb", &resolved)?;

    let truth = || inst.truth.as_ref().ok_or_else(|| usage("the instance carries no ground truth"));
    let ens = &inst.ensemble;
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("crb.json");
    let report = |f: &FimResult<f64>| {
        let tr = f.crb_trace();
        println!("trace(CRB) = {:.6} dB ({tr:.6e}), rank {} of {}", to_db(tr), f.rank, f.dim());
    };
    match resolved.param.as_str() {
        "complex" => {
            let f = fim_complex(ens, truth()?, sigma)?;
            report(&f);
            write_json(&path, &f)?;
        }
        "real" => {
            let t = truth()?;
            if !t.is_real() {
                return Err(usage("--param real needs a real-valued ground truth"));
            }
            let re: Vec<f64> = t.values().iter().map(|c| c.re).collect();
            let f = fim_real(ens, &re, sigma)?;
            report(&f);
            write_json(&path, &f)?;
        }
        "amp-phase" => {
            let ap = fim_amp_phase(ens, truth()?, sigma)?;
            report(&ap.full);
            println!(
                "amplitude block {:.6} dB, phase block {:.6} dB",
                to_db(ap.crb_b.trace()),
                to_db(ap.crb_theta.trace())
            );
            write_json(&path, &ap)?;
        }
        "harmonic" => {
            let model = harmonic_model(resolved.freqs.as_deref().unwrap(), ens.n())?;
            let f = fim_harmonic(ens, &model, sigma)?;
            report(&f);
            println!("frequency block {:.6} dB", to_db(f.block_trace(0, model.len())));
            write_json(&path, &f)?;
        }
        p => return Err(usage(format!("unknown parametrization `{p}`"))),
    }
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Debug, Default, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchArgs {
    /// Named preset: fig1, fig2, fig5, fig6, fig7, fig8, table1 or table2.
    #[arg(long, conflicts_with = "spec")]
    pub preset: Option<String>,
    /// Preset file in the same TOML layout as the named presets.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Runs the preset's full-scale trial count.
    #[arg(long)]
    #[serde(skip_serializing_if = "skip_false")]
    pub full: bool,
    /// Overrides the trial count.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Rederives every base seed of the preset from this seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn bench(args: BenchArgs, out_dir: &Path) -> Result<()> {
    let mut preset = match (&args.preset, &args.spec) {
        (Some(name), None) => Preset::named(name)?,
        (None, Some(path)) => Preset::from_file(path)?,
        _ => return Err(usage("pass exactly one of --preset or --spec")),
    };
    if args.full && args.trials.is_some() {
        return Err(usage("--full and --trials are mutually exclusive"));
    }
    if args.full {
        let t = preset.full_trials.unwrap_or_else(|| preset.trials());
        preset.set_trials(t);
    }
    if let Some(t) = args.trials {
        preset.set_trials(t);
    }
    if let Some(s) = args.seed {
        preset.reseed(s);
    }
    if args.jobs == Some(0) {
        return Err(usage("--jobs must be positive"));
    }
    echo("bench", &preset)?;
    let result = preset.run(args.jobs)?;
    fs::create_dir_all(out_dir)?;
    let files = preset.emit(&result, out_dir)?;
    let raw = out_dir.join(format!("{}_result.json", preset.id));
    write_json(&raw, &result)?;
    for f in files.iter().chain([&raw]) {
        println!("wrote {}", f.display());
    }
    Ok(())
}
