//! `robinv`: synthesis, certification and Monte Carlo evaluation of robust
//! linear and polyhedral estimates for linear inverse problems with an
//! uncertain observation matrix.

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use robinv_cli::deconv::DeconvConfig;
use robinv_cli::experiment::run_deconv;
use robinv_cli::out::{ensure_dir, write_error_csv, write_json};
use robinv_core::conic::SolveSettings;
use robinv_core::geometry::linalg::{mat_from_rows, mat_to_rows};
use robinv_core::geometry::{Ellitope, ErrorNorm};
use robinv_core::linear::{risk_bound_linear, synthesize_linear, UncertaintyModel};
use robinv_core::polyhedral::{
    extract_contrasts, recover_poly, risk_bound_poly, synthesize_poly_ball, ContrastMatrix,
    HSetSpec, PolyBallSynthesis,
};
use robinv_core::robust::{
    robust_norm_bound, robust_norm_oracle, synthesize_linear_ubb, synthesize_poly_ubb_ball,
    StructuredUncertainty, UbbModel,
};
use robinv_core::stochastics::monte_carlo_risk;
use robinv_core::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

type Mat = DMatrix<f64>;
type Vec64 = DVector<f64>;

#[derive(Parser)]
#[command(name = "robinv", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Relative duality-gap tolerance of the conic solver.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol_gap: f64,
    /// Feasibility tolerance of the conic solver.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol_feas: f64,
    /// Directory for JSON summaries and CSV samples.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Dump each assembled conic program to this file before solving.
    #[arg(long, global = true)]
    dump_program: Option<PathBuf>,
}

#[derive(Args)]
struct ProblemFiles {
    /// Observation model JSON (A, A_alpha, B, sigma, law tags).
    #[arg(long)]
    model: PathBuf,
    /// Signal-set ellitope JSON; the unit ball of dimension n when omitted.
    #[arg(long)]
    signal_set: Option<PathBuf>,
    /// Error-norm JSON; the Euclidean norm when omitted.
    #[arg(long)]
    norm: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EstimatorKind {
    Linear,
    Poly,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a robust linear estimate (random matrix uncertainty).
    SynthLinear(ProblemFiles),
    /// Synthesize a robust linear estimate under structured norm-bounded
    /// uncertainty.
    SynthLinearUbb {
        #[command(flatten)]
        files: ProblemFiles,
        /// StructuredUncertainty JSON ({"scalar_blocks":[..],"general_blocks":[..]}).
        #[arg(long)]
        uncertainty: PathBuf,
    },
    /// Ball-case polyhedral synthesis plus randomized contrast extraction.
    SynthPolyBall {
        #[command(flatten)]
        files: ProblemFiles,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Ball-case polyhedral synthesis for uncertain-but-bounded perturbations
    /// (the admissible set (equivto): uncertainty threshold 1/2).
    SynthPolyUbb {
        #[command(flatten)]
        files: ProblemFiles,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Certify the risk of a given contrast matrix.
    Certify {
        #[command(flatten)]
        files: ProblemFiles,
        /// Contrast JSON: {"rows": [...]} for linear, a ContrastMatrix for poly.
        #[arg(long)]
        h: PathBuf,
        #[arg(long, value_enum, default_value_t = EstimatorKind::Linear)]
        kind: EstimatorKind,
    },
    /// Monte Carlo evaluation of an estimator against its certificate.
    RiskEval {
        #[command(flatten)]
        files: ProblemFiles,
        #[arg(long)]
        h: PathBuf,
        #[arg(long, value_enum, default_value_t = EstimatorKind::Linear)]
        kind: EstimatorKind,
        /// JSON array of signal vectors; gauge-normalized coordinate
        /// directions when omitted.
        #[arg(long)]
        signals: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        n_mc: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Robust norm of an uncertain matrix between two ellitopes.
    RobustNorm {
        #[arg(long)]
        uncertainty: PathBuf,
        /// Argument-side ellitope JSON.
        #[arg(long)]
        x: PathBuf,
        /// Image-side ellitope JSON (the polar of this set is the norm ball).
        #[arg(long)]
        bstar: PathBuf,
        #[arg(long, default_value_t = 200)]
        budget: usize,
    },
    /// Reproduce a paper-style experiment.
    Experiment {
        #[command(subcommand)]
        which: ExperimentCommand,
    },
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// The deconvolution scenario with an uncertain kernel.
    Deconv {
        /// Comma-separated uncertainty levels.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1e-3, 1e-2, 1e-1, 1.0])]
        gamma: Vec<f64>,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long, default_value_t = 500)]
        n_mc: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        n: usize,
        #[arg(long, default_value_t = 32)]
        m: usize,
        #[arg(long, default_value_t = 16)]
        nu: usize,
        #[arg(long, default_value_t = 1e-4)]
        sigma: f64,
        /// JSON file with kernel taps; built-in truncated Gaussian otherwise.
        #[arg(long)]
        kernel: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("cannot parse {}: {e}", path.display())))
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    rows: Vec<Vec<f64>>,
}

fn load_matrix(path: &Path) -> Result<Mat> {
    let file: MatrixFile = load_json(path)?;
    mat_from_rows(&file.rows)
}

fn signal_set_or_ball(files: &ProblemFiles, n: usize) -> Result<Ellitope> {
    match &files.signal_set {
        Some(path) => load_json(path),
        None => Ok(Ellitope::unit_ball(n)),
    }
}

fn norm_or_euclidean(files: &ProblemFiles, nu: usize) -> Result<ErrorNorm> {
    match &files.norm {
        Some(path) => load_json(path),
        None => Ok(ErrorNorm::euclidean(nu)),
    }
}

fn emit(out_dir: Option<&Path>, name: &str, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    println!("{text}");
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        write_json(&dir.join(name), value)?;
    }
    Ok(())
}

fn default_signals(set: &Ellitope, count: usize) -> Vec<Vec64> {
    let n = set.latent_dim();
    (0..count.min(n))
        .map(|i| {
            let mut e = Vec64::zeros(n);
            e[i] = 1.0;
            let g = set.gauge(&e).unwrap_or(1.0);
            e / g.max(1e-300)
        })
        .collect()
}

fn run_poly_synthesis(
    files: &ProblemFiles,
    trials: usize,
    seed: u64,
    ubb: bool,
    out_dir: Option<&Path>,
    settings: &SolveSettings,
) -> Result<()> {
    let model: UncertaintyModel = load_json(&files.model)?;
    let norm = norm_or_euclidean(files, model.nu())?;
    let synth: PolyBallSynthesis = if ubb {
        synthesize_poly_ubb_ball(&model, &norm, files.eps, settings)?
    } else {
        synthesize_poly_ball(&model, &norm, files.eps, settings)?
    };
    let contrast = extract_contrasts(&synth, trials, seed, settings)?;
    let set = Ellitope::unit_ball(model.n());
    let certified = risk_bound_poly(
        &contrast, &model.b, &model.a, &set, &norm, &synth.hspec, settings,
    )?;
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        write_json(&dir.join("contrast.json"), &contrast)?;
    }
    emit(
        out_dir,
        if ubb { "synth_poly_ubb.json" } else { "synth_poly_ball.json" },
        &json!({
            "opt": synth.opt,
            "varkappa": synth.varkappa,
            "risk_bound": synth.risk_bound,
            "certified_bound": certified,
            "delta": synth.delta,
            "seed": seed,
            "trials": trials,
            "block_gauges": contrast.block_gauges,
        }),
    )
}

fn run(cli: Cli) -> Result<()> {
    let settings = SolveSettings {
        gap_tol: cli.tol_gap,
        feas_tol: cli.tol_feas,
        dump_path: cli.dump_program.clone(),
        ..SolveSettings::default()
    };
    let out_dir = cli.out_dir.as_deref();
    match cli.command {
        Command::SynthLinear(files) => {
            let model: UncertaintyModel = load_json(&files.model)?;
            let set = signal_set_or_ball(&files, model.n())?;
            let norm = norm_or_euclidean(&files, model.nu())?;
            let (model, set) = model.fold_signal_map(&set)?;
            let (h, cert) = synthesize_linear(&model, &set, &norm, files.eps, &settings)?;
            if let Some(dir) = out_dir {
                ensure_dir(dir)?;
                write_json(&dir.join("h.json"), &MatrixFile { rows: mat_to_rows(&h) })?;
            }
            emit(
                out_dir,
                "synth_linear.json",
                &json!({"bound": cert.bound, "eps": cert.eps, "certificate": cert, "h": mat_to_rows(&h)}),
            )
        }
        Command::SynthLinearUbb { files, uncertainty } => {
            let model: UncertaintyModel = load_json(&files.model)?;
            let unc: StructuredUncertainty = load_json(&uncertainty)?;
            let set = signal_set_or_ball(&files, model.n())?;
            let norm = norm_or_euclidean(&files, model.nu())?;
            let ubb = UbbModel {
                a: model.a.clone(),
                b: model.b.clone(),
                sigma: model.sigma,
                uncertainty: unc,
            };
            let (h, bound) = synthesize_linear_ubb(&ubb, &set, &norm, files.eps, &settings)?;
            if let Some(dir) = out_dir {
                ensure_dir(dir)?;
                write_json(&dir.join("h.json"), &MatrixFile { rows: mat_to_rows(&h) })?;
            }
            emit(
                out_dir,
                "synth_linear_ubb.json",
                &json!({
                    "bound": bound.total,
                    "noise_term": bound.noise,
                    "uncertainty_term": bound.uncertainty,
                    "bias_term": bound.bias,
                    "h": mat_to_rows(&h),
                }),
            )
        }
        Command::SynthPolyBall { files, trials, seed } => {
            run_poly_synthesis(&files, trials, seed, false, out_dir, &settings)
        }
        Command::SynthPolyUbb { files, trials, seed } => {
            run_poly_synthesis(&files, trials, seed, true, out_dir, &settings)
        }
        Command::Certify { files, h, kind } => {
            let model: UncertaintyModel = load_json(&files.model)?;
            let set = signal_set_or_ball(&files, model.n())?;
            let norm = norm_or_euclidean(&files, model.nu())?;
            match kind {
                EstimatorKind::Linear => {
                    let hm = load_matrix(&h)?;
                    let (model, set) = model.fold_signal_map(&set)?;
                    let cert = risk_bound_linear(&hm, &model, &set, &norm, files.eps, &settings)?;
                    emit(
                        out_dir,
                        "certify.json",
                        &json!({"kind": "linear", "bound": cert.bound, "certificate": cert}),
                    )
                }
                EstimatorKind::Poly => {
                    let contrast: ContrastMatrix = load_json(&h)?;
                    let m_total = contrast.total_columns().max(1);
                    let delta = files.eps / (m_total.max(1)) as f64;
                    let hspec = HSetSpec::new(
                        model.sigma,
                        delta.min(0.5),
                        model.a_perturb.clone(),
                        set.clone(),
                    )?;
                    let bound = risk_bound_poly(
                        &contrast, &model.b, &model.a, &set, &norm, &hspec, &settings,
                    )?;
                    emit(
                        out_dir,
                        "certify.json",
                        &json!({"kind": "poly", "bound": bound, "delta": hspec.delta}),
                    )
                }
            }
        }
        Command::RiskEval {
            files,
            h,
            kind,
            signals,
            n_mc,
            seed,
        } => {
            let model: UncertaintyModel = load_json(&files.model)?;
            let set = signal_set_or_ball(&files, model.n())?;
            let norm = norm_or_euclidean(&files, model.nu())?;
            let sigs: Vec<Vec64> = match signals {
                Some(path) => {
                    let raw: Vec<Vec<f64>> = load_json(&path)?;
                    raw.into_iter().map(Vec64::from_vec).collect()
                }
                None => default_signals(&set, 3),
            };
            let mc = match kind {
                EstimatorKind::Linear => {
                    let hm = load_matrix(&h)?;
                    monte_carlo_risk(
                        &|omega: &Vec64| hm.transpose() * omega,
                        &model,
                        &sigs,
                        &norm,
                        n_mc,
                        files.eps,
                        seed,
                    )?
                }
                EstimatorKind::Poly => {
                    let contrast: ContrastMatrix = load_json(&h)?;
                    let est_settings = settings.clone();
                    let nu = model.nu();
                    let a = model.a.clone();
                    let b = model.b.clone();
                    let set2 = set.clone();
                    monte_carlo_risk(
                        &move |omega: &Vec64| {
                            recover_poly(&contrast, omega, &a, &set2, &b, &est_settings)
                                .map(|(_, w)| w)
                                .unwrap_or_else(|_| Vec64::zeros(nu))
                        },
                        &model,
                        &sigs,
                        &norm,
                        n_mc,
                        files.eps,
                        seed,
                    )?
                }
            };
            if let Some(dir) = out_dir {
                ensure_dir(dir)?;
                write_error_csv(&dir.join("errors.csv"), &mc.samples)?;
            }
            emit(
                out_dir,
                "risk_eval.json",
                &json!({"eps": files.eps, "n_mc": n_mc, "seed": seed, "quantiles": mc.quantiles}),
            )
        }
        Command::RobustNorm {
            uncertainty,
            x,
            bstar,
            budget,
        } => {
            let unc: StructuredUncertainty = load_json(&uncertainty)?;
            let xset: Ellitope = load_json(&x)?;
            let bset: Ellitope = load_json(&bstar)?;
            let (opt, factor) = robust_norm_bound(&unc, &xset, &bset, &settings)?;
            let oracle = robust_norm_oracle(&unc, &xset, &bset, budget)?;
            emit(
                out_dir,
                "robust_norm.json",
                &json!({"opt": opt, "tightness_factor": factor, "oracle_lower_bound": oracle}),
            )
        }
        Command::Experiment { which } => match which {
            ExperimentCommand::Deconv {
                gamma,
                eps,
                n_mc,
                seed,
                n,
                m,
                nu,
                sigma,
                kernel,
                trials,
            } => {
                let kernel = match kernel {
                    Some(path) => Some(load_json::<Vec<f64>>(&path)?),
                    None => None,
                };
                let cfg = DeconvConfig {
                    n,
                    m,
                    nu,
                    kernel,
                    gammas: gamma,
                    sigma,
                    eps,
                    n_mc,
                    seed,
                    trials,
                };
                let summary = run_deconv(&cfg, &settings, out_dir)?;
                println!("{}", serde_json::to_string_pretty(&summary)?);
                Ok(())
            }
        },
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(threads) = std::env::var("ROBINV_THREADS") {
        if let Ok(k) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Solver { .. }
                | Error::Certification(_)
                | Error::DecompositionExhausted { .. } => 2,
                _ => 3,
            };
            ExitCode::from(code)
        }
    }
}
