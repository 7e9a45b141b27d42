//! The `hose` command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{HoseError, Result};
use crate::hosvd::hosvd;
use crate::io::{format_value, read_ten, write_csv, write_ten};
use crate::relational::{arcsine_transform, back_transform, shrink_residual_pipeline, ProportionTensor, ResidualMethod};
use crate::risk::{sure_spectral, Objective, RiskEstimate};
use crate::shrinkage::{apply_spectral, james_stein, matrix_baseline, MatrixFamily, ShrinkagePlan};
use crate::simulation::{
    rank_recovery_study, run_study, Estimator, Scenario, ScenarioSpec, StudyOptions,
};
use crate::tuning::{
    optimize_soft_threshold_decomposed, select_rank_decomposed, tune_matrix_baseline, TuningOptions,
    TuningResult,
};

#[derive(Debug, Parser)]
#[command(name = "hose", version, about = "Tensor denoising by higher-order spectral shrinkage")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decompose a tensor and report its mode spectra.
    Hosvd {
        #[arg(long = "in")]
        input: PathBuf,
        /// CSV of `mode,index,sigma`.
        #[arg(long)]
        spectra: Option<PathBuf>,
        /// Write the core tensor here.
        #[arg(long)]
        core: Option<PathBuf>,
    },
    /// Estimate the mean tensor.
    Denoise {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Msst)]
        method: Method,
        #[command(flatten)]
        tuning: TuningArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tune mode-specific soft-thresholding and print the selected plan.
    Tune {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        tuning: TuningArgs,
        /// CSV of the descent trace.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Select the multilinear rank of the truncated HOSVD.
    Rank {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        tuning: TuningArgs,
    },
    /// Risk estimates for a fixed plan.
    Sure {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = positive_f64, default_value_t = 1.0)]
        tau2: f64,
        /// Soft thresholds, one per mode.
        #[arg(long, num_args = 1.., value_delimiter = ',', allow_negative_numbers = true, conflicts_with = "ranks")]
        lambdas: Option<Vec<f64>>,
        /// Truncation ranks, one per mode.
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        ranks: Option<Vec<usize>>,
        #[arg(long, value_parser = positive_f64, default_value_t = 1.0)]
        scale: f64,
        /// CSV output; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo comparison on a simulated scenario.
    Simulate {
        #[arg(long, value_parser = parse_scenario)]
        scenario: Scenario,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[arg(long, value_parser = positive_f64, default_value_t = 1.0)]
        tau2: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Draw a new mean tensor for every replicate.
        #[arg(long)]
        redraw_theta: bool,
        /// Tabulate SURE-selected ranks instead of losses.
        #[arg(long)]
        rank_study: bool,
        /// Comma-separated subset of estimators.
        #[arg(long, value_delimiter = ',', value_parser = parse_estimator)]
        estimators: Option<Vec<Estimator>>,
    },
    /// Main-effects ANOVA plus residual shrinkage for relational proportions.
    Relational {
        #[arg(long)]
        props: PathBuf,
        #[arg(long)]
        counts: PathBuf,
        #[arg(long, value_enum, default_value_t = ResidualArg::Msst)]
        method: ResidualArg,
        #[arg(long, value_parser = positive_f64, default_value_t = 1.0)]
        tau2: f64,
        /// Fitted values on the transformed scale.
        #[arg(long)]
        out: PathBuf,
        /// Fitted values on the probability scale.
        #[arg(long)]
        probs_out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct TuningArgs {
    #[arg(long, value_parser = positive_f64, default_value_t = 1.0)]
    tau2: f64,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Sure)]
    objective: ObjectiveArg,
    #[arg(long, default_value_t = 50)]
    max_sweeps: usize,
    #[arg(long, value_parser = positive_f64, default_value_t = 1e-8)]
    tol: f64,
    /// Accepted for uniformity; tuning itself is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

impl TuningArgs {
    fn options(&self) -> TuningOptions {
        TuningOptions {
            objective: self.objective.into(),
            max_sweeps: self.max_sweeps,
            rtol: self.tol,
            ..TuningOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Msst,
    #[value(name = "truncated_hosvd")]
    TruncatedHosvd,
    #[value(name = "james_stein")]
    JamesStein,
    #[value(name = "efron_morris")]
    EfronMorris,
    #[value(name = "matrix_soft")]
    MatrixSoft,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ObjectiveArg {
    Sure,
    Gsure,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Sure => Objective::Sure,
            ObjectiveArg::Gsure => Objective::Gsure,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ResidualArg {
    Msst,
    #[value(name = "truncated_hosvd")]
    TruncatedHosvd,
}

fn positive_f64(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be a positive number, got {s}"))
    }
}

fn parse_scenario(s: &str) -> std::result::Result<Scenario, String> {
    s.parse().map_err(|e: HoseError| e.to_string())
}

fn parse_estimator(s: &str) -> std::result::Result<Estimator, String> {
    s.parse().map_err(|e: HoseError| e.to_string())
}

fn configure_threads() {
    if let Some(n) = std::env::var("HOSE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // a second call in the same process keeps the existing pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code: 0 on success, 2 on usage errors, 1 on computation errors.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match execute(cli.command, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ERROR {}: {e}", e.code());
            1
        }
    }
}

fn risk_fields(r: &RiskEstimate) -> [String; 4] {
    [
        format_value(r.fit),
        format_value(r.divergence),
        format_value(r.sure),
        r.gsure.map(format_value).unwrap_or_default(),
    ]
}

fn join<T: ToString>(xs: &[T], sep: &str) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(sep)
}

fn tuned_msst(x: &crate::tensor::DenseTensor, args: &TuningArgs) -> Result<(crate::hosvd::HosvdDecomposition, TuningResult)> {
    let d = hosvd(x)?;
    let res = optimize_soft_threshold_decomposed(&d, args.tau2, &args.options())?;
    Ok((d, res))
}

fn execute(command: Command, out: &mut impl Write) -> Result<()> {
    match command {
        Command::Hosvd { input, spectra, core } => {
            let x = read_ten(&input)?;
            let d = hosvd(&x)?;
            for (k, sv) in d.mode_singular_values().iter().enumerate() {
                let shown: Vec<String> = sv.iter().map(|s| format!("{s:.6}")).collect();
                writeln!(out, "mode {}: {}", k + 1, shown.join(" "))?;
            }
            if let Some(path) = spectra {
                let rows: Vec<Vec<String>> = d
                    .spectrum_rows()
                    .into_iter()
                    .map(|(m, i, s)| vec![m.to_string(), i.to_string(), format_value(s)])
                    .collect();
                write_csv(&path, &["mode", "index", "sigma"], &rows)?;
            }
            if let Some(path) = core {
                write_ten(&path, d.core())?;
            }
        }
        Command::Denoise {
            input,
            method,
            tuning,
            out: path,
        } => {
            let x = read_ten(&input)?;
            let objective: Objective = tuning.objective.into();
            let est = match method {
                Method::Msst => {
                    let (d, res) = tuned_msst(&x, &tuning)?;
                    report_soft(out, &res)?;
                    apply_spectral(&d, &res.plan)?
                }
                Method::TruncatedHosvd => {
                    let d = hosvd(&x)?;
                    let res = select_rank_decomposed(&d, tuning.tau2, objective)?;
                    writeln!(out, "rank: {}", join(&res.ranks().expect("truncation plan"), " "))?;
                    writeln!(out, "sure: {}", format_value(res.sure_value))?;
                    apply_spectral(&d, &res.plan)?
                }
                Method::JamesStein => james_stein(&x, tuning.tau2)?,
                Method::EfronMorris | Method::MatrixSoft => {
                    let family = if method == Method::EfronMorris {
                        MatrixFamily::EfronMorris
                    } else {
                        MatrixFamily::SoftThreshold
                    };
                    let t = tune_matrix_baseline(&x, family, tuning.tau2, objective)?;
                    writeln!(out, "lambda: {}", format_value(t.lambda))?;
                    writeln!(out, "sure: {}", format_value(t.risk.sure))?;
                    matrix_baseline(&x, family, t.lambda)?
                }
                Method::Identity => x.clone(),
            };
            write_ten(&path, &est)?;
        }
        Command::Tune { input, tuning, trace } => {
            let x = read_ten(&input)?;
            let (_, res) = tuned_msst(&x, &tuning)?;
            report_soft(out, &res)?;
            writeln!(out, "converged: {}", res.converged)?;
            if let Some(path) = trace {
                let rows: Vec<Vec<String>> = res
                    .trace
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        vec![
                            i.to_string(),
                            join(&t.lambdas.iter().map(|l| format_value(*l)).collect::<Vec<_>>(), ";"),
                            format_value(t.scale),
                            format_value(t.value),
                        ]
                    })
                    .collect();
                write_csv(&path, &["step", "lambdas", "scale", "objective"], &rows)?;
            }
        }
        Command::Rank { input, tuning } => {
            let x = read_ten(&input)?;
            let d = hosvd(&x)?;
            let res = select_rank_decomposed(&d, tuning.tau2, tuning.objective.into())?;
            writeln!(out, "rank: {}", join(&res.ranks().expect("truncation plan"), " "))?;
            writeln!(out, "sure: {}", format_value(res.sure_value))?;
        }
        Command::Sure {
            input,
            tau2,
            lambdas,
            ranks,
            scale,
            out: path,
        } => {
            let x = read_ten(&input)?;
            let d = hosvd(&x)?;
            let (family, params, plan) = match (lambdas, ranks) {
                (Some(l), _) => {
                    let params = join(&l.iter().map(|v| format_value(*v)).collect::<Vec<_>>(), ";");
                    ("soft", params, ShrinkagePlan::soft(&l, scale)?)
                }
                (None, Some(r)) => {
                    let plan = ShrinkagePlan::truncation(&r)?.with_scale(scale)?;
                    ("truncation", join(&r, ";"), plan)
                }
                (None, None) => ("identity", String::new(), ShrinkagePlan::identity(x.order()).with_scale(scale)?),
            };
            if plan.order() != x.order() {
                return Err(HoseError::Shape(format!(
                    "plan has {} modes, tensor has {}",
                    plan.order(),
                    x.order()
                )));
            }
            let r = sure_spectral(&d, &plan, tau2)?;
            let mut row = vec![family.to_string(), params, format_value(scale)];
            row.extend(risk_fields(&r));
            let header = ["family", "parameters", "scale", "fit", "divergence", "sure", "gsure"];
            match path {
                Some(p) => write_csv(&p, &header, &[row])?,
                None => {
                    writeln!(out, "{}", header.join(","))?;
                    writeln!(out, "{}", row.join(","))?;
                }
            }
        }
        Command::Simulate {
            scenario,
            reps,
            tau2,
            seed,
            out: path,
            redraw_theta,
            rank_study,
            estimators,
        } => {
            let spec = ScenarioSpec::new(scenario, seed);
            let opts = StudyOptions { redraw_theta };
            if rank_study {
                let study = rank_recovery_study(&spec, reps, tau2, opts)?;
                write_csv(&path, &["mode", "rank", "frequency"], &study.frequency_rows())?;
                for k in 0..study.dims.len() {
                    let f = study.frequencies(k);
                    let modal = f
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.total_cmp(b.1))
                        .map(|(i, _)| i + 1)
                        .unwrap_or(0);
                    writeln!(out, "mode {}: modal rank {modal} ({:.3})", k + 1, f[modal - 1])?;
                }
                report_failures(&study.failures, reps);
            } else {
                let estimators = estimators.unwrap_or_else(|| Estimator::ALL.to_vec());
                let study = run_study(&spec, &estimators, reps, tau2, opts)?;
                write_csv(&path, &["replicate", "estimator", "loss"], &study.loss_rows())?;
                writeln!(out, "estimator,mean,se,median,q1,q3")?;
                for &e in &estimators {
                    let s = study.summary(e).expect("estimator in study");
                    writeln!(
                        out,
                        "{e},{:.4},{:.4},{:.4},{:.4},{:.4}",
                        s.mean, s.se, s.median, s.q1, s.q3
                    )?;
                }
                report_failures(&study.failures, reps);
            }
        }
        Command::Relational {
            props,
            counts,
            method,
            tau2,
            out: path,
            probs_out,
        } => {
            let pt = ProportionTensor::new(read_ten(&props)?, read_ten(&counts)?)?;
            let x = arcsine_transform(&pt);
            let method = match method {
                ResidualArg::Msst => ResidualMethod::Msst,
                ResidualArg::TruncatedHosvd => ResidualMethod::TruncatedHosvd,
            };
            let res = shrink_residual_pipeline(&x, method, tau2)?;
            writeln!(out, "residual norm: {:.6}", res.residual_norm)?;
            writeln!(out, "shrunk residual norm: {:.6}", res.shrunk_residual_norm)?;
            write_ten(&path, &res.fitted)?;
            if let Some(p) = probs_out {
                write_ten(&p, &back_transform(&res.fitted, pt.counts())?)?;
            }
        }
    }
    Ok(())
}

fn report_soft(out: &mut impl Write, res: &TuningResult) -> Result<()> {
    let lambdas = res.plan.soft_lambdas().expect("soft plan");
    let shown: Vec<String> = lambdas.iter().map(|l| format_value(*l)).collect();
    writeln!(out, "lambdas: {}", shown.join(" "))?;
    writeln!(out, "scale: {}", format_value(res.plan.scale()))?;
    writeln!(out, "sure: {}", format_value(res.sure_value))?;
    Ok(())
}

fn report_failures(failures: &[crate::simulation::ReplicateFailure], reps: usize) {
    for f in failures {
        eprintln!("replicate {} skipped ({}): {}", f.replicate + 1, f.estimator, f.message);
    }
    if !failures.is_empty() {
        eprintln!("{} of {reps} replicates skipped", failures.len());
    }
}
