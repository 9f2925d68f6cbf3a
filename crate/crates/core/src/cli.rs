//! Command-line front end. Exit codes: 0 success, 1 assertion failure,
//! 2 configuration or usage error.

use std::ffi::OsString;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{ModelConfig, ModelKind};
use crate::error::{Error, Result};
use crate::field::TensorField;
use crate::flow::{fit_decay_rate, flow_exact_trajectory, flow_rk4, rk4_stable_dt, eigentensor_decay_check, FlowTrajectory};
use crate::gauge::synthesize_cn_torus;
use crate::geometry::{make_model, ManifoldContext};
use crate::grid::DerivativeBackend;
use crate::operators::OperatorId;
use crate::random::BandLimited;
use crate::spectral::{assemble, eigensolve, eigensolve_with, spectral_window, SpectralBackend};
use crate::verifier::{
    adjudicate_bochner_koiso, adjudicate_commutation, convergence_study, run_identity_suite, CaseId, FlowSection,
    ModelDescriptor, ResidualReport, SpectrumSection, SuiteOptions,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cngauge", version, about = "Gauge identities, Lichnerowicz spectra and tensor flows on model manifolds")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// flat_torus, bumpy_torus, sphere_stereo, hyperbolic_ball or hyperbolic_half.
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Samples per axis (the coarsest level for refinement studies).
    #[arg(long, global = true)]
    pub res: Option<usize>,
    /// Finite-difference stencil order.
    #[arg(long, global = true)]
    pub order: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendArg>,
    /// Residual floor treated as exact.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Model configuration file; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Omit the timestamp and wall-clock timings.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Spectral,
    Fd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AdjudicationKind {
    Commutation,
    BochnerKoiso,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IntegratorArg {
    Exact,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitialArg {
    /// Trace-free eigentensor `sin(2πx¹)(dx¹⊗dx¹ - dx²⊗dx²)`.
    Eigen,
    /// Synthesized tensor in the gauge.
    Cn,
    /// Band-limited random tensor.
    Random,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the identity catalog over three refinements.
    Identities {
        /// Comma-separated case ids, e.g. I1,I3.
        #[arg(long, value_delimiter = ',')]
        cases: Option<Vec<String>>,
        /// Comma-separated resolutions; default `res, res+8, res+16`.
        #[arg(long, value_delimiter = ',')]
        resolutions: Option<Vec<usize>>,
    },
    /// Decide between inconsistent statements by experiment.
    Adjudicate {
        #[arg(value_enum)]
        which: AdjudicationKind,
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long, value_delimiter = ',')]
        resolutions: Option<Vec<usize>>,
    },
    /// Assemble an operator, solve for eigenpairs and classify them against the window.
    Spectrum {
        #[arg(long, default_value = "lichnerowicz")]
        operator: String,
        #[arg(long, default_value_t = 12)]
        count: usize,
        #[arg(long, default_value_t = 0.0)]
        target: f64,
        #[arg(long, value_enum)]
        solver: Option<SolverArg>,
    },
    /// Integrate the tensor heat flow and fit its decay rate.
    Flow {
        #[arg(long, value_enum, default_value_t = IntegratorArg::Exact)]
        integrator: IntegratorArg,
        #[arg(long, value_enum, default_value_t = InitialArg::Eigen)]
        initial: InitialArg,
        #[arg(long, default_value_t = 0.1)]
        t_end: f64,
        /// RK4 step; default 1e-4 capped by the stability limit.
        #[arg(long)]
        dt: Option<f64>,
        /// Sample count of the exact trajectory.
        #[arg(long, default_value_t = 21)]
        samples: usize,
        /// Also run the per-eigenvalue decay check up to this eigenvalue.
        #[arg(long)]
        decay_check: Option<f64>,
    },
    /// Convergence slope of one identity case.
    Convergence {
        case: String,
        #[arg(long, value_delimiter = ',')]
        resolutions: Option<Vec<usize>>,
    },
    /// Re-render a stored JSON report.
    Report { input: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    FourierBlock,
    Dense,
    Iterative,
}

impl From<SolverArg> for SpectralBackend {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::FourierBlock => SpectralBackend::FourierBlock,
            SolverArg::Dense => SpectralBackend::Dense,
            SolverArg::Iterative => SpectralBackend::Iterative,
        }
    }
}

/// Exit code of a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonConvergence { .. } | Error::Internal(_) => EXIT_ASSERTION,
        _ => EXIT_CONFIG,
    }
}

/// Parses `argv` (program name first), runs and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let outcome = match cli.global.threads {
        Some(0) => Err(Error::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))
            .and_then(|pool| pool.install(|| execute(&cli))),
        None => execute(&cli),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Model configuration from `--config` and the flag overrides.
pub fn model_config(g: &GlobalArgs) -> Result<ModelConfig> {
    let mut cfg = match &g.config {
        Some(path) => {
            let mut c = ModelConfig::from_toml_str(&fs::read_to_string(path)?)?;
            if let Some(m) = &g.model {
                let kind: ModelKind = m.parse()?;
                if kind != c.model {
                    c = ModelConfig::new(kind, c.dim, c.resolution);
                }
            }
            c
        }
        None => {
            let kind: ModelKind = g.model.as_deref().unwrap_or("flat_torus").parse()?;
            ModelConfig::new(kind, 2, 17)
        }
    };
    if let Some(d) = g.dim {
        cfg.dim = d;
    }
    if let Some(r) = g.res {
        cfg.resolution = r;
    }
    if let Some(p) = g.order {
        cfg.stencil_order = p;
    }
    if let Some(b) = g.backend {
        cfg.backend = match b {
            BackendArg::Spectral => DerivativeBackend::Spectral,
            BackendArg::Fd => DerivativeBackend::FiniteDifference,
        };
    }
    cfg.chart_spec().validate()?;
    Ok(cfg)
}

fn emit(g: &GlobalArgs, text: &str) -> Result<()> {
    match &g.out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn finish(g: &GlobalArgs, report: &mut ResidualReport) {
    if g.no_timestamp {
        report.strip_volatile();
    } else {
        report.stamp();
    }
}

fn refinements(g: &GlobalArgs, cfg: &ModelConfig, explicit: &Option<Vec<usize>>) -> Vec<usize> {
    explicit.clone().unwrap_or_else(|| {
        let r = g.res.unwrap_or(cfg.resolution);
        vec![r, r + 8, r + 16]
    })
}

fn execute(cli: &Cli) -> Result<i32> {
    let g = &cli.global;
    if let Some(t) = g.tol {
        if !(t > 0.0) {
            return Err(Error::Config(format!("--tol must be positive, got {t}")));
        }
    }
    match &cli.command {
        Command::Report { input } => rerender(g, input),
        Command::Identities { cases, resolutions } => {
            let cfg = model_config(g)?;
            let mut opts = SuiteOptions::new(cfg.resolution, g.seed);
            opts.resolutions = refinements(g, &cfg, resolutions);
            opts.floor = g.tol;
            opts.timings = !g.no_timestamp;
            opts.cases = cases
                .as_ref()
                .map(|ids| ids.iter().map(|s| s.parse::<CaseId>()).collect::<Result<Vec<_>>>())
                .transpose()?;
            let mut report = run_identity_suite(&cfg, &opts)?;
            finish(g, &mut report);
            emit(g, &render(g, &report)?)?;
            Ok(if report.passed() { EXIT_OK } else { EXIT_ASSERTION })
        }
        Command::Adjudicate {
            which,
            samples,
            resolutions,
        } => {
            let cfg = model_config(g)?;
            let res = refinements(g, &cfg, resolutions);
            let adjudication = match which {
                AdjudicationKind::Commutation => adjudicate_commutation(&cfg, &res, *samples, g.seed)?,
                AdjudicationKind::BochnerKoiso => {
                    let ctx = make_model(&cfg)?;
                    adjudicate_bochner_koiso(&ctx, *samples, g.seed)?
                }
            };
            let suite_res = match which {
                AdjudicationKind::Commutation => res,
                AdjudicationKind::BochnerKoiso => vec![cfg.resolution],
            };
            let mut report = ResidualReport::new("adjudicate", &cfg, ModelDescriptor::new(&cfg, &suite_res))?;
            let conclusive = adjudication.conclusive;
            report.adjudications.push(adjudication);
            finish(g, &mut report);
            if g.format == Format::Csv {
                return Err(Error::Config("adjudications are emitted as JSON only".into()));
            }
            emit(g, &report.to_json()?)?;
            Ok(if conclusive { EXIT_OK } else { EXIT_ASSERTION })
        }
        Command::Spectrum {
            operator,
            count,
            target,
            solver,
        } => {
            let cfg = model_config(g)?;
            let ctx = make_model(&cfg)?;
            let op: OperatorId = operator.parse()?;
            let handle = assemble(&ctx, op)?;
            let dec = match solver {
                Some(s) => eigensolve_with(&handle, *count, *target, (*s).into())?,
                None => eigensolve(&handle, *count, *target)?,
            };
            if g.format == Format::Csv {
                emit(g, &dec.to_csv())?;
                return Ok(EXIT_OK);
            }
            let lambda = match ctx.exact_einstein {
                Some(l) => l,
                None => ctx.curvature()?.lambda_hat,
            };
            let mut report = ResidualReport::new("spectrum", &cfg, ModelDescriptor::single(&ctx)?)?;
            report.spectra = Some(SpectrumSection {
                operator: dec.operator.clone(),
                backend: dec.backend,
                target: *target,
                rows: dec.rows(),
                window: spectral_window(lambda, &dec.eigenvalues()),
            });
            finish(g, &mut report);
            emit(g, &report.to_json()?)?;
            Ok(EXIT_OK)
        }
        Command::Flow {
            integrator,
            initial,
            t_end,
            dt,
            samples,
            decay_check,
        } => {
            let cfg = model_config(g)?;
            let ctx = make_model(&cfg)?;
            let h0 = initial_tensor(&ctx, *initial, g.seed)?;
            let traj = integrate(&ctx, &h0, *integrator, *t_end, *dt, *samples)?;
            if g.format == Format::Csv {
                emit(g, &traj.to_csv())?;
                return Ok(EXIT_OK);
            }
            let mut section = FlowSection::from_trajectory(&traj, fit_decay_rate(&traj).ok());
            let mut code = EXIT_OK;
            if let Some(mu_max) = decay_check {
                let check = eigentensor_decay_check(&ctx, *mu_max)?;
                if !check.all_passed {
                    code = EXIT_ASSERTION;
                }
                section.decay_check = Some(check);
            }
            let mut report = ResidualReport::new("flow", &cfg, ModelDescriptor::single(&ctx)?)?;
            report.flow = Some(section);
            finish(g, &mut report);
            emit(g, &report.to_json()?)?;
            Ok(code)
        }
        Command::Convergence { case, resolutions } => {
            let cfg = model_config(g)?;
            let id: CaseId = case.parse()?;
            let res = refinements(g, &cfg, resolutions);
            let rec = convergence_study(id, &cfg, &res, g.seed)?;
            let text = match g.format {
                Format::Json => {
                    let mut s = serde_json::to_string_pretty(&rec)?;
                    s.push('\n');
                    s
                }
                Format::Csv => {
                    let mut s = String::from("resolution,spacing,residual\n");
                    for i in 0..rec.resolutions.len() {
                        s.push_str(&format!(
                            "{},{:.17e},{:.17e}\n",
                            rec.resolutions[i], rec.spacings[i], rec.residuals[i]
                        ));
                    }
                    s
                }
            };
            emit(g, &text)?;
            Ok(if rec.converges() { EXIT_OK } else { EXIT_ASSERTION })
        }
    }
}

fn render(g: &GlobalArgs, report: &ResidualReport) -> Result<String> {
    match g.format {
        Format::Json => report.to_json(),
        Format::Csv => Ok(report.cases_csv()),
    }
}

fn rerender(g: &GlobalArgs, input: &Path) -> Result<i32> {
    let text = fs::read_to_string(input)?;
    let report = ResidualReport::from_json(&text)
        .map_err(|e| Error::Config(format!("{} is not a report: {e}", input.display())))?;
    emit(g, &render(g, &report)?)?;
    Ok(if report.passed() { EXIT_OK } else { EXIT_ASSERTION })
}

fn initial_tensor(ctx: &ManifoldContext, initial: InitialArg, seed: u64) -> Result<TensorField> {
    Ok(match initial {
        InitialArg::Eigen => {
            let n = ctx.dim();
            ctx.sym2_from_fn(|x, m| {
                let s = (2.0 * PI * x[0]).sin();
                m[0] = s;
                m[n + 1] = -s;
            })
        }
        InitialArg::Cn => {
            let u = BandLimited::new(seed).with_bandwidth(2).scalar(ctx);
            synthesize_cn_torus(ctx, &u, Some((seed.wrapping_add(1), 2)))?
        }
        InitialArg::Random => BandLimited::new(seed).with_bandwidth(2).sym2(ctx),
    })
}

fn integrate(
    ctx: &ManifoldContext,
    h0: &TensorField,
    integrator: IntegratorArg,
    t_end: f64,
    dt: Option<f64>,
    samples: usize,
) -> Result<FlowTrajectory> {
    if !(t_end > 0.0) {
        return Err(Error::Config(format!("--t-end must be positive, got {t_end}")));
    }
    match integrator {
        IntegratorArg::Exact => {
            if samples < 2 {
                return Err(Error::Config("--samples must be at least 2".into()));
            }
            let times: Vec<f64> = (0..samples).map(|i| t_end * i as f64 / (samples - 1) as f64).collect();
            flow_exact_trajectory(ctx, h0, &times, true)
        }
        IntegratorArg::Rk4 => {
            let dt = match dt {
                Some(d) => d,
                None => 1e-4f64.min(0.9 * rk4_stable_dt(ctx)?),
            };
            let steps = (t_end / dt).round().max(1.0) as usize;
            flow_rk4(ctx, h0, dt, steps, true)
        }
    }
}
