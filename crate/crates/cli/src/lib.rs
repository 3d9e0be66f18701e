//! Command-line front end. [`run`] parses arguments, executes one command
//! and returns the process exit code: 0 on success, 1 on a validation
//! error, 2 on a numerical failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use dunkl::config::RunConfig;
use dunkl::error::{Error, Result};
use dunkl::frame::{Codec, FrameContext};
use dunkl::grid::{make_test_function, TestFunctionKind};
use dunkl::io::{load_function, save_function, write_coefficients, write_kernel};
use dunkl::lp::{Exponent, LittlewoodPaley, TLParams};
use dunkl::operator::dyadic_time;
use dunkl::verify::{kernel_health, run_suite, Suite};

#[derive(Debug, Parser)]
#[command(name = "dunkl", version, about = "Dunkl harmonic analysis toolkit")]
pub struct Cli {
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormKind {
    Tl,
    Cmo,
    Finfp,
    Finfinf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the reflection group and homogeneous dimension.
    Group,
    /// Build the heat and Poisson families and report their health.
    Kernels {
        /// Directory receiving one heat and one Poisson CSV per cached time.
        #[arg(long)]
        dump_kernels: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write a generated test function as CSV.
    Generate {
        /// gaussian, bump, random or bandlimited.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Norm of a function read from CSV.
    Norm {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long)]
        p: f64,
        /// A number or `inf`.
        #[arg(long)]
        q: Exponent,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "tl")]
        norm: NormKind,
        /// Coefficient table CSV.
        #[arg(long)]
        dump_coefficients: Option<PathBuf>,
    },
    /// Invert the discrete reproducing operator and report norm ratios.
    Codec {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "M")]
        m: Option<u32>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// `alpha,p,q;alpha,p,q;...`
        #[arg(long, default_value = "0,2,2", allow_hyphen_values = true)]
        params: String,
        /// Input CSV; a band-limited function is generated when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a verification suite.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

enum Outcome {
    Ok,
    NumericalFailure(String),
}

/// Parses `args` (program name first), runs the command, writes the
/// one-line summary to `out` and diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return 1;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    if let Some(n) = cli.threads {
        // a global pool can only be installed once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match execute(&cli, out) {
        Ok(Outcome::Ok) => 0,
        Ok(Outcome::NumericalFailure(msg)) => {
            let _ = writeln!(err, "numerical failure: {msg}");
            2
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn context(cfg: &RunConfig) -> Result<FrameContext> {
    FrameContext::new(cfg.grid()?, cfg.window()?, cfg.band_tol)
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<Outcome> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Group => {
            let s = cfg.structure()?;
            writeln!(
                out,
                "group {}: dimension {}, {} roots, order {}, N = {}",
                cfg.group,
                s.dimension(),
                s.roots().roots().len(),
                s.group().order(),
                s.homogeneous_dimension()
            )?;
            Ok(Outcome::Ok)
        }
        Command::Kernels {
            dump_kernels,
            report,
        } => {
            let grid = cfg.grid()?;
            let lp = LittlewoodPaley::build(&grid, cfg.window()?)?;
            let family = lp.family();
            let health = kernel_health(family, &grid)?;
            if let Some(dir) = dump_kernels {
                std::fs::create_dir_all(dir)?;
                for k in family.scales() {
                    let t = dyadic_time(k);
                    for (name, op) in [("heat", family.heat(k)?), ("poisson", family.poisson(k)?)] {
                        let f = std::fs::File::create(dir.join(format!("{name}_k{k}.csv")))?;
                        write_kernel(t, op, std::io::BufWriter::new(f))?;
                    }
                }
            }
            let clamp = family.decomposition().clamp_warning();
            if let Some(path) = report {
                write_json(path, &json!({"config": cfg, "clamp_warning": clamp, "kernels": health}))?;
            }
            let worst = health
                .k
                .iter()
                .zip(&health.leakage)
                .filter(|(k, _)| dyadic_time(**k) <= 1.0)
                .map(|(_, l)| *l)
                .fold(0.0, f64::max);
            writeln!(
                out,
                "kernels: {} cached times, max leakage for t <= 1 = {worst:.3e}",
                health.k.len()
            )?;
            Ok(Outcome::Ok)
        }
        Command::Generate { kind, seed, output } => {
            let grid = cfg.grid()?;
            let seed = seed.unwrap_or(cfg.seed);
            let kind = TestFunctionKind::parse(kind, grid.dimension())?;
            let f = match kind {
                TestFunctionKind::Bandlimited { .. } => context(&cfg)?.bandlimited(seed)?,
                other => make_test_function(&other, seed, &grid)?,
            };
            save_function(output, &f, &grid)?;
            writeln!(out, "wrote {} values to {}", f.len(), output.display())?;
            Ok(Outcome::Ok)
        }
        Command::Norm {
            alpha,
            p,
            q,
            input,
            norm,
            dump_coefficients,
        } => {
            let grid = cfg.grid()?;
            let f = load_function(input, &grid)?;
            let lp = &LittlewoodPaley::build(&grid, cfg.window()?)?;
            let value = match norm {
                NormKind::Tl => lp.tl_norm(&f, &TLParams::new(*alpha, *p, *q))?,
                NormKind::Cmo => {
                    let q = q.finite().ok_or_else(|| {
                        Error::InvalidParams("the CMO norm needs a finite q".into())
                    })?;
                    lp.cmo_norm(&f, *alpha, q, *p)?
                }
                NormKind::Finfp => lp.f_infty_p_norm(&f, *alpha, *p)?,
                NormKind::Finfinf => lp.f_infty_infty_norm(&f, *alpha)?,
            };
            if let Some(path) = dump_coefficients {
                let windowed = *norm != NormKind::Tl;
                let c = lp.analyze(&f, windowed)?;
                let file = std::fs::File::create(path)?;
                write_coefficients(&c, lp.dyadic(), &grid, std::io::BufWriter::new(file))?;
            }
            writeln!(out, "{value:?}")?;
            Ok(Outcome::Ok)
        }
        Command::Codec {
            seed,
            m,
            tol,
            max_iter,
            params,
            input,
            report,
        } => {
            if let Some(m) = m {
                cfg.m = *m;
            }
            if let Some(t) = tol {
                cfg.tol = *t;
            }
            if let Some(n) = max_iter {
                cfg.max_iter = *n;
            }
            if let Some(s) = seed {
                cfg.seed = *s;
            }
            cfg.validate()?;
            let params = TLParams::parse_list(params)?;
            let ctx = context(&cfg)?;
            let f = match input {
                Some(path) => load_function(path, ctx.grid())?,
                None => ctx.bandlimited(cfg.seed)?,
            };
            let codec = Codec::new(&ctx, cfg.neumann())?;
            let r = codec.roundtrip(&f, cfg.seed, &params)?;
            if let Some(path) = report {
                let mut v = serde_json::to_value(&r)?;
                if let Value::Object(map) = &mut v {
                    map.insert("config".into(), serde_json::to_value(&cfg)?);
                }
                write_json(path, &v)?;
            }
            writeln!(
                out,
                "codec: rho_hat {:.4}, {} iterations, converged {}, l2 ratio {:.4}",
                r.rho_hat, r.iterations, r.converged, r.l2_ratio
            )?;
            if r.converged {
                Ok(Outcome::Ok)
            } else {
                Ok(Outcome::NumericalFailure(format!(
                    "no convergence within {} iterations",
                    r.max_iter
                )))
            }
        }
        Command::Verify {
            suite,
            trials,
            seed,
            report,
        } => {
            let suite = Suite::parse(suite)?;
            let seed = seed.unwrap_or(cfg.seed);
            let r = run_suite(suite, &cfg, *trials, seed)?;
            if let Some(path) = report {
                write_json(path, &r)?;
            }
            writeln!(
                out,
                "verify {}: {}",
                suite.name(),
                if r.pass { "PASS" } else { "FAIL" }
            )?;
            if r.pass {
                Ok(Outcome::Ok)
            } else {
                Ok(Outcome::NumericalFailure(format!("suite {} failed", suite.name())))
            }
        }
    }
}
