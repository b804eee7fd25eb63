//! Command-line front end.
//!
//! Every flag can also come from a `--config` file under the same name with
//! dashes replaced by underscores; flags win over file values. Data goes to
//! standard output (or `--out`), diagnostics to standard error.
//!
//! Exit codes: 0 on success, 1 on invalid input, 2 when `--strict` is set and
//! some point did not converge.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::config::ConfigFile;
use crate::error::{Error, Result};
use crate::search::{self, SearchSpec};
use crate::solver::SolverSettings;
use crate::sweep::{self, Axis, PointParams, SweepRecord, SweepSpec};
use crate::transport::{self, Direction};
use crate::validate;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_UNCONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "qfp", version, about = "Nonlinear Fabry-Perot interferometer with two saturable two-level mirrors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Transmittance in one direction, as one CSV record.
    Transmit {
        #[command(flatten)]
        common: Common,
        /// ltr (emitter 1 first) or rtl.
        #[arg(long)]
        direction: Option<String>,
    },
    /// Both directions and the rectification figures of merit, as one CSV record.
    Rectify {
        #[command(flatten)]
        common: Common,
    },
    /// Intracavity intensity samples `z,p_intr`.
    Profile {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// One- or two-axis parameter sweep written as CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// name:min:max:count[:linear|log]
        #[arg(long)]
        axis1: Option<String>,
        #[arg(long)]
        axis2: Option<String>,
        /// Comma-separated subset of transmit,rectify,profile_average,p1,p2.
        #[arg(long)]
        outputs: Option<String>,
    },
    /// Grid search with refinement for the best rectifier over (L, dw1).
    Search {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        l_min: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        l_max: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        dw1_min: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        dw1_max: Option<f64>,
        /// Points per axis in each round.
        #[arg(long)]
        grid: Option<usize>,
        /// Refinement rounds after the coarse grid.
        #[arg(long)]
        rounds: Option<usize>,
        /// Constrain dw1 = dw2.
        #[arg(long)]
        identical: bool,
    },
    /// Run the built-in analytic-limit and oracle checks.
    Validate,
}

#[derive(Debug, Args, Default)]
struct Common {
    /// key = value file supplying defaults for any flag.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    p_inc: Option<f64>,
    /// Emitter separation in wavelengths.
    #[arg(long)]
    length: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    dw1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    dw2: Option<f64>,
    #[arg(long)]
    gamma1: Option<f64>,
    #[arg(long)]
    gamma2: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with code 2 if any point fails to converge.
    #[arg(long)]
    strict: bool,
    /// Print the CSV header before single-record output.
    #[arg(long)]
    header: bool,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    continuation_steps: Option<usize>,
    #[arg(long)]
    n_seeds: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
}

const COMMON_KEYS: &[&str] = &[
    "p_inc",
    "length",
    "dw1",
    "dw2",
    "gamma1",
    "gamma2",
    "out",
    "strict",
    "header",
    "damping",
    "rel_tol",
    "abs_tol",
    "max_iterations",
    "continuation_steps",
    "n_seeds",
    "workers",
];

/// Flag values layered over an optional config file.
struct Resolved {
    file: ConfigFile,
}

impl Resolved {
    fn new(common: &Common, extra_keys: &[&str]) -> Result<Self> {
        let file = match &common.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let allowed: Vec<&str> = COMMON_KEYS.iter().chain(extra_keys).copied().collect();
        file.check_keys(&allowed)?;
        Ok(Resolved { file })
    }

    fn pick<T: FromStr + Clone>(&self, flag: &Option<T>, key: &str) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v.clone())),
            None => self.file.parse(key),
        }
    }

    fn or<T: FromStr + Clone>(&self, flag: &Option<T>, key: &str, default: T) -> Result<T> {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    fn flag(&self, set: bool, key: &str) -> Result<bool> {
        Ok(set || self.file.parse::<bool>(key)?.unwrap_or(false))
    }

    fn point(&self, c: &Common) -> Result<PointParams> {
        let d = PointParams::default();
        Ok(PointParams {
            p_inc: self.or(&c.p_inc, "p_inc", d.p_inc)?,
            length: self.or(&c.length, "length", d.length)?,
            dw1: self.or(&c.dw1, "dw1", d.dw1)?,
            dw2: self.or(&c.dw2, "dw2", d.dw2)?,
            gamma1: self.or(&c.gamma1, "gamma1", d.gamma1)?,
            gamma2: self.or(&c.gamma2, "gamma2", d.gamma2)?,
        })
    }

    fn solver(&self, c: &Common) -> Result<SolverSettings> {
        let d = SolverSettings::default();
        let s = SolverSettings {
            damping: self.or(&c.damping, "damping", d.damping)?,
            rel_tol: self.or(&c.rel_tol, "rel_tol", d.rel_tol)?,
            abs_tol: self.or(&c.abs_tol, "abs_tol", d.abs_tol)?,
            max_iterations: self.or(&c.max_iterations, "max_iterations", d.max_iterations)?,
            continuation_steps: self.or(&c.continuation_steps, "continuation_steps", d.continuation_steps)?,
            n_seeds: self.or(&c.n_seeds, "n_seeds", d.n_seeds)?,
            rng_seed: d.rng_seed,
        };
        s.validate()?;
        Ok(s)
    }

    fn output<'a>(&self, c: &Common, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
        let path: Option<PathBuf> = match &c.out {
            Some(p) => Some(p.clone()),
            None => self.file.get("out").map(PathBuf::from),
        };
        Ok(match path {
            Some(p) => Box::new(BufWriter::new(File::create(&p).map_err(|e| {
                Error::Io(format!("{}: {e}", p.display()))
            })?)),
            None => Box::new(stdout),
        })
    }
}

fn strict_code(strict: bool, all_converged: bool, stderr: &mut dyn Write) -> i32 {
    if strict && !all_converged {
        let _ = writeln!(stderr, "error: unconverged point(s) with --strict");
        EXIT_UNCONVERGED
    } else {
        EXIT_OK
    }
}

fn dispatch(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Transmit { common, direction } => {
            let cfg = Resolved::new(&common, &["direction"])?;
            let params = cfg.point(&common)?;
            let s = cfg.solver(&common)?;
            let dir: Direction = cfg.or(&direction, "direction", "ltr".to_string())?.parse()?;
            let rec = sweep::evaluate_direction(params, dir, &s)?;
            let strict = cfg.flag(common.strict, "strict")?;
            let header = cfg.flag(common.header, "header")?;
            let converged = rec.converged_12 || rec.converged_21;
            let mut out = cfg.output(&common, stdout)?;
            sweep::write_csv(&[rec], &mut out, header)?;
            Ok(strict_code(strict, converged, stderr))
        }
        Command::Rectify { common } => {
            let cfg = Resolved::new(&common, &[])?;
            let params = cfg.point(&common)?;
            let s = cfg.solver(&common)?;
            let r = transport::rectify(params.p_inc, &params.device()?, &s)?;
            let rec = SweepRecord::from_rectification(params, &r);
            let strict = cfg.flag(common.strict, "strict")?;
            let header = cfg.flag(common.header, "header")?;
            let mut out = cfg.output(&common, stdout)?;
            sweep::write_csv(&[rec], &mut out, header)?;
            Ok(strict_code(strict, r.both_converged, stderr))
        }
        Command::Profile { common, samples } => {
            let cfg = Resolved::new(&common, &["samples"])?;
            let params = cfg.point(&common)?;
            let s = cfg.solver(&common)?;
            let n = cfg.or(&samples, "samples", 201)?;
            let prof = transport::intracavity_profile(params.p_inc, &params.device()?, n, &s)?;
            let strict = cfg.flag(common.strict, "strict")?;
            writeln!(
                stderr,
                "average intracavity intensity: {} (closed form), {} (quadrature); p1 = {}, p2 = {}, converged = {}",
                sweep::format_number(prof.average),
                sweep::format_number(prof.average_quadrature),
                sweep::format_number(prof.solution.p1),
                sweep::format_number(prof.solution.p2),
                prof.solution.converged
            )?;
            let mut out = cfg.output(&common, stdout)?;
            writeln!(out, "z,p_intr")?;
            for (z, p) in prof.positions.iter().zip(&prof.intensities) {
                writeln!(out, "{},{}", sweep::format_number(*z), sweep::format_number(*p))?;
            }
            out.flush()?;
            Ok(strict_code(strict, prof.solution.converged, stderr))
        }
        Command::Sweep {
            common,
            axis1,
            axis2,
            outputs,
        } => {
            let cfg = Resolved::new(&common, &["axis1", "axis2", "outputs"])?;
            let mut axes = Vec::new();
            for (flag, key) in [(&axis1, "axis1"), (&axis2, "axis2")] {
                if let Some(a) = cfg.pick(flag, key)? {
                    axes.push(a.parse::<Axis>()?);
                }
            }
            let spec = SweepSpec {
                axes,
                fixed: cfg.point(&common)?,
                solver: cfg.solver(&common)?,
                outputs: sweep::parse_outputs(&cfg.or(&outputs, "outputs", "transmit,rectify,p1,p2".to_string())?)?,
                workers: cfg.pick(&common.workers, "workers")?,
            };
            let records = sweep::run_sweep(&spec)?;
            let strict = cfg.flag(common.strict, "strict")?;
            let mut out = cfg.output(&common, stdout)?;
            sweep::write_csv(&records, &mut out, true)?;
            Ok(strict_code(strict, records.iter().all(SweepRecord::converged), stderr))
        }
        Command::Search {
            common,
            l_min,
            l_max,
            dw1_min,
            dw1_max,
            grid,
            rounds,
            identical,
        } => {
            let cfg = Resolved::new(
                &common,
                &["l_min", "l_max", "dw1_min", "dw1_max", "grid", "rounds", "identical"],
            )?;
            let params = cfg.point(&common)?;
            let d = SearchSpec::default();
            let spec = SearchSpec {
                p_inc: params.p_inc,
                dw2: params.dw2,
                gamma1: params.gamma1,
                gamma2: params.gamma2,
                length_bounds: (cfg.or(&l_min, "l_min", d.length_bounds.0)?, cfg.or(&l_max, "l_max", d.length_bounds.1)?),
                dw1_bounds: (cfg.or(&dw1_min, "dw1_min", d.dw1_bounds.0)?, cfg.or(&dw1_max, "dw1_max", d.dw1_bounds.1)?),
                grid: cfg.or(&grid, "grid", d.grid)?,
                refine_rounds: cfg.or(&rounds, "rounds", d.refine_rounds)?,
                shrink: d.shrink,
                identical_emitters: cfg.flag(identical, "identical")?,
                workers: cfg.pick(&common.workers, "workers")?,
            };
            let s = cfg.solver(&common)?;
            let best = search::design_search(&spec, &s)?;
            let rec = SweepRecord::from_rectification(best.params(&spec), &best.rectification);
            let mut out = cfg.output(&common, stdout)?;
            sweep::write_csv(&[rec], &mut out, true)?;
            Ok(EXIT_OK)
        }
        Command::Validate => {
            let checks = validate::run_checks();
            for c in &checks {
                writeln!(stdout, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
            }
            Ok(if checks.iter().all(|c| c.passed) { EXIT_OK } else { EXIT_INVALID })
        }
    }
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    EXIT_INVALID
                }
            };
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_INVALID
        }
    }
}
