//! Subcommand definitions and their implementations.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use twistsim_core::experiment::{
    compare_with, ideal_optimum, nc_convergence_with, run_trace_with, scaling_fit, time_cost_with, Reference,
    FEW_PULSE_TIME_COST,
};
use twistsim_core::{Scheme, SequenceKind, SpinSystem};

use crate::config::{parse_partial, OutputFormat, PartialConfig, RunConfig};
use crate::csv::{error_csv, format_sig12, trace_csv};
use crate::error::{CliError, Result};

pub const DEFAULT_NC_LIST: [usize; 5] = [50, 100, 200, 500, 1000];
pub const DEFAULT_SCALING_N: [usize; 5] = [50, 100, 200, 400, 800];
pub const DEFAULT_TIMECOST_N: usize = 2000;

#[derive(Debug, Parser)]
#[command(
    name = "twistsim",
    version,
    about = "Simulate one-axis twisting turned into two-axis twisting by pulse sequences"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one trace and write it as CSV.
    Simulate(RunArgs),
    /// Write seq.csv, eff.csv and err.csv for a sequence and its effective dynamics.
    Compare(RunArgs),
    /// Sweep the number of periods at fixed total time.
    Converge {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated period counts.
        #[arg(long, value_delimiter = ',')]
        nc_list: Vec<usize>,
    },
    /// Fit the optimal squeezing of ideal-tat or ideal-oat against spin number.
    Scaling {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated spin numbers.
        #[arg(long, value_delimiter = ',')]
        n_list: Vec<usize>,
    },
    /// Write the compiled pulse schedule as text.
    Schedule(RunArgs),
    /// Total time to optimal squeezing for each scheme.
    Timecost(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// liu1, schemeA, schemeB, general, order<2m>, ideal-tat or ideal-oat.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub n_spins: Option<usize>,
    #[arg(long)]
    pub n_cycles: Option<usize>,
    /// Twisting strength; times are in units of 1/chi.
    #[arg(long)]
    pub chi: Option<f64>,
    /// Total sequence time; defaults to the time of optimal squeezing.
    #[arg(long)]
    pub t_total: Option<f64>,
    /// stroboscopic or fine(k).
    #[arg(long)]
    pub sampling: Option<String>,
    /// Order 2m of the general construction.
    #[arg(long)]
    pub order: Option<u32>,
    /// Output file, or directory for `compare`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or schedule-text.
    #[arg(long)]
    pub format: Option<String>,
    /// Scale all numerical consistency tolerances by this factor.
    #[arg(long)]
    pub strictness: Option<f64>,
    /// TOML configuration file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl RunArgs {
    /// Config file (if any) overlaid with the flags.
    pub fn resolve(&self) -> Result<PartialConfig> {
        let base = match &self.config {
            Some(path) => parse_partial(&fs::read_to_string(path).map_err(|e| CliError::io(path, e))?)?,
            None => PartialConfig::default(),
        };
        Ok(base.overlay(PartialConfig {
            scheme: self.scheme.clone(),
            n_spins: self.n_spins,
            n_cycles: self.n_cycles,
            chi: self.chi,
            t_total: self.t_total,
            sampling: self.sampling.clone(),
            order: self.order,
            out: self.out.clone(),
            format: self.format.clone(),
            strictness: self.strictness,
        }))
    }
}

/// Parse `args` and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut impl Write, stderr: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return e.exit_code();
        }
    };
    match execute(&cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command, stdout: &mut impl Write) -> Result<()> {
    match command {
        Command::Simulate(run) => simulate(&run.resolve()?, stdout),
        Command::Compare(run) => compare(&run.resolve()?, stdout),
        Command::Converge { run, nc_list } => converge(&run.resolve()?, nc_list, stdout),
        Command::Scaling { run, n_list } => scaling(&run.resolve()?, n_list, stdout),
        Command::Schedule(run) => schedule(&run.resolve()?, stdout),
        Command::Timecost(run) => timecost(&run.resolve()?, stdout),
    }
}

fn system(cfg: &RunConfig) -> Result<SpinSystem> {
    Ok(SpinSystem::with_tolerances(cfg.n_spins, cfg.tolerances)?)
}

/// Time of optimal squeezing of the scheme's ideal dynamics, in physical units.
fn optimal_time(sys: &SpinSystem, scheme: Scheme, chi: f64) -> Result<f64> {
    let (reference, divisor) = match scheme {
        Scheme::IdealOat => (Reference::Oat, 1.0),
        other => (Reference::Tat, other.divisor()?),
    };
    Ok(divisor * ideal_optimum(sys, reference)?.t_opt / chi)
}

fn sequence_kind(scheme: Scheme, command: &str) -> Result<SequenceKind> {
    match scheme {
        Scheme::Sequence(kind) => Ok(kind),
        other => Err(CliError::Validation(format!(
            "{command} needs a pulse-sequence scheme, got '{other}'"
        ))),
    }
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut impl Write) -> Result<()> {
    match out {
        Some(path) => write_file(path, text),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io("<stdout>", e)),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn say(stdout: &mut impl Write, text: &str) -> Result<()> {
    writeln!(stdout, "{text}").map_err(|e| CliError::io("<stdout>", e))
}

pub fn simulate(p: &PartialConfig, stdout: &mut impl Write) -> Result<()> {
    let cfg = RunConfig::from_partial(p)?;
    if cfg.format == OutputFormat::ScheduleText {
        return schedule(p, stdout);
    }
    let sys = system(&cfg)?;
    let t_total = match cfg.t_total {
        Some(t) => t,
        None => optimal_time(&sys, cfg.scheme, cfg.chi)?,
    };
    let trace = run_trace_with(&sys, &cfg.spec(t_total))?;
    emit(cfg.out.as_deref(), &trace_csv(&trace), stdout)
}

pub fn compare(p: &PartialConfig, stdout: &mut impl Write) -> Result<()> {
    let cfg = RunConfig::from_partial(p)?;
    sequence_kind(cfg.scheme, "compare")?;
    let sys = system(&cfg)?;
    let t_opt = optimal_time(&sys, cfg.scheme, cfg.chi)?;
    let t_total = cfg.t_total.unwrap_or(t_opt);
    let cmp = compare_with(&sys, &cfg.spec(t_total))?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    write_file(&dir.join("seq.csv"), &trace_csv(&cmp.sequence))?;
    write_file(&dir.join("eff.csv"), &trace_csv(&cmp.effective))?;
    write_file(&dir.join("err.csv"), &error_csv(&cmp.errors))?;
    let window = 1.5 * t_opt;
    say(
        stdout,
        &format!(
            "wrote seq.csv, eff.csv, err.csv to {}\nmax relative error for t <= {}: {}",
            dir.display(),
            format_sig12(window),
            format_sig12(cmp.errors.max_until(window))
        ),
    )
}

pub fn converge(p: &PartialConfig, nc_list: &[usize], stdout: &mut impl Write) -> Result<()> {
    let cfg = RunConfig::from_partial(p)?;
    let kind = sequence_kind(cfg.scheme, "converge")?;
    let nc_list = if nc_list.is_empty() {
        &DEFAULT_NC_LIST[..]
    } else {
        nc_list
    };
    if nc_list.contains(&0) {
        return Err(CliError::Validation("nc_list: period counts must be at least 1".into()));
    }
    let sys = system(&cfg)?;
    let t_total = match cfg.t_total {
        Some(t) => t,
        None => optimal_time(&sys, cfg.scheme, cfg.chi)?,
    };
    let conv = nc_convergence_with(&sys, kind, cfg.chi, t_total, nc_list)?;
    let mut text = String::from("n_cycles,xi2_best,t_best,xi2_ideal,rel_error\n");
    for r in &conv.rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            r.n_cycles,
            format_sig12(r.xi2_best),
            format_sig12(r.t_best),
            format_sig12(conv.ideal.xi2_min),
            format_sig12(r.rel_error)
        ));
    }
    emit(cfg.out.as_deref(), &text, stdout)
}

pub fn scaling(p: &PartialConfig, n_list: &[usize], stdout: &mut impl Write) -> Result<()> {
    let reference = match p.scheme()? {
        Scheme::IdealTat { .. } => Reference::Tat,
        Scheme::IdealOat => Reference::Oat,
        other => {
            return Err(CliError::Validation(format!(
                "scaling needs scheme ideal-tat or ideal-oat, got '{other}'"
            )))
        }
    };
    let n_list = if n_list.is_empty() {
        &DEFAULT_SCALING_N[..]
    } else {
        n_list
    };
    if n_list.iter().any(|&n| n < 2) {
        return Err(CliError::Validation("n_list: spin numbers must be at least 2".into()));
    }
    let result = scaling_fit(reference, n_list)?;
    let mut points = String::from("n_spins,t_opt,xi2_min\n");
    for (n, o) in &result.points {
        points.push_str(&format!("{n},{},{}\n", format_sig12(o.t_opt), format_sig12(o.xi2_min)));
    }
    match &p.out {
        Some(path) => write_file(path, &points)?,
        None => emit(None, &points, stdout)?,
    }
    say(
        stdout,
        &format!(
            "exponent {}\nintercept {}\nr2 {}",
            format_sig12(result.fit.exponent),
            format_sig12(result.fit.intercept),
            format_sig12(result.fit.r2)
        ),
    )
}

pub fn schedule(p: &PartialConfig, stdout: &mut impl Write) -> Result<()> {
    let scheme = p.scheme()?;
    let kind = sequence_kind(scheme, "schedule")?;
    let n_cycles = p.n_cycles()?;
    let t_total = match p.t_total()? {
        Some(t) => t,
        None => {
            let cfg = RunConfig::from_partial(p)?;
            optimal_time(&system(&cfg)?, scheme, cfg.chi)?
        }
    };
    let schedule = kind.compile_for_total_time(t_total, n_cycles)?;
    emit(p.out.as_deref(), &schedule.to_text(), stdout)
}

pub fn timecost(p: &PartialConfig, stdout: &mut impl Write) -> Result<()> {
    let n_spins = p.n_spins.unwrap_or(DEFAULT_TIMECOST_N);
    if n_spins < 2 {
        return Err(CliError::Validation("n_spins: time cost needs at least 2".into()));
    }
    let chi = p.chi()?;
    let sys = SpinSystem::with_tolerances(n_spins, p.tolerances()?)?;
    let mut kinds = vec![SequenceKind::Liu1, SequenceKind::SchemeA, SequenceKind::SchemeB];
    if let Some(Scheme::Sequence(kind)) = p.scheme.as_ref().map(|_| p.scheme()).transpose()? {
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    let mut text = String::from("scheme,divisor,t_opt,time_cost\n");
    for kind in kinds {
        let c = time_cost_with(&sys, kind, chi)?;
        text.push_str(&format!(
            "{},{},{},{}\n",
            kind,
            format_sig12(c.divisor),
            format_sig12(c.t_opt),
            format_sig12(c.total_time)
        ));
    }
    text.push_str(&format!("few-pulse,,,{}\n", format_sig12(FEW_PULSE_TIME_COST / chi)));
    emit(p.out.as_deref(), &text, stdout)
}
