//! `sam-edge` command-line driver: single runs, grids, randomized
//! verification of the quadratic sign laws, and SVG plots of run logs.

mod error;
pub mod svg;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};
use sam_edge::harness::config::{known_keys, LOG_DIR_ENV};
use sam_edge::harness::{
    read_csv_file, run_grid, run_to_file, summarize, ExperimentConfig, LogTable, RawConfig,
};
use sam_edge::quadlab;

pub use error::{CliError, CliResult};
pub use svg::{Series, YScale};

/// Runs the CLI with `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    1
                }
            };
        }
    };
    match dispatch(&matches, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn command() -> Command {
    Command::new("sam-edge")
        .about("Edge-of-stability experiments for gradient descent and SAM")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(with_overrides(
            Command::new("run")
                .about("Run one experiment and write its CSV log")
                .arg(config_arg()),
        ))
        .subcommand(with_overrides(
            Command::new("grid")
                .about("Run every (eta, rho) pair and write one log per pair plus a manifest")
                .arg(config_arg())
                .arg(list_arg("etas", "Comma-separated step sizes"))
                .arg(list_arg("rhos", "Comma-separated SAM radii"))
                .arg(
                    Arg::new("out-dir")
                        .long("out-dir")
                        .value_name("DIR")
                        .value_parser(value_parser!(PathBuf))
                        .help(format!("Output directory [default: ${LOG_DIR_ENV}/grid or ./grid]")),
                ),
        ))
        .subcommand(
            Command::new("verify")
                .about("Randomized checks of the one-step loss-change laws on quadratics")
                .arg(
                    Arg::new("trials")
                        .long("trials")
                        .value_name("N")
                        .default_value("10000")
                        .value_parser(value_parser!(u64).range(1..))
                        .help("Random trials per sign/closed-form check"),
                )
                .arg(
                    Arg::new("seed")
                        .long("seed")
                        .value_name("SEED")
                        .default_value("0")
                        .value_parser(value_parser!(u64)),
                ),
        )
        .subcommand(
            Command::new("plot")
                .about("Plot log columns against wall_s as an SVG line chart")
                .arg(
                    Arg::new("log")
                        .long("log")
                        .value_name("CSV")
                        .required(true)
                        .action(ArgAction::Append)
                        .value_parser(value_parser!(PathBuf))
                        .help("Run log; repeat to overlay several runs"),
                )
                .arg(
                    Arg::new("series")
                        .long("series")
                        .value_name("COLUMNS")
                        .required(true)
                        .value_delimiter(',')
                        .help("Columns to plot, e.g. lambda1,sam_edge,gd_edge"),
                )
                .arg(
                    Arg::new("y-scale")
                        .long("y-scale")
                        .value_name("SCALE")
                        .default_value("linear")
                        .value_parser(["linear", "log"]),
                )
                .arg(
                    Arg::new("out")
                        .long("out")
                        .value_name("SVG")
                        .required(true)
                        .value_parser(value_parser!(PathBuf)),
                )
                .arg(
                    Arg::new("include-diverged")
                        .long("include-diverged")
                        .action(ArgAction::SetTrue)
                        .help("Also plot diverged runs, with the divergent tail dashed"),
                ),
        )
}

fn config_arg() -> Arg {
    Arg::new("config")
        .value_name("CONFIG")
        .required(true)
        .value_parser(value_parser!(PathBuf))
        .help("INI experiment config")
}

fn list_arg(name: &'static str, help: &'static str) -> Arg {
    Arg::new(name)
        .long(name)
        .value_name("LIST")
        .required(true)
        .value_delimiter(',')
        .value_parser(value_parser!(f64))
        .help(help)
}

fn with_overrides(mut cmd: Command) -> Command {
    for key in known_keys() {
        cmd = cmd.arg(
            Arg::new(key.clone())
                .long(key.clone())
                .value_name("VALUE")
                .allow_negative_numbers(true)
                .help(format!("Override `{key}` from the config file")),
        );
    }
    cmd
}

fn dispatch(matches: &ArgMatches, out: &mut dyn Write) -> CliResult<()> {
    match matches.subcommand() {
        Some(("run", m)) => cmd_run(m, out),
        Some(("grid", m)) => cmd_grid(m, out),
        Some(("verify", m)) => cmd_verify(
            *m.get_one::<u64>("trials").expect("defaulted"),
            *m.get_one::<u64>("seed").expect("defaulted"),
            out,
        ),
        Some(("plot", m)) => {
            let spec = PlotSpec {
                logs: m.get_many::<PathBuf>("log").expect("required").cloned().collect(),
                series: m.get_many::<String>("series").expect("required").cloned().collect(),
                y_scale: m
                    .get_one::<String>("y-scale")
                    .expect("defaulted")
                    .parse()
                    .map_err(CliError::Usage)?,
                output: m.get_one::<PathBuf>("out").expect("required").clone(),
                include_diverged: m.get_flag("include-diverged"),
            };
            let drawn = cmd_plot(&spec)?;
            writeln!(out, "wrote {} series to {}", drawn, spec.output.display()).map_err(io)?;
            Ok(())
        }
        _ => Err(CliError::Usage("missing subcommand".into())),
    }
}

fn io(e: std::io::Error) -> CliError {
    CliError::Core(e.into())
}

fn load_raw(m: &ArgMatches) -> CliResult<RawConfig> {
    let path = m.get_one::<PathBuf>("config").expect("required");
    let mut raw = RawConfig::load(path)?;
    for key in known_keys() {
        if let Some(v) = m.get_one::<String>(&key) {
            raw.set(&key, v)?;
        }
    }
    Ok(raw)
}

fn cmd_run(m: &ArgMatches, out: &mut dyn Write) -> CliResult<()> {
    let cfg = ExperimentConfig::from_raw(&load_raw(m)?)?;
    let path = cfg.log_path();
    let records = run_to_file(&cfg, &path)?;
    writeln!(out, "wrote {} records to {}", records.len(), path.display()).map_err(io)?;
    if let Some(last) = records.last().filter(|r| r.flags.diverged) {
        writeln!(out, "diverged at step {}", last.step).map_err(io)?;
    }
    if let Ok(s) = summarize(&records) {
        writeln!(
            out,
            "last quartile: median |lambda1|/sam_edge = {:.4}, |lambda1|/gd_edge = {:.4}, align_iterate = {:.4}, align_uphill = {:.4}, final loss = {:.6e}",
            s.median_ratio_sam, s.median_ratio_gd, s.median_align_iterate, s.median_align_uphill, s.final_loss
        )
        .map_err(io)?;
    }
    Ok(())
}

fn cmd_grid(m: &ArgMatches, out: &mut dyn Write) -> CliResult<()> {
    let etas: Vec<f64> = m.get_many::<f64>("etas").expect("required").copied().collect();
    let rhos: Vec<f64> = m.get_many::<f64>("rhos").expect("required").copied().collect();
    if let Some(bad) = etas.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(CliError::Usage(format!("--etas: step sizes must be > 0, got {bad}")));
    }
    if let Some(bad) = rhos.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
        return Err(CliError::Usage(format!("--rhos: radii must be >= 0, got {bad}")));
    }
    let mut raw = load_raw(m)?;
    // The grid supplies eta and rho, so the base file may leave them out.
    for (key, first) in [("optim.eta", etas.first()), ("optim.rho", rhos.first())] {
        if let (None, Some(v)) = (raw.get(key), first) {
            raw.set(key, &v.to_string())?;
        }
    }
    let base = ExperimentConfig::from_raw(&raw)?;
    let dir = match m.get_one::<PathBuf>("out-dir") {
        Some(d) => d.clone(),
        None => std::env::var_os(LOG_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("."))
            .join("grid"),
    };
    let index = run_grid(&base, &etas, &rhos, &dir)?;
    let mut failures = Vec::new();
    for e in &index.entries {
        let status = match (&e.error, e.diverged) {
            (Some(msg), _) => {
                failures.push(format!("eta={} rho={}: {msg}", e.eta, e.rho));
                "error"
            }
            (None, true) => "diverged",
            (None, false) => "ok",
        };
        writeln!(out, "eta={} rho={} {} {}", e.eta, e.rho, status, e.log).map_err(io)?;
    }
    writeln!(out, "manifest: {}", index.manifest_path().display()).map_err(io)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Core(sam_edge::Error::Io(std::io::Error::other(failures.join("; ")))))
    }
}

pub fn cmd_verify(trials: u64, seed: u64, out: &mut dyn Write) -> CliResult<()> {
    if trials == 0 {
        return Err(CliError::Usage("--trials must be >= 1".into()));
    }
    let n = trials as usize;
    let mut all_passed = true;
    let mut line = |name: &str, passed: bool, detail: String| -> CliResult<()> {
        all_passed &= passed;
        let verdict = if passed { "PASS" } else { "FAIL" };
        writeln!(out, "{name} {verdict} {detail}").map_err(io)
    };

    let gd = quadlab::verify_gd_prop_sign(2..=16, n, seed)?;
    line(
        "prop1_sign",
        gd.passed(),
        format!("trials={} mismatches={} boundary={}", gd.trials, gd.mismatches, gd.boundary),
    )?;
    let sam = quadlab::verify_prop_sign(2..=16, n, seed)?;
    line(
        "prop3_sign",
        sam.passed(),
        format!("trials={} mismatches={} boundary={}", sam.trials, sam.mismatches, sam.boundary),
    )?;
    let closed = quadlab::verify_closed_form(1..=16, n, seed)?;
    line(
        "eq3_closed_form",
        closed.passed(),
        format!(
            "trials={} failures={} max_rel_err={:.3e}",
            closed.trials, closed.failures, closed.max_rel_err
        ),
    )?;
    let bis = quadlab::verify_edge_bisection(10, 1e-6)?;
    line(
        "edge_bisection",
        bis.passed(),
        format!(
            "configs={} failures={} max_rel_err={:.3e}",
            bis.configs, bis.failures, bis.max_rel_err
        ),
    )?;
    if all_passed {
        Ok(())
    } else {
        Err(CliError::Verification("verification failed".into()))
    }
}

/// What to plot and where.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotSpec {
    pub logs: Vec<PathBuf>,
    pub series: Vec<String>,
    pub y_scale: YScale,
    pub output: PathBuf,
    /// Diverged runs are skipped unless this is set.
    pub include_diverged: bool,
}

fn run_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Index where the divergent tail starts: the last point from which the
/// loss rises monotonically into the diverged record.
fn divergence_tail(table: &LogTable) -> Option<usize> {
    let last = table.records.last()?;
    if !last.flags.diverged {
        return None;
    }
    let losses: Vec<f64> = table.records.iter().map(|r| r.loss).collect();
    let mut end = losses.len() - 1;
    if !losses[end].is_finite() && end > 0 {
        end -= 1;
    }
    let mut start = end;
    while start > 0 && losses[start - 1] < losses[start] {
        start -= 1;
    }
    Some(start)
}

/// Writes the SVG described by `spec` and returns the number of series
/// drawn. Nothing is written on error.
pub fn cmd_plot(spec: &PlotSpec) -> CliResult<usize> {
    if spec.series.is_empty() {
        return Err(CliError::Usage("no series selected".into()));
    }
    let multiple = spec.logs.len() > 1;
    let mut series = Vec::new();
    for path in &spec.logs {
        let table = read_csv_file(path)?;
        if table.records.is_empty() {
            return Err(CliError::Core(sam_edge::Error::Log(format!(
                "{}: log has no records",
                path.display()
            ))));
        }
        let tail = divergence_tail(&table);
        if tail.is_some() && !spec.include_diverged {
            continue;
        }
        let xs = table.series("wall_s").expect("wall_s is always present");
        for name in &spec.series {
            let ys = table.series(name).ok_or_else(|| {
                CliError::Usage(format!(
                    "unknown series `{name}` in {} (columns: {})",
                    path.display(),
                    table.columns.join(",")
                ))
            })?;
            let label = if multiple {
                format!("{}:{name}", run_name(path))
            } else {
                name.clone()
            };
            series.push(Series {
                label,
                points: xs.iter().copied().zip(ys).collect(),
                dashed_from: tail,
            });
        }
    }
    if series.is_empty() {
        return Err(CliError::Usage(
            "every log is a diverged run; pass --include-diverged to plot them".into(),
        ));
    }
    let svg = svg::render(&series, spec.y_scale, "wall_s").map_err(CliError::Usage)?;
    std::fs::write(&spec.output, svg).map_err(io)?;
    Ok(series.len())
}
