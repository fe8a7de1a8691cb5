//! `ctxdeg`: command-line front end for the contextuality-degree toolkit.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ctxdeg::class_sim::{self, BetaSchedule, DEFAULT_T_MAX};
use ctxdeg::classical::{self, binomial_distribution, InvalidDistribution};
use ctxdeg::gate_sim::{self, CounterLayout, GroverOptions};
use ctxdeg::geometry::{self, build_named, build_symplectic, Geometry, NamedGeometry};
use ctxdeg::repro::{self, ReproOptions, ReproTable};

const THREADS_ENV: &str = "CTXDEG_THREADS";

#[derive(Parser)]
#[command(
    name = "ctxdeg",
    version,
    about = "Degree of contextuality for Pauli-operator geometries"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Geometry name (triangle, grid, doily, two_spread, eloily, W3/W5/W7) or a geometry file
    #[arg(long, short, global = true, default_value = "grid")]
    geometry: String,
    /// Geometry file in the text format; overrides --geometry
    #[arg(long, global = true)]
    file: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 2048)]
    shots: usize,
    /// Write to this file instead of standard output
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// CSV tables; single records print as key=value lines
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Exact,
    Binomial,
}

#[derive(Clone, Copy, ValueEnum)]
enum Counter {
    Ripple,
    Literal,
}

#[derive(Subcommand)]
enum Command {
    /// Build, inspect or validate a geometry
    Geometry {
        #[command(subcommand)]
        action: GeometryAction,
    },
    /// Degree of contextuality by exhaustive enumeration, with a witness
    Degree,
    /// Distribution of invalid-line counts over all assignments
    Dist {
        /// Use the binomial estimate instead of enumerating
        #[arg(long)]
        binomial: bool,
    },
    /// Classical bounds implied by a degree
    Bounds {
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 2)]
        players: usize,
    },
    /// Gate-level Grover threshold search
    Grover {
        /// Initial threshold (defaults to the number of negative lines)
        #[arg(long)]
        y0: Option<usize>,
        /// Grover iterations per round (defaults to the planned count)
        #[arg(long)]
        tg: Option<usize>,
        /// Number of adaptive rounds (defaults to the counter width)
        #[arg(long)]
        rounds: Option<usize>,
        /// Control run without Grover iterations
        #[arg(long, conflicts_with = "tg")]
        control: bool,
        /// Plan iteration counts from the exact distribution instead of the normal estimate
        #[arg(long)]
        exact_hint: bool,
        #[arg(long, value_enum, default_value_t = Counter::Ripple)]
        counter: Counter,
    },
    /// Quasi-Grover evolution of the class amplitudes
    Quasi {
        #[arg(long, default_value_t = 50)]
        tmax: usize,
        /// Schedule file (`t,b_t` CSV or one multiplier per line); fixed multiplier 1 otherwise
        #[arg(long)]
        betas: Option<PathBuf>,
        /// Class whose probability defines t_opt (defaults to the degree)
        #[arg(long)]
        target: Option<usize>,
    },
    /// Greedy per-query phase multipliers for a target class
    OptimizeBetas {
        #[arg(long)]
        target: usize,
        #[arg(long, value_enum, default_value_t = Model::Exact)]
        model: Model,
        #[arg(long, default_value_t = DEFAULT_T_MAX)]
        tmax: usize,
    },
    /// Bisection search for the degree using optimized quasi-Grover rounds
    FindDegree {
        #[arg(long, value_enum, default_value_t = Model::Exact)]
        model: Model,
        #[arg(long, default_value_t = DEFAULT_T_MAX)]
        tmax: usize,
    },
    /// Regenerate a reference table and compare it with the embedded values
    Repro {
        #[arg(value_parser = ["table1", "table4", "table5", "table7", "table8"])]
        table: String,
    },
}

#[derive(Subcommand)]
enum GeometryAction {
    /// Print the geometry in the text format
    Build,
    /// Print point, line and sign counts
    Info,
    /// Check the geometry invariants
    Validate,
}

/// A command's rendered output and whether it counts as success.
struct Emitted {
    body: String,
    ok: bool,
}

impl From<String> for Emitted {
    fn from(body: String) -> Self {
        Self { body, ok: true }
    }
}

fn resolve_geometry(common: &Common) -> Result<Geometry> {
    if let Some(path) = &common.file {
        return load_file(path);
    }
    let spec = common.geometry.as_str();
    if let Ok(named) = spec.parse::<NamedGeometry>() {
        return Ok(build_named(named));
    }
    if let Some(n) = symplectic_qubits(spec) {
        return Ok(build_symplectic(n)?);
    }
    let path = Path::new(spec);
    if path.exists() {
        return load_file(path);
    }
    bail!("unknown geometry {spec:?}: not a known name and no such file")
}

/// `W3` → 2 qubits, `W5` → 3, …
fn symplectic_qubits(spec: &str) -> Option<usize> {
    let k: usize = spec.strip_prefix(['W', 'w'])?.parse().ok()?;
    (k % 2 == 1 && k >= 1).then_some(k.div_ceil(2))
}

fn load_file(path: &Path) -> Result<Geometry> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Geometry::parse_text(&text).with_context(|| format!("parsing {}", path.display()))
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn key_values<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> String {
    pairs
        .into_iter()
        .map(|(k, v)| format!("{k}={v}\n"))
        .collect()
}

fn distribution(g: &Geometry, model: Model) -> Result<InvalidDistribution> {
    Ok(match model {
        Model::Exact => classical::invalid_distribution(g)?,
        Model::Binomial => binomial_distribution(g),
    })
}

fn run(cli: &Cli) -> Result<Emitted> {
    let c = &cli.common;
    let json = c.format == Format::Json;
    Ok(match &cli.command {
        Command::Geometry { action } => {
            let g = resolve_geometry(c)?;
            match action {
                GeometryAction::Build if json => to_json(&serde_json::json!({
                    "name": g.name,
                    "points": g.num_points,
                    "labels": g.labels.as_ref().map(|ls| ls.iter().map(|l| l.label()).collect::<Vec<_>>()),
                    "lines": g.lines.iter().map(|l| serde_json::json!({
                        "points": l.points,
                        "sign": l.sign.symbol().to_string(),
                    })).collect::<Vec<_>>(),
                }))?
                .into(),
                GeometryAction::Build => g.to_text().into(),
                GeometryAction::Info => {
                    let s = geometry::summary(&g);
                    if json {
                        to_json(&s)?.into()
                    } else {
                        key_values(s.iter().map(|(k, v)| (*k, v.clone()))).into()
                    }
                }
                GeometryAction::Validate => {
                    let violations = g.validate();
                    let ok = violations.is_empty();
                    let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
                    let body = if json {
                        to_json(&serde_json::json!({ "valid": ok, "violations": msgs }))?
                    } else if ok {
                        format!("valid: {} points, {} lines\n", g.num_points, g.num_lines())
                    } else {
                        msgs.iter().map(|m| format!("invalid: {m}\n")).collect()
                    };
                    Emitted { body, ok }
                }
            }
        }
        Command::Degree => {
            let g = resolve_geometry(c)?;
            let d = classical::degree_of(&g)?;
            if json {
                to_json(&serde_json::json!({
                    "geometry": g.name,
                    "d": d.d,
                    "witness": d.witness.to_bit_string(),
                }))?
                .into()
            } else {
                key_values([
                    ("d", d.d.to_string()),
                    ("witness", d.witness.to_bit_string()),
                ])
                .into()
            }
        }
        Command::Dist { binomial } => {
            let g = resolve_geometry(c)?;
            let model = if *binomial {
                Model::Binomial
            } else {
                Model::Exact
            };
            let d = distribution(&g, model)?;
            if json {
                to_json(&d)?.into()
            } else {
                d.to_csv().into()
            }
        }
        Command::Bounds { d, players } => {
            let g = resolve_geometry(c)?;
            let b = g.contextuality_bounds(*d, *players)?;
            if json {
                to_json(&b)?.into()
            } else {
                let ll = b
                    .omega_ll
                    .map_or("undefined".to_string(), |x| x.to_string());
                key_values([
                    ("chi_bound", b.chi_bound.to_string()),
                    ("omega_ll", ll),
                    ("omega_pl", b.omega_pl.to_string()),
                ])
                .into()
            }
        }
        Command::Grover {
            y0,
            tg,
            rounds,
            control,
            exact_hint,
            counter,
        } => {
            let g = resolve_geometry(c)?;
            let opts = GroverOptions {
                y0: *y0,
                shots: c.shots,
                seed: c.seed,
                t_g: if *control { Some(0) } else { *tg },
                rounds: *rounds,
                dist_hint: if *exact_hint {
                    Some(classical::invalid_distribution(&g)?)
                } else {
                    None
                },
                counter: match counter {
                    Counter::Ripple => CounterLayout::Ripple,
                    Counter::Literal => CounterLayout::Literal,
                },
                ..GroverOptions::default()
            };
            let report = gate_sim::run_grover(&g, &opts)?;
            if json {
                report.to_json().into()
            } else {
                report.histogram_csv().into()
            }
        }
        Command::Quasi {
            tmax,
            betas,
            target,
        } => {
            let g = resolve_geometry(c)?;
            let d = classical::invalid_distribution(&g)?;
            let target = match target {
                Some(t) => *t,
                None => d.degree().ok_or_else(|| anyhow!("empty distribution"))?,
            };
            let traj = match betas {
                Some(path) => {
                    let text = fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    let mut bs = BetaSchedule::parse_multipliers(&text)?;
                    bs.resize((*tmax).max(bs.len()), 0);
                    bs.truncate(*tmax);
                    class_sim::replay(&d, target, &bs)?
                }
                None => class_sim::evolve_fixed(&d, target, *tmax)?.trajectory,
            };
            if json {
                to_json(&serde_json::json!({
                    "trajectory": traj,
                    "t_opt": traj.first_local_max(),
                    "argmax": traj.argmax(),
                }))?
                .into()
            } else {
                traj.to_csv().into()
            }
        }
        Command::OptimizeBetas {
            target,
            model,
            tmax,
        } => {
            let g = resolve_geometry(c)?;
            let d = distribution(&g, *model)?;
            let run = class_sim::optimize_betas(&d, *target, *tmax)?;
            if json {
                to_json(&run)?.into()
            } else {
                run.schedule.to_csv().into()
            }
        }
        Command::FindDegree { model, tmax } => {
            let g = resolve_geometry(c)?;
            let bf = classical::brute_force(&g)?;
            let m = match model {
                Model::Exact => bf.distribution.clone(),
                Model::Binomial => binomial_distribution(&g),
            };
            let search = class_sim::find_degree_bisection(
                &bf.distribution,
                &bf.witnesses,
                &m,
                c.shots,
                c.seed,
                *tmax,
            )?;
            if json {
                to_json(&search)?.into()
            } else {
                format!("{}d={}\n", search.audit_log(), search.estimate).into()
            }
        }
        Command::Repro { table } => {
            let table: ReproTable = table.parse()?;
            let report = repro::run(
                table,
                &ReproOptions {
                    seed: c.seed,
                    shots: c.shots,
                },
            )?;
            eprintln!("{}", report.summary());
            let body = if json {
                to_json(&report)?
            } else {
                report.to_csv()
            };
            Emitted {
                body,
                ok: report.passed(),
            }
        }
    })
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn emit(out: &Option<PathBuf>, body: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, body).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(body.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let result = run(&cli).and_then(|e| emit(&cli.common.output, &e.body).map(|_| e.ok));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
