//! Command-line front end. Exit codes: 0 success, 1 infeasible or
//! unsatisfiable, 2 usage, input or parse errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, Subcommand};

use crate::cp::{solve_min, solve_min_with, Backend, SolveOptions};
use crate::decomposition::build_network;
use crate::domain::DomainStore;
use crate::grammar::{Rhs, WeightedGrammar};
use crate::oracle::{dc_closure, enumerate_min_weights};
use crate::schedule::{build_schedule_model, ScheduleInstance};
use crate::soft::{Distance, SoftSpec};
use crate::wcyk::{Propagation, WcykPropagator};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "wcfg", version, about = "Weighted grammar constraint propagation and shift scheduling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Prune a domains file under WCFG(grammar, z).
    Propagate {
        grammar: PathBuf,
        domains: PathBuf,
        #[arg(long)]
        z: i64,
        /// m (chart), d (decomposition) or de (decomposition with entailment)
        #[arg(long, default_value = "m")]
        backend: Backend,
        /// Print the chart or constraint network before the result.
        #[arg(long)]
        dump: bool,
    },
    /// Soft-encode a grammar; with --domains, propagate the soft constraint.
    Soft {
        grammar: PathBuf,
        #[arg(long)]
        distance: Distance,
        #[arg(long)]
        z: i64,
        #[arg(long)]
        domains: Option<PathBuf>,
        /// Write the encoded grammar here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Minimize a shift-scheduling instance and print the solver log.
    Solve {
        instance: PathBuf,
        #[arg(long, default_value = "m")]
        backend: Backend,
        /// Seconds; defaults to the instance's time_limit.
        #[arg(long)]
        time_limit: Option<f64>,
    },
    /// Brute-force spot checks: the language table up to --max-len, or the
    /// domain-consistent closure of --domains under --z.
    Oracle {
        grammar: PathBuf,
        #[arg(long)]
        domains: Option<PathBuf>,
        #[arg(long)]
        z: Option<i64>,
        #[arg(long)]
        max_len: Option<usize>,
    },
    /// Solve every *.inst file of a directory with each backend; CSV report.
    Bench {
        dir: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "m,d,de")]
        backends: Vec<Backend>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        time_limit: Option<f64>,
    },
}

type CmdResult = Result<i32, String>;

/// Runs the command line `args` (including the program name).
pub fn cli_main<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Propagate { grammar, domains, z, backend, dump } => propagate(&grammar, &domains, z, backend, dump, out),
        Command::Soft { grammar, distance, z, domains, output } => soft(&grammar, distance, z, domains.as_deref(), output.as_deref(), out),
        Command::Solve { instance, backend, time_limit } => solve(&instance, backend, time_limit, out),
        Command::Oracle { grammar, domains, z, max_len } => oracle(&grammar, domains.as_deref(), z, max_len, out),
        Command::Bench { dir, backends, output, time_limit } => bench(&dir, &backends, output.as_deref(), time_limit, out),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            let _ = writeln!(err, "error: {message}");
            EXIT_USAGE
        }
    }
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_grammar(path: &Path) -> Result<WeightedGrammar, String> {
    let g = WeightedGrammar::parse(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
    g.checked().map_err(|e| format!("{}: {e}", path.display()))
}

fn load_domains(path: &Path, g: &WeightedGrammar) -> Result<DomainStore, String> {
    DomainStore::parse(&read(path)?, &g.symbols).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), String> {
    out.write_all(text.as_bytes()).map_err(|e| format!("write failed: {e}"))
}

fn report(out: &mut dyn Write, g: &WeightedGrammar, result: &Propagation) -> CmdResult {
    match result {
        Propagation::Pruned { domains, root_min } => {
            write_out(out, &format!("{} root_min={root_min}\n", domains.display(&g.symbols)))?;
            Ok(EXIT_OK)
        }
        Propagation::Infeasible => {
            write_out(out, "infeasible\n")?;
            Ok(EXIT_INFEASIBLE)
        }
    }
}

fn propagate(gpath: &Path, dpath: &Path, z: i64, backend: Backend, dump: bool, out: &mut dyn Write) -> CmdResult {
    let g = load_grammar(gpath)?;
    let d = load_domains(dpath, &g)?;
    let epsilon = g.productions.iter().any(|p| p.rhs == Rhs::Epsilon);
    let prop = if epsilon { WcykPropagator::with_epsilon(&g) } else { WcykPropagator::new(&g) }
        .map_err(|e| e.to_string())?;
    let result = match backend {
        Backend::Monolithic => {
            let (result, chart) = prop.propagate_with_chart(z, &d).map_err(|e| e.to_string())?;
            if dump {
                write_out(out, &chart.dump(&g.symbols))?;
            }
            result
        }
        Backend::Decomposition | Backend::DecompositionWithEntailment => {
            if epsilon {
                return Err("the decomposition backends need a strict CNF grammar".into());
            }
            match build_network(&prop, z, &d).map_err(|e| e.to_string())? {
                None => Propagation::Infeasible,
                Some(mut net) => {
                    net.set_entailment(backend == Backend::DecompositionWithEntailment);
                    let result = net.propagate(&d);
                    if dump {
                        write_out(out, &net.dump(&g))?;
                        let c = net.counters();
                        write_out(out, &format!("invoked={} skipped={}\n", c.invoked, c.skipped))?;
                    }
                    result
                }
            }
        }
    };
    report(out, &g, &result)
}

fn soft(
    gpath: &Path,
    distance: Distance,
    z: i64,
    dpath: Option<&Path>,
    output: Option<&Path>,
    out: &mut dyn Write,
) -> CmdResult {
    let base = load_grammar(gpath)?;
    let spec = SoftSpec::new(base.clone(), distance, z).map_err(|e| e.to_string())?;
    let encoded = spec.encode().map_err(|e| e.to_string())?;
    match output {
        Some(path) => fs::write(path, encoded.to_string()).map_err(|e| format!("{}: {e}", path.display()))?,
        None if dpath.is_none() => write_out(out, &encoded.to_string())?,
        None => {}
    }
    match dpath {
        Some(p) => {
            let d = load_domains(p, &base)?;
            let result = spec.propagate(&d).map_err(|e| e.to_string())?;
            report(out, &base, &result)
        }
        None => Ok(EXIT_OK),
    }
}

fn load_instance(path: &Path) -> Result<ScheduleInstance, String> {
    ScheduleInstance::parse(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn limit(seconds: f64) -> Result<Duration, String> {
    Duration::try_from_secs_f64(seconds).map_err(|_| format!("bad time limit {seconds}"))
}

fn solve(path: &Path, backend: Backend, time_limit: Option<f64>, out: &mut dyn Write) -> CmdResult {
    let inst = load_instance(path)?;
    let sm = build_schedule_model(&inst, backend).map_err(|e| e.to_string())?;
    let options = SolveOptions { time_limit: Some(limit(time_limit.unwrap_or(inst.time_limit))?) };
    let mut lines = Vec::new();
    let log = solve_min_with(&sm.model, &options, |imp| {
        lines.push(imp.to_string());
    });
    for line in lines {
        write_out(out, &format!("{line}\n"))?;
    }
    write_out(out, &format!("{}\n", log.status_line()))?;
    Ok(if log.best.is_some() { EXIT_OK } else { EXIT_INFEASIBLE })
}

fn oracle(gpath: &Path, dpath: Option<&Path>, z: Option<i64>, max_len: Option<usize>, out: &mut dyn Write) -> CmdResult {
    let g = load_grammar(gpath)?;
    match (dpath, z, max_len) {
        (Some(p), Some(z), None) => {
            let d = load_domains(p, &g)?;
            let z = u64::try_from(z).map_err(|_| "z must be non-negative".to_string())?;
            let c = dc_closure(&g, z, &d).map_err(|e| e.to_string())?;
            match c.min_weight {
                Some(w) => {
                    write_out(out, &format!("{} min_weight={w}\n", c.domains.display(&g.symbols)))?;
                    Ok(EXIT_OK)
                }
                None => {
                    write_out(out, "infeasible\n")?;
                    Ok(EXIT_INFEASIBLE)
                }
            }
        }
        (None, None, Some(len)) => {
            let table = enumerate_min_weights(&g, len).map_err(|e| e.to_string())?;
            for (w, c) in table.iter() {
                let s: Vec<&str> = w.iter().map(|&t| g.symbols.terminal_name(t)).collect();
                let s = if s.is_empty() { "eps".to_string() } else { s.join(" ") };
                write_out(out, &format!("{s} {c}\n"))?;
            }
            Ok(EXIT_OK)
        }
        _ => Err("oracle needs either --max-len, or --domains with --z".into()),
    }
}

/// Header of the bench report.
pub const BENCH_COLUMNS: [&str; 6] = ["instance", "backend", "cost", "time", "bt", "BT"];

fn bench(dir: &Path, backends: &[Backend], output: Option<&Path>, time_limit: Option<f64>, out: &mut dyn Write) -> CmdResult {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "inst"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(format!("{}: no .inst files", dir.display()));
    }
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(BENCH_COLUMNS).map_err(|e| e.to_string())?;
    for file in &files {
        let inst = load_instance(file)?;
        let name = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let options = SolveOptions { time_limit: Some(limit(time_limit.unwrap_or(inst.time_limit))?) };
        for &backend in backends {
            let sm = build_schedule_model(&inst, backend).map_err(|e| format!("{}: {e}", file.display()))?;
            let log = solve_min(&sm.model, &options);
            let cost = log.cost().map(|c| c.to_string()).unwrap_or_default();
            let time = log.improvements.last().map_or(log.elapsed, |i| i.time);
            csv.write_record([
                name.clone(),
                backend.to_string(),
                cost,
                format!("{:.3}", time.as_secs_f64()),
                log.bt().to_string(),
                log.backtracks.to_string(),
            ])
            .map_err(|e| e.to_string())?;
        }
    }
    let bytes = csv.into_inner().map_err(|e| e.to_string())?;
    match output {
        Some(path) => fs::write(path, &bytes).map_err(|e| format!("{}: {e}", path.display()))?,
        None => out.write_all(&bytes).map_err(|e| e.to_string())?,
    }
    Ok(EXIT_OK)
}
