use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::Value;
use thiserror::Error;

use sl2lab::LabError;

use crate::cmd::{Experiment, EXPERIMENTS};
use crate::output::{self, Format, Record};
use crate::suite::{self, SuiteArgs};

#[derive(Parser, Debug)]
#[command(name = "sl2lab", version, about = "Exact experiments on SL2(F_p) and friends", args_override_self = true)]
pub struct Cli {
    /// Worker threads; default is the hardware parallelism
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file; stdout when absent
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// JSON object of flag values; explicit flags win
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Append wall_time_s to every record
    #[arg(long, global = true)]
    pub timing: bool,
    /// Print every experiment with a one-line description
    #[arg(long)]
    pub list: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    #[command(flatten)]
    Experiment(Experiment),
    /// Run a manifest of experiments into one JSON report
    Suite(SuiteArgs),
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Lab(#[from] LabError),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0} run(s) drifted from the baseline")]
    Drift(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lab(LabError::BudgetExceeded { .. }) => 3,
            CliError::Lab(LabError::NotFound) => 1,
            CliError::Lab(_) | CliError::Config(_) => 2,
            CliError::Io(_) => 1,
            CliError::Drift(_) => 4,
        }
    }
}

const GLOBAL_VALUE_FLAGS: &[&str] = &["--threads", "--out", "--format", "--config"];
const GLOBAL_KEYS: &[&str] = &["threads", "out", "format", "timing"];

fn is_command(name: &str) -> bool {
    name == "suite" || EXPERIMENTS.iter().any(|(n, _)| *n == name)
}

/// Flag tokens for a JSON object: `true` is a bare flag, `false` and `null`
/// are dropped, arrays repeat the flag. Underscores in keys become dashes.
pub fn value_tokens(
    obj: &serde_json::Map<String, Value>,
    keep: impl Fn(&str) -> bool,
) -> Result<Vec<String>, CliError> {
    let mut out = Vec::new();
    for (k, v) in obj {
        if !keep(k) {
            continue;
        }
        let k = k.replace('_', "-");
        let items = match v {
            Value::Array(a) => a.clone(),
            other => vec![other.clone()],
        };
        for item in items {
            match item {
                Value::Bool(true) => out.push(format!("--{k}")),
                Value::Bool(false) | Value::Null => {}
                Value::String(s) => out.push(format!("--{k}={s}")),
                Value::Number(n) => out.push(format!("--{k}={n}")),
                _ => return Err(CliError::Config(format!("config key '{k}' has a nested value"))),
            }
        }
    }
    Ok(out)
}

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}

/// Index of the subcommand token, skipping global flags and their values.
fn command_index(args: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let a = &args[i];
        if GLOBAL_VALUE_FLAGS.contains(&a.as_str()) {
            i += 2;
            continue;
        }
        if a.starts_with('-') {
            i += 1;
            continue;
        }
        return is_command(a).then_some(i);
    }
    None
}

/// Splices the config file into the argument list: global keys go right
/// after the program name, experiment keys right after the subcommand, so
/// anything given explicitly comes later and overrides.
pub fn splice_config(mut args: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(path) = config_path(&args) else { return Ok(args) };
    let text =
        std::fs::read_to_string(&path).map_err(|e| CliError::Config(format!("cannot read config {path}: {e}")))?;
    let obj = match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(o)) => o,
        Ok(_) => return Err(CliError::Config(format!("config {path} is not a JSON object"))),
        Err(e) => return Err(CliError::Config(format!("config {path}: {e}"))),
    };
    let idx = match command_index(&args) {
        Some(i) => i,
        None => match obj.get("experiment").and_then(Value::as_str) {
            Some(name) if is_command(name) => {
                args.insert(1, name.to_string());
                1
            }
            Some(name) => return Err(CliError::Config(format!("unknown experiment '{name}' in config"))),
            None => return Ok(args),
        },
    };
    let globals = value_tokens(&obj, |k| GLOBAL_KEYS.contains(&k))?;
    let locals = value_tokens(&obj, |k| k != "experiment" && k != "config" && !GLOBAL_KEYS.contains(&k))?;
    let n_globals = globals.len();
    args.splice(idx + 1..idx + 1, locals);
    args.splice(1..1, globals);
    debug_assert!(is_command(&args[idx + n_globals]));
    Ok(args)
}

pub fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Config(e.to_string()))
}

/// Runs one experiment inside the pool, optionally stamping wall time.
pub fn run_experiment(exp: &Experiment, pool: &rayon::ThreadPool, timing: bool) -> Result<Vec<Record>, CliError> {
    let start = Instant::now();
    let mut rows = pool.install(|| exp.run())?;
    if timing {
        let secs = start.elapsed().as_secs_f64();
        for r in &mut rows {
            r.set("wall_time_s", output::float_value(secs));
        }
    }
    Ok(rows)
}

fn write_rows(rows: &[Record], format: Option<Format>, out: Option<&Path>) -> Result<(), CliError> {
    let bytes = output::render(rows, Format::resolve(format, out))?;
    output::emit(&bytes, out)?;
    Ok(())
}

fn list() -> String {
    let width = EXPERIMENTS.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
    EXPERIMENTS.iter().map(|(n, d)| format!("{n:width$}  {d}\n")).collect()
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    if cli.list {
        print!("{}", list());
        return Ok(());
    }
    let pool = pool(cli.threads)?;
    match cli.command {
        None => Err(CliError::Config("no experiment given; see --list".into())),
        Some(Command::Experiment(exp)) => {
            let rows = run_experiment(&exp, &pool, cli.timing)?;
            write_rows(&rows, cli.format, cli.out.as_deref())
        }
        Some(Command::Suite(args)) => suite::run(&args, &pool, cli.out.as_deref()),
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<String> = args.into_iter().map(|a| a.into().to_string_lossy().into_owned()).collect();
    let args = match splice_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn tokens_from_object() {
        let obj = serde_json::json!({"prime": 31, "symmetrize": true, "no_girth": false, "max_blocks": 3, "block": ["0,0,2", "5,5,2"], "g": "w"});
        let t = value_tokens(obj.as_object().unwrap(), |_| true).unwrap();
        assert_eq!(t, s(&["--prime=31", "--symmetrize", "--max-blocks=3", "--block=0,0,2", "--block=5,5,2", "--g=w"]));
    }

    #[test]
    fn command_is_found_past_globals() {
        assert_eq!(command_index(&s(&["x", "--out", "markov", "markov"])), Some(3));
        assert_eq!(command_index(&s(&["x", "--timing", "girth"])), Some(2));
        assert_eq!(command_index(&s(&["x", "--list"])), None);
    }

    #[test]
    fn explicit_flags_follow_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"experiment": "markov", "prime": 11, "nmax": 5, "threads": 1}"#).unwrap();
        let args = splice_config(s(&["x", "--config", path.to_str().unwrap(), "--nmax", "7"])).unwrap();
        let cli = Cli::try_parse_from(&args).unwrap();
        assert_eq!(cli.threads, Some(1));
        let Some(Command::Experiment(Experiment::Markov(m))) = cli.command else { panic!("{args:?}") };
        let dbg = format!("{m:?}");
        assert!(dbg.contains("prime: 11") && dbg.contains("nmax: 7"), "{dbg}");
        let args = splice_config(s(&["x", "--config", path.to_str().unwrap(), "markov", "--nmax", "7"])).unwrap();
        let Some(Command::Experiment(Experiment::Markov(m))) = Cli::try_parse_from(&args).unwrap().command else {
            panic!()
        };
        assert!(format!("{m:?}").contains("nmax: 7"));
    }
}
