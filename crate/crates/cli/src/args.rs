use std::ffi::OsString;
use std::path::PathBuf;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use hanner_core::asymptotics::Delta;
use hanner_core::{DensityParam, EngineKind};

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "hanner",
    version,
    about = "Face numbers of Hanner polytopes P_n^a"
)]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,

    /// File of key=value lines supplying default flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

fn density(s: &str) -> Result<DensityParam, String> {
    s.parse().map_err(|e: hanner_core::Error| e.to_string())
}

fn delta(s: &str) -> Result<Delta, String> {
    s.parse().map_err(|e: hanner_core::Error| e.to_string())
}

fn engine(s: &str) -> Result<EngineKind, String> {
    s.parse().map_err(|e: hanner_core::Error| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Product/hull kinds of the first steps.
    Schedule {
        /// Density, `P/Q` or `V:BITS`.
        #[arg(long, value_parser = density)]
        a: DensityParam,
        #[arg(long)]
        steps: usize,
        /// Also print the window words of length Q.
        #[arg(long)]
        window: Option<u32>,
    },
    /// Coefficients a_{n,k}, k ≤ kmax.
    Fvector {
        #[arg(long, value_parser = density)]
        a: DensityParam,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        kmax: usize,
        /// paper, geometric or log.
        #[arg(long, value_parser = engine, default_value = "paper")]
        engine: EngineKind,
    },
    /// Window composition map as (x-degree, t-degree, coefficient).
    Phi {
        /// Explicit word over S/R (innermost first).
        #[arg(long, conflicts_with_all = ["a", "m"])]
        word: Option<String>,
        #[arg(long, value_parser = density, requires = "q")]
        a: Option<DensityParam>,
        #[arg(long)]
        q: Option<u32>,
        #[arg(long, default_value_t = 0)]
        m: u64,
        /// t truncation; defaults to 2^len.
        #[arg(long)]
        tmax: Option<usize>,
    },
    /// Enumerates the weighted trees for H_m and checks the tree sum.
    Trees {
        #[arg(long, value_parser = density)]
        a: DensityParam,
        #[arg(long)]
        q: u32,
        #[arg(long)]
        m: u32,
        #[arg(long, default_value_t = 16)]
        kmax: usize,
        #[arg(long, default_value_t = hanner_core::trees::DEFAULT_BUDGET)]
        budget: u64,
    },
    /// Certified lower bound on a_{qm,k} from the explicit tree.
    LowerBound {
        #[arg(long, value_parser = density)]
        a: DensityParam,
        #[arg(long)]
        q: u32,
        #[arg(long)]
        m: u32,
        #[arg(long)]
        k: u64,
    },
    /// Scan of log2 a_{n,⌊d^δ⌋} with an exponent fit.
    Asymptotics {
        #[arg(long, value_parser = density)]
        a: DensityParam,
        #[arg(long, value_parser = delta)]
        delta: Delta,
        #[arg(long)]
        nmax: u32,
        #[arg(long, default_value_t = 0)]
        nmin: u32,
        #[arg(long, value_parser = engine, default_value = "log")]
        engine: EngineKind,
        /// Write rows to this file instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// First n used by the fit; defaults to ⌈nmax/2⌉.
        #[arg(long)]
        fit_from: Option<u32>,
        /// Allowed |slope - target|.
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
    },
    /// Exact geometry of P_n^a for 2^n ≤ 16.
    Oracle {
        #[arg(long, value_parser = density)]
        a: DensityParam,
        #[arg(long)]
        n: u32,
        /// Include every face in the JSON output.
        #[arg(long)]
        full_lattice: bool,
    },
    /// Exponent triple for log|V|·log|F|·(R/r)².
    FlmReport {
        #[arg(long, value_parser = density)]
        a: DensityParam,
        #[arg(long, value_parser = delta)]
        delta: Delta,
        #[arg(long)]
        nmax: u32,
        #[arg(long, value_parser = engine, default_value = "log")]
        engine: EngineKind,
        #[arg(long)]
        fit_from: Option<u32>,
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
    },
    /// Desk-scale invariant suite.
    Selftest,
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value", i + 1))?;
        out.push((k.trim().replace('_', "-"), v.trim().to_string()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Inserts config defaults after the subcommand for flags the subcommand
/// accepts and the command line does not already set.
pub fn apply_config(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let entries = parse_config(&text)?;
    let command = Cli::command();
    let Some((pos, sub)) = args.iter().enumerate().skip(1).find_map(|(i, a)| {
        command
            .find_subcommand(a.to_string_lossy().as_ref())
            .map(|s| (i, s.clone()))
    }) else {
        return Ok(args);
    };
    let present = |key: &str| {
        args.iter().any(|a| {
            let s = a.to_string_lossy();
            s == format!("--{key}") || s.starts_with(&format!("--{key}="))
        })
    };
    let mut injected = Vec::new();
    for (key, value) in entries {
        let Some(arg) = sub
            .get_arguments()
            .chain(command.get_arguments())
            .find(|x| x.get_long() == Some(key.as_str()))
        else {
            continue;
        };
        if present(&key) || key == "config" {
            continue;
        }
        let takes_value = arg.get_action().takes_values();
        if takes_value {
            injected.push(OsString::from(format!("--{key}={value}")));
        } else if value == "true" {
            injected.push(OsString::from(format!("--{key}")));
        }
    }
    let mut out = args[..=pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_lines() {
        let entries = parse_config("# defaults\nengine = log\n\nfit_from=12\n").unwrap();
        assert_eq!(
            entries,
            vec![
                ("engine".to_string(), "log".to_string()),
                ("fit-from".to_string(), "12".to_string())
            ]
        );
        assert!(parse_config("oops").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
