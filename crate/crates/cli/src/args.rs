use std::path::PathBuf;

use channelscope::zoo::GridSpec;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "channelscope", version, about = "Divisibility diagnostics for time-dependent quantum channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Channel specification (TOML)
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Output file, written atomically
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Time grid as tmin:tmax:points, overriding the spec
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<GridSpec>,
    /// Seed for every randomized ensemble
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Tolerance override, e.g. --tol cp=1e-10 (repeatable)
    #[arg(long = "tol", value_parser = parse_tol)]
    pub tol: Vec<(String, f64)>,
    /// Write the result to stdout instead of a file
    #[arg(long)]
    pub stdout: bool,
}

#[derive(Debug, Clone, Args)]
pub struct QuasiEnmArgs {
    #[arg(long, default_value_t = 3.0)]
    pub m: f64,
    #[arg(long, default_value_t = 2.0)]
    pub n: f64,
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Canonical rates and divisibility witnesses on a time grid
    Scan {
        #[command(flatten)]
        common: Common,
    },
    /// Rates of the quasi-eternal GAD family over time
    Fig1 {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: QuasiEnmArgs,
    },
    /// Integrated rate negativity of the quasi-eternal GAD family against m
    Fig2 {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2.0)]
        n: f64,
        #[arg(long, default_value_t = 1.0)]
        nu: f64,
        /// Range of m as min:max:points
        #[arg(long, default_value = "1.1:10:90", value_parser = parse_grid)]
        m_range: GridSpec,
        /// Re-verify every k-th row by quadrature
        #[arg(long, default_value_t = 10)]
        verify_every: usize,
    },
    /// Run property suites and write a JSON report
    Certify {
        #[command(flatten)]
        common: Common,
        /// Suites to run (default: all)
        #[arg(long = "suite", value_enum)]
        suites: Vec<Suite>,
    },
    /// Choi spectra of the channel and of its short-time intermediate maps
    ChoiSpectrum {
        #[command(flatten)]
        common: Common,
    },
    /// Onset time of negative rates in the quasi-eternal GAD family
    Tstar {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: QuasiEnmArgs,
    },
    /// Integrated negativity of the canonical rates
    Hcla {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: QuasiEnmArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Lemma1,
    Theorem1,
    Neighborhood,
    Theorem2,
    Theorem3,
    Probe,
    Reconstruction,
    Constructions,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Lemma1,
        Suite::Theorem1,
        Suite::Neighborhood,
        Suite::Theorem2,
        Suite::Theorem3,
        Suite::Probe,
        Suite::Reconstruction,
        Suite::Constructions,
    ];
}

pub fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(format!("expected tmin:tmax:points, got '{s}'"));
    };
    let a: f64 = a.trim().parse().map_err(|e| format!("tmin: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("tmax: {e}"))?;
    let n: usize = n.trim().parse().map_err(|e| format!("points: {e}"))?;
    GridSpec::new(a, b, n).map_err(|e| e.to_string())
}

pub fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected name=value, got '{s}'"))?;
    let value: f64 = value.trim().parse().map_err(|e| format!("{name}: {e}"))?;
    Ok((name.trim().to_string(), value))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_syntax() {
        let g = parse_grid("0:5:500").unwrap();
        assert_eq!((g.t_min, g.t_max, g.points), (0.0, 5.0, 500));
        assert!(parse_grid("0:5").is_err());
        assert!(parse_grid("2:1:10").is_err());
    }

    #[test]
    fn tol_syntax() {
        assert_eq!(parse_tol("cp=1e-10").unwrap(), ("cp".to_string(), 1e-10));
        assert!(parse_tol("cp").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
