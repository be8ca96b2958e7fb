use std::path::{Path, PathBuf};

use clap::{Args, Parser, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Exact stationary samples, as a table of state frequencies
    Sample,
    /// One trace of the ARW process with its IDLA coupling
    RunArw,
    /// Fill times of independent IDLA runs
    RunIdla,
    /// P(T_full > N + c N^alpha) with an exact 99% interval
    FillTail,
    /// The same tail at the lower-bound exponent
    FillLower,
    /// Time for IDLA to occupy the sink's neighbours on the wired tree
    TreeFill,
    /// Distance to stationarity against the fill-time tail
    Mix,
    /// Green function, hitting sums and exit times of a ball
    Harmonic,
    /// Divisible sandpile relaxation and the Green-function inequality
    Sandpile,
    /// Density left by stabilizing a full ball
    Density,
    /// Variance of the stationary particle count on paths
    Hyperuniform,
    /// Abelian property on random small instances
    CheckAbelian,
    /// Law at time t given T_full <= t against exact samples
    SstCheck,
    /// Torus mixing budget and coupon-collector bound
    Budget,
}

impl Command {
    pub fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }
}

#[derive(Debug, Parser)]
#[command(name = "arw", version, about = "Activated random walk and internal DLA: samplers and experiments")]
pub struct Cli {
    pub command: Command,

    #[command(flatten)]
    pub options: Options,

    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Worker threads for trial fan-out (never changes results)
    #[arg(long)]
    pub workers: Option<usize>,

    /// Declarative run configuration (JSON or TOML); flags override it
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

/// Run parameters. Every field can come from a flag or from the config file.
#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Options {
    /// Master seed (required)
    #[arg(long)]
    pub seed: Option<u64>,

    /// Base chain, e.g. ball:d=2,r=30, torus:d=2,n=10, interval:r=200, tree:n=10, path:L=64
    #[arg(long)]
    pub chain: Option<String>,

    /// Sleep rate: a number, inf, or a file of per-vertex rates
    #[arg(long)]
    pub lambda: Option<String>,

    /// Driving: central[:v], uniform, permutation[:list], custom:list or file:PATH
    #[arg(long)]
    pub driving: Option<String>,

    #[arg(long)]
    pub trials: Option<u64>,

    #[arg(long)]
    pub samples: Option<u64>,

    /// Number of particles added (process runs) or step cap (IDLA runs)
    #[arg(long)]
    pub t_max: Option<u64>,

    /// Time at which a law is compared
    #[arg(long)]
    pub t: Option<u64>,

    /// Times for the mixing profile, e.g. 0..20 or 0,5,10
    #[arg(long)]
    pub t_grid: Option<String>,

    /// Tail exponent
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Lower-bound exponent
    #[arg(long)]
    pub beta: Option<f64>,

    /// Coefficient in front of N^alpha (or N^beta)
    #[arg(long)]
    pub coefficient: Option<f64>,

    #[arg(long)]
    pub eps: Option<f64>,

    /// Comma separated radii
    #[arg(long)]
    pub radii: Option<String>,

    /// Comma separated path lengths
    #[arg(long)]
    pub lengths: Option<String>,

    /// Lattice dimension
    #[arg(long)]
    pub dim: Option<usize>,

    /// Initial configuration: a state string, `empty`, or `stationary`
    #[arg(long)]
    pub initial: Option<String>,

    /// Initial sandpile mass (defaults to N + N^alpha / 2)
    #[arg(long)]
    pub mass: Option<f64>,

    /// Largest random instance size for check-abelian
    #[arg(long)]
    pub max_vertices: Option<usize>,

    /// Fill target for run-idla: all or marked
    #[arg(long)]
    pub target: Option<String>,

    /// Accept sleeping-particle counts in place of full states when the chain
    /// has more than 12 vertices (mix)
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub allow_projection: Option<bool>,
}

impl Options {
    /// Fields set here win over those in `base`.
    pub fn over(self, base: Options) -> Options {
        macro_rules! pick {
            ($($f:ident),*) => { Options { $($f: self.$f.or(base.$f)),* } };
        }
        pick!(
            seed, chain, lambda, driving, trials, samples, t_max, t, t_grid, alpha, beta, coefficient, eps, radii,
            lengths, dim, initial, mass, max_vertices, target, allow_projection
        )
    }
}

pub fn load_config(path: &Path) -> Result<Options, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let is_toml = path.extension().is_some_and(|e| e == "toml");
    if is_toml {
        toml::from_str(&text).map_err(|e| format!("malformed config {}: {e}", path.display()))
    } else {
        serde_json::from_str(&text).map_err(|e| format!("malformed config {}: {e}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let file = Options { seed: Some(1), trials: Some(5), ..Default::default() };
        let flags = Options { seed: Some(2), ..Default::default() };
        let merged = flags.over(file);
        assert_eq!(merged.seed, Some(2));
        assert_eq!(merged.trials, Some(5));
    }

    #[test]
    fn config_files() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("run.toml");
        std::fs::write(&toml_path, "seed = 3\nchain = \"interval:r=2\"\nt-max = 7\n").unwrap();
        let o = load_config(&toml_path).unwrap();
        assert_eq!((o.seed, o.t_max), (Some(3), Some(7)));
        let json_path = dir.path().join("run.json");
        std::fs::write(&json_path, r#"{"seed": 4, "bogus": 1}"#).unwrap();
        assert!(load_config(&json_path).is_err());
    }

    #[test]
    fn command_names() {
        assert_eq!(Command::RunArw.name(), "run-arw");
        assert_eq!(Command::SstCheck.name(), "sst-check");
        assert_eq!(Command::CheckAbelian.name(), "check-abelian");
    }
}
