//! Resolving models, policies and numeric lists from command-line text.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pomdp_lambda::parser::envs;
use pomdp_lambda::{
    parse_pomdp, policy_search, DiscrepancySpec, NormKind, OptimConfig, Policy, PomdpSource,
};

use crate::failure::{CmdResult, Failure};

/// A file read by a command, recorded in its manifest.
#[derive(Debug, Clone, Serialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

impl InputFile {
    pub fn read(path: &Path) -> CmdResult<(String, Self)> {
        let bytes = fs::read(path)
            .map_err(|e| Failure::Io(anyhow::anyhow!("cannot read {}: {e}", path.display())))?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| Failure::usage(format!("{} is not UTF-8 text", path.display())))?;
        Ok((
            text,
            Self {
                path: path.to_path_buf(),
                sha256: sha256_hex(&bytes),
            },
        ))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct ModelArgs {
    /// Built-in environment (tmaze, tmaze-mdp, parity, tk-equality, tiger,
    /// paint, cheese, network, shuttle, 4x3) or `block:STATES:ACTIONS:SEED`.
    #[arg(long)]
    pub env: Option<String>,
    /// Cassandra-format POMDP file.
    #[arg(long)]
    pub file: Option<PathBuf>,
}

impl ModelArgs {
    pub fn load(&self, inputs: &mut Vec<InputFile>) -> CmdResult<PomdpSource<f64>> {
        if let Some(path) = &self.file {
            let (text, input) = InputFile::read(path)?;
            inputs.push(input);
            let mut src = parse_pomdp::<f64>(&text)
                .map_err(|e| Failure::Usage(anyhow::anyhow!("{}: {e}", path.display())))?;
            src.name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            return Ok(src);
        }
        let name = self.env.as_deref().expect("clap enforces one source");
        env_by_name(name)
    }
}

fn env_by_name(name: &str) -> CmdResult<PomdpSource<f64>> {
    if let Some(rest) = name.strip_prefix("block:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let parsed = match parts.as_slice() {
            [s, a, seed] => s
                .parse::<usize>()
                .ok()
                .zip(a.parse::<usize>().ok())
                .zip(seed.parse::<u64>().ok()),
            _ => None,
        };
        return match parsed {
            Some(((s, a), seed)) if s > 0 && a > 0 => Ok(envs::random_block_mdp(s, a, seed)),
            _ => Err(Failure::usage(format!(
                "bad block MDP '{name}' (expected block:STATES:ACTIONS:SEED)"
            ))),
        };
    }
    envs::by_name(name).ok_or_else(|| {
        Failure::usage(format!(
            "unknown environment '{name}' (expected one of {} or block:S:A:SEED)",
            envs::ENV_NAMES.join(", ")
        ))
    })
}

/// Where the evaluated policies come from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySource {
    Uniform,
    /// `n` policies with Normal(0, 0.5) logits from ChaCha8 seeded by `seed`.
    Random {
        n: usize,
        seed: u64,
    },
    /// The highest-discrepancy policy among `n` random ones.
    Search {
        n: usize,
        seed: u64,
    },
    File(PathBuf),
}

impl std::str::FromStr for PolicySource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "uniform" {
            return Ok(PolicySource::Uniform);
        }
        for (prefix, search) in [("random:", false), ("search:", true)] {
            if let Some(rest) = s.strip_prefix(prefix) {
                let (n, seed) = rest
                    .split_once(':')
                    .and_then(|(n, seed)| Some((n.parse().ok()?, seed.parse().ok()?)))
                    .filter(|&(n, _): &(usize, u64)| n > 0)
                    .ok_or_else(|| format!("bad policy source '{s}' (expected {prefix}N:SEED)"))?;
                return Ok(if search {
                    PolicySource::Search { n, seed }
                } else {
                    PolicySource::Random { n, seed }
                });
            }
        }
        Ok(PolicySource::File(PathBuf::from(s)))
    }
}

/// JSON policy: a row-stochastic `probs` table or raw `logits`, one row per
/// observation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logits: Option<Vec<Vec<f64>>>,
}

impl PolicyRecord {
    pub fn of(pi: &Policy<f64>) -> Self {
        let rows = |a: &Array2<f64>| a.rows().into_iter().map(|r| r.to_vec()).collect();
        Self {
            probs: Some(rows(pi.probs())),
            logits: pi.logits().map(rows),
        }
    }

    fn into_policy(self) -> Result<Policy<f64>, String> {
        let table = |rows: Vec<Vec<f64>>| {
            let n_cols = rows.first().map_or(0, Vec::len);
            let n_rows = rows.len();
            let flat: Vec<f64> = rows.into_iter().flatten().collect();
            Array2::from_shape_vec((n_rows, n_cols), flat)
                .map_err(|_| "ragged policy table".to_string())
        };
        match (self.logits, self.probs) {
            (Some(l), _) => Ok(Policy::from_logits(table(l)?)),
            (None, Some(p)) => Policy::from_probs(table(p)?).map_err(|e| e.to_string()),
            (None, None) => Err("policy needs 'probs' or 'logits'".into()),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PolicyFile {
    One(PolicyRecord),
    Many(Vec<PolicyRecord>),
}

impl PolicySource {
    pub fn load(
        &self,
        src: &PomdpSource<f64>,
        spec: &DiscrepancySpec,
        inputs: &mut Vec<InputFile>,
    ) -> CmdResult<Vec<Policy<f64>>> {
        let p = &src.pomdp;
        let policies = match self {
            PolicySource::Uniform => vec![Policy::uniform(p.n_obs(), p.n_actions())],
            PolicySource::Random { n, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..*n)
                    .map(|_| envs::random_policy(p.n_obs(), p.n_actions(), 0.5, &mut rng))
                    .collect()
            }
            PolicySource::Search { n, seed } => {
                let mut norm_spec = *spec;
                if norm_spec.norm == NormKind::OccupancyWeightedMax {
                    norm_spec.norm = NormKind::OccupancyWeightedL2;
                }
                let cfg = OptimConfig {
                    n_random_policies: *n,
                    seed: *seed,
                    discrepancy: norm_spec,
                    ..OptimConfig::default()
                };
                vec![policy_search(p, &cfg)?.policy]
            }
            PolicySource::File(path) => {
                let (text, input) = InputFile::read(path)?;
                inputs.push(input);
                let records = match serde_json::from_str::<PolicyFile>(&text) {
                    Ok(PolicyFile::One(r)) => vec![r],
                    Ok(PolicyFile::Many(rs)) => rs,
                    Err(e) => {
                        return Err(Failure::usage(format!("{}: {e}", path.display())));
                    }
                };
                records
                    .into_iter()
                    .map(|r| {
                        r.into_policy()
                            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
                    })
                    .collect::<CmdResult<_>>()?
            }
        };
        for pi in &policies {
            pi.check_dims(p)?;
        }
        Ok(policies)
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            PolicySource::Random { seed, .. } | PolicySource::Search { seed, .. } => Some(*seed),
            _ => None,
        }
    }
}

/// `a,b` pair of lambdas.
pub fn parse_lambda_pair(s: &str) -> Result<(f64, f64), String> {
    let values = parse_list(s)?;
    match values.as_slice() {
        [a, b] if (0.0..=1.0).contains(a) && (0.0..=1.0).contains(b) => Ok((*a, *b)),
        [_, _] => Err(format!("lambdas must lie in [0, 1], got '{s}'")),
        _ => Err(format!("expected two comma-separated lambdas, got '{s}'")),
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| format!("'{v}' is not a number"))
        })
        .collect()
}

/// Grid values: a comma-separated list or `LO:HI:COUNT` (inclusive, evenly
/// spaced).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid(pub Vec<f64>);

impl std::str::FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let values = match parts.as_slice() {
            [lo, hi, count] => {
                let lo: f64 = lo.parse().map_err(|_| format!("bad grid start '{lo}'"))?;
                let hi: f64 = hi.parse().map_err(|_| format!("bad grid end '{hi}'"))?;
                let count: usize = count
                    .parse()
                    .map_err(|_| format!("bad grid count '{count}'"))?;
                match count {
                    0 => return Err("grid needs at least one point".into()),
                    1 => vec![lo],
                    _ => (0..count)
                        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
                        .collect(),
                }
            }
            [_] => parse_list(s)?,
            _ => return Err(format!("bad grid '{s}' (expected LO:HI:COUNT or a list)")),
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(format!("grid '{s}' has non-finite values"));
        }
        Ok(Grid(values))
    }
}

/// Seeds: `A..B` (half-open) or a comma-separated list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Seeds(pub Vec<u64>);

impl std::str::FromStr for Seeds {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
            let a: u64 = a.parse().map_err(|_| format!("bad seed range '{s}'"))?;
            let b: u64 = b.parse().map_err(|_| format!("bad seed range '{s}'"))?;
            (a..b).collect()
        } else {
            s.split(',')
                .map(|v| v.trim().parse().map_err(|_| format!("'{v}' is not a seed")))
                .collect::<Result<_, _>>()?
        };
        if seeds.is_empty() {
            return Err(format!("seed list '{s}' is empty"));
        }
        Ok(Seeds(seeds))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_and_seeds() {
        assert_eq!("0:1:3".parse::<Grid>().unwrap().0, vec![0.0, 0.5, 1.0]);
        assert_eq!("0.1,0.4".parse::<Grid>().unwrap().0, vec![0.1, 0.4]);
        assert!("0:1:0".parse::<Grid>().is_err());
        assert_eq!("2..5".parse::<Seeds>().unwrap().0, vec![2, 3, 4]);
        assert_eq!("7,1".parse::<Seeds>().unwrap().0, vec![7, 1]);
        assert!("3..3".parse::<Seeds>().is_err());
    }

    #[test]
    fn policy_sources() {
        assert_eq!("uniform".parse(), Ok(PolicySource::Uniform));
        assert_eq!(
            "random:100:7".parse(),
            Ok(PolicySource::Random { n: 100, seed: 7 })
        );
        assert!("random:0:7".parse::<PolicySource>().is_err());
        assert_eq!(
            "pi.json".parse(),
            Ok(PolicySource::File(PathBuf::from("pi.json")))
        );
    }

    #[test]
    fn lambda_pairs() {
        assert_eq!(parse_lambda_pair("0,1"), Ok((0.0, 1.0)));
        assert!(parse_lambda_pair("0").is_err());
        assert!(parse_lambda_pair("0,1.5").is_err());
    }

    #[test]
    fn hash_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
