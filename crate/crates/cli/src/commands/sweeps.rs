//! `sweep-po` and `parity-sweep`: discrepancy over a grid of model
//! perturbations.

use std::path::Path;

use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use pomdp_lambda::parser::envs::{self, AliasPattern};
use pomdp_lambda::{lambda_discrepancy, DiscrepancySpec, NormKind, Policy};

use crate::failure::{CmdResult, Failure};
use crate::output::Outputs;
use crate::source::{parse_lambda_pair, Grid, PolicySource};

#[derive(Debug, Args, Serialize)]
pub struct SweepPoArgs {
    /// Aliasing patterns to sweep.
    #[arg(long, value_delimiter = ',', default_value = "corridor,junction,both")]
    pub patterns: Vec<AliasPattern>,
    /// Mix values in [0, 1]: `LO:HI:COUNT` or a list.
    #[arg(long, default_value = "0:1:11")]
    pub grid: Grid,
    #[arg(long, default_value_t = 5)]
    pub corridor_len: usize,
    #[arg(long, default_value = "0,1", value_parser = parse_lambda_pair)]
    pub lambdas: (f64, f64),
    #[arg(long, default_value = "occupancy_weighted_max")]
    pub norm: NormKind,
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub pattern: AliasPattern,
    pub mix: f64,
    pub lambda_discrepancy: f64,
}

/// Undiscounted fully observed T-maze whose observation matrix is blended
/// toward an aliased one; the policy walks right and goes up with
/// probability 2/3 at the junction.
pub fn run_sweep_po(args: &SweepPoArgs, out: &Path) -> CmdResult {
    if args.grid.0.iter().any(|m| !(0.0..=1.0).contains(m)) {
        return Err(Failure::usage("mix values must lie in [0, 1]"));
    }
    if args.corridor_len == 0 {
        return Err(Failure::usage("corridor length must be at least 1"));
    }
    let len = args.corridor_len;
    let base = envs::tmaze_mdp::<f64>(len, 1.0).pomdp;
    let pi = envs::tmaze_mdp_sweep_policy::<f64>(len);
    let spec = DiscrepancySpec::new(args.lambdas.0, args.lambdas.1, args.norm);
    let points: Vec<(AliasPattern, f64)> = args
        .patterns
        .iter()
        .flat_map(|&pattern| args.grid.0.iter().map(move |&mix| (pattern, mix)))
        .collect();
    let rows: Vec<SweepRow> = points
        .par_iter()
        .map(|&(pattern, mix)| -> CmdResult<SweepRow> {
            let aliased = envs::tmaze_aliased_phi::<f64>(len, pattern);
            let p = envs::mix_observation(&base, &aliased, mix)?;
            Ok(SweepRow {
                pattern,
                mix,
                lambda_discrepancy: lambda_discrepancy(&p, &pi, &spec)?,
            })
        })
        .collect::<CmdResult<_>>()?;

    let mut outputs = Outputs::create(out, "sweep-po")?;
    let path = outputs.csv("sweep-po.csv", &rows)?;
    outputs.finish(args, Vec::new(), Vec::new())?;
    for pattern in &args.patterns {
        let curve: Vec<String> = rows
            .iter()
            .filter(|r| r.pattern == *pattern)
            .map(|r| format!("{:.4}", r.lambda_discrepancy))
            .collect();
        println!("{pattern:>8}: {}", curve.join(" "));
    }
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Perturbation {
    /// Moves `value` of start probability from the red-cyan branch to the
    /// red-pink branch, so matching colour pairs become more likely.
    StartProbs,
    /// Action down in the first red state keeps the agent there with
    /// probability `value`.
    StayAction,
}

#[derive(Debug, Args, Serialize)]
pub struct ParitySweepArgs {
    #[arg(long, value_enum)]
    pub perturbation: Perturbation,
    /// Perturbation sizes: `LO:HI:COUNT` or a list. Defaults to 0:0.2:11 for
    /// start-probs and 0:0.5:11 for stay-action.
    #[arg(long)]
    pub grid: Option<Grid>,
    #[arg(long, default_value = "random:100:0")]
    pub policies: PolicySource,
    #[arg(long, default_value = "0,1", value_parser = parse_lambda_pair)]
    pub lambdas: (f64, f64),
    #[arg(long, default_value = "policy_weighted_l2")]
    pub norm: NormKind,
}

#[derive(Debug, Serialize)]
pub struct ParityRow {
    pub perturbation: Perturbation,
    pub value: f64,
    pub policies: usize,
    pub min_lambda_discrepancy: f64,
    pub mean_lambda_discrepancy: f64,
    pub max_lambda_discrepancy: f64,
}

pub fn run_parity_sweep(args: &ParitySweepArgs, out: &Path) -> CmdResult {
    let grid = args
        .grid
        .clone()
        .unwrap_or_else(|| match args.perturbation {
            Perturbation::StartProbs => Grid((0..=10).map(|i| 0.02 * i as f64).collect()),
            Perturbation::StayAction => Grid((0..=10).map(|i| 0.05 * i as f64).collect()),
        });
    let valid = |v: f64| match args.perturbation {
        Perturbation::StartProbs => (-0.25..=0.25).contains(&v),
        Perturbation::StayAction => (0.0..1.0).contains(&v),
    };
    if let Some(v) = grid.0.iter().find(|&&v| !valid(v)) {
        return Err(Failure::usage(format!(
            "{v} is outside the range of the {:?} perturbation",
            args.perturbation
        )));
    }
    let spec = DiscrepancySpec::new(args.lambdas.0, args.lambdas.1, args.norm);
    let mut inputs = Vec::new();
    let unperturbed = envs::parity_check::<f64>();
    let policies: Vec<Policy<f64>> = args.policies.load(&unperturbed, &spec, &mut inputs)?;

    let rows: Vec<ParityRow> = grid
        .0
        .par_iter()
        .map(|&value| -> CmdResult<ParityRow> {
            let src = match args.perturbation {
                Perturbation::StartProbs => {
                    envs::parity_with::<f64>(&[0.25 + value, 0.25 - value, 0.25, 0.25], 0.0)
                }
                Perturbation::StayAction => envs::parity_with::<f64>(&[0.25; 4], value),
            };
            let values: Vec<f64> = policies
                .iter()
                .map(|pi| lambda_discrepancy(&src.pomdp, pi, &spec))
                .collect::<Result<_, _>>()?;
            Ok(ParityRow {
                perturbation: args.perturbation,
                value,
                policies: values.len(),
                min_lambda_discrepancy: values.iter().copied().fold(f64::INFINITY, f64::min),
                mean_lambda_discrepancy: values.iter().sum::<f64>() / values.len() as f64,
                max_lambda_discrepancy: values.iter().copied().fold(0.0, f64::max),
            })
        })
        .collect::<CmdResult<_>>()?;

    let mut outputs = Outputs::create(out, "parity-sweep")?;
    let path = outputs.csv("parity-sweep.csv", &rows)?;
    outputs.finish(args, args.policies.seed().into_iter().collect(), inputs)?;
    for r in &rows {
        println!(
            "{:>8.4}: max {:.4e} mean {:.4e}",
            r.value, r.max_lambda_discrepancy, r.mean_lambda_discrepancy
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}
