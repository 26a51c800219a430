//! `solve` and `discrep`: closed-form values and discrepancies of fixed
//! policies.

use std::path::Path;

use clap::Args;
use serde::Serialize;

use pomdp_lambda::{lambda_discrepancy, q_lambda, v_lambda, DiscrepancySpec, NormKind};

use crate::failure::CmdResult;
use crate::output::{Outputs, SCHEMA};
use crate::source::{parse_lambda_pair, ModelArgs, PolicySource};

#[derive(Debug, Args, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// `uniform`, `random:N:SEED`, `search:N:SEED` or a JSON policy file.
    #[arg(long, default_value = "uniform")]
    pub policy: PolicySource,
    /// Lambdas to solve for.
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    pub lambda: Vec<f64>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Serialize)]
struct Solved {
    policy: usize,
    lambda: f64,
    condition_estimate: f64,
    q: Vec<Vec<f64>>,
    v: Vec<f64>,
}

pub fn run_solve(args: &SolveArgs) -> CmdResult {
    let mut inputs = Vec::new();
    let src = args.model.load(&mut inputs)?;
    let p = &src.pomdp;
    let policies = args
        .policy
        .load(&src, &DiscrepancySpec::default(), &mut inputs)?;
    let mut solved = Vec::new();
    for (i, pi) in policies.iter().enumerate() {
        for &lambda in &args.lambda {
            let q = q_lambda(p, pi, lambda)?;
            let v = v_lambda(p, pi, lambda)?;
            solved.push(Solved {
                policy: i,
                lambda,
                condition_estimate: q.condition_estimate,
                q: q.values.rows().into_iter().map(|r| r.to_vec()).collect(),
                v: v.values.to_vec(),
            });
        }
    }
    if args.json {
        #[derive(Serialize)]
        struct Doc<'a> {
            schema: &'static str,
            env: &'a str,
            observations: &'a [String],
            actions: &'a [String],
            results: &'a [Solved],
        }
        let doc = Doc {
            schema: SCHEMA,
            env: &src.name,
            observations: &src.obs_names,
            actions: &src.action_names,
            results: &solved,
        };
        println!("{}", serde_json::to_string_pretty(&doc)?);
        return Ok(());
    }
    let width = src
        .obs_names
        .iter()
        .map(String::len)
        .max()
        .unwrap_or(0)
        .max(11);
    for s in &solved {
        println!(
            "policy {} lambda {} (condition {:.2e})",
            s.policy, s.lambda, s.condition_estimate
        );
        print!("{:width$}", "observation");
        for a in &src.action_names {
            print!(" {a:>12}");
        }
        println!(" {:>12}", "V");
        for (o, row) in s.q.iter().enumerate() {
            print!("{:width$}", src.obs_names[o]);
            for v in row {
                print!(" {v:>12.6}");
            }
            println!(" {:>12.6}", s.v[o]);
        }
        println!();
    }
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct DiscrepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// `uniform`, `random:N:SEED`, `search:N:SEED` or a JSON policy file
    /// (one policy object or an array of them).
    #[arg(long, default_value = "random:100:0")]
    pub policies: PolicySource,
    /// The two lambdas compared.
    #[arg(long, default_value = "0,1", value_parser = parse_lambda_pair)]
    pub lambdas: (f64, f64),
    #[arg(long, default_value = "policy_weighted_l2")]
    pub norm: NormKind,
    /// Also print the rows as JSON on stdout.
    #[arg(long)]
    pub json: bool,
}

/// One row of `discrep.csv`. `kind` is `policy` for per-policy rows and
/// `min`, `max` or `mean` for the summary rows; `policy` names the attaining
/// policy of `min` and `max`.
#[derive(Debug, Serialize)]
pub struct DiscrepRow {
    pub kind: &'static str,
    pub policy: Option<usize>,
    pub lambda_discrepancy: f64,
}

pub fn run_discrep(args: &DiscrepArgs, out: &Path) -> CmdResult {
    let mut inputs = Vec::new();
    let src = args.model.load(&mut inputs)?;
    let spec = DiscrepancySpec::new(args.lambdas.0, args.lambdas.1, args.norm);
    let policies = args.policies.load(&src, &spec, &mut inputs)?;
    let values: Vec<f64> = policies
        .iter()
        .map(|pi| lambda_discrepancy(&src.pomdp, pi, &spec))
        .collect::<Result<_, _>>()?;

    let mut rows: Vec<DiscrepRow> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| DiscrepRow {
            kind: "policy",
            policy: Some(i),
            lambda_discrepancy: v,
        })
        .collect();
    let argmin = (0..values.len()).min_by(|&a, &b| values[a].total_cmp(&values[b]));
    let argmax = (0..values.len()).max_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    for (kind, policy, v) in [
        ("min", argmin, argmin.map(|i| values[i])),
        ("max", argmax, argmax.map(|i| values[i])),
        ("mean", None, Some(mean)),
    ] {
        rows.push(DiscrepRow {
            kind,
            policy,
            lambda_discrepancy: v.unwrap_or(f64::NAN),
        });
    }

    let mut outputs = Outputs::create(out, "discrep")?;
    let path = outputs.csv("discrep.csv", &rows)?;
    outputs.finish(args, args.policies.seed().into_iter().collect(), inputs)?;

    if args.json {
        #[derive(Serialize)]
        struct Doc<'a> {
            schema: &'static str,
            env: &'a str,
            spec: DiscrepancySpec,
            rows: &'a [DiscrepRow],
        }
        let doc = Doc {
            schema: SCHEMA,
            env: &src.name,
            spec,
            rows: &rows,
        };
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        let n = rows.len() - 3;
        let summary = &rows[n..];
        println!(
            "{}: {} policies, {} between lambda {} and {}: min {:.6e}, max {:.6e}, mean {:.6e}",
            src.name,
            n,
            args.norm,
            args.lambdas.0,
            args.lambdas.1,
            summary[0].lambda_discrepancy,
            summary[1].lambda_discrepancy,
            summary[2].lambda_discrepancy
        );
        println!("wrote {}", path.display());
    }
    Ok(())
}
