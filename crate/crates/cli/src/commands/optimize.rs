//! `optimize-mem`: policy search, memory learning and policy improvement
//! for every (memory size, seed) combination.

use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use pomdp_lambda::{
    optimize_with_value_improvement, MemoryRecord, NormKind, OptimConfig, RunSummary,
};

use crate::failure::{CmdResult, Failure};
use crate::output::{Outputs, SCHEMA};
use crate::source::{parse_lambda_pair, InputFile, ModelArgs, PolicyRecord, Seeds};

#[derive(Debug, Args, Serialize)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Memory sizes; 1 is the memoryless baseline.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub n_mem: Vec<usize>,
    /// `A..B` or a comma-separated list.
    #[arg(long, default_value = "0..30")]
    pub seeds: Seeds,
    /// JSON optimizer configuration; the flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Adam steps on the memory logits (default 20000).
    #[arg(long)]
    pub memory_steps: Option<usize>,
    /// Policy-gradient steps after memory learning (default 10000).
    #[arg(long)]
    pub policy_steps: Option<usize>,
    /// Adam learning rate for both stages (default 0.01).
    #[arg(long)]
    pub step_size: Option<f64>,
    /// Random policies scored in the search stage.
    #[arg(long)]
    pub n_policies: Option<usize>,
    /// Std of the Normal draw for candidate policy logits.
    #[arg(long)]
    pub policy_init_std: Option<f64>,
    /// The two lambdas whose discrepancy memory learning minimizes.
    #[arg(long, value_parser = parse_lambda_pair)]
    pub lambdas: Option<(f64, f64)>,
    /// policy_weighted_l2 or occupancy_weighted_l2.
    #[arg(long)]
    pub norm: Option<NormKind>,
    /// Score search candidates on the problem augmented by the initial
    /// random memory instead of the memoryless problem.
    #[arg(long)]
    pub pre_augment: bool,
}

impl OptimizeArgs {
    fn resolve(&self, inputs: &mut Vec<InputFile>) -> CmdResult<OptimConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let (text, input) = InputFile::read(path)?;
                inputs.push(input);
                serde_json::from_str(&text)
                    .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?
            }
            None => OptimConfig::default(),
        };
        if let Some(v) = self.memory_steps {
            cfg.memory_steps = v;
        }
        if let Some(v) = self.policy_steps {
            cfg.policy_steps = v;
        }
        if let Some(v) = self.step_size {
            cfg.step_size = v;
        }
        if let Some(v) = self.n_policies {
            cfg.n_random_policies = v;
        }
        if let Some(v) = self.policy_init_std {
            cfg.policy_init_std = v;
        }
        if let Some((a, b)) = self.lambdas {
            cfg.discrepancy.lambda1 = a;
            cfg.discrepancy.lambda2 = b;
        }
        if let Some(norm) = self.norm {
            cfg.discrepancy.norm = norm;
        }
        cfg.validate()?;
        if cfg.discrepancy.norm == NormKind::OccupancyWeightedMax {
            return Err(Failure::usage(
                "memory learning needs a differentiable norm (policy_weighted_l2 or occupancy_weighted_l2)",
            ));
        }
        if self.n_mem.contains(&0) {
            return Err(Failure::usage("memory sizes must be at least 1"));
        }
        Ok(cfg)
    }
}

/// Per-run JSON report.
#[derive(Serialize)]
struct RunReport<'a> {
    schema: &'static str,
    env: &'a str,
    config: OptimConfig,
    summary: &'a RunSummary,
    search_lambdas: &'a [f64],
    memory_trace: &'a [f64],
    policy_trace: &'a [f64],
    memory: MemoryRecord,
    policy: PolicyRecord,
}

#[derive(Debug, Serialize)]
pub struct SummaryRow {
    pub n_mem: usize,
    pub seed: u64,
    pub pre_augment: bool,
    pub initial_lambda_discrepancy: f64,
    pub final_lambda_discrepancy: f64,
    pub initial_return: f64,
    pub final_return: f64,
    pub memory_failure_step: Option<usize>,
    pub policy_failure_step: Option<usize>,
}

impl From<&RunSummary> for SummaryRow {
    fn from(s: &RunSummary) -> Self {
        Self {
            n_mem: s.n_mem,
            seed: s.seed,
            pre_augment: s.pre_augment,
            initial_lambda_discrepancy: s.initial_lambda_discrepancy,
            final_lambda_discrepancy: s.final_lambda_discrepancy,
            initial_return: s.initial_return,
            final_return: s.final_return,
            memory_failure_step: s.memory_failure.as_ref().map(|f| f.step),
            policy_failure_step: s.policy_failure.as_ref().map(|f| f.step),
        }
    }
}

pub fn run(args: &OptimizeArgs, out: &Path) -> CmdResult {
    let mut inputs = Vec::new();
    let src = args.model.load(&mut inputs)?;
    let base_cfg = args.resolve(&mut inputs)?;
    let combos: Vec<(usize, u64)> = args
        .n_mem
        .iter()
        .flat_map(|&m| args.seeds.0.iter().map(move |&s| (m, s)))
        .collect();

    let runs: Vec<(RunSummary, Vec<u8>)> = combos
        .par_iter()
        .map(|&(n_mem, seed)| -> CmdResult<(RunSummary, Vec<u8>)> {
            let cfg = OptimConfig { seed, ..base_cfg };
            let run = optimize_with_value_improvement(&src.pomdp, n_mem, &cfg, args.pre_augment)?;
            let summary = run.summary();
            let report = RunReport {
                schema: SCHEMA,
                env: &src.name,
                config: cfg,
                summary: &summary,
                search_lambdas: &run.search.lambdas,
                memory_trace: &run.memory.trace,
                policy_trace: &run.policy.trace,
                memory: run.memory.memory.to_record(),
                policy: PolicyRecord::of(&run.policy.policy),
            };
            let mut bytes = serde_json::to_vec(&report)?;
            bytes.push(b'\n');
            Ok((summary, bytes))
        })
        .collect::<CmdResult<_>>()?;

    let mut outputs = Outputs::create(out, "optimize-mem")?;
    let mut rows = Vec::with_capacity(runs.len());
    for (summary, bytes) in runs {
        outputs.raw(
            &format!("optimize-mem/m{}-s{}.json", summary.n_mem, summary.seed),
            bytes,
        )?;
        rows.push(SummaryRow::from(&summary));
    }
    let path = outputs.csv("optimize-mem-summary.csv", &rows)?;
    outputs.finish(
        ConfigEcho {
            args,
            resolved: base_cfg,
        },
        args.seeds.0.clone(),
        inputs,
    )?;

    for &m in &args.n_mem {
        let group: Vec<&SummaryRow> = rows.iter().filter(|r| r.n_mem == m).collect();
        let n = group.len() as f64;
        let mean = |f: fn(&SummaryRow) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / n;
        println!(
            "{} n_mem {m}: {} seeds, mean lambda-discrepancy {:.4e} -> {:.4e}, mean return {:.6} -> {:.6}",
            src.name,
            group.len(),
            mean(|r| r.initial_lambda_discrepancy),
            mean(|r| r.final_lambda_discrepancy),
            mean(|r| r.initial_return),
            mean(|r| r.final_return)
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    args: &'a OptimizeArgs,
    resolved: OptimConfig,
}
