//! `sample-check`: sampled lambda-discrepancy against the closed form.

use std::path::Path;

use clap::{Args, ValueEnum};
use serde::Serialize;

use pomdp_lambda::sampler::{
    bootstrap_ld, estimate_ld, simulate, truncation_bound, write_jsonl, SampleDims, VisitWeighting,
};
use pomdp_lambda::{lambda_discrepancy, q_lambda, DiscrepancySpec, NormKind};

use crate::failure::{CmdResult, Failure};
use crate::output::{Outputs, SCHEMA};
use crate::source::{parse_lambda_pair, ModelArgs, PolicySource};

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// A visit at time t counts gamma^t, as in the closed form.
    Discounted,
    /// Every visit counts once.
    Undiscounted,
}

impl From<Weighting> for VisitWeighting {
    fn from(w: Weighting) -> Self {
        match w {
            Weighting::Discounted => VisitWeighting::Discounted,
            Weighting::Undiscounted => VisitWeighting::Undiscounted,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// `uniform`, `random:1:SEED`, `search:N:SEED` or a JSON policy file
    /// holding one policy.
    #[arg(long, default_value = "uniform")]
    pub policy: PolicySource,
    #[arg(long, default_value = "0,1", value_parser = parse_lambda_pair)]
    pub lambdas: (f64, f64),
    #[arg(long, default_value_t = 100_000)]
    pub episodes: usize,
    /// Maximum non-terminal steps per episode.
    #[arg(long, default_value_t = 500)]
    pub horizon: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Bootstrap replicates for standard errors.
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    #[arg(long, value_enum, default_value = "discounted")]
    pub weighting: Weighting,
    /// Also write the sampled episodes as JSON lines.
    #[arg(long)]
    pub dump_trajectories: bool,
}

#[derive(Serialize)]
struct PairReport {
    observation: String,
    action: String,
    visits: f64,
    q1_closed: f64,
    q1_sampled: f64,
    q1_se: f64,
    q2_closed: f64,
    q2_sampled: f64,
    q2_se: f64,
    difference_sampled: f64,
    difference_se: f64,
}

#[derive(Serialize)]
struct Report {
    schema: &'static str,
    env: String,
    spec: DiscrepancySpec,
    episodes: usize,
    horizon: usize,
    terminated: usize,
    truncation_bound: f64,
    closed_form: f64,
    sampled: f64,
    sampled_se: f64,
    relative_error: Option<f64>,
    /// Every visited pair's sampled difference lies within 3 SE of zero.
    consistent_with_zero: bool,
    /// Share of visited pairs whose closed-form values lie within 3 SE of
    /// both sampled estimates.
    pair_coverage: f64,
    pairs: Vec<PairReport>,
}

pub fn run(args: &SampleArgs, out: &Path) -> CmdResult {
    if args.episodes == 0 {
        return Err(Failure::usage("--episodes must be at least 1"));
    }
    if args.horizon == 0 {
        return Err(Failure::usage("--horizon must be at least 1"));
    }
    let mut inputs = Vec::new();
    let src = args.model.load(&mut inputs)?;
    let p = &src.pomdp;
    let spec = DiscrepancySpec::new(
        args.lambdas.0,
        args.lambdas.1,
        NormKind::OccupancyWeightedL2,
    );
    let mut policies = args.policy.load(&src, &spec, &mut inputs)?;
    if policies.len() != 1 {
        return Err(Failure::usage(format!(
            "sample-check takes one policy, got {}",
            policies.len()
        )));
    }
    let pi = policies.remove(0);

    let closed = lambda_discrepancy(p, &pi, &spec)?;
    let q1 = q_lambda(p, &pi, spec.lambda1)?.values;
    let q2 = q_lambda(p, &pi, spec.lambda2)?.values;
    let trajs = simulate(p, &pi, args.episodes, args.horizon, args.seed)?;
    let dims = SampleDims::of(p);
    let gamma = p.gamma();
    let weighting = args.weighting.into();
    let est = estimate_ld(&trajs, dims, &spec, gamma, weighting)?;
    let boot = bootstrap_ld(
        &trajs,
        dims,
        &spec,
        gamma,
        weighting,
        args.replicates,
        args.seed,
    )?;

    let mut pairs = Vec::new();
    let (mut covered, mut zero_ok) = (0usize, true);
    for o in 0..dims.n_obs {
        for a in 0..dims.n_actions {
            if !est.q1.visited[[o, a]] {
                continue;
            }
            let (s1, s2) = (est.q1.values[[o, a]], est.q2.values[[o, a]]);
            let (se1, se2, sed) = (boot.q1_se[[o, a]], boot.q2_se[[o, a]], boot.diff_se[[o, a]]);
            if (s1 - q1[[o, a]]).abs() <= 3.0 * se1 && (s2 - q2[[o, a]]).abs() <= 3.0 * se2 {
                covered += 1;
            }
            zero_ok &= (s1 - s2).abs() <= 3.0 * sed + 1e-12;
            pairs.push(PairReport {
                observation: src.obs_names[o].clone(),
                action: src.action_names[a].clone(),
                visits: est.q1.visits[[o, a]],
                q1_closed: q1[[o, a]],
                q1_sampled: s1,
                q1_se: se1,
                q2_closed: q2[[o, a]],
                q2_sampled: s2,
                q2_se: se2,
                difference_sampled: s1 - s2,
                difference_se: sed,
            });
        }
    }
    let report = Report {
        schema: SCHEMA,
        env: src.name.clone(),
        spec,
        episodes: args.episodes,
        horizon: args.horizon,
        terminated: trajs.iter().filter(|t| t.terminated).count(),
        truncation_bound: truncation_bound(p, args.horizon),
        closed_form: closed,
        sampled: est.value,
        sampled_se: boot.ld_se,
        relative_error: (closed > 0.0).then(|| (est.value - closed).abs() / closed),
        consistent_with_zero: zero_ok,
        pair_coverage: covered as f64 / pairs.len().max(1) as f64,
        pairs,
    };

    let mut outputs = Outputs::create(out, "sample-check")?;
    let path = outputs.json("sample-check.json", &report)?;
    if args.dump_trajectories {
        let mut bytes = Vec::new();
        write_jsonl(&trajs, &mut bytes)?;
        outputs.raw("sample-check-trajectories.jsonl", bytes)?;
    }
    outputs.finish(args, vec![args.seed], inputs)?;

    println!(
        "{}: closed form {:.6}, sampled {:.6} (se {:.2e}){}",
        src.name,
        closed,
        report.sampled,
        report.sampled_se,
        report
            .relative_error
            .map_or(String::new(), |r| format!(", relative error {r:.4}"))
    );
    println!(
        "{} of {} visited pairs covered at 3 SE; consistent with zero: {}",
        covered,
        report.pairs.len(),
        report.consistent_with_zero
    );
    println!("wrote {}", path.display());
    Ok(())
}
