//! Trajectory simulation and sample-based estimates of TD(lambda) values and
//! the lambda-discrepancy, used as a statistical cross-check of the solver.

use std::io::{self, BufRead, Write};

use ndarray::{Array1, Array2};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, Lu};
use crate::model::{ModelError, Policy, Pomdp};
use crate::scalar::Scalar;
use crate::solver::{DiscrepancySpec, NormKind};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid sampling request: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("sample estimates support only occupancy_weighted_l2, not {0}")]
    UnsupportedNorm(NormKind),
    #[error("no trajectory visits any observation-action pair")]
    NoVisits,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("trajectory dump line {line}: {source}")]
    Dump {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub obs: usize,
    pub action: usize,
    pub reward: f64,
}

/// One sampled episode. When `terminated`, the last step is the visit to
/// the terminal state (zero reward, nothing follows it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub episode: usize,
    pub seed: u64,
    pub steps: Vec<Step>,
    pub terminated: bool,
    /// Stopped by the horizon before reaching a terminal state.
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleDims {
    pub n_obs: usize,
    pub n_actions: usize,
}

impl SampleDims {
    pub fn of<F: Scalar>(p: &Pomdp<F>) -> Self {
        Self {
            n_obs: p.n_obs(),
            n_actions: p.n_actions(),
        }
    }

    fn pairs(&self) -> usize {
        self.n_obs * self.n_actions
    }
}

/// How visits at different times are weighted when averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisitWeighting {
    /// Every visit counts once.
    #[default]
    Undiscounted,
    /// A visit at time t counts `gamma^t`, matching the discounted
    /// occupancy behind the closed-form weights.
    Discounted,
}

fn categorical(weights: impl IntoIterator<Item = f64>) -> Option<WeightedIndex<f64>> {
    WeightedIndex::new(weights).ok()
}

struct Tables {
    start: WeightedIndex<f64>,
    obs: Vec<Option<WeightedIndex<f64>>>,
    policy: Vec<Option<WeightedIndex<f64>>>,
    next: Vec<Option<WeightedIndex<f64>>>,
    rewards: Array2<f64>,
    terminal: Vec<bool>,
    n_actions: usize,
}

impl Tables {
    fn new<F: Scalar>(p: &Pomdp<F>, pi: &Policy<F>) -> Result<Self, SamplerError> {
        let f = |v: &F| v.as_f64();
        let start = categorical(p.p0().iter().map(f))
            .ok_or_else(|| SamplerError::Config("start distribution has no mass".into()))?;
        let obs = p
            .phi()
            .rows()
            .into_iter()
            .map(|r| categorical(r.iter().map(f)))
            .collect();
        let policy = pi
            .probs()
            .rows()
            .into_iter()
            .map(|r| categorical(r.iter().map(f)))
            .collect();
        let (ns, na, _) = p.transitions().dim();
        let mut next = Vec::with_capacity(ns * na);
        for s in 0..ns {
            for a in 0..na {
                next.push(categorical(
                    p.transitions().slice(ndarray::s![s, a, ..]).iter().map(f),
                ));
            }
        }
        Ok(Self {
            start,
            obs,
            policy,
            next,
            rewards: p.rewards().mapv(|v| v.as_f64()),
            terminal: p.terminal().to_vec(),
            n_actions: na,
        })
    }

    fn draw(table: &Option<WeightedIndex<f64>>, rng: &mut impl Rng, what: &str) -> usize {
        table
            .as_ref()
            .unwrap_or_else(|| panic!("{what} row without mass in a validated model"))
            .sample(rng)
    }

    fn episode(&self, episode: usize, seed: u64, horizon: usize) -> Trajectory {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(episode as u64);
        let mut s = self.start.sample(&mut rng);
        let mut steps = Vec::new();
        let mut terminated = false;
        loop {
            let obs = Self::draw(&self.obs[s], &mut rng, "observation");
            let action = Self::draw(&self.policy[obs], &mut rng, "policy");
            if self.terminal[s] {
                steps.push(Step {
                    obs,
                    action,
                    reward: 0.0,
                });
                terminated = true;
                break;
            }
            if steps.len() == horizon {
                break;
            }
            steps.push(Step {
                obs,
                action,
                reward: self.rewards[[s, action]],
            });
            s = Self::draw(
                &self.next[s * self.n_actions + action],
                &mut rng,
                "transition",
            );
        }
        Trajectory {
            episode,
            seed,
            steps,
            truncated: !terminated,
            terminated,
        }
    }
}

/// Samples `n_episodes` episodes of at most `horizon` non-terminal steps
/// (plus the final terminal visit, if reached).
/// Episode `i` draws from stream `i` of a ChaCha8 generator keyed by `seed`.
pub fn simulate<F: Scalar>(
    p: &Pomdp<F>,
    pi: &Policy<F>,
    n_episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<Vec<Trajectory>, SamplerError> {
    if horizon == 0 {
        return Err(SamplerError::Config("horizon must be at least 1".into()));
    }
    if n_episodes == 0 {
        return Err(SamplerError::Config("need at least one episode".into()));
    }
    let report = p.validate();
    if !report.passed() {
        return Err(SamplerError::Config(format!("invalid model:\n{report}")));
    }
    pi.check_dims(p)?;
    let tables = Tables::new(p, pi)?;
    Ok((0..n_episodes)
        .map(|e| tables.episode(e, seed, horizon))
        .collect())
}

/// Upper bound on the return lost by cutting episodes after `horizon` steps.
pub fn truncation_bound<F: Scalar>(p: &Pomdp<F>, horizon: usize) -> f64 {
    let gamma = p.gamma().as_f64();
    let max_r = p
        .rewards()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.as_f64().abs()));
    if gamma >= 1.0 {
        return f64::INFINITY;
    }
    gamma.powi(horizon as i32) * max_r / (1.0 - gamma)
}

/// Linear statistics of the lambda-returns: for each pair `x`,
/// `sum_t w_t G_t = b[x] + sum_y coef[x, y] Q[y]` and `weight[x] = sum_t w_t`.
struct ReturnStats {
    coef: Array2<f64>,
    b: Array1<f64>,
    weight: Array1<f64>,
}

fn accumulate(
    trajs: &[Trajectory],
    multiplicity: Option<&[u32]>,
    dims: SampleDims,
    lambda: f64,
    gamma: f64,
    weighting: VisitWeighting,
) -> ReturnStats {
    let n = dims.pairs();
    let mut stats = ReturnStats {
        coef: Array2::zeros((n, n)),
        b: Array1::zeros(n),
        weight: Array1::zeros(n),
    };
    let mut suffix_coef = Array1::<f64>::zeros(n);
    for (e, traj) in trajs.iter().enumerate() {
        let times = multiplicity.map_or(1, |m| m[e]);
        if times == 0 || traj.steps.is_empty() {
            continue;
        }
        let times = times as f64;
        let pair = |s: &Step| s.obs * dims.n_actions + s.action;
        let discount: Vec<f64> = match weighting {
            VisitWeighting::Undiscounted => vec![1.0; traj.steps.len()],
            VisitWeighting::Discounted => (0..traj.steps.len())
                .scan(1.0, |w, _| {
                    let cur = *w;
                    *w *= gamma;
                    Some(cur)
                })
                .collect(),
        };
        // G_t = r_t + gamma (1 - lambda) Q(x_{t+1}) + gamma lambda G_{t+1}
        suffix_coef.fill(0.0);
        let mut suffix_b = 0.0;
        for t in (0..traj.steps.len()).rev() {
            let step = &traj.steps[t];
            if t + 1 < traj.steps.len() {
                suffix_coef.mapv_inplace(|v| v * gamma * lambda);
                suffix_coef[pair(&traj.steps[t + 1])] += gamma * (1.0 - lambda);
                suffix_b = step.reward + gamma * lambda * suffix_b;
            } else {
                suffix_b = step.reward;
            }
            let x = pair(step);
            let w = times * discount[t];
            stats.weight[x] += w;
            stats.b[x] += w * suffix_b;
            stats.coef.row_mut(x).scaled_add(w, &suffix_coef);
        }
    }
    stats
}

/// Sample estimate of the TD(lambda) fixed point over observation-action pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct QEstimate {
    pub values: Array2<f64>,
    /// Total visit weight per pair.
    pub visits: Array2<f64>,
    pub visited: Array2<bool>,
    pub lambda: f64,
}

fn solve_stats(
    stats: &ReturnStats,
    dims: SampleDims,
    lambda: f64,
) -> Result<QEstimate, SamplerError> {
    let n = dims.pairs();
    let visited: Vec<bool> = stats.weight.iter().map(|&w| w > 0.0).collect();
    if !visited.iter().any(|&v| v) {
        return Err(SamplerError::NoVisits);
    }
    // Q[x] = (b[x] + coef[x] . Q) / weight[x] on visited pairs; the
    // fixed point of that iteration solves a linear system directly.
    let mut a = Array2::<f64>::eye(n);
    let mut rhs = Array1::<f64>::zeros(n);
    for x in 0..n {
        if !visited[x] {
            continue;
        }
        let w = stats.weight[x];
        rhs[x] = stats.b[x] / w;
        for y in 0..n {
            a[[x, y]] -= stats.coef[[x, y]] / w;
        }
    }
    let q = Lu::factor(a)?.solve(rhs.view())?;
    let shape = (dims.n_obs, dims.n_actions);
    Ok(QEstimate {
        values: q.into_shape_with_order(shape).expect("pairs"),
        visits: stats
            .weight
            .clone()
            .into_shape_with_order(shape)
            .expect("pairs"),
        visited: Array1::from(visited)
            .into_shape_with_order(shape)
            .expect("pairs"),
        lambda,
    })
}

fn check_inputs(
    trajs: &[Trajectory],
    dims: SampleDims,
    lambda: f64,
    gamma: f64,
) -> Result<(), SamplerError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(SamplerError::Config(format!(
            "lambda {lambda} outside [0, 1]"
        )));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(SamplerError::Config(format!(
            "gamma {gamma} outside [0, 1]"
        )));
    }
    for t in trajs {
        if let Some(s) = t
            .steps
            .iter()
            .find(|s| s.obs >= dims.n_obs || s.action >= dims.n_actions)
        {
            return Err(SamplerError::Config(format!(
                "episode {} has pair ({}, {}) outside {}x{}",
                t.episode, s.obs, s.action, dims.n_obs, dims.n_actions
            )));
        }
    }
    Ok(())
}

/// Every-visit average of offline lambda-returns, with the bootstrap
/// values themselves taken from the estimate (iterated to its fixed point).
pub fn estimate_q_lambda(
    trajs: &[Trajectory],
    dims: SampleDims,
    lambda: f64,
    gamma: f64,
    weighting: VisitWeighting,
) -> Result<QEstimate, SamplerError> {
    check_inputs(trajs, dims, lambda, gamma)?;
    let stats = accumulate(trajs, None, dims, lambda, gamma, weighting);
    solve_stats(&stats, dims, lambda)
}

fn ld_from(q1: &QEstimate, q2: &QEstimate) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&a, &b), (&w, &seen)) in q1
        .values
        .iter()
        .zip(&q2.values)
        .zip(q1.visits.iter().zip(&q1.visited))
    {
        if seen {
            num += w * (a - b) * (a - b);
            den += w;
        }
    }
    (num / den).sqrt()
}

/// Sample lambda-discrepancy: visit-weighted root mean square difference of
/// the two estimates over visited pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct LdEstimate {
    pub value: f64,
    pub q1: QEstimate,
    pub q2: QEstimate,
}

pub fn estimate_ld(
    trajs: &[Trajectory],
    dims: SampleDims,
    spec: &DiscrepancySpec,
    gamma: f64,
    weighting: VisitWeighting,
) -> Result<LdEstimate, SamplerError> {
    if spec.norm != NormKind::OccupancyWeightedL2 {
        return Err(SamplerError::UnsupportedNorm(spec.norm));
    }
    let q1 = estimate_q_lambda(trajs, dims, spec.lambda1, gamma, weighting)?;
    let q2 = if spec.lambda1 == spec.lambda2 {
        q1.clone()
    } else {
        estimate_q_lambda(trajs, dims, spec.lambda2, gamma, weighting)?
    };
    Ok(LdEstimate {
        value: ld_from(&q1, &q2),
        q1,
        q2,
    })
}

/// Bootstrap standard errors from resampling whole episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Bootstrap {
    pub q1_se: Array2<f64>,
    pub q2_se: Array2<f64>,
    /// Standard error of the per-pair difference `q1 - q2`.
    pub diff_se: Array2<f64>,
    pub ld_se: f64,
    pub replicates: usize,
}

pub fn bootstrap_ld(
    trajs: &[Trajectory],
    dims: SampleDims,
    spec: &DiscrepancySpec,
    gamma: f64,
    weighting: VisitWeighting,
    replicates: usize,
    seed: u64,
) -> Result<Bootstrap, SamplerError> {
    if replicates < 2 {
        return Err(SamplerError::Config(
            "need at least two bootstrap replicates".into(),
        ));
    }
    let point = estimate_ld(trajs, dims, spec, gamma, weighting)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = trajs.len();
    let shape = point.q1.values.raw_dim();
    let (mut s1, mut ss1) = (Array2::<f64>::zeros(shape), Array2::<f64>::zeros(shape));
    let (mut s2, mut ss2) = (Array2::<f64>::zeros(shape), Array2::<f64>::zeros(shape));
    let (mut sd_sum, mut sd_sq) = (
        Array2::<f64>::zeros(point.q1.values.raw_dim()),
        Array2::<f64>::zeros(point.q1.values.raw_dim()),
    );
    let (mut sl, mut ssl) = (0.0, 0.0);
    let mut counts = vec![0u32; n];
    for _ in 0..replicates {
        counts.fill(0);
        for _ in 0..n {
            counts[rng.random_range(0..n)] += 1;
        }
        let r1 = solve_stats(
            &accumulate(trajs, Some(&counts), dims, spec.lambda1, gamma, weighting),
            dims,
            spec.lambda1,
        )?;
        let r2 = solve_stats(
            &accumulate(trajs, Some(&counts), dims, spec.lambda2, gamma, weighting),
            dims,
            spec.lambda2,
        )?;
        s1 += &r1.values;
        ss1 += &(&r1.values * &r1.values);
        s2 += &r2.values;
        ss2 += &(&r2.values * &r2.values);
        let diff = &r1.values - &r2.values;
        sd_sq += &(&diff * &diff);
        sd_sum += &diff;
        let ld = ld_from(&r1, &r2);
        sl += ld;
        ssl += ld * ld;
    }
    let b = replicates as f64;
    let sd = |s: f64, ss: f64| ((ss - s * s / b) / (b - 1.0)).max(0.0).sqrt();
    Ok(Bootstrap {
        q1_se: ndarray::Zip::from(&s1)
            .and(&ss1)
            .map_collect(|&s, &ss| sd(s, ss)),
        q2_se: ndarray::Zip::from(&s2)
            .and(&ss2)
            .map_collect(|&s, &ss| sd(s, ss)),
        diff_se: ndarray::Zip::from(&sd_sum)
            .and(&sd_sq)
            .map_collect(|&s, &ss| sd(s, ss)),
        ld_se: sd(sl, ssl),
        replicates,
    })
}

/// Writes one JSON object per trajectory.
pub fn write_jsonl(trajs: &[Trajectory], mut out: impl Write) -> Result<(), SamplerError> {
    for t in trajs {
        serde_json::to_writer(&mut out, t).map_err(io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(input: impl BufRead) -> Result<Vec<Trajectory>, SamplerError> {
    let mut trajs = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        trajs.push(
            serde_json::from_str(&line).map_err(|source| SamplerError::Dump {
                line: i + 1,
                source,
            })?,
        );
    }
    Ok(trajs)
}
