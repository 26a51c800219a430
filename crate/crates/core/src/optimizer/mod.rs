//! Memory learning by gradient descent on the lambda-discrepancy, plus the
//! policy-gradient stage that follows it.

mod adam;
mod engine;

use std::fmt;

use ndarray::{Array2, Array4, Ix2, Ix4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extended::DoubleDouble;
use crate::memory::{augment, lift_policy, softmax_last, MemoryFn};
use crate::model::{ModelError, Policy, Pomdp};
use crate::parser::envs::random_policy;
use crate::scalar::Scalar;
use crate::solver::{
    check_lambda, ensure_valid, lambda_discrepancy_unchecked, DiscrepancySpec, NormKind,
    SolverError,
};

pub use adam::Adam;

/// Generator streams, one per stage, all keyed by [`OptimConfig::seed`].
const POLICY_STREAM: u64 = 0;
const MEMORY_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimConfig {
    /// Random memoryless policies scored in the search stage.
    pub n_random_policies: usize,
    pub memory_steps: usize,
    pub policy_steps: usize,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Std of the Gaussian policy logits drawn in the search stage.
    pub policy_init_std: f64,
    pub seed: u64,
    pub discrepancy: DiscrepancySpec,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            n_random_policies: 100,
            memory_steps: 20_000,
            policy_steps: 10_000,
            step_size: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            policy_init_std: 0.5,
            seed: 0,
            discrepancy: DiscrepancySpec::default(),
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<(), OptimError> {
        let bad = |what: &str| Err(OptimError::Config(what.to_string()));
        if self.n_random_policies == 0 {
            return bad("n_random_policies must be positive");
        }
        if !(self.step_size.is_finite() && self.step_size >= 0.0) {
            return bad("step_size must be finite and nonnegative");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return bad("eps must be positive");
        }
        if !(self.policy_init_std.is_finite() && self.policy_init_std > 0.0) {
            return bad("policy_init_std must be positive");
        }
        check_lambda(self.discrepancy.lambda1)?;
        check_lambda(self.discrepancy.lambda2)?;
        Ok(())
    }

    fn adam<F: Scalar, D: ndarray::Dimension>(&self, shape: D) -> Adam<F, D> {
        Adam::new(shape, self.step_size, self.beta1, self.beta2, self.eps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    PolicySearch,
    MemoryImprovement,
    Augmentation,
    PolicyImprovement,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::PolicySearch => "policy search",
            Stage::MemoryImprovement => "memory improvement",
            Stage::Augmentation => "augmentation",
            Stage::PolicyImprovement => "policy improvement",
        })
    }
}

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("invalid optimizer configuration: {0}")]
    Config(String),
    #[error("{0} is not differentiable; optimize with an L2 norm")]
    UnsupportedNorm(NormKind),
    #[error("parameters must carry logits to be optimized")]
    MissingLogits,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<OptimError>,
    },
}

impl OptimError {
    fn at(self, stage: Stage) -> Self {
        match self {
            e @ OptimError::Stage { .. } => e,
            e => OptimError::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}

/// A non-finite objective or gradient stopped an optimization loop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NumericalFailure {
    pub step: usize,
    /// First non-finite gradient entry, if the objective itself was finite.
    pub index: Option<Vec<usize>>,
}

/// Objective value, reported value and gradient with respect to logits.
#[derive(Debug, Clone)]
pub struct GradientReport<F, D: ndarray::Dimension> {
    /// Squared norm for lambda-discrepancy, the return itself for policies.
    pub objective: F,
    /// Lambda-discrepancy (with the root) or expected return.
    pub value: F,
    pub grad: ndarray::Array<F, D>,
}

fn require_l2(norm: NormKind) -> Result<(), OptimError> {
    match norm {
        NormKind::OccupancyWeightedMax => Err(OptimError::UnsupportedNorm(norm)),
        _ => Ok(()),
    }
}

fn check_augmented_policy<F: Scalar>(
    p: &Pomdp<F>,
    n_mem: usize,
    pi: &Policy<F>,
) -> Result<(), ModelError> {
    if pi.n_obs() != p.n_obs() * n_mem || pi.n_actions() != p.n_actions() {
        return Err(ModelError::Dimension(format!(
            "policy is {}x{}, augmented problem needs {}x{}",
            pi.n_obs(),
            pi.n_actions(),
            p.n_obs() * n_mem,
            p.n_actions()
        )));
    }
    Ok(())
}

fn check_memory<F: Scalar>(p: &Pomdp<F>, mu: &MemoryFn<F>) -> Result<(), ModelError> {
    if mu.n_obs() != p.n_obs() || mu.n_actions() != p.n_actions() {
        return Err(ModelError::Dimension(format!(
            "memory is over {} observations and {} actions, problem has {} and {}",
            mu.n_obs(),
            mu.n_actions(),
            p.n_obs(),
            p.n_actions()
        )));
    }
    Ok(())
}

/// Lambda-discrepancy of `probs` on `p` augmented by memory `logits`, with
/// the gradient of the squared norm. Assumes validated inputs.
fn memory_objective<F: Scalar>(
    p: &Pomdp<F>,
    logits: &Array4<F>,
    probs: &Array2<F>,
    spec: &DiscrepancySpec,
    want_grad: bool,
) -> Result<(F, F, Option<Array4<F>>), SolverError> {
    let mem_probs = softmax_last(logits);
    let aug = crate::memory::augment_with_probs(p, &mem_probs)?;
    let t0 = aug.solve_transitions();
    let out = engine::ld_eval(
        &t0,
        aug.rewards(),
        aug.phi(),
        aug.p0(),
        aug.gamma(),
        probs,
        (spec.lambda1, spec.lambda2),
        spec.norm,
        want_grad,
    )?;
    let grad = out
        .grad_t
        .map(|g| engine::memory_logit_grad(p, &mem_probs, &g));
    Ok((out.objective, out.discrepancy, grad))
}

/// Squared lambda-discrepancy of `pi` on `p` augmented by `mu`, and its
/// gradient with respect to the memory logits.
pub fn ld_gradient<F: Scalar>(
    p: &Pomdp<F>,
    mu: &MemoryFn<F>,
    pi: &Policy<F>,
    spec: &DiscrepancySpec,
) -> Result<GradientReport<F, Ix4>, OptimError> {
    require_l2(spec.norm)?;
    check_lambda(spec.lambda1)?;
    check_lambda(spec.lambda2)?;
    let logits = mu.logits().ok_or(OptimError::MissingLogits)?;
    ensure_valid(p, &Policy::uniform(p.n_obs(), p.n_actions()))?;
    check_memory(p, mu)?;
    check_augmented_policy(p, mu.n_mem(), pi)?;
    let (objective, value, grad) = memory_objective(p, logits, pi.probs(), spec, true)?;
    Ok(GradientReport {
        objective,
        value,
        grad: grad.expect("gradient requested"),
    })
}

/// Expected discounted return of `pi` from the start distribution.
pub fn expected_return<F: Scalar>(p: &Pomdp<F>, pi: &Policy<F>) -> Result<F, SolverError> {
    ensure_valid(p, pi)?;
    Ok(engine::start_value_eval(p, pi.probs(), false)?.0)
}

/// Expected return of `pi` and its gradient with respect to the policy logits.
pub fn return_gradient<F: Scalar>(
    p: &Pomdp<F>,
    pi: &Policy<F>,
) -> Result<GradientReport<F, Ix2>, OptimError> {
    pi.logits().ok_or(OptimError::MissingLogits)?;
    ensure_valid(p, pi)?;
    let (j, grad) = engine::start_value_eval(p, pi.probs(), true)?;
    let grad = engine::policy_logit_grad(pi.probs(), &grad.expect("gradient requested"));
    Ok(GradientReport {
        objective: j,
        value: j,
        grad,
    })
}

/// Agreement between an analytic gradient and central finite differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdCheck {
    /// Largest relative error over entries whose analytic magnitude exceeds
    /// the threshold.
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub checked: usize,
    pub worst_index: Option<usize>,
}

/// Compares `analytic` with central differences of `f` at `x`, step `h`.
/// `f` may evaluate in a wider scalar than the gradient under test.
pub fn finite_difference_check<G: Scalar, E>(
    x: &[f64],
    analytic: &[f64],
    h: f64,
    threshold: f64,
    mut f: impl FnMut(&[f64]) -> Result<G, E>,
) -> Result<FdCheck, E> {
    assert_eq!(
        x.len(),
        analytic.len(),
        "gradient length must match parameters"
    );
    let mut probe = x.to_vec();
    let mut out = FdCheck {
        max_rel_err: 0.0,
        max_abs_err: 0.0,
        checked: 0,
        worst_index: None,
    };
    for i in 0..x.len() {
        let (hi, lo) = (x[i] + h, x[i] - h);
        probe[i] = hi;
        let up = f(&probe)?;
        probe[i] = lo;
        let down = f(&probe)?;
        probe[i] = x[i];
        // Divide by the step actually taken, exact in G when G is wider.
        let fd = ((up - down) / (G::lit(hi) - G::lit(lo))).as_f64();
        let abs = (fd - analytic[i]).abs();
        out.max_abs_err = out.max_abs_err.max(abs);
        if analytic[i].abs() > threshold {
            out.checked += 1;
            let rel = abs / analytic[i].abs();
            if rel > out.max_rel_err || out.worst_index.is_none() {
                out.max_rel_err = out.max_rel_err.max(rel);
                out.worst_index = Some(i);
            }
        }
    }
    Ok(out)
}

/// Finite-difference check of [`ld_gradient`] at `mu`. The objective is
/// re-evaluated in double-double so that cancellation in the difference
/// quotient stays far below the gradient entries being checked.
pub fn check_ld_gradient<F: Scalar>(
    p: &Pomdp<F>,
    mu: &MemoryFn<F>,
    pi: &Policy<F>,
    spec: &DiscrepancySpec,
    h: f64,
) -> Result<FdCheck, OptimError> {
    let report = ld_gradient(p, mu, pi, spec)?;
    let logits = mu.logits().expect("checked by ld_gradient");
    let shape = logits.dim();
    let x: Vec<f64> = logits.iter().map(|v| v.as_f64()).collect();
    let g: Vec<f64> = report.grad.iter().map(|v| v.as_f64()).collect();
    let (p, probs) = (
        p.cast::<DoubleDouble>(),
        pi.probs().mapv(|v| DoubleDouble::new(v.as_f64())),
    );
    finite_difference_check(&x, &g, h, 1e-8, |probe| {
        let l =
            Array4::from_shape_vec(shape, probe.iter().map(|&v| DoubleDouble::new(v)).collect())
                .expect("shape");
        memory_objective(&p, &l, &probs, spec, false).map(|(o, _, _)| o)
    })
    .map_err(OptimError::from)
}

/// Finite-difference check of [`return_gradient`] at `pi`.
pub fn check_return_gradient<F: Scalar>(
    p: &Pomdp<F>,
    pi: &Policy<F>,
    h: f64,
) -> Result<FdCheck, OptimError> {
    let report = return_gradient(p, pi)?;
    let logits = pi.logits().expect("checked by return_gradient");
    let shape = logits.dim();
    let x: Vec<f64> = logits.iter().map(|v| v.as_f64()).collect();
    let g: Vec<f64> = report.grad.iter().map(|v| v.as_f64()).collect();
    let p = p.cast::<DoubleDouble>();
    finite_difference_check(&x, &g, h, 1e-8, |probe| {
        let l =
            Array2::from_shape_vec(shape, probe.iter().map(|&v| DoubleDouble::new(v)).collect())
                .expect("shape");
        let probs = Policy::from_logits(l);
        engine::start_value_eval(&p, probs.probs(), false).map(|(j, _)| j)
    })
    .map_err(OptimError::from)
}

fn first_non_finite<F: Scalar, D: ndarray::Dimension>(
    grad: &ndarray::Array<F, D>,
) -> Option<Vec<usize>> {
    let flat = grad.iter().position(|v| !v.is_finite())?;
    let mut rest = flat;
    let mut index = vec![0; grad.ndim()];
    for (slot, &len) in index.iter_mut().zip(grad.shape()).rev() {
        *slot = rest % len;
        rest /= len;
    }
    Some(index)
}

fn finite_grad<F: Scalar, D: ndarray::Dimension>(
    objective: F,
    grad: &ndarray::Array<F, D>,
    step: usize,
) -> Result<(), NumericalFailure> {
    if !objective.is_finite() {
        return Err(NumericalFailure { step, index: None });
    }
    match first_non_finite(grad) {
        Some(index) => Err(NumericalFailure {
            step,
            index: Some(index),
        }),
        None => Ok(()),
    }
}

/// Result of [`improve_memory`].
#[derive(Debug, Clone)]
pub struct MemoryRun<F> {
    /// Final memory, or the best iterate seen if the loop failed.
    pub memory: MemoryFn<F>,
    /// Lambda-discrepancy before each step, then after the last one.
    pub trace: Vec<f64>,
    pub failure: Option<NumericalFailure>,
}

impl<F> MemoryRun<F> {
    pub fn initial(&self) -> f64 {
        self.trace[0]
    }

    pub fn last(&self) -> f64 {
        *self.trace.last().expect("trace holds the initial value")
    }
}

/// Adam on the memory logits, minimizing the squared lambda-discrepancy of
/// the fixed augmented-space policy `pi`.
pub fn improve_memory<F: Scalar>(
    p: &Pomdp<F>,
    mu0: &MemoryFn<F>,
    pi: &Policy<F>,
    cfg: &OptimConfig,
) -> Result<MemoryRun<F>, OptimError> {
    cfg.validate()?;
    require_l2(cfg.discrepancy.norm)?;
    let mut logits = mu0.logits().ok_or(OptimError::MissingLogits)?.clone();
    ensure_valid(p, &Policy::uniform(p.n_obs(), p.n_actions()))?;
    check_memory(p, mu0)?;
    check_augmented_policy(p, mu0.n_mem(), pi)?;

    let spec = cfg.discrepancy;
    let mut adam = cfg.adam::<F, Ix4>(logits.raw_dim());
    let mut trace = Vec::with_capacity(cfg.memory_steps + 1);
    let mut best = (F::infinity(), logits.clone());
    let mut failure = None;
    for step in 0..cfg.memory_steps {
        let (obj, disc, grad) = memory_objective(p, &logits, pi.probs(), &spec, true)?;
        let grad = grad.expect("gradient requested");
        if let Err(f) = finite_grad(obj, &grad, step) {
            failure = Some(f);
            break;
        }
        trace.push(disc.as_f64());
        if obj < best.0 {
            best = (obj, logits.clone());
        }
        adam.step(&mut logits, &grad);
    }
    if failure.is_some() {
        logits = best.1;
    } else {
        let (_, disc, _) = memory_objective(p, &logits, pi.probs(), &spec, false)?;
        trace.push(disc.as_f64());
    }
    if trace.is_empty() {
        let (_, disc, _) = memory_objective(p, &logits, pi.probs(), &spec, false)?;
        trace.push(disc.as_f64());
    }
    let memory = MemoryFn::from_logits(logits)?.with_seed(mu0.seed());
    Ok(MemoryRun {
        memory,
        trace,
        failure,
    })
}

/// Result of [`policy_gradient_improve`].
#[derive(Debug, Clone)]
pub struct PolicyRun<F> {
    pub policy: Policy<F>,
    /// Expected return before each step, then after the last one.
    pub trace: Vec<f64>,
    pub failure: Option<NumericalFailure>,
}

impl<F> PolicyRun<F> {
    pub fn initial(&self) -> f64 {
        self.trace[0]
    }

    pub fn last(&self) -> f64 {
        *self.trace.last().expect("trace holds the initial value")
    }
}

/// Adam ascent on the expected return, starting from the logits of `pi0`.
pub fn policy_gradient_improve<F: Scalar>(
    p: &Pomdp<F>,
    pi0: &Policy<F>,
    cfg: &OptimConfig,
) -> Result<PolicyRun<F>, OptimError> {
    cfg.validate()?;
    let mut logits = pi0.logits().ok_or(OptimError::MissingLogits)?.clone();
    ensure_valid(p, pi0)?;
    let mut adam = cfg.adam::<F, Ix2>(logits.raw_dim());
    let mut trace = Vec::with_capacity(cfg.policy_steps + 1);
    let mut best = (F::neg_infinity(), logits.clone());
    let mut failure = None;
    for step in 0..cfg.policy_steps {
        let probs = Policy::from_logits(logits.clone());
        let (j, grad) = engine::start_value_eval(p, probs.probs(), true)?;
        let grad = engine::policy_logit_grad(probs.probs(), &grad.expect("gradient requested"));
        if let Err(f) = finite_grad(j, &grad, step) {
            failure = Some(f);
            break;
        }
        trace.push(j.as_f64());
        if j > best.0 {
            best = (j, logits.clone());
        }
        adam.step(&mut logits, &grad.mapv(|g| -g));
    }
    if failure.is_some() {
        logits = best.1;
    }
    let policy = Policy::from_logits(logits);
    if failure.is_none() || trace.is_empty() {
        trace.push(
            engine::start_value_eval(p, policy.probs(), false)?
                .0
                .as_f64(),
        );
    }
    Ok(PolicyRun {
        policy,
        trace,
        failure,
    })
}

/// Outcome of scoring random memoryless policies by lambda-discrepancy.
#[derive(Debug, Clone)]
pub struct PolicySearch<F> {
    /// Highest-scoring candidate, over the base observations.
    pub policy: Policy<F>,
    /// Score of every candidate, in draw order.
    pub lambdas: Vec<f64>,
    pub best_index: usize,
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws candidates and scores each lifted candidate on `scored_on`.
fn search_on<F: Scalar>(
    scored_on: &Pomdp<F>,
    n_obs: usize,
    n_actions: usize,
    n_mem: usize,
    cfg: &OptimConfig,
) -> Result<PolicySearch<F>, OptimError> {
    let mut rng = stream(cfg.seed, POLICY_STREAM);
    let mut best: Option<(f64, usize, Policy<F>)> = None;
    let mut lambdas = Vec::with_capacity(cfg.n_random_policies);
    for i in 0..cfg.n_random_policies {
        let pi = random_policy::<F>(n_obs, n_actions, cfg.policy_init_std, &mut rng);
        let lifted = lift_policy(&pi, n_mem);
        let ld =
            lambda_discrepancy_unchecked(scored_on, lifted.probs(), &cfg.discrepancy)?.as_f64();
        lambdas.push(ld);
        if best.as_ref().is_none_or(|(b, _, _)| ld > *b) {
            best = Some((ld, i, pi));
        }
    }
    let (_, best_index, policy) = best.expect("at least one candidate");
    Ok(PolicySearch {
        policy,
        lambdas,
        best_index,
    })
}

/// Scores `cfg.n_random_policies` random memoryless policies on `p` and
/// keeps the one with the largest lambda-discrepancy.
pub fn policy_search<F: Scalar>(
    p: &Pomdp<F>,
    cfg: &OptimConfig,
) -> Result<PolicySearch<F>, OptimError> {
    cfg.validate()?;
    ensure_valid(p, &Policy::uniform(p.n_obs(), p.n_actions()))?;
    search_on(p, p.n_obs(), p.n_actions(), 1, cfg)
}

/// Result of [`optimize_with_value_improvement`].
#[derive(Debug, Clone)]
pub struct ImprovementRun<F> {
    pub n_mem: usize,
    pub seed: u64,
    pub pre_augment: bool,
    pub search: PolicySearch<F>,
    pub initial_memory: MemoryFn<F>,
    pub memory: MemoryRun<F>,
    pub policy: PolicyRun<F>,
}

/// Scalar summary of an [`ImprovementRun`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_mem: usize,
    pub seed: u64,
    pub pre_augment: bool,
    pub search_best_index: usize,
    pub search_best_lambda: f64,
    pub initial_lambda_discrepancy: f64,
    pub final_lambda_discrepancy: f64,
    pub initial_return: f64,
    pub final_return: f64,
    pub memory_failure: Option<NumericalFailure>,
    pub policy_failure: Option<NumericalFailure>,
}

impl<F: Scalar> ImprovementRun<F> {
    pub fn summary(&self) -> RunSummary {
        RunSummary {
            n_mem: self.n_mem,
            seed: self.seed,
            pre_augment: self.pre_augment,
            search_best_index: self.search.best_index,
            search_best_lambda: self.search.lambdas[self.search.best_index],
            initial_lambda_discrepancy: self.memory.initial(),
            final_lambda_discrepancy: self.memory.last(),
            initial_return: self.policy.initial(),
            final_return: self.policy.last(),
            memory_failure: self.memory.failure.clone(),
            policy_failure: self.policy.failure.clone(),
        }
    }
}

/// Policy search, memory learning against the chosen policy, then policy
/// gradient on the memory-augmented problem.
///
/// With `pre_augment`, candidates are scored on the problem already
/// augmented by the initial random memory rather than on `p` itself.
pub fn optimize_with_value_improvement<F: Scalar>(
    p: &Pomdp<F>,
    n_mem: usize,
    cfg: &OptimConfig,
    pre_augment: bool,
) -> Result<ImprovementRun<F>, OptimError> {
    if n_mem == 0 {
        return Err(OptimError::Config("memory needs at least one state".into()));
    }
    cfg.validate()?;
    require_l2(cfg.discrepancy.norm)?;
    ensure_valid(p, &Policy::uniform(p.n_obs(), p.n_actions()))?;

    let mut mem_rng = stream(cfg.seed, MEMORY_STREAM);
    let mu0 = MemoryFn::<F>::random_from(n_mem, p.n_obs(), p.n_actions(), &mut mem_rng)
        .with_seed(Some(cfg.seed));

    let search = if pre_augment {
        let scored_on =
            augment(p, &mu0).map_err(|e| OptimError::from(e).at(Stage::Augmentation))?;
        search_on(&scored_on, p.n_obs(), p.n_actions(), n_mem, cfg)
    } else {
        search_on(p, p.n_obs(), p.n_actions(), 1, cfg)
    }
    .map_err(|e| e.at(Stage::PolicySearch))?;

    let lifted = lift_policy(&search.policy, n_mem);
    let memory =
        improve_memory(p, &mu0, &lifted, cfg).map_err(|e| e.at(Stage::MemoryImprovement))?;
    let augmented =
        augment(p, &memory.memory).map_err(|e| OptimError::from(e).at(Stage::Augmentation))?;
    let policy = policy_gradient_improve(&augmented, &lifted, cfg)
        .map_err(|e| e.at(Stage::PolicyImprovement))?;
    Ok(ImprovementRun {
        n_mem,
        seed: cfg.seed,
        pre_augment,
        search,
        initial_memory: mu0,
        memory,
        policy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::envs;
    use crate::solver::lambda_discrepancy;

    fn memory_case() -> (Pomdp<f64>, MemoryFn<f64>, Policy<f64>) {
        let p = envs::tmaze::<f64>(2, 0.9).pomdp;
        let mu = MemoryFn::random(2, p.n_obs(), p.n_actions(), 3);
        let mut rng = stream(7, 0);
        let pi = envs::random_policy(p.n_obs() * 2, p.n_actions(), 0.5, &mut rng);
        (p, mu, pi)
    }

    #[test]
    fn ld_gradient_matches_finite_differences() {
        let (p, mu, pi) = memory_case();
        for norm in [NormKind::PolicyWeightedL2, NormKind::OccupancyWeightedL2] {
            let spec = DiscrepancySpec::new(0.0, 1.0, norm);
            let check = check_ld_gradient(&p, &mu, &pi, &spec, 1e-5).unwrap();
            assert!(check.checked > 0);
            assert!(check.max_rel_err < 1e-4, "{norm}: {check:?}");
        }
    }

    #[test]
    fn ld_gradient_value_matches_solver() {
        let (p, mu, pi) = memory_case();
        let spec = DiscrepancySpec::new(0.2, 0.7, NormKind::OccupancyWeightedL2);
        let r = ld_gradient(&p, &mu, &pi, &spec).unwrap();
        let direct = lambda_discrepancy(&augment(&p, &mu).unwrap(), &pi, &spec).unwrap();
        assert!((r.value - direct).abs() < 1e-12);
        assert!((r.objective - direct * direct).abs() < 1e-12);
    }

    #[test]
    fn max_norm_has_no_gradient() {
        let (p, mu, pi) = memory_case();
        let spec = DiscrepancySpec::new(0.0, 1.0, NormKind::OccupancyWeightedMax);
        assert!(matches!(
            ld_gradient(&p, &mu, &pi, &spec),
            Err(OptimError::UnsupportedNorm(_))
        ));
    }

    #[test]
    fn return_gradient_matches_finite_differences() {
        let p = envs::tiger::<f64>().pomdp;
        let mut rng = stream(11, 0);
        let pi = envs::random_policy(p.n_obs(), p.n_actions(), 0.5, &mut rng);
        let check = check_return_gradient(&p, &pi, 1e-5).unwrap();
        assert!(check.max_rel_err < 1e-4, "{check:?}");
    }

    #[test]
    fn single_memory_state_has_zero_gradient() {
        let p = envs::tiger::<f64>().pomdp;
        let mu = MemoryFn::random(1, p.n_obs(), p.n_actions(), 0);
        let pi = Policy::uniform(p.n_obs(), p.n_actions());
        let r = ld_gradient(&p, &mu, &pi, &DiscrepancySpec::default()).unwrap();
        assert!(r.grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn memory_descent_reduces_discrepancy() {
        let (p, mu, pi) = memory_case();
        let cfg = OptimConfig {
            memory_steps: 300,
            ..OptimConfig::default()
        };
        let run = improve_memory(&p, &mu, &pi, &cfg).unwrap();
        assert_eq!(run.trace.len(), 301);
        assert!(run.last() < run.initial());
        assert!(run.failure.is_none());
    }

    #[test]
    fn policy_ascent_raises_return() {
        let p = envs::tiger::<f64>().pomdp;
        let pi = Policy::from_logits(Array2::zeros((p.n_obs(), p.n_actions())));
        let cfg = OptimConfig {
            policy_steps: 300,
            ..OptimConfig::default()
        };
        let run = policy_gradient_improve(&p, &pi, &cfg).unwrap();
        assert!(run.last() > run.initial());
    }

    #[test]
    fn search_is_deterministic_and_picks_max() {
        let p = envs::tmaze::<f64>(3, 0.9).pomdp;
        let cfg = OptimConfig {
            n_random_policies: 20,
            seed: 5,
            ..OptimConfig::default()
        };
        let a = policy_search(&p, &cfg).unwrap();
        let b = policy_search(&p, &cfg).unwrap();
        assert_eq!(a.lambdas, b.lambdas);
        let max = a.lambdas.iter().copied().fold(f64::MIN, f64::max);
        assert_eq!(a.lambdas[a.best_index], max);
    }

    #[test]
    fn rejects_missing_logits_and_bad_config() {
        let (p, _, pi) = memory_case();
        let mu = MemoryFn::identity(p.n_obs(), p.n_actions(), 2);
        assert!(matches!(
            improve_memory(&p, &mu, &pi, &OptimConfig::default()),
            Err(OptimError::MissingLogits)
        ));
        let cfg = OptimConfig {
            step_size: f64::NAN,
            ..OptimConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(OptimError::Config(_))));
    }
}
