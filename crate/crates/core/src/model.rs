//! Dense tensor types for POMDPs and observation policies.
//!
//! Index conventions used everywhere in the crate:
//! `transitions[[s, a, s']] = T(s' | s, a)`, `phi[[s, o]] = Pr(o | s)`,
//! `rewards[[s, a]] = R(s, a)`, `policy.probs()[[o, a]] = pi(a | o)`.

use std::fmt;

use ndarray::{Array1, Array2, Array3, Axis};
use serde::Serialize;
use thiserror::Error;

use crate::scalar::{softmax_into, Scalar};
use crate::solver::{self, SolverError};

/// Tolerance constants used by validation and by derived-quantity checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Row-sum slack for user-supplied stochastic tensors.
    pub construction: f64,
    /// Row-sum slack for quantities computed by the solver (W, effective MDP).
    pub derived: f64,
    /// Observations whose share of the discounted occupancy falls below this
    /// are treated as unreachable.
    pub unreachable: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            construction: 1e-12,
            derived: 1e-9,
            unreachable: 1e-14,
        }
    }
}

impl Tolerances {
    /// Defaults, widened when the scalar type cannot resolve them.
    pub fn for_scalar<F: Scalar>() -> Self {
        let floor = F::tolerance_floor();
        let d = Self::default();
        Self {
            construction: d.construction.max(floor),
            derived: d.derived.max(floor),
            unreachable: d.unreachable.max(F::epsilon().as_f64()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("policy row {row} is not a probability distribution (sum {sum})")]
    PolicyRow { row: usize, sum: f64 },
    #[error("action index {action} out of range for {n_actions} actions")]
    ActionIndex { action: usize, n_actions: usize },
}

/// A finite POMDP as dense tensors.
///
/// Construction only checks shapes; numerical invariants are checked by
/// [`validate`], so malformed models can still be loaded and reported on.
#[derive(Debug, Clone, PartialEq)]
pub struct Pomdp<F> {
    transitions: Array3<F>,
    rewards: Array2<F>,
    phi: Array2<F>,
    p0: Array1<F>,
    gamma: F,
    terminal: Vec<bool>,
}

impl<F: Scalar> Pomdp<F> {
    pub fn new(
        transitions: Array3<F>,
        rewards: Array2<F>,
        phi: Array2<F>,
        p0: Array1<F>,
        gamma: F,
        terminal: Vec<bool>,
    ) -> Result<Self, ModelError> {
        let (s, a, s2) = transitions.dim();
        if s != s2 {
            return Err(ModelError::Dimension(format!(
                "transition tensor is {s}x{a}x{s2}, expected SxAxS"
            )));
        }
        if rewards.dim() != (s, a) {
            return Err(ModelError::Dimension(format!(
                "reward matrix is {:?}, expected ({s}, {a})",
                rewards.dim()
            )));
        }
        if phi.nrows() != s || phi.ncols() == 0 {
            return Err(ModelError::Dimension(format!(
                "observation matrix is {:?}, expected ({s}, n_obs > 0)",
                phi.dim()
            )));
        }
        if p0.len() != s {
            return Err(ModelError::Dimension(format!(
                "start distribution has length {}, expected {s}",
                p0.len()
            )));
        }
        if terminal.len() != s {
            return Err(ModelError::Dimension(format!(
                "terminal flags have length {}, expected {s}",
                terminal.len()
            )));
        }
        if s == 0 || a == 0 {
            return Err(ModelError::Dimension("empty state or action set".into()));
        }
        Ok(Self {
            transitions,
            rewards,
            phi,
            p0,
            gamma,
            terminal,
        })
    }

    pub fn n_states(&self) -> usize {
        self.transitions.dim().0
    }

    pub fn n_actions(&self) -> usize {
        self.transitions.dim().1
    }

    pub fn n_obs(&self) -> usize {
        self.phi.ncols()
    }

    pub fn transitions(&self) -> &Array3<F> {
        &self.transitions
    }

    pub fn rewards(&self) -> &Array2<F> {
        &self.rewards
    }

    pub fn phi(&self) -> &Array2<F> {
        &self.phi
    }

    pub fn p0(&self) -> &Array1<F> {
        &self.p0
    }

    pub fn gamma(&self) -> F {
        self.gamma
    }

    pub fn terminal(&self) -> &[bool] {
        &self.terminal
    }

    /// Transition tensor with every outgoing row of a terminal state zeroed,
    /// which is what all solves use.
    pub fn solve_transitions(&self) -> Array3<F> {
        let mut t = self.transitions.clone();
        for (s, &term) in self.terminal.iter().enumerate() {
            if term {
                t.index_axis_mut(Axis(0), s).fill(F::zero());
            }
        }
        t
    }

    pub fn with_phi(&self, phi: Array2<F>) -> Result<Self, ModelError> {
        Self::new(
            self.transitions.clone(),
            self.rewards.clone(),
            phi,
            self.p0.clone(),
            self.gamma,
            self.terminal.clone(),
        )
    }

    pub fn with_gamma(&self, gamma: F) -> Self {
        Self {
            gamma,
            ..self.clone()
        }
    }

    pub fn with_p0(&self, p0: Array1<F>) -> Result<Self, ModelError> {
        Self::new(
            self.transitions.clone(),
            self.rewards.clone(),
            self.phi.clone(),
            p0,
            self.gamma,
            self.terminal.clone(),
        )
    }

    pub fn validate(&self) -> ValidationReport {
        validate_with(self, &Tolerances::for_scalar::<F>())
    }

    /// Converts every entry to another scalar type.
    pub fn cast<G: Scalar>(&self) -> Pomdp<G> {
        let c = |v: &F| G::lit(v.as_f64());
        Pomdp {
            transitions: self.transitions.map(c),
            rewards: self.rewards.map(c),
            phi: self.phi.map(c),
            p0: self.p0.map(c),
            gamma: G::lit(self.gamma.as_f64()),
            terminal: self.terminal.clone(),
        }
    }
}

/// Named invariant checked by [`validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    FiniteEntries,
    TransitionsNonnegative,
    TransitionRowSums,
    ObservationsNonnegative,
    ObservationRowSums,
    StartDistribution,
    TerminalRewardsZero,
    DiscountRange,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Check::FiniteEntries => "finite entries",
            Check::TransitionsNonnegative => "T entries nonnegative",
            Check::TransitionRowSums => "T(.|s,a) sums to 1",
            Check::ObservationsNonnegative => "Phi entries nonnegative",
            Check::ObservationRowSums => "Phi(.|s) sums to 1",
            Check::StartDistribution => "p0 is a distribution",
            Check::TerminalRewardsZero => "terminal rewards are zero",
            Check::DiscountRange => "gamma in [0, 1]",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: Check,
    pub passed: bool,
    /// Index of the first offending slice or entry.
    pub index: Option<Vec<usize>>,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, check: Check) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.check == check)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = if c.passed { "ok  " } else { "FAIL" };
            write!(f, "[{status}] {}", c.check)?;
            if let Some(idx) = &c.index {
                write!(f, " at {idx:?}")?;
            }
            if let Some(d) = &c.detail {
                write!(f, ": {d}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub fn validate<F: Scalar>(p: &Pomdp<F>) -> ValidationReport {
    p.validate()
}

pub fn validate_with<F: Scalar>(p: &Pomdp<F>, tol: &Tolerances) -> ValidationReport {
    let mut checks = Vec::with_capacity(8);
    let mut push = |check, found: Option<(Vec<usize>, String)>| {
        let passed = found.is_none();
        let (index, detail) = match found {
            Some((i, d)) => (Some(i), Some(d)),
            None => (None, None),
        };
        checks.push(CheckResult {
            check,
            passed,
            index,
            detail,
        });
    };

    let non_finite = p
        .transitions
        .indexed_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|((s, a, s2), _)| (vec![s, a, s2], "T entry is not finite".to_string()))
        .or_else(|| {
            p.rewards
                .indexed_iter()
                .find(|(_, v)| !v.is_finite())
                .map(|((s, a), _)| (vec![s, a], "R entry is not finite".to_string()))
        })
        .or_else(|| {
            p.phi
                .indexed_iter()
                .find(|(_, v)| !v.is_finite())
                .map(|((s, o), _)| (vec![s, o], "Phi entry is not finite".to_string()))
        });
    push(Check::FiniteEntries, non_finite);

    let neg_t = p
        .transitions
        .indexed_iter()
        .find(|(_, &v)| v < F::zero())
        .map(|((s, a, s2), v)| (vec![s, a, s2], format!("T[{s},{a},{s2}] = {v}")));
    push(Check::TransitionsNonnegative, neg_t);

    let mut bad_row = None;
    'outer: for s in 0..p.n_states() {
        for a in 0..p.n_actions() {
            let sum: F = p.transitions.slice(ndarray::s![s, a, ..]).sum();
            if (sum.as_f64() - 1.0).abs() > tol.construction || !sum.is_finite() {
                bad_row = Some((vec![s, a], format!("slice ({s},{a}) sums to {sum}")));
                break 'outer;
            }
        }
    }
    push(Check::TransitionRowSums, bad_row);

    let neg_phi = p
        .phi
        .indexed_iter()
        .find(|(_, &v)| v < F::zero())
        .map(|((s, o), v)| (vec![s, o], format!("Phi[{s},{o}] = {v}")));
    push(Check::ObservationsNonnegative, neg_phi);

    let bad_phi = p.phi.outer_iter().enumerate().find_map(|(s, row)| {
        let sum: F = row.sum();
        ((sum.as_f64() - 1.0).abs() > tol.construction || !sum.is_finite())
            .then(|| (vec![s], format!("row {s} sums to {sum}")))
    });
    push(Check::ObservationRowSums, bad_phi);

    let p0_sum: F = p.p0.sum();
    let bad_p0 =
        p.p0.iter()
            .position(|&v| v < F::zero())
            .map(|s| (vec![s], format!("p0[{s}] = {}", p.p0[s])))
            .or_else(|| {
                ((p0_sum.as_f64() - 1.0).abs() > tol.construction)
                    .then(|| (vec![], format!("p0 sums to {p0_sum}")))
            });
    push(Check::StartDistribution, bad_p0);

    let mut bad_term = None;
    'term: for (s, &term) in p.terminal.iter().enumerate() {
        if term {
            for a in 0..p.n_actions() {
                if p.rewards[[s, a]] != F::zero() {
                    bad_term = Some((
                        vec![s, a],
                        format!("terminal state {s} has reward {}", p.rewards[[s, a]]),
                    ));
                    break 'term;
                }
            }
        }
    }
    push(Check::TerminalRewardsZero, bad_term);

    let g = p.gamma.as_f64();
    let bad_gamma = (!(0.0..=1.0).contains(&g)).then(|| (vec![], format!("gamma = {g}")));
    push(Check::DiscountRange, bad_gamma);

    ValidationReport { checks }
}

/// Stochastic observation policy, optionally carrying the logits it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy<F> {
    probs: Array2<F>,
    logits: Option<Array2<F>>,
}

impl<F: Scalar> Policy<F> {
    pub fn from_probs(probs: Array2<F>) -> Result<Self, ModelError> {
        let tol = Tolerances::for_scalar::<F>().construction;
        for (row, r) in probs.outer_iter().enumerate() {
            let sum: F = r.sum();
            if r.iter().any(|&v| v < F::zero() || !v.is_finite())
                || (sum.as_f64() - 1.0).abs() > tol
            {
                return Err(ModelError::PolicyRow {
                    row,
                    sum: sum.as_f64(),
                });
            }
        }
        Ok(Self {
            probs,
            logits: None,
        })
    }

    /// Row-wise softmax of `logits`.
    pub fn from_logits(logits: Array2<F>) -> Self {
        let mut probs = Array2::zeros(logits.dim());
        for (lrow, mut prow) in logits.outer_iter().zip(probs.outer_iter_mut()) {
            let l = lrow.to_vec();
            let mut out = vec![F::zero(); l.len()];
            softmax_into(&l, &mut out);
            prow.assign(&Array1::from(out));
        }
        Self {
            probs,
            logits: Some(logits),
        }
    }

    pub fn uniform(n_obs: usize, n_actions: usize) -> Self {
        Self {
            probs: Array2::from_elem((n_obs, n_actions), F::one() / F::lit(n_actions as f64)),
            logits: None,
        }
    }

    /// One action per observation with probability one.
    pub fn deterministic(actions: &[usize], n_actions: usize) -> Result<Self, ModelError> {
        let mut probs = Array2::zeros((actions.len(), n_actions));
        for (o, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(ModelError::ActionIndex {
                    action: a,
                    n_actions,
                });
            }
            probs[[o, a]] = F::one();
        }
        Ok(Self {
            probs,
            logits: None,
        })
    }

    pub fn probs(&self) -> &Array2<F> {
        &self.probs
    }

    pub fn logits(&self) -> Option<&Array2<F>> {
        self.logits.as_ref()
    }

    pub fn n_obs(&self) -> usize {
        self.probs.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.probs.ncols()
    }

    pub fn check_dims(&self, p: &Pomdp<F>) -> Result<(), ModelError> {
        if self.n_obs() != p.n_obs() || self.n_actions() != p.n_actions() {
            return Err(ModelError::Dimension(format!(
                "policy is {}x{}, POMDP has {} observations and {} actions",
                self.n_obs(),
                self.n_actions(),
                p.n_obs(),
                p.n_actions()
            )));
        }
        Ok(())
    }
}

/// `(Phi pi)[s, a] = sum_o Phi[s, o] pi[o, a]`: the action distribution each
/// hidden state induces through its observations.
pub fn state_policy<F: Scalar>(phi: &Array2<F>, probs: &Array2<F>) -> Array2<F> {
    phi.dot(probs)
}

/// Policy-derived tensors of the closed-form TD(lambda) expression.
#[derive(Debug, Clone)]
pub struct PolicyTensors<F> {
    /// `Omega x Omega x A`, diagonal in the first two indices.
    pub pi: Array3<F>,
    /// `S x S x A`, the MC policy spread.
    pub pi_s: Array3<F>,
    /// `Omega x S`, rows are `Pr(s | o)`.
    pub w: Array2<F>,
    /// `Omega x S x A`, `W[o, s] * pi[o, a]`.
    pub w_pi: Array3<F>,
    /// Discounted, unnormalized observation occupancy.
    pub obs_occupancy: Array1<F>,
    /// Observations with (numerically) zero occupancy; their `W` rows are uniform.
    pub unreachable: Vec<bool>,
}

impl<F: Scalar> PolicyTensors<F> {
    /// TD policy spread `(Phi W^Pi)[s, s', a]`.
    pub fn td_spread(&self, phi: &Array2<F>) -> Array3<F> {
        let (n_obs, n_states, n_actions) = self.w_pi.dim();
        let flat = self
            .w_pi
            .view()
            .into_shape_with_order((n_obs, n_states * n_actions))
            .expect("contiguous");
        phi.dot(&flat)
            .into_shape_with_order((phi.nrows(), n_states, n_actions))
            .expect("shape")
    }
}

pub fn policy_tensors<F: Scalar>(
    p: &Pomdp<F>,
    pi: &Policy<F>,
) -> Result<PolicyTensors<F>, SolverError> {
    let sw = solver::stationary_weights(p, pi)?;
    let (n_states, n_obs, n_actions) = (p.n_states(), p.n_obs(), p.n_actions());
    let probs = pi.probs();

    let mut pi_t = Array3::zeros((n_obs, n_obs, n_actions));
    for o in 0..n_obs {
        for a in 0..n_actions {
            pi_t[[o, o, a]] = probs[[o, a]];
        }
    }
    let phi_pi = state_policy(p.phi(), probs);
    let mut pi_s = Array3::zeros((n_states, n_states, n_actions));
    for s in 0..n_states {
        for a in 0..n_actions {
            pi_s[[s, s, a]] = phi_pi[[s, a]];
        }
    }
    let mut w_pi = Array3::zeros((n_obs, n_states, n_actions));
    for o in 0..n_obs {
        for s in 0..n_states {
            for a in 0..n_actions {
                w_pi[[o, s, a]] = sw.w[[o, s]] * probs[[o, a]];
            }
        }
    }
    Ok(PolicyTensors {
        pi: pi_t,
        pi_s,
        w: sw.w,
        w_pi,
        obs_occupancy: sw.obs_occupancy,
        unreachable: sw.unreachable,
    })
}
