//! Closed-form TD(lambda) fixed points over observations.
//!
//! For an observation policy `pi` the lambda-blended policy spread is
//! `K = lambda * PiS + (1 - lambda) * Phi W^Pi`, and the state-action value
//! table `B` solves `(I - gamma T K) B = R` after flattening `(s, a)` pairs
//! action-fastest (`s * A + a`). Observation values are `Q = W B`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Array3, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, Lu};
use crate::model::{state_policy, ModelError, Policy, Pomdp, Tolerances, ValidationReport};
use crate::scalar::Scalar;

/// Condition estimates above this are flagged on the returned table.
pub const ILL_CONDITIONED: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("POMDP failed validation: {}", first_failure(.0))]
    Invalid(Box<ValidationReport>),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("occupancy system is singular at gamma = 1: some policy mass never reaches a terminal state")]
    NonEpisodic,
    #[error("TD(lambda) system is singular (pivot {pivot:e} at column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("lambda must lie in [0, 1], got {0}")]
    LambdaRange(f64),
    #[error(transparent)]
    Linalg(LinalgError),
}

fn first_failure(r: &ValidationReport) -> String {
    r.failures()
        .next()
        .map(|c| match &c.detail {
            Some(d) => format!("{}: {d}", c.check),
            None => c.check.to_string(),
        })
        .unwrap_or_default()
}

/// How the difference between two Q tables is reduced to a number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// `sqrt(sum pi(a|o) d(o,a)^2)`.
    #[default]
    PolicyWeightedL2,
    /// `sqrt(sum Pr(o) pi(a|o) d(o,a)^2)` with `Pr(o)` the normalized
    /// discounted observation occupancy.
    OccupancyWeightedL2,
    /// `max |d(o,a)|` over pairs with `Pr(o) pi(a|o) > 0`.
    OccupancyWeightedMax,
}

impl NormKind {
    pub const ALL: [NormKind; 3] = [
        NormKind::PolicyWeightedL2,
        NormKind::OccupancyWeightedL2,
        NormKind::OccupancyWeightedMax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NormKind::PolicyWeightedL2 => "policy_weighted_l2",
            NormKind::OccupancyWeightedL2 => "occupancy_weighted_l2",
            NormKind::OccupancyWeightedMax => "occupancy_weighted_max",
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NormKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        NormKind::ALL
            .into_iter()
            .find(|n| n.name() == key)
            .ok_or_else(|| {
                format!(
                    "unknown norm '{s}' (expected one of policy_weighted_l2, occupancy_weighted_l2, occupancy_weighted_max)"
                )
            })
    }
}

/// Pair of lambdas and the norm used to compare their fixed points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancySpec {
    pub lambda1: f64,
    pub lambda2: f64,
    pub norm: NormKind,
}

impl Default for DiscrepancySpec {
    fn default() -> Self {
        Self {
            lambda1: 0.0,
            lambda2: 1.0,
            norm: NormKind::PolicyWeightedL2,
        }
    }
}

impl DiscrepancySpec {
    pub fn new(lambda1: f64, lambda2: f64, norm: NormKind) -> Self {
        Self {
            lambda1,
            lambda2,
            norm,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QTable<F> {
    /// `n_obs x n_actions`.
    pub values: Array2<F>,
    pub lambda: f64,
    /// 1-norm condition estimate of the flattened `I - gamma T K` system.
    pub condition_estimate: f64,
}

impl<F> QTable<F> {
    pub fn ill_conditioned(&self) -> bool {
        self.condition_estimate > ILL_CONDITIONED
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VTable<F> {
    pub values: Array1<F>,
    pub lambda: f64,
    /// Max gap between `sum_a pi Q` and the `W^Pi` contraction of the
    /// state-action table. Both compute the same quantity.
    pub crosscheck_residual: f64,
}

/// Observation-level MDP obtained by blending hidden states with `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveMdp<F> {
    /// `n_obs x n_actions x n_obs`.
    pub transitions: Array3<F>,
    pub rewards: Array2<F>,
    pub reachable: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct StationaryWeights<F> {
    /// `n_obs x n_states`, rows `Pr(s | o)`.
    pub w: Array2<F>,
    /// Discounted state occupancy.
    pub c: Array1<F>,
    pub obs_occupancy: Array1<F>,
    pub unreachable: Vec<bool>,
}

impl<F: Scalar> StationaryWeights<F> {
    /// Observation occupancy normalized to a distribution.
    pub fn obs_distribution(&self) -> Array1<F> {
        let total: F = self.obs_occupancy.sum();
        if total > F::zero() {
            self.obs_occupancy.mapv(|v| v / total)
        } else {
            Array1::zeros(self.obs_occupancy.len())
        }
    }
}

pub(crate) fn ensure_valid<F: Scalar>(p: &Pomdp<F>, pi: &Policy<F>) -> Result<(), SolverError> {
    let report = p.validate();
    if !report.passed() {
        return Err(SolverError::Invalid(Box::new(report)));
    }
    pi.check_dims(p)?;
    Ok(())
}

pub(crate) fn check_lambda(lambda: f64) -> Result<(), SolverError> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(SolverError::LambdaRange(lambda))
    }
}

/// `P[s, s'] = sum_a (Phi pi)[s, a] T[s, a, s']` for the terminal-zeroed `T`.
pub(crate) fn state_transition<F: Scalar>(t0: &Array3<F>, phi_pi: &Array2<F>) -> Array2<F> {
    let (n_states, n_actions, _) = t0.dim();
    let mut p = Array2::zeros((n_states, n_states));
    for s in 0..n_states {
        for a in 0..n_actions {
            let w = phi_pi[[s, a]];
            if w != F::zero() {
                p.row_mut(s).scaled_add(w, &t0.slice(ndarray::s![s, a, ..]));
            }
        }
    }
    p
}

/// Factorization of `I - gamma P` and the occupancy `c` solving
/// `(I - gamma P)^T c = p0`.
pub(crate) fn occupancy<F: Scalar>(
    p0: &Array1<F>,
    gamma: F,
    p_state: &Array2<F>,
) -> Result<(Array1<F>, Lu<F>), SolverError> {
    let n = p0.len();
    let a = Array2::eye(n) - p_state * gamma;
    let lu = Lu::factor(a).map_err(|e| match e {
        LinalgError::Singular { .. } => SolverError::NonEpisodic,
        other => SolverError::Linalg(other),
    })?;
    let c = lu.solve_transpose(p0.view()).map_err(SolverError::Linalg)?;
    if c.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonEpisodic);
    }
    Ok((c, lu))
}

pub(crate) fn weights_from_occupancy<F: Scalar>(
    phi: &Array2<F>,
    c: &Array1<F>,
    unreachable_tol: f64,
) -> (Array2<F>, Array1<F>, Vec<bool>) {
    let (n_states, n_obs) = phi.dim();
    // Clamp tiny negative roundoff from the solve.
    let c_pos = c.mapv(|v| v.max(F::zero()));
    let occ = phi.t().dot(&c_pos);
    let total: F = occ.sum();
    let mut w = Array2::zeros((n_obs, n_states));
    let mut unreachable = vec![false; n_obs];
    for o in 0..n_obs {
        if total <= F::zero() || (occ[o] / total).as_f64() < unreachable_tol {
            unreachable[o] = true;
            w.row_mut(o).fill(F::one() / F::lit(n_states as f64));
            continue;
        }
        for s in 0..n_states {
            w[[o, s]] = phi[[s, o]] * c_pos[s] / occ[o];
        }
    }
    (w, occ, unreachable)
}

/// Occupancy-derived state weights `W[o, s] = Pr(s | o)`.
pub fn stationary_weights<F: Scalar>(
    p: &Pomdp<F>,
    pi: &Policy<F>,
) -> Result<StationaryWeights<F>, SolverError> {
    ensure_valid(p, pi)?;
    stationary_weights_unchecked(p, pi.probs())
}

pub(crate) fn stationary_weights_unchecked<F: Scalar>(
    p: &Pomdp<F>,
    probs: &Array2<F>,
) -> Result<StationaryWeights<F>, SolverError> {
    let t0 = p.solve_transitions();
    let phi_pi = state_policy(p.phi(), probs);
    let p_state = state_transition(&t0, &phi_pi);
    let (c, _) = occupancy(p.p0(), p.gamma(), &p_state)?;
    let tol = Tolerances::for_scalar::<F>();
    let (w, obs_occupancy, unreachable) = weights_from_occupancy(p.phi(), &c, tol.unreachable);
    Ok(StationaryWeights {
        w,
        c,
        obs_occupancy,
        unreachable,
    })
}

/// `K[s, s', a] = lambda 1[s = s'] (Phi pi)[s, a] + (1 - lambda) sum_o Phi[s, o] W[o, s'] pi[o, a]`.
pub(crate) fn blended_spread<F: Scalar>(
    phi: &Array2<F>,
    probs: &Array2<F>,
    w: &Array2<F>,
    lambda: F,
) -> Array3<F> {
    let (n_states, n_obs) = phi.dim();
    let n_actions = probs.ncols();
    let one_minus = F::one() - lambda;
    let mut k = Array3::zeros((n_states, n_states, n_actions));
    if one_minus != F::zero() {
        for s in 0..n_states {
            for o in 0..n_obs {
                let f = phi[[s, o]] * one_minus;
                if f == F::zero() {
                    continue;
                }
                for s2 in 0..n_states {
                    let fw = f * w[[o, s2]];
                    if fw == F::zero() {
                        continue;
                    }
                    for a in 0..n_actions {
                        k[[s, s2, a]] += fw * probs[[o, a]];
                    }
                }
            }
        }
    }
    if lambda != F::zero() {
        let phi_pi = state_policy(phi, probs);
        for s in 0..n_states {
            for a in 0..n_actions {
                k[[s, s, a]] += lambda * phi_pi[[s, a]];
            }
        }
    }
    k
}

/// State-action fixed point `B` of the flattened `(I - gamma T K) B = R`
/// system along with the condition estimate of its matrix.
pub(crate) fn state_action_values<F: Scalar>(
    t0: &Array3<F>,
    rewards: &Array2<F>,
    k: &Array3<F>,
    gamma: F,
) -> Result<(Array2<F>, f64), SolverError> {
    let (n_states, n_actions, _) = t0.dim();
    let n = n_states * n_actions;
    let flat_t = t0
        .view()
        .into_shape_with_order((n, n_states))
        .expect("contiguous T");
    let flat_k = k
        .view()
        .into_shape_with_order((n_states, n))
        .expect("contiguous K");
    let tk = flat_t.dot(&flat_k);
    let a = Array2::eye(n) - tk * gamma;
    let lu = Lu::factor(a).map_err(|e| match e {
        LinalgError::Singular { column, pivot } => SolverError::Singular { column, pivot },
        other => SolverError::Linalg(other),
    })?;
    let rhs = rewards
        .view()
        .into_shape_with_order(n)
        .expect("contiguous R")
        .to_owned();
    let b = lu.solve(rhs.view()).map_err(SolverError::Linalg)?;
    let cond = lu.condition_estimate().as_f64();
    Ok((
        b.into_shape_with_order((n_states, n_actions))
            .expect("shape"),
        cond,
    ))
}

/// TD(lambda) fixed point over observation-action pairs.
pub fn q_lambda<F: Scalar>(
    p: &Pomdp<F>,
    pi: &Policy<F>,
    lambda: f64,
) -> Result<QTable<F>, SolverError> {
    ensure_valid(p, pi)?;
    check_lambda(lambda)?;
    let sw = stationary_weights_unchecked(p, pi.probs())?;
    let (b, cond) = state_action_table(p, pi.probs(), &sw.w, lambda)?;
    Ok(QTable {
        values: sw.w.dot(&b),
        lambda,
        condition_estimate: cond,
    })
}

fn state_action_table<F: Scalar>(
    p: &Pomdp<F>,
    probs: &Array2<F>,
    w: &Array2<F>,
    lambda: f64,
) -> Result<(Array2<F>, f64), SolverError> {
    let t0 = p.solve_transitions();
    let k = blended_spread(p.phi(), probs, w, F::lit(lambda));
    state_action_values(&t0, p.rewards(), &k, p.gamma())
}

pub fn v_lambda<F: Scalar>(
    p: &Pomdp<F>,
    pi: &Policy<F>,
    lambda: f64,
) -> Result<VTable<F>, SolverError> {
    ensure_valid(p, pi)?;
    check_lambda(lambda)?;
    let sw = stationary_weights_unchecked(p, pi.probs())?;
    let (b, _) = state_action_table(p, pi.probs(), &sw.w, lambda)?;
    let q = sw.w.dot(&b);
    let probs = pi.probs();
    let values: Array1<F> = (&q * probs).sum_axis(Axis(1));

    let (n_obs, n_states, n_actions) = (p.n_obs(), p.n_states(), p.n_actions());
    let mut residual = 0.0f64;
    for o in 0..n_obs {
        let mut v = F::zero();
        for s in 0..n_states {
            for a in 0..n_actions {
                v += sw.w[[o, s]] * probs[[o, a]] * b[[s, a]];
            }
        }
        residual = residual.max((v - values[o]).abs().as_f64());
    }
    Ok(VTable {
        values,
        lambda,
        crosscheck_residual: residual,
    })
}

pub fn effective_mdp<F: Scalar>(
    p: &Pomdp<F>,
    pi: &Policy<F>,
) -> Result<EffectiveMdp<F>, SolverError> {
    ensure_valid(p, pi)?;
    let sw = stationary_weights_unchecked(p, pi.probs())?;
    let t0 = p.solve_transitions();
    let (n_states, n_actions, n_obs) = (p.n_states(), p.n_actions(), p.n_obs());
    let next_obs = t0
        .view()
        .into_shape_with_order((n_states * n_actions, n_states))
        .expect("contiguous T")
        .dot(p.phi())
        .into_shape_with_order((n_states, n_actions * n_obs))
        .expect("shape");
    let transitions =
        sw.w.dot(&next_obs)
            .into_shape_with_order((n_obs, n_actions, n_obs))
            .expect("shape");
    Ok(EffectiveMdp {
        transitions,
        rewards: sw.w.dot(p.rewards()),
        reachable: sw.unreachable.iter().map(|u| !u).collect(),
    })
}

impl<F: Scalar> EffectiveMdp<F> {
    /// Policy evaluation by TD(0)'s fixed point on this MDP:
    /// `Q = R + gamma T_obs pi Q`.
    pub fn evaluate(&self, pi: &Policy<F>, gamma: F) -> Result<Array2<F>, SolverError> {
        let (n_obs, n_actions, _) = self.transitions.dim();
        let probs = pi.probs();
        let n = n_obs * n_actions;
        let mut a = Array2::eye(n);
        for o in 0..n_obs {
            for act in 0..n_actions {
                let row = o * n_actions + act;
                for o2 in 0..n_obs {
                    let t = self.transitions[[o, act, o2]];
                    if t == F::zero() {
                        continue;
                    }
                    for a2 in 0..n_actions {
                        a[[row, o2 * n_actions + a2]] -= gamma * t * probs[[o2, a2]];
                    }
                }
            }
        }
        let lu = Lu::factor(a).map_err(|e| match e {
            LinalgError::Singular { column, pivot } => SolverError::Singular { column, pivot },
            other => SolverError::Linalg(other),
        })?;
        let rhs = self
            .rewards
            .view()
            .into_shape_with_order(n)
            .expect("contiguous")
            .to_owned();
        let q = lu.solve(rhs.view()).map_err(SolverError::Linalg)?;
        Ok(q.into_shape_with_order((n_obs, n_actions)).expect("shape"))
    }
}

/// Normalized observation weights used by the occupancy norms.
pub(crate) fn occupancy_distribution<F: Scalar>(
    occ: &Array1<F>,
    unreachable: &[bool],
) -> Array1<F> {
    let mut d = occ.clone();
    for (v, &u) in d.iter_mut().zip(unreachable) {
        if u {
            *v = F::zero();
        }
    }
    let total: F = d.sum();
    if total > F::zero() {
        d.mapv_inplace(|v| v / total);
    }
    d
}

/// Norm of `q1 - q2` given the policy and the normalized observation
/// distribution. The policy-weighted norm only uses the distribution to skip
/// observations with zero mass.
pub fn discrepancy_between<F: Scalar>(
    q1: &Array2<F>,
    q2: &Array2<F>,
    probs: &Array2<F>,
    obs_dist: &Array1<F>,
    norm: NormKind,
) -> F {
    let (n_obs, n_actions) = q1.dim();
    match norm {
        NormKind::PolicyWeightedL2 | NormKind::OccupancyWeightedL2 => {
            let mut acc = F::zero();
            for o in 0..n_obs {
                // Unreachable observations (zero mass) never contribute.
                let wo = match norm {
                    NormKind::PolicyWeightedL2 if obs_dist[o] > F::zero() => F::one(),
                    NormKind::PolicyWeightedL2 => F::zero(),
                    _ => obs_dist[o],
                };
                for a in 0..n_actions {
                    let d = q1[[o, a]] - q2[[o, a]];
                    acc += wo * probs[[o, a]] * d * d;
                }
            }
            acc.sqrt()
        }
        NormKind::OccupancyWeightedMax => {
            let mut m = F::zero();
            for o in 0..n_obs {
                for a in 0..n_actions {
                    if obs_dist[o] * probs[[o, a]] > F::zero() {
                        m = m.max((q1[[o, a]] - q2[[o, a]]).abs());
                    }
                }
            }
            m
        }
    }
}

/// Lambda-discrepancy of `pi` on `p`.
pub fn lambda_discrepancy<F: Scalar>(
    p: &Pomdp<F>,
    pi: &Policy<F>,
    spec: &DiscrepancySpec,
) -> Result<F, SolverError> {
    ensure_valid(p, pi)?;
    check_lambda(spec.lambda1)?;
    check_lambda(spec.lambda2)?;
    lambda_discrepancy_unchecked(p, pi.probs(), spec)
}

pub(crate) fn lambda_discrepancy_unchecked<F: Scalar>(
    p: &Pomdp<F>,
    probs: &Array2<F>,
    spec: &DiscrepancySpec,
) -> Result<F, SolverError> {
    let sw = stationary_weights_unchecked(p, probs)?;
    let (b1, _) = state_action_table(p, probs, &sw.w, spec.lambda1)?;
    let (b2, _) = if spec.lambda1 == spec.lambda2 {
        (b1.clone(), 0.0)
    } else {
        state_action_table(p, probs, &sw.w, spec.lambda2)?
    };
    let dist = occupancy_distribution(&sw.obs_occupancy, &sw.unreachable);
    Ok(discrepancy_between(
        &sw.w.dot(&b1),
        &sw.w.dot(&b2),
        probs,
        &dist,
        spec.norm,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::envs;
    use ndarray::array;

    fn chain() -> Pomdp<f64> {
        // 0 -> 1 -> 2 (terminal); rewards 1 then 2; states 0 and 1 aliased.
        let mut t = Array3::zeros((3, 2, 3));
        for a in 0..2 {
            t[[0, a, 1]] = 1.0;
            t[[1, a, 2]] = 1.0;
            t[[2, a, 2]] = 1.0;
        }
        Pomdp::new(
            t,
            array![[1.0, 0.0], [2.0, 0.0], [0.0, 0.0]],
            array![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            array![1.0, 0.0, 0.0],
            0.5,
            vec![false, false, true],
        )
        .unwrap()
    }

    #[test]
    fn gamma_zero_occupancy_is_start_distribution() {
        let p = chain().with_gamma(0.0);
        let sw = stationary_weights(&p, &Policy::uniform(2, 2)).unwrap();
        assert_eq!(sw.c, array![1.0, 0.0, 0.0]);
    }

    #[test]
    fn chain_weights_follow_discounted_visits() {
        let p = chain();
        let sw = stationary_weights(&p, &Policy::uniform(2, 2)).unwrap();
        // c = [1, 0.5, 0.25]; observation 0 covers states 0 and 1.
        assert!((sw.w[[0, 0]] - 1.0 / 1.5).abs() < 1e-14);
        assert!((sw.w[[0, 1]] - 0.5 / 1.5).abs() < 1e-14);
        assert!((sw.w[[1, 2]] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn chain_mc_and_td_values_by_hand() {
        let p = chain();
        let pi = Policy::deterministic(&[0, 0], 2).unwrap();
        let q1 = q_lambda(&p, &pi, 1.0).unwrap();
        // MC: state 0 returns 1 + 0.5*2 = 2, state 1 returns 2; weights 2/3, 1/3.
        assert!((q1.values[[0, 0]] - (2.0 * 2.0 / 3.0 + 2.0 / 3.0)).abs() < 1e-12);
        let q0 = q_lambda(&p, &pi, 0.0).unwrap();
        // TD: Q(o,0) = Rbar + gamma Pr(o -> o) Q(o,0) with Rbar = 4/3 and
        // self-transition probability 2/3.
        let expected = (4.0 / 3.0) / (1.0 - 0.5 * 2.0 / 3.0);
        assert!((q0.values[[0, 0]] - expected).abs() < 1e-12);
    }

    #[test]
    fn equal_lambdas_give_zero_discrepancy() {
        let p = chain();
        let spec = DiscrepancySpec::new(0.5, 0.5, NormKind::OccupancyWeightedL2);
        assert_eq!(
            lambda_discrepancy(&p, &Policy::uniform(2, 2), &spec).unwrap(),
            0.0
        );
    }

    #[test]
    fn norm_names_round_trip() {
        for n in NormKind::ALL {
            assert_eq!(n.name().parse::<NormKind>().unwrap(), n);
        }
        assert!("l3".parse::<NormKind>().is_err());
    }

    #[test]
    fn invalid_pomdp_is_rejected() {
        let mut t = Array3::zeros((1, 1, 1));
        t[[0, 0, 0]] = 0.5;
        let p = Pomdp::new(
            t,
            array![[0.0]],
            array![[1.0]],
            array![1.0],
            0.5,
            vec![false],
        )
        .unwrap();
        assert!(matches!(
            q_lambda(&p, &Policy::uniform(1, 1), 0.0),
            Err(SolverError::Invalid(_))
        ));
    }

    #[test]
    fn non_terminating_gamma_one_is_reported() {
        let mut t = Array3::zeros((1, 1, 1));
        t[[0, 0, 0]] = 1.0;
        let p = Pomdp::new(
            t,
            array![[1.0]],
            array![[1.0]],
            array![1.0],
            1.0,
            vec![false],
        )
        .unwrap();
        assert_eq!(
            stationary_weights(&p, &Policy::uniform(1, 1)).unwrap_err(),
            SolverError::NonEpisodic
        );
    }

    #[test]
    fn v_lambda_crosscheck_is_tight() {
        let src = envs::tmaze::<f64>(5, 0.9);
        let pi = Policy::uniform(src.pomdp.n_obs(), src.pomdp.n_actions());
        let v = v_lambda(&src.pomdp, &pi, 0.3).unwrap();
        assert!(v.crosscheck_residual < 1e-12);
    }

    #[test]
    fn f32_and_f64_agree_on_tmaze() {
        let p64 = envs::tmaze::<f64>(3, 0.9).pomdp;
        let p32 = envs::tmaze::<f32>(3, 0.9).pomdp;
        let pi64 = Policy::uniform(5, 4);
        let pi32 = Policy::<f32>::uniform(5, 4);
        let q64 = q_lambda(&p64, &pi64, 0.0).unwrap();
        let q32 = q_lambda(&p32, &pi32, 0.0).unwrap();
        for (a, b) in q64.values.iter().zip(q32.values.iter()) {
            assert!((a - *b as f64).abs() < 1e-4);
        }
    }
}
