//! Forward and reverse passes for the two optimization objectives.
//!
//! The TD(lambda) system is solved in its reduced state form: with
//! `u = K : B`, the flattened fixed point `B = R + gamma T (K : B)` becomes
//! `(I - gamma G) u = K : R` with `G[s, t] = sum_{s', a} K[s, s', a] T[s', a, t]`,
//! and `B = R + gamma T u`. Splitting `K` into its MC and TD parts gives
//! `G = lambda P + (1 - lambda) Phi M`, where `P` is the state transition
//! matrix under the policy and `M[o, t] = sum_{s, a} W[o, s] pi[o, a] T[s, a, t]`.
//! Adjoints below follow that factorization step by step.

use ndarray::{Array1, Array2, Array3, Array4, Axis};

use crate::linalg::{LinalgError, Lu};
use crate::model::{state_policy, Pomdp, Tolerances};
use crate::scalar::{softmax_backward, Scalar};
use crate::solver::{
    occupancy, occupancy_distribution, state_transition, weights_from_occupancy, NormKind,
    SolverError,
};

pub(crate) struct LdOutput<F> {
    /// Squared weighted norm for the L2 kinds, the max itself otherwise.
    pub objective: F,
    /// Reported discrepancy (square root taken for the L2 kinds).
    pub discrepancy: F,
    /// Gradient of `objective` with respect to the terminal-zeroed `T`.
    pub grad_t: Option<Array3<F>>,
}

struct Branch<F> {
    lambda: F,
    lu: Lu<F>,
    u: Array1<F>,
    b: Array2<F>,
    q: Array2<F>,
}

fn singular(e: LinalgError) -> SolverError {
    match e {
        LinalgError::Singular { column, pivot } => SolverError::Singular { column, pivot },
        other => SolverError::Linalg(other),
    }
}

/// Discrepancy between the `lambda1` and `lambda2` fixed points and,
/// when `want_grad`, its gradient with respect to `t0`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn ld_eval<F: Scalar>(
    t0: &Array3<F>,
    rewards: &Array2<F>,
    phi: &Array2<F>,
    p0: &Array1<F>,
    gamma: F,
    probs: &Array2<F>,
    lambdas: (f64, f64),
    norm: NormKind,
    want_grad: bool,
) -> Result<LdOutput<F>, SolverError> {
    let (ns, na, _) = t0.dim();
    let no = phi.ncols();
    let tol = Tolerances::for_scalar::<F>();

    let phi_pi = state_policy(phi, probs);
    let p_state = state_transition(t0, &phi_pi);
    let (c, lu_c) = occupancy(p0, gamma, &p_state)?;
    let (w, occ, unreachable) = weights_from_occupancy(phi, &c, tol.unreachable);
    let r_pi: Array1<F> = (&phi_pi * rewards).sum_axis(Axis(1));

    let mut wpi = Array2::zeros((no, ns * na));
    for o in 0..no {
        for s in 0..ns {
            let ws = w[[o, s]];
            if ws == F::zero() {
                continue;
            }
            for a in 0..na {
                wpi[[o, s * na + a]] = ws * probs[[o, a]];
            }
        }
    }
    let t_flat = t0
        .view()
        .into_shape_with_order((ns * na, ns))
        .expect("contiguous T");
    let r_flat = rewards
        .view()
        .into_shape_with_order(ns * na)
        .expect("contiguous R");
    let m_mat = wpi.dot(&t_flat);
    let m_r = wpi.dot(&r_flat);
    let phi_m = phi.dot(&m_mat);
    let phi_mr = phi.dot(&m_r);

    let solve_branch = |lambda: F| -> Result<Branch<F>, SolverError> {
        let one_minus = F::one() - lambda;
        let g = &p_state * lambda + &phi_m * one_minus;
        let kr = &r_pi * lambda + &phi_mr * one_minus;
        let a = Array2::eye(ns) - g * gamma;
        let lu = Lu::factor(a).map_err(singular)?;
        let u = lu.solve(kr.view()).map_err(singular)?;
        let b = rewards
            + &t_flat
                .dot(&u)
                .into_shape_with_order((ns, na))
                .expect("shape")
                .mapv(|v| v * gamma);
        let q = w.dot(&b);
        Ok(Branch {
            lambda,
            lu,
            u,
            b,
            q,
        })
    };
    let b1 = solve_branch(F::lit(lambdas.0))?;
    let b2 = solve_branch(F::lit(lambdas.1))?;

    let dist = occupancy_distribution(&occ, &unreachable);
    let delta = &b1.q - &b2.q;
    let sq = &delta * &delta * probs;
    let per_obs: Array1<F> = sq.sum_axis(Axis(1));
    let weights: Array1<F> = match norm {
        NormKind::PolicyWeightedL2 => {
            dist.mapv(|d| if d > F::zero() { F::one() } else { F::zero() })
        }
        NormKind::OccupancyWeightedL2 => dist.clone(),
        NormKind::OccupancyWeightedMax => {
            let mut m = F::zero();
            for o in 0..no {
                for a in 0..na {
                    if dist[o] * probs[[o, a]] > F::zero() {
                        m = m.max(delta[[o, a]].abs());
                    }
                }
            }
            return Ok(LdOutput {
                objective: m,
                discrepancy: m,
                grad_t: None,
            });
        }
    };
    let objective: F = (&weights * &per_obs).sum();
    let discrepancy = objective.max(F::zero()).sqrt();
    if !want_grad {
        return Ok(LdOutput {
            objective,
            discrepancy,
            grad_t: None,
        });
    }

    // Reverse pass.
    let two = F::lit(2.0);
    let mut q_bar = Array2::zeros((no, na));
    for o in 0..no {
        for a in 0..na {
            q_bar[[o, a]] = two * weights[o] * probs[[o, a]] * delta[[o, a]];
        }
    }
    let mut c_bar = Array1::<F>::zeros(ns);
    if norm == NormKind::OccupancyWeightedL2 {
        let total: F = occ
            .iter()
            .zip(&unreachable)
            .filter(|(_, &u)| !u)
            .map(|(&v, _)| v)
            .sum();
        let mean: F = (&per_obs * &dist).sum();
        let mut occ_bar = Array1::zeros(no);
        for o in 0..no {
            if !unreachable[o] {
                occ_bar[o] = (per_obs[o] - mean) / total;
            }
        }
        c_bar += &phi.dot(&occ_bar);
    }

    let mut grad_t_flat = Array2::<F>::zeros((ns * na, ns));
    let mut w_bar = Array2::<F>::zeros((no, ns));
    let mut p_bar = Array2::<F>::zeros((ns, ns));
    for (branch, sign) in [(&b1, F::one()), (&b2, -F::one())] {
        let qb = q_bar.mapv(|v| v * sign);
        w_bar += &qb.dot(&branch.b.t());
        let b_bar = w.t().dot(&qb);
        let b_bar_flat = b_bar
            .view()
            .into_shape_with_order(ns * na)
            .expect("contiguous");
        // B = R + gamma T u
        for i in 0..ns * na {
            let g = gamma * b_bar_flat[i];
            if g != F::zero() {
                grad_t_flat.row_mut(i).scaled_add(g, &branch.u);
            }
        }
        let u_bar = t_flat.t().dot(&b_bar_flat).mapv(|v| v * gamma);
        // u = (I - gamma G)^{-1} kr
        let z = branch.lu.solve_transpose(u_bar.view()).map_err(singular)?;
        let one_minus = F::one() - branch.lambda;
        // G_bar = gamma z u^T
        let zu = |i: usize, j: usize| gamma * z[i] * branch.u[j];
        for i in 0..ns {
            for j in 0..ns {
                p_bar[[i, j]] += branch.lambda * zu(i, j);
            }
        }
        if one_minus != F::zero() {
            let phi_t_z = phi.t().dot(&z);
            // M_bar = (1 - lambda) Phi^T G_bar = (1 - lambda) gamma (Phi^T z) u^T
            let mut m_bar = Array2::zeros((no, ns));
            for o in 0..no {
                let f = one_minus * gamma * phi_t_z[o];
                if f != F::zero() {
                    m_bar.row_mut(o).scaled_add(f, &branch.u);
                }
            }
            let mr_bar = phi_t_z.mapv(|v| v * one_minus);
            // M = WPi T_flat, m_r = WPi R_flat
            grad_t_flat += &wpi.t().dot(&m_bar);
            let mut wpi_bar = m_bar.dot(&t_flat.t());
            for o in 0..no {
                wpi_bar.row_mut(o).scaled_add(mr_bar[o], &r_flat);
            }
            for o in 0..no {
                for s in 0..ns {
                    let mut acc = F::zero();
                    for a in 0..na {
                        acc += wpi_bar[[o, s * na + a]] * probs[[o, a]];
                    }
                    w_bar[[o, s]] += acc;
                }
            }
        }
    }

    // W[o, s] = Phi[s, o] c[s] / occ[o] on reachable rows.
    for o in 0..no {
        if unreachable[o] {
            continue;
        }
        let inner: F = (0..ns).map(|s| w_bar[[o, s]] * w[[o, s]]).sum();
        for s in 0..ns {
            let f = phi[[s, o]];
            if f != F::zero() {
                c_bar[s] += f * (w_bar[[o, s]] - inner) / occ[o];
            }
        }
    }
    // (I - gamma P)^T c = p0
    let h = lu_c.solve(c_bar.view()).map_err(singular)?;
    for i in 0..ns {
        for j in 0..ns {
            p_bar[[i, j]] += gamma * c[i] * h[j];
        }
    }
    let mut grad_t = grad_t_flat
        .into_shape_with_order((ns, na, ns))
        .expect("shape");
    for s in 0..ns {
        for a in 0..na {
            let f = phi_pi[[s, a]];
            if f != F::zero() {
                grad_t
                    .slice_mut(ndarray::s![s, a, ..])
                    .scaled_add(f, &p_bar.row(s));
            }
        }
    }
    Ok(LdOutput {
        objective,
        discrepancy,
        grad_t: Some(grad_t),
    })
}

/// Chains a gradient with respect to the augmented transition tensor back
/// to memory logits.
pub(crate) fn memory_logit_grad<F: Scalar>(
    base: &Pomdp<F>,
    mem_probs: &Array4<F>,
    grad_tm: &Array3<F>,
) -> Array4<F> {
    let (no, na, nm, _) = mem_probs.dim();
    let ns = base.n_states();
    let t = base.transitions();
    let mut mu_s_bar = Array4::<F>::zeros((ns, na, nm, nm));
    for s in 0..ns {
        if base.terminal()[s] {
            continue;
        }
        for a in 0..na {
            for s2 in 0..ns {
                let tv = t[[s, a, s2]];
                if tv == F::zero() {
                    continue;
                }
                for m in 0..nm {
                    for m2 in 0..nm {
                        mu_s_bar[[s, a, m, m2]] += tv * grad_tm[[s * nm + m, a, s2 * nm + m2]];
                    }
                }
            }
        }
    }
    let flat = mu_s_bar
        .into_shape_with_order((ns, na * nm * nm))
        .expect("contiguous");
    let probs_bar = base
        .phi()
        .t()
        .dot(&flat)
        .into_shape_with_order((no, na, nm, nm))
        .expect("shape");
    let mut out = Array4::zeros((no, na, nm, nm));
    let mut buf = vec![F::zero(); nm];
    for o in 0..no {
        for a in 0..na {
            for m in 0..nm {
                let p: Vec<F> = (0..nm).map(|k| mem_probs[[o, a, m, k]]).collect();
                let g: Vec<F> = (0..nm).map(|k| probs_bar[[o, a, m, k]]).collect();
                softmax_backward(&p, &g, &mut buf);
                for (k, &v) in buf.iter().enumerate() {
                    out[[o, a, m, k]] = v;
                }
            }
        }
    }
    out
}

/// Expected discounted return from the start distribution,
/// `J = p0^T (I - gamma P)^{-1} r_pi`, and optionally `dJ / d pi`.
pub(crate) fn start_value_eval<F: Scalar>(
    p: &Pomdp<F>,
    probs: &Array2<F>,
    want_grad: bool,
) -> Result<(F, Option<Array2<F>>), SolverError> {
    let t0 = p.solve_transitions();
    let (ns, na, _) = t0.dim();
    let phi_pi = state_policy(p.phi(), probs);
    let p_state = state_transition(&t0, &phi_pi);
    let (c, lu) = occupancy(p.p0(), p.gamma(), &p_state)?;
    let r_pi: Array1<F> = (&phi_pi * p.rewards()).sum_axis(Axis(1));
    let j = c.dot(&r_pi);
    if !want_grad {
        return Ok((j, None));
    }
    let v = lu.solve(r_pi.view()).map_err(singular)?;
    let t_flat = t0
        .view()
        .into_shape_with_order((ns * na, ns))
        .expect("contiguous");
    let q_s = p.rewards()
        + &t_flat
            .dot(&v)
            .into_shape_with_order((ns, na))
            .expect("shape")
            .mapv(|x| x * p.gamma());
    let weighted = &q_s * &c.view().insert_axis(Axis(1));
    Ok((j, Some(p.phi().t().dot(&weighted))))
}

/// Softmax backward applied row by row.
pub(crate) fn policy_logit_grad<F: Scalar>(probs: &Array2<F>, grad_probs: &Array2<F>) -> Array2<F> {
    let mut out = Array2::zeros(probs.dim());
    let mut buf = vec![F::zero(); probs.ncols()];
    for o in 0..probs.nrows() {
        let p = probs.row(o).to_vec();
        let g = grad_probs.row(o).to_vec();
        softmax_backward(&p, &g, &mut buf);
        for (k, &v) in buf.iter().enumerate() {
            out[[o, k]] = v;
        }
    }
    out
}
