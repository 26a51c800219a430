//! Stochastic memory functions and the memory-product POMDP.
//!
//! Augmented states are `(s, m)` at index `s * M + m` and augmented
//! observations `(o, m)` at index `o * M + m`: memory varies fastest.

use ndarray::{Array1, Array2, Array3, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::model::{ModelError, Policy, Pomdp, Tolerances};
use crate::parser::{Origin, PomdpSource};
use crate::scalar::{softmax_into, Scalar};

/// Standard deviation of randomly initialized logits.
pub const INIT_STD: f64 = 0.5;

/// `probs[[o, a, m, m']] = Pr(m' | o, a, m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryFn<F> {
    logits: Option<Array4<F>>,
    probs: Array4<F>,
    seed: Option<u64>,
}

pub(crate) fn softmax_last<F: Scalar>(logits: &Array4<F>) -> Array4<F> {
    let (n_obs, n_actions, n_mem, _) = logits.dim();
    let mut probs = Array4::zeros(logits.dim());
    let mut buf = vec![F::zero(); n_mem];
    for o in 0..n_obs {
        for a in 0..n_actions {
            for m in 0..n_mem {
                let row: Vec<F> = (0..n_mem).map(|k| logits[[o, a, m, k]]).collect();
                softmax_into(&row, &mut buf);
                for (k, &v) in buf.iter().enumerate() {
                    probs[[o, a, m, k]] = v;
                }
            }
        }
    }
    probs
}

impl<F: Scalar> MemoryFn<F> {
    pub fn from_logits(logits: Array4<F>) -> Result<Self, ModelError> {
        let (_, _, m, m2) = logits.dim();
        if m != m2 || m == 0 {
            return Err(ModelError::Dimension(format!(
                "memory logits need shape (obs, actions, M, M), got {:?}",
                logits.dim()
            )));
        }
        Ok(Self {
            probs: softmax_last(&logits),
            logits: Some(logits),
            seed: None,
        })
    }

    /// Memory given directly by its transition probabilities.
    pub fn from_probs(probs: Array4<F>) -> Result<Self, ModelError> {
        let (n_obs, n_actions, m, m2) = probs.dim();
        if m != m2 || m == 0 {
            return Err(ModelError::Dimension(format!(
                "memory probabilities need shape (obs, actions, M, M), got {:?}",
                probs.dim()
            )));
        }
        let tol = Tolerances::for_scalar::<F>().construction;
        for o in 0..n_obs {
            for a in 0..n_actions {
                for i in 0..m {
                    let row: Vec<F> = (0..m).map(|k| probs[[o, a, i, k]]).collect();
                    let sum: F = row.iter().copied().sum();
                    if row.iter().any(|&v| v < F::zero()) || (sum.as_f64() - 1.0).abs() > tol {
                        return Err(ModelError::PolicyRow {
                            row: (o * n_actions + a) * m + i,
                            sum: sum.as_f64(),
                        });
                    }
                }
            }
        }
        Ok(Self {
            logits: None,
            probs,
            seed: None,
        })
    }

    /// Memory that never changes state.
    pub fn identity(n_obs: usize, n_actions: usize, n_mem: usize) -> Self {
        let mut probs = Array4::zeros((n_obs, n_actions, n_mem, n_mem));
        for o in 0..n_obs {
            for a in 0..n_actions {
                for m in 0..n_mem {
                    probs[[o, a, m, m]] = F::one();
                }
            }
        }
        Self {
            logits: None,
            probs,
            seed: None,
        }
    }

    /// Logits drawn i.i.d. from `Normal(0, 0.5)` with a seeded generator.
    pub fn random(n_mem: usize, n_obs: usize, n_actions: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mu = Self::random_from(n_mem, n_obs, n_actions, &mut rng);
        mu.seed = Some(seed);
        mu
    }

    /// Like [`MemoryFn::random`], drawing from a caller-owned generator.
    pub fn random_from<R: Rng + ?Sized>(
        n_mem: usize,
        n_obs: usize,
        n_actions: usize,
        rng: &mut R,
    ) -> Self {
        let normal = Normal::new(0.0, INIT_STD).expect("finite std");
        let logits = Array4::from_shape_fn((n_obs, n_actions, n_mem, n_mem), |_| {
            F::lit(normal.sample(rng))
        });
        Self::from_logits(logits).expect("square memory logits")
    }

    pub(crate) fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn n_obs(&self) -> usize {
        self.probs.dim().0
    }

    pub fn n_actions(&self) -> usize {
        self.probs.dim().1
    }

    pub fn n_mem(&self) -> usize {
        self.probs.dim().2
    }

    pub fn probs(&self) -> &Array4<F> {
        &self.probs
    }

    pub fn logits(&self) -> Option<&Array4<F>> {
        self.logits.as_ref()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Deterministic memory that always takes the most likely next state.
    pub fn argmax(&self) -> Self {
        let (n_obs, n_actions, n_mem, _) = self.probs.dim();
        let mut probs = Array4::zeros(self.probs.dim());
        for o in 0..n_obs {
            for a in 0..n_actions {
                for m in 0..n_mem {
                    let best = (0..n_mem)
                        .max_by(|&i, &j| {
                            self.probs[[o, a, m, i]]
                                .partial_cmp(&self.probs[[o, a, m, j]])
                                .unwrap_or(std::cmp::Ordering::Equal)
                        })
                        .unwrap_or(0);
                    probs[[o, a, m, best]] = F::one();
                }
            }
        }
        Self {
            logits: None,
            probs,
            seed: self.seed,
        }
    }

    pub fn to_record(&self) -> MemoryRecord {
        let flat = |a: &Array4<F>| a.iter().map(|v| v.as_f64()).collect::<Vec<_>>();
        MemoryRecord {
            n_obs: self.n_obs(),
            n_actions: self.n_actions(),
            n_mem: self.n_mem(),
            logits: self.logits.as_ref().map(flat),
            probs: flat(&self.probs),
            seed: self.seed,
        }
    }

    pub fn from_record(r: &MemoryRecord) -> Result<Self, ModelError> {
        let shape = (r.n_obs, r.n_actions, r.n_mem, r.n_mem);
        let to_array = |v: &[f64]| {
            Array4::from_shape_vec(shape, v.iter().map(|&x| F::lit(x)).collect())
                .map_err(|e| ModelError::Dimension(e.to_string()))
        };
        let mut mu = match &r.logits {
            Some(l) => Self::from_logits(to_array(l)?)?,
            None => Self::from_probs(to_array(&r.probs)?)?,
        };
        mu.seed = r.seed;
        Ok(mu)
    }
}

/// JSON form of a memory function; arrays are flattened row-major over
/// `(obs, action, m, m')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryRecord {
    pub n_obs: usize,
    pub n_actions: usize,
    pub n_mem: usize,
    pub logits: Option<Vec<f64>>,
    pub probs: Vec<f64>,
    pub seed: Option<u64>,
}

fn check_dims<F: Scalar>(p: &Pomdp<F>, mu: &MemoryFn<F>) -> Result<(), ModelError> {
    if mu.n_obs() != p.n_obs() || mu.n_actions() != p.n_actions() {
        return Err(ModelError::Dimension(format!(
            "memory function is over {} observations and {} actions, POMDP has {} and {}",
            mu.n_obs(),
            mu.n_actions(),
            p.n_obs(),
            p.n_actions()
        )));
    }
    Ok(())
}

/// `mu_S[s, a, m, m'] = sum_o Phi[s, o] probs[o, a, m, m']`.
pub(crate) fn state_memory<F: Scalar>(phi: &Array2<F>, probs: &Array4<F>) -> Array4<F> {
    let (n_obs, n_actions, n_mem, _) = probs.dim();
    let flat = probs
        .view()
        .into_shape_with_order((n_obs, n_actions * n_mem * n_mem))
        .expect("contiguous");
    phi.dot(&flat)
        .into_shape_with_order((phi.nrows(), n_actions, n_mem, n_mem))
        .expect("shape")
}

/// Folds the memory function into the dynamics of `p`.
pub fn augment<F: Scalar>(p: &Pomdp<F>, mu: &MemoryFn<F>) -> Result<Pomdp<F>, ModelError> {
    check_dims(p, mu)?;
    if mu.n_mem() == 1 {
        return Ok(p.clone());
    }
    augment_with_probs(p, mu.probs())
}

pub(crate) fn augment_with_probs<F: Scalar>(
    p: &Pomdp<F>,
    probs: &Array4<F>,
) -> Result<Pomdp<F>, ModelError> {
    let n_mem = probs.dim().2;
    let (n_states, n_actions, n_obs) = (p.n_states(), p.n_actions(), p.n_obs());
    let mu_s = state_memory(p.phi(), probs);
    let t = p.transitions();
    let ns = n_states * n_mem;
    let mut tm = Array3::zeros((ns, n_actions, ns));
    for s in 0..n_states {
        for a in 0..n_actions {
            for s2 in 0..n_states {
                let base = t[[s, a, s2]];
                if base == F::zero() {
                    continue;
                }
                for m in 0..n_mem {
                    for m2 in 0..n_mem {
                        tm[[s * n_mem + m, a, s2 * n_mem + m2]] = base * mu_s[[s, a, m, m2]];
                    }
                }
            }
        }
    }
    let rm = Array2::from_shape_fn((ns, n_actions), |(i, a)| p.rewards()[[i / n_mem, a]]);
    let mut phim = Array2::zeros((ns, n_obs * n_mem));
    for s in 0..n_states {
        for o in 0..n_obs {
            for m in 0..n_mem {
                phim[[s * n_mem + m, o * n_mem + m]] = p.phi()[[s, o]];
            }
        }
    }
    let mut p0 = Array1::zeros(ns);
    for s in 0..n_states {
        p0[s * n_mem] = p.p0()[s];
    }
    let terminal = (0..ns).map(|i| p.terminal()[i / n_mem]).collect();
    Pomdp::new(tm, rm, phim, p0, p.gamma(), terminal)
}

/// Augments a named source, deriving `name@m` labels for the new symbols.
pub fn augment_source<F: Scalar>(
    src: &PomdpSource<F>,
    mu: &MemoryFn<F>,
) -> Result<PomdpSource<F>, ModelError> {
    let pomdp = augment(&src.pomdp, mu)?;
    let n_mem = mu.n_mem();
    if n_mem == 1 {
        return Ok(PomdpSource {
            pomdp,
            ..src.clone()
        });
    }
    let expand = |names: &[String]| {
        names
            .iter()
            .flat_map(|n| (0..n_mem).map(move |m| format!("{n}@{m}")))
            .collect::<Vec<_>>()
    };
    PomdpSource::new(
        format!("{}-mem{n_mem}", src.name),
        Origin::Builtin,
        pomdp,
        expand(&src.state_names),
        src.action_names.clone(),
        expand(&src.obs_names),
    )
}

/// Repeats each observation's policy row over all memory states.
pub fn lift_policy<F: Scalar>(pi: &Policy<F>, n_mem: usize) -> Policy<F> {
    if n_mem == 1 {
        return pi.clone();
    }
    let repeat = |a: &Array2<F>| {
        Array2::from_shape_fn((a.nrows() * n_mem, a.ncols()), |(i, k)| a[[i / n_mem, k]])
    };
    match pi.logits() {
        Some(l) => Policy::from_logits(repeat(l)),
        None => Policy::from_probs(repeat(pi.probs())).expect("rows of a valid policy"),
    }
}
