//! Built-in environments and the bundled fixture corpus.
//!
//! Every builder authors its tensors in `f64` and casts to the requested
//! scalar type, so `f32` and `f64` instances describe the same model.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{parse_pomdp, Origin, PomdpSource};
use crate::model::{ModelError, Policy, Pomdp};
use crate::scalar::Scalar;

/// Bundled Cassandra files, by name.
pub const FIXTURES: [(&str, &str); 6] = [
    ("tiger", include_str!("../../fixtures/tiger.POMDP")),
    ("paint", include_str!("../../fixtures/paint.POMDP")),
    ("cheese", include_str!("../../fixtures/cheese.POMDP")),
    ("network", include_str!("../../fixtures/network.POMDP")),
    ("shuttle", include_str!("../../fixtures/shuttle.POMDP")),
    ("4x3", include_str!("../../fixtures/4x3.POMDP")),
];

pub fn fixture_text(name: &str) -> Option<&'static str> {
    FIXTURES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn fixture<F: Scalar>(name: &str) -> Option<PomdpSource<F>> {
    let text = fixture_text(name)?;
    let mut src = parse_pomdp::<F>(text).expect("bundled fixture parses");
    src.name = name.to_string();
    Some(src)
}

/// Modified Tiger: listening moves the initial states to post-listen states
/// with biased observations; opening a door ends the episode.
pub fn tiger<F: Scalar>() -> PomdpSource<F> {
    fixture("tiger").expect("tiger fixture")
}

/// Names accepted by [`by_name`].
pub const ENV_NAMES: [&str; 10] = [
    "tmaze",
    "tmaze-mdp",
    "parity",
    "tk-equality",
    "tiger",
    "paint",
    "cheese",
    "network",
    "shuttle",
    "4x3",
];

/// Looks up a built-in environment or fixture with default parameters.
pub fn by_name<F: Scalar>(name: &str) -> Option<PomdpSource<F>> {
    match name {
        "tmaze" => Some(tmaze(5, 0.9)),
        "tmaze-mdp" => Some(tmaze_mdp(5, 0.9)),
        "parity" => Some(parity_check()),
        "tk-equality" => Some(tk_equality()),
        other => fixture(other),
    }
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

#[allow(clippy::too_many_arguments)]
fn build<F: Scalar>(
    name: &str,
    t: Array3<f64>,
    r: Array2<f64>,
    phi: Array2<f64>,
    p0: Array1<f64>,
    gamma: f64,
    terminal: Vec<bool>,
    state_names: Vec<String>,
    action_names: &[&str],
    obs_names: &[&str],
) -> PomdpSource<F> {
    let pomdp = Pomdp::new(t, r, phi, p0, gamma, terminal)
        .expect("built-in environment dimensions")
        .cast::<F>();
    PomdpSource::new(
        name,
        Origin::Builtin,
        pomdp,
        state_names,
        action_names.iter().map(|s| s.to_string()).collect(),
        obs_names.iter().map(|s| s.to_string()).collect(),
    )
    .expect("built-in environment names")
}

/// T-maze action indices.
pub mod tmaze_actions {
    pub const UP: usize = 0;
    pub const DOWN: usize = 1;
    pub const RIGHT: usize = 2;
    pub const LEFT: usize = 3;
}

/// T-maze observation indices.
pub mod tmaze_obs {
    pub const BLUE: usize = 0;
    pub const RED: usize = 1;
    pub const CORRIDOR: usize = 2;
    pub const JUNCTION: usize = 3;
    pub const TERMINAL: usize = 4;
}

/// State layout of a T-maze with `len` corridor cells. Goal `g` is 0 when
/// the reward is up (blue start) and 1 when it is down (red start).
#[derive(Debug, Clone, Copy)]
pub struct TmazeLayout {
    pub corridor_len: usize,
}

impl TmazeLayout {
    pub fn n_states(self) -> usize {
        2 * self.corridor_len + 5
    }

    pub fn start(self, g: usize) -> usize {
        g
    }

    pub fn corridor(self, i: usize, g: usize) -> usize {
        2 + 2 * i + g
    }

    pub fn junction(self, g: usize) -> usize {
        2 + 2 * self.corridor_len + g
    }

    pub fn terminal(self) -> usize {
        2 * self.corridor_len + 4
    }

    fn state_names(self) -> Vec<String> {
        let goal = ["up", "down"];
        let mut out = vec![String::new(); self.n_states()];
        for g in 0..2 {
            out[self.start(g)] = format!("start-{}", goal[g]);
            for i in 0..self.corridor_len {
                out[self.corridor(i, g)] = format!("corridor{i}-{}", goal[g]);
            }
            out[self.junction(g)] = format!("junction-{}", goal[g]);
        }
        out[self.terminal()] = "terminal".into();
        out
    }
}

fn tmaze_dynamics(corridor_len: usize) -> (Array3<f64>, Array2<f64>, Array1<f64>, Vec<bool>) {
    use tmaze_actions::*;
    let l = TmazeLayout { corridor_len };
    let n = l.n_states();
    let mut t = Array3::zeros((n, 4, n));
    let mut r = Array2::zeros((n, 4));
    for g in 0..2 {
        let cells: Vec<usize> = std::iter::once(l.start(g))
            .chain((0..corridor_len).map(|i| l.corridor(i, g)))
            .chain(std::iter::once(l.junction(g)))
            .collect();
        for (k, &s) in cells.iter().enumerate() {
            for a in 0..4 {
                let next = match a {
                    RIGHT if k + 1 < cells.len() => cells[k + 1],
                    LEFT if k > 0 => cells[k - 1],
                    UP | DOWN if s == l.junction(g) => l.terminal(),
                    _ => s,
                };
                t[[s, a, next]] = 1.0;
            }
        }
        let j = l.junction(g);
        let (good, bad) = if g == 0 { (UP, DOWN) } else { (DOWN, UP) };
        r[[j, good]] = 4.0;
        r[[j, bad]] = -0.1;
    }
    for a in 0..4 {
        t[[l.terminal(), a, l.terminal()]] = 1.0;
    }
    let mut p0 = Array1::zeros(n);
    p0[l.start(0)] = 0.5;
    p0[l.start(1)] = 0.5;
    let mut terminal = vec![false; n];
    terminal[l.terminal()] = true;
    (t, r, p0, terminal)
}

const TMAZE_ACTIONS: [&str; 4] = ["up", "down", "right", "left"];

/// T-maze with `corridor_len` corridor cells and five observations.
pub fn tmaze<F: Scalar>(corridor_len: usize, gamma: f64) -> PomdpSource<F> {
    assert!(corridor_len >= 1, "corridor length must be at least 1");
    use tmaze_obs::*;
    let l = TmazeLayout { corridor_len };
    let (t, r, p0, terminal) = tmaze_dynamics(corridor_len);
    let mut phi = Array2::zeros((l.n_states(), 5));
    for g in 0..2 {
        phi[[l.start(g), if g == 0 { BLUE } else { RED }]] = 1.0;
        for i in 0..corridor_len {
            phi[[l.corridor(i, g), CORRIDOR]] = 1.0;
        }
        phi[[l.junction(g), JUNCTION]] = 1.0;
    }
    phi[[l.terminal(), TERMINAL]] = 1.0;
    build(
        "tmaze",
        t,
        r,
        phi,
        p0,
        gamma,
        terminal,
        l.state_names(),
        &TMAZE_ACTIONS,
        &["blue", "red", "corridor", "junction", "terminal"],
    )
}

/// Fully observed T-maze: one observation per state.
pub fn tmaze_mdp<F: Scalar>(corridor_len: usize, gamma: f64) -> PomdpSource<F> {
    assert!(corridor_len >= 1, "corridor length must be at least 1");
    let l = TmazeLayout { corridor_len };
    let (t, r, p0, terminal) = tmaze_dynamics(corridor_len);
    let n = l.n_states();
    let state_names = l.state_names();
    let obs: Vec<&str> = state_names.iter().map(|s| s.as_str()).collect();
    build(
        "tmaze-mdp",
        t,
        r,
        Array2::eye(n),
        p0,
        gamma,
        terminal,
        state_names.clone(),
        &TMAZE_ACTIONS,
        &obs,
    )
}

/// Which states of the fully observed T-maze get merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AliasPattern {
    /// All corridor cells of both goals share one observation.
    Corridor,
    /// The two junction cells share one observation.
    Junction,
    Both,
}

impl AliasPattern {
    pub const ALL: [AliasPattern; 3] = [
        AliasPattern::Corridor,
        AliasPattern::Junction,
        AliasPattern::Both,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AliasPattern::Corridor => "corridor",
            AliasPattern::Junction => "junction",
            AliasPattern::Both => "both",
        }
    }
}

impl fmt::Display for AliasPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AliasPattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AliasPattern::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                format!("unknown aliasing pattern '{s}' (expected corridor, junction or both)")
            })
    }
}

/// Observation matrix over the fully observed T-maze's observations in which
/// the states selected by `pattern` emit a single shared observation.
pub fn tmaze_aliased_phi<F: Scalar>(corridor_len: usize, pattern: AliasPattern) -> Array2<F> {
    let l = TmazeLayout { corridor_len };
    let n = l.n_states();
    let mut phi = Array2::<F>::eye(n);
    let merge = |phi: &mut Array2<F>, states: &[usize]| {
        let target = states[0];
        for &s in states {
            phi.row_mut(s).fill(F::zero());
            phi[[s, target]] = F::one();
        }
    };
    if matches!(pattern, AliasPattern::Corridor | AliasPattern::Both) {
        let cells: Vec<usize> = (0..corridor_len)
            .flat_map(|i| [l.corridor(i, 0), l.corridor(i, 1)])
            .collect();
        merge(&mut phi, &cells);
    }
    if matches!(pattern, AliasPattern::Junction | AliasPattern::Both) {
        merge(&mut phi, &[l.junction(0), l.junction(1)]);
    }
    phi
}

/// Policy that walks right through the start and corridor and picks up at
/// the junction with probability `p_up`.
pub fn tmaze_right_policy<F: Scalar>(p_up: f64) -> Policy<F> {
    use tmaze_actions::*;
    use tmaze_obs::*;
    let mut probs = Array2::<F>::zeros((5, 4));
    for o in [BLUE, RED, CORRIDOR] {
        probs[[o, RIGHT]] = F::one();
    }
    probs[[JUNCTION, UP]] = F::lit(p_up);
    probs[[JUNCTION, DOWN]] = F::lit(1.0 - p_up);
    probs.row_mut(TERMINAL).fill(F::lit(0.25));
    Policy::from_probs(probs).expect("stochastic")
}

/// The sweep policy lifted to the fully observed T-maze: right everywhere
/// before the junction, up with probability 2/3 at either junction.
pub fn tmaze_mdp_sweep_policy<F: Scalar>(corridor_len: usize) -> Policy<F> {
    use tmaze_actions::*;
    let l = TmazeLayout { corridor_len };
    let n = l.n_states();
    let mut probs = Array2::<F>::zeros((n, 4));
    for g in 0..2 {
        probs[[l.start(g), RIGHT]] = F::one();
        for i in 0..corridor_len {
            probs[[l.corridor(i, g), RIGHT]] = F::one();
        }
        probs[[l.junction(g), UP]] = F::lit(2.0 / 3.0);
        probs[[l.junction(g), DOWN]] = F::lit(1.0 / 3.0);
    }
    probs.row_mut(l.terminal()).fill(F::lit(0.25));
    Policy::from_probs(probs).expect("stochastic")
}

/// Convex blend of the current observation matrix with `phi_aliased`.
pub fn mix_observation<F: Scalar>(
    p: &Pomdp<F>,
    phi_aliased: &Array2<F>,
    mix: f64,
) -> Result<Pomdp<F>, ModelError> {
    if phi_aliased.dim() != p.phi().dim() {
        return Err(ModelError::Dimension(format!(
            "aliased observation matrix is {:?}, expected {:?}",
            phi_aliased.dim(),
            p.phi().dim()
        )));
    }
    if !(0.0..=1.0).contains(&mix) {
        return Err(ModelError::Dimension(format!("mix {mix} outside [0, 1]")));
    }
    let m = F::lit(mix);
    let phi = p.phi() * (F::one() - m) + phi_aliased * m;
    p.with_phi(phi)
}

/// Parity Check state layout: branches `b` in `[RP, RC, BP, BC]` visit the
/// first-colour state `b`, then the second-colour state `4 + b`, then the
/// matching (8) or mismatching (9) junction, then the terminal state (10).
pub mod parity_layout {
    pub const MATCH_JUNCTION: usize = 8;
    pub const MISMATCH_JUNCTION: usize = 9;
    pub const TERMINAL: usize = 10;
    pub const UP: usize = 0;
    pub const DOWN: usize = 1;
    /// `(first colour obs, second colour obs, colours match)` per branch.
    pub const BRANCHES: [(usize, usize, bool); 4] =
        [(0, 2, true), (0, 3, false), (1, 2, false), (1, 3, true)];
}

fn parity_tensors() -> (Array3<f64>, Array2<f64>, Array2<f64>, Vec<bool>) {
    use parity_layout::*;
    let n = 11;
    let mut t = Array3::zeros((n, 2, n));
    let mut r = Array2::zeros((n, 2));
    let mut phi = Array2::zeros((n, 6));
    for (b, &(c1, c2, matched)) in BRANCHES.iter().enumerate() {
        let junction = if matched {
            MATCH_JUNCTION
        } else {
            MISMATCH_JUNCTION
        };
        for a in 0..2 {
            t[[b, a, 4 + b]] = 1.0;
            t[[4 + b, a, junction]] = 1.0;
        }
        phi[[b, c1]] = 1.0;
        phi[[4 + b, c2]] = 1.0;
    }
    for a in 0..2 {
        t[[MATCH_JUNCTION, a, TERMINAL]] = 1.0;
        t[[MISMATCH_JUNCTION, a, TERMINAL]] = 1.0;
        t[[TERMINAL, a, TERMINAL]] = 1.0;
    }
    r[[MATCH_JUNCTION, UP]] = 1.0;
    r[[MATCH_JUNCTION, DOWN]] = -1.0;
    r[[MISMATCH_JUNCTION, UP]] = -1.0;
    r[[MISMATCH_JUNCTION, DOWN]] = 1.0;
    phi[[MATCH_JUNCTION, 4]] = 1.0;
    phi[[MISMATCH_JUNCTION, 4]] = 1.0;
    phi[[TERMINAL, 5]] = 1.0;
    let mut terminal = vec![false; n];
    terminal[TERMINAL] = true;
    (t, r, phi, terminal)
}

const PARITY_STATES: [&str; 11] = [
    "rp-1",
    "rc-1",
    "bp-1",
    "bc-1",
    "rp-2",
    "rc-2",
    "bp-2",
    "bc-2",
    "junction-match",
    "junction-mismatch",
    "terminal",
];
const PARITY_OBS: [&str; 6] = ["red", "blue", "pink", "cyan", "white", "terminal"];

/// Parity Check: four equally likely colour sequences, then an up/down choice
/// whose reward depends on whether the two colours belong to the same family.
pub fn parity_check<F: Scalar>() -> PomdpSource<F> {
    parity_with(&[0.25; 4], 0.0)
}

/// Parity Check with start probabilities `start` over the four branches and
/// a chance `stay` that action down keeps the agent in the first red state.
pub fn parity_with<F: Scalar>(start: &[f64; 4], stay: f64) -> PomdpSource<F> {
    let (mut t, r, phi, terminal) = parity_tensors();
    let mut p0 = Array1::zeros(11);
    for (b, &w) in start.iter().enumerate() {
        p0[b] = w;
    }
    if stay > 0.0 {
        let d = parity_layout::DOWN;
        t[[0, d, 0]] = stay;
        t[[0, d, 4]] = 1.0 - stay;
    }
    build(
        "parity",
        t,
        r,
        phi,
        p0,
        0.9,
        terminal,
        PARITY_STATES.iter().map(|s| s.to_string()).collect(),
        &["up", "down"],
        &PARITY_OBS,
    )
}

/// Six-state POMDP whose aliased middle state leaves the TD and MC fixed
/// points equal for every policy.
///
/// From `s0` both actions reach `s1`, `sx`, `s2` with probabilities 0.5, 0.3,
/// 0.2; `sx` emits the observations of `s1` and `s2` with equal probability.
pub fn tk_equality<F: Scalar>() -> PomdpSource<F> {
    // states: s0 s1 sx s2 s3 terminal
    let n = 6;
    let (s0, s1, sx, s2, s3, end) = (0, 1, 2, 3, 4, 5);
    let mut t = Array3::zeros((n, 2, n));
    let mut r = Array2::zeros((n, 2));
    for a in 0..2 {
        t[[s0, a, s1]] = 0.5;
        t[[s0, a, sx]] = 0.3;
        t[[s0, a, s2]] = 0.2;
        t[[s3, a, end]] = 1.0;
        t[[end, a, end]] = 1.0;
    }
    t[[s1, 0, s3]] = 1.0;
    t[[s1, 1, end]] = 1.0;
    t[[sx, 0, s3]] = 0.5;
    t[[sx, 0, end]] = 0.5;
    t[[sx, 1, end]] = 1.0;
    t[[s2, 0, end]] = 1.0;
    t[[s2, 1, s3]] = 1.0;
    r[[s1, 0]] = 1.0;
    r[[s1, 1]] = -1.0;
    r[[sx, 0]] = 2.0;
    r[[sx, 1]] = 0.5;
    r[[s2, 0]] = -2.0;
    r[[s2, 1]] = 3.0;
    r[[s3, 0]] = 1.0;
    let mut phi = Array2::zeros((n, 5));
    phi[[s0, 0]] = 1.0;
    phi[[s1, 1]] = 1.0;
    phi[[sx, 1]] = 0.5;
    phi[[sx, 2]] = 0.5;
    phi[[s2, 2]] = 1.0;
    phi[[s3, 3]] = 1.0;
    phi[[end, 4]] = 1.0;
    let mut p0 = Array1::zeros(n);
    p0[s0] = 1.0;
    let mut terminal = vec![false; n];
    terminal[end] = true;
    build(
        "tk-equality",
        t,
        r,
        phi,
        p0,
        0.9,
        terminal,
        ["s0", "s1", "sx", "s2", "s3", "terminal"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        &["a0", "a1"],
        &["o0", "o1", "o2", "o3", "terminal"],
    )
}

/// Random block MDP: every state owns between one and three observations
/// that no other state emits. No terminal states; `gamma` in `[0.5, 0.95]`.
pub fn random_block_mdp<F: Scalar>(n_states: usize, n_actions: usize, seed: u64) -> PomdpSource<F> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut t = Array3::zeros((n_states, n_actions, n_states));
    for s in 0..n_states {
        for a in 0..n_actions {
            let row: Vec<f64> = (0..n_states).map(|_| rng.random::<f64>().powi(2)).collect();
            let total: f64 = row.iter().sum();
            for (s2, v) in row.into_iter().enumerate() {
                t[[s, a, s2]] = v / total;
            }
        }
    }
    let r = Array2::from_shape_fn((n_states, n_actions), |_| normal.sample(&mut rng));
    let owned: Vec<usize> = (0..n_states).map(|_| rng.random_range(1..=3)).collect();
    let n_obs: usize = owned.iter().sum();
    let mut phi = Array2::zeros((n_states, n_obs));
    let mut next = 0;
    for (s, &k) in owned.iter().enumerate() {
        let w: Vec<f64> = (0..k).map(|_| 0.2 + rng.random::<f64>()).collect();
        let total: f64 = w.iter().sum();
        for (j, v) in w.into_iter().enumerate() {
            phi[[s, next + j]] = v / total;
        }
        next += k;
    }
    let p0_raw: Vec<f64> = (0..n_states).map(|_| rng.random::<f64>()).collect();
    let total: f64 = p0_raw.iter().sum();
    let p0 = Array1::from_iter(p0_raw.into_iter().map(|v| v / total));
    let gamma = rng.random_range(0.5..=0.95);
    let obs = names("o", n_obs);
    let obs_refs: Vec<&str> = obs.iter().map(|s| s.as_str()).collect();
    let actions = names("a", n_actions);
    let action_refs: Vec<&str> = actions.iter().map(|s| s.as_str()).collect();
    build(
        "random-block-mdp",
        t,
        r,
        phi,
        p0,
        gamma,
        vec![false; n_states],
        names("s", n_states),
        &action_refs,
        &obs_refs,
    )
}

/// Policy with logits drawn i.i.d. from `Normal(0, std)`.
pub fn random_policy<F: Scalar>(
    n_obs: usize,
    n_actions: usize,
    std: f64,
    rng: &mut impl Rng,
) -> Policy<F> {
    let normal = Normal::new(0.0, std).expect("finite std");
    let logits = Array2::from_shape_fn((n_obs, n_actions), |_| F::lit(normal.sample(rng)));
    Policy::from_logits(logits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::to_cassandra;

    #[test]
    fn tmaze_sizes() {
        let p = tmaze::<f64>(5, 0.9).pomdp;
        assert_eq!((p.n_states(), p.n_obs(), p.n_actions()), (15, 5, 4));
        let p1 = tmaze::<f64>(1, 0.9).pomdp;
        assert_eq!((p1.n_states(), p1.n_obs()), (7, 5));
        assert!(p.validate().passed());
    }

    #[test]
    fn every_builtin_validates() {
        for name in ENV_NAMES {
            let src = by_name::<f64>(name).unwrap_or_else(|| panic!("{name}"));
            let r = src.pomdp.validate();
            assert!(r.passed(), "{name}: {r}");
        }
        for seed in 0..5 {
            assert!(random_block_mdp::<f64>(4, 2, seed)
                .pomdp
                .validate()
                .passed());
        }
        assert!(parity_with::<f64>(&[0.3, 0.2, 0.25, 0.25], 0.1)
            .pomdp
            .validate()
            .passed());
    }

    #[test]
    fn builtins_round_trip_through_text() {
        for name in ENV_NAMES {
            let src = by_name::<f64>(name).unwrap();
            let back = parse_pomdp::<f64>(&to_cassandra(&src)).unwrap();
            let (a, b) = (&src.pomdp, &back.pomdp);
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-12;
            assert!(
                a.transitions()
                    .iter()
                    .zip(b.transitions())
                    .all(|(x, y)| close(*x, *y)),
                "{name} T"
            );
            assert!(
                a.rewards()
                    .iter()
                    .zip(b.rewards())
                    .all(|(x, y)| close(*x, *y)),
                "{name} R"
            );
            assert!(
                a.phi().iter().zip(b.phi()).all(|(x, y)| close(*x, *y)),
                "{name} Phi"
            );
            assert!(
                a.p0().iter().zip(b.p0()).all(|(x, y)| close(*x, *y)),
                "{name} p0"
            );
            assert_eq!(a.gamma(), b.gamma());
            assert_eq!(a.terminal(), b.terminal(), "{name} terminal flags");
            assert_eq!(src.state_names, back.state_names);
        }
    }

    #[test]
    fn mix_endpoints() {
        let p = tmaze_mdp::<f64>(5, 1.0).pomdp;
        let aliased = tmaze_aliased_phi::<f64>(5, AliasPattern::Both);
        assert_eq!(mix_observation(&p, &aliased, 0.0).unwrap().phi(), p.phi());
        assert_eq!(mix_observation(&p, &aliased, 1.0).unwrap().phi(), &aliased);
        let half = mix_observation(&p, &aliased, 0.5).unwrap();
        assert!(half.validate().passed());
        assert!(mix_observation(&p, &Array2::zeros((3, 3)), 0.5).is_err());
    }

    #[test]
    fn tiger_has_five_states_and_biased_listening() {
        let src = tiger::<f64>();
        let p = &src.pomdp;
        assert_eq!(p.n_states(), 5);
        let left = src.obs_index("left").unwrap();
        let l2 = src.state_index("tiger-left-2").unwrap();
        assert!((p.phi()[[l2, left]] - 0.85).abs() < 1e-15);
    }

    #[test]
    fn parity_start_mass() {
        let p = parity_check::<f64>().pomdp;
        for b in 0..4 {
            assert_eq!(p.p0()[b], 0.25);
        }
    }
}
