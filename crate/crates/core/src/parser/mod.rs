//! Cassandra `.POMDP` reader and writer, plus the built-in environments.
//!
//! Supported subset: `discount`, `values: reward`, `states`/`actions`/
//! `observations` (count or names), `start` (vector, `uniform`, a state name,
//! `include`/`exclude` lists) and `T`/`O`/`R` entries in triple, row and
//! matrix forms with `*` wildcards. Rewards are marginalized to `R(s, a)` and
//! observations must not depend on the action.

pub mod envs;

use std::fmt::Write as _;

use ndarray::{Array1, Array2, Array3};
use serde::Serialize;
use thiserror::Error;

use crate::model::{ModelError, Pomdp};
use crate::scalar::Scalar;

/// Slack for the action-independence check on `O`.
const OBS_ACTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    File,
    Builtin,
}

/// A POMDP together with its symbol names.
#[derive(Debug, Clone)]
pub struct PomdpSource<F> {
    pub name: String,
    pub origin: Origin,
    pub pomdp: Pomdp<F>,
    pub state_names: Vec<String>,
    pub action_names: Vec<String>,
    pub obs_names: Vec<String>,
}

impl<F: Scalar> PomdpSource<F> {
    pub fn new(
        name: impl Into<String>,
        origin: Origin,
        pomdp: Pomdp<F>,
        state_names: Vec<String>,
        action_names: Vec<String>,
        obs_names: Vec<String>,
    ) -> Result<Self, ModelError> {
        let check = |what: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(ModelError::Dimension(format!(
                    "{got} {what} names for {want} {what}s"
                )))
            }
        };
        check("state", state_names.len(), pomdp.n_states())?;
        check("action", action_names.len(), pomdp.n_actions())?;
        check("observation", obs_names.len(), pomdp.n_obs())?;
        Ok(Self {
            name: name.into(),
            origin,
            pomdp,
            state_names,
            action_names,
            obs_names,
        })
    }

    pub fn cast<G: Scalar>(&self) -> PomdpSource<G> {
        PomdpSource {
            name: self.name.clone(),
            origin: self.origin,
            pomdp: self.pomdp.cast(),
            state_names: self.state_names.clone(),
            action_names: self.action_names.clone(),
            obs_names: self.obs_names.clone(),
        }
    }

    pub fn obs_index(&self, name: &str) -> Option<usize> {
        self.obs_names.iter().position(|n| n == name)
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.action_names.iter().position(|n| n == name)
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.state_names.iter().position(|n| n == name)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {message}")]
    Dimension { line: usize, message: String },
    #[error("observation probabilities for state '{state}' differ between actions '{first}' and '{other}'; only action-independent observations are supported")]
    ActionDependentObservations {
        state: String,
        first: String,
        other: String,
    },
    #[error("line {line}: 'values: cost' is not supported")]
    UnsupportedValues { line: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    line: usize,
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("");
        for word in body.split_whitespace() {
            let mut rest = word;
            while let Some(idx) = rest.find(':') {
                if idx > 0 {
                    out.push(Token {
                        text: &rest[..idx],
                        line,
                    });
                }
                out.push(Token { text: ":", line });
                rest = &rest[idx + 1..];
            }
            if !rest.is_empty() {
                out.push(Token { text: rest, line });
            }
        }
    }
    out
}

const KEYWORDS: [&str; 9] = [
    "discount",
    "values",
    "states",
    "actions",
    "observations",
    "start",
    "T",
    "O",
    "R",
];

struct Parser<'a> {
    toks: Vec<Token<'a>>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<Token<'a>> {
        self.toks.get(self.pos).copied()
    }

    fn last_line(&self) -> usize {
        self.toks
            .get(self.pos.min(self.toks.len().saturating_sub(1)))
            .map_or(1, |t| t.line)
    }

    fn next(&mut self, what: &str) -> Result<Token<'a>, ParseError> {
        let t = self.peek().ok_or_else(|| ParseError::Syntax {
            line: self.last_line(),
            message: format!("unexpected end of file, expected {what}"),
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn expect_colon(&mut self) -> Result<(), ParseError> {
        let t = self.next("':'")?;
        if t.text != ":" {
            return Err(syntax(t.line, format!("expected ':', found '{}'", t.text)));
        }
        Ok(())
    }

    fn at_statement(&self, i: usize) -> bool {
        let Some(t) = self.toks.get(i) else {
            return false;
        };
        if !KEYWORDS.contains(&t.text) {
            return false;
        }
        match self.toks.get(i + 1).map(|n| n.text) {
            Some(":") => true,
            Some("include") | Some("exclude") => t.text == "start",
            _ => false,
        }
    }

    /// Tokens up to the next statement or end of input.
    fn rest_of_statement(&mut self) -> Vec<Token<'a>> {
        let start = self.pos;
        while self.pos < self.toks.len() && !self.at_statement(self.pos) {
            self.pos += 1;
        }
        self.toks[start..self.pos].to_vec()
    }
}

fn syntax(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        message: message.into(),
    }
}

fn number(t: Token<'_>) -> Result<f64, ParseError> {
    t.text
        .parse::<f64>()
        .map_err(|_| syntax(t.line, format!("expected a number, found '{}'", t.text)))
}

fn numbers(toks: &[Token<'_>]) -> Result<Vec<f64>, ParseError> {
    toks.iter().map(|&t| number(t)).collect()
}

#[derive(Debug, Default)]
struct Symbols {
    names: Vec<String>,
}

impl Symbols {
    fn len(&self) -> usize {
        self.names.len()
    }

    fn resolve(&self, t: Token<'_>, what: &str) -> Result<Vec<usize>, ParseError> {
        if t.text == "*" {
            return Ok((0..self.len()).collect());
        }
        if let Some(i) = self.names.iter().position(|n| n == t.text) {
            return Ok(vec![i]);
        }
        match t.text.parse::<usize>() {
            Ok(i) if i < self.len() => Ok(vec![i]),
            Ok(i) => Err(ParseError::Dimension {
                line: t.line,
                message: format!("{what} index {i} out of range (have {})", self.len()),
            }),
            Err(_) => Err(syntax(t.line, format!("unknown {what} '{}'", t.text))),
        }
    }
}

struct Raw {
    gamma: Option<f64>,
    states: Symbols,
    actions: Symbols,
    obs: Symbols,
    start: Option<Vec<f64>>,
    /// `[a][s][s']`
    t: Vec<f64>,
    /// `[a][s'][o]`
    o: Vec<f64>,
    /// `[a][s][s'][o]`
    r: Vec<f64>,
}

impl Raw {
    fn dims(&self) -> (usize, usize, usize) {
        (self.states.len(), self.actions.len(), self.obs.len())
    }

    fn ensure_alloc(&mut self, line: usize) -> Result<(), ParseError> {
        let (ns, na, no) = self.dims();
        if ns == 0 || na == 0 || no == 0 {
            return Err(syntax(
                line,
                "states, actions and observations must be declared before T, O or R entries",
            ));
        }
        if self.t.is_empty() {
            self.t = vec![0.0; na * ns * ns];
            self.o = vec![0.0; na * ns * no];
            self.r = vec![0.0; na * ns * ns * no];
        }
        Ok(())
    }
}

/// Parses Cassandra text into dense tensors.
pub fn parse_pomdp<F: Scalar>(text: &str) -> Result<PomdpSource<F>, ParseError> {
    let mut p = Parser {
        toks: tokenize(text),
        pos: 0,
    };
    let mut raw = Raw {
        gamma: None,
        states: Symbols::default(),
        actions: Symbols::default(),
        obs: Symbols::default(),
        start: None,
        t: Vec::new(),
        o: Vec::new(),
        r: Vec::new(),
    };

    while let Some(tok) = p.peek() {
        if !p.at_statement(p.pos) {
            return Err(syntax(tok.line, format!("unexpected token '{}'", tok.text)));
        }
        p.pos += 1;
        match tok.text {
            "discount" => {
                p.expect_colon()?;
                let t = p.next("discount value")?;
                raw.gamma = Some(number(t)?);
            }
            "values" => {
                p.expect_colon()?;
                let t = p.next("'reward' or 'cost'")?;
                match t.text {
                    "reward" => {}
                    "cost" => return Err(ParseError::UnsupportedValues { line: t.line }),
                    other => return Err(syntax(t.line, format!("unknown values kind '{other}'"))),
                }
            }
            "states" | "actions" | "observations" => {
                p.expect_colon()?;
                let body = p.rest_of_statement();
                let names = symbol_list(&body, tok)?;
                let slot = match tok.text {
                    "states" => &mut raw.states,
                    "actions" => &mut raw.actions,
                    _ => &mut raw.obs,
                };
                slot.names = names;
            }
            "start" => parse_start(&mut p, &mut raw, tok)?,
            "T" => parse_transition(&mut p, &mut raw, tok)?,
            "O" => parse_observation(&mut p, &mut raw, tok)?,
            "R" => parse_reward(&mut p, &mut raw, tok)?,
            _ => unreachable!("keyword list"),
        }
    }
    build(raw, p.last_line())
}

fn symbol_list(body: &[Token<'_>], head: Token<'_>) -> Result<Vec<String>, ParseError> {
    match body {
        [] => Err(syntax(
            head.line,
            format!("empty {} declaration", head.text),
        )),
        [one] => match one.text.parse::<usize>() {
            Ok(0) => Err(syntax(
                one.line,
                format!("{} count must be positive", head.text),
            )),
            Ok(n) => Ok((0..n).map(|i| i.to_string()).collect()),
            Err(_) => Ok(vec![one.text.to_string()]),
        },
        many => Ok(many.iter().map(|t| t.text.to_string()).collect()),
    }
}

fn parse_start(p: &mut Parser<'_>, raw: &mut Raw, head: Token<'_>) -> Result<(), ParseError> {
    let ns = raw.states.len();
    if ns == 0 {
        return Err(syntax(head.line, "start declared before states"));
    }
    let mode = p.next("start distribution")?;
    let mode_text = mode.text;
    if mode_text == "include" || mode_text == "exclude" {
        p.expect_colon()?;
    } else if mode_text != ":" {
        return Err(syntax(
            mode.line,
            format!("expected ':', found '{mode_text}'"),
        ));
    }
    let body = p.rest_of_statement();
    let line = body.first().map_or(mode.line, |t| t.line);
    let dist = match mode_text {
        "include" | "exclude" => {
            let mut chosen = vec![mode_text == "exclude"; ns];
            for &t in &body {
                for s in raw.states.resolve(t, "state")? {
                    chosen[s] = mode_text == "include";
                }
            }
            let k = chosen.iter().filter(|&&c| c).count();
            if k == 0 {
                return Err(syntax(line, "start set is empty"));
            }
            chosen
                .iter()
                .map(|&c| if c { 1.0 / k as f64 } else { 0.0 })
                .collect()
        }
        _ => match body.as_slice() {
            [] => return Err(syntax(line, "empty start declaration")),
            [t] if t.text == "uniform" => vec![1.0 / ns as f64; ns],
            [t] if t.text.parse::<f64>().is_err() || ns != 1 => {
                let s = raw.states.resolve(*t, "state")?;
                let mut d = vec![0.0; ns];
                d[s[0]] = 1.0;
                d
            }
            toks => {
                let v = numbers(toks)?;
                if v.len() != ns {
                    return Err(ParseError::Dimension {
                        line,
                        message: format!("start vector has {} entries, expected {ns}", v.len()),
                    });
                }
                v
            }
        },
    };
    raw.start = Some(dist);
    Ok(())
}

/// Reads `spec (: spec)*` heads; returns the resolved index sets.
fn entry_heads(
    p: &mut Parser<'_>,
    syms: &[&Symbols],
    what: &[&str],
) -> Result<Vec<Vec<usize>>, ParseError> {
    let mut out = Vec::new();
    for (i, (sym, w)) in syms.iter().zip(what).enumerate() {
        let t = p.next(w)?;
        out.push(sym.resolve(t, w)?);
        if i + 1 == syms.len() {
            break;
        }
        match p.peek() {
            Some(c) if c.text == ":" && !p.at_statement(p.pos) => {
                p.pos += 1;
            }
            _ => break,
        }
    }
    Ok(out)
}

fn expect_count(
    body: &[Token<'_>],
    n: usize,
    line: usize,
    what: &str,
) -> Result<Vec<f64>, ParseError> {
    if body.is_empty() {
        return Err(syntax(line, format!("missing values for {what}")));
    }
    let v = numbers(body)?;
    if v.len() != n {
        return Err(ParseError::Dimension {
            line: body[0].line,
            message: format!("{what} has {} values, expected {n}", v.len()),
        });
    }
    Ok(v)
}

/// Shared body of `T` and `O` entries: a stochastic tensor indexed
/// `[a][row][col]` with `cols` columns.
fn fill_stochastic(
    store: &mut [f64],
    heads: &[Vec<usize>],
    body: &[Token<'_>],
    rows: usize,
    cols: usize,
    line: usize,
    allow_identity: bool,
) -> Result<(), ParseError> {
    let idx = |a: usize, r: usize, c: usize| (a * rows + r) * cols + c;
    let keyword = match body {
        [t] if t.text == "uniform" || t.text == "identity" => Some(t.text),
        _ => None,
    };
    match heads.len() {
        3 => {
            let v = expect_count(body, 1, line, "entry")?[0];
            for &a in &heads[0] {
                for &r in &heads[1] {
                    for &c in &heads[2] {
                        store[idx(a, r, c)] = v;
                    }
                }
            }
        }
        2 => {
            let row = match keyword {
                Some("uniform") => vec![1.0 / cols as f64; cols],
                Some(_) => return Err(syntax(line, "'identity' needs the matrix form")),
                None => expect_count(body, cols, line, "row")?,
            };
            for &a in &heads[0] {
                for &r in &heads[1] {
                    for (c, &v) in row.iter().enumerate() {
                        store[idx(a, r, c)] = v;
                    }
                }
            }
        }
        1 => {
            let mat = match keyword {
                Some("uniform") => vec![1.0 / cols as f64; rows * cols],
                Some(_) if allow_identity && rows == cols => (0..rows * cols)
                    .map(|i| if i / cols == i % cols { 1.0 } else { 0.0 })
                    .collect(),
                Some(_) => return Err(syntax(line, "'identity' requires a square matrix")),
                None => expect_count(body, rows * cols, line, "matrix")?,
            };
            for &a in &heads[0] {
                for (i, &v) in mat.iter().enumerate() {
                    store[idx(a, i / cols, i % cols)] = v;
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(())
}

fn parse_transition(p: &mut Parser<'_>, raw: &mut Raw, head: Token<'_>) -> Result<(), ParseError> {
    raw.ensure_alloc(head.line)?;
    p.expect_colon()?;
    let heads = entry_heads(
        p,
        &[&raw.actions, &raw.states, &raw.states],
        &["action", "state", "state"],
    )?;
    let body = p.rest_of_statement();
    let ns = raw.states.len();
    fill_stochastic(&mut raw.t, &heads, &body, ns, ns, head.line, true)
}

fn parse_observation(p: &mut Parser<'_>, raw: &mut Raw, head: Token<'_>) -> Result<(), ParseError> {
    raw.ensure_alloc(head.line)?;
    p.expect_colon()?;
    let heads = entry_heads(
        p,
        &[&raw.actions, &raw.states, &raw.obs],
        &["action", "state", "observation"],
    )?;
    let body = p.rest_of_statement();
    let (ns, _, no) = raw.dims();
    fill_stochastic(&mut raw.o, &heads, &body, ns, no, head.line, false)
}

fn parse_reward(p: &mut Parser<'_>, raw: &mut Raw, head: Token<'_>) -> Result<(), ParseError> {
    raw.ensure_alloc(head.line)?;
    p.expect_colon()?;
    let heads = entry_heads(
        p,
        &[&raw.actions, &raw.states, &raw.states, &raw.obs],
        &["action", "state", "state", "observation"],
    )?;
    let body = p.rest_of_statement();
    let (ns, _, no) = raw.dims();
    let idx = |a: usize, s: usize, s2: usize, o: usize| ((a * ns + s) * ns + s2) * no + o;
    match heads.len() {
        4 => {
            let v = expect_count(&body, 1, head.line, "reward entry")?[0];
            for &a in &heads[0] {
                for &s in &heads[1] {
                    for &s2 in &heads[2] {
                        for &o in &heads[3] {
                            raw.r[idx(a, s, s2, o)] = v;
                        }
                    }
                }
            }
        }
        3 => {
            let row = expect_count(&body, no, head.line, "reward row")?;
            for &a in &heads[0] {
                for &s in &heads[1] {
                    for &s2 in &heads[2] {
                        for (o, &v) in row.iter().enumerate() {
                            raw.r[idx(a, s, s2, o)] = v;
                        }
                    }
                }
            }
        }
        2 => {
            let mat = expect_count(&body, ns * no, head.line, "reward matrix")?;
            for &a in &heads[0] {
                for &s in &heads[1] {
                    for (i, &v) in mat.iter().enumerate() {
                        raw.r[idx(a, s, i / no, i % no)] = v;
                    }
                }
            }
        }
        _ => {
            return Err(syntax(
                head.line,
                "reward entries need at least action and state",
            ))
        }
    }
    Ok(())
}

fn build<F: Scalar>(raw: Raw, last_line: usize) -> Result<PomdpSource<F>, ParseError> {
    let gamma = raw
        .gamma
        .ok_or_else(|| syntax(last_line, "missing 'discount' declaration"))?;
    let (ns, na, no) = raw.dims();
    if ns == 0 || na == 0 || no == 0 {
        return Err(syntax(
            last_line,
            "states, actions and observations must all be declared",
        ));
    }
    if raw.t.is_empty() {
        return Err(syntax(last_line, "no T entries"));
    }

    for s2 in 0..ns {
        let row = |a: usize| &raw.o[(a * ns + s2) * no..(a * ns + s2 + 1) * no];
        for a in 1..na {
            let gap = row(0)
                .iter()
                .zip(row(a))
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            if gap > OBS_ACTION_TOL {
                return Err(ParseError::ActionDependentObservations {
                    state: raw.states.names[s2].clone(),
                    first: raw.actions.names[0].clone(),
                    other: raw.actions.names[a].clone(),
                });
            }
        }
    }

    let t = Array3::from_shape_fn((ns, na, ns), |(s, a, s2)| raw.t[(a * ns + s) * ns + s2]);
    let phi = Array2::from_shape_fn((ns, no), |(s, o)| raw.o[s * no + o]);
    let rewards = Array2::from_shape_fn((ns, na), |(s, a)| {
        let mut acc = 0.0;
        for s2 in 0..ns {
            let tp = raw.t[(a * ns + s) * ns + s2];
            if tp == 0.0 {
                continue;
            }
            for o in 0..no {
                let op = raw.o[(a * ns + s2) * no + o];
                acc += tp * op * raw.r[((a * ns + s) * ns + s2) * no + o];
            }
        }
        acc
    });
    let p0 = raw
        .start
        .map(Array1::from)
        .unwrap_or_else(|| Array1::from_elem(ns, 1.0 / ns as f64));

    let terminal: Vec<bool> = (0..ns)
        .map(|s| (0..na).all(|a| t[[s, a, s]] == 1.0 && rewards[[s, a]] == 0.0))
        .collect();

    let pomdp = Pomdp::new(t, rewards, phi, p0, gamma, terminal)?.cast::<F>();
    Ok(PomdpSource::new(
        "file",
        Origin::File,
        pomdp,
        raw.states.names,
        raw.actions.names,
        raw.obs.names,
    )?)
}

fn fmt_num(v: f64) -> String {
    // Debug formatting of f64 is the shortest round-tripping representation.
    format!("{v:?}")
}

/// Writes a source in the supported Cassandra subset. Re-parsing the output
/// reproduces the tensors and terminal flags of absorbing zero-reward states.
pub fn to_cassandra<F: Scalar>(src: &PomdpSource<F>) -> String {
    let p = &src.pomdp;
    let (ns, na, no) = (p.n_states(), p.n_actions(), p.n_obs());
    let mut out = String::new();
    let _ = writeln!(out, "# {}", src.name);
    let _ = writeln!(out, "discount: {}", fmt_num(p.gamma().as_f64()));
    let _ = writeln!(out, "values: reward");
    let _ = writeln!(out, "states: {}", src.state_names.join(" "));
    let _ = writeln!(out, "actions: {}", src.action_names.join(" "));
    let _ = writeln!(out, "observations: {}", src.obs_names.join(" "));
    let start: Vec<String> = p.p0().iter().map(|v| fmt_num(v.as_f64())).collect();
    let _ = writeln!(out, "start: {}", start.join(" "));
    let t = p.transitions();
    for a in 0..na {
        let _ = writeln!(out, "\nT: {}", src.action_names[a]);
        for s in 0..ns {
            let row: Vec<String> = (0..ns).map(|s2| fmt_num(t[[s, a, s2]].as_f64())).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
    }
    let _ = writeln!(out, "\nO: *");
    for s in 0..ns {
        let row: Vec<String> = (0..no).map(|o| fmt_num(p.phi()[[s, o]].as_f64())).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    let _ = writeln!(out);
    for s in 0..ns {
        for a in 0..na {
            let r = p.rewards()[[s, a]].as_f64();
            if r != 0.0 {
                let _ = writeln!(
                    out,
                    "R: {} : {} : * : * {}",
                    src.action_names[a],
                    src.state_names[s],
                    fmt_num(r)
                );
            }
        }
    }
    out
}
