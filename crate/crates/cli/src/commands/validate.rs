use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use pomdp_lambda::model::Check;
use pomdp_lambda::{parse_pomdp, CheckResult, PomdpSource, ValidationReport};

use crate::failure::{CmdResult, Failure};
use crate::output::SCHEMA;
use crate::source::InputFile;

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    /// Cassandra-format POMDP file.
    pub path: PathBuf,
    /// Print a JSON report instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Serialize)]
struct Report<'a> {
    schema: &'static str,
    path: &'a PathBuf,
    sha256: &'a str,
    states: usize,
    actions: usize,
    observations: usize,
    passed: bool,
    checks: &'a [CheckResult],
    failures: Vec<String>,
}

/// Names the offending slice of a failed check with the file's symbols.
fn describe(src: &PomdpSource<f64>, c: &CheckResult) -> String {
    let idx = c.index.as_deref().unwrap_or(&[]);
    let state = |i: usize| src.state_names.get(i).map_or("?", String::as_str);
    let action = |i: usize| src.action_names.get(i).map_or("?", String::as_str);
    let obs = |i: usize| src.obs_names.get(i).map_or("?", String::as_str);
    let at = match (c.check, idx) {
        (Check::TransitionRowSums, &[s, a]) => {
            format!("T(. | state {}, action {})", state(s), action(a))
        }
        (Check::TransitionsNonnegative, &[s, a, s2]) => {
            format!(
                "T({} | state {}, action {})",
                state(s2),
                state(s),
                action(a)
            )
        }
        (Check::ObservationRowSums, &[s]) => format!("O(. | state {})", state(s)),
        (Check::ObservationsNonnegative, &[s, o]) => {
            format!("O({} | state {})", obs(o), state(s))
        }
        (Check::TerminalRewardsZero, &[s, a]) => {
            format!("R(state {}, action {})", state(s), action(a))
        }
        (Check::StartDistribution, &[s]) => format!("start({})", state(s)),
        _ => String::new(),
    };
    let detail = c.detail.as_deref().unwrap_or("");
    if at.is_empty() {
        format!("{}: {detail}", c.check)
    } else {
        format!("{}: {at}: {detail}", c.check)
    }
}

pub fn run(args: &ValidateArgs) -> CmdResult {
    let (text, input) = InputFile::read(&args.path)?;
    let src = parse_pomdp::<f64>(&text)
        .map_err(|e| Failure::Usage(anyhow::anyhow!("{}: {e}", args.path.display())))?;
    let report: ValidationReport = src.pomdp.validate();
    let failures: Vec<String> = report.failures().map(|c| describe(&src, c)).collect();
    let p = &src.pomdp;
    if args.json {
        let out = Report {
            schema: SCHEMA,
            path: &args.path,
            sha256: &input.sha256,
            states: p.n_states(),
            actions: p.n_actions(),
            observations: p.n_obs(),
            passed: report.passed(),
            checks: &report.checks,
            failures: failures.clone(),
        };
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        println!(
            "{}: {} states, {} actions, {} observations, gamma {}",
            args.path.display(),
            p.n_states(),
            p.n_actions(),
            p.n_obs(),
            p.gamma()
        );
        print!("{report}");
        for f in &failures {
            println!("failure: {f}");
        }
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::domain(format!(
            "{} failed {} check(s)",
            args.path.display(),
            failures.len()
        )))
    }
}
