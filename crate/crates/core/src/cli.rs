//! Command-line front end.
//!
//! Exit codes: 0 success, 1 knowledge-base error, 2 fitting or evidence
//! failure on a valid knowledge base, 3 usage or flag error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use crate::error::Error;
use crate::inference::{posterior, posterior_independent, Evidence, Finding, QueryResult};
use crate::ipf::{ipf_adjust, IpfConfig, IpfReport, MarginalTargets};
use crate::kbio::{parse_kb, to_table, Diagnostic};
use crate::table::{Assignment, JointTable};

pub const EXIT_OK: i32 = 0;
pub const EXIT_KB: i32 = 1;
pub const EXIT_FIT: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "oddsinfer", version, about = "Contingency-table inference with soft evidence")]
struct Cli {
    /// Emit a JSON object instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Convergence tolerance on the largest marginal residual.
    #[arg(long)]
    tol: Option<f64>,
    /// Maximum number of fitting cycles.
    #[arg(long = "max-cycles")]
    max_cycles: Option<usize>,
}

impl FitArgs {
    fn config(&self) -> IpfConfig {
        let default = IpfConfig::default();
        IpfConfig {
            tolerance: self.tol.unwrap_or(default.tolerance),
            max_cycles: self.max_cycles.unwrap_or(default.max_cycles),
        }
    }
}

#[derive(Debug, Args)]
struct EvidenceArgs {
    /// Known state, as `var=state`. Repeatable.
    #[arg(long = "hard", value_name = "VAR=STATE")]
    hard: Vec<String>,
    /// New distribution, as `var=state:p,state:p,...` listing every state. Repeatable.
    #[arg(long = "soft", value_name = "VAR=STATE:P,...")]
    soft: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a knowledge base and report its size and mass.
    Validate { kb: PathBuf },
    /// Sum the table onto a subset of variables.
    Marginalize {
        kb: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        vars: Vec<String>,
    },
    /// Condition the table on known states.
    Condition {
        kb: PathBuf,
        #[arg(long = "hard", value_name = "VAR=STATE", required = true)]
        hard: Vec<String>,
    },
    /// Pairwise (reference-cell) or three-way odds ratios.
    #[command(name = "odds-ratio")]
    OddsRatio {
        kb: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1.., required_unless_present = "three_way", conflicts_with = "three_way")]
        vars: Option<Vec<String>>,
        #[arg(long = "three-way", value_delimiter = ',', num_args = 1..)]
        three_way: Option<Vec<String>>,
    },
    /// Refit a subtable to new one-variable marginals.
    Ipf {
        kb: PathBuf,
        /// Subtable variables; defaults to the soft-evidence variables.
        #[arg(long, value_delimiter = ',')]
        vars: Option<Vec<String>>,
        #[command(flatten)]
        evidence: EvidenceArgs,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Posterior distribution of a target variable.
    Query {
        kb: PathBuf,
        #[arg(long)]
        target: String,
        #[command(flatten)]
        evidence: EvidenceArgs,
        /// Combine soft evidence as if independent.
        #[arg(long)]
        independent: bool,
        #[command(flatten)]
        fit: FitArgs,
    },
}

/// A failed command: exit code plus a message for the error stream.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::TooFewStates(_)
            | Error::DuplicateName(_)
            | Error::DuplicateState { .. }
            | Error::WrongCellCount { .. }
            | Error::NegativeCell { .. }
            | Error::MassOutOfTolerance { .. } => EXIT_KB,
            Error::ZeroProbabilityEvidence
            | Error::ZeroCell { .. }
            | Error::TargetUnreachable { .. }
            | Error::NotConverged(_)
            | Error::UndefinedConditional(_) => EXIT_FIT,
            Error::UnknownVariable(_)
            | Error::UnknownState { .. }
            | Error::IncompleteAssignment(_)
            | Error::EmptyKeepSet
            | Error::RepeatedVariable(_)
            | Error::NotTwoByTwo
            | Error::NotTwoCubed
            | Error::InvalidTargets(_)
            | Error::InvalidConfig(_)
            | Error::TargetInEvidence(_)
            | Error::NoSoftEvidence
            | Error::InvalidEvidence { .. } => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

struct Session<'a> {
    json: bool,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    diagnostics: Vec<Diagnostic>,
}

/// Runs the command line `argv` (program name first), writing results to
/// `out` and diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(rendered.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(rendered.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    let mut session = Session {
        json: cli.json,
        out,
        err,
        diagnostics: Vec::new(),
    };
    match session.dispatch(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(session.err, "error: {}", f.message);
            f.code
        }
    }
}

fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

fn diagnostic_json(d: &Diagnostic) -> Value {
    json!({
        "severity": d.severity.as_str(),
        "line": d.line,
        "message": d.message,
    })
}

fn report_json(r: &IpfReport) -> Value {
    json!({
        "converged": r.converged,
        "cycles_used": r.cycles_used,
        "max_residual": r.max_residual,
    })
}

fn table_json(t: &JointTable) -> Value {
    let variables: Vec<Value> = t
        .variables()
        .iter()
        .map(|v| json!({ "name": v.name(), "states": v.states() }))
        .collect();
    let cells: Vec<Value> = t
        .cells()
        .iter()
        .enumerate()
        .map(|(flat, &p)| {
            let cell = t.assignment_at(flat);
            let assignment: Map<String, Value> = t
                .variables()
                .iter()
                .map(|v| (v.name().to_string(), json!(cell.get(v.name()))))
                .collect();
            json!({ "assignment": assignment, "p": p })
        })
        .collect();
    json!({ "variables": variables, "cells": cells })
}

fn report_lines(r: &IpfReport) -> String {
    format!(
        "converged: {}\ncycles: {}\nmax-residual: {}\n",
        r.converged,
        r.cycles_used,
        fmt6(r.max_residual)
    )
}

fn parse_hard(flag: &str) -> Result<(String, String), Failure> {
    match flag.split_once('=') {
        Some((var, state)) if !var.is_empty() && !state.is_empty() => Ok((var.to_string(), state.to_string())),
        _ => Err(Failure::usage(format!("--hard expects VAR=STATE, got '{flag}'"))),
    }
}

/// Parses `var=state:p,state:p,...` into a distribution in declared state order.
fn parse_soft(flag: &str, table: &JointTable) -> Result<(String, Vec<f64>), Failure> {
    let bad = |why: &str| Failure::usage(format!("--soft '{flag}': {why}"));
    let (var, body) = flag
        .split_once('=')
        .ok_or_else(|| bad("expected VAR=STATE:P,..."))?;
    let spec = table.variable(var)?;
    let mut dist = vec![None; spec.cardinality()];
    for item in body.split(',') {
        let (state, p) = item
            .split_once(':')
            .ok_or_else(|| bad(&format!("expected STATE:P, got '{item}'")))?;
        let s = spec.state_index(state)?;
        let p: f64 = p
            .trim()
            .parse()
            .ok()
            .filter(|p: &f64| p.is_finite())
            .ok_or_else(|| bad(&format!("'{p}' is not a probability")))?;
        if dist[s].replace(p).is_some() {
            return Err(bad(&format!("state '{state}' listed twice")));
        }
    }
    let dist: Vec<f64> = dist
        .into_iter()
        .zip(spec.states())
        .map(|(p, s)| p.ok_or_else(|| bad(&format!("state '{s}' missing"))))
        .collect::<Result<_, _>>()?;
    let sum: f64 = dist.iter().sum();
    if (sum - 1.0).abs() > crate::ipf::TARGET_SUM_TOLERANCE {
        return Err(bad(&format!("probabilities sum to {sum}, not 1")));
    }
    Ok((var.to_string(), dist))
}

fn parse_evidence(args: &EvidenceArgs, table: &JointTable) -> Result<Evidence, Failure> {
    let mut ev = Evidence::new();
    for flag in &args.hard {
        let (var, state) = parse_hard(flag)?;
        ev.insert(var, Finding::Hard(state))?;
    }
    for flag in &args.soft {
        let (var, dist) = parse_soft(flag, table)?;
        ev.insert(var, Finding::Soft(dist))?;
    }
    Ok(ev)
}

impl Session<'_> {
    fn dispatch(&mut self, command: &Command) -> CmdResult {
        match command {
            Command::Validate { kb } => self.validate(kb),
            Command::Marginalize { kb, vars } => {
                let t = self.load(kb)?;
                let names: Vec<&str> = vars.iter().map(String::as_str).collect();
                let m = t.marginalize(&names)?;
                self.emit_table(&m)
            }
            Command::Condition { kb, hard } => {
                let t = self.load(kb)?;
                let mut assignment = Assignment::new();
                for flag in hard {
                    let (var, state) = parse_hard(flag)?;
                    if assignment.insert(var.clone(), state).is_some() {
                        return Err(Error::RepeatedVariable(var).into());
                    }
                }
                let c = t.condition(&assignment)?;
                self.emit_table(&c)
            }
            Command::OddsRatio { kb, vars, three_way } => {
                let t = self.load(kb)?;
                match (vars, three_way) {
                    (Some(vars), _) => self.pairwise(&t, vars),
                    (None, Some(vars)) => self.three_way(&t, vars),
                    (None, None) => Err(Failure::usage("odds-ratio needs --vars or --three-way")),
                }
            }
            Command::Ipf { kb, vars, evidence, fit } => {
                let t = self.load(kb)?;
                self.ipf(&t, vars.as_deref(), evidence, &fit.config())
            }
            Command::Query {
                kb,
                target,
                evidence,
                independent,
                fit,
            } => {
                let t = self.load(kb)?;
                let ev = parse_evidence(evidence, &t)?;
                let result = if *independent {
                    posterior_independent(&t, &ev, target)
                } else {
                    posterior(&t, &ev, target, &fit.config())
                };
                match result {
                    Ok(r) => self.emit_query(&r),
                    Err(Error::NotConverged(partial)) => {
                        if let Some(q) = &partial.query {
                            self.emit_query(q)?;
                        }
                        Err(Error::NotConverged(partial).into())
                    }
                    Err(e) => Err(e.into()),
                }
            }
        }
    }

    fn write(&mut self, text: &str) -> CmdResult {
        self.out.write_all(text.as_bytes()).map_err(|e| Failure {
            code: EXIT_USAGE,
            message: format!("cannot write output: {e}"),
        })
    }

    fn emit_json(&mut self, mut value: Value) -> CmdResult {
        let diags: Vec<Value> = self.diagnostics.iter().map(diagnostic_json).collect();
        value["diagnostics"] = Value::Array(diags);
        let text = serde_json::to_string_pretty(&value).expect("json value") + "\n";
        self.write(&text)
    }

    /// Reads and validates a knowledge base. Warnings go to the error stream
    /// (and into JSON output); errors abort with exit code 1.
    fn load_document(&mut self, path: &Path) -> Result<(crate::kbio::KbDocument, JointTable), Failure> {
        let text = fs::read_to_string(path).map_err(|e| Failure {
            code: EXIT_KB,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        let (doc, diags) = parse_kb(&text);
        for d in &diags {
            let _ = writeln!(self.err, "{}:{}: {}: {}", path.display(), d.line, d.severity.as_str(), d.message);
        }
        let errors = diags.iter().filter(|d| d.is_error()).count();
        self.diagnostics = diags;
        if errors > 0 {
            return Err(Failure {
                code: EXIT_KB,
                message: format!("{}: {errors} error(s)", path.display()),
            });
        }
        let table = to_table(&doc).map_err(|e| Failure {
            code: EXIT_KB,
            message: format!("{}: {e}", path.display()),
        })?;
        Ok((doc, table))
    }

    fn load(&mut self, path: &Path) -> Result<JointTable, Failure> {
        self.load_document(path).map(|(_, t)| t)
    }

    fn validate(&mut self, path: &Path) -> CmdResult {
        let (doc, table) = self.load_document(path)?;
        let (vars, cells, mass) = (doc.variables.len(), table.cells().len(), doc.mass());
        if self.json {
            self.emit_json(json!({
                "ok": true,
                "variables": vars,
                "cells": cells,
                "mass": mass,
                "scale_factor": table.scale_factor(),
            }))
        } else {
            self.write(&format!("ok: {vars} variables, {cells} cells, mass {}\n", fmt6(mass)))
        }
    }

    fn emit_table(&mut self, t: &JointTable) -> CmdResult {
        if self.json {
            self.emit_json(table_json(t))
        } else {
            self.write(&t.to_string())
        }
    }

    fn pairwise(&mut self, t: &JointTable, vars: &[String]) -> CmdResult {
        let [a, b] = vars else {
            return Err(Failure::usage("--vars expects exactly two variables"));
        };
        let ratios = t.local_odds_ratios(a, b)?;
        let (sa, sb) = (t.variable(a)?.states(), t.variable(b)?.states());
        let mut text = String::new();
        let mut entries = Vec::new();
        for (i, row) in ratios.iter().enumerate() {
            for (j, &r) in row.iter().enumerate() {
                text.push_str(&format!(
                    "odds-ratio ({a} {} vs {}) x ({b} {} vs {}): {}\n",
                    sa[i + 1],
                    sa[0],
                    sb[j + 1],
                    sb[0],
                    fmt6(r)
                ));
                entries.push(json!({
                    "row": a, "row_state": sa[i + 1], "row_reference": sa[0],
                    "col": b, "col_state": sb[j + 1], "col_reference": sb[0],
                    "value": r,
                }));
            }
        }
        if self.json {
            self.emit_json(json!({ "odds_ratios": entries }))
        } else {
            self.write(&text)
        }
    }

    fn three_way(&mut self, t: &JointTable, vars: &[String]) -> CmdResult {
        if vars.len() != 3 {
            return Err(Failure::usage("--three-way expects exactly three variables"));
        }
        let names: Vec<&str> = vars.iter().map(String::as_str).collect();
        let sub = t.marginalize(&names)?.reorder(&names)?;
        let threeway = sub.threeway_odds_ratio()?;
        let layered = sub.layered_cross_ratio_product()?;
        let label = names.join(",");
        if self.json {
            self.emit_json(json!({
                "variables": names,
                "three_way": threeway,
                "layered_product": layered,
            }))
        } else {
            self.write(&format!(
                "three-way odds-ratio {label}: {}\nlayered product {label}: {}\n",
                fmt6(threeway),
                fmt6(layered)
            ))
        }
    }

    fn ipf(&mut self, t: &JointTable, vars: Option<&[String]>, evidence: &EvidenceArgs, config: &IpfConfig) -> CmdResult {
        let ev = parse_evidence(evidence, t)?;
        let mut hard = Assignment::new();
        let mut targets = MarginalTargets::new();
        for (name, finding) in ev.iter() {
            match finding {
                Finding::Hard(state) => {
                    hard.insert(name, state.clone());
                }
                Finding::Soft(dist) => {
                    targets.insert(name, dist.clone());
                }
                Finding::Unknown => {}
            }
        }
        if targets.is_empty() {
            return Err(Error::NoSoftEvidence.into());
        }
        let keep: Vec<String> = match vars {
            Some(v) => v.to_vec(),
            None => t
                .variables()
                .iter()
                .map(|v| v.name().to_string())
                .filter(|n| targets.get(n).is_some())
                .collect(),
        };
        if let Some((name, _)) = targets.iter().find(|(n, _)| !keep.iter().any(|k| k == n)) {
            return Err(Failure::usage(format!("soft variable '{name}' is not in --vars")));
        }
        if let Some((name, _)) = hard.iter().find(|(n, _)| keep.iter().any(|k| k == n)) {
            return Err(Failure::usage(format!("hard variable '{name}' cannot be in --vars")));
        }
        let keep: Vec<&str> = keep.iter().map(String::as_str).collect();
        let sub = t.condition(&hard)?.marginalize(&keep)?;
        match ipf_adjust(&sub, &targets, config) {
            Ok((fitted, report)) => self.emit_fit(&fitted, &report),
            Err(Error::NotConverged(partial)) => {
                self.emit_fit(&partial.table, &partial.report)?;
                Err(Error::NotConverged(partial).into())
            }
            Err(e) => Err(e.into()),
        }
    }

    fn emit_fit(&mut self, fitted: &JointTable, report: &IpfReport) -> CmdResult {
        if self.json {
            let mut value = table_json(fitted);
            value["ipf"] = report_json(report);
            self.emit_json(value)
        } else {
            self.write(&(fitted.to_string() + &report_lines(report)))
        }
    }

    fn emit_query(&mut self, r: &QueryResult) -> CmdResult {
        if self.json {
            let posterior: Map<String, Value> = r
                .states
                .iter()
                .zip(&r.posterior)
                .map(|(s, p)| (s.clone(), json!(p)))
                .collect();
            let mut value = json!({
                "target": r.target,
                "method": r.method.as_str(),
                "posterior": posterior,
            });
            if let Some(report) = &r.ipf {
                value["ipf"] = report_json(report);
            }
            self.emit_json(value)
        } else {
            let parts: Vec<String> = r
                .states
                .iter()
                .zip(&r.posterior)
                .map(|(s, p)| format!("{s} {}", fmt6(*p)))
                .collect();
            let mut text = format!("{}: {}\nmethod: {}\n", r.target, parts.join("  "), r.method);
            if let Some(report) = &r.ipf {
                text.push_str(&report_lines(report));
            }
            self.write(&text)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> JointTable {
        crate::table::fixtures::reference_table()
    }

    #[test]
    fn soft_flag_grammar() {
        let (var, dist) = parse_soft("e1=true:0.7,false:0.3", &table()).ok().unwrap();
        assert_eq!(var, "e1");
        assert_eq!(dist, vec![0.3, 0.7]);
        for bad in [
            "e1=false:0.3",
            "e1=false:0.3,true:0.6",
            "e1=false:0.3,false:0.7",
            "e1=false0.3,true:0.7",
            "e1",
            "e1=false:x,true:0.7",
            "e1=maybe:0.3,true:0.7",
            "zz=false:0.3,true:0.7",
        ] {
            let f = parse_soft(bad, &table()).err().unwrap_or_else(|| panic!("{bad}"));
            assert_eq!(f.code, EXIT_USAGE, "{bad}: {}", f.message);
        }
    }

    #[test]
    fn hard_flag_grammar() {
        assert_eq!(parse_hard("e1=true").ok().unwrap(), ("e1".into(), "true".into()));
        assert!(parse_hard("e1").is_err());
        assert!(parse_hard("=true").is_err());
    }

    #[test]
    fn error_codes() {
        let f: Failure = Error::ZeroProbabilityEvidence.into();
        assert_eq!(f.code, EXIT_FIT);
        let f: Failure = Error::MassOutOfTolerance { mass: 0.5 }.into();
        assert_eq!(f.code, EXIT_KB);
        let f: Failure = Error::TargetInEvidence("c".into()).into();
        assert_eq!(f.code, EXIT_USAGE);
    }

    #[test]
    fn usage_errors_exit_three() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_eq!(run(["oddsinfer", "frobnicate"], &mut out, &mut err), EXIT_USAGE);
        assert!(!err.is_empty());
        let mut out = Vec::new();
        assert_eq!(run(["oddsinfer", "--help"], &mut out, &mut err), EXIT_OK);
        assert!(String::from_utf8(out).unwrap().contains("query"));
    }
}
