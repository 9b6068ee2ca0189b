//! Posterior queries under hard, soft and absent evidence.
//!
//! Hard findings condition the table exactly. Soft findings replace the
//! marginals of their variables: the evidence subtable is refitted to the
//! new marginals with [`ipf_adjust`], and the posterior is the mixture
//! `sum_x P(target | x) P'(x)` over soft-variable configurations `x`, with
//! the conditionals taken from the (hard-conditioned) original table.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, NotConverged, Result};
use crate::ipf::{check_distribution, ipf_adjust, IpfConfig, IpfReport, MarginalTargets};
use crate::table::{for_each_cell, strides, Assignment, JointTable};

/// What is known about one variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Finding {
    /// The variable is known to be in this state.
    Hard(String),
    /// New probabilities for each state, in declared state order.
    Soft(Vec<f64>),
    Unknown,
}

/// Findings keyed by variable name. Variables not present are unknown.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Evidence(BTreeMap<String, Finding>);

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds (or replaces) a hard finding.
    pub fn hard(mut self, variable: impl Into<String>, state: impl Into<String>) -> Self {
        self.0.insert(variable.into(), Finding::Hard(state.into()));
        self
    }

    /// Adds (or replaces) a soft finding.
    pub fn soft(mut self, variable: impl Into<String>, dist: Vec<f64>) -> Self {
        self.0.insert(variable.into(), Finding::Soft(dist));
        self
    }

    /// Adds a finding, refusing a second finding for the same variable.
    pub fn insert(&mut self, variable: impl Into<String>, finding: Finding) -> Result<()> {
        let variable = variable.into();
        if self.0.contains_key(&variable) {
            return Err(Error::RepeatedVariable(variable));
        }
        self.0.insert(variable, finding);
        Ok(())
    }

    pub fn get(&self, variable: &str) -> Option<&Finding> {
        self.0.get(variable)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Finding)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// How a posterior was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Soft evidence propagated by odds-ratio-preserving fitting.
    OddsRatio,
    /// Soft evidence combined as if the evidence variables were independent.
    Independence,
    /// Only hard evidence; exact conditioning.
    HardOnly,
    /// No evidence; the target's marginal.
    Prior,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::OddsRatio => "odds-ratio",
            Method::Independence => "independence",
            Method::HardOnly => "hard-only",
            Method::Prior => "prior",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub target: String,
    pub states: Vec<String>,
    /// One probability per state of the target, in declared order.
    pub posterior: Vec<f64>,
    pub ipf: Option<IpfReport>,
    pub method: Method,
}

/// Evidence checked against a table, with degenerate soft findings turned hard.
struct Prepared {
    hard: Assignment,
    soft: MarginalTargets,
    /// Soft variable names in table order.
    soft_names: Vec<String>,
}

fn prepare(t: &JointTable, ev: &Evidence, target: Option<&str>) -> Result<Prepared> {
    if let Some(target) = target {
        t.position(target)?;
    }
    let mut hard = Assignment::new();
    let mut soft = MarginalTargets::new();
    for (name, finding) in ev.iter() {
        let var = t.variable(name)?;
        if target == Some(name) && *finding != Finding::Unknown {
            return Err(Error::TargetInEvidence(name.to_string()));
        }
        match finding {
            Finding::Unknown => {}
            Finding::Hard(state) => {
                var.state_index(state)?;
                hard.insert(name, state.clone());
            }
            Finding::Soft(dist) => {
                check_distribution(dist, var.cardinality()).map_err(|reason| {
                    Error::InvalidEvidence {
                        variable: name.to_string(),
                        reason,
                    }
                })?;
                let mut support = dist.iter().enumerate().filter(|(_, p)| **p > 0.0);
                match (support.next(), support.next()) {
                    (Some((s, _)), None) => {
                        hard.insert(name, var.states()[s].clone());
                    }
                    _ => {
                        soft.insert(name, dist.clone());
                    }
                }
            }
        }
    }
    let soft_names = t
        .variables()
        .iter()
        .map(|v| v.name().to_string())
        .filter(|n| soft.get(n).is_some())
        .collect();
    Ok(Prepared {
        hard,
        soft,
        soft_names,
    })
}

/// The table over the soft-evidence variables after conditioning on the
/// hard findings. This is the table that gets refitted to the soft marginals.
pub fn evidence_subtable(t: &JointTable, ev: &Evidence) -> Result<JointTable> {
    let prepared = prepare(t, ev, None)?;
    if prepared.soft_names.is_empty() {
        return Err(Error::NoSoftEvidence);
    }
    let names: Vec<&str> = prepared.soft_names.iter().map(String::as_str).collect();
    t.condition(&prepared.hard)?.marginalize(&names)
}

/// Shared front half of both soft-evidence methods.
enum Stage {
    Done(QueryResult),
    Mix {
        /// Conditioned table over soft variables and the target.
        joint: JointTable,
        /// `joint` with the target summed out.
        sub: JointTable,
        soft: MarginalTargets,
    },
}

fn stage(t: &JointTable, ev: &Evidence, target: &str) -> Result<Stage> {
    let prepared = prepare(t, ev, Some(target))?;
    let cond = t.condition(&prepared.hard)?;
    let states = t.variable(target)?.states().to_vec();
    if prepared.soft_names.is_empty() {
        let method = if prepared.hard.is_empty() {
            Method::Prior
        } else {
            Method::HardOnly
        };
        return Ok(Stage::Done(QueryResult {
            target: target.to_string(),
            states,
            posterior: cond.marginal_dist(target)?,
            ipf: None,
            method,
        }));
    }
    let soft: Vec<&str> = prepared.soft_names.iter().map(String::as_str).collect();
    let mut keep = soft.clone();
    keep.push(target);
    let joint = cond.marginalize(&keep)?;
    let sub = joint.marginalize(&soft)?;
    Ok(Stage::Mix {
        joint,
        sub,
        soft: prepared.soft,
    })
}

/// `sum_x P(target | x) * weights[x]` where `weights` shares `sub`'s layout.
fn mixture(joint: &JointTable, sub: &JointTable, weights: &[f64], target: &str) -> Result<Vec<f64>> {
    let tpos = joint.position(target)?;
    let sub_strides = strides(&sub.cardinalities());
    let mut out = vec![0.0; joint.variables()[tpos].cardinality()];
    let mut failure = None;
    for_each_cell(&joint.cardinalities(), |flat, coord| {
        let x: usize = coord
            .iter()
            .enumerate()
            .filter(|(axis, _)| *axis != tpos)
            .zip(&sub_strides)
            .map(|((_, c), s)| c * s)
            .sum();
        let (px, w) = (sub.cells()[x], weights[x]);
        if px > 0.0 {
            out[coord[tpos]] += joint.cells()[flat] / px * w;
        } else if w > 0.0 && failure.is_none() {
            failure = Some(x);
        }
    });
    if let Some(x) = failure {
        let cell = sub.assignment_at(x);
        let label: Vec<String> = cell.iter().map(|(k, v)| format!("{k}={v}")).collect();
        return Err(Error::UndefinedConditional(label.join(",")));
    }
    Ok(out)
}

/// Posterior over `target` given `ev`, propagating soft evidence by
/// odds-ratio-preserving refitting of the evidence subtable.
///
/// When fitting runs out of cycles the error carries the posterior computed
/// from the partially fitted subtable.
pub fn posterior(t: &JointTable, ev: &Evidence, target: &str, config: &IpfConfig) -> Result<QueryResult> {
    let (joint, sub, soft) = match stage(t, ev, target)? {
        Stage::Done(result) => return Ok(result),
        Stage::Mix { joint, sub, soft } => (joint, sub, soft),
    };
    let result = |fitted: &JointTable, report: IpfReport| -> Result<QueryResult> {
        Ok(QueryResult {
            target: target.to_string(),
            states: t.variable(target)?.states().to_vec(),
            posterior: mixture(&joint, &sub, fitted.cells(), target)?,
            ipf: Some(report),
            method: Method::OddsRatio,
        })
    };
    match ipf_adjust(&sub, &soft, config) {
        Ok((fitted, report)) => result(&fitted, report),
        Err(Error::NotConverged(partial)) => {
            let query = result(&partial.table, partial.report).ok();
            Err(Error::NotConverged(Box::new(NotConverged { query, ..*partial })))
        }
        Err(e) => Err(e),
    }
}

/// Posterior using the product of the soft marginals as the new joint
/// evidence distribution, ignoring any association among the evidence.
pub fn posterior_independent(t: &JointTable, ev: &Evidence, target: &str) -> Result<QueryResult> {
    let (joint, sub, soft) = match stage(t, ev, target)? {
        Stage::Done(result) => return Ok(result),
        Stage::Mix { joint, sub, soft } => (joint, sub, soft),
    };
    let dists: Vec<&[f64]> = sub
        .variables()
        .iter()
        .map(|v| soft.get(v.name()).expect("soft variable"))
        .collect();
    let mut weights = Vec::with_capacity(sub.cells().len());
    for_each_cell(&sub.cardinalities(), |_, coord| {
        weights.push(coord.iter().zip(&dists).map(|(&s, d)| d[s]).product::<f64>());
    });
    Ok(QueryResult {
        target: target.to_string(),
        states: t.variable(target)?.states().to_vec(),
        posterior: mixture(&joint, &sub, &weights, target)?,
        ipf: None,
        method: Method::Independence,
    })
}
