//! Iterative proportional fitting of one-variable marginals.
//!
//! Each pass multiplies every cell by the ratio of desired to current
//! marginal probability for its state of one constrained variable.
//! Scaling whole slices leaves every cross-product ratio of the starting
//! table untouched, so the fitted table carries the same associations
//! with new margins.

use std::collections::BTreeMap;

use crate::error::{Error, NotConverged, Result};
use crate::table::{strides, JointTable};

/// Accepted deviation of a target distribution's sum from 1.
pub const TARGET_SUM_TOLERANCE: f64 = 1e-9;

/// New marginal distributions keyed by variable name, one entry per state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MarginalTargets(BTreeMap<String, Vec<f64>>);

impl MarginalTargets {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, variable: impl Into<String>, dist: Vec<f64>) -> Self {
        self.insert(variable, dist);
        self
    }

    pub fn insert(&mut self, variable: impl Into<String>, dist: Vec<f64>) -> Option<Vec<f64>> {
        self.0.insert(variable.into(), dist)
    }

    pub fn get(&self, variable: &str) -> Option<&[f64]> {
        self.0.get(variable).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Checks the targets against `table` and returns them as
    /// `(axis, distribution)` in the table's declared variable order.
    fn resolve<'a>(&'a self, table: &JointTable) -> Result<Vec<(usize, &'a [f64])>> {
        if self.0.is_empty() {
            return Err(Error::InvalidTargets("no targets given".into()));
        }
        let mut out = Vec::with_capacity(self.0.len());
        for (name, dist) in &self.0 {
            let axis = table.position(name)?;
            let card = table.variables()[axis].cardinality();
            check_distribution(dist, card).map_err(|reason| {
                Error::InvalidTargets(format!("'{name}': {reason}"))
            })?;
            out.push((axis, dist.as_slice()));
        }
        out.sort_by_key(|&(axis, _)| axis);
        Ok(out)
    }
}

/// Validates a probability vector over `card` states.
pub(crate) fn check_distribution(dist: &[f64], card: usize) -> std::result::Result<(), String> {
    if dist.len() != card {
        return Err(format!("expected {card} probabilities, got {}", dist.len()));
    }
    if let Some(p) = dist.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(format!("probability {p} outside [0, 1]"));
    }
    let sum: f64 = dist.iter().sum();
    if (sum - 1.0).abs() > TARGET_SUM_TOLERANCE {
        return Err(format!("probabilities sum to {sum}, not 1"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpfConfig {
    /// Largest tolerated |target - achieved| over all constrained marginal entries.
    pub tolerance: f64,
    /// Full passes over all constrained variables before giving up.
    pub max_cycles: usize,
}

impl Default for IpfConfig {
    fn default() -> Self {
        IpfConfig {
            tolerance: 1e-10,
            max_cycles: 10_000,
        }
    }
}

impl IpfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_cycles == 0 {
            return Err(Error::InvalidConfig("max_cycles must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpfReport {
    pub converged: bool,
    pub cycles_used: usize,
    pub max_residual: f64,
}

struct Axis {
    stride: usize,
    card: usize,
}

impl Axis {
    fn of(table: &JointTable, axis: usize) -> Self {
        let cards = table.cardinalities();
        Axis {
            stride: strides(&cards)[axis],
            card: cards[axis],
        }
    }

    #[inline]
    fn state(&self, flat: usize) -> usize {
        (flat / self.stride) % self.card
    }

    fn marginal(&self, cells: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.card];
        for (flat, c) in cells.iter().enumerate() {
            out[self.state(flat)] += c;
        }
        out
    }
}

fn unreachable(table: &JointTable, axis: usize, state: usize) -> Error {
    let v = &table.variables()[axis];
    Error::TargetUnreachable {
        variable: v.name().to_string(),
        state: v.states()[state].clone(),
    }
}

/// Rescales `cells` so that `axis` has marginal `target`.
fn scale_to(table: &JointTable, cells: &mut [f64], axis: usize, target: &[f64]) -> Result<()> {
    let ax = Axis::of(table, axis);
    let current = ax.marginal(cells);
    let mut factors = Vec::with_capacity(ax.card);
    for (s, (&want, &have)) in target.iter().zip(&current).enumerate() {
        if have > 0.0 {
            factors.push(want / have);
        } else if want > 0.0 {
            return Err(unreachable(table, axis, s));
        } else {
            factors.push(0.0);
        }
    }
    for (flat, c) in cells.iter_mut().enumerate() {
        *c *= factors[ax.state(flat)];
    }
    Ok(())
}

fn residual_of(table: &JointTable, cells: &[f64], resolved: &[(usize, &[f64])]) -> f64 {
    resolved
        .iter()
        .flat_map(|&(axis, target)| {
            Axis::of(table, axis)
                .marginal(cells)
                .into_iter()
                .zip(target)
                .map(|(have, want)| (have - want).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

/// Largest |target - achieved| over every constrained marginal entry of `table`.
pub fn max_residual(table: &JointTable, targets: &MarginalTargets) -> Result<f64> {
    let resolved = targets.resolve(table)?;
    Ok(residual_of(table, table.cells(), &resolved))
}

/// One full pass: scale to each constrained variable's target in declared
/// table order.
pub fn fit_cycle(current: &JointTable, targets: &MarginalTargets) -> Result<JointTable> {
    let resolved = targets.resolve(current)?;
    let mut cells = current.cells().to_vec();
    for &(axis, target) in &resolved {
        scale_to(current, &mut cells, axis, target)?;
    }
    Ok(JointTable::from_parts(current.variables().to_vec(), cells))
}

/// Fits `start` to the target marginals while preserving its odds ratios.
///
/// Exhausting `max_cycles` yields [`Error::NotConverged`] carrying the
/// partially fitted table and its report. A positive target on a state
/// whose cells are all zero is reported as [`Error::TargetUnreachable`]
/// before any iteration.
pub fn ipf_adjust(
    start: &JointTable,
    targets: &MarginalTargets,
    config: &IpfConfig,
) -> Result<(JointTable, IpfReport)> {
    config.validate()?;
    let resolved = targets.resolve(start)?;
    let mass = start.mass();
    if (mass - 1.0).abs() > crate::table::MASS_TOLERANCE {
        return Err(Error::MassOutOfTolerance { mass });
    }
    for &(axis, target) in &resolved {
        let current = Axis::of(start, axis).marginal(start.cells());
        if let Some(s) = (0..target.len()).find(|&s| current[s] <= 0.0 && target[s] > 0.0) {
            return Err(unreachable(start, axis, s));
        }
    }

    let mut cells = start.cells().to_vec();
    let mut report = IpfReport {
        converged: false,
        cycles_used: 0,
        max_residual: f64::INFINITY,
    };
    while report.cycles_used < config.max_cycles {
        for &(axis, target) in &resolved {
            scale_to(start, &mut cells, axis, target)?;
        }
        report.cycles_used += 1;
        report.max_residual = residual_of(start, &cells, &resolved);
        if report.max_residual <= config.tolerance {
            report.converged = true;
            break;
        }
    }
    let fitted = JointTable::from_parts(start.variables().to_vec(), cells);
    if report.converged {
        Ok((fitted, report))
    } else {
        Err(Error::NotConverged(Box::new(NotConverged {
            table: fitted,
            report,
            query: None,
        })))
    }
}
