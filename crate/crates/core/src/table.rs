//! Dense joint probability tables over discrete variables.
//!
//! Cells are stored row-major in declared variable order with the last
//! variable varying fastest. Every table is immutable once built; the
//! operations here return new tables.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};

/// Accepted deviation of a freshly supplied table's mass from 1.
pub const MASS_TOLERANCE: f64 = 1e-6;

/// A named discrete variable with an ordered list of state labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableSpec {
    name: String,
    states: Vec<String>,
}

impl VariableSpec {
    pub fn new<N, S, I>(name: N, states: I) -> Result<Self>
    where
        N: Into<String>,
        S: Into<String>,
        I: IntoIterator<Item = S>,
    {
        let name = name.into();
        let states: Vec<String> = states.into_iter().map(Into::into).collect();
        if states.len() < 2 {
            return Err(Error::TooFewStates(name));
        }
        let mut seen = HashSet::new();
        for s in &states {
            if !seen.insert(s.as_str()) {
                return Err(Error::DuplicateState {
                    variable: name,
                    state: s.clone(),
                });
            }
        }
        Ok(VariableSpec { name, states })
    }

    /// Shorthand for a `false`/`true` variable.
    pub fn binary(name: impl Into<String>) -> Self {
        VariableSpec {
            name: name.into(),
            states: vec!["false".into(), "true".into()],
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, state: &str) -> Result<usize> {
        self.states
            .iter()
            .position(|s| s == state)
            .ok_or_else(|| Error::UnknownState {
                variable: self.name.clone(),
                state: state.to_string(),
            })
    }
}

/// A partial or total map from variable name to state label.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment(BTreeMap<String, String>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, variable: impl Into<String>, state: impl Into<String>) -> Self {
        self.insert(variable, state);
        self
    }

    /// Returns the previous state if the variable was already assigned.
    pub fn insert(&mut self, variable: impl Into<String>, state: impl Into<String>) -> Option<String> {
        self.0.insert(variable.into(), state.into())
    }

    pub fn get(&self, variable: &str) -> Option<&str> {
        self.0.get(variable).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for Assignment {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        Assignment(iter.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
    }
}

/// Calls `f(flat_index, coordinates)` for every cell in row-major order.
pub(crate) fn for_each_cell(cards: &[usize], mut f: impl FnMut(usize, &[usize])) {
    let total: usize = cards.iter().product();
    let mut coord = vec![0usize; cards.len()];
    for flat in 0..total {
        f(flat, &coord);
        for axis in (0..cards.len()).rev() {
            coord[axis] += 1;
            if coord[axis] < cards[axis] {
                break;
            }
            coord[axis] = 0;
        }
    }
}

pub(crate) fn strides(cards: &[usize]) -> Vec<usize> {
    let mut out = vec![1usize; cards.len()];
    for axis in (0..cards.len().saturating_sub(1)).rev() {
        out[axis] = out[axis + 1] * cards[axis + 1];
    }
    out
}

/// Dense joint probability table.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    variables: Vec<VariableSpec>,
    cells: Vec<f64>,
    scale: f64,
}

impl JointTable {
    /// Builds a table from declared variables and row-major cells.
    ///
    /// The cells must be nonnegative and sum to 1 within [`MASS_TOLERANCE`];
    /// they are then rescaled to sum to 1 and the applied factor is kept
    /// as [`JointTable::scale_factor`].
    pub fn new(variables: Vec<VariableSpec>, cells: Vec<f64>) -> Result<Self> {
        let mut names = HashSet::new();
        for v in &variables {
            if !names.insert(v.name()) {
                return Err(Error::DuplicateName(v.name().to_string()));
            }
        }
        let expected: usize = variables.iter().map(VariableSpec::cardinality).product();
        if cells.len() != expected {
            return Err(Error::WrongCellCount {
                expected,
                found: cells.len(),
            });
        }
        if let Some((index, &value)) = cells
            .iter()
            .enumerate()
            .find(|(_, c)| !c.is_finite() || **c < 0.0)
        {
            return Err(Error::NegativeCell { index, value });
        }
        let mass: f64 = cells.iter().sum();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::MassOutOfTolerance { mass });
        }
        let scale = 1.0 / mass;
        let cells = cells.into_iter().map(|c| c * scale).collect();
        Ok(JointTable {
            variables,
            cells,
            scale,
        })
    }

    /// Derived tables skip validation; their mass is whatever the caller computed.
    pub(crate) fn from_parts(variables: Vec<VariableSpec>, cells: Vec<f64>) -> Self {
        debug_assert_eq!(
            cells.len(),
            variables.iter().map(VariableSpec::cardinality).product::<usize>()
        );
        JointTable {
            variables,
            cells,
            scale: 1.0,
        }
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    /// Factor applied to the supplied cells at construction (1 for derived tables).
    pub fn scale_factor(&self) -> f64 {
        self.scale
    }

    pub fn mass(&self) -> f64 {
        self.cells.iter().sum()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(VariableSpec::cardinality).collect()
    }

    pub fn variable(&self, name: &str) -> Result<&VariableSpec> {
        self.position(name).map(|i| &self.variables[i])
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.name() == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Resolves every entry of `assignment` to `(axis, state index)` pairs.
    fn resolve(&self, assignment: &Assignment) -> Result<Vec<(usize, usize)>> {
        assignment
            .iter()
            .map(|(var, state)| {
                let axis = self.position(var)?;
                Ok((axis, self.variables[axis].state_index(state)?))
            })
            .collect()
    }

    /// Flat index of the cell named by a total assignment.
    pub fn index_of(&self, assignment: &Assignment) -> Result<usize> {
        let resolved = self.resolve(assignment)?;
        if let Some(missing) = self
            .variables
            .iter()
            .find(|v| assignment.get(v.name()).is_none())
        {
            return Err(Error::IncompleteAssignment(missing.name().to_string()));
        }
        let strides = strides(&self.cardinalities());
        Ok(resolved.iter().map(|&(axis, s)| strides[axis] * s).sum())
    }

    /// Probability of the event described by a partial assignment.
    pub fn probability(&self, event: &Assignment) -> Result<f64> {
        let resolved = self.resolve(event)?;
        let mut total = 0.0;
        for_each_cell(&self.cardinalities(), |flat, coord| {
            if resolved.iter().all(|&(axis, s)| coord[axis] == s) {
                total += self.cells[flat];
            }
        });
        Ok(total)
    }

    /// Sums out every variable not named in `keep`. Kept variables retain
    /// their order in `self`, whatever order `keep` lists them in.
    pub fn marginalize(&self, keep: &[&str]) -> Result<JointTable> {
        if keep.is_empty() {
            return Err(Error::EmptyKeepSet);
        }
        let mut kept = vec![false; self.variables.len()];
        for name in keep {
            let axis = self.position(name)?;
            if kept[axis] {
                return Err(Error::RepeatedVariable(name.to_string()));
            }
            kept[axis] = true;
        }
        let cards = self.cardinalities();
        let out_vars: Vec<VariableSpec> = self
            .variables
            .iter()
            .zip(&kept)
            .filter(|(_, k)| **k)
            .map(|(v, _)| v.clone())
            .collect();
        let out_cards: Vec<usize> = out_vars.iter().map(VariableSpec::cardinality).collect();
        let out_strides = strides(&out_cards);
        // stride of each input axis in the output layout (0 when summed out)
        let mut axis_stride = vec![0usize; cards.len()];
        let mut k = 0;
        for axis in 0..cards.len() {
            if kept[axis] {
                axis_stride[axis] = out_strides[k];
                k += 1;
            }
        }
        let mut out = vec![0.0; out_cards.iter().product()];
        for_each_cell(&cards, |flat, coord| {
            let target: usize = coord.iter().zip(&axis_stride).map(|(c, s)| c * s).sum();
            out[target] += self.cells[flat];
        });
        Ok(JointTable::from_parts(out_vars, out))
    }

    /// Restricts to the slice consistent with `hard` and renormalizes it.
    ///
    /// The result ranges over the unassigned variables only. Assigning every
    /// variable yields a table with no variables and a single cell of 1.
    pub fn condition(&self, hard: &Assignment) -> Result<JointTable> {
        let resolved = self.resolve(hard)?;
        if resolved.is_empty() {
            return Ok(self.clone());
        }
        let mut fixed: Vec<Option<usize>> = vec![None; self.variables.len()];
        for &(axis, s) in &resolved {
            fixed[axis] = Some(s);
        }
        let out_vars: Vec<VariableSpec> = self
            .variables
            .iter()
            .zip(&fixed)
            .filter(|(_, f)| f.is_none())
            .map(|(v, _)| v.clone())
            .collect();
        // Every matching cell maps to a distinct output cell, visited in
        // row-major order, so pushing preserves the output layout.
        let mut out = Vec::with_capacity(out_vars.iter().map(VariableSpec::cardinality).product());
        for_each_cell(&self.cardinalities(), |flat, coord| {
            if fixed
                .iter()
                .zip(coord)
                .all(|(f, c)| f.map_or(true, |s| s == *c))
            {
                out.push(self.cells[flat]);
            }
        });
        let evidence_mass: f64 = out.iter().sum();
        if evidence_mass <= 0.0 {
            return Err(Error::ZeroProbabilityEvidence);
        }
        out.iter_mut().for_each(|c| *c /= evidence_mass);
        Ok(JointTable::from_parts(out_vars, out))
    }

    /// Marginal distribution of one variable, in declared state order.
    pub fn marginal_dist(&self, var: &str) -> Result<Vec<f64>> {
        let axis = self.position(var)?;
        let mut out = vec![0.0; self.variables[axis].cardinality()];
        for_each_cell(&self.cardinalities(), |flat, coord| {
            out[coord[axis]] += self.cells[flat];
        });
        Ok(out)
    }

    /// Permutes the variable axes into `order`, which must name every variable once.
    pub fn reorder(&self, order: &[&str]) -> Result<JointTable> {
        if order.len() != self.variables.len() {
            return Err(Error::InvalidTargets(format!(
                "reorder needs all {} variables, got {}",
                self.variables.len(),
                order.len()
            )));
        }
        let mut perm = Vec::with_capacity(order.len());
        for name in order {
            let axis = self.position(name)?;
            if perm.contains(&axis) {
                return Err(Error::RepeatedVariable(name.to_string()));
            }
            perm.push(axis);
        }
        let out_vars: Vec<VariableSpec> = perm.iter().map(|&a| self.variables[a].clone()).collect();
        let out_cards: Vec<usize> = out_vars.iter().map(VariableSpec::cardinality).collect();
        let in_strides = strides(&self.cardinalities());
        let mut out = Vec::with_capacity(self.cells.len());
        for_each_cell(&out_cards, |_, coord| {
            let src: usize = coord
                .iter()
                .zip(&perm)
                .map(|(c, &axis)| c * in_strides[axis])
                .sum();
            out.push(self.cells[src]);
        });
        Ok(JointTable {
            variables: out_vars,
            cells: out,
            scale: self.scale,
        })
    }

    /// Total assignment for a flat cell index.
    pub fn assignment_at(&self, flat: usize) -> Assignment {
        let cards = self.cardinalities();
        let strides = strides(&cards);
        self.variables
            .iter()
            .enumerate()
            .map(|(axis, v)| {
                let s = (flat / strides[axis]) % cards[axis];
                (v.name().to_string(), v.states()[s].clone())
            })
            .collect()
    }
}

impl fmt::Display for JointTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (flat, p) in self.cells.iter().enumerate() {
            let cell = self.assignment_at(flat);
            let labels: Vec<String> = self
                .variables
                .iter()
                .map(|v| format!("{}={}", v.name(), cell.get(v.name()).unwrap_or("")))
                .collect();
            writeln!(f, "{} {:.6}", labels.join(" "), p)?;
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// The eight cells of the two-evidence, one-conclusion example, laid out
    /// over (e1, e2, c) with c fastest.
    pub fn reference_table() -> JointTable {
        JointTable::new(
            vec![
                VariableSpec::binary("e1"),
                VariableSpec::binary("e2"),
                VariableSpec::binary("c"),
            ],
            vec![0.05, 0.20, 0.10, 0.10, 0.10, 0.25, 0.15, 0.05],
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::reference_table;
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn reference_table_is_valid() {
        let t = reference_table();
        assert!((t.mass() - 1.0).abs() < 1e-15);
        assert_eq!(t.variables().len(), 3);
        let p = t
            .probability(&Assignment::new().with("e1", "false").with("e2", "true").with("c", "false"))
            .unwrap();
        assert!((p - 0.10).abs() < 1e-15);
    }

    #[test]
    fn uniform_single_variable() {
        let t = JointTable::new(vec![VariableSpec::binary("x")], vec![0.5, 0.5]).unwrap();
        assert_eq!(t.cells(), &[0.5, 0.5]);
    }

    #[test]
    fn mass_out_of_tolerance() {
        let mut cells = reference_table().cells().to_vec();
        cells[0] = 0.06;
        let vars = reference_table().variables().to_vec();
        match JointTable::new(vars, cells) {
            Err(Error::MassOutOfTolerance { mass }) => assert!((mass - 1.01).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn construction_errors() {
        let b = || VariableSpec::binary("x");
        assert!(matches!(
            JointTable::new(vec![b()], vec![1.0]),
            Err(Error::WrongCellCount { expected: 2, found: 1 })
        ));
        assert!(matches!(
            JointTable::new(vec![b()], vec![1.5, -0.5]),
            Err(Error::NegativeCell { index: 1, .. })
        ));
        assert!(matches!(
            JointTable::new(vec![b(), b()], vec![0.25; 4]),
            Err(Error::DuplicateName(_))
        ));
        assert!(matches!(
            VariableSpec::new("x", ["a", "a"]),
            Err(Error::DuplicateState { .. })
        ));
        assert!(matches!(VariableSpec::new("x", ["a"]), Err(Error::TooFewStates(_))));
    }

    #[test]
    fn renormalizes_and_records_scale() {
        let t = JointTable::new(vec![VariableSpec::binary("x")], vec![0.5, 0.5000004]).unwrap();
        assert!((t.mass() - 1.0).abs() < 1e-15);
        assert!((t.scale_factor() - 1.0 / 1.0000004).abs() < 1e-15);
    }

    #[test]
    fn marginalize_onto_evidence() {
        let sub = reference_table().marginalize(&["e1", "e2"]).unwrap();
        assert!(close(sub.cells(), &[0.25, 0.20, 0.35, 0.20], 1e-12));
        // argument order does not change layout
        let again = reference_table().marginalize(&["e2", "e1"]).unwrap();
        assert_eq!(sub, again);
    }

    #[test]
    fn marginalize_identity_and_conclusion() {
        let t = reference_table();
        assert_eq!(t.marginalize(&["e1", "e2", "c"]).unwrap().cells(), t.cells());
        let c = t.marginalize(&["c"]).unwrap();
        assert!(close(c.cells(), &[0.40, 0.60], 1e-12));
        assert!(matches!(t.marginalize(&[]), Err(Error::EmptyKeepSet)));
        assert!(matches!(t.marginalize(&["zz"]), Err(Error::UnknownVariable(_))));
    }

    #[test]
    fn condition_on_both_evidence() {
        let t = reference_table();
        let c = t
            .condition(&Assignment::new().with("e1", "true").with("e2", "true"))
            .unwrap();
        assert_eq!(c.variables().len(), 1);
        assert!(close(c.cells(), &[0.75, 0.25], 1e-12));
        assert_eq!(t.condition(&Assignment::new()).unwrap(), t);
    }

    #[test]
    fn condition_on_zero_mass() {
        let t = JointTable::new(
            vec![VariableSpec::binary("e1"), VariableSpec::binary("c")],
            vec![0.5, 0.5, 0.0, 0.0],
        )
        .unwrap();
        assert!(matches!(
            t.condition(&Assignment::new().with("e1", "true")),
            Err(Error::ZeroProbabilityEvidence)
        ));
        assert!(matches!(
            t.condition(&Assignment::new().with("e1", "maybe")),
            Err(Error::UnknownState { .. })
        ));
    }

    #[test]
    fn condition_on_everything_leaves_scalar() {
        let t = reference_table();
        let all = t.assignment_at(5);
        let s = t.condition(&all).unwrap();
        assert!(s.variables().is_empty());
        assert_eq!(s.cells(), &[1.0]);
    }

    #[test]
    fn marginal_distributions() {
        let t = reference_table();
        assert!(close(&t.marginal_dist("e1").unwrap(), &[0.45, 0.55], 1e-12));
        assert!(close(&t.marginal_dist("e2").unwrap(), &[0.60, 0.40], 1e-12));
        let one = JointTable::new(vec![VariableSpec::binary("x")], vec![0.3, 0.7]).unwrap();
        assert_eq!(one.marginal_dist("x").unwrap(), one.cells());
    }

    #[test]
    fn reorder_roundtrip() {
        let t = reference_table();
        let r = t.reorder(&["c", "e1", "e2"]).unwrap();
        let cell = Assignment::new().with("e1", "true").with("e2", "false").with("c", "true");
        assert_eq!(r.cells()[r.index_of(&cell).unwrap()], t.cells()[t.index_of(&cell).unwrap()]);
        assert_eq!(r.reorder(&["e1", "e2", "c"]).unwrap(), t);
    }

    #[test]
    fn display_lists_cells() {
        let text = reference_table().marginalize(&["e1"]).unwrap().to_string();
        assert_eq!(text, "e1=false 0.450000\ne1=true 0.550000\n");
    }

    fn random_table() -> impl Strategy<Value = JointTable> {
        prop::collection::vec(2usize..=3, 2..=4).prop_flat_map(|cards| {
            let n: usize = cards.iter().product();
            prop::collection::vec(0.01f64..1.0, n).prop_map(move |raw| {
                let total: f64 = raw.iter().sum();
                let vars = cards
                    .iter()
                    .enumerate()
                    .map(|(i, &k)| VariableSpec::new(format!("v{i}"), (0..k).map(|s| format!("s{s}"))).unwrap())
                    .collect();
                JointTable::new(vars, raw.iter().map(|x| x / total).collect()).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn marginalization_commutes(t in random_table()) {
            let names: Vec<String> = t.variables().iter().map(|v| v.name().to_string()).collect();
            let ab: Vec<&str> = names.iter().take(2).map(String::as_str).collect();
            let a = [names[0].as_str()];
            let two_step = t.marginalize(&ab).unwrap().marginalize(&a).unwrap();
            let direct = t.marginalize(&a).unwrap();
            prop_assert!(close(two_step.cells(), direct.cells(), 1e-12));
            prop_assert!((t.marginalize(&ab).unwrap().mass() - t.mass()).abs() <= 1e-12);
        }

        #[test]
        fn condition_matches_direct_ratio(t in random_table(), s0 in 0usize..2) {
            let first = t.variables()[0].clone();
            let target = t.variables()[1].clone();
            let hard = Assignment::new().with(first.name(), first.states()[s0].clone());
            let cond = t.condition(&hard).unwrap();
            prop_assert!((cond.mass() - 1.0).abs() <= 1e-12);
            let dist = cond.marginal_dist(target.name()).unwrap();
            let denom = t.probability(&hard).unwrap();
            for (i, state) in target.states().iter().enumerate() {
                let num = t.probability(&hard.clone().with(target.name(), state.clone())).unwrap();
                prop_assert!((dist[i] - num / denom).abs() <= 1e-12);
            }
        }
    }
}
