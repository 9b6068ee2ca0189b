#![allow(dead_code)]

use oddsinfer::{JointTable, MarginalTargets, VariableSpec};
use rand::Rng;

pub fn reference_table() -> JointTable {
    JointTable::new(
        vec![VariableSpec::binary("e1"), VariableSpec::binary("e2"), VariableSpec::binary("c")],
        vec![0.05, 0.20, 0.10, 0.10, 0.10, 0.25, 0.15, 0.05],
    )
    .unwrap()
}

pub fn reference_targets() -> MarginalTargets {
    MarginalTargets::new()
        .with("e1", vec![0.3, 0.7])
        .with("e2", vec![0.2, 0.8])
}

pub fn variables(cards: &[usize]) -> Vec<VariableSpec> {
    cards
        .iter()
        .enumerate()
        .map(|(i, &k)| VariableSpec::new(format!("v{i}"), (0..k).map(|s| format!("s{s}"))).unwrap())
        .collect()
}

/// Positive probability vector with entries bounded away from zero.
pub fn random_dist<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

pub fn random_table<R: Rng>(rng: &mut R, cards: &[usize]) -> JointTable {
    let n: usize = cards.iter().product();
    JointTable::new(variables(cards), random_dist(rng, n)).unwrap()
}

/// Two or three variables with two or three states each.
pub fn random_shape<R: Rng>(rng: &mut R) -> Vec<usize> {
    let n = rng.gen_range(2..=3);
    (0..n).map(|_| rng.gen_range(2..=3)).collect()
}

/// Targets on a random nonempty subset of the table's variables.
pub fn random_targets<R: Rng>(rng: &mut R, t: &JointTable) -> MarginalTargets {
    let mut targets = MarginalTargets::new();
    let vars = t.variables();
    let forced = rng.gen_range(0..vars.len());
    for (i, v) in vars.iter().enumerate() {
        if i == forced || rng.gen_bool(0.6) {
            targets.insert(v.name(), random_dist(rng, v.cardinality()));
        }
    }
    targets
}

pub fn outer(vars: Vec<VariableSpec>, margins: &[&[f64]]) -> JointTable {
    let mut cells = vec![1.0];
    for m in margins {
        cells = cells.iter().flat_map(|c| m.iter().map(move |x| c * x)).collect();
    }
    JointTable::new(vars, cells).unwrap()
}
