//! Table measurements used by the property and acceptance suites.

use oddsinfer::{JointTable, MarginalTargets};

fn decode(mut flat: usize, cards: &[usize]) -> Vec<usize> {
    let mut coord = vec![0; cards.len()];
    for axis in (0..cards.len()).rev() {
        coord[axis] = flat % cards[axis];
        flat /= cards[axis];
    }
    coord
}

fn encode(coord: &[usize], cards: &[usize]) -> usize {
    coord.iter().zip(cards).fold(0, |acc, (c, k)| acc * k + c)
}

/// Marginal of one axis, summed directly from the cells.
pub fn axis_marginal(t: &JointTable, axis: usize) -> Vec<f64> {
    let cards = t.cardinalities();
    let mut out = vec![0.0; cards[axis]];
    for (flat, c) in t.cells().iter().enumerate() {
        out[decode(flat, &cards)[axis]] += c;
    }
    out
}

pub fn max_marginal_residual(t: &JointTable, targets: &MarginalTargets) -> f64 {
    let mut worst: f64 = 0.0;
    for (axis, v) in t.variables().iter().enumerate() {
        if let Some(want) = targets.get(v.name()) {
            for (have, want) in axis_marginal(t, axis).iter().zip(want) {
                worst = worst.max((have - want).abs());
            }
        }
    }
    worst
}

/// Every 2x2 cross-product ratio: each pair of axes, each pair of
/// non-reference states, each slice of the other axes. `None` marks a
/// ratio touching a zero cell.
pub fn cross_product_ratios(t: &JointTable) -> Vec<Option<f64>> {
    let cards = t.cardinalities();
    let cells = t.cells();
    let mut out = Vec::new();
    for a in 0..cards.len() {
        for b in a + 1..cards.len() {
            for flat in 0..cells.len() {
                let base = decode(flat, &cards);
                if base[a] != 0 || base[b] != 0 {
                    continue;
                }
                for i in 1..cards[a] {
                    for j in 1..cards[b] {
                        let at = |si: usize, sj: usize| {
                            let mut c = base.clone();
                            c[a] = si;
                            c[b] = sj;
                            cells[encode(&c, &cards)]
                        };
                        let q = [at(0, 0), at(i, j), at(0, j), at(i, 0)];
                        out.push(q.iter().all(|&x| x > 0.0).then(|| (q[0] * q[1]) / (q[2] * q[3])));
                    }
                }
            }
        }
    }
    out
}

/// Information divergence `sum q ln(q / p)`, with `0 ln 0 = 0`.
pub fn kl_divergence(q: &JointTable, p: &JointTable) -> f64 {
    q.cells()
        .iter()
        .zip(p.cells())
        .map(|(&q, &p)| if q > 0.0 { q * (q / p).ln() } else { 0.0 })
        .sum()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Relative difference scaled so values near 1 compare absolutely.
pub fn ratio_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
