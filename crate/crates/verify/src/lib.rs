//! Reference computations for checking `oddsinfer`.
//!
//! Nothing here calls the fitting or query code it is meant to check: the
//! oracles read raw cells and do their own index arithmetic.
//!
//! - [`analytic_2x2`]: closed-form refit of a 2x2 table with fixed odds ratio.
//! - [`kl_grid_2x2x2`]: grid minimization of information divergence from a
//!   2x2x2 start subject to new one-variable marginals.
//! - [`brute_posterior`]: term-by-term mixture posterior using the above.

use oddsinfer::{Evidence, Finding, JointTable, MarginalTargets};
use thiserror::Error;

pub mod checks;

/// Steps per free parameter used by [`brute_posterior`] for grid searches.
pub const DEFAULT_RESOLUTION: usize = 2000;
/// Agreement expected between the grid oracle and an exact minimizer at
/// [`DEFAULT_RESOLUTION`].
pub const GRID_SLACK: f64 = 2e-4;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("no feasible root: targets incompatible with a positive table")]
    NoFeasibleRoot,
    #[error("no grid point satisfies the marginal constraints")]
    EmptyFeasibleSet,
    #[error("start table must be strictly positive")]
    NotStrictlyPositive,
    #[error("unexpected shape: {0}")]
    Shape(String),
    #[error("missing or malformed target for '{0}'")]
    Target(String),
    #[error("evidence has zero probability")]
    ZeroProbabilityEvidence,
    #[error("unsupported evidence: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Table(#[from] oddsinfer::Error),
}

pub type Result<T> = std::result::Result<T, OracleError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    Analytic2x2,
    KlGrid { resolution: usize },
    /// Mixture sum whose adjusted joint came from the wrapped method
    /// (`None` when no fitting was needed).
    BruteForce(Option<&'static str>),
}

#[derive(Debug, Clone)]
pub struct OracleResult<T> {
    pub value: T,
    pub method: OracleMethod,
    /// Largest |target - achieved| marginal entry of the oracle's table.
    pub residual: f64,
}

fn binary_target(targets: &MarginalTargets, name: &str) -> Result<f64> {
    match targets.get(name) {
        Some(&[f, t]) if (f + t - 1.0).abs() <= 1e-9 && (0.0..=1.0).contains(&t) => Ok(t),
        _ => Err(OracleError::Target(name.to_string())),
    }
}

fn require_positive(cells: &[f64]) -> Result<()> {
    if cells.iter().all(|&c| c > 0.0) {
        Ok(())
    } else {
        Err(OracleError::NotStrictlyPositive)
    }
}

/// Refits a strictly positive 2x2 table to new binary margins keeping its
/// cross-product ratio.
///
/// With `a` and `b` the new probabilities of the second state of the row
/// and column variables, the fitted cells are
/// `(x, 1-a-x, 1-b-x, a+b-1+x)` where `x` is the root in the feasible
/// interval of `x (a+b-1+x) = r (1-a-x)(1-b-x)`.
pub fn analytic_2x2(start: &JointTable, targets: &MarginalTargets) -> Result<OracleResult<JointTable>> {
    if start.cardinalities() != [2, 2] {
        return Err(OracleError::Shape("analytic oracle needs a 2x2 table".into()));
    }
    let c = start.cells();
    require_positive(c)?;
    let vars = start.variables();
    let a = binary_target(targets, vars[0].name())?;
    let b = binary_target(targets, vars[1].name())?;
    let r = (c[0] * c[3]) / (c[1] * c[2]);

    // (1-r) x^2 + (a+b-1 + r(2-a-b)) x - r(1-a)(1-b) = 0
    let qa = 1.0 - r;
    let qb = a + b - 1.0 + r * (2.0 - a - b);
    let qc = -r * (1.0 - a) * (1.0 - b);
    let lo = (1.0 - a - b).max(0.0);
    let hi = (1.0 - a).min(1.0 - b);
    let slack = 1e-12;
    let roots: Vec<f64> = if qa.abs() < 1e-14 {
        if qb == 0.0 {
            vec![]
        } else {
            vec![-qc / qb]
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            vec![]
        } else {
            let q = -0.5 * (qb + qb.signum() * disc.sqrt());
            let mut roots = vec![q / qa];
            if q != 0.0 {
                roots.push(qc / q);
            } else {
                roots.push(0.0);
            }
            roots
        }
    };
    let x = roots
        .into_iter()
        .find(|x| *x >= lo - slack && *x <= hi + slack)
        .ok_or(OracleError::NoFeasibleRoot)?
        .clamp(lo, hi);
    let cells = vec![x, 1.0 - a - x, 1.0 - b - x, a + b - 1.0 + x];
    let residual = [
        (cells[2] + cells[3] - a).abs(),
        (cells[1] + cells[3] - b).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(OracleResult {
        value: JointTable::new(vars.to_vec(), cells)?,
        method: OracleMethod::Analytic2x2,
        residual,
    })
}

fn xlogx_over(q: f64, p: f64) -> f64 {
    if q <= 0.0 {
        0.0
    } else {
        q * (q / p).ln()
    }
}

/// Grid search for the table closest to `start` in information divergence
/// whose marginals match `targets`.
///
/// `start` must be a strictly positive 2x2x2 table and `targets` must
/// constrain two or all three of its variables. The face of the two first
/// constrained variables has one free cell, gridded with `resolution`
/// steps over its feasible interval. Splitting each face cell across the
/// remaining variable is gridded at `resolution` steps per cell; with two
/// constraints the splits are independent, with three they must add up to
/// the third target and the exact grid minimum is found by allocating
/// steps greedily, which is exact because each cell's cost is convex.
pub fn kl_grid_2x2x2(start: &JointTable, targets: &MarginalTargets, resolution: usize) -> Result<OracleResult<JointTable>> {
    if start.cardinalities() != [2, 2, 2] {
        return Err(OracleError::Shape("grid oracle needs a 2x2x2 table".into()));
    }
    if resolution == 0 {
        return Err(OracleError::Shape("resolution must be positive".into()));
    }
    require_positive(start.cells())?;
    let vars = start.variables();
    let mut constrained = Vec::new();
    let mut free = Vec::new();
    for (axis, v) in vars.iter().enumerate() {
        if targets.get(v.name()).is_some() {
            constrained.push((axis, binary_target(targets, v.name())?));
        } else {
            free.push(axis);
        }
    }
    if targets.len() != constrained.len() || !(2..=3).contains(&constrained.len()) {
        return Err(OracleError::Shape("targets must name two or three of the table's variables".into()));
    }
    // axes in search order: face row, face column, split variable
    let order: Vec<usize> = constrained.iter().map(|c| c.0).chain(free.iter().copied()).collect();
    let flat = |coord: [usize; 3]| -> usize {
        let mut idx = [0usize; 3];
        for (pos, &axis) in order.iter().enumerate() {
            idx[axis] = coord[pos];
        }
        idx[0] * 4 + idx[1] * 2 + idx[2]
    };
    let p = |i: usize, j: usize, k: usize| start.cells()[flat([i, j, k])];
    let (a, b) = (constrained[0].1, constrained[1].1);
    let split_target = constrained.get(2).map(|c| c.1);

    let lo = (1.0 - a - b).max(0.0);
    let hi = (1.0 - a).min(1.0 - b);
    if lo > hi {
        return Err(OracleError::EmptyFeasibleSet);
    }
    let n = resolution;
    let mut best: Option<(f64, [f64; 8])> = None;
    for g in 0..=n {
        let x = lo + (hi - lo) * g as f64 / n as f64;
        let face = [x, 1.0 - a - x, 1.0 - b - x, a + b - 1.0 + x].map(|m| m.max(0.0));
        let split = match split_target {
            None => Some(independent_splits(&face, &p, n)),
            Some(c) => constrained_splits(&face, &p, c, n),
        };
        let Some((cost, s)) = split else { continue };
        if best.as_ref().map_or(true, |(b, _)| cost < *b) {
            let mut cells = [0.0; 8];
            for (cell, (&m, &s)) in face.iter().zip(&s).enumerate() {
                let (i, j) = (cell / 2, cell % 2);
                cells[flat([i, j, 0])] = m - s;
                cells[flat([i, j, 1])] = s;
            }
            best = Some((cost, cells));
        }
    }
    let (_, cells) = best.ok_or(OracleError::EmptyFeasibleSet)?;
    let table = JointTable::new(vars.to_vec(), cells.to_vec())?;
    let residual = checks::max_marginal_residual(&table, targets);
    Ok(OracleResult {
        value: table,
        method: OracleMethod::KlGrid { resolution },
        residual,
    })
}

type CellProb<'a> = &'a dyn Fn(usize, usize, usize) -> f64;

fn split_cost(m: f64, s: f64, cell: usize, p: CellProb) -> f64 {
    let (i, j) = (cell / 2, cell % 2);
    xlogx_over(m - s, p(i, j, 0)) + xlogx_over(s, p(i, j, 1))
}

/// Each face cell split on its own grid of `n` steps.
fn independent_splits(face: &[f64; 4], p: CellProb, n: usize) -> (f64, [f64; 4]) {
    let mut total = 0.0;
    let mut chosen = [0.0; 4];
    for (cell, &m) in face.iter().enumerate() {
        let mut best = (f64::INFINITY, 0.0);
        for h in 0..=n {
            let s = m * h as f64 / n as f64;
            let cost = split_cost(m, s, cell, p);
            if cost < best.0 {
                best = (cost, s);
            }
        }
        total += best.0;
        chosen[cell] = best.1;
    }
    (total, chosen)
}

/// Splits on a common grid of step `c / n` whose second parts add up to `c`.
fn constrained_splits(face: &[f64; 4], p: CellProb, c: f64, n: usize) -> Option<(f64, [f64; 4])> {
    let step = c / n as f64;
    let limit: Vec<usize> = face
        .iter()
        .map(|&m| if step > 0.0 { ((m / step) + 1e-9).floor() as usize } else { 0 })
        .collect();
    if limit.iter().sum::<usize>() < n {
        return None;
    }
    let mut k = [0usize; 4];
    let cost_at = |cell: usize, k: usize| split_cost(face[cell], (k as f64 * step).min(face[cell]), cell, p);
    for _ in 0..n {
        let mut pick: Option<(f64, usize)> = None;
        for cell in 0..4 {
            if k[cell] < limit[cell] {
                let delta = cost_at(cell, k[cell] + 1) - cost_at(cell, k[cell]);
                if pick.map_or(true, |(d, _)| delta < d) {
                    pick = Some((delta, cell));
                }
            }
        }
        k[pick?.1] += 1;
    }
    let total = (0..4).map(|cell| cost_at(cell, k[cell])).sum();
    Some((total, [0, 1, 2, 3].map(|cell| (k[cell] as f64 * step).min(face[cell]))))
}

/// Mixture posterior computed term by term. See [`brute_posterior_at`].
pub fn brute_posterior(t: &JointTable, ev: &Evidence, target: &str) -> Result<OracleResult<Vec<f64>>> {
    brute_posterior_at(t, ev, target, DEFAULT_RESOLUTION)
}

/// `P(target = s) = sum_x P(target = s | x, hard) P'(x)` over every
/// configuration `x` of the soft-evidence variables.
///
/// The adjusted joint `P'` is the soft distribution itself for one soft
/// variable, [`analytic_2x2`] for two binary ones and [`kl_grid_2x2x2`]
/// (at `resolution`) for three binary ones.
pub fn brute_posterior_at(t: &JointTable, ev: &Evidence, target: &str, resolution: usize) -> Result<OracleResult<Vec<f64>>> {
    let vars = t.variables();
    let cards = t.cardinalities();
    let target_axis = vars
        .iter()
        .position(|v| v.name() == target)
        .ok_or_else(|| oddsinfer::Error::UnknownVariable(target.to_string()))?;
    let mut hard: Vec<(usize, usize)> = Vec::new();
    let mut soft: Vec<(usize, Vec<f64>)> = Vec::new();
    for (name, finding) in ev.iter() {
        let axis = vars
            .iter()
            .position(|v| v.name() == name)
            .ok_or_else(|| oddsinfer::Error::UnknownVariable(name.to_string()))?;
        if axis == target_axis {
            return Err(OracleError::Unsupported("evidence on the target".into()));
        }
        match finding {
            Finding::Hard(state) => hard.push((axis, vars[axis].state_index(state)?)),
            Finding::Soft(dist) => {
                let support: Vec<usize> = (0..dist.len()).filter(|&s| dist[s] > 0.0).collect();
                if support.len() == 1 {
                    hard.push((axis, support[0]));
                } else {
                    soft.push((axis, dist.clone()));
                }
            }
            Finding::Unknown => {}
        }
    }
    soft.sort_by_key(|s| s.0);

    // joint[x][s]: mass of soft configuration x with target state s inside
    // the hard slice; x indexes soft axes row-major in table order.
    let soft_cards: Vec<usize> = soft.iter().map(|(a, _)| cards[*a]).collect();
    let configs: usize = soft_cards.iter().product();
    let tcard = cards[target_axis];
    let mut joint = vec![vec![0.0; tcard]; configs];
    let mut slice_mass = 0.0;
    let total: usize = cards.iter().product();
    for flat in 0..total {
        let mut rem = flat;
        let mut coord = vec![0; cards.len()];
        for axis in (0..cards.len()).rev() {
            coord[axis] = rem % cards[axis];
            rem /= cards[axis];
        }
        if hard.iter().any(|&(axis, s)| coord[axis] != s) {
            continue;
        }
        let x = soft.iter().fold(0, |acc, (axis, _)| acc * cards[*axis] + coord[*axis]);
        joint[x][coord[target_axis]] += t.cells()[flat];
        slice_mass += t.cells()[flat];
    }
    if slice_mass <= 0.0 {
        return Err(OracleError::ZeroProbabilityEvidence);
    }
    let prior_x: Vec<f64> = joint.iter().map(|row| row.iter().sum::<f64>() / slice_mass).collect();

    let (adjusted, inner, residual): (Vec<f64>, Option<&'static str>, f64) = match soft.len() {
        0 => (vec![1.0], None, 0.0),
        1 => (soft[0].1.clone(), None, 0.0),
        2 | 3 if soft_cards.iter().all(|&k| k == 2) => {
            let specs: Vec<_> = soft.iter().map(|(a, _)| vars[*a].clone()).collect();
            let sub = JointTable::new(specs, prior_x.clone())?;
            let mut targets = MarginalTargets::new();
            for (axis, dist) in &soft {
                targets.insert(vars[*axis].name(), dist.clone());
            }
            let fitted = if soft.len() == 2 {
                (analytic_2x2(&sub, &targets)?, "analytic-2x2")
            } else {
                (kl_grid_2x2x2(&sub, &targets, resolution)?, "kl-grid")
            };
            (fitted.0.value.cells().to_vec(), Some(fitted.1), fitted.0.residual)
        }
        n => {
            return Err(OracleError::Unsupported(format!(
                "{n} soft variables with cardinalities {soft_cards:?}"
            )))
        }
    };

    let mut post = vec![0.0; tcard];
    for x in 0..configs {
        if prior_x[x] > 0.0 {
            for (s, p) in post.iter_mut().enumerate() {
                *p += joint[x][s] / (prior_x[x] * slice_mass) * adjusted[x];
            }
        } else if adjusted[x] > 0.0 {
            return Err(OracleError::ZeroProbabilityEvidence);
        }
    }
    Ok(OracleResult {
        value: post,
        method: OracleMethod::BruteForce(inner),
        residual,
    })
}
