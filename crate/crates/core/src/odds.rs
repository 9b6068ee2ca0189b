//! Cross-product (odds) ratios of joint tables.
//!
//! Multi-state variables use the reference-cell convention: the first
//! declared state of each variable anchors every 2x2 cross-product.

use crate::error::{Error, Result};
use crate::table::JointTable;

fn ensure_positive(cells: &[f64]) -> Result<()> {
    match cells.iter().position(|&c| c <= 0.0) {
        Some(index) => Err(Error::ZeroCell { index }),
        None => Ok(()),
    }
}

impl JointTable {
    /// `(p11 * p22) / (p12 * p21)` for a table over exactly two binary variables.
    pub fn pairwise_odds_ratio(&self) -> Result<f64> {
        if self.cardinalities() != [2, 2] {
            return Err(Error::NotTwoByTwo);
        }
        let c = self.cells();
        ensure_positive(c)?;
        Ok((c[0] * c[3]) / (c[1] * c[2]))
    }

    /// Reference-cell odds ratios between `row_var` and `col_var`.
    ///
    /// Entry `[i - 1][j - 1]` is the cross-product ratio of the 2x2 subtable
    /// on states `{0, i}` of `row_var` and `{0, j}` of `col_var`. Tables over
    /// more variables are first marginalized onto the pair.
    pub fn local_odds_ratios(&self, row_var: &str, col_var: &str) -> Result<Vec<Vec<f64>>> {
        let pair = self
            .marginalize(&[row_var, col_var])?
            .reorder(&[row_var, col_var])?;
        let cells = pair.cells();
        ensure_positive(cells)?;
        let cards = pair.cardinalities();
        let (rows, cols) = (cards[0], cards[1]);
        let at = |i: usize, j: usize| cells[i * cols + j];
        Ok((1..rows)
            .map(|i| {
                (1..cols)
                    .map(|j| (at(0, 0) * at(i, j)) / (at(0, j) * at(i, 0)))
                    .collect()
            })
            .collect())
    }

    fn two_cubed(&self) -> Result<&[f64]> {
        if self.cardinalities() != [2, 2, 2] {
            return Err(Error::NotTwoCubed);
        }
        ensure_positive(self.cells())?;
        Ok(self.cells())
    }

    /// Three-way association of a 2x2x2 table.
    ///
    /// With `P[ijk]` indexing the first, second and third variables (1 for
    /// the first state, 2 for the second) this is
    /// `(P111 P221 P212 P122) / (P211 P121 P112 P222)`, which equals the
    /// first-by-second odds ratio in the third variable's first layer divided
    /// by the same ratio in its second layer.
    pub fn threeway_odds_ratio(&self) -> Result<f64> {
        let c = self.two_cubed()?;
        let p = |i: usize, j: usize, k: usize| c[(i - 1) * 4 + (j - 1) * 2 + (k - 1)];
        Ok((p(1, 1, 1) * p(2, 2, 1) * p(2, 1, 2) * p(1, 2, 2))
            / (p(2, 1, 1) * p(1, 2, 1) * p(1, 1, 2) * p(2, 2, 2)))
    }

    /// `(P111 P121 P212 P222) / (P211 P221 P112 P122)` on a 2x2x2 table.
    ///
    /// This grouping is the product, over both layers of the second
    /// variable, of the first-by-third cross-product ratio. It is kept
    /// alongside the standard pairwise ratios because published examples
    /// label it as a first-by-second association.
    pub fn layered_cross_ratio_product(&self) -> Result<f64> {
        let c = self.two_cubed()?;
        let p = |i: usize, j: usize, k: usize| c[(i - 1) * 4 + (j - 1) * 2 + (k - 1)];
        Ok((p(1, 1, 1) * p(1, 2, 1) * p(2, 1, 2) * p(2, 2, 2))
            / (p(2, 1, 1) * p(2, 2, 1) * p(1, 1, 2) * p(1, 2, 2)))
    }
}

#[cfg(test)]
mod tests {
    use crate::table::fixtures::reference_table;
    use crate::table::{Assignment, JointTable, VariableSpec};
    use crate::Error;
    use proptest::prelude::*;

    fn outer(vars: Vec<VariableSpec>, margins: &[&[f64]]) -> JointTable {
        let mut cells = vec![1.0];
        for m in margins {
            cells = cells.iter().flat_map(|c| m.iter().map(move |x| c * x)).collect();
        }
        JointTable::new(vars, cells).unwrap()
    }

    fn tri(name: &str) -> VariableSpec {
        VariableSpec::new(name, ["a", "b", "c"]).unwrap()
    }

    #[test]
    fn evidence_subtable_ratio() {
        let sub = reference_table().marginalize(&["e1", "e2"]).unwrap();
        let r = sub.pairwise_odds_ratio().unwrap();
        assert!((r - 5.0 / 7.0).abs() < 1e-12);
        assert!((r - 0.714286).abs() < 1e-6);
    }

    #[test]
    fn printed_adjusted_subtable_keeps_ratio() {
        let sub = JointTable::new(
            vec![VariableSpec::binary("e1"), VariableSpec::binary("e2")],
            vec![0.0493, 0.2508, 0.1507, 0.5492],
        )
        .unwrap();
        assert!((sub.pairwise_odds_ratio().unwrap() - 0.714).abs() < 3e-3);
    }

    #[test]
    fn independence_gives_unit_ratio() {
        let t = outer(
            vec![VariableSpec::binary("a"), VariableSpec::binary("b")],
            &[&[0.3, 0.7], &[0.6, 0.4]],
        );
        assert!((t.pairwise_odds_ratio().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pairwise_shape_and_zero_errors() {
        assert!(matches!(reference_table().pairwise_odds_ratio(), Err(Error::NotTwoByTwo)));
        let z = JointTable::new(
            vec![VariableSpec::binary("a"), VariableSpec::binary("b")],
            vec![0.5, 0.0, 0.25, 0.25],
        )
        .unwrap();
        assert!(matches!(z.pairwise_odds_ratio(), Err(Error::ZeroCell { index: 1 })));
    }

    #[test]
    fn local_ratios_coincide_on_2x2() {
        let sub = reference_table().marginalize(&["e1", "e2"]).unwrap();
        let local = sub.local_odds_ratios("e1", "e2").unwrap();
        assert_eq!(local.len(), 1);
        assert_eq!(local[0].len(), 1);
        assert!((local[0][0] - sub.pairwise_odds_ratio().unwrap()).abs() < 1e-15);
        // from the full table directly
        let full = reference_table().local_odds_ratios("e1", "e2").unwrap();
        assert!((full[0][0] - 5.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn local_ratios_three_by_two() {
        let t = JointTable::new(
            vec![tri("a"), VariableSpec::binary("b")],
            vec![0.1, 0.2, 0.2, 0.1, 0.2, 0.2],
        )
        .unwrap();
        let r = t.local_odds_ratios("a", "b").unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0][0] - 0.25).abs() < 1e-12);
        assert!((r[1][0] - 0.5).abs() < 1e-12);
        // swapping roles transposes
        let tr = t.local_odds_ratios("b", "a").unwrap();
        assert!((tr[0][0] - 0.25).abs() < 1e-12 && (tr[0][1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn local_ratios_independent_three_by_two() {
        let t = outer(vec![tri("a"), VariableSpec::binary("b")], &[&[0.2, 0.3, 0.5], &[0.4, 0.6]]);
        for row in t.local_odds_ratios("a", "b").unwrap() {
            for r in row {
                assert!((r - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn threeway_on_reference_table() {
        let t = reference_table();
        assert!((t.threeway_odds_ratio().unwrap() - 1.875).abs() < 1e-12);
        assert!((t.layered_cross_ratio_product().unwrap() - 0.208333).abs() < 1e-6);
        assert!((t.layered_cross_ratio_product().unwrap() - 0.0625 / 0.3).abs() < 1e-12);
    }

    #[test]
    fn threeway_is_ratio_of_layer_ratios() {
        let t = reference_table();
        let layer = |state: &str| {
            t.condition(&Assignment::new().with("c", state))
                .unwrap()
                .pairwise_odds_ratio()
                .unwrap()
        };
        assert!((layer("false") - 0.75).abs() < 1e-12);
        assert!((layer("true") - 0.40).abs() < 1e-12);
        assert!((t.threeway_odds_ratio().unwrap() - layer("false") / layer("true")).abs() < 1e-12);
    }

    #[test]
    fn threeway_independent_and_shape() {
        let t = outer(
            vec![VariableSpec::binary("a"), VariableSpec::binary("b"), VariableSpec::binary("c")],
            &[&[0.3, 0.7], &[0.1, 0.9], &[0.5, 0.5]],
        );
        assert!((t.threeway_odds_ratio().unwrap() - 1.0).abs() < 1e-12);
        let sub = reference_table().marginalize(&["e1", "e2"]).unwrap();
        assert!(matches!(sub.threeway_odds_ratio(), Err(Error::NotTwoCubed)));
    }

    fn positive_cells(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..1.0, n).prop_map(|raw| {
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / s).collect()
        })
    }

    fn bin3() -> Vec<VariableSpec> {
        vec![VariableSpec::binary("a"), VariableSpec::binary("b"), VariableSpec::binary("c")]
    }

    proptest! {
        #[test]
        fn threeway_identity(cells in positive_cells(8)) {
            let t = JointTable::new(bin3(), cells).unwrap();
            let layer = |s: &str| t.condition(&Assignment::new().with("c", s)).unwrap().pairwise_odds_ratio().unwrap();
            let lhs = t.threeway_odds_ratio().unwrap();
            prop_assert!((lhs - layer("false") / layer("true")).abs() <= 1e-12 * lhs.max(1.0));
        }

        #[test]
        fn ratios_ignore_scale(cells in positive_cells(8), k in 0.1f64..10.0) {
            let t = JointTable::new(bin3(), cells.clone()).unwrap();
            let scaled: Vec<f64> = cells.iter().map(|c| c * k).collect();
            let total: f64 = scaled.iter().sum();
            let u = JointTable::new(bin3(), scaled.iter().map(|c| c / total).collect()).unwrap();
            let (a, b) = (t.threeway_odds_ratio().unwrap(), u.threeway_odds_ratio().unwrap());
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
            let (a, b) = (t.local_odds_ratios("a", "b").unwrap()[0][0], u.local_odds_ratios("a", "b").unwrap()[0][0]);
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }

        #[test]
        fn outer_products_are_unassociated(p in 0.01f64..0.99, q in 0.01f64..0.99) {
            let t = outer(vec![VariableSpec::binary("a"), VariableSpec::binary("b")], &[&[1.0 - p, p], &[1.0 - q, q]]);
            prop_assert!((t.pairwise_odds_ratio().unwrap() - 1.0).abs() <= 1e-12);
        }
    }
}
