//! Dörfler (bulk) marking, applied separately to each indicator.

use crate::error::{Error, Result};
use crate::estimators::IndicatorTable;

/// Minimal set of elements carrying at least a `theta` fraction of the total.
///
/// Values are taken in descending order (ties by lower id) and the shortest
/// qualifying prefix is returned, sorted by id. All-zero input gives an
/// empty set.
pub fn dorfler_mark(values: &[f64], theta: f64) -> Result<Vec<usize>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::Config(format!("marking fraction must lie in (0, 1], got {theta}")));
    }
    if let Some(v) = values.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Config(format!("indicator values must be nonnegative, found {v}")));
    }
    let total: f64 = values.iter().sum();
    if total == 0.0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let target = theta * total;
    let mut acc = 0.0;
    let mut chosen = Vec::new();
    for &t in &order {
        if values[t] == 0.0 {
            break;
        }
        chosen.push(t);
        acc += values[t];
        if acc >= target {
            break;
        }
    }
    chosen.sort_unstable();
    Ok(chosen)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkingResult {
    pub state: Vec<usize>,
    pub adjoint: Vec<usize>,
    pub inequality: Vec<usize>,
    /// Sorted union of the three sets.
    pub union: Vec<usize>,
}

/// Separate Dörfler marking of `η₁²`, `η₂²` and `η₃^q`.
pub fn mark_all(table: &IndicatorTable, theta: f64) -> Result<MarkingResult> {
    let state = dorfler_mark(&table.eta1_sq, theta)?;
    let adjoint = dorfler_mark(&table.eta2_sq, theta)?;
    let inequality = dorfler_mark(&table.eta3_q, theta)?;
    let mut union: Vec<usize> = state.iter().chain(&adjoint).chain(&inequality).copied().collect();
    union.sort_unstable();
    union.dedup();
    Ok(MarkingResult {
        state,
        adjoint,
        inequality,
        union,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_example() {
        assert_eq!(dorfler_mark(&[4.0, 3.0, 2.0, 1.0], 0.7).unwrap(), vec![0, 1]);
    }

    #[test]
    fn full_fraction_takes_all_nonzero() {
        assert_eq!(dorfler_mark(&[1.0, 0.0, 2.0], 1.0).unwrap(), vec![0, 2]);
    }

    #[test]
    fn single_and_empty() {
        assert_eq!(dorfler_mark(&[0.3], 0.7).unwrap(), vec![0]);
        assert!(dorfler_mark(&[0.0, 0.0], 0.7).unwrap().is_empty());
    }

    #[test]
    fn ties_prefer_lower_id() {
        assert_eq!(dorfler_mark(&[1.0, 1.0, 1.0, 1.0], 0.5).unwrap(), vec![0, 1]);
    }

    #[test]
    fn invalid_theta() {
        assert!(dorfler_mark(&[1.0], 0.0).is_err());
        assert!(dorfler_mark(&[1.0], 1.5).is_err());
    }

    fn table(e1: Vec<f64>, e2: Vec<f64>, e3: Vec<f64>) -> IndicatorTable {
        IndicatorTable {
            eta1_sq: e1,
            eta2_sq: e2,
            eta3_q: e3,
            q: 2.0,
        }
    }

    #[test]
    fn identical_tables_mark_identically() {
        let v = vec![0.5, 0.1, 0.3, 0.9];
        let r = mark_all(&table(v.clone(), v.clone(), v), 0.7).unwrap();
        assert_eq!(r.state, r.adjoint);
        assert_eq!(r.adjoint, r.inequality);
        assert_eq!(r.union, r.state);
    }

    #[test]
    fn separate_marking_keeps_small_scale_indicator() {
        let n = 20;
        let mut e1 = vec![1e-3; n];
        e1[3] = 100.0;
        let e2 = vec![1e-6; n];
        let r = mark_all(&table(e1, e2, vec![0.0; n]), 0.68).unwrap();
        assert_eq!(r.state, vec![3]);
        assert_eq!(r.adjoint, (0..14).collect::<Vec<_>>());
        assert!(r.inequality.is_empty());
        assert_eq!(r.union.len(), 14);
    }
}
