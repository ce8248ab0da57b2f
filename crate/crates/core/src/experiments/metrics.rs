use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::{check_nested, lagrange_interp};
use crate::mesh::Mesh;
use crate::objective::ConductivityField;

use super::afem::OutputRecord;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub l1: f64,
    pub l2: f64,
}

/// `‖σ − σ_ref‖` in `L¹` and `L²`, with `σ` transferred to the (nested)
/// reference mesh and the P1 difference integrated exactly.
pub fn error_metrics(
    mesh: &Mesh,
    sigma: &ConductivityField,
    reference_mesh: &Mesh,
    reference: &ConductivityField,
) -> Result<ErrorMetrics> {
    if reference.len() != reference_mesh.num_vertices() {
        return Err(Error::Config("reference field does not match its mesh".into()));
    }
    check_nested(mesh, reference_mesh)?;
    let transferred = lagrange_interp(mesh, sigma.values(), reference_mesh)?;
    let diff: Vec<f64> = transferred.iter().zip(reference.values()).map(|(a, b)| a - b).collect();
    Ok(ErrorMetrics {
        l1: reference_mesh.l1_norm(&diff),
        l2: reference_mesh.l2_norm_sq(&diff).sqrt(),
    })
}

/// Comparison of two error-vs-d.o.f. curves at a common d.o.f. count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveComparison {
    pub dofs: f64,
    pub l1_first: f64,
    pub l1_second: f64,
    pub l2_first: f64,
    pub l2_second: f64,
}

impl CurveComparison {
    /// `l1_first / l1_second`
    pub fn l1_ratio(&self) -> f64 {
        self.l1_first / self.l1_second
    }
}

/// Log-log interpolation of `(dofs, error)` at `n` (clamped to the data range).
pub fn interpolate_log(points: &[(f64, f64)], n: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0 > 0.0).collect();
    if pts.is_empty() {
        return None;
    }
    if n <= pts[0].0 {
        return Some(pts[0].1);
    }
    for w in pts.windows(2) {
        let ((n0, e0), (n1, e1)) = (w[0], w[1]);
        if n <= n1 {
            if e0 <= 0.0 || e1 <= 0.0 || n1 == n0 {
                let s = (n - n0) / (n1 - n0);
                return Some(e0 + s * (e1 - e0));
            }
            let s = (n / n0).ln() / (n1 / n0).ln();
            return Some((e0.ln() + s * (e1.ln() - e0.ln())).exp());
        }
    }
    pts.last().map(|p| p.1)
}

fn curve(records: &[OutputRecord], l1: bool) -> Vec<(f64, f64)> {
    records
        .iter()
        .take(records.len().saturating_sub(1))
        .filter_map(|r| {
            let e = if l1 { r.l1_error } else { r.l2_error };
            e.map(|e| (r.dofs as f64, e))
        })
        .collect()
}

/// Compares two runs at the largest d.o.f. both reach before their own
/// reference level (the last record of each run is excluded).
pub fn compare_runs(first: &[OutputRecord], second: &[OutputRecord]) -> Option<CurveComparison> {
    let (a1, b1) = (curve(first, true), curve(second, true));
    let (a2, b2) = (curve(first, false), curve(second, false));
    let n = a1.last()?.0.min(b1.last()?.0);
    Some(CurveComparison {
        dofs: n,
        l1_first: interpolate_log(&a1, n)?,
        l1_second: interpolate_log(&b1, n)?,
        l2_first: interpolate_log(&a2, n)?,
        l2_second: interpolate_log(&b2, n)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_interpolation_of_power_law() {
        let pts: Vec<(f64, f64)> = [100.0, 400.0, 1600.0].iter().map(|&n: &f64| (n, n.powf(-0.5))).collect();
        let v = interpolate_log(&pts, 800.0).unwrap();
        assert!((v - 800f64.powf(-0.5)).abs() < 1e-12);
        assert_eq!(interpolate_log(&pts, 10.0), Some(0.1));
        assert_eq!(interpolate_log(&pts, 1e6), Some(1600f64.powf(-0.5)));
    }
}
