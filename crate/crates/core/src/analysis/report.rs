//! Convergence tables, eigenpair error reports and lower-bound checks.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::analysis::exact::ExactSolution;
use crate::assembly::GlobalSystem;
use crate::error::{Result, WgError};
use crate::mesh::{Domain, Mesh};
use crate::solvers::EigenPairSet;
use crate::wg::{project_qh, WeakFunction};

/// `order_i = log2(e_{i-1} / e_i)`; the first level has no order.
pub fn convergence_order(errors: &[f64]) -> Result<Vec<Option<f64>>> {
    if let Some((level, &value)) = errors
        .iter()
        .enumerate()
        .find(|(_, e)| e.partial_cmp(&&0.0) != Some(std::cmp::Ordering::Greater))
    {
        return Err(WgError::NonPositiveError { level, value });
    }
    Ok(std::iter::once(None)
        .chain(errors.windows(2).map(|w| Some((w[0] / w[1]).log2())))
        .take(errors.len())
        .collect())
}

/// Per-level errors for several targets, laid out like a refinement table.
#[derive(Clone, Debug)]
pub struct ConvergenceTable {
    pub domain: Domain,
    pub k: usize,
    pub eps: f64,
    pub norm: String,
    /// Grid subdivisions `n`, with `h = 1/n`.
    pub levels: Vec<usize>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl ConvergenceTable {
    pub fn new(
        domain: Domain,
        k: usize,
        eps: f64,
        norm: impl Into<String>,
        levels: Vec<usize>,
    ) -> Self {
        Self {
            domain,
            k,
            eps,
            norm: norm.into(),
            levels,
            columns: Vec::new(),
        }
    }

    pub fn push(&mut self, label: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.levels.len() {
            return Err(WgError::DimensionMismatch {
                expected: self.levels.len(),
                actual: values.len(),
            });
        }
        self.columns.push((label.into(), values));
        Ok(())
    }

    pub fn orders(&self, column: usize) -> Result<Vec<Option<f64>>> {
        convergence_order(&self.columns[column].1)
    }

    /// Markdown with a value row and an order row per target.
    pub fn to_markdown(&self) -> Result<String> {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} (domain {}, k={}, eps={})\n",
            self.norm, self.domain, self.k, self.eps
        );
        let _ = write!(s, "| h |");
        for n in &self.levels {
            let _ = write!(s, " 1/{n} |");
        }
        let _ = write!(s, "\n|---|");
        for _ in &self.levels {
            let _ = write!(s, "---|");
        }
        s.push('\n');
        for (i, (label, values)) in self.columns.iter().enumerate() {
            let _ = write!(s, "| {label} |");
            for v in values {
                let _ = write!(s, " {} |", sci(*v));
            }
            s.push('\n');
            if let Ok(orders) = self.orders(i) {
                let _ = write!(s, "| order |");
                for o in orders {
                    match o {
                        Some(o) => {
                            let _ = write!(s, " {o:.4} |");
                        }
                        None => s.push_str("  |"),
                    }
                }
                s.push('\n');
            }
        }
        Ok(s)
    }
}

/// `1.2345e-2` style with a signed exponent, as in printed tables.
pub fn sci(v: f64) -> String {
    let s = format!("{v:.4e}");
    match s.split_once('e') {
        Some((m, e)) if !e.starts_with('-') => format!("{m}e+{e}"),
        _ => s,
    }
}

/// One row of [`eigen_error_report`]; `j` is one-based.
#[derive(Clone, Debug)]
pub struct EigenErrorRow {
    pub j: usize,
    pub lambda: f64,
    pub lambda_h: f64,
    /// `lambda_j - lambda_{j,h}`.
    pub value_error: f64,
    /// `||Q_0 u_j - u_{j,h,0}||` after alignment.
    pub l2_error: f64,
    /// `|||Q_h u_j - u_{j,h}|||` after alignment.
    pub triple_error: f64,
    /// One-based inclusive cluster bounds.
    pub cluster: (usize, usize),
    pub cluster_l2_rms: f64,
    pub cluster_triple_rms: f64,
}

/// Compares discrete eigenpairs with the exact ones index by index.
///
/// Inside a cluster of equal exact eigenvalues the discrete vectors only span
/// an approximation of the eigenspace, so the projected exact basis is first
/// rotated onto the discrete vectors (orthogonal Procrustes in the `b_w`
/// inner product). The cluster RMS errors do not depend on which orthonormal
/// basis the solver returned.
pub fn eigen_error_report(
    mesh: &Mesh,
    system: &GlobalSystem,
    exact: &ExactSolution,
    pairs: &EigenPairSet,
    quad_degree: usize,
) -> Result<Vec<EigenErrorRow>> {
    let nev = pairs.len();
    if nev > exact.len() {
        return Err(WgError::ClusterMismatch(format!(
            "{nev} discrete pairs but only {} exact references",
            exact.len()
        )));
    }
    check_cluster_separation(exact, &pairs.values)?;
    let mut rows = Vec::with_capacity(nev);
    for cluster in exact.clusters() {
        if cluster.start >= nev {
            break;
        }
        let disc: Vec<usize> = (cluster.start..cluster.end.min(nev)).collect();
        let projected: Vec<WeakFunction> = cluster
            .clone()
            .map(|j| {
                let md = *exact.mode(j);
                project_qh(move |p| md.eval(p), mesh, system.k(), quad_degree)
            })
            .collect::<Result<_>>()?;
        let px: Vec<Vec<f64>> = projected.iter().map(|v| v.to_global()).collect();
        let dx: Vec<Vec<f64>> = disc.iter().map(|&j| pairs.vectors[j].to_global()).collect();
        let cross = DMatrix::from_fn(px.len(), dx.len(), |a, b| {
            system.mass.bilinear(&px[a], &dx[b])
        });
        let rotation = procrustes(&cross);
        let mut errs = Vec::with_capacity(disc.len());
        for (b, &j) in disc.iter().enumerate() {
            let mut e = vec![0.0; dx[b].len()];
            for (a, p) in px.iter().enumerate() {
                let r = rotation[(a, b)];
                e.iter_mut().zip(p).for_each(|(ei, pi)| *ei += r * pi);
            }
            e.iter_mut().zip(&dx[b]).for_each(|(ei, di)| *ei -= di);
            let l2 = system.mass.bilinear(&e, &e).max(0.0).sqrt();
            let tri = system.stiffness.bilinear(&e, &e).max(0.0).sqrt();
            errs.push((j, l2, tri));
        }
        let m = errs.len() as f64;
        let l2_rms = (errs.iter().map(|e| e.1 * e.1).sum::<f64>() / m).sqrt();
        let tri_rms = (errs.iter().map(|e| e.2 * e.2).sum::<f64>() / m).sqrt();
        for (j, l2, tri) in errs {
            let lambda = exact.mode(j).lambda;
            rows.push(EigenErrorRow {
                j: j + 1,
                lambda,
                lambda_h: pairs.values[j],
                value_error: lambda - pairs.values[j],
                l2_error: l2,
                triple_error: tri,
                cluster: (cluster.start + 1, cluster.end),
                cluster_l2_rms: l2_rms,
                cluster_triple_rms: tri_rms,
            });
        }
    }
    Ok(rows)
}

/// `R = P Q^T` for `C = P Σ Q^T`, the semi-orthogonal maximizer of `tr(R^T C)`.
fn procrustes(c: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = c.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    u * vt
}

/// A discrete cluster is split when its internal spread exceeds the gap to a
/// neighboring discrete value outside the cluster.
fn check_cluster_separation(exact: &ExactSolution, values: &[f64]) -> Result<()> {
    let nev = values.len();
    for c in exact.clusters() {
        let end = c.end.min(nev);
        if c.start >= nev || end - c.start < 2 {
            continue;
        }
        let spread = values[end - 1] - values[c.start];
        let below = (c.start > 0).then(|| values[c.start] - values[c.start - 1]);
        let above = (end < nev && end == c.end).then(|| values[end] - values[end - 1]);
        for gap in [below, above].into_iter().flatten() {
            if spread > gap && spread > 1e-8 * values[end - 1].abs() {
                return Err(WgError::ClusterMismatch(format!(
                    "discrete values {}..={} spread {spread:.3e} exceeds neighbor gap {gap:.3e}",
                    c.start + 1,
                    end
                )));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub n: usize,
    /// One-based eigenvalue index.
    pub j: usize,
    pub lambda_h: f64,
    /// Exact value, or the coarser level's value for monotonicity checks.
    pub reference: f64,
}

#[derive(Clone, Debug, Default)]
pub struct LowerBoundReport {
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl LowerBoundReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// With a closed-form reference: `lambda_{j,h} <= lambda_j` at every level.
/// Without one: `lambda_{j,h}` nondecreasing under refinement. `levels` holds
/// `(n, values)` sorted by increasing `n`.
pub fn lower_bound_check(exact: &ExactSolution, levels: &[(usize, Vec<f64>)]) -> LowerBoundReport {
    let mut report = LowerBoundReport::default();
    if exact.has_reference() {
        let reference = exact.eigenvalues();
        for (n, values) in levels {
            for (j, (&lh, &l)) in values.iter().zip(&reference).enumerate() {
                report.checked += 1;
                if lh > l {
                    report.violations.push(Violation {
                        n: *n,
                        j: j + 1,
                        lambda_h: lh,
                        reference: l,
                    });
                }
            }
        }
    } else {
        for w in levels.windows(2) {
            let (_, coarse) = &w[0];
            let (n, fine) = &w[1];
            for (j, (&lf, &lc)) in fine.iter().zip(coarse).enumerate() {
                report.checked += 1;
                if lf < lc {
                    report.violations.push(Violation {
                        n: *n,
                        j: j + 1,
                        lambda_h: lf,
                        reference: lc,
                    });
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{solve_eigen_system, EigenOptions};
    use std::f64::consts::PI;

    #[test]
    fn orders_from_log_ratio() {
        let o = convergence_order(&[4.0, 1.0, 1.0]).unwrap();
        assert_eq!(o[0], None);
        assert!((o[1].unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(o[2], Some(0.0));
        let o = convergence_order(&[1.2926, 3.3916e-1]).unwrap();
        assert!((o[1].unwrap() - 1.9302).abs() < 5e-5);
        assert!(matches!(
            convergence_order(&[1.0, 0.0]),
            Err(WgError::NonPositiveError { level: 1, .. })
        ));
        assert!(convergence_order(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn scientific_format() {
        assert_eq!(sci(4.6914), "4.6914e+0");
        assert_eq!(sci(8.264e-3), "8.2640e-3");
        assert_eq!(sci(22.61), "2.2610e+1");
    }

    #[test]
    fn markdown_has_alternating_rows() {
        let mut t =
            ConvergenceTable::new(Domain::UnitSquare, 1, 0.0, "eigenvalue error", vec![4, 8]);
        t.push("lambda_1", vec![4.0, 1.0]).unwrap();
        assert!(t.push("bad", vec![1.0]).is_err());
        let md = t.to_markdown().unwrap();
        assert!(md.contains("| h | 1/4 | 1/8 |"));
        assert!(md.contains("| lambda_1 | 4.0000e+0 | 1.0000e+0 |"));
        assert!(md.contains("| order |  | 2.0000 |"));
    }

    #[test]
    fn detector_catches_upper_bound() {
        let ex = ExactSolution::unit_square(2);
        let ok = vec![(4, vec![19.0, 48.0, 48.0]), (8, vec![19.5, 49.0, 49.1])];
        assert!(lower_bound_check(&ex, &ok).passed());
        let bad = vec![
            (4, vec![19.0, 48.0, 48.0]),
            (8, vec![2.0 * PI * PI + 1e-3, 49.0, 49.1]),
        ];
        let r = lower_bound_check(&ex, &bad);
        assert_eq!(r.violations.len(), 1);
        assert_eq!((r.violations[0].n, r.violations[0].j), (8, 1));

        let lshape = ExactSolution::for_domain(Domain::LShape, 6);
        assert!(lower_bound_check(&lshape, &[(4, vec![9.5]), (8, vec![9.6])]).passed());
        assert!(!lower_bound_check(&lshape, &[(4, vec![9.6]), (8, vec![9.5])]).passed());
    }

    fn report_for(
        n: usize,
        k: usize,
        eps: f64,
        nev: usize,
    ) -> (Vec<EigenErrorRow>, EigenPairSet, GlobalSystem, Mesh) {
        let mesh = Mesh::uniform(Domain::UnitSquare, n).unwrap();
        let sys = GlobalSystem::assemble(&mesh, k, eps).unwrap();
        let pairs = solve_eigen_system(&mesh, &sys, nev, &EigenOptions::default()).unwrap();
        let ex = ExactSolution::unit_square(nev);
        let rows = eigen_error_report(&mesh, &sys, &ex, &pairs, 12).unwrap();
        (rows, pairs, sys, mesh)
    }

    #[test]
    fn first_eigenfunction_triple_error_coarse_level() {
        // k=1, eps=0.1, h=1/8
        let (rows, ..) = report_for(8, 1, 0.1, 1);
        assert!(
            (rows[0].triple_error - 1.1328).abs() < 0.15 * 1.1328,
            "{}",
            rows[0].triple_error
        );
        assert!(rows[0].value_error > 0.0);
    }

    #[test]
    fn cluster_errors_invariant_under_remixing() {
        let (rows, mut pairs, sys, mesh) = report_for(8, 1, 0.0, 3);
        let t = 0.7f64;
        let (c, s) = (t.cos(), t.sin());
        let (a, b) = (pairs.vectors[1].clone(), pairs.vectors[2].clone());
        let mut ra = a.clone();
        ra.scale(c);
        ra.axpy(s, &b);
        let mut rb = b;
        rb.scale(c);
        rb.axpy(-s, &a);
        pairs.vectors[1] = ra;
        pairs.vectors[2] = rb;
        let ex = ExactSolution::unit_square(3);
        let mixed = eigen_error_report(&mesh, &sys, &ex, &pairs, 12).unwrap();
        for j in 1..3 {
            assert!((rows[j].cluster_l2_rms - mixed[j].cluster_l2_rms).abs() < 1e-10);
            assert!((rows[j].cluster_triple_rms - mixed[j].cluster_triple_rms).abs() < 1e-10);
        }
        assert_eq!(rows[1].cluster, (2, 3));
    }

    #[test]
    fn truncated_cluster_still_aligns() {
        let (rows, ..) = report_for(8, 2, 0.0, 2);
        assert_eq!(rows.len(), 2);
        assert!(rows[1].l2_error < 0.05);
    }

    #[test]
    fn split_cluster_is_reported() {
        let ex = ExactSolution::unit_square(4);
        assert!(check_cluster_separation(&ex, &[19.0, 40.0, 60.0, 61.0]).is_err());
        assert!(check_cluster_separation(&ex, &[19.0, 48.0, 48.5, 70.0]).is_ok());
    }
}
