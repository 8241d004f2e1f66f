//! Discrete norms on `V_h` and projection errors.

use rayon::prelude::*;

use crate::assembly::GlobalSystem;
use crate::basis::TriangleRule;
use crate::error::{Result, WgError};
use crate::mesh::{Mesh, Point};
use crate::wg::{project_qh, CellGeometry, LocalElement, LocalRules, WeakFunction};

fn check_dims(system: &GlobalSystem, v: &WeakFunction) -> Result<()> {
    let total = v.v0.len() + v.vb.len();
    if total != system.dofmap.total() || v.degree() != system.k() {
        return Err(WgError::DimensionMismatch {
            expected: system.dofmap.total(),
            actual: total,
        });
    }
    Ok(())
}

/// `|||v||| = sqrt(a_w(v, v))`.
pub fn triple_norm(system: &GlobalSystem, v: &WeakFunction) -> Result<f64> {
    check_dims(system, v)?;
    let x = v.to_global();
    Ok(system.stiffness.bilinear(&x, &x).max(0.0).sqrt())
}

/// `||v_0|| = sqrt(b_w(v, v))`.
pub fn l2_norm(system: &GlobalSystem, v: &WeakFunction) -> Result<f64> {
    check_dims(system, v)?;
    let x = v.to_global();
    Ok(system.mass.bilinear(&x, &x).max(0.0).sqrt())
}

fn projection_error(
    u: impl Fn(Point) -> f64 + Sync,
    mesh: &Mesh,
    system: &GlobalSystem,
    u_h: &WeakFunction,
    quad_degree: usize,
) -> Result<WeakFunction> {
    check_dims(system, u_h)?;
    let mut e = project_qh(u, mesh, system.k(), quad_degree)?;
    e.axpy(-1.0, u_h);
    Ok(e)
}

/// `|||Q_h u - u_h|||`.
pub fn triple_norm_error(
    u: impl Fn(Point) -> f64 + Sync,
    mesh: &Mesh,
    system: &GlobalSystem,
    u_h: &WeakFunction,
    quad_degree: usize,
) -> Result<f64> {
    let e = projection_error(u, mesh, system, u_h, quad_degree)?;
    triple_norm(system, &e)
}

/// `||Q_0 u - u_0||`.
pub fn l2_error(
    u: impl Fn(Point) -> f64 + Sync,
    mesh: &Mesh,
    system: &GlobalSystem,
    u_h: &WeakFunction,
    quad_degree: usize,
) -> Result<f64> {
    let e = projection_error(u, mesh, system, u_h, quad_degree)?;
    l2_norm(system, &e)
}

/// The two parts of `a_w(v, v)`, accumulated cell by cell from the local operators.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyTerms {
    /// `||∇_w v||^2`.
    pub gradient: f64,
    /// `s(v, v)`.
    pub stabilization: f64,
    /// `sum_T h_T^{-1} ||Q_b v_0 - v_b||^2`.
    pub jump: f64,
    /// `sum_T ||∇ v_0||_T^2`.
    pub broken_gradient: f64,
}

impl std::ops::Add for EnergyTerms {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            gradient: self.gradient + o.gradient,
            stabilization: self.stabilization + o.stabilization,
            jump: self.jump + o.jump,
            broken_gradient: self.broken_gradient + o.broken_gradient,
        }
    }
}

pub fn energy_terms(mesh: &Mesh, v: &WeakFunction, eps: f64) -> Result<EnergyTerms> {
    let k = v.degree();
    let rules = LocalRules::new(k)?;
    let grad_rule = TriangleRule::with_degree(2 * k);
    (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| -> Result<EnergyTerms> {
            let geom = CellGeometry::from_mesh(mesh, c);
            let el = LocalElement::new(&geom, &rules, eps)?;
            let local = v.local(mesh, c);
            let g = el.gradient.apply(&local);
            let gradient = g.dot(&(&el.gradient.rhs * &local));
            let stabilization = el.stabilization.form(&local);
            let jump = local.dot(&(&el.stabilization.core * &local)) / geom.diameter;
            let basis = geom.basis(k);
            let (mut dx, mut dy) = (vec![0.0; basis.dim()], vec![0.0; basis.dim()]);
            let coeffs = v.cell(c);
            let mut broken_gradient = 0.0;
            for (p, w) in grad_rule.mapped(&geom.triangle) {
                basis.grad_into(p, &mut dx, &mut dy);
                let gx: f64 = coeffs.iter().zip(&dx).map(|(a, b)| a * b).sum();
                let gy: f64 = coeffs.iter().zip(&dy).map(|(a, b)| a * b).sum();
                broken_gradient += w * (gx * gx + gy * gy);
            }
            Ok(EnergyTerms {
                gradient,
                stabilization,
                jump,
                broken_gradient,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(|cells| cells.into_iter().fold(EnergyTerms::default(), |a, b| a + b))
}

/// `|||v|||_1^2 = ||∇_w v||^2 + sum_T h_T^{-1} ||Q_b v_0 - v_b||^2`.
pub fn triple_norm_1(mesh: &Mesh, v: &WeakFunction) -> Result<f64> {
    let t = energy_terms(mesh, v, 0.0)?;
    Ok((t.gradient + t.jump).sqrt())
}

/// `||v||_V^2 = sum_T ||∇ v_0||_T^2 + h_T^{-1} ||Q_b v_0 - v_b||^2`.
pub fn v_norm(mesh: &Mesh, v: &WeakFunction) -> Result<f64> {
    let t = energy_terms(mesh, v, 0.0)?;
    Ok((t.broken_gradient + t.jump).sqrt())
}
