//! Dual-weighted residual estimate of the error in a quantity of interest.
//!
//! With `U_h` the discrete solution and `Phi_h` the adjoint solution on an
//! enriched space, `eta = (f, phi) - N(U_h; Phi_h)`, split by test component
//! into momentum, continuity and magnetic parts.

use crate::fem::{CellGeometry, FeFunction, StatePoint};
use crate::forms::assembly::rule_for;
use crate::forms::kernels;
use crate::forms::{self, MhdConfig, TermMask};

/// Residual contributions `E_mom + E_con + E_M = eta`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorBreakdown {
    pub e_mom: f64,
    pub e_con: f64,
    pub e_m: f64,
}

impl ErrorBreakdown {
    pub fn eta(&self) -> f64 {
        self.e_mom + self.e_con + self.e_m
    }
}

/// Evaluates the three residual contributions by quadrature.
pub fn estimate(u_h: &FeFunction, phi_h: &FeFunction, config: &MhdConfig) -> ErrorBreakdown {
    let mesh = u_h.space().mesh();
    assert_eq!(mesh.num_cells(), phi_h.space().mesh().num_cells(), "functions on different meshes");
    let mut spaces = u_h.spaces();
    spaces.push(phi_h.space());
    let rule = rule_for(&spaces);
    let (bu, bphi) = (u_h.bind(&rule), phi_h.bind(&rule));
    let mut us = vec![StatePoint::default(); rule.len()];
    let mut phis = vec![StatePoint::default(); rule.len()];
    let coeffs = config.coefficients();
    let mut acc = [0.0; 3];
    for cell in 0..mesh.num_cells() {
        let geo = CellGeometry::new(mesh.cell_vertices(cell));
        bu.eval_cell(cell, &geo, &mut us);
        bphi.eval_cell(cell, &geo, &mut phis);
        for (q, (xi, w)) in rule.points().iter().zip(rule.weights()).enumerate() {
            let pair = kernels::residual(&us[q], config.forcing_at(geo.map(*xi)), &coeffs, TermMask::ALL);
            let split = pair.apply_split(&phis[q]);
            for k in 0..3 {
                acc[k] -= w * geo.det * split[k];
            }
        }
    }
    ErrorBreakdown { e_mom: acc[0], e_con: acc[1], e_m: acc[2] }
}

/// Same estimate through the assembled residual: `-sum_i Phi_i R_i(U_h)`.
pub fn estimate_algebraic(u_h: &FeFunction, phi_h: &FeFunction, config: &MhdConfig) -> f64 {
    let r = forms::residual(phi_h.space(), u_h, config, TermMask::ALL);
    -r.iter().zip(phi_h.coeffs()).map(|(a, b)| a * b).sum::<f64>()
}

/// `J(U) - J(U_h)`.
pub fn true_error(qoi_ref: f64, qoi_h: f64) -> f64 {
    qoi_ref - qoi_h
}

/// `eta / (J(U) - J(U_h))`.
pub fn effectivity(eta: f64, true_error: f64) -> f64 {
    eta / true_error
}
