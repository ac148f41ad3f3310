//! Benchmark problems: Hartmann channel flow and the lid-driven cavity.

use std::sync::Arc;

use crate::fem::quadrature::gauss_legendre_unit;
use crate::fem::{AnalyticState, Component, StatePoint};
use crate::forms::{MhdConfig, QoiSpec, Region};

/// Hartmann flow on `[-1/2, 1/2]^2` driven by a constant pressure gradient
/// across a transverse unit magnetic field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HartmannParams {
    pub re: f64,
    pub re_m: f64,
    pub kappa: f64,
}

impl Default for HartmannParams {
    fn default() -> Self {
        Self { re: 16.0, re_m: 16.0, kappa: 1.0 }
    }
}

impl HartmannParams {
    /// Hartmann number `sqrt(kappa Re Re_m)`.
    pub fn ha(&self) -> f64 {
        (self.kappa * self.re * self.re_m).sqrt()
    }

    /// Pressure gradient magnitude `G` normalizing the centerline velocity.
    pub fn pressure_gradient(&self) -> f64 {
        let ha = self.ha();
        2.0 * ha * (ha / 2.0).sinh() / (self.re * ((ha / 2.0).cosh() - 1.0))
    }

    fn velocity_scale(&self) -> f64 {
        let ha = self.ha();
        self.pressure_gradient() * self.re / (2.0 * ha * (ha / 2.0).sinh())
    }

    fn field_scale(&self) -> f64 {
        self.pressure_gradient() / (2.0 * self.kappa * (self.ha() / 2.0).sinh())
    }

    pub fn velocity(&self, y: f64) -> f64 {
        let ha = self.ha();
        self.velocity_scale() * ((ha / 2.0).cosh() - (ha * y).cosh())
    }

    /// Induced field component `B_x`; the full field is `(B_x, 1)`.
    pub fn induced_field(&self, y: f64) -> f64 {
        let ha = self.ha();
        self.field_scale() * ((ha * y).sinh() - 2.0 * (ha / 2.0).sinh() * y)
    }

    pub fn pressure(&self, x: f64, y: f64) -> f64 {
        let bx = self.induced_field(y);
        -self.pressure_gradient() * x - 0.5 * self.kappa * bx * bx
    }

    pub fn exact(&self, [x, y]: [f64; 2]) -> StatePoint {
        let ha = self.ha();
        let du = -self.velocity_scale() * ha * (ha * y).sinh();
        let dbx = self.field_scale() * (ha * (ha * y).cosh() - 2.0 * (ha / 2.0).sinh());
        StatePoint {
            u: [self.velocity(y), 0.0],
            du: [[0.0, du], [0.0, 0.0]],
            b: [self.induced_field(y), 1.0],
            db: [[0.0, dbx], [0.0, 0.0]],
            p: self.pressure(x, y),
        }
    }

    pub fn exact_state(&self) -> AnalyticState {
        let p = *self;
        Arc::new(move |x| p.exact(x))
    }

    /// Exact solution as nodal values `[u_x, u_y, b_x, b_y, p]`.
    pub fn exact_values(&self, x: [f64; 2]) -> [f64; 5] {
        let s = self.exact(x);
        [s.u[0], s.u[1], s.b[0], s.b[1], s.p]
    }

    pub fn config(&self) -> MhdConfig {
        let p = *self;
        MhdConfig {
            re: self.re,
            re_m: self.re_m,
            kappa: self.kappa,
            forcing: None,
            velocity_bc: Arc::new(move |[_, y]| [p.velocity(y), 0.0]),
            magnetic_bc: Arc::new(move |[_, y]| [p.induced_field(y), 1.0]),
            pressure_pin: p.pressure(-0.5, -0.5),
        }
    }

    /// Default quantity of interest: `int u_x` over `[-1/4, 1/2] x [-1/4, 1/4]`.
    pub fn default_qoi() -> QoiSpec {
        QoiSpec { component: Component::Ux, region: Region::new(-0.25, 0.5, -0.25, 0.25), normalize: false }
    }

    /// Exact value of a rectangle-integral quantity of interest.
    pub fn exact_qoi(&self, q: &QoiSpec) -> f64 {
        let Region { x0, x1, y0, y1 } = q.region;
        let (w, hgt) = (x1 - x0, y1 - y0);
        let ha = self.ha();
        let value = match q.component {
            Component::Ux => {
                w * self.velocity_scale() * ((ha / 2.0).cosh() * hgt - ((ha * y1).sinh() - (ha * y0).sinh()) / ha)
            }
            Component::Uy => 0.0,
            Component::Bx => {
                w * self.field_scale()
                    * (((ha * y1).cosh() - (ha * y0).cosh()) / ha - (ha / 2.0).sinh() * (y1 * y1 - y0 * y0))
            }
            Component::By => w * hgt,
            Component::P => {
                let lin = -self.pressure_gradient() * 0.5 * (x1 * x1 - x0 * x0) * hgt;
                let quad = integrate(|y| self.induced_field(y).powi(2), y0, y1);
                lin - 0.5 * self.kappa * w * quad
            }
        };
        if q.normalize {
            value / q.region.area()
        } else {
            value
        }
    }
}

/// Composite Gauss-Legendre integration of a smooth function.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (x, w) = gauss_legendre_unit(12);
    let panels = 64;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let a0 = a + k as f64 * h;
            x.iter().zip(&w).map(|(x, w)| w * h * f(a0 + x * h)).sum::<f64>()
        })
        .sum()
}

/// Lid-driven cavity with a horizontal background field.
#[derive(Debug, Clone, PartialEq)]
pub struct LidParams {
    pub re: f64,
    pub re_m: f64,
    pub kappa: f64,
    /// Reynolds numbers visited by continuation; the last entry should be `re`.
    pub schedule: Vec<f64>,
}

impl LidParams {
    pub fn new(re: f64, re_m: f64, kappa: f64) -> Self {
        Self { re, re_m, kappa, schedule: Self::default_schedule(re) }
    }

    /// `[200, 500, 1000, 2000, ...]` truncated at `re`.
    pub fn default_schedule(re: f64) -> Vec<f64> {
        let mut s: Vec<f64> = [200.0, 500.0, 1000.0, 2000.0].into_iter().filter(|&r| r < re).collect();
        s.push(re);
        s
    }

    /// Lid velocity `30 (x - 1/2)^2 (x + 1/2)^2`, which has unit flux.
    pub fn lid_velocity(x: f64) -> f64 {
        30.0 * (x - 0.5).powi(2) * (x + 0.5).powi(2)
    }

    pub fn config(&self) -> MhdConfig {
        MhdConfig {
            re: self.re,
            re_m: self.re_m,
            kappa: self.kappa,
            forcing: None,
            velocity_bc: Arc::new(|[x, y]| if (y - 0.5).abs() < 1e-12 { [Self::lid_velocity(x), 0.0] } else { [0.0; 2] }),
            magnetic_bc: Arc::new(|_| [-1.0, 0.0]),
            pressure_pin: 0.0,
        }
    }

    /// Default quantity of interest: `int b_y` over `[-1/4, 1/4] x [0, 1/2]`.
    pub fn default_qoi() -> QoiSpec {
        QoiSpec { component: Component::By, region: Region::new(-0.25, 0.25, 0.0, 0.5), normalize: false }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hartmann_constants() {
        let p = HartmannParams::default();
        assert_eq!(p.ha(), 16.0);
        assert!((p.pressure_gradient() - 2.001342300803365).abs() < 1e-12);
        assert!(p.velocity(0.5).abs() < 1e-14 && p.velocity(-0.5).abs() < 1e-14);
        assert!(p.induced_field(0.5).abs() < 1e-13);
        // Centerline velocity is normalized to one.
        assert!((p.velocity(0.0) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn hartmann_solves_strong_equations() {
        // Second differences of the closed form against the 1D reduced system:
        // -u''/Re - G - kappa B' = 0 and -kappa u' - (kappa/Re_m) B'' = 0.
        let p = HartmannParams { re: 10.0, re_m: 3.0, kappa: 0.8 };
        let h = 1e-4;
        for y in [-0.41, -0.1, 0.2, 0.37] {
            let d2u = (p.velocity(y + h) - 2.0 * p.velocity(y) + p.velocity(y - h)) / (h * h);
            let d2b = (p.induced_field(y + h) - 2.0 * p.induced_field(y) + p.induced_field(y - h)) / (h * h);
            let s = p.exact([0.0, y]);
            let (du, db) = (s.du[0][1], s.db[0][1]);
            assert!((-d2u / p.re - p.pressure_gradient() - p.kappa * db).abs() < 1e-5);
            assert!((-p.kappa * du - p.kappa / p.re_m * d2b).abs() < 1e-5);
            let fd = (p.velocity(y + h) - p.velocity(y - h)) / (2.0 * h);
            assert!((fd - du).abs() < 1e-6);
        }
    }

    #[test]
    fn hartmann_qoi_closed_forms_match_quadrature() {
        let p = HartmannParams::default();
        let q = HartmannParams::default_qoi();
        let exact = p.exact_qoi(&q);
        assert!((exact - 0.3735340984996425).abs() < 1e-13);
        let Region { x0, x1, y0, y1 } = q.region;
        let numeric = (x1 - x0) * integrate(|y| p.velocity(y), y0, y1);
        assert!((exact - numeric).abs() < 1e-13);
        let mut qb = q;
        qb.component = Component::Bx;
        let numeric_b = (x1 - x0) * integrate(|y| p.induced_field(y), y0, y1);
        assert!((p.exact_qoi(&qb) - numeric_b).abs() < 1e-13);
    }

    #[test]
    fn lid_profile_has_unit_flux() {
        let flux = integrate(LidParams::lid_velocity, -0.5, 0.5);
        assert!((flux - 1.0).abs() < 1e-14);
        assert_eq!(LidParams::default_schedule(1000.0), vec![200.0, 500.0, 1000.0]);
        assert_eq!(LidParams::default_schedule(2000.0), vec![200.0, 500.0, 1000.0, 2000.0]);
        assert_eq!(LidParams::default_schedule(100.0), vec![100.0]);
    }
}
