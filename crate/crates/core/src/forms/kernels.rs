//! Pointwise integrands of the exact-penalty MHD forms.
//!
//! Every form is written as a [`TestPairing`]: for each test component a
//! coefficient multiplying the test value and a vector multiplying its
//! gradient. Two-dimensional conventions: `curl v = dx v2 - dy v1`,
//! `v x w = v1 w2 - v2 w1`, `gamma k x v = gamma (-v2, v1)` and
//! `curl (omega k) = (dy omega, -dx omega)`.

use crate::fem::StatePoint;

const UX: usize = 0;
const BX: usize = 2;
const P: usize = 4;

/// Terms of the primal form, usable as a mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Term {
    /// `(1/Re)(grad u, grad v)`
    Viscous,
    /// `((u . grad) u, v)`
    Convection,
    /// `-(p, div v)`
    Pressure,
    /// `(q, div u)`
    Continuity,
    /// `-kappa((curl b) x b, v)`
    Lorentz,
    /// `-kappa(curl(u x b), c)`
    Induction,
    /// `(kappa/Re_m)(curl b, curl c)`
    MagneticCurl,
    /// `(kappa/Re_m)(div b, div c)`, the exact penalty.
    MagneticDiv,
}

impl Term {
    pub const ALL: [Term; 8] = [
        Term::Viscous,
        Term::Convection,
        Term::Pressure,
        Term::Continuity,
        Term::Lorentz,
        Term::Induction,
        Term::MagneticCurl,
        Term::MagneticDiv,
    ];
}

/// Set of enabled terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TermMask(u16);

impl TermMask {
    pub const ALL: TermMask = TermMask(0xff);
    pub const NONE: TermMask = TermMask(0);

    pub fn only(term: Term) -> Self {
        TermMask(1 << term as u16)
    }

    pub fn with(self, term: Term) -> Self {
        TermMask(self.0 | 1 << term as u16)
    }

    pub fn without(self, term: Term) -> Self {
        TermMask(self.0 & !(1 << term as u16))
    }

    #[inline]
    pub fn has(self, term: Term) -> bool {
        self.0 & (1 << term as u16) != 0
    }
}

impl Default for TermMask {
    fn default() -> Self {
        Self::ALL
    }
}

/// Physical coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub re: f64,
    pub re_m: f64,
    pub kappa: f64,
}

/// Coefficients of test values (`f`) and test gradients (`g`) per component
/// `[u_x, u_y, b_x, b_y, p]`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TestPairing {
    pub f: [f64; 5],
    pub g: [[f64; 2]; 5],
}

impl TestPairing {
    /// Value of the pairing against a test state.
    pub fn apply(&self, v: &StatePoint) -> f64 {
        let mut s = 0.0;
        for c in 0..2 {
            s += self.f[UX + c] * v.u[c] + self.g[UX + c][0] * v.du[c][0] + self.g[UX + c][1] * v.du[c][1];
            s += self.f[BX + c] * v.b[c] + self.g[BX + c][0] * v.db[c][0] + self.g[BX + c][1] * v.db[c][1];
        }
        s + self.f[P] * v.p
    }

    /// Same as [`apply`](Self::apply), restricted to momentum, continuity
    /// and magnetic test components.
    pub fn apply_split(&self, v: &StatePoint) -> [f64; 3] {
        let mut out = [0.0; 3];
        for c in 0..2 {
            out[0] += self.f[UX + c] * v.u[c] + self.g[UX + c][0] * v.du[c][0] + self.g[UX + c][1] * v.du[c][1];
            out[2] += self.f[BX + c] * v.b[c] + self.g[BX + c][0] * v.db[c][0] + self.g[BX + c][1] * v.db[c][1];
        }
        out[1] = self.f[P] * v.p;
        out
    }
}

/// `curl(omega k)` where `omega = a x b` with gradients.
#[inline]
fn curl_of_cross(a: [f64; 2], da: [[f64; 2]; 2], b: [f64; 2], db: [[f64; 2]; 2]) -> [f64; 2] {
    let d = |k: usize| da[0][k] * b[1] + a[0] * db[1][k] - da[1][k] * b[0] - a[1] * db[0][k];
    [d(1), -d(0)]
}

#[inline]
fn curl(d: [[f64; 2]; 2]) -> f64 {
    d[1][0] - d[0][1]
}

#[inline]
fn div(d: [[f64; 2]; 2]) -> f64 {
    d[0][0] + d[1][1]
}

/// Adds the curl-curl and div-div pairings of a magnetic field with
/// gradient `d`.
#[inline]
fn magnetic_diffusion(out: &mut TestPairing, d: [[f64; 2]; 2], alpha: f64, mask: TermMask) {
    if mask.has(Term::MagneticCurl) {
        let c = alpha * curl(d);
        out.g[BX][1] -= c;
        out.g[BX + 1][0] += c;
    }
    if mask.has(Term::MagneticDiv) {
        let dv = alpha * div(d);
        out.g[BX][0] += dv;
        out.g[BX + 1][1] += dv;
    }
}

/// Residual integrand `N(U; V) - (f, v)` at one point.
pub fn residual(s: &StatePoint, forcing: [f64; 2], k: &Coefficients, mask: TermMask) -> TestPairing {
    let mut out = TestPairing::default();
    let nu = 1.0 / k.re;
    for i in 0..2 {
        out.f[UX + i] -= forcing[i];
        if mask.has(Term::Viscous) {
            out.g[UX + i] = [nu * s.du[i][0], nu * s.du[i][1]];
        }
        if mask.has(Term::Convection) {
            out.f[UX + i] += s.du[i][0] * s.u[0] + s.du[i][1] * s.u[1];
        }
    }
    if mask.has(Term::Pressure) {
        out.g[UX][0] -= s.p;
        out.g[UX + 1][1] -= s.p;
    }
    if mask.has(Term::Continuity) {
        out.f[P] += div(s.du);
    }
    if mask.has(Term::Lorentz) {
        let cb = curl(s.db);
        out.f[UX] += k.kappa * cb * s.b[1];
        out.f[UX + 1] -= k.kappa * cb * s.b[0];
    }
    if mask.has(Term::Induction) {
        let z = curl_of_cross(s.u, s.du, s.b, s.db);
        out.f[BX] -= k.kappa * z[0];
        out.f[BX + 1] -= k.kappa * z[1];
    }
    magnetic_diffusion(&mut out, s.db, k.kappa / k.re_m, mask);
    out
}

/// Gateaux derivative of the residual at `s` in direction `w`.
pub fn jacobian(s: &StatePoint, w: &StatePoint, k: &Coefficients, mask: TermMask) -> TestPairing {
    let mut out = TestPairing::default();
    let nu = 1.0 / k.re;
    for i in 0..2 {
        if mask.has(Term::Viscous) {
            out.g[UX + i] = [nu * w.du[i][0], nu * w.du[i][1]];
        }
        if mask.has(Term::Convection) {
            out.f[UX + i] += s.du[i][0] * w.u[0] + s.du[i][1] * w.u[1] + w.du[i][0] * s.u[0] + w.du[i][1] * s.u[1];
        }
    }
    if mask.has(Term::Pressure) {
        out.g[UX][0] -= w.p;
        out.g[UX + 1][1] -= w.p;
    }
    if mask.has(Term::Continuity) {
        out.f[P] += div(w.du);
    }
    if mask.has(Term::Lorentz) {
        let (cd, cb) = (curl(w.db), curl(s.db));
        // (curl d) x b + (curl b) x d
        out.f[UX] += k.kappa * (cd * s.b[1] + cb * w.b[1]);
        out.f[UX + 1] -= k.kappa * (cd * s.b[0] + cb * w.b[0]);
    }
    if mask.has(Term::Induction) {
        let z1 = curl_of_cross(w.u, w.du, s.b, s.db);
        let z2 = curl_of_cross(s.u, s.du, w.b, w.db);
        out.f[BX] -= k.kappa * (z1[0] + z2[0]);
        out.f[BX + 1] -= k.kappa * (z1[1] + z2[1]);
    }
    magnetic_diffusion(&mut out, w.db, k.kappa / k.re_m, mask);
    out
}

/// Adjoint integrand for trial `phi = (phi, beta, pi)` paired with test
/// `V = (v, c, q)`. `sum` holds `(u + u_h, b + b_h)`; with both states equal
/// the form is the transpose of the Jacobian.
pub fn adjoint(sum: &StatePoint, phi: &StatePoint, k: &Coefficients, mask: TermMask) -> TestPairing {
    let mut out = TestPairing::default();
    let nu = 1.0 / k.re;
    let (s, ds, t, dt) = (sum.u, sum.du, sum.b, sum.db);
    for i in 0..2 {
        if mask.has(Term::Viscous) {
            out.g[UX + i] = [nu * phi.du[i][0], nu * phi.du[i][1]];
        }
        if mask.has(Term::Convection) {
            // 1/2 [ (grad s)^T phi - (s . grad) phi - (div s) phi ]
            let grad_t = ds[0][i] * phi.u[0] + ds[1][i] * phi.u[1];
            let adv = phi.du[i][0] * s[0] + phi.du[i][1] * s[1];
            out.f[UX + i] += 0.5 * (grad_t - adv - div(ds) * phi.u[i]);
        }
    }
    if mask.has(Term::Pressure) {
        out.g[UX][0] += phi.p;
        out.g[UX + 1][1] += phi.p;
    }
    if mask.has(Term::Continuity) {
        out.f[P] -= div(phi.du);
    }
    if mask.has(Term::Lorentz) {
        // 1/2 ( -(curl t) x phi + curl(t x phi) )
        let ct = curl(dt);
        let z = curl_of_cross(t, dt, phi.u, phi.du);
        let y = [0.5 * (ct * phi.u[1] + z[0]), 0.5 * (-ct * phi.u[0] + z[1])];
        out.f[BX] -= k.kappa * y[0];
        out.f[BX + 1] -= k.kappa * y[1];
    }
    if mask.has(Term::Induction) {
        let cbeta = curl(phi.db);
        // -kappa/2 t x (curl beta) against v, +kappa/2 s x (curl beta) against c
        out.f[UX] -= 0.5 * k.kappa * cbeta * t[1];
        out.f[UX + 1] += 0.5 * k.kappa * cbeta * t[0];
        out.f[BX] += 0.5 * k.kappa * cbeta * s[1];
        out.f[BX + 1] -= 0.5 * k.kappa * cbeta * s[0];
    }
    magnetic_diffusion(&mut out, phi.db, k.kappa / k.re_m, mask);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn point() -> impl Strategy<Value = StatePoint> {
        prop::array::uniform13(-2.0f64..2.0).prop_map(|a| StatePoint {
            u: [a[0], a[1]],
            du: [[a[2], a[3]], [a[4], a[5]]],
            b: [a[6], a[7]],
            db: [[a[8], a[9]], [a[10], a[11]]],
            p: a[12],
        })
    }

    fn scale(s: &StatePoint, h: f64) -> StatePoint {
        StatePoint {
            u: s.u.map(|v| v * h),
            du: s.du.map(|r| r.map(|v| v * h)),
            b: s.b.map(|v| v * h),
            db: s.db.map(|r| r.map(|v| v * h)),
            p: s.p * h,
        }
    }

    const K: Coefficients = Coefficients { re: 7.0, re_m: 3.0, kappa: 1.3 };

    proptest! {
        #[test]
        fn jacobian_is_derivative_of_residual(s in point(), w in point(), v in point()) {
            let h = 1e-6;
            let rp = residual(&s.add(&scale(&w, h)), [0.3, -0.2], &K, TermMask::ALL).apply(&v);
            let rm = residual(&s.add(&scale(&w, -h)), [0.3, -0.2], &K, TermMask::ALL).apply(&v);
            let j = jacobian(&s, &w, &K, TermMask::ALL).apply(&v);
            prop_assert!(((rp - rm) / (2.0 * h) - j).abs() < 1e-6 * (1.0 + j.abs()));
        }

        #[test]
        fn residual_is_quadratic(s in point(), t in 0.1f64..3.0) {
            // Each term is at most quadratic: R(tU) = t L(U) + t^2 Q(U) - f.
            let f = [0.0, 0.0];
            let v = StatePoint { u: [1.0, -0.5], du: [[0.2, 0.1], [0.3, -0.4]], b: [0.7, 0.2], db: [[0.5, -0.1], [0.6, 0.9]], p: 0.8 };
            let r1 = residual(&s, f, &K, TermMask::ALL).apply(&v);
            let r2 = residual(&scale(&s, 2.0), f, &K, TermMask::ALL).apply(&v);
            let rt = residual(&scale(&s, t), f, &K, TermMask::ALL).apply(&v);
            let q = (r2 - 2.0 * r1) / 2.0;
            let l = r1 - q;
            prop_assert!((rt - (t * l + t * t * q)).abs() < 1e-9 * (1.0 + rt.abs()));
        }
    }

    #[test]
    fn masks_compose() {
        let m = TermMask::NONE.with(Term::Lorentz).with(Term::Viscous);
        assert!(m.has(Term::Lorentz) && m.has(Term::Viscous) && !m.has(Term::Induction));
        assert!(!TermMask::ALL.without(Term::Pressure).has(Term::Pressure));
        assert_eq!(TermMask::only(Term::MagneticDiv), TermMask::NONE.with(Term::MagneticDiv));
    }

    #[test]
    fn termwise_residuals_sum_to_full() {
        let s = StatePoint { u: [0.3, -0.7], du: [[1.0, 2.0], [-0.5, 0.25]], b: [1.5, 0.4], db: [[0.1, -0.3], [0.8, 0.6]], p: 2.0 };
        let v = StatePoint { u: [0.9, 0.4], du: [[0.7, -0.2], [0.5, 1.1]], b: [-0.3, 0.6], db: [[0.2, 0.4], [-0.9, 0.3]], p: -1.0 };
        let full = residual(&s, [0.0; 2], &K, TermMask::ALL).apply(&v);
        let parts: f64 = Term::ALL.iter().map(|&t| residual(&s, [0.0; 2], &K, TermMask::only(t)).apply(&v)).sum();
        assert!((full - parts).abs() < 1e-13);
    }
}
