//! Axisymmetric geometrical optics. The optical axis `z` plays the role of
//! time; the image-plane phase space T*R^2 reduces to invariant coordinates
//! `X = |q|^2`, `Y = |p|^2`, `Z = p.q` with Casimir `S^2 = XY - Z^2`.

use crate::algebra::Vec3;
use crate::error::{Error, Result};
use crate::integrate::OdeSystem;
use crate::lie_poisson::canonical_bracket;

/// Refractive index squared as a function of `X = |q|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MediumProfile {
    Uniform {
        n2: f64,
    },
    /// Graded-index fiber, `n^2 = lam^2 + (mu - nu X)^2`.
    Fiber {
        lam: f64,
        mu: f64,
        nu: f64,
    },
}

impl Default for MediumProfile {
    fn default() -> Self {
        MediumProfile::Fiber { lam: 0.9, mu: 1.0, nu: 0.1 }
    }
}

impl MediumProfile {
    pub fn uniform(n2: f64) -> Result<Self> {
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::InvalidParameter(format!("n^2 must be positive, got {n2}")));
        }
        Ok(MediumProfile::Uniform { n2 })
    }

    pub fn fiber(lam: f64, mu: f64, nu: f64) -> Result<Self> {
        if ![lam, mu, nu].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("fiber parameters must be finite".into()));
        }
        if lam == 0.0 {
            return Err(Error::InvalidParameter("lam = 0 lets n^2 vanish at X = mu/nu".into()));
        }
        Ok(MediumProfile::Fiber { lam, mu, nu })
    }

    pub fn n2(&self, x: f64) -> f64 {
        match *self {
            MediumProfile::Uniform { n2 } => n2,
            MediumProfile::Fiber { lam, mu, nu } => lam * lam + (mu - nu * x).powi(2),
        }
    }

    /// `d n^2 / dX`
    pub fn dn2(&self, x: f64) -> f64 {
        match *self {
            MediumProfile::Uniform { .. } => 0.0,
            MediumProfile::Fiber { mu, nu, .. } => -2.0 * nu * (mu - nu * x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RayState4D {
    pub q: [f64; 2],
    pub p: [f64; 2],
}

impl RayState4D {
    pub fn new(q: [f64; 2], p: [f64; 2]) -> Self {
        RayState4D { q, p }
    }

    pub fn from_slice(x: &[f64]) -> Self {
        RayState4D { q: [x[0], x[1]], p: [x[2], x[3]] }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.q[0], self.q[1], self.p[0], self.p[1]]
    }

    /// Skew angular momentum `p x q` about the optical axis.
    pub fn p_phi(&self) -> f64 {
        self.p[0] * self.q[1] - self.p[1] * self.q[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReducedRayState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ReducedRayState {
    pub fn from_vec3(v: Vec3) -> Self {
        ReducedRayState { x: v[0], y: v[1], z: v[2] }
    }

    pub fn to_vec3(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    /// Petzval invariant `S^2 = XY - Z^2`.
    pub fn s2(&self) -> f64 {
        self.x * self.y - self.z * self.z
    }
}

fn root(m: &MediumProfile, x: f64, y: f64) -> Result<f64> {
    let margin = m.n2(x) - y;
    if !(margin > 0.0) {
        return Err(Error::GrazingIncidence { margin });
    }
    Ok(margin.sqrt())
}

/// `H = -sqrt(n^2(|q|^2) - |p|^2)`, always negative.
pub fn optical_hamiltonian(m: &MediumProfile, s: &RayState4D) -> Result<f64> {
    let r = reduce(s);
    Ok(-root(m, r.x, r.y)?)
}

/// `q' = -p / H`, `p' = -(1 / 2H) dn^2/dq` with `dn^2/dq = 2 q n^2'(X)`.
pub fn ray_rhs(m: &MediumProfile, s: &RayState4D) -> Result<([f64; 2], [f64; 2])> {
    let h = optical_hamiltonian(m, s)?;
    let x = s.q[0] * s.q[0] + s.q[1] * s.q[1];
    let k = -m.dn2(x) / h;
    Ok(([-s.p[0] / h, -s.p[1] / h], [k * s.q[0], k * s.q[1]]))
}

pub fn reduce(s: &RayState4D) -> ReducedRayState {
    let [q1, q2] = s.q;
    let [p1, p2] = s.p;
    ReducedRayState { x: q1 * q1 + q2 * q2, y: p1 * p1 + p2 * p2, z: p1 * q1 + p2 * q2 }
}

/// Reduced Hamiltonian `h(X, Y) = -sqrt(n^2(X) - Y)`.
pub fn reduced_hamiltonian(m: &MediumProfile, r: &ReducedRayState) -> Result<f64> {
    Ok(-root(m, r.x, r.y)?)
}

/// Gradient of the R^3 Casimir that reproduces the canonical flow. The
/// canonical brackets `{X,Y} = 4Z, {Y,Z} = -2Y, {Z,X} = -2X` correspond to
/// `x' = grad C x grad h` with `C = 2 S^2`.
pub fn reduced_casimir_gradient(r: &ReducedRayState) -> Vec3 {
    Vec3::new(2.0 * r.y, 2.0 * r.x, -4.0 * r.z)
}

pub fn reduced_rhs(m: &MediumProfile, r: &ReducedRayState) -> Result<ReducedRayState> {
    let h = reduced_hamiltonian(m, r)?;
    let grad_h = Vec3::new(m.dn2(r.x) / (2.0 * h), -1.0 / (2.0 * h), 0.0);
    Ok(ReducedRayState::from_vec3(reduced_casimir_gradient(r).cross(grad_h)))
}

fn invariant_x(q: &[f64], _: &[f64]) -> f64 {
    q[0] * q[0] + q[1] * q[1]
}

fn invariant_y(_: &[f64], p: &[f64]) -> f64 {
    p[0] * p[0] + p[1] * p[1]
}

fn invariant_z(q: &[f64], p: &[f64]) -> f64 {
    p[0] * q[0] + p[1] * q[1]
}

/// Canonical brackets of the invariant coordinates at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureSample {
    pub state: RayState4D,
    pub xy: f64,
    pub yz: f64,
    pub zx: f64,
    /// Largest violation of `{X,Y} = 4Z`, `{Y,Z} = -2Y`, `{Z,X} = -2X`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClosureReport {
    pub samples: Vec<ClosureSample>,
    pub max_residual: f64,
}

impl ClosureReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_residual <= tol
    }
}

pub fn bracket_closure_check(states: &[RayState4D]) -> Result<ClosureReport> {
    let mut report = ClosureReport::default();
    for s in states {
        let xy = canonical_bracket(invariant_x, invariant_y, &s.q, &s.p)?;
        let yz = canonical_bracket(invariant_y, invariant_z, &s.q, &s.p)?;
        let zx = canonical_bracket(invariant_z, invariant_x, &s.q, &s.p)?;
        let r = reduce(s);
        let residual = (xy - 4.0 * r.z).abs().max((yz + 2.0 * r.y).abs()).max((zx + 2.0 * r.x).abs());
        report.max_residual = report.max_residual.max(residual);
        report.samples.push(ClosureSample { state: *s, xy, yz, zx, residual });
    }
    Ok(report)
}

/// Canonical ray flow, state `[q1, q2, p1, p2]`.
#[derive(Debug, Clone, Copy)]
pub struct Ray4D {
    pub medium: MediumProfile,
}

impl OdeSystem for Ray4D {
    fn dim(&self) -> usize {
        4
    }
    fn rhs(&self, _z: f64, x: &[f64]) -> Result<Vec<f64>> {
        let (dq, dp) = ray_rhs(&self.medium, &RayState4D::from_slice(x))?;
        Ok(vec![dq[0], dq[1], dp[0], dp[1]])
    }
}

/// Reduced flow, state `[X, Y, Z]`.
#[derive(Debug, Clone, Copy)]
pub struct RayReduced {
    pub medium: MediumProfile,
}

impl OdeSystem for RayReduced {
    fn dim(&self) -> usize {
        3
    }
    fn rhs(&self, _z: f64, x: &[f64]) -> Result<Vec<f64>> {
        let d = reduced_rhs(&self.medium, &ReducedRayState { x: x[0], y: x[1], z: x[2] })?;
        Ok(vec![d.x, d.y, d.z])
    }
}
