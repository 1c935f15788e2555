//! Heavy top on se(3)*: vector equations, the Lie-Poisson bracket and the
//! Kaluza-Klein reformulation.
//!
//! State layout: `[Pi, Gamma]` for [`HeavyTop`] and `[Pi, Gamma, q, p]` for
//! [`KaluzaKleinTop`], where `p` is the conserved Kaluza-Klein momentum.

use crate::algebra::{default_fd_step, fd_gradient, Vec3};
use crate::error::{Error, Result};
use crate::integrate::OdeSystem;
use crate::rigid_body::Inertia3;

const UNIT_GAMMA_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeavyTopParams {
    pub inertia: Inertia3,
    pub mass: f64,
    pub gravity: f64,
    /// Body-frame vector from the support point to the center of mass.
    pub chi: Vec3,
}

impl HeavyTopParams {
    pub fn new(inertia: Inertia3, mass: f64, gravity: f64, chi: Vec3) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
        }
        if !(gravity >= 0.0) || !gravity.is_finite() {
            return Err(Error::InvalidParameter(format!("gravity must be non-negative, got {gravity}")));
        }
        if !chi.is_finite() {
            return Err(Error::InvalidParameter("chi must be finite".into()));
        }
        Ok(HeavyTopParams { inertia, mass, gravity, chi })
    }

    pub fn mg(&self) -> f64 {
        self.mass * self.gravity
    }

    /// `h = Pi . I^{-1} Pi / 2 + m g chi . Gamma`
    pub fn energy(&self, s: &HeavyTopState) -> f64 {
        self.inertia.energy(s.pi) + self.mg() * self.chi.dot(s.gamma)
    }

    /// The Kaluza-Klein momentum level set that reproduces the heavy top.
    pub fn kk_momentum(&self) -> Vec3 {
        self.chi * (-self.mg())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeavyTopState {
    pub pi: Vec3,
    /// Vertical direction seen from the body.
    pub gamma: Vec3,
}

impl HeavyTopState {
    /// Initial data; `Gamma` must be a unit vector.
    pub fn initial(pi: Vec3, gamma: Vec3) -> Result<Self> {
        check_unit_gamma(gamma)?;
        Ok(HeavyTopState { pi, gamma })
    }

    pub fn from_slice(x: &[f64]) -> Self {
        HeavyTopState { pi: Vec3([x[0], x[1], x[2]]), gamma: Vec3([x[3], x[4], x[5]]) }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.pi.0.iter().chain(&self.gamma.0).copied().collect()
    }
}

fn check_unit_gamma(gamma: Vec3) -> Result<()> {
    let dev = (gamma.norm_sq() - 1.0).abs();
    if dev > UNIT_GAMMA_TOL || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("Gamma must be a unit vector (| |Gamma|^2 - 1 | = {dev:e})")));
    }
    Ok(())
}

/// `Pi' = Pi x Omega + m g Gamma x chi`, `Gamma' = Gamma x Omega`.
pub fn heavy_top_rhs(p: &HeavyTopParams, s: &HeavyTopState) -> (Vec3, Vec3) {
    let omega = p.inertia.omega(s.pi);
    let dpi = s.pi.cross(omega) + s.gamma.cross(p.chi) * p.mg();
    let dgamma = s.gamma.cross(omega);
    (dpi, dgamma)
}

#[derive(Debug, Clone, Copy)]
pub struct HeavyTop {
    pub params: HeavyTopParams,
}

impl OdeSystem for HeavyTop {
    fn dim(&self) -> usize {
        6
    }
    fn rhs(&self, _t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let (dpi, dgamma) = heavy_top_rhs(&self.params, &HeavyTopState::from_slice(x));
        Ok(dpi.0.iter().chain(&dgamma.0).copied().collect())
    }
}

fn split_gradient(g: &[f64]) -> (Vec3, Vec3) {
    (Vec3([g[0], g[1], g[2]]), Vec3([g[3], g[4], g[5]]))
}

/// `{f, h} = -Pi . (f_Pi x h_Pi) - Gamma . (f_Pi x h_Gamma - h_Pi x f_Gamma)`,
/// gradients by central differences. `f` and `h` take `(Pi, Gamma)`.
pub fn heavy_top_bracket<F, H>(f: F, h: H, s: &HeavyTopState) -> Result<f64>
where
    F: Fn(Vec3, Vec3) -> f64,
    H: Fn(Vec3, Vec3) -> f64,
{
    let x = s.to_vec();
    let step = default_fd_step(&x);
    let lift = |g: &dyn Fn(Vec3, Vec3) -> f64| {
        fd_gradient(|y| g(Vec3([y[0], y[1], y[2]]), Vec3([y[3], y[4], y[5]])), &x, step)
    };
    let (f_pi, f_gamma) = split_gradient(&lift(&f)?);
    let (h_pi, h_gamma) = split_gradient(&lift(&h)?);
    Ok(-s.pi.dot(f_pi.cross(h_pi)) - s.gamma.dot(f_pi.cross(h_gamma) - h_pi.cross(f_gamma)))
}

/// Extended state of the Kaluza-Klein top.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KkTopState {
    pub pi: Vec3,
    pub gamma: Vec3,
    /// Passive coordinate, `q' = p - Gamma`.
    pub q: Vec3,
    /// Conserved momentum conjugate to `q`.
    pub p: Vec3,
}

impl KkTopState {
    pub fn initial(pi: Vec3, gamma: Vec3, q: Vec3, p: Vec3) -> Result<Self> {
        check_unit_gamma(gamma)?;
        Ok(KkTopState { pi, gamma, q, p })
    }

    pub fn from_slice(x: &[f64]) -> Self {
        let v = |i: usize| Vec3([x[i], x[i + 1], x[i + 2]]);
        KkTopState { pi: v(0), gamma: v(3), q: v(6), p: v(9) }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        [self.pi, self.gamma, self.q, self.p].iter().flat_map(|v| v.0).collect()
    }
}

/// `H_KK = Pi . I^{-1} Pi / 2 + |p - Gamma|^2 / 2 - |Gamma|^2 / 2`
pub fn kk_hamiltonian(inertia: &Inertia3, s: &KkTopState) -> f64 {
    inertia.energy(s.pi) + 0.5 * (s.p - s.gamma).norm_sq() - 0.5 * s.gamma.norm_sq()
}

/// Lie-Poisson equations of `H_KK` on se(3)* with `p` held fixed; since
/// `grad_Gamma H_KK = -p`, `Pi' = Pi x Omega - Gamma x p`.
pub fn kk_top_rhs(inertia: &Inertia3, s: &KkTopState) -> KkTopState {
    let omega = inertia.omega(s.pi);
    let grad_gamma = -s.p;
    KkTopState {
        pi: s.pi.cross(omega) + s.gamma.cross(grad_gamma),
        gamma: s.gamma.cross(omega),
        q: s.p - s.gamma,
        p: Vec3::ZERO,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KaluzaKleinTop {
    pub inertia: Inertia3,
}

impl OdeSystem for KaluzaKleinTop {
    fn dim(&self) -> usize {
        12
    }
    fn rhs(&self, _t: f64, x: &[f64]) -> Result<Vec<f64>> {
        Ok(kk_top_rhs(&self.inertia, &KkTopState::from_slice(x)).to_vec())
    }
}
