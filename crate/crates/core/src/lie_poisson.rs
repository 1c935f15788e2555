//! The R^3 Poisson bracket `{f, h} = -grad C . (grad f x grad h)` with its
//! generated flow `x' = grad C x grad H`, plus finite-difference evaluation of
//! canonical and R^3 brackets used to verify bracket relations.

use crate::algebra::{default_fd_step, fd_gradient, fd_gradient3, Vec3};
use crate::error::{Error, Result};
use crate::integrate::{invariant_drift, DriftReport, Invariant, OdeSystem, Trajectory};
use std::sync::Arc;

pub type ScalarField3 = Arc<dyn Fn(Vec3) -> f64 + Send + Sync>;
pub type GradientField3 = Arc<dyn Fn(Vec3) -> Vec3 + Send + Sync>;

/// A Casimir/Hamiltonian pair on R^3. Gradients fall back to central
/// differences when no analytic form is supplied.
#[derive(Clone)]
pub struct R3PoissonSystem {
    casimir: ScalarField3,
    hamiltonian: ScalarField3,
    casimir_grad: Option<GradientField3>,
    hamiltonian_grad: Option<GradientField3>,
}

impl R3PoissonSystem {
    pub fn new(
        casimir: impl Fn(Vec3) -> f64 + Send + Sync + 'static,
        hamiltonian: impl Fn(Vec3) -> f64 + Send + Sync + 'static,
    ) -> Self {
        R3PoissonSystem {
            casimir: Arc::new(casimir),
            hamiltonian: Arc::new(hamiltonian),
            casimir_grad: None,
            hamiltonian_grad: None,
        }
    }

    pub fn with_gradients(
        mut self,
        casimir_grad: impl Fn(Vec3) -> Vec3 + Send + Sync + 'static,
        hamiltonian_grad: impl Fn(Vec3) -> Vec3 + Send + Sync + 'static,
    ) -> Self {
        self.casimir_grad = Some(Arc::new(casimir_grad));
        self.hamiltonian_grad = Some(Arc::new(hamiltonian_grad));
        self
    }

    pub fn casimir(&self, x: Vec3) -> f64 {
        (self.casimir)(x)
    }

    pub fn hamiltonian(&self, x: Vec3) -> f64 {
        (self.hamiltonian)(x)
    }

    pub fn grad_casimir(&self, x: Vec3) -> Result<Vec3> {
        gradient(&self.casimir, self.casimir_grad.as_ref(), x, "Casimir gradient")
    }

    pub fn grad_hamiltonian(&self, x: Vec3) -> Result<Vec3> {
        gradient(&self.hamiltonian, self.hamiltonian_grad.as_ref(), x, "Hamiltonian gradient")
    }

    /// Rigid-body instance: `C = |Pi|^2 / 2`, `H = sum Pi_i^2 / (2 I_i)`.
    pub fn rigid_body(inertia: Vec3) -> Self {
        let inv = Vec3::new(1.0 / inertia[0], 1.0 / inertia[1], 1.0 / inertia[2]);
        R3PoissonSystem::new(|x| 0.5 * x.norm_sq(), move |x| 0.5 * x.dot(x.hadamard(inv)))
            .with_gradients(|x| x, move |x| x.hadamard(inv))
    }
}

fn gradient(f: &ScalarField3, analytic: Option<&GradientField3>, x: Vec3, what: &str) -> Result<Vec3> {
    let g = match analytic {
        Some(g) => g(x),
        None => fd_gradient3(|y| f(y), x)?,
    };
    if !g.is_finite() {
        return Err(Error::NonFiniteEvaluation { what: what.into() });
    }
    Ok(g)
}

pub fn r3_rhs(sys: &R3PoissonSystem, x: Vec3) -> Result<Vec3> {
    Ok(sys.grad_casimir(x)?.cross(sys.grad_hamiltonian(x)?))
}

impl OdeSystem for R3PoissonSystem {
    fn dim(&self) -> usize {
        3
    }
    fn rhs(&self, _t: f64, x: &[f64]) -> Result<Vec<f64>> {
        Ok(r3_rhs(self, Vec3([x[0], x[1], x[2]]))?.0.to_vec())
    }
}

/// `{f, g}(x) = -grad C . (grad f x grad g)` with finite-difference gradients
/// of `f` and `g`.
pub fn bracket_eval<F, G>(f: F, g: G, sys: &R3PoissonSystem, x: Vec3) -> Result<f64>
where
    F: Fn(Vec3) -> f64,
    G: Fn(Vec3) -> f64,
{
    let gc = sys.grad_casimir(x)?;
    let gf = fd_gradient3(f, x)?;
    let gg = fd_gradient3(g, x)?;
    Ok(-gc.dot(gf.cross(gg)))
}

/// Numerical divergence of the flow `grad C x grad H`.
pub fn flow_divergence(sys: &R3PoissonSystem, x: Vec3) -> Result<f64> {
    let h = default_fd_step(&x.0);
    let mut div = 0.0;
    for i in 0..3 {
        let mut xp = x;
        let mut xm = x;
        xp[i] += h;
        xm[i] -= h;
        div += (r3_rhs(sys, xp)?[i] - r3_rhs(sys, xm)?[i]) / (2.0 * h);
    }
    Ok(div)
}

/// Drift of the Casimir and the Hamiltonian along a trajectory of the flow.
pub fn check_casimir(sys: &R3PoissonSystem, traj: &Trajectory) -> Result<DriftReport> {
    let c = sys.casimir.clone();
    let h = sys.hamiltonian.clone();
    invariant_drift(
        traj,
        &[
            Invariant::new("casimir", move |x| c(Vec3([x[0], x[1], x[2]]))),
            Invariant::new("hamiltonian", move |x| h(Vec3([x[0], x[1], x[2]]))),
        ],
    )
}

/// Canonical bracket `{f, g} = f_q . g_p - f_p . g_q` on T*R^k, by central
/// differences. `f` and `g` take `(q, p)`.
pub fn canonical_bracket<F, G>(f: F, g: G, q: &[f64], p: &[f64]) -> Result<f64>
where
    F: Fn(&[f64], &[f64]) -> f64,
    G: Fn(&[f64], &[f64]) -> f64,
{
    if q.len() != p.len() {
        return Err(Error::DimensionMismatch { expected: q.len(), actual: p.len() });
    }
    let k = q.len();
    let z: Vec<f64> = q.iter().chain(p).copied().collect();
    let h = default_fd_step(&z);
    let df = fd_gradient(|z| f(&z[..k], &z[k..]), &z, h)?;
    let dg = fd_gradient(|z| g(&z[..k], &z[k..]), &z, h)?;
    Ok((0..k).map(|i| df[i] * dg[k + i] - df[k + i] * dg[i]).sum())
}
