//! Geodesic flow of a metric field, the Lorentz force, and its Kaluza-Klein
//! lift to canonical motion with a cyclic angle.

use std::fmt;
use std::sync::Arc;

use crate::algebra::{MatN, Vec3};
use crate::error::{Error, Result};
use crate::integrate::OdeSystem;

/// Step for finite-difference metric and potential derivatives.
pub const METRIC_FD_STEP: f64 = 1e-5;
/// Cholesky pivot threshold used to decide positive-definiteness.
pub const METRIC_PIVOT_TOL: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-12;

pub type MetricFn = Arc<dyn Fn(&[f64]) -> MatN + Send + Sync>;
/// Returns `dg[l] = dg/dq^l`.
pub type MetricDerivFn = Arc<dyn Fn(&[f64]) -> Vec<MatN> + Send + Sync>;

#[derive(Clone)]
pub struct MetricField {
    dim: usize,
    g: MetricFn,
    dg: Option<MetricDerivFn>,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricField").field("dim", &self.dim).field("analytic_dg", &self.dg.is_some()).finish()
    }
}

impl MetricField {
    pub fn new(dim: usize, g: impl Fn(&[f64]) -> MatN + Send + Sync + 'static) -> Self {
        MetricField { dim, g: Arc::new(g), dg: None }
    }

    pub fn with_derivatives(mut self, dg: impl Fn(&[f64]) -> Vec<MatN> + Send + Sync + 'static) -> Self {
        self.dg = Some(Arc::new(dg));
        self
    }

    /// Same metric with the analytic derivatives dropped.
    pub fn without_derivatives(&self) -> Self {
        MetricField { dim: self.dim, g: self.g.clone(), dg: None }
    }

    pub fn euclidean(dim: usize) -> Self {
        MetricField::new(dim, move |_| MatN::identity(dim)).with_derivatives(move |_| vec![MatN::zeros(dim); dim])
    }

    /// Round unit sphere in `(theta, phi)`: `g = diag(1, sin^2 theta)`.
    pub fn sphere() -> Self {
        MetricField::new(2, |q| MatN::from_diag(&[1.0, q[0].sin().powi(2)])).with_derivatives(|q| {
            let s2 = (2.0 * q[0]).sin();
            vec![MatN::from_diag(&[0.0, s2]), MatN::zeros(2)]
        })
    }

    /// Poincare upper half-plane in `(x, y)`, `y > 0`: `g = I / y^2`.
    pub fn hyperbolic_half_plane() -> Self {
        MetricField::new(2, |q| MatN::identity(2).scale(1.0 / (q[1] * q[1])))
            .with_derivatives(|q| vec![MatN::zeros(2), MatN::identity(2).scale(-2.0 / q[1].powi(3))])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.dg.is_some()
    }

    fn check_point(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: q.len() });
        }
        Ok(())
    }

    /// Metric at `q`, checked for shape, symmetry and finiteness.
    pub fn metric(&self, q: &[f64]) -> Result<MatN> {
        self.check_point(q)?;
        let g = (self.g)(q);
        if g.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: g.dim() });
        }
        if !g.is_finite() {
            return Err(Error::NonFiniteEvaluation { what: "metric".into() });
        }
        let asym = (&g - &g.transpose()).max_abs();
        if asym > SYMMETRY_TOL * g.max_abs().max(1.0) {
            return Err(Error::InvalidParameter(format!("metric is not symmetric (residual {asym:e})")));
        }
        Ok(g)
    }

    /// Inverse metric; fails with `SingularMetric` unless positive-definite.
    pub fn inverse(&self, q: &[f64]) -> Result<MatN> {
        self.metric(q)?.spd_inverse(METRIC_PIVOT_TOL)
    }

    /// `dg/dq^l` for each `l`, analytic when supplied.
    pub fn derivatives(&self, q: &[f64]) -> Result<Vec<MatN>> {
        self.check_point(q)?;
        match &self.dg {
            Some(dg) => {
                let d = dg(q);
                if d.len() != self.dim || d.iter().any(|m| m.dim() != self.dim) {
                    return Err(Error::DimensionMismatch { expected: self.dim, actual: d.len() });
                }
                Ok(d)
            }
            None => self.fd_derivatives(q),
        }
    }

    /// Central-difference metric derivatives with step [`METRIC_FD_STEP`].
    pub fn fd_derivatives(&self, q: &[f64]) -> Result<Vec<MatN>> {
        self.check_point(q)?;
        let h = METRIC_FD_STEP;
        let mut y = q.to_vec();
        (0..self.dim)
            .map(|l| {
                y[l] = q[l] + h;
                let plus = self.metric(&y)?;
                y[l] = q[l] - h;
                let minus = self.metric(&y)?;
                y[l] = q[l];
                Ok((&plus - &minus).scale(0.5 / h))
            })
            .collect()
    }

    /// `K = g_ij v^i v^j / 2`
    pub fn kinetic_energy(&self, q: &[f64], v: &[f64]) -> Result<f64> {
        let g = self.metric(q)?;
        Ok(0.5 * v.iter().zip(g.mul_vec(v)).map(|(a, b)| a * b).sum::<f64>())
    }
}

/// Christoffel symbols `Gamma^h_jk` of the Levi-Civita connection.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, h: usize, j: usize, k: usize) -> f64 {
        self.data[(h * self.dim + j) * self.dim + k]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Christoffel) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `Gamma^i_jk v^j v^k`
    pub fn contract(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim;
        (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| self.get(i, j, k) * v[j] * v[k]).sum::<f64>()).sum()).collect()
    }
}

/// `Gamma^h_jk = g^{hl} (d_k g_jl + d_j g_kl - d_l g_jk) / 2`
pub fn christoffel(metric: &MetricField, q: &[f64]) -> Result<Christoffel> {
    christoffel_from(metric, q, &metric.derivatives(q)?)
}

/// Christoffel symbols with finite-difference metric derivatives.
pub fn christoffel_fd(metric: &MetricField, q: &[f64]) -> Result<Christoffel> {
    christoffel_from(metric, q, &metric.fd_derivatives(q)?)
}

fn christoffel_from(metric: &MetricField, q: &[f64], dg: &[MatN]) -> Result<Christoffel> {
    let n = metric.dim();
    let ginv = metric.inverse(q)?;
    // lowered[l][j][k] = (d_k g_jl + d_j g_kl - d_l g_jk) / 2
    let lowered = |l: usize, j: usize, k: usize| 0.5 * (dg[k][(j, l)] + dg[j][(k, l)] - dg[l][(j, k)]);
    let mut data = vec![0.0; n * n * n];
    for h in 0..n {
        for j in 0..n {
            for k in 0..n {
                data[(h * n + j) * n + k] = (0..n).map(|l| ginv[(h, l)] * lowered(l, j, k)).sum();
            }
        }
    }
    Ok(Christoffel { dim: n, data })
}

/// `(q', v') = (v, -Gamma^i_jk v^j v^k)`
pub fn geodesic_rhs(metric: &MetricField, q: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if v.len() != metric.dim() {
        return Err(Error::DimensionMismatch { expected: metric.dim(), actual: v.len() });
    }
    let gamma = christoffel(metric, q)?;
    Ok((v.to_vec(), gamma.contract(v).into_iter().map(|a| -a).collect()))
}

/// Geodesic spray, state `[q, v]`.
#[derive(Debug, Clone)]
pub struct Geodesic {
    pub metric: MetricField,
}

impl OdeSystem for Geodesic {
    fn dim(&self) -> usize {
        2 * self.metric.dim()
    }
    fn rhs(&self, _t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let k = self.metric.dim();
        let (dq, dv) = geodesic_rhs(&self.metric, &x[..k], &x[k..])?;
        Ok(dq.into_iter().chain(dv).collect())
    }
}

/// Point and velocity of the unit sphere in R^3 from `(theta, phi)` data.
pub fn sphere_embedding(q: &[f64], v: &[f64]) -> (Vec3, Vec3) {
    let (st, ct) = q[0].sin_cos();
    let (sp, cp) = q[1].sin_cos();
    let x = Vec3::new(st * cp, st * sp, ct);
    let dx = Vec3::new(ct * cp * v[0] - st * sp * v[1], ct * sp * v[0] + st * cp * v[1], -st * v[0]);
    (x, dx)
}

pub type PotentialFn = Arc<dyn Fn(Vec3) -> Vec3 + Send + Sync>;
/// Returns `J[i][j] = dA_i / dq_j`.
pub type PotentialJacobianFn = Arc<dyn Fn(Vec3) -> [[f64; 3]; 3] + Send + Sync>;

#[derive(Clone)]
pub struct MagneticSystem {
    mass: f64,
    e_over_c: f64,
    a: PotentialFn,
    da: Option<PotentialJacobianFn>,
}

impl fmt::Debug for MagneticSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MagneticSystem")
            .field("mass", &self.mass)
            .field("e_over_c", &self.e_over_c)
            .field("analytic_da", &self.da.is_some())
            .finish()
    }
}

impl MagneticSystem {
    pub fn new(mass: f64, e_over_c: f64, a: impl Fn(Vec3) -> Vec3 + Send + Sync + 'static) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
        }
        if !e_over_c.is_finite() {
            return Err(Error::InvalidParameter("e/c must be finite".into()));
        }
        Ok(MagneticSystem { mass, e_over_c, a: Arc::new(a), da: None })
    }

    pub fn with_jacobian(mut self, da: impl Fn(Vec3) -> [[f64; 3]; 3] + Send + Sync + 'static) -> Self {
        self.da = Some(Arc::new(da));
        self
    }

    /// Uniform field `B` from the symmetric gauge `A = B x q / 2`.
    pub fn uniform(mass: f64, e_over_c: f64, b: Vec3) -> Result<Self> {
        let jac = crate::algebra::hat(b).scale(0.5);
        let rows = [jac.row(0), jac.row(1), jac.row(2)].map(|r| [r[0], r[1], r[2]]);
        Ok(MagneticSystem::new(mass, e_over_c, move |q| b.cross(q) * 0.5)?.with_jacobian(move |_| rows))
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn e_over_c(&self) -> f64 {
        self.e_over_c
    }

    pub fn potential(&self, q: Vec3) -> Vec3 {
        (self.a)(q)
    }

    pub fn jacobian(&self, q: Vec3) -> [[f64; 3]; 3] {
        if let Some(da) = &self.da {
            return da(q);
        }
        let h = METRIC_FD_STEP * q.max_abs().max(1.0);
        let mut jac = [[0.0; 3]; 3];
        for j in 0..3 {
            let e = Vec3::unit(j) * h;
            let d = ((self.a)(q + e) - (self.a)(q - e)) * (0.5 / h);
            for (i, row) in jac.iter_mut().enumerate() {
                row[j] = d[i];
            }
        }
        jac
    }

    /// `B = curl A`
    pub fn field(&self, q: Vec3) -> Vec3 {
        let j = self.jacobian(q);
        Vec3::new(j[2][1] - j[1][2], j[0][2] - j[2][0], j[1][0] - j[0][1])
    }
}

/// `(q', v') = (v, (e/c) / m v x B)`
pub fn lorentz_rhs(sys: &MagneticSystem, q: Vec3, v: Vec3) -> (Vec3, Vec3) {
    (v, v.cross(sys.field(q)) * (sys.e_over_c / sys.mass))
}

/// State `[q, v]`.
#[derive(Debug, Clone)]
pub struct Lorentz {
    pub system: MagneticSystem,
}

impl OdeSystem for Lorentz {
    fn dim(&self) -> usize {
        6
    }
    fn rhs(&self, _t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let (dq, dv) = lorentz_rhs(&self.system, Vec3([x[0], x[1], x[2]]), Vec3([x[3], x[4], x[5]]));
        Ok(dq.0.into_iter().chain(dv.0).collect())
    }
}

/// Extended phase-space point of the Kaluza-Klein charged particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KkChargedState {
    pub q: Vec3,
    pub p: Vec3,
    pub theta: f64,
    /// Momentum conjugate to the cyclic angle; the charge level set is `pi = e/c`.
    pub pi: f64,
}

impl KkChargedState {
    /// Canonical data matching a Lorentz state `(q, v)` on the charge level set.
    pub fn from_velocity(sys: &MagneticSystem, q: Vec3, v: Vec3) -> Self {
        let pi = sys.e_over_c;
        KkChargedState { q, p: v * sys.mass + sys.potential(q) * pi, theta: 0.0, pi }
    }

    pub fn from_slice(x: &[f64]) -> Self {
        KkChargedState { q: Vec3([x[0], x[1], x[2]]), p: Vec3([x[3], x[4], x[5]]), theta: x[6], pi: x[7] }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.q.0.iter().chain(&self.p.0).copied().chain([self.theta, self.pi]).collect()
    }

    pub fn velocity(&self, sys: &MagneticSystem) -> Vec3 {
        (self.p - sys.potential(self.q) * self.pi) * (1.0 / sys.mass)
    }
}

/// `H_KK = |p - pi A|^2 / 2m + pi^2 / 2`
pub fn kk_charged_hamiltonian(sys: &MagneticSystem, s: &KkChargedState) -> f64 {
    let v = s.velocity(sys);
    0.5 * sys.mass * v.norm_sq() + 0.5 * s.pi * s.pi
}

/// Hamilton's equations of `H_KK`; `pi' = 0` since `theta` is cyclic.
pub fn kk_charged_rhs(sys: &MagneticSystem, s: &KkChargedState) -> KkChargedState {
    let v = s.velocity(sys);
    let jac = sys.jacobian(s.q);
    // p_i' = pi v_j dA_j/dq_i
    let dp = Vec3(std::array::from_fn(|i| s.pi * (0..3).map(|j| v[j] * jac[j][i]).sum::<f64>()));
    KkChargedState { q: v, p: dp, theta: s.pi - sys.potential(s.q).dot(v), pi: 0.0 }
}

/// State `[q, p, theta, pi]`.
#[derive(Debug, Clone)]
pub struct KkCharged {
    pub system: MagneticSystem,
}

impl OdeSystem for KkCharged {
    fn dim(&self) -> usize {
        8
    }
    fn rhs(&self, _t: f64, x: &[f64]) -> Result<Vec<f64>> {
        Ok(kk_charged_rhs(&self.system, &KkChargedState::from_slice(x)).to_vec())
    }
}

/// Particle in R^3 held near the unit sphere by the stiff potential
/// `(1 - |q|^2)^2 / 2 eps`. State `[q, q']`.
#[derive(Debug, Clone, Copy)]
pub struct PenaltySphere {
    pub eps: f64,
}

impl PenaltySphere {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        Ok(PenaltySphere { eps })
    }
}

impl OdeSystem for PenaltySphere {
    fn dim(&self) -> usize {
        6
    }
    fn rhs(&self, _t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let q = Vec3([x[0], x[1], x[2]]);
        let k = 2.0 / self.eps * (1.0 - q.norm_sq());
        Ok(vec![x[3], x[4], x[5], k * q[0], k * q[1], k * q[2]])
    }
}

/// Great circle through unit `q0` with tangent velocity `v0`.
pub fn great_circle(q0: Vec3, v0: Vec3, t: f64) -> Vec3 {
    let speed = v0.norm();
    if speed == 0.0 {
        return q0;
    }
    let (s, c) = (speed * t).sin_cos();
    q0 * c + v0 * (s / speed)
}

/// Max distance from the great circle over `[0, t_end]` for each `eps`.
pub fn penalty_sphere_deviation(q0: Vec3, v0: Vec3, eps: &[f64], t_end: f64) -> Result<Vec<f64>> {
    if (q0.norm_sq() - 1.0).abs() > 1e-12 || q0.dot(v0).abs() > 1e-12 {
        return Err(Error::InvalidParameter("q0 must be a unit vector orthogonal to v0".into()));
    }
    let x0: Vec<f64> = q0.0.iter().chain(&v0.0).copied().collect();
    eps.iter()
        .map(|&e| {
            let sys = PenaltySphere::new(e)?;
            // resolve the radial oscillation, frequency ~ sqrt(8/eps)
            let h = (0.02 * e.sqrt()).min(1e-3);
            let cfg = crate::integrate::IntegratorConfig::new(h, t_end, 1);
            let mut worst = 0.0f64;
            crate::integrate::integrate_observed(&sys, &x0, &cfg, |t, x| {
                worst = worst.max((Vec3([x[0], x[1], x[2]]) - great_circle(q0, v0, t)).norm());
                Ok(true)
            })?;
            Ok(worst)
        })
        .collect()
}
