//! Rigid-body dynamics in its several guises.
//!
//! * vector Euler equations on so(3)*: `Pi' = Pi x Omega`, `Omega = I^{-1} Pi`
//! * the so(n) matrix form `M' = [M, Omega]` with `M = D^2 Omega + Omega D^2`
//! * Manakov's deformation `Omega_ij = (b_i - b_j) / (a_i - a_j) M_ij`
//! * the symmetric canonical form `Q' = Q Omega`, `P' = P Omega`
//! * reconstruction `R' = R hat(Omega)` and free ellipsoidal motion on GL(n)
//!
//! Matrix states are flattened row-major; the symmetric form stores `Q`
//! followed by `P`.

use crate::algebra::{commutator, hat, MatN, SkewCheck, Vec3};
use crate::error::{Error, Result};
use crate::integrate::{integrate, IntegratorConfig, OdeSystem};

/// Principal moments of inertia.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inertia3(Vec3);

impl Inertia3 {
    pub fn new(i1: f64, i2: f64, i3: f64) -> Result<Self> {
        if [i1, i2, i3].iter().all(|&i| i > 0.0 && i.is_finite()) {
            Ok(Inertia3(Vec3::new(i1, i2, i3)))
        } else {
            Err(Error::InvalidParameter(format!("moments of inertia must be positive, got ({i1}, {i2}, {i3})")))
        }
    }

    pub fn moments(&self) -> Vec3 {
        self.0
    }

    /// Body angular velocity `I^{-1} Pi`.
    pub fn omega(&self, pi: Vec3) -> Vec3 {
        Vec3::new(pi[0] / self.0[0], pi[1] / self.0[1], pi[2] / self.0[2])
    }

    /// Kinetic energy `Pi . I^{-1} Pi / 2`.
    pub fn energy(&self, pi: Vec3) -> f64 {
        0.5 * pi.dot(self.omega(pi))
    }
}

pub fn euler_rhs(inertia: &Inertia3, pi: Vec3) -> Vec3 {
    pi.cross(inertia.omega(pi))
}

/// Free rigid body on so(3)*, state `Pi`.
#[derive(Debug, Clone, Copy)]
pub struct RigidBody3 {
    pub inertia: Inertia3,
}

impl OdeSystem for RigidBody3 {
    fn dim(&self) -> usize {
        3
    }
    fn rhs(&self, _t: f64, x: &[f64]) -> Result<Vec<f64>> {
        Ok(euler_rhs(&self.inertia, Vec3([x[0], x[1], x[2]])).0.to_vec())
    }
}

/// Diagonal `D = diag(d)` of the so(n) inertia operator `J(Omega) = D^2 Omega + Omega D^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct InertiaN {
    d: Vec<f64>,
}

impl InertiaN {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        if d.is_empty() || d.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("inertia diagonal must be non-empty and finite".into()));
        }
        for i in 0..d.len() {
            for j in i + 1..d.len() {
                if !(d[i] * d[i] + d[j] * d[j] > 0.0) {
                    return Err(Error::InvalidParameter(format!("d_{i}^2 + d_{j}^2 must be positive")));
                }
            }
        }
        Ok(InertiaN { d })
    }

    /// The so(n) body whose n = 3 reduction has principal moments `(I1, I2, I3)`,
    /// using `I1 = d2^2 + d3^2` and cyclic.
    pub fn from_principal_moments(i: Vec3) -> Result<Self> {
        let s = 0.5 * (i[0] + i[1] + i[2]);
        let d2: Vec<f64> = (0..3).map(|k| s - i[k]).collect();
        if d2.iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidParameter("moments violate the triangle inequality".into()));
        }
        InertiaN::new(d2.into_iter().map(f64::sqrt).collect())
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.d
    }

    fn pair(&self, i: usize, j: usize) -> f64 {
        self.d[i] * self.d[i] + self.d[j] * self.d[j]
    }

    /// `J(Omega) = D^2 Omega + Omega D^2`
    pub fn apply(&self, omega: &MatN) -> MatN {
        MatN::from_fn(omega.dim(), |i, j| self.pair(i, j) * omega[(i, j)])
    }

    /// Energy `<M, Omega> / 2` with the pairing `<A, B> = tr(A^T B) / 2`,
    /// which reduces to `Pi . Omega / 2` under the hat map.
    pub fn energy(&self, m: &MatN) -> Result<f64> {
        let omega = son_omega(self, m)?;
        Ok(0.25 * m.frobenius_dot(&omega))
    }
}

fn check_square_dim(m: &MatN, n: usize) -> Result<()> {
    if m.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: m.dim() });
    }
    Ok(())
}

pub fn son_omega(inertia: &InertiaN, m: &MatN) -> Result<MatN> {
    check_square_dim(m, inertia.dim())?;
    SkewCheck::default().check(m)?;
    let n = m.dim();
    Ok(MatN::from_fn(n, |i, j| if i == j { 0.0 } else { m[(i, j)] / inertia.pair(i, j) }))
}

pub fn son_rhs(inertia: &InertiaN, m: &MatN) -> Result<MatN> {
    let omega = son_omega(inertia, m)?;
    commutator(m, &omega)
}

/// Free rigid body on so(n)*, state `M` row-major.
#[derive(Debug, Clone)]
pub struct SonRigidBody {
    pub inertia: InertiaN,
}

impl OdeSystem for SonRigidBody {
    fn dim(&self) -> usize {
        self.inertia.dim().pow(2)
    }
    fn rhs(&self, _t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let m = MatN::from_row_major(self.inertia.dim(), x.to_vec())?;
        Ok(son_rhs(&self.inertia, &m)?.into_vec())
    }
}

const DEGENERATE_A_TOL: f64 = 1e-12;

fn check_manakov_params(n: usize, a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: a.len() });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: b.len() });
    }
    for i in 0..n {
        for j in i + 1..n {
            if (a[i] - a[j]).abs() < DEGENERATE_A_TOL {
                return Err(Error::DegenerateA { i, j });
            }
        }
    }
    Ok(())
}

/// Manakov angular velocity `Omega_ij = (b_i - b_j) / (a_i - a_j) M_ij`.
pub fn manakov_omega(m: &MatN, a: &[f64], b: &[f64]) -> Result<MatN> {
    let n = m.dim();
    check_manakov_params(n, a, b)?;
    SkewCheck::default().check(m)?;
    Ok(MatN::from_fn(n, |i, j| if i == j { 0.0 } else { (b[i] - b[j]) / (a[i] - a[j]) * m[(i, j)] }))
}

/// `M' = [M, Omega(M)]` with Manakov's `Omega`, state `M` row-major.
#[derive(Debug, Clone)]
pub struct ManakovBody {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl ManakovBody {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        check_manakov_params(a.len(), &a, &b)?;
        Ok(ManakovBody { a, b })
    }

    pub fn a_matrix(&self) -> MatN {
        MatN::from_diag(&self.a)
    }
}

impl OdeSystem for ManakovBody {
    fn dim(&self) -> usize {
        self.a.len().pow(2)
    }
    fn rhs(&self, _t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let m = MatN::from_row_major(self.a.len(), x.to_vec())?;
        let omega = manakov_omega(&m, &self.a, &self.b)?;
        Ok(commutator(&m, &omega)?.into_vec())
    }
}

pub const MANAKOV_MAX_POWER: usize = 6;

/// Coefficients of `tr((M + lambda A)^k)` in powers of `lambda`, for
/// `k = 2..=kmax`. Entry `[k - 2][j]` multiplies `lambda^j`.
///
/// Each coefficient is the exact sum over all `C(k, j)` orderings of `j`
/// factors of `A` among `k - j` factors of `M`.
pub fn manakov_invariants(m: &MatN, a: &MatN, kmax: usize) -> Result<Vec<Vec<f64>>> {
    let n = m.dim();
    check_square_dim(a, n)?;
    if !(2..=MANAKOV_MAX_POWER).contains(&kmax) {
        return Err(Error::InvalidParameter(format!("kmax must lie in 2..={MANAKOV_MAX_POWER}, got {kmax}")));
    }
    SkewCheck::default().check(m)?;
    for i in 0..n {
        for j in 0..n {
            if i != j && a[(i, j)] != 0.0 {
                return Err(Error::InvalidParameter("A must be diagonal".into()));
            }
        }
    }
    let mut out = Vec::with_capacity(kmax - 1);
    for k in 2..=kmax {
        let mut coeffs = vec![0.0; k + 1];
        for word in 0u32..(1 << k) {
            let mut prod = MatN::identity(n);
            for pos in 0..k {
                let factor = if word & (1 << pos) != 0 { a } else { m };
                prod = &prod * factor;
            }
            coeffs[word.count_ones() as usize] += prod.trace();
        }
        out.push(coeffs);
    }
    Ok(out)
}

/// A point `(Q, P)` of T*GL(n) for the symmetric rigid-body equations.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricState {
    pub q: MatN,
    pub p: MatN,
}

impl SymmetricState {
    pub fn new(q: MatN, p: MatN) -> Result<Self> {
        check_square_dim(&p, q.dim())?;
        Ok(SymmetricState { q, p })
    }

    pub fn from_flat(n: usize, x: &[f64]) -> Result<Self> {
        if x.len() != 2 * n * n {
            return Err(Error::DimensionMismatch { expected: 2 * n * n, actual: x.len() });
        }
        SymmetricState::new(
            MatN::from_row_major(n, x[..n * n].to_vec())?,
            MatN::from_row_major(n, x[n * n..].to_vec())?,
        )
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.q.as_slice().iter().chain(self.p.as_slice()).copied().collect()
    }

    /// Body momentum `skew(Q^T P)`.
    pub fn body_momentum(&self) -> MatN {
        (&self.q.transpose() * &self.p).skew_part()
    }
}

pub fn symmetric_rhs(inertia: &InertiaN, s: &SymmetricState) -> Result<(MatN, MatN)> {
    check_square_dim(&s.q, inertia.dim())?;
    let omega = son_omega(inertia, &s.body_momentum())?;
    Ok((&s.q * &omega, &s.p * &omega))
}

/// Symmetric generalized rigid body, state `[Q, P]` row-major.
#[derive(Debug, Clone)]
pub struct SymmetricRigidBody {
    pub inertia: InertiaN,
}

impl OdeSystem for SymmetricRigidBody {
    fn dim(&self) -> usize {
        2 * self.inertia.dim().pow(2)
    }
    fn rhs(&self, _t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let s = SymmetricState::from_flat(self.inertia.dim(), x)?;
        let (dq, dp) = symmetric_rhs(&self.inertia, &s)?;
        Ok(dq.into_vec().into_iter().chain(dp.into_vec()).collect())
    }
}

/// Left and right cotangent-lift momentum maps, skew parts:
/// `J_L = (P Q^T - Q P^T) / 2`, `J_R = (Q^T P - P^T Q) / 2`.
pub fn momentum_maps(s: &SymmetricState) -> (MatN, MatN) {
    let jl = (&s.p * &s.q.transpose()).skew_part();
    let jr = s.body_momentum();
    (jl, jr)
}

/// Momentum map of the rotation group acting on T*R^3.
pub fn angular_momentum(q: Vec3, p: Vec3) -> Vec3 {
    q.cross(p)
}

/// Result of integrating `R' = R hat(Omega(t))`.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub times: Vec<f64>,
    pub rotations: Vec<MatN>,
    /// `max_t max|R^T R - I|`
    pub orthogonality_drift: f64,
}

pub fn orthogonality_residual(r: &MatN) -> f64 {
    (&(&r.transpose() * r) - &MatN::identity(r.dim())).max_abs()
}

/// Piecewise-linear body angular velocity from time-stamped samples.
struct SampledOmega<'a> {
    samples: &'a [(f64, Vec3)],
}

impl SampledOmega<'_> {
    fn at(&self, t: f64) -> Vec3 {
        let s = self.samples;
        let idx = s.partition_point(|(ts, _)| *ts <= t);
        if idx == 0 {
            return s[0].1;
        }
        if idx == s.len() {
            return s[s.len() - 1].1;
        }
        let (t0, w0) = s[idx - 1];
        let (t1, w1) = s[idx];
        let theta = (t - t0) / (t1 - t0);
        w0 * (1.0 - theta) + w1 * theta
    }
}

impl OdeSystem for SampledOmega<'_> {
    fn dim(&self) -> usize {
        9
    }
    fn rhs(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let r = MatN::from_row_major(3, x.to_vec())?;
        Ok((&r * &hat(self.at(t))).into_vec())
    }
}

/// Reconstructs `R(t)` from samples of the body angular velocity, interpolated
/// linearly. Orthogonality is not re-imposed; its drift is reported.
pub fn reconstruct(r0: &MatN, omega_samples: &[(f64, Vec3)], cfg: &IntegratorConfig) -> Result<Reconstruction> {
    check_square_dim(r0, 3)?;
    let residual = orthogonality_residual(r0);
    if residual > 1e-10 {
        return Err(Error::NotOrthogonal { residual });
    }
    if omega_samples.is_empty() {
        return Err(Error::InvalidParameter("no angular velocity samples".into()));
    }
    if omega_samples.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidParameter("sample times must be strictly increasing".into()));
    }
    let sys = SampledOmega { samples: omega_samples };
    let traj = integrate(&sys, r0.as_slice(), cfg)?;
    let rotations: Vec<MatN> = traj.states.into_iter().map(|x| MatN::from_row_major(3, x)).collect::<Result<_>>()?;
    let orthogonality_drift = rotations.iter().map(orthogonality_residual).fold(0.0, f64::max);
    Ok(Reconstruction { times: traj.times, rotations, orthogonality_drift })
}

/// Free motion on GL(n) at time `t` with its two conserved momentum maps.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeEllipsoid {
    pub q: MatN,
    pub qdot: MatN,
    /// `Q' Q^T - Q Q'^T`
    pub k_left: MatN,
    /// `Q'^T Q - Q^T Q'`
    pub k_right: MatN,
}

pub fn free_ellipsoid(q0: &MatN, v0: &MatN, t: f64) -> Result<FreeEllipsoid> {
    check_square_dim(v0, q0.dim())?;
    let q = q0 + &v0.scale(t);
    let k_left = &(v0 * &q.transpose()) - &(&q * &v0.transpose());
    let k_right = &(&v0.transpose() * &q) - &(&q.transpose() * v0);
    Ok(FreeEllipsoid { q, qdot: v0.clone(), k_left, k_right })
}
