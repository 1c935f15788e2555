//! Lie-algebra primitives: the hat map between (R^3, x) and (so(3), [.,.]),
//! matrix commutators, the so(3) coadjoint action and a central-difference
//! gradient used by every numerical bracket check.
//!
//! Hat convention: `hat(v) * w == v.cross(w)`, i.e.
//!
//! ```text
//!          [  0  -v3   v2 ]
//! hat(v) = [  v3   0  -v1 ]
//!          [ -v2  v1    0 ]
//! ```

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Absolute tolerance used for so(n) membership of unit-scale matrices.
pub const SKEW_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    /// Builds a vector from a slice of length 3, rejecting non-finite input.
    pub fn from_slice(s: &[f64]) -> Result<Self> {
        if s.len() != 3 {
            return Err(Error::DimensionMismatch { expected: 3, actual: s.len() });
        }
        let v = Vec3([s[0], s[1], s[2]]);
        if !v.is_finite() {
            return Err(Error::NonFiniteEvaluation { what: "Vec3 components".into() });
        }
        Ok(v)
    }

    pub fn unit(i: usize) -> Self {
        let mut v = Vec3::ZERO;
        v.0[i] = 1.0;
        v
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        let [a1, a2, a3] = self.0;
        let [b1, b2, b3] = o.0;
        Vec3([a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1])
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Componentwise product, used for diagonal tensors.
    pub fn hadamard(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] * o.0[0], self.0[1] * o.0[1], self.0[2] * o.0[2]])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vec3 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Dense square matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct MatN {
    n: usize,
    data: Vec<f64>,
}

impl fmt::Debug for MatN {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "MatN({})", self.n)?;
        for i in 0..self.n {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        Ok(())
    }
}

impl MatN {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "matrix dimension must be positive");
        MatN { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = MatN::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = MatN::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    /// Row-major construction. Fails unless `data.len() == n * n` and all entries are finite.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, actual: data.len() });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteEvaluation { what: "matrix entries".into() });
        }
        Ok(MatN { n, data })
    }

    pub fn from_rows<const N: usize>(rows: [[f64; N]; N]) -> Self {
        MatN { n: N, data: rows.iter().flatten().copied().collect() }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = MatN::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn transpose(&self) -> MatN {
        MatN::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: f64) -> MatN {
        MatN { n: self.n, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Frobenius pairing `tr(A^T B)`.
    pub fn frobenius_dot(&self, o: &MatN) -> f64 {
        self.data.iter().zip(&o.data).map(|(a, b)| a * b).sum()
    }

    /// `(A - A^T) / 2`
    pub fn skew_part(&self) -> MatN {
        MatN::from_fn(self.n, |i, j| 0.5 * (self[(i, j)] - self[(j, i)]))
    }

    pub fn matmul(&self, o: &MatN) -> Result<MatN> {
        check_dims(self, o)?;
        Ok(self * o)
    }

    /// Cholesky factor `L` with `A = L L^T`. Fails with `SingularMetric` when
    /// a pivot falls below `pivot_tol`.
    pub fn cholesky(&self, pivot_tol: f64) -> Result<MatN> {
        let n = self.n;
        let mut l = MatN::zeros(n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > pivot_tol) {
                return Err(Error::SingularMetric { pivot: d });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(l)
    }

    /// Inverse of a symmetric positive-definite matrix via Cholesky.
    pub fn spd_inverse(&self, pivot_tol: f64) -> Result<MatN> {
        let n = self.n;
        let l = self.cholesky(pivot_tol)?;
        let mut inv = MatN::zeros(n);
        for c in 0..n {
            // forward: L y = e_c
            let mut y = vec![0.0; n];
            for i in 0..n {
                let mut s = if i == c { 1.0 } else { 0.0 };
                for k in 0..i {
                    s -= l[(i, k)] * y[k];
                }
                y[i] = s / l[(i, i)];
            }
            // backward: L^T x = y
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in i + 1..n {
                    s -= l[(k, i)] * inv[(k, c)];
                }
                inv[(i, c)] = s / l[(i, i)];
            }
        }
        Ok(inv)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }
}

impl Index<(usize, usize)> for MatN {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for MatN {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl<'a> Add<&'a MatN> for &'a MatN {
    type Output = MatN;
    fn add(self, o: &MatN) -> MatN {
        assert_eq!(self.n, o.n);
        MatN { n: self.n, data: self.data.iter().zip(&o.data).map(|(a, b)| a + b).collect() }
    }
}

impl<'a> Sub<&'a MatN> for &'a MatN {
    type Output = MatN;
    fn sub(self, o: &MatN) -> MatN {
        assert_eq!(self.n, o.n);
        MatN { n: self.n, data: self.data.iter().zip(&o.data).map(|(a, b)| a - b).collect() }
    }
}

impl<'a> Mul<&'a MatN> for &'a MatN {
    type Output = MatN;
    fn mul(self, o: &MatN) -> MatN {
        assert_eq!(self.n, o.n);
        let n = self.n;
        let mut out = MatN::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                for j in 0..n {
                    out[(i, j)] += a * o[(k, j)];
                }
            }
        }
        out
    }
}

fn check_dims(a: &MatN, b: &MatN) -> Result<()> {
    if a.n != b.n {
        return Err(Error::DimensionMismatch { expected: a.n, actual: b.n });
    }
    Ok(())
}

/// Validation of so(n) membership.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewCheck {
    pub tolerance: f64,
}

impl Default for SkewCheck {
    fn default() -> Self {
        SkewCheck { tolerance: SKEW_TOLERANCE }
    }
}

impl SkewCheck {
    pub fn residual(m: &MatN) -> f64 {
        let n = m.dim();
        let mut r = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                r = r.max((m[(i, j)] + m[(j, i)]).abs());
            }
        }
        r
    }

    /// The tolerance is absolute for unit-scale matrices and grows with the
    /// max-norm of larger ones.
    pub fn check(&self, m: &MatN) -> Result<()> {
        let tolerance = self.tolerance * m.max_abs().max(1.0);
        let residual = Self::residual(m);
        if residual <= tolerance {
            Ok(())
        } else {
            Err(Error::NotSkew { residual, tolerance })
        }
    }
}

pub fn hat(v: Vec3) -> MatN {
    let [v1, v2, v3] = v.0;
    MatN::from_rows([[0.0, -v3, v2], [v3, 0.0, -v1], [-v2, v1, 0.0]])
}

pub fn unhat(s: &MatN) -> Result<Vec3> {
    if s.dim() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, actual: s.dim() });
    }
    SkewCheck::default().check(s)?;
    Ok(Vec3::new(s[(2, 1)], s[(0, 2)], s[(1, 0)]))
}

/// `[A, B] = AB - BA`
pub fn commutator(a: &MatN, b: &MatN) -> Result<MatN> {
    check_dims(a, b)?;
    Ok(&(a * b) - &(b * a))
}

/// Coadjoint action of so(3) on its dual in vector form: `ad*_u pi = pi x u`.
pub fn ad_star_so3(u: Vec3, pi: Vec3) -> Vec3 {
    pi.cross(u)
}

/// Default central-difference step `1e-5 * max(1, |x|_inf)`.
pub fn default_fd_step(x: &[f64]) -> f64 {
    1e-5 * x.iter().fold(1.0_f64, |m, v| m.max(v.abs()))
}

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn fd_gradient<F>(f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("finite-difference step must be positive, got {h}")));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i] - h;
        let fm = f(&probe);
        probe[i] = x[i];
        let g = (fp - fm) / (2.0 * h);
        if !g.is_finite() {
            return Err(Error::NonFiniteEvaluation { what: format!("gradient component {i}") });
        }
        grad.push(g);
    }
    Ok(grad)
}

/// [`fd_gradient`] specialised to scalar fields on R^3 with the default step.
pub fn fd_gradient3<F>(f: F, x: Vec3) -> Result<Vec3>
where
    F: Fn(Vec3) -> f64,
{
    let g = fd_gradient(|s| f(Vec3([s[0], s[1], s[2]])), &x.0, default_fd_step(&x.0))?;
    Ok(Vec3([g[0], g[1], g[2]]))
}
