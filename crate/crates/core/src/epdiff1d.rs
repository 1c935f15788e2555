//! One-dimensional EPDiff: pulson particle dynamics for an even kernel `G`,
//! and a Fourier pseudospectral solver for the periodic EPDiff / CH equation
//! with `m = u - alpha^2 u_xx`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::integrate::{integrate, integrate_observed, IntegratorConfig, OdeSystem, Trajectory};

/// Separation at which a collision run stops instead of integrating through.
pub const COLLISION_HALT_SEPARATION: f64 = 1e-6;
/// Band-energy fraction above which the PDE reports loss of resolution.
pub const RESOLUTION_LOSS_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GreensFunction {
    /// `exp(-|x| / alpha)`
    Peakon { alpha: f64 },
    /// `max(1 - |x|, 0)`
    Compacton,
    /// `exp(-x^2 / 2 sigma^2)`
    Gaussian { sigma: f64 },
}

impl GreensFunction {
    pub fn peakon(alpha: f64) -> Result<Self> {
        positive("alpha", alpha)?;
        Ok(GreensFunction::Peakon { alpha })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        positive("sigma", sigma)?;
        Ok(GreensFunction::Gaussian { sigma })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            GreensFunction::Peakon { alpha } => (-x.abs() / alpha).exp(),
            GreensFunction::Compacton => (1.0 - x.abs()).max(0.0),
            GreensFunction::Gaussian { sigma } => (-x * x / (2.0 * sigma * sigma)).exp(),
        }
    }

    /// `G'(x)`, odd, with `G'(0) = 0` at the kink.
    pub fn deriv(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        match *self {
            GreensFunction::Peakon { alpha } => -x.signum() / alpha * (-x.abs() / alpha).exp(),
            GreensFunction::Compacton => {
                if x.abs() < 1.0 {
                    -x.signum()
                } else {
                    0.0
                }
            }
            GreensFunction::Gaussian { sigma } => -x / (sigma * sigma) * (-x * x / (2.0 * sigma * sigma)).exp(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PulsonEnsemble {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PulsonEnsemble {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::DimensionMismatch { expected: q.len(), actual: p.len() });
        }
        if q.is_empty() {
            return Err(Error::InvalidParameter("a pulson ensemble needs at least one particle".into()));
        }
        if !q.iter().chain(&p).all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("pulson positions and momenta must be finite".into()));
        }
        Ok(PulsonEnsemble { q, p })
    }

    /// The zero field.
    pub fn empty() -> Self {
        PulsonEnsemble::default()
    }

    /// Split a `[q..., p...]` state vector.
    pub fn from_state(x: &[f64]) -> Self {
        let n = x.len() / 2;
        PulsonEnsemble { q: x[..n].to_vec(), p: x[n..].to_vec() }
    }

    pub fn to_state(&self) -> Vec<f64> {
        self.q.iter().chain(&self.p).copied().collect()
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn total_momentum(&self) -> f64 {
        self.p.iter().sum()
    }
}

/// `q_i' = sum_j p_j G(q_i - q_j)`, `p_i' = -p_i sum_j p_j G'(q_i - q_j)`.
pub fn pulson_rhs(g: &GreensFunction, e: &PulsonEnsemble) -> (Vec<f64>, Vec<f64>) {
    let n = e.len();
    let mut dq = vec![0.0; n];
    let mut dp = vec![0.0; n];
    for i in 0..n {
        dq[i] = (0..n).map(|j| e.p[j] * g.eval(e.q[i] - e.q[j])).sum();
        // pairwise equal-and-opposite forces keep sum(p) fixed to roundoff
        for j in i + 1..n {
            let f = e.p[i] * e.p[j] * g.deriv(e.q[i] - e.q[j]);
            dp[i] -= f;
            dp[j] += f;
        }
    }
    (dq, dp)
}

/// `H_N = sum_ij p_i p_j G(q_i - q_j) / 2`
pub fn pulson_hamiltonian(g: &GreensFunction, e: &PulsonEnsemble) -> f64 {
    let n = e.len();
    0.5 * (0..n).map(|i| (0..n).map(|j| e.p[i] * e.p[j] * g.eval(e.q[i] - e.q[j])).sum::<f64>()).sum::<f64>()
}

/// `u(x) = sum_i p_i G(x - q_i)`
pub fn velocity_field(g: &GreensFunction, e: &PulsonEnsemble, x: f64) -> f64 {
    e.q.iter().zip(&e.p).map(|(q, p)| p * g.eval(x - q)).sum()
}

/// N-pulson system, state `[q_1..q_N, p_1..p_N]`.
#[derive(Debug, Clone, Copy)]
pub struct PulsonSystem {
    pub kernel: GreensFunction,
    pub n: usize,
}

impl OdeSystem for PulsonSystem {
    fn dim(&self) -> usize {
        2 * self.n
    }
    fn rhs(&self, _t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let (dq, dp) = pulson_rhs(&self.kernel, &PulsonEnsemble::from_state(x));
        Ok(dq.into_iter().chain(dp).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionSummary {
    pub incoming: [f64; 2],
    pub outgoing: [f64; 2],
    pub min_separation: f64,
    pub time_of_min_separation: f64,
    /// Time at which the run stopped because the pulsons met.
    pub halted_at: Option<f64>,
    pub hamiltonian_rel_drift: f64,
    pub momentum_abs_drift: f64,
    pub trajectory: Trajectory,
}

impl CollisionSummary {
    /// Largest mismatch between the sorted incoming and outgoing momenta.
    pub fn exchange_defect(&self) -> f64 {
        let mut a = self.incoming;
        let mut b = self.outgoing;
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
    }
}

pub fn pulson_collide(g: &GreensFunction, e0: &PulsonEnsemble, cfg: &IntegratorConfig) -> Result<CollisionSummary> {
    if e0.len() != 2 {
        return Err(Error::InvalidParameter(format!("collision needs exactly two pulsons, got {}", e0.len())));
    }
    let sys = PulsonSystem { kernel: *g, n: 2 };
    let h0 = pulson_hamiltonian(g, e0);
    let m0 = e0.total_momentum();
    let mut min_sep = (e0.q[0] - e0.q[1]).abs();
    let mut t_min = 0.0;
    let mut halted_at = None;
    let mut h_drift = 0.0f64;
    let mut m_drift = 0.0f64;
    let traj = integrate_observed(&sys, &e0.to_state(), cfg, |t, x| {
        let e = PulsonEnsemble::from_state(x);
        let sep = (x[0] - x[1]).abs();
        if sep < min_sep {
            min_sep = sep;
            t_min = t;
        }
        h_drift = h_drift.max((pulson_hamiltonian(g, &e) - h0).abs() / h0.abs().max(1.0));
        m_drift = m_drift.max((e.total_momentum() - m0).abs());
        if sep < COLLISION_HALT_SEPARATION {
            halted_at = Some(t);
            return Ok(false);
        }
        Ok(true)
    })?;
    let last = traj.last_state();
    Ok(CollisionSummary {
        incoming: [e0.p[0], e0.p[1]],
        outgoing: [last[2], last[3]],
        min_separation: min_sep,
        time_of_min_separation: t_min,
        halted_at,
        hamiltonian_rel_drift: h_drift,
        momentum_abs_drift: m_drift,
        trajectory: traj,
    })
}

/// Uniform periodic grid on `[-L/2, L/2)` with cached FFT plans.
#[derive(Clone)]
pub struct PeriodicGrid1D {
    length: f64,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for PeriodicGrid1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicGrid1D").field("length", &self.length).field("n", &self.n).finish()
    }
}

impl PeriodicGrid1D {
    pub fn new(length: f64, n: usize) -> Result<Self> {
        positive("domain length", length)?;
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("grid size must be a power of two >= 16, got {n}")));
        }
        let mut planner = FftPlanner::new();
        Ok(PeriodicGrid1D { length, n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -0.5 * self.length + i as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Signed mode index of FFT bin `j`.
    pub fn mode(&self, j: usize) -> i64 {
        if j < self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    pub fn wavenumber(&self, j: usize) -> f64 {
        2.0 * PI / self.length * self.mode(j) as f64
    }

    /// Bins kept by the 2/3 rule.
    pub fn is_resolved(&self, j: usize) -> bool {
        3 * self.mode(j).unsigned_abs() as usize <= self.n
    }

    /// Wrap a coordinate into `[-L/2, L/2)`.
    pub fn wrap(&self, x: f64) -> f64 {
        (x + 0.5 * self.length).rem_euclid(self.length) - 0.5 * self.length
    }

    /// Unnormalized DFT. Grid point 0 sits at `-L/2`, which only shifts phases.
    pub fn fft(&self, f: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = f.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    pub fn ifft(&self, mut spec: Vec<Complex<f64>>) -> Vec<f64> {
        self.inverse.process(&mut spec);
        let s = 1.0 / self.n as f64;
        spec.into_iter().map(|c| c.re * s).collect()
    }

    /// Zero the modes outside the 2/3 band.
    pub fn dealias_spectrum(&self, spec: &mut [Complex<f64>]) {
        for (j, c) in spec.iter_mut().enumerate() {
            if !self.is_resolved(j) {
                *c = Complex::new(0.0, 0.0);
            }
        }
    }

    pub fn dealias(&self, f: &[f64]) -> Vec<f64> {
        let mut s = self.fft(f);
        self.dealias_spectrum(&mut s);
        self.ifft(s)
    }

    /// Spectral derivative of order `order`; the Nyquist bin is dropped.
    pub fn derivative(&self, f: &[f64], order: u32) -> Vec<f64> {
        let mut s = self.fft(f);
        for (j, c) in s.iter_mut().enumerate() {
            *c = if j == self.n / 2 {
                Complex::new(0.0, 0.0)
            } else {
                *c * Complex::new(0.0, self.wavenumber(j)).powu(order)
            };
        }
        self.ifft(s)
    }

    /// Trapezoidal (spectrally accurate) integral over the period.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.dx() * f.iter().sum::<f64>()
    }

    /// `||f||_2 = sqrt(int f^2 dx)`
    pub fn l2_norm(&self, f: &[f64]) -> f64 {
        (self.dx() * f.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    fn check_field(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, actual: f.len() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChParams {
    pub alpha: f64,
    pub c0: f64,
    pub gamma: f64,
}

impl ChParams {
    pub fn new(alpha: f64, c0: f64, gamma: f64) -> Result<Self> {
        positive("alpha", alpha)?;
        if !c0.is_finite() || !gamma.is_finite() {
            return Err(Error::InvalidParameter("c0 and gamma must be finite".into()));
        }
        Ok(ChParams { alpha, c0, gamma })
    }

    /// Pure EPDiff, no dispersion.
    pub fn epdiff(alpha: f64) -> Result<Self> {
        ChParams::new(alpha, 0.0, 0.0)
    }

    /// Linear phase speed `(c0 - gamma k^2) / (1 + alpha^2 k^2)`.
    pub fn phase_speed(&self, k: f64) -> f64 {
        (self.c0 - self.gamma * k * k) / (1.0 + self.alpha * self.alpha * k * k)
    }
}

/// Solve `(1 - alpha^2 d_xx) u = m` spectrally.
pub fn helmholtz_invert(grid: &PeriodicGrid1D, m: &[f64], alpha: f64) -> Vec<f64> {
    helmholtz_scale(grid, m, |k| 1.0 / (1.0 + alpha * alpha * k * k))
}

/// `m = (1 - alpha^2 d_xx) u` spectrally.
pub fn helmholtz_apply(grid: &PeriodicGrid1D, u: &[f64], alpha: f64) -> Vec<f64> {
    helmholtz_scale(grid, u, |k| 1.0 + alpha * alpha * k * k)
}

fn helmholtz_scale(grid: &PeriodicGrid1D, f: &[f64], symbol: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut s = grid.fft(f);
    for (j, c) in s.iter_mut().enumerate() {
        *c *= symbol(grid.wavenumber(j));
    }
    grid.ifft(s)
}

/// `m_t = -(u m_x + 2 u_x m) - c0 u_x - gamma u_xxx` with 2/3 dealiasing of
/// inputs and output. The sign of the `gamma` term is the one giving the
/// linear phase speed [`ChParams::phase_speed`].
pub fn epdiff_pde_rhs(grid: &PeriodicGrid1D, m: &[f64], params: &ChParams) -> Result<Vec<f64>> {
    grid.check_field(m)?;
    let mut m_hat = grid.fft(m);
    grid.dealias_spectrum(&mut m_hat);
    let a2 = params.alpha * params.alpha;
    let k: Vec<f64> = (0..grid.len()).map(|j| grid.wavenumber(j)).collect();
    let u_hat: Vec<Complex<f64>> = m_hat.iter().zip(&k).map(|(c, k)| c / (1.0 + a2 * k * k)).collect();
    let ik = |j: usize| Complex::new(0.0, k[j]);
    let u = grid.ifft(u_hat.clone());
    let u_x = grid.ifft(u_hat.iter().enumerate().map(|(j, c)| c * ik(j)).collect());
    let m_x = grid.ifft(m_hat.iter().enumerate().map(|(j, c)| c * ik(j)).collect());
    let m_d = grid.ifft(m_hat);
    let product: Vec<f64> = (0..grid.len()).map(|i| u[i] * m_x[i] + 2.0 * u_x[i] * m_d[i]).collect();
    let mut out = grid.fft(&product);
    for (j, c) in out.iter_mut().enumerate() {
        let kj = k[j];
        // -c0 (ik) u - gamma (ik)^3 u = -i k (c0 - gamma k^2) u
        let linear = u_hat[j] * Complex::new(0.0, -kj * (params.c0 - params.gamma * kj * kj));
        *c = linear - *c;
    }
    grid.dealias_spectrum(&mut out);
    if !out.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        return Err(Error::NonFiniteEvaluation { what: "EPDiff right-hand side".into() });
    }
    Ok(grid.ifft(out))
}

/// Non-fatal diagnostic: the upper third of the retained band holds more
/// than [`RESOLUTION_LOSS_FRACTION`] of the energy `sum |m_k|^2 / (1 + alpha^2 k^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolutionLoss {
    pub band_fraction: f64,
}

pub fn resolution_check(grid: &PeriodicGrid1D, m: &[f64], alpha: f64) -> Option<ResolutionLoss> {
    let s = grid.fft(m);
    let kmax = grid.len() / 3;
    let (mut total, mut band) = (0.0, 0.0);
    for (j, c) in s.iter().enumerate() {
        let mode = grid.mode(j).unsigned_abs() as usize;
        if mode > kmax {
            continue;
        }
        let k = grid.wavenumber(j);
        let e = c.norm_sqr() / (1.0 + alpha * alpha * k * k);
        total += e;
        if 3 * mode > 2 * kmax {
            band += e;
        }
    }
    let band_fraction = if total > 0.0 { band / total } else { 0.0 };
    (band_fraction > RESOLUTION_LOSS_FRACTION).then_some(ResolutionLoss { band_fraction })
}

/// Periodic EPDiff / CH, state `m` on the grid.
#[derive(Debug, Clone)]
pub struct EpdiffPde {
    pub grid: PeriodicGrid1D,
    pub params: ChParams,
}

impl OdeSystem for EpdiffPde {
    fn dim(&self) -> usize {
        self.grid.len()
    }
    fn rhs(&self, _t: f64, x: &[f64]) -> Result<Vec<f64>> {
        epdiff_pde_rhs(&self.grid, x, &self.params)
    }
}

/// `int m dx`
pub fn pde_momentum(grid: &PeriodicGrid1D, m: &[f64]) -> f64 {
    grid.integrate(m)
}

/// `int u m dx / 2`
pub fn pde_energy(grid: &PeriodicGrid1D, m: &[f64], alpha: f64) -> f64 {
    let u = helmholtz_invert(grid, m, alpha);
    0.5 * grid.dx() * u.iter().zip(m).map(|(a, b)| a * b).sum::<f64>()
}

/// Pulson velocity sampled on the grid with nearest-image distances.
pub fn sample_velocity(grid: &PeriodicGrid1D, g: &GreensFunction, e: &PulsonEnsemble) -> Vec<f64> {
    (0..grid.len()).map(|i| e.q.iter().zip(&e.p).map(|(q, p)| p * g.eval(grid.wrap(grid.x(i) - q))).sum()).collect()
}

/// PDE initial momentum for a peakon ensemble: sample `u`, apply the
/// Helmholtz operator and project onto the dealiased band.
pub fn pde_initial_momentum(grid: &PeriodicGrid1D, alpha: f64, e: &PulsonEnsemble) -> Result<Vec<f64>> {
    let g = GreensFunction::peakon(alpha)?;
    Ok(grid.dealias(&helmholtz_apply(grid, &sample_velocity(grid, &g, e), alpha)))
}

/// `(x, m, u)` columns of a field snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub x: Vec<f64>,
    pub m: Vec<f64>,
    pub u: Vec<f64>,
}

pub fn field_snapshot(grid: &PeriodicGrid1D, m: &[f64], alpha: f64) -> FieldSnapshot {
    FieldSnapshot { x: grid.points(), m: m.to_vec(), u: helmholtz_invert(grid, m, alpha) }
}

/// A local maximum of a periodic field, refined by a parabola through the
/// three samples around it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub x: f64,
    pub height: f64,
}

/// Local maxima sorted by decreasing height.
pub fn find_peaks(grid: &PeriodicGrid1D, f: &[f64]) -> Vec<Peak> {
    let n = f.len();
    let mut peaks: Vec<Peak> = (0..n)
        .filter_map(|i| {
            let (l, c, r) = (f[(i + n - 1) % n], f[i], f[(i + 1) % n]);
            if !(c > l && c >= r) {
                return None;
            }
            let denom = l - 2.0 * c + r;
            let off = if denom < 0.0 { 0.5 * (l - r) / denom } else { 0.0 };
            Some(Peak { x: grid.wrap(grid.x(i) + off * grid.dx()), height: c - 0.25 * (l - r) * off })
        })
        .collect();
    peaks.sort_by(|a, b| b.height.total_cmp(&a.height));
    peaks
}

/// Position of the tallest peak.
pub fn peak_location(grid: &PeriodicGrid1D, f: &[f64]) -> Option<f64> {
    find_peaks(grid, f).first().map(|p| p.x)
}

/// Heights of the two tallest peaks ordered by position (left, right).
fn two_peak_heights(grid: &PeriodicGrid1D, f: &[f64]) -> Option<(Peak, Peak)> {
    let peaks = find_peaks(grid, f);
    let (a, b) = (*peaks.first()?, *peaks.get(1)?);
    Some(if a.x <= b.x { (a, b) } else { (b, a) })
}

/// Linear phase speed measured by tracking the argument of one Fourier mode
/// of a small-amplitude sinusoid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSpeedMeasurement {
    pub wavenumber: f64,
    pub measured: f64,
    pub predicted: f64,
}

impl PhaseSpeedMeasurement {
    pub fn rel_error(&self) -> f64 {
        (self.measured - self.predicted).abs() / self.predicted.abs().max(f64::MIN_POSITIVE)
    }
}

pub fn measure_phase_speed(
    grid: &PeriodicGrid1D,
    params: &ChParams,
    mode: usize,
    amplitude: f64,
    cfg: &IntegratorConfig,
) -> Result<PhaseSpeedMeasurement> {
    if mode == 0 || 3 * mode > grid.len() {
        return Err(Error::InvalidParameter(format!("mode {mode} is outside the resolved band")));
    }
    let k = grid.wavenumber(mode);
    let m0: Vec<f64> = (0..grid.len()).map(|i| amplitude * (k * grid.x(i)).sin()).collect();
    let phase = |m: &[f64]| grid.fft(m)[mode].arg();
    let sys = EpdiffPde { grid: grid.clone(), params: *params };
    let mut last = phase(&m0);
    let mut unwrapped = 0.0;
    integrate_observed(&sys, &m0, cfg, |_, m| {
        let ph = phase(m);
        unwrapped += (ph - last + PI).rem_euclid(2.0 * PI) - PI;
        last = ph;
        Ok(true)
    })?;
    // mode ~ exp(i(kx - wt)): arg decreases at rate w
    let omega = -unwrapped / cfg.t_end;
    Ok(PhaseSpeedMeasurement { wavenumber: k, measured: omega / k, predicted: params.phase_speed(k) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticlePdeReport {
    pub times: Vec<f64>,
    /// `||u_pde - u_particles||_2` at each recorded time.
    pub l2_discrepancy: Vec<f64>,
    /// Distance between the tallest PDE peak and the matching pulson.
    pub peak_discrepancy: Vec<f64>,
    /// Time at which the left and right peak heights cross, if they do.
    pub exchange_time_particles: Option<f64>,
    pub exchange_time_pde: Option<f64>,
    pub pde_momentum_drift: f64,
}

impl ParticlePdeReport {
    pub fn max_l2(&self) -> f64 {
        self.l2_discrepancy.iter().fold(0.0, |m, v| m.max(*v))
    }

    pub fn max_peak_error(&self) -> f64 {
        self.peak_discrepancy.iter().fold(0.0, |m, v| m.max(*v))
    }

    pub fn exchange_time_rel_error(&self) -> Option<f64> {
        let (a, b) = (self.exchange_time_particles?, self.exchange_time_pde?);
        Some((a - b).abs() / a.abs())
    }
}

fn crossing_time(times: &[f64], diff: &[Option<f64>]) -> Option<f64> {
    (1..times.len()).find_map(|i| {
        let (a, b) = (diff[i - 1]?, diff[i]?);
        (a > 0.0 && b <= 0.0).then(|| times[i - 1] + (times[i] - times[i - 1]) * a / (a - b))
    })
}

/// Evolve a peakon ensemble both as particles and as a PDE field and compare.
pub fn particle_vs_pde(
    alpha: f64,
    e0: &PulsonEnsemble,
    grid: &PeriodicGrid1D,
    cfg: &IntegratorConfig,
) -> Result<ParticlePdeReport> {
    let g = GreensFunction::peakon(alpha)?;
    let params = ChParams::epdiff(alpha)?;
    let half = 0.5 * grid.length();
    if e0.q.iter().any(|q| q.abs() >= half) {
        return Err(Error::InvalidParameter("pulsons must start inside the domain".into()));
    }
    let m0 = pde_initial_momentum(grid, alpha, e0)?;
    let pde = integrate(&EpdiffPde { grid: grid.clone(), params }, &m0, cfg)?;
    let particles = if e0.is_empty() {
        Trajectory { times: pde.times.clone(), states: vec![Vec::new(); pde.len()] }
    } else {
        integrate(&PulsonSystem { kernel: g, n: e0.len() }, &e0.to_state(), cfg)?
    };
    let momentum0 = pde_momentum(grid, &m0);
    let mut report = ParticlePdeReport {
        times: pde.times.clone(),
        l2_discrepancy: Vec::with_capacity(pde.len()),
        peak_discrepancy: Vec::new(),
        exchange_time_particles: None,
        exchange_time_pde: None,
        pde_momentum_drift: 0.0,
    };
    let mut diff_particles = Vec::with_capacity(pde.len());
    let mut diff_pde = Vec::with_capacity(pde.len());
    for (m, x) in pde.states.iter().zip(&particles.states) {
        let e = PulsonEnsemble::from_state(x);
        let u = helmholtz_invert(grid, m, alpha);
        let u_ref = sample_velocity(grid, &g, &e);
        let err: Vec<f64> = u.iter().zip(&u_ref).map(|(a, b)| a - b).collect();
        report.l2_discrepancy.push(grid.l2_norm(&err));
        report.pde_momentum_drift = report.pde_momentum_drift.max((pde_momentum(grid, m) - momentum0).abs());
        if let Some(x_peak) = peak_location(grid, &u) {
            if let Some(nearest) = e.q.iter().map(|q| grid.wrap(x_peak - q).abs()).min_by(f64::total_cmp) {
                report.peak_discrepancy.push(nearest);
            }
        }
        if e.len() == 2 {
            let (l, r) = if e.q[0] <= e.q[1] { (0, 1) } else { (1, 0) };
            diff_particles.push(Some(velocity_field(&g, &e, e.q[l]) - velocity_field(&g, &e, e.q[r])));
            diff_pde.push(two_peak_heights(grid, &u).map(|(a, b)| a.height - b.height));
        }
    }
    if e0.len() == 2 {
        report.exchange_time_particles = crossing_time(&report.times, &diff_particles);
        report.exchange_time_pde = crossing_time(&report.times, &diff_pde);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::fd_gradient;
    use crate::integrate::{invariant_drift, Invariant};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kernels() -> [GreensFunction; 3] {
        [GreensFunction::peakon(1.3).unwrap(), GreensFunction::Compacton, GreensFunction::gaussian(0.7).unwrap()]
    }

    #[test]
    fn kernels_are_even_with_odd_derivatives() {
        for g in kernels() {
            assert_eq!(g.eval(0.0), 1.0);
            assert_eq!(g.deriv(0.0), 0.0);
            for x in [0.1, 0.5, 0.99, 1.5, 4.0] {
                assert_eq!(g.eval(x), g.eval(-x));
                assert_eq!(g.deriv(x), -g.deriv(-x));
            }
        }
        assert!((GreensFunction::peakon(1.0).unwrap().eval(2.0) - (-2.0f64).exp()).abs() < 1e-16);
        assert_eq!(GreensFunction::Compacton.eval(1.5), 0.0);
        assert!(GreensFunction::peakon(0.0).is_err());
    }

    #[test]
    fn kernel_derivatives_match_fd_away_from_kinks() {
        for g in kernels() {
            for x in [-2.3, -0.6, 0.3, 0.8, 1.7] {
                let fd = (g.eval(x + 1e-6) - g.eval(x - 1e-6)) / 2e-6;
                assert!((fd - g.deriv(x)).abs() < 1e-7, "{g:?} at {x}");
            }
        }
    }

    #[test]
    fn single_pulson_travels_at_its_momentum() {
        let g = GreensFunction::peakon(1.0).unwrap();
        let e = PulsonEnsemble::new(vec![0.3], vec![1.7]).unwrap();
        let (dq, dp) = pulson_rhs(&g, &e);
        assert_eq!((dq[0], dp[0]), (1.7, 0.0));
        assert_eq!(pulson_hamiltonian(&g, &e), 0.5 * 1.7 * 1.7);
        assert_eq!(velocity_field(&g, &e, 0.3), 1.7);
        assert!(velocity_field(&g, &e, 60.0) < 1e-25);
    }

    #[test]
    fn rhs_matches_hamiltonian_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let mut states = vec![vec![-5.0, 5.0, 2.0, 1.0]];
        for _ in 0..20 {
            states.push(
                (0..6).map(|i| if i < 3 { rng.gen_range(-3.0..3.0) } else { rng.gen_range(-2.0..2.0) }).collect(),
            );
        }
        for g in kernels() {
            for x in &states {
                let e = PulsonEnsemble::from_state(x);
                let grad = fd_gradient(|y| pulson_hamiltonian(&g, &PulsonEnsemble::from_state(y)), x, 1e-6).unwrap();
                let (dq, dp) = pulson_rhs(&g, &e);
                let n = e.len();
                // kinks of the compacton and peakon make FD one-sided only on a null set
                for i in 0..n {
                    assert!((dq[i] - grad[n + i]).abs() < 1e-7);
                    assert!((dp[i] + grad[i]).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn hamiltonian_is_permutation_invariant() {
        let g = GreensFunction::gaussian(1.0).unwrap();
        let a = PulsonEnsemble::new(vec![0.0, 1.0, -2.0], vec![1.0, 2.0, 0.5]).unwrap();
        let b = PulsonEnsemble::new(vec![-2.0, 0.0, 1.0], vec![0.5, 1.0, 2.0]).unwrap();
        assert!((pulson_hamiltonian(&g, &a) - pulson_hamiltonian(&g, &b)).abs() < 1e-15);
    }

    #[test]
    fn antisymmetric_pair_keeps_zero_momentum() {
        let g = GreensFunction::peakon(1.0).unwrap();
        let e = PulsonEnsemble::new(vec![-3.0, 3.0], vec![1.0, -1.0]).unwrap();
        let (_, dp) = pulson_rhs(&g, &e);
        assert_eq!(dp[0] + dp[1], 0.0);
    }

    #[test]
    fn well_separated_pair_conserves_invariants() {
        let g = GreensFunction::peakon(1.0).unwrap();
        let e = PulsonEnsemble::new(vec![-20.0, 20.0], vec![1.0, 0.5]).unwrap();
        let traj = integrate(&PulsonSystem { kernel: g, n: 2 }, &e.to_state(), &IntegratorConfig::new(1e-3, 20.0, 100))
            .unwrap();
        let report = invariant_drift(
            &traj,
            &[
                Invariant::new("H", move |x| pulson_hamiltonian(&g, &PulsonEnsemble::from_state(x))),
                Invariant::new("P", |x| x[2] + x[3]),
            ],
        )
        .unwrap();
        assert!(report.get("H").unwrap().max_rel_drift <= 1e-8);
        assert!(report.get("P").unwrap().max_abs_drift <= 1e-12);
    }

    #[test]
    fn overtaking_collision_exchanges_momenta() {
        let g = GreensFunction::peakon(1.0).unwrap();
        let e = PulsonEnsemble::new(vec![-10.0, 0.0], vec![2.0, 1.0]).unwrap();
        let s = pulson_collide(&g, &e, &IntegratorConfig::new(1e-3, 40.0, 100)).unwrap();
        assert!(s.halted_at.is_none());
        assert!(s.exchange_defect() < 1e-4, "{:?} -> {:?}", s.incoming, s.outgoing);
        // the faster one ends up in front
        assert!(s.outgoing[1] > s.outgoing[0]);
        assert!((s.min_separation - 9f64.ln()).abs() < 1e-3);
        assert!(s.hamiltonian_rel_drift <= 1e-7 && s.momentum_abs_drift <= 1e-7);
    }

    #[test]
    fn equal_momenta_start_at_rest_then_separate() {
        // equal speeds initially, but the pair force -p1 p2 G'(q1 - q2) hands
        // momentum to the leader, so the separation grows monotonically
        let g = GreensFunction::peakon(1.0).unwrap();
        let e = PulsonEnsemble::new(vec![-1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let (dq, dp) = pulson_rhs(&g, &e);
        assert_eq!(dq[0], dq[1]);
        assert!(dp[0] < 0.0 && dp[1] > 0.0);
        let s = pulson_collide(&g, &e, &IntegratorConfig::new(1e-2, 5.0, 10)).unwrap();
        let seps: Vec<f64> = s.trajectory.iter().map(|(_, x)| x[1] - x[0]).collect();
        assert!(seps.windows(2).all(|w| w[1] >= w[0]));
        assert!(s.outgoing[1] > s.outgoing[0]);
    }

    #[test]
    fn head_on_collision_halts_with_zero_momentum() {
        let g = GreensFunction::peakon(1.0).unwrap();
        let e = PulsonEnsemble::new(vec![-2.0, 2.0], vec![1.0, -1.0]).unwrap();
        match pulson_collide(&g, &e, &IntegratorConfig::new(1e-4, 10.0, 100)) {
            Ok(s) => {
                assert!(s.momentum_abs_drift < 1e-9);
                assert!(s.halted_at.is_some() || s.min_separation < 1e-3);
            }
            Err(err) => assert!(matches!(err, Error::NonFiniteState { .. })),
        }
        assert!(pulson_collide(
            &g,
            &PulsonEnsemble::new(vec![0.0], vec![1.0]).unwrap(),
            &IntegratorConfig::new(1e-2, 1.0, 1)
        )
        .is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(PeriodicGrid1D::new(1.0, 8).is_err());
        assert!(PeriodicGrid1D::new(1.0, 100).is_err());
        assert!(PeriodicGrid1D::new(0.0, 64).is_err());
        let g = PeriodicGrid1D::new(40.0, 1024).unwrap();
        assert_eq!(g.dx(), 40.0 / 1024.0);
        assert_eq!(g.wrap(21.0), -19.0);
    }

    #[test]
    fn helmholtz_on_modes_and_round_trip() {
        let grid = PeriodicGrid1D::new(2.0 * PI, 64).unwrap();
        let alpha = 0.8;
        assert!(helmholtz_invert(&grid, &vec![0.0; 64], alpha).iter().all(|v| *v == 0.0));
        let k = 3.0;
        let m: Vec<f64> = grid.points().iter().map(|x| (k * x).sin()).collect();
        let u = helmholtz_invert(&grid, &m, alpha);
        for (ui, mi) in u.iter().zip(&m) {
            assert!((ui - mi / (1.0 + alpha * alpha * k * k)).abs() < 1e-14);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let u: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let back = helmholtz_apply(&grid, &helmholtz_invert(&grid, &u, alpha), alpha);
        for (a, b) in back.iter().zip(&u) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn spectral_derivative_of_mode() {
        let grid = PeriodicGrid1D::new(4.0, 32).unwrap();
        let k = 2.0 * PI / 4.0 * 3.0;
        let f: Vec<f64> = grid.points().iter().map(|x| (k * x).cos()).collect();
        let d3 = grid.derivative(&f, 3);
        for (x, d) in grid.points().iter().zip(&d3) {
            assert!((d - k.powi(3) * (k * x).sin()).abs() < 1e-11);
        }
    }

    #[test]
    fn pulson_velocity_matches_inverted_delta_momentum() {
        // m = 2 alpha sum p_i delta(x - q_i) has u = sum p_i exp(-|x - q_i| / alpha)
        let (alpha, n) = (1.0, 4096);
        let grid = PeriodicGrid1D::new(40.0, n).unwrap();
        let e = PulsonEnsemble::new(vec![-3.1, 2.45], vec![1.2, 0.7]).unwrap();
        let spec: Vec<Complex<f64>> = (0..n)
            .map(|j| {
                let k = grid.wavenumber(j);
                e.q.iter()
                    .zip(&e.p)
                    .map(|(q, p)| Complex::from_polar(2.0 * alpha * p / grid.dx(), -k * (q - grid.x(0))))
                    .sum()
            })
            .collect();
        let m = grid.ifft(spec);
        let u = helmholtz_invert(&grid, &m, alpha);
        let g = GreensFunction::peakon(alpha).unwrap();
        let err: Vec<f64> = (0..n).map(|i| u[i] - velocity_field(&g, &e, grid.x(i))).collect();
        assert!(grid.l2_norm(&err) <= 1e-3, "{}", grid.l2_norm(&err));
    }

    #[test]
    fn zero_field_is_stationary() {
        let grid = PeriodicGrid1D::new(10.0, 64).unwrap();
        let dm = epdiff_pde_rhs(&grid, &vec![0.0; 64], &ChParams::new(1.0, 0.5, 0.1).unwrap()).unwrap();
        assert!(dm.iter().all(|v| *v == 0.0));
        assert!(epdiff_pde_rhs(&grid, &[0.0; 10], &ChParams::epdiff(1.0).unwrap()).is_err());
    }

    #[test]
    fn pde_rhs_has_zero_mean() {
        let grid = PeriodicGrid1D::new(40.0, 256).unwrap();
        let e = PulsonEnsemble::new(vec![-4.0, 3.0], vec![1.0, -0.6]).unwrap();
        let m = pde_initial_momentum(&grid, 1.0, &e).unwrap();
        let dm = epdiff_pde_rhs(&grid, &m, &ChParams::new(1.0, 0.3, 0.2).unwrap()).unwrap();
        assert!(grid.integrate(&dm).abs() < 1e-12);
    }

    #[test]
    fn linear_phase_speed_follows_dispersion_relation() {
        let grid = PeriodicGrid1D::new(40.0, 64).unwrap();
        let params = ChParams::new(1.0, 1.0, 0.3).unwrap();
        for mode in [1, 2, 4] {
            let r = measure_phase_speed(&grid, &params, mode, 1e-6, &IntegratorConfig::new(1e-2, 10.0, 1)).unwrap();
            assert!(r.rel_error() < 0.01, "{r:?}");
        }
    }

    #[test]
    fn resolution_diagnostic() {
        let grid = PeriodicGrid1D::new(2.0 * PI, 64).unwrap();
        let smooth: Vec<f64> = grid.points().iter().map(|x| x.sin()).collect();
        assert!(resolution_check(&grid, &smooth, 1.0).is_none());
        let rough: Vec<f64> = grid.points().iter().map(|x| (20.0 * x).sin()).collect();
        assert!(resolution_check(&grid, &rough, 1.0).is_some());
    }

    #[test]
    fn peak_refinement_is_exact_for_parabolas() {
        let grid = PeriodicGrid1D::new(10.0, 64).unwrap();
        let f: Vec<f64> = grid.points().iter().map(|x| 3.0 - (x - 0.37).powi(2)).collect();
        let p = find_peaks(&grid, &f)[0];
        assert!((p.x - 0.37).abs() < 1e-12 && (p.height - 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_ensemble_gives_zero_field() {
        let grid = PeriodicGrid1D::new(40.0, 64).unwrap();
        let r = particle_vs_pde(1.0, &PulsonEnsemble::empty(), &grid, &IntegratorConfig::new(0.1, 1.0, 1)).unwrap();
        assert_eq!(r.max_l2(), 0.0);
        assert!(r.peak_discrepancy.is_empty());
    }
}
