//! Fixed-step classical RK4, a convergence-order harness and an
//! invariant-drift monitor.
//!
//! Every equation of motion in the crate is exposed as an [`OdeSystem`] over
//! a flat `f64` state. Matrix-valued states are flattened row-major.
//! The integrator never projects or renormalises: drift of conserved
//! quantities is measured with [`invariant_drift`] and reported.

use crate::error::{Error, Result};

pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, x: &[f64]) -> Result<Vec<f64>>;
}

impl<S: OdeSystem + ?Sized> OdeSystem for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn rhs(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        (**self).rhs(t, x)
    }
}

/// Adapts an infallible closure `(t, x) -> dx/dt` to an [`OdeSystem`].
pub struct FnSystem<F> {
    dim: usize,
    f: F,
}

impl<F> FnSystem<F>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnSystem { dim, f }
    }
}

impl<F> OdeSystem for FnSystem<F>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn rhs(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        Ok((self.f)(t, x))
    }
}

/// An autonomous vector field with its sign flipped, for time-reversal checks.
pub struct Reversed<S>(pub S);

impl<S: OdeSystem> OdeSystem for Reversed<S> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn rhs(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let mut d = self.0.rhs(t, x)?;
        d.iter_mut().for_each(|v| *v = -*v);
        Ok(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub step: f64,
    pub t_end: f64,
    pub record_every: usize,
}

impl IntegratorConfig {
    pub fn new(step: f64, t_end: f64, record_every: usize) -> Self {
        IntegratorConfig { step, t_end, record_every }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidParameter(format!("step must be positive, got {}", self.step)));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidParameter(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.step > self.t_end {
            return Err(Error::InvalidParameter(format!("step {} exceeds t_end {}", self.step, self.t_end)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of steps; the last one is shortened to land exactly on `t_end`.
    pub fn num_steps(&self) -> usize {
        ((self.t_end / self.step) - 1e-9).ceil().max(1.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.times.iter().copied().zip(self.states.iter().map(Vec::as_slice))
    }
}

fn axpy(x: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(xi, ki)| xi + a * ki).collect()
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub fn rk4_step<S: OdeSystem + ?Sized>(sys: &S, t: f64, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    let stage = |tt: f64, y: &[f64]| -> Result<Vec<f64>> {
        let k = sys.rhs(tt, y)?;
        if k.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: y.len(), actual: k.len() });
        }
        if !all_finite(&k) {
            return Err(Error::NonFiniteState { t });
        }
        Ok(k)
    };
    let k1 = stage(t, x)?;
    let k2 = stage(t + 0.5 * h, &axpy(x, 0.5 * h, &k1))?;
    let k3 = stage(t + 0.5 * h, &axpy(x, 0.5 * h, &k2))?;
    let k4 = stage(t + h, &axpy(x, h, &k3))?;
    let out: Vec<f64> = (0..x.len()).map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
    if !all_finite(&out) {
        return Err(Error::NonFiniteState { t: t + h });
    }
    Ok(out)
}

/// Integrates from `t = 0` to `cfg.t_end`, recording the initial state, every
/// `record_every`-th step and the final state.
pub fn integrate<S: OdeSystem + ?Sized>(sys: &S, x0: &[f64], cfg: &IntegratorConfig) -> Result<Trajectory> {
    integrate_observed(sys, x0, cfg, |_, _| Ok(true))
}

/// Like [`integrate`], calling `observe(t, x)` after every step. Integration
/// stops early (recording the current state) when `observe` returns `false`.
pub fn integrate_observed<S, O>(sys: &S, x0: &[f64], cfg: &IntegratorConfig, mut observe: O) -> Result<Trajectory>
where
    S: OdeSystem + ?Sized,
    O: FnMut(f64, &[f64]) -> Result<bool>,
{
    cfg.validate()?;
    if x0.len() != sys.dim() {
        return Err(Error::DimensionMismatch { expected: sys.dim(), actual: x0.len() });
    }
    if !all_finite(x0) {
        return Err(Error::NonFiniteState { t: 0.0 });
    }
    let n = cfg.num_steps();
    let mut traj = Trajectory { times: vec![0.0], states: vec![x0.to_vec()] };
    let mut x = x0.to_vec();
    let mut t = 0.0;
    for k in 1..=n {
        let t_next = if k == n { cfg.t_end } else { k as f64 * cfg.step };
        x = rk4_step(sys, t, &x, t_next - t)?;
        t = t_next;
        let keep_going = observe(t, &x)?;
        if k % cfg.record_every == 0 || k == n || !keep_going {
            traj.times.push(t);
            traj.states.push(x.clone());
        }
        if !keep_going {
            break;
        }
    }
    Ok(traj)
}

fn max_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Least-squares slope of `log(err)` against `log(h)`.
pub fn fitted_order(steps: &[f64], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn final_state<S: OdeSystem + ?Sized>(sys: &S, x0: &[f64], t_end: f64, h: f64) -> Result<Vec<f64>> {
    let cfg = IntegratorConfig::new(h, t_end, usize::MAX);
    Ok(integrate(sys, x0, &cfg)?.last_state().to_vec())
}

/// Measured order of accuracy against a known final state `exact` at `t_end`.
pub fn convergence_order<S: OdeSystem + ?Sized>(
    sys: &S,
    x0: &[f64],
    t_end: f64,
    exact: &[f64],
    steps: &[f64],
) -> Result<f64> {
    if steps.len() < 3 {
        return Err(Error::InsufficientSteps(steps.len()));
    }
    let errors = steps
        .iter()
        .map(|&h| final_state(sys, x0, t_end, h).map(|x| max_norm_diff(&x, exact)))
        .collect::<Result<Vec<_>>>()?;
    Ok(fitted_order(steps, &errors))
}

/// Order measured by step halving, for problems without a closed form:
/// the error at `h` is estimated as `|x_h - x_{h/2}|`.
pub fn self_convergence_order<S: OdeSystem + ?Sized>(sys: &S, x0: &[f64], t_end: f64, steps: &[f64]) -> Result<f64> {
    if steps.len() < 3 {
        return Err(Error::InsufficientSteps(steps.len()));
    }
    let errors = steps
        .iter()
        .map(|&h| {
            let coarse = final_state(sys, x0, t_end, h)?;
            let fine = final_state(sys, x0, t_end, 0.5 * h)?;
            Ok(max_norm_diff(&coarse, &fine))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(fitted_order(steps, &errors))
}

type StateFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A named scalar function of the state.
pub struct Invariant {
    pub name: String,
    f: StateFn,
}

impl Invariant {
    pub fn new(name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Invariant { name: name.into(), f: Box::new(f) }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

impl std::fmt::Debug for Invariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Invariant").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantDrift {
    pub name: String,
    pub initial: f64,
    pub max_abs_drift: f64,
    /// `max_abs_drift / max(1, |initial|)`
    pub max_rel_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DriftReport {
    pub entries: Vec<InvariantDrift>,
}

impl DriftReport {
    pub fn get(&self, name: &str) -> Option<&InvariantDrift> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn max_rel_drift(&self) -> f64 {
        self.entries.iter().fold(0.0_f64, |m, e| m.max(e.max_rel_drift))
    }
}

pub fn invariant_drift(traj: &Trajectory, invariants: &[Invariant]) -> Result<DriftReport> {
    let mut entries = Vec::with_capacity(invariants.len());
    for inv in invariants {
        let mut initial = None;
        let mut max_abs_drift = 0.0_f64;
        for (t, x) in traj.iter() {
            let v = inv.eval(x);
            if !v.is_finite() {
                return Err(Error::NonFiniteEvaluation { what: format!("invariant '{}' at t = {t}", inv.name) });
            }
            let v0 = *initial.get_or_insert(v);
            max_abs_drift = max_abs_drift.max((v - v0).abs());
        }
        let initial = initial.unwrap_or(0.0);
        entries.push(InvariantDrift {
            name: inv.name.clone(),
            initial,
            max_abs_drift,
            max_rel_drift: max_abs_drift / initial.abs().max(1.0),
        });
    }
    Ok(DriftReport { entries })
}
