//! Per-system setup and execution.
//!
//! Each runner validates everything it can (parameters, state shape, module
//! preconditions, a first right-hand-side evaluation) before it takes a
//! single step, so a [`CliError::Validation`] always means nothing ran.

use geomech::epdiff1d::{
    field_snapshot, helmholtz_invert, particle_vs_pde, pde_energy, pde_initial_momentum, pde_momentum, peak_location,
    pulson_collide, pulson_hamiltonian, resolution_check, ChParams, EpdiffPde, FieldSnapshot, GreensFunction,
    PeriodicGrid1D, PulsonEnsemble, PulsonSystem,
};
use geomech::geodesics::{
    kk_charged_hamiltonian, Geodesic, KkCharged, KkChargedState, Lorentz, MagneticSystem, MetricField,
};
use geomech::heavy_top::{kk_hamiltonian, HeavyTop, HeavyTopParams, HeavyTopState, KaluzaKleinTop, KkTopState};
use geomech::integrate::{integrate, invariant_drift};
use geomech::ray_optics::{
    optical_hamiltonian, reduce, reduced_hamiltonian, MediumProfile, Ray4D, RayReduced, RayState4D, ReducedRayState,
};
use geomech::rigid_body::{
    free_ellipsoid, manakov_invariants, momentum_maps, Inertia3, InertiaN, ManakovBody, RigidBody3, SonRigidBody,
    SymmetricRigidBody, SymmetricState,
};
use geomech::{DriftReport, IntegratorConfig, Invariant, MatN, OdeSystem, SkewCheck, Trajectory, Vec3};
use serde_json::{json, Value};

use crate::config::{Params, ScenarioConfig};
use crate::error::{invalid, runtime, CliError};
use crate::registry::SystemKind;

/// Everything a run produces, before it is written anywhere.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub kind: SystemKind,
    /// CSV header; the first entry is the evolution variable.
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub invariants: DriftReport,
    pub summary: Option<Value>,
    pub snapshot: Option<FieldSnapshot>,
}

pub fn execute(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let kind = cfg.kind()?;
    let params = cfg.params()?;
    let icfg = cfg.integrator_config()?;
    let x0 = &cfg.initial_state;
    if let Some(i) = x0.iter().position(|v| !v.is_finite()) {
        return Err(CliError::Validation(format!("initial_state[{i}] is not finite")));
    }
    let s = Setup { kind, p: params, x0, cfg: icfg };
    match kind {
        SystemKind::RigidBody3 => s.rigid_body3(),
        SystemKind::RigidBodySon => s.rigid_body_son(),
        SystemKind::Manakov => s.manakov(),
        SystemKind::SymmetricRb => s.symmetric_rb(),
        SystemKind::HeavyTop => s.heavy_top(),
        SystemKind::HeavyTopKk => s.heavy_top_kk(),
        SystemKind::Pulsons => s.pulsons(),
        SystemKind::EpdiffPde => s.epdiff_pde(),
        SystemKind::ParticleVsPde => s.particle_vs_pde(),
        SystemKind::Ray4d => s.ray4d(),
        SystemKind::RayReduced => s.ray_reduced(),
        SystemKind::Geodesic => s.geodesic(),
        SystemKind::Lorentz => s.lorentz(),
        SystemKind::KkCharged => s.kk_charged(),
        SystemKind::FreeEllipsoid => s.free_ellipsoid(),
    }
}

struct Setup<'a> {
    kind: SystemKind,
    p: Params<'a>,
    x0: &'a [f64],
    cfg: IntegratorConfig,
}

fn v3(x: &[f64], at: usize) -> Vec3 {
    Vec3([x[at], x[at + 1], x[at + 2]])
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn matrix_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).flat_map(|i| (1..=n).map(move |j| format!("{prefix}_{i}_{j}"))).collect()
}

fn square(x: &[f64], n: usize) -> MatN {
    MatN::from_row_major(n, x.to_vec()).expect("length checked")
}

/// One invariant per strictly upper entry of a skew matrix function.
fn upper_entries(prefix: &str, n: usize, f: impl Fn(&[f64]) -> MatN + Clone + Send + Sync + 'static) -> Vec<Invariant> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let f = f.clone();
            out.push(Invariant::new(format!("{prefix}[{},{}]", i + 1, j + 1), move |x| f(x)[(i, j)]));
        }
    }
    out
}

fn with_time(label: &str, columns: Vec<String>) -> Vec<String> {
    std::iter::once(label.to_string()).chain(columns).collect()
}

fn rows_of(traj: &Trajectory) -> Vec<Vec<f64>> {
    traj.iter().map(|(t, x)| std::iter::once(t).chain(x.iter().copied()).collect()).collect()
}

impl Setup<'_> {
    fn expect_len(&self, n: usize, layout: &str) -> Result<(), CliError> {
        if self.x0.len() != n {
            return Err(CliError::Validation(format!(
                "{}: initial_state must have {n} entries ({layout}), got {}",
                self.kind,
                self.x0.len()
            )));
        }
        Ok(())
    }

    fn pulson_data(&self) -> Result<PulsonEnsemble, CliError> {
        let n = self.x0.len();
        if n == 0 || !n.is_multiple_of(2) {
            return Err(CliError::Validation(format!(
                "{}: initial_state must be q1..qN followed by p1..pN, got {n} entries",
                self.kind
            )));
        }
        PulsonEnsemble::new(self.x0[..n / 2].to_vec(), self.x0[n / 2..].to_vec()).map_err(invalid)
    }

    fn grid(&self) -> Result<PeriodicGrid1D, CliError> {
        PeriodicGrid1D::new(self.p.positive("length", Some(40.0))?, self.p.usize_or("n", 1024)?).map_err(invalid)
    }

    /// State shape and a first vector-field evaluation.
    fn check(&self, sys: &dyn OdeSystem, x0: &[f64]) -> Result<(), CliError> {
        if x0.len() != sys.dim() {
            return Err(CliError::Validation(format!(
                "{}: state has {} entries, system expects {}",
                self.kind,
                x0.len(),
                sys.dim()
            )));
        }
        let d = sys.rhs(0.0, x0).map_err(|e| CliError::Validation(format!("{}: initial state: {e}", self.kind)))?;
        if d.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Validation(format!(
                "{}: vector field is not finite at the initial state",
                self.kind
            )));
        }
        Ok(())
    }

    fn integrate(&self, sys: &dyn OdeSystem, x0: &[f64]) -> Result<Trajectory, CliError> {
        self.check(sys, x0)?;
        integrate(sys, x0, &self.cfg).map_err(runtime)
    }

    fn finish(
        &self,
        label: &str,
        columns: Vec<String>,
        traj: &Trajectory,
        invariants: &[Invariant],
    ) -> Result<Outcome, CliError> {
        Ok(Outcome {
            kind: self.kind,
            columns: with_time(label, columns),
            rows: rows_of(traj),
            invariants: invariant_drift(traj, invariants).map_err(runtime)?,
            summary: None,
            snapshot: None,
        })
    }

    fn rigid_body3(&self) -> Result<Outcome, CliError> {
        let i = self.p.vec3("inertia")?;
        let inertia = Inertia3::new(i[0], i[1], i[2]).map_err(invalid)?;
        self.expect_len(3, "Pi1 Pi2 Pi3")?;
        let traj = self.integrate(&RigidBody3 { inertia }, self.x0)?;
        let invariants = [
            Invariant::new("energy", move |x| inertia.energy(v3(x, 0))),
            Invariant::new("|Pi|^2", |x| v3(x, 0).norm_sq()),
        ];
        self.finish("t", names("Pi", 3), &traj, &invariants)
    }

    fn rigid_body_son(&self) -> Result<Outcome, CliError> {
        let inertia = InertiaN::new(self.p.vec("d")?).map_err(invalid)?;
        let n = inertia.dim();
        self.expect_len(n * n, "M row-major")?;
        SkewCheck::default().check(&square(self.x0, n)).map_err(invalid)?;
        let traj = self.integrate(&SonRigidBody { inertia: inertia.clone() }, self.x0)?;
        let invariants = [
            Invariant::new("energy", move |x| inertia.energy(&square(x, n).skew_part()).unwrap_or(f64::NAN)),
            Invariant::new("tr(M^2)", move |x| {
                let m = square(x, n);
                (&m * &m).trace()
            }),
        ];
        self.finish("t", matrix_names("M", n), &traj, &invariants)
    }

    fn manakov(&self) -> Result<Outcome, CliError> {
        let body = ManakovBody::new(self.p.vec("a")?, self.p.vec("b")?).map_err(invalid)?;
        let kmax = self.p.usize_or("kmax", 4)?;
        let am = body.a_matrix();
        let n = am.dim();
        self.expect_len(n * n, "M row-major")?;
        let m0 = square(self.x0, n);
        manakov_invariants(&m0, &am, kmax).map_err(invalid)?;
        let traj = self.integrate(&body, self.x0)?;
        let mut invariants = Vec::new();
        for k in 2..=kmax {
            for j in 0..=k {
                let am = am.clone();
                invariants.push(Invariant::new(format!("tr((M+lA)^{k})[l^{j}]"), move |x| {
                    // the flow keeps M skew only up to roundoff
                    manakov_invariants(&square(x, n).skew_part(), &am, k).map_or(f64::NAN, |c| c[k - 2][j])
                }));
            }
        }
        self.finish("t", matrix_names("M", n), &traj, &invariants)
    }

    fn symmetric_rb(&self) -> Result<Outcome, CliError> {
        let inertia = InertiaN::new(self.p.vec("d")?).map_err(invalid)?;
        let n = inertia.dim();
        self.expect_len(2 * n * n, "Q then P, row-major")?;
        SymmetricState::from_flat(n, self.x0).map_err(invalid)?;
        let traj = self.integrate(&SymmetricRigidBody { inertia: inertia.clone() }, self.x0)?;
        let state = move |x: &[f64]| SymmetricState::from_flat(n, x).expect("length checked");
        let mut invariants = vec![
            Invariant::new("energy", move |x| inertia.energy(&state(x).body_momentum()).unwrap_or(f64::NAN)),
            Invariant::new("tr(M^2)", move |x| {
                let m = state(x).body_momentum();
                (&m * &m).trace()
            }),
        ];
        invariants.extend(upper_entries("J_L", n, move |x| momentum_maps(&state(x)).0));
        let columns = matrix_names("Q", n).into_iter().chain(matrix_names("P", n)).collect();
        self.finish("t", columns, &traj, &invariants)
    }

    fn top_params(&self) -> Result<HeavyTopParams, CliError> {
        let i = self.p.vec3("inertia")?;
        let inertia = Inertia3::new(i[0], i[1], i[2]).map_err(invalid)?;
        HeavyTopParams::new(inertia, self.p.f64("mass")?, self.p.f64_or("gravity", 9.81)?, self.p.vec3("chi")?)
            .map_err(invalid)
    }

    fn heavy_top(&self) -> Result<Outcome, CliError> {
        let params = self.top_params()?;
        self.expect_len(6, "Pi1 Pi2 Pi3 Gamma1 Gamma2 Gamma3")?;
        let s0 = HeavyTopState::initial(v3(self.x0, 0), v3(self.x0, 3)).map_err(invalid)?;
        let traj = self.integrate(&HeavyTop { params }, &s0.to_vec())?;
        let invariants = [
            Invariant::new("energy", move |x| params.energy(&HeavyTopState::from_slice(x))),
            Invariant::new("|Gamma|^2", |x| v3(x, 3).norm_sq()),
            Invariant::new("Pi.Gamma", |x| v3(x, 0).dot(v3(x, 3))),
        ];
        let columns = names("Pi", 3).into_iter().chain(names("Gamma", 3)).collect();
        self.finish("t", columns, &traj, &invariants)
    }

    fn heavy_top_kk(&self) -> Result<Outcome, CliError> {
        let params = self.top_params()?;
        self.expect_len(6, "Pi1 Pi2 Pi3 Gamma1 Gamma2 Gamma3")?;
        let s0 =
            KkTopState::initial(v3(self.x0, 0), v3(self.x0, 3), Vec3::ZERO, params.kk_momentum()).map_err(invalid)?;
        let inertia = params.inertia;
        let traj = self.integrate(&KaluzaKleinTop { inertia }, &s0.to_vec())?;
        let invariants = [
            Invariant::new("H_KK", move |x| kk_hamiltonian(&inertia, &KkTopState::from_slice(x))),
            Invariant::new("|Gamma|^2", |x| v3(x, 3).norm_sq()),
            Invariant::new("Pi.Gamma", |x| v3(x, 0).dot(v3(x, 3))),
            Invariant::new("|p|^2", |x| v3(x, 9).norm_sq()),
        ];
        let columns = [names("Pi", 3), names("Gamma", 3), names("q", 3), names("p", 3)].concat();
        self.finish("t", columns, &traj, &invariants)
    }

    fn kernel(&self) -> Result<GreensFunction, CliError> {
        match self.p.str_or("kernel", "peakon")? {
            "peakon" => GreensFunction::peakon(self.p.f64_or("alpha", 1.0)?).map_err(invalid),
            "compacton" => Ok(GreensFunction::Compacton),
            "gaussian" => GreensFunction::gaussian(self.p.f64_or("sigma", 1.0)?).map_err(invalid),
            other => Err(CliError::Validation(format!(
                "pulsons: kernel must be \"peakon\", \"compacton\" or \"gaussian\", got \"{other}\""
            ))),
        }
    }

    fn pulsons(&self) -> Result<Outcome, CliError> {
        let g = self.kernel()?;
        let e0 = self.pulson_data()?;
        let n = e0.len();
        let sys = PulsonSystem { kernel: g, n };
        let x0 = e0.to_state();
        let (traj, summary) = if n == 2 {
            self.check(&sys, &x0)?;
            let c = pulson_collide(&g, &e0, &self.cfg).map_err(runtime)?;
            let summary = json!({
                "collision": {
                    "incoming_momenta": c.incoming,
                    "outgoing_momenta": c.outgoing,
                    "exchange_defect": c.exchange_defect(),
                    "min_separation": c.min_separation,
                    "time_of_min_separation": c.time_of_min_separation,
                    "halted_at": c.halted_at,
                }
            });
            (c.trajectory, Some(summary))
        } else {
            (self.integrate(&sys, &x0)?, None)
        };
        let invariants = [
            Invariant::new("hamiltonian", move |x| pulson_hamiltonian(&g, &PulsonEnsemble::from_state(x))),
            Invariant::new("total_momentum", |x| PulsonEnsemble::from_state(x).total_momentum()),
        ];
        let columns = names("q", n).into_iter().chain(names("p", n)).collect();
        let mut out = self.finish("t", columns, &traj, &invariants)?;
        out.summary = summary;
        Ok(out)
    }

    fn epdiff_pde(&self) -> Result<Outcome, CliError> {
        let alpha = self.p.positive("alpha", None)?;
        let params = ChParams::new(alpha, self.p.f64_or("c0", 0.0)?, self.p.f64_or("gamma", 0.0)?).map_err(invalid)?;
        let grid = self.grid()?;
        let e0 = self.pulson_data()?;
        let m0 = pde_initial_momentum(&grid, alpha, &e0).map_err(invalid)?;
        let traj = self.integrate(&EpdiffPde { grid: grid.clone(), params }, &m0)?;
        let g2 = grid.clone();
        let g3 = grid.clone();
        let invariants = [
            Invariant::new("momentum", move |m| pde_momentum(&g2, m)),
            Invariant::new("energy", move |m| pde_energy(&g3, m, alpha)),
        ];
        // the field itself goes to the snapshot; the trajectory holds scalars
        let rows = traj
            .iter()
            .map(|(t, m)| {
                let u = helmholtz_invert(&grid, m, alpha);
                let u_max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let x_peak = peak_location(&grid, &u).unwrap_or(f64::NAN);
                vec![t, pde_momentum(&grid, m), pde_energy(&grid, m, alpha), u_max, x_peak]
            })
            .collect();
        let last = traj.last_state();
        let loss = resolution_check(&grid, last, alpha);
        Ok(Outcome {
            kind: self.kind,
            columns: ["t", "momentum", "energy", "u_max", "x_peak"].map(String::from).to_vec(),
            rows,
            invariants: invariant_drift(&traj, &invariants).map_err(runtime)?,
            summary: Some(json!({
                "grid": { "length": grid.length(), "n": grid.len(), "dx": grid.dx() },
                "resolution_loss": loss.map(|l| json!({ "band_fraction": l.band_fraction })),
            })),
            snapshot: Some(field_snapshot(&grid, last, alpha)),
        })
    }

    fn particle_vs_pde(&self) -> Result<Outcome, CliError> {
        let alpha = self.p.positive("alpha", None)?;
        let grid = self.grid()?;
        let e0 = self.pulson_data()?;
        let half = 0.5 * grid.length();
        if e0.q.iter().any(|q| q.abs() >= half) {
            return Err(CliError::Validation(format!("particle_vs_pde: pulsons must start inside [-{half}, {half})")));
        }
        let m0 = pde_initial_momentum(&grid, alpha, &e0).map_err(invalid)?;
        self.check(&EpdiffPde { grid: grid.clone(), params: ChParams::epdiff(alpha).map_err(invalid)? }, &m0)?;
        let r = particle_vs_pde(alpha, &e0, &grid, &self.cfg).map_err(runtime)?;
        let momentum0 = pde_momentum(&grid, &m0);
        let peak = |i: usize| r.peak_discrepancy.get(i).copied().filter(|_| r.peak_discrepancy.len() == r.times.len());
        let rows =
            (0..r.times.len()).map(|i| vec![r.times[i], r.l2_discrepancy[i], peak(i).unwrap_or(f64::NAN)]).collect();
        let invariants = DriftReport {
            entries: vec![geomech::integrate::InvariantDrift {
                name: "pde_momentum".into(),
                initial: momentum0,
                max_abs_drift: r.pde_momentum_drift,
                max_rel_drift: r.pde_momentum_drift / momentum0.abs().max(1.0),
            }],
        };
        Ok(Outcome {
            kind: self.kind,
            columns: ["t", "l2_discrepancy", "peak_discrepancy"].map(String::from).to_vec(),
            rows,
            invariants,
            summary: Some(json!({
                "exchange_time_particles": r.exchange_time_particles,
                "exchange_time_pde": r.exchange_time_pde,
                "exchange_time_rel_error": r.exchange_time_rel_error(),
                "max_l2_discrepancy": r.max_l2(),
                "max_peak_discrepancy": r.max_peak_error(),
            })),
            snapshot: None,
        })
    }

    fn medium(&self) -> Result<MediumProfile, CliError> {
        match self.p.str_or("medium", "fiber")? {
            "fiber" => {
                MediumProfile::fiber(self.p.f64_or("lam", 0.9)?, self.p.f64_or("mu", 1.0)?, self.p.f64_or("nu", 0.1)?)
                    .map_err(invalid)
            }
            "uniform" => MediumProfile::uniform(self.p.f64_or("n2", 1.0)?).map_err(invalid),
            other => Err(CliError::Validation(format!(
                "{}: medium must be \"fiber\" or \"uniform\", got \"{other}\"",
                self.kind
            ))),
        }
    }

    fn ray4d(&self) -> Result<Outcome, CliError> {
        let medium = self.medium()?;
        self.expect_len(4, "q1 q2 p1 p2")?;
        optical_hamiltonian(&medium, &RayState4D::from_slice(self.x0)).map_err(invalid)?;
        let traj = self.integrate(&Ray4D { medium }, self.x0)?;
        let invariants = [
            Invariant::new("H", move |x| optical_hamiltonian(&medium, &RayState4D::from_slice(x)).unwrap_or(f64::NAN)),
            Invariant::new("p_phi", |x| RayState4D::from_slice(x).p_phi()),
            Invariant::new("S2", |x| reduce(&RayState4D::from_slice(x)).s2()),
        ];
        let columns = names("q", 2).into_iter().chain(names("p", 2)).collect();
        self.finish("z", columns, &traj, &invariants)
    }

    fn ray_reduced(&self) -> Result<Outcome, CliError> {
        let medium = self.medium()?;
        self.expect_len(3, "X Y Z")?;
        let r0 = ReducedRayState::from_vec3(v3(self.x0, 0));
        if r0.x < 0.0 || r0.y < 0.0 || r0.s2() < 0.0 {
            return Err(CliError::Validation(format!(
                "ray_reduced: (X, Y, Z) must satisfy X >= 0, Y >= 0, XY - Z^2 >= 0, got S2 = {}",
                r0.s2()
            )));
        }
        reduced_hamiltonian(&medium, &r0).map_err(invalid)?;
        let traj = self.integrate(&RayReduced { medium }, self.x0)?;
        let state = |x: &[f64]| ReducedRayState::from_vec3(v3(x, 0));
        let invariants = [
            Invariant::new("h", move |x| reduced_hamiltonian(&medium, &state(x)).unwrap_or(f64::NAN)),
            Invariant::new("S2", move |x| state(x).s2()),
        ];
        self.finish("z", ["X", "Y", "Z"].map(String::from).to_vec(), &traj, &invariants)
    }

    fn geodesic(&self) -> Result<Outcome, CliError> {
        let (metric, coords): (MetricField, Vec<String>) = match self.p.str("metric")? {
            "sphere" => (MetricField::sphere(), vec!["theta".into(), "phi".into()]),
            "hyperbolic" => (MetricField::hyperbolic_half_plane(), vec!["x".into(), "y".into()]),
            "euclidean" => {
                let dim = self.p.usize_or("dim", 2)?;
                if dim == 0 {
                    return Err(CliError::Validation("geodesic: dim must be at least 1".into()));
                }
                (MetricField::euclidean(dim), names("q", dim))
            }
            other => {
                return Err(CliError::Validation(format!(
                    "geodesic: metric must be \"sphere\", \"hyperbolic\" or \"euclidean\", got \"{other}\""
                )))
            }
        };
        if self.p.f64_opt("dim")?.is_some() && coords[0] != "q1" {
            return Err(CliError::Validation("geodesic: `dim` only applies to the euclidean metric".into()));
        }
        let k = metric.dim();
        self.expect_len(2 * k, "positions then velocities")?;
        let traj = self.integrate(&Geodesic { metric: metric.clone() }, self.x0)?;
        let invariants =
            [Invariant::new("kinetic_energy", move |x| metric.kinetic_energy(&x[..k], &x[k..]).unwrap_or(f64::NAN))];
        let columns = coords.iter().cloned().chain(coords.iter().map(|c| format!("d{c}"))).collect();
        self.finish("t", columns, &traj, &invariants)
    }

    fn magnetic(&self) -> Result<MagneticSystem, CliError> {
        let sys =
            MagneticSystem::uniform(self.p.f64_or("mass", 1.0)?, self.p.f64_or("e_over_c", 1.0)?, self.p.vec3("b")?)
                .map_err(invalid)?;
        self.expect_len(6, "q1 q2 q3 v1 v2 v3")?;
        Ok(sys)
    }

    fn lorentz(&self) -> Result<Outcome, CliError> {
        let system = self.magnetic()?;
        let mass = system.mass();
        let b = system.field(Vec3::ZERO);
        let traj = self.integrate(&Lorentz { system: system.clone() }, self.x0)?;
        let invariants = [Invariant::new("kinetic_energy", move |x| 0.5 * mass * v3(x, 3).norm_sq())];
        let columns = names("q", 3).into_iter().chain(names("v", 3)).collect();
        let mut out = self.finish("t", columns, &traj, &invariants)?;
        let v = v3(self.x0, 3);
        let bn = b.norm();
        if bn > 0.0 {
            let v_perp = (v - b * (v.dot(b) / (bn * bn))).norm();
            out.summary = Some(json!({ "gyroradius": mass * v_perp / (system.e_over_c().abs() * bn) }));
        }
        Ok(out)
    }

    fn kk_charged(&self) -> Result<Outcome, CliError> {
        let system = self.magnetic()?;
        let s0 = KkChargedState::from_velocity(&system, v3(self.x0, 0), v3(self.x0, 3));
        let traj = self.integrate(&KkCharged { system: system.clone() }, &s0.to_vec())?;
        let invariants = [
            Invariant::new("H_KK", move |x| kk_charged_hamiltonian(&system, &KkChargedState::from_slice(x))),
            Invariant::new("pi", |x| KkChargedState::from_slice(x).pi),
        ];
        let columns = [names("q", 3), names("p", 3), vec!["theta".into(), "pi".into()]].concat();
        self.finish("t", columns, &traj, &invariants)
    }

    fn free_ellipsoid(&self) -> Result<Outcome, CliError> {
        let n = self.p.usize("n")?;
        if n == 0 {
            return Err(CliError::Validation("free_ellipsoid: n must be at least 1".into()));
        }
        self.expect_len(2 * n * n, "Q0 then V0, row-major")?;
        let q0 = square(&self.x0[..n * n], n);
        let v0 = square(&self.x0[n * n..], n);
        // closed form, sampled on the integrator's time grid
        let steps = self.cfg.num_steps();
        let mut traj = Trajectory::default();
        for k in 0..=steps {
            if k != 0 && k % self.cfg.record_every != 0 && k != steps {
                continue;
            }
            let t = if k == steps { self.cfg.t_end } else { k as f64 * self.cfg.step };
            let f = free_ellipsoid(&q0, &v0, t).map_err(runtime)?;
            let x: Vec<f64> = f.q.as_slice().iter().chain(f.qdot.as_slice()).copied().collect();
            if x.iter().any(|v| !v.is_finite()) {
                return Err(runtime(geomech::Error::NonFiniteState { t }));
            }
            traj.times.push(t);
            traj.states.push(x);
        }
        let at =
            move |x: &[f64]| free_ellipsoid(&square(&x[..n * n], n), &square(&x[n * n..], n), 0.0).expect("square");
        let mut invariants =
            vec![Invariant::new("kinetic_energy", move |x| 0.5 * x[n * n..].iter().map(|v| v * v).sum::<f64>())];
        invariants.extend(upper_entries("K_L", n, move |x| at(x).k_left));
        invariants.extend(upper_entries("K_R", n, move |x| at(x).k_right));
        let columns = matrix_names("Q", n).into_iter().chain(matrix_names("V", n)).collect();
        self.finish("t", columns, &traj, &invariants)
    }
}
