//! The systems reachable from a scenario file.

use std::fmt::{self, Write as _};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SystemKind {
    RigidBody3,
    RigidBodySon,
    Manakov,
    SymmetricRb,
    HeavyTop,
    HeavyTopKk,
    Pulsons,
    EpdiffPde,
    ParticleVsPde,
    Ray4d,
    RayReduced,
    Geodesic,
    Lorentz,
    KkCharged,
    FreeEllipsoid,
}

impl SystemKind {
    pub const ALL: [SystemKind; 15] = [
        SystemKind::RigidBody3,
        SystemKind::RigidBodySon,
        SystemKind::Manakov,
        SystemKind::SymmetricRb,
        SystemKind::HeavyTop,
        SystemKind::HeavyTopKk,
        SystemKind::Pulsons,
        SystemKind::EpdiffPde,
        SystemKind::ParticleVsPde,
        SystemKind::Ray4d,
        SystemKind::RayReduced,
        SystemKind::Geodesic,
        SystemKind::Lorentz,
        SystemKind::KkCharged,
        SystemKind::FreeEllipsoid,
    ];

    pub fn name(self) -> &'static str {
        self.spec().name
    }

    pub fn spec(self) -> &'static SystemSpec {
        REGISTRY.iter().find(|s| s.kind == self).expect("every kind is registered")
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SystemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        REGISTRY
            .iter()
            .find(|spec| spec.name == s)
            .map(|spec| spec.kind)
            .ok_or_else(|| format!("unknown system `{s}` (see `geomech list`)"))
    }
}

/// Static description of one system: what the scenario file must supply and
/// what the report will contain.
#[derive(Debug)]
pub struct SystemSpec {
    pub kind: SystemKind,
    pub name: &'static str,
    pub summary: &'static str,
    /// Layout of `initial_state`.
    pub state: &'static str,
    pub required: &'static [&'static str],
    /// Optional parameters with their defaults.
    pub optional: &'static [(&'static str, &'static str)],
    /// Invariant names as they appear in the report. Entries containing
    /// `<...>` stand for a family indexed by the bracketed placeholder.
    pub invariants: &'static [&'static str],
}

impl SystemSpec {
    pub fn accepts(&self, key: &str) -> bool {
        self.required.contains(&key) || self.optional.iter().any(|(k, _)| *k == key)
    }

    /// Does a reported invariant name belong to this system's registration?
    pub fn registers(&self, name: &str) -> bool {
        self.invariants.iter().any(|pat| match pat.find('<') {
            None => *pat == name,
            Some(open) => name.starts_with(&pat[..open]),
        })
    }
}

pub static REGISTRY: [SystemSpec; 15] = [
    SystemSpec {
        kind: SystemKind::RigidBody3,
        name: "rigid_body3",
        summary: "free rigid body, Euler equations on so(3)*",
        state: "Pi1 Pi2 Pi3",
        required: &["inertia"],
        optional: &[],
        invariants: &["energy", "|Pi|^2"],
    },
    SystemSpec {
        kind: SystemKind::RigidBodySon,
        name: "rigid_body_son",
        summary: "rigid body on so(n)*, M' = [M, Omega]",
        state: "M (n x n skew, row-major)",
        required: &["d"],
        optional: &[],
        invariants: &["energy", "tr(M^2)"],
    },
    SystemSpec {
        kind: SystemKind::Manakov,
        name: "manakov",
        summary: "Manakov top, (M + lambda A)' = [M + lambda A, Omega + lambda B]",
        state: "M (n x n skew, row-major)",
        required: &["a", "b"],
        optional: &[("kmax", "4")],
        invariants: &["tr((M+lA)^<k>)[l^<j>]"],
    },
    SystemSpec {
        kind: SystemKind::SymmetricRb,
        name: "symmetric_rb",
        summary: "symmetric rigid body equations on T*GL(n)",
        state: "Q (n x n), then P (n x n), row-major",
        required: &["d"],
        optional: &[],
        invariants: &["energy", "tr(M^2)", "J_L[<i>,<j>]"],
    },
    SystemSpec {
        kind: SystemKind::HeavyTop,
        name: "heavy_top",
        summary: "heavy top on se(3)*",
        state: "Pi1 Pi2 Pi3 Gamma1 Gamma2 Gamma3",
        required: &["inertia", "mass", "chi"],
        optional: &[("gravity", "9.81")],
        invariants: &["energy", "|Gamma|^2", "Pi.Gamma"],
    },
    SystemSpec {
        kind: SystemKind::HeavyTopKk,
        name: "heavy_top_kk",
        summary: "heavy top as a Kaluza-Klein system on se(3)* x T*R^3, p = -m g chi",
        state: "Pi1 Pi2 Pi3 Gamma1 Gamma2 Gamma3 (q starts at 0)",
        required: &["inertia", "mass", "chi"],
        optional: &[("gravity", "9.81")],
        invariants: &["H_KK", "|Gamma|^2", "Pi.Gamma", "|p|^2"],
    },
    SystemSpec {
        kind: SystemKind::Pulsons,
        name: "pulsons",
        summary: "N-pulson particle solutions of 1D EPDiff",
        state: "q1..qN, then p1..pN",
        required: &[],
        optional: &[("kernel", "\"peakon\""), ("alpha", "1"), ("sigma", "1")],
        invariants: &["hamiltonian", "total_momentum"],
    },
    SystemSpec {
        kind: SystemKind::EpdiffPde,
        name: "epdiff_pde",
        summary: "pseudospectral 1D EPDiff / Camassa-Holm PDE from pulson initial data",
        state: "q1..qN, then p1..pN (peakon data for u at t = 0)",
        required: &["alpha"],
        optional: &[("length", "40"), ("n", "1024"), ("c0", "0"), ("gamma", "0")],
        invariants: &["momentum", "energy"],
    },
    SystemSpec {
        kind: SystemKind::ParticleVsPde,
        name: "particle_vs_pde",
        summary: "peakon particles against the PDE field from the same data",
        state: "q1..qN, then p1..pN",
        required: &["alpha"],
        optional: &[("length", "40"), ("n", "1024")],
        invariants: &["pde_momentum"],
    },
    SystemSpec {
        kind: SystemKind::Ray4d,
        name: "ray4d",
        summary: "canonical rays in an axisymmetric medium, evolution along z",
        state: "q1 q2 p1 p2",
        required: &[],
        optional: &[("medium", "\"fiber\""), ("lam", "0.9"), ("mu", "1"), ("nu", "0.1"), ("n2", "1")],
        invariants: &["H", "p_phi", "S2"],
    },
    SystemSpec {
        kind: SystemKind::RayReduced,
        name: "ray_reduced",
        summary: "rays reduced to the invariants X = |q|^2, Y = |p|^2, Z = q.p",
        state: "X Y Z",
        required: &[],
        optional: &[("medium", "\"fiber\""), ("lam", "0.9"), ("mu", "1"), ("nu", "0.1"), ("n2", "1")],
        invariants: &["h", "S2"],
    },
    SystemSpec {
        kind: SystemKind::Geodesic,
        name: "geodesic",
        summary: "geodesic flow of a Riemannian metric",
        state: "q1..qk, then v1..vk",
        required: &["metric"],
        optional: &[("dim", "2 (euclidean only)")],
        invariants: &["kinetic_energy"],
    },
    SystemSpec {
        kind: SystemKind::Lorentz,
        name: "lorentz",
        summary: "charged particle in a uniform magnetic field",
        state: "q1 q2 q3 v1 v2 v3",
        required: &["b"],
        optional: &[("mass", "1"), ("e_over_c", "1")],
        invariants: &["kinetic_energy"],
    },
    SystemSpec {
        kind: SystemKind::KkCharged,
        name: "kk_charged",
        summary: "charged particle as geodesic motion with a cyclic Kaluza-Klein angle",
        state: "q1 q2 q3 v1 v2 v3 (p and the charge follow from A and e/c)",
        required: &["b"],
        optional: &[("mass", "1"), ("e_over_c", "1")],
        invariants: &["H_KK", "pi"],
    },
    SystemSpec {
        kind: SystemKind::FreeEllipsoid,
        name: "free_ellipsoid",
        summary: "free motion on GL(n), Q(t) = Q0 + t V0",
        state: "Q0 (n x n), then V0 (n x n), row-major",
        required: &["n"],
        optional: &[],
        invariants: &["kinetic_energy", "K_L[<i>,<j>]", "K_R[<i>,<j>]"],
    },
];

/// Text for `geomech list`.
pub fn list_systems() -> String {
    let mut out = String::new();
    for spec in &REGISTRY {
        let optional: Vec<String> = spec.optional.iter().map(|(k, v)| format!("{k} = {v}")).collect();
        let _ = writeln!(out, "{}  -  {}", spec.name, spec.summary);
        let _ = writeln!(out, "    state:       {}", spec.state);
        let _ = writeln!(out, "    required:    {}", join_or_dash(spec.required.iter().copied()));
        let _ = writeln!(out, "    optional:    {}", join_or_dash(optional.iter().map(String::as_str)));
        let _ = writeln!(out, "    invariants:  {}", spec.invariants.join(", "));
    }
    out
}

fn join_or_dash<'a>(items: impl Iterator<Item = &'a str>) -> String {
    let v: Vec<&str> = items.collect();
    if v.is_empty() {
        "-".into()
    } else {
        v.join(", ")
    }
}
