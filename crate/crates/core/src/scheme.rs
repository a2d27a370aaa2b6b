//! The seven transmission schemes as restrictions of one optimization:
//! which streams carry power, which users may own common-rate shares, and
//! how the time split is chosen.

use std::fmt;
use std::str::FromStr;

use crate::ao::{theta_search_masked, AoOptions, DesignPoint};
use crate::error::{invalid, CrsError, Result};
use crate::kernel::SplitMask;
use crate::scenario::Scenario;
use crate::subproblem::StreamMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    /// Cooperative rate-splitting with a searched time split.
    Crs,
    /// Rate-splitting without cooperation.
    Nrs,
    /// Cooperative rate-splitting with equal time slots.
    Ers,
    /// Cooperative NOMA: `W_2` entirely on the common stream.
    CNoma,
    /// NOMA without cooperation.
    NNoma,
    /// Linear precoding of private streams only.
    MuLp,
    /// Decode-and-forward of a single common stream carrying `W_2`.
    Odf,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 7] = [
        SchemeKind::Crs,
        SchemeKind::Nrs,
        SchemeKind::Ers,
        SchemeKind::CNoma,
        SchemeKind::NNoma,
        SchemeKind::MuLp,
        SchemeKind::Odf,
    ];

    /// Order in which solutions can seed the schemes containing them.
    pub const SOLVE_ORDER: [SchemeKind; 7] = [
        SchemeKind::MuLp,
        SchemeKind::NNoma,
        SchemeKind::Odf,
        SchemeKind::Nrs,
        SchemeKind::Ers,
        SchemeKind::CNoma,
        SchemeKind::Crs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Crs => "crs",
            SchemeKind::Nrs => "nrs",
            SchemeKind::Ers => "ers",
            SchemeKind::CNoma => "c-noma",
            SchemeKind::NNoma => "n-noma",
            SchemeKind::MuLp => "mu-lp",
            SchemeKind::Odf => "odf",
        }
    }

    /// Schemes whose feasible sets are contained in this one's; their
    /// solutions are used as seeds.
    pub fn nested(self) -> &'static [SchemeKind] {
        match self {
            SchemeKind::Crs => &[
                SchemeKind::Nrs,
                SchemeKind::Ers,
                SchemeKind::CNoma,
                SchemeKind::Odf,
                SchemeKind::NNoma,
                SchemeKind::MuLp,
            ],
            SchemeKind::Nrs => &[SchemeKind::MuLp, SchemeKind::NNoma],
            SchemeKind::CNoma => &[SchemeKind::Odf, SchemeKind::NNoma],
            SchemeKind::Ers | SchemeKind::NNoma | SchemeKind::MuLp | SchemeKind::Odf => &[],
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = CrsError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| invalid(format!("unknown scheme `{}`", s.trim())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaPolicy {
    Fixed(f64),
    Searched,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeSpec {
    pub kind: SchemeKind,
    pub use_pc: bool,
    pub use_p1: bool,
    pub use_p2: bool,
    /// `W_2` is carried entirely by the common stream.
    pub w2_fully_common: bool,
    pub theta_policy: ThetaPolicy,
}

impl SchemeSpec {
    pub fn of(kind: SchemeKind) -> Self {
        let full = |theta_policy| SchemeSpec {
            kind,
            use_pc: true,
            use_p1: true,
            use_p2: true,
            w2_fully_common: false,
            theta_policy,
        };
        match kind {
            SchemeKind::Crs => full(ThetaPolicy::Searched),
            SchemeKind::Nrs => full(ThetaPolicy::Fixed(1.0)),
            SchemeKind::Ers => full(ThetaPolicy::Fixed(0.5)),
            SchemeKind::CNoma | SchemeKind::NNoma => SchemeSpec {
                kind,
                use_pc: true,
                use_p1: true,
                use_p2: false,
                w2_fully_common: true,
                theta_policy: if kind == SchemeKind::CNoma {
                    ThetaPolicy::Searched
                } else {
                    ThetaPolicy::Fixed(1.0)
                },
            },
            SchemeKind::MuLp => SchemeSpec {
                kind,
                use_pc: false,
                use_p1: true,
                use_p2: true,
                w2_fully_common: false,
                theta_policy: ThetaPolicy::Fixed(1.0),
            },
            SchemeKind::Odf => SchemeSpec {
                kind,
                use_pc: true,
                use_p1: false,
                use_p2: false,
                w2_fully_common: true,
                theta_policy: ThetaPolicy::Searched,
            },
        }
    }
}

/// Restrictions a scheme places on the alternating optimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConstraints {
    pub mask: StreamMask,
    pub theta: ThetaPolicy,
}

pub fn scheme_constraints(spec: &SchemeSpec) -> Result<SchemeConstraints> {
    let bad = |msg: &str| {
        Err(CrsError::InconsistentScheme(format!(
            "{}: {msg}",
            spec.kind
        )))
    };
    if !spec.use_pc && spec.w2_fully_common {
        return bad("W_2 on the common stream requires the common stream");
    }
    if spec.w2_fully_common && spec.use_p2 {
        return bad("W_2 on the common stream leaves no message for p_2");
    }
    if !spec.use_pc && !spec.use_p1 && !spec.use_p2 {
        return bad("no active stream");
    }
    if let ThetaPolicy::Fixed(t) = spec.theta_policy {
        if !(t.is_finite() && t > 0.0 && t <= 1.0) {
            return bad("fixed theta outside (0, 1]");
        }
    }
    let split = if !spec.use_pc {
        SplitMask {
            allowed: [false, false],
        }
    } else if spec.w2_fully_common {
        SplitMask {
            allowed: [false, true],
        }
    } else {
        SplitMask::BOTH
    };
    Ok(SchemeConstraints {
        mask: StreamMask {
            common: spec.use_pc,
            private: [spec.use_p1, spec.use_p2],
            split,
        },
        theta: spec.theta_policy,
    })
}

/// Solves one scheme at weights `u`. Searched time splits use `grid`;
/// `seeds` are solutions of nested schemes to refine.
pub fn solve_scheme(
    s: &Scenario,
    u: [f64; 2],
    spec: &SchemeSpec,
    grid: &[f64],
    opts: &AoOptions,
    seeds: &[DesignPoint],
) -> Result<DesignPoint> {
    let constraints = scheme_constraints(spec)?;
    let fixed;
    let grid = match constraints.theta {
        ThetaPolicy::Fixed(t) => {
            fixed = [t];
            &fixed[..]
        }
        ThetaPolicy::Searched => grid,
    };
    theta_search_masked(s, u, constraints.mask, grid, opts, seeds)
}

/// Per-scheme outcome at one weight vector.
pub type SchemeResult = (SchemeKind, Result<DesignPoint>);

/// Solves `kinds` at weights `u` in nesting order, seeding every scheme
/// with the solutions of the schemes it contains plus `extra_seeds`.
/// Results are returned in the order of `kinds`.
pub fn solve_schemes(
    s: &Scenario,
    u: [f64; 2],
    kinds: &[SchemeKind],
    grid: &[f64],
    opts: &AoOptions,
    extra_seeds: &dyn Fn(SchemeKind) -> Vec<DesignPoint>,
) -> Vec<SchemeResult> {
    let mut solved: Vec<(SchemeKind, Result<DesignPoint>)> = Vec::new();
    for kind in SchemeKind::SOLVE_ORDER {
        if !kinds.contains(&kind) {
            continue;
        }
        let mut seeds: Vec<DesignPoint> = solved
            .iter()
            .filter(|(k, _)| kind.nested().contains(k))
            .filter_map(|(_, r)| r.as_ref().ok().cloned())
            .collect();
        seeds.extend(extra_seeds(kind));
        let result = solve_scheme(s, u, &SchemeSpec::of(kind), grid, opts, &seeds);
        solved.push((kind, result));
    }
    kinds
        .iter()
        .map(|k| {
            let i = solved
                .iter()
                .position(|(j, _)| j == k)
                .expect("every requested scheme is solved");
            let (kind, result) = &solved[i];
            let result = match result {
                Ok(d) => Ok(d.clone()),
                Err(e) => Err(CrsError::Infeasible(e.to_string())),
            };
            (*kind, result)
        })
        .collect()
}
