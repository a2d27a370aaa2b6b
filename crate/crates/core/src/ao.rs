//! Alternating optimization of equalizers, weights and precoders for a
//! fixed time split, and the one-dimensional search over the time split.
//!
//! Each iteration fixes the MMSE equalizers and weights of the current
//! precoders and solves the convex subproblem for new precoders. The
//! reported weighted sum rate of an iterate is evaluated from the exact
//! rates with the optimal common-rate split, so the sequence is a
//! block-coordinate ascent on the true objective.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{check_theta, invalid, CrsError, Result};
use crate::kernel::{
    rate_report, relay_link_rate, split_common_rate, CommonRateSplit, Equalizers, MseWeights,
    PrecoderSet, RateReport,
};
use crate::scenario::{norm_sq, Scenario, User};
use crate::subproblem::{SolveStatus, StreamMask, SubproblemSpec};

/// Tolerance used when comparing weighted sum rates.
pub const WSR_TIE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoOptions {
    /// Stop once consecutive weighted sum rates differ by less than this.
    pub eps: f64,
    pub max_iter: usize,
    /// Duality-gap tolerance of every subproblem solve.
    pub tolerance: f64,
}

impl Default for AoOptions {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            max_iter: 200,
            tolerance: 1e-8,
        }
    }
}

impl AoOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(invalid("eps must be positive"));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter must be at least 1"));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(invalid("tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoState {
    pub iteration: usize,
    pub p: PrecoderSet,
    pub c_bar: [f64; 2],
    pub wsr_history: Vec<f64>,
    pub converged: bool,
}

/// Solver diagnostics attached to a design point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    /// KKT residual of the last subproblem solve.
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Self {
            kkt_residual: 0.0,
            iterations: 0,
            converged: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoint {
    pub p: PrecoderSet,
    pub c: CommonRateSplit,
    pub theta: f64,
    pub rates: RateReport,
    pub r_tot: [f64; 2],
    pub wsr: f64,
    pub diagnostics: Diagnostics,
}

impl DesignPoint {
    /// Evaluates precoders with the optimal common-rate split. `None` when
    /// the QoS targets cannot be met by these precoders.
    pub fn evaluate(
        s: &Scenario,
        u: [f64; 2],
        theta: f64,
        p: PrecoderSet,
        mask: &StreamMask,
    ) -> Result<Option<Self>> {
        let rates = rate_report(s, &p, theta)?;
        let Some(c) = split_common_rate(&rates, u, s.r_tar, mask.split) else {
            return Ok(None);
        };
        let r_tot = [rates.r_p[0] + c.c[0], rates.r_p[1] + c.c[1]];
        Ok(Some(Self {
            p,
            c,
            theta,
            rates,
            r_tot,
            wsr: u[0] * r_tot[0] + u[1] * r_tot[1],
            diagnostics: Diagnostics::default(),
        }))
    }

    /// Largest violation of the power, common-rate, share-sign and QoS
    /// constraints (zero when all hold).
    pub fn constraint_residual(&self, s: &Scenario) -> f64 {
        let power = self.p.power() - s.p_t;
        let budget = self.c.total() - self.rates.r_c.max(0.0);
        let sign = self
            .c
            .c
            .iter()
            .map(|c| -c)
            .fold(f64::NEG_INFINITY, f64::max);
        let qos = (0..2)
            .map(|k| s.r_tar[k] - self.r_tot[k])
            .fold(f64::NEG_INFINITY, f64::max);
        power.max(budget).max(sign).max(qos).max(0.0)
    }

    /// Weighted sum rate of this point under other weights.
    pub fn wsr_for(&self, u: [f64; 2]) -> f64 {
        u[0] * self.r_tot[0] + u[1] * self.r_tot[1]
    }
}

/// One row of the per-iteration trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub wsr: f64,
    pub kkt_residual: f64,
    pub constraint_residual: f64,
    pub accepted: bool,
}

pub fn write_trace_csv(rows: &[TraceRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "iteration",
        "wsr",
        "kkt_residual",
        "constraint_residual",
        "accepted",
    ])?;
    for r in rows {
        w.write_record([
            r.iteration.to_string(),
            format!("{:?}", r.wsr),
            format!("{:e}", r.kkt_residual),
            format!("{:e}", r.constraint_residual),
            r.accepted.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Dominant left singular vector of `[h1 h2]`, first nonzero entry made
/// real-positive. Equal singular values select `h1`'s direction.
fn dominant_direction(h1: &[Complex64], h2: &[Complex64]) -> Vec<Complex64> {
    let n = h1.len();
    let a = norm_sq(h1);
    let d = norm_sq(h2);
    let b: Complex64 = h1.iter().zip(h2).map(|(x, y)| x.conj() * y).sum();
    // Gram matrix [[a, b], [conj b, d]]
    let half_diff = 0.5 * (a - d);
    let root = (half_diff * half_diff + b.norm_sqr()).sqrt();
    let v: [Complex64; 2] = if root <= 1e-14 * (a + d).max(f64::MIN_POSITIVE) {
        [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
    } else {
        let lambda = 0.5 * (a + d) + root;
        // (G - lambda I) v = 0 with v = (b, lambda - a) or (lambda - d, conj b)
        let first = [b, Complex64::new(lambda - a, 0.0)];
        let second = [Complex64::new(lambda - d, 0.0), b.conj()];
        let norm = |v: &[Complex64; 2]| v[0].norm_sqr() + v[1].norm_sqr();
        if norm(&first) >= norm(&second) {
            first
        } else {
            second
        }
    };
    let mut u: Vec<Complex64> = (0..n).map(|m| h1[m] * v[0] + h2[m] * v[1]).collect();
    let len = norm_sq(&u).sqrt();
    if len <= 0.0 || !len.is_finite() {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[0] = Complex64::new(1.0, 0.0);
        return e;
    }
    let scale = 1e-12 * len;
    let phase = u
        .iter()
        .find(|z| z.norm() > scale)
        .map(|z| z.conj() / z.norm())
        .unwrap_or(Complex64::new(1.0, 0.0));
    u.iter_mut().for_each(|z| *z *= phase / len);
    u
}

/// Matched-filter private precoders with a quarter of the power each and a
/// common precoder along the dominant direction of both channels with the
/// rest. Power of inactive or unusable streams is moved to the common
/// stream, or shared by the private streams when the common stream is off.
pub fn initialize_precoders(s: &Scenario, mask: &StreamMask) -> PrecoderSet {
    let mut p = PrecoderSet::zeros(s.n_t);
    let usable = |k: usize| mask.private[k] && norm_sq(s.channel(User::BOTH[k])) > 0.0;
    let private_on = [usable(0), usable(1)];
    let n_private = private_on.iter().filter(|b| **b).count() as f64;
    let (q_c, q_p) = if mask.common {
        let q_p = s.p_t / 4.0;
        (s.p_t - q_p * n_private, q_p)
    } else if n_private > 0.0 {
        (0.0, s.p_t / n_private)
    } else {
        (0.0, 0.0)
    };
    for k in 0..2 {
        if private_on[k] {
            let h = s.channel(User::BOTH[k]);
            let len = norm_sq(h).sqrt();
            p.private[k] = h.iter().map(|z| z * (q_p.sqrt() / len)).collect();
        }
    }
    if mask.common {
        let u = dominant_direction(&s.h1, &s.h2);
        p.common = u.iter().map(|z| z * q_c.sqrt()).collect();
    }
    if !mask.common && n_private == 0.0 {
        // nothing usable: fall back to the first active private stream
        if let Some(k) = (0..2).find(|&k| mask.private[k]) {
            p.private[k][0] = Complex64::new(s.p_t.sqrt(), 0.0);
        }
    }
    p
}

/// A weighted-sum-rate problem at a fixed time split.
#[derive(Debug, Clone, Copy)]
pub struct AoProblem<'a> {
    pub scenario: &'a Scenario,
    pub u: [f64; 2],
    pub theta: f64,
    pub mask: StreamMask,
}

#[derive(Debug, Clone)]
pub struct AoOutcome {
    pub point: DesignPoint,
    pub state: AoState,
    pub trace: Vec<TraceRow>,
}

impl<'a> AoProblem<'a> {
    pub fn new(scenario: &'a Scenario, u: [f64; 2], theta: f64) -> Self {
        Self {
            scenario,
            u,
            theta,
            mask: StreamMask::FULL,
        }
    }

    pub fn with_mask(mut self, mask: StreamMask) -> Self {
        self.mask = mask;
        self
    }

    fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        check_theta(self.theta)?;
        self.mask.validate()?;
        if !self.u.iter().all(|u| u.is_finite() && *u >= 0.0) {
            return Err(invalid("user weights must be finite and non-negative"));
        }
        Ok(())
    }

    /// Runs the alternating optimization from `init` (or the default
    /// initializer). Iterates whose weighted sum rate would decrease are
    /// rejected, which ends the run.
    pub fn solve(&self, opts: &AoOptions, init: Option<&PrecoderSet>) -> Result<AoOutcome> {
        self.validate()?;
        opts.validate()?;
        let s = self.scenario;
        let p0 = match init {
            Some(p) => {
                if p.n_t() != s.n_t || !p.is_finite() {
                    return Err(invalid("initial precoders do not match the scenario"));
                }
                let p = self.mask.project(p);
                let power = p.power();
                if power > s.p_t {
                    p.scaled(Complex64::new((s.p_t / power).sqrt(), 0.0))
                } else {
                    p
                }
            }
            None => initialize_precoders(s, &self.mask),
        };
        let mut current = DesignPoint::evaluate(s, self.u, self.theta, p0.clone(), &self.mask)?;
        let mut p = p0;
        let mut c_bar = current.as_ref().map_or([0.0; 2], |d| d.c.to_c_bar());
        let mut history: Vec<f64> = Vec::new();
        let mut trace = Vec::new();
        let mut previous = 0.0;
        let mut converged = false;
        let mut last_kkt = f64::INFINITY;
        let mut iteration = 0;

        while iteration < opts.max_iter {
            iteration += 1;
            let mut spec = SubproblemSpec::new(
                s,
                self.theta,
                self.u,
                Equalizers::mmse(s, &p),
                MseWeights::mmse(s, &p),
            );
            spec.tolerance = opts.tolerance;
            spec.mask = self.mask;
            spec.warm_start = Some((p.clone(), c_bar));
            let sol = spec.solve()?;
            if sol.status == SolveStatus::Infeasible {
                if current.is_some() {
                    converged = true;
                    iteration -= 1;
                    break;
                }
                return Err(CrsError::Infeasible(format!(
                    "targets {:?} unattainable at theta = {}",
                    s.r_tar, self.theta
                )));
            }
            last_kkt = spec.kkt_residual(&sol);
            let candidate =
                DesignPoint::evaluate(s, self.u, self.theta, sol.p.clone(), &self.mask)?;
            let accept = match (&candidate, &current) {
                (Some(cand), Some(cur)) => cand.wsr >= cur.wsr,
                (Some(_), None) => true,
                (None, _) => false,
            };
            if accept {
                let cand = candidate.expect("accepted candidate exists");
                p = sol.p;
                c_bar = sol.c_bar;
                current = Some(cand);
            }
            let Some(cur) = &current else {
                return Err(CrsError::Infeasible(format!(
                    "no QoS-feasible precoders found at theta = {}",
                    self.theta
                )));
            };
            history.push(cur.wsr);
            trace.push(TraceRow {
                iteration,
                wsr: cur.wsr,
                kkt_residual: last_kkt,
                constraint_residual: cur.constraint_residual(s),
                accepted: accept,
            });
            if !accept || (cur.wsr - previous).abs() < opts.eps {
                converged = true;
                break;
            }
            previous = cur.wsr;
        }

        let Some(mut point) = current else {
            return Err(CrsError::Infeasible(format!(
                "no QoS-feasible precoders found at theta = {}",
                self.theta
            )));
        };
        if !last_kkt.is_finite() {
            last_kkt = 0.0;
        }
        point.diagnostics = Diagnostics {
            kkt_residual: last_kkt,
            iterations: iteration,
            converged,
        };
        let state = AoState {
            iteration,
            p: point.p.clone(),
            c_bar,
            wsr_history: history,
            converged,
        };
        Ok(AoOutcome {
            point,
            state,
            trace,
        })
    }
}

/// Runs the alternating optimization with the default initializer and all
/// streams active.
pub fn ao_solve(
    s: &Scenario,
    u: [f64; 2],
    theta: f64,
    opts: &AoOptions,
    init: Option<&PrecoderSet>,
) -> Result<DesignPoint> {
    Ok(AoProblem::new(s, u, theta).solve(opts, init)?.point)
}

/// The default time-split grid `0.05, 0.10, ..., 1.00`.
pub fn default_theta_grid() -> Vec<f64> {
    (1..=20).map(|i| i as f64 / 20.0).collect()
}

pub fn validate_theta_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("theta grid is empty"));
    }
    for &t in grid {
        check_theta(t)?;
    }
    if !grid.contains(&1.0) {
        return Err(invalid("theta grid must contain 1"));
    }
    Ok(())
}

/// `a` is better than `b`: larger weighted sum rate, ties toward larger theta.
fn better(a: &DesignPoint, b: &DesignPoint) -> bool {
    if a.wsr > b.wsr + WSR_TIE {
        true
    } else if a.wsr < b.wsr - WSR_TIE {
        false
    } else {
        a.theta > b.theta
    }
}

fn keep_better(slot: &mut Option<DesignPoint>, candidate: Option<DesignPoint>) {
    if let Some(c) = candidate {
        match slot {
            Some(cur) if !better(&c, cur) => {}
            _ => *slot = Some(c),
        }
    }
}

/// Solves at one theta, mapping QoS infeasibility to `None`.
fn try_solve(
    s: &Scenario,
    u: [f64; 2],
    theta: f64,
    mask: StreamMask,
    opts: &AoOptions,
    init: Option<&PrecoderSet>,
) -> Result<Option<DesignPoint>> {
    match AoProblem::new(s, u, theta)
        .with_mask(mask)
        .solve(opts, init)
    {
        Ok(out) => Ok(Some(out.point)),
        Err(CrsError::Infeasible(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Time-split search over `grid` with the given stream mask.
///
/// Every grid point is solved from the default initializer, then again in
/// a sequential sweep seeded by the better of its two neighbours. `seeds`
/// are additional solutions (for example of nested schemes) that are
/// refined at their own theta, or at the grid value when the grid has a
/// single point. Without a relay link every rate scales with theta, so only
/// `theta = 1` is searched when the grid contains it.
pub fn theta_search_masked(
    s: &Scenario,
    u: [f64; 2],
    mask: StreamMask,
    grid: &[f64],
    opts: &AoOptions,
    seeds: &[DesignPoint],
) -> Result<DesignPoint> {
    if grid.is_empty() {
        return Err(invalid("theta grid is empty"));
    }
    for &t in grid {
        check_theta(t)?;
    }
    let grid = if relay_link_rate(s) == 0.0 && grid.contains(&1.0) {
        &[1.0][..]
    } else {
        grid
    };
    let mut at: Vec<Option<DesignPoint>> = Vec::with_capacity(grid.len());
    for &theta in grid {
        at.push(try_solve(s, u, theta, mask, opts, None)?);
    }
    if grid.len() > 1 {
        for i in 0..grid.len() {
            let left = i.checked_sub(1).and_then(|j| at[j].as_ref());
            let right = at.get(i + 1).and_then(|d| d.as_ref());
            let seed = match (left, right) {
                (Some(l), Some(r)) => Some(if r.wsr > l.wsr { r } else { l }),
                (l, r) => l.or(r),
            };
            if let Some(seed) = seed.map(|d| d.p.clone()) {
                let refined = try_solve(s, u, grid[i], mask, opts, Some(&seed))?;
                keep_better(&mut at[i], refined);
            }
        }
    }
    let mut best: Option<DesignPoint> = None;
    for d in at.into_iter().flatten() {
        keep_better(&mut best, Some(d));
    }
    for seed in seeds {
        let theta = if grid.len() > 1 { seed.theta } else { grid[0] };
        let refined = try_solve(s, u, theta, mask, opts, Some(&seed.p))?;
        keep_better(&mut best, refined);
    }
    best.ok_or_else(|| {
        CrsError::Infeasible(format!("targets {:?} unattainable at every theta", s.r_tar))
    })
}

/// Time-split search with all streams active.
pub fn theta_search(
    s: &Scenario,
    u: [f64; 2],
    opts: &AoOptions,
    grid: &[f64],
) -> Result<DesignPoint> {
    validate_theta_grid(grid)?;
    theta_search_masked(s, u, StreamMask::FULL, grid, opts, &[])
}
