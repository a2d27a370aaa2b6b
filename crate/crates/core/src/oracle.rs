//! Brute-force references for checking the optimizer: an exhaustive
//! precoder grid for two antennas, random feasible-point sampling and the
//! closed-form common-rate split with a linear-programming cross-check.
//!
//! Everything here evaluates rates from the channel gains directly and
//! never calls the convex subproblem solver.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;

use crate::ao::DesignPoint;
use crate::error::{check_theta, invalid, CrsError, Result};
use crate::kernel::{inner, relay_link_rate, CommonRateSplit, PrecoderSet, RateReport};
use crate::scenario::Scenario;
use crate::subproblem::StreamMask;

/// Largest number of grid points the oracle will enumerate.
pub const MAX_GRID_POINTS: u64 = 100_000_000;

#[derive(Debug, Clone)]
pub struct GridOracleSpec {
    pub scenario: Scenario,
    pub theta: f64,
    pub u: [f64; 2],
    pub phase_steps: usize,
    pub magnitude_steps: usize,
    /// The total power is split among the three precoders in multiples of
    /// `p_t / power_levels`.
    pub power_levels: usize,
}

impl GridOracleSpec {
    pub fn new(scenario: Scenario, theta: f64, u: [f64; 2]) -> Self {
        Self {
            scenario,
            theta,
            u,
            phase_steps: 16,
            magnitude_steps: 8,
            power_levels: 4,
        }
    }

    fn directions(&self) -> u64 {
        (self.phase_steps * self.magnitude_steps) as u64
    }

    fn power_splits(&self) -> u64 {
        let l = self.power_levels as u64;
        (l + 1) * (l + 2) / 2
    }

    /// Number of (precoder triple, power split) candidates.
    pub fn grid_size(&self) -> u64 {
        self.directions()
            .saturating_pow(3)
            .saturating_mul(self.power_splits())
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        check_theta(self.theta)?;
        if self.scenario.n_t != 2 {
            return Err(invalid("the grid oracle supports n_t = 2 only"));
        }
        if !self.u.iter().all(|u| u.is_finite() && *u >= 0.0) {
            return Err(invalid("user weights must be finite and non-negative"));
        }
        if self.phase_steps == 0 || self.magnitude_steps < 2 || self.power_levels == 0 {
            return Err(invalid(
                "grid needs a phase step, two magnitude steps and a power level",
            ));
        }
        if self.grid_size() > MAX_GRID_POINTS {
            return Err(invalid(format!(
                "grid of {} points exceeds the limit of {MAX_GRID_POINTS}",
                self.grid_size()
            )));
        }
        Ok(())
    }

    /// Unit directions `(cos b, sin b e^{j phi})` with `b` on a uniform grid
    /// of `[0, pi/2]` and `phi` on a uniform grid of `[0, 2 pi)`.
    fn direction_grid(&self) -> Vec<[Complex64; 2]> {
        let mut out = Vec::with_capacity(self.directions() as usize);
        for i in 0..self.magnitude_steps {
            let b = 0.5 * PI * i as f64 / (self.magnitude_steps - 1) as f64;
            for j in 0..self.phase_steps {
                let phi = 2.0 * PI * j as f64 / self.phase_steps as f64;
                out.push([
                    Complex64::new(b.cos(), 0.0),
                    Complex64::from_polar(b.sin(), phi),
                ]);
            }
        }
        out
    }

    fn power_grid(&self) -> Vec<[f64; 3]> {
        let l = self.power_levels;
        let step = self.scenario.p_t / l as f64;
        let mut out = Vec::new();
        for a in 0..=l {
            for b in 0..=(l - a) {
                out.push([a as f64 * step, b as f64 * step, (l - a - b) as f64 * step]);
            }
        }
        out
    }
}

/// Maximizes `u . c` over `c_1 + c_2 <= R_c`, `c >= 0` and the QoS floors
/// `c_k >= R_k^tar - R_p,k`: mandatory shares first, the remainder to the
/// larger-weight user, ties to user 1. `None` when the floors exceed `R_c`.
pub fn optimal_common_split(
    rates: &RateReport,
    u: [f64; 2],
    r_tar: [f64; 2],
) -> Option<CommonRateSplit> {
    let floor = [
        (r_tar[0] - rates.r_p[0]).max(0.0),
        (r_tar[1] - rates.r_p[1]).max(0.0),
    ];
    let r_c = rates.r_c.max(0.0);
    let remainder = r_c - floor[0] - floor[1];
    if remainder < 0.0 {
        return None;
    }
    let mut c = floor;
    if u[0].max(u[1]) > 0.0 {
        let k = if u[1] > u[0] { 1 } else { 0 };
        c[k] += remainder;
    }
    Some(CommonRateSplit { c })
}

/// Optimal value of the same linear program by enumerating the vertices of
/// its feasible polygon.
pub fn common_split_lp_value(rates: &RateReport, u: [f64; 2], r_tar: [f64; 2]) -> Option<f64> {
    let lo = [
        (r_tar[0] - rates.r_p[0]).max(0.0),
        (r_tar[1] - rates.r_p[1]).max(0.0),
    ];
    let r_c = rates.r_c.max(0.0);
    // lines: c1 = lo1, c2 = lo2, c1 + c2 = r_c
    let candidates = [[lo[0], lo[1]], [lo[0], r_c - lo[0]], [r_c - lo[1], lo[1]]];
    candidates
        .iter()
        .filter(|c| c[0] >= lo[0] - 1e-12 && c[1] >= lo[1] - 1e-12 && c[0] + c[1] <= r_c + 1e-12)
        .map(|c| u[0] * c[0] + u[1] * c[1])
        .fold(None, |best: Option<f64>, v| {
            Some(best.map_or(v, |b| b.max(v)))
        })
}

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// Rates from the received powers `a[k][i] = |h_k^H p_i|^2` with `i` over
/// (common, private 1, private 2).
fn rates_from_gains(a: &[[f64; 3]; 2], sigma_sq: [f64; 2], theta: f64, r_relay: f64) -> RateReport {
    let t = [
        a[0][1] + a[0][2] + sigma_sq[0],
        a[1][1] + a[1][2] + sigma_sq[1],
    ];
    let gamma_c = [a[0][0] / t[0], a[1][0] / t[1]];
    let gamma_p = [
        a[0][1] / (a[0][2] + sigma_sq[0]),
        a[1][2] / (a[1][1] + sigma_sq[1]),
    ];
    let r_c =
        (theta * log2_1p(gamma_c[0])).min(theta * log2_1p(gamma_c[1]) + (1.0 - theta) * r_relay);
    RateReport {
        gamma_c,
        gamma_p,
        gamma_relay: 0.0,
        r_c,
        r_p: [theta * log2_1p(gamma_p[0]), theta * log2_1p(gamma_p[1])],
        r_relay_link: r_relay,
    }
}

fn wsr_of(rates: &RateReport, u: [f64; 2], r_tar: [f64; 2]) -> Option<f64> {
    let c = optimal_common_split(rates, u, r_tar)?;
    Some(u[0] * (rates.r_p[0] + c.c[0]) + u[1] * (rates.r_p[1] + c.c[1]))
}

/// Best weighted sum rate over the precoder grid with all power used, and
/// the design point attaining it. Fails with `Infeasible` when no grid
/// point meets the QoS targets.
pub fn grid_search_wsr(spec: &GridOracleSpec) -> Result<(f64, DesignPoint)> {
    spec.validate()?;
    let s = &spec.scenario;
    let dirs = spec.direction_grid();
    let powers = spec.power_grid();
    let r_relay = relay_link_rate(s);
    // gains[d][k] = |h_k^H d|^2
    let gains: Vec<[f64; 2]> = dirs
        .iter()
        .map(|d| [inner(&s.h1, d).norm_sqr(), inner(&s.h2, d).norm_sqr()])
        .collect();
    let n = dirs.len();
    let best = (0..n)
        .into_par_iter()
        .map(|ic| {
            let mut best: Option<(f64, [usize; 3], usize)> = None;
            for i1 in 0..n {
                for i2 in 0..n {
                    for (ip, q) in powers.iter().enumerate() {
                        let a = [
                            [
                                q[0] * gains[ic][0],
                                q[1] * gains[i1][0],
                                q[2] * gains[i2][0],
                            ],
                            [
                                q[0] * gains[ic][1],
                                q[1] * gains[i1][1],
                                q[2] * gains[i2][1],
                            ],
                        ];
                        let rates = rates_from_gains(&a, s.sigma_sq, spec.theta, r_relay);
                        if let Some(v) = wsr_of(&rates, spec.u, s.r_tar) {
                            if best.is_none_or(|b| v > b.0) {
                                best = Some((v, [ic, i1, i2], ip));
                            }
                        }
                    }
                }
            }
            best
        })
        .reduce(
            || None,
            |a, b| match (a, b) {
                (Some(x), Some(y)) => Some(if y.0 > x.0 { y } else { x }),
                (x, y) => x.or(y),
            },
        );
    let Some((value, idx, ip)) = best else {
        return Err(CrsError::Infeasible(
            "no grid point meets the QoS targets".into(),
        ));
    };
    let q = powers[ip];
    let build = |i: usize, power: f64| dirs[idx[i]].iter().map(|z| z * power.sqrt()).collect();
    let p = PrecoderSet {
        common: build(0, q[0]),
        private: [build(1, q[1]), build(2, q[2])],
    };
    let point = DesignPoint::evaluate(s, spec.u, spec.theta, p, &StreamMask::FULL)?
        .ok_or_else(|| CrsError::Infeasible("oracle point fails the QoS targets".into()))?;
    Ok((value, point))
}

/// Best weighted sum rate over `samples` random full-power precoder
/// triples (isotropic directions, uniform power split on the simplex).
pub fn random_search_wsr(
    s: &Scenario,
    u: [f64; 2],
    theta: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    s.validate()?;
    check_theta(theta)?;
    let r_relay = relay_link_rate(s);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<f64> = None;
    let mut dir = vec![Complex64::new(0.0, 0.0); s.n_t];
    for _ in 0..samples {
        let e: [f64; 3] = [rng.sample(Exp1), rng.sample(Exp1), rng.sample(Exp1)];
        let total: f64 = e.iter().sum();
        let mut a = [[0.0; 3]; 2];
        for (i, ei) in e.iter().enumerate() {
            for z in dir.iter_mut() {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *z = Complex64::new(re, im);
            }
            let len_sq: f64 = dir.iter().map(|z| z.norm_sqr()).sum();
            let q = s.p_t * ei / total / len_sq;
            a[0][i] = q * inner(&s.h1, &dir).norm_sqr();
            a[1][i] = q * inner(&s.h2, &dir).norm_sqr();
        }
        let rates = rates_from_gains(&a, s.sigma_sq, theta, r_relay);
        if let Some(v) = wsr_of(&rates, u, s.r_tar) {
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
    }
    best.ok_or_else(|| CrsError::Infeasible("no sample meets the QoS targets".into()))
}
