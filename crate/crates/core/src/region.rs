//! Rate regions traced by sweeping the weight of user 2, their Pareto
//! frontiers and time-sharing closures, and comparisons between regions.
//!
//! A region CSV starts with a `# scenario=<fingerprint>` line followed by
//! the header `scheme,u2,theta,R1_tot,R2_tot,wsr,status` and one row per
//! sweep point. Rates of infeasible points are left empty.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use rayon::prelude::*;

use crate::ao::{AoOptions, DesignPoint};
use crate::error::{invalid, CrsError, Result};
use crate::scenario::Scenario;
use crate::scheme::{solve_schemes, SchemeKind};

pub const CSV_HEADER: [&str; 7] = ["scheme", "u2", "theta", "R1_tot", "R2_tot", "wsr", "status"];

/// Tolerance for the weight-monotonicity check of a sweep.
const MONOTONE_TOL: f64 = 1e-4;

/// Smallest weighted-sum-rate gain that triggers a polishing solve.
const WSR_IMPROVEMENT_TOL: f64 = 1e-9;

/// `{1e-3} ∪ {10^x : x = -1, -0.95, ..., 1} ∪ {1e3}`.
pub fn default_u2_weights() -> Vec<f64> {
    let mut w = vec![1e-3];
    w.extend((0..=40).map(|i| 10f64.powf(-1.0 + 0.05 * i as f64)));
    w.push(1e3);
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointStatus {
    Ok,
    /// Solved, but the alternating optimization hit its iteration cap.
    MaxIter,
    Infeasible,
}

impl PointStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PointStatus::Ok => "ok",
            PointStatus::MaxIter => "max_iter",
            PointStatus::Infeasible => "infeasible",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "ok" => Some(PointStatus::Ok),
            "max_iter" => Some(PointStatus::MaxIter),
            "infeasible" => Some(PointStatus::Infeasible),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionPoint {
    pub u2: f64,
    pub theta: f64,
    pub r_tot: [f64; 2],
    pub wsr: f64,
    pub status: PointStatus,
}

impl RegionPoint {
    pub fn infeasible(u2: f64) -> Self {
        Self {
            u2,
            theta: f64::NAN,
            r_tot: [f64::NAN; 2],
            wsr: f64::NAN,
            status: PointStatus::Infeasible,
        }
    }

    pub fn from_design(u2: f64, d: &DesignPoint) -> Self {
        Self {
            u2,
            theta: d.theta,
            r_tot: d.r_tot,
            wsr: d.wsr,
            status: if d.diagnostics.converged {
                PointStatus::Ok
            } else {
                PointStatus::MaxIter
            },
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.status != PointStatus::Infeasible
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRegion {
    pub scheme: String,
    pub scenario: String,
    pub points: Vec<RegionPoint>,
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull in counter-clockwise order without collinear points.
fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

impl RateRegion {
    pub fn feasible(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.points
            .iter()
            .filter(|p| p.is_feasible())
            .map(|p| [p.r_tot[0].max(0.0), p.r_tot[1].max(0.0)])
    }

    /// Pareto-maximal rate pairs, sorted by increasing `R1_tot`.
    pub fn frontier(&self) -> Vec<[f64; 2]> {
        let mut pts: Vec<[f64; 2]> = self.feasible().collect();
        pts.sort_by(|a, b| b[0].total_cmp(&a[0]).then(b[1].total_cmp(&a[1])));
        pts.dedup();
        // scanning by decreasing R1, keep points that raise the best R2
        let mut out: Vec<[f64; 2]> = Vec::new();
        let mut best_r2 = f64::NEG_INFINITY;
        for p in pts {
            if p[1] > best_r2 {
                best_r2 = p[1];
                out.push(p);
            }
        }
        out.reverse();
        out
    }

    /// Vertices of the time-sharing closure: the convex hull of the points,
    /// their projections onto both axes and the origin.
    pub fn hull(&self) -> Vec<[f64; 2]> {
        let mut pts = vec![[0.0, 0.0]];
        for p in self.feasible() {
            pts.push(p);
            pts.push([p[0], 0.0]);
            pts.push([0.0, p[1]]);
        }
        convex_hull(pts)
    }

    /// Whether the time-sharing closure contains the rate pair `q`.
    pub fn closure_contains(&self, q: [f64; 2]) -> bool {
        let hull = self.hull();
        contains(&hull, q)
    }

    /// Every frontier point of `other`, lowered by `tol` per coordinate, lies
    /// in the time-sharing closure of this region.
    pub fn dominates(&self, other: &RateRegion, tol: f64) -> bool {
        let hull = self.hull();
        other
            .frontier()
            .into_iter()
            .all(|q| contains(&hull, [(q[0] - tol).max(0.0), (q[1] - tol).max(0.0)]))
    }

    /// Area of the time-sharing closure.
    pub fn hypervolume(&self) -> f64 {
        let hull = self.hull();
        if hull.len() < 3 {
            return 0.0;
        }
        let n = hull.len();
        0.5 * (0..n)
            .map(|i| {
                let a = hull[i];
                let b = hull[(i + 1) % n];
                a[0] * b[1] - a[1] * b[0]
            })
            .sum::<f64>()
            .abs()
    }

    /// Indices of consecutive sweep points (sorted by `u2`) whose `R2_tot`
    /// drops by more than the tolerance as `u2` grows.
    pub fn weight_monotonicity_violations(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.points.len())
            .filter(|&i| self.points[i].is_feasible())
            .collect();
        idx.sort_by(|&a, &b| self.points[a].u2.total_cmp(&self.points[b].u2));
        idx.windows(2)
            .filter(|w| self.points[w[1]].r_tot[1] < self.points[w[0]].r_tot[1] - MONOTONE_TOL)
            .map(|w| w[1])
            .collect()
    }

    pub fn infeasible_count(&self) -> usize {
        self.points.iter().filter(|p| !p.is_feasible()).count()
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut out = out;
        writeln!(out, "# scenario={}", self.scenario)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        let num = |v: f64| {
            if v.is_finite() {
                format!("{v:?}")
            } else {
                String::new()
            }
        };
        for p in &self.points {
            w.write_record([
                self.scheme.clone(),
                format!("{:?}", p.u2),
                num(p.theta),
                num(p.r_tot[0]),
                num(p.r_tot[1]),
                num(p.wsr),
                p.status.as_str().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_hull_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scheme", "R1_tot", "R2_tot"])?;
        for v in self.hull() {
            w.write_record([
                self.scheme.clone(),
                format!("{:?}", v[0]),
                format!("{:?}", v[1]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(input: impl Read) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let scenario = first
            .trim_end()
            .strip_prefix("# scenario=")
            .filter(|f| !f.is_empty() && f.chars().all(|c| c.is_ascii_alphanumeric()))
            .ok_or_else(|| CrsError::Parse {
                line: 1,
                msg: "expected `# scenario=<fingerprint>`".into(),
            })?
            .to_string();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'#'))
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(CrsError::Parse {
                line: 2,
                msg: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
            });
        }
        let mut scheme: Option<String> = None;
        let mut points = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 3;
            let rec = rec?;
            let perr = |msg: String| CrsError::Parse { line, msg };
            if rec.len() != CSV_HEADER.len() {
                return Err(perr(format!("expected {} fields", CSV_HEADER.len())));
            }
            match &scheme {
                None => scheme = Some(rec[0].to_string()),
                Some(s) if s != &rec[0] => {
                    return Err(perr(format!("mixed schemes `{s}` and `{}`", &rec[0])))
                }
                _ => {}
            }
            let status = PointStatus::parse(&rec[6])
                .ok_or_else(|| perr(format!("unknown status `{}`", &rec[6])))?;
            let number = |j: usize| -> Result<f64> {
                let v: f64 = rec[j]
                    .parse()
                    .map_err(|_| perr(format!("bad {} `{}`", CSV_HEADER[j], &rec[j])))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(perr(format!("non-finite {}", CSV_HEADER[j])))
                }
            };
            let u2 = number(1)?;
            if u2 < 0.0 {
                return Err(perr("negative u2".into()));
            }
            let point = if status == PointStatus::Infeasible {
                RegionPoint::infeasible(u2)
            } else {
                let theta = number(2)?;
                if !(theta > 0.0 && theta <= 1.0) {
                    return Err(perr(format!("theta {theta} outside (0, 1]")));
                }
                RegionPoint {
                    u2,
                    theta,
                    r_tot: [number(3)?, number(4)?],
                    wsr: number(5)?,
                    status,
                }
            };
            points.push(point);
        }
        Ok(Self {
            scheme: scheme.unwrap_or_default(),
            scenario,
            points,
        })
    }
}

/// Point-in-convex-polygon test with a small absolute slack.
fn contains(hull: &[[f64; 2]], q: [f64; 2]) -> bool {
    const SLACK: f64 = 1e-12;
    match hull.len() {
        0 => false,
        1 => (hull[0][0] - q[0]).abs() <= SLACK && (hull[0][1] - q[1]).abs() <= SLACK,
        2 => {
            let (a, b) = (hull[0], hull[1]);
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            let t = ((q[0] - a[0]) * (b[0] - a[0]) + (q[1] - a[1]) * (b[1] - a[1])) / (len * len);
            cross(a, b, q).abs() <= SLACK * len.max(1.0) && (-SLACK..=1.0 + SLACK).contains(&t)
        }
        n => (0..n).all(|i| {
            let a = hull[i];
            let b = hull[(i + 1) % n];
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            cross(a, b, q) >= -SLACK * len.max(1.0)
        }),
    }
}

/// Sweeps `u2_list` for one scheme at weights `(1, u2)`; each weight is
/// solved independently on the current rayon pool.
pub fn sweep_weights(
    s: &Scenario,
    kind: SchemeKind,
    u2_list: &[f64],
    grid: &[f64],
    opts: &AoOptions,
) -> Result<RateRegion> {
    let mut regions = sweep_schemes(s, &[kind], u2_list, grid, opts)?;
    Ok(regions
        .remove(&kind)
        .expect("requested scheme is swept")
        .region)
}

/// A swept region together with the design points behind it.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub region: RateRegion,
    pub designs: Vec<Option<DesignPoint>>,
}

fn validate_u2(u2_list: &[f64]) -> Result<()> {
    if u2_list.is_empty() {
        return Err(invalid("u2 list is empty"));
    }
    if !u2_list.iter().all(|u| u.is_finite() && *u > 0.0) {
        return Err(invalid("u2 weights must be finite and positive"));
    }
    Ok(())
}

/// Number of passes re-solving sweep points from better points of the
/// same sweep.
const POLISH_PASSES: usize = 3;

/// Re-solves every point for which another point of the same sweep has a
/// larger weighted sum rate, seeded with that point.
fn polish(
    s: &Scenario,
    kind: SchemeKind,
    u2_list: &[f64],
    grid: &[f64],
    opts: &AoOptions,
    mut designs: Vec<Option<DesignPoint>>,
) -> Vec<Option<DesignPoint>> {
    for _ in 0..POLISH_PASSES {
        let updates: Vec<(usize, DesignPoint)> = u2_list
            .par_iter()
            .enumerate()
            .filter_map(|(i, &u2)| {
                let u = [1.0, u2];
                let current = designs[i].as_ref().map_or(f64::NEG_INFINITY, |d| d.wsr);
                let seed = designs
                    .iter()
                    .flatten()
                    .max_by(|a, b| a.wsr_for(u).total_cmp(&b.wsr_for(u)))
                    .filter(|d| d.wsr_for(u) > current + WSR_IMPROVEMENT_TOL)?;
                let mut out = solve_schemes(s, u, &[kind], grid, opts, &|_| vec![seed.clone()]);
                let d = out.pop().and_then(|(_, r)| r.ok())?;
                (d.wsr > current).then_some((i, d))
            })
            .collect();
        if updates.is_empty() {
            break;
        }
        for (i, d) in updates {
            designs[i] = Some(d);
        }
    }
    designs
}

/// Sweeps several schemes. Schemes are processed in nesting order; at each
/// weight a scheme is seeded with the nested schemes' solutions at that
/// weight and with their best solution for that weight across the sweep.
/// Each sweep is then polished with its own points.
pub fn sweep_schemes(
    s: &Scenario,
    kinds: &[SchemeKind],
    u2_list: &[f64],
    grid: &[f64],
    opts: &AoOptions,
) -> Result<BTreeMap<SchemeKind, SweepResult>> {
    sweep_schemes_with(s, kinds, u2_list, grid, opts, &mut |_, _| Ok(()))
}

/// [`sweep_schemes`] calling `on_scheme` as soon as each scheme finishes.
pub fn sweep_schemes_with(
    s: &Scenario,
    kinds: &[SchemeKind],
    u2_list: &[f64],
    grid: &[f64],
    opts: &AoOptions,
    on_scheme: &mut dyn FnMut(SchemeKind, &SweepResult) -> Result<()>,
) -> Result<BTreeMap<SchemeKind, SweepResult>> {
    validate_u2(u2_list)?;
    s.validate()?;
    let fingerprint = s.fingerprint();
    let mut done: BTreeMap<SchemeKind, SweepResult> = BTreeMap::new();
    for kind in SchemeKind::SOLVE_ORDER {
        if !kinds.contains(&kind) {
            continue;
        }
        let nested: Vec<&SweepResult> = kind.nested().iter().filter_map(|k| done.get(k)).collect();
        let designs: Vec<Option<DesignPoint>> = u2_list
            .par_iter()
            .enumerate()
            .map(|(i, &u2)| {
                let u = [1.0, u2];
                let mut seeds = Vec::new();
                for sweep in &nested {
                    if let Some(d) = &sweep.designs[i] {
                        seeds.push(d.clone());
                    }
                    let best = sweep
                        .designs
                        .iter()
                        .enumerate()
                        .filter_map(|(j, d)| d.as_ref().map(|d| (j, d)))
                        .max_by(|a, b| a.1.wsr_for(u).total_cmp(&b.1.wsr_for(u)));
                    if let Some((j, d)) = best {
                        if j != i {
                            seeds.push(d.clone());
                        }
                    }
                }
                let mut out = solve_schemes(s, u, &[kind], grid, opts, &|_| seeds.clone());
                out.pop().and_then(|(_, r)| r.ok())
            })
            .collect();
        let designs = polish(s, kind, u2_list, grid, opts, designs);
        let points = u2_list
            .iter()
            .zip(&designs)
            .map(|(&u2, d)| match d {
                Some(d) => RegionPoint::from_design(u2, d),
                None => RegionPoint::infeasible(u2),
            })
            .collect();
        let region = RateRegion {
            scheme: kind.name().to_string(),
            scenario: fingerprint.clone(),
            points,
        };
        for i in region.weight_monotonicity_violations() {
            log::warn!(
                "{kind}: R2_tot decreases at u2 = {} (local optimum of the alternating optimization)",
                region.points[i].u2
            );
        }
        if region.infeasible_count() > 0 {
            log::warn!(
                "{kind}: {} infeasible sweep points dropped from the frontier",
                region.infeasible_count()
            );
        }
        let result = SweepResult { region, designs };
        on_scheme(kind, &result)?;
        done.insert(kind, result);
    }
    Ok(done)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region(points: &[[f64; 2]]) -> RateRegion {
        RateRegion {
            scheme: "test".into(),
            scenario: "00".into(),
            points: points
                .iter()
                .enumerate()
                .map(|(i, p)| RegionPoint {
                    u2: i as f64 + 1.0,
                    theta: 1.0,
                    r_tot: *p,
                    wsr: p[0] + (i as f64 + 1.0) * p[1],
                    status: PointStatus::Ok,
                })
                .collect(),
        }
    }

    #[test]
    fn default_weights() {
        let w = default_u2_weights();
        assert_eq!(w.len(), 43);
        assert_eq!(w[0], 1e-3);
        assert_eq!(w[42], 1e3);
        assert!((w[1] - 0.1).abs() < 1e-15 && (w[41] - 10.0).abs() < 1e-12);
        assert!(w.windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn hypervolume_examples() {
        assert!((region(&[[1.0, 1.0]]).hypervolume() - 1.0).abs() < 1e-15);
        assert!((region(&[[2.0, 0.0], [0.0, 2.0]]).hypervolume() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn frontier_is_mutually_non_dominated() {
        let r = region(&[
            [3.0, 0.5],
            [2.0, 2.0],
            [1.0, 1.0],
            [2.0, 1.5],
            [0.5, 3.0],
            [3.0, 0.2],
        ]);
        let f = r.frontier();
        assert_eq!(f, vec![[0.5, 3.0], [2.0, 2.0], [3.0, 0.5]]);
        for a in &f {
            for b in &f {
                assert!(a == b || !(a[0] >= b[0] && a[1] >= b[1]));
            }
        }
    }

    #[test]
    fn dominance_examples() {
        let a = region(&[[3.0, 0.0], [2.5, 1.5], [1.0, 2.5], [0.0, 3.0]]);
        assert!(a.dominates(&a, 0.0));
        let shrunk = region(&[[2.7, 0.0], [2.25, 1.35], [0.9, 2.25], [0.0, 2.7]]);
        assert!(a.dominates(&shrunk, 0.0));
        assert!(!shrunk.dominates(&a, 0.0));
        assert!(shrunk.dominates(&a, 0.31));
    }

    #[test]
    fn hull_contains_all_points() {
        let r = region(&[[3.0, 0.5], [2.0, 2.0], [1.0, 1.0], [0.5, 3.0]]);
        for p in r.feasible() {
            assert!(r.closure_contains(p));
        }
        assert!(r.closure_contains([2.5, 1.25]));
        assert!(!r.closure_contains([2.5, 2.0]));
    }

    #[test]
    fn csv_round_trip() {
        let mut r = region(&[[3.0, 0.5], [2.0, 2.0]]);
        r.points.push(RegionPoint::infeasible(7.0));
        r.scenario = "0123abcd".into();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# scenario=0123abcd\nscheme,u2,theta,R1_tot,R2_tot,wsr,status\n"));
        let back = RateRegion::read_csv(&buf[..]).unwrap();
        assert_eq!(back.scenario, r.scenario);
        assert_eq!(back.scheme, r.scheme);
        assert_eq!(back.points.len(), 3);
        assert_eq!(back.points[..2], r.points[..2]);
        assert_eq!(back.points[2].status, PointStatus::Infeasible);
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(RateRegion::read_csv(&b"scheme,u2\n"[..]).is_err());
        let bad = "# scenario=ab\nscheme,u2,theta,R1_tot,R2_tot,wsr,status\ncrs,1,2,1,1,1,ok\n";
        assert!(RateRegion::read_csv(bad.as_bytes()).is_err());
        let bad = "# scenario=ab\nscheme,u2,theta,R1_tot,R2_tot,wsr,status\ncrs,1,1,1,1,1,maybe\n";
        assert!(RateRegion::read_csv(bad.as_bytes()).is_err());
    }

    #[test]
    fn monotonicity_violations_are_found() {
        let r = region(&[[3.0, 0.5], [2.0, 2.0], [2.5, 1.0]]);
        assert_eq!(r.weight_monotonicity_violations(), vec![2]);
    }

    #[test]
    fn polished_points_beat_other_points_at_their_weight() {
        let s = Scenario::random(2, 7, 10.0).unwrap();
        let u2_list = [0.3, 1.0, 3.0];
        let grid = [1.0];
        let opts = AoOptions::default();
        let mut sweep = sweep_schemes(&s, &[SchemeKind::Nrs], &u2_list, &grid, &opts).unwrap();
        let mut designs = sweep.remove(&SchemeKind::Nrs).unwrap().designs;
        designs[1] = None;
        let designs = polish(&s, SchemeKind::Nrs, &u2_list, &grid, &opts, designs);
        for (i, &u2) in u2_list.iter().enumerate() {
            let d = designs[i].as_ref().expect("filled from a neighbour");
            for other in designs.iter().flatten() {
                assert!(d.wsr >= other.wsr_for([1.0, u2]) - 1e-9);
            }
        }
    }
}
