//! Batch experiments: configuration files, sweep execution, output files
//! and comparison reports.
//!
//! Configuration format (flat `key = value`, see [`crate::kv`]):
//!
//! ```text
//! name = aligned-alpha-pi9
//! scenario = parametric        # parametric | file | random
//! n_t = 4                      # parametric and random
//! lambda1 = 0.3                # parametric
//! lambda2 = 1
//! alpha = pi/9
//! snr_db = 10                  # parametric and random
//! r_tar = 0; 0                 # parametric and random, default 0; 0
//! scenario_file = s.scn        # file, relative to the config file
//! seed = 1                     # random scenario generator seed, default 0
//! schemes = all                # all | list such as crs; nrs; c-noma
//! u2 = default                 # default | list of positive weights
//! theta_grid = default         # default | list in (0, 1] containing 1
//! eps = 1e-5
//! max_iter = 200
//! tolerance = 1e-8
//! dominance_tol = 1e-3
//! out = results/aligned        # relative to the config file
//! ```
//!
//! A run writes `<scheme>.csv` (region rows), `hull/<scheme>.csv`
//! (time-sharing closure vertices), `dominance.csv`, `hypervolume.csv` and
//! `manifest.txt`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use crate::ao::{default_theta_grid, validate_theta_grid, AoOptions};
use crate::error::{invalid, CrsError, Result};
use crate::kv::{format_f64_list, KvDocument};
use crate::region::{default_u2_weights, sweep_schemes_with, RateRegion, SweepResult};
use crate::scenario::{ChannelGeometry, Scenario};
use crate::scheme::SchemeKind;

pub const CONFIG_KEYS: [&str; 18] = [
    "name",
    "scenario",
    "n_t",
    "lambda1",
    "lambda2",
    "alpha",
    "snr_db",
    "r_tar",
    "scenario_file",
    "seed",
    "schemes",
    "u2",
    "theta_grid",
    "eps",
    "max_iter",
    "tolerance",
    "dominance_tol",
    "out",
];

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSource {
    Parametric {
        n_t: usize,
        geometry: ChannelGeometry,
        snr_db: f64,
        r_tar: [f64; 2],
    },
    File(PathBuf),
    Random {
        n_t: usize,
        snr_db: f64,
        r_tar: [f64; 2],
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub source: ScenarioSource,
    pub seed: u64,
    pub schemes: Vec<SchemeKind>,
    pub u2: Vec<f64>,
    pub theta_grid: Vec<f64>,
    pub ao: AoOptions,
    pub dominance_tol: f64,
    pub out: Option<PathBuf>,
}

fn pair(doc: &KvDocument, key: &str, default: [f64; 2]) -> Result<[f64; 2]> {
    match doc.get(key) {
        None => Ok(default),
        Some(e) => match e.as_f64_list()?.as_slice() {
            [a, b] => Ok([*a, *b]),
            _ => Err(e.err("expected two values")),
        },
    }
}

fn require_f64(doc: &KvDocument, key: &str) -> Result<f64> {
    doc.require(key)?.as_f64()
}

impl ExperimentConfig {
    /// Parses a configuration. Relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let doc = KvDocument::parse(text)?;
        doc.check_keys(&CONFIG_KEYS)?;
        let kind = doc
            .get("scenario")
            .map_or("parametric", |e| e.value.as_str());
        let allowed: &[&str] = match kind {
            "parametric" => &["n_t", "lambda1", "lambda2", "alpha", "snr_db", "r_tar"],
            "random" => &["n_t", "snr_db", "r_tar"],
            "file" => &["scenario_file"],
            other => {
                let e = doc.require("scenario")?;
                return Err(e.err(format!("unknown scenario source `{other}`")));
            }
        };
        for key in [
            "n_t",
            "lambda1",
            "lambda2",
            "alpha",
            "snr_db",
            "r_tar",
            "scenario_file",
        ] {
            if let Some(e) = doc.get(key) {
                if !allowed.contains(&key) {
                    return Err(e.err(format!("not used by `scenario = {kind}`")));
                }
            }
        }
        let source = match kind {
            "parametric" => ScenarioSource::Parametric {
                n_t: doc.require("n_t")?.as_usize()?,
                geometry: ChannelGeometry {
                    lambda1: require_f64(&doc, "lambda1")?,
                    lambda2: require_f64(&doc, "lambda2")?,
                    alpha: require_f64(&doc, "alpha")?,
                },
                snr_db: require_f64(&doc, "snr_db")?,
                r_tar: pair(&doc, "r_tar", [0.0, 0.0])?,
            },
            "random" => ScenarioSource::Random {
                n_t: doc.require("n_t")?.as_usize()?,
                snr_db: require_f64(&doc, "snr_db")?,
                r_tar: pair(&doc, "r_tar", [0.0, 0.0])?,
            },
            _ => ScenarioSource::File(base.join(&doc.require("scenario_file")?.value)),
        };
        let schemes = match doc.get("schemes") {
            None => SchemeKind::ALL.to_vec(),
            Some(e) if e.value.trim() == "all" => SchemeKind::ALL.to_vec(),
            Some(e) => {
                let mut out = Vec::new();
                for name in e.as_str_list() {
                    let k: SchemeKind = name
                        .parse()
                        .map_err(|err: CrsError| e.err(err.to_string()))?;
                    if out.contains(&k) {
                        return Err(e.err(format!("scheme `{k}` listed twice")));
                    }
                    out.push(k);
                }
                if out.is_empty() {
                    return Err(e.err("no schemes listed"));
                }
                out
            }
        };
        let u2 = match doc.get("u2") {
            None => default_u2_weights(),
            Some(e) if e.value.trim() == "default" => default_u2_weights(),
            Some(e) => {
                let v = e.as_f64_list()?;
                if v.is_empty() || !v.iter().all(|u| *u > 0.0) {
                    return Err(e.err("weights must be a nonempty list of positive numbers"));
                }
                v
            }
        };
        let theta_grid = match doc.get("theta_grid") {
            None => default_theta_grid(),
            Some(e) if e.value.trim() == "default" => default_theta_grid(),
            Some(e) => {
                let v = e.as_f64_list()?;
                validate_theta_grid(&v).map_err(|err| e.err(err.to_string()))?;
                v
            }
        };
        let mut ao = AoOptions::default();
        if let Some(e) = doc.get("eps") {
            ao.eps = e.as_f64()?;
        }
        if let Some(e) = doc.get("max_iter") {
            ao.max_iter = e.as_usize()?;
        }
        if let Some(e) = doc.get("tolerance") {
            ao.tolerance = e.as_f64()?;
        }
        ao.validate()?;
        let dominance_tol = match doc.get("dominance_tol") {
            None => 1e-3,
            Some(e) => {
                let v = e.as_f64()?;
                if v < 0.0 {
                    return Err(e.err("must be non-negative"));
                }
                v
            }
        };
        let cfg = Self {
            name: doc
                .get("name")
                .map_or_else(|| "experiment".to_string(), |e| e.value.clone()),
            source,
            seed: doc
                .get("seed")
                .map(|e| e.as_u64())
                .transpose()?
                .unwrap_or(0),
            schemes,
            u2,
            theta_grid,
            ao,
            dominance_tol,
            out: doc.get("out").map(|e| base.join(&e.value)),
        };
        if let ScenarioSource::Parametric {
            n_t,
            geometry,
            snr_db,
            r_tar,
        } = &cfg.source
        {
            Scenario::parametric(*n_t, *geometry, *snr_db, *r_tar)?;
        }
        if let ScenarioSource::Random { n_t, snr_db, r_tar } = &cfg.source {
            Scenario::random(*n_t, cfg.seed, *snr_db)?.with_targets(*r_tar)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn scenario(&self) -> Result<Scenario> {
        match &self.source {
            ScenarioSource::Parametric {
                n_t,
                geometry,
                snr_db,
                r_tar,
            } => Scenario::parametric(*n_t, *geometry, *snr_db, *r_tar),
            ScenarioSource::File(path) => Scenario::from_config_str(&fs::read_to_string(path)?),
            ScenarioSource::Random { n_t, snr_db, r_tar } => {
                Scenario::random(*n_t, self.seed, *snr_db)?.with_targets(*r_tar)
            }
        }
    }

    /// Canonical text of every field that affects results: the resolved
    /// scenario, the scheme set, the weights, the grid and the solver
    /// settings. The name and the output directory are excluded.
    pub fn canonical(&self) -> Result<String> {
        let scenario = self.scenario()?;
        let schemes: Vec<&str> = SchemeKind::ALL
            .iter()
            .filter(|k| self.schemes.contains(k))
            .map(|k| k.name())
            .collect();
        Ok(format!(
            "{}schemes = {}\nu2 = {}\ntheta_grid = {}\neps = {:?}\nmax_iter = {}\ntolerance = {:?}\ndominance_tol = {:?}\n",
            scenario.to_config_string(),
            schemes.join("; "),
            format_f64_list(&self.u2),
            format_f64_list(&self.theta_grid),
            self.ao.eps,
            self.ao.max_iter,
            self.ao.tolerance,
            self.dominance_tol,
        ))
    }

    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.canonical()?.as_bytes())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Complete,
    /// Some sweep points were infeasible.
    Partial,
    /// Every point of at least one scheme was infeasible.
    Failed,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Complete => 0,
            RunStatus::Partial => 2,
            RunStatus::Failed => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub status: RunStatus,
    pub regions: BTreeMap<SchemeKind, RateRegion>,
    pub config_hash: String,
    pub out_dir: PathBuf,
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Pairwise dominance between regions, as `(a, b, a dominates b)`.
pub fn dominance_matrix(regions: &[RateRegion], tol: f64) -> Vec<(String, String, bool)> {
    let mut out = Vec::new();
    for (i, a) in regions.iter().enumerate() {
        for (j, b) in regions.iter().enumerate() {
            if i != j {
                out.push((a.scheme.clone(), b.scheme.clone(), a.dominates(b, tol)));
            }
        }
    }
    out
}

fn write_dominance(path: &Path, regions: &[RateRegion], tol: f64) -> Result<()> {
    write_file(path, |w| {
        writeln!(w, "region,other,dominates")?;
        for (a, b, d) in dominance_matrix(regions, tol) {
            writeln!(w, "{a},{b},{d}")?;
        }
        Ok(())
    })
}

fn write_hypervolumes(path: &Path, regions: &[RateRegion]) -> Result<()> {
    write_file(path, |w| {
        writeln!(w, "scheme,hypervolume,infeasible_points")?;
        for r in regions {
            writeln!(
                w,
                "{},{:?},{}",
                r.scheme,
                r.hypervolume(),
                r.infeasible_count()
            )?;
        }
        Ok(())
    })
}

/// A worker pool of `jobs` threads (default: all cores).
pub fn worker_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(invalid("the worker count must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))
}

/// Runs the sweeps of `cfg`, writing into `out_dir`. `jobs` bounds the
/// worker pool (default: all cores).
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    jobs: Option<usize>,
) -> Result<RunSummary> {
    let started = Instant::now();
    let started_at = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let scenario = cfg.scenario()?;
    let config_hash = cfg.hash()?;
    fs::create_dir_all(out_dir.join("hull"))?;
    let pool = worker_pool(jobs)?;
    let mut on_scheme = |kind: SchemeKind, r: &SweepResult| -> Result<()> {
        log::info!(
            "{kind}: {} points done after {:.1?}",
            r.region.points.len(),
            started.elapsed()
        );
        write_file(&out_dir.join(format!("{kind}.csv")), |w| {
            r.region.write_csv(w)
        })?;
        write_file(&out_dir.join("hull").join(format!("{kind}.csv")), |w| {
            r.region.write_hull_csv(w)
        })
    };
    let sweeps = pool.install(|| {
        sweep_schemes_with(
            &scenario,
            &cfg.schemes,
            &cfg.u2,
            &cfg.theta_grid,
            &cfg.ao,
            &mut on_scheme,
        )
    })?;
    let regions: BTreeMap<SchemeKind, RateRegion> =
        sweeps.into_iter().map(|(k, r)| (k, r.region)).collect();
    let ordered: Vec<RateRegion> = cfg.schemes.iter().map(|k| regions[k].clone()).collect();
    write_dominance(&out_dir.join("dominance.csv"), &ordered, cfg.dominance_tol)?;
    write_hypervolumes(&out_dir.join("hypervolume.csv"), &ordered)?;

    let status = if ordered
        .iter()
        .any(|r| r.infeasible_count() == r.points.len())
    {
        RunStatus::Failed
    } else if ordered.iter().any(|r| r.infeasible_count() > 0) {
        RunStatus::Partial
    } else {
        RunStatus::Complete
    };
    write_file(&out_dir.join("manifest.txt"), |w| {
        writeln!(w, "name = {}", cfg.name)?;
        writeln!(w, "config_hash = {config_hash}")?;
        writeln!(w, "tool_version = {TOOL_VERSION}")?;
        writeln!(w, "scenario = {}", scenario.fingerprint())?;
        writeln!(w, "seed = {}", cfg.seed)?;
        writeln!(
            w,
            "schemes = {}",
            cfg.schemes
                .iter()
                .map(|k| k.name())
                .collect::<Vec<_>>()
                .join("; ")
        )?;
        writeln!(w, "status = {status:?}")?;
        writeln!(w, "started_unix = {started_at}")?;
        writeln!(
            w,
            "wall_clock_seconds = {:.3}",
            started.elapsed().as_secs_f64()
        )?;
        Ok(())
    })?;
    Ok(RunSummary {
        status,
        regions,
        config_hash,
        out_dir: out_dir.to_path_buf(),
    })
}

/// Comparison of regions computed for the same scenario.
#[derive(Debug, Clone)]
pub struct CompareReport {
    pub regions: Vec<RateRegion>,
    pub tol: f64,
    pub dominance: Vec<(String, String, bool)>,
    /// Hypervolume of each region divided by that of the first.
    pub hypervolume_ratios: Vec<(String, f64)>,
    /// Per weight, the first region's weighted sum rate minus each other
    /// region's (`None` where either point is infeasible).
    pub wsr_gaps: Vec<(f64, Vec<Option<f64>>)>,
}

pub fn compare_report(regions: Vec<RateRegion>, tol: f64) -> Result<CompareReport> {
    if regions.len() < 2 {
        return Err(invalid("comparison needs at least two regions"));
    }
    let reference = &regions[0];
    for r in &regions[1..] {
        if r.scenario != reference.scenario {
            return Err(invalid(format!(
                "region `{}` is for scenario {} but `{}` is for {}",
                r.scheme, r.scenario, reference.scheme, reference.scenario
            )));
        }
    }
    let base = reference.hypervolume();
    let hypervolume_ratios = regions
        .iter()
        .map(|r| (r.scheme.clone(), r.hypervolume() / base))
        .collect();
    let wsr_at = |r: &RateRegion, u2: f64| {
        r.points
            .iter()
            .find(|p| p.u2 == u2 && p.is_feasible())
            .map(|p| p.wsr)
    };
    let wsr_gaps = reference
        .points
        .iter()
        .map(|p| {
            let gaps = regions[1..]
                .iter()
                .map(|r| Some(wsr_at(reference, p.u2)? - wsr_at(r, p.u2)?))
                .collect();
            (p.u2, gaps)
        })
        .collect();
    Ok(CompareReport {
        dominance: dominance_matrix(&regions, tol),
        regions,
        tol,
        hypervolume_ratios,
        wsr_gaps,
    })
}

pub fn load_region(path: &Path) -> Result<RateRegion> {
    RateRegion::read_csv(File::open(path)?)
}

impl CompareReport {
    pub fn write_text(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "# dominance (tol = {:?})", self.tol)?;
        writeln!(w, "region,other,dominates")?;
        for (a, b, d) in &self.dominance {
            writeln!(w, "{a},{b},{d}")?;
        }
        writeln!(w)?;
        writeln!(w, "# hypervolume ratio to {}", self.regions[0].scheme)?;
        writeln!(w, "scheme,hypervolume,ratio")?;
        for (r, (name, ratio)) in self.regions.iter().zip(&self.hypervolume_ratios) {
            writeln!(w, "{name},{:?},{ratio:?}", r.hypervolume())?;
        }
        writeln!(w)?;
        writeln!(w, "# wsr gap: {} minus other", self.regions[0].scheme)?;
        let others: Vec<&str> = self.regions[1..]
            .iter()
            .map(|r| r.scheme.as_str())
            .collect();
        writeln!(w, "u2,{}", others.join(","))?;
        for (u2, gaps) in &self.wsr_gaps {
            let cells: Vec<String> = gaps
                .iter()
                .map(|g| g.map_or_else(String::new, |g| format!("{g:?}")))
                .collect();
            writeln!(w, "{u2:?},{}", cells.join(","))?;
        }
        Ok(())
    }
}
