//! Problem instances: channels, power budgets, noise and QoS targets.
//!
//! A [`Scenario`] fixes everything that stays constant while precoders and
//! the time split are optimized. Scenarios are immutable once built and
//! validated, so they can be shared freely between worker threads.
//!
//! File format (flat `key = value`, see [`crate::kv`]):
//!
//! ```text
//! n_t = 2
//! h1 = 1.0,0.0; 1.0,0.0          # S -> U1, one `re,im` pair per antenna
//! h2 = 0.3,0.0; 0.2,0.1          # S -> U2
//! h3 = 1.0,0.0                   # U1 -> U2
//! p_t = 10.0
//! p_r = 10.0
//! sigma_sq = 1.0; 1.0            # noise variance at U1; U2
//! r_tar = 0.0; 0.0               # QoS targets in bits/s/Hz
//! ```

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};
use crate::kv::{format_complex_list, format_f64_list, KvDocument};

/// Largest supported antenna count.
pub const MAX_N_T: usize = 1024;

/// Keys of the scenario file, in the order they are written.
pub const SCENARIO_KEYS: [&str; 8] = ["n_t", "h1", "h2", "h3", "p_t", "p_r", "sigma_sq", "r_tar"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum User {
    One,
    Two,
}

impl User {
    pub const BOTH: [User; 2] = [User::One, User::Two];

    pub fn index(self) -> usize {
        match self {
            User::One => 0,
            User::Two => 1,
        }
    }

    pub fn other(self) -> User {
        match self {
            User::One => User::Two,
            User::Two => User::One,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub n_t: usize,
    /// Channel from the transmitter to user 1.
    pub h1: Vec<Complex64>,
    /// Channel from the transmitter to user 2.
    pub h2: Vec<Complex64>,
    /// Relay link from user 1 to user 2.
    pub h3: Complex64,
    pub p_t: f64,
    pub p_r: f64,
    pub sigma_sq: [f64; 2],
    pub r_tar: [f64; 2],
}

/// Deterministic channel geometry: `h2` strength, relay-link strength and
/// the angle between the two users' channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelGeometry {
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha: f64,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl Scenario {
    /// Builds and validates a scenario with unit noise at both users.
    pub fn new(
        h1: Vec<Complex64>,
        h2: Vec<Complex64>,
        h3: Complex64,
        p_t: f64,
        p_r: f64,
        r_tar: [f64; 2],
    ) -> Result<Self> {
        let s = Scenario {
            n_t: h1.len(),
            h1,
            h2,
            h3,
            p_t,
            p_r,
            sigma_sq: [1.0, 1.0],
            r_tar,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_n_t(self.n_t)?;
        if self.h1.len() != self.n_t || self.h2.len() != self.n_t {
            return Err(invalid(format!(
                "channel lengths {} / {} do not match n_t = {}",
                self.h1.len(),
                self.h2.len(),
                self.n_t
            )));
        }
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        if !self.h1.iter().all(finite) || !self.h2.iter().all(finite) || !finite(&self.h3) {
            return Err(invalid("non-finite channel entry"));
        }
        for (name, v) in [("p_t", self.p_t), ("p_r", self.p_r)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} = {v} must be finite and positive")));
            }
        }
        if !self.sigma_sq.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(invalid("noise variances must be finite and positive"));
        }
        if !self.r_tar.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(invalid("QoS targets must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn channel(&self, user: User) -> &[Complex64] {
        match user {
            User::One => &self.h1,
            User::Two => &self.h2,
        }
    }

    pub fn noise(&self, user: User) -> f64 {
        self.sigma_sq[user.index()]
    }

    /// Parametrized channels: `h1` all ones, `h2[m] = lambda1 * exp(j m alpha)`,
    /// `h3 = lambda2`, and `p_t = p_r = 10^(snr_db / 10)` with unit noise.
    pub fn parametric(
        n_t: usize,
        geom: ChannelGeometry,
        snr_db: f64,
        r_tar: [f64; 2],
    ) -> Result<Self> {
        check_n_t(n_t)?;
        for (name, v) in [
            ("lambda1", geom.lambda1),
            ("lambda2", geom.lambda2),
            ("alpha", geom.alpha),
            ("snr_db", snr_db),
        ] {
            if !v.is_finite() {
                return Err(invalid(format!("{name} must be finite")));
            }
        }
        if geom.lambda1 < 0.0 || geom.lambda2 < 0.0 {
            return Err(invalid("channel strengths must be non-negative"));
        }
        let h1 = vec![Complex64::new(1.0, 0.0); n_t];
        let h2 = (0..n_t)
            .map(|m| Complex64::from_polar(geom.lambda1, m as f64 * geom.alpha))
            .collect();
        let power = db_to_linear(snr_db);
        Scenario::new(
            h1,
            h2,
            Complex64::new(geom.lambda2, 0.0),
            power,
            power,
            r_tar,
        )
    }

    /// i.i.d. CN(0, 1) channels from a seeded ChaCha stream.
    pub fn random(n_t: usize, seed: u64, snr_db: f64) -> Result<Self> {
        check_n_t(n_t)?;
        if !snr_db.is_finite() {
            return Err(invalid("snr_db must be finite"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid normal");
        let mut draw = || Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        let h1: Vec<_> = (0..n_t).map(|_| draw()).collect();
        let h2: Vec<_> = (0..n_t).map(|_| draw()).collect();
        let h3 = draw();
        let power = db_to_linear(snr_db);
        Scenario::new(h1, h2, h3, power, power, [0.0, 0.0])
    }

    pub fn with_targets(mut self, r_tar: [f64; 2]) -> Result<Self> {
        self.r_tar = r_tar;
        self.validate()?;
        Ok(self)
    }

    pub fn to_config_string(&self) -> String {
        format!(
            "n_t = {}\nh1 = {}\nh2 = {}\nh3 = {:?},{:?}\np_t = {:?}\np_r = {:?}\nsigma_sq = {}\nr_tar = {}\n",
            self.n_t,
            format_complex_list(&self.h1),
            format_complex_list(&self.h2),
            self.h3.re,
            self.h3.im,
            self.p_t,
            self.p_r,
            format_f64_list(&self.sigma_sq),
            format_f64_list(&self.r_tar),
        )
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        let doc = KvDocument::parse(text)?;
        Self::from_document(&doc)
    }

    pub(crate) fn from_document(doc: &KvDocument) -> Result<Self> {
        doc.check_keys(&SCENARIO_KEYS)?;
        let n_t = doc.require("n_t")?.as_usize()?;
        let pair = |key: &str, default: [f64; 2]| -> Result<[f64; 2]> {
            match doc.get(key) {
                None => Ok(default),
                Some(e) => {
                    let v = e.as_f64_list()?;
                    match v.as_slice() {
                        [a, b] => Ok([*a, *b]),
                        _ => Err(e.err("expected two values")),
                    }
                }
            }
        };
        let s = Scenario {
            n_t,
            h1: doc.require("h1")?.as_complex_list()?,
            h2: doc.require("h2")?.as_complex_list()?,
            h3: doc.require("h3")?.as_complex()?,
            p_t: doc.require("p_t")?.as_f64()?,
            p_r: doc.require("p_r")?.as_f64()?,
            sigma_sq: pair("sigma_sq", [1.0, 1.0])?,
            r_tar: pair("r_tar", [0.0, 0.0])?,
        };
        s.validate()?;
        Ok(s)
    }

    /// Short stable hash of the canonical file form.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_config_string().as_bytes());
        hex::encode(&digest[..8])
    }
}

fn check_n_t(n_t: usize) -> Result<()> {
    if !(2..=MAX_N_T).contains(&n_t) {
        return Err(invalid(format!("n_t = {n_t} outside 2..={MAX_N_T}")));
    }
    Ok(())
}

pub(crate) fn norm_sq(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}
