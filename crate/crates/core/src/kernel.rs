//! Closed-form SINRs, rates, MSEs, MMSE equalizers and weights.
//!
//! The transmitter superposes one common stream and two private streams,
//! `x = p_c s_c + p_1 s_1 + p_2 s_2`, with unit-power independent symbols.
//! Streams are never materialized: every quantity below is a function of the
//! precoders and the channels only. All rates are in bits/s/Hz.
//!
//! Slot-level quantities (SINRs, MSEs, per-slot rates) ignore the time split.
//! Reported rates in [`RateReport`] are normalized by the total two-slot
//! duration, so direct-slot terms carry a factor `theta` and the relay-slot
//! term a factor `1 - theta`.

use num_complex::Complex64;

use crate::error::{check_theta, Result};
use crate::scenario::{norm_sq, Scenario, User};

/// Precoders `[p_c, p_1, p_2]`, each of length `n_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    pub common: Vec<Complex64>,
    pub private: [Vec<Complex64>; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equalizers {
    pub common: [Complex64; 2],
    pub private: [Complex64; 2],
}

/// MSE weights; strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseWeights {
    pub common: [f64; 2],
    pub private: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    pub gamma_c: [f64; 2],
    pub gamma_relay: f64,
    pub gamma_p: [f64; 2],
    pub r_c: f64,
    pub r_p: [f64; 2],
    pub r_relay_link: f64,
}

/// Shares of the common rate assigned to each user.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CommonRateSplit {
    pub c: [f64; 2],
}

impl CommonRateSplit {
    pub fn total(&self) -> f64 {
        self.c[0] + self.c[1]
    }

    /// `c_bar = -c`, the sign convention of the WMMSE subproblem.
    pub fn to_c_bar(&self) -> [f64; 2] {
        [-self.c[0], -self.c[1]]
    }

    pub fn from_c_bar(c_bar: [f64; 2]) -> Self {
        Self {
            c: [(-c_bar[0]).max(0.0), (-c_bar[1]).max(0.0)],
        }
    }
}

impl PrecoderSet {
    pub fn zeros(n_t: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); n_t];
        Self {
            common: z.clone(),
            private: [z.clone(), z],
        }
    }

    pub fn n_t(&self) -> usize {
        self.common.len()
    }

    pub fn private(&self, user: User) -> &[Complex64] {
        &self.private[user.index()]
    }

    /// `tr(P P^H)`.
    pub fn power(&self) -> f64 {
        norm_sq(&self.common) + norm_sq(&self.private[0]) + norm_sq(&self.private[1])
    }

    pub fn is_finite(&self) -> bool {
        self.iter_all()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    fn iter_all(&self) -> impl Iterator<Item = &Complex64> {
        self.common
            .iter()
            .chain(self.private[0].iter())
            .chain(self.private[1].iter())
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let scale = |v: &[Complex64]| v.iter().map(|z| z * factor).collect::<Vec<_>>();
        Self {
            common: scale(&self.common),
            private: [scale(&self.private[0]), scale(&self.private[1])],
        }
    }
}

/// `h^H p`.
#[inline]
pub fn inner(h: &[Complex64], p: &[Complex64]) -> Complex64 {
    h.iter().zip(p).map(|(a, b)| a.conj() * b).sum()
}

/// Received gains `|h_k^H p_c|^2, |h_k^H p_1|^2, |h_k^H p_2|^2` at one user.
#[derive(Debug, Clone, Copy)]
struct Gains {
    common: Complex64,
    private: [Complex64; 2],
}

impl Gains {
    fn at(s: &Scenario, p: &PrecoderSet, user: User) -> Self {
        let h = s.channel(user);
        Self {
            common: inner(h, &p.common),
            private: [inner(h, &p.private[0]), inner(h, &p.private[1])],
        }
    }

    /// `T_k = sum_i |h_k^H p_i|^2 + sigma_k^2` over the private streams.
    fn t_private(&self, noise: f64) -> f64 {
        self.private[0].norm_sqr() + self.private[1].norm_sqr() + noise
    }

    fn t_common(&self, noise: f64) -> f64 {
        self.common.norm_sqr() + self.t_private(noise)
    }
}

pub fn common_sinr(s: &Scenario, p: &PrecoderSet, user: User) -> f64 {
    let g = Gains::at(s, p, user);
    g.common.norm_sqr() / g.t_private(s.noise(user))
}

/// Private SINR after the common stream has been cancelled.
pub fn private_sinr(s: &Scenario, p: &PrecoderSet, user: User) -> f64 {
    let g = Gains::at(s, p, user);
    let k = user.index();
    let other = user.other().index();
    g.private[k].norm_sqr() / (g.private[other].norm_sqr() + s.noise(user))
}

/// SNR of the relay hop, `|h_3|^2 P_R` (noise normalized to one).
pub fn relay_sinr(s: &Scenario) -> f64 {
    s.h3.norm_sqr() * s.p_r
}

pub fn relay_link_rate(s: &Scenario) -> f64 {
    (1.0 + relay_sinr(s)).log2()
}

/// Common rate limited by the weaker of user 1 (direct slot) and user 2
/// (direct slot plus relay slot).
pub fn common_rate(s: &Scenario, p: &PrecoderSet, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(combine_common_rate(
        [common_sinr(s, p, User::One), common_sinr(s, p, User::Two)],
        relay_link_rate(s),
        theta,
    ))
}

pub(crate) fn combine_common_rate(gamma_c: [f64; 2], r_relay: f64, theta: f64) -> f64 {
    let direct1 = theta * (1.0 + gamma_c[0]).log2();
    let combined2 = theta * (1.0 + gamma_c[1]).log2() + (1.0 - theta) * r_relay;
    direct1.min(combined2)
}

pub fn private_rate(s: &Scenario, p: &PrecoderSet, theta: f64, user: User) -> Result<f64> {
    check_theta(theta)?;
    Ok(theta * (1.0 + private_sinr(s, p, user)).log2())
}

pub fn rate_report(s: &Scenario, p: &PrecoderSet, theta: f64) -> Result<RateReport> {
    check_theta(theta)?;
    let gamma_c = [common_sinr(s, p, User::One), common_sinr(s, p, User::Two)];
    let gamma_p = [private_sinr(s, p, User::One), private_sinr(s, p, User::Two)];
    let gamma_relay = relay_sinr(s);
    let r_relay_link = (1.0 + gamma_relay).log2();
    Ok(RateReport {
        gamma_c,
        gamma_relay,
        gamma_p,
        r_c: combine_common_rate(gamma_c, r_relay_link, theta),
        r_p: [
            theta * (1.0 + gamma_p[0]).log2(),
            theta * (1.0 + gamma_p[1]).log2(),
        ],
        r_relay_link,
    })
}

/// `(eps_c, eps_p)` at `user` for arbitrary equalizers.
pub fn mse_pair(s: &Scenario, p: &PrecoderSet, eq: &Equalizers, user: User) -> (f64, f64) {
    let g = Gains::at(s, p, user);
    let k = user.index();
    let noise = s.noise(user);
    let gc = eq.common[k];
    let gp = eq.private[k];
    let eps_c = gc.norm_sqr() * g.t_common(noise) - 2.0 * (gc * g.common).re + 1.0;
    let eps_p = gp.norm_sqr() * g.t_private(noise) - 2.0 * (gp * g.private[k]).re + 1.0;
    (eps_c, eps_p)
}

/// `(g_c, g_p)` minimizing the two MSEs at `user`.
pub fn mmse_equalizers(s: &Scenario, p: &PrecoderSet, user: User) -> (Complex64, Complex64) {
    let g = Gains::at(s, p, user);
    let k = user.index();
    let noise = s.noise(user);
    (
        g.common.conj() / g.t_common(noise),
        g.private[k].conj() / g.t_private(noise),
    )
}

/// Minimum MSEs in the algebraic form `I / T`.
pub fn mmse_values(s: &Scenario, p: &PrecoderSet, user: User) -> (f64, f64) {
    let g = Gains::at(s, p, user);
    let k = user.index();
    let noise = s.noise(user);
    let t_p = g.t_private(noise);
    let t_c = g.t_common(noise);
    (t_p / t_c, (t_p - g.private[k].norm_sqr()) / t_p)
}

pub fn mmse_weights(s: &Scenario, p: &PrecoderSet, user: User) -> (f64, f64) {
    let (eps_c, eps_p) = mmse_values(s, p, user);
    (1.0 / eps_c, 1.0 / eps_p)
}

/// Augmented WMSE in bits: `1 + (w * eps - ln(w) - 1) / ln 2`.
///
/// This is the natural-log augmented WMSE `w * eps - ln(w)` shifted and
/// scaled so that its minimum over `w` (attained at `w = 1 / eps`) equals
/// `1 - R` with `R = -log2(eps)` in bits.
pub fn augmented_wmse(eps: f64, weight: f64) -> f64 {
    1.0 + (weight * eps - weight.ln() - 1.0) / std::f64::consts::LN_2
}

/// Differences between the augmented WMSEs at the MMSE solution and
/// `1 - R` for the per-slot common and private rates. Both are zero up to
/// rounding.
pub fn rate_wmmse_gap(s: &Scenario, p: &PrecoderSet, user: User) -> (f64, f64) {
    let eq = Equalizers::mmse(s, p);
    let w = MseWeights::mmse(s, p);
    let k = user.index();
    let (eps_c, eps_p) = mse_pair(s, p, &eq, user);
    let xi_c = augmented_wmse(eps_c, w.common[k]);
    let xi_p = augmented_wmse(eps_p, w.private[k]);
    let r_c = (1.0 + common_sinr(s, p, user)).log2();
    let r_p = (1.0 + private_sinr(s, p, user)).log2();
    (xi_c - (1.0 - r_c), xi_p - (1.0 - r_p))
}

impl Equalizers {
    pub fn zero() -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self {
            common: [z; 2],
            private: [z; 2],
        }
    }

    pub fn mmse(s: &Scenario, p: &PrecoderSet) -> Self {
        let (c1, p1) = mmse_equalizers(s, p, User::One);
        let (c2, p2) = mmse_equalizers(s, p, User::Two);
        Self {
            common: [c1, c2],
            private: [p1, p2],
        }
    }
}

impl MseWeights {
    pub fn unit() -> Self {
        Self {
            common: [1.0; 2],
            private: [1.0; 2],
        }
    }

    pub fn mmse(s: &Scenario, p: &PrecoderSet) -> Self {
        let (c1, p1) = mmse_weights(s, p, User::One);
        let (c2, p2) = mmse_weights(s, p, User::Two);
        Self {
            common: [c1, c2],
            private: [p1, p2],
        }
    }
}

/// Which shares of the common rate may be nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitMask {
    pub allowed: [bool; 2],
}

impl SplitMask {
    pub const BOTH: SplitMask = SplitMask {
        allowed: [true, true],
    };
}

const SPLIT_SLACK: f64 = 1e-9;

/// Maximizes `u . c` subject to `c_1 + c_2 <= R_c`, `c >= 0`, the QoS floors
/// `c_k >= R_k^tar - R_p,k` and the mask. Mandatory shares are assigned
/// first, the remainder goes to the larger-weight user. With equal positive
/// weights every split is optimal; the remainder then levels the two total
/// rates, user 1 first. Returns `None` when the floors cannot be met.
pub fn split_common_rate(
    rates: &RateReport,
    u: [f64; 2],
    r_tar: [f64; 2],
    mask: SplitMask,
) -> Option<CommonRateSplit> {
    let mut c = [0.0; 2];
    for k in 0..2 {
        let deficit = (r_tar[k] - rates.r_p[k]).max(0.0);
        if deficit > SPLIT_SLACK && !mask.allowed[k] {
            return None;
        }
        c[k] = if mask.allowed[k] { deficit } else { 0.0 };
    }
    let r_c = rates.r_c.max(0.0);
    let used = c[0] + c[1];
    if used > r_c + SPLIT_SLACK {
        return None;
    }
    if used > r_c {
        // within slack: shrink proportionally so c_1 + c_2 <= R_c holds exactly
        let f = r_c / used;
        c[0] *= f;
        c[1] *= f;
        return Some(CommonRateSplit { c });
    }
    let remainder = r_c - used;
    if u[0] == u[1] && u[0] > 0.0 && mask.allowed == [true, true] {
        let total = |k: usize| rates.r_p[k] + c[k];
        let (low, high) = if total(1) < total(0) { (1, 0) } else { (0, 1) };
        let level = remainder.min(total(high) - total(low));
        c[low] += level;
        let rest = remainder - level;
        c[0] += 0.5 * rest;
        c[1] += rest - 0.5 * rest;
        return Some(CommonRateSplit { c });
    }
    let order = if u[1] > u[0] { [1, 0] } else { [0, 1] };
    for k in order {
        if mask.allowed[k] && u[k] > 0.0 {
            c[k] += remainder;
            break;
        }
    }
    Some(CommonRateSplit { c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn two_antenna(h1: [Complex64; 2], h2: [Complex64; 2]) -> Scenario {
        Scenario::new(h1.to_vec(), h2.to_vec(), c(1.0, 0.0), 1.0, 1.0, [0.0, 0.0]).unwrap()
    }

    fn precoders(pc: [Complex64; 2], p1: [Complex64; 2], p2: [Complex64; 2]) -> PrecoderSet {
        PrecoderSet {
            common: pc.to_vec(),
            private: [p1.to_vec(), p2.to_vec()],
        }
    }

    pub(crate) fn random_precoders(rng: &mut impl Rng, n_t: usize, scale: f64) -> PrecoderSet {
        let mut v = || {
            (0..n_t)
                .map(|_| {
                    c(
                        rng.gen_range(-1.0..1.0) * scale,
                        rng.gen_range(-1.0..1.0) * scale,
                    )
                })
                .collect::<Vec<_>>()
        };
        PrecoderSet {
            common: v(),
            private: [v(), v()],
        }
    }

    const Z: Complex64 = Complex64::new(0.0, 0.0);

    #[test]
    fn common_sinr_examples() {
        let s = two_antenna([c(1.0, 0.0), Z], [c(1.0, 0.0), Z]);
        let p = precoders([c(2.0, 0.0), Z], [Z, Z], [Z, Z]);
        assert_eq!(common_sinr(&s, &p, User::One), 4.0);
        let p0 = precoders([Z, Z], [c(1.0, 0.0), Z], [Z, Z]);
        assert_eq!(common_sinr(&s, &p0, User::One), 0.0);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let s = two_antenna([c(r, 0.0), c(r, 0.0)], [c(r, 0.0), c(r, 0.0)]);
        let p = precoders([c(1.0, 0.0), Z], [Z, c(1.0, 0.0)], [Z, Z]);
        assert!((common_sinr(&s, &p, User::One) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn private_sinr_examples() {
        let s = two_antenna([c(1.0, 0.0), Z], [Z, c(1.0, 0.0)]);
        let p = precoders([Z, Z], [c(1.0, 0.0), Z], [Z, Z]);
        assert_eq!(private_sinr(&s, &p, User::One), 1.0);
        assert_eq!(private_sinr(&s, &p, User::Two), 0.0);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let s = two_antenna([c(r, 0.0), c(r, 0.0)], [c(1.0, 0.0), Z]);
        let p = precoders([Z, Z], [c(1.0, 0.0), Z], [Z, c(1.0, 0.0)]);
        assert!((private_sinr(&s, &p, User::One) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn relay_link_examples() {
        let mut s = two_antenna([c(1.0, 0.0), Z], [c(1.0, 0.0), Z]);
        s.h3 = Z;
        assert_eq!(relay_link_rate(&s), 0.0);
        s.h3 = c(0.0, 1.0);
        assert_eq!(relay_link_rate(&s), 1.0);
        s.p_r = 10.0;
        assert!((relay_link_rate(&s) - 11f64.log2()).abs() < 1e-14);
        assert!((relay_link_rate(&s) - 3.4594).abs() < 1e-4);
    }

    #[test]
    fn common_rate_examples() {
        assert_eq!(combine_common_rate([3.0, 1.0], 2.0, 0.5), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = Scenario::random(3, 11, 10.0).unwrap();
        let p = random_precoders(&mut rng, 3, 1.0);
        let at_one = common_rate(&s, &p, 1.0).unwrap();
        let direct = (1.0 + common_sinr(&s, &p, User::One))
            .log2()
            .min((1.0 + common_sinr(&s, &p, User::Two)).log2());
        assert!((at_one - direct).abs() < 1e-15);
        let mut dead = p.clone();
        dead.common.iter_mut().for_each(|z| *z = Z);
        assert_eq!(common_rate(&s, &dead, 0.3).unwrap(), 0.0);
        assert!(common_rate(&s, &p, 0.0).is_err());
        assert!(common_rate(&s, &p, 1.5).is_err());
        // gamma = 1 at theta = 1 gives exactly one bit
        assert_eq!(combine_common_rate([1.0, 1.0], 0.0, 1.0), 1.0);
    }

    #[test]
    fn private_rate_examples() {
        let s = two_antenna([c(1.0, 0.0), Z], [Z, c(1.0, 0.0)]);
        let p = precoders([Z, Z], [c(1.0, 0.0), Z], [Z, Z]);
        assert_eq!(private_rate(&s, &p, 1.0, User::One).unwrap(), 1.0);
        let p3 = precoders([Z, Z], [c(3f64.sqrt(), 0.0), Z], [Z, Z]);
        assert!((private_rate(&s, &p3, 0.5, User::One).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(private_rate(&s, &p, 0.7, User::Two).unwrap(), 0.0);
        assert!(private_rate(&s, &p, -0.1, User::One).is_err());
    }

    #[test]
    fn mse_examples() {
        let s = two_antenna([c(1.0, 0.0), Z], [c(1.0, 0.0), Z]);
        let p = precoders([c(1.0, 0.0), Z], [Z, Z], [Z, Z]);
        assert_eq!(mse_pair(&s, &p, &Equalizers::zero(), User::One), (1.0, 1.0));
        let (gc, _) = mmse_equalizers(&s, &p, User::One);
        assert_eq!(gc, c(0.5, 0.0));
        let eq = Equalizers::mmse(&s, &p);
        assert_eq!(mse_pair(&s, &p, &eq, User::One).0, 0.5);
        assert_eq!(mmse_weights(&s, &p, User::One).0, 2.0);
        let dead = PrecoderSet::zeros(2);
        assert_eq!(mmse_equalizers(&s, &dead, User::Two).0, Z);
        assert_eq!(mmse_weights(&s, &dead, User::Two), (1.0, 1.0));
    }

    #[test]
    fn mmse_is_minimal_and_matches_algebraic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..1000 {
            let n_t = 2 + trial % 3;
            let s = Scenario::random(n_t, trial as u64, 10.0).unwrap();
            let p = random_precoders(&mut rng, n_t, 2.0);
            for user in User::BOTH {
                let k = user.index();
                let eq = Equalizers::mmse(&s, &p);
                let best = mse_pair(&s, &p, &eq, user);
                let alg = mmse_values(&s, &p, user);
                assert!((best.0 - alg.0).abs() < 1e-12 && (best.1 - alg.1).abs() < 1e-12);
                let mut other = eq;
                other.common[k] += c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                other.private[k] += c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let worse = mse_pair(&s, &p, &other, user);
                assert!(worse.0 >= best.0 - 1e-12 && worse.1 >= best.1 - 1e-12);
                let w = mmse_weights(&s, &p, user);
                assert!(w.0 >= 1.0 && w.1 >= 1.0);
            }
        }
    }

    #[test]
    fn mmse_equalizer_is_stationary() {
        // central differences of the MSE in the real and imaginary parts of g
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = Scenario::random(4, 17, 10.0).unwrap();
        let p = random_precoders(&mut rng, 4, 1.0);
        let eq = Equalizers::mmse(&s, &p);
        let h = 1e-6;
        for user in User::BOTH {
            let k = user.index();
            for dir in [c(1.0, 0.0), c(0.0, 1.0)] {
                let mut plus = eq;
                let mut minus = eq;
                plus.common[k] += dir * h;
                minus.common[k] -= dir * h;
                plus.private[k] += dir * h;
                minus.private[k] -= dir * h;
                let (cp, pp) = mse_pair(&s, &p, &plus, user);
                let (cm, pm) = mse_pair(&s, &p, &minus, user);
                assert!(((cp - cm) / (2.0 * h)).abs() < 1e-6);
                assert!(((pp - pm) / (2.0 * h)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn mmse_weight_is_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = Scenario::random(3, 21, 5.0).unwrap();
        let p = random_precoders(&mut rng, 3, 1.0);
        let eq = Equalizers::mmse(&s, &p);
        for user in User::BOTH {
            let (eps_c, eps_p) = mse_pair(&s, &p, &eq, user);
            let (wc, wp) = mmse_weights(&s, &p, user);
            let h = 1e-6;
            for (eps, w) in [(eps_c, wc), (eps_p, wp)] {
                let d = (augmented_wmse(eps, w + h) - augmented_wmse(eps, w - h)) / (2.0 * h);
                assert!(d.abs() < 1e-6, "d xi / d w = {d}");
                assert!(augmented_wmse(eps, 1.1 * w) > augmented_wmse(eps, w));
                assert!(augmented_wmse(eps, 0.9 * w) > augmented_wmse(eps, w));
            }
        }
    }

    #[test]
    fn rate_wmmse_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut worst: f64 = 0.0;
        for trial in 0..1000u64 {
            let n_t = 2 + (trial % 3) as usize;
            let s = Scenario::random(n_t, trial, 10.0).unwrap();
            let p = random_precoders(&mut rng, n_t, 3.0);
            for user in User::BOTH {
                let (a, b) = rate_wmmse_gap(&s, &p, user);
                worst = worst.max(a.abs()).max(b.abs());
            }
        }
        assert!(worst < 1e-9, "worst gap {worst}");
        let s = Scenario::random(2, 1, 10.0).unwrap();
        assert_eq!(
            rate_wmmse_gap(&s, &PrecoderSet::zeros(2), User::One),
            (0.0, 0.0)
        );
    }

    #[test]
    fn split_examples() {
        let rates = RateReport {
            gamma_c: [0.0; 2],
            gamma_relay: 0.0,
            gamma_p: [0.0; 2],
            r_c: 1.0,
            r_p: [0.0, 0.0],
            r_relay_link: 0.0,
        };
        let c = split_common_rate(&rates, [1.0, 2.0], [0.0, 0.0], SplitMask::BOTH).unwrap();
        assert_eq!(c.c, [0.0, 1.0]);
        let c = split_common_rate(&rates, [1.0, 1.0], [0.6, 0.0], SplitMask::BOTH).unwrap();
        assert!((c.c[0] - 0.6).abs() < 1e-15 && (c.c[1] - 0.4).abs() < 1e-15);
        let c = split_common_rate(&rates, [2.0, 2.0], [0.0, 0.0], SplitMask::BOTH).unwrap();
        assert_eq!(c.c, [0.5, 0.5]);
        let mut with_private = rates;
        with_private.r_p = [0.4, 0.0];
        let c = split_common_rate(&with_private, [1.0, 1.0], [1.0, 0.0], SplitMask::BOTH).unwrap();
        assert!((c.c[0] - 0.6).abs() < 1e-12 && (c.c[1] - 0.4).abs() < 1e-12);
        assert!(split_common_rate(&rates, [1.0, 1.0], [0.7, 0.7], SplitMask::BOTH).is_none());
        let noma = SplitMask {
            allowed: [false, true],
        };
        let c = split_common_rate(&rates, [5.0, 1.0], [0.0, 0.0], noma).unwrap();
        assert_eq!(c.c, [0.0, 1.0]);
        assert!(split_common_rate(&rates, [1.0, 1.0], [0.1, 0.0], noma).is_none());
    }

    proptest! {
        #[test]
        fn private_sinr_ignores_common_precoder(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = Scenario::random(3, seed, 10.0).unwrap();
            let p = random_precoders(&mut rng, 3, 1.0);
            let mut q = p.clone();
            q.common = random_precoders(&mut rng, 3, 5.0).common;
            for user in User::BOTH {
                prop_assert_eq!(private_sinr(&s, &p, user), private_sinr(&s, &q, user));
            }
        }

        #[test]
        fn common_phase_rotation_is_invisible(seed in 0u64..500, phase in 0.0f64..6.3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = Scenario::random(4, seed, 10.0).unwrap();
            let p = random_precoders(&mut rng, 4, 1.0);
            let q = p.scaled(Complex64::from_polar(1.0, phase));
            let a = rate_report(&s, &p, 0.6).unwrap();
            let b = rate_report(&s, &q, 0.6).unwrap();
            prop_assert!((a.r_c - b.r_c).abs() < 1e-12);
            for k in 0..2 {
                prop_assert!((a.r_p[k] - b.r_p[k]).abs() < 1e-12);
                prop_assert!((a.gamma_c[k] - b.gamma_c[k]).abs() < 1e-9 * (1.0 + a.gamma_c[k]));
            }
            for user in User::BOTH {
                let x = mmse_values(&s, &p, user);
                let y = mmse_values(&s, &q, user);
                prop_assert!((x.0 - y.0).abs() < 1e-12 && (x.1 - y.1).abs() < 1e-12);
            }
        }

        #[test]
        fn common_rate_respects_direct_bound(seed in 0u64..500, theta in 0.01f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = Scenario::random(2, seed, 10.0).unwrap();
            let p = random_precoders(&mut rng, 2, 1.0);
            let r = rate_report(&s, &p, theta).unwrap();
            prop_assert!(r.r_c <= theta * (1.0 + r.gamma_c[0]).log2() + 1e-12);
            prop_assert!(r.r_c >= 0.0);
        }
    }
}
