use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crs_core::ao::{
    ao_solve, default_theta_grid, theta_search, theta_search_masked, AoOptions, AoProblem,
};
use crs_core::kernel::{rate_report, split_common_rate};
use crs_core::oracle::random_search_wsr;
use crs_core::scheme::{solve_schemes, SchemeKind};
use crs_core::subproblem::StreamMask;
use crs_core::{ChannelGeometry, Scenario};

fn aligned(alpha: f64) -> Scenario {
    let geom = ChannelGeometry {
        lambda1: 0.3,
        lambda2: 1.0,
        alpha,
    };
    Scenario::parametric(4, geom, 10.0, [0.0, 0.0]).unwrap()
}

#[test]
fn ao_is_not_beaten_by_random_sampling() {
    let s = Scenario::random(2, 7, 10.0).unwrap();
    assert!((s.p_t - 10.0).abs() < 1e-12);
    let u = [1.0, 1.0];
    let ao = ao_solve(&s, u, 1.0, &AoOptions::default(), None).unwrap();
    let sampled = random_search_wsr(&s, u, 1.0, 1_000_000, 99).unwrap();
    assert!(
        ao.wsr >= sampled - 1e-2,
        "ao {} vs sampled {}",
        ao.wsr,
        sampled
    );
}

#[test]
fn reported_wsr_matches_recomputed_rates() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..10 {
        let s = Scenario::random(2 + seed as usize % 3, 500 + seed, 10.0).unwrap();
        let u = [1.0, rng.gen_range(0.2..5.0)];
        let theta = rng.gen_range(0.1..=1.0);
        let d = ao_solve(&s, u, theta, &AoOptions::default(), None).unwrap();
        let rates = rate_report(&s, &d.p, theta).unwrap();
        let c = split_common_rate(&rates, u, s.r_tar, StreamMask::FULL.split).unwrap();
        let wsr = u[0] * (rates.r_p[0] + c.c[0]) + u[1] * (rates.r_p[1] + c.c[1]);
        assert!((wsr - d.wsr).abs() <= 1e-6);
        assert!(d.constraint_residual(&s) <= 1e-7);
        assert!(d.c.total() <= d.rates.r_c + 1e-7);
    }
}

#[test]
fn theta_search_keeps_seeded_theta_one_solution() {
    for seed in 0..5 {
        let s = Scenario::random(3, 700 + seed, 10.0).unwrap();
        let u = [1.0, 2.0];
        let opts = AoOptions::default();
        let at_one = ao_solve(&s, u, 1.0, &opts, None).unwrap();
        let grid = default_theta_grid();
        let searched = theta_search_masked(
            &s,
            u,
            StreamMask::FULL,
            &grid,
            &opts,
            std::slice::from_ref(&at_one),
        )
        .unwrap();
        assert!(searched.wsr >= at_one.wsr - 1e-9);
    }
}

#[test]
fn no_relay_link_selects_theta_one() {
    let mut s = aligned(PI / 9.0);
    s.h3 = num_complex::Complex64::new(0.0, 0.0);
    for u2 in [0.5, 3.0] {
        let d = theta_search(&s, [1.0, u2], &AoOptions::default(), &default_theta_grid()).unwrap();
        assert_eq!(d.theta, 1.0);
    }
}

#[test]
fn extreme_user2_weight_uses_cooperation() {
    let s = aligned(4.0 * PI / 9.0);
    let u = [1.0, 1e3];
    let opts = AoOptions::default();
    let searched = theta_search(&s, u, &opts, &default_theta_grid()).unwrap();
    let at_one = theta_search(&s, u, &opts, &[1.0]).unwrap();
    assert!(searched.theta < 1.0);
    assert!(
        searched.wsr > at_one.wsr + 0.01,
        "{} vs {}",
        searched.wsr,
        at_one.wsr
    );
}

#[test]
fn crs_beats_nrs_for_user2_at_extreme_weight() {
    let s = aligned(PI / 9.0);
    let out = solve_schemes(
        &s,
        [1.0, 1e3],
        &[SchemeKind::Crs, SchemeKind::Nrs],
        &default_theta_grid(),
        &AoOptions::default(),
        &|_| Vec::new(),
    );
    let crs = out[0].1.as_ref().unwrap();
    let nrs = out[1].1.as_ref().unwrap();
    assert!(
        crs.r_tot[1] > nrs.r_tot[1],
        "{:?} vs {:?}",
        crs.r_tot,
        nrs.r_tot
    );
}

#[test]
fn convergence_history_is_monotone_on_random_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for i in 0..20u64 {
        let s = Scenario::random(2 + (i % 3) as usize, 900 + i, 10.0).unwrap();
        let u = [1.0, 10f64.powf(rng.gen_range(-1.0..1.0))];
        let theta = rng.gen_range(0.2..=1.0);
        let out = AoProblem::new(&s, u, theta)
            .solve(&AoOptions::default(), None)
            .unwrap();
        assert!(out
            .state
            .wsr_history
            .windows(2)
            .all(|w| w[1] >= w[0] - 1e-9));
        assert_eq!(*out.state.wsr_history.last().unwrap(), out.point.wsr);
    }
}
