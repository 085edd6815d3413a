//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use rand::Rng;
use sysrisk_core::model::{DiscreteDist, ModelParams, Recovery, ValidatedParams};

/// The shock-surface economy: y = 80, k_s = 25, k_b = 55, v = 12,
/// Z ~ Bin(0.4, 20), delta = 0.4, complete small-bank graph, indicator
/// connectivity 0.9 in both directions and y_b = y p_bs.
pub fn figure_params(n: usize) -> ValidatedParams {
    ModelParams {
        n,
        p_ss: 1.0,
        eta_sb: DiscreteDist::indicator(0.9).unwrap(),
        eta_bs: DiscreteDist::indicator(0.9).unwrap(),
        shock_small: DiscreteDist::binary(0.4, 20.0).unwrap(),
        k_small: DiscreteDist::point(25.0),
        y_small: DiscreteDist::point(80.0),
        y_big: 72.0,
        k_big: 55.0,
        v_small: 12.0,
        v_big: 12.0,
        delta: 0.4,
        recovery: None,
    }
    .validate()
    .unwrap()
}

/// Random discrete law with 1..=max_atoms atoms on values from `value`.
pub fn random_dist<R: Rng, F: FnMut(&mut R) -> f64>(
    rng: &mut R,
    max_atoms: usize,
    mut value: F,
) -> DiscreteDist {
    let k = rng.gen_range(1..=max_atoms);
    let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let items: Vec<(f64, f64)> = weights.iter().map(|w| (value(rng), w / total)).collect();
    DiscreteDist::from_weighted(items).unwrap()
}

/// Random valid economy with general discrete laws.
pub fn random_params<R: Rng>(rng: &mut R, n: usize, with_recovery: bool) -> ValidatedParams {
    loop {
        let eta_sb = random_dist(rng, 3, |r| r.gen_range(0.0..=1.0));
        let eta_bs = random_dist(rng, 3, |r| r.gen_range(0.0..=1.0));
        let mean_sb = eta_sb.mean();
        if !(mean_sb > 0.01 && mean_sb < 0.99) || eta_bs.mean() < 0.01 {
            continue;
        }
        let recovery = with_recovery.then(|| Recovery {
            rho_s: rng.gen_range(0.0..=1.0),
            rho_b: rng.gen_range(0.0..=1.0),
            a_s: rng.gen_range(0.0..50.0),
            a_b: rng.gen_range(0.0..50.0),
        });
        let params = ModelParams {
            n,
            p_ss: rng.gen_range(0.2..=1.0),
            eta_sb,
            eta_bs,
            shock_small: random_dist(rng, 3, |r| r.gen_range(0.0..30.0)),
            k_small: random_dist(rng, 2, |r| r.gen_range(0.0..60.0)),
            y_small: random_dist(rng, 2, |r| r.gen_range(1.0..100.0)),
            y_big: rng.gen_range(1.0..100.0),
            k_big: rng.gen_range(0.0..150.0),
            v_small: rng.gen_range(0.0..40.0),
            v_big: rng.gen_range(0.0..40.0),
            delta: rng.gen_range(0.0..=1.0),
            recovery,
        };
        if let Ok(v) = params.validate() {
            return v;
        }
    }
}
