//! Closed-form results for binary shocks: the two-sided default
//! classification, the five-regime solution of the regular indicator economy
//! with its barriers, and the recovery variant with the minimal attainable
//! default fraction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, Scenario, ValidatedParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("small-bank connectivity to the big bank must be {{0,1}}-valued")]
    RequiresIndicatorEta,
    #[error("small-bank shock must take exactly the values 0 and eps > 0")]
    NotBinaryShock,
    #[error("small-bank anticipated return must be deterministic")]
    RequiresDeterministicReturn,
    #[error("shock size {eps} must be below the liability {y}")]
    EpsilonExceedsY { eps: f64, y: f64 },
    #[error("connectivity p_bs = {0} must lie in (0, 1)")]
    InvalidConnectivity(f64),
    #[error("no default regime is consistent at p_bs = {p_bs}")]
    NoConsistentRegime { p_bs: f64 },
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(&'static str),
    #[error("recovery parameters are required")]
    MissingRecoveryParams,
    #[error("bound on the big-bank payment must be finite and non-negative, got {0}")]
    InvalidBound(f64),
}

/// Outcome of the two-sided sufficient conditions for no or total default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FirstClassification {
    NoDefaults,
    AllDefaults,
    Indeterminate,
}

fn require_indicator_eta(params: &ValidatedParams) -> Result<(), AnalyticError> {
    let p = params.params();
    let is_indicator = |d: &crate::model::DiscreteDist| {
        d.support().all(|(v, _)| v == 0.0 || v == 1.0)
    };
    if is_indicator(&p.eta_bs) && is_indicator(&p.eta_sb) {
        Ok(())
    } else {
        Err(AnalyticError::RequiresIndicatorEta)
    }
}

fn deterministic_y(params: &ValidatedParams) -> Result<f64, AnalyticError> {
    Ok(params
        .params()
        .y_small
        .point_value()
        .ok_or(ModelError::RequiresDeterministicY)?)
}

/// Returns `(w, eps)` of a `{0, eps}` shock law.
fn binary_shock(params: &ValidatedParams) -> Result<(f64, f64), AnalyticError> {
    let mut eps = None;
    let mut w = 0.0;
    for (v, p) in params.params().shock_small.support() {
        if v == 0.0 {
            continue;
        }
        match eps {
            None => eps = Some(v),
            Some(e) if e == v => {}
            Some(_) => return Err(AnalyticError::NotBinaryShock),
        }
        w += p;
    }
    let eps = eps.ok_or(AnalyticError::NotBinaryShock)?;
    Ok((w, eps))
}

fn check_connectivity(p_bs: f64) -> Result<(), AnalyticError> {
    if p_bs > 0.0 && p_bs < 1.0 {
        Ok(())
    } else {
        Err(AnalyticError::InvalidConnectivity(p_bs))
    }
}

/// Sufficient conditions on `y p_bs` for no small-bank default or total
/// small-bank default, with `p_bs = E[eta_bs]`:
/// * `y p_bs <= k_lower - v_s` gives no defaults;
/// * `k_upper - v_s + y (1 - p_bs) + x_b_bound < y` gives total default, where
///   `x_b_bound` bounds the big bank's payment per unit connectivity
///   (`x_b_bound = y` in a regular economy, giving `y p_bs > k_upper + y - v_s`).
pub fn lemma_first_classify(
    params: &ValidatedParams,
    scenario: Scenario,
    x_b_bound: f64,
) -> Result<FirstClassification, AnalyticError> {
    if !x_b_bound.is_finite() || x_b_bound < 0.0 {
        return Err(AnalyticError::InvalidBound(x_b_bound));
    }
    if !params.params().eta_bs.support().all(|(v, _)| v == 0.0 || v == 1.0) {
        return Err(AnalyticError::RequiresIndicatorEta);
    }
    let y = deterministic_y(params)?;
    let p_bs = params.p_bs_mean();
    let v = params.params().v_small;
    let (k_lower, k_upper) = params.return_range(scenario.z_c);
    Ok(if y * p_bs <= k_lower - v {
        FirstClassification::NoDefaults
    } else if k_upper - v + y * (1.0 - p_bs) + x_b_bound < y {
        FirstClassification::AllDefaults
    } else {
        FirstClassification::Indeterminate
    })
}

/// Closed-form solution of the limit clearing equations for binary shocks in
/// the regular indicator economy with connectivity `p_bs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeResult {
    /// `1..=5`: regime `i` has the `i - 1` lowest capacity terms in default.
    pub regime: u8,
    pub p_bs: f64,
    pub p_d_small: f64,
    pub xbar: f64,
    /// `b1..b5`; regime `i` holds when `b_{i-1} < y p_bs <= b_i`.
    pub barriers: [f64; 5],
    pub c: [f64; 5],
    pub d: [f64; 4],
    /// Capacity terms `a_1..a_4` at `xbar`, in increasing order.
    pub capacity_terms: [f64; 4],
    pub big_bank_solvent_check: bool,
    /// True when no defaulting capacity term is negative, so the outer
    /// positive part of the capacity never binds.
    pub clamp_free: bool,
    /// Both checks hold: the closed form equals the limit solution.
    pub applicable: bool,
    pub k_lower: f64,
    pub k_upper: f64,
    pub k_bar_z: f64,
}

/// Default fraction of regime `i` (1-based).
pub fn regime_default_fraction(regime: u8, w: f64, p_bs: f64) -> f64 {
    match regime {
        1 => 0.0,
        2 => w * (1.0 - p_bs),
        3 => 1.0 - p_bs,
        4 => 1.0 - p_bs * (1.0 - w),
        _ => 1.0,
    }
}

pub fn binary_regime_solve(
    params: &ValidatedParams,
    scenario: Scenario,
    p_bs: f64,
) -> Result<RegimeResult, AnalyticError> {
    check_connectivity(p_bs)?;
    require_indicator_eta(params)?;
    let y = deterministic_y(params)?;
    let (w, eps) = binary_shock(params)?;
    if params.params().k_small.point_value().is_none() {
        return Err(AnalyticError::RequiresDeterministicReturn);
    }
    if eps >= y {
        return Err(AnalyticError::EpsilonExceedsY { eps, y });
    }
    let p = params.params();
    let v = p.v_small;
    let (k_lower, k_upper) = params.return_range(scenario.z_c);
    let k_bar_z = params.k_bar_z(scenario.z_c);
    let q = 1.0 - p_bs;

    let p_d: [f64; 5] = std::array::from_fn(|i| regime_default_fraction(i as u8 + 1, w, p_bs));
    let c = [
        0.0,
        k_lower - v,
        k_bar_z - v,
        (k_bar_z * q + (k_lower + y) * w * p_bs) / p_d[3] - v,
        k_bar_z - v + y * p_bs,
    ];
    let d = [k_lower - v, k_upper - v, k_lower - v + y, k_upper - v + y];
    let xbar_of = |i: usize| y * q - (y * p_bs - c[i]) * q * p_d[i] / (1.0 - q * p_d[i]);
    let mut barriers = [0.0; 5];
    barriers[0] = d[0];
    for i in 1..4 {
        barriers[i] = c[i] * q * p_d[i] + d[i] * (1.0 - q * p_d[i]);
    }
    barriers[4] = y;

    // Regime i (0-based) is consistent when the terms below i default and the
    // term at i clears in full; the lowest consistent regime wins ties.
    let terms = |x: f64| [d[0] + x, d[1] + x, d[2] + x, d[3] + x];
    let regime = (0..5)
        .find(|&i| {
            let a = terms(xbar_of(i));
            let lower_default = i == 0 || a[i - 1] < y;
            let upper_clears = i == 4 || a[i] >= y;
            lower_default && upper_clears
        })
        .ok_or(AnalyticError::NoConsistentRegime { p_bs })?;
    let xbar = xbar_of(regime);
    let capacity_terms = terms(xbar);
    let clamp_free = capacity_terms[..regime].iter().all(|&a| a >= 0.0);
    let big_bank_solvent_check = (p.k_big - p.delta * scenario.z_c - scenario.z_b).max(0.0) - p.v_big
        + xbar * p_bs / q
        > y * p_bs;

    Ok(RegimeResult {
        regime: regime as u8 + 1,
        p_bs,
        p_d_small: p_d[regime],
        xbar,
        barriers,
        c,
        d,
        capacity_terms,
        big_bank_solvent_check,
        clamp_free,
        applicable: big_bank_solvent_check && clamp_free,
        k_lower,
        k_upper,
        k_bar_z,
    })
}

/// Default fraction, its infimum over connectivity, and expected surplus
/// when broken bonds let every small bank clear in full.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub p_d_small: f64,
    pub p_d_star: f64,
    /// `E[(k - z_c - Z)^+] - v_s + A_s - (1 - rho_s) A_s P_D + psi_b`; the
    /// big bank's constant bond value is not included.
    pub es2: f64,
    /// `k_b - delta z_c - z_b - v_b`.
    pub psi_big: f64,
}

pub fn binary_recovery_solve(
    params: &ValidatedParams,
    scenario: Scenario,
    p_bs: f64,
) -> Result<RecoveryResult, AnalyticError> {
    check_connectivity(p_bs)?;
    let p = params.params();
    let rec = p.recovery.ok_or(AnalyticError::MissingRecoveryParams)?;
    let y = deterministic_y(params)?;
    let (w, eps) = binary_shock(params)?;
    if p.k_small.point_value().is_none() {
        return Err(AnalyticError::RequiresDeterministicReturn);
    }
    let v = p.v_small;
    let (k_lower, k_upper) = params.return_range(scenario.z_c);
    let psi_big = p.k_big - p.delta * scenario.z_c - scenario.z_b - p.v_big;
    if psi_big <= 0.0 {
        return Err(AnalyticError::HypothesisViolated("k_b > delta z_c + z_b + v_b"));
    }
    if eps >= y {
        return Err(AnalyticError::HypothesisViolated("eps < y"));
    }
    if k_lower + rec.rho_s * rec.a_s <= v + y * p_bs {
        return Err(AnalyticError::HypothesisViolated(
            "k_lower + rho_s A_s > v_s + y p_bs",
        ));
    }

    let yp = y * p_bs;
    let p_d_small = if yp <= k_lower - v {
        0.0
    } else if yp <= k_upper - v {
        w * (1.0 - p_bs)
    } else if yp <= k_lower + y - v {
        1.0 - p_bs
    } else if yp <= k_upper + y - v {
        1.0 - p_bs * (1.0 - w)
    } else {
        1.0
    };
    let p_d_star = if v <= k_upper {
        (w * (1.0 - (k_upper - v) / y)).min((v - k_lower).max(0.0) / y)
    } else {
        (w + (1.0 - w) * (v - k_upper) / y).min((v - k_lower) / y).min(1.0)
    };
    let es2 = params.k_bar_z(scenario.z_c) - v + rec.a_s
        - (1.0 - rec.rho_s) * rec.a_s * p_d_small
        + psi_big;
    Ok(RecoveryResult {
        p_d_small,
        p_d_star,
        es2,
        psi_big,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finance::{default_metrics, expected_surplus, solve_limit_clearing};
    use crate::fixed_point::{LimitSolution, SolverOptions};
    use crate::graph::regular_indicator;
    use crate::model::fixtures::shock_figure_params;
    use crate::model::{DiscreteDist, Recovery};

    fn figure() -> ValidatedParams {
        shock_figure_params(1000).validate().unwrap()
    }

    fn economy(k: f64, v: f64, y: f64, p_bs: f64) -> ValidatedParams {
        regular_indicator(
            &figure()
                .modify(|p| {
                    p.k_small = DiscreteDist::point(k);
                    p.shock_small = DiscreteDist::point(0.0);
                    p.y_small = DiscreteDist::point(y);
                    p.v_small = v;
                })
                .unwrap(),
            p_bs,
        )
        .unwrap()
    }

    #[test]
    fn first_classification_examples() {
        let s = Scenario::default();
        let e = economy(5.0, 2.0, 10.0, 0.2);
        assert_eq!(lemma_first_classify(&e, s, 10.0).unwrap(), FirstClassification::NoDefaults);
        let e = economy(5.0, 2.0, 10.0, 0.999_999);
        assert_eq!(
            lemma_first_classify(&e, s, 10.0).unwrap(),
            FirstClassification::Indeterminate
        );
        let e = economy(1.0, 2.0, 3.0, 0.999_999);
        assert_eq!(lemma_first_classify(&e, s, 3.0).unwrap(), FirstClassification::AllDefaults);
    }

    #[test]
    fn first_classification_requires_indicator() {
        let e = figure().modify(|p| p.eta_bs = DiscreteDist::point(0.5)).unwrap();
        assert_eq!(
            lemma_first_classify(&e, Scenario::default(), 80.0),
            Err(AnalyticError::RequiresIndicatorEta)
        );
    }

    #[test]
    fn first_classification_agrees_with_limit_solver() {
        for &(k, v, p_bs) in &[(5.0, 2.0, 0.2), (1.0, 2.0, 0.99), (8.0, 1.0, 0.5), (0.0, 9.0, 0.95)] {
            let e = economy(k, v, 10.0, p_bs);
            let s = Scenario::default();
            let sol = solve_limit_clearing(&e, s, SolverOptions::default()).unwrap();
            let pd = default_metrics(&sol, &e, s).p_d_small;
            match lemma_first_classify(&e, s, 10.0).unwrap() {
                FirstClassification::NoDefaults => assert_eq!(pd, 0.0),
                FirstClassification::AllDefaults => assert_eq!(pd, 1.0),
                FirstClassification::Indeterminate => {}
            }
        }
    }

    #[test]
    fn figure_economy_is_regime_three() {
        let r = binary_regime_solve(&figure(), Scenario::default(), 0.9).unwrap();
        assert_eq!(r.regime, 3);
        assert!((r.p_d_small - 0.1).abs() < 1e-15);
        assert!((r.xbar - 7.3232).abs() < 1e-4);
        assert!((r.barriers[1] - 12.92).abs() < 1e-9);
        assert!((r.barriers[2] - 72.32).abs() < 1e-9);
        assert!(r.big_bank_solvent_check && r.applicable);
        assert_eq!((r.k_lower, r.k_upper, r.k_bar_z), (5.0, 25.0, 17.0));
    }

    #[test]
    fn big_bank_check_fails_under_large_idiosyncratic_shock() {
        let r = binary_regime_solve(&figure(), Scenario::new(0.0, 60.0).unwrap(), 0.9).unwrap();
        assert!(!r.big_bank_solvent_check);
        assert!(!r.applicable);
    }

    #[test]
    fn low_connectivity_is_regime_one() {
        // y p_bs <= k_lower - v_s = 8 - 3 = 5.
        let e = figure().modify(|p| p.v_small = 0.0).unwrap();
        let r = binary_regime_solve(&e, Scenario::default(), 0.05).unwrap();
        assert_eq!(r.regime, 1);
        assert_eq!(r.p_d_small, 0.0);
        assert!((r.xbar - 80.0 * 0.95).abs() < 1e-12);
    }

    #[test]
    fn precondition_errors() {
        let s = Scenario::default();
        let big_eps = figure()
            .modify(|p| p.shock_small = DiscreteDist::binary(0.4, 90.0).unwrap())
            .unwrap();
        assert!(matches!(
            binary_regime_solve(&big_eps, s, 0.5),
            Err(AnalyticError::EpsilonExceedsY { .. })
        ));
        let three = figure()
            .modify(|p| {
                p.shock_small = DiscreteDist::new(vec![(0.0, 0.5), (1.0, 0.25), (2.0, 0.25)]).unwrap()
            })
            .unwrap();
        assert_eq!(binary_regime_solve(&three, s, 0.5), Err(AnalyticError::NotBinaryShock));
        let frac = figure().modify(|p| p.eta_sb = DiscreteDist::point(0.3)).unwrap();
        assert_eq!(binary_regime_solve(&frac, s, 0.5), Err(AnalyticError::RequiresIndicatorEta));
        assert_eq!(
            binary_regime_solve(&figure(), s, 1.0),
            Err(AnalyticError::InvalidConnectivity(1.0))
        );
    }

    #[test]
    fn closed_form_matches_limit_solver_on_grid() {
        let base = figure();
        let mut checked = 0;
        for &(zc, zb) in &[(0.0, 0.0), (3.0, 5.0), (8.0, 0.0), (1.0, 20.0)] {
            let s = Scenario::new(zc, zb).unwrap();
            for i in 1..100 {
                let p_bs = i as f64 / 100.0;
                let r = binary_regime_solve(&base, s, p_bs).unwrap();
                if !r.applicable {
                    continue;
                }
                let e = regular_indicator(&base, p_bs).unwrap();
                let sol = solve_limit_clearing(&e, s, SolverOptions::default()).unwrap();
                let m = default_metrics(&sol, &e, s);
                assert!(!m.big_defaults);
                assert!((m.p_d_small - r.p_d_small).abs() <= 1e-10, "p_bs {p_bs}: {m:?} {r:?}");
                assert!((sol.xbar_s - r.xbar).abs() <= 1e-8, "p_bs {p_bs}");
                checked += 1;
            }
        }
        assert!(checked > 200, "{checked}");
    }

    #[test]
    fn regimes_monotone_and_barriers_flip() {
        let base = figure().modify(|p| p.k_big = 200.0).unwrap();
        let s = Scenario::default();
        let mut prev: Option<RegimeResult> = None;
        let mut switches = 0;
        let mut p_bs = 1e-5;
        while p_bs < 1.0 {
            let r = binary_regime_solve(&base, s, p_bs).unwrap();
            assert!(r.big_bank_solvent_check);
            if let Some(prev) = &prev {
                assert!(r.regime >= prev.regime, "regime decreased at {p_bs}");
                if r.regime > prev.regime {
                    let i = prev.regime as usize - 1;
                    assert!(80.0 * prev.p_bs <= prev.barriers[i]);
                    assert!(80.0 * r.p_bs > r.barriers[i]);
                    switches += 1;
                }
            }
            prev = Some(r);
            p_bs += 1e-5;
        }
        assert!(switches >= 2);
    }

    /// Root of the aggregate equation with capacity terms not clamped at zero.
    fn unclamped_root(r: &RegimeResult, w: f64, y: f64) -> f64 {
        let p = r.p_bs;
        let probs = [w * (1.0 - p), (1.0 - w) * (1.0 - p), w * p, (1.0 - w) * p];
        let g = |x: f64| {
            (1.0 - p) * (0..4).map(|j| probs[j] * (r.d[j] + x).min(y)).sum::<f64>() - x
        };
        let (mut lo, mut hi) = (-100.0 * y, y);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn upper_regimes_solve_the_unclamped_equation() {
        // Regimes 4 and 5 need the third term below y, which forces the first
        // term below zero; the closed form then solves the equation without
        // the outer positive part and is flagged as not applicable.
        let base = figure();
        let mut seen = [false; 2];
        for zc in [0.0, 10.0, 18.0] {
            for i in 1..200 {
                let r = binary_regime_solve(&base, Scenario::new(zc, 0.0).unwrap(), i as f64 / 200.0)
                    .unwrap();
                assert!((unclamped_root(&r, 0.4, 80.0) - r.xbar).abs() < 1e-8);
                if r.regime >= 4 {
                    seen[r.regime as usize - 4] = true;
                    assert!(r.capacity_terms[0] < 0.0 && !r.clamp_free && !r.applicable);
                }
            }
        }
        assert_eq!(seen, [true, true]);
    }

    #[test]
    fn default_fractions_stay_in_the_five_levels() {
        let base = figure();
        for zc in [0.0, 4.0, 11.0] {
            for i in 1..200 {
                let p_bs = i as f64 / 200.0;
                let r = binary_regime_solve(&base, Scenario::new(zc, 0.0).unwrap(), p_bs).unwrap();
                let levels: Vec<f64> =
                    (1..=5).map(|k| regime_default_fraction(k, 0.4, p_bs)).collect();
                assert!(levels.iter().any(|l| (l - r.p_d_small).abs() < 1e-15));
            }
        }
    }

    #[test]
    fn first_jump_size() {
        // k_lower - v = 8 - 3 = 5; jump at p_bs = 5/80.
        let e = figure().modify(|p| p.v_small = 0.0).unwrap();
        let s = Scenario::default();
        let at = 5.0 / 80.0;
        let left = binary_regime_solve(&e, s, at).unwrap();
        let right = binary_regime_solve(&e, s, at + 1e-9).unwrap();
        assert_eq!((left.regime, right.regime), (1, 2));
        assert!((right.p_d_small - left.p_d_small - 0.4 * (1.0 - at)).abs() < 1e-8);
    }

    fn with_recovery(v: f64) -> ValidatedParams {
        figure()
            .modify(|p| {
                p.v_small = v;
                p.recovery = Some(Recovery {
                    rho_s: 0.5,
                    rho_b: 0.5,
                    a_s: 300.0,
                    a_b: 30.0,
                })
            })
            .unwrap()
    }

    #[test]
    fn recovery_branches() {
        let e = with_recovery(12.0);
        let s = Scenario::default();
        // (k_lower - v)/y < 0 < p_bs <= (k_upper - v)/y = 13/80.
        let r = binary_recovery_solve(&e, s, 0.1).unwrap();
        assert!((r.p_d_small - 0.4 * 0.9).abs() < 1e-15);
        // p_bs > (k_upper + y - v)/y needs v > k_upper.
        let e = with_recovery(40.0);
        let r = binary_recovery_solve(&e, s, 0.85).unwrap();
        assert_eq!(r.p_d_small, 1.0);
        assert!((r.p_d_star - (0.4_f64 + 0.6 * 15.0 / 80.0).min(35.0 / 80.0)).abs() < 1e-15);
    }

    #[test]
    fn recovery_star_matches_grid_infimum() {
        for v in [3.0, 12.0, 24.0, 30.0, 40.0] {
            let e = with_recovery(v);
            let s = Scenario::default();
            let (k_lower, k_upper) = e.return_range(0.0);
            let y = 80.0;
            let branch = |p: f64| {
                let ind = |c: bool| if c { 1.0 } else { 0.0 };
                (1.0 - p) * (0.4 * ind(y * p > k_lower - v) + 0.6 * ind(y * p > k_upper - v))
                    + p * (0.4 * ind(y * p > k_lower - v + y) + 0.6 * ind(y * p > k_upper - v + y))
            };
            // Include the breakpoints themselves, where infima are attained.
            let mut grid: Vec<f64> = (1..100_000).map(|i| i as f64 / 100_000.0).collect();
            for t in [k_lower - v, k_upper - v, k_lower + y - v, k_upper + y - v] {
                if t > 0.0 && t < y {
                    grid.push(t / y);
                }
            }
            let inf = grid.iter().map(|&p| branch(p)).fold(f64::INFINITY, f64::min);
            let star = binary_recovery_solve(&e, s, 0.01).unwrap().p_d_star;
            assert!((star - inf).abs() < 1e-4, "v {v}: {star} vs {inf}");
        }
    }

    #[test]
    fn recovery_matches_clearing_at_full_payment() {
        let s = Scenario::new(2.0, 5.0).unwrap();
        for v in [3.0, 12.0, 40.0] {
            let base = with_recovery(v);
            for i in 1..50 {
                let p_bs = i as f64 / 50.0;
                let Ok(r) = binary_recovery_solve(&base, s, p_bs) else {
                    continue;
                };
                let e = regular_indicator(&base, p_bs).unwrap();
                let sol = LimitSolution {
                    xbar_s: 80.0 * (1.0 - p_bs),
                    xbar_b: 80.0 * p_bs,
                    x_big: 80.0,
                    iterations: 0,
                    residual: 0.0,
                };
                let m = default_metrics(&sol, &e, s);
                assert!((m.p_d_small - r.p_d_small).abs() < 1e-12, "v {v} p {p_bs}");
                let es2 = expected_surplus(&sol, &e, s).es2.unwrap();
                assert!((es2 - 30.0 - r.es2).abs() < 1e-9, "v {v} p {p_bs}");
            }
        }
    }

    #[test]
    fn recovery_hypotheses() {
        let s = Scenario::default();
        assert_eq!(
            binary_recovery_solve(&figure(), s, 0.5),
            Err(AnalyticError::MissingRecoveryParams)
        );
        let weak = with_recovery(12.0)
            .modify(|p| p.recovery.as_mut().unwrap().a_s = 1.0)
            .unwrap();
        assert!(matches!(
            binary_recovery_solve(&weak, s, 0.5),
            Err(AnalyticError::HypothesisViolated(_))
        ));
        let big_hit = Scenario::new(0.0, 50.0).unwrap();
        assert!(matches!(
            binary_recovery_solve(&with_recovery(12.0), big_hit, 0.5),
            Err(AnalyticError::HypothesisViolated(_))
        ));
    }
}
