//! The financial instance: payment capacities, finite clearing, the limit
//! clearing equations, default fractions and expected surplus.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixed_point::{
    solve_finite, solve_limit, ClearingVector, FixedPointError, InitPolicy, LimitInit, LimitMaps,
    LimitSolution, SolverOptions, SystemMaps,
};
use crate::graph::{BankDraw, NetworkRealization};
use crate::model::{DiscreteDist, Scenario, ValidatedParams};

/// A bank defaults when its capacity is below its liability by more than this.
pub const DEFAULT_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FinanceError {
    #[error(transparent)]
    FixedPoint(#[from] FixedPointError),
    #[error("three-period surplus needs recovery parameters")]
    MissingRecoveryParams,
}

#[inline]
fn pos(v: f64) -> f64 {
    v.max(0.0)
}

/// Small-bank payment capacity
/// `((k - z_c - z_i)^+ + xbar + eta_bs_i x_b - v_s)^+`.
pub fn phi_small(k: f64, z_c: f64, z_i: f64, xbar: f64, eta_bs_i: f64, x_b: f64, v_s: f64) -> f64 {
    pos(pos(k - z_c - z_i) + xbar + eta_bs_i * x_b - v_s)
}

/// Big-bank payment capacity per small bank
/// `((k_b - delta z_c - z_b)^+ - v_b + xbar_b)^+`.
pub fn phi_big(k_b: f64, delta: f64, z_c: f64, z_b: f64, xbar_b: f64, v_b: f64) -> f64 {
    pos(pos(k_b - delta * z_c - z_b) - v_b + xbar_b)
}

/// Finite-`n` clearing maps: `x_i = min{Phi_i, Y_i}` and
/// `x_b = (1/eta_bar) min{n Phi_b, n y_b}`.
#[derive(Debug, Clone)]
pub struct FinancialMaps {
    z_c: f64,
    z_b: f64,
    v_s: f64,
    v_b: f64,
    k_b: f64,
    delta: f64,
    y_b: f64,
    /// `n / eta_bar`.
    big_scale: f64,
    bound: f64,
}

impl FinancialMaps {
    pub fn new(net: &NetworkRealization, params: &ValidatedParams, scenario: Scenario) -> Self {
        let p = params.params();
        let big_scale = net.n() as f64 / net.eta_bar();
        let max_y = net.draws().iter().map(|d| d.y).fold(0.0, f64::max);
        Self {
            z_c: scenario.z_c,
            z_b: scenario.z_b,
            v_s: p.v_small,
            v_b: p.v_big,
            k_b: p.k_big,
            delta: p.delta,
            y_b: p.y_big,
            big_scale,
            bound: max_y.max(big_scale * p.y_big),
        }
    }

    /// `Phi_b` at the big-bank aggregate `xbar_b`.
    pub fn phi_big(&self, xbar_b: f64) -> f64 {
        phi_big(self.k_b, self.delta, self.z_c, self.z_b, xbar_b, self.v_b)
    }

    pub fn capacity_small(&self, g: &BankDraw, x_bar: f64, x_b: f64) -> f64 {
        phi_small(g.k, self.z_c, g.shock, x_bar, g.eta_bs, x_b, self.v_s)
    }
}

impl SystemMaps for FinancialMaps {
    #[inline]
    fn f_small(&self, g: &BankDraw, x_bar: f64, b_in: f64) -> f64 {
        pos(pos(g.k - self.z_c - g.shock) + x_bar + b_in - self.v_s).min(g.y)
    }

    fn f_big(&self, x_bar_b: f64) -> f64 {
        self.big_scale * self.phi_big(x_bar_b).min(self.y_b)
    }

    fn bound(&self) -> f64 {
        self.bound
    }
}

/// Finite clearing result with per-bank default flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClearingOutcome {
    pub vector: ClearingVector,
    /// `X_i < Y_i - DEFAULT_TIE_TOL`.
    pub defaulted: Vec<bool>,
}

impl ClearingOutcome {
    pub fn default_fraction(&self) -> f64 {
        let count = self.defaulted.iter().filter(|&&d| d).count();
        count as f64 / self.defaulted.len() as f64
    }
}

/// Greatest clearing vector of one realization.
pub fn solve_clearing(
    net: &NetworkRealization,
    params: &ValidatedParams,
    scenario: Scenario,
) -> Result<ClearingOutcome, FinanceError> {
    solve_clearing_with(net, params, scenario, InitPolicy::FromUpper, SolverOptions::default())
}

pub fn solve_clearing_with(
    net: &NetworkRealization,
    params: &ValidatedParams,
    scenario: Scenario,
    init: InitPolicy,
    opts: SolverOptions,
) -> Result<ClearingOutcome, FinanceError> {
    let maps = FinancialMaps::new(net, params, scenario);
    let vector = solve_finite(net, &maps, init, opts)?;
    let defaulted = vector
        .x_small
        .iter()
        .zip(net.draws())
        .map(|(x, d)| *x < d.y - DEFAULT_TIE_TOL)
        .collect();
    Ok(ClearingOutcome { vector, defaulted })
}

/// One atom of the joint law of `(Z, K, Y, eta_bs)` with the post-shock return
/// already folded in.
#[derive(Debug, Clone, Copy, PartialEq)]
struct JointAtom {
    prob: f64,
    ret: f64,
    y: f64,
    eta_bs: f64,
}

/// Limit clearing maps with exact expectations over the product of atoms.
#[derive(Debug, Clone)]
pub struct LimitFinancialMaps {
    atoms: Vec<JointAtom>,
    z_c: f64,
    z_b: f64,
    v_s: f64,
    v_b: f64,
    k_b: f64,
    delta: f64,
    y_b: f64,
    mean_eta_bs: f64,
    bound: f64,
}

impl LimitFinancialMaps {
    pub fn new(params: &ValidatedParams, scenario: Scenario) -> Self {
        let p = params.params();
        let mut atoms = Vec::new();
        for &(z, pz) in p.shock_small.atoms() {
            for &(k, pk) in p.k_small.atoms() {
                for &(y, py) in p.y_small.atoms() {
                    for &(eta, pe) in p.eta_bs.atoms() {
                        let prob = pz * pk * py * pe;
                        if prob > 0.0 {
                            atoms.push(JointAtom {
                                prob,
                                ret: pos(k - scenario.z_c - z),
                                y,
                                eta_bs: eta,
                            });
                        }
                    }
                }
            }
        }
        let mean_eta_bs = params.p_bs_mean();
        Self {
            atoms,
            z_c: scenario.z_c,
            z_b: scenario.z_b,
            v_s: p.v_small,
            v_b: p.v_big,
            k_b: p.k_big,
            delta: p.delta,
            y_b: p.y_big,
            mean_eta_bs,
            bound: p.y_small.max_value().max(p.y_big / mean_eta_bs),
        }
    }

    pub fn phi_big(&self, xbar_b: f64) -> f64 {
        phi_big(self.k_b, self.delta, self.z_c, self.z_b, xbar_b, self.v_b)
    }

    fn capacity(&self, a: &JointAtom, xbar: f64, x_b: f64) -> f64 {
        pos(a.ret + xbar + a.eta_bs * x_b - self.v_s)
    }
}

impl LimitMaps for LimitFinancialMaps {
    fn expected_xi(&self, x_bar: f64, x_b: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.prob * self.capacity(a, x_bar, x_b).min(a.y))
            .sum()
    }

    fn f_big(&self, x_bar_b: f64) -> f64 {
        self.phi_big(x_bar_b).min(self.y_b) / self.mean_eta_bs
    }

    fn bound(&self) -> f64 {
        self.bound
    }
}

/// Greatest solution of the limit clearing equations.
pub fn solve_limit_clearing(
    params: &ValidatedParams,
    scenario: Scenario,
    opts: SolverOptions,
) -> Result<LimitSolution, FinanceError> {
    let maps = LimitFinancialMaps::new(params, scenario);
    Ok(solve_limit(&maps, params.p_sb(), LimitInit::FromUpper, opts)?)
}

/// Absolute residuals of the three limit clearing equations at `sol`:
/// the small aggregate, the big aggregate, and the big-bank payment.
pub fn limit_residuals(params: &ValidatedParams, scenario: Scenario, sol: &LimitSolution) -> [f64; 3] {
    let maps = LimitFinancialMaps::new(params, scenario);
    let p_sb = params.p_sb();
    let e = maps.expected_xi(sol.xbar_s, sol.x_big);
    [
        (sol.xbar_s - e * (1.0 - p_sb)).abs(),
        (sol.xbar_b - sol.xbar_s * p_sb / (1.0 - p_sb)).abs(),
        (sol.x_big - maps.f_big(sol.xbar_b)).abs(),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefaultMetrics {
    /// Limiting fraction of small banks in default.
    pub p_d_small: f64,
    pub big_defaults: bool,
}

/// Default probabilities at a limit solution. Ties (`Phi = Y`) are solvent.
pub fn default_metrics(sol: &LimitSolution, params: &ValidatedParams, scenario: Scenario) -> DefaultMetrics {
    let maps = LimitFinancialMaps::new(params, scenario);
    let p_d_small = maps
        .atoms
        .iter()
        .filter(|a| maps.capacity(a, sol.xbar_s, sol.x_big) < a.y - DEFAULT_TIE_TOL)
        .map(|a| a.prob)
        .sum::<f64>()
        .min(1.0);
    let big_defaults = maps.phi_big(sol.xbar_b) < params.params().y_big - DEFAULT_TIE_TOL;
    DefaultMetrics {
        p_d_small,
        big_defaults,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurplusReport {
    /// Expected surplus per small bank up to the first period.
    pub es1: f64,
    /// Expected surplus up to maturity; present only with recovery data.
    pub es2: Option<f64>,
    pub psi_small_dist: DiscreteDist,
    pub psi_big: f64,
}

impl SurplusReport {
    pub fn require_es2(&self) -> Result<f64, FinanceError> {
        self.es2.ok_or(FinanceError::MissingRecoveryParams)
    }
}

/// Net position after clearing, with recovery from broken bonds added back
/// only for banks that are short.
fn surplus_term(psi: f64, recovered: f64) -> f64 {
    if psi < 0.0 {
        pos(psi + recovered)
    } else {
        psi
    }
}

pub fn expected_surplus(sol: &LimitSolution, params: &ValidatedParams, scenario: Scenario) -> SurplusReport {
    let p = params.params();
    let maps = LimitFinancialMaps::new(params, scenario);
    let (rec_s, rec_b) = p
        .recovery
        .map_or((0.0, 0.0), |r| (r.rho_s * r.a_s, r.rho_b * r.a_b));

    let psi_atoms: Vec<(f64, f64)> = maps
        .atoms
        .iter()
        .map(|a| (a.ret + sol.xbar_s + sol.x_big * a.eta_bs - p.v_small - a.y, a.prob))
        .collect();
    let small: f64 = psi_atoms
        .iter()
        .map(|&(psi, prob)| prob * surplus_term(psi, rec_s))
        .sum();

    let p_sb = params.p_sb();
    let psi_big = pos(p.k_big - scenario.z_c * p.delta - scenario.z_b)
        + sol.xbar_s * p_sb / (1.0 - p_sb)
        - p.v_big
        - p.y_big;
    let es1 = small + surplus_term(psi_big, rec_b);

    let es2 = p.recovery.map(|r| {
        let metrics = default_metrics(sol, params, scenario);
        let big_survives = if metrics.big_defaults { 0.0 } else { 1.0 };
        es1 + (1.0 - metrics.p_d_small) * r.a_s + big_survives * r.a_b
    });
    let psi_small_dist =
        DiscreteDist::from_weighted(psi_atoms).expect("joint atoms carry unit mass");
    SurplusReport {
        es1,
        es2,
        psi_small_dist,
        psi_big,
    }
}

/// Flat summary of one limit solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitRecord {
    pub scenario: Scenario,
    pub xbar_s: f64,
    pub xbar_b: f64,
    pub x_big: f64,
    pub p_d_small: f64,
    pub big_defaults: bool,
    pub es1: f64,
    pub es2: Option<f64>,
}

pub fn limit_record(
    params: &ValidatedParams,
    scenario: Scenario,
    opts: SolverOptions,
) -> Result<LimitRecord, FinanceError> {
    let sol = solve_limit_clearing(params, scenario, opts)?;
    let metrics = default_metrics(&sol, params, scenario);
    let surplus = expected_surplus(&sol, params, scenario);
    Ok(LimitRecord {
        scenario,
        xbar_s: sol.xbar_s,
        xbar_b: sol.xbar_b,
        x_big: sol.x_big,
        p_d_small: metrics.p_d_small,
        big_defaults: metrics.big_defaults,
        es1: surplus.es1,
        es2: surplus.es2,
    })
}
