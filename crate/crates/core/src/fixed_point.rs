//! Generic fixed-point machinery for the small/big system.
//!
//! The finite system iterates payments `x` of the `n` small banks and the big
//! bank's payment `x_b` synchronously:
//!
//! ```text
//! x'_i  = f_small(G_i, sum_j x_j W_{j,i}, eta_bs_i * x_b)
//! x'_b  = f_big((1/n) sum_j x_j W_{j,b})
//! ```
//!
//! The limit system is the two-dimensional map on the aggregates
//! `(xbar, xbar_b)`:
//!
//! ```text
//! xbar'   = E[xi(xbar, f_big(xbar_b))] (1 - p_sb)
//! xbar_b' = E[xi(xbar, f_big(xbar_b))] p_sb
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{BankDraw, NetworkRealization};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FixedPointError {
    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid solver option: {0}")]
    InvalidOption(String),
}

/// Node maps of the finite system. Both maps must return values in
/// `[0, bound()]` and be non-decreasing for the sandwich guarantees of
/// [`solve_finite`] to hold.
pub trait SystemMaps {
    fn f_small(&self, g: &BankDraw, x_bar: f64, b_in: f64) -> f64;
    fn f_big(&self, x_bar_b: f64) -> f64;
    fn bound(&self) -> f64;
}

/// Maps of the two-dimensional limit system.
pub trait LimitMaps {
    /// `E[xi(x_bar, x_b)]` over the law of the per-bank draws.
    fn expected_xi(&self, x_bar: f64, x_b: f64) -> f64;
    fn f_big(&self, x_bar_b: f64) -> f64;
    fn bound(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl SolverOptions {
    fn check(&self) -> Result<(), FixedPointError> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(FixedPointError::InvalidOption(format!("tol = {}", self.tol)));
        }
        Ok(())
    }
}

/// Starting point of the finite iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum InitPolicy {
    /// Every component at the bound; reaches the greatest fixed point of
    /// monotone maps.
    FromUpper,
    /// Every component at zero; reaches the least fixed point of monotone maps.
    FromZero,
    Custom { x: Vec<f64>, x_b: f64 },
}

/// Finite-`n` fixed point with its aggregates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClearingVector {
    pub x_small: Vec<f64>,
    pub x_big: f64,
    /// `sum_j x_small[j] W_{j,i}`.
    pub agg_small: Vec<f64>,
    /// `(1/n) sum_j x_small[j] W_{j,b}`.
    pub agg_big: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Fixed point of the limit system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitSolution {
    pub xbar_s: f64,
    pub xbar_b: f64,
    /// Big-bank payment `f_big(xbar_b)` at the solution.
    pub x_big: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Reusable buffers for one synchronous pass of the finite operator.
struct Workspace {
    agg: Vec<f64>,
}

fn apply_into<M: SystemMaps>(
    x: &[f64],
    x_b: f64,
    net: &NetworkRealization,
    maps: &M,
    ws: &mut Workspace,
    out: &mut [f64],
) -> f64 {
    net.aggregate_small_into(x, &mut ws.agg);
    for (i, (o, &agg)) in out.iter_mut().zip(&ws.agg).enumerate() {
        let g = net.draw(i);
        *o = maps.f_small(g, agg, g.eta_bs * x_b);
    }
    maps.f_big(net.aggregate_big(x))
}

/// One synchronous application of the finite operator.
pub fn apply_finite_operator<M: SystemMaps>(
    x: &[f64],
    x_b: f64,
    net: &NetworkRealization,
    maps: &M,
) -> Result<(Vec<f64>, f64), FixedPointError> {
    if x.len() != net.n() {
        return Err(FixedPointError::DimensionMismatch {
            expected: net.n(),
            got: x.len(),
        });
    }
    let mut ws = Workspace {
        agg: vec![0.0; net.n()],
    };
    let mut out = vec![0.0; net.n()];
    let x_b_new = apply_into(x, x_b, net, maps, &mut ws, &mut out);
    Ok((out, x_b_new))
}

/// Sup-norm distance between `(x, x_b)` and its image under the operator.
pub fn finite_residual<M: SystemMaps>(
    x: &[f64],
    x_b: f64,
    net: &NetworkRealization,
    maps: &M,
) -> Result<f64, FixedPointError> {
    let (next, next_b) = apply_finite_operator(x, x_b, net, maps)?;
    Ok(sup_distance(x, &next).max((x_b - next_b).abs()))
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max)
}

/// Picard iteration of the finite operator until the sup-norm step is at
/// most `opts.tol`.
pub fn solve_finite<M: SystemMaps>(
    net: &NetworkRealization,
    maps: &M,
    init: InitPolicy,
    opts: SolverOptions,
) -> Result<ClearingVector, FixedPointError> {
    opts.check()?;
    let n = net.n();
    let bound = maps.bound();
    let (mut x, mut x_b) = match init {
        InitPolicy::FromUpper => (vec![bound; n], bound),
        InitPolicy::FromZero => (vec![0.0; n], 0.0),
        InitPolicy::Custom { x, x_b } => {
            if x.len() != n {
                return Err(FixedPointError::DimensionMismatch {
                    expected: n,
                    got: x.len(),
                });
            }
            (x, x_b)
        }
    };
    let mut ws = Workspace { agg: vec![0.0; n] };
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for iteration in 1..=opts.max_iter {
        let next_b = apply_into(&x, x_b, net, maps, &mut ws, &mut next);
        residual = sup_distance(&x, &next).max((x_b - next_b).abs());
        std::mem::swap(&mut x, &mut next);
        x_b = next_b;
        if residual <= opts.tol {
            let mut agg_small = vec![0.0; n];
            net.aggregate_small_into(&x, &mut agg_small);
            let agg_big = net.aggregate_big(&x);
            return Ok(ClearingVector {
                x_small: x,
                x_big: x_b,
                agg_small,
                agg_big,
                iterations: iteration,
                residual,
            });
        }
    }
    Err(FixedPointError::NoConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

/// Starting point of the limit iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitInit {
    FromUpper,
    FromZero,
    Custom { xbar_s: f64, xbar_b: f64 },
}

/// One application of the limit map to `(xbar, xbar_b)`; also returns `x_b`.
pub fn apply_limit_operator<M: LimitMaps>(
    maps: &M,
    p_sb: f64,
    xbar_s: f64,
    xbar_b: f64,
) -> (f64, f64, f64) {
    let x_b = maps.f_big(xbar_b);
    let e = maps.expected_xi(xbar_s, x_b);
    (e * (1.0 - p_sb), e * p_sb, x_b)
}

/// Iterates the limit map; the returned vector holds the sup-norm step of
/// every iteration.
pub fn solve_limit_traced<M: LimitMaps>(
    maps: &M,
    p_sb: f64,
    init: LimitInit,
    opts: SolverOptions,
) -> Result<(LimitSolution, Vec<f64>), FixedPointError> {
    opts.check()?;
    if !(p_sb > 0.0 && p_sb < 1.0) {
        return Err(FixedPointError::InvalidOption(format!("p_sb = {p_sb}")));
    }
    let bound = maps.bound();
    let (mut xs, mut xb) = match init {
        LimitInit::FromUpper => (bound, bound),
        LimitInit::FromZero => (0.0, 0.0),
        LimitInit::Custom { xbar_s, xbar_b } => (xbar_s, xbar_b),
    };
    let mut trace = Vec::new();
    for iteration in 1..=opts.max_iter {
        let (ns, nb, _) = apply_limit_operator(maps, p_sb, xs, xb);
        let residual = (ns - xs).abs().max((nb - xb).abs());
        trace.push(residual);
        xs = ns;
        xb = nb;
        if residual <= opts.tol {
            let sol = LimitSolution {
                xbar_s: xs,
                xbar_b: xb,
                x_big: maps.f_big(xb),
                iterations: iteration,
                residual,
            };
            return Ok((sol, trace));
        }
    }
    Err(FixedPointError::NoConvergence {
        iterations: opts.max_iter,
        residual: trace.last().copied().unwrap_or(f64::INFINITY),
    })
}

/// Solves the limit system from `init`. `FromUpper` gives the greatest fixed
/// point when the maps are non-decreasing.
pub fn solve_limit<M: LimitMaps>(
    maps: &M,
    p_sb: f64,
    init: LimitInit,
    opts: SolverOptions,
) -> Result<LimitSolution, FixedPointError> {
    solve_limit_traced(maps, p_sb, init, opts).map(|(sol, _)| sol)
}

/// Largest ratio `r_{k+1} / r_k` of successive steps in a trace, ignoring
/// steps at or below `floor` where rounding dominates.
pub fn max_step_ratio(trace: &[f64], floor: f64) -> Option<f64> {
    trace
        .windows(2)
        .filter(|w| w[0] > floor && w[1] > floor)
        .map(|w| w[1] / w[0])
        .reduce(f64::max)
}
