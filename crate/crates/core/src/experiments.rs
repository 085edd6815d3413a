//! Experiments: convergence of finite networks to the limit system,
//! connectivity sweeps with jump detection, and shock surfaces.

use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::binary_regime_solve;
use crate::finance::{default_metrics, solve_clearing, solve_limit_clearing, FinanceError};
use crate::fixed_point::{LimitSolution, SolverOptions};
use crate::graph::{derive_seed, regular_indicator, sample_network, GraphError};
use crate::model::{ModelError, Scenario, ValidatedParams};

/// Adjacent-point change in the default fraction that counts as a jump.
pub const DEFAULT_JUMP_THRESHOLD: f64 = 0.01;
/// Width of the bracket a detected jump is refined to.
pub const DEFAULT_REFINE_TOL: f64 = 1e-10;
/// Two default fractions closer than this are the same level.
pub const LEVEL_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid experiment setup: {0}")]
    InvalidSetup(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Finance(#[from] FinanceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Inclusive arithmetic grid parsed from `start:stop:step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self, ExperimentError> {
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
            return Err(ExperimentError::InvalidGrid("non-finite bound".into()));
        }
        if step <= 0.0 || stop < start {
            return Err(ExperimentError::InvalidGrid(format!(
                "need step > 0 and stop >= start, got {start}:{stop}:{step}"
            )));
        }
        Ok(Self { start, stop, step })
    }

    /// Grid with `count` evenly spaced points from `start` to `stop`.
    pub fn with_points(start: f64, stop: f64, count: usize) -> Result<Self, ExperimentError> {
        if count < 2 {
            return Err(ExperimentError::InvalidGrid("need at least two points".into()));
        }
        Self::new(start, stop, (stop - start) / (count - 1) as f64)
    }

    pub fn points(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| (self.start + i as f64 * self.step).min(self.stop))
            .collect()
    }
}

impl FromStr for GridSpec {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(ExperimentError::InvalidGrid(format!("expected start:stop:step, got {s:?}")));
        }
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| ExperimentError::InvalidGrid(format!("{t:?}: {e}")))
        };
        Self::new(num(parts[0])?, num(parts[1])?, num(parts[2])?)
    }
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    })
}

/// One `(n, seed)` cell of a convergence run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCell {
    pub n: usize,
    pub seed: u64,
    /// Seed the network was sampled with: `derive_seed(seed, n)`.
    pub network_seed: u64,
    /// `max_i |Xbar_i(n) - xbar*|`.
    pub sup_error_agg: Option<f64>,
    /// `|Xbar_b(n) - xbar_b*|`.
    pub err_agg_big: Option<f64>,
    /// `|X_b(n) - x_b*|`.
    pub err_big: Option<f64>,
    pub default_fraction: Option<f64>,
    pub default_frac_err: Option<f64>,
    pub iterations: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub n: usize,
    pub completed: usize,
    pub failed: usize,
    pub median_sup_error_agg: Option<f64>,
    pub median_err_agg_big: Option<f64>,
    pub median_err_big: Option<f64>,
    pub median_default_fraction: Option<f64>,
    pub median_default_frac_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub scenario: Scenario,
    pub n_values: Vec<usize>,
    pub seeds: Vec<u64>,
    pub limit: LimitSolution,
    pub limit_p_d_small: f64,
    pub cells: Vec<ConvergenceCell>,
    pub summary: Vec<ConvergenceSummary>,
}

impl ConvergenceReport {
    pub fn summary_for(&self, n: usize) -> Option<&ConvergenceSummary> {
        self.summary.iter().find(|s| s.n == n)
    }
}

fn convergence_cell(
    params: &ValidatedParams,
    scenario: Scenario,
    limit: &LimitSolution,
    limit_p_d: f64,
    n: usize,
    seed: u64,
) -> ConvergenceCell {
    let network_seed = derive_seed(seed, n as u64);
    let mut cell = ConvergenceCell {
        n,
        seed,
        network_seed,
        sup_error_agg: None,
        err_agg_big: None,
        err_big: None,
        default_fraction: None,
        default_frac_err: None,
        iterations: None,
        error: None,
    };
    let outcome = params
        .modify(|p| p.n = n)
        .map_err(GraphError::from)
        .and_then(|sized| sample_network(&sized, network_seed).map(|net| (sized, net)))
        .map_err(ExperimentError::from)
        .and_then(|(sized, net)| Ok(solve_clearing(&net, &sized, scenario)?));
    match outcome {
        Ok(out) => {
            let v = &out.vector;
            let sup = v
                .agg_small
                .iter()
                .map(|a| (a - limit.xbar_s).abs())
                .fold(0.0, f64::max);
            let frac = out.default_fraction();
            cell.sup_error_agg = Some(sup);
            cell.err_agg_big = Some((v.agg_big - limit.xbar_b).abs());
            cell.err_big = Some((v.x_big - limit.x_big).abs());
            cell.default_fraction = Some(frac);
            cell.default_frac_err = Some((frac - limit_p_d).abs());
            cell.iterations = Some(v.iterations);
        }
        Err(e) => cell.error = Some(e.to_string()),
    }
    cell
}

/// Samples a network and solves it for every `(n, seed)` pair, comparing the
/// aggregates with the limit solution. Per-cell failures are recorded.
pub fn run_convergence(
    params: &ValidatedParams,
    scenario: Scenario,
    n_list: &[usize],
    seeds: &[u64],
) -> Result<ConvergenceReport, ExperimentError> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExperimentError::InvalidSetup("n values must be strictly increasing".into()));
    }
    if seeds.len() < 5 {
        return Err(ExperimentError::InvalidSetup(format!(
            "need at least 5 seeds, got {}",
            seeds.len()
        )));
    }
    let limit = solve_limit_clearing(params, scenario, SolverOptions::default())?;
    let limit_p_d = default_metrics(&limit, params, scenario).p_d_small;

    let jobs: Vec<(usize, u64)> = n_list
        .iter()
        .flat_map(|&n| seeds.iter().map(move |&s| (n, s)))
        .collect();
    let cells: Vec<ConvergenceCell> = jobs
        .par_iter()
        .map(|&(n, seed)| convergence_cell(params, scenario, &limit, limit_p_d, n, seed))
        .collect();

    let summary = n_list
        .iter()
        .map(|&n| {
            let ok: Vec<&ConvergenceCell> =
                cells.iter().filter(|c| c.n == n && c.error.is_none()).collect();
            let med = |f: fn(&ConvergenceCell) -> Option<f64>| {
                let mut v: Vec<f64> = ok.iter().filter_map(|c| f(c)).collect();
                median(&mut v)
            };
            ConvergenceSummary {
                n,
                completed: ok.len(),
                failed: seeds.len() - ok.len(),
                median_sup_error_agg: med(|c| c.sup_error_agg),
                median_err_agg_big: med(|c| c.err_agg_big),
                median_err_big: med(|c| c.err_big),
                median_default_fraction: med(|c| c.default_fraction),
                median_default_frac_err: med(|c| c.default_frac_err),
            }
        })
        .collect();

    Ok(ConvergenceReport {
        scenario,
        n_values: n_list.to_vec(),
        seeds: seeds.to_vec(),
        limit,
        limit_p_d_small: limit_p_d,
        cells,
        summary,
    })
}

/// One point of a connectivity sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub param: f64,
    pub p_d_small: Option<f64>,
    pub big_defaults: Option<bool>,
    pub xbar: Option<f64>,
    /// Closed-form regime, when the binary-shock hypotheses hold.
    pub regime: Option<u8>,
    pub analytic_applicable: bool,
    pub analytic_p_d_small: Option<f64>,
    pub analytic_xbar: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    /// Midpoint of the refined bracket.
    pub location: f64,
    pub bracket: (f64, f64),
    pub from: f64,
    pub to: f64,
    /// `|to - from|`.
    pub size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCurve {
    pub axis: String,
    pub scenario: Scenario,
    pub grid: Vec<f64>,
    pub points: Vec<CurvePoint>,
    pub jumps: Vec<Jump>,
}

impl PhaseCurve {
    /// Largest analytic/numeric disagreement over applicable points as
    /// `(default fraction, xbar)`.
    pub fn max_analytic_gap(&self) -> (f64, f64) {
        self.points
            .iter()
            .filter(|p| p.analytic_applicable)
            .fold((0.0, 0.0), |(gp, gx), p| {
                let dp = (p.p_d_small.unwrap_or(f64::NAN) - p.analytic_p_d_small.unwrap_or(f64::NAN)).abs();
                let dx = (p.xbar.unwrap_or(f64::NAN) - p.analytic_xbar.unwrap_or(f64::NAN)).abs();
                (f64::max(gp, dp), f64::max(gx, dx))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub jump_threshold: f64,
    pub refine_tol: f64,
    pub solver: SolverOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            jump_threshold: DEFAULT_JUMP_THRESHOLD,
            refine_tol: DEFAULT_REFINE_TOL,
            solver: SolverOptions::default(),
        }
    }
}

fn limit_at_connectivity(
    params: &ValidatedParams,
    scenario: Scenario,
    p_bs: f64,
    solver: SolverOptions,
) -> Result<(LimitSolution, f64, bool), ExperimentError> {
    let econ = regular_indicator(params, p_bs)?;
    let sol = solve_limit_clearing(&econ, scenario, solver)?;
    let m = default_metrics(&sol, &econ, scenario);
    Ok((sol, m.p_d_small, m.big_defaults))
}

fn curve_point(params: &ValidatedParams, scenario: Scenario, p_bs: f64, solver: SolverOptions) -> CurvePoint {
    let mut point = CurvePoint {
        param: p_bs,
        p_d_small: None,
        big_defaults: None,
        xbar: None,
        regime: None,
        analytic_applicable: false,
        analytic_p_d_small: None,
        analytic_xbar: None,
        error: None,
    };
    match limit_at_connectivity(params, scenario, p_bs, solver) {
        Ok((sol, p_d, big)) => {
            point.p_d_small = Some(p_d);
            point.big_defaults = Some(big);
            point.xbar = Some(sol.xbar_s);
        }
        Err(e) => point.error = Some(e.to_string()),
    }
    if let Ok(r) = binary_regime_solve(params, scenario, p_bs) {
        point.regime = Some(r.regime);
        point.analytic_applicable = r.applicable;
        point.analytic_p_d_small = Some(r.p_d_small);
        point.analytic_xbar = Some(r.xbar);
    }
    point
}

/// Narrows `[lo, hi]` around a change of the default fraction from `from` to
/// `to`, classifying each midpoint by the nearer of the two levels.
fn refine_jump(
    params: &ValidatedParams,
    scenario: Scenario,
    (mut lo, mut hi): (f64, f64),
    (mut from, mut to): (f64, f64),
    opts: SweepOptions,
) -> Jump {
    let (from0, to0) = (from, to);
    while hi - lo > opts.refine_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match limit_at_connectivity(params, scenario, mid, opts.solver) {
            Ok((_, p_d, _)) => {
                if (p_d - from0).abs() <= (p_d - to0).abs() {
                    lo = mid;
                    from = p_d;
                } else {
                    hi = mid;
                    to = p_d;
                }
            }
            Err(_) => break,
        }
    }
    Jump {
        location: 0.5 * (lo + hi),
        bracket: (lo, hi),
        from,
        to,
        size: (to - from).abs(),
    }
}

/// Limit solve over a grid of connectivities `p_bs` in the regular indicator
/// economy, with the closed form alongside and refined jumps.
pub fn sweep_pbs(
    params: &ValidatedParams,
    scenario: Scenario,
    grid: &[f64],
    opts: SweepOptions,
) -> Result<PhaseCurve, ExperimentError> {
    if let Some(&bad) = grid.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        return Err(ExperimentError::InvalidGrid(format!("p_bs = {bad} outside (0, 1)")));
    }
    let points: Vec<CurvePoint> = grid
        .par_iter()
        .map(|&p| curve_point(params, scenario, p, opts.solver))
        .collect();
    let candidates: Vec<((f64, f64), (f64, f64))> = points
        .windows(2)
        .filter_map(|w| match (w[0].p_d_small, w[1].p_d_small) {
            (Some(a), Some(b)) if (b - a).abs() > opts.jump_threshold => {
                Some(((w[0].param, w[1].param), (a, b)))
            }
            _ => None,
        })
        .collect();
    // A grid step can exceed the threshold on a continuous slope; only changes
    // that survive refinement are discontinuities.
    let jumps = candidates
        .par_iter()
        .map(|&(bracket, levels)| refine_jump(params, scenario, bracket, levels, opts))
        .filter(|j| j.size > opts.jump_threshold)
        .collect();
    Ok(PhaseCurve {
        axis: "p_bs".into(),
        scenario,
        grid: grid.to_vec(),
        points,
        jumps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub z_b: f64,
    pub z_c: f64,
    pub p_d_small: Option<f64>,
    pub big_defaults: Option<bool>,
    pub xbar: Option<f64>,
    pub error: Option<String>,
}

/// Shock coordinate along which two adjacent grid points differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShockAxis {
    #[serde(rename = "z_c")]
    Common,
    #[serde(rename = "z_b")]
    Big,
}

/// A change of level between two adjacent grid points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelChange {
    pub axis: ShockAxis,
    pub z_b: f64,
    pub z_c: f64,
    pub next: f64,
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSurface {
    pub p_bs: f64,
    pub zb_grid: Vec<f64>,
    pub zc_grid: Vec<f64>,
    /// Row-major over `zb_grid`, then `zc_grid`.
    pub points: Vec<SurfacePoint>,
    /// Distinct small-bank default levels, ascending.
    pub levels: Vec<f64>,
    pub small_boundaries: Vec<LevelChange>,
    pub big_boundaries: Vec<LevelChange>,
}

impl PhaseSurface {
    pub fn at(&self, zb_idx: usize, zc_idx: usize) -> &SurfacePoint {
        &self.points[zb_idx * self.zc_grid.len() + zc_idx]
    }

    /// Small-bank level changes along increasing `z_c` at `z_b = zb_grid[zb_idx]`.
    pub fn small_transitions_along_zc(&self, zb_idx: usize) -> Vec<LevelChange> {
        let z_b = self.zb_grid[zb_idx];
        self.small_boundaries
            .iter()
            .filter(|c| c.axis == ShockAxis::Common && c.z_b == z_b)
            .copied()
            .collect()
    }

    /// Big-bank changes along increasing `z_b` at `z_c = zc_grid[zc_idx]`.
    pub fn big_transitions_along_zb(&self, zc_idx: usize) -> Vec<LevelChange> {
        let z_c = self.zc_grid[zc_idx];
        self.big_boundaries
            .iter()
            .filter(|c| c.axis == ShockAxis::Big && c.z_c == z_c)
            .copied()
            .collect()
    }

    /// Big-bank changes along increasing `z_c` at `z_b = zb_grid[zb_idx]`.
    pub fn big_transitions_along_zc(&self, zb_idx: usize) -> Vec<LevelChange> {
        let z_b = self.zb_grid[zb_idx];
        self.big_boundaries
            .iter()
            .filter(|c| c.axis == ShockAxis::Common && c.z_b == z_b)
            .copied()
            .collect()
    }

    pub fn failed_points(&self) -> usize {
        self.points.iter().filter(|p| p.error.is_some()).count()
    }
}

fn level_changes<F>(surface: &PhaseSurface, value: F) -> Vec<LevelChange>
where
    F: Fn(&SurfacePoint) -> Option<f64>,
{
    let (nb, nc) = (surface.zb_grid.len(), surface.zc_grid.len());
    let mut out = Vec::new();
    for ib in 0..nb {
        for ic in 0..nc {
            let here = surface.at(ib, ic);
            let Some(a) = value(here) else { continue };
            if ic + 1 < nc {
                if let Some(b) = value(surface.at(ib, ic + 1)) {
                    if (a - b).abs() > LEVEL_TOL {
                        out.push(LevelChange {
                            axis: ShockAxis::Common,
                            z_b: here.z_b,
                            z_c: here.z_c,
                            next: surface.zc_grid[ic + 1],
                            from: a,
                            to: b,
                        });
                    }
                }
            }
            if ib + 1 < nb {
                if let Some(b) = value(surface.at(ib + 1, ic)) {
                    if (a - b).abs() > LEVEL_TOL {
                        out.push(LevelChange {
                            axis: ShockAxis::Big,
                            z_b: here.z_b,
                            z_c: here.z_c,
                            next: surface.zb_grid[ib + 1],
                            from: a,
                            to: b,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Limit solve over a `(z_b, z_c)` grid in the regular indicator economy with
/// connectivity `p_bs`.
pub fn sweep_shocks(
    params: &ValidatedParams,
    p_bs: f64,
    zb_grid: &[f64],
    zc_grid: &[f64],
    solver: SolverOptions,
) -> Result<PhaseSurface, ExperimentError> {
    if zb_grid.is_empty() || zc_grid.is_empty() {
        return Err(ExperimentError::InvalidGrid("empty shock grid".into()));
    }
    let econ = regular_indicator(params, p_bs)?;
    let cells: Vec<(f64, f64)> = zb_grid
        .iter()
        .flat_map(|&zb| zc_grid.iter().map(move |&zc| (zb, zc)))
        .collect();
    let points: Vec<SurfacePoint> = cells
        .par_iter()
        .map(|&(z_b, z_c)| {
            let mut point = SurfacePoint {
                z_b,
                z_c,
                p_d_small: None,
                big_defaults: None,
                xbar: None,
                error: None,
            };
            let solved = Scenario::new(z_c, z_b)
                .map_err(ExperimentError::from)
                .and_then(|s| Ok((s, solve_limit_clearing(&econ, s, solver)?)));
            match solved {
                Ok((s, sol)) => {
                    let m = default_metrics(&sol, &econ, s);
                    point.p_d_small = Some(m.p_d_small);
                    point.big_defaults = Some(m.big_defaults);
                    point.xbar = Some(sol.xbar_s);
                }
                Err(e) => point.error = Some(e.to_string()),
            }
            point
        })
        .collect();

    let mut levels: Vec<f64> = points.iter().filter_map(|p| p.p_d_small).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup_by(|a, b| (*a - *b).abs() <= LEVEL_TOL);

    let mut surface = PhaseSurface {
        p_bs,
        zb_grid: zb_grid.to_vec(),
        zc_grid: zc_grid.to_vec(),
        points,
        levels,
        small_boundaries: Vec::new(),
        big_boundaries: Vec::new(),
    };
    surface.small_boundaries = level_changes(&surface, |p| p.p_d_small);
    surface.big_boundaries =
        level_changes(&surface, |p| p.big_defaults.map(|b| if b { 1.0 } else { 0.0 }));
    Ok(surface)
}

#[derive(Serialize)]
struct ConvergenceRow<'a> {
    n: usize,
    seed: u64,
    network_seed: u64,
    sup_error_agg: Option<f64>,
    err_agg_big: Option<f64>,
    err_big: Option<f64>,
    default_fraction: Option<f64>,
    default_frac_err: Option<f64>,
    iterations: Option<usize>,
    error: Option<&'a str>,
}

#[derive(Serialize)]
struct CurveRow<'a> {
    param: f64,
    p_d_small: Option<f64>,
    regime: Option<u8>,
    xbar: Option<f64>,
    big_defaults: Option<bool>,
    analytic_applicable: bool,
    analytic_p_d_small: Option<f64>,
    analytic_xbar: Option<f64>,
    error: Option<&'a str>,
}

#[derive(Serialize)]
struct SurfaceRow<'a> {
    z_b: f64,
    z_c: f64,
    p_d_small: Option<f64>,
    big_defaults: Option<bool>,
    xbar: Option<f64>,
    error: Option<&'a str>,
}

fn write_rows<T: Serialize>(path: &Path, rows: impl Iterator<Item = T>) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_convergence_csv(report: &ConvergenceReport, path: &Path) -> Result<(), ExperimentError> {
    write_rows(
        path,
        report.cells.iter().map(|c| ConvergenceRow {
            n: c.n,
            seed: c.seed,
            network_seed: c.network_seed,
            sup_error_agg: c.sup_error_agg,
            err_agg_big: c.err_agg_big,
            err_big: c.err_big,
            default_fraction: c.default_fraction,
            default_frac_err: c.default_frac_err,
            iterations: c.iterations,
            error: c.error.as_deref(),
        }),
    )
}

pub fn write_curve_csv(curve: &PhaseCurve, path: &Path) -> Result<(), ExperimentError> {
    write_rows(
        path,
        curve.points.iter().map(|p| CurveRow {
            param: p.param,
            p_d_small: p.p_d_small,
            regime: p.regime,
            xbar: p.xbar,
            big_defaults: p.big_defaults,
            analytic_applicable: p.analytic_applicable,
            analytic_p_d_small: p.analytic_p_d_small,
            analytic_xbar: p.analytic_xbar,
            error: p.error.as_deref(),
        }),
    )
}

pub fn write_surface_csv(surface: &PhaseSurface, path: &Path) -> Result<(), ExperimentError> {
    write_rows(
        path,
        surface.points.iter().map(|p| SurfaceRow {
            z_b: p.z_b,
            z_c: p.z_c,
            p_d_small: p.p_d_small,
            big_defaults: p.big_defaults,
            xbar: p.xbar,
            error: p.error.as_deref(),
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::shock_figure_params;
    use crate::model::DiscreteDist;

    fn figure() -> ValidatedParams {
        shock_figure_params(100).validate().unwrap()
    }

    #[test]
    fn grid_parsing() {
        let g: GridSpec = "0:1:0.25".parse().unwrap();
        assert_eq!(g.points(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g: GridSpec = "0:0.3:0.1".parse().unwrap();
        assert_eq!(g.points().len(), 4);
        assert!("0:1".parse::<GridSpec>().is_err());
        assert!("0:1:0".parse::<GridSpec>().is_err());
        assert!("1:0:0.1".parse::<GridSpec>().is_err());
        assert!("a:1:0.1".parse::<GridSpec>().is_err());
        assert_eq!(GridSpec::with_points(0.0, 60.0, 100).unwrap().points().len(), 100);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&mut []), None);
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }

    #[test]
    fn constant_capacity_has_zero_aggregate_error() {
        // Every bank clears in full regardless of inflows: aggregates are
        // deterministic for any complete graph.
        let params = figure()
            .modify(|p| {
                p.k_small = DiscreteDist::point(200.0);
                p.k_big = 500.0;
                p.eta_sb = DiscreteDist::point(0.5);
                p.eta_bs = DiscreteDist::point(0.5);
                p.y_big = 40.0;
            })
            .unwrap();
        let report =
            run_convergence(&params, Scenario::default(), &[10, 20], &[1, 2, 3, 4, 5]).unwrap();
        for c in &report.cells {
            assert!(c.sup_error_agg.unwrap() < 1e-12, "{c:?}");
            assert_eq!(c.default_fraction, Some(0.0));
        }
        assert_eq!(report.cells.len(), 10);
    }

    #[test]
    fn convergence_setup_errors() {
        let p = figure();
        let s = Scenario::default();
        assert!(run_convergence(&p, s, &[20, 10], &[1, 2, 3, 4, 5]).is_err());
        assert!(run_convergence(&p, s, &[10, 20], &[1, 2, 3]).is_err());
    }

    #[test]
    fn convergence_records_failed_cells() {
        // n = 1 cannot carry a small-bank network.
        let report =
            run_convergence(&figure(), Scenario::default(), &[1, 30], &[1, 2, 3, 4, 5]).unwrap();
        let s1 = report.summary_for(1).unwrap();
        assert_eq!((s1.completed, s1.failed), (0, 5));
        assert_eq!(report.summary_for(30).unwrap().completed, 5);
    }

    #[test]
    fn convergence_is_reproducible() {
        let run = || {
            run_convergence(&figure(), Scenario::default(), &[40, 80], &[7, 8, 9, 10, 11]).unwrap()
        };
        assert_eq!(
            serde_json::to_string(&run()).unwrap(),
            serde_json::to_string(&run()).unwrap()
        );
    }

    #[test]
    fn sweep_finds_first_jump() {
        // k_lower - v = 8 - 3 = 5, so the first jump is at p_bs = 1/16.
        let params = figure().modify(|p| p.v_small = 0.0).unwrap();
        let grid = GridSpec::new(0.01, 0.2, 0.001).unwrap().points();
        let curve = sweep_pbs(&params, Scenario::default(), &grid, SweepOptions::default()).unwrap();
        let first = curve.jumps.first().expect("a jump");
        let at = 5.0 / 80.0;
        assert!((first.location - at).abs() < 1e-6, "{first:?}");
        assert!((first.size - 0.4 * (1.0 - at)).abs() < 1e-8, "{first:?}");
        for p in curve.points.iter().filter(|p| p.param < at) {
            assert_eq!(p.p_d_small, Some(0.0));
        }
        let (gp, gx) = curve.max_analytic_gap();
        assert!(gp <= 1e-10 && gx <= 1e-8, "{gp} {gx}");
    }

    #[test]
    fn sweep_ignores_continuous_slopes_as_steep_as_the_threshold() {
        // In regime 3 the default fraction is 1 - p_bs, so each 0.01 step
        // moves it by the threshold without any discontinuity.
        let grid = GridSpec::new(0.01, 0.99, 0.01).unwrap().points();
        let curve = sweep_pbs(&figure(), Scenario::default(), &grid, SweepOptions::default()).unwrap();
        assert!(curve.jumps.len() < 5, "{:?}", curve.jumps);
        assert!(curve.jumps.iter().all(|j| j.size > 0.01), "{:?}", curve.jumps);
        assert!(curve
            .jumps
            .iter()
            .any(|j| j.location > 0.9 && j.location < 0.91 && j.to > j.from + 0.3));
    }

    #[test]
    fn sweep_rejects_out_of_range_grid() {
        assert!(sweep_pbs(&figure(), Scenario::default(), &[0.0, 0.5], SweepOptions::default())
            .is_err());
    }

    #[test]
    fn shock_surface_levels() {
        let zb = GridSpec::with_points(0.0, 60.0, 25).unwrap().points();
        let zc = GridSpec::with_points(0.0, 30.0, 25).unwrap().points();
        let surface = sweep_shocks(&figure(), 0.9, &zb, &zc, SolverOptions::default()).unwrap();
        assert_eq!(surface.failed_points(), 0);
        for l in &surface.levels {
            assert!([0.1, 0.46, 1.0].iter().any(|t| (t - l).abs() < 1e-9), "{l}");
        }
        let origin = surface.at(0, 0);
        assert!((origin.p_d_small.unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(origin.big_defaults, Some(false));
        assert_eq!(surface.small_transitions_along_zc(0).len(), 2);
        assert_eq!(surface.big_transitions_along_zb(0).len(), 1);
    }

    #[test]
    fn csv_outputs_have_headers() {
        let dir = std::env::temp_dir().join(format!("sysrisk-exp-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let surface =
            sweep_shocks(&figure(), 0.9, &[0.0, 10.0], &[0.0, 5.0], SolverOptions::default()).unwrap();
        let path = dir.join("surface.csv");
        write_surface_csv(&surface, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("z_b,z_c,p_d_small,big_defaults"));
        assert_eq!(text.lines().count(), 5);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
