//! Economy configuration: finite discrete laws, the scalar parameters of one
//! economy, and shock scenarios.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the total mass of a [`DiscreteDist`].
pub const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid distribution `{name}`: {reason}")]
    InvalidDistribution { name: String, reason: String },
    #[error("E[eta_sb] = {0} must lie strictly inside (0, 1)")]
    DegenerateEtaSB(f64),
    #[error("total liability law has a non-positive atom {0}")]
    NonPositiveLiability(f64),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("operation requires a deterministic (point-mass) total liability")]
    RequiresDeterministicY,
}

/// A finite discrete law given as `(value, probability)` atoms.
///
/// Serialized as an array of `[value, prob]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct DiscreteDist {
    atoms: Vec<(f64, f64)>,
    cumulative: Vec<f64>,
}

impl DiscreteDist {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self, ModelError> {
        let invalid = |reason: String| ModelError::InvalidDistribution {
            name: String::new(),
            reason,
        };
        if atoms.is_empty() {
            return Err(invalid("no atoms".into()));
        }
        let mut total = 0.0;
        for &(value, prob) in &atoms {
            if !value.is_finite() {
                return Err(invalid(format!("non-finite atom value {value}")));
            }
            if !prob.is_finite() || prob < 0.0 {
                return Err(invalid(format!("invalid probability {prob}")));
            }
            total += prob;
        }
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(invalid(format!("probabilities sum to {total}")));
        }
        let cumulative = atoms
            .iter()
            .scan(0.0, |acc, &(_, p)| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        Ok(Self { atoms, cumulative })
    }

    pub fn point(value: f64) -> Self {
        Self::new(vec![(value, 1.0)]).expect("finite point mass")
    }

    /// Binary shock law: `0` with probability `1 - w`, `eps` with probability `w`.
    pub fn binary(w: f64, eps: f64) -> Result<Self, ModelError> {
        Self::new(vec![(0.0, 1.0 - w), (eps, w)])
    }

    /// `{0, 1}`-valued law with mean `p`.
    pub fn indicator(p: f64) -> Result<Self, ModelError> {
        Self::binary(p, 1.0)
    }

    /// Builds a law from weighted values, merging exactly equal values and
    /// dropping zero-mass atoms.
    pub fn from_weighted<I>(items: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut items: Vec<(f64, f64)> = items.into_iter().filter(|&(_, p)| p > 0.0).collect();
        items.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(items.len());
        for (v, p) in items {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => merged.push((v, p)),
            }
        }
        Self::new(merged)
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// Atoms carrying positive probability.
    pub fn support(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().copied().filter(|&(_, p)| p > 0.0)
    }

    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.atoms.iter().map(|&(v, p)| p * f(v)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|v| v)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expect(|v| (v - m) * (v - m))
    }

    pub fn min_value(&self) -> f64 {
        self.support().map(|(v, _)| v).fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.support().map(|(v, _)| v).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_point_mass(&self) -> bool {
        let mut support = self.support();
        match support.next() {
            Some((v, _)) => support.all(|(u, _)| u == v),
            None => false,
        }
    }

    /// Value of a point mass, if this law is one.
    pub fn point_value(&self) -> Option<f64> {
        self.is_point_mass().then(|| self.min_value())
    }

    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.support().all(|(v, _)| v >= lo && v <= hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.atoms.len() == 1 {
            return self.atoms[0].0;
        }
        let total = *self.cumulative.last().unwrap();
        let u = rng.gen::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.atoms[idx.min(self.atoms.len() - 1)].0
    }
}

impl TryFrom<Vec<(f64, f64)>> for DiscreteDist {
    type Error = ModelError;

    fn try_from(atoms: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        Self::new(atoms)
    }
}

impl From<DiscreteDist> for Vec<(f64, f64)> {
    fn from(d: DiscreteDist) -> Self {
        d.atoms
    }
}

/// Bond-breaking recovery data for the three-period variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recovery {
    pub rho_s: f64,
    pub rho_b: f64,
    pub a_s: f64,
    pub a_b: f64,
}

/// Parameters of one economy: `n` small banks and one big bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub n: usize,
    /// Small-to-small link probability.
    pub p_ss: f64,
    /// Law of the liability fraction a small bank owes the big bank.
    pub eta_sb: DiscreteDist,
    /// Law of the claim weight a small bank holds on the big bank.
    pub eta_bs: DiscreteDist,
    /// Law of the idiosyncratic small-bank shock.
    pub shock_small: DiscreteDist,
    /// Law of the anticipated small-bank return.
    pub k_small: DiscreteDist,
    /// Law of the small-bank total liability.
    pub y_small: DiscreteDist,
    /// Big-bank liability per small bank.
    pub y_big: f64,
    /// Big-bank anticipated return per small bank.
    pub k_big: f64,
    pub v_small: f64,
    pub v_big: f64,
    /// Multiplier of the common shock felt by the big bank.
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery: Option<Recovery>,
}

impl ModelParams {
    pub fn validate(self) -> Result<ValidatedParams, ModelError> {
        validate_params(self)
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }
}

/// Realized common shock `z_c` and big-bank idiosyncratic shock `z_b`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scenario {
    pub z_c: f64,
    pub z_b: f64,
}

impl Scenario {
    pub fn new(z_c: f64, z_b: f64) -> Result<Self, ModelError> {
        for (name, v) in [("z_c", z_c), ("z_b", z_b)] {
            if !v.is_finite() || v < 0.0 {
                return Err(ModelError::InvalidParameter {
                    name,
                    reason: format!("{v} must be finite and non-negative"),
                });
            }
        }
        Ok(Self { z_c, z_b })
    }
}

/// Parameters that passed [`validate_params`], with cached moments.
///
/// Immutable once built; share freely across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedParams {
    params: ModelParams,
    p_sb: f64,
    p_bs_mean: f64,
    mean_y: f64,
}

impl ValidatedParams {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn into_inner(self) -> ModelParams {
        self.params
    }

    /// `E[eta_sb]`.
    pub fn p_sb(&self) -> f64 {
        self.p_sb
    }

    /// `E[eta_bs]`.
    pub fn p_bs_mean(&self) -> f64 {
        self.p_bs_mean
    }

    pub fn mean_y(&self) -> f64 {
        self.mean_y
    }

    /// Expected post-shock small-bank return `E[(K - z_c - Z)^+]`.
    pub fn k_bar_z(&self, z_c: f64) -> f64 {
        let p = &self.params;
        p.k_small
            .atoms()
            .iter()
            .map(|&(k, pk)| pk * p.shock_small.expect(|z| (k - z_c - z).max(0.0)))
            .sum()
    }

    /// Worst and best post-shock small-bank returns given `z_c`.
    pub fn return_range(&self, z_c: f64) -> (f64, f64) {
        let p = &self.params;
        let lo = (p.k_small.min_value() - z_c - p.shock_small.max_value()).max(0.0);
        let hi = (p.k_small.max_value() - z_c - p.shock_small.min_value()).max(0.0);
        (lo, hi)
    }

    /// Returns a copy with modified raw parameters, re-validated.
    pub fn modify<F: FnOnce(&mut ModelParams)>(&self, f: F) -> Result<Self, ModelError> {
        let mut params = self.params.clone();
        f(&mut params);
        validate_params(params)
    }
}

fn check_dist(name: &str, d: &DiscreteDist, lo: f64, hi: f64) -> Result<(), ModelError> {
    if !d.within(lo, hi) {
        return Err(ModelError::InvalidDistribution {
            name: name.to_string(),
            reason: format!("support must lie in [{lo}, {hi}]"),
        });
    }
    Ok(())
}

fn check_scalar(name: &'static str, v: f64, positive: bool) -> Result<(), ModelError> {
    let ok = v.is_finite() && if positive { v > 0.0 } else { v >= 0.0 };
    if !ok {
        let bound = if positive { "> 0" } else { ">= 0" };
        return Err(ModelError::InvalidParameter {
            name,
            reason: format!("{v} must be finite and {bound}"),
        });
    }
    Ok(())
}

pub fn validate_params(params: ModelParams) -> Result<ValidatedParams, ModelError> {
    for (name, d) in [
        ("eta_sb", &params.eta_sb),
        ("eta_bs", &params.eta_bs),
        ("shock_small", &params.shock_small),
        ("k_small", &params.k_small),
        ("y_small", &params.y_small),
    ] {
        DiscreteDist::new(d.atoms().to_vec()).map_err(|e| match e {
            ModelError::InvalidDistribution { reason, .. } => ModelError::InvalidDistribution {
                name: name.to_string(),
                reason,
            },
            other => other,
        })?;
    }
    if params.n == 0 {
        return Err(ModelError::InvalidParameter {
            name: "n",
            reason: "must be positive".into(),
        });
    }
    if !(params.p_ss > 0.0 && params.p_ss <= 1.0) {
        return Err(ModelError::InvalidParameter {
            name: "p_ss",
            reason: format!("{} must lie in (0, 1]", params.p_ss),
        });
    }
    check_dist("eta_sb", &params.eta_sb, 0.0, 1.0)?;
    check_dist("eta_bs", &params.eta_bs, 0.0, 1.0)?;
    check_dist("shock_small", &params.shock_small, 0.0, f64::INFINITY)?;
    check_dist("k_small", &params.k_small, 0.0, f64::INFINITY)?;
    if let Some((y, _)) = params.y_small.support().find(|&(y, _)| y <= 0.0) {
        return Err(ModelError::NonPositiveLiability(y));
    }
    check_scalar("y_big", params.y_big, true)?;
    check_scalar("k_big", params.k_big, false)?;
    check_scalar("v_small", params.v_small, false)?;
    check_scalar("v_big", params.v_big, false)?;
    check_scalar("delta", params.delta, false)?;
    if let Some(r) = params.recovery {
        check_scalar("recovery.rho_s", r.rho_s, false)?;
        check_scalar("recovery.rho_b", r.rho_b, false)?;
        check_scalar("recovery.a_s", r.a_s, false)?;
        check_scalar("recovery.a_b", r.a_b, false)?;
    }

    let p_sb = params.eta_sb.mean();
    if !(p_sb > 0.0 && p_sb < 1.0) {
        return Err(ModelError::DegenerateEtaSB(p_sb));
    }
    let p_bs_mean = params.eta_bs.mean();
    if p_bs_mean <= 0.0 {
        return Err(ModelError::InvalidParameter {
            name: "eta_bs",
            reason: "mean must be positive".into(),
        });
    }
    let mean_y = params.y_small.mean();
    Ok(ValidatedParams {
        params,
        p_sb,
        p_bs_mean,
        mean_y,
    })
}


#[cfg(test)]
mod tests {
    use super::fixtures::shock_figure_params;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn point_mass_eta_sb_is_accepted() {
        let mut p = shock_figure_params(10);
        p.eta_sb = DiscreteDist::point(0.5);
        let v = p.validate().unwrap();
        assert_eq!(v.p_sb(), 0.5);
    }

    #[test]
    fn unit_eta_sb_is_degenerate() {
        let mut p = shock_figure_params(10);
        p.eta_sb = DiscreteDist::point(1.0);
        assert_eq!(p.validate().unwrap_err(), ModelError::DegenerateEtaSB(1.0));
    }

    #[test]
    fn binary_shock_mean() {
        let z = DiscreteDist::binary(0.4, 20.0).unwrap();
        assert_eq!(z.atoms(), &[(0.0, 0.6), (20.0, 0.4)]);
        assert!((z.mean() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn probabilities_must_sum_to_one() {
        let err = DiscreteDist::new(vec![(0.0, 0.5), (1.0, 0.4)]).unwrap_err();
        assert!(matches!(err, ModelError::InvalidDistribution { .. }));
        assert!(DiscreteDist::new(vec![]).is_err());
        assert!(DiscreteDist::new(vec![(1.0, -0.1), (2.0, 1.1)]).is_err());
        assert!(DiscreteDist::new(vec![(f64::NAN, 1.0)]).is_err());
    }

    #[test]
    fn nonpositive_liability_rejected() {
        let mut p = shock_figure_params(10);
        p.y_small = DiscreteDist::new(vec![(0.0, 0.5), (10.0, 0.5)]).unwrap();
        assert_eq!(p.validate().unwrap_err(), ModelError::NonPositiveLiability(0.0));
    }

    #[test]
    fn fraction_laws_stay_in_unit_interval() {
        let mut p = shock_figure_params(10);
        p.eta_bs = DiscreteDist::point(1.5);
        assert!(matches!(
            p.validate().unwrap_err(),
            ModelError::InvalidDistribution { name, .. } if name == "eta_bs"
        ));
    }

    #[test]
    fn deserialization_error_names_missing_field() {
        let mut value = serde_json::to_value(shock_figure_params(10)).unwrap();
        value.as_object_mut().unwrap().remove("k_big");
        let err = serde_json::from_value::<ModelParams>(value).unwrap_err();
        assert!(err.to_string().contains("k_big"), "{err}");
    }

    #[test]
    fn recovery_is_optional_in_config() {
        let text = shock_figure_params(10).to_json();
        assert!(!text.contains("recovery"));
        let back = ModelParams::from_json(&text).unwrap();
        assert_eq!(back, shock_figure_params(10));
    }

    #[test]
    fn k_bar_z_and_return_range() {
        let v = shock_figure_params(10).validate().unwrap();
        assert!((v.k_bar_z(0.0) - 17.0).abs() < 1e-12);
        assert_eq!(v.return_range(0.0), (5.0, 25.0));
        assert_eq!(v.return_range(10.0), (0.0, 15.0));
        assert!((v.k_bar_z(10.0) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn from_weighted_merges_atoms() {
        let d = DiscreteDist::from_weighted([(2.0, 0.25), (1.0, 0.5), (2.0, 0.25), (3.0, 0.0)])
            .unwrap();
        assert_eq!(d.atoms(), &[(1.0, 0.5), (2.0, 0.5)]);
    }

    #[test]
    fn exact_mean_matches_monte_carlo() {
        let d = DiscreteDist::new(vec![(0.0, 0.2), (3.5, 0.3), (10.0, 0.5)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 1_000_000;
        let sum: f64 = (0..draws).map(|_| d.sample(&mut rng)).sum();
        let mc = sum / draws as f64;
        let se = (d.variance() / draws as f64).sqrt();
        assert!((mc - d.mean()).abs() < 3.0 * se, "mc {mc} exact {}", d.mean());
    }
}
