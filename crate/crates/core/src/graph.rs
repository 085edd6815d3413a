//! Random liability graph: small-to-small indicators, per-bank draws and the
//! liability weights derived from them.
//!
//! Every out-edge of small bank `j` carries the same weight
//! `(1 - eta_sb_j) / deg_j`, so a realization stores one scalar per row plus
//! the adjacency structure. Adjacency is a bitset for `n <= DENSE_LIMIT` and
//! row lists above it.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DiscreteDist, ModelError, ValidatedParams};

/// Largest `n` stored with a dense bitset adjacency.
pub const DENSE_LIMIT: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("every eta_bs draw is zero, big-bank weights are undefined")]
    ZeroEtaBar,
    #[error("row {0} has no small-bank neighbour")]
    IsolatedRow(usize),
    #[error("inconsistent realization: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Per-bank random draws `G_i` together with the bank's connectivity fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BankDraw {
    pub eta_sb: f64,
    pub eta_bs: f64,
    pub shock: f64,
    pub k: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Adjacency {
    Dense { words: usize, bits: Vec<u64> },
    Sparse { rows: Vec<Vec<u32>> },
}

impl Adjacency {
    fn empty(n: usize) -> Self {
        if n <= DENSE_LIMIT {
            let words = n.div_ceil(64);
            Adjacency::Dense {
                words,
                bits: vec![0; words * n],
            }
        } else {
            Adjacency::Sparse {
                rows: vec![Vec::new(); n],
            }
        }
    }

    fn has(&self, j: usize, i: usize) -> bool {
        match self {
            Adjacency::Dense { words, bits } => bits[j * words + i / 64] >> (i % 64) & 1 == 1,
            Adjacency::Sparse { rows } => rows[j].binary_search(&(i as u32)).is_ok(),
        }
    }

    fn set_row(&mut self, j: usize, targets: &[u32]) {
        match self {
            Adjacency::Dense { words, bits } => {
                let row = &mut bits[j * *words..(j + 1) * *words];
                row.fill(0);
                for &t in targets {
                    row[t as usize / 64] |= 1 << (t % 64);
                }
            }
            Adjacency::Sparse { rows } => rows[j] = targets.to_vec(),
        }
    }

    /// Calls `f(i)` for every out-neighbour `i` of `j`, in increasing order.
    #[inline]
    fn for_each_out<F: FnMut(usize)>(&self, j: usize, mut f: F) {
        match self {
            Adjacency::Dense { words, bits } => {
                for (w, &word) in bits[j * words..(j + 1) * words].iter().enumerate() {
                    let mut word = word;
                    while word != 0 {
                        let b = word.trailing_zeros() as usize;
                        f(w * 64 + b);
                        word &= word - 1;
                    }
                }
            }
            Adjacency::Sparse { rows } => rows[j].iter().for_each(|&i| f(i as usize)),
        }
    }
}

/// One sampled finite-`n` world.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRealization {
    n: usize,
    adjacency: Adjacency,
    out_degree: Vec<u32>,
    draws: Vec<BankDraw>,
    /// Weight `W_{j,i}` shared by every out-edge of row `j`.
    row_weight: Vec<f64>,
    eta_bar: f64,
    seed: u64,
    resampled_rows: usize,
}

impl NetworkRealization {
    /// Builds a realization from explicit indicators and draws.
    pub fn from_parts(
        indicators: &[Vec<bool>],
        draws: Vec<BankDraw>,
        seed: u64,
    ) -> Result<Self, GraphError> {
        let n = draws.len();
        if indicators.len() != n || indicators.iter().any(|r| r.len() != n) {
            return Err(GraphError::Inconsistent(format!(
                "indicator matrix must be {n}x{n}"
            )));
        }
        let mut adjacency = Adjacency::empty(n);
        let mut out_degree = Vec::with_capacity(n);
        for (j, row) in indicators.iter().enumerate() {
            if row[j] {
                return Err(GraphError::Inconsistent(format!("self-loop at {j}")));
            }
            let targets: Vec<u32> = (0..n).filter(|&i| row[i]).map(|i| i as u32).collect();
            if targets.is_empty() {
                return Err(GraphError::IsolatedRow(j));
            }
            adjacency.set_row(j, &targets);
            out_degree.push(targets.len() as u32);
        }
        Self::assemble(n, adjacency, out_degree, draws, seed, 0)
    }

    fn assemble(
        n: usize,
        adjacency: Adjacency,
        out_degree: Vec<u32>,
        draws: Vec<BankDraw>,
        seed: u64,
        resampled_rows: usize,
    ) -> Result<Self, GraphError> {
        let eta_bar: f64 = draws.iter().map(|d| d.eta_bs).sum();
        if eta_bar <= 0.0 {
            return Err(GraphError::ZeroEtaBar);
        }
        let row_weight = draws
            .iter()
            .zip(&out_degree)
            .map(|(d, &deg)| (1.0 - d.eta_sb) / deg as f64)
            .collect();
        Ok(Self {
            n,
            adjacency,
            out_degree,
            draws,
            row_weight,
            eta_bar,
            seed,
            resampled_rows,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of rows whose indicators were redrawn because they came out empty.
    pub fn resampled_rows(&self) -> usize {
        self.resampled_rows
    }

    pub fn draws(&self) -> &[BankDraw] {
        &self.draws
    }

    pub fn draw(&self, i: usize) -> &BankDraw {
        &self.draws[i]
    }

    /// `eta_bar = sum_j eta_bs_j`.
    pub fn eta_bar(&self) -> f64 {
        self.eta_bar
    }

    pub fn indicator(&self, j: usize, i: usize) -> bool {
        self.adjacency.has(j, i)
    }

    pub fn out_degree(&self, j: usize) -> usize {
        self.out_degree[j] as usize
    }

    pub fn edge_count(&self) -> usize {
        self.out_degree.iter().map(|&d| d as usize).sum()
    }

    /// `W_{j,i}`.
    pub fn weight_ss(&self, j: usize, i: usize) -> f64 {
        if self.adjacency.has(j, i) {
            self.row_weight[j]
        } else {
            0.0
        }
    }

    /// `W_{j,b} = eta_sb_j`.
    pub fn weight_sb(&self, j: usize) -> f64 {
        self.draws[j].eta_sb
    }

    /// `W_{b,j} = eta_bs_j / eta_bar`.
    pub fn weight_bs(&self, j: usize) -> f64 {
        self.draws[j].eta_bs / self.eta_bar
    }

    pub fn out_neighbors(&self, j: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.out_degree(j));
        self.adjacency.for_each_out(j, |i| out.push(i));
        out
    }

    /// Dense copy of the small-to-small weight matrix; meant for small `n`.
    pub fn dense_weights(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.weight_ss(j, i)).collect())
            .collect()
    }

    /// `out[i] = sum_j x[j] W_{j,i}`.
    pub fn aggregate_small_into(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (j, (&xj, &wj)) in x.iter().zip(&self.row_weight).enumerate().take(self.n) {
            let contrib = xj * wj;
            if contrib == 0.0 {
                continue;
            }
            self.adjacency.for_each_out(j, |i| out[i] += contrib);
        }
    }

    /// `(1/n) sum_j x[j] W_{j,b}`.
    pub fn aggregate_big(&self, x: &[f64]) -> f64 {
        let total: f64 = x
            .iter()
            .zip(&self.draws)
            .map(|(xj, d)| xj * d.eta_sb)
            .sum();
        total / self.n as f64
    }

    /// Calls `f(j, i, W_{j,i})` for every edge.
    pub fn for_each_edge<F: FnMut(usize, usize, f64)>(&self, mut f: F) {
        for j in 0..self.n {
            let w = self.row_weight[j];
            self.adjacency.for_each_out(j, |i| f(j, i, w));
        }
    }

    /// Writes the edge list `j,i,weight` as CSV.
    pub fn write_edge_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["j", "i", "weight"])?;
        let mut result = Ok(());
        self.for_each_edge(|j, i, w| {
            if result.is_ok() {
                result = out.serialize((j, i, w));
            }
        });
        result?;
        out.flush()?;
        Ok(())
    }

    pub fn header(&self) -> RealizationHeader {
        RealizationHeader {
            n: self.n,
            seed: self.seed,
            eta_bar: self.eta_bar,
            resampled_rows: self.resampled_rows,
            draws: self.draws.clone(),
        }
    }
}

/// JSON header accompanying an edge-list dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationHeader {
    pub n: usize,
    pub seed: u64,
    pub eta_bar: f64,
    pub resampled_rows: usize,
    pub draws: Vec<BankDraw>,
}

/// splitmix64 finalizer applied to `root + (index + 1) * golden_gamma`.
///
/// Used to derive the independent stream of work item `index` from a root seed.
pub fn derive_seed(root: u64, index: u64) -> u64 {
    let mut z = root.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn bernoulli_threshold(p: f64) -> Option<u64> {
    // None means "always"; otherwise an edge exists when a uniform u64 < threshold.
    if p >= 1.0 {
        None
    } else {
        Some((p * 2f64.powi(64)) as u64)
    }
}

/// Samples indicators, draws and weights for `params.n` small banks.
///
/// Deterministic in `(params, seed)`. Rows that come out with no neighbour are
/// redrawn until non-empty; the count is kept in the realization.
pub fn sample_network(params: &ValidatedParams, seed: u64) -> Result<NetworkRealization, GraphError> {
    let p = params.params();
    let n = p.n;
    if n < 2 {
        return Err(GraphError::Inconsistent(
            "at least two small banks are needed for small-to-small links".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<BankDraw> = (0..n)
        .map(|_| BankDraw {
            eta_sb: p.eta_sb.sample(&mut rng),
            eta_bs: p.eta_bs.sample(&mut rng),
            shock: p.shock_small.sample(&mut rng),
            k: p.k_small.sample(&mut rng),
            y: p.y_small.sample(&mut rng),
        })
        .collect();

    let threshold = bernoulli_threshold(p.p_ss);
    let mut adjacency = Adjacency::empty(n);
    let mut out_degree = Vec::with_capacity(n);
    let mut resampled_rows = 0;
    let mut targets: Vec<u32> = Vec::with_capacity(n);
    for j in 0..n {
        let mut attempts = 0;
        loop {
            targets.clear();
            match threshold {
                None => targets.extend((0..n as u32).filter(|&i| i as usize != j)),
                Some(t) => {
                    for i in 0..n {
                        if i != j && rng.gen::<u64>() < t {
                            targets.push(i as u32);
                        }
                    }
                }
            }
            if !targets.is_empty() {
                break;
            }
            attempts += 1;
        }
        if attempts > 0 {
            resampled_rows += 1;
        }
        adjacency.set_row(j, &targets);
        out_degree.push(targets.len() as u32);
    }
    NetworkRealization::assemble(n, adjacency, out_degree, draws, seed, resampled_rows)
}

/// Makes the network regular: `eta_bs` equal in law to `eta_sb` and
/// `y_big = y * E[eta_bs]`. Requires a deterministic total liability `y`.
pub fn make_regular(params: &ValidatedParams) -> Result<ValidatedParams, GraphError> {
    let y = params
        .params()
        .y_small
        .point_value()
        .ok_or(ModelError::RequiresDeterministicY)?;
    Ok(params.modify(|p| {
        p.eta_bs = p.eta_sb.clone();
        p.y_big = y * p.eta_bs.mean();
    })?)
}

/// Regular economy with `{0,1}` connectivity of mean `p_bs` for both
/// directions of the small/big relationship.
pub fn regular_indicator(params: &ValidatedParams, p_bs: f64) -> Result<ValidatedParams, GraphError> {
    let eta = DiscreteDist::indicator(p_bs)?;
    let with_eta = params.modify(|p| p.eta_sb = eta)?;
    make_regular(&with_eta)
}

/// Per-bank difference between total claims and total liabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityMismatch {
    /// `(1/n) sum_i |claims_i - Y_i|`.
    pub mean_abs: f64,
    /// `(1/n) sum_i (claims_i - Y_i)`.
    pub mean_signed: f64,
}

/// Claims of bank `i` are `sum_j l_{j,i} + l_{b,i}` with `l_{j,i} = Y_j W_{j,i}`
/// and `l_{b,i} = n y_big eta_bs_i / eta_bar`.
pub fn regularity_mismatch(net: &NetworkRealization, y_big: f64) -> RegularityMismatch {
    let n = net.n();
    let y: Vec<f64> = net.draws().iter().map(|d| d.y).collect();
    let mut claims = vec![0.0; n];
    net.aggregate_small_into(&y, &mut claims);
    let (mut abs, mut signed) = (0.0, 0.0);
    for i in 0..n {
        let c = claims[i] + n as f64 * y_big * net.weight_bs(i);
        abs += (c - y[i]).abs();
        signed += c - y[i];
    }
    RegularityMismatch {
        mean_abs: abs / n as f64,
        mean_signed: signed / n as f64,
    }
}
