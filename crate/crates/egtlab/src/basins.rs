//! Monte Carlo estimation of basins of attraction over the simplex.
//!
//! Initial conditions are sampled uniformly (flat Dirichlet), evolved to
//! convergence, and classified against a library of known attractors.
//! Per-sample randomness is a dedicated stream of the base seed, so
//! estimates are independent of execution order and thread count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{converge_only, DynamicsConfig, PopulationState};
use crate::error::{Error, Result};
use crate::games::MatrixGame;
use crate::repeated::{induced_matrix, RepeatedGameParams, StrategyAutomaton};
use crate::rng::{child_seed, stream_rng};

/// Default L1 classification radius.
pub const DEFAULT_RADIUS: f64 = 1e-3;

const Z_95: f64 = 1.959_963_984_540_054;

/// Uniform sample from the probability simplex via normalized independent
/// unit exponentials.
pub fn sample_simplex(dim: usize, rng: &mut impl Rng) -> Result<PopulationState> {
    if dim == 0 {
        return Err(Error::InvalidArgument("simplex dimension must be at least 1".into()));
    }
    let mut draws: Vec<f64> = (0..dim).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = draws.iter().sum();
    if total <= 0.0 {
        return PopulationState::uniform(dim);
    }
    for d in &mut draws {
        *d /= total;
    }
    Ok(PopulationState::new(draws)?)
}

/// A labeled attractor with its classification radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attractor {
    pub label: String,
    pub state: PopulationState,
    pub radius: f64,
}

/// Library of known attractors. Radii are positive and attractors are
/// pairwise separated by more than twice the largest radius, so a state
/// matches at most one ball unambiguously.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Attractor>", into = "Vec<Attractor>")]
pub struct AttractorLibrary {
    entries: Vec<Attractor>,
}

impl TryFrom<Vec<Attractor>> for AttractorLibrary {
    type Error = Error;
    fn try_from(entries: Vec<Attractor>) -> Result<Self> {
        AttractorLibrary::new(entries)
    }
}

impl From<AttractorLibrary> for Vec<Attractor> {
    fn from(lib: AttractorLibrary) -> Self {
        lib.entries
    }
}

impl AttractorLibrary {
    pub fn new(entries: Vec<Attractor>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("attractor library must not be empty".into()));
        }
        let max_radius = entries.iter().map(|a| a.radius).fold(0.0f64, f64::max);
        for a in &entries {
            if !(a.radius.is_finite() && a.radius > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "attractor `{}` needs a positive radius",
                    a.label
                )));
            }
        }
        for i in 0..entries.len() {
            for j in (i + 1)..entries.len() {
                let d = entries[i].state.l1_distance(&entries[j].state);
                if d <= 2.0 * max_radius {
                    return Err(Error::InvalidArgument(format!(
                        "attractors `{}` and `{}` are separated by {d}, need more than {}",
                        entries[i].label,
                        entries[j].label,
                        2.0 * max_radius
                    )));
                }
            }
        }
        Ok(AttractorLibrary { entries })
    }

    /// One ball per strategy vertex, labeled.
    pub fn vertices(labels: &[String], radius: f64) -> Result<Self> {
        let n = labels.len();
        let entries = labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                Ok(Attractor {
                    label: l.clone(),
                    state: PopulationState::vertex(n, i)?,
                    radius,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        AttractorLibrary::new(entries)
    }

    pub fn entries(&self) -> &[Attractor] {
        &self.entries
    }

    /// Index of the nearest attractor whose ball contains the state.
    pub fn classify(&self, state: &PopulationState) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, a) in self.entries.iter().enumerate() {
            if a.state.len() != state.len() {
                continue;
            }
            let d = a.state.l1_distance(state);
            if d <= a.radius && best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }
}

/// Mixed rest point on the face spanned by strategies `i` and `j` of a
/// symmetric game, from the indifference condition; the returned state is
/// zero elsewhere. Errors when the face has no interior rest point.
pub fn face_rest_point(game: &MatrixGame, i: usize, j: usize) -> Result<PopulationState> {
    if !game.is_symmetric() {
        return Err(Error::InvalidArgument("face rest points need a symmetric game".into()));
    }
    let n = game.n_rows();
    if i >= n || j >= n || i == j {
        return Err(Error::InvalidArgument("face needs two distinct strategies".into()));
    }
    let gain_i = game.row_payoff(i, i) - game.row_payoff(j, i);
    let gain_j = game.row_payoff(j, j) - game.row_payoff(i, j);
    let denom = gain_i + gain_j;
    if denom == 0.0 {
        return Err(Error::Degenerate("face indifference is degenerate".into()));
    }
    let share_i = gain_j / denom;
    if !(0.0 < share_i && share_i < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "face {{{i},{j}}} has no interior rest point (share {share_i})"
        )));
    }
    let mut shares = vec![0.0; n];
    shares[i] = share_i;
    shares[j] = 1.0 - share_i;
    PopulationState::new(shares)
}

/// Estimated share of one attractor's basin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasinEstimate {
    pub label: String,
    pub count: u64,
    pub fraction: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Basin estimates from one Monte Carlo run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasinReport {
    pub attractors: Vec<BasinEstimate>,
    pub unclassified: u64,
    pub total_samples: u64,
    pub seed: u64,
}

impl BasinReport {
    pub fn fraction_of(&self, label: &str) -> Option<f64> {
        self.attractors.iter().find(|a| a.label == label).map(|a| a.fraction)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("attractor_label,count,fraction,ci_lo,ci_hi,samples,seed\n");
        for a in &self.attractors {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                a.label, a.count, a.fraction, a.ci_lo, a.ci_hi, self.total_samples, self.seed
            ));
        }
        out.push_str(&format!(
            "unclassified,{},{},,,{},{}\n",
            self.unclassified,
            self.unclassified as f64 / self.total_samples as f64,
            self.total_samples,
            self.seed
        ));
        out
    }
}

/// Wilson score interval at 95%.
pub(crate) fn wilson_interval(count: u64, total: u64) -> (f64, f64) {
    if total == 0 {
        return (0.0, 1.0);
    }
    let n = total as f64;
    let p = count as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Estimate basin fractions: sample initial conditions uniformly, run the
/// configured deterministic dynamic to convergence, classify terminal
/// states against the library.
pub fn estimate_basins(
    game: &MatrixGame,
    config: &DynamicsConfig,
    attractors: &AttractorLibrary,
    samples: u64,
    seed: u64,
) -> Result<BasinReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    config.validate()?;
    let dim = game.n_rows();
    let classified: Vec<Option<usize>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let x0 = sample_simplex(dim, &mut rng)?;
            let terminal = converge_only(game, &x0, config)?;
            Ok(attractors.classify(&terminal))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut counts = vec![0u64; attractors.entries().len()];
    let mut unclassified = 0u64;
    for c in classified {
        match c {
            Some(i) => counts[i] += 1,
            None => unclassified += 1,
        }
    }
    let estimates = attractors
        .entries()
        .iter()
        .zip(&counts)
        .map(|(a, &count)| {
            let (ci_lo, ci_hi) = wilson_interval(count, samples);
            BasinEstimate {
                label: a.label.clone(),
                count,
                fraction: count as f64 / samples as f64,
                ci_lo,
                ci_hi,
            }
        })
        .collect();
    Ok(BasinReport { attractors: estimates, unclassified, total_samples: samples, seed })
}

/// One row of a parameter sweep table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub apology_cost: f64,
    pub reliability: f64,
    pub attractor_label: String,
    pub fraction: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub samples: u64,
    pub seed: u64,
}

/// Long-format sweep results over a (cost, reliability) grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,r,attractor_label,fraction,ci_lo,ci_hi,samples,seed\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.apology_cost,
                r.reliability,
                r.attractor_label,
                r.fraction,
                r.ci_lo,
                r.ci_hi,
                r.samples,
                r.seed
            ));
        }
        out
    }

    pub fn fraction_at(&self, k: f64, r: f64, label: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|row| {
                row.apology_cost == k && row.reliability == r && row.attractor_label == label
            })
            .map(|row| row.fraction)
    }
}

/// For each grid point, build the induced matrix of the roster and estimate
/// the basins of the roster's monomorphic attractors. Each grid point uses
/// a child seed of the base seed, indexed by its position.
#[allow(clippy::too_many_arguments)]
pub fn basin_sweep(
    roster: &[StrategyAutomaton],
    base: &RepeatedGameParams,
    k_grid: &[f64],
    r_grid: &[f64],
    config: &DynamicsConfig,
    samples: u64,
    seed: u64,
    radius: f64,
) -> Result<SweepTable> {
    if k_grid.is_empty() || r_grid.is_empty() {
        return Err(Error::InvalidArgument("sweep grids must not be empty".into()));
    }
    let labels: Vec<String> = roster.iter().map(|a| a.name().to_string()).collect();
    let mut rows = Vec::new();
    for (pi, (&k, &r)) in k_grid
        .iter()
        .flat_map(|k| r_grid.iter().map(move |r| (k, r)))
        .enumerate()
    {
        let params = RepeatedGameParams { apology_cost: k, reliability: r, ..*base };
        params.validate()?;
        let game = induced_matrix(roster, &params)?;
        let library = AttractorLibrary::vertices(&labels, radius)?;
        let point_seed = child_seed(seed, pi as u64);
        let report = estimate_basins(&game, config, &library, samples, point_seed)?;
        for est in &report.attractors {
            rows.push(SweepRow {
                apology_cost: k,
                reliability: r,
                attractor_label: est.label.clone(),
                fraction: est.fraction,
                ci_lo: est.ci_lo,
                ci_hi: est.ci_hi,
                samples,
                seed: point_seed,
            });
        }
        rows.push(SweepRow {
            apology_cost: k,
            reliability: r,
            attractor_label: "unclassified".into(),
            fraction: report.unclassified as f64 / samples as f64,
            ci_lo: wilson_interval(report.unclassified, samples).0,
            ci_hi: wilson_interval(report.unclassified, samples).1,
            samples,
            seed: point_seed,
        });
    }
    Ok(SweepTable { rows })
}
