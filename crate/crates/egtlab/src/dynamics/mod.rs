//! Population dynamics over a strategy roster: continuous and discrete
//! replicator dynamics with assortative matching, and the finite-population
//! Moran process.

mod moran;
mod replicator;

pub use moran::{moran_run, moran_step, MoranOutcome};
pub use replicator::{integrate, replicator_map_step, replicator_map_step_with_shift, replicator_ode_step};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::MatrixGame;

pub(crate) const SIMPLEX_TOL: f64 = 1e-9;

/// A point on the probability simplex over the strategy roster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PopulationState {
    shares: Vec<f64>,
}

impl TryFrom<Vec<f64>> for PopulationState {
    type Error = Error;
    fn try_from(shares: Vec<f64>) -> Result<Self> {
        PopulationState::new(shares)
    }
}

impl From<PopulationState> for Vec<f64> {
    fn from(x: PopulationState) -> Vec<f64> {
        x.shares
    }
}

impl PopulationState {
    /// Validates nonnegative entries summing to 1 within `1e-9`.
    pub fn new(shares: Vec<f64>) -> Result<Self> {
        if shares.is_empty() {
            return Err(Error::InvalidArgument("population needs at least one strategy".into()));
        }
        let mut clean = shares;
        for s in &mut clean {
            if !s.is_finite() || *s < -SIMPLEX_TOL {
                return Err(Error::InvalidArgument(format!("share {s} is negative or not finite")));
            }
            if *s < 0.0 {
                *s = 0.0;
            }
        }
        let total: f64 = clean.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidArgument(format!(
                "shares sum to {total}, expected 1 within {SIMPLEX_TOL:e}"
            )));
        }
        Ok(PopulationState { shares: clean })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("population needs at least one strategy".into()));
        }
        Ok(PopulationState { shares: vec![1.0 / n as f64; n] })
    }

    pub fn vertex(n: usize, strategy: usize) -> Result<Self> {
        if strategy >= n {
            return Err(Error::InvalidArgument(format!("vertex {strategy} out of range for {n}")));
        }
        let mut shares = vec![0.0; n];
        shares[strategy] = 1.0;
        Ok(PopulationState { shares })
    }

    pub(crate) fn from_raw(shares: Vec<f64>) -> Self {
        PopulationState { shares }
    }

    pub fn shares(&self) -> &[f64] {
        &self.shares
    }

    pub fn len(&self) -> usize {
        self.shares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shares.is_empty()
    }

    pub fn l1_distance(&self, other: &PopulationState) -> f64 {
        self.shares
            .iter()
            .zip(&other.shares)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DynamicsKind {
    ReplicatorOde,
    ReplicatorMap,
    Moran,
}

/// Configuration shared by all dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicsConfig {
    pub kind: DynamicsKind,
    /// ODE time step.
    pub step_size: f64,
    /// Probability of meeting one's own type instead of a random partner.
    pub assortment: f64,
    /// Per-reproduction mutation probability (Moran only).
    pub mutation: f64,
    /// Selection intensity w in the Moran fitness 1 - w + w*f.
    pub selection_intensity: f64,
    /// Stop when the flow magnitude falls below this.
    pub convergence_tol: f64,
    pub max_steps: usize,
    /// Population size used when a simplex state must be mapped to Moran
    /// counts.
    pub population_size: usize,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            kind: DynamicsKind::ReplicatorOde,
            step_size: 0.1,
            assortment: 0.0,
            mutation: 0.0,
            selection_intensity: 1.0,
            convergence_tol: 1e-9,
            max_steps: 1_000_000,
            population_size: 100,
        }
    }
}

impl DynamicsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::InvalidArgument("step_size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.assortment) {
            return Err(Error::InvalidArgument("assortment must lie in [0,1]".into()));
        }
        if !(0.0..=1.0).contains(&self.mutation) {
            return Err(Error::InvalidArgument("mutation must lie in [0,1]".into()));
        }
        if !(self.selection_intensity > 0.0 && self.selection_intensity <= 1.0) {
            return Err(Error::InvalidArgument("selection_intensity must lie in (0,1]".into()));
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol > 0.0) {
            return Err(Error::InvalidArgument("convergence_tol must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be at least 1".into()));
        }
        if self.population_size < 2 {
            return Err(Error::InvalidArgument("population_size must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalFlag {
    Converged,
    MaxSteps,
    CycleDetected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub time: f64,
    pub state: PopulationState,
}

/// A recorded dynamics run. Long runs are decimated on the fly so the
/// buffer stays bounded; the terminal state is always recorded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    points: Vec<TrajectoryPoint>,
    terminal: TerminalFlag,
}

impl Trajectory {
    pub(crate) fn new(points: Vec<TrajectoryPoint>, terminal: TerminalFlag) -> Self {
        debug_assert!(points.windows(2).all(|w| w[0].time < w[1].time));
        Trajectory { points, terminal }
    }

    pub fn points(&self) -> &[TrajectoryPoint] {
        &self.points
    }

    pub fn terminal(&self) -> TerminalFlag {
        self.terminal
    }

    pub fn final_state(&self) -> &PopulationState {
        &self.points.last().expect("trajectory is never empty").state
    }

    pub fn final_time(&self) -> f64 {
        self.points.last().expect("trajectory is never empty").time
    }

    /// CSV with columns `time, share_<label>...` and a terminal footer
    /// record.
    pub fn to_csv(&self, labels: &[String]) -> String {
        let mut out = String::from("time");
        for l in labels {
            out.push_str(&format!(",share_{l}"));
        }
        out.push('\n');
        for p in &self.points {
            out.push_str(&p.time.to_string());
            for s in p.state.shares() {
                out.push_str(&format!(",{s}"));
            }
            out.push('\n');
        }
        out.push_str(&format!("terminal,{}\n", terminal_label(self.terminal)));
        out
    }
}

pub(crate) fn terminal_label(flag: TerminalFlag) -> &'static str {
    match flag {
        TerminalFlag::Converged => "converged",
        TerminalFlag::MaxSteps => "max-steps",
        TerminalFlag::CycleDetected => "cycle-detected",
    }
}

/// Per-strategy expected payoffs under assortative matching:
/// `f_i = e*u(i,i) + (1-e) * sum_j x_j u(i,j)`.
pub fn fitness(game: &MatrixGame, x: &PopulationState, assortment: f64) -> Result<Vec<f64>> {
    if !game.is_symmetric() {
        return Err(Error::InvalidArgument("population dynamics need a symmetric game".into()));
    }
    if x.len() != game.n_rows() {
        return Err(Error::InvalidArgument(format!(
            "population has {} strategies, game has {}",
            x.len(),
            game.n_rows()
        )));
    }
    if !(0.0..=1.0).contains(&assortment) {
        return Err(Error::InvalidArgument("assortment must lie in [0,1]".into()));
    }
    Ok(fitness_unchecked(game, x.shares(), assortment))
}

pub(crate) fn fitness_unchecked(game: &MatrixGame, shares: &[f64], e: f64) -> Vec<f64> {
    let n = shares.len();
    (0..n)
        .map(|i| {
            let mixed: f64 = (0..n).map(|j| shares[j] * game.row_payoff(i, j)).sum();
            e * game.row_payoff(i, i) + (1.0 - e) * mixed
        })
        .collect()
}

/// Dispatch on the configured kind and run until the dynamic settles.
/// Moran runs are seeded explicitly via [`moran_run`]; this deterministic
/// entry point rejects `kind = Moran`.
pub fn run_to_convergence(
    game: &MatrixGame,
    x0: &PopulationState,
    config: &DynamicsConfig,
) -> Result<(PopulationState, Trajectory)> {
    match config.kind {
        DynamicsKind::ReplicatorOde => {
            let t = replicator::integrate(game, x0, config)?;
            Ok((t.final_state().clone(), t))
        }
        DynamicsKind::ReplicatorMap => {
            let t = replicator::iterate_map(game, x0, config, true)?;
            Ok((t.final_state().clone(), t))
        }
        DynamicsKind::Moran => Err(Error::InvalidArgument(
            "moran dynamics need explicit counts and a seed; use moran_run".into(),
        )),
    }
}

/// Convergence without trajectory recording, for basin estimation.
pub(crate) fn converge_only(
    game: &MatrixGame,
    x0: &PopulationState,
    config: &DynamicsConfig,
) -> Result<PopulationState> {
    match config.kind {
        DynamicsKind::ReplicatorOde => replicator::integrate_lean(game, x0, config),
        DynamicsKind::ReplicatorMap => {
            let t = replicator::iterate_map(game, x0, config, false)?;
            Ok(t.final_state().clone())
        }
        DynamicsKind::Moran => Err(Error::InvalidArgument(
            "basins under moran dynamics are unsupported".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::pd;

    #[test]
    fn population_state_validates_simplex() {
        assert!(PopulationState::new(vec![0.5, 0.5]).is_ok());
        assert!(PopulationState::new(vec![0.5, 0.4]).is_err());
        assert!(PopulationState::new(vec![-0.1, 1.1]).is_err());
        assert!(PopulationState::new(vec![]).is_err());
        let u = PopulationState::uniform(4).unwrap();
        assert_eq!(u.shares(), &[0.25; 4]);
    }

    #[test]
    fn pd_fitness_gap_is_constant_under_random_matching() {
        let g = pd();
        for xc in [0.0, 0.3, 0.9, 1.0] {
            let x = PopulationState::new(vec![xc, 1.0 - xc]).unwrap();
            let f = fitness(&g, &x, 0.0).unwrap();
            assert!((f[0] - f[1] + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pd_fitness_gap_follows_assortment_identity() {
        // f_C - f_D = 2e - 1 for the canonical table, at every state
        let g = pd();
        for e in [0.0, 0.25, 0.5, 0.75, 1.0] {
            for xc in [0.1, 0.5, 0.77] {
                let x = PopulationState::new(vec![xc, 1.0 - xc]).unwrap();
                let f = fitness(&g, &x, e).unwrap();
                assert!(((f[0] - f[1]) - (2.0 * e - 1.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_correlation_pins_fitness_to_the_diagonal() {
        let g = pd();
        let x = PopulationState::new(vec![0.2, 0.8]).unwrap();
        let f = fitness(&g, &x, 1.0).unwrap();
        assert_eq!(f, vec![2.0, 1.0]);
    }

    #[test]
    fn fitness_rejects_dimension_mismatch() {
        let g = pd();
        let x = PopulationState::uniform(3).unwrap();
        assert!(fitness(&g, &x, 0.0).is_err());
    }

    #[test]
    fn population_state_serializes_as_bare_vector() {
        let x = PopulationState::new(vec![0.25, 0.75]).unwrap();
        assert_eq!(serde_json::to_string(&x).unwrap(), "[0.25,0.75]");
        let bad: std::result::Result<PopulationState, _> = serde_json::from_str("[0.5,0.6]");
        assert!(bad.is_err());
    }
}
