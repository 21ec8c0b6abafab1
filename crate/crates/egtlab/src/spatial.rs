//! Local interaction on rings and grids with deterministic synchronous
//! imitate-best-neighbor updating: every node plays the game once with each
//! neighbor, sums payoffs, then adopts the strategy of its highest-scoring
//! neighbor (itself included). Ties keep the node's own strategy, then fall
//! to the lowest neighbor index, so trajectories are fully deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::MatrixGame;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Neighborhood {
    Moore,
    VonNeumann,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Topology {
    /// Ring of `n` nodes, each linked to the `k` nearest on both sides.
    Ring { n: usize, k: usize },
    Grid {
        width: usize,
        height: usize,
        neighborhood: Neighborhood,
        wrap: bool,
    },
}

impl Topology {
    pub fn node_count(&self) -> usize {
        match *self {
            Topology::Ring { n, .. } => n,
            Topology::Grid { width, height, .. } => width * height,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Topology::Ring { n, k } => {
                if n < 3 {
                    return Err(Error::InvalidArgument("ring needs at least 3 nodes".into()));
                }
                if k == 0 || 2 * k > n - 1 {
                    return Err(Error::InvalidArgument(format!(
                        "ring neighborhood k = {k} must satisfy 1 <= 2k <= n - 1"
                    )));
                }
            }
            Topology::Grid { width, height, .. } => {
                if width < 3 || height < 3 {
                    return Err(Error::InvalidArgument("grid needs width and height >= 3".into()));
                }
            }
        }
        Ok(())
    }

    fn adjacency(&self) -> Vec<Vec<u32>> {
        match *self {
            Topology::Ring { n, k } => (0..n)
                .map(|i| {
                    let mut nb = Vec::with_capacity(2 * k);
                    for d in 1..=k {
                        nb.push(((i + n - d) % n) as u32);
                        nb.push(((i + d) % n) as u32);
                    }
                    nb.sort_unstable();
                    nb
                })
                .collect(),
            Topology::Grid { width, height, neighborhood, wrap } => {
                let offsets: &[(i64, i64)] = match neighborhood {
                    Neighborhood::VonNeumann => &[(-1, 0), (0, -1), (0, 1), (1, 0)],
                    Neighborhood::Moore => &[
                        (-1, -1),
                        (-1, 0),
                        (-1, 1),
                        (0, -1),
                        (0, 1),
                        (1, -1),
                        (1, 0),
                        (1, 1),
                    ],
                };
                let (w, h) = (width as i64, height as i64);
                (0..width * height)
                    .map(|idx| {
                        let (row, col) = ((idx / width) as i64, (idx % width) as i64);
                        let mut nb = Vec::with_capacity(offsets.len());
                        for &(dr, dc) in offsets {
                            let (mut r, mut c) = (row + dr, col + dc);
                            if wrap {
                                r = r.rem_euclid(h);
                                c = c.rem_euclid(w);
                            } else if r < 0 || r >= h || c < 0 || c >= w {
                                continue;
                            }
                            nb.push((r * w + c) as u32);
                        }
                        nb.sort_unstable();
                        nb
                    })
                    .collect()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    #[default]
    ImitateBestNeighbor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialConfig {
    pub topology: Topology,
    pub game: MatrixGame,
    #[serde(default)]
    pub update: UpdateRule,
}

/// Per-node strategy assignment plus a generation counter.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpatialState {
    pub strategies: Vec<usize>,
    pub generation: u64,
}

impl SpatialState {
    pub fn uniform(topology: &Topology, strategy: usize) -> Self {
        SpatialState { strategies: vec![strategy; topology.node_count()], generation: 0 }
    }

    pub fn frequencies(&self, n_strategies: usize) -> Vec<f64> {
        let mut counts = vec![0u64; n_strategies];
        for &s in &self.strategies {
            counts[s] += 1;
        }
        let total = self.strategies.len() as f64;
        counts.into_iter().map(|c| c as f64 / total).collect()
    }
}

/// Fixture format: a topology plus per-node strategies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialScenario {
    pub topology: Topology,
    pub strategies: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpatialTerminal {
    FixedPoint,
    TwoCycle,
    MaxGenerations,
}

/// Result of a spatial run: strategy frequencies for every generation
/// (including the initial one), the terminal flag, and the final state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialRun {
    pub frequencies: Vec<Vec<f64>>,
    pub terminal: SpatialTerminal,
    pub final_state: SpatialState,
}

impl SpatialRun {
    /// CSV with columns `generation, freq_<label>...` and a terminal footer.
    pub fn to_csv(&self, labels: &[String]) -> String {
        let mut out = String::from("generation");
        for l in labels {
            out.push_str(&format!(",freq_{l}"));
        }
        out.push('\n');
        for (g, freqs) in self.frequencies.iter().enumerate() {
            out.push_str(&g.to_string());
            for f in freqs {
                out.push_str(&format!(",{f}"));
            }
            out.push('\n');
        }
        let flag = match self.terminal {
            SpatialTerminal::FixedPoint => "fixed-point",
            SpatialTerminal::TwoCycle => "two-cycle",
            SpatialTerminal::MaxGenerations => "max-generations",
        };
        out.push_str(&format!("terminal,{flag}\n"));
        out
    }
}

/// Compiled lattice: validated config plus the adjacency lists.
pub struct Lattice {
    adjacency: Vec<Vec<u32>>,
    game: MatrixGame,
}

impl Lattice {
    pub fn new(config: &SpatialConfig) -> Result<Self> {
        config.topology.validate()?;
        if !config.game.is_symmetric() {
            return Err(Error::InvalidArgument("spatial games must be symmetric".into()));
        }
        Ok(Lattice { adjacency: config.topology.adjacency(), game: config.game.clone() })
    }

    fn check_state(&self, state: &SpatialState) -> Result<()> {
        if state.strategies.len() != self.adjacency.len() {
            return Err(Error::InvalidArgument(format!(
                "state has {} nodes, topology has {}",
                state.strategies.len(),
                self.adjacency.len()
            )));
        }
        if let Some(&bad) = state.strategies.iter().find(|&&s| s >= self.game.n_rows()) {
            return Err(Error::InvalidArgument(format!(
                "strategy index {bad} out of range for the game"
            )));
        }
        Ok(())
    }

    fn scores(&self, strategies: &[usize]) -> Vec<f64> {
        strategies
            .iter()
            .enumerate()
            .map(|(i, &si)| {
                self.adjacency[i]
                    .iter()
                    .map(|&j| self.game.row_payoff(si, strategies[j as usize]))
                    .sum()
            })
            .collect()
    }

    /// One synchronous generation.
    pub fn step(&self, state: &SpatialState) -> Result<SpatialState> {
        self.check_state(state)?;
        let scores = self.scores(&state.strategies);
        let next = state
            .strategies
            .iter()
            .enumerate()
            .map(|(i, &own)| {
                let mut best = scores[i];
                for &j in &self.adjacency[i] {
                    if scores[j as usize] > best {
                        best = scores[j as usize];
                    }
                }
                if scores[i] >= best {
                    own
                } else {
                    // lowest-index neighbor achieving the best score
                    let winner = self.adjacency[i]
                        .iter()
                        .find(|&&j| scores[j as usize] >= best)
                        .expect("some neighbor beats the node");
                    state.strategies[*winner as usize]
                }
            })
            .collect();
        Ok(SpatialState { strategies: next, generation: state.generation + 1 })
    }

    /// Iterate until a fixed point, a 2-cycle, or `max_generations`.
    pub fn run(&self, state0: &SpatialState, max_generations: u64) -> Result<SpatialRun> {
        if max_generations == 0 {
            return Err(Error::InvalidArgument("max_generations must be at least 1".into()));
        }
        self.check_state(state0)?;
        let n_strats = self.game.n_rows();
        let mut frequencies = vec![state0.frequencies(n_strats)];
        let mut previous: Option<Vec<usize>> = None;
        let mut current = state0.clone();
        let mut terminal = SpatialTerminal::MaxGenerations;
        for _ in 0..max_generations {
            let next = self.step(&current)?;
            if next.strategies == current.strategies {
                terminal = SpatialTerminal::FixedPoint;
                break;
            }
            frequencies.push(next.frequencies(n_strats));
            let cycle = previous.as_ref() == Some(&next.strategies);
            previous = Some(std::mem::replace(&mut current, next).strategies);
            if cycle {
                terminal = SpatialTerminal::TwoCycle;
                break;
            }
        }
        Ok(SpatialRun { frequencies, terminal, final_state: current })
    }
}

/// One synchronous generation of imitate-best-neighbor updating.
pub fn spatial_step(state: &SpatialState, config: &SpatialConfig) -> Result<SpatialState> {
    Lattice::new(config)?.step(state)
}

/// Run the lattice dynamic from `state0`.
pub fn spatial_run(
    state0: &SpatialState,
    config: &SpatialConfig,
    max_generations: u64,
) -> Result<SpatialRun> {
    Lattice::new(config)?.run(state0, max_generations)
}

/// Paint a rectangle of `strategy` onto a grid state, top-left at
/// `(row, col)`. Helper for building seeded fixtures.
pub fn paint_block(
    state: &mut SpatialState,
    topology: &Topology,
    strategy: usize,
    row: usize,
    col: usize,
    rows: usize,
    cols: usize,
) -> Result<()> {
    let Topology::Grid { width, height, .. } = *topology else {
        return Err(Error::InvalidArgument("paint_block needs a grid topology".into()));
    };
    if row + rows > height || col + cols > width {
        return Err(Error::InvalidArgument("block exceeds the grid".into()));
    }
    for r in row..row + rows {
        for c in col..col + cols {
            state.strategies[r * width + c] = strategy;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{coordination, stag_hunt, MatrixGame};

    fn grid(w: usize, h: usize, neighborhood: Neighborhood) -> Topology {
        Topology::Grid { width: w, height: h, neighborhood, wrap: true }
    }

    fn stag_config(topology: Topology) -> SpatialConfig {
        SpatialConfig { topology, game: stag_hunt(), update: UpdateRule::default() }
    }

    #[test]
    fn monomorphic_grids_are_fixed_points() {
        for s in [0, 1] {
            let topology = grid(5, 5, Neighborhood::Moore);
            let config = stag_config(topology);
            let state = SpatialState::uniform(&topology, s);
            let run = spatial_run(&state, &config, 10).unwrap();
            assert_eq!(run.terminal, SpatialTerminal::FixedPoint);
            assert_eq!(run.final_state.strategies, state.strategies);
            assert_eq!(run.frequencies.len(), 1);
        }
    }

    #[test]
    fn frequencies_sum_to_one_every_generation() {
        let topology = grid(7, 7, Neighborhood::VonNeumann);
        let config = stag_config(topology);
        let mut state = SpatialState::uniform(&topology, 1);
        paint_block(&mut state, &topology, 0, 2, 2, 3, 3).unwrap();
        let run = spatial_run(&state, &config, 30).unwrap();
        for f in &run.frequencies {
            assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stag_block_expands_under_von_neumann_neighborhoods() {
        let topology = grid(21, 21, Neighborhood::VonNeumann);
        let config = stag_config(topology);
        let mut state = SpatialState::uniform(&topology, 1);
        paint_block(&mut state, &topology, 0, 9, 9, 3, 3).unwrap();
        let run = spatial_run(&state, &config, 10).unwrap();
        let initial_stag = run.frequencies[0][0];
        assert!(
            run.frequencies.iter().skip(1).any(|f| f[0] > initial_stag),
            "stag share never increased: {:?}",
            run.frequencies.iter().map(|f| f[0]).collect::<Vec<_>>()
        );
    }

    #[test]
    fn translation_equivariance_on_wrapping_grids() {
        let topology = grid(12, 12, Neighborhood::VonNeumann);
        let config = stag_config(topology);
        let mut base = SpatialState::uniform(&topology, 1);
        paint_block(&mut base, &topology, 0, 1, 2, 3, 3).unwrap();
        let run_base = spatial_run(&base, &config, 8).unwrap();

        // shift the pattern by (dr, dc) with wraparound
        let (dr, dc) = (5, 7);
        let mut shifted = SpatialState::uniform(&topology, 1);
        for r in 0..12 {
            for c in 0..12 {
                let src = r * 12 + c;
                let dst = ((r + dr) % 12) * 12 + (c + dc) % 12;
                shifted.strategies[dst] = base.strategies[src];
            }
        }
        let run_shifted = spatial_run(&shifted, &config, 8).unwrap();
        assert_eq!(run_base.frequencies, run_shifted.frequencies);
        // and the terminal states are shifts of each other
        for r in 0..12 {
            for c in 0..12 {
                let src = r * 12 + c;
                let dst = ((r + dr) % 12) * 12 + (c + dc) % 12;
                assert_eq!(
                    run_base.final_state.strategies[src],
                    run_shifted.final_state.strategies[dst]
                );
            }
        }
    }

    #[test]
    fn anti_coordination_ring_two_cycles() {
        // u(A,A) = u(B,B) = 0, mismatches pay 1: a known blinker exists
        let game = MatrixGame::from_symmetric(
            "anti-coordination",
            vec!["A".into(), "B".into()],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap();
        let topology = Topology::Ring { n: 4, k: 1 };
        let config = SpatialConfig { topology, game, update: UpdateRule::default() };
        let state = SpatialState { strategies: vec![0, 0, 0, 1], generation: 0 };
        let run = spatial_run(&state, &config, 50).unwrap();
        assert_eq!(run.terminal, SpatialTerminal::TwoCycle);
    }

    #[test]
    fn determinism_across_runs() {
        let topology = grid(9, 9, Neighborhood::Moore);
        let config = stag_config(topology);
        let mut state = SpatialState::uniform(&topology, 1);
        paint_block(&mut state, &topology, 0, 0, 0, 4, 4).unwrap();
        let a = spatial_run(&state, &config, 20).unwrap();
        let b = spatial_run(&state, &config, 20).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coordination_islands_freeze() {
        let topology = grid(6, 6, Neighborhood::Moore);
        let config =
            SpatialConfig { topology, game: coordination(), update: UpdateRule::default() };
        let mut state = SpatialState::uniform(&topology, 0);
        paint_block(&mut state, &topology, 1, 0, 0, 3, 3).unwrap();
        let run = spatial_run(&state, &config, 50).unwrap();
        assert!(matches!(run.terminal, SpatialTerminal::FixedPoint | SpatialTerminal::TwoCycle));
    }

    #[test]
    fn ring_adjacency_is_symmetric_and_sorted() {
        let t = Topology::Ring { n: 7, k: 2 };
        let adj = t.adjacency();
        for (i, nb) in adj.iter().enumerate() {
            assert_eq!(nb.len(), 4);
            for &j in nb {
                assert!(adj[j as usize].contains(&(i as u32)));
            }
            assert!(nb.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn invalid_topologies_are_rejected() {
        assert!(Lattice::new(&stag_config(Topology::Ring { n: 2, k: 1 })).is_err());
        assert!(Lattice::new(&stag_config(Topology::Ring { n: 5, k: 3 })).is_err());
        assert!(Lattice::new(&stag_config(grid(2, 5, Neighborhood::Moore))).is_err());
    }

    #[test]
    fn scenario_serde_round_trip() {
        let topology = grid(5, 5, Neighborhood::VonNeumann);
        let mut state = SpatialState::uniform(&topology, 1);
        paint_block(&mut state, &topology, 0, 1, 1, 2, 2).unwrap();
        let scenario = SpatialScenario { topology, strategies: state.strategies.clone() };
        let json = serde_json::to_string_pretty(&scenario).unwrap();
        let back: SpatialScenario = serde_json::from_str(&json).unwrap();
        assert_eq!(scenario, back);
    }
}
