//! Experiment dispatch: run the owning module, write outputs atomically,
//! and record a manifest sufficient to reproduce the run exactly.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use egtlab::basins::{basin_sweep, estimate_basins};
use egtlab::dynamics::{self, DynamicsConfig, DynamicsKind, PopulationState};
use egtlab::games::{mixed_nash, pure_nash, MatrixGame};
use egtlab::repeated::{self, induced_matrix, long_run_payoff, RepeatedGameParams};
use egtlab::rng::GENERATOR_ID;
use egtlab::spatial::{Lattice, SpatialConfig, SpatialScenario, SpatialState, UpdateRule};

use crate::spec::{self, ExperimentKind, RunSpec, SpatialInitial};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Everything needed to reproduce a run byte-for-byte, plus run metadata.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub generator: String,
    pub egtlab_version: String,
    pub spec: RunSpec,
    pub overrides: Vec<(String, String)>,
    pub outputs: Vec<String>,
    pub wall_time_ms: u128,
}

/// Write via a sibling temp file and rename, so outputs are either complete
/// or absent.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).context("serializing output")?;
    s.push('\n');
    Ok(s)
}

pub fn execute(spec: &RunSpec, out_dir: &Path, overrides: &[(String, String)]) -> Result<()> {
    let started = Instant::now();
    let outputs = match spec.experiment {
        ExperimentKind::Nash => run_nash(spec, out_dir)?,
        ExperimentKind::Evolve => run_evolve(spec, out_dir)?,
        ExperimentKind::Basins => run_basins(spec, out_dir)?,
        ExperimentKind::Repeated => run_repeated(spec, out_dir)?,
        ExperimentKind::Sweep => run_sweep(spec, out_dir)?,
        ExperimentKind::Spatial => run_spatial(spec, out_dir)?,
    };
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        generator: GENERATOR_ID.into(),
        egtlab_version: env!("CARGO_PKG_VERSION").into(),
        spec: spec.clone(),
        overrides: overrides.to_vec(),
        outputs,
        wall_time_ms: started.elapsed().as_millis(),
    };
    write_atomic(&out_dir.join("manifest.json"), &pretty(&manifest)?)?;
    Ok(())
}

fn game_of(spec: &RunSpec) -> Result<MatrixGame> {
    spec.game
        .as_ref()
        .ok_or_else(|| anyhow!("spec has no game"))?
        .build()
        .map_err(|e| anyhow!(e))
}

fn roster_of(spec: &RunSpec) -> Result<Vec<repeated::StrategyAutomaton>> {
    spec.roster
        .as_ref()
        .ok_or_else(|| anyhow!("spec has no roster"))?
        .iter()
        .map(|n| repeated::preset(n).map_err(|e| anyhow!(e.to_string())))
        .collect()
}

fn params_of(spec: &RunSpec) -> Result<RepeatedGameParams> {
    spec.repeated.unwrap_or_default().to_params().map_err(|e| anyhow!(e))
}

#[derive(Serialize)]
struct NashOutput<'a> {
    game: &'a str,
    pure: Vec<NashProfile>,
    mixed: Option<Vec<MixedOutput>>,
    degenerate: Option<String>,
}

#[derive(Serialize)]
struct NashProfile {
    row: usize,
    col: usize,
    row_label: String,
    col_label: String,
    payoffs: [f64; 2],
}

#[derive(Serialize)]
struct MixedOutput {
    row_mix: Vec<f64>,
    col_mix: Vec<f64>,
}

fn run_nash(spec: &RunSpec, out_dir: &Path) -> Result<Vec<String>> {
    let game = game_of(spec)?;
    let pure = pure_nash(&game)
        .into_iter()
        .map(|p| {
            let (u, v) = game.payoff(p.row, p.col);
            NashProfile {
                row: p.row,
                col: p.col,
                row_label: game.row_labels()[p.row].clone(),
                col_label: game.col_labels()[p.col].clone(),
                payoffs: [u, v],
            }
        })
        .collect();
    let (mixed, degenerate) = if game.n_rows() <= 4 && game.n_cols() <= 4 {
        match mixed_nash(&game, game.n_rows().min(game.n_cols())) {
            Ok(eqs) => (
                Some(
                    eqs.into_iter()
                        .map(|p| MixedOutput { row_mix: p.row_mix, col_mix: p.col_mix })
                        .collect(),
                ),
                None,
            ),
            Err(egtlab::Error::Degenerate(msg)) => (None, Some(msg)),
            Err(e) => bail!(e.to_string()),
        }
    } else {
        (None, None)
    };
    let output = NashOutput { game: game.name(), pure, mixed, degenerate };
    write_atomic(&out_dir.join("nash.json"), &pretty(&output)?)?;
    Ok(vec!["nash.json".into()])
}

#[derive(Serialize)]
struct AttractorOutput {
    attractor: PopulationState,
    terminal: dynamics::TerminalFlag,
    time: f64,
    labels: Vec<String>,
}

fn run_evolve(spec: &RunSpec, out_dir: &Path) -> Result<Vec<String>> {
    let game = game_of(spec)?;
    let config = spec.dynamics.unwrap_or_default();
    let x0 = match &spec.x0 {
        Some(x) => PopulationState::new(x.clone()).map_err(|e| anyhow!(e.to_string()))?,
        None => PopulationState::uniform(game.n_rows()).map_err(|e| anyhow!(e.to_string()))?,
    };
    let (attractor, trajectory) = match config.kind {
        DynamicsKind::Moran => {
            let counts = dynamics::counts_from_state(&x0, config.population_size as u64);
            let seed = spec.seed.context("seed required for moran runs")?;
            let out = dynamics::moran_run(&game, &counts, &config, seed)
                .map_err(|e| anyhow!(e.to_string()))?;
            (out.trajectory.final_state().clone(), out.trajectory)
        }
        _ => dynamics::run_to_convergence(&game, &x0, &config)
            .map_err(|e| anyhow!(e.to_string()))?,
    };
    let csv = trajectory.to_csv(game.row_labels());
    write_atomic(&out_dir.join("trajectory.csv"), &csv)?;
    let summary = AttractorOutput {
        attractor,
        terminal: trajectory.terminal(),
        time: trajectory.final_time(),
        labels: game.row_labels().to_vec(),
    };
    write_atomic(&out_dir.join("attractor.json"), &pretty(&summary)?)?;
    Ok(vec!["trajectory.csv".into(), "attractor.json".into()])
}

fn run_basins(spec: &RunSpec, out_dir: &Path) -> Result<Vec<String>> {
    let game = game_of(spec)?;
    let config = spec.dynamics.unwrap_or_default();
    let radius = spec.radius.unwrap_or(egtlab::basins::DEFAULT_RADIUS);
    let library = spec::build_library(&game, &spec.attractors, radius).map_err(|e| anyhow!(e))?;
    let samples = spec.samples.context("samples required")?;
    let seed = spec.seed.context("seed required")?;
    let report = estimate_basins(&game, &config, &library, samples, seed)
        .map_err(|e| anyhow!(e.to_string()))?;
    write_atomic(&out_dir.join("basins.json"), &pretty(&report)?)?;
    write_atomic(&out_dir.join("basins.csv"), &report.to_csv())?;
    Ok(vec!["basins.json".into(), "basins.csv".into()])
}

#[derive(Serialize)]
struct MatchRow {
    a: String,
    b: String,
    payoff_a: f64,
    payoff_b: f64,
    cc: f64,
    cd: f64,
    dc: f64,
    dd: f64,
}

fn run_repeated(spec: &RunSpec, out_dir: &Path) -> Result<Vec<String>> {
    let roster = roster_of(spec)?;
    let params = params_of(spec)?;
    let induced = induced_matrix(&roster, &params).map_err(|e| anyhow!(e.to_string()))?;
    write_atomic(&out_dir.join("induced.json"), &pretty(&induced)?)?;

    let mut csv = String::from("a,b,payoff_a,payoff_b,cc,cd,dc,dd\n");
    for a in &roster {
        for b in &roster {
            let m = long_run_payoff(a, b, &params).map_err(|e| anyhow!(e.to_string()))?;
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                a.name(),
                b.name(),
                m.payoffs[0],
                m.payoffs[1],
                m.outcome_dist[0],
                m.outcome_dist[1],
                m.outcome_dist[2],
                m.outcome_dist[3],
            ));
        }
    }
    write_atomic(&out_dir.join("matches.csv"), &csv)?;
    let mut outputs = vec!["induced.json".into(), "matches.csv".into()];

    if let Some([name_a, name_b]) = &spec.trace_pair {
        let a = repeated::preset(name_a).map_err(|e| anyhow!(e.to_string()))?;
        let b = repeated::preset(name_b).map_err(|e| anyhow!(e.to_string()))?;
        let seed = spec.seed.context("seed required for traces")?;
        let (_, trace) = repeated::simulate_match_trace(&a, &b, &params, seed)
            .map_err(|e| anyhow!(e.to_string()))?;
        write_atomic(&out_dir.join("trace.csv"), &repeated::trace_to_csv(&trace))?;
        outputs.push("trace.csv".into());
    }
    Ok(outputs)
}

fn run_sweep(spec: &RunSpec, out_dir: &Path) -> Result<Vec<String>> {
    let roster = roster_of(spec)?;
    let params = params_of(spec)?;
    let config = spec.dynamics.unwrap_or_default();
    let k_grid = spec.k_grid.as_ref().context("k_grid required")?;
    let r_grid = spec.r_grid.as_ref().context("r_grid required")?;
    let samples = spec.samples.context("samples required")?;
    let seed = spec.seed.context("seed required")?;
    let radius = spec.radius.unwrap_or(egtlab::basins::DEFAULT_RADIUS);
    let table = basin_sweep(&roster, &params, k_grid, r_grid, &config, samples, seed, radius)
        .map_err(|e| anyhow!(e.to_string()))?;
    write_atomic(&out_dir.join("sweep.csv"), &table.to_csv())?;
    Ok(vec!["sweep.csv".into()])
}

#[derive(Serialize)]
struct SpatialOutput {
    terminal: egtlab::spatial::SpatialTerminal,
    final_state: SpatialState,
    labels: Vec<String>,
}

fn run_spatial(spec: &RunSpec, out_dir: &Path) -> Result<Vec<String>> {
    let game = game_of(spec)?;
    let sp = spec.spatial.as_ref().context("spatial section required")?;
    let strategies = match &sp.initial {
        SpatialInitial::Strategies(s) => s.clone(),
        SpatialInitial::Path { path } => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let scenario: SpatialScenario =
                serde_json::from_str(&text).context("parsing scenario")?;
            if scenario.topology != sp.topology {
                bail!("scenario topology does not match the spec topology");
            }
            scenario.strategies
        }
    };
    let config = SpatialConfig {
        topology: sp.topology,
        game: game.clone(),
        update: UpdateRule::default(),
    };
    let lattice = Lattice::new(&config).map_err(|e| anyhow!(e.to_string()))?;
    let state0 = SpatialState { strategies, generation: 0 };
    let run = lattice.run(&state0, sp.max_generations).map_err(|e| anyhow!(e.to_string()))?;

    write_atomic(&out_dir.join("frequencies.csv"), &run.to_csv(game.row_labels()))?;
    let output = SpatialOutput {
        terminal: run.terminal,
        final_state: run.final_state.clone(),
        labels: game.row_labels().to_vec(),
    };
    write_atomic(&out_dir.join("terminal.json"), &pretty(&output)?)?;
    let mut outputs = vec!["frequencies.csv".into(), "terminal.json".into()];

    if sp.record_states {
        let mut states = Vec::with_capacity(run.frequencies.len());
        let mut current = state0;
        states.push(current.clone());
        for _ in 1..run.frequencies.len() {
            current = lattice.step(&current).map_err(|e| anyhow!(e.to_string()))?;
            states.push(current.clone());
        }
        write_atomic(&out_dir.join("states.json"), &pretty(&states)?)?;
        outputs.push("states.json".into());
    }
    Ok(outputs)
}
