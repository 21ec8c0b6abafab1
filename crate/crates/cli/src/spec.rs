//! Declarative run specifications: parsing, validation with field-level
//! errors, and normalization (defaults filled in and recorded, including a
//! generated seed when none is given).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use egtlab::basins::Attractor;
use egtlab::dynamics::{DynamicsConfig, DynamicsKind, PopulationState};
use egtlab::games::{self, MatrixGame, PublicGoodsGame};
use egtlab::repeated::{self, Continuation, RepeatedGameParams, StrategyAutomaton};
use egtlab::spatial::Topology;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Nash,
    Evolve,
    Basins,
    Repeated,
    Sweep,
    Spatial,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Nash => "nash",
            ExperimentKind::Evolve => "evolve",
            ExperimentKind::Basins => "basins",
            ExperimentKind::Repeated => "repeated",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::Spatial => "spatial",
        }
    }
}

/// Reference to a game: a built-in name or a JSON file on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GameRef {
    Name(String),
    Path { path: PathBuf },
}

pub const BUILTIN_GAMES: [&str; 6] =
    ["pd", "stag_hunt", "coordination", "nash_demand", "ultimatum", "public_goods"];

impl GameRef {
    pub fn build(&self) -> Result<MatrixGame, String> {
        match self {
            GameRef::Name(name) => match name.as_str() {
                "pd" => Ok(games::pd()),
                "stag_hunt" => Ok(games::stag_hunt()),
                "coordination" => Ok(games::coordination()),
                "nash_demand" => {
                    games::nash_demand(10.0, &[3.0, 5.0, 7.0]).map_err(|e| e.to_string())
                }
                "ultimatum" => {
                    games::ultimatum_minigame(10.0, 5.0, 2.0).map_err(|e| e.to_string())
                }
                "public_goods" => Ok(PublicGoodsGame::new(4, 1.0, 2.0)
                    .map_err(|e| e.to_string())?
                    .induced_game()),
                other => Err(format!(
                    "unknown built-in game `{other}` (expected one of {})",
                    BUILTIN_GAMES.join(", ")
                )),
            },
            GameRef::Path { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                serde_json::from_str(&text).map_err(|e| format!("invalid game JSON: {e}"))
            }
        }
    }
}

/// Repeated-game parameters as written in a spec; missing fields default.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RepeatedSpec {
    pub epsilon: f64,
    pub apology_cost: f64,
    pub reliability: f64,
    pub continuation: Continuation,
    pub horizon: usize,
}

impl Default for RepeatedSpec {
    fn default() -> Self {
        RepeatedSpec {
            epsilon: 0.0,
            apology_cost: 0.0,
            reliability: 0.0,
            continuation: Continuation::LimitOfMeans,
            horizon: 100_000,
        }
    }
}

impl RepeatedSpec {
    pub fn to_params(self) -> Result<RepeatedGameParams, String> {
        let p = RepeatedGameParams {
            epsilon: self.epsilon,
            apology_cost: self.apology_cost,
            reliability: self.reliability,
            continuation: self.continuation,
            horizon: self.horizon,
        };
        p.validate().map_err(|e| e.to_string())?;
        Ok(p)
    }
}

/// Attractor library specification: the roster/game vertices, or an
/// explicit list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttractorSpec {
    Keyword(String),
    Explicit(Vec<AttractorEntry>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttractorEntry {
    pub label: String,
    pub state: Vec<f64>,
    pub radius: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialSpec {
    pub topology: Topology,
    /// Per-node strategy indices, or a path to a scenario fixture.
    pub initial: SpatialInitial,
    #[serde(default = "default_max_generations")]
    pub max_generations: u64,
    /// Also dump every generation's full state.
    #[serde(default)]
    pub record_states: bool,
}

fn default_max_generations() -> u64 {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpatialInitial {
    Strategies(Vec<usize>),
    Path { path: PathBuf },
}

/// A declarative experiment description. One spec = one experiment = one
/// manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game: Option<GameRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roster: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<DynamicsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeated: Option<RepeatedSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attractors: Option<AttractorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatial: Option<SpatialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_pair: Option<[String; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub reason: String,
}

/// Validate a parsed spec and fill defaults. Every error carries the field
/// path that caused it. The result is normalized: validating it again is
/// the identity.
pub fn validate(mut spec: RunSpec) -> Result<RunSpec, Vec<FieldError>> {
    let mut errors = Vec::new();
    let err = |errors: &mut Vec<FieldError>, field: &str, reason: String| {
        errors.push(FieldError { field: field.into(), reason });
    };

    if spec.schema_version != SCHEMA_VERSION {
        err(
            &mut errors,
            "schema_version",
            format!("unsupported version {} (expected {SCHEMA_VERSION})", spec.schema_version),
        );
    }

    // defaults, recorded in the normalized spec
    if spec.seed.is_none() {
        spec.seed = Some(rand::random());
    }
    let needs_dynamics = matches!(
        spec.experiment,
        ExperimentKind::Evolve | ExperimentKind::Basins | ExperimentKind::Sweep
    );
    if needs_dynamics && spec.dynamics.is_none() {
        spec.dynamics = Some(DynamicsConfig::default());
    }
    if let Some(d) = &spec.dynamics {
        if let Err(e) = d.validate() {
            let field = match e {
                egtlab::Error::InvalidArgument(ref m) if m.contains("assortment") => {
                    "dynamics.assortment"
                }
                egtlab::Error::InvalidArgument(ref m) if m.contains("step_size") => {
                    "dynamics.step_size"
                }
                egtlab::Error::InvalidArgument(ref m) if m.contains("mutation") => {
                    "dynamics.mutation"
                }
                egtlab::Error::InvalidArgument(ref m) if m.contains("selection_intensity") => {
                    "dynamics.selection_intensity"
                }
                egtlab::Error::InvalidArgument(ref m) if m.contains("convergence_tol") => {
                    "dynamics.convergence_tol"
                }
                egtlab::Error::InvalidArgument(ref m) if m.contains("max_steps") => {
                    "dynamics.max_steps"
                }
                egtlab::Error::InvalidArgument(ref m) if m.contains("population_size") => {
                    "dynamics.population_size"
                }
                _ => "dynamics",
            };
            let reason = match e {
                egtlab::Error::InvalidArgument(m) => {
                    m.split(": ").last().unwrap_or("invalid").to_string()
                }
                other => other.to_string(),
            };
            err(&mut errors, field, reason);
        }
    }

    let needs_repeated =
        matches!(spec.experiment, ExperimentKind::Repeated | ExperimentKind::Sweep);
    if needs_repeated && spec.repeated.is_none() {
        spec.repeated = Some(RepeatedSpec::default());
    }
    if let Some(r) = &spec.repeated {
        if let Err(e) = r.to_params() {
            err(&mut errors, "repeated", e);
        }
    }

    match spec.experiment {
        ExperimentKind::Nash => {
            require_game(&mut spec, &mut errors);
        }
        ExperimentKind::Evolve => {
            let game = require_game(&mut spec, &mut errors);
            if let (Some(g), Some(x0)) = (&game, &spec.x0) {
                if x0.len() != g.n_rows() {
                    err(
                        &mut errors,
                        "x0",
                        format!("has {} entries, game has {} strategies", x0.len(), g.n_rows()),
                    );
                } else if PopulationState::new(x0.clone()).is_err() {
                    err(&mut errors, "x0", "entries must be nonnegative and sum to 1".into());
                }
            }
        }
        ExperimentKind::Basins => {
            let game = require_game(&mut spec, &mut errors);
            if spec.samples.is_none() {
                spec.samples = Some(10_000);
            }
            if spec.samples == Some(0) {
                err(&mut errors, "samples", "must be at least 1".into());
            }
            if spec.radius.is_none() {
                spec.radius = Some(egtlab::basins::DEFAULT_RADIUS);
            }
            if let Some(r) = spec.radius {
                if !(r.is_finite() && r > 0.0) {
                    err(&mut errors, "radius", "must be positive".into());
                }
            }
            if let (Some(g), Some(AttractorSpec::Explicit(entries))) = (&game, &spec.attractors) {
                for (i, a) in entries.iter().enumerate() {
                    if a.state.len() != g.n_rows() {
                        err(
                            &mut errors,
                            &format!("attractors[{i}].state"),
                            format!("has {} entries, game has {}", a.state.len(), g.n_rows()),
                        );
                    }
                }
            }
        }
        ExperimentKind::Repeated => {
            require_roster(&mut spec, &mut errors);
            if let (Some(pair), Some(roster)) = (&spec.trace_pair, &spec.roster) {
                for (i, name) in pair.iter().enumerate() {
                    if !roster.contains(name) {
                        err(
                            &mut errors,
                            &format!("trace_pair[{i}]"),
                            format!("`{name}` is not in the roster"),
                        );
                    }
                }
            }
        }
        ExperimentKind::Sweep => {
            require_roster(&mut spec, &mut errors);
            if spec.samples.is_none() {
                spec.samples = Some(2_000);
            }
            if spec.radius.is_none() {
                spec.radius = Some(egtlab::basins::DEFAULT_RADIUS);
            }
            for (field, grid) in [("k_grid", &spec.k_grid), ("r_grid", &spec.r_grid)] {
                match grid {
                    None => err(&mut errors, field, "is required for sweep".into()),
                    Some(g) if g.is_empty() => err(&mut errors, field, "must not be empty".into()),
                    Some(g) => {
                        if field == "k_grid" && g.iter().any(|&k| !(k.is_finite() && k >= 0.0)) {
                            err(&mut errors, field, "entries must be nonnegative".into());
                        }
                        if field == "r_grid" && g.iter().any(|&r| !(0.0..=1.0).contains(&r)) {
                            err(&mut errors, field, "entries must lie in [0,1]".into());
                        }
                    }
                }
            }
        }
        ExperimentKind::Spatial => {
            require_game(&mut spec, &mut errors);
            match &spec.spatial {
                None => err(&mut errors, "spatial", "is required for spatial runs".into()),
                Some(s) => {
                    if s.max_generations == 0 {
                        err(&mut errors, "spatial.max_generations", "must be at least 1".into());
                    }
                }
            }
        }
    }

    if errors.is_empty() {
        Ok(spec)
    } else {
        Err(errors)
    }
}

fn require_game(spec: &mut RunSpec, errors: &mut Vec<FieldError>) -> Option<MatrixGame> {
    match &spec.game {
        None => {
            errors.push(FieldError {
                field: "game".into(),
                reason: format!("is required for `{}`", spec.experiment.name()),
            });
            None
        }
        Some(g) => match g.build() {
            Ok(game) => Some(game),
            Err(reason) => {
                errors.push(FieldError { field: "game".into(), reason });
                None
            }
        },
    }
}

fn require_roster(spec: &mut RunSpec, errors: &mut Vec<FieldError>) -> Option<Vec<StrategyAutomaton>> {
    match &spec.roster {
        None => {
            errors.push(FieldError {
                field: "roster".into(),
                reason: format!("is required for `{}`", spec.experiment.name()),
            });
            None
        }
        Some(names) if names.is_empty() => {
            errors.push(FieldError { field: "roster".into(), reason: "must not be empty".into() });
            None
        }
        Some(names) => {
            let mut roster = Vec::new();
            let mut ok = true;
            for (i, name) in names.iter().enumerate() {
                match repeated::preset(name) {
                    Ok(a) => roster.push(a),
                    Err(e) => {
                        ok = false;
                        errors.push(FieldError {
                            field: format!("roster[{i}]"),
                            reason: e.to_string().replace("invalid argument: ", ""),
                        });
                    }
                }
            }
            if names.len()
                != names.iter().collect::<std::collections::HashSet<_>>().len()
            {
                errors.push(FieldError {
                    field: "roster".into(),
                    reason: "names must be unique".into(),
                });
                ok = false;
            }
            ok.then_some(roster)
        }
    }
}

/// Build the attractor library for a basins run.
pub fn build_library(
    game: &MatrixGame,
    attractors: &Option<AttractorSpec>,
    radius: f64,
) -> Result<egtlab::basins::AttractorLibrary, String> {
    match attractors {
        None => egtlab::basins::AttractorLibrary::vertices(game.row_labels(), radius)
            .map_err(|e| e.to_string()),
        Some(AttractorSpec::Keyword(word)) if word == "vertices" => {
            egtlab::basins::AttractorLibrary::vertices(game.row_labels(), radius)
                .map_err(|e| e.to_string())
        }
        Some(AttractorSpec::Keyword(word)) => {
            Err(format!("unknown attractor keyword `{word}` (expected `vertices`)"))
        }
        Some(AttractorSpec::Explicit(entries)) => {
            let entries = entries
                .iter()
                .map(|a| {
                    Ok(Attractor {
                        label: a.label.clone(),
                        state: PopulationState::new(a.state.clone())
                            .map_err(|e| format!("attractor `{}`: {e}", a.label))?,
                        radius: a.radius.unwrap_or(radius),
                    })
                })
                .collect::<Result<Vec<_>, String>>()?;
            egtlab::basins::AttractorLibrary::new(entries).map_err(|e| e.to_string())
        }
    }
}
