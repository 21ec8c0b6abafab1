//! Noisy iterated prisoner's dilemma with costly apology and partially
//! reliable guilt signals.
//!
//! Intended cooperation executes as defection with probability `epsilon`
//! (errors are one-sided: an intended defection never flips). A player who
//! executed a defection may apologize per its state's apology rule, paying
//! `apology_cost` on issuance. A sincere apology (the defection was an
//! error) is never exposed; an insincere one is exposed with probability
//! `reliability`. Long-run payoffs come from an exact joint Markov chain
//! solve ([`long_run_payoff`]); [`simulate_match`] is the Monte Carlo
//! counterpart used as an independent check.

mod automaton;
mod chain;
mod induced;
mod simulate;

pub use automaton::{
    all_presets, preset, AcceptanceRule, Action, ApologyRule, ApologyStatus, AutomatonState,
    StrategyAutomaton, PRESET_NAMES,
};
pub use chain::{long_run_payoff, MatchOutcome, OUTCOME_LABELS};
pub use induced::{deterrence_threshold, induced_matrix};
pub use simulate::{
    simulate_match, simulate_match_trace, trace_to_csv, RoundRecord, SimulatedMatch,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How long-run payoffs aggregate the stage payoffs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Continuation {
    LimitOfMeans,
    Discounted { delta: f64 },
}

/// Parameters of the repeated-game engine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatedGameParams {
    /// Probability an intended cooperation executes as defection, per
    /// player per round.
    pub epsilon: f64,
    /// Utility paid by a player who issues an apology, exposed or not.
    pub apology_cost: f64,
    /// Probability an insincere apology is exposed.
    pub reliability: f64,
    pub continuation: Continuation,
    /// Round count for the Monte Carlo simulator.
    pub horizon: usize,
}

impl RepeatedGameParams {
    pub fn new(epsilon: f64, apology_cost: f64, reliability: f64) -> Result<Self> {
        let p = RepeatedGameParams {
            epsilon,
            apology_cost,
            reliability,
            continuation: Continuation::LimitOfMeans,
            horizon: 100_000,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_continuation(mut self, continuation: Continuation) -> Result<Self> {
        self.continuation = continuation;
        self.validate()?;
        Ok(self)
    }

    pub fn with_horizon(mut self, horizon: usize) -> Result<Self> {
        self.horizon = horizon;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidArgument("epsilon must lie in [0, 1)".into()));
        }
        if !(self.apology_cost >= 0.0 && self.apology_cost.is_finite()) {
            return Err(Error::InvalidArgument("apology_cost must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.reliability) {
            return Err(Error::InvalidArgument("reliability must lie in [0, 1]".into()));
        }
        if let Continuation::Discounted { delta } = self.continuation {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(Error::InvalidArgument("delta must lie in (0, 1)".into()));
            }
        }
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        Ok(())
    }
}

/// Stage payoffs of the underlying prisoner's dilemma.
pub(crate) fn stage_payoffs(a: Action, b: Action) -> (f64, f64) {
    match (a, b) {
        (Action::Cooperate, Action::Cooperate) => (2.0, 2.0),
        (Action::Cooperate, Action::Defect) => (0.0, 3.0),
        (Action::Defect, Action::Cooperate) => (3.0, 0.0),
        (Action::Defect, Action::Defect) => (1.0, 1.0),
    }
}

/// Index of the joint executed outcome in `{CC, CD, DC, DD}`.
pub(crate) fn joint_outcome_idx(a: Action, b: Action) -> usize {
    a.idx() * 2 + b.idx()
}

/// Everything that happened in one round between two automata.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundOutcome {
    pub intents: [Action; 2],
    pub executed: [Action; 2],
    pub apologized: [bool; 2],
    /// `status[i]` is how player i's apology registers with the opponent.
    pub status: [ApologyStatus; 2],
    /// Stage payoffs net of apology costs.
    pub payoffs: [f64; 2],
    pub next_states: [usize; 2],
}

/// The random draws of one round, resolved to booleans.
#[derive(Clone, Copy, Debug)]
pub(crate) struct RoundDraws {
    /// Error flip per player; consulted only when the intent is Cooperate.
    pub err: [bool; 2],
    /// Exposure per player; consulted only for an insincere apology.
    pub exposed: [bool; 2],
}

/// Deterministic round resolution shared by the Monte Carlo simulator and
/// the exact chain builder, so both implement identical rules.
pub(crate) fn resolve_round(
    a: &StrategyAutomaton,
    sa: usize,
    b: &StrategyAutomaton,
    sb: usize,
    apology_cost: f64,
    draws: RoundDraws,
) -> RoundOutcome {
    let intents = [a.intent(sa), b.intent(sb)];
    let mut executed = intents;
    for i in 0..2 {
        if intents[i] == Action::Cooperate && draws.err[i] {
            executed[i] = Action::Defect;
        }
    }

    let rules = [a.state(sa).apology_rule, b.state(sb).apology_rule];
    let mut apologized = [false; 2];
    let mut exposed = [false; 2];
    for i in 0..2 {
        if executed[i] == Action::Defect {
            let sincere = intents[i] == Action::Cooperate;
            apologized[i] = match rules[i] {
                ApologyRule::Never => false,
                ApologyRule::OnOwnErrorDefection => sincere,
                ApologyRule::Always => true,
            };
            if apologized[i] && !sincere {
                exposed[i] = draws.exposed[i];
            }
        }
    }

    let acceptance = [a.state(sa).acceptance_rule, b.state(sb).acceptance_rule];
    let mut status = [ApologyStatus::None; 2];
    for i in 0..2 {
        let observer = 1 - i;
        status[i] = if !apologized[i] {
            ApologyStatus::None
        } else if exposed[i] {
            ApologyStatus::Exposed
        } else if acceptance[observer] == AcceptanceRule::BelieveUnexposed {
            ApologyStatus::Believed
        } else {
            ApologyStatus::None
        };
    }

    let (pa, pb) = stage_payoffs(executed[0], executed[1]);
    let payoffs = [
        pa - if apologized[0] { apology_cost } else { 0.0 },
        pb - if apologized[1] { apology_cost } else { 0.0 },
    ];

    let next_states = [
        a.transition(sa, executed[0], executed[1], status[1]),
        b.transition(sb, executed[1], executed[0], status[0]),
    ];

    RoundOutcome { intents, executed, apologized, status, payoffs, next_states }
}

/// Play one round with explicit randomness: read intents, flip intended
/// cooperations with probability `epsilon`, apologize per rule, expose
/// insincere apologies with probability `reliability`, pay stage payoffs
/// net of apology costs, and step both automata.
pub fn round_protocol(
    a: &StrategyAutomaton,
    sa: usize,
    b: &StrategyAutomaton,
    sb: usize,
    params: &RepeatedGameParams,
    rng: &mut impl Rng,
) -> Result<RoundOutcome> {
    params.validate()?;
    if sa >= a.n_states() || sb >= b.n_states() {
        return Err(Error::InvalidArgument("automaton state out of range".into()));
    }
    Ok(round_protocol_unchecked(a, sa, b, sb, params, rng))
}

pub(crate) fn round_protocol_unchecked(
    a: &StrategyAutomaton,
    sa: usize,
    b: &StrategyAutomaton,
    sb: usize,
    params: &RepeatedGameParams,
    rng: &mut impl Rng,
) -> RoundOutcome {
    let mut draws = RoundDraws { err: [false; 2], exposed: [false; 2] };
    let autos = [(a, sa), (b, sb)];
    for i in 0..2 {
        let (auto, s) = autos[i];
        if auto.intent(s) == Action::Cooperate {
            draws.err[i] = rng.gen_bool(params.epsilon);
        }
    }
    // exposure draws depend on the apology decisions, reconstructed here
    for i in 0..2 {
        let (auto, s) = autos[i];
        let intent = auto.intent(s);
        let defected = intent == Action::Defect || draws.err[i];
        let insincere_apology = defected
            && intent == Action::Defect
            && matches!(auto.state(s).apology_rule, ApologyRule::Always);
        if insincere_apology {
            draws.exposed[i] = rng.gen_bool(params.reliability);
        }
    }
    resolve_round(a, sa, b, sb, params.apology_cost, draws)
}
