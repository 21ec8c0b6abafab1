//! Finite-state strategies for the noisy iterated prisoner's dilemma with
//! apology. A state carries the intended action, when to apologize after an
//! executed defection, whether to trust unexposed apologies, and a total
//! transition table over (own executed action, partner executed action,
//! partner apology status).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Cooperate,
    Defect,
}

impl Action {
    pub(crate) fn idx(self) -> usize {
        match self {
            Action::Cooperate => 0,
            Action::Defect => 1,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Action::Cooperate => "C",
            Action::Defect => "D",
        }
    }
}

/// When a state issues an apology after an executed defection.
/// `OnOwnErrorDefection` fires only when the intent was to cooperate, so
/// every such apology is sincere; `Always` fires regardless of intent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApologyRule {
    Never,
    OnOwnErrorDefection,
    Always,
}

/// Whether a state trusts apologies that were not exposed as fake.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptanceRule {
    BelieveUnexposed,
    IgnoreApologies,
}

/// How a partner's apology registers with the observer. `Believed` occurs
/// only when the observer believes unexposed apologies and the apology was
/// not exposed; an ignored or absent apology registers as `None`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApologyStatus {
    None,
    Believed,
    Exposed,
}

impl ApologyStatus {
    pub(crate) fn idx(self) -> usize {
        match self {
            ApologyStatus::None => 0,
            ApologyStatus::Believed => 1,
            ApologyStatus::Exposed => 2,
        }
    }
}

/// One automaton state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutomatonState {
    pub label: String,
    pub intent: Action,
    pub apology_rule: ApologyRule,
    pub acceptance_rule: AcceptanceRule,
    /// `next[own executed][partner executed][partner apology status]`
    pub next: [[[usize; 3]; 2]; 2],
}

/// A deterministic finite-state strategy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAutomaton")]
pub struct StrategyAutomaton {
    name: String,
    initial: usize,
    states: Vec<AutomatonState>,
}

#[derive(Deserialize)]
struct RawAutomaton {
    name: String,
    initial: usize,
    states: Vec<AutomatonState>,
}

impl TryFrom<RawAutomaton> for StrategyAutomaton {
    type Error = Error;
    fn try_from(raw: RawAutomaton) -> Result<Self> {
        StrategyAutomaton::new(raw.name, raw.initial, raw.states)
    }
}

impl StrategyAutomaton {
    pub fn new(name: impl Into<String>, initial: usize, states: Vec<AutomatonState>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidArgument("automaton needs at least one state".into()));
        }
        if initial >= states.len() {
            return Err(Error::InvalidArgument(format!(
                "initial state {} out of range ({} states)",
                initial,
                states.len()
            )));
        }
        for (i, st) in states.iter().enumerate() {
            for own in 0..2 {
                for partner in 0..2 {
                    for status in 0..3 {
                        let target = st.next[own][partner][status];
                        if target >= states.len() {
                            return Err(Error::InvalidArgument(format!(
                                "state {i} transition [{own}][{partner}][{status}] targets \
                                 missing state {target}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(StrategyAutomaton { name: name.into(), initial, states })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, s: usize) -> &AutomatonState {
        &self.states[s]
    }

    pub fn intent(&self, s: usize) -> Action {
        self.states[s].intent
    }

    pub fn transition(&self, s: usize, own: Action, partner: Action, status: ApologyStatus) -> usize {
        self.states[s].next[own.idx()][partner.idx()][status.idx()]
    }
}

pub const PRESET_NAMES: [&str; 7] =
    ["ALLC", "ALLD", "TFT", "GRIM", "APOLOGIZER", "EXPLOITER", "UNFORGIVING"];

/// Build a named preset automaton.
///
/// * `ALLC` / `ALLD` — unconditional cooperator / defector.
/// * `TFT` — starts cooperative, then copies the partner's last executed
///   action; believes unexposed apologies (a believed apology counts as
///   cooperation).
/// * `GRIM` — cooperates until the partner's first executed defection, then
///   defects forever; ignores apologies.
/// * `APOLOGIZER` — TFT that apologizes after its own error defections and
///   believes unexposed apologies.
/// * `EXPLOITER` — always defects, always apologizes.
/// * `UNFORGIVING` — TFT that ignores apologies.
pub fn preset(name: &str) -> Result<StrategyAutomaton> {
    match name {
        "ALLC" => Ok(constant("ALLC", Action::Cooperate, ApologyRule::Never, AcceptanceRule::BelieveUnexposed)),
        "ALLD" => Ok(constant("ALLD", Action::Defect, ApologyRule::Never, AcceptanceRule::IgnoreApologies)),
        "TFT" => Ok(reciprocator("TFT", ApologyRule::Never, AcceptanceRule::BelieveUnexposed)),
        "GRIM" => Ok(grim()),
        "APOLOGIZER" => Ok(reciprocator(
            "APOLOGIZER",
            ApologyRule::OnOwnErrorDefection,
            AcceptanceRule::BelieveUnexposed,
        )),
        "EXPLOITER" => Ok(constant("EXPLOITER", Action::Defect, ApologyRule::Always, AcceptanceRule::BelieveUnexposed)),
        "UNFORGIVING" => Ok(reciprocator("UNFORGIVING", ApologyRule::Never, AcceptanceRule::IgnoreApologies)),
        other => Err(Error::InvalidArgument(format!("unknown preset `{other}`"))),
    }
}

/// All presets, for rosters and fixtures.
pub fn all_presets() -> Vec<StrategyAutomaton> {
    PRESET_NAMES.iter().map(|n| preset(n).expect("preset names are valid")).collect()
}

fn single_target(target: usize) -> [[[usize; 3]; 2]; 2] {
    [[[target; 3]; 2]; 2]
}

fn constant(
    name: &str,
    intent: Action,
    apology_rule: ApologyRule,
    acceptance_rule: AcceptanceRule,
) -> StrategyAutomaton {
    let state = AutomatonState {
        label: intent.short().to_lowercase(),
        intent,
        apology_rule,
        acceptance_rule,
        next: single_target(0),
    };
    StrategyAutomaton::new(name, 0, vec![state]).expect("single state is valid")
}

/// Two-state reciprocator: state 0 intends Cooperate, state 1 Defect, and
/// the next state mirrors the partner's effective action. Believers treat a
/// believed apology as cooperation; ignorers react to the raw executed
/// action.
fn reciprocator(name: &str, apology_rule: ApologyRule, acceptance_rule: AcceptanceRule) -> StrategyAutomaton {
    let believes = acceptance_rule == AcceptanceRule::BelieveUnexposed;
    let mut next = [[[0usize; 3]; 2]; 2];
    for own in 0..2 {
        for partner in 0..2 {
            for status in 0..3 {
                let believed = status == ApologyStatus::Believed.idx();
                let effective_cooperate = partner == 0 || (believes && believed);
                next[own][partner][status] = if effective_cooperate { 0 } else { 1 };
            }
        }
    }
    let mk = |label: &str, intent| AutomatonState {
        label: label.into(),
        intent,
        apology_rule,
        acceptance_rule,
        next,
    };
    StrategyAutomaton::new(name, 0, vec![mk("coop", Action::Cooperate), mk("defect", Action::Defect)])
        .expect("reciprocator is valid")
}

fn grim() -> StrategyAutomaton {
    let mut from_coop = [[[0usize; 3]; 2]; 2];
    for own in 0..2 {
        for status in 0..3 {
            from_coop[own][Action::Defect.idx()][status] = 1;
        }
    }
    let coop = AutomatonState {
        label: "coop".into(),
        intent: Action::Cooperate,
        apology_rule: ApologyRule::Never,
        acceptance_rule: AcceptanceRule::IgnoreApologies,
        next: from_coop,
    };
    let punish = AutomatonState {
        label: "punish".into(),
        intent: Action::Defect,
        apology_rule: ApologyRule::Never,
        acceptance_rule: AcceptanceRule::IgnoreApologies,
        next: single_target(1),
    };
    StrategyAutomaton::new("GRIM", 0, vec![coop, punish]).expect("grim is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tft_starts_cooperative() {
        let tft = preset("TFT").unwrap();
        assert_eq!(tft.intent(tft.initial()), Action::Cooperate);
    }

    #[test]
    fn grim_defects_forever_after_partner_defection() {
        let g = preset("GRIM").unwrap();
        let punished = g.transition(0, Action::Cooperate, Action::Defect, ApologyStatus::None);
        assert_eq!(g.intent(punished), Action::Defect);
        // absorbing regardless of what happens next
        for own in [Action::Cooperate, Action::Defect] {
            for partner in [Action::Cooperate, Action::Defect] {
                for status in [ApologyStatus::None, ApologyStatus::Believed, ApologyStatus::Exposed] {
                    assert_eq!(g.transition(punished, own, partner, status), punished);
                }
            }
        }
    }

    #[test]
    fn exploiter_always_apologizes_everywhere() {
        let e = preset("EXPLOITER").unwrap();
        for s in 0..e.n_states() {
            assert_eq!(e.state(s).apology_rule, ApologyRule::Always);
            assert_eq!(e.intent(s), Action::Defect);
        }
    }

    #[test]
    fn apologizer_forgives_believed_apologies() {
        let a = preset("APOLOGIZER").unwrap();
        let s = a.transition(0, Action::Cooperate, Action::Defect, ApologyStatus::Believed);
        assert_eq!(a.intent(s), Action::Cooperate);
        let s = a.transition(0, Action::Cooperate, Action::Defect, ApologyStatus::Exposed);
        assert_eq!(a.intent(s), Action::Defect);
    }

    #[test]
    fn unforgiving_ignores_believed_status() {
        let u = preset("UNFORGIVING").unwrap();
        let s = u.transition(0, Action::Cooperate, Action::Defect, ApologyStatus::Believed);
        assert_eq!(u.intent(s), Action::Defect);
    }

    #[test]
    fn unknown_preset_is_invalid() {
        assert!(preset("PAVLOV").is_err());
    }

    #[test]
    fn automaton_rejects_dangling_transition() {
        let bad = AutomatonState {
            label: "s".into(),
            intent: Action::Cooperate,
            apology_rule: ApologyRule::Never,
            acceptance_rule: AcceptanceRule::BelieveUnexposed,
            next: single_target(3),
        };
        assert!(StrategyAutomaton::new("bad", 0, vec![bad]).is_err());
    }

    #[test]
    fn presets_serde_round_trip() {
        for a in all_presets() {
            let json = serde_json::to_string(&a).unwrap();
            let back: StrategyAutomaton = serde_json::from_str(&json).unwrap();
            assert_eq!(a, back);
        }
    }
}
