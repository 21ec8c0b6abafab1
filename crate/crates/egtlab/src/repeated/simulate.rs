//! Seeded Monte Carlo play of a match; the empirical counterpart of the
//! exact chain solve, used as an independent oracle.

use serde::{Deserialize, Serialize};

use super::{
    joint_outcome_idx, round_protocol_unchecked, Action, ApologyStatus, Continuation,
    MatchOutcome, RepeatedGameParams, StrategyAutomaton,
};
use crate::error::Result;
use crate::rng::stream_rng;

/// Empirical match result. `payoff_se` is the batch-means standard error of
/// the per-round averages (100 batches), available in limit-of-means mode.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SimulatedMatch {
    pub outcome: MatchOutcome,
    pub payoff_se: Option<[f64; 2]>,
}

/// One traced round, exportable as CSV.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub intents: [Action; 2],
    pub executed: [Action; 2],
    pub apologized: [bool; 2],
    pub status: [ApologyStatus; 2],
    pub payoffs: [f64; 2],
}

/// Play `params.horizon` rounds with seeded randomness. Deterministic in
/// `(a, b, params, seed)`.
pub fn simulate_match(
    a: &StrategyAutomaton,
    b: &StrategyAutomaton,
    params: &RepeatedGameParams,
    seed: u64,
) -> Result<SimulatedMatch> {
    simulate_inner(a, b, params, seed, &mut |_| {})
}

/// As [`simulate_match`], additionally returning the full round-by-round
/// trace. Intended for modest horizons.
pub fn simulate_match_trace(
    a: &StrategyAutomaton,
    b: &StrategyAutomaton,
    params: &RepeatedGameParams,
    seed: u64,
) -> Result<(SimulatedMatch, Vec<RoundRecord>)> {
    let mut trace = Vec::with_capacity(params.horizon);
    let m = simulate_inner(a, b, params, seed, &mut |r| trace.push(r))?;
    Ok((m, trace))
}

fn simulate_inner(
    a: &StrategyAutomaton,
    b: &StrategyAutomaton,
    params: &RepeatedGameParams,
    seed: u64,
    observe: &mut dyn FnMut(RoundRecord),
) -> Result<SimulatedMatch> {
    params.validate()?;
    let t = params.horizon;
    let mut rng = stream_rng(seed, 0);
    let mut states = [a.initial(), b.initial()];

    let mut sums = [0.0f64; 2];
    let mut discounted = [0.0f64; 2];
    let mut weight = 1.0f64;
    let mut outcome_counts = [0u64; 4];

    let n_batches = 100.min(t);
    let batch_len = t / n_batches;
    let mut batch_sums = vec![[0.0f64; 2]; n_batches];

    for round in 0..t {
        let out = round_protocol_unchecked(a, states[0], b, states[1], params, &mut rng);
        observe(RoundRecord {
            round,
            intents: out.intents,
            executed: out.executed,
            apologized: out.apologized,
            status: out.status,
            payoffs: out.payoffs,
        });
        for p in 0..2 {
            sums[p] += out.payoffs[p];
            discounted[p] += weight * out.payoffs[p];
        }
        if let Continuation::Discounted { delta } = params.continuation {
            weight *= delta;
        }
        let bi = (round / batch_len).min(n_batches - 1);
        for p in 0..2 {
            batch_sums[bi][p] += out.payoffs[p];
        }
        outcome_counts[joint_outcome_idx(out.executed[0], out.executed[1])] += 1;
        states = out.next_states;
    }

    let outcome_dist = outcome_counts.map(|c| c as f64 / t as f64);
    let (payoffs, payoff_se) = match params.continuation {
        Continuation::LimitOfMeans => {
            let means = [sums[0] / t as f64, sums[1] / t as f64];
            let se = if n_batches >= 2 {
                let mut se = [0.0; 2];
                for p in 0..2 {
                    let batch_means: Vec<f64> = (0..n_batches)
                        .map(|i| {
                            let len = if i == n_batches - 1 { t - batch_len * (n_batches - 1) } else { batch_len };
                            batch_sums[i][p] / len as f64
                        })
                        .collect();
                    let grand = batch_means.iter().sum::<f64>() / n_batches as f64;
                    let var = batch_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>()
                        / (n_batches - 1) as f64;
                    se[p] = (var / n_batches as f64).sqrt();
                }
                Some(se)
            } else {
                None
            };
            (means, se)
        }
        Continuation::Discounted { delta } => {
            ([discounted[0] * (1.0 - delta), discounted[1] * (1.0 - delta)], None)
        }
    };

    Ok(SimulatedMatch { outcome: MatchOutcome { payoffs, outcome_dist }, payoff_se })
}

/// Render a trace as CSV with one row per round.
pub fn trace_to_csv(trace: &[RoundRecord]) -> String {
    let mut out = String::from(
        "round,intent_a,intent_b,executed_a,executed_b,apology_a,apology_b,status_a,status_b,payoff_a,payoff_b\n",
    );
    for r in trace {
        let status = |s: ApologyStatus| match s {
            ApologyStatus::None => "none",
            ApologyStatus::Believed => "believed",
            ApologyStatus::Exposed => "exposed",
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.round,
            r.intents[0].short(),
            r.intents[1].short(),
            r.executed[0].short(),
            r.executed[1].short(),
            r.apologized[0],
            r.apologized[1],
            status(r.status[0]),
            status(r.status[1]),
            r.payoffs[0],
            r.payoffs[1],
        ));
    }
    out
}
