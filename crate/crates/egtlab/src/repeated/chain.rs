//! Exact long-run payoffs via the joint Markov chain over automaton state
//! pairs. Recurrent classes are found on the reachable subgraph, their
//! stationary distributions solved densely, and transient mass routed via
//! absorption probabilities. Dense linear algebra only; state spaces here
//! are tiny.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{
    joint_outcome_idx, resolve_round, Action, ApologyRule, Continuation, RepeatedGameParams,
    RoundDraws, StrategyAutomaton,
};
use crate::error::{Error, Result};

/// Labels for the diagnostic outcome distribution, by executed actions.
pub const OUTCOME_LABELS: [&str; 4] = ["CC", "CD", "DC", "DD"];

/// Long-run result of a match: per-player payoff (per round for
/// limit-of-means, normalized discounted sum otherwise) plus the long-run
/// distribution over joint executed outcomes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchOutcome {
    pub payoffs: [f64; 2],
    /// Long-run weight of {CC, CD, DC, DD}; sums to 1.
    pub outcome_dist: [f64; 4],
}

struct JointNode {
    /// (target local index, probability), consolidated.
    transitions: Vec<(usize, f64)>,
    expected_payoffs: [f64; 2],
    outcome_dist: [f64; 4],
}

/// Exact long-run payoffs for a pair of automata.
pub fn long_run_payoff(
    a: &StrategyAutomaton,
    b: &StrategyAutomaton,
    params: &RepeatedGameParams,
) -> Result<MatchOutcome> {
    params.validate()?;
    let joint = a.n_states().checked_mul(b.n_states()).unwrap_or(usize::MAX);
    if joint > 10_000 {
        return Err(Error::UnsupportedSize(format!(
            "joint state space {joint} exceeds 10000"
        )));
    }

    let nodes = build_reachable_chain(a, b, params);
    match params.continuation {
        Continuation::LimitOfMeans => limit_of_means(&nodes),
        Continuation::Discounted { delta } => discounted(&nodes, delta),
    }
}

/// Breadth-first construction of the chain restricted to states reachable
/// from the initial pair; node 0 is the initial pair.
fn build_reachable_chain(
    a: &StrategyAutomaton,
    b: &StrategyAutomaton,
    params: &RepeatedGameParams,
) -> Vec<JointNode> {
    let key = |sa: usize, sb: usize| sa * b.n_states() + sb;
    let mut index: HashMap<usize, usize> = HashMap::new();
    let mut order: Vec<(usize, usize)> = Vec::new();
    index.insert(key(a.initial(), b.initial()), 0);
    order.push((a.initial(), b.initial()));
    let mut nodes: Vec<JointNode> = Vec::new();
    let mut cursor = 0;
    while cursor < order.len() {
        let (sa, sb) = order[cursor];
        let mut acc: HashMap<usize, f64> = HashMap::new();
        let mut expected_payoffs = [0.0; 2];
        let mut outcome_dist = [0.0; 4];
        for (draws, p) in enumerate_draws(a, sa, b, sb, params) {
            let out = resolve_round(a, sa, b, sb, params.apology_cost, draws);
            let jk = key(out.next_states[0], out.next_states[1]);
            let local = *index.entry(jk).or_insert_with(|| {
                order.push((out.next_states[0], out.next_states[1]));
                order.len() - 1
            });
            *acc.entry(local).or_insert(0.0) += p;
            expected_payoffs[0] += p * out.payoffs[0];
            expected_payoffs[1] += p * out.payoffs[1];
            outcome_dist[joint_outcome_idx(out.executed[0], out.executed[1])] += p;
        }
        let mut transitions: Vec<(usize, f64)> = acc.into_iter().collect();
        transitions.sort_by_key(|&(t, _)| t);
        nodes.push(JointNode { transitions, expected_payoffs, outcome_dist });
        cursor += 1;
    }
    nodes
}

/// All positive-probability draw combinations for one round from a given
/// joint state: error flips for intended cooperators, exposure for
/// insincere apologizers.
fn enumerate_draws(
    a: &StrategyAutomaton,
    sa: usize,
    b: &StrategyAutomaton,
    sb: usize,
    params: &RepeatedGameParams,
) -> Vec<(RoundDraws, f64)> {
    let eps = params.epsilon;
    let r = params.reliability;
    let branch = |can_happen: bool, p: f64| -> Vec<(bool, f64)> {
        if !can_happen || p == 0.0 {
            vec![(false, 1.0)]
        } else if p == 1.0 {
            vec![(true, 1.0)]
        } else {
            vec![(false, 1.0 - p), (true, p)]
        }
    };
    let autos = [(a, sa), (b, sb)];
    let err_branches: Vec<Vec<(bool, f64)>> = autos
        .iter()
        .map(|(auto, s)| branch(auto.intent(*s) == Action::Cooperate, eps))
        .collect();

    let mut out = Vec::new();
    for &(err_a, pa) in &err_branches[0] {
        for &(err_b, pb) in &err_branches[1] {
            let errs = [err_a, err_b];
            // an apology is insincere exactly when the intent was Defect,
            // which happens only under the Always rule
            let expose_branches: Vec<Vec<(bool, f64)>> = autos
                .iter()
                .map(|(auto, s)| {
                    let insincere = auto.intent(*s) == Action::Defect
                        && auto.state(*s).apology_rule == ApologyRule::Always;
                    branch(insincere, r)
                })
                .collect();
            for &(exp_a, qa) in &expose_branches[0] {
                for &(exp_b, qb) in &expose_branches[1] {
                    let p = pa * pb * qa * qb;
                    if p > 0.0 {
                        out.push((RoundDraws { err: errs, exposed: [exp_a, exp_b] }, p));
                    }
                }
            }
        }
    }
    out
}

/// Closed communicating classes of the reachable chain, each as a sorted
/// list of local node indices. Kosaraju over the transition graph.
fn recurrent_classes(nodes: &[JointNode]) -> Vec<Vec<usize>> {
    let n = nodes.len();
    let mut visited = vec![false; n];
    let mut finish_order = Vec::with_capacity(n);
    for start in 0..n {
        if visited[start] {
            continue;
        }
        // iterative DFS recording finish order
        let mut stack = vec![(start, 0usize)];
        visited[start] = true;
        while let Some(&mut (v, ref mut edge)) = stack.last_mut() {
            if *edge < nodes[v].transitions.len() {
                let (t, _) = nodes[v].transitions[*edge];
                *edge += 1;
                if !visited[t] {
                    visited[t] = true;
                    stack.push((t, 0));
                }
            } else {
                finish_order.push(v);
                stack.pop();
            }
        }
    }

    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (v, node) in nodes.iter().enumerate() {
        for &(t, _) in &node.transitions {
            reverse[t].push(v);
        }
    }

    let mut component = vec![usize::MAX; n];
    let mut n_components = 0;
    for &start in finish_order.iter().rev() {
        if component[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        component[start] = n_components;
        while let Some(v) = stack.pop() {
            for &u in &reverse[v] {
                if component[u] == usize::MAX {
                    component[u] = n_components;
                    stack.push(u);
                }
            }
        }
        n_components += 1;
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_components];
    for (v, &c) in component.iter().enumerate() {
        members[c].push(v);
    }
    let mut closed = Vec::new();
    for class in members {
        let is_closed = class.iter().all(|&v| {
            nodes[v].transitions.iter().all(|&(t, _)| component[t] == component[class[0]])
        });
        if is_closed {
            closed.push(class);
        }
    }
    closed.sort_by_key(|c| c[0]);
    closed
}

/// Stationary distribution of one closed class.
fn stationary(nodes: &[JointNode], class: &[usize]) -> Vec<f64> {
    let m = class.len();
    if m == 1 {
        return vec![1.0];
    }
    let local: HashMap<usize, usize> =
        class.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    // (P^T - I) pi = 0 with one row replaced by the normalization
    let mut mat = DMatrix::zeros(m, m);
    for (i, &v) in class.iter().enumerate() {
        for &(t, p) in &nodes[v].transitions {
            let j = local[&t];
            mat[(j, i)] += p;
        }
        mat[(i, i)] -= 1.0;
    }
    for j in 0..m {
        mat[(m - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(m);
    rhs[m - 1] = 1.0;
    let pi = mat.lu().solve(&rhs).expect("irreducible class has a unique stationary law");
    pi.iter().copied().collect()
}

fn class_outcome(nodes: &[JointNode], class: &[usize], pi: &[f64]) -> MatchOutcome {
    let mut payoffs = [0.0; 2];
    let mut outcome_dist = [0.0; 4];
    for (i, &v) in class.iter().enumerate() {
        for p in 0..2 {
            payoffs[p] += pi[i] * nodes[v].expected_payoffs[p];
        }
        for o in 0..4 {
            outcome_dist[o] += pi[i] * nodes[v].outcome_dist[o];
        }
    }
    MatchOutcome { payoffs, outcome_dist }
}

fn limit_of_means(nodes: &[JointNode]) -> Result<MatchOutcome> {
    let classes = recurrent_classes(nodes);
    let class_values: Vec<MatchOutcome> = classes
        .iter()
        .map(|c| {
            let pi = stationary(nodes, c);
            class_outcome(nodes, c, &pi)
        })
        .collect();

    // initial node is 0 by construction
    if let Some(ci) = classes.iter().position(|c| c.contains(&0)) {
        return Ok(class_values[ci]);
    }
    if classes.len() == 1 {
        // everything transient funnels into the unique class, exactly
        return Ok(class_values[0]);
    }

    // absorption probabilities from the initial state into each class
    let recurrent: Vec<bool> = {
        let mut flags = vec![false; nodes.len()];
        for c in &classes {
            for &v in c {
                flags[v] = true;
            }
        }
        flags
    };
    let transient: Vec<usize> = (0..nodes.len()).filter(|&v| !recurrent[v]).collect();
    let tindex: HashMap<usize, usize> =
        transient.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let t = transient.len();
    let mut m = DMatrix::identity(t, t);
    for (i, &v) in transient.iter().enumerate() {
        for &(tgt, p) in &nodes[v].transitions {
            if let Some(&j) = tindex.get(&tgt) {
                m[(i, j)] -= p;
            }
        }
    }
    let lu = m.lu();
    let class_of: HashMap<usize, usize> = classes
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| c.iter().map(move |&v| (v, ci)))
        .collect();

    let mut payoffs = [0.0; 2];
    let mut outcome_dist = [0.0; 4];
    let mut total_absorption = 0.0f64;
    for (ci, value) in class_values.iter().enumerate() {
        let mut rhs = DVector::zeros(t);
        for (i, &v) in transient.iter().enumerate() {
            for &(tgt, p) in &nodes[v].transitions {
                if class_of.get(&tgt) == Some(&ci) {
                    rhs[i] += p;
                }
            }
        }
        let probs = lu.solve(&rhs).ok_or_else(|| {
            Error::InvalidArgument("absorption system is singular".into())
        })?;
        let w = probs[tindex[&0]];
        total_absorption += w;
        for p in 0..2 {
            payoffs[p] += w * value.payoffs[p];
        }
        for o in 0..4 {
            outcome_dist[o] += w * value.outcome_dist[o];
        }
    }
    debug_assert!((total_absorption - 1.0).abs() < 1e-9);
    Ok(MatchOutcome { payoffs, outcome_dist })
}

fn discounted(nodes: &[JointNode], delta: f64) -> Result<MatchOutcome> {
    let n = nodes.len();
    let mut m = DMatrix::identity(n, n);
    for (v, node) in nodes.iter().enumerate() {
        for &(t, p) in &node.transitions {
            m[(v, t)] -= delta * p;
        }
    }
    let lu = m.clone().lu();
    let mut payoffs = [0.0; 2];
    for p in 0..2 {
        let g = DVector::from_iterator(n, nodes.iter().map(|nd| nd.expected_payoffs[p]));
        let v = lu
            .solve(&g)
            .ok_or_else(|| Error::InvalidArgument("discounted system is singular".into()))?;
        payoffs[p] = (1.0 - delta) * v[0];
    }
    // discounted occupancy measure from the initial state
    let mut e0 = DVector::zeros(n);
    e0[0] = 1.0 - delta;
    let psi = m
        .transpose()
        .lu()
        .solve(&e0)
        .ok_or_else(|| Error::InvalidArgument("occupancy system is singular".into()))?;
    let mut outcome_dist = [0.0; 4];
    for (v, node) in nodes.iter().enumerate() {
        for o in 0..4 {
            outcome_dist[o] += psi[v] * node.outcome_dist[o];
        }
    }
    Ok(MatchOutcome { payoffs, outcome_dist })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repeated::{preset, AcceptanceRule, AutomatonState};

    fn params(eps: f64, k: f64, r: f64) -> RepeatedGameParams {
        RepeatedGameParams::new(eps, k, r).unwrap()
    }

    #[test]
    fn tft_self_play_collapses_to_mutual_defection() {
        let tft = preset("TFT").unwrap();
        for eps in [0.01, 0.05, 0.1] {
            let out = long_run_payoff(&tft, &tft, &params(eps, 0.0, 0.0)).unwrap();
            assert_eq!(out.payoffs, [1.0, 1.0], "eps = {eps}");
            assert_eq!(out.outcome_dist, [0.0, 0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn grim_self_play_collapses_to_mutual_defection() {
        let grim = preset("GRIM").unwrap();
        let out = long_run_payoff(&grim, &grim, &params(0.05, 0.0, 0.0)).unwrap();
        assert_eq!(out.payoffs, [1.0, 1.0]);
    }

    #[test]
    fn apologizer_self_play_matches_closed_form() {
        // errors are repaired at cost k: value = 2 - eps * (1 + k)
        let apo = preset("APOLOGIZER").unwrap();
        for (eps, k) in [(0.05, 0.5), (0.1, 1.0), (0.01, 2.0)] {
            let out = long_run_payoff(&apo, &apo, &params(eps, k, 0.5)).unwrap();
            let expect = 2.0 - eps * (1.0 + k);
            assert!((out.payoffs[0] - expect).abs() < 1e-12, "eps={eps} k={k}");
            assert!((out.payoffs[1] - expect).abs() < 1e-12);
            assert!(out.payoffs[0] > 1.0 && out.payoffs[0] < 2.0);
        }
    }

    #[test]
    fn exploiter_vs_apologizer_matches_closed_form() {
        // the apologizer's state is a two-state chain: believed apologies
        // send it back to cooperation (prob 1 - r), exposures to defection
        let apo = preset("APOLOGIZER").unwrap();
        let exp = preset("EXPLOITER").unwrap();
        for (eps, k, r) in [
            (0.05, 0.0, 0.0),
            (0.05, 1.0, 0.25),
            (0.1, 0.5, 0.5),
            (0.05, 1.5, 0.9),
            (0.0, 0.5, 1.0),
        ] {
            let out = long_run_payoff(&exp, &apo, &params(eps, k, r)).unwrap();
            let expect_exp = (1.0 - r) * (3.0 - 2.0 * eps) + r - k;
            let expect_apo = (1.0 - r) * eps * (1.0 - k) + r;
            assert!(
                (out.payoffs[0] - expect_exp).abs() < 1e-12,
                "exploiter eps={eps} k={k} r={r}: {} vs {}",
                out.payoffs[0],
                expect_exp
            );
            assert!((out.payoffs[1] - expect_apo).abs() < 1e-12);
        }
    }

    #[test]
    fn outcome_distribution_sums_to_one_and_payoffs_stay_bounded() {
        let names = ["ALLC", "ALLD", "TFT", "GRIM", "APOLOGIZER", "EXPLOITER", "UNFORGIVING"];
        let p = params(0.07, 0.8, 0.3);
        for a in names {
            for b in names {
                let out =
                    long_run_payoff(&preset(a).unwrap(), &preset(b).unwrap(), &p).unwrap();
                let total: f64 = out.outcome_dist.iter().sum();
                assert!((total - 1.0).abs() < 1e-9, "{a} vs {b}");
                for v in out.payoffs {
                    assert!(v >= -p.apology_cost - 1e-9 && v <= 3.0 + 1e-9, "{a} vs {b}: {v}");
                }
            }
        }
    }

    /// Hand-built pair whose first round decides between four absorbing
    /// sinks; exercises the multi-class absorption solve exactly.
    #[test]
    fn first_round_lock_in_matches_hand_computed_absorption() {
        let mk = || {
            let free = AutomatonState {
                label: "free".into(),
                intent: Action::Cooperate,
                apology_rule: ApologyRule::Never,
                acceptance_rule: AcceptanceRule::IgnoreApologies,
                next: [[[1; 3]; 2]; 2],
            };
            let lock = AutomatonState {
                label: "lock".into(),
                intent: Action::Defect,
                apology_rule: ApologyRule::Never,
                acceptance_rule: AcceptanceRule::IgnoreApologies,
                next: [[[2; 3]; 2]; 2],
            };
            let mut start = AutomatonState {
                label: "start".into(),
                intent: Action::Cooperate,
                apology_rule: ApologyRule::Never,
                acceptance_rule: AcceptanceRule::IgnoreApologies,
                next: [[[1; 3]; 2]; 2],
            };
            for own in 0..2 {
                for status in 0..3 {
                    start.next[own][Action::Defect.idx()][status] = 2;
                }
            }
            StrategyAutomaton::new("TRIGGER", 0, vec![start, free, lock]).unwrap()
        };
        let a = mk();
        let eps = 0.2;
        let out = long_run_payoff(&a, &mk(), &params(eps, 0.0, 0.0)).unwrap();
        // sink values per player A
        let ff = 2.0 - eps; // mutual free cooperators with errors
        let fl = eps; // A free vs locked defector
        let lf = 3.0 - 2.0 * eps;
        let ll = 1.0;
        let p00 = (1.0 - eps) * (1.0 - eps);
        let p01 = (1.0 - eps) * eps; // B errs, A locks
        let p10 = eps * (1.0 - eps); // A errs, B locks
        let expect = p00 * ff + p10 * fl + p01 * lf + eps * eps * ll;
        assert!((out.payoffs[0] - expect).abs() < 1e-12);
        assert!((out.payoffs[1] - expect).abs() < 1e-12);
    }

    #[test]
    fn discounted_value_matches_geometric_series_in_deterministic_play() {
        // TFT vs ALLD with no errors alternates after round one:
        // payoffs 0, 3, 1, 1, 1, ... wait: TFT cooperates then defects
        // forever against ALLD, so payoffs are 0, 1, 1, 1, ...
        let tft = preset("TFT").unwrap();
        let alld = preset("ALLD").unwrap();
        let delta = 0.9;
        let p = params(0.0, 0.0, 0.0)
            .with_continuation(Continuation::Discounted { delta })
            .unwrap();
        let out = long_run_payoff(&tft, &alld, &p).unwrap();
        let expect_tft = (1.0 - delta) * (0.0 + delta * 1.0 / (1.0 - delta));
        let expect_alld = (1.0 - delta) * (3.0 + delta * 1.0 / (1.0 - delta));
        assert!((out.payoffs[0] - expect_tft).abs() < 1e-12);
        assert!((out.payoffs[1] - expect_alld).abs() < 1e-12);
        let total: f64 = out.outcome_dist.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn oversized_joint_space_is_rejected()
    {
        let big_state = |next: usize| AutomatonState {
            label: "s".into(),
            intent: Action::Cooperate,
            apology_rule: ApologyRule::Never,
            acceptance_rule: AcceptanceRule::BelieveUnexposed,
            next: [[[next; 3]; 2]; 2],
        };
        let states: Vec<_> = (0..101).map(|_| big_state(0)).collect();
        let a = StrategyAutomaton::new("big", 0, states).unwrap();
        assert!(matches!(
            long_run_payoff(&a, &a, &params(0.01, 0.0, 0.0)),
            Err(Error::UnsupportedSize(_))
        ));
    }
}
