//! Roster-level operations: the induced payoff matrix fed to the population
//! dynamics, and the minimal apology cost that deters an invader.

use super::{long_run_payoff, RepeatedGameParams, StrategyAutomaton};
use crate::error::{Error, Result};
use crate::games::MatrixGame;

/// Symmetric matrix game whose `(i, j)` entry is the long-run payoff of
/// roster strategy `i` matched against roster strategy `j`.
pub fn induced_matrix(
    roster: &[StrategyAutomaton],
    params: &RepeatedGameParams,
) -> Result<MatrixGame> {
    if roster.is_empty() {
        return Err(Error::InvalidArgument("roster must not be empty".into()));
    }
    let n = roster.len();
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            values[i][j] = long_run_payoff(&roster[i], &roster[j], params)?.payoffs[0];
        }
    }
    MatrixGame::from_symmetric(
        "induced",
        roster.iter().map(|a| a.name().to_string()).collect(),
        values,
    )
}

/// Smallest apology cost on the grid making the incumbent a strict Nash
/// strategy against the invader: incumbent-vs-incumbent payoff strictly
/// exceeds invader-vs-incumbent payoff. `None` when no grid point works.
pub fn deterrence_threshold(
    params: &RepeatedGameParams,
    incumbent: &StrategyAutomaton,
    invader: &StrategyAutomaton,
    k_grid: &[f64],
) -> Result<Option<f64>> {
    if k_grid.is_empty() {
        return Err(Error::InvalidArgument("apology cost grid must not be empty".into()));
    }
    if k_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("apology cost grid must be sorted ascending".into()));
    }
    for &k in k_grid {
        if !(k.is_finite() && k >= 0.0) {
            return Err(Error::InvalidArgument("apology costs must be nonnegative".into()));
        }
        let p = RepeatedGameParams { apology_cost: k, ..*params };
        let incumbent_value = long_run_payoff(incumbent, incumbent, &p)?.payoffs[0];
        let invasion_value = long_run_payoff(invader, incumbent, &p)?.payoffs[0];
        if incumbent_value > invasion_value {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{pd, pure_nash};
    use crate::repeated::preset;

    fn params(eps: f64, k: f64, r: f64) -> RepeatedGameParams {
        RepeatedGameParams::new(eps, k, r).unwrap()
    }

    #[test]
    fn unconditional_roster_reproduces_the_stage_game() {
        let roster = [preset("ALLC").unwrap(), preset("ALLD").unwrap()];
        let induced = induced_matrix(&roster, &params(0.0, 0.0, 0.0)).unwrap();
        let stage = pd();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(induced.payoff(i, j), stage.payoff(i, j));
            }
        }
        assert!(induced.is_symmetric());
    }

    #[test]
    fn free_apologies_make_the_exploiter_dominant() {
        let roster = [preset("APOLOGIZER").unwrap(), preset("EXPLOITER").unwrap()];
        let induced = induced_matrix(&roster, &params(0.05, 0.0, 0.0)).unwrap();
        // exploiter strictly better against both columns
        assert!(induced.row_payoff(1, 0) > induced.row_payoff(0, 0));
        assert!(induced.row_payoff(1, 1) > induced.row_payoff(0, 1));
        let eqs = pure_nash(&induced);
        assert_eq!(eqs.len(), 1);
        assert_eq!(induced.row_labels()[eqs[0].row], "EXPLOITER");
    }

    #[test]
    fn reliable_signal_with_priced_apology_protects_apologizers() {
        let roster = [preset("APOLOGIZER").unwrap(), preset("EXPLOITER").unwrap()];
        let induced = induced_matrix(&roster, &params(0.05, 1.0, 0.9)).unwrap();
        assert!(induced.row_payoff(0, 0) > induced.row_payoff(1, 0));
    }

    #[test]
    fn match_values_are_role_symmetric() {
        let p = params(0.05, 0.7, 0.4);
        let names = ["TFT", "APOLOGIZER", "EXPLOITER", "GRIM"];
        for a in names {
            for b in names {
                let ab = long_run_payoff(&preset(a).unwrap(), &preset(b).unwrap(), &p).unwrap();
                let ba = long_run_payoff(&preset(b).unwrap(), &preset(a).unwrap(), &p).unwrap();
                assert!((ab.payoffs[0] - ba.payoffs[1]).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn raising_apology_cost_never_raises_payoffs() {
        let roster = [
            preset("APOLOGIZER").unwrap(),
            preset("EXPLOITER").unwrap(),
            preset("ALLD").unwrap(),
        ];
        let mut previous: Option<Vec<Vec<f64>>> = None;
        for k in [0.0, 0.5, 1.0, 2.0] {
            let induced = induced_matrix(&roster, &params(0.05, k, 0.5)).unwrap();
            let table: Vec<Vec<f64>> = (0..3)
                .map(|i| (0..3).map(|j| induced.row_payoff(i, j)).collect())
                .collect();
            if let Some(prev) = &previous {
                for i in 0..3 {
                    for j in 0..3 {
                        assert!(
                            table[i][j] <= prev[i][j] + 1e-12,
                            "payoff ({i},{j}) rose with k"
                        );
                    }
                }
                // the never-apologizing strategy's self-play entry is untouched
                assert_eq!(table[2][2], prev[2][2]);
            }
            previous = Some(table);
        }
    }

    #[test]
    fn exploiter_payoff_against_apologizer_declines_with_reliability() {
        let apo = preset("APOLOGIZER").unwrap();
        let exp = preset("EXPLOITER").unwrap();
        let mut last = f64::INFINITY;
        for r in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let v = long_run_payoff(&exp, &apo, &params(0.05, 0.5, r)).unwrap().payoffs[0];
            assert!(v <= last + 1e-12, "exploiter payoff rose at r = {r}");
            last = v;
        }
    }

    #[test]
    fn deterrence_is_free_under_a_fully_reliable_signal() {
        let apo = preset("APOLOGIZER").unwrap();
        let exp = preset("EXPLOITER").unwrap();
        let grid: Vec<f64> = (0..9).map(|i| i as f64 * 0.25).collect();
        let p = params(0.05, 0.0, 1.0);
        assert_eq!(deterrence_threshold(&p, &apo, &exp, &grid).unwrap(), Some(0.0));
    }

    #[test]
    fn unreliable_signals_need_a_positive_price() {
        let apo = preset("APOLOGIZER").unwrap();
        let exp = preset("EXPLOITER").unwrap();
        let grid: Vec<f64> = (0..9).map(|i| i as f64 * 0.25).collect();
        let p = params(0.05, 0.0, 0.0);
        let k = deterrence_threshold(&p, &apo, &exp, &grid).unwrap().unwrap();
        assert!(k > 0.0);
        // closed forms give k > 1 exactly at r = 0
        assert!(k > 1.0 && k <= 1.25 + 1e-12);
    }

    #[test]
    fn deterrence_threshold_is_monotone_in_reliability() {
        let apo = preset("APOLOGIZER").unwrap();
        let exp = preset("EXPLOITER").unwrap();
        let grid: Vec<f64> = (0..9).map(|i| i as f64 * 0.25).collect();
        let mut last = f64::INFINITY;
        for r in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let p = params(0.05, 0.0, r);
            let k = deterrence_threshold(&p, &apo, &exp, &grid).unwrap().unwrap();
            assert!(k <= last, "threshold rose at r = {r}");
            last = k;
        }
    }

    #[test]
    fn empty_or_unsorted_grids_are_rejected() {
        let apo = preset("APOLOGIZER").unwrap();
        let exp = preset("EXPLOITER").unwrap();
        let p = params(0.05, 0.0, 0.5);
        assert!(deterrence_threshold(&p, &apo, &exp, &[]).is_err());
        assert!(deterrence_threshold(&p, &apo, &exp, &[1.0, 0.5]).is_err());
        assert!(induced_matrix(&[], &p).is_err());
    }
}
