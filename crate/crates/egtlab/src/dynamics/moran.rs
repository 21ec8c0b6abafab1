//! Finite-population Moran process: birth proportional to fitness
//! `1 - w + w*f` with self-excluded matching, uniform death, optional
//! mutation on reproduction.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DynamicsConfig, PopulationState, TerminalFlag, Trajectory, TrajectoryPoint};
use crate::error::{Error, Result};
use crate::games::MatrixGame;
use crate::rng::stream_rng;

/// Result of a Moran run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MoranOutcome {
    pub counts: Vec<u64>,
    /// Strategy that took over, when the run absorbed (mutation = 0 only).
    pub absorbed: Option<usize>,
    pub steps: u64,
    pub trajectory: Trajectory,
}

fn validate(game: &MatrixGame, counts: &[u64], config: &DynamicsConfig) -> Result<u64> {
    config.validate()?;
    if !game.is_symmetric() {
        return Err(Error::InvalidArgument("moran dynamics need a symmetric game".into()));
    }
    if counts.len() != game.n_rows() {
        return Err(Error::InvalidArgument(format!(
            "counts cover {} strategies, game has {}",
            counts.len(),
            game.n_rows()
        )));
    }
    let total: u64 = counts.iter().sum();
    if total < 2 {
        return Err(Error::InvalidArgument("population must have at least 2 individuals".into()));
    }
    Ok(total)
}

/// Payoff shift making the game matrix nonnegative, so birth weights stay
/// nonnegative for any selection intensity.
fn payoff_shift(game: &MatrixGame) -> f64 {
    let mut min = f64::INFINITY;
    for i in 0..game.n_rows() {
        for j in 0..game.n_cols() {
            min = min.min(game.row_payoff(i, j));
        }
    }
    if min < 0.0 {
        -min
    } else {
        0.0
    }
}

/// One birth-death event.
pub fn moran_step(
    game: &MatrixGame,
    counts: &mut [u64],
    config: &DynamicsConfig,
    rng: &mut impl Rng,
) -> Result<()> {
    let total = validate(game, counts, config)?;
    step_unchecked(game, counts, total, config, payoff_shift(game), rng);
    Ok(())
}

fn step_unchecked(
    game: &MatrixGame,
    counts: &mut [u64],
    total: u64,
    config: &DynamicsConfig,
    shift: f64,
    rng: &mut impl Rng,
) {
    let n = counts.len();
    let w = config.selection_intensity;
    let e = config.assortment;
    // birth weights: counts[i] * (1 - w + w * f_i) with self-excluded
    // matching against the rest of the population
    let mut weights = vec![0.0f64; n];
    let mut weight_total = 0.0;
    for i in 0..n {
        if counts[i] == 0 {
            continue;
        }
        let mut mixed = 0.0;
        for j in 0..n {
            let others = counts[j] - u64::from(i == j);
            if others > 0 {
                mixed += others as f64 * (game.row_payoff(i, j) + shift);
            }
        }
        mixed /= (total - 1) as f64;
        let f = e * (game.row_payoff(i, i) + shift) + (1.0 - e) * mixed;
        weights[i] = counts[i] as f64 * (1.0 - w + w * f);
        weight_total += weights[i];
    }

    let parent = if weight_total > 0.0 {
        let mut draw = rng.gen::<f64>() * weight_total;
        let mut chosen = n - 1;
        for (i, &wi) in weights.iter().enumerate() {
            if wi <= 0.0 {
                continue;
            }
            if draw < wi {
                chosen = i;
                break;
            }
            draw -= wi;
        }
        chosen
    } else {
        // all weights vanish (w = 1 and zero shifted payoffs): neutral birth
        pick_individual(counts, total, rng)
    };

    let offspring = if config.mutation > 0.0 && rng.gen_bool(config.mutation) {
        rng.gen_range(0..n)
    } else {
        parent
    };
    let victim = pick_individual(counts, total, rng);
    counts[victim] -= 1;
    counts[offspring] += 1;
}

fn pick_individual(counts: &[u64], total: u64, rng: &mut impl Rng) -> usize {
    let mut k = rng.gen_range(0..total);
    for (i, &c) in counts.iter().enumerate() {
        if k < c {
            return i;
        }
        k -= c;
    }
    counts.len() - 1
}

/// Run birth-death events until absorption (one strategy holds the whole
/// population; meaningful only when mutation = 0) or `max_steps` events.
pub fn moran_run(
    game: &MatrixGame,
    initial_counts: &[u64],
    config: &DynamicsConfig,
    seed: u64,
) -> Result<MoranOutcome> {
    let total = validate(game, initial_counts, config)?;
    let shift = payoff_shift(game);
    let mut counts = initial_counts.to_vec();
    let mut rng = stream_rng(seed, 0);

    let shares = |c: &[u64]| {
        PopulationState::from_raw(c.iter().map(|&x| x as f64 / total as f64).collect())
    };
    let record_stride = (config.max_steps as u64 / 10_000).max(1);
    let mut points = vec![TrajectoryPoint { time: 0.0, state: shares(&counts) }];

    let absorbed_at = |c: &[u64]| c.iter().position(|&x| x == total);
    let mut steps = 0u64;
    let mut absorbed = if config.mutation == 0.0 { absorbed_at(&counts) } else { None };
    while absorbed.is_none() && steps < config.max_steps as u64 {
        step_unchecked(game, &mut counts, total, config, shift, &mut rng);
        steps += 1;
        if steps % record_stride == 0 {
            points.push(TrajectoryPoint { time: steps as f64, state: shares(&counts) });
        }
        if config.mutation == 0.0 {
            absorbed = absorbed_at(&counts);
        }
    }
    if points.last().map(|p| p.time) != Some(steps as f64) {
        points.push(TrajectoryPoint { time: steps as f64, state: shares(&counts) });
    }
    let terminal = if absorbed.is_some() { TerminalFlag::Converged } else { TerminalFlag::MaxSteps };
    Ok(MoranOutcome { counts, absorbed, steps, trajectory: Trajectory::new(points, terminal) })
}

/// Map a simplex state onto integer counts of the configured population
/// size via largest remainders.
pub fn counts_from_state(x: &PopulationState, population: u64) -> Vec<u64> {
    let n = x.len();
    let mut counts: Vec<u64> = Vec::with_capacity(n);
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(n);
    let mut used = 0u64;
    for (i, &s) in x.shares().iter().enumerate() {
        let exact = s * population as f64;
        let floor = exact.floor() as u64;
        counts.push(floor);
        used += floor;
        remainders.push((i, exact - floor as f64));
    }
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut leftover = population.saturating_sub(used);
    for (i, _) in remainders {
        if leftover == 0 {
            break;
        }
        counts[i] += 1;
        leftover -= 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::DynamicsKind;
    use crate::games::{pd, MatrixGame};

    fn neutral_game() -> MatrixGame {
        MatrixGame::from_symmetric(
            "neutral",
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 1.0], vec![1.0, 1.0]],
        )
        .unwrap()
    }

    fn moran_config() -> DynamicsConfig {
        DynamicsConfig {
            kind: DynamicsKind::Moran,
            selection_intensity: 0.5,
            max_steps: 1_000_000,
            ..DynamicsConfig::default()
        }
    }

    #[test]
    fn neutral_fixation_probability_is_one_over_n() {
        let g = neutral_game();
        let cfg = moran_config();
        let runs = 20_000;
        let mut fixed = 0u32;
        for seed in 0..runs {
            let out = moran_run(&g, &[9, 1], &cfg, seed as u64).unwrap();
            if out.absorbed == Some(1) {
                fixed += 1;
            }
        }
        let p = f64::from(fixed) / f64::from(runs);
        let sigma = (0.1 * 0.9 / f64::from(runs)).sqrt();
        assert!(
            (p - 0.1).abs() <= 3.0 * sigma,
            "neutral fixation {p} outside 0.1 +/- {:.4}",
            3.0 * sigma
        );
    }

    #[test]
    fn disadvantaged_cooperator_fixes_less_than_neutral() {
        let g = pd();
        let cfg = moran_config();
        let runs = 4000;
        let mut fixed = 0u32;
        for seed in 0..runs {
            // one cooperator among 19 defectors
            let out = moran_run(&g, &[1, 19], &cfg, seed as u64).unwrap();
            if out.absorbed == Some(0) {
                fixed += 1;
            }
        }
        let p = f64::from(fixed) / f64::from(runs);
        assert!(p < 1.0 / 20.0, "cooperator fixation {p} not below neutral 0.05");
    }

    #[test]
    fn monomorphic_population_absorbs_immediately() {
        let g = pd();
        let out = moran_run(&g, &[0, 10], &moran_config(), 1).unwrap();
        assert_eq!(out.steps, 0);
        assert_eq!(out.absorbed, Some(1));
    }

    #[test]
    fn empty_population_is_rejected() {
        let g = pd();
        let mut counts = [0u64, 0];
        let mut rng = stream_rng(0, 0);
        assert!(moran_step(&g, &mut counts, &moran_config(), &mut rng).is_err());
    }

    #[test]
    fn mutation_keeps_the_run_alive_past_monomorphism() {
        let g = neutral_game();
        let cfg = DynamicsConfig { mutation: 0.2, max_steps: 500, ..moran_config() };
        let out = moran_run(&g, &[10, 0], &cfg, 3).unwrap();
        assert_eq!(out.steps, 500);
        assert_eq!(out.absorbed, None);
        assert_eq!(out.trajectory.terminal(), TerminalFlag::MaxSteps);
    }

    #[test]
    fn counts_preserve_population_size() {
        let x = PopulationState::new(vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]).unwrap();
        let c = counts_from_state(&x, 10);
        assert_eq!(c.iter().sum::<u64>(), 10);
        let x = PopulationState::new(vec![0.999, 0.001]).unwrap();
        let c = counts_from_state(&x, 10);
        assert_eq!(c, vec![10, 0]);
    }

    #[test]
    fn runs_are_seed_deterministic() {
        let g = pd();
        let cfg = moran_config();
        let a = moran_run(&g, &[5, 5], &cfg, 77).unwrap();
        let b = moran_run(&g, &[5, 5], &cfg, 77).unwrap();
        assert_eq!(a.counts, b.counts);
        assert_eq!(a.steps, b.steps);
    }
}
