//! Static equilibrium solvers: pure best-response enumeration and a
//! support-enumeration solver for mixed equilibria of small bimatrix games.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::MatrixGame;
use crate::error::{Error, Result};

/// Tolerance for the best-response verification of mixed equilibria.
const BR_TOL: f64 = 1e-9;
/// Residual above this means the indifference system is inconsistent for
/// the tried support, not degenerate.
const RESIDUAL_TOL: f64 = 1e-7;

/// A pure strategy profile, by index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub row: usize,
    pub col: usize,
}

/// A mixed strategy profile: one probability vector per player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedProfile {
    pub row_mix: Vec<f64>,
    pub col_mix: Vec<f64>,
}

/// All pure Nash equilibria: profiles where each strategy is a weak best
/// response to the other. Enumeration order is row-major.
pub fn pure_nash(game: &MatrixGame) -> Vec<StrategyProfile> {
    let mut out = Vec::new();
    for row in 0..game.n_rows() {
        for col in 0..game.n_cols() {
            let (u, v) = game.payoff(row, col);
            let row_best = (0..game.n_rows()).all(|i| game.row_payoff(i, col) <= u);
            let col_best = (0..game.n_cols()).all(|j| game.col_payoff(row, j) <= v);
            if row_best && col_best {
                out.push(StrategyProfile { row, col });
            }
        }
    }
    out
}

/// All Nash equilibria found by support enumeration with supports of size
/// up to `max_support`, for games no larger than 4x4. Every returned
/// profile is re-verified against the best-response condition within
/// `1e-9`. A consistent but underdetermined indifference system signals a
/// continuum of equilibria and is reported as [`Error::Degenerate`].
pub fn mixed_nash(game: &MatrixGame, max_support: usize) -> Result<Vec<MixedProfile>> {
    let (m, n) = (game.n_rows(), game.n_cols());
    if m > 4 || n > 4 {
        return Err(Error::UnsupportedSize(format!(
            "support enumeration handles games up to 4x4, got {m}x{n}"
        )));
    }
    if max_support == 0 || max_support > m.min(n) {
        return Err(Error::InvalidArgument(format!(
            "max_support must lie in 1..={}",
            m.min(n)
        )));
    }

    let mut found: Vec<MixedProfile> = Vec::new();
    for k in 1..=max_support {
        for rsup in supports(m, k) {
            for csup in supports(n, k) {
                let candidate = if k == 1 {
                    Some(MixedProfile {
                        row_mix: point_mass(m, rsup[0]),
                        col_mix: point_mass(n, csup[0]),
                    })
                } else {
                    let col_mix = indifference_mix(game, &rsup, &csup, Side::Column)?;
                    let row_mix = indifference_mix(game, &rsup, &csup, Side::Row)?;
                    match (row_mix, col_mix) {
                        (Some(r), Some(c)) => Some(MixedProfile { row_mix: r, col_mix: c }),
                        _ => None,
                    }
                };
                if let Some(p) = candidate {
                    if is_equilibrium(game, &p) && !found.iter().any(|q| close(q, &p)) {
                        found.push(p);
                    }
                }
            }
        }
    }
    Ok(found)
}

enum Side {
    /// Solve for the column mix that makes the row support indifferent.
    Column,
    /// Solve for the row mix that makes the column support indifferent.
    Row,
}

/// Solve the square indifference system for one side of a support pair.
/// `None` means no solution on the simplex for this support; `Degenerate`
/// means the system is consistent but underdetermined.
fn indifference_mix(
    game: &MatrixGame,
    rsup: &[usize],
    csup: &[usize],
    side: Side,
) -> Result<Option<Vec<f64>>> {
    let k = rsup.len();
    let (dim, full) = match side {
        Side::Column => (k, game.n_cols()),
        Side::Row => (k, game.n_rows()),
    };
    // unknowns: k support weights plus the common payoff u
    let mut mat = DMatrix::zeros(dim + 1, dim + 1);
    let mut rhs = DVector::zeros(dim + 1);
    for a in 0..k {
        for b in 0..k {
            mat[(a, b)] = match side {
                Side::Column => game.row_payoff(rsup[a], csup[b]),
                Side::Row => game.col_payoff(rsup[b], csup[a]),
            };
        }
        mat[(a, dim)] = -1.0;
    }
    for b in 0..dim {
        mat[(dim, b)] = 1.0;
    }
    rhs[dim] = 1.0;

    let svd = mat.clone().svd(true, true);
    let rank = svd.rank(BR_TOL);
    let sol = match svd.solve(&rhs, BR_TOL) {
        Ok(s) => s,
        Err(_) => return Ok(None),
    };
    let residual = (&mat * &sol - &rhs).norm();
    if residual > RESIDUAL_TOL {
        return Ok(None);
    }
    if rank < dim + 1 {
        return Err(Error::Degenerate(format!(
            "indifference system for support {:?} x {:?} is underdetermined; \
             the game has an equilibrium component",
            rsup, csup
        )));
    }
    let mut weights = vec![0.0; k];
    for a in 0..k {
        if sol[a] < -BR_TOL {
            return Ok(None);
        }
        weights[a] = sol[a].max(0.0);
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Ok(None);
    }
    let mut mix = vec![0.0; full];
    let sup = match side {
        Side::Column => csup,
        Side::Row => rsup,
    };
    for (a, &s) in sup.iter().enumerate() {
        mix[s] = weights[a] / total;
    }
    Ok(Some(mix))
}

/// Independent deviation check: no pure strategy may beat the profile's
/// payoff by more than `BR_TOL` for either player.
fn is_equilibrium(game: &MatrixGame, p: &MixedProfile) -> bool {
    let row_payoffs: Vec<f64> = (0..game.n_rows())
        .map(|i| (0..game.n_cols()).map(|j| game.row_payoff(i, j) * p.col_mix[j]).sum())
        .collect();
    let col_payoffs: Vec<f64> = (0..game.n_cols())
        .map(|j| (0..game.n_rows()).map(|i| game.col_payoff(i, j) * p.row_mix[i]).sum())
        .collect();
    let row_value: f64 = (0..game.n_rows()).map(|i| p.row_mix[i] * row_payoffs[i]).sum();
    let col_value: f64 = (0..game.n_cols()).map(|j| p.col_mix[j] * col_payoffs[j]).sum();
    row_payoffs.iter().all(|&u| u <= row_value + BR_TOL)
        && col_payoffs.iter().all(|&v| v <= col_value + BR_TOL)
}

fn point_mass(len: usize, at: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[at] = 1.0;
    v
}

fn close(a: &MixedProfile, b: &MixedProfile) -> bool {
    let d = a
        .row_mix
        .iter()
        .zip(&b.row_mix)
        .chain(a.col_mix.iter().zip(&b.col_mix))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max);
    d < 1e-8
}

/// All size-`k` subsets of `0..n` in ascending order.
fn supports(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        if mask.count_ones() as usize == k {
            out.push((0..n).filter(|i| mask & (1 << i) != 0).collect());
        }
    }
    out
}
