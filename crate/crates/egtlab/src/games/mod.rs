//! Two-player matrix games and their static solution concepts.
//!
//! Constructors build the canonical payoff tables (prisoner's dilemma,
//! stag hunt, Nash demand game, coordination, the ultimatum minigame and
//! the binary public goods reduction); [`pure_nash`] and [`mixed_nash`]
//! solve them. Games are immutable after construction and all operations
//! here are pure functions.

mod nash;
mod public_goods;

pub use nash::{mixed_nash, pure_nash, MixedProfile, StrategyProfile};
pub use public_goods::{Contribution, DivisionRule, PublicGoodsGame};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A two-player game in normal form: one `(row utility, column utility)`
/// pair per cell. Utilities are dimensionless and real-valued; the
/// canonical tables embed their integer payoffs exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrixGame")]
pub struct MatrixGame {
    name: String,
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    /// `payoffs[i][j] = [row player's utility, column player's utility]`
    payoffs: Vec<Vec<[f64; 2]>>,
    symmetric: bool,
}

#[derive(Deserialize)]
struct RawMatrixGame {
    name: String,
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    payoffs: Vec<Vec<[f64; 2]>>,
    symmetric: bool,
}

impl TryFrom<RawMatrixGame> for MatrixGame {
    type Error = Error;

    fn try_from(raw: RawMatrixGame) -> Result<Self> {
        let game = MatrixGame::new(raw.name, raw.row_labels, raw.col_labels, raw.payoffs)?;
        if raw.symmetric && !game.symmetric {
            return Err(Error::InvalidArgument(
                "game declared symmetric but payoff table is not".into(),
            ));
        }
        // A symmetric table may still be declared asymmetric; honor the flag.
        Ok(MatrixGame {
            symmetric: raw.symmetric,
            ..game
        })
    }
}

impl MatrixGame {
    /// Build a game from explicit payoff pairs. Dimensions must match the
    /// label lists; the symmetric flag is detected from the table.
    pub fn new(
        name: impl Into<String>,
        row_labels: Vec<String>,
        col_labels: Vec<String>,
        payoffs: Vec<Vec<[f64; 2]>>,
    ) -> Result<Self> {
        if row_labels.is_empty() || col_labels.is_empty() {
            return Err(Error::InvalidArgument("game must have at least one strategy per side".into()));
        }
        if payoffs.len() != row_labels.len() {
            return Err(Error::InvalidArgument(format!(
                "payoff table has {} rows, expected {}",
                payoffs.len(),
                row_labels.len()
            )));
        }
        for (i, row) in payoffs.iter().enumerate() {
            if row.len() != col_labels.len() {
                return Err(Error::InvalidArgument(format!(
                    "payoff row {} has {} columns, expected {}",
                    i,
                    row.len(),
                    col_labels.len()
                )));
            }
            for cell in row {
                if !cell[0].is_finite() || !cell[1].is_finite() {
                    return Err(Error::InvalidArgument("payoffs must be finite".into()));
                }
            }
        }
        let mut game = MatrixGame {
            name: name.into(),
            row_labels,
            col_labels,
            payoffs,
            symmetric: false,
        };
        game.symmetric = game.detect_symmetry();
        Ok(game)
    }

    /// Build a symmetric game from the row player's payoff matrix; the
    /// column payoff at `(i, j)` is the row payoff at `(j, i)`.
    pub fn from_symmetric(
        name: impl Into<String>,
        labels: Vec<String>,
        row_payoffs: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = labels.len();
        if row_payoffs.len() != n || row_payoffs.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument(
                "symmetric game needs a square payoff matrix matching the labels".into(),
            ));
        }
        let payoffs = (0..n)
            .map(|i| (0..n).map(|j| [row_payoffs[i][j], row_payoffs[j][i]]).collect())
            .collect();
        MatrixGame::new(name, labels.clone(), labels, payoffs)
    }

    fn detect_symmetry(&self) -> bool {
        if self.row_labels != self.col_labels {
            return false;
        }
        let n = self.row_labels.len();
        (0..n).all(|i| (0..n).all(|j| self.payoffs[i][j][1] == self.payoffs[j][i][0]))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn n_rows(&self) -> usize {
        self.row_labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_labels.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Payoff pair at a strategy profile. Panics if indices are out of range.
    pub fn payoff(&self, row: usize, col: usize) -> (f64, f64) {
        let cell = self.payoffs[row][col];
        (cell[0], cell[1])
    }

    pub fn row_payoff(&self, row: usize, col: usize) -> f64 {
        self.payoffs[row][col][0]
    }

    pub fn col_payoff(&self, row: usize, col: usize) -> f64 {
        self.payoffs[row][col][1]
    }

    /// Index of a row strategy by its label.
    pub fn strategy_index(&self, label: &str) -> Option<usize> {
        self.row_labels.iter().position(|l| l == label)
    }
}

/// The prisoner's dilemma: mutual cooperation pays 2, mutual defection 1,
/// a lone defector 3 and the exploited cooperator 0.
pub fn pd() -> MatrixGame {
    MatrixGame::from_symmetric(
        "prisoners-dilemma",
        vec!["Cooperate".into(), "Defect".into()],
        vec![vec![2.0, 0.0], vec![3.0, 1.0]],
    )
    .expect("canonical table is valid")
}

/// The stag hunt: 3 for joint stag hunting, a dependable 2 for hare, and 0
/// for hunting stag alone.
pub fn stag_hunt() -> MatrixGame {
    MatrixGame::from_symmetric(
        "stag-hunt",
        vec!["Stag".into(), "Hare".into()],
        vec![vec![3.0, 0.0], vec![2.0, 2.0]],
    )
    .expect("canonical table is valid")
}

/// A pure coordination game: payoff 1 for matching acts, 0 otherwise.
pub fn coordination() -> MatrixGame {
    MatrixGame::from_symmetric(
        "coordination",
        vec!["A".into(), "B".into()],
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
    )
    .expect("canonical table is valid")
}

/// The Nash demand game over a divisible resource: compatible demands are
/// honored, over-demands leave both with nothing.
pub fn nash_demand(resource: f64, demands: &[f64]) -> Result<MatrixGame> {
    if !(resource.is_finite() && resource > 0.0) {
        return Err(Error::InvalidArgument("resource must be positive".into()));
    }
    if demands.is_empty() {
        return Err(Error::InvalidArgument("demand list must not be empty".into()));
    }
    for &d in demands {
        if !(d.is_finite() && d > 0.0 && d < resource) {
            return Err(Error::InvalidArgument(format!(
                "demand {d} must lie strictly between 0 and the resource {resource}"
            )));
        }
    }
    let labels: Vec<String> = demands.iter().map(|d| format!("demand-{d}")).collect();
    let table = demands
        .iter()
        .map(|&di| {
            demands
                .iter()
                .map(|&dj| if di + dj <= resource { di } else { 0.0 })
                .collect()
        })
        .collect();
    MatrixGame::from_symmetric("nash-demand", labels, table)
}

/// Role-symmetrized two-offer ultimatum minigame. Strategies pair an offer
/// (`Fair` or `Low`) with an acceptance rule (`AcceptAll` accepts anything,
/// `RejectLow` rejects offers below the fair one, leaving both with 0).
/// Each pairing plays proposer and responder once; payoffs are the average
/// over the two roles.
pub fn ultimatum_minigame(pie: f64, fair_offer: f64, low_offer: f64) -> Result<MatrixGame> {
    if !(pie.is_finite() && fair_offer.is_finite() && low_offer.is_finite())
        || !(0.0 < low_offer && low_offer < fair_offer && fair_offer < pie)
    {
        return Err(Error::InvalidArgument(
            "offers must satisfy 0 < low < fair < pie".into(),
        ));
    }
    let offers = [fair_offer, low_offer];
    let offer_names = ["Fair", "Low"];
    let rule_names = ["AcceptAll", "RejectLow"];
    // strategy s = (offer index, rule index); rule 1 rejects offers below fair
    let accepts = |rule: usize, offer: f64| rule == 0 || offer >= fair_offer;
    let mut labels = Vec::new();
    let mut table = vec![vec![0.0; 4]; 4];
    for oi in 0..2 {
        for ri in 0..2 {
            labels.push(format!("{}+{}", offer_names[oi], rule_names[ri]));
        }
    }
    for s in 0..4 {
        for t in 0..4 {
            let (offer_s, rule_s) = (offers[s / 2], s % 2);
            let (offer_t, rule_t) = (offers[t / 2], t % 2);
            let as_proposer = if accepts(rule_t, offer_s) { pie - offer_s } else { 0.0 };
            let as_responder = if accepts(rule_s, offer_t) { offer_t } else { 0.0 };
            table[s][t] = 0.5 * (as_proposer + as_responder);
        }
    }
    MatrixGame::from_symmetric("ultimatum-minigame", labels, table)
}
