//! Binary-contribution public goods game and its two-strategy reduction.

use serde::{Deserialize, Serialize};

use super::MatrixGame;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contribution {
    Contribute,
    Shirk,
}

/// How the multiplied pot is divided. The standard form divides among all
/// players; `ContributorsOnly` is the literal reading in which shirkers are
/// excluded from the pot (and the dilemma disappears for multiplier > 1).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivisionRule {
    #[default]
    AllPlayers,
    ContributorsOnly,
}

/// An n-player public goods game with binary contributions: each
/// contributor puts in their whole endowment, the pot is multiplied and
/// divided per the division rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPublicGoods")]
pub struct PublicGoodsGame {
    n: usize,
    endowment: f64,
    multiplier: f64,
    division: DivisionRule,
}

#[derive(Deserialize)]
struct RawPublicGoods {
    n: usize,
    endowment: f64,
    multiplier: f64,
    #[serde(default)]
    division: DivisionRule,
}

impl TryFrom<RawPublicGoods> for PublicGoodsGame {
    type Error = Error;
    fn try_from(raw: RawPublicGoods) -> Result<Self> {
        PublicGoodsGame::with_division(raw.n, raw.endowment, raw.multiplier, raw.division)
    }
}

impl PublicGoodsGame {
    pub fn new(n: usize, endowment: f64, multiplier: f64) -> Result<Self> {
        Self::with_division(n, endowment, multiplier, DivisionRule::default())
    }

    pub fn with_division(
        n: usize,
        endowment: f64,
        multiplier: f64,
        division: DivisionRule,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument("group size must be at least 2".into()));
        }
        if !(endowment.is_finite() && endowment > 0.0) {
            return Err(Error::InvalidArgument("endowment must be positive".into()));
        }
        if !(multiplier.is_finite() && multiplier > 0.0) {
            return Err(Error::InvalidArgument("multiplier must be positive".into()));
        }
        Ok(PublicGoodsGame { n, endowment, multiplier, division })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn endowment(&self) -> f64 {
        self.endowment
    }

    pub fn multiplier(&self) -> f64 {
        self.multiplier
    }

    pub fn division(&self) -> DivisionRule {
        self.division
    }

    /// Payoff of one player given their own choice and the number of
    /// contributors among the other `n - 1` players. A contributor gives up
    /// the whole endowment and keeps only their pot share; a shirker keeps
    /// the endowment plus their pot share (if any).
    pub fn payoff(&self, own: Contribution, other_contributors: usize) -> Result<f64> {
        if other_contributors > self.n - 1 {
            return Err(Error::InvalidArgument(format!(
                "other_contributors = {} exceeds group size minus one ({})",
                other_contributors,
                self.n - 1
            )));
        }
        let j = other_contributors as f64;
        let e = self.endowment;
        let m = self.multiplier;
        Ok(match (self.division, own) {
            (DivisionRule::AllPlayers, Contribution::Contribute) => {
                e * m * (j + 1.0) / self.n as f64
            }
            (DivisionRule::AllPlayers, Contribution::Shirk) => e * m * j / self.n as f64 + e,
            // pot E·m·(j+1) split among the j+1 contributors
            (DivisionRule::ContributorsOnly, Contribution::Contribute) => e * m,
            (DivisionRule::ContributorsOnly, Contribution::Shirk) => e,
        })
    }

    /// Two-strategy reduction: entry (s, s') is the payoff of playing `s`
    /// when all `n - 1` co-players play `s'`. Payoffs are linear in the
    /// number of contributors, so this matrix reproduces the binomial
    /// mean-field fitness exactly and feeds the population dynamics.
    pub fn induced_game(&self) -> MatrixGame {
        let full = self.n - 1;
        let u = |own, j| self.payoff(own, j).expect("j in range");
        MatrixGame::from_symmetric(
            format!("public-goods-n{}-e{}-m{}", self.n, self.endowment, self.multiplier),
            vec!["Contribute".into(), "Shirk".into()],
            vec![
                vec![u(Contribution::Contribute, full), u(Contribution::Contribute, 0)],
                vec![u(Contribution::Shirk, full), u(Contribution::Shirk, 0)],
            ],
        )
        .expect("payoff table is well-formed")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::pure_nash;

    #[test]
    fn full_contribution_beats_universal_shirking() {
        let g = PublicGoodsGame::new(4, 1.0, 2.0).unwrap();
        assert_eq!(g.payoff(Contribution::Contribute, 3).unwrap(), 2.0);
        assert_eq!(g.payoff(Contribution::Shirk, 0).unwrap(), 1.0);
    }

    #[test]
    fn shirking_on_contributors_pays_more() {
        let g = PublicGoodsGame::new(4, 1.0, 2.0).unwrap();
        let shirker = g.payoff(Contribution::Shirk, 3).unwrap();
        let contributor = g.payoff(Contribution::Contribute, 3).unwrap();
        assert_eq!(shirker, 2.5);
        assert_eq!(contributor, 2.0);
        assert!(shirker > contributor);
    }

    #[test]
    fn out_of_range_contributors_rejected() {
        let g = PublicGoodsGame::new(4, 1.0, 2.0).unwrap();
        assert!(g.payoff(Contribution::Shirk, 4).is_err());
    }

    #[test]
    fn induced_game_has_all_shirk_equilibrium() {
        let g = PublicGoodsGame::new(4, 1.0, 2.0).unwrap().induced_game();
        let eqs = pure_nash(&g);
        assert_eq!(eqs.len(), 1);
        assert_eq!(g.row_labels()[eqs[0].row], "Shirk");
    }

    #[test]
    fn shirk_dominance_margin_is_constant_when_m_below_n() {
        // shirker advantage E(1 - m/n) at any contributor count
        let g = PublicGoodsGame::new(4, 1.0, 2.0).unwrap();
        for j in 0..=3 {
            let diff = g.payoff(Contribution::Shirk, j).unwrap()
                - g.payoff(Contribution::Contribute, j).unwrap();
            assert!((diff - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn contributors_only_division_removes_the_dilemma() {
        let g = PublicGoodsGame::with_division(4, 1.0, 2.0, DivisionRule::ContributorsOnly)
            .unwrap();
        for j in 0..=3 {
            assert!(
                g.payoff(Contribution::Contribute, j).unwrap()
                    > g.payoff(Contribution::Shirk, j).unwrap()
            );
        }
        let eqs = pure_nash(&g.induced_game());
        assert_eq!(eqs.len(), 1);
        assert_eq!(eqs[0].row, 0, "contributing dominates under literal division");
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(PublicGoodsGame::new(1, 1.0, 2.0).is_err());
        assert!(PublicGoodsGame::new(4, 0.0, 2.0).is_err());
        assert!(PublicGoodsGame::new(4, 1.0, -1.0).is_err());
    }
}
