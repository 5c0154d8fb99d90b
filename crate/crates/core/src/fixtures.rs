//! Small reference games with known closed-form equilibria.

use nalgebra::{DMatrix, DVector};

use crate::model::{
    validate_game, AffineDemand, Game, GameData, Labels, Link, MarketNetwork, QuadraticCost,
    WelfareKind,
};

/// Cost structure of the single producer in the two-market example.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoMarketCost {
    /// `(x_1 + x_2)^2`, i.e. `Θ = 11'`.
    Coupled,
    /// `x_1^2 + x_2^2`, i.e. `Θ = I`.
    Separable,
}

/// One producer on two markets joined by an undirected link of capacity `chi`
/// (link 1 is `1 -> 2`, link 2 is `2 -> 1`), with `p_1 = 1 - z`, `p_2 = 2 - 2z`.
pub fn two_market_data(chi: f64, cost: TwoMarketCost) -> GameData {
    two_market_with(
        chi,
        cost,
        [AffineDemand::new(1.0, 1.0), AffineDemand::new(2.0, 2.0)],
    )
}

pub fn two_market(chi: f64, cost: TwoMarketCost) -> Game {
    validate_game(two_market_data(chi, cost)).expect("reference game is valid")
}

/// The same network with equal intercepts: `p_1 = 1 - z`, `p_2 = 1 - 2z`,
/// coupled cost.
pub fn two_market_equal_intercepts(chi: f64) -> Game {
    validate_game(two_market_with(
        chi,
        TwoMarketCost::Coupled,
        [AffineDemand::new(1.0, 1.0), AffineDemand::new(1.0, 2.0)],
    ))
    .expect("reference game is valid")
}

fn two_market_with(chi: f64, cost: TwoMarketCost, demands: [AffineDemand; 2]) -> GameData {
    let links = [
        Link {
            tail: 0,
            head: 1,
            capacity: chi,
        },
        Link {
            tail: 1,
            head: 0,
            capacity: chi,
        },
    ];
    let theta = match cost {
        TwoMarketCost::Coupled => DMatrix::from_element(2, 2, 1.0),
        TwoMarketCost::Separable => DMatrix::identity(2, 2),
    };
    GameData {
        network: MarketNetwork::new(2, &links, vec![vec![true, true]]),
        costs: vec![QuadraticCost::new(theta, DVector::zeros(2))],
        demands: demands.to_vec(),
        welfare: WelfareKind::Walrasian,
        labels: Some(Labels::numbered(1, 2, 2)),
    }
}

/// Three producers, four markets and seven links, including a parallel pair
/// (`2 -> 3` twice) and antiparallel pairs with unequal capacities.
pub fn four_market_network() -> MarketNetwork {
    let links = [
        Link {
            tail: 3,
            head: 0,
            capacity: 2.0,
        },
        Link {
            tail: 0,
            head: 1,
            capacity: 2.0,
        },
        Link {
            tail: 1,
            head: 0,
            capacity: 2.0,
        },
        Link {
            tail: 1,
            head: 2,
            capacity: 1.0,
        },
        Link {
            tail: 1,
            head: 2,
            capacity: 2.0,
        },
        Link {
            tail: 3,
            head: 2,
            capacity: 1.0,
        },
        Link {
            tail: 2,
            head: 3,
            capacity: 2.0,
        },
    ];
    let access = vec![
        vec![true, false, false, false],
        vec![true, true, false, false],
        vec![false, true, true, false],
    ];
    MarketNetwork::new(4, &links, access)
}

/// The four-market network with `p_j = 14 - 3 z_j` everywhere and per-market costs
/// `0.3 x + 0.7 x^2` for every producer.
pub fn four_market_data() -> GameData {
    GameData {
        network: four_market_network(),
        costs: vec![QuadraticCost::diagonal(&[0.7; 4], &[0.3; 4]); 3],
        demands: vec![AffineDemand::new(14.0, 3.0); 4],
        welfare: WelfareKind::Walrasian,
        labels: Some(Labels::numbered(3, 4, 7)),
    }
}

pub fn four_market() -> Game {
    validate_game(four_market_data()).expect("reference game is valid")
}
