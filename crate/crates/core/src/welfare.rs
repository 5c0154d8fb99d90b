//! Prices, costs, utilities, the Walrasian welfare and the exact potential.
//!
//! For affine demand `p_j(z) = α_j - β_j z` the consumer surplus integral is
//! evaluated in closed form, `α_j z - β_j z² / 2`, which stays meaningful for
//! negative net consumption.

use nalgebra::DMatrix;

use crate::error::ModelError;
use crate::model::{
    check_profiles, net_consumption_unchecked, FlowProfile, Game, Outcome, ProductionProfile,
    SolverStats, WelfareKind,
};

/// Welfare value with its gradient in `z` (when requested).
#[derive(Debug, Clone, PartialEq)]
pub struct WelfareEvaluation {
    pub value: f64,
    pub grad_z: Option<Vec<f64>>,
}

pub fn price(game: &Game, market: usize, zj: f64) -> f64 {
    game.demand(market).price(zj)
}

pub fn prices(game: &Game, z: &[f64]) -> Vec<f64> {
    game.demands()
        .iter()
        .zip(z)
        .map(|(d, &zj)| d.price(zj))
        .collect()
}

/// `x_i' Θ^(i) x_i + γ^(i)' x_i`; `xi` must vanish off the producer's access set.
pub fn producer_cost(game: &Game, producer: usize, xi: &[f64]) -> Result<f64, ModelError> {
    if xi.len() != game.n_markets() {
        return Err(ModelError::DimensionMismatch {
            what: "producer action",
            expected: game.n_markets(),
            got: xi.len(),
        });
    }
    let network = game.network();
    if let Some(market) = (0..xi.len()).find(|&j| xi[j] != 0.0 && !network.has_access(producer, j))
    {
        return Err(ModelError::SupportViolation { producer, market });
    }
    Ok(game
        .cost(producer)
        .eval_on(network.access_set(producer), xi))
}

pub(crate) fn cost_of_row(game: &Game, x: &DMatrix<f64>, producer: usize) -> f64 {
    let support = game.network().access_set(producer);
    let row: Vec<f64> = x.row(producer).iter().copied().collect();
    game.cost(producer).eval_on(support, &row)
}

pub(crate) fn total_cost(game: &Game, x: &DMatrix<f64>) -> f64 {
    (0..game.n_producers())
        .map(|i| cost_of_row(game, x, i))
        .sum()
}

pub(crate) fn utility_unchecked(game: &Game, x: &DMatrix<f64>, z: &[f64], producer: usize) -> f64 {
    let revenue: f64 = game
        .network()
        .access_set(producer)
        .iter()
        .map(|&j| x[(producer, j)] * game.demand(j).price(z[j]))
        .sum();
    revenue - cost_of_row(game, x, producer)
}

/// Profit of producer `i`: revenue at the market prices minus its cost.
pub fn producer_utility(
    game: &Game,
    producer: usize,
    x: &ProductionProfile,
    y: &FlowProfile,
) -> Result<f64, ModelError> {
    check_profiles(game, x, y)?;
    let z = net_consumption_unchecked(game.network(), x.matrix(), y.as_slice());
    Ok(utility_unchecked(game, x.matrix(), &z, producer))
}

pub(crate) fn surplus(game: &Game, z: &[f64]) -> f64 {
    game.demands()
        .iter()
        .zip(z)
        .map(|(d, &zj)| d.surplus(zj))
        .sum()
}

/// Aggregate consumer surplus minus total production cost.
pub fn walrasian_welfare(game: &Game, x: &ProductionProfile, z: &[f64]) -> Result<f64, ModelError> {
    check_z(game, x, z)?;
    Ok(surplus(game, z) - total_cost(game, x.matrix()))
}

/// Welfare of the game's configured kind, optionally with its `z`-gradient.
pub fn evaluate_welfare(
    game: &Game,
    x: &ProductionProfile,
    z: &[f64],
    with_gradient: bool,
) -> Result<WelfareEvaluation, ModelError> {
    match game.welfare_kind() {
        WelfareKind::Walrasian => Ok(WelfareEvaluation {
            value: walrasian_welfare(game, x, z)?,
            grad_z: with_gradient.then(|| prices(game, z)),
        }),
    }
}

/// `u_0(y, x) = w(x, diag(A'x) + B y)`.
pub fn market_maker_utility(
    game: &Game,
    x: &ProductionProfile,
    y: &FlowProfile,
) -> Result<f64, ModelError> {
    check_profiles(game, x, y)?;
    let z = net_consumption_unchecked(game.network(), x.matrix(), y.as_slice());
    Ok(evaluate_welfare(game, x, &z, false)?.value)
}

pub(crate) fn potential_unchecked(game: &Game, x: &DMatrix<f64>, y: &[f64]) -> f64 {
    let network = game.network();
    let z = net_consumption_unchecked(network, x, y);
    let mut own = 0.0;
    for i in 0..game.n_producers() {
        for &j in network.access_set(i) {
            own += 0.5 * game.demand(j).beta * x[(i, j)] * x[(i, j)];
        }
    }
    surplus(game, &z) - total_cost(game, x) - own
}

/// `P(x, y) = w(x, diag(A'x) + B y) - Σ_ij A_ij β_j x_ij² / 2`.
pub fn potential(game: &Game, x: &ProductionProfile, y: &FlowProfile) -> Result<f64, ModelError> {
    ensure_potential_game(game)?;
    check_profiles(game, x, y)?;
    Ok(potential_unchecked(game, x.matrix(), y.as_slice()))
}

/// The exact potential exists for Walrasian welfare with affine demand.
pub fn ensure_potential_game(game: &Game) -> Result<(), ModelError> {
    match game.welfare_kind() {
        WelfareKind::Walrasian => Ok(()),
    }
}

/// `∂w/∂z_j`, which for Walrasian welfare is the price `p_j(z_j)`.
pub fn welfare_gradient_z(
    game: &Game,
    x: &ProductionProfile,
    z: &[f64],
) -> Result<Vec<f64>, ModelError> {
    check_z(game, x, z)?;
    match game.welfare_kind() {
        WelfareKind::Walrasian => Ok(prices(game, z)),
    }
}

fn check_z(game: &Game, x: &ProductionProfile, z: &[f64]) -> Result<(), ModelError> {
    if x.n_producers() != game.n_producers() || x.n_markets() != game.n_markets() {
        return Err(ModelError::DimensionMismatch {
            what: "production profile",
            expected: game.n_producers() * game.n_markets(),
            got: x.n_producers() * x.n_markets(),
        });
    }
    if z.len() != game.n_markets() {
        return Err(ModelError::DimensionMismatch {
            what: "net consumption",
            expected: game.n_markets(),
            got: z.len(),
        });
    }
    Ok(())
}

impl Outcome {
    /// Derives z, prices, utilities, welfare and potential from `(x, y)`.
    pub fn from_profiles(
        game: &Game,
        x: ProductionProfile,
        y: FlowProfile,
        stats: SolverStats,
    ) -> Result<Self, ModelError> {
        check_profiles(game, &x, &y)?;
        let z = net_consumption_unchecked(game.network(), x.matrix(), y.as_slice());
        let prices = prices(game, &z);
        let producer_utilities = (0..game.n_producers())
            .map(|i| utility_unchecked(game, x.matrix(), &z, i))
            .collect();
        let welfare_value = evaluate_welfare(game, &x, &z, false)?.value;
        let potential_value = potential(game, &x, &y)?;
        Ok(Self {
            x,
            y,
            z,
            prices,
            potential_value,
            producer_utilities,
            welfare_value,
            stats,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, TwoMarketCost};

    fn profile(game: &Game, x: &[f64], y: &[f64]) -> (ProductionProfile, FlowProfile) {
        (
            ProductionProfile::from_rows(game.network(), &[x.to_vec()]).unwrap(),
            FlowProfile::new(game.network(), y.to_vec()).unwrap(),
        )
    }

    #[test]
    fn two_market_prices() {
        let game = fixtures::two_market(1.0, TwoMarketCost::Coupled);
        assert!((price(&game, 0, 4.0 / 15.0 - 1.0 / 3.0) - 16.0 / 15.0).abs() < 1e-15);
        assert_eq!(price(&game, 1, 0.0), 2.0);
        let g5 = fixtures::four_market();
        assert!((price(&g5, 0, 2.11) - 7.67).abs() < 1e-12);
        assert!((price(&g5, 0, 2.11) - 7.64).abs() <= 0.04);
    }

    #[test]
    fn two_market_costs() {
        let a = fixtures::two_market(1.0, TwoMarketCost::Coupled);
        assert!((producer_cost(&a, 0, &[0.3, 0.2]).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(producer_cost(&a, 0, &[0.0, 0.0]).unwrap(), 0.0);
        let b = fixtures::two_market(1.0, TwoMarketCost::Separable);
        assert!((producer_cost(&b, 0, &[0.3, 0.2]).unwrap() - 0.13).abs() < 1e-15);
    }

    #[test]
    fn cost_rejects_production_without_access() {
        let game = fixtures::four_market();
        assert!(matches!(
            producer_cost(&game, 0, &[1.0, 1.0, 0.0, 0.0]),
            Err(ModelError::SupportViolation {
                producer: 0,
                market: 1
            })
        ));
    }

    #[test]
    fn utility_at_the_two_market_equilibrium() {
        let game = fixtures::two_market(1.0, TwoMarketCost::Coupled);
        let (x, y) = profile(&game, &[4.0 / 15.0, 2.0 / 15.0], &[1.0 / 3.0, 0.0]);
        let u = producer_utility(&game, 0, &x, &y).unwrap();
        // revenue (6/15)(16/15), cost (6/15)^2
        let expected = 6.0 / 15.0 * 16.0 / 15.0 - (6.0f64 / 15.0).powi(2);
        assert!((u - expected).abs() < 1e-14);
        assert!((u - 0.2667).abs() < 1e-4);
        let (x0, _) = profile(&game, &[0.0, 0.0], &[0.0, 0.0]);
        assert_eq!(producer_utility(&game, 0, &x0, &y).unwrap(), 0.0);
    }

    #[test]
    fn welfare_matches_the_expanded_market_maker_polynomial() {
        let game = fixtures::two_market(1.0, TwoMarketCost::Coupled);
        let (x, y) = profile(&game, &[0.3, 0.2], &[0.5, 0.2]);
        let z = crate::model::net_consumption(&game, &x, &y).unwrap();
        let w = walrasian_welfare(&game, &x, &z).unwrap();
        // x11 + 2 x12 - x11²/2 - x12² - (x11 + x12)² + (1 + x11 - 2 x12) Δ - 3Δ²/2
        let (a, b, d) = (0.3, 0.2, 0.3);
        let poly = a + 2.0 * b - a * a / 2.0 - b * b - (a + b) * (a + b) + (1.0 + a - 2.0 * b) * d
            - 1.5 * d * d;
        assert!((w - poly).abs() < 1e-14);
        assert!((w - 0.5).abs() < 1e-14);
    }

    #[test]
    fn welfare_at_origin_and_single_market_peak() {
        let game = fixtures::two_market(1.0, TwoMarketCost::Coupled);
        let (x, _) = profile(&game, &[0.0, 0.0], &[0.0, 0.0]);
        assert_eq!(walrasian_welfare(&game, &x, &[0.0, 0.0]).unwrap(), 0.0);
        // market 1 alone has α = β = 1: surplus peaks at z = 1 with value 1/2
        assert_eq!(walrasian_welfare(&game, &x, &[1.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn market_maker_utility_depends_on_flows_only_through_net_flow() {
        let game = fixtures::two_market(1.0, TwoMarketCost::Coupled);
        let (x, y1) = profile(&game, &[0.3, 0.2], &[0.5, 0.2]);
        let (_, y2) = profile(&game, &[0.3, 0.2], &[0.3, 0.0]);
        let u1 = market_maker_utility(&game, &x, &y1).unwrap();
        let u2 = market_maker_utility(&game, &x, &y2).unwrap();
        assert!((u1 - u2).abs() < 1e-15);

        let (_, y0) = profile(&game, &[0.3, 0.2], &[0.0, 0.0]);
        let w = walrasian_welfare(&game, &x, &[0.3, 0.2]).unwrap();
        assert_eq!(market_maker_utility(&game, &x, &y0).unwrap(), w);
    }

    #[test]
    fn potential_matches_the_closed_form_polynomial() {
        use rand::{Rng, SeedableRng};
        let game = fixtures::two_market(1.0, TwoMarketCost::Coupled);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let (a, b) = (rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
            let (y1, y2) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            let (x, y) = profile(&game, &[a, b], &[y1, y2]);
            let d = y1 - y2;
            let closed = a + 2.0 * b - 2.0 * a * a - 3.0 * b * b - 2.0 * a * b
                + (1.0 + a - 2.0 * b) * d
                - 1.5 * d * d;
            let p = potential(&game, &x, &y).unwrap();
            assert!((p - closed).abs() < 1e-12, "{p} vs {closed}");
        }
        let (x0, y0) = profile(&game, &[0.0, 0.0], &[0.0, 0.0]);
        assert_eq!(potential(&game, &x0, &y0).unwrap(), 0.0);
    }

    #[test]
    fn gradient_at_zero_is_the_intercepts() {
        let game = fixtures::four_market();
        let x = ProductionProfile::zeros(game.network());
        assert_eq!(
            welfare_gradient_z(&game, &x, &[0.0; 4]).unwrap(),
            vec![14.0; 4]
        );
        let eval = evaluate_welfare(&game, &x, &[2.11, 2.11, 2.11, 2.0], true).unwrap();
        let g = eval.grad_z.unwrap();
        assert!((g[0] - 7.67).abs() < 1e-12 && (g[3] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let game = fixtures::four_market();
        let x = ProductionProfile::zeros(game.network());
        assert!(matches!(
            walrasian_welfare(&game, &x, &[0.0; 3]),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }
}
