//! Domain types: the market network, cost and demand families, the validated
//! game, and the players' action profiles.
//!
//! Producers are indexed `0..n`, markets `0..m` and links `0..l` in the order
//! they were supplied. The market–link incidence matrix is always derived from
//! the link endpoint lists and never stored separately.

use std::time::Duration;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{ModelError, Violation};

/// Relative tolerance on the smallest eigenvalue (and on asymmetry) of a cost
/// matrix, scaled by `1 + max|Θ|`.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Producers, markets and capacitated directed links between markets.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketNetwork {
    n_markets: usize,
    tails: Vec<usize>,
    heads: Vec<usize>,
    capacities: Vec<f64>,
    access: Vec<Vec<bool>>,
    access_sets: Vec<Vec<usize>>,
}

/// A directed link `tail -> head` with a flow capacity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub tail: usize,
    pub head: usize,
    pub capacity: f64,
}

impl MarketNetwork {
    /// Assembles a network. Nothing is checked here; invalid data is reported
    /// by [`validate_game`].
    pub fn new(n_markets: usize, links: &[Link], access: Vec<Vec<bool>>) -> Self {
        let access_sets = access
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter_map(|(j, &a)| a.then_some(j))
                    .collect()
            })
            .collect();
        Self {
            n_markets,
            tails: links.iter().map(|l| l.tail).collect(),
            heads: links.iter().map(|l| l.head).collect(),
            capacities: links.iter().map(|l| l.capacity).collect(),
            access,
            access_sets,
        }
    }

    pub fn n_markets(&self) -> usize {
        self.n_markets
    }

    pub fn n_links(&self) -> usize {
        self.tails.len()
    }

    pub fn n_producers(&self) -> usize {
        self.access.len()
    }

    pub fn tail(&self, k: usize) -> usize {
        self.tails[k]
    }

    pub fn head(&self, k: usize) -> usize {
        self.heads[k]
    }

    pub fn capacity(&self, k: usize) -> f64 {
        self.capacities[k]
    }

    pub fn capacities(&self) -> &[f64] {
        &self.capacities
    }

    pub fn link(&self, k: usize) -> Link {
        Link {
            tail: self.tails[k],
            head: self.heads[k],
            capacity: self.capacities[k],
        }
    }

    pub fn links(&self) -> impl Iterator<Item = Link> + '_ {
        (0..self.n_links()).map(|k| self.link(k))
    }

    pub fn has_access(&self, producer: usize, market: usize) -> bool {
        self.access[producer][market]
    }

    /// Markets producer `i` may sell on, in increasing order.
    pub fn access_set(&self, producer: usize) -> &[usize] {
        &self.access_sets[producer]
    }

    /// A producer with an all-zero access row is carried with zero production.
    pub fn is_active(&self, producer: usize) -> bool {
        !self.access_sets[producer].is_empty()
    }

    /// The `m x l` incidence matrix: `+1` at the head, `-1` at the tail.
    pub fn incidence(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.n_markets, self.n_links());
        for k in 0..self.n_links() {
            b[(self.heads[k], k)] += 1.0;
            b[(self.tails[k], k)] -= 1.0;
        }
        b
    }

    /// `B y`: net inflow into every market.
    pub fn net_inflow(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_markets];
        for (k, &f) in y.iter().enumerate() {
            out[self.heads[k]] += f;
            out[self.tails[k]] -= f;
        }
        out
    }

    /// `B' v`: per-link difference `v[head] - v[tail]`.
    pub fn link_differences(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n_links())
            .map(|k| v[self.heads[k]] - v[self.tails[k]])
            .collect()
    }

    /// Total capacity of the links leaving market `j`.
    pub fn outgoing_capacity(&self, market: usize) -> f64 {
        (0..self.n_links())
            .filter(|&k| self.tails[k] == market)
            .map(|k| self.capacities[k])
            .sum()
    }
}

/// `c_i(x) = x' Θ x + γ' x`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    pub theta: DMatrix<f64>,
    pub gamma: DVector<f64>,
}

impl QuadraticCost {
    pub fn new(theta: DMatrix<f64>, gamma: DVector<f64>) -> Self {
        Self { theta, gamma }
    }

    pub fn diagonal(theta: &[f64], gamma: &[f64]) -> Self {
        Self {
            theta: DMatrix::from_diagonal(&DVector::from_column_slice(theta)),
            gamma: DVector::from_column_slice(gamma),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        let m = self.theta.nrows();
        (0..m).all(|r| (0..m).all(|c| r == c || self.theta[(r, c)] == 0.0))
    }

    /// Cost evaluated only over the coordinates in `support`.
    pub(crate) fn eval_on(&self, support: &[usize], x: &[f64]) -> f64 {
        let mut total = 0.0;
        for &a in support {
            let mut row = 0.0;
            for &b in support {
                row += self.theta[(a, b)] * x[b];
            }
            total += x[a] * row + self.gamma[a] * x[a];
        }
        total
    }

    /// Marginal cost `2 Θ x + γ` at market `a`, summing over `support`.
    pub(crate) fn marginal_on(&self, support: &[usize], x: &[f64], a: usize) -> f64 {
        let mut row = 0.0;
        for &b in support {
            row += self.theta[(a, b)] * x[b];
        }
        2.0 * row + self.gamma[a]
    }
}

/// `p(z) = α - β z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineDemand {
    pub alpha: f64,
    pub beta: f64,
}

impl AffineDemand {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }

    pub fn price(&self, z: f64) -> f64 {
        self.alpha - self.beta * z
    }

    /// Consumption at which the price reaches zero.
    pub fn zero_price_consumption(&self) -> f64 {
        self.alpha / self.beta
    }

    /// `∫_0^z p(s) ds`, valid for negative `z` as well.
    pub fn surplus(&self, z: f64) -> f64 {
        self.alpha * z - 0.5 * self.beta * z * z
    }
}

/// Market maker objective. Only the Walrasian welfare is built in; other
/// designs would be added as variants here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[non_exhaustive]
pub enum WelfareKind {
    #[default]
    Walrasian,
}

/// String identifiers carried alongside the numeric game.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Labels {
    pub markets: Vec<String>,
    pub producers: Vec<String>,
    pub links: Vec<String>,
}

impl Labels {
    /// One-based numeric ids, matching how small examples are usually written.
    pub fn numbered(n: usize, m: usize, l: usize) -> Self {
        Self {
            markets: (1..=m).map(|j| j.to_string()).collect(),
            producers: (1..=n).map(|i| i.to_string()).collect(),
            links: (1..=l).map(|k| k.to_string()).collect(),
        }
    }
}

/// Unvalidated game data.
#[derive(Debug, Clone)]
pub struct GameData {
    pub network: MarketNetwork,
    pub costs: Vec<QuadraticCost>,
    pub demands: Vec<AffineDemand>,
    pub welfare: WelfareKind,
    pub labels: Option<Labels>,
}

/// A validated network Cournot game with a market maker. Immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    network: MarketNetwork,
    costs: Vec<QuadraticCost>,
    demands: Vec<AffineDemand>,
    welfare: WelfareKind,
    labels: Labels,
}

impl Game {
    pub fn network(&self) -> &MarketNetwork {
        &self.network
    }

    pub fn costs(&self) -> &[QuadraticCost] {
        &self.costs
    }

    pub fn cost(&self, producer: usize) -> &QuadraticCost {
        &self.costs[producer]
    }

    pub fn demands(&self) -> &[AffineDemand] {
        &self.demands
    }

    pub fn demand(&self, market: usize) -> AffineDemand {
        self.demands[market]
    }

    pub fn welfare_kind(&self) -> WelfareKind {
        self.welfare
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn n_producers(&self) -> usize {
        self.network.n_producers()
    }

    pub fn n_markets(&self) -> usize {
        self.network.n_markets()
    }

    pub fn n_links(&self) -> usize {
        self.network.n_links()
    }

    /// True when every market has the same price intercept.
    pub fn has_equal_intercepts(&self) -> bool {
        match self.demands.first() {
            Some(first) => self.demands.iter().all(|d| d.alpha == first.alpha),
            None => true,
        }
    }

    /// Number of box-constrained scalar decision variables: one per
    /// accessible (producer, market) pair plus one per link.
    pub fn boxed_dimension(&self) -> usize {
        (0..self.n_producers())
            .map(|i| self.network.access_set(i).len())
            .sum::<usize>()
            + self.n_links()
    }
}

/// Checks every invariant of the raw data and returns the validated game.
/// All violations are collected, not just the first.
pub fn validate_game(data: GameData) -> Result<Game, ModelError> {
    let GameData {
        network,
        mut costs,
        demands,
        welfare,
        labels,
    } = data;
    let n = network.n_producers();
    let m = network.n_markets();
    let l = network.n_links();
    let mut violations = Vec::new();
    let mut dim = |what: String, expected: usize, got: usize| {
        if expected != got {
            violations.push(Violation::DimensionMismatch {
                what,
                expected,
                got,
            });
        }
    };

    dim("demands".into(), m, demands.len());
    dim("costs".into(), n, costs.len());
    for (i, row) in network.access.iter().enumerate() {
        dim(format!("access row {i}"), m, row.len());
    }
    for (i, c) in costs.iter().enumerate() {
        dim(format!("theta rows of producer {i}"), m, c.theta.nrows());
        dim(format!("theta cols of producer {i}"), m, c.theta.ncols());
        dim(format!("gamma of producer {i}"), m, c.gamma.len());
    }
    if let Some(lb) = &labels {
        dim("market ids".into(), m, lb.markets.len());
        dim("producer ids".into(), n, lb.producers.len());
        dim("link ids".into(), l, lb.links.len());
    }
    if !violations.is_empty() {
        return Err(ModelError::Invalid(violations));
    }

    for (j, d) in demands.iter().enumerate() {
        if !d.alpha.is_finite() || !d.beta.is_finite() {
            violations.push(Violation::NonFinite {
                what: format!("demand of market {j}"),
            });
            continue;
        }
        if d.alpha <= 0.0 {
            violations.push(Violation::NonPositiveIntercept { market: j });
        }
        if d.beta <= 0.0 {
            violations.push(Violation::NonPositiveSlope { market: j });
        }
    }

    for k in 0..l {
        let link = network.link(k);
        if !link.capacity.is_finite() {
            violations.push(Violation::NonFinite {
                what: format!("capacity of link {k}"),
            });
        } else if link.capacity < 0.0 {
            violations.push(Violation::NegativeCapacity { link: k });
        }
        for end in [link.tail, link.head] {
            if end >= m {
                violations.push(Violation::UnknownMarket {
                    link: k,
                    market: end,
                });
            }
        }
        if link.tail == link.head {
            violations.push(Violation::SelfLoop { link: k });
        }
    }

    for (i, cost) in costs.iter_mut().enumerate() {
        if cost
            .theta
            .iter()
            .chain(cost.gamma.iter())
            .any(|v| !v.is_finite())
        {
            violations.push(Violation::NonFinite {
                what: format!("cost of producer {i}"),
            });
            continue;
        }
        for j in 0..m {
            if cost.gamma[j] < 0.0 {
                violations.push(Violation::NegativeLinearCost {
                    producer: i,
                    market: j,
                });
            }
        }
        let scale = 1.0 + cost.theta.amax();
        let tol = PSD_TOLERANCE * scale;
        let asym = (&cost.theta - cost.theta.transpose()).amax();
        if asym > tol {
            violations.push(Violation::AsymmetricCost { producer: i });
            continue;
        }
        cost.theta = (&cost.theta + cost.theta.transpose()) * 0.5;
        if m > 0 {
            let eig = SymmetricEigen::new(cost.theta.clone());
            let min = eig.eigenvalues.min();
            if min < -tol {
                violations.push(Violation::NonPsdCost {
                    producer: i,
                    min_eigenvalue: min,
                });
            }
        }
    }

    if !violations.is_empty() {
        return Err(ModelError::Invalid(violations));
    }
    Ok(Game {
        labels: labels.unwrap_or_else(|| Labels::numbered(n, m, l)),
        network,
        costs,
        demands,
        welfare,
    })
}

/// Quantities sold by every producer on every market (`n x m`).
#[derive(Debug, Clone, PartialEq)]
pub struct ProductionProfile {
    x: DMatrix<f64>,
}

impl ProductionProfile {
    /// Checks shape, non-negativity and that production only happens on
    /// accessible markets.
    pub fn new(network: &MarketNetwork, x: DMatrix<f64>) -> Result<Self, ModelError> {
        check_dim("production rows", network.n_producers(), x.nrows())?;
        check_dim("production columns", network.n_markets(), x.ncols())?;
        for i in 0..x.nrows() {
            for j in 0..x.ncols() {
                let v = x[(i, j)];
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(ModelError::NegativeProduction {
                        producer: i,
                        market: j,
                    });
                }
                if v > 0.0 && !network.has_access(i, j) {
                    return Err(ModelError::SupportViolation {
                        producer: i,
                        market: j,
                    });
                }
            }
        }
        Ok(Self { x })
    }

    pub fn from_rows(network: &MarketNetwork, rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        let n = rows.len();
        let m = rows.first().map_or(network.n_markets(), Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(ModelError::DimensionMismatch {
                what: "production rows",
                expected: m,
                got: rows.iter().map(Vec::len).find(|&len| len != m).unwrap_or(0),
            });
        }
        Self::new(network, DMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }

    pub fn zeros(network: &MarketNetwork) -> Self {
        Self {
            x: DMatrix::zeros(network.n_producers(), network.n_markets()),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn get(&self, producer: usize, market: usize) -> f64 {
        self.x[(producer, market)]
    }

    /// Row `i` as a dense length-`m` vector.
    pub fn row(&self, producer: usize) -> Vec<f64> {
        self.x.row(producer).iter().copied().collect()
    }

    pub fn producer_total(&self, producer: usize) -> f64 {
        self.x.row(producer).sum()
    }

    /// Replaces producer `i`'s action, re-checking the support.
    pub fn with_row(
        &self,
        network: &MarketNetwork,
        producer: usize,
        row: &[f64],
    ) -> Result<Self, ModelError> {
        let mut x = self.x.clone();
        check_dim("production row", x.ncols(), row.len())?;
        for (j, &v) in row.iter().enumerate() {
            x[(producer, j)] = v;
        }
        Self::new(network, x)
    }

    pub fn n_producers(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_markets(&self) -> usize {
        self.x.ncols()
    }
}

/// Flow on every link, inside `[0, c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowProfile {
    y: DVector<f64>,
}

impl FlowProfile {
    pub fn new(network: &MarketNetwork, y: Vec<f64>) -> Result<Self, ModelError> {
        check_dim("flows", network.n_links(), y.len())?;
        for (k, &v) in y.iter().enumerate() {
            let cap = network.capacity(k);
            if !(v >= 0.0 && v <= cap) {
                return Err(ModelError::FlowOutOfBounds {
                    link: k,
                    value: v,
                    capacity: cap,
                });
            }
        }
        Ok(Self {
            y: DVector::from_vec(y),
        })
    }

    pub fn zeros(network: &MarketNetwork) -> Self {
        Self {
            y: DVector::zeros(network.n_links()),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        self.y.as_slice()
    }

    pub fn get(&self, link: usize) -> f64 {
        self.y[link]
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<(), ModelError> {
    if expected == got {
        Ok(())
    } else {
        Err(ModelError::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}

/// `z = diag(A'x) + B y`. Entries may be negative.
pub fn net_consumption(
    game: &Game,
    x: &ProductionProfile,
    y: &FlowProfile,
) -> Result<Vec<f64>, ModelError> {
    check_profiles(game, x, y)?;
    Ok(net_consumption_unchecked(
        game.network(),
        x.matrix(),
        y.as_slice(),
    ))
}

pub(crate) fn check_profiles(
    game: &Game,
    x: &ProductionProfile,
    y: &FlowProfile,
) -> Result<(), ModelError> {
    check_dim("production rows", game.n_producers(), x.n_producers())?;
    check_dim("production columns", game.n_markets(), x.n_markets())?;
    check_dim("flows", game.n_links(), y.len())
}

pub(crate) fn net_consumption_unchecked(
    network: &MarketNetwork,
    x: &DMatrix<f64>,
    y: &[f64],
) -> Vec<f64> {
    let mut z = network.net_inflow(y);
    for i in 0..network.n_producers() {
        for &j in network.access_set(i) {
            z[j] += x[(i, j)];
        }
    }
    z
}

/// Zero-price consumption of market `j` plus the capacity leaving it. Any
/// production above this on `j` is strictly dominated.
pub fn market_dominance_bound(game: &Game, market: usize) -> f64 {
    game.demand(market).zero_price_consumption() + game.network().outgoing_capacity(market)
}

/// Per-(producer, market) dominance bound; requires access.
pub fn dominance_bound(game: &Game, producer: usize, market: usize) -> Result<f64, ModelError> {
    if !game.network().has_access(producer, market) {
        return Err(ModelError::NoAccess { producer, market });
    }
    Ok(market_dominance_bound(game, market))
}

/// Diagnostics recorded by a solver run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolverStats {
    pub iterations: usize,
    pub pg_norm: f64,
    pub wall_time: Duration,
}

/// An action profile together with everything derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub x: ProductionProfile,
    pub y: FlowProfile,
    pub z: Vec<f64>,
    pub prices: Vec<f64>,
    pub potential_value: f64,
    pub producer_utilities: Vec<f64>,
    pub welfare_value: f64,
    pub stats: SolverStats,
}

impl Outcome {
    /// `B y` of this outcome.
    pub fn net_inflow(&self, network: &MarketNetwork) -> Vec<f64> {
        network.net_inflow(self.y.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn four_market_parameters_validate() {
        let game = fixtures::four_market();
        assert_eq!(game.n_producers(), 3);
        assert_eq!(game.n_markets(), 4);
        assert_eq!(game.n_links(), 7);
    }

    #[test]
    fn four_market_incidence_matrix() {
        let game = fixtures::four_market();
        let b = game.network().incidence();
        let expected = [
            [1., -1., 1., 0., 0., 0., 0.],
            [0., 1., -1., -1., -1., 0., 0.],
            [0., 0., 0., 1., 1., 1., -1.],
            [-1., 0., 0., 0., 0., -1., 1.],
        ];
        for j in 0..4 {
            for k in 0..7 {
                assert_eq!(b[(j, k)], expected[j][k], "B[{j},{k}]");
            }
        }
        for k in 0..7 {
            assert_eq!(b.column(k).sum(), 0.0);
        }
    }

    #[test]
    fn zero_slope_is_rejected() {
        let mut data = fixtures::two_market_data(1.0, fixtures::TwoMarketCost::Coupled);
        data.demands[1].beta = 0.0;
        match validate_game(data) {
            Err(ModelError::Invalid(v)) => {
                assert_eq!(v, vec![Violation::NonPositiveSlope { market: 1 }])
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn indefinite_theta_reports_its_min_eigenvalue() {
        let mut data = fixtures::two_market_data(1.0, fixtures::TwoMarketCost::Coupled);
        data.costs[0].theta = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match validate_game(data) {
            Err(ModelError::Invalid(v)) => {
                assert_eq!(v.len(), 1);
                match v[0] {
                    Violation::NonPsdCost {
                        producer,
                        min_eigenvalue,
                    } => {
                        assert_eq!(producer, 0);
                        assert!((min_eigenvalue + 1.0).abs() < 1e-12);
                    }
                    ref other => panic!("unexpected {other:?}"),
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn all_violations_are_reported() {
        let mut data = fixtures::two_market_data(1.0, fixtures::TwoMarketCost::Coupled);
        data.demands[0].beta = -1.0;
        data.demands[1].alpha = 0.0;
        let links = [
            Link {
                tail: 0,
                head: 0,
                capacity: 1.0,
            },
            Link {
                tail: 0,
                head: 1,
                capacity: -1.0,
            },
        ];
        data.network = MarketNetwork::new(2, &links, vec![vec![true, true]]);
        data.labels = None;
        let Err(ModelError::Invalid(v)) = validate_game(data) else {
            panic!("expected failure");
        };
        assert!(v.contains(&Violation::NonPositiveSlope { market: 0 }));
        assert!(v.contains(&Violation::NonPositiveIntercept { market: 1 }));
        assert!(v.contains(&Violation::SelfLoop { link: 0 }));
        assert!(v.contains(&Violation::NegativeCapacity { link: 1 }));
    }

    #[test]
    fn slightly_asymmetric_theta_is_accepted_and_symmetrized() {
        let mut data = fixtures::two_market_data(1.0, fixtures::TwoMarketCost::Coupled);
        data.costs[0].theta[(0, 1)] += 1e-13;
        let game = validate_game(data).unwrap();
        let t = &game.cost(0).theta;
        assert_eq!(t[(0, 1)], t[(1, 0)]);
    }

    #[test]
    fn inactive_producer_is_allowed() {
        let links = [];
        let network = MarketNetwork::new(1, &links, vec![vec![true], vec![false]]);
        let data = GameData {
            network,
            costs: vec![QuadraticCost::diagonal(&[1.0], &[0.0]); 2],
            demands: vec![AffineDemand::new(1.0, 1.0)],
            welfare: WelfareKind::Walrasian,
            labels: None,
        };
        let game = validate_game(data).unwrap();
        assert!(!game.network().is_active(1));
        assert!(game.network().is_active(0));
    }

    #[test]
    fn net_consumption_of_two_market() {
        let game = fixtures::two_market(1.0, fixtures::TwoMarketCost::Coupled);
        let x = ProductionProfile::from_rows(game.network(), &[vec![0.3, 0.2]]).unwrap();
        let y = FlowProfile::new(game.network(), vec![0.5, 0.2]).unwrap();
        let z = net_consumption(&game, &x, &y).unwrap();
        assert!((z[0] - 0.0).abs() < 1e-15);
        assert!((z[1] - 0.5).abs() < 1e-15);

        let zero = net_consumption(
            &game,
            &ProductionProfile::zeros(game.network()),
            &FlowProfile::zeros(game.network()),
        )
        .unwrap();
        assert_eq!(zero, vec![0.0, 0.0]);
    }

    #[test]
    fn support_violation_is_rejected() {
        let game = fixtures::four_market();
        let mut x = DMatrix::zeros(3, 4);
        x[(0, 1)] = 0.5;
        assert!(matches!(
            ProductionProfile::new(game.network(), x),
            Err(ModelError::SupportViolation {
                producer: 0,
                market: 1
            })
        ));
    }

    #[test]
    fn flows_outside_capacity_are_rejected() {
        let game = fixtures::two_market(0.2, fixtures::TwoMarketCost::Coupled);
        assert!(FlowProfile::new(game.network(), vec![0.3, 0.0]).is_err());
        assert!(FlowProfile::new(game.network(), vec![-0.1, 0.0]).is_err());
        assert!(FlowProfile::new(game.network(), vec![0.2, 0.0]).is_ok());
    }

    #[test]
    fn dominance_bound_of_four_market_market4() {
        let game = fixtures::four_market();
        // ž = 14/3, links 1 (4->1) and 6 (4->3) leave market 4 with capacities 2 and 1
        let bound = market_dominance_bound(&game, 3);
        assert!((bound - (14.0 / 3.0 + 3.0)).abs() < 1e-12);
        assert!((bound - 7.667).abs() < 1e-3);
        assert!(matches!(
            dominance_bound(&game, 0, 3),
            Err(ModelError::NoAccess {
                producer: 0,
                market: 3
            })
        ));
        // market 1 has one outgoing link (1->2, capacity 2)
        assert!((dominance_bound(&game, 0, 0).unwrap() - (14.0 / 3.0 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn dominance_bound_without_outgoing_links_is_zero_price_consumption() {
        let data = GameData {
            network: MarketNetwork::new(
                2,
                &[Link {
                    tail: 0,
                    head: 1,
                    capacity: 5.0,
                }],
                vec![vec![true, true]],
            ),
            costs: vec![QuadraticCost::diagonal(&[1.0, 1.0], &[0.0, 0.0])],
            demands: vec![AffineDemand::new(3.0, 2.0), AffineDemand::new(4.0, 8.0)],
            welfare: WelfareKind::Walrasian,
            labels: None,
        };
        let game = validate_game(data).unwrap();
        assert_eq!(dominance_bound(&game, 0, 1).unwrap(), 0.5);
        assert_eq!(dominance_bound(&game, 0, 0).unwrap(), 1.5 + 5.0);
    }
}
