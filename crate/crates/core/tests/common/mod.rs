#![allow(dead_code)]

use std::path::PathBuf;

use cnet::model::{
    validate_game, AffineDemand, FlowProfile, Game, GameData, Labels, Link, MarketNetwork,
    ProductionProfile, QuadraticCost, WelfareKind,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

/// Shape of randomly drawn games.
#[derive(Debug, Clone, Copy)]
pub struct GameShape {
    pub markets: (usize, usize),
    pub producers: (usize, usize),
    pub links: (usize, usize),
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
    pub capacity: (f64, f64),
    /// Every market gets the same intercept.
    pub equal_intercepts: bool,
    /// Only links that keep the network a forest, so flows are unique.
    pub forest: bool,
    /// Probability that a cost matrix is dense rather than diagonal.
    pub dense_cost: f64,
    pub min_theta: f64,
}

impl Default for GameShape {
    fn default() -> Self {
        Self {
            markets: (1, 5),
            producers: (1, 4),
            links: (0, 8),
            alpha: (1.0, 10.0),
            beta: (0.5, 3.0),
            capacity: (0.0, 3.0),
            equal_intercepts: false,
            forest: false,
            dense_cost: 0.5,
            min_theta: 0.0,
        }
    }
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

fn count(rng: &mut impl Rng, (lo, hi): (usize, usize)) -> usize {
    rng.gen_range(lo..=hi)
}

fn find(parent: &mut [usize], mut a: usize) -> usize {
    while parent[a] != a {
        a = parent[a];
    }
    a
}

pub fn random_game(rng: &mut impl Rng, shape: &GameShape) -> Game {
    let m = count(rng, shape.markets);
    let n = count(rng, shape.producers);
    let common_alpha = uniform(rng, shape.alpha);
    let demands: Vec<AffineDemand> = (0..m)
        .map(|_| {
            let alpha = if shape.equal_intercepts {
                common_alpha
            } else {
                uniform(rng, shape.alpha)
            };
            AffineDemand::new(alpha, uniform(rng, shape.beta))
        })
        .collect();

    let mut links = Vec::new();
    let mut parent: Vec<usize> = (0..m).collect();
    if m > 1 {
        for _ in 0..count(rng, shape.links) {
            let tail = rng.gen_range(0..m);
            let head = (tail + rng.gen_range(1..m)) % m;
            if shape.forest {
                let (a, b) = (find(&mut parent, tail), find(&mut parent, head));
                if a == b {
                    continue;
                }
                parent[a] = b;
            }
            // occasionally a zero-capacity link
            let capacity = if rng.gen_bool(0.1) {
                0.0
            } else {
                uniform(rng, shape.capacity)
            };
            links.push(Link {
                tail,
                head,
                capacity,
            });
        }
    }

    let access: Vec<Vec<bool>> = (0..n)
        .map(|_| {
            let mut row: Vec<bool> = (0..m).map(|_| rng.gen_bool(0.5)).collect();
            if !row.iter().any(|&a| a) {
                row[rng.gen_range(0..m)] = true;
            }
            row
        })
        .collect();

    let alpha_min = demands
        .iter()
        .map(|d| d.alpha)
        .fold(f64::INFINITY, f64::min);
    let costs = (0..n)
        .map(|_| {
            let gamma = DVector::from_fn(m, |_, _| rng.gen_range(0.0..0.5) * alpha_min);
            let theta = if rng.gen_bool(shape.dense_cost) {
                let f = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
                &f * f.transpose() * 0.5 + DMatrix::identity(m, m) * shape.min_theta
            } else {
                DMatrix::from_diagonal(&DVector::from_fn(m, |_, _| {
                    shape.min_theta + rng.gen_range(0.0..1.5)
                }))
            };
            QuadraticCost::new(theta, gamma)
        })
        .collect();

    let l = links.len();
    validate_game(GameData {
        network: MarketNetwork::new(m, &links, access),
        costs,
        demands,
        welfare: WelfareKind::Walrasian,
        labels: Some(Labels::numbered(n, m, l)),
    })
    .expect("random games are valid by construction")
}

/// Uniform production on the access support, each entry in `[0, scale]`.
pub fn random_production(rng: &mut impl Rng, game: &Game, scale: f64) -> ProductionProfile {
    let net = game.network();
    let x = DMatrix::from_fn(game.n_producers(), game.n_markets(), |i, j| {
        if net.has_access(i, j) {
            rng.gen_range(0.0..=scale)
        } else {
            0.0
        }
    });
    ProductionProfile::new(net, x).unwrap()
}

pub fn random_flow(rng: &mut impl Rng, game: &Game) -> FlowProfile {
    let net = game.network();
    let y = net
        .capacities()
        .iter()
        .map(|&c| rng.gen_range(0.0..=1.0) * c)
        .collect();
    FlowProfile::new(net, y).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
