//! Structural analysis of a solved game: which links are saturated and why,
//! which markets share a price, which price-threshold cuts separate them, and
//! whether any market ends up with negative consumption.
//!
//! At a market maker best response a link from a cheaper market to a dearer
//! one is full and a link the other way is empty. Consequently, for a set `U`
//! of markets whose prices are all below the prices outside it, every link
//! leaving `U` is at capacity and every link entering `U` carries nothing:
//! goods move from low-price to high-price markets.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::AnalysisError;
use crate::model::{Game, Outcome};

/// Tolerances used to compare prices and flows. Both are absolute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub eps_price: f64,
    pub eps_flow: f64,
}

impl Tolerances {
    /// Absolute price tolerance used for estimated games, whose prices are
    /// only meaningful to about one currency unit.
    pub const DATA_SCALE_PRICE: f64 = 0.5;

    /// `1e-6` relative to the largest price and the largest capacity.
    pub fn relative(game: &Game, outcome: &Outcome) -> Self {
        let pmax = outcome.prices.iter().fold(0.0f64, |a, p| a.max(p.abs()));
        let cmax = game
            .network()
            .capacities()
            .iter()
            .fold(0.0f64, |a, &c| a.max(c));
        Self {
            eps_price: 1e-6 * (1.0 + pmax),
            eps_flow: 1e-6 * (1.0 + cmax),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LinkClass {
    /// Head is dearer and the link is at capacity.
    SaturatedForward,
    /// Tail is dearer and the link carries nothing.
    Empty,
    /// Endpoint prices agree within tolerance.
    Interior,
    /// A price gap with a flow that is not at the corresponding bound.
    ViolatesSaturationRule,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkStatus {
    pub link: usize,
    pub price_tail: f64,
    pub price_head: f64,
    pub flow: f64,
    pub capacity: f64,
    pub classification: LinkClass,
}

/// Classifies every link by the price gap across it and its flow.
pub fn saturation_report(game: &Game, outcome: &Outcome, tol: Tolerances) -> Vec<LinkStatus> {
    let network = game.network();
    (0..network.n_links())
        .map(|k| {
            let price_tail = outcome.prices[network.tail(k)];
            let price_head = outcome.prices[network.head(k)];
            let flow = outcome.y.get(k);
            let capacity = network.capacity(k);
            let classification = if price_tail < price_head - tol.eps_price {
                if flow >= capacity - tol.eps_flow {
                    LinkClass::SaturatedForward
                } else {
                    LinkClass::ViolatesSaturationRule
                }
            } else if price_tail > price_head + tol.eps_price {
                if flow <= tol.eps_flow {
                    LinkClass::Empty
                } else {
                    LinkClass::ViolatesSaturationRule
                }
            } else {
                LinkClass::Interior
            };
            LinkStatus {
                link: k,
                price_tail,
                price_head,
                flow,
                capacity,
                classification,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceGroup {
    /// Market indices in increasing order.
    pub markets: Vec<usize>,
    /// Mean price of the members.
    pub group_price: f64,
}

fn find(parent: &mut [usize], mut a: usize) -> usize {
    while parent[a] != a {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    a
}

/// Connected components of the markets under links whose endpoint prices
/// differ by at most `eps_price`, sorted by group price (ties by first market).
pub fn price_groups(game: &Game, outcome: &Outcome, eps_price: f64) -> Vec<PriceGroup> {
    let network = game.network();
    let m = network.n_markets();
    let mut parent: Vec<usize> = (0..m).collect();
    for k in 0..network.n_links() {
        let (t, h) = (network.tail(k), network.head(k));
        if (outcome.prices[t] - outcome.prices[h]).abs() <= eps_price {
            let (a, b) = (find(&mut parent, t), find(&mut parent, h));
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); m];
    for j in 0..m {
        let r = find(&mut parent, j);
        members[r].push(j);
    }
    let mut groups: Vec<PriceGroup> = members
        .into_iter()
        .filter(|g| !g.is_empty())
        .map(|markets| {
            let group_price =
                markets.iter().map(|&j| outcome.prices[j]).sum::<f64>() / markets.len() as f64;
            PriceGroup {
                markets,
                group_price,
            }
        })
        .collect();
    groups.sort_by(|a, b| {
        a.group_price
            .total_cmp(&b.group_price)
            .then(a.markets[0].cmp(&b.markets[0]))
    });
    groups
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutReport {
    /// The low-price side, sorted.
    pub cut_set: Vec<usize>,
    /// Links entering the cut set (tail outside, head inside).
    pub in_boundary: Vec<usize>,
    /// Links leaving the cut set (tail inside, head outside).
    pub out_boundary: Vec<usize>,
    /// Highest price inside and lowest price outside the cut set.
    pub max_price_inside: f64,
    pub min_price_outside: f64,
    /// Flow on leaving links minus flow on entering links.
    pub net_outflow: f64,
    /// Every leaving link is full and every entering link is empty.
    pub saturated: bool,
}

/// Threshold cuts over the price-sorted groups: every set of the cheapest
/// groups whose prices all lie more than `eps_price` below every other price.
pub fn critical_cuts(game: &Game, outcome: &Outcome, tol: Tolerances) -> Vec<CutReport> {
    let network = game.network();
    let m = network.n_markets();
    let groups = price_groups(game, outcome, tol.eps_price);
    let mut inside = vec![false; m];
    let mut cuts = Vec::new();
    for t in 1..groups.len() {
        for &j in &groups[t - 1].markets {
            inside[j] = true;
        }
        let max_price_inside = (0..m)
            .filter(|&j| inside[j])
            .map(|j| outcome.prices[j])
            .fold(f64::NEG_INFINITY, f64::max);
        let min_price_outside = (0..m)
            .filter(|&j| !inside[j])
            .map(|j| outcome.prices[j])
            .fold(f64::INFINITY, f64::min);
        if max_price_inside >= min_price_outside - tol.eps_price {
            continue;
        }
        let mut in_boundary = Vec::new();
        let mut out_boundary = Vec::new();
        for k in 0..network.n_links() {
            match (inside[network.tail(k)], inside[network.head(k)]) {
                (true, false) => out_boundary.push(k),
                (false, true) => in_boundary.push(k),
                _ => {}
            }
        }
        let full = out_boundary
            .iter()
            .all(|&k| outcome.y.get(k) >= network.capacity(k) - tol.eps_flow);
        let idle = in_boundary
            .iter()
            .all(|&k| outcome.y.get(k) <= tol.eps_flow);
        let net_outflow = out_boundary.iter().map(|&k| outcome.y.get(k)).sum::<f64>()
            - in_boundary.iter().map(|&k| outcome.y.get(k)).sum::<f64>();
        cuts.push(CutReport {
            cut_set: (0..m).filter(|&j| inside[j]).collect(),
            in_boundary,
            out_boundary,
            max_price_inside,
            min_price_outside,
            net_outflow,
            saturated: full && idle,
        });
    }
    cuts
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemandSignReport {
    pub min_z: f64,
    /// Markets with `z_j < -tol`.
    pub negative_markets: Vec<usize>,
    /// All demand intercepts are equal, which excludes negative consumption
    /// at a market maker best response.
    pub equal_intercepts: bool,
}

/// Reports negative consumption. When all intercepts are equal a negative
/// entry is impossible at a best response, so it is returned as an error.
pub fn demand_sign_check(
    game: &Game,
    outcome: &Outcome,
    tol: f64,
) -> Result<DemandSignReport, AnalysisError> {
    let (argmin, min_z) =
        outcome
            .z
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |best, (j, v)| if v < best.1 { (j, v) } else { best },
            );
    let negative_markets: Vec<usize> = (0..outcome.z.len())
        .filter(|&j| outcome.z[j] < -tol)
        .collect();
    let equal_intercepts = game.has_equal_intercepts();
    if equal_intercepts && !negative_markets.is_empty() {
        return Err(AnalysisError::NegativeConsumption {
            min_z,
            market: argmin,
        });
    }
    Ok(DemandSignReport {
        min_z,
        negative_markets,
        equal_intercepts,
    })
}

/// Everything the analysis produces for one outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub tolerances: Tolerances,
    pub links: Vec<LinkStatus>,
    pub groups: Vec<PriceGroup>,
    pub cuts: Vec<CutReport>,
    pub demand_sign: DemandSignReport,
    pub saturation_violations: usize,
}

pub fn analyze(
    game: &Game,
    outcome: &Outcome,
    tol: Tolerances,
) -> Result<AnalysisReport, AnalysisError> {
    let links = saturation_report(game, outcome, tol);
    let saturation_violations = links
        .iter()
        .filter(|s| s.classification == LinkClass::ViolatesSaturationRule)
        .count();
    Ok(AnalysisReport {
        tolerances: tol,
        groups: price_groups(game, outcome, tol.eps_price),
        cuts: critical_cuts(game, outcome, tol),
        demand_sign: demand_sign_check(game, outcome, tol.eps_flow)?,
        links,
        saturation_violations,
    })
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graph description in DOT syntax: markets labelled with their price, links
/// with `flow/capacity`, saturated links on a critical cut drawn dashed.
pub fn to_dot(game: &Game, outcome: &Outcome, cuts: &[CutReport]) -> String {
    let network = game.network();
    let labels = game.labels();
    let mut on_cut = vec![false; network.n_links()];
    for cut in cuts {
        for &k in &cut.out_boundary {
            on_cut[k] = true;
        }
    }
    let mut out = String::from("digraph equilibrium {\n  rankdir=LR;\n");
    for j in 0..network.n_markets() {
        let _ = writeln!(
            out,
            "  m{j} [label=\"{}\\np = {:.2}\"];",
            dot_escape(&labels.markets[j]),
            outcome.prices[j]
        );
    }
    for k in 0..network.n_links() {
        let flow = outcome.y.get(k);
        let capacity = network.capacity(k);
        let style = if on_cut[k] && capacity - flow <= 1e-6 * (1.0 + capacity) {
            ", style=dashed"
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "  m{} -> m{} [label=\"{:.2}/{:.2}\"{style}];",
            network.tail(k),
            network.head(k),
            flow,
            capacity
        );
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, TwoMarketCost};
    use crate::solver::{solve_equilibrium, SolveOptions};

    fn solved(game: &Game) -> Outcome {
        solve_equilibrium(game, &SolveOptions::default()).unwrap()
    }

    #[test]
    fn four_market_structure() {
        let game = fixtures::four_market();
        let o = solved(&game);
        let tol = Tolerances::relative(&game, &o);
        let links = saturation_report(&game, &o, tol);
        assert_eq!(links[6].classification, LinkClass::SaturatedForward);
        assert_eq!(links[5].classification, LinkClass::Empty);
        assert!(links
            .iter()
            .all(|s| s.classification != LinkClass::ViolatesSaturationRule));

        let groups = price_groups(&game, &o, tol.eps_price);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].markets, vec![0, 1, 2]);
        assert_eq!(groups[1].markets, vec![3]);

        let cuts = critical_cuts(&game, &o, tol);
        assert_eq!(cuts.len(), 1);
        assert_eq!(cuts[0].out_boundary, vec![6]);
        assert_eq!(cuts[0].in_boundary, vec![0, 5]);
        assert!(cuts[0].saturated);
        assert!(cuts[0].net_outflow > 0.0);
    }

    #[test]
    fn equal_prices_make_interior_links() {
        let game = fixtures::two_market(1.0, TwoMarketCost::Coupled);
        let o = solved(&game);
        let tol = Tolerances::relative(&game, &o);
        let links = saturation_report(&game, &o, tol);
        assert!(links
            .iter()
            .all(|s| s.classification == LinkClass::Interior));
        assert_eq!(price_groups(&game, &o, tol.eps_price).len(), 1);
        assert!(critical_cuts(&game, &o, tol).is_empty());
    }

    #[test]
    fn congested_two_market_gap() {
        let chi = 0.2;
        let game = fixtures::two_market(chi, TwoMarketCost::Coupled);
        let o = solved(&game);
        let tol = Tolerances::relative(&game, &o);
        let groups = price_groups(&game, &o, tol.eps_price);
        assert_eq!(groups.len(), 2);
        let gap = groups[1].group_price - groups[0].group_price;
        assert!((gap - (0.5 - 1.5 * chi)).abs() < 1e-7);
    }

    #[test]
    fn negative_consumption_is_flagged_but_allowed_with_distinct_intercepts() {
        let game = fixtures::two_market(1.0, TwoMarketCost::Coupled);
        let o = solved(&game);
        let r = demand_sign_check(&game, &o, 1e-9).unwrap();
        assert_eq!(r.negative_markets, vec![0]);
        assert!(!r.equal_intercepts);
        assert!((r.min_z + 1.0 / 15.0).abs() < 1e-7);
    }

    #[test]
    fn negative_consumption_with_equal_intercepts_is_an_error() {
        let game = fixtures::two_market_equal_intercepts(1.0);
        let mut o = solved(&game);
        assert!(demand_sign_check(&game, &o, 1e-9)
            .unwrap()
            .negative_markets
            .is_empty());
        o.z[1] = -0.1;
        assert!(matches!(
            demand_sign_check(&game, &o, 1e-9),
            Err(AnalysisError::NegativeConsumption { market: 1, .. })
        ));
    }

    #[test]
    fn dot_marks_the_bottleneck() {
        let game = fixtures::four_market();
        let o = solved(&game);
        let tol = Tolerances::relative(&game, &o);
        let dot = to_dot(&game, &o, &critical_cuts(&game, &o, tol));
        assert!(dot.starts_with("digraph"));
        assert!(dot.contains("m2 -> m3 [label=\"2.00/2.00\", style=dashed]"));
        assert_eq!(dot.matches("dashed").count(), 1);
        assert!(dot.contains("p = 8.00"));
    }
}
