//! Day-ahead market records in, game out.
//!
//! Bid files carry the seven auction columns `UNIT_REFERENCE_NO`,
//! `PURPOSE_CD`, `ZONE_CD`, `QUANTITY_NO`, `AWARDED_QUANTITY_NO`,
//! `ENERGY_PRICE_NO` and `AWARDED_PRICE_NO` in any order (other columns are
//! ignored). Transit-limit files carry `from_zone,to_zone,capacity_mwh`.
//!
//! Zonal demand is fitted by least squares on the merit-order curve of the
//! purchase bids. Producer costs follow from the cheapest offer and the
//! awarded point: `γ = s · min price` and `θ = (p̂ - γ) / (2 q̂)`, where the
//! truthfulness factor `s` is 0.99 unless disabled.

use std::collections::HashMap;
use std::io::Read;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{IngestError, MalformedRow};
use crate::model::{
    validate_game, AffineDemand, Game, GameData, Labels, Link, MarketNetwork, QuadraticCost,
    WelfareKind,
};

pub const BID_COLUMNS: [&str; 7] = [
    "UNIT_REFERENCE_NO",
    "PURPOSE_CD",
    "ZONE_CD",
    "QUANTITY_NO",
    "AWARDED_QUANTITY_NO",
    "ENERGY_PRICE_NO",
    "AWARDED_PRICE_NO",
];

pub const LIMIT_COLUMNS: [&str; 3] = ["from_zone", "to_zone", "capacity_mwh"];

/// Scaling applied to the cheapest offer price to obtain `γ`.
pub const GAMMA_SCALING: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Purpose {
    /// Sale offer.
    Offer,
    /// Purchase bid.
    Bid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BidRecord {
    pub unit_id: String,
    pub purpose: Purpose,
    pub zone: String,
    pub quantity_offered: f64,
    pub quantity_awarded: f64,
    pub price_offered: f64,
    pub price_awarded: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitLimit {
    pub from_zone: String,
    pub to_zone: String,
    pub capacity: f64,
}

fn column_indices(headers: &csv::StringRecord, names: &[&str]) -> Result<Vec<usize>, IngestError> {
    names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
        })
        .collect()
}

fn number(raw: &str, column: &str) -> Result<f64, String> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| format!("{column}: {raw:?} is not a number"))?;
    if !v.is_finite() {
        return Err(format!("{column}: {raw:?} is not finite"));
    }
    Ok(v)
}

fn quantity(raw: &str, column: &str) -> Result<f64, String> {
    let v = number(raw, column)?;
    if v < 0.0 {
        return Err(format!("{column}: negative quantity {v}"));
    }
    Ok(v)
}

fn parse_bid_row(row: &csv::StringRecord, idx: &[usize]) -> Result<BidRecord, String> {
    let field = |c: usize| row.get(idx[c]).unwrap_or("");
    let unit_id = field(0).trim().to_string();
    if unit_id.is_empty() {
        return Err("empty UNIT_REFERENCE_NO".into());
    }
    let purpose = match field(1).trim().to_ascii_uppercase().as_str() {
        "OFF" | "OFFER" => Purpose::Offer,
        "BID" => Purpose::Bid,
        other => return Err(format!("PURPOSE_CD: unknown value {other:?}")),
    };
    let zone = field(2).trim().to_string();
    if zone.is_empty() {
        return Err("empty ZONE_CD".into());
    }
    let quantity_offered = quantity(field(3), BID_COLUMNS[3])?;
    let quantity_awarded = quantity(field(4), BID_COLUMNS[4])?;
    if quantity_awarded > quantity_offered + 1e-6 * (1.0 + quantity_offered) {
        return Err(format!(
            "awarded quantity {quantity_awarded} exceeds offered {quantity_offered}"
        ));
    }
    Ok(BidRecord {
        unit_id,
        purpose,
        zone,
        quantity_offered,
        quantity_awarded,
        price_offered: number(field(5), BID_COLUMNS[5])?,
        price_awarded: number(field(6), BID_COLUMNS[6])?,
    })
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input)
}

fn line_of(row: &csv::StringRecord) -> u64 {
    row.position().map_or(0, |p| p.line())
}

/// Parses a bid file. All malformed rows are reported together.
pub fn parse_bids<R: Read>(input: R) -> Result<Vec<BidRecord>, IngestError> {
    let mut reader = csv_reader(input);
    let idx = column_indices(reader.headers()?, &BID_COLUMNS)?;
    let mut records = Vec::new();
    let mut bad = Vec::new();
    for row in reader.records() {
        let row = row?;
        match parse_bid_row(&row, &idx) {
            Ok(r) => records.push(r),
            Err(reason) => bad.push(MalformedRow {
                line: line_of(&row),
                reason,
            }),
        }
    }
    if !bad.is_empty() {
        return Err(IngestError::MalformedRows(bad));
    }
    Ok(records)
}

/// Parses a transit-limit file, rejecting repeated directions.
pub fn parse_transit_limits<R: Read>(input: R) -> Result<Vec<TransitLimit>, IngestError> {
    let mut reader = csv_reader(input);
    let idx = column_indices(reader.headers()?, &LIMIT_COLUMNS)?;
    let mut limits: Vec<TransitLimit> = Vec::new();
    let mut bad = Vec::new();
    for row in reader.records() {
        let row = row?;
        let field = |c: usize| row.get(idx[c]).unwrap_or("").trim().to_string();
        let (from_zone, to_zone) = (field(0), field(1));
        let parsed = if from_zone.is_empty() || to_zone.is_empty() {
            Err("empty zone".to_string())
        } else if from_zone == to_zone {
            Err(format!("limit from {from_zone} to itself"))
        } else if limits
            .iter()
            .any(|l| l.from_zone == from_zone && l.to_zone == to_zone)
        {
            Err(format!("repeated limit {from_zone} -> {to_zone}"))
        } else {
            quantity(&field(2), LIMIT_COLUMNS[2]).map(|capacity| TransitLimit {
                from_zone,
                to_zone,
                capacity,
            })
        };
        match parsed {
            Ok(l) => limits.push(l),
            Err(reason) => bad.push(MalformedRow {
                line: line_of(&row),
                reason,
            }),
        }
    }
    if !bad.is_empty() {
        return Err(IngestError::MalformedRows(bad));
    }
    Ok(limits)
}

/// Inclusive price range used to restrict the demand regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriceWindow {
    pub min: f64,
    pub max: f64,
}

impl PriceWindow {
    fn contains(&self, p: f64) -> bool {
        p >= self.min && p <= self.max
    }
}

/// Merit-order demand curve of a zone: purchase bids sorted by decreasing
/// price, as `(cumulative quantity, price)` points.
pub fn demand_curve(
    records: &[BidRecord],
    zone: &str,
    window: Option<PriceWindow>,
) -> Vec<(f64, f64)> {
    let mut bids: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.purpose == Purpose::Bid && r.zone == zone && r.quantity_offered > 0.0)
        .map(|r| (r.quantity_offered, r.price_offered))
        .collect();
    // stable sort keeps file order among equal prices
    bids.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut cumulative = 0.0;
    bids.into_iter()
        .filter_map(|(q, p)| {
            cumulative += q;
            window
                .is_none_or(|w| w.contains(p))
                .then_some((cumulative, p))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DemandFit {
    pub alpha: f64,
    pub beta: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Ordinary least squares of price on cumulative quantity.
pub fn estimate_demand(
    records: &[BidRecord],
    zone: &str,
    window: Option<PriceWindow>,
) -> Result<DemandFit, IngestError> {
    let points = demand_curve(records, zone, window);
    let n = points.len() as f64;
    let distinct = points.windows(2).any(|w| w[0].0 != w[1].0);
    if points.len() < 2 || !distinct {
        return Err(IngestError::InsufficientData(zone.to_string()));
    }
    let mq = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mp = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sqq, mut sqp, mut spp) = (0.0, 0.0, 0.0);
    for &(q, p) in &points {
        sqq += (q - mq) * (q - mq);
        sqp += (q - mq) * (p - mp);
        spp += (p - mp) * (p - mp);
    }
    let slope = sqp / sqq;
    if !(slope < 0.0) {
        return Err(IngestError::NonDecreasingCurve(zone.to_string()));
    }
    Ok(DemandFit {
        alpha: mp - slope * mq,
        beta: -slope,
        r_squared: if spp > 0.0 {
            sqp * sqp / (sqq * spp)
        } else {
            1.0
        },
        points: points.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostFit {
    pub gamma: f64,
    pub theta: f64,
    pub min_offer_price: f64,
    /// Quantity-weighted awarded price.
    pub p_hat: f64,
    /// Total awarded quantity.
    pub q_hat: f64,
}

/// Cost parameters of one unit from its sale offers. `gamma_scaling` is the
/// factor applied to the cheapest offer price (1.0 disables the scaling).
pub fn estimate_costs(
    records: &[BidRecord],
    unit: &str,
    gamma_scaling: f64,
) -> Result<CostFit, IngestError> {
    let offers: Vec<&BidRecord> = records
        .iter()
        .filter(|r| r.purpose == Purpose::Offer && r.unit_id == unit)
        .collect();
    let q_hat: f64 = offers.iter().map(|r| r.quantity_awarded).sum();
    if offers.is_empty() || !(q_hat > 0.0) {
        return Err(IngestError::NoAwardedQuantity(unit.to_string()));
    }
    let p_hat = offers
        .iter()
        .map(|r| r.quantity_awarded * r.price_awarded)
        .sum::<f64>()
        / q_hat;
    let min_offer_price = offers
        .iter()
        .map(|r| r.price_offered)
        .fold(f64::INFINITY, f64::min);
    let gamma = gamma_scaling * min_offer_price;
    let theta = (p_hat - gamma) / (2.0 * q_hat);
    if !(theta > 0.0) {
        return Err(IngestError::NonPositiveTheta(unit.to_string()));
    }
    Ok(CostFit {
        gamma,
        theta,
        min_offer_price,
        p_hat,
        q_hat,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BuildOptions {
    /// Apply [`GAMMA_SCALING`] to the cheapest offer price.
    pub gamma_scaling: bool,
    pub price_window: Option<PriceWindow>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            gamma_scaling: true,
            price_window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoneEstimate {
    pub zone: String,
    pub demand: DemandFit,
    pub producers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitEstimate {
    pub unit: String,
    pub zone: String,
    pub cost: CostFit,
}

/// Audit trail of every estimated parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatedParams {
    pub options: BuildOptions,
    pub zones: Vec<ZoneEstimate>,
    pub units: Vec<UnitEstimate>,
    /// Transit limits whose endpoints had no trading and were dropped.
    pub dropped_limits: Vec<String>,
}

/// Markets are the zones with positive offered or bid quantity, in order of
/// first appearance; producers are the units with positive offered quantity,
/// each selling only in its own zone. Every transit limit becomes a link with
/// id `FROM->TO`; a direction listed without its reverse is mirrored with the
/// same capacity.
pub fn build_game(
    records: &[BidRecord],
    limits: &[TransitLimit],
    options: &BuildOptions,
) -> Result<(Game, EstimatedParams), IngestError> {
    if records.is_empty() {
        return Err(IngestError::Empty);
    }
    let mut seen_zones: Vec<&str> = Vec::new();
    let mut zones: Vec<&str> = Vec::new();
    let mut units: Vec<(&str, &str)> = Vec::new();
    let mut unit_index: HashMap<&str, usize> = HashMap::new();
    for r in records {
        if !seen_zones.contains(&r.zone.as_str()) {
            seen_zones.push(&r.zone);
        }
        if r.quantity_offered > 0.0 && !zones.contains(&r.zone.as_str()) {
            zones.push(&r.zone);
        }
        if r.purpose == Purpose::Offer && r.quantity_offered > 0.0 {
            match unit_index.get(r.unit_id.as_str()) {
                Some(&u) if units[u].1 != r.zone => {
                    return Err(IngestError::MalformedRows(vec![MalformedRow {
                        line: 0,
                        reason: format!(
                            "unit {} offers in zones {} and {}",
                            r.unit_id, units[u].1, r.zone
                        ),
                    }]))
                }
                Some(_) => {}
                None => {
                    unit_index.insert(&r.unit_id, units.len());
                    units.push((&r.unit_id, &r.zone));
                }
            }
        }
    }
    let zone_index: HashMap<&str, usize> = zones.iter().enumerate().map(|(j, &z)| (z, j)).collect();
    let m = zones.len();

    let scaling = if options.gamma_scaling {
        GAMMA_SCALING
    } else {
        1.0
    };
    let demand_fits = zones
        .par_iter()
        .map(|&z| estimate_demand(records, z, options.price_window))
        .collect::<Result<Vec<_>, _>>()?;
    let cost_fits = units
        .par_iter()
        .map(|&(u, _)| estimate_costs(records, u, scaling))
        .collect::<Result<Vec<_>, _>>()?;

    let mut links = Vec::new();
    let mut link_ids = Vec::new();
    let mut dropped_limits = Vec::new();
    let mut push_link = |from: &str, to: &str, capacity: f64| -> Result<(), IngestError> {
        let id = format!("{from}->{to}");
        match (zone_index.get(from), zone_index.get(to)) {
            (Some(&tail), Some(&head)) => {
                links.push(Link {
                    tail,
                    head,
                    capacity,
                });
                link_ids.push(id);
            }
            _ => {
                for zone in [from, to] {
                    if !seen_zones.contains(&zone) {
                        return Err(IngestError::UnknownZone(zone.to_string()));
                    }
                }
                dropped_limits.push(id);
            }
        }
        Ok(())
    };
    for l in limits {
        push_link(&l.from_zone, &l.to_zone, l.capacity)?;
        let mirrored = !limits
            .iter()
            .any(|o| o.from_zone == l.to_zone && o.to_zone == l.from_zone);
        if mirrored {
            push_link(&l.to_zone, &l.from_zone, l.capacity)?;
        }
    }

    let mut access = vec![vec![false; m]; units.len()];
    let mut costs = Vec::with_capacity(units.len());
    let mut producers_per_zone = vec![0; m];
    for (i, (&(_, zone), fit)) in units.iter().zip(&cost_fits).enumerate() {
        let j = zone_index[zone];
        access[i][j] = true;
        producers_per_zone[j] += 1;
        let mut theta = DMatrix::zeros(m, m);
        theta[(j, j)] = fit.theta;
        let mut gamma = DVector::zeros(m);
        gamma[j] = fit.gamma;
        costs.push(QuadraticCost::new(theta, gamma));
    }

    let data = GameData {
        network: MarketNetwork::new(m, &links, access),
        costs,
        demands: demand_fits
            .iter()
            .map(|d| AffineDemand::new(d.alpha, d.beta))
            .collect(),
        welfare: WelfareKind::Walrasian,
        labels: Some(Labels {
            markets: zones.iter().map(|z| z.to_string()).collect(),
            producers: units.iter().map(|u| u.0.to_string()).collect(),
            links: link_ids,
        }),
    };
    let game = validate_game(data)?;
    let audit = EstimatedParams {
        options: *options,
        zones: zones
            .iter()
            .zip(&demand_fits)
            .zip(&producers_per_zone)
            .map(|((z, d), &n)| ZoneEstimate {
                zone: z.to_string(),
                demand: *d,
                producers: n,
            })
            .collect(),
        units: units
            .iter()
            .zip(&cost_fits)
            .map(|(&(u, z), c)| UnitEstimate {
                unit: u.to_string(),
                zone: z.to_string(),
                cost: *c,
            })
            .collect(),
        dropped_limits,
    };
    Ok((game, audit))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "PURPOSE_CD,UNIT_REFERENCE_NO,ZONE_CD,QUANTITY_NO,AWARDED_QUANTITY_NO,ENERGY_PRICE_NO,AWARDED_PRICE_NO";

    fn bids(rows: &[&str]) -> Result<Vec<BidRecord>, IngestError> {
        let text = std::iter::once(HEADER)
            .chain(rows.iter().copied())
            .collect::<Vec<_>>()
            .join("\n");
        parse_bids(text.as_bytes())
    }

    fn record(
        unit: &str,
        purpose: Purpose,
        zone: &str,
        q: f64,
        qa: f64,
        p: f64,
        pa: f64,
    ) -> BidRecord {
        BidRecord {
            unit_id: unit.into(),
            purpose,
            zone: zone.into(),
            quantity_offered: q,
            quantity_awarded: qa,
            price_offered: p,
            price_awarded: pa,
        }
    }

    #[test]
    fn three_rows_in_any_column_order() {
        let r = bids(&[
            "OFF,U1,NORD,10,5,80,120",
            "BID,C1,NORD,20,20,3000,120",
            "bid,C2,SUD,7.5,0,10,0",
        ])
        .unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r[0].purpose, Purpose::Offer);
        assert_eq!(r[1].purpose, Purpose::Bid);
        assert_eq!(r[2].purpose, Purpose::Bid);
        assert_eq!(r[2].quantity_offered, 7.5);
        assert_eq!(r[0].price_awarded, 120.0);
    }

    #[test]
    fn malformed_rows_are_collected_with_line_numbers() {
        let err = bids(&[
            "OFF,U1,NORD,10,5,80,120",
            "OFF,U2,NORD,-1,0,80,120",
            "XYZ,U3,NORD,1,0,80,120",
            "OFF,U4,NORD,1,2,80,120",
        ])
        .unwrap_err();
        let IngestError::MalformedRows(rows) = err else {
            panic!("{err}")
        };
        assert_eq!(
            rows.iter().map(|r| r.line).collect::<Vec<_>>(),
            vec![3, 4, 5]
        );
        assert!(rows[0].reason.contains("negative"));
    }

    #[test]
    fn missing_column() {
        let text = "UNIT_REFERENCE_NO,ZONE_CD,QUANTITY_NO,AWARDED_QUANTITY_NO,ENERGY_PRICE_NO,AWARDED_PRICE_NO\n";
        assert!(matches!(
            parse_bids(text.as_bytes()),
            Err(IngestError::MissingColumn(c)) if c == "PURPOSE_CD"
        ));
    }

    #[test]
    fn extra_columns_are_ignored() {
        let text = format!("INTERVAL_NO,{HEADER}\n20,OFF,U1,NORD,10,5,80,120\n");
        assert_eq!(parse_bids(text.as_bytes()).unwrap().len(), 1);
    }

    #[test]
    fn two_point_demand_fit() {
        let r = vec![
            record("C2", Purpose::Bid, "Z", 10.0, 0.0, 80.0, 0.0),
            record("C1", Purpose::Bid, "Z", 10.0, 0.0, 100.0, 0.0),
        ];
        assert_eq!(
            demand_curve(&r, "Z", None),
            vec![(10.0, 100.0), (20.0, 80.0)]
        );
        let fit = estimate_demand(&r, "Z", None).unwrap();
        assert!((fit.alpha - 120.0).abs() < 1e-12);
        assert!((fit.beta - 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_or_thin_demand_is_rejected() {
        let flat = vec![
            record("C1", Purpose::Bid, "Z", 10.0, 0.0, 50.0, 0.0),
            record("C2", Purpose::Bid, "Z", 10.0, 0.0, 50.0, 0.0),
        ];
        assert!(matches!(
            estimate_demand(&flat, "Z", None),
            Err(IngestError::NonDecreasingCurve(_))
        ));
        assert!(matches!(
            estimate_demand(&flat[..1], "Z", None),
            Err(IngestError::InsufficientData(_))
        ));
    }

    #[test]
    fn price_window_restricts_points() {
        let r: Vec<BidRecord> = [300.0, 200.0, 100.0, 50.0]
            .iter()
            .map(|&p| record("C", Purpose::Bid, "Z", 1.0, 0.0, p, 0.0))
            .collect();
        let w = PriceWindow {
            min: 60.0,
            max: 250.0,
        };
        assert_eq!(
            demand_curve(&r, "Z", Some(w)),
            vec![(2.0, 200.0), (3.0, 100.0)]
        );
    }

    #[test]
    fn cost_formula() {
        let r = vec![record("U", Purpose::Offer, "Z", 20.0, 10.0, 100.0, 150.0)];
        let fit = estimate_costs(&r, "U", GAMMA_SCALING).unwrap();
        assert!((fit.gamma - 99.0).abs() < 1e-12);
        assert!((fit.theta - 2.55).abs() < 1e-12);
        let raw = estimate_costs(&r, "U", 1.0).unwrap();
        assert_eq!(raw.gamma, 100.0);
        assert!((raw.theta - 2.5).abs() < 1e-12);
    }

    #[test]
    fn multi_offer_units_are_aggregated() {
        let r = vec![
            record("U", Purpose::Offer, "Z", 5.0, 5.0, 40.0, 100.0),
            record("U", Purpose::Offer, "Z", 10.0, 5.0, 90.0, 120.0),
            record("U", Purpose::Offer, "Z", 10.0, 0.0, 200.0, 0.0),
        ];
        let fit = estimate_costs(&r, "U", 1.0).unwrap();
        assert_eq!(fit.min_offer_price, 40.0);
        assert_eq!(fit.q_hat, 10.0);
        assert_eq!(fit.p_hat, 110.0);
        assert!((fit.theta - (110.0 - 40.0) / 20.0).abs() < 1e-12);
    }

    #[test]
    fn cost_boundaries() {
        let none = vec![record("U", Purpose::Offer, "Z", 20.0, 0.0, 100.0, 0.0)];
        assert!(matches!(
            estimate_costs(&none, "U", GAMMA_SCALING),
            Err(IngestError::NoAwardedQuantity(_))
        ));
        let at_cost = vec![record("U", Purpose::Offer, "Z", 20.0, 10.0, 100.0, 100.0)];
        assert!(matches!(
            estimate_costs(&at_cost, "U", 1.0),
            Err(IngestError::NonPositiveTheta(_))
        ));
        // the scaling leaves a small positive margin
        let fit = estimate_costs(&at_cost, "U", GAMMA_SCALING).unwrap();
        assert!((fit.theta - 0.05).abs() < 1e-12);
        // a large awarded quantity near cost gives a nearly flat marginal cost
        let big = vec![record("U", Purpose::Offer, "Z", 1e4, 1e4, 100.0, 100.5)];
        assert!(estimate_costs(&big, "U", GAMMA_SCALING).unwrap().theta < 1e-4);
    }

    #[test]
    fn limits_parse_and_mirror() {
        let text = "from_zone,to_zone,capacity_mwh\nA,B,100\nB,A,250\nB,C,10\n";
        let limits = parse_transit_limits(text.as_bytes()).unwrap();
        assert_eq!(limits.len(), 3);
        let dup = "from_zone,to_zone,capacity_mwh\nA,B,100\nA,B,5\nA,A,1\n";
        let Err(IngestError::MalformedRows(rows)) = parse_transit_limits(dup.as_bytes()) else {
            panic!()
        };
        assert_eq!(rows.len(), 2);

        let r = vec![
            record("U", Purpose::Offer, "A", 10.0, 5.0, 10.0, 30.0),
            record("C1", Purpose::Bid, "A", 10.0, 0.0, 50.0, 0.0),
            record("C2", Purpose::Bid, "A", 10.0, 0.0, 40.0, 0.0),
            record("C3", Purpose::Bid, "B", 10.0, 0.0, 50.0, 0.0),
            record("C4", Purpose::Bid, "B", 10.0, 0.0, 30.0, 0.0),
            record("C5", Purpose::Bid, "C", 10.0, 0.0, 70.0, 0.0),
            record("C6", Purpose::Bid, "C", 10.0, 0.0, 30.0, 0.0),
        ];
        let (game, audit) = build_game(&r, &limits, &BuildOptions::default()).unwrap();
        assert_eq!(game.n_markets(), 3);
        assert_eq!(game.n_links(), 4);
        assert_eq!(game.labels().links, vec!["A->B", "B->A", "B->C", "C->B"]);
        assert_eq!(game.network().capacity(1), 250.0);
        assert_eq!(game.network().capacity(3), 10.0);
        assert_eq!(game.n_producers(), 1);
        assert_eq!(audit.zones[1].producers, 0);

        let (game, _) = build_game(&r, &[], &BuildOptions::default()).unwrap();
        assert_eq!(game.n_links(), 0);

        let unknown = vec![TransitLimit {
            from_zone: "A".into(),
            to_zone: "X".into(),
            capacity: 1.0,
        }];
        assert!(matches!(
            build_game(&r, &unknown, &BuildOptions::default()),
            Err(IngestError::UnknownZone(z)) if z == "X"
        ));
    }

    #[test]
    fn empty_input() {
        assert!(matches!(
            build_game(&[], &[], &BuildOptions::default()),
            Err(IngestError::Empty)
        ));
    }
}
