//! Game and outcome files (JSON).
//!
//! Ids are strings; engine indices follow file order. Every numeric value a
//! writer emits is rounded to nine significant digits so that files are
//! stable across platforms and diff cleanly.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ModelError;
use crate::model::{
    validate_game, AffineDemand, FlowProfile, Game, GameData, Labels, Link, MarketNetwork, Outcome,
    ProductionProfile, QuadraticCost, SolverStats, WelfareKind,
};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("cannot read {path}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot write {path}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed file: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("unknown {kind} id {id:?}")]
    UnknownId { kind: &'static str, id: String },
    #[error("{what}: expected length {expected}, got {got}")]
    Length {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("outcome does not belong to this game: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Rounds to nine significant digits.
pub fn sig9(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.8e}").parse().unwrap_or(v)
}

fn sig9_all(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| sig9(x)).collect()
}

/// Provenance embedded in every file the command-line tool writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    #[serde(default)]
    pub options: BTreeMap<String, String>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub version: String,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(
        command: &str,
        inputs: Vec<String>,
        options: BTreeMap<String, String>,
        seed: Option<u64>,
    ) -> Self {
        Self {
            command: command.to_string(),
            inputs,
            options,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketEntry {
    pub id: String,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaEntry {
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProducerEntry {
    pub id: String,
    pub gamma: Vec<f64>,
    pub theta: ThetaEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkEntry {
    pub id: String,
    pub tail: String,
    pub head: String,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
    pub markets: Vec<MarketEntry>,
    pub producers: Vec<ProducerEntry>,
    pub access: Vec<(String, String)>,
    pub links: Vec<LinkEntry>,
}

fn index_ids<'a>(
    kind: &'static str,
    ids: impl Iterator<Item = &'a String>,
) -> Result<HashMap<&'a str, usize>, FormatError> {
    let mut map = HashMap::new();
    for (k, id) in ids.enumerate() {
        if map.insert(id.as_str(), k).is_some() {
            return Err(FormatError::DuplicateId {
                kind,
                id: id.clone(),
            });
        }
    }
    Ok(map)
}

fn lookup(map: &HashMap<&str, usize>, kind: &'static str, id: &str) -> Result<usize, FormatError> {
    map.get(id).copied().ok_or_else(|| FormatError::UnknownId {
        kind,
        id: id.to_string(),
    })
}

fn check_len(what: impl Into<String>, expected: usize, got: usize) -> Result<(), FormatError> {
    if expected != got {
        return Err(FormatError::Length {
            what: what.into(),
            expected,
            got,
        });
    }
    Ok(())
}

impl GameFile {
    pub fn to_data(&self) -> Result<GameData, FormatError> {
        let m = self.markets.len();
        let markets = index_ids("market", self.markets.iter().map(|e| &e.id))?;
        let producers = index_ids("producer", self.producers.iter().map(|e| &e.id))?;
        index_ids("link", self.links.iter().map(|e| &e.id))?;

        let mut access = vec![vec![false; m]; self.producers.len()];
        for (p, mk) in &self.access {
            let i = lookup(&producers, "producer", p)?;
            let j = lookup(&markets, "market", mk)?;
            access[i][j] = true;
        }
        let links = self
            .links
            .iter()
            .map(|e| {
                Ok(Link {
                    tail: lookup(&markets, "market", &e.tail)?,
                    head: lookup(&markets, "market", &e.head)?,
                    capacity: e.capacity,
                })
            })
            .collect::<Result<Vec<_>, FormatError>>()?;
        let costs = self
            .producers
            .iter()
            .map(|e| {
                check_len(format!("producer {} gamma", e.id), m, e.gamma.len())?;
                let theta = match &e.theta {
                    ThetaEntry::Diagonal(d) => {
                        check_len(format!("producer {} theta", e.id), m, d.len())?;
                        DMatrix::from_diagonal(&DVector::from_column_slice(d))
                    }
                    ThetaEntry::Full(rows) => {
                        check_len(format!("producer {} theta rows", e.id), m, rows.len())?;
                        for r in rows {
                            check_len(format!("producer {} theta row", e.id), m, r.len())?;
                        }
                        DMatrix::from_fn(m, m, |a, b| rows[a][b])
                    }
                };
                Ok(QuadraticCost::new(
                    theta,
                    DVector::from_column_slice(&e.gamma),
                ))
            })
            .collect::<Result<Vec<_>, FormatError>>()?;
        Ok(GameData {
            network: MarketNetwork::new(m, &links, access),
            costs,
            demands: self
                .markets
                .iter()
                .map(|e| AffineDemand::new(e.alpha, e.beta))
                .collect(),
            welfare: WelfareKind::Walrasian,
            labels: Some(Labels {
                markets: self.markets.iter().map(|e| e.id.clone()).collect(),
                producers: self.producers.iter().map(|e| e.id.clone()).collect(),
                links: self.links.iter().map(|e| e.id.clone()).collect(),
            }),
        })
    }

    pub fn to_game(&self) -> Result<Game, FormatError> {
        Ok(validate_game(self.to_data()?)?)
    }

    /// Serializable form of a game; diagonal cost matrices are written as
    /// diagonals.
    pub fn from_game(game: &Game, manifest: Option<RunManifest>) -> Self {
        let labels = game.labels();
        let network = game.network();
        let markets = (0..game.n_markets())
            .map(|j| MarketEntry {
                id: labels.markets[j].clone(),
                alpha: sig9(game.demand(j).alpha),
                beta: sig9(game.demand(j).beta),
            })
            .collect();
        let producers = (0..game.n_producers())
            .map(|i| {
                let cost = game.cost(i);
                let theta = if cost.is_diagonal() {
                    ThetaEntry::Diagonal(sig9_all(cost.theta.diagonal().as_slice()))
                } else {
                    ThetaEntry::Full(
                        cost.theta
                            .row_iter()
                            .map(|r| r.iter().map(|&v| sig9(v)).collect())
                            .collect(),
                    )
                };
                ProducerEntry {
                    id: labels.producers[i].clone(),
                    gamma: sig9_all(cost.gamma.as_slice()),
                    theta,
                }
            })
            .collect();
        let access = (0..game.n_producers())
            .flat_map(|i| {
                network
                    .access_set(i)
                    .iter()
                    .map(move |&j| (labels.producers[i].clone(), labels.markets[j].clone()))
            })
            .collect();
        let links = network
            .links()
            .enumerate()
            .map(|(k, l)| LinkEntry {
                id: labels.links[k].clone(),
                tail: labels.markets[l.tail].clone(),
                head: labels.markets[l.head].clone(),
                capacity: sig9(l.capacity),
            })
            .collect();
        Self {
            manifest,
            markets,
            producers,
            access,
            links,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsEntry {
    pub iterations: usize,
    /// Absent for outcomes that do not come from a gradient method.
    pub pg_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RestartEntry {
    pub runs: usize,
    pub max_x_deviation: f64,
    pub max_flow_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
    pub markets: Vec<String>,
    pub producers: Vec<String>,
    pub links: Vec<String>,
    /// Production, one row per producer.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub prices: Vec<f64>,
    pub net_inflow: Vec<f64>,
    pub potential: f64,
    pub producer_utilities: Vec<f64>,
    pub welfare: f64,
    pub stats: StatsEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<RestartEntry>,
}

impl OutcomeFile {
    pub fn from_outcome(game: &Game, outcome: &Outcome, manifest: Option<RunManifest>) -> Self {
        let labels = game.labels();
        Self {
            manifest,
            markets: labels.markets.clone(),
            producers: labels.producers.clone(),
            links: labels.links.clone(),
            x: (0..game.n_producers())
                .map(|i| sig9_all(&outcome.x.row(i)))
                .collect(),
            // rounding must not push a flow past its capacity
            y: outcome
                .y
                .as_slice()
                .iter()
                .zip(game.network().capacities())
                .map(|(&v, &c)| sig9(v).clamp(0.0, c))
                .collect(),
            z: sig9_all(&outcome.z),
            prices: sig9_all(&outcome.prices),
            net_inflow: sig9_all(&outcome.net_inflow(game.network())),
            potential: sig9(outcome.potential_value),
            producer_utilities: sig9_all(&outcome.producer_utilities),
            welfare: sig9(outcome.welfare_value),
            stats: StatsEntry {
                iterations: outcome.stats.iterations,
                pg_norm: outcome
                    .stats
                    .pg_norm
                    .is_finite()
                    .then(|| sig9(outcome.stats.pg_norm)),
            },
            restarts: None,
        }
    }

    /// Rebuilds the outcome against `game`; derived quantities are recomputed
    /// from `x` and `y`.
    pub fn to_outcome(&self, game: &Game) -> Result<Outcome, FormatError> {
        let labels = game.labels();
        for (what, ours, theirs) in [
            ("market", &labels.markets, &self.markets),
            ("producer", &labels.producers, &self.producers),
            ("link", &labels.links, &self.links),
        ] {
            if ours != theirs {
                return Err(FormatError::Mismatch(format!("{what} ids differ")));
            }
        }
        check_len("x rows", game.n_producers(), self.x.len())?;
        for row in &self.x {
            check_len("x row", game.n_markets(), row.len())?;
        }
        let x = ProductionProfile::from_rows(game.network(), &self.x)?;
        let y = FlowProfile::new(game.network(), self.y.clone())?;
        let stats = SolverStats {
            iterations: self.stats.iterations,
            pg_norm: self.stats.pg_norm.unwrap_or(f64::NAN),
            wall_time: Default::default(),
        };
        Ok(Outcome::from_profiles(game, x, y, stats)?)
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|source| FormatError::Read {
        path: path.display().to_string(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| FormatError::Write {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_game(path: &Path) -> Result<Game, FormatError> {
    read_json::<GameFile>(path)?.to_game()
}
