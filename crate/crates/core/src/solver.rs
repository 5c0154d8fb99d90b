//! Best responses, equilibrium computation by potential maximization,
//! round-robin best-response dynamics, a grid oracle and equilibrium
//! verification.
//!
//! Producer boxes are truncated at the dominance bound of each market, which
//! loses no equilibrium. The market maker's optimal flows form a set sharing
//! the same `B y`; the solver always reports the minimum-norm member.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{ModelError, SolveError};
use crate::model::{
    check_profiles, market_dominance_bound, net_consumption_unchecked, FlowProfile, Game,
    MarketNetwork, Outcome, ProductionProfile, SolverStats,
};
use crate::qp::{self, AscentOptions, BoxBounds, ConcaveQuadratic, StepRule};
use crate::welfare::{ensure_potential_game, potential_unchecked, surplus, utility_unchecked};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Relative projected-gradient stopping threshold.
    pub tol_pg: f64,
    pub max_iters: usize,
    pub step_rule: StepRule,
    /// Number of solves used for uniqueness checking (the first starts at 0).
    pub restarts: usize,
    pub seed: u64,
    /// Multiplier on the dominance-bound producer boxes.
    pub producer_box_scale: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_pg: 1e-9,
            max_iters: 200_000,
            step_rule: StepRule::default(),
            restarts: 1,
            seed: 0,
            producer_box_scale: 1.0,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.tol_pg > 0.0) {
            return Err(SolveError::InvalidOptions("tol_pg must be > 0".into()));
        }
        if self.max_iters < 1 {
            return Err(SolveError::InvalidOptions("max_iters must be >= 1".into()));
        }
        if !(self.producer_box_scale >= 1.0) {
            return Err(SolveError::InvalidOptions(
                "producer_box_scale must be >= 1".into(),
            ));
        }
        let s = self.step_rule;
        if !(s.initial_step > 0.0
            && s.shrink > 0.0
            && s.shrink < 1.0
            && s.armijo > 0.0
            && s.armijo < 1.0)
        {
            return Err(SolveError::InvalidOptions("invalid step rule".into()));
        }
        Ok(())
    }

    fn ascent(&self, record_trace: bool, value_scale: f64) -> AscentOptions {
        AscentOptions {
            tol: self.tol_pg,
            value_scale,
            max_iters: self.max_iters,
            step: self.step_rule,
            record_trace,
        }
    }
}

/// Outcome of checking a profile for profitable unilateral deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    /// Largest utility gain any producer gets by best-responding.
    pub max_producer_improvement: f64,
    /// Producer achieving `max_producer_improvement`, if any producer exists.
    pub worst_producer: Option<usize>,
    pub market_maker_improvement: f64,
    /// `‖P(v + ∇P) - v‖ / (1 + |P|)` over the joint box.
    pub stationarity_residual: f64,
    pub is_equilibrium: bool,
}

/// Decision vector layout: accessible (producer, market) pairs grouped by
/// producer, followed by one entry per link.
struct Layout {
    pairs: Vec<(usize, usize)>,
    offsets: Vec<usize>,
}

impl Layout {
    fn new(network: &MarketNetwork) -> Self {
        let mut pairs = Vec::new();
        let mut offsets = Vec::with_capacity(network.n_producers() + 1);
        for i in 0..network.n_producers() {
            offsets.push(pairs.len());
            pairs.extend(network.access_set(i).iter().map(|&j| (i, j)));
        }
        offsets.push(pairs.len());
        Self { pairs, offsets }
    }

    fn n_x(&self) -> usize {
        self.pairs.len()
    }

    fn pack(&self, x: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
        self.pairs
            .iter()
            .map(|&(i, j)| x[(i, j)])
            .chain(y.iter().copied())
            .collect()
    }

    fn unpack(&self, v: &[f64], n: usize, m: usize) -> (DMatrix<f64>, Vec<f64>) {
        let mut x = DMatrix::zeros(n, m);
        for (t, &(i, j)) in self.pairs.iter().enumerate() {
            x[(i, j)] = v[t];
        }
        (x, v[self.n_x()..].to_vec())
    }
}

fn producer_upper(game: &Game, market: usize, scale: f64) -> f64 {
    scale * market_dominance_bound(game, market)
}

fn joint_bounds(game: &Game, layout: &Layout, scale: f64) -> BoxBounds {
    let upper = layout
        .pairs
        .iter()
        .map(|&(_, j)| producer_upper(game, j, scale))
        .chain(game.network().capacities().iter().copied())
        .collect();
    BoxBounds::from_upper(upper)
}

/// The exact potential over the packed decision vector.
struct PotentialObjective<'a> {
    game: &'a Game,
    layout: &'a Layout,
}

impl PotentialObjective<'_> {
    fn consumption(&self, v: &[f64]) -> Vec<f64> {
        let n_x = self.layout.n_x();
        let mut z = self.game.network().net_inflow(&v[n_x..]);
        for (t, &(_, j)) in self.layout.pairs.iter().enumerate() {
            z[j] += v[t];
        }
        z
    }

    fn cost_terms(&self, v: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.game.n_producers() {
            let (lo, hi) = (self.layout.offsets[i], self.layout.offsets[i + 1]);
            let cost = self.game.cost(i);
            for a in lo..hi {
                let ja = self.layout.pairs[a].1;
                let mut row = 0.0;
                for b in lo..hi {
                    row += cost.theta[(ja, self.layout.pairs[b].1)] * v[b];
                }
                let beta = self.game.demand(ja).beta;
                total += v[a] * row + cost.gamma[ja] * v[a] + 0.5 * beta * v[a] * v[a];
            }
        }
        total
    }
}

impl ConcaveQuadratic for PotentialObjective<'_> {
    fn dim(&self) -> usize {
        self.layout.n_x() + self.game.n_links()
    }

    fn value(&self, v: &[f64]) -> f64 {
        surplus(self.game, &self.consumption(v)) - self.cost_terms(v)
    }

    fn gradient(&self, v: &[f64], out: &mut [f64]) {
        let z = self.consumption(v);
        let p: Vec<f64> = z
            .iter()
            .enumerate()
            .map(|(j, &zj)| self.game.demand(j).price(zj))
            .collect();
        for i in 0..self.game.n_producers() {
            let (lo, hi) = (self.layout.offsets[i], self.layout.offsets[i + 1]);
            let cost = self.game.cost(i);
            for a in lo..hi {
                let ja = self.layout.pairs[a].1;
                let mut row = 0.0;
                for b in lo..hi {
                    row += cost.theta[(ja, self.layout.pairs[b].1)] * v[b];
                }
                out[a] = p[ja] - 2.0 * row - cost.gamma[ja] - self.game.demand(ja).beta * v[a];
            }
        }
        let n_x = self.layout.n_x();
        let network = self.game.network();
        for k in 0..network.n_links() {
            out[n_x + k] = p[network.head(k)] - p[network.tail(k)];
        }
    }
}

/// Market maker welfare as a function of flows, production held fixed.
struct FlowObjective<'a> {
    game: &'a Game,
    base: Vec<f64>,
}

impl FlowObjective<'_> {
    fn consumption(&self, y: &[f64]) -> Vec<f64> {
        let mut z = self.game.network().net_inflow(y);
        for (zj, b) in z.iter_mut().zip(&self.base) {
            *zj += b;
        }
        z
    }
}

impl ConcaveQuadratic for FlowObjective<'_> {
    fn dim(&self) -> usize {
        self.game.n_links()
    }

    fn value(&self, y: &[f64]) -> f64 {
        surplus(self.game, &self.consumption(y))
    }

    fn gradient(&self, y: &[f64], out: &mut [f64]) {
        let z = self.consumption(y);
        let network = self.game.network();
        for k in 0..network.n_links() {
            let (h, t) = (network.head(k), network.tail(k));
            out[k] = self.game.demand(h).price(z[h]) - self.game.demand(t).price(z[t]);
        }
    }
}

/// Profit of one producer over its access set, everything else held fixed.
struct ProducerObjective<'a> {
    game: &'a Game,
    producer: usize,
    /// Net consumption without this producer's own sales.
    others: Vec<f64>,
}

impl ProducerObjective<'_> {
    fn support(&self) -> &[usize] {
        self.game.network().access_set(self.producer)
    }

    fn dense(&self, v: &[f64]) -> Vec<f64> {
        let mut xi = vec![0.0; self.game.n_markets()];
        for (&j, &val) in self.support().iter().zip(v) {
            xi[j] = val;
        }
        xi
    }
}

impl ConcaveQuadratic for ProducerObjective<'_> {
    fn dim(&self) -> usize {
        self.support().len()
    }

    fn value(&self, v: &[f64]) -> f64 {
        let xi = self.dense(v);
        let support = self.support();
        let revenue: f64 = support
            .iter()
            .map(|&j| xi[j] * self.game.demand(j).price(self.others[j] + xi[j]))
            .sum();
        revenue - self.game.cost(self.producer).eval_on(support, &xi)
    }

    fn gradient(&self, v: &[f64], out: &mut [f64]) {
        let xi = self.dense(v);
        let support = self.support();
        let cost = self.game.cost(self.producer);
        for (a, &j) in support.iter().enumerate() {
            let d = self.game.demand(j);
            out[a] = d.price(self.others[j] + xi[j])
                - d.beta * xi[j]
                - cost.marginal_on(support, &xi, j);
        }
    }
}

/// Net consumption without producer `i`'s own sales.
fn others_of(game: &Game, producer: usize, x: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let mut others = net_consumption_unchecked(game.network(), x, y);
    for &j in game.network().access_set(producer) {
        others[j] -= x[(producer, j)];
    }
    others
}

fn producer_bounds(game: &Game, producer: usize, scale: f64) -> BoxBounds {
    BoxBounds::from_upper(
        game.network()
            .access_set(producer)
            .iter()
            .map(|&j| producer_upper(game, j, scale))
            .collect(),
    )
}

fn flow_bounds(network: &MarketNetwork) -> BoxBounds {
    BoxBounds::from_upper(network.capacities().to_vec())
}

fn flow_profile(network: &MarketNetwork, mut y: Vec<f64>) -> FlowProfile {
    flow_bounds(network).project(&mut y);
    FlowProfile::new(network, y).expect("projected flows are feasible")
}

fn production_profile(network: &MarketNetwork, x: DMatrix<f64>) -> ProductionProfile {
    ProductionProfile::new(network, x).expect("solver iterates stay on the access support")
}

/// Best response of the market maker, returned in canonical (minimum-norm) form.
pub fn market_maker_best_response(
    game: &Game,
    x: &ProductionProfile,
    opts: &SolveOptions,
) -> Result<FlowProfile, SolveError> {
    let zeros = FlowProfile::zeros(game.network());
    check_profiles(game, x, &zeros)?;
    opts.validate()?;
    let scale = potential_unchecked(game, x.matrix(), zeros.as_slice()).abs();
    let y = market_maker_ascent(game, x.matrix(), zeros.as_slice(), scale, opts)?;
    Ok(canonical_flow(game.network(), &y))
}

/// Best-response sub-solves measure their stopping rule against `scale`, the
/// magnitude of the game's potential, since a player's own objective can be
/// close to zero at its optimum while its gradient is large.
fn market_maker_ascent(
    game: &Game,
    x: &DMatrix<f64>,
    start: &[f64],
    scale: f64,
    opts: &SolveOptions,
) -> Result<Vec<f64>, SolveError> {
    let network = game.network();
    if network.n_links() == 0 {
        return Ok(Vec::new());
    }
    let base = net_consumption_unchecked(network, x, &vec![0.0; network.n_links()]);
    let objective = FlowObjective { game, base };
    Ok(qp::maximize(
        &objective,
        &flow_bounds(network),
        start,
        &opts.ascent(false, scale),
    )?
    .point)
}

/// Best response of producer `i` to the other producers and the flows.
/// Row `i` of `x` is ignored except as a warm start.
pub fn producer_best_response(
    game: &Game,
    producer: usize,
    x: &ProductionProfile,
    y: &FlowProfile,
    opts: &SolveOptions,
) -> Result<Vec<f64>, SolveError> {
    check_profiles(game, x, y)?;
    if producer >= game.n_producers() {
        return Err(ModelError::DimensionMismatch {
            what: "producer index",
            expected: game.n_producers(),
            got: producer,
        }
        .into());
    }
    opts.validate()?;
    let scale = potential_unchecked(game, x.matrix(), y.as_slice()).abs();
    let others = others_of(game, producer, x.matrix(), y.as_slice());
    producer_ascent(game, producer, others, None, scale, opts)
}

/// Best response of `producer` given everyone else's net consumption.
/// `warm` is the producer's current dense row, used as the starting point.
fn producer_ascent(
    game: &Game,
    producer: usize,
    others: Vec<f64>,
    warm: Option<&[f64]>,
    scale: f64,
    opts: &SolveOptions,
) -> Result<Vec<f64>, SolveError> {
    let support = game.network().access_set(producer);
    let mut row = vec![0.0; game.n_markets()];
    if support.is_empty() {
        return Ok(row);
    }
    let cost = game.cost(producer);
    let separable = support
        .iter()
        .all(|&a| support.iter().all(|&b| a == b || cost.theta[(a, b)] == 0.0));
    if separable {
        // each coordinate maximizes a concave parabola on its own interval
        for &j in support {
            let d = game.demand(j);
            let slope = d.alpha - d.beta * others[j] - cost.gamma[j];
            let curvature = 2.0 * (d.beta + cost.theta[(j, j)]);
            row[j] =
                (slope / curvature).clamp(0.0, producer_upper(game, j, opts.producer_box_scale));
        }
        return Ok(row);
    }
    let start: Vec<f64> = match warm {
        Some(current) => support.iter().map(|&j| current[j]).collect(),
        None => vec![0.0; support.len()],
    };
    let objective = ProducerObjective {
        game,
        producer,
        others,
    };
    let bounds = producer_bounds(game, producer, opts.producer_box_scale);
    let r = qp::maximize(&objective, &bounds, &start, &opts.ascent(false, scale))?;
    for (&j, v) in support.iter().zip(r.point) {
        row[j] = v;
    }
    Ok(row)
}

/// A single potential-ascent run with its value trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumRun {
    pub outcome: Outcome,
    /// Potential after every accepted projected-gradient step.
    pub potential_trace: Vec<f64>,
}

/// Nash equilibrium by maximizing the exact potential from `x = 0, y = 0`.
pub fn solve_equilibrium(game: &Game, opts: &SolveOptions) -> Result<Outcome, SolveError> {
    let x0 = ProductionProfile::zeros(game.network());
    let y0 = FlowProfile::zeros(game.network());
    Ok(solve_from(game, &x0, &y0, opts)?.outcome)
}

/// Potential maximization started from an arbitrary profile.
pub fn solve_from(
    game: &Game,
    x0: &ProductionProfile,
    y0: &FlowProfile,
    opts: &SolveOptions,
) -> Result<EquilibriumRun, SolveError> {
    ensure_potential_game(game)?;
    check_profiles(game, x0, y0)?;
    opts.validate()?;
    let started = Instant::now();
    let layout = Layout::new(game.network());
    let objective = PotentialObjective {
        game,
        layout: &layout,
    };
    let bounds = joint_bounds(game, &layout, opts.producer_box_scale);
    let start = layout.pack(x0.matrix(), y0.as_slice());
    let r = qp::maximize(&objective, &bounds, &start, &opts.ascent(true, 0.0))?;
    let (x, y) = layout.unpack(&r.point, game.n_producers(), game.n_markets());
    let y = canonical_flow(game.network(), &y);
    let stats = SolverStats {
        iterations: r.iterations,
        pg_norm: r.pg_norm,
        wall_time: started.elapsed(),
    };
    let outcome = Outcome::from_profiles(game, production_profile(game.network(), x), y, stats)?;
    Ok(EquilibriumRun {
        outcome,
        potential_trace: r.trace,
    })
}

/// Uniform random profile inside the solver boxes.
pub fn random_profile(
    game: &Game,
    opts: &SolveOptions,
    rng: &mut impl Rng,
) -> (ProductionProfile, FlowProfile) {
    let network = game.network();
    let mut x = DMatrix::zeros(game.n_producers(), game.n_markets());
    for i in 0..game.n_producers() {
        for &j in network.access_set(i) {
            x[(i, j)] = rng.gen::<f64>() * producer_upper(game, j, opts.producer_box_scale);
        }
    }
    let y = network
        .capacities()
        .iter()
        .map(|&c| rng.gen::<f64>() * c)
        .collect();
    (production_profile(network, x), flow_profile(network, y))
}

/// Result of solving from several starting points.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartReport {
    /// Solution from the default start `x = 0, y = 0`.
    pub outcome: Outcome,
    pub runs: usize,
    /// Largest componentwise deviation of `x*` from the first run.
    pub max_x_deviation: f64,
    /// Largest componentwise deviation of `B y*` from the first run.
    pub max_flow_deviation: f64,
}

impl RestartReport {
    pub fn agrees_within(&self, tol: f64) -> bool {
        self.max_x_deviation <= tol && self.max_flow_deviation <= tol
    }
}

/// Runs `opts.restarts` solves (the first from zero, the rest from random
/// starts drawn with `opts.seed`) on at most `threads` worker threads.
pub fn solve_with_restarts(
    game: &Game,
    opts: &SolveOptions,
    threads: Option<usize>,
) -> Result<RestartReport, SolveError> {
    opts.validate()?;
    let runs = opts.restarts.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![(
        ProductionProfile::zeros(game.network()),
        FlowProfile::zeros(game.network()),
    )];
    for _ in 1..runs {
        starts.push(random_profile(game, opts, &mut rng));
    }
    let solve_all = || {
        starts
            .par_iter()
            .map(|(x0, y0)| solve_from(game, x0, y0, opts).map(|r| r.outcome))
            .collect::<Result<Vec<_>, _>>()
    };
    let outcomes = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| SolveError::InvalidOptions(e.to_string()))?
            .install(solve_all)?,
        None => solve_all()?,
    };
    let network = game.network();
    let first = &outcomes[0];
    let first_flow = first.net_inflow(network);
    let mut max_x_deviation: f64 = 0.0;
    let mut max_flow_deviation: f64 = 0.0;
    for o in &outcomes[1..] {
        max_x_deviation = max_x_deviation.max((o.x.matrix() - first.x.matrix()).amax());
        let flow = o.net_inflow(network);
        for (a, b) in flow.iter().zip(&first_flow) {
            max_flow_deviation = max_flow_deviation.max((a - b).abs());
        }
    }
    Ok(RestartReport {
        outcome: outcomes.into_iter().next().expect("at least one run"),
        runs,
        max_x_deviation,
        max_flow_deviation,
    })
}

/// One round of best-response dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrRound {
    pub round: usize,
    /// Largest change of any coordinate of `(x, y)` during the round.
    pub max_change: f64,
    pub potential: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BrTrace {
    pub rounds: Vec<BrRound>,
    /// Potential after every single best-response step, starting with the
    /// initial profile.
    pub step_potentials: Vec<f64>,
}

/// Round-robin exact best responses (producers in order, then the market
/// maker) until a full round changes no coordinate by more than
/// `opts.tol_pg * (1 + max|v|)`. At most `opts.max_iters` rounds.
pub fn best_response_dynamics(
    game: &Game,
    init: (&ProductionProfile, &FlowProfile),
    opts: &SolveOptions,
) -> Result<(BrTrace, Outcome), SolveError> {
    ensure_potential_game(game)?;
    check_profiles(game, init.0, init.1)?;
    opts.validate()?;
    let started = Instant::now();
    let network = game.network();
    let mut x = init.0.matrix().clone();
    let mut y = init.1.as_slice().to_vec();
    let mut trace = BrTrace::default();
    trace
        .step_potentials
        .push(potential_unchecked(game, &x, &y));
    // inner solves run tighter than the outer stopping rule
    let inner = SolveOptions {
        tol_pg: opts.tol_pg * 1e-2,
        ..*opts
    };

    for round in 1..=opts.max_iters {
        let mut max_change: f64 = 0.0;
        let mut scale: f64 = 0.0;
        let mut z = net_consumption_unchecked(network, &x, &y);
        let mut current = *trace.step_potentials.last().expect("initial potential");
        for i in 0..game.n_producers() {
            let support = network.access_set(i);
            let mut others = z.clone();
            let old: Vec<f64> = x.row(i).iter().copied().collect();
            for &j in support {
                others[j] -= old[j];
            }
            let row = producer_ascent(game, i, others, Some(&old), current.abs(), &inner)?;
            let before = utility_unchecked(game, &x, &z, i);
            for &j in support {
                max_change = max_change.max((row[j] - old[j]).abs());
                scale = scale.max(row[j].abs());
                x[(i, j)] = row[j];
                z[j] += row[j] - old[j];
            }
            // a unilateral move changes the potential by the mover's gain
            current += utility_unchecked(game, &x, &z, i) - before;
            trace.step_potentials.push(current);
        }
        let magnitude = trace.step_potentials.last().map_or(0.0, |p| p.abs());
        let y_new = market_maker_ascent(game, &x, &y, magnitude, &inner)?;
        let y_new = canonical_flow(network, &y_new).as_slice().to_vec();
        for (a, b) in y_new.iter().zip(&y) {
            max_change = max_change.max((a - b).abs());
        }
        scale = y_new.iter().fold(scale, |s, v| s.max(v.abs()));
        y = y_new;
        let potential = potential_unchecked(game, &x, &y);
        trace.step_potentials.push(potential);
        trace.rounds.push(BrRound {
            round,
            max_change,
            potential,
        });
        if max_change <= opts.tol_pg * (1.0 + scale) {
            let stats = SolverStats {
                iterations: round,
                pg_norm: stationarity_norm(game, &x, &y, opts.producer_box_scale),
                wall_time: started.elapsed(),
            };
            let outcome = Outcome::from_profiles(
                game,
                production_profile(network, x),
                flow_profile(network, y),
                stats,
            )?;
            return Ok((trace, outcome));
        }
    }
    let pg_norm = stationarity_norm(game, &x, &y, opts.producer_box_scale);
    Err(SolveError::NonConvergence {
        iterations: opts.max_iters,
        pg_norm,
    })
}

fn stationarity_norm(game: &Game, x: &DMatrix<f64>, y: &[f64], scale: f64) -> f64 {
    let layout = Layout::new(game.network());
    let objective = PotentialObjective {
        game,
        layout: &layout,
    };
    let v = layout.pack(x, y);
    let mut g = vec![0.0; v.len()];
    objective.gradient(&v, &mut g);
    joint_bounds(game, &layout, scale).projected_gradient_norm(&v, &g)
}

/// Largest boxed dimension the grid oracle accepts.
pub const BRUTE_FORCE_MAX_DIM: usize = 6;
/// Largest number of grid points the oracle evaluates.
pub const BRUTE_FORCE_MAX_POINTS: f64 = 5e8;

/// Exhaustive evaluation of the potential on the grid `{0, h, 2h, ...}` of
/// every box coordinate. Intended as a test oracle for tiny games.
pub fn brute_force_equilibrium(game: &Game, grid_step: f64) -> Result<Outcome, SolveError> {
    ensure_potential_game(game)?;
    if !(grid_step > 0.0) || !grid_step.is_finite() {
        return Err(SolveError::InvalidOptions("grid_step must be > 0".into()));
    }
    let started = Instant::now();
    let layout = Layout::new(game.network());
    let bounds = joint_bounds(game, &layout, 1.0);
    let dim = bounds.dim();
    let counts: Vec<usize> = bounds
        .upper
        .iter()
        .map(|&u| (u / grid_step + 1e-9).floor() as usize + 1)
        .collect();
    let points: f64 = counts.iter().map(|&c| c as f64).product();
    if dim > BRUTE_FORCE_MAX_DIM || points > BRUTE_FORCE_MAX_POINTS {
        return Err(SolveError::TooLarge {
            dimension: dim,
            points,
        });
    }
    let objective = PotentialObjective {
        game,
        layout: &layout,
    };
    let mut idx = vec![0usize; dim];
    let mut v = vec![0.0; dim];
    let mut best = v.clone();
    let mut best_value = objective.value(&v);
    let mut evaluated = 1usize;
    'grid: loop {
        let mut d = 0;
        loop {
            if d == dim {
                break 'grid;
            }
            idx[d] += 1;
            if idx[d] < counts[d] {
                v[d] = idx[d] as f64 * grid_step;
                break;
            }
            idx[d] = 0;
            v[d] = 0.0;
            d += 1;
        }
        let value = objective.value(&v);
        evaluated += 1;
        if value > best_value {
            best_value = value;
            best.copy_from_slice(&v);
        }
    }
    let (x, y) = layout.unpack(&best, game.n_producers(), game.n_markets());
    let network = game.network();
    let stats = SolverStats {
        iterations: evaluated,
        pg_norm: f64::NAN,
        wall_time: started.elapsed(),
    };
    Ok(Outcome::from_profiles(
        game,
        production_profile(network, x),
        flow_profile(network, y),
        stats,
    )?)
}

/// Recomputes every player's best response against the outcome and reports
/// the largest available improvement together with the stationarity
/// residual of the potential. Best responses are computed with tolerance
/// `min(tol, 1e-9) * 1e-3` and warm-started at the outcome, so reported
/// improvements are never negative.
pub fn verify_equilibrium(game: &Game, outcome: &Outcome, tol: f64) -> VerificationReport {
    let failed = VerificationReport {
        max_producer_improvement: f64::INFINITY,
        worst_producer: None,
        market_maker_improvement: f64::INFINITY,
        stationarity_residual: f64::INFINITY,
        is_equilibrium: false,
    };
    if check_profiles(game, &outcome.x, &outcome.y).is_err() || ensure_potential_game(game).is_err()
    {
        return failed;
    }
    let opts = SolveOptions {
        tol_pg: tol.min(1e-9) * 1e-3,
        ..SolveOptions::default()
    };
    let network = game.network();
    let x = outcome.x.matrix();
    let y = outcome.y.as_slice();
    let z = net_consumption_unchecked(network, x, y);
    let p = potential_unchecked(game, x, y);

    let mut max_producer_improvement: f64 = 0.0;
    let mut worst_producer = None;
    for i in 0..game.n_producers() {
        if !network.is_active(i) {
            continue;
        }
        let current = utility_unchecked(game, x, &z, i);
        let others = others_of(game, i, x, y);
        let row: Vec<f64> = x.row(i).iter().copied().collect();
        let gain = match producer_ascent(game, i, others, Some(&row), p.abs(), &opts) {
            Ok(row) => {
                let mut x_dev = x.clone();
                for &j in network.access_set(i) {
                    x_dev[(i, j)] = row[j];
                }
                let z_dev = net_consumption_unchecked(network, &x_dev, y);
                (utility_unchecked(game, &x_dev, &z_dev, i) - current).max(0.0)
            }
            Err(_) => f64::INFINITY,
        };
        if worst_producer.is_none() || gain > max_producer_improvement {
            max_producer_improvement = gain;
            worst_producer = Some(i);
        }
    }

    let market_maker_improvement = match market_maker_ascent(game, x, y, p.abs(), &opts) {
        Ok(y_best) => {
            let base = net_consumption_unchecked(network, x, &vec![0.0; y.len()]);
            let objective = FlowObjective { game, base };
            (objective.value(&y_best) - objective.value(y)).max(0.0)
        }
        Err(_) => f64::INFINITY,
    };

    let stationarity_residual = stationarity_norm(game, x, y, 1.0) / (1.0 + p.abs());
    let is_equilibrium = max_producer_improvement <= tol
        && market_maker_improvement <= tol
        && stationarity_residual <= tol;
    VerificationReport {
        max_producer_improvement,
        worst_producer,
        market_maker_improvement,
        stationarity_residual,
        is_equilibrium,
    }
}

/// The minimum-Euclidean-norm flow among `{ỹ ∈ [0, c] : B ỹ = B y}`.
///
/// Dykstra's alternating projections between the affine set and the box,
/// started at the origin, converge to the projection of the origin onto the
/// intersection. The result is then polished by solving the equality
/// constrained least-norm problem on the free coordinates exactly.
pub fn canonical_flow(network: &MarketNetwork, y: &[f64]) -> FlowProfile {
    let l = network.n_links();
    if l == 0 {
        return FlowProfile::zeros(network);
    }
    let target = network.net_inflow(y);
    let b = network.incidence();
    let laplacian_pinv = pseudo_inverse(&(&b * b.transpose()));
    let bounds = flow_bounds(network);
    let scale = 1.0 + network.capacities().iter().fold(0.0f64, |a, &c| a.max(c));

    let project_affine = |v: &[f64]| -> Vec<f64> {
        let bv = network.net_inflow(v);
        let resid = DVector::from_iterator(bv.len(), bv.iter().zip(&target).map(|(a, t)| a - t));
        let mult = &laplacian_pinv * resid;
        let corr = network.link_differences(mult.as_slice());
        v.iter().zip(corr).map(|(a, c)| a - c).collect()
    };

    let mut current = vec![0.0; l];
    let mut p = vec![0.0; l];
    let mut q = vec![0.0; l];
    for _ in 0..200_000 {
        let shifted: Vec<f64> = current.iter().zip(&p).map(|(a, b)| a + b).collect();
        let a = project_affine(&shifted);
        for k in 0..l {
            p[k] = shifted[k] - a[k];
        }
        let mut next: Vec<f64> = a.iter().zip(&q).map(|(a, b)| a + b).collect();
        bounds.project(&mut next);
        for k in 0..l {
            q[k] = a[k] + q[k] - next[k];
        }
        let gap = a
            .iter()
            .zip(&next)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0f64, f64::max);
        let moved = current
            .iter()
            .zip(&next)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0f64, f64::max);
        current = next;
        if gap <= 1e-14 * scale && moved <= 1e-15 * scale {
            break;
        }
    }

    let polished = polish_least_norm(network, &current, &target, &bounds, scale);
    let mut best = if let Some(v) = polished { v } else { current };
    // never move away from the requested net flow by more than the input did
    let resid = |v: &[f64]| -> f64 {
        network
            .net_inflow(v)
            .iter()
            .zip(&target)
            .map(|(a, t)| (a - t).abs())
            .fold(0.0, f64::max)
    };
    if resid(&best) > 1e-12 * scale && resid(&best) > resid(y) {
        best = y.to_vec();
    }
    flow_profile(network, best)
}

fn polish_least_norm(
    network: &MarketNetwork,
    approx: &[f64],
    target: &[f64],
    bounds: &BoxBounds,
    scale: f64,
) -> Option<Vec<f64>> {
    let l = approx.len();
    let tol = 1e-9 * scale;
    let mut out = vec![0.0; l];
    let mut free = Vec::new();
    for k in 0..l {
        if approx[k] <= bounds.lower[k] + tol {
            out[k] = bounds.lower[k];
        } else if approx[k] >= bounds.upper[k] - tol {
            out[k] = bounds.upper[k];
        } else {
            free.push(k);
        }
    }
    let fixed_inflow = network.net_inflow(&out);
    let rhs: Vec<f64> = target
        .iter()
        .zip(&fixed_inflow)
        .map(|(t, f)| t - f)
        .collect();
    if !free.is_empty() {
        let m = network.n_markets();
        let mut bf = DMatrix::<f64>::zeros(m, free.len());
        for (c, &k) in free.iter().enumerate() {
            bf[(network.head(k), c)] += 1.0;
            bf[(network.tail(k), c)] -= 1.0;
        }
        let mult = pseudo_inverse(&(&bf * bf.transpose())) * DVector::from_column_slice(&rhs);
        let yf = bf.transpose() * mult;
        for (c, &k) in free.iter().enumerate() {
            out[k] = yf[c];
        }
    }
    let feasible = out.iter().enumerate().all(|(k, &v)| {
        v >= bounds.lower[k] - 1e-12 * scale && v <= bounds.upper[k] + 1e-12 * scale
    });
    let resid = network
        .net_inflow(&out)
        .iter()
        .zip(target)
        .map(|(a, t)| (a - t).abs())
        .fold(0.0f64, f64::max);
    let close = out
        .iter()
        .zip(approx)
        .all(|(a, b)| (a - b).abs() <= 1e-6 * scale);
    (feasible && close && resid <= 1e-12 * scale).then(|| {
        bounds.project(&mut out);
        out
    })
}

fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.is_empty() {
        return m.clone();
    }
    let eps = 1e-10 * (1.0 + m.amax());
    m.clone()
        .pseudo_inverse(eps)
        .expect("pseudo-inverse with non-negative epsilon")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, TwoMarketCost};
    use crate::welfare::producer_utility;

    fn x_of(game: &Game, row: &[f64]) -> ProductionProfile {
        ProductionProfile::from_rows(game.network(), &[row.to_vec()]).unwrap()
    }

    #[test]
    fn market_maker_response_in_the_interior_branch() {
        let game = fixtures::two_market(1.0, TwoMarketCost::Coupled);
        let y =
            market_maker_best_response(&game, &x_of(&game, &[0.3, 0.2]), &SolveOptions::default())
                .unwrap();
        assert!((y.get(0) - 0.3).abs() < 1e-9, "{y:?}");
        assert!(y.get(1).abs() < 1e-12);
    }

    #[test]
    fn market_maker_response_saturates() {
        // 1 + x11 - 2 x12 = 1.5 >= 3χ with χ = 0.2
        let game = fixtures::two_market(0.2, TwoMarketCost::Coupled);
        let y =
            market_maker_best_response(&game, &x_of(&game, &[0.5, 0.0]), &SolveOptions::default())
                .unwrap();
        assert_eq!(y.as_slice(), &[0.2, 0.0]);
    }

    #[test]
    fn market_maker_idle_when_prices_already_equal() {
        let data = fixtures::two_market_data(1.0, TwoMarketCost::Coupled);
        let mut data = data;
        data.demands[1] = data.demands[0];
        let game = crate::model::validate_game(data).unwrap();
        let y = market_maker_best_response(
            &game,
            &ProductionProfile::zeros(game.network()),
            &SolveOptions::default(),
        )
        .unwrap();
        assert_eq!(y.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn producer_response_matches_the_closed_forms() {
        let a = fixtures::two_market(1.0, TwoMarketCost::Coupled);
        let b = fixtures::two_market(1.0, TwoMarketCost::Separable);
        let opts = SolveOptions::default();
        for delta in [-0.15, 0.0, 0.2, 0.5] {
            let y = if delta >= 0.0 {
                vec![delta, 0.0]
            } else {
                vec![0.0, -delta]
            };
            let ya = FlowProfile::new(a.network(), y.clone()).unwrap();
            let br =
                producer_best_response(&a, 0, &ProductionProfile::zeros(a.network()), &ya, &opts)
                    .unwrap();
            assert!((br[0] - (1.0 + 5.0 * delta) / 10.0).abs() < 1e-8);
            assert!((br[1] - (3.0 - 5.0 * delta) / 10.0).abs() < 1e-8);

            let yb = FlowProfile::new(b.network(), y).unwrap();
            let br =
                producer_best_response(&b, 0, &ProductionProfile::zeros(b.network()), &yb, &opts)
                    .unwrap();
            assert!((br[0] - (1.0 + delta) / 4.0).abs() < 1e-8);
            assert!((br[1] - (1.0 - delta) / 3.0).abs() < 1e-8);
        }
    }

    #[test]
    fn producer_stays_out_of_flooded_markets() {
        // producers 1 and 2 flood market 1 until its price falls below γ = 0.3
        let game = fixtures::four_market();
        let mut x = DMatrix::zeros(3, 4);
        x[(1, 0)] = 7.0;
        let x = ProductionProfile::new(game.network(), x).unwrap();
        let br = producer_best_response(
            &game,
            0,
            &x,
            &FlowProfile::zeros(game.network()),
            &SolveOptions::default(),
        )
        .unwrap();
        assert_eq!(br, vec![0.0; 4]);
    }

    #[test]
    fn two_market_coupled_equilibrium() {
        let game = fixtures::two_market(1.0, TwoMarketCost::Coupled);
        let o = solve_equilibrium(&game, &SolveOptions::default()).unwrap();
        assert!((o.x.get(0, 0) - 4.0 / 15.0).abs() < 1e-7);
        assert!((o.x.get(0, 1) - 2.0 / 15.0).abs() < 1e-7);
        assert!((o.z[0] + 1.0 / 15.0).abs() < 1e-7);
        assert!((o.z[1] - 7.0 / 15.0).abs() < 1e-7);
        assert!((o.y.get(0) - 1.0 / 3.0).abs() < 1e-7 && o.y.get(1) == 0.0);
    }

    #[test]
    fn verification_flags_perturbed_production() {
        let game = fixtures::two_market(1.0, TwoMarketCost::Coupled);
        let o = solve_equilibrium(&game, &SolveOptions::default()).unwrap();
        assert!(verify_equilibrium(&game, &o, 1e-6).is_equilibrium);
        let x = x_of(&game, &[o.x.get(0, 0) + 0.1, o.x.get(0, 1)]);
        let bad = Outcome::from_profiles(&game, x, o.y.clone(), o.stats).unwrap();
        let r = verify_equilibrium(&game, &bad, 1e-6);
        assert!(!r.is_equilibrium);
        assert!(r.max_producer_improvement > 1e-3);
        assert_eq!(r.worst_producer, Some(0));
    }

    #[test]
    fn equivalent_flows_remain_an_equilibrium() {
        let game = fixtures::two_market(1.0, TwoMarketCost::Coupled);
        let o = solve_equilibrium(&game, &SolveOptions::default()).unwrap();
        let shifted = FlowProfile::new(game.network(), vec![o.y.get(0) + 0.5, 0.5]).unwrap();
        let alt = Outcome::from_profiles(&game, o.x.clone(), shifted, o.stats).unwrap();
        assert!(verify_equilibrium(&game, &alt, 1e-6).is_equilibrium);
        let u = producer_utility(&game, 0, &alt.x, &alt.y).unwrap();
        assert!((u - o.producer_utilities[0]).abs() < 1e-12);
    }

    #[test]
    fn canonical_flow_is_minimum_norm() {
        let game = fixtures::two_market(1.0, TwoMarketCost::Coupled);
        let y = canonical_flow(game.network(), &[0.8, 0.5]);
        assert!((y.get(0) - 0.3).abs() < 1e-14 && y.get(1) == 0.0);
        let net = fixtures::four_market_network();
        // circulation 1 -> 2 -> 1 plus a path 2 -> 3 -> 4 split over parallel links
        let y = canonical_flow(&net, &[0.0, 0.7, 0.7, 0.5, 0.1, 0.0, 0.6]);
        let expected = [0.0, 0.0, 0.0, 0.3, 0.3, 0.0, 0.6];
        for k in 0..7 {
            assert!((y.get(k) - expected[k]).abs() < 1e-12, "{y:?}");
        }
    }

    #[test]
    fn brute_force_rejects_large_games() {
        assert!(matches!(
            brute_force_equilibrium(&fixtures::four_market(), 0.01),
            Err(SolveError::TooLarge { dimension: 12, .. })
        ));
        assert!(matches!(
            brute_force_equilibrium(&fixtures::two_market(1.0, TwoMarketCost::Coupled), 0.0),
            Err(SolveError::InvalidOptions(_))
        ));
    }

    #[test]
    fn options_are_validated() {
        let game = fixtures::four_market();
        let bad = SolveOptions {
            tol_pg: 0.0,
            ..SolveOptions::default()
        };
        assert!(matches!(
            solve_equilibrium(&game, &bad),
            Err(SolveError::InvalidOptions(_))
        ));
    }

    #[test]
    fn degenerate_zero_capacity_network_decouples() {
        let game = fixtures::two_market(0.0, TwoMarketCost::Separable);
        let o = solve_equilibrium(&game, &SolveOptions::default()).unwrap();
        // per-market Cournot with cost x²: x1 = 1/4, x2 = 1/3
        assert!((o.x.get(0, 0) - 0.25).abs() < 1e-8);
        assert!((o.x.get(0, 1) - 1.0 / 3.0).abs() < 1e-8);
        assert_eq!(o.y.as_slice(), &[0.0, 0.0]);
    }
}
