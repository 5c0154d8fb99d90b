//! Command-line front end: `solve`, `verify`, `analyze`, `estimate` and
//! `report`.
//!
//! Exit codes: 0 success, 2 invalid input or data, 3 solver did not converge,
//! 4 verification or consistency check failed.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::analysis::{self, Tolerances};
use crate::error::{AnalysisError, SolveError};
use crate::ingest::{self, BuildOptions, PriceWindow};
use crate::io::{self as files, GameFile, OutcomeFile, RestartEntry, RunManifest};
use crate::model::Game;
use crate::solver::{self, SolveOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "CNET_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "cnet",
    version,
    about = "Network Cournot equilibria with a market maker"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the equilibrium of a game file.
    Solve(SolveArgs),
    /// Check an outcome for profitable unilateral deviations.
    Verify(VerifyArgs),
    /// Saturated links, price groups, critical cuts and consumption signs.
    Analyze(AnalyzeArgs),
    /// Build a game from auction bids and transit limits.
    Estimate(EstimateArgs),
    /// Side-by-side CSV of prices, consumption and flows across outcomes.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub game: PathBuf,
    /// Outcome file to write.
    #[arg(short, long, default_value = "outcome.json")]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 200_000)]
    pub max_iters: usize,
    /// Total number of solves; all but the first start at random points.
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use exhaustive grid search with this step instead (tiny games only).
    #[arg(long)]
    pub grid: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub game: PathBuf,
    pub outcome: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub game: PathBuf,
    pub outcome: PathBuf,
    /// Absolute price tolerance (default: 1e-6 relative to the largest price).
    #[arg(long)]
    pub eps_price: Option<f64>,
    /// Absolute flow tolerance (default: 1e-6 relative to the largest capacity).
    #[arg(long)]
    pub eps_flow: Option<f64>,
    /// Write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Write the network as a DOT graph.
    #[arg(long)]
    pub dot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    pub bids: PathBuf,
    pub limits: PathBuf,
    /// Game file to write.
    #[arg(short, long, default_value = "game.json")]
    pub output: PathBuf,
    /// Estimation audit to write (default: next to the game file).
    #[arg(long)]
    pub audit: Option<PathBuf>,
    /// Use the cheapest offer price as the linear cost without the 0.99 factor.
    #[arg(long)]
    pub no_gamma_scaling: bool,
    /// Restrict the demand regression to bids priced in MIN:MAX.
    #[arg(long, value_parser = parse_window)]
    pub price_window: Option<PriceWindow>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub outcomes: Vec<PathBuf>,
    /// CSV file to write (default: standard output).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn parse_window(s: &str) -> Result<PriceWindow, String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| "expected MIN:MAX".to_string())?;
    let min: f64 = a.trim().parse().map_err(|_| format!("bad minimum {a:?}"))?;
    let max: f64 = b.trim().parse().map_err(|_| format!("bad maximum {b:?}"))?;
    if !(min <= max) {
        return Err("minimum exceeds maximum".into());
    }
    Ok(PriceWindow { min, max })
}

/// An error together with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

fn invalid(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_INVALID,
        error: error.into(),
    }
}

fn check_failed(error: anyhow::Error) -> Failure {
    Failure {
        code: EXIT_CHECK_FAILED,
        error,
    }
}

fn solve_failure(error: SolveError) -> Failure {
    let code = match error {
        SolveError::NonConvergence { .. } => EXIT_NO_CONVERGENCE,
        _ => EXIT_INVALID,
    };
    Failure {
        code,
        error: error.into(),
    }
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn load_game(path: &Path) -> Result<Game, Failure> {
    files::read_game(path)
        .with_context(|| format!("game file {}", path.display()))
        .map_err(invalid)
}

fn load_outcome(game: &Game, path: &Path) -> Result<crate::model::Outcome, Failure> {
    files::read_json::<OutcomeFile>(path)
        .and_then(|f| f.to_outcome(game))
        .with_context(|| format!("outcome file {}", path.display()))
        .map_err(invalid)
}

fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok()
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let _ = if code == EXIT_OK {
                write!(out, "{e}")
            } else {
                write!(err, "{e}")
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Analyze(a) => cmd_analyze(a, out),
        Command::Estimate(a) => cmd_estimate(a, out),
        Command::Report(a) => cmd_report(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {:#}", f.error);
            f.code
        }
    }
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes())
        .map_err(|e| invalid(anyhow!(e).context("writing output")))
}

pub fn cmd_solve(args: &SolveArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let game = load_game(&args.game)?;
    let opts = SolveOptions {
        tol_pg: args.tol,
        max_iters: args.max_iters,
        restarts: args.restarts.max(1),
        seed: args.seed,
        ..SolveOptions::default()
    };
    let mut options = BTreeMap::from([
        ("tol".to_string(), args.tol.to_string()),
        ("max_iters".to_string(), args.max_iters.to_string()),
        ("restarts".to_string(), opts.restarts.to_string()),
    ]);
    if let Some(h) = args.grid {
        options.insert("grid".into(), h.to_string());
    }
    let manifest = RunManifest::new(
        "solve",
        vec![path_str(&args.game)],
        options,
        Some(args.seed),
    );

    let mut text = String::new();
    let (outcome, restarts) = if let Some(h) = args.grid {
        (
            solver::brute_force_equilibrium(&game, h).map_err(solve_failure)?,
            None,
        )
    } else if opts.restarts > 1 {
        let report =
            solver::solve_with_restarts(&game, &opts, threads_from_env()).map_err(solve_failure)?;
        let scale = 1.0 + report.outcome.x.matrix().amax();
        let agreement_tol = 1e-5 * scale;
        text.push_str(&format!(
            "restarts: {} runs, max |dx| = {:.3e}, max |dBy| = {:.3e} ({})\n",
            report.runs,
            report.max_x_deviation,
            report.max_flow_deviation,
            if report.agrees_within(agreement_tol) {
                "agree"
            } else {
                "DISAGREE"
            }
        ));
        if !report.agrees_within(agreement_tol) {
            write_out(out, &text)?;
            return Err(Failure {
                code: EXIT_NO_CONVERGENCE,
                error: anyhow!("restarts disagree beyond {agreement_tol:e}"),
            });
        }
        let entry = RestartEntry {
            runs: report.runs,
            max_x_deviation: files::sig9(report.max_x_deviation),
            max_flow_deviation: files::sig9(report.max_flow_deviation),
        };
        (report.outcome, Some(entry))
    } else {
        (
            solver::solve_equilibrium(&game, &opts).map_err(solve_failure)?,
            None,
        )
    };

    let mut file = OutcomeFile::from_outcome(&game, &outcome, Some(manifest));
    file.restarts = restarts;
    files::write_json(&args.output, &file).map_err(invalid)?;

    let labels = game.labels();
    text.push_str(&format!("{:<12} {:>12} {:>12}\n", "market", "price", "z"));
    for j in 0..game.n_markets() {
        text.push_str(&format!(
            "{:<12} {:>12.2} {:>12.2}\n",
            labels.markets[j], outcome.prices[j], outcome.z[j]
        ));
    }
    text.push_str(&format!("\n{:<12} {:>12}\n", "producer", "total"));
    for i in 0..game.n_producers() {
        text.push_str(&format!(
            "{:<12} {:>12.2}\n",
            labels.producers[i],
            outcome.x.producer_total(i)
        ));
    }
    text.push_str(&format!(
        "\npotential {:.6}, welfare {:.6}, {} iterations\nwrote {}\n",
        outcome.potential_value,
        outcome.welfare_value,
        outcome.stats.iterations,
        args.output.display()
    ));
    write_out(out, &text)
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let game = load_game(&args.game)?;
    let outcome = load_outcome(&game, &args.outcome)?;
    let r = solver::verify_equilibrium(&game, &outcome, args.tol);
    let worst = r
        .worst_producer
        .map_or("-".to_string(), |i| game.labels().producers[i].clone());
    write_out(
        out,
        &format!(
            "max producer improvement {:.3e} (producer {worst})\nmarket maker improvement {:.3e}\nstationarity residual {:.3e}\nequilibrium at tol {:e}: {}\n",
            r.max_producer_improvement,
            r.market_maker_improvement,
            r.stationarity_residual,
            args.tol,
            if r.is_equilibrium { "yes" } else { "no" }
        ),
    )?;
    if r.is_equilibrium {
        return Ok(());
    }
    let who = if r.max_producer_improvement > args.tol {
        format!("producer {worst}")
    } else if r.market_maker_improvement > args.tol {
        "market maker".to_string()
    } else {
        "stationarity".to_string()
    };
    Err(check_failed(anyhow!(
        "not an equilibrium: {who} can improve"
    )))
}

pub fn cmd_analyze(args: &AnalyzeArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let game = load_game(&args.game)?;
    let outcome = load_outcome(&game, &args.outcome)?;
    let default = Tolerances::relative(&game, &outcome);
    let tol = Tolerances {
        eps_price: args.eps_price.unwrap_or(default.eps_price),
        eps_flow: args.eps_flow.unwrap_or(default.eps_flow),
    };
    let report = match analysis::analyze(&game, &outcome, tol) {
        Ok(r) => r,
        Err(e @ AnalysisError::NegativeConsumption { .. }) => return Err(check_failed(e.into())),
    };
    let labels = game.labels();
    let names = |ms: &[usize]| {
        ms.iter()
            .map(|&j| labels.markets[j].as_str())
            .collect::<Vec<_>>()
            .join(", ")
    };
    let mut text = format!("price groups ({}):\n", report.groups.len());
    for g in &report.groups {
        text.push_str(&format!(
            "  {:>10.2}  {{{}}}\n",
            g.group_price,
            names(&g.markets)
        ));
    }
    text.push_str("links:\n");
    for s in &report.links {
        text.push_str(&format!(
            "  {:<14} {:>10.2}/{:<10.2} {:?}\n",
            labels.links[s.link], s.flow, s.capacity, s.classification
        ));
    }
    text.push_str(&format!("critical cuts ({}):\n", report.cuts.len()));
    for c in &report.cuts {
        let links = |ks: &[usize]| {
            ks.iter()
                .map(|&k| labels.links[k].as_str())
                .collect::<Vec<_>>()
                .join(", ")
        };
        text.push_str(&format!(
            "  U = {{{}}}: out [{}], in [{}], saturated: {}\n",
            names(&c.cut_set),
            links(&c.out_boundary),
            links(&c.in_boundary),
            c.saturated
        ));
    }
    let d = &report.demand_sign;
    text.push_str(&format!(
        "min consumption {:.6} (negative in: {{{}}}; equal intercepts: {})\n",
        d.min_z,
        names(&d.negative_markets),
        d.equal_intercepts
    ));
    write_out(out, &text)?;

    if let Some(path) = &args.json {
        let manifest = RunManifest::new(
            "analyze",
            vec![path_str(&args.game), path_str(&args.outcome)],
            BTreeMap::from([
                ("eps_price".to_string(), tol.eps_price.to_string()),
                ("eps_flow".to_string(), tol.eps_flow.to_string()),
            ]),
            None,
        );
        let doc = serde_json::json!({ "manifest": manifest, "report": report });
        files::write_json(path, &doc).map_err(invalid)?;
    }
    if let Some(path) = &args.dot {
        std::fs::write(path, analysis::to_dot(&game, &outcome, &report.cuts))
            .with_context(|| format!("writing {}", path.display()))
            .map_err(invalid)?;
    }
    if report.saturation_violations > 0 {
        return Err(check_failed(anyhow!(
            "{} link(s) violate the saturation rule",
            report.saturation_violations
        )));
    }
    Ok(())
}

pub fn cmd_estimate(args: &EstimateArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let open = |p: &Path| {
        File::open(p)
            .map(BufReader::new)
            .with_context(|| format!("opening {}", p.display()))
            .map_err(invalid)
    };
    let records = ingest::parse_bids(open(&args.bids)?)
        .with_context(|| format!("bid file {}", args.bids.display()))
        .map_err(invalid)?;
    let limits = ingest::parse_transit_limits(open(&args.limits)?)
        .with_context(|| format!("transit file {}", args.limits.display()))
        .map_err(invalid)?;
    let options = BuildOptions {
        gamma_scaling: !args.no_gamma_scaling,
        price_window: args.price_window,
    };
    let (game, audit) = ingest::build_game(&records, &limits, &options).map_err(invalid)?;

    let mut flags = BTreeMap::from([(
        "gamma_scaling".to_string(),
        options.gamma_scaling.to_string(),
    )]);
    if let Some(w) = options.price_window {
        flags.insert("price_window".into(), format!("{}:{}", w.min, w.max));
    }
    let manifest = RunManifest::new(
        "estimate",
        vec![path_str(&args.bids), path_str(&args.limits)],
        flags,
        None,
    );
    files::write_json(
        &args.output,
        &GameFile::from_game(&game, Some(manifest.clone())),
    )
    .map_err(invalid)?;
    let audit_path = args
        .audit
        .clone()
        .unwrap_or_else(|| args.output.with_extension("audit.json"));
    files::write_json(
        &audit_path,
        &serde_json::json!({ "manifest": manifest, "estimates": audit }),
    )
    .map_err(invalid)?;

    let mut text = format!(
        "{:<8} {:>12} {:>10} {:>6} {:>10}\n",
        "zone", "alpha", "beta", "R2", "producers"
    );
    for z in &audit.zones {
        text.push_str(&format!(
            "{:<8} {:>12.2} {:>10.2} {:>6.3} {:>10}\n",
            z.zone, z.demand.alpha, z.demand.beta, z.demand.r_squared, z.producers
        ));
    }
    text.push_str(&format!(
        "{} markets, {} producers, {} links\nwrote {} and {}\n",
        game.n_markets(),
        game.n_producers(),
        game.n_links(),
        args.output.display(),
        audit_path.display()
    ));
    write_out(out, &text)
}

pub fn cmd_report(args: &ReportArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let outcomes = args
        .outcomes
        .iter()
        .map(|p| {
            files::read_json::<OutcomeFile>(p)
                .with_context(|| format!("outcome file {}", p.display()))
                .map_err(invalid)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let first = &outcomes[0];
    for (o, p) in outcomes.iter().zip(&args.outcomes).skip(1) {
        if o.markets != first.markets || o.links != first.links {
            return Err(invalid(anyhow!(
                "{} describes a different network than {}",
                p.display(),
                args.outcomes[0].display()
            )));
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["quantity".to_string(), "id".to_string()];
    header.extend(args.outcomes.iter().map(|p| {
        p.file_stem()
            .map_or_else(|| path_str(p), |s| s.to_string_lossy().into_owned())
    }));
    let csv_err = |e: csv::Error| invalid(e);
    w.write_record(&header).map_err(csv_err)?;
    type Column = fn(&OutcomeFile) -> &Vec<f64>;
    let rows: [(&str, &Vec<String>, Column); 4] = [
        ("price", &first.markets, |o| &o.prices),
        ("z", &first.markets, |o| &o.z),
        ("flow", &first.links, |o| &o.y),
        ("net_inflow", &first.markets, |o| &o.net_inflow),
    ];
    for (name, ids, get) in rows {
        for (k, id) in ids.iter().enumerate() {
            let mut record = vec![name.to_string(), id.clone()];
            record.extend(outcomes.iter().map(|o| get(o)[k].to_string()));
            w.write_record(&record).map_err(csv_err)?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| invalid(anyhow!(e.to_string())))?;
    match &args.output {
        Some(path) => std::fs::write(path, &bytes)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(invalid),
        None => out.write_all(&bytes).map_err(|e| invalid(anyhow!(e))),
    }
}
