//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use eqc_core::analytic::{analytic_point, fit_alpha, LatticeIndex};
use eqc_core::fitting::{fit_exponential, relative_curve};
use eqc_core::flow::{decompose_paths, max_channels, min_cut, FlowProblem};
use eqc_core::monte_carlo::{
    eqc_curve_vs_distance, eqc_curve_vs_p, steepest_rise, theta_curve, StreamPolicy, Terminals,
    DEFAULT_SEPARATION,
};
use eqc_core::percolation::{Thresholds, TrialDraw};
use eqc_core::transform::{crossover_scan_on, ProbabilityAxis, TransformKind};
use eqc_core::{LatticeGraph, LatticeKind, ScenarioMode, ScenarioSpec};
use serde_json::json;

use crate::config::{
    parse_f64_values, parse_u32_values, usage, ConfigFile, Format, UsageError, DEFAULT_EXTENT,
    DEFAULT_SEED, DEFAULT_TRIALS,
};
use crate::exec::Parallel;
use crate::io::{write_json, write_table, AnalyticRow, CurveRow, PairRow, Provenance, ThetaRow};

#[derive(Parser, Debug)]
#[command(
    name = "eqc",
    version,
    about = "Exclusive quantum channels on percolated lattice networks"
)]
pub struct Cli {
    /// `key = value` file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads, 0 for all cores. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Monte Carlo EQC swept over distance or bond probability.
    Simulate(SimulateArgs),
    /// Fit E0 + C0 exp(-gamma d) to a curve file.
    Fit(FitArgs),
    /// Closed-form E0 model, optionally with alpha fitted to an MC curve.
    Analytic(AnalyticArgs),
    /// Paired EQC curves of a lattice transformation and its baseline.
    Transform(TransformArgs),
    /// Largest-cluster fraction next to EQC.
    Theta(ThetaArgs),
    /// Dump a patch, optionally with one sampled trial and its channels, as JSON.
    Graph(GraphArgs),
}

#[derive(Args, Debug, Default)]
pub struct RunArgs {
    /// Patch extent.
    #[arg(long = "L", visible_alias = "extent")]
    pub extent: Option<u32>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Data file; standard output if absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    pub format: Option<Format>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub kind: Option<LatticeKind>,
    /// p2p, inf, ktok or 1tok.
    #[arg(long)]
    pub mode: Option<ScenarioMode>,
    /// Bond probabilities: `x`, `x,y` or `a..b[:step]`.
    #[arg(long)]
    pub p: Option<String>,
    /// Distances, same syntax; default 10.
    #[arg(long)]
    pub d: Option<String>,
    /// Party size for ktok and 1tok.
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub separation: Option<u32>,
    /// common or independent random streams across distances.
    #[arg(long)]
    pub streams: Option<Streams>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Streams(pub StreamPolicy);

impl std::str::FromStr for Streams {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "common" => Ok(Streams(StreamPolicy::Common)),
            "independent" => Ok(Streams(StreamPolicy::Independent)),
            _ => Err(format!("unknown stream policy {s:?} (common|independent)")),
        }
    }
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Curve CSV with x, mean and std_error columns.
    pub curve: PathBuf,
    /// Normalize by the mean at this x before fitting.
    #[arg(long)]
    pub anchor: Option<f64>,
    #[arg(long)]
    pub d_min: Option<f64>,
    #[arg(long)]
    pub d_max: Option<f64>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AnalyticArgs {
    /// square, triangle or hexagon; supplies b, m, alpha and the threshold.
    #[arg(long)]
    pub kind: Option<LatticeKind>,
    #[arg(long)]
    pub b: Option<u32>,
    #[arg(long)]
    pub m: Option<u32>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub p: Option<String>,
    /// Nodes per party.
    #[arg(long)]
    pub k: Option<u32>,
    /// MC curve (x = p) to fit alpha against; fitted alpha replaces --alpha.
    #[arg(long)]
    pub fit_against: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<Format>,
}

#[derive(Args, Debug)]
pub struct TransformArgs {
    /// dhex2tri, dhex-separate, dhex-joint, tdhex2sq, tdhex-joint or tdhex-separate.
    #[arg(long)]
    pub kind: Option<TransformKind>,
    /// Curve to compare against; defaults to the joint use of the source lattice.
    #[arg(long)]
    pub baseline: Option<TransformKind>,
    #[arg(long)]
    pub p: Option<String>,
    /// per-copy: both curves at p. joint: grid values are the joint
    /// double-bond probability p' of a dhex-joint baseline.
    #[arg(long)]
    pub axis: Option<ProbabilityAxis>,
    /// Distance between the two parties in source coordinates; default 9.
    #[arg(long)]
    pub d: Option<u32>,
    #[arg(long)]
    pub mode: Option<ScenarioMode>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug)]
pub struct ThetaArgs {
    #[arg(long)]
    pub kind: Option<LatticeKind>,
    #[arg(long)]
    pub p: Option<String>,
    /// Point-to-point distance of the EQC column; default 10.
    #[arg(long)]
    pub d: Option<u32>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug)]
pub struct GraphArgs {
    #[arg(long)]
    pub kind: Option<LatticeKind>,
    /// Sample one trial at this probability.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub trial: u64,
    /// Also decompose the point-to-point channels at this distance.
    #[arg(long)]
    pub d: Option<u32>,
    #[command(flatten)]
    pub run: RunArgs,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_usage(&e) {
                2
            } else {
                1
            }
        }
    }
}

fn is_usage(e: &anyhow::Error) -> bool {
    use eqc_core::Error as E;
    e.chain().any(|c| {
        c.is::<UsageError>()
            || matches!(
                c.downcast_ref::<E>(),
                Some(
                    E::ZeroExtent
                        | E::InvalidLambda(_)
                        | E::InvalidProbability(_)
                        | E::OutOfDomain { .. }
                        | E::NoNodeAt(..)
                        | E::TooCloseToRim { .. }
                        | E::InvalidScenario(_)
                        | E::NoTrials
                        | E::KindMismatch { .. }
                )
            )
    })
}

struct Settings {
    file: ConfigFile,
    threads: usize,
}

impl Settings {
    fn executor(&self) -> anyhow::Result<Parallel> {
        Parallel::new(self.threads)
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let threads = file.layer("threads", cli.threads)?.unwrap_or(0);
    let s = Settings { file, threads };
    match cli.command {
        Command::Simulate(a) => simulate(&s, a),
        Command::Fit(a) => fit(a),
        Command::Analytic(a) => analytic(&s, a),
        Command::Transform(a) => transform(&s, a),
        Command::Theta(a) => theta(&s, a),
        Command::Graph(a) => graph(&s, a),
    }
}

/// Layered run parameters shared by the sampling commands.
struct Run {
    extent: u32,
    trials: u64,
    seed: u64,
    output: Option<PathBuf>,
    format: Format,
}

impl Run {
    fn resolve(file: &ConfigFile, a: RunArgs) -> anyhow::Result<Self> {
        let trials = file.layer("trials", a.trials)?.unwrap_or(DEFAULT_TRIALS);
        if trials == 0 {
            return Err(usage("trials must be positive"));
        }
        Ok(Run {
            extent: file.layer("L", a.extent)?.unwrap_or(DEFAULT_EXTENT),
            trials,
            seed: file.layer("seed", a.seed)?.unwrap_or(DEFAULT_SEED),
            output: file.layer("output", a.output)?,
            format: file.layer("format", a.format)?.unwrap_or_default(),
        })
    }

    fn provenance(&self, command: &str) -> Provenance {
        Provenance::new(command)
            .with("L", self.extent)
            .with("seed", self.seed)
            .with("trials", self.trials)
    }
}

/// Destination of the data file plus where human-readable lines go: standard
/// output when the data goes to a file, standard error otherwise.
struct Out {
    path: Option<PathBuf>,
}

impl Out {
    fn data(&self) -> anyhow::Result<Box<dyn Write>> {
        Ok(match &self.path {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            )),
            None => Box::new(std::io::stdout().lock()),
        })
    }

    fn say(&self, line: &str) {
        if self.path.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
}

fn required<T>(value: Option<T>, flag: &str) -> anyhow::Result<T> {
    value.ok_or_else(|| usage(format!("missing --{flag}")))
}

fn simulate(s: &Settings, a: SimulateArgs) -> anyhow::Result<()> {
    let f = &s.file;
    let kind: LatticeKind = required(f.layer("kind", a.kind)?, "kind")?;
    let mode = f
        .layer("mode", a.mode)?
        .unwrap_or(ScenarioMode::PointToPoint);
    let ps = required(f.layer_with("p", a.p.as_deref(), parse_f64_values)?, "p")?;
    let ds = f
        .layer_with("d", a.d.as_deref(), parse_u32_values)?
        .unwrap_or_else(|| vec![10]);
    let multi_k = matches!(mode, ScenarioMode::KtoK | ScenarioMode::OneToK);
    let k = f.layer("k", a.k)?.unwrap_or(if multi_k { 2 } else { 1 });
    let separation = f
        .layer("separation", a.separation)?
        .unwrap_or(DEFAULT_SEPARATION);
    let streams = f
        .layer("streams", a.streams)?
        .map_or(StreamPolicy::Common, |s| s.0);
    let run = Run::resolve(f, a.run)?;
    if ps.len() > 1 && ds.len() > 1 {
        return Err(usage("sweep either --p or --d, not both"));
    }
    if !multi_k && k != 1 {
        return Err(usage(format!(
            "--k applies to ktok and 1tok, not {}",
            mode.name()
        )));
    }

    let graph = LatticeGraph::generate(kind, run.extent)?;
    let exec = s.executor()?;
    let template = ScenarioSpec {
        mode,
        d: ds[0],
        k,
        separation,
    };
    let (axis, points) = if ps.len() == 1 {
        let curve = eqc_curve_vs_distance(
            &exec, &graph, &template, ps[0], &ds, run.trials, run.seed, streams,
        )?;
        (
            "d",
            curve
                .into_iter()
                .map(|(d, e)| (f64::from(d), e))
                .collect::<Vec<_>>(),
        )
    } else {
        (
            "p",
            eqc_curve_vs_p(&exec, &graph, &template, &ps, run.trials, run.seed)?,
        )
    };

    let mut prov = run
        .provenance("simulate")
        .with("kind", kind)
        .with("mode", mode.name())
        .with("x", axis);
    if multi_k {
        prov = prov.with("k", k).with("separation", separation);
    }
    prov = match axis {
        "d" => prov.with("p", ps[0]).with("streams", stream_name(streams)),
        _ => prov.with("d", ds[0]),
    };
    let rows: Vec<CurveRow> = points
        .iter()
        .map(|(x, e)| CurveRow {
            x: *x,
            mean: e.mean,
            std_error: e.std_error,
            trials: e.trials,
            n1: e.normalizer,
        })
        .collect();
    let out = Out {
        path: run.output.clone(),
    };
    write_table(out.data()?, &prov, &rows, run.format)?;
    out.say(&format!(
        "{:>8} {:>10} {:>10} {:>4}",
        axis, "EQC", "std_error", "N1"
    ));
    for r in &rows {
        out.say(&format!(
            "{:>8} {:>10.5} {:>10.5} {:>4}",
            r.x, r.mean, r.std_error, r.n1
        ));
    }
    Ok(())
}

fn stream_name(p: StreamPolicy) -> &'static str {
    match p {
        StreamPolicy::Common => "common",
        StreamPolicy::Independent => "independent",
    }
}

fn fit(a: FitArgs) -> anyhow::Result<()> {
    let mut curve = crate::io::read_curve_file(&a.curve)?;
    curve.retain(|c| a.d_min.is_none_or(|lo| c.d >= lo) && a.d_max.is_none_or(|hi| c.d <= hi));
    if let Some(anchor) = a.anchor {
        curve = relative_curve(&curve, anchor)?;
    }
    let result = fit_exponential(&curve)?;
    let out = Out { path: a.output };
    write_json(out.data()?, &result)?;
    Ok(())
}

fn analytic(s: &Settings, a: AnalyticArgs) -> anyhow::Result<()> {
    let f = &s.file;
    let kind: Option<LatticeKind> = f.layer("kind", a.kind)?;
    let base = match kind {
        Some(k) => Some(
            LatticeIndex::for_kind(k).ok_or_else(|| usage(format!("no lattice index for {k}")))?,
        ),
        None => None,
    };
    let b = required(a.b.or(base.map(|i| i.b)), "b")?;
    let m = required(a.m.or(base.map(|i| i.m)), "m")?;
    let threshold = a.threshold.or(base.map(|i| i.threshold)).unwrap_or(0.0);
    let ps = f
        .layer_with("p", a.p.as_deref(), parse_f64_values)?
        .unwrap_or_else(|| (1..=20).map(|i| f64::from(i) / 20.0).collect());
    let k = f.layer("k", a.k)?.unwrap_or(1);
    let output = f.layer("output", a.output)?;
    let format = f.layer("format", a.format)?.unwrap_or_default();
    let out = Out { path: output };

    let mut prov = Provenance::new("analytic")
        .with("b", b)
        .with("m", m)
        .with("k", k);
    let alpha = match &a.fit_against {
        Some(path) => {
            let probe = LatticeIndex::new(b, m, 0.0, threshold)?;
            let curve: Vec<(f64, f64)> = crate::io::read_curve_file(path)?
                .into_iter()
                .filter(|c| c.d > probe.validity_floor())
                .map(|c| (c.d, c.mean))
                .collect();
            let alpha = fit_alpha(b, m, &curve)?;
            out.say(&format!(
                "fitted alpha = {alpha:.4} from {} points",
                curve.len()
            ));
            prov = prov.with("fitted_from", path.display());
            alpha
        }
        None => required(a.alpha.or(base.map(|i| i.alpha)), "alpha")?,
    };
    let index = LatticeIndex::new(b, m, alpha, threshold)?;
    prov = prov.with("alpha", alpha).with("threshold", threshold);
    let rows = ps
        .iter()
        .map(|&p| {
            let pt = analytic_point(&index, p, k)?;
            Ok(AnalyticRow {
                p: pt.p,
                e0: pt.e0,
                extrapolated: pt.extrapolated,
            })
        })
        .collect::<eqc_core::Result<Vec<_>>>()?;
    write_table(out.data()?, &prov, &rows, format)?;
    Ok(())
}

fn transform(s: &Settings, a: TransformArgs) -> anyhow::Result<()> {
    let f = &s.file;
    let kind: TransformKind = required(f.layer("kind", a.kind)?, "kind")?;
    let baseline = a.baseline.unwrap_or(kind.baseline());
    if baseline.source_kind() != kind.source_kind() {
        return Err(usage(format!(
            "{baseline} and {kind} start from different lattices"
        )));
    }
    let ps = f
        .layer_with("p", a.p.as_deref(), parse_f64_values)?
        .unwrap_or_else(|| parse_f64_values("0.45..0.95:0.05").expect("default grid parses"));
    let d = f.layer("d", a.d)?.unwrap_or(9);
    let mode = f
        .layer("mode", a.mode)?
        .unwrap_or(ScenarioMode::PointToPoint);
    let run = Run::resolve(f, a.run)?;
    let source = LatticeGraph::generate(kind.source_kind(), run.extent)?;
    let scenario = ScenarioSpec::new(mode, d);
    let axis = a.axis.unwrap_or_default();
    let scan = crossover_scan_on(
        &s.executor()?,
        &source,
        baseline,
        kind,
        &scenario,
        axis,
        &ps,
        run.trials,
        run.seed,
    )?;

    let prov = run
        .provenance("transform")
        .with("source", kind.source_kind())
        .with("original", baseline)
        .with("transformed", kind)
        .with("mode", mode.name())
        .with("d", d)
        .with("axis", axis);
    let rows: Vec<PairRow> = scan
        .points
        .iter()
        .map(|c| PairRow {
            p: c.p,
            eqc_original: c.original.mean,
            eqc_transformed: c.transformed.mean,
            diff: c.diff,
            diff_stderr: c.diff_stderr,
        })
        .collect();
    let out = Out {
        path: run.output.clone(),
    };
    write_table(out.data()?, &prov, &rows, run.format)?;
    if scan.brackets.is_empty() {
        out.say(&format!("no crossing: {kind} vs {baseline}"));
    }
    for (lo, hi) in &scan.brackets {
        out.say(&format!("crossing in [{lo}, {hi}]"));
    }
    Ok(())
}

fn theta(s: &Settings, a: ThetaArgs) -> anyhow::Result<()> {
    let f = &s.file;
    let kind: LatticeKind = required(f.layer("kind", a.kind)?, "kind")?;
    let ps = required(f.layer_with("p", a.p.as_deref(), parse_f64_values)?, "p")?;
    let d = f.layer("d", a.d)?.unwrap_or(10);
    let run = Run::resolve(f, a.run)?;
    let graph = LatticeGraph::generate(kind, run.extent)?;
    let exec = s.executor()?;
    let thetas = theta_curve(&exec, &graph, &ps, run.trials, run.seed)?;
    let eqcs = eqc_curve_vs_p(
        &exec,
        &graph,
        &ScenarioSpec::point_to_point(d),
        &ps,
        run.trials,
        run.seed,
    )?;
    let rows: Vec<ThetaRow> = thetas
        .iter()
        .zip(&eqcs)
        .map(|((p, t), (_, e))| ThetaRow {
            p: *p,
            theta_p: t.theta_p,
            theta_std_error: t.std_error,
            eqc: e.mean,
            eqc_std_error: e.std_error,
        })
        .collect();
    let prov = run.provenance("theta").with("kind", kind).with("d", d);
    let out = Out {
        path: run.output.clone(),
    };
    write_table(out.data()?, &prov, &rows, run.format)?;
    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.p, r.theta_p)).collect();
    if let Some((lo, hi)) = steepest_rise(&pairs) {
        out.say(&format!("theta rises most steeply in [{lo}, {hi}]"));
    }
    Ok(())
}

fn graph(s: &Settings, a: GraphArgs) -> anyhow::Result<()> {
    let f = &s.file;
    let kind: LatticeKind = required(f.layer("kind", a.kind)?, "kind")?;
    let extent = f.layer("L", a.run.extent)?.unwrap_or(DEFAULT_EXTENT);
    let seed = f.layer("seed", a.run.seed)?.unwrap_or(DEFAULT_SEED);
    let graph = LatticeGraph::generate(kind, extent)?;
    let mut doc = json!({ "graph": graph.to_document() });
    if let Some(p) = a.p {
        let thresholds = Thresholds::uniform(p)?;
        let sample = TrialDraw::new(&thresholds, seed, a.trial).sample(&graph);
        doc["sample"] =
            json!({ "p": p, "seed": seed, "trial": a.trial, "open": sample.open_capacity });
        if let Some(d) = a.d {
            let t = Terminals::place(&graph, &ScenarioSpec::point_to_point(d))?;
            let problem = FlowProblem::from_sample(&graph, &sample, &t.sources, &t.sinks)?;
            let paths: Vec<_> = decompose_paths(&problem)
                .into_iter()
                .map(|c| json!({ "nodes": c.nodes, "edges": c.edges }))
                .collect();
            doc["channels"] = json!({
                "d": d,
                "value": max_channels(&problem).0,
                "normalizer": t.normalizer,
                "paths": paths,
                "min_cut": min_cut(&problem),
            });
        }
    } else if a.d.is_some() {
        return Err(usage("--d needs --p"));
    }
    let out = Out {
        path: f.layer("output", a.run.output)?,
    };
    write_json(out.data()?, &doc)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(args: &[&str]) -> i32 {
        main_with_args(std::iter::once("eqc").chain(args.iter().copied()))
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(code(&["simulate", "--p", "1.0"]), 2);
        assert_eq!(code(&["simulate", "--kind", "pentagon", "--p", "1"]), 2);
        assert_eq!(code(&["transform", "--kind", "hex2tri"]), 2);
        assert_eq!(
            code(&["simulate", "--kind", "square", "--p", "0.5,0.6", "--d", "1..3", "--L", "6"]),
            2
        );
        assert_eq!(
            code(&["simulate", "--kind", "square", "--p", "1.5", "--L", "6", "--trials", "2"]),
            2
        );
        assert_eq!(
            code(&[
                "simulate", "--kind", "square", "--p", "1", "--d", "6", "--L", "6", "--trials", "2"
            ]),
            2
        );
        assert_eq!(code(&["bogus"]), 2);
    }

    #[test]
    fn runtime_errors_exit_1() {
        assert_eq!(code(&["fit", "/nonexistent/curve.csv"]), 1);
    }
}
