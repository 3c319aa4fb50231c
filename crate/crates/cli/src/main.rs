mod exit;
mod manifest;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use exit::{CliError, CliResult};
use manifest::{beside, RunManifest};
use qaembed::bench::{rq1_table, run_rq1_general, run_rq1_stressed, run_rq2, ExperimentConfig, Table};
use qaembed::clique::CliqueEmbedder;
use qaembed::embedding::{metrics, validate};
use qaembed::graph::{break_graph, generate_chimera, generate_er, load_edge_list, save_edge_list, ChimeraSpec};
use qaembed::ising::{random_ising, reference_energy, IsingJson, ReferenceBudget, SaParams};
use qaembed::parameterize::{solve_embedded, solve_pipeline, ChainStrengthSpec, PipelineConfig, PipelineResult};
use qaembed::{Embedder, Embedding, Graph, GreedyEmbedder, GreedyParams, IsingModel};

/// Environment variable naming the directory for outputs without `--out`.
const OUT_DIR_ENV: &str = "QAEMBED_OUT_DIR";

#[derive(Parser)]
#[command(name = "qaembed", version, about = "Minor-embedding and annealing benchmark toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a target topology, a random source graph or an Ising instance.
    #[command(subcommand)]
    Gen(Gen),
    /// Remove a random share of nodes and edges from a graph.
    Break(BreakArgs),
    /// Embed a source graph into a target graph.
    Embed(EmbedArgs),
    /// Check an embedding and print the validation report.
    Validate(ValidateArgs),
    /// Embed, sample and unembed an Ising model.
    Solve(SolveArgs),
    /// Run one of the benchmark experiments.
    Bench(BenchArgs),
    /// Render a CSV table as an SVG plot.
    #[command(subcommand)]
    Report(Report),
}

#[derive(Subcommand)]
enum Gen {
    /// Chimera C_m edge list.
    Chimera {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Erdős–Rényi G(n, p) edge list.
    Er {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ising model with uniform random fields and couplings on a graph.
    Ising {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct BreakArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Share of nodes to remove.
    #[arg(long, default_value_t = 0.0)]
    nodes: f64,
    /// Share of the remaining edges to remove.
    #[arg(long, default_value_t = 0.0)]
    edges: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Greedy,
    Clique,
}

#[derive(Args)]
struct EmbedderArgs {
    #[arg(long, value_enum, default_value_t = Algo::Greedy)]
    algo: Algo,
    /// Non-improving overlap-free passes before the greedy search stops.
    #[arg(long, default_value_t = 10)]
    patience: usize,
    #[arg(long, default_value_t = 1)]
    tries: usize,
    #[arg(long, default_value_t = 1000)]
    max_passes: usize,
    /// Wall-clock budget per try, in seconds.
    #[arg(long)]
    time_budget: Option<f64>,
}

impl EmbedderArgs {
    fn build(&self, target: &Graph) -> Box<dyn Embedder> {
        match self.algo {
            Algo::Greedy => Box::new(GreedyEmbedder::new(GreedyParams {
                chain_length_patience: self.patience,
                tries: self.tries.max(1),
                max_passes: self.max_passes,
                time_budget: self.time_budget.map(Duration::from_secs_f64),
                ..GreedyParams::default()
            })),
            Algo::Clique => Box::new(CliqueEmbedder::for_target(target)),
        }
    }

    fn echo(&self) -> serde_json::Value {
        json!({
            "algo": match self.algo { Algo::Greedy => "greedy", Algo::Clique => "clique" },
            "patience": self.patience,
            "tries": self.tries,
            "max_passes": self.max_passes,
            "time_budget": self.time_budget,
        })
    }
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[command(flatten)]
    embedder: EmbedderArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Embedding JSON; metrics go to `<stem>.metrics.json` beside it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    embedding: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Ising model JSON.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Use this embedding instead of running an embedder.
    #[arg(long)]
    embedding: Option<PathBuf>,
    #[command(flatten)]
    embedder: EmbedderArgs,
    /// Chain-strength prefactor of uniform torque compensation.
    #[arg(long, default_value_t = qaembed::parameterize::DEFAULT_PREFACTOR)]
    prefactor: f64,
    #[arg(long, default_value_t = 1000)]
    reads: usize,
    #[arg(long, default_value_t = 1000)]
    sweeps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Result JSON; per-read rows go to `<stem>.reads.csv` beside it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Rq1a,
    Rq1b,
    Rq2,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(value_enum)]
    experiment: Experiment,
    /// TOML config; missing keys take the desk-scale defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct PlotInput {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    x: String,
    #[arg(long)]
    y: String,
    /// Keep only rows where COLUMN equals VALUE (repeatable).
    #[arg(long = "where", value_name = "COLUMN=VALUE")]
    filters: Vec<String>,
    #[arg(long)]
    title: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Report {
    /// Colored grid of VALUE over (X, Y).
    Heatmap {
        #[command(flatten)]
        input: PlotInput,
        #[arg(long)]
        value: String,
    },
    /// Scatter of Y against X with an optional least-squares line.
    Scatter {
        #[command(flatten)]
        input: PlotInput,
        #[arg(long)]
        ols: bool,
    },
    /// Box summary of Y at each X joined by a median line.
    Line {
        #[command(flatten)]
        input: PlotInput,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}

fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Gen(g) => cmd_gen(g),
        Command::Break(a) => cmd_break(a),
        Command::Embed(a) => cmd_embed(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Report(r) => cmd_report(r),
    }
}

fn out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from)
}

/// Explicit `--out`, or `default_name` inside the default output directory.
fn resolve_out(explicit: Option<PathBuf>, default_name: &str) -> CliResult<PathBuf> {
    let path = explicit.unwrap_or_else(|| out_dir().join(default_name));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(path)
}

/// `<dir>/<stem><suffix>` for a companion file of `path`.
fn companion(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn write_graph(g: &Graph, out: &Path, mut manifest: RunManifest) -> CliResult<()> {
    save_edge_list(g, out)?;
    manifest.add_output(out)?;
    manifest.finish(&beside(out))?;
    println!("{}", out.display());
    Ok(())
}

fn cmd_gen(g: Gen) -> CliResult<()> {
    match g {
        Gen::Chimera { m, out } => {
            let graph = generate_chimera(ChimeraSpec::new(m)?)?;
            let out = resolve_out(out, &format!("chimera_m{m}.edges"))?;
            write_graph(&graph, &out, RunManifest::start(json!({ "m": m }), None))
        }
        Gen::Er { n, p, seed, out } => {
            let graph = generate_er(n, p, seed)?;
            let out = resolve_out(out, &format!("er_n{n}_p{p}_s{seed}.edges"))?;
            write_graph(&graph, &out, RunManifest::start(json!({ "n": n, "p": p }), Some(seed)))
        }
        Gen::Ising { graph, seed, out } => {
            let g = load_edge_list(&graph)?;
            let model = random_ising(&g, seed);
            let out = resolve_out(out, &format!("ising_s{seed}.json"))?;
            std::fs::write(&out, serde_json::to_string_pretty(&model.to_json())? + "\n")?;
            let mut manifest = RunManifest::start(json!({ "graph": graph }), Some(seed));
            manifest.add_output(&out)?;
            manifest.finish(&beside(&out))?;
            println!("{}", out.display());
            Ok(())
        }
    }
}

fn cmd_break(a: BreakArgs) -> CliResult<()> {
    let g = load_edge_list(&a.graph)?;
    let broken = break_graph(&g, a.nodes, a.edges, a.seed)?;
    let out = resolve_out(a.out, "broken.edges")?;
    let manifest = RunManifest::start(json!({ "graph": a.graph, "nodes": a.nodes, "edges": a.edges }), Some(a.seed));
    write_graph(&broken, &out, manifest)
}

fn failure_doc(algo: &str, outcome: &qaembed::EmbedOutcome) -> serde_json::Value {
    json!({
        "success": false,
        "algo": algo,
        "failure": outcome.failure,
        "passes_used": outcome.passes_used,
    })
}

fn cmd_embed(a: EmbedArgs) -> CliResult<()> {
    let h = load_edge_list(&a.source)?;
    let g = load_edge_list(&a.target)?;
    let embedder = a.embedder.build(&g);
    let mut manifest = RunManifest::start(
        json!({ "source": a.source, "target": a.target, "embedder": a.embedder.echo() }),
        Some(a.seed),
    );
    let outcome = embedder.embed(&h, &g, a.seed);
    let Some(e) = outcome.embedding.as_ref().filter(|_| outcome.success) else {
        return Err(CliError::Embedding(failure_doc(embedder.name(), &outcome)));
    };
    let m = metrics(&h, e)?;
    let out = resolve_out(a.out, "embedding.json")?;
    let metrics_path = companion(&out, ".metrics.json");
    std::fs::write(&out, e.to_canonical_json() + "\n")?;
    let doc = json!({
        "success": true,
        "algo": embedder.name(),
        "passes_used": outcome.passes_used,
        "try_index": outcome.try_index,
        "metrics": m,
    });
    std::fs::write(&metrics_path, serde_json::to_string_pretty(&doc)? + "\n")?;
    manifest.add_output(&out)?;
    manifest.add_output(&metrics_path)?;
    manifest.finish(&beside(&out))?;
    println!("{doc}");
    Ok(())
}

fn read_embedding(path: &Path) -> CliResult<Embedding> {
    Ok(Embedding::from_json(&std::fs::read_to_string(path)?)?)
}

fn cmd_validate(a: ValidateArgs) -> CliResult<()> {
    let h = load_edge_list(&a.source)?;
    let g = load_edge_list(&a.target)?;
    let e = read_embedding(&a.embedding)?;
    let report = validate(&h, &g, &e)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if report.valid {
        Ok(())
    } else {
        Err(CliError::Validation("embedding is not valid".into()))
    }
}

fn cmd_solve(a: SolveArgs) -> CliResult<()> {
    let doc: IsingJson = serde_json::from_str(&std::fs::read_to_string(&a.model)?)?;
    let model = IsingModel::from_json(&doc)?;
    let g = load_edge_list(&a.target)?;
    let cfg = PipelineConfig {
        chain_strength: ChainStrengthSpec::utc(a.prefactor),
        sampler: SaParams { reads: a.reads, sweeps: a.sweeps, ..SaParams::default() },
        reference: ReferenceBudget::default(),
    };
    let mut manifest = RunManifest::start(
        json!({
            "model": a.model,
            "target": a.target,
            "embedding": a.embedding,
            "embedder": a.embedder.echo(),
            "prefactor": a.prefactor,
            "reads": a.reads,
            "sweeps": a.sweeps,
        }),
        Some(a.seed),
    );
    let result: PipelineResult = match &a.embedding {
        Some(path) => {
            let e = read_embedding(path)?;
            let reference = reference_energy(&model, &ReferenceBudget {
                sa: SaParams { seed: a.seed, ..cfg.reference.sa.clone() },
                ..cfg.reference.clone()
            })?;
            let mut r = solve_embedded(&model, &g, &e, &cfg, reference, a.seed)?;
            r.embedder = "given".into();
            r
        }
        None => solve_pipeline(&model, &g, a.embedder.build(&g).as_ref(), &cfg, a.seed)?,
    };
    if !result.success {
        return Err(CliError::Embedding(json!({
            "success": false,
            "algo": result.embedder,
            "failure": result.failure,
        })));
    }
    let out = resolve_out(a.out, "result.json")?;
    let reads = companion(&out, ".reads.csv");
    std::fs::write(&out, serde_json::to_string_pretty(&result)? + "\n")?;
    result.write_reads_csv(std::fs::File::create(&reads)?)?;
    manifest.add_output(&out)?;
    manifest.add_output(&reads)?;
    manifest.finish(&beside(&out))?;
    println!("{}", serde_json::to_string(&json!({ "success": true, "summary": result.summary, "metrics": result.metrics }))?);
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> CliResult<()> {
    let cfg = match &a.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let dir = a.out_dir.unwrap_or_else(out_dir);
    let mut manifest = RunManifest::start(serde_json::to_value(&cfg)?, Some(cfg.seed));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let (tables, timing): (Vec<Table>, Vec<&str>) = pool.install(|| -> CliResult<_> {
        Ok(match a.experiment {
            Experiment::Rq1a => (vec![rq1_table("rq1a_rows", &run_rq1_general(&cfg)?)], vec![]),
            Experiment::Rq1b => (run_rq1_stressed(&cfg)?.tables(), vec![]),
            Experiment::Rq2 => (run_rq2(&cfg)?.tables(), vec!["rq2_time.csv"]),
        })
    })?;
    for t in &tables {
        let path = t.write_to_dir(&dir)?;
        manifest.add_output(&path)?;
        println!("{}", path.display());
    }
    manifest.timing_outputs = timing.into_iter().map(String::from).collect();
    manifest.finish(&dir.join("manifest.json"))?;
    Ok(())
}

/// Numeric columns of the selected rows; rows with an empty or non-numeric
/// field in any requested column are skipped.
fn read_columns(input: &PlotInput, cols: &[&str]) -> CliResult<Vec<Vec<f64>>> {
    let mut reader = csv::Reader::from_path(&input.input)?;
    let header = reader.headers()?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Usage(format!("unknown column '{name}' in {}", input.input.display())))
    };
    let idx = cols.iter().map(|c| find(c)).collect::<CliResult<Vec<_>>>()?;
    let mut filters = Vec::new();
    for f in &input.filters {
        let (col, value) = f
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--where expects COLUMN=VALUE, got '{f}'")))?;
        filters.push((find(col)?, value.to_string()));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        if filters.iter().any(|(i, v)| record.get(*i) != Some(v.as_str())) {
            continue;
        }
        let parsed: Option<Vec<f64>> = idx.iter().map(|&i| record.get(i)?.trim().parse().ok()).collect();
        if let Some(values) = parsed.filter(|v| v.iter().all(|x| x.is_finite())) {
            rows.push(values);
        }
    }
    if rows.is_empty() {
        return Err(CliError::Usage(format!("no numeric rows to plot in {}", input.input.display())));
    }
    Ok(rows)
}

fn cmd_report(r: Report) -> CliResult<()> {
    let (input, kind, text) = match &r {
        Report::Heatmap { input, value } => {
            let rows = read_columns(input, &[&input.x, &input.y, value])?;
            let pts: Vec<(f64, f64, f64)> = rows.iter().map(|v| (v[0], v[1], v[2])).collect();
            let title = input.title.clone().unwrap_or_else(|| format!("{value} by {} and {}", input.x, input.y));
            (input, "heatmap", svg::heatmap(&pts, &input.x, &input.y, value, &title))
        }
        Report::Scatter { input, ols } => {
            let rows = read_columns(input, &[&input.x, &input.y])?;
            let pts: Vec<(f64, f64)> = rows.iter().map(|v| (v[0], v[1])).collect();
            let title = input.title.clone().unwrap_or_else(|| format!("{} against {}", input.y, input.x));
            (input, "scatter", svg::scatter(&pts, &input.x, &input.y, &title, *ols))
        }
        Report::Line { input } => {
            let rows = read_columns(input, &[&input.x, &input.y])?;
            let pts: Vec<(f64, f64)> = rows.iter().map(|v| (v[0], v[1])).collect();
            let title = input.title.clone().unwrap_or_else(|| format!("{} by {}", input.y, input.x));
            (input, "line", svg::line(&pts, &input.x, &input.y, &title))
        }
    };
    let out = resolve_out(input.out.clone(), &format!("{kind}.svg"))?;
    std::fs::write(&out, text)?;
    let mut manifest = RunManifest::start(
        json!({ "kind": kind, "in": input.input, "x": input.x, "y": input.y, "where": input.filters }),
        None,
    );
    manifest.add_output(&out)?;
    manifest.finish(&beside(&out))?;
    println!("{}", out.display());
    Ok(())
}
