use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use qdtree::exec::init_workers_from_env;
use qdtree::extensions::{build_overlap, build_two_tree, Builder, OverlapLayout, TwoTreeConfig};
use qdtree::greedy::{greedy_build, GreedyConfig};
use qdtree::harness::{baseline_partition, generate, oracle_opt, BaselineSpec, GeneratorSpec, Layout};
use qdtree::model::{cuts_from_json, cuts_to_json, read_csv, write_csv, write_csv_with_blocks};
use qdtree::woodblock::{train_with, RlConfig, CURVE_HEADER};
use qdtree::{candidate_cuts, Cut, Dataset, Schema, SkipReport, Workload};

/// Workload-aware data layouts with query-data routing trees.
///
/// The worker count for parallel stages is read from QDTREE_WORKERS.
#[derive(Parser)]
#[command(name = "qdtree", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a dataset and workload into a directory.
    Gen(GenArgs),
    /// Print the candidate cuts of a workload as JSON.
    ExtractCuts(ExtractArgs),
    /// Build a layout.
    Build(BuildArgs),
    /// Write the dataset with a BID column per stored copy.
    RouteData(RouteDataArgs),
    /// Print the blocks each query reads.
    RouteQuery(RouteQueryArgs),
    /// Report rows accessed by a workload under a layout.
    Eval(EvalArgs),
    /// Exhaustively search for the best tree on a small instance.
    Oracle(OracleArgs),
    /// Run every partitioner and emit a comparison CSV.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Microbench,
    Propeller,
    Uniform,
    Clustered,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    #[arg(long, default_value_t = 100_000)]
    rows: usize,
    /// Arm size for the propeller dataset.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    columns: usize,
    #[arg(long, default_value_t = 1000)]
    domain: u32,
    #[arg(long, default_value_t = 8)]
    queries: usize,
    #[arg(long, default_value_t = 4)]
    clusters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Receives schema.json, data.csv and workload.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    workload: PathBuf,
}

#[derive(Args)]
struct CutArgs {
    /// Candidate cuts as JSON; extracted from the workload when absent.
    #[arg(long)]
    cuts_file: Option<PathBuf>,
    /// Include the workload's advanced cuts when extracting.
    #[arg(long)]
    advanced: bool,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    workload: PathBuf,
    #[arg(long)]
    advanced: bool,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Algo {
    Greedy,
    Rl,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Mode {
    Plain,
    Overlap,
    TwoTree,
}

#[derive(Args)]
struct RlArgs {
    #[arg(long, default_value_t = 0.01)]
    sample_ratio: f64,
    #[arg(long, default_value_t = 500)]
    episodes: usize,
    #[arg(long)]
    timeout_s: Option<f64>,
    #[arg(long, default_value_t = 64)]
    hidden_width: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    cuts: CutArgs,
    #[arg(long, value_enum, default_value = "greedy")]
    algo: Algo,
    #[arg(long, value_enum, default_value = "plain")]
    mode: Mode,
    #[arg(long)]
    min_block_size: usize,
    /// Worst-served queries targeted by the second tree.
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    max_iters: usize,
    /// Keep only second-tree blocks touched by the targeted queries.
    #[arg(long)]
    prune: bool,
    #[command(flatten)]
    rl: RlArgs,
    /// Learning-curve CSV (rl only).
    #[arg(long)]
    curve_out: Option<PathBuf>,
    /// Final policy parameters as JSON (rl only).
    #[arg(long)]
    policy_out: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RouteDataArgs {
    #[arg(long)]
    layout: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RouteQueryArgs {
    #[arg(long)]
    layout: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    workload: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    layout: PathBuf,
    #[command(flatten)]
    inputs: Inputs,
    /// SkipReport JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-query CSV.
    #[arg(long)]
    query_csv: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    cuts: CutArgs,
    #[arg(long)]
    min_block_size: usize,
    #[arg(long)]
    max_leaves: Option<usize>,
    /// Witness tree.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    cuts: CutArgs,
    #[arg(long)]
    min_block_size: usize,
    #[command(flatten)]
    rl: RlArgs,
    /// Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, s: &str) -> Result<()> {
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn load_schema(path: &Path) -> Result<Schema> {
    Schema::from_json(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_data(schema: &Schema, path: &Path) -> Result<Dataset> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_csv(schema, f).with_context(|| format!("parsing {}", path.display()))
}

fn load_workload(schema: &Schema, path: &Path) -> Result<Workload> {
    Workload::from_json(&read(path)?, schema).with_context(|| format!("parsing {}", path.display()))
}

fn load_inputs(i: &Inputs) -> Result<(Dataset, Workload)> {
    let s = load_schema(&i.schema)?;
    Ok((load_data(&s, &i.data)?, load_workload(&s, &i.workload)?))
}

fn load_layout(path: &Path) -> Result<Layout> {
    Layout::from_json(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_cuts(c: &CutArgs, schema: &Schema, w: &Workload) -> Result<Vec<Cut>> {
    match &c.cuts_file {
        Some(p) => cuts_from_json(&read(p)?, schema, &w.registry).with_context(|| format!("parsing {}", p.display())),
        None => Ok(candidate_cuts(w, c.advanced)),
    }
}

fn rl_config(a: &RlArgs, b: usize) -> RlConfig {
    let mut cfg = RlConfig::new(b);
    cfg.sample_ratio = a.sample_ratio;
    cfg.episodes = a.episodes;
    cfg.timeout = a.timeout_s.map(Duration::from_secs_f64);
    cfg.hidden_width = a.hidden_width;
    cfg.seed = a.seed;
    cfg
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let spec = match a.kind {
        GenKind::Microbench => GeneratorSpec::DisjunctiveMicrobench {
            rows: a.rows,
            seed: a.seed,
        },
        GenKind::Propeller => GeneratorSpec::Propeller { n: a.n, seed: a.seed },
        GenKind::Uniform => GeneratorSpec::Uniform {
            rows: a.rows,
            columns: a.columns,
            domain: a.domain,
            queries: a.queries,
            seed: a.seed,
        },
        GenKind::Clustered => GeneratorSpec::Clustered {
            rows: a.rows,
            columns: a.columns,
            domain: a.domain,
            clusters: a.clusters,
            queries: a.queries,
            seed: a.seed,
        },
    };
    let (data, w) = generate(&spec)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write(&a.out.join("schema.json"), &data.schema().to_json())?;
    write(&a.out.join("workload.json"), &w.to_json())?;
    let path = a.out.join("data.csv");
    write_csv(&data, create(&path)?).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_extract(a: &ExtractArgs) -> Result<()> {
    let s = load_schema(&a.schema)?;
    let w = load_workload(&s, &a.workload)?;
    println!("{}", cuts_to_json(&candidate_cuts(&w, a.advanced)));
    Ok(())
}

fn build_layout(a: &BuildArgs, data: &Dataset, w: &Workload, cuts: Vec<Cut>) -> Result<Layout> {
    let b = a.min_block_size;
    let rl = rl_config(&a.rl, b);
    Ok(match (a.mode, a.algo) {
        (Mode::Plain, Algo::Greedy) => Layout::Tree(
            greedy_build(data, w, &GreedyConfig::new(b, cuts))?
                .route_and_freeze(data)
                .0,
        ),
        (Mode::Plain, Algo::Rl) => {
            let mut curve = match &a.curve_out {
                Some(p) => {
                    let mut f = create(p)?;
                    writeln!(f, "{CURVE_HEADER}")?;
                    Some(f)
                }
                None => None,
            };
            let r = train_with(data, w, &cuts, &rl, |pt| {
                if let Some(f) = curve.as_mut() {
                    let _ = writeln!(f, "{}", pt.csv_line());
                }
            })?;
            if let Some(mut f) = curve {
                f.flush()?;
            }
            if let Some(p) = &a.policy_out {
                write(p, &r.policy.to_json())?;
            }
            Layout::Tree(r.best_tree.route_and_freeze(data).0)
        }
        (Mode::Overlap, algo) => {
            let builder = if algo == Algo::Rl {
                Builder::Rl(rl)
            } else {
                Builder::Greedy
            };
            Layout::Overlap(build_overlap(data, w, &cuts, b, &builder)?)
        }
        (Mode::TwoTree, Algo::Greedy) => {
            let mut cfg = TwoTreeConfig::new(b, cuts, a.k);
            cfg.max_iters = a.max_iters;
            cfg.prune = a.prune;
            Layout::TwoTree(build_two_tree(data, w, &cfg)?)
        }
        (Mode::TwoTree, Algo::Rl) => bail!("two-tree mode is built with the greedy algorithm only"),
    })
}

fn cmd_build(a: &BuildArgs) -> Result<()> {
    let (data, w) = load_inputs(&a.inputs)?;
    let cuts = load_cuts(&a.cuts, data.schema(), &w)?;
    let layout = build_layout(a, &data, &w, cuts)?;
    write(&a.out, &layout.to_json())?;
    let r = layout.evaluate(&data, &w);
    println!("blocks={} access_fraction={}", layout.num_blocks(), r.access_fraction);
    Ok(())
}

fn cmd_route_data(a: &RouteDataArgs) -> Result<()> {
    let layout = load_layout(&a.layout)?;
    let s = load_schema(&a.schema)?;
    let data = load_data(&s, &a.data)?;
    let assignment = layout.route_data(&data);
    write_csv_with_blocks(&data, |i| assignment.blocks_of(i).to_vec(), create(&a.out)?)
        .with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn cmd_route_query(a: &RouteQueryArgs) -> Result<()> {
    let layout = load_layout(&a.layout)?;
    let s = load_schema(&a.schema)?;
    let w = load_workload(&s, &a.workload)?;
    let plans: Vec<_> = w
        .queries
        .iter()
        .enumerate()
        .map(|(i, q)| match &layout {
            Layout::Overlap(o) => json!({
                "query": i,
                "blocks": o.route_query(q).iter().map(|sb| json!({"block": sb.block, "ignore": sb.ignore})).collect::<Vec<_>>(),
            }),
            l => json!({ "query": i, "blocks": l.route_query(q) }),
        })
        .collect();
    println!("{}", serde_json::to_string_pretty(&plans)?);
    Ok(())
}

fn write_reports(r: &SkipReport, json_path: Option<&Path>, csv_path: Option<&Path>) -> Result<()> {
    if let Some(p) = json_path {
        write(p, &r.to_json())?;
    }
    if let Some(p) = csv_path {
        let mut f = create(p)?;
        r.write_query_csv(&mut f)
            .with_context(|| format!("writing {}", p.display()))?;
        f.flush()?;
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let layout = load_layout(&a.layout)?;
    let (data, w) = load_inputs(&a.inputs)?;
    let r = layout.evaluate(&data, &w);
    write_reports(&r, a.report.as_deref(), a.query_csv.as_deref())?;
    println!("access_fraction={}", r.access_fraction);
    if !matches!(layout, Layout::Tree(_)) {
        println!("extra_storage_rows={}", layout.extra_storage_rows(&data));
    }
    Ok(())
}

fn cmd_oracle(a: &OracleArgs) -> Result<()> {
    let (data, w) = load_inputs(&a.inputs)?;
    let cuts = load_cuts(&a.cuts, data.schema(), &w)?;
    let r = oracle_opt(&data, &w, &cuts, a.min_block_size, a.max_leaves)?;
    let tree = r.tree.route_and_freeze(&data).0;
    if let Some(p) = &a.out {
        write(p, &Layout::Tree(tree.clone()).to_json())?;
    }
    let af = Layout::Tree(tree).evaluate(&data, &w).access_fraction;
    println!("c_opt={} states={} access_fraction={}", r.c_opt, r.states, af);
    Ok(())
}

fn cmd_compare(a: &CompareArgs) -> Result<()> {
    let (data, w) = load_inputs(&a.inputs)?;
    let cuts = load_cuts(&a.cuts, data.schema(), &w)?;
    let b = a.min_block_size;
    let mut rows: Vec<(String, usize, f64, u64)> = Vec::new();
    let random = baseline_partition(
        &BaselineSpec::Random {
            block_size: b,
            seed: a.rl.seed,
        },
        &data,
        &w.registry,
    )?;
    rows.push((
        "random".into(),
        random.sizes.len(),
        random.evaluate(&w).access_fraction,
        0,
    ));
    for c in 0..data.schema().len() {
        let l = baseline_partition(
            &BaselineSpec::Range {
                block_size: b,
                column: c,
            },
            &data,
            &w.registry,
        )?;
        let name = format!("range:{}", data.schema().column(c).name);
        rows.push((name, l.sizes.len(), l.evaluate(&w).access_fraction, 0));
    }
    let mut push = |name: &str, l: Layout| {
        let r = l.evaluate(&data, &w);
        rows.push((
            name.into(),
            l.num_blocks(),
            r.access_fraction,
            l.extra_storage_rows(&data),
        ));
    };
    push(
        "greedy",
        Layout::Tree(
            greedy_build(&data, &w, &GreedyConfig::new(b, cuts.clone()))?
                .route_and_freeze(&data)
                .0,
        ),
    );
    let rl = rl_config(&a.rl, b);
    let trained = qdtree::woodblock::train(&data, &w, &cuts, &rl)?;
    push("rl", Layout::Tree(trained.best_tree.route_and_freeze(&data).0));
    let overlap: OverlapLayout = build_overlap(&data, &w, &cuts, b, &Builder::Greedy)?;
    push("greedy+overlap", Layout::Overlap(overlap));
    if w.len() > 1 {
        let k = (w.len() / 4).max(1);
        push(
            "greedy+two_tree",
            Layout::TwoTree(build_two_tree(&data, &w, &TwoTreeConfig::new(b, cuts, k))?),
        );
    }
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    writeln!(out, "method,blocks,access_fraction,extra_storage_rows")?;
    for (name, blocks, af, extra) in rows {
        writeln!(out, "{name},{blocks},{af},{extra}")?;
    }
    out.flush()?;
    Ok(())
}

fn main() -> Result<()> {
    init_workers_from_env();
    match Cli::parse().cmd {
        Cmd::Gen(a) => cmd_gen(&a),
        Cmd::ExtractCuts(a) => cmd_extract(&a),
        Cmd::Build(a) => cmd_build(&a),
        Cmd::RouteData(a) => cmd_route_data(&a),
        Cmd::RouteQuery(a) => cmd_route_query(&a),
        Cmd::Eval(a) => cmd_eval(&a),
        Cmd::Oracle(a) => cmd_oracle(&a),
        Cmd::Compare(a) => cmd_compare(&a),
    }
}
