use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use moran_weights::export::{exact_document, limit_document, summary_document, ExactRequest, Metadata};
use moran_weights::limit_law::MixtureLaw;
use moran_weights::model::{generate_pedigree, ModelConfig, SamplingVariant};
use moran_weights::montecarlo::{compare_layers, martingale_check, run_experiment, summarize, ExperimentSpec, SUMMARY_LEVEL};
use moran_weights::verify::{run_suite, Suite};

const USAGE_ERROR: u8 = 1;
const GATE_FAILURE: u8 = 2;

/// Ancestor weights in the m-parental Moran model.
#[derive(Debug, Parser)]
#[command(name = "moran", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run replicate pedigrees to convergence and summarise M_inf.
    Simulate(SimulateArgs),
    /// Exact stationary law of the k-lineage configuration chain.
    Exact(ExactArgs),
    /// Large-population limit law of M_inf.
    Limit(LimitArgs),
    /// Run invariant suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Variant {
    Distinct,
    Independent,
}

impl From<Variant> for SamplingVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Distinct => SamplingVariant::DistinctTuple,
            Variant::Independent => SamplingVariant::IndependentTuple,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Population size N.
    #[arg(long)]
    pop_size: usize,
    /// Parents per offspring m.
    #[arg(long, default_value_t = 2)]
    parents: usize,
    /// Parent sampling: distinct individuals or independent uniform slots.
    #[arg(long, value_enum, default_value_t = Variant::Distinct)]
    variant: Variant,
    /// Number of independent replicates R.
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    /// Track ancestors 1..=l.
    #[arg(long, default_value_t = 1)]
    track: usize,
    /// Stop once every tracked spread L_n - l_n is below this.
    #[arg(long, default_value_t = 1e-9)]
    eps: f64,
    /// Event cap per replicate [default: 100 N^2].
    #[arg(long)]
    max_steps: Option<u64>,
    /// Master seed; replicate seeds are derived from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Highest moment order in the summary.
    #[arg(long, default_value_t = 4)]
    k_max: u32,
    /// Record M_n at these steps (comma separated) into trajectory.csv.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Vec<u64>,
    /// Also write the first replicate's pedigree with this many events to pedigree.csv.
    #[arg(long)]
    export_pedigree: Option<u64>,
    /// Exit with status 2 if any replicate hits the event cap.
    #[arg(long)]
    strict: bool,
    /// Worker threads [default: available cores].
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory for samples.csv and summary.json.
    #[arg(long, env = "MORAN_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct ExactArgs {
    /// Population size N (must exceed k).
    #[arg(long)]
    pop_size: u64,
    /// Number of lineages k.
    #[arg(long)]
    order: u32,
    /// Parents per offspring m.
    #[arg(long, default_value_t = 2)]
    parents: u32,
    /// Rational arithmetic regardless of size.
    #[arg(long)]
    rational: bool,
    /// Solve by principal minors (spanning in-trees) instead of a linear solve.
    #[arg(long)]
    tree_theorem: bool,
    /// Write the JSON document here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LimitArgs {
    /// Parents per offspring m.
    #[arg(long, default_value_t = 2)]
    parents: u32,
    /// Right end of the CDF grid.
    #[arg(long, default_value_t = 10.0)]
    t_max: f64,
    /// Number of CDF grid points.
    #[arg(long, default_value_t = 101)]
    points: usize,
    /// Highest exact moment listed.
    #[arg(long, default_value_t = 6)]
    k_max: u32,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// all, recursion, tree, asymptotics, lumping or limit.
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    format: ReportFormat,
    /// Also write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Gate(String),
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Exact(args) => exact(args),
        Command::Limit(args) => limit(args),
        Command::Verify(args) => verify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(USAGE_ERROR)
        }
        Err(Failure::Gate(msg)) => {
            eprintln!("gate failed: {msg}");
            ExitCode::from(GATE_FAILURE)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => {
            let mut w = create(path)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let model = ModelConfig {
        population_size: args.pop_size,
        parent_count: args.parents,
        variant: args.variant.into(),
        seed: args.seed,
    };
    model.validate()?;
    let mut spec = ExperimentSpec::new(model, args.replicates, args.track);
    spec.epsilon = args.eps;
    if let Some(s) = args.max_steps {
        spec.n_max = s;
    }
    spec.checkpoints = args.checkpoints.clone();
    spec.validate()?;
    if args.k_max == 0 {
        return Err(Failure::Usage("--k-max must be at least 1".into()));
    }
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(Failure::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    fs::create_dir_all(&args.out_dir)
        .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", args.out_dir.display())))?;

    let config = json!({
        "subcommand": "simulate",
        "pop_size": args.pop_size,
        "parents": args.parents,
        "variant": model.variant,
        "replicates": args.replicates,
        "track": args.track,
        "eps": spec.epsilon,
        "max_steps": spec.n_max,
        "seed": args.seed,
        "k_max": args.k_max,
        "checkpoints": spec.checkpoints,
        "strict": args.strict,
    });
    let metadata = Metadata::new(Some(args.seed), config);

    let samples = run_experiment(&spec)?;
    let summary = summarize(&samples, args.k_max);
    let layers = match compare_layers(&samples, args.k_max) {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("note: exact layer skipped: {e}");
            Vec::new()
        }
    };
    let martingale = martingale_check(&samples, SUMMARY_LEVEL);

    let samples_path = args.out_dir.join("samples.csv");
    let mut w = create(&samples_path)?;
    samples.write_csv(&metadata, &mut w)?;
    w.flush()?;
    let summary_path = args.out_dir.join("summary.json");
    emit(
        &pretty(&summary_document(&samples, &summary, &layers, &martingale, &metadata)),
        Some(&summary_path),
    )?;
    if !spec.checkpoints.is_empty() {
        let mut w = create(&args.out_dir.join("trajectory.csv"))?;
        samples.write_trajectories(&metadata, &mut w)?;
        w.flush()?;
    }
    if let Some(steps) = args.export_pedigree {
        let mut rng = ModelConfig {
            seed: spec.replicate_seed(0),
            ..model
        }
        .rng();
        let pedigree = generate_pedigree(&model, steps, &mut rng)?;
        let mut w = create(&args.out_dir.join("pedigree.csv"))?;
        for (key, value) in metadata.lines() {
            writeln!(w, "# {key}: {value}")?;
        }
        pedigree.write_csv(&mut w)?;
        w.flush()?;
    }

    for a in &summary.ancestors {
        let mean = &a.moments[0].estimate;
        println!(
            "ancestor {}: mean M_inf {:.4} [{:.4}, {:.4}], zero fraction {:.4}, KS to limit {:.4}",
            a.ancestor, mean.value, mean.low, mean.high, a.zero_fraction, a.ks_to_limit
        );
    }
    for row in layers.iter().filter(|r| r.flagged) {
        eprintln!("note: {} estimate {:.4} excludes exact {:?}", row.config, row.monte_carlo.value, row.exact);
    }
    println!(
        "{} replicates, {} not converged; wrote {} and {}",
        summary.replicates,
        summary.non_converged,
        samples_path.display(),
        summary_path.display()
    );
    if args.strict && summary.non_converged > 0 {
        return Err(Failure::Gate(format!(
            "{} of {} replicates did not converge within {} events",
            summary.non_converged, summary.replicates, spec.n_max
        )));
    }
    Ok(())
}

fn exact(args: ExactArgs) -> Result<(), Failure> {
    let req = ExactRequest {
        population_size: args.pop_size,
        order: args.order,
        parent_count: args.parents,
        rational: args.rational,
        tree_theorem: args.tree_theorem,
    };
    let doc = exact_document(&req)?;
    emit(&pretty(&doc), args.out.as_deref())
}

fn limit(args: LimitArgs) -> Result<(), Failure> {
    let law = MixtureLaw::new(args.parents)?;
    if !(args.t_max > 0.0) || args.points < 2 {
        return Err(Failure::Usage("--t-max must be positive and --points at least 2".into()));
    }
    let doc = limit_document(&law, args.t_max, args.points, args.k_max);
    let text = match args.format {
        Format::Json => pretty(&doc),
        Format::Csv => {
            let meta = Metadata::new(None, doc["metadata"]["config"].clone());
            let mut s = String::new();
            for (key, value) in meta.lines() {
                s.push_str(&format!("# {key}: {value}\n"));
            }
            s.push_str("t,cdf\n");
            for i in 0..args.points {
                let t = args.t_max * i as f64 / (args.points - 1) as f64;
                s.push_str(&format!("{t:.16e},{:.16e}\n", law.cdf(t)));
            }
            s
        }
    };
    emit(&text, args.out.as_deref())
}

fn verify(args: VerifyArgs) -> Result<(), Failure> {
    let suite: Suite = args.suite.parse()?;
    let reports = run_suite(suite);
    let passed = reports.iter().all(|r| r.passed());
    let doc = json!({
        "metadata": Metadata::new(None, json!({ "subcommand": "verify", "suite": suite })),
        "passed": passed,
        "suites": reports,
    });
    match args.format {
        ReportFormat::Json => emit(&pretty(&doc), None)?,
        ReportFormat::Text => {
            for r in &reports {
                for c in &r.checks {
                    println!("{} [{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, r.suite, c.name, c.detail);
                }
            }
        }
    }
    if let Some(path) = &args.out {
        emit(&pretty(&doc), Some(path))?;
    }
    if passed {
        Ok(())
    } else {
        Err(Failure::Gate(format!("suite {suite} reported failures")))
    }
}
