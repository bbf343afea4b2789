use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use commdet::checkpoint::ModelKind;
use commdet::experiment::{
    cmd_eval, cmd_infer_bench, cmd_scaling, cmd_train, gradcheck_suite, ExperimentSpec, RunReport,
    ScalingSpec,
};
use commdet::TrainingConfig;

/// Community detection by modularity-matrix reconstruction.
#[derive(Parser)]
#[command(name = "commdet", version)]
struct Cli {
    /// Log verbosity (error, warn, info, debug).
    #[arg(long, global = true, default_value = "warn")]
    log: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model per seed, cluster and score it.
    Train {
        #[command(flatten)]
        spec: SpecArgs,
        /// Output directory for the report, checkpoints and assignments.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cluster and score a dataset with a saved checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Held-out inference latency and accuracy for plain and attention variants.
    InferBench {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-epoch training time on growing planted-partition graphs.
    Scaling {
        /// Graph sizes, strictly ascending.
        #[arg(long, value_delimiter = ',', default_value = "1000,2000,4000,8000")]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 10.0)]
        degree: f64,
        /// Model kinds to time.
        #[arg(long, value_delimiter = ',', default_value = "twostage")]
        kinds: Vec<String>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, value_delimiter = ',')]
        layer_dims: Option<Vec<usize>>,
        #[arg(long)]
        minibatch_size: Option<usize>,
        #[arg(long)]
        neighbor_samples: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference checks of both reconstruction losses.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

/// Experiment keys; flags override the config file.
#[derive(Args)]
struct SpecArgs {
    /// Key-value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    edges: Option<String>,
    #[arg(long)]
    features: Option<String>,
    #[arg(long)]
    labels: Option<String>,
    /// Use a planted-partition graph with this many nodes.
    #[arg(long)]
    synthetic_nodes: Option<String>,
    #[arg(long)]
    synthetic_degree: Option<String>,
    #[arg(long)]
    graph_seed: Option<String>,
    /// onestage, twostage or gae.
    #[arg(long)]
    model: Option<String>,
    /// Comma-separated layer widths.
    #[arg(long)]
    layer_dims: Option<String>,
    #[arg(long)]
    learning_rate: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    minibatch_size: Option<String>,
    #[arg(long)]
    neighbor_samples: Option<String>,
    /// identity or tanh.
    #[arg(long)]
    decoder: Option<String>,
    /// Community count, a range such as 2..10, or `labels`.
    #[arg(long)]
    k: Option<String>,
    /// Seeds as a..b, a..=b or a comma list.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    restarts: Option<String>,
    #[arg(long)]
    split_fraction: Option<String>,
    #[arg(long)]
    require_nmi: Option<String>,
    #[arg(long)]
    fine_tune_epochs: Option<String>,
    #[arg(long)]
    fine_tune_lr_factor: Option<String>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl SpecArgs {
    fn resolve(&self) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => ExperimentSpec::load(path)?,
            None => ExperimentSpec::default(),
        };
        let flags = [
            ("edges", &self.edges),
            ("features", &self.features),
            ("labels", &self.labels),
            ("synthetic_nodes", &self.synthetic_nodes),
            ("synthetic_degree", &self.synthetic_degree),
            ("graph_seed", &self.graph_seed),
            ("model", &self.model),
            ("layer_dims", &self.layer_dims),
            ("learning_rate", &self.learning_rate),
            ("epochs", &self.epochs),
            ("minibatch_size", &self.minibatch_size),
            ("neighbor_samples", &self.neighbor_samples),
            ("decoder", &self.decoder),
            ("k", &self.k),
            ("seeds", &self.seeds),
            ("restarts", &self.restarts),
            ("split_fraction", &self.split_fraction),
            ("require_nmi", &self.require_nmi),
            ("fine_tune_epochs", &self.fine_tune_epochs),
            ("fine_tune_lr_factor", &self.fine_tune_lr_factor),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                spec.apply(key, v).with_context(|| format!("--{}", key.replace('_', "-")))?;
            }
        }
        for kv in &self.set {
            let Some((key, value)) = kv.split_once('=') else {
                bail!("--set expects KEY=VALUE, got {kv:?}");
            };
            spec.apply(key.trim(), value)?;
        }
        Ok(spec)
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

fn print_report(report: &RunReport) {
    println!("seed\tk\tQ\tNMI\tAC");
    for s in &report.seeds {
        println!("{}\t{}\t{:.4}\t{}\t{}", s.seed, s.k, s.q, fmt_opt(s.nmi), fmt_opt(s.accuracy));
    }
    let m = &report.summary;
    println!(
        "median Q {:.4} best Q {:.4} median NMI {} best NMI {}",
        m.median_q,
        m.best_q,
        fmt_opt(m.median_nmi),
        fmt_opt(m.best_nmi)
    );
    if report.untrained {
        println!("warning: untrained run (epochs = 0)");
    }
    for e in &report.errors {
        println!("error: {e}");
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).init();
    match cli.command {
        Command::Train { spec, out } => {
            let outcome = cmd_train(&spec.resolve()?, out.as_deref())?;
            print_report(&outcome.report);
        }
        Command::Eval { checkpoint, spec, out } => {
            let report = cmd_eval(&spec.resolve()?, &checkpoint, out.as_deref())?;
            if let Some(table) = report.seeds.first().filter(|s| !s.k_table.is_empty()).map(|s| &s.k_table) {
                println!("k\tQ\tinertia");
                for row in table {
                    println!("{}\t{:.4}\t{:.4}", row.k, row.q, row.inertia);
                }
            }
            print_report(&report);
        }
        Command::InferBench { spec, out } => {
            let report = cmd_infer_bench(&spec.resolve()?, out.as_deref())?;
            println!("variant\tlatency_us\tspeedup\tNMI\tfine_tune_s");
            for row in &report.mean {
                println!(
                    "{}\t{:.1}\t{:.2}\t{}\t{:.2}",
                    row.variant,
                    row.mean_latency_us,
                    row.speedup,
                    fmt_opt(row.nmi),
                    row.fine_tune_seconds
                );
            }
            println!("held out {} nodes ({} without stubs skipped)", report.n_held_out, report.n_skipped);
        }
        Command::Scaling { n_list, degree, kinds, repeats, layer_dims, minibatch_size, neighbor_samples, out } => {
            let mut training = TrainingConfig::default();
            if let Some(d) = layer_dims {
                training.layer_dims = d;
            }
            if let Some(p) = minibatch_size {
                training.minibatch_size = p;
            }
            if let Some(k) = neighbor_samples {
                training.neighbor_samples = k;
            }
            let kinds = kinds.iter().map(|k| k.parse::<ModelKind>()).collect::<commdet::Result<Vec<_>>>()?;
            let spec = ScalingSpec { n_list, average_degree: degree, kinds, training, repeats, ..Default::default() };
            let report = cmd_scaling(&spec, out.as_deref())?;
            println!("kind\tN\tseconds");
            for p in &report.points {
                println!("{}\t{}\t{:.5}", p.kind, p.n, p.seconds);
            }
            for s in &report.slopes {
                println!("slope {} {:.3}", s.kind, s.slope);
            }
        }
        Command::Gradcheck { instances, seed, tolerance } => {
            let cases = gradcheck_suite(instances, seed, tolerance)?;
            let mut failed = 0;
            for c in &cases {
                println!(
                    "{}\tinstance {}\tN={}\tF={}\tmax rel error {:.2e}\t{}",
                    c.model,
                    c.instance,
                    c.n_nodes,
                    c.feature_dim,
                    c.report.max_rel_error,
                    if c.report.passed { "ok" } else { "FAIL" }
                );
                failed += usize::from(!c.report.passed);
            }
            if failed > 0 {
                bail!("{failed} of {} gradient checks failed", cases.len());
            }
        }
    }
    Ok(())
}
