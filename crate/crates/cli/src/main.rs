use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hyperdiffuse::experiment::{
    format_depth_csv, format_spectrum_csv, run_train, Dataset, ExperimentConfig,
};
use hyperdiffuse::{
    build_knn_hypergraph, build_transition, concat_multimodal, experiment, io, Error,
    ErrorCategory, Result, RhoFunction,
};

#[derive(Parser)]
#[command(
    name = "hyperdiffuse",
    version,
    about = "Hypergraph diffusion kernels and SHKC experiments"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replaces the config's seed list with this single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replaces the config's output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Largest vertex count for which dense N x N matrices are formed.
    #[arg(long, global = true)]
    dense_cap: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train every grid point on every split.
    Train,
    /// Accuracy against the number of diffusion steps.
    SweepDepth {
        #[arg(long, value_delimiter = ',', required = true)]
        steps: Vec<usize>,
    },
    /// Stability constants, lemma checks and gap terms as JSON.
    Stability {
        /// Analyse stored parameters instead of training.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Eigenvalue counts of the diffusion operator.
    Spectrum {
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])]
        thresholds: Vec<f64>,
    },
    /// Dense diffusion kernel as CSV.
    Kernel {
        /// Use the learnable kernel with this checkpoint's weights.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Also print the diffusion distance between two vertices.
        #[arg(long, value_delimiter = ',', num_args = 2, value_names = ["I", "J"])]
        distance: Option<Vec<usize>>,
    },
    /// kNN hypergraph from one or more feature files.
    Knn {
        /// Feature CSV; repeat to concatenate one hypergraph per modality.
        #[arg(long, required = true)]
        features: Vec<PathBuf>,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Checks a config's inputs, or a single hypergraph file.
    Validate {
        hypergraph: Option<PathBuf>,
        /// Write the renormalized transition matrix in MatrixMarket format.
        #[arg(long)]
        export_transition: Option<PathBuf>,
        /// Degree exponent for the export (default: first config value, else 0).
        #[arg(long, allow_hyphen_values = true)]
        sigma: Option<f64>,
    },
}

fn exit_code(category: ErrorCategory) -> u8 {
    match category {
        ErrorCategory::Config => 2,
        ErrorCategory::Data => 3,
        ErrorCategory::Numerical => 4,
    }
}

fn load_config(g: &Global) -> Result<ExperimentConfig> {
    let path = g
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs --config".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = g.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(dir) = &g.out_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(cap) = g.dense_cap {
        cfg.dense_cap = cap;
    }
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Train => {
            let cfg = load_config(g)?;
            let data = Dataset::load(&cfg)?;
            for rec in run_train(&cfg, &data)? {
                println!(
                    "{} mean {:.4} std {:.4} over {} splits",
                    rec.config_hash,
                    rec.mean_accuracy,
                    rec.std_accuracy,
                    rec.splits.len()
                );
            }
        }
        Command::SweepDepth { steps } => {
            let cfg = load_config(g)?;
            let data = Dataset::load(&cfg)?;
            let csv = format_depth_csv(&experiment::sweep_depth(&cfg, &data, &steps)?);
            write(&cfg.output_dir.join("depth.csv"), &csv)?;
            print!("{csv}");
        }
        Command::Stability { checkpoint } => {
            let cfg = load_config(g)?;
            let data = Dataset::load(&cfg)?;
            let model = checkpoint
                .map(io::read_checkpoint)
                .transpose()?
                .map(|(_, m)| m);
            let report = experiment::stability(&cfg, &data, model.as_ref())?;
            let json = to_json(&report);
            write(&cfg.output_dir.join("stability.json"), &json)?;
            print!("{json}");
        }
        Command::Spectrum { thresholds } => {
            let cfg = load_config(g)?;
            let data = Dataset::load(&cfg)?;
            let csv = format_spectrum_csv(&experiment::spectrum(&cfg, &data, &thresholds)?);
            write(&cfg.output_dir.join("spectrum.csv"), &csv)?;
            print!("{csv}");
        }
        Command::Kernel {
            checkpoint,
            distance,
        } => {
            let cfg = load_config(g)?;
            let data = Dataset::load(&cfg)?;
            let model = checkpoint
                .map(io::read_checkpoint)
                .transpose()?
                .map(|(_, m)| m);
            let theta = model.as_ref().map(|m| &m.theta);
            let k = experiment::kernel(&cfg, &data, theta)?;
            let path = cfg.output_dir.join("kernel.csv");
            io::write_matrix_csv(&path, &k.values)?;
            println!(
                "{:?} kernel ({n}x{n}) written to {}",
                k.kind,
                path.display(),
                n = k.values.nrows()
            );
            if let Some([i, j]) = distance.as_deref().map(|d| [d[0], d[1]]) {
                let n = k.values.nrows();
                if i >= n || j >= n {
                    return Err(Error::VertexOutOfRange {
                        index: i.max(j),
                        num_vertices: n,
                    });
                }
                println!(
                    "distance({i}, {j}) = {}",
                    k.quadratic_distance(i, j).max(0.0).sqrt()
                );
            }
        }
        Command::Knn {
            features,
            k,
            gamma,
            output,
        } => {
            let parts = features
                .iter()
                .map(|p| build_knn_hypergraph(&io::read_features(p)?, k, gamma))
                .collect::<Result<Vec<_>>>()?;
            let h = concat_multimodal(&parts)?;
            io::write_hypergraph(&output, &h)?;
            println!(
                "{} vertices, {} hyperedges written to {}",
                h.num_vertices(),
                h.num_edges(),
                output.display()
            );
        }
        Command::Validate {
            hypergraph,
            export_transition,
            sigma,
        } => {
            let (h, default_sigma) = match hypergraph {
                Some(path) => {
                    let h = io::read_hypergraph(&path)?;
                    report_hypergraph(&h);
                    (h, 0.0)
                }
                None => validate_config(g)?,
            };
            if let Some(path) = export_transition {
                let rho = RhoFunction::new(sigma.unwrap_or(default_sigma));
                build_transition(&h, rho, true)?.write_matrix_market(&path)?;
                println!("transition matrix written to {}", path.display());
            }
        }
    }
    Ok(())
}

fn validate_config(g: &Global) -> Result<(hyperdiffuse::Hypergraph, f64)> {
    let cfg = load_config(g)?;
    let data = Dataset::load(&cfg)?;
    report_hypergraph(&data.hypergraph);
    println!(
        "features: {} x {}, max row norm {}",
        data.features.num_rows(),
        data.features.num_cols(),
        data.features.max_row_norm()
    );
    if let Some(l) = &data.labels {
        println!(
            "labels: {} labeled, {} classes",
            l.labeled().count(),
            l.num_classes()
        );
    }
    println!("splits: {}", data.splits.len());
    for &sigma in &cfg.sigma {
        build_transition(&data.hypergraph, RhoFunction::new(sigma), true)?;
    }
    println!("grid: {} points", cfg.grid().len());
    Ok((data.hypergraph, cfg.sigma[0]))
}

fn report_hypergraph(h: &hyperdiffuse::Hypergraph) {
    let stats = h.stats();
    println!(
        "hypergraph: {} vertices, {} hyperedges, max edge size {}, max vertex degree {}, {} isolated",
        h.num_vertices(),
        h.num_edges(),
        stats.max_edge_size,
        stats.max_vertex_degree,
        stats.isolated.len()
    );
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("HYPERDIFFUSE_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    if let Some(threads) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.category()))
        }
    }
}
