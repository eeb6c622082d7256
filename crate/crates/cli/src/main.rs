//! Command-line surface: dataset ingestion, indicator/bound reports,
//! theorem validation suites, synthetic data, and model training.
//!
//! Exit codes: 0 on success, 1 on violations or runtime errors, 2 on
//! usage errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use specfilt_core::bounds::{bound_report, reduce_to_binary};
use specfilt_core::demuf::{self, ModelConfig, Variant};
use specfilt_core::filters::PolynomialFilter;
use specfilt_core::graph::{eigendecompose, normalize, LabeledGraph};
use specfilt_core::indicators::signal_spectrum;
use specfilt_core::io;
use specfilt_core::report::{
    indicator_report, AnalysisReport, FilterBoundEntry, GraphSummary, Provenance,
    EIGENVALUE_TIE_TOL,
};
use specfilt_core::synth::{generate_sbm, FeatureSpec, SbmSpec};
use specfilt_core::validator::{run_suite, TrialConfig};

#[derive(Parser)]
#[command(name = "specfilt", version, about = "Spectral graph filter analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct GraphArgs {
    /// Edge list file: one "u v" pair per line, '#' comments.
    #[arg(long)]
    graph: PathBuf,
    /// Label CSV with header "node,label".
    #[arg(long)]
    labels: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Full indicator report, optional per-filter bounds, and plot data.
    Analyze {
        #[command(flatten)]
        graph: GraphArgs,
        /// Interaction/homophily step counts to report (k = 1..=k_max,
        /// default 4).
        #[arg(long)]
        k_max: Option<usize>,
        /// Filter specs (poly:c0,c1,..., geps:<eps>, gcn, gin:<eps>, cheb:<k>);
        /// each adds a bound report on the binary problem.
        #[arg(long = "filter")]
        filters: Vec<String>,
        /// Feature CSV used as bound inputs (defaults to seeded noise).
        #[arg(long)]
        features: Option<PathBuf>,
        /// One-vs-rest reduction class for K > 2 bound reports.
        #[arg(long)]
        reduce: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for frequency-distribution and interaction CSVs.
        #[arg(long)]
        plot_data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Frequency distribution CSV of one signal.
    Spectrum {
        #[command(flatten)]
        graph: GraphArgs,
        /// Signal spec: label-diff:<l>,<m> or class:<k>.
        #[arg(long)]
        signal: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bound report for one filter on a binary (or reduced) problem.
    Bounds {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        filter: String,
        #[arg(long)]
        features: Option<PathBuf>,
        /// One-vs-rest reduction class for K > 2 graphs.
        #[arg(long)]
        reduce: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Randomized theorem-validation suites.
    Validate {
        /// One of interaction, moments, bounds, lowhigh, firstsecond,
        /// filterbank, positivity, all.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        n_min: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train a learner or baseline on graph + features.
    Train {
        /// p-demuf, t-demuf, mlp, or fixed-low.
        #[arg(long)]
        model: String,
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        features: PathBuf,
        /// Number of filter branches N.
        #[arg(long)]
        filters: Option<usize>,
        /// Filter depth h.
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Constraint weight beta (tree variant).
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        dropout: Option<f64>,
        #[arg(long)]
        mlp_layers: Option<usize>,
        /// Ablation: freeze every mask to all-ones.
        #[arg(long)]
        mask_all_ones: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Synthetic dataset generators.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Two-parameter stochastic block model with Gaussian features.
    Sbm {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        classes: usize,
        #[arg(long)]
        p_in: f64,
        #[arg(long)]
        p_out: f64,
        #[arg(long, default_value_t = 16)]
        feat_dim: usize,
        /// Standard deviation of the class means.
        #[arg(long, default_value_t = 1.0)]
        feat_sep: f64,
        /// Standard deviation of the per-node noise.
        #[arg(long, default_value_t = 1.0)]
        feat_noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Writes <prefix>.edges, <prefix>.labels.csv, <prefix>.features.csv.
        #[arg(long)]
        out_prefix: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(passed) => std::process::exit(if passed { 0 } else { 1 }),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}

/// TOML-like key=value overrides: '#' comments, one pair per line.
fn load_config(path: Option<&Path>) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    let Some(path) = path else {
        return Ok(map);
    };
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!(
                "{}:{}: expected key = value, got '{line}'",
                path.display(),
                idx + 1
            );
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn config_get<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|e| anyhow::anyhow!("config key '{key}': {e}")),
    }
}

/// Precedence: explicit CLI flag, then config file, then default.
fn resolve<T: std::str::FromStr + Copy>(
    cli: Option<T>,
    map: &BTreeMap<String, String>,
    key: &str,
    default: T,
) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    Ok(cli.or(config_get(map, key)?).unwrap_or(default))
}

struct LoadedGraph {
    graph: LabeledGraph,
    edges_text: String,
    labels_text: String,
}

fn load_graph(args: &GraphArgs) -> Result<LoadedGraph> {
    let edges_text = io::read_to_string(&args.graph)?;
    let labels_text = io::read_to_string(&args.labels)?;
    let edges = io::parse_edge_list(&edges_text, &args.graph.display().to_string())?;
    let labels = io::parse_labels_csv(&labels_text, &args.labels.display().to_string())?;
    let graph = LabeledGraph::from_edges(&edges, &labels)?;
    Ok(LoadedGraph {
        graph,
        edges_text,
        labels_text,
    })
}

fn emit_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => {
            std::fs::write(path, json.as_bytes())
                .with_context(|| format!("writing {}", path.display()))?;
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn random_inputs(n: usize, seed: u64) -> (Array1<f64>, Array1<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = Array1::from_shape_fn(n, |_| rng.gen_range(-5.0..5.0));
    let x1 = Array1::from_shape_fn(n, |_| rng.gen_range(-5.0..5.0));
    (x0, x1)
}

/// Produces the binary problem inputs for bound reports: feature columns
/// (optionally one-vs-rest reduced) or seeded noise.
#[allow(clippy::type_complexity)]
fn binary_inputs(
    graph: &LabeledGraph,
    features: Option<&Array2<f64>>,
    reduce: Option<usize>,
    seed: u64,
) -> Result<(LabeledGraph, Array1<f64>, Array1<f64>, Option<usize>)> {
    let k = graph.class_count();
    match (k, reduce) {
        (2, None) => {
            let (x0, x1) = match features {
                Some(f) if f.ncols() >= 2 => (f.column(0).to_owned(), f.column(1).to_owned()),
                _ => random_inputs(graph.node_count(), seed),
            };
            Ok((graph.clone(), x0, x1, None))
        }
        (_, Some(class)) => {
            if class >= k {
                bail!("--reduce {class} out of range for K = {k}");
            }
            let feats = match features {
                Some(f) if f.ncols() == k => f.clone(),
                Some(_) => bail!("--reduce needs features with exactly K columns"),
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    Array2::from_shape_fn((graph.node_count(), k), |_| rng.gen_range(-5.0..5.0))
                }
            };
            let red = reduce_to_binary(&feats, graph.labels(), class)?;
            let binary = LabeledGraph::from_adjacency(graph.adjacency().clone(), red.labels)?;
            Ok((binary, red.x0, red.x1, Some(class)))
        }
        (_, None) => bail!("bounds need K = 2 labels or an explicit --reduce class"),
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Analyze {
            graph,
            k_max,
            filters,
            features,
            reduce,
            seed,
            plot_data,
            out,
            config,
        } => {
            let cfgmap = load_config(config.as_deref())?;
            let seed = resolve(seed, &cfgmap, "seed", 42u64)?;
            let k_max = resolve(k_max, &cfgmap, "k_max", 4)?;
            let loaded = load_graph(&graph)?;
            let g = &loaded.graph;
            let ops = normalize(g);
            let sd = eigendecompose(&ops)?;
            let mut notices = Vec::new();
            let indicators = indicator_report(g, &ops, Some(&sd), k_max)?;

            let features_data = match &features {
                Some(path) => {
                    let text = io::read_to_string(path)?;
                    Some(io::parse_features_csv(&text, &path.display().to_string())?)
                }
                None => None,
            };

            let mut bound_entries = Vec::new();
            if !filters.is_empty() {
                if g.class_count() == 1 {
                    notices.push("K = 1: indicators computed, bounds skipped".to_string());
                } else if g.class_count() > 2 && reduce.is_none() {
                    notices.push(format!(
                        "K = {} > 2: pass --reduce <class> for bound reports",
                        g.class_count()
                    ));
                } else {
                    let (bg, x0, x1, reduced) =
                        binary_inputs(g, features_data.as_ref(), reduce, seed)?;
                    let bops = normalize(&bg);
                    let bsd = eigendecompose(&bops)?;
                    for spec in &filters {
                        let f = PolynomialFilter::parse(spec)?;
                        match bound_report(&f, &bg, &bops, &bsd, x0.clone(), x1.clone()) {
                            Ok(report) => bound_entries.push(FilterBoundEntry {
                                filter: spec.clone(),
                                reduced_class: reduced,
                                report,
                            }),
                            Err(e) => notices.push(format!("filter {spec}: {e}")),
                        }
                    }
                }
            }
            if g.connected_components() > 1 {
                notices.push(format!(
                    "graph is disconnected ({} components)",
                    g.connected_components()
                ));
            }

            if let Some(dir) = &plot_data {
                std::fs::create_dir_all(dir)
                    .with_context(|| format!("creating {}", dir.display()))?;
                for (pair, series) in &indicators.label_frequency {
                    let mut csv = String::from("eigenvalue,probability\n");
                    for (e, p) in series.eigenvalues.iter().zip(&series.probabilities) {
                        csv.push_str(&format!("{e},{p}\n"));
                    }
                    io::write_string(&dir.join(format!("label-frequency-{pair}.csv")), &csv)?;
                }
                let mut csv = String::new();
                for row in &indicators.interaction[0] {
                    let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                    csv.push_str(&cells.join(","));
                    csv.push('\n');
                }
                io::write_string(&dir.join("interaction-k1.csv"), &csv)?;
            }

            let report = AnalysisReport {
                graph: GraphSummary::new(g, Some(&sd)),
                indicators,
                bounds: bound_entries,
                notices,
                verdicts: vec![],
                provenance: Provenance::new(Some(seed))
                    .with_input("graph", &loaded.edges_text)
                    .with_input("labels", &loaded.labels_text),
            };
            emit_json(&report, out.as_deref())?;
            Ok(true)
        }

        Command::Spectrum { graph, signal, out } => {
            let loaded = load_graph(&graph)?;
            let g = &loaded.graph;
            let ops = normalize(g);
            let sd = eigendecompose(&ops)?;
            let x = parse_signal(g, &signal)?;
            let spectrum = signal_spectrum(&sd, &x);
            let series = spectrum.distribution_by_eigenvalue(sd.eigenvalues(), EIGENVALUE_TIE_TOL)?;
            let mut csv = String::from("eigenvalue,probability\n");
            for (e, p) in series {
                csv.push_str(&format!("{e},{p}\n"));
            }
            match out {
                Some(path) => io::write_string(&path, &csv)?,
                None => print!("{csv}"),
            }
            Ok(true)
        }

        Command::Bounds {
            graph,
            filter,
            features,
            reduce,
            seed,
            out,
            config,
        } => {
            let cfgmap = load_config(config.as_deref())?;
            let seed = resolve(seed, &cfgmap, "seed", 42u64)?;
            let loaded = load_graph(&graph)?;
            let features_data = match &features {
                Some(path) => {
                    let text = io::read_to_string(path)?;
                    Some(io::parse_features_csv(&text, &path.display().to_string())?)
                }
                None => None,
            };
            let (bg, x0, x1, reduced) =
                binary_inputs(&loaded.graph, features_data.as_ref(), reduce, seed)?;
            let ops = normalize(&bg);
            let sd = eigendecompose(&ops)?;
            let f = PolynomialFilter::parse(&filter)?;
            let report = bound_report(&f, &bg, &ops, &sd, x0, x1)?;
            let wrapped = serde_json::json!({
                "filter": filter,
                "reduced_class": reduced,
                "report": report,
                "provenance": Provenance::new(Some(seed))
                    .with_input("graph", &loaded.edges_text)
                    .with_input("labels", &loaded.labels_text),
            });
            emit_json(&wrapped, out.as_deref())?;
            Ok(true)
        }

        Command::Validate {
            suite,
            trials,
            seed,
            n_max,
            n_min,
            out,
            config,
        } => {
            let cfgmap = load_config(config.as_deref())?;
            let defaults = TrialConfig::default();
            let cfg = TrialConfig {
                trials: resolve(trials, &cfgmap, "trials", defaults.trials)?,
                seed: resolve(seed, &cfgmap, "seed", defaults.seed)?,
                n_range: (
                    resolve(n_min, &cfgmap, "n_min", defaults.n_range.0)?,
                    resolve(n_max, &cfgmap, "n_max", defaults.n_range.1)?,
                ),
                tolerance: resolve(None, &cfgmap, "tolerance", defaults.tolerance)?,
                ..defaults
            };
            let report = run_suite(&suite, &cfg)?;
            for v in &report.verdicts {
                println!(
                    "{}: {} ({} trials, {} skipped, worst margin {:.3e})",
                    v.theorem,
                    if v.passed { "PASS" } else { "FAIL" },
                    v.trials_run,
                    v.skipped,
                    v.worst_margin
                );
            }
            emit_json(&report, out.as_deref())?;
            Ok(report.all_passed)
        }

        Command::Train {
            model,
            graph,
            features,
            filters,
            depth,
            epochs,
            seed,
            hidden,
            lr,
            beta,
            dropout,
            mlp_layers,
            mask_all_ones,
            out,
            config,
        } => {
            let cfgmap = load_config(config.as_deref())?;
            let loaded = load_graph(&graph)?;
            let feats_text = io::read_to_string(&features)?;
            let feats = io::parse_features_csv(&feats_text, &features.display().to_string())?;
            let variant: Variant = model.parse()?;
            let defaults = ModelConfig::default();
            let cfg = ModelConfig {
                variant,
                filters: resolve(filters, &cfgmap, "filters", defaults.filters)?,
                depth: resolve(depth, &cfgmap, "depth", defaults.depth)?,
                hidden: resolve(hidden, &cfgmap, "hidden", defaults.hidden)?,
                mlp_layers: resolve(mlp_layers, &cfgmap, "mlp_layers", defaults.mlp_layers)?,
                learning_rate: resolve(lr, &cfgmap, "lr", defaults.learning_rate)?,
                epochs: resolve(epochs, &cfgmap, "epochs", defaults.epochs)?,
                constraint_weight: resolve(beta, &cfgmap, "beta", defaults.constraint_weight)?,
                dropout: resolve(dropout, &cfgmap, "dropout", defaults.dropout)?,
                seed: resolve(seed, &cfgmap, "seed", defaults.seed)?,
                mask_all_ones,
                ..defaults
            };
            let report = demuf::train(&loaded.graph, &feats, &cfg)?;
            println!(
                "{model}: best val {:.4} (epoch {}), test {:.4}",
                report.best_val_acc, report.best_val_epoch, report.test_accuracy
            );
            emit_json(&report, out.as_deref())?;
            Ok(true)
        }

        Command::Synth(SynthCommand::Sbm {
            n,
            classes,
            p_in,
            p_out,
            feat_dim,
            feat_sep,
            feat_noise,
            seed,
            out_prefix,
        }) => {
            let spec = SbmSpec {
                n,
                classes,
                proportions: vec![],
                p_in,
                p_out,
                seed,
                features: FeatureSpec {
                    dim: feat_dim,
                    separation: feat_sep,
                    noise: feat_noise,
                },
            };
            let (graph, feats) = generate_sbm(&spec)?;
            let prefix = out_prefix.display();
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if graph.adjacency()[[i, j]] != 0.0 {
                        edges.push((i, j));
                    }
                }
            }
            io::write_string(
                &PathBuf::from(format!("{prefix}.edges")),
                &io::edges_to_string(&edges),
            )?;
            io::write_string(
                &PathBuf::from(format!("{prefix}.labels.csv")),
                &io::labels_to_string(graph.labels()),
            )?;
            io::write_string(
                &PathBuf::from(format!("{prefix}.features.csv")),
                &io::features_to_string(&feats),
            )?;
            println!(
                "wrote {prefix}.edges, {prefix}.labels.csv, {prefix}.features.csv ({} edges)",
                edges.len()
            );
            Ok(true)
        }
    }
}

fn parse_signal(graph: &LabeledGraph, spec: &str) -> Result<Array1<f64>> {
    if let Some(rest) = spec.strip_prefix("label-diff:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 2 {
            bail!("label-diff expects two class ids, e.g. label-diff:0,1");
        }
        let l: usize = parts[0].trim().parse().context("bad class id")?;
        let m: usize = parts[1].trim().parse().context("bad class id")?;
        let k = graph.class_count();
        if l >= k || m >= k {
            bail!("class id out of range for K = {k}");
        }
        return Ok(&graph.class_indicator(l) - &graph.class_indicator(m));
    }
    if let Some(rest) = spec.strip_prefix("class:") {
        let k: usize = rest.trim().parse().context("bad class id")?;
        if k >= graph.class_count() {
            bail!("class id out of range for K = {}", graph.class_count());
        }
        return Ok(graph.class_indicator(k));
    }
    bail!("unknown signal spec '{spec}'; expected label-diff:<l>,<m> or class:<k>")
}
