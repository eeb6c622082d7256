//! Python bindings: graph construction and indicators as native types,
//! larger reports as JSON strings for the caller to parse.

use ndarray::{Array1, Array2};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use specfilt_core::bounds::bound_report;
use specfilt_core::demuf::{self, ModelConfig, Variant};
use specfilt_core::filters::{family_check, filter_homophily, PolynomialFilter};
use specfilt_core::graph::{eigendecompose, normalize, LabeledGraph, NormalizedOperators,
    SpectralDecomposition};
use specfilt_core::indicators::{
    homophily_degree, information_content, interaction_probability, signal_spectrum,
};
use specfilt_core::report::{indicator_report, EIGENVALUE_TIE_TOL};
use specfilt_core::synth::{generate_sbm, FeatureSpec, SbmSpec};
use specfilt_core::validator::{run_suite, TrialConfig};

fn err(e: specfilt_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A labeled graph with its normalized operators and eigendecomposition.
#[pyclass]
struct Graph {
    graph: LabeledGraph,
    ops: NormalizedOperators,
    sd: SpectralDecomposition,
}

#[pymethods]
impl Graph {
    #[new]
    fn new(edges: Vec<(usize, usize)>, labels: Vec<usize>) -> PyResult<Self> {
        let graph = LabeledGraph::from_edges(&edges, &labels).map_err(err)?;
        let ops = normalize(&graph);
        let sd = eigendecompose(&ops).map_err(err)?;
        Ok(Self { graph, ops, sd })
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    #[getter]
    fn class_count(&self) -> usize {
        self.graph.class_count()
    }

    #[getter]
    fn class_sizes(&self) -> Vec<usize> {
        self.graph.class_sizes().to_vec()
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.sd.eigenvalues().to_vec()
    }

    #[getter]
    fn connected_components(&self) -> usize {
        self.graph.connected_components()
    }

    /// Per-class and graph k-homophily degrees.
    fn homophily(&self, k: usize) -> (Vec<f64>, f64) {
        let im = interaction_probability(&self.graph, &self.ops, k);
        let h = homophily_degree(&im, self.graph.class_sizes());
        (h.per_class, h.graph)
    }

    /// (random-walk, symmetric) k-step interaction matrices as row lists.
    #[allow(clippy::type_complexity)]
    fn interaction(&self, k: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let im = interaction_probability(&self.graph, &self.ops, k);
        let rows = |m: &Array2<f64>| -> Vec<Vec<f64>> {
            m.rows().into_iter().map(|r| r.to_vec()).collect()
        };
        (rows(&im.pi), rows(&im.pi_tilde))
    }

    /// Frequency distribution of the label difference y_l - y_m as
    /// (eigenvalues, probabilities), aggregated over eigenvalue ties.
    fn label_spectrum(&self, l: usize, m: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
        self.check_class(l)?;
        self.check_class(m)?;
        let diff = &self.graph.class_indicator(l) - &self.graph.class_indicator(m);
        let spectrum = signal_spectrum(&self.sd, &diff);
        let series = spectrum
            .distribution_by_eigenvalue(self.sd.eigenvalues(), EIGENVALUE_TIE_TOL)
            .map_err(err)?;
        Ok((
            series.iter().map(|(e, _)| *e).collect(),
            series.iter().map(|(_, p)| *p).collect(),
        ))
    }

    fn information_content(&self, l: usize, m: usize) -> PyResult<f64> {
        self.check_class(l)?;
        self.check_class(m)?;
        let diff = &self.graph.class_indicator(l) - &self.graph.class_indicator(m);
        information_content(&signal_spectrum(&self.sd, &diff)).map_err(err)
    }

    /// Binary transformed homophily degree for a filter spec string.
    fn filter_homophily(&self, spec: &str) -> PyResult<f64> {
        let f = PolynomialFilter::parse(spec).map_err(err)?;
        filter_homophily(&f, &self.graph, &self.ops).map_err(err)
    }

    /// Family membership: (in_sg, in_sg1, in_sg2, pass_kind, response_sum).
    fn family_check(&self, spec: &str) -> PyResult<(bool, bool, bool, String, f64)> {
        let f = PolynomialFilter::parse(spec).map_err(err)?;
        let c = family_check(&f, &self.sd);
        Ok((
            c.in_sg,
            c.in_sg1,
            c.in_sg2,
            format!("{:?}", c.pass_kind).to_lowercase(),
            c.response_sum,
        ))
    }

    /// Full bound report (JSON) for a filter on seeded random inputs.
    fn bound_report_json(&self, spec: &str, seed: u64) -> PyResult<String> {
        use rand::prelude::*;
        let f = PolynomialFilter::parse(spec).map_err(err)?;
        let n = self.graph.node_count();
        let mut rng = rand_chacha_seed(seed);
        let x0 = Array1::from_shape_fn(n, |_| rng.gen_range(-5.0..5.0));
        let x1 = Array1::from_shape_fn(n, |_| rng.gen_range(-5.0..5.0));
        let report =
            bound_report(&f, &self.graph, &self.ops, &self.sd, x0, x1).map_err(err)?;
        serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// Indicator report (JSON) with step counts 1..=k_max.
    fn indicator_report_json(&self, k_max: usize) -> PyResult<String> {
        let report =
            indicator_report(&self.graph, &self.ops, Some(&self.sd), k_max).map_err(err)?;
        serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
    }
}

impl Graph {
    fn check_class(&self, c: usize) -> PyResult<()> {
        if c >= self.graph.class_count() {
            return Err(PyValueError::new_err(format!(
                "class {c} out of range for K = {}",
                self.graph.class_count()
            )));
        }
        Ok(())
    }
}

fn rand_chacha_seed(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

/// Runs a validation suite; returns (all_passed, report_json).
#[pyfunction]
#[pyo3(signature = (suite, trials=200, seed=42, n_max=64))]
fn validate(suite: &str, trials: usize, seed: u64, n_max: usize) -> PyResult<(bool, String)> {
    let cfg = TrialConfig {
        trials,
        seed,
        n_range: (8, n_max.max(8)),
        ..TrialConfig::default()
    };
    let report = run_suite(suite, &cfg).map_err(err)?;
    let json =
        serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((report.all_passed, json))
}

/// Draws a stochastic block model; returns (edges, labels, features).
#[pyfunction]
#[pyo3(signature = (n, classes, p_in, p_out, seed=0, feat_dim=16, feat_sep=1.0, feat_noise=1.0))]
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
fn sbm(
    n: usize,
    classes: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
    feat_dim: usize,
    feat_sep: f64,
    feat_noise: f64,
) -> PyResult<(Vec<(usize, usize)>, Vec<usize>, Vec<Vec<f64>>)> {
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
    let (graph, feats) = generate_sbm(&spec).map_err(err)?;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if graph.adjacency()[[i, j]] != 0.0 {
                edges.push((i, j));
            }
        }
    }
    let features = feats.rows().into_iter().map(|r| r.to_vec()).collect();
    Ok((edges, graph.labels().to_vec(), features))
}

/// Trains a learner; returns the metrics report as JSON.
#[pyfunction]
#[pyo3(signature = (edges, labels, features, model="p-demuf", filters=2, depth=2,
                    epochs=200, seed=0, hidden=64, lr=0.01, dropout=0.5))]
#[allow(clippy::too_many_arguments)]
fn train(
    edges: Vec<(usize, usize)>,
    labels: Vec<usize>,
    features: Vec<Vec<f64>>,
    model: &str,
    filters: usize,
    depth: usize,
    epochs: usize,
    seed: u64,
    hidden: usize,
    lr: f64,
    dropout: f64,
) -> PyResult<String> {
    let graph = LabeledGraph::from_edges(&edges, &labels).map_err(err)?;
    let n = features.len();
    let d = features.first().map_or(0, |r| r.len());
    let flat: Vec<f64> = features.into_iter().flatten().collect();
    let feats = Array2::from_shape_vec((n, d), flat)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let variant: Variant = model.parse().map_err(err)?;
    let cfg = ModelConfig {
        variant,
        filters,
        depth,
        epochs,
        seed,
        hidden,
        learning_rate: lr,
        dropout,
        ..ModelConfig::default()
    };
    let report = demuf::train(&graph, &feats, &cfg).map_err(err)?;
    serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyfunction]
fn version() -> &'static str {
    specfilt_core::VERSION
}

#[pymodule]
fn specfilt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Graph>()?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(sbm, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(version, m)?)?;
    Ok(())
}
