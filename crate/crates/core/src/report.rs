//! Report assembly: indicator reports, analysis reports, and provenance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bounds::BoundReport;
use crate::graph::{LabeledGraph, NormalizedOperators, SpectralDecomposition};
use crate::indicators::{
    homophily_degree, information_content, interaction_sequence, signal_spectrum,
};
use crate::validator::TheoremVerdict;
use crate::Result;

/// Eigenvalue tie tolerance when aggregating frequency mass per eigenvalue.
pub const EIGENVALUE_TIE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub input_hashes: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub tool_version: String,
}

impl Provenance {
    pub fn new(seed: Option<u64>) -> Self {
        Self {
            input_hashes: BTreeMap::new(),
            seed,
            tool_version: crate::VERSION.to_string(),
        }
    }

    pub fn with_input(mut self, name: &str, content: &str) -> Self {
        self.input_hashes
            .insert(name.to_string(), sha256_hex(content.as_bytes()));
        self
    }
}

/// SHA-256 content digest as lowercase hex.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphSummary {
    pub nodes: usize,
    pub edges: usize,
    pub classes: usize,
    pub class_sizes: Vec<usize>,
    pub connected_components: usize,
    pub zero_eigenvalue_multiplicity: Option<usize>,
    pub preclamp_violations: Option<usize>,
}

impl GraphSummary {
    pub fn new(graph: &LabeledGraph, sd: Option<&SpectralDecomposition>) -> Self {
        Self {
            nodes: graph.node_count(),
            edges: graph.edge_count(),
            classes: graph.class_count(),
            class_sizes: graph.class_sizes().to_vec(),
            connected_components: graph.connected_components(),
            zero_eigenvalue_multiplicity: sd.map(|s| s.zero_multiplicity()),
            preclamp_violations: sd.map(|s| s.preclamp_violations()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HomophilyEntry {
    pub k: usize,
    pub per_class: Vec<f64>,
    pub graph: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencySeries {
    pub eigenvalues: Vec<f64>,
    pub probabilities: Vec<f64>,
}

/// Indicator block: interaction matrices indexed by step count (entry i is
/// k = i + 1), homophily degrees, and per-label-difference frequency data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndicatorReport {
    pub interaction: Vec<Vec<Vec<f64>>>,
    pub interaction_symmetric: Vec<Vec<Vec<f64>>>,
    pub homophily: Vec<HomophilyEntry>,
    pub label_frequency: BTreeMap<String, FrequencySeries>,
    pub information_content: BTreeMap<String, f64>,
}

fn matrix_to_rows(m: &ndarray::Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn indicator_report(
    graph: &LabeledGraph,
    ops: &NormalizedOperators,
    sd: Option<&SpectralDecomposition>,
    k_max: usize,
) -> Result<IndicatorReport> {
    let ims = interaction_sequence(graph, ops, k_max);
    let interaction = ims.iter().map(|im| matrix_to_rows(&im.pi)).collect();
    let interaction_symmetric = ims.iter().map(|im| matrix_to_rows(&im.pi_tilde)).collect();
    let homophily = ims
        .iter()
        .map(|im| {
            let h = homophily_degree(im, graph.class_sizes());
            HomophilyEntry {
                k: im.k,
                per_class: h.per_class,
                graph: h.graph,
            }
        })
        .collect();

    let mut label_frequency = BTreeMap::new();
    let mut info = BTreeMap::new();
    if let Some(sd) = sd {
        let kc = graph.class_count();
        for l in 0..kc {
            for m in (l + 1)..kc {
                let diff = &graph.class_indicator(l) - &graph.class_indicator(m);
                let spectrum = signal_spectrum(sd, &diff);
                let series = spectrum.distribution_by_eigenvalue(
                    sd.eigenvalues(),
                    EIGENVALUE_TIE_TOL,
                )?;
                let key = format!("{l}-{m}");
                label_frequency.insert(
                    key.clone(),
                    FrequencySeries {
                        eigenvalues: series.iter().map(|(e, _)| *e).collect(),
                        probabilities: series.iter().map(|(_, p)| *p).collect(),
                    },
                );
                info.insert(key, information_content(&spectrum)?);
            }
        }
    }
    Ok(IndicatorReport {
        interaction,
        interaction_symmetric,
        homophily,
        label_frequency,
        information_content: info,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterBoundEntry {
    pub filter: String,
    pub reduced_class: Option<usize>,
    pub report: BoundReport,
}

/// Top-level analysis record emitted by the command-line `analyze`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub graph: GraphSummary,
    pub indicators: IndicatorReport,
    pub bounds: Vec<FilterBoundEntry>,
    pub notices: Vec<String>,
    pub verdicts: Vec<TheoremVerdict>,
    pub provenance: Provenance,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{eigendecompose, normalize};

    #[test]
    fn sha256_of_known_string() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn indicator_report_round_trips() {
        let g = LabeledGraph::from_edges(&[(0, 1), (1, 2)], &[0, 1, 1]).unwrap();
        let ops = normalize(&g);
        let sd = eigendecompose(&ops).unwrap();
        let report = indicator_report(&g, &ops, Some(&sd), 3).unwrap();
        assert_eq!(report.interaction.len(), 3);
        assert_eq!(report.homophily[0].k, 1);
        assert!((report.homophily[0].graph - 4.0 / 9.0).abs() < 1e-12);
        assert!(report.label_frequency.contains_key("0-1"));
        let series = &report.label_frequency["0-1"];
        assert_eq!(series.eigenvalues.len(), 3);
        let total: f64 = series.probabilities.iter().sum();
        assert!((total - 1.0).abs() < 1e-10);

        let full = AnalysisReport {
            graph: GraphSummary::new(&g, Some(&sd)),
            indicators: report,
            bounds: vec![],
            notices: vec!["indicators only".into()],
            verdicts: vec![],
            provenance: Provenance::new(Some(1)).with_input("edges", "0 1\n1 2\n"),
        };
        let json = serde_json::to_string_pretty(&full).unwrap();
        let parsed: AnalysisReport = serde_json::from_str(&json).unwrap();
        let json2 = serde_json::to_string_pretty(&parsed).unwrap();
        assert_eq!(json, json2);
    }

    #[test]
    fn repeated_eigenvalues_aggregate_in_frequency_series() {
        // Complete graph: eigenvalue 1 with multiplicity m - 1 collapses
        // to a single reported row.
        let mut edges = Vec::new();
        for i in 0..5 {
            for j in (i + 1)..5 {
                edges.push((i, j));
            }
        }
        let g = LabeledGraph::from_edges(&edges, &[0, 0, 0, 1, 1]).unwrap();
        let ops = normalize(&g);
        let sd = eigendecompose(&ops).unwrap();
        let report = indicator_report(&g, &ops, Some(&sd), 1).unwrap();
        let series = &report.label_frequency["0-1"];
        assert_eq!(series.eigenvalues.len(), 2);
        assert!((series.eigenvalues[0]).abs() < 1e-10);
        assert!((series.eigenvalues[1] - 1.0).abs() < 1e-10);
    }
}
