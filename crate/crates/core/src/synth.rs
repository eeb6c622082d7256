//! Stochastic block model generation with controllable homophily regime
//! and Gaussian class-mean node features.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::LabeledGraph;
use crate::{Error, Result};

/// Two-parameter SBM spec plus the feature model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SbmSpec {
    pub n: usize,
    pub classes: usize,
    /// Relative class proportions; uniform when empty. Every class is
    /// guaranteed at least one node.
    pub proportions: Vec<f64>,
    pub p_in: f64,
    pub p_out: f64,
    pub seed: u64,
    pub features: FeatureSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub dim: usize,
    /// Standard deviation of the per-class mean vectors.
    pub separation: f64,
    /// Standard deviation of the per-node isotropic noise.
    pub noise: f64,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            dim: 16,
            separation: 1.0,
            noise: 1.0,
        }
    }
}

impl SbmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("sbm: n must be positive".into()));
        }
        if self.classes == 0 || self.classes > self.n {
            return Err(Error::Config("sbm: need 1 <= classes <= n".into()));
        }
        for p in [self.p_in, self.p_out] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("sbm: probability {p} outside [0,1]")));
            }
        }
        if !self.proportions.is_empty() {
            if self.proportions.len() != self.classes {
                return Err(Error::Config(
                    "sbm: proportions length must match class count".into(),
                ));
            }
            if self.proportions.iter().any(|&p| p <= 0.0) {
                return Err(Error::Config("sbm: proportions must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Box-Muller standard normal draw.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Deterministic per-seed SBM draw. Labels are assigned in contiguous
/// blocks sized by the proportions; edges are sampled independently with
/// p_in within a class and p_out across classes; features are class mean
/// plus isotropic noise. Isolated nodes are fine (self-loops are forced
/// at graph construction).
pub fn generate_sbm(spec: &SbmSpec) -> Result<(LabeledGraph, Array2<f64>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Block sizes: largest-remainder apportionment with a floor of 1.
    let props: Vec<f64> = if spec.proportions.is_empty() {
        vec![1.0; spec.classes]
    } else {
        spec.proportions.clone()
    };
    let total: f64 = props.iter().sum();
    let mut sizes: Vec<usize> = props
        .iter()
        .map(|p| ((p / total) * spec.n as f64).floor() as usize)
        .collect();
    for s in sizes.iter_mut() {
        *s = (*s).max(1);
    }
    while sizes.iter().sum::<usize>() > spec.n {
        let i = sizes
            .iter()
            .enumerate()
            .max_by_key(|(_, &s)| s)
            .map(|(i, _)| i)
            .unwrap();
        sizes[i] -= 1;
    }
    while sizes.iter().sum::<usize>() < spec.n {
        let i = sizes
            .iter()
            .enumerate()
            .min_by_key(|(_, &s)| s)
            .map(|(i, _)| i)
            .unwrap();
        sizes[i] += 1;
    }

    let mut labels = Vec::with_capacity(spec.n);
    for (class, &s) in sizes.iter().enumerate() {
        labels.extend(std::iter::repeat_n(class, s));
    }

    let mut edges = Vec::new();
    for i in 0..spec.n {
        for j in (i + 1)..spec.n {
            let p = if labels[i] == labels[j] {
                spec.p_in
            } else {
                spec.p_out
            };
            if rng.gen_range(0.0..1.0) < p {
                edges.push((i, j));
            }
        }
    }
    let graph = LabeledGraph::from_edges(&edges, &labels)?;

    let d = spec.features.dim;
    let mut means = Array2::<f64>::zeros((spec.classes, d));
    for k in 0..spec.classes {
        for c in 0..d {
            means[[k, c]] = spec.features.separation * normal(&mut rng);
        }
    }
    let mut features = Array2::<f64>::zeros((spec.n, d));
    for i in 0..spec.n {
        for c in 0..d {
            features[[i, c]] = means[[labels[i], c]] + spec.features.noise * normal(&mut rng);
        }
    }
    Ok((graph, features))
}
