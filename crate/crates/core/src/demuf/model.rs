//! Model parameterizations: the parallel and tree disentangled
//! multi-filter learners plus the two baselines sharing the same head and
//! training loop.
//!
//! Tree variant, one layer per filter k = 1..N with running signal X_0 = X:
//!   S_k = X_{k-1} (.) M'_k          (selection mask)
//!   H_k = (g_eps_k(tilde_L))^{h_k} S_k   (filtered stop branch, emitted)
//!   X_k = X_{k-1} (.) M_k           (residual continues down the tree)
//!   constraint_k = || S_k - H_k ||^2
//! The head sees CONCAT(omega_k H_k). The constraint pulls each filter
//! toward unit response on its branch's occupied frequencies.

use std::rc::Rc;

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::autodiff::{FilterBasis, NodeId, Tape};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    PDemuf,
    TDemuf,
    Mlp,
    FixedLow,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Self::PDemuf => "p-demuf",
            Self::TDemuf => "t-demuf",
            Self::Mlp => "mlp",
            Self::FixedLow => "fixed-low",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p-demuf" => Ok(Self::PDemuf),
            "t-demuf" => Ok(Self::TDemuf),
            "mlp" => Ok(Self::Mlp),
            "fixed-low" => Ok(Self::FixedLow),
            other => Err(Error::Config(format!(
                "unknown model '{other}'; expected p-demuf, t-demuf, mlp, or fixed-low"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Number of filters N (ignored by the baselines).
    pub filters: usize,
    /// Filter depth h; shared across branches.
    pub depth: usize,
    pub hidden: usize,
    /// Final MLP layer count, inclusive of the output projection.
    pub mlp_layers: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Constraint weight beta (tree variant only).
    pub constraint_weight: f64,
    /// Geometric temperature schedule for the relaxed masks.
    pub tau_start: f64,
    pub tau_end: f64,
    pub dropout: f64,
    pub seed: u64,
    pub split: (f64, f64, f64),
    /// Ablation: freeze every mask to all-ones.
    pub mask_all_ones: bool,
    /// Resample the concrete-relaxation noise each epoch; the pinned
    /// gradient-check and smoke-property setups freeze it instead.
    pub resample_noise: bool,
    /// When set, run a gradient check every this many epochs during
    /// training and record the worst relative error.
    pub grad_check_every: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: Variant::PDemuf,
            filters: 2,
            depth: 2,
            hidden: 64,
            mlp_layers: 2,
            learning_rate: 0.01,
            epochs: 200,
            constraint_weight: 1.0,
            tau_start: 1.0,
            tau_end: 0.1,
            dropout: 0.5,
            seed: 0,
            split: (0.6, 0.2, 0.2),
            mask_all_ones: false,
            resample_noise: true,
            grad_check_every: None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let (a, b, c) = self.split;
        if (a + b + c - 1.0).abs() > 1e-9 || a <= 0.0 || b < 0.0 || c < 0.0 {
            return Err(Error::Config("split fractions must sum to 1".into()));
        }
        if self.mlp_layers == 0 {
            return Err(Error::Config("final MLP needs at least one layer".into()));
        }
        if matches!(self.variant, Variant::PDemuf | Variant::TDemuf) && self.filters == 0 {
            return Err(Error::Config("need at least one filter".into()));
        }
        Ok(())
    }

    /// Temperature at a given epoch under the geometric schedule.
    pub fn tau_at(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.tau_start;
        }
        let t = epoch as f64 / (self.epochs - 1) as f64;
        self.tau_start * (self.tau_end / self.tau_start).powf(t)
    }
}

/// One learnable tensor plus its Adam state.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: Array2<f64>,
    pub adam_m: Array2<f64>,
    pub adam_v: Array2<f64>,
}

impl Param {
    fn new(value: Array2<f64>) -> Self {
        let shape = value.dim();
        Self {
            value,
            adam_m: Array2::zeros(shape),
            adam_v: Array2::zeros(shape),
        }
    }
}

/// Index map into the parameter vector.
#[derive(Debug, Clone, Default)]
struct Layout {
    mask_logits: Vec<usize>,
    /// Second mask per layer (tree variant's selection mask).
    select_logits: Vec<usize>,
    branch_weights: Vec<(usize, usize)>,
    epsilons: Vec<usize>,
    omegas: Vec<usize>,
    head: Vec<(usize, usize)>,
}

pub struct Model {
    pub cfg: ModelConfig,
    pub feature_dim: usize,
    pub classes: usize,
    params: Vec<Param>,
    names: Vec<String>,
    layout: Layout,
    basis: Rc<FilterBasis>,
    /// Frozen concrete-relaxation noise, one (d x 2) block per mask.
    frozen_noise: Vec<Array2<f64>>,
}

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-a..a))
}

fn gumbel_noise(rng: &mut ChaCha8Rng, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((d, 2), |_| {
        let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        -(-u.ln()).ln()
    })
}

impl Model {
    pub fn new(
        cfg: ModelConfig,
        feature_dim: usize,
        classes: usize,
        basis: Rc<FilterBasis>,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut params = Vec::new();
        let mut names = Vec::new();
        let mut layout = Layout::default();
        let push = |params: &mut Vec<Param>, names: &mut Vec<String>, name: String, v: Array2<f64>| {
            params.push(Param::new(v));
            names.push(name);
            params.len() - 1
        };

        let n_filters = cfg.filters;
        let mask_count = match cfg.variant {
            Variant::PDemuf => n_filters,
            Variant::TDemuf => n_filters, // pairs handled via select_logits
            _ => 0,
        };

        // Mask logits initialized so the hard mask starts all-ones.
        let mask_init = |rng: &mut ChaCha8Rng, d: usize| {
            let mut l = Array2::<f64>::zeros((d, 2));
            for j in 0..d {
                l[[j, 1]] = 0.5 + rng.gen_range(-0.05..0.05);
            }
            l
        };

        for k in 0..mask_count {
            let id = push(
                &mut params,
                &mut names,
                format!("mask_logits[{k}]"),
                mask_init(&mut rng, feature_dim),
            );
            layout.mask_logits.push(id);
            if matches!(cfg.variant, Variant::TDemuf) {
                let id = push(
                    &mut params,
                    &mut names,
                    format!("select_logits[{k}]"),
                    mask_init(&mut rng, feature_dim),
                );
                layout.select_logits.push(id);
            }
        }

        if matches!(cfg.variant, Variant::PDemuf) {
            for k in 0..n_filters {
                let w = push(
                    &mut params,
                    &mut names,
                    format!("branch_w[{k}]"),
                    xavier(&mut rng, feature_dim, cfg.hidden),
                );
                let b = push(
                    &mut params,
                    &mut names,
                    format!("branch_b[{k}]"),
                    Array2::zeros((1, cfg.hidden)),
                );
                layout.branch_weights.push((w, b));
            }
        }

        if matches!(cfg.variant, Variant::PDemuf | Variant::TDemuf) {
            for k in 0..n_filters {
                // Spread the initial peaks across the spectrum.
                let eps0 = if n_filters == 1 {
                    0.0
                } else {
                    0.5 - k as f64 / (n_filters - 1) as f64
                };
                let id = push(
                    &mut params,
                    &mut names,
                    format!("epsilon[{k}]"),
                    Array2::from_elem((1, 1), eps0),
                );
                layout.epsilons.push(id);
            }
        }

        if matches!(cfg.variant, Variant::TDemuf) {
            for k in 0..n_filters {
                let id = push(
                    &mut params,
                    &mut names,
                    format!("omega[{k}]"),
                    Array2::from_elem((1, 1), 1.0),
                );
                layout.omegas.push(id);
            }
        }

        let head_in = match cfg.variant {
            Variant::PDemuf => n_filters * cfg.hidden,
            Variant::TDemuf => n_filters * feature_dim,
            Variant::Mlp | Variant::FixedLow => feature_dim,
        };
        let mut dims = vec![head_in];
        for _ in 0..cfg.mlp_layers.saturating_sub(1) {
            dims.push(cfg.hidden);
        }
        dims.push(classes);
        for l in 0..dims.len() - 1 {
            let w = push(
                &mut params,
                &mut names,
                format!("head_w[{l}]"),
                xavier(&mut rng, dims[l], dims[l + 1]),
            );
            let b = push(
                &mut params,
                &mut names,
                format!("head_b[{l}]"),
                Array2::zeros((1, dims[l + 1])),
            );
            layout.head.push((w, b));
        }

        let total_masks = layout.mask_logits.len() + layout.select_logits.len();
        let frozen_noise = (0..total_masks)
            .map(|_| gumbel_noise(&mut rng, feature_dim))
            .collect();

        Ok(Self {
            cfg,
            feature_dim,
            classes,
            params,
            names,
            layout,
            basis,
            frozen_noise,
        })
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn basis(&self) -> &Rc<FilterBasis> {
        &self.basis
    }

    /// Parameter ids of the per-branch filter epsilons.
    pub fn epsilon_param_ids(&self) -> &[usize] {
        &self.layout.epsilons
    }

    pub fn learned_epsilons(&self) -> Vec<f64> {
        self.layout
            .epsilons
            .iter()
            .map(|&id| self.params[id].value[[0, 0]])
            .collect()
    }

    /// Deterministic hard mask from logits: category 1 wins strictly,
    /// ties fall back to category 0.
    fn hard_mask(&self, logits_id: usize) -> Array2<f64> {
        let l = &self.params[logits_id].value;
        let d = l.nrows();
        let mut m = Array2::<f64>::zeros((1, d));
        for j in 0..d {
            if l[[j, 1]] > l[[j, 0]] {
                m[[0, j]] = 1.0;
            }
        }
        m
    }

    /// Fraction of ones in each hard mask (mask-then-select order for the
    /// tree variant).
    pub fn mask_densities(&self) -> Vec<f64> {
        let d = self.feature_dim as f64;
        let mut out = Vec::new();
        for &id in self
            .layout
            .mask_logits
            .iter()
            .chain(self.layout.select_logits.iter())
        {
            out.push(self.hard_mask(id).sum() / d);
        }
        out
    }

    /// Builds the forward graph on a fresh tape and returns the logits
    /// node and any constraint-loss nodes.
    pub fn forward(&self, tape: &mut Tape, features: &Array2<f64>, mode: &ForwardMode) -> Forward {
        let x = tape.leaf(features.clone());
        let param_nodes: Vec<NodeId> = self
            .params
            .iter()
            .map(|p| tape.leaf(p.value.clone()))
            .collect();

        let ones = Array2::<f64>::from_elem((1, self.feature_dim), 1.0);
        let mut mask_cursor = 0usize;
        let mut next_mask = |tape: &mut Tape, logits_id: usize| -> NodeId {
            let idx = mask_cursor;
            mask_cursor += 1;
            if self.cfg.mask_all_ones {
                return tape.leaf(ones.clone());
            }
            match mode {
                ForwardMode::Train { tau, noise, .. } => {
                    tape.gumbel_mask(param_nodes[logits_id], noise[idx].clone(), *tau)
                }
                ForwardMode::Eval => tape.leaf(self.hard_mask(logits_id)),
            }
        };

        let mut constraints = Vec::new();
        let head_input = match self.cfg.variant {
            Variant::Mlp | Variant::FixedLow => x,
            Variant::PDemuf => {
                let mut branches = Vec::new();
                for k in 0..self.cfg.filters {
                    let mask = next_mask(tape, self.layout.mask_logits[k]);
                    let masked = tape.col_mask(x, mask);
                    let (w, b) = self.layout.branch_weights[k];
                    let lin = tape.matmul(masked, param_nodes[w]);
                    let lin = tape.add_row(lin, param_nodes[b]);
                    let mut act = tape.relu(lin);
                    if let ForwardMode::Train { dropout, .. } = mode {
                        if let Some(d) = dropout.get(k) {
                            act = tape.dropout(act, d.clone());
                        }
                    }
                    let filtered = tape.spectral_filter(
                        act,
                        param_nodes[self.layout.epsilons[k]],
                        self.cfg.depth,
                        self.basis.clone(),
                    );
                    branches.push(filtered);
                }
                tape.concat_cols(branches)
            }
            Variant::TDemuf => {
                let mut running = x;
                let mut branches = Vec::new();
                for k in 0..self.cfg.filters {
                    let select = next_mask(tape, self.layout.select_logits[k]);
                    let selected = tape.col_mask(running, select);
                    let filtered = tape.spectral_filter(
                        selected,
                        param_nodes[self.layout.epsilons[k]],
                        self.cfg.depth,
                        self.basis.clone(),
                    );
                    constraints.push(tape.sum_sq_diff(selected, filtered));
                    let weighted = tape.scalar_mul(param_nodes[self.layout.omegas[k]], filtered);
                    branches.push(weighted);
                    let carry = next_mask(tape, self.layout.mask_logits[k]);
                    running = tape.col_mask(running, carry);
                }
                tape.concat_cols(branches)
            }
        };

        let head_slot_base = match self.cfg.variant {
            Variant::PDemuf => self.cfg.filters,
            _ => 0,
        };
        let mut h = head_input;
        let layers = self.layout.head.len();
        for (l, &(w, b)) in self.layout.head.iter().enumerate() {
            h = tape.matmul(h, param_nodes[w]);
            h = tape.add_row(h, param_nodes[b]);
            if l + 1 < layers {
                h = tape.relu(h);
                if let ForwardMode::Train { dropout, .. } = mode {
                    if let Some(d) = dropout.get(head_slot_base + l) {
                        h = tape.dropout(h, d.clone());
                    }
                }
            }
        }

        Forward {
            logits: h,
            constraints,
            param_nodes,
        }
    }

    /// Noise blocks for one training step: frozen or freshly sampled.
    pub fn noise_for_epoch(&self, rng: &mut ChaCha8Rng) -> Vec<Array2<f64>> {
        if self.cfg.resample_noise {
            (0..self.frozen_noise.len())
                .map(|_| gumbel_noise(rng, self.feature_dim))
                .collect()
        } else {
            self.frozen_noise.clone()
        }
    }

    /// Dropout masks for one training step keyed by consumer slot
    /// (branches then hidden head layers); empty when dropout is 0.
    pub fn dropout_for_epoch(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<Array2<f64>> {
        if self.cfg.dropout <= 0.0 {
            return Vec::new();
        }
        let p = self.cfg.dropout;
        let keep = 1.0 - p;
        let mut out = Vec::new();
        let branch_slots = match self.cfg.variant {
            Variant::PDemuf => self.cfg.filters,
            _ => 0,
        };
        for _ in 0..branch_slots {
            out.push(Array2::from_shape_fn((n, self.cfg.hidden), |_| {
                if rng.gen_range(0.0..1.0) < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            }));
        }
        // Hidden head layers. Slot indices continue after the branches.
        let head_hidden = self.layout.head.len().saturating_sub(1);
        for _ in 0..head_hidden {
            out.push(Array2::from_shape_fn((n, self.cfg.hidden), |_| {
                if rng.gen_range(0.0..1.0) < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            }));
        }
        out
    }
}

/// Per-step forward context.
pub enum ForwardMode {
    Train {
        tau: f64,
        noise: Vec<Array2<f64>>,
        dropout: DropoutSlots,
    },
    Eval,
}

/// Dropout masks indexed by consumer slot; `get` returns None when
/// dropout is disabled.
pub struct DropoutSlots(Vec<Array2<f64>>);

impl DropoutSlots {
    pub fn new(masks: Vec<Array2<f64>>) -> Self {
        Self(masks)
    }

    fn get(&self, slot: usize) -> Option<&Array2<f64>> {
        self.0.get(slot)
    }
}

pub struct Forward {
    pub logits: NodeId,
    pub constraints: Vec<NodeId>,
    pub param_nodes: Vec<NodeId>,
}

/// Row-argmax accuracy over an index subset.
pub fn accuracy(logits: &Array2<f64>, labels: &[usize], rows: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let mut correct = 0usize;
    for &r in rows {
        let row = logits.row(r);
        let mut best = 0usize;
        for j in 1..row.len() {
            if row[j] > row[best] {
                best = j;
            }
        }
        if best == labels[r] {
            correct += 1;
        }
    }
    correct as f64 / rows.len() as f64
}

/// Disjoint train/val/test node split with seeded shuffling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn make_split(n: usize, fractions: (f64, f64, f64), seed: u64) -> Split {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(splitseed(seed));
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    let n_train = ((fractions.0 * n as f64).round() as usize).min(n).max(1);
    let n_val = ((fractions.1 * n as f64).round() as usize).min(n - n_train);
    Split {
        train: idx[..n_train].to_vec(),
        val: idx[n_train..n_train + n_val].to_vec(),
        test: idx[n_train + n_val..].to_vec(),
    }
}

fn splitseed(seed: u64) -> u64 {
    seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(0x5851F42D4C957F2D)
}
