//! Desk-scale disentangled multi-filter learners.
//!
//! Two variants share a reverse-mode tape, learnable concrete-relaxation
//! feature masks, a learnable peaked second-order filter per branch, and a
//! softmax MLP head: the parallel form filters per-branch MLP embeddings,
//! the tree form peels masked feature subsets off a running signal with a
//! reconstruction constraint per stop branch. Two baselines (plain MLP and
//! a fixed low-pass front end) run through the same head and training loop.

pub mod autodiff;
mod model;
mod train;

pub use model::{
    accuracy, make_split, DropoutSlots, Forward, ForwardMode, Model, ModelConfig, Split, Variant,
};
pub use train::{
    gradient_check, gradient_check_eps_at_zero, pinned_toy, pinned_toy_config, split_for, train,
    EpochMetrics, MetricsReport,
};

#[cfg(test)]
mod tests {
    use super::autodiff::{FilterBasis, Tape};
    use super::*;
    use crate::graph::{eigendecompose, normalize, LabeledGraph};
    use crate::synth::{generate_sbm, FeatureSpec, SbmSpec};
    use ndarray::Array2;
    use std::rc::Rc;

    fn toy_graph() -> (LabeledGraph, Array2<f64>) {
        let spec = SbmSpec {
            n: 8,
            classes: 2,
            proportions: vec![],
            p_in: 0.9,
            p_out: 0.1,
            seed: 5,
            features: FeatureSpec {
                dim: 4,
                separation: 1.5,
                noise: 0.3,
            },
        };
        generate_sbm(&spec).unwrap()
    }

    fn basis_for(graph: &LabeledGraph) -> Rc<FilterBasis> {
        let sd = eigendecompose(&normalize(graph)).unwrap();
        Rc::new(FilterBasis {
            eigenvectors: sd.eigenvectors().clone(),
            eigenvalues: sd.eigenvalues().clone(),
        })
    }

    #[test]
    fn forward_matches_hand_rolled_oracle() {
        // N = 1 branch, all-ones mask, depth 1: the forward pass is
        // filter(relu(X W + b)) through the head, reproducible with plain
        // matrix arithmetic.
        let (graph, features) = toy_graph();
        let basis = basis_for(&graph);
        let cfg = ModelConfig {
            filters: 1,
            depth: 1,
            hidden: 5,
            mlp_layers: 2,
            mask_all_ones: true,
            dropout: 0.0,
            seed: 3,
            ..Default::default()
        };
        let model = Model::new(cfg, 4, 2, basis.clone()).unwrap();
        let mut tape = Tape::new();
        let fwd = model.forward(&mut tape, &features, &ForwardMode::Eval);
        let got = tape.value(fwd.logits).clone();

        // Oracle: rebuild with the same parameter values.
        let params: Vec<Array2<f64>> = model.params().iter().map(|p| p.value.clone()).collect();
        let names = model.param_names();
        let by_name =
            |n: &str| -> &Array2<f64> { &params[names.iter().position(|x| x == n).unwrap()] };
        let lin = features.dot(by_name("branch_w[0]"));
        let mut act = lin.clone();
        for mut row in act.rows_mut() {
            for (v, b) in row.iter_mut().zip(by_name("branch_b[0]").row(0)) {
                *v = (*v + b).max(0.0);
            }
        }
        let eps = by_name("epsilon[0]")[[0, 0]];
        let mut proj = basis.eigenvectors.t().dot(&act);
        for (i, mut row) in proj.rows_mut().into_iter().enumerate() {
            let r = super::autodiff::geps_response(eps, basis.eigenvalues[i]);
            row.mapv_inplace(|v| v * r);
        }
        let filtered = basis.eigenvectors.dot(&proj);
        let mut h = filtered.dot(by_name("head_w[0]"));
        for mut row in h.rows_mut() {
            for (v, b) in row.iter_mut().zip(by_name("head_b[0]").row(0)) {
                *v = (*v + b).max(0.0);
            }
        }
        let mut out = h.dot(by_name("head_w[1]"));
        for mut row in out.rows_mut() {
            for (v, b) in row.iter_mut().zip(by_name("head_b[1]").row(0)) {
                *v += b;
            }
        }
        for (a, b) in got.iter().zip(out.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_depth_branch_reduces_to_plain_mlp_composition() {
        // N = 1, all-ones mask, h = 0: the filter path is the identity,
        // so the logits equal head(branch-mlp(X)) with no spectral term.
        let (graph, features) = toy_graph();
        let basis = basis_for(&graph);
        let cfg = ModelConfig {
            filters: 1,
            depth: 0,
            hidden: 5,
            mlp_layers: 2,
            mask_all_ones: true,
            dropout: 0.0,
            seed: 3,
            ..Default::default()
        };
        let model = Model::new(cfg, 4, 2, basis).unwrap();
        let mut tape = Tape::new();
        let fwd = model.forward(&mut tape, &features, &ForwardMode::Eval);
        let got = tape.value(fwd.logits).clone();

        let params: Vec<Array2<f64>> = model.params().iter().map(|p| p.value.clone()).collect();
        let names = model.param_names();
        let by_name =
            |n: &str| -> &Array2<f64> { &params[names.iter().position(|x| x == n).unwrap()] };
        let relu_rows = |mut m: Array2<f64>, b: &Array2<f64>| {
            for mut row in m.rows_mut() {
                for (v, bias) in row.iter_mut().zip(b.row(0)) {
                    *v = (*v + bias).max(0.0);
                }
            }
            m
        };
        let act = relu_rows(features.dot(by_name("branch_w[0]")), by_name("branch_b[0]"));
        let hidden = relu_rows(act.dot(by_name("head_w[0]")), by_name("head_b[0]"));
        let mut out = hidden.dot(by_name("head_w[1]"));
        for mut row in out.rows_mut() {
            for (v, b) in row.iter_mut().zip(by_name("head_b[1]").row(0)) {
                *v += b;
            }
        }
        for (a, b) in got.iter().zip(out.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let (graph, features) = toy_graph();
        let basis = basis_for(&graph);
        let cfg = pinned_toy_config(Variant::PDemuf);
        let model = Model::new(cfg, 4, 2, basis).unwrap();
        let mut t1 = Tape::new();
        let a = model.forward(&mut t1, &features, &ForwardMode::Eval);
        let mut t2 = Tape::new();
        let b = model.forward(&mut t2, &features, &ForwardMode::Eval);
        assert_eq!(t1.value(a.logits), t2.value(b.logits));
    }

    #[test]
    fn tree_constraint_vanishes_under_unit_response() {
        // With eps = 0 and all eigenvalues at the response peak the filter
        // is the identity, so ||S - H||^2 = 0. A complete graph has
        // spectrum {0, 1 x (m-1)}; restrict the signal to the lambda = 1
        // eigenspace where g_0(1) = 1.
        let mut edges = Vec::new();
        for i in 0..5 {
            for j in (i + 1)..5 {
                edges.push((i, j));
            }
        }
        let graph = LabeledGraph::from_edges(&edges, &[0, 0, 0, 1, 1]).unwrap();
        let sd = eigendecompose(&normalize(&graph)).unwrap();
        let basis = Rc::new(FilterBasis {
            eigenvectors: sd.eigenvectors().clone(),
            eigenvalues: sd.eigenvalues().clone(),
        });
        // Signal living on the lambda = 1 eigenvectors only.
        let mut x = Array2::<f64>::zeros((5, 2));
        for i in 0..5 {
            x[[i, 0]] = sd.eigenvectors()[[i, 1]];
            x[[i, 1]] = sd.eigenvectors()[[i, 3]];
        }
        let cfg = ModelConfig {
            variant: Variant::TDemuf,
            filters: 1,
            depth: 3,
            hidden: 4,
            mask_all_ones: true,
            dropout: 0.0,
            seed: 1,
            ..Default::default()
        };
        let mut model = Model::new(cfg, 2, 2, basis).unwrap();
        // Force eps to 0 (peak at lambda = 1).
        let eps_id = model
            .param_names()
            .iter()
            .position(|n| n == "epsilon[0]")
            .unwrap();
        model.params_mut()[eps_id].value[[0, 0]] = 0.0;
        let mut tape = Tape::new();
        let fwd = model.forward(&mut tape, &x, &ForwardMode::Eval);
        assert_eq!(fwd.constraints.len(), 1);
        assert!(tape.scalar(fwd.constraints[0]) < 1e-20);
    }

    #[test]
    fn tree_constraint_reduces_to_filter_residual() {
        // Single layer, all-ones masks: constraint = ||X - g^h X||^2.
        let (graph, features) = toy_graph();
        let sd = eigendecompose(&normalize(&graph)).unwrap();
        let basis = basis_for(&graph);
        let cfg = ModelConfig {
            variant: Variant::TDemuf,
            filters: 1,
            depth: 2,
            mask_all_ones: true,
            dropout: 0.0,
            seed: 2,
            ..Default::default()
        };
        let model = Model::new(cfg, 4, 2, basis).unwrap();
        let mut tape = Tape::new();
        let fwd = model.forward(&mut tape, &features, &ForwardMode::Eval);
        let got = tape.scalar(fwd.constraints[0]);

        let eps = model.learned_epsilons()[0];
        let filter = crate::filters::NormalizedSecondOrderFilter::new(eps)
            .unwrap()
            .filter();
        let filtered = crate::filters::apply_power(&filter, &sd, 2, &features).unwrap();
        let want: f64 = (&features - &filtered).iter().map(|v| v * v).sum();
        assert!((got - want).abs() < 1e-9 * want.max(1.0));
    }

    #[test]
    fn training_is_seed_deterministic() {
        let (graph, features) = toy_graph();
        let mut cfg = pinned_toy_config(Variant::PDemuf);
        cfg.epochs = 15;
        let a = train(&graph, &features, &cfg).unwrap();
        let b = train(&graph, &features, &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn mlp_fits_linearly_separable_features() {
        // Strongly separated class means, no graph structure needed.
        let spec = SbmSpec {
            n: 40,
            classes: 2,
            proportions: vec![],
            p_in: 0.2,
            p_out: 0.2,
            seed: 11,
            features: FeatureSpec {
                dim: 6,
                separation: 4.0,
                noise: 0.2,
            },
        };
        let (graph, features) = generate_sbm(&spec).unwrap();
        let cfg = ModelConfig {
            variant: Variant::Mlp,
            epochs: 200,
            dropout: 0.0,
            hidden: 16,
            seed: 4,
            ..Default::default()
        };
        let report = train(&graph, &features, &cfg).unwrap();
        assert!(
            report.final_train_acc >= 0.999,
            "train accuracy {}",
            report.final_train_acc
        );
    }

    #[test]
    fn fixed_low_with_zero_depth_equals_mlp() {
        let (graph, features) = toy_graph();
        let mut cfg = pinned_toy_config(Variant::FixedLow);
        cfg.depth = 0;
        cfg.epochs = 10;
        let a = train(&graph, &features, &cfg).unwrap();
        let mut cfg_mlp = cfg.clone();
        cfg_mlp.variant = Variant::Mlp;
        let b = train(&graph, &features, &cfg_mlp).unwrap();
        for (x, y) in a.per_epoch.iter().zip(b.per_epoch.iter()) {
            assert!((x.loss - y.loss).abs() < 1e-12);
            assert_eq!(x.test_acc, y.test_acc);
        }
    }

    #[test]
    fn gradient_check_all_variants() {
        let (graph, features) = pinned_toy();
        for variant in [
            Variant::Mlp,
            Variant::FixedLow,
            Variant::PDemuf,
            Variant::TDemuf,
        ] {
            let cfg = pinned_toy_config(variant);
            let sd = eigendecompose(&normalize(&graph)).unwrap();
            let basis = Rc::new(FilterBasis {
                eigenvectors: sd.eigenvectors().clone(),
                eigenvalues: sd.eigenvalues().clone(),
            });
            let model = Model::new(cfg, features.ncols(), 2, basis).unwrap();
            let rows: Vec<usize> = (0..graph.node_count()).collect();
            let err = gradient_check(&model, &features, graph.labels(), &rows).unwrap();
            assert!(err < 1e-4, "{variant:?}: max rel err {err}");
        }
    }

    #[test]
    fn gradient_check_eps_kink_one_sided() {
        let (graph, features) = pinned_toy();
        let cfg = pinned_toy_config(Variant::PDemuf);
        let sd = eigendecompose(&normalize(&graph)).unwrap();
        let basis = Rc::new(FilterBasis {
            eigenvectors: sd.eigenvectors().clone(),
            eigenvalues: sd.eigenvalues().clone(),
        });
        let model = Model::new(cfg, features.ncols(), 2, basis).unwrap();
        let rows: Vec<usize> = (0..graph.node_count()).collect();
        let err = gradient_check_eps_at_zero(&model, &features, graph.labels(), &rows).unwrap();
        assert!(err < 1e-3, "one-sided err {err}");
    }

    #[test]
    fn learned_response_stays_in_unit_band() {
        let (graph, features) = pinned_toy();
        let mut cfg = pinned_toy_config(Variant::PDemuf);
        cfg.epochs = 40;
        cfg.resample_noise = true;
        let report = train(&graph, &features, &cfg).unwrap();
        let sd = eigendecompose(&normalize(&graph)).unwrap();
        for eps in report.learned_epsilons {
            assert!((-1.0..1.0).contains(&eps), "eps {eps} left (-1, 1)");
            for &l in sd.eigenvalues() {
                let r = super::autodiff::geps_response(eps, l);
                assert!(r <= 1.0 + 1e-12 && r >= -1e-12, "eps {eps} lambda {l}");
            }
        }
    }

    #[test]
    fn epsilon_stays_in_open_interval_under_pressure() {
        // Strongly heterophilic graph drives the filters hard toward the
        // high-frequency end; the projection keeps eps inside (-1, 1).
        let spec = SbmSpec {
            n: 60,
            classes: 2,
            proportions: vec![],
            p_in: 0.02,
            p_out: 0.6,
            seed: 8,
            features: FeatureSpec {
                dim: 8,
                separation: 1.0,
                noise: 2.0,
            },
        };
        let (graph, feats) = generate_sbm(&spec).unwrap();
        let cfg = ModelConfig {
            filters: 2,
            depth: 2,
            hidden: 8,
            epochs: 250,
            seed: 1,
            ..ModelConfig::default()
        };
        let report = train(&graph, &feats, &cfg).unwrap();
        for eps in report.learned_epsilons {
            assert!((-1.0..1.0).contains(&eps), "eps {eps} left (-1, 1)");
        }
    }

    #[test]
    fn loss_is_windowed_non_increasing_on_pinned_toy() {
        let (graph, features) = pinned_toy();
        let mut cfg = pinned_toy_config(Variant::PDemuf);
        cfg.epochs = 80;
        let report = train(&graph, &features, &cfg).unwrap();
        for e in 20..report.per_epoch.len() {
            let now = report.per_epoch[e].loss;
            let then = report.per_epoch[e - 20].loss;
            assert!(
                now <= then + 1e-9,
                "loss rose over window ending at {e}: {then} -> {now}"
            );
        }
    }

    #[test]
    fn grad_check_hook_records_error() {
        let (graph, features) = pinned_toy();
        let mut cfg = pinned_toy_config(Variant::TDemuf);
        cfg.epochs = 25;
        cfg.grad_check_every = Some(10);
        let report = train(&graph, &features, &cfg).unwrap();
        let err = report.grad_check_max_rel_err.unwrap();
        assert!(err < 1e-4, "hooked gradient check {err}");
    }

    #[test]
    fn hard_masks_tie_break_toward_zero() {
        let (graph, _) = toy_graph();
        let basis = basis_for(&graph);
        let cfg = ModelConfig {
            filters: 1,
            seed: 12,
            ..Default::default()
        };
        let mut model = Model::new(cfg, 3, 2, basis).unwrap();
        let id = model
            .param_names()
            .iter()
            .position(|n| n == "mask_logits[0]")
            .unwrap();
        // Exact tie, category 1 ahead, category 0 ahead.
        model.params_mut()[id].value = ndarray::array![[0.3, 0.3], [0.0, 1.0], [1.0, 0.0]];
        let densities = model.mask_densities();
        assert!((densities[0] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_low_underperforms_mlp_on_heterophilic_graphs() {
        // Wrong-pass smoothing destroys the class-mean difference, which
        // concentrates at high frequencies on heterophilic graphs.
        let mut fixed = 0.0;
        let mut mlp = 0.0;
        for seed in [1u64, 2, 3] {
            let spec = SbmSpec {
                n: 200,
                classes: 2,
                proportions: vec![],
                p_in: 0.02,
                p_out: 0.3,
                seed,
                features: FeatureSpec {
                    dim: 16,
                    separation: 1.0,
                    noise: 2.0,
                },
            };
            let (graph, feats) = generate_sbm(&spec).unwrap();
            let base = ModelConfig {
                filters: 2,
                depth: 2,
                hidden: 32,
                epochs: 120,
                seed,
                ..ModelConfig::default()
            };
            let f = ModelConfig {
                variant: Variant::FixedLow,
                ..base.clone()
            };
            let m = ModelConfig {
                variant: Variant::Mlp,
                ..base
            };
            fixed += train(&graph, &feats, &f).unwrap().test_accuracy;
            mlp += train(&graph, &feats, &m).unwrap().test_accuracy;
        }
        assert!(
            fixed / 3.0 + 0.1 < mlp / 3.0,
            "fixed-low {:.4} vs mlp {:.4}",
            fixed / 3.0,
            mlp / 3.0
        );
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let (graph, features) = toy_graph();
        let mut cfg = pinned_toy_config(Variant::PDemuf);
        cfg.split = (0.5, 0.2, 0.2);
        assert!(train(&graph, &features, &cfg).is_err());
        let mut cfg = pinned_toy_config(Variant::PDemuf);
        cfg.mlp_layers = 0;
        assert!(train(&graph, &features, &cfg).is_err());
    }
}
