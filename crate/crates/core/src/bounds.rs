//! Exact softmax prediction error and its lower bounds.
//!
//! Three bounds are computed for a binary problem: a clamp-based bound with
//! a tight first form and a relaxed 167n/800 form, a spectral bound driven
//! by the information content and response efficiency of the label
//! difference, and a homophily form that is the same quantity written
//! through the transformed interaction matrix. The last two agree by an
//! exact algebraic identity, which is itself a tested property.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::filters::{self, PolynomialFilter};
use crate::graph::{LabeledGraph, LabelMatrix, NormalizedOperators, SpectralDecomposition};
use crate::indicators::{information_content, signal_spectrum, Spectrum};
use crate::{Error, Result};

/// Relative threshold deciding which responses g(lambda_i) count as nonzero
/// when forming support sets.
const RESPONSE_REL_THRESHOLD: f64 = 1e-10;

/// The clamp psi(x) = min(max(x, -1), 1).
pub fn clamp(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

fn stable_sigmoid_neg(z: f64) -> f64 {
    // 1 / (1 + e^z), computed without overflow.
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Row-wise softmax prediction error || softmax(g(tilde_L) X) - Y ||_F^2.
pub fn prediction_error(
    filter: &PolynomialFilter,
    sd: &SpectralDecomposition,
    x: &Array2<f64>,
    y: &LabelMatrix,
) -> Result<f64> {
    let filtered = filters::apply(filter, sd, x)?;
    let ym = y.matrix();
    if ym.ncols() != filtered.ncols() {
        return Err(Error::DimMismatch {
            context: "input columns vs class count",
            expected: ym.ncols(),
            got: filtered.ncols(),
        });
    }
    let mut total = 0.0;
    for (row, yrow) in filtered.rows().into_iter().zip(ym.rows()) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let denom: f64 = exps.iter().sum();
        for (e, t) in exps.iter().zip(yrow.iter()) {
            total += (e / denom - t).powi(2);
        }
    }
    Ok(total)
}

/// One binary problem instance: indicator vectors, the input pair, and the
/// filtered input difference z = g(tilde_L)(x_1 - x_0).
#[derive(Debug, Clone)]
pub struct BinaryInstance {
    pub y0: Array1<f64>,
    pub y1: Array1<f64>,
    pub x0: Array1<f64>,
    pub x1: Array1<f64>,
    pub z: Array1<f64>,
}

impl BinaryInstance {
    pub fn new(
        filter: &PolynomialFilter,
        sd: &SpectralDecomposition,
        graph: &LabeledGraph,
        x0: Array1<f64>,
        x1: Array1<f64>,
    ) -> Result<Self> {
        if graph.class_count() != 2 {
            return Err(Error::NotBinary {
                k: graph.class_count(),
            });
        }
        let n = graph.node_count();
        if x0.len() != n || x1.len() != n {
            return Err(Error::DimMismatch {
                context: "input length vs node count",
                expected: n,
                got: x0.len(),
            });
        }
        let diff = &x1 - &x0;
        let z = filters::apply_vec(filter, sd, &diff)?;
        Ok(Self {
            y0: graph.class_indicator(0),
            y1: graph.class_indicator(1),
            x0,
            x1,
            z,
        })
    }

    pub fn node_count(&self) -> usize {
        self.y0.len()
    }

    /// Exact class-0 prediction error sum_i (1/(1+e^{z_i}) - y_{0i})^2.
    /// The full two-column error is twice this by softmax symmetry.
    pub fn class_error(&self) -> f64 {
        self.z
            .iter()
            .zip(self.y0.iter())
            .map(|(&z, &y)| (stable_sigmoid_neg(z) - y).powi(2))
            .sum()
    }
}

/// Both forms of the clamp-based lower bound plus their shared components.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremOneBounds {
    pub tight: f64,
    pub relaxed: f64,
    /// (y_1 - y_0)^T psi(z).
    pub alignment: f64,
    pub psi_l2_sq: f64,
    pub psi_l3_cubed: f64,
    pub psi_l4_fourth: f64,
    /// |S_{y,z}|: saturated entries on the wrong side of their label.
    pub clamp_set_size: usize,
}

pub fn theorem1_bounds(inst: &BinaryInstance) -> TheoremOneBounds {
    let n = inst.node_count() as f64;
    let mut alignment = 0.0;
    let mut l2 = 0.0;
    let mut l3 = 0.0;
    let mut l4 = 0.0;
    let mut clamp_set_size = 0usize;
    let mut relaxed_sum = 0.0;
    for i in 0..inst.node_count() {
        let z = inst.z[i];
        let psi = clamp(z);
        let dy = inst.y1[i] - inst.y0[i];
        alignment += dy * psi;
        l2 += psi * psi;
        l3 += psi.abs().powi(3);
        l4 += psi.powi(4);
        if (z < -1.0 && inst.y0[i] == 1.0) || (z > 1.0 && inst.y0[i] == 0.0) {
            clamp_set_size += 1;
        }
        relaxed_sum += clamp(dy * z);
    }
    let e = std::f64::consts::E;
    let tight = n / 4.0 - alignment / 4.0 + l2 / 16.0
        - l3 / 48.0
        - l4 / 96.0
        - clamp_set_size as f64 / (1.0 + e).powi(2);
    let relaxed = 167.0 * n / 800.0 - relaxed_sum / 4.0;
    TheoremOneBounds {
        tight,
        relaxed,
        alignment,
        psi_l2_sq: l2,
        psi_l3_cubed: l3,
        psi_l4_fourth: l4,
        clamp_set_size,
    }
}

/// Pointwise clamp bound on the squared sigmoid residual: returns
/// (lhs, rhs) with the contract lhs >= rhs.
pub fn sigmoid_pointwise_bound(x: f64, y: u8) -> (f64, f64) {
    let yf = f64::from(y);
    let lhs = (1.0 / (1.0 + x.exp()) - yf).powi(2);
    let psi = clamp(x);
    let indicator = if (x < -1.0 && y == 1) || (x > 1.0 && y == 0) {
        1.0
    } else {
        0.0
    };
    let e = std::f64::consts::E;
    let rhs = 0.25 - (1.0 - 2.0 * yf) * psi / 4.0 + psi * psi / 16.0
        - psi.abs().powi(3) / 48.0
        - psi.powi(4) / 96.0
        - indicator / (1.0 + e).powi(2);
    (lhs, rhs)
}

/// Support sets and constants feeding the spectral bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralConstants {
    /// Information content of the label-difference spectrum.
    pub information_delta: f64,
    /// min g(lambda_i) over I_{g,delta}; input independent.
    pub m_g_delta: f64,
    /// min g(lambda_i) over I_{g,delta,eta~}; the variant tied to inputs.
    pub m_g_joint: f64,
    pub c_g_delta: f64,
    pub mu_g_delta: f64,
    /// (1 + c) mu for the label difference; must sit strictly below 1.
    pub one_plus_c_mu_delta: f64,
    /// M(g, delta) = -I(delta) / ln((1+c) mu).
    pub m_cap_delta: f64,
    /// M(g, eta~) for the clamped input-difference spectrum.
    pub m_cap_eta: f64,
    /// (1/m_g_joint) min(M(g,delta), M(g,eta~)).
    pub theorem_rhs: f64,
    /// sum_i psi(eta_i g(lambda_i) delta_i), the bounded quantity.
    pub clamped_sum: f64,
}

fn response_support(response: &Array1<f64>) -> Vec<usize> {
    let max = response.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
    response
        .iter()
        .enumerate()
        .filter(|(_, g)| g.abs() > RESPONSE_REL_THRESHOLD * max && max > 0.0)
        .map(|(i, _)| i)
        .collect()
}

struct MassTerms {
    c: f64,
    mu: f64,
    one_plus_c_mu: f64,
    m_cap: f64,
    m_over_joint: f64,
}

/// Shared computation of c(g, s), mu_g(s), (1+c) mu and M(g, s) for a
/// spectrum s against a response.
fn mass_terms(response: &Array1<f64>, spectrum: &Spectrum) -> Result<MassTerms> {
    if spectrum.is_zero() {
        return Err(Error::DegenerateSignal {
            context: "bound constants",
        });
    }
    let support = spectrum.support();
    let response_sum: f64 = response.sum();
    // The restricted sum runs over I_{g,s}; everything outside it (whether
    // below the response threshold or off the spectrum support) lands in
    // the numerator of c, keeping the homophily identity exact.
    let resp_support = response_support(response);
    let joint: Vec<usize> = resp_support
        .iter()
        .copied()
        .filter(|i| support.contains(i))
        .collect();
    if joint.is_empty() {
        return Err(Error::DegenerateBound {
            reason: "filter response and spectrum have disjoint supports".into(),
        });
    }
    let restricted_sum: f64 = joint.iter().map(|&i| response[i]).sum();
    let c = (response_sum - restricted_sum) / restricted_sum;
    let norm_sq = spectrum.norm_sq();
    let weighted: f64 = response
        .iter()
        .zip(spectrum.coefficients().iter())
        .map(|(g, a)| g * a * a)
        .sum();
    let mu = weighted / (response_sum * norm_sq);
    let one_plus_c_mu = (1.0 + c) * mu;
    if one_plus_c_mu <= 0.0 {
        return Err(Error::DegenerateBound {
            reason: format!(
                "(1+c) mu = {one_plus_c_mu:.6e} is not positive; the filter response leaves \
                 the nonnegative family on this spectrum"
            ),
        });
    }
    let log = one_plus_c_mu.ln();
    if !log.is_finite() || log.abs() < 1e-12 {
        return Err(Error::DegenerateBound {
            reason: format!(
                "(1+c) mu = {one_plus_c_mu:.6e} leaves the bound 0/0 (single-component spectrum \
                 on the filter support)"
            ),
        });
    }
    let info = information_content(spectrum)?;
    let m_cap = -info / log;
    let m_over_joint = joint
        .iter()
        .map(|&i| response[i])
        .fold(f64::INFINITY, f64::min);
    Ok(MassTerms {
        c,
        mu,
        one_plus_c_mu,
        m_cap,
        m_over_joint,
    })
}

/// Clamps the input-difference spectrum so |eta~_i g(lambda_i) delta_i| <= 1.
pub fn clamp_eta(response: &Array1<f64>, delta: &Spectrum, eta: &Spectrum) -> Spectrum {
    let clamped = Array1::from_iter(eta.coefficients().iter().enumerate().map(|(i, &e)| {
        let scale = (response[i] * delta.coefficients()[i]).abs();
        if scale > 0.0 {
            e.clamp(-1.0 / scale, 1.0 / scale)
        } else {
            e
        }
    }));
    Spectrum::from_coefficients(clamped)
}

pub fn spectral_constants(
    filter: &PolynomialFilter,
    sd: &SpectralDecomposition,
    delta: &Spectrum,
    eta: &Spectrum,
) -> Result<SpectralConstants> {
    let response = filter.response(sd.eigenvalues());
    let delta_terms = mass_terms(&response, delta)?;
    let eta_tilde = clamp_eta(&response, delta, eta);
    let eta_terms = mass_terms(&response, &eta_tilde)?;

    // Joint support I_{g,delta,eta~} for the theorem's own m_g.
    let resp_support = response_support(&response);
    let joint: Vec<usize> = resp_support
        .iter()
        .copied()
        .filter(|i| delta.support().contains(i) && eta_tilde.support().contains(i))
        .collect();
    if joint.is_empty() {
        return Err(Error::DegenerateBound {
            reason: "joint support of response, delta, and eta~ is empty".into(),
        });
    }
    let m_g_joint = joint
        .iter()
        .map(|&i| response[i])
        .fold(f64::INFINITY, f64::min);

    let clamped_sum: f64 = (0..response.len())
        .map(|i| clamp(eta.coefficients()[i] * response[i] * delta.coefficients()[i]))
        .sum();

    let theorem_rhs = delta_terms.m_cap.min(eta_terms.m_cap) / m_g_joint;
    Ok(SpectralConstants {
        information_delta: information_content(delta)?,
        m_g_delta: delta_terms.m_over_joint,
        m_g_joint,
        c_g_delta: delta_terms.c,
        mu_g_delta: delta_terms.mu,
        one_plus_c_mu_delta: delta_terms.one_plus_c_mu,
        m_cap_delta: delta_terms.m_cap,
        m_cap_eta: eta_terms.m_cap,
        theorem_rhs,
        clamped_sum,
    })
}

/// Input-independent spectral lower bound on the class-0 error:
/// 167n/800 + I(delta) / (m_g ln((1+c) mu_g(delta))); the log is negative,
/// so the additive term subtracts.
pub fn spectral_lower_bound(
    filter: &PolynomialFilter,
    sd: &SpectralDecomposition,
    delta: &Spectrum,
) -> Result<f64> {
    let response = filter.response(sd.eigenvalues());
    let terms = mass_terms(&response, delta)?;
    let info = information_content(delta)?;
    let n = sd.len() as f64;
    Ok(167.0 * n / 800.0 + info / (terms.m_over_joint * terms.one_plus_c_mu.ln()))
}

/// The homophily form of the same bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpatialBound {
    /// Class-0 form using the identity
    /// (1+c) mu_g(delta) = H_1(g~(I - Pi~)|G_n) / sum_{I_{g,delta}} g;
    /// equals the spectral bound exactly.
    pub per_label: f64,
    /// The full-error display with sum_i g(lambda_i) in the denominator and
    /// the halved scaling, retained for comparison.
    pub statement_variant: f64,
    /// Transformed homophily degree entering the ratio.
    pub h1_transformed: f64,
}

pub fn spatial_lower_bound(
    filter: &PolynomialFilter,
    graph: &LabeledGraph,
    ops: &NormalizedOperators,
    sd: &SpectralDecomposition,
) -> Result<SpatialBound> {
    let diff = &graph.class_indicator(0) - &graph.class_indicator(1);
    let delta = signal_spectrum(sd, &diff);
    if delta.is_zero() {
        return Err(Error::DegenerateSignal {
            context: "label difference spectrum",
        });
    }
    let response = filter.response(sd.eigenvalues());
    let resp_support = response_support(&response);
    let restricted_sum: f64 = resp_support
        .iter()
        .copied()
        .filter(|i| delta.support().contains(i))
        .map(|i| response[i])
        .sum();
    let m_g_delta = resp_support
        .iter()
        .copied()
        .filter(|i| delta.support().contains(i))
        .map(|i| response[i])
        .fold(f64::INFINITY, f64::min);
    if !m_g_delta.is_finite() || restricted_sum <= 0.0 {
        return Err(Error::DegenerateBound {
            reason: "filter response vanishes on the label-difference support".into(),
        });
    }
    let h1_transformed = filters::filter_homophily(filter, graph, ops)?;
    if h1_transformed <= 0.0 {
        return Err(Error::DegenerateBound {
            reason: "label difference lies in the kernel of the transformed filter".into(),
        });
    }
    let info = information_content(&delta)?;
    let n = graph.node_count() as f64;
    let ratio_proof = h1_transformed / restricted_sum;
    let log_proof = ratio_proof.ln();
    if log_proof.abs() < 1e-12 {
        return Err(Error::DegenerateBound {
            reason: "homophily ratio equals 1; bound is 0/0".into(),
        });
    }
    let per_label = 167.0 * n / 800.0 + info / (m_g_delta * log_proof);
    let ratio_statement = h1_transformed / response.sum();
    let statement_variant = 167.0 * n / 400.0 + info / (2.0 * m_g_delta * ratio_statement.ln());
    Ok(SpatialBound {
        per_label,
        statement_variant,
        h1_transformed,
    })
}

/// One-vs-rest reduction of a K-class problem to a binary one: class `l`
/// against everything else, with the rest inputs combined entrywise by
/// log-sum-exp. The reduction is approximate by construction.
pub struct BinaryReduction {
    pub x0: Array1<f64>,
    pub x1: Array1<f64>,
    pub labels: Vec<usize>,
}

pub fn reduce_to_binary(x: &Array2<f64>, labels: &[usize], class: usize) -> Result<BinaryReduction> {
    let k = x.ncols();
    if class >= k {
        return Err(Error::NodeOutOfRange { id: class, n: k });
    }
    if k < 2 {
        return Err(Error::NotBinary { k });
    }
    let n = x.nrows();
    let mut x1 = Array1::<f64>::zeros(n);
    for i in 0..n {
        let rest: Vec<f64> = (0..k).filter(|&m| m != class).map(|m| x[[i, m]]).collect();
        let max = rest.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = rest.iter().map(|v| (v - max).exp()).sum();
        x1[i] = max + sum.ln();
    }
    Ok(BinaryReduction {
        x0: x.column(class).to_owned(),
        x1,
        labels: labels
            .iter()
            .map(|&l| if l == class { 0 } else { 1 })
            .collect(),
    })
}

/// Everything about one (filter, binary problem) pair in one record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: usize,
    pub er: f64,
    pub er_full: f64,
    pub tight_bound: f64,
    pub relaxed_bound: f64,
    pub spectral_bound: f64,
    pub spatial_bound: f64,
    pub spatial_statement_variant: f64,
    pub h1_transformed: f64,
    pub components: BoundComponents,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundComponents {
    pub alignment: f64,
    pub psi_l2_sq: f64,
    pub psi_l3_cubed: f64,
    pub psi_l4_fourth: f64,
    pub clamp_set_size: usize,
    pub m_g_delta: f64,
    pub m_g_joint: f64,
    pub c_g_delta: f64,
    pub mu_g_delta: f64,
    pub one_plus_c_mu_delta: f64,
    pub information_delta: f64,
    pub m_cap_delta: f64,
    pub m_cap_eta: f64,
    pub theorem_rhs: f64,
    pub clamped_sum: f64,
}

/// Assembles the full report for a binary instance.
pub fn bound_report(
    filter: &PolynomialFilter,
    graph: &LabeledGraph,
    ops: &NormalizedOperators,
    sd: &SpectralDecomposition,
    x0: Array1<f64>,
    x1: Array1<f64>,
) -> Result<BoundReport> {
    let inst = BinaryInstance::new(filter, sd, graph, x0, x1)?;
    let er = inst.class_error();
    let t1 = theorem1_bounds(&inst);
    let diff = &graph.class_indicator(0) - &graph.class_indicator(1);
    let delta = signal_spectrum(sd, &diff);
    let input_diff = &inst.x1 - &inst.x0;
    let eta = signal_spectrum(sd, &input_diff);
    let constants = spectral_constants(filter, sd, &delta, &eta)?;
    let spectral = spectral_lower_bound(filter, sd, &delta)?;
    let spatial = spatial_lower_bound(filter, graph, ops, sd)?;
    Ok(BoundReport {
        n: graph.node_count(),
        er,
        er_full: 2.0 * er,
        tight_bound: t1.tight,
        relaxed_bound: t1.relaxed,
        spectral_bound: spectral,
        spatial_bound: spatial.per_label,
        spatial_statement_variant: spatial.statement_variant,
        h1_transformed: spatial.h1_transformed,
        components: BoundComponents {
            alignment: t1.alignment,
            psi_l2_sq: t1.psi_l2_sq,
            psi_l3_cubed: t1.psi_l3_cubed,
            psi_l4_fourth: t1.psi_l4_fourth,
            clamp_set_size: t1.clamp_set_size,
            m_g_delta: constants.m_g_delta,
            m_g_joint: constants.m_g_joint,
            c_g_delta: constants.c_g_delta,
            mu_g_delta: constants.mu_g_delta,
            one_plus_c_mu_delta: constants.one_plus_c_mu_delta,
            information_delta: constants.information_delta,
            m_cap_delta: constants.m_cap_delta,
            m_cap_eta: constants.m_cap_eta,
            theorem_rhs: constants.theorem_rhs,
            clamped_sum: constants.clamped_sum,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{eigendecompose, normalize};
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn path3() -> (LabeledGraph, NormalizedOperators, SpectralDecomposition) {
        let g = LabeledGraph::from_edges(&[(0, 1), (1, 2)], &[0, 1, 1]).unwrap();
        let ops = normalize(&g);
        let sd = eigendecompose(&ops).unwrap();
        (g, ops, sd)
    }

    #[test]
    fn clamp_is_a_clamp() {
        assert_eq!(clamp(1.5), 1.0);
        assert_eq!(clamp(-3.0), -1.0);
        assert_eq!(clamp(0.25), 0.25);
    }

    #[test]
    fn identical_columns_give_quarter_n() {
        let (g, _, sd) = path3();
        let x = array![[0.7, 0.7], [-1.0, -1.0], [2.0, 2.0]];
        let er = prediction_error(&PolynomialFilter::normalized_gcn(), &sd, &x, &g.label_matrix())
            .unwrap();
        // Full error n/2; the class-0 share is n/4 exactly.
        assert!((er - 1.5).abs() < 1e-12);
        let inst = BinaryInstance::new(
            &PolynomialFilter::normalized_gcn(),
            &sd,
            &g,
            x.column(0).to_owned(),
            x.column(1).to_owned(),
        )
        .unwrap();
        assert!((inst.class_error() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn saturated_alignment_drives_error_to_zero() {
        let (g, _, sd) = path3();
        // Build x1 - x0 = t (y_1 - y_0) with the identity filter: softmax
        // saturates toward the labels as t grows.
        let t = 50.0;
        let dy = &g.class_indicator(1) - &g.class_indicator(0);
        let x0 = Array1::zeros(3);
        let x1 = dy.mapv(|v| t * v);
        let inst =
            BinaryInstance::new(&PolynomialFilter::constant(1.0), &sd, &g, x0, x1).unwrap();
        assert!(inst.class_error() < 1e-12);
    }

    #[test]
    fn binary_error_matches_full_softmax_error() {
        let (g, _, sd) = path3();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = PolynomialFilter::normalized_gcn();
        for _ in 0..20 {
            let x = Array2::from_shape_fn((3, 2), |_| rng.gen_range(-5.0..5.0));
            let full = prediction_error(&f, &sd, &x, &g.label_matrix()).unwrap();
            let inst = BinaryInstance::new(
                &f,
                &sd,
                &g,
                x.column(0).to_owned(),
                x.column(1).to_owned(),
            )
            .unwrap();
            assert!((full - 2.0 * inst.class_error()).abs() < 1e-10);
        }
    }

    #[test]
    fn prediction_error_matches_independent_oracle() {
        // 4-node instance, plain exp-normalization oracle.
        let g = LabeledGraph::from_edges(&[(0, 1), (1, 2), (2, 3)], &[0, 0, 1, 1]).unwrap();
        let ops = normalize(&g);
        let sd = eigendecompose(&ops).unwrap();
        let f = PolynomialFilter::normalized_gcn();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Array2::from_shape_fn((4, 2), |_| rng.gen_range(-2.0..2.0));
        let got = prediction_error(&f, &sd, &x, &g.label_matrix()).unwrap();

        // Oracle: dense g(L~) X then row softmax, no shift trick.
        let gl = f.matrix_polynomial(&ops.tilde_l);
        let fx = gl.dot(&x);
        let ym = g.label_matrix();
        let mut want = 0.0;
        for i in 0..4 {
            let d: f64 = (0..2).map(|c| fx[[i, c]].exp()).sum();
            for c in 0..2 {
                want += (fx[[i, c]].exp() / d - ym.matrix()[[i, c]]).powi(2);
            }
        }
        assert!((got - want).abs() < 1e-10);
    }

    #[test]
    fn theorem1_trivial_and_saturated_cases() {
        let (g, _, sd) = path3();
        let f = PolynomialFilter::constant(1.0);
        // x0 = x1: z = 0, tight = n/4, C = 0.
        let inst =
            BinaryInstance::new(&f, &sd, &g, array![1.0, 2.0, 3.0], array![1.0, 2.0, 3.0])
                .unwrap();
        let b = theorem1_bounds(&inst);
        assert!((b.tight - 0.75).abs() < 1e-12);
        assert_eq!(b.clamp_set_size, 0);
        assert!((inst.class_error() - 0.75).abs() < 1e-12);
        assert!(inst.class_error() >= b.tight - 1e-12);

        // z = 2 (y1 - y0): psi saturates at every node. Aligned saturation
        // lands every index in S (z < -1 with y_0 = 1 and the mirror), so
        // C = n and the norm terms give n/32 - n/(1+e)^2.
        let dy = &g.class_indicator(1) - &g.class_indicator(0);
        let x1 = dy.mapv(|v| 2.0 * v);
        let inst = BinaryInstance::new(&f, &sd, &g, Array1::zeros(3), x1).unwrap();
        let b = theorem1_bounds(&inst);
        let e = std::f64::consts::E;
        let want = 3.0 / 32.0 - 3.0 / (1.0 + e).powi(2);
        assert!((b.tight - want).abs() < 1e-12);
        assert_eq!(b.clamp_set_size, 3);
        assert!(inst.class_error() >= b.tight - 1e-12);
    }

    #[test]
    fn theorem1_chain_on_random_instances() {
        let (g, _, sd) = path3();
        let f = PolynomialFilter::normalized_gcn();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let x0 = Array1::from_shape_fn(3, |_| rng.gen_range(-5.0..5.0));
            let x1 = Array1::from_shape_fn(3, |_| rng.gen_range(-5.0..5.0));
            let inst = BinaryInstance::new(&f, &sd, &g, x0, x1).unwrap();
            let er = inst.class_error();
            let b = theorem1_bounds(&inst);
            assert!(er >= b.tight - 1e-9);
            assert!(er > b.relaxed - 1e-9);
        }
    }

    #[test]
    fn pointwise_bound_examples() {
        let (lhs, rhs) = sigmoid_pointwise_bound(0.0, 0);
        assert!((lhs - 0.25).abs() < 1e-15);
        assert!((rhs - 0.25).abs() < 1e-15);

        // Saturation on the wrong side fires the indicator.
        let e = std::f64::consts::E;
        let (_, rhs_with) = sigmoid_pointwise_bound(2.0, 0);
        let no_indicator = 0.25 - 0.25 + 1.0 / 16.0 - 1.0 / 48.0 - 1.0 / 96.0;
        assert!((rhs_with - (no_indicator - 1.0 / (1.0 + e).powi(2))).abs() < 1e-15);

        let (lhs, rhs) = sigmoid_pointwise_bound(-0.5, 1);
        assert!(lhs >= rhs - 1e-15);
    }

    #[test]
    fn pointwise_bound_over_grid() {
        for y in [0u8, 1] {
            for i in 0..5000 {
                let x = -6.0 + 12.0 * i as f64 / 4999.0;
                let (lhs, rhs) = sigmoid_pointwise_bound(x, y);
                assert!(lhs >= rhs - 1e-12, "x = {x}, y = {y}");
            }
        }
    }

    #[test]
    fn uniform_delta_constants_close_form() {
        // g == 1 on a synthetic spectrum with n equal components:
        // c = 0, mu = 1/n, M = n.
        let n = 8;
        let eigenvalues = Array1::from_shape_fn(n, |i| i as f64 * 2.0 / (n - 1) as f64);
        let sd = SpectralDecomposition::from_parts(eigenvalues, Array2::eye(n));
        let delta = Spectrum::from_coefficients(Array1::from_elem(n, 1.0));
        let eta = Spectrum::from_coefficients(Array1::from_elem(n, 0.5));
        let f = PolynomialFilter::constant(1.0);
        let c = spectral_constants(&f, &sd, &delta, &eta).unwrap();
        assert!((c.c_g_delta).abs() < 1e-12);
        assert!((c.mu_g_delta - 1.0 / n as f64).abs() < 1e-12);
        assert!((c.m_cap_delta - n as f64).abs() < 1e-9);
        // Spectral bound: 167n/800 - n for the uniform case.
        let b = spectral_lower_bound(&f, &sd, &delta).unwrap();
        assert!((b - (167.0 * n as f64 / 800.0 - n as f64)).abs() < 1e-9);
    }

    #[test]
    fn single_component_delta_is_degenerate() {
        let n = 4;
        let eigenvalues = Array1::from_shape_fn(n, |i| i as f64 / 2.0);
        let sd = SpectralDecomposition::from_parts(eigenvalues, Array2::eye(n));
        let mut coeff = Array1::zeros(n);
        coeff[2] = 1.0;
        let delta = Spectrum::from_coefficients(coeff);
        let f = PolynomialFilter::constant(1.0);
        assert!(matches!(
            spectral_lower_bound(&f, &sd, &delta),
            Err(Error::DegenerateBound { .. })
        ));
    }

    #[test]
    fn theorem_inequality_on_random_inputs() {
        let g = LabeledGraph::from_edges(
            &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (1, 4)],
            &[0, 0, 0, 1, 1, 1],
        )
        .unwrap();
        let ops = normalize(&g);
        let sd = eigendecompose(&ops).unwrap();
        let diff = &g.class_indicator(0) - &g.class_indicator(1);
        let delta = signal_spectrum(&sd, &diff);
        let f = PolynomialFilter::normalized_gcn();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let xdiff = Array1::from_shape_fn(6, |_| rng.gen_range(-5.0..5.0));
            let eta = signal_spectrum(&sd, &xdiff);
            match spectral_constants(&f, &sd, &delta, &eta) {
                Ok(c) => assert!(
                    c.clamped_sum <= c.theorem_rhs + 1e-9,
                    "lhs {} rhs {}",
                    c.clamped_sum,
                    c.theorem_rhs
                ),
                Err(Error::DegenerateBound { .. }) => {}
                Err(e) => panic!("unexpected error {e:?}"),
            }
        }
    }

    #[test]
    fn spectral_and_spatial_bounds_agree() {
        let g = LabeledGraph::from_edges(
            &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (1, 4)],
            &[0, 0, 0, 1, 1, 1],
        )
        .unwrap();
        let ops = normalize(&g);
        let sd = eigendecompose(&ops).unwrap();
        let diff = &g.class_indicator(0) - &g.class_indicator(1);
        let delta = signal_spectrum(&sd, &diff);
        for f in [
            PolynomialFilter::normalized_gcn(),
            NormalizedSecondOrderFilterFixture::low(),
            NormalizedSecondOrderFilterFixture::high(),
        ] {
            let spectral = spectral_lower_bound(&f, &sd, &delta).unwrap();
            let spatial = spatial_lower_bound(&f, &g, &ops, &sd).unwrap();
            assert!(
                (spectral - spatial.per_label).abs() <= 1e-9,
                "{spectral} vs {}",
                spatial.per_label
            );
        }
    }

    #[test]
    fn spectral_bound_is_input_independent_and_below_error() {
        let (g, ops, sd) = path3();
        let f = PolynomialFilter::normalized_gcn();
        let diff = &g.class_indicator(0) - &g.class_indicator(1);
        let delta = signal_spectrum(&sd, &diff);
        let bound = spectral_lower_bound(&f, &sd, &delta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let x0 = Array1::from_shape_fn(3, |_| rng.gen_range(-5.0..5.0));
            let x1 = Array1::from_shape_fn(3, |_| rng.gen_range(-5.0..5.0));
            let inst = BinaryInstance::new(&f, &sd, &g, x0, x1).unwrap();
            assert!(inst.class_error() > bound - 1e-9);
            // Recomputing the bound ignores the inputs entirely.
            let again = spectral_lower_bound(&f, &sd, &delta).unwrap();
            assert_eq!(bound, again);
        }
        let _ = ops;
    }

    #[test]
    fn reduction_collapses_rest_classes() {
        let x = array![
            [1.0, 0.0, -1.0],
            [0.5, 0.5, 0.5],
            [2.0, -2.0, 0.0],
            [0.0, 1.0, 2.0]
        ];
        let labels = [0, 1, 2, 1];
        let red = reduce_to_binary(&x, &labels, 1).unwrap();
        assert_eq!(red.labels, vec![1, 0, 1, 0]);
        // Log-sum-exp of the complements.
        for i in 0..4 {
            let want = (x[[i, 0]].exp() + x[[i, 2]].exp()).ln();
            assert!((red.x1[i] - want).abs() < 1e-12);
        }
        assert!(reduce_to_binary(&x, &labels, 3).is_err());
    }

    #[test]
    fn bound_report_is_complete_and_ordered() {
        let g = LabeledGraph::from_edges(
            &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (1, 4)],
            &[0, 0, 0, 1, 1, 1],
        )
        .unwrap();
        let ops = normalize(&g);
        let sd = eigendecompose(&ops).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let x0 = Array1::from_shape_fn(6, |_| rng.gen_range(-5.0..5.0));
        let x1 = Array1::from_shape_fn(6, |_| rng.gen_range(-5.0..5.0));
        let f = PolynomialFilter::normalized_gcn();
        let report = bound_report(&f, &g, &ops, &sd, x0, x1).unwrap();
        assert!(report.er >= report.tight_bound - 1e-9);
        assert!(report.er > report.relaxed_bound - 1e-9);
        assert!(report.er > report.spectral_bound - 1e-9);
        assert!((report.spectral_bound - report.spatial_bound).abs() < 1e-9);
        assert!((report.er_full - 2.0 * report.er).abs() < 1e-12);
        // Round-trips through JSON.
        let js = serde_json::to_string(&report).unwrap();
        let back: BoundReport = serde_json::from_str(&js).unwrap();
        assert_eq!(back.er, report.er);
        assert_eq!(back.components.clamp_set_size, report.components.clamp_set_size);
    }

    /// Second-order fixtures used in the agreement test.
    struct NormalizedSecondOrderFilterFixture;

    impl NormalizedSecondOrderFilterFixture {
        fn low() -> PolynomialFilter {
            crate::filters::NormalizedSecondOrderFilter::new(0.4)
                .unwrap()
                .filter()
        }
        fn high() -> PolynomialFilter {
            crate::filters::NormalizedSecondOrderFilter::new(-0.4)
                .unwrap()
                .filter()
        }
    }
}
