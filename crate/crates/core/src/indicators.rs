//! Graph indicators: interaction probabilities, k-homophily degrees,
//! frequency distributions, response efficiency, and the moment identities
//! connecting the spatial and spectral views.

use ndarray::{Array1, Array2};

use crate::filters::PolynomialFilter;
use crate::graph::{LabeledGraph, NormalizedOperators, SpectralDecomposition};
use crate::{Error, Result};

/// Relative support threshold: a coefficient counts as nonzero when its
/// magnitude exceeds this fraction of the signal norm. The underlying
/// definitions treat "nonzero" exactly, which is meaningless under
/// floating-point eigensolves.
pub const SUPPORT_REL_THRESHOLD: f64 = 1e-10;

/// K x K class interaction matrices at one step count k.
///
/// `pi` holds the random-walk variant (rows sum to 1); `pi_tilde` the
/// symmetric variant built from the k-th power of the normalized adjacency.
/// Both are computed from explicit matrix powers, never by powering the
/// one-step matrices: the k-step indicator is not the k-th power of the
/// one-step indicator.
#[derive(Debug, Clone)]
pub struct InteractionMatrices {
    pub k: usize,
    pub pi: Array2<f64>,
    pub pi_tilde: Array2<f64>,
}

fn sandwich(y: &Array2<f64>, m: &Array2<f64>) -> Array2<f64> {
    y.t().dot(m).dot(y)
}

/// Computes the k-step interaction matrices for a single k.
pub fn interaction_probability(
    graph: &LabeledGraph,
    ops: &NormalizedOperators,
    k: usize,
) -> InteractionMatrices {
    interaction_sequence(graph, ops, k)
        .pop()
        .expect("k >= 1 yields at least one entry")
}

/// Computes interaction matrices for every step count 1..=k_max, sharing
/// the repeated matrix multiplications.
pub fn interaction_sequence(
    graph: &LabeledGraph,
    ops: &NormalizedOperators,
    k_max: usize,
) -> Vec<InteractionMatrices> {
    assert!(k_max >= 1, "step count must be at least 1");
    let lm = graph.label_matrix();
    let y = lm.matrix();
    let r = lm.class_sizes();
    let kc = r.len();

    let mut out = Vec::with_capacity(k_max);
    let mut p_pow = ops.random_walk.clone();
    let mut a_pow = ops.tilde_a.clone();
    for k in 1..=k_max {
        if k > 1 {
            p_pow = p_pow.dot(&ops.random_walk);
            a_pow = a_pow.dot(&ops.tilde_a);
        }
        let mut pi = sandwich(y, &p_pow);
        let mut pi_tilde = sandwich(y, &a_pow);
        for l in 0..kc {
            for m in 0..kc {
                pi[[l, m]] /= r[l] as f64;
                pi_tilde[[l, m]] /= (r[l] as f64 * r[m] as f64).sqrt();
            }
        }
        out.push(InteractionMatrices { k, pi, pi_tilde });
    }
    out
}

/// Per-class and whole-graph k-homophily degrees derived from the
/// symmetric interaction matrix.
#[derive(Debug, Clone)]
pub struct HomophilyReport {
    pub k: usize,
    pub per_class: Vec<f64>,
    pub graph: f64,
}

#[allow(clippy::needless_range_loop)]
pub fn homophily_degree(im: &InteractionMatrices, class_sizes: &[usize]) -> HomophilyReport {
    let kc = class_sizes.len();
    let n: usize = class_sizes.iter().sum();
    let nf = n as f64;
    let mut per_class = Vec::with_capacity(kc);
    for l in 0..kc {
        let mut h = (class_sizes[l] as f64 / nf).sqrt() * im.pi_tilde[[l, l]];
        for m in 0..kc {
            if m != l {
                h -= (class_sizes[m] as f64 / nf).sqrt() * im.pi_tilde[[l, m]];
            }
        }
        per_class.push(h);
    }
    let graph = per_class
        .iter()
        .enumerate()
        .map(|(l, h)| (class_sizes[l] as f64 / nf).sqrt() * h)
        .sum();
    HomophilyReport {
        k: im.k,
        per_class,
        graph,
    }
}

/// A signal's coefficients in the frequency-component basis.
#[derive(Debug, Clone)]
pub struct Spectrum {
    coefficients: Array1<f64>,
    support: Vec<usize>,
}

impl Spectrum {
    pub fn from_coefficients(coefficients: Array1<f64>) -> Self {
        let norm = coefficients.iter().map(|a| a * a).sum::<f64>().sqrt();
        let support = coefficients
            .iter()
            .enumerate()
            .filter(|(_, a)| a.abs() > SUPPORT_REL_THRESHOLD * norm && norm > 0.0)
            .map(|(i, _)| i)
            .collect();
        Self {
            coefficients,
            support,
        }
    }

    pub fn coefficients(&self) -> &Array1<f64> {
        &self.coefficients
    }

    /// Indices with |alpha_i| above the relative support threshold.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn norm_sq(&self) -> f64 {
        self.coefficients.iter().map(|a| a * a).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.support.is_empty()
    }

    /// Frequency probabilities Pr(f = lambda_i) = alpha_i^2 / sum alpha^2.
    pub fn probabilities(&self) -> Result<Array1<f64>> {
        let total = self.norm_sq();
        if self.is_zero() {
            return Err(Error::DegenerateSignal {
                context: "frequency distribution",
            });
        }
        Ok(self.coefficients.mapv(|a| a * a / total))
    }

    /// Probabilities aggregated per distinct eigenvalue (ties within
    /// `tie_tol` summed), suitable for reporting: quantities are only
    /// basis-invariant per eigenspace, not per eigenvector index.
    pub fn distribution_by_eigenvalue(
        &self,
        eigenvalues: &Array1<f64>,
        tie_tol: f64,
    ) -> Result<Vec<(f64, f64)>> {
        let probs = self.probabilities()?;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, &lambda) in eigenvalues.iter().enumerate() {
            match out.last_mut() {
                Some((prev, mass)) if (lambda - *prev).abs() <= tie_tol => *mass += probs[i],
                _ => out.push((lambda, probs[i])),
            }
        }
        Ok(out)
    }
}

/// Projects a signal onto the frequency components: alpha = U^T x.
pub fn signal_spectrum(sd: &SpectralDecomposition, x: &Array1<f64>) -> Spectrum {
    let alpha = sd.eigenvectors().t().dot(x);
    Spectrum::from_coefficients(alpha)
}

/// Response efficiency mu_g(x): how well the filter's spectral response
/// lines up with the signal's frequency distribution.
pub fn response_efficiency(
    filter: &PolynomialFilter,
    spectrum: &Spectrum,
    sd: &SpectralDecomposition,
) -> Result<f64> {
    if spectrum.is_zero() {
        return Err(Error::DegenerateSignal {
            context: "response efficiency",
        });
    }
    let response = filter.response(sd.eigenvalues());
    let response_sum: f64 = response.sum();
    if response_sum.abs() < 1e-12 {
        return Err(Error::UndefinedEfficiency);
    }
    let alpha_sq_sum = spectrum.norm_sq();
    let weighted: f64 = response
        .iter()
        .zip(spectrum.coefficients().iter())
        .map(|(g, a)| g * a * a)
        .sum();
    Ok(weighted / (response_sum * alpha_sq_sum))
}

/// Information content I(delta) = -sum over support of ln(p_i); natural
/// logarithm throughout.
pub fn information_content(spectrum: &Spectrum) -> Result<f64> {
    if spectrum.is_zero() {
        return Err(Error::DegenerateSignal {
            context: "information content",
        });
    }
    let total = spectrum.norm_sq();
    Ok(spectrum
        .support()
        .iter()
        .map(|&i| {
            let p = spectrum.coefficients()[i].powi(2) / total;
            -p.ln()
        })
        .sum())
}

/// Both sides of the moment identity for one class and power, plus the
/// derived label-frequency mean and variance.
#[derive(Debug, Clone)]
pub struct MomentIdentity {
    /// Spectral side: mu_g(y_l) * sum g(lambda_i) for g = (.)^m.
    pub lhs: f64,
    /// Matrix side: (R^{-1/2} Y^T (I - tilde_A)^m Y R^{-1/2})_{ll}.
    pub rhs: f64,
    pub gap: f64,
    /// E[f_l] = 1 - pi_tilde_l^1.
    pub expected_frequency: f64,
    /// Var(f_l) = pi_tilde_l^(2) - (pi_tilde_l^1)^2.
    pub frequency_variance: f64,
}

pub fn label_moment_identity_check(
    graph: &LabeledGraph,
    ops: &NormalizedOperators,
    sd: &SpectralDecomposition,
    class: usize,
    power: usize,
) -> MomentIdentity {
    assert!((1..=4).contains(&power), "moment power must be in 1..=4");
    let y = graph.class_indicator(class);
    let r = graph.class_sizes()[class] as f64;

    // Spectral side via the eigenbasis.
    let spectrum = signal_spectrum(sd, &y);
    let alpha_sq_sum = spectrum.norm_sq();
    let lhs = sd
        .eigenvalues()
        .iter()
        .zip(spectrum.coefficients().iter())
        .map(|(l, a)| l.powi(power as i32) * a * a)
        .sum::<f64>()
        / alpha_sq_sum;

    // Matrix side via explicit powers of tilde_L.
    let mut acc = y.clone();
    for _ in 0..power {
        acc = ops.tilde_l.dot(&acc);
    }
    let rhs = y.dot(&acc) / r;

    let pi1 = y.dot(&ops.tilde_a.dot(&y)) / r;
    let pi2 = {
        let ay = ops.tilde_a.dot(&y);
        ay.dot(&ay) / r
    };

    MomentIdentity {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
        expected_frequency: 1.0 - pi1,
        frequency_variance: pi2 - pi1 * pi1,
    }
}
