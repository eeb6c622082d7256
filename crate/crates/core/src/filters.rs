//! Polynomial graph filters in the Laplacian eigenvalue variable.
//!
//! A filter is a polynomial g(lambda) applied to the normalized Laplacian:
//! g(tilde_L) = U g(diag lambda) U^T. Family membership keeps track of the
//! range condition g([0,2]) in [0,1] and the spectral mass condition
//! sum_i g(lambda_i) > 1, plus the first/second-order subfamilies whose
//! sign structure decides low- versus high-pass behaviour.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::graph::{LabeledGraph, NormalizedOperators, SpectralDecomposition};
use crate::{Error, Result};

/// Grid resolution for the range check of filters with degree >= 3.
const RANGE_GRID_POINTS: usize = 2049;

/// Polynomial filter g(lambda) = sum c_j lambda^j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialFilter {
    coefficients: Vec<f64>,
}

impl PolynomialFilter {
    pub fn from_coefficients(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::FilterSpec {
                spec: String::new(),
                reason: "a filter needs at least one coefficient".into(),
            });
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::FilterSpec {
                spec: format!("{coefficients:?}"),
                reason: "coefficients must be finite".into(),
            });
        }
        let mut coefficients = coefficients;
        while coefficients.len() > 1 && *coefficients.last().unwrap() == 0.0 {
            coefficients.pop();
        }
        Ok(Self { coefficients })
    }

    pub fn constant(c: f64) -> Self {
        Self {
            coefficients: vec![c],
        }
    }

    /// First-order filter epsilon_1 + epsilon_2 lambda.
    pub fn first_order(eps1: f64, eps2: f64) -> Self {
        Self::from_coefficients(vec![eps1, eps2]).expect("finite coefficients")
    }

    /// Second-order filter epsilon'_1 + epsilon'_2 lambda + epsilon'_3 lambda^2.
    pub fn second_order(eps1: f64, eps2: f64, eps3: f64) -> Self {
        Self::from_coefficients(vec![eps1, eps2, eps3]).expect("finite coefficients")
    }

    /// The GCN propagation filter I - tilde_L, i.e. g(lambda) = 1 - lambda.
    pub fn gcn() -> Self {
        Self::first_order(1.0, -1.0)
    }

    /// GCN filter scaled into [0, 1]: g(lambda) = 1 - lambda/2.
    pub fn normalized_gcn() -> Self {
        Self::first_order(1.0, -0.5)
    }

    /// The GIN-style filter (2 + eps) I - tilde_L.
    pub fn gin(eps: f64) -> Self {
        Self::first_order(2.0 + eps, -1.0)
    }

    /// ChebNet basis filter C^(k): C^(1) = 1, C^(2) = lambda - 1, and
    /// C^(s) = 2 (lambda - 1) C^(s-1) - C^(s-2) with lambda_max = 2.
    pub fn cheb(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::FilterSpec {
                spec: "cheb:0".into(),
                reason: "chebyshev order starts at 1".into(),
            });
        }
        let mut prev = Self::constant(1.0);
        if k == 1 {
            return Ok(prev);
        }
        let base = Self::first_order(-1.0, 1.0);
        let mut cur = base.clone();
        for _ in 2..k {
            let next = base.mul(&cur).scale(2.0).sub(&prev);
            prev = cur;
            cur = next;
        }
        Ok(cur)
    }

    /// Truncated polynomial stand-in for a one-pole rational (ARMA-style)
    /// response p0 / (1 + q lambda), expanded as a geometric series to the
    /// given degree. Only an approximation; exact rational filtering is out
    /// of scope.
    pub fn arma_truncated(p0: f64, q: f64, degree: usize) -> Result<Self> {
        if q.abs() >= 0.5 {
            return Err(Error::FilterSpec {
                spec: format!("arma p0={p0} q={q}"),
                reason: "the expansion only converges for |q lambda| < 1 on [0,2]".into(),
            });
        }
        let coefficients = (0..=degree).map(|j| p0 * (-q).powi(j as i32)).collect();
        Self::from_coefficients(coefficients)
    }

    /// Parses the CLI filter syntax: `poly:c0,c1,...`, `geps:<eps>`,
    /// `gcn`, `gin:<eps>`, `cheb:<k>`.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = |reason: String| Error::FilterSpec {
            spec: spec.to_string(),
            reason,
        };
        if spec == "gcn" {
            return Ok(Self::gcn());
        }
        if let Some(rest) = spec.strip_prefix("poly:") {
            let coefficients: std::result::Result<Vec<f64>, _> =
                rest.split(',').map(|t| t.trim().parse::<f64>()).collect();
            return Self::from_coefficients(
                coefficients.map_err(|e| bad(format!("bad coefficient list: {e}")))?,
            );
        }
        if let Some(rest) = spec.strip_prefix("geps:") {
            let eps: f64 = rest
                .trim()
                .parse()
                .map_err(|e| bad(format!("bad epsilon: {e}")))?;
            return Ok(NormalizedSecondOrderFilter::new(eps)?.filter());
        }
        if let Some(rest) = spec.strip_prefix("gin:") {
            let eps: f64 = rest
                .trim()
                .parse()
                .map_err(|e| bad(format!("bad epsilon: {e}")))?;
            return Ok(Self::gin(eps));
        }
        if let Some(rest) = spec.strip_prefix("cheb:") {
            let k: usize = rest
                .trim()
                .parse()
                .map_err(|e| bad(format!("bad order: {e}")))?;
            return Self::cheb(k);
        }
        Err(bad(
            "expected one of poly:c0,c1,..., geps:<eps>, gcn, gin:<eps>, cheb:<k>".into(),
        ))
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Horner evaluation of g(lambda).
    pub fn evaluate(&self, lambda: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coefficients.iter().rev() {
            acc = acc * lambda + c;
        }
        acc
    }

    /// Spectral response g(lambda_i) over a set of eigenvalues.
    pub fn response(&self, eigenvalues: &Array1<f64>) -> Array1<f64> {
        eigenvalues.mapv(|l| self.evaluate(l))
    }

    /// Derivative polynomial g'.
    pub fn derivative(&self) -> Self {
        if self.coefficients.len() == 1 {
            return Self::constant(0.0);
        }
        let coefficients = self
            .coefficients
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, c)| j as f64 * c)
            .collect();
        Self { coefficients }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            coefficients: self.coefficients.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.coefficients.len().max(other.coefficients.len());
        let mut coefficients = vec![0.0; len];
        for (i, c) in self.coefficients.iter().enumerate() {
            coefficients[i] += c;
        }
        for (i, c) in other.coefficients.iter().enumerate() {
            coefficients[i] += c;
        }
        Self::from_coefficients(coefficients).expect("finite sums")
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut coefficients = vec![0.0; self.coefficients.len() + other.coefficients.len() - 1];
        for (i, a) in self.coefficients.iter().enumerate() {
            for (j, b) in other.coefficients.iter().enumerate() {
                coefficients[i + j] += a * b;
            }
        }
        Self::from_coefficients(coefficients).expect("finite products")
    }

    /// Convex combination l1 * self + (1 - l1) * other.
    pub fn blend(&self, other: &Self, l1: f64) -> Self {
        self.scale(l1).add(&other.scale(1.0 - l1))
    }

    /// g(M) for a dense symmetric matrix via Horner's rule. Exact up to
    /// rounding; no eigendecomposition involved.
    pub fn matrix_polynomial(&self, m: &Array2<f64>) -> Array2<f64> {
        let n = m.nrows();
        let mut acc = Array2::<f64>::eye(n) * *self.coefficients.last().unwrap();
        for &c in self.coefficients.iter().rev().skip(1) {
            acc = acc.dot(m);
            for i in 0..n {
                acc[[i, i]] += c;
            }
        }
        acc
    }

    /// Exact range of g over [0, 2]: analytic for degree <= 2, otherwise a
    /// dense grid with derivative-root refinement between grid points.
    pub fn range_on_standard_interval(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut consider = |v: f64| {
            lo = lo.min(v);
            hi = hi.max(v);
        };
        consider(self.evaluate(0.0));
        consider(self.evaluate(2.0));
        match self.degree() {
            0 | 1 => {}
            2 => {
                let c1 = self.coefficients[1];
                let c2 = self.coefficients[2];
                let vertex = -c1 / (2.0 * c2);
                if (0.0..=2.0).contains(&vertex) {
                    consider(self.evaluate(vertex));
                }
            }
            _ => {
                let deriv = self.derivative();
                let step = 2.0 / (RANGE_GRID_POINTS - 1) as f64;
                let mut prev_x = 0.0;
                let mut prev_d = deriv.evaluate(prev_x);
                for i in 1..RANGE_GRID_POINTS {
                    let x = i as f64 * step;
                    consider(self.evaluate(x));
                    let d = deriv.evaluate(x);
                    if prev_d == 0.0 {
                        consider(self.evaluate(prev_x));
                    } else if prev_d * d < 0.0 {
                        // Bisect the derivative sign change to the extremum.
                        let (mut a, mut b) = (prev_x, x);
                        let mut da = prev_d;
                        for _ in 0..60 {
                            let mid = 0.5 * (a + b);
                            let dm = deriv.evaluate(mid);
                            if da * dm <= 0.0 {
                                b = mid;
                            } else {
                                a = mid;
                                da = dm;
                            }
                        }
                        consider(self.evaluate(0.5 * (a + b)));
                    }
                    prev_x = x;
                    prev_d = d;
                }
            }
        }
        (lo, hi)
    }
}

/// Normalized second-order filter g_eps peaking at lambda = 1 - eps:
/// g_eps(lambda) = 1 - ((1 - eps) - lambda)^2 / (1 + |eps|)^2.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NormalizedSecondOrderFilter {
    epsilon: f64,
}

impl NormalizedSecondOrderFilter {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(-1.0..1.0).contains(&epsilon) && epsilon != 0.0
            && (epsilon <= -1.0 || epsilon >= 1.0) {
                return Err(Error::FilterSpec {
                    spec: format!("geps:{epsilon}"),
                    reason: "epsilon must lie in (-1, 1)".into(),
                });
            }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Expansion coefficients (eps'_1, eps'_2, eps'_3) in the lambda variable.
    pub fn expansion(&self) -> (f64, f64, f64) {
        let e = self.epsilon;
        let s2 = (1.0 + e.abs()).powi(2);
        let u = 1.0 - e;
        ((s2 - u * u) / s2, 2.0 * u / s2, -1.0 / s2)
    }

    pub fn filter(&self) -> PolynomialFilter {
        let (e1, e2, e3) = self.expansion();
        PolynomialFilter::second_order(e1, e2, e3)
    }
}

/// Low/high-pass classification of a first- or second-order filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassKind {
    Low,
    High,
    Neither,
}

/// Family-membership verdicts for one filter against one spectrum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterFamilyCheck {
    /// Range condition g([0,2]) in [0,1] and sum_i g(lambda_i) > 1.
    pub in_sg: bool,
    /// Degree-1 member of the family with eps_2 != 0.
    pub in_sg1: bool,
    /// Degree-2 member with eps'_3 < 0.
    pub in_sg2: bool,
    pub pass_kind: PassKind,
    pub response_sum: f64,
    pub range: (f64, f64),
}

/// Classifies pass behaviour from the coefficient signs: first order by
/// sign of eps_2, second order by sign of eps'_2 + 2 eps'_3.
pub fn pass_kind(filter: &PolynomialFilter) -> PassKind {
    let c = filter.coefficients();
    match filter.degree() {
        1 => {
            if c[1] < 0.0 {
                PassKind::Low
            } else if c[1] > 0.0 {
                PassKind::High
            } else {
                PassKind::Neither
            }
        }
        2 => {
            let steer = c[1] + 2.0 * c[2];
            if steer < 0.0 {
                PassKind::Low
            } else if steer > 0.0 {
                PassKind::High
            } else {
                PassKind::Neither
            }
        }
        _ => PassKind::Neither,
    }
}

pub fn family_check(filter: &PolynomialFilter, sd: &SpectralDecomposition) -> FilterFamilyCheck {
    let range = filter.range_on_standard_interval();
    let response_sum = filter.response(sd.eigenvalues()).sum();
    let range_ok = range.0 >= -1e-12 && range.1 <= 1.0 + 1e-12;
    let in_sg = range_ok && response_sum > 1.0;
    let c = filter.coefficients();
    let in_sg1 = in_sg && filter.degree() == 1 && c[1] != 0.0;
    let in_sg2 = in_sg && filter.degree() == 2 && c[2] < 0.0;
    FilterFamilyCheck {
        in_sg,
        in_sg1,
        in_sg2,
        pass_kind: pass_kind(filter),
        response_sum,
        range,
    }
}

/// Applies g(tilde_L) to a signal matrix through the eigenbasis:
/// U g(diag lambda) U^T X.
pub fn apply(
    filter: &PolynomialFilter,
    sd: &SpectralDecomposition,
    x: &Array2<f64>,
) -> Result<Array2<f64>> {
    apply_power(filter, sd, 1, x)
}

/// Applies (g(tilde_L))^h in a single sandwich by raising the response.
pub fn apply_power(
    filter: &PolynomialFilter,
    sd: &SpectralDecomposition,
    h: usize,
    x: &Array2<f64>,
) -> Result<Array2<f64>> {
    let n = sd.len();
    if x.nrows() != n {
        return Err(Error::DimMismatch {
            context: "signal rows vs graph size",
            expected: n,
            got: x.nrows(),
        });
    }
    if h == 0 {
        return Ok(x.clone());
    }
    let response = filter
        .response(sd.eigenvalues())
        .mapv(|g| g.powi(h as i32));
    let mut projected = sd.eigenvectors().t().dot(x);
    for (mut row, g) in projected.rows_mut().into_iter().zip(response.iter()) {
        row.mapv_inplace(|v| v * g);
    }
    Ok(sd.eigenvectors().dot(&projected))
}

/// Vector convenience wrapper around [`apply`].
pub fn apply_vec(
    filter: &PolynomialFilter,
    sd: &SpectralDecomposition,
    x: &Array1<f64>,
) -> Result<Array1<f64>> {
    let m = x.view().insert_axis(ndarray::Axis(1)).to_owned();
    Ok(apply(filter, sd, &m)?.column(0).to_owned())
}

/// The transformed interaction matrix g~(I - Pi~) =
/// R^{-1/2} Y^T g(I - tilde_A) Y R^{-1/2}, computed by applying g to the
/// Laplacian as a matrix polynomial and sandwiching. This is explicitly not
/// g evaluated on the K x K matrix Pi~ itself.
pub fn transformed_interaction(
    filter: &PolynomialFilter,
    graph: &LabeledGraph,
    ops: &NormalizedOperators,
) -> Array2<f64> {
    let g_l = filter.matrix_polynomial(&ops.tilde_l);
    let lm = graph.label_matrix();
    let y = lm.matrix();
    let r = lm.class_sizes();
    let mut sandwiched = y.t().dot(&g_l).dot(y);
    let kc = r.len();
    for l in 0..kc {
        for m in 0..kc {
            sandwiched[[l, m]] /= (r[l] as f64 * r[m] as f64).sqrt();
        }
    }
    sandwiched
}

/// Binary transformed homophily degree H_1(g~(I - Pi~) | G_n). Equal to the
/// quadratic form (y_0 - y_1)^T g(tilde_L) (y_0 - y_1) / n, and nonnegative
/// whenever g is nonnegative on [0, 2].
pub fn filter_homophily(
    filter: &PolynomialFilter,
    graph: &LabeledGraph,
    ops: &NormalizedOperators,
) -> Result<f64> {
    if graph.class_count() != 2 {
        return Err(Error::NotBinary {
            k: graph.class_count(),
        });
    }
    let t = transformed_interaction(filter, graph, ops);
    let r = graph.class_sizes();
    let n = graph.node_count() as f64;
    let (r0, r1) = (r[0] as f64, r[1] as f64);
    Ok((r0 * t[[0, 0]] + r1 * t[[1, 1]] - 2.0 * (r0 * r1).sqrt() * t[[0, 1]]) / n)
}

/// Fast spectral route for the same quantity: sum_i g(lambda_i) delta_i^2 / n,
/// with delta the spectrum of y_0 - y_1. Used in hot search loops.
pub fn filter_homophily_from_spectrum(
    filter: &PolynomialFilter,
    eigenvalues: &Array1<f64>,
    delta_sq: &Array1<f64>,
) -> f64 {
    let n = eigenvalues.len() as f64;
    eigenvalues
        .iter()
        .zip(delta_sq.iter())
        .map(|(&l, &d)| filter.evaluate(l) * d)
        .sum::<f64>()
        / n
}

/// Closed-form transformed homophily for first/second-order filters,
/// together with the variant printed in the source derivation (which
/// weights the constant term by (sqrt(R_0) - sqrt(R_1))^2 / n and does not
/// match the direct quadratic form; it is retained for reporting only).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClosedFormHomophily {
    /// (eps_1 + eps_2) - eps_2 H_1 for degree 1;
    /// (eps'_1 + eps'_2 + eps'_3) - (eps'_2 + 2 eps'_3) H_1 + eps'_3 H_2
    /// for degree 2. Matches `filter_homophily` to rounding.
    pub value: f64,
    /// Same structure with the constant term scaled by
    /// (sqrt(R_0) - sqrt(R_1))^2 / n, as printed in the derivation.
    pub stated_variant: f64,
}

pub fn closed_form_filter_homophily(
    filter: &PolynomialFilter,
    h1: f64,
    h2: f64,
    class_sizes: &[usize],
) -> Result<ClosedFormHomophily> {
    if class_sizes.len() != 2 {
        return Err(Error::NotBinary {
            k: class_sizes.len(),
        });
    }
    let n = (class_sizes[0] + class_sizes[1]) as f64;
    let a = ((class_sizes[0] as f64).sqrt() - (class_sizes[1] as f64).sqrt()).powi(2) / n;
    let c = filter.coefficients();
    let (constant, rest) = match filter.degree() {
        0 => (c[0], 0.0),
        1 => (c[0] + c[1], -c[1] * h1),
        2 => (
            c[0] + c[1] + c[2],
            -(c[1] + 2.0 * c[2]) * h1 + c[2] * h2,
        ),
        d => return Err(Error::DegreeTooHigh { degree: d }),
    };
    Ok(ClosedFormHomophily {
        value: constant + rest,
        stated_variant: constant * a + rest,
    })
}
