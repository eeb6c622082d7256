//! Dense symmetric eigensolver: Householder tridiagonalization followed by
//! implicit-shift QL iteration with accumulated eigenvectors.
//!
//! Graphs handled here stay below a few thousand nodes, so a dense
//! O(n^3) solve is the right tool; the frequency-distribution definitions
//! need the full spectrum anyway.

use ndarray::{s, Array1, Array2};

use crate::{Error, Result};

/// Eigenvalues (ascending) and matching orthonormal eigenvector columns.
pub struct SymEigen {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

/// Full eigendecomposition of a symmetric matrix.
///
/// The input is copied; symmetry is the caller's responsibility (only the
/// lower triangle is referenced during reduction). Eigenvalues come back
/// sorted ascending with eigenvector columns permuted to match.
pub fn sym_eigen(a: &Array2<f64>) -> Result<SymEigen> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimMismatch {
            context: "sym_eigen requires a square matrix",
            expected: n,
            got: a.ncols(),
        });
    }
    if n == 0 {
        return Err(Error::EmptyGraph);
    }

    let mut z = a.clone();
    let mut d = vec![0.0_f64; n];
    let mut e = vec![0.0_f64; n];
    tred2(&mut z, &mut d, &mut e);
    // QL rotations touch eigenvector pairs componentwise; keeping vectors
    // in rows makes those updates contiguous in memory.
    let mut zt = z.t().as_standard_layout().into_owned();
    tqli(&mut d, &mut e, &mut zt)?;

    // Ascending sort, permuting eigenvector rows of zt into columns.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).expect("eigenvalue is NaN"));
    let values = Array1::from_iter(order.iter().map(|&i| d[i]));
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors[[r, dst]] = zt[[src, r]];
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Householder reduction of a real symmetric matrix to tridiagonal form.
///
/// On return `a` holds the orthogonal transformation matrix, `d` the
/// diagonal, and `e` the subdiagonal (with `e[0] = 0`). Port of the
/// classic `tred2` routine.
fn tred2(a: &mut Array2<f64>, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..=l {
                scale += a[[i, k]].abs();
            }
            if scale == 0.0 {
                e[i] = a[[i, l]];
            } else {
                for k in 0..=l {
                    a[[i, k]] /= scale;
                    h += a[[i, k]] * a[[i, k]];
                }
                let mut f = a[[i, l]];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[[i, l]] = f - g;
                f = 0.0;
                for j in 0..=l {
                    a[[j, i]] = a[[i, j]] / h;
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[[j, k]] * a[[i, k]];
                    }
                    for k in (j + 1)..=l {
                        g += a[[k, j]] * a[[i, k]];
                    }
                    e[j] = g / h;
                    f += e[j] * a[[i, j]];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = a[[i, j]];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        let delta = f * e[k] + g * a[[i, k]];
                        a[[j, k]] -= delta;
                    }
                }
            }
        } else {
            e[i] = a[[i, l]];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    // Accumulate the transform row-by-row so the inner loops stay
    // contiguous; per entry the summation order matches the textbook
    // column-wise form exactly.
    let mut g = vec![0.0_f64; n];
    for i in 0..n {
        if d[i] != 0.0 {
            for gj in g.iter_mut().take(i) {
                *gj = 0.0;
            }
            for k in 0..i {
                let aik = a[[i, k]];
                if aik != 0.0 {
                    for j in 0..i {
                        g[j] += aik * a[[k, j]];
                    }
                }
            }
            for k in 0..i {
                let aki = a[[k, i]];
                for j in 0..i {
                    a[[k, j]] -= g[j] * aki;
                }
            }
        }
        d[i] = a[[i, i]];
        a[[i, i]] = 1.0;
        for j in 0..i {
            a[[j, i]] = 0.0;
            a[[i, j]] = 0.0;
        }
    }
}

const MAX_QL_ITERATIONS: usize = 50;

/// Implicit-shift QL iteration on a tridiagonal matrix, updating the
/// eigenvector accumulation in `zt` (eigenvectors stored as rows). Port
/// of `tqli`.
fn tqli(d: &mut [f64], e: &mut [f64], zt: &mut Array2<f64>) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            // Locate a negligible subdiagonal element.
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_ITERATIONS {
                let offdiag = e[l].abs();
                return Err(Error::EigenNonConvergence {
                    n,
                    iterations: MAX_QL_ITERATIONS,
                    offdiag,
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + sign_of(r, g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflowed = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflowed = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let (upper, lower) = zt.multi_slice_mut((s![i, ..], s![i + 1, ..]));
                let upper = upper.into_slice().expect("contiguous row");
                let lower = lower.into_slice().expect("contiguous row");
                for k in 0..n {
                    f = lower[k];
                    lower[k] = s * upper[k] + c * f;
                    upper[k] = c * upper[k] - s * f;
                }
            }
            if underflowed {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

fn sign_of(magnitude: f64, sign_source: f64) -> f64 {
    if sign_source >= 0.0 {
        magnitude.abs()
    } else {
        -magnitude.abs()
    }
}
