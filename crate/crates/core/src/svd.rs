//! Truncated singular value decomposition via one-sided Jacobi rotations.
//!
//! The sweep order is fixed (ascending column pairs), so the factorization is
//! reproducible bit-for-bit on a given platform. Jacobi runs on whichever side
//! of the input has fewer columns; the rotations accumulate into an exactly
//! orthonormal factor while the worked columns converge to U*S.
//!
//! Sign ambiguity is resolved on the right factor: each column of V is flipped
//! so its largest-magnitude entry is positive, with the matching U column
//! flipped in tandem to preserve the product.

use crate::array::Array;
use crate::error::{Error, Result};

const JACOBI_REL_TOL: f64 = 1e-13;
const MAX_SWEEPS: usize = 64;

/// Thin rank-k factorization m = U * diag(S) * V^T.
#[derive(Clone, Debug)]
pub struct Svd {
    /// d x k, orthonormal columns.
    pub u: Array,
    /// k singular values, non-increasing, non-negative.
    pub s: Vec<f64>,
    /// n x k, orthonormal columns.
    pub v: Array,
}

/// Top-k SVD of a d x n matrix. Not part of the differentiable graph.
pub fn svd_truncated(m: &Array, k: usize) -> Result<Svd> {
    if m.ndim() != 2 {
        return Err(Error::dimension("svd", "input must be 2-d".into()));
    }
    let (d, n) = (m.rows(), m.cols());
    if k == 0 || k > d.min(n) {
        return Err(Error::dimension(
            "svd",
            format!("k={k} out of range for {d}x{n} input"),
        ));
    }
    if !m.all_finite() {
        return Err(Error::Numeric("svd input contains non-finite values".into()));
    }

    // Work on the side with fewer columns.
    let transposed = n > d;
    let work_input = if transposed { m.transpose() } else { m.clone() };
    let (wr, wc) = (work_input.rows(), work_input.cols());

    // Column-major copies: worked matrix and accumulated rotations.
    let mut w: Vec<Vec<f64>> = (0..wc).map(|j| work_input.col(j)).collect();
    let mut rot: Vec<Vec<f64>> = (0..wc)
        .map(|j| (0..wc).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let scale = w
        .iter()
        .flat_map(|c| c.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = JACOBI_REL_TOL * scale.max(1e-300);

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..wc.saturating_sub(1) {
            for j in i + 1..wc {
                let (a, b, c) = column_moments(&w, i, j);
                if c.abs() <= threshold * threshold || c * c <= JACOBI_REL_TOL * JACOBI_REL_TOL * a * b
                {
                    continue;
                }
                rotated = true;
                let zeta = (b - a) / (2.0 * c);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let cos = 1.0 / (1.0 + t * t).sqrt();
                let sin = cos * t;
                rotate_pair(&mut w, i, j, cos, sin);
                rotate_pair(&mut rot, i, j, cos, sin);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numeric("svd failed to converge".into()));
    }

    // Singular values with a deterministic descending order (ties by index).
    let norms: Vec<f64> = w.iter().map(|col| col.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..wc).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap().then(a.cmp(&b)));

    let mut u = Array::zeros(&[d, k]);
    let mut v = Array::zeros(&[n, k]);
    let mut s = Vec::with_capacity(k);
    for (out_col, &src) in order.iter().take(k).enumerate() {
        let sigma = norms[src];
        if sigma <= threshold {
            return Err(Error::Numeric(format!(
                "svd: requested k={k} exceeds numerical rank"
            )));
        }
        s.push(sigma);
        // w column normalizes to the left factor of the worked matrix,
        // rot column is the right factor; swap roles when transposed.
        let left: Vec<f64> = w[src].iter().map(|&x| x / sigma).collect();
        let right = &rot[src];
        let (u_col, v_col): (&[f64], &[f64]) = if transposed {
            (right, &left)
        } else {
            (&left, right)
        };
        for (i, &val) in u_col.iter().enumerate() {
            u.set(i, out_col, val);
        }
        for (i, &val) in v_col.iter().enumerate() {
            v.set(i, out_col, val);
        }
    }

    // Sign rule: largest-magnitude entry of each V column made positive.
    for j in 0..k {
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for i in 0..n {
            let a = v.at(i, j).abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if v.at(best, j) < 0.0 {
            for i in 0..n {
                let val = v.at(i, j);
                v.set(i, j, -val);
            }
            for i in 0..d {
                let val = u.at(i, j);
                u.set(i, j, -val);
            }
        }
    }

    Ok(Svd { u, s, v })
}

fn column_moments(w: &[Vec<f64>], i: usize, j: usize) -> (f64, f64, f64) {
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for (x, y) in w[i].iter().zip(&w[j]) {
        a += x * x;
        b += y * y;
        c += x * y;
    }
    (a, b, c)
}

fn rotate_pair(cols: &mut [Vec<f64>], i: usize, j: usize, cos: f64, sin: f64) {
    // Split borrow of the two columns.
    let (lo, hi) = cols.split_at_mut(j);
    let (ci, cj) = (&mut lo[i], &mut hi[0]);
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let xi = *x;
        let yj = *y;
        *x = cos * xi - sin * yj;
        *y = sin * xi + cos * yj;
    }
}

/// Max |A^T A - I| over a matrix with supposedly orthonormal columns.
pub fn orthonormality_defect(m: &Array) -> f64 {
    let gram = m.transpose().matmul(m).expect("square gram");
    let k = gram.rows();
    let mut worst = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram.at(i, j) - target).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo_random(n: usize, salt: u64) -> Vec<f64> {
        let mut s = salt.wrapping_add(0x9E3779B97F4A7C15);
        (0..n)
            .map(|_| {
                s = s.wrapping_add(0x9E3779B97F4A7C15);
                let mut z = s;
                z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
                z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
                z ^= z >> 31;
                (z as f64 / u64::MAX as f64) * 2.0 - 1.0
            })
            .collect()
    }

    /// Eigenvalues of a symmetric matrix by classic two-sided Jacobi; used as
    /// an oracle independent of the one-sided SVD path.
    fn jacobi_eigenvalues(sym: &Array) -> Vec<f64> {
        let n = sym.rows();
        let mut a: Vec<Vec<f64>> = (0..n).map(|i| sym.row(i).to_vec()).collect();
        for _ in 0..100 {
            let mut off = 0.0f64;
            for i in 0..n {
                for j in i + 1..n {
                    off = off.max(a[i][j].abs());
                }
            }
            if off < 1e-14 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut eig: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
        eig
    }

    #[test]
    fn diagonal_matrix_truncates_to_top_two() {
        let m = Array::from_vec(&[3, 3], vec![3.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let svd = svd_truncated(&m, 2).unwrap();
        assert!((svd.s[0] - 3.0).abs() < 1e-12);
        assert!((svd.s[1] - 2.0).abs() < 1e-12);
        // V columns are the first two standard basis vectors under the sign rule.
        assert!((svd.v.at(0, 0) - 1.0).abs() < 1e-12);
        assert!((svd.v.at(1, 1) - 1.0).abs() < 1e-12);
        assert!(svd.v.at(2, 0).abs() < 1e-12 && svd.v.at(2, 1).abs() < 1e-12);
    }

    #[test]
    fn rank_one_outer_product() {
        let u = [1.0, -2.0, 0.5];
        let v = [3.0, 1.0, -1.0, 2.0];
        let mut m = Array::zeros(&[3, 4]);
        for i in 0..3 {
            for j in 0..4 {
                m.set(i, j, u[i] * v[j]);
            }
        }
        let svd = svd_truncated(&m, 1).unwrap();
        let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((svd.s[0] - nu * nv).abs() < 1e-12);
    }

    #[test]
    fn random_matrix_matches_gram_eigenvalue_oracle() {
        let m = Array::from_vec(&[6, 8], pseudo_random(48, 42)).unwrap();
        let svd = svd_truncated(&m, 3).unwrap();

        assert!(orthonormality_defect(&svd.u) < 1e-8);
        assert!(orthonormality_defect(&svd.v) < 1e-8);
        assert!(svd.s[0] >= svd.s[1] && svd.s[1] >= svd.s[2]);

        let gram = m.transpose().matmul(&m).unwrap();
        let eig = jacobi_eigenvalues(&gram);
        for i in 0..3 {
            assert!((svd.s[i] * svd.s[i] - eig[i]).abs() < 1e-8);
        }

        // Best rank-3 approximation: residual energy equals the left-over eigenvalues.
        let mut approx = Array::zeros(&[6, 8]);
        for t in 0..3 {
            for i in 0..6 {
                for j in 0..8 {
                    let add = svd.s[t] * svd.u.at(i, t) * svd.v.at(j, t);
                    let cur = approx.at(i, j);
                    approx.set(i, j, cur + add);
                }
            }
        }
        let mut residual = 0.0;
        for i in 0..6 {
            for j in 0..8 {
                let r = m.at(i, j) - approx.at(i, j);
                residual += r * r;
            }
        }
        let tail: f64 = eig[3..].iter().sum();
        assert!((residual - tail).abs() < 1e-8);
    }

    #[test]
    fn tall_and_wide_inputs_agree() {
        // SVD of m and of m^T must expose the same singular values.
        let m = Array::from_vec(&[5, 9], pseudo_random(45, 7)).unwrap();
        let a = svd_truncated(&m, 4).unwrap();
        let b = svd_truncated(&m.transpose(), 4).unwrap();
        for i in 0..4 {
            assert!((a.s[i] - b.s[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn k_out_of_range_is_rejected() {
        let m = Array::zeros(&[3, 4]);
        assert!(svd_truncated(&m, 4).is_err());
        assert!(svd_truncated(&m, 0).is_err());
    }

    #[test]
    fn deterministic_across_calls() {
        let m = Array::from_vec(&[7, 5], pseudo_random(35, 99)).unwrap();
        let a = svd_truncated(&m, 3).unwrap();
        let b = svd_truncated(&m, 3).unwrap();
        assert_eq!(a.u, b.u);
        assert_eq!(a.s, b.s);
        assert_eq!(a.v, b.v);
    }
}
