//! Cyclic Jacobi eigendecomposition for complex hermitian matrices.
//!
//! Each rotation annihilates one off-diagonal pair with a phased plane
//! rotation; sweeps repeat until every off-diagonal magnitude falls below
//! `CONVERGENCE_TOL` times the largest entry of the input.

use num_complex::Complex64;

use super::cmatrix::CMatrix;
use crate::{Error, Result};

/// Relative hermiticity tolerance accepted on input.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Off-diagonal magnitudes below this fraction of the input's largest entry
/// count as annihilated.
pub const CONVERGENCE_TOL: f64 = 1e-13;
const MAX_SWEEPS: usize = 100;

/// Eigenvalues (ascending) and eigenvectors (matching columns) of a complex
/// hermitian matrix.
///
/// Column phases follow a fixed convention: the largest-magnitude component
/// of each eigenvector is real and positive, so equal inputs give bit-equal
/// outputs.
pub fn diagonalize(matrix: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = matrix.dim();
    let scale = matrix.max_abs();
    if matrix.hermiticity_error() > HERMITICITY_TOL * scale {
        return Err(Error::parameter(format!(
            "matrix is not hermitian: asymmetry {:.3e} exceeds {:.3e}",
            matrix.hermiticity_error(),
            HERMITICITY_TOL * scale
        )));
    }

    let mut a = matrix.clone();
    a.hermitize();
    let mut v = CMatrix::identity(n);
    let threshold = CONVERGENCE_TOL * scale;

    let mut converged = off_diagonal_max(&a) <= threshold;
    let mut sweeps = 0;
    while !converged {
        if sweeps >= MAX_SWEEPS {
            return Err(Error::numerical(format!(
                "Jacobi iteration did not converge in {MAX_SWEEPS} sweeps \
                 (off-diagonal {:.3e}, threshold {:.3e})",
                off_diagonal_max(&a),
                threshold
            )));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q, threshold);
            }
        }
        sweeps += 1;
        converged = off_diagonal_max(&a) <= threshold;
    }

    // Sort ascending; diagonal entries are real up to rounding at this point.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());

    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = CMatrix::zeros(n);
    for (col, &src) in order.iter().enumerate() {
        // Phase convention: largest-magnitude component real positive.
        let mut best = 0usize;
        let mut best_mag = 0.0f64;
        for r in 0..n {
            let mag = v[(r, src)].norm();
            if mag > best_mag {
                best_mag = mag;
                best = r;
            }
        }
        let pivot = v[(best, src)];
        let phase = if best_mag > 0.0 {
            pivot.conj() / best_mag
        } else {
            Complex64::new(1.0, 0.0)
        };
        for r in 0..n {
            vectors[(r, col)] = v[(r, src)] * phase;
        }
    }

    Ok((eigenvalues, vectors))
}

fn off_diagonal_max(a: &CMatrix) -> f64 {
    let n = a.dim();
    let mut worst = 0.0f64;
    for p in 0..n {
        for q in (p + 1)..n {
            worst = worst.max(a[(p, q)].norm());
        }
    }
    worst
}

/// One phased Jacobi rotation annihilating the (p, q) entry.
fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize, threshold: f64) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag <= threshold {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;

    let theta = (aqq - app) / (2.0 * mag);
    let t = if theta >= 0.0 {
        -1.0 / (theta + (theta * theta + 1.0).sqrt())
    } else {
        1.0 / (-theta + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let sigma = t * c;
    let phase = apq / mag; // e^{i arg(apq)}
    let s = sigma * phase.conj();

    let n = a.dim();
    // Column update A <- A R.
    for r in 0..n {
        let arp = a[(r, p)];
        let arq = a[(r, q)];
        a[(r, p)] = c * arp + s * arq;
        a[(r, q)] = -s.conj() * arp + c * arq;
    }
    // Row update A <- R^\dagger A.
    for col in 0..n {
        let apc = a[(p, col)];
        let aqc = a[(q, col)];
        a[(p, col)] = c * apc + s.conj() * aqc;
        a[(q, col)] = -s * apc + c * aqc;
    }
    // Scrub the rounding residue on the annihilated pair and keep the
    // diagonal exactly real.
    let avg = 0.5 * (a[(p, q)] + a[(q, p)].conj());
    debug_assert!(avg.norm() <= 1e-10 * (1.0 + a.max_abs()));
    a[(p, q)] = Complex64::new(0.0, 0.0);
    a[(q, p)] = Complex64::new(0.0, 0.0);
    a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);

    // Accumulate V <- V R.
    for r in 0..n {
        let vrp = v[(r, p)];
        let vrq = v[(r, q)];
        v[(r, p)] = c * vrp + s * vrq;
        v[(r, q)] = -s.conj() * vrp + c * vrq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn reconstruct(eigenvalues: &[f64], vectors: &CMatrix) -> CMatrix {
        let lambda = CMatrix::from_diagonal(eigenvalues);
        vectors.matmul(&lambda).matmul(&vectors.conjugate_transpose())
    }

    #[test]
    fn identity_eigenvalues_are_all_one() {
        let (vals, vecs) = diagonalize(&CMatrix::identity(5)).unwrap();
        assert!(vals.iter().all(|&l| (l - 1.0).abs() < 1e-14));
        assert!(vecs.unitarity_error() < 1e-14);
    }

    #[test]
    fn pauli_x_spectrum() {
        let m = CMatrix::from_rows(2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let (vals, vecs) = diagonalize(&m).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14);
        assert!((vals[1] - 1.0).abs() < 1e-14);
        assert!(reconstruct(&vals, &vecs).max_abs_diff(&m) < 1e-13);
    }

    #[test]
    fn complex_2x2_known_spectrum() {
        // [[1, -i], [i, 1]] has eigenvalues 0 and 2.
        let m = CMatrix::from_rows(2, &[c(1.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(1.0, 0.0)]);
        let (vals, vecs) = diagonalize(&m).unwrap();
        assert!(vals[0].abs() < 1e-14);
        assert!((vals[1] - 2.0).abs() < 1e-14);
        assert!(reconstruct(&vals, &vecs).max_abs_diff(&m) < 1e-13);
        assert!(vecs.unitarity_error() < 1e-13);
    }

    #[test]
    fn random_hermitian_reconstructs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for dim in [3usize, 6, 8] {
            let mut m = CMatrix::zeros(dim);
            for r in 0..dim {
                m[(r, r)] = c(rng.random_range(-1.0..1.0), 0.0);
                for col in (r + 1)..dim {
                    let z = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    m[(r, col)] = z;
                    m[(col, r)] = z.conj();
                }
            }
            let (vals, vecs) = diagonalize(&m).unwrap();
            assert!(
                reconstruct(&vals, &vecs).max_abs_diff(&m) < 1e-10,
                "reconstruction failed at dim {dim}"
            );
            assert!(vecs.unitarity_error() < 1e-10);
            assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_rows(2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.5, 0.0), c(0.0, 0.0)]);
        assert!(matches!(diagonalize(&m), Err(Error::Parameter(_))));
    }

    #[test]
    fn sign_convention_is_deterministic() {
        let m = CMatrix::from_rows(2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let (_, v1) = diagonalize(&m).unwrap();
        let (_, v2) = diagonalize(&m).unwrap();
        assert_eq!(v1, v2);
        // Largest component of each column must be real positive.
        for col in 0..2 {
            let mut best = v1[(0, col)];
            if v1[(1, col)].norm() > best.norm() {
                best = v1[(1, col)];
            }
            assert!(best.im.abs() < 1e-15 && best.re > 0.0);
        }
    }
}
