//! Hamiltonians, density matrices, and unitary propagation for small dense
//! Hilbert spaces. All dynamics downstream of this module work in the energy
//! eigenbasis, so the eigendecomposition is computed once at construction and
//! cached.

mod cmatrix;
mod jacobi;

use num_complex::Complex64;
use rand::Rng;

pub use cmatrix::CMatrix;
pub use jacobi::{diagonalize, CONVERGENCE_TOL, HERMITICITY_TOL};

use crate::{Error, Result};

/// Hard cap on Hilbert-space dimension; everything is dense.
pub const MAX_DIM: usize = 64;

/// Eigenvector columns must satisfy `U^\dagger U = I` to this tolerance, and
/// `U \Lambda U^\dagger` must reproduce the input to the same tolerance.
pub const DECOMPOSITION_TOL: f64 = 1e-10;

/// Density-matrix eigenvalues may undershoot zero by at most this much.
pub const POSITIVITY_TOL: f64 = 1e-10;

/// Trace and hermiticity tolerance for density matrices.
pub const STATE_TOL: f64 = 1e-12;

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::parameter(format!(
            "dimension {dim} outside supported range 1..={MAX_DIM}"
        )));
    }
    Ok(())
}

/// A time-independent hermitian generator with cached eigendecomposition.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    matrix: CMatrix,
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
    min_gap: Option<f64>,
}

impl Hamiltonian {
    /// Validates hermiticity, diagonalizes, and caches the spectrum.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_dim(matrix.dim())?;
        let (eigenvalues, eigenvectors) = diagonalize(&matrix)?;

        let scale = matrix.max_abs().max(1.0);
        let reconstructed = eigenvectors
            .matmul(&CMatrix::from_diagonal(&eigenvalues))
            .matmul(&eigenvectors.conjugate_transpose());
        if eigenvectors.unitarity_error() > DECOMPOSITION_TOL
            || reconstructed.max_abs_diff(&matrix) > DECOMPOSITION_TOL * scale
        {
            return Err(Error::numerical(
                "eigendecomposition failed its self-consistency check",
            ));
        }

        let min_gap = min_nonzero_gap(&eigenvalues);
        Ok(Self {
            matrix,
            eigenvalues,
            eigenvectors,
            min_gap,
        })
    }

    /// Hamiltonian already diagonal in the working basis.
    pub fn from_diagonal(levels: &[f64]) -> Result<Self> {
        Self::new(CMatrix::from_diagonal(levels))
    }

    /// Two-level system with the given energy gap: `diag(0, gap)`.
    pub fn qubit(gap: f64) -> Result<Self> {
        Self::from_diagonal(&[0.0, gap])
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Energy levels, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Unitary whose columns are the energy eigenstates.
    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    /// Smallest nonzero level spacing; `None` when the spectrum is fully
    /// degenerate.
    pub fn min_gap(&self) -> Option<f64> {
        self.min_gap
    }

    /// Characteristic evolution time, the inverse of the smallest nonzero
    /// gap; `None` for a fully degenerate spectrum.
    pub fn zeta(&self) -> Option<f64> {
        self.min_gap.map(|g| 1.0 / g)
    }

    /// Largest level spacing (spectral span).
    pub fn max_gap(&self) -> f64 {
        match (self.eigenvalues.first(), self.eigenvalues.last()) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => 0.0,
        }
    }

    /// Gap `omega_n - omega_m` between two levels.
    pub fn gap(&self, n: usize, m: usize) -> f64 {
        self.eigenvalues[n] - self.eigenvalues[m]
    }

    /// Transforms a matrix into the energy eigenbasis (`U^\dagger M U`).
    pub fn to_eigenbasis(&self, m: &CMatrix) -> CMatrix {
        m.conjugate_by(&self.eigenvectors)
    }

    /// Transforms a matrix back from the energy eigenbasis (`U M U^\dagger`).
    pub fn from_eigenbasis(&self, m: &CMatrix) -> CMatrix {
        self.eigenvectors
            .matmul(m)
            .matmul(&self.eigenvectors.conjugate_transpose())
    }
}

/// Gaps at or below this fraction of the spectral scale count as degenerate.
const DEGENERACY_TOL: f64 = 1e-10;

fn min_nonzero_gap(eigenvalues: &[f64]) -> Option<f64> {
    let scale = eigenvalues
        .iter()
        .fold(0.0f64, |acc, &x| acc.max(x.abs()))
        .max(1.0);
    let mut min: Option<f64> = None;
    for (i, &a) in eigenvalues.iter().enumerate() {
        for &b in &eigenvalues[i + 1..] {
            let gap = (b - a).abs();
            if gap > DEGENERACY_TOL * scale {
                min = Some(match min {
                    Some(cur) => cur.min(gap),
                    None => gap,
                });
            }
        }
    }
    min
}

/// Complex hermitian unit-trace positive matrix in a fixed basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates hermiticity, unit trace, and positivity.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_dim(matrix.dim())?;
        let scale = matrix.max_abs().max(1.0);
        if matrix.hermiticity_error() > STATE_TOL * scale {
            return Err(Error::parameter("density matrix is not hermitian"));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::parameter(format!(
                "density matrix trace is {tr}, expected 1"
            )));
        }
        let (eigenvalues, _) = diagonalize(&matrix)?;
        if eigenvalues[0] < -POSITIVITY_TOL {
            return Err(Error::parameter(format!(
                "density matrix has negative eigenvalue {:.3e}",
                eigenvalues[0]
            )));
        }
        Ok(Self { matrix })
    }

    /// Wraps a matrix produced by an invariant-preserving internal operation.
    pub(crate) fn from_trusted(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    /// Pure state `|psi><psi|`; the amplitude vector is normalized first.
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        check_dim(amplitudes.len())?;
        let norm2: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(Error::parameter("state vector has zero norm"));
        }
        let dim = amplitudes.len();
        let mut m = CMatrix::zeros(dim);
        for r in 0..dim {
            for c in 0..dim {
                m[(r, c)] = amplitudes[r] * amplitudes[c].conj() / norm2;
            }
        }
        Ok(Self { matrix: m })
    }

    /// Equal superposition of the two basis states of a qubit.
    pub fn plus() -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::pure(&[h, h]).expect("plus state is valid")
    }

    /// `I / d`.
    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            matrix: CMatrix::identity(dim).scale_re(1.0 / dim as f64),
        })
    }

    /// Diagonal state from a probability vector.
    pub fn from_probabilities(probs: &[f64]) -> Result<Self> {
        check_dim(probs.len())?;
        if probs.iter().any(|&p| p < 0.0) {
            return Err(Error::parameter("probabilities must be non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > STATE_TOL {
            return Err(Error::parameter(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            matrix: CMatrix::from_diagonal(probs),
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Smallest eigenvalue; negative values past `POSITIVITY_TOL` mean the
    /// producing computation drifted.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let (eigenvalues, _) = diagonalize(&self.matrix)?;
        Ok(eigenvalues[0])
    }
}

/// Propagates `rho0` for ideal time `s` under `h`: `e^{-iHs} rho0 e^{iHs}`,
/// evaluated as phase factors in the energy eigenbasis.
pub fn evolve_unitary(h: &Hamiltonian, rho0: &DensityMatrix, s: f64) -> Result<DensityMatrix> {
    if h.dim() != rho0.dim() {
        return Err(Error::parameter(format!(
            "dimension mismatch: H is {}, rho is {}",
            h.dim(),
            rho0.dim()
        )));
    }
    let mut tilde = h.to_eigenbasis(rho0.matrix());
    apply_phases(&mut tilde, h.eigenvalues(), s);
    Ok(DensityMatrix::from_trusted(h.from_eigenbasis(&tilde)))
}

/// Multiplies eigenbasis components by `e^{-i (omega_n - omega_m) s}`.
pub(crate) fn apply_phases(tilde: &mut CMatrix, eigenvalues: &[f64], s: f64) {
    let n = tilde.dim();
    for r in 0..n {
        for c in 0..n {
            if r == c {
                continue;
            }
            let omega_nm = eigenvalues[r] - eigenvalues[c];
            let phased = tilde[(r, c)] * Complex64::cis(-omega_nm * s);
            tilde[(r, c)] = phased;
        }
    }
}

/// Von Neumann entropy `-sum lambda ln lambda` (natural log, 0 ln 0 = 0).
///
/// Eigenvalues in `[-POSITIVITY_TOL, 0)` are clamped to zero; anything more
/// negative means the state is corrupt and is rejected.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    let (eigenvalues, _) = diagonalize(rho.matrix())?;
    let mut entropy = 0.0;
    for &lambda in &eigenvalues {
        if lambda < -POSITIVITY_TOL {
            return Err(Error::integrity(format!(
                "density matrix eigenvalue {lambda:.3e} below -{POSITIVITY_TOL:.0e}"
            )));
        }
        if lambda > 0.0 {
            entropy -= lambda * lambda.ln();
        }
    }
    Ok(entropy)
}

/// Random hermitian matrix with entries uniform in the unit box. Intended for
/// self-test harnesses and randomized validation runs.
pub fn random_hermitian<R: Rng>(dim: usize, rng: &mut R) -> CMatrix {
    let mut m = CMatrix::zeros(dim);
    for r in 0..dim {
        m[(r, r)] = Complex64::new(rng.random_range(-1.0..1.0), 0.0);
        for c in (r + 1)..dim {
            let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            m[(r, c)] = z;
            m[(c, r)] = z.conj();
        }
    }
    m
}

/// Random unitary from Gram-Schmidt on a complex Gaussian matrix.
pub fn random_unitary<R: Rng>(dim: usize, rng: &mut R) -> CMatrix {
    use rand_distr::StandardNormal;
    let mut m = CMatrix::zeros(dim);
    for r in 0..dim {
        for c in 0..dim {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            m[(r, c)] = Complex64::new(re, im);
        }
    }
    // Modified Gram-Schmidt over columns.
    for c in 0..dim {
        for prev in 0..c {
            let mut overlap = Complex64::new(0.0, 0.0);
            for r in 0..dim {
                overlap += m[(r, prev)].conj() * m[(r, c)];
            }
            for r in 0..dim {
                let reduced = m[(r, c)] - overlap * m[(r, prev)];
                m[(r, c)] = reduced;
            }
        }
        let norm: f64 = (0..dim).map(|r| m[(r, c)].norm_sqr()).sum::<f64>().sqrt();
        for r in 0..dim {
            let scaled = m[(r, c)] / norm;
            m[(r, c)] = scaled;
        }
    }
    m
}

/// Random full-rank density matrix (`G G^\dagger / tr`).
pub fn random_density<R: Rng>(dim: usize, rng: &mut R) -> DensityMatrix {
    use rand_distr::StandardNormal;
    let mut g = CMatrix::zeros(dim);
    for r in 0..dim {
        for c in 0..dim {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            g[(r, c)] = Complex64::new(re, im);
        }
    }
    let mut w = g.matmul(&g.conjugate_transpose());
    let tr = w.trace().re;
    w = w.scale_re(1.0 / tr);
    w.hermitize();
    DensityMatrix::from_trusted(w)
}
