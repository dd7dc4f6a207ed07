//! Dense Hermitian operators on finite-dimensional (bipartite) spaces.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::states::CriterionConfig;
use crate::{rng, CMatrix};

/// Inputs further than this from Hermitian are rejected instead of symmetrized.
pub const HERMITIAN_REPAIR_TOL: f64 = 1e-10;

/// Tensor factor of a bipartite space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    First,
    Second,
}

impl TryFrom<u8> for Slot {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        match value {
            1 => Ok(Slot::First),
            2 => Ok(Slot::Second),
            other => Err(Error::InvalidArgument(format!("slot must be 1 or 2, got {other}"))),
        }
    }
}

/// Complex square matrix equal to its conjugate transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: CMatrix,
}

impl HermitianOperator {
    /// Validates and symmetrizes `matrix` as `(A + A†)/2`.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(Error::InvalidArgument("operator dimension must be at least 1".into()));
        }
        let deviation = hermitian_deviation(&matrix);
        if !(deviation <= HERMITIAN_REPAIR_TOL) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self::symmetrized(matrix))
    }

    fn symmetrized(matrix: CMatrix) -> Self {
        let adj = matrix.adjoint();
        Self { matrix: (matrix + adj).scale(0.5) }
    }

    /// Real diagonal operator.
    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let matrix = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(values[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Self { matrix }
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: CMatrix::identity(dim, dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { matrix: CMatrix::zeros(dim, dim) }
    }

    pub fn sigma_x() -> Self {
        Self::from_rows_unchecked(&[[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 0.0]])
    }

    pub fn sigma_y() -> Self {
        Self::from_rows_unchecked(&[[0.0, 0.0], [0.0, -1.0], [0.0, 1.0], [0.0, 0.0]])
    }

    pub fn sigma_z() -> Self {
        Self::diagonal(&[1.0, -1.0])
    }

    // 2x2 from row-major (re, im) entries
    fn from_rows_unchecked(entries: &[[f64; 2]; 4]) -> Self {
        let matrix =
            CMatrix::from_row_iterator(2, 2, entries.iter().map(|&[re, im]| Complex64::new(re, im)));
        Self { matrix }
    }

    /// Random Hermitian `(G + G†)/2` with complex-Gaussian `G`.
    pub fn random<R: RngCore>(dim: usize, rng: &mut R) -> Self {
        let g = CMatrix::from_fn(dim, dim, |_, _| rng::complex_normal(rng));
        Self::symmetrized(g)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self { matrix: self.matrix.scale(factor) }
    }

    /// Real-linear combination `self + factor * other`.
    pub fn add_scaled(&self, factor: f64, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self { matrix: &self.matrix + other.matrix.scale(factor) })
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    /// Largest absolute entry deviation from the conjugate transpose.
    pub fn hermitian_deviation(&self) -> f64 {
        hermitian_deviation(&self.matrix)
    }
}

/// A couple of observables `(r, s)` on the same subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservablePair {
    pub r: HermitianOperator,
    pub s: HermitianOperator,
}

impl ObservablePair {
    pub fn new(r: HermitianOperator, s: HermitianOperator) -> Result<Self> {
        check_dim(r.dim(), s.dim())?;
        Ok(Self { r, s })
    }

    /// `(σ_x, σ_y)`, whose commutator observable is `-2σ_z`.
    pub fn pauli_xy() -> Self {
        Self { r: HermitianOperator::sigma_x(), s: HermitianOperator::sigma_y() }
    }

    /// `(2 S_x, 2 S_y)` for spin `(dim - 1)/2`; equals [`Self::pauli_xy`] at
    /// `dim = 2`. The commutator observable is `-4 S_z`.
    pub fn spin_xy(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument(format!("spin preset needs dim >= 2, got {dim}")));
        }
        let j = (dim as f64 - 1.0) / 2.0;
        // <m+1|S+|m> = sqrt(j(j+1) - m(m+1)), basis ordered m = j, j-1, ..., -j
        let mut raise = CMatrix::zeros(dim, dim);
        for k in 1..dim {
            let m = j - k as f64;
            raise[(k - 1, k)] = Complex64::new((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
        }
        let lower = raise.adjoint();
        let sx = &raise + &lower;
        let sy = (&raise - &lower) * Complex64::new(0.0, -1.0);
        Ok(Self { r: HermitianOperator::new(sx)?, s: HermitianOperator::new(sy)? })
    }

    pub fn dim(&self) -> usize {
        self.r.dim()
    }

    pub fn random<R: RngCore>(dim: usize, rng: &mut R) -> Self {
        let r = HermitianOperator::random(dim, rng);
        let s = HermitianOperator::random(dim, rng);
        Self { r, s }
    }
}

/// The collective observables `u = a1 r1 + a2 r2`, `v = b1 s1 + b2 s2` on the
/// full bipartite space.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveObservables {
    pub u: HermitianOperator,
    pub v: HermitianOperator,
}

/// Kronecker product `a ⊗ b`.
pub fn tensor(a: &HermitianOperator, b: &HermitianOperator) -> HermitianOperator {
    HermitianOperator { matrix: a.matrix.kronecker(&b.matrix) }
}

/// Lifts `op` onto `H1 ⊗ H2` as `op ⊗ I` or `I ⊗ op`.
pub fn embed(op: &HermitianOperator, slot: Slot, dims: (usize, usize)) -> Result<HermitianOperator> {
    match slot {
        Slot::First => {
            check_dim(dims.0, op.dim())?;
            Ok(tensor(op, &HermitianOperator::identity(dims.1)))
        }
        Slot::Second => {
            check_dim(dims.1, op.dim())?;
            Ok(tensor(&HermitianOperator::identity(dims.0), op))
        }
    }
}

/// `C = i[r, s]`.
pub fn commutator_obs(pair: &ObservablePair) -> Result<HermitianOperator> {
    let (r, s) = (&pair.r.matrix, &pair.s.matrix);
    let comm = (r * s - s * r) * Complex64::new(0.0, 1.0);
    HermitianOperator::new(comm).map_err(|e| match e {
        Error::NotHermitian { deviation } => Error::Consistency(format!(
            "commutator of Hermitian inputs deviates from Hermitian by {deviation:e}"
        )),
        other => other,
    })
}

/// Operator norm `sup |<ψ|C|ψ>|`, i.e. the spectral radius for Hermitian `C`.
pub fn op_norm(op: &HermitianOperator) -> f64 {
    op.eigenvalues().iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn build_uv(
    pair1: &ObservablePair,
    pair2: &ObservablePair,
    cfg: &CriterionConfig,
) -> Result<CollectiveObservables> {
    let dims = (pair1.dim(), pair2.dim());
    let r1 = embed(&pair1.r, Slot::First, dims)?;
    let r2 = embed(&pair2.r, Slot::Second, dims)?;
    let s1 = embed(&pair1.s, Slot::First, dims)?;
    let s2 = embed(&pair2.s, Slot::Second, dims)?;
    let u = r1.scale(cfg.a1).add_scaled(cfg.a2, &r2)?;
    let v = s1.scale(cfg.b1).add_scaled(cfg.b2, &s2)?;
    Ok(CollectiveObservables { u, v })
}

/// Ascending eigenvalues of a Hermitian matrix. Only the lower triangle is read.
pub fn hermitian_eigenvalues(matrix: &CMatrix) -> Vec<f64> {
    let mut values: Vec<f64> =
        SymmetricEigen::new(matrix.clone()).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

pub(crate) fn hermitian_deviation(matrix: &CMatrix) -> f64 {
    let n = matrix.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            let d = (matrix[(i, j)] - matrix[(j, i)].conj()).norm();
            // NaN propagates so non-finite input is rejected
            if d.is_nan() {
                return f64::NAN;
            }
            worst = worst.max(d);
        }
    }
    worst
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
