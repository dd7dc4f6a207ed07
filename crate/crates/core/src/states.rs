//! Density matrices, separable ensembles and state constructors.

use num_complex::Complex64;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{self, check_dim, HermitianOperator, Slot};
use crate::{rng, CMatrix};

pub const TRACE_TOL: f64 = 1e-10;
/// Smallest eigenvalue a density matrix may have; absorbs rounding from
/// constructed mixtures.
pub const PSD_TOL: f64 = 1e-9;
/// Imaginary residue allowed on an expectation value, and the negative
/// variance clamped to zero.
pub const EXPECTATION_TOL: f64 = 1e-10;
pub const MAX_ENSEMBLE_TERMS: usize = 64;

/// Positive semidefinite, unit-trace matrix on `H1 ⊗ H2`. Single-subsystem
/// states carry dims `(d, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dims: (usize, usize),
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(dims: (usize, usize), matrix: CMatrix) -> Result<Self> {
        if dims.0 == 0 || dims.1 == 0 {
            return Err(Error::InvalidState("subsystem dimensions must be positive".into()));
        }
        let op = HermitianOperator::new(matrix)?;
        check_dim(dims.0 * dims.1, op.dim())?;
        let trace = op.matrix().trace().re;
        if !((trace - 1.0).abs() <= TRACE_TOL) {
            return Err(Error::InvalidState(format!("trace {trace} differs from 1")));
        }
        let min_eig = op.eigenvalues()[0];
        if min_eig < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(Self { dims, matrix: op.into_matrix() })
    }

    /// Single-subsystem state.
    pub fn single(matrix: CMatrix) -> Result<Self> {
        let d = matrix.nrows();
        Self::new((d, 1), matrix)
    }

    /// `|ψ><ψ|` for the normalized `psi`.
    pub fn pure(dims: (usize, usize), psi: &[Complex64]) -> Result<Self> {
        check_dim(dims.0 * dims.1, psi.len())?;
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let n = psi.len();
        let matrix = CMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj() / (norm * norm));
        Self::new(dims, matrix)
    }

    /// Computational basis state `|i><i|` of a single subsystem.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidArgument(format!("basis index {index} out of range {dim}")));
        }
        let mut psi = vec![Complex64::new(0.0, 0.0); dim];
        psi[index] = Complex64::new(1.0, 0.0);
        Self::pure((dim, 1), &psi)
    }

    pub fn maximally_mixed(dims: (usize, usize)) -> Self {
        let n = dims.0 * dims.1;
        Self { dims, matrix: CMatrix::identity(n, n) / Complex64::new(n as f64, 0.0) }
    }

    /// `a ⊗ b` of two single-subsystem states.
    pub fn product(a: &DensityMatrix, b: &DensityMatrix) -> Self {
        Self { dims: (a.dim(), b.dim()), matrix: a.matrix.kronecker(&b.matrix) }
    }

    /// Mixture of `rank` random pure states (Ginibre construction `GG†/Tr`).
    pub fn random_mixed<R: RngCore>(dims: (usize, usize), rank: usize, rng: &mut R) -> Self {
        let n = dims.0 * dims.1;
        let g = CMatrix::from_fn(n, rank.max(1), |_, _| rng::complex_normal(rng));
        let rho = &g * g.adjoint();
        let trace = rho.trace().re;
        let rho = rho / Complex64::new(trace, 0.0);
        let adj = rho.adjoint();
        Self { dims, matrix: (rho + adj).scale(0.5) }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    /// Total Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        operators::hermitian_eigenvalues(&self.matrix)
    }

    /// `Tr[O ρ]`.
    pub fn expectation(&self, op: &HermitianOperator) -> Result<f64> {
        check_dim(self.dim(), op.dim())?;
        let value = trace_of_product(op.matrix(), &self.matrix);
        real_part(value, op)
    }

    /// `Tr[A ρ]` for an arbitrary (not necessarily Hermitian) `A`.
    pub fn expectation_complex(&self, op: &CMatrix) -> Result<Complex64> {
        check_dim(self.dim(), op.nrows())?;
        check_dim(self.dim(), op.ncols())?;
        Ok(trace_of_product(op, &self.matrix))
    }

    /// `<O²> - <O>²`.
    pub fn variance(&self, op: &HermitianOperator) -> Result<f64> {
        check_dim(self.dim(), op.dim())?;
        let mean = self.expectation(op)?;
        let square = op.matrix() * op.matrix();
        let second = real_part(trace_of_product(&square, &self.matrix), op)?;
        let var = second - mean * mean;
        if var >= 0.0 {
            Ok(var)
        } else if var >= -EXPECTATION_TOL * (1.0 + second.abs()) {
            Ok(0.0)
        } else {
            Err(Error::Consistency(format!("negative variance {var:e}")))
        }
    }

    /// Reduced state of the subsystem in `keep`.
    pub fn partial_trace(&self, keep: Slot) -> DensityMatrix {
        let (d1, d2) = self.dims;
        let m = &self.matrix;
        let zero = Complex64::new(0.0, 0.0);
        let matrix = match keep {
            Slot::First => CMatrix::from_fn(d1, d1, |i, j| {
                (0..d2).fold(zero, |acc, k| acc + m[(i * d2 + k, j * d2 + k)])
            }),
            Slot::Second => CMatrix::from_fn(d2, d2, |i, j| {
                (0..d1).fold(zero, |acc, k| acc + m[(k * d2 + i, k * d2 + j)])
            }),
        };
        let dim = matrix.nrows();
        DensityMatrix { dims: (dim, 1), matrix }
    }

    /// Transpose on the indices of one tensor factor. The result is Hermitian
    /// with unit trace but may have negative eigenvalues.
    pub fn partial_transpose(&self, slot: Slot) -> HermitianOperator {
        let (_, d2) = self.dims;
        let m = &self.matrix;
        let n = self.dim();
        let matrix = CMatrix::from_fn(n, n, |row, col| {
            let (i1, i2) = (row / d2, row % d2);
            let (j1, j2) = (col / d2, col % d2);
            match slot {
                Slot::First => m[(j1 * d2 + i2, i1 * d2 + j2)],
                Slot::Second => m[(i1 * d2 + j2, j1 * d2 + i2)],
            }
        });
        HermitianOperator::new(matrix).expect("partial transpose of a Hermitian matrix is Hermitian")
    }
}

fn trace_of_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

fn real_part(value: Complex64, op: &HermitianOperator) -> Result<f64> {
    let scale = 1.0 + op.matrix().norm();
    if value.im.abs() > EXPECTATION_TOL * scale {
        return Err(Error::Consistency(format!(
            "expectation has imaginary residue {:e}",
            value.im
        )));
    }
    Ok(value.re)
}

/// The four Bell states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    /// The singlet.
    PsiMinus,
}

pub fn bell_state(which: BellState) -> DensityMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let amps = match which {
        BellState::PhiPlus => [h, 0.0, 0.0, h],
        BellState::PhiMinus => [h, 0.0, 0.0, -h],
        BellState::PsiPlus => [0.0, h, h, 0.0],
        BellState::PsiMinus => [0.0, h, -h, 0.0],
    };
    let psi: Vec<Complex64> = amps.iter().map(|&a| Complex64::new(a, 0.0)).collect();
    DensityMatrix::pure((2, 2), &psi).expect("Bell states are valid")
}

/// `p |Ψ−><Ψ−| + (1 - p) I/4`.
pub fn werner_state(p: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("Werner weight {p} outside [0, 1]")));
    }
    let singlet = bell_state(BellState::PsiMinus);
    let mixed = DensityMatrix::maximally_mixed((2, 2));
    let matrix = singlet.matrix.scale(p) + mixed.matrix.scale(1.0 - p);
    DensityMatrix::new((2, 2), matrix)
}

/// One product term `w · ρ1 ⊗ ρ2` of a separable decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleTerm {
    pub weight: f64,
    pub rho1: DensityMatrix,
    pub rho2: DensityMatrix,
}

/// Convex decomposition `Σ_k w_k ρ_k1 ⊗ ρ_k2` of a separable state.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableEnsemble {
    dims: (usize, usize),
    terms: Vec<EnsembleTerm>,
}

impl SeparableEnsemble {
    pub fn new(dims: (usize, usize), terms: Vec<EnsembleTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidEnsemble("ensemble has no terms".into()));
        }
        if terms.len() > MAX_ENSEMBLE_TERMS {
            return Err(Error::InvalidEnsemble(format!(
                "{} terms exceeds the cap of {MAX_ENSEMBLE_TERMS}",
                terms.len()
            )));
        }
        for (k, t) in terms.iter().enumerate() {
            if !(t.weight >= 0.0) || !t.weight.is_finite() {
                return Err(Error::InvalidEnsemble(format!("term {k} has weight {}", t.weight)));
            }
            if t.rho1.dims != (dims.0, 1) || t.rho2.dims != (dims.1, 1) {
                return Err(Error::InvalidEnsemble(format!(
                    "term {k} factors are not single-subsystem states of dims {dims:?}"
                )));
            }
        }
        let total: f64 = terms.iter().map(|t| t.weight).sum();
        if (total - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidEnsemble(format!("weights sum to {total}")));
        }
        Ok(Self { dims, terms })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn terms(&self) -> &[EnsembleTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

pub fn ensemble_to_density(e: &SeparableEnsemble) -> DensityMatrix {
    let n = e.dims.0 * e.dims.1;
    let mut matrix = CMatrix::zeros(n, n);
    for t in &e.terms {
        matrix += t.rho1.matrix.kronecker(&t.rho2.matrix).scale(t.weight);
    }
    DensityMatrix { dims: e.dims, matrix }
}

/// Random single-subsystem state: a simplex-weighted mixture of between one
/// and `dim` Haar-like pure states.
pub fn random_local_state<R: RngCore>(dim: usize, rng: &mut R) -> DensityMatrix {
    let m = rng::int_in(rng, 1, dim);
    let weights = rng::simplex(rng, m);
    let mut matrix = CMatrix::zeros(dim, dim);
    for w in weights {
        let psi: Vec<Complex64> = (0..dim).map(|_| rng::complex_normal(rng)).collect();
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        matrix += CMatrix::from_fn(dim, dim, |i, j| psi[i] * psi[j].conj()).scale(w / norm2);
    }
    let adj = matrix.adjoint();
    DensityMatrix { dims: (dim, 1), matrix: (matrix + adj).scale(0.5) }
}

/// Seeded random separable ensemble with `k` product terms.
pub fn random_product_ensemble(dims: (usize, usize), k: usize, seed: u64) -> Result<SeparableEnsemble> {
    if k == 0 || k > MAX_ENSEMBLE_TERMS {
        return Err(Error::InvalidArgument(format!(
            "term count {k} outside 1..={MAX_ENSEMBLE_TERMS}"
        )));
    }
    let mut rng = rng::stream_rng(seed, 0);
    random_product_ensemble_with(dims, k, &mut rng)
}

pub fn random_product_ensemble_with<R: RngCore>(
    dims: (usize, usize),
    k: usize,
    rng: &mut R,
) -> Result<SeparableEnsemble> {
    let weights = rng::simplex(rng, k);
    let terms = weights
        .into_iter()
        .map(|weight| EnsembleTerm {
            weight,
            rho1: random_local_state(dims.0, rng),
            rho2: random_local_state(dims.1, rng),
        })
        .collect();
    SeparableEnsemble::new(dims, terms)
}

/// Real coefficients of the collective observables `u = a1 r1 + a2 r2`,
/// `v = b1 s1 + b2 s2`; `a3, a4, b3, b4` extend them for quadrature mixing in
/// the continuous-variable case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionConfig {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    #[serde(default)]
    pub a3: f64,
    #[serde(default)]
    pub a4: f64,
    #[serde(default)]
    pub b3: f64,
    #[serde(default)]
    pub b4: f64,
}

impl CriterionConfig {
    pub fn new(a1: f64, a2: f64, b1: f64, b2: f64) -> Result<Self> {
        Self { a1, a2, b1, b2, a3: 0.0, a4: 0.0, b3: 0.0, b4: 0.0 }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let all = [self.a1, self.a2, self.b1, self.b2, self.a3, self.a4, self.b3, self.b4];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("coefficients must be finite".into()));
        }
        if self.a1 == 0.0 && self.a2 == 0.0 {
            return Err(Error::InvalidConfig("a1 and a2 are both zero".into()));
        }
        if self.b1 == 0.0 && self.b2 == 0.0 {
            return Err(Error::InvalidConfig("b1 and b2 are both zero".into()));
        }
        Ok(self)
    }

    /// Uniform coefficients in `[-2, 2)`.
    pub fn random<R: RngCore>(rng: &mut R) -> Self {
        loop {
            let mut draw = || rng::uniform_in(rng, -2.0, 2.0);
            let (a1, a2, b1, b2) = (draw(), draw(), draw(), draw());
            if let Ok(cfg) = Self::new(a1, a2, b1, b2) {
                return cfg;
            }
        }
    }
}
