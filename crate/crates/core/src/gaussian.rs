//! Two-mode Gaussian states and the quadrature criteria.
//!
//! Quadratures are ordered `(q1, p1, q2, p2)` with `[q, p] = i`, so the vacuum
//! covariance is `I/2`. The collective observables are
//! `u = a1 q1 + a3 p1 + a2 q2 + a4 p2` and `v = b3 q1 + b1 p1 + b4 q2 + b2 p2`.

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::criteria::{CriterionId, CriterionVerdict};
use crate::error::{Error, Result};
use crate::rng;

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const BONA_FIDE_TOL: f64 = 1e-9;
/// Vacuum level of the smallest partially transposed symplectic eigenvalue.
pub const VACUUM_LEVEL: f64 = 0.5;

/// Standard symplectic form for `(q1, p1, q2, p2)`.
pub fn omega() -> Matrix4<f64> {
    Matrix4::new(
        0.0, 1.0, 0.0, 0.0, //
        -1.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        0.0, 0.0, -1.0, 0.0,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    mean: Vector4<f64>,
    cov: Matrix4<f64>,
}

impl GaussianState {
    /// Validates symmetry and the uncertainty condition `cov + (i/2) Ω ≥ 0`.
    pub fn new(mean: [f64; 4], cov: Matrix4<f64>) -> Result<Self> {
        if mean.iter().chain(cov.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidGaussian("non-finite entries".into()));
        }
        let asym = (cov - cov.transpose()).abs().max();
        if asym > SYMMETRY_TOL {
            return Err(Error::InvalidGaussian(format!("covariance asymmetric by {asym:e}")));
        }
        let cov = (cov + cov.transpose()) * 0.5;
        let min_eig = uncertainty_min_eigenvalue(&cov);
        if min_eig < -BONA_FIDE_TOL {
            return Err(Error::InvalidGaussian(format!(
                "covariance violates the uncertainty principle (eigenvalue {min_eig:e})"
            )));
        }
        Ok(Self { mean: Vector4::from(mean), cov })
    }

    pub fn vacuum() -> Self {
        Self { mean: Vector4::zeros(), cov: Matrix4::identity() * 0.5 }
    }

    /// Two-mode squeezed thermal state with squeezing `r` and thermal
    /// occupation `n_th` per mode.
    pub fn two_mode_squeezed(r: f64, n_th: f64) -> Result<Self> {
        if !r.is_finite() || !(n_th >= 0.0 && n_th.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid squeezing ({r}, {n_th})")));
        }
        let scale = n_th + 0.5;
        let (c, s) = (scale * (2.0 * r).cosh(), scale * (2.0 * r).sinh());
        let cov = Matrix4::new(
            c, 0.0, s, 0.0, //
            0.0, c, 0.0, -s, //
            s, 0.0, c, 0.0, //
            0.0, -s, 0.0, c,
        );
        Self::new([0.0; 4], cov)
    }

    /// Uncorrelated thermal modes.
    pub fn thermal(n1: f64, n2: f64) -> Result<Self> {
        if !(n1 >= 0.0 && n2 >= 0.0) {
            return Err(Error::InvalidArgument("thermal occupations must be nonnegative".into()));
        }
        let cov = Matrix4::from_diagonal(&Vector4::new(n1 + 0.5, n1 + 0.5, n2 + 0.5, n2 + 0.5));
        Self::new([0.0; 4], cov)
    }

    /// Random state `S diag(ν1, ν1, ν2, ν2) Sᵀ` with symplectic eigenvalues
    /// `ν ∈ [½, 3/2]` and `S` a product of local rotations and squeezers, a
    /// beam splitter and a two-mode squeezer.
    pub fn random<R: RngCore>(rng: &mut R) -> Self {
        let nu1 = 0.5 + rng::uniform(rng);
        let nu2 = 0.5 + rng::uniform(rng);
        let mut s = Matrix4::identity();
        let angle = |rng: &mut R| rng::uniform_in(rng, 0.0, std::f64::consts::TAU);
        s = local_rotation(angle(rng), angle(rng)) * s;
        s = local_squeeze(rng::uniform_in(rng, -0.8, 0.8), rng::uniform_in(rng, -0.8, 0.8)) * s;
        s = beam_splitter(angle(rng)) * s;
        s = two_mode_squeeze(rng::uniform_in(rng, -1.0, 1.0)) * s;
        s = local_rotation(angle(rng), angle(rng)) * s;
        let diag = Matrix4::from_diagonal(&Vector4::new(nu1, nu1, nu2, nu2));
        let cov = s * diag * s.transpose();
        let cov = (cov + cov.transpose()) * 0.5;
        Self { mean: Vector4::zeros(), cov }
    }

    pub fn mean(&self) -> [f64; 4] {
        self.mean.into()
    }

    pub fn cov(&self) -> &Matrix4<f64> {
        &self.cov
    }

    /// `cᵀ cov c`, the variance of `c · (q1, p1, q2, p2)`.
    pub fn cv_variance(&self, coeffs: [f64; 4]) -> f64 {
        let c = Vector4::from(coeffs);
        (c.transpose() * self.cov * c)[(0, 0)].max(0.0)
    }

    /// Mirror image under `p2 → -p2`, the Gaussian partial transpose.
    pub fn partially_transposed(&self) -> Self {
        let flip = Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, 1.0, -1.0));
        Self { mean: flip * self.mean, cov: flip * self.cov * flip }
    }

    /// Symplectic eigenvalues in ascending order.
    pub fn symplectic_eigenvalues(&self) -> [f64; 2] {
        symplectic_eigenvalues(&self.cov)
    }
}

/// Smallest eigenvalue of `cov + (i/2) Ω`.
fn uncertainty_min_eigenvalue(cov: &Matrix4<f64>) -> f64 {
    let om = omega();
    let m = Matrix4::<Complex64>::from_fn(|i, j| Complex64::new(cov[(i, j)], 0.5 * om[(i, j)]));
    SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Moduli of the eigenvalues of `iΩ cov`, from the Hermitian similar matrix
/// `cov^½ (iΩ) cov^½`, whose spectrum is `±ν1, ±ν2`.
fn symplectic_eigenvalues(cov: &Matrix4<f64>) -> [f64; 2] {
    let eig = SymmetricEigen::new(*cov);
    let sqrt_diag = Matrix4::from_diagonal(&eig.eigenvalues.map(|x| x.max(0.0).sqrt()));
    let root = eig.eigenvectors * sqrt_diag * eig.eigenvectors.transpose();
    let om = omega();
    let kernel = root * om * root;
    let herm = Matrix4::<Complex64>::from_fn(|i, j| Complex64::new(0.0, kernel[(i, j)]));
    let mut nus: Vec<f64> = SymmetricEigen::new(herm).eigenvalues.iter().filter(|x| **x > 0.0).copied().collect();
    nus.sort_by(f64::total_cmp);
    // spectrum is symmetric, so a degenerate input still yields two positives
    match nus.as_slice() {
        [a, b, ..] => [*a, *b],
        [a] => [0.0, *a],
        [] => [0.0, 0.0],
    }
}

fn local_rotation(phi1: f64, phi2: f64) -> Matrix4<f64> {
    let (s1, c1) = phi1.sin_cos();
    let (s2, c2) = phi2.sin_cos();
    Matrix4::new(
        c1, s1, 0.0, 0.0, //
        -s1, c1, 0.0, 0.0, //
        0.0, 0.0, c2, s2, //
        0.0, 0.0, -s2, c2,
    )
}

fn local_squeeze(r1: f64, r2: f64) -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::new((-r1).exp(), r1.exp(), (-r2).exp(), r2.exp()))
}

fn beam_splitter(theta: f64) -> Matrix4<f64> {
    let (s, c) = theta.sin_cos();
    Matrix4::new(
        c, 0.0, s, 0.0, //
        0.0, c, 0.0, s, //
        -s, 0.0, c, 0.0, //
        0.0, -s, 0.0, c,
    )
}

fn two_mode_squeeze(r: f64) -> Matrix4<f64> {
    let (c, s) = (r.cosh(), r.sinh());
    Matrix4::new(
        c, 0.0, s, 0.0, //
        0.0, c, 0.0, -s, //
        s, 0.0, c, 0.0, //
        0.0, -s, 0.0, c,
    )
}

/// Coefficients `a1..a4`, `b1..b4` of the quadrature criteria.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
}

impl CvConfig {
    pub fn new(a: [f64; 4], b: [f64; 4]) -> Result<Self> {
        let [a1, a2, a3, a4] = a;
        let [b1, b2, b3, b4] = b;
        Self { a1, a2, a3, a4, b1, b2, b3, b4 }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let all = [self.a1, self.a2, self.a3, self.a4, self.b1, self.b2, self.b3, self.b4];
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

    /// `u = q1 - q2`, `v = p1 + p2`.
    pub fn epr() -> Self {
        Self::new([1.0, -1.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0]).expect("valid")
    }

    pub fn a(&self) -> [f64; 4] {
        [self.a1, self.a2, self.a3, self.a4]
    }

    pub fn b(&self) -> [f64; 4] {
        [self.b1, self.b2, self.b3, self.b4]
    }

    /// `u` in quadrature coordinates.
    pub fn u_vector(&self) -> [f64; 4] {
        [self.a1, self.a3, self.a2, self.a4]
    }

    /// `v` in quadrature coordinates.
    pub fn v_vector(&self) -> [f64; 4] {
        [self.b3, self.b1, self.b4, self.b2]
    }

    /// `|a1 b1 - a3 b3| + |a2 b2 - a4 b4|`.
    pub fn commutator_scale(&self) -> f64 {
        (self.a1 * self.b1 - self.a3 * self.b3).abs() + (self.a2 * self.b2 - self.a4 * self.b4).abs()
    }
}

/// `Var(u) Var(v) >= ¼ (|a1 b1 - a3 b3| + |a2 b2 - a4 b4|)²`.
pub fn cv_product_check(gs: &GaussianState, cfg: &CvConfig) -> CriterionVerdict {
    let lhs = gs.cv_variance(cfg.u_vector()) * gs.cv_variance(cfg.v_vector());
    CriterionVerdict::new(CriterionId::CvProduct, lhs, 0.25 * cfg.commutator_scale().powi(2))
}

/// `Var(u) + Var(v) >= |a1 b1 - a3 b3| + |a2 b2 - a4 b4|`.
pub fn cv_sum_check(gs: &GaussianState, cfg: &CvConfig) -> CriterionVerdict {
    let lhs = gs.cv_variance(cfg.u_vector()) + gs.cv_variance(cfg.v_vector());
    CriterionVerdict::new(CriterionId::CvSum, lhs, cfg.commutator_scale())
}

pub fn evaluate_cv(id: CriterionId, gs: &GaussianState, cfg: &CvConfig) -> Result<CriterionVerdict> {
    match id {
        CriterionId::CvProduct => Ok(cv_product_check(gs, cfg)),
        CriterionId::CvSum => Ok(cv_sum_check(gs, cfg)),
        other => Err(Error::UnsupportedCriterion(other)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimonDecision {
    SeparableSide,
    Entangled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimonVerdict {
    pub decision: SimonDecision,
    /// Smallest symplectic eigenvalue of the partially transposed covariance.
    pub min_symplectic: f64,
}

/// Exact separability test for two-mode Gaussian states: entangled iff the
/// partially transposed covariance has a symplectic eigenvalue below ½.
pub fn simon_ppt_oracle(gs: &GaussianState) -> SimonVerdict {
    let nu = gs.partially_transposed().symplectic_eigenvalues()[0];
    let decision = if nu < VACUUM_LEVEL - BONA_FIDE_TOL {
        SimonDecision::Entangled
    } else {
        SimonDecision::SeparableSide
    };
    SimonVerdict { decision, min_symplectic: nu }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Closed-form two-mode symplectic spectrum from the block invariants.
    fn symplectic_oracle(cov: &Matrix4<f64>) -> [f64; 2] {
        let a = cov.fixed_view::<2, 2>(0, 0).determinant();
        let b = cov.fixed_view::<2, 2>(2, 2).determinant();
        let c = cov.fixed_view::<2, 2>(0, 2).determinant();
        let delta = a + b + 2.0 * c;
        let det = cov.determinant();
        let disc = (delta * delta - 4.0 * det).max(0.0).sqrt();
        [((delta - disc) / 2.0).sqrt(), ((delta + disc) / 2.0).sqrt()]
    }

    #[test]
    fn cv_variance_examples() {
        let vac = GaussianState::vacuum();
        assert_abs_diff_eq!(vac.cv_variance([1.0, 0.0, -1.0, 0.0]), 1.0);
        assert_abs_diff_eq!(vac.cv_variance([1.0, 0.0, 0.0, 0.0]), 0.5);
        for r in [0.1, 0.5, 1.3] {
            let tms = GaussianState::two_mode_squeezed(r, 0.0).unwrap();
            assert_abs_diff_eq!(tms.cv_variance([1.0, 0.0, -1.0, 0.0]), (-2.0 * r).exp(), epsilon = 1e-12);
            assert_abs_diff_eq!(tms.cv_variance([0.0, 1.0, 0.0, 1.0]), (-2.0 * r).exp(), epsilon = 1e-12);
        }
    }

    #[test]
    fn two_mode_squeezed_examples() {
        assert_eq!(GaussianState::two_mode_squeezed(0.0, 0.0).unwrap(), GaussianState::vacuum());
        let tms = GaussianState::two_mode_squeezed(0.5, 0.0).unwrap();
        assert_abs_diff_eq!(tms.cv_variance([1.0, 0.0, -1.0, 0.0]), 0.36787944117144233, epsilon = 1e-12);
        for r in [0.0, 0.3, 1.0, 2.0] {
            for n in [0.0, 0.4, 2.0] {
                let gs = GaussianState::two_mode_squeezed(r, n).unwrap();
                let nus = gs.symplectic_eigenvalues();
                assert_abs_diff_eq!(nus[0], n + 0.5, epsilon = 1e-9);
                assert_abs_diff_eq!(nus[1], n + 0.5, epsilon = 1e-9);
            }
        }
        assert!(GaussianState::two_mode_squeezed(0.1, -1.0).is_err());
    }

    #[test]
    fn rejects_unphysical_covariances() {
        let tight = Matrix4::identity() * 0.4;
        assert!(GaussianState::new([0.0; 4], tight).is_err());
        let mut asym = Matrix4::identity();
        asym[(0, 1)] = 0.1;
        assert!(GaussianState::new([0.0; 4], asym).is_err());
        let mut squeezed = Matrix4::identity() * 0.5;
        squeezed[(0, 0)] = 0.25;
        squeezed[(1, 1)] = 1.0;
        assert!(GaussianState::new([0.0; 4], squeezed).is_ok());
    }

    #[test]
    fn symplectic_eigenvalues_match_block_invariants() {
        let mut rng = rng::stream_rng(21, 0);
        for _ in 0..50 {
            let gs = GaussianState::random(&mut rng);
            let want = symplectic_oracle(gs.cov());
            let got = gs.symplectic_eigenvalues();
            assert_abs_diff_eq!(got[0], want[0], epsilon = 1e-8);
            assert_abs_diff_eq!(got[1], want[1], epsilon = 1e-8);
            let pt = gs.partially_transposed();
            let want = symplectic_oracle(pt.cov());
            let got = pt.symplectic_eigenvalues();
            assert_abs_diff_eq!(got[0], want[0], epsilon = 1e-8);
            // random states are bona fide
            GaussianState::new(gs.mean(), *gs.cov()).unwrap();
        }
    }

    #[test]
    fn elementary_transforms_are_symplectic() {
        let om = omega();
        for s in [
            local_rotation(0.3, 1.1),
            local_squeeze(0.4, -0.2),
            beam_splitter(0.7),
            two_mode_squeeze(0.9),
        ] {
            assert!((s * om * s.transpose() - om).abs().max() < 1e-12);
        }
    }

    #[test]
    fn cv_product_examples() {
        let epr = CvConfig::epr();
        let v = cv_product_check(&GaussianState::vacuum(), &epr);
        assert_abs_diff_eq!(v.lhs, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.bound, 1.0, epsilon = 1e-12);
        assert!(!v.violated);

        let tms = GaussianState::two_mode_squeezed(0.5, 0.0).unwrap();
        let v = cv_product_check(&tms, &epr);
        assert_abs_diff_eq!(v.lhs, (-2.0f64).exp(), epsilon = 1e-12);
        assert!(v.violated);

        let cancel = CvConfig::new([1.0, 2.0, 1.0, 2.0], [3.0, 0.5, 3.0, 0.5]).unwrap();
        let v = cv_product_check(&tms, &cancel);
        assert_eq!(v.bound, 0.0);
        assert!(!v.violated);
    }

    #[test]
    fn cv_sum_examples() {
        let epr = CvConfig::epr();
        let v = cv_sum_check(&GaussianState::vacuum(), &epr);
        assert_abs_diff_eq!(v.lhs, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.bound, 2.0, epsilon = 1e-12);
        assert!(!v.violated);
        let tms = GaussianState::two_mode_squeezed(0.5, 0.0).unwrap();
        let v = cv_sum_check(&tms, &epr);
        assert_abs_diff_eq!(v.lhs, 2.0 * (-1.0f64).exp(), epsilon = 1e-12);
        assert!(v.violated);
    }

    #[test]
    fn simon_examples() {
        assert_eq!(simon_ppt_oracle(&GaussianState::vacuum()).decision, SimonDecision::SeparableSide);
        for r in [0.01, 0.1, 0.5, 1.5] {
            let v = simon_ppt_oracle(&GaussianState::two_mode_squeezed(r, 0.0).unwrap());
            assert_eq!(v.decision, SimonDecision::Entangled);
            assert_abs_diff_eq!(v.min_symplectic, (-2.0 * r).exp() / 2.0, epsilon = 1e-9);
        }
        let thermal = GaussianState::thermal(0.3, 1.2).unwrap();
        assert_eq!(thermal.partially_transposed().cov(), thermal.cov());
        assert_eq!(simon_ppt_oracle(&thermal).decision, SimonDecision::SeparableSide);
    }

    #[test]
    fn cv_config_validation() {
        assert!(CvConfig::new([0.0, 0.0, 1.0, 1.0], [1.0, 0.0, 0.0, 0.0]).is_err());
        assert!(CvConfig::new([1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]).is_err());
        assert!(CvConfig::new([1.0, f64::INFINITY, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]).is_err());
        let cfg = CvConfig::new([1.0, 2.0, 3.0, 4.0], [5.0, 6.0, 7.0, 8.0]).unwrap();
        assert_eq!(cfg.u_vector(), [1.0, 3.0, 2.0, 4.0]);
        assert_eq!(cfg.v_vector(), [7.0, 5.0, 8.0, 6.0]);
    }
}
