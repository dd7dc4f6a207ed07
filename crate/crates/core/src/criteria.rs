//! Separability bounds built from the uncertainty relations of the collective
//! observables `u = a1 r1 + a2 r2` and `v = b1 s1 + b2 s2`.
//!
//! Every separable state satisfies each bound below; a violation therefore
//! certifies entanglement. A bound that holds proves nothing about
//! separability.
//!
//! `Õ` is the separable-state scale `(|a1 b1| Õ1 + |a2 b2| Õ2) / 2`. It comes
//! in three flavours, see [`OtildeSource`].

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{build_uv, commutator_obs, op_norm, tensor, HermitianOperator, ObservablePair, Slot};
use crate::states::{CriterionConfig, DensityMatrix, SeparableEnsemble};
use crate::DEFAULT_SLACK;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionId {
    Heisenberg,
    GeneralEnsemble,
    GeneralMeasurable,
    GeneralStrong,
    Sum,
    Prl02Product,
    LinearFamily,
    CvProduct,
    CvSum,
}

impl CriterionId {
    pub const ALL: [CriterionId; 9] = [
        CriterionId::Heisenberg,
        CriterionId::GeneralEnsemble,
        CriterionId::GeneralMeasurable,
        CriterionId::GeneralStrong,
        CriterionId::Sum,
        CriterionId::Prl02Product,
        CriterionId::LinearFamily,
        CriterionId::CvProduct,
        CriterionId::CvSum,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CriterionId::Heisenberg => "heisenberg",
            CriterionId::GeneralEnsemble => "general_ensemble",
            CriterionId::GeneralMeasurable => "general_measurable",
            CriterionId::GeneralStrong => "general_strong",
            CriterionId::Sum => "sum",
            CriterionId::Prl02Product => "prl02_product",
            CriterionId::LinearFamily => "linear_family",
            CriterionId::CvProduct => "cv_product",
            CriterionId::CvSum => "cv_sum",
        }
    }

    /// Whether the criterion applies to continuous-variable Gaussian states.
    pub fn is_cv(self) -> bool {
        matches!(self, CriterionId::CvProduct | CriterionId::CvSum)
    }
}

impl fmt::Display for CriterionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CriterionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CriterionId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown criterion '{s}'")))
    }
}

/// Outcome of one criterion on one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionVerdict {
    pub criterion: CriterionId,
    /// The tested uncertainty quantity.
    pub lhs: f64,
    /// The separable-state bound.
    pub bound: f64,
    pub violated: bool,
    /// `bound - lhs`; positive means the state sits below the bound.
    pub margin: f64,
}

impl CriterionVerdict {
    pub fn new(criterion: CriterionId, lhs: f64, bound: f64) -> Self {
        Self::with_slack(criterion, lhs, bound, DEFAULT_SLACK)
    }

    pub fn with_slack(criterion: CriterionId, lhs: f64, bound: f64, slack: f64) -> Self {
        Self { criterion, lhs, bound, violated: lhs < bound - slack, margin: bound - lhs }
    }

    /// Re-decides `violated` under a different slack.
    pub fn reslacked(self, slack: f64) -> Self {
        Self::with_slack(self.criterion, self.lhs, self.bound, slack)
    }
}

/// Where an `Õ` value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OtildeSource {
    /// `Õj = Σ_k w_k |<Cj>_k|` over a known separable decomposition.
    Ensemble,
    /// `Õj = |<Cj>|` on the state itself; a decomposition-free lower bound.
    Measurable,
    /// `Õj = 2 Σ_k w_k |<Δrj Δsj>_k|` from the Schrödinger-Robertson relation.
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OtildeBound {
    pub otilde: f64,
    pub otilde1: f64,
    pub otilde2: f64,
    pub source: OtildeSource,
}

impl OtildeBound {
    pub fn assemble(cfg: &CriterionConfig, otilde1: f64, otilde2: f64, source: OtildeSource) -> Self {
        let otilde = 0.5 * ((cfg.a1 * cfg.b1).abs() * otilde1 + (cfg.a2 * cfg.b2).abs() * otilde2);
        Self { otilde, otilde1, otilde2, source }
    }

    fn criterion(&self) -> CriterionId {
        match self.source {
            OtildeSource::Ensemble => CriterionId::GeneralEnsemble,
            OtildeSource::Measurable => CriterionId::GeneralMeasurable,
            OtildeSource::Strong => CriterionId::GeneralStrong,
        }
    }
}

/// The observable pairs of both subsystems.
#[derive(Debug, Clone, Copy)]
pub struct Pairs<'a> {
    pub first: &'a ObservablePair,
    pub second: &'a ObservablePair,
}

impl<'a> Pairs<'a> {
    pub fn new(first: &'a ObservablePair, second: &'a ObservablePair) -> Self {
        Self { first, second }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.first.dim(), self.second.dim())
    }

    fn check(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::InvalidArgument(format!(
                "observables act on {:?} but the state has dims {dims:?}",
                self.dims()
            )));
        }
        Ok(())
    }

    fn commutators(&self) -> Result<(HermitianOperator, HermitianOperator)> {
        Ok((commutator_obs(self.first)?, commutator_obs(self.second)?))
    }
}

fn variances(rho: &DensityMatrix, pairs: Pairs<'_>, cfg: &CriterionConfig) -> Result<(f64, f64)> {
    pairs.check(rho.dims())?;
    let uv = build_uv(pairs.first, pairs.second, cfg)?;
    Ok((rho.variance(&uv.u)?, rho.variance(&uv.v)?))
}

/// `(<C1>, <C2>)` from the reduced states.
pub fn commutator_expectations(rho: &DensityMatrix, pairs: Pairs<'_>) -> Result<(f64, f64)> {
    pairs.check(rho.dims())?;
    let (c1, c2) = pairs.commutators()?;
    let e1 = rho.partial_trace(Slot::First).expectation(&c1)?;
    let e2 = rho.partial_trace(Slot::Second).expectation(&c2)?;
    Ok((e1, e2))
}

/// The uncertainty relation every state obeys:
/// `Var(u) Var(v) >= |a1 b1 <C1> + a2 b2 <C2>|² / 4`.
///
/// A violation can only come from corrupted inputs and is returned as
/// [`Error::Consistency`].
pub fn heisenberg_bound(rho: &DensityMatrix, pairs: Pairs<'_>, cfg: &CriterionConfig) -> Result<CriterionVerdict> {
    let (var_u, var_v) = variances(rho, pairs, cfg)?;
    let (c1, c2) = commutator_expectations(rho, pairs)?;
    let bound = (cfg.a1 * cfg.b1 * c1 + cfg.a2 * cfg.b2 * c2).powi(2) / 4.0;
    heisenberg_verdict(var_u * var_v, bound)
}

fn heisenberg_verdict(lhs: f64, bound: f64) -> Result<CriterionVerdict> {
    let verdict = CriterionVerdict::new(CriterionId::Heisenberg, lhs, bound);
    if verdict.violated {
        return Err(Error::Consistency(format!(
            "uncertainty relation violated: {lhs} < {bound}"
        )));
    }
    Ok(verdict)
}

pub fn otilde_from_ensemble(e: &SeparableEnsemble, pairs: Pairs<'_>, cfg: &CriterionConfig) -> Result<OtildeBound> {
    pairs.check(e.dims())?;
    let (c1, c2) = pairs.commutators()?;
    let (mut o1, mut o2) = (0.0, 0.0);
    for t in e.terms() {
        o1 += t.weight * t.rho1.expectation(&c1)?.abs();
        o2 += t.weight * t.rho2.expectation(&c2)?.abs();
    }
    Ok(OtildeBound::assemble(cfg, o1, o2, OtildeSource::Ensemble))
}

/// `|<Δr Δs>|` on a single-subsystem state, the modulus of the full complex
/// expectation with fluctuations taken about that state's own means.
fn covariance_modulus(rho: &DensityMatrix, pair: &ObservablePair) -> Result<f64> {
    let mean_r = rho.expectation(&pair.r)?;
    let mean_s = rho.expectation(&pair.s)?;
    let n = pair.dim();
    let shift = |op: &HermitianOperator, mean: f64| {
        op.matrix() - crate::CMatrix::identity(n, n) * Complex64::new(mean, 0.0)
    };
    let product = shift(&pair.r, mean_r) * shift(&pair.s, mean_s);
    Ok(rho.expectation_complex(&product)?.norm())
}

pub fn otilde_strong_from_ensemble(
    e: &SeparableEnsemble,
    pairs: Pairs<'_>,
    cfg: &CriterionConfig,
) -> Result<OtildeBound> {
    pairs.check(e.dims())?;
    let (mut o1, mut o2) = (0.0, 0.0);
    for t in e.terms() {
        o1 += 2.0 * t.weight * covariance_modulus(&t.rho1, pairs.first)?;
        o2 += 2.0 * t.weight * covariance_modulus(&t.rho2, pairs.second)?;
    }
    Ok(OtildeBound::assemble(cfg, o1, o2, OtildeSource::Strong))
}

pub fn otilde_measurable(rho: &DensityMatrix, pairs: Pairs<'_>, cfg: &CriterionConfig) -> Result<OtildeBound> {
    let (c1, c2) = commutator_expectations(rho, pairs)?;
    Ok(OtildeBound::assemble(cfg, c1.abs(), c2.abs(), OtildeSource::Measurable))
}

/// `Var(u) Var(v) >= Õ²`.
///
/// The verdict is a sound entanglement certificate when `otilde` is
/// measurable, or when `rho` is the state of the ensemble that produced it.
pub fn product_criterion_check(
    rho: &DensityMatrix,
    otilde: &OtildeBound,
    pairs: Pairs<'_>,
    cfg: &CriterionConfig,
) -> Result<CriterionVerdict> {
    let (var_u, var_v) = variances(rho, pairs, cfg)?;
    Ok(CriterionVerdict::new(otilde.criterion(), var_u * var_v, otilde.otilde.powi(2)))
}

/// `Var(u) + Var(v) >= |a1 b1| |<C1>| + |a2 b2| |<C2>|`.
pub fn sum_criterion_check(rho: &DensityMatrix, pairs: Pairs<'_>, cfg: &CriterionConfig) -> Result<CriterionVerdict> {
    let (var_u, var_v) = variances(rho, pairs, cfg)?;
    let otilde = otilde_measurable(rho, pairs, cfg)?;
    Ok(CriterionVerdict::new(CriterionId::Sum, var_u + var_v, 2.0 * otilde.otilde))
}

/// `Var(u) Var(v) >= |a1 a2 b1 b2| |<C1 ⊗ C2>|² / (‖C1‖ ‖C2‖)`.
pub fn prl02_product_check(rho: &DensityMatrix, pairs: Pairs<'_>, cfg: &CriterionConfig) -> Result<CriterionVerdict> {
    let (var_u, var_v) = variances(rho, pairs, cfg)?;
    let (c1, c2) = pairs.commutators()?;
    let joint = rho.expectation(&tensor(&c1, &c2))?;
    let bound = prl02_bound(cfg, joint, op_norm(&c1), op_norm(&c2));
    Ok(CriterionVerdict::new(CriterionId::Prl02Product, var_u * var_v, bound))
}

fn prl02_bound(cfg: &CriterionConfig, joint: f64, norm1: f64, norm2: f64) -> f64 {
    let norms = norm1 * norm2;
    if norms == 0.0 {
        // a vanishing commutator makes <C1 ⊗ C2> vanish too
        return 0.0;
    }
    (cfg.a1 * cfg.a2 * cfg.b1 * cfg.b2).abs() * joint * joint / norms
}

/// One member of the linear family `α Var(u) + β Var(v) >= 2 √(αβ) Õ`.
pub fn linear_family_check(
    rho: &DensityMatrix,
    pairs: Pairs<'_>,
    cfg: &CriterionConfig,
    alpha: f64,
    beta: f64,
    otilde: &OtildeBound,
) -> Result<CriterionVerdict> {
    check_weights(alpha, beta)?;
    let (var_u, var_v) = variances(rho, pairs, cfg)?;
    Ok(linear_verdict(var_u, var_v, alpha, beta, otilde.otilde))
}

fn linear_verdict(var_u: f64, var_v: f64, alpha: f64, beta: f64, otilde: f64) -> CriterionVerdict {
    CriterionVerdict::new(
        CriterionId::LinearFamily,
        alpha * var_u + beta * var_v,
        2.0 * (alpha * beta).sqrt() * otilde,
    )
}

fn check_weights(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha >= 0.0 && beta >= 0.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "linear-family weights must be finite and nonnegative, got ({alpha}, {beta})"
        )));
    }
    Ok(())
}

/// Symmetric-sign member used for Stokes-type observables: `α = β = 1`,
/// `a = (1, sign_a)`, `b = (1, sign_b)`, giving
/// `Var(u) + Var(v) >= |<C1>| + |<C2>|`.
pub fn stokes_check(rho: &DensityMatrix, pairs: Pairs<'_>, sign_a: f64, sign_b: f64) -> Result<CriterionVerdict> {
    let cfg = CriterionConfig::new(1.0, sign_a.signum(), 1.0, sign_b.signum())?;
    let otilde = otilde_measurable(rho, pairs, &cfg)?;
    linear_family_check(rho, pairs, &cfg, 1.0, 1.0, &otilde)
}

/// A point on the hyperbola `Var(u) Var(v) = Õ²` together with the ratio
/// `α/β` of the linear-family line tangent there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub variance_u: f64,
    pub variance_v: f64,
    pub tangent_alpha_over_beta: f64,
}

/// Samples the envelope of the linear family at `n_points` evenly spaced
/// values of `Var(u)` in `[lo, hi]`.
pub fn boundary_envelope(otilde: f64, n_points: usize, range: (f64, f64)) -> Result<Vec<EnvelopePoint>> {
    let (lo, hi) = range;
    if !(otilde >= 0.0 && otilde.is_finite()) {
        return Err(Error::InvalidArgument(format!("Õ must be finite and nonnegative, got {otilde}")));
    }
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid range [{lo}, {hi}]")));
    }
    let step = if n_points > 1 { (hi - lo) / (n_points - 1) as f64 } else { 0.0 };
    Ok((0..n_points)
        .map(|i| {
            let variance_u = match i {
                _ if n_points == 1 => lo,
                _ if i + 1 == n_points => hi,
                _ => lo + step * i as f64,
            };
            let variance_v = otilde * otilde / variance_u;
            // tangency where β/α = Var(u)/Var(v)
            EnvelopePoint { variance_u, variance_v, tangent_alpha_over_beta: variance_v / variance_u }
        })
        .collect())
}

/// Every second moment the finite-dimensional criteria need, precomputed
/// once per state so that any coefficient choice costs O(1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateMoments {
    pub var_r1: f64,
    pub var_r2: f64,
    /// `<r1 ⊗ r2> - <r1><r2>`.
    pub cov_r: f64,
    pub var_s1: f64,
    pub var_s2: f64,
    pub cov_s: f64,
    pub c1: f64,
    pub c2: f64,
    /// `<C1 ⊗ C2>`.
    pub c12: f64,
    pub norm_c1: f64,
    pub norm_c2: f64,
}

impl StateMoments {
    pub fn new(rho: &DensityMatrix, pairs: Pairs<'_>) -> Result<Self> {
        pairs.check(rho.dims())?;
        let (p1, p2) = (pairs.first, pairs.second);
        let rho1 = rho.partial_trace(Slot::First);
        let rho2 = rho.partial_trace(Slot::Second);
        let (c1_op, c2_op) = pairs.commutators()?;
        let cov = |x: &HermitianOperator, y: &HermitianOperator| -> Result<f64> {
            Ok(rho.expectation(&tensor(x, y))? - rho1.expectation(x)? * rho2.expectation(y)?)
        };
        Ok(Self {
            var_r1: rho1.variance(&p1.r)?,
            var_r2: rho2.variance(&p2.r)?,
            cov_r: cov(&p1.r, &p2.r)?,
            var_s1: rho1.variance(&p1.s)?,
            var_s2: rho2.variance(&p2.s)?,
            cov_s: cov(&p1.s, &p2.s)?,
            c1: rho1.expectation(&c1_op)?,
            c2: rho2.expectation(&c2_op)?,
            c12: rho.expectation(&tensor(&c1_op, &c2_op))?,
            norm_c1: op_norm(&c1_op),
            norm_c2: op_norm(&c2_op),
        })
    }

    pub fn variance_u(&self, cfg: &CriterionConfig) -> f64 {
        quadratic(cfg.a1, cfg.a2, self.var_r1, self.var_r2, self.cov_r)
    }

    pub fn variance_v(&self, cfg: &CriterionConfig) -> f64 {
        quadratic(cfg.b1, cfg.b2, self.var_s1, self.var_s2, self.cov_s)
    }

    pub fn otilde_measurable(&self, cfg: &CriterionConfig) -> OtildeBound {
        OtildeBound::assemble(cfg, self.c1.abs(), self.c2.abs(), OtildeSource::Measurable)
    }

    /// Evaluates a state-level criterion. The ensemble-dependent ones and the
    /// Gaussian ones are rejected; the linear family is evaluated at
    /// `α = β = 1`.
    pub fn evaluate(&self, id: CriterionId, cfg: &CriterionConfig) -> Result<CriterionVerdict> {
        let (var_u, var_v) = (self.variance_u(cfg), self.variance_v(cfg));
        match id {
            CriterionId::Heisenberg => {
                let bound = (cfg.a1 * cfg.b1 * self.c1 + cfg.a2 * cfg.b2 * self.c2).powi(2) / 4.0;
                heisenberg_verdict(var_u * var_v, bound)
            }
            CriterionId::GeneralMeasurable => Ok(CriterionVerdict::new(
                id,
                var_u * var_v,
                self.otilde_measurable(cfg).otilde.powi(2),
            )),
            CriterionId::Sum => {
                Ok(CriterionVerdict::new(id, var_u + var_v, 2.0 * self.otilde_measurable(cfg).otilde))
            }
            CriterionId::Prl02Product => Ok(CriterionVerdict::new(
                id,
                var_u * var_v,
                prl02_bound(cfg, self.c12, self.norm_c1, self.norm_c2),
            )),
            CriterionId::LinearFamily => self.evaluate_linear(cfg, 1.0, 1.0),
            other => Err(Error::UnsupportedCriterion(other)),
        }
    }

    pub fn evaluate_linear(&self, cfg: &CriterionConfig, alpha: f64, beta: f64) -> Result<CriterionVerdict> {
        check_weights(alpha, beta)?;
        let otilde = self.otilde_measurable(cfg).otilde;
        Ok(linear_verdict(self.variance_u(cfg), self.variance_v(cfg), alpha, beta, otilde))
    }
}

// Var(x1 X1 + x2 X2) for commuting X1, X2; clamped against rounding
fn quadratic(x1: f64, x2: f64, var1: f64, var2: f64, cov: f64) -> f64 {
    (x1 * x1 * var1 + x2 * x2 * var2 + 2.0 * x1 * x2 * cov).max(0.0)
}

/// Criteria that need only the state (no decomposition).
pub const STATE_CRITERIA: [CriterionId; 5] = [
    CriterionId::Heisenberg,
    CriterionId::GeneralMeasurable,
    CriterionId::Sum,
    CriterionId::Prl02Product,
    CriterionId::LinearFamily,
];

/// Evaluates `id` directly from the operators. `linear` supplies `(α, β)` for
/// the linear family (measurable `Õ`); the ensemble-based criteria require
/// `ensemble`.
pub fn evaluate(
    id: CriterionId,
    rho: &DensityMatrix,
    ensemble: Option<&SeparableEnsemble>,
    pairs: Pairs<'_>,
    cfg: &CriterionConfig,
    linear: (f64, f64),
) -> Result<CriterionVerdict> {
    match id {
        CriterionId::Heisenberg => heisenberg_bound(rho, pairs, cfg),
        CriterionId::GeneralMeasurable => {
            product_criterion_check(rho, &otilde_measurable(rho, pairs, cfg)?, pairs, cfg)
        }
        CriterionId::GeneralEnsemble | CriterionId::GeneralStrong => {
            let e = ensemble.ok_or_else(|| {
                Error::InvalidArgument(format!("criterion {id} needs a separable decomposition"))
            })?;
            let otilde = if id == CriterionId::GeneralEnsemble {
                otilde_from_ensemble(e, pairs, cfg)?
            } else {
                otilde_strong_from_ensemble(e, pairs, cfg)?
            };
            product_criterion_check(rho, &otilde, pairs, cfg)
        }
        CriterionId::Sum => sum_criterion_check(rho, pairs, cfg),
        CriterionId::Prl02Product => prl02_product_check(rho, pairs, cfg),
        CriterionId::LinearFamily => {
            let otilde = otilde_measurable(rho, pairs, cfg)?;
            linear_family_check(rho, pairs, cfg, linear.0, linear.1, &otilde)
        }
        CriterionId::CvProduct | CriterionId::CvSum => Err(Error::UnsupportedCriterion(id)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{bell_state, ensemble_to_density, BellState, EnsembleTerm};
    use approx::assert_abs_diff_eq;

    fn ones() -> CriterionConfig {
        CriterionConfig::new(1.0, 1.0, 1.0, 1.0).unwrap()
    }

    fn zero_zero() -> DensityMatrix {
        let z = DensityMatrix::basis(2, 0).unwrap();
        DensityMatrix::product(&z, &z)
    }

    fn xy() -> ObservablePair {
        ObservablePair::pauli_xy()
    }

    #[test]
    fn heisenberg_examples() {
        let p = xy();
        let pairs = Pairs::new(&p, &p);
        let singlet = bell_state(BellState::PsiMinus);
        let v = heisenberg_bound(&singlet, pairs, &ones()).unwrap();
        assert_abs_diff_eq!(v.bound, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v.lhs, 0.0, epsilon = 1e-14);
        assert!(!v.violated);

        // |00>: <C_j> = <-2σz> = -2, so bound |(-2) + (-2)|²/4 = 4; Var(u) = Var(v) = 2
        let v = heisenberg_bound(&zero_zero(), pairs, &ones()).unwrap();
        assert_abs_diff_eq!(v.bound, 4.0, epsilon = 1e-13);
        assert_abs_diff_eq!(v.lhs, 4.0, epsilon = 1e-13);
        assert!(!v.violated);

        let cross = CriterionConfig::new(1.0, 0.0, 0.0, 1.0).unwrap();
        let mut rng = crate::rng::stream_rng(1, 0);
        let rho = DensityMatrix::random_mixed((2, 2), 2, &mut rng);
        assert_eq!(heisenberg_bound(&rho, pairs, &cross).unwrap().bound, 0.0);
    }

    #[test]
    fn otilde_ensemble_examples() {
        let p = xy();
        let pairs = Pairs::new(&p, &p);
        let up = DensityMatrix::basis(2, 0).unwrap();
        let down = DensityMatrix::basis(2, 1).unwrap();
        let e = SeparableEnsemble::new(
            (2, 2),
            vec![
                EnsembleTerm { weight: 0.25, rho1: up.clone(), rho2: down.clone() },
                EnsembleTerm { weight: 0.75, rho1: down.clone(), rho2: up.clone() },
            ],
        )
        .unwrap();
        let o = otilde_from_ensemble(&e, pairs, &ones()).unwrap();
        assert_abs_diff_eq!(o.otilde1, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(o.otilde2, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(o.otilde, 2.0, epsilon = 1e-14);
        assert_eq!(o.source, OtildeSource::Ensemble);

        // measurable: <C_j> = 2(0.75 - 0.25) = 1 on both sides
        let m = otilde_measurable(&ensemble_to_density(&e), pairs, &ones()).unwrap();
        assert_abs_diff_eq!(m.otilde1, 1.0, epsilon = 1e-14);
        assert!(m.otilde <= o.otilde);
    }

    #[test]
    fn scalar_commutator_is_decomposition_independent() {
        // the only scalar commutator in finite dimension is C = 0
        let z = HermitianOperator::sigma_z();
        let commuting = ObservablePair::new(z.clone(), z.scale(3.0)).unwrap();
        let pairs = Pairs::new(&commuting, &commuting);
        let cfg = CriterionConfig::new(2.0, -1.0, 0.5, 3.0).unwrap();
        for seed in 0..5 {
            let e = crate::states::random_product_ensemble((2, 2), 4, seed).unwrap();
            let o = otilde_from_ensemble(&e, pairs, &cfg).unwrap();
            let m = otilde_measurable(&ensemble_to_density(&e), pairs, &cfg).unwrap();
            assert_eq!((o.otilde1, o.otilde2), (0.0, 0.0));
            assert_abs_diff_eq!(o.otilde, m.otilde, epsilon = 1e-15);
        }
    }

    #[test]
    fn single_term_ensemble_otilde_is_product_state_value() {
        let mut rng = crate::rng::stream_rng(3, 0);
        let p1 = ObservablePair::random(2, &mut rng);
        let p2 = ObservablePair::random(3, &mut rng);
        let pairs = Pairs::new(&p1, &p2);
        let e = crate::states::random_product_ensemble_with((2, 3), 1, &mut rng).unwrap();
        let cfg = CriterionConfig::random(&mut rng);
        let o = otilde_from_ensemble(&e, pairs, &cfg).unwrap();
        let m = otilde_measurable(&ensemble_to_density(&e), pairs, &cfg).unwrap();
        assert_abs_diff_eq!(o.otilde1, m.otilde1, epsilon = 1e-12);
        assert_abs_diff_eq!(o.otilde2, m.otilde2, epsilon = 1e-12);
    }

    #[test]
    fn strong_otilde_examples() {
        let z = HermitianOperator::sigma_z();
        let commuting = ObservablePair::new(z.clone(), z).unwrap();
        let pairs = Pairs::new(&commuting, &commuting);
        let up = DensityMatrix::basis(2, 0).unwrap();
        let down = DensityMatrix::basis(2, 1).unwrap();
        let e = SeparableEnsemble::new(
            (2, 2),
            vec![
                EnsembleTerm { weight: 0.5, rho1: up.clone(), rho2: down.clone() },
                EnsembleTerm { weight: 0.5, rho1: down.clone(), rho2: up.clone() },
            ],
        )
        .unwrap();
        let o = otilde_strong_from_ensemble(&e, pairs, &ones()).unwrap();
        assert_eq!(o.otilde, 0.0);

        // on |0>: <σx σy> = i<σz> = i with vanishing means
        let p = xy();
        let pairs = Pairs::new(&p, &p);
        let e = SeparableEnsemble::new(
            (2, 2),
            vec![EnsembleTerm { weight: 1.0, rho1: up.clone(), rho2: up.clone() }],
        )
        .unwrap();
        let o = otilde_strong_from_ensemble(&e, pairs, &ones()).unwrap();
        assert_abs_diff_eq!(o.otilde1, 2.0, epsilon = 1e-14);
        assert_eq!(o.source, OtildeSource::Strong);
    }

    #[test]
    fn measurable_otilde_examples() {
        let p = xy();
        let pairs = Pairs::new(&p, &p);
        let singlet = bell_state(BellState::PsiMinus);
        assert_abs_diff_eq!(otilde_measurable(&singlet, pairs, &ones()).unwrap().otilde, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(otilde_measurable(&zero_zero(), pairs, &ones()).unwrap().otilde, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn product_criterion_examples() {
        let p = xy();
        let pairs = Pairs::new(&p, &p);
        let singlet = bell_state(BellState::PsiMinus);
        let o = otilde_measurable(&singlet, pairs, &ones()).unwrap();
        let v = product_criterion_check(&singlet, &o, pairs, &ones()).unwrap();
        assert_eq!(v.criterion, CriterionId::GeneralMeasurable);
        assert!(!v.violated);
        assert_abs_diff_eq!(v.lhs, 0.0, epsilon = 1e-14);

        let rho = zero_zero();
        let o = otilde_measurable(&rho, pairs, &ones()).unwrap();
        let v = product_criterion_check(&rho, &o, pairs, &ones()).unwrap();
        assert_abs_diff_eq!(v.lhs, 4.0, epsilon = 1e-13);
        assert_abs_diff_eq!(v.bound, 4.0, epsilon = 1e-13);
        assert!(!v.violated);
    }

    #[test]
    fn sum_criterion_examples() {
        let p = xy();
        let pairs = Pairs::new(&p, &p);
        let v = sum_criterion_check(&zero_zero(), pairs, &ones()).unwrap();
        assert_abs_diff_eq!(v.lhs, 4.0, epsilon = 1e-13);
        assert_abs_diff_eq!(v.bound, 4.0, epsilon = 1e-13);
        assert!(!v.violated);
        let v = sum_criterion_check(&bell_state(BellState::PsiMinus), pairs, &ones()).unwrap();
        assert!(!v.violated);
        assert_abs_diff_eq!(v.bound, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn prl02_examples() {
        let p = xy();
        let pairs = Pairs::new(&p, &p);
        let v = prl02_product_check(&bell_state(BellState::PsiMinus), pairs, &ones()).unwrap();
        // <C1 ⊗ C2> = 4<σz ⊗ σz> = -4, norms 2 each: bound 16/4
        assert_abs_diff_eq!(v.bound, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.lhs, 0.0, epsilon = 1e-14);
        assert!(v.violated);
        assert_abs_diff_eq!(v.margin, 4.0, epsilon = 1e-12);

        let v = prl02_product_check(&zero_zero(), pairs, &ones()).unwrap();
        assert_abs_diff_eq!(v.bound, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.lhs, 4.0, epsilon = 1e-12);
        assert!(!v.violated);

        let no_a2 = CriterionConfig::new(1.0, 0.0, 1.0, 1.0).unwrap();
        let v = prl02_product_check(&bell_state(BellState::PsiMinus), pairs, &no_a2).unwrap();
        assert_eq!(v.bound, 0.0);
        assert!(!v.violated);
    }

    #[test]
    fn linear_family_examples() {
        let p = xy();
        let pairs = Pairs::new(&p, &p);
        let mut rng = crate::rng::stream_rng(4, 0);
        for _ in 0..10 {
            let rho = DensityMatrix::random_mixed((2, 2), 2, &mut rng);
            let cfg = CriterionConfig::random(&mut rng);
            let o = otilde_measurable(&rho, pairs, &cfg).unwrap();
            let lin = linear_family_check(&rho, pairs, &cfg, 1.0, 1.0, &o).unwrap();
            let sum = sum_criterion_check(&rho, pairs, &cfg).unwrap();
            assert_eq!((lin.lhs, lin.bound, lin.violated), (sum.lhs, sum.bound, sum.violated));
            let half = linear_family_check(&rho, pairs, &cfg, 1.0, 0.0, &o).unwrap();
            assert_eq!(half.bound, 0.0);
            assert!(!half.violated);
        }
        let rho = zero_zero();
        let o = otilde_measurable(&rho, pairs, &ones()).unwrap();
        assert!(linear_family_check(&rho, pairs, &ones(), -1.0, 1.0, &o).is_err());
    }

    #[test]
    fn stokes_check_is_symmetric_sum_member() {
        let p = xy();
        let pairs = Pairs::new(&p, &p);
        let singlet = bell_state(BellState::PsiMinus);
        let v = stokes_check(&singlet, pairs, 1.0, 1.0).unwrap();
        assert_eq!(v.criterion, CriterionId::LinearFamily);
        let (c1, c2) = commutator_expectations(&singlet, pairs).unwrap();
        assert_abs_diff_eq!(v.bound, c1.abs() + c2.abs(), epsilon = 1e-14);
        let rho = zero_zero();
        let v = stokes_check(&rho, pairs, -1.0, 1.0).unwrap();
        assert_abs_diff_eq!(v.bound, 4.0, epsilon = 1e-13);
    }

    #[test]
    fn envelope_examples() {
        let pts = boundary_envelope(1.0, 3, (0.5, 1.5)).unwrap();
        let mid = pts[1];
        assert_abs_diff_eq!(mid.variance_u, 1.0);
        assert_abs_diff_eq!(mid.variance_v, 1.0);
        assert_abs_diff_eq!(mid.tangent_alpha_over_beta, 1.0);
        let flat = boundary_envelope(0.0, 5, (0.25, 4.0)).unwrap();
        assert!(flat.iter().all(|p| p.variance_v == 0.0));
        assert_eq!(flat.last().unwrap().variance_u, 4.0);
        assert!(boundary_envelope(1.0, 4, (0.0, 1.0)).is_err());
        assert!(boundary_envelope(1.0, 4, (2.0, 1.0)).is_err());
        assert!(boundary_envelope(-1.0, 4, (1.0, 2.0)).is_err());
        assert_eq!(boundary_envelope(1.0, 1, (2.0, 3.0)).unwrap()[0].variance_u, 2.0);
    }

    #[test]
    fn envelope_points_satisfy_every_line() {
        let otilde = 1.7;
        for p in boundary_envelope(otilde, 40, (0.1, 9.0)).unwrap() {
            for i in 0..30 {
                for j in 0..30 {
                    let (a, b) = (i as f64 * 0.3, j as f64 * 0.3);
                    let slack = a * p.variance_u + b * p.variance_v - 2.0 * (a * b).sqrt() * otilde;
                    assert!(slack >= -1e-9);
                }
            }
            let r = p.tangent_alpha_over_beta;
            let touch = r * p.variance_u + p.variance_v - 2.0 * r.sqrt() * otilde;
            assert_abs_diff_eq!(touch, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn moments_match_direct_evaluation() {
        let mut rng = crate::rng::stream_rng(5, 0);
        for dims in [(2, 2), (2, 3), (3, 3)] {
            for _ in 0..5 {
                let rho = DensityMatrix::random_mixed(dims, 3, &mut rng);
                let p1 = ObservablePair::random(dims.0, &mut rng);
                let p2 = ObservablePair::random(dims.1, &mut rng);
                let pairs = Pairs::new(&p1, &p2);
                let m = StateMoments::new(&rho, pairs).unwrap();
                let cfg = CriterionConfig::random(&mut rng);
                for id in STATE_CRITERIA {
                    let fast = m.evaluate(id, &cfg).unwrap();
                    let slow = evaluate(id, &rho, None, pairs, &cfg, (1.0, 1.0)).unwrap();
                    assert_eq!(fast.criterion, slow.criterion);
                    let scale = 1.0 + slow.lhs.abs() + slow.bound.abs();
                    assert!((fast.lhs - slow.lhs).abs() < 1e-10 * scale, "{id}");
                    assert!((fast.bound - slow.bound).abs() < 1e-10 * scale, "{id}");
                }
                assert!(m.evaluate(CriterionId::CvSum, &cfg).is_err());
                assert!(m.evaluate(CriterionId::GeneralEnsemble, &cfg).is_err());
            }
        }
    }

    #[test]
    fn ensemble_criteria_need_a_decomposition() {
        let p = xy();
        let pairs = Pairs::new(&p, &p);
        let rho = zero_zero();
        assert!(evaluate(CriterionId::GeneralEnsemble, &rho, None, pairs, &ones(), (1.0, 1.0)).is_err());
        assert!(evaluate(CriterionId::CvProduct, &rho, None, pairs, &ones(), (1.0, 1.0)).is_err());
    }

    #[test]
    fn mismatched_pairs_are_rejected() {
        let p2 = xy();
        let mut rng = crate::rng::stream_rng(6, 0);
        let p3 = ObservablePair::random(3, &mut rng);
        let pairs = Pairs::new(&p2, &p3);
        assert!(sum_criterion_check(&zero_zero(), pairs, &ones()).is_err());
    }

    #[test]
    fn criterion_ids_round_trip_through_strings() {
        for id in CriterionId::ALL {
            assert_eq!(id.as_str().parse::<CriterionId>().unwrap(), id);
            assert_eq!(serde_json::to_string(&id).unwrap(), format!("\"{id}\""));
        }
        assert!("bogus".parse::<CriterionId>().is_err());
    }

    #[test]
    fn verdict_slack_semantics() {
        let v = CriterionVerdict::new(CriterionId::Sum, 1.0 - 5e-10, 1.0);
        assert!(!v.violated);
        let v = CriterionVerdict::new(CriterionId::Sum, 1.0 - 2e-9, 1.0);
        assert!(v.violated);
        assert!(!v.reslacked(1e-6).violated);
    }
}
