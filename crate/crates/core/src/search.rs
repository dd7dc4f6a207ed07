//! Derivative-free search over criterion coefficients for the largest
//! violation margin a state admits.
//!
//! Verdicts are invariant under positive rescaling of `(a1, a2)` and
//! `(b1, b2)`, so coefficient vectors are searched on the unit sphere of the
//! max-norm: the largest coefficient magnitude in each block is 1. The
//! objective is the additive margin `bound - lhs`.
//!
//! Both searches scan a fixed design (angle grid for qudits, a rotated
//! low-discrepancy sequence for Gaussians) and then run rounds of
//! coordinate-wise golden-section refinement from the best design point.
//! Design points are evaluated in parallel and merged in index order, so the
//! result is identical under every [`Execution`].

use serde::{Deserialize, Serialize};

use crate::criteria::{CriterionId, CriterionVerdict, Pairs, StateMoments};
use crate::error::{Error, Result};
use crate::gaussian::{evaluate_cv, CvConfig, GaussianState};
use crate::par::{self, Execution};
use crate::rng;
use crate::states::{CriterionConfig, DensityMatrix};

/// Golden-section iterations per coordinate line search.
pub const GOLDEN_STEPS: usize = 40;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterDomain {
    /// `(a1, a2, b1, b2)`.
    Discrete,
    /// `(a1..a4, b1..b4)`.
    Cv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Grid points per angle (discrete), or the square root of the number of
    /// sampled directions (CV).
    pub grid_resolution: usize,
    pub refine_iters: usize,
    pub seed: u64,
    pub criterion: CriterionId,
    pub domain: ParameterDomain,
}

impl SearchConfig {
    pub fn new(criterion: CriterionId, grid_resolution: usize, refine_iters: usize, seed: u64) -> Result<Self> {
        let domain = if criterion.is_cv() { ParameterDomain::Cv } else { ParameterDomain::Discrete };
        Self { grid_resolution, refine_iters, seed, criterion, domain }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.grid_resolution < 4 {
            return Err(Error::InvalidArgument(format!(
                "grid resolution must be at least 4, got {}",
                self.grid_resolution
            )));
        }
        if self.criterion.is_cv() != (self.domain == ParameterDomain::Cv) {
            return Err(Error::InvalidArgument(format!(
                "criterion {} does not belong to the {:?} domain",
                self.criterion, self.domain
            )));
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "snake_case")]
pub enum BestConfig {
    Discrete(CriterionConfig),
    Cv(CvConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_config: BestConfig,
    /// Positive when a violation was found.
    pub best_margin: f64,
    pub verdict: CriterionVerdict,
    pub evaluations: usize,
}

/// Coefficients `(cos θ, sin θ)` rescaled to max-norm 1.
pub fn square_direction(theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    let scale = c.abs().max(s.abs());
    (c / scale, s / scale)
}

fn discrete_config(theta_a: f64, theta_b: f64) -> CriterionConfig {
    let (a1, a2) = square_direction(theta_a);
    let (b1, b2) = square_direction(theta_b);
    CriterionConfig { a1, a2, b1, b2, a3: 0.0, a4: 0.0, b3: 0.0, b4: 0.0 }
}

/// Searches `(θ_a, θ_b)` for the largest margin of `sc.criterion` on `rho`.
pub fn optimize_violation(rho: &DensityMatrix, pairs: Pairs<'_>, sc: &SearchConfig) -> Result<SearchResult> {
    optimize_violation_with(rho, pairs, sc, Execution::default())
}

pub fn optimize_violation_with(
    rho: &DensityMatrix,
    pairs: Pairs<'_>,
    sc: &SearchConfig,
    exec: Execution,
) -> Result<SearchResult> {
    let moments = StateMoments::new(rho, pairs)?;
    optimize_moments(&moments, sc, exec)
}

/// [`optimize_violation`] on precomputed moments.
pub fn optimize_moments(moments: &StateMoments, sc: &SearchConfig, exec: Execution) -> Result<SearchResult> {
    let sc = sc.validated()?;
    if sc.domain != ParameterDomain::Discrete {
        return Err(Error::UnsupportedCriterion(sc.criterion));
    }
    // rejects criteria the moments cannot evaluate before any scanning
    moments.evaluate(sc.criterion, &discrete_config(0.0, 0.0))?;

    let eval = |theta_a: f64, theta_b: f64| -> Result<CriterionVerdict> {
        moments.evaluate(sc.criterion, &discrete_config(theta_a, theta_b))
    };

    let g = sc.grid_resolution;
    let step = std::f64::consts::TAU / g as f64;
    let grid = par::map_range(exec, g * g, |idx| {
        let (ia, ib) = (idx / g, idx % g);
        eval(ia as f64 * step, ib as f64 * step)
    });
    let mut best: Option<(f64, f64, CriterionVerdict)> = None;
    for (idx, verdict) in grid.into_iter().enumerate() {
        let verdict = verdict?;
        if best.as_ref().is_none_or(|b| verdict.margin > b.2.margin) {
            best = Some(((idx / g) as f64 * step, (idx % g) as f64 * step, verdict));
        }
    }
    let (mut theta_a, mut theta_b, mut verdict) = best.expect("grid is nonempty");
    let mut evaluations = g * g;

    for round in 0..sc.refine_iters {
        let half = step * 0.5_f64.powi(round as i32);
        for coord in 0..2 {
            let center = if coord == 0 { theta_a } else { theta_b };
            let line = golden_section(center - half, center + half, |t| {
                let v = if coord == 0 { eval(t, theta_b) } else { eval(theta_a, t) };
                v.map(|v| v.margin)
            })?;
            evaluations += line.evaluations;
            if line.value > verdict.margin {
                let candidate = if coord == 0 { eval(line.arg, theta_b)? } else { eval(theta_a, line.arg)? };
                evaluations += 1;
                if candidate.margin > verdict.margin {
                    verdict = candidate;
                    if coord == 0 {
                        theta_a = line.arg;
                    } else {
                        theta_b = line.arg;
                    }
                }
            }
        }
    }

    Ok(SearchResult {
        best_config: BestConfig::Discrete(discrete_config(theta_a, theta_b)),
        best_margin: verdict.margin,
        verdict,
        evaluations,
    })
}

struct LineMax {
    arg: f64,
    value: f64,
    evaluations: usize,
}

/// Golden-section maximization on `[lo, hi]`, returning the best point seen.
fn golden_section<F>(mut lo: f64, mut hi: f64, mut f: F) -> Result<LineMax>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let mut best = if f2 > f1 { (x2, f2) } else { (x1, f1) };
    for _ in 0..GOLDEN_STEPS {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
            if f1 > best.1 {
                best = (x1, f1);
            }
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
            if f2 > best.1 {
                best = (x2, f2);
            }
        }
    }
    Ok(LineMax { arg: best.0, value: best.1, evaluations: 2 + GOLDEN_STEPS })
}

/// Additive-recurrence increments for 8 dimensions: powers of the inverse of
/// the positive root of `x^9 = x + 1`.
fn r8_increments() -> [f64; 8] {
    let mut phi = 1.5_f64;
    for _ in 0..100 {
        phi = (1.0 + phi).powf(1.0 / 9.0);
    }
    let mut out = [0.0; 8];
    let mut p = 1.0;
    for x in &mut out {
        p /= phi;
        *x = p;
    }
    out
}

fn box_muller(u1: f64, u2: f64) -> (f64, f64) {
    let radius = (-2.0 * (1.0 - u1).ln()).sqrt();
    let angle = std::f64::consts::TAU * u2;
    (radius * angle.cos(), radius * angle.sin())
}

fn max_normalized(v: [f64; 4]) -> [f64; 4] {
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return v;
    }
    v.map(|x| x / scale)
}

/// Design point `index`: a rotated R8 sample mapped to two Gaussian
/// directions, each normalized to max-norm 1.
fn cv_design_point(index: usize, offset: &[f64; 8], incr: &[f64; 8]) -> [f64; 8] {
    let mut u = [0.0; 8];
    for k in 0..8 {
        u[k] = (offset[k] + (index as f64 + 1.0) * incr[k]).fract();
    }
    let mut gauss = [0.0; 8];
    for k in 0..4 {
        let (x, y) = box_muller(u[2 * k], u[2 * k + 1]);
        gauss[2 * k] = x;
        gauss[2 * k + 1] = y;
    }
    let a = max_normalized([gauss[0], gauss[1], gauss[2], gauss[3]]);
    let b = max_normalized([gauss[4], gauss[5], gauss[6], gauss[7]]);
    [a[0], a[1], a[2], a[3], b[0], b[1], b[2], b[3]]
}

fn cv_config(x: &[f64; 8]) -> Option<CvConfig> {
    CvConfig::new([x[0], x[1], x[2], x[3]], [x[4], x[5], x[6], x[7]]).ok()
}

/// Searches the eight quadrature coefficients for the largest margin of
/// `sc.criterion` on `gs`.
pub fn optimize_cv(gs: &GaussianState, sc: &SearchConfig) -> Result<SearchResult> {
    optimize_cv_with(gs, sc, Execution::default())
}

pub fn optimize_cv_with(gs: &GaussianState, sc: &SearchConfig, exec: Execution) -> Result<SearchResult> {
    let sc = sc.validated()?;
    if sc.domain != ParameterDomain::Cv {
        return Err(Error::UnsupportedCriterion(sc.criterion));
    }
    let criterion = sc.criterion;
    let eval = |x: &[f64; 8]| -> Option<CriterionVerdict> {
        cv_config(x).map(|cfg| evaluate_cv(criterion, gs, &cfg).expect("cv criterion"))
    };
    let margin = |x: &[f64; 8]| eval(x).map_or(f64::NEG_INFINITY, |v| v.margin);

    let mut rng = rng::stream_rng(sc.seed, 0);
    let offset: [f64; 8] = std::array::from_fn(|_| rng::uniform(&mut rng));
    let incr = r8_increments();
    let samples = sc.grid_resolution * sc.grid_resolution;
    let design = par::map_range(exec, samples, |i| {
        let x = cv_design_point(i, &offset, &incr);
        (x, margin(&x))
    });
    let mut best = design[0];
    for &(x, m) in &design[1..] {
        if m > best.1 {
            best = (x, m);
        }
    }
    let (mut point, mut best_margin) = best;
    let mut evaluations = samples;

    for round in 0..sc.refine_iters {
        let half = 0.5_f64.powi(round as i32);
        for k in 0..8 {
            let lo = (point[k] - half).max(-1.0);
            let hi = (point[k] + half).min(1.0);
            let line = golden_section(lo, hi, |t| {
                let mut trial = point;
                trial[k] = t;
                Ok(margin(&trial))
            })?;
            evaluations += line.evaluations;
            if line.value > best_margin {
                point[k] = line.arg;
                best_margin = line.value;
            }
        }
    }

    let verdict = match eval(&point) {
        Some(v) => v,
        None => {
            return Err(Error::Consistency("search ended on an invalid configuration".into()));
        }
    };
    let cfg = cv_config(&point).expect("validated above");
    Ok(SearchResult { best_config: BestConfig::Cv(cfg), best_margin: verdict.margin, verdict, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::ObservablePair;
    use crate::states::{bell_state, BellState};

    #[test]
    fn square_direction_has_unit_max_norm() {
        for i in 0..64 {
            let (x, y) = square_direction(i as f64 * 0.1);
            assert!((x.abs().max(y.abs()) - 1.0).abs() < 1e-15);
        }
        let (x, y) = square_direction(std::f64::consts::FRAC_PI_4);
        assert!((x - 1.0).abs() < 1e-15 && (y - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coarse_grid_counts_evaluations() {
        let p = ObservablePair::pauli_xy();
        let sc = SearchConfig::new(CriterionId::Prl02Product, 4, 0, 0).unwrap();
        let res = optimize_violation(&bell_state(BellState::PsiMinus), Pairs::new(&p, &p), &sc).unwrap();
        assert_eq!(res.evaluations, 16);
    }

    #[test]
    fn golden_section_finds_a_kink() {
        let line = golden_section(0.0, 2.0, |x| Ok(-(x - 1.3_f64).abs())).unwrap();
        assert!((line.arg - 1.3).abs() < 1e-7);
        assert_eq!(line.evaluations, 2 + GOLDEN_STEPS);
    }

    #[test]
    fn r8_increments_solve_the_defining_polynomial() {
        let incr = r8_increments();
        let phi = 1.0 / incr[0];
        assert!((phi.powi(9) - phi - 1.0).abs() < 1e-12);
        assert!(incr.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(SearchConfig::new(CriterionId::Sum, 3, 0, 0).is_err());
        let mut sc = SearchConfig::new(CriterionId::Sum, 8, 0, 0).unwrap();
        sc.domain = ParameterDomain::Cv;
        assert!(sc.validated().is_err());
        let p = ObservablePair::pauli_xy();
        let sc = SearchConfig::new(CriterionId::GeneralEnsemble, 8, 0, 0).unwrap();
        assert!(optimize_violation(&bell_state(BellState::PsiMinus), Pairs::new(&p, &p), &sc).is_err());
        let sc = SearchConfig::new(CriterionId::CvSum, 8, 0, 0).unwrap();
        assert!(optimize_violation(&bell_state(BellState::PsiMinus), Pairs::new(&p, &p), &sc).is_err());
        let sc = SearchConfig::new(CriterionId::Sum, 8, 0, 0).unwrap();
        assert!(optimize_cv(&GaussianState::vacuum(), &sc).is_err());
    }
}
