//! JSON and CSV file formats.
//!
//! Complex matrices are row-major arrays of `[re, im]` pairs. Parse errors
//! keep serde's line and column.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::criteria::{CriterionId, CriterionVerdict};
use crate::error::{Error, Result};
use crate::gaussian::{CvConfig, GaussianState};
use crate::operators::{HermitianOperator, ObservablePair};
use crate::states::{CriterionConfig, DensityMatrix, EnsembleTerm, SeparableEnsemble};
use crate::CMatrix;

pub type Entries = Vec<Vec<[f64; 2]>>;

fn entries_to_matrix(dim: usize, entries: &Entries, what: &str) -> Result<CMatrix> {
    if entries.len() != dim {
        return Err(Error::InvalidArgument(format!("{what}: expected {dim} rows, found {}", entries.len())));
    }
    if let Some((i, row)) = entries.iter().enumerate().find(|(_, r)| r.len() != dim) {
        return Err(Error::InvalidArgument(format!(
            "{what}: row {i} has {} entries, expected {dim}",
            row.len()
        )));
    }
    Ok(CMatrix::from_fn(dim, dim, |i, j| Complex64::new(entries[i][j][0], entries[i][j][1])))
}

fn matrix_to_entries(m: &CMatrix) -> Entries {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

/// A square complex matrix on one subsystem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub dim: usize,
    pub entries: Entries,
}

impl MatrixFile {
    pub fn from_matrix(m: &CMatrix) -> Self {
        Self { dim: m.nrows(), entries: matrix_to_entries(m) }
    }

    pub fn to_operator(&self) -> Result<HermitianOperator> {
        HermitianOperator::new(entries_to_matrix(self.dim, &self.entries, "observable")?)
    }

    pub fn to_local_state(&self) -> Result<DensityMatrix> {
        DensityMatrix::single(entries_to_matrix(self.dim, &self.entries, "local state")?)
    }
}

/// A bipartite density matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub dims: [usize; 2],
    pub entries: Entries,
}

impl From<&DensityMatrix> for StateFile {
    fn from(rho: &DensityMatrix) -> Self {
        let (d1, d2) = rho.dims();
        Self { dims: [d1, d2], entries: matrix_to_entries(rho.matrix()) }
    }
}

impl StateFile {
    pub fn to_density(&self) -> Result<DensityMatrix> {
        let [d1, d2] = self.dims;
        let m = entries_to_matrix(d1 * d2, &self.entries, "state")?;
        DensityMatrix::new((d1, d2), m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermFile {
    pub w: f64,
    pub rho1: MatrixFile,
    pub rho2: MatrixFile,
}

/// A separable decomposition `Σ w ρ1 ⊗ ρ2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleFile {
    pub dims: [usize; 2],
    pub terms: Vec<TermFile>,
}

impl From<&SeparableEnsemble> for EnsembleFile {
    fn from(e: &SeparableEnsemble) -> Self {
        let (d1, d2) = e.dims();
        let terms = e
            .terms()
            .iter()
            .map(|t| TermFile {
                w: t.weight,
                rho1: MatrixFile::from_matrix(t.rho1.matrix()),
                rho2: MatrixFile::from_matrix(t.rho2.matrix()),
            })
            .collect();
        Self { dims: [d1, d2], terms }
    }
}

impl EnsembleFile {
    pub fn to_ensemble(&self) -> Result<SeparableEnsemble> {
        let terms = self
            .terms
            .iter()
            .map(|t| Ok(EnsembleTerm { weight: t.w, rho1: t.rho1.to_local_state()?, rho2: t.rho2.to_local_state()? }))
            .collect::<Result<Vec<_>>>()?;
        SeparableEnsemble::new((self.dims[0], self.dims[1]), terms)
    }
}

/// First and second moments of a two-mode Gaussian state, quadratures
/// ordered `(q1, p1, q2, p2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianFile {
    pub mean: [f64; 4],
    pub cov: [[f64; 4]; 4],
}

impl From<&GaussianState> for GaussianFile {
    fn from(gs: &GaussianState) -> Self {
        let c = gs.cov();
        Self { mean: gs.mean(), cov: std::array::from_fn(|i| std::array::from_fn(|j| c[(i, j)])) }
    }
}

impl GaussianFile {
    pub fn to_gaussian(&self) -> Result<GaussianState> {
        GaussianState::new(self.mean, Matrix4::from_fn(|i, j| self.cov[i][j]))
    }
}

/// Any state file, told apart by its keys.
#[derive(Debug, Clone, PartialEq)]
pub enum InputState {
    Density(StateFile),
    Ensemble(EnsembleFile),
    Gaussian(GaussianFile),
}

impl InputState {
    pub fn parse(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let has = |k: &str| value.get(k).is_some();
        // re-parse from text so errors point into the file
        Ok(if has("cov") || has("mean") {
            InputState::Gaussian(serde_json::from_str(text)?)
        } else if has("terms") {
            InputState::Ensemble(serde_json::from_str(text)?)
        } else {
            InputState::Density(serde_json::from_str(text)?)
        })
    }
}

/// One observable: an explicit matrix or a Pauli preset name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservableSpec {
    Preset(String),
    Matrix(MatrixFile),
}

impl ObservableSpec {
    pub fn to_operator(&self) -> Result<HermitianOperator> {
        match self {
            ObservableSpec::Matrix(m) => m.to_operator(),
            ObservableSpec::Preset(name) => match name.as_str() {
                "sigma_x" => Ok(HermitianOperator::sigma_x()),
                "sigma_y" => Ok(HermitianOperator::sigma_y()),
                "sigma_z" => Ok(HermitianOperator::sigma_z()),
                other => Err(Error::InvalidArgument(format!(
                    "unknown observable preset '{other}' (expected sigma_x, sigma_y or sigma_z)"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairFile {
    pub r: ObservableSpec,
    pub s: ObservableSpec,
}

impl PairFile {
    pub fn to_pair(&self) -> Result<ObservablePair> {
        ObservablePair::new(self.r.to_operator()?, self.s.to_operator()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservablesFile {
    pub pair1: PairFile,
    pub pair2: PairFile,
}

impl ObservablesFile {
    pub fn to_pairs(&self) -> Result<(ObservablePair, ObservablePair)> {
        Ok((self.pair1.to_pair()?, self.pair2.to_pair()?))
    }
}

fn one() -> f64 {
    1.0
}

/// Criterion coefficients shared by discrete and quadrature criteria, plus
/// the weights of the linear family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
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
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub beta: f64,
}

impl ConfigFile {
    pub fn criterion_config(&self) -> Result<CriterionConfig> {
        CriterionConfig {
            a1: self.a1,
            a2: self.a2,
            b1: self.b1,
            b2: self.b2,
            a3: self.a3,
            a4: self.a4,
            b3: self.b3,
            b4: self.b4,
        }
        .validated()
    }

    pub fn cv_config(&self) -> Result<CvConfig> {
        CvConfig::new([self.a1, self.a2, self.a3, self.a4], [self.b1, self.b2, self.b3, self.b4])
    }

    pub fn weights(&self) -> (f64, f64) {
        (self.alpha, self.beta)
    }
}

impl From<&CriterionConfig> for ConfigFile {
    fn from(c: &CriterionConfig) -> Self {
        Self { a1: c.a1, a2: c.a2, b1: c.b1, b2: c.b2, a3: c.a3, a4: c.a4, b3: c.b3, b4: c.b4, alpha: 1.0, beta: 1.0 }
    }
}

impl From<&CvConfig> for ConfigFile {
    fn from(c: &CvConfig) -> Self {
        Self { a1: c.a1, a2: c.a2, b1: c.b1, b2: c.b2, a3: c.a3, a4: c.a4, b3: c.b3, b4: c.b4, alpha: 1.0, beta: 1.0 }
    }
}

/// A verdict together with the configuration that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub criterion: CriterionId,
    pub lhs: f64,
    pub bound: f64,
    pub violated: bool,
    pub margin: f64,
    pub config: ConfigFile,
}

impl VerdictRecord {
    pub fn new(v: CriterionVerdict, config: ConfigFile) -> Self {
        Self { criterion: v.criterion, lhs: v.lhs, bound: v.bound, violated: v.violated, margin: v.margin, config }
    }
}

pub const VERDICT_CSV_HEADER: &str = "criterion,lhs,bound,violated,margin,a1,a2,b1,b2,a3,a4,b3,b4,alpha,beta";

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Header line plus one row per record, newline-terminated.
pub fn verdicts_to_csv(records: &[VerdictRecord]) -> String {
    let mut out = String::from(VERDICT_CSV_HEADER);
    out.push('\n');
    for r in records {
        let c = &r.config;
        let nums = [r.lhs, r.bound];
        let coeffs = [r.margin, c.a1, c.a2, c.b1, c.b2, c.a3, c.a4, c.b3, c.b4, c.alpha, c.beta];
        let _ = write!(out, "{}", r.criterion);
        for x in nums {
            let _ = write!(out, ",{}", fmt_f64(x));
        }
        let _ = write!(out, ",{}", r.violated);
        for x in coeffs {
            let _ = write!(out, ",{}", fmt_f64(x));
        }
        out.push('\n');
    }
    out
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Reads and deserializes a JSON file.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

pub fn load_state(path: &Path) -> Result<InputState> {
    InputState::parse(&read_text(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{bell_state, random_product_ensemble, BellState};

    #[test]
    fn density_round_trip() {
        let rho = bell_state(BellState::PsiMinus);
        let text = serde_json::to_string(&StateFile::from(&rho)).unwrap();
        let InputState::Density(f) = InputState::parse(&text).unwrap() else { panic!("wrong kind") };
        assert_eq!(f.to_density().unwrap(), rho);
    }

    #[test]
    fn ensemble_and_gaussian_round_trip() {
        let e = random_product_ensemble((2, 3), 3, 1).unwrap();
        let text = serde_json::to_string(&EnsembleFile::from(&e)).unwrap();
        let InputState::Ensemble(f) = InputState::parse(&text).unwrap() else { panic!("wrong kind") };
        assert_eq!(f.to_ensemble().unwrap(), e);

        let gs = GaussianState::two_mode_squeezed(0.5, 0.1).unwrap();
        let text = serde_json::to_string(&GaussianFile::from(&gs)).unwrap();
        let InputState::Gaussian(f) = InputState::parse(&text).unwrap() else { panic!("wrong kind") };
        assert_eq!(f.to_gaussian().unwrap(), gs);
    }

    #[test]
    fn parse_errors_carry_positions() {
        let err = InputState::parse("{\n  \"dims\": [2, 2],\n  \"entries\": [[1, 2]]\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(InputState::parse("{ not json").unwrap_err().to_string().contains("line 1"));
    }

    #[test]
    fn shape_errors_are_reported() {
        let f = StateFile { dims: [2, 2], entries: vec![vec![[1.0, 0.0]; 4]; 3] };
        assert!(matches!(f.to_density(), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn observable_presets() {
        let text = r#"{"pair1": {"r": "sigma_x", "s": "sigma_y"},
                       "pair2": {"r": {"dim": 2, "entries": [[[0,0],[1,0]],[[1,0],[0,0]]]}, "s": "sigma_y"}}"#;
        let f: ObservablesFile = serde_json::from_str(text).unwrap();
        let (p1, p2) = f.to_pairs().unwrap();
        assert_eq!(p1, p2);
        let bad: ObservablesFile = serde_json::from_str(&text.replace("sigma_x", "sigma_w")).unwrap();
        assert!(bad.to_pairs().is_err());
    }

    #[test]
    fn config_defaults() {
        let c: ConfigFile = serde_json::from_str(r#"{"a1": 1, "a2": -1, "b1": 1, "b2": 1}"#).unwrap();
        assert_eq!((c.a3, c.alpha, c.beta), (0.0, 1.0, 1.0));
        assert_eq!(c.cv_config().unwrap(), CvConfig::epr());
        assert!(serde_json::from_str::<ConfigFile>(r#"{"a1": 1, "a2": 1, "b1": 1, "b2": 1, "gamma": 2}"#).is_err());
    }

    #[test]
    fn csv_round_trips_doubles() {
        let v = CriterionVerdict::new(CriterionId::Sum, 0.1 + 0.2, 1.0 / 3.0);
        let cfg = CriterionConfig::new(1.0, -1.0, 1.0, 1.0).unwrap();
        let csv = verdicts_to_csv(&[VerdictRecord::new(v, ConfigFile::from(&cfg))]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(VERDICT_CSV_HEADER));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), VERDICT_CSV_HEADER.split(',').count());
        assert_eq!(row[0], "sum");
        assert_eq!(row[1].parse::<f64>().unwrap(), 0.1 + 0.2);
        assert_eq!(row[2].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(row[3], "true");
    }
}
