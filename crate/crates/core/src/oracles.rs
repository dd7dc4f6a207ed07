//! Exact entanglement deciders and the soundness audit of the criteria.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::criteria::{CriterionId, Pairs, StateMoments, STATE_CRITERIA};
use crate::error::{Error, Result};
use crate::io::StateFile;
use crate::operators::{ObservablePair, Slot};
use crate::par::{self, Execution};
use crate::search::{optimize_moments, BestConfig, SearchConfig};
use crate::states::{ensemble_to_density, random_product_ensemble_with, CriterionConfig, DensityMatrix};
use crate::{rng, DEFAULT_SLACK};

/// A partial-transpose eigenvalue below `-NPT_TOL` marks the state NPT.
pub const NPT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PptVerdict {
    Ppt,
    Npt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub verdict: PptVerdict,
    pub min_eigenvalue: f64,
    /// Whether PPT is equivalent to separability for these dimensions
    /// (2x2 and 2x3). NPT always certifies entanglement.
    pub exact: bool,
}

/// Whether `PPT ⇔ separable` holds for the given subsystem dimensions.
pub fn ppt_is_exact(dims: (usize, usize)) -> bool {
    matches!(dims, (2, 2) | (2, 3) | (3, 2) | (1, _) | (_, 1))
}

/// Peres-Horodecki test on the second subsystem.
pub fn ppt_check(rho: &DensityMatrix) -> OracleVerdict {
    let min_eigenvalue = rho.partial_transpose(Slot::Second).eigenvalues()[0];
    let verdict = if min_eigenvalue < -NPT_TOL { PptVerdict::Npt } else { PptVerdict::Ppt };
    OracleVerdict { verdict, min_eigenvalue, exact: ppt_is_exact(rho.dims()) }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionCounts {
    pub checked: u64,
    pub violated: u64,
    /// Violations on states the oracle confirms as NPT.
    pub sound: u64,
}

/// A criterion flagged a state the oracle proves separable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditFailure {
    pub state_index: usize,
    pub pair_index: usize,
    pub criterion: CriterionId,
    pub config: CriterionConfig,
    pub lhs: f64,
    pub bound: f64,
    pub margin: f64,
    pub min_pt_eigenvalue: f64,
    pub state: StateFile,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub states: usize,
    pub npt_states: usize,
    /// Per-criterion counts over the supplied configurations.
    pub criteria: BTreeMap<CriterionId, CriterionCounts>,
    /// Per-criterion counts of the witness search, one check per state and
    /// pair set.
    pub searched: BTreeMap<CriterionId, CriterionCounts>,
    pub failures: Vec<AuditFailure>,
}

impl AuditReport {
    /// Turns recorded soundness failures into an error carrying the first
    /// offending state and configuration.
    pub fn ensure_sound(&self) -> Result<()> {
        match self.failures.first() {
            None => Ok(()),
            Some(f) => Err(Error::Soundness(format!(
                "{} failure(s); first: criterion {} on state {} (pair set {}) with config {:?}, \
                 lhs {} < bound {}, min PT eigenvalue {:e}, state {}",
                self.failures.len(),
                f.criterion,
                f.state_index,
                f.pair_index,
                f.config,
                f.lhs,
                f.bound,
                f.min_pt_eigenvalue,
                serde_json::to_string(&f.state).unwrap_or_default(),
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AuditOptions {
    pub criteria: Vec<CriterionId>,
    /// Witness search run per state, pair set and criterion.
    pub search: Option<(usize, usize)>,
    pub slack: f64,
    pub execution: Execution,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            criteria: STATE_CRITERIA.to_vec(),
            search: None,
            slack: DEFAULT_SLACK,
            execution: Execution::default(),
        }
    }
}

struct StateOutcome {
    npt: bool,
    criteria: BTreeMap<CriterionId, CriterionCounts>,
    searched: BTreeMap<CriterionId, CriterionCounts>,
    failures: Vec<AuditFailure>,
}

/// Evaluates every criterion at every configuration and pair set (pair sets
/// whose dimensions do not match a state are skipped for it) and checks each
/// violation against the partial-transpose oracle. States are processed
/// concurrently and merged in input order.
pub fn consistency_audit(
    states: &[DensityMatrix],
    configs: &[CriterionConfig],
    pairs: &[(ObservablePair, ObservablePair)],
    options: &AuditOptions,
) -> Result<AuditReport> {
    let outcomes = par::map_range(options.execution, states.len(), |i| {
        audit_state(i, &states[i], configs, pairs, options)
    });
    let mut report = AuditReport { states: states.len(), ..Default::default() };
    for id in &options.criteria {
        report.criteria.insert(*id, CriterionCounts::default());
        if options.search.is_some() {
            report.searched.insert(*id, CriterionCounts::default());
        }
    }
    for outcome in outcomes {
        let outcome = outcome?;
        report.npt_states += usize::from(outcome.npt);
        merge(&mut report.criteria, &outcome.criteria);
        merge(&mut report.searched, &outcome.searched);
        report.failures.extend(outcome.failures);
    }
    Ok(report)
}

fn merge(into: &mut BTreeMap<CriterionId, CriterionCounts>, from: &BTreeMap<CriterionId, CriterionCounts>) {
    for (id, c) in from {
        let e = into.entry(*id).or_default();
        e.checked += c.checked;
        e.violated += c.violated;
        e.sound += c.sound;
    }
}

fn audit_state(
    index: usize,
    rho: &DensityMatrix,
    configs: &[CriterionConfig],
    pairs: &[(ObservablePair, ObservablePair)],
    options: &AuditOptions,
) -> Result<StateOutcome> {
    let oracle = ppt_check(rho);
    let npt = oracle.verdict == PptVerdict::Npt;
    let mut out = StateOutcome {
        npt,
        criteria: BTreeMap::new(),
        searched: BTreeMap::new(),
        failures: Vec::new(),
    };
    let mut record = |searched: bool, id: CriterionId, pair_index: usize, cfg: CriterionConfig, v: crate::CriterionVerdict| {
        let table = if searched { &mut out.searched } else { &mut out.criteria };
        let counts = table.entry(id).or_default();
        counts.checked += 1;
        let v = v.reslacked(options.slack);
        if v.violated {
            counts.violated += 1;
            if npt {
                counts.sound += 1;
            } else if oracle.exact {
                out.failures.push(AuditFailure {
                    state_index: index,
                    pair_index,
                    criterion: id,
                    config: cfg,
                    lhs: v.lhs,
                    bound: v.bound,
                    margin: v.margin,
                    min_pt_eigenvalue: oracle.min_eigenvalue,
                    state: StateFile::from(rho),
                });
            }
        }
    };

    for (pair_index, (p1, p2)) in pairs.iter().enumerate() {
        if (p1.dim(), p2.dim()) != rho.dims() {
            continue;
        }
        let moments = StateMoments::new(rho, Pairs::new(p1, p2))?;
        for cfg in configs {
            for &id in &options.criteria {
                record(false, id, pair_index, *cfg, moments.evaluate(id, cfg)?);
            }
        }
        if let Some((grid, refine)) = options.search {
            for &id in &options.criteria {
                let sc = SearchConfig::new(id, grid, refine, 0)?;
                let res = optimize_moments(&moments, &sc, Execution::Sequential)?;
                let BestConfig::Discrete(cfg) = res.best_config else {
                    unreachable!("discrete search returns discrete configs")
                };
                record(true, id, pair_index, cfg, res.verdict);
            }
        }
    }
    Ok(out)
}

/// Seeded inputs for a validation campaign.
#[derive(Debug, Clone)]
pub struct Campaign {
    pub states: Vec<DensityMatrix>,
    pub configs: Vec<CriterionConfig>,
    pub pairs: Vec<(ObservablePair, ObservablePair)>,
}

/// Random configurations drawn per campaign, besides the two symmetric ones.
pub const CAMPAIGN_RANDOM_CONFIGS: usize = 8;

impl Campaign {
    /// `n` states alternating between random separable mixtures (even
    /// indices) and random mixed states of random rank (odd indices); the
    /// spin preset and two random observable sets; the configurations
    /// `a = b = (1, ±1)` plus random ones. State `i` uses its own stream, so
    /// prefixes of a campaign agree for the same seed.
    pub fn random(dims: (usize, usize), n: usize, seed: u64) -> Result<Self> {
        let states = (0..n)
            .map(|i| {
                let mut rng = rng::stream_rng(seed, i as u64 + 2);
                if i % 2 == 0 {
                    let k = rng::int_in(&mut rng, 1, 8);
                    Ok(ensemble_to_density(&random_product_ensemble_with(dims, k, &mut rng)?))
                } else {
                    let rank = rng::int_in(&mut rng, 1, dims.0 * dims.1);
                    Ok(DensityMatrix::random_mixed(dims, rank, &mut rng))
                }
            })
            .collect::<Result<Vec<_>>>()?;

        let mut rng = rng::stream_rng(seed, 1);
        let mut configs = vec![
            CriterionConfig::new(1.0, 1.0, 1.0, 1.0)?,
            CriterionConfig::new(1.0, -1.0, 1.0, 1.0)?,
        ];
        configs.extend((0..CAMPAIGN_RANDOM_CONFIGS).map(|_| CriterionConfig::random(&mut rng)));
        let mut pairs = vec![(ObservablePair::spin_xy(dims.0)?, ObservablePair::spin_xy(dims.1)?)];
        for _ in 0..2 {
            pairs.push((ObservablePair::random(dims.0, &mut rng), ObservablePair::random(dims.1, &mut rng)));
        }
        Ok(Self { states, configs, pairs })
    }

    pub fn audit(&self, options: &AuditOptions) -> Result<AuditReport> {
        consistency_audit(&self.states, &self.configs, &self.pairs, options)
    }
}
