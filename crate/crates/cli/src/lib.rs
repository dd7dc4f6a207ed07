//! Command implementations behind the `entwit` binary.
//!
//! Every command renders its output to a string so that the binary and the
//! tests share one code path. Errors map to exit code 2; a validation
//! campaign with soundness failures exits 1.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use entwit::criteria::{self, boundary_envelope, Pairs, StateMoments, STATE_CRITERIA};
use entwit::gaussian::evaluate_cv;
use entwit::io::{
    self, fmt_f64, ConfigFile, GaussianFile, InputState, ObservablesFile, VerdictRecord,
};
use entwit::oracles::{AuditOptions, Campaign};
use entwit::search::{optimize_cv, optimize_violation, BestConfig};
use entwit::states::{ensemble_to_density, DensityMatrix, SeparableEnsemble};
use entwit::{CriterionId, ObservablePair, SearchConfig, DEFAULT_SLACK};

/// Overrides the verdict slack (default 1e-9).
pub const TOLERANCE_ENV: &str = "ENTWIT_TOLERANCE";

#[derive(Debug, Parser)]
#[command(name = "entwit", version, about = "Variance-based entanglement criteria")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate criteria on one state
    Check(CheckArgs),
    /// Audit the criteria against the partial-transpose oracle on a seeded campaign
    Validate(ValidateArgs),
    /// Search criterion coefficients for the strongest violation
    Search(SearchArgs),
    /// Emit the separability boundary and its tangent lines
    Boundary(BoundaryArgs),
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Density matrix, separable ensemble or Gaussian state (JSON)
    #[arg(long)]
    pub state: PathBuf,
    /// Observable pairs (JSON); not used for Gaussian states
    #[arg(long)]
    pub observables: Option<PathBuf>,
    /// Criterion coefficients (JSON)
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated criterion ids; defaults to every criterion the state supports
    #[arg(long, value_delimiter = ',')]
    pub criteria: Vec<CriterionId>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Subsystem dimensions, e.g. 2x3
    #[arg(long, value_parser = parse_dims)]
    pub dims: (usize, usize),
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Grid points per angle of the per-state witness search
    #[arg(long, default_value_t = 16)]
    pub grid: usize,
    #[arg(long, default_value_t = 2)]
    pub refine: usize,
    /// Skip the witness search and only check the campaign configurations
    #[arg(long)]
    pub no_search: bool,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub state: PathBuf,
    /// Read the state as a Gaussian covariance file
    #[arg(long)]
    pub gaussian: bool,
    /// Observable pairs; defaults to the spin preset (Pauli x, y for qubits)
    #[arg(long)]
    pub observables: Option<PathBuf>,
    #[arg(long)]
    pub criterion: CriterionId,
    #[arg(long, default_value_t = 32)]
    pub grid: usize,
    #[arg(long, default_value_t = 3)]
    pub refine: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct BoundaryArgs {
    /// Õ of the hyperbola; defaults to the measurable Õ of the state context
    #[arg(long)]
    pub otilde: Option<f64>,
    /// Var(u) range as LO:HI
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub range: (f64, f64),
    #[arg(long)]
    pub points: usize,
    /// State for the sum-line and prl02 columns; needs --observables and --config
    #[arg(long, requires_all = ["observables", "config"])]
    pub state: Option<PathBuf>,
    #[arg(long)]
    pub observables: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected DxD, got '{s}'"))?;
    let d = |t: &str| match t.trim().parse::<usize>() {
        Ok(d) if d >= 2 => Ok(d),
        _ => Err(format!("invalid dimension '{t}' (need an integer >= 2)")),
    };
    Ok((d(a)?, d(b)?))
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected LO:HI, got '{s}'"))?;
    let x = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
    Ok((x(a)?, x(b)?))
}

/// What the binary prints and its exit status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self { stdout, stderr: String::new(), code: 0 }
    }
}

/// Reads the slack override, if any.
pub fn slack_from_env() -> Result<f64> {
    match std::env::var(TOLERANCE_ENV) {
        Err(_) => Ok(DEFAULT_SLACK),
        Ok(raw) => match raw.trim().parse::<f64>() {
            Ok(t) if t.is_finite() && t >= 0.0 => Ok(t),
            _ => bail!("{TOLERANCE_ENV}: expected a finite nonnegative number, got '{raw}'"),
        },
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let slack = slack_from_env()?;
    match cli.command {
        Command::Check(a) => check(&a, slack).map(Outcome::ok),
        Command::Validate(a) => validate(&a, slack),
        Command::Search(a) => search(&a, slack).map(Outcome::ok),
        Command::Boundary(a) => boundary(&a).map(Outcome::ok),
    }
}

fn context(path: &Path) -> String {
    format!("invalid input {}", path.display())
}

fn load_state(path: &Path) -> Result<InputState> {
    io::load_state(path).with_context(|| context(path))
}

fn load_observables(path: &Path) -> Result<(ObservablePair, ObservablePair)> {
    let f: ObservablesFile = io::load_json(path).with_context(|| context(path))?;
    f.to_pairs().with_context(|| context(path))
}

fn load_config(path: &Path) -> Result<ConfigFile> {
    io::load_json(path).with_context(|| context(path))
}

/// A finite-dimensional state with its decomposition when one was given.
fn discrete_state(state: &InputState, path: &Path) -> Result<(DensityMatrix, Option<SeparableEnsemble>)> {
    Ok(match state {
        InputState::Density(f) => (f.to_density().with_context(|| context(path))?, None),
        InputState::Ensemble(f) => {
            let e = f.to_ensemble().with_context(|| context(path))?;
            (ensemble_to_density(&e), Some(e))
        }
        InputState::Gaussian(_) => bail!("{}: expected a density matrix or ensemble", path.display()),
    })
}

fn check_pairs_match(pairs: &(ObservablePair, ObservablePair), dims: (usize, usize)) -> Result<()> {
    let found = (pairs.0.dim(), pairs.1.dim());
    if found != dims {
        bail!("observables act on {}x{} but the state is {}x{}", found.0, found.1, dims.0, dims.1);
    }
    Ok(())
}

fn render<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn render_verdicts(records: &[VerdictRecord], format: Format) -> Result<String> {
    match format {
        Format::Json => render(&records),
        Format::Csv => Ok(io::verdicts_to_csv(records)),
    }
}

pub fn check(a: &CheckArgs, slack: f64) -> Result<String> {
    // everything is parsed and validated before any criterion runs
    let state = load_state(&a.state)?;
    let config = load_config(&a.config)?;
    let records = match &state {
        InputState::Gaussian(f) => {
            let gs = f.to_gaussian().with_context(|| context(&a.state))?;
            let cfg = config.cv_config().with_context(|| context(&a.config))?;
            let ids = if a.criteria.is_empty() {
                vec![CriterionId::CvProduct, CriterionId::CvSum]
            } else {
                a.criteria.clone()
            };
            if let Some(id) = ids.iter().find(|id| !id.is_cv()) {
                bail!("criterion {id} does not apply to Gaussian states");
            }
            ids.iter()
                .map(|&id| Ok(VerdictRecord::new(evaluate_cv(id, &gs, &cfg)?.reslacked(slack), config)))
                .collect::<Result<Vec<_>>>()?
        }
        _ => {
            let (rho, ensemble) = discrete_state(&state, &a.state)?;
            let path = a.observables.as_deref().context("--observables is required for density-matrix states")?;
            let pairs = load_observables(path)?;
            check_pairs_match(&pairs, rho.dims())?;
            let cfg = config.criterion_config().with_context(|| context(&a.config))?;
            let ids = if !a.criteria.is_empty() {
                a.criteria.clone()
            } else if ensemble.is_some() {
                CriterionId::ALL.into_iter().filter(|id| !id.is_cv()).collect()
            } else {
                STATE_CRITERIA.to_vec()
            };
            if let Some(id) = ids.iter().find(|id| id.is_cv()) {
                bail!("criterion {id} applies to Gaussian states only");
            }
            let p = Pairs::new(&pairs.0, &pairs.1);
            ids.iter()
                .map(|&id| {
                    let v = criteria::evaluate(id, &rho, ensemble.as_ref(), p, &cfg, config.weights())?;
                    Ok(VerdictRecord::new(v.reslacked(slack), config))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    render_verdicts(&records, a.format)
}

pub fn validate(a: &ValidateArgs, slack: f64) -> Result<Outcome> {
    let campaign = Campaign::random(a.dims, a.n, a.seed)?;
    let options = AuditOptions {
        search: (!a.no_search).then_some((a.grid, a.refine)),
        slack,
        ..AuditOptions::default()
    };
    let report = campaign.audit(&options)?;
    let stdout = render(&report)?;
    Ok(match report.ensure_sound() {
        Ok(()) => Outcome::ok(stdout),
        Err(e) => Outcome { stdout, stderr: format!("{e}\n"), code: 1 },
    })
}

#[derive(Serialize)]
struct SearchOutput {
    criterion: CriterionId,
    grid: usize,
    refine: usize,
    seed: u64,
    #[serde(flatten)]
    result: entwit::SearchResult,
}

pub fn search(a: &SearchArgs, slack: f64) -> Result<String> {
    let sc = SearchConfig::new(a.criterion, a.grid, a.refine, a.seed)?;
    let mut result = if a.gaussian || a.criterion.is_cv() {
        let gs = if a.gaussian {
            let f: GaussianFile = io::load_json(&a.state).with_context(|| context(&a.state))?;
            f.to_gaussian()
        } else {
            match load_state(&a.state)? {
                InputState::Gaussian(f) => f.to_gaussian(),
                _ => bail!("criterion {} needs a Gaussian state", a.criterion),
            }
        }
        .with_context(|| context(&a.state))?;
        if !a.criterion.is_cv() {
            bail!("criterion {} does not apply to Gaussian states", a.criterion);
        }
        optimize_cv(&gs, &sc)?
    } else {
        let (rho, _) = discrete_state(&load_state(&a.state)?, &a.state)?;
        let pairs = match &a.observables {
            Some(path) => load_observables(path)?,
            None => (ObservablePair::spin_xy(rho.dims().0)?, ObservablePair::spin_xy(rho.dims().1)?),
        };
        check_pairs_match(&pairs, rho.dims())?;
        optimize_violation(&rho, Pairs::new(&pairs.0, &pairs.1), &sc)?
    };
    result.verdict = result.verdict.reslacked(slack);
    match a.format {
        Format::Json => render(&SearchOutput { criterion: a.criterion, grid: a.grid, refine: a.refine, seed: a.seed, result }),
        Format::Csv => {
            let config = match &result.best_config {
                BestConfig::Discrete(c) => ConfigFile::from(c),
                BestConfig::Cv(c) => ConfigFile::from(c),
            };
            Ok(io::verdicts_to_csv(&[VerdictRecord::new(result.verdict, config)]))
        }
    }
}

/// Columns of the boundary CSV without a state context.
pub const BOUNDARY_COLUMNS: &str = "variance_u,variance_v,tangent_alpha_over_beta";
/// Extra columns when a state context is supplied.
pub const BOUNDARY_CONTEXT_COLUMNS: &str = "sum_line_v,prl02_v";

#[derive(Serialize)]
struct BoundaryRow {
    variance_u: f64,
    variance_v: f64,
    tangent_alpha_over_beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    sum_line_v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    prl02_v: Option<f64>,
}

#[derive(Serialize)]
struct BoundaryContext {
    otilde_measurable: f64,
    prl02_bound: f64,
    state_variance_u: f64,
    state_variance_v: f64,
}

#[derive(Serialize)]
struct BoundaryOutput {
    otilde: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    context: Option<BoundaryContext>,
    points: Vec<BoundaryRow>,
}

pub fn boundary(a: &BoundaryArgs) -> Result<String> {
    let ctx = match &a.state {
        None => None,
        Some(state_path) => {
            let (rho, _) = discrete_state(&load_state(state_path)?, state_path)?;
            let pairs = load_observables(a.observables.as_deref().expect("required by clap"))?;
            check_pairs_match(&pairs, rho.dims())?;
            let config_path = a.config.as_deref().expect("required by clap");
            let cfg = load_config(config_path)?.criterion_config().with_context(|| context(config_path))?;
            let m = StateMoments::new(&rho, Pairs::new(&pairs.0, &pairs.1))?;
            Some(BoundaryContext {
                otilde_measurable: m.otilde_measurable(&cfg).otilde,
                prl02_bound: m.evaluate(CriterionId::Prl02Product, &cfg)?.bound,
                state_variance_u: m.variance_u(&cfg),
                state_variance_v: m.variance_v(&cfg),
            })
        }
    };
    let otilde = match (a.otilde, &ctx) {
        (Some(x), _) => x,
        (None, Some(c)) => c.otilde_measurable,
        (None, None) => bail!("--otilde is required without a state context"),
    };
    let points = boundary_envelope(otilde, a.points, a.range)?
        .into_iter()
        .map(|p| BoundaryRow {
            variance_u: p.variance_u,
            variance_v: p.variance_v,
            tangent_alpha_over_beta: p.tangent_alpha_over_beta,
            sum_line_v: ctx.as_ref().map(|_| 2.0 * otilde - p.variance_u),
            prl02_v: ctx.as_ref().map(|c| c.prl02_bound / p.variance_u),
        })
        .collect::<Vec<_>>();

    match a.format {
        Format::Json => render(&BoundaryOutput { otilde, context: ctx, points }),
        Format::Csv => {
            let mut out = String::from(BOUNDARY_COLUMNS);
            if ctx.is_some() {
                out.push(',');
                out.push_str(BOUNDARY_CONTEXT_COLUMNS);
            }
            out.push('\n');
            for r in &points {
                let _ = write!(
                    out,
                    "{},{},{}",
                    fmt_f64(r.variance_u),
                    fmt_f64(r.variance_v),
                    fmt_f64(r.tangent_alpha_over_beta)
                );
                if let (Some(s), Some(p)) = (r.sum_line_v, r.prl02_v) {
                    let _ = write!(out, ",{},{}", fmt_f64(s), fmt_f64(p));
                }
                out.push('\n');
            }
            Ok(out)
        }
    }
}
