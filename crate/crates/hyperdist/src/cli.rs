//! The `hyperdist` batch CLI.
//!
//! Every subcommand reads its inputs from flags (inline JSON, `@name`
//! session references, or small shorthands), runs one computation, and
//! prints a single JSON document to stdout. Exit codes: 0 on success,
//! 1 on a domain error (reported as `{"error": {...}}` JSON), 2 on a
//! usage error (reported on stderr).

use crate::json::{
    terms_of, ExprJson, SchemaError, TargetJson, TermJson, TestFnJson, VerdictJson,
};
use crate::parse::parse_scalar;
use crate::session::{lookup_functional, resolve_expr, resolve_testfn, Session};
use clap::{CommandFactory, Parser, Subcommand};
use hyperdist_core::continuity::{self, MonadProbeSet, ShadowError};
use hyperdist_core::expr::make_dirac_with;
use hyperdist_core::functional::{EquivalenceVerdict, FunctionalError};
use hyperdist_core::legendre::{match_functionals, MatchError};
use hyperdist_core::pairing::{
    self, MembershipVerdict, MembershipWitness, PairingError, PairingForm, PairingResult,
    PairingStatus,
};
use hyperdist_core::quad::{QuadRule, QuadratureConfig};
use hyperdist_core::testfn::default_corpus;
use hyperdist_core::{
    ExponentQ, GenFunctional, HyperReal, MatchConfig, NumClass, PairingConfig, TestFn,
    TruncationPolicy,
};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

// ---- configuration ------------------------------------------------------

/// Tool-wide numeric settings, layered as defaults → `--config` file →
/// individual override flags.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolConfig {
    /// Largest retained ε-exponent, as text (`"6"`, `"13/2"`).
    pub max_order: String,
    pub max_terms: usize,
    pub zero_tol: f64,
    pub quad_tol: f64,
    /// `"gk15"` or `"simpson"`.
    pub quad_rule: String,
    pub max_subdivisions: usize,
    pub n_basis: usize,
    pub cond_tol: f64,
    pub match_tol: f64,
    pub half_width: Option<f64>,
}

impl Default for ToolConfig {
    fn default() -> Self {
        ToolConfig {
            max_order: "6".into(),
            max_terms: 64,
            zero_tol: 1e-12,
            quad_tol: 1e-10,
            quad_rule: "gk15".into(),
            max_subdivisions: 2000,
            n_basis: 64,
            cond_tol: 1e-10,
            match_tol: 1e-6,
            half_width: None,
        }
    }
}

impl ToolConfig {
    pub fn policy(&self) -> Result<TruncationPolicy, CliError> {
        let max_order: ExponentQ = self
            .max_order
            .parse()
            .map_err(|e| CliError::config(format!("max_order: {e}")))?;
        Ok(TruncationPolicy {
            max_order,
            max_terms: self.max_terms,
            zero_tol: self.zero_tol,
        })
    }

    pub fn quadrature(&self) -> Result<QuadratureConfig, CliError> {
        let rule = match self.quad_rule.as_str() {
            "gk15" => QuadRule::GaussKronrod15,
            "simpson" => QuadRule::AdaptiveSimpson,
            other => {
                return Err(CliError::config(format!(
                    "quad_rule must be \"gk15\" or \"simpson\", got {other:?}"
                )))
            }
        };
        Ok(QuadratureConfig {
            abs_tol: self.quad_tol,
            max_subdivisions: self.max_subdivisions,
            rule,
        })
    }

    pub fn pairing(&self) -> Result<PairingConfig, CliError> {
        Ok(PairingConfig {
            policy: self.policy()?,
            quad: self.quadrature()?,
        })
    }

    pub fn matching(&self) -> Result<MatchConfig, CliError> {
        Ok(MatchConfig {
            n_basis: self.n_basis,
            half_width: self.half_width,
            cond_tol: self.cond_tol,
            match_tol: self.match_tol,
            quad: self.quadrature()?,
        })
    }
}

// ---- argument grammar ---------------------------------------------------

#[derive(Debug, Parser)]
#[command(
    name = "hyperdist",
    version,
    about = "Batch calculator for series-valued generalized functions"
)]
struct Cli {
    /// JSON file with `ToolConfig` overrides.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// JSON file with named expressions and test functions.
    #[arg(long, global = true, value_name = "PATH")]
    session: Option<PathBuf>,

    /// Write plottable CSV output here (pair, functional, energy, shadow,
    /// dirac-check, schwarz-diagnostic).
    #[arg(long, global = true, value_name = "PATH")]
    plot_data: Option<PathBuf>,

    /// Print the effective configuration as JSON and exit.
    #[arg(long, global = true)]
    show_config: bool,

    /// Override: largest retained ε-exponent (e.g. "6" or "13/2").
    #[arg(long, global = true, value_name = "EXP")]
    max_order: Option<String>,

    /// Override: cap on stored series terms.
    #[arg(long, global = true, value_name = "N")]
    max_terms: Option<usize>,

    /// Override: classification tolerance for tiny coefficients.
    #[arg(long, global = true, value_name = "TOL")]
    zero_tol: Option<f64>,

    /// Override: absolute quadrature tolerance.
    #[arg(long, global = true, value_name = "TOL")]
    quad_tol: Option<f64>,

    /// Override: quadrature rule.
    #[arg(long, global = true, value_name = "RULE", value_parser = ["gk15", "simpson"])]
    quad_rule: Option<String>,

    /// Override: quadrature panel budget.
    #[arg(long, global = true, value_name = "N")]
    max_subdivisions: Option<usize>,

    /// Override: number of basis polynomials for matching.
    #[arg(long, global = true, value_name = "N", alias = "N")]
    n_basis: Option<usize>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify a series scalar (zero / infinitesimal / appreciable /
    /// infinite) and print its terms.
    Classify {
        /// Scalar expression, e.g. "1/eps + 3".
        #[arg(long, alias = "expr", allow_hyphen_values = true)]
        value: String,
    },
    /// Integrate ⟨f, g⟩ for an internal function f and test function g.
    Pair {
        /// Internal function (JSON, @name, file:path, or dirac/var/bump).
        #[arg(long, alias = "fn")]
        f: String,
        /// Test function (JSON, @name, file:path, corpus:i, or bump:c,h).
        #[arg(long)]
        g: String,
    },
    /// Apply a generalized functional F[g] = (−1)^k·st⟨rep, g⁽ᵏ⁾⟩.
    Functional {
        /// Representative expression, or a @name bound to a functional.
        #[arg(long)]
        rep: String,
        /// Derivatives to apply (added to a named functional's own order).
        #[arg(long, default_value_t = 0)]
        deriv_order: usize,
        /// Test function to apply to.
        #[arg(long)]
        g: String,
    },
    /// Verify the sifting property st⟨δ, g⟩ = g(0).
    DiracCheck {
        /// Check one given test function instead of the corpus.
        #[arg(long)]
        g: Option<String>,
        /// Number of corpus functions to check (truncates the corpus).
        #[arg(long, default_value_t = 32, conflicts_with = "g")]
        count: usize,
        /// Largest acceptable |st⟨δ, g⟩ − g(0)|.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Build one internal function matching prescribed pairing values.
    LegendreMatch {
        /// Inline JSON array of {testfn, value} targets — or, together
        /// with --testfns, a comma-separated value list.
        #[arg(long, conflicts_with = "targets_file", allow_hyphen_values = true)]
        targets: Option<String>,
        /// File holding a JSON array of {testfn, value} targets.
        #[arg(long)]
        targets_file: Option<PathBuf>,
        /// File holding a JSON array of test functions; pairs with the
        /// comma-separated --targets values in order.
        #[arg(long, conflicts_with = "targets_file", requires = "targets")]
        testfns: Option<PathBuf>,
        /// Half-width of the expansion interval (default: from supports).
        #[arg(long)]
        half_width: Option<f64>,
    },
    /// Probe monad-scale continuity of f at a standard point.
    SContinuity {
        #[arg(long, alias = "fn")]
        f: String,
        /// Standard point to probe around.
        #[arg(long, allow_hyphen_values = true)]
        at: f64,
    },
    /// Structurally check internal continuity of f at a series point.
    StarContinuity {
        #[arg(long, alias = "fn")]
        f: String,
        /// Series point, e.g. "eps" or "1 + eps^2".
        #[arg(long, allow_hyphen_values = true)]
        at: String,
    },
    /// Tabulate the standard shadow of f on a grid.
    Shadow {
        #[arg(long, alias = "fn")]
        f: String,
        /// Evenly spaced grid "lo:hi:n" (point count) or "lo:hi:0.1"
        /// (step; a decimal point marks a step).
        #[arg(long, conflicts_with = "points", allow_hyphen_values = true)]
        grid: Option<String>,
        /// Explicit comma-separated sample points.
        #[arg(long, allow_hyphen_values = true)]
        points: Option<String>,
    },
    /// Test two functionals for equivalence over the corpus.
    Equiv {
        /// Representative expression or @functional name.
        #[arg(long)]
        lhs: String,
        #[arg(long, default_value_t = 0)]
        lhs_order: usize,
        /// Representative expression or @functional name.
        #[arg(long)]
        rhs: String,
        #[arg(long, default_value_t = 0)]
        rhs_order: usize,
    },
    /// Integrate the energy ⟨f, f⟩ over a window.
    Energy {
        #[arg(long, alias = "fn")]
        f: String,
        /// Window "a,b".
        #[arg(long, allow_hyphen_values = true)]
        window: String,
    },
    /// Decide admissibility of f (energies evaluate, pairings limited).
    Member {
        #[arg(long, alias = "fn")]
        f: String,
    },
    /// Seminorm-decay diagnostic for a functional on a null sequence.
    SchwarzDiagnostic {
        /// Representative expression or @functional name.
        #[arg(long)]
        rep: String,
        /// Test-function sequence: "halving:N", "shrinking:N", or a JSON
        /// array.
        #[arg(long)]
        seq: String,
    },
}

// ---- errors -------------------------------------------------------------

/// A domain failure reported as exit code 1 with an `{"error": ...}` body.
#[derive(Clone, Debug, Serialize)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn new(kind: &'static str, message: impl Into<String>) -> CliError {
        CliError {
            kind,
            message: message.into(),
        }
    }

    fn config(message: impl Into<String>) -> CliError {
        CliError::new("config", message)
    }

    fn usage(message: impl Into<String>) -> CliError {
        CliError::new("usage", message)
    }
}

impl From<SchemaError> for CliError {
    fn from(e: SchemaError) -> CliError {
        CliError::new("schema", e.to_string())
    }
}

impl From<crate::parse::ParseError> for CliError {
    fn from(e: crate::parse::ParseError) -> CliError {
        CliError::new("parse", e.to_string())
    }
}

impl From<PairingError> for CliError {
    fn from(e: PairingError) -> CliError {
        CliError::new("pairing", e.to_string())
    }
}

impl From<FunctionalError> for CliError {
    fn from(e: FunctionalError) -> CliError {
        CliError::new("functional", e.to_string())
    }
}

impl From<MatchError> for CliError {
    fn from(e: MatchError) -> CliError {
        CliError::new("match", e.to_string())
    }
}

impl From<hyperdist_core::EvalError> for CliError {
    fn from(e: hyperdist_core::EvalError) -> CliError {
        CliError::new("eval", e.to_string())
    }
}

impl From<ShadowError> for CliError {
    fn from(e: ShadowError) -> CliError {
        CliError::new("shadow", e.to_string())
    }
}

// ---- outputs ------------------------------------------------------------

#[derive(Serialize)]
struct ClassifyOut {
    class: &'static str,
    leading_exp: Option<String>,
    terms: Vec<TermJson>,
    standard_part: Option<f64>,
}

#[derive(Serialize)]
struct SeriesValueOut {
    terms: Vec<TermJson>,
    standard_part: Option<f64>,
    status: &'static str,
    form: &'static str,
    quad_error: f64,
}

#[derive(Serialize)]
struct FunctionalOut {
    deriv_order: usize,
    value: f64,
    terms: Vec<TermJson>,
    quad_error: f64,
}

#[derive(Serialize)]
struct DiracCheckRow {
    index: usize,
    expected: f64,
    got: f64,
    abs_error: f64,
}

#[derive(Serialize)]
struct DiracCheckOut {
    count: usize,
    tol: f64,
    max_abs_error: f64,
    pass: bool,
    checks: Vec<DiracCheckRow>,
}

#[derive(Serialize)]
struct DiracSingleOut {
    applied: f64,
    expected_g0: f64,
    abs_err: f64,
    tol: f64,
    pass: bool,
}

#[derive(Serialize)]
struct MatchOut {
    indices: Vec<usize>,
    coeffs: Vec<f64>,
    half_width: f64,
    condition: f64,
    residuals: Vec<f64>,
    max_residual: f64,
    monomial_coeffs: Vec<f64>,
    rep: ExprJson,
}

#[derive(Serialize)]
struct SContinuityOut {
    at: f64,
    probes: usize,
    verdict: VerdictJson,
}

#[derive(Serialize)]
struct StarContinuityOut {
    at: Vec<TermJson>,
    verdict: VerdictJson,
}

#[derive(Serialize)]
struct ShadowOut {
    max_defect: f64,
    ast: Option<ExprJson>,
    table: Vec<(f64, f64)>,
}

#[derive(Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
enum EquivOut {
    NotRefuted,
    Distinct {
        corpus_index: usize,
        lhs: f64,
        rhs: f64,
    },
}

#[derive(Serialize)]
struct EnergyOut {
    window: (f64, f64),
    #[serde(flatten)]
    value: SeriesValueOut,
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum WitnessOut {
    EnergyFailure { window: (f64, f64), reason: String },
    PairingFailure { corpus_index: usize, reason: String },
    UnlimitedPairing { corpus_index: usize },
}

#[derive(Serialize)]
struct MemberOut {
    verdict: &'static str,
    witness: Option<WitnessOut>,
    energy_limited: bool,
    energy_statuses: Vec<((f64, f64), &'static str)>,
    pairings_checked: usize,
}

#[derive(Serialize)]
struct SchwarzOut {
    verdict: &'static str,
    precondition_ok: bool,
    trend: Vec<f64>,
}

fn class_name(c: NumClass) -> &'static str {
    match c {
        NumClass::Zero => "zero",
        NumClass::NonzeroInfinitesimal => "infinitesimal",
        NumClass::Appreciable => "appreciable",
        NumClass::Infinite => "infinite",
    }
}

fn status_name(s: PairingStatus) -> &'static str {
    match s {
        PairingStatus::Limited => "limited",
        PairingStatus::Infinitesimal => "infinitesimal",
        PairingStatus::Unlimited => "unlimited",
    }
}

fn form_name(f: PairingForm) -> &'static str {
    match f {
        PairingForm::Regular => "regular",
        PairingForm::Mollified => "mollified",
        PairingForm::Sum => "sum",
    }
}

fn series_value_out(r: &PairingResult) -> SeriesValueOut {
    SeriesValueOut {
        terms: terms_of(&r.value),
        standard_part: r.value.standard_part().ok(),
        status: status_name(r.status),
        form: form_name(r.form),
        quad_error: r.quad_error,
    }
}

// ---- driver -------------------------------------------------------------

/// Everything one invocation produced, ready for a process boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Plottable side output. Columns are always `x,value,series`: `series`
/// separates multiple curves sharing the x axis (for series-valued data it
/// is the term index of the ε-expansion).
struct PlotData {
    rows: Vec<(f64, f64, usize)>,
}

impl PlotData {
    fn render(&self) -> String {
        let mut out = String::from("x,value,series\n");
        for (x, value, series) in &self.rows {
            out.push_str(&format!("{x},{value},{series}\n"));
        }
        out
    }
}

/// The ε-spectrum of a series value: one point per term, x = exponent.
fn spectrum_plot(v: &HyperReal) -> PlotData {
    PlotData {
        rows: v
            .terms()
            .iter()
            .enumerate()
            .map(|(i, (q, c))| (q.as_f64(), *c, i))
            .collect(),
    }
}

/// Run the CLI on explicit arguments (element 0 is the program name).
pub fn run(args: &[String]) -> RunOutput {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    RunOutput {
                        code: 0,
                        stdout: rendered,
                        stderr: String::new(),
                    }
                }
                _ => RunOutput {
                    code: 2,
                    stdout: String::new(),
                    stderr: rendered,
                },
            };
        }
    };
    if cli.command.is_none() && !cli.show_config {
        let help = Cli::command().render_help().to_string();
        return RunOutput {
            code: 2,
            stdout: String::new(),
            stderr: help,
        };
    }
    match drive(cli) {
        Ok(stdout) => RunOutput {
            code: 0,
            stdout,
            stderr: String::new(),
        },
        Err(e) => {
            #[derive(Serialize)]
            struct Envelope {
                error: CliError,
            }
            let body = serde_json::to_string_pretty(&Envelope { error: e })
                .expect("error envelope serializes");
            RunOutput {
                code: 1,
                stdout: body + "\n",
                stderr: String::new(),
            }
        }
    }
}

fn drive(cli: Cli) -> Result<String, CliError> {
    let session = match &cli.session {
        Some(path) => Some(Session::load(path)?),
        None => None,
    };
    let config = effective_config(&cli, session.as_ref())?;
    if cli.show_config {
        return Ok(to_pretty(&config)?);
    }
    let command = cli.command.expect("checked by the caller");
    let (body, plot) = execute(command, &config, session.as_ref())?;
    match (&cli.plot_data, plot) {
        (Some(path), Some(data)) => {
            std::fs::write(path, data.render())
                .map_err(|e| CliError::new("io", format!("cannot write {}: {e}", path.display())))?;
        }
        (Some(_), None) => {
            return Err(CliError::usage(
                "--plot-data applies to pair, functional, energy, shadow, \
                 dirac-check (corpus mode), and schwarz-diagnostic",
            ));
        }
        (None, _) => {}
    }
    Ok(body)
}

/// Precedence: defaults < session `config` block < `--config` file <
/// individual flags. A `--config` file replaces the session baseline
/// wholesale (both are complete documents once defaults are filled in).
fn effective_config(cli: &Cli, session: Option<&Session>) -> Result<ToolConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::new("io", format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<ToolConfig>(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        }
        None => session
            .and_then(|s| s.config.clone())
            .unwrap_or_default(),
    };
    if let Some(v) = &cli.max_order {
        config.max_order = v.clone();
    }
    if let Some(v) = cli.max_terms {
        config.max_terms = v;
    }
    if let Some(v) = cli.zero_tol {
        config.zero_tol = v;
    }
    if let Some(v) = cli.quad_tol {
        config.quad_tol = v;
    }
    if let Some(v) = &cli.quad_rule {
        config.quad_rule = v.clone();
    }
    if let Some(v) = cli.max_subdivisions {
        config.max_subdivisions = v;
    }
    if let Some(v) = cli.n_basis {
        config.n_basis = v;
    }
    // Validate eagerly so a bad override fails even under --show-config.
    config.policy()?;
    config.quadrature()?;
    Ok(config)
}

fn to_pretty<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::new("serialize", e.to_string()))
}

fn execute(
    command: Command,
    config: &ToolConfig,
    session: Option<&Session>,
) -> Result<(String, Option<PlotData>), CliError> {
    let policy = config.policy()?;
    match command {
        Command::Classify { value } => {
            let v = parse_scalar(&value, policy)?;
            let out = ClassifyOut {
                class: class_name(v.classify()),
                leading_exp: v.terms().first().map(|(q, _)| q.to_string()),
                terms: terms_of(&v),
                standard_part: v.standard_part().ok(),
            };
            Ok((to_pretty(&out)?, None))
        }
        Command::Pair { f, g } => {
            let f = resolve_expr(&f, session, policy)?;
            let g = resolve_testfn(&g, session)?;
            let r = pairing::pair(&f, &g, &config.pairing()?)?;
            let plot = spectrum_plot(&r.value);
            Ok((to_pretty(&series_value_out(&r))?, Some(plot)))
        }
        Command::Functional { rep, deriv_order, g } => {
            let functional = build_functional(&rep, deriv_order, session, policy)?;
            let g = resolve_testfn(&g, session)?;
            let cfg = config.pairing()?;
            let r = functional.apply_pairing(&g, &cfg)?;
            let value = r
                .value
                .standard_part()
                .map_err(|_| CliError::from(FunctionalError::UnlimitedValue))?;
            let out = FunctionalOut {
                deriv_order: functional.deriv_order,
                value,
                terms: terms_of(&r.value),
                quad_error: r.quad_error,
            };
            let plot = spectrum_plot(&r.value);
            Ok((to_pretty(&out)?, Some(plot)))
        }
        Command::DiracCheck { g, count, tol } => {
            let cfg = config.pairing()?;
            let delta = GenFunctional::new(make_dirac_with(policy));
            if let Some(spec) = g {
                let g = resolve_testfn(&spec, session)?;
                let expected_g0 = g.eval(0.0);
                let applied = delta.apply(&g, &cfg)?;
                let abs_err = (applied - expected_g0).abs();
                let out = DiracSingleOut {
                    applied,
                    expected_g0,
                    abs_err,
                    tol,
                    pass: abs_err <= tol,
                };
                return Ok((to_pretty(&out)?, None));
            }
            let corpus = default_corpus();
            let take = count.min(corpus.len());
            let mut checks = Vec::with_capacity(take);
            let mut max_abs_error: f64 = 0.0;
            for (index, g) in corpus.iter().take(take).enumerate() {
                let expected = g.eval(0.0);
                let got = delta.apply(g, &cfg)?;
                let abs_error = (got - expected).abs();
                max_abs_error = max_abs_error.max(abs_error);
                checks.push(DiracCheckRow {
                    index,
                    expected,
                    got,
                    abs_error,
                });
            }
            let out = DiracCheckOut {
                count: take,
                tol,
                max_abs_error,
                pass: max_abs_error <= tol,
                checks,
            };
            // Two curves over the corpus index: expected g(0) and applied
            // value (series 0 and 1).
            let mut rows = Vec::with_capacity(2 * out.checks.len());
            for c in &out.checks {
                rows.push((c.index as f64, c.expected, 0));
            }
            for c in &out.checks {
                rows.push((c.index as f64, c.got, 1));
            }
            Ok((to_pretty(&out)?, Some(PlotData { rows })))
        }
        Command::LegendreMatch {
            targets,
            targets_file,
            testfns,
            half_width,
        } => {
            let pairs: Vec<(TestFn, f64)> = if let Some(path) = testfns {
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    CliError::new("io", format!("cannot read {}: {e}", path.display()))
                })?;
                let fns: Vec<TestFnJson> = serde_json::from_str(&text)
                    .map_err(|e| CliError::new("schema", format!("test functions: {e}")))?;
                let values = parse_points(&targets.expect("clap requires"))?;
                if fns.len() != values.len() {
                    return Err(CliError::usage(format!(
                        "{} test functions but {} targets",
                        fns.len(),
                        values.len()
                    )));
                }
                let mut pairs = Vec::with_capacity(fns.len());
                for (j, v) in fns.iter().zip(values) {
                    pairs.push((j.to_testfn()?, v));
                }
                pairs
            } else {
                let text = match (targets, targets_file) {
                    (Some(t), None) => t,
                    (None, Some(path)) => std::fs::read_to_string(&path).map_err(|e| {
                        CliError::new("io", format!("cannot read {}: {e}", path.display()))
                    })?,
                    (None, None) => {
                        return Err(CliError::usage("provide --targets or --targets-file"))
                    }
                    (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
                };
                let parsed: Vec<TargetJson> = serde_json::from_str(&text)
                    .map_err(|e| CliError::new("schema", format!("targets: {e}")))?;
                let mut pairs = Vec::with_capacity(parsed.len());
                for t in &parsed {
                    pairs.push((t.testfn.to_testfn()?, t.value));
                }
                pairs
            };
            let mut cfg = config.matching()?;
            if half_width.is_some() {
                cfg.half_width = half_width;
            }
            let r = match_functionals(&pairs, &cfg)?;
            let max_residual = r.residuals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let out = MatchOut {
                indices: r.indices,
                coeffs: r.coeffs,
                half_width: r.half_width,
                condition: r.condition,
                residuals: r.residuals,
                max_residual,
                monomial_coeffs: r.monomial_coeffs,
                rep: ExprJson::from_expr(&r.rep),
            };
            Ok((to_pretty(&out)?, None))
        }
        Command::SContinuity { f, at } => {
            let f = resolve_expr(&f, session, policy)?;
            let probes = MonadProbeSet::for_expr(&f, policy);
            let verdict = continuity::s_continuity(&f, at, &probes)?;
            let out = SContinuityOut {
                at,
                probes: probes.offsets.len(),
                verdict: VerdictJson::from_verdict(&verdict),
            };
            Ok((to_pretty(&out)?, None))
        }
        Command::StarContinuity { f, at } => {
            let f = resolve_expr(&f, session, policy)?;
            let q = parse_scalar(&at, policy)?;
            let verdict = continuity::star_continuity(&f, &q);
            let out = StarContinuityOut {
                at: terms_of(&q),
                verdict: VerdictJson::from_verdict(&verdict),
            };
            Ok((to_pretty(&out)?, None))
        }
        Command::Shadow { f, grid, points } => {
            let f = resolve_expr(&f, session, policy)?;
            let xs = match (grid, points) {
                (Some(spec), None) => parse_grid(&spec)?,
                (None, Some(csv)) => parse_points(&csv)?,
                (None, None) => return Err(CliError::usage("provide --grid or --points")),
                (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
            };
            let probes = MonadProbeSet::for_expr(&f, policy);
            let report = continuity::shadow(&f, &xs, &probes)?;
            let out = ShadowOut {
                max_defect: report.max_defect,
                ast: report.ast.as_ref().map(ExprJson::from_expr),
                table: report.table.clone(),
            };
            let plot = PlotData {
                rows: report.table.iter().map(|(x, y)| (*x, *y, 0)).collect(),
            };
            Ok((to_pretty(&out)?, Some(plot)))
        }
        Command::Equiv {
            lhs,
            lhs_order,
            rhs,
            rhs_order,
        } => {
            let lhs = build_functional(&lhs, lhs_order, session, policy)?;
            let rhs = build_functional(&rhs, rhs_order, session, policy)?;
            let cfg = config.pairing()?;
            let out = match lhs.equivalent(&rhs, &cfg)? {
                EquivalenceVerdict::NotRefuted => EquivOut::NotRefuted,
                EquivalenceVerdict::Distinct {
                    corpus_index,
                    lhs,
                    rhs,
                } => EquivOut::Distinct {
                    corpus_index,
                    lhs,
                    rhs,
                },
            };
            Ok((to_pretty(&out)?, None))
        }
        Command::Energy { f, window } => {
            let f = resolve_expr(&f, session, policy)?;
            let (a, b) = parse_window(&window)?;
            let r = pairing::energy(&f, a, b, &config.pairing()?)?;
            let out = EnergyOut {
                window: (a, b),
                value: series_value_out(&r),
            };
            let plot = spectrum_plot(&r.value);
            Ok((to_pretty(&out)?, Some(plot)))
        }
        Command::Member { f } => {
            let f = resolve_expr(&f, session, policy)?;
            let report = pairing::member_t(&f, &config.pairing()?);
            let out = MemberOut {
                verdict: match report.verdict {
                    MembershipVerdict::Admitted => "admitted",
                    MembershipVerdict::Rejected => "rejected",
                },
                witness: report.witness.as_ref().map(|w| match w {
                    MembershipWitness::EnergyFailure { window, reason } => {
                        WitnessOut::EnergyFailure {
                            window: *window,
                            reason: (*reason).into(),
                        }
                    }
                    MembershipWitness::PairingFailure {
                        corpus_index,
                        reason,
                    } => WitnessOut::PairingFailure {
                        corpus_index: *corpus_index,
                        reason: (*reason).into(),
                    },
                    MembershipWitness::UnlimitedPairing { corpus_index } => {
                        WitnessOut::UnlimitedPairing {
                            corpus_index: *corpus_index,
                        }
                    }
                }),
                energy_limited: report.energy_limited,
                energy_statuses: report
                    .energy_statuses
                    .iter()
                    .map(|(w, s)| (*w, status_name(*s)))
                    .collect(),
                pairings_checked: report.pairings_checked,
            };
            Ok((to_pretty(&out)?, None))
        }
        Command::SchwarzDiagnostic { rep, seq } => {
            let functional = build_functional(&rep, 0, session, policy)?;
            let seq = parse_seq(&seq)?;
            let cfg = config.pairing()?;
            let d = functional.schwarz_class_diagnostic(&seq, &cfg)?;
            let out = SchwarzOut {
                verdict: match d.verdict {
                    hyperdist_core::functional::DiagnosticVerdict::Consistent => "consistent",
                    hyperdist_core::functional::DiagnosticVerdict::Inconsistent => "inconsistent",
                },
                precondition_ok: d.precondition_ok,
                trend: d.trend.clone(),
            };
            let plot = PlotData {
                rows: d
                    .trend
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (i as f64, *v, 0))
                    .collect(),
            };
            Ok((to_pretty(&out)?, Some(plot)))
        }
    }
}

/// Build a functional from either an `@name` session reference or a
/// representative expression, then apply `order` further derivatives.
fn build_functional(
    rep: &str,
    order: usize,
    session: Option<&Session>,
    policy: TruncationPolicy,
) -> Result<GenFunctional, CliError> {
    let mut f = match lookup_functional(rep, session, policy)? {
        Some(f) => f,
        None => GenFunctional::new(resolve_expr(rep, session, policy)?),
    };
    for _ in 0..order {
        f = f.derivative()?;
    }
    Ok(f)
}

/// `lo:hi:5` → five evenly spaced points; `lo:hi:0.5` (decimal point) →
/// points every 0.5 from `lo` up to `hi`.
fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, third] = parts.as_slice() else {
        return Err(CliError::usage(format!("grid must be \"lo:hi:n\", got {spec:?}")));
    };
    let lo: f64 = lo
        .parse()
        .map_err(|_| CliError::usage(format!("bad grid endpoint {lo:?}")))?;
    let hi: f64 = hi
        .parse()
        .map_err(|_| CliError::usage(format!("bad grid endpoint {hi:?}")))?;
    if !lo.is_finite() || !hi.is_finite() || hi <= lo {
        return Err(CliError::usage("grid needs lo < hi"));
    }
    const MAX_POINTS: usize = 100_000;
    if third.contains('.') {
        let step: f64 = third
            .parse()
            .map_err(|_| CliError::usage(format!("bad grid step {third:?}")))?;
        if !(step.is_finite() && step > 0.0) {
            return Err(CliError::usage("grid step must be positive"));
        }
        let count = ((hi - lo) / step).floor() as usize;
        if count + 1 > MAX_POINTS {
            return Err(CliError::usage("grid has too many points"));
        }
        let mut xs: Vec<f64> = (0..=count).map(|i| lo + step * i as f64).collect();
        // Keep the far endpoint when the step divides the span (up to
        // roundoff) but the accumulated last point fell just short of it.
        if let Some(last) = xs.last_mut() {
            if (*last - hi).abs() <= step * 1e-9 {
                *last = hi;
            }
        }
        return Ok(xs);
    }
    let n: usize = third
        .parse()
        .map_err(|_| CliError::usage(format!("bad grid count {third:?}")))?;
    if n < 2 || n > MAX_POINTS {
        return Err(CliError::usage("grid needs 2 ≤ n ≤ 100000 points"));
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|i| lo + step * i as f64).collect())
}

fn parse_points(csv: &str) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for part in csv.split(',') {
        let x: f64 = part
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("bad sample point {part:?}")))?;
        out.push(x);
    }
    if out.is_empty() {
        return Err(CliError::usage("need at least one sample point"));
    }
    Ok(out)
}

fn parse_window(spec: &str) -> Result<(f64, f64), CliError> {
    let parts: Vec<&str> = spec.split(',').collect();
    let [a, b] = parts.as_slice() else {
        return Err(CliError::usage(format!("window must be \"a,b\", got {spec:?}")));
    };
    let a: f64 = a
        .trim()
        .parse()
        .map_err(|_| CliError::usage(format!("bad window endpoint {a:?}")))?;
    let b: f64 = b
        .trim()
        .parse()
        .map_err(|_| CliError::usage(format!("bad window endpoint {b:?}")))?;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(CliError::usage("window needs a < b"));
    }
    Ok((a, b))
}

/// Built-in sequences: `halving:N` halves the *amplitude* of a fixed bump
/// (a genuine null sequence); `shrinking:N` halves the *width* instead,
/// which is not null (its sup norm never decays) and exists to demonstrate
/// the precondition check. Anything else is a JSON array of test functions.
fn parse_seq(spec: &str) -> Result<Vec<TestFn>, CliError> {
    let count = |text: &str| -> Result<usize, CliError> {
        let n: usize = text
            .parse()
            .map_err(|_| CliError::usage(format!("bad sequence length {text:?}")))?;
        if n == 0 {
            return Err(CliError::usage("sequence length must be positive"));
        }
        Ok(n)
    };
    if let Some(n) = spec.strip_prefix("halving:") {
        let n = count(n)?;
        return Ok((0..n)
            .map(|i| {
                TestFn::lin_comb(vec![(2.0f64.powi(-(i as i32)), TestFn::bump(0.0, 1.0))])
            })
            .collect());
    }
    if let Some(n) = spec.strip_prefix("shrinking:") {
        let n = count(n)?;
        return Ok((0..n)
            .map(|i| TestFn::bump(0.0, 2.0f64.powi(-(i as i32))))
            .collect());
    }
    let parsed: Vec<crate::json::TestFnJson> = serde_json::from_str(spec)
        .map_err(|e| CliError::new("schema", format!("sequence: {e}")))?;
    let mut out = Vec::with_capacity(parsed.len());
    for t in &parsed {
        out.push(t.to_testfn()?);
    }
    Ok(out)
}
