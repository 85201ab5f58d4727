//! Deterministic run/report layer.
//!
//! A run samples a scenario's chart box with the low-discrepancy sequence,
//! computes every identity audit under both sign conventions, selects the
//! working convention (unless forced), verifies the requested bounds at
//! every sample point, and serializes everything with stable bytes: two
//! runs with the same configuration produce identical output files.

use std::fmt::Write as _;

use crate::error::GeomError;
use crate::frame::FrameOptions;
use crate::hineva;
use crate::inequality::{self, EqualityDiagnosis, InequalityVerdict, SpaceForm};
use crate::manifold::{ChartManifold, SignConvention};
use crate::map::{self, RiemannianMap};
use crate::sample;
use crate::scenario::{self, Geometry, Scenario, SpaceFormTags, ALL_THEOREMS};
use crate::submersion::{self, RiemannianSubmersion, SubmersionPointData};
use crate::tol;

/// Sign-convention request: fixed, or selected by the identity audits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConventionChoice {
    Auto,
    Modern,
    ONeill,
}

impl ConventionChoice {
    pub fn parse(text: &str) -> Result<Self, GeomError> {
        match text {
            "auto" => Ok(Self::Auto),
            "modern" => Ok(Self::Modern),
            "oneill" => Ok(Self::ONeill),
            other => Err(GeomError::Config {
                detail: format!("convention must be auto, modern, or oneill, got `{other}`"),
            }),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Auto => "auto",
            Self::Modern => "modern",
            Self::ONeill => "oneill",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

impl OutputFormat {
    pub fn parse(text: &str) -> Result<Self, GeomError> {
        match text {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(GeomError::Config {
                detail: format!("format must be json or csv, got `{other}`"),
            }),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Json => "json",
            Self::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Built-in scenario name (optionally parameterized) or scenario file
    /// path.
    pub scenario: String,
    /// Explicit theorem tokens; `None` means everything applicable.
    pub theorems: Option<Vec<String>>,
    pub samples: usize,
    pub seed: u64,
    /// A bound fails when its slack drops below −tol_slack.
    pub tol_slack: f64,
    /// A gating identity audit fails above this residual.
    pub tol_identity: f64,
    /// Verdicts within this relative tolerance of zero slack report
    /// equality.
    pub tol_equality: f64,
    pub convention: ConventionChoice,
    pub format: OutputFormat,
    pub out: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: "warped-s3".to_string(),
            theorems: None,
            samples: 25,
            seed: 0,
            tol_slack: tol::DEFAULT_TOL_SLACK,
            tol_identity: tol::DEFAULT_TOL_IDENTITY,
            tol_equality: tol::DEFAULT_TOL_EQUALITY,
            convention: ConventionChoice::Auto,
            format: OutputFormat::Json,
            out: None,
        }
    }
}

/// One identity audit, maxed over the sample points, under both sign
/// conventions.
#[derive(Debug, Clone)]
pub struct AuditRow {
    pub name: &'static str,
    pub residual_modern: f64,
    pub residual_oneill: f64,
    /// Whether the two sides of the identity were computed through
    /// independent routes (e.g. intrinsic fiber charts).
    pub independent: bool,
    /// Whether the audit participates in the exit-code gate.
    pub gates: bool,
}

/// One verdict row; the CSV columns are a projection of this.
#[derive(Debug, Clone)]
pub struct VerdictRecord {
    pub point_index: usize,
    pub theorem: String,
    pub point: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub equality: bool,
    pub convention: &'static str,
    pub closed_form_residual: Option<f64>,
    pub fiber_independent: Option<bool>,
    pub diagnosis: Option<EqualityDiagnosis>,
}

#[derive(Debug, Clone)]
pub struct Summary {
    pub verdict_count: usize,
    pub violation_count: usize,
    pub equality_count: usize,
    pub min_slack: f64,
    /// Worst slack per theorem label, sorted by label.
    pub min_slack_by_theorem: Vec<(String, f64)>,
    pub worst_gating_residual: f64,
    pub selected_convention: &'static str,
    pub exit_code: i32,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub config: RunConfig,
    pub identity_audits: Vec<AuditRow>,
    pub verdicts: Vec<VerdictRecord>,
    pub summary: Summary,
}

/// An aborted run, naming the operation and (for pointwise failures) the
/// sample point.
#[derive(Debug)]
pub struct RunError {
    pub operation: String,
    pub point_index: Option<usize>,
    pub point: Option<Vec<f64>>,
    pub source: GeomError,
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (&self.point_index, &self.point) {
            (Some(idx), Some(p)) => write!(
                f,
                "while {} at sample point {idx} {p:?}: {}",
                self.operation, self.source
            ),
            _ => write!(f, "while {}: {}", self.operation, self.source),
        }
    }
}

impl std::error::Error for RunError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Process exit code for an aborted run: configuration and scenario
/// problems are 3, hard numeric failures at a sample point are 4.
pub fn exit_code_for_error(e: &RunError) -> i32 {
    if e.point.is_some() {
        4
    } else {
        3
    }
}

fn config_error(operation: &str) -> impl Fn(GeomError) -> RunError + '_ {
    move |source| RunError {
        operation: operation.to_string(),
        point_index: None,
        point: None,
        source,
    }
}

fn point_error<'a>(
    operation: &'a str,
    idx: usize,
    p: &'a [f64],
) -> impl Fn(GeomError) -> RunError + 'a {
    move |source| RunError {
        operation: operation.to_string(),
        point_index: Some(idx),
        point: Some(p.to_vec()),
        source,
    }
}

fn convention_label(c: SignConvention) -> &'static str {
    match c {
        SignConvention::Modern => "modern",
        SignConvention::ONeill => "oneill",
    }
}

fn validate_config(config: &RunConfig) -> Result<(), RunError> {
    let fail = |detail: String| RunError {
        operation: "validating the run configuration".to_string(),
        point_index: None,
        point: None,
        source: GeomError::Config { detail },
    };
    if config.samples < 1 {
        return Err(fail("samples must be at least 1".to_string()));
    }
    for (name, v) in [
        ("tol-slack", config.tol_slack),
        ("tol-identity", config.tol_identity),
        ("tol-equality", config.tol_equality),
    ] {
        if !(v > 0.0) {
            return Err(fail(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(())
}

/// Expand the theorem request: explicit tokens are validated strictly
/// against the scenario, `None` means every applicable theorem. Audits
/// always run; `hineva-fuzz` adds the algebraic fuzz rows.
fn resolve_theorems(
    config: &RunConfig,
    scenario: &Scenario,
) -> Result<(Vec<&'static str>, bool), RunError> {
    let applicable = scenario.applicable_theorems();
    let Some(list) = &config.theorems else {
        return Ok((applicable, false));
    };
    let fail = |detail: String| RunError {
        operation: "resolving the theorem list".to_string(),
        point_index: None,
        point: None,
        source: GeomError::Config { detail },
    };
    let mut include_fuzz = false;
    let mut chosen: Vec<&'static str> = Vec::new();
    for token in list {
        match token.as_str() {
            "audits" => {}
            "hineva-fuzz" => include_fuzz = true,
            other => {
                let canon = ALL_THEOREMS
                    .iter()
                    .find(|&&t| t == other)
                    .copied()
                    .ok_or_else(|| {
                        fail(format!(
                            "unknown theorem token `{other}`; valid: {}, audits, hineva-fuzz",
                            ALL_THEOREMS.join(", ")
                        ))
                    })?;
                if !applicable.contains(&canon) {
                    return Err(fail(format!(
                        "theorem {canon} does not apply to scenario `{}`; applicable: [{}]",
                        scenario.name,
                        applicable.join(", ")
                    )));
                }
                if !chosen.contains(&canon) {
                    chosen.push(canon);
                }
            }
        }
    }
    let ordered = ALL_THEOREMS.iter().filter(|t| chosen.contains(t)).copied().collect();
    Ok((ordered, include_fuzz))
}

/// Accumulates one audit over sample points under both conventions.
struct AuditAcc {
    name: &'static str,
    modern: f64,
    oneill: f64,
    independent: bool,
    gates: bool,
    seen: bool,
}

impl AuditAcc {
    fn new(name: &'static str, gates: bool) -> Self {
        Self { name, modern: 0.0, oneill: 0.0, independent: true, gates, seen: false }
    }

    fn push(&mut self, modern: f64, oneill: f64, independent: bool) {
        self.modern = self.modern.max(modern);
        self.oneill = self.oneill.max(oneill);
        self.independent &= independent;
        self.seen = true;
    }

    fn row(self) -> Option<AuditRow> {
        self.seen.then_some(AuditRow {
            name: self.name,
            residual_modern: self.modern,
            residual_oneill: self.oneill,
            independent: self.independent,
            gates: self.gates,
        })
    }
}

/// Space-form, Hermitian, and Kähler audits for a chart (used for the
/// domain of a submersion, the target of a map, and bare manifolds).
/// A declared curvature is a geometric fact — under the classical sign
/// convention both the tensor and the model flip sign together — so these
/// residuals are convention-independent and fill both columns.
fn chart_audits(
    chart: &ChartManifold,
    forms: &SpaceFormTags,
    points: &[Vec<f64>],
    operation: &str,
) -> Result<Vec<AuditRow>, RunError> {
    let mut rows = Vec::new();
    if let Some(c) = forms.real_c {
        let residual = chart
            .validate_real_space_form(c, points)
            .map_err(config_error(operation))?;
        rows.push(AuditRow {
            name: "space_form_real",
            residual_modern: residual,
            residual_oneill: residual,
            independent: true,
            gates: true,
        });
    }
    if let Some(c) = forms.complex_c {
        let residual = chart
            .validate_complex_space_form(c, points)
            .map_err(config_error(operation))?;
        rows.push(AuditRow {
            name: "space_form_complex",
            residual_modern: residual,
            residual_oneill: residual,
            independent: true,
            gates: true,
        });
    }
    if chart.complex_structure().is_some() {
        let gates = forms.complex_c.is_some();
        let mut hermitian = 0.0_f64;
        for p in points {
            hermitian =
                hermitian.max(chart.hermitian_residual_at(p).map_err(config_error(operation))?);
        }
        rows.push(AuditRow {
            name: "hermitian",
            residual_modern: hermitian,
            residual_oneill: hermitian,
            independent: true,
            gates,
        });
        let kaehler = chart.kaehler_audit(points).map_err(config_error(operation))?;
        rows.push(AuditRow {
            name: "kaehler",
            residual_modern: kaehler,
            residual_oneill: kaehler,
            independent: true,
            gates,
        });
    }
    Ok(rows)
}

fn record_from(verdict: InequalityVerdict, point_index: usize) -> VerdictRecord {
    VerdictRecord {
        point_index,
        theorem: verdict.theorem.to_string(),
        point: verdict.point,
        lhs: verdict.lhs,
        rhs: verdict.rhs,
        slack: verdict.slack,
        equality: verdict.equality,
        convention: convention_label(verdict.convention),
        closed_form_residual: verdict.closed_form_residual,
        fiber_independent: Some(verdict.fiber_independent),
        diagnosis: verdict.diagnosis,
    }
}

fn pick_convention(
    requested: ConventionChoice,
    selector: Option<&AuditAcc>,
    tie_break: SignConvention,
) -> SignConvention {
    match requested {
        ConventionChoice::Modern => SignConvention::Modern,
        ConventionChoice::ONeill => SignConvention::ONeill,
        ConventionChoice::Auto => match selector {
            Some(acc) if acc.seen => match tie_break {
                // Strict comparison implements the tie-break.
                SignConvention::ONeill => {
                    if acc.modern < acc.oneill {
                        SignConvention::Modern
                    } else {
                        SignConvention::ONeill
                    }
                }
                SignConvention::Modern => {
                    if acc.oneill < acc.modern {
                        SignConvention::ONeill
                    } else {
                        SignConvention::Modern
                    }
                }
            },
            _ => tie_break,
        },
    }
}

fn run_submersion(
    sub: &RiemannianSubmersion,
    scenario: &Scenario,
    config: &RunConfig,
    theorems: &[&'static str],
    points: &[Vec<f64>],
) -> Result<(Vec<AuditRow>, Vec<VerdictRecord>, SignConvention), RunError> {
    if theorems.contains(&"t54") && sub.domain().complex_structure().is_none() {
        return Err(config_error("resolving the theorem list")(
            GeomError::MissingComplexStructure,
        ));
    }

    let options = FrameOptions::default();
    let mut datas: Vec<SubmersionPointData> = Vec::with_capacity(points.len());
    for (idx, p) in points.iter().enumerate() {
        datas.push(
            sub.evaluate_point(p, &options)
                .map_err(point_error("evaluating submersion data", idx, p))?,
        );
    }

    let mut fiber_gauss = AuditAcc::new("fiber_gauss", true);
    let mut horizontal_gauss = AuditAcc::new("horizontal_gauss", true);
    let mut mixed_gauss = AuditAcc::new("mixed_gauss", false);
    let mut vertical_split = AuditAcc::new("vertical_ricci_split", true);
    let mut scalar_dec = AuditAcc::new("scalar_decomposition", true);
    let mut trace_split = AuditAcc::new("trace_split_identity", true);
    let mut t_norms = AuditAcc::new("t_norm_consistency", true);
    let mut a_norms = AuditAcc::new("a_norm_consistency", true);
    let mut isometry = AuditAcc::new("isometry", true);

    for d in &datas {
        let independent = d.fiber_curvature_modern.is_some();
        if let (Some(m), Some(o)) = (
            submersion::audit_fiber_gauss(d, SignConvention::Modern),
            submersion::audit_fiber_gauss(d, SignConvention::ONeill),
        ) {
            fiber_gauss.push(m, o, true);
        }
        horizontal_gauss.push(
            submersion::audit_horizontal_gauss(d, SignConvention::Modern),
            submersion::audit_horizontal_gauss(d, SignConvention::ONeill),
            true,
        );
        mixed_gauss.push(
            submersion::audit_mixed_gauss(d, SignConvention::Modern),
            submersion::audit_mixed_gauss(d, SignConvention::ONeill),
            true,
        );
        if let (Some(m), Some(o)) = (
            submersion::audit_vertical_ricci_split(d, SignConvention::Modern),
            submersion::audit_vertical_ricci_split(d, SignConvention::ONeill),
        ) {
            vertical_split.push(m, o, true);
        }
        scalar_dec.push(
            submersion::audit_scalar_decomposition(d, SignConvention::Modern),
            submersion::audit_scalar_decomposition(d, SignConvention::ONeill),
            independent,
        );
        let ts = submersion::trace_split_residual(&d.oneill.t);
        trace_split.push(ts, ts, true);
        let tn = (d.oneill.norm_t_sq - d.oneill.norm_t_mixed_sq).abs();
        t_norms.push(tn, tn, true);
        let an = (d.oneill.norm_a_sq - d.oneill.norm_a_mixed_sq).abs();
        a_norms.push(an, an, true);
        isometry.push(d.isometry_residual, d.isometry_residual, true);
    }

    let selected = pick_convention(
        config.convention,
        Some(if fiber_gauss.seen { &fiber_gauss } else { &horizontal_gauss }),
        SignConvention::ONeill,
    );

    let mut audits: Vec<AuditRow> = [
        fiber_gauss,
        horizontal_gauss,
        mixed_gauss,
        vertical_split,
        scalar_dec,
        trace_split,
        t_norms,
        a_norms,
        isometry,
    ]
    .into_iter()
    .filter_map(AuditAcc::row)
    .collect();
    audits.extend(chart_audits(
        sub.domain(),
        &scenario.domain_forms,
        points,
        "validating the declared space form",
    )?);

    let mut verdicts = Vec::new();
    for (idx, d) in datas.iter().enumerate() {
        let p = &points[idx];
        for &theorem in theorems {
            match theorem {
                "t31" => {
                    let v = inequality::verify_t31(d, selected, config.tol_equality)
                        .map_err(point_error("verifying the vertical Ricci bound", idx, p))?;
                    verdicts.push(record_from(v, idx));
                }
                "t41" => {
                    let v = inequality::verify_t41(d, selected, config.tol_equality)
                        .map_err(point_error("verifying the combined Ricci bound", idx, p))?;
                    verdicts.push(record_from(v, idx));
                }
                "t53" => {
                    let c = scenario.domain_forms.real_c.expect("t53 requires a real tag");
                    let (v, hv) = inequality::verify_space_form_bounds(
                        d,
                        SpaceForm::Real { c },
                        None,
                        selected,
                        config.tol_equality,
                    )
                    .map_err(point_error("verifying the real space-form bounds", idx, p))?;
                    verdicts.push(record_from(v, idx));
                    verdicts.push(record_from(hv, idx));
                }
                "t54" => {
                    let c = scenario.domain_forms.complex_c.expect("t54 requires a complex tag");
                    let jmat = sub
                        .domain()
                        .complex_structure()
                        .expect("validated above")
                        .clone();
                    let norms = inequality::complex_norms(d, &jmat)
                        .map_err(point_error("splitting the frame holomorphically", idx, p))?;
                    let (v, hv) = inequality::verify_space_form_bounds(
                        d,
                        SpaceForm::Complex { c },
                        Some(&norms),
                        selected,
                        config.tol_equality,
                    )
                    .map_err(point_error("verifying the complex space-form bounds", idx, p))?;
                    verdicts.push(record_from(v, idx));
                    verdicts.push(record_from(hv, idx));
                }
                other => unreachable!("submersion scenarios never select {other}"),
            }
        }
    }
    Ok((audits, verdicts, selected))
}

fn run_map(
    rmap: &RiemannianMap,
    scenario: &Scenario,
    config: &RunConfig,
    theorems: &[&'static str],
    points: &[Vec<f64>],
) -> Result<(Vec<AuditRow>, Vec<VerdictRecord>, SignConvention), RunError> {
    if theorems.contains(&"t66") && rmap.target().complex_structure().is_none() {
        return Err(config_error("resolving the theorem list")(
            GeomError::MissingComplexStructure,
        ));
    }

    let seeds = scenario.horizontal_seeds.as_deref();
    let mut datas = Vec::with_capacity(points.len());
    for (idx, p) in points.iter().enumerate() {
        datas.push(
            rmap.evaluate_point(p, seeds)
                .map_err(point_error("evaluating map data", idx, p))?,
        );
    }

    let mut isometry = AuditAcc::new("isometry", true);
    let mut map_gauss = AuditAcc::new("map_gauss", true);
    let mut ricci_split = AuditAcc::new("horizontal_ricci_split", true);
    let mut containment = AuditAcc::new("range_containment", true);
    let mut b_symmetry = AuditAcc::new("b_symmetry", true);
    for d in &datas {
        isometry.push(d.isometry_residual, d.isometry_residual, true);
        map_gauss.push(
            map::audit_map_gauss(d, SignConvention::Modern),
            map::audit_map_gauss(d, SignConvention::ONeill),
            true,
        );
        ricci_split.push(
            map::audit_horizontal_ricci_split(d, SignConvention::Modern),
            map::audit_horizontal_ricci_split(d, SignConvention::ONeill),
            true,
        );
        containment.push(d.range_containment_residual, d.range_containment_residual, true);
        b_symmetry.push(d.b_symmetry_residual, d.b_symmetry_residual, true);
    }

    let selected = pick_convention(config.convention, Some(&map_gauss), SignConvention::Modern);

    let mut audits: Vec<AuditRow> =
        [isometry, map_gauss, ricci_split, containment, b_symmetry]
            .into_iter()
            .filter_map(AuditAcc::row)
            .collect();
    let images: Vec<Vec<f64>> = datas.iter().map(|d| d.image.clone()).collect();
    audits.extend(chart_audits(
        rmap.target(),
        &scenario.target_forms,
        &images,
        "validating the declared target space form",
    )?);

    let mut verdicts = Vec::new();
    for (idx, d) in datas.iter().enumerate() {
        let p = &points[idx];
        for &theorem in theorems {
            let verdict = match theorem {
                "t62" => map::verify_t62(d, selected, config.tol_equality)
                    .map_err(point_error("verifying the horizontal Ricci bound", idx, p))?,
                "t65" => {
                    let c = scenario.target_forms.real_c.expect("t65 requires a real tag");
                    map::verify_t65(d, c, selected, config.tol_equality).map_err(point_error(
                        "verifying the real-target bound",
                        idx,
                        p,
                    ))?
                }
                "t66" => {
                    let c = scenario.target_forms.complex_c.expect("t66 requires a complex tag");
                    let jmat = rmap.target().complex_structure().expect("validated above").clone();
                    map::verify_t66(d, &jmat, c, selected, config.tol_equality).map_err(
                        point_error("verifying the complex-target bound", idx, p),
                    )?
                }
                other => unreachable!("map scenarios never select {other}"),
            };
            verdicts.push(record_from(verdict, idx));
        }
    }
    Ok((audits, verdicts, selected))
}

fn run_manifold_only(
    chart: &ChartManifold,
    scenario: &Scenario,
    points: &[Vec<f64>],
) -> Result<(Vec<AuditRow>, Vec<VerdictRecord>, SignConvention), RunError> {
    let audits = chart_audits(
        chart,
        &scenario.domain_forms,
        points,
        "validating the declared space form",
    )?;
    Ok((audits, Vec::new(), SignConvention::Modern))
}

/// Algebraic fuzz of the trace bound: one row per matrix size, carrying the
/// worst slack over 10⁴ random symmetric matrices.
fn hineva_fuzz_rows(seed: u64) -> Result<Vec<VerdictRecord>, RunError> {
    (2..=8)
        .map(|n| {
            let min_slack = hineva::oracle_min_slack(
                n,
                10_000,
                seed.wrapping_mul(0x9e3779b9).wrapping_add(n as u64),
            )
            .map_err(config_error("running the algebraic trace-bound fuzz"))?;
            Ok(VerdictRecord {
                point_index: n,
                theorem: "hineva-fuzz".to_string(),
                point: Vec::new(),
                lhs: min_slack,
                rhs: 0.0,
                slack: min_slack,
                equality: n == 2,
                convention: "modern",
                closed_form_residual: None,
                fiber_independent: None,
                diagnosis: None,
            })
        })
        .collect()
}

fn selected_residual(row: &AuditRow, convention: SignConvention) -> f64 {
    match convention {
        SignConvention::Modern => row.residual_modern,
        SignConvention::ONeill => row.residual_oneill,
    }
}

pub(crate) fn summarize(
    config: &RunConfig,
    audits: &[AuditRow],
    verdicts: &[VerdictRecord],
    selected: SignConvention,
) -> Summary {
    let mut min_slack = f64::INFINITY;
    let mut violation_count = 0;
    let mut equality_count = 0;
    let mut by_theorem: std::collections::BTreeMap<String, f64> = std::collections::BTreeMap::new();
    for v in verdicts {
        min_slack = min_slack.min(v.slack);
        by_theorem
            .entry(v.theorem.clone())
            .and_modify(|worst| *worst = worst.min(v.slack))
            .or_insert(v.slack);
        // The negated comparison treats NaN slack as a violation.
        if !(v.slack >= -config.tol_slack) {
            violation_count += 1;
        }
        if v.equality {
            equality_count += 1;
        }
    }
    let mut worst_gating_residual = 0.0_f64;
    let mut identity_failed = false;
    for row in audits.iter().filter(|r| r.gates) {
        let residual = selected_residual(row, selected);
        worst_gating_residual = worst_gating_residual.max(residual);
        if !(residual <= config.tol_identity) {
            identity_failed = true;
        }
    }
    let exit_code = if identity_failed {
        2
    } else if violation_count > 0 {
        1
    } else {
        0
    };
    Summary {
        verdict_count: verdicts.len(),
        violation_count,
        equality_count,
        min_slack,
        min_slack_by_theorem: by_theorem.into_iter().collect(),
        worst_gating_residual,
        selected_convention: convention_label(selected),
        exit_code,
    }
}

/// Execute a full run. Configuration and scenario problems surface as
/// errors without a point; hard numeric failures name the sample point and
/// the operation.
pub fn run(config: &RunConfig) -> Result<Report, RunError> {
    validate_config(config)?;
    let scenario =
        scenario::load(&config.scenario).map_err(config_error("loading the scenario"))?;
    let (theorems, include_fuzz) = resolve_theorems(config, &scenario)?;
    let points =
        sample::sample_points(scenario.domain().domain(), config.samples, config.seed);

    let (audits, mut verdicts, selected) = match &scenario.geometry {
        Geometry::Submersion(sub) => {
            run_submersion(sub, &scenario, config, &theorems, &points)?
        }
        Geometry::Map(m) => run_map(m, &scenario, config, &theorems, &points)?,
        Geometry::ManifoldOnly(m) => run_manifold_only(m, &scenario, &points)?,
    };
    if include_fuzz {
        verdicts.extend(hineva_fuzz_rows(config.seed)?);
    }
    let summary = summarize(config, &audits, &verdicts, selected);
    Ok(Report { config: config.clone(), identity_audits: audits, verdicts, summary })
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

fn json_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    for ch in text.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                write!(out, "\\u{:04x}", c as u32).unwrap();
            }
            c => out.push(c),
        }
    }
    out
}

/// Numbers print as full-precision scientific notation; non-finite values
/// become JSON strings.
fn json_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "\"nan\"".to_string()
    } else if x > 0.0 {
        "\"inf\"".to_string()
    } else {
        "\"-inf\"".to_string()
    }
}

fn csv_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn json_opt_number(x: Option<f64>) -> String {
    match x {
        Some(v) => json_number(v),
        None => "null".to_string(),
    }
}

fn json_number_array(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|&x| json_number(x)).collect();
    format!("[{}]", parts.join(", "))
}

fn json_config(config: &RunConfig) -> String {
    let theorems = match &config.theorems {
        None => "null".to_string(),
        Some(list) => {
            let parts: Vec<String> =
                list.iter().map(|t| format!("\"{}\"", json_escape(t))).collect();
            format!("[{}]", parts.join(", "))
        }
    };
    let out = match &config.out {
        None => "null".to_string(),
        Some(path) => format!("\"{}\"", json_escape(path)),
    };
    format!(
        "{{\"scenario\": \"{}\", \"theorems\": {}, \"samples\": {}, \"seed\": {}, \
         \"tol_slack\": {}, \"tol_identity\": {}, \"tol_equality\": {}, \
         \"convention\": \"{}\", \"format\": \"{}\", \"out\": {}}}",
        json_escape(&config.scenario),
        theorems,
        config.samples,
        config.seed,
        json_number(config.tol_slack),
        json_number(config.tol_identity),
        json_number(config.tol_equality),
        config.convention.label(),
        config.format.label(),
        out,
    )
}

fn json_audit(row: &AuditRow) -> String {
    format!(
        "{{\"name\": \"{}\", \"residual_modern\": {}, \"residual_oneill\": {}, \
         \"independent\": {}, \"gates\": {}}}",
        row.name,
        json_number(row.residual_modern),
        json_number(row.residual_oneill),
        row.independent,
        row.gates,
    )
}

fn json_diagnosis(d: &EqualityDiagnosis) -> String {
    format!(
        "{{\"lambdas\": {}, \"mus\": {}, \"ratios\": {}, \"ratio_spread\": {}, \
         \"diagonal_residual\": {}, \"cauchy_schwarz_residual\": {}}}",
        json_number_array(&d.lambdas),
        json_number_array(&d.mus),
        json_number_array(&d.ratios),
        json_number(d.ratio_spread),
        json_number(d.diagonal_residual),
        json_number(d.cauchy_schwarz_residual),
    )
}

fn json_verdict(v: &VerdictRecord) -> String {
    let fiber = match v.fiber_independent {
        None => "null".to_string(),
        Some(b) => b.to_string(),
    };
    let diagnosis = match &v.diagnosis {
        None => "null".to_string(),
        Some(d) => json_diagnosis(d),
    };
    format!(
        "{{\"point_index\": {}, \"theorem\": \"{}\", \"convention\": \"{}\", \
         \"lhs\": {}, \"rhs\": {}, \"slack\": {}, \"equality\": {}, \
         \"closed_form_residual\": {}, \"fiber_independent\": {}, \"point\": {}, \
         \"diagnosis\": {}}}",
        v.point_index,
        json_escape(&v.theorem),
        v.convention,
        json_number(v.lhs),
        json_number(v.rhs),
        json_number(v.slack),
        v.equality,
        json_opt_number(v.closed_form_residual),
        fiber,
        json_number_array(&v.point),
        diagnosis,
    )
}

fn json_summary(s: &Summary) -> String {
    let per_theorem: Vec<String> = s
        .min_slack_by_theorem
        .iter()
        .map(|(name, slack)| format!("\"{}\": {}", json_escape(name), json_number(*slack)))
        .collect();
    format!(
        "{{\"verdict_count\": {}, \"violation_count\": {}, \"equality_count\": {}, \
         \"min_slack\": {}, \"min_slack_by_theorem\": {{{}}}, \
         \"worst_gating_residual\": {}, \
         \"selected_convention\": \"{}\", \"exit_code\": {}}}",
        s.verdict_count,
        s.violation_count,
        s.equality_count,
        json_number(s.min_slack),
        per_theorem.join(", "),
        json_number(s.worst_gating_residual),
        s.selected_convention,
        s.exit_code,
    )
}

/// Render the report as deterministic JSON with the four top-level keys
/// `config`, `identity_audits`, `verdicts`, `summary`.
pub fn to_json(report: &Report) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    writeln!(out, "  \"config\": {},", json_config(&report.config)).unwrap();
    out.push_str("  \"identity_audits\": [\n");
    for (i, row) in report.identity_audits.iter().enumerate() {
        let comma = if i + 1 < report.identity_audits.len() { "," } else { "" };
        writeln!(out, "    {}{}", json_audit(row), comma).unwrap();
    }
    out.push_str("  ],\n");
    out.push_str("  \"verdicts\": [\n");
    for (i, v) in report.verdicts.iter().enumerate() {
        let comma = if i + 1 < report.verdicts.len() { "," } else { "" };
        writeln!(out, "    {}{}", json_verdict(v), comma).unwrap();
    }
    out.push_str("  ],\n");
    writeln!(out, "  \"summary\": {}", json_summary(&report.summary)).unwrap();
    out.push_str("}\n");
    out
}

/// Render the verdict table as CSV with the columns
/// `point_index,theorem,lhs,rhs,slack,equality,convention`.
pub fn to_csv(report: &Report) -> String {
    let mut out = String::from("point_index,theorem,lhs,rhs,slack,equality,convention\n");
    for v in &report.verdicts {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            v.point_index,
            v.theorem,
            csv_number(v.lhs),
            csv_number(v.rhs),
            csv_number(v.slack),
            v.equality,
            v.convention,
        )
        .unwrap();
    }
    out
}

/// Render in the configured format.
pub fn render(report: &Report) -> String {
    match report.config.format {
        OutputFormat::Json => to_json(report),
        OutputFormat::Csv => to_csv(report),
    }
}
