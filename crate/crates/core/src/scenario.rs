//! Ready-made geometries and the scenario text format.
//!
//! A scenario bundles a geometry (submersion, map, or bare manifold) with
//! optional space-form declarations that unlock the closed-form bound
//! variants. Scenarios come from a catalog of built-in names, optionally
//! parameterized (`"sphere-stereographic(4, 2.0)"`), or from a text file
//! with `[manifold.domain]`, `[manifold.target]`, and `[map]` sections.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::GeomError;
use crate::expr::{build, eval_value, parse, Expression};
use crate::manifold::ChartManifold;
use crate::map::RiemannianMap;
use crate::submersion::RiemannianSubmersion;

/// The geometry a scenario verifies.
#[derive(Debug, Clone)]
pub enum Geometry {
    Submersion(RiemannianSubmersion),
    Map(RiemannianMap),
    /// No map: only the manifold-level audits (space form, complex
    /// structure) apply.
    ManifoldOnly(ChartManifold),
}

/// Space-form constants declared for a manifold; either, both, or none.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpaceFormTags {
    pub real_c: Option<f64>,
    pub complex_c: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub geometry: Geometry,
    /// Space-form tags of the total space (submersions) or the manifold
    /// itself.
    pub domain_forms: SpaceFormTags,
    /// Space-form tags of the target (used by the map bounds).
    pub target_forms: SpaceFormTags,
    /// Preferred horizontal frame seeds for maps, chosen so hand-computed
    /// component patterns land on named axes.
    pub horizontal_seeds: Option<Vec<DVector<f64>>>,
}

/// Canonical theorem tokens in canonical order.
pub const ALL_THEOREMS: [&str; 7] = ["t31", "t41", "t53", "t54", "t62", "t65", "t66"];

impl Scenario {
    /// The chart whose box is sampled.
    pub fn domain(&self) -> &ChartManifold {
        match &self.geometry {
            Geometry::Submersion(s) => s.domain(),
            Geometry::Map(m) => m.domain(),
            Geometry::ManifoldOnly(m) => m,
        }
    }

    /// Theorems this scenario can verify, in canonical order.
    pub fn applicable_theorems(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        match &self.geometry {
            Geometry::Submersion(sub) => {
                // The partial-Ricci bounds need at least two fiber
                // directions; one-dimensional fibers still get audits.
                let fiber_dim = sub.domain().dim() - sub.target().dim();
                if fiber_dim >= 2 {
                    out.push("t31");
                    out.push("t41");
                    if self.domain_forms.real_c.is_some() {
                        out.push("t53");
                    }
                    if self.domain_forms.complex_c.is_some() {
                        out.push("t54");
                    }
                }
            }
            Geometry::Map(map) => {
                // The horizontal Ricci bound needs rank at least two.
                if map.rank() >= 2 {
                    out.push("t62");
                    if self.target_forms.real_c.is_some() {
                        out.push("t65");
                    }
                    if self.target_forms.complex_c.is_some() {
                        out.push("t66");
                    }
                }
            }
            Geometry::ManifoldOnly(_) => {}
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Built-in catalog
// ---------------------------------------------------------------------------

pub fn builtin_names() -> &'static [&'static str] {
    &[
        "flat-projection",
        "warped-s3",
        "warped-h3",
        "warped-custom",
        "sphere-stereographic",
        "fubini-study",
        "flat-complex",
        "linear-map",
        "cylinder-map",
        "clifford-torus-map",
    ]
}

fn known_expr(text: &str) -> Expression {
    parse(text).expect("catalog expression parses")
}

fn euclidean_box(dim: usize, box_axes: Vec<[f64; 2]>) -> ChartManifold {
    let mut entries = Vec::new();
    for i in 0..dim {
        for j in i..dim {
            entries.push(build::lit(if i == j { 1.0 } else { 0.0 }));
        }
    }
    ChartManifold::new(dim, entries, box_axes, None).expect("flat chart is well-formed")
}

fn line_manifold(box_axis: [f64; 2]) -> ChartManifold {
    ChartManifold::new(1, vec![build::lit(1.0)], vec![box_axis], None)
        .expect("line chart is well-formed")
}

fn axis(n: usize, i: usize) -> DVector<f64> {
    let mut e = DVector::zeros(n);
    e[i] = 1.0;
    e
}

/// dt² + f(t)²(dx² + dy²) over t = x1, projected onto t.
fn warped_product_scenario(
    name: String,
    warp: Expression,
    t_box: [f64; 2],
    real_c: Option<f64>,
) -> Result<Scenario, GeomError> {
    let vars = warp.free_vars();
    if vars.iter().any(|&v| v != 0) {
        return Err(GeomError::Config {
            detail: format!("warp function must depend only on x1, got {warp}"),
        });
    }
    // The warp must stay strictly positive where we sample.
    for k in 0..=200 {
        let t = t_box[0] + (t_box[1] - t_box[0]) * k as f64 / 200.0;
        let v = eval_value(&warp, &[t])?;
        if !(v > 1e-5) {
            return Err(GeomError::Config {
                detail: format!("warp function must be positive on the interval: f({t}) = {v}"),
            });
        }
    }
    let f_sq = build::powi(warp, 2);
    let domain = ChartManifold::new(
        3,
        vec![
            build::lit(1.0),
            build::lit(0.0),
            build::lit(0.0),
            f_sq.clone(),
            build::lit(0.0),
            f_sq,
        ],
        vec![t_box, [-2.0, 2.0], [-2.0, 2.0]],
        None,
    )?;
    let target = line_manifold(t_box);
    let geometry = Geometry::Submersion(RiemannianSubmersion::new(
        domain,
        target,
        vec![known_expr("x1")],
    )?);
    Ok(Scenario {
        name,
        geometry,
        domain_forms: SpaceFormTags { real_c, complex_c: None },
        target_forms: SpaceFormTags::default(),
        horizontal_seeds: None,
    })
}

fn build_builtin(name: &str, base: &str, args: &[String]) -> Result<Scenario, GeomError> {
    let no_args = |args: &[String]| -> Result<(), GeomError> {
        if args.is_empty() {
            Ok(())
        } else {
            Err(GeomError::Config {
                detail: format!("scenario `{base}` takes no parameters"),
            })
        }
    };
    match base {
        "flat-projection" => {
            no_args(args)?;
            let geometry = Geometry::Submersion(RiemannianSubmersion::new(
                ChartManifold::euclidean(3),
                ChartManifold::euclidean(1),
                vec![known_expr("x1")],
            )?);
            Ok(Scenario {
                name: name.to_string(),
                geometry,
                domain_forms: SpaceFormTags { real_c: Some(0.0), complex_c: None },
                target_forms: SpaceFormTags { real_c: Some(0.0), complex_c: None },
                horizontal_seeds: None,
            })
        }
        "warped-s3" => {
            no_args(args)?;
            let pi = std::f64::consts::PI;
            let domain = ChartManifold::new(
                3,
                vec![
                    build::lit(1.0),
                    build::lit(0.0),
                    build::lit(0.0),
                    known_expr("sin(x1)^2"),
                    build::lit(0.0),
                    known_expr("sin(x1)^2 * sin(x2)^2"),
                ],
                vec![[0.3, pi - 0.3], [0.4, pi - 0.4], [0.2, 6.0]],
                None,
            )?;
            let target = line_manifold([0.3, pi - 0.3]);
            let geometry = Geometry::Submersion(RiemannianSubmersion::new(
                domain,
                target,
                vec![known_expr("x1")],
            )?);
            Ok(Scenario {
                name: name.to_string(),
                geometry,
                domain_forms: SpaceFormTags { real_c: Some(1.0), complex_c: None },
                target_forms: SpaceFormTags::default(),
                horizontal_seeds: None,
            })
        }
        "warped-h3" => {
            no_args(args)?;
            let scenario = warped_product_scenario(
                name.to_string(),
                known_expr("exp(x1)"),
                [-1.0, 1.0],
                Some(-1.0),
            )?;
            Ok(scenario)
        }
        "warped-custom" => {
            if args.len() > 1 {
                return Err(GeomError::Config {
                    detail: format!("warped-custom takes one warp expression, got {}", args.len()),
                });
            }
            let warp = match args.first() {
                Some(text) => parse(text)?,
                None => known_expr("cosh(x1)"),
            };
            warped_product_scenario(name.to_string(), warp, [-1.0, 1.0], None)
        }
        "sphere-stereographic" => {
            if args.len() > 2 {
                return Err(GeomError::Config {
                    detail: "sphere-stereographic takes (dim, c)".to_string(),
                });
            }
            let dim = match args.first() {
                Some(a) => parse_usize(a, "dimension")?,
                None => 3,
            };
            let c = match args.get(1) {
                Some(a) => parse_f64(a, "curvature")?,
                None => 1.0,
            };
            if dim == 0 {
                return Err(GeomError::Config {
                    detail: "sphere-stereographic needs a positive dimension".to_string(),
                });
            }
            Ok(Scenario {
                name: name.to_string(),
                geometry: Geometry::ManifoldOnly(ChartManifold::stereographic_sphere(dim, c)),
                domain_forms: SpaceFormTags { real_c: Some(c), complex_c: None },
                target_forms: SpaceFormTags::default(),
                horizontal_seeds: None,
            })
        }
        "fubini-study" => {
            if args.len() > 2 {
                return Err(GeomError::Config {
                    detail: "fubini-study takes (complex dim, c)".to_string(),
                });
            }
            let n = match args.first() {
                Some(a) => parse_usize(a, "complex dimension")?,
                None => 2,
            };
            let c = match args.get(1) {
                Some(a) => parse_f64(a, "holomorphic curvature")?,
                None => 4.0,
            };
            if n == 0 {
                return Err(GeomError::Config {
                    detail: "fubini-study needs a positive complex dimension".to_string(),
                });
            }
            Ok(Scenario {
                name: name.to_string(),
                geometry: Geometry::ManifoldOnly(ChartManifold::fubini_study(n, c)?),
                domain_forms: SpaceFormTags { real_c: None, complex_c: Some(c) },
                target_forms: SpaceFormTags::default(),
                horizontal_seeds: None,
            })
        }
        "flat-complex" => {
            no_args(args)?;
            let geometry = Geometry::Submersion(RiemannianSubmersion::new(
                ChartManifold::euclidean_complex(2),
                ChartManifold::euclidean(2),
                vec![known_expr("x1"), known_expr("x2")],
            )?);
            Ok(Scenario {
                name: name.to_string(),
                geometry,
                domain_forms: SpaceFormTags { real_c: Some(0.0), complex_c: Some(0.0) },
                target_forms: SpaceFormTags { real_c: Some(0.0), complex_c: None },
                horizontal_seeds: None,
            })
        }
        "linear-map" => {
            no_args(args)?;
            let geometry = Geometry::Map(RiemannianMap::new(
                ChartManifold::euclidean(3),
                ChartManifold::euclidean_complex(2),
                vec![
                    known_expr("x1"),
                    known_expr("x2"),
                    build::lit(0.0),
                    build::lit(0.0),
                ],
                2,
            )?);
            Ok(Scenario {
                name: name.to_string(),
                geometry,
                domain_forms: SpaceFormTags { real_c: Some(0.0), complex_c: None },
                target_forms: SpaceFormTags { real_c: Some(0.0), complex_c: Some(0.0) },
                horizontal_seeds: Some(vec![axis(3, 0), axis(3, 1)]),
            })
        }
        "cylinder-map" => {
            no_args(args)?;
            let geometry = Geometry::Map(RiemannianMap::new(
                ChartManifold::euclidean(3),
                ChartManifold::euclidean(3),
                vec![known_expr("cos(x1)"), known_expr("sin(x1)"), known_expr("x2")],
                2,
            )?);
            Ok(Scenario {
                name: name.to_string(),
                geometry,
                domain_forms: SpaceFormTags { real_c: Some(0.0), complex_c: None },
                target_forms: SpaceFormTags { real_c: Some(0.0), complex_c: None },
                horizontal_seeds: Some(vec![axis(3, 0), axis(3, 1)]),
            })
        }
        "clifford-torus-map" => {
            no_args(args)?;
            // Flat planes wrapped onto the minimal torus in the unit
            // 3-sphere, expressed through the stereographic chart. The x1
            // range keeps the image inside the chart box.
            let geometry = Geometry::Map(RiemannianMap::new(
                euclidean_box(3, vec![[-1.8, 1.8], [-2.0, 2.0], [-2.0, 2.0]]),
                ChartManifold::stereographic_sphere(3, 1.0),
                vec![
                    known_expr("sin(sqrt(2)*x1) / (sqrt(2) + cos(sqrt(2)*x1))"),
                    known_expr("cos(sqrt(2)*x2) / (sqrt(2) + cos(sqrt(2)*x1))"),
                    known_expr("sin(sqrt(2)*x2) / (sqrt(2) + cos(sqrt(2)*x1))"),
                ],
                2,
            )?);
            Ok(Scenario {
                name: name.to_string(),
                geometry,
                domain_forms: SpaceFormTags { real_c: Some(0.0), complex_c: None },
                target_forms: SpaceFormTags { real_c: Some(1.0), complex_c: None },
                horizontal_seeds: Some(vec![axis(3, 0), axis(3, 1)]),
            })
        }
        other => Err(GeomError::Config {
            detail: format!(
                "unknown scenario `{other}`; built-ins: {}",
                builtin_names().join(", ")
            ),
        }),
    }
}

fn parse_usize(text: &str, what: &str) -> Result<usize, GeomError> {
    text.trim().parse().map_err(|_| GeomError::Config {
        detail: format!("could not parse {what} from `{text}`"),
    })
}

fn parse_f64(text: &str, what: &str) -> Result<f64, GeomError> {
    text.trim().parse().map_err(|_| GeomError::Config {
        detail: format!("could not parse {what} from `{text}`"),
    })
}

/// Split `"base(arg, arg)"` into the base name and top-level arguments.
fn split_name_args(name: &str) -> Result<(&str, Vec<String>), GeomError> {
    let Some(open) = name.find('(') else {
        return Ok((name.trim(), Vec::new()));
    };
    if !name.ends_with(')') {
        return Err(GeomError::Config {
            detail: format!("unbalanced parentheses in scenario name `{name}`"),
        });
    }
    let base = name[..open].trim();
    let inner = &name[open + 1..name.len() - 1];
    let mut args = Vec::new();
    let mut depth = 0usize;
    let mut current = String::new();
    for ch in inner.chars() {
        match ch {
            '(' => {
                depth += 1;
                current.push(ch);
            }
            ')' => {
                depth = depth.checked_sub(1).ok_or_else(|| GeomError::Config {
                    detail: format!("unbalanced parentheses in scenario name `{name}`"),
                })?;
                current.push(ch);
            }
            ',' if depth == 0 => {
                args.push(current.trim().to_string());
                current.clear();
            }
            _ => current.push(ch),
        }
    }
    if depth != 0 {
        return Err(GeomError::Config {
            detail: format!("unbalanced parentheses in scenario name `{name}`"),
        });
    }
    if !current.trim().is_empty() {
        args.push(current.trim().to_string());
    } else if !args.is_empty() {
        return Err(GeomError::Config {
            detail: format!("trailing comma in scenario name `{name}`"),
        });
    }
    Ok((base, args))
}

/// Look up a built-in scenario, resolving optional parameters.
pub fn builtin(name: &str) -> Result<Scenario, GeomError> {
    let (base, args) = split_name_args(name)?;
    build_builtin(name, base, &args)
}

/// Resolve a scenario argument: an existing file path is parsed as scenario
/// text, anything else must be a built-in name.
pub fn load(spec: &str) -> Result<Scenario, GeomError> {
    let path = std::path::Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| GeomError::Config {
            detail: format!("could not read scenario file `{spec}`: {e}"),
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| spec.to_string());
        from_text(&name, &text)
    } else {
        builtin(spec)
    }
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

#[derive(Default)]
struct ManifoldDraft {
    header_line: usize,
    dim: Option<(usize, usize)>,
    box_axes: Option<(Vec<[f64; 2]>, usize)>,
    metric: BTreeMap<(usize, usize), (Expression, usize)>,
    complex_structure: Option<(DMatrix<f64>, usize)>,
    forms: SpaceFormTags,
}

#[derive(Default)]
struct MapDraft {
    header_line: usize,
    present: bool,
    components: BTreeMap<usize, (Expression, usize)>,
    kind: Option<(String, usize)>,
    rank: Option<(usize, usize)>,
}

fn parse_err(line: usize, detail: impl Into<String>) -> GeomError {
    GeomError::ScenarioParse { line, detail: detail.into() }
}

fn parse_box(value: &str, line: usize) -> Result<Vec<[f64; 2]>, GeomError> {
    let mut out = Vec::new();
    for part in value.split(',') {
        let (lo, hi) = part
            .split_once(':')
            .ok_or_else(|| parse_err(line, format!("box axis `{part}` is not `lo:hi`")))?;
        let lo: f64 = lo.trim().parse().map_err(|_| {
            parse_err(line, format!("could not parse box bound `{}`", lo.trim()))
        })?;
        let hi: f64 = hi.trim().parse().map_err(|_| {
            parse_err(line, format!("could not parse box bound `{}`", hi.trim()))
        })?;
        if !(lo < hi) {
            return Err(parse_err(line, format!("box axis needs lo < hi, got {lo}:{hi}")));
        }
        out.push([lo, hi]);
    }
    Ok(out)
}

fn parse_complex_structure(value: &str, line: usize) -> Result<DMatrix<f64>, GeomError> {
    let rows: Vec<Vec<f64>> = value
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|entry| {
                    entry.trim().parse::<f64>().map_err(|_| {
                        parse_err(line, format!("bad complex-structure entry `{}`", entry.trim()))
                    })
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(parse_err(line, "complex structure must be square"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn parse_spaceform(value: &str, line: usize, forms: &mut SpaceFormTags) -> Result<(), GeomError> {
    let mut parts = value.split_whitespace();
    let kind = parts.next().unwrap_or("");
    let c: f64 = parts
        .next()
        .ok_or_else(|| parse_err(line, "spaceform needs `real <c>` or `complex <c>`"))?
        .parse()
        .map_err(|_| parse_err(line, format!("bad space-form constant in `{value}`")))?;
    if parts.next().is_some() {
        return Err(parse_err(line, "spaceform takes exactly one constant"));
    }
    match kind {
        "real" => forms.real_c = Some(c),
        "complex" => forms.complex_c = Some(c),
        other => {
            return Err(parse_err(line, format!("space-form kind `{other}` (real or complex)")))
        }
    }
    Ok(())
}

fn manifold_key(
    draft: &mut ManifoldDraft,
    key: &str,
    value: &str,
    line: usize,
) -> Result<(), GeomError> {
    match key {
        "dim" => {
            let dim: usize = value
                .parse()
                .map_err(|_| parse_err(line, format!("bad dimension `{value}`")))?;
            draft.dim = Some((dim, line));
        }
        "box" => {
            draft.box_axes = Some((parse_box(value, line)?, line));
        }
        "J" => {
            draft.complex_structure = Some((parse_complex_structure(value, line)?, line));
        }
        "spaceform" => parse_spaceform(value, line, &mut draft.forms)?,
        _ if key.starts_with("g_") => {
            let mut parts = key[2..].split('_');
            let parse_idx = |part: Option<&str>| -> Result<usize, GeomError> {
                part.and_then(|p| p.parse::<usize>().ok())
                    .filter(|&i| i >= 1)
                    .ok_or_else(|| parse_err(line, format!("bad metric key `{key}`")))
            };
            let i = parse_idx(parts.next())?;
            let j = parse_idx(parts.next())?;
            if parts.next().is_some() {
                return Err(parse_err(line, format!("bad metric key `{key}`")));
            }
            let expr = parse(value).map_err(|e| parse_err(line, format!("{e}")))?;
            draft.metric.insert((i.min(j), i.max(j)), (expr, line));
        }
        other => return Err(parse_err(line, format!("unknown manifold key `{other}`"))),
    }
    Ok(())
}

fn map_key(draft: &mut MapDraft, key: &str, value: &str, line: usize) -> Result<(), GeomError> {
    match key {
        "kind" => draft.kind = Some((value.to_string(), line)),
        "rank" => {
            let rank: usize =
                value.parse().map_err(|_| parse_err(line, format!("bad rank `{value}`")))?;
            draft.rank = Some((rank, line));
        }
        _ if key.starts_with("F_") => {
            let k: usize = key[2..]
                .parse()
                .ok()
                .filter(|&k| k >= 1)
                .ok_or_else(|| parse_err(line, format!("bad map key `{key}`")))?;
            let expr = parse(value).map_err(|e| parse_err(line, format!("{e}")))?;
            draft.components.insert(k, (expr, line));
        }
        other => return Err(parse_err(line, format!("unknown map key `{other}`"))),
    }
    Ok(())
}

fn build_chart(draft: &ManifoldDraft, section: &str) -> Result<ChartManifold, GeomError> {
    let (dim, _) = draft
        .dim
        .ok_or_else(|| parse_err(draft.header_line, format!("[{section}] needs `dim`")))?;
    let (box_axes, box_line) = draft
        .box_axes
        .clone()
        .ok_or_else(|| parse_err(draft.header_line, format!("[{section}] needs `box`")))?;
    if box_axes.len() != dim {
        return Err(parse_err(
            box_line,
            format!("box has {} axes for dimension {dim}", box_axes.len()),
        ));
    }
    for (&(i, j), &(_, line)) in &draft.metric {
        if j > dim {
            return Err(parse_err(line, format!("metric entry g_{i}_{j} outside dimension {dim}")));
        }
    }
    let mut entries = Vec::new();
    for i in 1..=dim {
        for j in i..=dim {
            entries.push(match draft.metric.get(&(i, j)) {
                Some((e, _)) => e.clone(),
                None => build::lit(if i == j { 1.0 } else { 0.0 }),
            });
        }
    }
    ChartManifold::new(dim, entries, box_axes, draft.complex_structure.clone().map(|(j, _)| j))
}

/// Evaluate the metric at the center and (for small dimensions) near every
/// box corner, so obviously broken charts fail at load time with a clear
/// error instead of mid-run.
fn precheck_metric(m: &ChartManifold) -> Result<(), GeomError> {
    let dim = m.dim();
    let center: Vec<f64> =
        m.domain().iter().map(|&[lo, hi]| 0.5 * (lo + hi)).collect();
    m.metric_at(&center)?;
    if dim <= 10 {
        for mask in 0..(1usize << dim) {
            let p: Vec<f64> = (0..dim)
                .map(|i| {
                    let [lo, hi] = m.domain()[i];
                    let t = if mask >> i & 1 == 1 { 1.0 - 1e-6 } else { 1e-6 };
                    lo + t * (hi - lo)
                })
                .collect();
            m.metric_at(&p)?;
        }
    }
    Ok(())
}

/// Parse scenario text. Sections: `[manifold.domain]`, `[manifold.target]`,
/// `[map]`. Manifold keys: `dim`, `box = lo:hi, ...`, `g_i_j = <expr>`
/// (symmetric completion; missing entries default to the identity),
/// `J = row; row; ...` and `spaceform = real|complex <c>`. Map keys:
/// `F_k = <expr>`, `kind = submersion|map`, `rank = <r>`.
pub fn from_text(name: &str, text: &str) -> Result<Scenario, GeomError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Section {
        None,
        Domain,
        Target,
        Map,
    }
    let mut section = Section::None;
    let mut domain = ManifoldDraft::default();
    let mut target: Option<ManifoldDraft> = None;
    let mut map_draft = MapDraft::default();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(header) = content.strip_prefix('[') {
            let header = header
                .strip_suffix(']')
                .ok_or_else(|| parse_err(line, format!("unterminated section `{content}`")))?;
            section = match header.trim() {
                "manifold.domain" => {
                    domain.header_line = line;
                    Section::Domain
                }
                "manifold.target" => {
                    let draft = target.get_or_insert_with(ManifoldDraft::default);
                    draft.header_line = line;
                    Section::Target
                }
                "map" => {
                    map_draft.present = true;
                    map_draft.header_line = line;
                    Section::Map
                }
                other => return Err(parse_err(line, format!("unknown section `[{other}]`"))),
            };
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("expected `key = value`, got `{content}`")))?;
        let key = key.trim();
        let value = value.trim();
        match section {
            Section::None => {
                return Err(parse_err(line, "keys must appear inside a section"));
            }
            Section::Domain => manifold_key(&mut domain, key, value, line)?,
            Section::Target => {
                manifold_key(target.as_mut().expect("target draft exists"), key, value, line)?
            }
            Section::Map => map_key(&mut map_draft, key, value, line)?,
        }
    }

    if domain.header_line == 0 {
        return Err(parse_err(1, "scenario needs a [manifold.domain] section"));
    }
    let domain_chart = build_chart(&domain, "manifold.domain")?;
    precheck_metric(&domain_chart)?;

    if !map_draft.present {
        if target.is_some() {
            return Err(parse_err(
                target.unwrap().header_line,
                "a target manifold needs a [map] section",
            ));
        }
        return Ok(Scenario {
            name: name.to_string(),
            geometry: Geometry::ManifoldOnly(domain_chart),
            domain_forms: domain.forms,
            target_forms: SpaceFormTags::default(),
            horizontal_seeds: None,
        });
    }

    let target_draft = target.ok_or_else(|| {
        parse_err(map_draft.header_line, "a [map] section needs a [manifold.target] section")
    })?;
    let target_forms = target_draft.forms;
    let target_chart = build_chart(&target_draft, "manifold.target")?;
    precheck_metric(&target_chart)?;

    let mut components = Vec::new();
    for k in 1..=target_chart.dim() {
        let (expr, _) = map_draft.components.remove(&k).ok_or_else(|| {
            parse_err(map_draft.header_line, format!("missing map component F_{k}"))
        })?;
        components.push(expr);
    }
    if let Some((&k, &(_, line))) = map_draft.components.iter().next() {
        return Err(parse_err(
            line,
            format!("map component F_{k} exceeds the target dimension {}", target_chart.dim()),
        ));
    }

    let kind = match &map_draft.kind {
        Some((k, line)) => match k.as_str() {
            "submersion" | "map" => (k.clone(), *line),
            other => {
                return Err(parse_err(*line, format!("kind must be submersion or map, got `{other}`")))
            }
        },
        None => {
            let inferred = if map_draft.rank.is_some() { "map" } else { "submersion" };
            (inferred.to_string(), map_draft.header_line)
        }
    };

    let geometry = if kind.0 == "submersion" {
        if let Some((rank, line)) = map_draft.rank {
            if rank != target_chart.dim() {
                return Err(parse_err(
                    line,
                    format!(
                        "a submersion has full rank {}; drop `rank` or use kind = map",
                        target_chart.dim()
                    ),
                ));
            }
        }
        Geometry::Submersion(RiemannianSubmersion::new(domain_chart, target_chart, components)?)
    } else {
        let (rank, _) = map_draft
            .rank
            .ok_or_else(|| parse_err(kind.1, "kind = map needs an explicit `rank`"))?;
        Geometry::Map(RiemannianMap::new(domain_chart, target_chart, components, rank)?)
    };

    Ok(Scenario {
        name: name.to_string(),
        geometry,
        domain_forms: domain.forms,
        target_forms,
        horizontal_seeds: None,
    })
}

fn write_manifold_section(
    out: &mut String,
    header: &str,
    m: &ChartManifold,
    forms: &SpaceFormTags,
) {
    writeln!(out, "[{header}]").unwrap();
    writeln!(out, "dim = {}", m.dim()).unwrap();
    let box_text: Vec<String> =
        m.domain().iter().map(|&[lo, hi]| format!("{lo}:{hi}")).collect();
    writeln!(out, "box = {}", box_text.join(", ")).unwrap();
    for i in 0..m.dim() {
        for j in i..m.dim() {
            writeln!(out, "g_{}_{} = {}", i + 1, j + 1, m.metric_expression(i, j)).unwrap();
        }
    }
    if let Some(jmat) = m.complex_structure() {
        let rows: Vec<String> = (0..jmat.nrows())
            .map(|i| {
                (0..jmat.ncols()).map(|j| format!("{}", jmat[(i, j)])).collect::<Vec<_>>().join(", ")
            })
            .collect();
        writeln!(out, "J = {}", rows.join("; ")).unwrap();
    }
    if let Some(c) = forms.real_c {
        writeln!(out, "spaceform = real {c}").unwrap();
    }
    if let Some(c) = forms.complex_c {
        writeln!(out, "spaceform = complex {c}").unwrap();
    }
    out.push('\n');
}

/// Serialize a scenario in the text format (horizontal seeds are a catalog
/// nicety and are not part of the format).
pub fn to_text(scenario: &Scenario) -> String {
    let mut out = String::new();
    match &scenario.geometry {
        Geometry::ManifoldOnly(m) => {
            write_manifold_section(&mut out, "manifold.domain", m, &scenario.domain_forms);
        }
        Geometry::Submersion(sub) => {
            write_manifold_section(&mut out, "manifold.domain", sub.domain(), &scenario.domain_forms);
            write_manifold_section(&mut out, "manifold.target", sub.target(), &scenario.target_forms);
            writeln!(out, "[map]").unwrap();
            writeln!(out, "kind = submersion").unwrap();
            for (k, component) in sub.map().iter().enumerate() {
                writeln!(out, "F_{} = {}", k + 1, component).unwrap();
            }
        }
        Geometry::Map(map) => {
            write_manifold_section(&mut out, "manifold.domain", map.domain(), &scenario.domain_forms);
            write_manifold_section(&mut out, "manifold.target", map.target(), &scenario.target_forms);
            writeln!(out, "[map]").unwrap();
            writeln!(out, "kind = map").unwrap();
            writeln!(out, "rank = {}", map.rank()).unwrap();
            for (k, component) in map.map().iter().enumerate() {
                writeln!(out, "F_{} = {}", k + 1, component).unwrap();
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::FrameOptions;
    use crate::inequality::{verify_t31, verify_t41};
    use crate::manifold::SignConvention;
    use crate::tol;
    use approx::assert_abs_diff_eq;

    #[test]
    fn every_builtin_constructs_with_expected_theorems() {
        let expect: &[(&str, &[&str])] = &[
            ("flat-projection", &["t31", "t41", "t53"]),
            ("warped-s3", &["t31", "t41", "t53"]),
            ("warped-h3", &["t31", "t41", "t53"]),
            ("warped-custom", &["t31", "t41"]),
            ("sphere-stereographic", &[]),
            ("fubini-study", &[]),
            ("flat-complex", &["t31", "t41", "t53", "t54"]),
            ("linear-map", &["t62", "t65", "t66"]),
            ("cylinder-map", &["t62", "t65"]),
            ("clifford-torus-map", &["t62", "t65"]),
        ];
        assert_eq!(expect.len(), builtin_names().len());
        for (name, theorems) in expect {
            let scenario = builtin(name).unwrap();
            assert_eq!(&scenario.applicable_theorems(), theorems, "{name}");
            assert_eq!(scenario.name, *name);
        }
    }

    #[test]
    fn parameterized_names_resolve() {
        let s = builtin("sphere-stereographic(4, 2.0)").unwrap();
        match &s.geometry {
            Geometry::ManifoldOnly(m) => assert_eq!(m.dim(), 4),
            _ => panic!("expected a bare manifold"),
        }
        assert_eq!(s.domain_forms.real_c, Some(2.0));

        let s = builtin("warped-custom(exp(x1) + 2)").unwrap();
        assert_eq!(s.applicable_theorems(), vec!["t31", "t41"]);

        assert!(matches!(builtin("warped-custom(x1)"), Err(GeomError::Config { .. })));
        assert!(matches!(builtin("sphere-stereographic(3, 1, 9)"), Err(GeomError::Config { .. })));
        assert!(matches!(builtin("no-such-scenario"), Err(GeomError::Config { .. })));
        assert!(matches!(builtin("warped-custom(sin(x1)"), Err(GeomError::Config { .. })));
    }

    #[test]
    fn builtins_round_trip_through_the_text_format() {
        for name in builtin_names() {
            let original = builtin(name).unwrap();
            let text = to_text(&original);
            let reparsed = from_text(name, &text).unwrap_or_else(|e| {
                panic!("reparse of `{name}` failed: {e}\n{text}");
            });
            assert_eq!(to_text(&reparsed), text, "canonical text differs for `{name}`");
            assert_eq!(
                reparsed.applicable_theorems(),
                original.applicable_theorems(),
                "{name}"
            );
        }
    }

    #[test]
    fn file_oracle_matches_hand_computed_slack() {
        // Three warped directions with different rates: far from equality,
        // with exactly computable bound gaps.
        let text = "\
# dt^2 + e^{2t} dx^2 + e^{4t} dy^2 + e^{2t} dz^2, projected onto t
[manifold.domain]
dim = 4
box = -0.5:0.5, -2:2, -2:2, -2:2
g_2_2 = exp(2*x1)
g_3_3 = exp(4*x1)
g_4_4 = exp(2*x1)

[manifold.target]
dim = 1
box = -0.5:0.5

[map]
kind = submersion
F_1 = x1
";
        let scenario = from_text("triple-warp", text).unwrap();
        let Geometry::Submersion(sub) = &scenario.geometry else {
            panic!("expected a submersion");
        };
        let data = sub
            .evaluate_point(&[0.1, 0.4, -0.3, 0.8], &FrameOptions::default())
            .unwrap();
        let v = verify_t31(&data, SignConvention::ONeill, tol::DEFAULT_TOL_EQUALITY).unwrap();
        assert_abs_diff_eq!(v.slack, 7.0 / 9.0, epsilon = 1e-7);
        let hv = verify_t41(&data, SignConvention::ONeill, tol::DEFAULT_TOL_EQUALITY).unwrap();
        assert_abs_diff_eq!(hv.slack, 7.0 / 18.0, epsilon = 1e-6);
    }

    #[test]
    fn minimal_manifold_defaults_to_identity_metric() {
        let text = "[manifold.domain]\ndim = 2\nbox = -1:1, -1:1\n";
        let scenario = from_text("flat", text).unwrap();
        let Geometry::ManifoldOnly(m) = &scenario.geometry else {
            panic!("expected manifold-only");
        };
        let g = m.metric_at(&[0.3, -0.4]).unwrap();
        assert_abs_diff_eq!(g[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[(0, 1)], 0.0, epsilon = 1e-15);
        assert!(scenario.applicable_theorems().is_empty());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let missing_dim = "[manifold.domain]\nbox = -1:1\n";
        match from_text("bad", missing_dim) {
            Err(GeomError::ScenarioParse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }

        let bad_key = "[manifold.domain]\ndim = 2\nbox = -1:1, -1:1\nwat = 3\n";
        match from_text("bad", bad_key) {
            Err(GeomError::ScenarioParse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }

        let box_mismatch = "[manifold.domain]\ndim = 3\nbox = -1:1, -1:1\n";
        match from_text("bad", box_mismatch) {
            Err(GeomError::ScenarioParse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }

        let no_section = "dim = 2\n";
        assert!(matches!(
            from_text("bad", no_section),
            Err(GeomError::ScenarioParse { line: 1, .. })
        ));

        let missing_component = "\
[manifold.domain]
dim = 2
box = -1:1, -1:1

[manifold.target]
dim = 2
box = -1:1, -1:1

[map]
kind = submersion
F_1 = x1
";
        assert!(matches!(
            from_text("bad", missing_component),
            Err(GeomError::ScenarioParse { .. })
        ));

        let rank_on_submersion = "\
[manifold.domain]
dim = 2
box = -1:1, -1:1

[manifold.target]
dim = 1
box = -1:1

[map]
kind = submersion
rank = 2
F_1 = x1
";
        assert!(matches!(
            from_text("bad", rank_on_submersion),
            Err(GeomError::ScenarioParse { .. })
        ));
    }

    #[test]
    fn indefinite_metrics_fail_the_precheck() {
        let text = "[manifold.domain]\ndim = 2\nbox = -1:1, -1:1\ng_1_1 = x1\n";
        assert!(matches!(
            from_text("bad", text),
            Err(GeomError::MetricNotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn spaceform_and_j_keys_parse() {
        let text = "\
[manifold.domain]
dim = 2
box = -1:1, -1:1
J = 0, -1; 1, 0
spaceform = real 0
spaceform = complex 0
";
        let scenario = from_text("flat-j", text).unwrap();
        assert_eq!(scenario.domain_forms.real_c, Some(0.0));
        assert_eq!(scenario.domain_forms.complex_c, Some(0.0));
        let Geometry::ManifoldOnly(m) = &scenario.geometry else {
            panic!("expected manifold-only");
        };
        assert!(m.complex_structure().is_some());
    }

    #[test]
    fn load_resolves_files_and_names() {
        let dir = std::env::temp_dir().join("riccibound-scenario-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("tiny.scenario");
        std::fs::write(&path, "[manifold.domain]\ndim = 1\nbox = 0:1\n").unwrap();
        let s = load(path.to_str().unwrap()).unwrap();
        assert_eq!(s.name, "tiny");
        let builtin = load("warped-h3").unwrap();
        assert_eq!(builtin.name, "warped-h3");
        assert!(load("not-a-file-or-builtin").is_err());
    }
}
