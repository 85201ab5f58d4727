//! Pointwise verdicts for the curvature lower bounds on Riemannian
//! submersions: the vertical partial-Ricci bound, the combined
//! vertical + horizontal + mixed bound, and their space-form
//! specializations, each with an equality-shape diagnosis.

use nalgebra::{DMatrix, DVector};

use crate::error::GeomError;
use crate::hineva;
use crate::manifold::{self, SignConvention};
use crate::submersion::{fiber_curvature, SubmersionPointData};
use crate::tensor::Tensor3;

/// One verified inequality at one point.
#[derive(Debug, Clone)]
pub struct InequalityVerdict {
    pub theorem: &'static str,
    pub point: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub equality: bool,
    pub convention: SignConvention,
    pub diagnosis: Option<EqualityDiagnosis>,
    /// For space-form variants: worst gap between the closed-form partial
    /// Ricci values and their numeric counterparts.
    pub closed_form_residual: Option<f64>,
    /// Whether the fiber-side curvature came from an independent intrinsic
    /// chart (false means it was rearranged out of the decomposition
    /// identity itself).
    pub fiber_independent: bool,
}

/// Shape report for the equality case: per-slice distinguished and repeated
/// diagonal values, their ratios, and how far the slices sit from the
/// quasi-umbilical form diag(λ, μ, …, μ) in the current frame.
#[derive(Debug, Clone)]
pub struct EqualityDiagnosis {
    pub lambdas: Vec<f64>,
    pub mus: Vec<f64>,
    pub ratios: Vec<f64>,
    pub ratio_spread: f64,
    pub diagonal_residual: f64,
    pub cauchy_schwarz_residual: f64,
}

/// The mean-curvature bracket
/// ((n−1)/n)(2n‖H‖² − ‖T‖² − (n−2)√(n‖H‖²(‖T‖² − n‖H‖²)/(n−1))).
pub fn mean_bracket(n: usize, h_sq: f64, t_sq: f64) -> f64 {
    let nf = n as f64;
    let radicand = (nf * h_sq * (t_sq - nf * h_sq) / (nf - 1.0)).max(0.0);
    (nf - 1.0) / nf * (2.0 * nf * h_sq - t_sq - (nf - 2.0) * radicand.sqrt())
}

/// Slices of a rank-3 component tensor along its last index.
pub fn tensor_slices(t: &Tensor3) -> Vec<DMatrix<f64>> {
    let n = t.d0;
    (0..t.d2)
        .map(|al| DMatrix::from_fn(n, n, |i, j| t.at(i, j, al)))
        .collect()
}

/// Diagnose how close a family of symmetric slices sits to the equality
/// shape: every slice diag(λ_α, μ_α, …, μ_α) in the current frame with a
/// common eigenvalue ratio.
pub fn diagnose_slices(slices: &[DMatrix<f64>]) -> EqualityDiagnosis {
    let mut lambdas = Vec::with_capacity(slices.len());
    let mut mus = Vec::with_capacity(slices.len());
    let mut ratios = Vec::with_capacity(slices.len());
    let mut diagonal_residual = 0.0_f64;

    let mut cs_lhs = 0.0;
    let mut cs_tr_sq = 0.0;
    let mut cs_dev_sq = 0.0;

    for s in slices {
        let n = s.nrows();
        let lambda = s[(0, 0)];
        let mu = if n > 1 {
            (1..n).map(|j| s[(j, j)]).sum::<f64>() / (n as f64 - 1.0)
        } else {
            0.0
        };
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    if i > 0 {
                        diagonal_residual = diagonal_residual.max((s[(i, i)] - mu).abs());
                    }
                } else {
                    diagonal_residual = diagonal_residual.max(s[(i, j)].abs());
                }
            }
        }
        lambdas.push(lambda);
        mus.push(mu);
        ratios.push(hineva::eigenvalue_ratio(lambda, mu, n));

        let trace = s.trace();
        let frob_sq: f64 = s.iter().map(|v| v * v).sum();
        let dev = (n as f64 * frob_sq - trace * trace).max(0.0);
        cs_lhs += trace.abs() * dev.sqrt();
        cs_tr_sq += trace * trace;
        cs_dev_sq += dev;
    }

    let finite: Vec<f64> = ratios.iter().copied().filter(|r| r.is_finite()).collect();
    let ratio_spread = if ratios.len() <= 1 || finite.len() == ratios.len() {
        if finite.len() <= 1 {
            0.0
        } else {
            let max = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = finite.iter().cloned().fold(f64::INFINITY, f64::min);
            max - min
        }
    } else if finite.is_empty() {
        0.0
    } else {
        f64::INFINITY
    };

    EqualityDiagnosis {
        lambdas,
        mus,
        ratios,
        ratio_spread,
        diagonal_residual,
        cauchy_schwarz_residual: (cs_tr_sq.sqrt() * cs_dev_sq.sqrt()) - cs_lhs,
    }
}

pub(crate) fn equality_flag(slack: f64, lhs: f64, rhs: f64, tol_equality: f64) -> bool {
    slack.abs() <= tol_equality * lhs.abs().max(rhs.abs()).max(1.0)
}

fn require_fiber_dim(data: &SubmersionPointData) -> Result<(), GeomError> {
    if data.l < 2 {
        return Err(GeomError::Config {
            detail: format!(
                "the vertical Ricci bound needs fiber dimension at least 2, got {}",
                data.l
            ),
        });
    }
    Ok(())
}

/// Partial vertical Ricci of V₁ in the total space, under a convention.
fn ric_vertical_n1(data: &SubmersionPointData, convention: SignConvention) -> f64 {
    let s = convention.sign();
    (0..data.l).map(|j| s * data.frame_curvature_modern.at(0, j, j, 0)).sum()
}

/// Partial horizontal Ricci of h₁ in the total space, under a convention.
fn ric_horizontal_n1(data: &SubmersionPointData, convention: SignConvention) -> f64 {
    let s = convention.sign();
    let l = data.l;
    (0..data.r).map(|j| s * data.frame_curvature_modern.at(l, l + j, l + j, l)).sum()
}

/// Full mixed sum Σ_{i,j} R(h_i, V_j, V_j, h_i), under a convention.
fn mixed_sum(data: &SubmersionPointData, convention: SignConvention) -> f64 {
    let s = convention.sign();
    let l = data.l;
    let mut total = 0.0;
    for i in 0..data.r {
        for j in 0..l {
            total += s * data.frame_curvature_modern.at(l + i, j, j, l + i);
        }
    }
    total
}

/// Intrinsic fiber partial Ricci of V₁ under a convention, plus whether the
/// value is independent of the decomposition identity.
fn ric_fiber(data: &SubmersionPointData, convention: SignConvention) -> (f64, bool) {
    let (fiber, independent) = fiber_curvature(data, convention);
    ((0..data.l).map(|j| fiber.at(0, j, j, 0)).sum(), independent)
}

/// Σ_j ‖A_{h₁} h_j‖².
fn a_norm_h1(data: &SubmersionPointData) -> f64 {
    let o = &data.oneill;
    let mut total = 0.0;
    for j in 0..data.r {
        for al in 0..data.l {
            total += o.a.at(0, j, al) * o.a.at(0, j, al);
        }
    }
    total
}

/// Horizontal partial Ricci of the horizontal distribution, obtained by
/// rearranging the horizontal curvature identity around the total-space
/// values: the three A-terms contract to 3Σ_j‖A_{h₁}h_j‖².
fn ric_horizontal_perp(data: &SubmersionPointData, convention: SignConvention) -> f64 {
    let ric_h = ric_horizontal_n1(data, convention);
    let a_sum = a_norm_h1(data);
    match convention {
        SignConvention::ONeill => ric_h - 3.0 * a_sum,
        SignConvention::Modern => ric_h + 3.0 * a_sum,
    }
}

/// The right-hand side of the combined bound.
fn combined_bound_rhs(data: &SubmersionPointData, convention: SignConvention) -> f64 {
    let l = data.l;
    let o = &data.oneill;
    let (ric_v_ker, _) = ric_fiber(data, convention);
    let ric_h_perp = ric_horizontal_perp(data, convention);
    let bracket = mean_bracket(l, o.mean_curvature_sq, o.norm_t_sq);
    let mut quarter = 0.0;
    for al in 0..data.r {
        let t11 = o.t.at(0, 0, al);
        let rest: f64 = (1..l).map(|j| o.t.at(j, j, al)).sum();
        let off: f64 = (1..l).map(|j| o.t.at(0, j, al) * o.t.at(0, j, al)).sum();
        quarter += t11 * t11 + rest * rest + 2.0 * off;
    }
    ric_v_ker + ric_h_perp + 0.5 * bracket - 0.25 * quarter + 3.0 * a_norm_h1(data)
        - data.delta_n
        + o.norm_t_mixed_sq
        - o.norm_a_mixed_sq
        + (l * l) as f64 / 4.0 * o.mean_curvature_sq
}

/// Vertical partial-Ricci bound: the intrinsic fiber Ricci of V₁ is bounded
/// above by the total-space vertical Ricci minus the mean-curvature bracket.
pub fn verify_t31(
    data: &SubmersionPointData,
    convention: SignConvention,
    tol_equality: f64,
) -> Result<InequalityVerdict, GeomError> {
    require_fiber_dim(data)?;
    let (lhs, fiber_independent) = ric_fiber(data, convention);
    let bracket = mean_bracket(data.l, data.oneill.mean_curvature_sq, data.oneill.norm_t_sq);
    let rhs = ric_vertical_n1(data, convention) - bracket;
    let slack = rhs - lhs;
    Ok(InequalityVerdict {
        theorem: "t31",
        point: data.point.clone(),
        lhs,
        rhs,
        slack,
        equality: equality_flag(slack, lhs, rhs, tol_equality),
        convention,
        diagnosis: Some(diagnose_slices(&tensor_slices(&data.oneill.t))),
        closed_form_residual: None,
        fiber_independent,
    })
}

/// Combined bound: vertical Ricci of V₁ plus horizontal Ricci of h₁ plus the
/// full mixed sum, bounded below by intrinsic fiber and base terms plus the
/// invariants of T and A.
pub fn verify_t41(
    data: &SubmersionPointData,
    convention: SignConvention,
    tol_equality: f64,
) -> Result<InequalityVerdict, GeomError> {
    require_fiber_dim(data)?;
    let lhs = ric_vertical_n1(data, convention)
        + ric_horizontal_n1(data, convention)
        + mixed_sum(data, convention);
    let rhs = combined_bound_rhs(data, convention);
    let slack = lhs - rhs;
    let (_, fiber_independent) = ric_fiber(data, convention);
    Ok(InequalityVerdict {
        theorem: "t41",
        point: data.point.clone(),
        lhs,
        rhs,
        slack,
        equality: equality_flag(slack, lhs, rhs, tol_equality),
        convention,
        diagnosis: Some(diagnose_slices(&tensor_slices(&data.oneill.t))),
        closed_form_residual: None,
        fiber_independent,
    })
}

/// Space-form class of a domain (or target) together with its constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpaceForm {
    Real { c: f64 },
    Complex { c: f64 },
}

/// Norms of the holomorphic projections used by the complex closed forms.
#[derive(Debug, Clone, Copy)]
pub struct ComplexNorms {
    /// ‖Qv₁‖²: vertical part of J·V₁.
    pub q_v1: f64,
    /// ‖Ph₁‖²: horizontal part of J·h₁.
    pub p_h1: f64,
    /// Σ_j ‖P V_j‖²: horizontal parts of J over the vertical frame.
    pub p_vertical: f64,
}

/// The closed-form partial Ricci values (vertical of V₁, horizontal of h₁,
/// full mixed sum) on a space form, in the modern sign convention.
pub fn spaceform_ricci_values(
    form: SpaceForm,
    l: usize,
    r: usize,
    complex_norms: Option<&ComplexNorms>,
) -> Result<(f64, f64, f64), GeomError> {
    match form {
        SpaceForm::Real { c } => {
            Ok((c * (l as f64 - 1.0), c * (r as f64 - 1.0), c * (l * r) as f64))
        }
        SpaceForm::Complex { c } => {
            let norms = complex_norms.ok_or(GeomError::Config {
                detail: "complex space-form closed forms need the holomorphic projection norms"
                    .to_string(),
            })?;
            Ok((
                c / 4.0 * (l as f64 - 1.0) + 0.75 * c * norms.q_v1,
                c / 4.0 * (r as f64 - 1.0) + 0.75 * c * norms.p_h1,
                c / 4.0 * (l * r) as f64 + 0.75 * c * norms.p_vertical,
            ))
        }
    }
}

/// Holomorphic projection norms of the split frame under the domain complex
/// structure.
pub fn complex_norms(
    data: &SubmersionPointData,
    jmat: &DMatrix<f64>,
) -> Result<ComplexNorms, GeomError> {
    let vertical: Vec<DVector<f64>> =
        data.split.vertical.iter().map(|v| v.val.clone()).collect();
    let (_, q_v1_vec) = manifold::holomorphic_split(jmat, &data.g1, &vertical[0], &vertical)?;
    let q_v1 = manifold::norm_sq(&data.g1, &q_v1_vec);
    let (p_h1_vec, _) =
        manifold::holomorphic_split(jmat, &data.g1, &data.split.horizontal[0].val, &vertical)?;
    let p_h1 = manifold::norm_sq(&data.g1, &p_h1_vec);
    let mut p_vertical = 0.0;
    for v in &vertical {
        let (p_vec, _) = manifold::holomorphic_split(jmat, &data.g1, v, &vertical)?;
        p_vertical += manifold::norm_sq(&data.g1, &p_vec);
    }
    Ok(ComplexNorms { q_v1, p_h1, p_vertical })
}

fn closed_form_residual(
    data: &SubmersionPointData,
    closed: (f64, f64, f64),
) -> f64 {
    let ric_v = ric_vertical_n1(data, SignConvention::Modern);
    let ric_h = ric_horizontal_n1(data, SignConvention::Modern);
    let mixed = mixed_sum(data, SignConvention::Modern);
    (closed.0 - ric_v)
        .abs()
        .max((closed.1 - ric_h).abs())
        .max((closed.2 - mixed).abs())
}

/// Space-form specialization of the two bounds: the curvature side is
/// replaced by its closed form (sign-adjusted to the active convention).
/// Returns the vertical-bound verdict and the combined-bound verdict.
pub fn verify_space_form_bounds(
    data: &SubmersionPointData,
    form: SpaceForm,
    complex_norms_in: Option<&ComplexNorms>,
    convention: SignConvention,
    tol_equality: f64,
) -> Result<(InequalityVerdict, InequalityVerdict), GeomError> {
    require_fiber_dim(data)?;
    let closed = spaceform_ricci_values(form, data.l, data.r, complex_norms_in)?;
    let residual = closed_form_residual(data, closed);
    let s = convention.sign();
    let (vertical_label, combined_label) = match form {
        SpaceForm::Real { .. } => ("t53-v", "t53-hv"),
        SpaceForm::Complex { .. } => ("t54-v", "t54-hv"),
    };

    let (fiber_ric, fiber_independent) = ric_fiber(data, convention);
    let bracket = mean_bracket(data.l, data.oneill.mean_curvature_sq, data.oneill.norm_t_sq);
    let v_rhs = s * closed.0 - bracket;
    let v_slack = v_rhs - fiber_ric;
    let vertical = InequalityVerdict {
        theorem: vertical_label,
        point: data.point.clone(),
        lhs: fiber_ric,
        rhs: v_rhs,
        slack: v_slack,
        equality: equality_flag(v_slack, fiber_ric, v_rhs, tol_equality),
        convention,
        diagnosis: Some(diagnose_slices(&tensor_slices(&data.oneill.t))),
        closed_form_residual: Some(residual),
        fiber_independent,
    };

    let hv_lhs = s * (closed.0 + closed.1 + closed.2);
    let hv_rhs = combined_bound_rhs(data, convention);
    let hv_slack = hv_lhs - hv_rhs;
    let combined = InequalityVerdict {
        theorem: combined_label,
        point: data.point.clone(),
        lhs: hv_lhs,
        rhs: hv_rhs,
        slack: hv_slack,
        equality: equality_flag(hv_slack, hv_lhs, hv_rhs, tol_equality),
        convention,
        diagnosis: Some(diagnose_slices(&tensor_slices(&data.oneill.t))),
        closed_form_residual: Some(residual),
        fiber_independent,
    };
    Ok((vertical, combined))
}
