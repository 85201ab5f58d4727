//! Riemannian maps: charts-to-charts maps of constant rank that are
//! isometries on the orthogonal complement of their kernel, their
//! normal-valued second fundamental form, the Gauss relation through the
//! map, and the horizontal partial-Ricci lower bounds.

use nalgebra::{DMatrix, DVector};

use crate::error::GeomError;
use crate::expr::{evaluate, EvalContext, Expression};
use crate::frame::{gram_schmidt, pointwise_kernel_split};
use crate::inequality::{
    diagnose_slices, equality_flag, mean_bracket, tensor_slices, InequalityVerdict,
};
use crate::manifold::{self, ChartManifold, SignConvention};
use crate::tensor::{Tensor3, Tensor4};
use crate::tol;

/// A map between charts, declared with the rank of its differential.
#[derive(Debug, Clone)]
pub struct RiemannianMap {
    domain: ChartManifold,
    target: ChartManifold,
    map: Vec<Expression>,
    rank: usize,
}

/// Everything a pointwise map verdict needs, evaluated once.
#[derive(Debug, Clone)]
pub struct MapPointData {
    pub point: Vec<f64>,
    pub image: Vec<f64>,
    /// Rank r of the differential.
    pub rank: usize,
    pub kernel_dim: usize,
    pub g1: DMatrix<f64>,
    pub g2: DMatrix<f64>,
    pub df: DMatrix<f64>,
    /// g₁-orthonormal basis of ker dF.
    pub kernel: Vec<DVector<f64>>,
    /// g₁-orthonormal basis of (ker dF)^⊥; index 0 is the distinguished h₁.
    pub horizontal: Vec<DVector<f64>>,
    /// Pushforwards F*h_i in target coordinates (g₂-orthonormal for a
    /// Riemannian map).
    pub pushed: Vec<DVector<f64>>,
    /// g₂-orthonormal basis of (range dF)^⊥.
    pub normal: Vec<DVector<f64>>,
    /// max |g₂(F*h_i, F*h_j) − δ_ij|.
    pub isometry_residual: f64,
    /// Components of the second fundamental form in the normal frame:
    /// b(i, j, α) = g₂(B(h_i, h_j), ν_α).
    pub b: Tensor3,
    /// Full vectors B(h_i, h_j) in target coordinates.
    pub b_vectors: Vec<Vec<DVector<f64>>>,
    pub b_symmetry_residual: f64,
    /// Worst g₂-norm of the range-component of any B(h_i, h_j); nonzero
    /// values mean the second fundamental form leaks out of the normal
    /// bundle.
    pub range_containment_residual: f64,
    /// Σ_i B(h_i, h_i) in target coordinates.
    pub trace_b: DVector<f64>,
    pub norm_trace_b_sq: f64,
    /// Σ_{ij} ‖B(h_i, h_j)‖²_{g₂} over the full vectors.
    pub norm_b_sq: f64,
    /// |full-vector norm² − normal-component norm²|: another view of range
    /// containment.
    pub b_component_residual: f64,
    /// Domain curvature contracted on the horizontal frame (modern sign).
    pub frame_curvature_modern: Tensor4,
    /// Target curvature contracted on the pushforwards (modern sign).
    pub target_curvature_modern: Tensor4,
}

impl RiemannianMap {
    pub fn new(
        domain: ChartManifold,
        target: ChartManifold,
        map: Vec<Expression>,
        rank: usize,
    ) -> Result<Self, GeomError> {
        if map.len() != target.dim() {
            return Err(GeomError::BadDimension {
                what: "map components",
                detail: format!("target dim {} but {} components", target.dim(), map.len()),
            });
        }
        for (k, component) in map.iter().enumerate() {
            if let Some(&v) = component.free_vars().iter().max() {
                if v >= domain.dim() {
                    return Err(GeomError::BadDimension {
                        what: "map component variables",
                        detail: format!(
                            "component {k} uses x{} but the domain has dimension {}",
                            v + 1,
                            domain.dim()
                        ),
                    });
                }
            }
        }
        if rank == 0 || rank > domain.dim() || rank > target.dim() {
            return Err(GeomError::BadDimension {
                what: "map rank",
                detail: format!(
                    "rank {rank} with domain dim {} and target dim {}",
                    domain.dim(),
                    target.dim()
                ),
            });
        }
        Ok(Self { domain, target, map, rank })
    }

    pub fn domain(&self) -> &ChartManifold {
        &self.domain
    }

    pub fn target(&self) -> &ChartManifold {
        &self.target
    }

    pub fn map(&self) -> &[Expression] {
        &self.map
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Image point F(p) in the target chart.
    pub fn map_point(&self, p: &[f64]) -> Result<Vec<f64>, GeomError> {
        let ctx = EvalContext::value(p);
        let mut out = Vec::with_capacity(self.map.len());
        for component in &self.map {
            out.push(evaluate(component, &ctx)?.value);
        }
        Ok(out)
    }

    /// Differential dF as an n₂×n₁ matrix of values.
    pub fn differential_at(&self, p: &[f64]) -> Result<DMatrix<f64>, GeomError> {
        let n = self.domain.dim();
        let m = self.target.dim();
        let ctx = EvalContext::gradient(p);
        let mut df = DMatrix::zeros(m, n);
        for (c, component) in self.map.iter().enumerate() {
            let jet = evaluate(component, &ctx)?;
            let grad = jet.gradient.as_ref().expect("gradient mode");
            for a in 0..n {
                df[(c, a)] = grad[a];
            }
        }
        Ok(df)
    }

    /// Coordinate Hessians ∂_a∂_b F^c, one n₁×n₁ matrix per component.
    fn hessians_at(&self, p: &[f64]) -> Result<Vec<DMatrix<f64>>, GeomError> {
        let ctx = EvalContext::hessian(p);
        let mut out = Vec::with_capacity(self.map.len());
        for component in &self.map {
            let jet = evaluate(component, &ctx)?;
            out.push(jet.hessian.as_ref().expect("hessian mode").clone());
        }
        Ok(out)
    }

    /// Evaluate the full pointwise package. Optional seeds pick the
    /// horizontal frame (they are g₁-projected off the kernel and
    /// orthonormalized); without seeds the frame comes from the singular
    /// value decomposition of dF.
    pub fn evaluate_point(
        &self,
        p: &[f64],
        horizontal_seeds: Option<&[DVector<f64>]>,
    ) -> Result<MapPointData, GeomError> {
        let n1 = self.domain.dim();
        let n2 = self.target.dim();
        let r = self.rank;

        let g1 = self.domain.metric_at(p)?;
        let image = self.map_point(p)?;
        self.target.check_in_domain(&image)?;
        let g2 = self.target.metric_at(&image)?;
        let df = self.differential_at(p)?;

        let (kernel, default_horizontal) = pointwise_kernel_split(&g1, &df, r)?;
        let horizontal = match horizontal_seeds {
            None => default_horizontal,
            Some(seeds) => {
                if seeds.len() != r {
                    return Err(GeomError::Config {
                        detail: format!("{} horizontal seeds for rank {r}", seeds.len()),
                    });
                }
                let projected: Vec<DVector<f64>> = seeds
                    .iter()
                    .map(|v| {
                        let mut out = v.clone();
                        for k in &kernel {
                            let coeff = (v.transpose() * &g1 * k)[(0, 0)];
                            out -= coeff * k;
                        }
                        out
                    })
                    .collect();
                gram_schmidt(&g1, &projected, r)?
            }
        };

        let pushed: Vec<DVector<f64>> = horizontal.iter().map(|h| &df * h).collect();
        let mut isometry_residual = 0.0_f64;
        for i in 0..r {
            for j in 0..r {
                let inner = (pushed[i].transpose() * &g2 * &pushed[j])[(0, 0)];
                let expect = if i == j { 1.0 } else { 0.0 };
                isometry_residual = isometry_residual.max((inner - expect).abs());
            }
        }
        if isometry_residual > tol::ISOMETRY {
            return Err(GeomError::IsometryViolation { residual: isometry_residual });
        }

        // Deterministic g₂-orthonormal completion: pushforwards first, then
        // the target coordinate basis.
        let mut completion_candidates = pushed.clone();
        for c in 0..n2 {
            let mut e = DVector::zeros(n2);
            e[c] = 1.0;
            completion_candidates.push(e);
        }
        let full_frame = gram_schmidt(&g2, &completion_candidates, n2)?;
        let normal: Vec<DVector<f64>> = full_frame[r..].to_vec();

        // Second fundamental form of the map, tensorially from exact jets:
        // B(h_i, h_j)^c = h_i^a h_j^b (∂_a∂_b F^c
        //                 + Γ₂^c_{de} ∂_aF^d ∂_bF^e − Γ₁^k_{ab} ∂_kF^c).
        let gamma1 = self.domain.christoffel_at(p)?;
        let gamma2 = self.target.christoffel_at(&image)?;
        let hessians = self.hessians_at(p)?;
        let mut b_raw = vec![vec![DVector::<f64>::zeros(n2); r]; r];
        for i in 0..r {
            for j in 0..r {
                let x = &horizontal[i];
                let y = &horizontal[j];
                // Γ₁-contraction w^k = Σ_{ab} x^a y^b Γ₁^k_{ab}.
                let mut w = DVector::<f64>::zeros(n1);
                for k in 0..n1 {
                    let mut acc = 0.0;
                    for a in 0..n1 {
                        if x[a] == 0.0 {
                            continue;
                        }
                        for bb in 0..n1 {
                            acc += x[a] * y[bb] * gamma1.at(k, a, bb);
                        }
                    }
                    w[k] = acc;
                }
                let pulled = &df * w;
                let mut out = DVector::<f64>::zeros(n2);
                for c in 0..n2 {
                    let mut acc = (x.transpose() * &hessians[c] * y)[(0, 0)];
                    for d in 0..n2 {
                        if pushed[i][d] == 0.0 {
                            continue;
                        }
                        for e in 0..n2 {
                            acc += gamma2.at(c, d, e) * pushed[i][d] * pushed[j][e];
                        }
                    }
                    out[c] = acc - pulled[c];
                }
                b_raw[i][j] = out;
            }
        }
        let mut b_symmetry_residual = 0.0_f64;
        let mut b_vectors = vec![vec![DVector::<f64>::zeros(n2); r]; r];
        for i in 0..r {
            for j in i..r {
                let diff = (&b_raw[i][j] - &b_raw[j][i]).abs().max();
                b_symmetry_residual = b_symmetry_residual.max(diff);
                let sym = (&b_raw[i][j] + &b_raw[j][i]) * 0.5;
                b_vectors[i][j] = sym.clone();
                b_vectors[j][i] = sym;
            }
        }

        let mut range_containment_residual = 0.0_f64;
        let mut b = Tensor3::zeros(r, r, n2 - r);
        let mut norm_b_sq = 0.0;
        let mut component_sq = 0.0;
        for i in 0..r {
            for j in 0..r {
                let vec = &b_vectors[i][j];
                let mut range_part = DVector::<f64>::zeros(n2);
                for pk in &pushed {
                    let coeff = (vec.transpose() * &g2 * pk)[(0, 0)];
                    range_part += coeff * pk;
                }
                range_containment_residual =
                    range_containment_residual.max(manifold::norm_sq(&g2, &range_part).sqrt());
                for (al, nu) in normal.iter().enumerate() {
                    let comp = (vec.transpose() * &g2 * nu)[(0, 0)];
                    b.set(i, j, al, comp);
                    component_sq += comp * comp;
                }
                norm_b_sq += manifold::norm_sq(&g2, vec);
            }
        }
        if range_containment_residual > tol::RANGE_CONTAINMENT_MAX {
            return Err(GeomError::RangeContainment { residual: range_containment_residual });
        }

        let mut trace_b = DVector::<f64>::zeros(n2);
        for i in 0..r {
            trace_b += &b_vectors[i][i];
        }
        let norm_trace_b_sq = manifold::norm_sq(&g2, &trace_b);
        let b_component_residual = (norm_b_sq - component_sq).abs();

        let frame_curvature_modern =
            self.domain.riemann_at(p, SignConvention::Modern)?.contract_frame(&horizontal);
        let target_curvature_modern =
            self.target.riemann_at(&image, SignConvention::Modern)?.contract_frame(&pushed);

        Ok(MapPointData {
            point: p.to_vec(),
            image,
            rank: r,
            kernel_dim: n1 - r,
            g1,
            g2,
            df,
            kernel,
            horizontal,
            pushed,
            normal,
            isometry_residual,
            b,
            b_vectors,
            b_symmetry_residual,
            range_containment_residual,
            trace_b,
            norm_trace_b_sq,
            norm_b_sq,
            b_component_residual,
            frame_curvature_modern,
            target_curvature_modern,
        })
    }
}

/// Gauss relation through the map, worst case over horizontal quadruples:
/// R^{N₂}(F*h_i, F*h_j, F*h_k, F*h_l) − R^{N₁}(h_i, h_j, h_k, h_l)
/// − g₂(B_ik, B_jl) + g₂(B_il, B_jk), with both curvatures read in the
/// stated convention (the B-terms pin the sign, so the residual
/// discriminates conventions whenever B ≠ 0 against curvature).
pub fn audit_map_gauss(data: &MapPointData, convention: SignConvention) -> f64 {
    let s = convention.sign();
    let r = data.rank;
    let g2 = &data.g2;
    let inner = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * g2 * b)[(0, 0)];
    let mut worst = 0.0_f64;
    for i in 0..r {
        for j in 0..r {
            for k in 0..r {
                for l in 0..r {
                    let lhs = s * data.target_curvature_modern.at(i, j, k, l);
                    let dom = s * data.frame_curvature_modern.at(i, j, k, l);
                    let bterm = inner(&data.b_vectors[i][k], &data.b_vectors[j][l])
                        - inner(&data.b_vectors[i][l], &data.b_vectors[j][k]);
                    worst = worst.max((lhs - dom - bterm).abs());
                }
            }
        }
    }
    worst
}

fn ric_horizontal(data: &MapPointData, convention: SignConvention) -> f64 {
    let s = convention.sign();
    (0..data.rank).map(|j| s * data.frame_curvature_modern.at(0, j, j, 0)).sum()
}

fn ric_range(data: &MapPointData, convention: SignConvention) -> f64 {
    let s = convention.sign();
    (0..data.rank).map(|j| s * data.target_curvature_modern.at(0, j, j, 0)).sum()
}

/// Traced Gauss relation: Ric^H(h₁) − Ric^R(F*h₁)
/// − Σ_α (B₁₁^α Σ_j B_jj^α − Σ_j (B_1j^α)²).
pub fn audit_horizontal_ricci_split(data: &MapPointData, convention: SignConvention) -> f64 {
    let r = data.rank;
    let m = data.b.d2;
    let mut bterm = 0.0;
    for al in 0..m {
        let tr: f64 = (0..r).map(|j| data.b.at(j, j, al)).sum();
        let row: f64 = (0..r).map(|j| data.b.at(0, j, al) * data.b.at(0, j, al)).sum();
        bterm += data.b.at(0, 0, al) * tr - row;
    }
    (ric_horizontal(data, convention) - ric_range(data, convention) - bterm).abs()
}

fn require_rank(data: &MapPointData) -> Result<(), GeomError> {
    if data.rank < 2 {
        return Err(GeomError::Config {
            detail: format!(
                "the horizontal Ricci bound needs map rank at least 2, got {}",
                data.rank
            ),
        });
    }
    Ok(())
}

fn map_bound_verdict(
    theorem: &'static str,
    data: &MapPointData,
    ric_range_value: f64,
    closed_form_residual: Option<f64>,
    convention: SignConvention,
    tol_equality: f64,
) -> InequalityVerdict {
    let r = data.rank;
    let lhs = ric_horizontal(data, convention);
    let bracket = mean_bracket(r, data.norm_trace_b_sq / (r * r) as f64, data.norm_b_sq);
    let rhs = ric_range_value + bracket;
    let slack = lhs - rhs;
    InequalityVerdict {
        theorem,
        point: data.point.clone(),
        lhs,
        rhs,
        slack,
        equality: equality_flag(slack, lhs, rhs, tol_equality),
        convention,
        diagnosis: Some(diagnose_slices(&tensor_slices(&data.b))),
        closed_form_residual,
        fiber_independent: true,
    }
}

/// Horizontal partial-Ricci bound for a Riemannian map: Ric^H(h₁) is bounded
/// below by the target partial Ricci of F*h₁ plus the mean-curvature bracket
/// of the second fundamental form.
pub fn verify_t62(
    data: &MapPointData,
    convention: SignConvention,
    tol_equality: f64,
) -> Result<InequalityVerdict, GeomError> {
    require_rank(data)?;
    Ok(map_bound_verdict(
        "t62",
        data,
        ric_range(data, convention),
        None,
        convention,
        tol_equality,
    ))
}

/// Map bound into a real space form of constant c: the target partial Ricci
/// is replaced by its closed form c(r−1).
pub fn verify_t65(
    data: &MapPointData,
    c: f64,
    convention: SignConvention,
    tol_equality: f64,
) -> Result<InequalityVerdict, GeomError> {
    require_rank(data)?;
    let closed_modern = c * (data.rank as f64 - 1.0);
    let residual = (closed_modern - ric_range(data, SignConvention::Modern)).abs();
    Ok(map_bound_verdict(
        "t65",
        data,
        convention.sign() * closed_modern,
        Some(residual),
        convention,
        tol_equality,
    ))
}

/// Map bound into a complex space form of constant holomorphic sectional
/// curvature c: the closed form needs the squared norm of the range-part of
/// J₂ F*h₁.
pub fn verify_t66(
    data: &MapPointData,
    jmat2: &DMatrix<f64>,
    c: f64,
    convention: SignConvention,
    tol_equality: f64,
) -> Result<InequalityVerdict, GeomError> {
    require_rank(data)?;
    let (_, in_range) =
        manifold::holomorphic_split(jmat2, &data.g2, &data.pushed[0], &data.pushed)?;
    let p_norm = manifold::norm_sq(&data.g2, &in_range);
    let closed_modern = c / 4.0 * (data.rank as f64 - 1.0) + 0.75 * c * p_norm;
    let residual = (closed_modern - ric_range(data, SignConvention::Modern)).abs();
    Ok(map_bound_verdict(
        "t66",
        data,
        convention.sign() * closed_modern,
        Some(residual),
        convention,
        tol_equality,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{build, parse};
    use approx::assert_abs_diff_eq;

    fn expr(text: &str) -> Expression {
        parse(text).unwrap()
    }

    fn axis(n: usize, i: usize) -> DVector<f64> {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        e
    }

    /// (x, y, z) ↦ (x, y, 0, 0) into flat complex ℝ⁴: totally geodesic.
    fn linear_map() -> RiemannianMap {
        let domain = ChartManifold::euclidean(3);
        let target = ChartManifold::euclidean_complex(2);
        RiemannianMap::new(
            domain,
            target,
            vec![expr("x1"), expr("x2"), build::lit(0.0), build::lit(0.0)],
            2,
        )
        .unwrap()
    }

    /// (x, y, z) ↦ (cos x, sin x, y): rolls a plane onto a cylinder,
    /// one curl direction, flat on both sides.
    fn cylinder_map() -> RiemannianMap {
        let domain = ChartManifold::euclidean(3);
        let target = ChartManifold::euclidean(3);
        RiemannianMap::new(
            domain,
            target,
            vec![expr("cos(x1)"), expr("sin(x1)"), expr("x2")],
            2,
        )
        .unwrap()
    }

    /// Minimal flat torus inside the unit 3-sphere, composed with the
    /// stereographic chart of the sphere; constant-z planes map to it
    /// isometrically.
    fn clifford_torus_map() -> RiemannianMap {
        let domain = ChartManifold::euclidean(3);
        let target = ChartManifold::stereographic_sphere(3, 1.0);
        RiemannianMap::new(
            domain,
            target,
            vec![
                expr("sin(sqrt(2)*x1) / (sqrt(2) + cos(sqrt(2)*x1))"),
                expr("cos(sqrt(2)*x2) / (sqrt(2) + cos(sqrt(2)*x1))"),
                expr("sin(sqrt(2)*x2) / (sqrt(2) + cos(sqrt(2)*x1))"),
            ],
            2,
        )
        .unwrap()
    }

    #[test]
    fn linear_map_is_totally_geodesic() {
        let map = linear_map();
        let data = map.evaluate_point(&[0.3, -0.7, 1.1], None).unwrap();
        assert_eq!(data.rank, 2);
        assert_eq!(data.kernel_dim, 1);
        assert!(data.isometry_residual < 1e-12);
        assert!(data.norm_b_sq < 1e-20);
        assert!(data.range_containment_residual < 1e-12);
        let v = verify_t62(&data, SignConvention::Modern, tol::DEFAULT_TOL_EQUALITY).unwrap();
        assert!(v.slack.abs() <= 1e-12);
        assert!(v.equality);
        let v65 = verify_t65(&data, 0.0, SignConvention::Modern, tol::DEFAULT_TOL_EQUALITY)
            .unwrap();
        assert_abs_diff_eq!(v65.slack, v.slack, epsilon = 1e-12);
        assert!(v65.closed_form_residual.unwrap() <= 1e-12);
        let jmat = map.target().complex_structure().unwrap().clone();
        let v66 = verify_t66(&data, &jmat, 0.0, SignConvention::Modern, tol::DEFAULT_TOL_EQUALITY)
            .unwrap();
        assert_abs_diff_eq!(v66.slack, v.slack, epsilon = 1e-12);
        assert!(audit_map_gauss(&data, SignConvention::Modern) <= 1e-12);
        assert!(audit_horizontal_ricci_split(&data, SignConvention::Modern) <= 1e-12);
    }

    #[test]
    fn cylinder_map_curls_exactly_one_direction() {
        let map = cylinder_map();
        let seeds = [axis(3, 0), axis(3, 1)];
        let data = map.evaluate_point(&[0.4, -0.2, 0.9], Some(&seeds)).unwrap();
        assert!(data.isometry_residual < 1e-12);
        assert!(data.b_symmetry_residual < 1e-12);
        // Single normal direction ±(cos x, sin x, 0); the only curvature of
        // the rolled plane is along the curl axis.
        assert_eq!(data.normal.len(), 1);
        assert_abs_diff_eq!(data.b.at(0, 0, 0).abs(), 1.0, epsilon = 1e-10);
        assert!(data.b.at(0, 1, 0).abs() < 1e-10);
        assert!(data.b.at(1, 1, 0).abs() < 1e-10);
        assert_abs_diff_eq!(data.norm_trace_b_sq, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(data.norm_b_sq, 1.0, epsilon = 1e-10);
        assert!(data.b_component_residual < 1e-10);
        assert!(audit_map_gauss(&data, SignConvention::Modern) <= 1e-8);
        assert!(audit_horizontal_ricci_split(&data, SignConvention::Modern) <= 1e-8);
        let v = verify_t62(&data, SignConvention::Modern, tol::DEFAULT_TOL_EQUALITY).unwrap();
        assert!(v.slack.abs() <= 1e-8, "slack {}", v.slack);
        assert!(v.equality);
    }

    #[test]
    fn clifford_torus_map_reaches_the_sphere_bound() {
        let map = clifford_torus_map();
        let seeds = [axis(3, 0), axis(3, 1)];
        let data = map.evaluate_point(&[0.3, 0.5, -1.0], Some(&seeds)).unwrap();
        assert!(data.isometry_residual < 1e-9, "isometry {}", data.isometry_residual);
        // Trace-free second fundamental form of unit principal curvatures.
        assert_abs_diff_eq!(data.b.at(0, 0, 0).abs(), 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(data.b.at(1, 1, 0).abs(), 1.0, epsilon = 1e-7);
        assert!(data.b.at(0, 1, 0).abs() < 1e-7);
        assert!(data.norm_trace_b_sq < 1e-12);
        assert_abs_diff_eq!(data.norm_b_sq, 2.0, epsilon = 1e-7);
        assert_abs_diff_eq!(
            ric_range(&data, SignConvention::Modern),
            1.0,
            epsilon = 1e-6
        );
        // The Gauss relation picks out the modern convention.
        assert!(audit_map_gauss(&data, SignConvention::Modern) <= 1e-6);
        assert!(audit_map_gauss(&data, SignConvention::ONeill) > 0.5);
        assert!(audit_horizontal_ricci_split(&data, SignConvention::Modern) <= 1e-6);
        assert!(audit_horizontal_ricci_split(&data, SignConvention::ONeill) > 0.5);
        let v = verify_t62(&data, SignConvention::Modern, tol::DEFAULT_TOL_EQUALITY).unwrap();
        assert!(v.slack.abs() <= 1e-6, "slack {}", v.slack);
        assert!(v.equality);
        let d = v.diagnosis.unwrap();
        // λ ≈ −μ makes the denominator of the ratio vanish; the value blows
        // up (or is ±∞ exactly) without poisoning the spread.
        assert!(!d.ratios[0].is_nan());
        assert!(d.ratios[0].is_infinite() || d.ratios[0].abs() > 1e5);
        assert!(!d.ratio_spread.is_nan());
        let v65 = verify_t65(&data, 1.0, SignConvention::Modern, tol::DEFAULT_TOL_EQUALITY)
            .unwrap();
        assert!(v65.closed_form_residual.unwrap() <= 1e-6);
        assert_abs_diff_eq!(v65.slack, v.slack, epsilon = 1e-6);
    }

    #[test]
    fn default_frame_matches_seeded_invariants() {
        let map = clifford_torus_map();
        let p = [0.3, 0.5, -1.0];
        let seeded =
            map.evaluate_point(&p, Some(&[axis(3, 0), axis(3, 1)])).unwrap();
        let unseeded = map.evaluate_point(&p, None).unwrap();
        assert_abs_diff_eq!(seeded.norm_b_sq, unseeded.norm_b_sq, epsilon = 1e-9);
        assert_abs_diff_eq!(
            seeded.norm_trace_b_sq,
            unseeded.norm_trace_b_sq,
            epsilon = 1e-9
        );
        let v_seeded =
            verify_t62(&seeded, SignConvention::Modern, tol::DEFAULT_TOL_EQUALITY).unwrap();
        let v_unseeded =
            verify_t62(&unseeded, SignConvention::Modern, tol::DEFAULT_TOL_EQUALITY).unwrap();
        assert_abs_diff_eq!(v_seeded.slack, v_unseeded.slack, epsilon = 1e-6);
    }

    #[test]
    fn non_isometric_map_is_rejected() {
        let domain = ChartManifold::euclidean(2);
        let target = ChartManifold::euclidean(1);
        let map =
            RiemannianMap::new(domain, target, vec![expr("2*x1")], 1).unwrap();
        assert!(matches!(
            map.evaluate_point(&[0.1, 0.2], None),
            Err(GeomError::IsometryViolation { .. })
        ));
    }

    #[test]
    fn rank_one_maps_are_rejected_by_the_bound() {
        let domain = ChartManifold::euclidean(2);
        let target = ChartManifold::euclidean(1);
        let map = RiemannianMap::new(domain, target, vec![expr("x1")], 1).unwrap();
        let data = map.evaluate_point(&[0.1, 0.2], None).unwrap();
        assert!(matches!(
            verify_t62(&data, SignConvention::Modern, 1e-8),
            Err(GeomError::Config { .. })
        ));
    }

    #[test]
    fn declared_rank_must_match_the_differential() {
        let domain = ChartManifold::euclidean(3);
        let target = ChartManifold::euclidean(3);
        let map = RiemannianMap::new(
            domain,
            target,
            vec![expr("cos(x1)"), expr("sin(x1)"), expr("x2")],
            3,
        )
        .unwrap();
        assert!(matches!(
            map.evaluate_point(&[0.4, -0.2, 0.9], None),
            Err(GeomError::RankMismatch { .. })
        ));
    }

    #[test]
    fn component_counts_are_validated() {
        let domain = ChartManifold::euclidean(2);
        let target = ChartManifold::euclidean(2);
        assert!(matches!(
            RiemannianMap::new(domain.clone(), target.clone(), vec![expr("x1")], 1),
            Err(GeomError::BadDimension { .. })
        ));
        assert!(matches!(
            RiemannianMap::new(domain, target, vec![expr("x1"), expr("x3")], 1),
            Err(GeomError::BadDimension { .. })
        ));
    }
}
