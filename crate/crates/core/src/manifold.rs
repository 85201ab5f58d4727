//! Chart-based Riemannian manifolds: metric evaluation, Christoffel symbols,
//! the Riemann tensor, partial Ricci traces, space-form validators, and
//! complex-structure utilities.
//!
//! All derivatives of the metric come from exact second-order jets of the
//! entry expressions — there is no finite differencing anywhere in the
//! curvature path.

use nalgebra::{DMatrix, DVector};

use crate::error::GeomError;
use crate::expr::{self, build, evaluate, EvalContext, Expression};
use crate::tensor::{Tensor3, Tensor4};
use crate::tol;

/// Sign convention for the 4-argument curvature tensor.
///
/// `Modern` is R(X,Y,Z,W) = g(∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z, W), under
/// which a round sphere has R(X,Y,Y,X) > 0. `ONeill` is its global negation,
/// common in the submersion literature. Everything is computed internally in
/// the modern convention; `ONeill` flips the sign at the presentation layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignConvention {
    Modern,
    ONeill,
}

impl SignConvention {
    /// Multiplier applied to modern-convention curvature values.
    pub fn sign(self) -> f64 {
        match self {
            SignConvention::Modern => 1.0,
            SignConvention::ONeill => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SignConvention::Modern => "modern",
            SignConvention::ONeill => "oneill",
        }
    }
}

/// Metric value together with its exact first and second coordinate
/// derivatives at a point.
#[derive(Debug, Clone)]
pub struct MetricJets {
    pub g: DMatrix<f64>,
    pub ginv: DMatrix<f64>,
    /// dg[k](i,j) = ∂_k g_ij
    pub dg: Tensor3,
    /// d2g[(k,l)](i,j) = ∂_k ∂_l g_ij
    pub d2g: Tensor4,
}

/// Fully lowered curvature tensor R_{ijkl} at a point, under a stated sign
/// convention.
#[derive(Debug, Clone)]
pub struct CurvatureTensor {
    pub point: Vec<f64>,
    pub dim: usize,
    pub convention: SignConvention,
    /// components.at(i,j,k,l) = R(∂_i, ∂_j, ∂_k, ∂_l)
    pub components: Tensor4,
}

impl CurvatureTensor {
    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.components.at(i, j, k, l)
    }

    /// R(a, b, c, d) for arbitrary chart vectors.
    pub fn contract(&self, a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>, d: &DVector<f64>) -> f64 {
        let n = self.dim;
        let mut total = 0.0;
        for i in 0..n {
            if a[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                if b[j] == 0.0 {
                    continue;
                }
                for k in 0..n {
                    if c[k] == 0.0 {
                        continue;
                    }
                    for l in 0..n {
                        total += self.components.at(i, j, k, l) * a[i] * b[j] * c[k] * d[l];
                    }
                }
            }
        }
        total
    }

    /// All curvature values over an ordered list of chart vectors:
    /// `out.at(a, b, c, d) = R(basis[a], basis[b], basis[c], basis[d])`.
    pub fn contract_frame(&self, basis: &[DVector<f64>]) -> Tensor4 {
        let m = basis.len();
        let mut out = Tensor4::zeros(m, m, m, m);
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for d in 0..m {
                        out.set(a, b, c, d, self.contract(&basis[a], &basis[b], &basis[c], &basis[d]));
                    }
                }
            }
        }
        out
    }

    /// Largest violation of the algebraic curvature symmetries, relative to
    /// the largest component (0 for an identically flat tensor).
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.dim;
        let r = &self.components;
        let scale = r.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = r.at(i, j, k, l);
                        worst = worst.max((v + r.at(j, i, k, l)).abs());
                        worst = worst.max((v + r.at(i, j, l, k)).abs());
                        worst = worst.max((v - r.at(k, l, i, j)).abs());
                        let bianchi = v + r.at(j, k, i, l) + r.at(k, i, j, l);
                        worst = worst.max(bianchi.abs());
                    }
                }
            }
        }
        worst / scale
    }

    /// Sectional curvature of the plane spanned by u, v.
    pub fn sectional(&self, g: &DMatrix<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let guu = (u.transpose() * g * u)[(0, 0)];
        let gvv = (v.transpose() * g * v)[(0, 0)];
        let guv = (u.transpose() * g * v)[(0, 0)];
        self.contract(u, v, v, u) / (guu * gvv - guv * guv)
    }
}

/// A Riemannian manifold presented in a single coordinate chart: symmetric
/// metric entry expressions over a box domain, plus an optional constant
/// complex structure.
#[derive(Debug, Clone)]
pub struct ChartManifold {
    dim: usize,
    /// Upper triangle (i <= j), row-major.
    metric_upper: Vec<Expression>,
    domain: Vec<[f64; 2]>,
    complex_structure: Option<DMatrix<f64>>,
}

fn triangle_index(dim: usize, i: usize, j: usize) -> usize {
    // Row-major upper triangle: (0,0),(0,1),...,(0,n-1),(1,1),...
    debug_assert!(i <= j && j < dim);
    i * dim - i * (i + 1) / 2 + j
}

impl ChartManifold {
    /// Build a chart from the upper-triangle metric entries (row-major,
    /// `dim*(dim+1)/2` expressions; the lower triangle is implied).
    pub fn new(
        dim: usize,
        metric_upper: Vec<Expression>,
        domain: Vec<[f64; 2]>,
        complex_structure: Option<DMatrix<f64>>,
    ) -> Result<Self, GeomError> {
        if dim == 0 || dim > expr::MAX_VARS {
            return Err(GeomError::BadDimension {
                what: "chart",
                detail: format!("dimension {dim} outside 1..={}", expr::MAX_VARS),
            });
        }
        let expected = dim * (dim + 1) / 2;
        if metric_upper.len() != expected {
            return Err(GeomError::BadDimension {
                what: "metric",
                detail: format!(
                    "expected {expected} upper-triangle entries for dimension {dim}, got {}",
                    metric_upper.len()
                ),
            });
        }
        if domain.len() != dim {
            return Err(GeomError::BadDimension {
                what: "domain",
                detail: format!("expected {dim} coordinate ranges, got {}", domain.len()),
            });
        }
        for (axis, range) in domain.iter().enumerate() {
            if !(range[0] < range[1]) {
                return Err(GeomError::BadDimension {
                    what: "domain",
                    detail: format!(
                        "axis {} has empty range [{}, {}]",
                        axis + 1,
                        range[0],
                        range[1]
                    ),
                });
            }
        }
        for entry in &metric_upper {
            if let Some(&max_var) = entry.free_vars().iter().next_back() {
                if max_var >= dim {
                    return Err(GeomError::BadDimension {
                        what: "metric",
                        detail: format!(
                            "entry `{entry}` references x{} on a {dim}-dimensional chart",
                            max_var + 1
                        ),
                    });
                }
            }
        }
        if let Some(j) = &complex_structure {
            if j.nrows() != dim || j.ncols() != dim {
                return Err(GeomError::ComplexStructureInvalid {
                    detail: format!("J is {}x{}, chart dimension is {dim}", j.nrows(), j.ncols()),
                });
            }
            let jj = j * j;
            let residual = (&jj + DMatrix::<f64>::identity(dim, dim)).abs().max();
            if residual != 0.0 {
                return Err(GeomError::ComplexStructureInvalid {
                    detail: format!("J^2 differs from -identity by {residual:e}"),
                });
            }
        }
        Ok(ChartManifold { dim, metric_upper, domain, complex_structure })
    }

    /// Flat Euclidean space of the given dimension.
    pub fn euclidean(dim: usize) -> Self {
        let mut entries = Vec::new();
        for i in 0..dim {
            for j in i..dim {
                entries.push(build::lit(if i == j { 1.0 } else { 0.0 }));
            }
        }
        ChartManifold::new(dim, entries, vec![[-10.0, 10.0]; dim], None)
            .expect("euclidean chart is well-formed")
    }

    /// Flat even-dimensional space carrying the standard complex structure
    /// (J e_{2a-1} = e_{2a}).
    pub fn euclidean_complex(half_dim: usize) -> Self {
        let dim = 2 * half_dim;
        let mut flat = ChartManifold::euclidean(dim);
        flat.complex_structure = Some(standard_complex_structure(half_dim));
        flat
    }

    /// Constant-curvature space form of curvature `c` in the conformal
    /// (stereographic / Poincaré-ball) chart: g = 4/(1 + c|x|^2)^2 δ.
    pub fn stereographic_sphere(dim: usize, c: f64) -> Self {
        let r2 = build::sum((0..dim).map(|i| build::powi(build::var(i), 2)).collect());
        let denom = build::powi(build::add(build::lit(1.0), build::mul(build::lit(c), r2)), 2);
        let conformal = build::div(build::lit(4.0), denom);
        let mut entries = Vec::new();
        for i in 0..dim {
            for j in i..dim {
                entries.push(if i == j { conformal.clone() } else { build::lit(0.0) });
            }
        }
        // For c < 0 the chart degenerates at |x| = 1/sqrt(-c); stay well inside.
        let half = if c < 0.0 { 0.5 / ((-c) * dim as f64).sqrt() } else { 2.0 };
        ChartManifold::new(dim, entries, vec![[-half, half]; dim], None)
            .expect("stereographic chart is well-formed")
    }

    /// Complex projective space CP^n in an affine holomorphic chart, scaled
    /// to constant holomorphic sectional curvature `c` (> 0), with the
    /// standard constant complex structure.
    ///
    /// Writing p for the position vector, q = Jp and D = 1 + |p|^2, the real
    /// metric is g_{μν} = (4/c) [ δ_{μν}/D − (p_μ p_ν + q_μ q_ν)/D^2 ].
    pub fn fubini_study(n_complex: usize, c: f64) -> Result<Self, GeomError> {
        if c <= 0.0 {
            return Err(GeomError::BadDimension {
                what: "fubini_study",
                detail: format!("holomorphic curvature must be positive, got {c}"),
            });
        }
        let dim = 2 * n_complex;
        let j = standard_complex_structure(n_complex);
        let d = build::add(
            build::lit(1.0),
            build::sum((0..dim).map(|i| build::powi(build::var(i), 2)).collect()),
        );
        // Component expressions of p and q = Jp in chart coordinates.
        let p = |mu: usize| build::var(mu);
        let q = |mu: usize| -> Expression {
            // (Jp)_mu: pairs (2a, 2a+1) with J e_{2a} = e_{2a+1}.
            if mu % 2 == 0 {
                build::neg(build::var(mu + 1))
            } else {
                build::var(mu - 1)
            }
        };
        let scale = 4.0 / c;
        let mut entries = Vec::new();
        for mu in 0..dim {
            for nu in mu..dim {
                let cross = build::div(
                    build::add(
                        build::mul(p(mu), p(nu)),
                        build::mul(q(mu), q(nu)),
                    ),
                    build::powi(d.clone(), 2),
                );
                let body = if mu == nu {
                    build::sub(build::div(build::lit(1.0), d.clone()), cross)
                } else {
                    build::neg(cross)
                };
                entries.push(build::mul(build::lit(scale), body));
            }
        }
        ChartManifold::new(dim, entries, vec![[-2.0, 2.0]; dim], Some(j))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &[[f64; 2]] {
        &self.domain
    }

    pub fn complex_structure(&self) -> Option<&DMatrix<f64>> {
        self.complex_structure.as_ref()
    }

    pub fn metric_expression(&self, i: usize, j: usize) -> &Expression {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        &self.metric_upper[triangle_index(self.dim, i, j)]
    }

    pub fn check_in_domain(&self, p: &[f64]) -> Result<(), GeomError> {
        if p.len() != self.dim {
            return Err(GeomError::BadDimension {
                what: "point",
                detail: format!("expected {} coordinates, got {}", self.dim, p.len()),
            });
        }
        for (axis, (&value, range)) in p.iter().zip(&self.domain).enumerate() {
            if value < range[0] || value > range[1] {
                return Err(GeomError::PointOutsideDomain {
                    axis,
                    value,
                    lo: range[0],
                    hi: range[1],
                });
            }
        }
        Ok(())
    }

    /// Metric matrix at a point, checked symmetric positive definite.
    pub fn metric_at(&self, p: &[f64]) -> Result<DMatrix<f64>, GeomError> {
        self.check_in_domain(p)?;
        let n = self.dim;
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = expr::eval_value(self.metric_expression(i, j), p)?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        check_positive_definite(&g)?;
        Ok(g)
    }

    /// Metric with exact first and second derivatives at a point.
    pub fn metric_jets_at(&self, p: &[f64]) -> Result<MetricJets, GeomError> {
        self.check_in_domain(p)?;
        self.metric_jets_inner(p)
    }

    /// Jets without the domain-box check, for finite-difference stencils
    /// that step a hair outside the sampling box.
    pub(crate) fn metric_jets_inner(&self, p: &[f64]) -> Result<MetricJets, GeomError> {
        let n = self.dim;
        let mut g = DMatrix::zeros(n, n);
        let mut dg = Tensor3::zeros(n, n, n);
        let mut d2g = Tensor4::zeros(n, n, n, n);
        let ctx = EvalContext::hessian(p);
        for i in 0..n {
            for j in i..n {
                let jet = evaluate(self.metric_expression(i, j), &ctx)?;
                g[(i, j)] = jet.value;
                g[(j, i)] = jet.value;
                let grad = jet.gradient.as_ref().expect("hessian mode");
                let hess = jet.hessian.as_ref().expect("hessian mode");
                for k in 0..n {
                    dg.set(k, i, j, grad[k]);
                    dg.set(k, j, i, grad[k]);
                    for l in 0..n {
                        d2g.set(k, l, i, j, hess[(k, l)]);
                        d2g.set(k, l, j, i, hess[(k, l)]);
                    }
                }
            }
        }
        check_positive_definite(&g)?;
        let ginv = g
            .clone()
            .try_inverse()
            .ok_or(GeomError::MetricNotPositiveDefinite { min_eigenvalue: 0.0 })?;
        Ok(MetricJets { g, ginv, dg, d2g })
    }

    /// Christoffel symbols Γ^k_{ij} (index order: `at(k, i, j)`).
    pub fn christoffel_at(&self, p: &[f64]) -> Result<Tensor3, GeomError> {
        let jets = self.metric_jets_at(p)?;
        Ok(christoffel_from_jets(&jets).0)
    }

    /// Christoffel symbols and their coordinate derivatives
    /// (`dgamma.at(l, k, i, j)` = ∂_l Γ^k_{ij}).
    pub fn christoffel_jets_at(&self, p: &[f64]) -> Result<(Tensor3, Tensor4), GeomError> {
        let jets = self.metric_jets_at(p)?;
        Ok(christoffel_from_jets(&jets))
    }

    /// Fully lowered Riemann tensor at a point under the requested sign
    /// convention.
    pub fn riemann_at(&self, p: &[f64], convention: SignConvention) -> Result<CurvatureTensor, GeomError> {
        let jets = self.metric_jets_at(p)?;
        let (gamma, dgamma) = christoffel_from_jets(&jets);
        let n = self.dim;
        let sign = convention.sign();
        let mut components = Tensor4::zeros(n, n, n, n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    // R^m_{ijk} = ∂_i Γ^m_{jk} − ∂_j Γ^m_{ik}
                    //             + Γ^m_{ia}Γ^a_{jk} − Γ^m_{ja}Γ^a_{ik}
                    for m in 0..n {
                        let mut up = dgamma.at(i, m, j, k) - dgamma.at(j, m, i, k);
                        for a in 0..n {
                            up += gamma.at(m, i, a) * gamma.at(a, j, k)
                                - gamma.at(m, j, a) * gamma.at(a, i, k);
                        }
                        // Lower the last index: R_{ijkl} = g_{lm} R^m_{ijk}.
                        for l in 0..n {
                            let prev = components.at(i, j, k, l);
                            components.set(i, j, k, l, prev + sign * jets.g[(l, m)] * up);
                        }
                    }
                }
            }
        }
        Ok(CurvatureTensor { point: p.to_vec(), dim: n, convention, components })
    }

    /// Largest deviation of g(J·, J·) from g(·, ·) at a point.
    pub fn hermitian_residual_at(&self, p: &[f64]) -> Result<f64, GeomError> {
        let j = self.complex_structure.as_ref().ok_or(GeomError::MissingComplexStructure)?;
        let g = self.metric_at(p)?;
        Ok((j.transpose() * &g * j - &g).abs().max())
    }

    /// Max residual of R against the constant-curvature model
    /// R_{ijkl} = c (g_{jk} g_{il} − g_{ik} g_{jl}) (modern convention),
    /// over the given points.
    pub fn validate_real_space_form(&self, c: f64, points: &[Vec<f64>]) -> Result<f64, GeomError> {
        let n = self.dim;
        let mut worst = 0.0_f64;
        for p in points {
            let g = self.metric_at(p)?;
            let r = self.riemann_at(p, SignConvention::Modern)?;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let model = c * (g[(j, k)] * g[(i, l)] - g[(i, k)] * g[(j, l)]);
                            worst = worst.max((r.at(i, j, k, l) - model).abs());
                        }
                    }
                }
            }
        }
        Ok(worst)
    }

    /// Max residual of R against the constant-holomorphic-curvature model
    /// (modern convention) over the given points. Also enforces metric /
    /// complex-structure compatibility at each point.
    pub fn validate_complex_space_form(&self, c: f64, points: &[Vec<f64>]) -> Result<f64, GeomError> {
        let jmat = self.complex_structure.as_ref().ok_or(GeomError::MissingComplexStructure)?;
        let n = self.dim;
        let mut worst = 0.0_f64;
        for p in points {
            let g = self.metric_at(p)?;
            let compat = (jmat.transpose() * &g * jmat - &g).abs().max();
            if compat > tol::COMPLEX_COMPAT {
                return Err(GeomError::ComplexStructureInvalid {
                    detail: format!("g(J·,J·) deviates from g by {compat:e} at {p:?}"),
                });
            }
            let r = self.riemann_at(p, SignConvention::Modern)?;
            // K_{ab} = g(∂_a, J ∂_b)
            let kmat = &g * jmat;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let flat = g[(j, k)] * g[(i, l)] - g[(i, k)] * g[(j, l)];
                            let holo = kmat[(i, k)] * kmat[(l, j)] - kmat[(j, k)] * kmat[(l, i)]
                                + 2.0 * kmat[(i, j)] * kmat[(l, k)];
                            let model = 0.25 * c * (flat + holo);
                            worst = worst.max((r.at(i, j, k, l) - model).abs());
                        }
                    }
                }
            }
        }
        Ok(worst)
    }

    /// Max component of ∇J over the given points. Zero (to roundoff) exactly
    /// when the chart metric is Kähler for the chart's constant J.
    pub fn kaehler_audit(&self, points: &[Vec<f64>]) -> Result<f64, GeomError> {
        let jmat = self.complex_structure.as_ref().ok_or(GeomError::MissingComplexStructure)?;
        let n = self.dim;
        let mut worst = 0.0_f64;
        for p in points {
            let gamma = self.christoffel_at(p)?;
            // J constant: (∇_a J)^k_j = Γ^k_{am} J^m_j − Γ^m_{aj} J^k_m.
            for a in 0..n {
                for k in 0..n {
                    for j in 0..n {
                        let mut v = 0.0;
                        for m in 0..n {
                            v += gamma.at(k, a, m) * jmat[(m, j)]
                                - gamma.at(m, a, j) * jmat[(k, m)];
                        }
                        worst = worst.max(v.abs());
                    }
                }
            }
        }
        Ok(worst)
    }
}

/// Standard complex structure on R^{2n}: J e_{2a} = e_{2a+1},
/// J e_{2a+1} = −e_{2a} (0-based columns).
pub fn standard_complex_structure(n_complex: usize) -> DMatrix<f64> {
    let dim = 2 * n_complex;
    let mut j = DMatrix::zeros(dim, dim);
    for a in 0..n_complex {
        j[(2 * a + 1, 2 * a)] = 1.0;
        j[(2 * a, 2 * a + 1)] = -1.0;
    }
    j
}

fn check_positive_definite(g: &DMatrix<f64>) -> Result<(), GeomError> {
    let eigen = g.clone().symmetric_eigen();
    let min_eigenvalue = eigen.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eigenvalue <= tol::METRIC_MIN_EIGENVALUE {
        return Err(GeomError::MetricNotPositiveDefinite { min_eigenvalue });
    }
    Ok(())
}

/// Γ^k_{ij} = ½ g^{km} (∂_i g_{jm} + ∂_j g_{im} − ∂_m g_{ij}) and its
/// coordinate derivative, both exact given the metric jets.
pub(crate) fn christoffel_from_jets(jets: &MetricJets) -> (Tensor3, Tensor4) {
    let n = jets.g.nrows();
    let mut gamma = Tensor3::zeros(n, n, n);
    let mut dgamma = Tensor4::zeros(n, n, n, n);

    // ∂_l g^{km} = −(g^{-1} ∂_l g g^{-1})_{km}
    let mut dginv = Vec::with_capacity(n);
    for l in 0..n {
        let mut dgl = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                dgl[(i, j)] = jets.dg.at(l, i, j);
            }
        }
        dginv.push(-(&jets.ginv * dgl * &jets.ginv));
    }

    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut v = 0.0;
                for m in 0..n {
                    v += jets.ginv[(k, m)]
                        * (jets.dg.at(i, j, m) + jets.dg.at(j, i, m) - jets.dg.at(m, i, j));
                }
                v *= 0.5;
                gamma.set(k, i, j, v);
                gamma.set(k, j, i, v);

                for l in 0..n {
                    let mut dv = 0.0;
                    for m in 0..n {
                        dv += dginv[l][(k, m)]
                            * (jets.dg.at(i, j, m) + jets.dg.at(j, i, m) - jets.dg.at(m, i, j));
                        dv += jets.ginv[(k, m)]
                            * (jets.d2g.at(l, i, j, m) + jets.d2g.at(l, j, i, m)
                                - jets.d2g.at(l, m, i, j));
                    }
                    dv *= 0.5;
                    dgamma.set(l, k, i, j, dv);
                    dgamma.set(l, k, j, i, dv);
                }
            }
        }
    }
    (gamma, dgamma)
}

/// Largest deviation of the basis Gram matrix from the identity.
pub fn orthonormality_residual(g: &DMatrix<f64>, basis: &[DVector<f64>]) -> f64 {
    let mut worst = 0.0_f64;
    for (i, u) in basis.iter().enumerate() {
        for (j, v) in basis.iter().enumerate() {
            let inner = (u.transpose() * g * v)[(0, 0)];
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((inner - target).abs());
        }
    }
    worst
}

/// Partial Ricci trace Σ_j R(x, b_j, b_j, x) of the distinguished first
/// basis vector over an orthonormal sub-basis.
pub fn partial_ricci(
    r: &CurvatureTensor,
    g: &DMatrix<f64>,
    basis: &[DVector<f64>],
) -> Result<f64, GeomError> {
    let residual = orthonormality_residual(g, basis);
    if residual > tol::ORTHONORMALITY {
        return Err(GeomError::BasisNotOrthonormal { residual });
    }
    let x = &basis[0];
    let mut total = 0.0;
    for b in basis {
        total += r.contract(x, b, b, x);
    }
    Ok(total)
}

/// Split Jv into its component inside the span of `subspace` (the Q part)
/// and the complement (the P part): Jv = Pv + Qv exactly.
///
/// `subspace` must be g-orthonormal.
pub fn holomorphic_split(
    jmat: &DMatrix<f64>,
    g: &DMatrix<f64>,
    v: &DVector<f64>,
    subspace: &[DVector<f64>],
) -> Result<(DVector<f64>, DVector<f64>), GeomError> {
    let residual = orthonormality_residual(g, subspace);
    if residual > tol::ORTHONORMALITY {
        return Err(GeomError::BasisNotOrthonormal { residual });
    }
    let jv = jmat * v;
    let mut q = DVector::zeros(v.len());
    for b in subspace {
        let coeff = (jv.transpose() * g * b)[(0, 0)];
        q += coeff * b;
    }
    let p = &jv - &q;
    Ok((p, q))
}

/// g-norm squared of a chart vector.
pub fn norm_sq(g: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    (v.transpose() * g * v)[(0, 0)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use approx::assert_abs_diff_eq;

    fn chart(dim: usize, upper: &[&str], domain: Vec<[f64; 2]>) -> ChartManifold {
        let entries = upper.iter().map(|s| parse(s).unwrap()).collect();
        ChartManifold::new(dim, entries, domain, None).unwrap()
    }

    /// Flat plane in polar coordinates (x1 = r, x2 = θ): the classical
    /// symbols are Γ^r_{θθ} = −r, Γ^θ_{rθ} = 1/r, and the curvature vanishes.
    #[test]
    fn polar_christoffels_match_hand_values() {
        let m = chart(2, &["1", "0", "x1^2"], vec![[0.5, 3.0], [0.0, 6.0]]);
        let p = [1.7, 0.8];
        let gamma = m.christoffel_at(&p).unwrap();
        assert_abs_diff_eq!(gamma.at(0, 1, 1), -1.7, epsilon = 1e-12);
        assert_abs_diff_eq!(gamma.at(1, 0, 1), 1.0 / 1.7, epsilon = 1e-12);
        assert_abs_diff_eq!(gamma.at(1, 1, 0), 1.0 / 1.7, epsilon = 1e-12);
        assert_abs_diff_eq!(gamma.at(0, 0, 0), 0.0, epsilon = 1e-12);

        let r = m.riemann_at(&p, SignConvention::Modern).unwrap();
        assert!(r.components.max_abs() <= 1e-9, "polar chart must be flat");
    }

    /// Geodesic polar chart of the unit round 3-sphere:
    /// g = dt^2 + sin^2 t (dθ^2 + sin^2 θ dφ^2).
    fn round_s3() -> ChartManifold {
        chart(
            3,
            &["1", "0", "0", "sin(x1)^2", "0", "sin(x1)^2 * sin(x2)^2"],
            vec![[0.3, std::f64::consts::PI - 0.3], [0.4, std::f64::consts::PI - 0.4], [0.0, 6.0]],
        )
    }

    #[test]
    fn unit_sphere_chart_is_a_real_space_form() {
        let m = round_s3();
        let points: Vec<Vec<f64>> =
            vec![vec![0.7, 1.1, 0.4], vec![1.3, 0.9, 2.2], vec![2.0, 1.8, 4.0]];
        let residual = m.validate_real_space_form(1.0, &points).unwrap();
        assert!(residual <= 1e-10, "residual {residual:e}");
        let not_a_match = m.validate_real_space_form(0.5, &points).unwrap();
        assert!(not_a_match > 0.1, "wrong constant must be detected");
    }

    #[test]
    fn stereographic_sphere_matches_its_constant() {
        let m = ChartManifold::stereographic_sphere(3, 1.0);
        let g0 = m.metric_at(&[0.0, 0.0, 0.0]).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(g0[(i, i)], 4.0, epsilon = 1e-15);
        }
        let points = vec![vec![0.3, -0.2, 0.5], vec![-0.7, 0.4, 0.1]];
        assert!(m.validate_real_space_form(1.0, &points).unwrap() <= 1e-9);

        let h = ChartManifold::stereographic_sphere(2, -1.0);
        let points = vec![vec![0.1, 0.05], vec![-0.12, 0.2]];
        assert!(h.validate_real_space_form(-1.0, &points).unwrap() <= 1e-9);
    }

    #[test]
    fn hyperbolic_warped_chart_has_curvature_minus_one() {
        // dt^2 + e^{2t}(dx^2 + dy^2) is hyperbolic 3-space.
        let m = chart(
            3,
            &["1", "0", "0", "exp(2*x1)", "0", "exp(2*x1)"],
            vec![[-1.0, 1.0], [-2.0, 2.0], [-2.0, 2.0]],
        );
        let points = vec![vec![0.3, 0.4, -0.2], vec![-0.5, 1.0, 0.7]];
        assert!(m.validate_real_space_form(-1.0, &points).unwrap() <= 1e-9);
    }

    #[test]
    fn curvature_symmetries_hold_on_curved_charts() {
        let m = round_s3();
        let r = m.riemann_at(&[0.9, 1.2, 0.5], SignConvention::Modern).unwrap();
        assert!(r.symmetry_residual() <= tol::CURVATURE_SYMMETRY_REL);
    }

    #[test]
    fn oneill_convention_is_the_global_negation() {
        let m = round_s3();
        let p = [0.9, 1.2, 0.5];
        let modern = m.riemann_at(&p, SignConvention::Modern).unwrap();
        let oneill = m.riemann_at(&p, SignConvention::ONeill).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        assert_abs_diff_eq!(
                            modern.at(i, j, k, l),
                            -oneill.at(i, j, k, l),
                            epsilon = 1e-15
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn partial_ricci_of_sphere_pair_is_sectional() {
        // On a unit sphere, the partial Ricci over a 2-element orthonormal
        // sub-basis is the single sectional curvature term, i.e. exactly 1.
        let m = ChartManifold::stereographic_sphere(3, 1.0);
        let p = [0.2, -0.4, 0.3];
        let g = m.metric_at(&p).unwrap();
        let r = m.riemann_at(&p, SignConvention::Modern).unwrap();
        // Orthonormalize e1, e2 against g.
        let e1: DVector<f64> = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let e2: DVector<f64> = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        let b1 = &e1 / norm_sq(&g, &e1).sqrt();
        let mut b2 = &e2 - (e2.transpose() * &g * &b1)[(0, 0)] * &b1;
        b2 /= norm_sq(&g, &b2).sqrt();
        let ric = partial_ricci(&r, &g, &[b1, b2]).unwrap();
        assert_abs_diff_eq!(ric, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn partial_ricci_rejects_skewed_bases() {
        let m = ChartManifold::euclidean(3);
        let p = [0.0, 0.0, 0.0];
        let g = m.metric_at(&p).unwrap();
        let r = m.riemann_at(&p, SignConvention::Modern).unwrap();
        let b1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let b2 = DVector::from_vec(vec![0.7, 0.7, 0.0]);
        assert!(matches!(
            partial_ricci(&r, &g, &[b1, b2]),
            Err(GeomError::BasisNotOrthonormal { .. })
        ));
    }

    #[test]
    fn metric_must_be_positive_definite() {
        let m = chart(2, &["x1", "0", "1"], vec![[-2.0, 2.0], [-2.0, 2.0]]);
        match m.metric_at(&[-1.0, 0.0]) {
            Err(GeomError::MetricNotPositiveDefinite { min_eigenvalue }) => {
                assert!(min_eigenvalue < 0.0)
            }
            other => panic!("expected PD failure, got {other:?}"),
        }
    }

    #[test]
    fn out_of_domain_points_are_rejected() {
        let m = round_s3();
        assert!(matches!(
            m.metric_at(&[0.1, 1.0, 1.0]),
            Err(GeomError::PointOutsideDomain { axis: 0, .. })
        ));
    }

    #[test]
    fn complex_structure_must_square_to_minus_identity() {
        let entries = vec![
            parse("1").unwrap(),
            parse("0").unwrap(),
            parse("1").unwrap(),
        ];
        let bad_j = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(
            ChartManifold::new(2, entries, vec![[-1.0, 1.0]; 2], Some(bad_j)),
            Err(GeomError::ComplexStructureInvalid { .. })
        ));
    }

    #[test]
    fn flat_complex_space_is_kaehler_and_flat() {
        let m = ChartManifold::euclidean_complex(2);
        let points = vec![vec![0.1, 0.2, -0.3, 0.4]];
        assert_abs_diff_eq!(m.kaehler_audit(&points).unwrap(), 0.0);
        assert_abs_diff_eq!(m.validate_complex_space_form(0.0, &points).unwrap(), 0.0);
        assert_abs_diff_eq!(m.hermitian_residual_at(&points[0]).unwrap(), 0.0);
    }

    #[test]
    fn projective_line_chart_is_both_space_form_kinds() {
        // One complex dimension with holomorphic curvature 4 is the round
        // 2-sphere of sectional curvature 4; both validators must agree.
        let m = ChartManifold::fubini_study(1, 4.0).unwrap();
        let points = vec![vec![0.3, -0.2], vec![0.6, 0.5], vec![-0.4, 0.1]];
        let complex_residual = m.validate_complex_space_form(4.0, &points).unwrap();
        assert!(complex_residual <= 1e-9, "complex residual {complex_residual:e}");
        let real_residual = m.validate_real_space_form(4.0, &points).unwrap();
        assert!(real_residual <= 1e-9, "real residual {real_residual:e}");
    }

    #[test]
    fn projective_plane_chart_is_a_complex_space_form() {
        let m = ChartManifold::fubini_study(2, 4.0).unwrap();
        let points = vec![
            vec![0.2, -0.3, 0.4, 0.1],
            vec![-0.5, 0.2, 0.0, 0.6],
            vec![0.1, 0.1, -0.2, -0.4],
        ];
        let residual = m.validate_complex_space_form(4.0, &points).unwrap();
        assert!(residual <= 1e-9, "residual {residual:e}");
        // But it is NOT a real space form (holomorphic pinching).
        let real = m.validate_real_space_form(4.0, &points).unwrap();
        assert!(real > 0.1);
        // And the constant chart J is parallel (the chart is Kähler).
        let kaehler = m.kaehler_audit(&points).unwrap();
        assert!(kaehler <= 1e-11, "kaehler residual {kaehler:e}");
    }

    #[test]
    fn non_kaehler_structure_is_flagged_not_erred() {
        // The standard J on a curved conformal 4-chart (a round 4-sphere) is
        // metric-compatible but not parallel; the audit must report a large
        // residual rather than fail.
        let mut m = ChartManifold::stereographic_sphere(4, 1.0);
        m.complex_structure = Some(standard_complex_structure(2));
        let points = vec![vec![0.4, -0.2, 0.3, 0.5]];
        let residual = m.kaehler_audit(&points).unwrap();
        assert!(residual > 0.1, "expected a visible obstruction, got {residual:e}");
    }

    #[test]
    fn holomorphic_split_reassembles_j_times_v() {
        let m = ChartManifold::euclidean_complex(2);
        let g = m.metric_at(&[0.0; 4]).unwrap();
        let jmat = m.complex_structure().unwrap();
        let e3 = DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]);
        let e4 = DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0]);
        let v = DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]);
        let (p, q) = holomorphic_split(jmat, &g, &v, &[e3.clone(), e4.clone()]).unwrap();
        // J e3 = e4 lies entirely inside span{e3, e4}.
        assert_abs_diff_eq!((&p + &q - jmat * &v).abs().max(), 0.0);
        assert_abs_diff_eq!(p.abs().max(), 0.0);
        assert_abs_diff_eq!((q - e4).abs().max(), 0.0);
    }
}
