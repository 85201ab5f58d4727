//! First-order jet algebra and deterministic orthonormal frame
//! construction.
//!
//! A `Dual*` value carries its coordinate partials alongside the value, so
//! arithmetic (matrix products, inverses, Gram–Schmidt) propagates exact
//! first derivatives. Frames built this way are genuine local vector
//! *fields* with known derivatives — which is what covariant derivatives of
//! the fundamental tensors need — without any finite differencing.
//!
//! All pivot choices are made in deterministic candidate order and recorded
//! in a [`GramSchmidtPlan`], so a frame can be re-instantiated at nearby
//! points as the *same* smooth field.

use nalgebra::{DMatrix, DVector};

use crate::error::GeomError;
use crate::tol;

/// Scalar with first partials with respect to `params` coordinates.
#[derive(Debug, Clone)]
pub struct DualScalar {
    pub val: f64,
    pub der: DVector<f64>,
}

impl DualScalar {
    pub fn constant(val: f64, params: usize) -> Self {
        DualScalar { val, der: DVector::zeros(params) }
    }

    pub fn sqrt(&self) -> Self {
        let root = self.val.sqrt();
        DualScalar { val: root, der: &self.der / (2.0 * root) }
    }
}

/// Column vector with first partials (`der[a]` = ∂_a of the vector).
#[derive(Debug, Clone)]
pub struct DualVector {
    pub val: DVector<f64>,
    pub der: Vec<DVector<f64>>,
}

impl DualVector {
    pub fn constant(val: DVector<f64>, params: usize) -> Self {
        let n = val.len();
        DualVector { val, der: vec![DVector::zeros(n); params] }
    }

    pub fn params(&self) -> usize {
        self.der.len()
    }

    pub fn sub(&self, other: &DualVector) -> DualVector {
        DualVector {
            val: &self.val - &other.val,
            der: self.der.iter().zip(&other.der).map(|(a, b)| a - b).collect(),
        }
    }

    /// self − s·v for a dual coefficient s.
    pub fn sub_scaled(&self, s: &DualScalar, v: &DualVector) -> DualVector {
        DualVector {
            val: &self.val - s.val * &v.val,
            der: self
                .der
                .iter()
                .zip(v.der.iter().enumerate())
                .map(|(a, (k, dv))| a - s.val * dv - s.der[k] * &v.val)
                .collect(),
        }
    }

    /// self / s for a dual scalar s.
    pub fn div_scalar(&self, s: &DualScalar) -> DualVector {
        DualVector {
            val: &self.val / s.val,
            der: self
                .der
                .iter()
                .enumerate()
                .map(|(k, a)| a / s.val - (s.der[k] / (s.val * s.val)) * &self.val)
                .collect(),
        }
    }

    /// Linear combination Σ_j coeffs[j]·frame[j] with constant coefficients.
    pub fn linear_combination(coeffs: &[f64], frame: &[DualVector]) -> DualVector {
        let n = frame[0].val.len();
        let params = frame[0].params();
        let mut val = DVector::zeros(n);
        let mut der = vec![DVector::zeros(n); params];
        for (c, f) in coeffs.iter().zip(frame) {
            val += *c * &f.val;
            for (d, fd) in der.iter_mut().zip(&f.der) {
                *d += *c * fd;
            }
        }
        DualVector { val, der }
    }
}

/// Matrix with first partials (`der[a]` = ∂_a of the matrix).
#[derive(Debug, Clone)]
pub struct DualMatrix {
    pub val: DMatrix<f64>,
    pub der: Vec<DMatrix<f64>>,
}

impl DualMatrix {
    pub fn constant(val: DMatrix<f64>, params: usize) -> Self {
        let (r, c) = val.shape();
        DualMatrix { val, der: vec![DMatrix::zeros(r, c); params] }
    }

    pub fn identity(n: usize, params: usize) -> Self {
        DualMatrix::constant(DMatrix::identity(n, n), params)
    }

    pub fn params(&self) -> usize {
        self.der.len()
    }

    pub fn transpose(&self) -> DualMatrix {
        DualMatrix {
            val: self.val.transpose(),
            der: self.der.iter().map(|d| d.transpose()).collect(),
        }
    }

    pub fn mul(&self, other: &DualMatrix) -> DualMatrix {
        DualMatrix {
            val: &self.val * &other.val,
            der: self
                .der
                .iter()
                .zip(&other.der)
                .map(|(da, db)| da * &other.val + &self.val * db)
                .collect(),
        }
    }

    pub fn sub(&self, other: &DualMatrix) -> DualMatrix {
        DualMatrix {
            val: &self.val - &other.val,
            der: self.der.iter().zip(&other.der).map(|(a, b)| a - b).collect(),
        }
    }

    /// Inverse with d(M⁻¹) = −M⁻¹ (dM) M⁻¹.
    pub fn inverse(&self) -> Result<DualMatrix, GeomError> {
        let inv = self.val.clone().try_inverse().ok_or(GeomError::FrameDegenerate {
            detail: "singular matrix in jet inverse".to_string(),
        })?;
        let der = self.der.iter().map(|d| -(&inv * d * &inv)).collect();
        Ok(DualMatrix { val: inv, der })
    }

    pub fn apply(&self, v: &DualVector) -> DualVector {
        DualVector {
            val: &self.val * &v.val,
            der: self
                .der
                .iter()
                .zip(&v.der)
                .map(|(dm, dv)| dm * &v.val + &self.val * dv)
                .collect(),
        }
    }
}

/// Inner product uᵀ G v with all three factors carrying jets.
pub fn dual_inner(g: &DualMatrix, u: &DualVector, v: &DualVector) -> DualScalar {
    let val = (u.val.transpose() * &g.val * &v.val)[(0, 0)];
    let params = g.params();
    let mut der = DVector::zeros(params);
    for k in 0..params {
        der[k] = (u.der[k].transpose() * &g.val * &v.val)[(0, 0)]
            + (u.val.transpose() * &g.der[k] * &v.val)[(0, 0)]
            + (u.val.transpose() * &g.val * &v.der[k])[(0, 0)];
    }
    DualScalar { val, der }
}

/// Record of which candidates a Gram–Schmidt pass accepted, so the same
/// frame field can be rebuilt at nearby points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GramSchmidtPlan {
    pub accepted: Vec<usize>,
}

/// Metric Gram–Schmidt over jet-carrying candidates, in deterministic
/// candidate order.
///
/// Without a plan: walk candidates in order, skip any whose residual norm
/// falls below the pivot floor, stop after `count` accepted, and return the
/// accepted indices. With a plan: use exactly the planned candidates and
/// fail loudly if one of them has degenerated.
pub fn gram_schmidt_dual(
    g: &DualMatrix,
    candidates: &[DualVector],
    count: usize,
    plan: Option<&GramSchmidtPlan>,
) -> Result<(Vec<DualVector>, GramSchmidtPlan), GeomError> {
    let mut frame: Vec<DualVector> = Vec::with_capacity(count);
    let mut accepted = Vec::with_capacity(count);

    let order: Vec<usize> = match plan {
        Some(p) => {
            if p.accepted.len() != count {
                return Err(GeomError::FrameDegenerate {
                    detail: format!(
                        "frame plan has {} pivots, {} needed",
                        p.accepted.len(),
                        count
                    ),
                });
            }
            p.accepted.clone()
        }
        None => (0..candidates.len()).collect(),
    };

    for idx in order {
        if frame.len() == count {
            break;
        }
        let mut v = candidates[idx].clone();
        for b in &frame {
            let coeff = dual_inner(g, &v, b);
            v = v.sub_scaled(&coeff, b);
        }
        let norm_sq = dual_inner(g, &v, &v);
        if norm_sq.val.sqrt() < tol::FRAME_PIVOT_MIN_NORM {
            if plan.is_some() {
                return Err(GeomError::FrameDegenerate {
                    detail: format!(
                        "planned pivot {idx} has norm {:e}, below the pivot floor",
                        norm_sq.val.max(0.0).sqrt()
                    ),
                });
            }
            continue;
        }
        frame.push(v.div_scalar(&norm_sq.sqrt()));
        accepted.push(idx);
    }

    if frame.len() != count {
        return Err(GeomError::FrameDegenerate {
            detail: format!(
                "only {} of {count} frame vectors found among {} candidates",
                frame.len(),
                candidates.len()
            ),
        });
    }
    Ok((frame, GramSchmidtPlan { accepted }))
}

/// Value-level metric Gram–Schmidt (no jets): same pivot policy.
pub fn gram_schmidt(
    g: &DMatrix<f64>,
    candidates: &[DVector<f64>],
    count: usize,
) -> Result<Vec<DVector<f64>>, GeomError> {
    let params = 0;
    let g = DualMatrix::constant(g.clone(), params);
    let cands: Vec<DualVector> =
        candidates.iter().map(|v| DualVector::constant(v.clone(), params)).collect();
    let (frame, _) = gram_schmidt_dual(&g, &cands, count, None)?;
    Ok(frame.into_iter().map(|v| v.val).collect())
}

/// Apply a constant orthogonal rotation to a frame: new_i = Σ_j R_ij old_j.
pub fn rotate_frame(frame: &[DualVector], rotation: &DMatrix<f64>) -> Result<Vec<DualVector>, GeomError> {
    let k = frame.len();
    if rotation.nrows() != k || rotation.ncols() != k {
        return Err(GeomError::Config {
            detail: format!(
                "rotation is {}x{}, frame has {k} vectors",
                rotation.nrows(),
                rotation.ncols()
            ),
        });
    }
    let residual = (rotation.transpose() * rotation - DMatrix::<f64>::identity(k, k)).abs().max();
    if residual > 1e-12 {
        return Err(GeomError::Config {
            detail: format!("rotation is not orthogonal: residual {residual:e}"),
        });
    }
    Ok((0..k)
        .map(|i| {
            let coeffs: Vec<f64> = (0..k).map(|j| rotation[(i, j)]).collect();
            DualVector::linear_combination(&coeffs, frame)
        })
        .collect())
}

/// Optional deterministic inputs for frame construction, used by invariance
/// tests: alternative spanning candidates and constant rotations of the
/// finished frames.
#[derive(Debug, Clone, Default)]
pub struct FrameOptions {
    /// Candidate vectors fed to the vertical Gram–Schmidt after projection
    /// (defaults to the coordinate basis).
    pub vertical_seeds: Option<Vec<DVector<f64>>>,
    /// Candidate vectors for the horizontal pass (defaults likewise).
    pub horizontal_seeds: Option<Vec<DVector<f64>>>,
    /// Constant orthogonal rotation applied to the finished vertical frame.
    pub vertical_rotation: Option<DMatrix<f64>>,
    /// Constant orthogonal rotation applied to the finished horizontal frame.
    pub horizontal_rotation: Option<DMatrix<f64>>,
}

/// Pivot plans for both halves of a split frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePlan {
    pub vertical: GramSchmidtPlan,
    pub horizontal: GramSchmidtPlan,
}

/// g-orthonormal frames for ker dF (vertical, dimension `l`) and its
/// g-orthogonal complement (horizontal, dimension `r`), with exact first
/// derivatives in the domain coordinates.
#[derive(Debug, Clone)]
pub struct SplitFrame {
    pub vertical: Vec<DualVector>,
    pub horizontal: Vec<DualVector>,
    pub plan: FramePlan,
}

/// Build the split frame from the differential `df` (r×n values with
/// derivative blocks) and the metric `g` (n×n with derivative blocks).
///
/// The kernel is reached through the Euclidean projector
/// P = I − dFᵀ(dF dFᵀ)⁻¹dF, which is jet-differentiable because a
/// submersion's differential has full row rank everywhere. Horizontal
/// candidates are g-projected off the finished vertical frame, so the two
/// halves are exactly g-orthogonal.
pub fn split_frame(
    g: &DualMatrix,
    df: &DualMatrix,
    options: &FrameOptions,
    plan: Option<&FramePlan>,
) -> Result<SplitFrame, GeomError> {
    let n = g.val.nrows();
    let r = df.val.nrows();
    let l = n - r;
    let params = g.params();

    let singular_values: Vec<f64> = df.val.clone().svd(false, false).singular_values.iter().copied().collect();
    if singular_values.iter().any(|&s| s < tol::RANK_SINGULAR_MIN) {
        return Err(GeomError::RankMismatch { expected: r, singular_values });
    }

    let dft = df.transpose();
    let gram_inv = df.mul(&dft).inverse()?;
    let kernel_proj = DualMatrix::identity(n, params).sub(&dft.mul(&gram_inv).mul(df));

    let coordinate_basis: Vec<DVector<f64>> =
        (0..n).map(|i| { let mut e = DVector::zeros(n); e[i] = 1.0; e }).collect();

    let vertical_seeds = options.vertical_seeds.as_deref().unwrap_or(&coordinate_basis);
    let vertical_candidates: Vec<DualVector> = vertical_seeds
        .iter()
        .map(|s| kernel_proj.apply(&DualVector::constant(s.clone(), params)))
        .collect();
    let (mut vertical, vplan) =
        gram_schmidt_dual(g, &vertical_candidates, l, plan.map(|p| &p.vertical))?;

    let horizontal_seeds = options.horizontal_seeds.as_deref().unwrap_or(&coordinate_basis);
    let horizontal_candidates: Vec<DualVector> = horizontal_seeds
        .iter()
        .map(|s| {
            let mut v = DualVector::constant(s.clone(), params);
            for b in &vertical {
                let coeff = dual_inner(g, &v, b);
                v = v.sub_scaled(&coeff, b);
            }
            v
        })
        .collect();
    let (mut horizontal, hplan) =
        gram_schmidt_dual(g, &horizontal_candidates, r, plan.map(|p| &p.horizontal))?;

    if let Some(rot) = &options.vertical_rotation {
        vertical = rotate_frame(&vertical, rot)?;
    }
    if let Some(rot) = &options.horizontal_rotation {
        horizontal = rotate_frame(&horizontal, rot)?;
    }

    Ok(SplitFrame { vertical, horizontal, plan: FramePlan { vertical: vplan, horizontal: hplan } })
}

/// Pointwise kernel / complement split for a differential that is *not*
/// full-rank (general maps): SVD-based, values only.
///
/// Returns (kernel frame of dimension n−k, complement frame of dimension k),
/// both g-orthonormal, with the complement g-orthogonal to the kernel.
/// The singular spectrum must separate cleanly at the expected rank.
pub fn pointwise_kernel_split(
    g: &DMatrix<f64>,
    df: &DMatrix<f64>,
    expected_rank: usize,
) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>), GeomError> {
    let n = df.ncols();
    // Eigenvectors of dFᵀdF span all of the domain regardless of the shape
    // of dF (a thin SVD would only carry min(rows, cols) right singular
    // vectors); eigenvalues are squared singular values.
    let eig = nalgebra::SymmetricEigen::new(df.transpose() * df);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).expect("finite eigenvalues")
    });
    let singular: Vec<f64> =
        order.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();
    let rank_ok = singular.iter().take(expected_rank).all(|&s| s >= tol::RANK_SINGULAR_MIN)
        && singular.iter().skip(expected_rank).all(|&s| s <= tol::RANK_NULL_MAX);
    if !rank_ok {
        return Err(GeomError::RankMismatch { expected: expected_rank, singular_values: singular });
    }
    // Trailing eigenvectors span the kernel (Euclidean-orthonormally);
    // metric Gram–Schmidt turns them into a g-orthonormal kernel frame.
    let kernel_candidates: Vec<DVector<f64>> = order[expected_rank..]
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    let kernel = gram_schmidt(g, &kernel_candidates, n - expected_rank)?;

    // Complement: g-project the leading eigenvectors off the kernel.
    let complement_candidates: Vec<DVector<f64>> = order[..expected_rank]
        .iter()
        .map(|&i| {
            let mut v: DVector<f64> = eig.eigenvectors.column(i).into_owned();
            for b in &kernel {
                let coeff = (v.transpose() * g * b)[(0, 0)];
                v -= coeff * b;
            }
            v
        })
        .collect();
    let complement = gram_schmidt(g, &complement_candidates, expected_rank)?;
    Ok((kernel, complement))
}
