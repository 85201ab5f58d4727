//! The algebraic eigenvalue bound behind the curvature inequalities.
//!
//! For a symmetric n×n matrix A (n ≥ 2) with trace a and squared Frobenius
//! norm b = Σ a_ij², the quantity
//!
//!   L(A) = a₁₁ Σ_i a_ii − Σ_i (a_1i)²
//!
//! is bounded below by
//!
//!   ((n−1)/n²) (2a² − nb − (n−2)|a| √((nb − a²)/(n−1))),
//!
//! with equality exactly on matrices orthogonally equivalent to
//! diag(λ, μ, …, μ) whose distinguished eigendirection is the first axis.
//! This module evaluates the bound, certifies the slack of concrete
//! matrices, reconstructs the extremal matrices, and brute-force searches
//! for counterexamples.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::GeomError;

/// Feasibility slop on b ≥ a²/n (b is clamped up to a²/n within this).
const FEASIBILITY_TOL: f64 = 1e-12;

/// Slack certificate for one matrix.
#[derive(Debug, Clone)]
pub struct SlackCertificate {
    pub n: usize,
    pub trace: f64,
    pub frobenius_sq: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub equality: bool,
}

/// Which extremal branch to reconstruct when the trace does not decide it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremalBranch {
    /// λ below the mean, μ above (the branch the lower bound is attained on
    /// for non-negative traces).
    Minus,
    /// The mirror image.
    Plus,
}

fn check_feasible(n: usize, trace: f64, frobenius_sq: f64) -> Result<f64, GeomError> {
    if n < 2 {
        return Err(GeomError::Config {
            detail: format!("eigenvalue bound needs dimension at least 2, got {n}"),
        });
    }
    let floor = trace * trace / n as f64;
    let slop = FEASIBILITY_TOL * floor.abs().max(1.0);
    if frobenius_sq < floor - slop {
        return Err(GeomError::Config {
            detail: format!(
                "infeasible trace/norm pair: squared norm {frobenius_sq} is below trace²/n = {floor}"
            ),
        });
    }
    Ok(frobenius_sq.max(floor))
}

/// The lower bound for given (n, trace, squared Frobenius norm).
pub fn lower_bound(n: usize, trace: f64, frobenius_sq: f64) -> Result<f64, GeomError> {
    let b = check_feasible(n, trace, frobenius_sq)?;
    let nf = n as f64;
    let a = trace;
    let spread = ((nf * b - a * a) / (nf - 1.0)).max(0.0).sqrt();
    Ok((nf - 1.0) / (nf * nf) * (2.0 * a * a - nf * b - (nf - 2.0) * a.abs() * spread))
}

/// Certify the slack of one symmetric matrix.  The asymmetry gate is strict:
/// this is an algebraic statement about symmetric matrices.
pub fn certify(matrix: &DMatrix<f64>) -> Result<SlackCertificate, GeomError> {
    let n = matrix.nrows();
    if matrix.ncols() != n || n < 2 {
        return Err(GeomError::BadDimension {
            what: "eigenvalue bound",
            detail: format!("expected square matrix of size >= 2, got {}x{}", n, matrix.ncols()),
        });
    }
    let mut asym = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            asym = asym.max((matrix[(i, j)] - matrix[(j, i)]).abs());
        }
    }
    let scale = matrix.abs().max().max(1.0);
    if asym > 1e-12 * scale {
        return Err(GeomError::SymmetryViolation { what: "eigenvalue bound input", residual: asym });
    }
    let trace = matrix.trace();
    let frobenius_sq: f64 = matrix.iter().map(|v| v * v).sum();
    let lhs = {
        let mut row = 0.0;
        for i in 0..n {
            row += matrix[(0, i)] * matrix[(0, i)];
        }
        matrix[(0, 0)] * trace - row
    };
    let rhs = lower_bound(n, trace, frobenius_sq)?;
    let slack = lhs - rhs;
    let equality_tol = 1e-9 * (frobenius_sq / 100.0).max(1.0);
    Ok(SlackCertificate {
        n,
        trace,
        frobenius_sq,
        lhs,
        rhs,
        slack,
        equality: slack.abs() <= equality_tol,
    })
}

/// The eigenvalues (λ, μ) of the extremal matrix diag(λ, μ, …, μ) with the
/// given trace and squared norm.  For nonzero trace the minimizing matrix is
/// unique and the branch argument is ignored; at zero trace both mirror
/// images attain the bound and the branch picks one.
pub fn extremal_eigenvalues(
    n: usize,
    trace: f64,
    frobenius_sq: f64,
    branch: ExtremalBranch,
) -> Result<(f64, f64), GeomError> {
    let b = check_feasible(n, trace, frobenius_sq)?;
    let nf = n as f64;
    let a = trace;
    let s = ((nf * b - a * a) / (nf - 1.0)).max(0.0).sqrt();
    let w = if a != 0.0 {
        a.signum()
    } else {
        match branch {
            ExtremalBranch::Minus => 1.0,
            ExtremalBranch::Plus => -1.0,
        }
    };
    let lambda = a / nf - w * (nf - 1.0) / nf * s;
    let mu = a / nf + w * s / nf;
    Ok((lambda, mu))
}

/// Reconstruct the extremal matrix itself and verify it reproduces the
/// requested trace and squared norm and attains the bound.
pub fn extremal_matrix(
    n: usize,
    trace: f64,
    frobenius_sq: f64,
    branch: ExtremalBranch,
) -> Result<DMatrix<f64>, GeomError> {
    let (lambda, mu) = extremal_eigenvalues(n, trace, frobenius_sq, branch)?;
    let mut m = DMatrix::zeros(n, n);
    m[(0, 0)] = lambda;
    for i in 1..n {
        m[(i, i)] = mu;
    }
    let scale = frobenius_sq.abs().max(1.0);
    let trace_err = (m.trace() - trace).abs();
    let norm_err = (m.iter().map(|v| v * v).sum::<f64>() - frobenius_sq.max(trace * trace / n as f64)).abs();
    if trace_err > 1e-10 * scale || norm_err > 1e-10 * scale {
        return Err(GeomError::Config {
            detail: format!(
                "extremal reconstruction drifted: trace error {trace_err:e}, norm error {norm_err:e}"
            ),
        });
    }
    Ok(m)
}

/// Eigenvalue ratio ρ = |λ − μ| / (λ + (n−1)μ) used to compare extremal
/// shapes across slices.  May be infinite when the denominator vanishes.
pub fn eigenvalue_ratio(lambda: f64, mu: f64, n: usize) -> f64 {
    let denom = lambda + (n as f64 - 1.0) * mu;
    let num = (lambda - mu).abs();
    if num == 0.0 {
        return 0.0;
    }
    if denom == 0.0 {
        return f64::INFINITY;
    }
    num / denom.abs()
}

/// Brute-force search for bound violations over random symmetric matrices
/// with entries uniform in [−5, 5].  Returns the smallest slack seen.
pub fn oracle_min_slack(n: usize, trials: usize, seed: u64) -> Result<f64, GeomError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_slack = f64::INFINITY;
    for _ in 0..trials {
        let m = random_symmetric(n, &mut rng);
        let cert = certify(&m)?;
        min_slack = min_slack.min(cert.slack);
    }
    Ok(min_slack)
}

pub fn random_symmetric<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = rng.random_range(-5.0..5.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// A random feasible (trace, squared-norm) pair: the squared norm sits a
/// random factor above its floor trace²/n.
pub fn random_feasible_pair<R: Rng>(n: usize, rng: &mut R) -> (f64, f64) {
    let trace: f64 = rng.random_range(-6.0..6.0);
    let floor = trace * trace / n as f64;
    let b = floor + rng.random_range(0.0..25.0);
    (trace, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn bound_matches_worked_examples() {
        assert_abs_diff_eq!(lower_bound(2, 2.0, 2.0).unwrap(), 1.0, epsilon = 1e-14);
        let expected = 2.0 / 9.0 * (30.0 - 6.0 * 3.0_f64.sqrt());
        assert_abs_diff_eq!(lower_bound(3, 6.0, 14.0).unwrap(), expected, epsilon = 1e-13);
        assert_abs_diff_eq!(lower_bound(3, 0.0, 0.0).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn certificate_matches_hand_computation() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0]);
        let cert = certify(&m).unwrap();
        assert_abs_diff_eq!(cert.lhs, 5.0, epsilon = 1e-14);
        let rhs = 2.0 / 9.0 * (30.0 - 6.0 * 3.0_f64.sqrt());
        assert_abs_diff_eq!(cert.rhs, rhs, epsilon = 1e-13);
        assert_abs_diff_eq!(cert.slack, 5.0 - rhs, epsilon = 1e-13);
        assert!(!cert.equality);
    }

    #[test]
    fn off_diagonal_two_by_two_attains_equality() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let cert = certify(&m).unwrap();
        assert_abs_diff_eq!(cert.lhs, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cert.rhs, -1.0, epsilon = 1e-15);
        assert!(cert.equality);
    }

    #[test]
    fn homothetic_matrices_attain_equality() {
        for n in 2..=6 {
            let m = DMatrix::identity(n, n) * 1.7;
            let cert = certify(&m).unwrap();
            assert!(cert.slack.abs() < 1e-12);
            assert!(cert.equality);
        }
    }

    #[test]
    fn dimension_two_is_an_identity() {
        let min = oracle_min_slack(2, 100_000, 11).unwrap();
        assert!(min.abs() <= 1e-12, "n=2 slack should vanish identically, got {min}");
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10_000 {
            let m = random_symmetric(2, &mut rng);
            assert!(certify(&m).unwrap().slack.abs() <= 1e-12);
        }
    }

    #[test]
    fn oracle_finds_no_violations() {
        for n in 2..=8 {
            let min = oracle_min_slack(n, 10_000, 100 + n as u64).unwrap();
            assert!(min >= -1e-9, "violation at n={n}: min slack {min}");
        }
    }

    #[test]
    fn extremal_matrix_matches_worked_example() {
        let m = extremal_matrix(3, 6.0, 14.0, ExtremalBranch::Minus).unwrap();
        let s3 = 3.0_f64.sqrt();
        assert_abs_diff_eq!(m[(0, 0)], 2.0 - 2.0 / s3, epsilon = 1e-12);
        assert_abs_diff_eq!(m[(1, 1)], 2.0 + 1.0 / s3, epsilon = 1e-12);
        assert_abs_diff_eq!(m[(2, 2)], 2.0 + 1.0 / s3, epsilon = 1e-12);
        let cert = certify(&m).unwrap();
        assert!(cert.slack.abs() <= 1e-9, "slack {}", cert.slack);
        assert!(cert.equality);
    }

    #[test]
    fn zero_trace_branches_mirror_each_other() {
        let minus = extremal_matrix(2, 0.0, 2.0, ExtremalBranch::Minus).unwrap();
        let plus = extremal_matrix(2, 0.0, 2.0, ExtremalBranch::Plus).unwrap();
        assert_abs_diff_eq!(minus[(0, 0)], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(minus[(1, 1)], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(plus[(0, 0)], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(plus[(1, 1)], -1.0, epsilon = 1e-14);
        assert!(certify(&minus).unwrap().equality);
        assert!(certify(&plus).unwrap().equality);
    }

    #[test]
    fn tight_norm_forces_homothety() {
        let m = extremal_matrix(4, 4.0, 4.0, ExtremalBranch::Minus).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(m[(i, i)], 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn random_feasible_pairs_reconstruct_and_attain_equality() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for trial in 0..1000 {
            let n = 2 + (trial % 7);
            let (a, b) = random_feasible_pair(n, &mut rng);
            for branch in [ExtremalBranch::Minus, ExtremalBranch::Plus] {
                let m = extremal_matrix(n, a, b, branch).unwrap();
                let cert = certify(&m).unwrap();
                assert!(
                    cert.slack.abs() <= 1e-9 * b.max(1.0),
                    "n={n} a={a} b={b} slack {}",
                    cert.slack
                );
                assert!((m.trace() - a).abs() <= 1e-10 * b.max(1.0));
                let norm: f64 = m.iter().map(|v| v * v).sum();
                assert!((norm - b).abs() <= 1e-9 * b.max(1.0));
            }
        }
    }

    #[test]
    fn infeasible_pairs_are_rejected() {
        assert!(lower_bound(2, 2.0, 1.0).is_err());
        assert!(extremal_matrix(3, 6.0, 11.0, ExtremalBranch::Minus).is_err());
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(matches!(certify(&m), Err(GeomError::SymmetryViolation { .. })));
    }

    #[test]
    fn ratio_handles_degenerate_denominators() {
        assert_eq!(eigenvalue_ratio(1.0, 1.0, 4), 0.0);
        assert_eq!(eigenvalue_ratio(1.0, -1.0, 2), f64::INFINITY);
        assert_abs_diff_eq!(eigenvalue_ratio(3.0, 1.0, 3), 0.4, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn slack_is_two_homogeneous(
            vals in proptest::collection::vec(-4.0..4.0_f64, 6),
            scale in 0.1..3.0_f64,
        ) {
            let m = DMatrix::from_row_slice(3, 3, &[
                vals[0], vals[1], vals[2],
                vals[1], vals[3], vals[4],
                vals[2], vals[4], vals[5],
            ]);
            let base = certify(&m).unwrap().slack;
            let scaled = certify(&(m * scale)).unwrap().slack;
            let tol = 1e-9 * (1.0 + base.abs()) * (1.0 + scale * scale);
            prop_assert!((scaled - scale * scale * base).abs() <= tol);
        }

        #[test]
        fn slack_never_goes_negative(
            vals in proptest::collection::vec(-5.0..5.0_f64, 10),
        ) {
            let m = DMatrix::from_row_slice(4, 4, &[
                vals[0], vals[1], vals[2], vals[3],
                vals[1], vals[4], vals[5], vals[6],
                vals[2], vals[5], vals[7], vals[8],
                vals[3], vals[6], vals[8], vals[9],
            ]);
            prop_assert!(certify(&m).unwrap().slack >= -1e-9);
        }
    }
}
