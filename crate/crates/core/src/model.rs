//! Problem data, the trace-of-error-covariance objective and its derivatives.
//!
//! For an allocation `b` the channel precisions are `ρᵢ = κᵢ·4^{bᵢ}` and the
//! information matrix is `M(b) = C_x⁻¹ + Hᵀ diag(ρ) H`. The objective is
//! `F(b) = tr(M(b)⁻¹)`, the trace of the LMMSE error covariance.

use std::f64::consts::LN_2;
use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CholeskyFactor, DenseCholesky, SpdFactorizer};

/// `ln 4`.
pub const LN_4: f64 = 2.0 * LN_2;

/// Largest bit depth accepted by the evaluator; `4^b` stays finite well past it.
pub const MAX_BITS: f64 = 256.0;

const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    sensing: DMatrix<f64>,
    prior: DMatrix<f64>,
    prior_inverse: DMatrix<f64>,
    prior_factor: CholeskyFactor,
    prior_norm: f64,
    prior_is_identity: bool,
    kappa: DVector<f64>,
    budget: f64,
}

impl ProblemInstance {
    /// Validates and builds an instance with a general SPD prior covariance.
    pub fn new(
        sensing: DMatrix<f64>,
        prior: DMatrix<f64>,
        kappa: DVector<f64>,
        budget: f64,
    ) -> Result<Self> {
        let d = sensing.ncols();
        if prior.nrows() != prior.ncols() {
            return Err(Error::InvalidInstance(format!(
                "prior covariance must be square, got {}x{}",
                prior.nrows(),
                prior.ncols()
            )));
        }
        if prior.nrows() != d {
            return Err(Error::DimensionMismatch {
                what: "prior covariance dimension",
                expected: d,
                found: prior.nrows(),
            });
        }
        let scale = prior.amax().max(1.0);
        for i in 0..d {
            for j in 0..i {
                if (prior[(i, j)] - prior[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::InvalidInstance(format!(
                        "prior covariance is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let prior_factor = linalg::cholesky(prior.clone())?;
        let prior_inverse = symmetrize(prior_factor.inverse());
        let prior_norm = linalg::symmetric_spectral_norm(&prior);
        let is_identity = prior == DMatrix::identity(d, d);
        Self::assemble(
            sensing,
            prior,
            prior_inverse,
            prior_factor,
            prior_norm,
            is_identity,
            kappa,
            budget,
        )
    }

    /// Shortcut for the common `C_x = I` setting.
    pub fn with_identity_prior(
        sensing: DMatrix<f64>,
        kappa: DVector<f64>,
        budget: f64,
    ) -> Result<Self> {
        let d = sensing.ncols();
        let eye = DMatrix::identity(d, d);
        let factor = linalg::cholesky(eye.clone())?;
        Self::assemble(sensing, eye.clone(), eye, factor, 1.0, true, kappa, budget)
    }

    /// Builds `κᵢ = 12 / Rᵢ²` from per-channel dynamic ranges.
    pub fn kappa_from_ranges(ranges: &DVector<f64>) -> Result<DVector<f64>> {
        if let Some((i, r)) = ranges.iter().enumerate().find(|(_, r)| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidInstance(format!(
                "dynamic range {i} must be positive and finite, got {r}"
            )));
        }
        Ok(ranges.map(|r| 12.0 / (r * r)))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        sensing: DMatrix<f64>,
        prior: DMatrix<f64>,
        prior_inverse: DMatrix<f64>,
        prior_factor: CholeskyFactor,
        prior_norm: f64,
        prior_is_identity: bool,
        kappa: DVector<f64>,
        budget: f64,
    ) -> Result<Self> {
        let (m, d) = sensing.shape();
        if m == 0 || d == 0 {
            return Err(Error::InvalidInstance(format!(
                "sensing matrix must be nonempty, got {m}x{d}"
            )));
        }
        if kappa.len() != m {
            return Err(Error::DimensionMismatch {
                what: "kappa length",
                expected: m,
                found: kappa.len(),
            });
        }
        if sensing.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInstance("sensing matrix has non-finite entries".into()));
        }
        for i in 0..m {
            if sensing.row(i).iter().all(|&v| v == 0.0) {
                return Err(Error::InvalidInstance(format!("sensing row {i} is zero")));
            }
        }
        if let Some((i, k)) = kappa.iter().enumerate().find(|(_, k)| !(**k > 0.0 && k.is_finite())) {
            return Err(Error::InvalidInstance(format!(
                "kappa[{i}] must be positive and finite, got {k}"
            )));
        }
        if !(budget >= 0.0 && budget.is_finite()) {
            return Err(Error::InvalidInstance(format!(
                "budget must be nonnegative and finite, got {budget}"
            )));
        }
        Ok(Self {
            sensing,
            prior,
            prior_inverse,
            prior_factor,
            prior_norm,
            prior_is_identity,
            kappa,
            budget,
        })
    }

    /// Same matrices and precision constants with a different bit budget.
    pub fn with_budget(&self, budget: f64) -> Result<Self> {
        if !(budget >= 0.0 && budget.is_finite()) {
            return Err(Error::InvalidInstance(format!(
                "budget must be nonnegative and finite, got {budget}"
            )));
        }
        Ok(Self {
            budget,
            ..self.clone()
        })
    }

    /// Number of sensors `m`.
    pub fn sensors(&self) -> usize {
        self.sensing.nrows()
    }

    /// State dimension `d`.
    pub fn states(&self) -> usize {
        self.sensing.ncols()
    }

    pub fn sensing_matrix(&self) -> &DMatrix<f64> {
        &self.sensing
    }

    pub fn prior_covariance(&self) -> &DMatrix<f64> {
        &self.prior
    }

    pub fn prior_factor(&self) -> &CholeskyFactor {
        &self.prior_factor
    }

    pub fn prior_is_identity(&self) -> bool {
        self.prior_is_identity
    }

    /// `‖C_x‖₂`, computed once at construction.
    pub fn prior_norm(&self) -> f64 {
        self.prior_norm
    }

    pub fn kappa(&self) -> &DVector<f64> {
        &self.kappa
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// Dynamic ranges `Rᵢ = √(12/κᵢ)`.
    pub fn dynamic_ranges(&self) -> DVector<f64> {
        self.kappa.map(|k| (12.0 / k).sqrt())
    }

    /// `ρᵢ = κᵢ·4^{bᵢ}`.
    pub fn precision_from_bits(&self, bits: &[f64]) -> Result<DVector<f64>> {
        self.check_bits(bits)?;
        Ok(DVector::from_iterator(
            bits.len(),
            bits.iter().zip(self.kappa.iter()).map(|(&b, &k)| k * 4f64.powf(b)),
        ))
    }

    fn check_bits(&self, bits: &[f64]) -> Result<()> {
        if bits.len() != self.sensors() {
            return Err(Error::DimensionMismatch {
                what: "bit vector length",
                expected: self.sensors(),
                found: bits.len(),
            });
        }
        if let Some((index, &value)) = bits
            .iter()
            .enumerate()
            .find(|(_, b)| !b.is_finite() || **b > MAX_BITS)
        {
            return Err(Error::BitsOutOfRange { index, value });
        }
        Ok(())
    }

    /// `M(b) = C_x⁻¹ + Hᵀ diag(ρ) H`, assembled as a rank-m update with the
    /// rows of `H` scaled by `√ρᵢ`.
    pub fn information_matrix(&self, precisions: &DVector<f64>) -> DMatrix<f64> {
        let mut scaled = self.sensing.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= precisions[i].sqrt();
        }
        let mut info = self.prior_inverse.clone();
        info.gemm(1.0, &scaled.transpose(), &scaled, 1.0);
        symmetrize(info)
    }

    /// Objective, gradient and factor at `bits` using the default factorizer.
    pub fn evaluate(&self, bits: &[f64]) -> Result<Evaluation> {
        self.evaluate_with(bits, &DenseCholesky)
    }

    /// Objective and gradient from a single factorization of `M(b)`.
    ///
    /// `∂F/∂bᵢ = −ln4 · ρᵢ · ‖C_ε hᵢ‖²`, read column by column from `C_ε Hᵀ`.
    pub fn evaluate_with(&self, bits: &[f64], factorizer: &dyn SpdFactorizer) -> Result<Evaluation> {
        let precisions = self.precision_from_bits(bits)?;
        let info = self.information_matrix(&precisions);
        let factor = factorizer.factor(info)?;
        let w = factor.inverse_lower();
        let objective = w.norm_squared();
        let covariance = w.transpose() * &w;
        let cov_ht = &covariance * self.sensing.transpose();
        let gradient = DVector::from_iterator(
            self.sensors(),
            cov_ht
                .column_iter()
                .zip(precisions.iter())
                .map(|(col, &rho)| -LN_4 * rho * col.norm_squared()),
        );
        Ok(Evaluation {
            objective,
            gradient,
            precisions,
            factor,
            covariance,
        })
    }

    pub fn objective(&self, bits: &[f64]) -> Result<f64> {
        Ok(self.evaluate(bits)?.objective)
    }

    /// `L = (ln 4)² ‖C_x‖₂ (2m + 1)`, a global Lipschitz constant of `∇F` on
    /// the feasible set.
    pub fn lipschitz_constant(&self) -> f64 {
        LN_4 * LN_4 * self.prior_norm * (2 * self.sensors() + 1) as f64
    }

    /// Exact bit-space Hessian; intended for validation on small instances.
    ///
    /// `∂²F/∂bᵢ∂bⱼ = (ln4)² [δᵢⱼ ρᵢ ∂f/∂ρᵢ + 2 ρᵢ ρⱼ (hᵢᵀC hⱼ)(hᵢᵀC² hⱼ)]`.
    pub fn hessian_exact(&self, bits: &[f64]) -> Result<DMatrix<f64>> {
        let eval = self.evaluate(bits)?;
        let cov_ht = &eval.covariance * self.sensing.transpose();
        let first = &self.sensing * &cov_ht; // h_i' C h_j
        let second = cov_ht.transpose() * &cov_ht; // h_i' C^2 h_j
        let rho = &eval.precisions;
        let m = self.sensors();
        let mut hess = DMatrix::zeros(m, m);
        for j in 0..m {
            for i in 0..m {
                let mut v = 2.0 * rho[i] * rho[j] * first[(i, j)] * second[(i, j)];
                if i == j {
                    v -= rho[i] * second[(i, i)];
                }
                hess[(i, j)] = LN_4 * LN_4 * v;
            }
        }
        Ok(symmetrize(hess))
    }

    /// Checks `b ≥ −tol` and `1ᵀb ≤ B + tol`.
    pub fn is_feasible(&self, bits: &[f64], tol: f64) -> bool {
        bits.len() == self.sensors()
            && bits.iter().all(|&b| b.is_finite() && b >= -tol)
            && bits.iter().sum::<f64>() <= self.budget + tol
    }
}

fn symmetrize(mut a: DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    for j in 0..n {
        for i in j + 1..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    a
}

/// A candidate allocation of bits to channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitVector {
    bits: Vec<f64>,
    is_integral: bool,
}

impl BitVector {
    /// Continuous allocation; components must be finite and nonnegative.
    pub fn new(bits: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = bits
            .iter()
            .enumerate()
            .find(|(_, b)| !b.is_finite() || **b < 0.0)
        {
            return Err(Error::BitsOutOfRange { index, value });
        }
        let is_integral = bits.iter().all(|b| b.fract() == 0.0);
        Ok(Self { bits, is_integral })
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            bits: vec![0.0; m],
            is_integral: true,
        }
    }

    pub fn from_integers(bits: &[u64]) -> Self {
        Self {
            bits: bits.iter().map(|&b| b as f64).collect(),
            is_integral: true,
        }
    }

    /// Wraps iterates that may carry roundoff-sized negative components.
    pub(crate) fn from_iterate(bits: Vec<f64>) -> Self {
        let is_integral = bits.iter().all(|b| b.fract() == 0.0 && *b >= 0.0);
        Self { bits, is_integral }
    }

    pub fn is_integral(&self) -> bool {
        self.is_integral
    }

    pub fn total(&self) -> f64 {
        self.bits.iter().sum()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.bits
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.bits
    }

    pub fn is_feasible_for(&self, instance: &ProblemInstance, tol: f64) -> bool {
        instance.is_feasible(&self.bits, tol)
    }
}

impl Deref for BitVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.bits
    }
}

/// Objective, gradient and factorization byproducts at one allocation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub objective: f64,
    pub gradient: DVector<f64>,
    pub precisions: DVector<f64>,
    pub factor: CholeskyFactor,
    /// `C_ε(b) = M(b)⁻¹`.
    pub covariance: DMatrix<f64>,
}

impl Evaluation {
    /// `ρ ⊙ ∇f(ρ)`, the diagonal of the negative semidefinite curvature term
    /// in the bit-space Hessian, scaled by `1/ln4`.
    pub fn precision_weighted_gradient(&self) -> DVector<f64> {
        self.gradient.map(|g| g / LN_4)
    }
}
