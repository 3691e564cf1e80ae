//! Anisotropic Gaussian and Student-t targets.
//!
//! A target is `N(0, Σ)` with `Σ = Uᵀ Λ² U`, where `U` is orthogonal and
//! `Λ = diag(Λ_K, ε·Λ_L)` splits the coordinates into a slow block `K`
//! (indices `0..k`) and a fast block `L` (indices `k..d`) scaled by the
//! anisotropy `ε ∈ (0, 1]`. The reparametrisation `y = Λ⁻¹ U x` makes the
//! stationary position law `N(0, I)` for every `ε`, which is what all
//! diagnostics in this crate work in.
//!
//! The Student-t target reuses `Σ` as its *scale* matrix: its covariance is
//! `ν/(ν−2)·Σ`, a constant factor that does not affect any of the log-log
//! scaling statistics computed downstream.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Max-abs tolerance for the orthogonality check `UᵀU = I`.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;
/// Threshold below which a sign-vector quadratic form counts as zero.
pub const FLIPPABILITY_TOL: f64 = 1e-12;
/// Largest dimension for which `{−1,0,+1}^d` enumeration is allowed.
pub const FLIPPABILITY_MAX_DIM: usize = 16;

/// Centered Gaussian target with a two-scale eigenstructure.
#[derive(Debug, Clone)]
pub struct AnisotropicGaussian {
    dim: usize,
    k: usize,
    l: usize,
    rotation: DMatrix<f64>,
    lambda_k: DVector<f64>,
    lambda_l: DVector<f64>,
    epsilon: f64,
    // cached products, all O(d²)
    lambda: DVector<f64>,          // diag of Λ
    lambda_inv_u: DMatrix<f64>,    // Λ⁻¹ U        (y = this · x)
    u_t_lambda: DMatrix<f64>,      // Uᵀ Λ         (x = this · y)
    u_t_lambda_inv: DMatrix<f64>,  // Uᵀ Λ⁻¹       (rate offsets a = this · y)
    precision: DMatrix<f64>,       // Uᵀ Λ⁻² U
}

impl AnisotropicGaussian {
    /// Build a target from an explicit rotation and per-block scales.
    pub fn new(
        rotation: DMatrix<f64>,
        lambda_k: DVector<f64>,
        lambda_l: DVector<f64>,
        epsilon: f64,
    ) -> Result<Self> {
        Self::with_orthogonality_tol(rotation, lambda_k, lambda_l, epsilon, ORTHOGONALITY_TOL)
    }

    /// Same as [`Self::new`] with a caller-chosen orthogonality tolerance.
    pub fn with_orthogonality_tol(
        rotation: DMatrix<f64>,
        lambda_k: DVector<f64>,
        lambda_l: DVector<f64>,
        epsilon: f64,
        ortho_tol: f64,
    ) -> Result<Self> {
        let k = lambda_k.len();
        let l = lambda_l.len();
        let dim = k + l;
        if k == 0 || l == 0 {
            return Err(Error::InvalidTarget(format!(
                "both coordinate blocks must be non-empty, got k={k}, l={l}"
            )));
        }
        if rotation.nrows() != dim || rotation.ncols() != dim {
            return Err(Error::InvalidTarget(format!(
                "rotation must be {dim}x{dim}, got {}x{}",
                rotation.nrows(),
                rotation.ncols()
            )));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidTarget(format!("epsilon must be positive, got {epsilon}")));
        }
        for (name, v) in [("lambda_k", &lambda_k), ("lambda_l", &lambda_l)] {
            if v.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::InvalidTarget(format!(
                    "{name} must have strictly positive finite entries"
                )));
            }
        }
        let gram = rotation.transpose() * &rotation;
        let dev = (&gram - DMatrix::identity(dim, dim)).abs().max();
        if dev > ortho_tol {
            return Err(Error::InvalidTarget(format!(
                "rotation is not orthogonal: max |UᵀU - I| = {dev:.3e} > {ortho_tol:.1e}"
            )));
        }

        let mut lambda = DVector::zeros(dim);
        for i in 0..k {
            lambda[i] = lambda_k[i];
        }
        for j in 0..l {
            lambda[k + j] = epsilon * lambda_l[j];
        }
        let mut lambda_inv_u = rotation.clone();
        for i in 0..dim {
            let s = 1.0 / lambda[i];
            lambda_inv_u.row_mut(i).scale_mut(s);
        }
        let u_t_lambda_inv = lambda_inv_u.transpose();
        let mut u_t_lambda = rotation.transpose();
        for i in 0..dim {
            let s = lambda[i];
            u_t_lambda.column_mut(i).scale_mut(s);
        }
        let precision = &u_t_lambda_inv * &lambda_inv_u;

        Ok(Self {
            dim,
            k,
            l,
            rotation,
            lambda_k,
            lambda_l,
            epsilon,
            lambda,
            lambda_inv_u,
            u_t_lambda,
            u_t_lambda_inv,
            precision,
        })
    }

    /// Canonical two-dimensional family: rotation by `theta`, unit scales,
    /// so `Λ = diag(1, ε)`.
    pub fn rotated_2d(theta: f64, epsilon: f64) -> Result<Self> {
        Self::new(
            make_rotation_2d(theta),
            DVector::from_element(1, 1.0),
            DVector::from_element(1, 1.0),
            epsilon,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn slow_len(&self) -> usize {
        self.k
    }

    pub fn fast_len(&self) -> usize {
        self.l
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    pub fn lambda_k(&self) -> &DVector<f64> {
        &self.lambda_k
    }

    pub fn lambda_l(&self) -> &DVector<f64> {
        &self.lambda_l
    }

    /// Diagonal of `Λ = diag(Λ_K, ε·Λ_L)`.
    pub fn lambda(&self) -> &DVector<f64> {
        &self.lambda
    }

    /// Precision matrix `Σ⁻¹ = Uᵀ Λ⁻² U`.
    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    /// Covariance matrix `Σ = Uᵀ Λ² U`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let mut lambda_sq_u = self.rotation.clone();
        for i in 0..self.dim {
            let s = self.lambda[i] * self.lambda[i];
            lambda_sq_u.row_mut(i).scale_mut(s);
        }
        self.rotation.transpose() * lambda_sq_u
    }

    /// `Λ⁻¹ U`, the linear map taking `x` to `y`.
    pub fn reparam(&self) -> &DMatrix<f64> {
        &self.lambda_inv_u
    }

    /// `Uᵀ Λ`, the linear map taking `y` back to `x`.
    pub fn reparam_inv(&self) -> &DMatrix<f64> {
        &self.u_t_lambda
    }

    /// `Uᵀ Λ⁻¹`; applied to `y` it yields the vector whose signed entries
    /// drive the per-coordinate Zig-Zag switching rates.
    pub fn rate_map(&self) -> &DMatrix<f64> {
        &self.u_t_lambda_inv
    }

    /// Reparametrise a position: `y = Λ⁻¹ U x`.
    pub fn to_y(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.lambda_inv_u * x
    }

    /// Invert the reparametrisation: `x = Uᵀ Λ y`.
    pub fn to_x(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.u_t_lambda * y
    }

    /// `Θ_L = U_{L,·}ᵀ Λ_L⁻² U_{L,·}`, the Gram matrix of the fast rows of
    /// the rotation. Its diagonal controls small-ε jump rates and its
    /// quadratic form on sign vectors decides flippability.
    pub fn theta_l(&self) -> DMatrix<f64> {
        let u_l = self.rotation.rows(self.k, self.l);
        let mut scaled = u_l.clone_owned();
        for j in 0..self.l {
            let s = 1.0 / (self.lambda_l[j] * self.lambda_l[j]);
            scaled.row_mut(j).scale_mut(s);
        }
        u_l.transpose() * scaled
    }

    /// Whether `vᵀ Θ_L v > 0` for every sign vector `v ∈ {−1,0,+1}^d \ {0}`,
    /// the condition under which every velocity component keeps switching in
    /// the fast subsystem and the small-ε diffusion limit applies.
    pub fn check_flippability(&self) -> Result<bool> {
        if self.dim > FLIPPABILITY_MAX_DIM {
            return Err(Error::DimensionTooLarge { dim: self.dim, max: FLIPPABILITY_MAX_DIM });
        }
        let theta_l = self.theta_l();
        let d = self.dim;
        let total = 3usize.pow(d as u32);
        let mut v = DVector::zeros(d);
        for code in 0..total {
            let mut c = code;
            let mut nonzero = false;
            for i in 0..d {
                v[i] = (c % 3) as f64 - 1.0;
                nonzero |= v[i] != 0.0;
                c /= 3;
            }
            if !nonzero {
                continue;
            }
            let q = v.dot(&(&theta_l * &v));
            if q <= FLIPPABILITY_TOL {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// True when every diagonal entry of `Λ_L` equals 1 within `tol`.
    pub fn lambda_l_is_identity(&self, tol: f64) -> bool {
        self.lambda_l.iter().all(|&x| (x - 1.0).abs() <= tol)
    }

    /// Draw `x ~ N(0, Σ)`.
    pub fn sample_x<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        self.to_x(&z)
    }
}

/// Two-dimensional rotation by `theta`.
pub fn make_rotation_2d(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Heavy-tailed companion target: multivariate Student-t with `ν` degrees of
/// freedom and scale matrix `Σ` borrowed from an anisotropic Gaussian.
///
/// With `ν > 2` the covariance is `ν/(ν−2)·Σ`; we keep `Σ` itself as the
/// scale parameter and report the factor where second moments are compared.
#[derive(Debug, Clone)]
pub struct StudentTarget {
    base: AnisotropicGaussian,
    nu: f64,
}

impl StudentTarget {
    pub fn new(base: AnisotropicGaussian, nu: f64) -> Result<Self> {
        if !(nu > 2.0 && nu.is_finite()) {
            return Err(Error::InvalidTarget(format!(
                "student degrees of freedom must satisfy nu > 2, got {nu}"
            )));
        }
        Ok(Self { base, nu })
    }

    pub fn base(&self) -> &AnisotropicGaussian {
        &self.base
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Covariance `ν/(ν−2)·Σ` of the Student law.
    pub fn covariance(&self) -> DMatrix<f64> {
        self.base.covariance() * (self.nu / (self.nu - 2.0))
    }

    /// Gradient of the negative log-density,
    /// `(ν+d)·Σ⁻¹x / (ν + xᵀΣ⁻¹x)`.
    pub fn grad_neg_log(&self, x: &DVector<f64>) -> DVector<f64> {
        let px = self.base.precision() * x;
        let quad = x.dot(&px);
        px * ((self.nu + self.dim() as f64) / (self.nu + quad))
    }

    /// Draw `x` from the Student law: a Gaussian draw rescaled by
    /// `√(ν/W)` with `W ~ χ²_ν`.
    pub fn sample_x<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let chi2 = ChiSquared::new(self.nu).expect("nu > 2 validated at construction");
        let w: f64 = chi2.sample(rng);
        self.base.sample_x(rng) * (self.nu / w).sqrt()
    }
}
