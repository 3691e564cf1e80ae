//! Closed-form small-ε limit objects for the two-dimensional rotated family
//! and the general jump-count references.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::AnisotropicGaussian;
use crate::special::{gamma_half_ratio, mills_ratio};

/// Half-width of the rejected band around the aligned angles `nπ/4`.
pub const ALIGNMENT_GUARD: f64 = 1e-6;

/// Diffusion coefficient `Ω(θ)` of the slow coordinate of the
/// two-dimensional Zig-Zag sampler (unit scales, `Λ = diag(1, ε)`), in the
/// `ε→0` limit after speeding time up by `ε⁻¹`.
///
/// The expression has two branches meeting at `|sin θ| = |cos θ|`:
///
/// ```text
/// Ω = 8/√π · arctanh(√|tan θ|)   / ((1+|sin 2θ|)·√|sin 2θ|) + √(2π)/(|sin θ|(1+|sin 2θ|))   if |sin θ| < |cos θ|
/// Ω = 8/√π · arctanh(√(1/|tan θ|))/ ((1+|sin 2θ|)·√|sin 2θ|) + √(2π)/(|cos θ|(1+|sin 2θ|))   if |sin θ| > |cos θ|
/// ```
///
/// It is symmetric under `θ → θ + π/2` and `θ → −θ`, and diverges at the
/// aligned angles `θ = nπ/4`, which are rejected (guard band
/// [`ALIGNMENT_GUARD`]).
pub fn omega_closed_form(theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::InvalidArgument("theta must be finite".into()));
    }
    let quarter = std::f64::consts::FRAC_PI_4;
    let nearest = (theta / quarter).round() * quarter;
    if (theta - nearest).abs() <= ALIGNMENT_GUARD {
        return Err(Error::InvalidArgument(format!(
            "theta = {theta} is within {ALIGNMENT_GUARD} of an aligned angle nπ/4, \
             where the diffusion coefficient diverges"
        )));
    }
    let s = theta.sin().abs();
    let c = theta.cos().abs();
    let s2 = (2.0 * theta).sin().abs();
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let sqrt_2pi = (2.0 * std::f64::consts::PI).sqrt();
    let (atanh_arg, tail_scale) = if s < c { (s / c, s) } else { (c / s, c) };
    let x = atanh_arg.sqrt().min(1.0 - 1e-15);
    let arctanh = 0.5 * ((1.0 + x) / (1.0 - x)).ln();
    Ok(8.0 / sqrt_pi * arctanh / ((1.0 + s2) * s2.sqrt()) + sqrt_2pi / (tail_scale * (1.0 + s2)))
}

/// Parameters of the limiting Ornstein–Uhlenbeck process
/// `dX = −½Υ X dt + Ω^{1/2} dW` for the slow block.
#[derive(Debug, Clone)]
pub struct OuParams {
    omega: DMatrix<f64>,
    upsilon: DMatrix<f64>,
}

impl OuParams {
    pub fn new(omega: DMatrix<f64>, upsilon: DMatrix<f64>) -> Result<Self> {
        let k = omega.nrows();
        if omega.ncols() != k || upsilon.nrows() != k || upsilon.ncols() != k {
            return Err(Error::InvalidArgument("omega and upsilon must be square, same size".into()));
        }
        if (&omega - omega.transpose()).abs().max() > 1e-10 {
            return Err(Error::InvalidArgument("omega must be symmetric".into()));
        }
        let min_eig = omega.symmetric_eigenvalues().min();
        if min_eig <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "omega must be positive definite, min eigenvalue {min_eig}"
            )));
        }
        Ok(Self { omega, upsilon })
    }

    pub fn scalar(omega: f64, upsilon: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(1, 1, omega), DMatrix::from_element(1, 1, upsilon))
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn upsilon(&self) -> &DMatrix<f64> {
        &self.upsilon
    }

    pub fn dim(&self) -> usize {
        self.omega.nrows()
    }
}

/// Stationary covariance of the Ornstein–Uhlenbeck process above: the
/// solution `S` of `ΥS + SΥᵀ = 2Ω`.
///
/// When `Ω = (Υ + Υᵀ)/2` this is the identity (the process is `N(0, I)`
/// stationary by construction); otherwise the Lyapunov system is solved
/// densely via vectorisation.
pub fn ou_stationary_variance(p: &OuParams) -> Result<DMatrix<f64>> {
    let k = p.dim();
    let sym = (p.upsilon() + p.upsilon().transpose()) * 0.5;
    let scale = 1.0 + p.omega().abs().max();
    if (p.omega() - &sym).abs().max() <= 1e-12 * scale {
        return Ok(DMatrix::identity(k, k));
    }
    // (I ⊗ Υ + Υ ⊗ I) vec(S) = 2 vec(Ω), column-major vec
    let n = k * k;
    let mut a = DMatrix::zeros(n, n);
    for col in 0..k {
        for row in 0..k {
            let eq = col * k + row;
            for m in 0..k {
                a[(eq, col * k + m)] += p.upsilon()[(row, m)];
                a[(eq, m * k + row)] += p.upsilon()[(col, m)];
            }
        }
    }
    let rhs = DVector::from_fn(n, |i, _| 2.0 * p.omega()[(i % k, i / k)]);
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidArgument("lyapunov system is singular".into()))?;
    let s = DMatrix::from_fn(k, k, |r, c| sol[c * k + r]);
    Ok((&s + s.transpose()) * 0.5)
}

/// State of the two-dimensional fluid limit of the Bouncy Particle Sampler:
/// slow position `y₁`, slow velocity `v₁`, and the conserved total speed
/// `κ = |v(0)|`.
#[derive(Debug, Clone, Copy)]
pub struct FluidState {
    pub y1: f64,
    pub v1: f64,
    pub kappa: f64,
}

impl FluidState {
    pub fn new(y1: f64, v1: f64, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) || v1 * v1 >= kappa * kappa {
            return Err(Error::InvalidArgument(format!(
                "fluid state needs v1² < κ², got v1 = {v1}, κ = {kappa}"
            )));
        }
        Ok(Self { y1, v1, kappa })
    }
}

/// Fluid path sampled at multiples of the integration step.
#[derive(Debug, Clone)]
pub struct FluidPath {
    pub step: f64,
    pub kappa: f64,
    /// `(y₁, v₁)` at `t = 0, h, 2h, …`.
    pub states: Vec<(f64, f64)>,
}

impl FluidPath {
    pub fn fast_speed(&self, i: usize) -> f64 {
        let (_, v1) = self.states[i];
        (self.kappa * self.kappa - v1 * v1).sqrt()
    }
}

/// Integrate the fluid ODE
///
/// `dy₁/dt = v₁`, `dv₁/dt = −(κ² − v₁²) y₁`
///
/// with the classical fourth-order Runge–Kutta step.
pub fn fluid_integrate(init: FluidState, total_time: f64, step: f64) -> Result<FluidPath> {
    if !(step > 0.0 && total_time > 0.0) {
        return Err(Error::InvalidArgument("step and horizon must be positive".into()));
    }
    let kappa2 = init.kappa * init.kappa;
    let f = |y: f64, v: f64| (v, -(kappa2 - v * v) * y);
    let n = (total_time / step).floor() as usize;
    let mut states = Vec::with_capacity(n + 1);
    let (mut y, mut v) = (init.y1, init.v1);
    states.push((y, v));
    for _ in 0..n {
        let (k1y, k1v) = f(y, v);
        let (k2y, k2v) = f(y + 0.5 * step * k1y, v + 0.5 * step * k1v);
        let (k3y, k3v) = f(y + 0.5 * step * k2y, v + 0.5 * step * k2v);
        let (k4y, k4v) = f(y + step * k3y, v + step * k3v);
        y += step / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        v += step / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if v * v >= kappa2 {
            return Err(Error::InvalidArgument(format!(
                "fluid integration left the admissible region: v1 = {v}, κ = {}",
                init.kappa
            )));
        }
        states.push((y, v));
    }
    Ok(FluidPath { step, kappa: init.kappa, states })
}

/// First integral of the fluid ODE: `H = y₁² − log(κ² − v₁²)`.
///
/// Along the flow, `dH/dt = 2y₁v₁ − (−2v₁·v̇₁)/(κ²−v₁²)·(−1) = 2y₁v₁ − 2y₁v₁ = 0`;
/// the sign of the log term is forced by this cancellation (a `+` sign would
/// drift at rate `4y₁v₁`), and by the harmonic small-oscillation limit
/// `y₁² + v₁²/κ² = const` near the origin.
pub fn conserved_h(s: &FluidState) -> Result<f64> {
    let w = s.kappa * s.kappa - s.v1 * s.v1;
    if w <= 0.0 {
        return Err(Error::InvalidArgument("v1² must stay below κ²".into()));
    }
    Ok(s.y1 * s.y1 - w.ln())
}

/// Both readings of the averaged squared-normal-component coefficient
/// `c(α, β)` of the fast block, with `r = √(β/α)`.
///
/// * `full_line` — `α(1 − r·Φ(−r)/φ(r))`, the full-line Gaussian integral
///   `α·E[z²/(r²+z²)]`.
/// * `half_line` — half of it, the one-sided expectation
///   `α·E[z₊²/(r²+z²)]` under the same standard normal law.
///
/// The fast-subsystem time average in the acceptance suite matches
/// `half_line` (the rate indicator `z > 0` holds half the time in
/// stationarity); `full_line` is reported alongside for reference.
#[derive(Debug, Clone, Copy)]
pub struct CCoefficients {
    pub full_line: f64,
    pub half_line: f64,
}

pub fn c_coeff(alpha: f64, beta: f64) -> Result<CCoefficients> {
    if !(alpha > 0.0) || !(beta >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need alpha > 0 and beta >= 0, got ({alpha}, {beta})"
        )));
    }
    let r = (beta / alpha).sqrt();
    let full = alpha * (1.0 - r * mills_ratio(r));
    Ok(CCoefficients { full_line: full, half_line: 0.5 * full })
}

/// Closed-form reference for the expected Zig-Zag jump count on `[0, T]`
/// in stationarity: `(T / 2√(2π)) Σᵢ √((Σ⁻¹)ᵢᵢ)`.
pub fn zz_expected_jumps(target: &AnisotropicGaussian, horizon: f64) -> f64 {
    let sqrt_2pi = (2.0 * std::f64::consts::PI).sqrt();
    let sum: f64 = (0..target.dim()).map(|i| target.precision()[(i, i)].sqrt()).sum();
    horizon / (2.0 * sqrt_2pi) * sum
}

/// Small-ε limit of `ε ×` the reference above:
/// `(T / 2√(2π)) Σᵢ √((Θ_L)ᵢᵢ)`.
pub fn zz_jump_limit(target: &AnisotropicGaussian, horizon: f64) -> f64 {
    let sqrt_2pi = (2.0 * std::f64::consts::PI).sqrt();
    let theta_l = target.theta_l();
    let sum: f64 = (0..target.dim()).map(|i| theta_l[(i, i)].sqrt()).sum();
    horizon / (2.0 * sqrt_2pi) * sum
}

/// Closed-form references for the Bouncy Particle jump count on `[0, T]`:
/// the upper bound `(T/2)(tr(Λ⁻¹) + 2ρ)` and the small-ε limit of
/// `ε·E[N_T]`, `(T/2√π)·Γ((l+1)/2)/Γ(l/2)`.
#[derive(Debug, Clone, Copy)]
pub struct BpsJumpReference {
    pub upper_bound: f64,
    pub small_eps_limit: f64,
}

pub fn bps_expected_jumps(target: &AnisotropicGaussian, horizon: f64, rho: f64) -> BpsJumpReference {
    let trace: f64 = target.lambda().iter().map(|l| 1.0 / l).sum();
    let upper_bound = horizon / 2.0 * (trace + 2.0 * rho);
    let small_eps_limit =
        horizon / (2.0 * std::f64::consts::PI.sqrt()) * gamma_half_ratio(target.fast_len());
    BpsJumpReference { upper_bound, small_eps_limit }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const PI: f64 = std::f64::consts::PI;

    #[test]
    fn omega_symmetries_and_reference_value() {
        let th = 0.3;
        assert_relative_eq!(
            omega_closed_form(th).unwrap(),
            omega_closed_form(PI / 2.0 - th).unwrap(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            omega_closed_form(th).unwrap(),
            omega_closed_form(-th).unwrap(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            omega_closed_form(th).unwrap(),
            omega_closed_form(th + PI / 2.0).unwrap(),
            max_relative = 1e-12
        );
        // transcription pin, cross-evaluated independently
        assert_relative_eq!(omega_closed_form(PI / 6.0).unwrap(), 5.274902744361, epsilon = 1e-9);
        assert_relative_eq!(omega_closed_form(0.3).unwrap(), 7.829223273722, epsilon = 1e-9);
    }

    #[test]
    fn omega_blows_up_towards_alignment() {
        let mut last = 0.0;
        for th in [1e-1, 1e-2, 1e-3] {
            let w = omega_closed_form(th).unwrap();
            assert!(w > last, "Ω({th}) = {w} not increasing");
            last = w;
        }
        assert!(omega_closed_form(0.0).is_err());
        assert!(omega_closed_form(PI / 4.0).is_err());
        assert!(omega_closed_form(PI / 4.0 + 1e-9).is_err());
    }

    #[test]
    fn omega_branches_agree_near_the_diagonal() {
        let a = omega_closed_form(PI / 4.0 - 1e-3).unwrap();
        let b = omega_closed_form(PI / 4.0 + 1e-3).unwrap();
        assert!((a / b - 1.0).abs() < 0.05, "{a} vs {b}");
    }

    #[test]
    fn ou_variance_cases() {
        let p = OuParams::scalar(5.0, 5.0).unwrap();
        let s = ou_stationary_variance(&p).unwrap();
        assert_relative_eq!(s[(0, 0)], 1.0, epsilon = 1e-14);

        let p = OuParams::scalar(3.0, 6.0).unwrap();
        let s = ou_stationary_variance(&p).unwrap();
        assert_relative_eq!(s[(0, 0)], 0.5, epsilon = 1e-12);

        let omega = DMatrix::from_diagonal(&DVector::from_row_slice(&[2.0, 3.0]));
        let upsilon = DMatrix::from_diagonal(&DVector::from_row_slice(&[4.0, 3.0]));
        let p = OuParams::new(omega, upsilon).unwrap();
        let s = ou_stationary_variance(&p).unwrap();
        assert_relative_eq!(s[(0, 0)], 0.5, epsilon = 1e-12);
        assert_relative_eq!(s[(1, 1)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(s[(0, 1)], 0.0, epsilon = 1e-12);

        // non-PD omega rejected
        assert!(OuParams::scalar(-1.0, 1.0).is_err());
    }

    #[test]
    fn fluid_fixed_point_and_conservation() {
        let origin = FluidState::new(0.0, 0.0, 1.0).unwrap();
        let path = fluid_integrate(origin, 5.0, 1e-2).unwrap();
        for &(y, v) in &path.states {
            assert_eq!((y, v), (0.0, 0.0));
        }

        let init = FluidState::new(0.8, 0.3, 1.2).unwrap();
        let h0 = conserved_h(&init).unwrap();
        let path = fluid_integrate(init, 10.0, 1e-3).unwrap();
        let mut max_drift: f64 = 0.0;
        for &(y, v) in &path.states {
            assert!(v * v < init.kappa * init.kappa);
            let h = conserved_h(&FluidState { y1: y, v1: v, kappa: init.kappa }).unwrap();
            max_drift = max_drift.max((h - h0).abs());
        }
        assert!(max_drift < 1e-8, "conserved quantity drifted by {max_drift}");
    }

    #[test]
    fn fluid_integrator_is_fourth_order() {
        // steps large enough that truncation dominates rounding
        let init = FluidState::new(1.0, 0.2, 1.0).unwrap();
        let t = 2.0;
        let exact = fluid_integrate(init, t, 1e-4).unwrap().states.last().cloned().unwrap();
        let err = |h: f64| {
            let end = fluid_integrate(init, t, h).unwrap().states.last().cloned().unwrap();
            ((end.0 - exact.0).powi(2) + (end.1 - exact.1).powi(2)).sqrt()
        };
        let e1 = err(4e-2);
        let e2 = err(2e-2);
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.5, "observed order {order} (errors {e1}, {e2})");
    }

    #[test]
    fn conserved_h_values() {
        assert_relative_eq!(
            conserved_h(&FluidState::new(0.0, 0.0, 1.0).unwrap()).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            conserved_h(&FluidState::new(1.0, 0.0, 1.0).unwrap()).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert!(FluidState::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn c_coefficients() {
        let c = c_coeff(2.5, 0.0).unwrap();
        assert_relative_eq!(c.full_line, 2.5, epsilon = 1e-14);
        assert_relative_eq!(c.half_line, 1.25, epsilon = 1e-14);

        let c = c_coeff(1.0, 1.0).unwrap();
        assert_relative_eq!(c.full_line, 0.344320457581201, max_relative = 1e-9);
        assert_relative_eq!(c.half_line, 0.172160228790601, max_relative = 1e-9);

        assert!(c_coeff(0.0, 1.0).is_err());
        assert!(c_coeff(1.0, -0.1).is_err());
    }

    #[test]
    fn zz_jump_reference_values() {
        let sqrt_2pi = (2.0 * PI).sqrt();
        for eps in [1.0, 0.1, 0.01] {
            let t = AnisotropicGaussian::rotated_2d(0.0, eps).unwrap();
            let expect = 100.0 / (2.0 * sqrt_2pi) * (1.0 + 1.0 / eps);
            assert_relative_eq!(zz_expected_jumps(&t, 100.0), expect, max_relative = 1e-12);
        }
        // linear in T
        let t = AnisotropicGaussian::rotated_2d(0.4, 0.2).unwrap();
        assert_relative_eq!(
            zz_expected_jumps(&t, 50.0) * 4.0,
            zz_expected_jumps(&t, 200.0),
            max_relative = 1e-12
        );
        assert_eq!(zz_expected_jumps(&t, 0.0), 0.0);

        // ε · finite-ε value approaches the limit
        let theta = PI / 6.0;
        let eps = 1e-3;
        let t = AnisotropicGaussian::rotated_2d(theta, eps).unwrap();
        let lim = zz_jump_limit(&t, 100.0);
        let scaled = eps * zz_expected_jumps(&t, 100.0);
        assert!((scaled / lim - 1.0).abs() < 0.01, "{scaled} vs {lim}");
    }

    #[test]
    fn bps_jump_reference_values() {
        let t = AnisotropicGaussian::rotated_2d(0.0, 0.1).unwrap();
        let r = bps_expected_jumps(&t, 10.0, 1.0);
        assert_relative_eq!(r.upper_bound, 5.0 * (1.0 + 10.0 + 2.0), epsilon = 1e-12);
        // l = 1 limit: T/(2π)
        assert_relative_eq!(r.small_eps_limit, 10.0 / (2.0 * PI), epsilon = 1e-12);

        // l = 2 limit: T/4
        let t3 = AnisotropicGaussian::new(
            DMatrix::identity(3, 3),
            DVector::from_element(1, 1.0),
            DVector::from_element(2, 1.0),
            0.1,
        )
        .unwrap();
        let r = bps_expected_jumps(&t3, 10.0, 0.0);
        assert_relative_eq!(r.small_eps_limit, 2.5, epsilon = 1e-12);
    }
}
