//! Event-driven Bouncy Particle Sampler.
//!
//! The sampler is rotation-invariant, so in the reparametrised coordinates
//! `y` the rotation drops out entirely and only `Λ = diag(Λ_K, εΛ_L)`
//! enters: the flow is `ẏ = Λ⁻¹v`, reflections fire at rate `(vᵀΛ⁻¹y)₊` and
//! map `v ↦ v − 2(vᵀn) n/|n|²` with `n = Λ⁻¹y`, and refreshments replace
//! `v` by a fresh standard normal vector at rate `ρ`. Along the flow the
//! reflection rate is the linear hazard with
//!
//! * `a = vᵀΛ⁻¹y`
//! * `γ = vᵀΛ⁻²v > 0`
//!
//! so event times are exact hazard inversions and arrivals are almost surely
//! finite.
//!
//! With `Λ_L = I`, the fast block `(y_L, v_L)` taken on its own (the
//! "fast subsystem": flow `ẏ_L = v_L`, rate `(v_Lᵀy_L)₊`, reflections only)
//! conserves `α = |v_L|²` and `β = |v_L|²|y_L|² − (v_Lᵀy_L)²`, and the
//! signed tangent coordinate `z = v_Lᵀy_L/|v_L|` increases at speed `√α`
//! between reflections and flips sign at them. [`fast_subsystem_run`]
//! simulates exactly that block and integrates functionals of `z` in closed
//! form segment by segment.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::event_clock::{first_arrival_linear, LinearHazard};
use crate::model::AnisotropicGaussian;
use crate::trajectory::{EventKind, Trajectory};
use crate::zigzag::MAX_EVENTS;

/// Tolerance for the `Λ_L = I` requirement of the fast-subsystem statistics.
pub const LAMBDA_L_IDENTITY_TOL: f64 = 1e-12;

/// Sampler state in reparametrised coordinates.
#[derive(Debug, Clone)]
pub struct BpsState {
    pub y: DVector<f64>,
    /// Real-valued velocity (nonzero).
    pub v: DVector<f64>,
    pub t: f64,
}

impl BpsState {
    pub fn new(y: DVector<f64>, v: DVector<f64>, t: f64) -> Result<Self> {
        if y.len() != v.len() {
            return Err(Error::InvalidArgument("position/velocity length mismatch".into()));
        }
        if v.iter().all(|&vi| vi == 0.0) || v.iter().any(|vi| !vi.is_finite()) {
            return Err(Error::InvalidArgument("velocity must be finite and nonzero".into()));
        }
        Ok(Self { y, v, t })
    }

    /// Draw from the stationary law `N(0, I) ⊗ N(0, I)`.
    pub fn stationary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let y = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        Self { y, v, t: 0.0 }
    }
}

/// Linear hazard of the reflection clock at the current state.
pub fn bps_hazard(state: &BpsState, target: &AnisotropicGaussian) -> LinearHazard {
    let lambda = target.lambda();
    let mut a = 0.0;
    let mut gamma = 0.0;
    for i in 0..lambda.len() {
        let w = state.v[i] / lambda[i];
        a += w * state.y[i];
        gamma += w * w;
    }
    LinearHazard::new(a, gamma)
}

/// Reflect `v` in the hyperplane orthogonal to `n = Λ⁻¹y`.
///
/// Preserves `|v|`, negates `vᵀn`, and is an involution. Rejects `y = 0`,
/// where no reflection direction exists.
pub fn bps_reflect(
    y: &DVector<f64>,
    v: &DVector<f64>,
    target: &AnisotropicGaussian,
) -> Result<DVector<f64>> {
    let lambda = target.lambda();
    let n = DVector::from_fn(y.len(), |i, _| y[i] / lambda[i]);
    let nn = n.norm_squared();
    if nn == 0.0 {
        return Err(Error::InvalidArgument("reflection undefined at y = 0".into()));
    }
    let coef = 2.0 * v.dot(&n) / nn;
    Ok(v - n * coef)
}

fn reflect_in_place(y: &DVector<f64>, v: &mut DVector<f64>, lambda: &DVector<f64>) -> bool {
    let mut dot = 0.0;
    let mut nn = 0.0;
    for i in 0..y.len() {
        let ni = y[i] / lambda[i];
        dot += v[i] * ni;
        nn += ni * ni;
    }
    if nn == 0.0 {
        return false;
    }
    let coef = 2.0 * dot / nn;
    for i in 0..y.len() {
        v[i] -= coef * y[i] / lambda[i];
    }
    true
}

/// Run the Bouncy Particle Sampler for `horizon` time units with
/// refreshment rate `rho ≥ 0`.
///
/// Reflection and refreshment clocks compete; both are redrawn after every
/// event (valid by memorylessness of the refreshment clock). Should a
/// reflection ever fire exactly at `y = 0` (possible only for contrived
/// initial states), the velocity is fully reversed instead and a warning is
/// printed, which keeps the run alive without biasing generic experiments.
pub fn bps_simulate<R: Rng + ?Sized>(
    target: &AnisotropicGaussian,
    init: &BpsState,
    horizon: f64,
    rho: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!("rho must be >= 0, got {rho}")));
    }
    let d = target.dim();
    if init.y.len() != d {
        return Err(Error::InvalidArgument("state dimension does not match target".into()));
    }
    let lambda = target.lambda().clone();
    let slope_map = DMatrix::from_diagonal(&lambda.map(|x| 1.0 / x));
    let end = init.t + horizon;
    let mut traj = Trajectory::new(d, end, slope_map);

    let mut y = init.y.clone();
    let mut v = init.v.clone();
    let mut t = init.t;
    traj.push(t, EventKind::Init, y.as_slice(), v.as_slice());

    let mut events: u64 = 0;
    loop {
        let state = BpsState { y: y.clone(), v: v.clone(), t };
        let hazard = bps_hazard(&state, target);
        let e: f64 = Exp1.sample(rng);
        let reflect_at = first_arrival_linear(hazard, e)?.value();
        let refresh_at = if rho > 0.0 {
            let e: f64 = Exp1.sample(rng);
            e / rho
        } else {
            f64::INFINITY
        };
        let tau = reflect_at.min(refresh_at);
        if t + tau > end {
            break;
        }
        t += tau;
        for i in 0..d {
            y[i] += tau * v[i] / lambda[i];
        }
        let kind = if reflect_at <= refresh_at {
            if !reflect_in_place(&y, &mut v, &lambda) {
                eprintln!("pdmp-aniso: reflection at y = 0, reversing velocity");
                v.neg_mut();
            }
            EventKind::Reflect
        } else {
            for i in 0..d {
                v[i] = rng.sample::<f64, _>(StandardNormal);
            }
            EventKind::Refresh
        };
        traj.push(t, kind, y.as_slice(), v.as_slice());
        events += 1;
        if events > MAX_EVENTS {
            return Err(Error::EventBudgetExhausted(MAX_EVENTS));
        }
    }
    Ok(traj)
}

/// Conserved statistics of the fast block under `Λ_L = I`.
#[derive(Debug, Clone, Copy)]
pub struct FastStats {
    /// `α = |v_L|²`.
    pub alpha: f64,
    /// `β = |v_L|²|y_L|² − (v_Lᵀy_L)²` (nonnegative by Cauchy–Schwarz).
    pub beta: f64,
    /// Signed tangent coordinate `z = v_Lᵀy_L / |v_L|`.
    pub z: f64,
    /// Tangency radius `r = √(β/α)`.
    pub r: f64,
}

/// Evaluate `(α, β, z, r)` on the `L` block of a state.
pub fn bps_fast_stats(state: &BpsState, target: &AnisotropicGaussian) -> Result<FastStats> {
    if !target.lambda_l_is_identity(LAMBDA_L_IDENTITY_TOL) {
        let worst = target
            .lambda_l()
            .iter()
            .cloned()
            .max_by(|a, b| (a - 1.0).abs().partial_cmp(&(b - 1.0).abs()).unwrap())
            .unwrap();
        return Err(Error::LambdaLNotIdentity(worst));
    }
    let k = target.slow_len();
    let y_l = state.y.rows(k, target.fast_len());
    let v_l = state.v.rows(k, target.fast_len());
    let alpha = v_l.norm_squared();
    if alpha == 0.0 {
        return Err(Error::InvalidArgument("fast velocity block is zero".into()));
    }
    let dot = v_l.dot(&y_l);
    let beta = (alpha * y_l.norm_squared() - dot * dot).max(0.0);
    Ok(FastStats { alpha, beta, z: dot / alpha.sqrt(), r: (beta / alpha).sqrt() })
}

/// Exact time integrals along one run of the fast subsystem.
#[derive(Debug, Clone, Copy)]
pub struct FastSubsystemSummary {
    pub horizon: f64,
    pub reflections: u64,
    /// Time average of `z`.
    pub z_mean: f64,
    /// Time average of `z²`.
    pub z_second: f64,
    /// Time average of `α z₊² / (r² + z²)`, the averaged squared normal
    /// component of the reflection.
    pub c_average: f64,
    /// Largest relative deviation of `α` from its initial value.
    pub alpha_drift: f64,
    /// Largest relative deviation of `β` from its initial value.
    pub beta_drift: f64,
}

/// Antiderivative of `z₊²/(r² + z²)` (zero on the negative half-line).
fn c_antiderivative(z: f64, r: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else if r == 0.0 {
        z
    } else {
        z - r * (z / r).atan()
    }
}

/// Simulate the pure fast block (`ẏ_L = v_L`, reflections at rate
/// `(v_Lᵀy_L)₊`, no refreshment) and accumulate exact functional integrals.
pub fn fast_subsystem_run<R: Rng + ?Sized>(
    y_l0: &DVector<f64>,
    v_l0: &DVector<f64>,
    horizon: f64,
    rng: &mut R,
) -> Result<FastSubsystemSummary> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let mut y = y_l0.clone();
    let mut v = v_l0.clone();
    let alpha0 = v.norm_squared();
    if alpha0 == 0.0 {
        return Err(Error::InvalidArgument("fast velocity block is zero".into()));
    }
    let dot0 = v.dot(&y);
    let beta0 = (alpha0 * y.norm_squared() - dot0 * dot0).max(0.0);
    let r = (beta0 / alpha0).sqrt();
    let sqrt_alpha = alpha0.sqrt();

    let mut t = 0.0;
    let mut reflections: u64 = 0;
    let mut int_z = 0.0;
    let mut int_z2 = 0.0;
    let mut int_c = 0.0;
    let mut alpha_drift: f64 = 0.0;
    let mut beta_drift: f64 = 0.0;
    let ones = DVector::from_element(y.len(), 1.0);

    loop {
        let a = v.dot(&y);
        let gamma = v.norm_squared();
        let e: f64 = Exp1.sample(rng);
        let arrival = first_arrival_linear(LinearHazard::new(a, gamma), e)?.value();
        let tau = arrival.min(horizon - t);
        let z0 = a / sqrt_alpha;
        let z1 = (a + gamma * tau) / sqrt_alpha;
        int_z += (z1 * z1 - z0 * z0) / (2.0 * sqrt_alpha);
        int_z2 += (z1 * z1 * z1 - z0 * z0 * z0) / (3.0 * sqrt_alpha);
        int_c += sqrt_alpha * (c_antiderivative(z1, r) - c_antiderivative(z0, r));
        y.axpy(tau, &v, 1.0);
        t += tau;
        if t >= horizon {
            break;
        }
        if !reflect_in_place(&y, &mut v, &ones) {
            v.neg_mut();
        }
        reflections += 1;
        if reflections > MAX_EVENTS {
            return Err(Error::EventBudgetExhausted(MAX_EVENTS));
        }
        let alpha = v.norm_squared();
        let dot = v.dot(&y);
        let beta = alpha * y.norm_squared() - dot * dot;
        alpha_drift = alpha_drift.max((alpha / alpha0 - 1.0).abs());
        if beta0 > 0.0 {
            beta_drift = beta_drift.max((beta / beta0 - 1.0).abs());
        }
    }
    Ok(FastSubsystemSummary {
        horizon,
        reflections,
        z_mean: int_z / horizon,
        z_second: int_z2 / horizon,
        c_average: int_c / horizon,
        alpha_drift,
        beta_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::ks_distance;
    use crate::seed::rng_from_seed;
    use approx::assert_relative_eq;

    fn isotropic_2d() -> AnisotropicGaussian {
        AnisotropicGaussian::rotated_2d(0.0, 1.0).unwrap()
    }

    #[test]
    fn reflect_hand_cases() {
        let target = isotropic_2d();
        // v orthogonal to y: unchanged
        let y = DVector::from_row_slice(&[1.0, 0.0]);
        let v = DVector::from_row_slice(&[0.0, 2.0]);
        let r = bps_reflect(&y, &v, &target).unwrap();
        assert_relative_eq!((&r - &v).norm(), 0.0, epsilon = 1e-14);
        // v parallel to y: reversed
        let v = DVector::from_row_slice(&[3.0, 0.0]);
        let r = bps_reflect(&y, &v, &target).unwrap();
        assert_relative_eq!((&r + &v).norm(), 0.0, epsilon = 1e-14);
        // mixed case
        let v = DVector::from_row_slice(&[1.0, 1.0]);
        let r = bps_reflect(&y, &v, &target).unwrap();
        assert_relative_eq!(r[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(r[1], 1.0, epsilon = 1e-14);
        // y = 0 rejected
        assert!(bps_reflect(&DVector::zeros(2), &v, &target).is_err());
    }

    #[test]
    fn reflect_preserves_speed_and_is_involutive() {
        let target = AnisotropicGaussian::rotated_2d(0.0, 0.1).unwrap();
        let mut rng = rng_from_seed(31);
        for _ in 0..1_000 {
            let s = BpsState::stationary(2, &mut rng);
            let r = bps_reflect(&s.y, &s.v, &target).unwrap();
            assert!((r.norm() - s.v.norm()).abs() < 1e-12);
            let rr = bps_reflect(&s.y, &r, &target).unwrap();
            assert!((&rr - &s.v).norm() < 1e-12);
            // normal component negated
            let n = DVector::from_fn(2, |i, _| s.y[i] / target.lambda()[i]);
            assert!((r.dot(&n) + s.v.dot(&n)).abs() < 1e-12 * (1.0 + s.v.dot(&n).abs()));
        }
    }

    #[test]
    fn hazard_hand_case_and_finite_difference_slope() {
        let target = AnisotropicGaussian::rotated_2d(0.0, 0.1).unwrap();
        let state = BpsState::new(
            DVector::from_row_slice(&[0.0, 1.0]),
            DVector::from_row_slice(&[1.0, 1.0]),
            0.0,
        )
        .unwrap();
        let h = bps_hazard(&state, &target);
        assert_relative_eq!(h.a, 10.0, epsilon = 1e-12);
        assert_relative_eq!(h.gamma, 101.0, epsilon = 1e-12);
        assert!(h.gamma > 0.0);

        // γ = d/dt (vᵀΛ⁻¹y(t)) along ẏ = Λ⁻¹v
        let dt = 1e-7;
        let mut shifted = state.clone();
        for i in 0..2 {
            shifted.y[i] += dt * state.v[i] / target.lambda()[i];
        }
        let fd = (bps_hazard(&shifted, &target).a - h.a) / dt;
        assert_relative_eq!(fd, h.gamma, max_relative = 1e-5);

        let origin =
            BpsState::new(DVector::zeros(2), DVector::from_row_slice(&[1.0, 0.5]), 0.0).unwrap();
        assert_eq!(bps_hazard(&origin, &target).a, 0.0);
    }

    #[test]
    fn speed_is_conserved_without_refreshment() {
        let target = isotropic_2d();
        let mut rng = rng_from_seed(32);
        let init = BpsState::stationary(2, &mut rng);
        let speed = init.v.norm();
        let traj = bps_simulate(&target, &init, 500.0, 0.0, &mut rng).unwrap();
        assert!(traj.len() > 50);
        for i in 0..traj.len() {
            let v = traj.v(i);
            let s = (v[0] * v[0] + v[1] * v[1]).sqrt();
            assert!((s - speed).abs() < 1e-12, "event {i}: speed {s} vs {speed}");
        }
    }

    #[test]
    fn refresh_interarrivals_are_unit_exponential() {
        let target = AnisotropicGaussian::rotated_2d(0.0, 0.5).unwrap();
        let mut rng = rng_from_seed(33);
        let init = BpsState::stationary(2, &mut rng);
        let traj = bps_simulate(&target, &init, 12_000.0, 1.0, &mut rng).unwrap();
        let mut last = traj.start_time();
        let mut gaps = Vec::new();
        for i in 1..traj.len() {
            if traj.kind(i) == EventKind::Refresh {
                gaps.push(traj.times()[i] - last);
                last = traj.times()[i];
            }
        }
        assert!(gaps.len() > 10_000);
        let d = ks_distance(&mut gaps, |t| 1.0 - (-t).exp());
        assert!(d < 0.01, "KS distance {d}");
    }

    #[test]
    fn stationary_moments_light() {
        let target = AnisotropicGaussian::rotated_2d(0.0, 0.1).unwrap();
        let mut rng = rng_from_seed(34);
        let init = BpsState::stationary(2, &mut rng);
        let traj = bps_simulate(&target, &init, 3_000.0, 1.0, &mut rng).unwrap();
        let m = traj.time_average_moments();
        for i in 0..2 {
            assert!(m.mean[i].abs() < 0.1, "mean[{i}] = {}", m.mean[i]);
            assert!((m.covariance()[(i, i)] - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn fast_stats_hand_cases_and_guard() {
        let target = AnisotropicGaussian::rotated_2d(0.0, 0.2).unwrap();
        // v_L parallel to y_L → β = 0
        let s = BpsState::new(
            DVector::from_row_slice(&[0.3, 2.0]),
            DVector::from_row_slice(&[1.0, 3.0]),
            0.0,
        )
        .unwrap();
        let st = bps_fast_stats(&s, &target).unwrap();
        assert_eq!(st.beta, 0.0);

        // Λ_L ≠ I rejected
        let bad = AnisotropicGaussian::new(
            nalgebra::DMatrix::identity(2, 2),
            DVector::from_element(1, 1.0),
            DVector::from_element(1, 2.0),
            0.2,
        )
        .unwrap();
        assert!(matches!(bps_fast_stats(&s, &bad), Err(Error::LambdaLNotIdentity(_))));

        // l = 2 hand case: y_L = (1,0), v_L = (0,2)
        let t3 = AnisotropicGaussian::new(
            nalgebra::DMatrix::identity(3, 3),
            DVector::from_element(1, 1.0),
            DVector::from_element(2, 1.0),
            0.5,
        )
        .unwrap();
        let s = BpsState::new(
            DVector::from_row_slice(&[0.0, 1.0, 0.0]),
            DVector::from_row_slice(&[1.0, 0.0, 2.0]),
            0.0,
        )
        .unwrap();
        let st = bps_fast_stats(&s, &t3).unwrap();
        assert_relative_eq!(st.alpha, 4.0, epsilon = 1e-14);
        assert_relative_eq!(st.beta, 4.0, epsilon = 1e-14);
        assert_relative_eq!(st.r, 1.0, epsilon = 1e-14);
        assert_relative_eq!(st.z, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn fast_subsystem_conserves_alpha_beta_and_mixes_z() {
        let mut rng = rng_from_seed(35);
        // α = 1, β = 1 (r = 1)
        let y = DVector::from_row_slice(&[1.0, 0.0]);
        let v = DVector::from_row_slice(&[0.0, 1.0]);
        let out = fast_subsystem_run(&y, &v, 3_000.0, &mut rng).unwrap();
        assert!(out.reflections > 500);
        assert!(out.alpha_drift < 1e-9, "alpha drift {}", out.alpha_drift);
        assert!(out.beta_drift < 1e-9, "beta drift {}", out.beta_drift);
        // z is asymptotically standard normal
        assert!(out.z_mean.abs() < 0.1, "z mean {}", out.z_mean);
        assert!((out.z_second - 1.0).abs() < 0.1, "z second moment {}", out.z_second);
    }

    #[test]
    fn bps_runs_are_deterministic() {
        let target = AnisotropicGaussian::rotated_2d(0.0, 0.1).unwrap();
        let run = |seed: u64| {
            let mut rng = rng_from_seed(seed);
            let init = BpsState::stationary(2, &mut rng);
            bps_simulate(&target, &init, 200.0, 1.0, &mut rng).unwrap()
        };
        let (a, b) = (run(9), run(9));
        assert_eq!(a.times(), b.times());
        for i in 0..a.len() {
            assert_eq!(a.v(i), b.v(i));
        }
    }
}
