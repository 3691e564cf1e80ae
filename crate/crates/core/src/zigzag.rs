//! Event-driven Zig-Zag sampler.
//!
//! The sampler moves with velocity `v ∈ {−1,+1}^d` and flips one velocity
//! coordinate at a time. Simulation runs in the reparametrised coordinates
//! `y = Λ⁻¹Ux`, where the position slope is `Λ⁻¹Uv` and the switching rate
//! of coordinate `i` is `(v_i (UᵀΛ⁻¹y)_i)₊`. Along the flow that rate is the
//! linear hazard `(a_i + γ_i t)₊` with
//!
//! * `a_i = v_i (UᵀΛ⁻¹ y)_i`
//! * `γ_i = v_i (Σ⁻¹ v)_i`
//!
//! so Gaussian event times are drawn exactly by hazard inversion. After every
//! event all `d` coordinate clocks are resampled; ties in the minimal arrival
//! (a null event) break toward the lowest coordinate index.
//!
//! Student-t targets have no linear hazard; their switching times are drawn
//! by thinning constant-rate per-coordinate proposal processes whose rates
//! majorise the true rates globally (see [`StudentThinning`]).

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::event_clock::{first_arrival_linear, LinearHazard, THINNING_BOUND_SLACK};
use crate::model::{AnisotropicGaussian, StudentTarget};
use crate::trajectory::{EventCounts, EventKind, Trajectory};

/// Hard cap on events in a single run.
pub const MAX_EVENTS: u64 = 1_000_000_000;

/// Sampler state in reparametrised coordinates.
#[derive(Debug, Clone)]
pub struct ZigZagState {
    /// Position `y`.
    pub y: DVector<f64>,
    /// Velocity with entries exactly `±1`.
    pub v: DVector<f64>,
    /// Clock time.
    pub t: f64,
}

impl ZigZagState {
    pub fn new(y: DVector<f64>, v: DVector<f64>, t: f64) -> Result<Self> {
        if y.len() != v.len() {
            return Err(Error::InvalidArgument("position/velocity length mismatch".into()));
        }
        if v.iter().any(|&vi| vi != 1.0 && vi != -1.0) {
            return Err(Error::InvalidArgument(
                "zig-zag velocity components must be exactly ±1".into(),
            ));
        }
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!("clock time must be >= 0, got {t}")));
        }
        Ok(Self { y, v, t })
    }

    /// Origin with all-`+1` velocity (non-stationary runs).
    pub fn origin(dim: usize) -> Self {
        Self { y: DVector::zeros(dim), v: DVector::from_element(dim, 1.0), t: 0.0 }
    }

    /// Draw from the stationary law `N(0, I) ⊗ U({−1,+1}^d)`.
    pub fn stationary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let y = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = DVector::from_fn(dim, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 });
        Self { y, v, t: 0.0 }
    }
}

/// Per-coordinate linear hazards at the current state.
pub fn zz_rates(state: &ZigZagState, target: &AnisotropicGaussian) -> Vec<LinearHazard> {
    let offsets = target.rate_map() * &state.y;
    let pv = target.precision() * &state.v;
    (0..target.dim())
        .map(|i| LinearHazard::new(state.v[i] * offsets[i], state.v[i] * pv[i]))
        .collect()
}

/// Run the Gaussian Zig-Zag sampler for `horizon` time units.
///
/// The returned trajectory starts with an init row at `init.t` and records
/// one row per flip. Identical `(seed, target, init, horizon)` reproduce
/// the log bit for bit.
pub fn zz_simulate<R: Rng + ?Sized>(
    target: &AnisotropicGaussian,
    init: &ZigZagState,
    horizon: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let d = target.dim();
    if init.y.len() != d {
        return Err(Error::InvalidArgument("state dimension does not match target".into()));
    }
    let end = init.t + horizon;
    let mut traj = Trajectory::new(d, end, target.reparam().clone());

    let mut y = init.y.clone();
    let mut v = init.v.clone();
    let mut t = init.t;
    traj.push(t, EventKind::Init, y.as_slice(), v.as_slice());

    let mut offsets = target.rate_map() * &y;
    let mut pv = target.precision() * &v;
    let mut slope = target.reparam() * &v;
    let mut events: u64 = 0;

    loop {
        let mut best = f64::INFINITY;
        let mut arg = usize::MAX;
        for i in 0..d {
            let h = LinearHazard::new(v[i] * offsets[i], v[i] * pv[i]);
            let e: f64 = Exp1.sample(rng);
            let arrival = first_arrival_linear(h, e)?.value();
            if arrival < best {
                best = arrival;
                arg = i;
            }
        }
        if t + best > end {
            break;
        }
        t += best;
        y.axpy(best, &slope, 1.0);
        v[arg] = -v[arg];
        offsets.gemv(1.0, target.rate_map(), &y, 0.0);
        pv.gemv(1.0, target.precision(), &v, 0.0);
        slope.gemv(1.0, target.reparam(), &v, 0.0);
        traj.push(t, EventKind::Flip(arg), y.as_slice(), v.as_slice());
        events += 1;
        if events > MAX_EVENTS {
            return Err(Error::EventBudgetExhausted(MAX_EVENTS));
        }
    }
    Ok(traj)
}

/// Flip tallies of a trajectory.
pub fn zz_count_events(traj: &Trajectory) -> EventCounts {
    traj.count_events()
}

/// Constant dominating rates for Student-t switching intensities.
///
/// The true rate of coordinate `i` at position `x` is
/// `(v_i g_i(x))₊` with `g(x) = (ν+d)·Σ⁻¹x / (ν + xᵀΣ⁻¹x)`. Writing
/// `s² = xᵀΣ⁻¹x`, Cauchy–Schwarz gives `|(Σ⁻¹x)_i| ≤ √((Σ⁻¹)_{ii})·s`, and
/// `s/(ν+s²)` is maximised at `s = √ν`, so
///
/// `λ̄_i = (ν+d)·√((Σ⁻¹)_{ii}) / (2√ν)`
///
/// bounds the rate uniformly in `x`. The bounds do not depend on the state,
/// so the proposal processes are homogeneous Poisson.
#[derive(Debug, Clone)]
pub struct StudentThinning {
    bounds: DVector<f64>,
    total: f64,
}

impl StudentThinning {
    pub fn new(student: &StudentTarget) -> Self {
        let base = student.base();
        let nu = student.nu();
        let d = base.dim() as f64;
        let factor = (nu + d) / (2.0 * nu.sqrt());
        let bounds =
            DVector::from_fn(base.dim(), |i, _| factor * base.precision()[(i, i)].sqrt());
        let total = bounds.sum();
        Self { bounds, total }
    }

    pub fn bounds(&self) -> &DVector<f64> {
        &self.bounds
    }

    pub fn total_bound(&self) -> f64 {
        self.total
    }

    /// Exact switching rate of coordinate `i` at position `x` with velocity
    /// sign `v_i`.
    pub fn rate(&self, student: &StudentTarget, x: &DVector<f64>, v_i: f64, i: usize) -> f64 {
        (v_i * student.grad_neg_log(x)[i]).max(0.0)
    }
}

/// Proposal bookkeeping of a thinned run.
#[derive(Debug, Clone, Copy, Default)]
pub struct ThinningSummary {
    pub proposals: u64,
    pub accepts: u64,
}

impl ThinningSummary {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            f64::NAN
        } else {
            self.accepts as f64 / self.proposals as f64
        }
    }
}

/// Draw `(x, v)` from the stationary Student law.
pub fn student_stationary_init<R: Rng + ?Sized>(
    student: &StudentTarget,
    rng: &mut R,
) -> (DVector<f64>, DVector<f64>) {
    let x = student.sample_x(rng);
    let v =
        DVector::from_fn(student.dim(), |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 });
    (x, v)
}

/// Run the Zig-Zag sampler on a Student-t target by thinning.
///
/// The simulation advances in the original coordinates `x` (where the rates
/// are evaluated); the event log is written in `y = Λ⁻¹Ux` like the Gaussian
/// runs, so all downstream diagnostics apply unchanged. Rejected proposals
/// leave no trace in the log. A rate evaluation above its bound aborts with
/// [`Error::ThinningBoundViolation`] — it would mean the bound algebra is
/// wrong, not bad luck.
pub fn zz_simulate_student<R: Rng + ?Sized>(
    student: &StudentTarget,
    init_x: &DVector<f64>,
    init_v: &DVector<f64>,
    horizon: f64,
    rng: &mut R,
) -> Result<(Trajectory, ThinningSummary)> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let base = student.base();
    let d = base.dim();
    if init_v.iter().any(|&vi| vi != 1.0 && vi != -1.0) {
        return Err(Error::InvalidArgument(
            "zig-zag velocity components must be exactly ±1".into(),
        ));
    }
    let thinning = StudentThinning::new(student);
    let total = thinning.total_bound();
    let end = horizon;
    let mut traj = Trajectory::new(d, end, base.reparam().clone());

    let mut x = init_x.clone();
    let mut v = init_v.clone();
    let mut t = 0.0;
    traj.push(t, EventKind::Init, base.to_y(&x).as_slice(), v.as_slice());

    let mut summary = ThinningSummary::default();
    loop {
        let e: f64 = Exp1.sample(rng);
        let tau = e / total;
        if t + tau > end {
            break;
        }
        t += tau;
        x.axpy(tau, &v, 1.0);
        // proposal coordinate chosen proportionally to its bound
        let mut pick = rng.random::<f64>() * total;
        let mut coord = d - 1;
        for i in 0..d {
            pick -= thinning.bounds[i];
            if pick < 0.0 {
                coord = i;
                break;
            }
        }
        let bound = thinning.bounds[coord];
        let rate = thinning.rate(student, &x, v[coord], coord);
        summary.proposals += 1;
        if rate > bound * (1.0 + THINNING_BOUND_SLACK) {
            return Err(Error::ThinningBoundViolation { rate, bound, time: t });
        }
        if rng.random::<f64>() * bound < rate {
            v[coord] = -v[coord];
            summary.accepts += 1;
            traj.push(t, EventKind::Flip(coord), base.to_y(&x).as_slice(), v.as_slice());
        }
        if summary.proposals > MAX_EVENTS {
            return Err(Error::EventBudgetExhausted(MAX_EVENTS));
        }
    }
    Ok((traj, summary))
}
