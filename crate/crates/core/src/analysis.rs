//! Trajectory post-processing: grid series, diffusion-coefficient and
//! asymptotic-variance estimators, regression slopes, and distribution
//! diagnostics.

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// One scalar read-out of the sampler state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    /// Position coordinate `y_i`.
    Y(usize),
    /// Velocity coordinate `v_i` (càdlàg at events).
    V(usize),
    /// Euclidean norm of the velocity block `v_{start..d}`.
    VNormFrom(usize),
}

/// Values of a fixed component set on the uniform grid `t0, t0+Δ, …`.
#[derive(Debug, Clone)]
pub struct GridSeries {
    delta: f64,
    width: usize,
    start: f64,
    values: Vec<f64>, // row-major, len = n * width
}

impl GridSeries {
    pub fn from_rows(delta: f64, width: usize, start: f64, values: Vec<f64>) -> Self {
        assert!(delta > 0.0 && width > 0 && values.len() % width == 0);
        Self { delta, width, start, values }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        assert!(c < self.width);
        (0..self.len()).map(|i| self.values[i * self.width + c]).collect()
    }

    /// Total time spanned by the grid.
    pub fn span(&self) -> f64 {
        self.delta * (self.len().saturating_sub(1)) as f64
    }
}

/// Sample the chosen components on the grid `t0 + jΔ`, `j = 0..⌊T/Δ⌋`,
/// using the exact piecewise-linear interpolant (and the right-continuous
/// state for velocity read-outs at event times).
pub fn discretize(traj: &Trajectory, delta: f64, comps: &[Component]) -> Result<GridSeries> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("grid spacing must be positive, got {delta}")));
    }
    if comps.is_empty() {
        return Err(Error::InvalidArgument("no components selected".into()));
    }
    let t0 = traj.start_time();
    let span = traj.horizon() - t0;
    let n = (span / delta).floor() as usize + 1;
    let d = traj.dim();
    let width = comps.len();
    let mut values = Vec::with_capacity(n * width);
    let times = traj.times();
    let mut seg = 0usize;
    let mut slope = vec![0.0; d];
    traj.slope(0, &mut slope);
    for j in 0..n {
        let t = t0 + delta * j as f64;
        while seg + 1 < times.len() && times[seg + 1] <= t {
            seg += 1;
            traj.slope(seg, &mut slope);
        }
        let dt = t - times[seg];
        let y = traj.y(seg);
        let v = traj.v(seg);
        for comp in comps {
            let val = match comp {
                Component::Y(i) => y[*i] + dt * slope[*i],
                Component::V(i) => v[*i],
                Component::VNormFrom(start) => {
                    v[*start..].iter().map(|x| x * x).sum::<f64>().sqrt()
                }
            };
            values.push(val);
        }
    }
    Ok(GridSeries::from_rows(delta, width, t0, values))
}

/// Realised quadratic variation per unit time,
/// `Σ (x_{j+1} − x_j)² / ((n−1)Δ)`, of one series column — a consistent
/// estimator of the diffusion coefficient of a diffusion-like path.
pub fn diffusion_qv(series: &GridSeries, col: usize) -> Result<f64> {
    let n = series.len();
    if n < 2 {
        return Err(Error::InvalidArgument("series needs at least two points".into()));
    }
    let mut acc = 0.0;
    let mut prev = series.row(0)[col];
    for i in 1..n {
        let cur = series.row(i)[col];
        let d = cur - prev;
        acc += d * d;
        prev = cur;
    }
    Ok(acc / series.span())
}

/// Batch-means estimate of the asymptotic variance
/// `lim_T Var(T^{-1/2} ∫₀^T f)` of `f` evaluated on the series rows.
///
/// `f` is centered by its empirical mean over the whole series before
/// batching; the trailing remainder of points not filling a batch is
/// dropped.
pub fn batch_means_avar<F>(series: &GridSeries, f: F, n_batches: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if n_batches < 10 {
        return Err(Error::InvalidArgument(format!(
            "need at least 10 batches, got {n_batches}"
        )));
    }
    let n = series.len();
    let batch_len = n / n_batches;
    if batch_len < 2 {
        return Err(Error::InvalidArgument(format!(
            "series too short: {n} points over {n_batches} batches"
        )));
    }
    let values: Vec<f64> = (0..n).map(|i| f(series.row(i))).collect();
    let used = batch_len * n_batches;
    let mean = values[..used].iter().sum::<f64>() / used as f64;
    let mut batch_means = Vec::with_capacity(n_batches);
    for b in 0..n_batches {
        let s: f64 = values[b * batch_len..(b + 1) * batch_len].iter().sum();
        batch_means.push(s / batch_len as f64 - mean);
    }
    let bm = batch_means.iter().sum::<f64>() / n_batches as f64;
    let var = batch_means.iter().map(|m| (m - bm) * (m - bm)).sum::<f64>()
        / (n_batches - 1) as f64;
    Ok(batch_len as f64 * series.delta() * var)
}

/// Deviations of a series from the standard normal product law: maximum
/// absolute component mean, maximum `|var − 1|`, and maximum absolute
/// off-diagonal covariance entry.
#[derive(Debug, Clone, Copy)]
pub struct MomentCheck {
    pub max_abs_mean: f64,
    pub max_var_dev: f64,
    pub max_offdiag_cov: f64,
}

pub fn moment_check(series: &GridSeries) -> Result<MomentCheck> {
    let n = series.len();
    if n < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 points, got {n}")));
    }
    let w = series.width();
    let mut mean = vec![0.0; w];
    for i in 0..n {
        for (m, &x) in mean.iter_mut().zip(series.row(i)) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = vec![0.0; w * w];
    for i in 0..n {
        let row = series.row(i);
        for a in 0..w {
            let da = row[a] - mean[a];
            for b in a..w {
                cov[a * w + b] += da * (row[b] - mean[b]);
            }
        }
    }
    let mut max_abs_mean: f64 = 0.0;
    let mut max_var_dev: f64 = 0.0;
    let mut max_offdiag: f64 = 0.0;
    for a in 0..w {
        max_abs_mean = max_abs_mean.max(mean[a].abs());
        max_var_dev = max_var_dev.max((cov[a * w + a] / n as f64 - 1.0).abs());
        for b in a + 1..w {
            max_offdiag = max_offdiag.max((cov[a * w + b] / n as f64).abs());
        }
    }
    Ok(MomentCheck { max_abs_mean, max_var_dev, max_offdiag_cov: max_offdiag })
}

/// Ordinary least squares fit of `log(value)` on `log(1/ε)`.
#[derive(Debug, Clone, Copy)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

/// Regression of `ln(value)` on `ln(1/ε)` over `(ε, value)` pairs; the
/// slope is the scaling exponent `β` in `value ∼ ε^{−β}`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<RegressionFit> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(e, v)| !(e > 0.0) || !(v > 0.0)) {
        return Err(Error::InvalidArgument("all epsilons and values must be positive".into()));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(e, _)| (1.0 / e).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, v)| v.ln()).collect();
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidArgument("epsilons must not all coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let stderr = (rss.max(0.0) / (n - 2.0) / sxx).sqrt();
    Ok(RegressionFit { slope, intercept, slope_stderr: stderr })
}

/// Kolmogorov–Smirnov distance between the empirical law of `samples`
/// (which may contain `+∞` entries for defective laws) and a reference CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let finite = samples.iter().take_while(|x| x.is_finite()).count();
    let mut d: f64 = 0.0;
    for (i, &x) in samples[..finite].iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max((f - (i + 1) as f64 / n).abs());
    }
    if finite < samples.len() {
        // beyond the largest finite sample the empirical CDF stays flat
        let tail = cdf(f64::MAX);
        d = d.max((tail - finite as f64 / n).abs());
    }
    d
}

/// Geometric mean of strictly positive values.
pub fn geometric_mean(values: &[f64]) -> f64 {
    assert!(!values.is_empty() && values.iter().all(|&v| v > 0.0));
    (values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp()
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use crate::trajectory::EventKind;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn linear_traj(horizon: f64) -> Trajectory {
        let mut tr = Trajectory::new(1, horizon, DMatrix::identity(1, 1));
        tr.push(0.0, EventKind::Init, &[0.0], &[1.0]);
        tr
    }

    #[test]
    fn discretize_is_arithmetic_for_constant_velocity() {
        let tr = linear_traj(1.0);
        let s = discretize(&tr, 0.25, &[Component::Y(0)]).unwrap();
        assert_eq!(s.len(), 5);
        for i in 0..5 {
            assert_relative_eq!(s.row(i)[0], 0.25 * i as f64, epsilon = 1e-15);
        }
    }

    #[test]
    fn discretize_uses_state_after_at_event_times() {
        let mut tr = Trajectory::new(1, 1.0, DMatrix::identity(1, 1));
        tr.push(0.0, EventKind::Init, &[0.0], &[1.0]);
        tr.push(0.5, EventKind::Flip(0), &[0.5], &[-1.0]);
        let s = discretize(&tr, 0.5, &[Component::V(0)]).unwrap();
        assert_eq!(s.column(0), vec![1.0, -1.0, -1.0]);
    }

    #[test]
    fn discretize_recovers_event_positions_on_aligned_grid() {
        let mut tr = Trajectory::new(1, 1.0, DMatrix::identity(1, 1));
        tr.push(0.0, EventKind::Init, &[0.0], &[1.0]);
        tr.push(0.25, EventKind::Flip(0), &[0.25], &[-1.0]);
        tr.push(0.75, EventKind::Flip(0), &[-0.25], &[1.0]);
        let s = discretize(&tr, 0.25, &[Component::Y(0)]).unwrap();
        let expect = [0.0, 0.25, 0.0, -0.25, 0.0];
        for (i, e) in expect.iter().enumerate() {
            assert_relative_eq!(s.row(i)[0], *e, epsilon = 1e-12);
        }
    }

    #[test]
    fn qv_of_deterministic_line_vanishes_with_delta() {
        let tr = linear_traj(1.0);
        let s = discretize(&tr, 0.01, &[Component::Y(0)]).unwrap();
        let qv = diffusion_qv(&s, 0).unwrap();
        assert_relative_eq!(qv, 0.01, max_relative = 1e-10);
    }

    #[test]
    fn qv_recovers_known_ou_coefficient() {
        // Euler-discretised OU with diffusion coefficient 2, drift rate 1.
        let omega = 2.0;
        let dt = 1e-3;
        let n = 1_000_000usize;
        let mut rng = rng_from_seed(10);
        let mut x = 0.0f64;
        let mut values = Vec::with_capacity(n + 1);
        values.push(x);
        for _ in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            x += -x * dt + (omega * dt).sqrt() * z;
            values.push(x);
        }
        let s = GridSeries::from_rows(dt, 1, 0.0, values);
        let qv = diffusion_qv(&s, 0).unwrap();
        assert_relative_eq!(qv, omega, max_relative = 0.05);
    }

    #[test]
    fn qv_shift_invariance_and_quadratic_scaling() {
        let mut rng = rng_from_seed(11);
        let vals: Vec<f64> = (0..1000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let s = GridSeries::from_rows(0.1, 1, 0.0, vals.clone());
        let q = diffusion_qv(&s, 0).unwrap();
        let shifted = GridSeries::from_rows(0.1, 1, 0.0, vals.iter().map(|v| v + 7.0).collect());
        assert_relative_eq!(diffusion_qv(&shifted, 0).unwrap(), q, max_relative = 1e-12);
        let scaled = GridSeries::from_rows(0.1, 1, 0.0, vals.iter().map(|v| 3.0 * v).collect());
        assert_relative_eq!(diffusion_qv(&scaled, 0).unwrap(), 9.0 * q, max_relative = 1e-12);
    }

    #[test]
    fn batch_means_iid_oracle() {
        // batch count sized so the χ² noise of the variance-of-means stays
        // well inside the 10% check: sd ≈ √(2/(B−1)) ≈ 4.5% at B = 1000
        let mut rng = rng_from_seed(12);
        let vals: Vec<f64> =
            (0..100_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let s = GridSeries::from_rows(1.0, 1, 0.0, vals);
        let est = batch_means_avar(&s, |r| r[0], 1000).unwrap();
        assert!((est - 1.0).abs() < 0.1, "estimate {est}");
    }

    #[test]
    fn batch_means_translation_invariance_and_constant_series() {
        let mut rng = rng_from_seed(13);
        let vals: Vec<f64> = (0..20_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let s = GridSeries::from_rows(0.5, 1, 0.0, vals);
        let a = batch_means_avar(&s, |r| r[0], 20).unwrap();
        let b = batch_means_avar(&s, |r| r[0] + 42.0, 20).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-9);

        let c = GridSeries::from_rows(1.0, 1, 0.0, vec![3.0; 1000]);
        assert_eq!(batch_means_avar(&c, |r| r[0], 10).unwrap(), 0.0);

        assert!(batch_means_avar(&c, |r| r[0], 5).is_err());
    }

    #[test]
    fn loglog_exact_power_laws() {
        let pts: Vec<(f64, f64)> = [0.1, 0.03, 0.01, 0.003].iter().map(|&e| (e, 1.0 / e)).collect();
        let fit = loglog_slope(&pts).unwrap();
        assert_relative_eq!(fit.slope, 1.0, epsilon = 1e-12);
        assert!(fit.slope_stderr < 1e-10);

        let flat: Vec<(f64, f64)> = [0.1, 0.03, 0.01].iter().map(|&e| (e, 2.5)).collect();
        let fit = loglog_slope(&flat).unwrap();
        assert_relative_eq!(fit.slope, 0.0, epsilon = 1e-12);

        assert!(loglog_slope(&flat[..2]).is_err());
        assert!(loglog_slope(&[(0.1, 1.0), (0.01, -1.0), (0.001, 1.0)]).is_err());
    }

    #[test]
    fn moment_check_standard_normal_and_constant() {
        let mut rng = rng_from_seed(14);
        let n = 1_000_000;
        let mut vals = Vec::with_capacity(2 * n);
        for _ in 0..n {
            vals.push(rng.sample::<f64, _>(StandardNormal));
            vals.push(rng.sample::<f64, _>(StandardNormal));
        }
        let s = GridSeries::from_rows(1.0, 2, 0.0, vals);
        let m = moment_check(&s).unwrap();
        assert!(m.max_abs_mean < 0.01);
        assert!(m.max_var_dev < 0.01);
        assert!(m.max_offdiag_cov < 0.01);

        let c = GridSeries::from_rows(1.0, 1, 0.0, vec![0.0; 500]);
        let m = moment_check(&c).unwrap();
        assert_eq!(m.max_abs_mean, 0.0);
        assert_eq!(m.max_var_dev, 1.0);
    }

    #[test]
    fn ks_distance_detects_mismatch() {
        let mut rng = rng_from_seed(15);
        let mut unif: Vec<f64> = (0..50_000).map(|_| rng.random::<f64>()).collect();
        let d = ks_distance(&mut unif.clone(), |x| x.clamp(0.0, 1.0));
        assert!(d < 0.01, "KS {d}");
        let d = ks_distance(&mut unif, |x| (x * x).clamp(0.0, 1.0));
        assert!(d > 0.2);
    }

    #[test]
    fn ks_distance_handles_defective_laws() {
        // half the mass at +infinity, finite part uniform on [0, 1]
        let mut rng = rng_from_seed(16);
        let mut draws: Vec<f64> = (0..40_000)
            .map(|_| if rng.random::<bool>() { rng.random::<f64>() } else { f64::INFINITY })
            .collect();
        let d = ks_distance(&mut draws, |x| 0.5 * x.clamp(0.0, 1.0));
        assert!(d < 0.01, "KS {d}");
    }

    #[test]
    fn geometric_mean_and_se() {
        assert_relative_eq!(geometric_mean(&[1.0, 4.0]), 2.0, epsilon = 1e-12);
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0]);
        assert_relative_eq!(m, 2.0, epsilon = 1e-12);
        assert_relative_eq!(se, (1.0f64 / 3.0).sqrt(), epsilon = 1e-12);
    }
}
