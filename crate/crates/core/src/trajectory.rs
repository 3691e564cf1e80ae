//! Event logs of piecewise deterministic paths.
//!
//! Between events the position follows `y(t) = y_k + (t − t_k)·M v_k`
//! exactly, where `M` maps the sampler's velocity to the position slope
//! (`Λ⁻¹U` for Zig-Zag, `Λ⁻¹` for the Bouncy Particle Sampler). The log
//! stores, per event, the time, the kind, and the `(y, v)` state *after*
//! the jump; positions at arbitrary times are reconstructed from the active
//! segment, with the càdlàg (right-continuous) convention at event times.
//!
//! Storage is struct-of-arrays to keep long runs cheap: one flat buffer per
//! field, no per-event allocation.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

/// What happened at an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// Synthetic first row holding the initial state.
    Init,
    /// Zig-Zag velocity sign flip of one coordinate.
    Flip(usize),
    /// Bouncy Particle reflection of the full velocity.
    Reflect,
    /// Full velocity refreshment.
    Refresh,
}

impl EventKind {
    pub fn label(&self) -> &'static str {
        match self {
            EventKind::Init => "init",
            EventKind::Flip(_) => "flip",
            EventKind::Reflect => "reflect",
            EventKind::Refresh => "refresh",
        }
    }
}

/// Tallies of the jump kinds in a trajectory (the init row is not a jump).
#[derive(Debug, Clone, Default)]
pub struct EventCounts {
    pub flips_per_coord: Vec<u64>,
    pub reflects: u64,
    pub refreshes: u64,
}

impl EventCounts {
    pub fn total_flips(&self) -> u64 {
        self.flips_per_coord.iter().sum()
    }

    pub fn total_jumps(&self) -> u64 {
        self.total_flips() + self.reflects + self.refreshes
    }
}

/// Ordered event log with exact piecewise-linear interpolation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    horizon: f64,
    slope_map: DMatrix<f64>,
    times: Vec<f64>,
    kinds: Vec<EventKind>,
    ys: Vec<f64>,
    vs: Vec<f64>,
}

impl Trajectory {
    /// Empty log for a path on `[t0, horizon]`; the first push must be the
    /// `Init` event at `t0`.
    pub fn new(dim: usize, horizon: f64, slope_map: DMatrix<f64>) -> Self {
        assert_eq!(slope_map.nrows(), dim);
        assert_eq!(slope_map.ncols(), dim);
        Self {
            dim,
            horizon,
            slope_map,
            times: Vec::new(),
            kinds: Vec::new(),
            ys: Vec::new(),
            vs: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, kind: EventKind, y: &[f64], v: &[f64]) {
        debug_assert_eq!(y.len(), self.dim);
        debug_assert_eq!(v.len(), self.dim);
        debug_assert!(self.times.last().map_or(true, |&last| t >= last));
        self.times.push(t);
        self.kinds.push(kind);
        self.ys.extend_from_slice(y);
        self.vs.extend_from_slice(v);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of jumps (events excluding the init row).
    pub fn jump_count(&self) -> u64 {
        self.len().saturating_sub(1) as u64
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn kind(&self, i: usize) -> EventKind {
        self.kinds[i]
    }

    pub fn y(&self, i: usize) -> &[f64] {
        &self.ys[i * self.dim..(i + 1) * self.dim]
    }

    pub fn v(&self, i: usize) -> &[f64] {
        &self.vs[i * self.dim..(i + 1) * self.dim]
    }

    /// Map from sampler velocity to position slope.
    pub fn slope_map(&self) -> &DMatrix<f64> {
        &self.slope_map
    }

    /// Position slope on the segment starting at event `i`.
    pub fn slope(&self, i: usize, out: &mut [f64]) {
        let v = self.v(i);
        for r in 0..self.dim {
            let mut acc = 0.0;
            for c in 0..self.dim {
                acc += self.slope_map[(r, c)] * v[c];
            }
            out[r] = acc;
        }
    }

    /// Index of the segment active at time `t` (right-continuous at events).
    pub fn segment_at(&self, t: f64) -> usize {
        debug_assert!(t >= self.start_time());
        // number of event times <= t, minus one
        self.times.partition_point(|&s| s <= t).saturating_sub(1)
    }

    /// Exact position at `t ∈ [t0, horizon]`.
    pub fn position_at(&self, t: f64, out: &mut [f64]) {
        let i = self.segment_at(t);
        let dt = t - self.times[i];
        let y = self.y(i);
        let v = self.v(i);
        for r in 0..self.dim {
            let mut acc = 0.0;
            for c in 0..self.dim {
                acc += self.slope_map[(r, c)] * v[c];
            }
            out[r] = y[r] + dt * acc;
        }
    }

    /// Velocity at `t` (càdlàg).
    pub fn velocity_at(&self, t: f64) -> &[f64] {
        self.v(self.segment_at(t))
    }

    pub fn count_events(&self) -> EventCounts {
        let mut counts =
            EventCounts { flips_per_coord: vec![0; self.dim], ..Default::default() };
        for kind in &self.kinds {
            match kind {
                EventKind::Init => {}
                EventKind::Flip(i) => counts.flips_per_coord[*i] += 1,
                EventKind::Reflect => counts.reflects += 1,
                EventKind::Refresh => counts.refreshes += 1,
            }
        }
        counts
    }

    /// Exact time averages of `y` and of `y yᵀ` over `[t0, horizon]`,
    /// integrated segment by segment (no discretisation error).
    pub fn time_average_moments(&self) -> PathMoments {
        let d = self.dim;
        let mut mean = DVector::zeros(d);
        let mut second = DMatrix::zeros(d, d);
        let mut slope = vec![0.0; d];
        let n = self.len();
        for i in 0..n {
            let t0 = self.times[i];
            let t1 = if i + 1 < n { self.times[i + 1] } else { self.horizon };
            let tau = t1 - t0;
            if tau <= 0.0 {
                continue;
            }
            self.slope(i, &mut slope);
            let y = self.y(i);
            let tau2 = tau * tau / 2.0;
            let tau3 = tau * tau * tau / 3.0;
            for r in 0..d {
                mean[r] += y[r] * tau + slope[r] * tau2;
                for c in r..d {
                    second[(r, c)] +=
                        y[r] * y[c] * tau + (y[r] * slope[c] + y[c] * slope[r]) * tau2
                            + slope[r] * slope[c] * tau3;
                }
            }
        }
        let duration = self.horizon - self.start_time();
        mean /= duration;
        second /= duration;
        for r in 0..d {
            for c in 0..r {
                second[(r, c)] = second[(c, r)];
            }
        }
        PathMoments { duration, mean, raw_second: second }
    }

    /// Write the event log as CSV. With `coord_column` the header is
    /// `t,kind,coord,y1..yd,v1..vd` (Zig-Zag convention; `coord` is the
    /// 1-based flipped coordinate, empty for non-flip rows); without it the
    /// `coord` column is omitted (Bouncy Particle convention). Floats carry
    /// 17 significant digits and lines end with LF.
    pub fn write_csv<W: Write>(&self, w: &mut W, coord_column: bool) -> Result<()> {
        let d = self.dim;
        let mut header = String::from("t,kind");
        if coord_column {
            header.push_str(",coord");
        }
        for i in 1..=d {
            header.push_str(&format!(",y{i}"));
        }
        for i in 1..=d {
            header.push_str(&format!(",v{i}"));
        }
        header.push('\n');
        w.write_all(header.as_bytes())?;
        let mut line = String::new();
        for i in 0..self.len() {
            line.clear();
            line.push_str(&format_float(self.times[i]));
            line.push(',');
            line.push_str(self.kinds[i].label());
            if coord_column {
                line.push(',');
                if let EventKind::Flip(c) = self.kinds[i] {
                    line.push_str(&format!("{}", c + 1));
                }
            }
            for &y in self.y(i) {
                line.push(',');
                line.push_str(&format_float(y));
            }
            for &v in self.v(i) {
                line.push(',');
                line.push_str(&format_float(v));
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }
}

/// Moments of a path measured with exact segment integrals.
#[derive(Debug, Clone)]
pub struct PathMoments {
    pub duration: f64,
    pub mean: DVector<f64>,
    pub raw_second: DMatrix<f64>,
}

impl PathMoments {
    /// Time-average covariance (raw second moment minus mean outer product).
    pub fn covariance(&self) -> DMatrix<f64> {
        &self.raw_second - &self.mean * self.mean.transpose()
    }
}

/// 17-significant-digit decimal form that round-trips through `f64` parsing.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}
