//! Closed control loops on the parameter sphere.
//!
//! A loop is stored exactly, as a list of meridian (φ fixed) and parallel
//! (θ fixed) arcs traversed at constant angular speed. Sampling is an
//! explicit step ([`LoopPath::discretize`]). φ is never reduced mod 2π, so a
//! parallel may wind around the pole several times.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const CONTINUITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    pub theta: f64,
    pub phi: f64,
}

impl SpherePoint {
    pub const NORTH_POLE: SpherePoint = SpherePoint { theta: 0.0, phi: 0.0 };

    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Meridian,
    Parallel,
}

/// Angles and their time derivatives at one instant of a loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathState {
    pub theta: f64,
    pub phi: f64,
    pub theta_dot: f64,
    pub phi_dot: f64,
}

impl PathState {
    /// φ̇ cos θ, the rate at which the dark-frame rotation angle accrues.
    pub fn holonomy_rate(&self) -> f64 {
        self.phi_dot * self.theta.cos()
    }
}

/// One arc of a loop: a meridian changes θ by `delta`, a parallel changes φ
/// by `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: SpherePoint,
    pub delta: f64,
    /// Angular speed along the arc, rad/ps.
    pub speed: f64,
}

impl Segment {
    pub fn meridian(phi: f64, theta_from: f64, theta_to: f64, speed: f64) -> Self {
        Self {
            kind: SegmentKind::Meridian,
            start: SpherePoint::new(theta_from, phi),
            delta: theta_to - theta_from,
            speed,
        }
    }

    pub fn parallel(theta: f64, phi_from: f64, delta_phi: f64, speed: f64) -> Self {
        Self {
            kind: SegmentKind::Parallel,
            start: SpherePoint::new(theta, phi_from),
            delta: delta_phi,
            speed,
        }
    }

    /// Arc length over speed. A parallel through a pole has zero length.
    pub fn duration(&self) -> f64 {
        match self.kind {
            SegmentKind::Meridian => self.delta.abs() / self.speed,
            SegmentKind::Parallel => {
                let s = self.start.theta.sin().abs();
                if s < 1e-12 {
                    0.0
                } else {
                    self.delta.abs() * s / self.speed
                }
            }
        }
    }

    pub fn end(&self) -> SpherePoint {
        match self.kind {
            SegmentKind::Meridian => SpherePoint::new(self.start.theta + self.delta, self.start.phi),
            SegmentKind::Parallel => SpherePoint::new(self.start.theta, self.start.phi + self.delta),
        }
    }

    /// State at local time `s ∈ [0, duration]`.
    pub fn state_at(&self, s: f64) -> PathState {
        let dur = self.duration();
        let frac = if dur > 0.0 { (s / dur).clamp(0.0, 1.0) } else { 0.0 };
        let rate = if dur > 0.0 { self.delta / dur } else { 0.0 };
        match self.kind {
            SegmentKind::Meridian => PathState {
                theta: self.start.theta + frac * self.delta,
                phi: self.start.phi,
                theta_dot: rate,
                phi_dot: 0.0,
            },
            SegmentKind::Parallel => PathState {
                theta: self.start.theta,
                phi: self.start.phi + frac * self.delta,
                theta_dot: 0.0,
                phi_dot: rate,
            },
        }
    }
}

/// A closed, piecewise meridian/parallel loop starting and ending at the
/// north pole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopPath {
    segments: Vec<Segment>,
    total_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub t: f64,
    pub theta: f64,
    pub phi: f64,
}

impl LoopPath {
    /// Validates positivity of speeds, θ ∈ [0, π], continuity between
    /// consecutive arcs and closure at the north pole.
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::NotClosed("loop has no segments".into()));
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.speed > 0.0 && s.speed.is_finite()) {
                return Err(Error::InvalidParameter(format!("segment {i}: speed must be > 0")));
            }
            if !s.delta.is_finite() {
                return Err(Error::InvalidParameter(format!("segment {i}: non-finite delta")));
            }
            let e = s.end();
            for th in [s.start.theta, e.theta] {
                if !(-CONTINUITY_TOL..=PI + CONTINUITY_TOL).contains(&th) {
                    return Err(Error::InvalidParameter(format!(
                        "segment {i}: theta {th} outside [0, π]"
                    )));
                }
            }
        }
        for (i, w) in segments.windows(2).enumerate() {
            let (a, b) = (w[0].end(), w[1].start);
            let dphi = if a.theta.abs() < CONTINUITY_TOL || (a.theta - PI).abs() < CONTINUITY_TOL {
                // φ is arbitrary at a pole.
                0.0
            } else {
                a.phi - b.phi
            };
            if (a.theta - b.theta).abs() > CONTINUITY_TOL || dphi.abs() > CONTINUITY_TOL {
                return Err(Error::InvalidParameter(format!(
                    "segments {i} and {} are not continuous",
                    i + 1
                )));
            }
        }
        let first = segments[0].start.theta;
        let last = segments[segments.len() - 1].end().theta;
        if first.abs() > CONTINUITY_TOL || last.abs() > CONTINUITY_TOL {
            return Err(Error::NotClosed(format!(
                "starts at θ = {first}, ends at θ = {last}"
            )));
        }
        let total_time = segments.iter().map(Segment::duration).sum();
        Ok(Self { segments, total_time })
    }

    /// Staircase loop: from the pole along the meridian φ = `phi0` to the
    /// first level, around each parallel level in turn (joined by meridian
    /// steps), and back to the pole.
    pub fn staircase(levels: &[(f64, f64)], speed: f64, phi0: f64) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidParameter("staircase needs at least one level".into()));
        }
        let mut segs = Vec::with_capacity(2 * levels.len() + 1);
        let mut theta = 0.0;
        let mut phi = phi0;
        for &(level, dphi) in levels {
            segs.push(Segment::meridian(phi, theta, level, speed));
            segs.push(Segment::parallel(level, phi, dphi, speed));
            theta = level;
            phi += dphi;
        }
        segs.push(Segment::meridian(phi, theta, 0.0, speed));
        Self::new(segs)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    /// Times at which consecutive segments meet, including 0 and the end.
    pub fn boundary_times(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        let mut t = 0.0;
        out.push(t);
        for s in &self.segments {
            t += s.duration();
            out.push(t);
        }
        out
    }

    pub fn state_at(&self, t: f64) -> Result<PathState> {
        let total = self.total_time;
        if !(t >= -1e-12 * total.max(1.0) && t <= total * (1.0 + 1e-12) + 1e-15) {
            return Err(Error::TimeOutOfRange { t, total });
        }
        let mut start = 0.0;
        let n = self.segments.len();
        for (i, s) in self.segments.iter().enumerate() {
            let d = s.duration();
            if d == 0.0 {
                continue;
            }
            if t < start + d || i == n - 1 {
                return Ok(s.state_at(t - start));
            }
            start += d;
        }
        // Only zero-length segments remain after `start`.
        let last = self.segments.iter().rev().find(|s| s.duration() > 0.0);
        Ok(match last {
            Some(s) => s.state_at(s.duration()),
            None => self.segments[n - 1].state_at(0.0),
        })
    }

    /// φ̇(t) cos θ(t); zero on meridians.
    pub fn holonomy_angle_rate(&self, t: f64) -> Result<f64> {
        Ok(self.state_at(t)?.holonomy_rate())
    }

    /// ∫ φ̇ cos θ dt over the whole loop, exact.
    pub fn raw_holonomy_angle(&self) -> f64 {
        self.segments
            .iter()
            .filter(|s| s.kind == SegmentKind::Parallel)
            .map(|s| s.delta * s.start.theta.cos())
            .sum()
    }

    /// ∫₀ᵗ φ̇ cos θ dt', the dark-frame rotation angle accumulated by time t.
    pub fn raw_angle_at(&self, t: f64) -> Result<f64> {
        if !(t >= -1e-12 * self.total_time.max(1.0) && t <= self.total_time * (1.0 + 1e-12) + 1e-15) {
            return Err(Error::TimeOutOfRange { t, total: self.total_time });
        }
        let mut start = 0.0;
        let mut acc = 0.0;
        for s in &self.segments {
            let d = s.duration();
            if s.kind == SegmentKind::Parallel {
                let frac = if d > 0.0 { ((t - start) / d).clamp(0.0, 1.0) } else if t >= start { 1.0 } else { 0.0 };
                acc += frac * s.delta * s.start.theta.cos();
            }
            start += d;
            if start > t {
                break;
            }
        }
        Ok(acc)
    }

    /// Enclosed solid angle ∮ (1 − cos θ) dφ.
    pub fn solid_angle(&self) -> f64 {
        self.segments
            .iter()
            .filter(|s| s.kind == SegmentKind::Parallel)
            .map(|s| s.delta * (1.0 - s.start.theta.cos()))
            .sum()
    }

    pub fn max_theta(&self) -> f64 {
        self.segments
            .iter()
            .flat_map(|s| [s.start.theta, s.end().theta])
            .fold(0.0, f64::max)
    }

    /// Time samples with exact endpoints. When `n_steps - 1` is at least the
    /// number of arcs, each arc gets its own uniform sub-grid so every
    /// boundary time is a sample point; otherwise the grid is plainly
    /// uniform.
    pub fn discretize(&self, n_steps: usize) -> Result<Vec<PathSample>> {
        if n_steps < 2 {
            return Err(Error::InvalidParameter("discretize needs n_steps >= 2".into()));
        }
        let total = self.total_time;
        let intervals = n_steps - 1;
        let timed: Vec<(f64, f64)> = {
            let b = self.boundary_times();
            b.windows(2).filter(|w| w[1] > w[0]).map(|w| (w[0], w[1])).collect()
        };
        let mut times = Vec::with_capacity(n_steps);
        if intervals < timed.len() || timed.is_empty() {
            for i in 0..n_steps {
                times.push(total * i as f64 / intervals as f64);
            }
        } else {
            // Largest-remainder allocation of intervals, at least one each.
            let spare = intervals - timed.len();
            let raw: Vec<f64> = timed
                .iter()
                .map(|(a, b)| (b - a) / total * spare as f64)
                .collect();
            let mut counts: Vec<usize> = raw.iter().map(|r| 1 + r.floor() as usize).collect();
            let mut left = intervals - counts.iter().sum::<usize>();
            let mut order: Vec<usize> = (0..raw.len()).collect();
            order.sort_by(|&i, &j| (raw[j] - raw[j].floor()).total_cmp(&(raw[i] - raw[i].floor())));
            for &i in order.iter().cycle() {
                if left == 0 {
                    break;
                }
                counts[i] += 1;
                left -= 1;
            }
            times.push(0.0);
            for ((a, b), &c) in timed.iter().zip(&counts) {
                for k in 1..=c {
                    times.push(if k == c { *b } else { a + (b - a) * k as f64 / c as f64 });
                }
            }
            let last = times.len() - 1;
            times[last] = total;
        }
        times
            .into_iter()
            .map(|t| {
                let s = self.state_at(t)?;
                Ok(PathSample { t, theta: s.theta, phi: s.phi })
            })
            .collect()
    }
}

/// Meridian–parallel–meridian loop with maximal polar angle `theta_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C1Loop {
    pub theta_m: f64,
    pub delta_phi: f64,
    pub speed: f64,
}

impl C1Loop {
    pub fn new(theta_m: f64, delta_phi: f64, speed: f64) -> Result<Self> {
        let l = Self { theta_m, delta_phi, speed };
        l.validate()?;
        Ok(l)
    }

    /// The loop at `theta_m` whose parallel closes solid angle `a`:
    /// Δφ = a / (1 − cos θ_M).
    pub fn for_solid_angle(a: f64, theta_m: f64, speed: f64) -> Result<Self> {
        let c = 1.0 - theta_m.cos();
        if c <= 0.0 {
            return Err(Error::Infeasible(format!(
                "θ_M = {theta_m} cannot enclose solid angle {a}"
            )));
        }
        Self::new(theta_m, a / c, speed)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_m > 0.0 && self.theta_m <= PI) {
            return Err(Error::InvalidParameter(format!("θ_M = {} outside (0, π]", self.theta_m)));
        }
        if !(self.delta_phi >= 0.0 && self.delta_phi.is_finite()) {
            return Err(Error::InvalidParameter(format!("Δφ = {} must be >= 0", self.delta_phi)));
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(Error::InvalidParameter(format!("speed = {} must be > 0", self.speed)));
        }
        Ok(())
    }

    /// Δφ (1 − cos θ_M).
    pub fn solid_angle(&self) -> f64 {
        self.delta_phi * (1.0 - self.theta_m.cos())
    }

    pub fn meridian_time(&self) -> f64 {
        self.theta_m / self.speed
    }

    pub fn parallel_time(&self) -> f64 {
        self.delta_phi * self.theta_m.sin() / self.speed
    }

    /// (2 θ_M + Δφ sin θ_M) / v.
    pub fn total_time(&self) -> f64 {
        2.0 * self.meridian_time() + self.parallel_time()
    }

    pub fn to_path(&self) -> LoopPath {
        LoopPath::staircase(&[(self.theta_m, self.delta_phi)], self.speed, 0.0)
            .expect("a validated C1 loop is a closed staircase")
    }
}

/// θ_M = arccos(1 − a/(2πm)) with m = [(v t)² + a²]/(4πa).
///
/// `t_ad` is the gate time in the sense used for the optimal-loop family:
/// it counts the parallel transit only, see [`schedule_time`].
pub fn theta_m_for_time(a: f64, v_max: f64, t_ad: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("solid angle {a} must be > 0")));
    }
    if !(v_max > 0.0 && t_ad > 0.0 && (v_max * t_ad).is_finite()) {
        return Err(Error::Infeasible(format!(
            "v_max·t_ad = {} must be positive and finite",
            v_max * t_ad
        )));
    }
    let k = v_max * t_ad;
    let m = (k * k + a * a) / (4.0 * PI * a);
    let arg = 1.0 - a / (2.0 * PI * m);
    if !(-1.0..=1.0).contains(&arg) {
        return Err(Error::Infeasible(format!(
            "arccos argument {arg} outside [-1, 1] for v·t = {k}"
        )));
    }
    // 1 − arg = 2a²/(k² + a²); use the half-angle form to keep precision at
    // small θ_M.
    let half = (a * a / (k * k + a * a)).sqrt().min(1.0);
    let theta = 2.0 * half.asin();
    debug_assert!((theta.cos() - arg).abs() < 1e-9);
    Ok(theta)
}

/// Inverse of [`theta_m_for_time`]: v t = a cot(θ_M/2), the time spent on
/// the parallel of the loop enclosing `a` at `theta_m`, without the meridian
/// transits.
pub fn schedule_time(a: f64, theta_m: f64, v: f64) -> f64 {
    a / (0.5 * theta_m).tan() / v
}

/// Staircase loop made of `levels.len()` parallels (the C_n family).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnLoop {
    /// (θ_i, Δφ_i) of each parallel, in traversal order.
    pub levels: Vec<(f64, f64)>,
    pub speed: f64,
}

impl CnLoop {
    pub fn new(levels: Vec<(f64, f64)>, speed: f64) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidParameter("C_n loop needs n >= 1".into()));
        }
        for &(th, dphi) in &levels {
            if !(th > 0.0 && th <= PI) || !(dphi >= 0.0 && dphi.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "level (θ = {th}, Δφ = {dphi}) is not valid"
                )));
            }
        }
        if !(speed > 0.0) {
            return Err(Error::InvalidParameter("speed must be > 0".into()));
        }
        Ok(Self { levels, speed })
    }

    pub fn n(&self) -> usize {
        self.levels.len()
    }

    pub fn solid_angle(&self) -> f64 {
        self.levels.iter().map(|&(th, d)| d * (1.0 - th.cos())).sum()
    }

    pub fn to_path(&self) -> Result<LoopPath> {
        LoopPath::staircase(&self.levels, self.speed, 0.0)
    }

    /// Reduces to a [`C1Loop`] when n = 1.
    pub fn as_c1(&self) -> Option<C1Loop> {
        match self.levels.as_slice() {
            [(th, d)] => C1Loop::new(*th, *d, self.speed).ok(),
            _ => None,
        }
    }
}
