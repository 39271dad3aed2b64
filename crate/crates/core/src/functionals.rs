//! Averaged gate-error functionals.
//!
//! Rates such as K enter in 1/ps and speeds in rad/ps, so every closed form
//! below is dimensionless. Bath integrals run in natural units (meV, ħ/meV)
//! and are converted at the boundary.

use std::f64::consts::PI;

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use crate::bath::{kernel_g, kernel_g_limit, BathSpec};
use crate::dynamics::{dark_frame, eigensystem, Vec4, C64};
use crate::geometry::{C1Loop, LoopPath, SegmentKind};
use crate::model::{GateSpec, PhysicalParams, HBAR_MEV_PS};
use crate::quad::{integrate, integrate_with_breaks, QuadOptions};
use crate::{Error, Result};

/// Transition and pure-dephasing parts of the averaged error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub delta_tr_meridian: f64,
    pub delta_tr_parallel: f64,
    pub delta_pd_meridian: f64,
    pub delta_pd_parallel: f64,
    pub total: f64,
    /// All parts non-negative and total ≤ 1.
    pub perturbative: bool,
}

impl ErrorBreakdown {
    pub fn new(tr_m: f64, tr_p: f64, pd_m: f64, pd_p: f64) -> Self {
        let total = tr_m + tr_p + pd_m + pd_p;
        let perturbative = [tr_m, tr_p, pd_m, pd_p].iter().all(|x| *x >= 0.0) && total <= 1.0;
        Self {
            delta_tr_meridian: tr_m,
            delta_tr_parallel: tr_p,
            delta_pd_meridian: pd_m,
            delta_pd_parallel: pd_p,
            total,
            perturbative,
        }
    }

    pub fn transition(tr_m: f64, tr_p: f64) -> Self {
        Self::new(tr_m, tr_p, 0.0, 0.0)
    }

    pub fn delta_tr(&self) -> f64 {
        self.delta_tr_meridian + self.delta_tr_parallel
    }

    pub fn delta_pd(&self) -> f64 {
        self.delta_pd_meridian + self.delta_pd_parallel
    }
}

/// Diagonal system-bath coupling operator in the (|G⟩, |+⟩, |−⟩, |0⟩) basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NoiseOperator {
    /// diag(0, 0, 0, 1).
    #[serde(rename = "DEPHASE_0")]
    Dephase0,
    /// diag(0, 1, 0, −1).
    SplitPm,
    Diagonal([f64; 4]),
}

impl NoiseOperator {
    pub fn diagonal(&self) -> [f64; 4] {
        match self {
            NoiseOperator::Dephase0 => [0.0, 0.0, 0.0, 1.0],
            NoiseOperator::SplitPm => [0.0, 1.0, 0.0, -1.0],
            NoiseOperator::Diagonal(d) => *d,
        }
    }

    pub fn apply(&self, v: &Vec4) -> Vec4 {
        let d = self.diagonal();
        Vector4::new(v[0] * d[0], v[1] * d[1], v[2] * d[2], v[3] * d[3])
    }

    pub fn is_zero(&self) -> bool {
        self.diagonal().iter().all(|x| *x == 0.0)
    }
}

/// (K/v)(θ_M − sin 4θ_M / 4): both meridian transits of a C1 loop.
pub fn delta_tr_meridian(theta_m: f64, v: f64, k: f64) -> f64 {
    k / v * (theta_m - (4.0 * theta_m).sin() / 4.0)
}

/// K (a/v) sinθ_M sin²2θ_M / (1 − cos θ_M).
pub fn delta_tr_parallel(theta_m: f64, a: f64, v: f64, k: f64) -> Result<f64> {
    if a == 0.0 {
        return Ok(0.0);
    }
    if theta_m <= 0.0 {
        return Err(Error::Infeasible(format!(
            "θ_M = {theta_m} cannot enclose solid angle {a}"
        )));
    }
    let one_minus_cos = 2.0 * (0.5 * theta_m).sin().powi(2);
    Ok(k * a / v * theta_m.sin() * (2.0 * theta_m).sin().powi(2) / one_minus_cos)
}

/// Transition parts of a C1 loop's error.
pub fn delta_tr_c1(lp: &C1Loop, gate: &GateSpec, k: f64) -> Result<ErrorBreakdown> {
    let a = lp.solid_angle();
    if (a - gate.solid_angle).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "loop encloses {a}, gate needs {}",
            gate.solid_angle
        )));
    }
    Ok(ErrorBreakdown::transition(
        delta_tr_meridian(lp.theta_m, lp.speed, k),
        delta_tr_parallel(lp.theta_m, gate.solid_angle, lp.speed, k)?,
    ))
}

/// Antiderivative of sin² 2θ.
fn sin2_sq_primitive(theta: f64) -> f64 {
    theta / 2.0 - (4.0 * theta).sin() / 8.0
}

/// (meridian, parallel) parts of ∫ sin² 2θ(t) dt over any segment loop, exact.
pub fn transition_weight(path: &LoopPath) -> (f64, f64) {
    let mut m = 0.0;
    let mut p = 0.0;
    for s in path.segments() {
        match s.kind {
            SegmentKind::Meridian => {
                let e = s.end();
                m += (sin2_sq_primitive(e.theta) - sin2_sq_primitive(s.start.theta)).abs() / s.speed;
            }
            SegmentKind::Parallel => {
                p += (2.0 * s.start.theta).sin().powi(2) * s.duration();
            }
        }
    }
    (m, p)
}

/// K ∫ sin² 2θ dt split by segment kind; reduces to [`delta_tr_c1`] on C1.
pub fn delta_tr_path(path: &LoopPath, k: f64) -> ErrorBreakdown {
    let (m, p) = transition_weight(path);
    ErrorBreakdown::transition(k * m, k * p)
}

/// Time window of the parallel pure-dephasing integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdWindow {
    /// Only while the loop is on its parallel.
    #[default]
    Parallel,
    /// Over the whole gate time [0, t_ad], with Q frozen outside the parallel.
    WholeLoop,
}

/// Sum of c·cos(ν t + p) on [a, b] (natural units).
#[derive(Debug, Clone, Default)]
struct TrigPieces {
    terms: Vec<(f64, f64, f64, f64, f64)>,
}

impl TrigPieces {
    fn push(&mut self, coef: f64, nu: f64, phase: f64, a: f64, b: f64) {
        if coef != 0.0 && b > a {
            self.terms.push((coef, nu, phase, a, b));
        }
    }

    /// ∫ sin(ω t) Σ c cos(ν t + p) dt, exact.
    fn sin_moment(&self, w: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(c, nu, p, a, b)| 0.5 * c * (int_sin(w + nu, p, a, b) + int_sin(w - nu, -p, a, b)))
            .sum()
    }
}

/// ∫ₐᵇ sin(f t + p) dt, stable as f → 0.
fn int_sin(f: f64, p: f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let s = if (f * half).abs() < 1e-10 { half } else { (f * half).sin() / f };
    2.0 * s * (f * 0.5 * (a + b) + p).sin()
}

/// (π/8) ∫ dω (J/ω) coth(ω/2T) ∫ dt sin(ωt) w(t) for the given t-weight.
fn dephasing_double_integral(pieces: &TrigPieces, spec: &BathSpec, temperature: f64) -> Result<f64> {
    spec.validate()?;
    let span = pieces.terms.iter().map(|t| t.4).fold(0.0, f64::max);
    let upper = crate::bath::CUTOFF_SPAN * spec.omega_c;
    // Panel edges every half period of the fastest t-oscillation.
    let mut breaks = vec![spec.omega_c];
    if span > 0.0 {
        let step = PI / span;
        let n = ((upper / step) as usize).min(20_000);
        breaks.extend((1..n).map(|i| i as f64 * step));
    }
    let scale = spec.k * spec.omega_c.powf(spec.s) * span.max(1.0);
    let opts = QuadOptions { abs_tol: 1e-16 * scale, rel_tol: 1e-8, max_panels: 200_000 };
    let r = integrate_with_breaks(
        |w: f64| spec.j_coth(w, temperature) / w * pieces.sin_moment(w),
        0.0,
        upper,
        &breaks,
        opts,
    )?;
    Ok(PI / 8.0 * r.value)
}

/// Parallel pure-dephasing error:
/// (π/8) ∫dt ∫dω (J/ω) coth(ω/2T) sin ωt · sin⁴θ_M · Q[a(t)],
/// Q = 1 + ½ sin²2a(t), a(t) the dark-frame angle accumulated so far.
pub fn delta_pd_parallel(lp: &C1Loop, spec: &BathSpec, temperature: f64, window: PdWindow) -> Result<f64> {
    lp.validate()?;
    let h = HBAR_MEV_PS;
    let t1 = lp.meridian_time() / h;
    let t2 = t1 + lp.parallel_time() / h;
    let tad = lp.total_time() / h;
    let s4 = lp.theta_m.sin().powi(4);
    let mut pieces = TrigPieces::default();
    // sin²2a = (1 − cos 4a)/2, so Q = 5/4 − ¼ cos 4a. On the parallel
    // a(t) = r (t − t1).
    let r = if t2 > t1 { lp.delta_phi * lp.theta_m.cos() / (t2 - t1) } else { 0.0 };
    pieces.push(1.25 * s4, 0.0, 0.0, t1, t2);
    pieces.push(-0.25 * s4, 4.0 * r, -4.0 * r * t1, t1, t2);
    if window == PdWindow::WholeLoop {
        pieces.push(s4, 0.0, 0.0, 0.0, t1);
        let a_end = lp.delta_phi * lp.theta_m.cos();
        let q_end = 1.0 + 0.5 * (2.0 * a_end).sin().powi(2);
        pieces.push(s4 * q_end, 0.0, 0.0, t2, tad);
    }
    dephasing_double_integral(&pieces, spec, temperature)
}

/// Meridian pure-dephasing error over [0, θ_M/v]:
/// (π/8) ∫dt ∫dω (J/ω) coth(ω/2T) sin ωt [sin⁴(vt) + sin⁴(θ_M − vt)].
pub fn delta_pd_meridian(lp: &C1Loop, spec: &BathSpec, temperature: f64) -> Result<f64> {
    lp.validate()?;
    let h = HBAR_MEV_PS;
    let end = lp.meridian_time() / h;
    let v = lp.speed * h;
    let th = lp.theta_m;
    let mut pieces = TrigPieces::default();
    // sin⁴x = 3/8 − ½ cos 2x + ⅛ cos 4x
    pieces.push(0.75, 0.0, 0.0, 0.0, end);
    pieces.push(-0.5, 2.0 * v, 0.0, 0.0, end);
    pieces.push(0.125, 4.0 * v, 0.0, 0.0, end);
    pieces.push(-0.5, -2.0 * v, 2.0 * th, 0.0, end);
    pieces.push(0.125, -4.0 * v, 4.0 * th, 0.0, end);
    dephasing_double_integral(&pieces, spec, temperature)
}

/// Full breakdown of a C1 loop: closed-form transition parts plus both
/// pure-dephasing integrals.
pub fn c1_breakdown(
    lp: &C1Loop,
    gate: &GateSpec,
    k_per_ps: f64,
    spec: &BathSpec,
    temperature: f64,
    window: PdWindow,
) -> Result<ErrorBreakdown> {
    let tr = delta_tr_c1(lp, gate, k_per_ps)?;
    let pd_m = delta_pd_meridian(lp, spec, temperature)?;
    let pd_p = delta_pd_parallel(lp, spec, temperature, window)?;
    Ok(ErrorBreakdown::new(tr.delta_tr_meridian, tr.delta_tr_parallel, pd_m, pd_p))
}

/// Memory-kernel treatment of the transition channels in [`delta_general`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelMode {
    /// G(t) at the elapsed time.
    Full,
    /// G(∞) for the bright channels; the degenerate channel keeps G(t).
    Plateau,
}

/// Result of [`delta_general`] split by channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralError {
    /// Both bright channels.
    pub transition: f64,
    /// The degenerate (other dark state) channel.
    pub dephasing: f64,
    pub total: f64,
}

/// Six axis states of the logical Bloch sphere, a spherical 2-design.
pub fn two_design() -> [[C64; 2]; 6] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let c = |x: f64, y: f64| C64::new(x, y);
    [
        [c(1.0, 0.0), c(0.0, 0.0)],
        [c(0.0, 0.0), c(1.0, 0.0)],
        [c(r, 0.0), c(r, 0.0)],
        [c(r, 0.0), c(-r, 0.0)],
        [c(r, 0.0), c(0.0, r)],
        [c(r, 0.0), c(0.0, -r)],
    ]
}

/// δ = (2/π) ⟨Σₙ ∫dt Gₙ(t) |⟨ψ₀(t)|A|φₙ(t)⟩|²⟩ over the orthogonal
/// complement {φₙ} of the transported logical state ψ₀(t).
///
/// The 2/π turns the kernel plateau (π/2)Γ into the golden-rule rate Γ, so
/// the transition part matches the closed forms. Time integration is the
/// trapezoid rule on `n_steps` boundary-respecting intervals; the initial
/// state average uses [`two_design`].
pub fn delta_general(
    path: &LoopPath,
    noise: NoiseOperator,
    params: &PhysicalParams,
    spec: &BathSpec,
    temperature: f64,
    n_steps: usize,
    mode: KernelMode,
) -> Result<GeneralError> {
    if noise.is_zero() {
        return Ok(GeneralError { transition: 0.0, dephasing: 0.0, total: 0.0 });
    }
    let samples = path.discretize(n_steps + 1)?;
    let (lp, lm) = params.bright_energies();
    let eps = params.epsilon;
    let omegas = [eps - lp, eps - lm, 0.0];
    let kernel = |t_ps: f64, n: usize| -> Result<f64> {
        if n < 2 && mode == KernelMode::Plateau {
            Ok(kernel_g_limit(omegas[n], spec, temperature))
        } else {
            kernel_g(t_ps, omegas[n], spec, temperature)
        }
    };
    let design = two_design();
    let mut rows: Vec<[f64; 2]> = Vec::with_capacity(samples.len());
    for smp in &samples {
        let es = eigensystem(smp.theta, smp.phi, params);
        let [e1, e2] = dark_frame(smp.theta, smp.phi);
        let a = path.raw_angle_at(smp.t)?;
        let (sa, ca) = a.sin_cos();
        let psi1 = e1 * C64::new(ca, 0.0) + e2 * C64::new(sa, 0.0);
        let psi2 = e1 * C64::new(-sa, 0.0) + e2 * C64::new(ca, 0.0);
        let g = [kernel(smp.t, 0)?, kernel(smp.t, 1)?, kernel(smp.t, 2)?];
        let bright = es.bright();
        let mut tr = 0.0;
        let mut pd = 0.0;
        for [x, y] in design {
            let psi = psi1 * x + psi2 * y;
            let perp = psi1 * (-y.conj()) + psi2 * x.conj();
            let a_psi = noise.apply(&psi);
            for (n, phi) in bright.iter().enumerate() {
                tr += g[n] * phi.dotc(&a_psi).norm_sqr();
            }
            pd += g[2] * perp.dotc(&a_psi).norm_sqr();
        }
        rows.push([tr / 6.0, pd / 6.0]);
    }
    let mut acc = [0.0; 2];
    for (w, r) in samples.windows(2).zip(rows.windows(2)) {
        let dt = (w[1].t - w[0].t) / HBAR_MEV_PS;
        for c in 0..2 {
            acc[c] += 0.5 * dt * (r[0][c] + r[1][c]);
        }
    }
    let f = 2.0 / PI;
    let (transition, dephasing) = (f * acc[0], f * acc[1]);
    Ok(GeneralError { transition, dephasing, total: transition + dephasing })
}

/// K ∫ [(½ sin2θ cos2θ)² + (sinθ sin2φ)²] dt along the loop.
pub fn delta_tr_general_noise(path: &LoopPath, k: f64) -> Result<f64> {
    let density = |theta: f64, phi: f64| {
        let a = 0.5 * (2.0 * theta).sin() * (2.0 * theta).cos();
        let b = theta.sin() * (2.0 * phi).sin();
        a * a + b * b
    };
    let mut total = 0.0;
    let mut start = 0.0;
    for s in path.segments() {
        let d = s.duration();
        if d > 0.0 {
            let r = integrate(
                |t: f64| {
                    let st = s.state_at(t);
                    density(st.theta, st.phi)
                },
                0.0,
                d,
                QuadOptions::rel(1e-10),
            )?;
            total += r.value;
        }
        start += d;
    }
    debug_assert!((start - path.total_time()).abs() <= 1e-9 * start.max(1.0));
    Ok(k * total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Root-mean-square residual in ln y.
    pub residual: f64,
}

/// Least-squares line through (ln x, ln y).
pub fn fit_powerlaw(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 5 {
        return Err(Error::InvalidParameter(format!(
            "power-law fit needs at least 5 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::InvalidParameter("power-law fit needs positive data".into()));
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("power-law fit needs distinct x values".into()));
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
    Ok(PowerLawFit { exponent: slope, prefactor: icpt.exp(), residual: (rss / n).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::composite_k;
    use crate::geometry::theta_m_for_time;
    use proptest::prelude::*;

    /// K ∫ sin²2θ(t) dt by adaptive quadrature of the sampled loop.
    fn quadrature_tr(path: &LoopPath, k: f64) -> f64 {
        let bounds = path.boundary_times();
        let r = integrate_with_breaks(
            |t: f64| (2.0 * path.state_at(t).unwrap().theta).sin().powi(2),
            0.0,
            path.total_time(),
            &bounds,
            QuadOptions::rel(1e-12),
        )
        .unwrap();
        k * r.value
    }

    #[test]
    fn meridian_examples() {
        assert_eq!(delta_tr_meridian(0.0, 0.3, 2.0), 0.0);
        let (k, v) = (1.7e-3, 0.3);
        assert!((delta_tr_meridian(PI / 2.0, v, k) - k * PI / (2.0 * v)).abs() < 1e-15);
    }

    #[test]
    fn parallel_examples() {
        let (k, v) = (1.0, 0.5);
        assert!(delta_tr_parallel(PI / 2.0, 1.0, v, k).unwrap().abs() < 1e-15);
        assert!(delta_tr_parallel(0.0, 1.0, v, k).is_err());
        assert_eq!(delta_tr_parallel(0.0, 0.0, v, k).unwrap(), 0.0);
        for &th in &[1e-3, 1e-4, 1e-5] {
            let d = delta_tr_parallel(th, 0.8, v, k).unwrap();
            let series = k * 0.8 / v * 8.0 * th;
            assert!((d - series).abs() < 3.0 * th * th * series / th.max(1e-300) + 1e-18);
            assert!(((d - series) / series).abs() < 10.0 * th * th + 1e-12);
        }
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let (k, v) = (2.3e-6, 0.3);
        for &(th, a) in &[(0.2, PI / 2.0), (0.9, PI / 4.0), (PI / 2.0, 1.0), (2.4, PI / 2.0)] {
            let lp = C1Loop::for_solid_angle(a, th, v).unwrap();
            let path = lp.to_path();
            let gate = GateSpec::custom(a).unwrap();
            let cf = delta_tr_c1(&lp, &gate, k).unwrap();
            let q = quadrature_tr(&path, k);
            assert!((cf.delta_tr() - q).abs() < 1e-9 * q, "{} vs {q}", cf.delta_tr());
            // per part
            let t1 = lp.meridian_time();
            let t2 = t1 + lp.parallel_time();
            let par = k * integrate(
                |t: f64| (2.0 * path.state_at(t).unwrap().theta).sin().powi(2),
                t1,
                t2,
                QuadOptions::rel(1e-12),
            )
            .unwrap()
            .value;
            assert!((cf.delta_tr_parallel - par).abs() <= 1e-9 * par.abs().max(1e-20));
            let exact = delta_tr_path(&path, k);
            assert!((exact.delta_tr() - cf.delta_tr()).abs() < 1e-12 * q);
        }
    }

    #[test]
    fn stationary_at_equator() {
        let (k, v) = (1.0, 1.0);
        for &a in &[PI / 4.0, PI / 2.0, PI] {
            let f = |th: f64| delta_tr_meridian(th, v, k) + delta_tr_parallel(th, a, v, k).unwrap();
            let h = 1e-5;
            let d = (f(PI / 2.0 + h) - f(PI / 2.0 - h)) / (2.0 * h);
            assert!(d.abs() < 1e-9, "a = {a}: {d}");
            assert!((f(PI / 2.0) - k * PI / (2.0 * v)).abs() < 1e-14);
        }
    }

    #[test]
    fn inverse_time_law() {
        let (k, v, a) = (1.0, 0.3, PI / 2.0);
        let mut prev: Option<f64> = None;
        for &t in &[1e3, 1e4, 1e5, 1e6] {
            let th = theta_m_for_time(a, v, t).unwrap();
            let d = delta_tr_meridian(th, v, k) + delta_tr_parallel(th, a, v, k).unwrap();
            let prod = d * t;
            let asym = 16.0 * k * a * a / (v * v);
            if let Some(p) = prev {
                assert!((prod - asym).abs() < (p - asym).abs());
            }
            prev = Some(prod);
        }
        assert!((prev.unwrap() / (16.0 * k * a * a / (v * v)) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn dephasing_vanishes_at_small_theta() {
        let b = BathSpec::reference();
        let big = C1Loop::for_solid_angle(PI / 2.0, 1.0, 0.3).unwrap();
        let small = C1Loop::for_solid_angle(PI / 2.0, 1e-3, 0.3).unwrap();
        let pb = delta_pd_parallel(&big, &b, 0.01, PdWindow::Parallel).unwrap().abs();
        let ps = delta_pd_parallel(&small, &b, 0.01, PdWindow::Parallel).unwrap().abs();
        assert!(ps < 1e-6 * pb);
        let mb = delta_pd_meridian(&big, &b, 0.01).unwrap().abs();
        let ms = delta_pd_meridian(&small, &b, 0.01).unwrap().abs();
        assert!(ms < 1e-6 * mb);
    }

    /// Brute-force nested quadrature of the printed double integrals.
    fn nested_pd(lp: &C1Loop, b: &BathSpec, temp: f64, meridian: bool) -> f64 {
        let h = HBAR_MEV_PS;
        let s_of_t = |t_ps: f64| crate::bath::dephasing_kernel(t_ps, b, temp).unwrap();
        let opts = QuadOptions { abs_tol: 1e-22, rel_tol: 1e-9, max_panels: 20_000 };
        if meridian {
            let v = lp.speed;
            let th = lp.theta_m;
            integrate(
                |t: f64| s_of_t(t) * ((v * t).sin().powi(4) + (th - v * t).sin().powi(4)),
                0.0,
                lp.meridian_time(),
                opts,
            )
            .unwrap()
            .value
                * PI
                / 8.0
                / h
        } else {
            let t1 = lp.meridian_time();
            let t2 = t1 + lp.parallel_time();
            let r = lp.delta_phi * lp.theta_m.cos() / lp.parallel_time();
            integrate(
                |t: f64| {
                    let q = 1.0 + 0.5 * (2.0 * r * (t - t1)).sin().powi(2);
                    s_of_t(t) * lp.theta_m.sin().powi(4) * q
                },
                t1,
                t2,
                opts,
            )
            .unwrap()
            .value
                * PI
                / 8.0
                / h
        }
    }

    #[test]
    fn dephasing_matches_nested_quadrature() {
        let b = BathSpec::reference();
        for &(th, temp) in &[(0.6, 0.0), (1.2, 0.05)] {
            let lp = C1Loop::for_solid_angle(PI / 2.0, th, 0.3).unwrap();
            let fast = delta_pd_parallel(&lp, &b, temp, PdWindow::Parallel).unwrap();
            let slow = nested_pd(&lp, &b, temp, false);
            assert!((fast - slow).abs() < 1e-6 * slow.abs(), "{fast} vs {slow}");
            let fast = delta_pd_meridian(&lp, &b, temp).unwrap();
            let slow = nested_pd(&lp, &b, temp, true);
            assert!((fast - slow).abs() < 1e-6 * slow.abs(), "{fast} vs {slow}");
        }
    }

    #[test]
    fn whole_loop_window_adds_meridian_time() {
        let b = BathSpec::reference();
        let lp = C1Loop::for_solid_angle(PI / 4.0, 0.8, 0.3).unwrap();
        let par = delta_pd_parallel(&lp, &b, 0.0, PdWindow::Parallel).unwrap();
        let whole = delta_pd_parallel(&lp, &b, 0.0, PdWindow::WholeLoop).unwrap();
        assert!(par != whole);
    }

    #[test]
    fn general_noise_examples() {
        let p = PhysicalParams::reference();
        let b = BathSpec::reference();
        let pole = LoopPath::new(vec![
            crate::geometry::Segment::meridian(0.0, 0.0, 1e-9, 0.3),
            crate::geometry::Segment::meridian(0.0, 1e-9, 0.0, 0.3),
        ])
        .unwrap();
        let zero = delta_general(&pole, NoiseOperator::Diagonal([0.0; 4]), &p, &b, 0.0, 10, KernelMode::Full)
            .unwrap();
        assert_eq!(zero.total, 0.0);
        let lp = C1Loop::for_solid_angle(PI / 2.0, 0.7, p.v_max).unwrap().to_path();
        let id = delta_general(&lp, NoiseOperator::Diagonal([1.0; 4]), &p, &b, 0.0, 40, KernelMode::Plateau)
            .unwrap();
        assert!(id.total.abs() < 1e-20);
        let z = delta_general(&lp, NoiseOperator::Diagonal([0.0; 4]), &p, &b, 0.0, 40, KernelMode::Plateau)
            .unwrap();
        assert_eq!(z.total, 0.0);
        assert!(delta_tr_general_noise(&pole, 1.0).unwrap() < 1e-17);
    }

    #[test]
    fn general_functional_reproduces_closed_forms() {
        // Past the critical time the plateau transition part of the general
        // functional must agree with the closed forms.
        let p = PhysicalParams::reference();
        let b = BathSpec::reference();
        let temp = 0.0;
        let k = composite_k(&p, &b, temp).unwrap().k_per_ps();
        let a = PI / 2.0;
        let th = theta_m_for_time(a, p.v_max, 200.0).unwrap();
        let lp = C1Loop::for_solid_angle(a, th, p.v_max).unwrap();
        let gate = GateSpec::not();
        let cf = c1_breakdown(&lp, &gate, k, &b, temp, PdWindow::Parallel).unwrap();
        let g = delta_general(&lp.to_path(), NoiseOperator::Dephase0, &p, &b, temp, 400, KernelMode::Plateau)
            .unwrap();
        let rel = (g.total - cf.total).abs() / cf.total;
        assert!(rel < 0.02, "general {} vs closed form {} ({rel})", g.total, cf.total);
    }

    #[test]
    fn errors_are_linear_in_k() {
        let lp = C1Loop::for_solid_angle(PI / 2.0, 0.4, 0.3).unwrap();
        let g = GateSpec::not();
        let one = delta_tr_c1(&lp, &g, 1e-6).unwrap();
        let two = delta_tr_c1(&lp, &g, 2e-6).unwrap();
        assert!((two.total - 2.0 * one.total).abs() < 1e-20);
        let b = BathSpec::reference();
        let p1 = delta_pd_parallel(&lp, &b, 0.01, PdWindow::Parallel).unwrap();
        let p2 = delta_pd_parallel(&lp, &b.with_k(2e-2), 0.01, PdWindow::Parallel).unwrap();
        assert!((p2 - 2.0 * p1).abs() < 1e-9 * p1.abs());
    }

    #[test]
    fn fit_examples() {
        let pts: Vec<(f64, f64)> = (1..=6).map(|i| (i as f64, 3.0 / i as f64)).collect();
        let f = fit_powerlaw(&pts).unwrap();
        assert!((f.exponent + 1.0).abs() < 1e-12 && (f.prefactor - 3.0).abs() < 1e-12);
        let pts: Vec<(f64, f64)> = (1..=6).map(|i| (i as f64, 0.5 * (i as f64).powi(3))).collect();
        assert!((fit_powerlaw(&pts).unwrap().exponent - 3.0).abs() < 1e-12);
        assert!(fit_powerlaw(&pts[..4]).is_err());
        assert!(fit_powerlaw(&[(1.0, 1.0), (2.0, -1.0), (3.0, 1.0), (4.0, 1.0), (5.0, 1.0)]).is_err());
    }

    proptest! {
        #[test]
        fn noisy_fit_recovers_exponent(seed in 0u64..1000, expo in -6.0f64..3.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<(f64, f64)> = (0..20)
                .map(|i| {
                    let x = 10f64.powf(i as f64 / 19.0 * 2.0);
                    (x, 2.0 * x.powf(expo) * (1.0 + rng.random_range(-0.01..0.01)))
                })
                .collect();
            let f = fit_powerlaw(&pts).unwrap();
            prop_assert!((f.exponent - expo).abs() < 0.05);
        }

        #[test]
        fn closed_forms_equal_exact_path_weight(th in 0.01f64..3.1, a in 0.05f64..6.0, v in 0.05f64..2.0) {
            let lp = C1Loop::for_solid_angle(a, th, v).unwrap();
            let gate = GateSpec::custom(a).unwrap();
            let cf = delta_tr_c1(&lp, &gate, 1.0).unwrap();
            let ex = delta_tr_path(&lp.to_path(), 1.0);
            prop_assert!((cf.delta_tr() - ex.delta_tr()).abs() <= 1e-9 * cf.delta_tr().max(1e-12));
        }
    }
}
