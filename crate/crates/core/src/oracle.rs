//! Independent check of the error functionals: a second-order (Born)
//! master-equation integration of the full four-level system along a loop,
//! followed by the average fidelity loss over the logical subspace.
//!
//! Nothing here uses the closed-form eigensystem or the composite K. The
//! adiabatic propagator is rebuilt from direct diagonalization and discrete
//! parallel transport, and the bath enters only through the two-point
//! function C(τ) = g(τ)/π.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;

use nalgebra::{Matrix2, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::{composite_k, memory_transform, BathSpec};
use crate::dynamics::{align_pair, build_hamiltonian, numeric_eigensystem, Mat4, Vec4, C64};
use crate::functionals::{two_design, NoiseOperator};
use crate::geometry::{C1Loop, LoopPath};
use crate::model::{GateSpec, PhysicalParams, HBAR_MEV_PS};
use crate::{Error, Result};

/// Memory cutoff in units of 1/ω_c.
pub const TAU_MAX_CUTOFFS: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(pub Mat4);

impl DensityMatrix {
    pub fn pure(psi: &Vec4) -> Self {
        Self(psi * psi.adjoint())
    }

    /// State of the logical pair x|+⟩ + y|−⟩.
    pub fn logical(x: C64, y: C64) -> Self {
        let z = C64::new(0.0, 0.0);
        Self::pure(&Vec4::new(z, x, y, z))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (self.0 - self.0.adjoint()).norm()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Unit trace to 1e-10, Hermitian to 1e-12, eigenvalues ≥ −1e-8.
    pub fn validate(&self) -> Result<()> {
        if (self.trace() - C64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(Error::InvalidParameter(format!("trace {} is not 1", self.trace())));
        }
        if self.hermiticity_defect() > 1e-12 {
            return Err(Error::InvalidParameter("density matrix is not Hermitian".into()));
        }
        if self.min_eigenvalue() < -1e-8 {
            return Err(Error::InvalidParameter("density matrix is not positive".into()));
        }
        Ok(())
    }

    pub fn expectation(&self, psi: &Vec4) -> f64 {
        psi.dotc(&(self.0 * psi)).re
    }
}

/// Time order of the bath operator inside the memory integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelSign {
    /// A(t − τ) ≈ e^{iτH} A e^{−iτH}, as written for the closed forms;
    /// transitions up in energy carry [coth + 1].
    #[default]
    Printed,
    /// A(t − τ) = e^{−iτH} A e^{iτH}; transitions down carry [coth + 1].
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    /// Time steps along the loop.
    pub steps: usize,
    pub sign: KernelSign,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { steps: 400, sign: KernelSign::Printed }
    }
}

struct Sample {
    /// Natural time (ħ/meV).
    t: f64,
    energies: [f64; 4],
    /// Instantaneous eigenvectors as columns.
    eig: Mat4,
    /// Adiabatic propagator from t = 0.
    u: Mat4,
}

/// Instantaneous spectra and the adiabatic propagator on the loop grid.
fn adiabatic_frames(path: &LoopPath, params: &PhysicalParams, steps: usize) -> Result<Vec<Sample>> {
    let grid = path.discretize(steps + 1)?;
    let mut out: Vec<Sample> = Vec::with_capacity(grid.len());
    let mut frame: Option<(Vec<Vec4>, [f64; 4])> = None;
    let mut w0 = Mat4::identity();
    let mut prev_t = 0.0;
    let mut prev_e = [0.0; 4];
    for (i, s) in grid.iter().enumerate() {
        let t = s.t / HBAR_MEV_PS;
        let es = numeric_eigensystem(&build_hamiltonian(s.theta, s.phi, params));
        let (cols, phases) = match frame.take() {
            None => (es.vectors.to_vec(), [0.0; 4]),
            Some((prev, mut ph)) => {
                let mut cols = Vec::with_capacity(4);
                for k in 0..2 {
                    let v = es.vectors[k];
                    let ov = v.dotc(&prev[k]);
                    let phase = if ov.norm() > 0.0 { ov / ov.norm() } else { C64::new(1.0, 0.0) };
                    cols.push(v * phase);
                }
                let dark = align_pair(&[prev[2], prev[3]], &[es.vectors[2], es.vectors[3]]);
                cols.extend(dark);
                let dt = t - prev_t;
                for k in 0..4 {
                    ph[k] += 0.5 * dt * (prev_e[k] + es.eigenvalues[k]);
                }
                (cols, ph)
            }
        };
        let w = Mat4::from_columns(&[
            cols[0] * C64::from_polar(1.0, -phases[0]),
            cols[1] * C64::from_polar(1.0, -phases[1]),
            cols[2] * C64::from_polar(1.0, -phases[2]),
            cols[3] * C64::from_polar(1.0, -phases[3]),
        ]);
        if i == 0 {
            w0 = w;
        }
        out.push(Sample {
            t,
            energies: es.eigenvalues,
            eig: Mat4::from_columns(&es.vectors),
            u: w * w0.adjoint(),
        });
        prev_t = t;
        prev_e = es.eigenvalues;
        frame = Some((cols, phases));
    }
    Ok(out)
}

/// ∫₀ᴸ C(τ) e^{iωτ} dτ, memoised on a 1e-9 grid in ω and L.
struct MemoryCache<'a> {
    spec: &'a BathSpec,
    temperature: f64,
    map: Mutex<HashMap<(i64, i64), C64>>,
}

impl<'a> MemoryCache<'a> {
    fn new(spec: &'a BathSpec, temperature: f64) -> Self {
        Self { spec, temperature, map: Mutex::new(HashMap::new()) }
    }

    fn get(&self, omega: f64, l: f64) -> Result<C64> {
        let key = ((omega * 1e9).round() as i64, (l * 1e9).round() as i64);
        if let Some(v) = self.map.lock().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let v = memory_transform(key.0 as f64 * 1e-9, key.1 as f64 * 1e-9, self.spec, self.temperature)?;
        self.map.lock().expect("cache lock").insert(key, v);
        Ok(v)
    }
}

/// Ā = ∫₀ᴸ dτ C(τ) A(t − τ) in the lab basis, built in the eigenbasis of H(t).
fn memory_operator(
    a: &Mat4,
    s: &Sample,
    l: f64,
    sign: KernelSign,
    cache: &MemoryCache<'_>,
) -> Result<Mat4> {
    let a_eig = s.eig.adjoint() * a * s.eig;
    let mut bar = Mat4::zeros();
    for m in 0..4 {
        for n in 0..4 {
            if a_eig[(m, n)].norm() == 0.0 {
                continue;
            }
            let w = s.energies[m] - s.energies[n];
            let w = match sign {
                KernelSign::Printed => w,
                KernelSign::Standard => -w,
            };
            bar[(m, n)] = a_eig[(m, n)] * cache.get(w, l)?;
        }
    }
    Ok(s.eig * bar * s.eig.adjoint())
}

/// AĀρ − ĀρA + ρĀ†A − AρĀ†.
fn born_generator(a: &Mat4, bar: &Mat4, rho: &Mat4) -> Mat4 {
    let bd = bar.adjoint();
    a * bar * rho - bar * rho * a + rho * bd * a - a * rho * bd
}

fn noise_matrix(noise: NoiseOperator) -> Mat4 {
    let d = noise.diagonal();
    Mat4::from_diagonal(&Vec4::new(
        C64::new(d[0], 0.0),
        C64::new(d[1], 0.0),
        C64::new(d[2], 0.0),
        C64::new(d[3], 0.0),
    ))
}

/// Interaction-picture ρ̃(t_ad) for each initial state, by trapezoid
/// quadrature in t of the Born generator with memory cut at 20/ω_c.
fn evolve_many(
    path: &LoopPath,
    noise: NoiseOperator,
    params: &PhysicalParams,
    spec: &BathSpec,
    temperature: f64,
    initial: &[Mat4],
    opts: OracleOptions,
) -> Result<Vec<Mat4>> {
    params.validate()?;
    spec.validate()?;
    if opts.steps < 1 {
        return Err(Error::InvalidParameter("oracle needs at least one step".into()));
    }
    let tau_max = TAU_MAX_CUTOFFS / spec.omega_c;
    let dt_max = path.total_time() / HBAR_MEV_PS / opts.steps as f64;
    if dt_max > 0.5 * tau_max {
        return Err(Error::InvalidParameter(format!(
            "{} steps are too coarse for the bath memory time {tau_max:.3} ħ/meV",
            opts.steps
        )));
    }
    if noise.is_zero() {
        return Ok(initial.to_vec());
    }
    let a = noise_matrix(noise);
    let frames = adiabatic_frames(path, params, opts.steps)?;
    let cache = MemoryCache::new(spec, temperature);
    let n = frames.len();
    let terms: Vec<Vec<Mat4>> = frames
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let dt_l = if i > 0 { s.t - frames[i - 1].t } else { 0.0 };
            let dt_r = if i + 1 < n { frames[i + 1].t - s.t } else { 0.0 };
            let w = 0.5 * (dt_l + dt_r);
            if w == 0.0 {
                return Ok(vec![Mat4::zeros(); initial.len()]);
            }
            let bar = memory_operator(&a, s, s.t.min(tau_max), opts.sign, &cache)?;
            Ok(initial
                .iter()
                .map(|r0| {
                    let rho = s.u * r0 * s.u.adjoint();
                    s.u.adjoint() * born_generator(&a, &bar, &rho) * s.u * C64::new(w, 0.0)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut out = initial.to_vec();
    for per in terms {
        for (o, t) in out.iter_mut().zip(per) {
            *o -= t;
        }
    }
    Ok(out)
}

/// ρ̃(t_ad) = ρ(0) − ∫dt ∫₀^{min(t, τ_max)} dτ {C(τ)[Ã(t), Ã(t−τ)ρ(0)] + h.c.}.
pub fn evolve_second_order(
    path: &LoopPath,
    noise: NoiseOperator,
    params: &PhysicalParams,
    spec: &BathSpec,
    temperature: f64,
    initial: &DensityMatrix,
    opts: OracleOptions,
) -> Result<DensityMatrix> {
    initial.validate()?;
    let out = evolve_many(path, noise, params, spec, temperature, &[initial.0], opts)?;
    Ok(DensityMatrix(out[0]))
}

/// The linear map ρ(0) ↦ ρ̃(t_ad) restricted to the logical pair, stored on
/// the four operators |i⟩⟨j|, i, j ∈ {+, −}.
#[derive(Debug, Clone)]
pub struct LogicalMap {
    images: [[Mat4; 2]; 2],
}

impl LogicalMap {
    pub fn compute(
        path: &LoopPath,
        noise: NoiseOperator,
        params: &PhysicalParams,
        spec: &BathSpec,
        temperature: f64,
        opts: OracleOptions,
    ) -> Result<Self> {
        let mut basis = Vec::with_capacity(4);
        for i in 0..2 {
            for j in 0..2 {
                let mut m = Mat4::zeros();
                m[(i + 1, j + 1)] = C64::new(1.0, 0.0);
                basis.push(m);
            }
        }
        let im = evolve_many(path, noise, params, spec, temperature, &basis, opts)?;
        Ok(Self { images: [[im[0], im[1]], [im[2], im[3]]] })
    }

    pub fn apply(&self, x: C64, y: C64) -> Mat4 {
        let c = [x, y];
        let mut out = Mat4::zeros();
        for i in 0..2 {
            for j in 0..2 {
                out += self.images[i][j] * (c[i] * c[j].conj());
            }
        }
        out
    }

    /// 1 − ⟨ψ₀|ρ̃|ψ₀⟩ for ψ₀ = x|+⟩ + y|−⟩.
    pub fn infidelity(&self, x: C64, y: C64) -> f64 {
        let z = C64::new(0.0, 0.0);
        let psi = Vec4::new(z, x, y, z);
        1.0 - psi.dotc(&(self.apply(x, y) * psi)).re
    }

    /// Largest |tr ρ̃ − 1| over the six axis states.
    pub fn trace_defect(&self) -> f64 {
        two_design()
            .iter()
            .map(|[x, y]| (self.apply(*x, *y).trace() - C64::new(1.0, 0.0)).norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Average infidelity over the logical Bloch sphere.
    pub delta: f64,
    pub per_state: [f64; 6],
    pub trace_defect: f64,
}

/// δ = 1 − ⟨⟨ψ₀|ρ̃(t_ad)|ψ₀⟩⟩, averaged exactly over the six axis states.
pub fn average_error_oracle(
    path: &LoopPath,
    noise: NoiseOperator,
    params: &PhysicalParams,
    spec: &BathSpec,
    temperature: f64,
    opts: OracleOptions,
) -> Result<OracleResult> {
    let map = LogicalMap::compute(path, noise, params, spec, temperature, opts)?;
    let states = two_design();
    let mut per_state = [0.0; 6];
    for (p, [x, y]) in per_state.iter_mut().zip(states) {
        *p = map.infidelity(x, y);
    }
    Ok(OracleResult {
        delta: per_state.iter().sum::<f64>() / 6.0,
        per_state,
        trace_defect: map.trace_defect(),
    })
}

/// How the pole-to-pole schedule uses time beyond the fastest transit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StirapFill {
    /// Both meridians slowed to v = 2π/t_ad.
    #[default]
    SlowMeridian,
    /// Meridians at v_max with the spare time spent at the south pole.
    HoldAtPole,
}

/// North pole → south pole → north pole along meridians, with the phase
/// set by the φ jump at the south pole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StirapSchedule {
    pub t_ad_ps: f64,
    pub fill: StirapFill,
    /// θ_M = π loop actually traversed (speed already reduced for
    /// [`StirapFill::SlowMeridian`]).
    pub c1: C1Loop,
    pub hold_ps: f64,
}

impl StirapSchedule {
    pub fn new(gate: &GateSpec, v_max: f64, t_ad_ps: f64, fill: StirapFill) -> Result<Self> {
        gate.validate()?;
        let t_min = 2.0 * PI / v_max;
        if !(t_ad_ps >= t_min * (1.0 - 1e-12)) {
            return Err(Error::Infeasible(format!(
                "pole-to-pole transit needs t_ad >= {t_min:.6} ps, got {t_ad_ps}"
            )));
        }
        let dphi = gate.solid_angle / 2.0;
        let (speed, hold) = match fill {
            StirapFill::SlowMeridian => (2.0 * PI / t_ad_ps, 0.0),
            StirapFill::HoldAtPole => (v_max, t_ad_ps - t_min),
        };
        Ok(Self { t_ad_ps, fill, c1: C1Loop::new(PI, dphi, speed)?, hold_ps: hold })
    }

    pub fn path(&self) -> LoopPath {
        self.c1.to_path()
    }
}

/// K ∫ sin² 2θ dt over the pole-to-pole schedule. A hold at θ = π adds
/// nothing since sin 2π = 0.
pub fn stirap_error(
    gate: &GateSpec,
    params: &PhysicalParams,
    spec: &BathSpec,
    temperature: f64,
    t_ad_ps: f64,
    fill: StirapFill,
) -> Result<f64> {
    params.validate()?;
    let k = composite_k(params, spec, temperature)?.k_per_ps();
    let sched = StirapSchedule::new(gate, params.v_max, t_ad_ps, fill)?;
    Ok(crate::functionals::delta_tr_path(&sched.path(), k).delta_tr())
}

/// Exact Haar average of a function of a logical state, used to check the
/// six-state design: ⟨f⟩ = ∫ f dμ, here by Gauss–Legendre in cos ϑ times a
/// uniform rule in the azimuth.
pub fn haar_average<F: Fn(C64, C64) -> f64>(f: F, n: usize) -> f64 {
    // Gauss–Legendre nodes by Newton iteration on P_n.
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    let m = 2 * n;
    let mut acc = 0.0;
    for &(z, w) in &nodes {
        let th = z.acos();
        for j in 0..m {
            let ph = 2.0 * PI * j as f64 / m as f64;
            let x = C64::new((th / 2.0).cos(), 0.0);
            let y = C64::from_polar((th / 2.0).sin(), ph);
            acc += w * f(x, y);
        }
    }
    acc / (2.0 * m as f64)
}

/// 2×2 matrix of the logical-pair block of a 4×4 operator.
pub fn logical_block(m: &Mat4) -> Matrix2<C64> {
    Matrix2::new(m[(1, 1)], m[(1, 2)], m[(2, 1)], m[(2, 2)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{delta_general, KernelMode};
    use crate::geometry::theta_m_for_time;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn short_loop(p: &PhysicalParams) -> LoopPath {
        C1Loop::for_solid_angle(PI / 2.0, 0.8, p.v_max).unwrap().to_path()
    }

    #[test]
    fn zero_noise_is_identity() {
        let p = PhysicalParams::reference();
        let b = BathSpec::reference();
        let rho = DensityMatrix::logical(C64::new(0.6, 0.0), C64::new(0.0, 0.8));
        let out = evolve_second_order(
            &short_loop(&p),
            NoiseOperator::Diagonal([0.0; 4]),
            &p,
            &b,
            0.01,
            &rho,
            OracleOptions { steps: 50, ..Default::default() },
        )
        .unwrap();
        assert_eq!(out, rho);
        let r = average_error_oracle(
            &short_loop(&p),
            NoiseOperator::Diagonal([0.0; 4]),
            &p,
            &b,
            0.01,
            OracleOptions { steps: 50, ..Default::default() },
        )
        .unwrap();
        assert!(r.delta.abs() < 1e-15);
    }

    #[test]
    fn trace_and_hermiticity_preserved() {
        let p = PhysicalParams::reference();
        let b = BathSpec::reference();
        let rho = DensityMatrix::logical(C64::new(0.6, 0.0), C64::new(0.0, 0.8));
        let out = evolve_second_order(
            &short_loop(&p),
            NoiseOperator::Dephase0,
            &p,
            &b,
            0.01,
            &rho,
            OracleOptions { steps: 80, ..Default::default() },
        )
        .unwrap();
        assert!((out.trace() - C64::new(1.0, 0.0)).norm() < 1e-9);
        assert!(out.hermiticity_defect() < 1e-12);
    }

    #[test]
    fn deviation_is_linear_in_coupling() {
        let p = PhysicalParams::reference();
        let b = BathSpec::reference();
        let rho = DensityMatrix::logical(C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        let opts = OracleOptions { steps: 60, ..Default::default() };
        let dev = |k: f64| {
            let out = evolve_second_order(&short_loop(&p), NoiseOperator::Dephase0, &p, &b.with_k(k), 0.01, &rho, opts)
                .unwrap();
            (out.0 - rho.0).norm()
        };
        let (d1, d2) = (dev(1e-3), dev(2e-3));
        assert!((d2 / d1 - 2.0).abs() < 0.02, "{}", d2 / d1);
        assert!(dev(1e-9) < 1e-5 * d1);
    }

    #[test]
    fn coarse_grid_rejected() {
        let p = PhysicalParams::reference();
        let b = BathSpec::reference();
        let th = theta_m_for_time(PI / 2.0, p.v_max, 500.0).unwrap();
        let long = C1Loop::for_solid_angle(PI / 2.0, th, p.v_max).unwrap().to_path();
        let r = average_error_oracle(
            &long,
            NoiseOperator::Dephase0,
            &p,
            &b,
            0.0,
            OracleOptions { steps: 4, ..Default::default() },
        );
        assert!(r.is_err());
    }

    #[test]
    fn design_matches_haar_on_quadratic_functionals() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            // Random rank-one projector P = |χ⟩⟨χ|, test ⟨ψ|P|ψ⟩².
            let chi = [
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            ];
            let nrm = (chi[0].norm_sqr() + chi[1].norm_sqr()).sqrt();
            let chi = [chi[0] / nrm, chi[1] / nrm];
            let f = |x: C64, y: C64| (chi[0].conj() * x + chi[1].conj() * y).norm_sqr().powi(2);
            let design: f64 = two_design().iter().map(|[x, y]| f(*x, *y)).sum::<f64>() / 6.0;
            let haar = haar_average(f, 24);
            assert!((design - haar).abs() < 1e-12, "{design} vs {haar}");
            assert!((haar - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn design_matches_monte_carlo() {
        let p = PhysicalParams::reference();
        let b = BathSpec::reference();
        let th = theta_m_for_time(PI / 2.0, p.v_max, 60.0).unwrap();
        let lp = C1Loop::for_solid_angle(PI / 2.0, th, p.v_max).unwrap().to_path();
        let map = LogicalMap::compute(&lp, NoiseOperator::Dephase0, &p, &b, 0.01, OracleOptions { steps: 100, ..Default::default() })
            .unwrap();
        let design: f64 = two_design().iter().map(|[x, y]| map.infidelity(*x, *y)).sum::<f64>() / 6.0;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let mut vals = Vec::with_capacity(n);
        for _ in 0..n {
            let v: [f64; 4] = std::array::from_fn(|_| {
                // Box–Muller normal deviates give a Haar-random state.
                let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
                let u2: f64 = rng.random_range(0.0..1.0);
                (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
            });
            let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            vals.push(map.infidelity(C64::new(v[0] / nrm, v[1] / nrm), C64::new(v[2] / nrm, v[3] / nrm)));
        }
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - design).abs() < 3.0 * se + 1e-18, "{mean} vs {design} (se {se})");
    }

    #[test]
    fn oracle_agrees_with_general_functional_on_transitions() {
        // Bright channels only: noise acting on |G⟩ couples ψ₀ to nothing
        // dark, so the comparison isolates the transition kernel.
        let p = PhysicalParams::reference();
        let b = BathSpec::reference();
        let th = theta_m_for_time(PI / 2.0, p.v_max, 120.0).unwrap();
        let lp = C1Loop::for_solid_angle(PI / 2.0, th, p.v_max).unwrap().to_path();
        let o = average_error_oracle(&lp, NoiseOperator::Dephase0, &p, &b, 0.0, OracleOptions { steps: 300, ..Default::default() })
            .unwrap();
        let g = delta_general(&lp, NoiseOperator::Dephase0, &p, &b, 0.0, 300, KernelMode::Full).unwrap();
        assert!((o.delta - g.total).abs() < 0.1 * g.total, "{} vs {}", o.delta, g.total);
    }

    #[test]
    fn stirap_examples() {
        let p = PhysicalParams::reference();
        let b = BathSpec::reference();
        let k = composite_k(&p, &b, 0.0).unwrap().k_per_ps();
        let g = GateSpec::not();
        let t_min = 2.0 * PI / p.v_max;
        let d = stirap_error(&g, &p, &b, 0.0, t_min, StirapFill::SlowMeridian).unwrap();
        assert!((d - k * PI / p.v_max).abs() < 1e-12 * d);
        let d2 = stirap_error(&g, &p, &b, 0.0, 2.0 * t_min, StirapFill::SlowMeridian).unwrap();
        assert!((d2 / d - 2.0).abs() < 1e-12);
        let hold = stirap_error(&g, &p, &b, 0.0, 2.0 * t_min, StirapFill::HoldAtPole).unwrap();
        assert!((hold - d).abs() < 1e-12 * d);
        assert!(stirap_error(&g, &p, &b, 0.0, 0.5 * t_min, StirapFill::SlowMeridian).is_err());
        let s = StirapSchedule::new(&g, p.v_max, t_min, StirapFill::SlowMeridian).unwrap();
        assert!((s.path().max_theta() - PI).abs() < 1e-12);
        assert!((s.c1.solid_angle() - g.solid_angle).abs() < 1e-12);
    }
}
