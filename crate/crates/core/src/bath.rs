//! Bosonic bath: spectral density, correlation function, memory kernel,
//! golden-rule rates and the composite transition constant K.
//!
//! Energies and frequencies are in meV (ħ = 1 inside the integrals). Public
//! time arguments are in ps and converted with [`HBAR_MEV_PS`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::{bright_energies, PhysicalParams, HBAR_MEV_PS};
use crate::quad::{integrate_with_breaks, QuadOptions};
use crate::{Error, Result};

/// Upper frequency limit, in units of the cutoff, of every bath integral.
pub const CUTOFF_SPAN: f64 = 8.0;

/// J(ω) = k ω^s exp[−(ω/ω_c)²].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    pub s: f64,
    /// meV^(1−s).
    pub k: f64,
    /// meV.
    pub omega_c: f64,
}

impl BathSpec {
    /// s = 3, k = 1e-2 meV⁻², ω_c = 0.5 meV.
    pub fn reference() -> Self {
        Self { s: 3.0, k: 1e-2, omega_c: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s >= 0.0 && self.s.is_finite()) {
            return Err(Error::InvalidParameter(format!("bath exponent s = {} must be >= 0", self.s)));
        }
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidParameter(format!("bath coupling k = {} must be >= 0", self.k)));
        }
        if !(self.omega_c > 0.0 && self.omega_c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "cutoff omega_c = {} must be > 0",
                self.omega_c
            )));
        }
        Ok(())
    }

    pub fn with_k(&self, k: f64) -> Self {
        Self { k, ..*self }
    }

    /// J(ω) for ω ≥ 0 without argument checks.
    pub fn j(&self, w: f64) -> f64 {
        if w == 0.0 {
            return if self.s == 0.0 { self.k } else { 0.0 };
        }
        let x = w / self.omega_c;
        self.k * w.powf(self.s) * (-x * x).exp()
    }

    /// J(ω) coth(ω/2T), with the ω → 0 limit taken analytically and
    /// coth ≡ 1 at T = 0.
    pub fn j_coth(&self, w: f64, temperature: f64) -> f64 {
        if temperature <= 0.0 {
            return self.j(w);
        }
        let x = w / (2.0 * temperature);
        if w == 0.0 {
            // k ω^s · 2T/ω → 2kT for s = 1, zero above.
            return if self.s == 1.0 {
                2.0 * self.k * temperature
            } else if self.s > 1.0 {
                0.0
            } else {
                f64::INFINITY
            };
        }
        if x < 1e-6 {
            self.j(w) * (1.0 / x + x / 3.0)
        } else {
            self.j(w) / x.tanh()
        }
    }

    fn quad_options(&self) -> QuadOptions {
        let scale = self.k * self.omega_c.powf(self.s + 1.0);
        QuadOptions { abs_tol: 1e-15 * scale.max(1e-300), rel_tol: 1e-9, max_panels: 20_000 }
    }

    fn upper(&self) -> f64 {
        CUTOFF_SPAN * self.omega_c
    }

    fn infrared_check(&self, temperature: f64) -> Result<()> {
        if self.s < 1.0 && temperature > 0.0 {
            return Err(Error::InvalidParameter(format!(
                "s = {} < 1 at T > 0: the real part of the correlation diverges",
                self.s
            )));
        }
        Ok(())
    }
}

/// coth(ω/2T) with coth ≡ 1 at T = 0.
pub fn thermal_factor(w: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        1.0
    } else {
        1.0 / (w / (2.0 * temperature)).tanh()
    }
}

pub fn spectral_density(w: f64, spec: &BathSpec) -> Result<f64> {
    if !(w >= 0.0) {
        return Err(Error::InvalidParameter(format!("spectral density needs ω >= 0, got {w}")));
    }
    Ok(spec.j(w))
}

/// sin(x t)/x with its x → 0 limit.
pub(crate) fn sin_over(x: f64, t: f64) -> f64 {
    if (x * t).abs() < 1e-8 {
        t * (1.0 - (x * t).powi(2) / 6.0)
    } else {
        (x * t).sin() / x
    }
}

/// (1 − cos x t)/x with its x → 0 limit.
pub(crate) fn one_minus_cos_over(x: f64, t: f64) -> f64 {
    let h = 0.5 * x * t;
    if h.abs() < 1e-8 {
        x * t * t / 2.0
    } else {
        2.0 * h.sin().powi(2) / x
    }
}

/// g(τ) = ∫ dω J(ω)[coth(ω/2T) cos ωτ − i sin ωτ], τ in ps.
pub fn correlation(tau_ps: f64, spec: &BathSpec, temperature: f64) -> Result<Complex64> {
    spec.validate()?;
    spec.infrared_check(temperature)?;
    let tau = tau_ps / HBAR_MEV_PS;
    let r = integrate_with_breaks(
        |w: f64| {
            let (s, c) = (w * tau).sin_cos();
            Complex64::new(spec.j_coth(w, temperature) * c, -spec.j(w) * s)
        },
        0.0,
        spec.upper(),
        &[spec.omega_c],
        spec.quad_options(),
    )?;
    Ok(r.value)
}

/// G(t) = ∫₀ᵗ dτ [Re g(τ) cos ω₀ₙτ + Im g(τ) sin ω₀ₙτ], t in ps, ω₀ₙ in meV.
///
/// Evaluated with the τ integral done first, which leaves
/// ½∫dω J[(coth − 1) sin((ω−ω₀ₙ)t)/(ω−ω₀ₙ) + (coth + 1) sin((ω+ω₀ₙ)t)/(ω+ω₀ₙ)].
pub fn kernel_g(t_ps: f64, omega_0n: f64, spec: &BathSpec, temperature: f64) -> Result<f64> {
    if !(t_ps >= 0.0) {
        return Err(Error::InvalidParameter(format!("kernel time must be >= 0, got {t_ps}")));
    }
    spec.validate()?;
    spec.infrared_check(temperature)?;
    if t_ps == 0.0 {
        return Ok(0.0);
    }
    let t = t_ps / HBAR_MEV_PS;
    let w0 = omega_0n;
    let mut breaks = vec![spec.omega_c, w0.abs()];
    // Resolve the sinc peak of width ~1/t around |ω₀ₙ|.
    for k in 1..=4 {
        let d = k as f64 * std::f64::consts::PI / t;
        breaks.push(w0.abs() - d);
        breaks.push(w0.abs() + d);
    }
    let r = integrate_with_breaks(
        |w: f64| {
            let jc = spec.j_coth(w, temperature);
            let j = spec.j(w);
            0.5 * ((jc - j) * sin_over(w - w0, t) + (jc + j) * sin_over(w + w0, t))
        },
        0.0,
        spec.upper(),
        &breaks,
        spec.quad_options(),
    )?;
    Ok(r.value)
}

/// The t → ∞ limit of [`kernel_g`]: (π/2) J(|ω|)[coth(|ω|/2T) − sgn ω].
pub fn kernel_g_limit(omega_0n: f64, spec: &BathSpec, temperature: f64) -> f64 {
    if omega_0n == 0.0 {
        return std::f64::consts::FRAC_PI_2 * spec.j_coth(0.0, temperature);
    }
    let w = omega_0n.abs();
    std::f64::consts::FRAC_PI_2 * spec.j(w) * (thermal_factor(w, temperature) - omega_0n.signum())
}

/// Γ(ω) = J(|ω|)[coth(|ω|/2T) − sgn ω].
pub fn golden_rule_rate(omega_0n: f64, spec: &BathSpec, temperature: f64) -> Result<f64> {
    if omega_0n == 0.0 || !omega_0n.is_finite() {
        return Err(Error::InvalidParameter(
            "golden-rule rate needs a non-zero transition energy".into(),
        ));
    }
    let w = omega_0n.abs();
    let c = thermal_factor(w, temperature);
    // coth − 1 = 2/(e^{ω/T} − 1) avoids cancellation for ω ≫ T.
    let factor = if omega_0n > 0.0 {
        if temperature > 0.0 {
            2.0 / (w / temperature).exp_m1()
        } else {
            0.0
        }
    } else {
        c + 1.0
    };
    Ok(spec.j(w) * factor)
}

/// Transition energies and rates entering K.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    /// ω₀₁ = ε − λ₊, ω₀₂ = ε − λ₋, ω₀₃ = 0 (meV).
    pub omega_0n: [f64; 3],
    pub gamma_01: f64,
    pub gamma_02: f64,
    /// K in meV.
    pub k: f64,
    /// The two weights 1/(8√(1 + ((λₙ − ε)/Ω)²)).
    pub weights: [f64; 2],
}

impl RateTable {
    /// K/ħ in 1/ps, the form used with v in rad/ps.
    pub fn k_per_ps(&self) -> f64 {
        self.k / HBAR_MEV_PS
    }
}

/// K = Σₙ Γ₀ₙ / (8√(1 + ((λₙ − ε)/Ω)²)) over the two bright levels.
pub fn composite_k(params: &PhysicalParams, spec: &BathSpec, temperature: f64) -> Result<RateTable> {
    spec.validate()?;
    let (eps, om) = (params.epsilon, params.omega);
    if !(om > 0.0) {
        return Err(Error::InvalidParameter("composite K needs Ω > 0".into()));
    }
    let (lp, lm) = bright_energies(eps, om);
    let w01 = eps - lp;
    let w02 = eps - lm;
    let weight = |l: f64| {
        let x = (l - eps) / om;
        1.0 / (8.0 * (1.0 + x * x).sqrt())
    };
    // A channel closed by round-off (Ω ≪ ε) carries J(0) = 0 for s > 0.
    let rate = |w: f64| {
        if w == 0.0 && spec.s > 0.0 {
            Ok(0.0)
        } else {
            golden_rule_rate(w, spec, temperature)
        }
    };
    let g01 = rate(w01)?;
    let g02 = rate(w02)?;
    let weights = [weight(lp), weight(lm)];
    Ok(RateTable {
        omega_0n: [w01, w02, 0.0],
        gamma_01: g01,
        gamma_02: g02,
        k: g01 * weights[0] + g02 * weights[1],
        weights,
    })
}

/// S(t) = ∫ dω (J(ω)/ω) coth(ω/2T) sin ωt, t in ps; the inner kernel of
/// the pure-dephasing integrals.
pub fn dephasing_kernel(t_ps: f64, spec: &BathSpec, temperature: f64) -> Result<f64> {
    spec.validate()?;
    let t = t_ps / HBAR_MEV_PS;
    let r = integrate_with_breaks(
        |w: f64| {
            if w == 0.0 {
                spec.j_coth(0.0, temperature) * t
            } else {
                spec.j_coth(w, temperature) * sin_over(w, t)
            }
        },
        0.0,
        spec.upper(),
        &[spec.omega_c],
        spec.quad_options(),
    )?;
    Ok(r.value)
}

/// ∫₀ᴸ dτ C(τ) e^{iωτ} with C(τ) = g(τ)/π, L in natural units (ħ/meV).
///
/// Done in frequency space:
/// (1/2π) ∫dω' J[(coth − 1) E(ω + ω') + (coth + 1) E(ω − ω')] with
/// E(x) = (e^{ixL} − 1)/(ix).
pub fn memory_transform(omega: f64, l_nat: f64, spec: &BathSpec, temperature: f64) -> Result<Complex64> {
    if l_nat <= 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let e = |x: f64| Complex64::new(sin_over(x, l_nat), one_minus_cos_over(x, l_nat));
    let mut breaks = vec![spec.omega_c, omega.abs()];
    for k in 1..=4 {
        let d = k as f64 * std::f64::consts::PI / l_nat;
        breaks.push(omega.abs() - d);
        breaks.push(omega.abs() + d);
    }
    let r = integrate_with_breaks(
        |w: f64| {
            let jc = spec.j_coth(w, temperature);
            let j = spec.j(w);
            e(omega + w) * (jc - j) + e(omega - w) * (jc + j)
        },
        0.0,
        spec.upper(),
        &breaks,
        spec.quad_options(),
    )?;
    Ok(r.value * (0.5 / std::f64::consts::PI))
}
