//! Four-level driven Hamiltonian, its bright/dark eigensystem and the
//! holonomy generated inside the dark subspace.
//!
//! Basis order is (|G⟩, |+⟩, |−⟩, |0⟩). The e^{−iεt} drive phase is removed,
//! leaving a real symmetric matrix diag(0, ε, ε, ε) plus real couplings
//! between |G⟩ and the three excited states.

use nalgebra::{Matrix2, Matrix4, SymmetricEigen, Vector3, Vector4};
use num_complex::Complex64;

use crate::geometry::LoopPath;
use crate::model::{bright_energies, PhysicalParams};
use crate::{Error, Result};

pub type C64 = Complex64;
pub type Mat4 = Matrix4<C64>;
pub type Vec4 = Vector4<C64>;
pub type Mat2 = Matrix2<C64>;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Ω·(sinθ cosφ, sinθ sinφ, cosθ).
pub fn rabi_vector(theta: f64, phi: f64, omega: f64) -> [f64; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [omega * st * cp, omega * st * sp, omega * ct]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian4 {
    pub matrix: Mat4,
    pub t: f64,
}

impl Hamiltonian4 {
    pub fn is_hermitian(&self, tol: f64) -> bool {
        (self.matrix - self.matrix.adjoint()).norm() <= tol
    }
}

/// H(θ, φ) with energies in meV.
pub fn build_hamiltonian(theta: f64, phi: f64, params: &PhysicalParams) -> Hamiltonian4 {
    hamiltonian_from(theta, phi, params.epsilon, params.omega)
}

pub fn hamiltonian_from(theta: f64, phi: f64, epsilon: f64, omega: f64) -> Hamiltonian4 {
    let r = rabi_vector(theta, phi, omega);
    let mut m = Mat4::zeros();
    for j in 0..3 {
        m[(j + 1, j + 1)] = c(epsilon);
        m[(0, j + 1)] = c(r[j]);
        m[(j + 1, 0)] = c(r[j]);
    }
    Hamiltonian4 { matrix: m, t: 0.0 }
}

/// Eigenvalues and eigenvectors, ordered (bright +, bright −, dark 1,
/// dark 2).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub eigenvalues: [f64; 4],
    pub vectors: [Vec4; 4],
    pub t: f64,
}

impl EigenSystem {
    pub fn dark(&self) -> [Vec4; 2] {
        [self.vectors[2], self.vectors[3]]
    }

    pub fn bright(&self) -> [Vec4; 2] {
        [self.vectors[0], self.vectors[1]]
    }

    /// Columns are the eigenvectors in stored order.
    pub fn basis(&self) -> Mat4 {
        Mat4::from_columns(&self.vectors)
    }

    /// max ‖H v − λ v‖ over the four pairs.
    pub fn residual(&self, h: &Hamiltonian4) -> f64 {
        self.vectors
            .iter()
            .zip(self.eigenvalues)
            .map(|(v, l)| (h.matrix * v - v * c(l)).norm())
            .fold(0.0, f64::max)
    }
}

fn unit_dirs(theta: f64, phi: f64) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let n = Vector3::new(st * cp, st * sp, ct);
    let e_theta = Vector3::new(ct * cp, ct * sp, -st);
    let minus_e_phi = Vector3::new(sp, -cp, 0.0);
    (n, e_theta, minus_e_phi)
}

fn embed(g: f64, v: &Vector3<f64>) -> Vec4 {
    Vec4::new(c(g), c(v[0]), c(v[1]), c(v[2]))
}

/// Dark pair (θ̂, −φ̂) embedded in the excited manifold. At the north pole
/// with φ = 0 this is (|+⟩, −|−⟩). In this gauge ⟨E_i|∂_t E_j⟩ = iσ_y cosθ φ̇.
pub fn dark_frame(theta: f64, phi: f64) -> [Vec4; 2] {
    let (_, et, mp) = unit_dirs(theta, phi);
    [embed(0.0, &et), embed(0.0, &mp)]
}

/// Closed-form eigensystem. Bright states are (Ω, λ n̂)/√(Ω² + λ²).
pub fn eigensystem(theta: f64, phi: f64, params: &PhysicalParams) -> EigenSystem {
    let (eps, om) = (params.epsilon, params.omega);
    let (lp, lm) = bright_energies(eps, om);
    let (n, _, _) = unit_dirs(theta, phi);
    let bright = |l: f64| {
        let norm = (om * om + l * l).sqrt();
        embed(om / norm, &(n * (l / norm)))
    };
    let [d1, d2] = dark_frame(theta, phi);
    EigenSystem {
        eigenvalues: [lp, lm, eps, eps],
        vectors: [bright(lp), bright(lm), d1, d2],
        t: 0.0,
    }
}

/// Eigensystem of an arbitrary Hermitian H by direct diagonalization. The
/// two vectors with the smallest |G⟩ weight are returned as the dark pair;
/// the rest are ordered by decreasing eigenvalue.
pub fn numeric_eigensystem(h: &Hamiltonian4) -> EigenSystem {
    let eig = SymmetricEigen::new(h.matrix);
    let mut idx: Vec<usize> = (0..4).collect();
    idx.sort_by(|&i, &j| {
        eig.eigenvectors[(0, i)]
            .norm()
            .total_cmp(&eig.eigenvectors[(0, j)].norm())
    });
    let (mut bright, dark) = (vec![idx[2], idx[3]], [idx[0], idx[1]]);
    bright.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let order = [bright[0], bright[1], dark[0], dark[1]];
    EigenSystem {
        eigenvalues: order.map(|i| eig.eigenvalues[i]),
        vectors: order.map(|i| eig.eigenvectors.column(i).into_owned()),
        t: h.t,
    }
}

/// Rotates `current` within its span so that it overlaps maximally with
/// `previous` (Löwdin alignment of the 2×2 overlap). Applied step by step
/// along a path this is discrete parallel transport.
pub fn align_pair(previous: &[Vec4; 2], current: &[Vec4; 2]) -> [Vec4; 2] {
    let mut m = Mat2::zeros();
    for i in 0..2 {
        for j in 0..2 {
            m[(i, j)] = current[i].dotc(&previous[j]);
        }
    }
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let r = u * vt;
    let mut out = [Vec4::zeros(), Vec4::zeros()];
    for (j, o) in out.iter_mut().enumerate() {
        *o = current[0] * r[(0, j)] + current[1] * r[(1, j)];
    }
    out
}

/// Rotation cos α·𝟙 − i sin α·σ_y acting on the logical pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolonomyOp {
    pub angle: f64,
}

impl HolonomyOp {
    pub fn matrix(&self) -> Mat2 {
        let (s, co) = self.angle.sin_cos();
        Mat2::new(c(co), c(-s), c(s), c(co))
    }

    pub fn determinant(&self) -> C64 {
        self.matrix().determinant()
    }

    /// Angle of a 2×2 matrix of the form cos α − i sin α σ_y.
    pub fn from_matrix(m: &Mat2) -> Self {
        Self { angle: m[(1, 0)].re.atan2(m[(0, 0)].re) }
    }
}

pub fn sigma_y() -> Mat2 {
    Mat2::new(c(0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), c(0.0))
}

pub fn holonomy_closed_form(angle: f64) -> HolonomyOp {
    HolonomyOp { angle }
}

/// V(t) = iσ_y cosθ φ̇.
pub fn connection(theta: f64, phi_dot: f64) -> Mat2 {
    sigma_y() * C64::new(0.0, theta.cos() * phi_dot)
}

/// Path-ordered product of exp(−V Δt) with V taken at each step midpoint,
/// on the boundary-respecting grid of [`LoopPath::discretize`]. Returns the
/// operator together with its unitarity defect ‖U†U − 𝟙‖.
pub fn holonomy_numeric(path: &LoopPath, n_steps: usize) -> Result<(HolonomyOp, f64)> {
    let first = path.segments().first().map(|s| s.start.theta).unwrap_or(1.0);
    if first.abs() > 1e-9 {
        return Err(Error::NotClosed("path does not start at the pole".into()));
    }
    let samples = path.discretize(n_steps + 1)?;
    let mut u = Mat2::identity();
    for w in samples.windows(2) {
        let dt = w[1].t - w[0].t;
        if dt <= 0.0 {
            continue;
        }
        let s = path.state_at(0.5 * (w[0].t + w[1].t))?;
        let step = (connection(s.theta, s.phi_dot) * c(-dt)).exp();
        u = step * u;
    }
    let defect = (u.adjoint() * u - Mat2::identity()).norm();
    Ok((HolonomyOp::from_matrix(&u), defect))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{C1Loop, LoopPath, Segment};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn params(eps: f64, om: f64) -> PhysicalParams {
        PhysicalParams { epsilon: eps, omega: om, v_max: 0.1, temperature: 0.0 }
    }

    #[test]
    fn rabi_vector_examples() {
        let r = rabi_vector(0.0, 1.234, 3.0);
        assert!(r[0].abs() < 1e-15 && r[1].abs() < 1e-15 && (r[2] - 3.0).abs() < 1e-15);
        let r = rabi_vector(PI / 2.0, 0.0, 2.0);
        assert!((r[0] - 2.0).abs() < 1e-15 && r[1].abs() < 1e-15 && r[2].abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let r = rabi_vector(rng.random_range(0.0..PI), rng.random_range(0.0..6.3), 7.0);
            let n = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
            assert!((n - 7.0).abs() < 1e-13);
        }
    }

    #[test]
    fn hamiltonian_spectrum_examples() {
        let h = hamiltonian_from(0.0, 0.0, 2.0, 1.0);
        assert!(h.is_hermitian(1e-14));
        let e = numeric_eigensystem(&h);
        assert!((e.eigenvalues[0] - (2.0 + 8f64.sqrt()) / 2.0).abs() < 1e-12);
        assert!((e.eigenvalues[1] - (2.0 - 8f64.sqrt()) / 2.0).abs() < 1e-12);
        assert!((e.eigenvalues[0] - 2.4142).abs() < 1e-4);
        assert!((e.eigenvalues[1] + 0.4142).abs() < 1e-4);
        let h = hamiltonian_from(0.4, 0.1, 5.0, 0.0);
        let mut ev = numeric_eigensystem(&h).eigenvalues;
        ev.sort_by(f64::total_cmp);
        assert!(ev[0].abs() < 1e-14 && ev[1..].iter().all(|x| (x - 5.0).abs() < 1e-14));
    }

    #[test]
    fn closed_form_eigensystem_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let (th, ph) = (rng.random_range(0.0..PI), rng.random_range(-7.0..7.0));
            let p = params(rng.random_range(0.1..2000.0), rng.random_range(0.01..50.0));
            let h = build_hamiltonian(th, ph, &p);
            let es = eigensystem(th, ph, &p);
            let scale = h.matrix.norm();
            assert!(es.residual(&h) < 1e-10 * scale);
            let b = es.basis();
            assert!((b.adjoint() * b - Mat4::identity()).norm() < 1e-12);
            for d in es.dark() {
                assert!(d[0].norm() < 1e-15);
            }
            let num = numeric_eigensystem(&h);
            assert!(num.residual(&h) < 1e-10 * scale);
            for k in 0..2 {
                // Direct diagonalization is accurate relative to ‖H‖, not to
                // the (possibly tiny) λ−.
                let rel = (num.eigenvalues[k] - es.eigenvalues[k]).abs() / scale;
                assert!(rel < 1e-10, "{k}: {} vs {}", num.eigenvalues[k], es.eigenvalues[k]);
            }
        }
    }

    #[test]
    fn dark_frame_at_pole() {
        let [a, b] = dark_frame(0.0, 0.0);
        assert!((a - Vec4::new(c(0.0), c(1.0), c(0.0), c(0.0))).norm() < 1e-15);
        assert!((b - Vec4::new(c(0.0), c(0.0), c(-1.0), c(0.0))).norm() < 1e-15);
    }

    #[test]
    fn connection_by_finite_differences() {
        // θ(t) = 0.7 + 0.3 t, φ(t) = 0.2 + 1.1 t, at t = 0.4.
        let (th0, thd, ph0, phd) = (0.7, 0.3, 0.2, 1.1);
        let t = 0.4;
        let h = 1e-5;
        let frame = |t: f64| dark_frame(th0 + thd * t, ph0 + phd * t);
        let (e, ep, em) = (frame(t), frame(t + h), frame(t - h));
        let mut v = Mat2::zeros();
        for i in 0..2 {
            for j in 0..2 {
                let d = (ep[j] - em[j]) / c(2.0 * h);
                v[(i, j)] = e[i].dotc(&d);
            }
        }
        let expect = connection(th0 + thd * t, phd);
        assert!((v - expect).norm() < 1e-6, "{v} vs {expect}");
    }

    #[test]
    fn closed_form_gates() {
        let id = holonomy_closed_form(0.0).matrix();
        assert!((id - Mat2::identity()).norm() < 1e-15);
        let not = holonomy_closed_form(PI / 2.0).matrix();
        assert!((not - sigma_y() * C64::new(0.0, -1.0)).norm() < 1e-15);
        let had = holonomy_closed_form(PI / 4.0).matrix();
        for x in had.iter() {
            assert!((x.norm() - 0.5f64.sqrt()).abs() < 1e-15);
        }
        assert!((holonomy_closed_form(1.3).determinant() - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn numeric_holonomy_examples() {
        let out_back = LoopPath::new(vec![
            Segment::meridian(0.3, 0.0, 1.0, 0.5),
            Segment::meridian(0.3, 1.0, 0.0, 0.5),
        ])
        .unwrap();
        let (u, defect) = holonomy_numeric(&out_back, 100).unwrap();
        assert!(u.angle.abs() < 1e-15 && defect < 1e-12);

        let l = C1Loop::new(PI / 3.0, PI, 0.1).unwrap().to_path();
        let (u, defect) = holonomy_numeric(&l, 100_000).unwrap();
        let target = sigma_y() * C64::new(0.0, -1.0);
        assert!((u.matrix() - target).norm() < 1e-8);
        assert!(defect < 1e-10);
    }

    #[test]
    fn numeric_holonomy_converges() {
        let l = C1Loop::for_solid_angle(PI / 4.0, 0.9, 0.3).unwrap().to_path();
        let exact = l.raw_holonomy_angle();
        let errs: Vec<f64> = [20usize, 40, 80]
            .iter()
            .map(|&n| (holonomy_numeric(&l, n).unwrap().0.angle - exact).abs())
            .collect();
        // Error at least second order in the step (here it is at round-off).
        for (k, e) in errs.iter().enumerate() {
            let h = 1.0 / [20.0, 40.0, 80.0][k];
            assert!(*e < 1e-2 * h * h + 1e-13, "{errs:?}");
        }
    }

    #[test]
    fn alignment_is_transport() {
        let prev = dark_frame(0.5, 0.2);
        let cur = dark_frame(0.5, 0.2001);
        // Scramble the current pair by a rotation and a phase.
        let (s, co) = 0.8f64.sin_cos();
        let ph = C64::from_polar(1.0, 0.3);
        let scrambled = [
            (cur[0] * c(co) + cur[1] * c(s)) * ph,
            (cur[1] * c(co) - cur[0] * c(s)) * ph,
        ];
        let a = align_pair(&prev, &scrambled);
        for j in 0..2 {
            assert!((a[j] - prev[j]).norm() < 1e-3);
            assert!((a[j].norm() - 1.0).abs() < 1e-12);
        }
        assert!(a[0].dotc(&a[1]).norm() < 1e-12);
    }
}
