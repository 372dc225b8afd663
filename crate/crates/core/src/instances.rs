//! Random and reference problem instances for oracle checks.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::fock::FockState;
use crate::interferometer::{Component, ModeUnitary, ParamCircuit};

/// Haar-random unitary via QR of a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(modes: usize, rng: &mut R) -> ModeUnitary {
    let g = random_complex_matrix(modes, modes, rng);
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..modes {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        q.column_mut(j).iter_mut().for_each(|z| *z *= phase);
    }
    ModeUnitary::new(q).expect("QR factor is unitary")
}

/// Entries with independent standard normal real and imaginary parts.
pub fn random_complex_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<Complex64> {
    let a = random_complex_matrix(dim, dim, rng);
    (&a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Random circuit with up to `max_components` components and at least one
/// parameter. Some parameters tag more than one phase shifter.
pub fn random_circuit<R: Rng + ?Sized>(modes: usize, max_components: usize, rng: &mut R) -> (ParamCircuit, Vec<f64>) {
    let count = rng.random_range(1..=max_components.max(1));
    let mut components = Vec::with_capacity(count);
    let mut names: Vec<String> = Vec::new();
    let pair = |rng: &mut R| {
        let j = rng.random_range(0..modes);
        let mut k = rng.random_range(0..modes - 1);
        if k >= j {
            k += 1;
        }
        (j, k)
    };
    for _ in 0..count {
        let roll: f64 = rng.random();
        let component = if modes < 2 || roll < 0.45 {
            let mode = rng.random_range(0..modes);
            if !names.is_empty() && rng.random_bool(0.15) {
                let reuse = names[rng.random_range(0..names.len())].clone();
                Component::ps(mode, reuse)
            } else {
                let name = format!("theta_{}", names.len());
                names.push(name.clone());
                Component::ps(mode, name)
            }
        } else if roll < 0.55 {
            Component::ps_fixed(rng.random_range(0..modes), rng.random_range(0.0..std::f64::consts::TAU))
        } else if roll < 0.92 || modes < 3 {
            let (j, k) = pair(rng);
            Component::bs(j, k, rng.random_range(0.0..std::f64::consts::PI))
        } else {
            let size = rng.random_range(2..=modes.min(3));
            let mut sub: Vec<usize> = (0..modes).collect();
            for i in 0..size {
                let swap = rng.random_range(i..modes);
                sub.swap(i, swap);
            }
            sub.truncate(size);
            Component::Unitary {
                modes: sub,
                matrix: random_unitary(size, rng).matrix().clone(),
            }
        };
        components.push(component);
    }
    if names.is_empty() {
        components.push(Component::ps(rng.random_range(0..modes), "theta_0"));
    }
    let circuit = ParamCircuit::new(modes, components).expect("generated circuit is valid");
    let theta = (0..circuit.num_parameters())
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    (circuit, theta)
}

/// Random `n`-photon input on `m` modes.
pub fn random_input<R: Rng + ?Sized>(photons: usize, modes: usize, rng: &mut R) -> FockState {
    let mut occ = vec![0; modes];
    for _ in 0..photons {
        occ[rng.random_range(0..modes)] += 1;
    }
    FockState::new(occ)
}

/// Random probability vector with every entry strictly positive.
pub fn random_distribution<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Six modes, two photons: the shifter `phi` lies in the forward cone of
/// the photon entering on mode 0 only, so its shift rule needs two terms
/// rather than four. Later couplers connect everything.
pub fn causal_cone_example() -> (ParamCircuit, FockState) {
    use Component as C;
    let components = vec![
        C::bs50(0, 1),
        C::bs50(2, 3),
        C::bs50(4, 5),
        C::ps(1, "a"),
        C::ps(5, "b"),
        C::bs50(1, 2),
        C::ps(2, "phi"),
        C::bs50(3, 4),
        C::ps(3, "c"),
        C::bs50(0, 1),
        C::bs50(2, 3),
        C::bs50(4, 5),
        C::ps(4, "d"),
        C::bs50(1, 2),
        C::bs50(3, 4),
    ];
    let circuit = ParamCircuit::new(6, components).expect("valid example");
    (circuit, FockState::new(vec![1, 0, 0, 0, 1, 0]))
}
