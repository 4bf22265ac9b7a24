//! Shared BAOAB Langevin integrator used by both the all-atom oracle and
//! the CG simulator.
//!
//! One step is B·A·O·A·B with half-kicks B, half-drifts A, and the exact
//! Ornstein–Uhlenbeck velocity update O:
//!   v ← c₁v + c₂·√(k_BT/m)·ξ,  c₁ = exp(−γδt),  c₂ = √(1 − c₁²).
//! γ = 0 degenerates to velocity Verlet (c₁ = 1, no noise), which the
//! energy-drift tests rely on.

use crate::constants::KB;
use crate::error::Result;
use crate::mathcore::geometry::Vec3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Mutable integration state; `forces` and `potential_energy` always
/// correspond to `coords`.
#[derive(Debug, Clone)]
pub(crate) struct LangevinState {
    pub coords: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub forces: Vec<Vec3>,
    pub potential_energy: f64,
}

impl LangevinState {
    /// Initialize from coordinates with Maxwell–Boltzmann velocities; the
    /// force closure fills in the starting forces.
    pub fn new<F>(
        coords: Vec<Vec3>,
        masses: &[f64],
        temperature: f64,
        rng: &mut ChaCha8Rng,
        force: &mut F,
    ) -> Result<Self>
    where
        F: FnMut(&[Vec3]) -> Result<(f64, Vec<Vec3>)>,
    {
        let velocities = maxwell_boltzmann_velocities(masses, temperature, rng);
        let (potential_energy, forces) = force(&coords)?;
        Ok(LangevinState {
            coords,
            velocities,
            forces,
            potential_energy,
        })
    }
}

/// Draw per-atom velocities from the Maxwell–Boltzmann distribution at
/// `temperature` (one Gaussian per component, in atom order).
pub(crate) fn maxwell_boltzmann_velocities(
    masses: &[f64],
    temperature: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec3> {
    masses
        .iter()
        .map(|&m| {
            let s = (KB * temperature / m).sqrt();
            let mut v = [0.0; 3];
            for x in &mut v {
                let xi: f64 = rng.sample(StandardNormal);
                *x = s * xi;
            }
            v
        })
        .collect()
}

/// ½ Σ m v² in kJ·mol⁻¹.
pub(crate) fn kinetic_energy(velocities: &[Vec3], masses: &[f64]) -> f64 {
    velocities
        .iter()
        .zip(masses.iter())
        .map(|(v, &m)| 0.5 * m * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]))
        .sum()
}

/// Instantaneous kinetic temperature over 3N degrees of freedom.
pub(crate) fn kinetic_temperature(velocities: &[Vec3], masses: &[f64]) -> f64 {
    let dof = 3.0 * masses.len() as f64;
    2.0 * kinetic_energy(velocities, masses) / (dof * KB)
}

/// Advance one BAOAB step in place. The force closure is called once, after
/// the second drift.
pub(crate) fn baoab_step<F>(
    state: &mut LangevinState,
    masses: &[f64],
    dt: f64,
    gamma: f64,
    temperature: f64,
    rng: &mut ChaCha8Rng,
    force: &mut F,
) -> Result<()>
where
    F: FnMut(&[Vec3]) -> Result<(f64, Vec<Vec3>)>,
{
    let n = masses.len();
    let half = 0.5 * dt;
    let c1 = (-gamma * dt).exp();
    let c2 = (1.0 - c1 * c1).max(0.0).sqrt();

    for i in 0..n {
        let inv_m = 1.0 / masses[i];
        for a in 0..3 {
            state.velocities[i][a] += half * state.forces[i][a] * inv_m;
            state.coords[i][a] += half * state.velocities[i][a];
        }
    }
    if gamma > 0.0 {
        for i in 0..n {
            let s = (KB * temperature / masses[i]).sqrt();
            for a in 0..3 {
                let xi: f64 = rng.sample(StandardNormal);
                state.velocities[i][a] = c1 * state.velocities[i][a] + c2 * s * xi;
            }
        }
    }
    for i in 0..n {
        for a in 0..3 {
            state.coords[i][a] += half * state.velocities[i][a];
        }
    }
    let (e, f) = force(&state.coords)?;
    state.potential_energy = e;
    state.forces = f;
    for i in 0..n {
        let inv_m = 1.0 / masses[i];
        for a in 0..3 {
            state.velocities[i][a] += half * state.forces[i][a] * inv_m;
        }
    }
    Ok(())
}
