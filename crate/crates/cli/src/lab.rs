//! Conversion from Fermi units to laboratory units.

use std::f64::consts::PI;

use crate::config::LabBlock;

const HBAR: f64 = 1.054_571_817e-34;
const AMU: f64 = 1.660_539_066_60e-27;

/// Fermi scales of a two-component gas at a given total density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabUnits {
    /// `k_F` in 1/m.
    pub k_f: f64,
    /// `E_F` in J.
    pub e_f: f64,
    /// `ħ k_F / m` in m/s.
    pub v_f: f64,
}

impl LabUnits {
    pub fn new(lab: &LabBlock) -> Self {
        let n = lab.density_cm3 * 1e6;
        let m = lab.fermion_mass_amu * AMU;
        let k_f = (3.0 * PI * PI * n).cbrt();
        Self {
            k_f,
            e_f: HBAR * HBAR * k_f * k_f / (2.0 * m),
            v_f: HBAR * k_f / m,
        }
    }

    /// Energy in `E_F` to an ordinary frequency in Hz.
    pub fn hz(&self, energy: f64) -> f64 {
        energy * self.e_f / (2.0 * PI * HBAR)
    }

    /// Rate in `E_F/ħ` to 1/s.
    pub fn per_second(&self, rate: f64) -> f64 {
        rate * self.e_f / HBAR
    }

    /// Length in `1/k_F` to nm.
    pub fn nm(&self, length: f64) -> f64 {
        length / self.k_f * 1e9
    }

    /// Wave vector in `k_F` to 1/µm.
    pub fn per_um(&self, q: f64) -> f64 {
        q * self.k_f * 1e-6
    }

    /// Velocity in `v_F` to mm/s.
    pub fn mm_per_s(&self, v_over_vf: f64) -> f64 {
        v_over_vf * self.v_f * 1e3
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lithium_gas_scales() {
        // ⁶Li at 2e12 cm⁻³: k_F ≈ 3.90 µm⁻¹, E_F/h ≈ 12.8 kHz.
        let u = LabUnits::new(&LabBlock {
            density_cm3: 2e12,
            fermion_mass_amu: 6.015_122_887,
        });
        assert!((u.per_um(1.0) - 3.8978).abs() < 1e-4);
        assert!((u.hz(1.0) / 1e3 - 12.7646).abs() < 1e-3);
        // v_F = 2 E_F / k_F.
        assert!((u.v_f - 2.0 * u.e_f / (HBAR * u.k_f)).abs() < 1e-12 * u.v_f);
    }
}
