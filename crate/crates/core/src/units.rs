//! Physical constants (CODATA 2018) and unit conversions.
//!
//! Level energies are stored in Joules. Hamiltonian matrices are assembled in
//! GHz (energy divided by Planck's constant), which keeps pair-potential
//! matrices well scaled.

use std::f64::consts::PI;

pub const PLANCK: f64 = 6.626_070_15e-34;
pub const HBAR: f64 = PLANCK / (2.0 * PI);
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
pub const RYDBERG_CONSTANT: f64 = 10_973_731.568_160;
pub const HARTREE: f64 = 4.359_744_722_207_1e-18;
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
pub const FINE_STRUCTURE: f64 = 7.297_352_569_3e-3;
pub const ELECTRON_VOLT: f64 = ELEMENTARY_CHARGE;
/// Electron spin g-factor magnitude.
pub const ELECTRON_G: f64 = 2.002_319_3;

/// Rydberg energy `h c R_inf` in Joules.
pub const RYDBERG_ENERGY: f64 = PLANCK * SPEED_OF_LIGHT * RYDBERG_CONSTANT;

/// Energy in Joules to frequency in GHz.
#[inline]
pub fn joule_to_ghz(e: f64) -> f64 {
    e / PLANCK * 1e-9
}

#[inline]
pub fn ghz_to_joule(f: f64) -> f64 {
    f * 1e9 * PLANCK
}

#[inline]
pub fn hartree_to_ghz(e: f64) -> f64 {
    joule_to_ghz(e * HARTREE)
}

#[inline]
pub fn ghz_to_hartree(f: f64) -> f64 {
    ghz_to_joule(f) / HARTREE
}

#[inline]
pub fn joule_to_hartree(e: f64) -> f64 {
    e / HARTREE
}

/// Electric dipole energy scale: one `e a0` in a field of 1 V/m, in GHz.
#[inline]
pub fn dipole_field_ghz(field_v_per_m: f64) -> f64 {
    joule_to_ghz(ELEMENTARY_CHARGE * BOHR_RADIUS * field_v_per_m)
}

#[inline]
pub fn meters_to_bohr(r: f64) -> f64 {
    r / BOHR_RADIUS
}

#[inline]
pub fn bohr_to_meters(r: f64) -> f64 {
    r * BOHR_RADIUS
}

/// mV/cm to V/m.
#[inline]
pub fn mv_per_cm_to_v_per_m(e: f64) -> f64 {
    e * 0.1
}

/// V/m to mV/cm.
#[inline]
pub fn v_per_m_to_mv_per_cm(e: f64) -> f64 {
    e * 10.0
}

/// Gauss to Tesla.
#[inline]
pub fn gauss_to_tesla(b: f64) -> f64 {
    b * 1e-4
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hartree_is_twice_rydberg() {
        let ratio = HARTREE / RYDBERG_ENERGY;
        assert!((ratio - 2.0).abs() < 1e-9, "{ratio}");
    }

    #[test]
    fn conversions_invert() {
        let f = 12.345;
        assert!((joule_to_ghz(ghz_to_joule(f)) - f).abs() < 1e-12);
        assert!((hartree_to_ghz(ghz_to_hartree(f)) - f).abs() < 1e-12);
    }

    #[test]
    fn bohr_radius_consistent_with_hartree() {
        // E_h = e^2 / (4 pi eps0 a0)
        let e_h = ELEMENTARY_CHARGE.powi(2) / (4.0 * PI * VACUUM_PERMITTIVITY * BOHR_RADIUS);
        assert!((e_h / HARTREE - 1.0).abs() < 1e-9);
    }
}
