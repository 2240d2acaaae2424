//! Lab frame and calculation frame. The calculation frame has its z axis on
//! the interatomic axis, which lies in the lab xz plane at angle `theta`
//! from the lab z axis.

use serde::{Deserialize, Serialize};

use crate::angular::{wigner_d, HalfInteger};
use crate::error::{Error, Result};
use crate::species::StateOne;

/// Angle between interatomic axis and lab z axis, radians.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct InteractionAngle(f64);

impl InteractionAngle {
    pub fn new(theta: f64) -> Result<Self> {
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            return Err(Error::config(format!("interaction angle {theta} rad outside [0, pi]")));
        }
        Ok(InteractionAngle(theta))
    }

    pub fn from_degrees(deg: f64) -> Result<Self> {
        Self::new(deg.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }
}

/// Only geometries with the interatomic axis in the lab xz plane are
/// supported; anything else needs the full D-matrix.
pub fn check_azimuth(phi: f64) -> Result<()> {
    if phi != 0.0 {
        return Err(Error::config(format!(
            "azimuthal angle {phi} not supported: the interatomic axis must lie in the lab xz plane \
             (general orientations require Wigner D-matrices)"
        )));
    }
    Ok(())
}

/// Lab-to-calculation rotation applied to vectors.
pub fn rotation_matrix(theta: f64) -> [[f64; 3]; 3] {
    let (s, c) = theta.sin_cos();
    [[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]]
}

pub fn rotate_field(v: [f64; 3], theta: f64) -> [f64; 3] {
    crate::fields::apply(&rotation_matrix(theta), v)
}

/// `|n l j m>_lab = sum_m' d^j_{m m'}(theta) |n l j m'>_calc`.
pub fn rotate_state(state: &StateOne, theta: f64) -> Vec<(StateOne, f64)> {
    state
        .j
        .projections()
        .map(|mp| (state.with_m(mp), wigner_d(state.j, state.m, mp, theta)))
        .filter(|(_, c)| *c != 0.0)
        .collect()
}

/// `<j m'|_beta |j m>_gamma` for quantization axes in the calculation xz
/// plane at polar angles `beta` and `gamma`.
pub fn frame_overlap(j: HalfInteger, m_bra: HalfInteger, m_ket: HalfInteger, beta: f64, gamma: f64) -> f64 {
    wigner_d(j, m_bra, m_ket, gamma - beta)
}

/// Polar angle of the lab z axis seen from the calculation frame.
pub fn lab_axis_angle(theta: f64) -> f64 {
    -theta
}

/// Polar angle (signed, rotation about y) of a vector in the xz plane.
/// `None` for vectors with a y component or zero length.
pub fn polar_angle_xz(v: [f64; 3]) -> Option<f64> {
    if v[1] != 0.0 || (v[0] == 0.0 && v[2] == 0.0) {
        return None;
    }
    Some(v[0].atan2(v[2]))
}

/// Product of two rotated single-atom states, as coefficients over
/// calculation-frame product states.
pub fn probe_state_in_calc_frame(first: &StateOne, second: &StateOne, theta: f64) -> Vec<((StateOne, StateOne), f64)> {
    let a = rotate_state(first, theta);
    let b = rotate_state(second, theta);
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &(sa, ca) in &a {
        for &(sb, cb) in &b {
            out.push(((sa, sb), ca * cb));
        }
    }
    out
}
