//! Angular momentum algebra.

mod half;
mod reduced;
mod rotation;
mod wigner;

pub use half::HalfInteger;
pub use reduced::{
    allowed_j, normalized_harmonic_element, orbital_momentum_element, reduced_j, reduced_orbital_in_j,
    reduced_spin_in_j, reduced_y, spherical_harmonic_element, spin_momentum_element, wigner_eckart,
    AngularState,
};
pub use rotation::{wigner_d, wigner_d_matrix};
pub use wigner::{clebsch_gordan, wigner_3j, wigner_6j};
