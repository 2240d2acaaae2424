//! Radial wave functions and radial multipole integrals.
//!
//! Wave functions live on the lattice `x_k = k h` with `x = sqrt(r)` (r in
//! Bohr radii) and are stored as `X(x) = x^{3/2} Psi(r)`. All states share
//! the lattice, so integrals between two states are plain sums over the
//! overlapping index range.

mod whittaker;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

pub use whittaker::{hyperu, whittaker_w, Scaled};

use crate::error::{Error, Result};
use crate::species::{level_energy, quantum_defect, Level, LevelEnergy, SpeciesData, SpeciesModel};
use crate::units::{ELECTRON_G, FINE_STRUCTURE};

/// Below this `n` single-electron wave functions are not considered
/// accurate; results are produced but flagged.
pub const VALIDATED_MIN_N: i32 = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Whittaker,
    Numerov,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whittaker" => Ok(Method::Whittaker),
            "numerov" => Ok(Method::Numerov),
            _ => Err(Error::config(format!("unknown radial method `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Lattice step in `sqrt(a0)`.
    pub step: f64,
    /// Include the spin-orbit term in the model potential.
    #[serde(default = "yes")]
    pub spin_orbit: bool,
}

fn yes() -> bool {
    true
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { step: 0.005, spin_orbit: true }
    }
}

impl GridSpec {
    /// Outer end of the grid, `sqrt(2 n (n + 15))`.
    pub fn x_out(n: i32) -> f64 {
        let n = n as f64;
        (2.0 * n * (n + 15.0)).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct RadialWavefunction {
    pub level: Level,
    pub method: Method,
    pub n_star: f64,
    pub step: f64,
    /// Lattice index of `values[0]`.
    pub first: usize,
    /// `X(x_k)` for `k = first ..`.
    pub values: Vec<f64>,
    /// `|norm - 1|` of the raw solution before rescaling. Only meaningful for
    /// the analytic route, where the raw function is normalized by
    /// construction.
    pub norm_residual: f64,
    /// Radius (a0) inside which the solution was set to zero, if truncated.
    pub truncated_at: Option<f64>,
    pub validated: bool,
}

impl RadialWavefunction {
    pub fn x(&self, i: usize) -> f64 {
        (self.first + i) as f64 * self.step
    }

    /// `(r, Psi(r))` pairs, r in a0.
    pub fn psi(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| {
            let x = self.x(i);
            (x * x, v / x.powf(1.5))
        })
    }

    /// Two-column text export of `r` and `Psi(r)`.
    pub fn to_text(&self) -> String {
        let mut s = format!("# {} {:?}\n# r_a0 psi\n", self.level, self.method);
        for (r, p) in self.psi() {
            let _ = writeln!(s, "{r:.10e} {p:.10e}");
        }
        s
    }

    fn last(&self) -> usize {
        self.first + self.values.len()
    }
}

/// `int Psi_a Psi_b r^(2+power) dr` in units of `a0^power`.
pub fn integrate(a: &RadialWavefunction, b: &RadialWavefunction, power: i32) -> Result<f64> {
    if a.step != b.step {
        return Err(Error::numerical("wave functions on different lattices"));
    }
    let lo = a.first.max(b.first);
    let hi = a.last().min(b.last());
    if lo >= hi {
        return Ok(0.0);
    }
    let h = a.step;
    let p = 2 + 2 * power;
    let mut sum = 0.0;
    for k in lo..hi {
        let x = k as f64 * h;
        sum += a.values[k - a.first] * b.values[k - b.first] * x.powi(p);
    }
    // Both ends carry negligible weight (decayed tail, or truncated to
    // zero), so the plain sum is the trapezoid rule.
    let v = 2.0 * h * sum;
    if !v.is_finite() {
        return Err(Error::numerical(format!("radial integral diverged for {} / {}", a.level, b.level)));
    }
    Ok(v)
}

fn energy_au(e: &LevelEnergy) -> f64 {
    let ns = e.n_star();
    -0.5 / (ns * ns)
}

/// Coefficient function of the transformed radial equation `X'' = g X`.
fn g_coulomb(l: i32, e_au: f64, x: f64) -> f64 {
    let lf = l as f64;
    (2.0 * lf + 0.5) * (2.0 * lf + 1.5) / (x * x) + 8.0 * x * x * (-1.0 / (x * x) - e_au)
}

/// Model potential in Hartree at radius `r` (a0).
pub fn model_potential(model: &SpeciesModel, level: &Level, r: f64, spin_orbit: bool) -> f64 {
    let p = model.potential_params(level.l).expect("validated species has a model potential");
    let z = model.z as f64;
    let vc = -(1.0 + (z - 1.0) * (-p.a1 * r).exp() - r * (p.a3 + p.a4 * r) * (-p.a2 * r).exp()) / r;
    let vp = if model.alpha_d_au > 0.0 {
        -model.alpha_d_au / (2.0 * r.powi(4)) * (1.0 - (-(r / p.r_c_a0).powi(6)).exp())
    } else {
        0.0
    };
    let vso = if spin_orbit && r > p.r_c_a0 && level.l > 0 {
        let j = level.j.value();
        let l = level.l as f64;
        let ls = 0.5 * (j * (j + 1.0) - l * (l + 1.0) - 0.75);
        ELECTRON_G * FINE_STRUCTURE * FINE_STRUCTURE * ls / (4.0 * r.powi(3))
    } else {
        0.0
    };
    vc + vp + vso
}

fn norm(values: &[f64], first: usize, h: f64) -> f64 {
    let s: f64 = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let x = (first + i) as f64 * h;
            v * v * x * x
        })
        .sum();
    2.0 * h * s
}

/// Normalizes and fixes the sign so the outermost antinode is positive.
fn finish(values: &mut [f64], first: usize, h: f64) -> Result<f64> {
    let nrm = norm(values, first, h);
    if !(nrm.is_finite() && nrm > 0.0) {
        return Err(Error::numerical("wave function is not normalizable"));
    }
    let s = nrm.sqrt();
    values.iter_mut().for_each(|v| *v /= s);
    // Outermost local maximum of |X|.
    let mut idx = values.len() - 1;
    while idx > 0 && values[idx - 1].abs() >= values[idx].abs() {
        idx -= 1;
    }
    if values[idx] < 0.0 {
        values.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(nrm)
}

fn lattice(n: i32, h: f64) -> (usize, usize) {
    let k_out = (GridSpec::x_out(n) / h).ceil() as usize;
    (1, k_out)
}

pub fn whittaker_wavefunction(model: &SpeciesModel, level: &Level, grid: &GridSpec) -> Result<RadialWavefunction> {
    let energy = &level_energy(model, level.n, level.l, level.j)?;
    let ns = level.n as f64 - quantum_defect(model, level.n, level.l, level.j);
    let l = level.l;
    if ns <= l as f64 {
        return Err(Error::Domain(format!("{level}: n* = {ns} does not exceed l")));
    }
    let lf = l as f64;
    let ln_norm = -0.5 * (2.0 * ns.ln() + crate::special::ln_gamma(ns + lf + 1.0) + crate::special::ln_gamma(ns - lf));
    let h = grid.step;
    let (first, k_out) = lattice(level.n, h);
    let e_au = -0.5 / (ns * ns);
    let x_mid = ns;
    let g = |x: f64| g_coulomb(l, e_au, x);

    // Evaluate from the outside in and stop once the inner divergence is
    // reached, which avoids evaluating U deep inside the core.
    let mut rev: Vec<f64> = Vec::with_capacity(k_out);
    let mut truncated = None;
    let mut peak = 0.0f64;
    for k in (first..=k_out).rev() {
        let x = k as f64 * h;
        let r = x * x;
        let w = whittaker_w(ns, l, 2.0 * r / ns);
        let v = w.sign * (ln_norm + w.ln_abs - 0.5 * x.ln()).exp();
        if let Some(&prev) = rev.last() {
            if x < x_mid && g(x) > 0.0 {
                if v.abs() > f64::abs(prev) {
                    truncated = Some(r);
                    break;
                }
                if v.abs() < 1e-18 * peak {
                    break;
                }
            }
        }
        peak = peak.max(v.abs());
        rev.push(v);
    }
    rev.reverse();
    let start = k_out + 1 - rev.len();
    let mut values = rev;
    let nrm = finish(&mut values, start, h)?;
    Ok(RadialWavefunction {
        level: *level,
        method: Method::Whittaker,
        n_star: ns,
        step: h,
        first: start,
        values,
        norm_residual: (nrm - 1.0).abs(),
        truncated_at: truncated,
        validated: level.n >= VALIDATED_MIN_N && energy.validated,
    })
}

pub fn numerov_wavefunction(
    model: &SpeciesModel,
    level: &Level,
    energy: &LevelEnergy,
    grid: &GridSpec,
) -> Result<RadialWavefunction> {
    let h = grid.step;
    let (first, k_out) = lattice(level.n, h);
    let e_au = energy_au(energy);
    let lf = level.l as f64;
    let cent = (2.0 * lf + 0.5) * (2.0 * lf + 1.5);
    let g = |x: f64| {
        let r = x * x;
        cent / r + 8.0 * r * (model_potential(model, level, r, grid.spin_orbit) - e_au)
    };

    let len = k_out - first + 1;
    let mut values = vec![0.0; len];
    let mut gs = vec![0.0; len];
    for (i, gv) in gs.iter_mut().enumerate() {
        *gv = g((first + i) as f64 * h);
    }
    let h12 = h * h / 12.0;
    let x_mid = energy.n_star();
    values[len - 1] = 0.0;
    values[len - 2] = 1e-30;
    let mut stop = 0;
    let mut truncated = None;
    for i in (1..len - 1).rev() {
        let num = 2.0 * (1.0 + 5.0 * h12 * gs[i]) * values[i] - (1.0 - h12 * gs[i + 1]) * values[i + 1];
        let next = num / (1.0 - h12 * gs[i - 1]);
        let x = (first + i) as f64 * h;
        // Inside the inner forbidden region the solution should decay
        // toward the origin; growth means the irregular solution took over.
        if x < x_mid && gs[i] > 0.0 && next.abs() > values[i].abs() {
            stop = i;
            truncated = Some(x * x);
            break;
        }
        values[i - 1] = next;
        if next.abs() > 1e200 {
            let s = next.abs();
            values[i - 1..].iter_mut().for_each(|v| *v /= s);
        }
    }
    values.drain(..stop);
    let first = first + stop;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical(format!("{level}: Numerov integration overflowed")));
    }
    finish(&mut values, first, h)?;
    Ok(RadialWavefunction {
        level: *level,
        method: Method::Numerov,
        n_star: energy.n_star(),
        step: h,
        first,
        values,
        norm_residual: 0.0,
        truncated_at: truncated,
        validated: level.n >= VALIDATED_MIN_N && energy.validated,
    })
}

type WfKey = (Level, Method);

/// Computes and memoizes radial wave functions for one data set and grid.
pub struct RadialSolver {
    data: Arc<SpeciesData>,
    grid: GridSpec,
    cache: RwLock<HashMap<WfKey, Arc<RadialWavefunction>>>,
}

impl RadialSolver {
    pub fn new(data: Arc<SpeciesData>, grid: GridSpec) -> Self {
        RadialSolver { data, grid, cache: RwLock::new(HashMap::new()) }
    }

    pub fn data(&self) -> &Arc<SpeciesData> {
        &self.data
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn wavefunction(&self, level: &Level, method: Method) -> Result<Arc<RadialWavefunction>> {
        let key = (*level, method);
        if let Some(w) = self.cache.read().unwrap().get(&key) {
            return Ok(w.clone());
        }
        let model = self.data.model(level.species)?;
        let energy = level_energy(model, level.n, level.l, level.j)?;
        let wf = Arc::new(match method {
            Method::Whittaker => whittaker_wavefunction(model, level, &self.grid)?,
            Method::Numerov => numerov_wavefunction(model, level, &energy, &self.grid)?,
        });
        self.cache.write().unwrap().insert(key, wf.clone());
        Ok(wf)
    }

    /// `<a| r^power |b>` radial integral in `a0^power`.
    pub fn matrix_element(&self, a: &Level, b: &Level, power: i32, method: Method) -> Result<f64> {
        let wa = self.wavefunction(a, method)?;
        let wb = self.wavefunction(b, method)?;
        integrate(&wa, &wb, power)
    }

    /// `<r^2>` in a0^2.
    pub fn r2(&self, level: &Level, method: Method) -> Result<f64> {
        self.matrix_element(level, level, 2, method)
    }
}
