//! Static electric and magnetic fields acting on a single atom: Stark,
//! Zeeman and diamagnetic operators, single-atom bases, and field maps.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angular::HalfInteger;
use crate::error::{Error, Result};
use crate::linalg::{eigh, OperatorMatrix, C64};
use crate::operators::{Momentum, Operators};
use crate::species::{Species, SpeciesData, StateOne};
use crate::units::{self, BOHR_MAGNETON, BOHR_RADIUS, ELECTRON_MASS, ELEMENTARY_CHARGE};

/// Homogeneous static fields. `electric` in V/m, `magnetic` in T.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    #[serde(default)]
    pub electric: [f64; 3],
    #[serde(default)]
    pub magnetic: [f64; 3],
    #[serde(default)]
    pub diamagnetism: bool,
}

impl FieldConfig {
    pub fn electric(e: [f64; 3]) -> Self {
        FieldConfig { electric: e, ..Default::default() }
    }

    pub fn magnetic(b: [f64; 3], diamagnetism: bool) -> Self {
        FieldConfig { magnetic: b, diamagnetism, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.electric.iter().chain(&self.magnetic).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::config("field components must be finite"))
        }
    }

    pub fn is_zero(&self) -> bool {
        self.electric.iter().chain(&self.magnetic).all(|&v| v == 0.0)
    }

    /// Both fields lie on the z axis (or vanish).
    pub fn is_axial(&self) -> bool {
        is_axial(self.electric) && is_axial(self.magnetic)
    }

    /// Common direction of all nonzero fields, if they are parallel or
    /// antiparallel.
    pub fn common_axis(&self) -> Option<[f64; 3]> {
        let mut axis: Option<[f64; 3]> = None;
        for v in [self.electric, self.magnetic] {
            let n = norm(v);
            if n == 0.0 {
                continue;
            }
            let u = [v[0] / n, v[1] / n, v[2] / n];
            match axis {
                None => axis = Some(u),
                Some(a) => {
                    let c = cross(a, u);
                    if norm(c) > 1e-12 {
                        return None;
                    }
                }
            }
        }
        Some(axis.unwrap_or([0.0, 0.0, 1.0]))
    }

    /// The same fields with a rotation matrix applied to both vectors.
    pub fn transformed(&self, rot: &[[f64; 3]; 3]) -> Self {
        FieldConfig { electric: apply(rot, self.electric), magnetic: apply(rot, self.magnetic), ..*self }
    }
}

fn is_axial(v: [f64; 3]) -> bool {
    v[0] == 0.0 && v[1] == 0.0
}

pub(crate) fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn apply(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (i, row) in m.iter().enumerate() {
        out[i] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
    }
    out
}

/// Spherical components `(F+, F-, F0)` with `F± = ∓(Fx ± i Fy)/√2`.
pub fn spherical_field_components(v: [f64; 3]) -> (C64, C64, C64) {
    let plus = -C64::new(v[0], v[1]) / SQRT_2;
    let minus = C64::new(v[0], -v[1]) / SQRT_2;
    (plus, minus, C64::new(v[2], 0.0))
}

/// Inverse of [`spherical_field_components`].
pub fn cartesian_from_spherical(plus: C64, minus: C64, zero: C64) -> [f64; 3] {
    let x = (minus - plus) / SQRT_2;
    let y = (minus + plus) / SQRT_2 * C64::new(0.0, 1.0);
    [x.re, y.re, zero.re]
}

/// Component `F_q` for `q` in `-1..=1`.
fn component(v: [f64; 3], q: i32) -> C64 {
    let (p, m, z) = spherical_field_components(v);
    match q {
        1 => p,
        -1 => m,
        _ => z,
    }
}

/// Energy of one `e a0` in 1 V/m, in GHz.
fn dipole_scale() -> f64 {
    units::dipole_field_ghz(1.0)
}

/// `mu_B * 1 T` in GHz.
fn magneton_scale() -> f64 {
    units::joule_to_ghz(BOHR_MAGNETON)
}

/// `e^2 a0^2 (1 T)^2 / (12 m_e)` in GHz.
fn diamagnetic_scale() -> f64 {
    units::joule_to_ghz((ELEMENTARY_CHARGE * BOHR_RADIUS).powi(2) / (12.0 * ELECTRON_MASS))
}

fn q_between(a: &StateOne, b: &StateOne) -> Option<i32> {
    (a.m - b.m).as_int()
}

/// Fills the upper triangle of a Hermitian operator from an element
/// function `f(bra, ket, q)` where `q = m_bra - m_ket`.
fn hermitian_from<F>(basis: &[StateOne], max_q: i32, f: F) -> Result<OperatorMatrix>
where
    F: Fn(&StateOne, &StateOne, i32) -> Result<C64> + Sync,
{
    let rows: Vec<Vec<(usize, usize, C64)>> = (0..basis.len())
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::new();
            for j in i..basis.len() {
                let (a, b) = (&basis[i], &basis[j]);
                let Some(q) = q_between(a, b) else { continue };
                if q.abs() > max_q || a.species != b.species {
                    continue;
                }
                let v = f(a, b, q)?;
                if v != C64::new(0.0, 0.0) {
                    row.push((i, j, v));
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut op = OperatorMatrix::zeros(basis.len());
    for (i, j, v) in rows.into_iter().flatten() {
        op.add_hermitian(i, j, v);
    }
    Ok(op)
}

/// `-d.E` with `d = e r`, in GHz. `e_field` in V/m.
pub fn stark_operator(ops: &Operators, basis: &[StateOne], e_field: [f64; 3]) -> Result<OperatorMatrix> {
    if e_field == [0.0; 3] {
        return Ok(OperatorMatrix::zeros(basis.len()));
    }
    let scale = dipole_scale();
    hermitian_from(basis, 1, |a, b, q| {
        let r = ops.multipole_element(a, b, 1, q)?;
        if r == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        // d.E = sum_q (-1)^q d_q E_-q
        let sign = if q == 0 { 1.0 } else { -1.0 };
        Ok(-component(e_field, -q) * (sign * r * scale))
    })
}

/// `-mu.B + |d x B|^2 / 8 m_e`, in GHz. `b_field` in T.
pub fn zeeman_operator(
    ops: &Operators,
    basis: &[StateOne],
    b_field: [f64; 3],
    diamagnetism: bool,
) -> Result<OperatorMatrix> {
    let mut op = paramagnetic_operator(ops, basis, b_field)?;
    if diamagnetism {
        let dia = diamagnetic_operator(ops, basis, b_field)?;
        op.axpy(C64::new(1.0, 0.0), &dia);
    }
    Ok(op)
}

/// `mu_B (g_l l + g_s s).B` in GHz.
pub fn paramagnetic_operator(ops: &Operators, basis: &[StateOne], b_field: [f64; 3]) -> Result<OperatorMatrix> {
    if b_field == [0.0; 3] {
        return Ok(OperatorMatrix::zeros(basis.len()));
    }
    let (gl, gs) = (ops.data().g_l(), ops.data().g_s());
    let scale = magneton_scale();
    hermitian_from(basis, 1, |a, b, q| {
        let j = gl * ops.momentum_element(a, b, Momentum::Orbital, q) + gs * ops.momentum_element(a, b, Momentum::Spin, q);
        if j == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        let sign = if q == 0 { 1.0 } else { -1.0 };
        Ok(component(b_field, -q) * (sign * j * scale))
    })
}

/// Weight of `r^2 C_kq` in the diamagnetic operator, up to `e^2/12 m_e`.
pub fn diamagnetic_weight(b_field: [f64; 3], k: i32, q: i32) -> C64 {
    let (bp, bm, b0) = spherical_field_components(b_field);
    let s3 = 3f64.sqrt();
    let s32 = 1.5f64.sqrt();
    match (k, q) {
        (0, 0) => C64::new(norm(b_field).powi(2), 0.0),
        (2, 0) => -(b0 * b0 + bp * bm),
        (2, 1) => s3 * b0 * bm,
        (2, -1) => s3 * b0 * bp,
        (2, 2) => -s32 * bm * bm,
        (2, -2) => -s32 * bp * bp,
        _ => C64::new(0.0, 0.0),
    }
}

/// `|d x B|^2 / 8 m_e` in GHz.
pub fn diamagnetic_operator(ops: &Operators, basis: &[StateOne], b_field: [f64; 3]) -> Result<OperatorMatrix> {
    if b_field == [0.0; 3] {
        return Ok(OperatorMatrix::zeros(basis.len()));
    }
    let scale = diamagnetic_scale();
    hermitian_from(basis, 2, |a, b, q| {
        let mut v = C64::new(0.0, 0.0);
        for k in [0, 2] {
            let w = diamagnetic_weight(b_field, k, q);
            if w == C64::new(0.0, 0.0) {
                continue;
            }
            let e = ops.harmonic_element(a, b, 2, k, q)?;
            v += w * e;
        }
        Ok(v * scale)
    })
}

/// `V_e + V_m` for a basis, in GHz.
pub fn field_operator(ops: &Operators, basis: &[StateOne], fields: &FieldConfig) -> Result<OperatorMatrix> {
    let mut op = stark_operator(ops, basis, fields.electric)?;
    let z = zeeman_operator(ops, basis, fields.magnetic, fields.diamagnetism)?;
    op.axpy(C64::new(1.0, 0.0), &z);
    op.compress();
    Ok(op)
}

/// Window-based construction of a single-atom basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingleBasisSpec {
    pub species: Species,
    pub n_min: i32,
    pub n_max: i32,
    /// Largest `l`; `None` means `n - 1`.
    #[serde(default)]
    pub l_max: Option<i32>,
    /// Allowed projections; `None` keeps all.
    #[serde(default)]
    pub m: Option<Vec<HalfInteger>>,
    /// Absolute energy bounds in GHz.
    #[serde(default)]
    pub energy_window: Option<(f64, f64)>,
}

impl SingleBasisSpec {
    /// States within `delta_n` of `target.n`, `l <= l_max`, and
    /// `|E - E_target| <= window` GHz.
    pub fn around(data: &SpeciesData, target: &StateOne, delta_n: i32, l_max: Option<i32>, window: Option<f64>) -> Result<Self> {
        let e = data.level_energy(&target.level())?.ghz();
        Ok(SingleBasisSpec {
            species: target.species,
            n_min: (target.n - delta_n).max(1),
            n_max: target.n + delta_n,
            l_max,
            m: None,
            energy_window: window.map(|w| (e - w, e + w)),
        })
    }
}

/// States allowed by `spec`, sorted by `(m, energy)`.
pub fn single_atom_basis(data: &SpeciesData, spec: &SingleBasisSpec) -> Result<Vec<StateOne>> {
    if spec.n_min < 1 || spec.n_max < spec.n_min {
        return Err(Error::config(format!("bad n range {}..={}", spec.n_min, spec.n_max)));
    }
    data.model(spec.species)?;
    let mut out = Vec::new();
    for n in spec.n_min..=spec.n_max {
        let l_top = spec.l_max.map_or(n - 1, |l| l.min(n - 1));
        for l in 0..=l_top {
            for j in crate::angular::allowed_j(l) {
                let level = crate::species::Level { species: spec.species, n, l, j };
                let e = data.level_energy(&level)?.ghz();
                if let Some((lo, hi)) = spec.energy_window {
                    if e < lo || e > hi {
                        continue;
                    }
                }
                for m in j.projections() {
                    if spec.m.as_ref().is_none_or(|ms| ms.contains(&m)) {
                        out.push((level.state(m), e));
                    }
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Error::config("single-atom basis is empty"));
    }
    out.sort_by(|a, b| (a.0.m, a.1).partial_cmp(&(b.0.m, b.1)).unwrap());
    Ok(out.into_iter().map(|(s, _)| s).collect())
}

/// Groups basis indices by `m`.
pub fn m_blocks(basis: &[StateOne]) -> Vec<Vec<usize>> {
    let mut map: BTreeMap<HalfInteger, Vec<usize>> = BTreeMap::new();
    for (i, s) in basis.iter().enumerate() {
        map.entry(s.m).or_default().push(i);
    }
    map.into_values().collect()
}

/// Eigenstate of a single-atom Hamiltonian, stored sparsely over the block
/// it lives in.
#[derive(Clone, Debug)]
pub struct DressedState {
    pub energy: f64,
    /// Projection, when the Hamiltonian conserves it.
    pub m: Option<HalfInteger>,
    pub support: Vec<usize>,
    pub coeffs: Vec<C64>,
}

impl DressedState {
    /// Index of the dominant basis state and its weight `|c|^2`.
    pub fn leading(&self) -> (usize, f64) {
        let mut best = (self.support[0], 0.0);
        for (&i, c) in self.support.iter().zip(&self.coeffs) {
            let w = c.norm_sqr();
            if w > best.1 {
                best = (i, w);
            }
        }
        best
    }

    /// `<basis_i | self>`.
    pub fn coefficient(&self, i: usize) -> C64 {
        self.support.iter().position(|&k| k == i).map_or(C64::new(0.0, 0.0), |p| self.coeffs[p])
    }
}

/// Single atom in static fields.
#[derive(Clone, Debug)]
pub struct SingleAtomSystem {
    pub basis: Vec<StateOne>,
    /// Unperturbed energies in GHz.
    pub energies: Vec<f64>,
    pub fields: FieldConfig,
    pub hamiltonian: OperatorMatrix,
}

impl SingleAtomSystem {
    pub fn new(ops: &Operators, basis: Vec<StateOne>, fields: FieldConfig) -> Result<Self> {
        fields.validate()?;
        let energies =
            basis.iter().map(|s| ops.data().level_energy(&s.level()).map(|e| e.ghz())).collect::<Result<Vec<_>>>()?;
        let mut hamiltonian = field_operator(ops, &basis, &fields)?;
        hamiltonian.add_diagonal(&energies);
        hamiltonian.compress();
        hamiltonian.blocks = fields.is_axial().then(|| m_blocks(&basis));
        Ok(SingleAtomSystem { basis, energies, fields, hamiltonian })
    }

    /// Eigenstates sorted by energy.
    pub fn diagonalize(&self) -> Result<Vec<DressedState>> {
        diagonalize_blocks(&self.hamiltonian, &self.basis)
    }
}

fn diagonalize_blocks(h: &OperatorMatrix, basis: &[StateOne]) -> Result<Vec<DressedState>> {
    let all: Vec<Vec<usize>> = vec![(0..h.dim()).collect()];
    let blocked = h.blocks.is_some();
    let blocks = h.blocks.as_ref().unwrap_or(&all);
    let mut out = Vec::with_capacity(h.dim());
    for idx in blocks {
        let (vals, vecs) = eigh(&h.submatrix(idx))?;
        for (c, &e) in vals.iter().enumerate() {
            out.push(DressedState {
                energy: e,
                m: blocked.then(|| basis[idx[0]].m),
                support: idx.clone(),
                coeffs: vecs.column(c).iter().copied().collect(),
            });
        }
    }
    out.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Electric,
    Magnetic,
}

/// Eigenvalues at one scan point with leading-character labels.
#[derive(Clone, Debug)]
pub struct FieldMapPoint {
    /// Field magnitude (V/m or T).
    pub field: f64,
    pub energies: Vec<f64>,
    /// Basis index of the dominant component of each eigenstate.
    pub labels: Vec<usize>,
    pub overlaps: Vec<f64>,
}

/// Stark or Zeeman map of `basis` along `direction`. A failing point is
/// reported in place; the other points are still computed.
pub fn field_map(
    ops: &Operators,
    basis: &[StateOne],
    kind: FieldKind,
    direction: [f64; 3],
    diamagnetism: bool,
    scan: &[f64],
) -> Result<Vec<Result<FieldMapPoint>>> {
    let n = norm(direction);
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::config("field direction must be a nonzero finite vector"));
    }
    let u = [direction[0] / n, direction[1] / n, direction[2] / n];
    let energies =
        basis.iter().map(|s| ops.data().level_energy(&s.level()).map(|e| e.ghz())).collect::<Result<Vec<_>>>()?;
    let (linear, quadratic) = match kind {
        FieldKind::Electric => (stark_operator(ops, basis, u)?, OperatorMatrix::zeros(basis.len())),
        FieldKind::Magnetic => {
            let dia = if diamagnetism {
                diamagnetic_operator(ops, basis, u)?
            } else {
                OperatorMatrix::zeros(basis.len())
            };
            (paramagnetic_operator(ops, basis, u)?, dia)
        }
    };
    let blocks = is_axial(u).then(|| m_blocks(basis));
    let points = scan
        .par_iter()
        .map(|&f| {
            let mut h = OperatorMatrix::zeros(basis.len());
            h.add_diagonal(&energies);
            h.axpy(C64::new(f, 0.0), &linear);
            h.axpy(C64::new(f * f, 0.0), &quadratic);
            h.compress();
            h.blocks = blocks.clone();
            let states = diagonalize_blocks(&h, basis)?;
            let mut p = FieldMapPoint { field: f, energies: Vec::new(), labels: Vec::new(), overlaps: Vec::new() };
            for s in &states {
                let (i, w) = s.leading();
                p.energies.push(s.energy);
                p.labels.push(i);
                p.overlaps.push(w);
            }
            Ok(p)
        })
        .collect();
    Ok(points)
}

/// Dense representation of `DressedState`s as columns over the full basis.
pub fn dressed_matrix(dim: usize, states: &[DressedState]) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(dim, states.len());
    for (c, s) in states.iter().enumerate() {
        for (&i, &v) in s.support.iter().zip(&s.coeffs) {
            m[(i, c)] = v;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spherical_components_examples() {
        let f = 2.5;
        let (p, m, z) = spherical_field_components([0.0, 0.0, f]);
        assert_eq!((p, m, z), (C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(f, 0.0)));
        let (p, m, z) = spherical_field_components([f, 0.0, 0.0]);
        assert!((p.re + f / SQRT_2).abs() < 1e-15 && p.im == 0.0);
        assert!((m.re - f / SQRT_2).abs() < 1e-15 && m.im == 0.0);
        assert_eq!(z, C64::new(0.0, 0.0));
    }

    #[test]
    fn spherical_components_round_trip() {
        for v in [[1.0, -2.0, 0.5], [0.3, 0.7, -0.1], [-4.0, 0.0, 2.0]] {
            let (p, m, z) = spherical_field_components(v);
            let back = cartesian_from_spherical(p, m, z);
            for i in 0..3 {
                assert!((back[i] - v[i]).abs() < 1e-15, "{back:?} {v:?}");
            }
        }
    }

    #[test]
    fn common_axis_detects_parallel_fields() {
        let f = FieldConfig { electric: [0.0, 0.0, 2.0], magnetic: [0.0, 0.0, -1.0], diamagnetism: false };
        assert!(f.common_axis().is_some());
        let g = FieldConfig { electric: [1.0, 0.0, 0.0], magnetic: [0.0, 0.0, 1.0], diamagnetism: false };
        assert!(g.common_axis().is_none());
    }
}
