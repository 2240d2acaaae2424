//! Two-atom basis, multipole interaction operators, symmetry adaptation and
//! the total Hamiltonian.
//!
//! Pair states are products of single-atom states. In the bare basis these
//! are `|n l j m>` quantized along the interatomic axis. In the dressed basis
//! they are eigenstates of the single-atom Hamiltonian in the applied fields,
//! quantized along the field axis, and the multipole operators are rotated
//! into that frame.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::angular::{wigner_d_matrix, HalfInteger};
use crate::error::{Error, Result};
use crate::fields::{field_operator, single_atom_basis, DressedState, FieldConfig, SingleAtomSystem, SingleBasisSpec};
use crate::geometry::{frame_overlap, lab_axis_angle, polar_angle_xz, rotation_matrix};
use crate::linalg::{OperatorMatrix, C64};
use crate::operators::{multipole_allowed, Operators};
use crate::species::{SpeciesData, StateOne};
use crate::units;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Product state `|first; second>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateTwo {
    pub first: StateOne,
    pub second: StateOne,
}

impl StateTwo {
    pub fn new(first: StateOne, second: StateOne) -> Self {
        StateTwo { first, second }
    }

    pub fn m_total(&self) -> i32 {
        (self.first.m + self.second.m).as_int().expect("sum of two half-odd projections")
    }

    /// `(-1)^(l1 + l2)`.
    pub fn parity(&self) -> i32 {
        if (self.first.l + self.second.l) % 2 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn is_homonuclear(&self) -> bool {
        self.first.species == self.second.species
    }

    pub fn swapped(&self) -> Self {
        StateTwo { first: self.second, second: self.first }
    }

    /// Unperturbed energy in GHz.
    pub fn energy(&self, data: &SpeciesData) -> Result<f64> {
        Ok(data.level_energy(&self.first.level())?.ghz() + data.level_energy(&self.second.level())?.ghz())
    }
}

impl fmt::Display for StateTwo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}; {}>", self.first, self.second)
    }
}

/// Use of one symmetry: ignored, all sectors, or a single sector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryMode {
    #[default]
    Off,
    All,
    /// Sector `+1` (gerade, even, symmetric).
    Even,
    /// Sector `-1`.
    Odd,
}

impl SymmetryMode {
    fn sectors(self) -> &'static [i8] {
        match self {
            SymmetryMode::Off => &[],
            SymmetryMode::All => &[1, -1],
            SymmetryMode::Even => &[1],
            SymmetryMode::Odd => &[-1],
        }
    }

    pub fn is_on(self) -> bool {
        self != SymmetryMode::Off
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Symmetries {
    #[serde(default)]
    pub inversion: SymmetryMode,
    #[serde(default)]
    pub reflection: SymmetryMode,
    #[serde(default)]
    pub permutation: SymmetryMode,
}

/// Sector labels of a symmetry-adapted basis vector: inversion `p`,
/// reflection `d`, permutation `f`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SectorTags {
    pub inversion: Option<i8>,
    pub reflection: Option<i8>,
    pub permutation: Option<i8>,
}

impl fmt::Display for SectorTags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(p) = self.inversion {
            parts.push(if p > 0 { "g" } else { "u" });
        }
        if let Some(d) = self.reflection {
            parts.push(if d > 0 { "+" } else { "-" });
        }
        if let Some(s) = self.permutation {
            parts.push(if s > 0 { "s" } else { "a" });
        }
        f.write_str(&parts.join(","))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// Dressed when any field is nonzero, bare otherwise.
    #[default]
    Auto,
    Bare,
    Dressed,
}

/// Single-atom basis used to diagonalize the atom-field Hamiltonian before
/// forming dressed pair states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DressingSpec {
    #[serde(default = "default_dressing_dn")]
    pub delta_n: i32,
    #[serde(default)]
    pub l_max: Option<i32>,
    /// Half width in GHz around each target level.
    #[serde(default = "default_window")]
    pub energy_window: f64,
    #[serde(default)]
    pub m_max: Option<HalfInteger>,
}

fn default_dressing_dn() -> i32 {
    2
}

fn default_window() -> f64 {
    30.0
}

fn default_order() -> u32 {
    3
}

impl Default for DressingSpec {
    fn default() -> Self {
        DressingSpec { delta_n: default_dressing_dn(), l_max: None, energy_window: default_window(), m_max: None }
    }
}

/// Restrictions defining a pair basis around a target pair state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    pub target: StateTwo,
    pub delta_n: i32,
    pub delta_l: i32,
    /// Half width in GHz around the target pair energy.
    #[serde(default = "default_window")]
    pub energy_window: f64,
    /// Highest multipole order `rho = kappa1 + kappa2 + 1`.
    #[serde(default = "default_order")]
    pub order: u32,
    #[serde(default)]
    pub symmetries: Symmetries,
    #[serde(default)]
    pub kind: BasisKind,
    #[serde(default)]
    pub dressing: DressingSpec,
}

impl BasisSpec {
    pub fn new(target: StateTwo, delta_n: i32, delta_l: i32) -> Self {
        BasisSpec {
            target,
            delta_n,
            delta_l,
            energy_window: default_window(),
            order: default_order(),
            symmetries: Symmetries::default(),
            kind: BasisKind::Auto,
            dressing: DressingSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.target.first.validate()?;
        self.target.second.validate()?;
        if self.delta_n < 0 || self.delta_l < 0 {
            return Err(Error::config("delta_n and delta_l must be non-negative"));
        }
        if !(self.energy_window > 0.0) || !(self.dressing.energy_window > 0.0) {
            return Err(Error::config("energy windows must be positive"));
        }
        if self.order < 3 {
            return Err(Error::config(format!("multipole order {} < 3", self.order)));
        }
        if self.dressing.delta_n < 0 {
            return Err(Error::config("dressing delta_n must be non-negative"));
        }
        Ok(())
    }
}

/// Which symmetries the Hamiltonian conserves, given fields in the
/// calculation frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conservation {
    pub m_total: bool,
    pub reflection: bool,
    pub inversion: bool,
    pub permutation: bool,
}

impl Conservation {
    pub fn of(fields_calc: &FieldConfig, order: u32, homonuclear: bool) -> Self {
        let e = fields_calc.electric;
        let b = fields_calc.magnetic;
        Conservation {
            m_total: fields_calc.is_axial(),
            reflection: e[1] == 0.0 && b[0] == 0.0 && b[2] == 0.0,
            inversion: homonuclear && e == [0.0; 3],
            permutation: homonuclear && order == 3,
        }
    }
}

/// Eigenstates (or bare states) of one atom, used as pair constituents.
#[derive(Clone, Debug)]
pub struct AtomStates {
    /// Bare states quantized along the frame axis.
    pub bare: Vec<StateOne>,
    /// Polar angle of the frame axis in the calculation frame.
    pub beta: f64,
    pub states: Vec<DressedState>,
    pub dressed: bool,
}

impl AtomStates {
    fn bare(bare: Vec<StateOne>, energies: &[f64]) -> Self {
        let states = bare
            .iter()
            .enumerate()
            .map(|(i, s)| DressedState {
                energy: energies[i],
                m: Some(s.m),
                support: vec![i],
                coeffs: vec![C64::new(1.0, 0.0)],
            })
            .collect();
        AtomStates { bare, beta: 0.0, states, dressed: false }
    }

    /// Dominant bare state of constituent `i`.
    pub fn label(&self, i: usize) -> &StateOne {
        &self.bare[self.states[i].leading().0]
    }

    /// `<state_i | target>` with `target` quantized along the axis at polar
    /// angle `gamma`.
    pub fn overlap_with(&self, i: usize, target: &StateOne, gamma: f64) -> C64 {
        let s = &self.states[i];
        let mut acc = ZERO;
        for (&b, &c) in s.support.iter().zip(&s.coeffs) {
            let bare = &self.bare[b];
            if bare.level() == target.level() {
                acc += c.conj() * frame_overlap(bare.j, bare.m, target.m, self.beta, gamma);
            }
        }
        acc
    }

    fn retain(&mut self, keep: &[usize]) {
        self.states = keep.iter().map(|&i| self.states[i].clone()).collect();
    }
}

/// Symmetry-adapted basis vector: normalized combination of product states.
#[derive(Clone, Debug)]
pub struct BasisVector {
    pub components: Vec<(usize, f64)>,
    pub tags: SectorTags,
    pub m_total: Option<i32>,
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct BlockKey {
    pub tags: SectorTags,
    pub m_total: Option<i32>,
}

impl fmt::Display for BlockKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.m_total {
            Some(m) => write!(f, "M={m}")?,
            None => write!(f, "M=*")?,
        }
        let t = self.tags.to_string();
        if !t.is_empty() {
            write!(f, " {t}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Block {
    pub key: BlockKey,
    pub range: std::ops::Range<usize>,
}

/// Pair basis with its block structure.
#[derive(Clone, Debug)]
pub struct PairBasis {
    pub spec: BasisSpec,
    pub theta: f64,
    pub fields: FieldConfig,
    /// Constituent sets; `slots[k]` indexes this for atom `k`.
    pub atoms: Vec<AtomStates>,
    pub slots: [usize; 2],
    pub products: Vec<(usize, usize)>,
    pub product_energies: Vec<f64>,
    pub vectors: Vec<BasisVector>,
    pub blocks: Vec<Block>,
    pub conservation: Conservation,
    /// Energy of the target pair state (dressed if applicable), GHz.
    pub target_energy: f64,
    pub dressed: bool,
    index: HashMap<(usize, usize), usize>,
}

impl PairBasis {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn atom(&self, k: usize) -> &AtomStates {
        &self.atoms[self.slots[k]]
    }

    pub fn product_index(&self, i: usize, k: usize) -> Option<usize> {
        self.index.get(&(i, k)).copied()
    }

    /// Leading-character label of a product state.
    pub fn product_label(&self, p: usize) -> StateTwo {
        let (i, k) = self.products[p];
        StateTwo::new(*self.atom(0).label(i), *self.atom(1).label(k))
    }

    /// Amplitudes `<product | probe>` of the lab-frame probe state.
    pub fn probe_product_amplitudes(&self, probe: &StateTwo) -> Vec<C64> {
        let gamma = lab_axis_angle(self.theta);
        let a0 = self.atom(0);
        let a1 = self.atom(1);
        let o0: Vec<C64> = (0..a0.states.len()).map(|i| a0.overlap_with(i, &probe.first, gamma)).collect();
        let o1: Vec<C64> = (0..a1.states.len()).map(|k| a1.overlap_with(k, &probe.second, gamma)).collect();
        self.products.iter().map(|&(i, k)| o0[i] * o1[k]).collect()
    }

    /// Amplitudes `<vector | probe>`.
    pub fn probe_amplitudes(&self, probe: &StateTwo) -> Vec<C64> {
        let amp = self.probe_product_amplitudes(probe);
        self.vectors
            .iter()
            .map(|v| {
                let mut re = ExactSum::default();
                let mut im = ExactSum::default();
                for &(p, c) in &v.components {
                    re.add(c * amp[p].re);
                    im.add(c * amp[p].im);
                }
                C64::new(re.value(), im.value())
            })
            .collect()
    }

    /// Structured record of the basis for reproducibility.
    pub fn dump(&self) -> serde_json::Value {
        let vectors: Vec<serde_json::Value> = self
            .vectors
            .iter()
            .map(|v| {
                serde_json::json!({
                    "energy_ghz": v.energy,
                    "m_total": v.m_total,
                    "sector": v.tags.to_string(),
                    "components": v.components.iter().map(|&(p, c)| {
                        let s = self.product_label(p);
                        serde_json::json!({"first": s.first.to_string(), "second": s.second.to_string(), "coefficient": c})
                    }).collect::<Vec<_>>(),
                })
            })
            .collect();
        let blocks: Vec<serde_json::Value> = self
            .blocks
            .iter()
            .map(|b| serde_json::json!({"block": b.key.to_string(), "start": b.range.start, "len": b.range.len()}))
            .collect();
        serde_json::json!({
            "target": self.spec.target.to_string(),
            "dressed": self.dressed,
            "theta_rad": self.theta,
            "target_energy_ghz": self.target_energy,
            "blocks": blocks,
            "vectors": vectors,
        })
    }
}

fn level_energies(data: &SpeciesData, states: &[StateOne]) -> Result<Vec<f64>> {
    states.iter().map(|s| data.level_energy(&s.level()).map(|e| e.ghz())).collect()
}

fn in_window(s: &StateOne, target: &StateOne, dn: i32, dl: i32) -> bool {
    s.species == target.species && (s.n - target.n).abs() <= dn && (s.l - target.l).abs() <= dl
}

/// Bare single-atom states around `target`, all projections.
fn bare_set(data: &SpeciesData, target: &StateOne, dn: i32, dl: i32) -> Result<Vec<StateOne>> {
    let spec = SingleBasisSpec {
        species: target.species,
        n_min: (target.n - dn).max(1),
        n_max: target.n + dn,
        l_max: Some(target.l + dl),
        m: None,
        energy_window: None,
    };
    Ok(single_atom_basis(data, &spec)?.into_iter().filter(|s| (s.l - target.l).abs() <= dl).collect())
}

fn union(mut a: Vec<StateOne>, b: Vec<StateOne>) -> Vec<StateOne> {
    let seen: HashSet<StateOne> = a.iter().copied().collect();
    a.extend(b.into_iter().filter(|s| !seen.contains(s)));
    a.sort_by_key(|s| (s.m, s.n, s.l, s.j));
    a
}

/// Builds the pair basis for `spec` in the given lab-frame fields, with
/// the interatomic axis at angle `theta` from the lab z axis.
pub fn build_pair_basis(ops: &Operators, spec: &BasisSpec, fields: &FieldConfig, theta: f64) -> Result<PairBasis> {
    spec.validate()?;
    fields.validate()?;
    let data = ops.data();
    let target = spec.target;
    let homonuclear = target.is_homonuclear();
    let fields_calc = fields.transformed(&rotation_matrix(theta));
    let conservation = Conservation::of(&fields_calc, spec.order, homonuclear);
    let sym = spec.symmetries;
    if !homonuclear && (sym.inversion.is_on() || sym.permutation.is_on()) {
        return Err(Error::config("inversion and permutation symmetry need two atoms of the same species"));
    }
    for (on, ok, name) in [
        (sym.inversion.is_on(), conservation.inversion, "inversion"),
        (sym.reflection.is_on(), conservation.reflection, "reflection"),
        (sym.permutation.is_on(), conservation.permutation, "permutation"),
    ] {
        if on && !ok {
            return Err(Error::config(format!("{name} symmetry is broken by this Hamiltonian")));
        }
    }
    let dressed = match spec.kind {
        BasisKind::Auto => !fields.is_zero(),
        BasisKind::Bare => false,
        BasisKind::Dressed => true,
    };
    if dressed && (sym.inversion.is_on() || sym.reflection.is_on()) {
        return Err(Error::config("the dressed basis supports permutation symmetry only"));
    }
    if sym.reflection.is_on() && conservation.m_total && target.m_total() != 0 {
        return Err(Error::config("reflection symmetry needs M = 0 when M is conserved"));
    }

    let mut atoms: Vec<AtomStates> = Vec::new();
    let (mut m_conserved, targets_gamma) = (conservation.m_total, lab_axis_angle(theta));
    let mut target_energy;
    if !dressed {
        let sets = [
            bare_set(data, &target.first, spec.delta_n, spec.delta_l)?,
            bare_set(data, &target.second, spec.delta_n, spec.delta_l)?,
        ];
        if homonuclear {
            let [a, b] = sets;
            let set = union(a, b);
            let e = level_energies(data, &set)?;
            atoms.push(AtomStates::bare(set, &e));
        } else {
            for set in sets {
                let e = level_energies(data, &set)?;
                atoms.push(AtomStates::bare(set, &e));
            }
        }
        target_energy = target.energy(data)?;
    } else {
        let (beta, frame_fields) = dressing_frame(&fields_calc);
        m_conserved = conservation.m_total && beta == 0.0;
        let d = &spec.dressing;
        let mk = |t: &StateOne| -> Result<Vec<StateOne>> {
            let mut s = SingleBasisSpec::around(data, t, d.delta_n, d.l_max, Some(d.energy_window))?;
            if let Some(mm) = d.m_max {
                s.m = Some(HalfInteger::from_twice(1).projections_up_to(mm));
            }
            single_atom_basis(data, &s)
        };
        let sets = if homonuclear {
            vec![union(mk(&target.first)?, mk(&target.second)?)]
        } else {
            vec![mk(&target.first)?, mk(&target.second)?]
        };
        for set in sets {
            let sys = SingleAtomSystem::new(ops, set, frame_fields)?;
            let states = sys.diagonalize()?;
            atoms.push(AtomStates { bare: sys.basis, beta, states, dressed: true });
        }
        target_energy = 0.0;
    }
    let slots = if atoms.len() == 1 { [0, 0] } else { [0, 1] };

    // Candidate constituents per slot.
    let filter = |k: usize| -> Vec<usize> {
        let a = &atoms[slots[k]];
        (0..a.states.len())
            .filter(|&i| {
                let s = a.label(i);
                if homonuclear {
                    in_window(s, &target.first, spec.delta_n, spec.delta_l)
                        || in_window(s, &target.second, spec.delta_n, spec.delta_l)
                } else {
                    let t = if k == 0 { &target.first } else { &target.second };
                    in_window(s, t, spec.delta_n, spec.delta_l)
                }
            })
            .collect()
    };
    let cand = [filter(0), filter(1)];

    if dressed {
        // Dressed target energy from the constituents with the largest
        // overlap with each target state.
        let mut e = 0.0;
        for (k, t) in [(0, &target.first), (1, &target.second)] {
            let a = &atoms[slots[k]];
            let best = cand[k]
                .iter()
                .map(|&i| (i, a.overlap_with(i, t, targets_gamma).norm_sqr()))
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .ok_or_else(|| Error::config("dressed basis does not contain the target state"))?;
            e += a.states[best.0].energy;
        }
        target_energy = e;
    }

    // M values reachable from the probe, when M is conserved.
    let probe_m: Option<HashSet<i32>> = m_conserved.then(|| {
        if dressed || theta == 0.0 {
            [target.m_total()].into_iter().collect()
        } else {
            let mut set = HashSet::new();
            for m1 in target.first.j.projections() {
                for m2 in target.second.j.projections() {
                    set.insert((m1 + m2).as_int().unwrap());
                }
            }
            set
        }
    });

    let m_of = |k: usize, i: usize| atoms[slots[k]].states[i].m;
    let mut second: Vec<(f64, usize)> = cand[1].iter().map(|&k| (atoms[slots[1]].states[k].energy, k)).collect();
    second.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut products = Vec::new();
    for &i in &cand[0] {
        let ei = atoms[slots[0]].states[i].energy;
        let lo = target_energy - spec.energy_window - ei;
        let hi = target_energy + spec.energy_window - ei;
        let start = second.partition_point(|x| x.0 < lo);
        for &(ek, k) in &second[start..] {
            if ek > hi {
                break;
            }
            if let Some(ms) = &probe_m {
                let m = (m_of(0, i).unwrap() + m_of(1, k).unwrap()).as_int().unwrap();
                if !ms.contains(&m) {
                    continue;
                }
            }
            products.push((i, k));
        }
    }
    if products.is_empty() {
        return Err(Error::config("pair basis is empty"));
    }

    // Keep only constituents that appear in a product, and reindex.
    let mut used: Vec<Vec<usize>> = vec![Vec::new(); atoms.len()];
    for &(i, k) in &products {
        used[slots[0]].push(i);
        used[slots[1]].push(k);
    }
    let mut remap: Vec<HashMap<usize, usize>> = Vec::new();
    for (a, u) in atoms.iter_mut().zip(used.iter_mut()) {
        u.sort_unstable();
        u.dedup();
        remap.push(u.iter().enumerate().map(|(new, &old)| (old, new)).collect());
        a.retain(u);
    }
    for p in products.iter_mut() {
        *p = (remap[slots[0]][&p.0], remap[slots[1]][&p.1]);
    }
    products.sort_by(|x, y| {
        let ex = atoms[slots[0]].states[x.0].energy + atoms[slots[1]].states[x.1].energy;
        let ey = atoms[slots[0]].states[y.0].energy + atoms[slots[1]].states[y.1].energy;
        ex.total_cmp(&ey).then(x.cmp(y))
    });
    let product_energies: Vec<f64> = products
        .iter()
        .map(|&(i, k)| atoms[slots[0]].states[i].energy + atoms[slots[1]].states[k].energy)
        .collect();
    let index: HashMap<(usize, usize), usize> = products.iter().enumerate().map(|(p, &ik)| (ik, p)).collect();

    let mut basis = PairBasis {
        spec: spec.clone(),
        theta,
        fields: *fields,
        atoms,
        slots,
        products,
        product_energies,
        vectors: Vec::new(),
        blocks: Vec::new(),
        conservation: Conservation { m_total: m_conserved, ..conservation },
        target_energy,
        dressed,
        index,
    };
    symmetrize(&mut basis, sym)?;
    Ok(basis)
}

/// Frame for dressing: the common field axis if it lies in the xz plane,
/// else the calculation frame. Returns the polar angle and the fields
/// expressed in that frame.
fn dressing_frame(fields_calc: &FieldConfig) -> (f64, FieldConfig) {
    if fields_calc.is_zero() {
        return (0.0, *fields_calc);
    }
    if let Some(axis) = fields_calc.common_axis() {
        if let Some(beta) = polar_angle_xz(axis) {
            let mut f = fields_calc.transformed(&rotation_matrix(beta));
            // Remove rounding residue so the frame fields are exactly axial.
            f.electric[0] = 0.0;
            f.electric[1] = 0.0;
            f.magnetic[0] = 0.0;
            f.magnetic[1] = 0.0;
            return (beta, f);
        }
    }
    (0.0, *fields_calc)
}

trait ProjectionsUpTo {
    fn projections_up_to(self, m_max: HalfInteger) -> Vec<HalfInteger>;
}

impl ProjectionsUpTo for HalfInteger {
    /// Half-odd projections with `|m| <= m_max`.
    fn projections_up_to(self, m_max: HalfInteger) -> Vec<HalfInteger> {
        let top = m_max.twice() - (m_max.twice() - 1).rem_euclid(2);
        (-top..=top).step_by(2).map(HalfInteger::from_twice).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Generator {
    Inversion,
    Reflection,
    Permutation,
}

/// Builds symmetry-adapted vectors and blocks for `basis`.
pub fn symmetrize(basis: &mut PairBasis, sym: Symmetries) -> Result<()> {
    let swap_ok = basis.slots[0] == basis.slots[1];
    if (sym.inversion.is_on() || sym.permutation.is_on()) && !swap_ok {
        return Err(Error::config("inversion and permutation symmetry need a shared single-atom basis"));
    }
    if sym.reflection.is_on() && basis.dressed {
        return Err(Error::config("reflection symmetry is not available in the dressed basis"));
    }
    let atoms = &basis.atoms[basis.slots[0]];
    // Mirror partner (m -> -m) for bare constituents.
    let mirror: Vec<Option<usize>> = if sym.reflection.is_on() {
        let pos: HashMap<StateOne, usize> = atoms.bare.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let pos_states: HashMap<usize, usize> =
            atoms.states.iter().enumerate().map(|(i, s)| (s.support[0], i)).collect();
        atoms
            .states
            .iter()
            .map(|s| {
                let b = atoms.bare[s.support[0]];
                pos.get(&b.with_m(-b.m)).and_then(|bi| pos_states.get(bi)).copied()
            })
            .collect()
    } else {
        Vec::new()
    };
    if sym.reflection.is_on() && basis.slots[0] != basis.slots[1] {
        return Err(Error::config("reflection symmetrization requires a shared single-atom basis in this build"));
    }

    let bare = |i: usize| -> StateOne { *atoms.label(i) };
    let apply = |g: Generator, p: usize| -> Result<(usize, i64)> {
        let (i, k) = basis.products[p];
        let (target, sign) = match g {
            Generator::Inversion => {
                let l = bare(i).l + bare(k).l;
                ((k, i), if l % 2 == 0 { -1 } else { 1 })
            }
            Generator::Permutation => ((k, i), -1),
            Generator::Reflection => {
                let (a, b) = (bare(i), bare(k));
                let e = a.l + b.l + (a.m + b.m).as_int().unwrap() - (a.j + b.j).as_int().unwrap();
                let (mi, mk) = (mirror[i], mirror[k]);
                let (Some(mi), Some(mk)) = (mi, mk) else {
                    return Err(Error::config("basis is not closed under reflection"));
                };
                ((mi, mk), if e.rem_euclid(2) == 0 { 1 } else { -1 })
            }
        };
        let q = basis.index.get(&target).copied().ok_or_else(|| Error::config(format!("basis is not closed under {g:?}")))?;
        Ok((q, sign))
    };

    let m_conserved = basis.conservation.m_total;
    let m_of = |p: usize| -> Option<i32> {
        let (i, k) = basis.products[p];
        let a = &basis.atoms[basis.slots[0]].states[i];
        let b = &basis.atoms[basis.slots[1]].states[k];
        match (a.m, b.m) {
            (Some(x), Some(y)) if m_conserved => Some((x + y).as_int().unwrap()),
            _ => None,
        }
    };

    let mut vectors: Vec<BasisVector> = Vec::new();
    for p in 0..basis.products.len() {
        let m = m_of(p);
        let mut gens: Vec<(Generator, SymmetryMode)> = Vec::new();
        if sym.inversion.is_on() {
            gens.push((Generator::Inversion, sym.inversion));
        }
        if sym.reflection.is_on() && (!m_conserved || m == Some(0)) {
            gens.push((Generator::Reflection, sym.reflection));
        }
        if sym.permutation.is_on() {
            gens.push((Generator::Permutation, sym.permutation));
        }
        // Orbit of p; only its smallest member spawns vectors.
        let mut orbit = vec![p];
        let mut k = 0;
        while k < orbit.len() {
            for &(g, _) in &gens {
                let (q, _) = apply(g, orbit[k])?;
                if !orbit.contains(&q) {
                    orbit.push(q);
                }
            }
            k += 1;
        }
        if orbit.iter().any(|&q| q < p) {
            continue;
        }
        // Every sector combination.
        let mut combos: Vec<Vec<i8>> = vec![Vec::new()];
        for &(_, mode) in &gens {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    mode.sectors().iter().map(move |&s| {
                        let mut c = c.clone();
                        c.push(s);
                        c
                    })
                })
                .collect();
        }
        for combo in combos {
            let mut v: BTreeMap<usize, i64> = [(p, 1)].into_iter().collect();
            for (&(g, _), &s) in gens.iter().zip(&combo) {
                let mut next = v.clone();
                for (&q, &c) in &v {
                    let (q2, sign) = apply(g, q)?;
                    *next.entry(q2).or_insert(0) += s as i64 * sign * c;
                }
                next.retain(|_, c| *c != 0);
                v = next;
            }
            if v.is_empty() {
                continue;
            }
            let norm = (v.values().map(|c| (c * c) as f64).sum::<f64>()).sqrt();
            let mut tags = SectorTags::default();
            for (&(g, _), &s) in gens.iter().zip(&combo) {
                match g {
                    Generator::Inversion => tags.inversion = Some(s),
                    Generator::Reflection => tags.reflection = Some(s),
                    Generator::Permutation => tags.permutation = Some(s),
                }
            }
            vectors.push(BasisVector {
                components: v.into_iter().map(|(q, c)| (q, c as f64 / norm)).collect(),
                tags,
                m_total: m,
                energy: basis.product_energies[p],
            });
        }
    }
    let mut grouped: BTreeMap<BlockKey, Vec<BasisVector>> = BTreeMap::new();
    for v in vectors {
        grouped.entry(BlockKey { tags: v.tags, m_total: v.m_total }).or_default().push(v);
    }
    basis.vectors.clear();
    basis.blocks.clear();
    for (key, mut vs) in grouped {
        vs.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.components[0].0.cmp(&b.components[0].0)));
        let start = basis.vectors.len();
        basis.vectors.extend(vs);
        basis.blocks.push(Block { key, range: start..basis.vectors.len() });
    }
    Ok(())
}

/// `sqrt(C(k1+k2, k1+q) C(k1+k2, k2+q))`.
pub fn multipole_weight(k1: i32, k2: i32, q: i32) -> f64 {
    fn binom(n: i32, k: i32) -> f64 {
        if k < 0 || k > n {
            return 0.0;
        }
        (1..=k).fold(1.0, |acc, i| acc * (n - k + i) as f64 / i as f64)
    }
    (binom(k1 + k2, k1 + q) * binom(k1 + k2, k2 + q)).sqrt()
}

/// `<bra| V_k1k2 |ket>` between bare calculation-frame product states, in
/// atomic units (`e^2 a0^(k1+k2)`).
pub fn multipole_coupling(ops: &Operators, bra: &StateTwo, ket: &StateTwo, k1: i32, k2: i32) -> Result<f64> {
    let q_min = k1.min(k2);
    let mut terms = Vec::new();
    for q in -q_min..=q_min {
        let a = ops.multipole_element(&bra.first, &ket.first, k1, q)?;
        if a == 0.0 {
            continue;
        }
        let b = ops.multipole_element(&bra.second, &ket.second, k2, -q)?;
        terms.push(multipole_weight(k1, k2, q) * (a * b));
    }
    let sign = if k2 % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * terms.iter().sum::<f64>())
}

/// Exact floating-point accumulator (Shewchuk partials). A sum whose exact
/// value is zero returns exactly zero.
#[derive(Clone, Debug, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for k in 0..self.partials.len() {
            let mut y = self.partials[k];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        if x != 0.0 {
            self.partials.push(x);
        }
    }

    pub fn value(&self) -> f64 {
        self.partials.iter().rev().sum()
    }
}

/// Nonzero `(column, value)` entries of each row.
type SparseRows = Vec<Vec<(usize, C64)>>;

/// Calculation-frame multipole matrices of one constituent set.
struct AtomMultipoles {
    /// `rows[k][q + k][i]`: nonzero `(j, <i|p_kq|j>)`.
    rows: BTreeMap<i32, Vec<SparseRows>>,
    dense: bool,
}

impl AtomMultipoles {
    fn build(ops: &Operators, atom: &AtomStates, kappas: &[i32]) -> Result<Self> {
        let n = atom.states.len();
        let mut rows = BTreeMap::new();
        for &k in kappas {
            let mut per_q = Vec::new();
            if !atom.dressed {
                for q in -k..=k {
                    let mut r = vec![Vec::new(); n];
                    for (i, ri) in r.iter_mut().enumerate() {
                        let a = &atom.bare[atom.states[i].support[0]];
                        for j in 0..n {
                            let b = &atom.bare[atom.states[j].support[0]];
                            if multipole_allowed(a, b, k, q) {
                                let v = ops.multipole_element(a, b, k, q)?;
                                if v != 0.0 {
                                    ri.push((j, C64::new(v, 0.0)));
                                }
                            }
                        }
                    }
                    per_q.push(r);
                }
            } else {
                let nb = atom.bare.len();
                let mut coef = DMatrix::<C64>::zeros(nb, n);
                for (c, s) in atom.states.iter().enumerate() {
                    for (&b, &v) in s.support.iter().zip(&s.coeffs) {
                        coef[(b, c)] = v;
                    }
                }
                // Frame-component matrices between dressed states.
                let mut frame = Vec::new();
                for qp in -k..=k {
                    let mut pc = DMatrix::<C64>::zeros(nb, n);
                    for a in 0..nb {
                        for b in 0..nb {
                            let (sa, sb) = (&atom.bare[a], &atom.bare[b]);
                            if !multipole_allowed(sa, sb, k, qp) {
                                continue;
                            }
                            let v = ops.multipole_element(sa, sb, k, qp)?;
                            if v == 0.0 {
                                continue;
                            }
                            for c in 0..n {
                                let x = coef[(b, c)];
                                if x != ZERO {
                                    pc[(a, c)] += x * v;
                                }
                            }
                        }
                    }
                    frame.push(coef.adjoint() * pc);
                }
                let d = wigner_d_matrix(HalfInteger::from_int(k), atom.beta);
                for q in -k..=k {
                    let mut m = DMatrix::<C64>::zeros(n, n);
                    for qp in -k..=k {
                        let w = d[((q + k) as usize, (qp + k) as usize)];
                        if w != 0.0 {
                            m += &frame[(qp + k) as usize] * C64::new(w, 0.0);
                        }
                    }
                    let r = (0..n)
                        .map(|i| (0..n).filter(|&j| m[(i, j)] != ZERO).map(|j| (j, m[(i, j)])).collect())
                        .collect();
                    per_q.push(r);
                }
            }
            rows.insert(k, per_q);
        }
        Ok(AtomMultipoles { rows, dense: atom.dressed })
    }

    fn row(&self, k: i32, q: i32, i: usize) -> &[(usize, C64)] {
        &self.rows[&k][(q + k) as usize][i]
    }
}

/// Multipole interaction in the product basis: `H_int(R) = sum C / R^rho`
/// with `C` in GHz and `R` in Bohr radii.
#[derive(Clone, Debug)]
pub struct InteractionOperator {
    pub order: u32,
    /// `(k1, k2) -> C_k1k2`.
    pub terms: BTreeMap<(i32, i32), OperatorMatrix>,
}

impl InteractionOperator {
    pub fn build(ops: &Operators, basis: &PairBasis) -> Result<Self> {
        let order = basis.spec.order as i32;
        let kappas: Vec<i32> = (1..=order - 2).collect();
        let mut mp: Vec<AtomMultipoles> = Vec::new();
        for a in &basis.atoms {
            mp.push(AtomMultipoles::build(ops, a, &kappas)?);
        }
        let m1 = &mp[basis.slots[0]];
        let m2 = &mp[basis.slots[1]];
        let scale = units::hartree_to_ghz(1.0);
        let np = basis.products.len();
        let mut terms = BTreeMap::new();
        for k1 in 1..=order - 2 {
            for k2 in 1..=order - 1 - k1 {
                let sign = if k2 % 2 == 0 { 1.0 } else { -1.0 };
                let qmax = k1.min(k2);
                let w: Vec<f64> = (-qmax..=qmax).map(|q| sign * multipole_weight(k1, k2, q) * scale).collect();
                let mut op = OperatorMatrix::zeros(np);
                if m1.dense || m2.dense {
                    // Column scan: every (row, col) pair in the basis.
                    let dense = |m: &AtomMultipoles, k: i32| -> Vec<DMatrix<C64>> {
                        let n = m.rows[&k][0].len();
                        (-k..=k)
                            .map(|q| {
                                let mut d = DMatrix::zeros(n, n);
                                for i in 0..n {
                                    for &(j, v) in m.row(k, q, i) {
                                        d[(i, j)] = v;
                                    }
                                }
                                d
                            })
                            .collect()
                    };
                    let d1 = dense(m1, k1);
                    let d2 = dense(m2, k2);
                    for (r, &(i, k)) in basis.products.iter().enumerate() {
                        for (c, &(ip, kp)) in basis.products.iter().enumerate().skip(r) {
                            let term = |q: i32| -> C64 {
                                let a = d1[(q + k1) as usize][(i, ip)];
                                if a == ZERO {
                                    return ZERO;
                                }
                                let b = d2[(-q + k2) as usize][(k, kp)];
                                (a * b) * w[(q + qmax) as usize]
                            };
                            let mut v = term(0);
                            let mut side = ZERO;
                            for q in 1..=qmax {
                                side += term(-q) + term(q);
                            }
                            v += side;
                            if v != ZERO {
                                op.add_hermitian(r, c, v);
                            }
                        }
                    }
                } else {
                    for (r, &(i, k)) in basis.products.iter().enumerate() {
                        for q in -qmax..=qmax {
                            for &(ip, a) in m1.row(k1, q, i) {
                                for &(kp, b) in m2.row(k2, -q, k) {
                                    if let Some(&c) = basis.index.get(&(ip, kp)) {
                                        if c >= r {
                                            op.add_hermitian(r, c, (a * b) * w[(q + qmax) as usize]);
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                op.compress();
                terms.insert((k1, k2), op);
            }
        }
        Ok(InteractionOperator { order: order as u32, terms })
    }

    /// Sum of all terms of order `rho`.
    pub fn order_term(&self, rho: u32) -> OperatorMatrix {
        let dim = self.terms.values().next().map_or(0, |m| m.dim());
        let mut out = OperatorMatrix::zeros(dim);
        for (&(k1, k2), m) in &self.terms {
            if (k1 + k2 + 1) as u32 == rho {
                out.axpy(C64::new(1.0, 0.0), m);
            }
        }
        out.compress();
        out
    }

    /// `H_int` at `r_bohr`.
    pub fn at(&self, r_bohr: f64) -> OperatorMatrix {
        let dim = self.terms.values().next().map_or(0, |m| m.dim());
        let mut out = OperatorMatrix::zeros(dim);
        for (&(k1, k2), m) in &self.terms {
            out.axpy(C64::new(r_bohr.powi(-(k1 + k2 + 1)), 0.0), m);
        }
        out.compress();
        out
    }
}

/// Atom-field terms `V ⊗ 1 + 1 ⊗ V` in the bare product basis, calculation
/// frame, GHz. Zero for dressed bases, whose energies already contain them.
pub fn pair_field_operator(ops: &Operators, basis: &PairBasis) -> Result<OperatorMatrix> {
    let np = basis.products.len();
    let mut op = OperatorMatrix::zeros(np);
    if basis.dressed || basis.fields.is_zero() {
        return Ok(op);
    }
    let fields_calc = basis.fields.transformed(&rotation_matrix(basis.theta));
    let mut singles = Vec::new();
    for a in &basis.atoms {
        let states: Vec<StateOne> = a.states.iter().map(|s| a.bare[s.support[0]]).collect();
        let v = field_operator(ops, &states, &fields_calc)?;
        let mut rows = vec![Vec::new(); states.len()];
        for &(i, j, x) in v.entries() {
            rows[i].push((j, x));
        }
        singles.push(rows);
    }
    let (v1, v2) = (&singles[basis.slots[0]], &singles[basis.slots[1]]);
    for (r, &(i, k)) in basis.products.iter().enumerate() {
        for &(ip, x) in &v1[i] {
            if let Some(&c) = basis.index.get(&(ip, k)) {
                op.add(r, c, x);
            }
        }
        for &(kp, x) in &v2[k] {
            if let Some(&c) = basis.index.get(&(i, kp)) {
                op.add(r, c, x);
            }
        }
    }
    op.compress();
    Ok(op)
}

/// Row-compressed product-space operator for projections.
struct Rows(Vec<Vec<(usize, C64)>>);

impl Rows {
    fn of(op: &OperatorMatrix) -> Self {
        let mut rows = vec![Vec::new(); op.dim()];
        for &(i, j, v) in op.entries() {
            rows[i].push((j, v));
        }
        Rows(rows)
    }
}

/// `<u| op |v>` for the vectors in `rows` and `cols`, summed exactly.
pub fn project(op: &OperatorMatrix, basis: &PairBasis, rows: &[usize], cols: &[usize]) -> DMatrix<C64> {
    project_rows(&Rows::of(op), basis, rows, cols)
}

fn project_rows(h: &Rows, basis: &PairBasis, rows: &[usize], cols: &[usize]) -> DMatrix<C64> {
    let mut lookup: HashMap<usize, Vec<(usize, f64)>> = HashMap::new();
    for (r, &u) in rows.iter().enumerate() {
        for &(p, c) in &basis.vectors[u].components {
            lookup.entry(p).or_default().push((r, c));
        }
    }
    let mut out = DMatrix::zeros(rows.len(), cols.len());
    for (c, &v) in cols.iter().enumerate() {
        let mut acc: BTreeMap<usize, (ExactSum, ExactSum)> = BTreeMap::new();
        for &(p, cv) in &basis.vectors[v].components {
            // Column p of a Hermitian operator is the conjugate of row p.
            for &(q, x) in &h.0[p] {
                if let Some(targets) = lookup.get(&q) {
                    for &(r, cu) in targets {
                        let s = cu * cv;
                        let e = acc.entry(r).or_default();
                        e.0.add(s * x.re);
                        e.1.add(-(s * x.im));
                    }
                }
            }
        }
        for (r, (re, im)) in acc {
            out[(r, c)] = C64::new(re.value(), im.value());
        }
    }
    out
}

/// Dense per-block operators, ready for evaluation at any `R`.
#[derive(Clone, Debug)]
pub struct BlockOperators {
    pub key: BlockKey,
    pub range: std::ops::Range<usize>,
    /// Unperturbed (or dressed) energies relative to the target pair
    /// energy, plus bare field terms.
    pub h0: DMatrix<C64>,
    /// `(rho, C_rho)`.
    pub terms: Vec<(u32, DMatrix<C64>)>,
}

impl BlockOperators {
    /// `H(R)` with `R` in Bohr radii.
    pub fn at(&self, r_bohr: f64) -> DMatrix<C64> {
        let mut h = self.h0.clone();
        for (rho, c) in &self.terms {
            h += c * C64::new(r_bohr.powi(-(*rho as i32)), 0.0);
        }
        h
    }
}

/// Total Hamiltonian of one basis, held per block.
#[derive(Clone, Debug)]
pub struct PairHamiltonian {
    pub blocks: Vec<BlockOperators>,
    /// Le Roy radius in meters.
    pub le_roy_radius: f64,
}

/// Assembles the blocks of `H0 + H_int(R) + field terms`.
pub fn assemble_blocks(
    basis: &PairBasis,
    interaction: &InteractionOperator,
    field_terms: &OperatorMatrix,
    le_roy_radius: f64,
) -> PairHamiltonian {
    let mut diag = OperatorMatrix::zeros(basis.products.len());
    let shifted: Vec<f64> = basis.product_energies.iter().map(|e| e - basis.target_energy).collect();
    diag.add_diagonal(&shifted);
    diag.axpy(C64::new(1.0, 0.0), field_terms);
    diag.compress();
    let h0 = Rows::of(&diag);
    let orders: Vec<u32> = (3..=interaction.order).collect();
    let per_order: Vec<(u32, Rows)> = orders.iter().map(|&rho| (rho, Rows::of(&interaction.order_term(rho)))).collect();
    let blocks = basis
        .blocks
        .iter()
        .map(|b| {
            let idx: Vec<usize> = b.range.clone().collect();
            BlockOperators {
                key: b.key.clone(),
                range: b.range.clone(),
                h0: project_rows(&h0, basis, &idx, &idx),
                terms: per_order.iter().map(|(rho, r)| (*rho, project_rows(r, basis, &idx, &idx))).collect(),
            }
        })
        .collect();
    PairHamiltonian { blocks, le_roy_radius }
}

/// Full Hamiltonian at separation `r_m` (meters) in the symmetry-adapted
/// basis, with block structure attached. The flag is set when `r_m` lies
/// inside the Le Roy radius.
pub fn assemble_total(ham: &PairHamiltonian, dim: usize, r_m: f64) -> (OperatorMatrix, bool) {
    let r = units::meters_to_bohr(r_m);
    let mut op = OperatorMatrix::zeros(dim);
    for b in &ham.blocks {
        let m = b.at(r);
        let off = b.range.start;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != ZERO {
                    op.add(off + i, off + j, m[(i, j)]);
                }
            }
        }
    }
    op.blocks = Some(ham.blocks.iter().map(|b| b.range.clone().collect()).collect());
    (op, r_m <= ham.le_roy_radius)
}

/// `R_LR = 2 (sqrt(<r^2>_1) + sqrt(<r^2>_2))` in meters.
pub fn le_roy_radius(ops: &Operators, a: &StateOne, b: &StateOne) -> Result<f64> {
    let ra = ops.radial(&a.level(), &a.level(), 2)?.sqrt();
    let rb = ops.radial(&b.level(), &b.level(), 2)?.sqrt();
    Ok(units::bohr_to_meters(2.0 * (ra + rb)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_for_dipole_dipole() {
        assert_eq!(multipole_weight(1, 1, -1), 1.0);
        assert_eq!(multipole_weight(1, 1, 0), 2.0);
        assert_eq!(multipole_weight(1, 1, 1), 1.0);
        // Symmetric under q -> -q when k1 = k2, and in general under
        // (k1, k2, q) -> (k2, k1, -q).
        assert_eq!(multipole_weight(1, 2, 1), multipole_weight(2, 1, -1));
    }

    #[test]
    fn exact_sum_cancels() {
        let mut s = ExactSum::default();
        for x in [0.1, 1e16, -0.1, 3.3, -1e16, -3.3] {
            s.add(x);
        }
        assert_eq!(s.value(), 0.0);
        let mut t = ExactSum::default();
        for x in [1e-20, 1.0, -1.0] {
            t.add(x);
        }
        assert_eq!(t.value(), 1e-20);
    }

    #[test]
    fn projections_up_to() {
        let v = HalfInteger::HALF.projections_up_to(HalfInteger::from_twice(3));
        assert_eq!(v.iter().map(|m| m.twice()).collect::<Vec<_>>(), vec![-3, -1, 1, 3]);
    }
}
