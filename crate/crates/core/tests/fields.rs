use rydpair::fields::{
    diamagnetic_operator, field_map, paramagnetic_operator, single_atom_basis, stark_operator, zeeman_operator, FieldConfig,
    FieldKind, SingleAtomSystem, SingleBasisSpec,
};
use rydpair::linalg::{eigvalsh, OperatorMatrix};
use rydpair::operators::Operators;
use rydpair::species::StateOne;
use rydpair::units;
use rydpair::HalfInteger;

fn state(species: &str, term: &str, m: &str) -> StateOne {
    StateOne::parse(species, term, m).unwrap()
}

fn basis_around(ops: &Operators, target: &StateOne, delta_n: i32, window: f64, m: Option<&[f64]>) -> Vec<StateOne> {
    let mut spec = SingleBasisSpec::around(ops.data(), target, delta_n, None, Some(window)).unwrap();
    spec.m = m.map(|ms| ms.iter().map(|&v| HalfInteger::from_f64(v).unwrap()).collect());
    single_atom_basis(ops.data(), &spec).unwrap()
}

fn energy(ops: &Operators, s: &StateOne) -> f64 {
    ops.data().level_energy(&s.level()).unwrap().ghz()
}

fn max_entry(op: &OperatorMatrix) -> f64 {
    op.entries().iter().map(|e| e.2.norm()).fold(0.0, f64::max)
}

#[test]
fn zero_field_gives_zero_operator() {
    let ops = Operators::builtin();
    let basis = basis_around(&ops, &state("Rb", "60s1/2", "1/2"), 1, 40.0, None);
    assert_eq!(max_entry(&stark_operator(&ops, &basis, [0.0; 3]).unwrap()), 0.0);
    assert_eq!(max_entry(&zeeman_operator(&ops, &basis, [0.0; 3], true).unwrap()), 0.0);
}

#[test]
fn axial_fields_conserve_m() {
    let ops = Operators::builtin();
    let basis = basis_around(&ops, &state("Rb", "60p3/2", "1/2"), 1, 60.0, None);
    let e = stark_operator(&ops, &basis, [0.0, 0.0, 2.0]).unwrap();
    let b = zeeman_operator(&ops, &basis, [0.0, 0.0, 1e-3], true).unwrap();
    for op in [&e, &b] {
        assert!(max_entry(op) > 0.0);
        for &(i, j, v) in op.entries() {
            assert!(basis[i].m == basis[j].m || v.norm() == 0.0, "{} <-> {}", basis[i], basis[j]);
        }
    }
    let tilted = stark_operator(&ops, &basis, [1.0, 0.0, 1.0]).unwrap();
    assert!(tilted.entries().iter().any(|&(i, j, v)| basis[i].m != basis[j].m && v.norm() > 0.0));
}

#[test]
fn operators_are_hermitian() {
    let ops = Operators::builtin();
    let basis = basis_around(&ops, &state("Rb", "55d5/2", "1/2"), 1, 60.0, None);
    let e = stark_operator(&ops, &basis, [0.3, -0.7, 1.1]).unwrap();
    let b = zeeman_operator(&ops, &basis, [2e-3, 1e-3, -3e-3], true).unwrap();
    for op in [&e, &b] {
        assert!(op.hermiticity_defect() <= 1e-14 * max_entry(op), "{}", op.hermiticity_defect());
        assert!(!op.is_real());
    }
}

#[test]
fn two_level_stark_shift() {
    let ops = Operators::builtin();
    let s = state("Rb", "60s1/2", "1/2");
    let p = state("Rb", "60p1/2", "1/2");
    let basis = vec![s, p];
    let field = 10.0;
    let v = stark_operator(&ops, &basis, [0.0, 0.0, field]).unwrap().get(0, 1).norm();
    let (es, ep) = (energy(&ops, &s), energy(&ops, &p));
    let sys = SingleAtomSystem::new(&ops, basis, FieldConfig::electric([0.0, 0.0, field])).unwrap();
    let states = sys.diagonalize().unwrap();
    let half = 0.5 * (ep - es);
    let exact = 0.5 * (es + ep) - (half * half + v * v).sqrt();
    assert!((states[0].energy - exact).abs() <= 1e-12 * exact.abs());
    let shift = states[0].energy - es;
    assert!(shift < 0.0);
    assert!((shift / (-v * v / (ep - es)) - 1.0).abs() < 1e-3, "weak-field limit");
}

#[test]
fn electron_spin_zeeman_shift() {
    let ops = Operators::builtin();
    let b = 1e-3;
    for m in [0.5, -0.5] {
        let s = StateOne::new("Rb", 60, 0, 0.5, m).unwrap();
        let op = paramagnetic_operator(&ops, &[s], [0.0, 0.0, b]).unwrap();
        let expected = ops.data().g_s() * m * units::joule_to_ghz(units::BOHR_MAGNETON) * b;
        assert!((op.get(0, 0).re / expected - 1.0).abs() < 1e-12, "m={m}");
    }
}

#[test]
fn lande_factor_for_p_states() {
    let ops = Operators::builtin();
    let b = 1e-3;
    let (gl, gs) = (ops.data().g_l(), ops.data().g_s());
    for (tj, g) in [(1, (4.0 * gl - gs) / 3.0), (3, (2.0 * gl + gs) / 3.0)] {
        let s = StateOne::new("Rb", 60, 1, tj as f64 / 2.0, 0.5).unwrap();
        let op = paramagnetic_operator(&ops, &[s], [0.0, 0.0, b]).unwrap();
        let expected = g * 0.5 * units::joule_to_ghz(units::BOHR_MAGNETON) * b;
        assert!((op.get(0, 0).re / expected - 1.0).abs() < 1e-9, "j={tj}/2: {} vs {expected}", op.get(0, 0).re);
    }
}

#[test]
fn diamagnetic_s_state_matches_r2() {
    let ops = Operators::builtin();
    let s = state("Rb", "60s1/2", "1/2");
    let b = 0.01;
    let op = diamagnetic_operator(&ops, &[s], [0.0, 0.0, b]).unwrap();
    let r2 = ops.radial(&s.level(), &s.level(), 2).unwrap() * units::BOHR_RADIUS.powi(2);
    // <x^2 + y^2> = 2/3 <r^2> for l = 0.
    let expected = units::joule_to_ghz(units::ELEMENTARY_CHARGE.powi(2) * b * b / (8.0 * units::ELECTRON_MASS) * (2.0 / 3.0) * r2);
    assert!((op.get(0, 0).re / expected - 1.0).abs() < 1e-10, "{} vs {expected}", op.get(0, 0).re);
}

#[test]
fn diamagnetic_operator_is_positive_semidefinite() {
    let ops = Operators::builtin();
    let target = state("Rb", "40d5/2", "1/2");
    let mut spec = SingleBasisSpec::around(ops.data(), &target, 1, Some(4), Some(200.0)).unwrap();
    spec.m = None;
    let basis = single_atom_basis(ops.data(), &spec).unwrap();
    let op = diamagnetic_operator(&ops, &basis, [1e-2, 0.0, 2e-2]).unwrap();
    let vals = eigvalsh(&op.to_dense()).unwrap();
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(vals[0] >= -1e-12 * scale, "lowest {} of {scale}", vals[0]);
}

#[test]
fn diamagnetism_has_no_linear_term() {
    let ops = Operators::builtin();
    let s = state("Rb", "60s1/2", "1/2");
    let basis = basis_around(&ops, &s, 1, 30.0, Some(&[0.5]));
    let scan = [0.0, 1e-3, 2e-3];
    let with = field_map(&ops, &basis, FieldKind::Magnetic, [0.0, 0.0, 1.0], true, &scan).unwrap();
    let without = field_map(&ops, &basis, FieldKind::Magnetic, [0.0, 0.0, 1.0], false, &scan).unwrap();
    let i = basis.iter().position(|b| *b == s).unwrap();
    let pick = |pts: &[rydpair::Result<rydpair::fields::FieldMapPoint>], k: usize| {
        let p = pts[k].as_ref().unwrap();
        let c = p.labels.iter().position(|&l| l == i).unwrap();
        p.energies[c]
    };
    let d1 = pick(&with, 1) - pick(&without, 1);
    let d2 = pick(&with, 2) - pick(&without, 2);
    assert!(d1 > 0.0, "diamagnetism raises energies");
    assert!((d2 / d1 - 4.0).abs() < 1e-3, "quadratic in B: ratio {}", d2 / d1);
}

#[test]
fn hydrogen_n2_linear_stark_effect() {
    let ops = Operators::builtin();
    let basis: Vec<StateOne> = [(0, 0.5), (1, 0.5), (1, 1.5)]
        .iter()
        .map(|&(l, j)| StateOne::new("H", 2, l, j, 0.5).unwrap())
        .collect();
    let field = 1e9;
    let sys = SingleAtomSystem::new(&ops, basis.clone(), FieldConfig::electric([0.0, 0.0, field])).unwrap();
    let mut vals: Vec<f64> = sys.diagonalize().unwrap().iter().map(|s| s.energy - energy(&ops, &basis[0])).collect();
    vals.sort_by(f64::total_cmp);
    let unit = units::dipole_field_ghz(field);
    // Fine structure shifts the levels by at most a few 10 GHz.
    let tol = 100.0 / (3.0 * unit);
    assert!((vals[0] / unit + 3.0).abs() < tol, "{}", vals[0] / unit);
    assert!((vals[1] / unit).abs() < tol, "{}", vals[1] / unit);
    assert!((vals[2] / unit - 3.0).abs() < tol, "{}", vals[2] / unit);
}

#[test]
fn sodium_n42_stark_fan() {
    let ops = Operators::builtin();
    let basis: Vec<StateOne> = {
        let spec = SingleBasisSpec {
            species: rydpair::species::Species::new("Na"),
            n_min: 39,
            n_max: 45,
            l_max: None,
            m: Some(vec![HalfInteger::HALF]),
            energy_window: None,
        };
        single_atom_basis(ops.data(), &spec).unwrap()
    };
    let manifold: Vec<usize> = (0..basis.len()).filter(|&i| basis[i].n == 42 && basis[i].l >= 3).collect();
    let scan = [0.0, 100.0, 200.0];
    let pts = field_map(&ops, &basis, FieldKind::Electric, [0.0, 0.0, 1.0], false, &scan).unwrap();
    // Extreme states of the hydrogenic part of the manifold.
    let edges = |k: usize| {
        let p = pts[k].as_ref().unwrap();
        let es: Vec<f64> = (0..p.energies.len()).filter(|&c| manifold.contains(&p.labels[c])).map(|c| p.energies[c]).collect();
        (es.iter().cloned().fold(f64::MAX, f64::min), es.iter().cloned().fold(f64::MIN, f64::max))
    };
    let ((lo0, hi0), (lo1, hi1), (lo2, hi2)) = (edges(0), edges(1), edges(2));
    // Zero field: only fine structure and small high-l defects spread the manifold.
    assert!(hi0 - lo0 < 0.5, "zero-field width {}", hi0 - lo0);
    // Linear Stark effect of the extreme states: +/- 3/2 n (n - 1) e a0 E.
    let slope = 1.5 * 42.0 * 41.0 * units::dipole_field_ghz(1.0);
    let up = (hi2 - hi1) / 100.0;
    let down = (lo1 - lo2) / 100.0;
    assert!((up / slope - 1.0).abs() < 0.1, "upper slope {up} vs {slope}");
    assert!((down / slope - 1.0).abs() < 0.1, "lower slope {down} vs {slope}");
    // Isolated low-l level: quadratic shift, downward.
    let s = basis.iter().position(|b| b.n == 42 && b.l == 0).unwrap();
    let e_s = |k: usize| {
        let p = pts[k].as_ref().unwrap();
        p.energies[p.labels.iter().position(|&l| l == s).unwrap()]
    };
    let (d1, d2) = (e_s(1) - e_s(0), e_s(2) - e_s(0));
    assert!(d1 < 0.0 && d2 < 0.0);
    assert!((d2 / d1 - 4.0).abs() < 0.05, "quadratic: {}", d2 / d1);
}

#[test]
fn polarizability_converges_with_basis() {
    let ops = Operators::builtin();
    let s = state("Rb", "60s1/2", "1/2");
    let field = 10.0;
    let shift = |dn: i32| {
        let basis = basis_around(&ops, &s, dn, 200.0, Some(&[0.5]));
        let i = basis.iter().position(|b| *b == s).unwrap();
        let sys = SingleAtomSystem::new(&ops, basis, FieldConfig::electric([0.0, 0.0, field])).unwrap();
        let states = sys.diagonalize().unwrap();
        let best = states.iter().max_by(|a, b| a.coefficient(i).norm_sqr().total_cmp(&b.coefficient(i).norm_sqr())).unwrap();
        best.energy - energy(&ops, &s)
    };
    let (a, b, c) = (shift(1), shift(2), shift(3));
    assert!(a < 0.0);
    assert!((c - b).abs() < (b - a).abs());
    assert!((c / b - 1.0).abs() < 0.01, "{a} {b} {c}");
}

#[test]
fn config_rejects_non_finite_fields() {
    assert!(FieldConfig::electric([f64::NAN, 0.0, 0.0]).validate().is_err());
    assert!(FieldConfig::magnetic([0.0, f64::INFINITY, 0.0], true).validate().is_err());
    assert!(FieldConfig::default().is_zero());
}
