use rydpair::fields::FieldConfig;
use rydpair::operators::Operators;
use rydpair::pair::{multipole_coupling, BasisSpec, StateTwo, SymmetryMode};
use rydpair::solver::{
    admixture_cut, converge_basis, frequency_spectrum, log_grid, solve_curves, time_evolution, PairSystem, Relaxation,
    SolveOptions,
};
use rydpair::species::StateOne;
use rydpair::units;

fn state(species: &str, term: &str, m: &str) -> StateOne {
    StateOne::parse(species, term, m).unwrap()
}

fn rb60s(dn: i32, dl: i32, window: f64) -> BasisSpec {
    let s = state("Rb", "60s1/2", "1/2");
    let mut spec = BasisSpec::new(StateTwo::new(s, s), dn, dl);
    spec.energy_window = window;
    spec
}

#[test]
fn resonant_exchange_evolution_matches_closed_form() {
    let ops = Operators::builtin();
    let s = state("Rb", "60s1/2", "1/2");
    let p = state("Rb", "60p1/2", "1/2");
    let mut spec = BasisSpec::new(StateTwo::new(s, p), 0, 1);
    spec.energy_window = 1e-3;
    let sys = PairSystem::build(&ops, &spec, &FieldConfig::default(), 0.0).unwrap();
    let r_m = 8e-6;
    let c3 = units::hartree_to_ghz(multipole_coupling(&ops, &StateTwo::new(s, p), &StateTwo::new(p, s), 1, 1).unwrap());
    let v = (c3 / units::meters_to_bohr(r_m).powi(3)).abs();
    let dec = sys.decompose(r_m).unwrap();
    let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.005).collect();
    for (t, p) in times.iter().zip(time_evolution(&dec, &times)) {
        let exact = (2.0 * std::f64::consts::PI * v * 1e3 * t).cos().powi(2);
        assert!((p - exact).abs() < 1e-10, "t={t}: {p} vs {exact}");
    }
    let lines = frequency_spectrum(&dec, 1e-6);
    assert_eq!(lines.len(), 1);
    assert!((lines[0].freq_mhz / (2e3 * v) - 1.0).abs() < 1e-10);
}

#[test]
fn probe_curve_is_stable_under_grid_refinement() {
    let ops = Operators::builtin();
    let sys = PairSystem::build(&ops, &rb60s(1, 1, 20.0), &FieldConfig::default(), 0.0).unwrap();
    let coarse = log_grid(2e-6, 8e-6, 11).unwrap();
    let fine = log_grid(2e-6, 8e-6, 21).unwrap();
    let a = solve_curves(&sys, &coarse, &SolveOptions::default()).unwrap();
    let b = solve_curves(&sys, &fine, &SolveOptions::default()).unwrap();
    let (pa, pb) = (a.probe_curve(), b.probe_curve());
    for i in 0..coarse.len() {
        assert!((coarse[i] - fine[2 * i]).abs() < 1e-18);
        assert_eq!(pa[i], pb[2 * i]);
    }
    // The tracked curve carrying the probe at large R keeps its identity.
    let id_at = |c: &rydpair::solver::PotentialCurves, ir: usize| {
        c.records(0.0).into_iter().filter(|rec| rec.r_m == c.r[ir]).max_by(|x, y| x.overlap.total_cmp(&y.overlap)).unwrap().curve_id
    };
    assert_eq!(id_at(&a, coarse.len() - 1), id_at(&a, coarse.len() - 2));
    assert_eq!(id_at(&b, fine.len() - 1), id_at(&b, fine.len() - 3));
}

#[test]
fn linked_and_unlinked_curves_share_spectra() {
    let ops = Operators::builtin();
    let sys = PairSystem::build(&ops, &rb60s(1, 1, 20.0), &FieldConfig::default(), 0.0).unwrap();
    let grid = log_grid(1.5e-6, 4e-6, 9).unwrap();
    let linked = solve_curves(&sys, &grid, &SolveOptions::default()).unwrap();
    let plain = solve_curves(&sys, &grid, &SolveOptions { link: false, ..Default::default() }).unwrap();
    for ir in 0..grid.len() {
        let mut x = linked.points_at(ir);
        let mut y = plain.points_at(ir);
        x.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        y.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        assert_eq!(x, y);
    }
    assert!(linked.failures.is_empty());
}

#[test]
fn weights_sum_to_probe_norm() {
    let ops = Operators::builtin();
    let mut spec = rb60s(1, 2, 25.0);
    spec.symmetries.inversion = SymmetryMode::All;
    let sys = PairSystem::build(&ops, &spec, &FieldConfig::default(), 0.8).unwrap();
    for r in [1e-6, 3e-6, 10e-6] {
        let d = sys.decompose(r).unwrap();
        assert!((d.total_weight() - sys.probe_norm()).abs() < 1e-12);
        assert!(d.weights.iter().all(|&w| (0.0..=1.0 + 1e-12).contains(&w)));
    }
}

#[test]
fn admixture_vanishes_far_from_the_target() {
    let ops = Operators::builtin();
    let sys = PairSystem::build(&ops, &rb60s(1, 1, 20.0), &FieldConfig::default(), 0.0).unwrap();
    let grid = log_grid(5e-6, 10e-6, 5).unwrap();
    let curves = solve_curves(&sys, &grid, &SolveOptions { link: false, ..Default::default() }).unwrap();
    for (_, eps) in admixture_cut(&curves, -50.0, 0.2) {
        assert_eq!(eps, 0.0);
    }
    let near = admixture_cut(&curves, 0.0, 0.2);
    assert!(near.iter().all(|&(_, e)| e > 0.9));
}

#[test]
fn convergence_stops_when_curve_settles() {
    let ops = Operators::builtin();
    let grid = log_grid(4e-6, 8e-6, 4).unwrap();
    let schedule = [Relaxation { delta_n: 1, delta_l: 1, energy_window: 5.0 }; 3];
    let report =
        converge_basis(&ops, &rb60s(1, 1, 10.0), &schedule, 1e-3, &grid, &FieldConfig::default(), 0.0).unwrap();
    assert!(report.converged);
    assert!(report.steps.len() >= 2);
    assert!(report.steps[0].drift_ghz.is_none());
    for w in report.steps.windows(2) {
        assert!(w[1].basis_size > w[0].basis_size);
    }
    assert!(converge_basis(&ops, &rb60s(1, 1, 10.0), &schedule, 0.0, &grid, &FieldConfig::default(), 0.0).is_err());
}

#[test]
fn grid_validation() {
    assert!(log_grid(0.0, 1e-6, 10).is_err());
    assert!(log_grid(2e-6, 1e-6, 10).is_err());
    assert!(log_grid(1e-6, 2e-6, 1).is_err());
}
