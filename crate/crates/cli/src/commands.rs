use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use serde_json::json;

use rydpair::fields::{field_map as compute_map, single_atom_basis, FieldKind};
use rydpair::operators::Operators;
use rydpair::pair::le_roy_radius;
use rydpair::radial::{GridSpec, Method};
use rydpair::solver::{
    admixture_cut, converge_basis, frequency_spectrum, log_grid, solve_curves, time_evolution, PairSystem,
    SolveOptions,
};
use rydpair::species::{SpeciesData, StateOne};
use rydpair::{Error, HalfInteger};

use crate::config::{self, MapConfig, PairConfig};
use crate::output::{write_csv, write_json, write_map, AdmixtureRow, EvolutionRow, MapRow, SpectrumRow};
use crate::{Outcome, RunArgs};

pub struct Context {
    pub data: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub method: Method,
}

impl Context {
    fn operators(&self) -> Result<Operators, Error> {
        let data = match &self.data {
            Some(p) => SpeciesData::load(p)?,
            None => SpeciesData::builtin().clone(),
        };
        let data = Arc::new(data);
        match &self.cache {
            Some(p) => Operators::with_cache_file(data, GridSpec::default(), self.method, p),
            None => Ok(Operators::new(data, GridSpec::default(), self.method)),
        }
    }

    fn provenance(&self, ops: &Operators) -> serde_json::Value {
        json!({
            "version": env!("CARGO_PKG_VERSION"),
            "data_file": self.data.as_ref().map(|p| p.display().to_string()),
            "data_hash": ops.data().hash(),
            "cache_file": self.cache.as_ref().map(|p| p.display().to_string()),
            "cache_stamp": ops.cache().stamp(),
            "method": ops.method(),
        })
    }
}

fn check_species(ops: &Operators, name: &str) -> Result<(), Error> {
    ops.data().model_by_name(name).map(|_| ())
}

fn create_dir(out: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

pub fn pair_potential(ctx: &Context, args: &RunArgs) -> Result<Outcome, Error> {
    let cfg: PairConfig = config::load(args.config.as_deref(), &args.overrides)?;
    let mut spec = cfg.basis_spec()?;
    let fields = cfg.fields.to_fields();
    fields.validate()?;
    let theta = cfg.theta()?;
    let grid = log_grid(cfg.grid.r_min_um * 1e-6, cfg.grid.r_max_um * 1e-6, cfg.grid.points)?;
    let ops = ctx.operators()?;
    check_species(&ops, &cfg.species)?;
    for s in [&cfg.first, &cfg.second] {
        if let Some(name) = &s.species {
            check_species(&ops, name)?;
        }
    }
    create_dir(&args.out)?;

    let mut report = None;
    if let Some(conv) = &cfg.convergence {
        let r_min = conv.r_min_um.unwrap_or(cfg.grid.r_min_um) * 1e-6;
        let r_max = conv.r_max_um.unwrap_or(cfg.grid.r_max_um) * 1e-6;
        let conv_grid = log_grid(r_min, r_max, conv.points)?;
        let r = converge_basis(&ops, &spec, &conv.schedule(), conv.tolerance_mhz * 1e-3, &conv_grid, &fields, theta)?;
        if !r.converged {
            log::warn!("basis did not converge within the schedule; using the largest basis");
        }
        spec = r.final_spec.clone();
        write_json(&args.out.join("convergence.json"), &r)?;
        report = Some(r);
    }

    let system = PairSystem::build(&ops, &spec, &fields, theta)?;
    log::info!("solving {} distances", grid.len());
    let curves = solve_curves(&system, &grid, &SolveOptions { link: cfg.output.link, ..Default::default() })?;
    write_csv(&args.out.join("curves.csv"), curves.records(cfg.output.min_overlap))?;
    write_json(&args.out.join("basis.json"), &system.basis.dump())?;

    let mut failures: Vec<serde_json::Value> =
        curves.failures.iter().map(|(ir, msg)| json!({"R_m": curves.r[*ir], "error": msg})).collect();
    let below = (0..grid.len()).filter(|&ir| curves.below_le_roy(ir)).count();
    if below > 0 {
        log::warn!("{below} distances lie inside the Le Roy radius");
    }

    let mut analysis = serde_json::Value::Null;
    if let Some(a) = &cfg.analysis {
        let mut files = Vec::new();
        if let Some(r_um) = a.r_um {
            let r_m = r_um * 1e-6;
            let dec = system.decompose(r_m)?;
            let times: Vec<f64> = if a.t_points < 2 {
                vec![0.0]
            } else {
                (0..a.t_points).map(|i| a.t_max_us * i as f64 / (a.t_points - 1) as f64).collect()
            };
            let p = time_evolution(&dec, &times);
            write_csv(
                &args.out.join("evolution.csv"),
                times.iter().zip(&p).map(|(&t_us, &p_probe)| EvolutionRow { t_us, p_probe }),
            )?;
            files.push("evolution.csv");

            let angles = if a.spectrum_theta_deg.is_empty() { vec![cfg.theta_deg] } else { a.spectrum_theta_deg.clone() };
            let mut rows = Vec::new();
            for deg in angles {
                let t = rydpair::geometry::InteractionAngle::from_degrees(deg)?.radians();
                let dec = if t == theta { dec.clone() } else { PairSystem::build(&ops, &spec, &fields, t)?.decompose(r_m)? };
                for line in frequency_spectrum(&dec, a.min_weight) {
                    rows.push(SpectrumRow { theta_deg: deg, freq_mhz: line.freq_mhz, weight: line.weight });
                }
            }
            write_csv(&args.out.join("spectrum.csv"), rows)?;
            files.push("spectrum.csv");
        }
        if let Some(det) = a.admixture_detuning_ghz {
            let rows = admixture_cut(&curves, det, a.admixture_bin_ghz).into_iter().map(|(r_m, admixture)| AdmixtureRow {
                r_m,
                r_over_le_roy: r_m / curves.le_roy_radius,
                admixture,
            });
            write_csv(&args.out.join("admixture.csv"), rows)?;
            files.push("admixture.csv");
        }
        analysis = json!({"files": files});
    }

    if let Some(r) = &report {
        if !r.converged {
            failures.push(json!({"error": "basis convergence not reached"}));
        }
    }
    let n_fail = curves.failures.len();
    let record = json!({
        "command": "pair-potential",
        "config": cfg,
        "basis_spec": spec,
        "basis_size": system.basis.len(),
        "blocks": system.basis.blocks.len(),
        "probe_norm": system.probe_norm(),
        "target_energy_GHz": system.basis.target_energy,
        "le_roy_radius_m": curves.le_roy_radius,
        "points_inside_le_roy_radius": below,
        "converged": report.as_ref().map(|r| r.converged),
        "analysis": analysis,
        "failures": failures,
        "provenance": ctx.provenance(&ops),
    });
    write_json(&args.out.join("run.json"), &record)?;
    Ok(if n_fail > 0 { Outcome::Partial(n_fail) } else { Outcome::Done })
}

pub fn field_map(ctx: &Context, args: &RunArgs, kind: FieldKind) -> Result<Outcome, Error> {
    let cfg: MapConfig = config::load(args.config.as_deref(), &args.overrides)?;
    let spec = cfg.basis_spec()?;
    let (scan_user, scan_si) = cfg.scan(kind)?;
    let ops = ctx.operators()?;
    check_species(&ops, &cfg.species)?;
    let basis = single_atom_basis(ops.data(), &spec)?;
    if basis.is_empty() {
        return Err(Error::Config("single-atom basis is empty".into()));
    }
    create_dir(&args.out)?;
    let points = compute_map(&ops, &basis, kind, cfg.direction, cfg.diamagnetism, &scan_si)?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (field, p) in scan_user.iter().zip(&points) {
        match p {
            Ok(p) => {
                for c in 0..p.energies.len() {
                    rows.push(MapRow {
                        field: *field,
                        energy_ghz: p.energies[c],
                        label: term(&basis[p.labels[c]]),
                        overlap: p.overlaps[c],
                    });
                }
            }
            Err(e) => failures.push(json!({"field": field, "error": e.to_string()})),
        }
    }
    let (name, column) = match kind {
        FieldKind::Electric => ("stark-map", "efield_V_per_cm"),
        FieldKind::Magnetic => ("zeeman-map", "bfield_G"),
    };
    write_map(&args.out.join("map.csv"), column, &rows)?;
    let n_fail = failures.len();
    let record = json!({
        "command": name,
        "config": cfg,
        "basis_size": basis.len(),
        "failures": failures,
        "provenance": ctx.provenance(&ops),
    });
    write_json(&args.out.join("run.json"), &record)?;
    Ok(if n_fail > 0 { Outcome::Partial(n_fail) } else { Outcome::Done })
}

/// `59d3/2 m=1/2` without the species prefix.
fn term(s: &StateOne) -> String {
    format!("{}{}{} m={}", s.n, StateOne::l_label(s.l), s.j, s.m)
}

#[derive(Args)]
pub struct ElementArgs {
    /// Species name from the data file, e.g. `Rb`.
    #[arg(long)]
    species: String,
    /// Bra term, e.g. `60s1/2`.
    #[arg(long)]
    bra: String,
    /// Bra magnetic quantum number.
    #[arg(long, default_value = "1/2", allow_hyphen_values = true)]
    bra_m: String,
    /// Ket term.
    #[arg(long)]
    ket: String,
    /// Ket magnetic quantum number.
    #[arg(long, default_value = "1/2", allow_hyphen_values = true)]
    ket_m: String,
    /// Multipole rank.
    #[arg(long, default_value_t = 1)]
    k: i32,
    /// Spherical component.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    q: i32,
}

pub fn matrix_element(ctx: &Context, a: &ElementArgs) -> Result<Outcome, Error> {
    if a.k < 0 || a.q.abs() > a.k {
        return Err(Error::Config(format!("invalid multipole k={}, q={}", a.k, a.q)));
    }
    let ops = ctx.operators()?;
    check_species(&ops, &a.species)?;
    let bra = StateOne::parse(&a.species, &a.bra, &a.bra_m)?;
    let ket = StateOne::parse(&a.species, &a.ket, &a.ket_m)?;
    let radial = ops.radial(&bra.level(), &ket.level(), a.k)?;
    let element = ops.multipole_element(&bra, &ket, a.k, a.q)?;
    println!("radial <{}|r^{}|{}> = {} a0^{}", bra.level(), a.k, ket.level(), radial, a.k);
    println!("multipole <{}|p_{},{}|{}> = {} e a0^{}", bra, a.k, a.q, ket, element, a.k);
    println!("integrations: {}", ops.integrations());
    println!("cache entries: {}", ops.cache().len());
    Ok(Outcome::Done)
}

#[derive(Args)]
pub struct StateArgs {
    /// Species name from the data file, e.g. `Rb`.
    #[arg(long)]
    species: String,
    /// Term, e.g. `60s1/2`.
    #[arg(long)]
    state: String,
    /// Second atom for the Le Roy radius; the same level when absent.
    #[arg(long)]
    partner: Option<String>,
}

pub fn state_info(ctx: &Context, a: &StateArgs) -> Result<Outcome, Error> {
    let ops = ctx.operators()?;
    check_species(&ops, &a.species)?;
    let m = HalfInteger::HALF.to_string();
    let s = StateOne::parse(&a.species, &a.state, &m)?;
    let partner = match &a.partner {
        Some(t) => StateOne::parse(&a.species, t, &m)?,
        None => s,
    };
    let e = ops.data().level_energy(&s.level())?;
    let r2 = ops.radial(&s.level(), &s.level(), 2)?;
    println!("level: {}", s.level());
    println!("energy_GHz: {}", e.ghz());
    println!("energy_eV: {}", e.ev());
    println!("n_star: {}", e.n_star());
    println!("quantum_defect: {}", s.n as f64 - e.n_star());
    println!("energy_source: {}", serde_json::to_value(e.source).unwrap().as_str().unwrap_or_default());
    println!("validated: {}", e.validated);
    println!("rms_radius_a0: {}", r2.sqrt());
    println!("le_roy_radius_um: {}", le_roy_radius(&ops, &s, &partner)? * 1e6);
    Ok(Outcome::Done)
}

pub fn cache(ctx: &Context, clear: bool) -> Result<Outcome, Error> {
    if ctx.cache.is_none() {
        return Err(Error::Config("--cache is required".into()));
    }
    let ops = ctx.operators()?;
    let c = ops.cache();
    if clear {
        let n = c.len();
        c.clear()?;
        println!("cleared {n} entries");
    } else {
        println!("path: {}", c.path().map(|p| p.display().to_string()).unwrap_or_default());
        println!("stamp: {}", c.stamp());
        println!("entries: {}", c.len());
    }
    Ok(Outcome::Done)
}
