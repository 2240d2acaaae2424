//! Diagonalization over a grid of distances, adiabatic curve tracking and
//! the analysis quantities built on probe-state overlaps.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::FieldConfig;
use crate::linalg::{eigh, C64};
use crate::operators::Operators;
use crate::pair::{
    assemble_blocks, build_pair_basis, le_roy_radius, pair_field_operator, BasisSpec, BlockKey, InteractionOperator,
    PairBasis, PairHamiltonian, StateTwo,
};
use crate::units;

/// Basis, block operators and probe projection of one pair problem.
#[derive(Clone, Debug)]
pub struct PairSystem {
    pub basis: PairBasis,
    pub hamiltonian: PairHamiltonian,
    pub probe: StateTwo,
    /// `<vector | probe>` for every basis vector.
    pub probe_amplitudes: Vec<C64>,
}

impl PairSystem {
    /// Probe is the basis target.
    pub fn build(ops: &Operators, spec: &BasisSpec, fields: &FieldConfig, theta: f64) -> Result<Self> {
        let basis = build_pair_basis(ops, spec, fields, theta)?;
        log::info!("pair basis: {} vectors in {} blocks", basis.len(), basis.blocks.len());
        let interaction = InteractionOperator::build(ops, &basis)?;
        let field_terms = pair_field_operator(ops, &basis)?;
        let t = &spec.target;
        let r_lr = le_roy_radius(ops, &t.first, &t.second)?;
        let hamiltonian = assemble_blocks(&basis, &interaction, &field_terms, r_lr);
        let probe = spec.target;
        let probe_amplitudes = basis.probe_amplitudes(&probe);
        Ok(PairSystem { basis, hamiltonian, probe, probe_amplitudes })
    }

    /// Total probe weight captured by the basis.
    pub fn probe_norm(&self) -> f64 {
        self.probe_amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn block_has_probe(&self, b: usize) -> bool {
        self.hamiltonian.blocks[b].range.clone().any(|i| self.probe_amplitudes[i] != C64::new(0.0, 0.0))
    }

    /// Eigen-decomposition of the probe at one distance.
    pub fn decompose(&self, r_m: f64) -> Result<Decomposition> {
        let r = units::meters_to_bohr(r_m);
        let mut energies = Vec::new();
        let mut weights = Vec::new();
        for (b, blk) in self.hamiltonian.blocks.iter().enumerate() {
            if !self.block_has_probe(b) {
                continue;
            }
            let (vals, vecs) = eigh(&blk.at(r))?;
            let amp = &self.probe_amplitudes[blk.range.clone()];
            for (c, &e) in vals.iter().enumerate() {
                energies.push(e);
                weights.push(overlap(&vecs, c, amp));
            }
        }
        Ok(Decomposition { energies, weights })
    }
}

fn overlap(vecs: &DMatrix<C64>, c: usize, amp: &[C64]) -> f64 {
    vecs.column(c).iter().zip(amp).map(|(v, a)| v.conj() * a).sum::<C64>().norm_sqr()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Distances diagonalized concurrently before linking.
    pub chunk: usize,
    /// Solve blocks without probe weight as well.
    pub all_blocks: bool,
    /// Track curves by eigenvector overlap. When off, curve `c` is the
    /// `c`-th eigenvalue at every distance.
    pub link: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { chunk: 2 * rayon::current_num_threads(), all_blocks: false, link: true }
    }
}

/// Tracked curves of one block. `energies[ir][c]` is curve `c` at distance
/// `ir`, `None` where the diagonalization failed.
#[derive(Clone, Debug)]
pub struct BlockCurves {
    pub key: BlockKey,
    pub energies: Vec<Option<Vec<f64>>>,
    pub overlaps: Vec<Option<Vec<f64>>>,
}

impl BlockCurves {
    pub fn len(&self) -> usize {
        self.energies.iter().flatten().next().map_or(0, |e| e.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Potential curves over a distance grid. Energies in GHz relative to the
/// target pair energy.
#[derive(Clone, Debug)]
pub struct PotentialCurves {
    pub r: Vec<f64>,
    pub blocks: Vec<BlockCurves>,
    pub target_energy: f64,
    pub le_roy_radius: f64,
    pub failures: Vec<(usize, String)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveRecord {
    #[serde(rename = "R_m")]
    pub r_m: f64,
    pub curve_id: usize,
    #[serde(rename = "energy_GHz")]
    pub energy_ghz: f64,
    pub overlap: f64,
}

impl PotentialCurves {
    /// All valid points at grid index `ir` as `(energy, overlap)`.
    pub fn points_at(&self, ir: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for b in &self.blocks {
            if let (Some(e), Some(o)) = (&b.energies[ir], &b.overlaps[ir]) {
                out.extend(e.iter().copied().zip(o.iter().copied()));
            }
        }
        out
    }

    pub fn decomposition_at(&self, ir: usize) -> Decomposition {
        let (energies, weights) = self.points_at(ir).into_iter().unzip();
        Decomposition { energies, weights }
    }

    /// Rows in curve order, skipping invalid points and points whose
    /// overlap is below `min_overlap`.
    pub fn records(&self, min_overlap: f64) -> Vec<CurveRecord> {
        let mut out = Vec::new();
        let mut offset = 0;
        for b in &self.blocks {
            let n = b.len();
            for c in 0..n {
                for (ir, &r_m) in self.r.iter().enumerate() {
                    if let (Some(e), Some(o)) = (&b.energies[ir], &b.overlaps[ir]) {
                        if o[c] >= min_overlap {
                            out.push(CurveRecord { r_m, curve_id: offset + c, energy_ghz: e[c], overlap: o[c] });
                        }
                    }
                }
            }
            offset += n;
        }
        out
    }

    /// Energy of the eigenstate with the largest probe overlap at each
    /// distance.
    pub fn probe_curve(&self) -> Vec<Option<f64>> {
        (0..self.r.len())
            .map(|ir| {
                self.points_at(ir).into_iter().max_by(|a, b| a.1.total_cmp(&b.1)).map(|(e, _)| e)
            })
            .collect()
    }

    pub fn below_le_roy(&self, ir: usize) -> bool {
        self.r[ir] <= self.le_roy_radius
    }
}

/// Logarithmically spaced grid from `r_min` to `r_max` inclusive.
pub fn log_grid(r_min: f64, r_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(r_min > 0.0 && r_max > r_min) || points < 2 {
        return Err(Error::config("distance grid needs 0 < r_min < r_max and at least two points"));
    }
    let (a, b) = (r_min.ln(), r_max.ln());
    Ok((0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()).collect())
}

/// Diagonalizes the probe-carrying blocks over `r_grid` (meters) and links
/// eigenpairs between successive distances by maximal eigenvector overlap.
pub fn solve_curves(system: &PairSystem, r_grid: &[f64], opts: &SolveOptions) -> Result<PotentialCurves> {
    if r_grid.is_empty() || r_grid.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::config("distance grid must be non-empty and positive"));
    }
    let chunk = opts.chunk.max(1);
    let mut blocks = Vec::new();
    let mut failures = Vec::new();
    for (b, blk) in system.hamiltonian.blocks.iter().enumerate() {
        if !opts.all_blocks && !system.block_has_probe(b) {
            continue;
        }
        let amp = &system.probe_amplitudes[blk.range.clone()];
        let mut tracker = Tracker::default();
        let mut energies = Vec::with_capacity(r_grid.len());
        let mut overlaps = Vec::with_capacity(r_grid.len());
        for (ci, rs) in r_grid.chunks(chunk).enumerate() {
            let solved: Vec<Result<(Vec<f64>, DMatrix<C64>)>> =
                rs.par_iter().map(|&r| eigh(&blk.at(units::meters_to_bohr(r)))).collect();
            for (k, res) in solved.into_iter().enumerate() {
                let ir = ci * chunk + k;
                match res {
                    Ok((vals, vecs)) => {
                        let ov: Vec<f64> = (0..vals.len()).map(|c| overlap(&vecs, c, amp)).collect();
                        let perm = if opts.link { tracker.link(&vals, vecs) } else { (0..vals.len()).collect() };
                        let mut e = vec![0.0; vals.len()];
                        let mut o = vec![0.0; vals.len()];
                        for (j, &c) in perm.iter().enumerate() {
                            e[c] = vals[j];
                            o[c] = ov[j];
                        }
                        energies.push(Some(e));
                        overlaps.push(Some(o));
                    }
                    Err(err) => {
                        log::warn!("block {} at R = {:e} m: {err}", blk.key, r_grid[ir]);
                        failures.push((ir, format!("block {}: {err}", blk.key)));
                        energies.push(None);
                        overlaps.push(None);
                    }
                }
            }
        }
        blocks.push(BlockCurves { key: blk.key.clone(), energies, overlaps });
    }
    Ok(PotentialCurves {
        r: r_grid.to_vec(),
        blocks,
        target_energy: system.basis.target_energy,
        le_roy_radius: system.hamiltonian.le_roy_radius,
        failures,
    })
}

/// Overlap ties closer than this are broken by energy continuity.
const TIE: f64 = 1e-9;

#[derive(Default)]
struct Tracker {
    prev: Option<(Vec<f64>, DMatrix<C64>, Vec<usize>)>,
}

impl Tracker {
    /// Curve id of each eigenpair, eigenvalues in ascending order.
    fn link(&mut self, vals: &[f64], vecs: DMatrix<C64>) -> Vec<usize> {
        let perm: Vec<usize> = match &self.prev {
            None => (0..vals.len()).collect(),
            Some((pv, pvecs, pcurve)) => {
                let (matched, _) = link_by_overlap(pv, pvecs, vals, &vecs);
                matched.iter().map(|&i| pcurve[i]).collect()
            }
        };
        self.prev = Some((vals.to_vec(), vecs, perm.clone()));
        perm
    }
}

/// For each current eigenpair `j`, the previous eigenpair it continues.
/// Returns the assignment and the overlaps used.
pub fn link_by_overlap(
    prev_vals: &[f64],
    prev: &DMatrix<C64>,
    vals: &[f64],
    cur: &DMatrix<C64>,
) -> (Vec<usize>, DMatrix<f64>) {
    let n = vals.len();
    let o = (prev.adjoint() * cur).map(|z| z.norm_sqr());
    let mut cand: Vec<(usize, usize)> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            if o[(i, j)] > 1e-12 {
                cand.push((i, j));
            }
        }
    }
    cand.sort_by(|a, b| o[*b].total_cmp(&o[*a]).then(a.cmp(b)));
    // Within runs of equal overlap, prefer small energy jumps.
    let mut start = 0;
    while start < cand.len() {
        let head = o[cand[start]];
        let mut end = start + 1;
        while end < cand.len() && head - o[cand[end]] <= TIE {
            end += 1;
        }
        cand[start..end].sort_by(|a, b| {
            let da = (prev_vals[a.0] - vals[a.1]).abs();
            let db = (prev_vals[b.0] - vals[b.1]).abs();
            da.total_cmp(&db).then(a.cmp(b))
        });
        start = end;
    }
    let mut from = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for (i, j) in cand {
        if !used[i] && from[j] == usize::MAX {
            used[i] = true;
            from[j] = i;
        }
    }
    // Leftovers in energy order.
    let free: Vec<usize> = (0..n).filter(|&i| !used[i]).collect();
    let mut it = free.into_iter();
    for f in from.iter_mut().filter(|f| **f == usize::MAX) {
        *f = it.next().expect("bijection");
    }
    (from, o)
}

/// Probe state expanded in eigenstates: energies (GHz, relative to the
/// target) and weights `a_k = |<probe|k>|^2`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Decomposition {
    pub energies: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Decomposition {
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Components with weight above `min_weight`.
    pub fn significant(&self, min_weight: f64) -> Decomposition {
        let (energies, weights) = self
            .energies
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > min_weight)
            .map(|(e, w)| (*e, *w))
            .unzip();
        Decomposition { energies, weights }
    }
}

/// `sum sqrt(a_k)` over eigenstates with `|E_k - detuning| <= bin / 2`,
/// one value per distance (NaN where the point is invalid).
pub fn admixture_cut(curves: &PotentialCurves, detuning_ghz: f64, bin_ghz: f64) -> Vec<(f64, f64)> {
    (0..curves.r.len())
        .map(|ir| {
            let valid = curves.blocks.iter().all(|b| b.energies[ir].is_some());
            let eps = if valid {
                curves
                    .points_at(ir)
                    .into_iter()
                    .filter(|(e, _)| (e - detuning_ghz).abs() <= bin_ghz / 2.0)
                    .map(|(_, a)| a.sqrt())
                    .sum()
            } else {
                f64::NAN
            };
            (curves.r[ir], eps)
        })
        .collect()
}

/// `p(t) = |sum_k a_k exp(-i 2 pi E_k t)|^2` with `t` in microseconds.
pub fn time_evolution(dec: &Decomposition, times_us: &[f64]) -> Vec<f64> {
    times_us
        .iter()
        .map(|&t| {
            let phase_per_ghz = -2.0 * PI * t * 1e3;
            dec.energies
                .iter()
                .zip(&dec.weights)
                .map(|(&e, &a)| C64::from_polar(a, phase_per_ghz * e))
                .sum::<C64>()
                .norm_sqr()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralLine {
    pub freq_mhz: f64,
    pub weight: f64,
}

/// Lines `(E_m - E_n)/h` in MHz for `E_m > E_n` with weight `a_m a_n`,
/// sorted by frequency. Components with weight `<= min_weight` are skipped.
pub fn frequency_spectrum(dec: &Decomposition, min_weight: f64) -> Vec<SpectralLine> {
    let d = dec.significant(min_weight);
    let mut lines = Vec::new();
    for m in 0..d.energies.len() {
        for n in 0..d.energies.len() {
            if d.energies[m] > d.energies[n] {
                lines.push(SpectralLine {
                    freq_mhz: (d.energies[m] - d.energies[n]) * 1e3,
                    weight: d.weights[m] * d.weights[n],
                });
            }
        }
    }
    lines.sort_by(|a, b| a.freq_mhz.total_cmp(&b.freq_mhz));
    lines
}

/// Merges lines closer than `tol_mhz` (weights add, frequency weighted).
pub fn merge_lines(lines: &[SpectralLine], tol_mhz: f64) -> Vec<SpectralLine> {
    let mut sorted = lines.to_vec();
    sorted.sort_by(|a, b| a.freq_mhz.total_cmp(&b.freq_mhz));
    let mut out: Vec<SpectralLine> = Vec::new();
    for l in &sorted {
        match out.last_mut() {
            Some(last) if l.freq_mhz - last.freq_mhz <= tol_mhz => {
                let w = last.weight + l.weight;
                if w > 0.0 {
                    last.freq_mhz = (last.freq_mhz * last.weight + l.freq_mhz * l.weight) / w;
                }
                last.weight = w;
            }
            _ => out.push(*l),
        }
    }
    out
}

/// Strongest merged line and its share of the oscillating weight. Merged
/// lines at or below `tol_mhz` do not oscillate and are left out.
pub fn dominant_line(lines: &[SpectralLine], tol_mhz: f64) -> Option<(SpectralLine, f64)> {
    let mut merged = merge_lines(lines, tol_mhz);
    merged.retain(|l| l.freq_mhz > tol_mhz);
    let total: f64 = merged.iter().map(|l| l.weight).sum();
    merged
        .into_iter()
        .max_by(|a, b| a.weight.total_cmp(&b.weight))
        .map(|l| (l, if total > 0.0 { l.weight / total } else { 0.0 }))
}

/// `max p - min p` over samples.
pub fn contrast(p: &[f64]) -> f64 {
    let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = p.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// One relaxation step of the basis restrictions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Relaxation {
    #[serde(default)]
    pub delta_n: i32,
    #[serde(default)]
    pub delta_l: i32,
    /// Added to the pair energy window, GHz.
    #[serde(default)]
    pub energy_window: f64,
}

impl BasisSpec {
    pub fn relaxed(&self, r: &Relaxation) -> BasisSpec {
        let mut s = self.clone();
        s.delta_n += r.delta_n;
        s.delta_l += r.delta_l;
        s.energy_window += r.energy_window;
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceStep {
    pub spec: BasisSpec,
    pub basis_size: usize,
    /// Largest change of the probe curve against the previous step, GHz.
    /// `None` for the first step.
    pub drift_ghz: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub steps: Vec<ConvergenceStep>,
    pub converged: bool,
    pub final_spec: BasisSpec,
    pub tolerance_ghz: f64,
}

/// Enlarges the basis along `schedule` until the probe curve over `r_grid`
/// moves by less than `tolerance_ghz` between steps.
pub fn converge_basis(
    ops: &Operators,
    initial: &BasisSpec,
    schedule: &[Relaxation],
    tolerance_ghz: f64,
    r_grid: &[f64],
    fields: &FieldConfig,
    theta: f64,
) -> Result<ConvergenceReport> {
    if !(tolerance_ghz > 0.0) {
        return Err(Error::config("convergence tolerance must be positive"));
    }
    let opts = SolveOptions::default();
    let mut spec = initial.clone();
    let mut steps = Vec::new();
    let mut prev: Option<Vec<Option<f64>>> = None;
    for k in 0..=schedule.len() {
        if k > 0 {
            spec = spec.relaxed(&schedule[k - 1]);
        }
        let system = PairSystem::build(ops, &spec, fields, theta)?;
        let curve = solve_curves(&system, r_grid, &opts)?.probe_curve();
        let drift = prev.as_ref().map(|p| {
            p.iter()
                .zip(&curve)
                .filter_map(|(a, b)| Some((a.as_ref()? - b.as_ref()?).abs()))
                .fold(0.0, f64::max)
        });
        log::info!("convergence step {k}: {} vectors, drift {drift:?}", system.basis.len());
        steps.push(ConvergenceStep { spec: spec.clone(), basis_size: system.basis.len(), drift_ghz: drift });
        if drift.is_some_and(|d| d < tolerance_ghz) {
            return Ok(ConvergenceReport { steps, converged: true, final_spec: spec, tolerance_ghz });
        }
        prev = Some(curve);
    }
    Ok(ConvergenceReport { steps, converged: false, final_spec: spec, tolerance_ghz })
}
