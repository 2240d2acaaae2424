//! Run configuration. Keys carry their units; every key can be overridden
//! with `--set section.key=value`.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use rydpair::fields::{FieldConfig, FieldKind, SingleBasisSpec};
use rydpair::pair::{BasisKind, BasisSpec, DressingSpec, StateTwo, Symmetries, SymmetryMode};
use rydpair::solver::Relaxation;
use rydpair::species::{Species, StateOne};
use rydpair::units;
use rydpair::{Error, HalfInteger};

/// Reads a TOML document (or starts empty), applies overrides and
/// deserializes the result.
pub fn load<T: DeserializeOwned>(path: Option<&Path>, overrides: &[String]) -> Result<T, Error> {
    let mut table: toml::Table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    T::deserialize(toml::Value::Table(table)).map_err(|e| Error::Config(e.to_string()))
}

/// `a.b.c=value`, where `value` is any TOML value; bare words are strings.
fn apply_override(table: &mut toml::Table, text: &str) -> Result<(), Error> {
    let (key, raw) = text.split_once('=').ok_or_else(|| Error::Config(format!("override `{text}` is not key=value")))?;
    let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_owned()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, path) = parts.split_last().unwrap();
    let mut cur = table;
    for p in path {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| Error::Config(format!("`{p}` in `{key}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    /// Term such as `59d3/2`.
    pub state: String,
    pub m: String,
    /// Overrides the top-level species.
    #[serde(default)]
    pub species: Option<String>,
}

impl StateSpec {
    pub fn resolve(&self, species: &str) -> Result<StateOne, Error> {
        StateOne::parse(self.species.as_deref().unwrap_or(species), &self.state, &self.m)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DressingSection {
    #[serde(default = "two")]
    pub delta_n: i32,
    #[serde(default)]
    pub l_max: Option<i32>,
    #[serde(rename = "energy_window_GHz", default = "thirty")]
    pub energy_window_ghz: f64,
    #[serde(default)]
    pub m_max: Option<String>,
}

impl Default for DressingSection {
    fn default() -> Self {
        DressingSection { delta_n: 2, l_max: None, energy_window_ghz: 30.0, m_max: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSection {
    #[serde(default = "two")]
    pub delta_n: i32,
    #[serde(default = "two")]
    pub delta_l: i32,
    #[serde(rename = "energy_window_GHz", default = "thirty")]
    pub energy_window_ghz: f64,
    #[serde(default = "three")]
    pub order: u32,
    #[serde(default)]
    pub kind: BasisKind,
    #[serde(default)]
    pub inversion: SymmetryMode,
    #[serde(default)]
    pub reflection: SymmetryMode,
    #[serde(default)]
    pub permutation: SymmetryMode,
    #[serde(default)]
    pub dressing: DressingSection,
}

impl Default for BasisSection {
    fn default() -> Self {
        toml::from_str("").unwrap()
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsSection {
    #[serde(rename = "efield_mV_per_cm", default)]
    pub efield_mv_per_cm: [f64; 3],
    #[serde(rename = "bfield_G", default)]
    pub bfield_gauss: [f64; 3],
    #[serde(default)]
    pub diamagnetism: bool,
}

impl FieldsSection {
    pub fn to_fields(&self) -> FieldConfig {
        FieldConfig {
            electric: self.efield_mv_per_cm.map(units::mv_per_cm_to_v_per_m),
            magnetic: self.bfield_gauss.map(units::gauss_to_tesla),
            diamagnetism: self.diamagnetism,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub r_min_um: f64,
    pub r_max_um: f64,
    #[serde(default = "two_hundred")]
    pub points: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Distance for time evolution and spectra.
    #[serde(default)]
    pub r_um: Option<f64>,
    #[serde(default = "one")]
    pub t_max_us: f64,
    #[serde(default = "four_hundred_one")]
    pub t_points: usize,
    /// Angles for the frequency spectrum; defaults to the run angle.
    #[serde(default)]
    pub spectrum_theta_deg: Vec<f64>,
    #[serde(default = "min_weight")]
    pub min_weight: f64,
    #[serde(rename = "admixture_detuning_GHz", default)]
    pub admixture_detuning_ghz: Option<f64>,
    #[serde(rename = "admixture_bin_GHz", default = "bin")]
    pub admixture_bin_ghz: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxationSection {
    #[serde(default)]
    pub delta_n: i32,
    #[serde(default)]
    pub delta_l: i32,
    #[serde(rename = "energy_window_GHz", default)]
    pub energy_window_ghz: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    #[serde(rename = "tolerance_MHz")]
    pub tolerance_mhz: f64,
    pub schedule: Vec<RelaxationSection>,
    /// Distance window for the drift check; defaults to the curve grid.
    #[serde(default)]
    pub r_min_um: Option<f64>,
    #[serde(default)]
    pub r_max_um: Option<f64>,
    #[serde(default = "eight")]
    pub points: usize,
}

impl ConvergenceSection {
    pub fn schedule(&self) -> Vec<Relaxation> {
        self.schedule
            .iter()
            .map(|r| Relaxation { delta_n: r.delta_n, delta_l: r.delta_l, energy_window: r.energy_window_ghz })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Curve points with smaller probe overlap are omitted.
    #[serde(default)]
    pub min_overlap: f64,
    #[serde(default = "yes")]
    pub link: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { min_overlap: 0.0, link: true }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub species: String,
    pub first: StateSpec,
    pub second: StateSpec,
    #[serde(default)]
    pub theta_deg: f64,
    #[serde(default)]
    pub basis: BasisSection,
    #[serde(default)]
    pub fields: FieldsSection,
    pub grid: GridSection,
    #[serde(default)]
    pub analysis: Option<AnalysisSection>,
    #[serde(default)]
    pub convergence: Option<ConvergenceSection>,
    #[serde(default)]
    pub output: OutputSection,
}

impl PairConfig {
    pub fn basis_spec(&self) -> Result<BasisSpec, Error> {
        let target = StateTwo::new(self.first.resolve(&self.species)?, self.second.resolve(&self.species)?);
        let b = &self.basis;
        let m_max = b
            .dressing
            .m_max
            .as_deref()
            .map(|s| s.parse::<HalfInteger>().map_err(|e| Error::Config(format!("dressing.m_max: {e}"))))
            .transpose()?;
        let spec = BasisSpec {
            target,
            delta_n: b.delta_n,
            delta_l: b.delta_l,
            energy_window: b.energy_window_ghz,
            order: b.order,
            symmetries: Symmetries { inversion: b.inversion, reflection: b.reflection, permutation: b.permutation },
            kind: b.kind,
            dressing: DressingSpec {
                delta_n: b.dressing.delta_n,
                l_max: b.dressing.l_max,
                energy_window: b.dressing.energy_window_ghz,
                m_max,
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn theta(&self) -> Result<f64, Error> {
        Ok(rydpair::geometry::InteractionAngle::from_degrees(self.theta_deg)?.radians())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub species: String,
    pub n_min: i32,
    pub n_max: i32,
    #[serde(default)]
    pub l_max: Option<i32>,
    /// Projections to keep, e.g. `["1/2"]`; all when absent.
    #[serde(default)]
    pub m: Option<Vec<String>>,
    /// Absolute energy bounds of the basis.
    #[serde(rename = "energy_min_GHz", default)]
    pub energy_min_ghz: Option<f64>,
    #[serde(rename = "energy_max_GHz", default)]
    pub energy_max_ghz: Option<f64>,
    #[serde(default = "z_axis")]
    pub direction: [f64; 3],
    #[serde(rename = "efield_min_V_per_cm", default)]
    pub efield_min_v_per_cm: Option<f64>,
    #[serde(rename = "efield_max_V_per_cm", default)]
    pub efield_max_v_per_cm: Option<f64>,
    #[serde(rename = "bfield_min_G", default)]
    pub bfield_min_gauss: Option<f64>,
    #[serde(rename = "bfield_max_G", default)]
    pub bfield_max_gauss: Option<f64>,
    #[serde(default = "hundred")]
    pub points: usize,
    #[serde(default)]
    pub diamagnetism: bool,
}

impl MapConfig {
    pub fn basis_spec(&self) -> Result<SingleBasisSpec, Error> {
        let m = self
            .m
            .as_ref()
            .map(|v| {
                v.iter()
                    .map(|s| s.parse::<HalfInteger>().map_err(|e| Error::Config(format!("m: {e}"))))
                    .collect::<Result<Vec<_>, _>>()
            })
            .transpose()?;
        let energy_window = match (self.energy_min_ghz, self.energy_max_ghz) {
            (Some(lo), Some(hi)) => Some((lo, hi)),
            (None, None) => None,
            _ => return Err(Error::Config("energy_min_GHz and energy_max_GHz go together".into())),
        };
        Ok(SingleBasisSpec {
            species: Species::new(&self.species),
            n_min: self.n_min,
            n_max: self.n_max,
            l_max: self.l_max,
            m,
            energy_window,
        })
    }

    /// Evenly spaced scan in SI units (V/m or T) and in the configured unit.
    pub fn scan(&self, kind: FieldKind) -> Result<(Vec<f64>, Vec<f64>), Error> {
        let (range, other, name) = match kind {
            FieldKind::Electric => (
                self.efield_min_v_per_cm.zip(self.efield_max_v_per_cm),
                self.bfield_min_gauss.is_some() || self.bfield_max_gauss.is_some(),
                "efield_min_V_per_cm and efield_max_V_per_cm",
            ),
            FieldKind::Magnetic => (
                self.bfield_min_gauss.zip(self.bfield_max_gauss),
                self.efield_min_v_per_cm.is_some() || self.efield_max_v_per_cm.is_some(),
                "bfield_min_G and bfield_max_G",
            ),
        };
        let (lo, hi) = range.ok_or_else(|| Error::Config(format!("{name} are required")))?;
        if other {
            return Err(Error::Config("scan keys of the other field kind are set".into()));
        }
        if !(lo.is_finite() && hi.is_finite()) || self.points == 0 {
            return Err(Error::Config("scan needs finite bounds and at least one point".into()));
        }
        let user: Vec<f64> = if self.points == 1 {
            vec![lo]
        } else {
            (0..self.points).map(|i| lo + (hi - lo) * i as f64 / (self.points - 1) as f64).collect()
        };
        let si = user
            .iter()
            .map(|&x| match kind {
                FieldKind::Electric => x * 100.0,
                FieldKind::Magnetic => units::gauss_to_tesla(x),
            })
            .collect();
        Ok((user, si))
    }
}

fn yes() -> bool {
    true
}
fn one() -> f64 {
    1.0
}
fn two() -> i32 {
    2
}
fn three() -> u32 {
    3
}
fn eight() -> usize {
    8
}
fn thirty() -> f64 {
    30.0
}
fn hundred() -> usize {
    100
}
fn two_hundred() -> usize {
    200
}
fn four_hundred_one() -> usize {
    401
}
fn min_weight() -> f64 {
    1e-4
}
fn bin() -> f64 {
    0.2
}
fn z_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}
