//! Per-species atomic data and unperturbed level energies.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::angular::HalfInteger;
use crate::error::{Error, Result};
use crate::units::{self, ATOMIC_MASS_UNIT, ELECTRON_MASS, FINE_STRUCTURE, HARTREE, RYDBERG_ENERGY};

const DEFAULT_DATA: &str = include_str!("../data/species.toml");

/// Interned species name. Cheap to copy and compare.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Species(&'static str);

impl Species {
    pub fn new(name: &str) -> Self {
        static NAMES: OnceLock<Mutex<HashSet<&'static str>>> = OnceLock::new();
        let mut set = NAMES.get_or_init(Default::default).lock().unwrap();
        if let Some(s) = set.get(name) {
            return Species(s);
        }
        let leaked: &'static str = Box::leak(name.to_owned().into_boxed_str());
        set.insert(leaked);
        Species(leaked)
    }

    pub fn name(self) -> &'static str {
        self.0
    }
}

impl fmt::Debug for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0)
    }
}

impl Serialize for Species {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.0)
    }
}

impl<'de> Deserialize<'de> for Species {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(Species::new(&s))
    }
}

/// Single-atom state `|n l j mj>`, spin 1/2 implicit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateOne {
    pub species: Species,
    pub n: i32,
    pub l: i32,
    pub j: HalfInteger,
    pub m: HalfInteger,
}

const L_LETTERS: &[u8] = b"spdfghiklmnoqrtuv";

impl StateOne {
    pub fn new(species: &str, n: i32, l: i32, j: f64, m: f64) -> Result<Self> {
        let j = HalfInteger::from_f64(j).ok_or_else(|| Error::InvalidState(format!("j = {j}")))?;
        let m = HalfInteger::from_f64(m).ok_or_else(|| Error::InvalidState(format!("mj = {m}")))?;
        let s = StateOne { species: Species::new(species), n, l, j, m };
        s.validate()?;
        Ok(s)
    }

    /// Parses a spectroscopic term such as `59d3/2`.
    pub fn parse(species: &str, term: &str, m: &str) -> Result<Self> {
        let bad = || Error::InvalidState(format!("cannot parse term `{term}`"));
        let digits = term.find(|c: char| !c.is_ascii_digit()).ok_or_else(bad)?;
        let n: i32 = term[..digits].parse().map_err(|_| bad())?;
        let rest = &term[digits..];
        let letter = rest.as_bytes()[0].to_ascii_lowercase();
        let l = L_LETTERS.iter().position(|&c| c == letter).ok_or_else(bad)? as i32;
        let j: HalfInteger = rest[1..].parse().map_err(|_| bad())?;
        let m: HalfInteger = m.parse().map_err(|e: String| Error::InvalidState(e))?;
        let s = StateOne { species: Species::new(species), n, l, j, m };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(Error::InvalidState(format!("{self}: {msg}")));
        if self.n < 1 {
            return err("n must be positive".into());
        }
        if self.l < 0 || self.l >= self.n {
            return err("need 0 <= l < n".into());
        }
        let tj = self.j.twice();
        if tj != 2 * self.l + 1 && tj != 2 * self.l - 1 {
            return err("j must equal l +- 1/2".into());
        }
        if self.m.abs() > self.j || (self.j - self.m).as_int().is_none() {
            return err("mj out of range".into());
        }
        Ok(())
    }

    /// The same level with a different projection.
    pub fn with_m(self, m: HalfInteger) -> Self {
        StateOne { m, ..self }
    }

    pub fn level(&self) -> Level {
        Level { species: self.species, n: self.n, l: self.l, j: self.j }
    }

    pub fn angular(&self) -> crate::angular::AngularState {
        crate::angular::AngularState::new(self.l, self.j, self.m)
    }

    /// Orbital label such as `d` or `l14`.
    pub fn l_label(l: i32) -> String {
        L_LETTERS.get(l as usize).map(|&c| (c as char).to_string()).unwrap_or_else(|| format!("l{l}"))
    }
}

impl fmt::Display for StateOne {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}{}{} mj={}", self.species, self.n, StateOne::l_label(self.l), self.j, self.m)
    }
}

/// A fine-structure level `n l j` without projection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Level {
    pub species: Species,
    pub n: i32,
    pub l: i32,
    pub j: HalfInteger,
}

impl Level {
    pub fn state(self, m: HalfInteger) -> StateOne {
        StateOne { species: self.species, n: self.n, l: self.l, j: self.j, m }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}{}{}", self.species, self.n, StateOne::l_label(self.l), self.j)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumDefectSeries {
    pub l: i32,
    pub j: HalfInteger,
    pub delta0: f64,
    pub delta2: f64,
    pub delta4: f64,
    pub delta6: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_min: Option<i32>,
    pub source: String,
}

impl QuantumDefectSeries {
    pub fn eval(&self, n: i32) -> f64 {
        let d = n as f64 - self.delta0;
        let inv2 = 1.0 / (d * d);
        self.delta0 + inv2 * (self.delta2 + inv2 * (self.delta4 + inv2 * self.delta6))
    }
}

/// Model potential coefficients for one orbital momentum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelPotentialParams {
    pub l: i32,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub r_c_a0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesModel {
    pub name: String,
    pub mass_u: f64,
    pub z: u32,
    pub alpha_d_au: f64,
    /// Smallest `n` for which the hydrogenic high-l formula is considered
    /// validated. Results below it are flagged, not altered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hydrogenic_min_n: Option<i32>,
    pub model_potential: Vec<ModelPotentialParams>,
    #[serde(default)]
    pub defect: Vec<QuantumDefectSeries>,
}

impl SpeciesModel {
    pub fn series(&self, l: i32, j: HalfInteger) -> Option<&QuantumDefectSeries> {
        self.defect.iter().find(|d| d.l == l && d.j == j)
    }

    /// Largest `l` with a measured defect.
    pub fn max_defect_l(&self) -> Option<i32> {
        self.defect.iter().map(|d| d.l).max()
    }

    /// Model potential for `l`, falling back to the highest tabulated `l`.
    pub fn potential_params(&self, l: i32) -> Option<&ModelPotentialParams> {
        self.model_potential
            .iter()
            .find(|p| p.l == l)
            .or_else(|| self.model_potential.iter().filter(|p| p.l <= l).max_by_key(|p| p.l))
    }

    /// `hc R*` in Joules.
    pub fn reduced_rydberg(&self) -> f64 {
        RYDBERG_ENERGY / (1.0 + ELECTRON_MASS / (self.mass_u * ATOMIC_MASS_UNIT))
    }

    fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::DataFile(format!("species {}: {m}", self.name)));
        if self.z < 1 {
            return err("Z must be at least 1");
        }
        if !(self.alpha_d_au >= 0.0) {
            return err("alpha_d must be non-negative");
        }
        if !(self.mass_u > 0.0) {
            return err("mass must be positive");
        }
        if self.model_potential.is_empty() {
            return err("missing model potential");
        }
        if self.model_potential.iter().any(|p| !(p.r_c_a0 > 0.0)) {
            return err("r_c must be positive");
        }
        for d in &self.defect {
            if d.j.twice() != 2 * d.l + 1 && d.j.twice() != 2 * d.l - 1 {
                return err("defect record with j != l +- 1/2");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesFile {
    pub format_version: u32,
    pub g_s: f64,
    pub g_l: f64,
    pub species: Vec<SpeciesModel>,
}

/// Loaded data file plus its content hash.
#[derive(Clone, Debug)]
pub struct SpeciesData {
    pub file: SpeciesFile,
    hash: String,
    index: BTreeMap<String, usize>,
}

impl SpeciesData {
    /// The data file shipped with the crate.
    pub fn builtin() -> &'static SpeciesData {
        static DATA: OnceLock<SpeciesData> = OnceLock::new();
        DATA.get_or_init(|| SpeciesData::parse(DEFAULT_DATA).expect("bundled species data is valid"))
    }

    pub fn builtin_text() -> &'static str {
        DEFAULT_DATA
    }

    pub fn load(path: &Path) -> Result<SpeciesData> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::DataFile(format!("{}: {e}", path.display())))?;
        SpeciesData::parse(&text)
    }

    pub fn parse(text: &str) -> Result<SpeciesData> {
        let file: SpeciesFile = toml::from_str(text).map_err(|e| Error::DataFile(e.to_string()))?;
        let mut index = BTreeMap::new();
        for (i, s) in file.species.iter().enumerate() {
            s.validate()?;
            if index.insert(s.name.clone(), i).is_some() {
                return Err(Error::DataFile(format!("duplicate species {}", s.name)));
            }
        }
        let hash = hex::encode(Sha256::digest(text.as_bytes()));
        Ok(SpeciesData { file, hash, index })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(&self.file).map_err(|e| Error::DataFile(e.to_string()))
    }

    /// SHA-256 of the file text.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn model(&self, species: Species) -> Result<&SpeciesModel> {
        self.model_by_name(species.name())
    }

    pub fn model_by_name(&self, name: &str) -> Result<&SpeciesModel> {
        self.index
            .get(name)
            .map(|&i| &self.file.species[i])
            .ok_or_else(|| Error::UnknownSpecies(name.to_owned()))
    }

    pub fn species_names(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(|s| s.as_str())
    }

    pub fn g_s(&self) -> f64 {
        self.file.g_s
    }

    pub fn g_l(&self) -> f64 {
        self.file.g_l
    }

    pub fn level_energy(&self, level: &Level) -> Result<LevelEnergy> {
        level_energy(self.model(level.species)?, level.n, level.l, level.j)
    }
}

/// `delta_nlj`, zero when no series is tabulated for `(l, j)`.
pub fn quantum_defect(model: &SpeciesModel, n: i32, l: i32, j: HalfInteger) -> f64 {
    model.series(l, j).map(|s| s.eval(n)).unwrap_or(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergySource {
    DefectSeries,
    Hydrogenic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelEnergy {
    /// Joules.
    pub value: f64,
    pub source: EnergySource,
    /// `hc R*` of the species, Joules.
    pub reduced_rydberg: f64,
    /// False when `n` lies below a validity floor declared in the data file.
    pub validated: bool,
}

impl LevelEnergy {
    pub fn ghz(&self) -> f64 {
        units::joule_to_ghz(self.value)
    }

    pub fn hartree(&self) -> f64 {
        self.value / HARTREE
    }

    pub fn ev(&self) -> f64 {
        self.value / units::ELECTRON_VOLT
    }

    /// Effective principal quantum number `sqrt(-hcR*/E)`.
    pub fn n_star(&self) -> f64 {
        (-self.reduced_rydberg / self.value).sqrt()
    }
}

pub fn level_energy(model: &SpeciesModel, n: i32, l: i32, j: HalfInteger) -> Result<LevelEnergy> {
    if n < 1 || l < 0 || l >= n {
        return Err(Error::InvalidState(format!("n={n}, l={l}")));
    }
    if j.twice() != 2 * l + 1 && j.twice() != 2 * l - 1 {
        return Err(Error::InvalidState(format!("l={l}, j={j}")));
    }
    let ry = model.reduced_rydberg();
    if let Some(series) = model.series(l, j) {
        let ns = n as f64 - series.eval(n);
        if !(ns > 0.0) {
            return Err(Error::Domain(format!("effective quantum number {ns} for n={n}")));
        }
        let validated = series.n_min.is_none_or(|m| n >= m);
        return Ok(LevelEnergy { value: -ry / (ns * ns), source: EnergySource::DefectSeries, reduced_rydberg: ry, validated });
    }
    let nf = n as f64;
    let a2 = FINE_STRUCTURE * FINE_STRUCTURE;
    let mut e = -ry / (nf * nf) * (1.0 + a2 / (nf * (j.value() + 0.5)) + a2 / (nf * nf));
    if l > 0 {
        e -= HARTREE * 3.0 * model.alpha_d_au / (4.0 * nf.powi(3) * (l as f64).powi(5));
    }
    let validated = model.hydrogenic_min_n.is_none_or(|m| n >= m);
    Ok(LevelEnergy { value: e, source: EnergySource::Hydrogenic, reduced_rydberg: ry, validated })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_loads_all_species() {
        let d = SpeciesData::builtin();
        for s in ["H", "Li", "Na", "K", "Rb", "Cs"] {
            d.model_by_name(s).unwrap();
        }
        assert!(matches!(d.model_by_name("Xe"), Err(Error::UnknownSpecies(_))));
    }

    #[test]
    fn round_trip_is_lossless() {
        let d = SpeciesData::builtin();
        let text = d.to_toml().unwrap();
        let again = SpeciesData::parse(&text).unwrap();
        assert_eq!(again.file, d.file);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = SpeciesData::builtin_text().replace("format_version = 1", "format_version = 1\ncolour = 3");
        assert!(matches!(SpeciesData::parse(&text), Err(Error::DataFile(_))));
    }

    #[test]
    fn series_direct_evaluation() {
        let s = QuantumDefectSeries {
            l: 0,
            j: HalfInteger::HALF,
            delta0: 3.13,
            delta2: 0.205,
            delta4: 0.0,
            delta6: 0.0,
            n_min: None,
            source: String::new(),
        };
        assert!((s.eval(60) - (3.13 + 0.205 / 56.87f64.powi(2))).abs() < 1e-15);
    }

    #[test]
    fn state_parsing() {
        let s = StateOne::parse("Rb", "59d3/2", "3/2").unwrap();
        assert_eq!((s.n, s.l, s.j.twice(), s.m.twice()), (59, 2, 3, 3));
        assert!(StateOne::parse("Rb", "59d1/2", "1/2").is_err());
        assert!(StateOne::new("Rb", 3, 3, 3.5, 0.5).is_err());
        assert!(StateOne::new("Rb", 5, 1, 1.5, 2.5).is_err());
    }
}
