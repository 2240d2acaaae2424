//! Single-atom matrix elements of multipole and angular momentum operators,
//! with a persistent cache for the radial integrals.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use sha2::{Digest, Sha256};

use crate::angular::{
    normalized_harmonic_element, orbital_momentum_element, spin_momentum_element, HalfInteger,
};
use crate::error::{Error, Result};
use crate::radial::{GridSpec, Method, RadialSolver};
use crate::species::{Level, Species, SpeciesData, StateOne};

const CACHE_HEADER: &str = "rydpair-element-cache v1";

/// Key of a radial integral `<n l j| r^power |n' l' j'>`, stored with the
/// smaller level first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ElementKey {
    pub species: Species,
    pub bra: (i32, i32, i32),
    pub ket: (i32, i32, i32),
    pub power: i32,
    pub method: Method,
}

impl ElementKey {
    pub fn new(a: &Level, b: &Level, power: i32, method: Method) -> Self {
        let ta = (a.n, a.l, a.j.twice());
        let tb = (b.n, b.l, b.j.twice());
        let (bra, ket) = if ta <= tb { (ta, tb) } else { (tb, ta) };
        ElementKey { species: a.species, bra, ket, power, method }
    }

    fn encode(&self, value: f64) -> String {
        let m = match self.method {
            Method::Whittaker => "w",
            Method::Numerov => "n",
        };
        format!(
            "{} {} {} {} {} {} {} {} {} {:016x}",
            self.species,
            self.bra.0,
            self.bra.1,
            self.bra.2,
            self.ket.0,
            self.ket.1,
            self.ket.2,
            self.power,
            m,
            value.to_bits()
        )
    }

    fn decode(line: &str) -> Option<(ElementKey, f64)> {
        let f: Vec<&str> = line.split_ascii_whitespace().collect();
        if f.len() != 10 {
            return None;
        }
        let int = |i: usize| f[i].parse::<i32>().ok();
        let method = match f[8] {
            "w" => Method::Whittaker,
            "n" => Method::Numerov,
            _ => return None,
        };
        let bits = u64::from_str_radix(f[9], 16).ok()?;
        let key = ElementKey {
            species: Species::new(f[0]),
            bra: (int(1)?, int(2)?, int(3)?),
            ket: (int(4)?, int(5)?, int(6)?),
            power: int(7)?,
            method,
        };
        Some((key, f64::from_bits(bits)))
    }
}

/// Version stamp tying cached values to the data file and numerical settings.
pub fn cache_stamp(data: &SpeciesData, grid: &GridSpec) -> String {
    let mut h = Sha256::new();
    h.update(data.hash().as_bytes());
    h.update(grid.step.to_bits().to_le_bytes());
    h.update([grid.spin_orbit as u8]);
    hex::encode(h.finalize())
}

/// Read-mostly map of radial integrals, optionally mirrored to an
/// append-only file.
pub struct ElementCache {
    stamp: String,
    map: RwLock<HashMap<ElementKey, f64>>,
    log: Option<Mutex<File>>,
    path: Option<PathBuf>,
}

impl ElementCache {
    pub fn in_memory(stamp: &str) -> Self {
        ElementCache { stamp: stamp.to_owned(), map: RwLock::new(HashMap::new()), log: None, path: None }
    }

    /// Opens or creates a cache file. Entries written under a different
    /// stamp are discarded; an unreadable file is rebuilt from scratch.
    pub fn open(path: &Path, stamp: &str) -> Result<Self> {
        let mut map = HashMap::new();
        let mut rebuild = true;
        if let Ok(f) = File::open(path) {
            let mut lines = BufReader::new(f).lines();
            match lines.next() {
                Some(Ok(h)) if h == format!("{CACHE_HEADER} {stamp}") => {
                    rebuild = false;
                    for line in lines {
                        let parsed = line.ok().as_deref().and_then(ElementKey::decode);
                        match parsed {
                            Some((k, v)) => {
                                map.insert(k, v);
                            }
                            None => {
                                log::warn!("cache file {} is corrupted; rebuilding", path.display());
                                map.clear();
                                rebuild = true;
                                break;
                            }
                        }
                    }
                }
                Some(Ok(h)) if h.starts_with(CACHE_HEADER) => {
                    log::info!("cache file {} has a stale version stamp; discarding", path.display());
                }
                Some(_) => log::warn!("cache file {} is corrupted; rebuilding", path.display()),
                None => {}
            }
        }
        let file = if rebuild {
            let mut f = File::create(path).map_err(|e| Error::Cache(format!("{}: {e}", path.display())))?;
            writeln!(f, "{CACHE_HEADER} {stamp}")?;
            f
        } else {
            OpenOptions::new().append(true).open(path).map_err(|e| Error::Cache(format!("{}: {e}", path.display())))?
        };
        Ok(ElementCache {
            stamp: stamp.to_owned(),
            map: RwLock::new(map),
            log: Some(Mutex::new(file)),
            path: Some(path.to_owned()),
        })
    }

    pub fn stamp(&self) -> &str {
        &self.stamp
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &ElementKey) -> Option<f64> {
        self.map.read().unwrap().get(key).copied()
    }

    pub fn insert(&self, key: ElementKey, value: f64) -> Result<()> {
        let fresh = self.map.write().unwrap().insert(key, value).is_none();
        if fresh {
            if let Some(log) = &self.log {
                let mut f = log.lock().unwrap();
                writeln!(f, "{}", key.encode(value))?;
            }
        }
        Ok(())
    }

    /// Removes all entries, truncating the backing file.
    pub fn clear(&self) -> Result<()> {
        self.map.write().unwrap().clear();
        if let (Some(log), Some(path)) = (&self.log, &self.path) {
            let mut f = log.lock().unwrap();
            *f = File::create(path)?;
            writeln!(f, "{CACHE_HEADER} {}", self.stamp)?;
        }
        Ok(())
    }

    pub fn get_or_compute(&self, key: ElementKey, f: impl FnOnce() -> Result<f64>) -> Result<f64> {
        if let Some(v) = self.get(&key) {
            return Ok(v);
        }
        let v = f()?;
        self.insert(key, v)?;
        Ok(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Momentum {
    Orbital,
    Spin,
}

/// Single-atom matrix element engine: radial integrals (cached) times
/// angular factors.
pub struct Operators {
    radial: RadialSolver,
    cache: ElementCache,
    method: Method,
    integrations: AtomicU64,
}

impl Operators {
    pub fn new(data: Arc<SpeciesData>, grid: GridSpec, method: Method) -> Self {
        let stamp = cache_stamp(&data, &grid);
        Operators {
            radial: RadialSolver::new(data, grid),
            cache: ElementCache::in_memory(&stamp),
            method,
            integrations: AtomicU64::new(0),
        }
    }

    pub fn with_cache_file(data: Arc<SpeciesData>, grid: GridSpec, method: Method, path: &Path) -> Result<Self> {
        let stamp = cache_stamp(&data, &grid);
        let cache = ElementCache::open(path, &stamp)?;
        Ok(Operators { radial: RadialSolver::new(data, grid), cache, method, integrations: AtomicU64::new(0) })
    }

    /// Builtin data, default grid, Numerov wave functions.
    pub fn builtin() -> Self {
        Operators::new(Arc::new(SpeciesData::builtin().clone()), GridSpec::default(), Method::Numerov)
    }

    pub fn data(&self) -> &SpeciesData {
        self.radial.data()
    }

    pub fn radial_solver(&self) -> &RadialSolver {
        &self.radial
    }

    pub fn cache(&self) -> &ElementCache {
        &self.cache
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Number of radial integrations actually performed.
    pub fn integrations(&self) -> u64 {
        self.integrations.load(Ordering::Relaxed)
    }

    /// `<a| r^power |b>` in `a0^power`.
    pub fn radial(&self, a: &Level, b: &Level, power: i32) -> Result<f64> {
        self.radial_with(a, b, power, self.method)
    }

    pub fn radial_with(&self, a: &Level, b: &Level, power: i32, method: Method) -> Result<f64> {
        if a.species != b.species {
            return Err(Error::config(format!("matrix element between {} and {}", a.species, b.species)));
        }
        let key = ElementKey::new(a, b, power, method);
        self.cache.get_or_compute(key, || {
            self.integrations.fetch_add(1, Ordering::Relaxed);
            self.radial.matrix_element(a, b, power, method)
        })
    }

    /// `<bra| r^power C_kq |ket>` with `C_kq = sqrt(4 pi/(2k+1)) Y_kq`.
    /// Returns exactly 0 when a selection rule forbids the element.
    pub fn harmonic_element(&self, bra: &StateOne, ket: &StateOne, power: i32, k: i32, q: i32) -> Result<f64> {
        if !multipole_allowed(bra, ket, k, q) {
            return Ok(0.0);
        }
        self.harmonic_element_unculled(bra, ket, power, k, q)
    }

    /// Same as [`Operators::harmonic_element`] without the selection-rule
    /// shortcut.
    pub fn harmonic_element_unculled(&self, bra: &StateOne, ket: &StateOne, power: i32, k: i32, q: i32) -> Result<f64> {
        let ang = normalized_harmonic_element(&bra.angular(), k, q, &ket.angular());
        if ang == 0.0 {
            // Keeps the 0 exact even if the radial part were non-finite.
            return Ok(0.0);
        }
        Ok(self.radial(&bra.level(), &ket.level(), power)? * ang)
    }

    /// `<bra| p_kq |ket>` in `e a0^k`, `p_kq = e r^k C_kq`.
    pub fn multipole_element(&self, bra: &StateOne, ket: &StateOne, k: i32, q: i32) -> Result<f64> {
        self.harmonic_element(bra, ket, k, k, q)
    }

    /// `<bra| l_q |ket>` or `<bra| s_q |ket>` in units of hbar. The radial
    /// parts are taken as orthonormal, so the element is diagonal in `n`.
    pub fn momentum_element(&self, bra: &StateOne, ket: &StateOne, which: Momentum, q: i32) -> f64 {
        if bra.species != ket.species || bra.n != ket.n || bra.l != ket.l {
            return 0.0;
        }
        match which {
            Momentum::Orbital => orbital_momentum_element(&bra.angular(), q, &ket.angular()),
            Momentum::Spin => spin_momentum_element(&bra.angular(), q, &ket.angular()),
        }
    }
}

/// Selection rules for `<a| r^p C_kq |b>`: same species, `m_a = m_b + q`,
/// parity, and triangle conditions on `l` and `j`.
pub fn multipole_allowed(a: &StateOne, b: &StateOne, k: i32, q: i32) -> bool {
    a.species == b.species
        && (a.m - b.m).twice() == 2 * q
        && q.abs() <= k
        && (a.l + b.l + k) % 2 == 0
        && (a.l - b.l).abs() <= k
        && k <= a.l + b.l
        && (a.j - b.j).abs() <= HalfInteger::from_int(k)
        && HalfInteger::from_int(k) <= a.j + b.j
}
