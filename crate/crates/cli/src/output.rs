use std::fs;
use std::path::Path;

use serde::Serialize;

use rydpair::Error;

pub fn write_csv<S: Serialize>(path: &Path, rows: impl IntoIterator<Item = S>) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

#[derive(Serialize)]
pub struct SpectrumRow {
    pub theta_deg: f64,
    #[serde(rename = "freq_MHz")]
    pub freq_mhz: f64,
    pub weight: f64,
}

#[derive(Serialize)]
pub struct EvolutionRow {
    pub t_us: f64,
    pub p_probe: f64,
}

#[derive(Serialize)]
pub struct AdmixtureRow {
    #[serde(rename = "R_m")]
    pub r_m: f64,
    #[serde(rename = "R_over_R_LR")]
    pub r_over_le_roy: f64,
    pub admixture: f64,
}

pub struct MapRow {
    pub field: f64,
    pub energy_ghz: f64,
    pub label: String,
    pub overlap: f64,
}

/// Field map table; the first column is named after the field unit.
pub fn write_map(path: &Path, field_column: &str, rows: &[MapRow]) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record([field_column, "energy_GHz", "label", "overlap"]).map_err(csv_error)?;
    for r in rows {
        w.serialize((r.field, r.energy_ghz, &r.label, r.overlap)).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}
