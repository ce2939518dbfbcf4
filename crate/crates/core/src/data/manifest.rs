//! CSV manifest I/O.
//!
//! Columns: `sample_id,site_code,site_name,lat,lon,year,date,tile_path,om,<attr_1>,...`.
//! Tile paths are stored relative to the manifest's directory. Values are
//! physical (unscaled).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use super::tile::{read_tile, write_tile};
use super::{Dataset, EnvironmentId, Sample, SiteId};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const SITES_FILE: &str = "sites.csv";
const FIXED_COLUMNS: [&str; 9] = [
    "sample_id",
    "site_code",
    "site_name",
    "lat",
    "lon",
    "year",
    "date",
    "tile_path",
    "om",
];

fn resolve_manifest(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

/// Loads a manifest (file, or directory containing `manifest.csv`) and all
/// referenced tiles. If a `sites.csv` sits next to the manifest it defines
/// the site table order; otherwise sites appear in first-seen order.
pub fn load_manifest(path: &Path) -> Result<Dataset> {
    let path = resolve_manifest(path);
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Manifest {
            row: 0,
            msg: e.to_string(),
        })?
        .clone();
    if headers.len() < FIXED_COLUMNS.len()
        || headers.iter().zip(FIXED_COLUMNS).any(|(h, want)| h != want)
    {
        return Err(Error::Manifest {
            row: 0,
            msg: format!(
                "header must start with {}, got {}",
                FIXED_COLUMNS.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let schema: Vec<String> = headers.iter().skip(FIXED_COLUMNS.len()).map(String::from).collect();

    let mut sites: Vec<SiteId> = Vec::new();
    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Manifest {
            row,
            msg: e.to_string(),
        })?;
        let bad = |msg: String| Error::Manifest { row, msg };
        let num = |idx: usize| -> Result<f64> {
            let raw = &record[idx];
            raw.trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("column `{}`: cannot parse `{raw}`", &headers[idx])))
        };
        let site = SiteId::new(&record[1], &record[2], num(3)?, num(4)?);
        site.validate().map_err(|e| bad(e.to_string()))?;
        match sites.iter().find(|s| s.code == site.code) {
            Some(known) if *known != site => {
                return Err(bad(format!(
                    "site `{}` redeclared with different name/coordinates",
                    site.code
                )))
            }
            Some(_) => {}
            None => sites.push(site),
        }
        let year: i32 = record[5]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad year `{}`", &record[5])))?;
        let date = NaiveDate::parse_from_str(record[6].trim(), "%Y-%m-%d")
            .map_err(|_| bad(format!("bad ISO-8601 date `{}`", &record[6])))?;
        let tile_path = base.join(&record[7]);
        let tile = match read_tile(&tile_path) {
            Ok(t) => t,
            Err(e) => {
                return Err(bad(format!("tile `{}`: {e}", tile_path.display())));
            }
        };
        let om = num(8)?;
        let attrs = (FIXED_COLUMNS.len()..headers.len())
            .map(num)
            .collect::<Result<Vec<f64>>>()?;
        samples.push(Sample {
            id: record[0].to_string(),
            env: EnvironmentId::new(&record[1], year),
            date,
            tile,
            attrs,
            om,
        });
    }

    let sites_path = base.join(SITES_FILE);
    if sites_path.exists() {
        let table = load_sites(&sites_path)?;
        for s in &sites {
            match table.iter().find(|t| t.code == s.code) {
                Some(t) if t == s => {}
                _ => {
                    return Err(Error::Invalid(format!(
                        "site `{}` in manifest disagrees with {}",
                        s.code,
                        sites_path.display()
                    )))
                }
            }
        }
        sites = table;
    }
    Dataset::new(samples, schema, sites)
}

/// Reads a `site_code,name,lat,lon` table.
pub fn load_sites(path: &Path) -> Result<Vec<SiteId>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Invalid(format!(
        "{}: {e}",
        path.display()
    )))?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Invalid(format!("{} row {}: {e}", path.display(), i + 1)))?;
        if rec.len() != 4 {
            return Err(Error::Invalid(format!(
                "{} row {}: expected 4 columns",
                path.display(),
                i + 1
            )));
        }
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| {
                Error::Invalid(format!("{} row {}: bad number `{s}`", path.display(), i + 1))
            })
        };
        let site = SiteId::new(&rec[0], &rec[1], parse(&rec[2])?, parse(&rec[3])?);
        site.validate()?;
        out.push(site);
    }
    Ok(out)
}

pub fn write_sites(path: &Path, sites: &[SiteId]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Invalid(e.to_string()))?;
    let csv_err = |e: csv::Error| Error::Invalid(format!("{}: {e}", path.display()));
    w.write_record(["site_code", "name", "lat", "lon"]).map_err(csv_err)?;
    for s in sites {
        w.write_record([s.code.clone(), s.name.clone(), s.lat.to_string(), s.lon.to_string()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `manifest.csv`, `sites.csv` and `tiles/<sample_id>.omtl` into `dir`.
/// Tile values are stored as float32. Returns the manifest path.
pub fn write_manifest(ds: &Dataset, dir: &Path) -> Result<PathBuf> {
    let tiles_dir = dir.join("tiles");
    fs::create_dir_all(&tiles_dir).map_err(|e| Error::io(&tiles_dir, e))?;
    let manifest = dir.join(MANIFEST_FILE);
    let mut w = csv::Writer::from_path(&manifest).map_err(|e| Error::Invalid(e.to_string()))?;
    let csv_err = |e: csv::Error| Error::Invalid(format!("{}: {e}", manifest.display()));

    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(ds.attribute_schema().iter().cloned());
    w.write_record(&header).map_err(csv_err)?;

    let sites: BTreeMap<&str, &SiteId> = ds.sites().iter().map(|s| (s.code.as_str(), s)).collect();
    for s in ds.samples() {
        let rel = format!("tiles/{}.omtl", s.id);
        write_tile(&dir.join(&rel), &s.tile)?;
        let site = sites[s.env.site.as_str()];
        let mut rec = vec![
            s.id.clone(),
            site.code.clone(),
            site.name.clone(),
            site.lat.to_string(),
            site.lon.to_string(),
            s.env.year.to_string(),
            s.date.format("%Y-%m-%d").to_string(),
            rel,
            s.om.to_string(),
        ];
        rec.extend(s.attrs.iter().map(f64::to_string));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(&manifest, e))?;
    write_sites(&dir.join(SITES_FILE), ds.sites())?;
    Ok(manifest)
}
