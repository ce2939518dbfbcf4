//! Experiment and importance reports, their aggregates and file output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::InputMode;

/// Pseudo test environment holding per-seed averages over the real cells.
pub const AVERAGE_ENV: &str = "average";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub input: String,
    pub auxiliary: String,
    pub strategy: String,
    pub test_env: String,
    pub seed: u64,
    pub mse: f64,
}

impl ReportRow {
    fn key(&self) -> (&str, &str, &str, &str, &str, u64) {
        (
            &self.model,
            &self.input,
            &self.auxiliary,
            &self.strategy,
            &self.test_env,
            self.seed,
        )
    }
}

/// Mean, population standard deviation and median of one cell across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub model: String,
    pub input: String,
    pub auxiliary: String,
    pub strategy: String,
    pub test_env: String,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: String,
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<Aggregate>,
    pub config_hash: String,
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn population_std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Middle value; the mean of the two middle values for even lengths.
pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

type CellKey = (String, String, String, String);

impl ExperimentReport {
    /// Sorts rows by (model, input, auxiliary, strategy, test env, seed) and
    /// derives the aggregates.
    pub fn from_rows(kind: &str, mut rows: Vec<ReportRow>, config_hash: &str) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| !(r.mse.is_finite() && r.mse >= 0.0)) {
            return Err(Error::Invalid(format!(
                "row {} / {} / seed {} has invalid mse {}",
                r.model, r.test_env, r.seed, r.mse
            )));
        }
        if rows.iter().any(|r| r.test_env == AVERAGE_ENV) {
            return Err(Error::Invalid(format!("`{AVERAGE_ENV}` is reserved")));
        }
        rows.sort_by(|a, b| a.key().cmp(&b.key()));
        if rows.windows(2).any(|w| w[0].key() == w[1].key()) {
            return Err(Error::Invalid("duplicate report row".into()));
        }
        let aggregates = aggregate(&rows);
        Ok(ExperimentReport {
            kind: kind.to_string(),
            rows,
            aggregates,
            config_hash: config_hash.to_string(),
        })
    }

    pub fn aggregate(&self, model: &str, input: &str, strategy: &str, test_env: &str) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.model == model && a.input == input && a.strategy == strategy && a.test_env == test_env)
    }

    /// Per-seed values of one model row: the single cell when there is one
    /// test environment, else the average across environments.
    pub fn seed_values(&self, model: &str, input: &str, strategy: &str) -> BTreeMap<u64, f64> {
        let mut by_seed: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for r in &self.rows {
            if r.model == model && r.input == input && r.strategy == strategy {
                by_seed.entry(r.seed).or_default().push(r.mse);
            }
        }
        by_seed.into_iter().map(|(s, v)| (s, mean(&v))).collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        write_csv(&self.rows)
    }

    pub fn aggregates_csv(&self) -> Result<String> {
        write_csv(&self.aggregates)
    }

    pub fn summary(&self) -> String {
        let mut s = serde_json::to_string_pretty(&serde_json::json!({
            "kind": self.kind,
            "config_hash": self.config_hash,
            "rows": self.rows.len(),
            "aggregates": self.aggregates,
        }))
        .expect("summary serializes");
        s.push('\n');
        s
    }

    /// Fixed-width table of means: one line per model row, one column per
    /// test environment.
    pub fn table(&self) -> String {
        let mut envs: Vec<&str> = self
            .aggregates
            .iter()
            .map(|a| a.test_env.as_str())
            .filter(|e| *e != AVERAGE_ENV)
            .collect();
        envs.sort_unstable();
        envs.dedup();
        let multi = envs.len() > 1;
        if multi {
            envs.push(AVERAGE_ENV);
        }
        let mut out = format!("{:<28} {:<18} {:<10} {:<10}", "model", "input", "auxiliary", "strategy");
        for e in &envs {
            let _ = write!(out, " {e:>10}");
        }
        out.push('\n');
        let mut seen: Vec<(&str, &str, &str, &str)> = Vec::new();
        for a in &self.aggregates {
            let k = (a.model.as_str(), a.input.as_str(), a.auxiliary.as_str(), a.strategy.as_str());
            if seen.contains(&k) {
                continue;
            }
            seen.push(k);
            let _ = write!(out, "{:<28} {:<18} {:<10} {:<10}", k.0, k.1, k.2, k.3);
            for e in &envs {
                match self.aggregate(k.0, k.1, k.3, e) {
                    Some(c) => {
                        let _ = write!(out, " {:>10.4}", c.mean);
                    }
                    None => {
                        let _ = write!(out, " {:>10}", "");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

fn write_csv<T: Serialize>(records: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(|e| Error::Invalid(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn aggregate(rows: &[ReportRow]) -> Vec<Aggregate> {
    let mut cells: BTreeMap<(CellKey, String), Vec<f64>> = BTreeMap::new();
    let mut per_seed: BTreeMap<CellKey, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        let k = (r.model.clone(), r.input.clone(), r.auxiliary.clone(), r.strategy.clone());
        cells.entry((k.clone(), r.test_env.clone())).or_default().push(r.mse);
        per_seed.entry(k).or_default().entry(r.seed).or_default().push(r.mse);
    }
    let make = |k: &CellKey, env: &str, v: &[f64]| Aggregate {
        model: k.0.clone(),
        input: k.1.clone(),
        auxiliary: k.2.clone(),
        strategy: k.3.clone(),
        test_env: env.to_string(),
        n: v.len(),
        mean: mean(v),
        std: population_std(v),
        median: median(v),
    };
    let mut out = Vec::new();
    for (k, seeds) in &per_seed {
        for ((ck, env), v) in cells.range((k.clone(), String::new())..) {
            if ck != k {
                break;
            }
            out.push(make(k, env, v));
        }
        let envs = cells.keys().filter(|(ck, _)| ck == k).count();
        if envs > 1 {
            let avgs: Vec<f64> = seeds.values().map(|v| mean(v)).collect();
            out.push(make(k, AVERAGE_ENV, &avgs));
        }
    }
    out
}

/// How raw MSE gains are rescaled across attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Standardization {
    /// `(g - mean) / std` with the population standard deviation.
    #[default]
    ZScore,
    /// `(g - min) / (max - min)`.
    MinMax,
}

/// Rescaled gains; all zeros when fewer than two gains or all are equal.
pub fn standardize(gains: &[f64], method: Standardization) -> Vec<f64> {
    let n = gains.len();
    if n < 2 {
        return vec![0.0; n];
    }
    match method {
        Standardization::ZScore => {
            let m = mean(gains);
            let sd = population_std(gains);
            if sd == 0.0 {
                return vec![0.0; n];
            }
            gains.iter().map(|g| (g - m) / sd).collect()
        }
        Standardization::MinMax => {
            let lo = gains.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi == lo {
                return vec![0.0; n];
            }
            gains.iter().map(|g| (g - lo) / (hi - lo)).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub attribute: String,
    pub raw_gain: f64,
    pub standardized_gain: f64,
    /// 1 is the most important.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    /// Sorted by rank.
    pub entries: Vec<ImportanceEntry>,
    pub baseline_mse: f64,
    pub standardization: Standardization,
    pub input_mode: InputMode,
    pub seeds: Vec<u64>,
    pub config_hash: String,
}

impl ImportanceReport {
    /// Standardizes `gains` and ranks them by standardized gain, descending;
    /// ties go to the lexicographically smaller attribute name.
    pub fn from_gains(
        gains: Vec<(String, f64)>,
        baseline_mse: f64,
        standardization: Standardization,
        input_mode: InputMode,
        seeds: Vec<u64>,
        config_hash: &str,
    ) -> Result<Self> {
        if gains.iter().any(|(_, g)| !g.is_finite()) {
            return Err(Error::Invalid("non-finite importance gain".into()));
        }
        let raw: Vec<f64> = gains.iter().map(|(_, g)| *g).collect();
        let z = standardize(&raw, standardization);
        let mut entries: Vec<ImportanceEntry> = gains
            .into_iter()
            .zip(z)
            .map(|((attribute, raw_gain), standardized_gain)| ImportanceEntry {
                attribute,
                raw_gain,
                standardized_gain,
                rank: 0,
            })
            .collect();
        entries.sort_by(|a, b| {
            b.standardized_gain
                .total_cmp(&a.standardized_gain)
                .then_with(|| b.raw_gain.total_cmp(&a.raw_gain))
                .then_with(|| a.attribute.cmp(&b.attribute))
        });
        for (i, e) in entries.iter_mut().enumerate() {
            e.rank = i + 1;
        }
        Ok(ImportanceReport {
            entries,
            baseline_mse,
            standardization,
            input_mode,
            seeds,
            config_hash: config_hash.to_string(),
        })
    }

    pub fn rank_of(&self, attribute: &str) -> Option<usize> {
        self.entries.iter().find(|e| e.attribute == attribute).map(|e| e.rank)
    }

    pub fn to_csv(&self) -> Result<String> {
        write_csv(&self.entries)
    }

    pub fn summary(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }

    /// Horizontal bar chart of standardized gains in rank order.
    pub fn to_svg(&self) -> String {
        let bar_h = 22.0;
        let label_w = 160.0;
        let plot_w = 400.0;
        let top = 40.0;
        let height = top + bar_h * self.entries.len() as f64 + 30.0;
        let width = label_w + plot_w + 80.0;
        let lo = self.entries.iter().map(|e| e.standardized_gain).fold(0.0, f64::min);
        let hi = self.entries.iter().map(|e| e.standardized_gain).fold(0.0, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let x_of = |v: f64| label_w + (v - lo) / span * plot_w;
        let zero = x_of(0.0);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
        );
        let _ = writeln!(
            s,
            r#"  <text x="{}" y="22" font-family="sans-serif" font-size="14" text-anchor="middle">Standardized MSE gain on variable removal</text>"#,
            width / 2.0
        );
        for (i, e) in self.entries.iter().enumerate() {
            let y = top + bar_h * i as f64;
            let x1 = x_of(e.standardized_gain);
            let (x, w) = if x1 >= zero { (zero, x1 - zero) } else { (x1, zero - x1) };
            let fill = if e.standardized_gain >= 0.0 { "#3b6ea5" } else { "#c0504d" };
            let _ = writeln!(
                s,
                r#"  <text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="end">{}</text>"#,
                label_w - 8.0,
                y + bar_h * 0.65,
                xml_escape(&e.attribute)
            );
            let _ = writeln!(
                s,
                r#"  <rect x="{x:.2}" y="{:.2}" width="{w:.2}" height="{:.2}" fill="{fill}"/>"#,
                y + 3.0,
                bar_h - 6.0
            );
            let _ = writeln!(
                s,
                r#"  <text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{:.3}</text>"#,
                label_w + plot_w + 8.0,
                y + bar_h * 0.65,
                e.standardized_gain
            );
        }
        let _ = writeln!(
            s,
            r#"  <line x1="{zero:.2}" y1="{:.2}" x2="{zero:.2}" y2="{:.2}" stroke="black" stroke-width="1"/>"#,
            top - 4.0,
            height - 26.0
        );
        s.push_str("</svg>\n");
        s
    }
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Anything [`emit_report`] can write.
pub trait ReportOutput {
    /// File stem shared by every output file.
    fn stem(&self) -> String;
    /// `(file name, contents)` pairs.
    fn files(&self) -> Result<Vec<(String, String)>>;
}

impl ReportOutput for ExperimentReport {
    fn stem(&self) -> String {
        self.kind.clone()
    }

    fn files(&self) -> Result<Vec<(String, String)>> {
        let st = self.stem();
        Ok(vec![
            (format!("{st}.csv"), self.to_csv()?),
            (format!("{st}_aggregates.csv"), self.aggregates_csv()?),
            (format!("{st}_summary.json"), self.summary()),
            (format!("{st}_table.txt"), self.table()),
        ])
    }
}

impl ReportOutput for ImportanceReport {
    fn stem(&self) -> String {
        match self.input_mode {
            InputMode::SatelliteOnly => "importance".into(),
            InputMode::SatellitePlusAttrs => "importance_input".into(),
        }
    }

    fn files(&self) -> Result<Vec<(String, String)>> {
        let st = self.stem();
        Ok(vec![
            (format!("{st}.csv"), self.to_csv()?),
            (format!("{st}_summary.json"), self.summary()),
            (format!("{st}.svg"), self.to_svg()),
        ])
    }
}

/// Writes every output file of `report` into `out_dir`, creating it.
pub fn emit_report(report: &dyn ReportOutput, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    report
        .files()?
        .into_iter()
        .map(|(name, body)| {
            let p = out_dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
            Ok(p)
        })
        .collect()
}
