use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::LossComponents;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Task, reconstruction and causal penalty.
    Causal,
    /// Contrastive and task.
    Contrastive,
    Joint,
    Pretrain,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Causal => "causal",
            Stage::Contrastive => "contrastive",
            Stage::Joint => "joint",
            Stage::Pretrain => "pretrain",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub epoch: usize,
    pub stage: Stage,
    /// Batch means of the loss terms, measured before each update.
    pub components: LossComponents,
    pub total: f64,
    /// Penalty evaluations skipped for degenerate groups in this pass.
    pub skipped: usize,
    pub evaluations: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
    pub seed: u64,
    pub config_hash: String,
}

pub const LOG_COLUMNS: [&str; 9] = [
    "epoch",
    "stage",
    "mse",
    "recon",
    "ind",
    "cause",
    "conf",
    "contrastive",
    "total",
];

impl TrainLog {
    /// CSV with one row per (epoch, stage); wall-clock times are left out so
    /// reruns produce identical files.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(LOG_COLUMNS).expect("in-memory write");
        for r in &self.rows {
            let c = &r.components;
            w.write_record([
                r.epoch.to_string(),
                r.stage.to_string(),
                c.mse.to_string(),
                c.recon.to_string(),
                c.ind.to_string(),
                c.cause.to_string(),
                c.conf.to_string(),
                c.contrastive.to_string(),
                r.total.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Rows without timing, for reproducibility comparisons.
    pub fn untimed(&self) -> Vec<LogRow> {
        self.rows
            .iter()
            .map(|r| LogRow { seconds: 0.0, ..r.clone() })
            .collect()
    }

    pub fn total_seconds(&self) -> f64 {
        self.rows.iter().map(|r| r.seconds).sum()
    }

    pub fn last(&self, stage: Stage) -> Option<&LogRow> {
        self.rows.iter().rev().find(|r| r.stage == stage)
    }
}
