//! End-to-end experiment runners and their metrics.

pub mod fsdd;
pub mod timeseries;

use serde::{Deserialize, Serialize};

use crate::error::{shape, Error, Result};
use crate::readout::{ReadoutNetwork, Sample, Target};
use crate::scalar::Scalar;

pub use fsdd::{run_fsdd_experiment, run_noise_sweep, FsddConfig, FsddOutcome};
pub use timeseries::{generate_series, run_timeseries_experiment, TimeSeriesConfig, TimeSeriesOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub samples: usize,
    pub accuracy: Option<f64>,
    /// Word error rate, defined as `1 - accuracy`.
    pub wer: Option<f64>,
    /// `confusion[true][predicted]` counts.
    pub confusion: Option<Vec<Vec<u64>>>,
    /// `None` where a class was never predicted.
    pub precision: Vec<Option<f64>>,
    /// `None` where a class is absent from the test set.
    pub recall: Vec<Option<f64>>,
    pub nrmse: Option<f64>,
    pub config_hash: String,
    pub seed: u64,
}

impl MetricsReport {
    pub fn regression(nrmse: f64, seed: u64) -> Self {
        Self {
            samples: 0,
            accuracy: None,
            wer: None,
            confusion: None,
            precision: Vec::new(),
            recall: Vec::new(),
            nrmse: Some(nrmse),
            config_hash: String::new(),
            seed,
        }
    }

    /// Builds classification metrics from `(true, predicted)` pairs.
    pub fn from_predictions(pairs: &[(usize, usize)], classes: usize, seed: u64) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyInput("no predictions to evaluate".into()));
        }
        let mut confusion = vec![vec![0u64; classes]; classes];
        for &(t, p) in pairs {
            if t >= classes || p >= classes {
                return Err(shape(format!("class index < {classes}"), t.max(p)));
            }
            confusion[t][p] += 1;
        }
        let correct: u64 = (0..classes).map(|c| confusion[c][c]).sum();
        let accuracy = correct as f64 / pairs.len() as f64;
        let ratio = |hit: u64, total: u64| (total > 0).then(|| hit as f64 / total as f64);
        let precision = (0..classes)
            .map(|c| ratio(confusion[c][c], (0..classes).map(|t| confusion[t][c]).sum()))
            .collect();
        let recall = (0..classes)
            .map(|c| ratio(confusion[c][c], confusion[c].iter().sum()))
            .collect();
        Ok(Self {
            samples: pairs.len(),
            accuracy: Some(accuracy),
            wer: Some(1.0 - accuracy),
            confusion: Some(confusion),
            precision,
            recall,
            nrmse: None,
            config_hash: String::new(),
            seed,
        })
    }

    pub fn with_config_hash(mut self, hash: impl Into<String>) -> Self {
        self.config_hash = hash.into();
        self
    }

    /// Confusion matrix as CSV: header `true,p0..p{n-1}`, one row per true class.
    pub fn write_confusion_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        let Some(m) = &self.confusion else {
            return Ok(());
        };
        let head: Vec<String> = (0..m.len()).map(|c| format!("p{c}")).collect();
        writeln!(out, "true,{}", head.join(","))?;
        for (t, row) in m.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            writeln!(out, "{t},{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Classification metrics of `net` on `test` (class targets only).
pub fn evaluate<T: Scalar>(net: &ReadoutNetwork<T>, test: &[Sample<T>], seed: u64) -> Result<MetricsReport> {
    let classes = net.output_dim();
    let pairs = test
        .iter()
        .map(|(x, target)| match target {
            Target::Class(c) => Ok((*c, net.predict_class(x)?)),
            Target::Values(_) => Err(Error::InvalidValue("evaluate expects class targets".into())),
        })
        .collect::<Result<Vec<_>>>()?;
    MetricsReport::from_predictions(&pairs, classes, seed)
}
