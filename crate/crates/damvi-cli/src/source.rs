//! Dataset sources for the command line: CSV files or the synthetic
//! generator, selected by flags.

use std::path::PathBuf;
use std::str::FromStr;

use damvi::dataset::{load_csv, make_synthetic, Dataset};

use crate::CliError;

/// Parameters of a synthetic dataset, parsed from
/// `n=<count>,d=<dim>,ir=<ratio>,sep=<separation>`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub ir: f64,
    pub sep: f64,
}

impl FromStr for SyntheticSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut n = None;
        let mut d = None;
        let mut ir = None;
        let mut sep = None;
        for part in s.split(',') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got {part:?}"))?;
            match key.trim() {
                "n" => n = Some(value.trim().parse::<usize>().map_err(|e| e.to_string())?),
                "d" => d = Some(value.trim().parse::<usize>().map_err(|e| e.to_string())?),
                "ir" => ir = Some(value.trim().parse::<f64>().map_err(|e| e.to_string())?),
                "sep" => sep = Some(value.trim().parse::<f64>().map_err(|e| e.to_string())?),
                other => return Err(format!("unknown key {other:?}")),
            }
        }
        Ok(SyntheticSpec {
            n: n.ok_or("missing n")?,
            d: d.ok_or("missing d")?,
            ir: ir.ok_or("missing ir")?,
            sep: sep.ok_or("missing sep")?,
        })
    }
}

/// Where the experiment data comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv {
        path: PathBuf,
        label_column: String,
        positive_label: String,
    },
    Synthetic(SyntheticSpec),
}

impl DataSource {
    /// Loads or generates the dataset. The seed only affects the synthetic
    /// branch.
    pub fn load(&self, seed: u64) -> Result<Dataset, CliError> {
        match self {
            DataSource::Csv {
                path,
                label_column,
                positive_label,
            } => load_csv(path, label_column, positive_label).map_err(CliError::from),
            DataSource::Synthetic(spec) => {
                make_synthetic(spec.n, spec.d, spec.ir, spec.sep, seed).map_err(CliError::from)
            }
        }
    }
}
