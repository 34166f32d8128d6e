use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{RunConfig, RUN_CONFIG_FILE};
use super::eval::SUMMARY_FILE;
use crate::error::{Error, Result};
use crate::metrics::{read_rows, SummaryRow};
use crate::saliency::Method;

/// A summary row with the provenance of the run it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub run_dir: String,
    pub seed: u64,
    pub similarity: String,
    pub input_size: usize,
    pub channels: String,
    pub prototypes_per_class: usize,
    pub config_crc32: String,
    pub model_kind: String,
    pub method: Method,
    pub n_prototypes: usize,
    pub audc_prototypes_mean: f64,
    pub audc_prototypes_std: f64,
    pub n_test: usize,
    pub audc_test_mean: f64,
    pub audc_test_std: f64,
    pub irrelevant_prototypes_pct: Option<f64>,
    pub irrelevant_test_pct: Option<f64>,
}

fn geometry(cfg: &RunConfig) -> (usize, usize, Vec<usize>) {
    (cfg.network.input_channels, cfg.network.input_size, cfg.network.channels.clone())
}

/// Concatenates the summaries of several eval runs, in argument order.
pub fn report(run_dirs: &[PathBuf]) -> Result<Vec<ReportRow>> {
    if run_dirs.is_empty() {
        return Err(Error::invalid("report needs at least one run directory"));
    }
    let mut rows = Vec::new();
    let mut first: Option<(PathBuf, (usize, usize, Vec<usize>))> = None;
    for dir in run_dirs {
        let summary_path = dir.join(SUMMARY_FILE);
        if !summary_path.is_file() {
            return Err(Error::input(dir, format!("run directory has no {SUMMARY_FILE}")));
        }
        let config_path = dir.join(RUN_CONFIG_FILE);
        if !config_path.is_file() {
            return Err(Error::input(dir, format!("run directory has no {RUN_CONFIG_FILE}")));
        }
        let bytes = std::fs::read(&config_path).map_err(|e| Error::io(&config_path, e))?;
        let cfg = RunConfig::load(&config_path)?;
        let geo = geometry(&cfg);
        match &first {
            None => first = Some((dir.clone(), geo)),
            Some((d0, g0)) if *g0 != geo => {
                return Err(Error::input(
                    dir,
                    format!(
                        "network geometry {:?} differs from {:?} in {}",
                        geo,
                        g0,
                        d0.display()
                    ),
                ));
            }
            Some(_) => {}
        }
        let summary: Vec<SummaryRow> = read_rows(&summary_path)?;
        let channels: Vec<String> = cfg.network.channels.iter().map(usize::to_string).collect();
        for s in summary {
            rows.push(ReportRow {
                run_dir: dir.display().to_string(),
                seed: cfg.seed,
                similarity: cfg.model.similarity.name().to_string(),
                input_size: cfg.network.input_size,
                channels: channels.join("-"),
                prototypes_per_class: cfg.model.prototypes_per_class,
                config_crc32: format!("{:08x}", crc32fast::hash(&bytes)),
                model_kind: s.model_kind,
                method: s.method,
                n_prototypes: s.n_prototypes,
                audc_prototypes_mean: s.audc_prototypes_mean,
                audc_prototypes_std: s.audc_prototypes_std,
                n_test: s.n_test,
                audc_test_mean: s.audc_test_mean,
                audc_test_std: s.audc_test_std,
                irrelevant_prototypes_pct: s.irrelevant_prototypes_pct,
                irrelevant_test_pct: s.irrelevant_test_pct,
            });
        }
    }
    Ok(rows)
}

pub fn write_report(path: &Path, rows: &[ReportRow]) -> Result<()> {
    crate::metrics::write_rows(path, rows)
}
