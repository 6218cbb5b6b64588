use std::collections::HashMap;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Codec, QualityConfig};
use crate::error::{Error, Result};
use crate::harness::manifest::EvalRecord;
use crate::image::{read_pgm, FilterSpec};
use crate::metric::PreparedReference;
use crate::stats::{
    kendall_tau_b, logistic5_fit, plcc_with_fit, psnr, spearman, LogisticFit, Psnr, MIN_FIT_POINTS,
};

/// Score spreads at or below this are rounding noise (identical inputs
/// score 1 to this precision), so such a codec has no usable ordering.
const SCORE_NOISE: f64 = 1e-9;

pub const THREADS_ENV: &str = "SAAKIQA_THREADS";
pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Batch-level overrides of the default configuration.
#[derive(Clone, Copy, Debug, Default)]
pub struct EvalOptions {
    /// Applies to every codec; without it `jpeg`/`jpeg2000` use their defaults
    /// and `other` rows fail.
    pub lambda: Option<f64>,
    pub sigma: Option<f64>,
    /// Worker count; falls back to `SAAKIQA_THREADS`, then rayon's default.
    pub threads: Option<usize>,
}

impl EvalOptions {
    pub fn base_config(&self) -> Result<QualityConfig> {
        let mut config = QualityConfig::default();
        if let Some(sigma) = self.sigma {
            config.filter = FilterSpec::with_sigma(sigma)?;
        }
        if let Some(lambda) = self.lambda {
            config = config.with_lambda(lambda);
        }
        config.validate()?;
        Ok(config)
    }

    fn threads(&self) -> Option<usize> {
        self.threads.or_else(|| {
            std::env::var(THREADS_ENV)
                .ok()
                .and_then(|v| v.trim().parse().ok())
                .filter(|&n| n > 0)
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecordResult {
    pub index: usize,
    #[serde(flatten)]
    pub record: EvalRecord,
    pub lambda: Option<f64>,
    pub score: Option<f64>,
    pub psnr_db: Option<Psnr>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CodecSummary {
    pub codec: Codec,
    /// Records of this codec in the manifest.
    pub n: usize,
    /// Records that produced a score.
    pub n_scored: usize,
    pub plcc: Option<f64>,
    pub srcc: Option<f64>,
    pub krcc: Option<f64>,
    pub fit: Option<LogisticFit>,
    pub warning: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunInfo {
    pub unix_time: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    pub tool_version: String,
    pub config: QualityConfig,
    pub lambda_override: Option<f64>,
    pub codecs: Vec<CodecSummary>,
    pub records: Vec<RecordResult>,
    /// Not covered by the batch determinism guarantee.
    pub run: RunInfo,
}

fn score_record(
    index: usize,
    record: &EvalRecord,
    reference: &std::result::Result<PreparedReference, String>,
    options: &EvalOptions,
) -> RecordResult {
    let mut result = RecordResult {
        index,
        record: record.clone(),
        lambda: None,
        score: None,
        psnr_db: None,
        error: None,
    };
    let outcome = (|| -> Result<(f64, f64, Psnr)> {
        let lambda = record.codec.resolve_lambda(options.lambda)?;
        let reference = reference
            .as_ref()
            .map_err(|e| Error::GeometryMismatch(format!("reference unusable: {e}")))?;
        let ref_img = read_pgm(&record.ref_path)?;
        let dist = read_pgm(&record.dist_path)?;
        let assessment = reference.assess_with_lambda(&dist, lambda)?;
        Ok((lambda, assessment.score, psnr(&ref_img, &dist)?))
    })();
    match outcome {
        Ok((lambda, score, db)) => {
            result.lambda = Some(lambda);
            result.score = Some(score);
            result.psnr_db = Some(db);
        }
        Err(e) => result.error = Some(e.to_string()),
    }
    result
}

fn summarize(codec: Codec, rows: &[&RecordResult]) -> CodecSummary {
    let scored: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.score.map(|s| (s, r.record.mos)))
        .collect();
    let mut summary = CodecSummary {
        codec,
        n: rows.len(),
        n_scored: scored.len(),
        plcc: None,
        srcc: None,
        krcc: None,
        fit: None,
        warning: None,
    };
    if scored.len() < MIN_FIT_POINTS {
        summary.warning = Some(format!(
            "{} scored records; at least {MIN_FIT_POINTS} needed for regression",
            scored.len()
        ));
        return summary;
    }
    let (scores, mos): (Vec<f64>, Vec<f64>) = scored.into_iter().unzip();
    let computed = (|| -> Result<(LogisticFit, f64, f64, f64)> {
        let (lo, hi) = scores
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
                (lo.min(s), hi.max(s))
            });
        if hi - lo <= SCORE_NOISE {
            return Err(Error::DegenerateVariance);
        }
        let fit = logistic5_fit(&scores, &mos)?;
        let plcc = plcc_with_fit(&fit, &scores, &mos)?;
        Ok((
            fit,
            plcc,
            spearman(&scores, &mos)?,
            kendall_tau_b(&scores, &mos)?,
        ))
    })();
    match computed {
        Ok((fit, plcc, srcc, krcc)) => {
            if !fit.converged {
                summary.warning = Some(format!(
                    "regression did not converge after {} iterations",
                    fit.iterations
                ));
            }
            summary.plcc = Some(plcc);
            summary.srcc = Some(srcc);
            summary.krcc = Some(krcc);
            summary.fit = Some(fit);
        }
        Err(e) => summary.warning = Some(format!("correlations omitted: {e}")),
    }
    summary
}

/// Scores every record and computes per-codec agreement statistics.
///
/// Each distinct reference is prepared once. Output rows keep manifest order
/// regardless of worker scheduling. A failing row becomes an error entry.
pub fn run_eval(records: &[EvalRecord], options: &EvalOptions) -> Result<EvalReport> {
    let config = options.base_config()?;

    let mut refs: Vec<&PathBuf> = Vec::new();
    let mut ref_slot: HashMap<&PathBuf, usize> = HashMap::new();
    for rec in records {
        ref_slot.entry(&rec.ref_path).or_insert_with(|| {
            refs.push(&rec.ref_path);
            refs.len() - 1
        });
    }

    let work = || {
        let prepared: Vec<std::result::Result<PreparedReference, String>> = refs
            .par_iter()
            .map(|path| {
                read_pgm(path)
                    .and_then(|img| PreparedReference::new(&img, &config))
                    .map_err(|e| e.to_string())
            })
            .collect();
        records
            .par_iter()
            .enumerate()
            .map(|(i, rec)| score_record(i, rec, &prepared[ref_slot[&rec.ref_path]], options))
            .collect::<Vec<_>>()
    };
    let results = match options.threads() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Io(std::io::Error::other(e)))?
            .install(work),
        None => work(),
    };

    if results.iter().all(|r| r.score.is_none()) {
        return Err(Error::NoValidRecords);
    }

    let codecs = [Codec::Jpeg, Codec::Jpeg2000, Codec::Other]
        .into_iter()
        .filter_map(|codec| {
            let rows: Vec<&RecordResult> =
                results.iter().filter(|r| r.record.codec == codec).collect();
            (!rows.is_empty()).then(|| summarize(codec, &rows))
        })
        .collect();

    let unix_time = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    Ok(EvalReport {
        tool_version: TOOL_VERSION.to_string(),
        config,
        lambda_override: options.lambda,
        codecs,
        records: results,
        run: RunInfo { unix_time },
    })
}
