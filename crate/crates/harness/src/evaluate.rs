use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use colsod_data::{DatasetManifest, DepthMode, LoadOptions, Loader, SaliencySample, Split};
use colsod_metrics::{MetricAccumulator, MetricReport, PrCurve, PR_THRESHOLDS};
use ndarray::Array2;

use crate::batch::predict;
use crate::checkpoint::Checkpoint;
use crate::error::{config, file, HarnessError, Result};

pub const REPORT_FILE: &str = "report.txt";
pub const REPORT_CSV: &str = "report.csv";

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub split: Split,
    /// Scores the ground truth against itself instead of running the model.
    pub gt_as_prediction: bool,
    /// Report files are written here when set.
    pub out_dir: Option<PathBuf>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            split: Split::Test,
            gt_as_prediction: false,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub report: MetricReport,
    /// Always zero: a nonzero count aborts the evaluation instead.
    pub depth_bytes_read: u64,
    pub seconds_per_image: f64,
}

fn mask_array(s: &SaliencySample) -> Array2<bool> {
    let (w, h) = s.sal.dimensions();
    Array2::from_shape_fn((h as usize, w as usize), |(y, x)| s.sal.get_pixel(x as u32, y as u32)[0] == 1)
}

/// Scores a checkpoint on the `split` of `data_root`. Samples are loaded by a
/// loader that skips depth, and the run fails if any depth byte was read.
pub fn evaluate(ckpt: &Checkpoint, data_root: &Path, opts: &EvalOptions) -> Result<EvalOutcome> {
    let manifest = DatasetManifest::scan(data_root, opts.split)?;
    let loader = Loader::new(LoadOptions {
        depth: DepthMode::Skip,
        ..LoadOptions::for_split(opts.split, ckpt.config.input_side as u32)
    });
    let model = ckpt.model()?;
    let mut acc = MetricAccumulator::default();
    let start = Instant::now();
    for record in &manifest.records {
        let sample = loader.load(record)?;
        let gt = mask_array(&sample);
        let pred = if opts.gt_as_prediction {
            gt.mapv(|g| g as u8 as f64)
        } else {
            predict(&ckpt.config, &model, &ckpt.params, &sample.rgb)?
        };
        acc.add(&pred, &gt)?;
    }
    let seconds_per_image = start.elapsed().as_secs_f64() / manifest.len() as f64;
    let depth_bytes_read = loader.depth_bytes_read();
    if depth_bytes_read != 0 {
        return Err(HarnessError::DepthRead { bytes: depth_bytes_read });
    }
    let report = acc.finish()?;
    log::info!(
        "{} images, {:.4} s per image: MAE {:.4} F {:.4} Fw {:.4} S {:.4} E {:.4}",
        report.n_samples,
        seconds_per_image,
        report.mae,
        report.f_beta,
        report.f_beta_w,
        report.s_measure,
        report.e_measure
    );
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir).map_err(file(dir))?;
        write_report(&report, &dir.join(REPORT_FILE))?;
        let csv = dir.join(REPORT_CSV);
        report.write_csv(std::fs::File::create(&csv).map_err(file(&csv))?)?;
    }
    Ok(EvalOutcome {
        report,
        depth_bytes_read,
        seconds_per_image,
    })
}

/// The metric `key = value` lines followed by one `pr = precision,recall`
/// line per threshold.
pub fn write_report(report: &MetricReport, path: &Path) -> Result<()> {
    let mut text = report.to_key_value();
    if let Some(curve) = &report.pr_curve {
        for (p, r) in &curve.points {
            let _ = writeln!(text, "pr = {p},{r}");
        }
    }
    std::fs::write(path, text).map_err(file(path))
}

pub fn read_report(path: &Path) -> Result<MetricReport> {
    let text = std::fs::read_to_string(path).map_err(file(path))?;
    let mut report = MetricReport::from_key_value(&text)?;
    let mut points = Vec::new();
    for line in text.lines() {
        if let Some(v) = line.trim().strip_prefix("pr").map(str::trim_start).and_then(|l| l.strip_prefix('=')) {
            let (p, r) = v
                .trim()
                .split_once(',')
                .ok_or_else(|| config(format!("malformed PR line `{line}`")))?;
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| config(format!("PR value `{s}`: {e}")));
            points.push((num(p)?, num(r)?));
        }
    }
    if !points.is_empty() {
        if points.len() != PR_THRESHOLDS {
            return Err(config(format!("{} PR points, expected {PR_THRESHOLDS}", points.len())));
        }
        report.pr_curve = Some(PrCurve { points });
    }
    Ok(report)
}
