use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::{
    basic::{mae, mean_f_measure},
    check_pair,
    enhanced::{e_measure, EMeasureInput},
    foreground_count,
    pr::{counts, ratio, PrAccumulation, PrCurve, PR_THRESHOLDS},
    structure::s_measure,
    weighted_f::weighted_f_measure,
    MetricError, Result,
};

/// Dataset-level scores. MAE averages over every image; the other measures
/// skip images whose ground truth is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub mae: f64,
    pub f_beta: f64,
    pub f_beta_w: f64,
    pub s_measure: f64,
    pub e_measure: f64,
    pub n_samples: usize,
    /// Images with empty ground truth.
    pub skipped: usize,
    pub pr_curve: Option<PrCurve>,
}

const FIELDS: [&str; 7] = [
    "mae",
    "f_beta",
    "f_beta_w",
    "s_measure",
    "e_measure",
    "n_samples",
    "skipped",
];

impl MetricReport {
    fn values(&self) -> [String; 7] {
        [
            self.mae.to_string(),
            self.f_beta.to_string(),
            self.f_beta_w.to_string(),
            self.s_measure.to_string(),
            self.e_measure.to_string(),
            self.n_samples.to_string(),
            self.skipped.to_string(),
        ]
    }

    fn from_values(get: impl Fn(&str) -> Option<String>) -> Result<Self> {
        let field = |k: &str| get(k).ok_or_else(|| MetricError::Parse(format!("missing `{k}`")));
        let float = |k: &str| {
            field(k)?
                .parse::<f64>()
                .map_err(|e| MetricError::Parse(format!("`{k}`: {e}")))
        };
        let int = |k: &str| {
            field(k)?
                .parse::<usize>()
                .map_err(|e| MetricError::Parse(format!("`{k}`: {e}")))
        };
        Ok(Self {
            mae: float("mae")?,
            f_beta: float("f_beta")?,
            f_beta_w: float("f_beta_w")?,
            s_measure: float("s_measure")?,
            e_measure: float("e_measure")?,
            n_samples: int("n_samples")?,
            skipped: int("skipped")?,
            pr_curve: None,
        })
    }

    /// `key = value` lines. Floats use the shortest round-tripping form.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        for (k, v) in FIELDS.iter().zip(self.values()) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn from_key_value(text: &str) -> Result<Self> {
        let pairs: Vec<(String, String)> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.split_once('=')
                    .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                    .ok_or_else(|| MetricError::Parse(format!("no `=` in line `{l}`")))
            })
            .collect::<Result<_>>()?;
        Self::from_values(|k| pairs.iter().find(|(pk, _)| pk == k).map(|(_, v)| v.clone()))
    }

    /// Header row plus one data row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(FIELDS)?;
        w.write_record(self.values())?;
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let row = r
            .records()
            .next()
            .ok_or(MetricError::Empty("report CSV has no data row"))??;
        Self::from_values(|k| {
            headers
                .iter()
                .position(|h| h == k)
                .and_then(|i| row.get(i))
                .map(str::to_string)
        })
    }

    /// Writes the PR curve as `threshold,precision,recall`, one row per threshold.
    pub fn write_pr_csv(&self, path: &Path) -> Result<()> {
        let curve = self
            .pr_curve
            .as_ref()
            .ok_or(MetricError::Empty("report has no PR curve"))?;
        write_pr_csv(curve, std::fs::File::create(path)?)
    }
}

pub(crate) fn write_pr_csv<W: Write>(curve: &PrCurve, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["threshold", "precision", "recall"])?;
    for (i, (p, r)) in curve.points.iter().enumerate() {
        w.write_record([
            PrCurve::threshold(i).to_string(),
            p.to_string(),
            r.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

impl PrCurve {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_pr_csv(self, writer)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut points = Vec::with_capacity(PR_THRESHOLDS);
        for rec in r.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| MetricError::Parse("short PR row".into()))?
                    .parse()
                    .map_err(|e| MetricError::Parse(format!("PR value: {e}")))
            };
            points.push((num(1)?, num(2)?));
        }
        if points.len() != PR_THRESHOLDS {
            return Err(MetricError::Parse(format!(
                "expected {PR_THRESHOLDS} PR rows, found {}",
                points.len()
            )));
        }
        Ok(Self { points })
    }
}

/// Streams images into running sums so that large test sets never need to be
/// held in memory.
#[derive(Debug, Clone)]
pub struct MetricAccumulator {
    e_input: EMeasureInput,
    accumulation: PrAccumulation,
    n: usize,
    skipped: usize,
    mae: f64,
    f_beta: f64,
    f_beta_w: f64,
    s: f64,
    e: f64,
    pr_sums: Vec<(f64, f64)>,
    pr_pooled: Vec<(usize, usize)>,
    pooled_fg: usize,
}

impl Default for MetricAccumulator {
    fn default() -> Self {
        Self::new(EMeasureInput::default(), PrAccumulation::default())
    }
}

impl MetricAccumulator {
    pub fn new(e_input: EMeasureInput, accumulation: PrAccumulation) -> Self {
        Self {
            e_input,
            accumulation,
            n: 0,
            skipped: 0,
            mae: 0.0,
            f_beta: 0.0,
            f_beta_w: 0.0,
            s: 0.0,
            e: 0.0,
            pr_sums: vec![(0.0, 0.0); PR_THRESHOLDS],
            pr_pooled: vec![(0, 0); PR_THRESHOLDS],
            pooled_fg: 0,
        }
    }

    pub fn add(&mut self, pred: &Array2<f64>, gt: &Array2<bool>) -> Result<()> {
        check_pair(pred, gt)?;
        self.n += 1;
        self.mae += mae(pred, gt)?;
        let fg = foreground_count(gt);
        if fg == 0 {
            self.skipped += 1;
            return Ok(());
        }
        self.f_beta += mean_f_measure(pred, gt)?.unwrap_or(0.0);
        self.f_beta_w += weighted_f_measure(pred, gt)?.unwrap_or(0.0);
        self.s += s_measure(pred, gt)?;
        self.e += e_measure(pred, gt, self.e_input)?;
        self.pooled_fg += fg;
        for (i, (tp, pp)) in counts(pred, gt).into_iter().enumerate() {
            self.pr_sums[i].0 += ratio(tp, pp);
            self.pr_sums[i].1 += ratio(tp, fg);
            self.pr_pooled[i].0 += tp;
            self.pr_pooled[i].1 += pp;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn finish(&self) -> Result<MetricReport> {
        if self.n == 0 {
            return Err(MetricError::Empty("no images were evaluated"));
        }
        let used = self.n - self.skipped;
        let avg = |v: f64| if used == 0 { 0.0 } else { v / used as f64 };
        let pr_curve = (used > 0).then(|| PrCurve {
            points: match self.accumulation {
                PrAccumulation::PerImage => self
                    .pr_sums
                    .iter()
                    .map(|&(p, r)| (avg(p), avg(r)))
                    .collect(),
                PrAccumulation::Pooled => self
                    .pr_pooled
                    .iter()
                    .map(|&(tp, pp)| (ratio(tp, pp), ratio(tp, self.pooled_fg)))
                    .collect(),
            },
        });
        Ok(MetricReport {
            mae: self.mae / self.n as f64,
            f_beta: avg(self.f_beta),
            f_beta_w: avg(self.f_beta_w),
            s_measure: avg(self.s),
            e_measure: avg(self.e),
            n_samples: self.n,
            skipped: self.skipped,
            pr_curve,
        })
    }
}
