use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::curves::{CurvePoint, Metric, MetricCurve};
use crate::budget::Stage;
use crate::error::{Error, Result};

pub const STAGE_SUMMARY_FILE: &str = "stage_summary.csv";

const STAGE_METRICS: [Metric; 3] = [Metric::Acl, Metric::SalemMi, Metric::YeomAi];

fn curve_file(c: &MetricCurve) -> String {
    format!("{}_{}_{}.csv", c.metric, c.dataset, c.method)
}

fn write_points(path: &Path, points: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epsilon", "mean", "std", "n"])?;
    for p in points {
        w.write_record([
            format!("{:.16e}", p.epsilon),
            format!("{:.16e}", p.mean),
            format!("{:.16e}", p.std),
            p.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write one `epsilon,mean,std,n` CSV per curve and a per-stage summary
/// pooling every dataset and method of that stage. Returns the files written.
pub fn emit_plot_data(curves: &[MetricCurve], out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for c in curves {
        let path = out_dir.join(curve_file(c));
        write_points(&path, &c.points)?;
        written.push(path);
    }

    // pooled mean and sample std from per-curve (mean, std, n)
    let mut pooled: BTreeMap<(Stage, Metric, u64), Vec<CurvePoint>> = BTreeMap::new();
    for c in curves.iter().filter(|c| STAGE_METRICS.contains(&c.metric)) {
        for p in &c.points {
            pooled.entry((c.stage(), c.metric, p.epsilon.to_bits())).or_default().push(*p);
        }
    }
    let path = out_dir.join(STAGE_SUMMARY_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["stage", "metric", "epsilon", "mean", "std", "n"])?;
    for ((stage, metric, bits), pts) in pooled {
        let n: usize = pts.iter().map(|p| p.n).sum();
        let mean = pts.iter().map(|p| p.n as f64 * p.mean).sum::<f64>() / n as f64;
        let ss: f64 = pts
            .iter()
            .map(|p| (p.n as f64 - 1.0) * p.std * p.std + p.n as f64 * (p.mean - mean).powi(2))
            .sum();
        let std = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
        w.write_record([
            stage.to_string(),
            metric.to_string(),
            format!("{:.16e}", f64::from_bits(bits)),
            format!("{mean:.16e}"),
            format!("{std:.16e}"),
            n.to_string(),
        ])?;
    }
    w.flush()?;
    written.push(path);
    Ok(written)
}

/// Read back a per-curve file written by [`emit_plot_data`].
pub fn read_plot_data(path: &Path) -> Result<Vec<CurvePoint>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["epsilon", "mean", "std", "n"] {
        return Err(Error::Schema {
            column: header.iter().next().unwrap_or("").to_string(),
            reason: "expected header epsilon,mean,std,n".into(),
        });
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize, name: &str| -> Result<f64> {
            rec.get(i).and_then(|v| v.parse().ok()).ok_or_else(|| Error::Schema {
                column: name.into(),
                reason: "not a number".into(),
            })
        };
        out.push(CurvePoint {
            epsilon: f(0, "epsilon")?,
            mean: f(1, "mean")?,
            std: f(2, "std")?,
            n: rec.get(3).and_then(|v| v.parse().ok()).ok_or_else(|| Error::Schema {
                column: "n".into(),
                reason: "not an integer".into(),
            })?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Method;

    fn mk(method: Method, metric: Metric, pts: Vec<CurvePoint>) -> MetricCurve {
        MetricCurve {
            dataset: "d".into(),
            method,
            metric,
            points: pts,
        }
    }

    #[test]
    fn round_trip_and_empty_curve() {
        let dir = tempfile::tempdir().unwrap();
        let pts = vec![
            CurvePoint { epsilon: 0.01, mean: 0.9, std: 0.1, n: 5 },
            CurvePoint { epsilon: 1000.0, mean: 1.0 / 3.0, std: 0.0, n: 5 },
        ];
        let files = emit_plot_data(
            &[mk(Method::S1Gnb, Metric::Acl, pts.clone()), mk(Method::S3Gnb, Metric::SalemMi, vec![])],
            dir.path(),
        )
        .unwrap();
        assert_eq!(files.len(), 3);
        assert_eq!(read_plot_data(&files[0]).unwrap(), pts);
        assert!(read_plot_data(&files[1]).unwrap().is_empty());
        assert_eq!(fs::read_to_string(&files[1]).unwrap().trim(), "epsilon,mean,std,n");
    }

    #[test]
    fn stage_summary_pools_methods() {
        let dir = tempfile::tempdir().unwrap();
        // raw values {0,2} and {4,6}: pooled mean 3, sample std sqrt(20/3)
        let p = |mean: f64| vec![CurvePoint { epsilon: 1.0, mean, std: 2f64.sqrt(), n: 2 }];
        emit_plot_data(
            &[mk(Method::S1Gnb, Metric::Acl, p(1.0)), mk(Method::S1Mlp, Metric::Acl, p(5.0))],
            dir.path(),
        )
        .unwrap();
        let text = fs::read_to_string(dir.path().join(STAGE_SUMMARY_FILE)).unwrap();
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(&row[..2], ["S1", "acl"]);
        assert!((row[3].parse::<f64>().unwrap() - 3.0).abs() < 1e-12);
        assert!((row[4].parse::<f64>().unwrap() - (20.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(row[5], "4");
    }
}
