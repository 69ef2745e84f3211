use std::path::Path;

use super::{ExperimentResult, Method, Metric};
use crate::corpus::csv::{read_records, write_record};
use crate::error::{Error, Result};
use crate::viz::svg::{Scale, Svg, PALETTE};

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// One row per method: `method, <metric>_mean, <metric>_std, …`.
pub fn summary_csv(results: &[ExperimentResult]) -> String {
    let mut out = String::new();
    let mut header = vec!["method".to_owned()];
    for m in Metric::ALL {
        header.push(format!("{}_mean", m.name()));
        header.push(format!("{}_std", m.name()));
    }
    write_record(&mut out, &header);
    for r in results {
        let mut row = vec![r.method.name().to_owned()];
        for m in Metric::ALL {
            let s = r.summary(m);
            row.push(cell(s.mean));
            row.push(cell(s.std));
        }
        write_record(&mut out, &row);
    }
    out
}

/// Long form: `method, repetition, metric, value`; undefined values are
/// empty cells.
pub fn runs_csv(results: &[ExperimentResult]) -> String {
    let mut out = String::new();
    write_record(&mut out, &["method", "repetition", "metric", "value"]);
    for r in results {
        for (rep, report) in r.reports.iter().enumerate() {
            for m in Metric::ALL {
                write_record(
                    &mut out,
                    &[r.method.name().to_owned(), rep.to_string(), m.name().to_owned(), cell(report.get(m))],
                );
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRow {
    pub method: Method,
    pub repetition: usize,
    pub metric: Metric,
    pub value: Option<f64>,
}

pub fn read_runs_csv(text: &str) -> Result<Vec<RunRow>> {
    let records = read_records(text.as_bytes())?;
    let mut rows = Vec::new();
    for rec in records.iter().skip(1) {
        let bad = |message: String| Error::Row { row: rec.number, message };
        let [method, rep, metric, value] = rec.fields.as_slice() else {
            return Err(bad(format!("expected 4 fields, found {}", rec.fields.len())));
        };
        rows.push(RunRow {
            method: method.parse()?,
            repetition: rep.parse().map_err(|_| bad(format!("bad repetition {rep:?}")))?,
            metric: metric.parse()?,
            value: if value.is_empty() {
                None
            } else {
                Some(value.parse().map_err(|_| bad(format!("bad value {value:?}")))?)
            },
        });
    }
    Ok(rows)
}

/// Box plot of one metric across repetitions, one box per method
/// (quartiles by linear interpolation, whiskers at the extremes).
pub fn box_plot_svg(results: &[ExperimentResult], metric: Metric) -> String {
    let (w, h, m) = (120.0 + 90.0 * results.len() as f64, 360.0, 50.0);
    let series: Vec<Vec<f64>> = results
        .iter()
        .map(|r| {
            let mut v: Vec<f64> = r.reports.iter().filter_map(|x| x.get(metric)).collect();
            v.sort_by(f64::total_cmp);
            v
        })
        .collect();
    let ys = Scale::fit(series.iter().flatten(), h - m, m);
    let mut s = Svg::new(w, h);
    s.text(w / 2.0, 24.0, "middle", metric.name());
    s.line(m, m, m, h - m, "#333333");
    for (k, (r, v)) in results.iter().zip(&series).enumerate() {
        let cx = m + 60.0 + 90.0 * k as f64;
        s.text(cx, h - m + 18.0, "middle", r.method.name());
        if v.is_empty() {
            continue;
        }
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        let colour = PALETTE[k % PALETTE.len()];
        s.line(cx, ys.map(v[0]), cx, ys.map(v[v.len() - 1]), "#333333");
        s.rect(cx - 20.0, ys.map(q(0.75)), 40.0, ys.map(q(0.25)) - ys.map(q(0.75)), colour, "#333333");
        s.line(cx - 20.0, ys.map(q(0.5)), cx + 20.0, ys.map(q(0.5)), "#000000");
    }
    for t in 0..=4 {
        let lo = series.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let hi = series.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            break;
        }
        let v = lo + (hi - lo) * t as f64 / 4.0;
        s.text(m - 6.0, ys.map(v) + 4.0, "end", &format!("{v:.3}"));
    }
    s.finish()
}

/// `summary.csv`, `runs.csv` and one `box_<metric>.svg` per metric.
pub fn write_results(dir: &Path, results: &[ExperimentResult]) -> Result<()> {
    if results.is_empty() {
        return Err(Error::arg("no results to export"));
    }
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("summary.csv"), summary_csv(results))?;
    std::fs::write(dir.join("runs.csv"), runs_csv(results))?;
    for m in Metric::ALL {
        std::fs::write(dir.join(format!("box_{}.svg", m.name())), box_plot_svg(results, m))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{metrics, summarize, ConfusionMatrix};
    use crate::numerics::SeededRng;

    fn fake(method: Method, reps: usize, seed: u64) -> ExperimentResult {
        let mut rng = SeededRng::new(seed);
        let confusions: Vec<ConfusionMatrix> = (0..reps)
            .map(|_| ConfusionMatrix { tp: rng.below(20), fp: rng.below(5), fn_: rng.below(5), tn: rng.below(20) + 1 })
            .collect();
        ExperimentResult { method, reports: confusions.iter().map(metrics).collect(), confusions }
    }

    #[test]
    fn long_form_row_count() {
        let results = [fake(Method::Nb, 20, 1), fake(Method::Svm, 20, 2)];
        let csv = runs_csv(&results);
        assert_eq!(csv.lines().count(), 1 + 240);
        assert_eq!(read_runs_csv(&csv).unwrap().len(), 240);
    }

    #[test]
    fn summary_recomputes_from_long_form() {
        let results = [fake(Method::Knn, 20, 3), fake(Method::Lda, 20, 4)];
        let rows = read_runs_csv(&runs_csv(&results)).unwrap();
        let summary = summary_csv(&results);
        let recs = read_records(summary.as_bytes()).unwrap();
        for (k, r) in results.iter().enumerate() {
            let fields = &recs[k + 1].fields;
            assert_eq!(fields[0], r.method.name());
            for (i, m) in Metric::ALL.into_iter().enumerate() {
                let vals: Vec<Option<f64>> =
                    rows.iter().filter(|x| x.method == r.method && x.metric == m).map(|x| x.value).collect();
                let s = summarize(&vals);
                let parse = |c: &str| if c.is_empty() { None } else { Some(c.parse::<f64>().unwrap()) };
                let (mean, std) = (parse(&fields[1 + 2 * i]), parse(&fields[2 + 2 * i]));
                assert_eq!(mean, r.summary(m).mean);
                assert!((mean.unwrap() - s.mean.unwrap()).abs() < 1e-12);
                assert!((std.unwrap() - s.std.unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn undefined_values_are_empty_cells() {
        let cm = ConfusionMatrix { tp: 0, fp: 0, fn_: 2, tn: 3 };
        let r = ExperimentResult { method: Method::Nb, confusions: vec![cm], reports: vec![metrics(&cm)] };
        let csv = runs_csv(std::slice::from_ref(&r));
        assert!(csv.lines().any(|l| l == "nb,0,precision,"));
        assert!(summary_csv(&[r]).lines().nth(1).unwrap().contains(",,"));
    }

    #[test]
    fn box_plots_are_valid_svg() {
        let results = [fake(Method::Nb, 5, 5), fake(Method::CnnRand, 5, 6)];
        for m in Metric::ALL {
            let svg = box_plot_svg(&results, m);
            let doc = roxmltree::Document::parse(&svg).unwrap();
            assert!(doc.descendants().filter(|n| n.has_tag_name("rect")).count() >= 3);
        }
    }

    #[test]
    fn writes_all_files() {
        let dir = std::env::temp_dir().join(format!("textclf-export-{}", std::process::id()));
        write_results(&dir, &[fake(Method::Svm, 3, 7)]).unwrap();
        for f in ["summary.csv", "runs.csv", "box_f1.svg", "box_fdr.svg"] {
            assert!(dir.join(f).exists(), "{f}");
        }
        std::fs::remove_dir_all(&dir).unwrap();
        assert!(write_results(&dir, &[]).is_err());
    }
}
