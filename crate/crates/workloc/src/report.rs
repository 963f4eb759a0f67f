//! Report assembly: per-model evaluation against held-out data, the CSV
//! tables mirroring the comparison protocol (average log-likelihood, zone
//! attribute correlations, KS tests overall and segmented), and SVG
//! distance histograms. All outputs are deterministic byte-for-byte given
//! the seeds; nothing carries timestamps.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::DatasetView;
use crate::error::{Error, Result};
use crate::io::{format_f64, write_csv};
use crate::metrics::{
    attribute_choice_correlations, average_loglikelihood, drawn_distances,
    individual_attribute_correlations, ks_two_sample, observed_distances, sample_choices,
    zone_choice_counts, AverageLogLikelihood, CorrelationResult, DistanceSample, KsResult, Segment,
};
use crate::model::ChoiceModel;

/// Default number of workplace draws per individual for the sampled
/// distance distributions.
pub const DEFAULT_DRAWS_PER_INDIVIDUAL: usize = 100;

/// Data-side statistics on the validation split.
#[derive(Clone, Debug)]
pub struct DataEvaluation {
    pub pearson: Vec<(String, CorrelationResult)>,
    pub ind_pearson: Vec<(String, CorrelationResult)>,
    pub distances: DistanceSample,
}

/// One model's statistics against the splits.
#[derive(Clone, Debug)]
pub struct ModelEvaluation {
    pub label: String,
    pub avg_ll_train: AverageLogLikelihood,
    pub avg_ll_val: AverageLogLikelihood,
    pub pearson: Vec<(String, CorrelationResult)>,
    pub ks_overall: KsResult,
    pub ks_gender: Vec<(String, KsResult)>,
    pub ks_car: Vec<(String, KsResult)>,
    pub distances: DistanceSample,
}

/// Observed-data statistics on the validation split.
pub fn evaluate_data(val: &DatasetView<'_>) -> Result<DataEvaluation> {
    let observed: Vec<usize> = (0..val.len())
        .map(|r| {
            val.individual(r).work_zone.ok_or(Error::MissingWorkZone {
                person_id: val.individual(r).person_id,
            })
        })
        .collect::<Result<_>>()?;
    let counts = zone_choice_counts(&observed, val.n_zones())?;
    Ok(DataEvaluation {
        pearson: attribute_choice_correlations(val.zones(), &counts)?,
        ind_pearson: individual_attribute_correlations(val)?,
        distances: observed_distances(val)?,
    })
}

/// Scores one model: average log-likelihood on both splits, sampled zone
/// correlations, and KS distances against the observed validation data.
pub fn evaluate_model(
    model: &dyn ChoiceModel,
    label: &str,
    train: &DatasetView<'_>,
    val: &DatasetView<'_>,
    data: &DataEvaluation,
    draws_per_individual: usize,
    seed: u64,
) -> Result<ModelEvaluation> {
    let avg_ll_train = average_loglikelihood(model, train)?;
    let avg_ll_val = average_loglikelihood(model, val)?;

    let draws = sample_choices(model, val, draws_per_individual, seed)?;
    let flat: Vec<usize> = draws.iter().flatten().copied().collect();
    let counts = zone_choice_counts(&flat, val.n_zones())?;
    let pearson = attribute_choice_correlations(val.zones(), &counts)?;

    let distances = drawn_distances(val, &draws)?;
    let ks_overall = ks_two_sample(&distances.distances(), &data.distances.distances())?;
    let ks_gender = crate::metrics::segmented_ks(&distances, &data.distances, Segment::Gender)?;
    let ks_car = crate::metrics::segmented_ks(&distances, &data.distances, Segment::Car)?;

    Ok(ModelEvaluation {
        label: label.to_string(),
        avg_ll_train,
        avg_ll_val,
        pearson,
        ks_overall,
        ks_gender,
        ks_car,
        distances,
    })
}

/// Report manifest: everything listed here is written before the manifest
/// itself.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportManifest {
    pub models: Vec<String>,
    pub dataset_fingerprint: String,
    pub split_seed: u64,
    pub split_fraction: f64,
    pub eval_seed: u64,
    pub draws_per_individual: usize,
    pub files: Vec<String>,
}

/// Paths produced by a report run.
#[derive(Clone, Debug)]
pub struct Report {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub manifest_path: PathBuf,
}

fn closest_to(data_stat: f64, entries: &[(String, f64)]) -> String {
    let mut best: Option<(&str, f64)> = None;
    for (label, stat) in entries {
        let dist = (stat - data_stat).abs();
        if best.map_or(true, |(_, d)| dist < d) {
            best = Some((label, dist));
        }
    }
    best.map(|(l, _)| l.to_string()).unwrap_or_default()
}

/// Writes the full table set plus histograms and the manifest; shared by
/// single-model evaluation and multi-model comparison.
pub fn write_report(
    out_dir: &Path,
    data: &DataEvaluation,
    evals: &[ModelEvaluation],
    manifest_meta: ReportManifest,
) -> Result<Report> {
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();

    // results.csv: average log-likelihood per split, one column pair per model.
    {
        let mut header = String::from("split,n_obs");
        for e in evals {
            header.push_str(&format!(",{0}_weighted_mean,{0}_per_obs_mean", e.label));
        }
        let mut rows = Vec::new();
        for (split, pick) in [
            ("training", true),
            ("validation", false),
        ] {
            let n = if pick {
                evals.first().map_or(0, |e| e.avg_ll_train.n_obs)
            } else {
                evals.first().map_or(0, |e| e.avg_ll_val.n_obs)
            };
            let mut row = vec![split.to_string(), n.to_string()];
            for e in evals {
                let a = if pick { &e.avg_ll_train } else { &e.avg_ll_val };
                row.push(format_f64(a.weighted_mean));
                row.push(format_f64(a.per_obs_mean));
            }
            rows.push(row);
        }
        let path = out_dir.join("results.csv");
        write_csv(&path, &header, &rows)?;
        files.push(path);
    }

    // pearson-coff.csv: per-occupation correlations, data vs each model.
    {
        let mut header = String::from("attribute,data_stat,data_p");
        for e in evals {
            header.push_str(&format!(",{0}_stat,{0}_p", e.label));
        }
        header.push_str(",closest");
        let mut rows = Vec::new();
        for (i, (name, data_r)) in data.pearson.iter().enumerate() {
            let mut row = vec![
                name.clone(),
                format_f64(data_r.statistic),
                format_f64(data_r.p_value),
            ];
            let mut stats = Vec::new();
            for e in evals {
                let r = &e.pearson[i].1;
                row.push(format_f64(r.statistic));
                row.push(format_f64(r.p_value));
                stats.push((e.label.clone(), r.statistic));
            }
            row.push(closest_to(data_r.statistic, &stats));
            rows.push(row);
        }
        let path = out_dir.join("pearson-coff.csv");
        write_csv(&path, &header, &rows)?;
        files.push(path);
    }

    // ks-test.csv / ks-sex.csv / ks-car.csv: the KS statistic is the
    // distance from the data, so "closest" is the smallest statistic.
    let ks_table = |segment_rows: Vec<(String, Vec<(String, KsResult)>)>| -> (String, Vec<Vec<String>>) {
        let mut header = String::from("segment,n_data");
        for e in evals {
            header.push_str(&format!(",{0}_stat,{0}_p", e.label));
        }
        header.push_str(",closest");
        let mut rows = Vec::new();
        for (segment, per_model) in segment_rows {
            let n_data = per_model.first().map_or(0, |(_, r)| r.n2);
            let mut row = vec![segment, n_data.to_string()];
            let mut stats = Vec::new();
            for (label, r) in &per_model {
                row.push(format_f64(r.statistic));
                row.push(format_f64(r.p_value));
                stats.push((label.clone(), r.statistic));
            }
            row.push(closest_to(0.0, &stats));
            rows.push(row);
        }
        (header, rows)
    };

    {
        let rows = vec![(
            "overall".to_string(),
            evals
                .iter()
                .map(|e| (e.label.clone(), e.ks_overall))
                .collect::<Vec<_>>(),
        )];
        let (header, rows) = ks_table(rows);
        let path = out_dir.join("ks-test.csv");
        write_csv(&path, &header, &rows)?;
        files.push(path);
    }
    for (file, pick) in [
        ("ks-sex.csv", Segment::Gender),
        ("ks-car.csv", Segment::Car),
    ] {
        let levels = pick.levels();
        let rows: Vec<(String, Vec<(String, KsResult)>)> = levels
            .iter()
            .enumerate()
            .map(|(idx, (_, name))| {
                (
                    name.to_string(),
                    evals
                        .iter()
                        .map(|e| {
                            let table = match pick {
                                Segment::Gender => &e.ks_gender,
                                Segment::Car => &e.ks_car,
                            };
                            (e.label.clone(), table[idx].1)
                        })
                        .collect(),
                )
            })
            .collect();
        let (header, rows) = ks_table(rows);
        let path = out_dir.join(file);
        write_csv(&path, &header, &rows)?;
        files.push(path);
    }

    // ind-pearson.csv: individual attributes against observed commute
    // distance; a property of the validation data alone.
    {
        let rows: Vec<Vec<String>> = data
            .ind_pearson
            .iter()
            .map(|(name, r)| {
                vec![
                    name.clone(),
                    format_f64(r.statistic),
                    format_f64(r.p_value),
                ]
            })
            .collect();
        let path = out_dir.join("ind-pearson.csv");
        write_csv(&path, "attribute,stat,p_value", &rows)?;
        files.push(path);
    }

    // Distance histograms: overall plus the two segmentations.
    {
        let mut series = vec![HistogramSeries {
            label: "validation".to_string(),
            values: data.distances.distances(),
        }];
        for e in evals {
            series.push(HistogramSeries {
                label: e.label.clone(),
                values: e.distances.distances(),
            });
        }
        let path = out_dir.join("distance_overall.svg");
        write_histogram_svg(&path, "Home-to-work distance (km)", &series)?;
        files.push(path);
    }
    for (file, segment, title) in [
        (
            "distance_by_gender.svg",
            Segment::Gender,
            "Home-to-work distance by gender (km)",
        ),
        (
            "distance_by_car.svg",
            Segment::Car,
            "Home-to-work distance by car access (km)",
        ),
    ] {
        let mut series = Vec::new();
        for (value, name) in segment.levels() {
            series.push(HistogramSeries {
                label: format!("validation_{name}"),
                values: segment_distances(&data.distances, segment, value),
            });
            for e in evals {
                series.push(HistogramSeries {
                    label: format!("{}_{name}", e.label),
                    values: segment_distances(&e.distances, segment, value),
                });
            }
        }
        let path = out_dir.join(file);
        write_histogram_svg(&path, title, &series)?;
        files.push(path);
    }

    // Manifest goes last so it never references a missing file.
    let manifest_path = out_dir.join("manifest.json");
    let manifest = ReportManifest {
        files: files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect(),
        ..manifest_meta
    };
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(Report {
        out_dir: out_dir.to_path_buf(),
        files,
        manifest_path,
    })
}

fn segment_distances(sample: &DistanceSample, segment: Segment, value: u8) -> Vec<f64> {
    sample
        .observations
        .iter()
        .filter(|o| match segment {
            Segment::Gender => o.gender == value,
            Segment::Car => o.has_car == value,
        })
        .map(|o| o.km)
        .collect()
}

/// One histogram series.
#[derive(Clone, Debug)]
pub struct HistogramSeries {
    pub label: String,
    pub values: Vec<f64>,
}

const SVG_COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f",
];

/// Frequency-polygon histogram over a fixed 50-bin layout. The bin width
/// comes from the Freedman-Diaconis rule on the pooled data; values beyond
/// the covered range land in the last bin.
pub fn write_histogram_svg(path: &Path, title: &str, series: &[HistogramSeries]) -> Result<()> {
    const BINS: usize = 50;
    let mut pooled: Vec<f64> = series.iter().flat_map(|s| s.values.iter().copied()).collect();
    if pooled.is_empty() {
        return Err(Error::invalid("histogram needs at least one value"));
    }
    pooled.sort_unstable_by(|a, b| a.total_cmp(b));
    let min = pooled[0];
    let max = pooled[pooled.len() - 1];
    let quantile = |q: f64| -> f64 {
        let idx = (q * (pooled.len() - 1) as f64).round() as usize;
        pooled[idx]
    };
    let iqr = quantile(0.75) - quantile(0.25);
    let mut width = 2.0 * iqr / (pooled.len() as f64).cbrt();
    if !(width > 0.0) {
        width = (max - min) / BINS as f64;
    }
    if !(width > 0.0) {
        width = 1.0;
    }

    let bin_of = |v: f64| -> usize { (((v - min) / width).floor() as usize).min(BINS - 1) };
    let mut binned: Vec<Vec<f64>> = Vec::with_capacity(series.len());
    let mut peak: f64 = 0.0;
    for s in series {
        let mut counts = vec![0.0f64; BINS];
        for &v in &s.values {
            counts[bin_of(v)] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        if total > 0.0 {
            for c in counts.iter_mut() {
                *c /= total;
            }
        }
        peak = counts.iter().fold(peak, |m, &c| m.max(c));
        binned.push(counts);
    }
    if peak <= 0.0 {
        peak = 1.0;
    }

    const W: f64 = 720.0;
    const H: f64 = 420.0;
    const ML: f64 = 55.0;
    const MR: f64 = 15.0;
    const MT: f64 = 40.0;
    const MB: f64 = 45.0;
    let plot_w = W - ML - MR;
    let plot_h = H - MT - MB;
    let xs = |bin: usize| ML + plot_w * (bin as f64 + 0.5) / BINS as f64;
    let ys = |freq: f64| MT + plot_h * (1.0 - freq / peak);

    let mut svg = BufWriter::new(fs::File::create(path)?);
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    )?;
    writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#)?;
    writeln!(
        svg,
        r#"<text x="{}" y="22" font-family="sans-serif" font-size="15" text-anchor="middle">{title}</text>"#,
        W / 2.0
    )?;
    // Axes.
    writeln!(
        svg,
        r#"<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{}" stroke="black"/>"#,
        MT + plot_h
    )?;
    writeln!(
        svg,
        r#"<line x1="{ML}" y1="{}" x2="{}" y2="{0}" stroke="black"/>"#,
        MT + plot_h,
        ML + plot_w
    )?;
    // X tick labels at both ends and the middle.
    for (frac, value) in [
        (0.0, min),
        (0.5, min + width * BINS as f64 / 2.0),
        (1.0, min + width * BINS as f64),
    ] {
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{:.1}</text>"#,
            ML + plot_w * frac,
            MT + plot_h + 18.0,
            value
        )?;
    }
    writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">frequency (bin width {:.2} km)</text>"#,
        W / 2.0,
        H - 8.0,
        width
    )?;

    for (i, counts) in binned.iter().enumerate() {
        let color = SVG_COLORS[i % SVG_COLORS.len()];
        let points: Vec<String> = counts
            .iter()
            .enumerate()
            .map(|(b, &c)| format!("{:.2},{:.2}", xs(b), ys(c)))
            .collect();
        writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.6" points="{}"/>"#,
            points.join(" ")
        )?;
        // Legend.
        let ly = MT + 14.0 * i as f64;
        writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/>"#,
            ML + plot_w - 150.0,
            ML + plot_w - 130.0
        )?;
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            ML + plot_w - 125.0,
            ly + 4.0,
            series[i].label
        )?;
    }
    writeln!(svg, "</svg>")?;
    svg.flush()?;
    Ok(())
}
