//! Static SVG plots derived from report JSON: a bar chart of AUC values and
//! a ROC curve built from stored predictions.

use std::path::{Path, PathBuf};

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 60.0;

fn svg_header() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    )
}

fn bar_chart(title: &str, entries: &[(String, f64)]) -> String {
    let mut out = svg_header();
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\" font-family=\"sans-serif\">{title}</text>\n",
        W / 2.0
    ));
    let plot_w = W - 2.0 * MARGIN;
    let plot_h = H - 2.0 * MARGIN;
    // y axis 0..1 with gridlines
    for i in 0..=5 {
        let frac = i as f64 / 5.0;
        let y = H - MARGIN - frac * plot_h;
        out.push_str(&format!(
            "<line x1=\"{MARGIN}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#ddd\"/>\n<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">{:.1}</text>\n",
            W - MARGIN,
            MARGIN - 6.0,
            y + 4.0,
            frac
        ));
    }
    let n = entries.len().max(1) as f64;
    let slot = plot_w / n;
    let bar_w = (slot * 0.6).min(80.0);
    for (i, (label, value)) in entries.iter().enumerate() {
        let clamped = value.clamp(0.0, 1.0);
        let x = MARGIN + i as f64 * slot + (slot - bar_w) / 2.0;
        let h = clamped * plot_h;
        let y = H - MARGIN - h;
        out.push_str(&format!(
            "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{bar_w:.1}\" height=\"{h:.1}\" fill=\"#4878a8\"/>\n"
        ));
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\" font-family=\"sans-serif\">{:.3}</text>\n",
            x + bar_w / 2.0,
            y - 4.0,
            value
        ));
        let short: String = label.chars().take(18).collect();
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"middle\" font-family=\"sans-serif\">{short}</text>\n",
            x + bar_w / 2.0,
            H - MARGIN + 16.0
        ));
    }
    out.push_str(&format!(
        "<line x1=\"{MARGIN}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n</svg>\n",
        H - MARGIN,
        W - MARGIN,
        H - MARGIN
    ));
    out
}

fn roc_curve(points: &[(f64, f64)]) -> String {
    let mut out = svg_header();
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\" font-family=\"sans-serif\">ROC curve</text>\n",
        W / 2.0
    ));
    let plot = H - 2.0 * MARGIN;
    let sx = |fpr: f64| MARGIN + fpr * plot;
    let sy = |tpr: f64| H - MARGIN - tpr * plot;
    // axes + diagonal
    out.push_str(&format!(
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{plot}\" height=\"{plot}\" fill=\"none\" stroke=\"black\"/>\n"
    ));
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#bbb\" stroke-dasharray=\"4\"/>\n",
        sx(0.0),
        sy(0.0),
        sx(1.0),
        sy(1.0)
    ));
    let path: Vec<String> = points
        .iter()
        .map(|&(fpr, tpr)| format!("{:.2},{:.2}", sx(fpr), sy(tpr)))
        .collect();
    out.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#c0504d\" stroke-width=\"2\"/>\n",
        path.join(" ")
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\">false positive rate</text>\n",
        W / 2.0,
        H - MARGIN + 32.0
    ));
    out.push_str("</svg>\n");
    out
}

fn roc_points(predictions: &[(f64, u8)]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<_> = predictions.to_vec();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let pos = sorted.iter().filter(|(_, l)| *l == 1).count().max(1) as f64;
    let neg = sorted.iter().filter(|(_, l)| *l == 0).count().max(1) as f64;
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut points = vec![(0.0, 0.0)];
    for (_, label) in sorted {
        if label == 1 {
            tp += 1.0;
        } else {
            fp += 1.0;
        }
        points.push((fp / neg, tp / pos));
    }
    points
}

fn extract_predictions(metrics: &serde_json::Value) -> Vec<(f64, u8)> {
    metrics["predictions"]
        .as_array()
        .map(|arr| {
            arr.iter()
                .filter_map(|p| {
                    Some((
                        p["score"].as_f64()?,
                        p["label"].as_u64()? as u8,
                    ))
                })
                .collect()
        })
        .unwrap_or_default()
}

/// Renders the plots a report supports; returns the written paths.
pub fn render(report: &serde_json::Value, dir: &Path) -> Result<Vec<PathBuf>, String> {
    let mut written = Vec::new();
    if let Some(variants) = report["variants"].as_array() {
        // experiment report: bar chart of median AUC per variant
        let entries: Vec<(String, f64)> = variants
            .iter()
            .filter_map(|v| {
                Some((
                    v["label"].as_str()?.to_string(),
                    v["median"]["auc"].as_f64()?,
                ))
            })
            .collect();
        if entries.is_empty() {
            return Err("report has variants but no median AUC values".into());
        }
        let bar_path = dir.join("auc_bars.svg");
        std::fs::write(&bar_path, bar_chart("median test AUC by variant", &entries))
            .map_err(|e| e.to_string())?;
        written.push(bar_path);
        if let Some(first) = variants.first() {
            let preds = extract_predictions(&first["per_seed"][0]["metrics"]);
            if !preds.is_empty() {
                let roc_path = dir.join("roc.svg");
                std::fs::write(&roc_path, roc_curve(&roc_points(&preds)))
                    .map_err(|e| e.to_string())?;
                written.push(roc_path);
            }
        }
    } else if report["metrics"].is_object() {
        // single evaluation report
        let m = &report["metrics"];
        let entries: Vec<(String, f64)> = [("AUC", "auc"), ("ACC", "accuracy"), ("F1", "f1")]
            .iter()
            .filter_map(|(label, key)| Some((label.to_string(), m[*key].as_f64()?)))
            .collect();
        if entries.is_empty() {
            return Err("report has no metric values".into());
        }
        let bar_path = dir.join("metrics_bars.svg");
        std::fs::write(&bar_path, bar_chart("test metrics", &entries))
            .map_err(|e| e.to_string())?;
        written.push(bar_path);
        let preds = extract_predictions(m);
        if !preds.is_empty() {
            let roc_path = dir.join("roc.svg");
            std::fs::write(&roc_path, roc_curve(&roc_points(&preds)))
                .map_err(|e| e.to_string())?;
            written.push(roc_path);
        }
    } else {
        return Err("unrecognized report shape: expected 'variants' or 'metrics'".into());
    }
    Ok(written)
}
