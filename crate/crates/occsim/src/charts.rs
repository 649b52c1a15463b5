//! Self-contained SVG renderings of validation outputs: class histograms
//! with the selected threshold, and ROC curves.

use std::fmt::Write;
use std::path::Path;

use crate::validation::{Histogram, RocPoint, ValidationReport};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

struct Plot {
    svg: String,
    x_max: f64,
    y_max: f64,
}

impl Plot {
    fn new(title: &str, x_label: &str, y_label: &str, x_max: f64, y_max: f64) -> Plot {
        let mut svg = String::new();
        let _ = write!(
            svg,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n\
             <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
             <text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
            WIDTH / 2.0,
            escape(title)
        );
        let mut plot = Plot { svg, x_max, y_max };
        plot.axes(x_label, y_label);
        plot
    }

    fn x(&self, v: f64) -> f64 {
        MARGIN_LEFT + v / self.x_max * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM - v / self.y_max * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }

    fn axes(&mut self, x_label: &str, y_label: &str) {
        let (x0, y0) = (self.x(0.0), self.y(0.0));
        let (x1, y1) = (self.x(self.x_max), self.y(self.y_max));
        let _ = write!(
            self.svg,
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
             <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
        );
        for tick in 0..=4 {
            let fx = self.x_max * tick as f64 / 4.0;
            let fy = self.y_max * tick as f64 / 4.0;
            let (tx, ty) = (self.x(fx), self.y(fy));
            let _ = write!(
                self.svg,
                "<line x1=\"{tx}\" y1=\"{y0}\" x2=\"{tx}\" y2=\"{}\" stroke=\"black\"/>\n\
                 <text x=\"{tx}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n\
                 <line x1=\"{x0}\" y1=\"{ty}\" x2=\"{}\" y2=\"{ty}\" stroke=\"black\"/>\n\
                 <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
                y0 + 5.0,
                y0 + 20.0,
                trim(fx),
                x0 - 5.0,
                x0 - 8.0,
                ty + 4.0,
                trim(fy),
            );
        }
        let _ = write!(
            self.svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n\
             <text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
            (x0 + x1) / 2.0,
            HEIGHT - 12.0,
            escape(x_label),
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(y_label),
        );
    }

    fn polyline(&mut self, points: &[(f64, f64)], color: &str, dashed: bool) {
        if points.is_empty() {
            return;
        }
        let coords: Vec<String> = points
            .iter()
            .map(|&(px, py)| format!("{:.2},{:.2}", self.x(px), self.y(py)))
            .collect();
        let dash = if dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        let _ = write!(
            self.svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash}/>\n",
            coords.join(" ")
        );
    }

    fn area(&mut self, steps: &[(f64, f64)], color: &str) {
        if steps.is_empty() {
            return;
        }
        let mut d = format!("M {:.2} {:.2}", self.x(steps[0].0), self.y(0.0));
        for &(px, py) in steps {
            let _ = write!(d, " L {:.2} {:.2}", self.x(px), self.y(py));
        }
        let _ = write!(d, " L {:.2} {:.2} Z", self.x(steps.last().unwrap().0), self.y(0.0));
        let _ = write!(
            self.svg,
            "<path d=\"{d}\" fill=\"{color}\" fill-opacity=\"0.35\" stroke=\"{color}\"/>\n"
        );
    }

    fn vline(&mut self, x: f64, color: &str, label: &str) {
        let px = self.x(x);
        let _ = write!(
            self.svg,
            "<line x1=\"{px}\" y1=\"{}\" x2=\"{px}\" y2=\"{}\" stroke=\"{color}\" \
             stroke-dasharray=\"4 3\"/>\n\
             <text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>\n",
            self.y(0.0),
            self.y(self.y_max),
            px + 4.0,
            self.y(self.y_max) + 12.0,
            escape(label)
        );
    }

    fn legend(&mut self, entries: &[(&str, &str)]) {
        let mut ly = MARGIN_TOP + 6.0;
        for (label, color) in entries {
            let _ = write!(
                self.svg,
                "<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{color}\" \
                 fill-opacity=\"0.5\"/>\n<text x=\"{}\" y=\"{}\">{}</text>\n",
                WIDTH - 170.0,
                ly,
                WIDTH - 152.0,
                ly + 10.0,
                escape(label)
            );
            ly += 18.0;
        }
    }

    fn finish(mut self) -> String {
        self.svg.push_str("</svg>\n");
        self.svg
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn trim(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn histogram_steps(hist: &Histogram) -> Vec<(f64, f64)> {
    let mut steps = Vec::with_capacity(hist.bins.len() * 2);
    for bin in &hist.bins {
        steps.push((bin.bin_left, bin.density));
        steps.push((bin.bin_right, bin.density));
    }
    steps
}

/// Rare/common class histograms as overlaid step areas with the selected
/// threshold marked.
pub fn histogram_svg(report: &ValidationReport, title: &str) -> String {
    let peak = report
        .rare_histogram
        .bins
        .iter()
        .chain(&report.common_histogram.bins)
        .map(|b| b.density)
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let mut plot = Plot::new(title, "normalized similarity", "density", 1.0, peak * 1.05);
    plot.area(&histogram_steps(&report.rare_histogram), "#1f77b4");
    plot.area(&histogram_steps(&report.common_histogram), "#d62728");
    if report.threshold <= 1.0 {
        plot.vline(report.threshold, "#2ca02c", &format!("threshold {:.3}", report.threshold));
    }
    plot.legend(&[("rare", "#1f77b4"), ("common", "#d62728")]);
    plot.finish()
}

/// ROC curve with the chance diagonal for reference.
pub fn roc_svg(points: &[RocPoint], auc: f64, title: &str) -> String {
    let mut plot = Plot::new(
        &format!("{title} (AUC {auc:.3})"),
        "false positive rate",
        "true positive rate",
        1.0,
        1.0,
    );
    plot.polyline(&[(0.0, 0.0), (1.0, 1.0)], "#999999", true);
    let curve: Vec<(f64, f64)> = points.iter().map(|p| (p.fpr, p.tpr)).collect();
    plot.polyline(&curve, "#d62728", false);
    plot.finish()
}

pub fn write_svg(content: &str, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, content)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validation::{HistogramBin, RocPoint};

    #[test]
    fn renders_well_formed_svg() {
        let hist = Histogram {
            bins: vec![
                HistogramBin { bin_left: 0.0, bin_right: 0.5, density: 1.2 },
                HistogramBin { bin_left: 0.5, bin_right: 1.0, density: 0.8 },
            ],
        };
        let report = ValidationReport {
            measure: "jacc".into(),
            mode: "transfers".into(),
            rare_threshold: 20,
            norm_percentile: 98.0,
            target_tnr: 0.65,
            bins: 2,
            normalization_quantile: 1.0,
            threshold: 0.4,
            tnr: 0.66,
            tpr: 0.8,
            auc: 0.7,
            rare_observations: 10,
            common_observations: 20,
            observation_count: 30,
            excluded_pairs: 0,
            excluded_self_transitions: 0,
            missing_cells: 0,
            rare_histogram: hist.clone(),
            common_histogram: hist,
            roc: vec![],
        };
        let svg = histogram_svg(&report, "test <histogram>");
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("&lt;histogram&gt;"));

        let roc = vec![
            RocPoint { fpr: 0.0, tpr: 0.0, threshold: 1.0 },
            RocPoint { fpr: 0.2, tpr: 0.9, threshold: 0.5 },
            RocPoint { fpr: 1.0, tpr: 1.0, threshold: 0.0 },
        ];
        let svg = roc_svg(&roc, 0.85, "roc");
        assert!(svg.contains("polyline"));
        assert!(svg.contains("AUC 0.850"));
    }
}
