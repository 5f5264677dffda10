//! Minimal SVG line charts for sweep results. Presentation only: nothing
//! downstream reads these files back.

use robustlab::{Error, ExperimentConfig, ParameterGrid, Result, SeparationReport, TrialRecord};
use std::path::Path;

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

const W: f64 = 640.0;
const H: f64 = 420.0;
const ML: f64 = 70.0;
const MR: f64 = 18.0;
const MT: f64 = 18.0;
const MB: f64 = 48.0;

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        return format!("{v:.2e}");
    }
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

/// Renders series as polylines with point markers, linear axes with five
/// ticks, and an in-plot legend.
pub fn line_chart(x_label: &str, y_label: &str, series: &[Series]) -> String {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let (mut x0, mut x1) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, _)| {
            (lo.min(x), hi.max(x))
        });
    let (mut y0, mut y1) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, y)| {
            (lo.min(y), hi.max(y))
        });
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
        (y0, y1) = (0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad_x = 0.04 * (x1 - x0);
    let pad_y = 0.06 * (y1 - y0);
    let (x0, x1, y0, y1) = (x0 - pad_x, x1 + pad_x, y0 - pad_y, y1 + pad_y);
    let sx = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
    let sy = |y: f64| H - MB - (y - y0) / (y1 - y0) * (H - MT - MB);
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));
    // Axes and ticks.
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"#333\"/>\n\
         <line x1=\"{ML}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#333\"/>\n",
        H - MB,
        H - MB,
        W - MR,
        H - MB
    ));
    for i in 0..=4 {
        let f = f64::from(i) / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let xp = sx(xv);
        let yp = sy(yv);
        svg.push_str(&format!(
            "<line x1=\"{xp:.1}\" y1=\"{}\" x2=\"{xp:.1}\" y2=\"{}\" stroke=\"#333\"/>\n\
             <text x=\"{xp:.1}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            H - MB,
            H - MB + 5.0,
            H - MB + 20.0,
            fmt_num(xv)
        ));
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{yp:.1}\" x2=\"{ML}\" y2=\"{yp:.1}\" stroke=\"#333\"/>\n\
             <text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
            ML - 5.0,
            ML - 8.0,
            yp + 4.0,
            fmt_num(yv)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
        (ML + W - MR) / 2.0,
        H - 8.0,
        x_label
    ));
    svg.push_str(&format!(
        "<text x=\"14\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.1})\">{}</text>\n",
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0,
        y_label
    ));
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
            .collect();
        if path.len() > 1 {
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                path.join(" ")
            ));
        }
        for p in &path {
            let (px, py) = p.split_once(',').unwrap();
            svg.push_str(&format!(
                "<circle cx=\"{px}\" cy=\"{py}\" r=\"2.5\" fill=\"{color}\"/>\n"
            ));
        }
        let ly = MT + 16.0 * si as f64 + 10.0;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n\
             <text x=\"{}\" y=\"{}\">{}</text>\n",
            W - MR - 160.0,
            W - MR - 140.0,
            W - MR - 134.0,
            ly + 4.0,
            s.name
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn write_svg(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Mean error per estimator against the sweep variable, plus the scaled
/// theoretical envelope.
pub fn write_experiment_plot(
    path: &Path,
    cfg: &ExperimentConfig,
    records: &[TrialRecord],
) -> Result<()> {
    let moments = cfg.sample.population_moments()?;
    let n = cfg.sample.n as f64;
    let base = (moments.trace / n).sqrt();
    let (x_label, grid): (&str, Vec<(f64, f64, f64)>) = match &cfg.grid {
        // (x position, record eps key, envelope value)
        ParameterGrid::Eps(v) => (
            "eps",
            v.iter()
                .map(|&e| {
                    (
                        e,
                        e,
                        cfg.envelope.mult * (base + (moments.op_norm * e).sqrt()),
                    )
                })
                .collect(),
        ),
        ParameterGrid::Delta(v) => (
            "log10(1/delta)",
            v.iter()
                .map(|&dl| {
                    let eps = (4.0 / dl).ln() / n;
                    let env = cfg.envelope.mult
                        * (base + (moments.op_norm * (1.0 / dl).ln() / n).sqrt());
                    ((1.0 / dl).log10(), eps, env)
                })
                .collect(),
        ),
    };
    let mut series: Vec<Series> = cfg
        .estimators
        .iter()
        .map(|kind| {
            let label = kind.label();
            let points = grid
                .iter()
                .map(|&(x, eps_key, _)| {
                    let errs: Vec<f64> = records
                        .iter()
                        .filter(|r| r.estimator == label && r.eps == eps_key)
                        .map(|r| r.error)
                        .collect();
                    (x, errs.iter().sum::<f64>() / errs.len().max(1) as f64)
                })
                .collect();
            Series {
                name: label,
                points,
            }
        })
        .collect();
    series.push(Series {
        name: "envelope".into(),
        points: grid.iter().map(|&(x, _, env)| (x, env)).collect(),
    });
    write_svg(path, &line_chart(x_label, "mean error", &series))
}

/// Mean errors of both estimators against the attack radius.
pub fn write_separation_plot(path: &Path, report: &SeparationReport) -> Result<()> {
    let series = vec![
        Series {
            name: "two-stage (worst sign)".into(),
            points: report
                .summaries
                .iter()
                .map(|s| (s.r, s.mean_subg_worst))
                .collect(),
        },
        Series {
            name: "filter center".into(),
            points: report
                .summaries
                .iter()
                .map(|s| (s.r, s.mean_filter))
                .collect(),
        },
    ];
    write_svg(path, &line_chart("attack radius", "mean error", &series))
}
