//! CSV tables and the log-log flux plot.
//!
//! Floats are written with `Display`, which is the shortest representation
//! that round-trips, so identical values always produce identical bytes.

use std::io::Write;

use crate::error::Result;
use crate::flux::{EntropyReport, FluxCurve};
use crate::green::RegimeCheckReport;
use crate::measure::MeasureCheckReport;

pub const FLUX_CURVE_HEADER: [&str; 5] = ["a", "F", "F_inf_minus_F", "J", "regime"];
pub const REGIME_PAIRS_HEADER: [&str; 8] =
    ["xi", "yi", "dist", "deltaX", "deltaY", "gr", "gd_at_corkscrews", "ratio"];
pub const MEASURE_HEADER: [&str; 12] =
    ["check", "a", "face", "qx", "qy", "qz", "r", "pole", "lhs", "rhs", "ratio", "pass"];
pub const ENTROPY_HEADER: [&str; 9] = [
    "a",
    "r_a",
    "cover_radius",
    "cover_size",
    "overlap",
    "entropy",
    "F_inf_minus_F",
    "ratio",
    "homogeneous_fraction",
];

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(out)
}

fn flush<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> crate::Error {
    crate::Error::Io(std::io::Error::other(e))
}

pub fn write_flux_curve_csv<W: Write>(out: W, curve: &FluxCurve) -> Result<()> {
    let mut w = writer(out);
    w.write_record(FLUX_CURVE_HEADER).map_err(csv_err)?;
    for p in &curve.points {
        w.write_record([
            p.a.to_string(),
            p.f.to_string(),
            p.f_inf_minus_f.to_string(),
            p.j.to_string(),
            p.regime.as_str().to_string(),
        ])
        .map_err(csv_err)?;
    }
    flush(w)
}

pub fn write_regime_pairs_csv<W: Write>(out: W, report: &RegimeCheckReport) -> Result<()> {
    let mut w = writer(out);
    w.write_record(REGIME_PAIRS_HEADER).map_err(csv_err)?;
    for p in &report.pairs {
        w.write_record([
            p.x.to_string(),
            p.y.to_string(),
            p.dist.to_string(),
            p.delta_x.to_string(),
            p.delta_y.to_string(),
            p.gr.to_string(),
            p.reference.to_string(),
            p.ratio.to_string(),
        ])
        .map_err(csv_err)?;
    }
    flush(w)
}

/// One table for any number of measure-check reports.
pub fn write_measure_csv<W: Write>(out: W, reports: &[&MeasureCheckReport]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(MEASURE_HEADER).map_err(csv_err)?;
    for report in reports {
        for s in &report.samples {
            w.write_record([
                report.check.clone(),
                report.a.to_string(),
                s.face.to_string(),
                s.q[0].to_string(),
                s.q[1].to_string(),
                s.q[2].to_string(),
                s.r.to_string(),
                s.pole.to_string(),
                s.lhs.to_string(),
                s.rhs.to_string(),
                s.ratio.to_string(),
                s.pass.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    flush(w)
}

pub fn write_entropy_csv<W: Write>(out: W, report: &EntropyReport) -> Result<()> {
    let mut w = writer(out);
    w.write_record(ENTROPY_HEADER).map_err(csv_err)?;
    for p in &report.points {
        w.write_record([
            p.a.to_string(),
            p.r_a.to_string(),
            p.cover_radius.to_string(),
            p.cover_size.to_string(),
            p.overlap.to_string(),
            p.entropy.to_string(),
            p.f_inf_minus_f.to_string(),
            p.ratio.to_string(),
            p.homogeneous_fraction.to_string(),
        ])
        .map_err(csv_err)?;
    }
    flush(w)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 60.0;

struct LogAxes {
    x: (f64, f64),
    y: (f64, f64),
}

impl LogAxes {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x.log10() - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y.log10() - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn polyline(axes: &LogAxes, pts: &[(f64, f64)], color: &str) -> String {
    let coords: Vec<String> = pts
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|&(x, y)| format!("{:.2},{:.2}", axes.px(x), axes.py(y)))
        .collect();
    format!(
        "<polyline class=\"curve\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
        coords.join(" ")
    )
}

/// Log-log plot of `F(a)` and `F(∞) − F(a)` with the regime boundaries
/// `a = 1/σ(∂Ω)` and `a = 4/ℓ` marked.
pub fn flux_curve_svg(curve: &FluxCurve) -> String {
    let f: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.a, p.f)).collect();
    let d: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.a, p.f_inf_minus_f)).collect();
    let xs = || curve.points.iter().map(|p| p.a);
    let ys = || f.iter().chain(&d).map(|p| p.1).filter(|y| *y > 0.0);
    let lo_hi = |it: &mut dyn Iterator<Item = f64>| {
        it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (x0, x1) = lo_hi(&mut xs());
    let (y0, y1) = lo_hi(&mut ys());
    let axes = LogAxes {
        x: (x0.log10().floor(), x1.log10().ceil().max(x0.log10().floor() + 1.0)),
        y: (y0.log10().floor(), y1.log10().ceil().max(y0.log10().floor() + 1.0)),
    };
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    s += &format!(
        "<rect x=\"{left}\" y=\"{top}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        right - left,
        bottom - top
    );
    for e in axes.x.0 as i32..=axes.x.1 as i32 {
        let x = axes.px(10f64.powi(e));
        s += &format!("<line x1=\"{x:.2}\" y1=\"{bottom}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"black\"/>\n", bottom + 5.0);
        s += &format!("<text x=\"{x:.2}\" y=\"{}\" text-anchor=\"middle\">1e{e}</text>\n", bottom + 18.0);
    }
    for e in axes.y.0 as i32..=axes.y.1 as i32 {
        let y = axes.py(10f64.powi(e));
        s += &format!("<line x1=\"{}\" y1=\"{y:.2}\" x2=\"{left}\" y2=\"{y:.2}\" stroke=\"black\"/>\n", left - 5.0);
        s += &format!("<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">1e{e}</text>\n", left - 8.0, y + 4.0);
    }
    s += &polyline(&axes, &f, "#1f77b4");
    s += &polyline(&axes, &d, "#d62728");
    let markers = [
        (1.0 / curve.sigma_total, "a = 1/σ"),
        (curve.bounds.dahlberg_factor / curve.ell, "a = 4/ℓ"),
    ];
    for (a, label) in markers {
        let in_range = a.log10() >= axes.x.0 && a.log10() <= axes.x.1;
        if !in_range {
            continue;
        }
        let x = axes.px(a);
        s += &format!(
            "<line class=\"regime-marker\" x1=\"{x:.2}\" y1=\"{top}\" x2=\"{x:.2}\" y2=\"{bottom}\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n"
        );
        s += &format!("<text x=\"{:.2}\" y=\"{}\">{label}</text>\n", x + 3.0, top + 12.0);
    }
    s += &format!("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">a</text>\n", WIDTH / 2.0, HEIGHT - 20.0);
    s += &format!("<text x=\"{}\" y=\"{}\" fill=\"#1f77b4\">F(a)</text>\n", right - 110.0, top - 25.0);
    s += &format!("<text x=\"{}\" y=\"{}\" fill=\"#d62728\">F(∞) − F(a)</text>\n", right - 110.0, top - 10.0);
    s += "</svg>\n";
    s
}
