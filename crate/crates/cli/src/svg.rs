//! Trace plot rendering. The SVG is produced from the written trace.csv (and
//! optional trace_replicates.csv) so it is a pure function of the CSV
//! artifacts: black trace = weighted estimates with ±2·SE segments, gray
//! traces = bootstrap replicates, left-margin points = unweighted estimates,
//! horizontal line = zero level.

use modelrobust::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

struct TraceRow {
    center: Option<f64>, // None = unweighted sentinel
    component: String,
    estimate: f64,
    band_lo: f64,
    band_hi: f64,
}

struct ReplicateRow {
    center: Option<f64>,
    component: String,
    estimate: f64,
}

fn parse_center(field: &str) -> Result<Option<f64>> {
    if field == "unweighted" {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| Error::InvalidInput(format!("trace csv: bad center `{field}`")))
}

fn parse_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::InvalidInput(format!("trace csv: bad row `{line}`")));
        }
        let parse = |f: &str| -> Result<f64> {
            f.parse().map_err(|_| Error::InvalidInput(format!("trace csv: bad value `{f}`")))
        };
        rows.push(TraceRow {
            center: parse_center(fields[0])?,
            component: fields[1].to_string(),
            estimate: parse(fields[2])?,
            band_lo: parse(fields[4])?,
            band_hi: parse(fields[5])?,
        });
    }
    Ok(rows)
}

fn parse_replicates(path: &Path) -> Result<Vec<ReplicateRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::InvalidInput(format!("replicate csv: bad row `{line}`")));
        }
        let estimate: f64 = fields[3]
            .parse()
            .map_err(|_| Error::InvalidInput(format!("replicate csv: bad value `{}`", fields[3])))?;
        rows.push(ReplicateRow {
            center: parse_center(fields[1])?,
            component: fields[2].to_string(),
            estimate,
        });
    }
    Ok(rows)
}

const PANEL_W: f64 = 640.0;
const PANEL_H: f64 = 240.0;
const MARGIN_L: f64 = 92.0; // leaves room for the unweighted points
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 28.0;
const MARGIN_B: f64 = 34.0;

pub fn render_from_files(trace: &Path, replicates: Option<&Path>) -> Result<String> {
    let rows = parse_trace(trace)?;
    let reps = match replicates {
        Some(p) if p.exists() => parse_replicates(p)?,
        _ => Vec::new(),
    };
    // components in first-seen order
    let mut components: Vec<String> = Vec::new();
    for r in &rows {
        if !components.contains(&r.component) {
            components.push(r.component.clone());
        }
    }
    if components.is_empty() {
        return Err(Error::InvalidInput("trace csv has no rows".into()));
    }
    let total_h = PANEL_H * components.len() as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PANEL_W}\" height=\"{total_h}\" viewBox=\"0 0 {PANEL_W} {total_h}\">"
    );
    let _ = writeln!(out, "<rect width=\"{PANEL_W}\" height=\"{total_h}\" fill=\"white\"/>");
    for (pi, comp) in components.iter().enumerate() {
        render_panel(&mut out, comp, pi as f64 * PANEL_H, &rows, &reps);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn render_panel(out: &mut String, component: &str, y0: f64, rows: &[TraceRow], reps: &[ReplicateRow]) {
    let mine: Vec<&TraceRow> = rows.iter().filter(|r| r.component == component).collect();
    let centered: Vec<&&TraceRow> = mine.iter().filter(|r| r.center.is_some()).collect();
    let unweighted: Option<&&TraceRow> = mine.iter().find(|r| r.center.is_none());
    let my_reps: Vec<&ReplicateRow> = reps
        .iter()
        .filter(|r| r.component == component && r.estimate.is_finite())
        .collect();

    let mut xs: Vec<f64> = centered.iter().filter_map(|r| r.center).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if xs.is_empty() {
        return;
    }
    let (x_min, x_max) = (xs[0], xs[xs.len() - 1]);
    let x_pad = 0.05 * (x_max - x_min).max(1e-9);

    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    let mut stretch = |v: f64| {
        if v.is_finite() {
            y_min = y_min.min(v);
            y_max = y_max.max(v);
        }
    };
    for r in &centered {
        stretch(r.estimate);
        stretch(r.band_lo);
        stretch(r.band_hi);
    }
    if let Some(u) = unweighted {
        stretch(u.estimate);
        stretch(u.band_lo);
        stretch(u.band_hi);
    }
    for r in &my_reps {
        stretch(r.estimate);
    }
    stretch(0.0); // always show the zero level
    let y_pad = 0.08 * (y_max - y_min).max(1e-9);
    let (y_lo, y_hi) = (y_min - y_pad, y_max + y_pad);

    let plot_l = MARGIN_L;
    let plot_r = PANEL_W - MARGIN_R;
    let plot_t = y0 + MARGIN_T;
    let plot_b = y0 + PANEL_H - MARGIN_B;
    let sx = move |x: f64| plot_l + (x - (x_min - x_pad)) / ((x_max + x_pad) - (x_min - x_pad)) * (plot_r - plot_l);
    let sy = move |y: f64| plot_b - (y - y_lo) / (y_hi - y_lo) * (plot_b - plot_t);
    let unweighted_x = plot_l - 36.0;

    let fmt = |v: f64| format!("{v:.4}");

    // frame and zero line
    let _ = writeln!(
        out,
        "<rect x=\"{plot_l}\" y=\"{plot_t}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>",
        plot_r - plot_l,
        plot_b - plot_t
    );
    let zy = sy(0.0);
    let _ = writeln!(
        out,
        "<line x1=\"{}\" y1=\"{zy:.2}\" x2=\"{plot_r}\" y2=\"{zy:.2}\" stroke=\"#999\" stroke-dasharray=\"4 3\" stroke-width=\"1\"/>",
        unweighted_x - 8.0
    );

    // gray replicate traces (grouped in file order per replicate: rebuild by
    // walking rows center-by-center is enough since we only need polylines)
    let mut rep_traces: std::collections::BTreeMap<usize, Vec<(f64, f64)>> =
        std::collections::BTreeMap::new();
    let mut rep_unweighted: Vec<f64> = Vec::new();
    let mut rep_index = 0usize;
    let mut last_center: Option<f64> = Some(f64::NEG_INFINITY);
    for r in &my_reps {
        match r.center {
            Some(c) => {
                if let Some(last) = last_center {
                    if c <= last {
                        rep_index += 1;
                    }
                }
                rep_traces.entry(rep_index).or_default().push((c, r.estimate));
                last_center = Some(c);
            }
            None => {
                rep_unweighted.push(r.estimate);
                last_center = Some(f64::NEG_INFINITY);
            }
        }
    }
    for pts in rep_traces.values() {
        if pts.len() < 2 {
            continue;
        }
        let path: Vec<String> =
            pts.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#cccccc\" stroke-width=\"1\"/>",
            path.join(" ")
        );
    }
    for v in &rep_unweighted {
        let _ = writeln!(
            out,
            "<circle cx=\"{unweighted_x:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"#cccccc\"/>",
            sy(*v)
        );
    }

    // band segments and the black trace
    for r in &centered {
        if !(r.estimate.is_finite() && r.band_lo.is_finite() && r.band_hi.is_finite()) {
            continue;
        }
        let x = sx(r.center.unwrap());
        let _ = writeln!(
            out,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#222\" stroke-width=\"1\"/>",
            sy(r.band_lo),
            sy(r.band_hi)
        );
    }
    let trace_pts: Vec<String> = {
        let mut pts: Vec<(f64, f64)> = centered
            .iter()
            .filter(|r| r.estimate.is_finite())
            .map(|r| (r.center.unwrap(), r.estimate))
            .collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        pts.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect()
    };
    let _ = writeln!(
        out,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.8\"/>",
        trace_pts.join(" ")
    );
    for r in &centered {
        if r.estimate.is_finite() {
            let _ = writeln!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.4\" fill=\"black\"/>",
                sx(r.center.unwrap()),
                sy(r.estimate)
            );
        }
    }

    // unweighted point with its interval, left of the plot frame
    if let Some(u) = unweighted {
        let _ = writeln!(
            out,
            "<line x1=\"{unweighted_x:.2}\" y1=\"{:.2}\" x2=\"{unweighted_x:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-width=\"1\"/>",
            sy(u.band_lo),
            sy(u.band_hi)
        );
        let _ = writeln!(
            out,
            "<circle cx=\"{unweighted_x:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"black\"/>",
            sy(u.estimate)
        );
    }

    // labels
    let _ = writeln!(
        out,
        "<text x=\"{plot_l}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" fill=\"#111\">{component}</text>",
        plot_t - 8.0
    );
    let _ = writeln!(
        out,
        "<text x=\"{plot_l}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#333\" text-anchor=\"middle\">{}</text>",
        plot_b + 14.0,
        fmt(x_min)
    );
    let _ = writeln!(
        out,
        "<text x=\"{plot_r}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#333\" text-anchor=\"middle\">{}</text>",
        plot_b + 14.0,
        fmt(x_max)
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#333\" text-anchor=\"end\">{}</text>",
        plot_l - 4.0,
        sy(y_hi) + 10.0,
        fmt(y_hi)
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#333\" text-anchor=\"end\">{}</text>",
        plot_l - 4.0,
        sy(y_lo),
        fmt(y_lo)
    );
}
