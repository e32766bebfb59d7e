//! Rendering: feature-shape SVG figures, the ranked-model table, and a plain
//! correlation CSV. All output is deterministic — identical inputs produce
//! byte-identical documents, with no timestamps or environment leakage.

use crate::circularity::CircularityReport;
use crate::data::Dataset;
use crate::error::{CircError, Result};
use crate::gam::{FeatureShape, FittedGam};

const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 240.0;
const MARGIN_L: f64 = 46.0;
const MARGIN_R: f64 = 12.0;
const MARGIN_T: f64 = 28.0;
const MARGIN_B: f64 = 34.0;

/// One subplot: a feature shape, optional true-rule overlay (evaluated on the
/// same grid), and rug marks of observed values.
#[derive(Debug, Clone)]
pub struct ShapePanel {
    pub shape: FeatureShape,
    pub overlay: Option<Vec<f64>>,
    pub title: String,
    /// Extra annotation drawn under the title, e.g. a D^2 readout.
    pub annotation: Option<String>,
}

impl ShapePanel {
    pub fn from_shape(shape: FeatureShape) -> ShapePanel {
        let title = shape.feature_name.clone();
        ShapePanel {
            shape,
            overlay: None,
            title,
            annotation: None,
        }
    }
}

/// One panel per model term, on a 512-point grid.
pub fn fit_panels(fit: &FittedGam) -> Result<Vec<ShapePanel>> {
    fit.terms
        .iter()
        .map(|t| Ok(ShapePanel::from_shape(fit.feature_shape(&t.name, 512)?)))
        .collect()
}

fn fmt(v: f64) -> String {
    // fixed short form; enough for axis labels, stable across runs
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 1000.0 || v.abs() < 0.01 {
        format!("{v:.3e}")
    } else {
        format!("{v:.3}")
    }
}

/// Standalone SVG 1.1 document laying panels out in `columns` columns.
pub fn render_svg(panels: &[ShapePanel], columns: usize, title: &str) -> Result<String> {
    if panels.is_empty() {
        return Err(CircError::EmptyInput("shape panels"));
    }
    if columns == 0 {
        return Err(CircError::InvalidArgument("columns must be >= 1".into()));
    }
    for p in panels {
        if p.shape.grid.len() != p.shape.values.len() || p.shape.grid.is_empty() {
            return Err(CircError::InvalidArgument(format!(
                "panel '{}' grid/value lengths differ",
                p.title
            )));
        }
        if let Some(ov) = &p.overlay {
            if ov.len() != p.shape.grid.len() {
                return Err(CircError::InvalidArgument(format!(
                    "panel '{}' overlay length differs from grid",
                    p.title
                )));
            }
        }
    }
    let cols = columns.min(panels.len());
    let rows = panels.len().div_ceil(cols);
    let total_w = cols as f64 * PANEL_W;
    let total_h = rows as f64 * PANEL_H + 24.0;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" \
         width=\"{total_w}\" height=\"{total_h}\" viewBox=\"0 0 {total_w} {total_h}\">\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"16\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\" font-weight=\"bold\">{}</text>\n",
        total_w / 2.0,
        escape(title)
    ));
    for (i, panel) in panels.iter().enumerate() {
        let ox = (i % cols) as f64 * PANEL_W;
        let oy = 24.0 + (i / cols) as f64 * PANEL_H;
        render_panel(&mut svg, panel, ox, oy);
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn render_panel(svg: &mut String, panel: &ShapePanel, ox: f64, oy: f64) {
    let grid = &panel.shape.grid;
    let xmin = grid[0];
    let xmax = *grid.last().unwrap();
    let xspan = if xmax > xmin { xmax - xmin } else { 1.0 };

    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for &v in &panel.shape.values {
        ymin = ymin.min(v);
        ymax = ymax.max(v);
    }
    if let Some(ov) = &panel.overlay {
        for &v in ov {
            ymin = ymin.min(v);
            ymax = ymax.max(v);
        }
    }
    // always show the zero line: nullified shapes read as flat lines at 0
    ymin = ymin.min(0.0);
    ymax = ymax.max(0.0);
    let pad = 0.08 * (ymax - ymin).max(1e-9);
    ymin -= pad;
    ymax += pad;
    let yspan = ymax - ymin;

    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
    let px = |x: f64| ox + MARGIN_L + (x - xmin) / xspan * plot_w;
    let py = |y: f64| oy + MARGIN_T + (ymax - y) / yspan * plot_h;

    svg.push_str(&format!(
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{plot_w:.2}\" height=\"{plot_h:.2}\" \
         fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>\n",
        ox + MARGIN_L,
        oy + MARGIN_T
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"12\">{}</text>\n",
        ox + MARGIN_L + plot_w / 2.0,
        oy + 14.0,
        escape(&panel.title)
    ));
    if let Some(note) = &panel.annotation {
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"10\" fill=\"#555\">{}</text>\n",
            ox + MARGIN_L + plot_w / 2.0,
            oy + 25.0,
            escape(note)
        ));
    }

    // zero reference line
    svg.push_str(&format!(
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" \
         stroke=\"#bbb\" stroke-width=\"1\" stroke-dasharray=\"3,3\"/>\n",
        px(xmin),
        py(0.0),
        px(xmax),
        py(0.0)
    ));

    // overlay (true rule) first so the shape draws on top
    if let Some(ov) = &panel.overlay {
        let pts: Vec<String> = grid
            .iter()
            .zip(ov)
            .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#c44\" stroke-width=\"1.4\"/>\n",
            pts.join(" ")
        ));
    }

    let pts: Vec<String> = grid
        .iter()
        .zip(&panel.shape.values)
        .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
        .collect();
    svg.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#269\" stroke-width=\"1.6\"/>\n",
        pts.join(" ")
    ));

    // rug ticks along the x axis
    for &r in &panel.shape.rug {
        let x = px(r.clamp(xmin, xmax));
        svg.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" \
             stroke=\"#888\" stroke-width=\"0.6\"/>\n",
            oy + MARGIN_T + plot_h,
            oy + MARGIN_T + plot_h + 5.0
        ));
    }

    // axis extremes
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"9\">{}</text>\n",
        px(xmin),
        oy + PANEL_H - 12.0,
        fmt(xmin)
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"9\">{}</text>\n",
        px(xmax),
        oy + PANEL_H - 12.0,
        fmt(xmax)
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"sans-serif\" \
         font-size=\"9\">{}</text>\n",
        ox + MARGIN_L - 4.0,
        py(ymin) + 3.0,
        fmt(ymin)
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"sans-serif\" \
         font-size=\"9\">{}</text>\n",
        ox + MARGIN_L - 4.0,
        py(ymax) + 3.0,
        fmt(ymax)
    ));
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Plain-text ranking table: Rank | Included Features | D^2 | Complexity(EDF).
pub fn render_ranking_text(report: &CircularityReport) -> Result<String> {
    if report.ranked_models.is_empty() {
        return Err(CircError::EmptyInput("ranked models"));
    }
    let mut rows: Vec<[String; 4]> = Vec::with_capacity(report.ranked_models.len());
    for (i, c) in report.ranked_models.iter().enumerate() {
        rows.push([
            (i + 1).to_string(),
            c.features.join(" + "),
            format!("{:.6}", c.d_squared),
            format!("{:.3}", c.edf),
        ]);
    }
    let headers = ["Rank", "Included Features", "D^2", "Complexity(EDF)"];
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |cells: &[String], widths: &[usize]| -> String {
        cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join(" | ")
    };
    let header_cells: Vec<String> = headers.iter().map(|s| s.to_string()).collect();
    out.push_str(&line(&header_cells, &widths));
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 3 * (widths.len() - 1)));
    out.push('\n');
    for row in &rows {
        out.push_str(&line(row, &widths));
        out.push('\n');
    }
    Ok(out)
}

/// CSV form of the ranking; features joined with '+' so the file re-parses
/// without quoting.
pub fn render_ranking_csv(report: &CircularityReport) -> Result<String> {
    if report.ranked_models.is_empty() {
        return Err(CircError::EmptyInput("ranked models"));
    }
    let mut out = String::from("rank,features,d_squared,edf,converged\n");
    for (i, c) in report.ranked_models.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{:.10},{:.6},{}\n",
            i + 1,
            c.features.join("+"),
            c.d_squared,
            c.edf,
            c.converged
        ));
    }
    Ok(out)
}

/// Re-parse of [`render_ranking_csv`] output: (rank, features, d_squared, edf).
pub fn parse_ranking_csv(text: &str) -> Result<Vec<(usize, Vec<String>, f64, f64)>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 5 {
            return Err(CircError::RaggedRow {
                row: ln,
                found: cells.len(),
                expected: 5,
            });
        }
        let parse = |i: usize| -> Result<f64> {
            cells[i].parse().map_err(|_| CircError::ParseCell {
                row: ln,
                column: i.to_string(),
                value: cells[i].to_string(),
            })
        };
        out.push((
            cells[0].parse().map_err(|_| CircError::ParseCell {
                row: ln,
                column: "rank".into(),
                value: cells[0].to_string(),
            })?,
            cells[1].split('+').map(str::to_string).collect(),
            parse(2)?,
            parse(3)?,
        ));
    }
    Ok(out)
}

/// Per-feature Pearson correlation with the target, as CSV in column order.
pub fn correlation_csv(data: &Dataset, target: &str) -> Result<String> {
    let y = &data.column(target)?.values;
    let mut out = String::from("feature,pearson_r\n");
    for name in data.feature_names(target) {
        let x = &data.column(&name)?.values;
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        for (&a, &b) in x.iter().zip(y) {
            sxy += (a - mx) * (b - my);
            sxx += (a - mx) * (a - mx);
            syy += (b - my) * (b - my);
        }
        let r = if sxx <= 0.0 || syy <= 0.0 {
            0.0
        } else {
            sxy / (sxx * syy).sqrt()
        };
        out.push_str(&format!("{name},{r:.10}\n"));
    }
    Ok(out)
}
