//! Minimal SVG 1.1 output: line plots and heatmaps of the CSV files written by
//! the other modules.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Frame {
        let range = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it
                .filter(|v| v.is_finite())
                .fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(v), b.max(v)));
            if lo > hi {
                (0.0, 1.0)
            } else if lo == hi {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        let (x0, x1) = range(&mut xs.clone());
        let (y0, y1) = range(&mut ys.clone());
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        r#"<path d="M{l} {t} L{l} {b} L{r} {b}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let fx = i as f64 / 4.0;
        let xv = f.x0 + fx * (f.x1 - f.x0);
        let yv = f.y0 + fx * (f.y1 - f.y0);
        let px = f.px(xv);
        let py = f.py(yv);
        let _ = writeln!(
            out,
            r#"<line x1="{px}" y1="{b}" x2="{px}" y2="{}" stroke="black"/><text x="{px}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            b + 5.0,
            b + 18.0,
            tick(xv)
        );
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{py}" x2="{l}" y2="{py}" stroke="black"/><text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            l - 5.0,
            l - 8.0,
            py + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

const COLORS: [&str; 4] = ["#1f4e9c", "#c0392b", "#27864a", "#7d3c98"];

pub fn line_plot(series: &[Series], title: &str, x_label: &str, y_label: &str) -> String {
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let ys = series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
    let f = Frame::fit(xs, ys);
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, x_label, y_label);
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut d = String::new();
        for (k, &(x, y)) in s.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).enumerate() {
            let _ = write!(d, "{}{:.2} {:.2} ", if k == 0 { "M" } else { "L" }, f.px(x), f.py(y));
        }
        let _ = writeln!(
            out,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            d.trim_end()
        );
        if series.len() > 1 {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#,
                WIDTH - MARGIN - 120.0,
                MARGIN + 16.0 * i as f64,
                escape(&s.label)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Grid of values in [0, 1] drawn as grey levels (black = 1). `values[i][j]`
/// belongs to `xs[i]`, `ys[j]`.
pub fn heatmap(
    xs: &[f64],
    ys: &[f64],
    values: &[Vec<f64>],
    title: &str,
    x_label: &str,
    y_label: &str,
) -> String {
    let half = |v: &[f64]| if v.len() > 1 { 0.5 * (v[1] - v[0]).abs() } else { 0.5 };
    let (hx, hy) = (half(xs), half(ys));
    let f = Frame::fit(
        xs.iter().flat_map(|&x| [x - hx, x + hx]),
        ys.iter().flat_map(|&y| [y - hy, y + hy]),
    );
    let mut out = String::new();
    header(&mut out, title);
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            let v = values[i][j].clamp(0.0, 1.0);
            let level = (255.0 * (1.0 - v)).round() as u8;
            let (px0, px1) = (f.px(x - hx), f.px(x + hx));
            let (py0, py1) = (f.py(y + hy), f.py(y - hy));
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({level},{level},{level})"/>"#,
                px0,
                py0,
                px1 - px0,
                py1 - py0
            );
        }
    }
    axes(&mut out, &f, x_label, y_label);
    out.push_str("</svg>\n");
    out
}

/// CSV cells; empty or non-numeric cells are `None`.
type Rows = Vec<Vec<Option<f64>>>;

fn parse_rows(text: &str) -> Result<(Vec<String>, Rows)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty CSV".into()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|c| {
                    let c = c.trim();
                    if c.is_empty() {
                        Ok(None)
                    } else {
                        c.parse::<f64>()
                            .map(Some)
                            .map_err(|_| Error::InvalidInput(format!("not a number: `{c}`")))
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, rows))
}

fn grid_from(rows: &[Vec<Option<f64>>], xi: usize, yi: usize, vi: usize) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for r in rows {
        let (x, y) = (r[xi].unwrap_or(0.0), r[yi].unwrap_or(0.0));
        if !xs.contains(&x) {
            xs.push(x);
        }
        if !ys.contains(&y) {
            ys.push(y);
        }
    }
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let mut v = vec![vec![0.0; ys.len()]; xs.len()];
    for r in rows {
        let i = xs.iter().position(|&x| x == r[xi].unwrap_or(0.0)).expect("collected");
        let j = ys.iter().position(|&y| y == r[yi].unwrap_or(0.0)).expect("collected");
        v[i][j] = r[vi].unwrap_or(0.0);
    }
    (xs, ys, v)
}

/// Renders a trajectory, sweep or acceptance-map CSV, chosen by its header.
pub fn plot_csv_text(text: &str) -> Result<String> {
    let (header, rows) = parse_rows(text)?;
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    match h.as_slice() {
        ["t_s", "z_m", "v_mps"] => {
            let points = rows
                .iter()
                .map(|r| (r[0].unwrap_or(f64::NAN) * 1e6, r[1].unwrap_or(f64::NAN) * 1e3))
                .collect();
            Ok(line_plot(
                &[Series {
                    label: "z".into(),
                    points,
                }],
                "Axial trajectory",
                "t (us)",
                "z (mm)",
            ))
        }
        ["param1", "param2", "n", "k", "frac"] => {
            if rows.iter().all(|r| r[1].is_none()) {
                let points = rows
                    .iter()
                    .map(|r| (r[0].unwrap_or(f64::NAN), r[4].unwrap_or(f64::NAN)))
                    .collect();
                Ok(line_plot(
                    &[Series {
                        label: "frac".into(),
                        points,
                    }],
                    "Recapture fraction",
                    "param1 (SI)",
                    "fraction",
                ))
            } else {
                let (xs, ys, v) = grid_from(&rows, 0, 1, 4);
                Ok(heatmap(&xs, &ys, &v, "Recapture fraction", "param1 (SI)", "param2 (SI)"))
            }
        }
        ["ux_v", "uy_v", "success"] => {
            let (xs, ys, v) = grid_from(&rows, 0, 1, 2);
            Ok(heatmap(&xs, &ys, &v, "Steering acceptance", "Ux offset (V)", "Uy offset (V)"))
        }
        _ => Err(Error::InvalidInput(format!(
            "unrecognised CSV header `{}`",
            header.join(",")
        ))),
    }
}

pub fn plot_csv(input: impl AsRef<Path>, output: impl AsRef<Path>) -> Result<()> {
    let input = input.as_ref();
    let text = std::fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
    let svg = plot_csv_text(&text)?;
    std::fs::write(output.as_ref(), svg).map_err(|e| Error::io(output.as_ref(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_plot() {
        let svg = plot_csv_text("t_s,z_m,v_mps\n0,0,0\n1e-6,1e-2,1e4\n2e-6,3e-2,1e4\n").unwrap();
        assert!(svg.starts_with("<?xml"));
        assert!(svg.contains("<path d=\"M"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn map_plot() {
        let csv = "ux_v,uy_v,success\n-1,-1,0\n-1,1,1\n1,-1,1\n1,1,0\n";
        let svg = plot_csv_text(csv).unwrap();
        assert_eq!(svg.matches("<rect").count(), 5);
        assert!(svg.contains("rgb(0,0,0)"));
    }

    #[test]
    fn sweep_plots() {
        let one = "param1,param2,n,k,frac\n1e-6,,1,0,0\n2e-6,,1,1,1\n";
        assert!(plot_csv_text(one).unwrap().contains("<path d=\"M"));
        let two = "param1,param2,n,k,frac\n1,0,1,0,0\n1,1,1,1,1\n2,0,1,1,1\n2,1,1,0,0\n";
        assert_eq!(plot_csv_text(two).unwrap().matches("<rect").count(), 5);
        assert!(plot_csv_text("a,b\n1,2\n").is_err());
    }
}
