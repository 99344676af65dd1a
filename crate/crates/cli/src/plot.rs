//! Static SVG figures: function curves on a shared grid and quantile box plots.

use std::fmt::Write as _;
use std::path::Path;

use rkhs_inverse::experiments::Summary;

use crate::csv_io::write_atomic;
use crate::error::{CliError, CliResult};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 40.0;

/// Stroke patterns by curve position: solid, dotted, then dashed variants.
const DASHES: [&str; 4] = ["", "2,4", "8,4", "12,4,2,4"];
const COLORS: [&str; 4] = ["#1f3b73", "#b03a2e", "#1e8449", "#7d3c98"];

#[derive(Debug, Clone)]
pub struct Curve {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Curve {
    pub fn new(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { label: label.into(), x, y }
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

fn axes(svg: &mut String, f: &Frame) {
    let (bx, by) = (LEFT, HEIGHT - BOTTOM);
    let _ = writeln!(svg, r#"<line x1="{bx}" y1="{by}" x2="{}" y2="{by}" stroke="black"/>"#, WIDTH - RIGHT);
    let _ = writeln!(svg, r#"<line x1="{bx}" y1="{TOP}" x2="{bx}" y2="{by}" stroke="black"/>"#);
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let xv = f.x0 + t * (f.x1 - f.x0);
        let yv = f.y0 + t * (f.y1 - f.y0);
        let (px, py) = (f.px(xv), f.py(yv));
        let _ = writeln!(svg, r#"<line x1="{px:.2}" y1="{by}" x2="{px:.2}" y2="{}" stroke="black"/>"#, by + 5.0);
        let _ =
            writeln!(svg, r#"<text x="{px:.2}" y="{}" font-size="11" text-anchor="middle">{xv:.3}</text>"#, by + 18.0);
        let _ = writeln!(svg, r#"<line x1="{}" y1="{py:.2}" x2="{bx}" y2="{py:.2}" stroke="black"/>"#, bx - 5.0);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" font-size="11" text-anchor="end">{yv:.3}</text>"#,
            bx - 8.0,
            py + 4.0
        );
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One polyline per curve. All curves must share the same finite grid.
pub fn function_plot_svg(curves: &[Curve]) -> CliResult<String> {
    let first = curves.first().ok_or_else(|| CliError::Numeric("no curves to plot".into()))?;
    if first.x.len() < 2 {
        return Err(CliError::Numeric("a curve needs at least two points".into()));
    }
    for c in curves {
        if c.x != first.x || c.y.len() != c.x.len() {
            return Err(CliError::Numeric(format!("curve {:?} is not on the shared grid", c.label)));
        }
        let bad: Vec<usize> = c.y.iter().enumerate().filter(|(_, v)| !v.is_finite()).map(|(i, _)| i).collect();
        if !bad.is_empty() {
            return Err(CliError::Numeric(format!("curve {:?} has non-finite values at indices {bad:?}", c.label)));
        }
    }
    if first.x.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Numeric("grid contains non-finite values".into()));
    }
    let (x0, x1) = (first.x[0], first.x[first.x.len() - 1]);
    let lo = curves.iter().flat_map(|c| c.y.iter()).copied().fold(f64::INFINITY, f64::min);
    let hi = curves.iter().flat_map(|c| c.y.iter()).copied().fold(f64::NEG_INFINITY, f64::max);
    let (y0, y1) = padded(lo, hi);
    let frame = Frame { x0, x1, y0, y1 };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    axes(&mut svg, &frame);
    for (k, c) in curves.iter().enumerate() {
        let pts: Vec<String> =
            c.x.iter().zip(&c.y).map(|(&x, &y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y))).collect();
        let dash = DASHES[k % DASHES.len()];
        let dash_attr = if dash.is_empty() { String::new() } else { format!(r#" stroke-dasharray="{dash}""#) };
        let color = COLORS[k % COLORS.len()];
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash_attr} points="{}"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 15.0 + 18.0 * k as f64;
        let lx = WIDTH - RIGHT + 10.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="1.5"{dash_attr}/>"#,
            lx + 30.0
        );
        let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="12">{}</text>"#, lx + 36.0, ly + 4.0, escape(&c.label));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_function_plot(curves: &[Curve], path: &Path) -> CliResult<()> {
    write_atomic(path, function_plot_svg(curves)?.as_bytes())
}

/// Box plot with boxes from the 25% to the 75% quantile, a median bar and
/// whiskers from the 10% to the 90% quantile.
pub fn boxplot_svg(groups: &[(String, Summary)]) -> CliResult<String> {
    if groups.is_empty() {
        return Err(CliError::Numeric("no groups to plot".into()));
    }
    for (label, s) in groups {
        let v = [s.q10, s.q25, s.median, s.q75, s.q90];
        if v.iter().any(|x| !x.is_finite()) {
            return Err(CliError::Numeric(format!("group {label:?} has non-finite quantiles")));
        }
    }
    let lo = groups.iter().map(|(_, s)| s.q10).fold(f64::INFINITY, f64::min);
    let hi = groups.iter().map(|(_, s)| s.q90).fold(f64::NEG_INFINITY, f64::max);
    let (y0, y1) = padded(lo.min(0.0), hi);
    let frame = Frame { x0: 0.0, x1: groups.len() as f64, y0, y1 };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let by = HEIGHT - BOTTOM;
    let _ = writeln!(svg, r#"<line x1="{LEFT}" y1="{by}" x2="{}" y2="{by}" stroke="black"/>"#, WIDTH - RIGHT);
    let _ = writeln!(svg, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{by}" stroke="black"/>"#);
    for k in 0..=4 {
        let yv = y0 + k as f64 / 4.0 * (y1 - y0);
        let py = frame.py(yv);
        let _ = writeln!(svg, r#"<line x1="{}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" font-size="11" text-anchor="end">{yv:.3}</text>"#,
            LEFT - 8.0,
            py + 4.0
        );
    }
    let slot = frame.px(1.0) - frame.px(0.0);
    for (k, (label, s)) in groups.iter().enumerate() {
        let cx = frame.px(k as f64 + 0.5);
        let half = 0.3 * slot;
        let (p10, p25, p50, p75, p90) =
            (frame.py(s.q10), frame.py(s.q25), frame.py(s.median), frame.py(s.q75), frame.py(s.q90));
        let _ = writeln!(svg, r#"<line x1="{cx:.2}" y1="{p90:.2}" x2="{cx:.2}" y2="{p75:.2}" stroke="black"/>"#);
        let _ = writeln!(svg, r#"<line x1="{cx:.2}" y1="{p25:.2}" x2="{cx:.2}" y2="{p10:.2}" stroke="black"/>"#);
        let _ = writeln!(
            svg,
            r##"<rect x="{:.2}" y="{p75:.2}" width="{:.2}" height="{:.2}" fill="#d6e4f0" stroke="black"/>"##,
            cx - half,
            2.0 * half,
            (p25 - p75).max(0.0)
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{p50:.2}" x2="{:.2}" y2="{p50:.2}" stroke="black" stroke-width="2"/>"#,
            cx - half,
            cx + half
        );
        let _ = writeln!(
            svg,
            r#"<text x="{cx:.2}" y="{}" font-size="10" text-anchor="middle">{}</text>"#,
            by + 15.0 + 11.0 * (k % 2) as f64,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_boxplot(groups: &[(String, Summary)], path: &Path) -> CliResult<()> {
    write_atomic(path, boxplot_svg(groups)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn constant_curve_has_one_polyline() {
        let svg = function_plot_svg(&[Curve::new("c", grid(11), vec![2.0; 11])]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn second_curve_is_dotted() {
        let x = grid(5);
        let svg =
            function_plot_svg(&[Curve::new("a", x.clone(), vec![0.0; 5]), Curve::new("b", x, vec![1.0; 5])]).unwrap();
        let lines: Vec<&str> = svg.lines().filter(|l| l.starts_with("<polyline")).collect();
        assert_eq!(lines.len(), 2);
        assert!(!lines[0].contains("dasharray"));
        assert!(lines[1].contains(r#"stroke-dasharray="2,4""#));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(function_plot_svg(&[]).is_err());
        let mut y = vec![0.0; 6];
        y[2] = f64::NAN;
        y[4] = f64::INFINITY;
        let err = function_plot_svg(&[Curve::new("c", grid(6), y)]).unwrap_err().to_string();
        assert!(err.contains("[2, 4]"), "{err}");
        let err = function_plot_svg(&[Curve::new("a", grid(3), vec![0.0; 3]), Curve::new("b", grid(4), vec![0.0; 4])]);
        assert!(err.is_err());
    }

    #[test]
    fn boxplot_has_one_box_per_group() {
        let s = Summary::from_values(&[0.1, 0.2, 0.3, 0.4, 0.9]).unwrap();
        let svg = boxplot_svg(&[("a".into(), s), ("b".into(), s)]).unwrap();
        assert_eq!(svg.matches("<rect").count(), 3);
        assert!(boxplot_svg(&[]).is_err());
    }
}
