//! Artifacts an experiment produces: gate verdicts, CSV tables and SVG plots.

use std::fmt::Write as _;

use latwalk::fit::{DecayFit, Gate};
use serde::Serialize;

/// One pass/fail check of a run.
#[derive(Debug, Clone, Serialize)]
pub struct GateResult {
    pub name: String,
    pub value: f64,
    pub target: String,
    pub pass: bool,
}

impl GateResult {
    pub fn new(name: impl Into<String>, value: f64, gate: Gate) -> Self {
        GateResult { name: name.into(), value, target: gate.to_string(), pass: gate.check(value) }
    }

    pub fn from_fit(name: impl Into<String>, fit: &DecayFit) -> Self {
        GateResult {
            name: name.into(),
            value: fit.exponent,
            target: fit.target.map(|g| g.to_string()).unwrap_or_else(|| "none".into()),
            pass: fit.passed(),
        }
    }

    /// A boolean property reported as `1` (holds) or `0`.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        GateResult { name: name.into(), value: if ok { 1.0 } else { 0.0 }, target: "= 1".into(), pass: ok }
    }
}

/// A CSV file under construction. Floats use the shortest round-trip form.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells.into_iter().map(|c| c.to_string()).collect());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

pub enum Cell {
    F(f64),
    I(i64),
    S(String),
    B(bool),
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::F(x) => write!(f, "{x:?}"),
            Cell::I(x) => write!(f, "{x}"),
            Cell::S(x) => write!(f, "{x}"),
            Cell::B(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// A log-log line plot.
#[derive(Debug, Clone)]
pub struct Plot {
    pub name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    pub fn new(name: &str, title: &str, x_label: &str, y_label: &str) -> Self {
        Plot { name: name.into(), title: title.into(), x_label: x_label.into(), y_label: y_label.into(), series: Vec::new() }
    }

    pub fn series(mut self, label: &str, points: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let points = points.into_iter().filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite()).collect();
        self.series.push(Series { label: label.into(), points });
        self
    }

    pub fn to_svg(&self) -> String {
        let all: Vec<(f64, f64)> = self.series.iter().flat_map(|s| s.points.iter().copied()).collect();
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">"
        );
        let _ = writeln!(svg, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
        let _ = writeln!(svg, "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>", W / 2.0, escape(&self.title));
        if all.is_empty() {
            let _ = writeln!(svg, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">no positive data</text>", W / 2.0, H / 2.0);
            svg.push_str("</svg>\n");
            return svg;
        }
        let span = |v: Vec<f64>| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min).log10().floor();
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max).log10().ceil();
            if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) }
        };
        let (x0, x1) = span(all.iter().map(|p| p.0).collect());
        let (y0, y1) = span(all.iter().map(|p| p.1).collect());
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x.log10() - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (y1 - y.log10()) / (y1 - y0) * ph;
        let _ = writeln!(svg, "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>");
        for e in (x0 as i64)..=(x1 as i64) {
            let x = sx(10f64.powi(e as i32));
            let _ = writeln!(svg, "<line x1=\"{x:.2}\" y1=\"{TOP}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"#ddd\"/>", TOP + ph);
            let _ = writeln!(svg, "<text x=\"{x:.2}\" y=\"{}\" text-anchor=\"middle\">1e{e}</text>", TOP + ph + 16.0);
        }
        for e in (y0 as i64)..=(y1 as i64) {
            let y = sy(10f64.powi(e as i32));
            let _ = writeln!(svg, "<line x1=\"{LEFT}\" y1=\"{y:.2}\" x2=\"{}\" y2=\"{y:.2}\" stroke=\"#ddd\"/>", LEFT + pw);
            let _ = writeln!(svg, "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">1e{e}</text>", LEFT - 6.0, y + 4.0);
        }
        let _ = writeln!(svg, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>", LEFT + pw / 2.0, H - 12.0, escape(&self.x_label));
        let _ = writeln!(
            svg,
            "<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>",
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        for (i, s) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(svg, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>", pts.join(" "));
            for &(x, y) in &s.points {
                let _ = writeln!(svg, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>", sx(x), sy(y));
            }
            let ly = TOP + 14.0 + 16.0 * i as f64;
            let _ = writeln!(svg, "<text x=\"{}\" y=\"{ly:.2}\" fill=\"{color}\">{}</text>", LEFT + 8.0, escape(&s.label));
        }
        svg.push_str("</svg>\n");
        svg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_and_round_trips() {
        let mut t = Table::new("x", &["a", "b"]);
        t.row(vec![Cell::F(0.1), Cell::S("p,q".into())]);
        t.row(vec![Cell::F(1e-300), Cell::I(-3)]);
        let text = String::from_utf8(t.to_csv()).unwrap();
        assert_eq!(text, "a,b\n0.1,\"p,q\"\n1e-300,-3\n");
    }

    #[test]
    fn svg_is_well_formed() {
        let p = Plot::new("p", "a < b", "k", "value").series("s", [(1.0, 1.0), (10.0, 0.1), (0.0, 5.0)]);
        let svg = p.to_svg();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("<circle").count(), 2);
        let empty = Plot::new("e", "t", "x", "y").to_svg();
        assert!(empty.contains("no positive data"));
    }
}
