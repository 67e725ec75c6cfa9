//! Minimal SVG charts. Each axis group carries a `data-scale` attribute
//! (`linear` or `log`) so the rendering is checkable without a viewer.

use std::fmt::Write as _;

const FONT: &str = "font-family=\"sans-serif\" font-size=\"11\"";
const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

/// Maps data values onto a pixel interval.
#[derive(Debug, Clone, Copy)]
pub struct Axis {
    pub scale: Scale,
    pub lo: f64,
    pub hi: f64,
    pub px_lo: f64,
    pub px_hi: f64,
}

impl Axis {
    /// Axis covering `values`, padded; log axes snap to whole decades.
    pub fn fit(scale: Scale, values: impl IntoIterator<Item = f64>, px_lo: f64, px_hi: f64, zero_based: bool) -> Self {
        let vals: Vec<f64> = values
            .into_iter()
            .filter(|v| v.is_finite() && (scale == Scale::Linear || *v > 0.0))
            .collect();
        let (mut lo, mut hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if vals.is_empty() {
            (lo, hi) = (1.0, 10.0);
        }
        match scale {
            Scale::Log => {
                lo = 10f64.powf(lo.log10().floor());
                hi = 10f64.powf(hi.log10().ceil());
                if hi <= lo {
                    hi = lo * 10.0;
                }
            }
            Scale::Linear => {
                if zero_based {
                    lo = lo.min(0.0);
                }
                let span = if hi > lo { hi - lo } else { hi.abs().max(1.0) };
                if !zero_based || lo < 0.0 {
                    lo -= 0.05 * span;
                }
                hi += 0.08 * span;
            }
        }
        Self { scale, lo, hi, px_lo, px_hi }
    }

    pub fn map(&self, v: f64) -> f64 {
        let t = match self.scale {
            Scale::Linear => (v - self.lo) / (self.hi - self.lo),
            Scale::Log => (v.max(self.lo * 1e-3).log10() - self.lo.log10()) / (self.hi.log10() - self.lo.log10()),
        };
        self.px_lo + t * (self.px_hi - self.px_lo)
    }

    pub fn ticks(&self) -> Vec<f64> {
        match self.scale {
            Scale::Log => {
                let (a, b) = (self.lo.log10().round() as i32, self.hi.log10().round() as i32);
                (a..=b).map(|e| 10f64.powi(e)).collect()
            }
            Scale::Linear => {
                let raw = (self.hi - self.lo) / 5.0;
                let mag = 10f64.powf(raw.log10().floor());
                let step = [1.0, 2.0, 2.5, 5.0, 10.0].iter().map(|m| m * mag).find(|&s| s >= raw).unwrap_or(raw);
                let mut t = (self.lo / step).ceil() * step;
                let mut out = Vec::new();
                while t <= self.hi + 1e-12 {
                    out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
                    t += step;
                }
                out
            }
        }
    }

    fn scale_name(&self) -> &'static str {
        match self.scale {
            Scale::Linear => "linear",
            Scale::Log => "log",
        }
    }
}

pub struct Svg {
    body: String,
    width: f64,
    height: f64,
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        Self { body: String::new(), width, height }
    }

    pub fn raw(&mut self, s: &str) {
        self.body.push_str(s);
        self.body.push('\n');
    }

    pub fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.body,
            "<text x=\"{x:.1}\" y=\"{y:.1}\" text-anchor=\"{anchor}\" {FONT}>{}</text>",
            escape(s)
        );
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.body,
            "<line x1=\"{x1:.1}\" y1=\"{y1:.1}\" x2=\"{x2:.1}\" y2=\"{y2:.1}\" stroke=\"{stroke}\"/>"
        );
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, title: &str) {
        let _ = writeln!(
            self.body,
            "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"{fill}\"><title>{}</title></rect>",
            w.max(0.0),
            h.max(0.0),
            escape(title)
        );
    }

    pub fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str, class: &str, title: &str) {
        let _ = writeln!(
            self.body,
            "<circle class=\"{class}\" cx=\"{cx:.1}\" cy=\"{cy:.1}\" r=\"{r:.1}\" fill=\"{fill}\"><title>{}</title></circle>",
            escape(title)
        );
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str) {
        let p: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        let _ = writeln!(
            self.body,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"2\"/>",
            p.join(" ")
        );
    }

    /// Vertical axis at `x` spanning the axis's pixel range.
    pub fn y_axis(&mut self, axis: &Axis, x: f64, label: &str) {
        let _ = writeln!(self.body, "<g class=\"axis y\" data-scale=\"{}\">", axis.scale_name());
        self.line(x, axis.px_lo, x, axis.px_hi, "#333");
        for t in axis.ticks() {
            let y = axis.map(t);
            self.line(x - 4.0, y, x, y, "#333");
            self.text(x - 6.0, y + 4.0, "end", &fmt_tick(t));
        }
        let mid = 0.5 * (axis.px_lo + axis.px_hi);
        let _ = writeln!(
            self.body,
            "<text transform=\"translate({:.1},{mid:.1}) rotate(-90)\" text-anchor=\"middle\" {FONT}>{}</text>",
            x - 44.0,
            escape(label)
        );
        self.body.push_str("</g>\n");
    }

    /// Horizontal axis at `y` spanning the axis's pixel range.
    pub fn x_axis(&mut self, axis: &Axis, y: f64, label: &str) {
        let _ = writeln!(self.body, "<g class=\"axis x\" data-scale=\"{}\">", axis.scale_name());
        self.line(axis.px_lo, y, axis.px_hi, y, "#333");
        for t in axis.ticks() {
            let x = axis.map(t);
            self.line(x, y, x, y + 4.0, "#333");
            self.text(x, y + 16.0, "middle", &fmt_tick(t));
        }
        self.text(0.5 * (axis.px_lo + axis.px_hi), y + 32.0, "middle", label);
        self.body.push_str("</g>\n");
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

pub struct BarPanel<'a> {
    pub title: &'a str,
    pub scale: Scale,
    /// `None` draws no bar for that label.
    pub values: Vec<Option<f64>>,
}

/// Side-by-side bar panels over a shared list of labels.
pub fn bar_panels(title: &str, labels: &[String], panels: &[BarPanel]) -> String {
    let pw = 300.0;
    let (top, bottom) = (50.0, 280.0);
    let mut svg = Svg::new(pw * panels.len() as f64 + 20.0, 400.0);
    svg.text(svg.width / 2.0, 22.0, "middle", title);
    for (pi, panel) in panels.iter().enumerate() {
        let x0 = pi as f64 * pw + 70.0;
        let x1 = x0 + pw - 90.0;
        let axis = Axis::fit(panel.scale, panel.values.iter().flatten().copied(), bottom, top, true);
        svg.y_axis(&axis, x0, panel.title);
        svg.line(x0, bottom, x1, bottom, "#333");
        let slot = (x1 - x0) / labels.len().max(1) as f64;
        for (i, label) in labels.iter().enumerate() {
            let cx = x0 + slot * (i as f64 + 0.5);
            if let Some(v) = panel.values.get(i).copied().flatten() {
                let base = if panel.scale == Scale::Log { bottom } else { axis.map(0.0) };
                let y = axis.map(v);
                svg.rect(cx - slot * 0.35, y.min(base), slot * 0.7, (base - y).abs(), PALETTE[i % PALETTE.len()], &format!("{label}: {v}"));
            }
            let _ = writeln!(
                svg.body,
                "<text transform=\"translate({cx:.1},{:.1}) rotate(40)\" {FONT}>{}</text>",
                bottom + 12.0,
                escape(label)
            );
        }
    }
    svg.finish()
}

pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
    pub label: String,
    pub highlight: Option<String>,
}

/// Scatter of y against x; highlighted points are drawn larger and labelled.
pub fn scatter(title: &str, x_label: &str, y_label: &str, x_scale: Scale, points: &[ScatterPoint]) -> String {
    let mut svg = Svg::new(640.0, 420.0);
    svg.text(320.0, 22.0, "middle", title);
    let xa = Axis::fit(x_scale, points.iter().map(|p| p.x), 80.0, 610.0, false);
    let ya = Axis::fit(Scale::Linear, points.iter().map(|p| p.y), 360.0, 40.0, false);
    svg.x_axis(&xa, 360.0, x_label);
    svg.y_axis(&ya, 80.0, y_label);
    for p in points {
        let (cx, cy) = (xa.map(p.x), ya.map(p.y));
        match &p.highlight {
            Some(tag) => {
                svg.circle(cx, cy, 6.0, "#d62728", "point highlight", &p.label);
                svg.text(cx + 8.0, cy - 8.0, "start", tag);
            }
            None => svg.circle(cx, cy, 4.0, "#1f77b4", "point", &p.label),
        }
    }
    svg.finish()
}

pub struct Series {
    pub name: String,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Lines over categorical x positions with ±std error bars.
pub fn lines_with_error(title: &str, x_labels: &[String], y_label: &str, series: &[Series]) -> String {
    let mut svg = Svg::new(640.0, 420.0);
    svg.text(320.0, 22.0, "middle", title);
    let ys = series.iter().flat_map(|s| s.mean.iter().zip(&s.std).flat_map(|(m, d)| [m - d, m + d]));
    let ya = Axis::fit(Scale::Linear, ys, 360.0, 40.0, false);
    svg.y_axis(&ya, 80.0, y_label);
    svg.line(80.0, 360.0, 610.0, 360.0, "#333");
    let step = 530.0 / x_labels.len().max(1) as f64;
    let xpos = |i: usize| 80.0 + step * (i as f64 + 0.5);
    for (i, l) in x_labels.iter().enumerate() {
        svg.text(xpos(i), 376.0, "middle", l);
    }
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let pts: Vec<(f64, f64)> = s.mean.iter().enumerate().map(|(i, &m)| (xpos(i), ya.map(m))).collect();
        svg.polyline(&pts, color);
        for (i, (&m, &d)) in s.mean.iter().zip(&s.std).enumerate() {
            let x = xpos(i) + (si as f64 - 0.5) * 4.0;
            svg.line(x, ya.map(m - d), x, ya.map(m + d), color);
            svg.circle(x, ya.map(m), 3.5, color, "point", &format!("{}: {m:.4} ± {d:.4}", s.name));
        }
        svg.rect(440.0, 44.0 + 16.0 * si as f64, 10.0, 10.0, color, &s.name);
        svg.text(456.0, 53.0 + 16.0 * si as f64, "start", &s.name);
    }
    svg.finish()
}

/// Horizontal bars with optional error whiskers, in the given order.
pub fn horizontal_bars(title: &str, labels: &[String], values: &[f64], errors: &[f64], x_label: &str) -> String {
    let row = 28.0;
    let h = 90.0 + row * labels.len() as f64;
    let mut svg = Svg::new(640.0, h);
    svg.text(320.0, 22.0, "middle", title);
    let lows = values.iter().zip(errors).map(|(v, e)| v - e);
    let highs = values.iter().zip(errors).map(|(v, e)| v + e);
    let xa = Axis::fit(Scale::Linear, lows.chain(highs), 180.0, 610.0, true);
    let bottom = 40.0 + row * labels.len() as f64;
    svg.x_axis(&xa, bottom, x_label);
    let zero = xa.map(0.0);
    for (i, (label, (&v, &e))) in labels.iter().zip(values.iter().zip(errors)).enumerate() {
        let y = 40.0 + row * i as f64;
        let x = xa.map(v);
        svg.rect(x.min(zero), y + 4.0, (x - zero).abs(), row - 8.0, PALETTE[0], &format!("{label}: {v}"));
        if e > 0.0 {
            svg.line(xa.map(v - e), y + row / 2.0, xa.map(v + e), y + row / 2.0, "#333");
        }
        svg.text(174.0, y + row / 2.0 + 4.0, "end", label);
    }
    svg.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_axis_snaps_to_decades() {
        let a = Axis::fit(Scale::Log, [1064.0, 153_096.0], 0.0, 100.0, false);
        assert_eq!((a.lo, a.hi), (1e3, 1e6));
        assert_eq!(a.ticks(), vec![1e3, 1e4, 1e5, 1e6]);
        assert!((a.map(1e4) - 100.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn linear_ticks_cover_range() {
        let a = Axis::fit(Scale::Linear, [0.0, 0.18], 0.0, 100.0, true);
        let t = a.ticks();
        assert_eq!(t[0], 0.0);
        assert!(*t.last().unwrap() >= 0.15);
    }

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }
}
