//! SVG learning curves and strategy heatmaps.

use std::fmt::Write;

use crate::output::{Curve, ScoreEntry};
use crate::HarnessError;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// Data range widened by 5% of its span on each side; a degenerate range gets unit span.
pub fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    (lo - 0.05 * span, hi + 0.05 * span)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.width
    }

    fn py(&self, y: f64) -> f64 {
        self.top + (1.0 - (y - self.y.0) / (self.y.1 - self.y.0)) * self.height
    }
}

/// Mean accuracy against labeled count, one polyline per method with a ±1 std band.
pub fn plot_svg(curves: &[Curve]) -> Result<String, HarnessError> {
    let points = curves.iter().flat_map(|c| c.points.iter());
    if curves.iter().all(|c| c.points.is_empty()) {
        return Err(HarnessError::Config("nothing to plot".into()));
    }
    let (mut xlo, mut xhi, mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        xlo = xlo.min(p.labeled_count as f64);
        xhi = xhi.max(p.labeled_count as f64);
        ylo = ylo.min(p.mean - p.std);
        yhi = yhi.max(p.mean + p.std);
    }
    let f = Frame { left: 70.0, top: 30.0, width: 480.0, height: 380.0, x: padded_range(xlo, xhi), y: padded_range(ylo, yhi) };
    let (w, h) = (720.0, 480.0);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<g class="axes" data-x-min="{}" data-x-max="{}" data-y-min="{}" data-y-max="{}" stroke="black">"#,
        f.x.0, f.x.1, f.y.0, f.y.1
    );
    let (x0, y0, x1, y1) = (f.left, f.top + f.height, f.left + f.width, f.top);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/>"#);
    for i in 0..=4 {
        let xv = f.x.0 + (f.x.1 - f.x.0) * i as f64 / 4.0;
        let yv = f.y.0 + (f.y.1 - f.y.0) * i as f64 / 4.0;
        let (tx, ty) = (f.px(xv), f.py(yv));
        let _ = writeln!(s, r#"<line x1="{tx:.1}" y1="{y0}" x2="{tx:.1}" y2="{:.1}"/>"#, y0 + 5.0);
        let _ = writeln!(s, r#"<line x1="{:.1}" y1="{ty:.1}" x2="{x0}" y2="{ty:.1}"/>"#, x0 - 5.0);
        let _ = writeln!(s, r#"<text x="{tx:.1}" y="{:.1}" text-anchor="middle" stroke="none" font-size="11">{xv:.0}</text>"#, y0 + 18.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end" stroke="none" font-size="11">{yv:.3}</text>"#, x0 - 8.0, ty + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" stroke="none" font-size="13">labeled samples</text>"#, f.left + f.width / 2.0, h - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" stroke="none" font-size="13" transform="rotate(-90 18 {:.1})">test accuracy</text>"#,
        f.top + f.height / 2.0,
        f.top + f.height / 2.0
    );
    let _ = writeln!(s, "</g>");

    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let name = escape(&c.method);
        let upper = c.points.iter().map(|p| format!("{:.2},{:.2}", f.px(p.labeled_count as f64), f.py(p.mean + p.std)));
        let lower = c.points.iter().rev().map(|p| format!("{:.2},{:.2}", f.px(p.labeled_count as f64), f.py(p.mean - p.std)));
        let band: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(
            s,
            r#"<polygon class="band" data-method="{name}" points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#,
            band.join(" ")
        );
        let line: Vec<String> =
            c.points.iter().map(|p| format!("{:.2},{:.2}", f.px(p.labeled_count as f64), f.py(p.mean))).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="curve" data-method="{name}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        );
        let ly = f.top + 10.0 + 20.0 * i as f64;
        let lx = f.left + f.width + 20.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" font-size="12">{name}</text>"#, lx + 26.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Per-round strategy shares: scores averaged over runs, then divided by the round's
/// maximum so the leading strategy of every round is exactly 1.
pub fn heatmap_grid(entries: &[ScoreEntry]) -> (Vec<usize>, Vec<String>, Vec<Vec<f64>>) {
    let mut rounds: Vec<usize> = entries.iter().map(|e| e.round).collect();
    rounds.sort_unstable();
    rounds.dedup();
    let mut strategies: Vec<String> = Vec::new();
    for e in entries {
        if !strategies.contains(&e.strategy) {
            strategies.push(e.strategy.clone());
        }
    }
    let mut sum = vec![vec![0.0; strategies.len()]; rounds.len()];
    let mut count = vec![vec![0usize; strategies.len()]; rounds.len()];
    for e in entries {
        let r = rounds.binary_search(&e.round).unwrap_or_default();
        let k = strategies.iter().position(|s| *s == e.strategy).unwrap_or_default();
        sum[r][k] += e.score;
        count[r][k] += 1;
    }
    let grid = sum
        .into_iter()
        .zip(count)
        .map(|(row, n)| {
            let row: Vec<f64> = row.iter().zip(&n).map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect();
            let max = row.iter().copied().fold(0.0, f64::max);
            row.iter().map(|&v| if max > 0.0 { v / max } else { 1.0 }).collect()
        })
        .collect();
    (rounds, strategies, grid)
}

fn shade(v: f64) -> String {
    let lerp = |a: f64, b: f64| (a + (b - a) * v.clamp(0.0, 1.0)).round() as u8;
    format!("rgb({},{},{})", lerp(247.0, 8.0), lerp(251.0, 48.0), lerp(255.0, 107.0))
}

/// Rounds down, strategies across; darker cells contributed more to the chosen batch.
pub fn heatmap_svg(entries: &[ScoreEntry]) -> Result<String, HarnessError> {
    if entries.is_empty() {
        return Err(HarnessError::Config("no strategy scores to draw".into()));
    }
    let (rounds, strategies, grid) = heatmap_grid(entries);
    let (cw, ch, left, top) = (80.0, 28.0, 70.0, 40.0);
    let w = left + cw * strategies.len() as f64 + 20.0;
    let h = top + ch * rounds.len() as f64 + 50.0;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    for (k, name) in strategies.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"#,
            left + cw * (k as f64 + 0.5),
            top - 10.0,
            escape(name)
        );
    }
    for (r, &round) in rounds.iter().enumerate() {
        let y = top + ch * r as f64;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">round {round}</text>"#, left - 6.0, y + ch / 2.0 + 4.0);
        for (k, name) in strategies.iter().enumerate() {
            let v = grid[r][k];
            let _ = writeln!(
                s,
                r#"<rect class="cell" data-round="{round}" data-strategy="{}" data-score="{v:.6}" x="{:.1}" y="{y:.1}" width="{cw}" height="{ch}" fill="{}" stroke="white"/>"#,
                escape(name),
                left + cw * k as f64,
                shade(v)
            );
        }
    }
    let _ = writeln!(s, r#"<text x="{left}" y="{:.1}" font-size="12">darker = larger share of the chosen batch</text>"#, h - 15.0);
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::output::CurvePoint;

    fn curve(method: &str, n: usize) -> Curve {
        Curve {
            method: method.into(),
            points: (0..n)
                .map(|r| CurvePoint { round: r, labeled_count: 40 + 50 * r, mean: 0.5 + 0.1 * r as f64, std: 0.02, n_seeds: 3 })
                .collect(),
        }
    }

    #[test]
    fn range_padding() {
        let (lo, hi) = padded_range(40.0, 140.0);
        assert!((lo - 35.0).abs() < 1e-12 && (hi - 145.0).abs() < 1e-12);
        let (lo, hi) = padded_range(2.0, 2.0);
        assert!(lo < 2.0 && hi > 2.0);
    }

    #[test]
    fn one_polyline_per_method() {
        let svg = plot_svg(&[curve("autoal", 4)]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        let pts = svg.split("class=\"curve\"").nth(1).unwrap().split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split_whitespace().count(), 4);
        assert_eq!(plot_svg(&[curve("a", 2), curve("b", 2)]).unwrap().matches("<polyline").count(), 2);
    }

    #[test]
    fn heatmap_rows_peak_at_one() {
        let e = |round, strategy: &str, score| ScoreEntry { run_id: "x".into(), seed: 0, round, strategy: strategy.into(), score };
        let entries = vec![e(1, "entropy", 1.0), e(1, "margin", 0.2), e(2, "entropy", 0.0), e(2, "margin", 1.0)];
        let (_, _, grid) = heatmap_grid(&entries);
        for row in &grid {
            assert_eq!(row.iter().copied().fold(0.0, f64::max), 1.0);
        }
        let svg = heatmap_svg(&entries).unwrap();
        assert_eq!(svg.matches("class=\"cell\"").count(), 4);
        assert_eq!(svg.matches("rgb(8,48,107)").count(), 2);
    }
}
