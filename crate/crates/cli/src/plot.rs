//! Minimal SVG line plots from an emitted CSV.

use std::fmt::Write as _;
use std::path::Path;

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Reads columns `x` and each of `ys` from a CSV with `#` comment lines.
pub fn read_series(path: &Path, x: &str, ys: &[String]) -> Result<Vec<Series>, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let headers = rdr.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            format!("column {name:?} not found; available: {}", headers.iter().collect::<Vec<_>>().join(","))
        })
    };
    let xi = col(x)?;
    let yis: Vec<usize> = ys.iter().map(|y| col(y)).collect::<Result<_, _>>()?;
    let mut series: Vec<Series> = ys.iter().map(|y| Series { name: y.clone(), points: Vec::new() }).collect();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let parse = |i: usize| rec[i].trim().parse::<f64>().map_err(|e| format!("bad number {:?}: {e}", &rec[i]));
        let xv = parse(xi)?;
        for (s, &yi) in series.iter_mut().zip(&yis) {
            let yv = parse(yi)?;
            if xv.is_finite() && yv.is_finite() {
                s.points.push((xv, yv));
            }
        }
    }
    Ok(series)
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub fn render_svg(series: &[Series], x_label: &str, title: &str) -> String {
    let (w, h, pad) = (640.0, 420.0, 50.0);
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
        w / 2.0,
        h - 10.0,
        escape(x_label)
    );
    for (v, y) in [(x0, h - pad + 15.0), (x1, h - pad + 15.0)] {
        let _ = writeln!(s, r#"<text x="{}" y="{y}" text-anchor="middle" font-size="10">{v:.3}</text>"#, sx(v));
    }
    for v in [y0, y1] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end" font-size="10">{v:.3}</text>"#,
            pad - 4.0,
            sy(v) + 3.0
        );
    }
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = ser.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ =
            writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
            w - pad - 100.0,
            pad + 15.0 * (i + 1) as f64,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_has_one_polyline_per_series() {
        let s = vec![
            Series { name: "a".into(), points: vec![(0.0, 1.0), (1.0, 2.0)] },
            Series { name: "b<".into(), points: vec![(0.0, 0.0)] },
        ];
        let svg = render_svg(&s, "x", "t");
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("b&lt;"));
        assert!(render_svg(&[], "x", "t").starts_with("<svg"));
    }
}
