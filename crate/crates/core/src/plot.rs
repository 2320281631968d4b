//! Learning-curve rendering to standalone SVG.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Trailing moving average: point `i` is the mean of the last
/// `min(window, i + 1)` values.
pub fn moving_average(xs: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::Config("moving-average window must be >= 1".into()));
    }
    // Summing each window afresh keeps long series free of running-sum drift.
    Ok((0..xs.len())
        .map(|i| {
            let w = &xs[(i + 1).saturating_sub(window)..=i];
            w.iter().sum::<f64>() / w.len() as f64
        })
        .collect())
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

/// Normalized reward (y in [0, 1]) against episode index.
pub fn render_curve(episodes: &[u64], values: &[f64], window: usize, title: &str) -> Result<String> {
    if episodes.len() != values.len() {
        return Err(Error::Shape { expected: episodes.len(), actual: values.len() });
    }
    let smooth = moving_average(values, window)?;
    let (x0, x1) = match (episodes.first(), episodes.last()) {
        (Some(&a), Some(&b)) => (a as f64, (b as f64).max(a as f64 + 1.0)),
        _ => (0.0, 1.0),
    };
    let pw = WIDTH - 2.0 * MARGIN;
    let ph = HEIGHT - 2.0 * MARGIN;
    let sx = |e: f64| MARGIN + (e - x0) / (x1 - x0) * pw;
    let sy = |v: f64| MARGIN + (1.0 - v.clamp(0.0, 1.0)) * ph;

    let mut s = String::new();
    let w = &mut s;
    // String formatting cannot fail.
    let _ = writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
    let _ = writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(w, r#"<text x="{}" y="25" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title));
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let y = sy(v);
        let _ = writeln!(w, r##"<line x1="{MARGIN}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, WIDTH - MARGIN);
        let _ = writeln!(w, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{v:.2}</text>"#, MARGIN - 6.0, y + 3.0);
    }
    let _ = writeln!(w, r#"<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{:.2}" stroke="black"/>"#, HEIGHT - MARGIN);
    let _ = writeln!(w, r#"<line x1="{MARGIN}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#, HEIGHT - MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(w, r#"<text x="{MARGIN}" y="{:.2}" font-family="sans-serif" font-size="10">{}</text>"#, HEIGHT - MARGIN + 15.0, x0);
    let _ = writeln!(w, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#, WIDTH - MARGIN, HEIGHT - MARGIN + 15.0, x1);
    let _ = writeln!(w, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">episode (moving average, window {window})</text>"#, WIDTH / 2.0, HEIGHT - 12.0);
    let points: Vec<String> = episodes
        .iter()
        .zip(&smooth)
        .map(|(&e, &v)| format!("{:.2},{:.2}", sx(e as f64), sy(v)))
        .collect();
    let _ = writeln!(w, r##"<polyline fill="none" stroke="#1f5fbf" stroke-width="1.5" points="{}"/>"##, points.join(" "));
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_one_is_identity() {
        let xs = [0.3, 0.1, 0.9, 0.4];
        assert_eq!(moving_average(&xs, 1).unwrap(), xs.to_vec());
    }

    #[test]
    fn ten_row_fixture() {
        let xs: Vec<f64> = (1..=10).map(f64::from).collect();
        let got = moving_average(&xs, 3).unwrap();
        // hand means: 1, 1.5, 2, 3, 4, ..., 9
        let want = [1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12);
        }
        assert!(moving_average(&xs, 0).is_err());
    }

    #[test]
    fn constant_series_is_a_flat_line() {
        let svg = render_curve(&[0, 1, 2, 3], &[1.0; 4], 2, "t").unwrap();
        assert!(svg.contains("points=\"50.00,50.00 "));
        assert!(svg.contains(" 670.00,50.00\""));
        assert_eq!(svg, render_curve(&[0, 1, 2, 3], &[1.0; 4], 2, "t").unwrap());
    }
}
