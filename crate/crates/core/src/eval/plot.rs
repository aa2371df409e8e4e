use std::fmt::Write;

use super::PrCurve;

const W: f64 = 480.0;
const H: f64 = 360.0;
const M: f64 = 40.0;

/// Minimal SVG line plot of precision against recall on the unit square.
pub fn curve_svg(c: &PrCurve) -> String {
    let x = |r: f64| M + r * (W - 2.0 * M);
    let y = |p: f64| H - M - p * (H - 2.0 * M);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{} {} L{} {} L{} {}" stroke="black" fill="none"/>"#,
        x(0.0),
        y(1.0),
        x(0.0),
        y(0.0),
        x(1.0),
        y(0.0)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">recall</text>"#,
        W / 2.0,
        H - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="12" y="{}" font-size="12" transform="rotate(-90 12 {})" text-anchor="middle">precision</text>"#,
        H / 2.0,
        H / 2.0
    );
    let pts: Vec<String> = c
        .points
        .iter()
        .map(|p| format!("{:.2},{:.2}", x(p.recall), y(p.precision)))
        .collect();
    if !pts.is_empty() {
        let _ = writeln!(
            s,
            r#"<polyline points="{}" stroke="steelblue" stroke-width="2" fill="none"/>"#,
            pts.join(" ")
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12">opt F1 {:.3}  AUC {:.3}  last F1 {:.3}</text>"#,
        M + 10.0,
        M - 10.0,
        c.optimal_f1,
        c.auc,
        c.last_f1
    );
    s.push_str("</svg>\n");
    s
}
