//! Static SVG charts of benchmark reports.

use std::fmt::Write as _;

use super::runner::BenchReport;

const W: f64 = 720.0;
const PANEL_H: f64 = 220.0;
const LEFT: f64 = 70.0;
const COLORS: [&str; 2] = ["#888888", "#1f77b4"];

fn color(mode: &str) -> &'static str {
    if mode == "ours" {
        COLORS[1]
    } else {
        COLORS[0]
    }
}

/// Three panels: detection rate per sequence, mean pose L1 per sequence
/// (baseline and ours side by side), and per-frame pose error over time.
pub fn plot_reports(reports: &[BenchReport]) -> String {
    let mut rs: Vec<&BenchReport> = reports.iter().collect();
    rs.sort_by(|a, b| (&a.sequence, &a.mode).cmp(&(&b.sequence, &b.mode)));
    let mut seqs: Vec<&str> = rs.iter().map(|r| r.sequence.as_str()).collect();
    seqs.dedup();

    let h = 3.0 * PANEL_H + 40.0;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{h}" viewBox="0 0 {W} {h}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{W}" height="{h}" fill="white"/>"#).unwrap();
    legend(&mut s);

    bar_panel(&mut s, 30.0, "Detection rate", &seqs, &rs, |r| Some(r.detection_rate), Some(1.0));
    bar_panel(&mut s, 30.0 + PANEL_H, "Mean pose L1 [m]", &seqs, &rs, |r| r.pose_mean_l1, None);
    line_panel(&mut s, 30.0 + 2.0 * PANEL_H, &rs);
    s.push_str("</svg>\n");
    s
}

fn legend(s: &mut String) {
    for (i, (mode, c)) in [("baseline", COLORS[0]), ("ours", COLORS[1])].iter().enumerate() {
        let x = W - 180.0 + 90.0 * i as f64;
        writeln!(s, r#"<rect x="{x}" y="8" width="12" height="12" fill="{c}"/>"#).unwrap();
        writeln!(s, r#"<text x="{}" y="18">{mode}</text>"#, x + 16.0).unwrap();
    }
}

fn axes(s: &mut String, top: f64, title: &str, y_max: f64) -> (f64, f64) {
    let (y0, y1) = (top + PANEL_H - 40.0, top + 20.0);
    writeln!(s, r#"<text x="{LEFT}" y="{}" font-weight="bold">{title}</text>"#, top + 12.0).unwrap();
    writeln!(s, r#"<line x1="{LEFT}" y1="{y0}" x2="{}" y2="{y0}" stroke="black"/>"#, W - 20.0).unwrap();
    writeln!(s, r#"<line x1="{LEFT}" y1="{y0}" x2="{LEFT}" y2="{y1}" stroke="black"/>"#).unwrap();
    for k in 0..=4 {
        let v = y_max * k as f64 / 4.0;
        let y = y0 - (y0 - y1) * k as f64 / 4.0;
        writeln!(s, r##"<line x1="{LEFT}" y1="{y}" x2="{}" y2="{y}" stroke="#dddddd"/>"##, W - 20.0).unwrap();
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, tick(v)).unwrap();
    }
    (y0, y1)
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 0.1 {
        format!("{v:.2}")
    } else {
        format!("{v:.1e}")
    }
}

fn bar_panel(
    s: &mut String,
    top: f64,
    title: &str,
    seqs: &[&str],
    rs: &[&BenchReport],
    value: impl Fn(&BenchReport) -> Option<f64>,
    fixed_max: Option<f64>,
) {
    let max = fixed_max.unwrap_or_else(|| rs.iter().filter_map(|r| value(r)).fold(0.0, f64::max).max(1e-9) * 1.1);
    let (y0, y1) = axes(s, top, title, max);
    let slot = (W - 20.0 - LEFT) / seqs.len().max(1) as f64;
    for (i, seq) in seqs.iter().enumerate() {
        let x = LEFT + slot * i as f64;
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{seq}</text>"#, x + slot / 2.0, y0 + 16.0).unwrap();
        for (j, mode) in ["baseline", "ours"].iter().enumerate() {
            let Some(v) = rs.iter().find(|r| r.sequence == *seq && r.mode == *mode).and_then(|r| value(r)) else {
                continue;
            };
            let bh = (y0 - y1) * (v / max).clamp(0.0, 1.0);
            let bx = x + slot * (0.2 + 0.3 * j as f64);
            writeln!(
                s,
                r#"<rect x="{bx:.2}" y="{:.2}" width="{:.2}" height="{bh:.2}" fill="{}"><title>{seq} {mode}: {v}</title></rect>"#,
                y0 - bh,
                slot * 0.28,
                color(mode)
            )
            .unwrap();
        }
    }
}

fn line_panel(s: &mut String, top: f64, rs: &[&BenchReport]) {
    let points = |r: &BenchReport| -> Vec<(f64, f64)> {
        r.frames.iter().filter_map(|f| f.pose_l1.map(|e| (f.t as f64, e))).collect()
    };
    let all: Vec<(f64, f64)> = rs.iter().flat_map(|r| points(r)).collect();
    let y_max = all.iter().map(|p| p.1).fold(0.0, f64::max).max(1e-9) * 1.1;
    let (t_min, t_max) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (y0, y1) = axes(s, top, "Per-frame pose L1 [m] over time", y_max);
    let span = if t_max > t_min { t_max - t_min } else { 1.0 };
    let x_of = |t: f64| LEFT + (W - 40.0 - LEFT) * (t - t_min) / span;
    if all.is_empty() {
        return;
    }
    writeln!(s, r#"<text x="{LEFT}" y="{}">{:.0} ms</text>"#, y0 + 16.0, t_min * 1e-3).unwrap();
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.0} ms</text>"#, W - 40.0, y0 + 16.0, t_max * 1e-3).unwrap();
    for r in rs {
        let pts = points(r);
        let path: Vec<String> =
            pts.iter().map(|&(t, e)| format!("{:.2},{:.2}", x_of(t), y0 - (y0 - y1) * e / y_max)).collect();
        let dash = if r.mode == "ours" { "" } else { r#" stroke-dasharray="4 3""# };
        writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}><title>{} {}</title></polyline>"#,
            path.join(" "),
            color(&r.mode),
            r.sequence,
            r.mode
        )
        .unwrap();
    }
}
