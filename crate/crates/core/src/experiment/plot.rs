//! Standalone SVG bar panels and prediction timelines.

use std::fmt::Write;

use crate::metrics::ScoreReport;
use crate::timeline::{labels_to_events, LabelSeries, SEIZURE};

const PALETTE: [&str; 8] = [
    "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Grouped bars of the seven headline rates plus a separate FAR panel, one
/// bar colour per labelled report.
pub fn panel_svg(title: &str, series: &[(String, ScoreReport)]) -> String {
    let n = series.len().max(1);
    let group_w = 24.0 * n as f64 + 16.0;
    let rates_w = 7.0 * group_w;
    let far_w = group_w + 20.0;
    let (left, top, plot_h) = (50.0, 40.0, 220.0);
    let width = left + rates_w + 70.0 + far_w + 20.0;
    let legend_h = 18.0 * series.len() as f64;
    let height = top + plot_h + 50.0 + legend_h;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="20" font-size="14">{}</text>"#,
        escape(title)
    );

    // Rates panel.
    let y_of = |v: f64| top + plot_h * (1.0 - v.clamp(0.0, 1.0));
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"##,
            left + rates_w,
            left - 4.0,
            y + 4.0
        );
    }
    let names = series
        .first()
        .map(|(_, r)| r.panel().map(|p| p.0))
        .unwrap_or([""; 7]);
    for (g, name) in names.iter().enumerate() {
        let gx = left + g as f64 * group_w + 8.0;
        for (i, (_, r)) in series.iter().enumerate() {
            let v = r.panel()[g].1;
            let x = gx + 24.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{:.1}" width="20" height="{:.1}" fill="{}"><title>{v:.4}</title></rect>"#,
                y_of(v),
                top + plot_h - y_of(v),
                PALETTE[i % PALETTE.len()]
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{name}</text>"#,
            gx + group_w / 2.0 - 8.0,
            top + plot_h + 16.0
        );
    }

    // FAR panel on its own scale.
    let fx = left + rates_w + 70.0;
    let max_far = series
        .iter()
        .map(|(_, r)| r.far_per_day)
        .fold(0.0, f64::max);
    let scale = if max_far > 0.0 { max_far * 1.1 } else { 1.0 };
    let fy = |v: f64| top + plot_h * (1.0 - v / scale);
    for k in 0..=4 {
        let v = scale * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r##"<line x1="{fx:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.1}</text>"##,
            fy(v),
            fx + far_w,
            fy(v),
            fx - 4.0,
            fy(v) + 4.0
        );
    }
    for (i, (_, r)) in series.iter().enumerate() {
        let x = fx + 8.0 + 24.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.1}" y="{:.1}" width="20" height="{:.1}" fill="{}"><title>{:.4}</title></rect>"#,
            fy(r.far_per_day),
            top + plot_h - fy(r.far_per_day),
            PALETTE[i % PALETTE.len()],
            r.far_per_day
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">FAR / day</text>"#,
        fx + far_w / 2.0,
        top + plot_h + 16.0
    );

    for (i, (label, _)) in series.iter().enumerate() {
        let y = top + plot_h + 36.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{left}" y="{:.1}" width="12" height="12" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            y - 10.0,
            PALETTE[i % PALETTE.len()],
            left + 18.0,
            y,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// One lane per labelled series, seizure runs drawn as filled spans.
/// All series are drawn on the time axis of the longest one.
pub fn timeline_svg(title: &str, lanes: &[(String, LabelSeries)]) -> String {
    let (left, top, lane_h, plot_w) = (110.0, 36.0, 28.0, 900.0);
    let span = lanes
        .iter()
        .map(|(_, l)| l.duration_s())
        .fold(0.0, f64::max)
        .max(1e-9);
    let height = top + lane_h * lanes.len() as f64 + 30.0;
    let width = left + plot_w + 20.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="20" font-size="14">{}</text>"#,
        escape(title)
    );
    for (i, (label, series)) in lanes.iter().enumerate() {
        let y = top + lane_h * i as f64;
        let _ = writeln!(
            s,
            r##"<rect x="{left}" y="{y:.1}" width="{plot_w}" height="{:.1}" fill="#f4f4f4"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            lane_h - 6.0,
            left - 6.0,
            y + lane_h / 2.0,
            escape(label)
        );
        for e in labels_to_events(series, SEIZURE) {
            let x0 = left + plot_w * (e.start - series.origin()) / span;
            let w = (plot_w * e.duration() / span).max(0.5);
            let _ = writeln!(
                s,
                r#"<rect x="{x0:.2}" y="{y:.1}" width="{w:.2}" height="{:.1}" fill="{}"/>"#,
                lane_h - 6.0,
                PALETTE[i % PALETTE.len()]
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="{:.1}">0 s</text><text x="{:.1}" y="{:.1}" text-anchor="end">{span:.0} s</text>"#,
        height - 8.0,
        left + plot_w,
        height - 8.0
    );
    s.push_str("</svg>\n");
    s
}
