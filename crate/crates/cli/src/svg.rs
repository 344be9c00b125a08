//! Minimal grouped bar charts as standalone SVG.

use std::fmt::Write;

const PALETTE: [&str; 6] = [
    "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860",
];

pub struct BarChart<'a> {
    pub title: &'a str,
    pub y_label: &'a str,
    /// One label per group along the x axis.
    pub groups: Vec<String>,
    /// `(series name, one value per group)`.
    pub series: Vec<(String, Vec<f64>)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

impl BarChart<'_> {
    pub fn render(&self) -> String {
        let (width, height) = (120.0 + 90.0 * self.groups.len().max(1) as f64, 360.0);
        let (left, right, top, bottom) = (60.0, 20.0, 40.0, 70.0);
        let plot_w = width - left - right;
        let plot_h = height - top - bottom;
        let max = self
            .series
            .iter()
            .flat_map(|(_, v)| v.iter().copied())
            .filter(|v| v.is_finite())
            .fold(0.0f64, f64::max);
        let y_max = if max > 0.0 { max * 1.1 } else { 1.0 };
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            width / 2.0,
            escape(self.title)
        );
        let _ = writeln!(
            s,
            r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{}</text>"#,
            top + plot_h / 2.0,
            top + plot_h / 2.0,
            escape(self.y_label)
        );
        for i in 0..=4 {
            let v = y_max * i as f64 / 4.0;
            let y = top + plot_h - plot_h * i as f64 / 4.0;
            let _ = writeln!(
                s,
                "<line x1=\"{left}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>",
                left + plot_w
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                left - 4.0,
                y + 4.0,
                fmt_tick(v)
            );
        }
        let n_series = self.series.len().max(1) as f64;
        let group_w = plot_w / self.groups.len().max(1) as f64;
        let bar_w = group_w * 0.8 / n_series;
        for (g, name) in self.groups.iter().enumerate() {
            let gx = left + group_w * g as f64 + group_w * 0.1;
            for (k, (_, values)) in self.series.iter().enumerate() {
                let v = values.get(g).copied().unwrap_or(0.0);
                let v = if v.is_finite() { v.max(0.0) } else { 0.0 };
                let h = plot_h * v / y_max;
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
                    gx + bar_w * k as f64,
                    top + plot_h - h,
                    bar_w,
                    h,
                    PALETTE[k % PALETTE.len()]
                );
            }
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                gx + group_w * 0.4,
                top + plot_h + 16.0,
                escape(name)
            );
        }
        let _ = writeln!(
            s,
            "<line x1=\"{left}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#333\"/>",
            top + plot_h,
            left + plot_w,
            top + plot_h
        );
        for (k, (name, _)) in self.series.iter().enumerate() {
            let x = left + 110.0 * k as f64;
            let y = height - 20.0;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{y:.1}">{}</text>"#,
                y - 9.0,
                PALETTE[k % PALETTE.len()],
                x + 14.0,
                escape(name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn fmt_tick(v: f64) -> String {
    if v >= 100.0 {
        format!("{v:.0}")
    } else if v >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}
