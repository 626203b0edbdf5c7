// CSV and standalone SVG renderings of EDA results.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::{CorrelationMatrix, Histogram};

pub(crate) fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// `bin_start,bin_end,count` rows.
pub fn histogram_csv(h: &Histogram) -> String {
    let mut out = String::from("bin_start,bin_end,count\n");
    for (i, c) in h.counts.iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", h.bin_edges[i], h.bin_edges[i + 1], c);
    }
    out
}

/// Square matrix with a header row and a leading name column.
pub fn correlation_csv(c: &CorrelationMatrix) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![String::new()];
    header.extend(c.names.iter().cloned());
    w.write_record(&header).expect("in-memory write");
    for (name, row) in c.names.iter().zip(&c.r) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.3}")
    }
}

fn bar_chart(title: &str, labels: &[String], counts: &[u64], width: u32, height: u32) -> String {
    let margin_left = 56.0;
    let margin_bottom = 44.0;
    let margin_top = 28.0;
    let plot_w = f64::from(width) - margin_left - 12.0;
    let plot_h = f64::from(height) - margin_top - margin_bottom;
    let max = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let n = counts.len().max(1) as f64;
    let slot = plot_w / n;
    let bar_w = (slot * 0.85).max(1.0);

    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = write!(
        s,
        r#"<text x="{}" y="16" text-anchor="middle" font-size="13" font-weight="bold">{}</text>"#,
        f64::from(width) / 2.0,
        escape(title)
    );
    let base_y = margin_top + plot_h;
    let _ = write!(
        s,
        r##"<line x1="{margin_left}" y1="{base_y}" x2="{}" y2="{base_y}" stroke="#333"/>"##,
        margin_left + plot_w
    );
    let _ = write!(
        s,
        r##"<line x1="{margin_left}" y1="{margin_top}" x2="{margin_left}" y2="{base_y}" stroke="#333"/>"##
    );
    let _ = write!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        margin_left - 4.0,
        margin_top + 4.0,
        max as u64
    );
    let _ = write!(
        s,
        r#"<text x="{}" y="{base_y}" text-anchor="end">0</text>"#,
        margin_left - 4.0
    );
    let label_every = (labels.len() / 10).max(1);
    for (i, &c) in counts.iter().enumerate() {
        let h = c as f64 / max * plot_h;
        let x = margin_left + i as f64 * slot + (slot - bar_w) / 2.0;
        let _ = write!(
            s,
            r##"<rect x="{x:.2}" y="{:.2}" width="{bar_w:.2}" height="{h:.2}" fill="#4878a8"><title>{}: {c}</title></rect>"##,
            base_y - h,
            escape(&labels[i])
        );
        if i % label_every == 0 {
            let _ = write!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                x + bar_w / 2.0,
                base_y + 14.0,
                escape(&labels[i])
            );
        }
    }
    s.push_str("</svg>");
    s
}

/// Bar chart of bin counts, bars labelled by their left edge.
pub fn histogram_svg(h: &Histogram) -> String {
    let labels: Vec<String> = h.bin_edges[..h.counts.len()]
        .iter()
        .map(|&e| fmt_num(e))
        .collect();
    bar_chart(&h.column, &labels, &h.counts, 480, 260)
}

/// Bar chart of per-class counts; `names` maps codes to display names.
pub fn class_distribution_svg(
    title: &str,
    counts: &BTreeMap<u32, usize>,
    names: &BTreeMap<u32, String>,
) -> String {
    let labels: Vec<String> = counts
        .keys()
        .map(|c| names.get(c).cloned().unwrap_or_else(|| c.to_string()))
        .collect();
    let values: Vec<u64> = counts.values().map(|&c| c as u64).collect();
    bar_chart(title, &labels, &values, 480, 260)
}

// Diverging blue (-1) / white (0) / red (+1).
fn heat_color(r: f64) -> String {
    let t = r.clamp(-1.0, 1.0);
    let (rr, gg, bb) = if t >= 0.0 {
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    } else {
        (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", rr.round() as u8, gg.round() as u8, bb.round() as u8)
}

/// Colour-mapped correlation grid with the value printed in each cell.
pub fn heatmap_svg(c: &CorrelationMatrix) -> String {
    let d = c.names.len();
    let cell = 64.0;
    let label_w = 120.0;
    let top = 28.0 + label_w * 0.5;
    let width = label_w + cell * d as f64 + 16.0;
    let height = top + cell * d as f64 + 16.0;
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = write!(
        s,
        r#"<text x="{}" y="16" text-anchor="middle" font-size="13" font-weight="bold">Pearson correlation</text>"#,
        width / 2.0
    );
    for (j, name) in c.names.iter().enumerate() {
        let _ = write!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            label_w + cell * (j as f64 + 0.5),
            top - 6.0,
            escape(name)
        );
        let _ = write!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            label_w - 6.0,
            top + cell * (j as f64 + 0.5) + 4.0,
            escape(name)
        );
    }
    for i in 0..d {
        for j in 0..d {
            let v = c.r[i][j];
            let x = label_w + cell * j as f64;
            let y = top + cell * i as f64;
            let _ = write!(
                s,
                r##"<rect x="{x:.1}" y="{y:.1}" width="{cell}" height="{cell}" fill="{}" stroke="#fff"/>"##,
                heat_color(v)
            );
            let _ = write!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{v:.2}</text>"#,
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            );
        }
    }
    s.push_str("</svg>");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eda::histogram;

    #[test]
    fn histogram_csv_rows() {
        let h = histogram("v", &[0.0, 1.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(histogram_csv(&h), "bin_start,bin_end,count\n0,1.5,2\n1.5,3,2\n");
    }

    #[test]
    fn correlation_csv_has_header_row_and_column() {
        let c = CorrelationMatrix {
            names: vec!["a".into(), "b".into()],
            r: vec![vec![1.0, 0.5], vec![0.5, 1.0]],
            degenerate: vec![],
        };
        assert_eq!(correlation_csv(&c), ",a,b\na,1,0.5\nb,0.5,1\n");
    }

    #[test]
    fn svgs_are_standalone() {
        let h = histogram("p<1>", &[0.0, 1.0, 5.0], 3).unwrap();
        let svg = histogram_svg(&h);
        assert!(svg.starts_with("<svg xmlns"));
        assert!(svg.ends_with("</svg>"));
        assert!(svg.contains("p&lt;1&gt;"));
        assert_eq!(svg.matches("<rect").count(), 3);

        let c = CorrelationMatrix {
            names: vec!["a".into(), "b".into()],
            r: vec![vec![1.0, -0.25], vec![-0.25, 1.0]],
            degenerate: vec![],
        };
        let hm = heatmap_svg(&c);
        assert_eq!(hm.matches("<rect").count(), 4);
        assert!(hm.contains("-0.25"));
    }

    #[test]
    fn colors_span_scale() {
        assert_eq!(heat_color(1.0), "#ff0000");
        assert_eq!(heat_color(0.0), "#ffffff");
        assert_eq!(heat_color(-1.0), "#0000ff");
    }
}
