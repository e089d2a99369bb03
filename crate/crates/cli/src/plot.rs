//! Standalone SVG charts from sweep records: metric versus node count, one
//! polyline per protocol, mean over seeds.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use gstr_core::metrics::RunRecord;

/// Plottable metric of a [`RunRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    DeliveryRatio,
    AvgHops,
    AvgE2eDelay,
}

impl Metric {
    pub const VALID: &'static str = "delivery_ratio, avg_hops, avg_e2e_delay";

    fn value(self, r: &RunRecord) -> f64 {
        match self {
            Metric::DeliveryRatio => r.delivery_ratio,
            Metric::AvgHops => r.avg_hops,
            Metric::AvgE2eDelay => r.avg_e2e_delay_s,
        }
    }

    fn axis_label(self) -> &'static str {
        match self {
            Metric::DeliveryRatio => "delivery ratio",
            Metric::AvgHops => "average hops",
            Metric::AvgE2eDelay => "average end-to-end delay (s)",
        }
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Metric, String> {
        match s {
            "delivery_ratio" => Ok(Metric::DeliveryRatio),
            "avg_hops" => Ok(Metric::AvgHops),
            "avg_e2e_delay" | "avg_e2e_delay_s" => Ok(Metric::AvgE2eDelay),
            other => Err(format!(
                "unknown metric `{other}` (valid metrics: {})",
                Metric::VALID
            )),
        }
    }
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 60.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// Render the selected case's records as an SVG chart: x is the node count,
/// y the metric mean over seeds, one line per protocol.
pub fn render_plot(records: &[RunRecord], metric: Metric, case: &str) -> Result<String, String> {
    let selected: Vec<&RunRecord> = records.iter().filter(|r| r.case == case).collect();
    if selected.is_empty() {
        let cases: std::collections::BTreeSet<&str> =
            records.iter().map(|r| r.case.as_str()).collect();
        return Err(format!(
            "no records for case `{case}` (cases present: {})",
            cases.into_iter().collect::<Vec<_>>().join(", ")
        ));
    }

    // protocol -> num_nodes -> mean metric over seeds.
    let mut series: BTreeMap<&str, BTreeMap<u32, (f64, u32)>> = BTreeMap::new();
    for r in &selected {
        let slot = series
            .entry(r.protocol.as_str())
            .or_default()
            .entry(r.num_nodes)
            .or_insert((0.0, 0));
        slot.0 += metric.value(r);
        slot.1 += 1;
    }

    let xs: Vec<u32> = selected.iter().map(|r| r.num_nodes).collect();
    let x_min = *xs.iter().min().unwrap() as f64;
    let x_max = *xs.iter().max().unwrap() as f64;
    let mut y_max = f64::MIN;
    for per_n in series.values() {
        for &(sum, count) in per_n.values() {
            y_max = y_max.max(sum / count as f64);
        }
    }
    let y_max = if y_max <= 0.0 { 1.0 } else { y_max * 1.1 };
    let x_span = if x_max > x_min { x_max - x_min } else { 1.0 };

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x_of = |n: f64| MARGIN_LEFT + (n - x_min) / x_span * plot_w;
    let y_of = |v: f64| MARGIN_TOP + (1.0 - v / y_max) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    // Axes.
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN_LEFT}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
        MARGIN_TOP + plot_h,
        MARGIN_LEFT + plot_w,
        MARGIN_TOP + plot_h
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{:.2}" stroke="black"/>"#,
        MARGIN_TOP + plot_h
    );
    // Y ticks and grid.
    for i in 0..=5 {
        let v = y_max * i as f64 / 5.0;
        let y = y_of(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            MARGIN_LEFT,
            MARGIN_LEFT + plot_w
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{v:.3}</text>"#,
            MARGIN_LEFT - 6.0,
            y + 4.0
        );
    }
    // X ticks: the distinct densities.
    let mut densities: Vec<u32> = xs.clone();
    densities.sort_unstable();
    densities.dedup();
    for &n in &densities {
        let x = x_of(n as f64);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            MARGIN_TOP + plot_h,
            MARGIN_TOP + plot_h + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" font-size="12" text-anchor="middle">{n}</text>"#,
            MARGIN_TOP + plot_h + 20.0
        );
    }
    // Axis labels.
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">number of nodes</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" font-size="14" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        metric.axis_label()
    );
    // Series.
    for (idx, (protocol, per_n)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let points: Vec<(f64, f64)> = per_n
            .iter()
            .map(|(&n, &(sum, count))| (x_of(n as f64), y_of(sum / count as f64)))
            .collect();
        if points.len() > 1 {
            let path: Vec<String> = points
                .iter()
                .map(|&(x, y)| format!("{x:.2},{y:.2}"))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                path.join(" ")
            );
        }
        for &(x, y) in &points {
            let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{color}"/>"#);
        }
        // Legend entry.
        let ly = MARGIN_TOP + 20.0 * idx as f64 + 10.0;
        let lx = WIDTH - MARGIN_RIGHT + 20.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 24.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="13">{protocol}</text>"#,
            lx + 30.0,
            ly + 4.0
        );
    }
    let _ = writeln!(svg, "</svg>");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(protocol: &str, n: u32, seed: u64, ratio: f64) -> RunRecord {
        RunRecord {
            protocol: protocol.into(),
            num_nodes: n,
            case: "multi_connected".into(),
            seed,
            delivery_ratio: ratio,
            avg_hops: 1.0,
            avg_e2e_delay_s: 0.5,
            messages_sent: 10,
            messages_delivered: (10.0 * ratio) as u64,
            messages_expired: 0,
        }
    }

    #[test]
    fn renders_polyline_per_protocol() {
        let mut records = Vec::new();
        for protocol in ["gstr", "gpsr", "tgpsr", "gtlr"] {
            for n in [40, 80, 120, 160, 200] {
                records.push(record(protocol, n, 1, 0.9));
            }
        }
        let svg = render_plot(&records, Metric::DeliveryRatio, "multi_connected").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert_eq!(svg.matches("<circle").count(), 20);
        assert!(svg.contains("number of nodes"));
        assert!(svg.contains("delivery ratio"));
        assert!(svg.contains("gstr"));
    }

    #[test]
    fn single_point_renders_marker_only() {
        let records = vec![record("gstr", 40, 1, 0.8)];
        let svg = render_plot(&records, Metric::AvgHops, "multi_connected").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 0);
        assert_eq!(svg.matches("<circle").count(), 1);
    }

    #[test]
    fn empty_selection_is_an_error() {
        let records = vec![record("gstr", 40, 1, 0.8)];
        let err = render_plot(&records, Metric::AvgHops, "free").unwrap_err();
        assert!(err.contains("free"));
        assert!(err.contains("multi_connected"));
    }

    #[test]
    fn metric_parsing_lists_valid_names() {
        let err = "delivey".parse::<Metric>().unwrap_err();
        assert!(err.contains("delivery_ratio"));
        assert!(err.contains("avg_hops"));
        assert_eq!("avg_e2e_delay".parse::<Metric>(), Ok(Metric::AvgE2eDelay));
    }

    #[test]
    fn means_are_taken_over_seeds() {
        let records = vec![
            record("gstr", 40, 1, 0.8),
            record("gstr", 40, 2, 1.0),
        ];
        let svg = render_plot(&records, Metric::DeliveryRatio, "multi_connected").unwrap();
        // One marker at the mean, not two.
        assert_eq!(svg.matches("<circle").count(), 1);
    }
}
