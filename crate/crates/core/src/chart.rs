//! Standalone SVG bar chart of an audit report.
//!
//! One bar per condition (mean accuracy) with a short tick per seed, and a
//! dashed horizontal line at chance. Bars are the only `<rect>` elements and the
//! chance line is the only dashed stroke, which keeps the output easy to check.

use std::fmt::Write as _;

use crate::audit::{AuditReport, ConditionStatus};

pub const PLOT_HEIGHT: f64 = 240.0;
pub const BAR_WIDTH: f64 = 28.0;
const GROUP_WIDTH: f64 = 48.0;
const LEFT: f64 = 64.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 130.0;
const RIGHT: f64 = 24.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Render the chart; identical reports give identical bytes.
pub fn render_chart(report: &AuditReport) -> String {
    let n = report.conditions.len().max(1);
    let plot_w = GROUP_WIDTH * n as f64;
    let width = LEFT + plot_w + RIGHT;
    let height = TOP + PLOT_HEIGHT + BOTTOM;
    let base = TOP + PLOT_HEIGHT;
    let y_of = |acc: f64| base - acc.clamp(0.0, 1.0) * PLOT_HEIGHT;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="13">{}: bias {}, profile {}</text>"#,
        width / 2.0,
        escape(&report.dataset),
        report.bias_verdict.name(),
        report.profile_verdict.name()
    );

    let _ = writeln!(s, r#"<g class="axes" stroke="black" stroke-width="1">"#);
    let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{base}"/>"#);
    let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{base}" x2="{:.1}" y2="{base}"/>"#, LEFT + plot_w);
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(s, r#"<line x1="{:.1}" y1="{y:.1}" x2="{LEFT}" y2="{y:.1}"/>"#, LEFT - 4.0);
    }
    let _ = writeln!(s, "</g>");
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"#,
            LEFT - 7.0,
            y_of(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">accuracy</text>"#,
        TOP + PLOT_HEIGHT / 2.0,
        TOP + PLOT_HEIGHT / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">condition</text>"#,
        LEFT + plot_w / 2.0,
        height - 8.0
    );

    for (i, c) in report.conditions.iter().enumerate() {
        let x = LEFT + GROUP_WIDTH * i as f64 + (GROUP_WIDTH - BAR_WIDTH) / 2.0;
        let acc = if c.status == ConditionStatus::Ok { c.mean_accuracy } else { 0.0 };
        let fill = match (c.status, c.flagged) {
            (ConditionStatus::Failed, _) => "#bbbbbb",
            (_, true) => "#d95f02",
            _ => "#1b9e77",
        };
        let _ = writeln!(s, r#"<g class="condition">"#);
        let _ = writeln!(
            s,
            r#"<rect x="{x:.1}" y="{:.1}" width="{BAR_WIDTH}" height="{:.1}" fill="{fill}"><title>{}: {:.4}</title></rect>"#,
            y_of(acc),
            acc.clamp(0.0, 1.0) * PLOT_HEIGHT,
            escape(&c.name),
            acc
        );
        for seed in &c.seeds {
            let y = y_of(seed.accuracy);
            let _ = writeln!(
                s,
                r#"<line class="seed" x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="black" stroke-width="2"/>"#,
                x + 4.0,
                x + BAR_WIDTH - 4.0
            );
        }
        let lx = x + BAR_WIDTH / 2.0;
        let ly = base + 12.0;
        let _ = writeln!(
            s,
            r#"<text x="{lx:.1}" y="{ly:.1}" text-anchor="end" transform="rotate(-45 {lx:.1} {ly:.1})">{}</text>"#,
            escape(&c.name)
        );
        let _ = writeln!(s, "</g>");
    }

    if let Some(chance) = report.conditions.first().map(|c| c.chance) {
        let y = y_of(chance);
        let _ = writeln!(
            s,
            r##"<line class="chance" x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#444444" stroke-width="1.5" stroke-dasharray="6 4"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.1}" y="{:.1}" text-anchor="end" fill="#444444">chance {chance:.3}</text>"##,
            LEFT + plot_w,
            y - 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit::{
        AuditConfig, BiasVerdict, Condition, ConditionResult, ProfileVerdict, Provenance, SeedResult,
    };
    use crate::nn::ArchSpec;

    fn report(accs: &[f64]) -> AuditReport {
        let seeds = accs.iter().enumerate().map(|(i, &a)| SeedResult::new(i as u64, (a * 50.0) as usize, 50, 0.25, 0.01, 2.0)).collect();
        let raw = ConditionResult::summarize(&Condition::named("raw").unwrap(), 0.25, seeds, vec![]);
        AuditReport {
            dataset: "d<1>".into(),
            config: AuditConfig::with_conditions(&["raw"]).unwrap(),
            conditions: vec![raw],
            bias_verdict: BiasVerdict::NoneDetected,
            profile_verdict: ProfileVerdict::Inconclusive,
            version: "0".into(),
            provenance: Provenance {
                toolkit: "t".into(),
                version: "0".into(),
                num_classes: 4,
                class_names: vec![],
                split_counts: [0, 0, 50],
                arch: ArchSpec::mini_vgg(4, 64),
            },
        }
    }

    #[test]
    fn one_condition_structure() {
        let svg = render_chart(&report(&[0.5, 0.6]));
        assert_eq!(svg.matches("<rect").count(), 1);
        assert_eq!(svg.matches("stroke-dasharray").count(), 1);
        assert_eq!(svg.matches(r#"class="seed""#).count(), 2);
        assert!(svg.contains("d&lt;1&gt;"));
        assert!(!svg.contains("href"));
    }

    #[test]
    fn full_accuracy_fills_plot_height() {
        let svg = render_chart(&report(&[1.0]));
        assert!(svg.contains(&format!(r#"height="{PLOT_HEIGHT:.1}""#)), "{svg}");
        assert!(svg.contains(&format!(r#"y="{TOP:.1}""#)));
    }

    #[test]
    fn deterministic_bytes() {
        assert_eq!(render_chart(&report(&[0.3, 0.7])), render_chart(&report(&[0.3, 0.7])));
    }
}
