//! Evaluation cards: the metrics export and the static reports drawn from it.
//!
//! A within-system card has eight sections, four categories in a within and
//! a between scope. Between sections need peer systems and are marked
//! unavailable otherwise. A comparison report holds the four between
//! sections for two or more systems. Both are pure functions of
//! [`MetricsExport`] documents and render to a single HTML file with inline
//! SVG and no scripts.

mod export;
mod render;
pub mod svg;

use std::fmt::Write;

use thiserror::Error;

pub use export::{
    analyze, export_metrics, q4, AttitudeRow, AttitudeSection, DescriptiveSection, EffortRow,
    EffortSection, ExplorationSection, L2AttitudeRow, L2EffortRow, MetricsExport, PayloadRow,
    SessionEffortRow, UserEffortRow, SCHEMA_ID,
};
pub use render::{build_between, build_within, render_between, render_within};
pub use svg::HeatScale;

use crate::exec::Execution;
use crate::metrics::MetricsError;
use crate::survey::SurveyError;
use crate::taxonomy::TaxonomyError;
use svg::escape;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CardsError {
    #[error("inputs come from different component models: {0}")]
    ModelMismatch(String),
    #[error("invalid metrics export: {0}")]
    Schema(String),
    #[error("a comparison needs at least two systems, got {0}")]
    FewerThanTwoSystems(usize),
    #[error(transparent)]
    Alignment(#[from] TaxonomyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Survey(#[from] SurveyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    Descriptive,
    Attitudinal,
    Effort,
    ExplorationPattern,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Descriptive,
        Category::Attitudinal,
        Category::Effort,
        Category::ExplorationPattern,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Descriptive => "descriptive",
            Category::Attitudinal => "attitudinal",
            Category::Effort => "effort",
            Category::ExplorationPattern => "exploration_pattern",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Category::Descriptive => "Descriptive results",
            Category::Attitudinal => "Attitudinal",
            Category::Effort => "Behavioral: user effort",
            Category::ExplorationPattern => "Behavioral: exploration pattern",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scope {
    Within,
    Between,
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Within => "within",
            Scope::Between => "between",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Scope::Within => "within-system",
            Scope::Between => "between-system",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChartKind {
    BoxWhisker,
    StripWithBox,
    Heatmap,
    SummaryTable,
    StackedColumns,
}

impl ChartKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChartKind::BoxWhisker => "box_whisker",
            ChartKind::StripWithBox => "strip_with_box",
            ChartKind::Heatmap => "heatmap",
            ChartKind::SummaryTable => "summary_table",
            ChartKind::StackedColumns => "stacked_columns",
        }
    }
}

/// A rendered chart: an inline `<svg>` or, for summary tables, a `<table>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub kind: ChartKind,
    pub title: String,
    pub body: String,
}

impl Chart {
    pub fn new(kind: ChartKind, title: impl Into<String>, body: String) -> Self {
        Chart {
            kind,
            title: title.into(),
            body,
        }
    }

    fn write_html(&self, out: &mut String) {
        let _ = write!(
            out,
            "<figure class=\"chart\" data-kind=\"{}\"><figcaption>{}</figcaption>\n{}\n</figure>\n",
            self.kind.as_str(),
            escape(&self.title),
            self.body
        );
    }
}

/// One system's contribution to a per-functionality panel.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemPanel {
    pub system_name: String,
    /// Empty when the system dropped the functionality.
    pub charts: Vec<Chart>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    Chart(Chart),
    Note(String),
    /// Side-by-side system panels for one reference functionality.
    L2Panel {
        l2_id: String,
        name: String,
        systems: Vec<SystemPanel>,
    },
    /// Charts laid out side by side, one per system.
    Triptych(Vec<(String, Chart)>),
    List {
        title: String,
        items: Vec<String>,
    },
}

impl Block {
    fn write_html(&self, out: &mut String) {
        match self {
            Block::Chart(c) => c.write_html(out),
            Block::Note(text) => {
                let _ = writeln!(out, "<p class=\"note\">{}</p>", escape(text));
            }
            Block::L2Panel {
                l2_id,
                name,
                systems,
            } => {
                let _ = writeln!(
                    out,
                    "<div class=\"l2-panel\" data-l2=\"{}\"><h3>{}</h3><div class=\"side-by-side\">",
                    escape(l2_id),
                    escape(name)
                );
                for p in systems {
                    let _ = writeln!(
                        out,
                        "<div class=\"system-panel\" data-system=\"{}\"><h4>{}</h4>",
                        escape(&p.system_name),
                        escape(&p.system_name)
                    );
                    if let Some(note) = &p.note {
                        let _ = writeln!(out, "<p class=\"note\">{}</p>", escape(note));
                    }
                    for c in &p.charts {
                        c.write_html(out);
                    }
                    out.push_str("</div>\n");
                }
                out.push_str("</div></div>\n");
            }
            Block::Triptych(charts) => {
                out.push_str("<div class=\"triptych side-by-side\">\n");
                for (system, c) in charts {
                    let _ = writeln!(
                        out,
                        "<div class=\"system-panel\" data-system=\"{}\">",
                        escape(system)
                    );
                    c.write_html(out);
                    out.push_str("</div>\n");
                }
                out.push_str("</div>\n");
            }
            Block::List { title, items } => {
                let _ = writeln!(out, "<div class=\"list\"><h3>{}</h3><ul>", escape(title));
                for item in items {
                    let _ = writeln!(out, "<li>{}</li>", escape(item));
                }
                out.push_str("</ul></div>\n");
            }
        }
    }

    /// Charts contained in this block, in document order.
    pub fn charts(&self) -> Vec<&Chart> {
        match self {
            Block::Chart(c) => vec![c],
            Block::L2Panel { systems, .. } => systems.iter().flat_map(|p| &p.charts).collect(),
            Block::Triptych(charts) => charts.iter().map(|(_, c)| c).collect(),
            Block::Note(_) | Block::List { .. } => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub category: Category,
    pub scope: Scope,
    pub title: String,
    pub available: bool,
    /// Key/value pairs shown under the heading (inputs digest, options).
    pub metadata: Vec<(String, String)>,
    pub blocks: Vec<Block>,
}

impl Section {
    pub fn charts(&self) -> Vec<&Chart> {
        self.blocks.iter().flat_map(Block::charts).collect()
    }

    fn write_html(&self, out: &mut String) {
        let _ = writeln!(
            out,
            "<section class=\"card{}\" data-category=\"{}\" data-scope=\"{}\">\n<h2>{}</h2>",
            if self.available { "" } else { " unavailable" },
            self.category.as_str(),
            self.scope.as_str(),
            escape(&self.title)
        );
        write_metadata(out, &self.metadata);
        for b in &self.blocks {
            b.write_html(out);
        }
        out.push_str("</section>\n");
    }
}

fn write_metadata(out: &mut String, metadata: &[(String, String)]) {
    if metadata.is_empty() {
        return;
    }
    out.push_str("<dl class=\"meta\">");
    for (k, v) in metadata {
        let _ = write!(out, "<dt>{}</dt><dd>{}</dd>", escape(k), escape(v));
    }
    out.push_str("</dl>\n");
}

/// A rendered report.
#[derive(Debug, Clone, PartialEq)]
pub struct CardSet {
    /// The system for a within-system card, or the joined system names for a
    /// comparison.
    pub system_name: String,
    pub title: String,
    pub metadata: Vec<(String, String)>,
    pub sections: Vec<Section>,
}

const STYLE: &str = "body{font-family:Helvetica,Arial,sans-serif;color:#222;margin:24px;max-width:1400px}\
h1{font-size:22px}h2{font-size:18px;border-bottom:1px solid #ccc;padding-bottom:4px}h3{font-size:15px}h4{font-size:13px;margin:4px 0}\
section.card{margin-bottom:32px}section.unavailable{color:#888}\
dl.meta{font-size:11px;color:#555;display:grid;grid-template-columns:max-content auto;gap:2px 10px}dl.meta dd{margin:0;font-family:monospace}\
figure.chart{margin:8px 0}figcaption{font-size:13px;font-weight:bold;margin-bottom:4px}\
.side-by-side{display:flex;flex-wrap:wrap;gap:16px;align-items:flex-start}\
table.summary{border-collapse:collapse;font-size:12px}table.summary th,table.summary td{border:1px solid #ddd;padding:3px 8px;text-align:right}\
table.summary th:first-child,table.summary td:first-child{text-align:left}tr.greyed td{color:#999}\
svg text{font-size:11px}svg .row.greyed text{fill:#999}svg .stat{fill:#555}p.note{font-size:12px;color:#666}";

impl CardSet {
    pub fn section(&self, category: Category, scope: Scope) -> Option<&Section> {
        self.sections
            .iter()
            .find(|s| s.category == category && s.scope == scope)
    }

    pub fn to_html(&self) -> String {
        let mut out = String::new();
        let _ = write!(
            out,
            "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n<style>{STYLE}</style>\n</head>\n<body>\n<header><h1>{}</h1>\n",
            escape(&self.title),
            escape(&self.title)
        );
        write_metadata(&mut out, &self.metadata);
        out.push_str("</header>\n");
        for s in &self.sections {
            s.write_html(&mut out);
        }
        out.push_str("</body>\n</html>\n");
        out
    }
}

/// Rendering switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RenderOptions {
    pub heat_scale: HeatScale,
    /// Sections are independent and may be built concurrently.
    pub exec: Execution,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::MetricOptions;
    use crate::synth::{generate_bundle, Archetype, SynthProfile};
    use crate::taxonomy::{parse_config, ComponentModel};

    fn model() -> ComponentModel {
        parse_config(include_str!("../../../../fixtures/taxonomy/visus.toml")).unwrap()
    }

    fn export(users: u32, seed: u64) -> MetricsExport {
        let profile = SynthProfile {
            archetype: Archetype::Nonlinear,
            n_users: users,
            tasks: vec!["a".into(), "b".into()],
            dwell_ms: (1_000, 90_000),
            iteration_pair: None,
            seed,
        };
        let out = generate_bundle(&model(), &profile).unwrap();
        analyze(
            &out.bundle,
            &out.survey,
            &MetricOptions::default(),
            Execution::Sequential,
        )
        .unwrap()
    }

    #[test]
    fn export_round_trips_exactly() {
        let e = export(5, 3);
        let text = e.to_canonical_json();
        let back = MetricsExport::from_json(&text).unwrap();
        assert_eq!(back, e);
        assert_eq!(back.to_canonical_json(), text);
    }

    #[test]
    fn tampered_export_is_rejected() {
        let text = export(3, 1)
            .to_canonical_json()
            .replacen("\"steps\": ", "\"steps\": 1", 1);
        assert!(matches!(
            MetricsExport::from_json(&text),
            Err(CardsError::Schema(_))
        ));
    }

    #[test]
    fn within_card_has_eight_sections_and_unavailable_between() {
        let card = build_within(&export(1, 9), &[], &RenderOptions::default()).unwrap();
        assert_eq!(card.sections.len(), 8);
        for s in &card.sections {
            assert_eq!(s.available, s.scope == Scope::Within);
        }
        let html = card.to_html();
        assert_eq!(html.matches("<section class=\"card").count(), 8);
        assert!(html.contains("n = 1"));
        assert!(!html.contains("<script"));
    }

    #[test]
    fn comparison_needs_two_systems() {
        let e = export(2, 4);
        assert_eq!(
            build_between(std::slice::from_ref(&e), &RenderOptions::default()),
            Err(CardsError::FewerThanTwoSystems(1))
        );
        let card = build_between(&[e.clone(), e], &RenderOptions::default()).unwrap();
        assert_eq!(card.sections.len(), 4);
    }

    #[test]
    fn sequential_and_parallel_render_alike() {
        let e = export(4, 11);
        let seq = RenderOptions {
            exec: Execution::Sequential,
            ..Default::default()
        };
        let par = RenderOptions {
            exec: Execution::Parallel,
            ..Default::default()
        };
        assert_eq!(
            render_within(&e, &[], &seq).unwrap(),
            render_within(&e, &[], &par).unwrap()
        );
    }
}
