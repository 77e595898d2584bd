//! Section builders. Everything here reads only from [`MetricsExport`].

use super::svg::{self, escape, Axis, Heatmap, Row};
use super::{
    Block, CardSet, CardsError, Category, Chart, ChartKind, MetricsExport, RenderOptions, Scope,
    Section, SystemPanel,
};
use crate::json::fixed;
use crate::survey::BoxStats;
use crate::taxonomy::{align_models, reference_entry, AlignmentMap, ComponentModel, L1};

const NA: &str = "n/a";

fn median_or_na(stats: &Option<BoxStats>) -> String {
    stats
        .as_ref()
        .map_or_else(|| NA.to_string(), |b| fixed(b.median))
}

fn n_of(stats: &Option<BoxStats>) -> usize {
    stats.as_ref().map_or(0, |b| b.n)
}

/// Renders an HTML summary table. Rows flagged `true` are greyed.
fn table(headers: &[&str], rows: &[(bool, Vec<String>)]) -> String {
    let mut out = String::from("<table class=\"summary\"><thead><tr>");
    for h in headers {
        out.push_str(&format!("<th>{}</th>", escape(h)));
    }
    out.push_str("</tr></thead><tbody>");
    for (greyed, cells) in rows {
        out.push_str(if *greyed {
            "<tr class=\"greyed\">"
        } else {
            "<tr>"
        });
        for c in cells {
            out.push_str(&format!("<td>{}</td>", escape(c)));
        }
        out.push_str("</tr>");
    }
    out.push_str("</tbody></table>");
    out
}

fn summary(title: &str, headers: &[&str], rows: &[(bool, Vec<String>)]) -> Block {
    Block::Chart(Chart::new(
        ChartKind::SummaryTable,
        title,
        table(headers, rows),
    ))
}

fn options_metadata(export: &MetricsExport, opts: &RenderOptions) -> Vec<(String, String)> {
    vec![
        (
            "idle cap (ms)".into(),
            export
                .options
                .idle_cap_ms
                .map_or_else(|| "off".to_string(), |c| c.to_string()),
        ),
        (
            "collapse repeats".into(),
            export.options.collapse_repeats.to_string(),
        ),
        (
            "heatmap scale".into(),
            match opts.heat_scale {
                svg::HeatScale::Linear => "linear".into(),
                svg::HeatScale::Log => "log".into(),
            },
        ),
    ]
}

fn section_metadata(exports: &[&MetricsExport], opts: &RenderOptions) -> Vec<(String, String)> {
    let mut meta: Vec<(String, String)> = exports
        .iter()
        .map(|e| {
            (
                format!("inputs digest ({})", e.system_name),
                e.inputs_digest.clone(),
            )
        })
        .collect();
    meta.extend(options_metadata(exports[0], opts));
    meta
}

// ---------------------------------------------------------------------------
// Within-system sections

fn within_descriptive(e: &MetricsExport) -> Vec<Block> {
    let d = &e.descriptive;
    let overview = summary(
        "Overview",
        &["measure", "n", "median"],
        &[
            (
                false,
                vec!["sessions".into(), d.sessions.len().to_string(), NA.into()],
            ),
            (
                false,
                vec!["users".into(), d.users.len().to_string(), NA.into()],
            ),
            (
                false,
                vec![
                    "users without SUS".into(),
                    d.missing_sus.len().to_string(),
                    NA.into(),
                ],
            ),
            (
                false,
                vec![
                    "completion time (ms)".into(),
                    n_of(&d.completion_ms).to_string(),
                    median_or_na(&d.completion_ms),
                ],
            ),
            (
                false,
                vec![
                    "steps".into(),
                    n_of(&d.steps).to_string(),
                    median_or_na(&d.steps),
                ],
            ),
            (
                false,
                vec![
                    "SUS score".into(),
                    n_of(&d.sus).to_string(),
                    median_or_na(&d.sus),
                ],
            ),
        ],
    );
    let completion: Vec<f64> = d.sessions.iter().map(|s| s.completion_ms as f64).collect();
    let steps: Vec<f64> = d.sessions.iter().map(|s| s.steps as f64).collect();
    let sus: Vec<f64> = d.users.iter().filter_map(|u| u.sus).collect();
    let strip =
        |title: &str, label: &str, axis: Axis, points: Vec<f64>, stats: &Option<BoxStats>| {
            let row = Row {
                points,
                ..Row::new(label, stats.clone())
            };
            Block::Chart(Chart::new(
                ChartKind::StripWithBox,
                title,
                svg::box_chart(title, &axis, &[row]),
            ))
        };
    let max_completion = completion.iter().copied().fold(0.0, f64::max);
    let max_steps = steps.iter().copied().fold(0.0, f64::max);
    let users = summary(
        "Per-user sessions and SUS",
        &["user", "sessions", "SUS score"],
        &d.users
            .iter()
            .map(|u| {
                (
                    u.sus.is_none(),
                    vec![
                        u.user_id.clone(),
                        u.sessions.to_string(),
                        u.sus.map_or(NA.into(), fixed),
                    ],
                )
            })
            .collect::<Vec<_>>(),
    );
    vec![
        overview,
        strip(
            "Task completion time",
            "completion time",
            Axis::covering(max_completion, "completion time (ms)"),
            completion,
            &d.completion_ms,
        ),
        strip(
            "Steps per session",
            "steps",
            Axis::covering(max_steps, "log records per session"),
            steps,
            &d.steps,
        ),
        strip("SUS scores", "SUS", Axis::sus(), sus, &d.sus),
        users,
    ]
}

fn cross_check(no_data: bool, zero_use: bool) -> &'static str {
    match (no_data, zero_use) {
        (true, true) => "no ratings, no use",
        (true, false) => "used, not rated",
        (false, true) => "rated, never used",
        (false, false) => "",
    }
}

fn within_attitudinal(e: &MetricsExport) -> Vec<Block> {
    let a = &e.attitudes;
    let rows = |pick: fn(&super::AttitudeRow) -> &Option<BoxStats>| -> Vec<Row> {
        a.components
            .iter()
            .map(|r| Row {
                greyed: r.no_data,
                ..Row::new(&r.comp_id, pick(r).clone())
            })
            .collect()
    };
    let chart = |title: &str, rows: Vec<Row>| {
        Block::Chart(Chart::new(
            ChartKind::BoxWhisker,
            title,
            svg::box_chart(title, &Axis::likert("rating (1-5)"), &rows),
        ))
    };
    let overview = e
        .components
        .iter()
        .zip(&a.components)
        .zip(&e.effort.components)
        .map(|((c, att), eff)| {
            (
                att.no_data,
                vec![
                    c.label.clone(),
                    c.l2_id.clone(),
                    n_of(&att.efficiency).to_string(),
                    median_or_na(&att.efficiency),
                    median_or_na(&att.effectiveness),
                    eff.sessions_used.to_string(),
                    eff.total_ms.to_string(),
                    cross_check(att.no_data, eff.zero_use).to_string(),
                ],
            )
        })
        .collect::<Vec<_>>();
    vec![
        Block::Note(format!(
            "{} respondents rated at least one component.",
            a.respondents
        )),
        chart(
            "Perceived efficiency per component",
            rows(|r| &r.efficiency),
        ),
        chart(
            "Perceived effectiveness per component",
            rows(|r| &r.effectiveness),
        ),
        summary(
            "Component overview: attitude and usage",
            &[
                "component",
                "functionality",
                "ratings",
                "efficiency median",
                "effectiveness median",
                "sessions used",
                "total time (ms)",
                "cross-check",
            ],
            &overview,
        ),
    ]
}

fn within_effort(e: &MetricsExport) -> Vec<Block> {
    let eff = &e.effort;
    let rows: Vec<Row> = eff
        .components
        .iter()
        .enumerate()
        .map(|(i, c)| Row {
            points: eff.sessions.iter().map(|s| s.shares[i]).collect(),
            greyed: c.zero_use,
            note: c.zero_use.then(|| "zero use".to_string()),
            ..Row::new(&c.comp_id, c.share.clone())
        })
        .collect();
    let series: Vec<String> = e.components.iter().map(|c| c.comp_id.clone()).collect();
    let columns: Vec<(String, Vec<u64>)> = eff
        .users
        .iter()
        .map(|u| (u.user_id.clone(), u.per_component_ms.clone()))
        .collect();
    let table_rows = eff
        .components
        .iter()
        .map(|c| {
            (
                c.zero_use,
                vec![
                    c.comp_id.clone(),
                    c.total_ms.to_string(),
                    c.visit_count.to_string(),
                    c.sessions_used.to_string(),
                    median_or_na(&c.share),
                ],
            )
        })
        .collect::<Vec<_>>();
    let title = "Share of session time per component";
    vec![
        Block::Chart(Chart::new(
            ChartKind::StripWithBox,
            title,
            svg::box_chart(
                title,
                &Axis::unit("share of attributed session time"),
                &rows,
            ),
        )),
        Block::Chart(Chart::new(
            ChartKind::StackedColumns,
            "Time allocation per user",
            svg::stacked_columns(
                "Time allocation per user",
                &series,
                &columns,
                "attributed time (ms)",
            ),
        )),
        summary(
            "Absolute effort per component",
            &[
                "component",
                "total time (ms)",
                "visits",
                "sessions used",
                "median share",
            ],
            &table_rows,
        ),
    ]
}

fn linearity_row(label: &str, l: &crate::metrics::LinearityIndex) -> (bool, Vec<String>) {
    (
        false,
        vec![
            label.to_string(),
            fixed(l.value),
            l.forward_count.to_string(),
            l.backward_count.to_string(),
            l.self_count.to_string(),
        ],
    )
}

const LINEARITY_HEADERS: [&str; 5] = ["scope", "linearity", "forward", "backward", "self"];

fn within_exploration(e: &MetricsExport, opts: &RenderOptions) -> Vec<Block> {
    let x = &e.exploration;
    let heat = |title: &str, m: &crate::metrics::TransitionMatrix| {
        let absent = vec![false; m.order.len()];
        Block::Chart(Chart::new(
            ChartKind::Heatmap,
            title,
            svg::heatmap(&Heatmap {
                title,
                labels: &m.order,
                counts: &m.counts,
                absent: &absent,
                scale: opts.heat_scale,
            }),
        ))
    };
    let points: Vec<f64> = x.sessions.iter().map(|s| s.index.value).collect();
    let strip_title = "Per-session linearity";
    let row = Row {
        points,
        note: Some(format!("n = {}", x.sessions.len())),
        ..Row::new("linearity", None)
    };
    vec![
        heat("Component transitions (from-to)", &x.l3),
        summary(
            "Linearity",
            &LINEARITY_HEADERS,
            &[
                linearity_row("components, all sessions", &x.overall),
                linearity_row("functionalities, all sessions", &x.l2_linearity),
            ],
        ),
        Block::Chart(Chart::new(
            ChartKind::StripWithBox,
            strip_title,
            svg::box_chart(strip_title, &Axis::unit("linearity"), &[row]),
        )),
        heat("Functionality transitions (from-to)", &x.l2),
    ]
}

// ---------------------------------------------------------------------------
// Between-system sections

struct Comparison<'a> {
    exports: Vec<&'a MetricsExport>,
    models: Vec<ComponentModel>,
    alignment: AlignmentMap,
}

impl<'a> Comparison<'a> {
    fn new(mut exports: Vec<&'a MetricsExport>) -> Result<Self, CardsError> {
        if exports.len() < 2 {
            return Err(CardsError::FewerThanTwoSystems(exports.len()));
        }
        exports.sort_by(|a, b| {
            (&a.system_name, &a.inputs_digest).cmp(&(&b.system_name, &b.inputs_digest))
        });
        let models: Vec<ComponentModel> = exports.iter().map(|e| e.model()).collect();
        let alignment = align_models(&models.iter().collect::<Vec<_>>())?;
        Ok(Comparison {
            exports,
            models,
            alignment,
        })
    }
}

fn between_descriptive(c: &Comparison<'_>) -> Vec<Block> {
    let rows_of = |pick: fn(&MetricsExport) -> (Vec<f64>, Option<BoxStats>)| -> Vec<Row> {
        c.exports
            .iter()
            .map(|e| {
                let (points, stats) = pick(e);
                Row {
                    points,
                    ..Row::new(&e.system_name, stats)
                }
            })
            .collect()
    };
    let sus = rows_of(|e| {
        (
            e.descriptive.users.iter().filter_map(|u| u.sus).collect(),
            e.descriptive.sus.clone(),
        )
    });
    let completion = rows_of(|e| {
        (
            e.descriptive
                .sessions
                .iter()
                .map(|s| s.completion_ms as f64)
                .collect(),
            e.descriptive.completion_ms.clone(),
        )
    });
    let steps = rows_of(|e| {
        (
            e.descriptive
                .sessions
                .iter()
                .map(|s| s.steps as f64)
                .collect(),
            e.descriptive.steps.clone(),
        )
    });
    let max = |rows: &[Row]| {
        rows.iter()
            .flat_map(|r| &r.points)
            .copied()
            .fold(0.0, f64::max)
    };
    let chart = |title: &str, axis: Axis, rows: &[Row]| {
        Block::Chart(Chart::new(
            ChartKind::StripWithBox,
            title,
            svg::box_chart(title, &axis, rows),
        ))
    };
    let table_rows = c
        .exports
        .iter()
        .map(|e| {
            let d = &e.descriptive;
            (
                false,
                vec![
                    e.system_name.clone(),
                    d.sessions.len().to_string(),
                    d.users.len().to_string(),
                    median_or_na(&d.completion_ms),
                    median_or_na(&d.steps),
                    median_or_na(&d.sus),
                ],
            )
        })
        .collect::<Vec<_>>();
    vec![
        summary(
            "Systems",
            &[
                "system",
                "sessions",
                "users",
                "median completion (ms)",
                "median steps",
                "median SUS",
            ],
            &table_rows,
        ),
        chart("SUS scores by system", Axis::sus(), &sus),
        chart(
            "Task completion time by system",
            Axis::covering(max(&completion), "completion time (ms)"),
            &completion,
        ),
        chart(
            "Steps per session by system",
            Axis::covering(max(&steps), "log records per session"),
            &steps,
        ),
    ]
}

fn dropped(system: &str) -> SystemPanel {
    SystemPanel {
        system_name: system.to_string(),
        charts: Vec::new(),
        note: Some("dropped by this system".into()),
    }
}

fn unaligned_list(c: &Comparison<'_>) -> Block {
    let mut items = Vec::new();
    for (e, groups) in c.exports.iter().zip(&c.alignment.unaligned) {
        for g in groups {
            items.push(format!(
                "{}: {} ({})",
                e.system_name,
                g.l2_id,
                g.comp_ids.join(", ")
            ));
        }
    }
    if items.is_empty() {
        items.push("none".to_string());
    }
    Block::List {
        title: "Functionalities created outside the reference table".into(),
        items,
    }
}

fn between_attitudinal(c: &Comparison<'_>) -> Vec<Block> {
    let mut blocks: Vec<Block> = c
        .alignment
        .rows
        .iter()
        .map(|row| {
            let systems = c
                .exports
                .iter()
                .zip(&row.members)
                .map(|(e, members)| {
                    let l2 = e.attitudes.l2.iter().find(|a| a.l2_id == row.l2_id);
                    match l2 {
                        Some(a) if !members.is_empty() => {
                            let rows = [
                                Row {
                                    greyed: a.no_data,
                                    ..Row::new("efficiency", a.efficiency.clone())
                                },
                                Row {
                                    greyed: a.no_data,
                                    ..Row::new("effectiveness", a.effectiveness.clone())
                                },
                            ];
                            let title = format!("{}: {}", e.system_name, row.l2_id);
                            SystemPanel {
                                system_name: e.system_name.clone(),
                                charts: vec![Chart::new(
                                    ChartKind::BoxWhisker,
                                    title.clone(),
                                    svg::box_chart(&title, &Axis::likert("rating (1-5)"), &rows),
                                )],
                                note: Some(format!(
                                    "{} component(s): {}",
                                    members.len(),
                                    members.join(", ")
                                )),
                            }
                        }
                        _ => dropped(&e.system_name),
                    }
                })
                .collect();
            Block::L2Panel {
                l2_id: row.l2_id.clone(),
                name: row.name.clone(),
                systems,
            }
        })
        .collect();
    blocks.push(unaligned_list(c));
    blocks
}

fn between_effort(c: &Comparison<'_>) -> Vec<Block> {
    let mut blocks: Vec<Block> = c
        .alignment
        .rows
        .iter()
        .map(|row| {
            let systems = c
                .exports
                .iter()
                .zip(&c.models)
                .map(
                    |(e, model)| match e.effort.l2.iter().find(|l| l.l2_id == row.l2_id) {
                        Some(l2) => {
                            let members: Vec<usize> = (0..model.len())
                                .filter(|&i| model.components[i].l2_id == row.l2_id)
                                .collect();
                            let points = e
                                .effort
                                .sessions
                                .iter()
                                .map(|s| members.iter().map(|&i| s.shares[i]).sum())
                                .collect();
                            let title = format!("{}: {}", e.system_name, row.l2_id);
                            let r = Row {
                                points,
                                ..Row::new("share", l2.share.clone())
                            };
                            SystemPanel {
                                system_name: e.system_name.clone(),
                                charts: vec![Chart::new(
                                    ChartKind::StripWithBox,
                                    title.clone(),
                                    svg::box_chart(
                                        &title,
                                        &Axis::unit("share of attributed session time"),
                                        &[r],
                                    ),
                                )],
                                note: Some(format!(
                                    "{} ms in total, {} of all attributed time",
                                    l2.total_ms,
                                    fixed(l2.share_of_total)
                                )),
                            }
                        }
                        None => dropped(&e.system_name),
                    },
                )
                .collect();
            Block::L2Panel {
                l2_id: row.l2_id.clone(),
                name: row.name.clone(),
                systems,
            }
        })
        .collect();
    let mut headers = vec!["functionality"];
    headers.extend(c.exports.iter().map(|e| e.system_name.as_str()));
    let rows = c
        .alignment
        .rows
        .iter()
        .map(|row| {
            let mut cells = vec![row.l2_id.clone()];
            cells.extend(c.exports.iter().map(|e| {
                e.effort
                    .l2
                    .iter()
                    .find(|l| l.l2_id == row.l2_id)
                    .map_or(NA.into(), |l| fixed(l.share_of_total))
            }));
            (false, cells)
        })
        .collect::<Vec<_>>();
    blocks.push(summary(
        "Share of all attributed time per functionality",
        &headers,
        &rows,
    ));
    blocks.push(unaligned_list(c));
    blocks
}

fn between_exploration(c: &Comparison<'_>, opts: &RenderOptions) -> Vec<Block> {
    let heatmaps = c
        .exports
        .iter()
        .zip(&c.models)
        .map(|(e, model)| {
            let m = &e.exploration.l2;
            // Shared reference rows per goal, then this system's own creations
            // for that goal, so forward moves stay above the diagonal.
            let labels: Vec<String> = L1::ALL
                .iter()
                .flat_map(|&l1| {
                    let shared = c
                        .alignment
                        .rows
                        .iter()
                        .filter(move |r| r.l1_id == l1)
                        .map(|r| r.l2_id.clone());
                    let created = m
                        .order
                        .iter()
                        .filter(move |l| {
                            reference_entry(l).is_none() && model.l1_of_l2(l) == Some(l1)
                        })
                        .cloned();
                    shared.chain(created)
                })
                .collect();
            let absent: Vec<bool> = labels.iter().map(|l| !m.order.contains(l)).collect();
            let counts: Vec<Vec<u64>> = labels
                .iter()
                .map(|a| labels.iter().map(|b| m.get(a, b).unwrap_or(0)).collect())
                .collect();
            let title = format!("{}: functionality transitions", e.system_name);
            let body = svg::heatmap(&Heatmap {
                title: &title,
                labels: &labels,
                counts: &counts,
                absent: &absent,
                scale: opts.heat_scale,
            });
            (
                e.system_name.clone(),
                Chart::new(ChartKind::Heatmap, title, body),
            )
        })
        .collect();
    let rows = c
        .exports
        .iter()
        .flat_map(|e| {
            [
                linearity_row(
                    &format!("{} components", e.system_name),
                    &e.exploration.overall,
                ),
                linearity_row(
                    &format!("{} functionalities", e.system_name),
                    &e.exploration.l2_linearity,
                ),
            ]
        })
        .collect::<Vec<_>>();
    vec![
        Block::Note("Axes follow the reference order with each system's created functionalities placed after their goal; grey rows and columns are absent from that system.".into()),
        Block::Triptych(heatmaps),
        summary("Linearity by system", &LINEARITY_HEADERS, &rows),
    ]
}

// ---------------------------------------------------------------------------
// Assembly

fn between_blocks(category: Category, c: &Comparison<'_>, opts: &RenderOptions) -> Vec<Block> {
    match category {
        Category::Descriptive => between_descriptive(c),
        Category::Attitudinal => between_attitudinal(c),
        Category::Effort => between_effort(c),
        Category::ExplorationPattern => between_exploration(c, opts),
    }
}

fn section_title(category: Category, scope: Scope) -> String {
    format!("{} ({})", category.title(), scope.title())
}

/// Builds the eight-section card for `export`. Between sections compare it
/// with `peers` and are marked unavailable when there are none.
pub fn build_within(
    export: &MetricsExport,
    peers: &[MetricsExport],
    opts: &RenderOptions,
) -> Result<CardSet, CardsError> {
    let comparison = if peers.is_empty() {
        None
    } else {
        let mut all = vec![export];
        all.extend(peers);
        Some(Comparison::new(all)?)
    };
    let sections = opts.exec.map_range(8, |i| {
        let category = Category::ALL[i / 2];
        let scope = if i % 2 == 0 {
            Scope::Within
        } else {
            Scope::Between
        };
        let title = section_title(category, scope);
        match (scope, &comparison) {
            (Scope::Within, _) => Section {
                category,
                scope,
                title,
                available: true,
                metadata: section_metadata(&[export], opts),
                blocks: match category {
                    Category::Descriptive => within_descriptive(export),
                    Category::Attitudinal => within_attitudinal(export),
                    Category::Effort => within_effort(export),
                    Category::ExplorationPattern => within_exploration(export, opts),
                },
            },
            (Scope::Between, Some(c)) => Section {
                category,
                scope,
                title,
                available: true,
                metadata: section_metadata(&c.exports, opts),
                blocks: between_blocks(category, c, opts),
            },
            (Scope::Between, None) => Section {
                category,
                scope,
                title,
                available: false,
                metadata: Vec::new(),
                blocks: vec![Block::Note(
                    "unavailable: no other system's data was supplied".into(),
                )],
            },
        }
    });
    Ok(CardSet {
        system_name: export.system_name.clone(),
        title: format!("Evaluation card: {}", export.system_name),
        metadata: vec![
            ("system".into(), export.system_name.clone()),
            ("model digest".into(), export.model_digest.clone()),
            ("inputs digest".into(), export.inputs_digest.clone()),
            ("components".into(), export.components.len().to_string()),
        ],
        sections,
    })
}

/// Builds the comparison report: the four between-system sections across
/// all `exports`, ordered by system name.
pub fn build_between(
    exports: &[MetricsExport],
    opts: &RenderOptions,
) -> Result<CardSet, CardsError> {
    let c = Comparison::new(exports.iter().collect())?;
    let sections = opts.exec.map_range(4, |i| {
        let category = Category::ALL[i];
        Section {
            category,
            scope: Scope::Between,
            title: section_title(category, Scope::Between),
            available: true,
            metadata: section_metadata(&c.exports, opts),
            blocks: between_blocks(category, &c, opts),
        }
    });
    let names: Vec<&str> = c.exports.iter().map(|e| e.system_name.as_str()).collect();
    Ok(CardSet {
        system_name: names.join(", "),
        title: format!("System comparison: {}", names.join(", ")),
        metadata: vec![
            ("systems".into(), names.join(", ")),
            (
                "shared functionalities".into(),
                c.alignment.rows.len().to_string(),
            ),
        ],
        sections,
    })
}

pub fn render_within(
    export: &MetricsExport,
    peers: &[MetricsExport],
    opts: &RenderOptions,
) -> Result<String, CardsError> {
    Ok(build_within(export, peers, opts)?.to_html())
}

pub fn render_between(
    exports: &[MetricsExport],
    opts: &RenderOptions,
) -> Result<String, CardsError> {
    Ok(build_between(exports, opts)?.to_html())
}
