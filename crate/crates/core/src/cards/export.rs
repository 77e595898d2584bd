//! The canonical metrics export.
//!
//! Every number a chart shows is stored here, and charts are rendered from
//! this document alone. Floating-point values are rounded to four decimals
//! when the export is built, so an export read back from disk is equal to
//! the one that was written.

use serde::{Deserialize, Serialize};

use super::CardsError;
use crate::exec::Execution;
use crate::json;
use crate::metrics::{
    compute_metrics, descriptive, DescriptiveStats, LinearityIndex, MetricOptions, MetricSet,
    SessionDescriptive, SessionLinearity, TransitionMatrix, UserDescriptive,
};
use crate::survey::{sus_scores, Attitudes, BoxStats, SurveyBundle};
use crate::taxonomy::{Component, ComponentModel, L1};
use crate::telemetry::{format_timestamp, SessionBundle};

/// Identifier of the export layout; bumped on any incompatible change.
pub const SCHEMA_ID: &str = "evalcards.metrics/v1";

/// Rounds to the four decimals the canonical writer emits.
pub fn q4(v: f64) -> f64 {
    (v * 10_000.0).round() / 10_000.0
}

fn q4_box(b: &BoxStats) -> BoxStats {
    BoxStats {
        n: b.n,
        min: q4(b.min),
        lower_hinge: q4(b.lower_hinge),
        median: q4(b.median),
        upper_hinge: q4(b.upper_hinge),
        max: q4(b.max),
        whisker_low: q4(b.whisker_low),
        whisker_high: q4(b.whisker_high),
        outliers: b.outliers.iter().map(|&v| q4(v)).collect(),
    }
}

fn boxed(values: &[f64]) -> Option<BoxStats> {
    BoxStats::from_values(values).as_ref().map(q4_box)
}

fn q4_linearity(l: &LinearityIndex) -> LinearityIndex {
    LinearityIndex {
        value: q4(l.value),
        ..*l
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsExport {
    pub schema: String,
    pub system_name: String,
    pub model_digest: String,
    /// SHA-256 of this document's canonical form with this field blank.
    pub inputs_digest: String,
    pub options: MetricOptions,
    pub components: Vec<Component>,
    pub descriptive: DescriptiveSection,
    pub attitudes: AttitudeSection,
    pub effort: EffortSection,
    pub exploration: ExplorationSection,
    pub payloads: Vec<PayloadRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescriptiveSection {
    pub sessions: Vec<SessionDescriptive>,
    pub users: Vec<UserDescriptive>,
    pub missing_sus: Vec<String>,
    pub completion_ms: Option<BoxStats>,
    pub steps: Option<BoxStats>,
    pub sus: Option<BoxStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttitudeRow {
    pub comp_id: String,
    pub no_data: bool,
    pub efficiency: Option<BoxStats>,
    pub effectiveness: Option<BoxStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct L2AttitudeRow {
    pub l1_id: L1,
    pub l2_id: String,
    pub no_data: bool,
    pub efficiency: Option<BoxStats>,
    pub effectiveness: Option<BoxStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttitudeSection {
    pub respondents: usize,
    pub components: Vec<AttitudeRow>,
    pub l2: Vec<L2AttitudeRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffortRow {
    pub comp_id: String,
    pub total_ms: u64,
    pub visit_count: u64,
    pub sessions_used: u64,
    pub zero_use: bool,
    /// Per-session share of attributed time, over all sessions.
    pub share: Option<BoxStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionEffortRow {
    pub user_id: String,
    pub task_id: String,
    pub span_ms: u64,
    pub attributed_ms: u64,
    /// Canonical component order.
    pub per_component_ms: Vec<u64>,
    pub shares: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserEffortRow {
    pub user_id: String,
    pub total_ms: u64,
    pub per_component_ms: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct L2EffortRow {
    pub l1_id: L1,
    pub l2_id: String,
    pub total_ms: u64,
    /// Fraction of all attributed time in the bundle.
    pub share_of_total: f64,
    pub share: Option<BoxStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffortSection {
    pub components: Vec<EffortRow>,
    pub sessions: Vec<SessionEffortRow>,
    pub users: Vec<UserEffortRow>,
    pub l2: Vec<L2EffortRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplorationSection {
    pub l3: TransitionMatrix,
    pub l2: TransitionMatrix,
    pub overall: LinearityIndex,
    pub l2_linearity: LinearityIndex,
    pub sessions: Vec<SessionLinearity>,
}

/// A record's `other` payload, kept as compact JSON text so it passes
/// through the export unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayloadRow {
    pub user_id: String,
    pub task_id: String,
    pub timestamp: String,
    pub comp_id: String,
    pub other: String,
}

fn payload_rows(bundle: &SessionBundle) -> Vec<PayloadRow> {
    bundle
        .sessions
        .iter()
        .flat_map(|s| {
            s.records.iter().filter_map(move |r| {
                r.other.as_ref().map(|other| PayloadRow {
                    user_id: s.user_id.clone(),
                    task_id: s.task_id.clone(),
                    timestamp: format_timestamp(&r.timestamp),
                    comp_id: r.comp_id.clone(),
                    other: other.to_string(),
                })
            })
        })
        .collect()
}

/// Assembles the export. All inputs must derive from `bundle`.
pub fn export_metrics(
    bundle: &SessionBundle,
    metrics: &MetricSet,
    attitudes: &Attitudes,
    descriptive: &DescriptiveStats,
) -> Result<MetricsExport, CardsError> {
    let model = &bundle.model;
    let digest = model.digest();
    for (what, other) in [
        ("metrics", &metrics.model_digest),
        ("attitudes", &attitudes.model_digest),
        ("descriptive statistics", &descriptive.model_digest),
    ] {
        if *other != digest {
            return Err(CardsError::ModelMismatch(format!(
                "{what} were computed for a different component model"
            )));
        }
    }

    let n = model.len();
    let effort = &metrics.effort;
    let session_shares: Vec<Vec<f64>> = effort.sessions.iter().map(|s| s.shares()).collect();
    let components = model
        .components
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let e = &effort.components[i];
            let shares: Vec<f64> = session_shares.iter().map(|s| s[i]).collect();
            EffortRow {
                comp_id: c.comp_id.clone(),
                total_ms: e.total_ms,
                visit_count: e.visit_count,
                sessions_used: e.sessions_used,
                zero_use: e.sessions_used == 0,
                share: boxed(&shares),
            }
        })
        .collect();
    let sessions = effort
        .sessions
        .iter()
        .zip(&session_shares)
        .map(|(s, shares)| SessionEffortRow {
            user_id: s.user_id.clone(),
            task_id: s.task_id.clone(),
            span_ms: s.span_ms,
            attributed_ms: s.attributed_ms(),
            per_component_ms: s.per_component_ms.clone(),
            shares: shares.iter().map(|&v| q4(v)).collect(),
        })
        .collect();

    let mut users: Vec<UserEffortRow> = Vec::new();
    for s in &effort.sessions {
        if users.last().map(|u| &u.user_id) != Some(&s.user_id) {
            users.push(UserEffortRow {
                user_id: s.user_id.clone(),
                total_ms: 0,
                per_component_ms: vec![0; n],
            });
        }
        let row = users.last_mut().expect("just pushed");
        for (acc, ms) in row.per_component_ms.iter_mut().zip(&s.per_component_ms) {
            *acc += ms;
        }
        row.total_ms += s.attributed_ms();
    }

    let grand_total: u64 = effort.components.iter().map(|c| c.total_ms).sum();
    let l2_effort = model
        .l2_order()
        .into_iter()
        .map(|l2| {
            let members: Vec<usize> = (0..n)
                .filter(|&i| model.components[i].l2_id == l2)
                .collect();
            let total_ms: u64 = members.iter().map(|&i| effort.components[i].total_ms).sum();
            let shares: Vec<f64> = session_shares
                .iter()
                .map(|s| members.iter().map(|&i| s[i]).sum())
                .collect();
            L2EffortRow {
                l1_id: model.l1_of_l2(&l2).expect("l2 from model"),
                l2_id: l2,
                total_ms,
                share_of_total: if grand_total == 0 {
                    0.0
                } else {
                    q4(total_ms as f64 / grand_total as f64)
                },
                share: boxed(&shares),
            }
        })
        .collect();

    let completion: Vec<f64> = descriptive
        .sessions
        .iter()
        .map(|s| s.completion_ms as f64)
        .collect();
    let steps: Vec<f64> = descriptive
        .sessions
        .iter()
        .map(|s| s.steps as f64)
        .collect();
    let sus: Vec<f64> = descriptive.users.iter().filter_map(|u| u.sus).collect();

    let mut export = MetricsExport {
        schema: SCHEMA_ID.to_string(),
        system_name: model.system_name.clone(),
        model_digest: digest,
        inputs_digest: String::new(),
        options: metrics.options,
        components: model.components.clone(),
        descriptive: DescriptiveSection {
            sessions: descriptive.sessions.clone(),
            users: descriptive
                .users
                .iter()
                .map(|u| UserDescriptive {
                    sus: u.sus.map(q4),
                    ..u.clone()
                })
                .collect(),
            missing_sus: descriptive.missing_sus.clone(),
            completion_ms: boxed(&completion),
            steps: boxed(&steps),
            sus: boxed(&sus),
        },
        attitudes: AttitudeSection {
            respondents: attitudes.respondents,
            components: attitudes
                .components
                .iter()
                .map(|a| AttitudeRow {
                    comp_id: a.comp_id.clone(),
                    no_data: a.no_data(),
                    efficiency: a.efficiency.as_ref().map(q4_box),
                    effectiveness: a.effectiveness.as_ref().map(q4_box),
                })
                .collect(),
            l2: attitudes
                .l2
                .iter()
                .map(|a| L2AttitudeRow {
                    l1_id: a.l1_id,
                    l2_id: a.l2_id.clone(),
                    no_data: a.efficiency.is_none(),
                    efficiency: a.efficiency.as_ref().map(q4_box),
                    effectiveness: a.effectiveness.as_ref().map(q4_box),
                })
                .collect(),
        },
        effort: EffortSection {
            components,
            sessions,
            users,
            l2: l2_effort,
        },
        exploration: ExplorationSection {
            l3: metrics.l3.clone(),
            l2: metrics.l2.clone(),
            overall: q4_linearity(&metrics.overall_linearity),
            l2_linearity: q4_linearity(&metrics.l2_linearity),
            sessions: metrics
                .session_linearity
                .iter()
                .map(|s| SessionLinearity {
                    index: q4_linearity(&s.index),
                    ..s.clone()
                })
                .collect(),
        },
        payloads: payload_rows(bundle),
    };
    export.inputs_digest = export.compute_digest();
    Ok(export)
}

/// Runs every metric over a bundle and its surveys and exports the result.
pub fn analyze(
    bundle: &SessionBundle,
    survey: &SurveyBundle,
    options: &MetricOptions,
    exec: Execution,
) -> Result<MetricsExport, CardsError> {
    let metrics = compute_metrics(bundle, options, exec)?;
    let attitudes = Attitudes::compute(survey, &bundle.model)?;
    let stats = descriptive(bundle, &sus_scores(&survey.sus));
    export_metrics(bundle, &metrics, &attitudes, &stats)
}

impl MetricsExport {
    fn compute_digest(&self) -> String {
        let blank = MetricsExport {
            inputs_digest: String::new(),
            ..self.clone()
        };
        json::sha256_hex(
            json::to_canonical_string(&blank)
                .expect("export serializes")
                .as_bytes(),
        )
    }

    pub fn model(&self) -> ComponentModel {
        ComponentModel {
            system_name: self.system_name.clone(),
            components: self.components.clone(),
        }
    }

    pub fn to_canonical_json(&self) -> String {
        json::to_canonical_string(self).expect("export serializes")
    }

    /// Parses and checks an export: schema id, model invariants, digests and
    /// the shape of every per-component table.
    pub fn from_json(text: &str) -> Result<Self, CardsError> {
        let export: MetricsExport =
            serde_json::from_str(text).map_err(|e| CardsError::Schema(e.to_string()))?;
        if export.schema != SCHEMA_ID {
            return Err(CardsError::Schema(format!(
                "schema `{}` is not `{SCHEMA_ID}`",
                export.schema
            )));
        }
        let model = export.model();
        model
            .check()
            .map_err(|e| CardsError::Schema(e.to_string()))?;
        if model.digest() != export.model_digest {
            return Err(CardsError::Schema(
                "model_digest does not match components".into(),
            ));
        }
        let n = model.len();
        let order = model.canonical_order();
        let shape_ok = export.attitudes.components.len() == n
            && export.effort.components.len() == n
            && export
                .attitudes
                .components
                .iter()
                .zip(&order)
                .all(|(a, o)| &a.comp_id == o)
            && export
                .effort
                .components
                .iter()
                .zip(&order)
                .all(|(e, o)| &e.comp_id == o)
            && export
                .effort
                .sessions
                .iter()
                .all(|s| s.per_component_ms.len() == n && s.shares.len() == n)
            && export
                .effort
                .users
                .iter()
                .all(|u| u.per_component_ms.len() == n)
            && export.exploration.l3.order == order
            && export.exploration.l2.order == model.l2_order()
            && export.exploration.l3.counts.len() == n
            && export.exploration.l3.counts.iter().all(|r| r.len() == n);
        if !shape_ok {
            return Err(CardsError::Schema(
                "tables do not match the component model".into(),
            ));
        }
        for p in &export.payloads {
            if model.index_of(&p.comp_id).is_none() {
                return Err(CardsError::Schema(format!(
                    "payload names unknown component `{}`",
                    p.comp_id
                )));
            }
            serde_json::from_str::<serde_json::Value>(&p.other)
                .map_err(|e| CardsError::Schema(format!("payload is not JSON: {e}")))?;
        }
        if export.compute_digest() != export.inputs_digest {
            return Err(CardsError::Schema(
                "inputs_digest does not match content".into(),
            ));
        }
        Ok(export)
    }
}
