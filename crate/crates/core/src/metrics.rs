//! Behavioral metrics derived from sessions.
//!
//! Each record marks the moment a user entered a component. The interval up
//! to the next record is attributed to that component and the final record
//! closes the session, so with no idle cap the attributed times of a session
//! add up to its span exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::taxonomy::ComponentModel;
use crate::telemetry::{Session, SessionBundle};

/// Ten minutes.
pub const DEFAULT_IDLE_CAP_MS: u64 = 10 * 60 * 1000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("unknown level `{0}` (expected L3 or L2)")]
    UnknownLevel(String),
    #[error("component `{0}` is not in the ordering")]
    ComponentNotInOrder(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricOptions {
    /// Intervals longer than this are truncated to it. `None` disables.
    pub idle_cap_ms: Option<u64>,
    /// Collapse runs of the same component before counting transitions.
    pub collapse_repeats: bool,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            idle_cap_ms: Some(DEFAULT_IDLE_CAP_MS),
            collapse_repeats: false,
        }
    }
}

fn attributed_intervals(
    session: &Session,
    idle_cap: Option<u64>,
) -> impl Iterator<Item = (&str, u64)> + '_ {
    session.records.windows(2).map(move |pair| {
        let gap = (pair[1].millis() - pair[0].millis()).max(0) as u64;
        let gap = idle_cap.map_or(gap, |cap| gap.min(cap));
        (pair[0].comp_id.as_str(), gap)
    })
}

/// Milliseconds attributed to each component the session touched.
pub fn attribute_time(session: &Session, idle_cap: Option<u64>) -> BTreeMap<String, u64> {
    let mut out: BTreeMap<String, u64> = session
        .records
        .iter()
        .map(|r| (r.comp_id.clone(), 0))
        .collect();
    for (comp, ms) in attributed_intervals(session, idle_cap) {
        *out.get_mut(comp)
            .expect("every record's component is present") += ms;
    }
    out
}

/// Effort for one component across a bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentEffort {
    pub comp_id: String,
    pub total_ms: u64,
    /// Number of times users entered the component (runs of consecutive
    /// records count once).
    pub visit_count: u64,
    /// Sessions that touched the component at all.
    pub sessions_used: u64,
}

/// Effort for one session, per component in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEffort {
    pub user_id: String,
    pub task_id: String,
    pub span_ms: u64,
    pub per_component_ms: Vec<u64>,
    pub visits: Vec<u64>,
}

impl SessionEffort {
    pub fn attributed_ms(&self) -> u64 {
        self.per_component_ms.iter().sum()
    }

    /// Fraction of the session's attributed time spent in each component.
    pub fn shares(&self) -> Vec<f64> {
        let total = self.attributed_ms();
        self.per_component_ms
            .iter()
            .map(|&ms| {
                if total == 0 {
                    0.0
                } else {
                    ms as f64 / total as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffortProfile {
    pub model_digest: String,
    pub idle_cap_ms: Option<u64>,
    pub components: Vec<ComponentEffort>,
    pub sessions: Vec<SessionEffort>,
}

fn session_effort(
    session: &Session,
    model: &ComponentModel,
    idle_cap: Option<u64>,
) -> SessionEffort {
    let index = model.index_map();
    let mut per_component_ms = vec![0; model.len()];
    let mut visits = vec![0; model.len()];
    for (comp, ms) in attributed_intervals(session, idle_cap) {
        per_component_ms[index[comp]] += ms;
    }
    let mut previous: Option<&str> = None;
    for r in &session.records {
        if previous != Some(r.comp_id.as_str()) {
            visits[index[r.comp_id.as_str()]] += 1;
        }
        previous = Some(&r.comp_id);
    }
    SessionEffort {
        user_id: session.user_id.clone(),
        task_id: session.task_id.clone(),
        span_ms: session.span_ms(),
        per_component_ms,
        visits,
    }
}

pub fn effort_profile(
    bundle: &SessionBundle,
    idle_cap: Option<u64>,
    exec: Execution,
) -> EffortProfile {
    let model = &bundle.model;
    let sessions = exec.map(&bundle.sessions, |s| session_effort(s, model, idle_cap));
    let components = model
        .components
        .iter()
        .enumerate()
        .map(|(i, c)| ComponentEffort {
            comp_id: c.comp_id.clone(),
            total_ms: sessions.iter().map(|s| s.per_component_ms[i]).sum(),
            visit_count: sessions.iter().map(|s| s.visits[i]).sum(),
            sessions_used: sessions.iter().filter(|s| s.visits[i] > 0).count() as u64,
        })
        .collect();
    EffortProfile {
        model_digest: model.digest(),
        idle_cap_ms: idle_cap,
        components,
        sessions,
    }
}

/// Granularity of a transition matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Level {
    L3,
    L2,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::L3 => "L3",
            Level::L2 => "L2",
        })
    }
}

impl FromStr for Level {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "L3" => Ok(Level::L3),
            "L2" => Ok(Level::L2),
            _ => Err(MetricsError::UnknownLevel(s.to_string())),
        }
    }
}

/// From-to counts: rows are sources, columns destinations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub level: Level,
    pub order: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl TransitionMatrix {
    pub fn zeros(level: Level, order: Vec<String>) -> Self {
        let n = order.len();
        TransitionMatrix {
            level,
            order,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn diagonal_total(&self) -> u64 {
        (0..self.order.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Sum of cells whose destination precedes the source.
    pub fn below_diagonal_total(&self) -> u64 {
        (0..self.order.len())
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| self.counts[i][j])
            .sum()
    }

    pub fn get(&self, from: &str, to: &str) -> Option<u64> {
        let i = self.order.iter().position(|o| o == from)?;
        let j = self.order.iter().position(|o| o == to)?;
        Some(self.counts[i][j])
    }

    fn add(&mut self, other: &TransitionMatrix) {
        for (row, other_row) in self.counts.iter_mut().zip(&other.counts) {
            for (cell, v) in row.iter_mut().zip(other_row) {
                *cell += v;
            }
        }
    }
}

fn session_indices(
    session: &Session,
    model: &ComponentModel,
    level: Level,
    collapse: bool,
) -> Result<Vec<usize>, MetricsError> {
    let index = model.index_map();
    let l2_order = model.l2_order();
    let mut comp_seq: Vec<usize> = session
        .records
        .iter()
        .map(|r| {
            index
                .get(r.comp_id.as_str())
                .copied()
                .ok_or_else(|| MetricsError::ComponentNotInOrder(r.comp_id.clone()))
        })
        .collect::<Result<_, _>>()?;
    if collapse {
        comp_seq.dedup();
    }
    Ok(match level {
        Level::L3 => comp_seq,
        Level::L2 => comp_seq
            .into_iter()
            .map(|i| {
                let l2 = &model.components[i].l2_id;
                l2_order
                    .iter()
                    .position(|o| o == l2)
                    .expect("l2 order covers the model")
            })
            .collect(),
    })
}

fn level_order(model: &ComponentModel, level: Level) -> Vec<String> {
    match level {
        Level::L3 => model.canonical_order(),
        Level::L2 => model.l2_order(),
    }
}

/// Counts consecutive record pairs within each session. With
/// `collapse_repeats`, runs of one component are collapsed first, before any
/// roll-up to level two, so the level-two matrix is always the block sum of
/// the level-three one.
pub fn transition_matrix(
    sessions: &[Session],
    model: &ComponentModel,
    level: Level,
    collapse_repeats: bool,
) -> Result<TransitionMatrix, MetricsError> {
    transition_matrix_with(
        sessions,
        model,
        level,
        collapse_repeats,
        Execution::default(),
    )
}

pub fn transition_matrix_with(
    sessions: &[Session],
    model: &ComponentModel,
    level: Level,
    collapse_repeats: bool,
    exec: Execution,
) -> Result<TransitionMatrix, MetricsError> {
    let order = level_order(model, level);
    let partials = exec.map(sessions, |s| {
        let seq = session_indices(s, model, level, collapse_repeats)?;
        let mut m = TransitionMatrix::zeros(level, order.clone());
        for pair in seq.windows(2) {
            m.counts[pair[0]][pair[1]] += 1;
        }
        Ok(m)
    });
    let mut total = TransitionMatrix::zeros(level, order);
    for partial in partials {
        total.add(&partial?);
    }
    Ok(total)
}

/// Share of non-self transitions that move forward in the canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearityIndex {
    pub value: f64,
    pub forward_count: u64,
    pub backward_count: u64,
    pub self_count: u64,
}

impl LinearityIndex {
    pub fn from_counts(forward_count: u64, backward_count: u64, self_count: u64) -> Self {
        let moves = forward_count + backward_count;
        let value = if moves == 0 {
            1.0
        } else {
            forward_count as f64 / moves as f64
        };
        LinearityIndex {
            value,
            forward_count,
            backward_count,
            self_count,
        }
    }
}

fn position(order: &[String], comp: &str) -> Result<usize, MetricsError> {
    order
        .iter()
        .position(|o| o == comp)
        .ok_or_else(|| MetricsError::ComponentNotInOrder(comp.to_string()))
}

/// Linearity of a component sequence against `order`.
pub fn linearity_of_sequence<S: AsRef<str>>(
    sequence: &[S],
    order: &[String],
) -> Result<LinearityIndex, MetricsError> {
    let positions: Vec<usize> = sequence
        .iter()
        .map(|c| position(order, c.as_ref()))
        .collect::<Result<_, _>>()?;
    let (mut fwd, mut back, mut same) = (0, 0, 0);
    for pair in positions.windows(2) {
        match pair[1].cmp(&pair[0]) {
            std::cmp::Ordering::Greater => fwd += 1,
            std::cmp::Ordering::Less => back += 1,
            std::cmp::Ordering::Equal => same += 1,
        }
    }
    Ok(LinearityIndex::from_counts(fwd, back, same))
}

pub fn linearity_of_session(
    session: &Session,
    order: &[String],
) -> Result<LinearityIndex, MetricsError> {
    let seq: Vec<&str> = session.records.iter().map(|r| r.comp_id.as_str()).collect();
    linearity_of_sequence(&seq, order)
}

/// Linearity read off a from-to matrix: cells above the diagonal of `order`
/// are forward, cells below are backward.
pub fn linearity_of_matrix(
    matrix: &TransitionMatrix,
    order: &[String],
) -> Result<LinearityIndex, MetricsError> {
    let positions: Vec<usize> = matrix
        .order
        .iter()
        .map(|c| position(order, c))
        .collect::<Result<_, _>>()?;
    let (mut fwd, mut back, mut same) = (0, 0, 0);
    for (i, row) in matrix.counts.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            match positions[j].cmp(&positions[i]) {
                std::cmp::Ordering::Greater => fwd += count,
                std::cmp::Ordering::Less => back += count,
                std::cmp::Ordering::Equal => same += count,
            }
        }
    }
    Ok(LinearityIndex::from_counts(fwd, back, same))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLinearity {
    pub user_id: String,
    pub task_id: String,
    pub index: LinearityIndex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDescriptive {
    pub user_id: String,
    pub task_id: String,
    pub completion_ms: u64,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserDescriptive {
    pub user_id: String,
    pub sessions: u64,
    pub sus: Option<f64>,
}

/// Completion time, steps and SUS per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub model_digest: String,
    pub sessions: Vec<SessionDescriptive>,
    /// Users with sessions or a SUS response, sorted by id.
    pub users: Vec<UserDescriptive>,
    /// Users with sessions but no SUS response.
    pub missing_sus: Vec<String>,
}

pub fn descriptive(bundle: &SessionBundle, sus_scores: &BTreeMap<String, f64>) -> DescriptiveStats {
    let sessions: Vec<SessionDescriptive> = bundle
        .sessions
        .iter()
        .map(|s| SessionDescriptive {
            user_id: s.user_id.clone(),
            task_id: s.task_id.clone(),
            completion_ms: s.span_ms(),
            steps: s.len() as u64,
        })
        .collect();
    let mut per_user: BTreeMap<String, UserDescriptive> = BTreeMap::new();
    for s in &sessions {
        per_user
            .entry(s.user_id.clone())
            .or_insert_with(|| UserDescriptive {
                user_id: s.user_id.clone(),
                sessions: 0,
                sus: None,
            })
            .sessions += 1;
    }
    for (user, &score) in sus_scores {
        per_user
            .entry(user.clone())
            .or_insert_with(|| UserDescriptive {
                user_id: user.clone(),
                sessions: 0,
                sus: None,
            })
            .sus = Some(score);
    }
    let missing_sus = per_user
        .values()
        .filter(|u| u.sus.is_none())
        .map(|u| u.user_id.clone())
        .collect();
    DescriptiveStats {
        model_digest: bundle.model.digest(),
        sessions,
        users: per_user.into_values().collect(),
        missing_sus,
    }
}

/// Every behavioral quantity for one bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub model_digest: String,
    pub options: MetricOptions,
    pub effort: EffortProfile,
    pub l3: TransitionMatrix,
    pub l2: TransitionMatrix,
    pub session_linearity: Vec<SessionLinearity>,
    pub overall_linearity: LinearityIndex,
    pub l2_linearity: LinearityIndex,
}

pub fn compute_metrics(
    bundle: &SessionBundle,
    options: &MetricOptions,
    exec: Execution,
) -> Result<MetricSet, MetricsError> {
    let model = &bundle.model;
    let order = model.canonical_order();
    let l3 = transition_matrix_with(
        &bundle.sessions,
        model,
        Level::L3,
        options.collapse_repeats,
        exec,
    )?;
    let l2 = transition_matrix_with(
        &bundle.sessions,
        model,
        Level::L2,
        options.collapse_repeats,
        exec,
    )?;
    let session_linearity = exec
        .map(&bundle.sessions, |s| {
            linearity_of_session(s, &order).map(|index| SessionLinearity {
                user_id: s.user_id.clone(),
                task_id: s.task_id.clone(),
                index,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MetricSet {
        model_digest: model.digest(),
        options: *options,
        effort: effort_profile(bundle, options.idle_cap_ms, exec),
        overall_linearity: linearity_of_matrix(&l3, &order)?,
        l2_linearity: linearity_of_matrix(&l2, &model.l2_order())?,
        l3,
        l2,
        session_linearity,
    })
}
