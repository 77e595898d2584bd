//! Reference functionality table and component-model resolution.
//!
//! Builders walk every level-two functionality of the reference table and
//! choose to apply it as-is, subdivide it into system-specific components,
//! drop it, or create new level-two functionalities. The outcome is a
//! [`ComponentModel`]: the ordered set of terminal components that every
//! other module uses as its unit of analysis.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::json;

/// Level-one user goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum L1 {
    #[serde(alias = "Data")]
    Data,
    #[serde(alias = "Problem")]
    Problem,
    #[serde(alias = "Model")]
    Model,
}

impl L1 {
    pub const ALL: [L1; 3] = [L1::Data, L1::Problem, L1::Model];

    pub fn as_str(self) -> &'static str {
        match self {
            L1::Data => "data",
            L1::Problem => "problem",
            L1::Model => "model",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            L1::Data => "Data",
            L1::Problem => "Problem",
            L1::Model => "Model",
        }
    }
}

impl fmt::Display for L1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for L1 {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "data" => Ok(L1::Data),
            "problem" => Ok(L1::Problem),
            "model" => Ok(L1::Model),
            _ => Err(format!(
                "unknown level-one goal `{s}` (expected data, problem or model)"
            )),
        }
    }
}

/// One row of the reference functionality table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReferenceFunctionality {
    pub l1_id: L1,
    pub l2_id: &'static str,
    pub name: &'static str,
    pub description: &'static str,
}

const REFERENCE: [ReferenceFunctionality; 9] = [
    ReferenceFunctionality {
        l1_id: L1::Data,
        l2_id: "open_dataset",
        name: "Open a dataset",
        description: "A user selects a dataset",
    },
    ReferenceFunctionality {
        l1_id: L1::Data,
        l2_id: "explore_dataset",
        name: "Explore a dataset",
        description: "A user looks up a dataset (e.g., check the distribution of a feature, see a specific instance)",
    },
    ReferenceFunctionality {
        l1_id: L1::Data,
        l2_id: "augment_dataset",
        name: "Augment a dataset",
        description: "A user augments a dataset (e.g., a user searches other relevant datasets and joins new features with the chosen dataset) or adds/removes features",
    },
    ReferenceFunctionality {
        l1_id: L1::Data,
        l2_id: "transform_dataset",
        name: "Transform a dataset",
        description: "A user cleans/bins features in a dataset",
    },
    ReferenceFunctionality {
        l1_id: L1::Problem,
        l2_id: "specify_problem",
        name: "Specify a problem",
        description: "A user specifies a series of parameters required for an AutoML system to generate models (i.e., target metric, type of ML models, advanced settings, etc.)",
    },
    ReferenceFunctionality {
        l1_id: L1::Model,
        l2_id: "summarize_models",
        name: "Summarize models",
        description: "A user requests/looks up general information about a set of models generated by an AutoML system",
    },
    ReferenceFunctionality {
        l1_id: L1::Model,
        l2_id: "explain_model",
        name: "Explain a model",
        description: "A user views detailed information about a model (e.g., performance, cases for making accurate or inaccurate predictions)",
    },
    ReferenceFunctionality {
        l1_id: L1::Model,
        l2_id: "compare_models",
        name: "Compare models",
        description: "A user requests information to compare multiple models",
    },
    ReferenceFunctionality {
        l1_id: L1::Model,
        l2_id: "export_model",
        name: "Export a model",
        description: "A user exports a model",
    },
];

/// The nine reference functionalities in table order.
pub fn load_reference() -> Vec<ReferenceFunctionality> {
    REFERENCE.to_vec()
}

/// Looks up a reference functionality by its level-two key.
pub fn reference_entry(l2_id: &str) -> Option<&'static ReferenceFunctionality> {
    REFERENCE.iter().find(|r| r.l2_id == l2_id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Apply,
    Subdivide,
    Drop,
    Create,
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActionKind::Apply => "apply",
            ActionKind::Subdivide => "subdivide",
            ActionKind::Drop => "drop",
            ActionKind::Create => "create",
        })
    }
}

/// A terminal component requested by a subdivide or create action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentSpec {
    pub id: String,
    pub label: String,
}

impl ComponentSpec {
    pub fn new(id: impl Into<String>, label: impl Into<String>) -> Self {
        ComponentSpec {
            id: id.into(),
            label: label.into(),
        }
    }

    /// Builds a spec from a label alone; the id is the label's slug.
    pub fn from_label(label: impl Into<String>) -> Self {
        let label = label.into();
        ComponentSpec {
            id: slugify(&label),
            label,
        }
    }
}

/// One builder decision about a level-two functionality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResolutionAction {
    Apply {
        target: String,
    },
    Subdivide {
        target: String,
        components: Vec<ComponentSpec>,
    },
    Drop {
        target: String,
    },
    Create {
        l1: L1,
        l2: String,
        components: Vec<ComponentSpec>,
    },
}

impl ResolutionAction {
    pub fn apply(target: &str) -> Self {
        ResolutionAction::Apply {
            target: target.to_string(),
        }
    }

    pub fn drop(target: &str) -> Self {
        ResolutionAction::Drop {
            target: target.to_string(),
        }
    }

    pub fn subdivide(target: &str, components: Vec<ComponentSpec>) -> Self {
        ResolutionAction::Subdivide {
            target: target.to_string(),
            components,
        }
    }

    pub fn create(l1: L1, l2: &str, components: Vec<ComponentSpec>) -> Self {
        ResolutionAction::Create {
            l1,
            l2: l2.to_string(),
            components,
        }
    }

    pub fn kind(&self) -> ActionKind {
        match self {
            ResolutionAction::Apply { .. } => ActionKind::Apply,
            ResolutionAction::Subdivide { .. } => ActionKind::Subdivide,
            ResolutionAction::Drop { .. } => ActionKind::Drop,
            ResolutionAction::Create { .. } => ActionKind::Create,
        }
    }

    /// The reference key this action targets; `None` for create.
    pub fn target(&self) -> Option<&str> {
        match self {
            ResolutionAction::Apply { target }
            | ResolutionAction::Subdivide { target, .. }
            | ResolutionAction::Drop { target } => Some(target),
            ResolutionAction::Create { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub comp_id: String,
    pub label: String,
    pub l1_id: L1,
    pub l2_id: String,
    pub origin: ActionKind,
}

/// A system's resolved three-level hierarchy. Component order is the
/// canonical order used by every chart axis and by the linearity metric.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentModel {
    pub system_name: String,
    pub components: Vec<Component>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("`{target}` is not a reference level-two functionality")]
    UnknownL2Target { target: String },
    #[error("`{target}` is targeted by more than one action")]
    DuplicateTarget { target: String },
    #[error("reference functionality `{l2}` has no action")]
    MissingL2 { l2: String },
    #[error("every functionality was dropped and nothing was created")]
    EmptyModel,
    #[error("component id `{comp_id}` is used more than once")]
    DuplicateComponentId { comp_id: String },
    #[error("subdividing `{target}` needs at least 2 components, got {count}")]
    SubdivideTooFew { target: String, count: usize },
    #[error("created functionality `{l2}` lists no components")]
    EmptyCreate { l2: String },
    #[error("created functionality `{l2}` collides with a reference key")]
    CreatedKeyCollision { l2: String },
    #[error("invalid identifier `{id}`: {reason}")]
    InvalidIdentifier { id: String, reason: &'static str },
    #[error("system name is empty")]
    EmptySystemName,
    #[error("alignment needs at least 2 models, got {0}")]
    FewerThanTwoModels(usize),
    #[error("malformed component model: {0}")]
    MalformedModel(String),
}

fn check_identifier(id: &str) -> Result<(), TaxonomyError> {
    if id.is_empty() {
        return Err(TaxonomyError::InvalidIdentifier {
            id: id.into(),
            reason: "empty",
        });
    }
    if id.chars().any(|c| c.is_whitespace() || c.is_control()) {
        return Err(TaxonomyError::InvalidIdentifier {
            id: id.into(),
            reason: "contains whitespace",
        });
    }
    Ok(())
}

/// Lowercase ASCII slug: runs of non-alphanumerics become a single `_`.
pub fn slugify(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    for c in label.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.is_empty() && !out.ends_with('_') {
            out.push('_');
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    out
}

/// Resolves a builder's actions into a component model.
///
/// Every reference functionality must be targeted by exactly one apply,
/// subdivide or drop. Components are ordered by level-one goal (data,
/// problem, model); within a goal, reference functionalities come in table
/// order followed by created ones in declaration order.
pub fn resolve_model(
    system_name: &str,
    actions: &[ResolutionAction],
) -> Result<ComponentModel, TaxonomyError> {
    if system_name.trim().is_empty() {
        return Err(TaxonomyError::EmptySystemName);
    }

    let mut by_target: HashMap<&str, &ResolutionAction> = HashMap::new();
    let mut creates: Vec<&ResolutionAction> = Vec::new();
    let mut created_keys: HashSet<&str> = HashSet::new();
    for action in actions {
        match action {
            ResolutionAction::Create { l2, components, .. } => {
                check_identifier(l2)?;
                if reference_entry(l2).is_some() {
                    return Err(TaxonomyError::CreatedKeyCollision { l2: l2.clone() });
                }
                if !created_keys.insert(l2) {
                    return Err(TaxonomyError::DuplicateTarget { target: l2.clone() });
                }
                if components.is_empty() {
                    return Err(TaxonomyError::EmptyCreate { l2: l2.clone() });
                }
                creates.push(action);
            }
            _ => {
                let target = action.target().expect("non-create actions have a target");
                if reference_entry(target).is_none() {
                    return Err(TaxonomyError::UnknownL2Target {
                        target: target.to_string(),
                    });
                }
                if by_target.insert(target, action).is_some() {
                    return Err(TaxonomyError::DuplicateTarget {
                        target: target.to_string(),
                    });
                }
                if let ResolutionAction::Subdivide { components, .. } = action {
                    if components.len() < 2 {
                        return Err(TaxonomyError::SubdivideTooFew {
                            target: target.to_string(),
                            count: components.len(),
                        });
                    }
                }
            }
        }
    }
    if let Some(missing) = REFERENCE.iter().find(|r| !by_target.contains_key(r.l2_id)) {
        return Err(TaxonomyError::MissingL2 {
            l2: missing.l2_id.to_string(),
        });
    }

    let mut components = Vec::new();
    for l1 in L1::ALL {
        for reference in REFERENCE.iter().filter(|r| r.l1_id == l1) {
            match by_target[reference.l2_id] {
                ResolutionAction::Apply { .. } => components.push(Component {
                    comp_id: reference.l2_id.to_string(),
                    label: reference.name.to_string(),
                    l1_id: l1,
                    l2_id: reference.l2_id.to_string(),
                    origin: ActionKind::Apply,
                }),
                ResolutionAction::Subdivide {
                    components: specs, ..
                } => components.extend(specs.iter().map(|spec| Component {
                    comp_id: spec.id.clone(),
                    label: spec.label.clone(),
                    l1_id: l1,
                    l2_id: reference.l2_id.to_string(),
                    origin: ActionKind::Subdivide,
                })),
                ResolutionAction::Drop { .. } | ResolutionAction::Create { .. } => {}
            }
        }
        for create in &creates {
            if let ResolutionAction::Create {
                l1: created_l1,
                l2,
                components: specs,
            } = create
            {
                if *created_l1 == l1 {
                    components.extend(specs.iter().map(|spec| Component {
                        comp_id: spec.id.clone(),
                        label: spec.label.clone(),
                        l1_id: l1,
                        l2_id: l2.clone(),
                        origin: ActionKind::Create,
                    }));
                }
            }
        }
    }

    if components.is_empty() {
        return Err(TaxonomyError::EmptyModel);
    }
    let model = ComponentModel {
        system_name: system_name.to_string(),
        components,
    };
    model.check()?;
    Ok(model)
}

impl ComponentModel {
    /// Re-checks structural invariants: unique ids, valid identifiers and a
    /// consistent level-two to level-one mapping.
    pub fn check(&self) -> Result<(), TaxonomyError> {
        if self.system_name.trim().is_empty() {
            return Err(TaxonomyError::EmptySystemName);
        }
        if self.components.is_empty() {
            return Err(TaxonomyError::EmptyModel);
        }
        let mut seen = HashSet::new();
        let mut parent: HashMap<&str, L1> = HashMap::new();
        for c in &self.components {
            check_identifier(&c.comp_id)?;
            check_identifier(&c.l2_id)?;
            if !seen.insert(c.comp_id.as_str()) {
                return Err(TaxonomyError::DuplicateComponentId {
                    comp_id: c.comp_id.clone(),
                });
            }
            if let Some(reference) = reference_entry(&c.l2_id) {
                if reference.l1_id != c.l1_id || c.origin == ActionKind::Create {
                    return Err(TaxonomyError::MalformedModel(format!(
                        "component `{}` places reference functionality `{}` under `{}`",
                        c.comp_id, c.l2_id, c.l1_id
                    )));
                }
            } else if c.origin != ActionKind::Create {
                return Err(TaxonomyError::MalformedModel(format!(
                    "component `{}` has non-reference functionality `{}` but origin `{}`",
                    c.comp_id, c.l2_id, c.origin
                )));
            }
            if *parent.entry(&c.l2_id).or_insert(c.l1_id) != c.l1_id {
                return Err(TaxonomyError::MalformedModel(format!(
                    "functionality `{}` appears under more than one level-one goal",
                    c.l2_id
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn component(&self, comp_id: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.comp_id == comp_id)
    }

    /// Position of `comp_id` in the canonical order.
    pub fn index_of(&self, comp_id: &str) -> Option<usize> {
        self.components.iter().position(|c| c.comp_id == comp_id)
    }

    pub fn canonical_order(&self) -> Vec<String> {
        self.components.iter().map(|c| c.comp_id.clone()).collect()
    }

    /// Distinct level-two keys in canonical order.
    pub fn l2_order(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in &self.components {
            if out.last() != Some(&c.l2_id) && !out.contains(&c.l2_id) {
                out.push(c.l2_id.clone());
            }
        }
        out
    }

    pub fn l1_of_l2(&self, l2: &str) -> Option<L1> {
        self.components
            .iter()
            .find(|c| c.l2_id == l2)
            .map(|c| c.l1_id)
    }

    /// Lookup table from component id to canonical index.
    pub fn index_map(&self) -> HashMap<&str, usize> {
        self.components
            .iter()
            .enumerate()
            .map(|(i, c)| (c.comp_id.as_str(), i))
            .collect()
    }

    pub fn to_canonical_json(&self) -> String {
        json::to_canonical_string(self).expect("component model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TaxonomyError> {
        let model: ComponentModel =
            serde_json::from_str(text).map_err(|e| TaxonomyError::MalformedModel(e.to_string()))?;
        model.check()?;
        Ok(model)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        json::sha256_hex(self.to_canonical_json().as_bytes())
    }
}

/// Per-reference-functionality mapping of the components each system
/// contributes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlignmentMap {
    pub systems: Vec<String>,
    pub rows: Vec<AlignmentRow>,
    /// Created (non-reference) functionalities, per system in input order.
    pub unaligned: Vec<Vec<UnalignedL2>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlignmentRow {
    pub l1_id: L1,
    pub l2_id: String,
    pub name: String,
    /// Component ids per system, parallel to `AlignmentMap::systems`. An
    /// empty list means the system dropped this functionality.
    pub members: Vec<Vec<String>>,
}

impl AlignmentRow {
    /// Number of systems contributing at least one component.
    pub fn participants(&self) -> usize {
        self.members.iter().filter(|m| !m.is_empty()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnalignedL2 {
    pub l1_id: L1,
    pub l2_id: String,
    pub comp_ids: Vec<String>,
}

/// Aligns models on the shared level-two functionalities. Rows follow
/// reference table order and only include functionalities that at least one
/// model kept.
pub fn align_models(models: &[&ComponentModel]) -> Result<AlignmentMap, TaxonomyError> {
    if models.len() < 2 {
        return Err(TaxonomyError::FewerThanTwoModels(models.len()));
    }
    let rows = REFERENCE
        .iter()
        .filter_map(|reference| {
            let members: Vec<Vec<String>> = models
                .iter()
                .map(|m| {
                    m.components
                        .iter()
                        .filter(|c| c.l2_id == reference.l2_id)
                        .map(|c| c.comp_id.clone())
                        .collect()
                })
                .collect();
            members.iter().any(|m| !m.is_empty()).then(|| AlignmentRow {
                l1_id: reference.l1_id,
                l2_id: reference.l2_id.to_string(),
                name: reference.name.to_string(),
                members,
            })
        })
        .collect();
    let unaligned = models
        .iter()
        .map(|m| {
            let mut groups: Vec<UnalignedL2> = Vec::new();
            for c in m
                .components
                .iter()
                .filter(|c| reference_entry(&c.l2_id).is_none())
            {
                match groups.iter_mut().find(|g| g.l2_id == c.l2_id) {
                    Some(g) => g.comp_ids.push(c.comp_id.clone()),
                    None => groups.push(UnalignedL2 {
                        l1_id: c.l1_id,
                        l2_id: c.l2_id.clone(),
                        comp_ids: vec![c.comp_id.clone()],
                    }),
                }
            }
            groups
        })
        .collect();
    Ok(AlignmentMap {
        systems: models.iter().map(|m| m.system_name.clone()).collect(),
        rows,
        unaligned,
    })
}

// ---------------------------------------------------------------------------
// Configuration documents

/// Severity of a configuration diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// A validation message, anchored to a 1-based line when one is known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub line: Option<usize>,
    pub message: String,
}

impl Diagnostic {
    fn error(line: Option<usize>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            line,
            message: message.into(),
        }
    }

    fn warning(line: Option<usize>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            line,
            message: message.into(),
        }
    }
}

/// Result of validating a configuration document.
#[derive(Debug, Clone)]
pub struct ConfigReport {
    pub model: Option<ComponentModel>,
    pub diagnostics: Vec<Diagnostic>,
}

impl ConfigReport {
    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics
            .iter()
            .filter(|d| d.severity == Severity::Error)
    }

    pub fn is_ok(&self) -> bool {
        self.model.is_some() && self.errors().next().is_none()
    }
}

#[derive(Debug, Error)]
#[error("{}", format_diagnostics(.0))]
pub struct ConfigError(pub Vec<Diagnostic>);

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| match d.line {
            Some(line) => format!("line {line}: {}", d.message),
            None => d.message.clone(),
        })
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system_name: toml::Spanned<String>,
    #[serde(default)]
    l2: BTreeMap<toml::Spanned<String>, toml::Spanned<RawEntry>>,
    #[serde(default)]
    create: Vec<toml::Spanned<RawCreate>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    action: String,
    #[serde(default)]
    components: Option<Vec<RawComponent>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCreate {
    l1: String,
    l2: String,
    components: Vec<RawComponent>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawComponent {
    Label(String),
    Full {
        id: String,
        #[serde(default)]
        label: Option<String>,
    },
}

impl RawComponent {
    fn into_spec(self) -> ComponentSpec {
        match self {
            RawComponent::Label(label) => ComponentSpec::from_label(label),
            RawComponent::Full { id, label } => {
                let label = label.unwrap_or_else(|| id.clone());
                ComponentSpec { id, label }
            }
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())]
        .bytes()
        .filter(|&b| b == b'\n')
        .count()
        + 1
}

/// Parses and validates a configuration document, collecting every problem
/// rather than stopping at the first.
pub fn validate_config(text: &str) -> ConfigReport {
    let raw: RawConfig = match toml::from_str(text) {
        Ok(raw) => raw,
        Err(e) => {
            let line = e.span().map(|s| line_of(text, s.start));
            return ConfigReport {
                model: None,
                diagnostics: vec![Diagnostic::error(line, e.message().trim().to_string())],
            };
        }
    };

    let mut diags = Vec::new();
    let mut actions = Vec::new();
    let mut anchors: HashMap<String, usize> = HashMap::new();
    let mut present: HashSet<String> = HashSet::new();

    let system_line = line_of(text, raw.system_name.span().start);
    let system_name = raw.system_name.into_inner();
    if system_name.trim().is_empty() {
        diags.push(Diagnostic::error(Some(system_line), "system_name is empty"));
    }

    for (key, entry) in raw.l2 {
        let line = line_of(text, key.span().start);
        let key = key.into_inner();
        let entry = entry.into_inner();
        if reference_entry(&key).is_none() {
            diags.push(Diagnostic::error(
                Some(line),
                format!("`{key}` is not a reference level-two functionality; use a [[create]] table for new ones"),
            ));
            continue;
        }
        anchors.insert(key.clone(), line);
        present.insert(key.clone());
        let components: Option<Vec<ComponentSpec>> = entry
            .components
            .map(|cs| cs.into_iter().map(RawComponent::into_spec).collect());
        for spec in components.iter().flatten() {
            anchors.entry(spec.id.clone()).or_insert(line);
        }
        match entry.action.trim() {
            "" => diags.push(Diagnostic::error(
                Some(line),
                format!("`{key}` has no action assigned"),
            )),
            "apply" | "drop" if components.is_some() => diags.push(Diagnostic::error(
                Some(line),
                format!("`{key}`: `{}` takes no components", entry.action.trim()),
            )),
            "apply" => actions.push(ResolutionAction::Apply { target: key }),
            "drop" => actions.push(ResolutionAction::Drop { target: key }),
            "subdivide" => match components {
                Some(components) if components.len() >= 2 => {
                    actions.push(ResolutionAction::Subdivide {
                        target: key,
                        components,
                    })
                }
                other => diags.push(Diagnostic::error(
                    Some(line),
                    format!(
                        "`{key}`: subdivide needs at least 2 components, got {}",
                        other.map_or(0, |c| c.len())
                    ),
                )),
            },
            other => diags.push(Diagnostic::error(
                Some(line),
                format!("`{key}`: unknown action `{other}` (expected apply, subdivide or drop)"),
            )),
        }
    }

    for create in raw.create {
        let line = line_of(text, create.span().start);
        let create = create.into_inner();
        let l1 = match create.l1.parse::<L1>() {
            Ok(l1) => l1,
            Err(msg) => {
                diags.push(Diagnostic::error(Some(line), msg));
                continue;
            }
        };
        anchors.entry(create.l2.clone()).or_insert(line);
        let components: Vec<ComponentSpec> = create
            .components
            .into_iter()
            .map(RawComponent::into_spec)
            .collect();
        for spec in &components {
            anchors.entry(spec.id.clone()).or_insert(line);
        }
        actions.push(ResolutionAction::Create {
            l1,
            l2: create.l2,
            components,
        });
    }

    for l2 in REFERENCE
        .iter()
        .map(|r| r.l2_id)
        .filter(|k| !present.contains(*k))
    {
        diags.push(Diagnostic::error(
            None,
            format!("reference functionality `{l2}` is missing; every one needs an action"),
        ));
    }

    for l1 in L1::ALL {
        let applies_reference = actions.iter().any(|a| {
            matches!(a, ResolutionAction::Apply { target } | ResolutionAction::Subdivide { target, .. }
                if reference_entry(target).map(|r| r.l1_id) == Some(l1))
        });
        for action in &actions {
            if let ResolutionAction::Create {
                l1: created, l2, ..
            } = action
            {
                if *created == l1 && applies_reference {
                    diags.push(Diagnostic::warning(
                        anchors.get(l2).copied(),
                        format!("created functionality `{l2}` sits beside kept reference functionalities under `{l1}`"),
                    ));
                }
            }
        }
    }

    if diags.iter().any(|d| d.severity == Severity::Error) {
        return ConfigReport {
            model: None,
            diagnostics: diags,
        };
    }

    match resolve_model(&system_name, &actions) {
        Ok(model) => ConfigReport {
            model: Some(model),
            diagnostics: diags,
        },
        Err(e) => {
            let line = match &e {
                TaxonomyError::DuplicateComponentId { comp_id } => anchors.get(comp_id).copied(),
                TaxonomyError::DuplicateTarget { target } => anchors.get(target).copied(),
                TaxonomyError::CreatedKeyCollision { l2 } | TaxonomyError::EmptyCreate { l2 } => {
                    anchors.get(l2).copied()
                }
                TaxonomyError::InvalidIdentifier { id, .. } => anchors.get(id).copied(),
                TaxonomyError::EmptySystemName => Some(system_line),
                _ => None,
            };
            diags.push(Diagnostic::error(line, e.to_string()));
            ConfigReport {
                model: None,
                diagnostics: diags,
            }
        }
    }
}

/// Parses a configuration document into a model, failing on any error.
pub fn parse_config(text: &str) -> Result<ComponentModel, ConfigError> {
    let report = validate_config(text);
    match report.model {
        Some(model) if report.errors().next().is_none() => Ok(model),
        _ => Err(ConfigError(report.errors().cloned().collect())),
    }
}

/// An editable configuration listing every reference functionality with no
/// action assigned.
pub fn config_skeleton() -> String {
    let mut out = String::new();
    out.push_str("# Component configuration.\n");
    out.push_str("# Give every level-two functionality exactly one action:\n");
    out.push_str("#   apply      keep it as a single component\n");
    out.push_str("#   subdivide  split it; list two or more `components`\n");
    out.push_str("#   drop       the system has no matching feature\n");
    out.push_str("# New level-two functionalities go in [[create]] tables:\n");
    out.push_str("#   [[create]]\n#   l1 = \"data\"\n#   l2 = \"label_data\"\n#   components = [\"Label data\"]\n\n");
    out.push_str("system_name = \"\"\n");
    for reference in REFERENCE.iter() {
        out.push_str(&format!(
            "\n# {} / {}: {}\n[l2.{}]\naction = \"\"\n",
            reference.l1_id.title(),
            reference.name,
            reference.description,
            reference.l2_id
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply_all() -> Vec<ResolutionAction> {
        REFERENCE
            .iter()
            .map(|r| ResolutionAction::apply(r.l2_id))
            .collect()
    }

    #[test]
    fn reference_shape() {
        let reference = load_reference();
        assert_eq!(reference.len(), 9);
        let count = |l1| reference.iter().filter(|r| r.l1_id == l1).count();
        assert_eq!(
            (count(L1::Data), count(L1::Problem), count(L1::Model)),
            (4, 1, 4)
        );
        let explain = reference
            .iter()
            .find(|r| r.l2_id == "explain_model")
            .unwrap();
        assert_eq!(explain.l1_id, L1::Model);
        assert!(explain
            .description
            .contains("performance, cases for making accurate or inaccurate predictions"));
        assert_eq!(load_reference(), reference);
        let keys: HashSet<_> = reference.iter().map(|r| (r.l1_id, r.l2_id)).collect();
        assert_eq!(keys.len(), 9);
    }

    #[test]
    fn identity_resolution() {
        let model = resolve_model("Plain", &apply_all()).unwrap();
        assert_eq!(model.len(), 9);
        assert!(model
            .components
            .iter()
            .all(|c| c.comp_id == c.l2_id && c.origin == ActionKind::Apply));
        let order: Vec<_> = REFERENCE.iter().map(|r| r.l2_id.to_string()).collect();
        assert_eq!(model.canonical_order(), order);
    }

    #[test]
    fn drop_everything_is_empty() {
        let actions: Vec<_> = REFERENCE
            .iter()
            .map(|r| ResolutionAction::drop(r.l2_id))
            .collect();
        assert_eq!(resolve_model("X", &actions), Err(TaxonomyError::EmptyModel));
    }

    #[test]
    fn resolution_errors() {
        let mut actions = apply_all();
        actions.push(ResolutionAction::apply("open_dataset"));
        assert!(matches!(
            resolve_model("X", &actions),
            Err(TaxonomyError::DuplicateTarget { .. })
        ));

        let mut actions = apply_all();
        actions[0] = ResolutionAction::apply("open_a_dataset");
        assert!(matches!(
            resolve_model("X", &actions),
            Err(TaxonomyError::UnknownL2Target { .. })
        ));

        let actions = apply_all()[1..].to_vec();
        assert_eq!(
            resolve_model("X", &actions),
            Err(TaxonomyError::MissingL2 {
                l2: "open_dataset".into()
            })
        );

        let mut actions = apply_all();
        actions[6] = ResolutionAction::subdivide(
            "explain_model",
            vec![ComponentSpec::from_label("See PDP")],
        );
        assert!(matches!(
            resolve_model("X", &actions),
            Err(TaxonomyError::SubdivideTooFew { count: 1, .. })
        ));

        let mut actions = apply_all();
        actions[6] = ResolutionAction::subdivide(
            "explain_model",
            vec![
                ComponentSpec::new("compare_models", "a"),
                ComponentSpec::new("b", "b"),
            ],
        );
        assert_eq!(
            resolve_model("X", &actions),
            Err(TaxonomyError::DuplicateComponentId {
                comp_id: "compare_models".into()
            })
        );

        let mut actions = apply_all();
        actions.push(ResolutionAction::create(
            L1::Data,
            "explore_dataset",
            vec![ComponentSpec::from_label("x")],
        ));
        assert!(matches!(
            resolve_model("X", &actions),
            Err(TaxonomyError::CreatedKeyCollision { .. })
        ));

        let mut actions = apply_all();
        actions.push(ResolutionAction::create(L1::Data, "label_data", vec![]));
        assert!(matches!(
            resolve_model("X", &actions),
            Err(TaxonomyError::EmptyCreate { .. })
        ));
    }

    #[test]
    fn created_components_follow_their_goal() {
        let mut actions = apply_all();
        actions.push(ResolutionAction::create(
            L1::Problem,
            "discover_problems",
            vec![ComponentSpec::from_label("Discover problems")],
        ));
        let model = resolve_model("X", &actions).unwrap();
        assert_eq!(model.len(), 10);
        assert_eq!(model.index_of("discover_problems"), Some(5));
        assert_eq!(model.components[5].origin, ActionKind::Create);
    }

    #[test]
    fn slugs() {
        assert_eq!(
            slugify("See partial dependency plots"),
            "see_partial_dependency_plots"
        );
        assert_eq!(
            slugify("  Select a target-metric!"),
            "select_a_target_metric"
        );
    }

    #[test]
    fn skeleton_lists_every_functionality_unassigned() {
        let skeleton = config_skeleton();
        let report = validate_config(&skeleton);
        assert!(report.model.is_none());
        for r in REFERENCE.iter() {
            assert!(report
                .diagnostics
                .iter()
                .any(|d| d.message == format!("`{}` has no action assigned", r.l2_id)));
        }
    }

    #[test]
    fn config_missing_entry_is_named() {
        let text = "system_name = \"S\"\n[l2.open_dataset]\naction = \"apply\"\n";
        let report = validate_config(text);
        assert!(!report.is_ok());
        assert!(report
            .diagnostics
            .iter()
            .any(|d| d.message.contains("`explore_dataset` is missing")));
    }

    #[test]
    fn config_diagnostics_are_line_anchored() {
        let mut text = String::from("system_name = \"S\"\n");
        for r in REFERENCE.iter() {
            text.push_str(&format!("[l2.{}]\naction = \"apply\"\n", r.l2_id));
        }
        text.push_str("[l2.bogus]\naction = \"apply\"\n");
        let report = validate_config(&text);
        let bogus = report
            .diagnostics
            .iter()
            .find(|d| d.message.contains("bogus"))
            .unwrap();
        assert_eq!(bogus.line, Some(20));
    }

    #[test]
    fn create_beside_applied_is_warned() {
        let mut text = String::from("system_name = \"S\"\n");
        for r in REFERENCE.iter() {
            text.push_str(&format!("[l2.{}]\naction = \"apply\"\n", r.l2_id));
        }
        text.push_str(
            "[[create]]\nl1 = \"data\"\nl2 = \"label_data\"\ncomponents = [\"Label data\"]\n",
        );
        let report = validate_config(&text);
        assert!(report.is_ok());
        assert_eq!(report.model.as_ref().unwrap().len(), 10);
        assert!(report
            .diagnostics
            .iter()
            .any(|d| d.severity == Severity::Warning && d.line == Some(20)));
    }

    #[test]
    fn model_json_round_trip() {
        let model = resolve_model("Plain", &apply_all()).unwrap();
        let text = model.to_canonical_json();
        assert_eq!(ComponentModel::from_json(&text).unwrap(), model);
        assert_eq!(
            text,
            ComponentModel::from_json(&text)
                .unwrap()
                .to_canonical_json()
        );
    }

    #[test]
    fn alignment_needs_two() {
        let model = resolve_model("Plain", &apply_all()).unwrap();
        assert_eq!(
            align_models(&[&model]),
            Err(TaxonomyError::FewerThanTwoModels(1))
        );
    }

    #[test]
    fn identical_models_align_identically() {
        let model = resolve_model("Plain", &apply_all()).unwrap();
        let map = align_models(&[&model, &model]).unwrap();
        assert_eq!(map.rows.len(), 9);
        for row in &map.rows {
            assert_eq!(row.members[0], row.members[1]);
            assert_eq!(row.members[0], vec![row.l2_id.clone()]);
        }
        assert!(map.unaligned.iter().all(Vec::is_empty));
    }
}
