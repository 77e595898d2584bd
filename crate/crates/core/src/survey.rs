//! Attitudinal data: per-component Likert ratings and SUS responses.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{ComponentModel, L1};

pub const RATINGS_FILE: &str = "ratings.csv";
pub const SUS_FILE: &str = "sus.csv";
const RATINGS_HEADER: [&str; 4] = ["user_id", "comp_id", "efficiency", "effectiveness"];
const SUS_ITEMS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SurveyError {
    #[error("no ratings to summarize")]
    EmptyRatings,
    #[error("{file}:{line}: {message}")]
    Malformed {
        file: String,
        line: u64,
        message: String,
    },
    #[error("{file}: header must be `{expected}`, found `{found}`")]
    BadHeader {
        file: String,
        expected: String,
        found: String,
    },
    #[error("{file}:{line}: {column} = {value} is outside 1..5")]
    OutOfRange {
        file: String,
        line: u64,
        column: String,
        value: i64,
    },
    #[error("rating {value} is outside 1..5")]
    InvalidRating { value: u8 },
    #[error("unknown component `{comp_id}`")]
    UnknownComponent { comp_id: String },
    #[error("user `{user_id}` rated component `{comp_id}` more than once")]
    DuplicateRating { user_id: String, comp_id: String },
    #[error("user `{user_id}` has more than one SUS response")]
    DuplicateSus { user_id: String },
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
}

/// A Likert score, 1 ("Very Hard") through 5 ("Very Easy").
pub type Likert = u8;

fn check_likert(value: Likert) -> Result<Likert, SurveyError> {
    if (1..=5).contains(&value) {
        Ok(value)
    } else {
        Err(SurveyError::InvalidRating { value })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentRating {
    pub user_id: String,
    pub comp_id: String,
    pub efficiency: Likert,
    pub effectiveness: Likert,
}

impl ComponentRating {
    pub fn new(
        user_id: &str,
        comp_id: &str,
        efficiency: Likert,
        effectiveness: Likert,
    ) -> Result<Self, SurveyError> {
        Ok(ComponentRating {
            user_id: user_id.to_string(),
            comp_id: comp_id.to_string(),
            efficiency: check_likert(efficiency)?,
            effectiveness: check_likert(effectiveness)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SusResponse {
    pub user_id: String,
    pub items: [Likert; SUS_ITEMS],
}

impl SusResponse {
    pub fn new(user_id: &str, items: [Likert; SUS_ITEMS]) -> Result<Self, SurveyError> {
        for item in items {
            check_likert(item)?;
        }
        Ok(SusResponse {
            user_id: user_id.to_string(),
            items,
        })
    }
}

/// Standard SUS score in `[0, 100]`. Odd-numbered items are positively
/// worded and contribute `item - 1`; even-numbered items contribute
/// `5 - item`. The sum is scaled by 2.5.
pub fn sus_score(response: &SusResponse) -> f64 {
    let sum: u32 = response
        .items
        .iter()
        .enumerate()
        .map(|(i, &item)| {
            if i % 2 == 0 {
                u32::from(item) - 1
            } else {
                5 - u32::from(item)
            }
        })
        .sum();
    f64::from(sum) * 2.5
}

/// SUS score per user.
pub fn sus_scores(responses: &[SusResponse]) -> BTreeMap<String, f64> {
    responses
        .iter()
        .map(|r| (r.user_id.clone(), sus_score(r)))
        .collect()
}

/// Five-number summary with Tukey hinges and 1.5 × IQR whiskers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub n: usize,
    pub min: f64,
    pub lower_hinge: f64,
    pub median: f64,
    pub upper_hinge: f64,
    pub max: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

impl BoxStats {
    /// Summarizes `values`; `None` when empty. Hinges are the medians of the
    /// lower and upper halves, with the median in both halves when `n` is
    /// odd.
    pub fn from_values(values: &[f64]) -> Option<BoxStats> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let lower_hinge = median_sorted(&sorted[..n.div_ceil(2)]);
        let upper_hinge = median_sorted(&sorted[n / 2..]);
        let reach = 1.5 * (upper_hinge - lower_hinge);
        let (fence_low, fence_high) = (lower_hinge - reach, upper_hinge + reach);
        let inside = || {
            sorted
                .iter()
                .copied()
                .filter(|&v| v >= fence_low && v <= fence_high)
        };
        Some(BoxStats {
            n,
            min: sorted[0],
            lower_hinge,
            median: median_sorted(&sorted),
            upper_hinge,
            max: sorted[n - 1],
            whisker_low: inside().next().unwrap_or(lower_hinge),
            whisker_high: inside().next_back().unwrap_or(upper_hinge),
            outliers: sorted
                .iter()
                .copied()
                .filter(|&v| v < fence_low || v > fence_high)
                .collect(),
        })
    }
}

/// Box statistics for a list of Likert ratings.
pub fn likert_box(ratings: &[Likert]) -> Result<BoxStats, SurveyError> {
    for &r in ratings {
        check_likert(r)?;
    }
    let values: Vec<f64> = ratings.iter().map(|&r| f64::from(r)).collect();
    BoxStats::from_values(&values).ok_or(SurveyError::EmptyRatings)
}

/// Efficiency and effectiveness summaries for one component. Both are
/// `None` when nobody rated the component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentAttitude {
    pub comp_id: String,
    pub efficiency: Option<BoxStats>,
    pub effectiveness: Option<BoxStats>,
}

impl ComponentAttitude {
    pub fn no_data(&self) -> bool {
        self.efficiency.is_none()
    }
}

/// Ratings pooled over every component of one level-two functionality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Attitude {
    pub l1_id: L1,
    pub l2_id: String,
    pub efficiency: Option<BoxStats>,
    pub effectiveness: Option<BoxStats>,
}

fn summarize<'a>(
    ratings: impl Iterator<Item = &'a ComponentRating> + Clone,
) -> (Option<BoxStats>, Option<BoxStats>) {
    let eff: Vec<f64> = ratings.clone().map(|r| f64::from(r.efficiency)).collect();
    let fx: Vec<f64> = ratings.map(|r| f64::from(r.effectiveness)).collect();
    (BoxStats::from_values(&eff), BoxStats::from_values(&fx))
}

/// One entry per terminal component, in canonical order.
pub fn component_attitudes(
    ratings: &[ComponentRating],
    model: &ComponentModel,
) -> Result<Vec<ComponentAttitude>, SurveyError> {
    if let Some(r) = ratings
        .iter()
        .find(|r| model.component(&r.comp_id).is_none())
    {
        return Err(SurveyError::UnknownComponent {
            comp_id: r.comp_id.clone(),
        });
    }
    Ok(model
        .components
        .iter()
        .map(|c| {
            let (efficiency, effectiveness) =
                summarize(ratings.iter().filter(|r| r.comp_id == c.comp_id));
            ComponentAttitude {
                comp_id: c.comp_id.clone(),
                efficiency,
                effectiveness,
            }
        })
        .collect())
}

/// One entry per level-two functionality of the model, in canonical order.
pub fn l2_attitudes(
    ratings: &[ComponentRating],
    model: &ComponentModel,
) -> Result<Vec<L2Attitude>, SurveyError> {
    if let Some(r) = ratings
        .iter()
        .find(|r| model.component(&r.comp_id).is_none())
    {
        return Err(SurveyError::UnknownComponent {
            comp_id: r.comp_id.clone(),
        });
    }
    Ok(model
        .l2_order()
        .into_iter()
        .map(|l2| {
            let (efficiency, effectiveness) = summarize(
                ratings
                    .iter()
                    .filter(|r| model.component(&r.comp_id).is_some_and(|c| c.l2_id == l2)),
            );
            L2Attitude {
                l1_id: model.l1_of_l2(&l2).expect("l2 comes from model"),
                l2_id: l2,
                efficiency,
                effectiveness,
            }
        })
        .collect())
}

/// Attitudinal summaries for one model, per component and per level-two
/// functionality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attitudes {
    pub model_digest: String,
    pub components: Vec<ComponentAttitude>,
    pub l2: Vec<L2Attitude>,
    /// Distinct users with at least one component rating.
    pub respondents: usize,
}

impl Attitudes {
    pub fn compute(survey: &SurveyBundle, model: &ComponentModel) -> Result<Self, SurveyError> {
        let respondents = survey
            .ratings
            .iter()
            .map(|r| r.user_id.as_str())
            .collect::<HashSet<_>>()
            .len();
        Ok(Attitudes {
            model_digest: model.digest(),
            components: component_attitudes(&survey.ratings, model)?,
            l2: l2_attitudes(&survey.ratings, model)?,
            respondents,
        })
    }
}

/// Ratings and SUS responses for one system's participants.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SurveyBundle {
    pub ratings: Vec<ComponentRating>,
    pub sus: Vec<SusResponse>,
}

impl SurveyBundle {
    /// Checks component ids and uniqueness of (user, component) and SUS users.
    pub fn validate(&self, model: &ComponentModel) -> Result<(), SurveyError> {
        let mut seen = HashSet::new();
        for r in &self.ratings {
            if model.component(&r.comp_id).is_none() {
                return Err(SurveyError::UnknownComponent {
                    comp_id: r.comp_id.clone(),
                });
            }
            if !seen.insert((&r.user_id, &r.comp_id)) {
                return Err(SurveyError::DuplicateRating {
                    user_id: r.user_id.clone(),
                    comp_id: r.comp_id.clone(),
                });
            }
        }
        let mut users = HashSet::new();
        for s in &self.sus {
            if !users.insert(&s.user_id) {
                return Err(SurveyError::DuplicateSus {
                    user_id: s.user_id.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn ratings_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(RATINGS_HEADER).expect("in-memory write");
        for r in &self.ratings {
            w.write_record([
                &r.user_id,
                &r.comp_id,
                &r.efficiency.to_string(),
                &r.effectiveness.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn sus_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<String> = std::iter::once("user_id".to_string())
            .chain((1..=SUS_ITEMS).map(|i| format!("q{i}")))
            .collect();
        w.write_record(&header).expect("in-memory write");
        for s in &self.sus {
            let row: Vec<String> = std::iter::once(s.user_id.clone())
                .chain(s.items.iter().map(|i| i.to_string()))
                .collect();
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

fn read_table(
    text: &str,
    file: &str,
    expected: &[String],
) -> Result<Vec<(u64, Vec<String>)>, SurveyError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let malformed = |line: u64, e: csv::Error| SurveyError::Malformed {
        file: file.into(),
        line,
        message: e.to_string(),
    };
    let header = reader.headers().map_err(|e| malformed(1, e))?.clone();
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(SurveyError::BadHeader {
            file: file.into(),
            expected: expected.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e)
        })?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    Ok(rows)
}

fn parse_score(file: &str, line: u64, column: &str, text: &str) -> Result<Likert, SurveyError> {
    let value: i64 = text.parse().map_err(|_| SurveyError::Malformed {
        file: file.into(),
        line,
        message: format!("{column} = `{text}` is not an integer"),
    })?;
    if !(1..=5).contains(&value) {
        return Err(SurveyError::OutOfRange {
            file: file.into(),
            line,
            column: column.into(),
            value,
        });
    }
    Ok(value as Likert)
}

/// Parses `ratings.csv` content.
pub fn parse_ratings(text: &str) -> Result<Vec<ComponentRating>, SurveyError> {
    let header: Vec<String> = RATINGS_HEADER.iter().map(|s| s.to_string()).collect();
    read_table(text, RATINGS_FILE, &header)?
        .into_iter()
        .map(|(line, row)| {
            Ok(ComponentRating {
                user_id: row[0].clone(),
                comp_id: row[1].clone(),
                efficiency: parse_score(RATINGS_FILE, line, "efficiency", &row[2])?,
                effectiveness: parse_score(RATINGS_FILE, line, "effectiveness", &row[3])?,
            })
        })
        .collect()
}

/// Parses `sus.csv` content.
pub fn parse_sus(text: &str) -> Result<Vec<SusResponse>, SurveyError> {
    let header: Vec<String> = std::iter::once("user_id".to_string())
        .chain((1..=SUS_ITEMS).map(|i| format!("q{i}")))
        .collect();
    read_table(text, SUS_FILE, &header)?
        .into_iter()
        .map(|(line, row)| {
            let mut items = [0; SUS_ITEMS];
            for (i, item) in items.iter_mut().enumerate() {
                *item = parse_score(SUS_FILE, line, &header[i + 1], &row[i + 1])?;
            }
            Ok(SusResponse {
                user_id: row[0].clone(),
                items,
            })
        })
        .collect()
}

/// Loads `ratings.csv` and `sus.csv` from `dir`. A missing file counts as
/// an empty table.
pub fn load_surveys(dir: &Path, model: &ComponentModel) -> Result<SurveyBundle, SurveyError> {
    let read = |name: &str| -> Result<Option<String>, SurveyError> {
        let path = dir.join(name);
        match fs::read_to_string(&path) {
            Ok(text) => Ok(Some(text)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(SurveyError::Io {
                path,
                message: e.to_string(),
            }),
        }
    };
    let bundle = SurveyBundle {
        ratings: read(RATINGS_FILE)?
            .map(|t| parse_ratings(&t))
            .transpose()?
            .unwrap_or_default(),
        sus: read(SUS_FILE)?
            .map(|t| parse_sus(&t))
            .transpose()?
            .unwrap_or_default(),
    };
    bundle.validate(model)?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::{load_reference, resolve_model, ResolutionAction};

    fn sus(items: [u8; 10]) -> f64 {
        sus_score(&SusResponse::new("u", items).unwrap())
    }

    #[test]
    fn sus_reference_patterns() {
        assert_eq!(sus([3; 10]), 50.0);
        assert_eq!(sus([5, 1, 5, 1, 5, 1, 5, 1, 5, 1]), 100.0);
        assert_eq!(sus([1, 5, 1, 5, 1, 5, 1, 5, 1, 5]), 0.0);
        assert!(SusResponse::new("u", [0; 10]).is_err());
    }

    #[test]
    fn box_of_five() {
        let b = likert_box(&[1, 2, 3, 4, 5]).unwrap();
        assert_eq!(
            (b.min, b.lower_hinge, b.median, b.upper_hinge, b.max),
            (1.0, 2.0, 3.0, 4.0, 5.0)
        );
        assert!(b.outliers.is_empty());
        assert_eq!((b.whisker_low, b.whisker_high), (1.0, 5.0));
    }

    #[test]
    fn box_of_constant() {
        let b = likert_box(&[3, 3, 3, 3]).unwrap();
        assert_eq!(
            [b.min, b.lower_hinge, b.median, b.upper_hinge, b.max],
            [3.0; 5]
        );
    }

    #[test]
    fn box_outliers() {
        let b = likert_box(&[1, 4, 4, 4, 4, 5]).unwrap();
        assert_eq!((b.lower_hinge, b.upper_hinge), (4.0, 4.0));
        assert_eq!(b.outliers, vec![1.0, 5.0]);
        assert_eq!((b.whisker_low, b.whisker_high), (4.0, 4.0));
        assert_eq!(likert_box(&[]), Err(SurveyError::EmptyRatings));
        assert_eq!(
            likert_box(&[6]),
            Err(SurveyError::InvalidRating { value: 6 })
        );
    }

    fn plain_model() -> ComponentModel {
        let actions: Vec<_> = load_reference()
            .iter()
            .map(|r| ResolutionAction::apply(r.l2_id))
            .collect();
        resolve_model("Plain", &actions).unwrap()
    }

    #[test]
    fn attitudes_cover_every_component() {
        let model = plain_model();
        let ratings = vec![ComponentRating::new("u1", "explain_model", 2, 4).unwrap()];
        let att = component_attitudes(&ratings, &model).unwrap();
        assert_eq!(att.len(), 9);
        let explain = att.iter().find(|a| a.comp_id == "explain_model").unwrap();
        assert_eq!(explain.efficiency.as_ref().unwrap().median, 2.0);
        assert_eq!(explain.effectiveness.as_ref().unwrap().max, 4.0);
        assert_eq!(att.iter().filter(|a| a.no_data()).count(), 8);

        let bad = vec![ComponentRating::new("u1", "see_pdp", 2, 4).unwrap()];
        assert!(matches!(
            component_attitudes(&bad, &model),
            Err(SurveyError::UnknownComponent { .. })
        ));
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let bundle = SurveyBundle {
            ratings: vec![ComponentRating::new("u1", "open_dataset", 5, 4).unwrap()],
            sus: vec![SusResponse::new("u1", [4, 2, 4, 2, 4, 2, 4, 2, 4, 2]).unwrap()],
        };
        assert_eq!(
            parse_ratings(&bundle.ratings_csv()).unwrap(),
            bundle.ratings
        );
        assert_eq!(parse_sus(&bundle.sus_csv()).unwrap(), bundle.sus);

        let err = parse_ratings(
            "user_id,comp_id,efficiency,effectiveness\nu1,open_dataset,5,4\nu2,open_dataset,9,4\n",
        )
        .unwrap_err();
        assert_eq!(
            err,
            SurveyError::OutOfRange {
                file: RATINGS_FILE.into(),
                line: 3,
                column: "efficiency".into(),
                value: 9
            }
        );
        assert!(matches!(
            parse_ratings("user,comp_id,efficiency,effectiveness\n"),
            Err(SurveyError::BadHeader { .. })
        ));
        assert!(matches!(
            parse_ratings("user_id,comp_id,efficiency,effectiveness\nu1,x,4.5,4\n"),
            Err(SurveyError::Malformed { line: 2, .. })
        ));
        assert!(matches!(
            parse_sus("user_id,q1\nu1,3\n"),
            Err(SurveyError::BadHeader { .. })
        ));
    }

    #[test]
    fn duplicate_rows_rejected() {
        let model = plain_model();
        let r = ComponentRating::new("u1", "open_dataset", 5, 4).unwrap();
        let bundle = SurveyBundle {
            ratings: vec![r.clone(), r],
            sus: vec![],
        };
        assert!(matches!(
            bundle.validate(&model),
            Err(SurveyError::DuplicateRating { .. })
        ));
    }
}
