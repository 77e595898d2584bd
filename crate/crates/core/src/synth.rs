//! Seeded synthetic sessions and surveys.
//!
//! Randomness comes from SplitMix64 so fixtures can be reproduced bit for
//! bit in any language; see `docs/synth-prng.md` for the exact algorithm,
//! stream layout and draw order.

use std::fs;
use std::io;
use std::path::Path;

use chrono::{TimeZone, Utc};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::exec::Execution;
use crate::json;
use crate::survey::{ComponentRating, SurveyBundle, SusResponse};
use crate::taxonomy::ComponentModel;
use crate::telemetry::{BundleError, LogRecord, Session, SessionBundle, SessionKey, PAYLOAD_L2};

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_2: u64 = 0x94D0_49BB_1331_11EB;

/// 2020-03-02T09:00:00Z, the start of the first synthetic session.
pub const BASE_EPOCH_MS: i64 = 1_583_139_600_000;
const USER_OFFSET_MS: i64 = 86_400_000;
const TASK_OFFSET_MS: i64 = 10_800_000;

/// Finalizer shared by every SplitMix64 output.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_2);
    z ^ (z >> 31)
}

/// SplitMix64 with a 64-bit state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform integer in `lo..=hi` by rejection: draws below
    /// `2^64 mod range` are discarded, the rest are reduced modulo range.
    pub fn uniform(&mut self, lo: u64, hi: u64) -> u64 {
        assert!(lo <= hi, "empty range");
        let range = hi - lo + 1;
        if range == 0 {
            return self.next_u64();
        }
        let threshold = range.wrapping_neg() % range;
        loop {
            let x = self.next_u64();
            if x >= threshold {
                return lo + x % range;
            }
        }
    }
}

/// Seed of stream `stream`: the `(stream + 1)`-th output of a SplitMix64
/// seeded with `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    mix64(master.wrapping_add(GOLDEN_GAMMA.wrapping_mul(stream.wrapping_add(1))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Archetype {
    /// Canonical order front to back, with repeats.
    Linear,
    /// Uniform random walk over all components.
    Nonlinear,
    /// Linear backbone plus repeated round trips between two components.
    Iterative,
    /// Mirror image of linear.
    Reversed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthProfile {
    pub archetype: Archetype,
    pub n_users: u32,
    pub tasks: Vec<String>,
    /// Inclusive bounds of the uniform dwell time between records.
    pub dwell_ms: (u64, u64),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iteration_pair: Option<(String, String)>,
    pub seed: u64,
}

/// Extra records allowed per component visit in linear traversals.
pub const MAX_REPEATS: u64 = 2;
/// Round trips between the iteration pair, inclusive bounds.
pub const ROUND_TRIPS: (u64, u64) = (3, 5);

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("iteration pair component `{0}` is not in the model")]
    IterationPairNotInModel(String),
    #[error("the iterative archetype needs an iteration_pair")]
    MissingIterationPair,
    #[error("iteration pair must name two different components")]
    DegenerateIterationPair,
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: io::Error },
}

impl SynthProfile {
    pub fn from_toml(text: &str) -> Result<Self, SynthError> {
        let profile: SynthProfile =
            toml::from_str(text).map_err(|e| SynthError::InvalidProfile(e.to_string()))?;
        Ok(profile)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("profile serializes")
    }

    fn check(&self, model: &ComponentModel) -> Result<Option<(usize, usize)>, SynthError> {
        if self.n_users == 0 {
            return Err(SynthError::InvalidProfile(
                "n_users must be at least 1".into(),
            ));
        }
        if self.tasks.is_empty() {
            return Err(SynthError::InvalidProfile("tasks must not be empty".into()));
        }
        for (i, task) in self.tasks.iter().enumerate() {
            if task.is_empty() || !task.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
                return Err(SynthError::InvalidProfile(format!(
                    "task id `{task}` must be non-empty [A-Za-z0-9-]"
                )));
            }
            if self.tasks[..i].contains(task) {
                return Err(SynthError::InvalidProfile(format!(
                    "task `{task}` is listed twice"
                )));
            }
        }
        if self.dwell_ms.0 > self.dwell_ms.1 {
            return Err(SynthError::InvalidProfile(
                "dwell_ms minimum exceeds maximum".into(),
            ));
        }
        if self.dwell_ms.1 > 24 * 3_600_000 {
            return Err(SynthError::InvalidProfile(
                "dwell_ms maximum exceeds one day".into(),
            ));
        }
        let pair = match (&self.iteration_pair, self.archetype) {
            (None, Archetype::Iterative) => return Err(SynthError::MissingIterationPair),
            (None, _) => None,
            (Some((a, b)), _) => {
                let ia = model
                    .index_of(a)
                    .ok_or_else(|| SynthError::IterationPairNotInModel(a.clone()))?;
                let ib = model
                    .index_of(b)
                    .ok_or_else(|| SynthError::IterationPairNotInModel(b.clone()))?;
                if ia == ib {
                    return Err(SynthError::DegenerateIterationPair);
                }
                Some((ia.min(ib), ia.max(ib)))
            }
        };
        Ok(pair)
    }

    pub fn user_ids(&self) -> Vec<String> {
        let width = self.n_users.to_string().len().max(2);
        (1..=self.n_users)
            .map(|i| format!("u{i:0width$}"))
            .collect()
    }

    fn streams_per_user(&self) -> u64 {
        self.tasks.len() as u64 + 1
    }
}

/// Component index sequence for one session.
fn component_sequence(
    rng: &mut SplitMix64,
    archetype: Archetype,
    n: usize,
    pair: Option<(usize, usize)>,
) -> Vec<usize> {
    let linear = |rng: &mut SplitMix64, pair: Option<(usize, usize)>| {
        let mut seq = Vec::new();
        for i in 0..n {
            let repeats = rng.uniform(0, MAX_REPEATS);
            seq.extend(std::iter::repeat_n(i, 1 + repeats as usize));
            if let Some((a, b)) = pair {
                if i == b {
                    for _ in 0..rng.uniform(ROUND_TRIPS.0, ROUND_TRIPS.1) {
                        seq.push(a);
                        seq.push(b);
                    }
                }
            }
        }
        seq
    };
    match archetype {
        Archetype::Linear => linear(rng, None),
        Archetype::Reversed => {
            let mut seq = linear(rng, None);
            seq.reverse();
            seq
        }
        Archetype::Iterative => linear(rng, pair),
        Archetype::Nonlinear => {
            let len = rng.uniform(n as u64, 3 * n as u64);
            (0..len)
                .map(|_| rng.uniform(0, n as u64 - 1) as usize)
                .collect()
        }
    }
}

fn payload(l2: &str, task_id: &str, step: usize) -> Option<serde_json::Value> {
    match l2 {
        "specify_problem" => Some(json!({ "parameters": { "task": task_id } })),
        "explain_model" => Some(json!({ "model": format!("model_{step}") })),
        _ => None,
    }
}

fn generate_session(
    model: &ComponentModel,
    profile: &SynthProfile,
    pair: Option<(usize, usize)>,
    user_index: usize,
    task_index: usize,
    user_id: &str,
) -> Session {
    let stream = user_index as u64 * profile.streams_per_user() + task_index as u64;
    let mut rng = SplitMix64::new(derive_seed(profile.seed, stream));
    let seq = component_sequence(&mut rng, profile.archetype, model.len(), pair);
    let task_id = &profile.tasks[task_index];
    let mut t =
        BASE_EPOCH_MS + user_index as i64 * USER_OFFSET_MS + task_index as i64 * TASK_OFFSET_MS;
    let records = seq
        .iter()
        .enumerate()
        .map(|(step, &ci)| {
            if step > 0 {
                t += rng.uniform(profile.dwell_ms.0, profile.dwell_ms.1) as i64;
            }
            let c = &model.components[ci];
            LogRecord {
                timestamp: Utc
                    .timestamp_millis_opt(t)
                    .single()
                    .expect("timestamp in range"),
                lv1_id: c.l1_id,
                lv2_id: c.l2_id.clone(),
                comp_id: c.comp_id.clone(),
                other: if PAYLOAD_L2.contains(&c.l2_id.as_str()) {
                    payload(&c.l2_id, task_id, step)
                } else {
                    None
                },
            }
        })
        .collect();
    Session {
        user_id: user_id.to_string(),
        system_name: model.system_name.clone(),
        task_id: task_id.clone(),
        records,
        quarantined: Vec::new(),
    }
}

fn generate_survey(
    model: &ComponentModel,
    profile: &SynthProfile,
    user_index: usize,
    user_id: &str,
) -> (Vec<ComponentRating>, SusResponse) {
    let stream = user_index as u64 * profile.streams_per_user() + profile.tasks.len() as u64;
    let mut rng = SplitMix64::new(derive_seed(profile.seed, stream));
    let ratings = model
        .components
        .iter()
        .map(|c| ComponentRating {
            user_id: user_id.to_string(),
            comp_id: c.comp_id.clone(),
            efficiency: rng.uniform(1, 5) as u8,
            effectiveness: rng.uniform(1, 5) as u8,
        })
        .collect();
    let mut items = [0u8; 10];
    for item in &mut items {
        *item = rng.uniform(1, 5) as u8;
    }
    (
        ratings,
        SusResponse {
            user_id: user_id.to_string(),
            items,
        },
    )
}

/// Generated logs plus matching survey tables.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub profile: SynthProfile,
    pub bundle: SessionBundle,
    pub survey: SurveyBundle,
}

pub fn generate_bundle(
    model: &ComponentModel,
    profile: &SynthProfile,
) -> Result<SynthOutput, SynthError> {
    generate_bundle_with(model, profile, Execution::default())
}

/// Generates `n_users × tasks` sessions. Every (user, task) pair and every
/// user's survey draws from its own derived stream, so the output does not
/// depend on `exec`.
pub fn generate_bundle_with(
    model: &ComponentModel,
    profile: &SynthProfile,
    exec: Execution,
) -> Result<SynthOutput, SynthError> {
    let pair = profile.check(model)?;
    let users = profile.user_ids();
    let n_tasks = profile.tasks.len();
    let sessions = exec.map_range(users.len() * n_tasks, |k| {
        let (u, t) = (k / n_tasks, k % n_tasks);
        generate_session(model, profile, pair, u, t, &users[u])
    });
    let surveys = exec.map_range(users.len(), |u| {
        generate_survey(model, profile, u, &users[u])
    });
    let mut survey = SurveyBundle::default();
    for (ratings, sus) in surveys {
        survey.ratings.extend(ratings);
        survey.sus.push(sus);
    }
    let bundle = SessionBundle::new(model.clone(), sessions)?;
    Ok(SynthOutput {
        profile: profile.clone(),
        bundle,
        survey,
    })
}

#[derive(Serialize)]
struct SynthManifest<'a> {
    profile: &'a SynthProfile,
    bundle: crate::telemetry::BundleManifest,
    ratings: usize,
    sus_responses: usize,
}

impl SynthOutput {
    /// Writes `logs/<user>_<task>.jsonl`, `surveys/ratings.csv`,
    /// `surveys/sus.csv` and `manifest.json` under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), SynthError> {
        let io_err = |path: &Path| {
            let path = path.display().to_string();
            move |source| SynthError::Io { path, source }
        };
        let logs = dir.join("logs");
        let surveys = dir.join("surveys");
        fs::create_dir_all(&logs).map_err(io_err(&logs))?;
        fs::create_dir_all(&surveys).map_err(io_err(&surveys))?;
        for s in &self.bundle.sessions {
            let path = logs.join(SessionKey::new(&s.user_id, &s.task_id).file_name());
            fs::write(&path, s.to_jsonl()).map_err(io_err(&path))?;
        }
        let ratings = surveys.join(crate::survey::RATINGS_FILE);
        fs::write(&ratings, self.survey.ratings_csv()).map_err(io_err(&ratings))?;
        let sus = surveys.join(crate::survey::SUS_FILE);
        fs::write(&sus, self.survey.sus_csv()).map_err(io_err(&sus))?;
        let manifest = SynthManifest {
            profile: &self.profile,
            bundle: self.bundle.manifest(),
            ratings: self.survey.ratings.len(),
            sus_responses: self.survey.sus.len(),
        };
        let path = dir.join("manifest.json");
        fs::write(
            &path,
            json::to_canonical_string(&manifest).expect("manifest serializes"),
        )
        .map_err(io_err(&path))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // Published SplitMix64 outputs for seed 1234567.
        let mut rng = SplitMix64::new(1_234_567);
        let expected = [
            6_457_827_717_110_365_317u64,
            3_203_168_211_198_807_973,
            9_817_491_932_198_370_423,
            4_593_380_528_125_082_431,
            16_408_922_859_458_223_821,
        ];
        for e in expected {
            assert_eq!(rng.next_u64(), e);
        }
    }

    #[test]
    fn documented_vectors() {
        let mut rng = SplitMix64::new(0);
        assert_eq!(rng.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(rng.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(derive_seed(2020, 0), 0xD812_1ACC_BF8B_8A0E);
        assert_eq!(derive_seed(2020, 2), 0x60B5_DE15_6C4E_532C);
        let mut rng = SplitMix64::new(derive_seed(2020, 0));
        let draws: Vec<u64> = (0..10).map(|_| rng.uniform(1, 5)).collect();
        assert_eq!(draws, [3, 4, 2, 4, 2, 2, 5, 4, 3, 4]);
    }

    #[test]
    fn derived_seed_is_stream_output() {
        let mut rng = SplitMix64::new(99);
        for stream in 0..5 {
            assert_eq!(derive_seed(99, stream), rng.next_u64());
        }
    }

    #[test]
    fn uniform_stays_in_range() {
        let mut rng = SplitMix64::new(7);
        let mut seen = [false; 5];
        for _ in 0..1000 {
            let v = rng.uniform(1, 5);
            assert!((1..=5).contains(&v));
            seen[v as usize - 1] = true;
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(rng.uniform(4, 4), 4);
    }

    #[test]
    fn profile_toml_round_trip() {
        let text = r#"
archetype = "iterative"
n_users = 3
tasks = ["classification", "regression"]
dwell_ms = [1000, 5000]
iteration_pair = ["explore_dataset", "specify_problem"]
seed = 7
"#;
        let p = SynthProfile::from_toml(text).unwrap();
        assert_eq!(p.archetype, Archetype::Iterative);
        assert_eq!(p.dwell_ms, (1000, 5000));
        assert_eq!(SynthProfile::from_toml(&p.to_toml()).unwrap(), p);
        assert!(SynthProfile::from_toml("archetype = \"spiral\"").is_err());
    }

    #[test]
    fn user_ids_are_padded() {
        let p = SynthProfile {
            archetype: Archetype::Linear,
            n_users: 41,
            tasks: vec!["t".into()],
            dwell_ms: (1, 2),
            iteration_pair: None,
            seed: 0,
        };
        let ids = p.user_ids();
        assert_eq!((ids[0].as_str(), ids[40].as_str()), ("u01", "u41"));
    }
}
