#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;

use chrono::{DateTime, Utc};
use evalcards_core::taxonomy::{parse_config, ComponentModel};
use evalcards_core::telemetry::{LogRecord, Session, SessionBundle};
use proptest::prelude::*;

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixture(name: &str) -> ComponentModel {
    let path = workspace_root()
        .join("fixtures/taxonomy")
        .join(format!("{name}.toml"));
    parse_config(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

pub const START_MS: i64 = 1_600_000_000_000;

/// Builds a session from (component index, dwell before the next record).
pub fn session(model: &ComponentModel, user: &str, task: &str, steps: &[(usize, u64)]) -> Session {
    let mut t = START_MS;
    let records = steps
        .iter()
        .map(|&(idx, dwell)| {
            let c = &model.components[idx];
            let r = LogRecord {
                timestamp: DateTime::<Utc>::from_timestamp_millis(t).unwrap(),
                lv1_id: c.l1_id,
                lv2_id: c.l2_id.clone(),
                comp_id: c.comp_id.clone(),
                other: None,
            };
            t += dwell as i64;
            r
        })
        .collect();
    Session {
        user_id: user.to_string(),
        system_name: model.system_name.clone(),
        task_id: task.to_string(),
        records,
        quarantined: Vec::new(),
    }
}

/// Random walks over `n` components with dwell times up to 30 minutes.
pub fn arb_steps(n: usize, max_len: usize) -> impl Strategy<Value = Vec<(usize, u64)>> {
    prop::collection::vec((0..n, 0u64..1_800_000), 1..max_len)
}

pub fn arb_bundle(model: ComponentModel) -> impl Strategy<Value = SessionBundle> {
    let n = model.len();
    prop::collection::vec(arb_steps(n, 40), 1..8).prop_map(move |walks| {
        let sessions = walks
            .iter()
            .enumerate()
            .map(|(i, w)| session(&model, &format!("u{:02}", i / 2), &format!("t{}", i % 2), w))
            .collect();
        SessionBundle::new(model.clone(), sessions).unwrap()
    })
}
