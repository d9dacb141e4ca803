//! Pair scheduling and the append-only logs behind it.
//!
//! Two JSONL files live in the data directory: `serves.jsonl` records every
//! new assignment with its orientation, `votes.jsonl` every accepted vote.
//! Opening a study replays both, so counters survive restarts.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vqe_core::eval::{votes_to_counts, Factor, PairCounts, PairInfo, PairTable, VoteRecord, VoteWeighting};

use crate::{StudyConfig, StudyError};

pub const VOTES_FILE: &str = "votes.jsonl";
pub const SERVES_FILE: &str = "serves.jsonl";

/// What a rater is asked to judge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAssignment {
    pub pair_id: String,
    pub clip_id: String,
    pub left_method: String,
    pub right_method: String,
    pub served_count: u64,
    pub completed_count: u64,
}

/// A vote as posted by a client. The server fills in `vote_id` and, when
/// absent, `timestamp`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteSubmission {
    pub rater_id: String,
    pub pair_id: String,
    pub left_id: String,
    pub right_id: String,
    pub rating: i64,
    pub factor: Factor,
    #[serde(default)]
    pub timestamp: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ServeEvent {
    rater_id: String,
    pair_id: String,
    left_id: String,
    right_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairProgress {
    pub pair_id: String,
    pub clip_id: String,
    pub a: String,
    pub b: String,
    pub served: u64,
    pub a_left: u64,
    pub b_left: u64,
    pub completed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub pairs_total: usize,
    pub pairs_complete: usize,
    pub votes_total: usize,
    pub votes_per_pair: u32,
    pub pairs: Vec<PairProgress>,
}

#[derive(Debug, Clone)]
struct PairState {
    pair_id: String,
    info: PairInfo,
    served: u64,
    a_left: u64,
    completed: u64,
}

impl PairState {
    fn assignment(&self, a_left: bool) -> PairAssignment {
        let (l, r) = if a_left { (&self.info.a, &self.info.b) } else { (&self.info.b, &self.info.a) };
        PairAssignment {
            pair_id: self.pair_id.clone(),
            clip_id: self.info.clip_id.clone(),
            left_method: l.clone(),
            right_method: r.clone(),
            served_count: self.served,
            completed_count: self.completed,
        }
    }
}

pub struct Study {
    pairs: Vec<PairState>,
    index: HashMap<String, usize>,
    votes_per_pair: u32,
    /// Rater → (pair index, A shown left) for the assignment awaiting a vote.
    outstanding: HashMap<String, (usize, bool)>,
    voted: HashSet<(String, String)>,
    votes: Vec<VoteRecord>,
    vote_path: PathBuf,
    vote_log: File,
    serve_path: PathBuf,
    serve_log: File,
}

impl Study {
    /// Builds the pair list from the config and replays any existing logs.
    pub fn open(config: &StudyConfig) -> Result<Self, StudyError> {
        config.validate()?;
        let clips = config.clip_ids()?;
        let conds: Vec<&str> = config.conditions().iter().map(|c| c.method_id.as_str()).collect();
        let mut pairs = Vec::new();
        for clip in &clips {
            for i in 0..conds.len() {
                for j in (i + 1)..conds.len() {
                    pairs.push(PairState {
                        pair_id: format!("{clip}:{}:{}", conds[i], conds[j]),
                        info: PairInfo { clip_id: clip.clone(), a: conds[i].into(), b: conds[j].into() },
                        served: 0,
                        a_left: 0,
                        completed: 0,
                    });
                }
            }
        }
        let index = pairs.iter().enumerate().map(|(i, p)| (p.pair_id.clone(), i)).collect();

        fs::create_dir_all(&config.data_dir).map_err(|e| StudyError::io(&config.data_dir, e))?;
        let vote_path = config.data_dir.join(VOTES_FILE);
        let serve_path = config.data_dir.join(SERVES_FILE);
        let serve_lines = read_log::<ServeEvent>(&serve_path)?;
        let vote_lines = read_log::<VoteRecord>(&vote_path)?;
        let mut study = Self {
            pairs,
            index,
            votes_per_pair: config.votes_per_pair,
            outstanding: HashMap::new(),
            voted: HashSet::new(),
            votes: Vec::new(),
            vote_log: append_handle(&vote_path)?,
            vote_path,
            serve_log: append_handle(&serve_path)?,
            serve_path,
        };
        for ev in serve_lines {
            let i = study.lookup(&ev.pair_id)?;
            let p = &mut study.pairs[i];
            let a_left = ev.left_id == p.info.a;
            p.served += 1;
            if a_left {
                p.a_left += 1;
            }
            study.outstanding.insert(ev.rater_id, (i, a_left));
        }
        for v in vote_lines {
            let i = study.lookup(&v.pair_id)?;
            study.pairs[i].completed += 1;
            if study.outstanding.get(&v.rater_id).is_some_and(|(j, _)| *j == i) {
                study.outstanding.remove(&v.rater_id);
            }
            study.voted.insert((v.rater_id.clone(), v.pair_id.clone()));
            study.votes.push(v);
        }
        Ok(study)
    }

    fn lookup(&self, pair_id: &str) -> Result<usize, StudyError> {
        self.index.get(pair_id).copied().ok_or_else(|| StudyError::UnknownPair(pair_id.to_string()))
    }

    /// The rater's pending assignment, or a fresh one: the least-completed
    /// pair still short of its target that this rater has not voted on.
    pub fn next_pair(&mut self, rater_id: &str) -> Result<PairAssignment, StudyError> {
        if rater_id.is_empty() {
            return Err(StudyError::Validation("rater_id is empty".into()));
        }
        if let Some(&(i, a_left)) = self.outstanding.get(rater_id) {
            return Ok(self.pairs[i].assignment(a_left));
        }
        let target = self.votes_per_pair as u64;
        let pick = self
            .pairs
            .iter()
            .enumerate()
            .filter(|(_, p)| p.completed < target && !self.voted.contains(&(rater_id.to_string(), p.pair_id.clone())))
            .min_by_key(|(i, p)| (p.completed, p.served, *i))
            .map(|(i, _)| i)
            .ok_or_else(|| StudyError::Exhausted(rater_id.to_string()))?;
        let p = &self.pairs[pick];
        let a_left = p.a_left * 2 <= p.served;
        let assignment = p.assignment(a_left);
        let ev = ServeEvent {
            rater_id: rater_id.to_string(),
            pair_id: p.pair_id.clone(),
            left_id: assignment.left_method.clone(),
            right_id: assignment.right_method.clone(),
        };
        append(&mut self.serve_log, &self.serve_path, &ev)?;
        let p = &mut self.pairs[pick];
        p.served += 1;
        if a_left {
            p.a_left += 1;
        }
        self.outstanding.insert(rater_id.to_string(), (pick, a_left));
        Ok(p.assignment(a_left))
    }

    /// Validates, persists and counts one vote. The duplicate check and the
    /// append happen under the same `&mut self`.
    pub fn submit(&mut self, sub: VoteSubmission, now_ms: u64) -> Result<VoteRecord, StudyError> {
        if !(1..=5).contains(&sub.rating) {
            return Err(StudyError::Validation(format!("rating {} outside 1..5", sub.rating)));
        }
        if sub.rater_id.is_empty() {
            return Err(StudyError::Validation("rater_id is empty".into()));
        }
        let i = self.lookup(&sub.pair_id)?;
        if self.voted.contains(&(sub.rater_id.clone(), sub.pair_id.clone())) {
            return Err(StudyError::Duplicate { rater_id: sub.rater_id, pair_id: sub.pair_id });
        }
        let &(j, a_left) = self
            .outstanding
            .get(&sub.rater_id)
            .filter(|(j, _)| *j == i)
            .ok_or_else(|| StudyError::NotAssigned { rater_id: sub.rater_id.clone(), pair_id: sub.pair_id.clone() })?;
        let expected = self.pairs[j].assignment(a_left);
        if sub.left_id != expected.left_method || sub.right_id != expected.right_method {
            return Err(StudyError::Validation(format!(
                "pair {} was served as {} | {}",
                sub.pair_id, expected.left_method, expected.right_method
            )));
        }
        let record = VoteRecord {
            vote_id: format!("{}@{}", sub.pair_id, sub.rater_id),
            rater_id: sub.rater_id,
            pair_id: sub.pair_id,
            left_id: sub.left_id,
            right_id: sub.right_id,
            rating: sub.rating as u8,
            factor: sub.factor,
            timestamp: sub.timestamp.unwrap_or(now_ms),
        };
        append(&mut self.vote_log, &self.vote_path, &record)?;
        self.pairs[i].completed += 1;
        self.outstanding.remove(&record.rater_id);
        self.voted.insert((record.rater_id.clone(), record.pair_id.clone()));
        self.votes.push(record.clone());
        Ok(record)
    }

    pub fn progress(&self) -> Progress {
        let target = self.votes_per_pair as u64;
        Progress {
            pairs_total: self.pairs.len(),
            pairs_complete: self.pairs.iter().filter(|p| p.completed >= target).count(),
            votes_total: self.votes.len(),
            votes_per_pair: self.votes_per_pair,
            pairs: self
                .pairs
                .iter()
                .map(|p| PairProgress {
                    pair_id: p.pair_id.clone(),
                    clip_id: p.info.clip_id.clone(),
                    a: p.info.a.clone(),
                    b: p.info.b.clone(),
                    served: p.served,
                    a_left: p.a_left,
                    b_left: p.served - p.a_left,
                    completed: p.completed,
                })
                .collect(),
        }
    }

    /// The vote log exactly as stored.
    pub fn export(&self) -> Result<Vec<u8>, StudyError> {
        match fs::read(&self.vote_path) {
            Ok(b) => Ok(b),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(StudyError::io(&self.vote_path, e)),
        }
    }

    pub fn votes(&self) -> &[VoteRecord] {
        &self.votes
    }

    pub fn pair_table(&self) -> PairTable {
        let mut t = PairTable::default();
        for p in &self.pairs {
            t.insert(p.pair_id.clone(), p.info.clone());
        }
        t
    }

    pub fn counts(&self, weighting: VoteWeighting) -> Result<PairCounts, StudyError> {
        votes_to_counts(&self.votes, &self.pair_table(), weighting).map_err(|e| StudyError::Log(e.to_string()))
    }
}

fn append_handle(path: &Path) -> Result<File, StudyError> {
    OpenOptions::new().create(true).append(true).open(path).map_err(|e| StudyError::io(path, e))
}

/// Writes one JSON line and syncs it to disk before returning.
fn append<T: Serialize>(file: &mut File, path: &Path, value: &T) -> Result<(), StudyError> {
    let mut line = serde_json::to_vec(value).map_err(|e| StudyError::Log(e.to_string()))?;
    line.push(b'\n');
    file.write_all(&line).map_err(|e| StudyError::io(path, e))?;
    file.sync_data().map_err(|e| StudyError::io(path, e))
}

/// Parses a log, dropping an unterminated last line left by an interrupted
/// write.
fn read_log<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, StudyError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(StudyError::io(path, e)),
    };
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if complete < bytes.len() {
        let f = OpenOptions::new().write(true).open(path).map_err(|e| StudyError::io(path, e))?;
        f.set_len(complete as u64).map_err(|e| StudyError::io(path, e))?;
    }
    let text = std::str::from_utf8(&bytes[..complete]).map_err(|e| StudyError::Log(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| StudyError::Log(format!("{}:{}: {e}", path.display(), n + 1))))
        .collect()
}
