//! Pairwise votes, their aggregation into win counts, and MOS.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// What the rater said drove the decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Colors,
    Brightness,
    SkinTone,
    None,
}

/// One side-by-side judgement: 1 strongly prefers left, 3 is no preference,
/// 5 strongly prefers right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub vote_id: String,
    pub rater_id: String,
    pub pair_id: String,
    pub left_id: String,
    pub right_id: String,
    pub rating: u8,
    pub factor: Factor,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

impl VoteRecord {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(1..=5).contains(&self.rating) {
            return Err(EvalError::InvalidVote(format!("rating {} outside 1..5", self.rating)));
        }
        if self.left_id == self.right_id {
            return Err(EvalError::InvalidVote(format!("left and right are both {}", self.left_id)));
        }
        Ok(())
    }
}

pub fn parse_votes_jsonl(text: &str) -> Result<Vec<VoteRecord>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: VoteRecord = serde_json::from_str(line).map_err(|e| EvalError::Parse(format!("line {}: {e}", i + 1)))?;
        v.validate().map_err(|e| EvalError::Parse(format!("line {}: {e}", i + 1)))?;
        out.push(v);
    }
    Ok(out)
}

pub fn read_votes(path: &Path) -> Result<Vec<VoteRecord>, EvalError> {
    let text = fs::read_to_string(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    parse_votes_jsonl(&text)
}

pub fn votes_to_jsonl(votes: &[VoteRecord]) -> String {
    let mut out = String::new();
    for v in votes {
        out.push_str(&serde_json::to_string(v).expect("votes serialize"));
        out.push('\n');
    }
    out
}

pub fn write_votes(votes: &[VoteRecord], path: &Path) -> Result<(), EvalError> {
    let mut f = fs::File::create(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    f.write_all(votes_to_jsonl(votes).as_bytes())
        .map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))
}

/// The two conditions compared by a pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairInfo {
    pub clip_id: String,
    pub a: String,
    pub b: String,
}

/// `pair_id → PairInfo`, used to check that votes name real pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PairTable {
    pub pairs: BTreeMap<String, PairInfo>,
}

impl PairTable {
    pub fn insert(&mut self, pair_id: impl Into<String>, info: PairInfo) {
        self.pairs.insert(pair_id.into(), info);
    }

    /// Table implied by the votes themselves; the clip is the first
    /// `:`-separated field of the pair id.
    pub fn from_votes(votes: &[VoteRecord]) -> Self {
        let mut t = Self::default();
        for v in votes {
            t.pairs.entry(v.pair_id.clone()).or_insert_with(|| PairInfo {
                clip_id: v.pair_id.split(':').next().unwrap_or_default().to_string(),
                a: v.left_id.clone(),
                b: v.right_id.clone(),
            });
        }
        t
    }
}

/// How preferences of different strength enter the counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteWeighting {
    /// Ratings 1, 2, 4 and 5 all count as one win.
    #[default]
    Single,
    /// Ratings 1 and 5 count as two wins.
    Strong,
}

/// Counts for one unordered pair `(a, b)` with `a < b` by name.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub wins_ab: f64,
    pub wins_ba: f64,
    pub ties: f64,
}

impl Tally {
    pub fn total(&self) -> f64 {
        self.wins_ab + self.wins_ba + self.ties
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PairCounts {
    /// Keyed by `(a, b)` with `a < b`.
    #[serde(with = "tally_list")]
    pub tallies: BTreeMap<(String, String), Tally>,
}

mod tally_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Row {
        a: String,
        b: String,
        wins_ab: f64,
        wins_ba: f64,
        ties: f64,
    }

    pub fn serialize<S: Serializer>(m: &BTreeMap<(String, String), Tally>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Row> = m
            .iter()
            .map(|((a, b), t)| Row {
                a: a.clone(),
                b: b.clone(),
                wins_ab: t.wins_ab,
                wins_ba: t.wins_ba,
                ties: t.ties,
            })
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(String, String), Tally>, D::Error> {
        let rows = Vec::<Row>::deserialize(d)?;
        let mut m = BTreeMap::new();
        for r in rows {
            let mut c = PairCounts::default();
            c.add(&r.a, &r.b, r.wins_ab, r.wins_ba, r.ties);
            for (k, v) in c.tallies {
                let slot: &mut Tally = m.entry(k).or_default();
                slot.wins_ab += v.wins_ab;
                slot.wins_ba += v.wins_ba;
                slot.ties += v.ties;
            }
        }
        Ok(m)
    }
}

impl PairCounts {
    /// Adds `x_wins` for `x` over `y`, `y_wins` the other way, and ties.
    pub fn add(&mut self, x: &str, y: &str, x_wins: f64, y_wins: f64, ties: f64) {
        let (key, flip) = if x < y {
            ((x.to_string(), y.to_string()), false)
        } else {
            ((y.to_string(), x.to_string()), true)
        };
        let t = self.tallies.entry(key).or_default();
        if flip {
            t.wins_ab += y_wins;
            t.wins_ba += x_wins;
        } else {
            t.wins_ab += x_wins;
            t.wins_ba += y_wins;
        }
        t.ties += ties;
    }

    /// Wins of `x` over `y`, whatever the key order.
    pub fn wins(&self, x: &str, y: &str) -> f64 {
        if x < y {
            self.tallies.get(&(x.to_string(), y.to_string())).map_or(0.0, |t| t.wins_ab)
        } else {
            self.tallies.get(&(y.to_string(), x.to_string())).map_or(0.0, |t| t.wins_ba)
        }
    }

    pub fn ties(&self, x: &str, y: &str) -> f64 {
        let key = if x < y { (x.to_string(), y.to_string()) } else { (y.to_string(), x.to_string()) };
        self.tallies.get(&key).map_or(0.0, |t| t.ties)
    }

    /// Every method that appears in a tally, sorted.
    pub fn methods(&self) -> Vec<String> {
        let mut m: Vec<String> = self.tallies.keys().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
        m.sort();
        m.dedup();
        m
    }

    /// Multiplies every count by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for t in out.tallies.values_mut() {
            t.wins_ab *= c;
            t.wins_ba *= c;
            t.ties *= c;
        }
        out
    }
}

/// Folds votes into counts: 1–2 are wins for the left condition, 4–5 for the
/// right, 3 is a tie. Every vote must name a known pair and show that pair's
/// two conditions.
pub fn votes_to_counts(votes: &[VoteRecord], table: &PairTable, weighting: VoteWeighting) -> Result<PairCounts, EvalError> {
    let mut counts = PairCounts::default();
    for v in votes {
        v.validate()?;
        let info = table.pairs.get(&v.pair_id).ok_or_else(|| EvalError::UnknownPair(v.pair_id.clone()))?;
        let shown = [v.left_id.as_str(), v.right_id.as_str()];
        if !(shown == [info.a.as_str(), info.b.as_str()] || shown == [info.b.as_str(), info.a.as_str()]) {
            return Err(EvalError::InvalidVote(format!(
                "vote {} shows {}/{} but pair {} compares {}/{}",
                v.vote_id, v.left_id, v.right_id, v.pair_id, info.a, info.b
            )));
        }
        let strong = if weighting == VoteWeighting::Strong { 2.0 } else { 1.0 };
        let (l, r, t) = match v.rating {
            1 => (strong, 0.0, 0.0),
            2 => (1.0, 0.0, 0.0),
            3 => (0.0, 0.0, 1.0),
            4 => (0.0, 1.0, 0.0),
            _ => (0.0, strong, 0.0),
        };
        counts.add(&v.left_id, &v.right_id, l, r, t);
    }
    Ok(counts)
}

/// One rating of a condition against its reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MosVote {
    pub rating: u8,
    pub target_left: bool,
}

/// Mean of ratings normalized so 5 always favors the target (`r ↦ 6 − r`
/// when the target was on the left).
pub fn mos(votes: &[MosVote]) -> Result<f64, EvalError> {
    if votes.is_empty() {
        return Err(EvalError::InvalidVote("MOS needs at least one vote".into()));
    }
    let mut sum = 0.0;
    for v in votes {
        if !(1..=5).contains(&v.rating) {
            return Err(EvalError::InvalidVote(format!("rating {} outside 1..5", v.rating)));
        }
        sum += if v.target_left { 6 - v.rating } else { v.rating } as f64;
    }
    Ok(sum / votes.len() as f64)
}

/// MOS of `target` over every vote that shows it.
pub fn mos_for(votes: &[VoteRecord], target: &str) -> Result<f64, EvalError> {
    let picked: Vec<MosVote> = votes
        .iter()
        .filter(|v| v.left_id == target || v.right_id == target)
        .map(|v| MosVote {
            rating: v.rating,
            target_left: v.left_id == target,
        })
        .collect();
    mos(&picked)
}
