//! Objective scores, pairwise vote aggregation and the final ranking.

mod bt;
mod metrics;
mod rank;
mod votes;

use thiserror::Error;

pub use bt::{bt_fit, BtFit, BtOptions, RankEntry, RankingResult, Z95};
pub use metrics::{rmse, rmse_frames, s_obj, s_real, s_real_all, s_synth, ObjectiveScore, SYNTH_EPS};
pub use rank::{rank_with_tiebreak, FinalRank};
pub use votes::{
    mos, mos_for, parse_votes_jsonl, read_votes, votes_to_counts, votes_to_jsonl, write_votes, Factor, MosVote, PairCounts, PairInfo,
    PairTable, Tally, VoteRecord, VoteWeighting,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("no scores for clip {0}")]
    MissingClip(String),
    #[error("unknown pair {0}")]
    UnknownPair(String),
    #[error("invalid vote: {0}")]
    InvalidVote(String),
    #[error("comparison graph is disconnected: {components:?}")]
    Disconnected { components: Vec<Vec<String>> },
    #[error("some methods never win or never lose within their group: {components:?}")]
    NotStronglyConnected { components: Vec<Vec<String>> },
    #[error("no comparisons to fit")]
    NoComparisons,
    #[error("no objective score for {0}")]
    MissingObjective(String),
    #[error("parse: {0}")]
    Parse(String),
    #[error("io: {0}")]
    Io(String),
}
