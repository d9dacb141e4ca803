use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::bt::RankingResult;
use super::metrics::ObjectiveScore;
use super::EvalError;

/// A method's place in the final leaderboard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalRank {
    pub method: String,
    pub rank: usize,
    pub bt_score: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Index of the overlap group, 0 for the strongest.
    pub group: usize,
    pub s_obj: Option<f64>,
}

/// Orders methods by subjective score, settling overlapping intervals with
/// the objective score.
///
/// Methods whose 95% intervals overlap, directly or through a chain of
/// overlaps, form a group. Groups are ordered by their best score; inside a
/// group of two or more the larger `s_obj` ranks first. A singleton needs no
/// objective score.
pub fn rank_with_tiebreak(ranking: &RankingResult, objective: &BTreeMap<String, ObjectiveScore>) -> Result<Vec<FinalRank>, EvalError> {
    let e = &ranking.entries;
    let m = e.len();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..m {
        for j in (i + 1)..m {
            if e[i].ci_low <= e[j].ci_high && e[j].ci_low <= e[i].ci_high {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..m {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
    let best = |g: &Vec<usize>| g.iter().map(|&i| e[i].bt_score).fold(f64::NEG_INFINITY, f64::max);
    groups.sort_by(|a, b| best(b).total_cmp(&best(a)));

    let mut out = Vec::with_capacity(m);
    for (gi, mut g) in groups.into_iter().enumerate() {
        if g.len() > 1 {
            for &i in &g {
                if !objective.contains_key(&e[i].method) {
                    return Err(EvalError::MissingObjective(e[i].method.clone()));
                }
            }
        }
        let obj = |i: usize| objective.get(&e[i].method).map(|o| o.s_obj);
        g.sort_by(|&a, &b| {
            let (oa, ob) = (obj(a).unwrap_or(0.0), obj(b).unwrap_or(0.0));
            ob.total_cmp(&oa)
                .then_with(|| e[b].bt_score.total_cmp(&e[a].bt_score))
                .then_with(|| e[a].method.cmp(&e[b].method))
        });
        for i in g {
            out.push(FinalRank {
                method: e[i].method.clone(),
                rank: out.len() + 1,
                bt_score: e[i].bt_score,
                ci_low: e[i].ci_low,
                ci_high: e[i].ci_high,
                group: gi,
                s_obj: obj(i),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::bt::RankEntry;

    fn entry(method: &str, score: f64, half: f64) -> RankEntry {
        RankEntry {
            method: method.into(),
            bt_score: score,
            ci_low: score - half,
            ci_high: score + half,
            rank: 0,
            n_comparisons: 10.0,
        }
    }

    fn obj(pairs: &[(&str, f64)]) -> BTreeMap<String, ObjectiveScore> {
        pairs.iter().map(|(m, s)| (m.to_string(), ObjectiveScore::new(1.0, *s))).collect()
    }

    #[test]
    fn overlap_resolved_by_objective() {
        let r = RankingResult { entries: vec![entry("A", 1.0, 0.5), entry("B", 0.8, 0.5), entry("C", -2.0, 0.1)] };
        let out = rank_with_tiebreak(&r, &obj(&[("A", 1.0), ("B", 2.0)])).unwrap();
        let names: Vec<&str> = out.iter().map(|f| f.method.as_str()).collect();
        assert_eq!(names, ["B", "A", "C"]);
        assert_eq!(out[2].group, 1);
        assert_eq!(out[2].rank, 3);
    }

    #[test]
    fn overlap_is_transitive() {
        // A overlaps B, B overlaps C, A does not overlap C.
        let r = RankingResult { entries: vec![entry("A", 2.0, 0.6), entry("B", 1.0, 0.6), entry("C", 0.0, 0.6)] };
        let out = rank_with_tiebreak(&r, &obj(&[("A", 1.0), ("B", 2.0), ("C", 3.0)])).unwrap();
        let names: Vec<&str> = out.iter().map(|f| f.method.as_str()).collect();
        assert_eq!(names, ["C", "B", "A"]);
        assert!(out.iter().all(|f| f.group == 0));
    }

    #[test]
    fn missing_objective_in_group() {
        let r = RankingResult { entries: vec![entry("A", 1.0, 0.5), entry("B", 0.8, 0.5)] };
        assert!(matches!(rank_with_tiebreak(&r, &obj(&[("A", 1.0)])), Err(EvalError::MissingObjective(m)) if m == "B"));
    }
}
