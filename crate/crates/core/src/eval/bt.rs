//! Bradley–Terry maximum likelihood by minorize–maximize, with Wald
//! intervals on log-strengths.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::votes::PairCounts;
use super::EvalError;

/// z for a two-sided 95% interval.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BtOptions {
    pub max_iter: usize,
    /// Stop when every strength moves by less than this relative amount.
    pub tol: f64,
}

impl Default for BtOptions {
    fn default() -> Self {
        Self { max_iter: 10_000, tol: 1e-10 }
    }
}

/// One method's fitted log-strength with its interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub method: String,
    pub bt_score: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub rank: usize,
    #[serde(rename = "n")]
    pub n_comparisons: f64,
}

/// Entries sorted by rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingResult {
    pub entries: Vec<RankEntry>,
}

impl RankingResult {
    pub fn get(&self, method: &str) -> Option<&RankEntry> {
        self.entries.iter().find(|e| e.method == method)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("ranking serializes")
    }

    /// `method,score,low,high` rows for interval plots.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,score,low,high\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{},{}\n", e.method, e.bt_score, e.ci_low, e.ci_high));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BtFit {
    pub ranking: RankingResult,
    /// Log-likelihood after each iteration, starting from uniform strengths.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

struct Problem {
    methods: Vec<String>,
    /// `w[i][j]`: effective wins of i over j, ties split in half.
    w: Vec<Vec<f64>>,
}

impl Problem {
    fn new(counts: &PairCounts) -> Result<Self, EvalError> {
        let methods = counts.methods();
        let m = methods.len();
        let idx = |s: &str| methods.binary_search_by(|x| x.as_str().cmp(s)).expect("method listed");
        let mut w = vec![vec![0.0; m]; m];
        for ((a, b), t) in &counts.tallies {
            for v in [t.wins_ab, t.wins_ba, t.ties] {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(EvalError::InvalidVote(format!("count {v} for {a}/{b}")));
                }
            }
            let (i, j) = (idx(a), idx(b));
            w[i][j] += t.wins_ab + 0.5 * t.ties;
            w[j][i] += t.wins_ba + 0.5 * t.ties;
        }
        if m < 2 || w.iter().flatten().all(|v| *v == 0.0) {
            return Err(EvalError::NoComparisons);
        }
        Ok(Self { methods, w })
    }

    fn n(&self, i: usize, j: usize) -> f64 {
        self.w[i][j] + self.w[j][i]
    }

    /// Components of the graph where `i → j` means i won something against j.
    fn components(&self, directed: bool) -> Vec<Vec<usize>> {
        let m = self.methods.len();
        let edge = |i: usize, j: usize| if directed { self.w[i][j] > 0.0 } else { self.n(i, j) > 0.0 };
        let reach = |from: usize, forward: bool| {
            let mut seen = vec![false; m];
            let mut stack = vec![from];
            seen[from] = true;
            while let Some(i) = stack.pop() {
                for j in 0..m {
                    let e = if forward { edge(i, j) } else { edge(j, i) };
                    if e && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen
        };
        let mut assigned = vec![false; m];
        let mut comps = Vec::new();
        for s in 0..m {
            if assigned[s] {
                continue;
            }
            let fwd = reach(s, true);
            let bwd = reach(s, false);
            let comp: Vec<usize> = (0..m).filter(|&j| fwd[j] && bwd[j]).collect();
            for &j in &comp {
                assigned[j] = true;
            }
            comps.push(comp);
        }
        comps
    }

    fn names(&self, comps: &[Vec<usize>]) -> Vec<Vec<String>> {
        comps.iter().map(|c| c.iter().map(|&i| self.methods[i].clone()).collect()).collect()
    }

    fn log_likelihood(&self, pi: &[f64]) -> f64 {
        let m = pi.len();
        let mut ll = 0.0;
        for i in 0..m {
            for j in 0..m {
                if self.w[i][j] > 0.0 {
                    ll += self.w[i][j] * (pi[i].ln() - (pi[i] + pi[j]).ln());
                }
            }
        }
        ll
    }
}

/// Fits strengths to pairwise counts. Ties count as half a win for each side.
///
/// Scores are `ln π` with `Σ ln π = 0`. The comparison graph must be
/// connected and every method must have both beaten and lost to someone
/// within it, otherwise the maximum likelihood is not finite.
pub fn bt_fit(counts: &PairCounts, opts: BtOptions) -> Result<BtFit, EvalError> {
    let p = Problem::new(counts)?;
    let m = p.methods.len();

    let weak = p.components(false);
    if weak.len() > 1 {
        return Err(EvalError::Disconnected { components: p.names(&weak) });
    }
    let strong = p.components(true);
    if strong.len() > 1 {
        return Err(EvalError::NotStronglyConnected { components: p.names(&strong) });
    }

    let wins: Vec<f64> = (0..m).map(|i| p.w[i].iter().sum()).collect();
    let mut pi = vec![1.0; m];
    let mut trace = vec![p.log_likelihood(&pi)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut next = vec![0.0; m];
        for i in 0..m {
            let denom: f64 = (0..m).filter(|&j| j != i).map(|j| p.n(i, j) / (pi[i] + pi[j])).sum();
            next[i] = wins[i] / denom;
        }
        let g = (next.iter().map(|v| v.ln()).sum::<f64>() / m as f64).exp();
        for v in &mut next {
            *v /= g;
        }
        let change = next.iter().zip(&pi).map(|(a, b)| ((a - b) / b).abs()).fold(0.0, f64::max);
        pi = next;
        let ll = p.log_likelihood(&pi);
        let prev = *trace.last().expect("trace seeded");
        assert!(
            ll >= prev - 1e-9 * prev.abs().max(1.0),
            "log-likelihood decreased from {prev} to {ll}"
        );
        trace.push(ll);
        if change < opts.tol {
            converged = true;
            break;
        }
    }

    let theta: Vec<f64> = pi.iter().map(|v| v.ln()).collect();
    let se = standard_errors(&p, &pi)?;
    let mut entries: Vec<RankEntry> = (0..m)
        .map(|i| RankEntry {
            method: p.methods[i].clone(),
            bt_score: theta[i],
            ci_low: theta[i] - Z95 * se[i],
            ci_high: theta[i] + Z95 * se[i],
            rank: 0,
            n_comparisons: (0..m).filter(|&j| j != i).map(|j| p.n(i, j)).sum(),
        })
        .collect();
    entries.sort_by(|a, b| b.bt_score.total_cmp(&a.bt_score).then_with(|| a.method.cmp(&b.method)));
    for (r, e) in entries.iter_mut().enumerate() {
        e.rank = r + 1;
    }
    Ok(BtFit {
        ranking: RankingResult { entries },
        log_likelihood: trace,
        iterations,
        converged,
    })
}

/// Square roots of the diagonal of the pseudo-inverse of the observed
/// information in `θ = ln π`, restricted to the `Σ θ = 0` subspace.
fn standard_errors(p: &Problem, pi: &[f64]) -> Result<Vec<f64>, EvalError> {
    let m = pi.len();
    let mut info = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in (i + 1)..m {
            let n = p.n(i, j);
            if n == 0.0 {
                continue;
            }
            let q = pi[i] / (pi[i] + pi[j]);
            let v = n * q * (1.0 - q);
            info[(i, i)] += v;
            info[(j, j)] += v;
            info[(i, j)] -= v;
            info[(j, i)] -= v;
        }
    }
    let centre = DMatrix::<f64>::from_element(m, m, 1.0 / m as f64);
    let inv = (info + &centre)
        .cholesky()
        .ok_or_else(|| EvalError::NoComparisons)?
        .inverse()
        - centre;
    Ok((0..m).map(|i| inv[(i, i)].max(0.0).sqrt()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_items_three_to_one() {
        let mut c = PairCounts::default();
        c.add("A", "B", 3.0, 1.0, 0.0);
        let fit = bt_fit(&c, BtOptions::default()).unwrap();
        let a = fit.ranking.get("A").unwrap().bt_score;
        let b = fit.ranking.get("B").unwrap().bt_score;
        assert!((a - b - 3f64.ln()).abs() < 1e-9);
        assert!((a + b).abs() < 1e-12);
        assert_eq!(fit.ranking.entries[0].method, "A");
    }

    #[test]
    fn symmetric_counts_give_equal_scores() {
        let mut c = PairCounts::default();
        c.add("A", "B", 2.0, 2.0, 0.0);
        let fit = bt_fit(&c, BtOptions::default()).unwrap();
        let a = fit.ranking.get("A").unwrap().bt_score;
        let b = fit.ranking.get("B").unwrap().bt_score;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn disconnected_graph_lists_components() {
        let mut c = PairCounts::default();
        c.add("A", "B", 1.0, 1.0, 0.0);
        c.add("C", "D", 1.0, 1.0, 0.0);
        match bt_fit(&c, BtOptions::default()) {
            Err(EvalError::Disconnected { components }) => {
                assert_eq!(components, vec![vec!["A".to_string(), "B".into()], vec!["C".into(), "D".into()]]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degenerate_inputs() {
        let mut c = PairCounts::default();
        c.add("A", "B", 0.0, 0.0, 0.0);
        assert!(matches!(bt_fit(&c, BtOptions::default()), Err(EvalError::NoComparisons)));
        let mut c = PairCounts::default();
        c.add("A", "B", 3.0, 0.0, 0.0);
        assert!(matches!(bt_fit(&c, BtOptions::default()), Err(EvalError::NotStronglyConnected { .. })));
        // A tie lets both sides "win" half a comparison.
        c.add("A", "B", 0.0, 0.0, 1.0);
        assert!(bt_fit(&c, BtOptions::default()).is_ok());
    }

    #[test]
    fn outputs() {
        let mut c = PairCounts::default();
        c.add("A", "B", 3.0, 1.0, 0.0);
        let r = bt_fit(&c, BtOptions::default()).unwrap().ranking;
        let csv = r.to_csv();
        assert!(csv.starts_with("method,score,low,high\nA,"));
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v[0]["method"], "A");
        assert_eq!(v[0]["n"], 4.0);
        assert_eq!(v[1]["rank"], 2);
    }
}
