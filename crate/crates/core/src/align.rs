//! Levenshtein alignment between reference and hypothesis token sequences,
//! and corpus word-error-rate scoring.

use serde::Serialize;

/// One alignment operation; indices refer to the reference and hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignOp {
    Match { ref_idx: usize, hyp_idx: usize },
    Substitute { ref_idx: usize, hyp_idx: usize },
    Delete { ref_idx: usize },
    Insert { hyp_idx: usize },
}

/// Minimal-cost alignment; replaying the operations maps the reference to
/// the hypothesis exactly.
#[derive(Debug, Clone, Default)]
pub struct Alignment {
    pub ops: Vec<AlignOp>,
}

impl Alignment {
    /// Alignment that deletes every reference token (used when decoding
    /// fails outright).
    pub fn all_deletions(ref_len: usize) -> Alignment {
        Alignment {
            ops: (0..ref_len).map(|i| AlignOp::Delete { ref_idx: i }).collect(),
        }
    }

    pub fn cost(&self) -> usize {
        self.ops
            .iter()
            .filter(|op| !matches!(op, AlignOp::Match { .. }))
            .count()
    }

    /// The operation covering one reference position. Every reference index
    /// is covered by exactly one Match, Substitute, or Delete.
    pub fn op_for_ref(&self, ref_idx: usize) -> Option<&AlignOp> {
        self.ops.iter().find(|op| match op {
            AlignOp::Match { ref_idx: r, .. }
            | AlignOp::Substitute { ref_idx: r, .. }
            | AlignOp::Delete { ref_idx: r } => *r == ref_idx,
            AlignOp::Insert { .. } => false,
        })
    }

    /// True when the reference token at this position has an identical
    /// aligned hypothesis token.
    pub fn ref_token_matched(&self, ref_idx: usize) -> bool {
        matches!(self.op_for_ref(ref_idx), Some(AlignOp::Match { .. }))
    }

    /// Apply the operations to the reference, reproducing the hypothesis.
    pub fn replay(&self, reference: &[String], hypothesis: &[String]) -> Vec<String> {
        let mut out = Vec::new();
        for op in &self.ops {
            match op {
                AlignOp::Match { ref_idx, .. } => out.push(reference[*ref_idx].clone()),
                AlignOp::Substitute { hyp_idx, .. } | AlignOp::Insert { hyp_idx } => {
                    out.push(hypothesis[*hyp_idx].clone())
                }
                AlignOp::Delete { .. } => {}
            }
        }
        out
    }
}

/// Minimal-cost unit-cost alignment. Backtrace ties prefer
/// match > substitution > deletion > insertion.
pub fn align(reference: &[String], hypothesis: &[String]) -> Alignment {
    let r = reference.len();
    let h = hypothesis.len();
    let mut dp = vec![vec![0usize; h + 1]; r + 1];
    for (i, row) in dp.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=h {
        dp[0][j] = j;
    }
    for i in 1..=r {
        for j in 1..=h {
            let sub = dp[i - 1][j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            dp[i][j] = sub.min(dp[i - 1][j] + 1).min(dp[i][j - 1] + 1);
        }
    }

    let mut ops = Vec::new();
    let (mut i, mut j) = (r, h);
    while i > 0 || j > 0 {
        let cur = dp[i][j];
        if i > 0 && j > 0 && reference[i - 1] == hypothesis[j - 1] && cur == dp[i - 1][j - 1] {
            ops.push(AlignOp::Match { ref_idx: i - 1, hyp_idx: j - 1 });
            i -= 1;
            j -= 1;
        } else if i > 0 && j > 0 && cur == dp[i - 1][j - 1] + 1 {
            ops.push(AlignOp::Substitute { ref_idx: i - 1, hyp_idx: j - 1 });
            i -= 1;
            j -= 1;
        } else if i > 0 && cur == dp[i - 1][j] + 1 {
            ops.push(AlignOp::Delete { ref_idx: i - 1 });
            i -= 1;
        } else {
            ops.push(AlignOp::Insert { hyp_idx: j - 1 });
            j -= 1;
        }
    }
    ops.reverse();
    Alignment { ops }
}

/// Corpus error tallies; WER = 100 * (S + D + I) / N.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct WerStats {
    pub substitutions: u64,
    pub deletions: u64,
    pub insertions: u64,
    pub ref_tokens: u64,
}

impl WerStats {
    pub fn add_alignment(&mut self, alignment: &Alignment, ref_len: usize) {
        for op in &alignment.ops {
            match op {
                AlignOp::Substitute { .. } => self.substitutions += 1,
                AlignOp::Delete { .. } => self.deletions += 1,
                AlignOp::Insert { .. } => self.insertions += 1,
                AlignOp::Match { .. } => {}
            }
        }
        self.ref_tokens += ref_len as u64;
    }

    pub fn merge(&mut self, other: &WerStats) {
        self.substitutions += other.substitutions;
        self.deletions += other.deletions;
        self.insertions += other.insertions;
        self.ref_tokens += other.ref_tokens;
    }

    pub fn errors(&self) -> u64 {
        self.substitutions + self.deletions + self.insertions
    }

    pub fn wer(&self) -> f64 {
        assert!(self.ref_tokens > 0, "WER over zero reference tokens");
        100.0 * self.errors() as f64 / self.ref_tokens as f64
    }
}

/// Aggregate WER over (reference, hypothesis) pairs.
pub fn wer(pairs: &[(Vec<String>, Vec<String>)]) -> WerStats {
    let mut stats = WerStats::default();
    for (reference, hypothesis) in pairs {
        let a = align(reference, hypothesis);
        stats.add_alignment(&a, reference.len());
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn identical_sequences_all_match() {
        let a = align(&toks("a b c"), &toks("a b c"));
        assert_eq!(a.cost(), 0);
        assert!(a.ops.iter().all(|op| matches!(op, AlignOp::Match { .. })));
    }

    #[test]
    fn single_substitution_located() {
        let r = toks("who is phil bengtson");
        let h = toks("who is phil benson");
        let a = align(&r, &h);
        assert_eq!(a.cost(), 1);
        let matches = a.ops.iter().filter(|o| matches!(o, AlignOp::Match { .. })).count();
        assert_eq!(matches, 3);
        assert_eq!(
            a.op_for_ref(3),
            Some(&AlignOp::Substitute { ref_idx: 3, hyp_idx: 3 })
        );
    }

    #[test]
    fn replay_reconstructs_hypothesis() {
        let cases = [
            ("a b c d", "a x c"),
            ("a", "x y z"),
            ("p q r", ""),
            ("", "a b"),
            ("a a a", "a a a a"),
        ];
        for (r, h) in cases {
            let (r, h) = (toks(r), toks(h));
            let a = align(&r, &h);
            assert_eq!(a.replay(&r, &h), h, "replay failed for {r:?} -> {h:?}");
        }
    }

    /// Exponential recursive oracle for the minimal cost.
    fn recursive_cost(r: &[String], h: &[String]) -> usize {
        match (r.len(), h.len()) {
            (0, n) => n,
            (m, 0) => m,
            _ => {
                let sub = recursive_cost(&r[..r.len() - 1], &h[..h.len() - 1])
                    + usize::from(r[r.len() - 1] != h[h.len() - 1]);
                let del = recursive_cost(&r[..r.len() - 1], h) + 1;
                let ins = recursive_cost(r, &h[..h.len() - 1]) + 1;
                sub.min(del).min(ins)
            }
        }
    }

    #[test]
    fn cost_matches_recursive_oracle_on_random_pairs() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(17);
        let alphabet = ["a", "b", "c"];
        for _ in 0..200 {
            let r: Vec<String> = (0..rng.gen_range(0..=6))
                .map(|_| alphabet[rng.gen_range(0..3)].to_string())
                .collect();
            let h: Vec<String> = (0..rng.gen_range(0..=6))
                .map(|_| alphabet[rng.gen_range(0..3)].to_string())
                .collect();
            assert_eq!(align(&r, &h).cost(), recursive_cost(&r, &h));
        }
    }

    #[test]
    fn wer_basics() {
        let pairs = vec![(toks("a b c"), toks("a b c")), (toks("d e"), toks("d e"))];
        assert_eq!(wer(&pairs).wer(), 0.0);

        let pairs = vec![(toks("a b c d e f g h i j"), toks("a b c d x f g h i j"))];
        let s = wer(&pairs);
        assert_eq!(s.substitutions, 1);
        assert!((s.wer() - 10.0).abs() < 1e-12);

        // order of pairs does not matter
        let p1 = vec![(toks("a b"), toks("a x")), (toks("c"), toks("c d"))];
        let p2 = vec![(toks("c"), toks("c d")), (toks("a b"), toks("a x"))];
        assert_eq!(wer(&p1).errors(), wer(&p2).errors());
        assert_eq!(wer(&p1).ref_tokens, wer(&p2).ref_tokens);
    }

    #[test]
    fn all_deletion_alignment_counts_every_token() {
        let mut s = WerStats::default();
        s.add_alignment(&Alignment::all_deletions(4), 4);
        assert_eq!(s.deletions, 4);
        assert_eq!(s.wer(), 100.0);
    }
}
