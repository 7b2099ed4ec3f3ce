//! The comparison report: one row per pruning strategy with model size,
//! keep-list size, the keep-retention audit, and WER per test set and band.

use std::collections::BTreeMap;

use serde_json::json;

pub const WER_COLUMNS: &[&str] = &[
    "general",
    "heldout",
    "tts_all",
    "tts_all_head",
    "tts_all_torso",
    "tts_all_tail",
];

#[derive(Debug, Clone)]
pub struct ReportRow {
    pub name: String,
    pub ngrams: usize,
    pub keep_size: usize,
    /// Keep-list entries present in the input model that were pruned
    /// anyway; must be zero whenever theta_keep = 0.
    pub keep_pruned: usize,
    pub size_note: String,
    pub wer: BTreeMap<String, f64>,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub rows: Vec<ReportRow>,
    pub recall40_full: f64,
    pub recall40_top3: f64,
    pub top3_features: Vec<String>,
}

impl ComparisonReport {
    pub fn row(&self, name: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("name\tngrams\tkeep_size\tkeep_pruned\tsize_note");
        for c in WER_COLUMNS {
            out.push_str(&format!("\twer_{c}"));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}",
                r.name, r.ngrams, r.keep_size, r.keep_pruned, r.size_note
            ));
            for c in WER_COLUMNS {
                match r.wer.get(*c) {
                    Some(w) => out.push_str(&format!("\t{w:.4}")),
                    None => out.push_str("\t-"),
                }
            }
            out.push('\n');
        }
        out.push_str(&format!(
            "#recall40\tall={:.4}\ttop3={:.4}\ttop3_features={}\n",
            self.recall40_full,
            self.recall40_top3,
            self.top3_features.join(",")
        ));
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<11} {:>9} {:>9} {:>7}",
            "strategy", "ngrams", "keep", "audit"
        ));
        for c in WER_COLUMNS {
            out.push_str(&format!(" {:>13}", c));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{:<11} {:>9} {:>9} {:>7}",
                r.name, r.ngrams, r.keep_size, r.keep_pruned
            ));
            for c in WER_COLUMNS {
                match r.wer.get(*c) {
                    Some(w) => out.push_str(&format!(" {:>13.2}", w)),
                    None => out.push_str(&format!(" {:>13}", "-")),
                }
            }
            if !r.size_note.is_empty() {
                out.push_str(&format!("  [{}]", r.size_note));
            }
            out.push('\n');
        }
        out.push_str(&format!(
            "recall@40: all-features {:.3}, top-3 {:.3} (top-3: {})\n",
            self.recall40_full,
            self.recall40_top3,
            self.top3_features.join(", ")
        ));
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "rows": self.rows.iter().map(|r| json!({
                "name": r.name,
                "ngrams": r.ngrams,
                "keep_size": r.keep_size,
                "keep_pruned": r.keep_pruned,
                "size_note": r.size_note,
                "wer": r.wer,
            })).collect::<Vec<_>>(),
            "recall40": {
                "all_features": self.recall40_full,
                "top3": self.recall40_top3,
                "top3_features": self.top3_features,
            },
        })
    }
}
