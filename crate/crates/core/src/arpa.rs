//! ARPA text format for backoff models.
//!
//! Entries are written as `log10prob TAB tokens [TAB log10backoff]` with six
//! decimal places, per-order sections, and a `\data\` header whose declared
//! counts must match the sections.

use crate::error::{Error, Result};
use crate::model::{BackoffModel, ModelBuilder};
use crate::vocab::{Vocabulary, BOS, EOS, UNK};

/// Render a model in ARPA form. Entries appear in token-id order, which is
/// stable under read/write round trips.
pub fn write_arpa(model: &BackoffModel) -> String {
    let mut out = String::new();
    out.push_str("\\data\\\n");
    for n in 1..=model.order() {
        out.push_str(&format!("ngram {}={}\n", n, model.ngram_count(n)));
    }
    for n in 1..=model.order() {
        out.push_str(&format!("\n\\{n}-grams:\n"));
        for (key, e) in model.iter_order(n) {
            let words = model.words_of(key).join(" ");
            out.push_str(&format!("{}\t{}", fmt6(e.logp), words));
            if let Some(b) = e.bow {
                out.push_str(&format!("\t{}", fmt6(b)));
            }
            out.push('\n');
        }
    }
    out.push_str("\n\\end\\\n");
    out
}

fn fmt6(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v }; // no negative zero
    format!("{v:.6}")
}

/// Parse an ARPA model. `name` is used in error messages.
pub fn read_arpa(text: &str, name: &str) -> Result<BackoffModel> {
    let mut lines = text.lines().enumerate().peekable();
    let err = |line: usize, msg: String| Error::parse(name, line + 1, msg);

    // header
    let mut found_data = false;
    for (i, line) in lines.by_ref() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if t == "\\data\\" {
            found_data = true;
            break;
        }
        return Err(err(i, format!("expected \\data\\ header, found {t:?}")));
    }
    if !found_data {
        return Err(err(0, "missing \\data\\ header".to_string()));
    }

    let mut declared: Vec<usize> = Vec::new();
    loop {
        match lines.peek() {
            Some(&(_, line)) if line.trim().starts_with("ngram ") => {
                let (i, line) = lines.next().unwrap();
                let spec = line.trim().trim_start_matches("ngram ");
                let (n_str, c_str) = spec
                    .split_once('=')
                    .ok_or_else(|| err(i, format!("malformed count line {line:?}")))?;
                let n: usize = n_str
                    .trim()
                    .parse()
                    .map_err(|_| err(i, format!("bad order {n_str:?}")))?;
                let c: usize = c_str
                    .trim()
                    .parse()
                    .map_err(|_| err(i, format!("bad count {c_str:?}")))?;
                if n != declared.len() + 1 {
                    return Err(err(i, format!("order gap: expected ngram {}", declared.len() + 1)));
                }
                declared.push(c);
            }
            Some(&(_, line)) if line.trim().is_empty() => {
                lines.next();
            }
            _ => break,
        }
    }
    if declared.is_empty() {
        return Err(err(0, "header declares no n-gram orders".to_string()));
    }
    let order = declared.len();

    let mut vocab = Vocabulary::new();
    let mut raw: Vec<(Vec<String>, f64, Option<f64>)> = Vec::new();
    let mut seen: Vec<usize> = vec![0; order];

    for n in 1..=order {
        // section header
        let mut found = false;
        for (i, line) in lines.by_ref() {
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if t == format!("\\{n}-grams:") {
                found = true;
                break;
            }
            return Err(err(i, format!("expected \\{n}-grams: section, found {t:?}")));
        }
        if !found {
            return Err(err(0, format!("missing \\{n}-grams: section")));
        }
        // entries until blank line or next section
        while let Some(&(i, line)) = lines.peek() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('\\') {
                break;
            }
            lines.next();
            let fields: Vec<&str> = t.split_whitespace().collect();
            let (tokens, bow) = if fields.len() == n + 1 {
                (&fields[1..=n], None)
            } else if fields.len() == n + 2 {
                let b: f64 = fields[n + 1]
                    .parse()
                    .map_err(|_| err(i, format!("non-numeric backoff {:?}", fields[n + 1])))?;
                if !b.is_finite() {
                    return Err(err(i, format!("non-finite backoff {b}")));
                }
                (&fields[1..=n], Some(b))
            } else {
                return Err(err(i, format!("expected {} or {} fields, found {}", n + 1, n + 2, fields.len())));
            };
            let logp: f64 = fields[0]
                .parse()
                .map_err(|_| err(i, format!("non-numeric log probability {:?}", fields[0])))?;
            if !logp.is_finite() || logp > 0.0 {
                return Err(err(i, format!("log probability {logp} out of range")));
            }
            let words: Vec<String> = tokens.iter().map(|s| s.to_string()).collect();
            if n == 1 {
                vocab.intern(&words[0]);
            }
            raw.push((words, logp, bow));
            seen[n - 1] += 1;
        }
        if seen[n - 1] != declared[n - 1] {
            return Err(err(
                0,
                format!(
                    "\\data\\ declares {} {n}-grams but section contains {}",
                    declared[n - 1],
                    seen[n - 1]
                ),
            ));
        }
    }

    // trailer
    let mut found_end = false;
    for (i, line) in lines {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if t == "\\end\\" {
            found_end = true;
        } else if found_end {
            return Err(err(i, format!("content after \\end\\: {t:?}")));
        } else {
            return Err(err(i, format!("expected \\end\\, found {t:?}")));
        }
    }
    if !found_end {
        return Err(Error::parse(name, 0, "missing \\end\\ trailer"));
    }

    let listed_unk = raw.iter().any(|(w, _, _)| w.len() == 1 && w[0] == UNK);
    let mut builder = ModelBuilder::new(order, vocab);
    if !listed_unk {
        log::warn!("{name}: no <unk> entry; assigning floor probability");
        let unk = builder.vocab().unk();
        builder.insert(&[unk], (1e-7f64).log10(), None);
    }
    for &(tok, logp) in &[(BOS, -99.0), (EOS, -99.0)] {
        if !raw.iter().any(|(w, _, _)| w.len() == 1 && w[0] == tok) {
            log::warn!("{name}: no {tok} entry; assigning sentinel");
            let id = builder.vocab().id(tok).unwrap();
            builder.insert(&[id], logp, None);
        }
    }
    for (words, logp, bow) in raw {
        let ids: Vec<u32> = {
            let mut v = Vec::with_capacity(words.len());
            for w in &words {
                match builder.vocab().id(w) {
                    Some(id) => v.push(id),
                    None => {
                        return Err(Error::parse(
                            name,
                            0,
                            format!("n-gram uses word {w:?} missing from the unigram section"),
                        ))
                    }
                }
            }
            v
        };
        builder.insert(&ids, logp, bow);
    }
    builder.build().map_err(|e| Error::parse(name, 0, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counts::count_ngrams;
    use crate::smoothing::{estimate, SmoothingConfig};

    fn sents(lines: &[&str]) -> Vec<Vec<String>> {
        lines
            .iter()
            .map(|l| l.split_whitespace().map(str::to_string).collect())
            .collect()
    }

    fn fixture_model() -> BackoffModel {
        let corpus = sents(&["a b a", "a c b", "b a a", "c a b", "a b c"]);
        let counts = count_ngrams(&corpus, 3).unwrap();
        estimate(&counts, &SmoothingConfig::default()).unwrap()
    }

    #[test]
    fn round_trip_is_byte_stable() {
        let model = fixture_model();
        let once = write_arpa(&model);
        let twice = write_arpa(&read_arpa(&once, "m").unwrap());
        assert_eq!(once, twice);
        // write . read . write . write . read is a fixpoint too
        let thrice = write_arpa(&read_arpa(&twice, "m").unwrap());
        assert_eq!(twice, thrice);
    }

    #[test]
    fn logprob_preserved_within_formatting() {
        let model = fixture_model();
        let back = read_arpa(&write_arpa(&model), "m").unwrap();
        for h in [vec![], vec!["a".to_string()], vec!["a".to_string(), "b".to_string()]] {
            for w in ["a", "b", "c", "</s>"] {
                let d = (model.logprob(&h, w) - back.logprob(&h, w)).abs();
                assert!(d < 1e-6, "history {h:?} word {w}: diff {d}");
            }
        }
    }

    #[test]
    fn declared_count_mismatch_is_rejected() {
        let model = fixture_model();
        let text = write_arpa(&model);
        let bad = text.replacen("ngram 2=", "ngram 2=4", 1);
        // replacen keeps the old digits after the inserted ones, producing a
        // different (wrong) declared count
        let e = read_arpa(&bad, "bad").unwrap_err();
        assert!(e.to_string().contains("declares"), "{e}");
    }

    #[test]
    fn order_gap_is_rejected() {
        let text = "\\data\\\nngram 2=0\n\n\\2-grams:\n\n\\end\\\n";
        assert!(read_arpa(text, "gap").is_err());
    }

    #[test]
    fn unknown_word_in_higher_order_is_rejected() {
        let text = "\\data\\\nngram 1=1\nngram 2=1\n\n\\1-grams:\n-0.301030\ta\n\n\\2-grams:\n-0.301030\tb a\n\n\\end\\\n";
        let e = read_arpa(text, "closure").unwrap_err();
        assert!(e.to_string().contains("missing from the unigram section"), "{e}");
    }

    #[test]
    fn closure_violation_is_rejected() {
        // trigram (a b a) stored without its bigram prefix (a b)
        let text = "\\data\\\nngram 1=2\nngram 2=1\nngram 3=1\n\n\\1-grams:\n-0.301030\ta\t0.000000\n-0.301030\tb\n\n\\2-grams:\n-0.301030\tb a\t0.000000\n\n\\3-grams:\n-0.301030\ta b a\n\n\\end\\\n";
        let e = read_arpa(text, "closure").unwrap_err();
        assert!(e.to_string().contains("context closure"), "{e}");
    }

    #[test]
    fn non_numeric_field_is_rejected_with_line() {
        let text = "\\data\\\nngram 1=1\n\n\\1-grams:\nxyz\ta\n\n\\end\\\n";
        let e = read_arpa(text, "nn").unwrap_err();
        assert!(e.to_string().contains("nn:5"), "{e}");
    }
}
