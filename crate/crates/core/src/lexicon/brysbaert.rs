use std::io::BufRead;

use super::{LexiconEntry, LexiconError, ParseOutcome, RecordIssue, BRYSBAERT_RANGE};

const WORD_COLUMNS: &[&str] = &["word"];
const MEAN_COLUMNS: &[&str] = &["conc.m", "conc_m", "concreteness"];

/// Parses the Brysbaert concreteness norms (tab-separated, with header).
///
/// Two-word expressions are filtered out. Means outside the 1–5 scale are
/// malformed.
pub fn parse_brysbaert<R: BufRead>(reader: R) -> Result<ParseOutcome, LexiconError> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => return Err(LexiconError::MissingColumn(WORD_COLUMNS[0].into())),
    };
    let columns: Vec<String> = header
        .trim_start_matches('\u{feff}')
        .split('\t')
        .map(|c| c.trim().to_lowercase())
        .collect();
    let find = |names: &[&str]| {
        columns
            .iter()
            .position(|c| names.contains(&c.as_str()))
            .ok_or_else(|| LexiconError::MissingColumn(names[0].into()))
    };
    let word_col = find(WORD_COLUMNS)?;
    let mean_col = find(MEAN_COLUMNS)?;

    let mut outcome = ParseOutcome::default();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
        let (Some(word), Some(mean)) = (fields.get(word_col), fields.get(mean_col)) else {
            outcome.malformed.push(RecordIssue {
                line: line_no,
                reason: format!("expected at least {} fields", word_col.max(mean_col) + 1),
            });
            continue;
        };
        let word = word.trim();
        if word.contains(char::is_whitespace) {
            outcome.filtered += 1;
            continue;
        }
        match parse_mean(mean) {
            Ok(value) => {
                let entry = LexiconEntry::new(word.to_lowercase()).with_brysbaert(value);
                match entry.validate() {
                    Ok(()) => outcome.entries.push(entry),
                    Err(reason) => outcome.malformed.push(RecordIssue {
                        line: line_no,
                        reason,
                    }),
                }
            }
            Err(reason) => outcome.malformed.push(RecordIssue {
                line: line_no,
                reason,
            }),
        }
    }
    Ok(outcome)
}

fn parse_mean(field: &str) -> Result<f64, String> {
    let value: f64 = field
        .trim()
        .parse()
        .map_err(|_| format!("concreteness mean `{field}` is not a number"))?;
    if !BRYSBAERT_RANGE.contains(&value) {
        return Err(format!("concreteness mean {value} outside 1..=5"));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "Word\tBigram\tConc.M\tConc.SD\tUnknown\tTotal\tPercent_known\tSUBTLEX";

    #[test]
    fn reads_mean_column() {
        let text = format!(
            "{HEADER}\nbanana\t0\t4.93\t0.26\t0\t30\t1\t961\nBeach\t0\t4.87\t0.5\t0\t30\t1\t2000\n"
        );
        let out = parse_brysbaert(text.as_bytes()).unwrap();
        assert_eq!(out.entries.len(), 2);
        assert_eq!(out.entries[0].word, "banana");
        assert_eq!(out.entries[0].concreteness_brysbaert, Some(4.93));
        assert_eq!(out.entries[1].word, "beach");
    }

    #[test]
    fn out_of_scale_mean_is_malformed() {
        let text = format!("{HEADER}\nodd\t0\t7.2\t0\t0\t0\t0\t0\nfine\t0\t1\t0\t0\t0\t0\t0\n");
        let out = parse_brysbaert(text.as_bytes()).unwrap();
        assert_eq!(out.entries.len(), 1);
        assert_eq!(out.malformed.len(), 1);
        assert_eq!(out.malformed[0].line, 2);
    }

    #[test]
    fn missing_mean_column_is_fatal() {
        let err = parse_brysbaert("Word\tConc.SD\nx\t1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, LexiconError::MissingColumn(c) if c == "conc.m"));
        assert!(matches!(
            parse_brysbaert("".as_bytes()),
            Err(LexiconError::MissingColumn(_))
        ));
    }

    #[test]
    fn two_word_expressions_skipped() {
        let text =
            format!("{HEADER}\nice cream\t1\t4.9\t0\t0\t0\t0\t0\nshort\t0\tnope\t0\t0\t0\t0\t0\n");
        let out = parse_brysbaert(text.as_bytes()).unwrap();
        assert!(out.entries.is_empty());
        assert_eq!(out.filtered, 1);
        assert_eq!(out.malformed.len(), 1);
    }
}
