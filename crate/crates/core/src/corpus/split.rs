/// Splits running text into sentences.
pub trait SentenceSplitter {
    fn split<'a>(&self, text: &'a str) -> Vec<&'a str>;
}

/// Breaks after `.`, `!` or `?` (plus any closing quotes or brackets) when the
/// next non-space character is uppercase. A handful of title abbreviations
/// never end a sentence.
#[derive(Debug, Clone, Default)]
pub struct RuleSplitter;

const TERMINALS: &[char] = &['.', '!', '?'];
const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201D}', '\u{2019}'];
const TITLES: &[&str] = &[
    "mr", "mrs", "ms", "dr", "st", "jr", "sr", "prof", "gen", "sen", "rep", "gov",
];

impl SentenceSplitter for RuleSplitter {
    fn split<'a>(&self, text: &'a str) -> Vec<&'a str> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut sentences = Vec::new();
        let mut start = 0;
        let mut i = 0;
        while i < chars.len() {
            let (_, c) = chars[i];
            if !TERMINALS.contains(&c) {
                i += 1;
                continue;
            }
            let mut end = i + 1;
            while end < chars.len()
                && (TERMINALS.contains(&chars[end].1) || CLOSERS.contains(&chars[end].1))
            {
                end += 1;
            }
            let mut next = end;
            while next < chars.len() && chars[next].1.is_whitespace() {
                next += 1;
            }
            let boundary = next > end
                && next < chars.len()
                && chars[next].1.is_uppercase()
                && !(c == '.' && ends_with_title(&text[start..chars[i].0]));
            if boundary {
                let end_byte = chars.get(end).map_or(text.len(), |&(b, _)| b);
                push_trimmed(&mut sentences, &text[start..end_byte]);
                start = chars[next].0;
            }
            i = end.max(i + 1);
        }
        push_trimmed(&mut sentences, &text[start..]);
        sentences
    }
}

fn ends_with_title(before: &str) -> bool {
    let last = before
        .rsplit(|c: char| c.is_whitespace())
        .next()
        .unwrap_or_default()
        .to_lowercase();
    TITLES.contains(&last.as_str())
}

fn push_trimmed<'a>(out: &mut Vec<&'a str>, piece: &'a str) {
    let piece = piece.trim();
    if !piece.is_empty() {
        out.push(piece);
    }
}
