//! Word tokenization and normalization shared by loaders and answer parsing.

/// A maximal run of alphanumeric characters, lowercased, with its byte span
/// in the source string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub word: String,
    pub start: usize,
    pub end: usize,
}

pub fn tokenize(s: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut current: Option<(usize, String)> = None;
    for (i, ch) in s.char_indices() {
        if ch.is_alphanumeric() {
            match &mut current {
                Some((_, word)) => word.extend(lower_alnum(ch)),
                None => current = Some((i, lower_alnum(ch).collect())),
            }
        } else if let Some((start, word)) = current.take().filter(|(_, w)| !w.is_empty()) {
            out.push(Token {
                word,
                start,
                end: i,
            });
        }
    }
    if let Some((start, word)) = current.filter(|(_, w)| !w.is_empty()) {
        out.push(Token {
            word,
            start,
            end: s.len(),
        });
    }
    out
}

fn lower_alnum(ch: char) -> impl Iterator<Item = char> {
    ch.to_lowercase().filter(|c| c.is_alphanumeric())
}

const ARTICLES: [&str; 3] = ["the", "a", "an"];

/// Lowercase words with punctuation dropped and leading articles stripped.
/// A phrase consisting only of articles keeps its last word.
pub fn normalized_words(s: &str) -> Vec<String> {
    let mut words: Vec<String> = tokenize(s).into_iter().map(|t| t.word).collect();
    let leading = words
        .iter()
        .take_while(|w| ARTICLES.contains(&w.as_str()))
        .count()
        .min(words.len().saturating_sub(1));
    words.drain(..leading);
    words
}

pub fn normalize(s: &str) -> String {
    normalized_words(s).join(" ")
}

/// Start indices (in token positions) where `needle` occurs as a contiguous
/// word sequence inside `haystack`.
pub fn find_word_seq(haystack: &[Token], needle: &[String]) -> Vec<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return Vec::new();
    }
    (0..=haystack.len() - needle.len())
        .filter(|&i| {
            haystack[i..i + needle.len()]
                .iter()
                .zip(needle)
                .all(|(t, w)| &t.word == w)
        })
        .collect()
}
