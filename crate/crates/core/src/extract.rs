//! Free-text model responses to structured answers, and judging against gold.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Example, Task};
use crate::text::{find_word_seq, normalize, normalized_words, tokenize, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerKind {
    Entity,
    OptionIndex,
    UnknownMarker,
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnswerValue {
    Text(String),
    Index(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAnswer {
    pub kind: AnswerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<AnswerValue>,
    /// Byte span of the match in the response text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_span: Option<(usize, usize)>,
}

impl ParsedAnswer {
    pub fn unparseable() -> Self {
        ParsedAnswer {
            kind: AnswerKind::Unparseable,
            value: None,
            matched_span: None,
        }
    }

    pub fn unknown(span: Option<(usize, usize)>) -> Self {
        ParsedAnswer {
            kind: AnswerKind::UnknownMarker,
            value: None,
            matched_span: span,
        }
    }

    fn entity(value: &str, span: (usize, usize)) -> Self {
        ParsedAnswer {
            kind: AnswerKind::Entity,
            value: Some(AnswerValue::Text(value.to_string())),
            matched_span: Some(span),
        }
    }

    fn option(index: usize, span: Option<(usize, usize)>) -> Self {
        ParsedAnswer {
            kind: AnswerKind::OptionIndex,
            value: Some(AnswerValue::Index(index)),
            matched_span: span,
        }
    }

    pub fn entity_value(&self) -> Option<&str> {
        match (&self.kind, &self.value) {
            (AnswerKind::Entity, Some(AnswerValue::Text(s))) => Some(s),
            _ => None,
        }
    }

    pub fn option_index(&self) -> Option<usize> {
        match (&self.kind, &self.value) {
            (AnswerKind::OptionIndex, Some(AnswerValue::Index(i))) => Some(*i),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Correct,
    Incorrect,
    Unparseable,
}

impl Verdict {
    pub fn is_correct(self) -> bool {
        self == Verdict::Correct
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum JudgeError {
    #[error("example `{0}` has no gold answer")]
    MissingGold(String),
}

/// Word sequences (normalized) that mark an explicit "cannot tell" answer.
const UNKNOWN_PHRASES: [&str; 3] = ["unknown", "cannot be determined", "can t be determined"];

const RESOLUTION_CUES: [&[&str]; 7] = [
    &["refers", "to"],
    &["refer", "to"],
    &["referring", "to"],
    &["answer", "is"],
    &["answer"],
    &["antecedent", "is"],
    &["refers", "back", "to"],
];

/// A candidate occurrence: candidate index plus token range `[first, last]`.
#[derive(Debug, Clone, Copy)]
struct Hit {
    candidate: usize,
    first: usize,
    last: usize,
}

fn candidate_hits(tokens: &[Token], candidates: &[String]) -> Vec<Hit> {
    let mut hits = Vec::new();
    for (ci, c) in candidates.iter().enumerate() {
        let needle = normalized_words(c);
        for start in find_word_seq(tokens, &needle) {
            hits.push(Hit {
                candidate: ci,
                first: start,
                last: start + needle.len() - 1,
            });
        }
    }
    // A mention nested inside a longer candidate's mention belongs to the longer one.
    let snapshot = hits.clone();
    hits.retain(|h| {
        !snapshot.iter().any(|o| {
            o.candidate != h.candidate
                && o.first <= h.first
                && h.last <= o.last
                && (o.last - o.first) > (h.last - h.first)
        })
    });
    hits
}

fn unique_candidate(hits: &[Hit]) -> Option<Hit> {
    let first = *hits.first()?;
    hits.iter()
        .all(|h| h.candidate == first.candidate)
        .then_some(first)
}

fn span(tokens: &[Token], hit: Hit) -> (usize, usize) {
    (tokens[hit.first].start, tokens[hit.last].end)
}

/// Resolves a coreference answer to one of `candidates`.
///
/// One distinct candidate mentioned wins outright. With several, a mention
/// right after a resolution cue ("refers to", "answer:") decides, then the
/// final sentence; anything still ambiguous is unparseable.
pub fn extract_coref(response_text: &str, candidates: &[String]) -> ParsedAnswer {
    let tokens = tokenize(response_text);
    let hits = candidate_hits(&tokens, candidates);
    if hits.is_empty() {
        return ParsedAnswer::unparseable();
    }
    if let Some(hit) = unique_candidate(&hits) {
        return ParsedAnswer::entity(&candidates[hit.candidate], span(&tokens, hit));
    }

    let words: Vec<String> = tokens.iter().map(|t| t.word.clone()).collect();
    let mut cued: Vec<Hit> = Vec::new();
    for cue in RESOLUTION_CUES {
        let cue: Vec<String> = cue.iter().map(|s| s.to_string()).collect();
        for start in find_word_seq(&tokens, &cue) {
            let mut next = start + cue.len();
            while words.get(next).is_some_and(|w| ["the", "a", "an"].contains(&w.as_str())) {
                next += 1;
            }
            cued.extend(hits.iter().filter(|h| h.first == next).copied());
        }
    }
    if let Some(hit) = unique_candidate(&cued) {
        return ParsedAnswer::entity(&candidates[hit.candidate], span(&tokens, hit));
    }

    let last_sentence_start = response_text
        .trim_end()
        .trim_end_matches(['.', '!', '?'])
        .rfind(['.', '!', '?', '\n'])
        .map(|i| i + 1)
        .unwrap_or(0);
    if last_sentence_start > 0 {
        let tail: Vec<Hit> = hits
            .iter()
            .filter(|h| tokens[h.first].start >= last_sentence_start)
            .copied()
            .collect();
        if let Some(hit) = unique_candidate(&tail) {
            return ParsedAnswer::entity(&candidates[hit.candidate], span(&tokens, hit));
        }
    }
    ParsedAnswer::unparseable()
}

pub fn is_unknown_class(s: &str) -> bool {
    let norm = normalize(s);
    UNKNOWN_PHRASES.iter().any(|p| {
        let needle: Vec<String> = p.split(' ').map(str::to_string).collect();
        !find_word_seq(&tokenize(&norm), &needle).is_empty()
    })
}

fn unknown_span(response_text: &str) -> Option<(usize, usize)> {
    let tokens = tokenize(response_text);
    UNKNOWN_PHRASES.iter().find_map(|p| {
        let needle: Vec<String> = p.split(' ').map(str::to_string).collect();
        find_word_seq(&tokens, &needle)
            .first()
            .map(|&i| (tokens[i].start, tokens[i + needle.len() - 1].end))
    })
}

/// Resolves a multiple-choice answer to a 1-based option index.
pub fn extract_option(response_text: &str, options: &[String]) -> ParsedAnswer {
    let resolve = |index: usize, span: Option<(usize, usize)>| {
        if is_unknown_class(&options[index - 1]) {
            ParsedAnswer::unknown(span)
        } else {
            ParsedAnswer::option(index, span)
        }
    };
    let tokens = tokenize(response_text);
    let in_range = |t: &Token| {
        t.word
            .parse::<usize>()
            .ok()
            .filter(|&i| (1..=options.len()).contains(&i))
    };

    // Leading index: "2", "2.wise", "(2) wise".
    if let Some(first) = tokens.first() {
        let lead = response_text[..first.start].trim();
        if lead.is_empty() || lead == "(" {
            if let Some(i) = in_range(first) {
                return resolve(i, Some((first.start, first.end)));
            }
        }
    }
    // Isolated index: exactly one distinct in-range number anywhere.
    let numbers: Vec<(usize, &Token)> = tokens.iter().filter_map(|t| in_range(t).map(|i| (i, t))).collect();
    if let Some(&(i, t)) = numbers.first() {
        if numbers.iter().all(|(j, _)| *j == i) {
            return resolve(i, Some((t.start, t.end)));
        }
    }

    if let Some(span) = unknown_span(response_text) {
        return ParsedAnswer::unknown(Some(span));
    }

    let hits = candidate_hits(&tokens, options);
    if let Some(hit) = unique_candidate(&hits) {
        return resolve(hit.candidate + 1, Some(span(&tokens, hit)));
    }
    ParsedAnswer::unparseable()
}

/// Parses a response for `example` with the extractor its task calls for.
pub fn parse_for(example: &Example, response_text: &str) -> ParsedAnswer {
    match example.task {
        Task::Mcq => extract_option(response_text, example.option_list()),
        Task::Coref | Task::OpenQa => {
            let parsed = extract_coref(response_text, example.candidates());
            if parsed.kind == AnswerKind::Unparseable {
                if let Some(span) = unknown_span(response_text) {
                    return ParsedAnswer::unknown(Some(span));
                }
            }
            parsed
        }
    }
}

pub fn judge(parsed: &ParsedAnswer, example: &Example) -> Result<Verdict, JudgeError> {
    let gold = example
        .gold
        .as_deref()
        .ok_or_else(|| JudgeError::MissingGold(example.id.clone()))?;
    let gold_norm = normalize(gold);
    let verdict = match parsed.kind {
        AnswerKind::Unparseable => Verdict::Unparseable,
        AnswerKind::UnknownMarker => {
            if is_unknown_class(gold) {
                Verdict::Correct
            } else {
                Verdict::Incorrect
            }
        }
        AnswerKind::Entity => match parsed.entity_value() {
            Some(v) if normalize(v) == gold_norm => Verdict::Correct,
            _ => Verdict::Incorrect,
        },
        AnswerKind::OptionIndex => {
            let index = parsed.option_index().unwrap_or(0);
            let matches = example
                .option_list()
                .get(index.wrapping_sub(1))
                .is_some_and(|opt| {
                    normalize(opt) == gold_norm || normalize(&format!("{index}.{opt}")) == gold_norm
                });
            if matches {
                Verdict::Correct
            } else {
                Verdict::Incorrect
            }
        }
    };
    Ok(verdict)
}
