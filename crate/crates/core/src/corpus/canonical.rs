use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::{validate_corpus, CorpusError, Example};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Record<'a> {
    schema_version: u32,
    #[serde(flatten)]
    example: &'a Example,
}

/// Writes one JSON object per line. Absent optionals are omitted.
pub fn canonical_write(path: &Path, examples: &[Example]) -> Result<(), CorpusError> {
    let file = fs::File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for example in examples {
        let record = Record {
            schema_version: SCHEMA_VERSION,
            example,
        };
        let line = serde_json::to_string(&record).expect("Example serializes infallibly");
        writeln!(out, "{line}").map_err(|e| CorpusError::io(path, e))?;
    }
    out.flush().map_err(|e| CorpusError::io(path, e))
}

pub fn canonical_read(path: &Path) -> Result<Vec<Example>, CorpusError> {
    let raw = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    let examples = parse_lines(&raw)?;
    validate_corpus(&examples)?;
    Ok(examples)
}

pub(crate) fn parse_lines(raw: &str) -> Result<Vec<Example>, CorpusError> {
    let mut examples = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut value: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| CorpusError::malformed(line_no, e.to_string()))?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| CorpusError::malformed(line_no, "record is not a JSON object"))?;
        let version = obj
            .remove("schema_version")
            .ok_or_else(|| CorpusError::missing(line_no, "schema_version"))?;
        let found = version
            .as_u64()
            .ok_or_else(|| CorpusError::malformed(line_no, "schema_version is not an integer"))?
            as u32;
        if found != SCHEMA_VERSION {
            return Err(CorpusError::SchemaVersionMismatch {
                line: line_no,
                expected: SCHEMA_VERSION,
                found,
            });
        }
        let example: Example = serde_json::from_value(value).map_err(|e| {
            let msg = e.to_string();
            match missing_field_name(&msg) {
                Some(field) => CorpusError::missing(line_no, field),
                None => CorpusError::malformed(line_no, msg),
            }
        })?;
        examples.push(example);
    }
    Ok(examples)
}

fn missing_field_name(msg: &str) -> Option<&str> {
    let rest = msg.strip_prefix("missing field `")?;
    rest.split('`').next()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DatasetId, Polarity, Task};

    fn sample() -> Vec<Example> {
        let mut a = Example::new("wb-1", DatasetId::Winobias, Task::Coref);
        a.text = "The carpenter admires the work of the hairdresser because he is the best.".into();
        a.gold = Some("hairdresser".into());
        a.candidate_entities = Some(vec!["carpenter".into(), "hairdresser".into()]);
        a.polarity = Polarity::Stereo;
        a.pair_group = Some("p1".into());
        let mut b = a.clone();
        b.id = "wb-2".into();
        b.polarity = Polarity::AntiStereo;
        vec![a, b]
    }

    #[test]
    fn rewrite_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let first = dir.path().join("a.jsonl");
        let second = dir.path().join("b.jsonl");
        canonical_write(&first, &sample()).unwrap();
        let back = canonical_read(&first).unwrap();
        canonical_write(&second, &back).unwrap();
        assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
        assert_eq!(back, sample());
    }

    #[test]
    fn absent_optionals_are_omitted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        canonical_write(&path, &sample()).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("{\"schema_version\":1,"));
        assert!(!text.contains("options"));
        assert!(!text.contains("null"));
    }

    #[test]
    fn unknown_schema_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        canonical_write(&path, &sample()).unwrap();
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("\"schema_version\":1", "\"schema_version\":7");
        fs::write(&path, text).unwrap();
        assert!(matches!(
            canonical_read(&path),
            Err(CorpusError::SchemaVersionMismatch { found: 7, .. })
        ));
    }

    #[test]
    fn missing_field_is_named() {
        let line = r#"{"schema_version":1,"id":"x","dataset_id":"gap","task":"coref"}"#;
        match parse_lines(line) {
            Err(CorpusError::MissingField { line: 1, field }) => assert_eq!(field, "text"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
