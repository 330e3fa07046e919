use std::collections::HashSet;
use std::path::Path;

use serde_json::Value;

use super::{Answer, SquadExample};
use crate::error::{Error, Result};

fn parse_err(path: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_owned(),
        message: message.into(),
    }
}

fn field<'a>(obj: &'a Value, key: &str, path: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| parse_err(path, format!("missing field `{key}`")))
}

fn array<'a>(obj: &'a Value, key: &str, path: &str) -> Result<&'a Vec<Value>> {
    field(obj, key, path)?
        .as_array()
        .ok_or_else(|| parse_err(&format!("{path}.{key}"), "expected an array"))
}

fn string(obj: &Value, key: &str, path: &str) -> Result<String> {
    field(obj, key, path)?
        .as_str()
        .map(str::to_owned)
        .ok_or_else(|| parse_err(&format!("{path}.{key}"), "expected a string"))
}

fn squash_whitespace(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

/// Parse a SQuAD 2.0 document (`data -> paragraphs -> qas`).
pub fn parse_squad_json(document: &str) -> Result<Vec<SquadExample>> {
    let root: Value = serde_json::from_str(document).map_err(|e| parse_err("$", e.to_string()))?;
    parse_squad_value(&root)
}

pub fn read_squad_file(path: &Path) -> Result<Vec<SquadExample>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_squad_json(&text)
}

pub fn parse_squad_value(root: &Value) -> Result<Vec<SquadExample>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (a, article) in array(root, "data", "$")?.iter().enumerate() {
        let apath = format!("data[{a}]");
        for (p, para) in array(article, "paragraphs", &apath)?.iter().enumerate() {
            let ppath = format!("{apath}.paragraphs[{p}]");
            let context = string(para, "context", &ppath)?;
            let context_chars: Vec<char> = context.chars().collect();
            for (q, qa) in array(para, "qas", &ppath)?.iter().enumerate() {
                let qpath = format!("{ppath}.qas[{q}]");
                let qid = string(qa, "id", &qpath)?;
                let question = string(qa, "question", &qpath)?;
                let is_impossible = field(qa, "is_impossible", &qpath)?
                    .as_bool()
                    .ok_or_else(|| parse_err(&format!("{qpath}.is_impossible"), "expected a boolean"))?;
                let mut answers = Vec::new();
                for (k, ans) in array(qa, "answers", &qpath)?.iter().enumerate() {
                    let anpath = format!("{qpath}.answers[{k}]");
                    let text = string(ans, "text", &anpath)?;
                    let char_start = field(ans, "answer_start", &anpath)?
                        .as_u64()
                        .ok_or_else(|| {
                            parse_err(&format!("{anpath}.answer_start"), "expected a non-negative integer")
                        })? as usize;
                    let end = char_start + text.chars().count();
                    let Some(slice) = context_chars.get(char_start..end) else {
                        return Err(parse_err(&anpath, "answer span runs past the context"));
                    };
                    let slice: String = slice.iter().collect();
                    if squash_whitespace(&slice) != squash_whitespace(&text) {
                        return Err(parse_err(
                            &anpath,
                            format!("answer text {text:?} does not match context {slice:?}"),
                        ));
                    }
                    answers.push(Answer { text, char_start });
                }
                if !is_impossible && answers.is_empty() {
                    return Err(parse_err(&qpath, "answerable question has no answers"));
                }
                if is_impossible {
                    answers.clear();
                }
                if !seen.insert(qid.clone()) {
                    return Err(parse_err(&format!("{qpath}.id"), format!("duplicate qid `{qid}`")));
                }
                out.push(SquadExample {
                    qid,
                    question,
                    context: context.clone(),
                    answers,
                    is_impossible,
                    article: a,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = r#"{"version": "v2.0", "data": [{"title": "T", "paragraphs": [{
        "context": "The cat sat on the mat.",
        "qas": [
            {"id": "q1", "question": "Where did the cat sit?", "is_impossible": false,
             "answers": [{"text": "the mat", "answer_start": 15}]},
            {"id": "q2", "question": "Where did the dog sit?", "is_impossible": true,
             "answers": [], "plausible_answers": [{"text": "the mat", "answer_start": 15}]}
        ]}]}]}"#;

    #[test]
    fn answerable_and_impossible() {
        let ex = parse_squad_json(FIXTURE).unwrap();
        assert_eq!(ex.len(), 2);
        assert!(!ex[0].is_impossible);
        assert_eq!(ex[0].answers[0].char_start, 15);
        assert!(ex[1].is_impossible);
        assert!(ex[1].answers.is_empty());
    }

    #[test]
    fn empty_data() {
        assert!(parse_squad_json(r#"{"data": []}"#).unwrap().is_empty());
    }

    #[test]
    fn missing_field_reports_json_path() {
        let doc = r#"{"data": [{"paragraphs": [{"context": "x", "qas": [{"id": "a", "is_impossible": true, "answers": []}]}]}]}"#;
        let err = parse_squad_json(doc).unwrap_err().to_string();
        assert!(err.contains("data[0].paragraphs[0].qas[0]") && err.contains("question"), "{err}");
    }

    #[test]
    fn duplicate_qid_rejected() {
        let doc = FIXTURE.replace("\"q2\"", "\"q1\"");
        assert!(parse_squad_json(&doc).unwrap_err().to_string().contains("duplicate"));
    }

    #[test]
    fn misaligned_answer_rejected() {
        let doc = FIXTURE.replace("\"answer_start\": 15}]},", "\"answer_start\": 3}]},");
        assert!(parse_squad_json(&doc).is_err());
    }

    #[test]
    fn malformed_json_rejected() {
        assert!(matches!(parse_squad_json("{\"data\": ["), Err(Error::Parse { .. })));
    }

    #[test]
    fn char_offsets_count_code_points() {
        let doc = r#"{"data": [{"paragraphs": [{"context": "café au lait", "qas": [
            {"id": "u", "question": "q", "is_impossible": false, "answers": [{"text": "au", "answer_start": 5}]}]}]}]}"#;
        assert_eq!(parse_squad_json(doc).unwrap()[0].answers[0].text, "au");
    }
}
