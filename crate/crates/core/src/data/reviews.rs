//! JSON-lines readers for Amazon-style review and metadata dumps.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ReviewRecord {
    pub user_id: String,
    pub item_id: String,
    pub rating: f64,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ItemMeta {
    pub title: String,
    pub description: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedReviews {
    pub records: Vec<ReviewRecord>,
    pub skipped: usize,
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_review(line: &str) -> Option<ReviewRecord> {
    let v: Value = serde_json::from_str(line).ok()?;
    let user_id = v.get("reviewerID")?.as_str()?.to_string();
    let item_id = v.get("asin")?.as_str()?.to_string();
    let rating = v.get("overall")?.as_f64()?;
    let text = match v.get("reviewText") {
        Some(Value::String(s)) => s.clone(),
        None | Some(Value::Null) => String::new(),
        Some(_) => return None,
    };
    if user_id.is_empty() || item_id.is_empty() || !(1.0..=5.0).contains(&rating) {
        return None;
    }
    Some(ReviewRecord {
        user_id,
        item_id,
        rating,
        text,
    })
}

/// Parses review JSON lines. Blank lines are ignored; malformed lines and
/// out-of-range ratings are skipped and counted. More than half the lines
/// being malformed is a format error.
pub fn parse_reviews(content: &str) -> Result<LoadedReviews> {
    let mut out = LoadedReviews::default();
    let mut total = 0usize;
    for line in content.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        total += 1;
        match parse_review(line) {
            Some(r) => out.records.push(r),
            None => out.skipped += 1,
        }
    }
    if total == 0 {
        log::warn!("review input is empty");
    } else if out.skipped * 2 > total {
        return Err(Error::Format(format!(
            "{} of {total} review lines are malformed",
            out.skipped
        )));
    } else if out.skipped > 0 {
        log::warn!("skipped {} malformed review lines", out.skipped);
    }
    Ok(out)
}

pub fn load_reviews(path: impl AsRef<Path>) -> Result<LoadedReviews> {
    parse_reviews(&read_to_string(path.as_ref())?)
}

fn text_field(v: Option<&Value>) -> String {
    match v {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Array(items)) => items
            .iter()
            .filter_map(Value::as_str)
            .collect::<Vec<_>>()
            .join(" "),
        _ => String::new(),
    }
}

/// Parses metadata JSON lines (`asin`, `title`, `description`). Lines without
/// an `asin` are skipped.
pub fn parse_metadata(content: &str) -> Result<BTreeMap<String, ItemMeta>> {
    let mut out = BTreeMap::new();
    let mut skipped = 0usize;
    let mut total = 0usize;
    for line in content.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        total += 1;
        let Ok(v) = serde_json::from_str::<Value>(line) else {
            skipped += 1;
            continue;
        };
        let Some(asin) = v.get("asin").and_then(Value::as_str).filter(|s| !s.is_empty()) else {
            skipped += 1;
            continue;
        };
        out.insert(
            asin.to_string(),
            ItemMeta {
                title: text_field(v.get("title")),
                description: text_field(v.get("description")),
            },
        );
    }
    if total > 0 && skipped * 2 > total {
        return Err(Error::Format(format!("{skipped} of {total} metadata lines are malformed")));
    }
    Ok(out)
}

pub fn load_metadata(path: impl AsRef<Path>) -> Result<BTreeMap<String, ItemMeta>> {
    parse_metadata(&read_to_string(path.as_ref())?)
}

/// Serialises records back to review JSON lines.
pub fn reviews_to_jsonl(records: &[ReviewRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let v = serde_json::json!({
            "reviewerID": r.user_id,
            "asin": r.item_id,
            "overall": r.rating,
            "reviewText": r.text,
        });
        s.push_str(&v.to_string());
        s.push('\n');
    }
    s
}

pub fn metadata_to_jsonl(meta: &BTreeMap<String, ItemMeta>) -> String {
    let mut s = String::new();
    for (asin, m) in meta {
        let v = serde_json::json!({ "asin": asin, "title": m.title, "description": m.description });
        s.push_str(&v.to_string());
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{"reviewerID":"A1","asin":"B1","overall":5.0,"reviewText":"great"}
{"reviewerID":"A2","asin":"B1","overall":2,"reviewText":"meh"}
{"reviewerID":"A1","asin":"B2","overall":4.0,"reviewText":"fine"}
"#;

    #[test]
    fn well_formed_file_in_order() {
        let r = parse_reviews(GOOD).unwrap();
        assert_eq!(r.records.len(), 3);
        assert_eq!(r.skipped, 0);
        assert_eq!(r.records[1].user_id, "A2");
        assert_eq!(r.records[2].item_id, "B2");
        assert_eq!(r.records[1].rating, 2.0);
    }

    #[test]
    fn out_of_range_rating_skipped() {
        let content = format!("{GOOD}{}\n", r#"{"reviewerID":"A3","asin":"B3","overall":6,"reviewText":"x"}"#);
        let r = parse_reviews(&content).unwrap();
        assert_eq!(r.records.len(), 3);
        assert_eq!(r.skipped, 1);
    }

    #[test]
    fn empty_input_is_empty_list() {
        let r = parse_reviews("").unwrap();
        assert!(r.records.is_empty());
    }

    #[test]
    fn mostly_garbage_is_format_error() {
        let content = format!("{}\nnot json\n{{}}\n[1]\n", GOOD.lines().next().unwrap());
        assert!(matches!(parse_reviews(&content), Err(Error::Format(_))));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_reviews("/nonexistent/reviews.jsonl"), Err(Error::Io { .. })));
    }

    #[test]
    fn metadata_accepts_list_descriptions() {
        let m = parse_metadata(
            r#"{"asin":"B1","title":"Tent","description":["two","person"]}
{"asin":"B2","title":"Stove"}"#,
        )
        .unwrap();
        assert_eq!(m["B1"].description, "two person");
        assert_eq!(m["B2"].description, "");
    }

    #[test]
    fn jsonl_roundtrip() {
        let r = parse_reviews(GOOD).unwrap().records;
        let back = parse_reviews(&reviews_to_jsonl(&r)).unwrap().records;
        assert_eq!(r, back);
    }
}
