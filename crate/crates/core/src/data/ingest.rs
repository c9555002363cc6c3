use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub user_id: String,
    pub item_id: String,
    pub timestamp: i64,
    pub rating: Option<f64>,
}

/// Column mapping for delimiter-separated interaction files.
///
/// Files without a header row (e.g. `user::item::rating::timestamp`) name
/// their columns positionally through `columns`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schema {
    pub delimiter: String,
    pub header: bool,
    pub columns: Option<Vec<String>>,
    pub user: String,
    pub item: String,
    /// `None` means the file carries no timestamps; row order is used instead.
    pub timestamp: Option<String>,
    pub rating: Option<String>,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            delimiter: "\t".into(),
            header: true,
            columns: None,
            user: "user_id".into(),
            item: "item_id".into(),
            timestamp: Some("timestamp".into()),
            rating: None,
        }
    }
}

impl Schema {
    /// The `user::item::rating::timestamp` layout.
    pub fn ml1m() -> Self {
        Self {
            delimiter: "::".into(),
            header: false,
            columns: Some(vec![
                "user_id".into(),
                "item_id".into(),
                "rating".into(),
                "timestamp".into(),
            ]),
            rating: Some("rating".into()),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttributeRecord {
    pub gender: Option<String>,
    pub age: Option<f64>,
}

/// Per-user demographic attributes keyed by original user id.
pub type AttributeTable = BTreeMap<String, AttributeRecord>;

#[derive(Debug, Clone)]
pub struct Ingested {
    pub interactions: Vec<Interaction>,
    /// Whether the source provided real timestamps.
    pub has_timestamps: bool,
}

fn column_positions(
    header: &[&str],
    wanted: &[(&str, bool)],
) -> Result<Vec<Option<usize>>> {
    wanted
        .iter()
        .map(|&(name, required)| {
            match header.iter().position(|h| h.trim() == name) {
                Some(p) => Ok(Some(p)),
                None if required => Err(Error::MissingColumn(name.to_string())),
                None => Ok(None),
            }
        })
        .collect()
}

fn parse_timestamp(raw: &str) -> std::result::Result<i64, String> {
    let raw = raw.trim();
    let ts = match raw.parse::<i64>() {
        Ok(v) => v,
        Err(_) => match raw.parse::<f64>() {
            Ok(v) if v.is_finite() && v.fract() == 0.0 => v as i64,
            _ => return Err(format!("unparseable timestamp `{raw}`")),
        },
    };
    if ts < 0 {
        return Err(format!("negative timestamp `{raw}`"));
    }
    Ok(ts)
}

/// Reads an interaction file, deduplicating (user, item) pairs to their earliest timestamp.
pub fn ingest(path: &Path, schema: &Schema) -> Result<Ingested> {
    let text = fs::read_to_string(path)?;
    ingest_str(&text, path, schema)
}

pub fn ingest_str(text: &str, path: &Path, schema: &Schema) -> Result<Ingested> {
    if schema.delimiter.is_empty() {
        return Err(Error::Config("empty delimiter".into()));
    }
    let mut lines = text.lines().enumerate();
    let header_owned: Vec<String> = if schema.header {
        match lines.next() {
            Some((_, h)) => h.split(schema.delimiter.as_str()).map(str::to_string).collect(),
            None => return Err(Error::EmptyCorpus),
        }
    } else {
        schema
            .columns
            .clone()
            .ok_or_else(|| Error::Config("headerless schema needs `columns`".into()))?
    };
    let header: Vec<&str> = header_owned.iter().map(String::as_str).collect();
    let mut wanted = vec![(schema.user.as_str(), true), (schema.item.as_str(), true)];
    if let Some(ts) = &schema.timestamp {
        wanted.push((ts.as_str(), true));
    }
    let rating_name = schema.rating.as_deref().unwrap_or("");
    if schema.rating.is_some() {
        wanted.push((rating_name, false));
    }
    let pos = column_positions(&header, &wanted)?;
    let (user_col, item_col) = (pos[0].unwrap(), pos[1].unwrap());
    let ts_col = schema.timestamp.as_ref().and(pos[2]);
    let rating_col = if schema.rating.is_some() {
        *pos.last().unwrap()
    } else {
        None
    };

    // (user, item) -> position in `out`
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    let mut out: Vec<Interaction> = Vec::new();
    for (row, (lineno, line)) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(schema.delimiter.as_str()).collect();
        let field = |col: usize| -> Result<&str> {
            fields.get(col).copied().ok_or_else(|| Error::Row {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: format!("expected at least {} fields, found {}", col + 1, fields.len()),
            })
        };
        let user_id = field(user_col)?.trim().to_string();
        let item_id = field(item_col)?.trim().to_string();
        let timestamp = match ts_col {
            Some(c) => parse_timestamp(field(c)?).map_err(|message| Error::Row {
                path: path.to_path_buf(),
                line: lineno + 1,
                message,
            })?,
            None => row as i64,
        };
        let rating = match rating_col {
            Some(c) => field(c)?.trim().parse::<f64>().ok(),
            None => None,
        };
        match seen.get(&(user_id.clone(), item_id.clone())) {
            Some(&at) => {
                if timestamp < out[at].timestamp {
                    out[at].timestamp = timestamp;
                    out[at].rating = rating;
                }
            }
            None => {
                seen.insert((user_id.clone(), item_id.clone()), out.len());
                out.push(Interaction {
                    user_id,
                    item_id,
                    timestamp,
                    rating,
                });
            }
        }
    }
    Ok(Ingested {
        interactions: out,
        has_timestamps: schema.timestamp.is_some(),
    })
}

/// Reads `user_id, gender, age` rows; blank cells are missing values.
pub fn ingest_attributes(path: &Path, delimiter: &str) -> Result<AttributeTable> {
    let text = fs::read_to_string(path)?;
    ingest_attributes_str(&text, path, delimiter)
}

pub fn ingest_attributes_str(text: &str, path: &Path, delimiter: &str) -> Result<AttributeTable> {
    let mut lines = text.lines().enumerate();
    let header: Vec<&str> = match lines.next() {
        Some((_, h)) => h.split(delimiter).collect(),
        None => return Ok(AttributeTable::new()),
    };
    let pos = column_positions(&header, &[("user_id", true), ("gender", false), ("age", false)])?;
    let mut table = AttributeTable::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(delimiter).collect();
        let get = |p: Option<usize>| {
            p.and_then(|c| fields.get(c))
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
        };
        let user = get(pos[0]).ok_or_else(|| Error::Row {
            path: path.to_path_buf(),
            line: lineno + 1,
            message: "missing user_id".into(),
        })?;
        let age = match get(pos[2]) {
            Some(a) => Some(a.parse::<f64>().map_err(|_| Error::Row {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: format!("unparseable age `{a}`"),
            })?),
            None => None,
        };
        table.insert(
            user.to_string(),
            AttributeRecord {
                gender: get(pos[1]).map(str::to_string),
                age,
            },
        );
    }
    Ok(table)
}
