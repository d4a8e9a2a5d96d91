//! CSV input and output for response data, id mappings and true parameters.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::design::{BipartiteDesign, Edge, OutcomeSet};
use crate::error::{RaschError, Result};
use crate::model::ParamVector;

pub const RESPONSE_HEADER: [&str; 3] = ["individual", "item", "correct"];
pub const MAPPING_HEADER: [&str; 3] = ["role", "id", "index"];
pub const TRUTH_HEADER: [&str; 3] = ["role", "id", "value"];

/// External string ids in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdMaps {
    pub individuals: Vec<String>,
    pub items: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Individual,
    Item,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Individual => "individual",
            Role::Item => "item",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: duplicate response for individual {individual:?} and item {item:?} (first seen on line {first})")]
    Duplicate {
        line: u64,
        first: u64,
        individual: String,
        item: String,
    },
    #[error("file contains no responses")]
    Empty,
    #[error(transparent)]
    Design(#[from] RaschError),
}

/// A parsed response file.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub design: BipartiteDesign,
    pub outcomes: OutcomeSet,
    pub ids: IdMaps,
}

pub fn ingest(path: impl AsRef<Path>) -> std::result::Result<Ingested, IngestError> {
    ingest_reader(File::open(path)?)
}

/// Parses `individual,item,correct` rows. Ids are assigned dense indices in
/// the order they first appear.
pub fn ingest_reader<R: Read>(reader: R) -> std::result::Result<Ingested, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| malformed(1, e))?.clone();
    let fields: Vec<&str> = header.iter().map(str::trim).collect();
    if fields.is_empty() || fields == [""] {
        return Err(IngestError::Empty);
    }
    if fields != RESPONSE_HEADER {
        return Err(IngestError::Malformed {
            line: 1,
            message: format!("expected header `individual,item,correct`, found `{}`", fields.join(",")),
        });
    }

    let mut individuals: HashMap<String, usize> = HashMap::new();
    let mut items: HashMap<String, usize> = HashMap::new();
    let mut ids = IdMaps::default();
    let mut seen: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e)
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(IngestError::Malformed {
                line,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let (who, what, correct) = (record[0].trim(), record[1].trim(), record[2].trim());
        if who.is_empty() || what.is_empty() {
            return Err(IngestError::Malformed {
                line,
                message: "empty id".into(),
            });
        }
        let a = match correct {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(IngestError::Malformed {
                    line,
                    message: format!("correct must be 0 or 1, found {other:?}"),
                })
            }
        };
        let i = intern(&mut individuals, &mut ids.individuals, who);
        let j = intern(&mut items, &mut ids.items, what);
        if let Some(&first) = seen.get(&(i, j)) {
            return Err(IngestError::Duplicate {
                line,
                first,
                individual: who.to_string(),
                item: what.to_string(),
            });
        }
        seen.insert((i, j), line);
        rows.push((Edge::new(i, j), a));
    }
    if rows.is_empty() {
        return Err(IngestError::Empty);
    }
    let (design, outcomes) = BipartiteDesign::from_responses(ids.individuals.len(), ids.items.len(), rows)?;
    Ok(Ingested { design, outcomes, ids })
}

fn intern(index: &mut HashMap<String, usize>, names: &mut Vec<String>, id: &str) -> usize {
    if let Some(&k) = index.get(id) {
        return k;
    }
    let k = names.len();
    names.push(id.to_string());
    index.insert(id.to_string(), k);
    k
}

fn malformed(line: u64, e: csv::Error) -> IngestError {
    IngestError::Malformed {
        line,
        message: e.to_string(),
    }
}

/// Writes responses in the ingest format. Without `ids`, individuals are
/// named `i<k>` and items `j<k>` with one-based `k`.
pub fn write_responses<W: Write>(
    writer: W,
    design: &BipartiteDesign,
    outcomes: &OutcomeSet,
    ids: Option<&IdMaps>,
) -> Result<(), csv::Error> {
    let generated;
    let ids = match ids {
        Some(ids) => ids,
        None => {
            generated = default_ids(design.r(), design.t());
            &generated
        }
    };
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RESPONSE_HEADER)?;
    for (e, a) in design.edges().iter().zip(outcomes.values()) {
        w.write_record([
            ids.individuals[e.i()].as_str(),
            ids.items[e.j()].as_str(),
            if *a == 1 { "1" } else { "0" },
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn default_ids(r: usize, t: usize) -> IdMaps {
    IdMaps {
        individuals: (1..=r).map(|k| format!("i{k}")).collect(),
        items: (1..=t).map(|k| format!("j{k}")).collect(),
    }
}

/// `role,id,index` rows with one-based positions within each side.
pub fn write_mapping<W: Write>(writer: W, ids: &IdMaps) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(MAPPING_HEADER)?;
    for (role, names) in [(Role::Individual, &ids.individuals), (Role::Item, &ids.items)] {
        for (k, name) in names.iter().enumerate() {
            w.write_record([role.as_str(), name.as_str(), &(k + 1).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `role,id,value` rows for every parameter.
pub fn write_truth<W: Write>(writer: W, theta: &ParamVector, ids: &IdMaps) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRUTH_HEADER)?;
    for (name, v) in ids.individuals.iter().zip(theta.abilities()) {
        w.write_record([Role::Individual.as_str(), name.as_str(), &format_float(*v)])?;
    }
    for (name, v) in ids.items.iter().zip(theta.difficulties()) {
        w.write_record([Role::Item.as_str(), name.as_str(), &format_float(*v)])?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:?}")
}
