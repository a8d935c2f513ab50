//! JSON-lines result files: one header line, then one line per replicate
//! record and an optional summary line.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperimentSpec, ReplicateRecord, ResultSet, Summary};
use crate::error::{Error, Result};
use crate::ranking::Permutation;

pub const SCHEMA_VERSION: u32 = 1;
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultHeader {
    pub schema_version: u32,
    pub artifact_version: String,
    pub spec_hash: String,
    pub master_seed: u64,
    pub spec: ExperimentSpec,
}

impl ResultHeader {
    pub fn for_spec(spec: &ExperimentSpec) -> Result<Self> {
        Ok(ResultHeader {
            schema_version: SCHEMA_VERSION,
            artifact_version: ARTIFACT_VERSION.to_string(),
            spec_hash: spec.hash()?,
            master_seed: spec.master_seed,
            spec: spec.clone(),
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum BodyLine {
    Record(ReplicateRecord),
    Summary(Summary),
}

pub fn write_results<W: Write>(results: &ResultSet, mut w: W) -> Result<W> {
    serde_json::to_writer(&mut w, &results.header)?;
    w.write_all(b"\n")?;
    for r in &results.records {
        serde_json::to_writer(&mut w, &BodyLine::Record(r.clone()))?;
        w.write_all(b"\n")?;
    }
    if let Some(s) = &results.summary {
        serde_json::to_writer(&mut w, &BodyLine::Summary(s.clone()))?;
        w.write_all(b"\n")?;
    }
    Ok(w)
}

/// Parse a result stream, rejecting other schema versions and headers whose
/// hash does not match the embedded spec.
pub fn read_results<R: Read>(r: R) -> Result<ResultSet> {
    let mut lines = BufReader::new(r).lines();
    let first = lines.next().ok_or_else(|| Error::Parse("empty result file".into()))??;
    let raw: serde_json::Value = serde_json::from_str(&first)?;
    let found = raw
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Parse("header has no schema_version".into()))?;
    if found != SCHEMA_VERSION as u64 {
        return Err(Error::SchemaVersion {
            found: found.try_into().unwrap_or(u32::MAX),
            expected: SCHEMA_VERSION,
        });
    }
    let header: ResultHeader = serde_json::from_value(raw)?;
    let computed = header.spec.hash()?;
    if computed != header.spec_hash {
        return Err(Error::HeaderHash {
            stored: header.spec_hash,
            computed,
        });
    }
    let mut records = Vec::new();
    let mut summary = None;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if summary.is_some() {
            return Err(Error::Parse("content after the summary line".into()));
        }
        match serde_json::from_str(&line)? {
            BodyLine::Record(r) => records.push(r),
            BodyLine::Summary(s) => summary = Some(s),
        }
    }
    Ok(ResultSet {
        header,
        records,
        summary,
    })
}

/// Write to a sibling temporary file and rename, so a failed write never
/// leaves a truncated file at `path`.
pub fn persist_results(results: &ResultSet, path: &Path) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = Path::new(&tmp);
    let w = write_results(results, BufWriter::new(File::create(tmp)?))?;
    w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    fs::rename(tmp, path)?;
    Ok(())
}

pub fn load_results(path: &Path) -> Result<ResultSet> {
    read_results(File::open(path)?)
}

/// Flat per-replicate table. Orderings and value vectors are joined with `-`.
pub fn write_csv<W: Write>(results: &ResultSet, mut w: W) -> Result<W> {
    use super::Experiment as E;
    let header = match &results.header.spec.experiment {
        E::Coverage(_) => "replicate,permutation,first_hit",
        E::XiConvergence(_) => "replicate,time,values",
        E::Coupling(_) => "replicate,sequence",
        E::Petrov(_) => "replicate,n,q_hat,d_sum,product",
        E::Regime(_) => "replicate,checkpoint,leader",
    };
    writeln!(w, "{header}")?;
    let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("-");
    for record in &results.records {
        match (record, &results.header.spec.experiment) {
            (ReplicateRecord::Coverage { replicate, first_hits }, E::Coverage(p)) => {
                for (rank, hit) in first_hits.iter().enumerate() {
                    let pi = Permutation::unrank(p.initial.len(), rank)?;
                    let hit = hit.map(|h| h.to_string()).unwrap_or_default();
                    writeln!(w, "{replicate},{},{hit}", join(pi.as_slice()))?;
                }
            }
            (ReplicateRecord::XiConvergence { replicate, values }, E::XiConvergence(p)) => {
                for (i, t) in p.times.iter().enumerate() {
                    let v = values
                        .as_ref()
                        .map(|v| v[i].iter().map(|x| x.to_string()).collect::<Vec<_>>().join("-"))
                        .unwrap_or_default();
                    writeln!(w, "{replicate},{t},{v}")?;
                }
            }
            (ReplicateRecord::Coupling { replicate, sequence }, _) => writeln!(w, "{replicate},{sequence}")?,
            (ReplicateRecord::Petrov { replicate, table }, _) => {
                for r in &table.rows {
                    let product = r.product.map(|p| p.to_string()).unwrap_or_default();
                    writeln!(w, "{replicate},{},{},{},{product}", r.n, r.q_hat, r.d_sum)?;
                }
            }
            (ReplicateRecord::Regime { replicate, leaders }, E::Regime(p)) => {
                let mut checkpoints = p.checkpoints.clone();
                checkpoints.sort_unstable();
                for (c, l) in checkpoints.iter().zip(leaders) {
                    writeln!(w, "{replicate},{c},{l}")?;
                }
            }
            _ => return Err(Error::Parse("record kind does not match the experiment".into())),
        }
    }
    Ok(w)
}
