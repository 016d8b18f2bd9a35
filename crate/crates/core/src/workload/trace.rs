//! Request trace CSV: UTF-8, one header row, comma separated, `.` decimals.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{AppClass, RequestSpec, ResourceVector};
use crate::error::{Error, Result};

pub const TRACE_HEADER: [&str; 9] = [
    "id",
    "submit_time_s",
    "class",
    "n_core",
    "n_elastic",
    "cpu_per_component",
    "ram_mb_per_component",
    "runtime_s",
    "priority_class",
];

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    id: u64,
    submit_time_s: f64,
    class: AppClass,
    n_core: u32,
    n_elastic: u32,
    cpu_per_component: f64,
    ram_mb_per_component: f64,
    runtime_s: f64,
    priority_class: u32,
}

impl From<&RequestSpec> for TraceRow {
    fn from(r: &RequestSpec) -> Self {
        Self {
            id: r.id,
            submit_time_s: r.submit_time,
            class: r.app_class,
            n_core: r.n_core,
            n_elastic: r.n_elastic,
            cpu_per_component: r.per_component.cpu,
            ram_mb_per_component: r.per_component.ram,
            runtime_s: r.nominal_runtime,
            priority_class: r.priority_class,
        }
    }
}

impl From<TraceRow> for RequestSpec {
    fn from(row: TraceRow) -> Self {
        Self {
            id: row.id,
            submit_time: row.submit_time_s,
            app_class: row.class,
            priority_class: row.priority_class,
            n_core: row.n_core,
            n_elastic: row.n_elastic,
            per_component: ResourceVector::new(row.cpu_per_component, row.ram_mb_per_component),
            nominal_runtime: row.runtime_s,
        }
    }
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<RequestSpec>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_trace_from(file)
}

pub fn read_trace_from(reader: impl Read) -> Result<Vec<RequestSpec>> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = csv.headers().map_err(|e| Error::Trace { line: 1, message: e.to_string() })?;
    if headers.iter().ne(TRACE_HEADER) {
        return Err(Error::Trace {
            line: 1,
            message: format!("expected header {:?}, found {:?}", TRACE_HEADER.join(","), headers.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut seen = BTreeSet::new();
    let mut requests = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| Error::Trace {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: TraceRow = record
            .deserialize(None)
            .map_err(|e| Error::Trace { line, message: e.to_string() })?;
        let req = RequestSpec::from(row);
        req.validate().map_err(|e| Error::Trace { line, message: e.to_string() })?;
        if !seen.insert(req.id) {
            return Err(Error::Trace { line, message: format!("duplicate request id {}", req.id) });
        }
        requests.push(req);
    }
    Ok(requests)
}

pub fn write_trace(path: impl AsRef<Path>, requests: &[RequestSpec]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_trace_to(file, requests)
}

pub fn write_trace_to(writer: impl Write, requests: &[RequestSpec]) -> Result<()> {
    let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    csv.write_record(TRACE_HEADER).map_err(io)?;
    for req in requests {
        csv.serialize(TraceRow::from(req)).map_err(io)?;
    }
    csv.flush()?;
    Ok(())
}
