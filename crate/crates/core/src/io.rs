//! Dataset CSV and site JSON files.
//!
//! CSV header: `timestamp,t_in,t_sup,t_out,ghi`, timestamps as
//! `2021-10-01T00:00:00Z`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Utc};

use crate::error::{CoreError, Result};
use crate::record::{BuildingDataset, HourlyRecord, SiteMeta};

pub const CSV_HEADER: [&str; 5] = ["timestamp", "t_in", "t_sup", "t_out", "ghi"];

pub fn format_timestamp(ts: DateTime<Utc>) -> String {
    ts.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s.trim()).ok().map(|t| t.with_timezone(&Utc))
}

pub fn write_records<W: Write>(out: W, records: &[HourlyRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let map = |e: csv::Error| CoreError::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(map)?;
    for r in records {
        w.write_record([
            format_timestamp(r.timestamp),
            r.t_in.to_string(),
            r.t_sup.to_string(),
            r.t_out.to_string(),
            r.ghi.to_string(),
        ])
        .map_err(map)?;
    }
    w.flush()?;
    Ok(())
}

/// Parse records, reporting the 1-based file line of the first problem.
pub fn read_records<R: Read>(input: R, name: &str) -> Result<Vec<HourlyRecord>> {
    let parse_err = |line: u64, msg: String| CoreError::Parse { path: name.to_string(), line, msg };
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(input);
    let mut rows = rdr.records();
    let header = match rows.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => return Err(parse_err(1, e.to_string())),
        None => return Err(parse_err(1, "empty file".into())),
    };
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(parse_err(
            1,
            format!(
                "expected header `{}`, found `{}`",
                CSV_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut out = Vec::new();
    for row in rows {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != CSV_HEADER.len() {
            return Err(parse_err(line, format!("expected 5 fields, found {}", row.len())));
        }
        let timestamp =
            parse_timestamp(&row[0]).ok_or_else(|| parse_err(line, format!("bad timestamp `{}`", &row[0])))?;
        let mut vals = [0.0; 4];
        for (k, v) in vals.iter_mut().enumerate() {
            *v = row[k + 1]
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("bad {} value `{}`", CSV_HEADER[k + 1], &row[k + 1])))?;
        }
        let rec = HourlyRecord { timestamp, t_in: vals[0], t_sup: vals[1], t_out: vals[2], ghi: vals[3] };
        rec.validate().map_err(|e| parse_err(line, e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_site(path: &Path) -> Result<SiteMeta> {
    let site: SiteMeta = serde_json::from_reader(File::open(path)?)?;
    site.validate()?;
    Ok(site)
}

pub fn write_site(path: &Path, site: &SiteMeta) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, site)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn read_dataset(csv_path: &Path, site_path: &Path) -> Result<BuildingDataset> {
    let site = read_site(site_path)?;
    let records = read_records(File::open(csv_path)?, &csv_path.display().to_string())?;
    BuildingDataset::new(site, records)
}

pub fn write_dataset_csv(path: &Path, dataset: &BuildingDataset) -> Result<()> {
    write_records(File::create(path)?, dataset.records())
}
