//! Plain-file interchange: the columnar dataset format, JSON documents and
//! newline-delimited JSON records.
//!
//! Dataset files are comma-separated with the header
//! `track,slot[,label],x1,...,xC[,state]`. Rows of a track are contiguous
//! with slots 0, 1, 2, ...; an empty cell is a missing value. Floats are
//! written in shortest round-trip form so a read after a write is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use hmmorder_core::model::{ObservationSeries, SeriesTrack, StateSequence};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `contents`, creating parent directories as needed.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::format(path, e))
}

pub fn write_ndjson<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serializable record"));
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn read_ndjson<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(path, i as u64 + 1, e)))
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Serializes a dataset; `states` adds the true-state column.
pub fn format_dataset(data: &ObservationSeries, states: Option<&StateSequence>) -> String {
    let c = data.n_channels();
    let labelled = data.tracks().iter().any(|t| t.labels().is_some());
    let mut out = String::from("track,slot");
    if labelled {
        out.push_str(",label");
    }
    for k in 1..=c {
        let _ = write!(out, ",x{k}");
    }
    if states.is_some() {
        out.push_str(",state");
    }
    out.push('\n');
    for (i, track) in data.tracks().iter().enumerate() {
        for t in 0..track.len() {
            let _ = write!(out, "{i},{t}");
            if labelled {
                out.push(',');
                if let Some(l) = track.labels() {
                    let _ = write!(out, "{}", l[t]);
                }
            }
            for v in track.slot(t) {
                out.push(',');
                out.push_str(&cell(*v));
            }
            if let Some(s) = states {
                let _ = write!(out, ",{}", s.tracks[i][t]);
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_dataset(path: &Path, data: &ObservationSeries, states: Option<&StateSequence>) -> Result<()> {
    write_text(path, &format_dataset(data, states))
}

struct Columns {
    label: Option<usize>,
    values: Vec<usize>,
    state: Option<usize>,
}

fn columns(path: &Path, header: &csv::StringRecord) -> Result<Columns> {
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names.len() < 3 || names[0] != "track" || names[1] != "slot" {
        return Err(Error::parse(path, 1, "header must start with track,slot"));
    }
    let mut cols = Columns { label: None, values: Vec::new(), state: None };
    for (i, name) in names.iter().enumerate().skip(2) {
        match *name {
            "label" => cols.label = Some(i),
            "state" => cols.state = Some(i),
            x if x.strip_prefix('x').and_then(|k| k.parse::<usize>().ok()) == Some(cols.values.len() + 1) => {
                cols.values.push(i)
            }
            other => return Err(Error::parse(path, 1, format!("unexpected column {other:?}"))),
        }
    }
    if cols.values.is_empty() {
        return Err(Error::parse(path, 1, "no value columns x1, x2, ..."));
    }
    Ok(cols)
}

#[derive(Default)]
struct Pending {
    values: Vec<Option<f64>>,
    labels: Vec<u32>,
    states: Vec<usize>,
    len: usize,
}

/// Reads a dataset written by [`write_dataset`] (or by hand in that format).
pub fn read_dataset(path: &Path) -> Result<(ObservationSeries, Option<StateSequence>)> {
    parse_dataset(path, &read_text(path)?)
}

pub fn parse_dataset(path: &Path, text: &str) -> Result<(ObservationSeries, Option<StateSequence>)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::parse(path, 1, e))?.clone();
    let cols = columns(path, &header)?;
    let c = cols.values.len();
    let mut done: Vec<Pending> = Vec::new();
    let mut current: Option<(usize, Pending)> = None;
    for row in reader.records() {
        let row = row.map_err(|e| Error::parse(path, e.position().map_or(0, |p| p.line()), e))?;
        let line = row.position().map_or(0, |p| p.line());
        let err = |m: String| Error::parse(path, line, m);
        let int = |i: usize, what: &str| row[i].parse::<usize>().map_err(|_| err(format!("{what} {:?} is not a non-negative integer", &row[i])));
        let track = int(0, "track")?;
        let slot = int(1, "slot")?;
        match &current {
            Some((id, _)) if *id == track => {}
            _ => {
                if track != done.len() + usize::from(current.is_some()) {
                    return Err(err(format!("track {track} out of order; tracks must be contiguous and numbered from 0")));
                }
                if let Some((_, p)) = current.take() {
                    done.push(p);
                }
                current = Some((track, Pending::default()));
            }
        }
        let p = &mut current.as_mut().expect("set above").1;
        if slot != p.len {
            return Err(err(format!("slot {slot} where {} was expected", p.len)));
        }
        for &i in &cols.values {
            p.values.push(match &row[i] {
                "" | "NA" => None,
                s => Some(s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| err(format!("value {s:?} is not a finite number")))?),
            });
        }
        if let Some(i) = cols.label {
            p.labels.push(row[i].parse().map_err(|_| err(format!("label {:?} is not an integer", &row[i])))?);
        }
        if let Some(i) = cols.state {
            p.states.push(int(i, "state")?);
        }
        p.len += 1;
    }
    if let Some((_, p)) = current {
        done.push(p);
    }
    let mut tracks = Vec::with_capacity(done.len());
    let mut states = Vec::with_capacity(done.len());
    for p in done {
        let labels = cols.label.map(|_| p.labels);
        tracks.push(SeriesTrack::new(c, p.values, labels).map_err(|e| Error::format(path, e))?);
        states.push(p.states);
    }
    let data = ObservationSeries::new(tracks).map_err(|e| Error::format(path, e))?;
    Ok((data, cols.state.map(|_| StateSequence { tracks: states })))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_round_trip_is_exact() {
        let tracks = vec![
            SeriesTrack::new(2, vec![Some(0.1), None, Some(1.0 / 3.0), Some(-2.5), None, None], Some(vec![0, 1, 1])).unwrap(),
            SeriesTrack::new(2, vec![Some(7.0), Some(0.0), Some(1e-300), Some(3.0)], Some(vec![0, 0])).unwrap(),
        ];
        let data = ObservationSeries::new(tracks).unwrap();
        let states = StateSequence { tracks: vec![vec![0, 1, 0], vec![1, 1]] };
        let text = format_dataset(&data, Some(&states));
        assert!(text.starts_with("track,slot,label,x1,x2,state\n0,0,0,0.1,,0\n"));
        let (back, s) = parse_dataset(Path::new("mem"), &text).unwrap();
        assert_eq!(back, data);
        assert_eq!(s.unwrap(), states);
    }

    #[test]
    fn malformed_rows_name_their_line() {
        let bad = "track,slot,x1\n0,0,1.0\n0,2,1.0\n";
        let e = parse_dataset(Path::new("d.csv"), bad).unwrap_err().to_string();
        assert!(e.starts_with("d.csv:3:"), "{e}");
        let bad = "track,slot,x1\n0,0,1.0\n0,1,abc\n";
        assert!(parse_dataset(Path::new("d.csv"), bad).unwrap_err().to_string().contains(":3:"));
        assert!(parse_dataset(Path::new("d.csv"), "slot,track,x1\n").is_err());
    }
}
