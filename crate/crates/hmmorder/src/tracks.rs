//! Telemetry files: `id,timestamp,x_m,y_m` rows, grouped by animal.
//!
//! Coordinates are planar and their unit is part of the header (`x_m,y_m`
//! for meters, `x_km,y_km` for kilometres, converted on read). Timestamps
//! are ISO 8601; without an offset they are taken as UTC. Within one id the
//! times must increase, and every gap must be a whole number of sampling
//! intervals; the skipped slots become missing fixes. A row with both
//! coordinates blank is a missing fix.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use hmmorder_core::movement::Track;

use crate::error::{Error, Result};
use crate::files::{read_text, write_text};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestOptions {
    /// Sampling interval in seconds; inferred per track when absent as the
    /// most common time difference (the smaller one on ties).
    pub interval: Option<i64>,
}

fn parse_time(s: &str) -> Option<i64> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.timestamp());
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|t| t.and_utc().timestamp())
}

pub fn format_time(secs: i64) -> String {
    DateTime::from_timestamp(secs, 0).map(|t| t.format("%Y-%m-%dT%H:%M:%SZ").to_string()).unwrap_or_else(|| secs.to_string())
}

struct Row {
    line: u64,
    time: i64,
    point: Option<(f64, f64)>,
}

pub fn ingest_tracks(path: &Path, options: &IngestOptions) -> Result<Vec<Track>> {
    parse_tracks(path, &read_text(path)?, options)
}

pub fn parse_tracks(path: &Path, text: &str, options: &IngestOptions) -> Result<Vec<Track>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().map_err(|e| Error::parse(path, 1, e))?.iter().map(String::from).collect();
    let scale = match header.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["id", "timestamp", "x_m", "y_m"] => 1.0,
        ["id", "timestamp", "x_km", "y_km"] => 1000.0,
        ["id", "timestamp", "x", "y"] => {
            return Err(Error::parse(path, 1, "coordinate unit not declared; use x_m,y_m or x_km,y_km"));
        }
        _ => return Err(Error::parse(path, 1, "header must be id,timestamp,x_m,y_m")),
    };
    let mut groups: Vec<(String, Vec<Row>)> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::parse(path, e.position().map_or(0, |p| p.line()), e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |m: String| Error::parse(path, line, m);
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(err("empty id".into()));
        }
        let time = parse_time(&rec[1]).ok_or_else(|| err(format!("timestamp {:?} is not ISO 8601", &rec[1])))?;
        let coord = |i: usize| -> Result<Option<f64>> {
            match &rec[i] {
                "" | "NA" => Ok(None),
                s => s.parse::<f64>().ok().filter(|v| v.is_finite()).map(|v| Some(v * scale)).ok_or_else(|| err(format!("coordinate {s:?} is not a number"))),
            }
        };
        let point = match (coord(2)?, coord(3)?) {
            (Some(x), Some(y)) => Some((x, y)),
            (None, None) => None,
            _ => return Err(err("only one coordinate is blank".into())),
        };
        match groups.last_mut() {
            Some((last, rows)) if *last == id => rows.push(Row { line, time, point }),
            _ => {
                if groups.iter().any(|(g, _)| *g == id) {
                    return Err(err(format!("rows of id {id:?} are not contiguous")));
                }
                groups.push((id, vec![Row { line, time, point }]));
            }
        }
    }
    groups.into_iter().map(|(id, rows)| build_track(path, id, rows, options)).collect()
}

fn build_track(path: &Path, id: String, rows: Vec<Row>, options: &IngestOptions) -> Result<Track> {
    for w in rows.windows(2) {
        if w[1].time <= w[0].time {
            return Err(Error::parse(path, w[1].line, format!("timestamp not after the previous row of id {id:?}")));
        }
    }
    let interval = match options.interval {
        Some(i) if i > 0 => i,
        Some(i) => return Err(Error::Config(format!("interval must be positive, got {i}"))),
        None => {
            let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
            for w in rows.windows(2) {
                *counts.entry(w[1].time - w[0].time).or_default() += 1;
            }
            counts.iter().fold((1, 0), |best, (&d, &k)| if k > best.1 { (d, k) } else { best }).0
        }
    };
    let start = rows[0].time;
    let mut points = Vec::with_capacity(rows.len());
    for r in &rows {
        let offset = r.time - start;
        if offset % interval != 0 {
            return Err(Error::parse(path, r.line, format!("timestamp is off the {interval} s grid of id {id:?}")));
        }
        let slot = (offset / interval) as usize;
        points.resize(slot, None);
        points.push(r.point);
    }
    Ok(Track { id, start, interval, points })
}

pub fn format_tracks(tracks: &[Track]) -> String {
    let mut s = String::from("id,timestamp,x_m,y_m\n");
    for tr in tracks {
        for (i, p) in tr.points.iter().enumerate() {
            let t = format_time(tr.timestamp(i));
            match p {
                Some((x, y)) => {
                    let _ = writeln!(s, "{},{t},{x},{y}", tr.id);
                }
                None => {
                    let _ = writeln!(s, "{},{t},,", tr.id);
                }
            }
        }
    }
    s
}

pub fn write_tracks(path: &Path, tracks: &[Track]) -> Result<()> {
    write_text(path, &format_tracks(tracks))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<Track>> {
        parse_tracks(Path::new("t.csv"), text, &IngestOptions::default())
    }

    #[test]
    fn regular_file_gives_one_track() {
        let t = parse("id,timestamp,x_m,y_m\na,2020-01-01T00:00:00Z,0,0\na,2020-01-01T01:00:00Z,1,0\na,2020-01-01T02:00:00Z,2,0\n").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].len(), 3);
        assert_eq!(t[0].interval, 3600);
    }

    #[test]
    fn blank_coordinates_and_gaps_are_missing() {
        let t = parse("id,timestamp,x_m,y_m\na,2020-01-01 00:00:00,0,0\na,2020-01-01 01:00:00,,\na,2020-01-01 02:00:00,2,0\na,2020-01-01 04:00:00,3,0\nb,2020-01-01T00:00:00Z,5,5\nb,2020-01-01T01:00:00Z,6,5\n").unwrap();
        assert_eq!(t[0].points, vec![Some((0.0, 0.0)), None, Some((2.0, 0.0)), None, Some((3.0, 0.0))]);
        assert_eq!(t[1].id, "b");
    }

    #[test]
    fn validation_names_the_line() {
        let e = parse("id,timestamp,x_m,y_m\na,2020-01-01T02:00:00Z,0,0\na,2020-01-01T01:00:00Z,1,0\n").unwrap_err().to_string();
        assert!(e.starts_with("t.csv:3:"), "{e}");
        let e = parse("id,timestamp,x_m,y_m\na,2020-01-01T00:00:00Z,0,0\na,2020-01-01T01:00:00Z,1,0\na,2020-01-01T02:00:00Z,1,0\na,2020-01-01T02:30:00Z,1,0\n")
            .unwrap_err()
            .to_string();
        assert!(e.starts_with("t.csv:5:"), "{e}");
        assert!(parse("id,timestamp,x,y\n").unwrap_err().to_string().contains("unit"));
        assert!(parse("id,timestamp,x_m,y_m\na,yesterday,0,0\n").unwrap_err().to_string().contains(":2:"));
        assert!(parse("id,timestamp,x_m,y_m\na,2020-01-01T00:00:00Z,0,\n").is_err());
    }

    #[test]
    fn write_then_read_round_trips() {
        let tr = Track { id: "m1".into(), start: 1_600_000_000, interval: 3600, points: vec![Some((1.5, -2.0)), None, Some((1e6, 0.25))] };
        let back = parse(&format_tracks(std::slice::from_ref(&tr))).unwrap();
        assert_eq!(back, vec![tr]);
        let km = parse("id,timestamp,x_km,y_km\na,2020-01-01T00:00:00Z,1.5,2\na,2020-01-01T01:00:00Z,1,0\n").unwrap();
        assert_eq!(km[0].points[0], Some((1500.0, 2000.0)));
    }
}
