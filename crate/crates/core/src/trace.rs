//! Location-update traces and their segmentation into visits.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type UserId = String;

const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// One timestamped position report. Times are whole minutes since the trace
/// epoch, positions planar metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationUpdate {
    pub user: UserId,
    pub t: i64,
    pub x: f64,
    pub y: f64,
}

/// A user's contiguous stay at one place, anchored at its first update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub user: UserId,
    pub anchor: (f64, f64),
    pub t_start: i64,
    pub t_end: i64,
    pub n_updates: usize,
}

impl Visit {
    pub fn duration(&self) -> i64 {
        self.t_end - self.t_start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceFormat {
    /// `user_id,t_min,x_m,y_m`
    #[default]
    Planar,
    /// `user_id,t_min,lat,lon`, projected equirectangularly about the
    /// centroid of all valid rows.
    LatLon,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedTrace {
    /// Sorted by user, then time.
    pub updates: Vec<LocationUpdate>,
    pub skipped: usize,
}

/// Reads a trace CSV. Malformed rows are skipped and counted; a missing or
/// unexpected header is an error. An empty input is an empty trace.
pub fn parse_trace<R: Read>(input: R, format: TraceFormat) -> Result<ParsedTrace> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);

    let mut records = reader.records();
    let header = match records.next() {
        None => return Ok(ParsedTrace::default()),
        Some(Ok(h)) => h,
        Some(Err(e)) => return Err(Error::TraceHeader(e.to_string())),
    };
    let expected: &[&str] = match format {
        TraceFormat::Planar => &["user_id", "t_min", "x_m", "y_m"],
        TraceFormat::LatLon => &["user_id", "t_min", "lat", "lon"],
    };
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(Error::TraceHeader(header.iter().collect::<Vec<_>>().join(",")));
    }

    let mut updates = Vec::new();
    let mut skipped = 0;
    for rec in records {
        let rec = match rec {
            Ok(r) => r,
            Err(e) if e.is_io_error() => return Err(csv_io(e)),
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        match parse_row(&rec) {
            Some(u) => updates.push(u),
            None => skipped += 1,
        }
    }

    if format == TraceFormat::LatLon {
        project_latlon(&mut updates);
    }
    updates.sort_by(|a, b| a.user.cmp(&b.user).then(a.t.cmp(&b.t)));
    Ok(ParsedTrace { updates, skipped })
}

fn parse_row(rec: &csv::StringRecord) -> Option<LocationUpdate> {
    if rec.len() != 4 {
        return None;
    }
    let user = rec.get(0)?;
    if user.is_empty() || user.chars().any(char::is_whitespace) {
        return None;
    }
    let t: f64 = rec.get(1)?.parse().ok()?;
    let a: f64 = rec.get(2)?.parse().ok()?;
    let b: f64 = rec.get(3)?.parse().ok()?;
    if !(t.is_finite() && a.is_finite() && b.is_finite()) {
        return None;
    }
    Some(LocationUpdate {
        user: user.to_owned(),
        t: t.round() as i64,
        x: a,
        y: b,
    })
}

/// Rows parsed in lat/lon order carry `(lat, lon)` in `(x, y)`; rewrites
/// them to metres east/north of the centroid.
fn project_latlon(updates: &mut [LocationUpdate]) {
    if updates.is_empty() {
        return;
    }
    let n = updates.len() as f64;
    let lat0 = updates.iter().map(|u| u.x).sum::<f64>() / n;
    let lon0 = updates.iter().map(|u| u.y).sum::<f64>() / n;
    let k = lat0.to_radians().cos();
    for u in updates {
        let (lat, lon) = (u.x, u.y);
        u.x = EARTH_RADIUS_M * (lon - lon0).to_radians() * k;
        u.y = EARTH_RADIUS_M * (lat - lat0).to_radians();
    }
}

pub fn write_trace<W: Write>(out: W, updates: &[LocationUpdate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["user_id", "t_min", "x_m", "y_m"])
        .map_err(csv_io)?;
    for u in updates {
        w.write_record([u.user.as_str(), &u.t.to_string(), &u.x.to_string(), &u.y.to_string()])
            .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Thresholds that close the current visit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentRules {
    /// Metres from the visit anchor.
    pub radius: f64,
    /// Minutes since the previous update of the visit.
    pub max_gap: i64,
}

impl Default for SegmentRules {
    fn default() -> Self {
        SegmentRules {
            radius: 20.0,
            max_gap: 30,
        }
    }
}

/// Greedy left-to-right segmentation of one user's time-sorted updates.
pub fn segment_user(updates: &[LocationUpdate], rules: SegmentRules) -> Vec<Visit> {
    let mut visits: Vec<Visit> = Vec::new();
    let r2 = rules.radius * rules.radius;
    for u in updates {
        if let Some(v) = visits.last_mut() {
            let (dx, dy) = (u.x - v.anchor.0, u.y - v.anchor.1);
            if dx * dx + dy * dy <= r2 && u.t - v.t_end <= rules.max_gap {
                v.t_end = u.t;
                v.n_updates += 1;
                continue;
            }
        }
        visits.push(Visit {
            user: u.user.clone(),
            anchor: (u.x, u.y),
            t_start: u.t,
            t_end: u.t,
            n_updates: 1,
        });
    }
    visits
}

/// Segments a trace sorted by user then time. Output is ordered by user,
/// then visit start.
pub fn segment_visits(updates: &[LocationUpdate], rules: SegmentRules) -> Vec<Visit> {
    user_runs(updates)
        .par_iter()
        .flat_map_iter(|run| segment_user(run, rules))
        .collect()
}

/// Splits a user-sorted slice into one sub-slice per user.
pub fn user_runs(updates: &[LocationUpdate]) -> Vec<&[LocationUpdate]> {
    updates
        .chunk_by(|a, b| a.user == b.user)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn upd(user: &str, t: i64, x: f64, y: f64) -> LocationUpdate {
        LocationUpdate {
            user: user.into(),
            t,
            x,
            y,
        }
    }

    #[test]
    fn empty_input_is_empty_trace() {
        let parsed = parse_trace(&b""[..], TraceFormat::Planar).unwrap();
        assert!(parsed.updates.is_empty());
        assert_eq!(parsed.skipped, 0);
        let header_only = parse_trace(&b"user_id,t_min,x_m,y_m\n"[..], TraceFormat::Planar).unwrap();
        assert!(header_only.updates.is_empty());
    }

    #[test]
    fn bad_header_is_rejected() {
        let err = parse_trace(&b"id,time,x,y\na,1,2,3\n"[..], TraceFormat::Planar).unwrap_err();
        assert!(matches!(err, Error::TraceHeader(_)));
        assert!(parse_trace(&b"user_id,t_min,x_m,y_m\n"[..], TraceFormat::LatLon).is_err());
    }

    #[test]
    fn rows_sorted_per_user() {
        let csv = "user_id,t_min,x_m,y_m\nb,20,0,0\na,30,1,1\nb,5,0,0\na,10,2,2\n";
        let parsed = parse_trace(csv.as_bytes(), TraceFormat::Planar).unwrap();
        let got: Vec<_> = parsed.updates.iter().map(|u| (u.user.as_str(), u.t)).collect();
        assert_eq!(got, vec![("a", 10), ("a", 30), ("b", 5), ("b", 20)]);
    }

    #[test]
    fn malformed_rows_skipped_and_counted() {
        let csv = "user_id,t_min,x_m,y_m\na,0,1,1\na,5,north,1\na,6,1\nb,1,inf,0\n,2,0,0\nc,3,0,0\n";
        let parsed = parse_trace(csv.as_bytes(), TraceFormat::Planar).unwrap();
        assert_eq!(parsed.updates.len(), 2);
        assert_eq!(parsed.skipped, 4);
    }

    #[test]
    fn latlon_projection_preserves_short_distances() {
        // 0.0001 deg of latitude ≈ 11.12 m.
        let csv = "user_id,t_min,lat,lon\na,0,39.9,116.4\na,1,39.9001,116.4\n";
        let parsed = parse_trace(csv.as_bytes(), TraceFormat::LatLon).unwrap();
        let (p, q) = (&parsed.updates[0], &parsed.updates[1]);
        let d = ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt();
        assert!((d - 11.119).abs() < 0.01, "{d}");
    }

    #[test]
    fn fractional_minutes_round() {
        let parsed = parse_trace(&b"user_id,t_min,x_m,y_m\na,10.6,0,0\n"[..], TraceFormat::Planar).unwrap();
        assert_eq!(parsed.updates[0].t, 11);
    }

    #[test]
    fn stationary_updates_form_one_visit() {
        let u = [upd("a", 0, 0.0, 0.0), upd("a", 10, 0.0, 0.0), upd("a", 20, 0.0, 0.0)];
        let v = segment_user(&u, SegmentRules::default());
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].anchor, v[0].t_start, v[0].t_end), ((0.0, 0.0), 0, 20));
    }

    #[test]
    fn distance_splits_visit() {
        let u = [upd("a", 0, 0.0, 0.0), upd("a", 5, 0.0, 25.0)];
        assert_eq!(segment_user(&u, SegmentRules::default()).len(), 2);
        let edge = [upd("a", 0, 0.0, 0.0), upd("a", 5, 0.0, 20.0)];
        assert_eq!(segment_user(&edge, SegmentRules::default()).len(), 1);
    }

    #[test]
    fn gap_splits_visit() {
        let u = [upd("a", 0, 0.0, 0.0), upd("a", 40, 0.0, 0.0)];
        let v = segment_user(&u, SegmentRules::default());
        assert_eq!(v.len(), 2);
        let edge = [upd("a", 0, 0.0, 0.0), upd("a", 30, 0.0, 0.0)];
        assert_eq!(segment_user(&edge, SegmentRules::default()).len(), 1);
    }

    #[test]
    fn anchor_is_first_update_not_centroid() {
        // Drifting 15 m per step: the third update is 30 m from the anchor.
        let u = [upd("a", 0, 0.0, 0.0), upd("a", 5, 15.0, 0.0), upd("a", 10, 30.0, 0.0)];
        let v = segment_user(&u, SegmentRules::default());
        assert_eq!(v.len(), 2);
        assert_eq!(v[1].anchor, (30.0, 0.0));
    }

    #[test]
    fn single_update_is_zero_duration_visit() {
        let v = segment_user(&[upd("a", 7, 1.0, 1.0)], SegmentRules::default());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].duration(), 0);
    }

    #[test]
    fn multi_user_segmentation_is_ordered() {
        let u = vec![
            upd("a", 0, 0.0, 0.0),
            upd("a", 100, 0.0, 0.0),
            upd("b", 0, 0.0, 0.0),
        ];
        let v = segment_visits(&u, SegmentRules::default());
        let got: Vec<_> = v.iter().map(|v| (v.user.as_str(), v.t_start)).collect();
        assert_eq!(got, vec![("a", 0), ("a", 100), ("b", 0)]);
    }

    #[test]
    fn write_then_parse() {
        let u = vec![upd("a", 0, 1.5, -2.0), upd("b", 3, 0.0, 4.25)];
        let mut buf = Vec::new();
        write_trace(&mut buf, &u).unwrap();
        let parsed = parse_trace(buf.as_slice(), TraceFormat::Planar).unwrap();
        assert_eq!(parsed.updates, u);
    }
}
