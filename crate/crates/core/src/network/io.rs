//! Plain-text network files.
//!
//! ```text
//! spdt-net v1 horizon=<days>
//! <day> <host_id> <neighbour_id> <t_s> <t_l> <t_s_n> <t_l_n>
//! ```
//!
//! Every line, including the last, is newline-terminated; a missing final
//! newline is treated as truncation.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{DynamicContactNetwork, SpdtLink, UserIndex};
use crate::error::{Error, Result};
use crate::trace::UserId;

pub const FORMAT_TAG: &str = "spdt-net v1";

pub fn write_network<W: Write>(mut out: W, net: &DynamicContactNetwork) -> std::io::Result<()> {
    writeln!(out, "{FORMAT_TAG} horizon={}", net.horizon())?;
    for l in net.links() {
        writeln!(
            out,
            "{} {} {} {} {} {} {}",
            l.day,
            net.user_name(l.host),
            net.user_name(l.neighbour),
            l.t_s,
            l.t_l,
            l.t_s_n,
            l.t_l_n
        )?;
    }
    out.flush()
}

pub fn save_network(net: &DynamicContactNetwork, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    write_network(BufWriter::new(file), net)?;
    Ok(())
}

pub fn load_network(path: &Path) -> Result<DynamicContactNetwork> {
    let file = File::open(path)?;
    read_network(BufReader::new(file), path)
}

/// Parses a network file; `origin` is only used in error messages.
pub fn read_network<R: Read>(input: R, origin: &Path) -> Result<DynamicContactNetwork> {
    let fail = |line: usize, reason: String| Error::NetworkFormat {
        path: origin.to_path_buf(),
        reason: format!("line {line}: {reason}"),
    };

    let mut reader = BufReader::new(input);
    let mut buf = String::new();
    let mut lineno = 0usize;
    let mut next_line = |buf: &mut String| -> Result<Option<usize>> {
        buf.clear();
        let n = reader.read_line(buf)?;
        if n == 0 {
            return Ok(None);
        }
        lineno += 1;
        if !buf.ends_with('\n') {
            return Err(fail(lineno, "truncated (no trailing newline)".into()));
        }
        Ok(Some(lineno))
    };

    let Some(first) = next_line(&mut buf)? else {
        return Err(fail(0, "empty file".into()));
    };
    let horizon = parse_header(buf.trim_end()).map_err(|r| fail(first, r))?;

    let mut names: Vec<UserId> = Vec::new();
    let mut raw: Vec<(u32, String, String, [i64; 4])> = Vec::new();
    while let Some(n) = next_line(&mut buf)? {
        let fields: Vec<&str> = buf.split_ascii_whitespace().collect();
        if fields.len() != 7 {
            return Err(fail(n, format!("expected 7 fields, found {}", fields.len())));
        }
        let day: u32 = fields[0].parse().map_err(|_| fail(n, format!("bad day {:?}", fields[0])))?;
        if day >= horizon {
            return Err(fail(n, format!("day {day} outside horizon {horizon}")));
        }
        let mut t = [0i64; 4];
        for (slot, f) in t.iter_mut().zip(&fields[3..]) {
            *slot = f.parse().map_err(|_| fail(n, format!("bad time {f:?}")))?;
        }
        if fields[1] == fields[2] {
            return Err(fail(n, "host and neighbour are the same user".into()));
        }
        names.push(fields[1].to_owned());
        names.push(fields[2].to_owned());
        raw.push((day, fields[1].to_owned(), fields[2].to_owned(), t));
    }

    names.sort_unstable();
    names.dedup();
    let index_of = |s: &str| names.binary_search_by(|u| u.as_str().cmp(s)).unwrap() as UserIndex;
    let links: Vec<SpdtLink> = raw
        .iter()
        .map(|(day, host, neighbour, t)| SpdtLink {
            day: *day,
            host: index_of(host),
            neighbour: index_of(neighbour),
            t_s: t[0],
            t_l: t[1],
            t_s_n: t[2],
            t_l_n: t[3],
        })
        .collect();
    Ok(DynamicContactNetwork::from_links(&names, horizon, links))
}

fn parse_header(line: &str) -> std::result::Result<u32, String> {
    let rest = line
        .strip_prefix(FORMAT_TAG)
        .ok_or_else(|| format!("unsupported format header {line:?}"))?;
    let horizon = rest
        .trim()
        .strip_prefix("horizon=")
        .ok_or_else(|| format!("missing horizon in {line:?}"))?;
    horizon.parse().map_err(|_| format!("bad horizon {horizon:?}"))
}
