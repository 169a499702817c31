//! Trace persistence.
//!
//! Text form: a header line `dmdtrace v1 kernel=<k> n=<n> d=<d>` (`d=0` when
//! there is no tile, `kernel=custom` for hand-written traces) followed by
//! whitespace-separated events such as `A5`, `B12`, `T7`. Lines starting with
//! `#` are ignored. An optional `sem=<flags>` header key records non-default
//! [`TraceSemantics`].
//!
//! Binary form: raw little-endian `u64` ids, region in the top two bits.

use std::io::{self, BufRead, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{DatumId, KernelKind, MemoryTrace, Region, TraceSemantics};

pub const MAGIC: &str = "dmdtrace";

#[derive(Debug, Error)]
pub enum TraceIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("binary trace length {0} is not a multiple of 8")]
    Truncated(usize),
}

fn parse_err(line: usize, msg: impl Into<String>) -> TraceIoError {
    TraceIoError::Parse { line, msg: msg.into() }
}

pub fn parse_event(tok: &str) -> Option<DatumId> {
    let mut chars = tok.chars();
    let region = Region::from_tag(chars.next()?)?;
    let rest = chars.as_str();
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let index: u64 = rest.parse().ok()?;
    (index <= DatumId::MAX_INDEX).then(|| DatumId::new(region, index))
}

pub fn header_line(trace: &MemoryTrace) -> String {
    let kernel = trace.kernel.map_or("custom", KernelKind::name);
    let mut h = format!("{MAGIC} v1 kernel={kernel} n={} d={}", trace.n, trace.tile.unwrap_or(0));
    if trace.semantics != TraceSemantics::default() {
        h.push_str(&format!(" sem={}", trace.semantics));
    }
    h
}

pub fn write_text<W: Write>(trace: &MemoryTrace, w: W) -> io::Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "{}", header_line(trace))?;
    for e in &trace.events {
        writeln!(w, "{e}")?;
    }
    w.flush()
}

fn apply_header(trace: &mut MemoryTrace, line: &str, lineno: usize) -> Result<(), TraceIoError> {
    let mut parts = line.split_whitespace();
    parts.next();
    if parts.next() != Some("v1") {
        return Err(parse_err(lineno, "unsupported trace version"));
    }
    for kv in parts {
        let (k, v) = kv.split_once('=').ok_or_else(|| parse_err(lineno, format!("bad header field '{kv}'")))?;
        let num = || v.parse::<usize>().map_err(|_| parse_err(lineno, format!("bad value for {k}: '{v}'")));
        match k {
            "kernel" if v == "custom" => trace.kernel = None,
            "kernel" => trace.kernel = Some(v.parse().map_err(|e| parse_err(lineno, format!("{e}")))?),
            "n" => trace.n = num()?,
            "d" => trace.tile = Some(num()?).filter(|&d| d > 0),
            "sem" => trace.semantics = v.parse().map_err(|e| parse_err(lineno, format!("{e}")))?,
            _ => return Err(parse_err(lineno, format!("unknown header field '{k}'"))),
        }
    }
    Ok(())
}

/// Parses the text form. The header is optional; without it the trace has
/// no kernel metadata.
pub fn read_text<R: BufRead>(r: R) -> Result<MemoryTrace, TraceIoError> {
    let mut trace = MemoryTrace::from_events(Vec::new());
    let mut seen_content = false;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if trimmed.starts_with(MAGIC) {
            if seen_content {
                return Err(parse_err(lineno, "header after events"));
            }
            apply_header(&mut trace, trimmed, lineno)?;
            seen_content = true;
            continue;
        }
        seen_content = true;
        for tok in trimmed.split_whitespace() {
            let e = parse_event(tok).ok_or_else(|| parse_err(lineno, format!("malformed event '{tok}'")))?;
            trace.events.push(e);
        }
    }
    Ok(trace)
}

pub fn write_binary<W: Write>(trace: &MemoryTrace, w: W) -> io::Result<()> {
    let mut w = BufWriter::new(w);
    for e in &trace.events {
        w.write_all(&e.raw().to_le_bytes())?;
    }
    w.flush()
}

pub fn read_binary<R: Read>(mut r: R) -> Result<MemoryTrace, TraceIoError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() % 8 != 0 {
        return Err(TraceIoError::Truncated(buf.len()));
    }
    let events =
        buf.chunks_exact(8).map(|c| DatumId::from_raw(u64::from_le_bytes(c.try_into().expect("chunk of 8")))).collect();
    Ok(MemoryTrace::from_events(events))
}

/// Writes binary when the path ends in `.bin`, text otherwise.
pub fn save(trace: &MemoryTrace, path: &Path) -> Result<(), TraceIoError> {
    let f = std::fs::File::create(path)?;
    if is_binary_path(path) {
        write_binary(trace, f)?;
    } else {
        write_text(trace, f)?;
    }
    Ok(())
}

pub fn load(path: &Path) -> Result<MemoryTrace, TraceIoError> {
    let f = std::fs::File::open(path)?;
    if is_binary_path(path) {
        read_binary(io::BufReader::new(f))
    } else {
        read_text(io::BufReader::new(f))
    }
}

fn is_binary_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{rmm_trace, tiled_trace};

    #[test]
    fn text_round_trip() {
        let t = tiled_trace(4, 2, TraceSemantics::default()).unwrap();
        let mut buf = Vec::new();
        write_text(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("dmdtrace v1 kernel=tiled n=4 d=2\nA0\nB0\n"));
        let back = read_text(&buf[..]).unwrap();
        assert_eq!(back.events, t.events);
        assert_eq!((back.kernel, back.n, back.tile), (Some(KernelKind::Tiled), 4, Some(2)));
    }

    #[test]
    fn binary_round_trip() {
        let t = rmm_trace(4, TraceSemantics::default()).unwrap();
        let mut buf = Vec::new();
        write_binary(&t, &mut buf).unwrap();
        assert_eq!(buf.len(), 8 * t.len());
        assert_eq!(read_binary(&buf[..]).unwrap().events, t.events);
        assert!(matches!(read_binary(&buf[..5]), Err(TraceIoError::Truncated(5))));
    }

    #[test]
    fn headerless_and_semantics() {
        let t = read_text("# demo\nA0 A1 A1\nA2 A0\n".as_bytes()).unwrap();
        assert_eq!(t.len(), 5);
        assert_eq!(t.kernel, None);
        let t = read_text("dmdtrace v1 kernel=naive n=2 d=0 sem=acc=mem,add=row,base=abc\n".as_bytes()).unwrap();
        assert!(!t.semantics.accumulator_in_register);
        assert_eq!(t.tile, None);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_text("A0 X1".as_bytes()).is_err());
        assert!(read_text("A".as_bytes()).is_err());
        assert!(read_text("A-1".as_bytes()).is_err());
        assert!(read_text("dmdtrace v2 n=1".as_bytes()).is_err());
        assert!(read_text("dmdtrace v1 n=x".as_bytes()).is_err());
        assert!(read_text("A0\ndmdtrace v1 n=1".as_bytes()).is_err());
    }
}
