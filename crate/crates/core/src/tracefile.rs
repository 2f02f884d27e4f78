//! Plain-text trace files.
//!
//! ```text
//! # tracekit v1 n=<n> q=<q> lambda=<lambda> beta=<beta> seed=<seed>
//! 0110
//! 1
//!
//! 10110
//! ```
//!
//! One trace per line, ASCII `0`/`1`, newline-terminated; an empty line is an
//! empty trace. Parameters are written with Rust's shortest round-trip float
//! formatting. Channel stages run in [`DEFAULT_ORDER`]; a non-default order is
//! recorded as a trailing `order=del,sub,...` key, which readers also accept.

use std::io::{BufRead, Write};

use crate::channels::{parse_bits, ChannelSpec, Stage, Trace, TraceSet, DEFAULT_ORDER};
use crate::error::{param, Error, Result};
use crate::seed;

pub const MAGIC: &str = "# tracekit v1";

pub fn header_line(ts: &TraceSet) -> String {
    let spec = &ts.spec;
    let mut line = format!(
        "{MAGIC} n={} q={} lambda={} beta={} seed={}",
        ts.source_length,
        spec.effective_q(),
        spec.effective_lambda(),
        spec.effective_beta(),
        ts.master_seed
    );
    if !spec.is_default_order() {
        let order: Vec<_> = spec.stage_order().iter().map(|s| s.name()).collect();
        line.push_str(" order=");
        line.push_str(&order.join(","));
    }
    line
}

pub fn write_traces<W: Write>(mut w: W, ts: &TraceSet) -> std::io::Result<()> {
    writeln!(w, "{}", header_line(ts))?;
    for t in &ts.traces {
        writeln!(w, "{t}")?;
    }
    w.flush()
}

/// Reads a trace file. Trace seeds are re-derived from the header's master seed.
pub fn read_traces<R: BufRead>(r: R) -> Result<TraceSet> {
    let mut lines = r.lines();
    let header = match lines.next() {
        Some(line) => line.map_err(io_err)?,
        None => return param("trace file is empty"),
    };
    let rest = header
        .strip_prefix(MAGIC)
        .ok_or_else(|| Error::Parameter(format!("missing `{MAGIC}` header")))?;

    let (mut n, mut q, mut lambda, mut beta, mut seed_v) = (None, None, None, None, None);
    let mut order = DEFAULT_ORDER.to_vec();
    for field in rest.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::Parameter(format!("malformed header field {field:?}")))?;
        match key {
            "n" => n = Some(parse_num::<usize>(key, value)?),
            "q" => q = Some(parse_num::<f64>(key, value)?),
            "lambda" => lambda = Some(parse_num::<f64>(key, value)?),
            "beta" => beta = Some(parse_num::<f64>(key, value)?),
            "seed" => seed_v = Some(parse_num::<u64>(key, value)?),
            "order" => {
                order = value
                    .split(',')
                    .map(str::parse::<Stage>)
                    .collect::<Result<Vec<_>>>()?
            }
            _ => return param(format!("unknown header key {key:?}")),
        }
    }
    let missing = |k: &str| Error::Parameter(format!("header is missing `{k}=`"));
    let n = n.ok_or_else(|| missing("n"))?;
    let spec = ChannelSpec::new(
        q.ok_or_else(|| missing("q"))?,
        lambda.ok_or_else(|| missing("lambda"))?,
        beta.ok_or_else(|| missing("beta"))?,
        order,
    )?;
    let master_seed = seed_v.ok_or_else(|| missing("seed"))?;

    let mut traces = Vec::new();
    for (t, line) in lines.enumerate() {
        let line = line.map_err(io_err)?;
        let bits = parse_bits(line.trim_end_matches('\r'))?;
        traces.push(Trace::new(bits, seed::trace_seed(master_seed, t as u64))?);
    }
    Ok(TraceSet {
        traces,
        spec,
        source_length: n,
        master_seed,
    })
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Parameter(format!("header value {key}={value:?} is not a number")))
}

fn io_err(e: std::io::Error) -> Error {
    Error::Parameter(format!("cannot read trace file: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{sample_traces, BitString};

    #[test]
    fn header_is_exact() {
        let x: BitString = "1101".parse().unwrap();
        let ts = sample_traces(&x, &ChannelSpec::full(0.5, 0.1, 0.25).unwrap(), 3, 7).unwrap();
        assert_eq!(header_line(&ts), "# tracekit v1 n=4 q=0.5 lambda=0.1 beta=0.25 seed=7");
        let del = sample_traces(&x, &ChannelSpec::deletion(0.3).unwrap(), 1, 0).unwrap();
        assert_eq!(
            header_line(&del),
            "# tracekit v1 n=4 q=0.3 lambda=0 beta=0 seed=0 order=del"
        );
    }

    #[test]
    fn write_then_read_preserves_traces() {
        let x: BitString = "1101001".parse().unwrap();
        let spec = ChannelSpec::new(0.4, 0.1, 0.0, vec![Stage::Deletion, Stage::Substitution]).unwrap();
        let ts = sample_traces(&x, &spec, 25, 11).unwrap();
        let mut buf = Vec::new();
        write_traces(&mut buf, &ts).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 26);
        assert!(text.lines().all(|l| !l.ends_with(' ')));
        let back = read_traces(&buf[..]).unwrap();
        assert_eq!(back, ts);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_traces(&b""[..]).is_err());
        assert!(read_traces(&b"# other\n"[..]).is_err());
        assert!(read_traces(&b"# tracekit v1 n=2 q=0.5 lambda=0 beta=0\n"[..]).is_err());
        assert!(read_traces(&b"# tracekit v1 n=2 q=0.5 lambda=0 beta=0 seed=1\n012\n"[..]).is_err());
    }
}
