//! CSV trace files for streams, the two-input adder and the engine.
//! Positions are written 1-based.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::arith::AdderTraceRow;
use crate::engine::EngineTraceRow;
use crate::error::{domain, Error, Result};
use crate::formats::{
    decode_bipolar, decode_sm, decode_tlb, decode_unipolar, encode_bipolar, encode_sm, encode_tlb,
    encode_unipolar, BitStream, SmStream, TlbStream,
};
use crate::rng::RandomSource;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamFormat {
    Unipolar,
    Bipolar,
    Sm,
    Tlb,
}

impl StreamFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            StreamFormat::Unipolar => "unipolar",
            StreamFormat::Bipolar => "bipolar",
            StreamFormat::Sm => "sm",
            StreamFormat::Tlb => "tlb",
        }
    }

    pub fn header(self) -> &'static str {
        match self {
            StreamFormat::Unipolar | StreamFormat::Bipolar => "l,bit",
            StreamFormat::Sm => "l,sign,mag",
            StreamFormat::Tlb => "l,pos,neg",
        }
    }
}

impl FromStr for StreamFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unipolar" => Ok(StreamFormat::Unipolar),
            "bipolar" => Ok(StreamFormat::Bipolar),
            "sm" => Ok(StreamFormat::Sm),
            "tlb" => Ok(StreamFormat::Tlb),
            other => Err(domain(format!(
                "unknown format `{other}` (expected unipolar, bipolar, sm or tlb)"
            ))),
        }
    }
}

impl fmt::Display for StreamFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A stream in any of the four formats.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EncodedStream {
    Unipolar(BitStream),
    Bipolar(BitStream),
    Sm(SmStream),
    Tlb(TlbStream),
}

impl EncodedStream {
    pub fn encode(format: StreamFormat, value: f64, len: usize, rng: &mut RandomSource) -> Result<Self> {
        Ok(match format {
            StreamFormat::Unipolar => EncodedStream::Unipolar(encode_unipolar(value, len, rng)?),
            StreamFormat::Bipolar => EncodedStream::Bipolar(encode_bipolar(value, len, rng)?),
            StreamFormat::Sm => EncodedStream::Sm(encode_sm(value, len, rng)?),
            StreamFormat::Tlb => EncodedStream::Tlb(encode_tlb(value, len, rng)?),
        })
    }

    pub fn format(&self) -> StreamFormat {
        match self {
            EncodedStream::Unipolar(_) => StreamFormat::Unipolar,
            EncodedStream::Bipolar(_) => StreamFormat::Bipolar,
            EncodedStream::Sm(_) => StreamFormat::Sm,
            EncodedStream::Tlb(_) => StreamFormat::Tlb,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            EncodedStream::Unipolar(s) | EncodedStream::Bipolar(s) => s.len(),
            EncodedStream::Sm(s) => s.len(),
            EncodedStream::Tlb(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn decode(&self) -> Result<f64> {
        match self {
            EncodedStream::Unipolar(s) => decode_unipolar(s),
            EncodedStream::Bipolar(s) => decode_bipolar(s),
            EncodedStream::Sm(s) => decode_sm(s),
            EncodedStream::Tlb(s) => decode_tlb(s),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.format().header())?;
        for i in 0..self.len() {
            match self {
                EncodedStream::Unipolar(s) | EncodedStream::Bipolar(s) => {
                    writeln!(out, "{},{}", i + 1, s.get(i) as u8)?
                }
                EncodedStream::Sm(s) => {
                    let (a, b) = s.bits(i);
                    writeln!(out, "{},{},{}", i + 1, a as u8, b as u8)?
                }
                EncodedStream::Tlb(s) => {
                    let (a, b) = s.bits(i);
                    writeln!(out, "{},{},{}", i + 1, a as u8, b as u8)?
                }
            }
        }
        Ok(())
    }

    /// Reads a trace written by [`write_csv`](Self::write_csv). Rows must be
    /// numbered 1, 2, 3, ... in order.
    pub fn read_csv<R: BufRead>(format: StreamFormat, input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Trace("empty file".into()))??;
        if header.trim() != format.header() {
            return Err(Error::Trace(format!(
                "header `{}` does not match `{}` for format {format}",
                header.trim(),
                format.header()
            )));
        }
        let columns = format.header().split(',').count();
        let mut first = Vec::new();
        let mut second = Vec::new();
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != columns {
                return Err(Error::Trace(format!("row {}: expected {columns} fields", row + 1)));
            }
            let l: usize = fields[0]
                .parse()
                .map_err(|_| Error::Trace(format!("row {}: bad position `{}`", row + 1, fields[0])))?;
            if l != first.len() + 1 {
                return Err(Error::Trace(format!("row {}: position {l} out of sequence", row + 1)));
            }
            first.push(parse_bit(fields[1], row)?);
            if columns == 3 {
                second.push(parse_bit(fields[2], row)?);
            }
        }
        if first.is_empty() {
            return Err(Error::Trace("no stream positions".into()));
        }
        let a = BitStream::from_bits(first);
        Ok(match format {
            StreamFormat::Unipolar => EncodedStream::Unipolar(a),
            StreamFormat::Bipolar => EncodedStream::Bipolar(a),
            StreamFormat::Sm => EncodedStream::Sm(SmStream::new(a, BitStream::from_bits(second))?),
            StreamFormat::Tlb => EncodedStream::Tlb(TlbStream::new(a, BitStream::from_bits(second))?),
        })
    }
}

fn parse_bit(field: &str, row: usize) -> Result<bool> {
    match field.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::Trace(format!("row {}: `{other}` is not a bit", row + 1))),
    }
}

pub const ADDER_TRACE_HEADER: &str = "l,x,y,z,pc_count,nc_count,overflows";

pub fn write_adder_trace<W: Write>(rows: &[AdderTraceRow], mut out: W) -> Result<()> {
    writeln!(out, "{ADDER_TRACE_HEADER}")?;
    for (i, r) in rows.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            i + 1,
            r.x.value(),
            r.y.value(),
            r.z.value(),
            r.pc_count,
            r.nc_count,
            r.overflows
        )?;
    }
    Ok(())
}

pub const ENGINE_TRACE_HEADER: &str =
    "l,substep,ps_front,ns_front,pc_count,nc_count,zp,zn,cc_cancellations";

pub fn write_engine_trace<W: Write>(rows: &[EngineTraceRow], mut out: W) -> Result<()> {
    writeln!(out, "{ENGINE_TRACE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.l,
            r.substep,
            r.ps_front as u8,
            r.ns_front as u8,
            r.pc_count,
            r.nc_count,
            r.zp as u8,
            r.zn as u8,
            r.cc_cancellations
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::nonscaled_add_traced;
    use crate::formats::Ternary;
    use proptest::prelude::*;

    #[test]
    fn tlb_trace_layout() {
        let s = TlbStream::from_ternary(&[Ternary::Pos, Ternary::Neg, Ternary::Zero]);
        let mut buf = Vec::new();
        EncodedStream::Tlb(s).write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "l,pos,neg\n1,1,0\n2,0,1\n3,0,0\n");
    }

    #[test]
    fn rejects_malformed_traces() {
        let read = |f, text: &str| EncodedStream::read_csv(f, text.as_bytes());
        assert!(read(StreamFormat::Tlb, "l,sign,mag\n1,0,1\n").is_err());
        assert!(read(StreamFormat::Tlb, "l,pos,neg\n2,0,1\n").is_err());
        assert!(read(StreamFormat::Tlb, "l,pos,neg\n1,0,2\n").is_err());
        assert!(read(StreamFormat::Unipolar, "l,bit\n").is_err());
        assert!(read(StreamFormat::Unipolar, "").is_err());
        assert!("ternary".parse::<StreamFormat>().is_err());
    }

    #[test]
    fn adder_trace_rows() {
        let x = TlbStream::from_ternary(&[Ternary::Pos, Ternary::Pos]);
        let (_, _, rows) = nonscaled_add_traced(&x, &x, 3).unwrap();
        let mut buf = Vec::new();
        write_adder_trace(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "l,x,y,z,pc_count,nc_count,overflows\n1,1,1,1,1,0,0\n2,1,1,1,2,0,0\n");
    }

    proptest! {
        #[test]
        fn written_traces_read_back(value in -1.0f64..=1.0, len in 1usize..300, seed in any::<u64>(), fmt in 0usize..4) {
            let format = [StreamFormat::Unipolar, StreamFormat::Bipolar, StreamFormat::Sm, StreamFormat::Tlb][fmt];
            let value = if format == StreamFormat::Unipolar { value.abs() } else { value };
            let s = EncodedStream::encode(format, value, len, &mut RandomSource::new(seed)).unwrap();
            let mut buf = Vec::new();
            s.write_csv(&mut buf).unwrap();
            let back = EncodedStream::read_csv(format, buf.as_slice()).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
