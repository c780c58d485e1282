//! Raw click records and their file formats.
//!
//! CSV: header `detector,cycle_index,timestamp_ps`, one click per row,
//! rows in time order. Binary: the magic `HOMTAG01`, then the resolution and
//! the record count as little-endian `u64`, then 17-byte records of
//! `(u8 detector, u64 cycle, u64 timestamp_ps)`.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interference::{DetectionOutcome, Detector};

pub const BINARY_MAGIC: &[u8; 8] = b"HOMTAG01";

/// One detector's clicks, in ps, quantized to the TDC resolution.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TimestampStream {
    pub cycle_index: Vec<u64>,
    pub timestamp_ps: Vec<u64>,
}

impl TimestampStream {
    pub fn len(&self) -> usize {
        self.timestamp_ps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamp_ps.is_empty()
    }

    pub fn push(&mut self, cycle: u64, ps: u64) {
        self.cycle_index.push(cycle);
        self.timestamp_ps.push(ps);
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.cycle_index
            .iter()
            .copied()
            .zip(self.timestamp_ps.iter().copied())
    }

    pub fn is_sorted(&self) -> bool {
        self.timestamp_ps.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Both detectors' streams.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Recording {
    pub resolution_ps: u64,
    pub c: TimestampStream,
    pub d: TimestampStream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Row {
    det: Detector,
    cycle: u64,
    ps: u64,
}

fn det_code(d: Detector) -> u8 {
    d.index() as u8
}

impl Recording {
    pub fn stream(&self, det: Detector) -> &TimestampStream {
        match det {
            Detector::C => &self.c,
            Detector::D => &self.d,
        }
    }

    pub fn stream_mut(&mut self, det: Detector) -> &mut TimestampStream {
        match det {
            Detector::C => &mut self.c,
            Detector::D => &mut self.d,
        }
    }

    /// Merged rows in time order, C before D on ties.
    fn rows(&self) -> Vec<Row> {
        let mut rows: Vec<Row> = Detector::ALL
            .iter()
            .flat_map(|&det| {
                self.stream(det)
                    .iter()
                    .map(move |(cycle, ps)| Row { det, cycle, ps })
            })
            .collect();
        rows.sort_by_key(|r| (r.ps, r.det));
        rows
    }

    fn from_rows(resolution_ps: u64, rows: impl IntoIterator<Item = Row>) -> Self {
        let mut rec = Recording {
            resolution_ps,
            ..Default::default()
        };
        for r in rows {
            rec.stream_mut(r.det).push(r.cycle, r.ps);
        }
        rec
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "detector,cycle_index,timestamp_ps")?;
        for r in self.rows() {
            writeln!(w, "{},{},{}", r.det, r.cycle, r.ps)?;
        }
        Ok(())
    }

    /// Reads CSV rows. The resolution is not stored in CSV and is taken
    /// from the caller.
    pub fn read_csv<R: BufRead>(r: R, resolution_ps: u64) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                msg: e.to_string(),
            })?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("detector"))
            {
                continue;
            }
            rows.push(parse_row(line).map_err(|msg| Error::Parse { line: line_no, msg })?);
        }
        Ok(Self::from_rows(resolution_ps, rows))
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let rows = self.rows();
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&self.resolution_ps.to_le_bytes())?;
        w.write_all(&(rows.len() as u64).to_le_bytes())?;
        for r in rows {
            w.write_all(&[det_code(r.det)])?;
            w.write_all(&r.cycle.to_le_bytes())?;
            w.write_all(&r.ps.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads the binary format; `line` in parse errors is the record number
    /// (header = 0).
    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let header_err = |msg: &str| Error::Parse {
            line: 0,
            msg: msg.into(),
        };
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| header_err("truncated header"))?;
        if &magic != BINARY_MAGIC {
            return Err(header_err("bad magic"));
        }
        let mut word = [0u8; 8];
        r.read_exact(&mut word)
            .map_err(|_| header_err("truncated header"))?;
        let resolution_ps = u64::from_le_bytes(word);
        r.read_exact(&mut word)
            .map_err(|_| header_err("truncated header"))?;
        let count = u64::from_le_bytes(word);
        let mut rows = Vec::new();
        let mut rec = [0u8; 17];
        for i in 0..count {
            let line = i as usize + 1;
            r.read_exact(&mut rec).map_err(|_| Error::Parse {
                line,
                msg: "truncated record".into(),
            })?;
            let det = match rec[0] {
                0 => Detector::C,
                1 => Detector::D,
                x => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unknown detector code {x}"),
                    })
                }
            };
            let cycle = u64::from_le_bytes(rec[1..9].try_into().unwrap());
            let ps = u64::from_le_bytes(rec[9..17].try_into().unwrap());
            rows.push(Row { det, cycle, ps });
        }
        Ok(Self::from_rows(resolution_ps, rows))
    }
}

fn parse_row(line: &str) -> std::result::Result<Row, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    let [det, cycle, ps] = fields[..] else {
        return Err(format!("expected 3 fields, found {}", fields.len()));
    };
    let det = match det {
        "C" | "c" => Detector::C,
        "D" | "d" => Detector::D,
        other => return Err(format!("unknown detector '{other}'")),
    };
    let cycle = cycle
        .parse()
        .map_err(|e| format!("cycle_index '{cycle}': {e}"))?;
    let ps = ps
        .parse()
        .map_err(|e| format!("timestamp_ps '{ps}': {e}"))?;
    Ok(Row { det, cycle, ps })
}

/// Where a photon click came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClickSource {
    Pair,
    Single,
}

/// A photon that reached a detector, whether or not it was registered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthClick {
    pub outcome: DetectionOutcome,
    pub time_ps: f64,
    pub registered: bool,
    pub source: ClickSource,
}

/// True photon content of one cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleTruth {
    pub cycle: u64,
    pub clicks: Vec<TruthClick>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coherent: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub switched: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_difference: Option<f64>,
    pub dark_clicks: u32,
}

/// Per-cycle truth for cycles that carried at least one photon.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruthLog {
    pub cycles: Vec<CycleTruth>,
}

impl GroundTruthLog {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for c in &self.cycles {
            serde_json::to_writer(&mut w, c)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut cycles = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            cycles.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?);
        }
        Ok(Self { cycles })
    }

    /// Cycles in which both photons met at the beam splitter.
    pub fn pairs(&self) -> impl Iterator<Item = &CycleTruth> {
        self.cycles.iter().filter(|c| c.coherent.is_some())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Recording {
        let mut r = Recording {
            resolution_ps: 81,
            ..Default::default()
        };
        r.c.push(0, 81);
        r.d.push(0, 162);
        r.c.push(3, 3_000_051);
        r
    }

    #[test]
    fn csv_round_trip() {
        let rec = sample();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("detector,cycle_index,timestamp_ps\nC,0,81\nD,0,162\n"));
        assert_eq!(Recording::read_csv(&buf[..], 81).unwrap(), rec);
    }

    #[test]
    fn binary_round_trip() {
        let rec = sample();
        let mut buf = Vec::new();
        rec.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 3 * 17);
        assert_eq!(Recording::read_binary(&buf[..]).unwrap(), rec);
        assert!(Recording::read_binary(&buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn malformed_csv_reports_line() {
        let text = "detector,cycle_index,timestamp_ps\nC,0,81\nX,1,2\n";
        match Recording::read_csv(text.as_bytes(), 81) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let text = "C,0\n";
        assert!(matches!(
            Recording::read_csv(text.as_bytes(), 81),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
