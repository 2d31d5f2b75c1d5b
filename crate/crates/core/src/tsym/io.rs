//! `.tsym` history files: one line of JSON header, then for each time the
//! listed fields as little-endian `f64` arrays of `n_y` samples.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{TsymFields, TsymHistory, TsymRates, TsymState};
use crate::circle::{CircleGrid, Scheme};
use crate::{Error, Result};

pub const HISTORY_FORMAT: &str = "tsym-history";
pub const HISTORY_VERSION: u32 = 1;

const BASE: [&str; 6] = ["U", "A", "eta", "a", "G", "H"];
const RATES: [&str; 5] = ["U_R", "A_R", "eta_R", "a_R", "H_R"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryHeader {
    pub format: String,
    pub version: u32,
    pub n_y: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub scheme: Scheme,
    #[serde(rename = "K")]
    pub twist: f64,
    /// Areal times `R`.
    pub times: Vec<f64>,
    pub fields: Vec<String>,
    pub eta_supplied: bool,
}

pub fn write_history<W: Write>(history: &TsymHistory, mut w: W) -> Result<()> {
    let grid = history.grid();
    let with_rates = history.states().iter().all(TsymState::has_rates);
    let mut fields: Vec<String> = BASE.iter().map(|s| s.to_string()).collect();
    if with_rates {
        fields.extend(RATES.iter().map(|s| s.to_string()));
    }
    let header = HistoryHeader {
        format: HISTORY_FORMAT.into(),
        version: HISTORY_VERSION,
        n_y: grid.len(),
        length: grid.length(),
        scheme: grid.scheme(),
        twist: history.twist(),
        times: history.r_values(),
        fields,
        eta_supplied: history.states().iter().all(TsymState::eta_supplied),
    };
    let line = serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?;
    w.write_all(line.as_bytes())?;
    w.write_all(b"\n")?;
    for st in history.states() {
        let f = st.fields();
        let mut blocks: Vec<&Vec<f64>> = vec![&f.u, &f.big_a, &f.eta, &f.a, &f.g_conn, &f.h_conn];
        if with_rates {
            let r = st.rates()?;
            blocks.extend([&r.u, &r.big_a, &r.eta, &r.a, &r.h_conn]);
        }
        let mut buf = Vec::with_capacity(blocks.len() * grid.len() * 8);
        for b in blocks {
            for v in b {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_history<R: BufRead>(mut r: R) -> Result<TsymHistory> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: HistoryHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::Format(format!("history header: {e}")))?;
    if header.format != HISTORY_FORMAT || header.version != HISTORY_VERSION {
        return Err(Error::Format(format!("unsupported history {} v{}", header.format, header.version)));
    }
    let with_rates = if header.fields == BASE {
        false
    } else if header.fields.len() == 11 && header.fields[..6] == BASE && header.fields[6..] == RATES {
        true
    } else {
        return Err(Error::Format(format!("unsupported field list {:?}", header.fields)));
    };
    let grid = CircleGrid::new(header.n_y, header.length, header.scheme)?;
    let n = header.n_y;
    let mut states = Vec::with_capacity(header.times.len());
    for &time in &header.times {
        let mut block = || -> Result<Vec<f64>> {
            let mut bytes = vec![0u8; n * 8];
            r.read_exact(&mut bytes)?;
            Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
        };
        let fields = TsymFields { u: block()?, big_a: block()?, eta: block()?, a: block()?, g_conn: block()?, h_conn: block()? };
        let rates = if with_rates {
            Some(TsymRates { u: block()?, big_a: block()?, eta: block()?, a: block()?, h_conn: block()? })
        } else {
            None
        };
        let st = TsymState::new(grid.clone(), time, header.twist, fields, rates)?;
        states.push(if header.eta_supplied { st } else { st.with_defaulted_eta() });
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes after history arrays", rest.len())));
    }
    TsymHistory::new(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tsym::{expansion_history, ExpansionProfile, Trig};

    #[test]
    fn round_trip_is_bit_exact() {
        let grid = CircleGrid::periodic(16).unwrap();
        let p = ExpansionProfile::half_polarized(Trig::cosine(0.6, 0.05), Trig::cosine(0.3, 0.2));
        let h = expansion_history(&p, &[1.0, 1.5, 2.0], &grid, 0.5).unwrap();
        let mut buf = Vec::new();
        write_history(&h, &mut buf).unwrap();
        let back = read_history(&buf[..]).unwrap();
        assert_eq!(back, h);
        assert!(!back.states()[0].eta_supplied());
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let grid = CircleGrid::periodic(8).unwrap();
        let p = ExpansionProfile::half_polarized(Trig::constant(0.5), Trig::constant(1.0));
        let h = expansion_history(&p, &[1.0, 2.0], &grid, 1.0).unwrap();
        let mut buf = Vec::new();
        write_history(&h, &mut buf).unwrap();
        buf.push(0);
        assert!(read_history(&buf[..]).is_err());
    }
}
