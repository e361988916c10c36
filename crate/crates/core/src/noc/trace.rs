use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::Coord;

/// One flit crossing one link.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub cycle: u64,
    pub time_ps: u64,
    pub from: Coord,
    pub to: Coord,
    /// Virtual channel used at the receiving input port.
    pub vc: usize,
    pub packet: u64,
    /// `head`, `body` or `tail`.
    pub flit: &'static str,
}

/// CSV columns: `cycle,time_ps,from_x,from_y,to_x,to_y,vc,packet,flit`.
pub fn write_trace_csv<W: Write>(records: &[TraceRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "cycle", "time_ps", "from_x", "from_y", "to_x", "to_y", "vc", "packet", "flit",
    ])?;
    for r in records {
        w.write_record([
            r.cycle.to_string(),
            r.time_ps.to_string(),
            r.from.x.to_string(),
            r.from.y.to_string(),
            r.to.x.to_string(),
            r.to.y.to_string(),
            r.vc.to_string(),
            r.packet.to_string(),
            r.flit.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
