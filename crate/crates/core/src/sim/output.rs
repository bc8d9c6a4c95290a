use std::io::{self, Write};

use super::{EventLog, SimTrace};

/// Writes `t,x1..xn,xh1..xhn,u1..um,normX,quadform,event`, one row per grid point.
pub fn write_trace_csv<W: Write>(trace: &SimTrace, out: W) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    let (n, m) = (trace.states(), trace.inputs());
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=n).map(|i| format!("xh{i}")));
    header.extend((1..=m).map(|i| format!("u{i}")));
    header.extend(["normX", "quadform", "event"].map(String::from));
    writeln!(out, "{}", header.join(","))?;
    for i in 0..trace.len() {
        write!(out, "{}", trace.times()[i])?;
        for v in trace.x(i).iter().chain(trace.xhat(i)).chain(trace.u(i)) {
            write!(out, ",{v}")?;
        }
        writeln!(out, ",{},{},{}", trace.norm_x()[i], trace.quadform()[i], u8::from(trace.event_flags()[i]))?;
    }
    out.flush()
}

/// Writes `k,t_k,interval`; the first interval is left empty.
pub fn write_events_csv<W: Write>(log: &EventLog, out: W) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    writeln!(out, "k,t_k,interval")?;
    for (k, t) in log.times.iter().enumerate() {
        match k {
            0 => writeln!(out, "{},{t},", k + 1)?,
            _ => writeln!(out, "{},{t},{}", k + 1, t - log.times[k - 1])?,
        }
    }
    out.flush()
}
