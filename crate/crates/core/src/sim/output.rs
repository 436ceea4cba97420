use std::io::Write;

use crate::error::{Error, Result};
use crate::sim::{SimMetrics, TraceRecord};

/// Formats `x` with 9 significant digits, fixed or scientific like C's `%.9g`.
pub fn format_g9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..9).contains(&exp) {
        format!("{}e{exp}", trim_zeros(mantissa))
    } else {
        let decimals = (8 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Header of the trace CSV for `n_obstacles` obstacle blocks.
pub fn trace_header(n_obstacles: usize) -> String {
    let mut cols: Vec<String> = [
        "t", "vid", "px", "py", "vx", "vy", "xix", "xiy", "vcx", "vcy", "dwp",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for k in 0..n_obstacles {
        for name in ["oid", "dxi", "dp", "theta", "Vo", "ao"] {
            cols.push(format!("{name}_{k}"));
        }
    }
    cols.join(",")
}

/// Trace CSV writer: one row per (sample, vehicle).
pub struct TraceWriter<W: Write> {
    out: W,
    n_obstacles: usize,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, n_obstacles: usize) -> Result<Self> {
        writeln!(out, "{}", trace_header(n_obstacles))?;
        Ok(Self { out, n_obstacles })
    }

    pub fn write(&mut self, r: &TraceRecord) -> Result<()> {
        let mut line = String::with_capacity(128 + 64 * self.n_obstacles);
        for (vid, v) in r.vehicles.iter().enumerate() {
            line.clear();
            let t = format_g9(r.t);
            line.push_str(&t);
            line.push(',');
            line.push_str(&vid.to_string());
            for x in [
                v.p.x, v.p.y, v.v.x, v.v.y, v.xi.x, v.xi.y, v.v_c.x, v.v_c.y, v.dwp,
            ] {
                line.push(',');
                line.push_str(&format_g9(x));
            }
            let row = r.obstacles.get(vid).map(Vec::as_slice).unwrap_or(&[]);
            if row.len() != self.n_obstacles {
                return Err(Error::InvalidArgument(format!(
                    "trace row has {} obstacle blocks, header has {}",
                    row.len(),
                    self.n_obstacles
                )));
            }
            for (oid, o) in row.iter().enumerate() {
                line.push(',');
                line.push_str(&oid.to_string());
                for x in [o.dxi, o.dp, o.theta.unwrap_or(f64::NAN), o.v_o, o.a_o] {
                    line.push(',');
                    line.push_str(&format_g9(x));
                }
            }
            line.push('\n');
            self.out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Writes a whole trace as CSV.
pub fn write_trace_csv<W: Write>(
    out: W,
    records: &[TraceRecord],
    n_obstacles: usize,
) -> Result<()> {
    let mut w = TraceWriter::new(out, n_obstacles)?;
    for r in records {
        w.write(r)?;
    }
    w.finish().map(|_| ())
}

/// Metrics as pretty-printed JSON.
pub fn metrics_json(m: &SimMetrics) -> Result<String> {
    serde_json::to_string_pretty(m).map_err(|e| Error::Serialization(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g9_formatting() {
        assert_eq!(format_g9(0.0), "0");
        assert_eq!(format_g9(1.0), "1");
        assert_eq!(format_g9(-2.5), "-2.5");
        assert_eq!(format_g9(0.1), "0.1");
        assert_eq!(format_g9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_g9(123456789.0), "123456789");
        assert_eq!(format_g9(1234567891.0), "1.23456789e9");
        assert_eq!(format_g9(1.5e-7), "1.5e-7");
        assert_eq!(format_g9(0.0001), "0.0001");
        assert_eq!(format_g9(f64::NAN), "nan");
        assert_eq!(format_g9(9.999999999), "10");
    }

    #[test]
    fn header_layout() {
        assert_eq!(trace_header(0), "t,vid,px,py,vx,vy,xix,xiy,vcx,vcy,dwp");
        assert!(trace_header(2).ends_with("oid_1,dxi_1,dp_1,theta_1,Vo_1,ao_1"));
    }
}
