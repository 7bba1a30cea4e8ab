//! CSV writers and the `GLF1` binary field format.
//!
//! Text artifacts start with `# glinv <version> config=<hash> seed=<seed>`.
//! Floats are written in shortest round-trip form, so equal inputs give
//! byte-identical files.
//!
//! `GLF1` layout, little-endian: the magic bytes `GLF1`, `u32` Nx−1,
//! `u32` Ny−1, then `(Nx−1)(Ny−1)` pairs of `f64` (re, im) in
//! x-fastest node order.

use std::fmt::Write as _;
use std::io::{self, Read, Write};

use glinv_core::optimize::IterationRecord;
use glinv_core::{Complex64, Field, Grid2D};

use crate::config::VERSION;

pub const GLF_MAGIC: &[u8; 4] = b"GLF1";

pub fn header_line(config_hash: &str, seed: u64) -> String {
    format!("# glinv {VERSION} config={config_hash} seed={seed}\n")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub fn history_csv(header: &str, history: &[IterationRecord]) -> String {
    let mut s = String::from(header);
    s.push_str("k,j,misfit,grad_norm,alpha,beta,backtracks,restarted,slope\n");
    for r in history {
        let _ = writeln!(
            s,
            "{},{:e},{:e},{:e},{:e},{:e},{},{},{:e}",
            r.k, r.j, r.misfit, r.grad_norm, r.alpha, r.beta, r.backtracks, r.restarted, r.slope
        );
    }
    s
}

/// Scalar results of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub example: String,
    pub iterations: usize,
    pub stop_reason: String,
    pub misfit_sq_ratio: f64,
    pub q_err_sq_ratio: Option<f64>,
    pub f_err_sq_ratio: Option<f64>,
    pub final_j: f64,
    pub final_grad_norm: f64,
}

pub const METRICS_COLUMNS: &str =
    "example,iterations,stop_reason,misfit_sq_ratio,q_err_sq_ratio,f_err_sq_ratio,final_j,final_grad_norm";

pub fn metrics_csv(header: &str, m: &MetricsRow) -> String {
    format!(
        "{header}{METRICS_COLUMNS}\n{},{},{},{:e},{},{},{:e},{:e}\n",
        m.example,
        m.iterations,
        m.stop_reason,
        m.misfit_sq_ratio,
        opt(m.q_err_sq_ratio),
        opt(m.f_err_sq_ratio),
        m.final_j,
        m.final_grad_norm
    )
}

/// Reads back a file written by [`metrics_csv`].
pub fn parse_metrics_csv(text: &str) -> Result<MetricsRow, String> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    if lines.next() != Some(METRICS_COLUMNS) {
        return Err("unexpected metrics columns".into());
    }
    let row = lines.next().ok_or("missing metrics row")?;
    let f: Vec<&str> = row.split(',').collect();
    if f.len() != 8 {
        return Err(format!("expected 8 columns, found {}", f.len()));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| format!("`{s}`: {e}"));
    let opt_num = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
    Ok(MetricsRow {
        example: f[0].into(),
        iterations: f[1].parse().map_err(|e| format!("iterations: {e}"))?,
        stop_reason: f[2].into(),
        misfit_sq_ratio: num(f[3])?,
        q_err_sq_ratio: opt_num(f[4])?,
        f_err_sq_ratio: opt_num(f[5])?,
        final_j: num(f[6])?,
        final_grad_norm: num(f[7])?,
    })
}

/// One line per interior node: `i,j,x,y,re,im` with 1-based node indices.
pub fn field_csv(header: &str, grid: &Grid2D, field: &[Complex64]) -> String {
    let mut s = String::with_capacity(header.len() + 64 * field.len());
    s.push_str(header);
    s.push_str("i,j,x,y,re,im\n");
    for (k, v) in field.iter().enumerate() {
        let (i, j) = grid.node(k);
        let (x, y) = grid.coords(k);
        let _ = writeln!(s, "{i},{j},{x:e},{y:e},{:e},{:e}", v.re, v.im);
    }
    s
}

/// Node indices `(i, j)` and value of one field CSV line.
pub type FieldRow = ((usize, usize), Complex64);

/// Parses [`field_csv`] output into node indices and values, in file order.
pub fn parse_field_csv(text: &str) -> Result<Vec<FieldRow>, String> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    if lines.next() != Some("i,j,x,y,re,im") {
        return Err("unexpected field columns".into());
    }
    lines
        .enumerate()
        .map(|(n, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(format!("row {}: expected 6 columns", n + 1));
            }
            let idx = |s: &str| s.parse::<usize>().map_err(|e| format!("row {}: {e}", n + 1));
            let num = |s: &str| s.parse::<f64>().map_err(|e| format!("row {}: {e}", n + 1));
            Ok(((idx(f[0])?, idx(f[1])?), Complex64::new(num(f[4])?, num(f[5])?)))
        })
        .collect()
}

pub fn write_glf(mut w: impl Write, mx: usize, my: usize, field: &[Complex64]) -> io::Result<()> {
    if mx * my != field.len() {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "field length does not match dimensions",
        ));
    }
    let dim =
        |n: usize| u32::try_from(n).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "dimension exceeds u32"));
    let mut buf = Vec::with_capacity(12 + 16 * field.len());
    buf.extend_from_slice(GLF_MAGIC);
    buf.extend_from_slice(&dim(mx)?.to_le_bytes());
    buf.extend_from_slice(&dim(my)?.to_le_bytes());
    for v in field {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)
}

/// Returns `(Nx−1, Ny−1, values)`.
pub fn read_glf(mut r: impl Read) -> io::Result<(usize, usize, Field)> {
    let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
    let mut head = [0u8; 12];
    r.read_exact(&mut head)?;
    if &head[..4] != GLF_MAGIC {
        return Err(bad("missing GLF1 magic"));
    }
    let mx = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
    let my = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != 16 * mx * my {
        return Err(bad("payload length does not match dimensions"));
    }
    let f = |b: &[u8]| f64::from_le_bytes(b.try_into().unwrap());
    let values = body
        .chunks_exact(16)
        .map(|c| Complex64::new(f(&c[..8]), f(&c[8..])))
        .collect();
    Ok((mx, my, Field::from_vec(values)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glf_layout() {
        let v = [Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.25)];
        let mut buf = Vec::new();
        write_glf(&mut buf, 2, 1, &v).unwrap();
        assert_eq!(&buf[..4], b"GLF1");
        assert_eq!(&buf[4..12], &[2, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(&buf[12..20], &1.0f64.to_le_bytes());
        assert_eq!(&buf[20..28], &(-2.0f64).to_le_bytes());
        assert_eq!(buf.len(), 12 + 32);
        let (mx, my, back) = read_glf(&buf[..]).unwrap();
        assert_eq!((mx, my), (2, 1));
        assert_eq!(&back[..], &v);
    }

    #[test]
    fn glf_rejects_bad_input() {
        assert!(write_glf(Vec::new(), 2, 2, &[Complex64::new(0.0, 0.0)]).is_err());
        assert!(read_glf(&b"GLF2\0\0\0\0\0\0\0\0"[..]).is_err());
        let mut buf = Vec::new();
        write_glf(&mut buf, 1, 1, &[Complex64::new(0.0, 0.0)]).unwrap();
        buf.pop();
        assert!(read_glf(&buf[..]).is_err());
    }

    #[test]
    fn header_format() {
        let h = header_line("abc", 7);
        assert_eq!(h, format!("# glinv {VERSION} config=abc seed=7\n"));
    }

    #[test]
    fn metrics_round_trip() {
        let m = MetricsRow {
            example: "example4".into(),
            iterations: 12,
            stop_reason: "tolerance".into(),
            misfit_sq_ratio: 1.0473e-5,
            q_err_sq_ratio: None,
            f_err_sq_ratio: Some(0.3172),
            final_j: 0.1 + 0.2,
            final_grad_norm: 9.9e-6,
        };
        let text = metrics_csv(&header_line("h", 0), &m);
        assert!(text.starts_with("# glinv"));
        assert_eq!(parse_metrics_csv(&text).unwrap(), m);
    }
}
