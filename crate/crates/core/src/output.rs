//! CSV and PGM writers.

use std::io::{self, Write};

use ndarray::{Array2, ArrayView2};

/// Shortest decimal that parses back to exactly `v`.
pub fn fmt_f64(v: f64) -> String {
    ryu::Buffer::new().format(v).to_string()
}

/// Writes a header line and numeric rows, comma separated.
pub fn write_csv<W, R>(mut w: W, header: &[&str], rows: impl IntoIterator<Item = R>) -> io::Result<()>
where
    W: Write,
    R: AsRef<[f64]>,
{
    writeln!(w, "{}", header.join(","))?;
    let mut buf = ryu::Buffer::new();
    for row in rows {
        for (i, v) in row.as_ref().iter().enumerate() {
            if i > 0 {
                w.write_all(b",")?;
            }
            w.write_all(buf.format(*v).as_bytes())?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Max-pools `data` so neither side exceeds `max_side`.
pub fn max_pool(data: ArrayView2<f64>, max_side: usize) -> Array2<f64> {
    let (rows, cols) = data.dim();
    let fr = rows.div_ceil(max_side).max(1);
    let fc = cols.div_ceil(max_side).max(1);
    if fr == 1 && fc == 1 {
        return data.to_owned();
    }
    let (nr, nc) = (rows.div_ceil(fr), cols.div_ceil(fc));
    Array2::from_shape_fn((nr, nc), |(i, j)| {
        let mut m = f64::NEG_INFINITY;
        for r in (i * fr)..((i + 1) * fr).min(rows) {
            for c in (j * fc)..((j + 1) * fc).min(cols) {
                m = m.max(data[[r, c]]);
            }
        }
        m
    })
}

/// Binary 8-bit PGM, linearly scaled from `[0, max]` to `[0, 255]`.
pub fn write_pgm<W: Write>(mut w: W, data: ArrayView2<f64>) -> io::Result<()> {
    let (rows, cols) = data.dim();
    let max = data.iter().cloned().fold(0.0_f64, f64::max);
    write!(w, "P5\n{cols} {rows}\n255\n")?;
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let bytes: Vec<u8> = data.iter().map(|v| (v.max(0.0) * scale).round().clamp(0.0, 255.0) as u8).collect();
    w.write_all(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn csv_round_trip() {
        let mut buf = Vec::new();
        let v = [0.1, std::f64::consts::PI, -1e-300];
        write_csv(&mut buf, &["a", "b", "c"], vec![v.to_vec()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("a,b,c"));
        let parsed: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(parsed, v);
    }

    #[test]
    fn pooling_and_pgm() {
        let a = array![[1.0, 2.0, 0.0], [0.0, 5.0, 1.0], [3.0, 0.0, 0.0]];
        let p = max_pool(a.view(), 2);
        assert_eq!(p, array![[5.0, 1.0], [3.0, 0.0]]);
        let mut buf = Vec::new();
        write_pgm(&mut buf, p.view()).unwrap();
        assert!(buf.starts_with(b"P5\n2 2\n255\n"));
        assert_eq!(&buf[buf.len() - 4..], &[255, 51, 153, 0]);
    }
}
