//! CSV and JSON writers for analysis artifacts. Frequency-response files
//! lead with the axis in Hz for human reading and diffing, and also carry
//! the native rad/s axis: re-import uses the rad/s column, because dividing
//! by 2π on export and multiplying on import is not an exact round trip in
//! floating point. Floats are printed with 17 significant digits, enough
//! for a bit-exact round trip of every f64.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::freq::TransferSamples;
use crate::sim::TimeSeries;

/// One column per matrix entry, real and imaginary interleaved:
/// `f_hz,omega_rad_s,re_00,im_00,re_01,im_01,...` row-major over the shape.
pub fn transfer_to_csv(samples: &TransferSamples) -> String {
    let (nr, nc) = samples.shape();
    let mut out = String::from("f_hz,omega_rad_s");
    for r in 0..nr {
        for c in 0..nc {
            write!(out, ",re_{r}{c},im_{r}{c}").unwrap();
        }
    }
    out.push('\n');
    for (w, m) in samples.omega().iter().zip(samples.values()) {
        write!(out, "{:.16e},{w:.16e}", w / std::f64::consts::TAU).unwrap();
        for r in 0..nr {
            for c in 0..nc {
                let z = m[(r, c)];
                write!(out, ",{:.16e},{:.16e}", z.re, z.im).unwrap();
            }
        }
        out.push('\n');
    }
    out
}

pub fn transfer_from_csv(text: &str) -> Result<TransferSamples> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::EmptyDataset("transfer CSV has no header".into()))?;
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() < 4
        || fields[0] != "f_hz"
        || fields[1] != "omega_rad_s"
        || fields.len() % 2 != 0
    {
        return Err(Error::Config(format!("unrecognized transfer CSV header {header:?}")));
    }
    // Shape comes from the last label: row-major order puts the largest
    // indices at the end.
    let (nr, nc) = match fields.last().unwrap().strip_prefix("im_") {
        Some(rc) if rc.len() == 2 => {
            let mut digits = rc.chars().map(|ch| ch.to_digit(10));
            match (digits.next().flatten(), digits.next().flatten()) {
                (Some(r), Some(c)) => (r as usize + 1, c as usize + 1),
                _ => return Err(Error::Config(format!("bad entry label in header {header:?}"))),
            }
        }
        _ => return Err(Error::Config(format!("bad entry label in header {header:?}"))),
    };
    if fields.len() != 2 + 2 * nr * nc {
        return Err(Error::Config(format!(
            "header {header:?} declares a {nr}×{nc} shape but has {} columns",
            fields.len()
        )));
    }

    let mut omega = Vec::new();
    let mut values = Vec::new();
    for (k, line) in lines.enumerate() {
        let nums = parse_floats(line, 2 + 2 * nr * nc, k + 2)?;
        omega.push(nums[1]);
        let mut m = DMatrix::zeros(nr, nc);
        for r in 0..nr {
            for c in 0..nc {
                let base = 2 + 2 * (r * nc + c);
                m[(r, c)] = Complex64::new(nums[base], nums[base + 1]);
            }
        }
        values.push(m);
    }
    TransferSamples::new(omega, values)
}

fn parse_floats(line: &str, expect: usize, lineno: usize) -> Result<Vec<f64>> {
    let nums: Vec<f64> = line
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("CSV line {lineno}: {e}")))?;
    if nums.len() != expect {
        return Err(Error::Config(format!(
            "CSV line {lineno}: expected {expect} fields, got {}",
            nums.len()
        )));
    }
    Ok(nums)
}

/// Time axis plus every recorded channel: `t,<name>,<name>,...`.
pub fn timeseries_to_csv(ts: &TimeSeries) -> String {
    let mut out = String::from("t");
    for name in &ts.names {
        write!(out, ",{name}").unwrap();
    }
    out.push('\n');
    for (k, t) in ts.t.iter().enumerate() {
        write!(out, "{t:.16e}").unwrap();
        for ch in &ts.data {
            write!(out, ",{:.16e}", ch[k]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_transfer_csv(path: &Path, samples: &TransferSamples) -> Result<()> {
    write_text(path, &transfer_to_csv(samples))
}

pub fn write_timeseries_csv(path: &Path, ts: &TimeSeries) -> Result<()> {
    write_text(path, &timeseries_to_csv(ts))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("JSON encode: {e}")))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn awkward_samples() -> TransferSamples {
        // Values chosen to exercise the printer: subnormal-ish magnitudes,
        // negative zero, and digits that don't terminate in binary.
        let omega = vec![0.1, 6.283185307179586, 1.0e4];
        let values = vec![
            dmatrix![Complex64::new(0.1, -0.2), Complex64::new(1e-300, 2.0);
                     Complex64::new(-0.0, 1.0 / 3.0), Complex64::new(7.0, -1e300)],
            dmatrix![Complex64::new(2.5, 0.0), Complex64::new(0.0, 0.0);
                     Complex64::new(1e-17, -1e17), Complex64::new(0.30000000000000004, 3.0)],
            dmatrix![Complex64::new(-5.5, 5.5), Complex64::new(9.9, -9.9);
                     Complex64::new(1.0, 2.0), Complex64::new(3.0, 4.0)],
        ];
        TransferSamples::new(omega, values).unwrap()
    }

    #[test]
    fn transfer_csv_round_trip_is_bit_exact() {
        let samples = awkward_samples();
        let back = transfer_from_csv(&transfer_to_csv(&samples)).unwrap();
        assert_eq!(back.omega(), samples.omega());
        for (a, b) in back.values().iter().zip(samples.values()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!(x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits());
            }
        }
    }

    #[test]
    fn column_counts_follow_the_shape() {
        let samples = awkward_samples();
        let csv = transfer_to_csv(&samples);
        let header = csv.lines().next().unwrap();
        assert_eq!(header.split(',').count(), 2 + 2 * 4);
        assert!(header.starts_with("f_hz,omega_rad_s,re_00,im_00,re_01,im_01,re_10"));

        let row = TransferSamples::new(
            vec![1.0],
            vec![DMatrix::from_element(1, 2, Complex64::new(1.0, 2.0))],
        )
        .unwrap();
        let back = transfer_from_csv(&transfer_to_csv(&row)).unwrap();
        assert_eq!(back.shape(), (1, 2));
    }

    #[test]
    fn malformed_csv_is_rejected() {
        for (text, needle) in [
            ("", "no header"),
            ("f_hz,omega_rad_s,re_00\n", "header"),
            ("omega_rad_s,re_00,im_00\n", "header"),
            ("f_hz,omega_rad_s,re_00,im_00\n1.0,2.0,3.0\n", "line 2"),
            ("f_hz,omega_rad_s,re_00,im_00\n1.0,2.0,3.0,zebra\n", "line 2"),
        ] {
            let err = transfer_from_csv(text).unwrap_err();
            assert!(err.to_string().contains(needle), "{text:?} -> {err}");
        }
    }

    #[test]
    fn timeseries_csv_carries_all_channels() {
        let ts = TimeSeries {
            t: vec![0.0, 0.5],
            names: vec!["u_d".into(), "i_q".into()],
            data: vec![vec![1.0, 2.0], vec![-3.0, 0.25]],
            divergence: None,
            final_state: nalgebra::dvector![0.0],
        };
        let csv = timeseries_to_csv(&ts);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,u_d,i_q"));
        let row: Vec<f64> =
            lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(row, vec![0.0, 1.0, -3.0]);
        assert_eq!(csv.lines().count(), 3);
    }
}
