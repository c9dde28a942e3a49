//! Serialization: JSON with 17 significant digits per float, trajectory CSV
//! with shortest round-trip floats.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::dynamics::Trajectory;
use crate::error::Result;

/// Pretty JSON formatter printing every float as `d.dddddddddddddddde±x`.
pub struct FullPrecision<'a>(PrettyFormatter<'a>);

impl Default for FullPrecision<'_> {
    fn default() -> Self {
        FullPrecision(PrettyFormatter::new())
    }
}

impl Formatter for FullPrecision<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

pub fn write_json<T: Serialize + ?Sized, W: Write>(writer: W, value: &T) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(writer, FullPrecision::default());
    value.serialize(&mut ser)?;
    Ok(())
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    write_json(&mut buf, value)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn trajectory_from_json(s: &str) -> Result<Trajectory> {
    Ok(serde_json::from_str(s)?)
}

fn csv_header(n: usize) -> String {
    let mut cols = vec!["t".to_string(), "event".to_string()];
    for prefix in ["x", "z", "alpha"] {
        cols.extend((1..=n).map(|i| format!("{prefix}_{i}")));
    }
    cols.join(",")
}

fn csv_row(t: f64, event: &str, x: &[f64], z: &[f64], alpha: &[Option<f64>]) -> String {
    let mut row = vec![t.to_string(), event.to_string()];
    row.extend(x.iter().map(f64::to_string));
    row.extend(z.iter().map(f64::to_string));
    row.extend(alpha.iter().map(|a| a.map_or(String::new(), |a| a.to_string())));
    row.join(",")
}

/// One row per event; with `stride`, also `sample` rows at multiples of it
/// strictly between events.
pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &Trajectory, stride: Option<f64>) -> Result<()> {
    writeln!(w, "{}", csv_header(traj.n))?;
    for (k, e) in traj.events.iter().enumerate() {
        let kinds: Vec<&str> = e.kinds.iter().map(|k| k.as_str()).collect();
        writeln!(w, "{}", csv_row(e.t, &kinds.join("|"), &e.x, &e.z, &e.alpha))?;
        let (Some(step), Some(next)) = (stride.filter(|s| *s > 0.0), traj.events.get(k + 1)) else {
            continue;
        };
        let alpha: Vec<Option<f64>> = e
            .alpha
            .iter()
            .zip(&e.velocity)
            .map(|(a, v)| if *v == 0.0 { *a } else { None })
            .collect();
        let mut j = (e.t / step).floor() as u64 + 1;
        loop {
            let t = j as f64 * step;
            if t >= next.t {
                break;
            }
            if t > e.t {
                writeln!(w, "{}", csv_row(t, "sample", &traj.state_at(t), &e.z, &alpha))?;
            }
            j += 1;
        }
    }
    Ok(())
}

pub fn trajectory_csv_string(traj: &Trajectory, stride: Option<f64>) -> Result<String> {
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, traj, stride)?;
    Ok(String::from_utf8(buf).expect("CSV is UTF-8"))
}
