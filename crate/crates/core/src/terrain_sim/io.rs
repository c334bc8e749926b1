//! World, trace and scan files.
//!
//! World file: a text header
//!
//! ```text
//! SCATE-HF v1
//! origin <x> <y>
//! resolution <m>
//! dims <width> <height>
//! obstacle_height <m>
//! data
//! ```
//!
//! followed by `width·height` little-endian `f32` elevations (row-major) and
//! then `width·height` mask bytes (0 or 1).
//!
//! Trace file: `#`-comment header, then one line per step:
//! `t x y yaw az  (cx cy cz f) × wheels`.
//!
//! Scan file: per scan a line `scan x y z yaw channels azimuth_steps count`
//! followed by `count` lines `x y z`.

use std::io::{BufRead, Write};

use super::lidar::{LidarScan, SensorPose};
use super::traversal::SimTrace;
use super::world::HeightField;
use crate::error::{Error, Result};

pub const WORLD_MAGIC: &str = "SCATE-HF v1";

pub(crate) fn read_header_line(
    r: &mut impl BufRead,
    what: &'static str,
    line: usize,
) -> Result<String> {
    let mut s = String::new();
    if r.read_line(&mut s)? == 0 {
        return Err(Error::parse(what, line, "unexpected end of file"));
    }
    Ok(s.trim_end_matches(['\n', '\r']).to_string())
}

pub(crate) fn expect_fields<'a>(
    line: &'a str,
    key: &str,
    n: usize,
    what: &'static str,
    lineno: usize,
) -> Result<Vec<&'a str>> {
    let mut it = line.split_whitespace();
    if it.next() != Some(key) {
        return Err(Error::parse(
            what,
            lineno,
            format!("expected `{key}`, got `{line}`"),
        ));
    }
    let rest: Vec<&str> = it.collect();
    if rest.len() != n {
        return Err(Error::parse(
            what,
            lineno,
            format!("`{key}` takes {n} values"),
        ));
    }
    Ok(rest)
}

pub(crate) fn num<T: std::str::FromStr>(s: &str, what: &'static str, line: usize) -> Result<T> {
    s.parse()
        .map_err(|_| Error::parse(what, line, format!("bad number `{s}`")))
}

pub fn write_world(w: &HeightField, out: &mut impl Write) -> Result<()> {
    writeln!(out, "{WORLD_MAGIC}")?;
    writeln!(out, "origin {:e} {:e}", w.origin[0], w.origin[1])?;
    writeln!(out, "resolution {:e}", w.resolution)?;
    writeln!(out, "dims {} {}", w.width, w.height)?;
    writeln!(out, "obstacle_height {:e}", w.obstacle_height)?;
    writeln!(out, "data")?;
    let mut buf = Vec::with_capacity(w.elevation.len() * 5);
    for z in &w.elevation {
        buf.extend_from_slice(&z.to_le_bytes());
    }
    buf.extend(w.obstacle_mask.iter().map(|&m| m as u8));
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_world(r: &mut impl BufRead) -> Result<HeightField> {
    const W: &str = "world file";
    let magic = read_header_line(r, W, 1)?;
    if magic != WORLD_MAGIC {
        return Err(Error::parse(W, 1, format!("bad magic `{magic}`")));
    }
    let l = read_header_line(r, W, 2)?;
    let f = expect_fields(&l, "origin", 2, W, 2)?;
    let origin = [num(f[0], W, 2)?, num(f[1], W, 2)?];
    let l = read_header_line(r, W, 3)?;
    let resolution: f64 = num(expect_fields(&l, "resolution", 1, W, 3)?[0], W, 3)?;
    let l = read_header_line(r, W, 4)?;
    let f = expect_fields(&l, "dims", 2, W, 4)?;
    let (width, height): (usize, usize) = (num(f[0], W, 4)?, num(f[1], W, 4)?);
    let l = read_header_line(r, W, 5)?;
    let obstacle_height: f64 = num(expect_fields(&l, "obstacle_height", 1, W, 5)?[0], W, 5)?;
    let l = read_header_line(r, W, 6)?;
    if l != "data" {
        return Err(Error::parse(W, 6, "expected `data`"));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::parse(W, 4, "dims overflow"))?;
    let mut bytes = vec![0u8; n * 5];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::parse(W, 7, "truncated payload"))?;
    let elevation = bytes[..n * 4]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let mut obstacle_mask = Vec::with_capacity(n);
    for &b in &bytes[n * 4..] {
        match b {
            0 => obstacle_mask.push(false),
            1 => obstacle_mask.push(true),
            _ => return Err(Error::parse(W, 7, format!("mask byte {b} is not 0/1"))),
        }
    }
    let world = HeightField {
        origin,
        resolution,
        width,
        height,
        elevation,
        obstacle_mask,
        obstacle_height,
    };
    world.validate()?;
    Ok(world)
}

pub fn write_trace(t: &SimTrace, out: &mut impl Write) -> Result<()> {
    writeln!(
        out,
        "# trace vehicle={} wheels={} steps={}",
        t.vehicle,
        t.wheel_count(),
        t.len()
    )?;
    writeln!(
        out,
        "# columns: t x y yaw z_accel (cx cy cz force) per wheel"
    )?;
    for k in 0..t.len() {
        let p = t.poses[k];
        write!(
            out,
            "{:e} {:e} {:e} {:e} {:e}",
            t.timestamps[k], p[0], p[1], p[2], t.z_accel[k]
        )?;
        for (c, f) in t.contacts[k].iter().zip(&t.wheel_forces[k]) {
            write!(out, " {:e} {:e} {:e} {:e}", c[0], c[1], c[2], f)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_trace(r: &mut impl BufRead) -> Result<SimTrace> {
    const W: &str = "trace file";
    let mut trace = SimTrace {
        vehicle: String::new(),
        timestamps: vec![],
        poses: vec![],
        contacts: vec![],
        wheel_forces: vec![],
        z_accel: vec![],
    };
    let mut wheels: Option<usize> = None;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if let Some(rest) = line.strip_prefix("# trace ") {
            for kv in rest.split_whitespace() {
                if let Some(v) = kv.strip_prefix("vehicle=") {
                    trace.vehicle = v.to_string();
                } else if let Some(v) = kv.strip_prefix("wheels=") {
                    wheels = Some(num(v, W, lineno)?);
                }
            }
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|s| num(s, W, lineno))
            .collect::<Result<_>>()?;
        let nw = wheels.ok_or_else(|| Error::parse(W, lineno, "missing `# trace` header"))?;
        if vals.len() != 5 + 4 * nw {
            return Err(Error::parse(
                W,
                lineno,
                format!("expected {} columns", 5 + 4 * nw),
            ));
        }
        trace.timestamps.push(vals[0]);
        trace.poses.push([vals[1], vals[2], vals[3]]);
        trace.z_accel.push(vals[4]);
        let mut c = Vec::with_capacity(nw);
        let mut f = Vec::with_capacity(nw);
        for w in 0..nw {
            let b = 5 + 4 * w;
            c.push([vals[b], vals[b + 1], vals[b + 2]]);
            f.push(vals[b + 3]);
        }
        trace.contacts.push(c);
        trace.wheel_forces.push(f);
    }
    Ok(trace)
}

pub fn write_scans(scans: &[LidarScan], out: &mut impl Write) -> Result<()> {
    writeln!(out, "# scans count={}", scans.len())?;
    writeln!(
        out,
        "# columns: scan x y z yaw channels azimuth_steps count, then x y z per point"
    )?;
    for s in scans {
        writeln!(
            out,
            "scan {:e} {:e} {:e} {:e} {} {} {}",
            s.pose.x,
            s.pose.y,
            s.pose.z,
            s.pose.yaw,
            s.channels,
            s.azimuth_steps,
            s.points.len()
        )?;
        for p in &s.points {
            writeln!(out, "{:e} {:e} {:e}", p[0], p[1], p[2])?;
        }
    }
    Ok(())
}

pub fn read_scans(r: &mut impl BufRead) -> Result<Vec<LidarScan>> {
    const W: &str = "scan file";
    let mut scans: Vec<LidarScan> = Vec::new();
    let mut remaining = 0usize;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if remaining == 0 {
            let f = expect_fields(&line, "scan", 7, W, lineno)?;
            remaining = num(f[6], W, lineno)?;
            scans.push(LidarScan {
                pose: SensorPose {
                    x: num(f[0], W, lineno)?,
                    y: num(f[1], W, lineno)?,
                    z: num(f[2], W, lineno)?,
                    yaw: num(f[3], W, lineno)?,
                },
                channels: num(f[4], W, lineno)?,
                azimuth_steps: num(f[5], W, lineno)?,
                points: Vec::with_capacity(remaining),
            });
        } else {
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|s| num(s, W, lineno))
                .collect::<Result<_>>()?;
            if v.len() != 3 {
                return Err(Error::parse(W, lineno, "point needs 3 coordinates"));
            }
            scans.last_mut().unwrap().points.push([v[0], v[1], v[2]]);
            remaining -= 1;
        }
    }
    if remaining != 0 {
        return Err(Error::parse(W, 0, "truncated scan"));
    }
    Ok(scans)
}
