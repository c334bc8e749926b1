//! 2.5D grid map built from per-point predictions.
//!
//! Map file: a text header followed by one little-endian binary record per
//! cell (row-major, row 0 at `origin.y`):
//!
//! ```text
//! SCATE-GM v1
//! origin <x> <y>
//! resolution <r>
//! dims <width> <height>
//! data
//! ```
//!
//! Record: `count: u32`, `elevation: f64`, `value: f64` (NaN when absent),
//! `class: u8` (0 unknown, 1 traversable, 2 non-traversable).

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::terrain_sim::{expect_fields, num, read_header_line};

pub const MAP_MAGIC: &str = "SCATE-GM v1";
pub const DEFAULT_MAP_RESOLUTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TravClass {
    Traversable,
    NonTraversable,
}

/// One classified point headed for the map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapPoint {
    pub position: [f64; 3],
    pub score: f64,
    pub traversable: bool,
    pub trav_pred: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub count: u32,
    /// Max member elevation.
    pub elevation: f64,
    /// Mean member prediction; `None` when unknown or non-traversable.
    pub trav_value: Option<f64>,
    pub class: Option<TravClass>,
}

impl Cell {
    pub const UNKNOWN: Cell = Cell {
        count: 0,
        elevation: 0.0,
        trav_value: None,
        class: None,
    };

    pub fn known(&self) -> bool {
        self.class.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMap2p5 {
    pub origin: [f64; 2],
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub cells: Vec<Cell>,
}

impl GridMap2p5 {
    pub fn unknown(origin: [f64; 2], resolution: f64, width: usize, height: usize) -> Result<Self> {
        if !(resolution > 0.0) || width == 0 || height == 0 {
            return Err(Error::InvalidConfig(
                "map needs positive resolution and dims".into(),
            ));
        }
        Ok(Self {
            origin,
            resolution,
            width,
            height,
            cells: vec![Cell::UNKNOWN; width * height],
        })
    }

    /// Floor binning; `None` outside the map.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let c = ((x - self.origin[0]) / self.resolution).floor();
        let r = ((y - self.origin[1]) / self.resolution).floor();
        if c < 0.0 || r < 0.0 || c >= self.width as f64 || r >= self.height as f64 {
            return None;
        }
        Some((c as usize, r as usize))
    }

    pub fn cell_center(&self, col: usize, row: usize) -> [f64; 2] {
        [
            self.origin[0] + (col as f64 + 0.5) * self.resolution,
            self.origin[1] + (row as f64 + 0.5) * self.resolution,
        ]
    }

    pub fn cell(&self, col: usize, row: usize) -> &Cell {
        &self.cells[row * self.width + col]
    }

    pub fn cell_mut(&mut self, col: usize, row: usize) -> &mut Cell {
        &mut self.cells[row * self.width + col]
    }

    /// Cell under a world position, `None` outside.
    pub fn at(&self, x: f64, y: f64) -> Option<&Cell> {
        self.cell_of(x, y).map(|(c, r)| self.cell(c, r))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.cell_of(x, y).is_some()
    }

    pub fn known_count(&self) -> usize {
        self.cells.iter().filter(|c| c.known()).count()
    }
}

/// Bins points into a fresh map; returns the map and the number of points
/// that fell outside it.
pub fn build_map(
    points: &[MapPoint],
    origin: [f64; 2],
    resolution: f64,
    width: usize,
    height: usize,
) -> Result<(GridMap2p5, usize)> {
    let mut map = GridMap2p5::unknown(origin, resolution, width, height)?;
    let mut sums = vec![0.0; width * height];
    let mut blocked = vec![false; width * height];
    let mut dropped = 0;
    for p in points {
        let Some((c, r)) = map.cell_of(p.position[0], p.position[1]) else {
            dropped += 1;
            continue;
        };
        let i = r * width + c;
        let cell = &mut map.cells[i];
        if cell.count == 0 || p.position[2] > cell.elevation {
            cell.elevation = p.position[2];
        }
        cell.count += 1;
        sums[i] += p.trav_pred;
        blocked[i] |= !p.traversable;
    }
    for (i, cell) in map.cells.iter_mut().enumerate() {
        if cell.count == 0 {
            continue;
        }
        if blocked[i] {
            cell.class = Some(TravClass::NonTraversable);
        } else {
            cell.class = Some(TravClass::Traversable);
            cell.trav_value = Some(sums[i] / cell.count as f64);
        }
    }
    Ok((map, dropped))
}

pub fn write_map(m: &GridMap2p5, out: &mut impl Write) -> Result<()> {
    writeln!(out, "{MAP_MAGIC}")?;
    writeln!(out, "origin {:e} {:e}", m.origin[0], m.origin[1])?;
    writeln!(out, "resolution {:e}", m.resolution)?;
    writeln!(out, "dims {} {}", m.width, m.height)?;
    writeln!(out, "data")?;
    let mut buf = Vec::with_capacity(m.cells.len() * 21);
    for c in &m.cells {
        buf.extend_from_slice(&c.count.to_le_bytes());
        buf.extend_from_slice(&c.elevation.to_le_bytes());
        buf.extend_from_slice(&c.trav_value.unwrap_or(f64::NAN).to_le_bytes());
        buf.push(match c.class {
            None => 0,
            Some(TravClass::Traversable) => 1,
            Some(TravClass::NonTraversable) => 2,
        });
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_map(r: &mut impl BufRead) -> Result<GridMap2p5> {
    const W: &str = "grid map";
    if read_header_line(r, W, 1)? != MAP_MAGIC {
        return Err(Error::parse(W, 1, "bad magic"));
    }
    let l = read_header_line(r, W, 2)?;
    let f = expect_fields(&l, "origin", 2, W, 2)?;
    let origin = [num(f[0], W, 2)?, num(f[1], W, 2)?];
    let l = read_header_line(r, W, 3)?;
    let resolution = num(expect_fields(&l, "resolution", 1, W, 3)?[0], W, 3)?;
    let l = read_header_line(r, W, 4)?;
    let f = expect_fields(&l, "dims", 2, W, 4)?;
    let (width, height): (usize, usize) = (num(f[0], W, 4)?, num(f[1], W, 4)?);
    if read_header_line(r, W, 5)? != "data" {
        return Err(Error::parse(W, 5, "expected `data`"));
    }
    let mut map = GridMap2p5::unknown(origin, resolution, width, height)
        .map_err(|e| Error::parse(W, 4, e.to_string()))?;
    let mut buf = vec![0u8; width * height * 21];
    r.read_exact(&mut buf)
        .map_err(|_| Error::parse(W, 6, "truncated cell data"))?;
    for (cell, rec) in map.cells.iter_mut().zip(buf.chunks_exact(21)) {
        let count = u32::from_le_bytes(rec[0..4].try_into().unwrap());
        let elevation = f64::from_le_bytes(rec[4..12].try_into().unwrap());
        let v = f64::from_le_bytes(rec[12..20].try_into().unwrap());
        let class = match rec[20] {
            0 => None,
            1 => Some(TravClass::Traversable),
            2 => Some(TravClass::NonTraversable),
            b => return Err(Error::parse(W, 6, format!("bad class byte {b}"))),
        };
        *cell = Cell {
            count,
            elevation,
            trav_value: (!v.is_nan()).then_some(v),
            class,
        };
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(x: f64, y: f64, z: f64, trav: bool, pred: f64) -> MapPoint {
        MapPoint {
            position: [x, y, z],
            score: if trav { 0.9 } else { 0.1 },
            traversable: trav,
            trav_pred: pred,
        }
    }

    #[test]
    fn single_point_cell() {
        let (m, d) = build_map(&[pt(0.3, 0.3, 1.0, true, 0.3)], [0.0, 0.0], 0.25, 4, 4).unwrap();
        assert_eq!(d, 0);
        let c = m.cell(1, 1);
        assert_eq!(c.class, Some(TravClass::Traversable));
        assert_eq!(c.trav_value, Some(0.3));
        assert_eq!(m.known_count(), 1);
    }

    #[test]
    fn conservative_or_masks_value() {
        let pts = [pt(0.1, 0.1, 0.0, true, 0.2), pt(0.2, 0.2, 0.5, false, 0.4)];
        let (m, _) = build_map(&pts, [0.0, 0.0], 0.25, 2, 2).unwrap();
        let c = m.cell(0, 0);
        assert_eq!(c.class, Some(TravClass::NonTraversable));
        assert_eq!(c.trav_value, None);
        assert_eq!(c.elevation, 0.5);
    }

    #[test]
    fn edge_goes_to_higher_cell() {
        let (m, d) = build_map(&[pt(0.25, 0.5, 0.0, true, 0.1)], [0.0, 0.0], 0.25, 4, 4).unwrap();
        assert_eq!(d, 0);
        assert!(m.cell(1, 2).known());
        assert!(!m.cell(0, 1).known());
        // the far edge of the map is outside
        let (_, d) = build_map(&[pt(1.0, 0.5, 0.0, true, 0.1)], [0.0, 0.0], 0.25, 4, 4).unwrap();
        assert_eq!(d, 1);
    }

    #[test]
    fn binning_matches_double_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<MapPoint> = (0..500)
            .map(|_| {
                pt(
                    rng.gen_range(-1.0..4.0),
                    rng.gen_range(-1.0..4.0),
                    rng.gen_range(0.0..1.0),
                    rng.gen_bool(0.8),
                    rng.gen(),
                )
            })
            .collect();
        let (m, dropped) = build_map(&pts, [0.0, 0.0], 0.3, 10, 9).unwrap();
        let mut members = 0;
        for r in 0..9 {
            for c in 0..10 {
                let inside: Vec<&MapPoint> = pts
                    .iter()
                    .filter(|p| {
                        let cx = ((p.position[0] - 0.0) / 0.3).floor();
                        let cy = ((p.position[1] - 0.0) / 0.3).floor();
                        cx == c as f64 && cy == r as f64
                    })
                    .collect();
                let cell = m.cell(c, r);
                assert_eq!(cell.count as usize, inside.len());
                members += inside.len();
                if inside.is_empty() {
                    assert!(!cell.known());
                    continue;
                }
                let maxz = inside
                    .iter()
                    .map(|p| p.position[2])
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(cell.elevation, maxz);
                if inside.iter().all(|p| p.traversable) {
                    let mean =
                        inside.iter().map(|p| p.trav_pred).sum::<f64>() / inside.len() as f64;
                    assert!((cell.trav_value.unwrap() - mean).abs() < 1e-12);
                } else {
                    assert_eq!(cell.trav_value, None);
                }
            }
        }
        assert_eq!(members + dropped, pts.len());
    }

    proptest! {
        #[test]
        fn partition_and_round_trip(
            raw in prop::collection::vec((-2.0f64..6.0, -2.0f64..6.0, 0.0f64..2.0, any::<bool>(), 0.0f64..1.0), 0..200)
        ) {
            let pts: Vec<MapPoint> = raw.iter().map(|&(x, y, z, t, v)| pt(x, y, z, t, v)).collect();
            let (m, dropped) = build_map(&pts, [0.0, 0.0], 0.25, 16, 12).unwrap();
            let total: u32 = m.cells.iter().map(|c| c.count).sum();
            prop_assert_eq!(total as usize + dropped, pts.len());
            let (again, _) = build_map(&pts, [0.0, 0.0], 0.25, 16, 12).unwrap();
            prop_assert_eq!(&again, &m);
            let mut a = Vec::new();
            write_map(&m, &mut a).unwrap();
            let back = read_map(&mut a.as_slice()).unwrap();
            prop_assert_eq!(&back, &m);
            let mut b = Vec::new();
            write_map(&back, &mut b).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn bad_resolution() {
        assert!(build_map(&[], [0.0, 0.0], 0.0, 4, 4).is_err());
        assert!(read_map(&mut "SCATE-GM v1\norigin 0 0\n".as_bytes()).is_err());
    }
}
