//! PPM rasters of grid maps and trajectories, and SVG trajectory plots.
//!
//! Colors: unknown cells are gray; in class style traversable cells are
//! green and non-traversable cells red; in value style the value runs from
//! dark blue (0) to yellow (1) and non-traversable cells are black. Image
//! row 0 is the map's top row (largest y).

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::gridmap::{GridMap2p5, TravClass};

pub type Rgb = [u8; 3];

pub const UNKNOWN: Rgb = [128, 128, 128];
pub const TRAVERSABLE: Rgb = [46, 139, 87];
pub const NON_TRAVERSABLE: Rgb = [200, 40, 40];
pub const MASK: Rgb = [0, 0, 0];
/// Overlay colors, cycled over paths in order.
pub const PATH_COLORS: [Rgb; 4] = [[255, 255, 255], [255, 0, 255], [0, 200, 255], [255, 140, 0]];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Class,
    Value,
    /// Class-style background with paths drawn on top.
    Trajectory,
}

impl Style {
    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "class" => Ok(Style::Class),
            "value" => Ok(Style::Value),
            "trajectory" => Ok(Style::Trajectory),
            _ => Err(Error::InvalidConfig(format!(
                "unknown style `{s}` (expected class, value or trajectory)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgb>,
}

impl Raster {
    pub fn filled(width: usize, height: usize, c: Rgb) -> Self {
        Self {
            width,
            height,
            pixels: vec![c; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: i64, y: i64, c: Rgb) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.pixels[y as usize * self.width + x as usize] = c;
        }
    }

    /// Bresenham segment.
    pub fn line(&mut self, (mut x0, mut y0): (i64, i64), (x1, y1): (i64, i64), c: Rgb) {
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
        let mut err = dx + dy;
        loop {
            self.set(x0, y0, c);
            if x0 == x1 && y0 == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x0 += sx;
            }
            if e2 <= dx {
                err += dx;
                y0 += sy;
            }
        }
    }

    /// Binary `P6` encoding.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().flatten());
        out
    }

    pub fn write_ppm(&self, out: &mut impl Write) -> Result<()> {
        out.write_all(&self.to_ppm())?;
        Ok(())
    }

    /// Reads the `P6` files written by [`Raster::to_ppm`] (no comments).
    pub fn read_ppm(r: &mut impl BufRead) -> Result<Self> {
        const W: &str = "ppm";
        let mut header = Vec::new();
        for line in 1..=3 {
            let mut s = String::new();
            r.read_line(&mut s)?;
            header.push((line, s.trim().to_string()));
        }
        if header[0].1 != "P6" {
            return Err(Error::parse(W, 1, "expected P6"));
        }
        let dims: Vec<usize> = header[1]
            .1
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::parse(W, 2, format!("bad dimension `{t}`")))
            })
            .collect::<Result<_>>()?;
        if dims.len() != 2 {
            return Err(Error::parse(W, 2, "expected `width height`"));
        }
        if header[2].1 != "255" {
            return Err(Error::parse(W, 3, "expected maxval 255"));
        }
        let (width, height) = (dims[0], dims[1]);
        let mut bytes = vec![0u8; width * height * 3];
        r.read_exact(&mut bytes)?;
        let pixels = bytes.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Ok(Self {
            width,
            height,
            pixels,
        })
    }
}

/// Dark blue → yellow.
pub fn value_color(v: f64) -> Rgb {
    let t = if v.is_finite() {
        v.clamp(0.0, 1.0)
    } else {
        0.0
    };
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    [lerp(20.0, 250.0), lerp(30.0, 230.0), lerp(120.0, 30.0)]
}

fn cell_color(map: &GridMap2p5, col: usize, row: usize, style: Style) -> Rgb {
    let c = map.cell(col, row);
    match (style, c.class) {
        (_, None) => UNKNOWN,
        (Style::Value, Some(TravClass::NonTraversable)) => MASK,
        (Style::Value, Some(TravClass::Traversable)) => c.trav_value.map_or(UNKNOWN, value_color),
        (_, Some(TravClass::Traversable)) => TRAVERSABLE,
        (_, Some(TravClass::NonTraversable)) => NON_TRAVERSABLE,
    }
}

/// Each cell becomes a `scale × scale` pixel block.
pub fn render_map(map: &GridMap2p5, style: Style, scale: usize) -> Result<Raster> {
    if scale == 0 {
        return Err(Error::InvalidConfig(
            "render scale must be at least 1".into(),
        ));
    }
    let mut img = Raster::filled(map.width * scale, map.height * scale, UNKNOWN);
    for row in 0..map.height {
        let top = (map.height - 1 - row) * scale;
        for col in 0..map.width {
            let c = cell_color(map, col, row, style);
            for y in top..top + scale {
                for x in col * scale..(col + 1) * scale {
                    img.pixels[y * img.width + x] = c;
                }
            }
        }
    }
    Ok(img)
}

fn to_pixel(map: &GridMap2p5, scale: usize, p: [f64; 2]) -> (i64, i64) {
    let s = scale as f64 / map.resolution;
    let x = ((p[0] - map.origin[0]) * s).floor() as i64;
    let y = (map.height * scale) as i64 - 1 - ((p[1] - map.origin[1]) * s).floor() as i64;
    (x, y)
}

/// Class-style map with each path drawn in its own color from [`PATH_COLORS`].
pub fn render_trajectories(
    map: &GridMap2p5,
    paths: &[Vec<[f64; 2]>],
    scale: usize,
) -> Result<Raster> {
    let mut img = render_map(map, Style::Trajectory, scale)?;
    for (i, path) in paths.iter().enumerate() {
        let c = PATH_COLORS[i % PATH_COLORS.len()];
        for w in path.windows(2) {
            img.line(to_pixel(map, scale, w[0]), to_pixel(map, scale, w[1]), c);
        }
        if let [p] = path.as_slice() {
            let (x, y) = to_pixel(map, scale, *p);
            img.set(x, y, c);
        }
    }
    Ok(img)
}

fn hex(c: Rgb) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Vector plot: non-traversable cells as black squares, each path as a
/// labeled polyline. Units are `px_per_m` pixels per meter.
pub fn trajectories_svg(
    map: &GridMap2p5,
    paths: &[(String, Vec<[f64; 2]>)],
    px_per_m: f64,
) -> String {
    let (w, h) = (
        map.width as f64 * map.resolution * px_per_m,
        map.height as f64 * map.resolution * px_per_m,
    );
    let tx = |p: [f64; 2]| {
        (
            (p[0] - map.origin[0]) * px_per_m,
            h - (p[1] - map.origin[1]) * px_per_m,
        )
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1}" height="{h:.1}" viewBox="0 0 {w:.1} {h:.1}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{w:.1}" height="{h:.1}" fill="{}"/>"#,
        hex(TRAVERSABLE)
    );
    let cell = map.resolution * px_per_m;
    for row in 0..map.height {
        for col in 0..map.width {
            let class = map.cell(col, row).class;
            if class == Some(TravClass::Traversable) {
                continue;
            }
            let c = map.cell_center(col, row);
            let (x, y) = tx([c[0] - map.resolution / 2.0, c[1] + map.resolution / 2.0]);
            let fill = if class.is_none() { UNKNOWN } else { MASK };
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{cell:.2}" height="{cell:.2}" fill="{}"/>"#,
                hex(fill)
            );
        }
    }
    for (i, (name, path)) in paths.iter().enumerate() {
        let pts: Vec<String> = path
            .iter()
            .map(|&p| {
                let (x, y) = tx(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{}"><title>{}</title></polyline>"#,
            hex(PATH_COLORS[i % PATH_COLORS.len()]),
            pts.join(" "),
            name
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridmap::Cell;

    fn map(w: usize, h: usize) -> GridMap2p5 {
        GridMap2p5::unknown([0.0, 0.0], 0.5, w, h).unwrap()
    }

    #[test]
    fn unknown_map_is_uniform() {
        let img = render_map(&map(5, 4), Style::Class, 3).unwrap();
        assert_eq!((img.width, img.height), (15, 12));
        assert!(img.pixels.iter().all(|&p| p == UNKNOWN));
    }

    #[test]
    fn single_blocked_cell_is_one_black_block() {
        let mut m = map(4, 4);
        for row in 0..4 {
            for col in 0..4 {
                *m.cell_mut(col, row) = Cell {
                    count: 1,
                    elevation: 0.0,
                    trav_value: Some(0.5),
                    class: Some(TravClass::Traversable),
                };
            }
        }
        *m.cell_mut(1, 0) = Cell {
            count: 1,
            elevation: 0.0,
            trav_value: None,
            class: Some(TravClass::NonTraversable),
        };
        let img = render_map(&m, Style::Value, 2).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                // cell (1, 0) is the bottom row of the image
                let inside = (2..4).contains(&x) && (6..8).contains(&y);
                assert_eq!(img.get(x, y) == MASK, inside, "pixel {x},{y}");
            }
        }
    }

    #[test]
    fn ppm_round_trip_and_determinism() {
        let mut img = Raster::filled(3, 2, UNKNOWN);
        img.line((0, 0), (2, 1), [1, 2, 3]);
        let a = img.to_ppm();
        assert_eq!(a, img.clone().to_ppm());
        let back = Raster::read_ppm(&mut std::io::Cursor::new(&a)).unwrap();
        assert_eq!(back, img);
        assert_eq!(back.to_ppm(), a);
    }

    #[test]
    fn overlay_uses_distinct_colors() {
        let m = map(20, 20);
        let paths = vec![vec![[1.0, 1.0], [9.0, 1.0]], vec![[1.0, 9.0], [9.0, 9.0]]];
        let img = render_trajectories(&m, &paths, 1).unwrap();
        let count = |c| img.pixels.iter().filter(|&&p| p == c).count();
        assert!(count(PATH_COLORS[0]) >= 16);
        assert!(count(PATH_COLORS[1]) >= 16);
        assert_ne!(PATH_COLORS[0], PATH_COLORS[1]);
    }

    #[test]
    fn bresenham_hits_both_ends() {
        let mut img = Raster::filled(10, 10, MASK);
        img.line((1, 8), (7, 2), [9, 9, 9]);
        assert_eq!(img.get(1, 8), [9, 9, 9]);
        assert_eq!(img.get(7, 2), [9, 9, 9]);
        assert_eq!(img.pixels.iter().filter(|&&p| p == [9, 9, 9]).count(), 7);
    }

    #[test]
    fn unknown_style_rejected() {
        assert!(Style::from_name("heat").is_err());
        assert_eq!(Style::from_name("value").unwrap(), Style::Value);
    }

    #[test]
    fn svg_has_one_polyline_per_path() {
        let s = trajectories_svg(
            &map(4, 4),
            &[("a".into(), vec![[0.1, 0.1], [1.0, 1.0]])],
            10.0,
        );
        assert_eq!(s.matches("<polyline").count(), 1);
        assert!(s.ends_with("</svg>\n"));
    }
}
