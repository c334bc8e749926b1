//! Text checkpoints. Every float is written with 17 significant digits so a
//! reload reproduces the exact bits.
//!
//! ```text
//! travbench-checkpoint v1
//! config k=16 point=3,32,64 embedding=32 class_head=16 reg_head=16 final_bias=false
//! method ours
//! seed 1
//! pu prior=<p> non_negative=<bool>
//! svdd radius=<r> nu=<nu> learn_center=<bool>
//! center <c1> <c2> ...
//! params <n>
//! <one parameter per line>
//! ```

use std::io::{BufRead, Write};

use super::{EncoderConfig, ModelState};
use crate::error::{Error, Result};
use crate::learners::{Method, PuConfig, SvddState};
use crate::terrain_sim::{expect_fields, num, read_header_line};

const MAGIC: &str = "travbench-checkpoint v1";
const W: &str = "checkpoint";

fn f17(v: f64) -> String {
    format!("{v:.16e}")
}

fn widths(v: &[usize]) -> String {
    if v.is_empty() {
        "-".into()
    } else {
        v.iter()
            .map(|w| w.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn parse_widths(s: &str, line: usize) -> Result<Vec<usize>> {
    if s == "-" {
        return Ok(Vec::new());
    }
    s.split(',').map(|w| num(w, W, line)).collect()
}

fn parse_bool(s: &str, line: usize) -> Result<bool> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::parse(W, line, format!("bad bool `{s}`"))),
    }
}

pub fn write_checkpoint(m: &ModelState, out: &mut impl Write) -> Result<()> {
    let c = &m.config;
    writeln!(out, "{MAGIC}")?;
    writeln!(
        out,
        "config k={} point={} embedding={} class_head={} reg_head={} final_bias={}",
        c.k,
        widths(&c.point_widths),
        c.embedding_dim,
        widths(&c.class_head),
        widths(&c.reg_head),
        c.final_layer_bias
    )?;
    writeln!(out, "method {}", m.method.name())?;
    writeln!(out, "seed {}", m.seed)?;
    writeln!(
        out,
        "pu prior={} non_negative={}",
        f17(m.pu.prior),
        m.pu.non_negative
    )?;
    writeln!(
        out,
        "svdd radius={} nu={} learn_center={}",
        f17(m.svdd.radius),
        f17(m.svdd.nu),
        m.svdd.learn_center
    )?;
    let center: Vec<String> = m.svdd.center.iter().map(|&v| f17(v)).collect();
    writeln!(out, "center {}", center.join(" "))?;
    writeln!(out, "params {}", m.params.len())?;
    for &p in &m.params {
        writeln!(out, "{}", f17(p))?;
    }
    Ok(())
}

fn kv<'a>(field: &'a str, key: &str, line: usize) -> Result<&'a str> {
    field
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| Error::parse(W, line, format!("expected `{key}=`")))
}

pub fn read_checkpoint(r: &mut impl BufRead) -> Result<ModelState> {
    if read_header_line(r, W, 1)? != MAGIC {
        return Err(Error::parse(W, 1, "bad magic"));
    }
    let l = read_header_line(r, W, 2)?;
    let f = expect_fields(&l, "config", 6, W, 2)?;
    let config = EncoderConfig {
        k: num(kv(f[0], "k", 2)?, W, 2)?,
        point_widths: parse_widths(kv(f[1], "point", 2)?, 2)?,
        embedding_dim: num(kv(f[2], "embedding", 2)?, W, 2)?,
        class_head: parse_widths(kv(f[3], "class_head", 2)?, 2)?,
        reg_head: parse_widths(kv(f[4], "reg_head", 2)?, 2)?,
        final_layer_bias: parse_bool(kv(f[5], "final_bias", 2)?, 2)?,
    };
    let l = read_header_line(r, W, 3)?;
    let name = expect_fields(&l, "method", 1, W, 3)?[0];
    let method = Method::from_name(name)
        .ok_or_else(|| Error::parse(W, 3, format!("unknown method `{name}`")))?;
    let l = read_header_line(r, W, 4)?;
    let seed = num(expect_fields(&l, "seed", 1, W, 4)?[0], W, 4)?;
    let l = read_header_line(r, W, 5)?;
    let f = expect_fields(&l, "pu", 2, W, 5)?;
    let pu = PuConfig {
        prior: num(kv(f[0], "prior", 5)?, W, 5)?,
        non_negative: parse_bool(kv(f[1], "non_negative", 5)?, 5)?,
    };
    let l = read_header_line(r, W, 6)?;
    let f = expect_fields(&l, "svdd", 3, W, 6)?;
    let radius = num(kv(f[0], "radius", 6)?, W, 6)?;
    let nu = num(kv(f[1], "nu", 6)?, W, 6)?;
    let learn_center = parse_bool(kv(f[2], "learn_center", 6)?, 6)?;
    let l = read_header_line(r, W, 7)?;
    let mut it = l.split_whitespace();
    if it.next() != Some("center") {
        return Err(Error::parse(W, 7, "expected `center`"));
    }
    let center = it.map(|v| num(v, W, 7)).collect::<Result<Vec<f64>>>()?;
    let l = read_header_line(r, W, 8)?;
    let n: usize = num(expect_fields(&l, "params", 1, W, 8)?[0], W, 8)?;
    let mut params = Vec::with_capacity(n);
    for i in 0..n {
        let l = read_header_line(r, W, 9 + i)?;
        params.push(num(l.trim(), W, 9 + i)?);
    }
    let svdd = SvddState {
        center,
        radius,
        nu,
        learn_center,
    };
    ModelState::from_parts(config, params, method, svdd, pu, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut m = ModelState::init(EncoderConfig::default(), Method::SoftSvdd, 42).unwrap();
        m.svdd.radius = 0.1 + 0.2;
        m.svdd.center = (0..32).map(|i| (i as f64).sin() / 3.0).collect();
        let mut a = Vec::new();
        write_checkpoint(&m, &mut a).unwrap();
        let back = read_checkpoint(&mut a.as_slice()).unwrap();
        assert_eq!(back, m);
        for (x, y) in back.params.iter().zip(&m.params) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        let mut b = Vec::new();
        write_checkpoint(&back, &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn headless_config_round_trips() {
        let cfg = EncoderConfig {
            k: 4,
            point_widths: vec![3, 4],
            embedding_dim: 2,
            class_head: vec![],
            reg_head: vec![2, 2],
            final_layer_bias: true,
        };
        let m = ModelState::init(cfg, Method::NnPu, 1).unwrap();
        let mut a = Vec::new();
        write_checkpoint(&m, &mut a).unwrap();
        assert_eq!(read_checkpoint(&mut a.as_slice()).unwrap(), m);
    }

    #[test]
    fn truncated_checkpoint_fails() {
        let m = ModelState::init(EncoderConfig::default(), Method::Ours, 1).unwrap();
        let mut a = Vec::new();
        write_checkpoint(&m, &mut a).unwrap();
        a.truncate(a.len() / 2);
        assert!(read_checkpoint(&mut a.as_slice()).is_err());
    }
}
