//! `key = value` files for world specs and training runs.

use crate::config::KvConfig;
use crate::datagen::AugmentSpec;
use crate::error::{Error, Result};
use crate::learners::{Optimizer, TrainConfig};
use crate::smppi::{bump_band_recipe, obstacle_band_recipe};
use crate::terrain_sim::TerrainRecipe;

use super::pipeline::SuiteConfig;

pub const WORLD_KEYS: &[&str] = &[
    "preset",
    "width",
    "height",
    "resolution",
    "base_roughness",
    "base_wavelength",
    "obstacle_height",
];

/// Recipe from a world spec. `preset` is `flat` (default), `off_road`,
/// `obstacle_band` or `bump_band`; the other keys override the preset.
pub fn recipe_from_config(text: &str) -> Result<TerrainRecipe> {
    let kv = KvConfig::parse(text, WORLD_KEYS)?;
    let width = kv.get_or("width", 128usize)?;
    let height = kv.get_or("height", 128usize)?;
    let resolution = kv.get_or("resolution", 0.25)?;
    let mut r = match kv.raw("preset").unwrap_or("flat") {
        "flat" => TerrainRecipe::flat(width, height, resolution),
        "off_road" => TerrainRecipe::off_road(width, height, resolution),
        "obstacle_band" => obstacle_band_recipe(),
        "bump_band" => bump_band_recipe(),
        other => {
            return Err(Error::InvalidConfig(format!(
                "bad value `{other}` for key `preset`"
            )))
        }
    };
    r.width = kv.get_or("width", r.width)?;
    r.height = kv.get_or("height", r.height)?;
    r.resolution = kv.get_or("resolution", r.resolution)?;
    r.base_roughness = kv.get_or("base_roughness", r.base_roughness)?;
    r.base_wavelength = kv.get_or("base_wavelength", r.base_wavelength)?;
    r.obstacle_height = kv.get_or("obstacle_height", r.obstacle_height)?;
    Ok(r)
}

pub const TRAIN_KEYS: &[&str] = &[
    "learning_rate",
    "batch_size",
    "epochs",
    "seed",
    "weight_decay",
    "optimizer",
    "nu",
    "prior",
    "non_negative",
    "learn_center",
    "final_layer_bias",
    "point_widths",
    "embedding_dim",
    "class_head",
    "reg_head",
    "augment",
    "augment_scale_min",
    "augment_scale_max",
    "with_regression",
];

fn widths(kv: &KvConfig, key: &str, default: &[usize]) -> Result<Vec<usize>> {
    match kv.raw(key) {
        None => Ok(default.to_vec()),
        Some("-") => Ok(Vec::new()),
        Some(v) => v
            .split(',')
            .map(|w| w.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidConfig(format!("bad value `{v}` for key `{key}`"))),
    }
}

/// Training settings: the benchmark defaults overridden by the file.
pub fn train_from_config(text: &str) -> Result<(TrainConfig, bool)> {
    let kv = KvConfig::parse(text, TRAIN_KEYS)?;
    let base = SuiteConfig::default();
    let mut c = base.train;
    c.learning_rate = kv.get_or("learning_rate", c.learning_rate)?;
    c.batch_size = kv.get_or("batch_size", c.batch_size)?;
    c.epochs = kv.get_or("epochs", c.epochs)?;
    c.seed = kv.get_or("seed", c.seed)?;
    c.weight_decay = kv.get_or("weight_decay", c.weight_decay)?;
    c.optimizer = match kv.raw("optimizer") {
        None => c.optimizer,
        Some("adam") => Optimizer::adam(),
        Some("sgd") => Optimizer::Sgd,
        Some(o) => {
            return Err(Error::InvalidConfig(format!(
                "bad value `{o}` for key `optimizer`"
            )))
        }
    };
    c.nu = kv.get_or("nu", c.nu)?;
    c.pu.prior = kv.get_or("prior", c.pu.prior)?;
    c.pu.non_negative = kv.get_or("non_negative", c.pu.non_negative)?;
    c.learn_center = kv.get_or("learn_center", c.learn_center)?;
    c.encoder.final_layer_bias = kv.get_or("final_layer_bias", c.encoder.final_layer_bias)?;
    c.encoder.point_widths = widths(&kv, "point_widths", &c.encoder.point_widths)?;
    c.encoder.embedding_dim = kv.get_or("embedding_dim", c.encoder.embedding_dim)?;
    c.encoder.class_head = widths(&kv, "class_head", &c.encoder.class_head)?;
    c.encoder.reg_head = widths(&kv, "reg_head", &c.encoder.reg_head)?;
    if !kv.get_or("augment", c.augment.is_some())? {
        c.augment = None;
    } else {
        let a = c.augment.unwrap_or(AugmentSpec {
            yaw_range: (-std::f64::consts::PI, std::f64::consts::PI),
            scale_range: (1.0, 1.0),
        });
        c.augment = Some(AugmentSpec {
            scale_range: (
                kv.get_or("augment_scale_min", a.scale_range.0)?,
                kv.get_or("augment_scale_max", a.scale_range.1)?,
            ),
            ..a
        });
    }
    let with_regression = kv.get_or("with_regression", base.with_regression)?;
    c.validate()?;
    Ok((c, with_regression))
}
