//! The synthetic benchmark: one seeded off-road world driven by several
//! vehicles, scanned along the way, turned into a PU dataset and used to
//! train and compare every learner.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datagen::{
    build_pu_dataset_reserving, obstacle_negatives, project_contacts, split_dataset, AugmentSpec,
    DatasetHeader, DatasetSplit, LabelKind, TraversalSample, ValueMode, DEFAULT_CONTACT_RADIUS,
};
use crate::encoder_net::{EncoderConfig, ModelState};
use crate::error::{Error, Result};
use crate::evalmetrics::{build_report, EvalReport};
use crate::learners::{
    embedding_variance, train, EvalThreshold, Method, PuConfig, TrainConfig, TrainLog,
};
use crate::terrain_sim::{
    generate_world, sample_lidar, simulate_traversal, HeightField, LidarConfig, LidarScan,
    SensorPose, SimTrace, TerrainRecipe, VehicleSpec,
};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub seed: u64,
    pub recipe: TerrainRecipe,
    pub vehicles: Vec<String>,
    pub lanes_per_vehicle: usize,
    pub sim_dt: f64,
    /// Distance (m) between consecutive scans along a lane.
    pub scan_spacing: f64,
    pub sensor_height: f64,
    pub lidar: LidarConfig,
    pub contact_radius: f64,
    pub value_mode: ValueMode,
    pub k: usize,
    /// Positives kept after projection (uniform subsample).
    pub positives: usize,
    /// Total unlabeled samples, spread evenly over the scans.
    pub unlabeled: usize,
    pub negatives: usize,
    pub negative_min_height: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            recipe: TerrainRecipe::off_road(240, 240, 0.25),
            vehicles: vec!["compact".into(), "suv".into(), "6x6".into()],
            lanes_per_vehicle: 3,
            sim_dt: 0.1,
            scan_spacing: 6.0,
            sensor_height: 1.8,
            lidar: LidarConfig::channels_128(360, 25.0),
            contact_radius: DEFAULT_CONTACT_RADIUS,
            value_mode: ValueMode::WheelForce,
            k: 16,
            positives: 6500,
            unlabeled: 26000,
            negatives: 2000,
            negative_min_height: 0.3,
        }
    }
}

impl BenchmarkConfig {
    /// A few-second variant for examples and smoke tests.
    pub fn small(seed: u64) -> Self {
        Self {
            seed,
            recipe: TerrainRecipe::off_road(128, 128, 0.25),
            lanes_per_vehicle: 1,
            lidar: LidarConfig::channels_128(120, 15.0),
            positives: 600,
            unlabeled: 2400,
            negatives: 300,
            ..Self::default()
        }
    }
}

/// One vehicle's drive.
#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    pub vehicle: String,
    pub path: Vec<[f64; 2]>,
    pub trace: SimTrace,
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub world: HeightField,
    pub lanes: Vec<Lane>,
    pub scans: Vec<LidarScan>,
    pub header: DatasetHeader,
    /// Positives, unlabeled, then eval-only negatives.
    pub samples: Vec<TraversalSample>,
    pub split: DatasetSplit,
}

fn sub_seed(seed: u64, tag: u64) -> u64 {
    let mut s = crate::terrain_sim::SplitMix::new(seed ^ tag.wrapping_mul(0xD1B5_4A32_D192_ED03));
    s.next_u64()
}

/// Gently wavy lanes across the world, horizontal or vertical, kept only if
/// the vehicle can drive them without touching an obstacle.
fn plan_lanes(
    world: &HeightField,
    vehicle: &VehicleSpec,
    n: usize,
    dt: f64,
    seed: u64,
) -> Result<Vec<Lane>> {
    let ([x0, y0], [x1, y1]) = world.extent();
    let margin = 4.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lanes = Vec::new();
    for _ in 0..200 {
        if lanes.len() == n {
            break;
        }
        let vertical = rng.gen_bool(0.5);
        let (a0, a1, b0, b1) = if vertical {
            (y0, y1, x0, x1)
        } else {
            (x0, x1, y0, y1)
        };
        let offset = rng.gen_range(b0 + margin..b1 - margin);
        let amp = rng.gen_range(0.0..3.0);
        let wavelength = rng.gen_range(15.0..35.0);
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let steps = ((a1 - a0 - 2.0 * margin) / 0.5) as usize;
        let path: Vec<[f64; 2]> = (0..=steps)
            .map(|i| {
                let a = a0 + margin + i as f64 * 0.5;
                let b = (offset + amp * (std::f64::consts::TAU * a / wavelength + phase).sin())
                    .clamp(b0 + margin, b1 - margin);
                if vertical {
                    [b, a]
                } else {
                    [a, b]
                }
            })
            .collect();
        match simulate_traversal(world, vehicle, &path, dt) {
            Ok(trace) => lanes.push(Lane {
                vehicle: vehicle.name.clone(),
                path,
                trace,
            }),
            Err(Error::PathViolatesMask { .. }) | Err(Error::PathOutOfBounds { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if lanes.len() < n {
        return Err(Error::InvalidConfig(format!(
            "found only {} obstacle-free lanes for {}",
            lanes.len(),
            vehicle.name
        )));
    }
    Ok(lanes)
}

/// Traces concatenated in order (timestamps kept increasing), so projected
/// values share one min-max normalization across vehicles.
pub fn merge_traces(traces: &[&SimTrace]) -> SimTrace {
    let mut t = SimTrace {
        vehicle: traces
            .iter()
            .map(|l| l.vehicle.as_str())
            .collect::<Vec<_>>()
            .join("+"),
        timestamps: Vec::new(),
        poses: Vec::new(),
        contacts: Vec::new(),
        wheel_forces: Vec::new(),
        z_accel: Vec::new(),
    };
    for l in traces {
        let base = t.timestamps.last().map_or(0.0, |v| v + 1.0);
        t.timestamps.extend(l.timestamps.iter().map(|s| s + base));
        t.poses.extend_from_slice(&l.poses);
        t.contacts.extend_from_slice(&l.contacts);
        t.wheel_forces.extend_from_slice(&l.wheel_forces);
        t.z_accel.extend_from_slice(&l.z_accel);
    }
    t
}

/// Scans every `spacing` meters along a trace, the sensor `sensor_height`
/// above the ground.
pub fn scan_along(
    world: &HeightField,
    trace: &SimTrace,
    spacing: f64,
    sensor_height: f64,
    lidar: &LidarConfig,
) -> Result<Vec<LidarScan>> {
    let step = trace
        .poses
        .windows(2)
        .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
        .fold(0.0, f64::max)
        .max(1e-9);
    let every = ((spacing / step).round() as usize).max(1);
    trace
        .poses
        .iter()
        .step_by(every)
        .map(|p| {
            let pose = SensorPose {
                x: p[0],
                y: p[1],
                z: world.elevation_at(p[0], p[1]) + sensor_height,
                yaw: p[2],
            };
            sample_lidar(world, pose, lidar)
        })
        .collect()
}

fn scan_lanes(
    world: &HeightField,
    lanes: &[Lane],
    cfg: &BenchmarkConfig,
) -> Result<Vec<LidarScan>> {
    let mut scans = Vec::new();
    for lane in lanes {
        scans.extend(scan_along(
            world,
            &lane.trace,
            cfg.scan_spacing,
            cfg.sensor_height,
            &cfg.lidar,
        )?);
    }
    Ok(scans)
}

/// Builds the whole benchmark. Deterministic in `cfg`.
pub fn build_benchmark(cfg: &BenchmarkConfig) -> Result<Benchmark> {
    let world = generate_world(cfg.seed, &cfg.recipe)?;
    let mut lanes = Vec::new();
    for (i, name) in cfg.vehicles.iter().enumerate() {
        let v = VehicleSpec::preset(name)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown vehicle `{name}`")))?;
        lanes.extend(plan_lanes(
            &world,
            &v,
            cfg.lanes_per_vehicle,
            cfg.sim_dt,
            sub_seed(cfg.seed, 10 + i as u64),
        )?);
    }
    let scans = scan_lanes(&world, &lanes, cfg)?;
    let projected = project_contacts(
        &merge_traces(&lanes.iter().map(|l| &l.trace).collect::<Vec<_>>()),
        &scans,
        cfg.contact_radius,
        cfg.value_mode,
    )?;

    let mut positives = projected.samples;
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, 2));
    positives.shuffle(&mut rng);
    positives.truncate(cfg.positives);
    // restore scan order so the file reads naturally
    let order: BTreeMap<[u64; 3], usize> = positives
        .iter()
        .enumerate()
        .map(|(i, s)| (s.query.map(f64::to_bits), i))
        .collect();
    positives = order.values().map(|&i| positives[i].clone()).collect();

    let negatives = obstacle_negatives(
        &world,
        &scans,
        cfg.negative_min_height,
        cfg.negatives,
        sub_seed(cfg.seed, 3),
    );
    let per_scan = cfg.unlabeled.div_ceil(scans.len().max(1));
    let mut samples = build_pu_dataset_reserving(
        &scans,
        &positives,
        &negatives,
        cfg.k,
        per_scan,
        sub_seed(cfg.seed, 4),
    )?;
    // trim the unlabeled surplus from the end of the pool
    let mut extra = samples
        .iter()
        .filter(|s| s.label == LabelKind::Unlabeled)
        .count()
        .saturating_sub(cfg.unlabeled);
    let mut keep = vec![true; samples.len()];
    for (i, s) in samples.iter().enumerate().rev() {
        if extra == 0 {
            break;
        }
        if s.label == LabelKind::Unlabeled {
            keep[i] = false;
            extra -= 1;
        }
    }
    let mut it = keep.iter();
    samples.retain(|_| *it.next().unwrap());

    let split_seed = sub_seed(cfg.seed, 5);
    let split = split_dataset(&samples, split_seed)?;
    let header = DatasetHeader {
        k: cfg.k,
        value_mode: cfg.value_mode,
        normalization: projected.normalization,
        seeds: BTreeMap::from([
            ("world".to_string(), cfg.seed),
            ("split".to_string(), split_seed),
            ("unlabeled".to_string(), sub_seed(cfg.seed, 4)),
        ]),
    };
    Ok(Benchmark {
        world,
        lanes,
        scans,
        header,
        samples,
        split,
    })
}

/// Labeled eval samples with equal positive and negative counts; the larger
/// class is subsampled with `seed`.
pub fn balanced_eval(eval: &[TraversalSample], seed: u64) -> Vec<TraversalSample> {
    let mut pos: Vec<&TraversalSample> = eval
        .iter()
        .filter(|s| s.label == LabelKind::Positive)
        .collect();
    let mut neg: Vec<&TraversalSample> = eval
        .iter()
        .filter(|s| s.label == LabelKind::NegativeEvalOnly)
        .collect();
    let n = pos.len().min(neg.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in [&mut pos, &mut neg] {
        if v.len() > n {
            let picked: HashSet<usize> = rand::seq::index::sample(&mut rng, v.len(), n)
                .into_iter()
                .collect();
            let mut i = 0;
            v.retain(|_| {
                i += 1;
                picked.contains(&(i - 1))
            });
        }
    }
    pos.into_iter().chain(neg).cloned().collect()
}

/// Training settings shared by every benchmark model.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub train: TrainConfig,
    pub with_regression: bool,
    pub threshold: EvalThreshold,
    /// Also train the collapse-prone SVDD and the uncorrected nnPU.
    pub ablations: bool,
    /// Weight decay of the collapse run; strong decay lets the bias carry
    /// the center while every weight shrinks to zero.
    pub collapse_weight_decay: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig {
                epochs: 12,
                batch_size: 128,
                learning_rate: 3e-3,
                encoder: EncoderConfig {
                    k: 16,
                    point_widths: vec![3, 16, 32],
                    embedding_dim: 16,
                    class_head: vec![16],
                    reg_head: vec![16],
                    final_layer_bias: false,
                },
                augment: Some(AugmentSpec {
                    yaw_range: (-std::f64::consts::PI, std::f64::consts::PI),
                    scale_range: (0.9, 1.1),
                }),
                ..TrainConfig::default()
            },
            with_regression: true,
            threshold: EvalThreshold::default(),
            ablations: true,
            collapse_weight_decay: 1e-3,
        }
    }
}

pub const COLLAPSE_RUN: &str = "svdd_collapse";
pub const NO_CORRECTION_RUN: &str = "nnpu_no_correction";

#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub name: String,
    pub model: ModelState,
    pub log: TrainLog,
}

/// Trains the four methods, then (optionally) the collapse run and the
/// uncorrected nnPU run, all from the same seed.
pub fn train_suite(split: &DatasetSplit, cfg: &SuiteConfig) -> Result<Vec<SuiteRun>> {
    let mut runs = Vec::new();
    for m in Method::ALL {
        let (model, log) = train(split, m, cfg.with_regression, &cfg.train)?;
        runs.push(SuiteRun {
            name: m.name().to_string(),
            model,
            log,
        });
    }
    if cfg.ablations {
        let mut c = cfg.train.clone();
        c.encoder.final_layer_bias = true;
        c.learn_center = true;
        c.weight_decay = cfg.collapse_weight_decay;
        let (model, log) = train(split, Method::Svdd, cfg.with_regression, &c)?;
        runs.push(SuiteRun {
            name: COLLAPSE_RUN.into(),
            model,
            log,
        });
        let mut c = cfg.train.clone();
        c.pu = PuConfig {
            non_negative: false,
            ..c.pu
        };
        let (model, log) = train(split, Method::NnPu, cfg.with_regression, &c)?;
        runs.push(SuiteRun {
            name: NO_CORRECTION_RUN.into(),
            model,
            log,
        });
    }
    Ok(runs)
}

/// Report over the balanced eval set plus each run's embedding variance on it.
pub fn evaluate_suite(
    dataset: &str,
    runs: &[SuiteRun],
    eval: &[TraversalSample],
    threshold: EvalThreshold,
) -> Result<(EvalReport, Vec<(String, f64)>)> {
    let models: Vec<(String, &ModelState)> =
        runs.iter().map(|r| (r.name.clone(), &r.model)).collect();
    let report = build_report(dataset, &models, eval, threshold)?;
    let variances = runs
        .iter()
        .map(|r| Ok((r.name.clone(), embedding_variance(&r.model, eval)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok((report, variances))
}
