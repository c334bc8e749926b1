//! Self-supervised dataset generation: project proprioception onto contact
//! points, pair positives with unlabeled scan points, split and augment.

mod io;
mod spatial;

pub use io::{read_dataset, read_semantic_cloud, write_dataset, DatasetHeader};
pub use spatial::{dist2, PointIndex};

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::terrain_sim::{HeightField, LidarScan, SimTrace};

/// Default contact-to-cloud association radius (m), about a wheel footprint.
pub const DEFAULT_CONTACT_RADIUS: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Positive,
    Unlabeled,
    /// Held-out negative used only for evaluation.
    NegativeEvalOnly,
}

impl LabelKind {
    pub fn token(self) -> &'static str {
        match self {
            LabelKind::Positive => "positive",
            LabelKind::Unlabeled => "unlabeled",
            LabelKind::NegativeEvalOnly => "negative",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "positive" => Some(LabelKind::Positive),
            "unlabeled" => Some(LabelKind::Unlabeled),
            "negative" => Some(LabelKind::NegativeEvalOnly),
            _ => None,
        }
    }
}

/// Which proprioceptive channel becomes the traversability value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueMode {
    WheelForce,
    ZAccel,
    /// No regression target (semantic ingestion).
    None,
}

/// One query point with its local neighborhood.
#[derive(Debug, Clone, PartialEq)]
pub struct TraversalSample {
    pub query: [f64; 3],
    /// `k` neighbors relative to `query`.
    pub patch: Vec<[f64; 3]>,
    pub label: LabelKind,
    /// Normalized traversability in `[0, 1]`; only positives carry one, and
    /// classification-only positives carry none.
    pub trav_value: Option<f64>,
}

impl TraversalSample {
    pub fn new(query: [f64; 3], label: LabelKind, trav_value: Option<f64>) -> Self {
        Self {
            query,
            patch: Vec::new(),
            label,
            trav_value,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.label == LabelKind::Positive
    }
}

/// Positives from one projection and the min-max range used to normalize them.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedContacts {
    pub samples: Vec<TraversalSample>,
    pub normalization: (f64, f64),
    pub mode: ValueMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<TraversalSample>,
    pub eval: Vec<TraversalSample>,
    pub split_seed: u64,
}

/// Patch augmentation: yaw about z and isotropic scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentSpec {
    pub yaw_range: (f64, f64),
    pub scale_range: (f64, f64),
}

impl AugmentSpec {
    pub fn identity() -> Self {
        Self {
            yaw_range: (0.0, 0.0),
            scale_range: (1.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0) || !(hi >= lo) || !hi.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "scale range ({lo}, {hi}) must lie in (0, inf)"
            )));
        }
        if !(self.yaw_range.1 >= self.yaw_range.0) {
            return Err(Error::InvalidConfig("yaw range is reversed".into()));
        }
        Ok(())
    }
}

/// Concatenates all scan points in scan order.
pub fn merge_scans(scans: &[LidarScan]) -> Vec<[f64; 3]> {
    scans
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .collect()
}

/// Bucket size of the spatial index over scan clouds.
const INDEX_CELL: f64 = 0.5;

/// Turns every scan point within `radius` of a wheel contact into a positive
/// carrying that contact's proprioceptive value, min-max normalized over the
/// whole trace. A point touched by several contacts keeps the largest value.
/// Returns no samples (not an error) when nothing lies within `radius`.
pub fn project_contacts(
    trace: &SimTrace,
    scans: &[LidarScan],
    radius: f64,
    mode: ValueMode,
) -> Result<ProjectedContacts> {
    if !(radius > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "projection radius {radius} must be positive"
        )));
    }
    if scans.is_empty() {
        return Err(Error::InvalidConfig("no scans to project onto".into()));
    }
    let raw = |k: usize, w: usize| -> f64 {
        match mode {
            ValueMode::WheelForce => trace.wheel_forces[k][w],
            ValueMode::ZAccel => trace.z_accel[k].abs(),
            ValueMode::None => 0.0,
        }
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..trace.len() {
        for w in 0..trace.contacts[k].len() {
            let v = raw(k, w);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if trace.is_empty() {
        lo = 0.0;
        hi = 0.0;
    }
    let normalize = |v: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };

    let cloud = merge_scans(scans);
    let index = PointIndex::new(&cloud, radius.max(INDEX_CELL));
    let mut best: Vec<Option<f64>> = vec![None; cloud.len()];
    for k in 0..trace.len() {
        for (w, c) in trace.contacts[k].iter().enumerate() {
            let v = normalize(raw(k, w));
            for i in index.within(*c, radius) {
                best[i] = Some(best[i].map_or(v, |b: f64| b.max(v)));
            }
        }
    }
    let samples = best
        .iter()
        .enumerate()
        .filter_map(|(i, v)| {
            v.map(|v| {
                let value = (mode != ValueMode::None).then_some(v);
                TraversalSample::new(cloud[i], LabelKind::Positive, value)
            })
        })
        .collect();
    Ok(ProjectedContacts {
        samples,
        normalization: (lo, hi),
        mode,
    })
}

/// Fills `sample.patch` with the `k` nearest non-coincident cloud points,
/// relative to the query; pads by repeating the nearest one (or the origin
/// when the cloud offers nothing).
pub fn attach_patch(index: &PointIndex<'_>, sample: &mut TraversalSample, k: usize) {
    let q = sample.query;
    let nn = index.knn_excluding_coincident(q, k);
    let pts = index.points();
    let mut patch: Vec<[f64; 3]> = nn
        .iter()
        .map(|&(_, i)| [pts[i][0] - q[0], pts[i][1] - q[1], pts[i][2] - q[2]])
        .collect();
    let pad = patch.first().copied().unwrap_or([0.0; 3]);
    patch.resize(k, pad);
    sample.patch = patch;
}

/// Positives keep their labels; `unlabeled_per_scan` unlabeled samples are
/// drawn uniformly (without replacement) from each scan's non-positive points.
pub fn build_pu_dataset(
    scans: &[LidarScan],
    positives: &[TraversalSample],
    k: usize,
    unlabeled_per_scan: usize,
    seed: u64,
) -> Result<Vec<TraversalSample>> {
    build_pu_dataset_reserving(scans, positives, &[], k, unlabeled_per_scan, seed)
}

fn key(p: &[f64; 3]) -> [u64; 3] {
    [p[0].to_bits(), p[1].to_bits(), p[2].to_bits()]
}

/// Like [`build_pu_dataset`], and additionally appends `reserved` samples
/// (e.g. held-out negatives) with patches; their points never become unlabeled.
pub fn build_pu_dataset_reserving(
    scans: &[LidarScan],
    positives: &[TraversalSample],
    reserved: &[TraversalSample],
    k: usize,
    unlabeled_per_scan: usize,
    seed: u64,
) -> Result<Vec<TraversalSample>> {
    if k < 4 {
        return Err(Error::InvalidConfig(format!(
            "patch size k={k} must be at least 4"
        )));
    }
    let cloud = merge_scans(scans);
    let index = PointIndex::new(&cloud, INDEX_CELL);
    let taken: HashSet<[u64; 3]> = positives
        .iter()
        .chain(reserved)
        .map(|s| key(&s.query))
        .collect();

    let mut out = Vec::with_capacity(positives.len() + reserved.len());
    for p in positives {
        let mut s = p.clone();
        attach_patch(&index, &mut s, k);
        out.push(s);
    }
    let mut offset = 0;
    for (si, scan) in scans.iter().enumerate() {
        let range = offset..offset + scan.points.len();
        offset += scan.points.len();
        if scan.points.is_empty() || unlabeled_per_scan == 0 {
            continue;
        }
        let pool: Vec<usize> = range
            .filter(|&i| !taken.contains(&key(&cloud[i])))
            .collect();
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed ^ (si as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let n = unlabeled_per_scan.min(pool.len());
        let mut picks: Vec<usize> = rand::seq::index::sample(&mut rng, pool.len(), n)
            .into_iter()
            .map(|j| pool[j])
            .collect();
        picks.sort_unstable();
        for i in picks {
            let mut s = TraversalSample::new(cloud[i], LabelKind::Unlabeled, None);
            attach_patch(&index, &mut s, k);
            out.push(s);
        }
    }
    for r in reserved {
        let mut s = r.clone();
        attach_patch(&index, &mut s, k);
        out.push(s);
    }
    Ok(out)
}

/// Scan points standing on obstacle cells and clearly above the ground,
/// i.e. the obvious non-traversable structure; at most `max_count`, drawn
/// uniformly with `seed`.
pub fn obstacle_negatives(
    world: &HeightField,
    scans: &[LidarScan],
    min_height: f64,
    max_count: usize,
    seed: u64,
) -> Vec<TraversalSample> {
    let mut seen = HashSet::new();
    let mut pool: Vec<[f64; 3]> = merge_scans(scans)
        .into_iter()
        .filter(|p| match world.cell_of(p[0], p[1]) {
            Some((c, r)) => {
                world.is_obstacle(c, r) && p[2] - world.elevation_at(p[0], p[1]) >= min_height
            }
            None => false,
        })
        .filter(|p| seen.insert(key(p)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    pool.truncate(max_count);
    pool.into_iter()
        .map(|p| TraversalSample::new(p, LabelKind::NegativeEvalOnly, None))
        .collect()
}

/// Deterministic shuffled split: `floor(0.8·n)` of the trainable samples
/// (positive and unlabeled) go to train, the rest to eval. Eval-only
/// negatives always land in eval.
pub fn split_dataset(samples: &[TraversalSample], split_seed: u64) -> Result<DatasetSplit> {
    let trainable: Vec<usize> = (0..samples.len())
        .filter(|&i| samples[i].label != LabelKind::NegativeEvalOnly)
        .collect();
    if trainable.len() < 5 {
        return Err(Error::InvalidConfig(format!(
            "need at least 5 trainable samples to split, got {}",
            trainable.len()
        )));
    }
    let mut order = trainable;
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed);
    order.shuffle(&mut rng);
    let n_train = order.len() * 4 / 5;
    let train = order[..n_train]
        .iter()
        .map(|&i| samples[i].clone())
        .collect();
    let mut eval: Vec<TraversalSample> = order[n_train..]
        .iter()
        .map(|&i| samples[i].clone())
        .collect();
    eval.extend(
        samples
            .iter()
            .filter(|s| s.label == LabelKind::NegativeEvalOnly)
            .cloned(),
    );
    Ok(DatasetSplit {
        train,
        eval,
        split_seed,
    })
}

/// Rotates the patch about z and scales it by draws from `spec`; labels and
/// values are untouched.
pub fn augment(sample: &TraversalSample, spec: &AugmentSpec, draw_seed: u64) -> TraversalSample {
    let mut rng = ChaCha8Rng::seed_from_u64(draw_seed);
    let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| {
        if lo == hi {
            lo
        } else {
            rng.gen_range(lo..=hi)
        }
    };
    let yaw = draw(&mut rng, spec.yaw_range);
    let scale = draw(&mut rng, spec.scale_range);
    let mut out = sample.clone();
    if yaw != 0.0 {
        let (s, c) = yaw.sin_cos();
        for p in &mut out.patch {
            *p = [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]];
        }
    }
    if scale != 1.0 {
        for p in &mut out.patch {
            *p = [p[0] * scale, p[1] * scale, p[2] * scale];
        }
    }
    out
}

/// Class names treated as traversable / non-traversable in a RELLIS-style
/// annotated cloud.
pub fn rellis_positive_classes() -> Vec<String> {
    ["grass", "mud"].iter().map(|s| s.to_string()).collect()
}

pub fn rellis_negative_classes() -> Vec<String> {
    [
        "tree", "vehicle", "object", "person", "fence", "barrier", "bush",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// Labels an annotated cloud: positive classes become classification-only
/// positives, negative classes eval-only negatives, everything else is
/// dropped. Patches come from the full cloud.
pub fn ingest_semantic_cloud(
    points: &[([f64; 3], String)],
    positive_classes: &[String],
    negative_classes: &[String],
    k: usize,
) -> Result<Vec<TraversalSample>> {
    if let Some(c) = positive_classes
        .iter()
        .find(|c| negative_classes.contains(c))
    {
        return Err(Error::InvalidConfig(format!(
            "class `{c}` is both positive and negative"
        )));
    }
    if k < 1 {
        return Err(Error::InvalidConfig("k must be positive".into()));
    }
    let cloud: Vec<[f64; 3]> = points.iter().map(|(p, _)| *p).collect();
    let index = PointIndex::new(&cloud, INDEX_CELL);
    let mut out = Vec::new();
    for (p, class) in points {
        let label = if positive_classes.contains(class) {
            LabelKind::Positive
        } else if negative_classes.contains(class) {
            LabelKind::NegativeEvalOnly
        } else {
            continue;
        };
        let mut s = TraversalSample::new(*p, label, None);
        attach_patch(&index, &mut s, k);
        out.push(s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain_sim::SensorPose;

    fn scan(points: Vec<[f64; 3]>) -> LidarScan {
        LidarScan {
            pose: SensorPose {
                x: 0.0,
                y: 0.0,
                z: 2.0,
                yaw: 0.0,
            },
            channels: 1,
            azimuth_steps: points.len().max(1),
            points,
        }
    }

    fn trace(contacts: Vec<[f64; 3]>, az: Vec<f64>) -> SimTrace {
        let n = contacts.len();
        SimTrace {
            vehicle: "t".into(),
            timestamps: (0..n).map(|k| k as f64).collect(),
            poses: vec![[0.0; 3]; n],
            wheel_forces: az.iter().map(|a| vec![*a]).collect(),
            contacts: contacts.into_iter().map(|c| vec![c]).collect(),
            z_accel: az,
        }
    }

    #[test]
    fn projection_normalizes_to_trace_range() {
        let t = trace(
            vec![[0.0, 0.0, 0.0], [5.0, 0.0, 0.0], [10.0, 0.0, 0.0]],
            vec![2.0, 6.0, -4.0],
        );
        let s = scan(vec![[0.0, 0.0, 0.0], [5.0, 0.0, 0.0], [10.0, 0.0, 0.0]]);
        let p = project_contacts(&t, &[s], 0.25, ValueMode::ZAccel).unwrap();
        let v: Vec<f64> = p.samples.iter().map(|s| s.trav_value.unwrap()).collect();
        assert_eq!(p.normalization, (2.0, 6.0));
        assert_eq!(v, vec![0.0, 1.0, 0.5]);
    }

    #[test]
    fn projection_at_trace_minimum_is_zero() {
        let t = trace(vec![[1.0, 1.0, 0.0], [9.0, 9.0, 0.0]], vec![0.5, 3.0]);
        let s = scan(vec![[1.0, 1.0, 0.0]]);
        let p = project_contacts(&t, &[s], 0.25, ValueMode::ZAccel).unwrap();
        assert_eq!(p.samples.len(), 1);
        assert_eq!(p.samples[0].trav_value, Some(0.0));
        assert_eq!(p.samples[0].label, LabelKind::Positive);
    }

    #[test]
    fn projection_radius_gate() {
        let t = trace(vec![[0.0, 0.0, 0.0]], vec![1.0]);
        let s = scan(vec![[0.3, 0.0, 0.0]]);
        let p = project_contacts(&t, &[s], 0.25, ValueMode::WheelForce).unwrap();
        assert!(p.samples.is_empty());
        assert!(project_contacts(&t, &[], 0.25, ValueMode::WheelForce).is_err());
    }

    fn grid_scan() -> LidarScan {
        let mut pts = Vec::new();
        for j in 0..5 {
            for i in 0..5 {
                pts.push([i as f64, j as f64, 0.0]);
            }
        }
        scan(pts)
    }

    #[test]
    fn grid_patch_is_axis_neighbors() {
        let s = grid_scan();
        let pos = vec![TraversalSample::new(
            [2.0, 2.0, 0.0],
            LabelKind::Positive,
            Some(0.3),
        )];
        let out = build_pu_dataset(&[s], &pos, 4, 0, 1).unwrap();
        assert_eq!(out.len(), 1);
        let mut patch = out[0].patch.clone();
        patch.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(
            patch,
            vec![
                [-1.0, 0.0, 0.0],
                [0.0, -1.0, 0.0],
                [0.0, 1.0, 0.0],
                [1.0, 0.0, 0.0]
            ]
        );
        // ties are resolved by cloud index: (2,1), (1,2), (3,2), (2,3)
        assert_eq!(
            out[0].patch,
            vec![
                [0.0, -1.0, 0.0],
                [-1.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0]
            ]
        );
    }

    #[test]
    fn sparse_patch_is_padded_by_nearest() {
        let s = scan(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 3.0, 0.0]]);
        let pos = vec![TraversalSample::new(
            [0.0, 0.0, 0.0],
            LabelKind::Positive,
            None,
        )];
        let out = build_pu_dataset(&[s], &pos, 4, 0, 1).unwrap();
        assert_eq!(
            out[0].patch,
            vec![
                [1.0, 0.0, 0.0],
                [0.0, 3.0, 0.0],
                [1.0, 0.0, 0.0],
                [1.0, 0.0, 0.0]
            ]
        );
    }

    #[test]
    fn unlabeled_excludes_positives_and_is_seeded() {
        let s = grid_scan();
        let pos: Vec<_> = (0..5)
            .map(|i| TraversalSample::new([i as f64, 0.0, 0.0], LabelKind::Positive, Some(0.1)))
            .collect();
        let a = build_pu_dataset(std::slice::from_ref(&s), &pos, 4, 10, 9).unwrap();
        let b = build_pu_dataset(std::slice::from_ref(&s), &pos, 4, 10, 9).unwrap();
        assert_eq!(a, b);
        let unl: Vec<_> = a
            .iter()
            .filter(|x| x.label == LabelKind::Unlabeled)
            .collect();
        assert_eq!(unl.len(), 10);
        assert!(unl.iter().all(|u| u.query[1] != 0.0));
        // asking for more than available takes all 20 non-positives
        let c = build_pu_dataset(&[s], &pos, 4, 100, 9).unwrap();
        assert_eq!(c.len(), 25);
        assert!(build_pu_dataset(&[grid_scan()], &pos, 3, 0, 0).is_err());
    }

    fn labeled(n: usize) -> Vec<TraversalSample> {
        (0..n)
            .map(|i| TraversalSample::new([i as f64, 0.0, 0.0], LabelKind::Unlabeled, None))
            .collect()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let s = split_dataset(&labeled(10), 3).unwrap();
        assert_eq!((s.train.len(), s.eval.len()), (8, 2));
        let s = split_dataset(&labeled(5), 3).unwrap();
        assert_eq!((s.train.len(), s.eval.len()), (4, 1));
        assert_eq!(
            split_dataset(&labeled(37), 4).unwrap(),
            split_dataset(&labeled(37), 4).unwrap()
        );
        assert!(split_dataset(&labeled(4), 0).is_err());
    }

    #[test]
    fn negatives_never_train() {
        let mut all = labeled(20);
        all.extend((0..6).map(|i| {
            TraversalSample::new([0.0, i as f64, 9.0], LabelKind::NegativeEvalOnly, None)
        }));
        let s = split_dataset(&all, 1).unwrap();
        assert_eq!(s.train.len(), 16);
        assert!(s
            .train
            .iter()
            .all(|x| x.label != LabelKind::NegativeEvalOnly));
        assert_eq!(
            s.eval
                .iter()
                .filter(|x| x.label == LabelKind::NegativeEvalOnly)
                .count(),
            6
        );
    }

    #[test]
    fn identity_augment_is_bit_exact() {
        let mut s = TraversalSample::new([1.0, 2.0, 3.0], LabelKind::Positive, Some(0.7));
        s.patch = vec![[0.1, -0.0, 0.3], [-0.2, 0.5, -0.0]];
        let a = augment(&s, &AugmentSpec::identity(), 77);
        assert_eq!(a, s);
        for (x, y) in a.patch.iter().flatten().zip(s.patch.iter().flatten()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn half_turn_flips_x() {
        let mut s = TraversalSample::new([0.0; 3], LabelKind::Unlabeled, None);
        s.patch = vec![[1.0, 0.0, 0.0]];
        let spec = AugmentSpec {
            yaw_range: (std::f64::consts::PI, std::f64::consts::PI),
            scale_range: (1.0, 1.0),
        };
        let a = augment(&s, &spec, 0);
        assert!((a.patch[0][0] + 1.0).abs() < 1e-12);
        assert!(a.patch[0][1].abs() < 1e-12);
        assert_eq!(a.patch[0][2], 0.0);
    }

    #[test]
    fn semantic_partition_and_overlap() {
        let mut pts = Vec::new();
        for (class, n) in [("grass", 10), ("tree", 5), ("sky", 3)] {
            for i in 0..n {
                pts.push(([i as f64, class.len() as f64, 0.0], class.to_string()));
            }
        }
        let pos = vec!["grass".to_string()];
        let neg = vec!["tree".to_string()];
        let out = ingest_semantic_cloud(&pts, &pos, &neg, 4).unwrap();
        assert_eq!(
            out.iter()
                .filter(|s| s.label == LabelKind::Positive)
                .count(),
            10
        );
        assert_eq!(
            out.iter()
                .filter(|s| s.label == LabelKind::NegativeEvalOnly)
                .count(),
            5
        );
        assert_eq!(out.len(), 15);
        assert!(out
            .iter()
            .all(|s| s.trav_value.is_none() && s.patch.len() == 4));
        let only_pos = ingest_semantic_cloud(&pts, &pos, &[], 4).unwrap();
        assert_eq!(only_pos.len(), 10);
        assert!(matches!(
            ingest_semantic_cloud(&pts, &pos, &pos, 4),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn rellis_mapping() {
        assert_eq!(rellis_positive_classes(), vec!["grass", "mud"]);
        assert_eq!(
            rellis_negative_classes(),
            vec!["tree", "vehicle", "object", "person", "fence", "barrier", "bush"]
        );
    }
}
