//! `repro`: the full benchmark plus the navigation scenarios, written to one
//! output directory. No timestamps or absolute paths end up in any file, so
//! two runs with the same seed are byte-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::datagen::TraversalSample;
use crate::encoder_net::{write_checkpoint, ModelState};
use crate::error::{Error, Result};
use crate::evalmetrics::EvalReport;
use crate::gridmap::{build_map, write_map, MapPoint};
use crate::learners::{predict_value, score, EvalThreshold};
use crate::smppi::{lateral_deviation, write_trajectory_csv, NavOutcome, Scenario, ScenarioRun};
use crate::terrain_sim::VehicleSpec;

use super::pipeline::{
    balanced_eval, build_benchmark, evaluate_suite, train_suite, BenchmarkConfig, SuiteConfig,
    SuiteRun,
};
use super::render::{render_map, render_trajectories, trajectories_svg, Style};
use super::write_file;

/// Map points for every sample: score, class at `threshold`, regressed value.
pub fn score_points(
    model: &ModelState,
    samples: &[TraversalSample],
    threshold: EvalThreshold,
) -> Result<Vec<MapPoint>> {
    samples
        .iter()
        .map(|s| {
            let sc = score(model, s)?;
            Ok(MapPoint {
                position: s.query,
                score: sc,
                traversable: threshold.classify(sc),
                trav_pred: predict_value(model, s)?,
            })
        })
        .collect()
}

/// Smallest grid aligned to multiples of `resolution` covering all points.
pub fn map_extent(points: &[MapPoint], resolution: f64) -> ([f64; 2], usize, usize) {
    if points.is_empty() {
        return ([0.0, 0.0], 1, 1);
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for a in 0..2 {
            lo[a] = lo[a].min(p.position[a]);
            hi[a] = hi[a].max(p.position[a]);
        }
    }
    let origin = [
        (lo[0] / resolution).floor() * resolution,
        (lo[1] / resolution).floor() * resolution,
    ];
    let w = ((hi[0] - origin[0]) / resolution).floor() as usize + 1;
    let h = ((hi[1] - origin[1]) / resolution).floor() as usize + 1;
    (origin, w, h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub name: String,
    pub outcome: NavOutcome,
    pub steps: usize,
    pub blocked_steps: usize,
    pub lateral_deviation: f64,
    /// Ground-truth wheel impact; `None` when the executed path touches an
    /// obstacle, which the simulator refuses to drive.
    pub true_impact: Option<f64>,
}

impl ScenarioOutcome {
    pub fn of(name: &str, s: &Scenario, run: &ScenarioRun) -> Result<Self> {
        Ok(Self {
            name: name.to_string(),
            outcome: run.nav.outcome,
            steps: run.nav.logs.len(),
            blocked_steps: run.nav.blocked_contacts(),
            lateral_deviation: lateral_deviation(
                &run.nav.path_xy(),
                [s.start.x, s.start.y],
                s.goal,
            ),
            true_impact: match run.true_impact(&s.vehicle, s.mppi.dt) {
                Ok(v) => Some(v),
                Err(Error::PathViolatesMask { .. }) => None,
                Err(e) => return Err(e),
            },
        })
    }
}

#[derive(Debug, Clone)]
pub struct ReproSummary {
    pub report: EvalReport,
    pub variances: Vec<(String, f64)>,
    pub runs: Vec<SuiteRun>,
    pub n_positives: usize,
    pub n_unlabeled: usize,
    pub scenarios: Vec<ScenarioOutcome>,
    /// Written files relative to the output directory, sorted.
    pub files: Vec<PathBuf>,
}

impl ReproSummary {
    pub fn scenario(&self, name: &str) -> Option<&ScenarioOutcome> {
        self.scenarios.iter().find(|s| s.name == name)
    }

    pub fn run(&self, name: &str) -> Option<&SuiteRun> {
        self.runs.iter().find(|r| r.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReproConfig {
    pub seed: u64,
    pub benchmark: BenchmarkConfig,
    pub suite: SuiteConfig,
    /// Cell size of the learned benchmark map.
    pub map_resolution: f64,
    pub render_scale: usize,
    pub run_scenarios: bool,
}

impl ReproConfig {
    pub fn full(seed: u64) -> Self {
        let mut suite = SuiteConfig::default();
        suite.train.seed = seed;
        Self {
            seed,
            benchmark: BenchmarkConfig {
                seed,
                ..BenchmarkConfig::default()
            },
            suite,
            map_resolution: 0.5,
            render_scale: 4,
            run_scenarios: true,
        }
    }

    /// Small benchmark and short training; seconds instead of a minute.
    pub fn quick(seed: u64) -> Self {
        let mut c = Self::full(seed);
        c.benchmark = BenchmarkConfig::small(seed);
        c.suite.train.epochs = 3;
        c
    }
}

fn pu_terms_csv(run: &SuiteRun) -> String {
    let mut s = String::from("epoch,raw,reported\n");
    for t in &run.log.pu_terms {
        let _ = writeln!(s, "{},{:e},{:e}", t.epoch, t.raw, t.reported);
    }
    s
}

fn scenario_list(seed: u64) -> Vec<(String, Scenario)> {
    let with_seed = |mut s: Scenario| {
        s.mppi.seed = seed;
        s
    };
    vec![
        (
            "obstacle_band_alpha1_0.5".into(),
            with_seed(Scenario::obstacle_band(0.5)),
        ),
        (
            "obstacle_band_alpha1_0".into(),
            with_seed(Scenario::obstacle_band(0.0)),
        ),
        (
            "bump_band_compact".into(),
            with_seed(Scenario::bump_band(VehicleSpec::compact_car(), 0.5)),
        ),
        (
            "bump_band_6x6".into(),
            with_seed(Scenario::bump_band(VehicleSpec::six_by_six(), 0.5)),
        ),
        (
            "bump_band_compact_alpha2_0".into(),
            with_seed(Scenario::bump_band(VehicleSpec::compact_car(), 0.0)),
        ),
    ]
}

/// Overlay renders: file stem and the runs drawn on it, in color order.
const RENDER_GROUPS: [(&str, [&str; 2]); 3] = [
    (
        "obstacle_band",
        ["obstacle_band_alpha1_0.5", "obstacle_band_alpha1_0"],
    ),
    ("bump_band_vehicles", ["bump_band_compact", "bump_band_6x6"]),
    (
        "bump_band_alpha2",
        ["bump_band_compact", "bump_band_compact_alpha2_0"],
    ),
];

/// Runs everything and writes it under `out`.
pub fn run_repro(cfg: &ReproConfig, out: &Path) -> Result<ReproSummary> {
    let mut files = Vec::new();
    let mut put = |rel: &str, bytes: &[u8]| -> Result<()> {
        write_file(&out.join(rel), bytes)?;
        files.push(PathBuf::from(rel));
        Ok(())
    };

    let bench = build_benchmark(&cfg.benchmark)?;
    let count = |l| bench.split.train.iter().filter(|s| s.label == l).count();
    let (n_positives, n_unlabeled) = (
        count(crate::datagen::LabelKind::Positive),
        count(crate::datagen::LabelKind::Unlabeled),
    );
    let eval = balanced_eval(&bench.split.eval, cfg.seed);
    let runs = train_suite(&bench.split, &cfg.suite)?;
    let (report, variances) = evaluate_suite("synthetic", &runs, &eval, cfg.suite.threshold)?;

    put("report.csv", report.to_csv().as_bytes())?;
    for r in &runs {
        let mut ck = Vec::new();
        write_checkpoint(&r.model, &mut ck)?;
        put(&format!("checkpoints/{}.ckpt", r.name), &ck)?;
        put(&format!("logs/{}.csv", r.name), r.log.to_csv().as_bytes())?;
        if !r.log.pu_terms.is_empty() {
            put(
                &format!("logs/{}_pu_terms.csv", r.name),
                pu_terms_csv(r).as_bytes(),
            )?;
        }
    }

    let ours = runs
        .iter()
        .find(|r| r.name == "ours")
        .expect("suite always trains ours");
    let points = score_points(&ours.model, &bench.samples, cfg.suite.threshold)?;
    let (origin, w, h) = map_extent(&points, cfg.map_resolution);
    let (map, _) = build_map(&points, origin, cfg.map_resolution, w, h)?;
    let mut bytes = Vec::new();
    write_map(&map, &mut bytes)?;
    put("maps/benchmark.gm", &bytes)?;
    put(
        "renders/benchmark_class.ppm",
        &render_map(&map, Style::Class, cfg.render_scale)?.to_ppm(),
    )?;
    put(
        "renders/benchmark_value.ppm",
        &render_map(&map, Style::Value, cfg.render_scale)?.to_ppm(),
    )?;
    let lanes: Vec<Vec<[f64; 2]>> = bench.lanes.iter().map(|l| l.path.clone()).collect();
    put(
        "renders/benchmark_lanes.ppm",
        &render_trajectories(&map, &lanes, cfg.render_scale)?.to_ppm(),
    )?;

    let mut text = report.to_table();
    let _ = writeln!(
        text,
        "\ntraining set: {n_positives} positives, {n_unlabeled} unlabeled"
    );
    let _ = writeln!(text, "\nembedding variance on the eval set");
    for (name, v) in &variances {
        let _ = writeln!(text, "  {name:<20} {v:.6e}");
    }
    let _ = writeln!(
        text,
        "\nunlabeled-risk term per batch (min, negative batches / total)"
    );
    for r in runs.iter().filter(|r| !r.log.pu_terms.is_empty()) {
        let min = r
            .log
            .pu_terms
            .iter()
            .map(|t| t.reported)
            .fold(f64::INFINITY, f64::min);
        let neg = r.log.pu_terms.iter().filter(|t| t.reported < 0.0).count();
        let _ = writeln!(
            text,
            "  {:<20} {min:.6e}  {neg}/{}",
            r.name,
            r.log.pu_terms.len()
        );
    }

    let mut scenarios = Vec::new();
    if cfg.run_scenarios {
        let mut done: Vec<(String, ScenarioRun)> = Vec::new();
        for (name, s) in scenario_list(cfg.seed) {
            let run = s.run()?;
            put(
                &format!("trajectories/{name}.csv"),
                write_trajectory_csv(&run.nav).as_bytes(),
            )?;
            scenarios.push(ScenarioOutcome::of(&name, &s, &run)?);
            done.push((name, run));
        }
        for (group, members) in RENDER_GROUPS {
            let picked: Vec<&(String, ScenarioRun)> = members
                .iter()
                .filter_map(|m| done.iter().find(|d| d.0 == *m))
                .collect();
            let map = &picked[0].1.map;
            let paths: Vec<(String, Vec<[f64; 2]>)> = picked
                .iter()
                .map(|d| (d.0.clone(), d.1.nav.path_xy()))
                .collect();
            let plain: Vec<Vec<[f64; 2]>> = paths.iter().map(|p| p.1.clone()).collect();
            put(
                &format!("renders/{group}.ppm"),
                &render_trajectories(map, &plain, cfg.render_scale)?.to_ppm(),
            )?;
            put(
                &format!("renders/{group}.svg"),
                trajectories_svg(map, &paths, 20.0).as_bytes(),
            )?;
        }
        let _ = writeln!(
            text,
            "\nscenarios (outcome, steps, blocked steps, lateral deviation m, true impact)"
        );
        for s in &scenarios {
            let _ = writeln!(
                text,
                "  {:<28} {:?} {} {} {:.3} {}",
                s.name,
                s.outcome,
                s.steps,
                s.blocked_steps,
                s.lateral_deviation,
                s.true_impact.map_or("-".into(), |v| format!("{v:.1}"))
            );
        }
    }
    put("report.txt", text.as_bytes())?;

    files.sort();
    Ok(ReproSummary {
        report,
        variances,
        runs,
        n_positives,
        n_unlabeled,
        scenarios,
        files,
    })
}
