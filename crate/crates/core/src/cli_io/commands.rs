use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::datagen::{
    build_pu_dataset_reserving, ingest_semantic_cloud, obstacle_negatives, project_contacts,
    read_dataset, read_semantic_cloud, split_dataset, write_dataset, DatasetHeader, DatasetSplit,
    TraversalSample, ValueMode,
};
use crate::encoder_net::{read_checkpoint, write_checkpoint, ModelState};
use crate::error::{Error, Result};
use crate::evalmetrics::build_report;
use crate::gridmap::{build_map, read_map, write_map};
use crate::learners::{train, EvalThreshold, Method};
use crate::smppi::{
    navigate, read_scenario_config, read_trajectory_csv, write_trajectory_csv, Scenario,
};
use crate::terrain_sim::{
    accumulated_impact, generate_world, read_scans, read_trace, read_world, simulate_traversal,
    write_scans, write_trace, write_world, LidarConfig, TerrainRecipe, VehicleSpec,
};

use super::pipeline::{balanced_eval, merge_traces, scan_along};
use super::render::{render_map, render_trajectories, trajectories_svg, Style};
use super::repro::{map_extent, run_repro, score_points, ReproConfig};
use super::settings::{recipe_from_config, train_from_config};
use super::{create, open, read_text, write_file, Command};
use super::{
    DatasetArgs, EvalArgs, MapArgs, NavigateArgs, RenderArgs, ReproArgs, SimulateArgs, TrainArgs,
    WorldArgs,
};

pub(super) fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::World(a) => world(a),
        Command::Simulate(a) => simulate(a),
        Command::Dataset(a) => dataset(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Map(a) => map(a),
        Command::Navigate(a) => navigate_cmd(a),
        Command::Render(a) => render(a),
        Command::Repro(a) => repro(a),
    }
}

fn flush(mut w: impl Write) -> Result<()> {
    w.flush()?;
    Ok(())
}

fn world(a: WorldArgs) -> Result<()> {
    let recipe = match &a.spec {
        Some(p) => recipe_from_config(&read_text(p)?)?,
        None => TerrainRecipe::flat(128, 128, 0.25),
    };
    let w = generate_world(a.seed, &recipe)?;
    let mut out = create(&a.out)?;
    write_world(&w, &mut out)?;
    flush(out)
}

fn read_polyline(path: &Path) -> Result<Vec<[f64; 2]>> {
    const W: &str = "path file";
    let text = read_text(path)?;
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.split('#').next().unwrap_or("").trim();
        if t.is_empty() {
            continue;
        }
        let v: Vec<f64> = t
            .split_whitespace()
            .map(|f| {
                f.parse()
                    .map_err(|_| Error::parse(W, i + 1, format!("bad number `{f}`")))
            })
            .collect::<Result<_>>()?;
        if v.len() != 2 {
            return Err(Error::parse(W, i + 1, "expected `x y`"));
        }
        pts.push([v[0], v[1]]);
    }
    Ok(pts)
}

fn vehicle(name: &str) -> Result<VehicleSpec> {
    VehicleSpec::preset(name)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown vehicle `{name}`")))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let world = read_world(&mut open(&a.world)?)?;
    let v = vehicle(&a.vehicle)?;
    let path = read_polyline(&a.path)?;
    let trace = simulate_traversal(&world, &v, &path, a.dt)?;
    let mut out = create(&a.out)?;
    write_trace(&trace, &mut out)?;
    flush(out)?;
    println!(
        "{} steps, accumulated impact {:.1}",
        trace.len(),
        accumulated_impact(&trace, &v)
    );
    if let Some(sp) = &a.scans {
        let lidar = LidarConfig::channels_128(a.azimuth_steps, a.max_range);
        let scans = scan_along(&world, &trace, a.scan_spacing, a.sensor_height, &lidar)?;
        let mut out = create(sp)?;
        write_scans(&scans, &mut out)?;
        flush(out)?;
        println!("{} scans", scans.len());
    }
    Ok(())
}

fn write_ds(path: &Path, header: &DatasetHeader, samples: &[TraversalSample]) -> Result<()> {
    let mut out = create(path)?;
    write_dataset(header, samples, &mut out)?;
    flush(out)
}

fn dataset(a: DatasetArgs) -> Result<()> {
    if let Some(sem) = &a.semantic {
        let cloud = read_semantic_cloud(&mut open(sem)?)?;
        let samples = ingest_semantic_cloud(&cloud, &a.positive_classes, &a.negative_classes, a.k)?;
        let header = DatasetHeader {
            k: a.k,
            value_mode: ValueMode::None,
            normalization: (0.0, 0.0),
            seeds: BTreeMap::from([("split".to_string(), a.seed)]),
        };
        println!("{} samples", samples.len());
        return write_ds(&a.out, &header, &samples);
    }
    let scans_path = a
        .scans
        .as_ref()
        .filter(|_| !a.trace.is_empty())
        .ok_or_else(|| {
            Error::InvalidConfig("dataset needs --trace and --scans, or --semantic".into())
        })?;
    let mode = match a.value_mode.as_str() {
        "wheel_force" => ValueMode::WheelForce,
        "z_accel" => ValueMode::ZAccel,
        other => {
            return Err(Error::InvalidConfig(format!(
                "bad value `{other}` for `value_mode`"
            )))
        }
    };
    let traces = a
        .trace
        .iter()
        .map(|p| read_trace(&mut open(p)?))
        .collect::<Result<Vec<_>>>()?;
    let scans = read_scans(&mut open(scans_path)?)?;
    let merged = merge_traces(&traces.iter().collect::<Vec<_>>());
    let projected = project_contacts(&merged, &scans, a.radius, mode)?;
    if projected.samples.is_empty() {
        eprintln!(
            "warning: no scan point lies within {} m of any contact",
            a.radius
        );
    }
    let negatives = match (&a.world, a.negatives) {
        (_, 0) => Vec::new(),
        (Some(w), n) => obstacle_negatives(
            &read_world(&mut open(w)?)?,
            &scans,
            a.negative_min_height,
            n,
            a.seed,
        ),
        (None, _) => return Err(Error::InvalidConfig("--negatives needs --world".into())),
    };
    let samples = build_pu_dataset_reserving(
        &scans,
        &projected.samples,
        &negatives,
        a.k,
        a.unlabeled_per_scan,
        a.seed,
    )?;
    let header = DatasetHeader {
        k: a.k,
        value_mode: mode,
        normalization: projected.normalization,
        seeds: BTreeMap::from([
            ("split".to_string(), a.seed),
            ("unlabeled".to_string(), a.seed),
        ]),
    };
    println!(
        "{} samples ({} positives)",
        samples.len(),
        projected.samples.len()
    );
    write_ds(&a.out, &header, &samples)
}

fn load_split(path: &Path) -> Result<(DatasetHeader, Vec<TraversalSample>, DatasetSplit)> {
    let (header, samples) = read_dataset(&mut open(path)?)?;
    let seed = header.seeds.get("split").copied().unwrap_or(0);
    let split = split_dataset(&samples, seed)?;
    Ok((header, samples, split))
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let method = Method::from_name(&a.method).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "unknown method `{}` (svdd, soft_svdd, nnpu, ours)",
            a.method
        ))
    })?;
    let (mut cfg, with_regression) = match &a.config {
        Some(p) => train_from_config(&read_text(p)?)?,
        None => train_from_config("")?,
    };
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
    let (header, _, split) = load_split(&a.dataset)?;
    cfg.encoder.k = header.k;
    let with_regression = with_regression && header.value_mode != ValueMode::None;
    let (model, log) = train(&split, method, with_regression, &cfg)?;
    let mut out = create(&a.out)?;
    write_checkpoint(&model, &mut out)?;
    flush(out)?;
    if let Some(l) = &a.log {
        write_file(l, log.to_csv().as_bytes())?;
    }
    if let Some(e) = log.epochs.last() {
        println!(
            "{}: {} epochs, final loss {:.6}",
            method.name(),
            log.epochs.len(),
            e.total
        );
    }
    Ok(())
}

fn load_checkpoint(p: &Path) -> Result<ModelState> {
    read_checkpoint(&mut open(p)?)
}

fn eval(a: EvalArgs) -> Result<()> {
    let threshold = EvalThreshold::new(a.threshold)?;
    let (_, _, split) = load_split(&a.dataset)?;
    let eval = if a.balanced {
        balanced_eval(&split.eval, split.split_seed)
    } else {
        split.eval
    };
    let models = a
        .checkpoint
        .iter()
        .map(|p| load_checkpoint(p))
        .collect::<Result<Vec<_>>>()?;
    let mut named: Vec<(String, &ModelState)> = Vec::new();
    for m in &models {
        let base = m.method.name();
        let n = named
            .iter()
            .filter(|(k, _)| k == base || k.starts_with(&format!("{base}#")))
            .count();
        let name = if n == 0 {
            base.to_string()
        } else {
            format!("{base}#{}", n + 1)
        };
        named.push((name, m));
    }
    let name = a
        .dataset
        .file_stem()
        .map_or("dataset".into(), |s| s.to_string_lossy().into_owned());
    let report = build_report(&name, &named, &eval, threshold)?;
    match &a.out {
        Some(p) => {
            write_file(p, report.to_csv().as_bytes())?;
            print!("{}", report.to_table());
        }
        None => print!("{}", report.to_csv()),
    }
    Ok(())
}

fn map(a: MapArgs) -> Result<()> {
    let threshold = EvalThreshold::new(a.threshold)?;
    let (_, samples) = read_dataset(&mut open(&a.dataset)?)?;
    let model = load_checkpoint(&a.checkpoint)?;
    let points = score_points(&model, &samples, threshold)?;
    let (origin, w, h) = map_extent(&points, a.resolution);
    let (m, dropped) = build_map(&points, origin, a.resolution, w, h)?;
    let mut out = create(&a.out)?;
    write_map(&m, &mut out)?;
    flush(out)?;
    println!(
        "{w}x{h} cells, {} known, {dropped} points dropped",
        m.known_count()
    );
    Ok(())
}

fn navigate_cmd(a: NavigateArgs) -> Result<()> {
    let mut s = match &a.scenario {
        Some(p) => read_scenario_config(&read_text(p)?)?,
        None => Scenario::obstacle_band(0.5),
    };
    s.mppi.seed = a.seed.unwrap_or(s.mppi.seed);
    let nav = match &a.map {
        Some(p) => {
            let m = read_map(&mut open(p)?)?;
            navigate(
                &m,
                s.start,
                s.goal,
                &s.vehicle,
                &s.params,
                &s.mppi,
                s.max_steps,
                s.goal_radius,
            )?
        }
        None => s.run()?.nav,
    };
    write_file(&a.out, write_trajectory_csv(&nav).as_bytes())?;
    println!(
        "{:?} after {} steps, {} steps with a wheel on non-traversable cells",
        nav.outcome,
        nav.logs.len(),
        nav.blocked_contacts()
    );
    Ok(())
}

fn render(a: RenderArgs) -> Result<()> {
    let style = Style::from_name(&a.style)?;
    let m = read_map(&mut open(&a.map)?)?;
    if !a.trajectory.is_empty() && style != Style::Trajectory {
        return Err(Error::InvalidConfig(
            "--trajectory needs --style trajectory".into(),
        ));
    }
    let mut paths = Vec::new();
    for p in &a.trajectory {
        let rows = read_trajectory_csv(&read_text(p)?)?;
        let name = p
            .file_stem()
            .map_or("path".into(), |s| s.to_string_lossy().into_owned());
        paths.push((
            name,
            rows.iter()
                .map(|r| [r.state.x, r.state.y])
                .collect::<Vec<_>>(),
        ));
    }
    let img = match style {
        Style::Trajectory => render_trajectories(
            &m,
            &paths.iter().map(|p| p.1.clone()).collect::<Vec<_>>(),
            a.scale,
        )?,
        _ => render_map(&m, style, a.scale)?,
    };
    write_file(&a.out, &img.to_ppm())?;
    if let Some(svg) = &a.svg {
        write_file(svg, trajectories_svg(&m, &paths, 20.0).as_bytes())?;
    }
    Ok(())
}

fn repro(a: ReproArgs) -> Result<()> {
    let cfg = if a.quick {
        ReproConfig::quick(a.seed)
    } else {
        ReproConfig::full(a.seed)
    };
    let summary = run_repro(&cfg, &a.out)?;
    print!("{}", summary.report.to_table());
    for s in &summary.scenarios {
        println!(
            "{:<28} {:?} blocked={} deviation={:.3} impact={}",
            s.name,
            s.outcome,
            s.blocked_steps,
            s.lateral_deviation,
            s.true_impact.map_or("-".into(), |v| format!("{v:.1}"))
        );
    }
    println!(
        "{} files written to {}",
        summary.files.len(),
        a.out.display()
    );
    Ok(())
}
