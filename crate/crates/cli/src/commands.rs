use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gradcell::assembly::{
    achieved_field, assign_cells, connectivity_report, export_structure, synthesize,
    write_assignments, write_overlap_report, AssignmentConfig, ExportFormat,
};
use gradcell::dataset::{
    convex_hull, generate_dataset, read_dataset, split, write_dataset, DatasetConfig,
    DatasetRecord, PropertyHull, PropertyScaling,
};
use gradcell::error::{
    AssemblyError, DatasetError, GeometryError, HomogenizationError, ModelError, TopOptError,
};
use gradcell::generative::{
    evaluate, noise_robustness_report, summarize, write_errors, write_losses, write_noise_report,
    ErrorRow, GenerativeModel, TrainingConfig,
};
use gradcell::geometry::{voxelize, ShapeParams, VoxelGrid};
use gradcell::homogenization::Homogenizer;
use gradcell::io::{fmt_f64, read_csv, read_json, write_csv_rows, write_json};
use gradcell::topopt::{
    compliance, deformation_objective, optimize, read_field_csv, solve_macro, write_field_csv,
    write_history, DesignField, FeasibleRegion, MacroModel, Objective, ProblemSpec,
};
use rayon::prelude::*;
use serde_json::json;

use crate::{
    Command, EvalArgs, GenDatasetArgs, HomogenizeArgs, MeshFormat, OptimizeArgs, ReportArgs,
    SynthesizeArgs, TrainArgs,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] gradcell::Error),
}

impl CliError {
    /// 1 for bad input, 2 for failures during a run.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_validation() => 1,
            CliError::Core(_) => 2,
        }
    }
}

macro_rules! from_core {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        }
    )*};
}
from_core!(
    GeometryError,
    HomogenizationError,
    DatasetError,
    ModelError,
    TopOptError,
    AssemblyError
);

type Result<T> = std::result::Result<T, CliError>;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::GenDataset(a) => gen_dataset(a),
        Command::Homogenize(a) => homogenize(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Optimize(a) => optimize_cmd(a),
        Command::Synthesize(a) => synthesize_cmd(a),
        Command::Report(a) => report(a),
    }
}

fn require_dir(path: &Path) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "output directory {} does not exist",
            path.display()
        )))
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "input file {} does not exist",
            path.display()
        )))
    }
}

fn gen_dataset(a: GenDatasetArgs) -> Result<()> {
    require_dir(&a.out)?;
    let config = DatasetConfig {
        n_target: a.n,
        seed: a.seed,
        resolution: a.resolution,
        oversample: a.oversample,
    };
    let start = Instant::now();
    let (records, summary) = generate_dataset(&config, &Homogenizer::default())?;
    let points: Vec<[f64; 2]> = records.iter().map(DatasetRecord::property).collect();
    let hull = convex_hull(&points)?;
    let scaling = PropertyScaling::fit(&records)?;
    log::info!(
        "dataset generated in {:.1} s",
        start.elapsed().as_secs_f64()
    );

    write_dataset(&a.out.join("dataset.csv"), &records)?;
    write_json(&a.out.join("hull.json"), &hull)?;
    write_json(&a.out.join("scaling.json"), &scaling)?;
    write_json(
        &a.out.join("dataset_summary.json"),
        &json!({
            "config": config,
            "summary": summary,
            "hull_vertices": hull.vertices(),
            "contains_reference_point": hull.contains(55.0, 0.28, 1e-9),
        }),
    )?;
    println!(
        "{} records ({} valid of {} candidates, {} solver failures) written to {}",
        summary.records,
        summary.valid,
        summary.candidates,
        summary.failed,
        a.out.display()
    );
    Ok(())
}

const SHAPE_HEADER: [&str; 6] = ["alpha1", "alpha2", "alpha3", "t1", "t2", "t3"];

fn homogenize(a: HomogenizeArgs) -> Result<()> {
    let h = Homogenizer::default();
    if a.solid {
        let grid = VoxelGrid::filled(a.resolution, true);
        let p = h.homogenize_grid(&grid)?;
        println!("E_H = {} GPa, nu_H = {}, vf = 1", p.e_h, p.nu_h);
        return Ok(());
    }
    if let Some(csv) = &a.csv {
        require_file(csv)?;
        if let Some(out) = &a.out {
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                require_dir(parent)?;
            }
        }
        let (header, rows) = read_csv(csv)?;
        if header.len() < 6 || header[..6] != SHAPE_HEADER {
            return Err(DatasetError::Malformed(format!(
                "expected columns {SHAPE_HEADER:?}, got {header:?}"
            ))
            .into());
        }
        let params = rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let v: Vec<f64> = r[..6]
                    .iter()
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| DatasetError::Malformed(format!("row {}: not a number", i + 1)))?;
                Ok(ShapeParams::from_array(v.try_into().unwrap())?)
            })
            .collect::<Result<Vec<_>>>()?;
        let out_rows: Vec<Vec<String>> = params
            .par_iter()
            .map(|p| {
                let mut row: Vec<String> = p.to_array().iter().map(|&v| fmt_f64(v)).collect();
                let vf = voxelize(p, a.resolution)
                    .map(|g| g.volume_fraction())
                    .map_err(gradcell::Error::from);
                match (h.homogenize(p, a.resolution), vf) {
                    (Ok(r), Ok(vf)) => {
                        row.extend([fmt_f64(r.e_h), fmt_f64(r.nu_h), fmt_f64(vf), "ok".into()])
                    }
                    (Err(e), _) | (_, Err(e)) => {
                        row.extend([String::new(), String::new(), String::new()]);
                        row.push(format!("\"failed: {}\"", e.to_string().replace('"', "'")));
                    }
                }
                row
            })
            .collect();
        let mut header: Vec<&str> = SHAPE_HEADER.to_vec();
        header.extend(["E", "nu", "vf", "status"]);
        match &a.out {
            Some(out) => write_csv_rows(out, &header, &out_rows)?,
            None => {
                println!("{}", header.join(","));
                for r in out_rows {
                    println!("{}", r.join(","));
                }
            }
        }
        return Ok(());
    }
    let alpha = a.alpha.expect("clap requires --alpha here");
    let t: [f64; 3] =
        a.t.try_into()
            .map_err(|_| CliError::Usage("--t takes three values".into()))?;
    let alpha: [f64; 3] = alpha
        .try_into()
        .map_err(|_| CliError::Usage("--alpha takes three values".into()))?;
    let params = ShapeParams::new(alpha, t)?;
    let vf = voxelize(&params, a.resolution)?.volume_fraction();
    let p = h.homogenize(&params, a.resolution)?;
    println!("E_H = {} GPa, nu_H = {}, vf = {}", p.e_h, p.nu_h, vf);
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    require_file(&a.dataset)?;
    require_dir(&a.out)?;
    let mut config: TrainingConfig = match &a.config {
        Some(p) => {
            require_file(p)?;
            read_json(p)?
        }
        None => TrainingConfig::default(),
    };
    if let Some(v) = a.iterations {
        config.iterations = v;
    }
    if let Some(v) = a.batch {
        config.batch = v;
    }
    if let Some(v) = a.lr {
        config.lr = v;
    }
    if let Some(v) = a.gamma {
        config.gamma = v;
    }
    if let Some(v) = a.seed {
        config.seed = v;
    }
    if a.no_regressor {
        config.use_regressor = false;
    }
    if !(a.train_fraction > 0.0 && a.train_fraction <= 1.0) {
        return Err(CliError::Usage(format!(
            "--train-fraction {} must be in (0, 1]",
            a.train_fraction
        )));
    }
    config.validate()?;
    let records = read_dataset(&a.dataset)?;
    let (train_set, test_set) = split(&records, a.train_fraction, a.split_seed)?;
    let start = Instant::now();
    let (model, history) = GenerativeModel::train(&train_set, &config)?;
    log::info!(
        "trained {} iterations in {:.1} s",
        config.iterations,
        start.elapsed().as_secs_f64()
    );

    model.save(&a.out.join("weights.json"))?;
    write_losses(&a.out.join("losses.csv"), &history)?;
    write_dataset(&a.out.join("train.csv"), &train_set)?;
    write_dataset(&a.out.join("test.csv"), &test_set)?;
    println!(
        "trained on {} records ({} held out) for {} iterations; weights in {}",
        train_set.len(),
        test_set.len(),
        config.iterations,
        a.out.display()
    );
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    require_file(&a.weights)?;
    require_file(&a.test)?;
    if let Some(p) = &a.no_regressor {
        require_file(p)?;
    }
    require_dir(&a.out)?;
    let model = GenerativeModel::load(&a.weights)?;
    let test = read_dataset(&a.test)?;
    if test.is_empty() {
        return Err(DatasetError::Empty(format!("{} has no records", a.test.display())).into());
    }
    let h = Homogenizer::default();
    let rows = evaluate(&model, &test, &h, a.resolution, a.seed);
    let summary = summarize(&rows);
    write_errors(&a.out.join("errors.csv"), &rows)?;
    print_error_line("with regressor", &rows);

    let mut doc = json!({
        "resolution": a.resolution,
        "seed": a.seed,
        "summary": summary,
    });
    if let Some(train_path) = &a.no_regressor {
        let train_set = read_dataset(train_path)?;
        let config = TrainingConfig {
            use_regressor: false,
            ..model.config
        };
        let (ablated, _) = GenerativeModel::train(&train_set, &config)?;
        let rows_ab = evaluate(&ablated, &test, &h, a.resolution, a.seed);
        let s_ab = summarize(&rows_ab);
        write_errors(&a.out.join("errors_no_regressor.csv"), &rows_ab)?;
        print_error_line("without regressor", &rows_ab);
        doc["no_regressor"] = json!({
            "summary": s_ab,
            "mean_abs_e_increase": s_ab.mean_abs_e - summary.mean_abs_e,
            "mean_abs_nu_increase": s_ab.mean_abs_nu - summary.mean_abs_nu,
        });
    }
    if a.noise_report {
        let k = a.conditions.min(test.len()).max(1);
        let conditions: Vec<[f64; 2]> = (0..k)
            .map(|i| test[i * test.len() / k].property())
            .collect();
        let noise = noise_robustness_report(&model, &conditions, a.draws, &h, a.resolution, a.seed);
        write_noise_report(&a.out.join("noise_report.csv"), &noise)?;
        println!(
            "noise report: {} conditions × {} draws",
            conditions.len(),
            a.draws
        );
    }
    write_json(&a.out.join("eval_summary.json"), &doc)?;
    Ok(())
}

fn print_error_line(label: &str, rows: &[ErrorRow]) {
    let s = summarize(rows);
    println!(
        "{label}: n = {}, failures = {}, median |eps_E| = {:.2}%, median |eps_nu| = {:.2}%, within 5%: E {:.0}%, nu {:.0}%",
        s.count,
        s.failures,
        100.0 * s.median_abs_e,
        100.0 * s.median_abs_nu,
        100.0 * s.frac_e_within_5pct,
        100.0 * s.frac_nu_within_5pct
    );
}

fn load_problem(path: &Path) -> Result<ProblemSpec> {
    require_file(path)?;
    Ok(read_json(path)?)
}

fn load_hull(path: &Path) -> Result<PropertyHull> {
    require_file(path)?;
    Ok(read_json(path)?)
}

fn objective_value(model: &MacroModel, objective: &Objective, field: &DesignField) -> Result<f64> {
    let u = solve_macro(model, field)?;
    Ok(match objective {
        Objective::Compliance => compliance(model, field, &u)?,
        Objective::TargetDeformation { targets } => deformation_objective(&u, targets)?,
    })
}

fn optimize_cmd(a: OptimizeArgs) -> Result<()> {
    let spec = load_problem(&a.problem)?;
    let hull = load_hull(&a.hull)?;
    require_dir(&a.out)?;
    let (model, objective) = spec.build()?;
    let region = FeasibleRegion::new(&hull, spec.bounds)?;
    let mut config = spec.optimizer;
    if let Some(n) = a.max_iterations {
        config.max_iterations = n;
    }
    let start = Instant::now();
    let out = optimize(&model, &objective, &region, &config)?;
    log::info!("optimized in {:.2} s", start.elapsed().as_secs_f64());

    let f = &out.field;
    write_field_csv(&a.out.join("field_E.csv"), &f.e, f.nx, f.ny)?;
    write_field_csv(&a.out.join("field_nu.csv"), &f.nu, f.nx, f.ny)?;
    write_history(&a.out.join("history.csv"), &out.history)?;
    let first = out.history.first().map_or(f64::NAN, |h| h.objective);
    let last = out.history.last().map_or(f64::NAN, |h| h.objective);
    let last_constraint = out.history.last().map_or(f64::NAN, |h| h.constraint);
    write_json(
        &a.out.join("optimize_summary.json"),
        &json!({
            "nx": f.nx,
            "ny": f.ny,
            "optimizer": config,
            "termination": out.termination,
            "iterations": out.history.len().saturating_sub(1),
            "initial_objective": first,
            "final_objective": last,
            "ratio": last / first,
            "sum_e": f.sum_e(),
            "constraint": last_constraint,
        }),
    )?;
    println!(
        "objective {first:.6e} -> {last:.6e} (ratio {:.4}) after {} iterations, {:?}",
        last / first,
        out.history.len().saturating_sub(1),
        out.termination
    );
    Ok(())
}

fn read_fields(dir: &Path) -> Result<DesignField> {
    let (pe, pn) = (dir.join("field_E.csv"), dir.join("field_nu.csv"));
    require_file(&pe)?;
    require_file(&pn)?;
    let (e, nx, ny) = read_field_csv(&pe)?;
    let (nu, nx2, ny2) = read_field_csv(&pn)?;
    if (nx, ny) != (nx2, ny2) {
        return Err(CliError::Usage(format!(
            "field_E is {nx}×{ny} but field_nu is {nx2}×{ny2}"
        )));
    }
    Ok(DesignField { nx, ny, e, nu })
}

fn synthesize_cmd(a: SynthesizeArgs) -> Result<()> {
    let field = read_fields(&a.fields)?;
    require_file(&a.weights)?;
    let hull = a.hull.as_deref().map(load_hull).transpose()?;
    let problem = a.problem.as_deref().map(load_problem).transpose()?;
    require_dir(&a.out)?;
    if a.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let model = GenerativeModel::load(&a.weights)?;
    let config = AssignmentConfig {
        candidates: a.n,
        seed: a.seed,
        resolution: a.resolution,
        ..Default::default()
    };
    let start = Instant::now();
    let assignments = assign_cells(&field, &model, hull.as_ref(), &config)?;
    let structure = synthesize(&assignments, field.nx, field.ny)?;
    let report = connectivity_report(&structure, a.resolution);
    log::info!(
        "assigned and checked in {:.1} s",
        start.elapsed().as_secs_f64()
    );

    let recheck = match (a.recheck, problem) {
        (true, Some(spec)) => {
            let (macro_model, objective) = spec.build()?;
            let res = a.recheck_resolution.unwrap_or(a.resolution);
            let achieved = achieved_field(&structure, &Homogenizer::default(), res)?;
            let planned = objective_value(&macro_model, &objective, &field)?;
            let delivered = objective_value(&macro_model, &objective, &achieved)?;
            Some((achieved, planned, delivered))
        }
        _ => None,
    };

    write_assignments(&a.out.join("assignments.csv"), &assignments)?;
    write_overlap_report(&a.out.join("overlap_report.csv"), &report)?;
    let (format, name) = match a.format {
        MeshFormat::Stl => (ExportFormat::Stl, "structure.stl"),
        MeshFormat::Vtk => (ExportFormat::Vtk, "structure.vtk"),
    };
    let export = export_structure(&structure, format, a.mesh_resolution, &a.out.join(name))?;
    let volume_error = export
        .mesh_volume
        .map(|m| (m - export.voxel_volume) / export.voxel_volume);

    let mut doc = json!({
        "candidates": a.n,
        "seed": a.seed,
        "resolution": a.resolution,
        "mesh_resolution": a.mesh_resolution,
        "density": structure.density(),
        "overlap_unblended": report.unblended,
        "overlap_blended": report.blended,
        "export": export,
        "mesh_volume_error": volume_error,
    });

    if let Some((achieved, planned, delivered)) = recheck {
        let rows: Vec<Vec<String>> = (0..field.len())
            .map(|i| {
                vec![
                    i.to_string(),
                    fmt_f64(field.e[i]),
                    fmt_f64(field.nu[i]),
                    fmt_f64(achieved.e[i]),
                    fmt_f64(achieved.nu[i]),
                    fmt_f64((achieved.e[i] - field.e[i]) / field.e[i]),
                    fmt_f64((achieved.nu[i] - field.nu[i]) / field.nu[i]),
                ]
            })
            .collect();
        write_csv_rows(
            &a.out.join("drift.csv"),
            &[
                "element",
                "E_field",
                "nu_field",
                "E_achieved",
                "nu_achieved",
                "rel_E",
                "rel_nu",
            ],
            &rows,
        )?;
        doc["recheck"] = json!({
            "objective_field": planned,
            "objective_achieved": delivered,
            "relative_change": (delivered - planned) / planned,
        });
        println!("recheck: objective {planned:.6e} planned, {delivered:.6e} achieved");
    }
    write_json(&a.out.join("synthesis_summary.json"), &doc)?;
    println!(
        "{} cells, density {:.4}, mean overlap {:.2}% unblended / {:.2}% blended, {} triangles",
        assignments.len(),
        structure.density(),
        report.unblended.mean,
        report.blended.mean,
        export.triangles
    );
    Ok(())
}

fn csv_digest(path: &Path) -> Result<String> {
    let (header, rows) = read_csv(path)?;
    let mut line = format!("{} rows", rows.len());
    if let Some(last) = rows.last() {
        let cells: Vec<String> = header
            .iter()
            .zip(last)
            .map(|(h, v)| format!("{h}={v}"))
            .collect();
        line.push_str(&format!("; last: {}", cells.join(" ")));
    }
    Ok(line)
}

fn report(a: ReportArgs) -> Result<()> {
    if !a.dir.is_dir() {
        return Err(CliError::Usage(format!(
            "{} is not a directory",
            a.dir.display()
        )));
    }
    let mut names: Vec<PathBuf> = fs::read_dir(&a.dir)
        .map_err(|source| gradcell::Error::Io {
            path: a.dir.clone(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    names.sort();
    let mut found = 0;
    for path in &names {
        let name = path.file_name().unwrap_or_default().to_string_lossy();
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") if name.starts_with("field_") => {
                let (v, nx, ny) = read_field_csv(path)?;
                let (lo, hi) = v
                    .iter()
                    .fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
                println!("{name}: {nx}×{ny} field, range [{lo:.4}, {hi:.4}]");
            }
            Some("csv") => println!("{name}: {}", csv_digest(path)?),
            Some("json") if name == "hull.json" => {
                let hull: PropertyHull = read_json(path)?;
                let v: Vec<String> = hull
                    .vertices()
                    .iter()
                    .map(|p| format!("({:.2}, {:.4})", p[0], p[1]))
                    .collect();
                println!("{name}: {} vertices {}", v.len(), v.join(" "));
            }
            Some("json") if name == "weights.json" => {
                let m = GenerativeModel::load(path)?;
                println!(
                    "{name}: generator {:?}, regressor used: {}",
                    m.generator.sizes(),
                    m.config.use_regressor
                );
            }
            Some("json") => {
                let v: serde_json::Value = read_json(path)?;
                let text = serde_json::to_string_pretty(&v).unwrap_or_default();
                println!("{name}:\n{text}");
            }
            Some("stl") | Some("vtk") => {
                let bytes = fs::metadata(path).map(|m| m.len()).unwrap_or(0);
                println!("{name}: {bytes} bytes");
            }
            _ => continue,
        }
        found += 1;
    }
    if found == 0 {
        return Err(CliError::Usage(format!(
            "no pipeline outputs in {}",
            a.dir.display()
        )));
    }
    Ok(())
}
