use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gradcell::topopt::{cantilever, sine_target, ProblemSpec, SineKind};

fn gradcell(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gradcell"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("examples")
        .join(name)
}

#[test]
fn bundled_problems_match_builtin_cases() {
    let read = |n: &str| -> ProblemSpec {
        serde_json::from_str(&fs::read_to_string(example(n)).unwrap()).unwrap()
    };
    assert_eq!(read("cantilever.json"), cantilever(30, 10, 100.0));
    assert_eq!(
        read("halfsine.json"),
        sine_target(30, 10, 10.0, SineKind::Half, 0.5)
    );
    assert_eq!(
        read("fullsine.json"),
        sine_target(30, 10, 10.0, SineKind::Full, 0.5)
    );
    for n in ["halfsine.json", "fullsine.json"] {
        let spec = read(n);
        let gradcell::topopt::ObjectiveSpec::TargetDeformation { targets } = &spec.objective else {
            panic!("{n} is not a deformation problem")
        };
        assert_eq!(targets.len(), 31);
        assert!(spec.build().is_ok());
    }
}

#[test]
fn help_exits_zero_on_every_subcommand() {
    for sub in [
        "gen-dataset",
        "homogenize",
        "train",
        "eval",
        "optimize",
        "synthesize",
        "report",
    ] {
        let o = gradcell(&[sub, "--help"]);
        assert_eq!(code(&o), 0, "{sub}");
        assert!(String::from_utf8_lossy(&o.stdout).contains("Usage"));
    }
    assert_eq!(code(&gradcell(&["--version"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&gradcell(&["optimize", "--bogus"])), 1);
    assert_eq!(code(&gradcell(&[])), 1);
}

#[test]
fn missing_output_dir_fails_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("absent");
    let o = gradcell(&[
        "gen-dataset",
        "--n",
        "3",
        "--resolution",
        "8",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not exist"));
    assert!(!out.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

fn parse_props(stdout: &[u8]) -> (f64, f64, f64) {
    let text = String::from_utf8_lossy(stdout);
    let num = |key: &str| -> f64 {
        let rest = &text[text.find(key).unwrap_or_else(|| panic!("{key} in {text}")) + key.len()..];
        rest.split([' ', ',', '\n'])
            .next()
            .unwrap()
            .parse()
            .unwrap()
    };
    (num("E_H = "), num("nu_H = "), num("vf = "))
}

#[test]
fn homogenize_solid_cell_recovers_base_material() {
    let o = gradcell(&["homogenize", "--solid", "--resolution", "10"]);
    assert_eq!(code(&o), 0);
    let (e, nu, vf) = parse_props(&o.stdout);
    assert!((e - 200.0).abs() <= 0.005 * 200.0, "{e}");
    assert!((nu - 0.3).abs() <= 0.005 * 0.3, "{nu}");
    assert_eq!(vf, 1.0);
}

#[test]
fn homogenize_single_cell_prints_properties() {
    let o = gradcell(&[
        "homogenize",
        "--alpha",
        "1,0,0",
        "--t",
        "0,0,0",
        "--resolution",
        "16",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (e, nu, vf) = parse_props(&o.stdout);
    assert!(e > 0.0 && e < 200.0);
    assert!(nu > 0.0 && nu < 0.5);
    assert_eq!(vf, 0.5);
}

#[test]
fn homogenize_rejects_weights_off_the_simplex() {
    let o = gradcell(&[
        "homogenize",
        "--alpha",
        "0.5,0.2,0.2",
        "--t",
        "0,0,0",
        "--resolution",
        "8",
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid shape parameters"));
}

#[test]
fn homogenize_csv_matches_single_queries() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("cells.csv");
    fs::write(
        &input,
        "alpha1,alpha2,alpha3,t1,t2,t3\n1,0,0,0,0,0\n0.2,0.5,0.3,0.1,-0.1,0.05\n",
    )
    .unwrap();
    let out = dir.path().join("props.csv");
    let o = gradcell(&[
        "homogenize",
        "--csv",
        s(&input),
        "--out",
        s(&out),
        "--resolution",
        "12",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "alpha1,alpha2,alpha3,t1,t2,t3,E,nu,vf,status");
    assert_eq!(lines.len(), 3);
    let single = gradcell(&[
        "homogenize",
        "--alpha",
        "1,0,0",
        "--t",
        "0,0,0",
        "--resolution",
        "12",
    ]);
    let (e, nu, _) = parse_props(&single.stdout);
    let cols: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(cols[6].parse::<f64>().unwrap(), e);
    assert_eq!(cols[7].parse::<f64>().unwrap(), nu);
    assert_eq!(cols[9], "ok");
}

fn small_problem(dir: &Path) -> PathBuf {
    let mut spec = cantilever(6, 3, 10.0);
    spec.optimizer.max_iterations = 30;
    let p = dir.join("small.json");
    fs::write(&p, serde_json::to_string(&spec).unwrap()).unwrap();
    p
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

/// Dataset, training, evaluation, optimization and synthesis on toy sizes.
fn pipeline(dir: &Path, problem: &Path) {
    let run = |args: &[&str]| {
        let o = gradcell(args);
        assert_eq!(
            code(&o),
            0,
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        o
    };
    let d = s(dir);
    run(&[
        "--threads",
        "1",
        "gen-dataset",
        "--n",
        "10",
        "--resolution",
        "8",
        "--seed",
        "7",
        "--out",
        d,
    ]);
    let ds = dir.join("dataset.csv");
    run(&[
        "--threads",
        "1",
        "train",
        "--dataset",
        s(&ds),
        "--iterations",
        "10",
        "--out",
        d,
    ]);
    let w = dir.join("weights.json");
    let test = dir.join("test.csv");
    run(&[
        "--threads",
        "1",
        "eval",
        "--weights",
        s(&w),
        "--test",
        s(&test),
        "--resolution",
        "12",
        "--out",
        d,
    ]);
    let hull = dir.join("hull.json");
    run(&[
        "--threads",
        "1",
        "optimize",
        "--problem",
        s(problem),
        "--hull",
        s(&hull),
        "--out",
        d,
    ]);
    run(&[
        "--threads",
        "1",
        "synthesize",
        "--fields",
        d,
        "--weights",
        s(&w),
        "--resolution",
        "16",
        "--mesh-resolution",
        "4",
        "--recheck",
        "--problem",
        s(problem),
        "--out",
        d,
    ]);
}

#[test]
fn pipeline_smoke_run_is_reproducible() {
    let root = tempfile::tempdir().unwrap();
    let problem = small_problem(root.path());
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    fs::create_dir(&a).unwrap();
    fs::create_dir(&b).unwrap();
    pipeline(&a, &problem);
    pipeline(&b, &problem);

    let fa = files(&a);
    for name in [
        "dataset.csv",
        "hull.json",
        "scaling.json",
        "weights.json",
        "losses.csv",
        "train.csv",
        "test.csv",
        "errors.csv",
        "field_E.csv",
        "field_nu.csv",
        "history.csv",
        "assignments.csv",
        "overlap_report.csv",
        "structure.stl",
        "drift.csv",
        "dataset_summary.json",
        "eval_summary.json",
        "optimize_summary.json",
        "synthesis_summary.json",
    ] {
        assert!(fa.iter().any(|(n, _)| n == name), "missing {name}");
    }
    assert_eq!(fa, files(&b));

    let weights: serde_json::Value =
        serde_json::from_slice(&fs::read(a.join("weights.json")).unwrap()).unwrap();
    let mut expected =
        serde_json::to_value(gradcell::generative::TrainingConfig::default()).unwrap();
    expected["iterations"] = 10.into();
    assert_eq!(weights["config"], expected);

    let o = gradcell(&["report", s(&a)]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("field_E.csv: 6×3 field"));
    assert!(text.contains("history.csv: 31 rows"));
}

#[test]
fn empty_test_set_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = s(dir.path());
    assert_eq!(
        code(&gradcell(&[
            "gen-dataset",
            "--n",
            "6",
            "--resolution",
            "8",
            "--out",
            d
        ])),
        0
    );
    let ds = dir.path().join("dataset.csv");
    assert_eq!(
        code(&gradcell(&[
            "train",
            "--dataset",
            s(&ds),
            "--iterations",
            "2",
            "--out",
            d
        ])),
        0
    );
    let header = fs::read_to_string(&ds)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, header + "\n").unwrap();
    let w = dir.path().join("weights.json");
    let o = gradcell(&["eval", "--weights", s(&w), "--test", s(&empty), "--out", d]);
    assert_ne!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no records"));
}

#[test]
fn infeasible_problem_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let hull = dir.path().join("hull.json");
    let h = gradcell::dataset::convex_hull(&[[30.0, 0.25], [90.0, 0.25], [60.0, 0.3]]).unwrap();
    fs::write(&hull, serde_json::to_string(&h).unwrap()).unwrap();
    let mut spec = cantilever(4, 2, 1.0);
    spec.optimizer.nu_init = 0.32;
    let problem = dir.path().join("p.json");
    fs::write(&problem, serde_json::to_string(&spec).unwrap()).unwrap();
    let o = gradcell(&[
        "optimize",
        "--problem",
        s(&problem),
        "--hull",
        s(&hull),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("infeasible"));
    assert!(!dir.path().join("history.csv").exists());
}
