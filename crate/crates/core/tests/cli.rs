use std::path::Path;
use std::process::{Command, Output};

use hose_core::io::{read_ten, write_ten};
use hose_core::simulation::{add_noise, generate_mean, Scenario, ScenarioSpec};
use hose_core::tuning::{optimize_soft_threshold, TuningOptions};
use hose_core::{apply_spectral, hosvd, DenseTensor};

fn hose(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hose"))
        .args(args)
        .env("HOSE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scenario_f(dir: &Path, seed: u64) -> (DenseTensor, String) {
    let theta = generate_mean(&ScenarioSpec::new(Scenario::F, seed)).unwrap();
    let x = add_noise(&theta, 1.0, seed).unwrap();
    let path = dir.join("x.ten");
    write_ten(&path, &x).unwrap();
    (x, path.to_str().unwrap().to_string())
}

#[test]
fn denoise_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let (x, input) = scenario_f(dir.path(), 3);
    let out = dir.path().join("est.ten");
    let o = hose(&["denoise", "--in", &input, "--method", "msst", "--tau2", "1.0", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let est = read_ten(&out).unwrap();
    assert_eq!(est.dims(), x.dims());
    let d = hosvd(&x).unwrap();
    let res = optimize_soft_threshold(&x, 1.0, &TuningOptions::default()).unwrap();
    let direct = apply_spectral(&d, &res.plan).unwrap();
    for (a, b) in est.values().iter().zip(direct.values()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn every_denoise_method_writes_a_tensor() {
    let dir = tempfile::tempdir().unwrap();
    let (x, input) = scenario_f(dir.path(), 4);
    for method in ["msst", "truncated_hosvd", "james_stein", "efron_morris", "matrix_soft", "identity"] {
        let out = dir.path().join(format!("{method}.ten"));
        let o = hose(&["denoise", "--in", &input, "--method", method, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{method}: {}", stderr(&o));
        assert_eq!(read_ten(&out).unwrap().dims(), x.dims());
    }
}

#[test]
fn rank_prints_the_selection() {
    let dir = tempfile::tempdir().unwrap();
    let (_, input) = scenario_f(dir.path(), 5);
    let o = hose(&["rank", "--in", &input, "--tau2", "1.0"]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().any(|l| l == "rank: 5 5 5"), "{}", stdout(&o));
}

#[test]
fn hosvd_spectra_has_one_row_per_singular_value() {
    let dir = tempfile::tempdir().unwrap();
    let x = DenseTensor::from_fn(&[3, 4, 5], |ix| ((ix[0] * 7 + ix[1] * 3 + ix[2] * 11) % 13) as f64 + 0.1 * ix[0] as f64).unwrap();
    let input = dir.path().join("x.ten");
    write_ten(&input, &x).unwrap();
    let spectra = dir.path().join("s.csv");
    let o = hose(&["hosvd", "--in", input.to_str().unwrap(), "--spectra", spectra.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&spectra).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "mode,index,sigma");
    assert_eq!(lines.len() - 1, 3 + 4 + 5);
    assert!(lines[1].starts_with("1,1,"));
}

#[test]
fn sure_csv_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let (x, input) = scenario_f(dir.path(), 6);
    let out = dir.path().join("sure.csv");
    let o = hose(&["sure", "--in", &input, "--lambdas", "5,-1,0.5", "--scale", "0.9", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let plan = hose_core::ShrinkagePlan::soft(&[5.0, -1.0, 0.5], 0.9).unwrap();
    let r = hose_core::sure_spectral(&hosvd(&x).unwrap(), &plan, 1.0).unwrap();
    assert_eq!(row[0], "soft");
    assert_eq!(row[5].parse::<f64>().unwrap(), r.sure);
    let o = hose(&["sure", "--in", &input, "--ranks", "5,5,5"]);
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("truncation,5;5;5,"));
}

#[test]
fn simulate_writes_losses_and_rank_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("losses.csv");
    let o = hose(&["simulate", "--scenario", "F", "--reps", "3", "--seed", "7", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "replicate,estimator,loss");
    assert_eq!(text.lines().count(), 1 + 3 * 6);
    let again = dir.path().join("again.csv");
    hose(&["simulate", "--scenario", "F", "--reps", "3", "--seed", "7", "--out", again.to_str().unwrap()]);
    assert_eq!(text, std::fs::read_to_string(&again).unwrap());

    let ranks = dir.path().join("ranks.csv");
    let o = hose(&["simulate", "--scenario", "D", "--reps", "4", "--rank-study", "--out", ranks.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&ranks).unwrap();
    assert_eq!(text.lines().next().unwrap(), "mode,rank,frequency");
    assert_eq!(text.lines().count(), 1 + 30);
}

#[test]
fn relational_pipeline_runs() {
    let dir = tempfile::tempdir().unwrap();
    let dims = [5, 4, 6];
    let props = DenseTensor::from_fn(&dims, |ix| {
        let h = (ix[0] as f64 * 12.9898 + ix[1] as f64 * 78.233 + ix[2] as f64 * 37.719).sin() * 43758.5453;
        0.1 + 0.8 * h.abs().fract()
    })
    .unwrap();
    let counts = DenseTensor::from_fn(&dims, |ix| (10 + ix[2]) as f64).unwrap();
    let (p, n) = (dir.path().join("p.ten"), dir.path().join("n.ten"));
    write_ten(&p, &props).unwrap();
    write_ten(&n, &counts).unwrap();
    let (fit, probs) = (dir.path().join("fit.ten"), dir.path().join("probs.ten"));
    let o = hose(&[
        "relational", "--props", p.to_str().unwrap(), "--counts", n.to_str().unwrap(),
        "--method", "truncated_hosvd", "--out", fit.to_str().unwrap(), "--probs-out", probs.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("residual norm"));
    let probs = read_ten(&probs).unwrap();
    assert!(probs.values().iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn errors_carry_codes() {
    let dir = tempfile::tempdir().unwrap();
    let x = DenseTensor::new(vec![2, 2, 2], vec![1.0; 8]).unwrap();
    let input = dir.path().join("flat.ten");
    write_ten(&input, &x).unwrap();
    let o = hose(&["rank", "--in", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("ERROR RankDeficient: "), "{}", stderr(&o));

    let bad = dir.path().join("bad.ten");
    std::fs::write(&bad, "2\n2 2\n1 2 3\n").unwrap();
    let o = hose(&["hosvd", "--in", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("ERROR ShapeError: "), "{}", stderr(&o));

    let o = hose(&["denoise", "--in", "x.ten", "--method", "bogus", "--out", "y.ten"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--method"));
}
