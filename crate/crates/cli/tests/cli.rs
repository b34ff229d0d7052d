use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gbdp::model::DPInstance;
use gbdp::trainer::{train, DecisionSearch, TrainConfig};
use gbdp::validator::validate;
use gbdp_cli::output::{histogram, read_validation_csv, validation_csv};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn gbdp(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gbdp"))
        .args(args)
        .current_dir(dir)
        .env_remove("GBDP_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn small() -> String {
    config("small.toml").display().to_string()
}

#[test]
fn persisted_policy_validates_like_the_in_memory_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&gbdp(&["train", "--config", &small(), "--iters", "15", "--seed", "4", "--quiet", "--out-dir", "run"], d));
    ok(&gbdp(
        &["validate", "--config", &small(), "--cuts", "run/cuts.store", "--samples", "300", "--seed", "8"],
        d,
    ));
    let on_disk = std::fs::read(d.join("run/validation.csv")).unwrap();

    let inst = DPInstance::load(config("small.toml")).unwrap();
    let (cuts, _) = train(&inst, &TrainConfig::new(15, 4)).unwrap();
    let summary = validate(&inst, &cuts, 300, 8, DecisionSearch::Coordinate).unwrap();
    assert_eq!(on_disk, validation_csv(&summary).into_bytes());
    assert_eq!(read_validation_csv(&d.join("run/validation.csv")).unwrap(), summary.samples);
}

#[test]
fn trace_has_one_nonincreasing_row_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    ok(&gbdp(&["train", "--config", &small(), "--iters", "12", "--quiet"], dir.path()));
    for name in ["trace.csv", "fig_converge.csv"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        let rows: Vec<Vec<f64>> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 12);
        assert!(rows.windows(2).all(|w| w[1][1] <= w[0][1]));
        let mean: f64 = rows.iter().map(|r| r[2]).sum::<f64>() / 12.0;
        assert!((rows[11][3] - mean).abs() <= 1e-12 * mean.abs().max(1.0));
    }
}

#[test]
fn unknown_config_key_is_rejected_with_its_name() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("small.toml")).unwrap() + "bogus_key = 1\n";
    std::fs::write(dir.path().join("bad.toml"), text).unwrap();
    let out = gbdp(&["train", "--config", "bad.toml", "--iters", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus_key"));
}

#[test]
fn out_of_range_value_is_rejected_with_its_name() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("small.toml"))
        .unwrap()
        .replace("beta_d = -0.1", "beta_d = 0.5");
    std::fs::write(dir.path().join("bad.toml"), text).unwrap();
    let out = gbdp(&["exact", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta_d"));
}

#[test]
fn exit_codes_for_preconditions_and_budget() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&gbdp(&["train", "--config", &small(), "--iters", "1", "--quiet"], d));
    let one_sample = gbdp(&["validate", "--config", &small(), "--cuts", "cuts.store", "--samples", "1"], d);
    assert_eq!(one_sample.status.code(), Some(2));
    let big = config("desk_n5.toml").display().to_string();
    let mismatch = gbdp(&["validate", "--config", &big, "--cuts", "cuts.store", "--samples", "5"], d);
    assert_eq!(mismatch.status.code(), Some(3));
    let budget = gbdp(&["exact", "--config", &small(), "--budget", "10"], d);
    assert_eq!(budget.status.code(), Some(4));
    let oracle = gbdp(&["train", "--config", &big, "--iters", "1", "--resample-mode", "oracle"], d);
    assert_eq!(oracle.status.code(), Some(4));
    let missing = gbdp(&["bounds", "--validation", "nothing.csv"], d);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn bounds_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&gbdp(&["train", "--config", &small(), "--iters", "5", "--quiet"], d));
    ok(&gbdp(&["validate", "--config", &small(), "--cuts", "cuts.store", "--samples", "1000"], d));
    let hist = std::fs::read_to_string(d.join("fig_hist.csv")).unwrap();
    let counts: usize = hist.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(hist.lines().count(), 21);
    assert_eq!(counts, 1000);

    ok(&gbdp(&["bounds", "--validation", "validation.csv", "--bernstein", "literal"], d));
    let bounds = std::fs::read_to_string(d.join("bounds.csv")).unwrap();
    assert_eq!(bounds.lines().next(), Some("bound,alpha,value,params,available"));
    assert_eq!(bounds.lines().count(), 7);
    let grid = std::fs::read_to_string(d.join("fig_bounds.csv")).unwrap();
    assert_eq!(grid.lines().next(), Some("alpha,bernstein,dkw_expectation,hoeffding"));
    assert_eq!(grid.lines().count(), 26);

    let bad = gbdp(&["bounds", "--validation", "validation.csv", "--bounds", "cantelli,nope"], d);
    assert_eq!(bad.status.code(), Some(2));
    let theta = gbdp(&["bounds", "--validation", "validation.csv", "--theta-d", "2"], d);
    assert_eq!(theta.status.code(), Some(2));
}

#[test]
fn output_directory_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_gbdp"))
        .args(["train", "--config", &small(), "--iters", "2", "--quiet"])
        .current_dir(dir.path())
        .env("GBDP_OUT_DIR", "elsewhere")
        .output()
        .unwrap();
    ok(&out);
    assert!(dir.path().join("elsewhere/cuts.store").is_file());
    assert!(!dir.path().join("cuts.store").exists());
}

#[test]
fn compare_reports_nonnegative_gaps_after_training() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&gbdp(&["train", "--config", &small(), "--iters", "10", "--quiet"], d));
    let text = ok(&gbdp(&["compare", "--config", &small(), "--cuts", "cuts.store"], d));
    assert!(text.contains("upper_bound ok"), "{text}");
    let gaps = std::fs::read_to_string(d.join("gaps.csv")).unwrap();
    // 9 states over 11 stages
    assert_eq!(gaps.lines().count(), 1 + 9 * 11);
}

#[test]
fn histogram_counts_every_sample() {
    let xs: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64 / 3.0).collect();
    let h = histogram(&xs, 20);
    assert_eq!(h.len(), 20);
    assert_eq!(h.iter().map(|b| b.2).sum::<usize>(), 1000);
    assert_eq!(histogram(&[2.0, 2.0], 20).iter().map(|b| b.2).sum::<usize>(), 2);
}
