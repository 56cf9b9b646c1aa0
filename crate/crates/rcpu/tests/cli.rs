//! End-to-end checks of the `rcpu` binary: exit codes, file outputs, and
//! the gen -> prune -> eval -> sweep workflow.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_rcpu")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn gen_fixture(dir: &Path) {
    let out = run(&[
        "gen",
        "--out",
        dir.to_str().unwrap(),
        "--seed",
        "11",
        "--dim",
        "12",
        "--depth",
        "2",
        "--n-calib",
        "40",
        "--n-eval",
        "24",
    ]);
    assert!(out.status.success(), "{out:?}");
}

#[test]
fn gen_writes_expected_layout() {
    let dir = tempfile::tempdir().unwrap();
    gen_fixture(dir.path());
    assert!(dir.path().join("model/manifest.toml").exists());
    assert!(dir.path().join("model/layer0.weight.rcpu").exists());
    assert!(dir.path().join("model/layer1.weight.rcpu").exists());
    assert!(dir.path().join("calib.rcpu").exists());
    assert!(dir.path().join("eval.rcpu").exists());
    let calib = rcpu::io::read_tensor(dir.path().join("calib.rcpu")).unwrap();
    assert_eq!(calib.shape(), (12, 40));
    assert!(calib.is_finite());
}

#[test]
fn prune_trivial_config_preserves_payload_bytes() {
    let dir = tempfile::tempdir().unwrap();
    gen_fixture(dir.path());
    let out_dir = dir.path().join("pruned");
    let out = run(&[
        "prune",
        "--model",
        dir.path().join("model").to_str().unwrap(),
        "--calib",
        dir.path().join("calib.rcpu").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--ratio",
        "0",
        "--compensation-variant",
        "none",
    ]);
    assert!(out.status.success(), "{out:?}");
    // rho = 0 with variant none keeps every tensor payload byte-for-byte.
    for layer in ["layer0", "layer1"] {
        let before = fs::read(dir.path().join(format!("model/{layer}.weight.rcpu"))).unwrap();
        let after = fs::read(out_dir.join(format!("{layer}.weight.rcpu"))).unwrap();
        assert_eq!(before, after, "{layer} payload changed");
    }
    let stdout = String::from_utf8(out.stdout).unwrap();
    let report_lines = stdout.lines().filter(|l| l.starts_with("layer=")).count();
    assert_eq!(report_lines, 2, "one report line per prunable layer");
    assert!(out_dir.join("prune_report.toml").exists());
}

#[test]
fn prune_report_rows_match_prunable_layers() {
    let dir = tempfile::tempdir().unwrap();
    gen_fixture(dir.path());
    let out_dir = dir.path().join("pruned");
    let out = run(&[
        "prune",
        "--model",
        dir.path().join("model").to_str().unwrap(),
        "--calib",
        dir.path().join("calib.rcpu").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--ratio",
        "0.2",
    ]);
    assert!(out.status.success(), "{out:?}");
    let report = fs::read_to_string(out_dir.join("prune_report.toml")).unwrap();
    assert_eq!(report.matches("[[records]]").count(), 2);
    for key in ["layer =", "ratio =", "kept =", "residual_before =", "residual_after =", "variant =", "seconds ="] {
        assert!(report.contains(key), "missing {key}");
    }
}

#[test]
fn unknown_variant_is_usage_error_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    gen_fixture(dir.path());
    let out = run(&[
        "prune",
        "--model",
        dir.path().join("model").to_str().unwrap(),
        "--calib",
        dir.path().join("calib.rcpu").to_str().unwrap(),
        "--out",
        dir.path().join("p").to_str().unwrap(),
        "--compensation-variant",
        "sideways",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("sideways"), "{stderr}");
}

#[test]
fn missing_input_file_is_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "eval",
        "--model",
        dir.path().join("nope").to_str().unwrap(),
        "--reference",
        dir.path().join("nope").to_str().unwrap(),
        "--eval",
        dir.path().join("nope.rcpu").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_ratio_is_exit_1_with_context() {
    let dir = tempfile::tempdir().unwrap();
    gen_fixture(dir.path());
    let out = run(&[
        "prune",
        "--model",
        dir.path().join("model").to_str().unwrap(),
        "--calib",
        dir.path().join("calib.rcpu").to_str().unwrap(),
        "--out",
        dir.path().join("p").to_str().unwrap(),
        "--ratio",
        "1.5",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("ratio"), "{stderr}");
}

#[test]
fn eval_identical_models_prints_zero() {
    let dir = tempfile::tempdir().unwrap();
    gen_fixture(dir.path());
    let model = dir.path().join("model");
    let out = run(&[
        "eval",
        "--model",
        model.to_str().unwrap(),
        "--reference",
        model.to_str().unwrap(),
        "--eval",
        dir.path().join("eval.rcpu").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    let first = stdout.lines().next().unwrap();
    assert!(first.contains("heldout_rel_error = 0.0"), "{first}");
}

#[test]
fn eval_matches_library_call() {
    let dir = tempfile::tempdir().unwrap();
    gen_fixture(dir.path());
    let pruned_dir = dir.path().join("pruned");
    assert!(run(&[
        "prune",
        "--model",
        dir.path().join("model").to_str().unwrap(),
        "--calib",
        dir.path().join("calib.rcpu").to_str().unwrap(),
        "--out",
        pruned_dir.to_str().unwrap(),
        "--ratio",
        "0.25",
    ])
    .status
    .success());

    let out = run(&[
        "eval",
        "--model",
        pruned_dir.to_str().unwrap(),
        "--reference",
        dir.path().join("model").to_str().unwrap(),
        "--eval",
        dir.path().join("eval.rcpu").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    let printed: f64 = stdout
        .lines()
        .next()
        .unwrap()
        .rsplit(' ')
        .next()
        .unwrap()
        .parse()
        .unwrap();

    let model = rcpu::model::load_model(&pruned_dir).unwrap();
    let reference = rcpu::model::load_model(dir.path().join("model")).unwrap();
    let eval_inputs = rcpu::io::read_tensor(dir.path().join("eval.rcpu")).unwrap();
    let metrics = rcpu::pipeline::evaluate(&model, &eval_inputs, &reference).unwrap();
    assert!((printed - metrics.relative_error).abs() < 1e-12);
}

#[test]
fn sweep_default_axes_produce_thirty_rows() {
    let dir = tempfile::tempdir().unwrap();
    gen_fixture(dir.path());
    let out_dir = dir.path().join("sweep");
    let out = run(&[
        "sweep",
        "--model",
        dir.path().join("model").to_str().unwrap(),
        "--calib",
        dir.path().join("calib.rcpu").to_str().unwrap(),
        "--eval",
        dir.path().join("eval.rcpu").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let table = fs::read_to_string(out_dir.join("table.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "ratio,score,variant,seed,n_calib,in_sample_residual,heldout_rel_error,seconds_per_layer"
    );
    assert_eq!(lines.count(), 30, "3 ratios x 2 scores x 5 variants");
    assert!(out_dir.join("manifest.toml").exists());
}

#[test]
fn sweep_single_cell_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    gen_fixture(dir.path());
    let config_path = dir.path().join("sweep.toml");
    fs::write(
        &config_path,
        "ratios = [0.2]\nscore_variants = [\"wanda_sp\"]\ncompensation_variants = [\"rot\"]\n",
    )
    .unwrap();
    let out_dir = dir.path().join("sweep");
    let out = run(&[
        "sweep",
        "--model",
        dir.path().join("model").to_str().unwrap(),
        "--calib",
        dir.path().join("calib.rcpu").to_str().unwrap(),
        "--eval",
        dir.path().join("eval.rcpu").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--config",
        config_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let table = fs::read_to_string(out_dir.join("table.csv")).unwrap();
    assert_eq!(table.lines().count(), 2, "header plus one row");
    assert!(table.lines().nth(1).unwrap().starts_with("0.2,wanda_sp,rot,"));
}

#[test]
fn prune_config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    gen_fixture(dir.path());
    let config_path = dir.path().join("prune.toml");
    fs::write(
        &config_path,
        "ratio = 0.5\ncompensation_variant = \"bias\"\nscore_variant = \"wanda_sp\"\n",
    )
    .unwrap();
    let out_dir = dir.path().join("pruned");
    // Flag overrides the file's ratio; the file's variant stands.
    let out = run(&[
        "prune",
        "--model",
        dir.path().join("model").to_str().unwrap(),
        "--calib",
        dir.path().join("calib.rcpu").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--config",
        config_path.to_str().unwrap(),
        "--ratio",
        "0.25",
    ]);
    assert!(out.status.success(), "{out:?}");
    let report = fs::read_to_string(out_dir.join("prune_report.toml")).unwrap();
    assert!(report.contains("ratio = 0.25"), "{report}");
    assert!(report.contains("variant = \"bias\""), "{report}");
    // Bias compensation attaches per-layer offsets to the pruned model.
    let pruned = rcpu::model::load_model(&out_dir).unwrap();
    assert!(pruned.layers.iter().all(|l| l.bias.is_some()));
}

#[test]
fn malformed_config_file_is_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    gen_fixture(dir.path());
    let config_path = dir.path().join("bad.toml");
    fs::write(&config_path, "no_such_field = true\n").unwrap();
    let out = run(&[
        "prune",
        "--model",
        dir.path().join("model").to_str().unwrap(),
        "--calib",
        dir.path().join("calib.rcpu").to_str().unwrap(),
        "--out",
        dir.path().join("p").to_str().unwrap(),
        "--config",
        config_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gen_with_groups_and_grouped_prune() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "gen",
        "--out",
        dir.path().to_str().unwrap(),
        "--seed",
        "5",
        "--dim",
        "12",
        "--depth",
        "2",
        "--n-calib",
        "30",
        "--n-eval",
        "16",
        "--groups",
        "4",
    ]);
    assert!(out.status.success(), "{out:?}");
    let out_dir = dir.path().join("pruned");
    let prune = run(&[
        "prune",
        "--model",
        dir.path().join("model").to_str().unwrap(),
        "--calib",
        dir.path().join("calib.rcpu").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--ratio",
        "0.34",
    ]);
    assert!(prune.status.success(), "{prune:?}");
    let pruned = rcpu::model::load_model(&out_dir).unwrap();
    // ceil(3 groups * 0.34) = 2 dropped groups of width 4 -> 4 kept inputs.
    for layer in &pruned.layers {
        let kept = layer.input_kept.as_ref().unwrap();
        assert_eq!(kept.len(), 4);
        assert!(kept.chunks(4).all(|c| c.windows(2).all(|w| w[1] == w[0] + 1)));
    }
}

#[test]
fn width_propagation_flag_rewires_downstream() {
    let dir = tempfile::tempdir().unwrap();
    gen_fixture(dir.path());
    let out_dir = dir.path().join("pruned");
    let out = run(&[
        "prune",
        "--model",
        dir.path().join("model").to_str().unwrap(),
        "--calib",
        dir.path().join("calib.rcpu").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--ratio",
        "0.25",
        "--width-propagation",
    ]);
    assert!(out.status.success(), "{out:?}");
    let pruned = rcpu::model::load_model(&out_dir).unwrap();
    assert!(pruned.layers[0].input_kept.is_some());
    assert!(pruned.layers[1].input_kept.is_none());
    assert!(pruned.layers[1].input_dim < 12);
}
