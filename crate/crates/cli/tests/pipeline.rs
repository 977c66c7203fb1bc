use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use reachmac_cli::stages::{pairs_file, MAP_FILE, PREDICTIONS_FILE};
use reachmac_cli::{cmd_all, cmd_calibrate, cmd_collect, cmd_estimate, cmd_predict, cmd_validate, CliError, RunConfig, Settings};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn config(out: &Path) -> RunConfig {
    RunConfig::try_from(Settings {
        fixture_dir: Some(fixtures().join("audience")),
        truth: Some(fixtures().join("ground_truth.csv")),
        out: Some(out.to_path_buf()),
        ..Default::default()
    })
    .unwrap()
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn all_equals_stages_in_order() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    cmd_all(&config(a.path())).unwrap();
    let cfg = config(b.path());
    cmd_collect(&cfg).unwrap();
    cmd_estimate(&cfg).unwrap();
    cmd_validate(&cfg).unwrap();
    cmd_calibrate(&cfg).unwrap();
    cmd_predict(&cfg).unwrap();
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    assert!(ta == tb);
    assert!(ta.contains_key(Path::new(MAP_FILE)));
    assert_eq!(ta.keys().filter(|k| k.starts_with("snapshots")).count(), 22);
    // no temporary files are left behind
    assert!(ta.keys().all(|k| !k.file_name().unwrap().to_string_lossy().starts_with('.')));
}

#[test]
fn stages_need_their_inputs() {
    let out = tempfile::tempdir().unwrap();
    let cfg = config(out.path());
    for (result, needs) in [
        (cmd_estimate(&cfg), "collect"),
        (cmd_validate(&cfg), "estimate"),
        (cmd_calibrate(&cfg), "validate"),
        (cmd_predict(&cfg), "estimate"),
    ] {
        match result {
            Err(CliError::MissingStageInput { needs: n, .. }) => assert_eq!(n, needs),
            other => panic!("expected MissingStageInput, got {other:?}"),
        }
    }
}

#[test]
fn calibrate_with_two_pairs_reports_too_few_points() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = config(out.path());
    cfg.sexes = vec![reachmac::Sex::Male];
    std::fs::write(
        out.path().join(pairs_file(reachmac::Sex::Male)),
        "iso2,continent,mac_fb,mac_truth,loocv_pred\nIT,Europe,34,35,\nDE,Europe,33,34.5,\n",
    )
    .unwrap();
    let err = cmd_calibrate(&cfg).unwrap_err();
    assert_eq!(err.kind(), "TooFewPoints");
    assert!(err.to_string().starts_with("calibrate male:"), "{err}");
}

#[test]
fn parents_only_policy_changes_eligibility() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = config(out.path());
    cfg.lower_bound_policy = reachmac::indicators::LowerBoundPolicy::ParentsOnly;
    cmd_all(&cfg).unwrap();
    let est = std::fs::read_to_string(out.path().join("estimates.csv")).unwrap();
    // the fixture floors only parent cells, so both policies exclude the same rows
    assert_eq!(est.lines().filter(|l| l.ends_with(",false,lower_bound_cell")).count(), 6);
    assert!(est.contains("# lower_bound_policy: parents-only"));
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_reachmac"));
    c.current_dir(env!("CARGO_MANIFEST_DIR"));
    c
}

#[test]
fn binary_reports_errors_as_json() {
    let out = tempfile::tempdir().unwrap();
    let o = bin().args(["validate", "--out"]).arg(out.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let line = String::from_utf8(o.stderr).unwrap();
    let v: serde_json::Value = serde_json::from_str(line.lines().last().unwrap()).unwrap();
    assert_eq!(v["error"], "MissingStageInput");

    let o = bin().args(["all", "--mode", "batch"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("\"ConfigError\""));
}

#[test]
fn binary_reads_config_file_and_flags_override() {
    let out = tempfile::tempdir().unwrap();
    let cfg = out.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "seed = 7\nsexes = \"male\"\nfixture_dir = \"{}\"\ntruth = \"{}\"\nout = \"results\"\n",
            fixtures().join("audience").display(),
            fixtures().join("ground_truth.csv").display()
        ),
    )
    .unwrap();
    let o = bin().arg("all").arg("--config").arg(&cfg).args(["--seed", "11"]).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let results = out.path().join("results");
    let preds = std::fs::read_to_string(results.join(PREDICTIONS_FILE)).unwrap();
    assert!(preds.contains("# seed: 11\n"));
    assert!(preds.contains("# sexes: male\n"));
    assert!(!results.join("model_female.json").exists());
    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(results.join("model_male.json")).unwrap()).unwrap();
    assert_eq!(model["random_split"]["seed"], 11);
    assert_eq!(model["metadata"]["seed"], 11);
}
