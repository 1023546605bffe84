use std::path::Path;
use std::process::{Command, Output};

fn lora_rake(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lora-rake"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_ser(out: &Path) -> Output {
    lora_rake(&[
        "ser",
        "--sf",
        "7",
        "--channel",
        "c2",
        "--detectors",
        "rake,coh,noncoh",
        "--ebn0",
        "-4:2:4",
        "--nd",
        "200",
        "--trials",
        "5",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ])
}

#[test]
fn ser_writes_one_row_per_point_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let run = small_ser(&a);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(small_ser(&b).status.success());

    let first = std::fs::read(&a).unwrap();
    assert_eq!(first, std::fs::read(&b).unwrap());

    let text = String::from_utf8(first).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("detector,ebn0_db,errors,symbols,ser,ci95,nc_avg,cmult,cadd")
    );
    assert_eq!(lines.count(), 3 * 5);
    assert!(!text.contains('\r'));

    let summary = String::from_utf8_lossy(&run.stderr);
    assert!(summary.contains("seed=1") && summary.contains("config=") && summary.contains("wall="));
}

#[test]
fn delta_prints_every_symbol_and_a_summary() {
    let run = lora_rake(&["delta", "--sf", "7", "--channel", "c1"]);
    assert!(run.status.success());
    let text = String::from_utf8(run.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 128 + 1);
    let summary = lines.last().unwrap();
    assert!(summary.starts_with("max_ratio,1.89"), "{summary}");
}

#[test]
fn complexity_table_has_exact_integers() {
    let run = lora_rake(&["complexity", "--sf-list", "7", "--k", "3", "--nc-list", "4"]);
    assert!(run.status.success());
    let text = String::from_utf8(run.stdout).unwrap();
    assert!(text.contains("82304") && text.contains("1216"), "{text}");
}

#[test]
fn config_errors_exit_with_code_two() {
    let unknown = lora_rake(&["ser", "--no-such-flag"]);
    assert_eq!(unknown.status.code(), Some(2));

    let bad_value = lora_rake(&["ser", "--rho-c", "2", "--trials", "1", "--nd", "1"]);
    assert_eq!(bad_value.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_value.stderr).contains("rho_c"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "sf = 7\nn_trails = 3\n").unwrap();
    let typo = lora_rake(&["ser", "--config", cfg.to_str().unwrap()]);
    assert_eq!(typo.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&typo.stderr).contains("n_trails"));
}

#[test]
fn config_file_and_flags_merge() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "sf = 7\nchannel = \"c1\"\ndetectors = [\"rake\"]\nebn0 = [0.0]\nn_trials = 2\nn_d = 100\n",
    )
    .unwrap();
    let run = lora_rake(&["ser", "--config", cfg.to_str().unwrap(), "--detectors", "rake,tdel"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = String::from_utf8(run.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 2);
    assert!(text.lines().nth(2).unwrap().starts_with("tdel,0,"));
    assert!(text.lines().nth(1).unwrap().contains(",200,"));
}
