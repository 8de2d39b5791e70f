use std::fs;
use std::path::Path;

use lscc::harness::cli::{run, EXIT_CONFIG, EXIT_FAULT, EXIT_OK};
use lscc::harness::config::ExperimentConfig;

fn lscc(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("lscc").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn honest_batch_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = lscc(&["honest", "--n", "4", "--T", "20", "--seeds", "100", "--mu", "1e-6", "--out", path_str(dir.path())]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.starts_with("accept=100/100"), "{out}");
    for f in ["transcripts.jsonl", "runs.csv", "record.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let lines = fs::read_to_string(dir.path().join("transcripts.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 100);
    let runs = fs::read_to_string(dir.path().join("runs.csv")).unwrap();
    assert_eq!(
        runs.lines().next().unwrap(),
        "index,seed,decision,rejected_at,stage,max_round_margin,final_margin"
    );
    let record: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("record.json")).unwrap()).unwrap();
    assert_eq!(record["config"]["n"], 4);
    assert_eq!(record["runs"].as_array().unwrap().len(), 100);
    assert_eq!(record["config_hash"].as_str().unwrap().len(), 64);
    assert!(record["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn band_prints_closed_form_and_measurement() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = lscc(&["band", "--n", "20", "--out", path_str(dir.path())]);
    assert_eq!(code, EXIT_OK);
    let field = |name: &str| -> f64 {
        out.split_whitespace()
            .find_map(|w| w.strip_prefix(&format!("{name}=")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((field("closed_form") - field("measured")).abs() < 1e-9);
    assert!((field("closed_form") - 0.95f64.powi(20)).abs() < 1e-12);
    let csv = fs::read_to_string(dir.path().join("band.csv")).unwrap();
    assert!(csv.starts_with("n,closed_form,measured,abs_error,accepted_tight,accepted_loose\n"));
}

#[test]
fn cheat_writes_decay_and_shrinkage() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = lscc(&["cheat", "--n", "4", "--T", "12", "--offset", "0.6667", "--mu", "0.0625", "--seeds", "20", "--out", path_str(dir.path())]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("median_prod_S="), "{out}");
    let decay = fs::read_to_string(dir.path().join("decay.csv")).unwrap();
    assert!(decay.starts_with("seed,round,abs_delta\n"));
    assert_eq!(decay.lines().count(), 1 + 20 * 13);
    let hist = fs::read_to_string(dir.path().join("shrinkage.csv")).unwrap();
    assert!(hist.starts_with("bin_lo,bin_hi,count\n"));
}

#[test]
fn every_experiment_command_runs() {
    let cases: &[&[&str]] = &[
        &["env", "--T", "5", "--seeds", "3", "--samples", "20"],
        &["decay", "--distribution", "scale:0.9", "--T", "10", "--seeds", "4", "--mu", "poly:2"],
        &["claim1", "--distribution", "block:0.5", "--seeds", "3", "--samples", "20"],
        &["collapse", "--distribution", "phase", "--seeds", "5", "--mu", "1e-9"],
        &["probe", "--distribution", "scale:0.99", "--alpha", "1e-3", "--alpha", "1e-1", "--samples", "200"],
    ];
    let expected = ["env.csv", "fits.csv", "claim1.csv", "collapse.csv", "probe.csv"];
    for (args, file) in cases.iter().zip(expected) {
        let dir = tempfile::tempdir().unwrap();
        let mut argv = args.to_vec();
        argv.extend(["--out", path_str(dir.path())]);
        let (code, out, err) = lscc(&argv);
        assert_eq!(code, EXIT_OK, "{args:?}: {err}");
        assert!(!out.trim().is_empty());
        assert!(dir.path().join(file).exists(), "{args:?}");
    }
}

#[test]
fn usage_and_config_errors_exit_2() {
    let (code, _, err) = lscc(&["honest", "--bogus"]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("--bogus"));
    let (code, _, _) = lscc(&["frobnicate"]);
    assert_eq!(code, EXIT_CONFIG);
    let (code, _, err) = lscc(&["honest", "--n", "2"]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("`n`"), "{err}");
    let (code, _, _) = lscc(&["probe", "--distribution", "ag"]);
    assert_eq!(code, EXIT_CONFIG);
    let (code, _, _) = lscc(&["decay", "--distribution", "wobble"]);
    assert_eq!(code, EXIT_CONFIG);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"command": "honest", "seeds": 5, "colour": "red"}"#).unwrap();
    let (code, _, err) = lscc(&["honest", "--config", path_str(&cfg)]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("colour"), "{err}");
    let (code, _, err) = lscc(&["cheat", "--config", path_str(&dir.path().join("missing.json"))]);
    assert_eq!(code, EXIT_CONFIG, "{err}");
}

#[test]
fn help_exits_0() {
    let (code, out, _) = lscc(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("honest") && out.contains("circuit"));
}

#[test]
fn unwritable_output_is_a_fault() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    fs::write(&file, "x").unwrap();
    let (code, _, _) = lscc(&["band", "--n", "4", "--out", path_str(&file.join("sub"))]);
    assert_eq!(code, EXIT_FAULT);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"command": "honest", "n": 3, "T": 5, "seeds": 50, "mu": {"poly": 2}}"#).unwrap();
    let out_dir = dir.path().join("o");
    let saved = dir.path().join("saved.json");
    let (code, out, err) = lscc(&["honest", "--config", path_str(&cfg), "--seeds", "7", "--out", path_str(&out_dir), "--save-config", path_str(&saved)]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.starts_with("accept=7/7"), "{out}");
    let loaded = ExperimentConfig::load(&saved).unwrap();
    assert_eq!(loaded.seeds, 7);
    assert_eq!(loaded.mu.precision().at(3), 1.0 / 9.0);
    let (code, _, err) = lscc(&["cheat", "--config", path_str(&cfg)]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("`command`"), "{err}");
}

#[test]
fn config_round_trip_and_hash() {
    let dir = tempfile::tempdir().unwrap();
    let c = ExperimentConfig::from_json(r#"{"command": "honest"}"#).unwrap();
    let p = dir.path().join("a.json");
    c.save(&p).unwrap();
    let back = ExperimentConfig::load(&p).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.canonical_text(), c.canonical_text());
    let p2 = dir.path().join("b.json");
    back.save(&p2).unwrap();
    assert_eq!(fs::read(&p).unwrap(), fs::read(&p2).unwrap());
    assert_eq!(back.hash(), c.hash());

    let poly = ExperimentConfig::from_json(r#"{"command": "honest", "n": 10, "mu": {"poly": 2}}"#).unwrap();
    assert!((poly.mu.precision().at(10) - 0.01).abs() < 1e-15);
}

#[test]
fn circuit_gen_and_show() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.txt");
    let (code, _, err) = lscc(&["circuit", "gen", "--n", "5", "--T", "4", "--gate-set", "named:ccx,h", "--out", path_str(&path)]);
    assert_eq!(code, EXIT_OK, "{err}");
    let (code, out, _) = lscc(&["circuit", "show", path_str(&path)]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("n=5 T=4\n"), "{out}");
    assert!(out.contains("top_row_value="));
    let (_, text, _) = lscc(&["circuit", "gen", "--n", "5", "--T", "4", "--gate-set", "named:ccx,h"]);
    assert_eq!(text, fs::read_to_string(&path).unwrap());

    fs::write(&path, "n=3 T=1\n0 1\n").unwrap();
    let (code, _, _) = lscc(&["circuit", "show", path_str(&path)]);
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn output_dir_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from_env");
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, format!(r#"{{"command": "band", "n": 5, "out_dir": {:?}}}"#, path_str(&dir.path().join("from_cfg")))).unwrap();
    std::env::set_var(lscc::harness::OUT_DIR_ENV, &target);
    let (code, _, err) = lscc(&["band", "--config", path_str(&cfg)]);
    std::env::remove_var(lscc::harness::OUT_DIR_ENV);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(target.join("band.csv").exists());
    assert!(!dir.path().join("from_cfg").exists());
}

#[test]
fn identical_configs_give_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let (code, _, err) = lscc(&["cheat", "--T", "15", "--seeds", "30", "--master-seed", "5", "--out", path_str(d.path())]);
        assert_eq!(code, EXIT_OK, "{err}");
    }
    for f in ["transcripts.jsonl", "runs.csv", "decay.csv", "shrinkage.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let c = tempfile::tempdir().unwrap();
    lscc(&["cheat", "--T", "15", "--seeds", "30", "--master-seed", "6", "--out", path_str(c.path())]);
    assert_ne!(fs::read(a.path().join("decay.csv")).unwrap(), fs::read(c.path().join("decay.csv")).unwrap());
}
