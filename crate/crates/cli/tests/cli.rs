use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
[federation]
sizes = [12, 14]
image_size = 8
[training]
budget = 2
hidden = [4]
seeds = [1]
[strategy]
list = ["CENTRALIZED", "FEDAVG", "FEDCROSS_ENS"]
[sweep]
local_epochs = [1, 2]
[analysis]
client_size = 10
landscape_points = 3
landscape_epochs = 2
"#;

fn fedcross(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedcross"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn every_verb_succeeds_on_a_tiny_plan() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "tiny.toml", TINY);
    let out = tmp.path().join("out");
    for verb in ["generate-data", "run", "sweep", "analyze-eq4", "landscape"] {
        let o = fedcross(&[verb, "--threads", "1"], &cfg, &out);
        assert_eq!(o.status.code(), Some(0), "{verb}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["federation_seed1.csv", "comparison.csv", "sweep.csv", "seed1/eq4_rounds.csv", "seed1/landscape.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let o = fedcross(&["run", "--seed", "7"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("seed    7"));
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let typo = write(tmp.path(), "typo.toml", "[training]\nbugdet = 4\n");
    assert_eq!(fedcross(&["run"], &typo, &out).status.code(), Some(2));
    let indivisible = write(tmp.path(), "bad.toml", &TINY.replace("local_epochs = [1, 2]", "local_epochs = [1, 3]"));
    assert_eq!(fedcross(&["sweep"], &indivisible, &out).status.code(), Some(2));
    let missing = tmp.path().join("nope.toml");
    assert_ne!(fedcross(&["run"], &missing, &out).status.code(), Some(0));
}

#[test]
fn diverging_training_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "hot.toml", &TINY.replace("budget = 2", "budget = 2\nlr0 = 1e200"));
    let o = fedcross(&["run"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
