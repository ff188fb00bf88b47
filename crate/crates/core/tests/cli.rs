use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multicut"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const GAUSS: &str = "0,0,0.5";
const TWO_CUT: &str = "0,0,-2,0,0.25";

#[test]
fn equilibrium_command() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["equilibrium", "--potential", GAUSS, "--q", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let j = json(&d.path().join("support.json"));
    let e = j["result"]["support"]["endpoints"].as_array().unwrap();
    assert!((e[0].as_f64().unwrap() + 2.0).abs() < 1e-10);
    assert!((e[1].as_f64().unwrap() - 2.0).abs() < 1e-10);
    let h = &j["header"];
    assert_eq!(h["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(h["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(h["precision_digits"], 32);
    let csv = std::fs::read_to_string(d.path().join("density.csv")).unwrap();
    assert!(csv.starts_with("# tool multicut"));
    assert!(
        csv.contains("# config_hash ")
            && csv.contains("# seed none")
            && csv.contains("# precision_digits 32")
    );
    let row = csv
        .lines()
        .find(|l| !l.starts_with('#') && !l.starts_with("cut"))
        .unwrap();
    // 17 significant digits
    assert!(row.split(',').all(
        |f| f.contains('e') && f.split('e').next().unwrap().trim_start_matches('-').len() == 18
    ));

    let o = run(d.path(), &["equilibrium", "--potential", GAUSS, "--q", "2"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let o = run(
        d.path(),
        &["equilibrium", "--potential", "0,zz,0.5", "--q", "1"],
    );
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("'zz'"));
    let o = run(d.path(), &["equilibrium", "--potential", GAUSS]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--q"));
    let o = run(
        d.path(),
        &["equilibrium", "--potential", GAUSS, "--q", "1", "--bogus"],
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn kernel_command() {
    let d = tempfile::tempdir().unwrap();
    let o = run(
        d.path(),
        &[
            "kernel",
            "--potential",
            GAUSS,
            "--beta",
            "2",
            "--n",
            "50",
            "--point",
            "0",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let j = json(&d.path().join("bulk_error.json"));
    assert!(j["result"]["sup_error"].as_f64().unwrap() < 0.1);

    let o = run(
        d.path(),
        &[
            "kernel",
            "--potential",
            GAUSS,
            "--beta",
            "1",
            "--n",
            "49",
            "--point",
            "0",
        ],
    );
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("even"));

    let o = run(
        d.path(),
        &[
            "kernel",
            "--potential",
            GAUSS,
            "--beta",
            "4",
            "--n",
            "48",
            "--point",
            "0",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(d.path().join("kernel.csv")).unwrap();
    let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "xi,eta,k11,k12,k21,k22");
}

#[test]
fn partition_command() {
    let d = tempfile::tempdir().unwrap();
    let o = run(
        d.path(),
        &[
            "partition",
            "--method",
            "selberg",
            "--n",
            "2",
            "--beta",
            "2",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let j = json(&d.path().join("partition_selberg.json"));
    assert!((j["result"]["log_value"].as_f64().unwrap() - std::f64::consts::PI.ln()).abs() < 1e-14);

    let o = run(
        d.path(),
        &[
            "partition",
            "--method",
            "dett",
            "--n",
            "2",
            "--potential",
            GAUSS,
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let j = json(&d.path().join("partition_dett.json"));
    assert!(j["result"]["rel_gap"].as_f64().unwrap() <= 1e-4);

    let o = run(
        d.path(),
        &[
            "partition",
            "--method",
            "factorize",
            "--beta",
            "2",
            "--potential",
            TWO_CUT,
            "--q",
            "2",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let j = json(&d.path().join("partition_factorize.json"));
    assert!(j["result"]["reports"][0]["gap"]
        .as_f64()
        .unwrap()
        .is_finite());

    let o = run(
        d.path(),
        &[
            "partition",
            "--method",
            "brute",
            "--n",
            "10",
            "--potential",
            GAUSS,
        ],
    );
    assert_eq!(code(&o), 1);
    let o = run(d.path(), &["partition", "--method", "guess", "--n", "2"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn sample_command() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "sample",
        "--potential",
        GAUSS,
        "--beta",
        "2",
        "--n",
        "16",
        "--seed",
        "7",
        "--marginal",
    ];
    let o = run(a.path(), &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(code(&run(b.path(), &args)), 0);
    let ja = std::fs::read(a.path().join("sample.json")).unwrap();
    assert_eq!(ja, std::fs::read(b.path().join("sample.json")).unwrap());
    let j = json(&a.path().join("sample.json"));
    assert_eq!(j["header"]["seed"], 7);
    let gaps = j["result"]["marginal"]["gap_in_std_errors"]
        .as_array()
        .unwrap();
    assert_eq!(gaps.len(), 20);

    let o = run(
        a.path(),
        &["sample", "--potential", GAUSS, "--n", "4", "--steps", "0"],
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn config_file_and_overrides() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.json");
    std::fs::write(&cfg, r#"{"potential": "0,0,0.5", "q": 2}"#).unwrap();
    let c = cfg.to_str().unwrap();
    let o = run(d.path(), &["equilibrium", "--config", c]);
    assert_eq!(code(&o), 2);
    let o = run(d.path(), &["equilibrium", "--config", c, "--q", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    std::fs::write(&cfg, r#"{"potential": "0,0,0.5", "q": 1, "colour": "red"}"#).unwrap();
    let o = run(d.path(), &["equilibrium", "--config", c]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("colour"));
}

#[test]
fn verify_command() {
    let d = tempfile::tempdir().unwrap();
    // criterion 8 is documented red; every other criterion must pass the fast tier
    let o = run(
        d.path(),
        &[
            "verify",
            "--tier",
            "fast",
            "--only",
            "1,2,3,4,5,6,7,9,10,11",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_eq!(
        stdout(&o).lines().filter(|l| l.contains(" PASS ")).count(),
        10
    );

    let o = run(
        d.path(),
        &["verify", "--tier", "fast", "--only", "3", "--tamper", "3"],
    );
    assert_ne!(code(&o), 0);
    assert!(stdout(&o).contains("failed criteria: 3 (Selberg values against brute force)"));

    let o = run(d.path(), &["verify", "--tier", "full", "--only", "1"]);
    assert_eq!(code(&o), 0);
    let j = json(&d.path().join("verify.json"));
    assert!(j["result"]["criteria"][0]["seconds"].as_f64().unwrap() >= 0.0);
    assert!(stdout(&o).contains(" s of 10 s"));

    let o = run(d.path(), &["verify", "--only", "12"]);
    assert_eq!(code(&o), 1);
}
