use std::path::Path;
use std::process::{Command, Output};

fn lodkit(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lodkit"))
        .args(args)
        .current_dir(cwd)
        .env_remove("LODKIT_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &[&str] = &[
    "two-layer",
    "--data",
    "synthetic",
    "--ny",
    "1..3",
    "--patches",
    "12,10;12,12",
    "--restarts",
    "2",
    "--max-iters",
    "80",
];

#[test]
fn golden_subcommand_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = lodkit(&["table2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    for key in ["lod_p1", "mi_p1", "lod_p2", "mi_p2"] {
        assert!(out.contains(&format!("PASS {key}")), "{out}");
    }
    assert!(out.contains("0.0136"));
    assert!(out.contains("0.1293"));
}

#[test]
fn oracle_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = lodkit(&["oracle"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("assignments: 729"));
    assert!(out.contains("{x1,x2} {x3,x4} {x5,x6}"));
    assert!(out.contains("{x1,x6} {x2,x5} {x3,x4}"));
    assert!(!out.contains("FAIL"));
}

#[test]
fn bad_arguments_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lodkit(&["two-layer", "--ny", "x"], dir.path()).status.code(), Some(1));
    assert_eq!(
        lodkit(&["two-layer", "--models", "sl,zz"], dir.path()).status.code(),
        Some(1)
    );
    assert_eq!(
        lodkit(&["two-layer", "--patches", "12,10;12,11"], dir.path())
            .status
            .code(),
        Some(1)
    );
    assert_eq!(lodkit(&["no-such-command"], dir.path()).status.code(), Some(1));
    assert_eq!(lodkit(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn missing_data_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = lodkit(&["two-layer", "--data", "mnist", "--mnist-dir", "nowhere"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("train-images-idx3-ubyte.gz"), "{}", stderr(&o));

    let o = lodkit(&["stack", "--from", "nowhere"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("two-layer"));
}

#[test]
fn two_layer_then_stack() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = SMALL.to_vec();
    args.extend(["--out", "a"]);
    let o = lodkit(&args, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let raw = std::fs::read_to_string(dir.path().join("a/two_layer_raw.csv")).unwrap();
    let lines: Vec<&str> = raw.lines().collect();
    assert!(lines[0].starts_with("patch_set,kind,n_y,latent_states,loglik,mi,lod"));
    assert_eq!(lines.len(), 1 + 2 * 4 * 3);
    let fp = lines[0].split(',').position(|c| c == "fingerprint").unwrap();
    let fps: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(fp).unwrap()).collect();
    assert!(fps.iter().all(|f| f.len() == 16 && *f == fps[0]));
    let sl3 = lines.iter().find(|l| l.starts_with("0,SL,3,")).unwrap();
    assert_eq!(sl3.split(',').nth(3), Some("8"));
    assert!(dir.path().join("a/two_layer_adjusted.csv").is_file());
    assert!(dir.path().join("a/two_layer_summary.csv").is_file());
    assert!(dir.path().join("a/run.json").is_file());
    assert!(dir.path().join("a/models/ici_ny3_patch1.json").is_file());

    // same invocation, same bytes
    let mut again = SMALL.to_vec();
    again.extend(["--out", "b"]);
    assert_eq!(lodkit(&again, dir.path()).status.code(), Some(0));
    for f in ["two_layer_raw.csv", "two_layer_adjusted.csv", "two_layer_summary.csv"] {
        assert_eq!(
            std::fs::read(dir.path().join("a").join(f)).unwrap(),
            std::fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }

    let stack = [
        "stack",
        "--from",
        "a",
        "--ny",
        "3",
        "--restarts",
        "2",
        "--candidates",
        "3",
        "--max-iters",
        "80",
    ];
    let o = lodkit(&[&stack[..], &["--out", "s1"]].concat(), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = std::fs::read_to_string(dir.path().join("s1/stack.csv")).unwrap();
    assert!(rows.starts_with("lower_kind,n_y,k_z,patch_set,lod_xy,lod_xz,mi_xy,mi_xz,higher_loglik"));
    assert_eq!(rows.lines().count(), 1 + 4 * 2);
    let corr = std::fs::read_to_string(dir.path().join("s1/correlations.csv")).unwrap();
    assert_eq!(corr.lines().count(), 1 + 4 * 2);
    assert!(corr.starts_with("model,score_kind,r,p,n"));

    assert_eq!(
        lodkit(&[&stack[..], &["--out", "s2"]].concat(), dir.path())
            .status
            .code(),
        Some(0)
    );
    for f in ["stack.csv", "correlations.csv", "bijections.csv"] {
        assert_eq!(
            std::fs::read(dir.path().join("s1").join(f)).unwrap(),
            std::fs::read(dir.path().join("s2").join(f)).unwrap(),
            "{f}"
        );
    }

    std::fs::remove_file(dir.path().join("a/models/ci_ny3_patch0.json")).unwrap();
    let o = lodkit(&[&stack[..], &["--out", "s3"]].concat(), dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ci_ny3_patch0.json"), "{}", stderr(&o));
}

#[test]
fn reads_mnist_idx_from_data_dir() {
    let dir = tempfile::tempdir().unwrap();
    let mnist = dir.path().join("mnist");
    std::fs::create_dir(&mnist).unwrap();
    let (n, side) = (50u32, 28usize);
    let mut bytes = Vec::new();
    for v in [0x0803u32, n, side as u32, side as u32] {
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    bytes.extend((0..n as usize * side * side).map(|i| (i * 37 % 256) as u8));
    std::fs::write(mnist.join("train-images-idx3-ubyte"), bytes).unwrap();

    let o = Command::new(env!("CARGO_BIN_EXE_lodkit"))
        .args([
            "two-layer",
            "--ny",
            "1",
            "--patches",
            "0,0",
            "--restarts",
            "1",
            "--max-iters",
            "10",
            "--out",
            "o",
        ])
        .current_dir(dir.path())
        .env("LODKIT_DATA_DIR", &mnist)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let run = std::fs::read_to_string(dir.path().join("o/run.json")).unwrap();
    assert!(run.contains("\"mnist:"));
    let ds = std::fs::read_to_string(dir.path().join("o/datasets/patch0.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&ds).unwrap();
    let total: u64 = doc["counts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c.as_u64().unwrap())
        .sum();
    assert_eq!(total, 50);
}
