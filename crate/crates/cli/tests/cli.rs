use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn workdir(name: &str) -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn iqp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iqp")).current_dir(dir).args(args).output().unwrap()
}

#[test]
fn overhead_csv() {
    let d = workdir("overhead");
    assert!(iqp(&d, &["report", "overhead", "--n", "16", "--modes", "1,3", "--out", "o.csv"]).status.success());
    let text = std::fs::read_to_string(d.join("o.csv")).unwrap();
    assert_eq!(
        text.lines().collect::<Vec<_>>(),
        [
            "n,base_params,modes,controller_params,overhead_percent",
            "16,14892,1,45,0.3022",
            "16,14892,3,135,0.9065"
        ]
    );
}

#[test]
fn exit_codes() {
    let d = workdir("exit");
    assert_eq!(iqp(&d, &["frobnicate"]).status.code(), Some(2));
    assert_eq!(iqp(&d, &["sample", "--circuit", "missing.iqp", "--out", "s.txt"]).status.code(), Some(3));
    std::fs::write(d.join("bad.iqp"), "garbage\n").unwrap();
    assert_eq!(iqp(&d, &["sample", "--circuit", "bad.iqp", "--out", "s.txt"]).status.code(), Some(5));
}

#[test]
fn export_and_sample() {
    let d = workdir("export");
    std::fs::write(d.join("run.toml"), "[train]\nmax_iters = 5\nmc_samples = 100\nsubsets = 8\n[base]\nmax_order = 2\n").unwrap();
    let steps: [&[&str]; 4] = [
        &["gen-data", "blob", "--samples", "200", "--seed", "1", "--out", "blob.txt"],
        &["train-base", "--data", "blob.txt", "--config", "run.toml", "--seed", "2", "--out", "base.iqp"],
        &["export-qasm", "--circuit", "base.iqp", "--out", "base.qasm"],
        &["sample", "--circuit", "base.iqp", "--shots", "50", "--seed", "3", "--out", "s.txt"],
    ];
    for args in steps {
        let out = iqp(&d, args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let qasm = std::fs::read_to_string(d.join("base.qasm")).unwrap();
    assert!(qasm.starts_with("OPENQASM"));
    assert!(qasm.contains("rz("));
    let lines: Vec<String> = std::fs::read_to_string(d.join("s.txt")).unwrap().lines().map(String::from).collect();
    assert!(lines.iter().filter(|l| !l.starts_with('#')).count() >= 50);
    assert!(d.join("base.iqp.history.csv").exists());
    assert!(d.join("base.iqp.manifest.json").exists());
}
