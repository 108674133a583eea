//! End-to-end runs of the `forgevqe` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn forgevqe(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forgevqe"))
        .args(args)
        .current_dir(cwd)
        .env_remove("FORGEVQE_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

/// Diagonal one-body model: the (2, 2) ground state is the product state
/// with the two lowest orbitals of each species filled.
const PRODUCT_SHELL: &str = "# one-body only\norbitals 8 core none\n\
    sp 0 -4.0\nsp 1 -3.0\nsp 2 -2.0\nsp 3 -1.0\nsp 4 -4.5\nsp 5 -3.5\nsp 6 -2.5\nsp 7 -1.5\n";

const TFIM_CONFIG: &str = r#"{
    "model": {"model": "tfim_1d", "n": 6},
    "pairs": {"source": "select", "selection": {"k": 4, "g_size": 8, "max_iters": 20, "train": {"epochs": 5}}},
    "ansatz": {"kind": "hardware_efficient", "depth": 2},
    "vqe": {"pretrain_epochs": 10, "max_epochs": 20},
    "outputs": {"dir": "out"}
}"#;

#[test]
fn configuration_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"model": {"model": "tfim_1d", "n": 6}, "surprise": true}"#);
    let out = forgevqe(&["exact", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("surprise"));

    let out = forgevqe(&["exact", "--config", "missing.json"], dir.path());
    assert_eq!(code(&out), 2);

    let odd = write(dir.path(), "odd.json", r#"{"model": {"model": "tfim_1d", "n": 5}}"#);
    assert_eq!(code(&forgevqe(&["exact", "--config", odd.to_str().unwrap()], dir.path())), 2);

    let out = forgevqe(&["vqe"], dir.path());
    assert_eq!(code(&out), 2, "clap usage errors also exit with 2");
}

#[test]
fn reruns_are_byte_identical_and_stdout_has_no_timing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tfim.json", TFIM_CONFIG);
    let cfg = cfg.to_str().unwrap();
    let run = |cmd: &str| {
        let out = forgevqe(&[cmd, "--config", cfg, "--seed", "3", "--threads", "1"], dir.path());
        assert!(matches!(code(&out), 0 | 3), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stderr).contains("elapsed"));
        out.stdout
    };
    let snapshot = || {
        let mut files: Vec<(PathBuf, Vec<u8>)> = fs::read_dir(dir.path().join("out"))
            .unwrap()
            .map(|e| e.unwrap().path())
            .map(|p| (p.clone(), fs::read(&p).unwrap()))
            .collect();
        files.sort();
        files
    };
    let first_stdout: Vec<Vec<u8>> = ["select", "exact", "vqe"].iter().map(|c| run(c)).collect();
    let first = snapshot();
    fs::remove_dir_all(dir.path().join("out")).unwrap();
    let second_stdout: Vec<Vec<u8>> = ["select", "exact", "vqe"].iter().map(|c| run(c)).collect();
    assert_eq!(first, snapshot());
    assert_eq!(first_stdout, second_stdout);
}

#[test]
fn product_model_selects_its_single_pair_and_converges() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "product.int", PRODUCT_SHELL);
    let select = write(
        dir.path(),
        "select.json",
        r#"{
            "model": {"model": "shell_model", "path": "product.int", "protons": 2, "neutrons": 2},
            "pairs": {"source": "select", "selection": {"k": 2, "g_size": 8, "max_iters": 30, "sector": [2, 2],
                                                         "train": {"epochs": 5}}},
            "ansatz": {"kind": "excitation_preserving", "depth": 2},
            "outputs": {"dir": "select"}
        }"#,
    );
    let out = forgevqe(&["select", "--config", select.to_str().unwrap()], dir.path());
    assert!(matches!(code(&out), 0 | 3), "{}", String::from_utf8_lossy(&out.stderr));
    let set = fs::read_to_string(dir.path().join("select/set.txt")).unwrap();
    let first: Vec<&str> = set.lines().find(|l| !l.starts_with('#')).unwrap().split_whitespace().collect();
    assert_eq!(&first[..2], ["1100", "1100"]);
    assert!((first[2].parse::<f64>().unwrap().abs() - 1.0).abs() < 1e-9);

    let vqe = write(
        dir.path(),
        "vqe.json",
        r#"{
            "model": {"model": "shell_model", "path": "product.int", "protons": 2, "neutrons": 2},
            "pairs": {"source": "file", "path": "select/set.txt"},
            "ansatz": {"kind": "excitation_preserving", "depth": 2},
            "vqe": {"pretrain_epochs": 0, "max_epochs": 600, "lambda_update_period": 1,
                    "lambda_optimizer": "exact_solve"},
            "outputs": {"dir": "vqe"}
        }"#,
    );
    let out = forgevqe(&["vqe", "--config", vqe.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("vqe/result.json")).unwrap()).unwrap();
    assert_eq!(result["exact_energy"].as_f64().unwrap(), -15.0);
    let delta = result["final_delta"].as_f64().unwrap();
    assert!(delta < 1e-6, "delta {delta}");

    let out = forgevqe(&["entropy", "--result", "vqe/result.json"], dir.path());
    assert_eq!(code(&out), 0);
    assert!(dir.path().join("vqe/entropy.csv").is_file());
    let out = forgevqe(&["correlators", "--config", vqe.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = forgevqe(&["score", "--config", vqe.to_str().unwrap(), "--set", "select/set.txt"], dir.path());
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("hits"));
}
