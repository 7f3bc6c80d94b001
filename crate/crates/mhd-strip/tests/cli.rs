//! Black-box tests of the command-line interface: exit codes, the
//! stdin config path, and the files a run leaves behind.

use std::io::Write;
use std::process::{Command, Stdio};

const EXE: &str = env!("CARGO_BIN_EXE_mhd-strip");

const SMALL_CONFIG: &str = r#"{
  "grid": {"nx": 16, "ny": 16, "ymax": 8.0},
  "time": {"horizon": 0.1, "store_dt": 0.01, "report_dt": 0.05},
  "sweep": {"epsilon_list": [0.1, 0.01]}
}"#;

#[test]
fn reference_config_pipes_into_run() {
    let reference = Command::new(EXE).arg("reference-config").output().unwrap();
    assert!(reference.status.success());
    // the reference config parses from stdin; use a shortened horizon so
    // the piped run stays quick
    let dir = tempfile::tempdir().unwrap();
    let mut child = Command::new(EXE)
        .current_dir(dir.path())
        .args(["run", "--config", "-", "--epsilon", "0.01"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .as_mut()
        .unwrap()
        .write_all(SMALL_CONFIG.as_bytes())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success(), "{out:?}");
    assert!(dir.path().join("out/eps_1e-2/norms.csv").exists());
    assert!(dir.path().join("out/eps_1e-2/diagnostics.csv").exists());
}

#[test]
fn run_requires_exactly_one_mode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, SMALL_CONFIG).unwrap();
    let neither = Command::new(EXE)
        .current_dir(dir.path())
        .args(["run", "--config", "c.json"])
        .output()
        .unwrap();
    assert_eq!(neither.status.code(), Some(1));
    let both = Command::new(EXE)
        .current_dir(dir.path())
        .args(["run", "--config", "c.json", "--epsilon", "0.1", "--ideal"])
        .output()
        .unwrap();
    assert_eq!(both.status.code(), Some(1));
    let bad_eps = Command::new(EXE)
        .current_dir(dir.path())
        .args(["run", "--config", "c.json", "--epsilon", "2.0"])
        .output()
        .unwrap();
    assert_eq!(bad_eps.status.code(), Some(1));
}

#[test]
fn invalid_configs_exit_one_with_pointer_paths() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"physics": {"mu": 0.0}}"#).unwrap();
    let out = Command::new(EXE)
        .current_dir(dir.path())
        .args(["run", "--config", "bad.json", "--ideal"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/physics/mu"), "{err}");

    std::fs::write(&cfg, r#"{"viscocity": 1.0}"#).unwrap();
    let out = Command::new(EXE)
        .current_dir(dir.path())
        .args(["sweep", "--config", "bad.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("viscocity"));
}

#[test]
fn solver_abort_exits_two() {
    // a near-vacuum bump with a strong velocity kick loses density
    // positivity within a few steps
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("blowup.json");
    std::fs::write(
        &cfg,
        r#"{
          "grid": {"nx": 16, "ny": 16, "ymax": 8.0},
          "initial": {"amplitude": 0.9, "modes": [{"kx": 1, "profile": "bump",
                      "coeffs": {"rho": -1.0, "v1": 6.0, "v2": 4.0, "psi": 2.0}}]},
          "time": {"horizon": 2.0, "cfl_adv": 0.9, "cfl_visc": 0.9,
                   "store_dt": 0.05, "report_dt": 0.1},
          "stabilization": {"filter_coeff": 0.0}
        }"#,
    )
    .unwrap();
    let out = Command::new(EXE)
        .current_dir(dir.path())
        .args(["run", "--config", "blowup.json", "--ideal"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn dump_fields_writes_binary_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{
          "grid": {"nx": 16, "ny": 16, "ymax": 8.0},
          "time": {"horizon": 0.1, "store_dt": 0.01, "report_dt": 0.05},
          "output": {"dump_fields": true}
        }"#,
    )
    .unwrap();
    let out = Command::new(EXE)
        .current_dir(dir.path())
        .args(["run", "--config", "c.json", "--ideal"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let dump = std::fs::read(dir.path().join("out/ideal/fields_final.bin")).unwrap();
    let header_end = dump.iter().position(|&b| b == b'\n').unwrap();
    let header = String::from_utf8_lossy(&dump[..header_end]);
    assert!(header.starts_with("MHDC1 16 16 "), "{header}");
    assert_eq!(dump.len() - header_end - 1, 5 * 16 * 16 * 8);
}

#[test]
fn mms_rejects_single_level() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, SMALL_CONFIG).unwrap();
    let out = Command::new(EXE)
        .current_dir(dir.path())
        .args(["mms", "--config", "c.json", "--levels", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_passes_on_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, "{}").unwrap();
    let out = Command::new(EXE)
        .current_dir(dir.path())
        .args(["verify", "--config", "c.json"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("all 24 checks passed"), "{text}");
}
