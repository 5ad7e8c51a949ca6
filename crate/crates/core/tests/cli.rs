use std::fs;
use std::process::Command;

fn mrdg() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mrdg"))
}

fn header(path: &std::path::Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap_or_default().to_string()
}

#[test]
fn run_writes_documented_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("burgers");
    let status = mrdg()
        .args(["run", "--model", "burgers", "--levels", "2", "--tfinal", "0.05", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(header(&out.join("grid.csv")), "level,ix,ixi,x0,x1,xi0,xi1");
    assert_eq!(header(&out.join("solution.csv")), "level,ix,ixi,component,i1,i2,coefficient");
    assert_eq!(header(&out.join("field.csv")), "x,xi,component,value");
    assert_eq!(header(&out.join("leaf_counts.csv")), "step,t,leaves");
    for label in ["uniform", "normal_0.5_0.15", "beta_2_5", "beta_2_20"] {
        let m = out.join(format!("moments_{label}_u.csv"));
        assert_eq!(header(&m), "x,mean,variance,mean_minus_std,mean_plus_std");
    }
    let meta = fs::read_to_string(out.join("metadata.txt")).unwrap();
    for key in ["steps = ", "n_total = ", "wall_time_s = ", "t_final = 0.05"] {
        assert!(meta.contains(key), "{key} missing from {meta}");
    }
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("grid.csv") && manifest.contains("levels = 2") && manifest.contains("tfinal = 0.05"));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        let out = dir.path().join(format!("t{threads}"));
        let status = mrdg()
            .args(["run", "--model", "euler", "--levels", "2", "--tfinal", "0.02", "--threads", threads, "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        out
    };
    let a = run("1");
    let b = run("3");
    for f in ["grid.csv", "solution.csv", "field.csv", "moments_beta_2_5_rho.csv", "leaf_counts.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_file_and_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "model = \"burgers\"\nlevels = \"1\"\ntfinal = 0.3\nn0_x = 4\nn0_xi = 4\n").unwrap();
    let out = dir.path().join("o");
    let status =
        mrdg().arg("run").arg("--config").arg(&cfg).args(["--tfinal", "0.01", "--out"]).arg(&out).status().unwrap();
    assert!(status.success());
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("tfinal = 0.01"));
    assert!(manifest.contains("n0_x = 4"));
}

#[test]
fn error_study_and_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eoc");
    let o = mrdg()
        .args(["eoc", "--levels", "1,2", "--ref-levels", "3", "--tfinal", "0.05", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("errors.csv")).unwrap();
    assert!(csv.starts_with("mode,distribution,L,n_total,sol_u,sol_u_eoc,exp_u,exp_u_eoc,var_u,var_u_eoc"));
    assert_eq!(csv.lines().count(), 1 + 2 * 4);

    let out = dir.path().join("ratio");
    let o = mrdg()
        .args(["ratio", "--dist", "uniform", "--levels", "2", "--tfinal", "0.05", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success());
    let ratio = fs::read_to_string(out.join("ratio.txt")).unwrap();
    assert!(ratio.contains("ratio = 1\n"), "{ratio}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| mrdg().args(args).output().unwrap().status.code();
    assert_eq!(code(&["run", "--mode", "sideways"]), Some(2));
    assert_eq!(code(&["run", "--cfl", "-1"]), Some(2));
    assert_eq!(code(&["eoc", "--levels", "3", "--ref-levels", "3"]), Some(2));
    let missing = dir.path().join("none.toml");
    assert_eq!(code(&["run", "--config", missing.to_str().unwrap()]), Some(4));
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let nested = blocker.join("out");
    assert_eq!(code(&["run", "--levels", "1", "--tfinal", "0.01", "--out", nested.to_str().unwrap()]), Some(4));
    // Unstable time step: the Sod run loses positivity.
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "model = \"euler\"\nlevels = \"3\"\ncfl = 1.0\n").unwrap();
    let c = code(&["run", "--config", bad.to_str().unwrap(), "--out", dir.path().join("b").to_str().unwrap()]);
    assert_eq!(c, Some(3));
}
