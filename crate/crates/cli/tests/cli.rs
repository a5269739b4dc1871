use std::process::Command;

fn koppelman(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_koppelman")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn report(stdout: &str) -> serde_json::Value {
    serde_json::from_str(stdout).unwrap()
}

#[test]
fn identities_on_p2_pass() {
    let (code, out, _) = koppelman(&["verify-identities", "--n", "2"]);
    assert_eq!(code, 0);
    let r = report(&out);
    assert_eq!(r["passed"], true);
    assert!(r["notes"].as_array().unwrap().iter().any(|n| n.as_str().unwrap().contains("cusp")));
}

#[test]
fn twist_below_threshold_is_an_input_error() {
    let (code, _, err) = koppelman(&["solve", "--twist", "0"]);
    assert_eq!(code, 2);
    assert!(err.contains("s ≥ κ₀ − N"), "{err}");
}

#[test]
fn fermat_kernel_regression_with_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("k.csv");
    let (code, out, _) = koppelman(&["kernel", "--grid", "4", "--csv", csv.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(report(&out)["passed"], true);
    let text = std::fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t_re,t_im,tau_re,tau_im,sheet_t,sheet_tau,re_k,im_k");
    assert_eq!(lines.count(), 4 * 4 * 3 * 4);
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, r#"{"kind": "hefer", "curve": "zeta0^2", "grdi": [8]}"#).unwrap();
    let (code, _, err) = koppelman(&["run", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("unknown field"), "{err}");
}

#[test]
fn config_run_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    let out = dir.path().join("r.json");
    let cfg = serde_json::json!({
        "kind": "hefer",
        "curve": "zeta0*zeta1 + zeta2^2",
        "outputs": {"report": out}
    });
    std::fs::write(&path, cfg.to_string()).unwrap();
    let (code, _, _) = koppelman(&["run", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(r["scenario"], "hefer");
    assert_eq!(r["notes"].as_array().unwrap().len(), 3);
}

#[test]
fn tolerance_failure_exits_one() {
    let (code, out, _) = koppelman(&["extend", "--grid", "8", "--tol", "1e-12"]);
    assert_eq!(code, 1);
    assert_eq!(report(&out)["passed"], false);
}

#[test]
fn unit_moment_is_obstructed() {
    let den = "(-pi2i*(zeta0*Zeta0+zeta1*Zeta1)^2)";
    let phi = format!("-Zeta1/{den};Zeta0/{den}");
    let (code, out, err) = koppelman(&["pn-solve", "--twist", "-2", "--grid", "8,16", "--phi", &phi, "--tol", "1"]);
    assert_eq!(code, 1);
    assert!(err.contains("nonzero obstruction"), "{err}");
    let r = report(&out);
    assert_eq!(r["slopes"][0]["converging"], false);
}

#[test]
fn convergence_table_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    let (code, out, _) = koppelman(&[
        "pn-solve",
        "--twist",
        "0",
        "--psi",
        "zeta0*Zeta1/(zeta0*Zeta0+zeta1*Zeta1)",
        "--grid",
        "8,16,32",
        "--tol",
        "1e-3",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{out}");
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("grid,residual\n8,"));
}
