use std::path::Path;
use std::process::{Command, Output};

const MEDIUM: &str = r#"
[grid]
nx = 32
nz = 32
dx = 1.0
dz = 1.0
taper_width = 4

[time]
scheme = "strang"
cfl = 0.4
n_steps = 40

[[layers]]
z_begin = 0
z_end = 32
c11 = 3.0
c13 = 1.0
c33 = 3.0
c55 = 1.0
alpha1 = 0.5
alpha3 = 0.5
biot_modulus = 2.0
rho = 2.0
rho_f = 1.0
phi = 0.5
t1 = 1.0
t3 = 1.0
k1 = 1.0
k3 = 1.0
eta = 0.1
"#;

fn poro(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_poro"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

#[test]
fn run_writes_traces_log_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        r#"{MEDIUM}
[[sources]]
kind = "moment_tensor"
mxx = 1.0
mzz = 1.0
mxz = 0.0
x = 16.0
z = 16.0
[sources.wavelet]
type = "ricker"
f0 = 0.1
t0 = 12.0
amp = 1.0

[[receivers]]
channel = "p"
x = 20.0
z = 16.0
label = "p0"

[output]
trace_path = "out/traces.csv"
snapshot_stride = 20
snapshot_dir = "out/snaps"
snapshot_fields = ["p"]
log_path = "out/run.log"
"#
    );
    let name = write(dir.path(), "run.toml", &cfg);
    let out = poro(&["run", &name, "--steps", "20"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/traces.csv")).unwrap();
    assert!(csv.contains("columns=time,p0"));
    assert_eq!(csv.lines().filter(|l| !l.contains('=')).count(), 20);
    assert!(dir.path().join("out/snaps/p_000020.bin").exists());
    assert!(std::fs::read_to_string(dir.path().join("out/run.log")).unwrap().contains("dt="));
}

#[test]
fn verify_reports_pass_and_rejects_unknown_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let name = write(dir.path(), "smooth.toml", MEDIUM);
    let out = poro(&["verify", "strang_symmetry", &name], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.contains("PASS forward-backward defect"));
    let out = poro(&["verify", "bogus", &name], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reciprocity_passes_and_fails_by_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        r#"{MEDIUM}
[reciprocity]
r_a = [12.5, 12.0]
r_b = [20.0, 20.5]
force = 1.0
window = [0.0, 1e9]
[reciprocity.wavelet]
type = "ricker"
f0 = 0.1
t0 = 12.0
amp = 1.0
"#
    );
    let name = write(dir.path(), "recip.toml", &cfg);
    let out = poro(&["reciprocity", &name], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.starts_with("PASS"));
    // a negative tolerance cannot be met
    let out = poro(&["reciprocity", &name, "--tol=-1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let name = write(dir.path(), "bad.toml", &MEDIUM.replace("cfl = 0.4", "cfl = 2.0"));
    let out = poro(&["run", &name], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let out = poro(&["run", "missing.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
