//! End-to-end runs of the binary against pinned z^2 fixtures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

const COMMANDS: [(&str, &[&str]); 6] = [
    ("iterate", &["orbit.csv"]),
    ("slice", &["slice.csv", "slice.png"]),
    ("degenerate", &["sweep.csv"]),
    ("certify", &["cone_report.json"]),
    ("partition", &["partition.csv", "partition.json"]),
    ("hyperbolic1d", &["hyperbolic1d.json"]),
];

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_shiftlab"))
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn golden_outputs_match() {
    let tmp = tempfile::tempdir().unwrap();
    for (cmd, files) in COMMANDS {
        let out = tmp.path().join(cmd);
        let res = run(cmd, &fixtures().join(format!("{cmd}.conf")), &out, &[]);
        assert!(res.status.success(), "{cmd}: {}", String::from_utf8_lossy(&res.stderr));
        for f in files {
            let got = fs::read(out.join(f)).unwrap();
            let want = fs::read(fixtures().join("golden").join(cmd).join(f)).unwrap();
            assert!(got == want, "{cmd}/{f} differs from the golden file");
        }
    }
}

#[test]
fn reruns_are_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    for (cmd, files) in COMMANDS {
        let conf = fixtures().join(format!("{cmd}.conf"));
        let (a, b) = (tmp.path().join(format!("{cmd}-a")), tmp.path().join(format!("{cmd}-b")));
        assert!(run(cmd, &conf, &a, &["--seed", "11", "--threads", "1"]).status.success());
        assert!(run(cmd, &conf, &b, &["--seed", "11", "--threads", "3"]).status.success());
        for f in files {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{cmd}/{f}");
        }
    }
}

#[test]
fn seed_changes_sampled_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = fixtures().join("partition.conf");
    assert!(run("partition", &conf, &tmp.path().join("a"), &["--seed", "1"]).status.success());
    assert!(run("partition", &conf, &tmp.path().join("b"), &["--seed", "2"]).status.success());
    assert_ne!(
        fs::read(tmp.path().join("a/partition.csv")).unwrap(),
        fs::read(tmp.path().join("b/partition.csv")).unwrap()
    );
}

#[test]
fn headers_and_schemas() {
    let g = fixtures().join("golden");
    assert_eq!(first_line(&g.join("iterate/orbit.csv")), "step,z1_re,z1_im,z2_re,z2_im,z3_re,z3_im,label");
    assert_eq!(first_line(&g.join("slice/slice.csv")), "x_index,y_index,g_plus,g_minus,verdict");
    assert_eq!(
        first_line(&g.join("degenerate/sweep.csv")),
        "a,hausdorff,sup_Ha_minus_F,lyapunov,lyapunov_stderr,samples,n"
    );
    assert_eq!(
        first_line(&g.join("partition/partition.csv")),
        "index,label,group,violation,limit_clusters,z1_re,z1_im,z2_re,z2_im,z3_re,z3_im"
    );
    let report = fs::read_to_string(g.join("certify/cone_report.json")).unwrap();
    let keys = ["samples", "pass_u", "pass_s", "min_expansion", "max_contraction", "rho1", "N", "a", "violations"];
    let pos: Vec<usize> = keys.iter().map(|k| report.find(&format!("\"{k}\":")).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]), "{report}");
    let part: serde_json::Value = serde_json::from_slice(&fs::read(g.join("partition/partition.json")).unwrap()).unwrap();
    assert_eq!(part["violations"], 0);
    let hyp: serde_json::Value = serde_json::from_slice(&fs::read(g.join("hyperbolic1d/hyperbolic1d.json")).unwrap()).unwrap();
    assert_eq!(hyp["verdict"]["is_hyperbolic"], true);
    assert_eq!(hyp["divergence"]["passed"], true);
    assert!(hyp["threshold"].as_f64().unwrap() > 0.0);
}

#[test]
fn iterate_rows_and_labels() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("zero.conf");
    fs::write(&conf, "k = 3\nnu = 2\na_re = 0.3\ncoeffs = 0,0;0,0;1,0\nsteps = 9\n").unwrap();
    assert!(run("iterate", &conf, tmp.path(), &[]).status.success());
    let text = fs::read_to_string(tmp.path().join("orbit.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r.ends_with(",0.0,0.0,0.0,0.0,0.0,0.0,Inner")));
    let golden = fs::read_to_string(fixtures().join("golden/iterate/orbit.csv")).unwrap();
    assert!(golden.lines().last().unwrap().contains("PlusCone"));
}

#[test]
fn slice_counts_and_green_zero_near_origin() {
    let g = fixtures().join("golden/slice");
    let mut rdr = csv::Reader::from_path(g.join("slice.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 24 * 16);
    let centre = rows
        .iter()
        .find(|r| (&r[0], &r[1]) == ("12", "8"))
        .unwrap();
    assert_eq!(&centre[2], "0.0");
    let img = image::open(g.join("slice.png")).unwrap();
    assert_eq!((img.width(), img.height()), (24, 16));
}

#[test]
fn error_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.conf");
    fs::write(&bad, "k = 3\nnu = 4\ncoeffs = 0,0;0,0;1,0\n").unwrap();
    let res = run("iterate", &bad, tmp.path(), &[]);
    assert_eq!(res.status.code(), Some(2));
    let body: serde_json::Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(body["error"], "type_out_of_range");
    assert_eq!(body["exit_code"], 2);

    let flat = tmp.path().join("flat.conf");
    fs::write(&flat, "k = 3\nnu = 2\na_re = 0.01\ncoeffs = 2,0;0,0;1,0\nper_label = 5\ncloud_size = 500\n").unwrap();
    let res = run("certify", &flat, tmp.path(), &[]);
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
    let body: serde_json::Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(body["exit_code"], 3);
    assert!(!tmp.path().join("cone_report.json").exists());
}
