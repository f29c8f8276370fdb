use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gof_harness::records::{parse_power_csv, POWER_HEADER, VARIANCE_HEADER};

fn gof(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gof"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("running gof")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn grid_file(dir: &Path, name: &str, rows: usize, shift: f64, sep: &str) -> PathBuf {
    // deterministic scattered points in 2D
    let text: String = (0..rows)
        .map(|i| {
            let a = ((i * 37 + 11) % 101) as f64 / 101.0 - 0.5;
            let b = ((i * 59 + 7) % 103) as f64 / 103.0 - 0.5;
            format!("{}{sep}{}\n", a + shift, b + shift)
        })
        .collect();
    write(dir, name, &text)
}

const SMALL_PLAN: &str = "family = \"gaussian_mean\"\nd = 2\nn = 20\nm = 24\nN = 10\nreps = 4\nB = 19\nseed = 5\n\
                          methods = [\"spectral_perm\", \"energy_perm\"]\nthetas = [0.0, 0.5, 1.0]\n";

#[test]
fn one_shot_test_reports_outcome_json() {
    let dir = tempfile::tempdir().unwrap();
    let x = grid_file(dir.path(), "x.csv", 40, 3.0, ",");
    let y = grid_file(dir.path(), "y.txt", 50, 0.0, " ");
    let d = grid_file(dir.path(), "d.txt", 20, 0.1, "\t");
    for extra in [
        &["--calibration", "perm"][..],
        &["--calibration", "effdim"],
        &["--lambda-grid", "0.001:0.1", "--bandwidth-grid", "0.5:2"],
    ] {
        let mut args = vec![
            "test",
            "--x",
            path(&x),
            "--y",
            path(&y),
            "--reference",
            path(&d),
        ];
        args.extend_from_slice(extra);
        let out = gof(&args);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let json = String::from_utf8(out.stdout).unwrap();
        assert!(json.contains("\"statistic\""), "{json}");
        if extra[1] != "effdim" {
            assert!(json.contains("\"decision\": \"reject\""), "{json}");
        }
    }
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let bad_alpha = write(
        dir.path(),
        "a.toml",
        "family = \"vmf\"\nd = 3\nalpha = 1.5\n",
    );
    let out = gof(&[
        "power",
        "--plan",
        path(&bad_alpha),
        "--out",
        path(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha must lie in (0,1)"));

    let typo = write(dir.path(), "b.toml", "family = \"vmf\"\nd = 3\nrepz = 3\n");
    let out = gof(&["size", "--plan", path(&typo)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("repz"));

    let x = write(dir.path(), "x.csv", "1,2\n3\n");
    let y = grid_file(dir.path(), "y.csv", 10, 0.0, ",");
    let out = gof(&[
        "test",
        "--x",
        path(&x),
        "--y",
        path(&y),
        "--reference",
        path(&y),
    ]);
    assert_eq!(out.status.code(), Some(3));

    let csv = write(dir.path(), "p.csv", &format!("{POWER_HEADER}\n"));
    let out = gof(&["plot", path(&csv), "--out", path(&dir.path().join("plots"))]);
    assert_eq!(out.status.code(), Some(3));

    let out = gof(&["power"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn manifest_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write(dir.path(), "plan.toml", SMALL_PLAN);
    let first = dir.path().join("first");
    let out = gof(&["power", "--plan", path(&plan), "--out", path(&first)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let second = dir.path().join("second");
    let out = gof(&[
        "power",
        "--plan",
        path(&first.join("manifest.toml")),
        "--out",
        path(&second),
        "--threads",
        "2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in ["power.csv", "gaussian_mean_d2.svg"] {
        assert_eq!(
            std::fs::read(first.join(f)).unwrap(),
            std::fs::read(second.join(f)).unwrap(),
            "{f}"
        );
    }
    let rows = parse_power_csv(&std::fs::read_to_string(first.join("power.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2 * 3);
    assert!(rows.iter().all(|r| r.seed == 5 && r.reps == 4));
}

#[test]
fn seed_quick_and_size_flags() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write(
        dir.path(),
        "plan.toml",
        &SMALL_PLAN.replace("reps = 4", "reps = 60"),
    );
    let out_dir = dir.path().join("size");
    let out = gof(&[
        "size",
        "--plan",
        path(&plan),
        "--out",
        path(&out_dir),
        "--seed",
        "99",
        "--quick",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows =
        parse_power_csv(&std::fs::read_to_string(out_dir.join("size.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows
        .iter()
        .all(|r| r.theta == 0.0 && r.seed == 99 && r.reps == 50));
    let manifest = std::fs::read_to_string(out_dir.join("manifest.toml")).unwrap();
    assert!(manifest.contains("command = \"size\""));
    assert!(manifest.contains("thetas = [0.0]"));
}

#[test]
fn variance_command_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write(
        dir.path(),
        "v.toml",
        "family = \"gaussian_mean\"\nstudy = \"variance_comparison\"\nd = [2, 3]\nN = 15\nreps = 5\n\
         [variance]\nsweep_n = [10, 20]\nsweep_lambda = [0.1]\nfixed_n = 12\nfixed_d = 2\n",
    );
    let out_dir = dir.path().join("v");
    let out = gof(&["variance", "--plan", path(&plan), "--out", path(&out_dir)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(out_dir.join("variance.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(VARIANCE_HEADER));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2 + 2 + 1);
    for r in &rows {
        let ours: f64 = r[5].parse().unwrap();
        let theirs: f64 = r[6].parse().unwrap();
        assert!(
            ours.is_finite() && ours > 0.0 && theirs.is_finite() && theirs > 0.0,
            "{r:?}"
        );
        assert_eq!(r[1], r[2]);
    }
}

#[test]
fn plot_matches_golden_files() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let dir = tempfile::tempdir().unwrap();
    let out = gof(&[
        "plot",
        path(&data.join("golden.csv")),
        "--out",
        path(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in ["gaussian_mean_d10.svg", "vmf_d3.svg"] {
        let ours = std::fs::read(dir.path().join(name)).unwrap();
        let golden = std::fs::read(data.join("golden").join(name)).unwrap();
        assert!(ours == golden, "{name} differs from the golden file");
    }
}
