//! End-to-end tests of the perifrac binary: exit codes, artifact layout,
//! determinism, and the resolved-config round trip. Every test drives the
//! compiled binary through a fresh scratch directory.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_perifrac"))
}

fn fresh_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir()
        .join(format!("perifrac_cli_{tag}_{}", std::process::id()));
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_cfg(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()))
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process was killed by a signal")
}

const MATERIAL: &str = "\n[material]\nrho = 1.0\nf_prime0 = 1.0\nf_inf = 1.0\n";

fn run_config(t_final: f64, extra: &str) -> String {
    format!(
        "[domain]\nhorizon = 0.25\nspacing = 0.0625\n{MATERIAL}\n\
         [initial]\nu = {{ preset = \"mode\", amplitude = 0.2 }}\n\n\
         [time]\nt_final = {t_final}\n{extra}"
    )
}

#[test]
fn calibrate_prints_the_constants_and_exits_zero() {
    let dir = fresh_dir("calibrate");
    let cfg = write_cfg(&dir, &run_config(0.0, ""));
    let out = bin().args(["calibrate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("mu = 1.0471975511965976"), "{text}");
    assert!(text.contains("G_c = 2.0943951023931953"), "{text}");
}

#[test]
fn run_with_zero_final_time_writes_a_single_snapshot() {
    let dir = fresh_dir("tzero");
    let cfg = write_cfg(&dir, &run_config(0.0, ""));
    let out_dir = dir.join("out");
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(out_dir.join("snap_0.csv").exists());
    assert!(!out_dir.join("snap_1.csv").exists());
    assert!(out_dir.join("resolved_config.txt").exists());
    assert!(out_dir.join("unstable_0.25.csv").exists());
    // header plus exactly one record at t = 0
    let energy = read(&out_dir.join("energy.csv"));
    assert_eq!(energy.lines().count(), 2, "{energy}");
    assert!(energy.lines().nth(1).unwrap().starts_with("0.25,0,"));
    // 16x16 interior particles plus the header
    let snap = read(&out_dir.join("snap_0.csv"));
    assert_eq!(snap.lines().count(), 1 + 16 * 16);
    assert_eq!(snap.lines().next().unwrap(), "x,y,u,v");
}

#[test]
fn run_with_oversized_time_step_exits_two_naming_the_step() {
    let dir = fresh_dir("blowup");
    // dt = 2.0 is about 100x the stability limit of this lattice; four
    // steps are plenty for the Verlet iteration to breach the energy bound.
    let cfg = write_cfg(&dir, &run_config(8.0, "dt = 2.0\n"));
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("step"), "{}", stderr(&out));
}

#[test]
fn identical_configs_produce_bit_identical_outputs() {
    let dir = fresh_dir("determinism");
    let cfg = write_cfg(&dir, &run_config(0.1, ""));
    for tag in ["a", "b"] {
        let out = bin()
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.join(tag))
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    for name in
        ["energy.csv", "snap_0.csv", "unstable_0.25.csv", "resolved_config.txt"]
    {
        let a = read(&dir.join("a").join(name));
        let b = read(&dir.join("b").join(name));
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn resolved_config_echo_round_trips() {
    let dir = fresh_dir("roundtrip");
    let cfg = write_cfg(&dir, &run_config(0.05, ""));
    let first = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("first"))
        .output()
        .unwrap();
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    let echo = dir.join("first").join("resolved_config.txt");
    let second = bin()
        .args(["run", "--config"])
        .arg(&echo)
        .arg("--out")
        .arg(dir.join("second"))
        .output()
        .unwrap();
    assert_eq!(code(&second), 0, "{}", stderr(&second));
    assert_eq!(
        read(&echo),
        read(&dir.join("second").join("resolved_config.txt")),
        "re-running from the echoed config changed the resolution"
    );
    assert_eq!(
        read(&dir.join("first").join("energy.csv")),
        read(&dir.join("second").join("energy.csv"))
    );
}

#[test]
fn validation_failures_exit_one_and_name_the_key() {
    let dir = fresh_dir("validation");

    let cfg = write_cfg(&dir, &run_config(0.1, "").replace("spacing", "spacig"));
    let out =
        bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("spacig"), "{}", stderr(&out));

    let cfg = write_cfg(
        &dir,
        &run_config(0.1, "").replace("horizon = 0.25", "horizon = -0.25"),
    );
    let out =
        bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("domain.horizon"), "{}", stderr(&out));

    let cfg = write_cfg(
        &dir,
        &run_config(0.1, "")
            .replace("spacing = 0.0625", "spacing = 0.0625\ncollar = 0.2"),
    );
    let out =
        bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("domain.collar"), "{err}");
    assert!(err.contains("collar strictly wider"), "{err}");

    // missing required key, named by the parser
    let cfg = write_cfg(
        &dir,
        &run_config(0.1, "").replace("rho = 1.0\n", ""),
    );
    let out =
        bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("rho"), "{}", stderr(&out));

    // usage error: --config is required
    let out = bin().arg("run").output().unwrap();
    assert_eq!(code(&out), 1);
}

fn sweep_config(threads: usize) -> String {
    run_config(
        0.2,
        &format!(
            "\n[sweep]\nhorizons = [0.25, 0.125, 0.0625]\nsamples = 2\n\
             threads = {threads}\n"
        ),
    )
}

#[test]
fn sweep_writes_summary_tables_and_matches_across_thread_counts() {
    let dir = fresh_dir("sweep");
    for threads in [1, 2] {
        let cfg = write_cfg(&dir, &sweep_config(threads));
        let out_dir = dir.join(format!("t{threads}"));
        let out = bin()
            .args(["sweep", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        for name in [
            "sweep_summary.txt",
            "energy.csv",
            "concentration.csv",
            "unstable_0.25.csv",
            "unstable_0.125.csv",
            "unstable_0.0625.csv",
            "resolved_config.txt",
        ] {
            assert!(out_dir.join(name).exists(), "{name} missing");
        }
    }
    let summary = read(&dir.join("t1").join("sweep_summary.txt"));
    assert!(summary.contains("assert.complete=pass"), "{summary}");
    assert!(summary.contains("assert.errors_decreasing=pass"), "{summary}");
    assert!(summary.contains("assert.sup_bounded=pass"), "{summary}");
    assert!(summary.contains("omega_target=6.429751335813832"), "{summary}");
    // fixed reduction order: thread count changes nothing, not even bits
    for name in ["sweep_summary.txt", "energy.csv", "concentration.csv"] {
        assert_eq!(
            read(&dir.join("t1").join(name)),
            read(&dir.join("t2").join(name)),
            "{name} differs across thread counts"
        );
    }
}

#[test]
fn nucleate_reports_a_stable_zero_state() {
    let dir = fresh_dir("nucleate");
    let cfg = write_cfg(
        &dir,
        &format!(
            "[domain]\nhorizon = 0.25\nspacing = 0.03125\n{MATERIAL}\n\
             [nucleate]\nx = 0.5\ny = 0.5\nn_dir = 16\n"
        ),
    );
    let out = bin()
        .args(["nucleate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("unstable = no"), "{text}");
    assert!(text.contains("growth_rate = none"), "{text}");
    // one a-value per scanned angle, between the table header and the summary
    let table: Vec<&str> = text
        .lines()
        .skip_while(|l| *l != "theta,a")
        .skip(1)
        .take_while(|l| !l.starts_with("a_star"))
        .collect();
    assert_eq!(table.len(), 16, "{text}");
    assert!(table.iter().all(|l| l.matches(',').count() == 1), "{text}");
}

#[test]
fn wave_writes_one_vertex_snapshot_per_sample() {
    let dir = fresh_dir("wave");
    let cfg = write_cfg(
        &dir,
        &run_config(0.1, "\n[wave]\nspacing = 0.0625\nsamples = 2\n"),
    );
    let out_dir = dir.join("out");
    let out = bin()
        .args(["wave", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for k in 0..=2 {
        let snap = read(&out_dir.join(format!("snap_{k}.csv")));
        assert_eq!(snap.lines().count(), 1 + 17 * 17, "sample {k}");
    }
    assert!(!out_dir.join("snap_3.csv").exists());
    assert!(stdout(&out).contains("sample,t,l2"));
}

#[test]
fn gamma_summary_keeps_the_energies_under_the_target() {
    let dir = fresh_dir("gamma");
    let cfg = write_cfg(
        &dir,
        &format!(
            "[domain]\nhorizon = 0.25\nspacing = 0.0625\n{MATERIAL}\n\
             [initial]\nu = {{ preset = \"mode\", amplitude = 1.0 }}\n\n\
             [gamma]\nhorizons = [0.25, 0.125]\n"
        ),
    );
    let out_dir = dir.join("out");
    let out = bin()
        .args(["gamma", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary = read(&out_dir.join("sweep_summary.txt"));
    assert!(summary.contains("assert.upper_bound=pass"), "{summary}");
    assert!(summary.contains("assert.trend_decreasing=pass"), "{summary}");
    assert_eq!(summary.lines().count(), 1 + 2 + 2, "{summary}");
}
