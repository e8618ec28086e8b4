use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use polylab::config::{Experiment, ExperimentConfig};
use polylab::error::exit;
use polylab::experiments::{collide, instance, noise_sweep, sparsify, split};
use polylab::io::{fmt_f64, read_matrix, read_table, read_trace};
use proptest::prelude::*;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polylab"))
}

fn small_collide(out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::defaults(Experiment::Collide);
    for kv in ["n=8", "sweep.m=8,16", "seeds=3", "steps=400", "record_every=100"] {
        c.apply_override(kv).unwrap();
    }
    c.out_dir = out.to_path_buf();
    c
}

/// Every file under `dir`, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    files
}

#[test]
fn trace_csv_round_trips_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::defaults(Experiment::Sparsify);
    for kv in ["m=2000", "lambda=1e-3", "steps=3000", "record_every=100", "record_per_decade=5"] {
        c.apply_override(kv).unwrap();
    }
    c.out_dir = tmp.path().to_path_buf();
    let runs = sparsify::run_sparsify(&c).unwrap();
    let path = tmp.path().join("sparsify").join(&runs[0].cell).join("trace.csv");
    let (meta, trace) = read_trace(&path).unwrap();
    assert_eq!(trace, runs[0].trace);
    assert!(trace.is_sorted());
    let get = |k: &str| meta.iter().find(|(a, _)| a == k).map(|(_, v)| v.clone());
    assert_eq!(get("seed").as_deref(), Some("0"));
    assert_eq!(get("m").as_deref(), Some("2000"));
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with(&format!("# polylab {}", env!("CARGO_PKG_VERSION"))));
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "step,t,row,l1,l2sq,l4p4,m_prime,loss");
    for r in &trace.records {
        assert_eq!(r.t, r.step as f64 * 0.1);
    }
}

#[test]
fn final_matrix_round_trips_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::defaults(Experiment::Instance);
    for kv in ["steps=300", "record_every=50", "record_per_decade=0"] {
        c.apply_override(kv).unwrap();
    }
    c.out_dir = tmp.path().to_path_buf();
    let out = instance::run_instance(&c).unwrap();
    let dir = tmp.path().join("instance").join(&out.cell);
    let (_, w) = read_matrix(&dir.join("final_matrix.csv")).unwrap();
    assert_eq!(w, out.final_w);
    let summary = read_table(&tmp.path().join("instance/summary.csv")).unwrap();
    assert_eq!(summary.header, ["row", "final_l4p4", "final_l2sq", "neuron", "compromise"]);
    assert_eq!(summary.rows.len(), 8);
    for (row, r) in summary.rows.iter().zip(&out.rows) {
        assert_eq!(row[1].parse::<f64>().unwrap(), r.l4p4);
        assert_eq!(row[4], (r.l4p4 < 0.5).to_string());
    }
    assert!(tmp.path().join("instance/heatmap.svg").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    collide::run_collide(&small_collide(a.path())).unwrap();
    collide::run_collide(&small_collide(b.path())).unwrap();
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    assert!(sa.len() > 6);
    assert_eq!(sa, sb);
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut c = small_collide(a.path());
    c.workers = 1;
    collide::run_collide(&c).unwrap();
    let mut c = small_collide(b.path());
    c.workers = 3;
    collide::run_collide(&c).unwrap();
    assert_eq!(snapshot(a.path()), snapshot(b.path()));
}

#[test]
fn svg_emission_leaves_data_untouched() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut c = small_collide(a.path());
    c.emit.svg = true;
    collide::run_collide(&c).unwrap();
    let mut c = small_collide(b.path());
    c.emit.svg = false;
    collide::run_collide(&c).unwrap();
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    let csv = |s: &BTreeMap<PathBuf, Vec<u8>>| -> Vec<PathBuf> {
        s.keys().filter(|p| p.extension().is_some_and(|e| e == "csv")).cloned().collect()
    };
    assert_eq!(csv(&sa), csv(&sb));
    for p in csv(&sa) {
        let (ta, tb) = (read_table(&a.path().join(&p)).unwrap(), read_table(&b.path().join(&p)).unwrap());
        assert_eq!((ta.header, ta.rows), (tb.header, tb.rows), "{}", p.display());
    }
    assert!(sa.keys().any(|p| p.ends_with("plot.svg")));
    assert!(!sb.keys().any(|p| p.extension().is_some_and(|e| e == "svg")));
    let svg = String::from_utf8(sa[Path::new("collide/plot.svg")].clone()).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn collide_summary_matches_in_memory_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = collide::run_collide(&small_collide(tmp.path())).unwrap();
    let t = read_table(&tmp.path().join("collide/summary.csv")).unwrap();
    assert_eq!(t.rows.len(), out.runs.len());
    for (row, run) in t.rows.iter().zip(&out.runs) {
        assert_eq!(row[0], run.m.to_string());
        assert_eq!(row[2], run.polysemantic.to_string());
    }
    let by_m = read_table(&tmp.path().join("collide/summary_by_m.csv")).unwrap();
    assert_eq!(by_m.rows[0][4], fmt_f64(8.0 * 7.0 / 32.0));
}

#[test]
fn noise_sweep_writes_every_cell_and_setting() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::defaults(Experiment::NoiseSweep);
    for kv in ["n=3", "m=4", "steps=200", "record_every=50", "record_per_decade=0", "sweep.sigma=0.1", "sweep.lambda=0.01", "seeds=2"] {
        c.apply_override(kv).unwrap();
    }
    c.out_dir = tmp.path().to_path_buf();
    let out = noise_sweep::run_noise_sweep(&c).unwrap();
    assert_eq!(out.runs.len(), 8);
    assert_eq!(out.settings.len(), 4);
    let t = read_table(&tmp.path().join("noise-sweep/summary_by_setting.csv")).unwrap();
    assert_eq!(t.rows.len(), 4);
    assert!(t.rows.iter().all(|r| r[5] == "0"));
    for f in ["plot.svg", "trace_plot.svg", "lambda_plot.svg"] {
        assert!(tmp.path().join("noise-sweep").join(f).exists(), "{f}");
    }
}

#[test]
fn split_neuron_reports_each_trial() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::defaults(Experiment::SplitNeuron);
    for kv in ["steps=2000", "trials=3"] {
        c.apply_override(kv).unwrap();
    }
    c.out_dir = tmp.path().to_path_buf();
    let out = split::run_split_neuron(&c).unwrap();
    assert_eq!(out.trials.len(), 3);
    for t in &out.trials {
        assert_eq!(t.final_w.cols(), 17);
        assert!(!out.skipped.contains(&t.seed));
    }
    let s = read_table(&tmp.path().join("split-neuron/summary.csv")).unwrap();
    assert_eq!(s.rows.len(), 3);
}

#[test]
fn binary_runs_an_experiment_from_a_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# tiny collide\nn = 6\nsweep.m = 6, 12\nseeds = 2\nsteps = 300\nrecord_every = 100\n").unwrap();
    let status = bin()
        .args(["collide", "--config"])
        .arg(&cfg)
        .args(["--set", "steps=200", "--workers", "2", "--seed", "7", "--out"])
        .arg(tmp.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(exit::OK));
    let trace = tmp.path().join("collide/m6-seed8/trace.csv");
    let (meta, tr) = read_trace(&trace).unwrap();
    assert!(meta.contains(&("steps".to_string(), "200".to_string())));
    assert!(meta.contains(&("seed".to_string(), "7".to_string())));
    assert_eq!(tr.steps().last(), Some(&200));
}

#[test]
fn configuration_errors_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 6] = [
        &["collapse"],
        &["collide", "--set", "colour=red"],
        &["collide", "--set", "n=many"],
        &["instance", "--set", "lambda=0.1"],
        &["collide", "--set", "sweep.m="],
        &["collide", "--config", "/nonexistent/polylab.cfg"],
    ];
    for args in cases {
        let out = bin().args(args).arg("--out").arg(tmp.path()).output().unwrap();
        assert_eq!(out.status.code(), Some(exit::CONFIG), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    let out = bin().output().unwrap();
    assert_eq!(out.status.code(), Some(exit::CONFIG));
}

#[test]
fn divergence_exits_with_code_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["instance", "--set", "eta=20", "--set", "sigma=2", "--set", "steps=2000", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit::DIVERGED), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn corrupted_gradient_fails_only_the_gradient_check() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |fault: &str| {
        let out = bin()
            .args(["verify", "--set", "checks=C3,C5,X2", "--set"])
            .arg(format!("fault={fault}"))
            .arg("--out")
            .arg(tmp.path())
            .output()
            .unwrap();
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(tmp.path().join("verify/report.json")).unwrap()).unwrap();
        (out.status.code(), report)
    };
    let (code, report) = run("none");
    assert_eq!(code, Some(exit::OK));
    assert_eq!(report["failed"], 0);

    let (code, report) = run("gradient");
    assert_eq!(code, Some(exit::CHECK_FAILED));
    let checks = report["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 3);
    for c in checks {
        assert_eq!(c["passed"], c["id"] != "C3", "{c}");
        for field in ["description", "anchor", "bound", "details"] {
            assert!(c[field].as_str().is_some_and(|s| !s.is_empty()));
        }
    }
    assert!(checks[0]["measured"].as_f64().unwrap() > 1.0);
}

proptest! {
    #[test]
    fn float_formatting_round_trips(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        let back: f64 = fmt_f64(x).parse().unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }

    #[test]
    fn overrides_show_up_in_the_resolved_listing(n in 1usize..500, lambda in 0.0f64..1.0, seed in any::<u64>()) {
        let mut c = ExperimentConfig::defaults(Experiment::Collide);
        c.apply_override(&format!("n={n}")).unwrap();
        c.apply_override(&format!("lambda={lambda}")).unwrap();
        c.apply_override(&format!("seed={seed}")).unwrap();
        let r = c.resolved();
        let get = |k: &str| r.iter().find(|p| p.0 == k).map(|p| p.1.clone()).unwrap();
        prop_assert_eq!(get("n").parse::<usize>().unwrap(), n);
        prop_assert_eq!(get("lambda").parse::<f64>().unwrap(), lambda);
        prop_assert_eq!(get("seed").parse::<u64>().unwrap(), seed);
    }
}
