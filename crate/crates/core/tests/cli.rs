use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bte_core::bezier::read_bte;
use bte_core::features::{write_features_csv, FeatureRow, FeatureVector, FEATURE_COUNT};
use bte_core::hint::{read_btef, render_hint};
use bte_core::mask::{distance_transform, load_mask};
use tempfile::TempDir;

fn bte(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bte"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn files_in(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn data_rows(csv: &str) -> Vec<String> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).map(str::to_owned).collect()
}

/// Synthetic starts under `synth/`, small enough to keep the tests quick.
fn starts(count: usize) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let o = bte(dir.path(), &["--seed", "7", "synth", "--count", &count.to_string(), "--depth", "2", "-o", "synth"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    dir
}

#[test]
fn config_errors_exit_with_two_before_any_work() {
    let dir = starts(1);
    let d = dir.path();
    fs::write(d.join("run.cfg"), "seed=3\ncolour=blue\n").unwrap();
    let o = bte(d, &["--config", "run.cfg", "encode", "synth", "-o", "out"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert!(!d.join("out").exists());

    assert_eq!(bte(d, &["--gamma", "-1", "encode", "synth", "-o", "out"]).status.code(), Some(2));
    assert_eq!(bte(d, &["encode", "missing", "-o", "out"]).status.code(), Some(2));
    assert_eq!(bte(d, &["--configs", "swirl_2x", "hint", "synth", "--masks", "synth", "-o", "out"]).status.code(), Some(2));
}

#[test]
fn flags_override_the_config_file() {
    let dir = starts(1);
    let d = dir.path();
    fs::write(d.join("run.cfg"), "# comment\nseed = 3\n").unwrap();
    assert!(bte(d, &["--config", "run.cfg", "encode", "synth", "-o", "a"]).status.success());
    assert!(bte(d, &["--config", "run.cfg", "--seed", "77", "encode", "synth", "-o", "b"]).status.success());
    let a = fs::read_to_string(d.join("a/synth_000.bte")).unwrap();
    let b = fs::read_to_string(d.join("b/synth_000.bte")).unwrap();
    assert!(a.contains("# seed 3\n"));
    assert!(b.contains("# seed 77\n"));
}

#[test]
fn encode_writes_one_tree_per_mask_and_a_summary() {
    let dir = starts(3);
    let d = dir.path();
    let o = bte(d, &["encode", "synth", "-o", "trees"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("encoded 3/3 masks:"), "{}", stdout(&o));
    let trees: Vec<String> = files_in(&d.join("trees")).into_keys().filter(|n| n.ends_with(".bte")).collect();
    assert_eq!(trees, ["synth_000.bte", "synth_001.bte", "synth_002.bte"]);
    let summary = fs::read_to_string(d.join("trees/encode_summary.csv")).unwrap();
    assert_eq!(data_rows(&summary).len(), 3);
    assert!(summary.contains("# config sha256:"));
}

#[test]
fn an_unreadable_mask_fails_alone() {
    let dir = starts(2);
    let d = dir.path();
    fs::write(d.join("synth/broken.png"), b"not an image").unwrap();
    let o = bte(d, &["encode", "synth", "-o", "trees"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("broken.png"));
    assert!(stdout(&o).starts_with("encoded 2/3 masks:"));
    assert!(d.join("trees/synth_000.bte").is_file() && d.join("trees/synth_001.bte").is_file());
}

#[test]
fn fundus_scale_masks_encode_to_hundreds_of_segments() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(bte(d, &["synth", "--branches", "4", "--depth", "5", "--count", "2", "-o", "synth"]).status.success());
    assert!(bte(d, &["encode", "synth", "-o", "trees"]).status.success());
    for name in ["synth_000.bte", "synth_001.bte"] {
        let n = read_bte(d.join("trees").join(name)).unwrap().len();
        assert!((200..=500).contains(&n), "{name}: {n} segments");
    }
}

#[test]
fn one_start_yields_the_full_grid_and_an_exact_baseline() {
    let dir = starts(1);
    let d = dir.path();
    assert!(bte(d, &["encode", "synth", "-o", "trees"]).status.success());
    let o = bte(d, &["--previews", "hint", "trees/synth_000.bte", "--masks", "synth", "-o", "hints"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files = files_in(&d.join("hints"));
    assert_eq!(files.keys().filter(|n| n.ends_with(".btef")).count(), 13);
    assert_eq!(files.keys().filter(|n| n.ends_with(".png")).count(), 13);

    let (stored, meta) = read_btef(&files["synth_000_baseline.btef"][..]).unwrap();
    let meta: BTreeMap<_, _> = meta.into_iter().collect();
    assert_eq!(meta["config"], "baseline");
    assert_eq!(meta["seed"], "0");
    let tree = read_bte(d.join("trees/synth_000.bte")).unwrap();
    let field = distance_transform(&load_mask(d.join("synth/synth_000.png")).unwrap()).unwrap();
    let fresh = render_hint(&tree, &field);
    for c in 0..3 {
        let same = fresh.channel(c).iter().zip(stored.channel(c)).all(|(a, b)| (*a as f32).to_bits() == (*b as f32).to_bits());
        assert!(same, "channel {c} differs");
    }
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let dir = starts(3);
    let d = dir.path();
    assert!(bte(d, &["encode", "synth", "-o", "trees"]).status.success());
    for (workers, out) in [("1", "one"), ("4", "four")] {
        let o = bte(d, &["--workers", workers, "--configs", "baseline,tortuosity_4x,pixdrop_30", "hint", "trees", "--masks", "synth", "-o", out]);
        assert!(o.status.success());
    }
    let (a, b) = (files_in(&d.join("one")), files_in(&d.join("four")));
    assert_eq!(a.len(), 9);
    assert_eq!(a, b);
}

#[test]
fn score_reports_requested_configs_then_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut csv = String::from("start_id,config,prob,mean_intensity,std_intensity,rg_ratio\n");
    for (i, (base, tort, pix)) in [(0.1, 0.7, 0.08), (0.2, 0.6, 0.2), (0.05, 0.9, 0.01), (0.4, 0.5, 0.38)].iter().enumerate() {
        csv.push_str(&format!("s{i},baseline,{base},100,40,1.8\n"));
        csv.push_str(&format!("s{i},tortuosity_4x,{tort},,,\n"));
        csv.push_str(&format!("s{i},pixdrop_30,{pix},,,\n"));
    }
    fs::write(d.join("scores.csv"), csv).unwrap();
    let o = bte(d, &["--seed", "5", "score", "scores.csv", "-o", "reports"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let causal = fs::read_to_string(d.join("reports/causal.csv")).unwrap();
    assert!(causal.contains("# seed 5\n"));
    let configs: Vec<String> = data_rows(&causal).iter().map(|r| r.split(',').next().unwrap().to_owned()).collect();
    assert_eq!(configs, ["tortuosity_4x", "pixdrop_30", "baseline"]);
    let strict = fs::read_to_string(d.join("reports/causal_strict.csv")).unwrap();
    assert!(strict.contains("strict subset: 3 of 4 starts"));
    assert!(d.join("reports/contrast.csv").is_file() && d.join("reports/causal.txt").is_file());
}

#[test]
fn obs_writes_one_row_per_feature() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let rows: Vec<FeatureRow> = (0..40)
        .map(|i| {
            let x = f64::from(i);
            let values: [f64; FEATURE_COUNT] = std::array::from_fn(|k| 1.0 + ((x * (k as f64 + 1.3)).sin() + 1.0) * (k as f64 + 1.0));
            FeatureRow {
                id: format!("img{i:02}"),
                features: FeatureVector::from_array(values),
                label: Some(u8::from(values[6] > 8.0)),
            }
        })
        .collect();
    let mut text = Vec::new();
    write_features_csv(&mut text, &rows, &[]).unwrap();
    fs::write(d.join("features.csv"), text).unwrap();
    let o = bte(d, &["obs", "features.csv", "-o", "reports"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(d.join("reports/observational.csv")).unwrap();
    assert_eq!(data_rows(&table).len(), 20);
    assert!(fs::read_to_string(d.join("reports/observational.txt")).unwrap().contains("mean_tortuosity"));
}

#[test]
fn dedupe_removes_the_planned_rows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cohort = "\
image_id,base_id,split,label
a1,p1,train,0
a2,p1,train,0
a3,p2,train,1
a4,p3,train,0
b1,p4,val,1
b2,p4,val,1
b3,p4,val,1
b4,p5,val,0
c1,p2,test,1
c2,p3,test,0
c3,p3,test,0
c4,p6,test,1
";
    fs::write(d.join("cohort.csv"), cohort).unwrap();
    let o = bte(d, &["dedupe", "cohort.csv", "-o", "clean.csv"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("removed 5 of 12 rows: 2 train rows sharing a test subject, 2 val duplicates, 1 test duplicates"));
    let kept: Vec<String> = data_rows(&fs::read_to_string(d.join("clean.csv")).unwrap())
        .iter()
        .map(|r| r.split(',').next().unwrap().to_owned())
        .collect();
    assert_eq!(kept, ["a1", "a2", "b1", "b4", "c1", "c2", "c4"]);
}

#[test]
fn roundtrip_prints_a_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let o = bte(dir.path(), &["roundtrip", "--depth", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("total_arc_length") && text.contains("# seed 0"));
}
