//! End-to-end runs of the `patchup` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use patchup::geometry::{dist, AnalyticShape, Point3, Transform};
use patchup::io::{read_cloud, write_cloud};
use patchup::loss::MetricReport;
use patchup::pairing::{overlap_region, ClusterParams, PatchSet};
use patchup_cli::{metric_csv, read_manifest, PairRecord};
use tempfile::TempDir;

fn patchup(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_patchup")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = patchup(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Failing runs print exactly one diagnostic line.
fn assert_fails(out: &Output, code: i32, needle: &str) {
    assert_eq!(out.status.code(), Some(code), "stderr: {}", stderr(out));
    let err = stderr(out);
    assert!(err.contains(needle), "`{needle}` not in {err}");
    assert!(!err.contains("panicked"), "{err}");
}

fn assert_one_line(out: &Output) {
    assert_eq!(stderr(out).trim_end().lines().count(), 1, "{}", stderr(out));
}

const TINY_CONFIG: &str = "\
n = 16
r = 4
k = 4
c = 8
c_up = 8
extractor_depth = 1
head_hidden = 8
pairs_per_shape = 4
val_fraction = 0.25
epochs = 1
batch_size = 2
";

struct Trained {
    dir: TempDir,
    checkpoint: PathBuf,
    stdout: String,
}

fn train_tiny(config: &str) -> Trained {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("data");
    ok(&["gen-data", "--shapes", "sphere", "--count", "1", "--points", "512", "--seed", "3", "--out-dir", s(&data)]);
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, config).unwrap();
    let checkpoint = dir.path().join("model.ckpt");
    let out = ok(&["train", "--config", s(&cfg), "--data-dir", s(&data), "--out", s(&checkpoint)]);
    Trained { stdout: stdout(&out), dir, checkpoint }
}

#[test]
fn gen_data_writes_one_line_per_point() {
    let dir = TempDir::new().unwrap();
    ok(&["gen-data", "--shapes", "sphere", "--count", "1", "--points", "100", "--out-dir", s(dir.path())]);
    let text = std::fs::read_to_string(dir.path().join("sphere_000.xyz")).unwrap();
    assert_eq!(text.lines().count(), 100);
}

#[test]
fn gen_data_is_byte_reproducible_and_manifest_regenerates() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for d in [&a, &b] {
        ok(&["gen-data", "--shapes", "sphere,torus:0.6,0.2,disk", "--count", "2", "--points", "50", "--seed", "9", "--out-dir", s(d.path())]);
    }
    let entries = read_manifest(a.path()).unwrap();
    assert_eq!(entries.len(), 6);
    for name in entries.iter().map(|e| e.file.clone()).chain(["manifest.jsonl".into()]) {
        assert_eq!(std::fs::read(a.path().join(&name)).unwrap(), std::fs::read(b.path().join(&name)).unwrap());
    }
    let regenerated = b.path().join("regenerated.xyz");
    for e in &entries {
        let shape: AnalyticShape = e.shape.parse().unwrap();
        write_cloud(&regenerated, &shape.sample(e.points, e.seed)).unwrap();
        assert_eq!(std::fs::read(&regenerated).unwrap(), std::fs::read(a.path().join(&e.file)).unwrap());
    }
    assert_eq!(entries[2].shape, "torus:0.6,0.2");
}

#[test]
fn gen_data_bad_shape_is_a_usage_error_listing_shapes() {
    let dir = TempDir::new().unwrap();
    let out = patchup(&["gen-data", "--shapes", "cube", "--out-dir", s(dir.path())]);
    assert_fails(&out, 1, "sphere, torus, disk");
}

fn read_records(path: &Path) -> Vec<PairRecord> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn two_patch_cloud_pairs_mutually() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("c.xyz");
    // exactly two patches: 2N/n = 2 and the two seeds cover both halves
    let pts: Vec<Point3> = (0..20).map(|i| [i as f64 * 0.1, (i % 3) as f64 * 0.01, 0.0]).collect();
    write_cloud(&input, &pts).unwrap();
    let out = dir.path().join("pairs.jsonl");
    ok(&["select-pairs", "--input", s(&input), "--patch-size", "20", "--out", s(&out)]);
    let records = read_records(&out);
    assert_eq!(records.len(), 2);
    assert_eq!(records[0].partner, 1);
    assert_eq!(records[1].partner, 0);
    assert_eq!(records[0].overlap_count, 20);
}

#[test]
fn pair_manifest_is_deterministic_and_matches_dbscan_reruns() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("torus.xyz");
    let cloud = AnalyticShape::by_name("torus").unwrap().sample(400, 2);
    write_cloud(&input, &cloud).unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    for out in [&a, &b] {
        ok(&["select-pairs", "--input", s(&input), "--patch-size", "32", "--out", s(out)]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    // The file holds values rounded to 9 digits; pair on those values.
    let set = PatchSet::cover(&read_cloud(&input).unwrap(), 32).unwrap();
    let records = read_records(&a);
    assert_eq!(records.len(), set.len());
    for r in &records {
        assert_eq!(set.patches[r.patch].seed_index, r.seed);
        let region = overlap_region(&set.patches[r.patch], &set.patches[r.partner], set.radius);
        assert_eq!(ClusterParams::default().cluster_count(&region.points), r.cluster_count);
        assert_eq!(region.len(), r.region_size);
    }
}

#[test]
fn unreadable_input_names_the_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nowhere.xyz");
    let out = patchup(&["select-pairs", "--input", s(&missing), "--out", s(&dir.path().join("o"))]);
    assert_fails(&out, 2, "nowhere.xyz");
    assert_one_line(&out);
}

#[test]
fn malformed_cloud_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.xyz");
    std::fs::write(&bad, "1 2 3\n4 five 6\n").unwrap();
    let out = patchup(&["noise", "--input", s(&bad), "--level", "0.01", "--out", s(&dir.path().join("o.xyz"))]);
    assert_fails(&out, 2, "line 2");
    assert_one_line(&out);
}

#[test]
fn one_epoch_training_echoes_defaults_and_logs() {
    let run = train_tiny(TINY_CONFIG);
    assert!(run.checkpoint.exists());
    let log = std::fs::read_to_string(run.dir.path().join("model.log.csv")).unwrap();
    assert_eq!(log.lines().count(), 2);
    assert!(log.starts_with("epoch,loss,lambda,lr,val_cd"));
    // keys absent from the file are echoed with their defaults
    assert!(run.stdout.contains("config lr = 0.001"));
    assert!(run.stdout.contains("config n = 16"));
    assert!(run.stdout.contains("final val CD"));
}

#[test]
fn training_rerun_reproduces_log() {
    let a = train_tiny(TINY_CONFIG);
    let b = train_tiny(TINY_CONFIG);
    let read = |t: &Trained| std::fs::read(t.dir.path().join("model.log.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(std::fs::read(&a.checkpoint).unwrap(), std::fs::read(&b.checkpoint).unwrap());
}

#[test]
fn unknown_config_key_is_named() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.cfg");
    std::fs::write(&cfg, "epochs = 1\nlearning_rate = 0.1\n").unwrap();
    let out = patchup(&["train", "--config", s(&cfg), "--data-dir", s(dir.path()), "--out", s(&dir.path().join("m"))]);
    assert_fails(&out, 2, "learning_rate");
    assert_one_line(&out);
}

#[test]
fn divergence_exits_with_numerical_code() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("data");
    ok(&["gen-data", "--shapes", "sphere", "--points", "512", "--out-dir", s(&data)]);
    let cfg = dir.path().join("c.cfg");
    std::fs::write(&cfg, format!("{TINY_CONFIG}lr = 1e300\nlr_floor = 1e300\nepochs = 3\n")).unwrap();
    let out = patchup(&["train", "--config", s(&cfg), "--data-dir", s(&data), "--out", s(&dir.path().join("m"))]);
    assert_fails(&out, 3, "step");
}

fn bounding_box(points: &[Point3]) -> (Point3, Point3) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for d in 0..3 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    (lo, hi)
}

#[test]
fn upsampling_multiplies_count_and_emits_coarse() {
    let run = train_tiny(TINY_CONFIG);
    let input = run.dir.path().join("sparse.xyz");
    let sparse = AnalyticShape::by_name("sphere").unwrap().sample(128, 11);
    write_cloud(&input, &sparse).unwrap();
    let out = run.dir.path().join("dense.ply");
    let args = ["upsample", "--input", s(&input), "--checkpoint", s(&run.checkpoint), "--rate", "4", "--out", s(&out)];
    ok(&[&args[..], &["--emit-coarse"]].concat());
    let dense = read_cloud(&out).unwrap();
    assert_eq!(dense.len(), 512);
    assert_eq!(read_cloud(run.dir.path().join("dense_coarse.ply")).unwrap().len(), 512);

    let first = std::fs::read(&out).unwrap();
    ok(&args);
    assert_eq!(std::fs::read(&out).unwrap(), first);

    let (lo, hi) = bounding_box(&sparse);
    let center = [0, 1, 2].map(|d| 0.5 * (lo[d] + hi[d]));
    let half = [0, 1, 2].map(|d| 0.55 * (hi[d] - lo[d]));
    for p in &dense {
        assert!((0..3).all(|d| (p[d] - center[d]).abs() <= half[d]), "{p:?}");
    }
}

#[test]
fn upsample_rejects_rate_mismatch_and_small_inputs() {
    let run = train_tiny(TINY_CONFIG);
    let input = run.dir.path().join("few.xyz");
    write_cloud(&input, &AnalyticShape::by_name("sphere").unwrap().sample(8, 1)).unwrap();
    let out = run.dir.path().join("o.xyz");
    let wrong_rate = patchup(&["upsample", "--input", s(&input), "--checkpoint", s(&run.checkpoint), "--rate", "2", "--out", s(&out)]);
    assert_fails(&wrong_rate, 1, "rate");
    let few = patchup(&["upsample", "--input", s(&input), "--checkpoint", s(&run.checkpoint), "--rate", "4", "--out", s(&out)]);
    assert_fails(&few, 2, "at least 16");
    assert_one_line(&few);
    let garbage = run.dir.path().join("garbage.ckpt");
    std::fs::write(&garbage, b"nope").unwrap();
    let bad = patchup(&["upsample", "--input", s(&input), "--checkpoint", s(&garbage), "--rate", "4", "--out", s(&out)]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn eval_identical_clouds_score_zero() {
    let dir = TempDir::new().unwrap();
    let cloud = dir.path().join("c.xyz");
    write_cloud(&cloud, &AnalyticShape::by_name("disk").unwrap().sample(64, 1)).unwrap();
    let csv = dir.path().join("m.csv");
    ok(&["eval", "--pred", s(&cloud), "--gt", s(&cloud), "--out", s(&csv)]);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.contains("cd,0.0\n") && text.contains("hd,0.0\n") && text.contains("emd,0.0\n"), "{text}");
}

#[test]
fn eval_single_points_follow_the_thousandfold_convention() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a.xyz"), dir.path().join("b.xyz"));
    write_cloud(&a, &[[0.0, 0.0, 0.0]]).unwrap();
    write_cloud(&b, &[[3.0, 4.0, 0.0]]).unwrap();
    let csv = dir.path().join("m.csv");
    ok(&["eval", "--pred", s(&a), "--gt", s(&b), "--out", s(&csv)]);
    assert!(std::fs::read_to_string(&csv).unwrap().contains("hd,5000.0\n"));
}

#[test]
fn eval_matches_library_and_skips_emd_on_count_mismatch() {
    let dir = TempDir::new().unwrap();
    let torus = AnalyticShape::by_name("torus").unwrap();
    let (a, b) = (dir.path().join("a.xyz"), dir.path().join("b.xyz"));
    write_cloud(&a, &torus.sample(90, 1)).unwrap();
    write_cloud(&b, &torus.sample(120, 2)).unwrap();
    let csv = dir.path().join("m.csv");
    let out = ok(&["eval", "--pred", s(&a), "--gt", s(&b), "--shape", "torus:0.7,0.3", "--out", s(&csv)]);
    assert!(stderr(&out).contains("skipping emd"));
    let expect = MetricReport::compute(&read_cloud(&a).unwrap(), &read_cloud(&b).unwrap(), Some(&torus)).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text, metric_csv(&expect));
    assert!(!text.contains("emd") && text.contains("p2f_std"));
}

#[test]
fn eval_without_gt_is_a_usage_error() {
    let out = patchup(&["eval", "--pred", "a.xyz", "--out", "m.csv"]);
    assert_fails(&out, 1, "--gt");
}

#[test]
fn zero_noise_preserves_the_file_and_seeds_reproduce() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in.xyz");
    write_cloud(&input, &AnalyticShape::by_name("sphere").unwrap().sample(200, 4)).unwrap();
    let zero = dir.path().join("zero.xyz");
    ok(&["noise", "--input", s(&input), "--level", "0", "--out", s(&zero)]);
    let (orig, same) = (read_cloud(&input).unwrap(), read_cloud(&zero).unwrap());
    for (p, q) in orig.iter().zip(&same) {
        assert!(dist(p, q) < 1e-8, "{p:?} {q:?}");
    }
    let (a, b) = (dir.path().join("a.xyz"), dir.path().join("b.xyz"));
    for out in [&a, &b] {
        ok(&["noise", "--input", s(&input), "--level", "0.01", "--seed", "5", "--out", s(out)]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let negative = patchup(&["noise", "--input", s(&input), "--level=-0.1", "--out", s(&a)]);
    assert_fails(&negative, 1, "level");
}

#[test]
fn noise_deviation_matches_level() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in.xyz");
    let cloud = AnalyticShape::by_name("torus").unwrap().sample(10_000, 8);
    write_cloud(&input, &cloud).unwrap();
    let out = dir.path().join("out.xyz");
    ok(&["noise", "--input", s(&input), "--level", "0.01", "--seed", "1", "--out", s(&out)]);
    let before = read_cloud(&input).unwrap();
    let after = read_cloud(&out).unwrap();
    let scale = Transform::fit(&before).unwrap().scale;
    let deltas: Vec<f64> = before
        .iter()
        .zip(&after)
        .flat_map(|(p, q)| (0..3).map(move |d| (q[d] - p[d]) / scale))
        .collect();
    let sd = (deltas.iter().map(|d| d * d).sum::<f64>() / deltas.len() as f64).sqrt();
    assert!((sd - 0.01).abs() < 0.001, "{sd}");
}
