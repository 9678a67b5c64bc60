//! Command-line front end: data generation, pair selection, training,
//! inference, evaluation and noise injection over ASCII point-cloud files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use patchup::geometry::{add_gaussian_noise, merge_patches, AnalyticShape, Point3, Transform};
use patchup::io::{read_cloud, write_cloud};
use patchup::loss::MetricReport;
use patchup::model::upsample_patch_pair;
use patchup::pairing::{select_adjacent_pairs, ClusterParams, PatchSet};
use patchup::training::{build_dataset, log_to_csv, train, Checkpoint, ShapeSource, TrainConfig, CONFIG_KEYS};
use patchup::Error;

mod error;

pub use error::{CliError, CliResult};

/// File name of the generation manifest inside a data directory.
pub const MANIFEST_NAME: &str = "manifest.jsonl";

#[derive(Debug, Parser)]
#[command(name = "patchup", version, about = "Patch-based point-cloud upsampling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample analytic surfaces into cloud files plus a manifest.
    GenData(GenDataArgs),
    /// Pair every patch of a cloud with its adjacent patch.
    SelectPairs(SelectPairsArgs),
    /// Train on a generated data directory.
    #[command(after_long_help = config_help())]
    Train(TrainArgs),
    /// Upsample a sparse cloud with a trained checkpoint.
    Upsample(UpsampleArgs),
    /// Compare a predicted cloud against ground truth (values x1000).
    Eval(EvalArgs),
    /// Add Gaussian noise relative to the cloud's unit bounding radius.
    Noise(NoiseArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Comma-separated shapes: sphere[:R], torus[:R,r], disk[:R].
    #[arg(long, value_parser = parse_shape_list)]
    pub shapes: ShapeList,
    /// Clouds per shape.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Points per cloud.
    #[arg(long, default_value_t = 2048)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectPairsArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Points per patch.
    #[arg(long, default_value_t = 64)]
    pub patch_size: usize,
    /// Nearest patches considered as partners.
    #[arg(long, default_value_t = 3)]
    pub candidates: usize,
    /// JSON-lines output, one record per patch.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// key = value file; missing keys take the defaults listed below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory written by `gen-data`.
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Checkpoint path; the log goes next to it as `<stem>.log.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct UpsampleArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Must equal the rate the checkpoint was trained for.
    #[arg(long)]
    pub rate: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the coarse stage as `<stem>_coarse.<ext>`.
    #[arg(long)]
    pub emit_coarse: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Analytic surface for point-to-surface distances.
    #[arg(long, value_parser = parse_shape)]
    pub shape: Option<AnalyticShape>,
    /// CSV with `metric,value` rows.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Standard deviation as a fraction of the bounding radius (0.01 = 1%).
    #[arg(long)]
    pub level: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_shape(s: &str) -> Result<AnalyticShape, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Shapes listed in one flag value.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeList(pub Vec<AnalyticShape>);

/// Splits on commas, re-attaching numeric fields to the preceding shape so
/// `sphere,torus:0.7,0.3` yields two shapes.
pub fn parse_shape_list(s: &str) -> Result<ShapeList, String> {
    let mut specs: Vec<String> = Vec::new();
    for token in s.split(',').map(str::trim) {
        let numeric = token.starts_with(|c: char| c.is_ascii_digit() || c == '.' || c == '-' || c == '+');
        match specs.last_mut() {
            Some(last) if numeric => {
                last.push(',');
                last.push_str(token);
            }
            _ => specs.push(token.to_string()),
        }
    }
    specs.iter().map(|spec| parse_shape(spec)).collect::<Result<_, _>>().map(ShapeList)
}

fn config_help() -> String {
    let defaults = TrainConfig::default().entries();
    let mut out = String::from("Config keys (default in brackets):\n");
    for ((key, doc), (_, value)) in CONFIG_KEYS.iter().zip(defaults) {
        let _ = writeln!(out, "  {key:<22} {doc} [{value}]");
    }
    out
}

/// One generated cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// File name relative to the manifest.
    pub file: String,
    /// Shape in `name:params` form.
    pub shape: String,
    pub points: usize,
    pub seed: u64,
}

/// Pairing decision for one patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub patch: usize,
    pub seed: usize,
    pub partner: usize,
    pub partner_seed: usize,
    pub overlap_count: usize,
    pub cluster_count: usize,
    pub region_size: usize,
    pub degenerate: bool,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::GenData(a) => gen_data(&a),
        Command::SelectPairs(a) => select_pairs(&a),
        Command::Train(a) => train_cmd(&a),
        Command::Upsample(a) => upsample(&a),
        Command::Eval(a) => eval(&a),
        Command::Noise(a) => noise(&a),
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

fn json_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain records always serialize")
}

pub fn gen_data(args: &GenDataArgs) -> CliResult<()> {
    if args.points == 0 {
        return Err(CliError::Usage("--points must be positive".into()));
    }
    fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut manifest = String::new();
    let mut written = 0;
    for shape in &args.shapes.0 {
        for _ in 0..args.count {
            let seed: u64 = rng.random();
            let file = format!("{}_{written:03}.xyz", shape.name());
            written += 1;
            write_cloud(args.out_dir.join(&file), &shape.sample(args.points, seed))?;
            let entry = ManifestEntry { file, shape: shape.to_string(), points: args.points, seed };
            manifest.push_str(&json_line(&entry));
            manifest.push('\n');
        }
    }
    write_text(&args.out_dir.join(MANIFEST_NAME), &manifest)?;
    println!("wrote {written} clouds to {}", args.out_dir.display());
    Ok(())
}

pub fn read_manifest(data_dir: &Path) -> CliResult<Vec<ManifestEntry>> {
    let path = data_dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let bad = |message: String| CliError::Manifest { path: path.display().to_string(), message };
    let entries = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| bad(format!("line {}: {e}", i + 1))))
        .collect::<CliResult<Vec<ManifestEntry>>>()?;
    if entries.is_empty() {
        return Err(bad("no clouds listed".into()));
    }
    Ok(entries)
}

pub fn select_pairs(args: &SelectPairsArgs) -> CliResult<()> {
    let cloud = read_cloud(&args.input)?;
    let set = PatchSet::cover(&cloud, args.patch_size)?;
    let mut out = String::new();
    for s in select_adjacent_pairs(&set, args.candidates, ClusterParams::default())? {
        let record = PairRecord {
            patch: s.primary,
            seed: set.patches[s.primary].seed_index,
            partner: s.partner,
            partner_seed: set.patches[s.partner].seed_index,
            overlap_count: s.pair.overlap_count,
            cluster_count: s.cluster_count,
            region_size: s.region_size,
            degenerate: s.degenerate,
        };
        out.push_str(&json_line(&record));
        out.push('\n');
    }
    write_text(&args.out, &out)?;
    println!("paired {} patches", set.len());
    Ok(())
}

/// Log path written next to a checkpoint.
pub fn log_path(checkpoint: &Path) -> PathBuf {
    let stem = checkpoint.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    checkpoint.with_file_name(format!("{stem}.log.csv"))
}

/// Each manifest cloud is the dense reference; the sparse input is a seeded
/// random subset of `1/r` of its points.
fn load_sources(data_dir: &Path, config: &TrainConfig) -> CliResult<Vec<ShapeSource>> {
    let r = config.model.r;
    read_manifest(data_dir)?
        .into_iter()
        .enumerate()
        .map(|(i, entry)| {
            let shape: AnalyticShape = entry.shape.parse()?;
            let dense = read_cloud(data_dir.join(&entry.file))?;
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut keep = sample(&mut rng, dense.len(), dense.len() / r).into_vec();
            keep.sort_unstable();
            let sparse = keep.into_iter().map(|j| dense[j]).collect();
            Ok(ShapeSource { shape, sparse, dense })
        })
        .collect()
}

pub fn train_cmd(args: &TrainArgs) -> CliResult<()> {
    let config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            TrainConfig::from_kv(&text)?
        }
        None => TrainConfig::default(),
    };
    for (key, value) in config.entries() {
        println!("config {key} = {value}");
    }
    let sources = load_sources(&args.data_dir, &config)?;
    let dataset = build_dataset(
        &sources,
        config.data.pairs_per_shape,
        config.data.val_fraction,
        config.model.n,
        config.model.r,
        config.seed,
    )?;
    println!("dataset: {} train pairs, {} validation pairs", dataset.train.len(), dataset.val.len());
    let outcome = train(&config, &dataset, |row| {
        println!(
            "epoch {:>4}  loss {:.6}  lambda {:.4}  lr {:.2e}  val_cd {:.4}",
            row.epoch, row.loss, row.lambda, row.lr, row.val_cd
        );
    })?;
    outcome.best.save(&args.out)?;
    write_text(&log_path(&args.out), &log_to_csv(&outcome.log))?;
    let last = outcome.log.last().expect("training runs at least one epoch");
    println!("final val CD (x1000): {:.6}", last.val_cd);
    println!("best epoch {} saved to {}", outcome.best_epoch, args.out.display());
    Ok(())
}

/// `<stem>_coarse.<ext>` next to `out`.
pub fn coarse_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}_coarse.{}", ext.to_string_lossy()),
        None => format!("{stem}_coarse"),
    };
    out.with_file_name(name)
}

pub fn upsample(args: &UpsampleArgs) -> CliResult<()> {
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    let model = &checkpoint.config.model;
    if model.r != args.rate {
        return Err(CliError::Usage(format!(
            "--rate {} does not match the checkpoint's rate {}",
            args.rate, model.r
        )));
    }
    let params = checkpoint.params_for(model)?;
    let cloud = read_cloud(&args.input)?;
    if cloud.len() < model.n {
        return Err(Error::invalid(format!(
            "input has {} points; the checkpoint needs at least {} per patch",
            cloud.len(),
            model.n
        ))
        .into());
    }
    let set = PatchSet::cover(&cloud, model.n)?;
    let pairs = select_adjacent_pairs(&set, 3, ClusterParams::default())?;
    let mut refined = Vec::with_capacity(pairs.len());
    let mut coarse = Vec::with_capacity(pairs.len());
    for s in &pairs {
        let out = upsample_patch_pair(&s.pair, params, model)?;
        refined.push(s.pair.transform.denormalize_all(&out.refined));
        coarse.push(s.pair.transform.denormalize_all(&out.coarse));
    }
    let target = cloud.len() * model.r;
    write_cloud(&args.out, &merge_patches(&refined, target)?)?;
    if args.emit_coarse {
        write_cloud(coarse_path(&args.out), &merge_patches(&coarse, target)?)?;
    }
    println!("upsampled {} points to {target} from {} patches", cloud.len(), pairs.len());
    Ok(())
}

/// Metric rows as written by `eval`, values x1000.
pub fn metric_csv(report: &MetricReport) -> String {
    let mut out = String::from("metric,value\n");
    for (name, value) in report.scaled().rows() {
        let _ = writeln!(out, "{name},{value:?}");
    }
    out
}

pub fn eval(args: &EvalArgs) -> CliResult<()> {
    let pred = read_cloud(&args.pred)?;
    let gt = read_cloud(&args.gt)?;
    if pred.len() != gt.len() {
        eprintln!(
            "warning: {} predicted vs {} reference points; skipping emd",
            pred.len(),
            gt.len()
        );
    }
    let report = MetricReport::compute(&pred, &gt, args.shape.as_ref())?;
    write_text(&args.out, &metric_csv(&report))?;
    println!("{}", report.scaled());
    Ok(())
}

/// Noise in the unit frame of `points`, mapped back to object units.
pub fn noisy_cloud(points: &[Point3], level: f64, seed: u64) -> patchup::Result<Vec<Point3>> {
    let t = Transform::fit(points)?;
    let noisy = add_gaussian_noise(&t.normalize_all(points), level, seed)?;
    Ok(t.denormalize_all(&noisy))
}

pub fn noise(args: &NoiseArgs) -> CliResult<()> {
    if args.level.is_nan() || args.level < 0.0 {
        return Err(CliError::Usage(format!("--level must be >= 0, got {}", args.level)));
    }
    let cloud = read_cloud(&args.input)?;
    write_cloud(&args.out, &noisy_cloud(&cloud, args.level, args.seed)?)?;
    Ok(())
}
