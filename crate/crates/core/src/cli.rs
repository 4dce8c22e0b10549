//! Command-line front end.
//!
//! The two training stages are explicit re-invocations: `pseudo-label --stage 1`
//! produces BFS labels to train on; once a network (out of scope here) has
//! predicted offsets and objectness, `pseudo-label --stage 2` turns them into
//! refined labels.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aoia::{aoia_infer, AoiaParams, InfluenceSpace};
use crate::cluster::{bfs_cluster, select_optimal_samples, BfsParams, SelectionBand};
use crate::eval::evaluate;
use crate::objectness::{recompose_scene, RecomposeParams, Sample, VirtualScene};
use crate::parallel;
use crate::pcio::{self, CategoryConfig, LabeledCloud, SignalSet};
use crate::shapes::{fragment_vertically, random_sample};
use crate::signals::{
    grid_supervoxels, oracle_objectness, oracle_offsets, perturb, smooth_by_supervoxel, NoiseModel,
    SupervoxelPartition,
};
use crate::spatial::project_birdview;

#[derive(Debug, Parser)]
#[command(
    name = "pcseg",
    version,
    about = "Instance pseudo labels from semantic point clouds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate recomposed training scenes with oracle signals.
    Synth(SynthArgs),
    /// Stage 1: BFS plus sample selection. Stage 2: core/boundary inference from signals.
    PseudoLabel(PseudoLabelArgs),
    /// Score a clustering against ground truth.
    Eval(EvalArgs),
    /// Average semantic scores within supervoxels.
    Smooth(SmoothArgs),
    /// Shape-aware objectness (and optionally offsets) from instance labels.
    Objectness(ObjectnessArgs),
    /// Plain BFS clustering, no selection.
    Cluster(ClusterArgs),
}

fn parse_pair<T: std::str::FromStr>(s: &str) -> Result<(T, T), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected 'lo,hi', got '{s}'"))?;
    let parse = |t: &str| {
        t.trim()
            .parse::<T>()
            .map_err(|_| format!("'{t}' is not a valid number"))
    };
    Ok((parse(a)?, parse(b)?))
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 5000)]
    num_scenes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "0.01,0.1", value_parser = parse_pair::<f64>)]
    min_gap_range: (f64, f64),
    #[arg(long, default_value_t = 0.0)]
    drop_prob: f64,
    /// Instances per scene, inclusive.
    #[arg(long, default_value = "2,9", value_parser = parse_pair::<usize>)]
    instances: (usize, usize),
    /// Surface sampling density, points per square meter.
    #[arg(long, default_value_t = 1000.0)]
    density: f64,
    #[arg(long, default_value_t = 0.0)]
    offset_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    flip_prob: f64,
    /// Probability that a sample is split into two vertical fragments.
    #[arg(long, default_value_t = 0.0)]
    fragment_prob: f64,
    #[arg(long, default_value = "0.2,0.4", value_parser = parse_pair::<f64>)]
    fragment_gap: (f64, f64),
}

#[derive(Debug, Args)]
struct BfsArgs {
    #[arg(long, default_value_t = 0.05)]
    radius: f64,
    #[arg(long, default_value_t = 50)]
    min_points: usize,
}

#[derive(Debug, Args)]
struct PseudoLabelArgs {
    /// Cloud with semantic labels (ground truth or predicted).
    cloud: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    stage: u8,
    /// Offsets and objectness, required for stage 2.
    #[arg(long)]
    signals: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    bfs: BfsArgs,
    #[arg(long, default_value = "0.3,0.7", value_parser = parse_pair::<f64>)]
    band: (f64, f64),
    /// Stage 2 core grouping radius.
    #[arg(long, default_value_t = 0.05)]
    core_radius: f64,
    #[arg(long, default_value_t = 3.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 1)]
    obj_threshold: i8,
    #[arg(long, default_value_t = 50)]
    min_core_points: usize,
    /// Drop the vertical axis before grouping.
    #[arg(long)]
    birdview: bool,
    #[arg(long, default_value_t = 0.05)]
    subsample_voxel: f64,
    #[arg(long, default_value_t = 20_000)]
    subsample_trigger: usize,
    /// Coordinates boundary points are absorbed in.
    #[arg(long, value_enum, default_value_t = SpaceArg::Shifted)]
    influence_space: SpaceArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SpaceArg {
    Shifted,
    Original,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Predicted clustering.
    pred: PathBuf,
    /// Ground-truth cloud with instance labels.
    gt: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// One flat JSON object instead of key=value lines and a table.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct SmoothArgs {
    /// Signal file with a `sem` column.
    scores: PathBuf,
    /// Supervoxel ids; alternatively `--cloud` with `--voxel`.
    #[arg(long, conflicts_with = "cloud")]
    supervoxels: Option<PathBuf>,
    #[arg(long, requires = "voxel")]
    cloud: Option<PathBuf>,
    #[arg(long)]
    voxel: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ObjectnessArgs {
    /// Cloud with instance labels.
    cloud: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write instance-center offsets.
    #[arg(long)]
    offsets: bool,
    #[arg(long, default_value_t = 0.0)]
    offset_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    flip_prob: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    cloud: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    bfs: BfsArgs,
    #[arg(long)]
    birdview: bool,
}

/// Settings for one batch of synthetic scenes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub seed: u64,
    pub min_gap_range: (f64, f64),
    pub drop_prob: f64,
    /// Inclusive range of instances drawn per scene.
    pub instances: (usize, usize),
    pub density: f64,
    pub offset_sigma: f64,
    pub flip_prob: f64,
    pub fragment_prob: f64,
    pub fragment_gap: (f64, f64),
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 0,
            min_gap_range: (0.01, 0.1),
            drop_prob: 0.0,
            instances: (2, 9),
            density: 1000.0,
            offset_sigma: 0.0,
            flip_prob: 0.0,
            fragment_prob: 0.0,
            fragment_gap: (0.2, 0.4),
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo < hi {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Builds scene `index` of a batch. Scene `i` draws everything from stream `i`
/// of a ChaCha8 generator seeded with `params.seed`, so any scene can be
/// regenerated alone. Signals are the oracle offsets and objectness, perturbed
/// by the configured noise.
pub fn synth_scene(index: u64, params: &SynthParams) -> crate::Result<(VirtualScene, SignalSet)> {
    let (lo, hi) = params.instances;
    if lo == 0 || lo > hi || hi > RecomposeParams::default().max_samples {
        return Err(crate::Error::invalid(format!(
            "instances per scene {lo},{hi} must satisfy 1 <= lo <= hi <= 9"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(index);
    let count = rng.random_range(lo..=hi);
    let samples: Vec<Sample> = (0..count)
        .map(|_| {
            let mut s = random_sample(params.density, &mut rng);
            if rng.random::<f64>() < params.fragment_prob {
                let cut = rng.random_range(0.35..0.65);
                let gap = draw(&mut rng, params.fragment_gap);
                s.coords = fragment_vertically(&s.coords, cut, gap);
            }
            s
        })
        .collect();
    let recompose = RecomposeParams {
        min_gap: draw(&mut rng, params.min_gap_range),
        drop_prob: params.drop_prob,
        seed: rng.random(),
        ..RecomposeParams::default()
    };
    let noise = NoiseModel {
        offset_sigma: params.offset_sigma,
        flip_prob: params.flip_prob,
        seed: rng.random(),
    };
    let scene = recompose_scene(&samples, &recompose)?;
    let clean = SignalSet {
        offsets: Some(oracle_offsets(&scene.cloud)?),
        objectness: Some(scene.objectness.ids.clone()),
        sem_scores: None,
    };
    let signals = perturb(&clean, &noise)?;
    Ok((scene, signals))
}

/// Every semantic id >= 0 present in the given label sets is foreground.
fn implied_config<'a>(labels: impl IntoIterator<Item = &'a [i32]>) -> CategoryConfig {
    let ids: Vec<i32> = labels
        .into_iter()
        .flat_map(|l| l.iter().copied())
        .filter(|&s| s >= 0)
        .collect();
    let num = ids.iter().max().map_or(0, |&m| m as u32 + 1);
    CategoryConfig {
        num_categories: num,
        foreground: ids.into_iter().collect(),
        names: Default::default(),
    }
}

fn load_config(
    path: Option<&Path>,
    fallback: impl FnOnce() -> CategoryConfig,
) -> anyhow::Result<CategoryConfig> {
    Ok(match path {
        Some(p) => pcio::read_config(p)?,
        None => fallback(),
    })
}

fn semantic_of(cloud: &LabeledCloud) -> anyhow::Result<&[i32]> {
    cloud.semantic().context("cloud has no semantic labels")
}

/// Parses `args` (including the program name) and runs the command, writing
/// reports to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> anyhow::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    match cli.command {
        Command::Synth(a) => cmd_synth(a, out),
        Command::PseudoLabel(a) => cmd_pseudo_label(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Smooth(a) => cmd_smooth(a, out),
        Command::Objectness(a) => cmd_objectness(a, out),
        Command::Cluster(a) => cmd_cluster(a, out),
    }
}

fn cmd_synth(a: SynthArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let params = SynthParams {
        seed: a.seed,
        min_gap_range: a.min_gap_range,
        drop_prob: a.drop_prob,
        instances: a.instances,
        density: a.density,
        offset_sigma: a.offset_sigma,
        flip_prob: a.flip_prob,
        fragment_prob: a.fragment_prob,
        fragment_gap: a.fragment_gap,
    };
    if !(params.density > 0.0 && params.density.is_finite()) {
        bail!("--density must be positive");
    }
    let (glo, ghi) = params.min_gap_range;
    if !(0.0 <= glo && glo <= ghi && ghi.is_finite()) {
        bail!("--min-gap-range must satisfy 0 <= lo <= hi");
    }
    fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    let results = parallel::map_range(a.num_scenes, |i| -> anyhow::Result<usize> {
        let (scene, signals) = synth_scene(i as u64, &params)?;
        let stem = a.out.join(format!("scene_{i:05}"));
        pcio::write_cloud(&scene.cloud, stem.with_extension("pcseg"))?;
        pcio::write_signals(&signals, stem.with_extension("sig"))?;
        Ok(scene.cloud.len())
    });
    let mut points = 0;
    for r in results {
        points += r?;
    }
    writeln!(out, "scenes={}", a.num_scenes)?;
    writeln!(out, "points={points}")?;
    Ok(())
}

fn cmd_pseudo_label(a: PseudoLabelArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let cloud = pcio::read_cloud(&a.cloud)?;
    let semantic = semantic_of(&cloud)?;
    let config = load_config(a.config.as_deref(), || implied_config([semantic]))?;
    let clustering = match a.stage {
        1 => {
            let band = SelectionBand::new(a.band.0, a.band.1)?;
            let params = BfsParams {
                radius: a.bfs.radius,
                min_points: a.bfs.min_points,
            };
            let coords = if a.birdview {
                project_birdview(cloud.coords())
            } else {
                cloud.coords().to_vec()
            };
            let all = bfs_cluster(&coords, semantic, &config.foreground, &params)?;
            select_optimal_samples(&all, &band)
        }
        _ => {
            let path = a.signals.as_ref().context("stage 2 needs --signals")?;
            let signals = pcio::read_signals(path)?;
            let params = AoiaParams {
                core_radius: a.core_radius,
                objectness_threshold: a.obj_threshold,
                epsilon: a.epsilon,
                subsample_voxel: a.subsample_voxel,
                subsample_trigger: a.subsample_trigger,
                birdview: a.birdview,
                min_core_cluster: a.min_core_points,
                influence_space: match a.influence_space {
                    SpaceArg::Shifted => InfluenceSpace::Shifted,
                    SpaceArg::Original => InfluenceSpace::Original,
                },
            };
            aoia_infer(cloud.coords(), semantic, &signals, &config, &params)?
        }
    };
    pcio::write_clustering(&cloud, &clustering, &a.out)?;
    report_clustering(&clustering, out)
}

fn report_clustering(c: &crate::Clustering, out: &mut dyn Write) -> anyhow::Result<()> {
    let labeled = c.assignment().iter().filter(|&&v| v >= 0).count();
    writeln!(out, "clusters={}", c.num_clusters())?;
    writeln!(out, "labeled_points={labeled}")?;
    writeln!(out, "points={}", c.len())?;
    Ok(())
}

fn cmd_cluster(a: ClusterArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let cloud = pcio::read_cloud(&a.cloud)?;
    let semantic = semantic_of(&cloud)?;
    let config = load_config(a.config.as_deref(), || implied_config([semantic]))?;
    let params = BfsParams {
        radius: a.bfs.radius,
        min_points: a.bfs.min_points,
    };
    let coords = if a.birdview {
        project_birdview(cloud.coords())
    } else {
        cloud.coords().to_vec()
    };
    let clustering = bfs_cluster(&coords, semantic, &config.foreground, &params)?;
    pcio::write_clustering(&cloud, &clustering, &a.out)?;
    report_clustering(&clustering, out)
}

fn cmd_eval(a: EvalArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let (pred_cloud, pred) = pcio::read_clustering(&a.pred)?;
    let (gt_cloud, gt) = pcio::read_clustering(&a.gt)?;
    if pred.len() != gt.len() {
        bail!(
            "prediction has {} points but ground truth has {}",
            pred.len(),
            gt.len()
        );
    }
    let config = load_config(a.config.as_deref(), || {
        implied_config(pred_cloud.semantic().into_iter().chain(gt_cloud.semantic()))
    })?;
    let report = evaluate(&pred, &gt, &config)?;
    if a.json {
        writeln!(out, "{}", report.to_json())?;
    } else {
        write!(out, "{}", report.to_key_values())?;
        writeln!(out)?;
        write!(out, "{}", report.to_table())?;
    }
    Ok(())
}

fn cmd_smooth(a: SmoothArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let mut signals = pcio::read_signals(&a.scores)?;
    let scores = signals
        .sem_scores
        .as_ref()
        .context("score file has no sem column")?;
    let partition = match (&a.supervoxels, &a.cloud, a.voxel) {
        (Some(p), _, _) => SupervoxelPartition(pcio::read_supervoxels(p)?),
        (None, Some(c), Some(v)) => grid_supervoxels(pcio::read_cloud(c)?.coords(), v)?,
        _ => bail!("smooth needs --supervoxels or --cloud with --voxel"),
    };
    let smoothed = smooth_by_supervoxel(scores, &partition)?;
    let groups = partition
        .0
        .iter()
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    signals.sem_scores = Some(smoothed);
    pcio::write_signals(&signals, &a.out)?;
    writeln!(out, "supervoxels={groups}")?;
    Ok(())
}

fn cmd_objectness(a: ObjectnessArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let cloud = pcio::read_cloud(&a.cloud)?;
    if cloud.instance().is_none() {
        bail!("objectness needs instance labels");
    }
    let clean = SignalSet {
        offsets: if a.offsets {
            Some(oracle_offsets(&cloud)?)
        } else {
            None
        },
        objectness: Some(oracle_objectness(&cloud)?),
        sem_scores: None,
    };
    let noise = NoiseModel {
        offset_sigma: a.offset_sigma,
        flip_prob: a.flip_prob,
        seed: a.seed,
    };
    let signals = perturb(&clean, &noise)?;
    pcio::write_signals(&signals, &a.out)?;
    let ids = signals.objectness.as_deref().unwrap_or_default();
    let mut counts = [0usize; 5];
    for &id in ids.iter().filter(|&&id| id >= 0) {
        counts[id as usize] += 1;
    }
    for (k, c) in counts.iter().enumerate() {
        writeln!(out, "objectness.{k}={c}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs() {
        assert_eq!(parse_pair::<f64>("0.3, 0.7"), Ok((0.3, 0.7)));
        assert!(parse_pair::<f64>("0.3").is_err());
        assert!(parse_pair::<usize>("2.5,3").is_err());
    }

    #[test]
    fn synth_scenes_are_independent_of_batch() {
        let p = SynthParams {
            density: 300.0,
            ..SynthParams::default()
        };
        let (a, sa) = synth_scene(3, &p).unwrap();
        let (b, sb) = synth_scene(3, &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        let (c, _) = synth_scene(4, &p).unwrap();
        assert_ne!(a.cloud, c.cloud);
    }

    #[test]
    fn implied_config_takes_present_ids() {
        let cfg = implied_config([&[-1, 3, 3, 0][..], &[5][..]]);
        assert_eq!(cfg.num_categories, 6);
        assert_eq!(
            cfg.foreground.into_iter().collect::<Vec<_>>(),
            vec![0, 3, 5]
        );
    }

    #[test]
    fn stage_must_be_one_or_two() {
        let mut sink = Vec::new();
        let err = run(
            [
                "pcseg",
                "pseudo-label",
                "x.pcseg",
                "--stage",
                "3",
                "--out",
                "y",
            ],
            &mut sink,
        )
        .unwrap_err();
        assert!(err.downcast_ref::<clap::Error>().is_some());
    }
}
