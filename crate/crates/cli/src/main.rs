//! Command-line driver: synthesize scenes, run individual stages on their
//! documented file formats, or run the whole pipeline.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 stage failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tubeseg::boundaries::{image_boundaries, motion_boundaries, BoundaryMap, BoundaryParams};
use tubeseg::config::PipelineConfig;
use tubeseg::error::Error;
use tubeseg::metrics::evaluate;
use tubeseg::mops::{generate_proposals, ProposalSource};
use tubeseg::objectness::{rank, Aggregate, DiversifyParams, Scorer};
use tubeseg::pipeline::{load_proposals, overlay, run_pipeline, save_proposals};
use tubeseg::randomwalk::{
    diffuse, load_cluster_pool, mark_from_proposal, save_cluster_pool, save_soft_labels,
    spectral_clusters, TrajectoryCluster,
};
use tubeseg::trajectories::{link_trajectories, load_trajectories, save_trajectories};
use tubeseg::tubes::{build_supervoxels, project_cluster, superpixels, Tube};
use tubeseg::videoio::{
    load_flow, load_frame, load_scene, load_tube, save_gray8, save_scene, save_tube, synth,
};

#[derive(Parser)]
#[command(
    name = "tubeseg",
    about = "Spatio-temporal tube proposals for moving objects"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Pipeline config file (key = value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Individual config overrides, e.g. --set lambda=0.5 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> anyhow::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_file(path)?,
            None => PipelineConfig::default(),
        };
        for kv in &self.set {
            let (key, value) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects key=value, got '{kv}'")))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene with exact ground truth.
    Synth {
        /// Output scene directory.
        #[arg(long)]
        out: PathBuf,
        /// Built-in scene: single-rect or two-objects.
        #[arg(long, conflicts_with = "spec")]
        preset: Option<String>,
        /// Scene spec JSON (overrides --preset).
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compute a boundary map from a flow field or a frame.
    Boundaries {
        /// Input .flo flow field (motion boundaries).
        #[arg(long, conflicts_with = "frame")]
        flow: Option<PathBuf>,
        /// Input PGM/PPM frame (static boundaries).
        #[arg(long)]
        frame: Option<PathBuf>,
        /// Output 8-bit PGM (quantized; the in-process pipeline keeps full precision).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        sigma: f64,
        #[arg(long, default_value_t = false)]
        nms: bool,
    },
    /// Generate figure-ground proposals from a boundary-map PGM.
    Mops {
        #[arg(long)]
        boundary: PathBuf,
        /// Output directory (tube containers of length 1 plus index.json).
        #[arg(long)]
        out: PathBuf,
        /// Frame index recorded on each proposal.
        #[arg(long, default_value_t = 0)]
        frame_index: usize,
        /// Proposal source label: motion or static.
        #[arg(long, default_value = "motion")]
        source: String,
        #[arg(long, default_value_t = 64)]
        num_seeds: usize,
        #[arg(long, default_value_t = 0.95)]
        dedup: f64,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Link dense point trajectories from a scene's flow fields.
    Track {
        #[arg(long)]
        scene: PathBuf,
        /// Output JSON-lines trajectory file.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Build trajectory clusters: proposal diffusion plus multiscale spectral.
    Cluster {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        trajectories: PathBuf,
        /// Proposal directory (index.json) to diffuse; optional.
        #[arg(long)]
        proposals: Option<PathBuf>,
        /// Output cluster pool JSON.
        #[arg(long)]
        out: PathBuf,
        /// Also export the sparse affinity as text triplets.
        #[arg(long)]
        affinity_out: Option<PathBuf>,
        /// Also export per-proposal soft labels as JSON lines.
        #[arg(long)]
        soft_out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Project a cluster pool to pixel tubes via supervoxels.
    Tubes {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        trajectories: PathBuf,
        #[arg(long)]
        clusters: PathBuf,
        /// Output directory (tube_NNN containers).
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score and rank tube containers.
    Rank {
        #[arg(long)]
        scene: PathBuf,
        /// Directory holding tube_NNN containers.
        #[arg(long)]
        tubes: PathBuf,
        /// Output ranked JSON.
        #[arg(long)]
        out: PathBuf,
        /// External per-box score file instead of center-surround.
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long, default_value_t = false)]
        no_diversify: bool,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// Average box scores over the lifespan instead of summing.
        #[arg(long, default_value_t = false)]
        mean: bool,
    },
    /// Evaluate a ranked tube pool against the scene's ground truth.
    Eval {
        #[arg(long)]
        scene: PathBuf,
        /// ranked.json from the rank step; tube paths resolve against its directory.
        #[arg(long)]
        ranked: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV curve output.
        #[arg(long)]
        curve: Option<PathBuf>,
        /// Comma-separated pool prefix sizes.
        #[arg(long)]
        at_sizes: Option<String>,
    },
    /// Render a tube as 0.5-alpha overlays on the scene frames.
    Overlay {
        #[arg(long)]
        scene: PathBuf,
        /// Tube container directory.
        #[arg(long)]
        tube: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the whole pipeline on a scene manifest.
    Run {
        #[arg(long)]
        scene: PathBuf,
        /// Output directory for all intermediates and the run manifest.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker cap (0 = all cores).
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = match err.downcast_ref::<Error>() {
                Some(Error::Config(_)) | Some(Error::InvalidArgument(_)) => 2,
                Some(Error::Io { .. }) | Some(Error::Format { .. }) => 3,
                Some(_) => 4,
                None => 4,
            };
            ExitCode::from(code)
        }
    }
}

fn load_boundary_pgm(path: &Path) -> anyhow::Result<BoundaryMap> {
    let frame = load_frame(path)?;
    if frame.channels != 1 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "boundary map must be grayscale".into(),
        }
        .into());
    }
    let data: Vec<u8> = frame
        .data
        .iter()
        .map(|v| (v * 255.0).round() as u8)
        .collect();
    Ok(BoundaryMap::from_gray8(frame.width, frame.height, &data))
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Synth {
            out,
            preset,
            spec,
            seed,
        } => {
            let cfg = if let Some(spec) = spec {
                let json = std::fs::read_to_string(&spec).map_err(|e| Error::Io {
                    path: spec.clone(),
                    source: e,
                })?;
                let mut cfg: synth::SynthConfig = serde_json::from_str(&json)
                    .map_err(|e| Error::Config(format!("scene spec: {e}")))?;
                cfg.seed = seed;
                cfg
            } else {
                match preset.as_deref() {
                    Some("single-rect") | None => synth::presets::single_rect(seed),
                    Some("two-objects") => synth::presets::two_objects(seed),
                    Some(other) => {
                        return Err(Error::Config(format!("unknown preset '{other}'")).into())
                    }
                }
            };
            let scene = synth::synthesize(&cfg)?;
            let manifest = save_scene(&out, &scene)?;
            println!("wrote scene manifest {}", manifest.display());
            Ok(())
        }
        Command::Boundaries {
            flow,
            frame,
            out,
            sigma,
            nms,
        } => {
            let params = BoundaryParams { sigma, nms };
            let map = match (flow, frame) {
                (Some(flow), None) => motion_boundaries(&load_flow(flow)?, &params)?,
                (None, Some(frame)) => image_boundaries(&load_frame(frame)?, &params)?,
                _ => {
                    return Err(Error::Config("need exactly one of --flow / --frame".into()).into())
                }
            };
            save_gray8(&out, map.width, map.height, &map.to_gray8())?;
            println!("wrote boundary map {}", out.display());
            Ok(())
        }
        Command::Mops {
            boundary,
            out,
            frame_index,
            source,
            num_seeds,
            dedup,
            eps,
            seed,
        } => {
            let source = match source.as_str() {
                "motion" => ProposalSource::Motion,
                "static" => ProposalSource::Static,
                other => return Err(Error::Config(format!("bad source '{other}'")).into()),
            };
            let map = load_boundary_pgm(&boundary)?;
            let params = tubeseg::mops::ProposalParams {
                num_seeds,
                dedup_threshold: dedup,
                eps,
            };
            let proposals = generate_proposals(&map, &params, frame_index, source, seed)?;
            save_proposals(&out, &proposals)?;
            println!(
                "wrote {} proposals under {}",
                proposals.len(),
                out.display()
            );
            Ok(())
        }
        Command::Track { scene, out, config } => {
            let cfg = config.resolve()?;
            let scene = load_scene(&scene)?;
            let ts = link_trajectories(&scene.flows, &scene.backward_flows, &cfg.track_params())?;
            save_trajectories(&out, &ts)?;
            println!("wrote {} trajectories to {}", ts.len(), out.display());
            Ok(())
        }
        Command::Cluster {
            scene,
            trajectories,
            proposals,
            out,
            affinity_out,
            soft_out,
            config,
        } => {
            let cfg = config.resolve()?;
            let scene = load_scene(&scene)?;
            let ts = load_trajectories(
                &trajectories,
                scene.frame_count(),
                scene.width(),
                scene.height(),
            )?;
            let affinity = tubeseg::affinity::build_affinity(&ts, &cfg.affinity_params())?;
            if let Some(path) = affinity_out {
                tubeseg::affinity::save_affinity(path, &affinity)?;
            }
            let mut clusters: Vec<TrajectoryCluster> = Vec::new();
            let mut labelings = Vec::new();
            if let Some(dir) = proposals {
                for (idx, p) in load_proposals(&dir)?.iter().enumerate() {
                    let marked = mark_from_proposal(p, &ts)?;
                    let diffused = diffuse(&affinity, &marked, cfg.diffusion_iters)?;
                    if let Some(c) = TrajectoryCluster::from_soft_labels(
                        diffused.x.clone(),
                        cfg.member_threshold,
                        Some(idx),
                    ) {
                        clusters.push(c);
                    }
                    labelings.push((idx, diffused));
                }
            }
            let pool = spectral_clusters(&affinity, &cfg.k_list)?;
            for w in &pool.warnings {
                eprintln!("warning: {w}");
            }
            clusters.extend(pool.all_clusters());
            if let Some(path) = soft_out {
                let refs: Vec<(usize, &tubeseg::randomwalk::LabelAssignment)> =
                    labelings.iter().map(|(i, la)| (*i, la)).collect();
                save_soft_labels(path, &refs)?;
            }
            save_cluster_pool(&out, &clusters)?;
            println!("wrote {} clusters to {}", clusters.len(), out.display());
            Ok(())
        }
        Command::Tubes {
            scene,
            trajectories,
            clusters,
            out,
            config,
        } => {
            let cfg = config.resolve()?;
            let scene = load_scene(&scene)?;
            let ts = load_trajectories(
                &trajectories,
                scene.frame_count(),
                scene.width(),
                scene.height(),
            )?;
            let pool = load_cluster_pool(&clusters)?;
            let bparams = cfg.boundary_params();
            let partitions: Vec<_> = (0..scene.frame_count())
                .map(|t| {
                    let flow = if t < scene.flows.len() {
                        &scene.flows[t]
                    } else {
                        &scene.backward_flows[t - 1]
                    };
                    Ok(superpixels(
                        &motion_boundaries(flow, &bparams)?,
                        &cfg.superpixel_params(),
                    ))
                })
                .collect::<Result<_, Error>>()?;
            let svs = build_supervoxels(&partitions, &scene.flows, &cfg.supervoxel_params())?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            let mut written = 0usize;
            for cluster in &pool {
                match project_cluster(cluster, &ts, &svs, cfg.projection_threshold) {
                    Ok(tube) => {
                        save_tube(out.join(format!("tube_{written:03}")), &tube)?;
                        written += 1;
                    }
                    Err(Error::EmptyProjection) => {
                        eprintln!("warning: a cluster projected to an empty tube");
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            println!("wrote {written} tubes under {}", out.display());
            Ok(())
        }
        Command::Rank {
            scene,
            tubes,
            out,
            scores,
            no_diversify,
            gamma,
            mean,
        } => {
            let scene = load_scene(&scene)?;
            let (mut pool, names) = load_tube_dir(&tubes)?;
            let scorer = match scores {
                Some(path) => {
                    Scorer::External(tubeseg::objectness::ExternalScores::from_file(path)?)
                }
                None => Scorer::center_surround(&scene.flows),
            };
            let aggregate = if mean {
                Aggregate::Mean
            } else {
                Aggregate::Sum
            };
            let diversify = DiversifyParams {
                enabled: !no_diversify,
                gamma,
            };
            let ranked = rank(&mut pool, &scorer, aggregate, &diversify)?;
            #[derive(serde::Serialize)]
            #[serde(rename_all = "camelCase")]
            struct Record {
                tube_path: String,
                score: f64,
                rank: usize,
            }
            // tube paths are stored relative to the ranked.json location so
            // downstream stages can resolve them; absolute when elsewhere
            let out_parent = out
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or(Path::new("."))
                .canonicalize()
                .map_err(|e| Error::Io {
                    path: out.clone(),
                    source: e,
                })?;
            let tubes_abs = tubes.canonicalize().map_err(|e| Error::Io {
                path: tubes.clone(),
                source: e,
            })?;
            let records: Vec<Record> = ranked
                .items
                .iter()
                .enumerate()
                .map(|(pos, item)| {
                    let full = tubes_abs.join(&names[item.tube_index]);
                    let tube_path = full
                        .strip_prefix(&out_parent)
                        .map(|p| p.to_string_lossy().into_owned())
                        .unwrap_or_else(|_| full.to_string_lossy().into_owned());
                    Record {
                        tube_path,
                        score: item.score,
                        rank: pos,
                    }
                })
                .collect();
            std::fs::write(&out, serde_json::to_string_pretty(&records)?).map_err(|e| {
                Error::Io {
                    path: out.clone(),
                    source: e,
                }
            })?;
            println!("ranked {} tubes into {}", records.len(), out.display());
            Ok(())
        }
        Command::Eval {
            scene,
            ranked,
            out,
            curve,
            at_sizes,
        } => {
            let scene = load_scene(&scene)?;
            if scene.gt_tubes.is_empty() {
                return Err(Error::InvalidArgument("scene has no ground truth".into()).into());
            }
            let base = ranked.parent().unwrap_or(Path::new(".")).to_path_buf();
            let json = std::fs::read_to_string(&ranked).map_err(|e| Error::Io {
                path: ranked.clone(),
                source: e,
            })?;
            #[derive(serde::Deserialize)]
            #[serde(rename_all = "camelCase")]
            struct Record {
                tube_path: String,
            }
            let records: Vec<Record> = serde_json::from_str(&json).map_err(|e| Error::Format {
                path: ranked.clone(),
                message: e.to_string(),
            })?;
            let pool: Vec<Tube> = records
                .iter()
                .map(|r| load_tube(base.join(&r.tube_path)))
                .collect::<Result<_, _>>()?;
            let refs: Vec<&Tube> = pool.iter().collect();
            let sizes = match at_sizes {
                Some(s) => s
                    .split(',')
                    .map(|t| t.trim().parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| Error::Config(format!("bad --at-sizes: {e}")))?,
                None => tubeseg::metrics::default_curve_sizes(),
            };
            let report = evaluate(&refs, &scene.gt_tubes, &sizes)?;
            std::fs::write(&out, report.to_json()?).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            if let Some(curve) = curve {
                report.write_curve_csv(curve)?;
            }
            println!(
                "abo {:.4} coverage {:.4} det50 {:.4} det70 {:.4}",
                report.average_best_overlap, report.coverage, report.det50, report.det70
            );
            Ok(())
        }
        Command::Overlay { scene, tube, out } => {
            let scene = load_scene(&scene)?;
            let tube = load_tube(&tube)?;
            overlay(&tube, &scene.frames, &out)?;
            println!("wrote overlays under {}", out.display());
            Ok(())
        }
        Command::Run {
            scene,
            out,
            seed,
            threads,
            config,
        } => {
            let mut cfg = config.resolve()?;
            if threads > 0 {
                cfg.threads = threads;
            }
            let scene = load_scene(&scene)?;
            let output = run_pipeline(&scene, &cfg, seed, Some(&out))?;
            for w in &output.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "{} tubes ranked; outputs under {}",
                output.tubes.len(),
                out.display()
            );
            if let Some(report) = &output.tube_report {
                println!(
                    "tube metrics: abo {:.4} coverage {:.4} det50 {:.4} det70 {:.4}",
                    report.average_best_overlap, report.coverage, report.det50, report.det70
                );
            }
            if let Some(report) = &output.anytime_report {
                println!(
                    "anytime metrics: abo {:.4} det50 {:.4} det70 {:.4}",
                    report.average_best_overlap, report.det50, report.det70
                );
            }
            Ok(())
        }
    }
}

/// Load every `tube_*` container under a directory, sorted by name.
fn load_tube_dir(dir: &Path) -> anyhow::Result<(Vec<Tube>, Vec<String>)> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?
        .filter_map(|entry| {
            let entry = entry.ok()?;
            let name = entry.file_name().into_string().ok()?;
            (entry.path().is_dir() && name.starts_with("tube_")).then_some(name)
        })
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no tube_* containers under {}",
            dir.display()
        ))
        .into());
    }
    let tubes = names
        .iter()
        .map(|n| load_tube(dir.join(n)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((tubes, names))
}
