//! End-to-end pipeline: boundaries, proposals, objectness filter, trajectory
//! linking, affinities, label propagation, multiscale spectral clusters,
//! supervoxel projection, ranking and evaluation. Intermediates and a run
//! manifest land under the output directory; identical inputs, config and
//! seed reproduce every output byte for byte.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::boundaries::{image_boundaries, motion_boundaries, BoundaryMap};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, evaluate_per_frame, EvalReport};
use crate::mops::{generate_proposals, Proposal, ProposalSource};
use crate::objectness::{filter_proposals, rank, RankedList, Scorer};
use crate::randomwalk::{
    diffuse, mark_from_proposal, save_cluster_pool, save_soft_labels, spectral_clusters,
    LabelAssignment, TrajectoryCluster,
};
use crate::trajectories::{link_trajectories, save_trajectories};
use crate::tubes::{build_supervoxels, project_cluster, superpixels, Partition, Tube};
use crate::videoio::{save_frame, save_gray8, save_tube, Frame, Scene};

pub struct PipelineOutput {
    pub ranked: RankedList,
    pub tubes: Vec<Tube>,
    pub tube_report: Option<EvalReport>,
    pub anytime_report: Option<EvalReport>,
    pub warnings: Vec<String>,
    /// Per-tube provenance: the proposal source when the cluster came from a
    /// proposal, None for spectral clusters.
    pub tube_sources: Vec<Option<ProposalSource>>,
}

/// Run the full pipeline on a scene. When `out_dir` is given, every stage's
/// output is written there along with `run.json`.
pub fn run_pipeline(
    scene: &Scene,
    cfg: &PipelineConfig,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<PipelineOutput> {
    cfg.validate()?;
    if scene.frames.len() < 2 || scene.flows.len() + 1 != scene.frames.len() {
        return Err(Error::InvalidArgument(
            "scene needs n frames and n-1 flows".into(),
        ));
    }
    if scene.backward_flows.len() != scene.flows.len() {
        return Err(Error::InvalidArgument("scene needs backward flows".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(scene, cfg, seed, out_dir))
}

fn run_inner(
    scene: &Scene,
    cfg: &PipelineConfig,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<PipelineOutput> {
    let mut warnings: Vec<String> = Vec::new();
    let frame_count = scene.frames.len();

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    // Per-frame boundary maps. Frames 0..F-2 use the forward flow at that
    // frame; the last frame uses the magnitude of the backward flow into it,
    // which sits at the last frame's object positions.
    let bparams = cfg.boundary_params();
    let boundary_maps: Vec<BoundaryMap> = (0..frame_count)
        .into_par_iter()
        .map(|t| {
            let flow = if t < scene.flows.len() {
                &scene.flows[t]
            } else {
                &scene.backward_flows[t - 1]
            };
            motion_boundaries(flow, &bparams)
                .map_err(|e| e.in_stage("boundaries", format!("frame {t}")))
        })
        .collect::<Result<_>>()?;

    // Proposal pools: motion proposals wherever the motion-boundary map is
    // non-trivial, plus static proposals from image boundaries everywhere.
    let pparams = cfg.proposal_params();
    let per_frame: Vec<(Vec<Proposal>, bool)> = (0..frame_count)
        .into_par_iter()
        .map(|t| -> Result<(Vec<Proposal>, bool)> {
            let mut frame_pool = Vec::new();
            let mut motion_skipped = false;
            if boundary_maps[t].max_strength() > 1e-6 {
                let mops = generate_proposals(
                    &boundary_maps[t],
                    &pparams,
                    t,
                    ProposalSource::Motion,
                    stage_seed(seed, t, 0),
                )
                .map_err(|e| e.in_stage("mops", format!("frame {t}")))?;
                frame_pool.extend(mops);
            } else {
                motion_skipped = true;
            }
            let static_map = image_boundaries(&scene.frames[t], &bparams)
                .map_err(|e| e.in_stage("boundaries", format!("static frame {t}")))?;
            let statics = generate_proposals(
                &static_map,
                &pparams,
                t,
                ProposalSource::Static,
                stage_seed(seed, t, 1),
            )
            .map_err(|e| e.in_stage("mops", format!("static frame {t}")))?;
            frame_pool.extend(statics);
            Ok((frame_pool, motion_skipped))
        })
        .collect::<Result<_>>()?;
    let mut proposals: Vec<Proposal> = Vec::new();
    let mut skipped_frames = 0usize;
    for (pool, skipped) in per_frame {
        proposals.extend(pool);
        skipped_frames += skipped as usize;
    }
    if skipped_frames == frame_count {
        warnings.push("motion proposal pool is empty: no motion boundaries found".into());
    } else if skipped_frames > 0 {
        warnings.push(format!("{skipped_frames} frames had no motion boundaries"));
    }
    if proposals.is_empty() {
        return Err(
            Error::InvalidArgument("no proposals generated".into()).in_stage("mops", "all frames")
        );
    }

    // Objectness filter on the combined pool.
    let scorer = Scorer::center_surround(&scene.flows);
    let filtered = filter_proposals(&proposals, &scorer, cfg.keep_top)
        .map_err(|e| e.in_stage("filter", "proposal pool"))?;

    // Trajectories and affinities.
    let ts = link_trajectories(&scene.flows, &scene.backward_flows, &cfg.track_params())
        .map_err(|e| e.in_stage("track", "flow sequence"))?;
    if ts.is_empty() {
        return Err(
            Error::InvalidArgument("no trajectories survived linking".into())
                .in_stage("track", "flow sequence"),
        );
    }
    let affinity = crate::affinity::build_affinity(&ts, &cfg.affinity_params())
        .map_err(|e| e.in_stage("affinity", "trajectory set"))?;

    // Extend each surviving proposal to a trajectory cluster by diffusion.
    let labelings: Vec<Option<(usize, LabelAssignment)>> = filtered
        .par_iter()
        .enumerate()
        .map(|(idx, p)| -> Result<Option<(usize, LabelAssignment)>> {
            let marked = match mark_from_proposal(p, &ts) {
                Ok(m) => m,
                Err(Error::UnmarkableProposal { .. }) => return Ok(None),
                Err(e) => return Err(e.in_stage("cluster", format!("proposal {idx}"))),
            };
            let diffused = diffuse(&affinity, &marked, cfg.diffusion_iters)
                .map_err(|e| e.in_stage("cluster", format!("proposal {idx}")))?;
            Ok(Some((idx, diffused)))
        })
        .collect::<Result<_>>()?;
    let mut clusters: Vec<TrajectoryCluster> = Vec::new();
    let mut kept_labelings: Vec<(usize, LabelAssignment)> = Vec::new();
    for entry in labelings.into_iter().flatten() {
        let (idx, la) = entry;
        match TrajectoryCluster::from_soft_labels(la.x.clone(), cfg.member_threshold, Some(idx)) {
            Some(c) => {
                clusters.push(c);
                kept_labelings.push((idx, la));
            }
            None => warnings.push(format!("proposal {idx} diffused to an empty cluster")),
        }
    }

    // Multiscale spectral clusters over the same affinities.
    let spectral =
        spectral_clusters(&affinity, &cfg.k_list).map_err(|e| e.in_stage("cluster", "spectral"))?;
    warnings.extend(spectral.warnings.iter().cloned());
    clusters.extend(spectral.all_clusters());
    if clusters.is_empty() {
        return Err(
            Error::InvalidArgument("no clusters to project".into()).in_stage("cluster", "pool")
        );
    }

    // Supervoxels from the same per-frame boundary maps.
    let spparams = cfg.superpixel_params();
    let partitions: Vec<Partition> = boundary_maps
        .par_iter()
        .map(|b| superpixels(b, &spparams))
        .collect();
    let svs = build_supervoxels(&partitions, &scene.flows, &cfg.supervoxel_params())
        .map_err(|e| e.in_stage("tubes", "supervoxels"))?;

    // Project clusters to pixel tubes.
    let projected: Vec<Option<Tube>> = clusters
        .par_iter()
        .map(|c| -> Result<Option<Tube>> {
            match project_cluster(c, &ts, &svs, cfg.projection_threshold) {
                Ok(t) => Ok(Some(t)),
                Err(Error::EmptyProjection) => Ok(None),
                Err(e) => Err(e.in_stage("tubes", "cluster projection")),
            }
        })
        .collect::<Result<_>>()?;
    let mut tubes: Vec<Tube> = Vec::new();
    let mut tube_sources: Vec<Option<ProposalSource>> = Vec::new();
    let mut empty_projections = 0usize;
    for (c, t) in clusters.iter().zip(projected) {
        match t {
            Some(t) => {
                tubes.push(t);
                tube_sources.push(c.source_proposal.map(|idx| filtered[idx].source));
            }
            None => empty_projections += 1,
        }
    }
    if empty_projections > 0 {
        warnings.push(format!(
            "{empty_projections} clusters projected to empty tubes"
        ));
    }
    if tubes.is_empty() {
        return Err(
            Error::InvalidArgument("every projection was empty".into()).in_stage("tubes", "pool")
        );
    }

    // Rank.
    let ranked = rank(&mut tubes, &scorer, cfg.aggregate, &cfg.diversify_params())
        .map_err(|e| e.in_stage("rank", "tube pool"))?;

    // Evaluate against ground truth when present.
    let (tube_report, anytime_report) = if scene.gt_tubes.is_empty() {
        warnings.push("no ground truth in scene: skipping evaluation".into());
        (None, None)
    } else {
        let ordered: Vec<&Tube> = ranked.items.iter().map(|i| &tubes[i.tube_index]).collect();
        let report = evaluate(&ordered, &scene.gt_tubes, &cfg.curve_sizes)
            .map_err(|e| e.in_stage("eval", "tube pool"))?;
        // anytime metrics over the filtered per-frame pool in score order
        let mut scored: Vec<(usize, f64)> = filtered
            .iter()
            .enumerate()
            .map(|(i, p)| Ok((i, scorer.score_box(p.frame_index, p.bbox)?)))
            .collect::<Result<_>>()?;
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let by_score: Vec<Proposal> = scored.iter().map(|(i, _)| filtered[*i].clone()).collect();
        let anytime = evaluate_per_frame(&by_score, &scene.gt_tubes, &cfg.curve_sizes)
            .map_err(|e| e.in_stage("eval", "proposal pool"))?;
        (Some(report), Some(anytime))
    };

    let output = PipelineOutput {
        ranked,
        tubes,
        tube_report,
        anytime_report,
        warnings,
        tube_sources,
    };
    if let Some(dir) = out_dir {
        write_outputs(
            dir,
            scene,
            cfg,
            seed,
            &boundary_maps,
            &filtered,
            &ts,
            &affinity,
            &kept_labelings,
            &clusters,
            &svs,
            &output,
        )?;
    }
    Ok(output)
}

fn stage_seed(base: u64, frame: usize, kind: u64) -> u64 {
    base.wrapping_add((frame as u64 * 2 + kind + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RankedRecord {
    tube_path: String,
    score: f64,
    rank: usize,
}

#[derive(Serialize, serde::Deserialize)]
#[serde(rename_all = "camelCase")]
struct ProposalRecord {
    frame_index: usize,
    source: ProposalSource,
    #[serde(rename = "box")]
    bbox: crate::videoio::BoundingBox,
    mask_path: String,
}

/// Export proposals as length-1 tube containers plus `index.json` with
/// `{frameIndex, source, box, maskPath}` records.
pub fn save_proposals(dir: impl AsRef<Path>, proposals: &[Proposal]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut records = Vec::with_capacity(proposals.len());
    for (i, p) in proposals.iter().enumerate() {
        let container = dir.join(format!("prop_{i:04}"));
        let tube = Tube::new(p.frame_index, vec![p.mask.clone()])?;
        save_tube(&container, &tube)?;
        records.push(ProposalRecord {
            frame_index: p.frame_index,
            source: p.source,
            bbox: p.bbox,
            mask_path: format!("prop_{i:04}/mask_{:04}.pgm", p.frame_index),
        });
    }
    let index_path = dir.join("index.json");
    let json = serde_json::to_string_pretty(&records)
        .map_err(|e| Error::format(&index_path, e.to_string()))?;
    std::fs::write(&index_path, json).map_err(|e| Error::io(&index_path, e))
}

pub fn load_proposals(dir: impl AsRef<Path>) -> Result<Vec<Proposal>> {
    let dir = dir.as_ref();
    let index_path = dir.join("index.json");
    let json = std::fs::read_to_string(&index_path).map_err(|e| Error::io(&index_path, e))?;
    let records: Vec<ProposalRecord> =
        serde_json::from_str(&json).map_err(|e| Error::format(&index_path, e.to_string()))?;
    records
        .into_iter()
        .map(|r| {
            let mask = crate::videoio::load_mask(dir.join(&r.mask_path))?;
            let p = Proposal::new(mask, r.frame_index, r.source)?;
            if p.bbox != r.bbox {
                return Err(Error::format(
                    &index_path,
                    format!("stored box {:?} is not tight for {}", r.bbox, r.mask_path),
                ));
            }
            Ok(p)
        })
        .collect()
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RunManifest<'a> {
    config: &'a PipelineConfig,
    seed: u64,
    frame_count: usize,
    proposal_count: usize,
    trajectory_count: usize,
    affinity_entries: usize,
    cluster_count: usize,
    supervoxel_count: usize,
    tube_count: usize,
    warnings: &'a [String],
    ranked: &'a str,
    eval: Option<&'a str>,
}

#[allow(clippy::too_many_arguments)]
fn write_outputs(
    dir: &Path,
    scene: &Scene,
    cfg: &PipelineConfig,
    seed: u64,
    boundary_maps: &[BoundaryMap],
    filtered: &[Proposal],
    ts: &crate::trajectories::TrajectorySet,
    affinity: &crate::affinity::SparseAffinity,
    labelings: &[(usize, LabelAssignment)],
    clusters: &[TrajectoryCluster],
    svs: &crate::tubes::SupervoxelSet,
    output: &PipelineOutput,
) -> Result<()> {
    let sub = |name: &str| -> Result<PathBuf> {
        let p = dir.join(name);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    };

    let bdir = sub("boundaries")?;
    for (t, map) in boundary_maps.iter().enumerate() {
        save_gray8(
            bdir.join(format!("boundary_{t:04}.pgm")),
            map.width,
            map.height,
            &map.to_gray8(),
        )?;
    }

    save_proposals(sub("proposals")?, filtered)?;

    save_trajectories(dir.join("trajectories.jsonl"), ts)?;
    crate::affinity::save_affinity(dir.join("affinity.txt"), affinity)?;

    let labeled: Vec<(usize, &LabelAssignment)> =
        labelings.iter().map(|(i, la)| (*i, la)).collect();
    save_soft_labels(dir.join("soft_labels.jsonl"), &labeled)?;
    save_cluster_pool(dir.join("clusters.json"), clusters)?;

    crate::tubes::save_supervoxels(dir.join("supervoxels"), svs)?;

    let tdir = sub("tubes")?;
    let mut ranked_records = Vec::with_capacity(output.ranked.items.len());
    for (rank_pos, item) in output.ranked.items.iter().enumerate() {
        let rel = format!("tubes/tube_{rank_pos:03}");
        save_tube(
            tdir.join(format!("tube_{rank_pos:03}")),
            &output.tubes[item.tube_index],
        )?;
        ranked_records.push(RankedRecord {
            tube_path: rel,
            score: item.score,
            rank: rank_pos,
        });
    }
    let ranked_path = dir.join("ranked.json");
    let json = serde_json::to_string_pretty(&ranked_records)
        .map_err(|e| Error::format(&ranked_path, e.to_string()))?;
    std::fs::write(&ranked_path, json).map_err(|e| Error::io(&ranked_path, e))?;

    let mut eval_name = None;
    if let (Some(report), Some(anytime)) = (&output.tube_report, &output.anytime_report) {
        let eval_path = dir.join("eval.json");
        #[derive(Serialize)]
        #[serde(rename_all = "camelCase")]
        struct EvalFile<'a> {
            tube_metrics: &'a EvalReport,
            anytime_metrics: &'a EvalReport,
        }
        let json = serde_json::to_string_pretty(&EvalFile {
            tube_metrics: report,
            anytime_metrics: anytime,
        })
        .map_err(|e| Error::format(&eval_path, e.to_string()))?;
        std::fs::write(&eval_path, json).map_err(|e| Error::io(&eval_path, e))?;
        report.write_curve_csv(dir.join("curve.csv"))?;
        anytime.write_curve_csv(dir.join("anytime_curve.csv"))?;
        eval_name = Some("eval.json");
    }

    let manifest = RunManifest {
        config: cfg,
        seed,
        frame_count: scene.frames.len(),
        proposal_count: filtered.len(),
        trajectory_count: ts.len(),
        affinity_entries: affinity.entries().len(),
        cluster_count: clusters.len(),
        supervoxel_count: svs.count,
        tube_count: output.tubes.len(),
        warnings: &output.warnings,
        ranked: "ranked.json",
        eval: eval_name,
    };
    let run_path = dir.join("run.json");
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::format(&run_path, e.to_string()))?;
    std::fs::write(&run_path, json).map_err(|e| Error::io(&run_path, e))
}

/// Alpha-blend a tube over its frames at 0.5 opacity in red and write one PPM
/// per frame of the sequence; frames outside the tube span are converted
/// unchanged. The blend of an on-tube pixel with intensity v is
/// round(255 * (0.5 v + 0.5)) in the red channel and round(255 * 0.5 v) in
/// green and blue.
pub fn overlay(tube: &Tube, frames: &[Frame], out_dir: impl AsRef<Path>) -> Result<()> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    if tube.last_frame() >= frames.len() {
        return Err(Error::InvalidArgument(
            "tube span exceeds the frame sequence".into(),
        ));
    }
    for (t, frame) in frames.iter().enumerate() {
        let mut data = vec![0.0f32; frame.width * frame.height * 3];
        for y in 0..frame.height {
            for x in 0..frame.width {
                let v = frame.intensity(x, y);
                let on = tube.mask_at(t).is_some_and(|m| m.get(x, y));
                let (r, g, b) = if on {
                    (0.5 * v + 0.5, 0.5 * v, 0.5 * v)
                } else {
                    (v, v, v)
                };
                let base = (y * frame.width + x) * 3;
                data[base] = r;
                data[base + 1] = g;
                data[base + 2] = b;
            }
        }
        let rgb = Frame::new(frame.width, frame.height, 3, data)?;
        save_frame(out_dir.join(format!("overlay_{t:04}.ppm")), &rgb)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::videoio::synth::{presets, synthesize, ObjectSpec, ShapeKind, SynthConfig};
    use crate::videoio::MaskFrame;

    fn quick_config() -> PipelineConfig {
        PipelineConfig {
            num_seeds: 16,
            k_list: vec![2, 3],
            keep_top: 3,
            threads: 1,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn zero_motion_scene_completes_with_static_tubes_and_warning() {
        let cfg = SynthConfig {
            width: 48,
            height: 48,
            frame_count: 4,
            seed: 3,
            noise_amp: 0.05,
            background_intensity: 0.25,
            background_velocity: (0.0, 0.0),
            objects: vec![ObjectSpec {
                shape: ShapeKind::Rect,
                size: (16.0, 12.0),
                center: (24.0, 24.0),
                velocity: (0.0, 0.0),
                intensity: 0.8,
            }],
        };
        let scene = synthesize(&cfg).unwrap();
        let out = run_pipeline(&scene, &quick_config(), 7, None).unwrap();
        assert!(out
            .warnings
            .iter()
            .any(|w| w.contains("motion proposal pool is empty")));
        assert!(!out.tubes.is_empty());
        // no tube may originate from a motion proposal
        assert!(out
            .tube_sources
            .iter()
            .all(|s| !matches!(s, Some(ProposalSource::Motion))));
    }

    #[test]
    fn small_scene_end_to_end_smoke() {
        let mut cfg = presets::single_rect(5);
        cfg.width = 64;
        cfg.height = 64;
        cfg.frame_count = 6;
        cfg.objects[0].center = (20.0, 32.0);
        let scene = synthesize(&cfg).unwrap();
        let out = run_pipeline(&scene, &quick_config(), 11, None).unwrap();
        let report = out.tube_report.unwrap();
        assert!(
            report.average_best_overlap > 0.5,
            "{}",
            report.average_best_overlap
        );
        for pair in report.curve.windows(2) {
            assert!(pair[1].mean_best_iou >= pair[0].mean_best_iou);
        }
    }

    #[test]
    fn overlay_blends_exactly_one_pixel() {
        let frame = Frame::new(8, 6, 1, vec![0.5; 48]).unwrap();
        let mut mask = MaskFrame::new(8, 6);
        mask.set(3, 4, true);
        let tube = Tube::new(0, vec![mask]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        overlay(&tube, &[frame], dir.path()).unwrap();
        let rgb = crate::videoio::load_frame(dir.path().join("overlay_0000.ppm")).unwrap();
        assert_eq!(rgb.channels, 3);
        let px = |x: usize, y: usize, c: usize| rgb.data[(y * 8 + x) * 3 + c];
        // blended pixel: r = round(255*0.75)/255 = 191/255, g/b = round(255*0.25)/255
        assert_eq!(px(3, 4, 0), 191.0 / 255.0);
        assert_eq!(px(3, 4, 1), 64.0 / 255.0);
        assert_eq!(px(3, 4, 2), 64.0 / 255.0);
        // untouched pixels keep their quantized intensity in every channel
        assert_eq!(px(0, 0, 0), 128.0 / 255.0);
        assert_eq!(px(0, 0, 1), 128.0 / 255.0);
    }

    #[test]
    fn full_frame_mask_blends_uniformly() {
        let frame = Frame::new(4, 4, 1, vec![0.6; 16]).unwrap();
        let mask = MaskFrame::from_fn(4, 4, |_, _| true);
        let tube = Tube::new(0, vec![mask]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        overlay(&tube, &[frame], dir.path()).unwrap();
        let rgb = crate::videoio::load_frame(dir.path().join("overlay_0000.ppm")).unwrap();
        let expect_r = (255.0f32 * (0.5 * 0.6 + 0.5)).round() / 255.0;
        for i in 0..16 {
            assert_eq!(rgb.data[i * 3], expect_r);
        }
    }
}
