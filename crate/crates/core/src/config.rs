//! Pipeline configuration: every stage parameter with its default, a
//! `key = value` text format, and validation. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::affinity::AffinityParams;
use crate::boundaries::BoundaryParams;
use crate::error::{Error, Result};
use crate::mops::ProposalParams;
use crate::objectness::{Aggregate, DiversifyParams};
use crate::trajectories::TrackParams;
use crate::tubes::{SuperpixelParams, SupervoxelParams};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PipelineConfig {
    /// Boundary squashing scale.
    pub boundary_sigma: f64,
    /// Optional non-maximum suppression of boundary maps.
    pub boundary_nms: bool,
    /// Geodesic edge-cost floor.
    pub geodesic_eps: f64,
    /// Foreground seeds per boundary map.
    pub num_seeds: usize,
    /// Proposal near-duplicate IoU threshold.
    pub dedup_threshold: f64,
    /// Trajectory seeding stride in pixels.
    pub stride: usize,
    /// Forward-backward tolerance, absolute term.
    pub fb_tol_abs: f64,
    /// Forward-backward tolerance, relative term.
    pub fb_tol_rel: f64,
    /// Affinity spatial radius in pixels.
    pub radius: f64,
    /// Affinity kernel scale.
    pub lambda: f64,
    /// Velocity averaging window in frames.
    pub velocity_window: usize,
    /// Minimum temporal overlap of an affinity pair.
    pub min_overlap: usize,
    /// Affinity sparsification floor.
    pub weight_floor: f64,
    /// Label diffusion iterations.
    pub diffusion_iters: usize,
    /// Spectral clustering scales.
    pub k_list: Vec<usize>,
    /// Superpixel seeding threshold.
    pub superpixel_threshold: f64,
    /// Minimum superpixel area in pixels.
    pub min_area: usize,
    /// Supervoxel temporal link threshold.
    pub link_threshold: f64,
    /// Cluster-projection weight threshold.
    pub projection_threshold: f64,
    /// Cluster membership threshold on soft labels.
    pub member_threshold: f64,
    /// Proposals kept per frame by the objectness filter.
    pub keep_top: usize,
    /// Diversified-ranking suppression strength.
    pub gamma: f64,
    /// Enable diversified ranking.
    pub diversify: bool,
    /// Tube score aggregation across the lifespan.
    pub aggregate: Aggregate,
    /// Evaluation curve prefix sizes.
    pub curve_sizes: Vec<usize>,
    /// Worker cap for within-stage parallelism (0 = all cores).
    pub threads: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            boundary_sigma: 2.0,
            boundary_nms: false,
            geodesic_eps: 1e-3,
            num_seeds: 64,
            dedup_threshold: 0.95,
            stride: 4,
            fb_tol_abs: 0.5,
            fb_tol_rel: 0.01,
            radius: 60.0,
            lambda: 0.1,
            velocity_window: 3,
            min_overlap: 3,
            weight_floor: 1e-3,
            diffusion_iters: 50,
            k_list: vec![2, 3, 4, 5, 6, 7, 8],
            superpixel_threshold: 0.3,
            min_area: 16,
            link_threshold: 0.5,
            projection_threshold: 0.5,
            member_threshold: 0.5,
            keep_top: 8,
            gamma: 1.0,
            diversify: true,
            aggregate: Aggregate::Sum,
            curve_sizes: crate::metrics::default_curve_sizes(),
            threads: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(msg.into()))
            }
        };
        check(self.boundary_sigma > 0.0, "boundary_sigma must be positive")?;
        check(self.geodesic_eps > 0.0, "geodesic_eps must be positive")?;
        check(self.num_seeds >= 1, "num_seeds must be >= 1")?;
        check(
            (0.0..=1.0).contains(&self.dedup_threshold),
            "dedup_threshold must be in [0,1]",
        )?;
        check(self.stride >= 1, "stride must be >= 1")?;
        check(self.fb_tol_abs >= 0.0, "fb_tol_abs must be >= 0")?;
        check(self.fb_tol_rel >= 0.0, "fb_tol_rel must be >= 0")?;
        check(self.radius > 0.0, "radius must be positive")?;
        check(self.lambda > 0.0, "lambda must be positive")?;
        check(self.velocity_window >= 1, "velocity_window must be >= 1")?;
        check(self.min_overlap >= 2, "min_overlap must be >= 2")?;
        check(
            self.weight_floor > 0.0 && self.weight_floor <= 1.0,
            "weight_floor must be in (0,1]",
        )?;
        check(!self.k_list.is_empty(), "k_list must not be empty")?;
        check(
            self.k_list.iter().all(|k| (2..=50).contains(k)),
            "k_list entries must be in [2,50]",
        )?;
        check(
            (0.0..=1.0).contains(&self.superpixel_threshold),
            "superpixel_threshold must be in [0,1]",
        )?;
        check(self.min_area >= 1, "min_area must be >= 1")?;
        check(self.link_threshold > 0.0, "link_threshold must be positive")?;
        check(
            (0.0..=1.0).contains(&self.projection_threshold),
            "projection_threshold must be in [0,1]",
        )?;
        check(
            (0.0..=1.0).contains(&self.member_threshold),
            "member_threshold must be in [0,1]",
        )?;
        check(self.keep_top >= 1, "keep_top must be >= 1")?;
        check(self.gamma >= 0.0, "gamma must be >= 0")?;
        check(
            !self.curve_sizes.is_empty(),
            "curve_sizes must not be empty",
        )?;
        check(
            self.curve_sizes.iter().all(|s| *s >= 1),
            "curve_sizes must be >= 1",
        )?;
        Ok(())
    }

    pub fn boundary_params(&self) -> BoundaryParams {
        BoundaryParams {
            sigma: self.boundary_sigma,
            nms: self.boundary_nms,
        }
    }

    pub fn proposal_params(&self) -> ProposalParams {
        ProposalParams {
            num_seeds: self.num_seeds,
            dedup_threshold: self.dedup_threshold,
            eps: self.geodesic_eps,
        }
    }

    pub fn track_params(&self) -> TrackParams {
        TrackParams {
            stride: self.stride,
            fb_tol_abs: self.fb_tol_abs,
            fb_tol_rel: self.fb_tol_rel,
        }
    }

    pub fn affinity_params(&self) -> AffinityParams {
        AffinityParams {
            radius: self.radius,
            lambda: self.lambda,
            velocity_window: self.velocity_window,
            min_overlap: self.min_overlap,
            weight_floor: self.weight_floor,
        }
    }

    pub fn superpixel_params(&self) -> SuperpixelParams {
        SuperpixelParams {
            seed_threshold: self.superpixel_threshold,
            min_area: self.min_area,
        }
    }

    pub fn supervoxel_params(&self) -> SupervoxelParams {
        SupervoxelParams {
            link_threshold: self.link_threshold,
        }
    }

    pub fn diversify_params(&self) -> DiversifyParams {
        DiversifyParams {
            enabled: self.diversify,
            gamma: self.gamma,
        }
    }

    /// Parse `key = value` lines ('#' comments). Unknown keys are rejected.
    pub fn from_text(text: &str) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected key = value, got '{raw}'",
                    lineno + 1
                )));
            };
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a config from `key = value` text, a JSON config object, or a run
    /// manifest embedding one under a "config" field — so a run can be
    /// reproduced directly from its own manifest.
    pub fn from_file(path: impl AsRef<Path>) -> Result<PipelineConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if text.trim_start().starts_with('{') {
            let value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let config_value = value.get("config").cloned().unwrap_or(value);
            let cfg: PipelineConfig = serde_json::from_value(config_value)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            cfg.validate()?;
            return Ok(cfg);
        }
        Self::from_text(&text)
    }

    /// Apply one `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value '{value}' for {key}")))
        }
        fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
            value
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("bad value '{value}' for {key}")))
                })
                .collect()
        }
        match key {
            "boundary_sigma" => self.boundary_sigma = parse(key, value)?,
            "boundary_nms" => self.boundary_nms = parse(key, value)?,
            "geodesic_eps" => self.geodesic_eps = parse(key, value)?,
            "num_seeds" => self.num_seeds = parse(key, value)?,
            "dedup_threshold" => self.dedup_threshold = parse(key, value)?,
            "stride" => self.stride = parse(key, value)?,
            "fb_tol_abs" => self.fb_tol_abs = parse(key, value)?,
            "fb_tol_rel" => self.fb_tol_rel = parse(key, value)?,
            "radius" => self.radius = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "velocity_window" => self.velocity_window = parse(key, value)?,
            "min_overlap" => self.min_overlap = parse(key, value)?,
            "weight_floor" => self.weight_floor = parse(key, value)?,
            "diffusion_iters" => self.diffusion_iters = parse(key, value)?,
            "k_list" => self.k_list = parse_list(key, value)?,
            "superpixel_threshold" => self.superpixel_threshold = parse(key, value)?,
            "min_area" => self.min_area = parse(key, value)?,
            "link_threshold" => self.link_threshold = parse(key, value)?,
            "projection_threshold" => self.projection_threshold = parse(key, value)?,
            "member_threshold" => self.member_threshold = parse(key, value)?,
            "keep_top" => self.keep_top = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "diversify" => self.diversify = parse(key, value)?,
            "aggregate" => {
                self.aggregate = match value {
                    "sum" => Aggregate::Sum,
                    "mean" => Aggregate::Mean,
                    _ => return Err(Error::Config(format!("bad value '{value}' for aggregate"))),
                }
            }
            "curve_sizes" => self.curve_sizes = parse_list(key, value)?,
            "threads" => self.threads = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }
}
