//! Deterministic synthetic scenario generation.
//!
//! Stands in for real city data: a random planar vertiport layout with a
//! minimum spacing, a greedily built non-crossing corridor set (a length-
//! ordered triangulation, optionally trimmed to a target link count), layer
//! replication, round-trip O-D pairs, and a jittered grid of communities
//! with ambient levels drawn from a class mix. Everything is a pure function
//! of the seed.

use crate::exposure::AmbientClass;
use crate::geom::{segments_cross, Point2};
use crate::scenario::{
    CommunityDecl, LayersDecl, LinkDecl, OdDecl, ProblemDecl, ReactionDecl, RoutesDecl, Scenario,
    UnitsDecl, VertiportDecl,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("could not place {wanted} vertiports with {spacing_ft} ft spacing in the area after {attempts} attempts")]
    Placement { wanted: usize, spacing_ft: f64, attempts: usize },
    #[error("target of {target} undirected links exceeds the {available} the triangulation produced")]
    TooFewLinks { target: usize, available: usize },
    #[error("generated link set is not connected")]
    Disconnected,
    #[error("invalid generator config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_vertiports: usize,
    pub n_layers: usize,
    pub n_communities: usize,
    /// Directed O-D pair count; pairs are generated as round trips, so this
    /// must be even.
    pub n_od_pairs: usize,
    pub area_width_ft: f64,
    pub area_height_ft: f64,
    pub min_vertiport_spacing_ft: f64,
    /// Trim the triangulation down to this many undirected links.
    pub target_undirected_links: Option<usize>,
    /// Sampling weights over the five ambient classes, quiet to very noisy.
    pub ambient_mix: [f64; 5],
    pub demand_range: (f64, f64),
    pub vertiport_capacity: f64,
    pub link_capacity: f64,
    pub node_capacity: f64,
    pub max_routes_per_od_per_layer: usize,
    pub max_stretch: f64,
    pub epsilon: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            n_vertiports: 19,
            n_layers: 3,
            n_communities: 292,
            n_od_pairs: 62,
            area_width_ft: 163_000.0,
            area_height_ft: 163_000.0,
            min_vertiport_spacing_ft: 33_000.0,
            target_undirected_links: Some(45),
            ambient_mix: [0.25, 0.30, 0.25, 0.12, 0.08],
            demand_range: (15.0, 45.0),
            vertiport_capacity: 60.0,
            link_capacity: 30.0,
            node_capacity: 120.0,
            max_routes_per_od_per_layer: 2,
            max_stretch: 1.4,
            epsilon: 0.05,
        }
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, a: usize) -> usize {
        if self.0[a] != a {
            let root = self.find(self.0[a]);
            self.0[a] = root;
        }
        self.0[a]
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
        ra != rb
    }
}

fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut uf = UnionFind::new(n);
    let mut components = n;
    for &(a, b) in edges {
        if uf.union(a, b) {
            components -= 1;
        }
    }
    components == 1
}

fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

/// Generate a scenario from the config. Identical configs produce identical
/// scenarios, byte for byte once serialized.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Scenario, SynthError> {
    if cfg.n_vertiports < 2 {
        return Err(SynthError::BadConfig("need at least two vertiports".into()));
    }
    if cfg.n_layers == 0 || cfg.n_communities == 0 {
        return Err(SynthError::BadConfig("layers and communities must be positive".into()));
    }
    if cfg.n_od_pairs == 0 || cfg.n_od_pairs % 2 != 0 {
        return Err(SynthError::BadConfig("n_od_pairs must be positive and even (round trips)".into()));
    }
    if cfg.n_od_pairs / 2 > cfg.n_vertiports * (cfg.n_vertiports - 1) / 2 {
        return Err(SynthError::BadConfig("more O-D pairs than vertiport pairs".into()));
    }
    let weight_sum: f64 = cfg.ambient_mix.iter().sum();
    if !(weight_sum > 0.0) || cfg.ambient_mix.iter().any(|w| *w < 0.0) {
        return Err(SynthError::BadConfig("ambient_mix must be nonnegative with positive sum".into()));
    }
    if !(cfg.demand_range.0 > 0.0 && cfg.demand_range.1 >= cfg.demand_range.0) {
        return Err(SynthError::BadConfig("demand_range must be positive and ordered".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // vertiports: dart throwing with a minimum spacing
    let mut positions: Vec<Point2> = Vec::with_capacity(cfg.n_vertiports);
    let attempts_cap = 20_000;
    let mut attempts = 0;
    while positions.len() < cfg.n_vertiports {
        attempts += 1;
        if attempts > attempts_cap {
            return Err(SynthError::Placement {
                wanted: cfg.n_vertiports,
                spacing_ft: cfg.min_vertiport_spacing_ft,
                attempts: attempts_cap,
            });
        }
        let p = Point2::new(
            round1(rng.gen_range(0.0..cfg.area_width_ft)),
            round1(rng.gen_range(0.0..cfg.area_height_ft)),
        );
        if positions.iter().all(|q| q.distance(&p) >= cfg.min_vertiport_spacing_ft) {
            positions.push(p);
        }
    }

    // corridor set: accept shortest candidate pairs that cross nothing
    let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
    for a in 0..positions.len() {
        for b in a + 1..positions.len() {
            candidates.push((a, b, positions[a].distance(&positions[b])));
        }
    }
    candidates.sort_by(|x, y| x.2.partial_cmp(&y.2).unwrap().then_with(|| (x.0, x.1).cmp(&(y.0, y.1))));
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for &(a, b, _) in &candidates {
        let crosses = edges.iter().any(|&(c, d)| {
            segments_cross(&positions[a], &positions[b], &positions[c], &positions[d])
        });
        if !crosses {
            edges.push((a, b));
        }
    }
    if let Some(target) = cfg.target_undirected_links {
        if target > edges.len() {
            return Err(SynthError::TooFewLinks { target, available: edges.len() });
        }
        // drop the longest non-bridge edges until the target is met
        let mut lengths: Vec<(usize, f64)> = edges
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| (i, positions[a].distance(&positions[b])))
            .collect();
        lengths.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then_with(|| x.0.cmp(&y.0)));
        let mut keep = vec![true; edges.len()];
        let mut kept = edges.len();
        for &(idx, _) in &lengths {
            if kept == target {
                break;
            }
            keep[idx] = false;
            let remaining: Vec<(usize, usize)> = edges
                .iter()
                .enumerate()
                .filter(|(i, _)| keep[*i])
                .map(|(_, &e)| e)
                .collect();
            if connected(positions.len(), &remaining) {
                kept -= 1;
            } else {
                keep[idx] = true;
            }
        }
        if kept != target {
            return Err(SynthError::TooFewLinks { target, available: kept });
        }
        edges = edges
            .into_iter()
            .enumerate()
            .filter(|(i, _)| keep[*i])
            .map(|(_, e)| e)
            .collect();
    }
    if !connected(positions.len(), &edges) {
        return Err(SynthError::Disconnected);
    }

    // round-trip O-D pairs over distinct vertiport pairs
    let mut all_pairs: Vec<(usize, usize)> = Vec::new();
    for a in 0..positions.len() {
        for b in a + 1..positions.len() {
            all_pairs.push((a, b));
        }
    }
    let mut chosen: Vec<(usize, usize)> = Vec::new();
    let wanted = cfg.n_od_pairs / 2;
    while chosen.len() < wanted {
        let idx = rng.gen_range(0..all_pairs.len());
        let pair = all_pairs.swap_remove(idx);
        chosen.push(pair);
    }
    chosen.sort();

    let vp_id = |i: usize| format!("VP{:02}", i + 1);
    let mut od_pairs = Vec::with_capacity(cfg.n_od_pairs);
    for &(a, b) in &chosen {
        let demand = round1(rng.gen_range(cfg.demand_range.0..=cfg.demand_range.1));
        od_pairs.push(OdDecl { origin: vp_id(a), dest: vp_id(b), demand_per_hour: demand });
        od_pairs.push(OdDecl { origin: vp_id(b), dest: vp_id(a), demand_per_hour: demand });
    }

    // communities on a jittered grid, ambient sampled from the class mix
    let aspect = cfg.area_width_ft / cfg.area_height_ft;
    let cols = ((cfg.n_communities as f64 * aspect).sqrt().ceil() as usize).max(1);
    let rows = cfg.n_communities.div_ceil(cols);
    let cell_w = cfg.area_width_ft / cols as f64;
    let cell_h = cfg.area_height_ft / rows as f64;
    let mut communities = Vec::with_capacity(cfg.n_communities);
    'outer: for gy in 0..rows {
        for gx in 0..cols {
            if communities.len() == cfg.n_communities {
                break 'outer;
            }
            let cx = (gx as f64 + 0.5 + rng.gen_range(-0.35..0.35)) * cell_w;
            let cy = (gy as f64 + 0.5 + rng.gen_range(-0.35..0.35)) * cell_h;
            let draw = rng.gen_range(0.0..weight_sum);
            let mut acc = 0.0;
            let mut class = AmbientClass::VeryNoisyUrban;
            for (k, w) in cfg.ambient_mix.iter().enumerate() {
                acc += w;
                if draw < acc {
                    class = AmbientClass::ALL[k];
                    break;
                }
            }
            communities.push(CommunityDecl {
                id: format!("C{:04}", communities.len() + 1),
                x_ft: round1(cx),
                y_ft: round1(cy),
                ambient_dba: class.ambient_dba(),
                population: rng.gen_range(500..12_000),
            });
        }
    }

    let altitudes: Vec<f64> = (0..cfg.n_layers).map(|k| 1000.0 * (k as f64 + 1.0)).collect();
    Ok(Scenario {
        version: 1,
        name: format!("synthetic-{}", cfg.seed),
        notes: format!(
            "Synthetic scenario generated by `skyflow gen-scenario` (seed {}); \
             not real city data.",
            cfg.seed
        ),
        units: UnitsDecl::default(),
        layers: LayersDecl { altitudes_agl_ft: altitudes, reference_msl_offset_ft: 500.0 },
        vehicle: None,
        npd: None,
        vertiports: positions
            .iter()
            .enumerate()
            .map(|(i, p)| VertiportDecl {
                id: vp_id(i),
                x_ft: p.x,
                y_ft: p.y,
                capacity_per_hour: cfg.vertiport_capacity,
            })
            .collect(),
        links: edges
            .iter()
            .map(|&(a, b)| LinkDecl {
                from: vp_id(a),
                to: vp_id(b),
                capacity_per_hour: cfg.link_capacity,
            })
            .collect(),
        routes: RoutesDecl {
            mode: "enumerate".into(),
            max_per_od_per_layer: cfg.max_routes_per_od_per_layer,
            max_stretch: cfg.max_stretch,
            explicit: Vec::new(),
        },
        od_pairs,
        communities,
        communities_geojson: None,
        problem: ProblemDecl {
            epsilon: cfg.epsilon,
            duration_s: 3600.0,
            delta_n_max_db: 25.0,
            node_capacity_per_hour: cfg.node_capacity,
            omega: 0.5,
            delta1: 0.3,
            delta2: 0.3,
            mean_noise_cap_db: None,
            extra_energy_cap: None,
        },
        reaction: ReactionDecl::default(),
    })
}
