//! Scenario files: the on-disk description of a network, its communities,
//! vehicle, and problem defaults, plus the pipeline that turns one into a
//! ready-to-solve [`ProblemSpec`].
//!
//! Scenarios are TOML with all lengths in feet. Undirected link declarations
//! expand to two directed links per layer. Routes either come from the
//! built-in enumerator (loop-free k-shortest with a stretch cap) or are
//! listed explicitly. Validation reports every problem it can find, not just
//! the first.

use crate::acoustics::NpdTable;
use crate::energy::{self, RouteMission, VehicleParams};
use crate::exposure::{build_impact_matrix, Community, LinkGeometry, NoiseImpactMatrix};
use crate::geom::Point2;
use crate::network::{
    build_incidence, enumerate_routes, IncidenceMatrices, NetworkTopology, OdPair, Route, Vertiport,
};
use crate::optimizer::ProblemSpec;
use crate::welfare::{ReactionCurve, DEFAULT_REACTION_ANCHORS};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("scenario is invalid:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
    #[error("scenario build failed: {0}")]
    Build(String),
}

fn default_version() -> u32 {
    1
}

fn default_length_unit() -> String {
    "ft".to_string()
}

fn default_msl_offset() -> f64 {
    500.0
}

fn default_max_per_od() -> usize {
    2
}

fn default_max_stretch() -> f64 {
    1.4
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct UnitsDecl {
    #[serde(default = "default_length_unit")]
    pub length: String,
}

impl Default for UnitsDecl {
    fn default() -> Self {
        UnitsDecl { length: default_length_unit() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LayersDecl {
    pub altitudes_agl_ft: Vec<f64>,
    #[serde(default = "default_msl_offset")]
    pub reference_msl_offset_ft: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct VertiportDecl {
    pub id: String,
    pub x_ft: f64,
    pub y_ft: f64,
    pub capacity_per_hour: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LinkDecl {
    pub from: String,
    pub to: String,
    /// Capacity of each of the two directed links, per layer.
    pub capacity_per_hour: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExplicitRouteDecl {
    pub origin: String,
    pub dest: String,
    /// 1-based layer index.
    pub layer: usize,
    /// Vertiport id sequence from origin to destination.
    pub via: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RoutesDecl {
    /// "enumerate" or "explicit".
    pub mode: String,
    #[serde(default = "default_max_per_od")]
    pub max_per_od_per_layer: usize,
    #[serde(default = "default_max_stretch")]
    pub max_stretch: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub explicit: Vec<ExplicitRouteDecl>,
}

impl Default for RoutesDecl {
    fn default() -> Self {
        RoutesDecl {
            mode: "enumerate".into(),
            max_per_od_per_layer: default_max_per_od(),
            max_stretch: default_max_stretch(),
            explicit: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OdDecl {
    pub origin: String,
    pub dest: String,
    pub demand_per_hour: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CommunityDecl {
    pub id: String,
    pub x_ft: f64,
    pub y_ft: f64,
    pub ambient_dba: f64,
    pub population: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeojsonRef {
    pub file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NpdRef {
    pub table_file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemDecl {
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_delta_n_max")]
    pub delta_n_max_db: f64,
    pub node_capacity_per_hour: f64,
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default = "default_delta")]
    pub delta1: f64,
    #[serde(default = "default_delta")]
    pub delta2: f64,
    /// Mean noise-increase cap, dB; omitted means inactive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_noise_cap_db: Option<f64>,
    /// Flow-averaged extra-energy cap; omitted means inactive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_energy_cap: Option<f64>,
}

fn default_duration() -> f64 {
    3600.0
}

fn default_delta_n_max() -> f64 {
    25.0
}

fn default_omega() -> f64 {
    0.5
}

fn default_delta() -> f64 {
    0.3
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReactionDecl {
    pub anchors: Vec<(f64, f64)>,
}

impl Default for ReactionDecl {
    fn default() -> Self {
        ReactionDecl { anchors: DEFAULT_REACTION_ANCHORS.to_vec() }
    }
}

/// The scenario file as written and read; [`Scenario::validate`] must pass
/// before [`Scenario::build`] is meaningful.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
    #[serde(default)]
    pub units: UnitsDecl,
    pub layers: LayersDecl,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vehicle: Option<VehicleParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub npd: Option<NpdRef>,
    pub vertiports: Vec<VertiportDecl>,
    pub links: Vec<LinkDecl>,
    #[serde(default)]
    pub routes: RoutesDecl,
    pub od_pairs: Vec<OdDecl>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub communities: Vec<CommunityDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub communities_geojson: Option<GeojsonRef>,
    pub problem: ProblemDecl,
    #[serde(default)]
    pub reaction: ReactionDecl,
}

/// A fully resolved, solvable scenario.
#[derive(Debug, Clone)]
pub struct BuiltScenario {
    pub topology: NetworkTopology,
    pub matrices: IncidenceMatrices,
    pub impact: NoiseImpactMatrix,
    pub communities: Vec<Community>,
    pub vehicle: VehicleParams,
    pub npd: NpdTable,
    pub reaction: ReactionCurve,
    pub problem: ProblemSpec,
    /// Non-fatal findings from the build (dropped routes, unservable pairs).
    pub warnings: Vec<String>,
}

/// Read and validate a scenario from disk. All validation issues are
/// collected into a single error.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
    let scenario: Scenario = toml::from_str(&text)
        .map_err(|e| ScenarioError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    scenario.validate()?;
    Ok(scenario)
}

/// Serialize a scenario back to TOML.
pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<(), ScenarioError> {
    let text = toml::to_string_pretty(scenario)
        .map_err(|e| ScenarioError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    std::fs::write(path, text).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })
}

impl Scenario {
    /// Structural and referential validation; returns every issue found.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut issues = Vec::new();
        if self.version != 1 {
            issues.push(format!("version: unsupported version {}", self.version));
        }
        if self.units.length != "ft" {
            issues.push(format!("units.length: only \"ft\" is supported, got \"{}\"", self.units.length));
        }
        if self.layers.altitudes_agl_ft.is_empty() {
            issues.push("layers.altitudes_agl_ft: need at least one layer".into());
        }
        for (i, alt) in self.layers.altitudes_agl_ft.iter().enumerate() {
            if !(*alt > 0.0) {
                issues.push(format!("layers.altitudes_agl_ft[{i}]: altitude must be positive, got {alt}"));
            }
        }
        for w in self.layers.altitudes_agl_ft.windows(2) {
            if w[1] <= w[0] {
                issues.push("layers.altitudes_agl_ft: altitudes must strictly increase".into());
                break;
            }
        }
        if let Some(v) = &self.vehicle {
            if let Err(e) = v.validate() {
                issues.push(format!("vehicle: {e}"));
            }
        }
        let mut vp_index: HashMap<&str, usize> = HashMap::new();
        for (i, vp) in self.vertiports.iter().enumerate() {
            if vp_index.insert(vp.id.as_str(), i).is_some() {
                issues.push(format!("vertiports[{i}]: duplicate id \"{}\"", vp.id));
            }
            if !(vp.capacity_per_hour >= 0.0) {
                issues.push(format!("vertiports[{i}].capacity_per_hour: must be nonnegative"));
            }
            if !vp.x_ft.is_finite() || !vp.y_ft.is_finite() {
                issues.push(format!("vertiports[{i}]: coordinates must be finite"));
            }
        }
        if self.vertiports.is_empty() {
            issues.push("vertiports: need at least one".into());
        }
        let mut seen_links = HashMap::new();
        for (i, link) in self.links.iter().enumerate() {
            for (field, id) in [("from", &link.from), ("to", &link.to)] {
                if !vp_index.contains_key(id.as_str()) {
                    issues.push(format!("links[{i}].{field}: unknown vertiport id \"{id}\""));
                }
            }
            if link.from == link.to {
                issues.push(format!("links[{i}]: self-loop at \"{}\"", link.from));
            }
            if !(link.capacity_per_hour >= 0.0) {
                issues.push(format!("links[{i}].capacity_per_hour: must be nonnegative"));
            }
            let key = if link.from <= link.to {
                (link.from.clone(), link.to.clone())
            } else {
                (link.to.clone(), link.from.clone())
            };
            if seen_links.insert(key, i).is_some() {
                issues.push(format!("links[{i}]: duplicate undirected link {} -- {}", link.from, link.to));
            }
        }
        if self.links.is_empty() {
            issues.push("links: need at least one".into());
        }
        match self.routes.mode.as_str() {
            "enumerate" => {
                if self.routes.max_per_od_per_layer == 0 {
                    issues.push("routes.max_per_od_per_layer: must be at least 1".into());
                }
                if !(self.routes.max_stretch >= 1.0) {
                    issues.push(format!("routes.max_stretch: must be >= 1, got {}", self.routes.max_stretch));
                }
            }
            "explicit" => {
                if self.routes.explicit.is_empty() {
                    issues.push("routes.explicit: explicit mode needs at least one route".into());
                }
            }
            other => issues.push(format!("routes.mode: expected \"enumerate\" or \"explicit\", got \"{other}\"")),
        }
        for (i, r) in self.routes.explicit.iter().enumerate() {
            if r.layer == 0 || r.layer > self.layers.altitudes_agl_ft.len() {
                issues.push(format!("routes.explicit[{i}].layer: {} out of range (layers are 1-based)", r.layer));
            }
            if r.via.len() < 2 {
                issues.push(format!("routes.explicit[{i}].via: need at least two vertiports"));
            }
            if r.via.first().map(String::as_str) != Some(r.origin.as_str())
                || r.via.last().map(String::as_str) != Some(r.dest.as_str())
            {
                issues.push(format!("routes.explicit[{i}].via: must start at origin and end at dest"));
            }
            for id in [&r.origin, &r.dest].into_iter().chain(r.via.iter()) {
                if !vp_index.contains_key(id.as_str()) {
                    issues.push(format!("routes.explicit[{i}]: unknown vertiport id \"{id}\""));
                }
            }
        }
        let mut seen_od = HashMap::new();
        for (i, od) in self.od_pairs.iter().enumerate() {
            for (field, id) in [("origin", &od.origin), ("dest", &od.dest)] {
                if !vp_index.contains_key(id.as_str()) {
                    issues.push(format!("od_pairs[{i}].{field}: unknown vertiport id \"{id}\""));
                }
            }
            if od.origin == od.dest {
                issues.push(format!("od_pairs[{i}]: origin equals destination"));
            }
            if !(od.demand_per_hour > 0.0) {
                issues.push(format!("od_pairs[{i}].demand_per_hour: must be positive, got {}", od.demand_per_hour));
            }
            if seen_od.insert((od.origin.clone(), od.dest.clone()), i).is_some() {
                issues.push(format!("od_pairs[{i}]: duplicate pair {} -> {}", od.origin, od.dest));
            }
        }
        if self.od_pairs.is_empty() {
            issues.push("od_pairs: need at least one".into());
        }
        if self.communities.is_empty() && self.communities_geojson.is_none() {
            issues.push("communities: need inline communities or a communities_geojson reference".into());
        }
        let mut seen_comm = HashMap::new();
        for (i, c) in self.communities.iter().enumerate() {
            if !(c.ambient_dba > 0.0) {
                issues.push(format!("communities[{i}].ambient_dba: must be positive"));
            }
            if seen_comm.insert(c.id.clone(), i).is_some() {
                issues.push(format!("communities[{i}]: duplicate id \"{}\"", c.id));
            }
        }
        if !(0.0..=1.0).contains(&self.problem.epsilon) {
            issues.push(format!("problem.epsilon: must be in [0,1], got {}", self.problem.epsilon));
        }
        if !(self.problem.duration_s > 0.0) {
            issues.push("problem.duration_s: must be positive".into());
        }
        if !(self.problem.delta_n_max_db > 0.0) {
            issues.push("problem.delta_n_max_db: must be positive".into());
        }
        if !(self.problem.node_capacity_per_hour >= 0.0) {
            issues.push("problem.node_capacity_per_hour: must be nonnegative".into());
        }
        if !(0.0..=1.0).contains(&self.problem.omega) {
            issues.push(format!("problem.omega: must be in [0,1], got {}", self.problem.omega));
        }
        for (name, v) in [("delta1", self.problem.delta1), ("delta2", self.problem.delta2)] {
            if !(v >= 0.0) {
                issues.push(format!("problem.{name}: must be nonnegative"));
            }
        }
        for (name, v) in [
            ("mean_noise_cap_db", self.problem.mean_noise_cap_db),
            ("extra_energy_cap", self.problem.extra_energy_cap),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0) {
                    issues.push(format!("problem.{name}: must be nonnegative, got {v}"));
                }
            }
        }
        if let Err(e) = ReactionCurve::new(self.reaction.anchors.clone()) {
            issues.push(format!("reaction.anchors: {e}"));
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(issues))
        }
    }

    /// Resolve files, enumerate routes, expand layers, and assemble the
    /// problem. `base_dir` anchors relative file references.
    pub fn build(&self, base_dir: &Path) -> Result<BuiltScenario, ScenarioError> {
        self.validate()?;
        let mut warnings = Vec::new();

        let vehicle = self.vehicle.unwrap_or_default();
        let npd = match &self.npd {
            None => NpdTable::default(),
            Some(npd_ref) => {
                let path = base_dir.join(&npd_ref.table_file);
                let text = std::fs::read_to_string(&path)
                    .map_err(|source| ScenarioError::Io { path: path.clone(), source })?;
                NpdTable::parse(&text)
                    .map_err(|e| ScenarioError::Parse { path, message: e.to_string() })?
            }
        };
        let reaction = ReactionCurve::new(self.reaction.anchors.clone())
            .map_err(|e| ScenarioError::Build(e.to_string()))?;

        let mut communities = Vec::new();
        for c in &self.communities {
            communities.push(Community {
                id: c.id.clone(),
                receiver_point: Point2::new(c.x_ft, c.y_ft),
                ambient_dba: c.ambient_dba,
                population: c.population,
                class: None,
            });
        }
        if let Some(geo) = &self.communities_geojson {
            let path = base_dir.join(&geo.file);
            communities.extend(load_geojson_communities(&path)?);
        }
        if communities.is_empty() {
            return Err(ScenarioError::Build("no communities after resolving references".into()));
        }

        let vertiports: Vec<Vertiport> = self
            .vertiports
            .iter()
            .map(|v| Vertiport { id: v.id.clone(), position: Point2::new(v.x_ft, v.y_ft) })
            .collect();
        let vp_index: HashMap<&str, usize> =
            vertiports.iter().enumerate().map(|(i, v)| (v.id.as_str(), i)).collect();

        // undirected declarations -> directed base links (forward, reverse)
        let mut base_links: Vec<(usize, usize)> = Vec::with_capacity(self.links.len() * 2);
        let mut base_caps: Vec<f64> = Vec::with_capacity(self.links.len() * 2);
        for link in &self.links {
            let a = vp_index[link.from.as_str()];
            let b = vp_index[link.to.as_str()];
            base_links.push((a, b));
            base_caps.push(link.capacity_per_hour);
            base_links.push((b, a));
            base_caps.push(link.capacity_per_hour);
        }
        let base_link_index: HashMap<(usize, usize), usize> =
            base_links.iter().enumerate().map(|(i, &ab)| (ab, i)).collect();

        let od_pairs: Vec<OdPair> = self
            .od_pairs
            .iter()
            .map(|od| OdPair {
                origin: vp_index[od.origin.as_str()],
                dest: vp_index[od.dest.as_str()],
                demand_per_hour: od.demand_per_hour,
            })
            .collect();

        // routes on the base graph, as base-link sequences per O-D pair
        let per_od_routes: Vec<Vec<Vec<usize>>> = match self.routes.mode.as_str() {
            "enumerate" => {
                let (enumerated, enum_warnings) = enumerate_routes(
                    &vertiports,
                    &base_links,
                    &od_pairs,
                    self.routes.max_per_od_per_layer,
                    self.routes.max_stretch,
                );
                warnings.extend(enum_warnings);
                enumerated.into_iter().map(|r| r.routes).collect()
            }
            _ => {
                let mut per_od: Vec<Vec<Vec<usize>>> = vec![Vec::new(); od_pairs.len()];
                for (i, r) in self.routes.explicit.iter().enumerate() {
                    let origin = vp_index[r.origin.as_str()];
                    let dest = vp_index[r.dest.as_str()];
                    let od_idx = od_pairs
                        .iter()
                        .position(|od| od.origin == origin && od.dest == dest)
                        .ok_or_else(|| {
                            ScenarioError::Build(format!(
                                "routes.explicit[{i}]: no od_pairs entry for {} -> {}",
                                r.origin, r.dest
                            ))
                        })?;
                    let mut seq = Vec::new();
                    for pair in r.via.windows(2) {
                        let key = (vp_index[pair[0].as_str()], vp_index[pair[1].as_str()]);
                        let base = base_link_index.get(&key).ok_or_else(|| {
                            ScenarioError::Build(format!(
                                "routes.explicit[{i}]: no link {} -> {}",
                                pair[0], pair[1]
                            ))
                        })?;
                        seq.push(*base);
                    }
                    per_od[od_idx].push(seq);
                }
                per_od
            }
        };

        let n_layers = self.layers.altitudes_agl_ft.len();
        let n_v = vertiports.len();
        let (nodes, links) = NetworkTopology::expand_layers(n_v, &base_links, n_layers);
        let link_capacity: Vec<f64> = (0..n_layers).flat_map(|_| base_caps.iter().copied()).collect();

        // instantiate each base route on every layer it can be flown at
        let base_len = |seq: &[usize]| -> f64 {
            seq.iter()
                .map(|&b| {
                    let (a, bb) = base_links[b];
                    vertiports[a].position.distance(&vertiports[bb].position)
                })
                .sum()
        };
        let explicit_mode = self.routes.mode == "explicit";
        let mut routes = Vec::new();
        let mut dropped = 0_usize;
        for (od_idx, base_routes) in per_od_routes.iter().enumerate() {
            let mut any = false;
            for seq in base_routes {
                let length = base_len(seq);
                for layer in 0..n_layers {
                    if explicit_mode && !self.routes.explicit.iter().any(|r| {
                        r.layer == layer + 1
                            && vp_index[r.origin.as_str()] == od_pairs[od_idx].origin
                            && vp_index[r.dest.as_str()] == od_pairs[od_idx].dest
                            && seq_matches(r, seq, &base_links, &vp_index)
                    }) {
                        continue;
                    }
                    let alt = self.layers.altitudes_agl_ft[layer];
                    let needed = energy::climb_descent_ground_distance_ft(&vehicle, alt);
                    if length < needed - 1e-9 {
                        dropped += 1;
                        continue;
                    }
                    let links_on_layer: Vec<usize> =
                        seq.iter().map(|&b| layer * base_links.len() + b).collect();
                    routes.push(Route { od: od_idx, layer, links: links_on_layer });
                    any = true;
                }
            }
            if !any {
                warnings.push(format!(
                    "od_pairs[{od_idx}] ({} -> {}): no flyable route on any layer",
                    self.od_pairs[od_idx].origin, self.od_pairs[od_idx].dest
                ));
            }
        }
        if dropped > 0 {
            warnings.push(format!(
                "dropped {dropped} route/layer combinations too short for their climb and descent"
            ));
        }

        let topology = NetworkTopology {
            vertiports,
            layer_altitudes_agl_ft: self.layers.altitudes_agl_ft.clone(),
            nodes,
            links,
            routes,
            od_pairs,
            vertiport_capacity: self.vertiports.iter().map(|v| v.capacity_per_hour).collect(),
            link_capacity,
            node_capacity: vec![self.problem.node_capacity_per_hour; n_layers * n_v],
        };
        let matrices = build_incidence(&topology).map_err(|e| ScenarioError::Build(e.to_string()))?;

        let link_geoms: Vec<LinkGeometry> = (0..topology.n_links())
            .map(|i| LinkGeometry {
                link_id: i,
                ground_segment: (
                    topology.node_position(topology.links[i].tail),
                    topology.node_position(topology.links[i].head),
                ),
                altitude_agl_ft: topology.link_altitude_agl_ft(i),
            })
            .collect();
        let impact = build_impact_matrix(&link_geoms, &communities, &npd)
            .map_err(|e| ScenarioError::Build(e.to_string()))?;

        let base_alt = self.layers.altitudes_agl_ft[0];
        let missions: Vec<RouteMission> = (0..topology.n_routes())
            .map(|r| RouteMission {
                length_ft: topology.route_length_ft(r),
                altitude_agl_ft: self.layers.altitudes_agl_ft[topology.routes[r].layer],
            })
            .collect();
        let extra_energy =
            energy::route_extra_energy(&missions, &vehicle, base_alt, self.layers.reference_msl_offset_ft)
                .map_err(|e| ScenarioError::Build(e.to_string()))?;

        let problem = ProblemSpec {
            incidence: matrices.clone(),
            impact_energy: impact.energy().clone(),
            ambient_dba: communities.iter().map(|c| c.ambient_dba).collect(),
            demand: topology.od_pairs.iter().map(|od| od.demand_per_hour).collect(),
            cap_vertiport: topology.vertiport_capacity.clone(),
            cap_link: topology.link_capacity.clone(),
            cap_node: topology.node_capacity.clone(),
            extra_energy,
            omega: self.problem.omega,
            delta1: self.problem.delta1,
            delta2: self.problem.delta2,
            max_noise_increase_db: self.problem.delta_n_max_db,
            mean_noise_cap_db: self.problem.mean_noise_cap_db.unwrap_or(f64::INFINITY),
            extra_energy_cap: self.problem.extra_energy_cap.unwrap_or(f64::INFINITY),
            epsilon: self.problem.epsilon,
            duration_s: self.problem.duration_s,
        };
        problem.validate().map_err(|e| ScenarioError::Build(e.to_string()))?;

        Ok(BuiltScenario {
            topology,
            matrices,
            impact,
            communities,
            vehicle,
            npd,
            reaction,
            problem,
            warnings,
        })
    }
}

fn seq_matches(
    decl: &ExplicitRouteDecl,
    seq: &[usize],
    base_links: &[(usize, usize)],
    vp_index: &HashMap<&str, usize>,
) -> bool {
    if decl.via.len() != seq.len() + 1 {
        return false;
    }
    decl.via.windows(2).zip(seq).all(|(pair, &b)| {
        base_links[b] == (vp_index[pair[0].as_str()], vp_index[pair[1].as_str()])
    })
}

/// Read communities from a GeoJSON FeatureCollection of Point features with
/// `id`, `ambient_dba`, and `population` properties. Coordinates are planar
/// feet like the rest of the scenario.
pub fn load_geojson_communities(path: &Path) -> Result<Vec<Community>, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| ScenarioError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    let parse_err = |message: String| ScenarioError::Parse { path: path.to_path_buf(), message };
    let features = value
        .get("features")
        .and_then(|f| f.as_array())
        .ok_or_else(|| parse_err("expected a FeatureCollection with a features array".into()))?;
    let mut communities = Vec::with_capacity(features.len());
    for (i, feature) in features.iter().enumerate() {
        let geometry = feature.get("geometry").ok_or_else(|| parse_err(format!("features[{i}]: missing geometry")))?;
        if geometry.get("type").and_then(|t| t.as_str()) != Some("Point") {
            return Err(parse_err(format!("features[{i}]: only Point geometries are supported")));
        }
        let coords = geometry
            .get("coordinates")
            .and_then(|c| c.as_array())
            .filter(|c| c.len() >= 2)
            .ok_or_else(|| parse_err(format!("features[{i}]: bad coordinates")))?;
        let x = coords[0].as_f64().ok_or_else(|| parse_err(format!("features[{i}]: bad x")))?;
        let y = coords[1].as_f64().ok_or_else(|| parse_err(format!("features[{i}]: bad y")))?;
        let props = feature.get("properties").cloned().unwrap_or(serde_json::Value::Null);
        let id = props
            .get("id")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .unwrap_or_else(|| format!("feature-{i}"));
        let ambient = props
            .get("ambient_dba")
            .and_then(|v| v.as_f64())
            .ok_or_else(|| parse_err(format!("features[{i}]: missing ambient_dba property")))?;
        let population = props.get("population").and_then(|v| v.as_u64()).unwrap_or(0);
        communities.push(Community {
            id,
            receiver_point: Point2::new(x, y),
            ambient_dba: ambient,
            population,
            class: None,
        });
    }
    Ok(communities)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A minimal two-vertiport scenario used across the test suite.
    pub(crate) fn two_port_toml() -> String {
        r#"
version = 1
name = "two-port"

[layers]
altitudes_agl_ft = [1000.0, 2000.0]

[[vertiports]]
id = "A"
x_ft = 0.0
y_ft = 0.0
capacity_per_hour = 50.0

[[vertiports]]
id = "B"
x_ft = 60000.0
y_ft = 0.0
capacity_per_hour = 50.0

[[links]]
from = "A"
to = "B"
capacity_per_hour = 40.0

[[od_pairs]]
origin = "A"
dest = "B"
demand_per_hour = 20.0

[[od_pairs]]
origin = "B"
dest = "A"
demand_per_hour = 20.0

[[communities]]
id = "C1"
x_ft = 30000.0
y_ft = 500.0
ambient_dba = 45.0
population = 2000

[problem]
node_capacity_per_hour = 80.0
"#
        .to_string()
    }

    #[test]
    fn minimal_scenario_builds_clean() {
        let scenario: Scenario = toml::from_str(&two_port_toml()).unwrap();
        scenario.validate().unwrap();
        let built = scenario.build(Path::new(".")).unwrap();
        assert!(built.warnings.is_empty(), "{:?}", built.warnings);
        // 2 layers x 2 vertiports, 2 directed links per layer
        assert_eq!(built.topology.n_nodes(), 4);
        assert_eq!(built.topology.n_links(), 4);
        // each O-D pair flies the single base route on both layers
        assert_eq!(built.topology.n_routes(), 4);
        // layer-2 routes carry an energy premium, layer-1 routes none
        for (r, route) in built.topology.routes.iter().enumerate() {
            if route.layer == 0 {
                assert_eq!(built.problem.extra_energy[r], 0.0);
            } else {
                assert!(built.problem.extra_energy[r] > 0.0);
            }
        }
    }

    #[test]
    fn dangling_and_negative_fields_all_reported() {
        let mut text = two_port_toml();
        text = text.replace("dest = \"B\"", "dest = \"Z\"");
        text = text.replace("demand_per_hour = 20.0", "demand_per_hour = -1.0");
        let scenario: Scenario = toml::from_str(&text).unwrap();
        let err = scenario.validate().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown vertiport id \"Z\""), "{msg}");
        assert!(msg.contains("demand_per_hour"), "{msg}");
        // both issues reported at once
        assert!(msg.matches('\n').count() >= 2, "{msg}");
    }

    #[test]
    fn unknown_field_rejected_at_parse() {
        let text = two_port_toml() + "\n[problem2]\nfoo = 1\n";
        assert!(toml::from_str::<Scenario>(&text).is_err());
    }

    #[test]
    fn roundtrip_preserves_built_matrices() {
        let scenario: Scenario = toml::from_str(&two_port_toml()).unwrap();
        let text = toml::to_string_pretty(&scenario).unwrap();
        let reloaded: Scenario = toml::from_str(&text).unwrap();
        assert_eq!(scenario, reloaded);
        let a = scenario.build(Path::new(".")).unwrap();
        let b = reloaded.build(Path::new(".")).unwrap();
        assert_eq!(a.matrices.e, b.matrices.e);
        assert_eq!(a.matrices.f, b.matrices.f);
        assert_eq!(a.impact.energy(), b.impact.energy());
        assert_eq!(a.problem.extra_energy, b.problem.extra_energy);
    }

    #[test]
    fn short_high_layer_routes_dropped_with_warning() {
        // 4 miles between vertiports: flyable at 1000 ft, not at 3000 ft
        let text = two_port_toml()
            .replace("altitudes_agl_ft = [1000.0, 2000.0]", "altitudes_agl_ft = [1000.0, 3000.0]")
            .replace("x_ft = 60000.0", "x_ft = 21120.0");
        let scenario: Scenario = toml::from_str(&text).unwrap();
        let built = scenario.build(Path::new(".")).unwrap();
        assert_eq!(built.topology.n_routes(), 2); // layer-1 only
        assert!(built.warnings.iter().any(|w| w.contains("dropped 2")), "{:?}", built.warnings);
    }

    #[test]
    fn explicit_routes_resolved() {
        let text = two_port_toml()
            + r#"
[routes]
mode = "explicit"

[[routes.explicit]]
origin = "A"
dest = "B"
layer = 1
via = ["A", "B"]

[[routes.explicit]]
origin = "B"
dest = "A"
layer = 1
via = ["B", "A"]
"#;
        let scenario: Scenario = toml::from_str(&text).unwrap();
        let built = scenario.build(Path::new(".")).unwrap();
        assert_eq!(built.topology.n_routes(), 2);
        assert!(built.topology.routes.iter().all(|r| r.layer == 0));
    }

    #[test]
    fn geojson_communities_load() {
        let dir = tempfile::tempdir().unwrap();
        let geo = r#"{
          "type": "FeatureCollection",
          "features": [
            {"type": "Feature",
             "geometry": {"type": "Point", "coordinates": [1000.0, 2000.0]},
             "properties": {"id": "G1", "ambient_dba": 50.0, "population": 1234}}
          ]
        }"#;
        std::fs::write(dir.path().join("comms.geojson"), geo).unwrap();
        let communities = load_geojson_communities(&dir.path().join("comms.geojson")).unwrap();
        assert_eq!(communities.len(), 1);
        assert_eq!(communities[0].id, "G1");
        assert_eq!(communities[0].ambient_dba, 50.0);
        assert_eq!(communities[0].population, 1234);
    }
}
