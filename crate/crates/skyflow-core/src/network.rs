//! Multi-layer corridor network: nodes, links, routes, O-D pairs, the five
//! incidence matrices, flow validation, and route enumeration.
//!
//! A k-layer network replicates the vertiport graph at each cruise altitude;
//! node `layer·n_v + v` is vertiport `v`'s copy on `layer`. Links connect
//! nodes within one layer and routes never change layer: a mission climbs to
//! its route's altitude once and descends once.

use crate::geom::Point2;
use crate::matrix::DMat;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("topology validation failed:\n{}", .0.join("\n"))]
    Validation(Vec<String>),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertiport {
    pub id: String,
    pub position: Point2,
}

/// A node is one layer's copy of a vertiport.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub vertiport: usize,
    pub layer: usize,
}

/// A directed corridor link between two nodes of the same layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub tail: usize,
    pub head: usize,
}

/// An ordered chain of links on a single layer serving one O-D pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub od: usize,
    pub layer: usize,
    pub links: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdPair {
    /// Origin vertiport index.
    pub origin: usize,
    /// Destination vertiport index.
    pub dest: usize,
    /// Estimated demand, flights per hour.
    pub demand_per_hour: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub vertiports: Vec<Vertiport>,
    pub layer_altitudes_agl_ft: Vec<f64>,
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    pub routes: Vec<Route>,
    pub od_pairs: Vec<OdPair>,
    /// Arrival capacity per vertiport, flights/hour.
    pub vertiport_capacity: Vec<f64>,
    /// Capacity per directed link, flights/hour.
    pub link_capacity: Vec<f64>,
    /// Inflow capacity per node, flights/hour.
    pub node_capacity: Vec<f64>,
}

impl NetworkTopology {
    pub fn n_vertiports(&self) -> usize {
        self.vertiports.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    pub fn n_routes(&self) -> usize {
        self.routes.len()
    }

    pub fn n_od_pairs(&self) -> usize {
        self.od_pairs.len()
    }

    /// Node index of vertiport `v`'s copy on `layer`.
    pub fn node_index(&self, vertiport: usize, layer: usize) -> usize {
        layer * self.n_vertiports() + vertiport
    }

    pub fn node_position(&self, node: usize) -> Point2 {
        self.vertiports[self.nodes[node].vertiport].position
    }

    pub fn link_length_ft(&self, link: usize) -> f64 {
        let l = &self.links[link];
        self.node_position(l.tail).distance(&self.node_position(l.head))
    }

    pub fn link_layer(&self, link: usize) -> usize {
        self.nodes[self.links[link].tail].layer
    }

    pub fn link_altitude_agl_ft(&self, link: usize) -> f64 {
        self.layer_altitudes_agl_ft[self.link_layer(link)]
    }

    pub fn route_length_ft(&self, route: usize) -> f64 {
        self.routes[route].links.iter().map(|&l| self.link_length_ft(l)).sum()
    }

    /// Replicate vertiports into `n_layers` node copies and directed base
    /// links into per-layer links. `base_links` are directed vertiport pairs.
    pub fn expand_layers(
        n_vertiports: usize,
        base_links: &[(usize, usize)],
        n_layers: usize,
    ) -> (Vec<Node>, Vec<Link>) {
        let mut nodes = Vec::with_capacity(n_layers * n_vertiports);
        for layer in 0..n_layers {
            for vertiport in 0..n_vertiports {
                nodes.push(Node { vertiport, layer });
            }
        }
        let mut links = Vec::with_capacity(n_layers * base_links.len());
        for layer in 0..n_layers {
            let base = layer * n_vertiports;
            for &(a, b) in base_links {
                links.push(Link { tail: base + a, head: base + b });
            }
        }
        (nodes, links)
    }

    /// Check every structural invariant, returning all violations at once.
    pub fn validate(&self) -> Result<(), NetworkError> {
        let mut issues = Vec::new();
        let n_v = self.n_vertiports();
        let n_n = self.n_nodes();
        let n_l = self.n_links();
        let n_layers = self.layer_altitudes_agl_ft.len();

        if n_v == 0 {
            issues.push("no vertiports".to_string());
        }
        if n_layers == 0 {
            issues.push("no layers".to_string());
        }
        if n_n != n_layers * n_v {
            issues.push(format!("expected {} nodes ({} layers x {} vertiports), got {}", n_layers * n_v, n_layers, n_v, n_n));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.vertiport >= n_v {
                issues.push(format!("nodes[{i}] references unknown vertiport {}", node.vertiport));
            }
            if node.layer >= n_layers {
                issues.push(format!("nodes[{i}] references unknown layer {}", node.layer));
            }
        }
        for (i, link) in self.links.iter().enumerate() {
            if link.tail >= n_n || link.head >= n_n {
                issues.push(format!("links[{i}] references unknown node ({} -> {})", link.tail, link.head));
                continue;
            }
            if link.tail == link.head {
                issues.push(format!("links[{i}] is a self-loop at node {}", link.tail));
            }
            if self.nodes[link.tail].layer != self.nodes[link.head].layer {
                issues.push(format!("links[{i}] crosses layers ({} -> {})", self.nodes[link.tail].layer, self.nodes[link.head].layer));
            }
        }
        for (i, route) in self.routes.iter().enumerate() {
            if route.od >= self.od_pairs.len() {
                issues.push(format!("routes[{i}] references unknown O-D pair {}", route.od));
                continue;
            }
            if route.links.is_empty() {
                issues.push(format!("routes[{i}] has no links"));
                continue;
            }
            if route.links.iter().any(|&l| l >= n_l) {
                issues.push(format!("routes[{i}] references an unknown link"));
                continue;
            }
            for w in route.links.windows(2) {
                if self.links[w[0]].head != self.links[w[1]].tail {
                    issues.push(format!(
                        "routes[{i}]: link {} ends at node {} but link {} starts at node {}",
                        w[0], self.links[w[0]].head, w[1], self.links[w[1]].tail
                    ));
                }
            }
            if route.links.iter().any(|&l| self.link_layer(l) != route.layer) {
                issues.push(format!("routes[{i}] declares layer {} but uses links on another layer", route.layer));
            }
            let od = &self.od_pairs[route.od];
            let first = self.links[route.links[0]].tail;
            let last = self.links[*route.links.last().unwrap()].head;
            if self.nodes[first].vertiport != od.origin {
                issues.push(format!("routes[{i}] starts at vertiport {} but its O-D pair starts at {}", self.nodes[first].vertiport, od.origin));
            }
            if self.nodes[last].vertiport != od.dest {
                issues.push(format!("routes[{i}] ends at vertiport {} but its O-D pair ends at {}", self.nodes[last].vertiport, od.dest));
            }
        }
        for (i, od) in self.od_pairs.iter().enumerate() {
            if od.origin >= n_v || od.dest >= n_v {
                issues.push(format!("od_pairs[{i}] references an unknown vertiport"));
            }
            if od.origin == od.dest {
                issues.push(format!("od_pairs[{i}] has identical origin and destination"));
            }
            if !(od.demand_per_hour >= 0.0) {
                issues.push(format!("od_pairs[{i}] has negative demand {}", od.demand_per_hour));
            }
        }
        let cap_checks = [
            ("vertiport_capacity", &self.vertiport_capacity, n_v),
            ("link_capacity", &self.link_capacity, n_l),
            ("node_capacity", &self.node_capacity, n_n),
        ];
        for (name, caps, want) in cap_checks {
            if caps.len() != want {
                issues.push(format!("{name} has {} entries, expected {want}", caps.len()));
            }
            if caps.iter().any(|c| !(*c >= 0.0)) {
                issues.push(format!("{name} contains a negative entry"));
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(NetworkError::Validation(issues))
        }
    }
}

/// The five incidence matrices describing the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidenceMatrices {
    /// Node-link incidence (n_n × n_l): +1 head, −1 tail.
    pub e: DMat,
    /// Link-route incidence (n_l × n_r).
    pub f: DMat,
    /// O-D pair to route incidence (n_o × n_r).
    pub h: DMat,
    /// Destination-vertiport to route incidence (n_v × n_r).
    pub j: DMat,
    /// Inflow indicator (n_n × n_l): `K = max(E, 0)` elementwise.
    pub k: DMat,
}

/// Assemble the incidence matrices after validating the topology.
pub fn build_incidence(topo: &NetworkTopology) -> Result<IncidenceMatrices, NetworkError> {
    topo.validate()?;
    let (n_n, n_l, n_r, n_o, n_v) =
        (topo.n_nodes(), topo.n_links(), topo.n_routes(), topo.n_od_pairs(), topo.n_vertiports());
    let mut e = DMat::zeros(n_n, n_l);
    let mut k = DMat::zeros(n_n, n_l);
    for (idx, link) in topo.links.iter().enumerate() {
        e.set(link.head, idx, 1.0);
        e.set(link.tail, idx, -1.0);
        k.set(link.head, idx, 1.0);
    }
    let mut f = DMat::zeros(n_l, n_r);
    let mut h = DMat::zeros(n_o, n_r);
    let mut j = DMat::zeros(n_v, n_r);
    for (r, route) in topo.routes.iter().enumerate() {
        for &l in &route.links {
            f.set(l, r, 1.0);
        }
        h.set(route.od, r, 1.0);
        j.set(topo.od_pairs[route.od].dest, r, 1.0);
    }
    Ok(IncidenceMatrices { e, f, h, j, k })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintCheck {
    pub ok: bool,
    /// Worst violation magnitude (0 when satisfied).
    pub worst: f64,
}

fn check_upper(values: &[f64], bounds: &[f64], tol: f64) -> ConstraintCheck {
    let worst = values
        .iter()
        .zip(bounds)
        .map(|(v, b)| (v - b).max(0.0))
        .fold(0.0_f64, f64::max);
    ConstraintCheck { ok: worst <= tol, worst }
}

/// Per-family feasibility report for a candidate flow assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowReport {
    pub conservation: ConstraintCheck,
    pub route_link_consistency: ConstraintCheck,
    pub vertiport_capacity: ConstraintCheck,
    pub link_capacity: ConstraintCheck,
    pub node_capacity: ConstraintCheck,
    pub nonnegativity: ConstraintCheck,
}

impl FlowReport {
    pub fn all_ok(&self) -> bool {
        self.conservation.ok
            && self.route_link_consistency.ok
            && self.vertiport_capacity.ok
            && self.link_capacity.ok
            && self.node_capacity.ok
            && self.nonnegativity.ok
    }
}

/// Check `Ey = 0`, `Fz = y`, the three capacity families, and nonnegativity,
/// reporting the worst violation per family.
#[allow(clippy::too_many_arguments)]
pub fn validate_flows(
    mats: &IncidenceMatrices,
    y: &[f64],
    z: &[f64],
    epsilon: f64,
    c_v: &[f64],
    c_l: &[f64],
    c_w: &[f64],
    tol: f64,
) -> Result<FlowReport, NetworkError> {
    if y.len() != mats.e.n_cols() || z.len() != mats.f.n_cols() {
        return Err(NetworkError::Dimension(format!(
            "flow dimensions ({}, {}) do not match incidence ({}, {})",
            y.len(),
            z.len(),
            mats.e.n_cols(),
            mats.f.n_cols()
        )));
    }
    if c_v.len() != mats.j.n_rows() || c_l.len() != y.len() || c_w.len() != mats.k.n_rows() {
        return Err(NetworkError::Dimension("capacity vector length mismatch".into()));
    }
    let margin = 1.0 - epsilon;
    let conservation_worst = mats.e.mul_vec(y).iter().map(|v| v.abs()).fold(0.0_f64, f64::max);
    let fz = mats.f.mul_vec(z);
    let route_link_worst = fz.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0_f64, f64::max);
    let jz = mats.j.mul_vec(z);
    let ky = mats.k.mul_vec(y);
    let scaled = |caps: &[f64]| caps.iter().map(|c| c * margin).collect::<Vec<_>>();
    let neg = y
        .iter()
        .chain(z.iter())
        .map(|v| (-v).max(0.0))
        .fold(0.0_f64, f64::max);
    Ok(FlowReport {
        conservation: ConstraintCheck { ok: conservation_worst <= tol, worst: conservation_worst },
        route_link_consistency: ConstraintCheck { ok: route_link_worst <= tol, worst: route_link_worst },
        vertiport_capacity: check_upper(&jz, &scaled(c_v), tol),
        link_capacity: check_upper(y, &scaled(c_l), tol),
        node_capacity: check_upper(&ky, &scaled(c_w), tol),
        nonnegativity: ConstraintCheck { ok: neg <= tol, worst: neg },
    })
}

// ---------------------------------------------------------------------------
// Route enumeration
// ---------------------------------------------------------------------------

#[derive(PartialEq)]
struct HeapEntry {
    cost: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap by cost, ties by node index for determinism
        other
            .cost
            .partial_cmp(&self.cost)
            .unwrap()
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra over an adjacency list with banned nodes/edges; returns the edge
/// sequence of a shortest path.
fn shortest_path(
    n: usize,
    adjacency: &[Vec<(usize, usize, f64)>],
    origin: usize,
    dest: usize,
    banned_nodes: &[bool],
    banned_edges: &[bool],
) -> Option<(Vec<usize>, f64)> {
    let mut dist = vec![f64::INFINITY; n];
    let mut prev_edge: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    dist[origin] = 0.0;
    heap.push(HeapEntry { cost: 0.0, node: origin });
    while let Some(HeapEntry { cost, node }) = heap.pop() {
        if cost > dist[node] + 1e-12 {
            continue;
        }
        if node == dest {
            break;
        }
        for &(to, edge, len) in &adjacency[node] {
            if banned_nodes[to] || banned_edges[edge] {
                continue;
            }
            let next = cost + len;
            if next < dist[to] - 1e-12 {
                dist[to] = next;
                prev_edge[to] = Some((node, edge));
                heap.push(HeapEntry { cost: next, node: to });
            }
        }
    }
    if !dist[dest].is_finite() {
        return None;
    }
    let mut edges = Vec::new();
    let mut at = dest;
    while at != origin {
        let (from, edge) = prev_edge[at]?;
        edges.push(edge);
        at = from;
    }
    edges.reverse();
    Some((edges, dist[dest]))
}

fn path_nodes(edges: &[usize], links: &[(usize, usize)], origin: usize) -> Vec<usize> {
    let mut nodes = vec![origin];
    for &e in edges {
        nodes.push(links[e].1);
    }
    nodes
}

/// Yen's algorithm: up to `k` loop-free shortest paths from `origin` to
/// `dest` over directed edges `(tail, head)` with lengths `edge_len`.
pub fn k_shortest_paths(
    n: usize,
    edges: &[(usize, usize)],
    edge_len: &[f64],
    origin: usize,
    dest: usize,
    k: usize,
) -> Vec<(Vec<usize>, f64)> {
    let mut adjacency: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); n];
    for (idx, &(a, b)) in edges.iter().enumerate() {
        adjacency[a].push((b, idx, edge_len[idx]));
    }
    for adj in &mut adjacency {
        adj.sort_by(|x, y| x.1.cmp(&y.1));
    }
    let mut banned_nodes = vec![false; n];
    let mut banned_edges = vec![false; edges.len()];

    let mut found: Vec<(Vec<usize>, f64)> = Vec::new();
    let first = match shortest_path(n, &adjacency, origin, dest, &banned_nodes, &banned_edges) {
        Some(p) => p,
        None => return found,
    };
    found.push(first);
    // candidate set ordered by (cost, edge sequence) for deterministic output
    let mut candidates: Vec<(Vec<usize>, f64)> = Vec::new();
    while found.len() < k {
        let (last_path, _) = found.last().unwrap().clone();
        let last_nodes = path_nodes(&last_path, edges, origin);
        for spur_idx in 0..last_path.len() {
            let spur_node = last_nodes[spur_idx];
            let root: Vec<usize> = last_path[..spur_idx].to_vec();
            let root_cost: f64 = root.iter().map(|&e| edge_len[e]).sum();
            banned_edges.iter_mut().for_each(|b| *b = false);
            banned_nodes.iter_mut().for_each(|b| *b = false);
            for (path, _) in found.iter().chain(candidates.iter()) {
                if path.len() > spur_idx && path[..spur_idx] == root[..] {
                    banned_edges[path[spur_idx]] = true;
                }
            }
            for &node in &last_nodes[..spur_idx] {
                banned_nodes[node] = true;
            }
            if let Some((spur, spur_cost)) =
                shortest_path(n, &adjacency, spur_node, dest, &banned_nodes, &banned_edges)
            {
                let mut full = root.clone();
                full.extend(spur);
                let total = root_cost + spur_cost;
                if !found.iter().any(|(p, _)| *p == full) && !candidates.iter().any(|(p, _)| *p == full) {
                    candidates.push((full, total));
                }
            }
        }
        if candidates.is_empty() {
            break;
        }
        candidates.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        found.push(candidates.remove(0));
    }
    found
}

/// Enumerated routes for one O-D pair on the base vertiport graph.
#[derive(Debug, Clone, PartialEq)]
pub struct OdRoutes {
    pub od: usize,
    /// Routes as base-link index sequences, shortest first.
    pub routes: Vec<Vec<usize>>,
}

/// For each O-D pair, up to `max_per_od` loop-free shortest routes over the
/// directed base links whose length is at most `max_stretch` times the
/// straight-line O-D distance. O-D pairs left without an admissible route get
/// a warning and zero routes.
pub fn enumerate_routes(
    vertiports: &[Vertiport],
    base_links: &[(usize, usize)],
    od_pairs: &[OdPair],
    max_per_od: usize,
    max_stretch: f64,
) -> (Vec<OdRoutes>, Vec<String>) {
    let lengths: Vec<f64> = base_links
        .iter()
        .map(|&(a, b)| vertiports[a].position.distance(&vertiports[b].position))
        .collect();
    let mut all = Vec::with_capacity(od_pairs.len());
    let mut warnings = Vec::new();
    for (idx, od) in od_pairs.iter().enumerate() {
        let direct = vertiports[od.origin].position.distance(&vertiports[od.dest].position);
        let paths = k_shortest_paths(vertiports.len(), base_links, &lengths, od.origin, od.dest, max_per_od);
        let routes: Vec<Vec<usize>> = paths
            .into_iter()
            .filter(|(_, cost)| *cost <= max_stretch * direct + 1e-9)
            .map(|(p, _)| p)
            .collect();
        if routes.is_empty() {
            warnings.push(format!(
                "od_pairs[{idx}] ({} -> {}): no route within stretch {max_stretch}",
                vertiports[od.origin].id, vertiports[od.dest].id
            ));
        }
        all.push(OdRoutes { od: idx, routes });
    }
    (all, warnings)
}
