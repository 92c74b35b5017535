//! Text exports: CSV tables for sweeps, Pareto sets, curves, and
//! comparisons, plus the GeoJSON community noise map. Floats are written
//! with Rust's shortest round-trip formatting, so identical data always
//! produces identical bytes and parsing back is lossless.

use crate::exposure::{Community, NoiseImpactMatrix};
use crate::harness::{CellStatus, ComparisonTable, CurveTable, DesignPoint, RADAR_AXES};
use crate::matrix::DMat;
use crate::network::NetworkTopology;
use crate::welfare::ReactionCurve;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("CSV parse error at line {line}: {message}")]
    Csv { line: usize, message: String },
}

fn status_str(status: &CellStatus) -> String {
    match status {
        CellStatus::Converged => "converged".into(),
        CellStatus::IterationCap => "iteration_cap".into(),
        CellStatus::Infeasible => "infeasible".into(),
        CellStatus::Error(msg) => format!("error:{}", msg.replace([',', '\n'], ";")),
    }
}

fn status_from(s: &str) -> CellStatus {
    match s {
        "converged" => CellStatus::Converged,
        "iteration_cap" => CellStatus::IterationCap,
        "infeasible" => CellStatus::Infeasible,
        other => CellStatus::Error(other.strip_prefix("error:").unwrap_or(other).to_string()),
    }
}

pub const DESIGN_POINT_HEADER: &str = "index,omega,delta1,delta2,mean_noise_cap_db,extra_energy_cap,status,mean_demand_pct,mean_noise_increase_db,extra_energy_pct,gini_demand,gini_noise_increase,objective,iterations";

pub fn design_points_to_csv(points: &[DesignPoint]) -> String {
    let mut out = String::from(DESIGN_POINT_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            p.index,
            p.omega,
            p.delta1,
            p.delta2,
            p.mean_noise_cap_db,
            p.extra_energy_cap,
            status_str(&p.status),
            p.mean_demand_pct,
            p.mean_noise_increase_db,
            p.extra_energy_pct,
            p.gini_demand,
            p.gini_noise_increase,
            p.objective,
            p.iterations
        ));
    }
    out
}

pub fn design_points_from_csv(text: &str) -> Result<Vec<DesignPoint>, ExportError> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 14 {
            return Err(ExportError::Csv {
                line: i + 1,
                message: format!("expected 14 fields, got {}", fields.len()),
            });
        }
        let num = |k: usize| -> Result<f64, ExportError> {
            fields[k]
                .parse()
                .map_err(|_| ExportError::Csv { line: i + 1, message: format!("bad number '{}'", fields[k]) })
        };
        points.push(DesignPoint {
            index: fields[0]
                .parse()
                .map_err(|_| ExportError::Csv { line: i + 1, message: "bad index".into() })?,
            omega: num(1)?,
            delta1: num(2)?,
            delta2: num(3)?,
            mean_noise_cap_db: num(4)?,
            extra_energy_cap: num(5)?,
            status: status_from(fields[6]),
            mean_demand_pct: num(7)?,
            mean_noise_increase_db: num(8)?,
            extra_energy_pct: num(9)?,
            gini_demand: num(10)?,
            gini_noise_increase: num(11)?,
            objective: num(12)?,
            iterations: fields[13]
                .parse()
                .map_err(|_| ExportError::Csv { line: i + 1, message: "bad iterations".into() })?,
        });
    }
    Ok(points)
}

pub fn curve_to_csv(table: &CurveTable) -> String {
    let mut out = String::from("band,point_index,mean,gini\n");
    for band in &table.bands {
        for p in &band.points {
            out.push_str(&format!("{},{},{},{}\n", band.label.replace(',', ";"), p.index, p.mean, p.gini));
        }
    }
    out
}

pub fn comparison_boxplot_csv(table: &ComparisonTable) -> String {
    let mut out = String::from(
        "design_index,criterion,status,metric,min,q1,median,q3,max,extra_energy,mean,gini\n",
    );
    for row in &table.rows {
        let criterion = match row.criterion {
            crate::harness::Criterion::Utilitarian => "utilitarian",
            crate::harness::Criterion::Egalitarian => "egalitarian",
        };
        for (metric, b, mean, gini) in [
            ("demand_fulfillment", &row.demand_box, row.mean_demand, row.gini_demand),
            ("noise_increase_norm", &row.noise_box, row.mean_noise_increase_db, row.gini_noise_increase),
        ] {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                row.design_index,
                criterion,
                status_str(&row.status),
                metric,
                b.min,
                b.q1,
                b.median,
                b.q3,
                b.max,
                row.extra_energy,
                mean,
                gini
            ));
        }
    }
    out
}

pub fn comparison_radar_csv(table: &ComparisonTable) -> String {
    let mut out = format!("criterion,design_index,{}\n", RADAR_AXES.join(","));
    for (criterion, rows) in [
        ("utilitarian", &table.radar_utilitarian),
        ("egalitarian", &table.radar_egalitarian),
    ] {
        for row in rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                criterion,
                row.design_index,
                row.values[0],
                row.values[1],
                row.values[2],
                row.values[3],
                row.values[4]
            ));
        }
    }
    out
}

/// Long-format impact matrix: one row per (link, community) pair.
pub fn impact_matrix_csv(impact: &NoiseImpactMatrix, communities: &[Community]) -> String {
    let mut out = String::from("link,community,sel_dba,masked\n");
    for i in 0..impact.n_links() {
        for (j, community) in communities.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                i,
                community.id,
                impact.sel(i, j),
                impact.is_masked(i, j)
            ));
        }
    }
    out
}

/// Dense matrix dump with a leading row index column.
pub fn matrix_csv(name: &str, m: &DMat) -> String {
    let mut out = format!("{name}_row");
    for c in 0..m.n_cols() {
        out.push_str(&format!(",c{c}"));
    }
    out.push('\n');
    for r in 0..m.n_rows() {
        out.push_str(&r.to_string());
        for c in 0..m.n_cols() {
            out.push_str(&format!(",{}", m.get(r, c)));
        }
        out.push('\n');
    }
    out
}

/// Per-route energy table: length, layer altitude, and the extra-energy
/// fraction relative to the base layer.
pub fn route_energy_csv(topology: &NetworkTopology, extra_energy: &[f64]) -> String {
    let mut out = String::from("route,od_pair,layer,altitude_agl_ft,length_ft,extra_energy_fraction\n");
    for (r, route) in topology.routes.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r,
            route.od,
            route.layer + 1,
            topology.layer_altitudes_agl_ft[route.layer],
            topology.route_length_ft(r),
            extra_energy[r]
        ));
    }
    out
}

/// GeoJSON FeatureCollection with per-community noise, increase, and
/// reaction score, for rendering by external tools.
pub fn noise_map_geojson(
    communities: &[Community],
    noise_dba: &[Option<f64>],
    increase_db: &[f64],
    reaction: &ReactionCurve,
) -> serde_json::Value {
    let features: Vec<serde_json::Value> = communities
        .iter()
        .zip(noise_dba.iter().zip(increase_db))
        .map(|(c, (n, inc))| {
            json!({
                "type": "Feature",
                "geometry": {
                    "type": "Point",
                    "coordinates": [c.receiver_point.x, c.receiver_point.y],
                },
                "properties": {
                    "id": c.id,
                    "ambient_dba": c.ambient_dba,
                    "population": c.population,
                    "cumulative_noise_dba": n,
                    "noise_increase_db": inc,
                    "reaction_score": reaction.score(*inc),
                },
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}
