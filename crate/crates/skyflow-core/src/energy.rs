//! eVTOL mission energy model: hover, climb, cruise, descent.
//!
//! Missions fly a five-segment profile (vertical takeoff, climb at a fixed
//! path angle, level cruise, descent, vertical landing). Powers come from
//! momentum theory (hover) and the parabolic drag polar (climb/cruise);
//! descent runs at a fixed fraction of cruise power. All internal arithmetic
//! is SI; foot/minute inputs are converted at this module's boundary and
//! nowhere else.
//!
//! The reference cruise speed default is 112.5 ft/s, the value implied by the
//! published power figures for this vehicle class (the often-quoted 135 ft/s
//! is inconsistent with its drag polar, requiring L/D above (L/D)max).

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FT_TO_M: f64 = 0.3048;
pub const GRAVITY_M_S2: f64 = 9.81;
/// ISA sea-level air density, kg/m³.
pub const RHO_SEA_LEVEL: f64 = 1.225;
/// Altitude above ground, in feet, where vertical takeoff ends and vertical
/// landing begins.
pub const HOVER_TOP_AGL_FT: f64 = 250.0;

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("air density must be positive, got {0} kg/m^3")]
    NonPositiveDensity(f64),
    #[error("vehicle parameter out of range: {0}")]
    BadVehicleParam(String),
    #[error("mission distance {distance_ft:.1} ft is shorter than the {required_ft:.1} ft needed to climb to and descend from {altitude_ft:.0} ft AGL")]
    ProfileInfeasible { distance_ft: f64, required_ft: f64, altitude_ft: f64 },
    #[error("route {route} at {altitude_ft:.0} ft AGL cannot fly its {distance_ft:.1} ft length (needs {required_ft:.1} ft)")]
    RouteInfeasible { route: usize, distance_ft: f64, required_ft: f64, altitude_ft: f64 },
}

/// Vehicle and mission-profile parameters. Lengths and speeds are declared in
/// the units their names carry and converted to SI internally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    pub mass_kg: f64,
    pub disk_loading_n_m2: f64,
    pub hover_efficiency: f64,
    pub climb_efficiency: f64,
    pub cruise_efficiency: f64,
    pub zero_lift_drag: f64,
    pub reference_area_m2: f64,
    pub max_lift_drag: f64,
    pub flight_path_angle_deg: f64,
    pub rate_of_climb_ft_min: f64,
    pub cruise_speed_ft_s: f64,
    pub hover_time_per_end_s: f64,
    pub descent_power_fraction: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            mass_kg: 1800.0,
            disk_loading_n_m2: 580.0,
            hover_efficiency: 0.75,
            climb_efficiency: 0.75,
            cruise_efficiency: 0.8,
            zero_lift_drag: 0.03,
            reference_area_m2: 30.0,
            max_lift_drag: 20.0,
            flight_path_angle_deg: 10.0,
            rate_of_climb_ft_min: 1000.0,
            cruise_speed_ft_s: 112.5,
            hover_time_per_end_s: 30.0,
            descent_power_fraction: 0.4,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), EnergyError> {
        let positive = [
            ("mass_kg", self.mass_kg),
            ("disk_loading_n_m2", self.disk_loading_n_m2),
            ("zero_lift_drag", self.zero_lift_drag),
            ("reference_area_m2", self.reference_area_m2),
            ("max_lift_drag", self.max_lift_drag),
            ("flight_path_angle_deg", self.flight_path_angle_deg),
            ("rate_of_climb_ft_min", self.rate_of_climb_ft_min),
            ("cruise_speed_ft_s", self.cruise_speed_ft_s),
            ("descent_power_fraction", self.descent_power_fraction),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(EnergyError::BadVehicleParam(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.hover_time_per_end_s >= 0.0) {
            return Err(EnergyError::BadVehicleParam("hover_time_per_end_s must be nonnegative".into()));
        }
        for (name, v) in [
            ("hover_efficiency", self.hover_efficiency),
            ("climb_efficiency", self.climb_efficiency),
            ("cruise_efficiency", self.cruise_efficiency),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(EnergyError::BadVehicleParam(format!("{name} must be in (0, 1], got {v}")));
            }
        }
        if self.flight_path_angle_deg >= 90.0 {
            return Err(EnergyError::BadVehicleParam("flight_path_angle_deg must be below 90".into()));
        }
        Ok(())
    }

    /// Climb true airspeed along the flight path, ft/s: ROC / (60 sin γ).
    pub fn climb_speed_ft_s(&self) -> f64 {
        self.rate_of_climb_ft_min / (self.flight_path_angle_deg.to_radians().sin() * 60.0)
    }
}

/// Mission geometry: cruise altitude above ground, total ground distance, and
/// the terrain reference offset added when looking up air density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissionProfile {
    pub cruise_altitude_agl_ft: f64,
    pub total_distance_ft: f64,
    pub reference_msl_offset_ft: f64,
}

impl MissionProfile {
    pub fn new(cruise_altitude_agl_ft: f64, total_distance_ft: f64) -> Self {
        MissionProfile { cruise_altitude_agl_ft, total_distance_ft, reference_msl_offset_ft: 500.0 }
    }
}

/// ISA troposphere density at a pressure altitude in feet MSL.
pub fn air_density_kg_m3(h_msl_ft: f64) -> f64 {
    let h_m = h_msl_ft * FT_TO_M;
    RHO_SEA_LEVEL * (1.0 - 2.256e-5 * h_m).powf(4.2561)
}

/// Hover power from momentum theory: `P = (mg/η_h)·sqrt(δ/2ρ)`, in watts.
pub fn hover_power_w(v: &VehicleParams, rho_kg_m3: f64) -> Result<f64, EnergyError> {
    if !(rho_kg_m3 > 0.0) {
        return Err(EnergyError::NonPositiveDensity(rho_kg_m3));
    }
    let weight = v.mass_kg * GRAVITY_M_S2;
    Ok(weight / v.hover_efficiency * (v.disk_loading_n_m2 / (2.0 * rho_kg_m3)).sqrt())
}

/// Parabolic-polar drag at airspeed `v_m_s` and density `rho`, in newtons.
fn drag_n(v: &VehicleParams, v_m_s: f64, rho: f64) -> f64 {
    let q_s = 0.5 * rho * v_m_s * v_m_s * v.reference_area_m2;
    let weight = v.mass_kg * GRAVITY_M_S2;
    let induced_k = 1.0 / (4.0 * v.zero_lift_drag * v.max_lift_drag * v.max_lift_drag);
    q_s * v.zero_lift_drag + induced_k * weight * weight / q_s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentPowers {
    pub climb_w: f64,
    pub cruise_w: f64,
    pub descent_w: f64,
}

/// Climb, cruise, and descent powers for a cruise altitude. Climb drag uses
/// the density at the mid-climb altitude, cruise drag the density at the
/// cruise altitude; both add `msl_offset_ft` before the density lookup.
pub fn segment_powers(v: &VehicleParams, cruise_alt_agl_ft: f64, msl_offset_ft: f64) -> SegmentPowers {
    let gamma = v.flight_path_angle_deg.to_radians();
    let weight = v.mass_kg * GRAVITY_M_S2;

    let v_climb = v.climb_speed_ft_s() * FT_TO_M;
    let mid_agl = (cruise_alt_agl_ft - HOVER_TOP_AGL_FT) / 2.0 + HOVER_TOP_AGL_FT;
    let rho_mid = air_density_kg_m3(mid_agl + msl_offset_ft);
    let climb_w = v_climb / v.climb_efficiency * (weight * gamma.sin() + drag_n(v, v_climb, rho_mid));

    let v_cruise = v.cruise_speed_ft_s * FT_TO_M;
    let rho_cruise = air_density_kg_m3(cruise_alt_agl_ft + msl_offset_ft);
    let cruise_w = v_cruise / v.cruise_efficiency * drag_n(v, v_cruise, rho_cruise);

    SegmentPowers { climb_w, cruise_w, descent_w: v.descent_power_fraction * cruise_w }
}

/// Ground distance covered by the climb and descent segments combined, feet:
/// `2·(h − 250)/tan γ`.
pub fn climb_descent_ground_distance_ft(v: &VehicleParams, cruise_alt_agl_ft: f64) -> f64 {
    2.0 * (cruise_alt_agl_ft - HOVER_TOP_AGL_FT) / v.flight_path_angle_deg.to_radians().tan()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissionEnergy {
    pub hover_j: f64,
    pub climb_j: f64,
    pub cruise_j: f64,
    pub descent_j: f64,
    pub total_j: f64,
}

/// Total mission energy across the five-segment profile. Hover power is
/// evaluated at sea-level density, matching the constant-per-mission takeoff
/// and landing assumption. Errors when the mission is too short to reach its
/// cruise altitude.
pub fn mission_energy(v: &VehicleParams, profile: &MissionProfile) -> Result<MissionEnergy, EnergyError> {
    let h = profile.cruise_altitude_agl_ft;
    let required = climb_descent_ground_distance_ft(v, h);
    if profile.total_distance_ft < required - 1e-9 {
        return Err(EnergyError::ProfileInfeasible {
            distance_ft: profile.total_distance_ft,
            required_ft: required,
            altitude_ft: h,
        });
    }
    let powers = segment_powers(v, h, profile.reference_msl_offset_ft);
    let t_climb_s = (h - HOVER_TOP_AGL_FT) / v.rate_of_climb_ft_min * 60.0;
    let cruise_dist_m = (profile.total_distance_ft - required).max(0.0) * FT_TO_M;
    let t_cruise_s = cruise_dist_m / (v.cruise_speed_ft_s * FT_TO_M);

    let hover_j = hover_power_w(v, RHO_SEA_LEVEL)? * 2.0 * v.hover_time_per_end_s;
    let climb_j = powers.climb_w * t_climb_s;
    let cruise_j = powers.cruise_w * t_cruise_s;
    let descent_j = powers.descent_w * t_climb_s;
    Ok(MissionEnergy {
        hover_j,
        climb_j,
        cruise_j,
        descent_j,
        total_j: hover_j + climb_j + cruise_j + descent_j,
    })
}

/// A route as the energy model sees it: its ground length and cruise altitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteMission {
    pub length_ft: f64,
    pub altitude_agl_ft: f64,
}

/// Per-route additional energy fractions relative to flying the same distance
/// at `baseline_alt_agl_ft` (the lowest layer). Routes at the baseline
/// altitude get exactly 0.
pub fn route_extra_energy(
    routes: &[RouteMission],
    v: &VehicleParams,
    baseline_alt_agl_ft: f64,
    msl_offset_ft: f64,
) -> Result<Vec<f64>, EnergyError> {
    let mut p = Vec::with_capacity(routes.len());
    for (i, r) in routes.iter().enumerate() {
        if (r.altitude_agl_ft - baseline_alt_agl_ft).abs() < 1e-9 {
            p.push(0.0);
            continue;
        }
        let own = MissionProfile {
            cruise_altitude_agl_ft: r.altitude_agl_ft,
            total_distance_ft: r.length_ft,
            reference_msl_offset_ft: msl_offset_ft,
        };
        let base = MissionProfile {
            cruise_altitude_agl_ft: baseline_alt_agl_ft,
            total_distance_ft: r.length_ft,
            reference_msl_offset_ft: msl_offset_ft,
        };
        let e_own = mission_energy(v, &own).map_err(|e| match e {
            EnergyError::ProfileInfeasible { distance_ft, required_ft, altitude_ft } => {
                EnergyError::RouteInfeasible { route: i, distance_ft, required_ft, altitude_ft }
            }
            other => other,
        })?;
        let e_base = mission_energy(v, &base).map_err(|e| match e {
            EnergyError::ProfileInfeasible { distance_ft, required_ft, altitude_ft } => {
                EnergyError::RouteInfeasible { route: i, distance_ft, required_ft, altitude_ft }
            }
            other => other,
        })?;
        p.push(e_own.total_j / e_base.total_j - 1.0);
    }
    Ok(p)
}

/// Flow-weighted average additional energy `p_a = pᵀz / 1ᵀz`, defined as 0
/// at zero total flow so the energy cap is trivially satisfied at z = 0.
pub fn average_extra_energy(p: &[f64], z: &[f64]) -> f64 {
    assert_eq!(p.len(), z.len(), "dimension mismatch");
    let total: f64 = z.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    p.iter().zip(z).map(|(pi, zi)| pi * zi).sum::<f64>() / total
}
