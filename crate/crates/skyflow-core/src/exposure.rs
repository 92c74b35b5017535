//! Link-to-community noise exposure: the single-event impact matrix N, its
//! energy-domain counterpart M, and cumulative community noise under a link
//! flow.
//!
//! Each (link, community) pair gets the single-event SEL a level flyover
//! through the link poses at the community's receiver point. Entries at or
//! below the community's ambient level are masked: imperceptible noise
//! contributes nothing, so the energy matrix carries 0 there. Cumulative
//! noise is the energy inner product with the link flow, normalized to the
//! assessment interval.

use crate::acoustics::{self, AcousticsError, NpdTable, OpMode, ReceiverGeometry};
use crate::geom::{point_segment_distance, Point2};
use crate::matrix::DMat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ExposureError {
    #[error(transparent)]
    Acoustics(#[from] AcousticsError),
    #[error("impact matrix needs at least one link and one community")]
    EmptyInputs,
    #[error("NPD table is missing the level-flyover centerline/side pair")]
    MissingCurves,
    #[error("link flow must be nonnegative, got {value} at link {link}")]
    NegativeFlow { link: usize, value: f64 },
    #[error("assessment interval must be positive, got {0} s")]
    NonPositiveDuration(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("link {0} has an invalid geometry: {1}")]
    BadLink(usize, String),
}

/// EPA residential-area categories by ambient noise. The class ambient levels
/// are the upper bounds of the published daytime ranges; the CNEL correction
/// column accompanies the classification data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AmbientClass {
    QuietSuburban,
    NormalSuburban,
    Urban,
    NoisyUrban,
    VeryNoisyUrban,
}

impl AmbientClass {
    pub const ALL: [AmbientClass; 5] = [
        AmbientClass::QuietSuburban,
        AmbientClass::NormalSuburban,
        AmbientClass::Urban,
        AmbientClass::NoisyUrban,
        AmbientClass::VeryNoisyUrban,
    ];

    /// Representative ambient level for the class, dBA.
    pub fn ambient_dba(&self) -> f64 {
        match self {
            AmbientClass::QuietSuburban => 45.0,
            AmbientClass::NormalSuburban => 50.0,
            AmbientClass::Urban => 55.0,
            AmbientClass::NoisyUrban => 60.0,
            AmbientClass::VeryNoisyUrban => 65.0,
        }
    }

    /// Daytime median range, dBA.
    pub fn daytime_range_dba(&self) -> (f64, f64) {
        match self {
            AmbientClass::QuietSuburban => (41.0, 45.0),
            AmbientClass::NormalSuburban => (46.0, 50.0),
            AmbientClass::Urban => (51.0, 55.0),
            AmbientClass::NoisyUrban => (56.0, 60.0),
            AmbientClass::VeryNoisyUrban => (61.0, 65.0),
        }
    }

    /// Correction added to measured CNEL for this class, dB.
    pub fn cnel_correction_db(&self) -> f64 {
        match self {
            AmbientClass::QuietSuburban => 10.0,
            AmbientClass::NormalSuburban => 5.0,
            AmbientClass::Urban => 0.0,
            AmbientClass::NoisyUrban => -5.0,
            AmbientClass::VeryNoisyUrban => -10.0,
        }
    }

    /// Class whose representative ambient level is nearest to `dba`.
    pub fn nearest(dba: f64) -> AmbientClass {
        *AmbientClass::ALL
            .iter()
            .min_by(|a, b| {
                (a.ambient_dba() - dba)
                    .abs()
                    .partial_cmp(&(b.ambient_dba() - dba).abs())
                    .unwrap()
            })
            .unwrap()
    }
}

/// A community: one representative receiver point, its ambient level, and
/// population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Community {
    pub id: String,
    pub receiver_point: Point2,
    pub ambient_dba: f64,
    pub population: u64,
    pub class: Option<AmbientClass>,
}

/// A corridor link as the noise model sees it: its ground segment and the
/// constant altitude it is flown at.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGeometry {
    pub link_id: usize,
    pub ground_segment: (Point2, Point2),
    pub altitude_agl_ft: f64,
}

impl LinkGeometry {
    fn validate(&self) -> Result<(), ExposureError> {
        if !(self.altitude_agl_ft > 0.0) {
            return Err(ExposureError::BadLink(self.link_id, "altitude must be positive".into()));
        }
        if self.ground_segment.0.distance(&self.ground_segment.1) < 1e-9 {
            return Err(ExposureError::BadLink(self.link_id, "segment endpoints coincide".into()));
        }
        Ok(())
    }
}

/// Receiver geometry for a community relative to a link: lateral distance to
/// the nearest point of the ground segment, slant distance through the link
/// altitude, and the resulting elevation angle.
pub fn link_community_geometry(link: &LinkGeometry, community: &Community) -> Result<ReceiverGeometry, ExposureError> {
    link.validate()?;
    let lateral = point_segment_distance(&community.receiver_point, &link.ground_segment.0, &link.ground_segment.1);
    Ok(ReceiverGeometry::from_lateral_altitude(lateral, link.altitude_agl_ft)?)
}

/// Per-(link, community) single-event noise with ambient masking and its
/// energy-domain counterpart.
///
/// For every unmasked pair, `energy = 10^(sel/10)`; masked pairs carry 0
/// energy so imperceptible events contribute nothing to cumulative noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseImpactMatrix {
    sel_dba: DMat,
    energy: DMat,
    masked: Vec<bool>,
    n_links: usize,
    n_communities: usize,
}

impl NoiseImpactMatrix {
    pub fn n_links(&self) -> usize {
        self.n_links
    }

    pub fn n_communities(&self) -> usize {
        self.n_communities
    }

    /// Single-event SEL of link `i` at community `j`, dBA (pre-masking value).
    pub fn sel(&self, link: usize, community: usize) -> f64 {
        self.sel_dba.get(link, community)
    }

    pub fn is_masked(&self, link: usize, community: usize) -> bool {
        self.masked[link * self.n_communities + community]
    }

    /// The energy-domain matrix M, `n_links × n_communities`.
    pub fn energy(&self) -> &DMat {
        &self.energy
    }
}

/// Build the impact matrix from level-flyover curves: `N[i][j]` is the
/// receiver SEL of link `i` at community `j`, masked when at or below the
/// community's ambient level.
pub fn build_impact_matrix(
    links: &[LinkGeometry],
    communities: &[Community],
    table: &NpdTable,
) -> Result<NoiseImpactMatrix, ExposureError> {
    if links.is_empty() || communities.is_empty() {
        return Err(ExposureError::EmptyInputs);
    }
    let pair = table.mode_pair(OpMode::LevelFlyover).ok_or(ExposureError::MissingCurves)?;
    let (n_l, n_c) = (links.len(), communities.len());
    let mut sel = DMat::zeros(n_l, n_c);
    let mut energy = DMat::zeros(n_l, n_c);
    let mut masked = vec![false; n_l * n_c];
    for (i, link) in links.iter().enumerate() {
        for (j, community) in communities.iter().enumerate() {
            let geom = link_community_geometry(link, community)?;
            let level = acoustics::receiver_sel(pair, &geom, false)?;
            sel.set(i, j, level);
            if level <= community.ambient_dba {
                masked[i * n_c + j] = true;
            } else {
                energy.set(i, j, 10f64.powf(level / 10.0));
            }
        }
    }
    Ok(NoiseImpactMatrix { sel_dba: sel, energy, masked, n_links: n_l, n_communities: n_c })
}

/// Cumulative community noise for link flow `y` over `duration_s`:
/// `n_j = 10·log10((Mᵀy)_j) − 10·log10(T/T0)`. Communities receiving zero
/// energy are silent (`None`).
pub fn cumulative_noise(energy: &DMat, y: &[f64], duration_s: f64) -> Result<Vec<Option<f64>>, ExposureError> {
    if y.len() != energy.n_rows() {
        return Err(ExposureError::Dimension(format!(
            "flow has {} entries for {} links",
            y.len(),
            energy.n_rows()
        )));
    }
    if !(duration_s > 0.0) {
        return Err(ExposureError::NonPositiveDuration(duration_s));
    }
    if let Some((i, &v)) = y.iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(ExposureError::NegativeFlow { link: i, value: v });
    }
    let norm = 10.0 * duration_s.log10();
    let g = energy.t_mul_vec(y);
    Ok(g.into_iter()
        .map(|gj| if gj > 0.0 { Some(10.0 * gj.log10() - norm) } else { None })
        .collect())
}

/// Noise increase above ambient: `n′ = max(n − a, 0)`, with silent
/// communities at exactly 0.
pub fn noise_increase(noise: &[Option<f64>], ambient_dba: &[f64]) -> Vec<f64> {
    noise
        .iter()
        .zip(ambient_dba)
        .map(|(n, a)| n.map_or(0.0, |v| (v - a).max(0.0)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustics::{aggregate, Metric, NoiseEvent};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn community(id: &str, x: f64, y: f64, ambient: f64) -> Community {
        Community {
            id: id.into(),
            receiver_point: Point2::new(x, y),
            ambient_dba: ambient,
            population: 1000,
            class: None,
        }
    }

    fn link(id: usize, x0: f64, y0: f64, x1: f64, y1: f64, alt: f64) -> LinkGeometry {
        LinkGeometry {
            link_id: id,
            ground_segment: (Point2::new(x0, y0), Point2::new(x1, y1)),
            altitude_agl_ft: alt,
        }
    }

    #[test]
    fn geometry_under_midpoint_and_abeam() {
        let l = link(0, -1000.0, 0.0, 1000.0, 0.0, 1000.0);
        let g = link_community_geometry(&l, &community("c", 0.0, 0.0, 45.0)).unwrap();
        assert_eq!((g.slant_ft, g.lateral_ft, g.elevation_deg), (1000.0, 0.0, 90.0));
        let g = link_community_geometry(&l, &community("c", 0.0, 1000.0, 45.0)).unwrap();
        assert!((g.slant_ft - 1414.213_56).abs() < 1e-2);
        assert!((g.elevation_deg - 45.0).abs() < 1e-9);
        // beyond an endpoint, the endpoint governs
        let g = link_community_geometry(&l, &community("c", 4000.0, 0.0, 45.0)).unwrap();
        assert!((g.lateral_ft - 3000.0).abs() < 1e-9);
    }

    #[test]
    fn impact_matrix_masking_and_energy() {
        let links = [link(0, -1000.0, 0.0, 1000.0, 0.0, 1000.0)];
        let quiet = [community("q", 0.0, 0.0, 45.0)];
        let table = NpdTable::default();
        let m = build_impact_matrix(&links, &quiet, &table).unwrap();
        assert!((m.sel(0, 0) - 74.14).abs() < 1e-9);
        assert!(!m.is_masked(0, 0));
        assert!((m.energy().get(0, 0) - 10f64.powf(7.414)).abs() < 1.0);

        let loud = [community("l", 0.0, 0.0, 80.0)];
        let m = build_impact_matrix(&links, &loud, &table).unwrap();
        assert!(m.is_masked(0, 0));
        assert_eq!(m.energy().get(0, 0), 0.0);
    }

    #[test]
    fn higher_altitude_quieter_near_track() {
        // altitude monotonicity holds for near-track receivers; at shallow
        // elevation angles the loss of lateral-attenuation shielding can
        // outweigh the extra distance
        let table = NpdTable::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let cx = rng.gen_range(-2000.0..2000.0);
            let cy = rng.gen_range(-900.0..900.0);
            let c = [community("c", cx, cy, 0.0)]; // ambient 0: nothing masked
            let low = [link(0, -2000.0, 0.0, 2000.0, 0.0, 1000.0)];
            let high = [link(0, -2000.0, 0.0, 2000.0, 0.0, 2000.0)];
            let ml = build_impact_matrix(&low, &c, &table).unwrap();
            let mh = build_impact_matrix(&high, &c, &table).unwrap();
            assert!(mh.sel(0, 0) < ml.sel(0, 0), "at ({cx},{cy})");
        }
    }

    #[test]
    fn cumulative_noise_reference() {
        // one link with SEL 80 to one community
        let mut energy = DMat::zeros(1, 1);
        energy.set(0, 0, 10f64.powf(8.0));
        let n = cumulative_noise(&energy, &[1.0], 3600.0).unwrap();
        let expect = 80.0 - 10.0 * 3600f64.log10();
        assert!((n[0].unwrap() - expect).abs() < 1e-12);
        // zero flow is silence everywhere
        let n = cumulative_noise(&energy, &[0.0], 3600.0).unwrap();
        assert_eq!(n[0], None);
        // scaling flow by 10 adds exactly 10 dB
        let n1 = cumulative_noise(&energy, &[2.0], 3600.0).unwrap()[0].unwrap();
        let n10 = cumulative_noise(&energy, &[20.0], 3600.0).unwrap()[0].unwrap();
        assert!((n10 - n1 - 10.0).abs() < 1e-9);
        assert!(cumulative_noise(&energy, &[-1.0], 3600.0).is_err());
        assert!(cumulative_noise(&energy, &[1.0], 0.0).is_err());
    }

    #[test]
    fn cumulative_noise_matches_event_aggregation() {
        // multiset equivalence against the acoustics aggregator on random cases
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let n_l = rng.gen_range(1..=5);
            let n_c = rng.gen_range(1..=5);
            let mut sel = DMat::zeros(n_l, n_c);
            let mut energy = DMat::zeros(n_l, n_c);
            let mut masked = vec![false; n_l * n_c];
            for i in 0..n_l {
                for j in 0..n_c {
                    let s = rng.gen_range(40.0..90.0);
                    sel.set(i, j, s);
                    if rng.gen_bool(0.3) {
                        masked[i * n_c + j] = true;
                    } else {
                        energy.set(i, j, 10f64.powf(s / 10.0));
                    }
                }
            }
            let y: Vec<f64> = (0..n_l).map(|_| rng.gen_range(0..=20) as f64).collect();
            let t = rng.gen_range(600.0..86_400.0);
            let noise = cumulative_noise(&energy, &y, t).unwrap();
            for j in 0..n_c {
                let mut events = Vec::new();
                for i in 0..n_l {
                    if !masked[i * n_c + j] {
                        for _ in 0..y[i] as usize {
                            events.push(NoiseEvent::day(sel.get(i, j)));
                        }
                    }
                }
                let expect = aggregate(&events, Metric::Leq { duration_s: t }).unwrap();
                match (noise[j], expect) {
                    (Some(a), Some(b)) => assert!((a - b).abs() < 1e-9, "{a} vs {b}"),
                    (None, None) => {}
                    other => panic!("silence mismatch: {other:?}"),
                }
            }
        }
    }

    #[test]
    fn masked_entries_never_contribute() {
        let table = NpdTable::default();
        let links = [
            link(0, -1000.0, 0.0, 1000.0, 0.0, 1000.0),
            link(1, -1000.0, 500.0, 1000.0, 500.0, 1000.0),
        ];
        let comms = [community("c", 0.0, 0.0, 80.0), community("d", 0.0, 8000.0, 30.0)];
        let m = build_impact_matrix(&links, &comms, &table).unwrap();
        assert!(m.is_masked(0, 0) && m.is_masked(1, 0));
        let n_a = cumulative_noise(m.energy(), &[1.0, 2.0], 3600.0).unwrap();
        let n_b = cumulative_noise(m.energy(), &[50.0, 2.0], 3600.0).unwrap();
        assert_eq!(n_a[0], None);
        assert_eq!(n_b[0], None);
        // fully masked everywhere means zero increase everywhere
        let inc = noise_increase(&n_a, &[80.0, 30.0]);
        assert_eq!(inc[0], 0.0);
    }

    #[test]
    fn permutation_equivariance() {
        let table = NpdTable::default();
        let links = vec![
            link(0, -1000.0, 0.0, 1000.0, 0.0, 1000.0),
            link(1, 0.0, -1000.0, 0.0, 1000.0, 2000.0),
            link(2, 500.0, 500.0, 2500.0, 500.0, 3000.0),
        ];
        let comms = vec![
            community("a", 0.0, 0.0, 45.0),
            community("b", 1200.0, -300.0, 55.0),
            community("c", -2000.0, 900.0, 65.0),
        ];
        let base = build_impact_matrix(&links, &comms, &table).unwrap();
        let links_p = vec![links[2].clone(), links[0].clone(), links[1].clone()];
        let comms_p = vec![comms[1].clone(), comms[2].clone(), comms[0].clone()];
        let perm = build_impact_matrix(&links_p, &comms_p, &table).unwrap();
        let lp = [2usize, 0, 1];
        let cp = [1usize, 2, 0];
        for (pi, &oi) in lp.iter().enumerate() {
            for (pj, &oj) in cp.iter().enumerate() {
                assert_eq!(perm.sel(pi, pj), base.sel(oi, oj));
                assert_eq!(perm.is_masked(pi, pj), base.is_masked(oi, oj));
            }
        }
    }

    #[test]
    fn ambient_classes() {
        assert_eq!(AmbientClass::QuietSuburban.ambient_dba(), 45.0);
        assert_eq!(AmbientClass::VeryNoisyUrban.ambient_dba(), 65.0);
        assert_eq!(AmbientClass::nearest(52.0), AmbientClass::NormalSuburban);
        assert_eq!(AmbientClass::nearest(54.0), AmbientClass::Urban);
        assert_eq!(AmbientClass::nearest(44.0), AmbientClass::QuietSuburban);
        assert_eq!(AmbientClass::Urban.cnel_correction_db(), 0.0);
    }
}
