//! Social welfare functions, inequality measures, and the community reaction
//! score.
//!
//! The fairness-threshold welfare function behaves as the plain mean while
//! utilities stay within Δ of the worst-off party and switches to protecting
//! the minimum beyond that; it is the aggregator used inside the optimizer.
//! Alpha-fairness and the Gini coefficient are evaluation-side metrics only.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WelfareError {
    #[error("utility vector must be nonempty")]
    EmptyUtilities,
    #[error("threshold must be nonnegative, got {0}")]
    NegativeThreshold(f64),
    #[error("alpha must be nonnegative, got {0}")]
    NegativeAlpha(f64),
    #[error("alpha-fairness with alpha >= 1 requires strictly positive utilities, got {0}")]
    NonPositiveUtility(f64),
    #[error("Gini requires nonnegative entries, got {0}")]
    NegativeUtility(f64),
    #[error("invalid reaction anchors: {0}")]
    BadAnchors(String),
}

/// n-party fairness-threshold social welfare:
/// `F_Δ(u) = Δ + (1/n) Σ min{u_i − Δ, u_min}`.
///
/// Reduces to the mean when `max(u) − min(u) ≤ Δ` and to `min(u)` at Δ = 0.
pub fn fairness_threshold_swf(u: &[f64], delta: f64) -> Result<f64, WelfareError> {
    if u.is_empty() {
        return Err(WelfareError::EmptyUtilities);
    }
    if !(delta >= 0.0) {
        return Err(WelfareError::NegativeThreshold(delta));
    }
    let u_min = u.iter().copied().fold(f64::INFINITY, f64::min);
    let sum: f64 = u.iter().map(|&ui| (ui - delta).min(u_min)).sum();
    Ok(delta + sum / u.len() as f64)
}

/// 2-party fairness-threshold social welfare, piecewise as printed:
/// `min{u1,u2} + Δ` when the gap reaches Δ, the mean otherwise.
pub fn fairness_threshold_swf_2party(u1: f64, u2: f64, delta: f64) -> f64 {
    if (u1 - u2).abs() >= delta {
        u1.min(u2) + delta
    } else {
        0.5 * (u1 + u2)
    }
}

/// Alpha-fairness social welfare: `Σ u_i^{1−α}/(1−α)` (α ≠ 1), `Σ log u_i`
/// at α = 1. α = 0 is the utilitarian sum; α → ∞ approaches maximin.
pub fn alpha_fairness_swf(u: &[f64], alpha: f64) -> Result<f64, WelfareError> {
    if u.is_empty() {
        return Err(WelfareError::EmptyUtilities);
    }
    if !(alpha >= 0.0) {
        return Err(WelfareError::NegativeAlpha(alpha));
    }
    if alpha >= 1.0 {
        if let Some(&bad) = u.iter().find(|&&ui| ui <= 0.0) {
            return Err(WelfareError::NonPositiveUtility(bad));
        }
    }
    if (alpha - 1.0).abs() < 1e-12 {
        Ok(u.iter().map(|&ui| ui.ln()).sum())
    } else {
        let e = 1.0 - alpha;
        Ok(u.iter().map(|&ui| ui.powf(e) / e).sum())
    }
}

/// Gini coefficient `(1/2n²ū) ΣΣ|u_i − u_j|`, in [0, 1 − 1/n].
///
/// The all-zero vector is defined to have Gini 0; it shows up whenever the
/// noise increase is zero everywhere and any other convention wrecks sweep
/// summaries.
pub fn gini(u: &[f64]) -> Result<f64, WelfareError> {
    if u.is_empty() {
        return Err(WelfareError::EmptyUtilities);
    }
    if let Some(&bad) = u.iter().find(|&&ui| ui < 0.0) {
        return Err(WelfareError::NegativeUtility(bad));
    }
    let n = u.len() as f64;
    let mean: f64 = u.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Ok(0.0);
    }
    // sorted form: ΣΣ|u_i − u_j| = 2 Σ_k (2k − n + 1) u_(k)
    let mut sorted = u.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pair_sum: f64 = sorted
        .iter()
        .enumerate()
        .map(|(k, &v)| (2.0 * k as f64 - n + 1.0) * v)
        .sum::<f64>()
        * 2.0;
    Ok(pair_sum / (2.0 * n * n * mean))
}

/// Expected community reaction bands to cumulative noise above the ambient
/// level (EPA community-reaction survey data): mean exceedance in dB, the
/// observed range, and approximate annoyance percentages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactionBand {
    pub label: &'static str,
    pub mean_exceedance_db: f64,
    pub exceedance_range_db: (f64, f64),
    pub pct_very_annoyed: f64,
    pub pct_little_annoyed: f64,
}

pub const REACTION_BANDS: [ReactionBand; 5] = [
    ReactionBand { label: "No reaction", mean_exceedance_db: 2.0, exceedance_range_db: (0.0, 8.0), pct_very_annoyed: 10.0, pct_little_annoyed: 45.0 },
    ReactionBand { label: "Sporadic complaints", mean_exceedance_db: 6.0, exceedance_range_db: (3.0, 8.0), pct_very_annoyed: 5.0, pct_little_annoyed: 37.0 },
    ReactionBand { label: "Widespread complaints", mean_exceedance_db: 11.0, exceedance_range_db: (7.0, 19.0), pct_very_annoyed: 0.0, pct_little_annoyed: 26.0 },
    ReactionBand { label: "Threats of legal action", mean_exceedance_db: 21.0, exceedance_range_db: (18.0, 24.0), pct_very_annoyed: -5.0, pct_little_annoyed: 14.0 },
    ReactionBand { label: "Vigorous action", mean_exceedance_db: 28.0, exceedance_range_db: (23.0, 34.0), pct_very_annoyed: -10.0, pct_little_annoyed: 7.0 },
];

/// Default reaction-score anchors derived from the reaction bands. These are
/// artifact defaults, not measured ground truth; scenarios may override them.
pub const DEFAULT_REACTION_ANCHORS: [(f64, f64); 5] =
    [(0.0, 0.0), (6.0, 0.30), (11.0, 0.5), (21.0, 0.85), (28.0, 1.0)];

/// Monotone concave piecewise-linear interpolant mapping noise increase (dB)
/// to a community reaction score in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionCurve {
    anchors: Vec<(f64, f64)>,
}

impl Default for ReactionCurve {
    fn default() -> Self {
        ReactionCurve::new(DEFAULT_REACTION_ANCHORS.to_vec()).expect("default anchors are valid")
    }
}

impl ReactionCurve {
    /// Validates at load time: anchors start at (0, 0), abscissae strictly
    /// increase, scores are nondecreasing within [0, 1], and segment slopes
    /// are nonincreasing (concavity).
    pub fn new(anchors: Vec<(f64, f64)>) -> Result<Self, WelfareError> {
        if anchors.len() < 2 {
            return Err(WelfareError::BadAnchors("need at least two anchors".into()));
        }
        if anchors[0] != (0.0, 0.0) {
            return Err(WelfareError::BadAnchors(format!(
                "first anchor must be (0, 0), got {:?}",
                anchors[0]
            )));
        }
        let mut prev_slope = f64::INFINITY;
        for w in anchors.windows(2) {
            let (x0, y0) = w[0];
            let (x1, y1) = w[1];
            if x1 <= x0 {
                return Err(WelfareError::BadAnchors(format!("abscissae must increase ({x0} then {x1})")));
            }
            if y1 < y0 {
                return Err(WelfareError::BadAnchors(format!("scores must be nondecreasing ({y0} then {y1})")));
            }
            if !(0.0..=1.0).contains(&y1) {
                return Err(WelfareError::BadAnchors(format!("scores must lie in [0,1], got {y1}")));
            }
            let slope = (y1 - y0) / (x1 - x0);
            if slope > prev_slope + 1e-12 {
                return Err(WelfareError::BadAnchors(format!(
                    "not concave: slope rises from {prev_slope} to {slope} at x={x0}"
                )));
            }
            prev_slope = slope;
        }
        Ok(ReactionCurve { anchors })
    }

    pub fn anchors(&self) -> &[(f64, f64)] {
        &self.anchors
    }

    /// Score for a noise increase of `db` ≥ 0. Inputs above the last anchor
    /// clamp to its score (1.0 for the defaults).
    pub fn score(&self, db: f64) -> f64 {
        let db = db.max(0.0);
        let last = *self.anchors.last().unwrap();
        if db >= last.0 {
            return last.1;
        }
        for w in self.anchors.windows(2) {
            let (x0, y0) = w[0];
            let (x1, y1) = w[1];
            if db <= x1 {
                return y0 + (y1 - y0) * (db - x0) / (x1 - x0);
            }
        }
        last.1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn threshold_swf_reference_cases() {
        assert!((fairness_threshold_swf(&[0.4, 0.6, 0.9], 0.3).unwrap() - 0.566_666_666_7).abs() < 1e-9);
        // constant vector gives the constant for any threshold
        for delta in [0.0, 0.2, 5.0] {
            assert!((fairness_threshold_swf(&[0.7, 0.7, 0.7, 0.7], delta).unwrap() - 0.7).abs() < 1e-12);
        }
        // large threshold recovers the mean
        let u = [0.1, 0.5, 0.9];
        assert!((fairness_threshold_swf(&u, 10.0).unwrap() - 0.5).abs() < 1e-12);
        // zero threshold recovers the minimum
        assert!((fairness_threshold_swf(&u, 0.0).unwrap() - 0.1).abs() < 1e-12);
        assert!(fairness_threshold_swf(&[], 0.1).is_err());
        assert!(fairness_threshold_swf(&[0.5], -0.1).is_err());
    }

    #[test]
    fn threshold_swf_2party_cases() {
        assert_eq!(fairness_threshold_swf_2party(0.0, 10.0, 2.0), 2.0);
        assert_eq!(fairness_threshold_swf_2party(5.0, 5.0, 1.0), 5.0);
        // the gap boundary falls in the min+Δ branch as printed
        assert_eq!(fairness_threshold_swf_2party(1.0, 2.0, 1.0), 2.0);
        assert_eq!(fairness_threshold_swf_2party(1.0, 1.9, 1.0), 1.45);
    }

    #[test]
    fn alpha_fairness_cases() {
        assert_eq!(alpha_fairness_swf(&[1.0, 1.0], 1.0).unwrap(), 0.0);
        assert!((alpha_fairness_swf(&[4.0], 0.5).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(alpha_fairness_swf(&[2.0, 3.0], 0.0).unwrap(), 5.0);
        assert!(alpha_fairness_swf(&[0.0, 1.0], 1.0).is_err());
        assert!(alpha_fairness_swf(&[0.0, 1.0], 0.5).is_ok());
        // preference flips toward the equal split as alpha grows
        let a = [1.0, 3.0];
        let b = [2.0, 2.0];
        assert!((alpha_fairness_swf(&a, 0.0).unwrap() - alpha_fairness_swf(&b, 0.0).unwrap()).abs() < 1e-12);
        assert!(alpha_fairness_swf(&b, 5.0).unwrap() > alpha_fairness_swf(&a, 5.0).unwrap());
    }

    #[test]
    fn gini_cases() {
        assert_eq!(gini(&[3.0, 3.0, 3.0]).unwrap(), 0.0);
        assert!((gini(&[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(gini(&[0.0, 0.0]).unwrap(), 0.0);
        assert!(gini(&[-0.1, 1.0]).is_err());
    }

    #[test]
    fn reaction_curve_defaults() {
        let curve = ReactionCurve::default();
        assert_eq!(curve.score(0.0), 0.0);
        assert_eq!(curve.score(40.0), 1.0);
        assert!(curve.score(15.0) >= curve.score(10.0));
        // midpoint concavity across anchor pairs
        let anchors = curve.anchors().to_vec();
        for i in 0..anchors.len() {
            for j in i + 1..anchors.len() {
                let (a, fa) = anchors[i];
                let (b, fb) = anchors[j];
                let mid = curve.score(0.5 * (a + b));
                assert!(mid + 1e-12 >= 0.5 * (fa + fb), "not concave between {a} and {b}");
            }
        }
    }

    #[test]
    fn reaction_curve_validation() {
        assert!(ReactionCurve::new(vec![(0.0, 0.0), (5.0, 0.5), (10.0, 1.2)]).is_err());
        assert!(ReactionCurve::new(vec![(1.0, 0.0), (5.0, 0.5)]).is_err());
        assert!(ReactionCurve::new(vec![(0.0, 0.0), (5.0, 0.5), (4.0, 0.7)]).is_err());
        // convex anchor set rejected
        assert!(ReactionCurve::new(vec![(0.0, 0.0), (10.0, 0.1), (20.0, 1.0)]).is_err());
    }

    proptest! {
        #[test]
        fn threshold_swf_below_mean(u in proptest::collection::vec(0.0..1.0f64, 1..30), delta in 0.0..2.0f64) {
            let f = fairness_threshold_swf(&u, delta).unwrap();
            let mean = u.iter().sum::<f64>() / u.len() as f64;
            prop_assert!(f <= mean + 1e-12);
            let min = u.iter().copied().fold(f64::INFINITY, f64::min);
            let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if max - min <= delta {
                prop_assert!((f - mean).abs() < 1e-12);
            } else {
                prop_assert!(f < mean + 1e-12);
            }
        }

        #[test]
        fn threshold_swf_monotone_and_concave(
            u in proptest::collection::vec(0.0..1.0f64, 2..12),
            v in proptest::collection::vec(0.0..1.0f64, 2..12),
            idx in 0usize..12,
            bump in 0.001..0.5f64,
            delta in 0.0..1.0f64,
            lam in 0.0..1.0f64,
        ) {
            // nondecreasing in every coordinate
            let mut bumped = u.clone();
            let i = idx % bumped.len();
            bumped[i] = (bumped[i] + bump).min(2.0);
            prop_assert!(fairness_threshold_swf(&bumped, delta).unwrap()
                >= fairness_threshold_swf(&u, delta).unwrap() - 1e-12);
            // concavity along random chords of equal-length vectors
            if u.len() == v.len() {
                let blend: Vec<f64> = u.iter().zip(&v).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
                let fu = fairness_threshold_swf(&u, delta).unwrap();
                let fv = fairness_threshold_swf(&v, delta).unwrap();
                let fb = fairness_threshold_swf(&blend, delta).unwrap();
                prop_assert!(fb + 1e-9 >= lam * fu + (1.0 - lam) * fv);
            }
        }

        #[test]
        fn gini_invariants(u in proptest::collection::vec(0.0..10.0f64, 2..40), c in 0.1..5.0f64, shift in 0.1..5.0f64) {
            let g = gini(&u).unwrap();
            let n = u.len() as f64;
            prop_assert!((0.0..=1.0 - 1.0 / n + 1e-12).contains(&g));
            // scale invariance
            let scaled: Vec<f64> = u.iter().map(|&x| c * x).collect();
            prop_assert!((gini(&scaled).unwrap() - g).abs() < 1e-9);
            // adding a constant strictly decreases positive inequality
            let shifted: Vec<f64> = u.iter().map(|&x| x + shift).collect();
            if g > 1e-9 {
                prop_assert!(gini(&shifted).unwrap() < g);
            }
        }
    }
}
