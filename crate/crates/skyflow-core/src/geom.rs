//! Planar geometry primitives shared by the network and exposure models.

use serde::{Deserialize, Serialize};

/// A point in the scenario's planar coordinate system (feet).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Distance from `p` to the nearest point of segment `(a, b)`.
///
/// Degenerate segments (a == b) fall back to point distance.
pub fn point_segment_distance(p: &Point2, a: &Point2, b: &Point2) -> f64 {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
    let t = t.clamp(0.0, 1.0);
    let proj = Point2::new(a.x + t * dx, a.y + t * dy);
    p.distance(&proj)
}

fn orient(a: &Point2, b: &Point2, c: &Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: &Point2, b: &Point2, p: &Point2) -> bool {
    p.x >= a.x.min(b.x) - 1e-9
        && p.x <= a.x.max(b.x) + 1e-9
        && p.y >= a.y.min(b.y) - 1e-9
        && p.y <= a.y.max(b.y) + 1e-9
}

/// True when segments (a1,a2) and (b1,b2) cross at a point interior to both,
/// or overlap collinearly. Segments that merely share an endpoint do not count
/// as crossing; corridor links meeting at a vertiport are legal.
pub fn segments_cross(a1: &Point2, a2: &Point2, b1: &Point2, b2: &Point2) -> bool {
    let shares_endpoint = |p: &Point2, q: &Point2| p.distance(q) < 1e-9;
    if shares_endpoint(a1, b1) || shares_endpoint(a1, b2) || shares_endpoint(a2, b1) || shares_endpoint(a2, b2) {
        // Collinear overlapping segments that share an endpoint still conflict.
        let d1 = orient(a1, a2, b1);
        let d2 = orient(a1, a2, b2);
        if d1.abs() < 1e-9 && d2.abs() < 1e-9 {
            // Same line; check whether the non-shared endpoints intrude.
            for (p, s1, s2) in [(b1, a1, a2), (b2, a1, a2), (a1, b1, b2), (a2, b1, b2)] {
                if on_segment(s1, s2, p)
                    && p.distance(s1) > 1e-9
                    && p.distance(s2) > 1e-9
                {
                    return true;
                }
            }
        }
        return false;
    }
    let d1 = orient(b1, b2, a1);
    let d2 = orient(b1, b2, a2);
    let d3 = orient(a1, a2, b1);
    let d4 = orient(a1, a2, b2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    // Collinear or touching cases: an endpoint lying strictly inside the other segment.
    let touches = |d: f64, s1: &Point2, s2: &Point2, p: &Point2| {
        d.abs() < 1e-9 && on_segment(s1, s2, p) && p.distance(s1) > 1e-9 && p.distance(s2) > 1e-9
    };
    touches(d1, b1, b2, a1) || touches(d2, b1, b2, a2) || touches(d3, a1, a2, b1) || touches(d4, a1, a2, b2)
}
