use super::vehicle::{VehicleId, VehicleState};

type Vec2 = [f64; 2];

fn corners(v: &VehicleState) -> [Vec2; 4] {
    let (s, c) = v.heading.sin_cos();
    let hl = v.length / 2.0;
    let hw = v.width / 2.0;
    let along = [c * hl, s * hl];
    let across = [-s * hw, c * hw];
    [
        [v.x + along[0] + across[0], v.y + along[1] + across[1]],
        [v.x + along[0] - across[0], v.y + along[1] - across[1]],
        [v.x - along[0] - across[0], v.y - along[1] - across[1]],
        [v.x - along[0] + across[0], v.y - along[1] + across[1]],
    ]
}

fn project(points: &[Vec2; 4], axis: Vec2) -> (f64, f64) {
    points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let d = p[0] * axis[0] + p[1] * axis[1];
        (lo.min(d), hi.max(d))
    })
}

/// Separating-axis test on the two footprints. Touching edges do not count.
pub fn rectangles_overlap(a: &VehicleState, b: &VehicleState) -> bool {
    let reach = (a.length.hypot(a.width) + b.length.hypot(b.width)) / 2.0;
    if (a.x - b.x).abs() > reach || (a.y - b.y).abs() > reach {
        return false;
    }
    let ca = corners(a);
    let cb = corners(b);
    let axes = [
        [a.heading.cos(), a.heading.sin()],
        [-a.heading.sin(), a.heading.cos()],
        [b.heading.cos(), b.heading.sin()],
        [-b.heading.sin(), b.heading.cos()],
    ];
    axes.iter().all(|&axis| {
        let (a_lo, a_hi) = project(&ca, axis);
        let (b_lo, b_hi) = project(&cb, axis);
        a_hi > b_lo && b_hi > a_lo
    })
}

/// First overlapping pair in (lower id, higher id) lexicographic order.
pub fn detect_collision(vehicles: &[VehicleState]) -> Option<(VehicleId, VehicleId)> {
    let mut sorted: Vec<&VehicleState> = vehicles.iter().collect();
    sorted.sort_by_key(|v| v.id);
    for (i, a) in sorted.iter().enumerate() {
        for b in &sorted[i + 1..] {
            if rectangles_overlap(a, b) {
                return Some((a.id, b.id));
            }
        }
    }
    None
}
