//! Objective normalization and the two-objective hypervolume indicator.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalized {
    pub values: Vec<[f64; 2]>,
    /// Objectives with a single distinct value; they are mapped to 0.
    pub degenerate: [bool; 2],
}

/// Min-max rescaling of each objective to `[0, 1]`.
pub fn normalize_objectives(records: &[[f64; 2]]) -> Normalized {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for r in records {
        for k in 0..2 {
            lo[k] = lo[k].min(r[k]);
            hi[k] = hi[k].max(r[k]);
        }
    }
    normalize_with(records, lo, hi)
}

/// Rescales with the given ideal (`lo`) and nadir (`hi`) points.
pub fn normalize_with(records: &[[f64; 2]], lo: [f64; 2], hi: [f64; 2]) -> Normalized {
    let degenerate = [0, 1].map(|k| !(hi[k] > lo[k]));
    let values = records
        .iter()
        .map(|r| [0, 1].map(|k| if degenerate[k] { 0.0 } else { (r[k] - lo[k]) / (hi[k] - lo[k]) }))
        .collect();
    Normalized { values, degenerate }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HvConvention {
    /// Area dominated by the front up to the reference point `(1, 1)`; higher is better.
    #[default]
    Nadir,
    /// Area between the origin `(0, 0)` and the front, i.e. the part of the unit square the
    /// front does not dominate; lower is better.
    Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hypervolume {
    pub value: f64,
    /// Points that had to be clipped into the unit square.
    pub clipped: usize,
}

/// Hypervolume of a normalized front (minimization of both objectives) by a sorted sweep.
pub fn hypervolume_2d(front: &[[f64; 2]], convention: HvConvention) -> Hypervolume {
    let mut clipped = 0;
    let pts: Vec<[f64; 2]> = front
        .iter()
        .map(|p| {
            let c = p.map(|v| v.clamp(0.0, 1.0));
            if c != *p {
                clipped += 1;
            }
            c
        })
        .collect();
    if clipped > 0 {
        log::warn!("{clipped} front points outside the unit square were clipped");
    }
    let area = dominated_area(&pts, [1.0, 1.0]);
    let value = match convention {
        HvConvention::Nadir => area,
        HvConvention::Origin => 1.0 - area,
    };
    Hypervolume { value, clipped }
}

/// Area dominated by `points` and bounded by `reference`; points beyond it add nothing.
pub fn dominated_area(points: &[[f64; 2]], reference: [f64; 2]) -> f64 {
    let mut pts: Vec<[f64; 2]> = points
        .iter()
        .copied()
        .filter(|p| p[0] < reference[0] && p[1] < reference[1])
        .collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut area = 0.0;
    let mut best_y = reference[1];
    for (i, p) in pts.iter().enumerate() {
        if p[1] >= best_y {
            continue;
        }
        best_y = p[1];
        let next_x = pts[i + 1..]
            .iter()
            .find(|q| q[1] < best_y)
            .map_or(reference[0], |q| q[0]);
        area += (next_x - p[0]) * (reference[1] - best_y);
    }
    area
}
