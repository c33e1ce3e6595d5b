//! Brute-force geometric median in the plane.
//!
//! The sum of distances is convex, so a grid search over the bounding box
//! followed by repeated zooms onto the best cell converges to the minimizer
//! without using any fixed-point update.

const GRID: usize = 41;

fn objective(points: &[[f64; 2]], x: [f64; 2]) -> f64 {
    points.iter().map(|p| ((p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2)).sqrt()).sum()
}

pub fn brute_force_median(points: &[[f64; 2]]) -> [f64; 2] {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let mut best = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let mut half = [((hi[0] - lo[0]) / 2.0).max(1e-9), ((hi[1] - lo[1]) / 2.0).max(1e-9)];
    while half[0].max(half[1]) > 1e-7 {
        let centre = best;
        let mut best_f = objective(points, best);
        for i in 0..GRID {
            for j in 0..GRID {
                let x = [
                    centre[0] - half[0] + 2.0 * half[0] * i as f64 / (GRID - 1) as f64,
                    centre[1] - half[1] + 2.0 * half[1] * j as f64 / (GRID - 1) as f64,
                ];
                let f = objective(points, x);
                if f < best_f {
                    best_f = f;
                    best = x;
                }
            }
        }
        // Keep two grid cells around the winner so the minimizer stays inside.
        half = [half[0] * 4.0 / (GRID - 1) as f64, half[1] * 4.0 / (GRID - 1) as f64];
    }
    best
}
