//! Distances between sampled curves.

use crate::linalg::dot;

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let len2 = dot(&ab, &ab);
    let t = if len2 > 0.0 { (dot(&ap, &ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let closest: Vec<f64> = a.iter().zip(&ab).map(|(x, d)| x + t * d).collect();
    let d = sub(p, &closest);
    dot(&d, &d).sqrt()
}

/// Distance from `p` to the polyline through `line`.
pub fn point_polyline_distance(p: &[f64], line: &[Vec<f64>]) -> f64 {
    match line {
        [] => f64::INFINITY,
        [only] => {
            let d = sub(p, only);
            dot(&d, &d).sqrt()
        }
        _ => line
            .windows(2)
            .map(|w| segment_distance(p, &w[0], &w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Symmetric Hausdorff distance between the vertices of each polyline and the other polyline.
pub fn hausdorff_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let one_way = |x: &[Vec<f64>], y: &[Vec<f64>]| {
        x.iter().map(|p| point_polyline_distance(p, y)).fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}
