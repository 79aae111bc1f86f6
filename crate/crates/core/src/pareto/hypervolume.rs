//! Exact hypervolume for up to four objectives.

use super::{check_finite, non_dominated_indices, ParetoError, Result};

const MAX_OBJECTIVES: usize = 4;

/// Volume dominated by `points` (all strictly inside the box) up to `r`.
fn volume(points: &[Vec<f64>], r: &[f64]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let m = r.len();
    match m {
        1 => r[0] - points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
        2 => {
            let mut p: Vec<&Vec<f64>> = points.iter().collect();
            p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
            let mut area = 0.0;
            let mut ceiling = r[1];
            for q in p {
                if q[1] < ceiling {
                    area += (r[0] - q[0]) * (ceiling - q[1]);
                    ceiling = q[1];
                }
            }
            area
        }
        _ => {
            // Slice along the last objective: between consecutive levels the
            // cross-section is the (m-1)-volume of the points below.
            let mut p: Vec<&Vec<f64>> = points.iter().collect();
            p.sort_by(|a, b| a[m - 1].total_cmp(&b[m - 1]));
            let mut total = 0.0;
            let mut active: Vec<Vec<f64>> = Vec::with_capacity(p.len());
            for (k, q) in p.iter().enumerate() {
                active.push(q[..m - 1].to_vec());
                let next = p.get(k + 1).map_or(r[m - 1], |n| n[m - 1]);
                let height = next - q[m - 1];
                if height > 0.0 {
                    let kept: Vec<Vec<f64>> = non_dominated_indices(&active)
                        .expect("finite")
                        .into_iter()
                        .map(|i| active[i].clone())
                        .collect();
                    total += volume(&kept, &r[..m - 1]) * height;
                    active = kept;
                }
            }
            total
        }
    }
}

fn check(points: &[Vec<f64>], r: &[f64]) -> Result<()> {
    if r.is_empty() || r.len() > MAX_OBJECTIVES {
        return Err(ParetoError::UnsupportedDimension(r.len()));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(ParetoError::NonFinite(points.len()));
    }
    let m = check_finite(points.iter().map(Vec::as_slice))?;
    if !points.is_empty() && m != r.len() {
        return Err(ParetoError::DimensionMismatch {
            index: 0,
            expected: r.len(),
            got: m,
        });
    }
    Ok(())
}

/// Lebesgue measure of the region dominated by `points` and bounded by
/// `reference`. Every point must strictly dominate the reference point.
pub fn hypervolume(points: &[Vec<f64>], reference: &[f64]) -> Result<f64> {
    check(points, reference)?;
    if let Some(i) = points
        .iter()
        .position(|p| p.iter().zip(reference).any(|(x, r)| x >= r))
    {
        return Err(ParetoError::NotDominatingReference(i));
    }
    Ok(volume(points, reference))
}

/// Like [`hypervolume`], but points outside the reference box contribute
/// nothing instead of being rejected.
pub fn hypervolume_clipped(points: &[Vec<f64>], reference: &[f64]) -> Result<f64> {
    check(points, reference)?;
    let inside: Vec<Vec<f64>> = points
        .iter()
        .filter(|p| p.iter().zip(reference).all(|(x, r)| x < r))
        .cloned()
        .collect();
    Ok(volume(&inside, reference))
}

/// Hypervolume gained by adding `batch` to `archive`. Points outside the
/// reference box add nothing.
pub fn hvi(batch: &[Vec<f64>], archive: &[Vec<f64>], reference: &[f64]) -> Result<f64> {
    let base = hypervolume_clipped(archive, reference)?;
    let union: Vec<Vec<f64>> = archive.iter().chain(batch).cloned().collect();
    let joint = hypervolume_clipped(&union, reference)?;
    Ok((joint - base).max(0.0))
}

/// Hypervolume improvement relative to the local front's own hypervolume.
/// A front with zero hypervolume yields `+inf` for any positive improvement
/// and 0 otherwise.
pub fn rhvi(batch: &[Vec<f64>], local_front: &[Vec<f64>], reference: &[f64]) -> Result<f64> {
    let gain = hvi(batch, local_front, reference)?;
    let base = hypervolume_clipped(local_front, reference)?;
    Ok(if base > 0.0 {
        gain / base
    } else if gain > 0.0 {
        f64::INFINITY
    } else {
        0.0
    })
}

/// Componentwise nadir of `points` pushed out by `margin` times each
/// objective's observed range. A zero range is widened by `margin` in
/// absolute units so the box never collapses.
pub fn reference_point(points: &[Vec<f64>], margin: f64) -> Result<Vec<f64>> {
    let m = check_finite(points.iter().map(Vec::as_slice))?;
    if points.is_empty() {
        return Err(ParetoError::EmptyFront);
    }
    Ok((0..m)
        .map(|j| {
            let lo = points.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min);
            let hi = points
                .iter()
                .map(|p| p[j])
                .fold(f64::NEG_INFINITY, f64::max);
            let range = hi - lo;
            hi + if range > 0.0 { margin * range } else { margin }
        })
        .collect())
}
