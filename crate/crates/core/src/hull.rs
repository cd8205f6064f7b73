//! Convex hulls: the lower hull of a sampled 1D function and the planar hull
//! of a point set (monotone chain).

#[inline]
fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Indices of the vertices of the lower convex hull of the points
/// `(xs[i], fs[i])`, skipping `+∞` values. `xs` must be strictly increasing.
/// Collinear points are dropped, so consecutive hull slopes strictly increase.
pub fn lower_hull(xs: &[f64], fs: &[f64]) -> Vec<usize> {
    debug_assert_eq!(xs.len(), fs.len());
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..xs.len() {
        if !fs[i].is_finite() {
            continue;
        }
        let p = (xs[i], fs[i]);
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            if cross((xs[a], fs[a]), (xs[b], fs[b]), p) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

/// Counter-clockwise convex hull of planar points, without collinear points.
/// Returns indices into `pts`. Degenerate inputs give fewer than three indices.
pub fn convex_hull_2d(pts: &[[f64; 2]]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0]).then(pts[a][1].total_cmp(&pts[b][1])));
    idx.dedup_by(|a, b| pts[*a] == pts[*b]);
    if idx.len() < 3 {
        return idx;
    }
    let p = |i: usize| (pts[i][0], pts[i][1]);
    let mut lower: Vec<usize> = Vec::new();
    for &i in &idx {
        while lower.len() >= 2 && cross(p(lower[lower.len() - 2]), p(lower[lower.len() - 1]), p(i)) <= 0.0 {
            lower.pop();
        }
        lower.push(i);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &i in idx.iter().rev() {
        while upper.len() >= 2 && cross(p(upper[upper.len() - 2]), p(upper[upper.len() - 1]), p(i)) <= 0.0 {
            upper.pop();
        }
        upper.push(i);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Signed area of a polygon given in order.
pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        s += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * s
}
