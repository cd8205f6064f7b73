//! Deterministic inputs shared by the benchmarks.

use santalo_core::maxaffine::MaxAffine;
use santalo_core::measure::DiscreteMeasure;
use santalo_core::{Axis, GridFunction, Result, Symmetry};

/// `|x|²/2 + |x|` sampled on `[-8, 8]^dim` with `nodes` points per axis.
pub fn convex_grid(dim: usize, nodes: usize) -> Result<GridFunction> {
    let axes = vec![Axis::new(-8.0, 8.0, nodes)?; dim];
    GridFunction::from_fn(axes, Symmetry::Unconditional, |x| {
        let r2: f64 = x.iter().map(|t| t * t).sum();
        0.5 * r2 + r2.sqrt()
    })
}

/// Quasi-random points in `[-1, 1]^dim` from the additive recurrence with
/// the plastic-number generators.
fn low_discrepancy(m: usize, dim: usize) -> Vec<Vec<f64>> {
    let alpha = [0.754_877_666_246_692_7, 0.569_840_290_998_053_3];
    (1..=m)
        .map(|i| (0..dim).map(|k| 2.0 * ((i as f64 * alpha[k]).fract()) - 1.0).collect())
        .collect()
}

/// A centered measure on `m` atoms in dimension `dim`, full-dimensional.
pub fn centered_measure(m: usize, dim: usize) -> Result<DiscreteMeasure> {
    let mut atoms = low_discrepancy(m, dim);
    let bar: Vec<f64> = (0..dim)
        .map(|k| atoms.iter().map(|a| a[k]).sum::<f64>() / m as f64)
        .collect();
    for a in &mut atoms {
        for (c, b) in a.iter_mut().zip(&bar) {
            *c -= b;
        }
    }
    DiscreteMeasure::uniform(atoms)
}

/// Supply, demand and squared-distance cost for an `m × m` transport problem.
pub fn transport_problem(m: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let xs = low_discrepancy(m, 2);
    let ys = low_discrepancy(2 * m, 2).split_off(m);
    let supply: Vec<f64> = (0..m).map(|i| 1.0 + (i % 3) as f64).collect();
    let demand: Vec<f64> = (0..m).map(|j| 1.0 + (j % 5) as f64).collect();
    let cost = xs
        .iter()
        .flat_map(|x| ys.iter().map(move |y| (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)))
        .collect();
    (supply, demand, cost)
}

/// Max-affine potential with `m` pieces whose slopes surround the origin.
pub fn polygon_potential(m: usize) -> Result<MaxAffine> {
    let slopes: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            let t = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
            vec![t.cos(), t.sin()]
        })
        .collect();
    MaxAffine::new(slopes, vec![0.0; m])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_valid() {
        assert!(convex_grid(2, 33).unwrap().is_convex());
        let nu = centered_measure(40, 2).unwrap();
        assert!(nu.barycenter().iter().all(|b| b.abs() < 1e-12));
        let (s, d, c) = transport_problem(10);
        assert_eq!((s.len(), d.len(), c.len()), (10, 10, 100));
        assert_eq!(polygon_potential(7).unwrap().len(), 7);
    }
}
