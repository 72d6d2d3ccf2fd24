//! Synthetic datasets with known optimal acquisition policies.

use rand::Rng;

use crate::data::Dataset;
use crate::seed;
use crate::Result;

fn names(p: usize) -> Vec<String> {
    (0..p).map(|i| format!("f{i}")).collect()
}

fn binary_classes() -> Vec<String> {
    vec!["neg".into(), "pos".into()]
}

/// Label is the sign of `f0` (cost 0.1); `f1` and `f2` are noise with
/// costs 0.5 and 0.8.
pub fn single_informative(n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = seed::rng(seed);
    let mut values = Vec::with_capacity(3 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        labels.push(usize::from(x[0] > 0.0));
        values.extend_from_slice(&x);
    }
    Dataset::new(values, vec![true; 3 * n], labels, vec![0.1, 0.5, 0.8], names(3), binary_classes())
}

/// Two perfectly correlated informative features, `f0` (cost 0.1) and its
/// copy `f1` (cost 0.9), plus a noise feature `f2` (cost 0.5). The label is
/// the sign of `f0`.
pub fn redundant_pair(n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = seed::rng(seed);
    let mut values = Vec::with_capacity(3 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x0: f64 = rng.gen_range(-1.0..1.0);
        let noise: f64 = rng.gen_range(-1.0..1.0);
        labels.push(usize::from(x0 > 0.0));
        values.extend_from_slice(&[x0, x0, noise]);
    }
    Dataset::new(values, vec![true; 3 * n], labels, vec![0.1, 0.9, 0.5], names(3), binary_classes())
}

/// Three binary features; the label equals `x0` when `x1 = 1` and `x2`
/// otherwise, so a perfect policy reads `x1` and then one of the others.
pub fn switch_three(n: usize, costs: Vec<f64>, seed: u64) -> Result<Dataset> {
    let mut rng = seed::rng(seed);
    let mut values = Vec::with_capacity(3 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: [u8; 3] = [rng.gen_range(0..2), rng.gen_range(0..2), rng.gen_range(0..2)];
        let y = if x[1] == 1 { x[0] } else { x[2] };
        labels.push(usize::from(y));
        values.extend(x.iter().map(|&b| f64::from(b)));
    }
    Dataset::new(values, vec![true; 3 * n], labels, costs, names(3), binary_classes())
}

/// Binary task with overlapping classes: `f0` and `f1` are shifted by
/// `±separation / 2` depending on the label and blurred by unit Gaussian-like
/// noise; `f2` and `f3` are pure noise. Costs are `[0.2, 0.4, 0.3, 0.6]`.
pub fn overlapping_binary(n: usize, separation: f64, seed: u64) -> Result<Dataset> {
    let mut rng = seed::rng(seed);
    // sum of uniforms: mean 0, variance 1
    let mut noise = move || (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0;
    let mut values = Vec::with_capacity(4 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % 2;
        let shift = if y == 1 { separation / 2.0 } else { -separation / 2.0 };
        values.extend_from_slice(&[shift + noise(), shift + noise(), noise(), noise()]);
        labels.push(y);
    }
    Dataset::new(values, vec![true; 4 * n], labels, vec![0.2, 0.4, 0.3, 0.6], names(4), binary_classes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_seeded() {
        assert_eq!(redundant_pair(20, 1).unwrap(), redundant_pair(20, 1).unwrap());
        let ds = redundant_pair(50, 2).unwrap();
        for r in 0..ds.n_rows() {
            assert_eq!(ds.value(r, 0), ds.value(r, 1));
            assert_eq!(ds.label(r), usize::from(ds.value(r, 0).unwrap() > 0.0));
        }
        let s = switch_three(40, vec![0.2, 0.3, 0.4], 3).unwrap();
        for r in 0..s.n_rows() {
            let x: Vec<f64> = (0..3).map(|j| s.value(r, j).unwrap()).collect();
            let y = if x[1] == 1.0 { x[0] } else { x[2] };
            assert_eq!(s.label(r), y as usize);
        }
        let o = overlapping_binary(100, 1.0, 4).unwrap();
        assert_eq!(o.class_counts(), vec![50, 50]);
    }
}
