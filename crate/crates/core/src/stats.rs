//! Two-sample energy distance, permutation p-values, a Kolmogorov–Smirnov
//! uniformity check and CLT intervals.

use serde::Serialize;
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Normal quantile for a two-sided 95% interval.
pub const Z95: f64 = 1.959963984540054;

/// Sample mean with a CLT half-width `Z95 · s/√n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(x: &[f64]) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::EmptySample);
        }
        let n = x.len();
        let mean = x.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        Ok(Self { mean, half_width: Z95 * (var / n as f64).sqrt(), n })
    }

    /// Standard error `s/√n`.
    pub fn std_error(&self) -> f64 {
        self.half_width / Z95
    }
}

/// Points of a common dimension, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    dim: usize,
    data: Vec<f64>,
}

impl Sample {
    pub fn new(dim: usize, data: Vec<f64>) -> Self {
        assert!(dim > 0 && data.len() % dim == 0);
        Self { dim, data }
    }

    pub fn scalar(x: Vec<f64>) -> Self {
        Self::new(1, x)
    }

    pub fn from_points<const D: usize>(p: &[[f64; D]]) -> Self {
        Self::new(D, p.iter().flatten().copied().collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Orders a pair so that every statistic is computed the same way for
/// `(a, b)` and `(b, a)`.
fn canonical<'a>(a: &'a Sample, b: &'a Sample) -> (&'a Sample, &'a Sample) {
    let key = |s: &Sample| (s.len(), s.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    if key(a) <= key(b) {
        (a, b)
    } else {
        (b, a)
    }
}

/// `Σ_{i<j} (x_j − x_i)` for sorted `x`.
fn pair_sum_sorted(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    x.iter().enumerate().map(|(k, v)| v * (2.0 * k as f64 - n + 1.0)).sum()
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// V-statistic energy distance
/// `2 mean|aᵢ − bⱼ| − mean|aᵢ − aᵢ'| − mean|bⱼ − bⱼ'|`.
///
/// Exactly zero for identical inputs and bitwise symmetric. Scalars use an
/// `O(n log n)` sort; higher dimensions are `O(n²)`.
pub fn two_sample_distance(a: &Sample, b: &Sample) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    if a.dim != b.dim {
        return Err(Error::Config(format!("sample dimensions differ: {} vs {}", a.dim, b.dim)));
    }
    if a.data == b.data {
        return Ok(0.0);
    }
    let (a, b) = canonical(a, b);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (waa, wbb, cross) = if a.dim == 1 {
        let sa = sorted(&a.data);
        let sb = sorted(&b.data);
        if sa == sb {
            return Ok(0.0);
        }
        let mut pooled = sa.clone();
        pooled.extend_from_slice(&sb);
        pooled.sort_by(f64::total_cmp);
        let (wa, wb) = (pair_sum_sorted(&sa), pair_sum_sorted(&sb));
        (2.0 * wa, 2.0 * wb, pair_sum_sorted(&pooled) - wa - wb)
    } else {
        let within = |s: &Sample| {
            let mut acc = 0.0;
            for i in 0..s.len() {
                for j in 0..i {
                    acc += euclid(s.point(i), s.point(j));
                }
            }
            2.0 * acc
        };
        let mut cross = 0.0;
        for i in 0..a.len() {
            for j in 0..b.len() {
                cross += euclid(a.point(i), b.point(j));
            }
        }
        (within(a), within(b), cross)
    };
    Ok((2.0 * cross / (n * m) - waa / (n * n) - wbb / (m * m)).max(0.0))
}

/// `2·mean|X − Y| − mean|X − X'| − mean|Y − Y'|` for `X ~ N(0,1)`,
/// `Y ~ N(μ,1)`, from folded-normal means.
pub fn gaussian_energy_distance(mu: f64) -> f64 {
    use std::f64::consts::PI;
    // X − Y ~ N(−μ, 2): E|·| = 2 φ(μ/√2)·√2 + μ(2Φ(μ/√2) − 1).
    let s = 2f64.sqrt();
    let z = mu.abs() / s;
    let phi = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    let big_phi = 0.5 * (1.0 + erf(z / 2f64.sqrt()));
    let cross = s * 2.0 * phi + mu.abs() * (2.0 * big_phi - 1.0);
    let within = 2.0 / PI.sqrt();
    2.0 * cross - 2.0 * within
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PermutationResult {
    pub distance: f64,
    pub p_value: f64,
}

/// Energy distance with a permutation p-value `(1 + #{D* ≥ D}) / (1 + P)`.
///
/// Permutations are drawn from `(seed, stream)`; the pooled distance matrix
/// makes each relabeling one matrix-vector product.
pub fn permutation_test(a: &Sample, b: &Sample, permutations: usize, seed: u64, stream: u64) -> Result<PermutationResult> {
    let distance = two_sample_distance(a, b)?;
    let (a, b) = canonical(a, b);
    let (n, m) = (a.len(), b.len());
    let total = n + m;
    let dim = a.dim;
    let mut pooled = a.data.clone();
    pooled.extend_from_slice(&b.data);
    let pt = |i: usize| &pooled[i * dim..(i + 1) * dim];
    let mut d = vec![0.0; total * total];
    for i in 0..total {
        for j in 0..i {
            let v = euclid(pt(i), pt(j));
            d[i * total + j] = v;
            d[j * total + i] = v;
        }
    }
    let grand: f64 = d.iter().sum();
    let statistic = |mask: &[f64]| {
        let mut saa = 0.0;
        let mut sab = 0.0;
        for i in 0..total {
            let row = &d[i * total..(i + 1) * total];
            let r: f64 = row.iter().zip(mask).map(|(x, w)| x * w).sum();
            if mask[i] == 1.0 {
                saa += r;
            } else {
                sab += r;
            }
        }
        let sbb = grand - saa - 2.0 * sab;
        let (nf, mf) = (n as f64, m as f64);
        2.0 * sab / (nf * mf) - saa / (nf * nf) - sbb / (mf * mf)
    };
    let mut mask: Vec<f64> = (0..total).map(|i| if i < n { 1.0 } else { 0.0 }).collect();
    let observed = statistic(&mask);
    let mut idx: Vec<usize> = (0..total).collect();
    let mut st = Stream::new(seed, stream);
    let mut exceed = 0usize;
    for _ in 0..permutations {
        // Partial Fisher–Yates: the first n slots become group a.
        for i in 0..n {
            let j = i + st.below(total - i);
            idx.swap(i, j);
        }
        mask.fill(0.0);
        for &i in &idx[..n] {
            mask[i] = 1.0;
        }
        if statistic(&mask) >= observed * (1.0 - 1e-12) {
            exceed += 1;
        }
    }
    Ok(PermutationResult { distance, p_value: (1 + exceed) as f64 / (1 + permutations) as f64 })
}

/// Kolmogorov–Smirnov test of `x` against Uniform(0, 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

pub fn ks_uniform(x: &[f64]) -> Result<KsResult> {
    if x.is_empty() {
        return Err(Error::EmptySample);
    }
    let s = sorted(x);
    let n = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let v = v.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - v).max(v - i as f64 / n)
        })
        .fold(0.0, f64::max);
    // Stephens' finite-sample correction to the asymptotic law.
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    Ok(KsResult { statistic: d, p_value: kolmogorov_q(lambda) })
}

/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`, the Kolmogorov tail.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{index_stream, Namespace};

    fn normals(seed: u64, n: usize, mu: f64) -> Vec<f64> {
        let mut st = Stream::new(seed, index_stream(Namespace::Auxiliary, 1));
        (0..n).map(|_| mu + st.normal()).collect()
    }

    #[test]
    fn identical_samples_give_exact_zero() {
        let a = Sample::scalar(normals(1, 300, 0.0));
        assert_eq!(two_sample_distance(&a, &a).unwrap(), 0.0);
        let p = Sample::new(2, normals(2, 200, 0.0));
        assert_eq!(two_sample_distance(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_bitwise() {
        let a = Sample::scalar(normals(1, 301, 0.0));
        let b = Sample::scalar(normals(2, 250, 0.3));
        assert_eq!(two_sample_distance(&a, &b).unwrap().to_bits(), two_sample_distance(&b, &a).unwrap().to_bits());
        let a = Sample::new(2, normals(3, 200, 0.0));
        let b = Sample::new(2, normals(4, 160, 0.5));
        assert_eq!(two_sample_distance(&a, &b).unwrap().to_bits(), two_sample_distance(&b, &a).unwrap().to_bits());
    }

    #[test]
    fn sorted_and_pairwise_paths_agree() {
        let a = normals(5, 120, 0.0);
        let b = normals(6, 90, 0.4);
        let fast = two_sample_distance(&Sample::scalar(a.clone()), &Sample::scalar(b.clone())).unwrap();
        let mut cross = 0.0;
        for x in &a {
            for y in &b {
                cross += (x - y).abs();
            }
        }
        let within = |v: &[f64]| v.iter().map(|x| v.iter().map(|y| (x - y).abs()).sum::<f64>()).sum::<f64>();
        let (n, m) = (a.len() as f64, b.len() as f64);
        let slow = 2.0 * cross / (n * m) - within(&a) / (n * n) - within(&b) / (m * m);
        assert!((fast - slow).abs() < 1e-12);
    }

    #[test]
    fn gaussian_closed_form() {
        assert!(gaussian_energy_distance(0.0).abs() < 1e-15);
        let n = 10_000;
        let mu = 0.5;
        let truth = gaussian_energy_distance(mu);
        // Batch the estimator to get a spread without a full bootstrap.
        let reps: Vec<f64> = (0..20)
            .map(|r| {
                let a = Sample::scalar(normals(100 + 2 * r, n, 0.0));
                let b = Sample::scalar(normals(101 + 2 * r, n, mu));
                two_sample_distance(&a, &b).unwrap()
            })
            .collect();
        let e = Estimate::from_samples(&reps).unwrap();
        let sd = e.std_error() * (reps.len() as f64).sqrt();
        assert!((reps[0] - truth).abs() < 3.0 * sd, "{} vs {truth} (sd {sd})", reps[0]);
        assert!((e.mean - truth).abs() < 3.0 * e.std_error() + 2.0 / n as f64);
    }

    #[test]
    fn permutation_detects_shift_and_accepts_null() {
        let a = Sample::scalar(normals(7, 150, 0.0));
        let b = Sample::scalar(normals(8, 150, 1.0));
        let r = permutation_test(&a, &b, 200, 1, 0).unwrap();
        assert!(r.p_value < 0.01, "{r:?}");
        let c = Sample::scalar(normals(9, 150, 0.0));
        let r = permutation_test(&a, &c, 200, 1, 0).unwrap();
        assert!(r.p_value > 0.01, "{r:?}");
        assert_eq!(r.distance, two_sample_distance(&a, &c).unwrap());
    }

    #[test]
    fn ks_accepts_uniform_and_rejects_skew() {
        let mut st = Stream::new(3, index_stream(Namespace::Auxiliary, 2));
        let u: Vec<f64> = (0..500).map(|_| st.uniform()).collect();
        assert!(ks_uniform(&u).unwrap().p_value > 0.01);
        let skew: Vec<f64> = u.iter().map(|x| x * x).collect();
        assert!(ks_uniform(&skew).unwrap().p_value < 1e-6);
        // Exact small case: one point at 1/2 has D = 1/2.
        assert_eq!(ks_uniform(&[0.5]).unwrap().statistic, 0.5);
    }

    #[test]
    fn estimate_half_width() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(e.mean, 2.5);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((e.half_width - Z95 * sd / 2.0).abs() < 1e-15);
        assert!(Estimate::from_samples(&[]).is_err());
    }
}
