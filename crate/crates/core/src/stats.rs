//! Empirical distributions, the two-sample Kolmogorov–Smirnov test and
//! figure-style curve tables.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

fn check_samples(samples: &[f64], what: &'static str) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Empty(what));
    }
    if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
        return Err(Error::Config(format!("non-finite sample {bad}")));
    }
    Ok(())
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Right-continuous step function `S(x) = #{samples <= x} / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn n(&self) -> usize {
        self.sorted.len()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.n() as f64
    }
}

pub fn ecdf(samples: &[f64]) -> Result<EmpiricalDistribution> {
    check_samples(samples, "ECDF samples")?;
    Ok(EmpiricalDistribution { sorted: sorted(samples) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d: f64,
    pub m: usize,
    pub n: usize,
    pub p_asymptotic: f64,
    pub p_exact: Option<f64>,
}

/// Pooled sizes up to this bound also get the exact permutation p-value.
pub const EXACT_LIMIT: usize = 16;

/// `sup_x |S_a(x) - S_b(x)|` over two sorted samples. Both ECDFs are
/// advanced past every copy of a value before the gap is measured, so ties
/// are compared at the right-continuous value.
fn d_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (m, n) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / m - j as f64 / n).abs());
    }
    d
}

pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    check_samples(a, "first KS sample")?;
    check_samples(b, "second KS sample")?;
    Ok(d_sorted(&sorted(a), &sorted(b)))
}

/// Kolmogorov survival function `Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} exp(-2k²λ²)`.
///
/// Below λ = 1.18 the alternating series converges slowly, so the equivalent
/// theta-function form `1 - √(2π)/λ Σ_{k≥1} exp(-(2k-1)²π²/(8λ²))` is summed
/// instead. Terms stop once they drop below 1e-16. Clamped to [0, 1].
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let q = if lambda < 1.18 {
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for k in 1..200 {
            let odd = (2 * k - 1) as f64;
            let term = (-odd * odd * c).exp();
            sum += term;
            if term < 1e-16 {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum
    } else {
        let mut sum = 0.0;
        for k in 1..200 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-16 {
                break;
            }
        }
        2.0 * sum
    };
    q.clamp(0.0, 1.0)
}

/// Fraction of all `C(m+n, m)` relabelings of the pooled sample whose D is at
/// least the observed one.
pub fn ks_exact_p(a: &[f64], b: &[f64]) -> Result<f64> {
    check_samples(a, "first KS sample")?;
    check_samples(b, "second KS sample")?;
    let (m, total) = (a.len(), a.len() + b.len());
    if total > EXACT_LIMIT {
        return Err(Error::Config(format!("exact KS limited to {EXACT_LIMIT} pooled samples, got {total}")));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let observed = d_sorted(&sorted(a), &sorted(b));
    let (mut hits, mut count) = (0u64, 0u64);
    let (mut left, mut right) = (Vec::with_capacity(total), Vec::with_capacity(total));
    for mask in 0u32..(1u32 << total) {
        if mask.count_ones() as usize != m {
            continue;
        }
        left.clear();
        right.clear();
        for (i, &v) in pooled.iter().enumerate() {
            if mask >> i & 1 == 1 {
                left.push(v);
            } else {
                right.push(v);
            }
        }
        left.sort_by(f64::total_cmp);
        right.sort_by(f64::total_cmp);
        count += 1;
        if d_sorted(&left, &right) >= observed - 1e-12 {
            hits += 1;
        }
    }
    Ok(hits as f64 / count as f64)
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let d = ks_statistic(a, b)?;
    let (m, n) = (a.len(), b.len());
    let lambda = d * ((m * n) as f64 / (m + n) as f64).sqrt();
    let p_exact = if m + n <= EXACT_LIMIT { Some(ks_exact_p(a, b)?) } else { None };
    Ok(KsResult { d, m, n, p_asymptotic: kolmogorov_q(lambda), p_exact })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

/// Sample standard deviation uses `n - 1` (0 for a single sample); an even
/// count takes the midpoint of the two central values as median.
pub fn summary_stats(samples: &[f64]) -> Result<SummaryStats> {
    check_samples(samples, "summary samples")?;
    let s = sorted(samples);
    let n = s.len();
    let mean = s.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
    let std = if n < 2 {
        0.0
    } else {
        (s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Ok(SummaryStats { n, mean, median, std, min: s[0], max: s[n - 1] })
}

/// An `(x, value)` table written as a two-column CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub x: Vec<f64>,
    pub value: Vec<f64>,
}

impl Curve {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "value"])?;
        for (x, v) in self.x.iter().zip(&self.value) {
            w.write_record([format!("{x:e}"), format!("{v:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    /// `1.06 σ̂ n^(-1/5)`, with σ̂ replaced by `0.01·max(1, |mean|)` when all
    /// samples are equal.
    Silverman,
    Fixed(f64),
}

impl Bandwidth {
    pub fn resolve(self, samples: &[f64]) -> Result<f64> {
        let h = match self {
            Bandwidth::Fixed(h) => h,
            Bandwidth::Silverman => {
                let s = summary_stats(samples)?;
                let spread = if s.std > 0.0 { s.std } else { 0.01 * s.mean.abs().max(1.0) };
                1.06 * spread * (s.n as f64).powf(-0.2)
            }
        };
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Config(format!("bandwidth {h} must be positive")));
        }
        Ok(h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    /// Bin centres and densities; densities times the bin width sum to 1.
    pub histogram: Curve,
    pub bin_width: f64,
    /// ECDF evaluated at every distinct sample value.
    pub ecdf: Curve,
    /// Gaussian KDE on an even grid spanning the samples plus four bandwidths.
    pub kde: Curve,
    pub bandwidth: f64,
}

pub fn export_curves(samples: &[f64], bins: usize, bandwidth: Bandwidth, grid: usize) -> Result<CurveSet> {
    check_samples(samples, "curve samples")?;
    if bins == 0 || grid < 2 {
        return Err(Error::Config("need at least one bin and two grid points".into()));
    }
    let s = sorted(samples);
    let n = s.len() as f64;
    let (mut lo, mut hi) = (s[0], s[s.len() - 1]);
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in &s {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let histogram = Curve {
        x: (0..bins).map(|b| lo + (b as f64 + 0.5) * width).collect(),
        value: counts.iter().map(|&c| c as f64 / (n * width)).collect(),
    };

    let dist = EmpiricalDistribution { sorted: s.clone() };
    let mut xs = s.clone();
    xs.dedup();
    let ecdf = Curve { value: xs.iter().map(|&x| dist.eval(x)).collect(), x: xs };

    let h = bandwidth.resolve(&s)?;
    let (g_lo, g_hi) = (s[0] - 4.0 * h, s[s.len() - 1] + 4.0 * h);
    let step = (g_hi - g_lo) / (grid - 1) as f64;
    let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
    let gx: Vec<f64> = (0..grid).map(|i| g_lo + i as f64 * step).collect();
    let kde = Curve {
        value: gx
            .iter()
            .map(|&x| norm * s.iter().map(|&v| (-0.5 * ((x - v) / h).powi(2)).exp()).sum::<f64>())
            .collect(),
        x: gx,
    };
    Ok(CurveSet { histogram, bin_width: width, ecdf, kde, bandwidth: h })
}

/// `{:.1e}` rendering with values below 1e-9 shown as `<e-9`.
pub fn format_p(p: f64) -> String {
    if p < 1e-9 {
        "<e-9".to_string()
    } else {
        format!("{p:.1e}")
    }
}

pub fn format_d(d: f64) -> String {
    format!("{d:.1e}")
}

/// One row of the KS summary table: a variant comparison under both heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsRow {
    pub label: String,
    pub no_crf: Option<KsResult>,
    pub crf: Option<KsResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsTable {
    pub rows: Vec<KsRow>,
}

impl KsTable {
    pub const HEADER: [&'static str; 5] = ["variant", "no_crf_D", "no_crf_p", "crf_D", "crf_p"];

    /// CSV with formatted D and p cells; a missing model leaves `NA`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::HEADER)?;
        let cells = |r: &Option<KsResult>| match r {
            Some(r) => [format_d(r.d), format_p(r.p_asymptotic)],
            None => ["NA".to_string(), "NA".to_string()],
        };
        for row in &self.rows {
            let [a, b] = cells(&row.no_crf);
            let [c, d] = cells(&row.crf);
            w.write_record([row.label.clone(), a, b, c, d])?;
        }
        w.flush()?;
        Ok(())
    }
}
