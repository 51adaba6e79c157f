//! Nonparametric tests and summaries used to analyse the user studies.
//!
//! Quartiles use linear interpolation between order statistics: the `p` quantile of `n`
//! sorted values sits at position `(n - 1) p`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Alternative hypothesis, stated for `condition_a - condition_b`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    #[default]
    Greater,
    Less,
    TwoSided,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Greater => "greater",
            Side::Less => "less",
            Side::TwoSided => "two_sided",
        })
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "greater" => Ok(Side::Greater),
            "less" => Ok(Side::Less),
            "two_sided" | "two" => Ok(Side::TwoSided),
            other => Err(Error::usage(format!("unknown side {other:?} (greater, less, two_sided)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    pub condition_a: Vec<f64>,
    pub condition_b: Vec<f64>,
}

impl PairedSample {
    pub fn new(condition_a: Vec<f64>, condition_b: Vec<f64>) -> Result<Self> {
        if condition_a.len() != condition_b.len() {
            return Err(Error::usage(format!(
                "paired conditions differ in length ({} vs {})",
                condition_a.len(),
                condition_b.len()
            )));
        }
        if condition_a.iter().chain(&condition_b).any(|v| !v.is_finite()) {
            return Err(Error::data("paired sample contains non-finite values"));
        }
        Ok(Self { condition_a, condition_b })
    }

    pub fn differences(&self) -> Vec<f64> {
        self.condition_a.iter().zip(&self.condition_b).map(|(a, b)| a - b).collect()
    }

    pub fn load_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::data("paired CSV needs two columns"));
            }
            let num = |i: usize| rec[i].trim().parse::<f64>().map_err(|_| Error::data(format!("bad number {:?}", &rec[i])));
            a.push(num(0)?);
            b.push(num(1)?);
        }
        Self::new(a, b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonOptions {
    pub continuity_correction: bool,
    pub tie_correction: bool,
    /// Also compute the exact null distribution p when `n_effective` is at most this.
    pub exact_max_n: usize,
}

impl Default for WilcoxonOptions {
    fn default() -> Self {
        Self { continuity_correction: true, tie_correction: true, exact_max_n: 25 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// `W` (sum of positive ranks) or the success count `k`.
    pub statistic: f64,
    pub z: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
    /// `r = z / sqrt(n_effective)` for rank tests, Cohen's h for binomial tests.
    pub effect: f64,
    pub n_effective: usize,
    pub p_exact: Option<f64>,
    pub proportion: Option<f64>,
}

fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Mid-ranks of `|d|` (1-based), plus the tie group sizes.
pub fn abs_midranks(d: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..d.len()).collect();
    idx.sort_by(|&i, &j| d[i].abs().partial_cmp(&d[j].abs()).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; d.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && d[idx[j + 1]].abs() == d[idx[i]].abs() {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Exact null distribution of `2 W` over all sign assignments of the given ranks.
fn exact_p(ranks: &[f64], w: f64, side: Side) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0f64; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let all = 2f64.powi(ranks.len() as i32);
    let w2 = (2.0 * w).round() as usize;
    let upper: f64 = counts[w2..].iter().sum::<f64>() / all;
    let lower: f64 = counts[..=w2].iter().sum::<f64>() / all;
    match side {
        Side::Greater => upper,
        Side::Less => lower,
        Side::TwoSided => (2.0 * upper.min(lower)).min(1.0),
    }
}

/// Wilcoxon signed-rank test on `condition_a - condition_b`. Zero differences are dropped
/// before ranking; tied magnitudes share mid-ranks.
pub fn wilcoxon_signed_rank(sample: &PairedSample, side: Side, opts: &WilcoxonOptions) -> Result<TestResult> {
    let d: Vec<f64> = sample.differences().into_iter().filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Err(Error::domain("all paired differences are zero; the signed-rank test is undefined"));
    }
    let (ranks, ties) = abs_midranks(&d);
    let w: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0;
    if opts.tie_correction {
        var -= ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    }
    let cc = if opts.continuity_correction { 0.5 } else { 0.0 };
    let diff = w - mean;
    let (z, p) = if var <= 0.0 {
        (0.0, 1.0)
    } else {
        let sd = var.sqrt();
        match side {
            Side::Greater => {
                let z = (diff - cc) / sd;
                (z, normal_sf(z))
            }
            Side::Less => {
                let z = (diff + cc) / sd;
                (z, 1.0 - normal_sf(z))
            }
            Side::TwoSided => {
                let z = diff.signum() * (diff.abs() - cc).max(0.0) / sd;
                (z, (2.0 * normal_sf(z.abs())).min(1.0))
            }
        }
    };
    let p_exact = (n <= opts.exact_max_n).then(|| exact_p(&ranks, w, side));
    Ok(TestResult {
        statistic: w,
        z,
        p_raw: p,
        p_adjusted: p,
        effect: z / nf.sqrt(),
        n_effective: n,
        p_exact,
        proportion: None,
    })
}

/// Holm step-down adjustment, returned in input order.
pub fn holm_correct(p_values: &[f64]) -> Result<Vec<f64>> {
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::domain(format!("p-value {p} outside [0, 1]")));
    }
    let m = p_values.len();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&i, &j| p_values[i].partial_cmp(&p_values[j]).unwrap());
    let mut out = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &i) in idx.iter().enumerate() {
        let adj = ((m - rank) as f64 * p_values[i]).min(1.0);
        running = running.max(adj);
        out[i] = running;
    }
    Ok(out)
}

/// Applies Holm adjustment across a family of results in place.
pub fn holm_adjust_results(results: &mut [TestResult]) -> Result<()> {
    let raw: Vec<f64> = results.iter().map(|r| r.p_raw).collect();
    for (r, p) in results.iter_mut().zip(holm_correct(&raw)?) {
        r.p_adjusted = p;
    }
    Ok(())
}

pub fn cohens_h(p1: f64, p2: f64) -> f64 {
    2.0 * p1.sqrt().asin() - 2.0 * p2.sqrt().asin()
}

/// Exact upper-tail binomial test of `k` successes in `n` trials against `p0`.
pub fn binomial_one_sided(k: u64, n: u64, p0: f64) -> Result<TestResult> {
    if k > n || n == 0 {
        return Err(Error::domain(format!("need 0 <= k <= n and n > 0 (k {k}, n {n})")));
    }
    if !(0.0..=1.0).contains(&p0) {
        return Err(Error::domain(format!("null proportion {p0} outside [0, 1]")));
    }
    let dist = Binomial::new(p0, n).map_err(|e| Error::domain(e.to_string()))?;
    let p = if k == 0 { 1.0 } else { dist.sf(k - 1) };
    let prop = k as f64 / n as f64;
    let sd = (n as f64 * p0 * (1.0 - p0)).sqrt();
    let z = if sd > 0.0 { (k as f64 - n as f64 * p0) / sd } else { 0.0 };
    Ok(TestResult {
        statistic: k as f64,
        z,
        p_raw: p,
        p_adjusted: p,
        effect: cohens_h(prop, p0),
        n_effective: n as usize,
        p_exact: Some(p),
        proportion: Some(prop),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStat {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl SummaryStat {
    pub fn iqr(&self) -> [f64; 2] {
        [self.q1, self.q3]
    }
}

/// Quantile of already sorted data by linear interpolation.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median_iqr(values: &[f64]) -> Result<SummaryStat> {
    if values.is_empty() {
        return Err(Error::usage("median of an empty set"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("non-finite value in summary input"));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(SummaryStat { median: quantile_sorted(&v, 0.5), q1: quantile_sorted(&v, 0.25), q3: quantile_sorted(&v, 0.75) })
}

/// Raw (unweighted) NASA-TLX total.
pub fn nasa_tlx_total(subscales: &[f64; 6]) -> Result<f64> {
    if let Some(s) = subscales.iter().find(|s| !(0.0..=100.0).contains(*s)) {
        return Err(Error::domain(format!("subscale score {s} outside [0, 100]")));
    }
    Ok(subscales.iter().sum::<f64>() / 6.0)
}

/// Effective sample size implied by a reported `(z, r)` pair.
pub fn infer_n_effective(z: f64, r: f64) -> Result<usize> {
    if r == 0.0 || !z.is_finite() || !r.is_finite() {
        return Err(Error::domain("cannot infer n from r = 0"));
    }
    Ok(((z / r).powi(2)).round() as usize)
}

pub fn load_p_values<R: std::io::Read>(reader: R) -> Result<Vec<(String, f64)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let (label, raw) = match rec.len() {
            1 => (i.to_string(), &rec[0]),
            _ => (rec[0].to_string(), &rec[1]),
        };
        let p = raw.trim().parse::<f64>().map_err(|_| Error::data(format!("bad p-value {raw:?}")))?;
        out.push((label, p));
    }
    Ok(out)
}
