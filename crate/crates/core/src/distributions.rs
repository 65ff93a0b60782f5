//! Evaluable distribution models and samplers.
//!
//! Every model lives on a closed domain `[lo, hi]` with `F(lo) = 0` and
//! `F(hi) = 1`; evaluation clamps outside the domain.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};
use crate::keyfile::read_raw_keys;
use crate::keys::{normalize, SortedKeyArray};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal CDF.
fn phi(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal quantile.
fn phi_inv(p: f64) -> f64 {
    if p <= 0.5 {
        -SQRT_2 * erfc_inv(2.0 * p)
    } else {
        SQRT_2 * erfc_inv(2.0 * (1.0 - p))
    }
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Piecewise-linear interpolation of an empirical CDF.
///
/// Knots are `(lo, 0)`, `(s_i, i / (m + 1))` for the `m` sample keys, and
/// `(hi, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn from_sample(sample: &SortedKeyArray) -> Self {
        let (lo, hi) = sample.domain();
        let m = sample.len();
        let mut xs = Vec::with_capacity(m + 2);
        let mut ys = Vec::with_capacity(m + 2);
        xs.push(lo);
        ys.push(0.0);
        for (i, &k) in sample.keys().iter().enumerate() {
            xs.push(k);
            ys.push((i + 1) as f64 / (m + 1) as f64);
        }
        xs.push(hi);
        ys.push(1.0);
        EmpiricalCdf { xs, ys }
    }

    fn cdf(&self, x: f64) -> f64 {
        let idx = self.xs.partition_point(|&v| v <= x);
        if idx == 0 {
            return 0.0;
        }
        if idx == self.xs.len() {
            return 1.0;
        }
        let (x0, x1) = (self.xs[idx - 1], self.xs[idx]);
        let (y0, y1) = (self.ys[idx - 1], self.ys[idx]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    fn inverse(&self, u: f64) -> f64 {
        let idx = self.ys.partition_point(|&v| v <= u).clamp(1, self.ys.len() - 1);
        let (x0, x1) = (self.xs[idx - 1], self.xs[idx]);
        let (y0, y1) = (self.ys[idx - 1], self.ys[idx]);
        x0 + (u - y0) / (y1 - y0) * (x1 - x0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CdfKind {
    Uniform,
    Power { t: f64 },
    TruncGaussian { mu: f64, sigma: f64 },
    Empirical(EmpiricalCdf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfModel {
    kind: CdfKind,
    lo: f64,
    hi: f64,
    // Truncated Gaussian: Phi at the lower bound and the mass inside [lo, hi].
    gauss_base: f64,
    gauss_mass: f64,
}

impl CdfModel {
    fn with_kind(kind: CdfKind, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidDomain { lo, hi });
        }
        let (gauss_base, gauss_mass) = match kind {
            CdfKind::TruncGaussian { mu, sigma } => {
                let a = phi((lo - mu) / sigma);
                let b = phi((hi - mu) / sigma);
                (a, b - a)
            }
            _ => (0.0, 1.0),
        };
        if !(gauss_mass > 0.0) {
            return Err(Error::InvalidDomain { lo, hi });
        }
        Ok(CdfModel {
            kind,
            lo,
            hi,
            gauss_base,
            gauss_mass,
        })
    }

    pub fn uniform() -> Self {
        Self::with_kind(CdfKind::Uniform, 0.0, 1.0).unwrap()
    }

    /// `F(x) = x^t` on `[0, 1]`.
    pub fn power(t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidConfig(format!("power exponent must be positive, got {t}")));
        }
        Self::with_kind(CdfKind::Power { t }, 0.0, 1.0)
    }

    /// Gaussian truncated to `[0, 1]`.
    pub fn trunc_gaussian(mu: f64, sigma: f64) -> Result<Self> {
        Self::trunc_gaussian_on(mu, sigma, 0.0, 1.0)
    }

    pub fn trunc_gaussian_on(mu: f64, sigma: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "gaussian needs finite mu and positive sigma, got mu={mu} sigma={sigma}"
            )));
        }
        Self::with_kind(CdfKind::TruncGaussian { mu, sigma }, lo, hi)
    }

    /// Interpolated empirical CDF of a sample, on the sample's domain.
    pub fn empirical(sample: &SortedKeyArray) -> Self {
        let (lo, hi) = sample.domain();
        Self::with_kind(CdfKind::Empirical(EmpiricalCdf::from_sample(sample)), lo, hi).unwrap()
    }

    pub fn kind(&self) -> &CdfKind {
        &self.kind
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Exact CDF value, clamped to 0 below and 1 above the domain.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return 1.0;
        }
        let v = match &self.kind {
            CdfKind::Uniform => (x - self.lo) / (self.hi - self.lo),
            CdfKind::Power { t } => ((x - self.lo) / (self.hi - self.lo)).powf(*t),
            CdfKind::TruncGaussian { mu, sigma } => {
                (phi((x - mu) / sigma) - self.gauss_base) / self.gauss_mass
            }
            CdfKind::Empirical(e) => e.cdf(x),
        };
        v.clamp(0.0, 1.0)
    }

    /// Density at `x` (zero outside the domain). Empirical models have none.
    pub fn pdf(&self, x: f64) -> Option<f64> {
        if x < self.lo || x > self.hi {
            return Some(0.0);
        }
        let w = self.hi - self.lo;
        match &self.kind {
            CdfKind::Uniform => Some(1.0 / w),
            CdfKind::Power { t } => {
                let u = (x - self.lo) / w;
                Some(t * u.powf(t - 1.0) / w)
            }
            CdfKind::TruncGaussian { mu, sigma } => {
                Some(std_normal_pdf((x - mu) / sigma) / (sigma * self.gauss_mass))
            }
            CdfKind::Empirical(_) => None,
        }
    }

    /// Lower and upper density bounds `(rho_1, rho)` over the domain.
    pub fn pdf_bound(&self) -> Result<(f64, f64)> {
        let w = self.hi - self.lo;
        match &self.kind {
            CdfKind::Uniform => Ok((1.0 / w, 1.0 / w)),
            CdfKind::Power { t } if *t == 1.0 => Ok((1.0 / w, 1.0 / w)),
            CdfKind::Power { t } if *t > 1.0 => Ok((0.0, t / w)),
            CdfKind::Power { .. } => Err(Error::UnboundedPdf),
            CdfKind::TruncGaussian { mu, .. } => {
                let at_lo = self.pdf(self.lo).unwrap();
                let at_hi = self.pdf(self.hi).unwrap();
                let peak = self.pdf(mu.clamp(self.lo, self.hi)).unwrap();
                Ok((at_lo.min(at_hi), peak))
            }
            CdfKind::Empirical(_) => Err(Error::UnboundedPdf),
        }
    }

    /// `rho / rho_1`, for constructions that need a positive lower bound.
    pub fn pdf_ratio(&self) -> Result<f64> {
        let (lower, upper) = self.pdf_bound()?;
        if lower > 0.0 {
            Ok(upper / lower)
        } else {
            Err(Error::UnboundedPdf)
        }
    }

    /// Quantile function for `u` in `[0, 1]`.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let w = self.hi - self.lo;
        let x = match &self.kind {
            CdfKind::Uniform => self.lo + u * w,
            CdfKind::Power { t } => self.lo + w * u.powf(1.0 / t),
            CdfKind::TruncGaussian { mu, sigma } => {
                let p = self.gauss_base + u * self.gauss_mass;
                mu + sigma * phi_inv(p)
            }
            CdfKind::Empirical(e) => e.inverse(u),
        };
        x.clamp(self.lo, self.hi)
    }
}

/// Quantile by bisection on the CDF, to absolute tolerance `tol` in `x`.
pub fn bisect_inverse(m: &CdfModel, u: f64, tol: f64) -> f64 {
    let (mut lo, mut hi) = m.domain();
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if m.cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Draws `n` i.i.d. keys by inverse-CDF sampling and sorts them.
///
/// Deterministic for a given seed.
pub fn sample_sorted(m: &CdfModel, n: usize, seed: u64) -> SortedKeyArray {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keys: Vec<f64> = (0..n).map(|_| m.inverse_cdf(rng.random::<f64>())).collect();
    keys.sort_unstable_by(f64::total_cmp);
    SortedKeyArray::from_sorted_unchecked(keys, m.lo, m.hi)
}

/// A distribution named on the command line or in a config file.
///
/// Grammar: `uniform` | `power:t=<t>` | `gauss:mu=<mu>,sigma=<sigma>` |
/// `empirical:<path>`. The empirical form names a raw key file; it selects
/// the real-data protocol in the bench harness.
#[derive(Debug, Clone, PartialEq)]
pub enum DistSpec {
    Uniform,
    Power { t: f64 },
    Gauss { mu: f64, sigma: f64 },
    Empirical(PathBuf),
}

impl DistSpec {
    /// Builds the model. Empirical specs read and normalize the key file.
    pub fn model(&self) -> Result<CdfModel> {
        match self {
            DistSpec::Uniform => Ok(CdfModel::uniform()),
            DistSpec::Power { t } => CdfModel::power(*t),
            DistSpec::Gauss { mu, sigma } => CdfModel::trunc_gaussian(*mu, *sigma),
            DistSpec::Empirical(path) => empirical_model(path),
        }
    }

    pub fn is_empirical(&self) -> bool {
        matches!(self, DistSpec::Empirical(_))
    }
}

fn empirical_model(path: &Path) -> Result<CdfModel> {
    let raw = read_raw_keys(path)?;
    Ok(CdfModel::empirical(&normalize(&raw)?))
}

fn parse_params(spec: &str, body: &str, allowed: &[&str]) -> Result<Vec<(String, f64)>> {
    let err = |reason: String| Error::SpecParse {
        spec: spec.to_string(),
        reason,
    };
    let mut out = Vec::new();
    for part in body.split(',').filter(|p| !p.trim().is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| err(format!("expected key=value, got `{part}`")))?;
        let key = key.trim();
        if !allowed.contains(&key) {
            return Err(err(format!("unknown parameter `{key}`")));
        }
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| err(format!("`{value}` is not a number")))?;
        out.push((key.to_string(), value));
    }
    Ok(out)
}

impl FromStr for DistSpec {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let s = spec.trim();
        let (name, body) = s.split_once(':').unwrap_or((s, ""));
        let bad = |reason: &str| Error::SpecParse {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        match name {
            "uniform" if body.is_empty() => Ok(DistSpec::Uniform),
            "power" => {
                let mut t = None;
                for (_, v) in parse_params(spec, body, &["t"])? {
                    t = Some(v);
                }
                let t = t.ok_or_else(|| bad("power needs t=<exponent>"))?;
                if !(t > 0.0 && t.is_finite()) {
                    return Err(bad("t must be positive"));
                }
                Ok(DistSpec::Power { t })
            }
            "gauss" => {
                let (mut mu, mut sigma) = (0.5, 0.1);
                for (k, v) in parse_params(spec, body, &["mu", "sigma"])? {
                    match k.as_str() {
                        "mu" => mu = v,
                        _ => sigma = v,
                    }
                }
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(bad("sigma must be positive"));
                }
                if !mu.is_finite() {
                    return Err(bad("mu must be finite"));
                }
                Ok(DistSpec::Gauss { mu, sigma })
            }
            "empirical" if !body.is_empty() => Ok(DistSpec::Empirical(PathBuf::from(body))),
            "empirical" => Err(bad("empirical needs a file path")),
            _ => Err(bad("expected uniform, power:t=.., gauss:mu=..,sigma=.. or empirical:<path>")),
        }
    }
}

impl fmt::Display for DistSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistSpec::Uniform => write!(f, "uniform"),
            DistSpec::Power { t } => write!(f, "power:t={t}"),
            DistSpec::Gauss { mu, sigma } => write!(f, "gauss:mu={mu},sigma={sigma}"),
            DistSpec::Empirical(p) => write!(f, "empirical:{}", p.display()),
        }
    }
}
