//! Emission and scenario distributions.
//!
//! Gamma distributions are parameterized by mean and shape (rate =
//! shape / mean). Von Mises angles live on (−π, π]. All constructors
//! validate their parameters; the evaluation methods never fail.

mod spline;

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::DistError;
use crate::math::{self, exp, ln, ln_gamma, LN_2PI};
use crate::rng::{open01, standard_normal};

pub use spline::SplineDensity;

fn check_positive(name: &'static str, value: f64) -> Result<(), DistError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(DistError::InvalidParameter { name, value })
    }
}

fn check_probability(p: f64) -> Result<(), DistError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(DistError::ProbabilityOutOfRange(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gamma {
    mean: f64,
    shape: f64,
}

impl Gamma {
    pub fn new(mean: f64, shape: f64) -> Result<Self, DistError> {
        check_positive("mean", mean)?;
        check_positive("shape", shape)?;
        Ok(Gamma { mean, shape })
    }

    pub fn from_shape_rate(shape: f64, rate: f64) -> Result<Self, DistError> {
        check_positive("rate", rate)?;
        Gamma::new(shape / rate, shape)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn rate(&self) -> f64 {
        self.shape / self.mean
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        let k = self.shape;
        let rate = self.rate();
        if x < 0.0 || x.is_nan() {
            return f64::NEG_INFINITY;
        }
        if x == 0.0 {
            return match k.partial_cmp(&1.0) {
                Some(core::cmp::Ordering::Less) => f64::INFINITY,
                Some(core::cmp::Ordering::Equal) => ln(rate),
                _ => f64::NEG_INFINITY,
            };
        }
        if x.is_infinite() {
            return f64::NEG_INFINITY;
        }
        k * ln(rate) - ln_gamma(k) + (k - 1.0) * ln(x) - rate * x
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            math::gamma_p(self.shape, self.rate() * x)
        }
    }

    pub fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            1.0
        } else {
            math::gamma_q(self.shape, self.rate() * x)
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64, DistError> {
        check_probability(p)?;
        // Wilson–Hilferty starting point on the standard (rate 1) scale
        let k = self.shape;
        let z = math::normal_quantile(p);
        let c = 1.0 / (9.0 * k);
        let wh = k * libm::pow(1.0 - c + z * math::sqrt(c), 3.0);
        let x0 = if wh > 0.0 { wh } else { libm::pow(p * libm::tgamma(k + 1.0), 1.0 / k) };
        let standard = Gamma { mean: k, shape: k };
        let x = invert_on_half_line(
            |x| standard.cdf(x),
            |x| exp(standard.log_pdf(x)),
            p,
            x0.max(1e-300),
        );
        Ok(x / self.rate())
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_standard_gamma(self.shape, rng) / self.rate()
    }
}

/// Marsaglia–Tsang; shapes below one use the `U^(1/k)` boost.
fn sample_standard_gamma<R: RngCore + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        let g = sample_standard_gamma(shape + 1.0, rng);
        return g * libm::pow(open01(rng), 1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / math::sqrt(9.0 * d);
    loop {
        let x = standard_normal(rng);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = open01(rng);
        if u < 1.0 - 0.0331 * x * x * x * x || ln(u) < 0.5 * x * x + d * (1.0 - v + ln(v)) {
            return d * v;
        }
    }
}

/// Safeguarded Newton for cdf(x) = p on (0, ∞).
fn invert_on_half_line<C: Fn(f64) -> f64, D: Fn(f64) -> f64>(cdf: C, pdf: D, p: f64, x0: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = x0.max(1e-12);
    while cdf(hi) < p {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return hi;
        }
    }
    let mut x = x0.clamp(lo, hi);
    for _ in 0..300 {
        let f = cdf(x) - p;
        if f == 0.0 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = pdf(x);
        let mut next = if d > 0.0 && d.is_finite() { x - f / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs() || hi - lo <= 1e-15 * hi {
            return next;
        }
        x = next;
    }
    x
}

/// Bisection for cdf(x) = p on a bracket.
fn bisect<C: Fn(f64) -> f64>(cdf: C, p: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * (1.0 + hi.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VonMises {
    location: f64,
    concentration: f64,
}

impl VonMises {
    pub fn new(location: f64, concentration: f64) -> Result<Self, DistError> {
        if !location.is_finite() {
            return Err(DistError::InvalidParameter { name: "location", value: location });
        }
        if !(concentration.is_finite() && concentration >= 0.0) {
            return Err(DistError::InvalidParameter { name: "concentration", value: concentration });
        }
        Ok(VonMises { location: math::wrap_angle(location), concentration })
    }

    pub fn location(&self) -> f64 {
        self.location
    }

    pub fn concentration(&self) -> f64 {
        self.concentration
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if !(-PI..=PI).contains(&x) {
            return f64::NEG_INFINITY;
        }
        self.concentration * libm::cos(x - self.location)
            - LN_2PI
            - math::ln_bessel_i0(self.concentration)
    }

    /// Pr(X ≤ x) for X on (−π, π], by quadrature.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= -PI {
            return 0.0;
        }
        if x >= PI {
            return 1.0;
        }
        let norm = math::ln_bessel_i0(self.concentration);
        let k = self.concentration;
        let mu = self.location;
        // integrate the density kept relative to its peak for numerical range
        let f = move |t: f64| exp(k * (libm::cos(t - mu) - 1.0));
        let scale = exp(k - norm - LN_2PI);
        (math::integrate(&f, -PI, x, 1e-14) * scale).clamp(0.0, 1.0)
    }

    pub fn quantile(&self, p: f64) -> Result<f64, DistError> {
        check_probability(p)?;
        Ok(bisect(|x| self.cdf(x), p, -PI, PI))
    }

    /// Best–Fisher rejection sampler.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let k = self.concentration;
        if k == 0.0 {
            let u: f64 = open01(rng);
            return math::wrap_angle(-PI + 2.0 * PI * u);
        }
        let s = math::sqrt(1.0 + 4.0 * k * k);
        let tau = 1.0 + s;
        // rho = (tau - sqrt(2 tau)) / (2k), rearranged to avoid cancellation for small k
        let rho = 2.0 * k * tau / ((s + 1.0) * (tau + math::sqrt(2.0 * tau)));
        let r = (1.0 + rho * rho) / (2.0 * rho);
        loop {
            let u1: f64 = open01(rng);
            let u2: f64 = open01(rng);
            let u3: f64 = open01(rng);
            let z = libm::cos(PI * u1);
            let f = (1.0 + r * z) / (r + z);
            let c = k * (r - f);
            if c * (2.0 - c) - u2 > 0.0 || ln(c / u2) + 1.0 - c >= 0.0 {
                let theta = libm::acos(f.clamp(-1.0, 1.0));
                let theta = if u3 > 0.5 { theta } else { -theta };
                return math::wrap_angle(self.location + theta);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroInflatedGamma {
    zero_mass: f64,
    gamma: Gamma,
}

impl ZeroInflatedGamma {
    pub fn new(zero_mass: f64, mean: f64, shape: f64) -> Result<Self, DistError> {
        if !(zero_mass.is_finite() && (0.0..1.0).contains(&zero_mass)) {
            return Err(DistError::InvalidParameter { name: "zero_mass", value: zero_mass });
        }
        Ok(ZeroInflatedGamma { zero_mass, gamma: Gamma::new(mean, shape)? })
    }

    pub fn zero_mass(&self) -> f64 {
        self.zero_mass
    }

    pub fn gamma(&self) -> &Gamma {
        &self.gamma
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if x == 0.0 {
            ln(self.zero_mass)
        } else if x > 0.0 {
            libm::log1p(-self.zero_mass) + self.gamma.log_pdf(x)
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else {
            self.zero_mass + (1.0 - self.zero_mass) * self.gamma.cdf(x)
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64, DistError> {
        check_probability(p)?;
        if p <= self.zero_mass {
            return Ok(0.0);
        }
        let q = (p - self.zero_mass) / (1.0 - self.zero_mass);
        if q >= 1.0 {
            return Ok(f64::INFINITY);
        }
        self.gamma.quantile(q)
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = open01(rng);
        if u < self.zero_mass {
            0.0
        } else {
            self.gamma.sample(rng)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaMixture {
    weights: Vec<f64>,
    components: Vec<Gamma>,
}

impl GammaMixture {
    pub fn new(weights: Vec<f64>, components: Vec<Gamma>) -> Result<Self, DistError> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(DistError::InvalidParameter {
                name: "weights.len",
                value: weights.len() as f64,
            });
        }
        if let Some(&w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(DistError::InvalidParameter { name: "weight", value: w });
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(DistError::InvalidParameter { name: "weights.sum", value: total });
        }
        Ok(GammaMixture { weights, components })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Gamma] {
        &self.components
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| ln(*w) + c.log_pdf(x))
            .collect();
        math::log_sum_exp(&terms)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.weights.iter().zip(&self.components).map(|(w, c)| w * c.cdf(x)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.components).map(|(w, c)| w * c.mean()).sum()
    }

    pub fn quantile(&self, p: f64) -> Result<f64, DistError> {
        check_probability(p)?;
        let x0 = self.mean();
        Ok(invert_on_half_line(|x| self.cdf(x), |x| exp(self.log_pdf(x)), p, x0))
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let i = crate::rng::categorical(rng, &self.weights);
        self.components[i].sample(rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormal {
    log_mean: f64,
    log_sd: f64,
}

impl LogNormal {
    pub fn new(log_mean: f64, log_sd: f64) -> Result<Self, DistError> {
        if !log_mean.is_finite() {
            return Err(DistError::InvalidParameter { name: "log_mean", value: log_mean });
        }
        check_positive("log_sd", log_sd)?;
        Ok(LogNormal { log_mean, log_sd })
    }

    pub fn log_mean(&self) -> f64 {
        self.log_mean
    }

    pub fn log_sd(&self) -> f64 {
        self.log_sd
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 || !x.is_finite() {
            return f64::NEG_INFINITY;
        }
        let z = (ln(x) - self.log_mean) / self.log_sd;
        -0.5 * z * z - ln(x) - ln(self.log_sd) - 0.5 * LN_2PI
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            math::normal_cdf((ln(x) - self.log_mean) / self.log_sd)
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64, DistError> {
        check_probability(p)?;
        Ok(exp(self.log_mean + self.log_sd * math::normal_quantile(p)))
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        exp(self.log_mean + self.log_sd * standard_normal(rng))
    }
}

/// How a Poisson law is moved onto the dwell-time support {1, 2, ...}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DwellLaw {
    /// 1 + Poisson(mean − 1).
    Shifted,
    /// Poisson(λ) conditioned on ≥ 1, with λ chosen so the mean matches.
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonDwell {
    mean: f64,
    law: DwellLaw,
    rate: f64,
}

impl PoissonDwell {
    pub fn new(mean: f64, law: DwellLaw) -> Result<Self, DistError> {
        if !(mean.is_finite() && mean > 1.0 && mean <= 500.0) {
            return Err(DistError::InvalidParameter { name: "dwell mean", value: mean });
        }
        let rate = match law {
            DwellLaw::Shifted => mean - 1.0,
            DwellLaw::Truncated => {
                // solve λ / (1 − e^{−λ}) = mean
                let mut lam = mean;
                for _ in 0..100 {
                    let e = exp(-lam);
                    let g = lam / (1.0 - e) - mean;
                    let dg = (1.0 - e - lam * e) / ((1.0 - e) * (1.0 - e));
                    let next = lam - g / dg;
                    if (next - lam).abs() < 1e-15 * lam {
                        lam = next;
                        break;
                    }
                    lam = next.max(1e-12);
                }
                lam
            }
        };
        Ok(PoissonDwell { mean, law, rate })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn law(&self) -> DwellLaw {
        self.law
    }

    fn poisson_log_pmf(&self, k: f64) -> f64 {
        k * ln(self.rate) - self.rate - ln_gamma(k + 1.0)
    }

    pub fn log_pmf(&self, x: f64) -> f64 {
        if x < 1.0 || x != libm::floor(x) || !x.is_finite() {
            return f64::NEG_INFINITY;
        }
        match self.law {
            DwellLaw::Shifted => {
                if self.rate == 0.0 {
                    return if x == 1.0 { 0.0 } else { f64::NEG_INFINITY };
                }
                self.poisson_log_pmf(x - 1.0)
            }
            DwellLaw::Truncated => self.poisson_log_pmf(x) - libm::log1p(-exp(-self.rate)),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x < 1.0 {
            return 0.0;
        }
        let top = libm::floor(x.min(1e6));
        let mut s = 0.0;
        let mut k = 1.0;
        while k <= top {
            s += exp(self.log_pmf(k));
            if s >= 1.0 {
                break;
            }
            k += 1.0;
        }
        s.min(1.0)
    }

    pub fn quantile(&self, p: f64) -> Result<f64, DistError> {
        check_probability(p)?;
        let mut s = 0.0;
        let mut k = 1.0;
        loop {
            s += exp(self.log_pmf(k));
            if s >= p || k > 1e6 {
                return Ok(k);
            }
            k += 1.0;
        }
    }

    fn sample_poisson<R: RngCore + ?Sized>(&self, rng: &mut R) -> u64 {
        // inversion by sequential search
        let u = open01(rng);
        let mut k = 0u64;
        let mut p = exp(-self.rate);
        let mut s = p;
        while u > s {
            k += 1;
            p *= self.rate / k as f64;
            s += p;
            if p == 0.0 && s < u {
                break;
            }
        }
        k
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.law {
            DwellLaw::Shifted => 1.0 + self.sample_poisson(rng) as f64,
            DwellLaw::Truncated => loop {
                let k = self.sample_poisson(rng);
                if k >= 1 {
                    return k as f64;
                }
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uniform {
    lo: f64,
    hi: f64,
}

impl Uniform {
    pub fn new(lo: f64, hi: f64) -> Result<Self, DistError> {
        if !lo.is_finite() {
            return Err(DistError::InvalidParameter { name: "lo", value: lo });
        }
        if !(hi.is_finite() && hi > lo) {
            return Err(DistError::InvalidParameter { name: "hi", value: hi });
        }
        Ok(Uniform { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rand::Rng::random(rng);
        (self.lo + (self.hi - self.lo) * u).clamp(self.lo, self.hi)
    }
}

/// Per-state observation law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Distribution {
    Gamma(Gamma),
    VonMises(VonMises),
    ZeroInflatedGamma(ZeroInflatedGamma),
    GammaMixture(GammaMixture),
    SplineDensity(SplineDensity),
    LogNormal(LogNormal),
    PoissonDwell(PoissonDwell),
    Uniform(Uniform),
}

impl Distribution {
    pub fn gamma(mean: f64, shape: f64) -> Result<Self, DistError> {
        Gamma::new(mean, shape).map(Distribution::Gamma)
    }

    pub fn von_mises(location: f64, concentration: f64) -> Result<Self, DistError> {
        VonMises::new(location, concentration).map(Distribution::VonMises)
    }

    pub fn zero_inflated_gamma(zero_mass: f64, mean: f64, shape: f64) -> Result<Self, DistError> {
        ZeroInflatedGamma::new(zero_mass, mean, shape).map(Distribution::ZeroInflatedGamma)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self, DistError> {
        Uniform::new(lo, hi).map(Distribution::Uniform)
    }

    pub fn log_normal(log_mean: f64, log_sd: f64) -> Result<Self, DistError> {
        LogNormal::new(log_mean, log_sd).map(Distribution::LogNormal)
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Distribution::Gamma(_) => "gamma",
            Distribution::VonMises(_) => "von_mises",
            Distribution::ZeroInflatedGamma(_) => "zero_inflated_gamma",
            Distribution::GammaMixture(_) => "gamma_mixture",
            Distribution::SplineDensity(_) => "spline_density",
            Distribution::LogNormal(_) => "log_normal",
            Distribution::PoissonDwell(_) => "poisson_dwell",
            Distribution::Uniform(_) => "uniform",
        }
    }

    /// Re-checks the invariants of a value that bypassed the constructors
    /// (for instance one read back from disk).
    pub fn validate(&self) -> Result<(), DistError> {
        match self {
            Distribution::Gamma(g) => Gamma::new(g.mean, g.shape).map(drop),
            Distribution::VonMises(v) => {
                VonMises::new(v.location, v.concentration).map(drop)?;
                if v.location <= -PI || v.location > PI {
                    return Err(DistError::InvalidParameter { name: "location", value: v.location });
                }
                Ok(())
            }
            Distribution::ZeroInflatedGamma(z) => {
                ZeroInflatedGamma::new(z.zero_mass, z.gamma.mean, z.gamma.shape).map(drop)
            }
            Distribution::GammaMixture(m) => {
                for c in &m.components {
                    Gamma::new(c.mean, c.shape)?;
                }
                GammaMixture::new(m.weights.clone(), m.components.clone()).map(drop)
            }
            Distribution::SplineDensity(_) => Ok(()),
            Distribution::LogNormal(l) => LogNormal::new(l.log_mean, l.log_sd).map(drop),
            Distribution::PoissonDwell(p) => PoissonDwell::new(p.mean, p.law).map(drop),
            Distribution::Uniform(u) => Uniform::new(u.lo, u.hi).map(drop),
        }
    }

    /// Log density (log mass at atoms and for the dwell law); −∞ off support.
    pub fn log_pdf(&self, x: f64) -> f64 {
        match self {
            Distribution::Gamma(g) => g.log_pdf(x),
            Distribution::VonMises(v) => v.log_pdf(x),
            Distribution::ZeroInflatedGamma(z) => z.log_pdf(x),
            Distribution::GammaMixture(m) => m.log_pdf(x),
            Distribution::SplineDensity(s) => s.log_pdf(x),
            Distribution::LogNormal(l) => l.log_pdf(x),
            Distribution::PoissonDwell(p) => p.log_pmf(x),
            Distribution::Uniform(u) => {
                if x >= u.lo && x <= u.hi {
                    -ln(u.hi - u.lo)
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// Pr(X ≤ x).
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Distribution::Gamma(g) => g.cdf(x),
            Distribution::VonMises(v) => v.cdf(x),
            Distribution::ZeroInflatedGamma(z) => z.cdf(x),
            Distribution::GammaMixture(m) => m.cdf(x),
            Distribution::SplineDensity(s) => s.cdf(x),
            Distribution::LogNormal(l) => l.cdf(x),
            Distribution::PoissonDwell(p) => p.cdf(x),
            Distribution::Uniform(u) => ((x - u.lo) / (u.hi - u.lo)).clamp(0.0, 1.0),
        }
    }

    /// Pr(X < x); differs from [`Distribution::cdf`] only at atoms.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match self {
            Distribution::ZeroInflatedGamma(_) if x == 0.0 => 0.0,
            Distribution::PoissonDwell(p) if x == libm::floor(x) => p.cdf(x - 1.0),
            _ => self.cdf(x),
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64, DistError> {
        match self {
            Distribution::Gamma(g) => g.quantile(p),
            Distribution::VonMises(v) => v.quantile(p),
            Distribution::ZeroInflatedGamma(z) => z.quantile(p),
            Distribution::GammaMixture(m) => m.quantile(p),
            Distribution::SplineDensity(s) => s.quantile(p),
            Distribution::LogNormal(l) => l.quantile(p),
            Distribution::PoissonDwell(d) => d.quantile(p),
            Distribution::Uniform(u) => {
                check_probability(p)?;
                Ok(u.lo + p * (u.hi - u.lo))
            }
        }
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Distribution::Gamma(g) => g.sample(rng),
            Distribution::VonMises(v) => v.sample(rng),
            Distribution::ZeroInflatedGamma(z) => z.sample(rng),
            Distribution::GammaMixture(m) => m.sample(rng),
            Distribution::SplineDensity(s) => s.sample(rng),
            Distribution::LogNormal(l) => l.sample(rng),
            Distribution::PoissonDwell(p) => p.sample(rng),
            Distribution::Uniform(u) => u.sample(rng),
        }
    }

    /// Expected value; the circular mean direction for von Mises.
    pub fn mean(&self) -> f64 {
        match self {
            Distribution::Gamma(g) => g.mean(),
            Distribution::VonMises(v) => v.location(),
            Distribution::ZeroInflatedGamma(z) => (1.0 - z.zero_mass) * z.gamma.mean(),
            Distribution::GammaMixture(m) => m.mean(),
            Distribution::SplineDensity(s) => s.mean(),
            Distribution::LogNormal(l) => exp(l.log_mean + 0.5 * l.log_sd * l.log_sd),
            Distribution::PoissonDwell(p) => p.mean(),
            Distribution::Uniform(u) => 0.5 * (u.lo + u.hi),
        }
    }

    /// Number of free parameters of this family.
    pub fn n_free_params(&self) -> usize {
        match self {
            Distribution::Gamma(_) => 2,
            Distribution::VonMises(_) => 2,
            Distribution::ZeroInflatedGamma(_) => 3,
            Distribution::GammaMixture(m) => 3 * m.weights.len() - 1,
            Distribution::SplineDensity(s) => s.coefficients().len().saturating_sub(1),
            Distribution::LogNormal(_) => 2,
            Distribution::PoissonDwell(_) => 1,
            Distribution::Uniform(_) => 2,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Distribution::PoissonDwell(_))
    }

    /// Named natural-scale parameters, in a fixed order per family.
    pub fn parameters(&self) -> Vec<(&'static str, f64)> {
        match self {
            Distribution::Gamma(g) => alloc::vec![("mean", g.mean), ("shape", g.shape)],
            Distribution::VonMises(v) => {
                alloc::vec![("location", v.location), ("concentration", v.concentration)]
            }
            Distribution::ZeroInflatedGamma(z) => alloc::vec![
                ("zero_mass", z.zero_mass),
                ("mean", z.gamma.mean),
                ("shape", z.gamma.shape)
            ],
            Distribution::LogNormal(l) => alloc::vec![("log_mean", l.log_mean), ("log_sd", l.log_sd)],
            Distribution::PoissonDwell(p) => alloc::vec![("mean", p.mean)],
            Distribution::Uniform(u) => alloc::vec![("lo", u.lo), ("hi", u.hi)],
            Distribution::GammaMixture(m) => {
                let mut out = Vec::new();
                for (w, c) in m.weights.iter().zip(&m.components) {
                    out.push(("weight", *w));
                    out.push(("mean", c.mean));
                    out.push(("shape", c.shape));
                }
                out
            }
            Distribution::SplineDensity(_) => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use alloc::vec;
    use alloc::vec::Vec;

    fn all_distributions() -> Vec<Distribution> {
        vec![
            Distribution::gamma(0.5, 0.7).unwrap(),
            Distribution::gamma(4.0, 2.5).unwrap(),
            Distribution::von_mises(0.4, 2.0).unwrap(),
            Distribution::von_mises(PI, 0.3).unwrap(),
            Distribution::zero_inflated_gamma(0.2, 1.0, 1.5).unwrap(),
            Distribution::GammaMixture(
                GammaMixture::new(
                    vec![0.3, 0.7],
                    vec![Gamma::new(1.0, 2.0).unwrap(), Gamma::new(6.0, 4.0).unwrap()],
                )
                .unwrap(),
            ),
            Distribution::SplineDensity(SplineDensity::scenario2()),
            Distribution::log_normal(4f64.ln(), 0.15).unwrap(),
            Distribution::PoissonDwell(PoissonDwell::new(3.0, DwellLaw::Shifted).unwrap()),
            Distribution::PoissonDwell(PoissonDwell::new(3.0, DwellLaw::Truncated).unwrap()),
            Distribution::uniform(10.0, 20.0).unwrap(),
        ]
    }

    #[test]
    fn exponential_special_case() {
        let d = Distribution::gamma(1.0, 1.0).unwrap();
        assert!((d.log_pdf(1.0) + 1.0).abs() < 1e-15);
        assert!((d.cdf(core::f64::consts::LN_2) - 0.5).abs() < 1e-15);
        assert!((d.quantile(0.5).unwrap() - core::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn uniform_circle_density() {
        let d = Distribution::von_mises(0.0, 0.0).unwrap();
        assert!((d.log_pdf(1.3) + LN_2PI).abs() < 1e-15);
    }

    #[test]
    fn baseline_state_one_density_is_decreasing() {
        let d = Distribution::gamma(0.5, 0.7).unwrap();
        let mut prev = f64::INFINITY;
        let mut x = 0.01;
        while x <= 5.0 {
            let v = d.log_pdf(x);
            assert!(v < prev);
            prev = v;
            x += 0.01;
        }
    }

    #[test]
    fn zero_inflation_point_mass() {
        let d = Distribution::zero_inflated_gamma(0.2, 1.0, 1.0).unwrap();
        assert!((d.cdf(0.0) - 0.2).abs() < 1e-15);
        assert_eq!(d.cdf_left(0.0), 0.0);
        assert!((d.log_pdf(0.0) - 0.2f64.ln()).abs() < 1e-15);
        assert_eq!(d.quantile(0.1).unwrap(), 0.0);
    }

    #[test]
    fn gamma_cdf_agrees_with_monte_carlo() {
        let g = Gamma::new(4.0, 2.5).unwrap();
        let mut rng = stream(11);
        let n = 1_000_000;
        let below = (0..n).filter(|_| g.sample(&mut rng) <= 4.0).count();
        let mc = below as f64 / n as f64;
        assert!((g.cdf(4.0) - mc).abs() < 2e-3, "cdf {} vs mc {}", g.cdf(4.0), mc);
    }

    #[test]
    fn gamma_quantile_matches_bisection() {
        let g = Gamma::new(4.0, 2.5).unwrap();
        let q = g.quantile(0.9).unwrap();
        let oracle = bisect(|x| g.cdf(x), 0.9, 0.0, 100.0);
        assert!((q - oracle).abs() < 1e-8);
    }

    #[test]
    fn cdf_quantile_roundtrip() {
        for d in all_distributions().iter().filter(|d| !d.is_discrete()) {
            for i in 1..100 {
                let p = i as f64 / 100.0;
                if let Distribution::ZeroInflatedGamma(z) = d {
                    if p <= z.zero_mass() {
                        continue;
                    }
                }
                let x = d.quantile(p).unwrap();
                assert!((d.cdf(x) - p).abs() < 1e-8, "{} p={p}", d.family_name());
            }
        }
        assert!(Distribution::gamma(1.0, 1.0).unwrap().quantile(1.0).is_err());
        assert!(Distribution::gamma(1.0, 1.0).unwrap().quantile(0.0).is_err());
    }

    #[test]
    fn sample_mean_law_of_large_numbers() {
        let g = Gamma::new(4.0, 2.5).unwrap();
        let mut rng = stream(5);
        let n = 100_000;
        let m = (0..n).map(|_| g.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((m - 4.0).abs() < 0.1);
    }

    #[test]
    fn sample_supports() {
        let mut rng = stream(3);
        let u = Distribution::uniform(10.0, 20.0).unwrap();
        let vm = Distribution::von_mises(3.0, 0.5).unwrap();
        let vm0 = Distribution::von_mises(-3.0, 1e-9).unwrap();
        for _ in 0..20_000 {
            let x = u.sample(&mut rng);
            assert!((10.0..=20.0).contains(&x));
            for d in [&vm, &vm0] {
                let a = d.sample(&mut rng);
                assert!(a > -PI && a <= PI);
            }
        }
    }

    #[test]
    fn densities_integrate_to_one() {
        for d in all_distributions().iter().filter(|d| !d.is_discrete()) {
            let (lo, hi) = match d {
                Distribution::VonMises(_) => (-PI, PI),
                Distribution::Uniform(u) => (u.lo(), u.hi()),
                Distribution::SplineDensity(s) => s.support(),
                _ => (0.0, d.quantile(1.0 - 1e-13).unwrap()),
            };
            let lo = if lo == 0.0 { 1e-300 } else { lo };
            let mut total = math::integrate(&|x: f64| exp(d.log_pdf(x)), lo, hi, 1e-12);
            if let Distribution::ZeroInflatedGamma(z) = d {
                total += z.zero_mass();
            }
            if matches!(d, Distribution::Gamma(g) if g.shape() < 1.0) {
                // integrable singularity at zero: add the analytic mass below 1e-6
                let below = d.cdf(1e-6);
                total = math::integrate(&|x: f64| exp(d.log_pdf(x)), 1e-6, hi, 1e-12) + below;
            }
            assert!((total - 1.0).abs() < 1e-6, "{}: {total}", d.family_name());
        }
    }

    #[test]
    fn dwell_laws_have_mean_three_and_start_at_one() {
        for law in [DwellLaw::Shifted, DwellLaw::Truncated] {
            let d = PoissonDwell::new(3.0, law).unwrap();
            let mean: f64 = (1..200).map(|k| k as f64 * exp(d.log_pmf(k as f64))).sum();
            assert!((mean - 3.0).abs() < 1e-10, "{law:?} {mean}");
            assert_eq!(d.log_pmf(0.0), f64::NEG_INFINITY);
            assert!((Distribution::PoissonDwell(d).cdf(1e4) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kolmogorov_distance_of_samples() {
        for (i, d) in all_distributions().iter().enumerate() {
            let mut rng = stream(100 + i as u64);
            let n = 100_000;
            let mut xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
            xs.sort_by(f64::total_cmp);
            let mut ks: f64 = 0.0;
            let mut j = 0;
            while j < n {
                let v = xs[j];
                let mut k = j;
                while k < n && xs[k] == v {
                    k += 1;
                }
                ks = ks.max((j as f64 / n as f64 - d.cdf_left(v)).abs());
                ks = ks.max((k as f64 / n as f64 - d.cdf(v)).abs());
                j = k;
            }
            assert!(ks < 0.01, "{}: KS {ks}", d.family_name());
        }
    }

    #[test]
    fn mean_shape_rate_involution() {
        let g = Gamma::new(0.5, 0.7).unwrap();
        let h = Gamma::from_shape_rate(g.shape(), g.rate()).unwrap();
        assert!((h.mean() - g.mean()).abs() < 1e-15 && h.shape() == g.shape());
    }

    #[test]
    fn constructors_reject_bad_parameters() {
        assert!(Gamma::new(0.0, 1.0).is_err());
        assert!(Gamma::new(1.0, -1.0).is_err());
        assert!(VonMises::new(0.0, -0.1).is_err());
        assert!(ZeroInflatedGamma::new(1.0, 1.0, 1.0).is_err());
        assert!(Uniform::new(2.0, 1.0).is_err());
        assert!(PoissonDwell::new(1.0, DwellLaw::Shifted).is_err());
        assert!(GammaMixture::new(vec![0.5, 0.4], vec![Gamma::new(1.0, 1.0).unwrap(); 2]).is_err());
    }
}
