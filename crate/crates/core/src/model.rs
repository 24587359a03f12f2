//! Concrete laws of the coefficient pair `(M, Q)`.
//!
//! Each family fixes the tail of `log|Q|` and the law of `log|M|` in closed
//! form, so the tail hypotheses hold exactly rather than asymptotically.
//!
//! | family               | `log|M|`                         | `P{log|Q| > x}`                   |
//! |----------------------|----------------------------------|-----------------------------------|
//! | `cauchy_tail`        | `-a + Z`                         | `min(1, c/x)`                     |
//! | `reg_var_tail`       | `-a + Z`                         | `min(1, x^-alpha)`, or `(1+ln x)/x` when `alpha = 1` |
//! | `heavy_neg_m`        | `-V`, `P{V > x} = min(1, x^-beta)` | `min(1, x^-alpha)`              |
//! | `convergent_control` | `-a + Z`                         | `min(1, exp(-rate x))`            |
//! | `expanding_control`  | `a + Z`                          | `min(1, c/x)`                     |
//! | `degenerate`         | `ln|m|`                          | point mass at `ln|q|`             |
//!
//! `Z` is standard normal. Signs of `M` and `Q` are independent of the
//! magnitudes, positive with probabilities `p_m` and `p_q`.
//!
//! Config schema (JSON): `{"family": "<name>", <family parameters>, "p_m": .., "p_q": ..}`
//! where `p_m`/`p_q` default to `0.5` and are ignored by `degenerate`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::numerics::{Sign, SignedLogValue};
use crate::rng::open_unit;
use crate::{quad, Error, Result};

/// Family of the coefficient law together with its shape parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    CauchyTail { a: f64, c: f64 },
    RegVarTail { alpha: f64, #[serde(default = "default_drift")] a: f64 },
    HeavyNegM { alpha: f64, beta: f64 },
    ConvergentControl { a: f64, rate: f64 },
    ExpandingControl { a: f64, c: f64 },
    Degenerate { m: f64, q: f64 },
}

fn default_drift() -> f64 {
    1.0
}

fn default_sign_prob() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct LawSpec {
    #[serde(flatten)]
    family: Family,
    #[serde(default = "default_sign_prob")]
    p_m: f64,
    #[serde(default = "default_sign_prob")]
    p_q: f64,
}

/// An immutable, validated joint law of `(M, Q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawSpec", into = "LawSpec")]
pub struct CoefficientLaw {
    family: Family,
    p_m: f64,
    p_q: f64,
}

impl TryFrom<LawSpec> for CoefficientLaw {
    type Error = Error;
    fn try_from(s: LawSpec) -> Result<Self> {
        CoefficientLaw::new(s.family, s.p_m, s.p_q)
    }
}

impl From<CoefficientLaw> for LawSpec {
    fn from(l: CoefficientLaw) -> Self {
        LawSpec {
            family: l.family,
            p_m: l.p_m,
            p_q: l.p_q,
        }
    }
}

/// One draw of the coefficient pair, kept in log form so that huge `|Q|`
/// never overflows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientDraw {
    pub sign_m: Sign,
    pub log_m: f64,
    pub sign_q: Sign,
    pub log_q: f64,
}

impl CoefficientDraw {
    pub fn m(&self) -> SignedLogValue {
        SignedLogValue::new(self.sign_m, self.log_m)
    }

    pub fn q(&self) -> SignedLogValue {
        SignedLogValue::new(self.sign_q, self.log_q)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")))
    }
}

fn probability(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must lie in [0, 1], got {v}")))
    }
}

fn std_normal_cdf(t: f64) -> f64 {
    0.5 * erfc(-t / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Antiderivative of the normal CDF: `t Phi(t) + phi(t)`.
fn normal_cdf_integral(t: f64) -> f64 {
    t * std_normal_cdf(t) + std_normal_pdf(t)
}

/// Solves `y - ln(1 + y) = w` for `y >= 0`.
fn solve_log_slowly_varying(w: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    // Start right of the root; Newton on a convex increasing function then
    // decreases monotonically onto it.
    let mut y = w + (1.0 + 2.0 * w).ln() + 1.0;
    for _ in 0..200 {
        let g = y - y.ln_1p() - w;
        let step = g * (1.0 + y) / y;
        let next = y - step;
        if !(next < y) || (y - next) <= 1e-16 * y {
            return next.max(0.0).min(y);
        }
        y = next;
    }
    y
}

impl CoefficientLaw {
    pub fn new(family: Family, p_m: f64, p_q: f64) -> Result<Self> {
        match family {
            Family::CauchyTail { a, c } | Family::ExpandingControl { a, c } => {
                positive("a", a)?;
                positive("c", c)?;
            }
            Family::RegVarTail { alpha, a } => {
                positive("a", a)?;
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(Error::Parameter(format!("alpha must lie in (0, 1], got {alpha}")));
                }
            }
            Family::HeavyNegM { alpha, beta } => {
                if !(alpha > 0.0 && alpha < beta && beta < 1.0) {
                    return Err(Error::Parameter(format!(
                        "heavy_neg_m needs 0 < alpha < beta < 1, got alpha={alpha}, beta={beta}"
                    )));
                }
            }
            Family::ConvergentControl { a, rate } => {
                positive("a", a)?;
                positive("rate", rate)?;
            }
            Family::Degenerate { m, q } => {
                if m == 0.0 {
                    return Err(Error::UnsupportedFamily("P{M = 0} > 0 is excluded".into()));
                }
                if q == 0.0 {
                    return Err(Error::Parameter("Q = 0 almost surely is excluded".into()));
                }
                if !m.is_finite() || !q.is_finite() {
                    return Err(Error::Parameter("degenerate coefficients must be finite".into()));
                }
            }
        }
        probability("p_m", p_m)?;
        probability("p_q", p_q)?;
        Ok(CoefficientLaw { family, p_m, p_q })
    }

    pub fn cauchy_tail(a: f64, c: f64) -> Result<Self> {
        Self::new(Family::CauchyTail { a, c }, 0.5, 0.5)
    }

    pub fn reg_var_tail(alpha: f64, a: f64) -> Result<Self> {
        Self::new(Family::RegVarTail { alpha, a }, 0.5, 0.5)
    }

    pub fn heavy_neg_m(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(Family::HeavyNegM { alpha, beta }, 0.5, 0.5)
    }

    pub fn convergent_control(a: f64, rate: f64) -> Result<Self> {
        Self::new(Family::ConvergentControl { a, rate }, 0.5, 0.5)
    }

    pub fn expanding_control(a: f64, c: f64) -> Result<Self> {
        Self::new(Family::ExpandingControl { a, c }, 0.5, 0.5)
    }

    pub fn degenerate(m: f64, q: f64) -> Result<Self> {
        Self::new(Family::Degenerate { m, q }, 1.0, 1.0)
    }

    pub fn with_sign_probabilities(self, p_m: f64, p_q: f64) -> Result<Self> {
        Self::new(self.family, p_m, p_q)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn p_m(&self) -> f64 {
        self.p_m
    }

    pub fn p_q(&self) -> f64 {
        self.p_q
    }

    /// Short family name as used in the config schema.
    pub fn family_name(&self) -> &'static str {
        match self.family {
            Family::CauchyTail { .. } => "cauchy_tail",
            Family::RegVarTail { .. } => "reg_var_tail",
            Family::HeavyNegM { .. } => "heavy_neg_m",
            Family::ConvergentControl { .. } => "convergent_control",
            Family::ExpandingControl { .. } => "expanding_control",
            Family::Degenerate { .. } => "degenerate",
        }
    }

    /// Drift `a` with `E log|M| = -a`, when the family has one.
    pub fn drift(&self) -> Option<f64> {
        match self.family {
            Family::CauchyTail { a, .. } | Family::RegVarTail { a, .. } | Family::ConvergentControl { a, .. } => {
                Some(a)
            }
            Family::ExpandingControl { a, .. } => Some(-a),
            Family::Degenerate { m, .. } => Some(-m.abs().ln()),
            Family::HeavyNegM { .. } => None,
        }
    }

    /// Exact `E log|M|`; `-inf` for `heavy_neg_m`.
    pub fn mean_log_m(&self) -> f64 {
        self.drift().map(|a| -a).unwrap_or(f64::NEG_INFINITY)
    }

    /// Cauchy tail constant `c` in `x P{log|Q| > x} -> c`.
    pub fn tail_constant(&self) -> Option<f64> {
        match self.family {
            Family::CauchyTail { c, .. } | Family::ExpandingControl { c, .. } => Some(c),
            _ => None,
        }
    }

    /// Regular-variation index of the tail of `log|Q|`.
    pub fn tail_index(&self) -> Option<f64> {
        match self.family {
            Family::RegVarTail { alpha, .. } | Family::HeavyNegM { alpha, .. } => Some(alpha),
            Family::CauchyTail { .. } | Family::ExpandingControl { .. } => Some(1.0),
            _ => None,
        }
    }

    /// `P{log|Q| > x}`.
    pub fn tail_q(&self, x: f64) -> f64 {
        match self.family {
            Family::CauchyTail { c, .. } | Family::ExpandingControl { c, .. } => {
                if x <= c {
                    1.0
                } else {
                    c / x
                }
            }
            Family::RegVarTail { alpha, .. } | Family::HeavyNegM { alpha, .. } => {
                if x <= 1.0 {
                    1.0
                } else if alpha == 1.0 {
                    ((1.0 + x.ln()) / x).min(1.0)
                } else {
                    x.powf(-alpha)
                }
            }
            Family::ConvergentControl { rate, .. } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-rate * x).exp()
                }
            }
            Family::Degenerate { q, .. } => {
                if x < q.abs().ln() {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// The value `x` of `log|Q|` at which `-ln P{log|Q| > x} = w`.
    ///
    /// Feeding an `Exp(1)` variate gives an exact inverse-transform sample.
    pub fn log_q_quantile(&self, w: f64) -> f64 {
        match self.family {
            Family::CauchyTail { c, .. } | Family::ExpandingControl { c, .. } => c * w.exp(),
            Family::RegVarTail { alpha, .. } | Family::HeavyNegM { alpha, .. } => {
                if alpha == 1.0 {
                    solve_log_slowly_varying(w).exp()
                } else {
                    (w / alpha).exp()
                }
            }
            Family::ConvergentControl { rate, .. } => w / rate,
            Family::Degenerate { q, .. } => q.abs().ln(),
        }
    }

    /// Draws `(sign M, log|M|, sign Q, log|Q|)`.
    ///
    /// Draw order per call is fixed: noise for `log|M|`, the uniform for
    /// `log|Q|`, then the two sign uniforms.
    pub fn sample_draw<R: Rng + ?Sized>(&self, rng: &mut R) -> CoefficientDraw {
        if let Family::Degenerate { m, q } = self.family {
            return CoefficientDraw {
                sign_m: Sign::of(m),
                log_m: m.abs().ln(),
                sign_q: Sign::of(q),
                log_q: q.abs().ln(),
            };
        }
        let log_m = match self.family {
            Family::CauchyTail { a, .. } | Family::RegVarTail { a, .. } | Family::ConvergentControl { a, .. } => {
                let z: f64 = rng.sample(StandardNormal);
                -a + z
            }
            Family::ExpandingControl { a, .. } => {
                let z: f64 = rng.sample(StandardNormal);
                a + z
            }
            Family::HeavyNegM { beta, .. } => -open_unit(rng).powf(-1.0 / beta),
            Family::Degenerate { .. } => unreachable!(),
        };
        let w = -open_unit(rng).ln();
        let log_q = self.log_q_quantile(w);
        let sign_m = if rng.random::<f64>() < self.p_m { Sign::Pos } else { Sign::Neg };
        let sign_q = if rng.random::<f64>() < self.p_q { Sign::Pos } else { Sign::Neg };
        CoefficientDraw {
            sign_m,
            log_m,
            sign_q,
            log_q,
        }
    }

    /// Draws `log|Q|` alone, consuming one uniform (none for point masses).
    pub fn sample_log_abs_q<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if let Family::Degenerate { q, .. } = self.family {
            return q.abs().ln();
        }
        self.log_q_quantile(-open_unit(rng).ln())
    }

    /// Draws `(m, q)` as plain reals; `|q|` may overflow to infinity for
    /// heavy-tailed families, which is why the simulators use
    /// [`sample_draw`](Self::sample_draw).
    pub fn sample_mq<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let d = self.sample_draw(rng);
        (d.m().to_f64(), d.q().to_f64())
    }

    /// Survival function of `log- |M|` at `u >= 0`.
    pub fn tail_log_minus_m(&self, u: f64) -> f64 {
        match self.family {
            Family::CauchyTail { a, .. } | Family::RegVarTail { a, .. } | Family::ConvergentControl { a, .. } => {
                std_normal_cdf(a - u)
            }
            Family::ExpandingControl { a, .. } => std_normal_cdf(-a - u),
            Family::HeavyNegM { beta, .. } => {
                if u < 1.0 {
                    1.0
                } else {
                    u.powf(-beta)
                }
            }
            Family::Degenerate { m, .. } => {
                if u < (-m.abs().ln()).max(0.0) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `A(x) = E(log- |M| ∧ x) = ∫_0^x P{log- |M| > u} du`, in closed form.
    pub fn compute_a(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain(format!("A(x) needs x > 0, got {x}")));
        }
        let normal = |mu: f64| {
            if x < 1e-4 {
                let (p, d) = (std_normal_cdf(mu), std_normal_pdf(mu));
                x * p - 0.5 * x * x * d - x * x * x * mu * d / 6.0
            } else {
                normal_cdf_integral(mu) - normal_cdf_integral(mu - x)
            }
        };
        Ok(match self.family {
            Family::CauchyTail { a, .. } | Family::RegVarTail { a, .. } | Family::ConvergentControl { a, .. } => {
                normal(a)
            }
            Family::ExpandingControl { a, .. } => normal(-a),
            Family::HeavyNegM { beta, .. } => {
                if x <= 1.0 {
                    x
                } else {
                    1.0 + (x.powf(1.0 - beta) - 1.0) / (1.0 - beta)
                }
            }
            Family::Degenerate { m, .. } => x.min((-m.abs().ln()).max(0.0)),
        })
    }

    /// `b_n` solving `n P{log|Q| > b_n} = 1`, by bisection.
    ///
    /// Returned as `inf{b : n P{log|Q| > b} < 1}`, which picks the cutoff
    /// point for `n = 1`.
    pub fn compute_bn(&self, n: u64) -> Result<f64> {
        if !matches!(self.family, Family::RegVarTail { .. } | Family::HeavyNegM { .. }) {
            return Err(Error::UnsupportedFamily(format!(
                "b_n needs a regularly varying tail, got {}",
                self.family_name()
            )));
        }
        if n == 0 {
            return Err(Error::Domain("b_n needs n >= 1".into()));
        }
        let n = n as f64;
        let below = |b: f64| n * self.tail_q(b) < 1.0;
        let mut lo = 1.0;
        let mut hi = 2.0;
        while !below(hi) {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi {
                break;
            }
            if below(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Truncated Goldie–Maller integral
    /// `E[ log|Q| / A(log|Q|) ; 0 < log|Q| <= level ]`.
    ///
    /// Integrated in the variable `w = -ln P{log|Q| > x}` where the integrand
    /// is smooth; over `w` the range is split into doubling segments.
    pub fn truncated_goldie_maller(&self, level: f64) -> Result<f64> {
        let ratio = |x: f64| -> Result<f64> { Ok(x / self.compute_a(x)?) };
        if let Family::Degenerate { q, .. } = self.family {
            let x = q.abs().ln();
            return if x > 0.0 && x <= level { ratio(x) } else { Ok(0.0) };
        }
        let tail = self.tail_q(level);
        if tail >= 1.0 {
            return Ok(0.0);
        }
        let w_end = -tail.ln();
        let integrand = |w: f64| {
            let x = self.log_q_quantile(w);
            if x <= 0.0 {
                return 0.0;
            }
            match self.compute_a(x) {
                Ok(a) if a > 0.0 => x / a * (-w).exp(),
                _ => f64::INFINITY,
            }
        };
        let mut total = 0.0;
        let mut lo = 0.0;
        let mut hi = w_end.min(1.0);
        loop {
            let part = quad::integrate(integrand, lo, hi, 1e-10);
            if !part.is_finite() {
                return Ok(f64::INFINITY);
            }
            total += part;
            if hi >= w_end || (part <= 1e-18 * total && lo > 64.0) {
                break;
            }
            lo = hi;
            hi = (2.0 * hi).min(w_end);
        }
        Ok(total)
    }
}

/// Regime of the pair `(M, Q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeTag {
    ConvergentPerpetuity,
    DivergentContractive,
    NonContractive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedIntegral {
    pub level: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeEvidence {
    /// Monte Carlo estimate of `E log|M|`.
    pub mean_log_m_estimate: f64,
    pub mean_log_m_std_error: f64,
    /// Closed-form `E log|M|` (`None` when it is `-inf`).
    pub mean_log_m_exact: Option<f64>,
    pub mc_samples: usize,
    pub truncated_integrals: Vec<TruncatedIntegral>,
    /// Last over first truncated integral; `None` when not computed.
    pub growth_ratio: Option<f64>,
    pub growth_threshold: f64,
    pub integral_divergent: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub tag: RegimeTag,
    pub evidence: RegimeEvidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub mc_samples: usize,
    pub truncation_levels: Vec<f64>,
    pub growth_threshold: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            mc_samples: 10_000,
            truncation_levels: vec![1e1, 1e2, 1e5, 1e10, 1e20, 1e40],
            growth_threshold: 10.0,
        }
    }
}

/// Classifies a law as convergent, divergent-contractive or non-contractive.
///
/// Contraction is decided by the sign of a Monte Carlo estimate of
/// `E log|M|`. Divergence of the Goldie–Maller integral is a heuristic: the
/// integral is evaluated at each truncation level and declared divergent when
/// the last value exceeds the first by more than `growth_threshold`.
pub fn classify_regime<R: Rng + ?Sized>(law: &CoefficientLaw, opts: &ClassifyOptions, rng: &mut R) -> Result<Regime> {
    if opts.mc_samples < 1000 {
        return Err(Error::Parameter("classification needs at least 1000 Monte Carlo samples".into()));
    }
    if opts.truncation_levels.len() < 2 || opts.truncation_levels.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Parameter("truncation levels must be strictly increasing, at least two".into()));
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..opts.mc_samples {
        let l = law.sample_draw(rng).log_m;
        sum += l;
        sum_sq += l * l;
    }
    let n = opts.mc_samples as f64;
    let mean = sum / n;
    let var = ((sum_sq / n - mean * mean) * n / (n - 1.0)).max(0.0);
    let exact = law.mean_log_m();
    let mut evidence = RegimeEvidence {
        mean_log_m_estimate: mean,
        mean_log_m_std_error: (var / n).sqrt(),
        mean_log_m_exact: exact.is_finite().then_some(exact),
        mc_samples: opts.mc_samples,
        truncated_integrals: vec![],
        growth_ratio: None,
        growth_threshold: opts.growth_threshold,
        integral_divergent: None,
    };
    if !(mean < 0.0) {
        return Ok(Regime {
            tag: RegimeTag::NonContractive,
            evidence,
        });
    }
    for &level in &opts.truncation_levels {
        evidence.truncated_integrals.push(TruncatedIntegral {
            level,
            value: law.truncated_goldie_maller(level)?,
        });
    }
    let first = evidence.truncated_integrals[0].value;
    let last = evidence.truncated_integrals.last().expect("two levels").value;
    let ratio = if first > 0.0 {
        last / first
    } else if last > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    let divergent = ratio > opts.growth_threshold;
    evidence.growth_ratio = Some(ratio);
    evidence.integral_divergent = Some(divergent);
    Ok(Regime {
        tag: if divergent {
            RegimeTag::DivergentContractive
        } else {
            RegimeTag::ConvergentPerpetuity
        },
        evidence,
    })
}

/// The three bundled classification presets.
pub mod presets {
    use super::CoefficientLaw;

    pub fn divergent() -> CoefficientLaw {
        CoefficientLaw::cauchy_tail(1.0, 1.0).expect("valid preset")
    }

    pub fn convergent() -> CoefficientLaw {
        CoefficientLaw::convergent_control(1.0, 1.0).expect("valid preset")
    }

    pub fn non_contractive() -> CoefficientLaw {
        CoefficientLaw::expanding_control(1.0, 1.0).expect("valid preset")
    }
}
