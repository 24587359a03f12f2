//! Kolmogorov–Smirnov machinery and the verification suites comparing
//! simulated scaled processes against their limit laws.

use serde::{Deserialize, Serialize};

use crate::limitlaw::{cdf_thm11, cdf_thm15, extremal_path, extremal_value, sample_prm, LimitKind, PrmSpec};
use crate::model::{CoefficientLaw, Family};
use crate::parallel::map_indexed;
use crate::rng::{FORWARD_STREAM_OFFSET, LIMIT_STREAM_OFFSET};
use crate::simulate::{
    scale_path, simulate_forward_chain_path, simulate_marginal, simulate_pakes_sum, simulate_perpetuity_path, step_index,
    SimScenario,
};
use crate::{Error, Result};

/// Default one-sample pass threshold on `D`.
pub const DEFAULT_THRESHOLD: f64 = 0.05;
/// Significance level of the two-sample comparisons.
pub const DEFAULT_LEVEL: f64 = 0.01;
/// Smallest replication count accepted by the suites.
pub const MIN_REPLICATIONS: usize = 100;

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Domain("KS statistic needs at least one sample".into()));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::Domain("samples contain NaN".into()));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `sup_x |ECDF(x) - F(x)|`, exact for continuous `F`: both one-sided gaps
/// are taken at every order statistic.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    let v = sorted(samples)?;
    let r = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / r - f).max(f - i as f64 / r);
    }
    Ok(d.clamp(0.0, 1.0))
}

/// Two-sample statistic `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (m, n) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / m - j as f64 / n).abs());
    }
    Ok(d)
}

/// Asymptotic Kolmogorov coefficient `sqrt(-ln(level / 2) / 2)`.
pub fn kolmogorov_coefficient(level: f64) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt()
}

pub fn ks_critical_one_sample(r: usize, level: f64) -> f64 {
    kolmogorov_coefficient(level) / (r as f64).sqrt()
}

pub fn ks_critical_two_sample(m: usize, n: usize, level: f64) -> f64 {
    kolmogorov_coefficient(level) * ((m + n) as f64 / (m * n) as f64).sqrt()
}

/// Approximate p-value of a one-sample `D` from `r` samples, using the
/// Kolmogorov series at Stephens' corrected argument.
pub fn kolmogorov_p_value(d: f64, r: usize) -> f64 {
    let sr = (r as f64).sqrt();
    let lambda = (sr + 0.12 + 0.11 / sr) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Which statement a report verifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoremTag {
    Thm11Backward,
    Thm11Forward,
    Thm15Backward,
    Thm15Forward,
    Pakes114,
    Pakes119,
    ForwardBackwardEquality,
    FunctionalSup,
}

impl TheoremTag {
    pub const ALL: [TheoremTag; 8] = [
        TheoremTag::Thm11Backward,
        TheoremTag::Thm11Forward,
        TheoremTag::Thm15Backward,
        TheoremTag::Thm15Forward,
        TheoremTag::Pakes114,
        TheoremTag::Pakes119,
        TheoremTag::ForwardBackwardEquality,
        TheoremTag::FunctionalSup,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TheoremTag::Thm11Backward => "thm11-backward",
            TheoremTag::Thm11Forward => "thm11-forward",
            TheoremTag::Thm15Backward => "thm15-backward",
            TheoremTag::Thm15Forward => "thm15-forward",
            TheoremTag::Pakes114 => "pakes114",
            TheoremTag::Pakes119 => "pakes119",
            TheoremTag::ForwardBackwardEquality => "forward-backward-equality",
            TheoremTag::FunctionalSup => "functional-sup",
        }
    }

    pub fn parse(s: &str) -> Result<TheoremTag> {
        TheoremTag::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Configuration(format!("unknown theorem tag '{s}'")))
    }

    fn is_first_theorem(self) -> bool {
        matches!(self, TheoremTag::Thm11Backward | TheoremTag::Thm11Forward | TheoremTag::Pakes114)
    }
}

/// Outcome of one verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub theorem: TheoremTag,
    /// The variant of a functional-sup run, otherwise equal to `theorem`.
    pub target: TheoremTag,
    pub law: Option<CoefficientLaw>,
    pub n: u64,
    pub replications: usize,
    pub u: f64,
    pub ks_statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub degenerate_count: usize,
    pub seed: u64,
    pub two_sample: bool,
    pub scaling: f64,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyOptions {
    /// One-sample pass threshold on `D`.
    pub threshold: f64,
    /// Level of the two-sample tests, which use the Kolmogorov critical value.
    pub level: f64,
    /// Worker threads; `0` means available parallelism.
    pub jobs: usize,
    /// Replaces the limit sampler's tail constant (diagnostics only).
    pub limit_c: Option<f64>,
    /// Truncation level for limit sampling; default `1e-3 T`.
    pub gamma: Option<f64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            threshold: DEFAULT_THRESHOLD,
            level: DEFAULT_LEVEL,
            jobs: 0,
            limit_c: None,
            gamma: None,
        }
    }
}

fn check_run(n: u64, u: f64, r: usize) -> Result<()> {
    if r < MIN_REPLICATIONS {
        return Err(Error::Domain(format!("need at least {MIN_REPLICATIONS} replications, got {r}")));
    }
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    if !(u > 0.0 && u.is_finite()) {
        return Err(Error::Domain(format!("evaluation time must be positive, got {u}")));
    }
    Ok(())
}

/// Normalisation and limit parameters for a family/tag pair.
struct Setting {
    divisor: f64,
    /// Drift `a` of `log|M|` (first theorem and deterministic weights).
    drift: f64,
    /// Tail constant of the first theorem's `log|Q|` or index of the second.
    tail: f64,
}

fn setting(tag: TheoremTag, law: &CoefficientLaw, n: u64) -> Result<Setting> {
    let family = law.family();
    if tag.is_first_theorem() {
        let Family::CauchyTail { a, c } = family else {
            return Err(Error::Configuration(format!(
                "{} needs the cauchy_tail family, got {}",
                tag.name(),
                law.family_name()
            )));
        };
        return Ok(Setting {
            divisor: a * n as f64,
            drift: a,
            tail: c,
        });
    }
    let (alpha, drift) = match family {
        Family::RegVarTail { alpha, a } => (alpha, a),
        Family::HeavyNegM { alpha, .. } if tag != TheoremTag::Pakes119 => (alpha, f64::NAN),
        _ => {
            return Err(Error::Configuration(format!(
                "{} needs a regularly varying log|Q| tail (reg_var_tail{}), got {}",
                tag.name(),
                if tag == TheoremTag::Pakes119 { "" } else { " or heavy_neg_m" },
                law.family_name()
            )))
        }
    };
    Ok(Setting {
        divisor: law.compute_bn(n)?,
        drift,
        tail: alpha,
    })
}

fn finish(mut report: VerificationReport, samples: &[f64], r: usize) -> Result<VerificationReport> {
    if samples.is_empty() {
        return Err(Error::Statistical(format!("all {r} replications were degenerate")));
    }
    report.pass = report.ks_statistic <= report.threshold;
    report.replications = r;
    Ok(report)
}

/// One-sample check of a scaled time-`u` marginal against its limit CDF.
pub fn verify_marginal(
    tag: TheoremTag,
    law: &CoefficientLaw,
    n: u64,
    u: f64,
    r: usize,
    seed: u64,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    if matches!(tag, TheoremTag::ForwardBackwardEquality | TheoremTag::FunctionalSup) {
        return Err(Error::Configuration(format!("{} is not a marginal check", tag.name())));
    }
    check_run(n, u, r)?;
    let st = setting(tag, law, n)?;
    let draws = map_indexed(r, opts.jobs, |i| -> Result<(f64, bool)> {
        let stream = i as u64;
        match tag {
            TheoremTag::Thm11Backward | TheoremTag::Thm15Backward => simulate_marginal(law, n, u, false, seed, stream),
            TheoremTag::Thm11Forward | TheoremTag::Thm15Forward => simulate_marginal(law, n, u, true, seed, stream),
            _ => Ok((simulate_pakes_sum(st.drift, law, step_index(n, u), seed, stream)?, false)),
        }
    });
    let mut samples = Vec::with_capacity(r);
    let mut degenerate = 0;
    for d in draws {
        let (v, bad) = d?;
        if bad {
            degenerate += 1;
        } else {
            samples.push(v / st.divisor);
        }
    }
    let d = if samples.is_empty() {
        1.0
    } else if tag.is_first_theorem() {
        ks_statistic(&samples, |x| if x <= 0.0 { 0.0 } else { cdf_thm11(x, u, st.tail, st.drift).unwrap_or(0.0) })?
    } else {
        ks_statistic(&samples, |x| if x <= 0.0 { 0.0 } else { cdf_thm15(x, u, st.tail).unwrap_or(0.0) })?
    };
    let report = VerificationReport {
        theorem: tag,
        target: tag,
        law: Some(law.clone()),
        n,
        replications: r,
        u,
        ks_statistic: d,
        threshold: opts.threshold,
        pass: false,
        degenerate_count: degenerate,
        seed,
        two_sample: false,
        scaling: st.divisor,
        p_value: (!samples.is_empty()).then(|| kolmogorov_p_value(d, samples.len())),
    };
    finish(report, &samples, r)
}

/// Same one-sample check applied to draws from the limit process itself.
pub fn verify_limit_sampler(
    tag: TheoremTag,
    law: &CoefficientLaw,
    u: f64,
    r: usize,
    seed: u64,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    check_run(1, u, r)?;
    let st = setting(tag, law, 1)?;
    let (kind, c, alpha) = limit_parameters(tag, &st)?;
    let c = opts.limit_c.unwrap_or(c);
    let gamma = opts.gamma.unwrap_or(1e-3 * u);
    let draws = map_indexed(r, opts.jobs, |i| {
        crate::limitlaw::sample_limit_marginal(kind, c, alpha, u, gamma, seed, LIMIT_STREAM_OFFSET + i as u64)
    });
    let samples = draws.into_iter().collect::<Result<Vec<f64>>>()?;
    let d = if tag.is_first_theorem() {
        ks_statistic(&samples, |x| if x <= 0.0 { 0.0 } else { cdf_thm11(x, u, st.tail, st.drift).unwrap_or(0.0) })?
    } else {
        ks_statistic(&samples, |x| if x <= 0.0 { 0.0 } else { cdf_thm15(x, u, st.tail).unwrap_or(0.0) })?
    };
    let report = VerificationReport {
        theorem: tag,
        target: tag,
        law: Some(law.clone()),
        n: 0,
        replications: r,
        u,
        ks_statistic: d,
        threshold: opts.threshold,
        pass: false,
        degenerate_count: 0,
        seed,
        two_sample: false,
        scaling: 1.0,
        p_value: Some(kolmogorov_p_value(d, r)),
    };
    finish(report, &samples, r)
}

fn limit_parameters(tag: TheoremTag, st: &Setting) -> Result<(LimitKind, f64, f64)> {
    Ok(match tag {
        TheoremTag::Thm11Backward | TheoremTag::Pakes114 => (LimitKind::BackwardThm11, st.tail / st.drift, 1.0),
        TheoremTag::Thm11Forward => (LimitKind::ForwardThm11, st.tail / st.drift, 1.0),
        TheoremTag::Thm15Backward | TheoremTag::Thm15Forward | TheoremTag::Pakes119 => {
            (LimitKind::SupThm15, 1.0, st.tail)
        }
        _ => return Err(Error::Configuration(format!("{} has no limit process", tag.name()))),
    })
}

/// Two-sample comparison of `log|Y_{[nu]+1}|` and `log|X_{[nu]+1}|` with
/// `X_0 = 0`, drawn from disjoint generator streams.
pub fn verify_forward_backward_equality(
    law: &CoefficientLaw,
    n: u64,
    u: f64,
    r: usize,
    seed: u64,
    x0: f64,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    if x0 != 0.0 {
        return Err(Error::Configuration(format!(
            "forward and backward laws coincide only for X_0 = 0, got {x0}"
        )));
    }
    check_run(n, u, r)?;
    let draws = map_indexed(2 * r, opts.jobs, |i| {
        if i < r {
            simulate_marginal(law, n, u, false, seed, i as u64)
        } else {
            simulate_marginal(law, n, u, true, seed, FORWARD_STREAM_OFFSET + (i - r) as u64)
        }
    });
    let (mut back, mut fwd, mut degenerate) = (vec![], vec![], 0);
    for (i, d) in draws.into_iter().enumerate() {
        let (v, bad) = d?;
        if bad {
            degenerate += 1;
        } else if i < r {
            back.push(v);
        } else {
            fwd.push(v);
        }
    }
    if back.is_empty() || fwd.is_empty() {
        return Err(Error::Statistical("all replications of one side were degenerate".into()));
    }
    let d = ks_two_sample(&back, &fwd)?;
    let threshold = ks_critical_two_sample(back.len(), fwd.len(), opts.level);
    Ok(VerificationReport {
        theorem: TheoremTag::ForwardBackwardEquality,
        target: TheoremTag::ForwardBackwardEquality,
        law: Some(law.clone()),
        n,
        replications: r,
        u,
        ks_statistic: d,
        threshold,
        pass: d <= threshold,
        degenerate_count: degenerate,
        seed,
        two_sample: true,
        scaling: 1.0,
        p_value: None,
    })
}

/// Two-sample comparison of `sup_{t <= T}` of the scaled simulated path with
/// the same functional of the sampled limit path.
pub fn verify_functional_sup(
    tag: TheoremTag,
    law: &CoefficientLaw,
    n: u64,
    horizon: f64,
    r: usize,
    seed: u64,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    if !matches!(
        tag,
        TheoremTag::Thm11Backward | TheoremTag::Thm11Forward | TheoremTag::Thm15Backward | TheoremTag::Thm15Forward
    ) {
        return Err(Error::Configuration(format!("functional sup is defined for path theorems, not {}", tag.name())));
    }
    check_run(n, horizon, r)?;
    let st = setting(tag, law, n)?;
    let (kind, c, alpha) = limit_parameters(tag, &st)?;
    let c = opts.limit_c.unwrap_or(c);
    let gamma = opts.gamma.unwrap_or(1e-3 * horizon);
    let forward = matches!(tag, TheoremTag::Thm11Forward | TheoremTag::Thm15Forward);
    let sims = map_indexed(r, opts.jobs, |i| -> Result<(f64, bool)> {
        let s = SimScenario::new(law.clone(), n, horizon, 0.0, seed)?.with_stream(i as u64);
        let sim = if forward {
            simulate_forward_chain_path(&s)?
        } else {
            simulate_perpetuity_path(&s)?
        };
        Ok((scale_path(&sim.path, st.divisor)?.sup(), sim.degenerate))
    });
    let limits = map_indexed(r, opts.jobs, |i| -> Result<f64> {
        let spec = PrmSpec {
            c,
            alpha,
            horizon,
            gamma,
            seed,
            stream: LIMIT_STREAM_OFFSET + i as u64,
        };
        let pm = sample_prm(&spec)?;
        Ok(match kind {
            LimitKind::ForwardThm11 => extremal_path(&pm, kind, horizon)?.sup(),
            _ => extremal_value(&pm, kind, horizon),
        })
    });
    let (mut sim_sups, mut degenerate) = (vec![], 0);
    for s in sims {
        let (v, bad) = s?;
        if bad {
            degenerate += 1;
        } else {
            sim_sups.push(v);
        }
    }
    let lim_sups = limits.into_iter().collect::<Result<Vec<f64>>>()?;
    if sim_sups.is_empty() {
        return Err(Error::Statistical(format!("all {r} replications were degenerate")));
    }
    let d = ks_two_sample(&sim_sups, &lim_sups)?;
    let threshold = ks_critical_two_sample(sim_sups.len(), lim_sups.len(), opts.level);
    Ok(VerificationReport {
        theorem: TheoremTag::FunctionalSup,
        target: tag,
        law: Some(law.clone()),
        n,
        replications: r,
        u: horizon,
        ks_statistic: d,
        threshold,
        pass: d <= threshold,
        degenerate_count: degenerate,
        seed,
        two_sample: true,
        scaling: st.divisor,
        p_value: None,
    })
}

/// Summary CSV with one row per report.
pub fn summary_csv(reports: &[VerificationReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record([
        "theorem",
        "target",
        "n",
        "replications",
        "u",
        "ks_statistic",
        "threshold",
        "pass",
        "degenerate_count",
        "seed",
    ])?;
    for r in reports {
        w.write_record([
            r.theorem.name().to_string(),
            r.target.name().to_string(),
            r.n.to_string(),
            r.replications.to_string(),
            format!("{:?}", r.u),
            format!("{:?}", r.ks_statistic),
            format!("{:?}", r.threshold),
            r.pass.to_string(),
            r.degenerate_count.to_string(),
            r.seed.to_string(),
        ])?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?).map_err(|e| Error::Io(e.to_string()))
}
