//! Sample paths of the backward sums `Y_k = Σ_{i<=k} Π_{i-1} Q_i` and of the
//! forward chain `X_k = M_k X_{k-1} + Q_k`, plus the deterministic-weight
//! sums `Σ e^{-ak} |Q_{k+1}|`.
//!
//! Paths are returned unscaled: the value on `[k/n, (k+1)/n)` is
//! `log|Y_{k+1}|` (resp. `log|X_{k+1}|`). Use [`scale_path`] for the `a n`
//! or `b_n` normalisations.

use serde::{Deserialize, Serialize};

use crate::model::CoefficientLaw;
use crate::numerics::{LogAccumulator, Sign, SignedAccumulator, SignedLogValue};
use crate::parallel::map_indexed;
use crate::paths::{fmt, StepPath};
use crate::rng::{stream_rng, SimRng};
use crate::{Error, Result};

/// `[n t]`, tolerant of the rounding in `n * t` (e.g. `100 * 0.29`).
pub fn step_index(n: u64, t: f64) -> u64 {
    let x = n as f64 * t;
    (x + 1e-9 * x.max(1.0)).floor() as u64
}

/// One simulation setting. `stream` selects the generator stream, which is
/// how replications are told apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub law: CoefficientLaw,
    pub n: u64,
    pub horizon: f64,
    #[serde(default)]
    pub x0: f64,
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
}

impl SimScenario {
    pub fn new(law: CoefficientLaw, n: u64, horizon: f64, x0: f64, seed: u64) -> Result<Self> {
        let s = SimScenario {
            law,
            n,
            horizon,
            x0,
            seed,
            stream: 0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Parameter("n must be at least 1".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Parameter(format!("T must be positive, got {}", self.horizon)));
        }
        if !self.x0.is_finite() {
            return Err(Error::Parameter(format!("x0 must be finite, got {}", self.x0)));
        }
        Ok(())
    }

    /// Number of coefficient pairs consumed, `[nT] + 1`.
    pub fn steps(&self) -> u64 {
        step_index(self.n, self.horizon) + 1
    }

    fn rng(&self) -> SimRng {
        stream_rng(self.seed, self.stream)
    }
}

/// A simulated path and its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPath {
    pub path: StepPath,
    /// Some partial sum hit the cancellation tolerance.
    pub degenerate: bool,
    /// `log|Π_{[nT]}|`, the log-product at the last jump time.
    pub log_product: f64,
}

fn assemble(s: &SimScenario, logs: Vec<f64>) -> Result<StepPath> {
    let n = s.n as f64;
    let times = (1..logs.len()).map(|k| (k as f64 / n).min(s.horizon)).collect();
    StepPath::new(s.horizon, logs[0], times, logs[1..].to_vec())
}

/// Backward iteration: `t ↦ log|Y_{[nt]+1}|` on `[0, T]`.
pub fn simulate_perpetuity_path(s: &SimScenario) -> Result<SimulatedPath> {
    s.validate()?;
    let mut rng = s.rng();
    let steps = s.steps();
    let mut logs = Vec::with_capacity(steps as usize);
    let mut acc = SignedAccumulator::default();
    let (mut log_prod, mut sign_prod) = (0.0, Sign::Pos);
    let mut log_prod_at_end = 0.0;
    let mut degenerate = false;
    for k in 1..=steps {
        let d = s.law.sample_draw(&mut rng);
        acc.push(SignedLogValue::new(sign_prod.mul(d.sign_q), log_prod + d.log_q));
        let y = acc.value();
        degenerate |= y.is_flagged();
        logs.push(if y.is_zero() { f64::NEG_INFINITY } else { y.logmag() });
        if k < steps {
            log_prod += d.log_m;
            sign_prod = sign_prod.mul(d.sign_m);
            log_prod_at_end = log_prod;
        }
    }
    Ok(SimulatedPath {
        path: assemble(s, logs)?,
        degenerate,
        log_product: log_prod_at_end,
    })
}

/// Forward chain from `X_0 = x0`: `t ↦ log|X_{[nt]+1}|` on `[0, T]`.
pub fn simulate_forward_chain_path(s: &SimScenario) -> Result<SimulatedPath> {
    s.validate()?;
    let mut rng = s.rng();
    let steps = s.steps();
    let mut logs = Vec::with_capacity(steps as usize);
    let mut x = SignedLogValue::from_f64(s.x0);
    let mut log_prod = 0.0;
    let mut log_prod_at_end = 0.0;
    for k in 1..=steps {
        let d = s.law.sample_draw(&mut rng);
        x = crate::numerics::slog_add(d.m().mul(x), d.q());
        logs.push(if x.is_zero() { f64::NEG_INFINITY } else { x.logmag() });
        if k < steps {
            log_prod += d.log_m;
            log_prod_at_end = log_prod;
        }
    }
    Ok(SimulatedPath {
        path: assemble(s, logs)?,
        degenerate: x.is_flagged(),
        log_product: log_prod_at_end,
    })
}

/// `log|Y_{[nu]+1}|` (or `log|X_{[nu]+1}|` with `forward`) and its
/// degeneracy flag, without materialising the path.
pub fn simulate_marginal(law: &CoefficientLaw, n: u64, u: f64, forward: bool, seed: u64, stream: u64) -> Result<(f64, bool)> {
    if n == 0 || !(u >= 0.0 && u.is_finite()) {
        return Err(Error::Parameter(format!("need n >= 1 and u >= 0, got n = {n}, u = {u}")));
    }
    let steps = step_index(n, u) + 1;
    let mut rng = stream_rng(seed, stream);
    let value = if forward {
        let mut x = SignedLogValue::ZERO;
        for _ in 0..steps {
            let d = law.sample_draw(&mut rng);
            x = crate::numerics::slog_add(d.m().mul(x), d.q());
        }
        x
    } else {
        let mut acc = SignedAccumulator::default();
        let (mut log_prod, mut sign_prod) = (0.0, Sign::Pos);
        for _ in 0..steps {
            let d = law.sample_draw(&mut rng);
            acc.push(SignedLogValue::new(sign_prod.mul(d.sign_q), log_prod + d.log_q));
            log_prod += d.log_m;
            sign_prod = sign_prod.mul(d.sign_m);
        }
        acc.value()
    };
    let log_abs = if value.is_zero() { f64::NEG_INFINITY } else { value.logmag() };
    Ok((log_abs, value.is_flagged()))
}

/// `log Σ_{k=0}^{n} e^{-ak} |Q_{k+1}|`.
pub fn simulate_pakes_sum(a: f64, law: &CoefficientLaw, n: u64, seed: u64, stream: u64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Parameter(format!("a must be positive, got {a}")));
    }
    let mut rng = stream_rng(seed, stream);
    let mut acc = LogAccumulator::default();
    for k in 0..=n {
        acc.push(law.sample_log_abs_q(&mut rng) - a * k as f64);
    }
    Ok(acc.log_sum())
}

/// Pointwise division of the values by `divisor`.
pub fn scale_path(p: &StepPath, divisor: f64) -> Result<StepPath> {
    if !(divisor > 0.0) || !divisor.is_finite() {
        return Err(Error::Domain(format!("divisor must be positive, got {divisor}")));
    }
    Ok(p.map_values(|v| v / divisor))
}

/// Which recursion a batch simulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Process {
    Backward,
    Forward,
}

/// Metadata written next to a batch CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMetadata {
    pub process: Process,
    pub law: CoefficientLaw,
    pub n: u64,
    pub horizon: f64,
    pub x0: f64,
    pub seed: u64,
    pub replications: u64,
    pub divisor: f64,
    pub degenerate_count: u64,
    pub degenerate_replications: Vec<u64>,
}

/// A batch of replications; replication `r` uses generator stream `r`.
#[derive(Debug, Clone)]
pub struct Batch {
    pub metadata: BatchMetadata,
    /// `(replication, scaled path)` for the non-degenerate replications.
    pub paths: Vec<(u64, StepPath)>,
}

pub fn run_batch(
    base: &SimScenario,
    process: Process,
    replications: u64,
    divisor: f64,
    jobs: usize,
) -> Result<Batch> {
    base.validate()?;
    if replications == 0 {
        return Err(Error::Parameter("replications must be at least 1".into()));
    }
    let sims = map_indexed(replications as usize, jobs, |r| {
        let s = base.clone().with_stream(r as u64);
        match process {
            Process::Backward => simulate_perpetuity_path(&s),
            Process::Forward => simulate_forward_chain_path(&s),
        }
    });
    let mut paths = vec![];
    let mut bad = vec![];
    for (r, sim) in sims.into_iter().enumerate() {
        let sim = sim?;
        if sim.degenerate {
            bad.push(r as u64);
        } else {
            paths.push((r as u64, scale_path(&sim.path, divisor)?));
        }
    }
    Ok(Batch {
        metadata: BatchMetadata {
            process,
            law: base.law.clone(),
            n: base.n,
            horizon: base.horizon,
            x0: base.x0,
            seed: base.seed,
            replications,
            divisor,
            degenerate_count: bad.len() as u64,
            degenerate_replications: bad,
        },
        paths,
    })
}

impl Batch {
    /// Consolidated CSV `replication,t,value`, one row per initial value and
    /// jump, preceded by the metadata as a `#` comment line.
    pub fn to_csv(&self) -> Result<String> {
        let meta = serde_json::to_string(&self.metadata).map_err(|e| Error::Io(e.to_string()))?;
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(["replication", "t", "value"])?;
        for (r, p) in &self.paths {
            let r = r.to_string();
            w.write_record([r.as_str(), "0.0", &fmt(p.initial())])?;
            for (&t, &v) in p.times().iter().zip(p.values()) {
                w.write_record([r.as_str(), &fmt(t), &fmt(v)])?;
            }
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?)
            .map_err(|e| Error::Io(e.to_string()))?;
        Ok(format!("# {meta}\n{body}"))
    }
}
