//! Signed log-space arithmetic.
//!
//! A [`SignedLogValue`] stores a real number as `sign * exp(logmag)`. Sums of
//! terms such as `exp(c_n (f(t) + y))` or `Pi_{k-1} Q_k` routinely span
//! hundreds of e-folds, far beyond `f64` range, while their logarithms stay
//! small. All accumulation in the simulators and in `F_n` goes through here.

use serde::{Deserialize, Serialize};

/// Relative residual below which a signed combine is flagged as a
/// near-cancellation.
pub const CANCELLATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sign {
    Neg,
    Zero,
    Pos,
}

impl Sign {
    pub fn of(x: f64) -> Sign {
        if x > 0.0 {
            Sign::Pos
        } else if x < 0.0 {
            Sign::Neg
        } else {
            Sign::Zero
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Neg => -1.0,
            Sign::Zero => 0.0,
            Sign::Pos => 1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Neg => Sign::Pos,
            Sign::Zero => Sign::Zero,
            Sign::Pos => Sign::Neg,
        }
    }

    /// Sign of a product.
    pub fn mul(self, other: Sign) -> Sign {
        match (self, other) {
            (Sign::Zero, _) | (_, Sign::Zero) => Sign::Zero,
            (a, b) if a == b => Sign::Pos,
            _ => Sign::Neg,
        }
    }
}

/// A real number `sign * exp(logmag)`.
///
/// Zero is `(Zero, -inf)`. The `flagged` bit records that some combine on the
/// way to this value cancelled to within [`CANCELLATION_TOLERANCE`] of the
/// larger operand; it propagates through further arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedLogValue {
    sign: Sign,
    logmag: f64,
    flagged: bool,
}

impl SignedLogValue {
    pub const ZERO: SignedLogValue = SignedLogValue {
        sign: Sign::Zero,
        logmag: f64::NEG_INFINITY,
        flagged: false,
    };

    /// Builds `sign * exp(logmag)`. A zero sign or a `-inf` log-magnitude both
    /// yield the canonical zero.
    pub fn new(sign: Sign, logmag: f64) -> Self {
        if sign == Sign::Zero || logmag == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            SignedLogValue {
                sign,
                logmag,
                flagged: false,
            }
        }
    }

    pub fn positive(logmag: f64) -> Self {
        Self::new(Sign::Pos, logmag)
    }

    pub fn from_f64(x: f64) -> Self {
        Self::new(Sign::of(x), x.abs().ln())
    }

    pub fn to_f64(self) -> f64 {
        match self.sign {
            Sign::Zero => 0.0,
            s => s.as_f64() * self.logmag.exp(),
        }
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn logmag(&self) -> f64 {
        self.logmag
    }

    pub fn is_zero(&self) -> bool {
        self.sign == Sign::Zero
    }

    pub fn is_flagged(&self) -> bool {
        self.flagged
    }

    pub fn with_flag(mut self, flagged: bool) -> Self {
        self.flagged |= flagged;
        self
    }

    pub fn neg(self) -> Self {
        SignedLogValue {
            sign: self.sign.flip(),
            ..self
        }
    }

    /// Product, i.e. sign product and sum of log-magnitudes.
    pub fn mul(self, other: SignedLogValue) -> SignedLogValue {
        let sign = self.sign.mul(other.sign);
        SignedLogValue::new(sign, self.logmag + other.logmag).with_flag(self.flagged || other.flagged)
    }
}

impl Default for SignedLogValue {
    fn default() -> Self {
        Self::ZERO
    }
}

/// `log(1 - exp(d))` for `d <= 0`, accurate on both ends.
fn log1mexp(d: f64) -> f64 {
    if d > -std::f64::consts::LN_2 {
        (-d.exp_m1()).ln()
    } else {
        (-d.exp()).ln_1p()
    }
}

/// Signed sum of two values computed around the larger magnitude.
pub fn slog_add(x: SignedLogValue, y: SignedLogValue) -> SignedLogValue {
    let flagged = x.flagged || y.flagged;
    if x.is_zero() {
        return y.with_flag(flagged);
    }
    if y.is_zero() {
        return x.with_flag(flagged);
    }
    // Deterministic ordering keeps the operation exactly commutative.
    let (hi, lo) = if x.logmag > y.logmag || (x.logmag == y.logmag && x.sign >= y.sign) {
        (x, y)
    } else {
        (y, x)
    };
    if hi.logmag == f64::INFINITY {
        if lo.logmag == f64::INFINITY && lo.sign != hi.sign {
            return SignedLogValue::ZERO.with_flag(true);
        }
        return hi.with_flag(flagged);
    }
    let d = lo.logmag - hi.logmag;
    if hi.sign == lo.sign {
        return SignedLogValue::new(hi.sign, hi.logmag + d.exp().ln_1p()).with_flag(flagged);
    }
    if d == 0.0 {
        return SignedLogValue::ZERO.with_flag(true);
    }
    let residual = -d.exp_m1();
    SignedLogValue::new(hi.sign, hi.logmag + log1mexp(d)).with_flag(flagged || residual < CANCELLATION_TOLERANCE)
}

/// `log+ |x| = max(log |x|, 0)`, with `log+ 0 = 0`.
pub fn log_plus(x: SignedLogValue) -> f64 {
    if x.is_zero() {
        0.0
    } else {
        x.logmag.max(0.0)
    }
}

/// Reduces one pool of log-magnitudes around its maximum.
fn pool_logsumexp(logs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = logs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    let s: f64 = logs.map(|l| (l - max).exp()).sum();
    max + s.ln()
}

/// Sum of a batch of signed values.
///
/// Positive and negative terms are pooled separately, each pool reduced
/// around its own maximum, and the two pools combined by one signed
/// [`slog_add`]. Cancellation error is thereby confined to that final step.
pub fn slog_sum<'a, I>(terms: I) -> SignedLogValue
where
    I: IntoIterator<Item = &'a SignedLogValue>,
    I::IntoIter: Clone,
{
    let it = terms.into_iter();
    let flagged = it.clone().any(|t| t.flagged);
    let pos = pool_logsumexp(it.clone().filter(|t| t.sign == Sign::Pos).map(|t| t.logmag));
    let neg = pool_logsumexp(it.filter(|t| t.sign == Sign::Neg).map(|t| t.logmag));
    slog_add(SignedLogValue::new(Sign::Pos, pos), SignedLogValue::new(Sign::Neg, neg)).with_flag(flagged)
}

/// Streaming log-sum-exp of positive terms, rescaled whenever a new maximum
/// arrives.
#[derive(Debug, Clone, Copy)]
pub struct LogAccumulator {
    max: f64,
    scaled: f64,
}

impl Default for LogAccumulator {
    fn default() -> Self {
        LogAccumulator {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }
}

impl LogAccumulator {
    pub fn push(&mut self, logmag: f64) {
        if logmag == f64::NEG_INFINITY {
            return;
        }
        if logmag > self.max {
            self.scaled = self.scaled * (self.max - logmag).exp() + 1.0;
            self.max = logmag;
        } else {
            self.scaled += (logmag - self.max).exp();
        }
    }

    /// Log of the accumulated sum; `-inf` when empty.
    pub fn log_sum(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// Running signed sum kept as a positive and a negative pool.
#[derive(Debug, Clone, Copy, Default)]
pub struct SignedAccumulator {
    pos: LogAccumulator,
    neg: LogAccumulator,
    flagged: bool,
}

impl SignedAccumulator {
    pub fn push(&mut self, term: SignedLogValue) {
        self.flagged |= term.flagged;
        match term.sign {
            Sign::Pos => self.pos.push(term.logmag),
            Sign::Neg => self.neg.push(term.logmag),
            Sign::Zero => {}
        }
    }

    pub fn value(&self) -> SignedLogValue {
        slog_add(
            SignedLogValue::new(Sign::Pos, self.pos.log_sum()),
            SignedLogValue::new(Sign::Neg, self.neg.log_sum()),
        )
        .with_flag(self.flagged)
    }
}
