//! Limit extremal processes driven by Poisson random measures, and their
//! closed-form marginal distribution functions.
//!
//! The measure `N` on `[0, T] x (0, ∞]` has mean measure `Leb x μ` with
//! `μ((x, ∞]) = c x^{-α}`. Only atoms with magnitude above a truncation level
//! `γ` are sampled.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::paths::{Atom, PointMeasure, StepPath};
use crate::rng::{open_unit, stream_rng};
use crate::{Error, Result};

/// Default number of output grid steps for the piecewise-linear forward limit.
pub const DEFAULT_GRID_POINTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrmSpec {
    pub c: f64,
    pub alpha: f64,
    pub horizon: f64,
    pub gamma: f64,
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
}

impl PrmSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::Domain(format!(
                "truncation level must be positive, got {} (the untruncated measure has infinitely many atoms)",
                self.gamma
            )));
        }
        for (name, v) in [("c", self.c), ("alpha", self.alpha), ("T", self.horizon)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Expected atom count `T c γ^{-α}`.
    pub fn mean_count(&self) -> f64 {
        self.horizon * self.c * self.gamma.powf(-self.alpha)
    }
}

/// Samples the truncated measure from the spec's own stream.
pub fn sample_prm(spec: &PrmSpec) -> Result<PointMeasure> {
    let mut rng = stream_rng(spec.seed, spec.stream);
    sample_prm_with(spec, &mut rng)
}

/// Samples the truncated measure from `rng`: a Poisson count, uniform times
/// and Pareto magnitudes `γ U^{-1/α}`.
pub fn sample_prm_with<R: Rng + ?Sized>(spec: &PrmSpec, rng: &mut R) -> Result<PointMeasure> {
    spec.validate()?;
    let poisson = Poisson::new(spec.mean_count()).map_err(|e| Error::Parameter(format!("atom count law: {e}")))?;
    let count = poisson.sample(rng) as usize;
    let atoms = (0..count)
        .map(|_| {
            let t = spec.horizon * rng.random::<f64>();
            let y = spec.gamma * open_unit(rng).powf(-1.0 / spec.alpha);
            Atom { t, y }
        })
        .collect();
    PointMeasure::new(spec.horizon, atoms)
}

/// The three limit processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitKind {
    /// `sup_{t_k <= t} (-t_k + j_k)`.
    BackwardThm11,
    /// `-t + sup_{t_k <= t} (t_k + j_k)`.
    ForwardThm11,
    /// `sup_{t_k <= t} j_k`.
    SupThm15,
}

impl LimitKind {
    pub fn name(self) -> &'static str {
        match self {
            LimitKind::BackwardThm11 => "backward_thm11",
            LimitKind::ForwardThm11 => "forward_thm11",
            LimitKind::SupThm15 => "sup_thm15",
        }
    }
}

fn check_atoms(pm: &PointMeasure, horizon: f64) -> Result<()> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    if let Some(a) = pm.atoms().iter().find(|a| a.t > horizon) {
        return Err(Error::Domain(format!("atom at t = {} lies beyond T = {horizon}", a.t)));
    }
    Ok(())
}

/// Running-sup key of an atom for each kind.
fn key(kind: LimitKind, a: &Atom) -> f64 {
    match kind {
        LimitKind::BackwardThm11 => a.y - a.t,
        LimitKind::ForwardThm11 => a.y + a.t,
        LimitKind::SupThm15 => a.y,
    }
}

/// Value at time `t` of the limit process built from `pm`.
///
/// The untruncated measure has atoms of vanishing size arbitrarily close to
/// every time, which makes both first-theorem processes nonnegative; the
/// truncated version is therefore clamped at zero, leaving an error of at
/// most `γ`.
pub fn extremal_value(pm: &PointMeasure, kind: LimitKind, t: f64) -> f64 {
    let k = pm.count_until(t);
    let sup = pm.atoms()[..k].iter().map(|a| key(kind, a)).fold(f64::NEG_INFINITY, f64::max);
    match kind {
        LimitKind::BackwardThm11 | LimitKind::SupThm15 => sup.max(0.0),
        LimitKind::ForwardThm11 => (sup - t).max(0.0),
    }
}

/// Limit path on `[0, T]` with the default forward grid.
pub fn extremal_path(pm: &PointMeasure, kind: LimitKind, horizon: f64) -> Result<StepPath> {
    extremal_path_with_grid(pm, kind, horizon, DEFAULT_GRID_POINTS)
}

/// Limit path on `[0, T]`. The jump-only kinds are exact step paths; the
/// forward kind is piecewise linear and is sampled on the union of the atom
/// times and a uniform grid of `grid_points` steps.
pub fn extremal_path_with_grid(pm: &PointMeasure, kind: LimitKind, horizon: f64, grid_points: usize) -> Result<StepPath> {
    check_atoms(pm, horizon)?;
    let atoms = pm.atoms();
    let initial = extremal_value(pm, kind, 0.0);
    match kind {
        LimitKind::BackwardThm11 | LimitKind::SupThm15 => {
            let (mut times, mut values) = (vec![], vec![]);
            let mut cur = initial;
            for a in atoms.iter().filter(|a| a.t > 0.0) {
                let v = cur.max(key(kind, a));
                if v > cur {
                    // Atoms sharing a time collapse into one jump.
                    if times.last() == Some(&a.t) {
                        *values.last_mut().expect("nonempty") = v;
                    } else {
                        times.push(a.t);
                        values.push(v);
                    }
                    cur = v;
                }
            }
            StepPath::new(horizon, initial, times, values)
        }
        LimitKind::ForwardThm11 => {
            if grid_points == 0 {
                return Err(Error::Domain("grid needs at least one step".into()));
            }
            let mut grid: Vec<f64> = (1..=grid_points).map(|k| horizon * k as f64 / grid_points as f64).collect();
            grid.extend(atoms.iter().map(|a| a.t).filter(|&t| t > 0.0));
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            let mut sup = f64::NEG_INFINITY;
            let mut k = 0;
            let values = grid
                .iter()
                .map(|&t| {
                    while k < atoms.len() && atoms[k].t <= t {
                        sup = sup.max(key(kind, &atoms[k]));
                        k += 1;
                    }
                    (sup - t).max(0.0)
                })
                .collect();
            StepPath::new(horizon, initial, grid, values)
        }
    }
}

/// One draw of the limit marginal at time `u`: a truncated measure on
/// `[0, u]` followed by [`extremal_value`].
pub fn sample_limit_marginal(kind: LimitKind, c: f64, alpha: f64, u: f64, gamma: f64, seed: u64, stream: u64) -> Result<f64> {
    let spec = PrmSpec {
        c,
        alpha,
        horizon: u,
        gamma,
        seed,
        stream,
    };
    let pm = sample_prm(&spec)?;
    Ok(extremal_value(&pm, kind, u))
}

/// Truncation level one tenth of the smallest positive abscissa.
pub fn default_gamma(xs: &[f64]) -> f64 {
    0.1 * xs.iter().copied().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min).min(1.0)
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive, got {v}")))
    }
}

/// `P{backward limit at u <= x} = (x / (x + u))^{c/a}`.
pub fn cdf_thm11(x: f64, u: f64, c: f64, a: f64) -> Result<f64> {
    check_positive("u", u)?;
    check_positive("c", c)?;
    check_positive("a", a)?;
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("x must be nonnegative, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok((-(c / a) * (u / x).ln_1p()).exp())
}

/// `P{sup_{t_k <= u} j_k <= x} = exp(-u x^{-α})`.
pub fn cdf_thm15(x: f64, u: f64, alpha: f64) -> Result<f64> {
    check_positive("x", x)?;
    check_positive("u", u)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Parameter(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    Ok((-u * x.powf(-alpha)).exp())
}

/// Mean number of atoms in `{(t, y) : t <= u, y - t > x}` for the measure
/// with `μ((y, ∞]) = (c/a) / y`, i.e. `(c/a) log((x + u) / x)`.
pub fn intensity_thm11(x: f64, u: f64, c: f64, a: f64) -> Result<f64> {
    check_positive("x", x)?;
    check_positive("u", u)?;
    check_positive("c", c)?;
    check_positive("a", a)?;
    Ok(c / a * (u / x).ln_1p())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::verify::{ks_statistic, ks_two_sample};
    use approx::assert_relative_eq;

    fn atoms_13_21() -> PointMeasure {
        PointMeasure::new(3.0, vec![Atom { t: 1.0, y: 3.0 }, Atom { t: 2.0, y: 1.0 }]).unwrap()
    }

    #[test]
    fn path_examples() {
        let pm = atoms_13_21();
        let b = extremal_path(&pm, LimitKind::BackwardThm11, 3.0).unwrap();
        assert_eq!(b.eval(0.5).unwrap(), 0.0);
        assert_eq!(b.eval(1.0).unwrap(), 2.0);
        assert_eq!(b.eval(3.0).unwrap(), 2.0);
        assert_eq!(b.jump_count(), 1);
        let s = extremal_path(&pm, LimitKind::SupThm15, 3.0).unwrap();
        assert_eq!(s.eval(0.99).unwrap(), 0.0);
        assert_eq!(s.eval(2.5).unwrap(), 3.0);
        let f = extremal_path(&pm, LimitKind::ForwardThm11, 3.0).unwrap();
        // Grid representation: error at most one grid step, 3e-4.
        assert_relative_eq!(f.eval(2.5).unwrap(), 1.5, epsilon = 3e-4);
        assert_relative_eq!(extremal_value(&pm, LimitKind::ForwardThm11, 2.5), 1.5, epsilon = 1e-12);
        assert!(matches!(extremal_path(&pm, LimitKind::SupThm15, 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn forward_path_is_exact_on_its_grid() {
        let spec = PrmSpec {
            c: 1.0,
            alpha: 1.0,
            horizon: 2.0,
            gamma: 0.05,
            seed: 3,
            stream: 0,
        };
        let pm = sample_prm(&spec).unwrap();
        let f = extremal_path_with_grid(&pm, LimitKind::ForwardThm11, 2.0, 500).unwrap();
        for &t in f.times() {
            assert_relative_eq!(f.eval(t).unwrap(), extremal_value(&pm, LimitKind::ForwardThm11, t), epsilon = 1e-12);
        }
    }

    #[test]
    fn closed_forms() {
        assert_relative_eq!(cdf_thm11(1.0, 1.0, 1.0, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(cdf_thm11(0.0, 1.0, 1.0, 1.0).unwrap(), 0.0);
        assert_relative_eq!(cdf_thm11(3.0, 1.0, 2.0, 1.0).unwrap(), 0.5625, epsilon = 1e-15);
        assert!(matches!(cdf_thm11(1.0, 0.0, 1.0, 1.0), Err(Error::Domain(_))));
        assert_relative_eq!(cdf_thm15(1.0, 1.0, 1.0).unwrap(), (-1f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(cdf_thm15(4.0, 2.0, 0.5).unwrap(), (-1f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(cdf_thm15(1e300, 1.0, 0.5).unwrap(), 1.0);
        assert!(matches!(cdf_thm15(0.0, 1.0, 0.5), Err(Error::Domain(_))));
        assert_relative_eq!(intensity_thm11(1.0, 3.0, 2.0, 1.0).unwrap(), 2.0 * 4f64.ln(), epsilon = 1e-14);
        assert!(intensity_thm11(1.0, 1e-300, 1.0, 1.0).unwrap() < 1e-299);
        assert!(matches!(intensity_thm11(0.0, 1.0, 1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn cdf_is_poisson_void_probability() {
        for &(x, u, ca) in &[(0.3, 1.0, 1.0), (2.0, 0.5, 3.0), (10.0, 7.0, 0.25)] {
            let i = intensity_thm11(x, u, ca, 1.0).unwrap();
            assert_relative_eq!((-i).exp(), cdf_thm11(x, u, ca, 1.0).unwrap(), max_relative = 1e-14);
        }
    }

    #[test]
    fn cdfs_are_monotone() {
        let mut prev = (0.0, 0.0);
        for k in 1..2000 {
            let x = k as f64 * 0.01;
            let a = cdf_thm11(x, 1.3, 2.0, 1.0).unwrap();
            let b = cdf_thm15(x, 1.3, 0.7).unwrap();
            assert!(a >= prev.0 && b >= prev.1 && a <= 1.0 && b <= 1.0);
            prev = (a, b);
        }
    }

    #[test]
    fn spec_validation_and_mean_count() {
        let mut spec = PrmSpec {
            c: 1.0,
            alpha: 1.0,
            horizon: 2.0,
            gamma: 0.5,
            seed: 1,
            stream: 0,
        };
        assert_eq!(spec.mean_count(), 4.0);
        assert_eq!(sample_prm(&spec).unwrap(), sample_prm(&spec).unwrap());
        spec.gamma = 0.0;
        assert!(matches!(sample_prm(&spec), Err(Error::Domain(_))));
    }

    #[test]
    fn magnitudes_are_pareto() {
        let spec = PrmSpec {
            c: 50.0,
            alpha: 3.0,
            horizon: 1.0,
            gamma: 2.0,
            seed: 17,
            stream: 0,
        };
        let mut rng = stream_rng(17, 0);
        let mut ys = vec![];
        while ys.len() < 10_000 {
            ys.extend(sample_prm_with(&spec, &mut rng).unwrap().atoms().iter().map(|a| a.y));
        }
        let d = ks_statistic(&ys, |x| if x < 2.0 { 0.0 } else { 1.0 - (2.0 / x).powi(3) }).unwrap();
        assert!(d < 1.63 / (ys.len() as f64).sqrt(), "{d}");
    }

    #[test]
    fn truncation_does_not_affect_high_levels() {
        let spec = PrmSpec {
            c: 1.0,
            alpha: 1.0,
            horizon: 1.0,
            gamma: 0.01,
            seed: 5,
            stream: 0,
        };
        for stream in 0..200 {
            let fine = sample_prm(&PrmSpec { stream, ..spec.clone() }).unwrap();
            let coarse = PointMeasure::new(1.0, fine.atoms().iter().copied().filter(|a| a.y > 0.1).collect()).unwrap();
            for kind in [LimitKind::BackwardThm11, LimitKind::SupThm15] {
                let (a, b) = (extremal_value(&fine, kind, 1.0), extremal_value(&coarse, kind, 1.0));
                if a > 0.1 || b > 0.1 {
                    assert_eq!(a, b);
                }
            }
        }
    }

    #[test]
    fn forward_and_backward_marginals_agree() {
        let r = 2000;
        let back: Vec<f64> = (0..r)
            .map(|s| sample_limit_marginal(LimitKind::BackwardThm11, 1.0, 1.0, 1.0, 1e-3, 8, s).unwrap())
            .collect();
        let fwd: Vec<f64> = (0..r)
            .map(|s| sample_limit_marginal(LimitKind::ForwardThm11, 1.0, 1.0, 1.0, 1e-3, 9, s).unwrap())
            .collect();
        let d = ks_two_sample(&back, &fwd).unwrap();
        assert!(d < 1.63 * (2.0 / r as f64).sqrt(), "{d}");
        let d1 = ks_statistic(&back, |x| cdf_thm11(x.max(0.0), 1.0, 1.0, 1.0).unwrap()).unwrap();
        assert!(d1 < 1.63 / (r as f64).sqrt(), "{d1}");
    }

    #[test]
    fn default_gamma_rule() {
        assert_relative_eq!(default_gamma(&[0.5, 1.0, 2.0]), 0.05);
        assert_relative_eq!(default_gamma(&[]), 0.1);
    }
}
