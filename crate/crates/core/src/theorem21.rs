//! The deterministic maps behind the functional limit theorems.
//!
//! For a path `f` and atoms `(τ_k, y_k)`:
//!
//! * `G(f, ν)(t) = sup_{τ_k <= t} (f(τ_k) + y_k)`, or `f(0)` before the first
//!   atom;
//! * `F_n(f, ν)(t) = c_n^{-1} log+ |Σ_{τ_k <= t} ± exp(c_n (f(τ_k) + y_k))|`,
//!   or `f+(0)` before the first atom.
//!
//! `F_n(f_n, ν_n)` approaches `G(f_0, ν_0)` in J1 under conditions A1–A6,
//! which [`check_conditions`] screens on finite data.

use serde::{Deserialize, Serialize};

use crate::numerics::{Sign, SignedAccumulator, SignedLogValue};
use crate::paths::{fmt, j1_distance, point_match_distance, Atom, PointMeasure, StepPath};
use crate::{Error, Result};

/// Tolerance for the distinctness requirement on `f_0(τ) + y`.
pub const DISTINCT_TOLERANCE: f64 = 1e-12;

/// Atom with its sign, as read from configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedAtom {
    pub t: f64,
    pub y: f64,
    /// `+1` or `-1`.
    pub sign: i8,
}

/// Point measure whose atoms carry signs.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedAtomSequence {
    measure: PointMeasure,
    signs: Vec<Sign>,
}

impl SignedAtomSequence {
    pub fn new(horizon: f64, atoms: &[SignedAtom]) -> Result<Self> {
        let mut v = atoms.to_vec();
        v.sort_by(|a, b| a.t.total_cmp(&b.t));
        let signs = v
            .iter()
            .map(|a| match a.sign {
                1 => Ok(Sign::Pos),
                -1 => Ok(Sign::Neg),
                s => Err(Error::Domain(format!("atom sign must be +1 or -1, got {s}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let measure = PointMeasure::new(horizon, v.iter().map(|a| Atom { t: a.t, y: a.y }).collect())?;
        Ok(SignedAtomSequence { measure, signs })
    }

    /// All signs `+`.
    pub fn all_plus(measure: PointMeasure) -> Self {
        let signs = vec![Sign::Pos; measure.len()];
        SignedAtomSequence { measure, signs }
    }

    pub fn measure(&self) -> &PointMeasure {
        &self.measure
    }

    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    pub fn same_signs(&self) -> bool {
        self.signs.windows(2).all(|w| w[0] == w[1])
    }
}

fn check_within(f: &StepPath, pm: &PointMeasure) -> Result<()> {
    match pm.atoms().iter().find(|a| a.t > f.horizon()) {
        Some(a) => Err(Error::Domain(format!("atom at {} beyond the path horizon {}", a.t, f.horizon()))),
        None => Ok(()),
    }
}

/// Builds a step path from per-atom values, merging atoms that share a time.
/// `value_at(k)` is the path value once atoms `0..=k` have been absorbed.
fn atom_path(f: &StepPath, atoms: &[Atom], before: f64, mut value_at: impl FnMut(usize) -> f64) -> Result<StepPath> {
    let mut initial = before;
    let (mut times, mut values): (Vec<f64>, Vec<f64>) = (vec![], vec![]);
    for (k, a) in atoms.iter().enumerate() {
        let v = value_at(k);
        let last_of_time = atoms.get(k + 1).is_none_or(|b| b.t != a.t);
        if !last_of_time {
            continue;
        }
        if a.t == 0.0 {
            initial = v;
        } else {
            times.push(a.t);
            values.push(v);
        }
    }
    StepPath::new(f.horizon(), initial, times, values)
}

/// `G(f, ν)`.
pub fn g_functional(f: &StepPath, nu: &PointMeasure) -> Result<StepPath> {
    check_within(f, nu)?;
    let atoms = nu.atoms();
    let mut sup = f64::NEG_INFINITY;
    atom_path(f, atoms, f.initial(), |k| {
        sup = sup.max(f.eval_unchecked(atoms[k].t) + atoms[k].y);
        sup
    })
}

/// `F_n(f, ν)` at scale `c_n`, accumulated in signed log space.
pub fn fn_functional(f: &StepPath, nu: &SignedAtomSequence, c_n: f64) -> Result<StepPath> {
    if !(c_n > 0.0 && c_n.is_finite()) {
        return Err(Error::Parameter(format!("c_n must be positive, got {c_n}")));
    }
    let atoms = nu.measure.atoms();
    check_within(f, &nu.measure)?;
    let mut acc = SignedAccumulator::default();
    atom_path(f, atoms, f.initial().max(0.0), |k| {
        let a = atoms[k];
        acc.push(SignedLogValue::new(nu.signs[k], c_n * (f.eval_unchecked(a.t) + a.y)));
        let s = acc.value();
        if s.is_zero() {
            0.0
        } else {
            s.logmag().max(0.0) / c_n
        }
    })
}

/// Outcome of the all-plus sandwich `G <= F_n <= G+ + c_n^{-1} log+ #atoms`
/// on the merged jump grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SandwichOutcome {
    pub points: usize,
    pub violations: usize,
}

/// Checks the all-plus sandwich pointwise. A relative slack of `1e-12` absorbs
/// the rounding of `(c x) / c`.
pub fn sandwich_check(f: &StepPath, nu: &PointMeasure, c_n: f64) -> Result<SandwichOutcome> {
    let g = g_functional(f, nu)?;
    let fnp = fn_functional(f, &SignedAtomSequence::all_plus(nu.clone()), c_n)?;
    let mut grid = vec![0.0];
    grid.extend_from_slice(g.times());
    grid.extend_from_slice(fnp.times());
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut violations = 0;
    for &t in &grid {
        let (gv, fv) = (g.eval_unchecked(t), fnp.eval_unchecked(t));
        let count = nu.count_until(t) as f64;
        let upper = gv.max(0.0) + count.ln().max(0.0) / c_n;
        let slack = 1e-12 * (1.0 + gv.abs());
        if fv < gv - slack || fv > upper + slack {
            violations += 1;
        }
    }
    Ok(SandwichOutcome {
        points: grid.len(),
        violations,
    })
}

/// Inputs at one index `n` of the sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub n: u64,
    pub c_n: f64,
    pub f_n: StepPath,
    pub nu_n: SignedAtomSequence,
}

/// A finite stretch of the sequence `(f_n, ν_n, c_n)` together with the
/// target `(f_0, ν_0)` and the settings of the finite-data checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem21Instance {
    pub name: String,
    pub f0: StepPath,
    pub nu0: PointMeasure,
    pub stages: Vec<Stage>,
    /// Cells of the partition used as the A1 surrogate.
    pub partition_cells: usize,
    /// Magnitude cutoff for the point-measure distance.
    pub delta: f64,
    /// Small-atom cutoff for the positivity part of A3.
    pub gamma: f64,
    /// Upper bound for `c_n^{-1} log #atoms` at the largest `n`.
    pub a4_threshold: f64,
}

/// Deterministic drift shape `f_0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftShape {
    Zero,
    /// `f_0(t) = -t`.
    NegIdentity,
}

impl DriftShape {
    fn eval(self, t: f64) -> f64 {
        match self {
            DriftShape::Zero => 0.0,
            DriftShape::NegIdentity => -t,
        }
    }
}

/// Config-file description of an instance.
///
/// Stage `n` uses `c_n = c_scale n`, atoms of `ν_0` shifted to
/// `(τ + time_shift / n, y + size_shift / n)`, and either `f_n = f_0` or the
/// lattice path `f_n(t) = f_0([nt] / n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoInstanceSpec {
    pub name: String,
    #[serde(default = "one")]
    pub horizon: f64,
    pub drift: DriftShape,
    pub atoms: Vec<SignedAtom>,
    pub ns: Vec<u64>,
    #[serde(default = "one")]
    pub c_scale: f64,
    #[serde(default)]
    pub time_shift: f64,
    #[serde(default)]
    pub size_shift: f64,
    #[serde(default)]
    pub lattice_drift: bool,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    #[serde(default = "default_cells")]
    pub partition_cells: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_a4")]
    pub a4_threshold: f64,
}

fn one() -> f64 {
    1.0
}
fn default_grid() -> usize {
    10_000
}
fn default_cells() -> usize {
    5
}
fn default_delta() -> f64 {
    0.05
}
fn default_gamma() -> f64 {
    0.5
}
fn default_a4() -> f64 {
    0.05
}

impl DemoInstanceSpec {
    pub fn build(&self) -> Result<Theorem21Instance> {
        if self.ns.is_empty() {
            return Err(Error::Configuration("instance needs at least one n".into()));
        }
        let t_end = self.horizon;
        let f0 = StepPath::from_grid(t_end, self.grid_points, |t| self.drift.eval(t))?;
        let nu0 = PointMeasure::new(t_end, self.atoms.iter().map(|a| Atom { t: a.t, y: a.y }).collect())?;
        let stages = self
            .ns
            .iter()
            .map(|&n| {
                if n == 0 {
                    return Err(Error::Configuration("n must be positive".into()));
                }
                let nf = n as f64;
                let shifted: Vec<SignedAtom> = self
                    .atoms
                    .iter()
                    .map(|a| SignedAtom {
                        t: a.t + self.time_shift / nf,
                        y: a.y + self.size_shift / nf,
                        sign: a.sign,
                    })
                    .collect();
                let f_n = if self.lattice_drift {
                    StepPath::from_grid(t_end, n as usize, |t| self.drift.eval(t))?
                } else {
                    f0.clone()
                };
                Ok(Stage {
                    n,
                    c_n: self.c_scale * nf,
                    f_n,
                    nu_n: SignedAtomSequence::new(t_end, &shifted)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Theorem21Instance {
            name: self.name.clone(),
            f0,
            nu0,
            stages,
            partition_cells: self.partition_cells,
            delta: self.delta,
            gamma: self.gamma,
            a4_threshold: self.a4_threshold,
        })
    }
}

fn sa(t: f64, y: f64, sign: i8) -> SignedAtom {
    SignedAtom { t, y, sign }
}

/// Bundled instances.
pub mod bundled {
    use super::*;

    pub const DECAY_NS: [u64; 10] = [10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10_000];

    /// Six atoms with both signs, `f_0(t) = -t`, lattice drifts and atoms
    /// perturbed by `O(1/n)`.
    pub fn mixed_sign() -> DemoInstanceSpec {
        DemoInstanceSpec {
            name: "mixed_sign".into(),
            horizon: 1.0,
            drift: DriftShape::NegIdentity,
            atoms: vec![
                sa(0.05, 0.12, 1),
                sa(0.2, 1.0, 1),
                sa(0.35, 0.9, -1),
                sa(0.5, 2.0, -1),
                sa(0.7, 1.6, 1),
                sa(0.9, 2.5, 1),
            ],
            ns: DECAY_NS.to_vec(),
            c_scale: 1.0,
            time_shift: 0.5,
            size_shift: 0.3,
            lattice_drift: true,
            grid_points: 10_000,
            partition_cells: 5,
            delta: 0.05,
            gamma: 0.5,
            a4_threshold: 0.05,
        }
    }

    /// Five positive atoms held fixed, `f_n = f_0`.
    pub fn all_plus() -> DemoInstanceSpec {
        DemoInstanceSpec {
            name: "all_plus".into(),
            atoms: vec![
                sa(0.1, 0.8, 1),
                sa(0.3, 1.5, 1),
                sa(0.45, 1.2, 1),
                sa(0.6, 2.2, 1),
                sa(0.8, 1.9, 1),
            ],
            time_shift: 0.0,
            size_shift: 0.0,
            lattice_drift: false,
            ..mixed_sign()
        }
    }

    /// One atom; `F_n` and `G` coincide exactly.
    pub fn single_atom() -> DemoInstanceSpec {
        DemoInstanceSpec {
            name: "single_atom".into(),
            atoms: vec![sa(0.5, 1.0, 1)],
            time_shift: 0.0,
            size_shift: 0.0,
            lattice_drift: false,
            partition_cells: 1,
            ..mixed_sign()
        }
    }

    pub fn by_name(name: &str) -> Result<DemoInstanceSpec> {
        match name {
            "mixed_sign" | "mixed-sign" => Ok(mixed_sign()),
            "all_plus" | "all-plus" => Ok(all_plus()),
            "single_atom" | "single-atom" => Ok(single_atom()),
            _ => Err(Error::Configuration(format!(
                "unknown instance '{name}' (expected mixed_sign, all_plus or single_atom)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum ConditionStatus {
    Pass,
    Fail,
    UndecidableOnFiniteData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub condition: String,
    pub status: ConditionStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub instance: String,
    pub horizon: f64,
    pub gamma: f64,
    pub conditions: Vec<ConditionResult>,
}

impl ConditionReport {
    pub fn failures(&self) -> Vec<&ConditionResult> {
        self.conditions.iter().filter(|c| c.status == ConditionStatus::Fail).collect()
    }
}

fn result(name: &str, status: ConditionStatus, detail: String) -> ConditionResult {
    ConditionResult {
        condition: name.into(),
        status,
        detail,
    }
}

/// Verdict on a finite sequence expected to decrease towards zero.
fn decreasing(name: &str, what: &str, seq: &[f64]) -> ConditionResult {
    use ConditionStatus::*;
    let listed = seq.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(", ");
    if seq.iter().all(|&d| d == 0.0) {
        return result(name, Pass, format!("{what} identically 0"));
    }
    if seq.iter().any(|d| !d.is_finite()) {
        return result(name, Fail, format!("{what} not finite: [{listed}]"));
    }
    if seq.len() < 2 {
        return result(name, UndecidableOnFiniteData, format!("single stage, {what} = [{listed}]"));
    }
    let monotone = seq.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    let status = if monotone && seq[seq.len() - 1] < seq[0] { Pass } else { Fail };
    result(name, status, format!("{what}: [{listed}]"))
}

/// Screens conditions A1–A6 on `[0, T]` with small-atom cutoff `gamma`.
pub fn check_conditions(inst: &Theorem21Instance, horizon: f64, gamma: f64) -> Result<ConditionReport> {
    use ConditionStatus::*;
    if !(horizon > 0.0 && horizon <= inst.f0.horizon()) {
        return Err(Error::Domain(format!("T = {horizon} outside (0, {}]", inst.f0.horizon())));
    }
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
    }
    let atoms: Vec<Atom> = inst.nu0.atoms().iter().copied().filter(|a| a.t <= horizon).collect();
    let mut out = vec![];

    // A1: no atom at 0, and every partition cell charged.
    let cells = inst.partition_cells.max(1);
    let at_zero = atoms.iter().filter(|a| a.t == 0.0).count();
    let mut charged = vec![false; cells];
    for a in atoms.iter().filter(|a| a.t > 0.0) {
        charged[((a.t / horizon * cells as f64) as usize).min(cells - 1)] = true;
    }
    let empty: Vec<usize> = (0..cells).filter(|&i| !charged[i]).collect();
    out.push(if at_zero > 0 {
        result("A1", Fail, format!("{at_zero} atom(s) at t = 0"))
    } else if !empty.is_empty() {
        result("A1", Fail, format!("partition cells {empty:?} of {cells} carry no atom"))
    } else {
        result("A1", Pass, format!("surrogate: all {cells} partition cells charged, none at t = 0"))
    });

    // A2: distinct atom times.
    let ties = atoms.windows(2).filter(|w| w[0].t == w[1].t).count();
    out.push(if ties > 0 {
        result("A2", Fail, format!("{ties} repeated atom time(s)"))
    } else {
        result("A2", Pass, "atom times distinct".into())
    });

    // A3: needed only if some stage mixes signs.
    let mixed = inst.stages.iter().any(|s| !s.nu_n.same_signs());
    if !mixed {
        out.push(result("A3", Pass, "all signs equal within each stage; not required".into()));
    } else {
        let mut levels: Vec<f64> = atoms.iter().map(|a| inst.f0.eval_unchecked(a.t) + a.y).collect();
        levels.sort_by(f64::total_cmp);
        let close = levels.windows(2).filter(|w| w[1] - w[0] <= DISTINCT_TOLERANCE).count();
        let small: Vec<f64> = atoms
            .iter()
            .filter(|a| a.y <= gamma)
            .map(|a| inst.f0.eval_unchecked(a.t) + a.y)
            .collect();
        let sup_small = small.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.push(if close > 0 {
            result("A3", Fail, format!("{close} pair(s) of f0(τ) + y within {DISTINCT_TOLERANCE:e}"))
        } else if small.is_empty() {
            result("A3", UndecidableOnFiniteData, format!("levels distinct; no atom with y <= {gamma}"))
        } else if sup_small > 0.0 {
            result("A3", Pass, format!("levels distinct; sup over y <= {gamma} is {sup_small:.6}"))
        } else {
            result("A3", Fail, format!("sup over y <= {gamma} is {sup_small:.6}, not positive"))
        });
    }

    // A4: c_n grows and c_n^{-1} log #atoms vanishes.
    let c_increasing = inst.stages.windows(2).all(|w| w[1].c_n > w[0].c_n);
    let ratios: Vec<f64> = inst
        .stages
        .iter()
        .map(|s| (s.nu_n.measure().count_until(horizon).max(1) as f64).ln() / s.c_n)
        .collect();
    let last = ratios.last().copied().unwrap_or(f64::INFINITY);
    out.push(if !c_increasing {
        result("A4", Fail, "c_n not increasing".into())
    } else if last > inst.a4_threshold {
        result("A4", Fail, format!("c_n^-1 log #atoms = {last:.3e} above {}", inst.a4_threshold))
    } else {
        let mut r = decreasing("A4", "c_n^-1 log #atoms", &ratios);
        if r.status == Fail && ratios.windows(2).all(|w| w[1] <= w[0]) {
            r.status = Pass;
        }
        r
    });

    // A5, A6: distances to the limit inputs decrease.
    let f0 = inst.f0.restrict(horizon)?;
    let d5 = inst
        .stages
        .iter()
        .map(|s| j1_distance(&s.f_n.restrict(horizon)?, &f0))
        .collect::<Result<Vec<_>>>()?;
    out.push(decreasing("A5", "J1(f_n, f_0)", &d5));
    let nu0 = PointMeasure::new(horizon, atoms.clone())?;
    let d6 = inst
        .stages
        .iter()
        .map(|s| {
            let within = s.nu_n.measure().atoms().iter().copied().filter(|a| a.t <= horizon).collect();
            point_match_distance(&PointMeasure::new(horizon, within)?, &nu0, inst.delta)
        })
        .collect::<Result<Vec<_>>>()?;
    out.push(decreasing("A6", &format!("matching distance above {}", inst.delta), &d6));

    Ok(ConditionReport {
        instance: inst.name.clone(),
        horizon,
        gamma,
        conditions: out,
    })
}

/// Runs [`check_conditions`] at several cutoffs. Only A3 depends on `gamma`;
/// a finite sweep cannot certify "for all small enough gamma".
pub fn check_conditions_sweep(inst: &Theorem21Instance, horizon: f64, gammas: &[f64]) -> Result<Vec<ConditionReport>> {
    gammas.iter().map(|&g| check_conditions(inst, horizon, g)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub n: u64,
    pub c_n: f64,
    pub d_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub instance: String,
    pub horizon: f64,
    pub rows: Vec<DecayRow>,
}

impl DecayTable {
    /// CSV `n,c_n,d_n`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(["n", "c_n", "d_n"])?;
        for r in &self.rows {
            w.write_record([r.n.to_string(), fmt(r.c_n), fmt(r.d_n)])?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?).map_err(|e| Error::Io(e.to_string()))
    }
}

/// `d_n = J1(F_n(f_n, ν_n), G(f_0, ν_0))` on `[0, T]` for every stage.
/// Refuses when a condition check fails.
pub fn convergence_demo(inst: &Theorem21Instance, horizon: f64) -> Result<DecayTable> {
    let report = check_conditions(inst, horizon, inst.gamma)?;
    let failed = report.failures();
    if !failed.is_empty() {
        let msg = failed
            .iter()
            .map(|c| format!("{}: {}", c.condition, c.detail))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::ConditionFailed(msg));
    }
    let g = g_functional(&inst.f0, &inst.nu0)?.restrict(horizon)?;
    let rows = inst
        .stages
        .iter()
        .map(|s| {
            let f = fn_functional(&s.f_n, &s.nu_n, s.c_n)?.restrict(horizon)?;
            Ok(DecayRow {
                n: s.n,
                c_n: s.c_n,
                d_n: j1_distance(&f, &g)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecayTable {
        instance: inst.name.clone(),
        horizon,
        rows,
    })
}
