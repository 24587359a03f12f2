//! Càdlàg step paths on `[0, T]`, finite point measures and the distances
//! used to compare them.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Right-continuous piecewise-constant function on `[0, T]`.
///
/// `values[i]` holds on `[times[i], times[i + 1])`; `initial` holds on
/// `[0, times[0])`. Jump times are strictly increasing in `(0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepPath {
    horizon: f64,
    initial: f64,
    times: Vec<f64>,
    values: Vec<f64>,
}

fn gap(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs()
    }
}

fn same_horizon(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() <= 1e-12 * a.abs().max(b.abs()) {
        Ok(())
    } else {
        Err(Error::Domain(format!("horizon mismatch: {a} vs {b}")))
    }
}

impl StepPath {
    pub fn new(horizon: f64, initial: f64, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
        }
        if times.len() != values.len() {
            return Err(Error::Domain("times and values differ in length".into()));
        }
        let mut prev = 0.0;
        for &t in &times {
            if !(t > prev && t <= horizon) {
                return Err(Error::Domain(format!("jump times must increase strictly within (0, T], got {t}")));
            }
            prev = t;
        }
        if initial.is_nan() || values.iter().any(|v| v.is_nan()) {
            return Err(Error::Domain("path values must not be NaN".into()));
        }
        Ok(StepPath {
            horizon,
            initial,
            times,
            values,
        })
    }

    pub fn constant(horizon: f64, value: f64) -> Result<Self> {
        Self::new(horizon, value, vec![], vec![])
    }

    /// Samples `f` on the uniform grid `k T / points`, `k = 0..=points`, as a
    /// step path. Used to represent continuous functions.
    pub fn from_grid(horizon: f64, points: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if points == 0 {
            return Err(Error::Domain("grid needs at least one step".into()));
        }
        let times: Vec<f64> = (1..=points).map(|k| horizon * k as f64 / points as f64).collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(horizon, f(0.0), times, values)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn initial(&self) -> f64 {
        self.initial
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn jump_count(&self) -> usize {
        self.times.len()
    }

    /// Right-continuous value at `t`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::Domain(format!("t = {t} outside [0, {}]", self.horizon)));
        }
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            self.initial
        } else {
            self.values[k - 1]
        }
    }

    /// Supremum over `[0, T]`.
    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(self.initial, f64::max)
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> StepPath {
        StepPath {
            horizon: self.horizon,
            initial: f(self.initial),
            times: self.times.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Restriction to `[0, horizon]`, `horizon <= T`.
    pub fn restrict(&self, horizon: f64) -> Result<StepPath> {
        if !(horizon > 0.0 && horizon <= self.horizon) {
            return Err(Error::Domain(format!("cannot restrict to {horizon}")));
        }
        let k = self.times.partition_point(|&s| s <= horizon);
        Ok(StepPath {
            horizon,
            initial: self.initial,
            times: self.times[..k].to_vec(),
            values: self.values[..k].to_vec(),
        })
    }

    /// Drops jumps that do not change the value.
    pub fn compressed(&self) -> StepPath {
        let mut times = Vec::with_capacity(self.times.len());
        let mut values = Vec::with_capacity(self.values.len());
        let mut cur = self.initial;
        for (&t, &v) in self.times.iter().zip(&self.values) {
            if v != cur {
                times.push(t);
                values.push(v);
                cur = v;
            }
        }
        StepPath {
            horizon: self.horizon,
            initial: self.initial,
            times,
            values,
        }
    }

    /// CSV with a `# horizon=T` comment line, a `t,value` header, the
    /// initial value at `t = 0` and one row per jump.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(["t", "value"])?;
        w.write_record([fmt(0.0), fmt(self.initial)])?;
        for (&t, &v) in self.times.iter().zip(&self.values) {
            w.write_record([fmt(t), fmt(v)])?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?)
            .map_err(|e| Error::Io(e.to_string()))?;
        Ok(format!("# horizon={}\n{body}", fmt(self.horizon)))
    }

    pub fn from_csv(text: &str) -> Result<StepPath> {
        let (horizon, rows) = read_csv_rows(text, ["t", "value"])?;
        let mut it = rows.into_iter();
        let (t0, initial) = it.next().ok_or_else(|| Error::Io("path CSV has no rows".into()))?;
        if t0 != 0.0 {
            return Err(Error::Io("first path row must be at t = 0".into()));
        }
        let (times, values) = it.unzip();
        StepPath::new(horizon, initial, times, values)
    }
}

pub(crate) fn fmt(x: f64) -> String {
    format!("{x:?}")
}

fn read_csv_rows(text: &str, header: [&str; 2]) -> Result<(f64, Vec<(f64, f64)>)> {
    let mut lines = text.splitn(2, '\n');
    let first = lines.next().unwrap_or_default().trim();
    let horizon = first
        .strip_prefix('#')
        .and_then(|s| s.trim().strip_prefix("horizon="))
        .ok_or_else(|| Error::Io("missing '# horizon=' header line".into()))?
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::Io(e.to_string()))?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(lines.next().unwrap_or_default().as_bytes());
    let hdr = rdr.headers()?.clone();
    if hdr.len() != 2 || hdr[0].trim() != header[0] || hdr[1].trim() != header[1] {
        return Err(Error::Io(format!("expected header {},{}", header[0], header[1])));
    }
    let mut rows = vec![];
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Io(format!("{s}: {e}")));
        rows.push((parse(&rec[0])?, parse(&rec[1])?));
    }
    Ok((horizon, rows))
}

/// `sup_{t in [0,T]} |f(t) - g(t)|`, exact over the merged jump grid.
pub fn uniform_distance(f: &StepPath, g: &StepPath) -> Result<f64> {
    same_horizon(f.horizon, g.horizon)?;
    let mut d = gap(f.initial, g.initial);
    let (mut i, mut j) = (0, 0);
    let (mut fv, mut gv) = (f.initial, g.initial);
    while i < f.times.len() || j < g.times.len() {
        let tf = f.times.get(i).copied().unwrap_or(f64::INFINITY);
        let tg = g.times.get(j).copied().unwrap_or(f64::INFINITY);
        let t = tf.min(tg);
        if tf == t {
            fv = f.values[i];
            i += 1;
        }
        if tg == t {
            gv = g.values[j];
            j += 1;
        }
        d = d.max(gap(fv, gv));
    }
    Ok(d)
}

/// Cell grid for the J1 feasibility sweep.
///
/// Rows are the constancy intervals of `f` (in the time of `f`), columns those
/// of `g`. A time change is a monotone curve from `(0, 0)` to `(T, T)` through
/// cells whose values differ by at most `eps`, staying in the band
/// `|f-time - g-time| <= eps`. Jumps exactly at `T` are handled separately
/// since `λ(T) = T` pins them.
struct FreeSpace {
    s: Vec<f64>,
    fv: Vec<f64>,
    r: Vec<f64>,
    gv: Vec<f64>,
    end_gap: f64,
}

fn interval(lo: f64, hi: f64) -> Option<(f64, f64)> {
    (lo <= hi).then_some((lo, hi))
}

impl FreeSpace {
    fn new(f: &StepPath, g: &StepPath) -> Self {
        let t = f.horizon;
        let split = |p: &StepPath| {
            let mut b = vec![0.0];
            let mut v = vec![p.initial];
            for (&s, &val) in p.times.iter().zip(&p.values) {
                if s < t {
                    b.push(s);
                    v.push(val);
                }
            }
            b.push(t);
            (b, v)
        };
        let (s, fv) = split(f);
        let (r, gv) = split(g);
        FreeSpace {
            s,
            fv,
            r,
            gv,
            end_gap: gap(f.eval_unchecked(t), g.eval_unchecked(t)),
        }
    }

    fn feasible(&self, eps: f64) -> bool {
        if self.end_gap > eps {
            return false;
        }
        let p = self.fv.len() - 1;
        let q = self.gv.len() - 1;
        let (s, r) = (&self.s, &self.r);
        let mut bottom_cur: Vec<Option<f64>> = vec![None; q + 1];
        let mut diag_cur = vec![false; q + 1];
        let mut bottom_next: Vec<Option<f64>> = vec![None; q + 1];
        let mut diag_next = vec![false; q + 1];
        let mut written_cur: Vec<usize> = vec![];
        let mut written_next: Vec<usize> = vec![];

        for i in 0..=p {
            let j_lo = r[1..].partition_point(|&x| x < s[i] - eps);
            let j_hi = match r[..=q].partition_point(|&x| x <= s[i + 1] + eps) {
                0 => return false,
                k => k - 1,
            };
            let mut carry: Option<f64> = None;
            let mut any = false;
            for j in j_lo..=j_hi.min(q) {
                let mut left = carry.take();
                let mut bottom = bottom_cur[j];
                if diag_cur[j] {
                    left = Some(s[i]);
                    bottom = Some(r[j]);
                }
                if i == 0 && j == 0 {
                    left = Some(0.0);
                    bottom = Some(0.0);
                }
                if left.is_none() && bottom.is_none() {
                    continue;
                }
                if gap(self.fv[i], self.gv[j]) > eps {
                    continue;
                }
                if i == p && j == q {
                    return true;
                }
                any = true;
                // right edge, g-time r[j+1]
                if let Some((lo, hi)) = interval(s[i].max(r[j + 1] - eps), s[i + 1].min(r[j + 1] + eps)) {
                    let lo = match (bottom, left) {
                        (Some(_), _) => Some(lo),
                        (None, Some(a)) => interval(lo.max(a), hi).map(|x| x.0),
                        _ => None,
                    };
                    carry = lo;
                }
                // top edge, f-time s[i+1]
                if i < p {
                    if let Some((lo, hi)) = interval(r[j].max(s[i + 1] - eps), r[j + 1].min(s[i + 1] + eps)) {
                        let lo = match (left, bottom) {
                            (Some(_), _) => Some(lo),
                            (None, Some(c)) => interval(lo.max(c), hi).map(|x| x.0),
                            _ => None,
                        };
                        if let Some(lo) = lo {
                            bottom_next[j] = Some(bottom_next[j].map_or(lo, |b: f64| b.min(lo)));
                            written_next.push(j);
                        }
                    }
                    if j < q && (r[j + 1] - s[i + 1]).abs() <= eps {
                        diag_next[j + 1] = true;
                        written_next.push(j + 1);
                    }
                }
            }
            if !any {
                return false;
            }
            for &k in &written_cur {
                bottom_cur[k] = None;
                diag_cur[k] = false;
            }
            std::mem::swap(&mut bottom_cur, &mut bottom_next);
            std::mem::swap(&mut diag_cur, &mut diag_next);
            std::mem::swap(&mut written_cur, &mut written_next);
            written_next.clear();
        }
        false
    }
}

/// Skorokhod J1 distance on `[0, T]`,
/// `inf_λ max(sup |λ(t) - t|, sup |f(λ(t)) - g(t)|)`.
///
/// For step paths the optimal time change only needs to decide, for each
/// jump, whether it is aligned with a jump of the other path or placed inside
/// one of its constancy intervals. Feasibility of a level `eps` is a monotone
/// reachability sweep over the grid of constancy-interval pairs; the distance
/// is the least feasible level, located by bisection on `[0, uniform]`.
pub fn j1_distance(f: &StepPath, g: &StepPath) -> Result<f64> {
    same_horizon(f.horizon, g.horizon)?;
    let f = f.compressed();
    let mut g = g.compressed();
    g.horizon = f.horizon;
    let upper = uniform_distance(&f, &g)?;
    if upper == 0.0 || !upper.is_finite() {
        return Ok(upper);
    }
    let fs = FreeSpace::new(&f, &g);
    if fs.feasible(0.0) {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, upper);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi {
            break;
        }
        if fs.feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Atom `(t, y)` of a point measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub t: f64,
    pub y: f64,
}

/// Finite point measure on `[0, T] x (0, ∞)`, atoms sorted by time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMeasure {
    horizon: f64,
    atoms: Vec<Atom>,
}

impl PointMeasure {
    pub fn new(horizon: f64, mut atoms: Vec<Atom>) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
        }
        for a in &atoms {
            if !(0.0..=horizon).contains(&a.t) {
                return Err(Error::Domain(format!("atom time {} outside [0, {horizon}]", a.t)));
            }
            if !(a.y > 0.0) || a.y.is_nan() {
                return Err(Error::Domain(format!("atom magnitude must be positive, got {}", a.y)));
            }
        }
        atoms.sort_by(|a, b| a.t.total_cmp(&b.t));
        Ok(PointMeasure { horizon, atoms })
    }

    pub fn empty(horizon: f64) -> Result<Self> {
        Self::new(horizon, vec![])
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Number of atoms with `t <= time`.
    pub fn count_until(&self, time: f64) -> usize {
        self.atoms.partition_point(|a| a.t <= time)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(["t", "y"])?;
        for a in &self.atoms {
            w.write_record([fmt(a.t), fmt(a.y)])?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?)
            .map_err(|e| Error::Io(e.to_string()))?;
        Ok(format!("# horizon={}\n{body}", fmt(self.horizon)))
    }

    pub fn from_csv(text: &str) -> Result<PointMeasure> {
        let (horizon, rows) = read_csv_rows(text, ["t", "y"])?;
        PointMeasure::new(horizon, rows.into_iter().map(|(t, y)| Atom { t, y }).collect())
    }
}

/// Kuhn augmenting-path test for a perfect matching using edges with cost at
/// most `limit`.
fn has_perfect_matching(cost: &[Vec<f64>], limit: f64) -> bool {
    let n = cost.len();
    let mut match_right: Vec<Option<usize>> = vec![None; n];
    fn augment(u: usize, cost: &[Vec<f64>], limit: f64, seen: &mut [bool], mr: &mut [Option<usize>]) -> bool {
        for v in 0..cost.len() {
            if cost[u][v] <= limit && !seen[v] {
                seen[v] = true;
                if mr[v].is_none_or(|w| augment(w, cost, limit, seen, mr)) {
                    mr[v] = Some(u);
                    return true;
                }
            }
        }
        false
    }
    (0..n).all(|u| {
        let mut seen = vec![false; n];
        augment(u, cost, limit, &mut seen, &mut match_right)
    })
}

/// Bottleneck matching distance between the atoms with `y > delta`.
///
/// Infinite when the restricted counts differ; otherwise the least, over
/// bijections, of the largest `|Δt| + |Δy|` among matched pairs.
pub fn point_match_distance(a: &PointMeasure, b: &PointMeasure, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("delta must be positive, got {delta}")));
    }
    let xs: Vec<Atom> = a.atoms.iter().copied().filter(|x| x.y > delta).collect();
    let ys: Vec<Atom> = b.atoms.iter().copied().filter(|x| x.y > delta).collect();
    if xs.len() != ys.len() {
        return Ok(f64::INFINITY);
    }
    if xs.is_empty() {
        return Ok(0.0);
    }
    let cost: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| ys.iter().map(|y| gap(x.t, y.t) + gap(x.y, y.y)).collect())
        .collect();
    let mut candidates: Vec<f64> = cost.iter().flatten().copied().collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let (mut lo, mut hi) = (0, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if has_perfect_matching(&cost, candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(candidates[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn jump(at: f64, from: f64, to: f64) -> StepPath {
        StepPath::new(1.0, from, vec![at], vec![to]).unwrap()
    }

    #[test]
    fn eval_examples() {
        let c = StepPath::constant(1.0, 5.0).unwrap();
        assert_eq!(c.eval(0.7).unwrap(), 5.0);
        let p = jump(0.5, 0.0, 2.0);
        assert_eq!(p.eval(0.5).unwrap(), 2.0);
        assert_eq!(p.eval(0.499).unwrap(), 0.0);
        assert!(matches!(p.eval(1.5), Err(Error::Domain(_))));
        assert!(matches!(p.eval(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn construction_rejects_bad_times() {
        assert!(StepPath::new(1.0, 0.0, vec![0.5, 0.5], vec![1.0, 2.0]).is_err());
        assert!(StepPath::new(1.0, 0.0, vec![0.0], vec![1.0]).is_err());
        assert!(StepPath::new(1.0, 0.0, vec![1.5], vec![1.0]).is_err());
    }

    #[test]
    fn uniform_examples() {
        let a = StepPath::constant(1.0, 1.0).unwrap();
        let b = StepPath::constant(1.0, 3.0).unwrap();
        assert_eq!(uniform_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(uniform_distance(&a, &b).unwrap(), 2.0);
        let c = StepPath::constant(2.0, 3.0).unwrap();
        assert!(matches!(uniform_distance(&a, &c), Err(Error::Domain(_))));
    }

    #[test]
    fn j1_examples() {
        let f = jump(0.5, 0.0, 1.0);
        let g = jump(0.6, 0.0, 1.0);
        assert_eq!(j1_distance(&f, &f).unwrap(), 0.0);
        assert_relative_eq!(j1_distance(&f, &g).unwrap(), 0.1, epsilon = 1e-12);
        let z = StepPath::constant(1.0, 0.0).unwrap();
        let e = StepPath::constant(1.0, 0.25).unwrap();
        assert_relative_eq!(j1_distance(&z, &e).unwrap(), 0.25, epsilon = 1e-12);
    }

    /// Brute force over time changes with one breakpoint `λ(b) = b'`,
    /// evaluated on a fine grid. Gives an upper bound on the J1 distance that
    /// is tight whenever a single alignment suffices.
    fn single_breakpoint_brute_force(f: &StepPath, g: &StepPath, step: f64) -> f64 {
        let t_end = f.horizon();
        let n = (t_end / step).round() as usize;
        let grid: Vec<f64> = (0..=n).map(|k| t_end * k as f64 / n as f64).collect();
        let mut best = f64::INFINITY;
        let coarse = 200;
        for bi in 1..coarse {
            let b = t_end * bi as f64 / coarse as f64;
            for bj in 1..coarse {
                let b2 = t_end * bj as f64 / coarse as f64;
                let disp = (b - b2).abs();
                if disp >= best {
                    continue;
                }
                let lam = |t: f64| {
                    if t <= b {
                        t * b2 / b
                    } else {
                        b2 + (t - b) * (t_end - b2) / (t_end - b)
                    }
                };
                let mut m = disp;
                for &t in &grid {
                    m = m.max((f.eval_unchecked(lam(t).min(t_end)) - g.eval_unchecked(t)).abs());
                    if m >= best {
                        break;
                    }
                }
                best = best.min(m);
            }
        }
        best
    }

    #[test]
    fn j1_single_jump_matches_brute_force() {
        let f = jump(0.5, 0.0, 1.0);
        let g = jump(0.6, 0.0, 1.0);
        let bf = single_breakpoint_brute_force(&f, &g, 1e-4);
        assert!((bf - 0.1).abs() < 1e-3, "brute force {bf}");
        assert_relative_eq!(j1_distance(&f, &g).unwrap(), bf, epsilon = 1e-3);
    }

    #[test]
    fn j1_prefers_value_mismatch_when_cheaper() {
        // Shifting the jump costs 0.3; leaving it costs the jump height 0.2.
        let f = jump(0.3, 0.0, 0.2);
        let g = jump(0.6, 0.0, 0.2);
        assert_relative_eq!(j1_distance(&f, &g).unwrap(), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn j1_with_jumps_at_horizon() {
        let f = StepPath::new(1.0, 0.0, vec![1.0], vec![1.0]).unwrap();
        let g = StepPath::new(1.0, 0.0, vec![0.95], vec![1.0]).unwrap();
        // A jump at T is pinned by λ(T) = T and cannot be shifted earlier.
        assert_relative_eq!(j1_distance(&f, &g).unwrap(), 1.0, epsilon = 1e-12);
        let g2 = StepPath::new(1.0, 0.0, vec![0.95, 1.0], vec![0.1, 1.0]).unwrap();
        assert_relative_eq!(j1_distance(&f, &g2).unwrap(), 0.1, epsilon = 1e-12);
        let h = StepPath::constant(1.0, 0.0).unwrap();
        assert_relative_eq!(j1_distance(&f, &h).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn j1_dense_grids() {
        let f0 = StepPath::from_grid(1.0, 10_000, |t| -t).unwrap();
        let fnn = StepPath::from_grid(1.0, 100, |t| -t).unwrap();
        let d = j1_distance(&fnn, &f0).unwrap();
        let u = uniform_distance(&fnn, &f0).unwrap();
        assert!(d <= u + 1e-15);
        assert!(d > 0.0 && d < 0.011, "{d}");
    }

    fn arb_path() -> impl Strategy<Value = StepPath> {
        (-2.0f64..2.0, proptest::collection::vec((0.01f64..0.99, -2.0f64..2.0), 0..6)).prop_map(|(init, mut js)| {
            js.sort_by(|a, b| a.0.total_cmp(&b.0));
            js.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-6);
            let (t, v) = js.into_iter().unzip();
            StepPath::new(1.0, init, t, v).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn j1_metric_properties(f in arb_path(), g in arb_path()) {
            let d = j1_distance(&f, &g).unwrap();
            prop_assert_eq!(j1_distance(&f, &f).unwrap(), 0.0);
            prop_assert!((d - j1_distance(&g, &f).unwrap()).abs() <= 1e-12);
            prop_assert!(d <= uniform_distance(&f, &g).unwrap() + 1e-15);
            prop_assert!(d + 1e-12 >= (f.initial() - g.initial()).abs());
            prop_assert!(d + 1e-12 >= (f.eval(1.0).unwrap() - g.eval(1.0).unwrap()).abs());
        }

        #[test]
        fn eval_agrees_with_linear_scan(f in arb_path(), ts in proptest::collection::vec(0.0f64..1.0, 100)) {
            for t in ts {
                let mut v = f.initial();
                for (&s, &val) in f.times().iter().zip(f.values()) {
                    if s <= t { v = val; }
                }
                prop_assert_eq!(f.eval(t).unwrap(), v);
            }
        }
    }

    #[test]
    fn uniform_matches_dense_grid() {
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..20 {
            let mut mk = || {
                let mut t: Vec<f64> = (0..10).map(|_| next()).collect();
                t.sort_by(f64::total_cmp);
                let v = (0..10).map(|_| 4.0 * next() - 2.0).collect();
                StepPath::new(1.0, 0.0, t, v).unwrap()
            };
            let (f, g) = (mk(), mk());
            let exact = uniform_distance(&f, &g).unwrap();
            let grid = (0..=10_000)
                .map(|k| k as f64 * 1e-4)
                .map(|t| (f.eval_unchecked(t) - g.eval_unchecked(t)).abs())
                .fold(0.0, f64::max);
            assert!(grid <= exact + 1e-15);
            assert!(exact - grid < 1e-12 || exact >= grid, "exact {exact} grid {grid}");
        }
    }

    #[test]
    fn j1_random_paths_bounded_by_brute_force() {
        let mut state = 777u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..5 {
            let t1 = 0.2 + 0.6 * next();
            let t2 = (t1 + 0.2 * (next() - 0.5)).clamp(0.05, 0.95);
            let h = 0.5 + next();
            let f = jump(t1, 0.0, h);
            let g = jump(t2, 0.0, h + 0.05 * next());
            let d = j1_distance(&f, &g).unwrap();
            let bf = single_breakpoint_brute_force(&f, &g, 1e-3);
            assert!(d <= bf + 1e-9, "j1 {d} brute force {bf}");
            assert!(bf - d < 1e-2, "j1 {d} brute force {bf}");
        }
    }

    #[test]
    fn point_match_examples() {
        let a = PointMeasure::new(1.0, vec![Atom { t: 0.1, y: 1.0 }]).unwrap();
        let b = PointMeasure::new(1.0, vec![Atom { t: 0.2, y: 1.05 }]).unwrap();
        assert_eq!(point_match_distance(&a, &a, 0.5).unwrap(), 0.0);
        assert_relative_eq!(point_match_distance(&a, &b, 0.5).unwrap(), 0.15, epsilon = 1e-12);
        let two = PointMeasure::new(1.0, vec![Atom { t: 0.1, y: 1.0 }, Atom { t: 0.3, y: 2.0 }]).unwrap();
        let three = PointMeasure::new(
            1.0,
            vec![Atom { t: 0.1, y: 1.0 }, Atom { t: 0.3, y: 2.0 }, Atom { t: 0.5, y: 0.9 }],
        )
        .unwrap();
        assert_eq!(point_match_distance(&two, &three, 0.5).unwrap(), f64::INFINITY);
        // Small atoms below delta are ignored.
        assert_eq!(point_match_distance(&two, &three, 0.95).unwrap(), 0.0);
    }

    #[test]
    fn bottleneck_picks_best_bijection() {
        let a = PointMeasure::new(1.0, vec![Atom { t: 0.1, y: 1.0 }, Atom { t: 0.5, y: 1.0 }]).unwrap();
        let b = PointMeasure::new(1.0, vec![Atom { t: 0.52, y: 1.0 }, Atom { t: 0.12, y: 1.0 }]).unwrap();
        assert_relative_eq!(point_match_distance(&a, &b, 0.5).unwrap(), 0.02, epsilon = 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let p = StepPath::new(2.0, -1.5, vec![0.25, 1.0, 2.0], vec![3.0, 1e-30, 7.25]).unwrap();
        let text = p.to_csv().unwrap();
        assert!(text.starts_with("# horizon=2.0\nt,value\n"));
        assert_eq!(StepPath::from_csv(&text).unwrap(), p);
        let m = PointMeasure::new(1.0, vec![Atom { t: 0.5, y: 2.0 }, Atom { t: 0.1, y: 0.3 }]).unwrap();
        assert_eq!(PointMeasure::from_csv(&m.to_csv().unwrap()).unwrap(), m);
    }
}
