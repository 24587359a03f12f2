//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. An optional argument selects criteria by number.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use divperp::limitlaw::{cdf_thm11, cdf_thm15, intensity_thm11, sample_limit_marginal, sample_prm, LimitKind, PrmSpec};
use divperp::model::{classify_regime, presets, ClassifyOptions, CoefficientLaw, RegimeTag};
use divperp::numerics::{log_plus, slog_sum, SignedLogValue};
use divperp::paths::{Atom, PointMeasure, StepPath};
use divperp::rng::{stream_rng, FORWARD_STREAM_OFFSET, LIMIT_STREAM_OFFSET};
use divperp::theorem21::{bundled, convergence_demo, sandwich_check};
use divperp::verify::{
    ks_critical_two_sample, ks_statistic, ks_two_sample, verify_forward_backward_equality, verify_marginal, TheoremTag,
    VerifyOptions,
};
use rand::Rng;

type Check = fn() -> Result<String, String>;

fn ensure(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

fn c1_closed_forms() -> Result<String, String> {
    let a = cdf_thm11(1.0, 1.0, 1.0, 1.0).map_err(|e| e.to_string())?;
    let b = cdf_thm15(1.0, 1.0, 1.0).map_err(|e| e.to_string())?;
    if (a - 0.5).abs() > 1e-12 || (b - (-1f64).exp()).abs() > 1e-12 {
        return Err(format!("cdf values {a}, {b}"));
    }
    // Mean of the atoms in {t <= u, y - t > x} under dt x (c/a) y^-2 dy,
    // inner integral mapped to [0, 1] by y = x + t + w / (1 - w).
    let mut rng = stream_rng(1, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (x, u, ca) = (rng.random_range(0.1..3.0), rng.random_range(0.1..3.0), rng.random_range(0.2..5.0));
        let inner = |t: f64| {
            let g = move |w: f64| {
                if w >= 1.0 {
                    return ca;
                }
                let y = x + t + w / (1.0 - w);
                ca / (y * y * (1.0 - w) * (1.0 - w))
            };
            adaptive_simpson(&g, 0.0, 1.0, 1e-11)
        };
        let numeric = adaptive_simpson(&inner, 0.0, u, 1e-9);
        let exact = intensity_thm11(x, u, ca, 1.0).map_err(|e| e.to_string())?;
        worst = worst.max((numeric - exact).abs());
    }
    ensure(worst <= 1e-6, format!("max |intensity - quadrature| = {worst:.2e}"))
}

fn c2_prm_calibration() -> Result<String, String> {
    let spec = PrmSpec {
        c: 1.0,
        alpha: 1.0,
        horizon: 2.0,
        gamma: 0.5,
        seed: 2,
        stream: 0,
    };
    let samples = 10_000;
    let mut counts = Vec::with_capacity(samples);
    let mut sizes = vec![];
    for i in 0..samples {
        let pm = sample_prm(&PrmSpec { stream: i as u64, ..spec }).map_err(|e| e.to_string())?;
        counts.push(pm.len() as f64);
        sizes.extend(pm.atoms().iter().map(|a| a.y));
    }
    let mean = counts.iter().sum::<f64>() / samples as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (samples as f64 - 1.0);
    let se = (var / samples as f64).sqrt();
    let z = (mean - 4.0) / se;
    let d = ks_statistic(&sizes, |y| if y <= 0.5 { 0.0 } else { 1.0 - 0.5 / y }).map_err(|e| e.to_string())?;
    ensure(
        z.abs() <= 4.0 && d <= 0.02,
        format!("mean count {mean:.4} ({z:+.2} se), magnitude D = {d:.4}"),
    )
}

fn c3_limit_marginals() -> Result<String, String> {
    let r = 5000;
    let draw = |kind, offset: u64| -> Result<Vec<f64>, String> {
        (0..r)
            .map(|i| sample_limit_marginal(kind, 1.0, 1.0, 1.0, 1e-3, 3, offset + i).map_err(|e| e.to_string()))
            .collect()
    };
    let back = draw(LimitKind::BackwardThm11, LIMIT_STREAM_OFFSET)?;
    let fwd = draw(LimitKind::ForwardThm11, FORWARD_STREAM_OFFSET)?;
    let cdf = |x: f64| if x <= 0.0 { 0.0 } else { x / (x + 1.0) };
    let d2 = ks_two_sample(&back, &fwd).map_err(|e| e.to_string())?;
    let crit = ks_critical_two_sample(r as usize, r as usize, 0.01);
    let db = ks_statistic(&back, cdf).map_err(|e| e.to_string())?;
    let df = ks_statistic(&fwd, cdf).map_err(|e| e.to_string())?;
    ensure(
        d2 <= crit && db <= 0.03 && df <= 0.03,
        format!("two-sample D = {d2:.4} (crit {crit:.4}), backward D = {db:.4}, forward D = {df:.4}"),
    )
}

fn opts() -> VerifyOptions {
    VerifyOptions::default()
}

fn marginal_d(tag: TheoremTag, law: &CoefficientLaw, n: u64, seed: u64, threshold: f64) -> Result<(f64, usize), String> {
    let o = VerifyOptions { threshold, ..opts() };
    let r = verify_marginal(tag, law, n, 1.0, 2000, seed, &o).map_err(|e| e.to_string())?;
    Ok((r.ks_statistic, r.degenerate_count))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    0.5 * (v[(k - 1) / 2] + v[k / 2])
}

fn c4_thm11_backward() -> Result<String, String> {
    let law = presets::divergent();
    let (d, deg) = marginal_d(TheoremTag::Thm11Backward, &law, 5000, 7, 0.05)?;
    let mut medians = vec![];
    for n in [500, 2000, 8000] {
        let ds = (0..20)
            .map(|s| marginal_d(TheoremTag::Thm11Backward, &law, n, s, 0.05).map(|x| x.0))
            .collect::<Result<Vec<_>, _>>()?;
        medians.push(median(ds));
    }
    let monotone = medians.windows(2).all(|w| w[1] <= w[0]);
    ensure(
        d <= 0.05 && deg == 0 && monotone,
        format!("D = {d:.4}, degenerate {deg}, median D over 20 seeds at n = 500/2000/8000: {medians:.4?}"),
    )
}

fn c5_thm11_forward() -> Result<String, String> {
    let law = presets::divergent();
    let (d, deg) = marginal_d(TheoremTag::Thm11Forward, &law, 5000, 7, 0.05)?;
    let eq = verify_forward_backward_equality(&law, 5000, 1.0, 2000, 7, 0.0, &opts()).map_err(|e| e.to_string())?;
    ensure(
        d <= 0.05 && deg == 0 && eq.pass,
        format!(
            "D = {d:.4}, forward-vs-backward D = {:.4} (crit {:.4})",
            eq.ks_statistic, eq.threshold
        ),
    )
}

fn c6_thm15() -> Result<String, String> {
    let primary = CoefficientLaw::reg_var_tail(0.5, 1.0).map_err(|e| e.to_string())?;
    let companion = CoefficientLaw::heavy_neg_m(0.5, 0.75).map_err(|e| e.to_string())?;
    let (db, g1) = marginal_d(TheoremTag::Thm15Backward, &primary, 5000, 7, 0.06)?;
    let (df, g2) = marginal_d(TheoremTag::Thm15Forward, &primary, 5000, 7, 0.06)?;
    let (dc, g3) = marginal_d(TheoremTag::Thm15Backward, &companion, 5000, 7, 0.06)?;
    ensure(
        db <= 0.06 && df <= 0.06 && dc <= 0.06 && g1 + g2 + g3 == 0,
        format!("reg_var backward D = {db:.4}, forward D = {df:.4}, heavy_neg_m backward D = {dc:.4}"),
    )
}

fn c7_pakes() -> Result<String, String> {
    let (d1, _) = marginal_d(TheoremTag::Pakes114, &presets::divergent(), 5000, 7, 0.05)?;
    let law = CoefficientLaw::reg_var_tail(0.5, 1.0).map_err(|e| e.to_string())?;
    let (d2, _) = marginal_d(TheoremTag::Pakes119, &law, 5000, 7, 0.05)?;
    ensure(d1 <= 0.05 && d2 <= 0.05, format!("cauchy D = {d1:.4}, reg_var D = {d2:.4}"))
}

fn c8_sandwich() -> Result<String, String> {
    let mut rng = stream_rng(8, 0);
    let (mut points, mut violations) = (0, 0);
    for _ in 0..100 {
        let k = rng.random_range(1..60);
        let atoms: Vec<Atom> = (0..k)
            .map(|_| Atom {
                t: rng.random_range(0.0..1.0),
                y: rng.random_range(1.0..4.0),
            })
            .collect();
        let j = rng.random_range(0..40);
        let mut times: Vec<f64> = (0..j).map(|_| rng.random_range(0.001..1.0)).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let values = (0..times.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = StepPath::new(1.0, 0.0, times, values).map_err(|e| e.to_string())?;
        let nu = PointMeasure::new(1.0, atoms).map_err(|e| e.to_string())?;
        let c = 10f64.powf(rng.random_range(-0.5..3.0));
        let out = sandwich_check(&f, &nu, c).map_err(|e| e.to_string())?;
        points += out.points;
        violations += out.violations;
    }
    ensure(violations == 0, format!("{violations} violations on {points} grid points"))
}

fn c9_convergence_demo() -> Result<String, String> {
    let inst = bundled::mixed_sign().build().map_err(|e| e.to_string())?;
    let table = convergence_demo(&inst, 1.0).map_err(|e| e.to_string())?;
    let tail: Vec<f64> = table.rows.iter().filter(|r| r.n >= 100).map(|r| r.d_n).collect();
    let last = table.rows.iter().find(|r| r.n == 10_000).map(|r| r.d_n).unwrap_or(f64::INFINITY);
    ensure(
        tail.windows(2).all(|w| w[1] < w[0]) && last <= 1e-3,
        format!(
            "d_n for n >= 100: [{}]",
            tail.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn c10_numerics() -> Result<String, String> {
    let mut rng = stream_rng(10, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.random_range(1..50);
        let xs: Vec<f64> = (0..k)
            .map(|_| {
                let s = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                s * rng.random_range(-30.0f64..30.0).exp()
            })
            .collect();
        let terms: Vec<SignedLogValue> = xs.iter().map(|&x| SignedLogValue::from_f64(x)).collect();
        let naive: f64 = xs.iter().sum();
        let got = slog_sum(&terms).to_f64();
        worst = worst.max(((got - naive) / naive).abs());
    }
    let mut violations = 0;
    for _ in 0..100_000 {
        let scale = 10f64.powf(rng.random_range(-3.0..6.0));
        let x = rng.random_range(-1.0..1.0) * scale;
        let y = rng.random_range(-1.0..1.0) * scale;
        let lhs = (log_plus(SignedLogValue::from_f64(x)) - log_plus(SignedLogValue::from_f64(y))).abs();
        if lhs > (x - y).abs().ln_1p() * (1.0 + 1e-12) + 1e-15 {
            violations += 1;
        }
    }
    ensure(
        worst <= 1e-10 && violations == 0,
        format!("max relative error {worst:.2e}, {violations} log+ violations"),
    )
}

fn c11_classifier() -> Result<String, String> {
    let cases = [
        (presets::divergent(), RegimeTag::DivergentContractive),
        (presets::convergent(), RegimeTag::ConvergentPerpetuity),
        (presets::non_contractive(), RegimeTag::NonContractive),
    ];
    let opts = ClassifyOptions::default();
    let mut wrong = 0;
    for (law, want) in &cases {
        for seed in 0..20 {
            let got = classify_regime(law, &opts, &mut stream_rng(seed, 0)).map_err(|e| e.to_string())?;
            if got.tag != *want {
                wrong += 1;
            }
        }
    }
    ensure(wrong == 0, format!("{wrong} of 60 classifications disagree"))
}

fn run_cli(args: &[&str], out: &Path, jobs: &str) -> Result<(i32, Vec<u8>), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_divperp"))
        .args(args)
        .arg("--jobs")
        .arg(jobs)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    let stdout = Command::new(env!("CARGO_BIN_EXE_divperp"))
        .args(args)
        .arg("--jobs")
        .arg(jobs)
        .output()
        .map_err(|e| e.to_string())?;
    Ok((o.status.code().unwrap_or(-1), stdout.stdout))
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files = vec![];
    for e in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let e = e.map_err(|e| e.to_string())?;
        files.push((
            e.file_name().to_string_lossy().into_owned(),
            std::fs::read(e.path()).map_err(|e| e.to_string())?,
        ));
    }
    files.sort();
    Ok(files)
}

fn c12_reproducibility() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = tmp.path().join("run.json");
    std::fs::write(&cfg, r#"{"law": "cauchy", "a": 1, "c": 1, "n": 300, "R": 150, "seed": 11}"#).map_err(|e| e.to_string())?;
    let cfg = cfg.to_string_lossy().into_owned();
    let commands: Vec<Vec<&str>> = vec![
        vec!["simulate", "--n", "200", "--R", "16", "--seed", "5", "--process", "forward"],
        vec!["simulate", "--config", &cfg, "--scale", "thm11"],
        vec!["limits", "prm", "--T", "2", "--gamma", "0.5", "--R", "5", "--seed", "4"],
        vec!["limits", "path", "--kind", "forward_thm11", "--R", "3", "--seed", "4", "--grid-points", "500"],
        vec!["limits", "cdf", "--kind", "thm11", "--u", "1", "--ca", "1", "--xs", "0.5,1,2"],
        vec!["verify", "--theorem", "thm11-backward,forward-backward-equality,pakes114", "--config", &cfg],
        vec!["verify", "--theorem", "functional-sup", "--n", "200", "--R", "120", "--seed", "2"],
        vec!["theorem21", "--instance", "mixed_sign"],
        vec!["classify", "--law", "cauchy", "--seed", "3"],
    ];
    for (i, args) in commands.iter().enumerate() {
        let a = tmp.path().join(format!("{i}-a"));
        let b = tmp.path().join(format!("{i}-b"));
        let (code_a, out_a) = run_cli(args, &a, "1")?;
        let (code_b, out_b) = run_cli(args, &b, "3")?;
        if code_a > 2 || code_a < 0 {
            return Err(format!("`{}` exited with {code_a}", args.join(" ")));
        }
        if code_a != code_b || out_a != out_b || read_dir_sorted(&a)? != read_dir_sorted(&b)? {
            return Err(format!("`{}` differs between runs", args.join(" ")));
        }
    }
    Ok(format!("{} commands byte-identical across --jobs 1 and 3", commands.len()))
}

fn main() {
    let criteria: [(&str, Check); 12] = [
        ("closed-form limit laws", c1_closed_forms),
        ("Poisson measure calibration", c2_prm_calibration),
        ("backward and forward limit marginals agree", c3_limit_marginals),
        ("first theorem, backward", c4_thm11_backward),
        ("first theorem, forward", c5_thm11_forward),
        ("second theorem", c6_thm15),
        ("weighted-sum marginals", c7_pakes),
        ("deterministic sandwich", c8_sandwich),
        ("deterministic convergence demo", c9_convergence_demo),
        ("signed log-space numerics", c10_numerics),
        ("regime classifier", c11_classifier),
        ("CLI reproducibility", c12_reproducibility),
    ];
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let selected: Vec<usize> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let (status, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "criterion {id:>2} {status} {name}: {detail} [{:.1}s]",
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
