use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use divperp::limitlaw::{
    cdf_thm11, cdf_thm15, extremal_path_with_grid, sample_prm, LimitKind, PrmSpec, DEFAULT_GRID_POINTS,
};
use divperp::model::{classify_regime, ClassifyOptions, CoefficientLaw};
use divperp::rng::stream_rng;
use divperp::simulate::{run_batch, Process, SimScenario};
use divperp::theorem21::{bundled, check_conditions, convergence_demo, DemoInstanceSpec};
use divperp::verify::{
    summary_csv, verify_forward_backward_equality, verify_functional_sup, verify_limit_sampler, verify_marginal,
    TheoremTag, VerificationReport, VerifyOptions, DEFAULT_LEVEL, DEFAULT_THRESHOLD,
};
use serde_json::json;

use crate::config::RunConfig;

pub enum Outcome {
    Success,
    /// A verification or condition check failed; artifacts were still written.
    Failed,
}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<divperp::Error>() {
        Some(divperp::Error::ConditionFailed(_) | divperp::Error::Statistical(_)) => 2,
        _ => 1,
    }
}

pub fn run(mut cfg: RunConfig) -> Result<Outcome> {
    match cfg.command.clone().as_deref() {
        Some("simulate") => simulate(&mut cfg),
        Some("limits prm") => limits_prm(&mut cfg),
        Some("limits path") => limits_path(&mut cfg),
        Some("limits cdf") => limits_cdf(&mut cfg),
        Some("verify") => verify(&mut cfg),
        Some("theorem21") => theorem21(&mut cfg),
        Some("classify") => classify(&mut cfg),
        other => bail!("unknown command {other:?}"),
    }
}

/// Writes `files` under `--out`, or prints `stdout` when no directory is set.
fn emit(cfg: &RunConfig, files: &[(&str, &str)], stdout: &str) -> Result<()> {
    match &cfg.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            for (name, body) in files {
                let path = Path::new(dir).join(name);
                std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        None => print!("{stdout}"),
    }
    Ok(())
}

fn config_line(cfg: &RunConfig) -> String {
    format!("# config {}\n", cfg.json())
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value");
    s.push('\n');
    s
}

fn simulate(cfg: &mut RunConfig) -> Result<Outcome> {
    let law = cfg.resolve_law()?;
    let n = *cfg.n.get_or_insert(1000);
    let horizon = *cfg.horizon.get_or_insert(1.0);
    let x0 = *cfg.x0.get_or_insert(0.0);
    let seed = *cfg.seed.get_or_insert(0);
    let r = *cfg.replications.get_or_insert(1);
    let process = match cfg.process.get_or_insert_with(|| "backward".into()).as_str() {
        "backward" => Process::Backward,
        "forward" => Process::Forward,
        p => bail!("unknown process '{p}' (expected backward or forward)"),
    };
    let divisor = match cfg.scale.get_or_insert_with(|| "none".into()).as_str() {
        "none" => 1.0,
        "thm11" => match law.drift() {
            Some(a) => a * n as f64,
            None => bail!("scale thm11 needs a law with a drift, got {}", law.family_name()),
        },
        "thm15" => law.compute_bn(n)?,
        s => bail!("unknown scale '{s}' (expected none, thm11 or thm15)"),
    };
    let base = SimScenario::new(law, n, horizon, x0, seed)?;
    let batch = run_batch(&base, process, r, divisor, cfg.jobs.unwrap_or(0))?;
    let body = config_line(cfg) + &batch.to_csv()?;
    emit(cfg, &[("paths.csv", &body)], &body)?;
    Ok(Outcome::Success)
}

fn prm_spec(cfg: &mut RunConfig) -> Result<PrmSpec> {
    let horizon = *cfg.horizon.get_or_insert(1.0);
    Ok(PrmSpec {
        c: *cfg.c.get_or_insert(1.0),
        alpha: *cfg.alpha.get_or_insert(1.0),
        horizon,
        gamma: *cfg.gamma.get_or_insert(1e-3 * horizon),
        seed: *cfg.seed.get_or_insert(0),
        stream: 0,
    })
}

fn limits_prm(cfg: &mut RunConfig) -> Result<Outcome> {
    let spec = prm_spec(cfg)?;
    let r = *cfg.replications.get_or_insert(1);
    let mut body = config_line(cfg) + "sample,t,y\n";
    for i in 0..r {
        let pm = sample_prm(&PrmSpec { stream: i, ..spec })?;
        for a in pm.atoms() {
            writeln!(body, "{i},{:?},{:?}", a.t, a.y)?;
        }
    }
    emit(cfg, &[("prm.csv", &body)], &body)?;
    Ok(Outcome::Success)
}

fn limit_kind(name: &str) -> Result<LimitKind> {
    Ok(match name {
        "backward_thm11" | "thm11" => LimitKind::BackwardThm11,
        "forward_thm11" => LimitKind::ForwardThm11,
        "sup_thm15" | "thm15" => LimitKind::SupThm15,
        k => bail!("unknown limit kind '{k}' (expected backward_thm11, forward_thm11 or sup_thm15)"),
    })
}

fn limits_path(cfg: &mut RunConfig) -> Result<Outcome> {
    let kind = limit_kind(cfg.kind.get_or_insert_with(|| "backward_thm11".into()))?;
    cfg.kind = Some(kind.name().into());
    let spec = prm_spec(cfg)?;
    let r = *cfg.replications.get_or_insert(1);
    let grid = *cfg.grid_points.get_or_insert(DEFAULT_GRID_POINTS);
    let mut body = config_line(cfg) + "sample,t,value\n";
    for i in 0..r {
        let pm = sample_prm(&PrmSpec { stream: i, ..spec })?;
        let p = extremal_path_with_grid(&pm, kind, spec.horizon, grid)?.compressed();
        writeln!(body, "{i},0.0,{:?}", p.initial())?;
        for (t, v) in p.times().iter().zip(p.values()) {
            writeln!(body, "{i},{t:?},{v:?}")?;
        }
    }
    emit(cfg, &[("paths.csv", &body)], &body)?;
    Ok(Outcome::Success)
}

fn limits_cdf(cfg: &mut RunConfig) -> Result<Outcome> {
    let u = *cfg.u.get_or_insert(1.0);
    let xs = cfg.xs.get_or_insert_with(|| vec![0.5, 1.0, 2.0]).clone();
    let kind = cfg.kind.get_or_insert_with(|| "thm11".into()).clone();
    let f: Box<dyn Fn(f64) -> divperp::Result<f64>> = match kind.as_str() {
        "thm11" => {
            let ca = *cfg.ca.get_or_insert(1.0);
            Box::new(move |x| cdf_thm11(x, u, ca, 1.0))
        }
        "thm15" => {
            let alpha = *cfg.alpha.get_or_insert(1.0);
            Box::new(move |x| cdf_thm15(x, u, alpha))
        }
        k => bail!("unknown cdf kind '{k}' (expected thm11 or thm15)"),
    };
    let mut body = config_line(cfg) + "x,cdf\n";
    for x in xs {
        writeln!(body, "{x:?},{:?}", f(x)?)?;
    }
    emit(cfg, &[("cdf.csv", &body)], &body)?;
    Ok(Outcome::Success)
}

fn verify(cfg: &mut RunConfig) -> Result<Outcome> {
    let spec = cfg.theorem.get_or_insert_with(|| "thm11-backward".into()).clone();
    let tags: Vec<TheoremTag> = if spec == "all" {
        TheoremTag::ALL.to_vec()
    } else {
        spec.split(',').map(|s| TheoremTag::parse(s.trim())).collect::<divperp::Result<_>>()?
    };
    let n = *cfg.n.get_or_insert(5000);
    let u = *cfg.u.get_or_insert(1.0);
    let r = *cfg.replications.get_or_insert(2000) as usize;
    let seed = *cfg.seed.get_or_insert(0);
    let source = cfg.source.get_or_insert_with(|| "simulation".into()).clone();
    if source != "simulation" && source != "limit" {
        bail!("unknown source '{source}' (expected simulation or limit)");
    }
    let opts = VerifyOptions {
        threshold: *cfg.threshold.get_or_insert(DEFAULT_THRESHOLD),
        level: *cfg.level.get_or_insert(DEFAULT_LEVEL),
        jobs: cfg.jobs.unwrap_or(0),
        limit_c: cfg.limit_c,
        gamma: cfg.gamma,
    };

    // `all` pairs each theorem with its canonical family; otherwise one law.
    let (first_law, second_law) = if spec == "all" {
        let a = *cfg.a.get_or_insert(1.0);
        let c = *cfg.c.get_or_insert(1.0);
        let alpha = *cfg.alpha.get_or_insert(0.5);
        (CoefficientLaw::cauchy_tail(a, c)?, CoefficientLaw::reg_var_tail(alpha, a)?)
    } else {
        let law = cfg.resolve_law()?;
        (law, law)
    };
    let law_for = |t: TheoremTag| match t {
        TheoremTag::Thm15Backward | TheoremTag::Thm15Forward | TheoremTag::Pakes119 => second_law,
        _ => first_law,
    };

    let mut reports: Vec<VerificationReport> = vec![];
    for tag in tags {
        let law = law_for(tag);
        let report = match tag {
            TheoremTag::ForwardBackwardEquality => {
                verify_forward_backward_equality(&law, n, u, r, seed, *cfg.x0.get_or_insert(0.0), &opts)?
            }
            TheoremTag::FunctionalSup => {
                let target = TheoremTag::parse(cfg.target.get_or_insert_with(|| "thm11-backward".into()))?;
                let horizon = *cfg.horizon.get_or_insert(1.0);
                verify_functional_sup(target, &law_for(target), n, horizon, r, seed, &opts)?
            }
            _ if source == "limit" => verify_limit_sampler(tag, &law, u, r, seed, &opts)?,
            _ => verify_marginal(tag, &law, n, u, r, seed, &opts)?,
        };
        reports.push(report);
    }
    let all_pass = reports.iter().all(|r| r.pass);
    let json = pretty(&json!({ "config": cfg.json(), "pass": all_pass, "reports": reports }));
    let summary = config_line(cfg) + &summary_csv(&reports)?;
    emit(cfg, &[("reports.json", &json), ("summary.csv", &summary)], &json)?;
    Ok(if all_pass { Outcome::Success } else { Outcome::Failed })
}

fn theorem21(cfg: &mut RunConfig) -> Result<Outcome> {
    let spec: DemoInstanceSpec = match &cfg.instance_file {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing instance {}", path.display()))?
        }
        None => bundled::by_name(cfg.instance.get_or_insert_with(|| "mixed_sign".into()))?,
    };
    let inst = spec.build()?;
    let horizon = *cfg.horizon.get_or_insert(spec.horizon);
    let gamma = *cfg.gamma.get_or_insert(spec.gamma);
    let report = check_conditions(&inst, horizon, gamma)?;
    let failed = !report.failures().is_empty();
    let decay = if failed { None } else { Some(convergence_demo(&inst, horizon)?) };
    let json = pretty(&json!({
        "config": cfg.json(),
        "instance": spec,
        "conditions": report,
        "decay": decay,
    }));
    let csv = match &decay {
        Some(d) => config_line(cfg) + &d.to_csv()?,
        None => String::new(),
    };
    let mut files = vec![("conditions.json", json.as_str())];
    if decay.is_some() {
        files.push(("decay.csv", &csv));
    }
    emit(cfg, &files, &json)?;
    if failed {
        eprintln!("condition check failed; no decay table produced");
        return Ok(Outcome::Failed);
    }
    Ok(Outcome::Success)
}

fn classify(cfg: &mut RunConfig) -> Result<Outcome> {
    let law = cfg.resolve_law()?;
    let seed = *cfg.seed.get_or_insert(0);
    let defaults = ClassifyOptions::default();
    let opts = ClassifyOptions {
        mc_samples: *cfg.mc_samples.get_or_insert(defaults.mc_samples),
        ..defaults
    };
    let regime = classify_regime(&law, &opts, &mut stream_rng(seed, 0))?;
    let json = pretty(&json!({ "config": cfg.json(), "law": law, "regime": regime }));
    emit(cfg, &[("regime.json", &json)], &json)?;
    Ok(Outcome::Success)
}
