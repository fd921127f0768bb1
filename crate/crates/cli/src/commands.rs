use std::fs::File;
use std::path::{Path, PathBuf};

use nudge_core::bandit::{
    best_arm_confidence, sensitivity, thompson_sample_arm, write_decisions, BanditModel, Decision,
};
use nudge_core::impact::report::{read_report_json, write_report_files};
use nudge_core::impact::{analyze as analyze_logs, read_groups, write_groups, AnalysisInput, ImpactReport};
use nudge_core::io::{create, csv_file, fmt_f64};
use nudge_core::itempair::{generate_candidate_pairs, read_stock, recommend as pick_pair, write_recommendations};
use nudge_core::rng::substream;
use nudge_core::simulator::{analyze_result, SimResult};
use nudge_core::traits::files::{
    read_logins, read_nudges, read_purchases, write_logins, write_nudges, write_purchases,
};
use nudge_core::traits::{compute_contexts, eligible_cohort, LoginLog, Logs, NudgeLog, PurchaseLog};

use crate::config::{self, AnalyzeConfig, AnalyzeInputs, AssignConfig, OutputOptions, RecommendConfig, ReportConfig};
use crate::{Args, CliError};

type Res<T = ()> = Result<T, CliError>;

fn out_dir(args: &Args) -> Res<&Path> {
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    Ok(&args.out)
}

fn seed(flag: Option<u64>, from_config: Option<u64>) -> Res<u64> {
    flag.or(from_config)
        .ok_or_else(|| CliError::config("a seed is required: set `seed` in the config, pass --seed or set NUDGE_SEED"))
}

fn write_with(path: &Path, f: impl FnOnce(File, &str) -> nudge_core::Result<File>) -> Res {
    f(create(path)?, &path.display().to_string())?;
    Ok(())
}

fn warn_all(report: &ImpactReport) {
    for w in &report.warnings {
        eprintln!("nudge: warning: {w}");
    }
}

fn write_report(dir: &Path, report: &ImpactReport, output: &OutputOptions) -> Res {
    write_report_files(dir, report, output.svg)?;
    warn_all(report);
    Ok(())
}

fn write_logs(dir: &Path, logs: &Logs) -> Res {
    write_with(&dir.join("purchases.csv"), |w, l| write_purchases(w, l, logs.purchases.events()))?;
    write_with(&dir.join("nudges.csv"), |w, l| write_nudges(w, l, logs.nudges.events()))?;
    write_with(&dir.join("logins.csv"), |w, l| write_logins(w, l, logs.logins.events()))
}

fn write_sim_extras(dir: &Path, sim: &SimResult, n_arms: usize, output: &OutputOptions) -> Res {
    write_with(&dir.join("groups.csv"), |w, l| write_groups(w, l, &sim.groups))?;
    write_with(&dir.join("decisions.csv"), |w, l| write_decisions(w, l, n_arms, &sim.decisions))?;

    let mut out = csv_file(&dir.join("rewards.csv"), &["user_id", "decision_day", "arm", "reward"])?;
    for r in &sim.rewards {
        out.row([r.user_id.to_string(), r.decision_day.to_string(), r.arm_label.clone(), fmt_f64(r.reward)])?;
    }
    out.finish()?;

    let mut out = csv_file(&dir.join("adoptions.csv"), &["user_id", "item_id", "nudge_day", "purchase_day"])?;
    for a in &sim.adoptions {
        out.row([a.user_id.to_string(), a.item_id.to_string(), a.nudge_day.to_string(), a.purchase_day.to_string()])?;
    }
    out.finish()?;

    if let Some(model) = &sim.model {
        let path = dir.join("bandit.json");
        std::fs::write(&path, model.to_json() + "\n").map_err(|e| CliError::io(&path, e))?;
        if sim.last_contexts.len() >= 2 {
            let s = sensitivity(model, &sim.last_contexts, &sim.trait_names, output.lambda_factor, output.sensitivity_tau)?;
            let mut out = csv_file(
                &dir.join("sensitivity.csv"),
                &["arm", "trait", "mean_derivative", "soft_mean", "normalized", "category"],
            )?;
            for e in &s.entries {
                out.row([
                    e.arm.clone(),
                    e.trait_name.clone(),
                    fmt_f64(e.mean_derivative),
                    fmt_f64(e.soft_mean),
                    fmt_f64(e.normalized),
                    e.category.as_str().to_string(),
                ])?;
            }
            out.finish()?;
        } else {
            eprintln!("nudge: warning: fewer than 2 adaptive contexts, sensitivity table skipped");
        }
    }
    Ok(())
}

pub fn simulate(args: &Args) -> Res {
    let mut cfg = config::load_simulate(&args.config)?;
    if let Some(a) = args.alpha {
        cfg.sim.analysis.alpha = a;
    }
    let seed = seed(args.seed, cfg.sim.seed)?;
    cfg.sim.validate()?;
    let dir = out_dir(args)?;
    let sim = cfg.sim.simulate(seed)?;

    write_logs(dir, &sim.logs)?;
    write_sim_extras(dir, &sim, cfg.sim.design.adaptive_arms.len(), &cfg.output)?;

    // Lets `analyze` rerun the analysis on these files alone.
    let replay = AnalyzeConfig {
        inputs: AnalyzeInputs {
            purchases: "purchases.csv".into(),
            groups: "groups.csv".into(),
            nudges: Some("nudges.csv".into()),
            logins: Some("logins.csv".into()),
            decisions: (!sim.decisions.is_empty()).then(|| "decisions.csv".into()),
        },
        window: sim.window,
        analysis: cfg.sim.analysis,
        output: cfg.output.clone(),
    };
    let text = toml::to_string(&replay).map_err(|e| CliError::config(format!("analyze.toml: {e}")))?;
    let path = dir.join("analyze.toml");
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;

    let report = analyze_result(&sim, &cfg.sim.analysis)?;
    write_report(dir, &report, &cfg.output)
}

pub fn analyze(args: &Args) -> Res {
    let mut cfg: AnalyzeConfig = config::load(&args.config)?;
    if let Some(a) = args.alpha {
        cfg.analysis.alpha = a;
    }
    let inputs = &cfg.inputs;
    let optional = |p: &Option<PathBuf>| p.as_ref().map(|p| config::existing(&args.config, p)).transpose();
    let purchases = read_purchases(&config::existing(&args.config, &inputs.purchases)?)?;
    let groups = read_groups(&config::existing(&args.config, &inputs.groups)?)?;
    let logins = optional(&inputs.logins)?.map(|p| read_logins(&p)).transpose()?.unwrap_or_default();
    let decisions = optional(&inputs.decisions)?.map(|p| nudge_core::bandit::read_decisions(&p)).transpose()?;
    // The nudge log may legitimately be absent: only the success analysis needs it.
    let nudges = match &inputs.nudges {
        Some(p) => {
            let full = config::resolve(&args.config, p);
            if full.is_file() {
                read_nudges(&full)?
            } else {
                eprintln!("nudge: warning: nudge log {} not found", full.display());
                Vec::new()
            }
        }
        None => Vec::new(),
    };
    let logs = Logs { purchases: PurchaseLog::new(purchases), nudges: NudgeLog::new(nudges), logins: LoginLog::new(logins) };
    let input = AnalysisInput {
        logs: &logs,
        groups: &groups,
        window: cfg.window,
        decisions: decisions.as_deref().filter(|d| !d.is_empty()),
    };
    let report = analyze_logs(&input, &cfg.analysis)?;
    write_report(out_dir(args)?, &report, &cfg.output)
}

pub fn report(args: &Args) -> Res {
    let cfg: ReportConfig = config::load(&args.config)?;
    let report = read_report_json(&config::existing(&args.config, &cfg.inputs.report)?)?;
    write_report(out_dir(args)?, &report, &cfg.output)
}

pub fn recommend(args: &Args) -> Res {
    let cfg: RecommendConfig = config::load(&args.config)?;
    let seed = seed(args.seed, cfg.seed)?;
    cfg.cohort.validate()?;
    let log = PurchaseLog::new(read_purchases(&config::existing(&args.config, &cfg.inputs.purchases)?)?);
    let stock = read_stock(&config::existing(&args.config, &cfg.inputs.stock)?)?;
    let logins = match &cfg.inputs.logins {
        Some(p) => LoginLog::new(read_logins(&config::existing(&args.config, p)?)?),
        None => LoginLog::default(),
    };
    let cohort = eligible_cohort(&log, &logins, cfg.day, &cfg.cohort)?;
    let candidates = generate_candidate_pairs(&log, &stock, cfg.day, &cfg.candidates)?;
    let mut rng = substream(seed, "recommend");
    let recs: Vec<_> = cohort
        .iter()
        .filter_map(|u| pick_pair(&candidates, &log, u, cfg.day, cfg.candidates.window_months, &mut rng))
        .collect();
    let dir = out_dir(args)?;
    write_with(&dir.join("recommendations.csv"), |w, l| write_recommendations(w, l, &recs))?;
    if recs.len() < cohort.len() {
        eprintln!("nudge: warning: {} of {} eligible users have no recommendation", cohort.len() - recs.len(), cohort.len());
    }
    Ok(())
}

pub fn assign(args: &Args) -> Res {
    let cfg: AssignConfig = config::load(&args.config)?;
    let seed = seed(args.seed, cfg.seed)?;
    cfg.cohort.validate()?;
    cfg.context.kinds()?;
    let inputs = &cfg.inputs;
    let optional = |p: &Option<PathBuf>| p.as_ref().map(|p| config::existing(&args.config, p)).transpose();
    let logs = Logs {
        purchases: PurchaseLog::new(read_purchases(&config::existing(&args.config, &inputs.purchases)?)?),
        nudges: NudgeLog::new(optional(&inputs.nudges)?.map(|p| read_nudges(&p)).transpose()?.unwrap_or_default()),
        logins: LoginLog::new(optional(&inputs.logins)?.map(|p| read_logins(&p)).transpose()?.unwrap_or_default()),
    };
    let model = match optional(&inputs.model)? {
        Some(p) => BanditModel::load(&p)?,
        None => BanditModel::new(&cfg.arms, cfg.bandit.prior(cfg.context.dim()))?,
    };
    if model.dim() != cfg.context.dim() {
        return Err(CliError::config(format!(
            "model has dimension {} but the context lists {} traits",
            model.dim(),
            cfg.context.dim()
        )));
    }

    let cohort = eligible_cohort(&logs.purchases, &logs.logins, cfg.day, &cfg.cohort)?;
    let contexts = compute_contexts(&logs, cfg.day, &cfg.context, &cohort)?;
    let mut rng = substream(seed, "decisions");
    let decisions: Vec<Decision> = contexts
        .values()
        .map(|c| thompson_sample_arm(&model, c.user_id.clone(), cfg.day, &c.values, cfg.bandit.thompson, &mut rng))
        .collect::<nudge_core::Result<_>>()?;

    let dir = out_dir(args)?;
    write_with(&dir.join("decisions.csv"), |w, l| write_decisions(w, l, model.n_arms(), &decisions))?;

    let mut header = vec!["user_id".to_string()];
    header.extend(cfg.context.traits.iter().cloned());
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut out = csv_file(&dir.join("contexts.csv"), &refs)?;
    for c in contexts.values() {
        out.row(std::iter::once(c.user_id.to_string()).chain(c.values.iter().map(|&v| fmt_f64(v))))?;
    }
    out.finish()?;

    let labels: Vec<&str> = model.labels().collect();
    let mut header = vec!["user_id".to_string(), "best_arm".to_string(), "confidence".to_string()];
    header.extend(labels.iter().map(|l| format!("p_{l}")));
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut out = csv_file(&dir.join("best_arm.csv"), &refs)?;
    if !contexts.is_empty() {
        let xs: Vec<Vec<f64>> = contexts.values().map(|c| c.values.clone()).collect();
        let best = best_arm_confidence(&model, &xs, cfg.probability_draws, &mut substream(seed, "best-arm"))?;
        for (c, b) in contexts.values().zip(&best) {
            let mut row = vec![c.user_id.to_string(), labels[b.best_arm].to_string(), fmt_f64(b.confidence)];
            row.extend(b.probabilities.iter().map(|&p| fmt_f64(p)));
            out.row(row)?;
        }
    }
    out.finish()?;
    Ok(())
}
