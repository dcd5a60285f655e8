//! The six subcommands. Each returns its stdout body and any extra files;
//! [`execute`] writes them to the output directory with a config sidecar.

use std::fmt;
use std::fs;
use std::path::Path;

use multigen_core::moments::{bt_moments, lf_moments, model_moments};
use multigen_core::panel::{write_sidecar, PanelMeta, SCHEMA_VERSION};
use multigen_core::pedigree::{
    am_lineage_betas, build_pedigree_covariance, plant_scenario, sample_pedigrees, simulate_dynasties,
    simulate_lineages, simulate_marriage_market, Matching,
};
use multigen_core::{build_spec, fit, read_panel, write_panel, Member, ModelParams, MomentSet, Panel};
use serde_json::json;

use crate::checks::{run_verify, sub_seed, table2_report};
use crate::config::{Format, RunConfig, Sampler};
use crate::plot::{line_chart, Series};
use crate::report::{Cell, Table};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Moments,
    Fit,
    Verify,
    ReproduceFigure2,
    ReproduceTable2Check,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Moments => "moments",
            Command::Fit => "fit",
            Command::Verify => "verify",
            Command::ReproduceFigure2 => "reproduce-figure2",
            Command::ReproduceTable2Check => "reproduce-table2-check",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug)]
pub struct Output {
    /// Printed to stdout and saved as `<command>.<ext>`.
    pub body: String,
    /// Further files for the output directory, by file name.
    pub files: Vec<(String, String)>,
    /// Set when the command ran but its checks failed.
    pub verdict: Option<CliError>,
}

impl Output {
    fn body(body: String) -> Self {
        Output { body, files: Vec::new(), verdict: None }
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Output { path: path.display().to_string(), source })
}

/// Runs `cmd` and, when `cfg.out` is set, saves its outputs there.
pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<Output, CliError> {
    if let Some(dir) = &cfg.out {
        fs::create_dir_all(dir).map_err(|source| CliError::Output { path: dir.display().to_string(), source })?;
    }
    let out = run(cmd, cfg)?;
    if let Some(dir) = &cfg.out {
        write(&dir.join(format!("{}.{}", cmd.name(), cfg.format.extension())), &out.body)?;
        for (name, text) in &out.files {
            write(&dir.join(name), text)?;
        }
        let meta = json!({ "command": cmd.name(), "config": cfg });
        let text = serde_json::to_string_pretty(&meta).expect("config serializes") + "\n";
        write(&dir.join(format!("{}.meta.json", cmd.name())), &text)?;
    }
    Ok(out)
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Output, CliError> {
    match cmd {
        Command::Simulate => simulate(cfg),
        Command::Moments => moments(cfg).map(Output::body),
        Command::Fit => fit_cmd(cfg),
        Command::Verify => {
            let report = run_verify(&cfg.verify, cfg.seed);
            let mut out = Output::body(report.table().render(cfg.format));
            if report.failed() > 0 {
                out.verdict = Some(CliError::VerifyFailed { failed: report.failed(), total: report.checks.len() });
            }
            Ok(out)
        }
        Command::ReproduceFigure2 => figure2(cfg),
        Command::ReproduceTable2Check => {
            let report = table2_report();
            let mut t = report.table();
            t.title = "published-number arithmetic".into();
            t.notes.push(
                "0.516 x 0.638 = 0.329 exceeds the observed 0.312, so the grandparent coefficient is negative".into(),
            );
            let mut out = Output::body(t.render(cfg.format));
            if report.failed() > 0 {
                out.verdict = Some(CliError::VerifyFailed { failed: report.failed(), total: report.checks.len() });
            }
            Ok(out)
        }
    }
}

/// Records from the configured sampler, with the scenario planted if any.
pub fn simulate_records(cfg: &RunConfig) -> Result<Panel, CliError> {
    let p = cfg.model_params()?;
    let s = &cfg.sim;
    let records = match (s.sampler, Matching::for_variant(p.variant())) {
        (Sampler::ExactCov, _) => sample_pedigrees(&build_pedigree_covariance(&p)?, &p, s.n, cfg.seed)?,
        (Sampler::Market, Some(matching)) => simulate_marriage_market(&p, s.n, s.generations, matching, cfg.seed)?,
        (Sampler::Market, None) => simulate_dynasties(&p, s.n, s.burn_in, cfg.seed)?,
    };
    let records = match &cfg.scenario {
        Some(sc) => plant_scenario(records, sc, sub_seed(cfg.seed, 1))?,
        None => records,
    };
    Ok(Panel::from_records(records)?)
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

fn simulate(cfg: &RunConfig) -> Result<Output, CliError> {
    let dir = cfg.out.as_ref().ok_or_else(|| CliError::Config("simulate writes a panel; pass --out DIR".into()))?;
    let panel = simulate_records(cfg)?;

    let mut t = Table::new("simulated panel", &["member", "n", "mean_y", "var_y", "corr_with_child"]);
    let mut moments = serde_json::Map::new();
    let child: Vec<Option<f64>> = panel.records().iter().map(|r| r.y(Member::Child)).collect();
    for m in Member::ALL {
        let pairs: Vec<(f64, f64)> =
            panel.records().iter().zip(&child).filter_map(|(r, c)| Some((r.y(m)?, (*c)?))).collect();
        if pairs.len() < 2 {
            continue;
        }
        let ys: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let cs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let (mean, var) = mean_var(&ys);
        let (mc, vc) = mean_var(&cs);
        let cov = ys.iter().zip(&cs).map(|(a, b)| (a - mean) * (b - mc)).sum::<f64>() / (ys.len() as f64 - 1.0);
        let corr = cov / (var * vc).sqrt();
        t.push(vec![m.label().into(), ys.len().into(), mean.into(), var.into(), corr.into()]);
        moments
            .insert(m.label().into(), json!({ "n": ys.len(), "mean_y": mean, "var_y": var, "corr_with_child": corr }));
    }
    t.notes.push(format!("{} records written to {}", panel.len(), dir.join("panel.csv").display()));

    let csv = dir.join("panel.csv");
    write_panel(&panel, &csv)?;
    let meta = PanelMeta {
        schema: SCHEMA_VERSION.into(),
        generator: Some(json!({ "model": cfg.model_params()?.to_config(), "config": cfg })),
        sample_moments: Some(moments.into()),
        notes: Vec::new(),
    };
    write_sidecar(&csv, &meta)?;
    Ok(Output::body(t.render(cfg.format)))
}

/// Analytic moments, with β₋ₖ beyond lag 2 of the assortative variants
/// taken from the extended pedigree covariance.
pub fn moment_set(p: &ModelParams, k_max: u32) -> Result<MomentSet, CliError> {
    if k_max == 0 {
        return Err(CliError::Config("k_max must be at least 1".into()));
    }
    let mut ms = model_moments(p, k_max)?;
    if p.variant().is_assortative() && k_max > 2 {
        for (k, b) in am_lineage_betas(p, k_max)? {
            ms.beta_k.entry(k).or_insert(b);
        }
    }
    ms.beta_k.retain(|&k, _| k <= k_max);
    Ok(ms)
}

fn moments(cfg: &RunConfig) -> Result<String, CliError> {
    let p = cfg.model_params()?;
    let ms = moment_set(&p, cfg.moments.k_max)?;
    if cfg.format == Format::Json {
        return Ok(serde_json::to_string_pretty(&ms).expect("moments serialize") + "\n");
    }
    let cell = |v: f64| if cfg.format == Format::Csv { Cell::Float(v) } else { Cell::Num(v, 6) };
    let mut t = Table::new(&format!("moments of {p}"), &["quantity", "value"]);
    for (k, b) in &ms.beta_k {
        t.push(vec![format!("beta_{k}").into(), cell(*b)]);
    }
    let opt = |v: Option<f64>| v.map_or(Cell::Empty, cell);
    t.push(vec!["beta_p".into(), cell(ms.beta_p)]);
    t.push(vec!["beta_gp_same".into(), cell(ms.beta_gp_same)]);
    t.push(vec!["beta_gp_cross".into(), opt(ms.beta_gp_cross)]);
    t.push(vec!["beta_gp_both".into(), opt(ms.beta_gp_both)]);
    t.push(vec!["spousal_corr_e".into(), opt(ms.spousal_corr_e)]);
    t.push(vec!["spousal_corr_y".into(), opt(ms.spousal_corr_y)]);
    t.push(vec!["lambda_eff".into(), cell(ms.lambda_eff)]);
    t.push(vec!["var_y".into(), cell(ms.var_y)]);
    Ok(t.render(cfg.format))
}

fn fit_cmd(cfg: &RunConfig) -> Result<Output, CliError> {
    let input = cfg.io.input.as_ref().ok_or_else(|| CliError::Config("fit needs --input or [io] input".into()))?;
    let (panel, validation) = read_panel(input, cfg.io.mode)?;
    let template = cfg.spec.template()?;
    let spec = build_spec(&template, &panel.schema())?;
    let f = fit(&spec, &panel)?;

    let mut t = Table::new(
        &format!("{template} on {}", input.display()),
        &["term", "estimate", "se", "t", "n", "clusters", "r2"],
    );
    let clusters = f.n_clusters.map_or(Cell::Empty, Cell::from);
    for (i, term) in f.terms.iter().enumerate() {
        let se = f.covariance[(i, i)].max(0.0).sqrt();
        t.push(vec![
            term.clone().into(),
            f.estimates[i].into(),
            se.into(),
            (f.estimates[i] / se).into(),
            f.n_obs.into(),
            clusters.clone(),
            f.r_squared.into(),
        ]);
    }
    t.notes.push(format!(
        "covariance {:?}; {} rows dropped by listwise deletion; {} rows excluded on read",
        f.covariance_kind, f.n_dropped, validation.rows_excluded
    ));
    let mut out = Output::body(t.render(cfg.format));
    if cfg.format != Format::Csv {
        out.files.push(("fit.csv".into(), t.render(Format::Csv)));
    }
    Ok(out)
}

/// One plotted point of the two-process figure.
#[derive(Debug, Clone, PartialEq)]
pub struct FigurePoint {
    pub k: u32,
    pub process: &'static str,
    pub source: &'static str,
    pub correlation: f64,
}

pub const BLUE: &str = "blue_latent_factor";
pub const RED: &str = "red_becker_tomes";
const FIGURE_LAGS: u32 = 5;

/// Analytic β₋ₖ of both processes and their counterparts from
/// `verify.n_anchor` simulated dynasties.
pub fn figure2_points(cfg: &RunConfig) -> Result<Vec<FigurePoint>, CliError> {
    let blue = ModelParams::latent_factor(0.66, 0.84)?;
    let red = ModelParams::original_bt_normalized(0.33, 0.33, 0.84)?;
    let analytic = [
        (BLUE, lf_moments(0.84, 0.66, FIGURE_LAGS)?),
        (RED, bt_moments(0.33, 0.33, 0.84, red.sigma2_u(), FIGURE_LAGS)?),
    ];
    let mut pts = Vec::new();
    for (process, ms) in &analytic {
        for (&k, &b) in &ms.beta_k {
            pts.push(FigurePoint { k, process, source: "analytic", correlation: b });
        }
    }
    let v = &cfg.verify;
    for (tag, (process, p)) in [(BLUE, blue), (RED, red)].into_iter().enumerate() {
        let paths =
            simulate_lineages(&p, v.n_anchor, v.burn_in, FIGURE_LAGS as usize + 1, sub_seed(cfg.seed, tag as u64 + 1))?;
        let last = FIGURE_LAGS as usize;
        let now: Vec<f64> = paths.iter().map(|l| l.y[last]).collect();
        for k in 1..=FIGURE_LAGS {
            let then: Vec<f64> = paths.iter().map(|l| l.y[last - k as usize]).collect();
            pts.push(FigurePoint { k, process, source: "simulated", correlation: correlation(&now, &then) });
        }
    }
    Ok(pts)
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() as f64 - 1.0);
    cov / (va * vb).sqrt()
}

pub fn figure2_table(pts: &[FigurePoint]) -> Table {
    let mut t =
        Table::new("multigenerational correlations of the two processes", &["k", "process", "source", "correlation"]);
    for p in pts {
        t.push(vec![(p.k as usize).into(), p.process.into(), p.source.into(), Cell::Float(p.correlation)]);
    }
    t
}

fn figure2(cfg: &RunConfig) -> Result<Output, CliError> {
    let pts = figure2_points(cfg)?;
    let get = |process: &str, source: &str, k: u32| {
        pts.iter().find(|p| p.process == process && p.source == source && p.k == k).map(|p| p.correlation)
    };
    let mut t = figure2_table(&pts);
    for source in ["analytic", "simulated"] {
        let (b1, r1) = (get(BLUE, source, 1).unwrap_or(f64::NAN), get(RED, source, 1).unwrap_or(f64::NAN));
        let (bk, rk) =
            (get(BLUE, source, FIGURE_LAGS).unwrap_or(f64::NAN), get(RED, source, FIGURE_LAGS).unwrap_or(f64::NAN));
        let crossed = r1 > b1 && rk < bk;
        t.notes.push(format!(
            "{source}: red {} blue at k=1 ({r1:.4} vs {b1:.4}), {} at k={FIGURE_LAGS} ({rk:.4} vs {bk:.4}); crossing {}",
            if r1 > b1 { "above" } else { "not above" },
            if rk < bk { "below" } else { "not below" },
            if crossed { "reproduced" } else { "NOT reproduced" }
        ));
    }
    let ratios: Vec<String> = (1..FIGURE_LAGS)
        .filter_map(|k| Some(format!("{:.4}", get(BLUE, "analytic", k + 1)? / get(BLUE, "analytic", k)?)))
        .collect();
    t.notes.push(format!("blue analytic decay ratios (lambda = 0.66): {}", ratios.join(", ")));

    let series: Vec<Series> = [
        (BLUE, "analytic", "#1f4e9e", false),
        (BLUE, "simulated", "#6f9be0", true),
        (RED, "analytic", "#b22222", false),
        (RED, "simulated", "#e07a6f", true),
    ]
    .into_iter()
    .map(|(process, source, color, dashed)| Series {
        label: format!("{} ({source})", if process == BLUE { "blue" } else { "red" }),
        color,
        dashed,
        points: pts
            .iter()
            .filter(|p| p.process == process && p.source == source)
            .map(|p| (p.k as f64, p.correlation))
            .collect(),
    })
    .collect();
    let svg = line_chart("Two simulated multigenerational processes", "generations apart (k)", "correlation", &series);

    let dir = cfg.out.clone().unwrap_or_else(|| ".".into());
    fs::create_dir_all(&dir).map_err(|source| CliError::Output { path: dir.display().to_string(), source })?;
    write(&dir.join("figure2.csv"), &figure2_table(&pts).render(Format::Csv))?;
    write(&dir.join("figure2.svg"), &svg)?;
    Ok(Output::body(t.render(cfg.format)))
}
