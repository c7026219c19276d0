//! Command-line driver: one subcommand per module, artifacts written under an output directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::diagnostics::{
    corona_build_and_validate, wgl_detect, CoronaValidation, DiagnosticReport,
};
use crate::error::{Error, Result};
use crate::geometry::{compute_coefficients, packing_report, PackingKind, PackingReport};
use crate::io::{
    fmt_key, read_json, write_coefficients, write_dat, write_detector_cubes, write_family,
    write_json, write_lattice, write_measure, write_variation, MeasureSidecar,
};
use crate::lattice::{finest_admissible_generation, Lattice};
use crate::measure::DiscreteMeasure;
use crate::operators::{evaluate_family, GridSpec};
use crate::variation::{
    compose_variation, dyadic_intervals, norm_ratio_probe, ProbeResult, VariationMode,
};

#[derive(Debug, Parser)]
#[command(
    name = "rectilab",
    version,
    about = "Variation of singular integrals and rectifiability diagnostics on point clouds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the configured one.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Run seed; overrides the configured one.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write the measure CSV and its sidecar.
    Generate,
    /// Dump the dyadic lattice as JSON lines.
    Lattice,
    /// Coefficient table and packing sums.
    Coeffs,
    /// Truncated-transform family at every point.
    Transform,
    /// ρ-variation per point, L² norms and the optional norm-ratio probe.
    Variation,
    /// Rectifiability detector report.
    Detect,
    /// Corona construction and validation.
    Corona,
    /// Aggregate earlier artifacts into a summary and plot series.
    Report,
    /// Print the configuration JSON schema.
    Schema,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Lattice => "lattice",
            Command::Coeffs => "coeffs",
            Command::Transform => "transform",
            Command::Variation => "variation",
            Command::Detect => "detect",
            Command::Corona => "corona",
            Command::Report => "report",
            Command::Schema => "schema",
        }
    }
}

/// Process exit code of an error.
pub fn exit_code(error: &Error) -> i32 {
    if error.is_config() {
        2
    } else {
        3
    }
}

/// Machine-readable error line for stderr.
pub fn error_json(error: &Error) -> String {
    json!({ "error": error.kind(), "message": error.to_string(), "exit_code": exit_code(error) })
        .to_string()
}

/// Loaded configuration with command-line overrides applied.
pub fn resolve_config(global: &GlobalArgs) -> Result<ExperimentConfig> {
    let path = global
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this subcommand".into()))?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn out_dir(global: &GlobalArgs, config: Option<&ExperimentConfig>) -> PathBuf {
    global
        .out
        .clone()
        .or_else(|| config.and_then(|c| c.output.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

struct Context {
    config: ExperimentConfig,
    hash: String,
    out: PathBuf,
    mu: Arc<DiscreteMeasure>,
}

impl Context {
    fn new(global: &GlobalArgs) -> Result<Self> {
        let config = resolve_config(global)?;
        let out = out_dir(global, Some(&config));
        let mu = Arc::new(config.measure.build().map_err(|e| match e {
            Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_)
            | Error::InvalidArgument(_)
            | Error::SlopeViolation { .. } => Error::Config(format!("measure: {e}")),
            other => other,
        })?);
        Ok(Self {
            hash: config.hash(),
            config,
            out,
            mu,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn lattice(&self) -> Result<Lattice> {
        let finest = finest_admissible_generation(&self.mu);
        let j_max = self.config.lattice.j_max.unwrap_or(finest);
        Lattice::build(
            self.mu.clone(),
            self.config.lattice.j_min,
            j_max,
            self.config.shift(),
            self.config.lattice.kind,
        )
    }
}

#[derive(Serialize)]
struct TimingSidecar<'a> {
    subcommand: &'a str,
    started_unix_seconds: f64,
    elapsed_seconds: f64,
}

/// Runs one subcommand and returns the artifacts written.
pub fn run(command: Command, global: &GlobalArgs) -> Result<Vec<PathBuf>> {
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    let clock = Instant::now();
    let (out, artifacts) = match command {
        Command::Schema => {
            print!("{}", crate::config::config_schema());
            return Ok(Vec::new());
        }
        Command::Report => {
            let out = out_dir(global, None);
            let artifacts = report(&out)?;
            (out, artifacts)
        }
        other => {
            let ctx = Context::new(global)?;
            let artifacts = match other {
                Command::Generate => generate(&ctx)?,
                Command::Lattice => lattice(&ctx)?,
                Command::Coeffs => coeffs(&ctx)?,
                Command::Transform => transform(&ctx)?,
                Command::Variation => variation(&ctx)?,
                Command::Detect => detect(&ctx)?,
                Command::Corona => corona(&ctx)?,
                Command::Report | Command::Schema => unreachable!(),
            };
            (ctx.out, artifacts)
        }
    };
    write_json(
        &out.join(format!("{}.timing.json", command.name())),
        &TimingSidecar {
            subcommand: command.name(),
            started_unix_seconds: started,
            elapsed_seconds: clock.elapsed().as_secs_f64(),
        },
    )?;
    info!("{} wrote {} artifacts", command.name(), artifacts.len());
    Ok(artifacts)
}

fn generate(ctx: &Context) -> Result<Vec<PathBuf>> {
    let path = ctx.path("measure.csv");
    write_measure(&path, &ctx.mu)?;
    Ok(vec![path.clone(), crate::io::sidecar_path(&path)])
}

fn lattice(ctx: &Context) -> Result<Vec<PathBuf>> {
    let lattice = ctx.lattice()?;
    let path = ctx.path("lattice.jsonl");
    write_lattice(&path, &lattice)?;
    Ok(vec![path])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PackingSummary {
    pub config_hash: String,
    pub label: String,
    pub generations: [i32; 2],
    pub reports: Vec<PackingReport>,
}

fn coeffs(ctx: &Context) -> Result<Vec<PathBuf>> {
    let lattice = ctx.lattice()?;
    let table = compute_coefficients(&lattice, &ctx.config.coefficients)?;
    let csv = ctx.path("coefficients.csv");
    write_coefficients(&csv, &table, ctx.mu.ambient_dim(), ctx.mu.target_dim())?;
    let mut kinds = vec![
        PackingKind::Beta1Squared,
        PackingKind::Beta2Squared,
        PackingKind::BetaInfSquared,
    ];
    if ctx.config.coefficients.compute_alpha {
        kinds.push(PackingKind::AlphaSquared);
    }
    let reports = kinds
        .into_iter()
        .map(|kind| packing_report(&lattice, &table, kind, lattice.j_min(), None))
        .collect();
    let json_path = ctx.path("packing.json");
    write_json(
        &json_path,
        &PackingSummary {
            config_hash: ctx.hash.clone(),
            label: ctx.mu.label().to_string(),
            generations: [lattice.j_min(), lattice.j_max()],
            reports,
        },
    )?;
    Ok(vec![csv, json_path])
}

fn grid(ctx: &Context) -> Result<GridSpec> {
    ctx.config.grid.build(&ctx.mu).map_err(|e| match e {
        Error::InvalidArgument(m) => Error::Config(format!("grid: {m}")),
        other => other,
    })
}

fn transform(ctx: &Context) -> Result<Vec<PathBuf>> {
    let kernel = ctx
        .config
        .kernel_spec(ctx.mu.target_dim(), ctx.mu.ambient_dim())?;
    let family = evaluate_family(
        &ctx.mu,
        None,
        &kernel,
        ctx.config.truncation_profile()?,
        &grid(ctx)?,
    )?;
    let csv = ctx.path("family.csv");
    let meta = ctx.path("family.json");
    write_family(&csv, &meta, &family)?;
    Ok(vec![csv, meta])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariationEntry {
    pub rho: f64,
    pub mode: VariationMode,
    /// `‖V_ρ T μ‖_{L²(μ)}`.
    pub l2_norm: f64,
    /// `‖V_ρ T μ‖_{L²(μ)} / μ(ℝ^d)^{1/2}`.
    pub ratio: f64,
    pub probe: Option<ProbeResult>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariationSummary {
    pub config_hash: String,
    pub label: String,
    pub kernel: String,
    pub profile: String,
    pub entries: Vec<VariationEntry>,
}

fn rho_tag(rho: f64) -> String {
    crate::io::fmt_f64(rho).replace('.', "p")
}

fn variation(ctx: &Context) -> Result<Vec<PathBuf>> {
    let kernel = ctx
        .config
        .kernel_spec(ctx.mu.target_dim(), ctx.mu.ambient_dim())?;
    let profile = ctx.config.truncation_profile()?;
    let grid = grid(ctx)?;
    let family = evaluate_family(&ctx.mu, None, &kernel, profile, &grid)?;
    let intervals = match (&ctx.config.oscillation_intervals, ctx.config.variation_mode) {
        (Some(r), _) => Some(r.clone()),
        (None, VariationMode::Oscillation) => {
            let (hi, lo) = family
                .rows
                .iter()
                .flat_map(|r| r.scales.iter().copied())
                .fold((0.0f64, f64::INFINITY), |(h, l), s| (h.max(s), l.min(s)));
            Some(dyadic_intervals(hi, lo))
        }
        (None, _) => None,
    };
    let lattice = if ctx.config.probe.is_empty() {
        None
    } else {
        Some(ctx.lattice()?)
    };
    let mass = ctx.mu.total_mass();
    let mut artifacts = Vec::new();
    let mut entries = Vec::new();
    for &rho in &ctx.config.rho {
        let result = compose_variation(
            &family,
            ctx.mu.weights(),
            rho,
            ctx.config.variation_mode,
            intervals.as_deref(),
        )?;
        let path = ctx.path(&format!("variation_rho{}.csv", rho_tag(rho)));
        write_variation(&path, &result)?;
        artifacts.push(path);
        let probe = if ctx.config.probe.is_empty() {
            None
        } else {
            Some(norm_ratio_probe(
                &ctx.mu,
                &kernel,
                profile,
                rho,
                &grid,
                &ctx.config.probe,
                lattice.as_ref(),
            )?)
        };
        entries.push(VariationEntry {
            rho,
            mode: ctx.config.variation_mode,
            l2_norm: result.l2_norm,
            ratio: result.l2_norm / mass.sqrt(),
            probe,
        });
    }
    let summary = ctx.path("variation_summary.json");
    write_json(
        &summary,
        &VariationSummary {
            config_hash: ctx.hash.clone(),
            label: ctx.mu.label().to_string(),
            kernel: kernel.name.clone(),
            profile: profile.name().to_string(),
            entries,
        },
    )?;
    artifacts.push(summary);
    Ok(artifacts)
}

fn detect(ctx: &Context) -> Result<Vec<PathBuf>> {
    let mut report = wgl_detect(ctx.mu.clone(), &ctx.config.detector)?;
    report.config_hash = Some(ctx.hash.clone());
    let json_path = ctx.path("detector_report.json");
    write_json(&json_path, &report)?;
    let csv = ctx.path("detector_cubes.csv");
    write_detector_cubes(&csv, &report.cubes)?;
    Ok(vec![json_path, csv])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoronaTreeSummary {
    pub root_generation: i32,
    pub root_key: String,
    pub cubes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoronaSummary {
    pub config_hash: String,
    pub label: String,
    pub generations: [i32; 2],
    pub cubes: usize,
    pub bad_cubes: usize,
    pub trees: Vec<CoronaTreeSummary>,
    pub validation: CoronaValidation,
}

fn corona(ctx: &Context) -> Result<Vec<PathBuf>> {
    let lattice = ctx.lattice()?;
    let table = compute_coefficients(&lattice, &ctx.config.coefficients)?;
    let (structure, validation) = corona_build_and_validate(&lattice, &table, &ctx.config.corona)?;
    let trees = structure
        .trees
        .iter()
        .map(|t| {
            let root = lattice.cube(t.root);
            CoronaTreeSummary {
                root_generation: root.generation,
                root_key: fmt_key(&root.key),
                cubes: t.cubes.len(),
            }
        })
        .collect();
    let path = ctx.path("corona.json");
    write_json(
        &path,
        &CoronaSummary {
            config_hash: ctx.hash.clone(),
            label: ctx.mu.label().to_string(),
            generations: [lattice.j_min(), lattice.j_max()],
            cubes: lattice.len(),
            bad_cubes: structure.bad.len(),
            trees,
            validation,
        },
    )?;
    Ok(vec![path])
}

fn read_if_present<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Option<T>> {
    if path.is_file() {
        read_json(path).map(Some)
    } else {
        Ok(None)
    }
}

fn depth_rows(series: &[&[f64]]) -> Vec<Vec<f64>> {
    let len = series.iter().map(|s| s.len()).max().unwrap_or(0);
    (0..len)
        .map(|k| {
            let mut row = vec![k as f64];
            row.extend(series.iter().map(|s| s.get(k).copied().unwrap_or(f64::NAN)));
            row
        })
        .collect()
}

fn report(out: &Path) -> Result<Vec<PathBuf>> {
    let mut summary = serde_json::Map::new();
    let mut plots: Vec<(String, String, Vec<String>)> = Vec::new();
    let mut artifacts = Vec::new();

    if let Some(sidecar) = read_if_present::<MeasureSidecar>(&out.join("measure.json"))? {
        let rows = csv::Reader::from_path(out.join("measure.csv"))
            .map(|mut r| r.records().count())
            .unwrap_or(0);
        summary.insert(
            "measure".into(),
            json!({ "label": sidecar.label, "n": sidecar.n, "d": sidecar.d, "points": rows }),
        );
    }

    let lattice_path = out.join("lattice.jsonl");
    if lattice_path.is_file() {
        let mut per_generation: std::collections::BTreeMap<i64, (usize, f64)> = Default::default();
        for line in std::fs::read_to_string(&lattice_path)?.lines() {
            let cube: Value = serde_json::from_str(line)?;
            let j = cube["j"].as_i64().unwrap_or_default();
            let entry = per_generation.entry(j).or_default();
            entry.0 += 1;
            entry.1 += cube["mass"].as_f64().unwrap_or_default();
        }
        let rows: Vec<Vec<f64>> = per_generation
            .iter()
            .map(|(j, (c, m))| vec![*j as f64, *c as f64, *m])
            .collect();
        let dat = out.join("lattice_generations.dat");
        write_dat(&dat, &["j", "cubes", "mass"], &rows)?;
        artifacts.push(dat);
        plots.push((
            "lattice_generations.dat".into(),
            "cubes per generation".into(),
            vec!["cubes".into()],
        ));
        summary.insert(
            "lattice".into(),
            json!({ "cubes": per_generation.values().map(|v| v.0).sum::<usize>(), "generations": per_generation.len() }),
        );
    }

    if let Some(packing) = read_if_present::<PackingSummary>(&out.join("packing.json"))? {
        let names: Vec<String> = packing
            .reports
            .iter()
            .map(|r| serde_json::to_value(r.kind).map(|v| v.as_str().unwrap_or("").to_string()))
            .collect::<std::result::Result<_, _>>()?;
        let series: Vec<&[f64]> = packing
            .reports
            .iter()
            .map(|r| r.max_by_depth.as_slice())
            .collect();
        let dat = out.join("packing_by_depth.dat");
        let mut columns = vec!["depth"];
        columns.extend(names.iter().map(String::as_str));
        write_dat(&dat, &columns, &depth_rows(&series))?;
        artifacts.push(dat);
        plots.push((
            "packing_by_depth.dat".into(),
            "Carleson packing by depth".into(),
            names.clone(),
        ));
        let max: serde_json::Map<String, Value> = names
            .iter()
            .cloned()
            .zip(packing.reports.iter().map(|r| json!(r.max_sum)))
            .collect();
        summary.insert(
            "packing".into(),
            json!({ "config_hash": packing.config_hash, "label": packing.label, "max_sum": max }),
        );
    }

    if let Some(variation) =
        read_if_present::<VariationSummary>(&out.join("variation_summary.json"))?
    {
        let rows: Vec<Vec<f64>> = variation
            .entries
            .iter()
            .map(|e| {
                vec![
                    e.rho,
                    e.l2_norm,
                    e.ratio,
                    e.probe.as_ref().map_or(f64::NAN, |p| p.ratio),
                ]
            })
            .collect();
        let dat = out.join("variation_by_rho.dat");
        write_dat(&dat, &["rho", "l2_norm", "ratio", "probe_ratio"], &rows)?;
        artifacts.push(dat);
        summary.insert("variation".into(), serde_json::to_value(&variation)?);
    }

    if let Some(detector) = read_if_present::<DiagnosticReport>(&out.join("detector_report.json"))?
    {
        let dat = out.join("detector_series.dat");
        write_dat(
            &dat,
            &["depth", "f_integral", "b_tilde_packing", "b_packing"],
            &depth_rows(&[
                &detector.f_integral,
                &detector.b_tilde_packing,
                &detector.b_packing,
            ]),
        )?;
        artifacts.push(dat);
        plots.push((
            "detector_series.dat".into(),
            format!("detector: {}", detector.label),
            vec![
                "f_integral".into(),
                "b_tilde_packing".into(),
                "b_packing".into(),
            ],
        ));
        summary.insert(
            "detector".into(),
            json!({
                "label": detector.label,
                "config_hash": detector.config_hash,
                "verdict": detector.verdict,
                "reason": detector.reason,
                "domination_holds": detector.domination_holds,
                "generations": detector.generations,
            }),
        );
    }

    if let Some(corona) = read_if_present::<CoronaSummary>(&out.join("corona.json"))? {
        let dat = out.join("corona_root_packing.dat");
        write_dat(
            &dat,
            &["depth", "root_packing"],
            &depth_rows(&[&corona.validation.root_packing_by_depth]),
        )?;
        artifacts.push(dat);
        plots.push((
            "corona_root_packing.dat".into(),
            "corona root packing".into(),
            vec!["root_packing".into()],
        ));
        summary.insert(
            "corona".into(),
            json!({
                "label": corona.label,
                "config_hash": corona.config_hash,
                "bad_cubes": corona.bad_cubes,
                "trees": corona.trees.len(),
                "bad_packing": corona.validation.bad_packing,
                "root_packing": corona.validation.root_packing,
                "failures": corona.validation.failures,
            }),
        );
    }

    if summary.is_empty() {
        return Err(Error::NothingToAggregate);
    }
    let summary_path = out.join("summary.json");
    write_json(&summary_path, &Value::Object(summary))?;
    artifacts.insert(0, summary_path);

    if !plots.is_empty() {
        let mut script =
            String::from("set terminal pngcairo size 900,600\nset key outside\nset grid\n");
        for (file, title, columns) in &plots {
            let stem = file.trim_end_matches(".dat");
            script.push_str(&format!(
                "\nset output '{stem}.png'\nset title '{title}'\nplot "
            ));
            let parts: Vec<String> = columns
                .iter()
                .enumerate()
                .map(|(c, name)| {
                    format!("'{file}' using 1:{} with linespoints title '{name}'", c + 2)
                })
                .collect();
            script.push_str(&parts.join(", \\\n     "));
            script.push('\n');
        }
        let gp = out.join("plot.gp");
        std::fs::write(&gp, script)?;
        artifacts.push(gp);
    }
    Ok(artifacts)
}
