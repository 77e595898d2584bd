use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use evalcards_core::cards::{self, HeatScale, MetricsExport, RenderOptions};
use evalcards_core::metrics::MetricOptions;
use evalcards_core::survey::{load_surveys, SurveyBundle};
use evalcards_core::synth::{generate_bundle_with, SynthProfile};
use evalcards_core::taxonomy::{
    config_skeleton, slugify, validate_config, ComponentModel, Severity, L1,
};
use evalcards_core::telemetry::{load_bundle, ParseOptions};
use evalcards_core::Execution;

use crate::output::{guard, read_text, sidecar_for, write_file, write_sidecar, CliError, Console};
use crate::{AnalyzeArgs, CompareArgs, ExecArgs, RenderArgs, SynthArgs};

fn execution(args: &ExecArgs) -> Execution {
    if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

pub fn taxonomy_init(console: &Console, path: &Path, force: bool) -> Result<(), CliError> {
    guard(path, force)?;
    write_file(path, &config_skeleton())?;
    console.info(&format!(
        "wrote {}; assign an action to every functionality, then run `evalcards taxonomy validate`",
        path.display()
    ));
    Ok(())
}

/// Resolves a configuration file, printing every diagnostic.
fn load_model(console: &Console, path: &Path) -> Result<ComponentModel, CliError> {
    let report = validate_config(&read_text(path)?);
    for d in &report.diagnostics {
        console.diagnostic(path, d.line, d.severity == Severity::Warning, &d.message);
    }
    match report.model {
        Some(model) if report.is_ok() => Ok(model),
        _ => {
            let n = report.errors().count();
            Err(CliError::user(format!(
                "{}: {n} error(s); configuration not resolved",
                path.display()
            )))
        }
    }
}

pub fn taxonomy_validate(console: &Console, path: &Path) -> Result<(), CliError> {
    let model = load_model(console, path)?;
    let per_l1: Vec<String> = L1::ALL
        .iter()
        .map(|l1| {
            format!(
                "{} {}",
                model.components.iter().filter(|c| c.l1_id == *l1).count(),
                l1.as_str()
            )
        })
        .collect();
    console.info(&format!(
        "{}: system `{}` resolves to {} terminal components ({})",
        path.display(),
        model.system_name,
        model.len(),
        per_l1.join(", ")
    ));
    Ok(())
}

pub fn analyze(console: &Console, args: &AnalyzeArgs) -> Result<(), CliError> {
    guard(&args.out, args.force)?;
    let exec = execution(&args.exec);
    let model = load_model(console, &args.taxonomy)?;
    let parse = ParseOptions {
        sort_timestamps: args.sort_timestamps,
        allow_unknown_components: args.allow_unknown_components,
    };
    let bundle =
        load_bundle(&args.logs, &model, &parse, exec).map_err(|e| CliError::user(e.to_string()))?;
    let survey = match &args.surveys {
        Some(dir) => load_surveys(dir, &model).map_err(|e| CliError::user(e.to_string()))?,
        None => SurveyBundle::default(),
    };
    let options = MetricOptions {
        idle_cap_ms: args.idle_cap.0,
        collapse_repeats: args.collapse_repeats,
    };
    let export = cards::analyze(&bundle, &survey, &options, exec)
        .map_err(|e| CliError::user(e.to_string()))?;
    let quarantined: usize = bundle.sessions.iter().map(|s| s.quarantined.len()).sum();
    if quarantined > 0 {
        console.diagnostic(
            &args.logs,
            None,
            true,
            &format!("{quarantined} record(s) with unknown components quarantined"),
        );
    }
    let body = export.to_canonical_json();
    write_file(&args.out, &body)?;
    let mut inputs = vec![args.taxonomy.as_path(), args.logs.as_path()];
    inputs.extend(args.surveys.as_deref());
    write_sidecar(
        &sidecar_for(&args.out),
        "analyze",
        &inputs,
        &[(args.out.clone(), body)],
    )?;
    console.info(&format!(
        "{}: {} sessions, {} users, {} components -> {}",
        export.system_name,
        export.descriptive.sessions.len(),
        bundle.users().len(),
        export.components.len(),
        args.out.display()
    ));
    Ok(())
}

fn read_exports(paths: &[PathBuf]) -> Result<Vec<MetricsExport>, CliError> {
    paths
        .iter()
        .map(|p| {
            MetricsExport::from_json(&read_text(p)?)
                .map_err(|e| CliError::user(format!("{}: {e}", p.display())))
        })
        .collect()
}

fn render_options(log_scale: bool, exec: &ExecArgs) -> RenderOptions {
    RenderOptions {
        heat_scale: if log_scale {
            HeatScale::Log
        } else {
            HeatScale::Linear
        },
        exec: execution(exec),
    }
}

/// One file name per export, unique even when system names repeat.
fn report_names(exports: &[MetricsExport]) -> Vec<String> {
    let mut used = BTreeSet::new();
    exports
        .iter()
        .map(|e| {
            let base = match slugify(&e.system_name) {
                s if s.is_empty() => "system".to_string(),
                s => s,
            };
            let mut name = format!("{base}.html");
            let mut k = 2;
            while !used.insert(name.clone()) {
                name = format!("{base}_{k}.html");
                k += 1;
            }
            name
        })
        .collect()
}

pub fn render(console: &Console, args: &RenderArgs) -> Result<(), CliError> {
    let exports = read_exports(&args.exports)?;
    let opts = render_options(args.log_scale, &args.exec);
    let names = report_names(&exports);
    let paths: Vec<PathBuf> = names.iter().map(|n| args.out.join(n)).collect();
    for p in &paths {
        guard(p, args.force)?;
    }
    let mut outputs = Vec::new();
    for (i, (export, path)) in exports.iter().zip(&paths).enumerate() {
        let peers: Vec<MetricsExport> = exports
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, e)| e.clone())
            .collect();
        let html = cards::render_within(export, &peers, &opts)
            .map_err(|e| CliError::user(e.to_string()))?;
        write_file(path, &html)?;
        console.info(&format!(
            "{}: 8 sections -> {}",
            export.system_name,
            path.display()
        ));
        outputs.push((path.clone(), html));
    }
    let inputs: Vec<&Path> = args.exports.iter().map(PathBuf::as_path).collect();
    write_sidecar(
        &args.out.join("render.run.json"),
        "render",
        &inputs,
        &outputs,
    )
}

pub fn compare(console: &Console, args: &CompareArgs) -> Result<(), CliError> {
    if args.exports.len() < 2 {
        return Err(CliError::user(format!(
            "compare needs at least two exports, got {}",
            args.exports.len()
        )));
    }
    guard(&args.out, args.force)?;
    let exports = read_exports(&args.exports)?;
    let opts = render_options(args.log_scale, &args.exec);
    let card = cards::build_between(&exports, &opts).map_err(|e| CliError::user(e.to_string()))?;
    let html = card.to_html();
    write_file(&args.out, &html)?;
    let inputs: Vec<&Path> = args.exports.iter().map(PathBuf::as_path).collect();
    write_sidecar(
        &sidecar_for(&args.out),
        "compare",
        &inputs,
        &[(args.out.clone(), html)],
    )?;
    console.info(&format!(
        "compared {} -> {}",
        card.system_name,
        args.out.display()
    ));
    Ok(())
}

/// Files written by `synth`, removed first under `--force` so stale logs
/// from an earlier, larger run cannot linger.
const SYNTH_OUTPUTS: [&str; 4] = ["logs", "surveys", "manifest.json", "synth.run.json"];

fn list_files(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            list_files(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

pub fn synth(console: &Console, args: &SynthArgs) -> Result<(), CliError> {
    let occupied = SYNTH_OUTPUTS
        .iter()
        .map(|n| args.out.join(n))
        .filter(|p| p.exists())
        .collect::<Vec<_>>();
    if !occupied.is_empty() {
        if !args.force {
            return Err(CliError::user(format!(
                "{} already holds synthetic output; pass --force to overwrite",
                args.out.display()
            )));
        }
        for p in occupied {
            let removed = if p.is_dir() {
                fs::remove_dir_all(&p)
            } else {
                fs::remove_file(&p)
            };
            removed
                .map_err(|e| CliError::internal(format!("cannot remove {}: {e}", p.display())))?;
        }
    }
    let model = load_model(console, &args.taxonomy)?;
    let mut profile = SynthProfile::from_toml(&read_text(&args.profile)?)
        .map_err(|e| CliError::user(format!("{}: {e}", args.profile.display())))?;
    if let Some(seed) = args.seed {
        profile.seed = seed;
    }
    let output = generate_bundle_with(&model, &profile, execution(&args.exec))
        .map_err(|e| CliError::user(format!("{}: {e}", args.profile.display())))?;
    output
        .write_to(&args.out)
        .map_err(|e| CliError::internal(e.to_string()))?;

    let mut files = Vec::new();
    list_files(&args.out, &mut files)
        .map_err(|e| CliError::internal(format!("cannot list {}: {e}", args.out.display())))?;
    let mut outputs = Vec::new();
    for f in files
        .into_iter()
        .filter(|f| f.file_name().is_some_and(|n| n != "synth.run.json"))
    {
        let body = fs::read_to_string(&f)
            .map_err(|e| CliError::internal(format!("cannot read {}: {e}", f.display())))?;
        outputs.push((f, body));
    }
    write_sidecar(
        &args.out.join("synth.run.json"),
        "synth",
        &[&args.taxonomy, &args.profile],
        &outputs,
    )?;
    console.info(&format!(
        "{}: {} sessions for {} users (seed {}) -> {}",
        model.system_name,
        output.bundle.sessions.len(),
        profile.n_users,
        profile.seed,
        args.out.display()
    ));
    Ok(())
}
