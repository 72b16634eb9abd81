mod data;
mod models;
mod report;

use std::path::{Path, PathBuf};

use cptr_core::construct::{load_series_csv, DailySeries};
use cptr_core::cptr::CptrSpec;
use cptr_core::statcore::Stars;

use crate::args::{Command, SeriesInputs};
use crate::context::Context;
use crate::error::{CliError, CliResult};

pub use report::{record_replay, replay};

/// Default artifact names shared by producers and `report`.
pub mod names {
    pub const TABLE2: &str = "table2_unitroot.csv";
    pub const TABLE3: &str = "table3_describe.csv";
    pub const TABLE5: &str = "table5_fit.csv";
    pub const TABLE6: &str = "table6_phase.csv";
    pub const TABLE7: &str = "table7_quantile.csv";
    pub const TABLE_B1: &str = "tableB1_daily_average.csv";
    pub const TABLE_B2: &str = "tableB2_polynomial.csv";
    pub const TABLE_B3: &str = "tableB3_gam.csv";
    pub const COEFFICIENTS: &str = "coefficients_fit.csv";
    pub const SWITCHING: &str = "switching.csv";
    pub const PATH_PREFIX: &str = "quantile_path_";
    pub const SERIES_PREFIX: &str = "series_";
}

pub fn name(command: &Command) -> &'static str {
    match command {
        Command::Construct(_) => "construct",
        Command::Describe(_) => "describe",
        Command::Unitroot(_) => "unitroot",
        Command::Fit(_) => "fit",
        Command::Quantile(_) => "quantile",
        Command::Gam(_) => "gam",
        Command::Switching(_) => "switching",
        Command::Report(_) => "report",
        Command::Simulate(_) => "simulate",
        Command::Replay(_) => "replay",
    }
}

pub fn dispatch(ctx: &mut Context, command: &Command) -> CliResult<()> {
    match command {
        Command::Construct(a) => data::construct(ctx, a),
        Command::Describe(a) => data::describe(ctx, a),
        Command::Unitroot(a) => data::unitroot(ctx, a),
        Command::Switching(a) => data::switching(ctx, a),
        Command::Simulate(a) => data::simulate(ctx, a),
        Command::Fit(a) => models::fit(ctx, a),
        Command::Quantile(a) => models::quantile(ctx, a),
        Command::Gam(a) => models::gam(ctx, a),
        Command::Report(a) => report::report(ctx, a),
        Command::Replay(_) => unreachable!("replay is handled before dispatch"),
    }
}

/// Serialises a table to CSV bytes.
pub(crate) fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Usage(format!("writing table: {e}"));
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Usage(format!("writing table: {e}")))
}

pub(crate) fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

pub(crate) fn cell(estimate: f64, stars: Stars) -> String {
    format!("{estimate:.4}{stars}")
}

/// `dir/stem.ext` becomes `dir/stem_zone.ext` when several zones share one
/// output option.
pub(crate) fn per_zone(path: &Path, zone: &str, multi: bool) -> PathBuf {
    if !multi {
        return path.to_path_buf();
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let file = match path.extension() {
        Some(ext) => format!("{stem}_{zone}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{zone}"),
    };
    path.with_file_name(file)
}

pub(crate) fn series_file(zone: &str) -> String {
    format!("{}{zone}.csv", names::SERIES_PREFIX)
}

/// Resolves and loads the constructed series for every zone of the run.
pub(crate) fn load_zones(ctx: &mut Context, inputs: &SeriesInputs) -> CliResult<Vec<DailySeries>> {
    let pairs: Vec<(String, PathBuf)> = if inputs.series.is_empty() {
        if ctx.zones.is_empty() {
            return Err(CliError::Usage("name the inputs with --series or --zones".into()));
        }
        ctx.zones
            .iter()
            .map(|z| (z.clone(), ctx.input_dir.join(series_file(z))))
            .collect()
    } else if ctx.zones.is_empty() {
        inputs
            .series
            .iter()
            .map(|p| {
                let stem = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                let zone = stem.strip_prefix(names::SERIES_PREFIX).unwrap_or(&stem).to_string();
                (zone, p.clone())
            })
            .collect()
    } else if ctx.zones.len() == inputs.series.len() {
        ctx.zones.iter().cloned().zip(inputs.series.iter().cloned()).collect()
    } else {
        return Err(CliError::Usage(format!(
            "{} zones but {} --series files",
            ctx.zones.len(),
            inputs.series.len()
        )));
    };
    let mut seen = std::collections::BTreeSet::new();
    pairs
        .into_iter()
        .map(|(zone, path)| {
            if !seen.insert(zone.clone()) {
                return Err(CliError::Usage(format!("zone {zone} given twice")));
            }
            ctx.input(&path)?;
            Ok(load_series_csv(&path, &zone)?)
        })
        .collect()
}

pub(crate) fn load_spec(ctx: &mut Context, path: Option<&Path>) -> CliResult<CptrSpec> {
    let Some(path) = path else {
        return Ok(CptrSpec::default());
    };
    ctx.input(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let spec: CptrSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: invalid model spec: {e}", path.display())))?;
    spec.validate()?;
    Ok(spec)
}
