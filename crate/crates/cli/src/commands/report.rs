use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use cptr_core::construct::SwitchingPoint;
use cptr_core::quantreg::{Band, Z90};

use super::data::switching_svg;
use super::models::{quantile_svg, PATH_HEADER};
use super::names;
use crate::args::{ReplayArgs, ReportArgs};
use crate::context::{absolute, file_digest, Context, RunManifest};
use crate::error::{CliError, CliResult};

/// How a bundled table's header is validated.
enum Schema {
    Exact(&'static [&'static str]),
    /// Coefficient-by-fit layout: first column fixed, at least one fit.
    Coefficients,
}

const TABLES: [(&str, Schema); 7] = [
    (
        names::TABLE3,
        Schema::Exact(&[
            "zone", "split", "count", "mean", "median", "sd", "max", "min", "skewness", "kurtosis",
        ]),
    ),
    (names::TABLE5, Schema::Coefficients),
    (
        names::TABLE6,
        Schema::Exact(&[
            "zone",
            "cptr_phase3",
            "cptr_phase4",
            "pct_variation",
            "se_phase3",
            "se_phase4",
        ]),
    ),
    (
        names::TABLE7,
        Schema::Exact(&["zone", "tau", "beta0", "beta1", "beta2", "beta1+beta2"]),
    ),
    (names::TABLE_B1, Schema::Coefficients),
    (names::TABLE_B2, Schema::Coefficients),
    (names::TABLE_B3, Schema::Coefficients),
];

const SWITCHING_HEADER: [&str; 4] = ["date", "carbon_price", "switching_price", "coal_competitive"];

fn schema_error(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Core(cptr_core::Error::Schema {
        path: path.to_path_buf(),
        message: message.into(),
    })
}

fn read_table(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| schema_error(path, e.to_string()))?;
    let head: Vec<String> = rdr
        .headers()
        .map_err(|e| schema_error(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = rdr
        .records()
        .map(|r| {
            r.map(|rec| rec.iter().map(str::to_string).collect())
                .map_err(|e| schema_error(path, e.to_string()))
        })
        .collect::<CliResult<Vec<Vec<String>>>>()?;
    Ok((head, rows))
}

fn check_header(path: &Path, found: &[String], expected: &[&str]) -> CliResult<()> {
    if found.len() != expected.len() || found.iter().zip(expected).any(|(a, b)| a != b) {
        return Err(schema_error(
            path,
            format!("expected columns {}, found {}", expected.join(","), found.join(",")),
        ));
    }
    Ok(())
}

fn parse_num(path: &Path, raw: &str) -> CliResult<f64> {
    raw.parse()
        .map_err(|_| schema_error(path, format!("not a number: `{raw}`")))
}

fn load_bands(path: &Path) -> CliResult<Vec<Band>> {
    let (head, rows) = read_table(path)?;
    check_header(path, &head, &PATH_HEADER)?;
    rows.iter()
        .map(|r| {
            let (lo, hi) = (parse_num(path, &r[3])?, parse_num(path, &r[4])?);
            Ok(Band {
                tau: parse_num(path, &r[0])?,
                coef: r[1].clone(),
                estimate: parse_num(path, &r[2])?,
                se: (hi - lo) / (2.0 * Z90),
                lo90: lo,
                hi90: hi,
            })
        })
        .collect()
}

fn load_switching(path: &Path) -> CliResult<Vec<SwitchingPoint>> {
    let (head, rows) = read_table(path)?;
    check_header(path, &head, &SWITCHING_HEADER)?;
    rows.iter()
        .map(|r| {
            Ok(SwitchingPoint {
                date: NaiveDate::parse_from_str(&r[0], "%Y-%m-%d")
                    .map_err(|_| schema_error(path, format!("not a date: `{}`", r[0])))?,
                carbon_price: parse_num(path, &r[1])?,
                switching_price: parse_num(path, &r[2])?,
                coal_competitive: r[3] == "1",
            })
        })
        .collect()
}

pub fn report(ctx: &mut Context, args: &ReportArgs) -> CliResult<()> {
    let dir = ctx.input_dir.clone();
    let bundle = &args.bundle;
    let mut found = 0;
    for (file, schema) in &TABLES {
        let path = dir.join(file);
        if !path.exists() {
            ctx.note(format!("{file} absent: upstream command not run"));
            continue;
        }
        ctx.input(&path)?;
        let (head, _) = read_table(&path)?;
        match schema {
            Schema::Exact(expected) => check_header(&path, &head, expected)?,
            Schema::Coefficients => {
                if head.first().map(String::as_str) != Some("coefficient") || head.len() < 2 {
                    return Err(schema_error(&path, "expected a `coefficient` column followed by fits"));
                }
            }
        }
        let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        ctx.write(&bundle.join(file), &bytes)?;
        found += 1;
    }

    let mut path_files: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| CliError::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(names::PATH_PREFIX) && n.ends_with(".csv"))
        })
        .collect();
    path_files.sort();
    if path_files.is_empty() {
        ctx.note("no quantile path files: quantile plots absent");
    }
    for path in &path_files {
        ctx.input(path)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let zone = stem.trim_start_matches(names::PATH_PREFIX);
        let bands = load_bands(path)?;
        ctx.write(
            &bundle.join(format!("quantile_{zone}.svg")),
            quantile_svg(zone, &bands).as_bytes(),
        )?;
        found += 1;
    }

    let switching = dir.join(names::SWITCHING);
    if switching.exists() {
        ctx.input(&switching)?;
        let points = load_switching(&switching)?;
        ctx.write(&bundle.join("switching.svg"), switching_svg(&points).as_bytes())?;
        found += 1;
    } else {
        ctx.note(format!("{} absent: switching plot skipped", names::SWITCHING));
    }

    if found == 0 {
        return Err(CliError::Usage(format!(
            "no upstream artifacts found in {}",
            dir.display()
        )));
    }
    Ok(())
}

pub struct ReplayOutcome {
    pub manifest: PathBuf,
    pub verified: usize,
    pub into: PathBuf,
}

/// Reruns the recorded command into a fresh directory and compares every
/// output digest with the manifest.
pub fn replay(args: &ReplayArgs) -> CliResult<ReplayOutcome> {
    let manifest_path = absolute(&args.manifest);
    let manifest = RunManifest::load(&manifest_path)?;
    if manifest.command == "replay" {
        return Err(CliError::Usage("a replay manifest cannot itself be replayed".into()));
    }
    let into = match &args.into {
        Some(p) => absolute(p),
        None => manifest_path
            .parent()
            .unwrap_or(Path::new("."))
            .join(format!("replay_{}", manifest.run_id())),
    };
    std::env::set_current_dir(&manifest.cwd).map_err(|e| CliError::io(&manifest.cwd, e))?;
    for input in &manifest.inputs {
        let now = file_digest(Path::new(&input.path))?;
        if now != input.sha256 {
            return Err(CliError::Usage(format!(
                "input {} changed since the recorded run",
                input.path
            )));
        }
    }
    let mut argv = manifest.argv.clone();
    argv.extend([
        "--out-dir".to_string(),
        into.display().to_string(),
        "--input-dir".to_string(),
        manifest.input_dir.clone(),
    ]);
    crate::run(argv)?;

    let mut differing = Vec::new();
    for output in &manifest.outputs {
        let digest = file_digest(&into.join(&output.path)).unwrap_or_default();
        if digest != output.sha256 {
            differing.push(output.path.clone());
        }
    }
    if !differing.is_empty() {
        return Err(CliError::Mismatch(format!("outputs differ: {}", differing.join(", "))));
    }
    Ok(ReplayOutcome {
        manifest: manifest_path,
        verified: manifest.outputs.len(),
        into,
    })
}

/// Records the replay itself.
pub fn record_replay(ctx: &mut Context, outcome: &ReplayOutcome) -> CliResult<()> {
    ctx.input(&outcome.manifest)?;
    ctx.note(format!(
        "{} outputs reproduced byte-identically in {}",
        outcome.verified,
        outcome.into.display()
    ));
    Ok(())
}
