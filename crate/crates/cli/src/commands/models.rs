use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cptr_core::cptr::{build_design, fit_variants, phase_cptr, Variant};
use cptr_core::gam::{default_lambda_grid, gam_fit, Criterion, GamFit};
use cptr_core::quantreg::{qr_path, Band, QuantilePath, DEFAULT_TAUS};
use cptr_core::statcore::{normal_p_value, ModelFit, Stars};

use super::{cell, csv_bytes, header, load_spec, load_zones, names, per_zone};
use crate::args::{FitArgs, GamArgs, QuantileArgs};
use crate::context::Context;
use crate::error::{CliError, CliResult};
use crate::svg;

/// Rows are coefficient names in first-seen order, one column per labelled
/// fit, and a final adjusted R-squared row.
fn coefficient_table(fits: &[(String, &ModelFit)]) -> CliResult<Vec<u8>> {
    let mut order: Vec<String> = Vec::new();
    for (_, fit) in fits {
        for n in &fit.names {
            if !order.contains(n) {
                order.push(n.clone());
            }
        }
    }
    let mut rows: Vec<Vec<String>> = order
        .iter()
        .map(|name| {
            let mut row = vec![name.clone()];
            row.extend(fits.iter().map(|(_, f)| match f.index_of(name) {
                Some(i) => cell(f.coefficients[i], f.stars(i)),
                None => String::new(),
            }));
            row
        })
        .collect();
    let mut r2 = vec!["R2_adj".to_string()];
    r2.extend(fits.iter().map(|(_, f)| format!("{:.2}", f.r2_adj)));
    rows.push(r2);
    let mut head = vec!["coefficient".to_string()];
    head.extend(fits.iter().map(|(label, _)| label.clone()));
    csv_bytes(&head, &rows)
}

pub fn fit(ctx: &mut Context, args: &FitArgs) -> CliResult<()> {
    let mut variants: Vec<Variant> = args.variants.iter().map(|v| v.parse()).collect::<Result<_, _>>()?;
    if !variants.contains(&Variant::Baseline) {
        variants.insert(0, Variant::Baseline);
    }
    variants.dedup();
    let spec = load_spec(ctx, args.spec.as_deref())?;
    let zones = load_zones(ctx, &args.inputs)?;
    let mut fits: Vec<(String, BTreeMap<Variant, ModelFit>)> = Vec::new();
    for series in &zones {
        fits.push((series.zone.clone(), fit_variants(series, &spec, &variants)?));
    }

    let baseline: Vec<(String, &ModelFit)> = fits.iter().map(|(z, m)| (z.clone(), &m[&Variant::Baseline])).collect();
    let out_table = args.out_table.clone().unwrap_or_else(|| names::TABLE5.into());
    ctx.write(&out_table, &coefficient_table(&baseline)?)?;

    if variants.contains(&Variant::DailyAverage) {
        let cols: Vec<(String, &ModelFit)> = fits
            .iter()
            .map(|(z, m)| (z.clone(), &m[&Variant::DailyAverage]))
            .collect();
        ctx.write(Path::new(names::TABLE_B1), &coefficient_table(&cols)?)?;
    }
    let poly: Vec<Variant> = variants
        .iter()
        .copied()
        .filter(|v| matches!(v, Variant::Quadratic | Variant::Cubic))
        .collect();
    if !poly.is_empty() {
        let cols: Vec<(String, &ModelFit)> = fits
            .iter()
            .flat_map(|(z, m)| poly.iter().map(move |v| (format!("{z}:{}", v.as_str()), &m[v])))
            .collect();
        ctx.write(Path::new(names::TABLE_B2), &coefficient_table(&cols)?)?;
    }

    if spec.interaction {
        let mut rows = Vec::new();
        for (zone, fit) in &baseline {
            let r = phase_cptr(fit)?;
            rows.push(vec![
                zone.clone(),
                cell(r.cptr_phase3, r.stars_phase3),
                cell(r.cptr_phase4, r.stars_phase4),
                r.pct_variation
                    .map(|p| format!("{p:.2}"))
                    .unwrap_or_else(|| "NA".into()),
                format!("{:.4}", r.se_phase3),
                format!("{:.4}", r.se_phase4),
            ]);
        }
        let head = header(&[
            "zone",
            "cptr_phase3",
            "cptr_phase4",
            "pct_variation",
            "se_phase3",
            "se_phase4",
        ]);
        let out_phase = args.out_phase.clone().unwrap_or_else(|| names::TABLE6.into());
        ctx.write(&out_phase, &csv_bytes(&head, &rows)?)?;
    } else {
        ctx.note("no phase interaction in the spec; phase report skipped");
    }

    let mut long = Vec::new();
    for (zone, by_variant) in &fits {
        for (variant, fit) in by_variant {
            for row in fit.rows() {
                long.push(vec![
                    zone.clone(),
                    variant.as_str().to_string(),
                    row.name.clone(),
                    row.estimate.to_string(),
                    row.se_hac.to_string(),
                    row.se_classical.to_string(),
                    row.p_value.to_string(),
                    row.stars.to_string(),
                ]);
            }
            long.push(vec![
                zone.clone(),
                variant.as_str().to_string(),
                "nobs".into(),
                fit.nobs.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ]);
        }
    }
    let head = header(&[
        "zone",
        "variant",
        "coefficient",
        "estimate",
        "se_hac",
        "se_classical",
        "p_value",
        "stars",
    ]);
    ctx.write(Path::new(names::COEFFICIENTS), &csv_bytes(&head, &long)?)
}

fn band_stars(b: &Band) -> Stars {
    if b.se > 0.0 {
        Stars::from_p(normal_p_value(b.estimate / b.se))
    } else {
        Stars::None
    }
}

/// Three panels: intercept; beta1 and beta2; their sum, each with its band.
pub(crate) fn quantile_svg(zone: &str, bands: &[Band]) -> String {
    let line = |coef: &str, label: &str, color: &'static str| {
        let sel: Vec<&Band> = bands.iter().filter(|b| b.coef == coef).collect();
        svg::Line {
            label: label.into(),
            color,
            points: sel.iter().map(|b| (b.tau, b.estimate)).collect(),
            band: Some(sel.iter().map(|b| (b.tau, b.lo90, b.hi90)).collect()),
        }
    };
    let fig = svg::Figure {
        title: format!("Quantile coefficient paths, {zone} (shaded: 90% bands)"),
        x_label: "tau".into(),
        panels: vec![
            svg::Panel {
                title: "beta0".into(),
                lines: vec![line("beta0", "beta0", "#2ca02c")],
                zero_line: true,
            },
            svg::Panel {
                title: "beta1 and beta2".into(),
                lines: vec![line("beta1", "beta1", "#1f77b4"), line("beta2", "beta2", "#d62728")],
                zero_line: true,
            },
            svg::Panel {
                title: "beta1 + beta2".into(),
                lines: vec![line("beta1+beta2", "beta1+beta2", "#9467bd")],
                zero_line: true,
            },
        ],
        panel_width: 320.0,
        panel_height: 280.0,
        x_ticks: None,
    };
    svg::render(&fig)
}

pub(crate) fn path_rows(bands: &[Band]) -> Vec<Vec<String>> {
    bands
        .iter()
        .map(|b| {
            vec![
                b.tau.to_string(),
                b.coef.clone(),
                b.estimate.to_string(),
                b.lo90.to_string(),
                b.hi90.to_string(),
            ]
        })
        .collect()
}

pub const PATH_HEADER: [&str; 5] = ["tau", "coef", "estimate", "lo90", "hi90"];

pub fn quantile(ctx: &mut Context, args: &QuantileArgs) -> CliResult<()> {
    let seed = ctx.require_seed()?;
    let taus: Vec<f64> = if args.taus.is_empty() {
        DEFAULT_TAUS.to_vec()
    } else {
        args.taus.clone()
    };
    let spec = load_spec(ctx, args.spec.as_deref())?;
    if !spec.interaction {
        return Err(CliError::Usage("quantile paths need the phase interaction term".into()));
    }
    let zones = load_zones(ctx, &args.inputs)?;
    let multi = zones.len() > 1;
    let mut paths: Vec<(String, QuantilePath)> = Vec::new();
    for series in &zones {
        let design = build_design(series, &spec)?;
        paths.push((series.zone.clone(), qr_path(&design, &taus, args.bootstrap, seed)?));
    }

    let mut rows = Vec::new();
    for (zone, path) in &paths {
        for chunk in path.bands.chunks(4) {
            let mut row = vec![zone.clone(), chunk[0].tau.to_string()];
            row.extend(chunk.iter().map(|b| cell(b.estimate, band_stars(b))));
            rows.push(row);
        }
    }
    let head = header(&["zone", "tau", "beta0", "beta1", "beta2", "beta1+beta2"]);
    let out_table = args.out_table.clone().unwrap_or_else(|| names::TABLE7.into());
    ctx.write(&out_table, &csv_bytes(&head, &rows)?)?;

    for (zone, path) in &paths {
        let out_path = match &args.out_path {
            Some(p) => per_zone(p, zone, multi),
            None => PathBuf::from(format!("{}{zone}.csv", names::PATH_PREFIX)),
        };
        ctx.write(&out_path, &csv_bytes(&header(&PATH_HEADER), &path_rows(&path.bands))?)?;
        if let Some(plot) = &args.plot {
            ctx.write(&per_zone(plot, zone, multi), quantile_svg(zone, &path.bands).as_bytes())?;
        }
    }
    ctx.note(format!(
        "pairs bootstrap with {} replications, seed {seed}",
        args.bootstrap
    ));
    Ok(())
}

fn parse_grid(raw: Option<&str>) -> CliResult<Vec<f64>> {
    let Some(raw) = raw else {
        return Ok(default_lambda_grid());
    };
    let bad = |what: &str| CliError::Usage(format!("--lambda-grid: {what} in `{raw}`"));
    let parts: Vec<&str> = raw.split(':').collect();
    if parts.len() == 3 {
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad("bad lower bound"))?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad("bad upper bound"))?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad("bad count"))?;
        if !(lo > 0.0 && hi > lo) || n < 2 {
            return Err(bad("need 0 < lo < hi and at least 2 points"));
        }
        let (a, b) = (lo.log10(), hi.log10());
        return Ok((0..n)
            .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
            .collect());
    }
    raw.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad("unparseable value")))
        .collect()
}

fn gam_table(fits: &[(String, GamFit)]) -> CliResult<Vec<u8>> {
    let names: Vec<String> = fits
        .first()
        .map(|(_, f)| f.parametric.iter().map(|r| r.name.clone()).collect())
        .unwrap_or_default();
    let mut rows: Vec<Vec<String>> = names
        .iter()
        .map(|name| {
            let mut row = vec![name.clone()];
            row.extend(fits.iter().map(|(_, f)| {
                f.parametric
                    .iter()
                    .find(|r| &r.name == name)
                    .map(|r| cell(r.estimate, r.stars))
                    .unwrap_or_default()
            }));
            row
        })
        .collect();
    let mut edf = vec!["edf".to_string()];
    edf.extend(fits.iter().map(|(_, f)| format!("{:.2}{}", f.edf, f.smooth_stars)));
    rows.push(edf);
    let mut r2 = vec!["R2_adj".to_string()];
    r2.extend(fits.iter().map(|(_, f)| format!("{:.2}", f.r2_adj)));
    rows.push(r2);
    let mut head = vec!["coefficient".to_string()];
    head.extend(fits.iter().map(|(z, _)| z.clone()));
    csv_bytes(&head, &rows)
}

pub fn gam(ctx: &mut Context, args: &GamArgs) -> CliResult<()> {
    let criterion: Criterion = args.criterion.parse()?;
    let grid = parse_grid(args.lambda_grid.as_deref())?;
    let spec = load_spec(ctx, args.spec.as_deref())?;
    let zones = load_zones(ctx, &args.inputs)?;
    let mut fits = Vec::new();
    for series in &zones {
        let fit = gam_fit(series, &spec, args.k, &grid, criterion)?;
        ctx.note(format!(
            "{}: lambda {:.4e}, edf {:.4}, smooth p-value {:.4}",
            series.zone, fit.lambda, fit.edf, fit.smooth_p_value
        ));
        fits.push((series.zone.clone(), fit));
    }
    let out = args.out_table.clone().unwrap_or_else(|| names::TABLE_B3.into());
    ctx.write(&out, &gam_table(&fits)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_grid_forms() {
        assert_eq!(parse_grid(None).unwrap().len(), 41);
        let g = parse_grid(Some("1e-2:1e2:5")).unwrap();
        assert_eq!(g.len(), 5);
        assert!((g[2] - 1.0).abs() < 1e-12);
        assert_eq!(parse_grid(Some("0.5, 1,2")).unwrap(), vec![0.5, 1.0, 2.0]);
        assert!(parse_grid(Some("1:0.5:4")).is_err());
        assert!(parse_grid(Some("a,b")).is_err());
    }
}
