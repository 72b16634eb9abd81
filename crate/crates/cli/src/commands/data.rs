use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use cptr_core::construct::{
    construct_daily, describe as describe_stats, switching_series, write_series_csv, SwitchingPoint,
};
use cptr_core::ingest::{
    align_calendar, load_carbon_prices, load_fuel_prices, load_hourly_panel, override_demand, read_aligned_csv,
    write_aligned_csv, write_carbon_csv, write_fuel_csv, write_hourly_csv, AlignOptions, DateRange,
};
use cptr_core::rng::derive_seed;
use cptr_core::simulate::{hourly_panel, simulate as run_simulation, SimulationConfig};
use cptr_core::unitroot::{adf_test, kpss_test, Deterministic};

use super::{csv_bytes, header, load_zones, names, series_file};
use crate::args::{ConstructArgs, DescribeArgs, SimulateArgs, Split, SwitchingArgs, UnitrootArgs};
use crate::context::Context;
use crate::error::{CliError, CliResult};
use crate::svg;

fn single_zone(ctx: &Context, explicit: Option<&String>) -> CliResult<String> {
    match (explicit, ctx.zones.as_slice()) {
        (Some(z), _) => Ok(z.clone()),
        (None, [z]) => Ok(z.clone()),
        _ => Err(CliError::Usage(
            "construct needs exactly one zone (--zone or a single --zones entry)".into(),
        )),
    }
}

fn to_bytes(f: impl FnOnce(&mut Vec<u8>) -> cptr_core::Result<()>) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

pub fn construct(ctx: &mut Context, args: &ConstructArgs) -> CliResult<()> {
    let zone = single_zone(ctx, args.zone.as_ref())?;
    let params = ctx.parameters()?;
    let mut panel = load_hourly_panel(ctx.input(&args.hourly)?, &zone)?;
    if let Some(path) = &args.demand {
        let source_zone = args.demand_zone.clone().unwrap_or_else(|| zone.clone());
        let source = load_hourly_panel(ctx.input(path)?, &source_zone)?;
        panel = override_demand(&panel, &source)?;
    }
    let fuels = load_fuel_prices(ctx.input(&args.fuels)?)?;
    let carbon = load_carbon_prices(ctx.input(&args.carbon)?)?;
    if args.max_fill_days < 0 {
        return Err(CliError::Usage("--max-fill-days must be non-negative".into()));
    }
    let options = AlignOptions {
        max_fill_days: args.max_fill_days,
    };
    let aligned = align_calendar(&panel, &fuels, &carbon, DateRange::new(args.from, args.to)?, &options)?;
    let series = construct_daily(&aligned, &params);
    ctx.note(format!(
        "{zone}: {} days, {} gap days, {} forward-filled quotes",
        aligned.days.len(),
        aligned.gap_count(),
        aligned.filled_count()
    ));

    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(series_file(&zone)));
    ctx.write(&out, &to_bytes(|b| write_series_csv(&series, b))?)?;
    let aligned_out = args
        .aligned_out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("aligned_{zone}.csv")));
    ctx.write(&aligned_out, &to_bytes(|b| write_aligned_csv(&aligned, b))?)?;
    Ok(())
}

fn in_split(split: Split, phase4: bool) -> bool {
    match split {
        Split::Full => true,
        Split::Phase3 => !phase4,
        Split::Phase4 => phase4,
    }
}

fn opt4(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "NA".into())
}

pub fn describe(ctx: &mut Context, args: &DescribeArgs) -> CliResult<()> {
    let zones = load_zones(ctx, &args.inputs)?;
    let split_name = match args.split {
        Split::Full => "full",
        Split::Phase3 => "phase3",
        Split::Phase4 => "phase4",
    };
    let mut rows = Vec::new();
    for series in &zones {
        let column = series.column(&args.column)?;
        let values: Vec<f64> = series
            .days
            .iter()
            .zip(column)
            .filter(|(d, _)| !d.gap && in_split(args.split, d.phase4))
            .filter_map(|(_, v)| v)
            .collect();
        if values.is_empty() {
            return Err(CliError::Core(cptr_core::Error::Insufficient(format!(
                "{}: the {split_name} split of `{}` is empty",
                series.zone, args.column
            ))));
        }
        let s = describe_stats(&values)?;
        rows.push(vec![
            series.zone.clone(),
            split_name.to_string(),
            s.count.to_string(),
            format!("{:.4}", s.mean),
            format!("{:.4}", s.median),
            format!("{:.4}", s.sd),
            format!("{:.4}", s.max),
            format!("{:.4}", s.min),
            opt4(s.skewness),
            opt4(s.kurtosis),
        ]);
    }
    let head = header(&[
        "zone", "split", "count", "mean", "median", "sd", "max", "min", "skewness", "kurtosis",
    ]);
    let out = args.out.clone().unwrap_or_else(|| names::TABLE3.into());
    ctx.write(&out, &csv_bytes(&head, &rows)?)
}

pub fn unitroot(ctx: &mut Context, args: &UnitrootArgs) -> CliResult<()> {
    let variant: Deterministic = args.variant.parse()?;
    let zones = load_zones(ctx, &args.inputs)?;
    let mut rows = Vec::new();
    for series in &zones {
        let mut adf = vec![series.zone.clone(), "ADF".into()];
        let mut kpss = vec![series.zone.clone(), "KPSS".into()];
        for col in &args.columns {
            let values: Vec<f64> = series
                .days
                .iter()
                .zip(series.column(col)?)
                .filter(|(d, _)| !d.gap)
                .filter_map(|(_, v)| v)
                .collect();
            let star = |reject: bool| if reject { "*" } else { "" };
            let a = adf_test(&values, args.max_lag, variant)?;
            adf.push(format!("{:.4}{}", a.statistic, star(a.reject_5pct)));
            let k = kpss_test(&values, args.max_lag, variant)?;
            kpss.push(format!("{:.4}{}", k.statistic, star(k.reject_5pct)));
        }
        rows.push(adf);
        rows.push(kpss);
    }
    let mut head = header(&["zone", "test"]);
    head.extend(args.columns.iter().cloned());
    ctx.note(format!(
        "deterministic terms: {}; * marks rejection at 5%",
        variant.as_str()
    ));
    let out = args.out.clone().unwrap_or_else(|| names::TABLE2.into());
    ctx.write(&out, &csv_bytes(&head, &rows)?)
}

pub fn switching(ctx: &mut Context, args: &SwitchingArgs) -> CliResult<()> {
    let params = ctx.parameters()?;
    let path = ctx.input(&args.aligned)?;
    let file = std::fs::File::open(&path).map_err(|e| CliError::io(&path, e))?;
    let aligned = read_aligned_csv(file, &path)?;
    let points = switching_series(&aligned, &params)?;
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                p.date.to_string(),
                p.carbon_price.to_string(),
                p.switching_price.to_string(),
                u8::from(p.coal_competitive).to_string(),
            ]
        })
        .collect();
    let head = header(&["date", "carbon_price", "switching_price", "coal_competitive"]);
    let out = args.out.clone().unwrap_or_else(|| names::SWITCHING.into());
    ctx.write(&out, &csv_bytes(&head, &rows)?)?;
    if let Some(plot) = &args.plot {
        ctx.write(plot, switching_svg(&points).as_bytes())?;
    }
    Ok(())
}

/// Carbon price against the switching price over time.
pub(crate) fn switching_svg(points: &[SwitchingPoint]) -> String {
    let first = points.first().map(|p| p.date).unwrap_or_default();
    let x = |d: NaiveDate| (d - first).num_days() as f64;
    let mut year_ticks = Vec::new();
    if let (Some(a), Some(b)) = (points.first(), points.last()) {
        for year in a.date.year()..=b.date.year() {
            let jan1 = NaiveDate::from_ymd_opt(year, 1, 1).expect("valid date");
            if jan1 >= a.date {
                year_ticks.push((x(jan1), year.to_string()));
            }
        }
    }
    let fig = svg::Figure {
        title: "Carbon spot price vs switching price".into(),
        x_label: "date".into(),
        panels: vec![svg::Panel {
            title: "EUR/tCO2".into(),
            lines: vec![
                svg::Line {
                    label: "carbon price".into(),
                    color: "#1f77b4",
                    points: points.iter().map(|p| (x(p.date), p.carbon_price)).collect(),
                    band: None,
                },
                svg::Line {
                    label: "switching price".into(),
                    color: "#d62728",
                    points: points.iter().map(|p| (x(p.date), p.switching_price)).collect(),
                    band: None,
                },
            ],
            zero_line: true,
        }],
        panel_width: 720.0,
        panel_height: 320.0,
        x_ticks: Some(year_ticks),
    };
    svg::render(&fig)
}

pub fn simulate(ctx: &mut Context, args: &SimulateArgs) -> CliResult<()> {
    let seed = ctx.require_seed()?;
    let mut config = match &args.sim_config {
        Some(path) => {
            ctx.input(path)?;
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            serde_json::from_str::<SimulationConfig>(&text)
                .map_err(|e| CliError::Usage(format!("{}: invalid simulation config: {e}", path.display())))?
        }
        None => SimulationConfig::default(),
    };
    if let Some(days) = args.days {
        config.days = days;
    }
    if let Some(start) = args.start {
        config.start = start;
    }
    let params = ctx.parameters()?;
    let zones = if ctx.zones.is_empty() {
        vec![config.zone.clone()]
    } else {
        ctx.zones.clone()
    };
    for (i, zone) in zones.iter().enumerate() {
        config.zone = zone.clone();
        let sim = run_simulation(&config, &params, derive_seed(seed, &[i as u64]))?;
        ctx.write(
            Path::new(&series_file(zone)),
            &to_bytes(|b| write_series_csv(&sim.series, b))?,
        )?;
        if args.raw {
            let panel = hourly_panel(&sim)?;
            ctx.write(
                Path::new(&format!("hourly_{zone}.csv")),
                &to_bytes(|b| write_hourly_csv(&panel, b))?,
            )?;
            ctx.write(
                Path::new(&format!("fuels_{zone}.csv")),
                &to_bytes(|b| write_fuel_csv(&sim.fuels, b))?,
            )?;
            ctx.write(
                Path::new(&format!("carbon_{zone}.csv")),
                &to_bytes(|b| write_carbon_csv(&sim.carbon, b))?,
            )?;
        }
    }
    ctx.note(format!(
        "zone i uses seed derive_seed(seed, [i]); true beta1 {}, beta2 {}, beta3 {}",
        config.beta1, config.beta2, config.beta3
    ));
    Ok(())
}
