use std::collections::HashMap;

use chrono::{Days, NaiveDate};
use cptr_core::construct::{DailyRecord, DailySeries};
use cptr_core::cptr::*;
use cptr_core::error::Error;
use cptr_core::rng::rng;
use cptr_core::simulate::{default_parameters, simulate, SimulationConfig};
use cptr_core::statcore::acf_pacf;
use rand::Rng;

fn sim(seed: u64, overrides: impl FnOnce(&mut SimulationConfig)) -> DailySeries {
    let mut cfg = SimulationConfig::default();
    overrides(&mut cfg);
    simulate(&cfg, &default_parameters(), seed).unwrap().series
}

#[test]
fn noise_free_data_is_recovered_exactly() {
    let cfg = SimulationConfig {
        noise_sd: 0.0,
        days: 600,
        start: NaiveDate::from_ymd_opt(2020, 3, 1).unwrap(),
        ..Default::default()
    };
    let series = simulate(&cfg, &default_parameters(), 4).unwrap().series;
    let fit = fit_baseline(&series, &CptrSpec::default()).unwrap();
    let truth: Vec<f64> = std::iter::once(cfg.beta0)
        .chain(cfg.phi.iter().copied())
        .chain([cfg.beta1, cfg.beta2, cfg.beta3])
        .collect();
    for (i, t) in truth.iter().enumerate() {
        assert!(
            (fit.coefficients[i] - t).abs() <= 1e-8 * t.abs().max(1.0),
            "{}: {} vs {t}",
            fit.names[i],
            fit.coefficients[i]
        );
    }
}

#[test]
fn constant_carbon_cost_is_collinear() {
    let mut series = sim(1, |c| c.days = 400);
    for d in &mut series.days {
        d.c_tilde = Some(0.0);
    }
    match fit_baseline(&series, &CptrSpec::default()) {
        Err(Error::RankDeficient(names)) => {
            assert!(
                names.contains(&"beta1".to_string()) && names.contains(&"beta2".to_string()),
                "{names:?}"
            );
        }
        other => panic!("expected rank deficiency, got {other:?}"),
    }
}

#[test]
fn lag_columns_match_calendar_shift_oracle() {
    let mut g = rng(99);
    let start = NaiveDate::from_ymd_opt(2019, 5, 1).unwrap();
    let mut days = Vec::new();
    for t in 0..400u64 {
        if g.random::<f64>() < 0.03 {
            continue;
        }
        let mut r = DailyRecord::empty(start + Days::new(t));
        r.gap = g.random::<f64>() < 0.02;
        r.s_tilde = (g.random::<f64>() > 0.02).then(|| g.random::<f64>() - 0.5);
        r.c_tilde = Some(g.random::<f64>() - 0.5);
        r.log_d = Some(10.0 + g.random::<f64>());
        days.push(r);
    }
    let series = DailySeries { zone: "R".into(), days };
    let spec = CptrSpec::default();
    let design = build_design(&series, &spec).unwrap();

    let by_date: HashMap<NaiveDate, &DailyRecord> = series.days.iter().map(|d| (d.date, d)).collect();
    let usable = |d: NaiveDate| by_date.get(&d).filter(|r| r.valid()).map(|r| r.s_tilde.unwrap());
    let mut expected_rows = 0;
    for day in &series.days {
        let lags: Option<Vec<f64>> = DEFAULT_LAGS
            .iter()
            .map(|&l| usable(day.date - Days::new(l as u64)))
            .collect();
        if !day.valid() || lags.is_none() {
            assert!(!design.dates().contains(&day.date));
            continue;
        }
        expected_rows += 1;
        let row = design.dates().iter().position(|d| *d == day.date).expect("row kept");
        for (j, v) in lags.unwrap().iter().enumerate() {
            assert_eq!(design.x()[(row, 1 + j)], *v);
        }
        assert_eq!(design.y()[row], day.s_tilde.unwrap());
    }
    assert_eq!(design.nrows(), expected_rows);
}

#[test]
fn daily_average_matches_baseline_when_prices_flat_within_day() {
    let mut series = sim(2, |c| {
        c.days = 800;
        c.start = NaiveDate::from_ymd_opt(2019, 6, 1).unwrap();
    });
    // The level-based recomputation has no predecessor for the first day.
    series.days[0].s_tilde = None;
    let fits = fit_variants(
        &series,
        &CptrSpec::default(),
        &[Variant::Baseline, Variant::DailyAverage],
    )
    .unwrap();
    let a = &fits[&Variant::Baseline];
    let b = &fits[&Variant::DailyAverage];
    assert_eq!(a.names, b.names);
    for i in 0..a.names.len() {
        assert!((a.coefficients[i] - b.coefficients[i]).abs() < 1e-9, "{}", a.names[i]);
    }
}

#[test]
fn polynomial_term_insignificant_under_linear_truth() {
    let mut inside = 0;
    let reps = 60;
    for seed in 0..reps {
        let series = sim(500 + seed, |_| {});
        let fit = fit_baseline(&series, &Variant::Quadratic.apply(&CptrSpec::default())).unwrap();
        let i = fit.index_of("beta4").unwrap();
        if fit.coefficients[i].abs() <= 2.0 * fit.se_hac(i) {
            inside += 1;
        }
    }
    assert!(inside as f64 >= 0.9 * reps as f64, "{inside}/{reps}");
}

#[test]
fn residuals_show_no_serial_correlation() {
    let series = sim(7, |_| {});
    let fit = fit_baseline(&series, &CptrSpec::default()).unwrap();
    let resid: Vec<f64> = fit.residuals.iter().copied().collect();
    let c = acf_pacf(&resid, 30).unwrap();
    assert!(c.acf_outside_share() <= 0.10, "{}", c.acf_outside_share());
}

#[test]
fn phase3_subsample_is_consistent() {
    let series = sim(8, |_| {});
    let full = fit_baseline(&series, &CptrSpec::default()).unwrap();
    let spec = CptrSpec {
        interaction: false,
        sample_end: NaiveDate::from_ymd_opt(2020, 12, 31),
        ..Default::default()
    };
    let sub = fit_baseline(&series, &spec).unwrap();
    let i = full.index_of("beta1").unwrap();
    let j = sub.index_of("beta1").unwrap();
    assert!((full.coefficients[i] - sub.coefficients[j]).abs() <= 2.0 * full.se_hac(i));
}

#[test]
fn phase_report_is_self_consistent() {
    let series = sim(9, |_| {});
    let fit = fit_baseline(&series, &CptrSpec::default()).unwrap();
    let r = phase_cptr(&fit).unwrap();
    let b1 = fit.coef("beta1").unwrap();
    let b2 = fit.coef("beta2").unwrap();
    assert_eq!(r.cptr_phase4, b1 + b2);
    assert_eq!(
        r.pct_variation.unwrap(),
        100.0 * (r.cptr_phase4 - r.cptr_phase3) / r.cptr_phase3 * (b2 / (r.cptr_phase4 - r.cptr_phase3))
    );
    let (i1, i2) = (fit.index_of("beta1").unwrap(), fit.index_of("beta2").unwrap());
    let v = &fit.vcov_hac;
    let var = v[(i1, i1)] + v[(i2, i2)] + 2.0 * v[(i1, i2)];
    assert!((r.se_phase4.powi(2) - var).abs() <= 1e-15 * var.max(1e-300) * 10.0);
}
