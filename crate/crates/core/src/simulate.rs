//! Seeded synthetic markets for validation.
//!
//! Raw daily drivers (demand with seasonality, a fossil generation mix, fuel
//! and allowance prices as log random walks that move on weekdays only) are
//! pushed through the same cost and intensity formulas as real data. The
//! price ratio then follows the pass-through regression with known
//! coefficients and Gaussian noise. Hourly prices are constant within each
//! day, so volume-weighted and plain daily averages coincide.

use chrono::{DateTime, Datelike, Days, FixedOffset, NaiveDate, Weekday};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::construct::{carbon_cost, carbon_emissions, carbon_intensity, fuel_cost, DailyRecord, DailySeries};
use crate::error::{Error, Result};
use crate::ingest::{
    CarbonPrice, CarbonPriceSeries, FuelMap, FuelPrice, FuelPriceSeries, HourlyPanel, HourlyRecord, ParameterConfig,
};
use crate::rng::{rng, Rng};

/// True coefficients and driver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub zone: String,
    pub start: NaiveDate,
    pub days: usize,
    /// Days simulated before `start` and discarded.
    pub burn_in: usize,
    pub phase4_start: NaiveDate,
    pub beta0: f64,
    pub lags: Vec<usize>,
    pub phi: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    /// Coefficients on `log(D)^2` and `log(D)^3`.
    pub beta4: f64,
    pub beta5: f64,
    pub noise_sd: f64,
    pub log_demand_mean: f64,
    pub demand_ar: f64,
    pub demand_sd: f64,
    pub demand_annual_amplitude: f64,
    pub carbon_start: f64,
    /// Mean daily log change of the allowance price on trading days.
    pub carbon_drift: f64,
    pub carbon_vol: f64,
    /// Raw units (EUR/t, EUR/bbl, EUR/MWh).
    pub fuel_start: FuelMap<f64>,
    pub fuel_vol: f64,
    /// Mean generation shares within fossil output.
    pub mix: FuelMap<f64>,
    pub mix_vol: f64,
    /// Fossil share of demand.
    pub fossil_share: f64,
    /// Initial electricity price over fuel cost ratio.
    pub initial_markup: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            zone: "SIM".into(),
            start: NaiveDate::from_ymd_opt(2016, 1, 1).expect("valid date"),
            days: 3288,
            burn_in: 200,
            phase4_start: NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date"),
            beta0: -1.86,
            lags: vec![1, 2, 3, 4, 5, 7, 14, 21],
            phi: vec![-0.38, -0.28, -0.22, -0.16, -0.12, 0.04, 0.05, 0.09],
            beta1: 0.32,
            beta2: -0.03,
            beta3: 0.18,
            beta4: 0.0,
            beta5: 0.0,
            noise_sd: 0.1,
            // Offsets the mean weekend dip so the mean spread change is near zero.
            log_demand_mean: 1.86 / 0.18 + (0.06 + 0.12) / 7.0,
            demand_ar: 0.8,
            demand_sd: 0.03,
            demand_annual_amplitude: 0.08,
            carbon_start: 8.0,
            carbon_drift: 0.0012,
            carbon_vol: 0.025,
            fuel_start: FuelMap::new(80.0, 60.0, 20.0),
            fuel_vol: 0.015,
            mix: FuelMap::new(0.15, 0.05, 0.80),
            mix_vol: 0.05,
            fossil_share: 0.6,
            initial_markup: 1.5,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lags.len() != self.phi.len() {
            return Err(Error::Validation(format!(
                "{} lags but {} phi values",
                self.lags.len(),
                self.phi.len()
            )));
        }
        if self.lags.contains(&0) {
            return Err(Error::Validation("lags must be positive".into()));
        }
        if self.days == 0 {
            return Err(Error::Validation("simulation needs at least one day".into()));
        }
        let max_lag = self.lags.iter().copied().max().unwrap_or(0);
        if self.burn_in < max_lag {
            return Err(Error::Validation(format!(
                "burn-in {} shorter than maximum lag {max_lag}",
                self.burn_in
            )));
        }
        let positive = [self.noise_sd, self.carbon_start, self.initial_markup, self.fossil_share];
        if positive.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || self.carbon_start <= 0.0 {
            return Err(Error::Validation(
                "noise, prices and shares must be non-negative".into(),
            ));
        }
        if self.fuel_start.iter().any(|(_, p)| !(p > 0.0)) || self.mix.iter().any(|(_, s)| !(s > 0.0)) {
            return Err(Error::Validation(
                "fuel start prices and mix shares must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Default physical parameters used by the generator and the example config.
pub fn default_parameters() -> ParameterConfig {
    let mut provenance = std::collections::BTreeMap::new();
    provenance.insert(
        "heat_rates".into(),
        "inverse of typical net plant efficiencies: coal 38%, oil 38%, gas CCGT 52%".into(),
    );
    provenance.insert(
        "heat_content".into(),
        "net calorific values: steam coal 29.3 GJ/t, crude 5.86 GJ/bbl; gas quoted per MWh".into(),
    );
    provenance.insert(
        "emission_factors".into(),
        "tonnes of carbon per MWh of electricity implied by IPCC default fuel factors at the heat rates above".into(),
    );
    provenance.insert("oxidation_rates".into(), "IPCC default oxidation fractions".into());
    ParameterConfig {
        heat_rates: FuelMap::new(1.0 / 0.38, 1.0 / 0.38, 1.0 / 0.52),
        heat_content: FuelMap::new(29.3 / 3.6, 5.86 / 3.6, 1.0),
        emission_factors: FuelMap::new(0.2526, 0.2007, 0.1044),
        oxidation_rates: FuelMap::new(0.98, 0.99, 0.995),
        molecular_ratio: crate::ingest::CO2_PER_CARBON,
        phase4_start: NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date"),
        provenance,
    }
}

/// A simulated market: the constructed daily series and the raw inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub series: DailySeries,
    /// Trading-day quotes (weekdays, plus the first day).
    pub fuels: FuelPriceSeries,
    pub carbon: CarbonPriceSeries,
    /// Daily fossil generation by fuel, MWh per hour on average.
    pub generation: Vec<FuelMap<f64>>,
}

fn is_trading_day(date: NaiveDate) -> bool {
    !matches!(date.weekday(), Weekday::Sat | Weekday::Sun)
}

fn normal(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Generates a full synthetic market from `seed`.
pub fn simulate(config: &SimulationConfig, params: &ParameterConfig, seed: u64) -> Result<Simulation> {
    config.validate()?;
    params.validate()?;
    let mut rng = rng(seed);
    let total = config.burn_in + config.days + 1;
    let first = config
        .start
        .checked_sub_days(Days::new(config.burn_in as u64 + 1))
        .ok_or_else(|| Error::Validation("start date too early for burn-in".into()))?;

    let mut log_fuel = config.fuel_start.map(|_, p| p.ln());
    let mut log_carbon = config.carbon_start.ln();
    let mut demand_dev = 0.0;
    let mut mix_dev = FuelMap::new(0.0, 0.0, 0.0);
    let base_mix = config.mix.map(|_, s| s.ln());

    let mut dates = Vec::with_capacity(total);
    let mut fuel_raw = Vec::with_capacity(total);
    let mut carbon_raw = Vec::with_capacity(total);
    let mut log_d = Vec::with_capacity(total);
    let mut generation = Vec::with_capacity(total);
    let mut pf = Vec::with_capacity(total);
    let mut intensity = Vec::with_capacity(total);
    let mut emissions = Vec::with_capacity(total);

    for t in 0..total {
        let date = first + Days::new(t as u64);
        if t > 0 && is_trading_day(date) {
            log_fuel = log_fuel.map(|_, v| v + config.fuel_vol * normal(&mut rng));
            log_carbon += config.carbon_drift + config.carbon_vol * normal(&mut rng);
        }
        demand_dev = config.demand_ar * demand_dev + config.demand_sd * normal(&mut rng);
        mix_dev = mix_dev.map(|_, v| 0.9 * v + config.mix_vol * normal(&mut rng));
        let season =
            config.demand_annual_amplitude * (2.0 * std::f64::consts::PI * f64::from(date.ordinal0()) / 365.25).cos();
        let weekly = match date.weekday() {
            Weekday::Sat => -0.06,
            Weekday::Sun => -0.12,
            _ => 0.0,
        };
        let ld = config.log_demand_mean + season + weekly + demand_dev;
        let weights = base_mix.map(|f, b| (b + mix_dev.get(f)).exp());
        let shares = weights.scale(1.0 / weights.total());
        let gen = shares.scale(config.fossil_share * ld.exp());
        let raw = log_fuel.map(|_, v| v.exp());
        let cost = fuel_cost(&params.fuel_prices_per_mwh(&raw), &gen, &params.heat_rates)
            .ok_or_else(|| Error::Numerical("zero simulated generation".into()))?;
        let e = carbon_emissions(&gen, params);
        let i = carbon_intensity(e, gen.total()).ok_or_else(|| Error::Numerical("zero simulated generation".into()))?;
        dates.push(date);
        fuel_raw.push(raw);
        carbon_raw.push(log_carbon.exp());
        log_d.push(ld);
        generation.push(gen);
        pf.push(cost);
        intensity.push(i);
        emissions.push(e);
    }

    let c: Vec<f64> = carbon_raw
        .iter()
        .zip(&intensity)
        .map(|(p, i)| carbon_cost(*p, *i))
        .collect();
    let mut c_tilde = vec![f64::NAN; total];
    for t in 1..total {
        c_tilde[t] = c[t].ln() - c[t - 1].ln();
    }

    let mut s_tilde = vec![0.0; total];
    for t in 1..total {
        let phase4 = dates[t] >= config.phase4_start;
        let ar: f64 = config
            .lags
            .iter()
            .zip(&config.phi)
            .map(|(&l, &p)| if t > l { p * s_tilde[t - l] } else { 0.0 })
            .sum();
        let ld = log_d[t];
        let mean = config.beta0
            + ar
            + config.beta1 * c_tilde[t]
            + if phase4 { config.beta2 * c_tilde[t] } else { 0.0 }
            + config.beta3 * ld
            + config.beta4 * ld * ld
            + config.beta5 * ld * ld * ld;
        s_tilde[t] = mean + config.noise_sd * normal(&mut rng);
    }

    let keep = config.burn_in + 1;
    let mut log_ratio = config.initial_markup.ln();
    for s in &s_tilde[1..keep] {
        log_ratio += s;
    }
    let mut days = Vec::with_capacity(config.days);
    for t in keep..total {
        log_ratio += s_tilde[t];
        let pe = pf[t] * log_ratio.exp();
        let mut rec = DailyRecord::empty(dates[t]);
        rec.pe = Some(pe);
        rec.pe_avg = Some(pe);
        rec.d = Some(log_d[t].exp());
        rec.pf = Some(pf[t]);
        rec.e = Some(emissions[t]);
        rec.i = Some(intensity[t]);
        rec.c = Some(c[t]);
        rec.s = Some(pe - pf[t]);
        rec.s_tilde = Some(s_tilde[t]);
        rec.c_tilde = Some(c_tilde[t]);
        rec.log_d = Some(log_d[t]);
        rec.phase4 = dates[t] >= config.phase4_start;
        days.push(rec);
    }

    let quote_days = (keep..total).filter(|&t| t == keep || is_trading_day(dates[t]));
    let fuels = FuelPriceSeries::new(
        quote_days
            .clone()
            .map(|t| FuelPrice {
                date: dates[t],
                coal: fuel_raw[t].coal,
                oil: fuel_raw[t].oil,
                gas: fuel_raw[t].gas,
            })
            .collect(),
    )?;
    let carbon = CarbonPriceSeries::new(
        quote_days
            .map(|t| CarbonPrice {
                date: dates[t],
                price: carbon_raw[t],
            })
            .collect(),
    )?;

    Ok(Simulation {
        series: DailySeries {
            zone: config.zone.clone(),
            days,
        },
        fuels,
        carbon,
        generation: generation[keep..].to_vec(),
    })
}

/// Last Sunday of a month.
fn last_sunday(year: i32, month: u32) -> NaiveDate {
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    }
    .expect("valid date");
    let last = next.pred_opt().expect("valid date");
    let back = last.weekday().num_days_from_sunday();
    last - Days::new(u64::from(back))
}

/// Central European offset in hours at a UTC instant: summer time runs from
/// 01:00 UTC on the last Sunday of March to 01:00 UTC on the last Sunday of
/// October.
fn cet_offset_hours(utc: chrono::NaiveDateTime) -> i32 {
    let year = utc.year();
    let begin = last_sunday(year, 3).and_hms_opt(1, 0, 0).expect("valid time");
    let end = last_sunday(year, 10).and_hms_opt(1, 0, 0).expect("valid time");
    if utc >= begin && utc < end {
        2
    } else {
        1
    }
}

/// Local hours of one calendar day as timestamps with their offsets.
pub fn local_hours(date: NaiveDate) -> Vec<DateTime<FixedOffset>> {
    let midnight = date.and_hms_opt(0, 0, 0).expect("valid time");
    // Local midnight is never inside a transition for this rule.
    let guess = midnight - chrono::Duration::hours(1);
    let start_utc = midnight - chrono::Duration::hours(i64::from(cet_offset_hours(guess)));
    let mut out = Vec::with_capacity(25);
    let mut utc = start_utc;
    loop {
        let offset = cet_offset_hours(utc);
        let local = utc + chrono::Duration::hours(i64::from(offset));
        if local.date() != date {
            break;
        }
        let tz = FixedOffset::east_opt(offset * 3600).expect("valid offset");
        out.push(DateTime::from_naive_utc_and_offset(utc, tz));
        utc += chrono::Duration::hours(1);
    }
    out
}

/// Expands a simulation to an hourly panel with a demand profile whose mean
/// over each day's hours is one and a constant daily price.
pub fn hourly_panel(sim: &Simulation) -> Result<HourlyPanel> {
    let mut records = Vec::with_capacity(sim.series.len() * 24);
    for (day, gen) in sim.series.days.iter().zip(&sim.generation) {
        let hours = local_hours(day.date);
        let profile: Vec<f64> = hours
            .iter()
            .map(|ts| {
                let h = f64::from(chrono::Timelike::hour(ts));
                1.0 + 0.15 * (2.0 * std::f64::consts::PI * (h - 9.0) / 24.0).sin()
            })
            .collect();
        let norm = profile.iter().sum::<f64>() / profile.len() as f64;
        let demand = day.d.expect("simulated demand");
        let price = day.pe.expect("simulated price");
        for (ts, p) in hours.into_iter().zip(profile) {
            let w = p / norm;
            records.push(HourlyRecord {
                timestamp: ts,
                price,
                demand: demand * w,
                generation: gen.scale(w),
            });
        }
    }
    HourlyPanel::new(sim.series.zone.clone(), records)
}
