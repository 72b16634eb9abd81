//! Loading, validation and calendar alignment of the raw market inputs.
//!
//! Three file families feed the pipeline: an hourly zonal panel (price,
//! demand, generation by fuel), daily fuel settlement prices and daily
//! carbon allowance prices. [`align_calendar`] joins them on a contiguous
//! calendar, forward-filling daily prices over non-trading days and marking
//! days without hourly data as gaps.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Duration, FixedOffset, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HOURLY_HEADER: [&str; 7] = [
    "zone",
    "timestamp",
    "price_eur_mwh",
    "demand_mwh",
    "gen_coal_mwh",
    "gen_oil_mwh",
    "gen_gas_mwh",
];
pub const FUEL_HEADER: [&str; 4] = ["date", "coal_eur_t", "oil_eur_bbl", "gas_eur_mwh"];
pub const CARBON_HEADER: [&str; 2] = ["date", "eua_eur_tco2e"];
pub const ALIGNED_HEADER: [&str; 15] = [
    "zone",
    "date",
    "gap",
    "timestamp",
    "price_eur_mwh",
    "demand_mwh",
    "gen_coal_mwh",
    "gen_oil_mwh",
    "gen_gas_mwh",
    "coal_eur_t",
    "oil_eur_bbl",
    "gas_eur_mwh",
    "fuel_filled",
    "eua_eur_tco2e",
    "carbon_filled",
];

pub const DATE_FORMAT: &str = "%Y-%m-%d";

/// Fossil fuels tracked by the generation panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fuel {
    Coal,
    Oil,
    Gas,
}

impl Fuel {
    pub const ALL: [Fuel; 3] = [Fuel::Coal, Fuel::Oil, Fuel::Gas];

    pub fn as_str(self) -> &'static str {
        match self {
            Fuel::Coal => "coal",
            Fuel::Oil => "oil",
            Fuel::Gas => "gas",
        }
    }
}

/// One value per fuel.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FuelMap<T> {
    pub coal: T,
    pub oil: T,
    pub gas: T,
}

impl<T: Copy> FuelMap<T> {
    pub fn new(coal: T, oil: T, gas: T) -> Self {
        FuelMap { coal, oil, gas }
    }

    pub fn get(&self, fuel: Fuel) -> T {
        match fuel {
            Fuel::Coal => self.coal,
            Fuel::Oil => self.oil,
            Fuel::Gas => self.gas,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Fuel, T)> + '_ {
        Fuel::ALL.into_iter().map(move |f| (f, self.get(f)))
    }

    pub fn map<U: Copy>(&self, mut f: impl FnMut(Fuel, T) -> U) -> FuelMap<U> {
        FuelMap {
            coal: f(Fuel::Coal, self.coal),
            oil: f(Fuel::Oil, self.oil),
            gas: f(Fuel::Gas, self.gas),
        }
    }
}

impl FuelMap<f64> {
    pub fn total(&self) -> f64 {
        self.coal + self.oil + self.gas
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map(|_, v| v * k)
    }
}

/// A single hour of zonal market data.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyRecord {
    /// Local market time with its UTC offset.
    pub timestamp: DateTime<FixedOffset>,
    /// EUR/MWh; may be zero or negative.
    pub price: f64,
    /// MWh.
    pub demand: f64,
    /// MWh by fuel.
    pub generation: FuelMap<f64>,
}

impl HourlyRecord {
    /// Calendar day in local market time.
    pub fn date(&self) -> NaiveDate {
        self.timestamp.date_naive()
    }
}

/// Validated hourly records for one zone, strictly increasing in time.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyPanel {
    pub zone: String,
    records: Vec<HourlyRecord>,
}

impl HourlyPanel {
    /// Sorts the records and checks the panel invariants.
    pub fn new(zone: impl Into<String>, mut records: Vec<HourlyRecord>) -> Result<Self> {
        let zone = zone.into();
        records.sort_by_key(|r| r.timestamp);
        for pair in records.windows(2) {
            if pair[0].timestamp == pair[1].timestamp {
                return Err(Error::Validation(format!(
                    "duplicate hour {} in zone {zone}",
                    pair[1].timestamp.to_rfc3339()
                )));
            }
        }
        for r in &records {
            if !(r.demand >= 0.0) {
                return Err(Error::Validation(format!(
                    "negative demand at {}",
                    r.timestamp.to_rfc3339()
                )));
            }
            if r.generation.iter().any(|(_, g)| !(g >= 0.0)) {
                return Err(Error::Validation(format!(
                    "negative generation at {}",
                    r.timestamp.to_rfc3339()
                )));
            }
        }
        let panel = HourlyPanel { zone, records };
        for (date, hours) in panel.days() {
            if !(23..=25).contains(&hours.len()) {
                return Err(Error::Validation(format!(
                    "day {date} in zone {} has {} hourly records (expected 23, 24 or 25)",
                    panel.zone,
                    hours.len()
                )));
            }
        }
        Ok(panel)
    }

    pub fn records(&self) -> &[HourlyRecord] {
        &self.records
    }

    /// Records grouped by local calendar day, in order.
    pub fn days(&self) -> Vec<(NaiveDate, &[HourlyRecord])> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.records.len() {
            if i == self.records.len() || self.records[i].date() != self.records[start].date() {
                if i > start {
                    out.push((self.records[start].date(), &self.records[start..i]));
                }
                start = i;
            }
        }
        out
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.records.first().map(HourlyRecord::date)
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.records.last().map(HourlyRecord::date)
    }
}

/// Daily fuel settlement quote in raw market units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuelPrice {
    pub date: NaiveDate,
    /// EUR/t
    pub coal: f64,
    /// EUR/bbl
    pub oil: f64,
    /// EUR/MWh
    pub gas: f64,
}

impl FuelPrice {
    pub fn as_map(&self) -> FuelMap<f64> {
        FuelMap::new(self.coal, self.oil, self.gas)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FuelPriceSeries {
    pub rows: Vec<FuelPrice>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarbonPrice {
    pub date: NaiveDate,
    /// EUR/tCO2e
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CarbonPriceSeries {
    pub rows: Vec<CarbonPrice>,
}

impl FuelPriceSeries {
    pub fn new(mut rows: Vec<FuelPrice>) -> Result<Self> {
        rows.sort_by_key(|r| r.date);
        check_daily(rows.iter().map(|r| (r.date, [r.coal, r.oil, r.gas])))?;
        Ok(FuelPriceSeries { rows })
    }
}

impl CarbonPriceSeries {
    pub fn new(mut rows: Vec<CarbonPrice>) -> Result<Self> {
        rows.sort_by_key(|r| r.date);
        check_daily(rows.iter().map(|r| (r.date, [r.price])))?;
        Ok(CarbonPriceSeries { rows })
    }
}

fn check_daily<const N: usize>(rows: impl Iterator<Item = (NaiveDate, [f64; N])>) -> Result<()> {
    let mut previous: Option<NaiveDate> = None;
    for (date, prices) in rows {
        if previous == Some(date) {
            return Err(Error::Validation(format!("duplicate date {date}")));
        }
        if prices.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(Error::Validation(format!("non-positive price on {date}")));
        }
        previous = Some(date);
    }
    Ok(())
}

/// Which daily file family to load.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DailyKind {
    Fuel,
    Carbon,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DailyPrices {
    Fuel(FuelPriceSeries),
    Carbon(CarbonPriceSeries),
}

/// Physical and accounting constants for cost and emission construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterConfig {
    /// Energy input per unit of electricity output.
    pub heat_rates: FuelMap<f64>,
    /// Energy content of one market unit (MWh/t coal, MWh/bbl oil, 1 for gas).
    pub heat_content: FuelMap<f64>,
    /// tC per MWh.
    pub emission_factors: FuelMap<f64>,
    pub oxidation_rates: FuelMap<f64>,
    #[serde(default = "default_molecular_ratio")]
    pub molecular_ratio: f64,
    #[serde(default = "default_phase4_start")]
    pub phase4_start: NaiveDate,
    /// Free-text source notes per entry.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub provenance: BTreeMap<String, String>,
}

pub const CO2_PER_CARBON: f64 = 44.0 / 12.0;

fn default_molecular_ratio() -> f64 {
    CO2_PER_CARBON
}

pub fn default_phase4_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date")
}

impl ParameterConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ParameterConfig =
            serde_json::from_str(text).map_err(|e| Error::Validation(format!("parameter config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if (self.molecular_ratio - CO2_PER_CARBON).abs() >= 1e-4 {
            return Err(Error::Validation(format!(
                "molecular_ratio {} differs from 44/12",
                self.molecular_ratio
            )));
        }
        for fuel in Fuel::ALL {
            let checks = [
                ("heat_rates", self.heat_rates.get(fuel), false),
                ("heat_content", self.heat_content.get(fuel), false),
                ("emission_factors", self.emission_factors.get(fuel), false),
                ("oxidation_rates", self.oxidation_rates.get(fuel), true),
            ];
            for (key, value, unit_interval) in checks {
                let ok = value.is_finite() && value > 0.0 && (!unit_interval || value <= 1.0);
                if !ok {
                    return Err(Error::Validation(format!(
                        "{key}.{} = {value} out of range",
                        fuel.as_str()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Converts raw fuel quotes to EUR per MWh of fuel energy.
    pub fn fuel_prices_per_mwh(&self, raw: &FuelMap<f64>) -> FuelMap<f64> {
        raw.map(|fuel, p| p / self.heat_content.get(fuel))
    }

    /// tCO2 per MWh of electricity for each fuel.
    pub fn fuel_intensity(&self, fuel: Fuel) -> f64 {
        self.emission_factors.get(fuel) * self.oxidation_rates.get(fuel) * self.molecular_ratio
    }
}

/// Inclusive range of calendar days.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::Validation(format!("window end {end} precedes start {start}")));
        }
        Ok(DateRange { start, end })
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> {
        let end = self.end;
        self.start.iter_days().take_while(move |d| *d <= end)
    }

    pub fn len(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuelQuote {
    /// Raw units (EUR/t, EUR/bbl, EUR/MWh).
    pub prices: FuelMap<f64>,
    pub filled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarbonQuote {
    pub price: f64,
    pub filled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedDay {
    pub date: NaiveDate,
    /// No hourly data for this day.
    pub gap: bool,
    pub hours: Vec<HourlyRecord>,
    pub fuel: FuelQuote,
    pub carbon: CarbonQuote,
}

/// One row per calendar day of the study window.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedDataset {
    pub zone: String,
    pub days: Vec<AlignedDay>,
}

impl AlignedDataset {
    pub fn gap_count(&self) -> usize {
        self.days.iter().filter(|d| d.gap).count()
    }

    pub fn filled_count(&self) -> usize {
        self.days.iter().filter(|d| d.fuel.filled || d.carbon.filled).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignOptions {
    /// Longest distance in days a daily quote may be carried forward.
    pub max_fill_days: i64,
}

impl Default for AlignOptions {
    fn default() -> Self {
        AlignOptions { max_fill_days: 7 }
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader)
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn headers<R: Read>(rdr: &mut csv::Reader<R>, path: &Path) -> Result<Vec<String>> {
    let headers = rdr.headers().map_err(|e| parse_error(path, 1, e.to_string()))?;
    Ok(headers.iter().map(str::to_owned).collect())
}

fn check_header(path: &Path, found: &[String], expected: &[&str]) -> Result<()> {
    if found.len() != expected.len() || found.iter().zip(expected).any(|(a, b)| a != b) {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            message: format!("expected header `{}`, found `{}`", expected.join(","), found.join(",")),
        });
    }
    Ok(())
}

fn parse_f64(path: &Path, line: u64, field: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw
        .parse()
        .map_err(|_| parse_error(path, line, format!("{field}: cannot parse `{raw}` as a number")))?;
    if !v.is_finite() {
        return Err(parse_error(path, line, format!("{field}: non-finite value `{raw}`")));
    }
    Ok(v)
}

fn parse_date(path: &Path, line: u64, raw: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(raw, DATE_FORMAT)
        .map_err(|_| parse_error(path, line, format!("unparseable date `{raw}`")))
}

fn parse_timestamp(path: &Path, line: u64, raw: &str) -> Result<DateTime<FixedOffset>> {
    DateTime::parse_from_rfc3339(raw).map_err(|_| {
        parse_error(
            path,
            line,
            format!("unparseable timestamp `{raw}` (ISO-8601 with offset required)"),
        )
    })
}

/// Reads the hourly panel for one zone; rows of other zones are skipped.
pub fn load_hourly_panel(path: impl AsRef<Path>, zone: &str) -> Result<HourlyPanel> {
    let path = path.as_ref();
    read_hourly_panel(open(path)?, path, zone)
}

pub fn read_hourly_panel<R: Read>(reader: R, path: &Path, zone: &str) -> Result<HourlyPanel> {
    let mut rdr = csv_reader(reader);
    let found = headers(&mut rdr, path)?;
    if let Some(unknown) = found
        .iter()
        .find(|h| h.starts_with("gen_") && !HOURLY_HEADER.contains(&h.as_str()))
    {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            message: format!("unknown fuel column `{unknown}`"),
        });
    }
    check_header(path, &found, &HOURLY_HEADER)?;

    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_error(path, line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if &row[0] != zone {
            continue;
        }
        let timestamp = parse_timestamp(path, line, &row[1])?;
        let price = parse_f64(path, line, "price_eur_mwh", &row[2])?;
        let demand = parse_f64(path, line, "demand_mwh", &row[3])?;
        if demand < 0.0 {
            return Err(parse_error(path, line, format!("negative demand {demand}")));
        }
        let mut gens = [0.0; 3];
        for (k, g) in gens.iter_mut().enumerate() {
            *g = parse_f64(path, line, HOURLY_HEADER[4 + k], &row[4 + k])?;
            if *g < 0.0 {
                return Err(parse_error(
                    path,
                    line,
                    format!("negative {} {}", HOURLY_HEADER[4 + k], *g),
                ));
            }
        }
        if !seen.insert(timestamp) {
            return Err(parse_error(
                path,
                line,
                format!("duplicate hour {} for zone {zone}", &row[1]),
            ));
        }
        records.push(HourlyRecord {
            timestamp,
            price,
            demand,
            generation: FuelMap::new(gens[0], gens[1], gens[2]),
        });
    }
    if records.is_empty() {
        return Err(Error::Validation(format!(
            "{}: no rows for zone {zone}",
            path.display()
        )));
    }
    HourlyPanel::new(zone, records)
}

/// Reads a daily fuel or carbon price file.
pub fn load_daily_series(path: impl AsRef<Path>, kind: DailyKind) -> Result<DailyPrices> {
    let path = path.as_ref();
    read_daily_series(open(path)?, path, kind)
}

pub fn load_fuel_prices(path: impl AsRef<Path>) -> Result<FuelPriceSeries> {
    match load_daily_series(path, DailyKind::Fuel)? {
        DailyPrices::Fuel(s) => Ok(s),
        DailyPrices::Carbon(_) => unreachable!(),
    }
}

pub fn load_carbon_prices(path: impl AsRef<Path>) -> Result<CarbonPriceSeries> {
    match load_daily_series(path, DailyKind::Carbon)? {
        DailyPrices::Carbon(s) => Ok(s),
        DailyPrices::Fuel(_) => unreachable!(),
    }
}

pub fn read_daily_series<R: Read>(reader: R, path: &Path, kind: DailyKind) -> Result<DailyPrices> {
    let mut rdr = csv_reader(reader);
    let found = headers(&mut rdr, path)?;
    let expected: &[&str] = match kind {
        DailyKind::Fuel => &FUEL_HEADER,
        DailyKind::Carbon => &CARBON_HEADER,
    };
    check_header(path, &found, expected)?;

    let mut dates = BTreeMap::new();
    let mut fuel_rows = Vec::new();
    let mut carbon_rows = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_error(path, line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let date = parse_date(path, line, &row[0])?;
        if let Some(first) = dates.insert(date, line) {
            return Err(parse_error(
                path,
                line,
                format!("duplicate date {date} (first seen on line {first})"),
            ));
        }
        let mut prices = Vec::with_capacity(expected.len() - 1);
        for (k, field) in expected.iter().enumerate().skip(1) {
            let p = parse_f64(path, line, field, &row[k])?;
            if p <= 0.0 {
                return Err(parse_error(path, line, format!("non-positive {field} {p} on {date}")));
            }
            prices.push(p);
        }
        match kind {
            DailyKind::Fuel => fuel_rows.push(FuelPrice {
                date,
                coal: prices[0],
                oil: prices[1],
                gas: prices[2],
            }),
            DailyKind::Carbon => carbon_rows.push(CarbonPrice { date, price: prices[0] }),
        }
    }
    Ok(match kind {
        DailyKind::Fuel => DailyPrices::Fuel(FuelPriceSeries::new(fuel_rows)?),
        DailyKind::Carbon => DailyPrices::Carbon(CarbonPriceSeries::new(carbon_rows)?),
    })
}

/// Forward-fill cursor over a sorted daily series.
struct FillCursor<'a, T> {
    rows: &'a [T],
    next: usize,
    date_of: fn(&T) -> NaiveDate,
}

impl<'a, T> FillCursor<'a, T> {
    /// Latest row on or before `date`; dates must be queried in increasing order.
    fn at(&mut self, date: NaiveDate) -> Option<&'a T> {
        while self.next < self.rows.len() && (self.date_of)(&self.rows[self.next]) <= date {
            self.next += 1;
        }
        self.next.checked_sub(1).map(|i| &self.rows[i])
    }
}

/// Joins the hourly panel with daily fuel and carbon prices over `window`.
pub fn align_calendar(
    panel: &HourlyPanel,
    fuels: &FuelPriceSeries,
    carbon: &CarbonPriceSeries,
    window: DateRange,
    options: &AlignOptions,
) -> Result<AlignedDataset> {
    let firsts = [
        panel.first_date(),
        fuels.rows.first().map(|r| r.date),
        carbon.rows.first().map(|r| r.date),
    ];
    let lasts = [
        panel.last_date(),
        fuels.rows.last().map(|r| r.date),
        carbon.rows.last().map(|r| r.date),
    ];
    let earliest = firsts.iter().flatten().min().copied();
    let latest = lasts.iter().flatten().max().copied();
    match (earliest, latest) {
        (Some(lo), Some(hi)) => {
            if window.start < lo {
                return Err(Error::Validation(format!(
                    "window start {} precedes all inputs (earliest {lo})",
                    window.start
                )));
            }
            if window.end > hi {
                return Err(Error::Validation(format!(
                    "window end {} follows all inputs (latest {hi})",
                    window.end
                )));
            }
        }
        _ => return Err(Error::Validation("empty inputs".into())),
    }

    let by_day: BTreeMap<NaiveDate, &[HourlyRecord]> = panel.days().into_iter().collect();
    let mut fuel_cursor = FillCursor {
        rows: &fuels.rows,
        next: 0,
        date_of: |r: &FuelPrice| r.date,
    };
    let mut carbon_cursor = FillCursor {
        rows: &carbon.rows,
        next: 0,
        date_of: |r: &CarbonPrice| r.date,
    };
    let limit = Duration::days(options.max_fill_days);

    let mut days = Vec::with_capacity(window.len());
    for date in window.days() {
        let fuel = fuel_cursor
            .at(date)
            .ok_or_else(|| Error::Validation(format!("no fuel price on or before {date}; cannot forward-fill")))?;
        if date - fuel.date > limit {
            return Err(Error::Validation(format!(
                "fuel price gap of {} days before {date} exceeds fill limit {}",
                (date - fuel.date).num_days(),
                options.max_fill_days
            )));
        }
        let co2 = carbon_cursor
            .at(date)
            .ok_or_else(|| Error::Validation(format!("no carbon price on or before {date}; cannot forward-fill")))?;
        if date - co2.date > limit {
            return Err(Error::Validation(format!(
                "carbon price gap of {} days before {date} exceeds fill limit {}",
                (date - co2.date).num_days(),
                options.max_fill_days
            )));
        }
        let hours = by_day.get(&date).map(|h| h.to_vec()).unwrap_or_default();
        days.push(AlignedDay {
            date,
            gap: hours.is_empty(),
            hours,
            fuel: FuelQuote {
                prices: fuel.as_map(),
                filled: fuel.date != date,
            },
            carbon: CarbonQuote {
                price: co2.price,
                filled: co2.date != date,
            },
        });
    }
    Ok(AlignedDataset {
        zone: panel.zone.clone(),
        days,
    })
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// Writes one row per hour; gap days get one row with empty hourly fields.
pub fn write_aligned_csv<W: Write>(data: &AlignedDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Validation(format!("writing aligned dataset: {e}"));
    w.write_record(ALIGNED_HEADER).map_err(io)?;
    for day in &data.days {
        let date = day.date.format(DATE_FORMAT).to_string();
        let daily = [
            day.fuel.prices.coal.to_string(),
            day.fuel.prices.oil.to_string(),
            day.fuel.prices.gas.to_string(),
            flag(day.fuel.filled).to_string(),
            day.carbon.price.to_string(),
            flag(day.carbon.filled).to_string(),
        ];
        if day.hours.is_empty() {
            let mut row = vec![data.zone.clone(), date.clone(), flag(day.gap).to_string()];
            row.extend(std::iter::repeat_n(String::new(), 6));
            row.extend(daily.iter().cloned());
            w.write_record(&row).map_err(io)?;
        }
        for h in &day.hours {
            let mut row = vec![
                data.zone.clone(),
                date.clone(),
                flag(day.gap).to_string(),
                h.timestamp.to_rfc3339(),
                h.price.to_string(),
                h.demand.to_string(),
                h.generation.coal.to_string(),
                h.generation.oil.to_string(),
                h.generation.gas.to_string(),
            ];
            row.extend(daily.iter().cloned());
            w.write_record(&row).map_err(io)?;
        }
    }
    w.flush()
        .map_err(|e| Error::Validation(format!("writing aligned dataset: {e}")))?;
    Ok(())
}

pub fn read_aligned_csv<R: Read>(reader: R, path: &Path) -> Result<AlignedDataset> {
    let mut rdr = csv_reader(reader);
    let found = headers(&mut rdr, path)?;
    check_header(path, &found, &ALIGNED_HEADER)?;
    let mut zone: Option<String> = None;
    let mut days: Vec<AlignedDay> = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| parse_error(path, 0, e.to_string()))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        match &zone {
            None => zone = Some(row[0].to_string()),
            Some(z) if z != &row[0] => return Err(parse_error(path, line, "mixed zones in aligned dataset")),
            _ => {}
        }
        let date = parse_date(path, line, &row[1])?;
        let parse_flag = |raw: &str| -> Result<bool> {
            match raw {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(parse_error(path, line, format!("bad flag `{other}`"))),
            }
        };
        let gap = parse_flag(&row[2])?;
        let fuel = FuelQuote {
            prices: FuelMap::new(
                parse_f64(path, line, "coal_eur_t", &row[9])?,
                parse_f64(path, line, "oil_eur_bbl", &row[10])?,
                parse_f64(path, line, "gas_eur_mwh", &row[11])?,
            ),
            filled: parse_flag(&row[12])?,
        };
        let carbon = CarbonQuote {
            price: parse_f64(path, line, "eua_eur_tco2e", &row[13])?,
            filled: parse_flag(&row[14])?,
        };
        if days.last().map(|d| d.date) != Some(date) {
            days.push(AlignedDay {
                date,
                gap,
                hours: Vec::new(),
                fuel,
                carbon,
            });
        }
        if !row[3].is_empty() {
            let day = days.last_mut().expect("pushed above");
            day.hours.push(HourlyRecord {
                timestamp: parse_timestamp(path, line, &row[3])?,
                price: parse_f64(path, line, "price_eur_mwh", &row[4])?,
                demand: parse_f64(path, line, "demand_mwh", &row[5])?,
                generation: FuelMap::new(
                    parse_f64(path, line, "gen_coal_mwh", &row[6])?,
                    parse_f64(path, line, "gen_oil_mwh", &row[7])?,
                    parse_f64(path, line, "gen_gas_mwh", &row[8])?,
                ),
            });
        }
    }
    Ok(AlignedDataset {
        zone: zone.unwrap_or_default(),
        days,
    })
}

/// Replaces hourly demand with another zone's demand on matching hours.
/// Writes hourly records in the layout read by [`read_hourly_panel`].
pub fn write_hourly_csv<W: Write>(panel: &HourlyPanel, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Validation(format!("writing hourly panel: {e}"));
    w.write_record(HOURLY_HEADER).map_err(io)?;
    for r in panel.records() {
        w.write_record([
            panel.zone.clone(),
            r.timestamp.to_rfc3339(),
            r.price.to_string(),
            r.demand.to_string(),
            r.generation.coal.to_string(),
            r.generation.oil.to_string(),
            r.generation.gas.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::Validation(format!("writing hourly panel: {e}")))
}

pub fn write_fuel_csv<W: Write>(fuels: &FuelPriceSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Validation(format!("writing fuel prices: {e}"));
    w.write_record(FUEL_HEADER).map_err(io)?;
    for r in &fuels.rows {
        w.write_record([
            r.date.format(DATE_FORMAT).to_string(),
            r.coal.to_string(),
            r.oil.to_string(),
            r.gas.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::Validation(format!("writing fuel prices: {e}")))
}

pub fn write_carbon_csv<W: Write>(carbon: &CarbonPriceSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Validation(format!("writing carbon prices: {e}"));
    w.write_record(CARBON_HEADER).map_err(io)?;
    for r in &carbon.rows {
        w.write_record([r.date.format(DATE_FORMAT).to_string(), r.price.to_string()])
            .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::Validation(format!("writing carbon prices: {e}")))
}

pub fn override_demand(panel: &HourlyPanel, demand_source: &HourlyPanel) -> Result<HourlyPanel> {
    let source: BTreeMap<_, _> = demand_source
        .records()
        .iter()
        .map(|r| (r.timestamp, r.demand))
        .collect();
    let records = panel
        .records()
        .iter()
        .map(|r| {
            let demand = *source.get(&r.timestamp).ok_or_else(|| {
                Error::Validation(format!(
                    "demand zone {} has no record for {}",
                    demand_source.zone,
                    r.timestamp.to_rfc3339()
                ))
            })?;
            Ok(HourlyRecord { demand, ..r.clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    HourlyPanel::new(panel.zone.clone(), records)
}
