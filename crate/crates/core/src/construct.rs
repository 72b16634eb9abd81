//! Daily variable construction: prices, fuel cost, emissions, carbon
//! intensity and cost, the spread and its log-difference transforms, plus
//! the coal/gas switching price and descriptive statistics.

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::ingest::{AlignedDataset, Fuel, FuelMap, ParameterConfig, DATE_FORMAT};

pub const SERIES_HEADER: [&str; 14] = [
    "date", "pe", "d", "pf", "e", "i", "c", "s", "s_tilde", "c_tilde", "log_d", "phase4", "valid", "pe_avg",
];

/// Derived variables for one calendar day. `None` marks an undefined value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DailyRecord {
    pub date: NaiveDate,
    pub gap: bool,
    /// Volume-weighted price, EUR/MWh.
    pub pe: Option<f64>,
    /// Unweighted mean of hourly prices, EUR/MWh.
    pub pe_avg: Option<f64>,
    /// Mean hourly demand, MWh.
    pub d: Option<f64>,
    /// Fuel cost of generation, EUR/MWh.
    pub pf: Option<f64>,
    /// Emissions, tCO2e.
    pub e: Option<f64>,
    /// Carbon intensity, tCO2e/MWh.
    pub i: Option<f64>,
    /// Carbon cost, EUR/MWh.
    pub c: Option<f64>,
    pub s: Option<f64>,
    pub s_tilde: Option<f64>,
    pub c_tilde: Option<f64>,
    pub log_d: Option<f64>,
    pub phase4: bool,
}

impl DailyRecord {
    pub fn empty(date: NaiveDate) -> Self {
        DailyRecord {
            date,
            ..Default::default()
        }
    }

    /// Usable as the current row of a pass-through regression.
    pub fn valid(&self) -> bool {
        !self.gap && self.s_tilde.is_some() && self.c_tilde.is_some() && self.log_d.is_some()
    }
}

/// Constructed daily series for one zone on a contiguous calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    pub zone: String,
    pub days: Vec<DailyRecord>,
}

/// Which daily electricity price enters the spread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceBasis {
    #[default]
    VolumeWeighted,
    DailyAverage,
}

impl DailySeries {
    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    /// Log-differenced price/fuel-cost ratio for the chosen price basis.
    pub fn s_tilde(&self, basis: PriceBasis) -> Vec<Option<f64>> {
        match basis {
            PriceBasis::VolumeWeighted => self.days.iter().map(|d| d.s_tilde).collect(),
            PriceBasis::DailyAverage => {
                let log_ratio: Vec<Option<f64>> = self
                    .days
                    .iter()
                    .map(|d| match (d.pe_avg, d.pf) {
                        (Some(p), Some(f)) if !d.gap && p > 0.0 && f > 0.0 => Some(p.ln() - f.ln()),
                        _ => None,
                    })
                    .collect();
                log_diff(&self.days, &log_ratio)
            }
        }
    }

    /// Values of one named column, in day order.
    pub fn column(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let pick: fn(&DailyRecord) -> Option<f64> = match name {
            "pe" => |r| r.pe,
            "pe_avg" => |r| r.pe_avg,
            "d" => |r| r.d,
            "pf" => |r| r.pf,
            "e" => |r| r.e,
            "i" => |r| r.i,
            "c" => |r| r.c,
            "s" => |r| r.s,
            "s_tilde" => |r| r.s_tilde,
            "c_tilde" => |r| r.c_tilde,
            "log_d" => |r| r.log_d,
            other => return Err(Error::Validation(format!("unknown series column `{other}`"))),
        };
        Ok(self.days.iter().map(pick).collect())
    }
}

pub fn volume_weighted_price(prices: &[f64], demand: &[f64]) -> Option<f64> {
    assert_eq!(prices.len(), demand.len(), "price/demand length mismatch");
    let total: f64 = demand.iter().sum();
    if prices.is_empty() || !(total > 0.0) {
        return None;
    }
    Some(prices.iter().zip(demand).map(|(p, d)| d / total * p).sum())
}

/// Mean over the hours actually present (23 or 25 on DST days).
pub fn average_demand(demand: &[f64]) -> Option<f64> {
    if demand.is_empty() {
        return None;
    }
    Some(demand.iter().sum::<f64>() / demand.len() as f64)
}

/// Generation-weighted fuel cost; `prices` already in EUR/MWh.
pub fn fuel_cost(prices: &FuelMap<f64>, generation: &FuelMap<f64>, heat_rates: &FuelMap<f64>) -> Option<f64> {
    let total = generation.total();
    if !(total > 0.0) {
        return None;
    }
    let weighted: f64 = Fuel::ALL
        .iter()
        .map(|&f| prices.get(f) * generation.get(f) * heat_rates.get(f))
        .sum();
    Some(weighted / total)
}

pub fn carbon_emissions(generation: &FuelMap<f64>, config: &ParameterConfig) -> f64 {
    Fuel::ALL
        .iter()
        .map(|&f| {
            generation.get(f) * config.emission_factors.get(f) * config.oxidation_rates.get(f) * config.molecular_ratio
        })
        .sum()
}

pub fn carbon_intensity(emissions: f64, total_generation: f64) -> Option<f64> {
    (total_generation > 0.0).then(|| emissions / total_generation)
}

pub fn carbon_cost(carbon_price: f64, intensity: f64) -> f64 {
    carbon_price * intensity
}

fn log_diff(days: &[DailyRecord], logs: &[Option<f64>]) -> Vec<Option<f64>> {
    let mut out = vec![None; logs.len()];
    for t in 1..logs.len() {
        let consecutive = days[t].date.pred_opt() == Some(days[t - 1].date);
        if let (true, Some(now), Some(prev)) = (consecutive, logs[t], logs[t - 1]) {
            out[t] = Some(now - prev);
        }
    }
    out
}

/// Populates the spread, log transforms and phase indicator.
///
/// Days with a non-positive log argument, and the day after them, get no
/// log-difference; nothing is shifted or imputed.
pub fn transform(series: &mut DailySeries, phase4_start: NaiveDate) {
    let positive = |v: Option<f64>| v.filter(|x| *x > 0.0);
    let mut ratio_logs = Vec::with_capacity(series.len());
    let mut cost_logs = Vec::with_capacity(series.len());
    for day in &mut series.days {
        day.phase4 = day.date >= phase4_start;
        day.s = match (day.pe, day.pf) {
            (Some(p), Some(f)) => Some(p - f),
            _ => None,
        };
        day.log_d = positive(day.d).map(f64::ln);
        let usable = !day.gap;
        ratio_logs.push(match (positive(day.pe), positive(day.pf)) {
            (Some(p), Some(f)) if usable => Some(p.ln() - f.ln()),
            _ => None,
        });
        cost_logs.push(positive(day.c).filter(|_| usable).map(f64::ln));
    }
    let s_tilde = log_diff(&series.days, &ratio_logs);
    let c_tilde = log_diff(&series.days, &cost_logs);
    for (day, (s, c)) in series.days.iter_mut().zip(s_tilde.into_iter().zip(c_tilde)) {
        day.s_tilde = s;
        day.c_tilde = c;
    }
}

/// Builds every daily variable from an aligned dataset.
pub fn construct_daily(data: &AlignedDataset, config: &ParameterConfig) -> DailySeries {
    let days = data
        .days
        .iter()
        .map(|day| {
            let mut rec = DailyRecord::empty(day.date);
            rec.gap = day.gap;
            if day.gap {
                return rec;
            }
            let prices: Vec<f64> = day.hours.iter().map(|h| h.price).collect();
            let demand: Vec<f64> = day.hours.iter().map(|h| h.demand).collect();
            let generation = day.hours.iter().fold(FuelMap::<f64>::default(), |acc, h| {
                acc.map(|f, v| v + h.generation.get(f))
            });
            rec.pe = volume_weighted_price(&prices, &demand);
            rec.pe_avg = Some(prices.iter().sum::<f64>() / prices.len() as f64);
            rec.d = average_demand(&demand);
            let fuel_prices = config.fuel_prices_per_mwh(&day.fuel.prices);
            rec.pf = fuel_cost(&fuel_prices, &generation, &config.heat_rates);
            let e = carbon_emissions(&generation, config);
            rec.e = Some(e);
            rec.i = carbon_intensity(e, generation.total());
            rec.c = rec.i.map(|i| carbon_cost(day.carbon.price, i));
            rec
        })
        .collect();
    let mut series = DailySeries {
        zone: data.zone.clone(),
        days,
    };
    transform(&mut series, config.phase4_start);
    series
}

/// Carbon price at which coal and gas plants have equal marginal cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchingPoint {
    pub date: NaiveDate,
    pub carbon_price: f64,
    pub switching_price: f64,
    /// Carbon price below the switching price.
    pub coal_competitive: bool,
}

/// `(p_gas - p_coal) / (I_coal - I_gas)`; undefined unless coal is dirtier.
pub fn switching_price(gas_cost: f64, coal_cost: f64, coal_intensity: f64, gas_intensity: f64) -> Result<f64> {
    if !(coal_intensity > gas_intensity) {
        return Err(Error::Validation(format!(
            "switching price undefined: coal intensity {coal_intensity} not above gas intensity {gas_intensity}"
        )));
    }
    Ok((gas_cost - coal_cost) / (coal_intensity - gas_intensity))
}

pub fn coal_competitive(carbon_price: f64, switching: f64) -> bool {
    carbon_price < switching
}

/// Daily switching prices from aligned fuel and carbon quotes.
pub fn switching_series(data: &AlignedDataset, config: &ParameterConfig) -> Result<Vec<SwitchingPoint>> {
    let i_coal = config.fuel_intensity(Fuel::Coal);
    let i_gas = config.fuel_intensity(Fuel::Gas);
    data.days
        .iter()
        .map(|day| {
            let p = config.fuel_prices_per_mwh(&day.fuel.prices);
            let coal = p.coal * config.heat_rates.coal;
            let gas = p.gas * config.heat_rates.gas;
            let sw = switching_price(gas, coal, i_coal, i_gas)?;
            Ok(SwitchingPoint {
                date: day.date,
                carbon_price: day.carbon.price,
                switching_price: sw,
                coal_competitive: coal_competitive(day.carbon.price, sw),
            })
        })
        .collect()
}

/// Sample moments of a series.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DescStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub max: f64,
    pub min: f64,
    /// g1 = m3 / m2^(3/2); `None` for fewer than 3 points or zero variance.
    pub skewness: Option<f64>,
    /// Excess kurtosis g2 = m4 / m2^2 - 3.
    pub kurtosis: Option<f64>,
}

pub fn describe(series: &[f64]) -> Result<DescStats> {
    let n = series.len();
    if n < 2 {
        return Err(Error::Insufficient(format!(
            "describe needs at least 2 observations, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = series.iter().sum::<f64>() / nf;
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in &sorted {
        let dev = x - mean;
        let sq = dev * dev;
        m2 += sq;
        m3 += sq * dev;
        m4 += sq * sq;
    }
    let sd = (m2 / (nf - 1.0)).sqrt();
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    let shape = n >= 3 && m2 > 0.0;
    Ok(DescStats {
        count: n,
        mean,
        median,
        sd,
        max: sorted[n - 1],
        min: sorted[0],
        skewness: shape.then(|| m3 / m2.powf(1.5)),
        kurtosis: shape.then(|| m4 / (m2 * m2) - 3.0),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_series_csv<W: Write>(series: &DailySeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::Validation(format!("writing series: {e}"));
    w.write_record(SERIES_HEADER).map_err(err)?;
    for r in &series.days {
        w.write_record([
            r.date.format(DATE_FORMAT).to_string(),
            fmt_opt(r.pe),
            fmt_opt(r.d),
            fmt_opt(r.pf),
            fmt_opt(r.e),
            fmt_opt(r.i),
            fmt_opt(r.c),
            fmt_opt(r.s),
            fmt_opt(r.s_tilde),
            fmt_opt(r.c_tilde),
            fmt_opt(r.log_d),
            u8::from(r.phase4).to_string(),
            u8::from(r.valid()).to_string(),
            fmt_opt(r.pe_avg),
        ])
        .map_err(err)?;
    }
    w.flush()
        .map_err(|e| Error::Validation(format!("writing series: {e}")))?;
    Ok(())
}

pub fn read_series_csv<R: Read>(reader: R, path: &Path, zone: &str) -> Result<DailySeries> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.iter().ne(SERIES_HEADER.iter().copied()) {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            message: format!("expected header `{}`", SERIES_HEADER.join(",")),
        });
    }
    let mut days = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| parse_err(0, e.to_string()))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let date = NaiveDate::parse_from_str(&row[0], DATE_FORMAT)
            .map_err(|_| parse_err(line, format!("unparseable date `{}`", &row[0])))?;
        let num = |k: usize| -> Result<Option<f64>> {
            let raw = &row[k];
            if raw.is_empty() {
                return Ok(None);
            }
            raw.parse::<f64>()
                .map(Some)
                .map_err(|_| parse_err(line, format!("{}: cannot parse `{raw}`", SERIES_HEADER[k])))
        };
        let rec = DailyRecord {
            date,
            pe: num(1)?,
            d: num(2)?,
            pf: num(3)?,
            e: num(4)?,
            i: num(5)?,
            c: num(6)?,
            s: num(7)?,
            s_tilde: num(8)?,
            c_tilde: num(9)?,
            log_d: num(10)?,
            phase4: &row[11] == "1",
            pe_avg: num(13)?,
            gap: false,
        };
        let gap = rec.pe.is_none() && rec.d.is_none() && rec.e.is_none();
        days.push(DailyRecord { gap, ..rec });
    }
    for pair in days.windows(2) {
        if pair[1].date <= pair[0].date {
            return Err(parse_err(0, format!("dates not increasing at {}", pair[1].date)));
        }
    }
    Ok(DailySeries {
        zone: zone.to_string(),
        days,
    })
}

pub fn load_series_csv(path: impl AsRef<Path>, zone: &str) -> Result<DailySeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_series_csv(file, path, zone)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ParameterConfig {
        ParameterConfig {
            heat_rates: FuelMap::new(2.0, 2.5, 1.8),
            heat_content: FuelMap::new(6.98, 1.7, 1.0),
            emission_factors: FuelMap::new(0.1, 0.08, 0.05),
            oxidation_rates: FuelMap::new(1.0, 1.0, 1.0),
            molecular_ratio: 3.6667,
            phase4_start: crate::ingest::default_phase4_start(),
            provenance: Default::default(),
        }
    }

    #[test]
    fn volume_weighted_examples() {
        assert_eq!(
            volume_weighted_price(&[40.0; 24], &[(1..=24).map(f64::from).collect::<Vec<_>>()].concat()),
            Some(40.0)
        );
        assert_eq!(volume_weighted_price(&[10.0, 20.0], &[1.0, 3.0]), Some(17.5));
        let p = [3.0, 9.0, 12.0];
        let vw = volume_weighted_price(&p, &[5.0; 3]).unwrap();
        assert!((vw - 8.0).abs() < 1e-12);
        assert_eq!(volume_weighted_price(&p, &[0.0; 3]), None);
    }

    #[test]
    fn average_demand_uses_actual_hours() {
        assert_eq!(average_demand(&[1000.0; 24]), Some(1000.0));
        assert_eq!(average_demand(&[1000.0; 23]), Some(1000.0));
        assert_eq!(average_demand(&[0.0; 23]), Some(0.0));
        assert_eq!(average_demand(&[]), None);
    }

    #[test]
    fn fuel_cost_examples() {
        let hr = FuelMap::new(2.0, 1.0, 1.0);
        assert_eq!(
            fuel_cost(&FuelMap::new(30.0, 0.0, 0.0), &FuelMap::new(7.0, 0.0, 0.0), &hr),
            Some(60.0)
        );
        let ones = FuelMap::new(1.0, 1.0, 1.0);
        assert_eq!(
            fuel_cost(&FuelMap::new(10.0, 20.0, 0.0), &FuelMap::new(1.0, 1.0, 0.0), &ones),
            Some(15.0)
        );
        let c = fuel_cost(&FuelMap::new(10.0, 999.0, 0.0), &FuelMap::new(1.0, 0.0, 0.0), &hr).unwrap();
        assert_eq!(c, 20.0);
        assert_eq!(
            fuel_cost(&FuelMap::new(1.0, 1.0, 1.0), &FuelMap::default(), &ones),
            None
        );
    }

    #[test]
    fn emissions_and_intensity() {
        let config = cfg();
        assert_eq!(carbon_emissions(&FuelMap::default(), &config), 0.0);
        let e = carbon_emissions(&FuelMap::new(100.0, 0.0, 0.0), &config);
        assert!((e - 36.667).abs() < 1e-9);
        assert_eq!(carbon_intensity(50.0, 100.0), Some(0.5));
        assert_eq!(carbon_intensity(50.0, 0.0), None);
        assert_eq!(carbon_cost(80.0, 0.5), 40.0);
        assert_eq!(carbon_cost(80.0, 0.0), 0.0);
    }

    #[test]
    fn switching_examples() {
        assert_eq!(switching_price(20.0, 20.0, 0.9, 0.4).unwrap(), 0.0);
        assert!((switching_price(60.0, 20.0, 0.9, 0.4).unwrap() - 80.0).abs() < 1e-12);
        let neg = switching_price(20.0, 60.0, 0.9, 0.4).unwrap();
        assert!(neg < 0.0);
        for co2 in [0.01, 1.0, 100.0] {
            assert!(!coal_competitive(co2, neg));
        }
        assert!(switching_price(1.0, 1.0, 0.4, 0.4).is_err());
        assert!(switching_price(1.0, 1.0, 0.3, 0.4).is_err());
    }

    fn series(vals: &[(f64, f64, f64)]) -> DailySeries {
        let start = NaiveDate::from_ymd_opt(2020, 12, 30).unwrap();
        DailySeries {
            zone: "Z".into(),
            days: vals
                .iter()
                .zip(start.iter_days())
                .map(|(&(pe, pf, c), date)| DailyRecord {
                    date,
                    pe: Some(pe),
                    pf: Some(pf),
                    c: Some(c),
                    d: Some(1000.0),
                    ..Default::default()
                })
                .collect(),
        }
    }

    #[test]
    fn transform_examples() {
        let mut s = series(&[(50.0, 20.0, 10.0); 4]);
        transform(&mut s, crate::ingest::default_phase4_start());
        assert_eq!(s.days[0].s_tilde, None);
        for d in &s.days[1..] {
            assert_eq!(d.s_tilde, Some(0.0));
            assert_eq!(d.c_tilde, Some(0.0));
        }
        assert_eq!(s.days[0].s, Some(30.0));
        assert!(!s.days[1].phase4 && s.days[2].phase4);

        let mut s = series(&[(50.0, 20.0, 10.0), (100.0, 20.0, 10.0)]);
        transform(&mut s, crate::ingest::default_phase4_start());
        assert!((s.days[1].s_tilde.unwrap() - 2f64.ln()).abs() < 1e-15);

        let mut s = series(&[
            (50.0, 20.0, 10.0),
            (-3.0, 20.0, 10.0),
            (50.0, 20.0, 10.0),
            (50.0, 20.0, 10.0),
        ]);
        transform(&mut s, crate::ingest::default_phase4_start());
        assert_eq!(s.days[1].s_tilde, None);
        assert_eq!(s.days[2].s_tilde, None);
        assert_eq!(s.days[3].s_tilde, Some(0.0));
        assert_eq!(s.days[1].s, Some(-23.0));
    }

    #[test]
    fn describe_examples() {
        let st = describe(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(st.mean, 3.0);
        assert_eq!(st.median, 3.0);
        // sqrt(10 / 4)
        assert!((st.sd - 1.581_138_830_084_19).abs() < 1e-12);
        let c = describe(&[7.0; 5]).unwrap();
        assert_eq!(c.sd, 0.0);
        assert!(c.skewness.is_none() && c.kurtosis.is_none());
        let sym = describe(&[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(sym.skewness, Some(0.0));
        assert!(describe(&[1.0]).is_err());
        let two = describe(&[1.0, 3.0]).unwrap();
        assert!(two.skewness.is_none());
    }

    #[test]
    fn daily_average_basis_recomputes_log_difference() {
        let mut s = series(&[(50.0, 20.0, 10.0), (50.0, 20.0, 10.0)]);
        s.days[0].pe_avg = Some(40.0);
        s.days[1].pe_avg = Some(80.0);
        transform(&mut s, crate::ingest::default_phase4_start());
        let avg = s.s_tilde(PriceBasis::DailyAverage);
        assert!((avg[1].unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(s.s_tilde(PriceBasis::VolumeWeighted)[1], Some(0.0));
    }
}
