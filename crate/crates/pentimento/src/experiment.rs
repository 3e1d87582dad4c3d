//! Calibration / Condition / Measurement phase schedules.
//!
//! A run holds a set of routes, a burn vector, and an ordered list of
//! phases. Condition phases advance route aging; Measure phases sample every
//! route's TDC and append one centered delta reading; Calibrate sweeps theta
//! once per route. Measurement consumes negligible simulated time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bti::{Environment, Model, Polarity, Regime, RouteSpec, RouteState, StressSegment};
use crate::error::{Error, Result};
use crate::sensor::{Sensor, SensorConfig};

/// The burned bit per route: the secret an attacker tries to recover.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BurnVector(pub Vec<bool>);

impl BurnVector {
    pub fn from_seed(seed: u64, n: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BurnVector((0..n).map(|_| rng.gen::<bool>()).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Where a Condition phase takes its per-route logic value from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueSource {
    /// The burn vector bit for the route.
    Burn,
    /// The complement of the burn bit.
    Complement,
    /// Logic 0 on every route (the attacker's recovery conditioning).
    #[serde(alias = "zero")]
    AllZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Phase {
    Calibrate,
    Condition {
        source: ValueSource,
        #[serde(rename = "hours")]
        duration_hours: f64,
    },
    /// One datapoint: the average of `repeats` back-to-back sensor
    /// measurements. A measurement lasts microseconds, so a datapoint is
    /// instantaneous on the simulated-hours axis.
    Measure {
        #[serde(default = "default_repeats")]
        repeats: usize,
    },
}

fn default_repeats() -> usize {
    1
}

impl Phase {
    pub fn measure() -> Phase {
        Phase::Measure { repeats: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub phases: Vec<Phase>,
}

impl Schedule {
    pub fn new(phases: Vec<Phase>) -> Self {
        Schedule { phases }
    }

    /// Sensor measurements averaged per datapoint in the lab flows. The
    /// lab signals (1.5-10.5 ps) sit well above single-measurement noise,
    /// so no extra averaging is needed there.
    pub const LAB_MEASURE_REPEATS: usize = 1;
    /// Averaging for the attack flows, where single-measurement noise
    /// (~0.25 ps) would swamp the attenuated cloud signals.
    pub const ATTACK_MEASURE_REPEATS: usize = 16;

    /// Burn-in then recovery with hourly measurement, bracketed by an
    /// initial calibration and a baseline measurement.
    pub fn experiment1(hours_per_step: f64) -> Schedule {
        let m = Self::LAB_MEASURE_REPEATS;
        let mut phases = vec![Phase::Calibrate, Phase::Measure { repeats: m }];
        push_repeated(&mut phases, ValueSource::Burn, 200.0, hours_per_step, m);
        push_repeated(&mut phases, ValueSource::Complement, 200.0, hours_per_step, m);
        Schedule { phases }
    }

    /// Burn-in only, measured hourly.
    pub fn experiment2(hours_per_step: f64) -> Schedule {
        let m = Self::ATTACK_MEASURE_REPEATS;
        let mut phases = vec![Phase::Calibrate, Phase::Measure { repeats: m }];
        push_repeated(&mut phases, ValueSource::Burn, 200.0, hours_per_step, m);
        Schedule { phases }
    }

    /// Victim burn with no attacker visibility, then a 25-hour measured
    /// recovery window conditioned to all-zero. No calibration: theta comes
    /// from the fleet table.
    pub fn experiment3(hours_per_step: f64) -> Schedule {
        let mut phases = vec![Phase::Condition {
            source: ValueSource::Burn,
            duration_hours: 200.0,
        }];
        let steps = (25.0 / hours_per_step).round().max(1.0) as usize;
        for _ in 0..steps {
            phases.push(Phase::Measure {
                repeats: Self::ATTACK_MEASURE_REPEATS,
            });
            phases.push(Phase::Condition {
                source: ValueSource::AllZero,
                duration_hours: hours_per_step,
            });
        }
        Schedule { phases }
    }

    pub fn named(name: &str, hours_per_step: f64) -> Result<Schedule> {
        match name {
            "experiment1" => Ok(Schedule::experiment1(hours_per_step)),
            "experiment2" => Ok(Schedule::experiment2(hours_per_step)),
            "experiment3" => Ok(Schedule::experiment3(hours_per_step)),
            other => Err(Error::Schedule(format!("unknown schedule {other:?}"))),
        }
    }

    pub fn total_condition_hours(&self) -> f64 {
        self.phases
            .iter()
            .map(|p| match p {
                Phase::Condition { duration_hours, .. } => *duration_hours,
                _ => 0.0,
            })
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        let calibrations = self
            .phases
            .iter()
            .filter(|p| matches!(p, Phase::Calibrate))
            .count();
        if calibrations > 1 {
            return Err(Error::Schedule("at most one Calibrate phase allowed".into()));
        }
        if calibrations == 1 {
            let cal_at = self
                .phases
                .iter()
                .position(|p| matches!(p, Phase::Calibrate))
                .unwrap();
            if self.phases[..cal_at]
                .iter()
                .any(|p| matches!(p, Phase::Measure { .. }))
            {
                return Err(Error::Schedule(
                    "Measure before Calibrate in a calibrated schedule".into(),
                ));
            }
        }
        for p in &self.phases {
            if let Phase::Condition { duration_hours, .. } = p {
                if *duration_hours < 0.0 {
                    return Err(Error::Schedule("negative Condition duration".into()));
                }
            }
        }
        Ok(())
    }
}

fn push_repeated(
    phases: &mut Vec<Phase>,
    source: ValueSource,
    total_hours: f64,
    step: f64,
    repeats: usize,
) {
    let steps = (total_hours / step).round().max(1.0) as usize;
    for _ in 0..steps {
        phases.push(Phase::Condition {
            source,
            duration_hours: step,
        });
        phases.push(Phase::Measure { repeats });
    }
}

/// The paper-scale route inventory: 16 routes per length class.
pub const STANDARD_LENGTHS_PS: [f64; 4] = [1000.0, 2000.0, 5000.0, 10000.0];
pub const ROUTES_PER_LENGTH: usize = 16;

pub fn standard_route_set() -> Vec<RouteSpec> {
    let mut lengths = Vec::with_capacity(64);
    for length in STANDARD_LENGTHS_PS {
        lengths.extend(std::iter::repeat(length).take(ROUTES_PER_LENGTH));
    }
    route_set(&lengths).expect("standard lengths are positive")
}

/// One route per listed length.
pub fn route_set(lengths_ps: &[f64]) -> Result<Vec<RouteSpec>> {
    lengths_ps
        .iter()
        .enumerate()
        .map(|(i, &l)| RouteSpec::new(i as u32, l))
        .collect()
}

/// Per-route measured time series, centered at the first measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSeries {
    pub route_id: u32,
    pub length_ps: f64,
    pub burn_bit: bool,
    /// (simulated hour, centered delta ps) per measurement.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub series: Vec<RouteSeries>,
    pub seed: u64,
    pub total_hours: f64,
}

/// Fleet-constant theta for uncalibrated (Threat Model 2) measurement:
/// consistent across devices of one type, derived from the route's nominal
/// delay so the fronts land inside the chain.
pub fn fleet_theta_ps(nominal_delay_ps: f64, cfg: &SensorConfig) -> f64 {
    let span = (cfg.chain_length as f64 - 4.0) * cfg.element_tau_ps;
    ((nominal_delay_ps + span) / cfg.theta_step_ps).floor() * cfg.theta_step_ps
}

/// Relative per-route spread of the aging amplitude.
fn age_spread_sigma(regime: Regime) -> f64 {
    match regime {
        Regime::Lab => 0.05,
        Regime::Cloud => 0.2,
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Execute a phase schedule over a set of routes.
///
/// Route timelines are independent given the shared schedule and are
/// evaluated in parallel; every route draws from its own seed-derived rng
/// stream so results do not depend on evaluation order.
pub fn run_schedule(
    routes: &[RouteSpec],
    burn: &BurnVector,
    schedule: &Schedule,
    env: &Environment,
    seed: u64,
) -> Result<RunResult> {
    schedule.validate()?;
    env.validate()?;
    if burn.len() != routes.len() {
        return Err(Error::Contract(format!(
            "burn vector length {} does not match route count {}",
            burn.len(),
            routes.len()
        )));
    }
    let model = Model::default();
    let cfg = SensorConfig::default();
    let series: Result<Vec<RouteSeries>> = routes
        .par_iter()
        .enumerate()
        .map(|(idx, spec)| {
            run_route(
                spec,
                burn.0[idx],
                schedule,
                env,
                seed,
                &model,
                &cfg,
            )
        })
        .collect();
    Ok(RunResult {
        series: series?,
        seed,
        total_hours: schedule.total_condition_hours(),
    })
}

fn run_route(
    spec: &RouteSpec,
    burn_bit: bool,
    schedule: &Schedule,
    env: &Environment,
    seed: u64,
    model: &Model,
    cfg: &SensorConfig,
) -> Result<RouteSeries> {
    let salt = spec.id as u64;
    let mut device_rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(salt * 3 + 1)));
    let mut measure_rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(salt * 3 + 2)));

    let sigma = age_spread_sigma(env.regime);
    let mut spec = spec.clone();
    // Mean-one lognormal device variation on the aging amplitude.
    let z: f64 = Normal::new(-sigma * sigma / 2.0, sigma)
        .unwrap()
        .sample(&mut device_rng);
    spec.age_scale = z.exp();

    let sensor = Sensor::new(cfg.clone(), &mut device_rng);
    let mut state = RouteState::fresh(spec.clone());
    let label = format!("route{}", spec.id);
    let mut theta: Option<f64> = None;
    let mut hour = 0.0;
    let mut points: Vec<(f64, f64)> = Vec::new();

    for phase in &schedule.phases {
        match phase {
            Phase::Calibrate => {
                let rise = model.true_delay(&state, Polarity::Rising);
                let fall = model.true_delay(&state, Polarity::Falling);
                theta = Some(sensor.calibrate(
                    &label,
                    rise,
                    fall,
                    env.noise_sigma_ps,
                    &mut measure_rng,
                )?);
            }
            Phase::Condition {
                source,
                duration_hours,
            } => {
                let value = match source {
                    ValueSource::Burn => burn_bit,
                    ValueSource::Complement => !burn_bit,
                    ValueSource::AllZero => false,
                };
                state = model.evolve(
                    &state,
                    &StressSegment {
                        duration_hours: *duration_hours,
                        logic_value: value,
                        environment: *env,
                    },
                )?;
                hour += duration_hours;
            }
            Phase::Measure { repeats } => {
                let th = match theta {
                    Some(t) => t,
                    None => fleet_theta_ps(spec.nominal_delay_ps, cfg),
                };
                let rise = model.true_delay(&state, Polarity::Rising);
                let fall = model.true_delay(&state, Polarity::Falling);
                let n = (*repeats).max(1);
                let mut sum = 0.0;
                for _ in 0..n {
                    let (rise_ps, fall_ps) = sensor.measure(
                        &label,
                        rise,
                        fall,
                        th,
                        env.noise_sigma_ps,
                        &mut measure_rng,
                    )?;
                    sum += fall_ps - rise_ps;
                }
                points.push((hour, sum / n as f64));
            }
        }
    }

    // Center so the first measured point is exactly zero.
    if let Some(&(_, first)) = points.first() {
        for p in &mut points {
            p.1 -= first;
        }
    }
    Ok(RouteSeries {
        route_id: spec.id,
        length_ps: spec.nominal_delay_ps,
        burn_bit,
        points,
    })
}

/// CSV schema shared with the analysis commands.
pub const CSV_HEADER: &str = "hour,route_id,length_ps,burn_bit,delta_ps";

pub fn write_csv<W: std::io::Write>(out: &mut W, result: &RunResult) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for s in &result.series {
        for &(hour, delta) in &s.points {
            writeln!(
                out,
                "{},{},{},{},{:.6}",
                hour, s.route_id, s.length_ps, s.burn_bit as u8, delta
            )?;
        }
    }
    Ok(())
}

/// Parse an experiment CSV. The `burn_bit` column is optional; when absent
/// the returned series carry `false` and the flag is reported as `false`.
pub fn read_csv(text: &str) -> Result<(Vec<RouteSeries>, bool)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data("empty CSV".into()))?;
    let cols: Vec<&str> = header.trim().split(',').collect();
    let col = |name: &str| cols.iter().position(|c| *c == name);
    let (hour_c, id_c, len_c, delta_c) = match (
        col("hour"),
        col("route_id"),
        col("length_ps"),
        col("delta_ps"),
    ) {
        (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
        _ => {
            return Err(Error::Data(format!(
                "CSV header must contain hour,route_id,length_ps,delta_ps; got {header:?}"
            )))
        }
    };
    let burn_c = col("burn_bit");

    let mut series: Vec<RouteSeries> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::Data(format!(
                "CSV line {}: expected {} fields, got {}",
                lineno + 2,
                cols.len(),
                fields.len()
            )));
        }
        let parse_f = |i: usize, what: &str| -> Result<f64> {
            fields[i]
                .parse()
                .map_err(|_| Error::Data(format!("CSV line {}: bad {what}", lineno + 2)))
        };
        let hour = parse_f(hour_c, "hour")?;
        let route_id: u32 = fields[id_c]
            .parse()
            .map_err(|_| Error::Data(format!("CSV line {}: bad route_id", lineno + 2)))?;
        let length = parse_f(len_c, "length_ps")?;
        let delta = parse_f(delta_c, "delta_ps")?;
        let burn = match burn_c {
            Some(c) => fields[c] == "1" || fields[c] == "true",
            None => false,
        };
        match series.iter_mut().find(|s| s.route_id == route_id) {
            Some(s) => s.points.push((hour, delta)),
            None => series.push(RouteSeries {
                route_id,
                length_ps: length,
                burn_bit: burn,
                points: vec![(hour, delta)],
            }),
        }
    }
    if series.is_empty() {
        return Err(Error::Data("CSV contains no data rows".into()));
    }
    Ok((series, burn_c.is_some()))
}
