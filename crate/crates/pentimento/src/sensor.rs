//! Tunable dual-polarity TDC datapath simulation.
//!
//! A launch clock emits a transition through the route under test into a
//! carry chain of `chain_length` delay elements; a capture clock offset by a
//! programmable phase `theta` samples all chain taps at once. The distance
//! the transition front travelled before capture encodes the route delay.
//! Snapshots are decoded with the binary Hamming distance from the all-zeros
//! word (rising) or the all-ones word (falling).

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::bti::Polarity;
use crate::error::{Error, Result};

/// Static configuration of one TDC instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorConfig {
    pub chain_length: usize,
    /// Mean per-element carry delay (2.8 ps/bit on UltraScale+ parts).
    pub element_tau_ps: f64,
    /// Relative per-element delay spread, frozen per sensor instance.
    pub tau_variation_sigma: f64,
    /// Phase adjustment granularity; theta moves in multiples of this.
    pub theta_step_ps: f64,
    /// Upper bound of the calibration sweep.
    pub theta_max_ps: f64,
    /// Number of chain positions around the front subject to random capture.
    pub metastable_band: usize,
    /// Per-bit flip probability inside the metastable band.
    pub metastable_flip_prob: f64,
    /// Snapshot pairs per trace.
    pub samples_per_trace: usize,
    pub traces_per_measurement: usize,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            chain_length: 64,
            element_tau_ps: 2.8,
            tau_variation_sigma: 0.05,
            theta_step_ps: 2.8,
            theta_max_ps: 30_000.0,
            metastable_band: 2,
            metastable_flip_prob: 0.25,
            samples_per_trace: 16,
            traces_per_measurement: 10,
        }
    }
}

impl SensorConfig {
    /// Standard deviation of one averaged delta measurement (fall minus
    /// rise), combining budget jitter, quantization, and metastable-band
    /// flips across all samples of a measurement.
    pub fn delta_noise_ps(&self, noise_sigma_ps: f64) -> f64 {
        let tau2 = self.element_tau_ps * self.element_tau_ps;
        let p = self.metastable_flip_prob;
        let per_capture = noise_sigma_ps * noise_sigma_ps
            + tau2 / 12.0
            + self.metastable_band as f64 * p * (1.0 - p) * tau2;
        let samples = (self.samples_per_trace * self.traces_per_measurement) as f64;
        (2.0 * per_capture / samples).sqrt()
    }
}

/// Contents of the capture registers after one launch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaptureSnapshot {
    pub bits: u64,
    pub polarity: Polarity,
    pub chain_length: usize,
}

impl CaptureSnapshot {
    /// Transition never entered or fully traversed the chain.
    pub fn saturated(&self) -> bool {
        let h = self.hamming_distance();
        h == 0 || h == self.chain_length as u32
    }

    /// Propagation distance: ones count for rising (distance from all-zeros),
    /// zeros count for falling (distance from all-ones).
    pub fn hamming_distance(&self) -> u32 {
        let mask = if self.chain_length == 64 {
            u64::MAX
        } else {
            (1u64 << self.chain_length) - 1
        };
        match self.polarity {
            Polarity::Rising => (self.bits & mask).count_ones(),
            Polarity::Falling => (!self.bits & mask).count_ones(),
        }
    }
}

/// A batch of snapshot pairs taken at one theta setting. Each launch cycle
/// records one rising and one falling snapshot.
#[derive(Debug, Clone)]
pub struct Trace {
    pub snapshots: Vec<CaptureSnapshot>,
    pub theta_ps: f64,
}

impl Trace {
    pub fn mean_distance(&self, polarity: Polarity) -> f64 {
        let (sum, count) = self
            .snapshots
            .iter()
            .filter(|s| s.polarity == polarity)
            .fold((0u64, 0u64), |(s, c), snap| {
                (s + snap.hamming_distance() as u64, c + 1)
            });
        sum as f64 / count.max(1) as f64
    }

    pub fn saturated(&self) -> bool {
        let r = self.mean_distance(Polarity::Rising);
        let f = self.mean_distance(Polarity::Falling);
        let max = self
            .snapshots
            .first()
            .map(|s| s.chain_length as f64)
            .unwrap_or(0.0);
        (r <= 0.5 || r >= max - 0.5) && (f <= 0.5 || f >= max - 0.5)
    }
}

/// One TDC instance with its frozen per-element delays.
#[derive(Debug, Clone)]
pub struct Sensor {
    pub cfg: SensorConfig,
    element_delays: Vec<f64>,
    /// Prefix sums of element delays; arrival[i] is the time for the front
    /// to traverse the first i elements.
    arrival: Vec<f64>,
}

/// Margin (in elements) from the chain ends that calibration requires so the
/// measurement sweep never clips against the register boundaries.
const CALIBRATION_MARGIN: f64 = 4.0;

impl Sensor {
    /// Build a sensor, freezing per-element delays from the given rng.
    /// Delay spread is Gaussian, clipped at three sigma.
    pub fn new(cfg: SensorConfig, rng: &mut impl Rng) -> Self {
        assert!(cfg.chain_length >= 1 && cfg.chain_length <= 64);
        assert!(cfg.element_tau_ps > 0.0);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let element_delays: Vec<f64> = (0..cfg.chain_length)
            .map(|_| {
                let z: f64 = normal.sample(rng);
                let z = z.clamp(-3.0, 3.0);
                cfg.element_tau_ps * (1.0 + cfg.tau_variation_sigma * z)
            })
            .collect();
        let mut arrival = Vec::with_capacity(cfg.chain_length + 1);
        arrival.push(0.0);
        let mut acc = 0.0;
        for d in &element_delays {
            acc += d;
            arrival.push(acc);
        }
        Sensor {
            cfg,
            element_delays,
            arrival,
        }
    }

    pub fn element_delays(&self) -> &[f64] {
        &self.element_delays
    }

    /// Capture one snapshot. The time budget left for the chain is
    /// `theta - route_delay` plus per-capture jitter; the front position is
    /// found by walking the per-element delays and clamps to the chain.
    pub fn capture(
        &self,
        route_delay_ps: f64,
        theta_ps: f64,
        polarity: Polarity,
        noise_sigma_ps: f64,
        rng: &mut impl Rng,
    ) -> CaptureSnapshot {
        let jitter = if noise_sigma_ps > 0.0 {
            Normal::new(0.0, noise_sigma_ps).unwrap().sample(rng)
        } else {
            0.0
        };
        let budget = theta_ps - route_delay_ps + jitter;
        let front = self.arrival.partition_point(|&a| a <= budget).saturating_sub(1);
        let front = front.min(self.cfg.chain_length);

        let n = self.cfg.chain_length;
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        // Elements the front has passed hold the propagated value: 1 for a
        // rising transition, 0 for falling.
        let passed = if front == 0 {
            0
        } else if front >= 64 {
            u64::MAX
        } else {
            (1u64 << front) - 1
        };
        let mut bits = match polarity {
            Polarity::Rising => passed & mask,
            Polarity::Falling => !passed & mask,
        };
        if self.cfg.metastable_band > 0 {
            let lo = front.saturating_sub(self.cfg.metastable_band / 2 + self.cfg.metastable_band % 2);
            let hi = (front + self.cfg.metastable_band / 2).min(n);
            for i in lo..hi {
                if rng.gen::<f64>() < self.cfg.metastable_flip_prob {
                    bits ^= 1u64 << i;
                }
            }
        }
        CaptureSnapshot {
            bits,
            polarity,
            chain_length: n,
        }
    }

    /// One launch cycle: a rising then a falling transition at the same theta.
    pub fn capture_pair(
        &self,
        rise_delay_ps: f64,
        fall_delay_ps: f64,
        theta_ps: f64,
        noise_sigma_ps: f64,
        rng: &mut impl Rng,
    ) -> (CaptureSnapshot, CaptureSnapshot) {
        let r = self.capture(rise_delay_ps, theta_ps, Polarity::Rising, noise_sigma_ps, rng);
        let f = self.capture(fall_delay_ps, theta_ps, Polarity::Falling, noise_sigma_ps, rng);
        (r, f)
    }

    /// Take one trace of alternating rising/falling snapshots.
    pub fn trace(
        &self,
        rise_delay_ps: f64,
        fall_delay_ps: f64,
        theta_ps: f64,
        noise_sigma_ps: f64,
        rng: &mut impl Rng,
    ) -> Trace {
        let mut snapshots = Vec::with_capacity(2 * self.cfg.samples_per_trace);
        for _ in 0..self.cfg.samples_per_trace {
            let (r, f) = self.capture_pair(rise_delay_ps, fall_delay_ps, theta_ps, noise_sigma_ps, rng);
            snapshots.push(r);
            snapshots.push(f);
        }
        Trace {
            snapshots,
            theta_ps,
        }
    }

    /// Sweep theta downward from the largest setting, one trace per step,
    /// until both transition fronts sit inside the chain with margin.
    /// Returns the first such theta.
    pub fn calibrate(
        &self,
        route_label: &str,
        rise_delay_ps: f64,
        fall_delay_ps: f64,
        noise_sigma_ps: f64,
        rng: &mut impl Rng,
    ) -> Result<f64> {
        let step = self.cfg.theta_step_ps;
        let max = self.cfg.chain_length as f64 - CALIBRATION_MARGIN;
        // Skip the trivially-saturated top of the range: no front can sit
        // inside the chain until theta is below delay + chain span. The
        // sweep itself stays step-by-step from there.
        let first_useful = rise_delay_ps.max(fall_delay_ps)
            + (self.cfg.chain_length as f64 + 1.0) * self.cfg.element_tau_ps;
        let mut theta = (self.cfg.theta_max_ps.min(first_useful) / step).floor() * step;
        let min_delay = rise_delay_ps.min(fall_delay_ps);
        if min_delay + CALIBRATION_MARGIN * self.cfg.element_tau_ps > self.cfg.theta_max_ps {
            return Err(Error::Calibration {
                route: route_label.to_string(),
                reason: format!(
                    "route delay {min_delay:.0} ps exceeds the theta sweep range"
                ),
            });
        }
        while theta > min_delay - step {
            let trace = self.trace(rise_delay_ps, fall_delay_ps, theta, noise_sigma_ps, rng);
            let r = trace.mean_distance(Polarity::Rising);
            let f = trace.mean_distance(Polarity::Falling);
            if r >= CALIBRATION_MARGIN && r <= max && f >= CALIBRATION_MARGIN && f <= max {
                return Ok(theta);
            }
            theta -= step;
        }
        Err(Error::Calibration {
            route: route_label.to_string(),
            reason: "sweep exhausted without both fronts inside the chain".into(),
        })
    }

    /// Take `traces_per_measurement` traces at decreasing theta, average the
    /// per-trace mean distances and convert to propagation delays. The theta
    /// decrement of each trace is compensated so readings are comparable.
    pub fn measure(
        &self,
        route_label: &str,
        rise_delay_ps: f64,
        fall_delay_ps: f64,
        theta_init_ps: f64,
        noise_sigma_ps: f64,
        rng: &mut impl Rng,
    ) -> Result<(f64, f64)> {
        let tau = self.cfg.element_tau_ps;
        let mut rise_sum = 0.0;
        let mut fall_sum = 0.0;
        for j in 0..self.cfg.traces_per_measurement {
            let theta = theta_init_ps - j as f64 * self.cfg.theta_step_ps;
            let trace = self.trace(rise_delay_ps, fall_delay_ps, theta, noise_sigma_ps, rng);
            if trace.saturated() {
                return Err(Error::Measurement {
                    route: route_label.to_string(),
                    reason: format!("trace {j} saturated at theta {theta:.1} ps"),
                });
            }
            rise_sum += theta - trace.mean_distance(Polarity::Rising) * tau;
            fall_sum += theta - trace.mean_distance(Polarity::Falling) * tau;
        }
        let n = self.cfg.traces_per_measurement as f64;
        Ok((rise_sum / n, fall_sum / n))
    }
}

/// Write traces in the interoperable dump format: one line per snapshot,
/// `trace_index, sample_index, polarity, hex_bits`, bit 0 being the chain
/// element nearest the route.
pub fn write_trace_dump<W: std::io::Write>(out: &mut W, traces: &[Trace]) -> Result<()> {
    for (ti, trace) in traces.iter().enumerate() {
        for (si, snap) in trace.snapshots.iter().enumerate() {
            let pol = match snap.polarity {
                Polarity::Rising => "rising",
                Polarity::Falling => "falling",
            };
            writeln!(out, "{ti}, {si}, {pol}, {:016x}", snap.bits)?;
        }
    }
    Ok(())
}

/// Parse a trace dump written by [`write_trace_dump`].
pub fn parse_trace_dump(input: &str, chain_length: usize) -> Result<Vec<Trace>> {
    let mut traces: Vec<Trace> = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::Data(format!(
                "trace dump line {}: expected 4 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let ti: usize = fields[0]
            .parse()
            .map_err(|_| Error::Data(format!("trace dump line {}: bad trace index", lineno + 1)))?;
        let polarity = match fields[2] {
            "rising" => Polarity::Rising,
            "falling" => Polarity::Falling,
            other => {
                return Err(Error::Data(format!(
                    "trace dump line {}: unknown polarity {other:?}",
                    lineno + 1
                )))
            }
        };
        let bits = u64::from_str_radix(fields[3], 16)
            .map_err(|_| Error::Data(format!("trace dump line {}: bad hex bits", lineno + 1)))?;
        while traces.len() <= ti {
            traces.push(Trace {
                snapshots: Vec::new(),
                theta_ps: 0.0,
            });
        }
        traces[ti].snapshots.push(CaptureSnapshot {
            bits,
            polarity,
            chain_length,
        });
    }
    Ok(traces)
}
