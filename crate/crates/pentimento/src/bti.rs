//! Per-route BTI degradation and recovery model.
//!
//! A programmable route accumulates extra propagation delay while it is held
//! at a constant logic value. Holding logic 1 stresses the NMOS transistors
//! along the route and slows the falling transition; holding logic 0 stresses
//! the PMOS transistors and slows the rising transition. The observable
//! signal is the difference between the falling and rising delay,
//! `delta_ps = drift_fall - drift_rise`, whose sign encodes the burned bit.
//!
//! Growth follows a saturating power law in cumulative stress time, scaled by
//! route length, temperature acceleration and device age. Recovery of the
//! two components is asymmetric: the component built by burning 1 relaxes
//! within tens of hours once the value is complemented, while the component
//! built by burning 0 is still visible after hundreds of hours.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean delay contributed by one routing element, used to derive the number
/// of stressed elements from a route's nominal delay.
pub const ROUTE_ELEMENT_DELAY_PS: f64 = 20.0;

/// Transition polarity through a route or delay chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    Rising,
    Falling,
}

/// Operating regime of the device under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Lab,
    Cloud,
}

/// Environmental conditions for a stress segment or a measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub regime: Regime,
    pub temperature_c: f64,
    /// 1.0 for a factory-new device; below 1 for used cloud parts whose
    /// observable aging response is attenuated.
    pub device_age_factor: f64,
    /// Additive jitter on each individual capture, in ps.
    pub noise_sigma_ps: f64,
}

impl Environment {
    /// Temperature-controlled oven conditions with a factory-new device.
    pub fn lab() -> Self {
        Environment {
            regime: Regime::Lab,
            temperature_c: 60.0,
            device_age_factor: 1.0,
            noise_sigma_ps: 1.4,
        }
    }

    /// Datacenter conditions: an older device with uncontrolled ambient
    /// conditions folded into the attenuation factor, and noisier captures.
    pub fn cloud() -> Self {
        Environment {
            regime: Regime::Cloud,
            temperature_c: 60.0,
            device_age_factor: 0.12,
            noise_sigma_ps: 1.4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.device_age_factor <= 0.0 || self.device_age_factor > 1.0 {
            return Err(Error::Contract(format!(
                "device_age_factor must be in (0, 1], got {}",
                self.device_age_factor
            )));
        }
        if self.noise_sigma_ps < 0.0 {
            return Err(Error::Contract("noise_sigma_ps must be >= 0".into()));
        }
        if self.regime == Regime::Cloud && self.noise_sigma_ps == 0.0 {
            return Err(Error::Contract(
                "cloud regime requires noise_sigma_ps > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Static description of one programmable route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSpec {
    pub id: u32,
    pub nominal_delay_ps: f64,
    /// Number of delay elements composing the route; scales linearly with
    /// the nominal delay.
    pub element_count: u32,
    /// Per-route multiplicative spread on the aging amplitude (1.0 unless a
    /// run assigns device variation).
    pub age_scale: f64,
}

impl RouteSpec {
    pub fn new(id: u32, nominal_delay_ps: f64) -> Result<Self> {
        if nominal_delay_ps <= 0.0 {
            return Err(Error::Contract(format!(
                "nominal_delay_ps must be > 0, got {nominal_delay_ps}"
            )));
        }
        let element_count = ((nominal_delay_ps / ROUTE_ELEMENT_DELAY_PS).round() as u32).max(1);
        Ok(RouteSpec {
            id,
            nominal_delay_ps,
            element_count,
            age_scale: 1.0,
        })
    }
}

/// One piecewise-constant stress interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressSegment {
    pub duration_hours: f64,
    pub logic_value: bool,
    pub environment: Environment,
}

/// Aging state of a route: the accumulated extra delay of each transition
/// polarity, plus the bookkeeping needed to resume recovery trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteState {
    pub spec: RouteSpec,
    /// Extra rising-transition delay, built by holding logic 0.
    pub drift_rise_ps: f64,
    /// Extra falling-transition delay, built by holding logic 1.
    pub drift_fall_ps: f64,
    /// Cumulative hours held at logic 0 and logic 1.
    pub stress_hours_at_value: [f64; 2],
    /// Drift level at the start of the current recovery episode, per
    /// component (rise, fall). Zero when the component has never grown.
    peak_rise_ps: f64,
    peak_fall_ps: f64,
}

impl RouteState {
    pub fn fresh(spec: RouteSpec) -> Self {
        RouteState {
            spec,
            drift_rise_ps: 0.0,
            drift_fall_ps: 0.0,
            stress_hours_at_value: [0.0, 0.0],
            peak_rise_ps: 0.0,
            peak_fall_ps: 0.0,
        }
    }

    /// Observable signal: falling minus rising drift.
    pub fn delta_ps(&self) -> f64 {
        self.drift_fall_ps - self.drift_rise_ps
    }
}

/// Model constants. All values are derived from the measured anchor points
/// by [`ModelParams::calibrated`]; `Default` uses the standard anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Exponent of the power law in cumulative stress hours.
    pub growth_exponent: f64,
    /// Exponent relating drift amplitude to element count.
    pub length_exponent: f64,
    /// Drift amplitude coefficient: drift after `t` hours on a fresh route is
    /// `amp_ref * (element_count / ref_element_count)^length_exponent * t^n`.
    pub amp_ref: f64,
    pub ref_element_count: f64,
    /// Temperature acceleration scale in degrees C; 60 C is the baseline.
    pub theta_temp_c: f64,
    /// Fast (burn-1 component) recovery: drift decays as
    /// `peak * exp(-(a*t + (t/tau)^q))`.
    pub fast_linear_per_hour: f64,
    pub fast_tau_hours: f64,
    pub fast_power: f64,
    /// Slow (burn-0 component) recovery time constant in hours.
    pub slow_tau_hours: f64,
    /// Drift saturates at twice the value reached after this many hours.
    pub cap_hours: f64,
}

/// Anchor targets the constants are fit to.
#[derive(Debug, Clone, Copy)]
pub struct AnchorTargets {
    /// (route length ps, centered drift ps) after 200 h of lab burn-in, for
    /// the shortest and longest reference routes.
    pub short: (f64, f64),
    pub long: (f64, f64),
    pub burn_hours: f64,
    /// Hours for the short/long fully burned routes to recover to 0.5 ps
    /// under complement conditioning.
    pub recover_short_hours: f64,
    pub recover_long_hours: f64,
}

impl Default for AnchorTargets {
    fn default() -> Self {
        AnchorTargets {
            short: (1000.0, 1.45),
            long: (10000.0, 10.45),
            burn_hours: 200.0,
            recover_short_hours: 33.0,
            recover_long_hours: 48.0,
        }
    }
}

impl ModelParams {
    /// Fit the free constants to the anchor targets.
    ///
    /// The growth amplitude and length exponent come from the two burn-in
    /// anchors. The fast-recovery constants solve a 2x2 linear system so the
    /// 0.5 ps crossing of the short and long routes lands at the requested
    /// hours.
    pub fn calibrated(t: &AnchorTargets) -> Self {
        let growth_exponent = 0.2;
        let (len_s, amp_s) = t.short;
        let (len_l, amp_l) = t.long;
        let length_exponent = (amp_l / amp_s).ln() / (len_l / len_s).ln();
        let ref_element_count = (len_s / ROUTE_ELEMENT_DELAY_PS).round();
        let amp_ref = amp_s / t.burn_hours.powf(growth_exponent);

        // phi(t) = a*t + (t/tau)^q must equal ln(amp/0.5) at the target
        // crossing hour for both anchor amplitudes; linear in (a, tau^-q).
        let fast_power = 8.0;
        let (t1, y1) = (t.recover_short_hours, (amp_s / 0.5).ln());
        let (t2, y2) = (t.recover_long_hours, (amp_l / 0.5).ln());
        let u = (y2 - (t2 / t1) * y1) / (t2.powf(fast_power) - t2 * t1.powf(fast_power - 1.0));
        let fast_linear_per_hour = (y1 - t1.powf(fast_power) * u) / t1;
        let fast_tau_hours = u.powf(-1.0 / fast_power);

        ModelParams {
            growth_exponent,
            length_exponent,
            amp_ref,
            ref_element_count,
            theta_temp_c: 30.0,
            fast_linear_per_hour,
            fast_tau_hours,
            fast_power,
            slow_tau_hours: 400.0,
            cap_hours: 400.0,
        }
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams::calibrated(&AnchorTargets::default())
    }
}

/// The degradation/recovery model. Pure value-semantics transitions; safe to
/// evaluate many routes in parallel.
#[derive(Debug, Clone, Default)]
pub struct Model {
    pub params: ModelParams,
}

/// Residual below which a recovering component snaps to zero, as a fraction
/// of its episode peak.
const SNAP_FRACTION: f64 = 0.005;
const SNAP_FLOOR_PS: f64 = 1e-3;

impl Model {
    pub fn new(params: ModelParams) -> Self {
        Model { params }
    }

    /// Temperature acceleration relative to the 60 C calibration baseline.
    pub fn temperature_accel(&self, temperature_c: f64) -> f64 {
        ((temperature_c - 60.0) / self.params.theta_temp_c).exp()
    }

    /// Drift amplitude coefficient for a route under an environment: the
    /// drift reached after `t` fresh stress hours is `amplitude * t^n`.
    pub fn amplitude(&self, spec: &RouteSpec, env: &Environment) -> f64 {
        let p = &self.params;
        let length_factor =
            (spec.element_count as f64 / p.ref_element_count).powf(p.length_exponent);
        p.amp_ref
            * length_factor
            * self.temperature_accel(env.temperature_c)
            * env.device_age_factor
            * spec.age_scale
    }

    /// Predicted drift magnitude of a fresh route of the given length after
    /// an uninterrupted burn. Used for vulnerability profiling.
    pub fn predicted_delta_ps(&self, length_ps: f64, burn_hours: f64, env: &Environment) -> f64 {
        if length_ps <= 0.0 || burn_hours <= 0.0 {
            return 0.0;
        }
        let spec = RouteSpec::new(0, length_ps).expect("positive length");
        let amp = self.amplitude(&spec, env);
        let cap = 2.0 * amp * self.params.cap_hours.powf(self.params.growth_exponent);
        (amp * burn_hours.powf(self.params.growth_exponent)).min(cap)
    }

    /// Advance a route state through one constant-value stress segment.
    ///
    /// The component matching the applied value grows along the power law;
    /// the opposite component recovers (fast for the burn-1 component, slow
    /// for the burn-0 component). Growth is gated until the opposite
    /// component has fully relaxed, matching the observation that a
    /// complemented route first returns to baseline before re-imprinting.
    pub fn evolve(&self, state: &RouteState, segment: &StressSegment) -> Result<RouteState> {
        if segment.duration_hours < 0.0 {
            return Err(Error::Contract(format!(
                "segment duration must be >= 0, got {}",
                segment.duration_hours
            )));
        }
        segment.environment.validate()?;
        let mut next = state.clone();
        let hours = segment.duration_hours;
        if hours == 0.0 {
            return Ok(next);
        }

        let amp = self.amplitude(&state.spec, &segment.environment);
        let recovered_for = if segment.logic_value {
            // Holding 1: falling path grows, burn-0 (rise) component relaxes slowly.
            self.recover_slow(&mut next.drift_rise_ps, &mut next.peak_rise_ps, hours)
        } else {
            // Holding 0: rising path grows, burn-1 (fall) component relaxes fast.
            self.recover_fast(&mut next.drift_fall_ps, &mut next.peak_fall_ps, hours)
        };
        let grow_hours = hours - recovered_for;
        if grow_hours > 0.0 {
            let (drift, peak) = if segment.logic_value {
                (&mut next.drift_fall_ps, &mut next.peak_fall_ps)
            } else {
                (&mut next.drift_rise_ps, &mut next.peak_rise_ps)
            };
            *drift = self.grow(*drift, amp, grow_hours);
            *peak = peak.max(*drift);
        }
        next.stress_hours_at_value[segment.logic_value as usize] += hours;
        Ok(next)
    }

    /// Propagation delay of the route for one transition polarity.
    pub fn true_delay(&self, state: &RouteState, polarity: Polarity) -> f64 {
        let drift = match polarity {
            Polarity::Rising => state.drift_rise_ps,
            Polarity::Falling => state.drift_fall_ps,
        };
        state.spec.nominal_delay_ps + drift
    }

    fn grow(&self, drift: f64, amp: f64, hours: f64) -> f64 {
        let n = self.params.growth_exponent;
        let cap = 2.0 * amp * self.params.cap_hours.powf(n);
        let effective_hours = (drift.min(cap).max(0.0) / amp).powf(1.0 / n);
        (amp * (effective_hours + hours).powf(n)).min(cap)
    }

    /// Slow exponential relaxation of the burn-0 component. Returns the
    /// number of hours spent recovering (the rest of the segment is free for
    /// growth of the opposite component).
    fn recover_slow(&self, drift: &mut f64, peak: &mut f64, hours: f64) -> f64 {
        if *drift <= 0.0 {
            *drift = 0.0;
            *peak = 0.0;
            return 0.0;
        }
        let p = (*peak).max(*drift);
        let floor = (SNAP_FRACTION * p).max(SNAP_FLOOR_PS);
        let to_floor = self.params.slow_tau_hours * (*drift / floor).ln().max(0.0);
        if hours >= to_floor {
            *drift = 0.0;
            *peak = 0.0;
            to_floor
        } else {
            *drift *= (-hours / self.params.slow_tau_hours).exp();
            *peak = p;
            hours
        }
    }

    /// Fast relaxation of the burn-1 component: the decay exponent is
    /// `phi(t) = a*t + (t/tau)^q` in the time since the episode peak, so the
    /// trajectory is resumed by inverting phi at the current residual.
    fn recover_fast(&self, drift: &mut f64, peak: &mut f64, hours: f64) -> f64 {
        if *drift <= 0.0 {
            *drift = 0.0;
            *peak = 0.0;
            return 0.0;
        }
        let p = (*peak).max(*drift);
        let floor = (SNAP_FRACTION * p).max(SNAP_FLOOR_PS);
        let now = self.invert_fast_phi((p / *drift).ln().max(0.0));
        let at_floor = self.invert_fast_phi((p / floor).ln().max(0.0));
        let to_floor = (at_floor - now).max(0.0);
        if hours >= to_floor {
            *drift = 0.0;
            *peak = 0.0;
            to_floor
        } else {
            *drift = p * (-self.fast_phi(now + hours)).exp();
            *peak = p;
            hours
        }
    }

    fn fast_phi(&self, t: f64) -> f64 {
        let p = &self.params;
        p.fast_linear_per_hour * t + (t / p.fast_tau_hours).powf(p.fast_power)
    }

    /// Invert the strictly increasing decay exponent by bisection.
    fn invert_fast_phi(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        let mut hi = 1.0;
        while self.fast_phi(hi) < y {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.fast_phi(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lab_segment(hours: f64, value: bool) -> StressSegment {
        StressSegment {
            duration_hours: hours,
            logic_value: value,
            environment: Environment::lab(),
        }
    }

    fn burned(length_ps: f64, hours: f64, value: bool) -> RouteState {
        let model = Model::default();
        let state = RouteState::fresh(RouteSpec::new(0, length_ps).unwrap());
        model.evolve(&state, &lab_segment(hours, value)).unwrap()
    }

    #[test]
    fn zero_duration_is_identity() {
        let model = Model::default();
        let state = RouteState::fresh(RouteSpec::new(0, 1000.0).unwrap());
        let next = model.evolve(&state, &lab_segment(0.0, true)).unwrap();
        assert_eq!(state, next);
    }

    #[test]
    fn negative_duration_is_rejected() {
        let model = Model::default();
        let state = RouteState::fresh(RouteSpec::new(0, 1000.0).unwrap());
        assert!(model.evolve(&state, &lab_segment(-1.0, true)).is_err());
    }

    #[test]
    fn lab_burn_anchors() {
        // 200 h lab anchors per route length class, both polarities.
        let d = burned(1000.0, 200.0, true).delta_ps();
        assert!((1.0..=2.0).contains(&d), "1000ps burn-1: {d}");
        let d = burned(1000.0, 200.0, false).delta_ps();
        assert!((-2.0..=-1.0).contains(&d), "1000ps burn-0: {d}");
        let d = burned(2000.0, 200.0, true).delta_ps();
        assert!((2.0..=3.0).contains(&d), "2000ps: {d}");
        let d = burned(5000.0, 200.0, true).delta_ps();
        assert!((5.0..=6.0).contains(&d), "5000ps: {d}");
        let d = burned(10000.0, 200.0, true).delta_ps();
        assert!((10.0..=11.0).contains(&d), "10000ps: {d}");
    }

    #[test]
    fn cloud_attenuation() {
        let model = Model::default();
        let state = RouteState::fresh(RouteSpec::new(0, 1000.0).unwrap());
        let seg = StressSegment {
            duration_hours: 200.0,
            logic_value: true,
            environment: Environment::cloud(),
        };
        let d = model.evolve(&state, &seg).unwrap().delta_ps();
        assert!(d > 0.0 && d <= 0.2, "cloud 1000ps: {d}");
        // 5-15% of the lab value for the same schedule.
        let lab = burned(1000.0, 200.0, true).delta_ps();
        let ratio = d / lab;
        assert!((0.05..=0.15).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn burn1_recovers_fast() {
        let model = Model::default();
        let state = burned(1000.0, 200.0, true);
        let after = model.evolve(&state, &lab_segment(50.0, false)).unwrap();
        assert!(after.delta_ps().abs() <= 0.5, "got {}", after.delta_ps());
    }

    #[test]
    fn burn0_recovers_slowly() {
        let model = Model::default();
        let state = burned(1000.0, 200.0, false);
        let after = model.evolve(&state, &lab_segment(200.0, true)).unwrap();
        assert!(after.delta_ps() < -0.5, "got {}", after.delta_ps());
    }

    #[test]
    fn recovery_crossings_land_in_window() {
        // Hour at which |delta| first drops to 0.5 under complement, for each
        // fully burned length class, must fall in [30, 50].
        let model = Model::default();
        for length in [1000.0, 2000.0, 5000.0, 10000.0] {
            let mut state = burned(length, 200.0, true);
            let mut crossing = None;
            for hour in 1..=60 {
                state = model.evolve(&state, &lab_segment(1.0, false)).unwrap();
                if state.delta_ps().abs() <= 0.5 {
                    crossing = Some(hour);
                    break;
                }
            }
            let hour = crossing.expect("no crossing within 60 h");
            assert!(
                (30..=50).contains(&hour),
                "{length} ps crossed at {hour} h"
            );
        }
    }

    #[test]
    fn recovery_asymmetry() {
        // Time for a burn-1 route to reach |delta| <= 0.5 under complement is
        // strictly less than for the mirrored burn-0 route.
        let model = Model::default();
        let time_to_half = |burn_value: bool| -> u32 {
            let mut state = burned(1000.0, 200.0, burn_value);
            for hour in 1..=2000 {
                state = model
                    .evolve(&state, &lab_segment(1.0, !burn_value))
                    .unwrap();
                if state.delta_ps().abs() <= 0.5 {
                    return hour;
                }
            }
            panic!("never recovered");
        };
        assert!(time_to_half(true) < time_to_half(false));
    }

    #[test]
    fn true_delay_matches_drift() {
        let model = Model::default();
        let fresh = RouteState::fresh(RouteSpec::new(0, 1000.0).unwrap());
        assert_eq!(model.true_delay(&fresh, Polarity::Rising), 1000.0);
        assert_eq!(model.true_delay(&fresh, Polarity::Falling), 1000.0);
        let mut state = fresh;
        state.drift_fall_ps = 1.5;
        assert_eq!(model.true_delay(&state, Polarity::Falling), 1001.5);
        assert_eq!(model.true_delay(&state, Polarity::Rising), 1000.0);
    }

    #[test]
    fn doubling_length_roughly_doubles_delta() {
        for length in [1000.0, 2000.0, 5000.0] {
            let a = burned(length, 200.0, true).delta_ps();
            let b = burned(2.0 * length, 200.0, true).delta_ps();
            let ratio = b / a;
            assert!(
                (1.5..=2.5).contains(&ratio),
                "{length}: ratio {ratio}"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn delta_monotone_in_time(
            length in 500.0f64..12000.0,
            value in any::<bool>(),
            hours_a in 0.0f64..300.0,
            extra in 0.0f64..300.0,
        ) {
            let model = Model::default();
            let fresh = RouteState::fresh(RouteSpec::new(0, length).unwrap());
            let a = model.evolve(&fresh, &lab_segment(hours_a, value)).unwrap();
            let b = model.evolve(&a, &lab_segment(extra, value)).unwrap();
            prop_assert!(b.delta_ps().abs() + 1e-12 >= a.delta_ps().abs());
        }

        #[test]
        fn delta_monotone_in_length(
            length in 500.0f64..6000.0,
            factor in 1.0f64..4.0,
            hours in 1.0f64..300.0,
        ) {
            let shorter = burned(length, hours, true).delta_ps().abs();
            let longer = burned(length * factor, hours, true).delta_ps().abs();
            prop_assert!(longer + 1e-12 >= shorter);
        }

        #[test]
        fn sign_convention(
            length in 500.0f64..12000.0,
            value in any::<bool>(),
            hours in 0.5f64..300.0,
        ) {
            let d = burned(length, hours, value).delta_ps();
            if value { prop_assert!(d > 0.0); } else { prop_assert!(d < 0.0); }
        }

        #[test]
        fn segment_composability(
            length in 500.0f64..12000.0,
            burn_value in any::<bool>(),
            burn_hours in 0.0f64..250.0,
            value in any::<bool>(),
            total in 0.0f64..250.0,
            split in 0.0f64..1.0,
        ) {
            // Split a constant-value segment at an arbitrary point; evolving
            // through the parts must equal evolving through the whole, from
            // both fresh and pre-burned states.
            let model = Model::default();
            let start = burned(length, burn_hours, burn_value);
            let whole = model.evolve(&start, &lab_segment(total, value)).unwrap();
            let first = model.evolve(&start, &lab_segment(total * split, value)).unwrap();
            let parts = model
                .evolve(&first, &lab_segment(total * (1.0 - split), value))
                .unwrap();
            prop_assert!((whole.drift_rise_ps - parts.drift_rise_ps).abs() < 1e-6,
                "rise {} vs {}", whole.drift_rise_ps, parts.drift_rise_ps);
            prop_assert!((whole.drift_fall_ps - parts.drift_fall_ps).abs() < 1e-6,
                "fall {} vs {}", whole.drift_fall_ps, parts.drift_fall_ps);
        }

        #[test]
        fn drift_never_negative(
            length in 500.0f64..12000.0,
            h1 in 0.0f64..300.0,
            h2 in 0.0f64..300.0,
            h3 in 0.0f64..300.0,
        ) {
            let model = Model::default();
            let mut state = RouteState::fresh(RouteSpec::new(0, length).unwrap());
            for (hours, value) in [(h1, true), (h2, false), (h3, true)] {
                state = model.evolve(&state, &lab_segment(hours, value)).unwrap();
                prop_assert!(state.drift_rise_ps >= 0.0);
                prop_assert!(state.drift_fall_ps >= 0.0);
                prop_assert!(model.true_delay(&state, Polarity::Rising) > 0.0);
            }
        }

        #[test]
        fn delay_difference_equals_delta(
            length in 500.0f64..12000.0,
            h1 in 0.0f64..300.0,
            h2 in 0.0f64..300.0,
        ) {
            let model = Model::default();
            let mut state = RouteState::fresh(RouteSpec::new(0, length).unwrap());
            state = model.evolve(&state, &lab_segment(h1, true)).unwrap();
            state = model.evolve(&state, &lab_segment(h2, false)).unwrap();
            let diff = model.true_delay(&state, Polarity::Falling)
                - model.true_delay(&state, Polarity::Rising);
            prop_assert!((diff - state.delta_ps()).abs() < 1e-12);
        }
    }
}
