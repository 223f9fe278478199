//! Airborne exposure kernel.
//!
//! A host arriving at `t_s` emits particles at rate `g` into a proximity
//! volume `V`, from which they are removed at rate `r`. The concentration
//! rises towards the steady state `g / (r V)` while the host is present and
//! decays exponentially after the host departs at `t_l`. A neighbour present
//! over `[t_s_n, t_l_n]` inhales at pulmonary rate `p`; the intake dose is
//! `p` times the integral of the concentration over the neighbour's window,
//! split into a direct segment (host present) and an indirect segment (host
//! gone, particles persist).
//!
//! Units throughout: minutes, cubic metres, PFU.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this value of `r·Δt` the `x - (1 - e^-x)` term is taken from its
/// Taylor series.
const SERIES_CUTOFF: f64 = 1e-3;

/// Influenza particle generation rate, 0.304 PFU/s.
pub const INFLUENZA_GENERATION_RATE: f64 = 0.304 * 60.0;
/// Air volume of a 20 m radius, 2 m high proximity.
pub const PROXIMITY_VOLUME: f64 = 2512.0;
/// Pulmonary ventilation, 7.5 L/min.
pub const PULMONARY_RATE: f64 = 7.5 / 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentParams {
    /// `g`, PFU per minute.
    pub generation_rate: f64,
    /// `V`, cubic metres.
    pub air_volume: f64,
    /// `p`, cubic metres per minute.
    pub pulmonary_rate: f64,
    /// `r`, per minute.
    pub removal_rate: f64,
}

impl EnvironmentParams {
    pub fn new(
        generation_rate: f64,
        air_volume: f64,
        pulmonary_rate: f64,
        removal_rate: f64,
    ) -> Result<Self> {
        let env = EnvironmentParams {
            generation_rate,
            air_volume,
            pulmonary_rate,
            removal_rate,
        };
        env.validate()?;
        Ok(env)
    }

    /// Influenza defaults with the given removal rate (per minute).
    pub fn influenza(removal_rate: f64) -> Result<Self> {
        Self::new(
            INFLUENZA_GENERATION_RATE,
            PROXIMITY_VOLUME,
            PULMONARY_RATE,
            removal_rate,
        )
    }

    pub fn with_removal_rate(self, removal_rate: f64) -> Result<Self> {
        Self::new(
            self.generation_rate,
            self.air_volume,
            self.pulmonary_rate,
            removal_rate,
        )
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("generation_rate", self.generation_rate),
            ("air_volume", self.air_volume),
            ("pulmonary_rate", self.pulmonary_rate),
            ("removal_rate", self.removal_rate),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Plateau concentration `g / (r V)`.
    pub fn steady_state(&self) -> f64 {
        self.generation_rate / (self.removal_rate * self.air_volume)
    }

    /// `g p / (r² V)`, the common prefactor of every dose expression.
    fn dose_scale(&self) -> f64 {
        self.generation_rate * self.pulmonary_rate
            / (self.removal_rate * self.removal_rate * self.air_volume)
    }
}

/// Which segments a link's exposure window covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkCase {
    /// Neighbour leaves no later than the host.
    DirectOnly,
    /// Neighbour overlaps the host and stays past the host's departure.
    Mixed,
    /// Neighbour arrives at or after the host's departure.
    IndirectOnly,
}

/// Host and neighbour presence bounds of one transmission link, in minutes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkInterval {
    pub host_arrival: f64,
    pub host_departure: f64,
    pub neighbour_arrival: f64,
    pub neighbour_departure: f64,
}

impl LinkInterval {
    pub fn new(
        host_arrival: f64,
        host_departure: f64,
        neighbour_arrival: f64,
        neighbour_departure: f64,
    ) -> Result<Self> {
        let link = LinkInterval {
            host_arrival,
            host_departure,
            neighbour_arrival,
            neighbour_departure,
        };
        link.validate()?;
        Ok(link)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.host_arrival,
            self.host_departure,
            self.neighbour_arrival,
            self.neighbour_departure,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::TimeOrder(format!("non-finite time in {self:?}")));
        }
        if self.host_arrival > self.host_departure {
            return Err(Error::TimeOrder(format!(
                "host arrives at {} after leaving at {}",
                self.host_arrival, self.host_departure
            )));
        }
        if self.neighbour_arrival > self.neighbour_departure {
            return Err(Error::TimeOrder(format!(
                "neighbour arrives at {} after leaving at {}",
                self.neighbour_arrival, self.neighbour_departure
            )));
        }
        // An empty window (departure exactly at host arrival) is accepted and
        // carries zero dose.
        if self.neighbour_departure < self.host_arrival {
            return Err(Error::TimeOrder(format!(
                "neighbour leaves at {} before host arrives at {}",
                self.neighbour_departure, self.host_arrival
            )));
        }
        Ok(())
    }

    pub fn case(&self) -> LinkCase {
        if self.neighbour_departure <= self.host_departure {
            LinkCase::DirectOnly
        } else if self.neighbour_arrival < self.host_departure {
            LinkCase::Mixed
        } else {
            LinkCase::IndirectOnly
        }
    }

    /// Start of the inhalation window: the neighbour only inhales while
    /// present, and nothing is emitted before the host arrives.
    pub fn window_start(&self) -> f64 {
        self.host_arrival.max(self.neighbour_arrival)
    }
}

/// `1 - e^{-x}` without cancellation.
#[inline]
fn one_minus_exp_neg(x: f64) -> f64 {
    -(-x).exp_m1()
}

/// `x - (1 - e^{-x})`, which is `x²/2 - x³/6 + ...` for small `x`.
#[inline]
fn excess_over_saturation(x: f64) -> f64 {
    if x < SERIES_CUTOFF {
        let x2 = x * x;
        x2 * (0.5 - x / 6.0 + x2 / 24.0 - x2 * x / 120.0 + x2 * x2 / 720.0)
    } else {
        x + (-x).exp_m1()
    }
}

/// Concentration while the host is present.
pub fn concentration_during_presence(env: &EnvironmentParams, t_s: f64, t: f64) -> Result<f64> {
    if t < t_s {
        return Err(Error::TimeOrder(format!("t = {t} precedes host arrival {t_s}")));
    }
    Ok(env.steady_state() * one_minus_exp_neg(env.removal_rate * (t - t_s)))
}

/// Concentration after the host left at `t_l`.
pub fn concentration_after_departure(
    env: &EnvironmentParams,
    t_s: f64,
    t_l: f64,
    t: f64,
) -> Result<f64> {
    if t_l < t_s {
        return Err(Error::TimeOrder(format!("departure {t_l} precedes arrival {t_s}")));
    }
    if t < t_l {
        return Err(Error::TimeOrder(format!("t = {t} precedes host departure {t_l}")));
    }
    let r = env.removal_rate;
    Ok(env.steady_state() * one_minus_exp_neg(r * (t_l - t_s)) * (-r * (t - t_l)).exp())
}

/// Dose inhaled over `[from, to]` while the host (arrived at `t_s`) is
/// still present. Requires `t_s <= from <= to`.
pub fn direct_dose(env: &EnvironmentParams, t_s: f64, from: f64, to: f64) -> f64 {
    debug_assert!(t_s <= from && from <= to);
    let r = env.removal_rate;
    let span = r * (to - from);
    let lead = r * (from - t_s);
    // r ∫ (1 - e^{-r(t - t_s)}) dt = [span - (1 - e^{-span})] + (1 - e^{-lead})(1 - e^{-span})
    env.dose_scale() * (excess_over_saturation(span) + one_minus_exp_neg(lead) * one_minus_exp_neg(span))
}

/// Dose inhaled over `[from, to]` after the host (present over
/// `[t_s, t_l]`) has left. Requires `t_l <= from <= to`.
pub fn indirect_dose(env: &EnvironmentParams, t_s: f64, t_l: f64, from: f64, to: f64) -> f64 {
    debug_assert!(t_s <= t_l && t_l <= from && from <= to);
    let r = env.removal_rate;
    env.dose_scale()
        * one_minus_exp_neg(r * (t_l - t_s))
        * (-r * (from - t_l)).exp()
        * one_minus_exp_neg(r * (to - from))
}

/// Total dose a neighbour receives over one link: direct segment plus
/// indirect segment, whichever the link's window covers.
pub fn link_exposure(env: &EnvironmentParams, link: &LinkInterval) -> f64 {
    let t_s = link.host_arrival;
    let t_l = link.host_departure;
    let lo = link.window_start();
    let hi = link.neighbour_departure;
    if hi <= lo {
        return 0.0;
    }
    let mut dose = 0.0;
    if lo < t_l {
        dose += direct_dose(env, t_s, lo, hi.min(t_l));
    }
    if hi > t_l {
        dose += indirect_dose(env, t_s, t_l, lo.max(t_l), hi);
    }
    dose
}

/// The single merged expression covering all three link cases through the
/// case selector `t_i`. Exponentials are regrouped as time differences so
/// absolute timestamps of many days do not overflow.
pub fn merged_link_exposure(env: &EnvironmentParams, link: &LinkInterval) -> f64 {
    let t_s = link.host_arrival;
    let t_l = link.host_departure;
    let ts_n = link.window_start();
    let tl_n = link.neighbour_departure.max(ts_n);
    let t_i = match link.case() {
        LinkCase::DirectOnly => tl_n,
        LinkCase::Mixed => t_l,
        LinkCase::IndirectOnly => ts_n,
    };
    let r = env.removal_rate;
    let e = |dt: f64| (-r * dt).exp();
    env.dose_scale()
        * (r * (t_i - ts_n) + (e(t_i - t_l) - e(tl_n - t_l)) + (e(tl_n - t_s) - e(ts_n - t_s)))
}

/// Aggregate dose over every link received in the observation window.
pub fn total_exposure(exposures: &[f64]) -> f64 {
    exposures.iter().sum()
}

/// Dose-response: probability of infection after inhaling `exposure` PFU.
pub fn infection_probability(exposure: f64, sigma: f64) -> Result<f64> {
    if exposure < 0.0 || exposure.is_nan() {
        return Err(Error::NegativeExposure(exposure));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::param("sigma", format!("must be finite and > 0, got {sigma}")));
    }
    Ok(dose_response(exposure, sigma))
}

/// Unchecked form of [`infection_probability`].
#[inline]
pub(crate) fn dose_response(exposure: f64, sigma: f64) -> f64 {
    one_minus_exp_neg(sigma * exposure)
}

/// Disease-level parameters shared by every individual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiseaseParams {
    /// Infectiousness, per PFU.
    pub sigma: f64,
    /// Inclusive infectious-period bounds in days.
    pub tau_range: (u32, u32),
    /// Days between infection and becoming infectious.
    pub latent_days: u32,
}

impl Default for DiseaseParams {
    fn default() -> Self {
        DiseaseParams {
            sigma: 0.33,
            tau_range: (3, 5),
            latent_days: 1,
        }
    }
}

impl DiseaseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::param("sigma", format!("must be > 0, got {}", self.sigma)));
        }
        let (lo, hi) = self.tau_range;
        if lo < 1 || hi < lo {
            return Err(Error::param("tau_range", format!("need 1 <= lo <= hi, got {lo}..{hi}")));
        }
        Ok(())
    }
}

/// Samples the concentration on `[t_s, horizon]` at `step` spacing: the
/// rising branch up to `t_l`, the decaying branch after. The departure
/// instant and the horizon are always included.
pub fn emit_concentration_curve(
    env: &EnvironmentParams,
    t_s: f64,
    t_l: f64,
    horizon: f64,
    step: f64,
) -> Result<Vec<(f64, f64)>> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::param("step", format!("must be > 0, got {step}")));
    }
    if t_l < t_s {
        return Err(Error::TimeOrder(format!("departure {t_l} precedes arrival {t_s}")));
    }
    if horizon < t_l {
        return Err(Error::TimeOrder(format!("horizon {horizon} precedes departure {t_l}")));
    }
    let mut times = Vec::new();
    let mut k = 0u64;
    loop {
        let t = t_s + k as f64 * step;
        if t >= horizon {
            break;
        }
        times.push(t);
        k += 1;
    }
    times.push(t_l);
    times.push(horizon);
    times.sort_by(f64::total_cmp);
    times.dedup();

    times
        .into_iter()
        .map(|t| {
            let c = if t <= t_l {
                concentration_during_presence(env, t_s, t)?
            } else {
                concentration_after_departure(env, t_s, t_l, t)?
            };
            Ok((t, c))
        })
        .collect()
}

pub fn write_curve_csv<W: Write>(mut out: W, curve: &[(f64, f64)]) -> std::io::Result<()> {
    writeln!(out, "time_min,concentration_pfu_m3")?;
    for (t, c) in curve {
        writeln!(out, "{t},{c}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env60() -> EnvironmentParams {
        EnvironmentParams::influenza(1.0 / 60.0).unwrap()
    }

    #[test]
    fn unit_conversion_of_defaults() {
        assert!((INFLUENZA_GENERATION_RATE - 18.24).abs() < 1e-12);
        assert!((PULMONARY_RATE - 0.0075).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_positive_parameters() {
        assert!(EnvironmentParams::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(EnvironmentParams::new(1.0, -1.0, 1.0, 1.0).is_err());
        assert!(EnvironmentParams::new(1.0, 1.0, 1.0, f64::NAN).is_err());
        assert!(env60().with_removal_rate(0.0).is_err());
    }

    #[test]
    fn concentration_zero_at_arrival() {
        assert_eq!(concentration_during_presence(&env60(), 5.0, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn concentration_rejects_time_before_arrival() {
        assert!(matches!(
            concentration_during_presence(&env60(), 5.0, 4.0),
            Err(Error::TimeOrder(_))
        ));
        assert!(concentration_after_departure(&env60(), 0.0, 10.0, 9.0).is_err());
    }

    #[test]
    fn concentration_continuous_at_departure() {
        let env = env60();
        let a = concentration_during_presence(&env, 0.0, 200.0).unwrap();
        let b = concentration_after_departure(&env, 0.0, 200.0, 200.0).unwrap();
        assert_eq!(a, b);
        let far = concentration_after_departure(&env, 0.0, 200.0, 1e6).unwrap();
        assert_eq!(far, 0.0);
    }

    #[test]
    fn smaller_removal_rate_saturates_slower_but_higher() {
        let fast = EnvironmentParams::influenza(1.0 / 10.0).unwrap();
        let slow = EnvironmentParams::influenza(1.0 / 60.0).unwrap();
        // Early on the faster-removal room is closer to its (lower) plateau.
        let frac = |e: &EnvironmentParams, t| concentration_during_presence(e, 0.0, t).unwrap() / e.steady_state();
        assert!(frac(&fast, 20.0) > frac(&slow, 20.0));
        assert!(slow.steady_state() > fast.steady_state());
        for t in [1.0, 10.0, 100.0, 1000.0] {
            assert!(
                concentration_during_presence(&slow, 0.0, t).unwrap()
                    > concentration_during_presence(&fast, 0.0, t).unwrap()
            );
        }
    }

    #[test]
    fn link_case_is_total() {
        let l = |a, b, c, d| LinkInterval::new(a, b, c, d).unwrap().case();
        assert_eq!(l(0.0, 60.0, 10.0, 40.0), LinkCase::DirectOnly);
        assert_eq!(l(0.0, 30.0, 10.0, 100.0), LinkCase::Mixed);
        assert_eq!(l(0.0, 30.0, 100.0, 150.0), LinkCase::IndirectOnly);
        assert_eq!(l(0.0, 30.0, 30.0, 40.0), LinkCase::IndirectOnly);
        assert_eq!(l(0.0, 30.0, 10.0, 30.0), LinkCase::DirectOnly);
    }

    #[test]
    fn link_interval_rejects_bad_order() {
        assert!(LinkInterval::new(10.0, 5.0, 6.0, 7.0).is_err());
        assert!(LinkInterval::new(0.0, 5.0, 7.0, 6.0).is_err());
        assert!(LinkInterval::new(10.0, 20.0, 0.0, 5.0).is_err());
        assert!(LinkInterval::new(0.0, 5.0, f64::INFINITY, f64::INFINITY).is_err());
    }

    #[test]
    fn zero_duration_presence_gives_zero() {
        let link = LinkInterval::new(0.0, 60.0, 20.0, 20.0).unwrap();
        assert_eq!(link_exposure(&env60(), &link), 0.0);
        let empty = LinkInterval::new(0.0, 60.0, 0.0, 0.0).unwrap();
        assert_eq!(link_exposure(&env60(), &empty), 0.0);
    }

    #[test]
    fn zero_duration_host_visit_gives_zero() {
        let link = LinkInterval::new(50.0, 50.0, 60.0, 120.0).unwrap();
        assert_eq!(link_exposure(&env60(), &link), 0.0);
    }

    #[test]
    fn neighbour_before_host_is_clamped_to_host_arrival() {
        let env = env60();
        let early = LinkInterval::new(10.0, 60.0, 0.0, 40.0).unwrap();
        let clamped = LinkInterval::new(10.0, 60.0, 10.0, 40.0).unwrap();
        assert_eq!(link_exposure(&env, &early), link_exposure(&env, &clamped));
    }

    #[test]
    fn tiny_removal_rate_matches_linear_limit() {
        // r → 0: C(t) ≈ g (t - t_s) / V, so the direct dose ≈ g p (b² - a²) / (2V).
        let env = EnvironmentParams::influenza(1e-12).unwrap();
        let link = LinkInterval::new(0.0, 100.0, 20.0, 80.0).unwrap();
        let limit = env.generation_rate * env.pulmonary_rate * (80.0f64.powi(2) - 20.0f64.powi(2))
            / (2.0 * env.air_volume);
        let got = link_exposure(&env, &link);
        assert!((got - limit).abs() / limit < 1e-9, "{got} vs {limit}");
    }

    #[test]
    fn total_exposure_sums() {
        assert_eq!(total_exposure(&[]), 0.0);
        assert_eq!(total_exposure(&[1.0, 2.0, 0.5]), 3.5);
        let e = link_exposure(&env60(), &LinkInterval::new(0.0, 60.0, 10.0, 40.0).unwrap());
        let m = 7;
        let sum = total_exposure(&vec![e; m]);
        assert!((sum - m as f64 * e).abs() <= 1e-15 * sum);
    }

    #[test]
    fn infection_probability_edges() {
        assert_eq!(infection_probability(0.0, 0.33).unwrap(), 0.0);
        assert!((infection_probability(2.1, 0.33).unwrap() - 0.5).abs() < 1e-3);
        let big = infection_probability(1e3, 0.33).unwrap();
        assert!(big > 0.999_999 && big <= 1.0);
        assert!(matches!(
            infection_probability(-1.0, 0.33),
            Err(Error::NegativeExposure(_))
        ));
        assert!(infection_probability(1.0, 0.0).is_err());
    }

    #[test]
    fn curve_rejects_bad_step() {
        assert!(emit_concentration_curve(&env60(), 0.0, 200.0, 400.0, 0.0).is_err());
        assert!(emit_concentration_curve(&env60(), 0.0, 200.0, 400.0, -1.0).is_err());
        assert!(emit_concentration_curve(&env60(), 0.0, 200.0, 100.0, 1.0).is_err());
    }

    #[test]
    fn curve_ending_at_departure_ends_on_junction() {
        let env = env60();
        let curve = emit_concentration_curve(&env, 0.0, 200.0, 200.0, 7.0).unwrap();
        let (t, c) = *curve.last().unwrap();
        assert_eq!(t, 200.0);
        assert_eq!(c, concentration_during_presence(&env, 0.0, 200.0).unwrap());
        assert_eq!(curve.iter().filter(|(t, _)| *t == 200.0).count(), 1);
    }

    #[test]
    fn curves_ordered_by_removal_time() {
        let curves: Vec<_> = [10.0, 30.0, 60.0]
            .iter()
            .map(|rt| {
                let env = EnvironmentParams::influenza(1.0 / rt).unwrap();
                (env, emit_concentration_curve(&env, 0.0, 200.0, 600.0, 5.0).unwrap())
            })
            .collect();
        for (env, curve) in &curves {
            for &(_, c) in curve {
                assert!((0.0..=env.steady_state()).contains(&c));
            }
        }
        // Larger removal time: higher plateau and slower post-departure decay.
        for w in curves.windows(2) {
            let (lo, hi) = (&w[0].1, &w[1].1);
            let at = |c: &Vec<(f64, f64)>, t: f64| c.iter().find(|p| p.0 == t).unwrap().1;
            assert!(at(hi, 200.0) > at(lo, 200.0));
            let ratio = |c: &Vec<(f64, f64)>| at(c, 300.0) / at(c, 200.0);
            assert!(ratio(hi) > ratio(lo));
        }
    }

    #[test]
    fn curve_csv_header() {
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &[(0.0, 0.0), (1.5, 0.25)]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "time_min,concentration_pfu_m3\n0,0\n1.5,0.25\n");
    }
}
