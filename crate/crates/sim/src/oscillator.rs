//! Drifting 32768 Hz oscillator with exact tick integration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use badge_core::timebase::NOMINAL_HZ;

use crate::event::NS_PER_S;

/// Largest frequency offset any drift model may reach, in Hz.
pub const MAX_OFFSET_HZ: f64 = 50.0;
const MICRO: i64 = 1_000_000;
/// µHz·ns per tick.
const TICK_UNITS: u128 = 1_000_000 * NS_PER_S as u128;

/// Frequency offset from nominal as a function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftModel {
    Constant {
        offset_hz: f64,
    },
    /// Offset changing linearly, updated once per second.
    Ramp {
        start_hz: f64,
        hz_per_hour: f64,
    },
    /// Offset doing a bounded random walk, one step per second.
    RandomWalk {
        start_hz: f64,
        step_hz: f64,
        bound_hz: f64,
        seed: u64,
    },
}

impl Default for DriftModel {
    fn default() -> Self {
        DriftModel::Constant { offset_hz: 0.0 }
    }
}

impl DriftModel {
    pub fn validate(&self) -> Result<(), String> {
        let ok = |v: f64| v.is_finite() && v.abs() <= MAX_OFFSET_HZ;
        match *self {
            DriftModel::Constant { offset_hz } if !ok(offset_hz) => Err(format!("offset {offset_hz} Hz out of range")),
            DriftModel::Ramp { start_hz, hz_per_hour } if !ok(start_hz) || !hz_per_hour.is_finite() => {
                Err("invalid ramp".into())
            }
            DriftModel::RandomWalk {
                start_hz,
                step_hz,
                bound_hz,
                ..
            } if !ok(start_hz) || !ok(bound_hz) || !(step_hz >= 0.0) || start_hz.abs() > bound_hz => {
                Err("invalid random walk".into())
            }
            _ => Ok(()),
        }
    }
}

fn micro_hz(hz: f64) -> i64 {
    (hz * MICRO as f64).round_ties_even() as i64
}

/// Tick counter of a real oscillator. The frequency is piecewise constant
/// over one-second segments and held in µHz, and ticks are the floor of
/// the exact integral, so no rounding error accumulates.
#[derive(Debug, Clone)]
pub struct Oscillator {
    model: DriftModel,
    /// Offsets of the segments generated so far, µHz.
    offsets: Vec<i64>,
    /// Integral at the start of each generated segment, µHz·ns.
    integral: Vec<u128>,
    walk: Option<(ChaCha8Rng, i64)>,
}

impl Oscillator {
    pub fn new(model: DriftModel) -> Self {
        let walk = match &model {
            DriftModel::RandomWalk { start_hz, seed, .. } => Some((ChaCha8Rng::seed_from_u64(*seed), micro_hz(*start_hz))),
            _ => None,
        };
        Oscillator {
            model,
            offsets: Vec::new(),
            integral: vec![0],
            walk,
        }
    }

    pub fn model(&self) -> &DriftModel {
        &self.model
    }

    fn segment_offset(&mut self, k: usize) -> i64 {
        match self.model {
            DriftModel::Constant { offset_hz } => micro_hz(offset_hz),
            DriftModel::Ramp { start_hz, hz_per_hour } => {
                micro_hz((start_hz + hz_per_hour * k as f64 / 3600.0).clamp(-MAX_OFFSET_HZ, MAX_OFFSET_HZ))
            }
            DriftModel::RandomWalk { step_hz, bound_hz, .. } => {
                let (rng, current) = self.walk.as_mut().expect("walk state");
                if k > 0 {
                    let step = micro_hz(step_hz);
                    let bound = micro_hz(bound_hz);
                    *current = (*current + rng.gen_range(-step..=step)).clamp(-bound, bound);
                }
                *current
            }
        }
    }

    fn extend_to(&mut self, segment: usize) {
        while self.offsets.len() <= segment {
            let k = self.offsets.len();
            let f = self.segment_offset(k);
            let hz = (NOMINAL_HZ as i64 * MICRO + f) as u128;
            self.offsets.push(f);
            let last = *self.integral.last().unwrap();
            self.integral.push(last + hz * NS_PER_S as u128);
        }
    }

    /// True frequency during the second containing `t_ns`, in Hz.
    pub fn frequency_hz(&mut self, t_ns: u64) -> f64 {
        let k = (t_ns / NS_PER_S) as usize;
        if let DriftModel::Constant { offset_hz } = self.model {
            return NOMINAL_HZ as f64 + micro_hz(offset_hz) as f64 / MICRO as f64;
        }
        self.extend_to(k);
        NOMINAL_HZ as f64 + self.offsets[k] as f64 / MICRO as f64
    }

    /// Ticks counted from time 0 up to `t_ns`.
    pub fn ticks_at(&mut self, t_ns: u64) -> u64 {
        if let DriftModel::Constant { offset_hz } = self.model {
            let hz = (NOMINAL_HZ as i64 * MICRO + micro_hz(offset_hz)) as u128;
            return (hz * t_ns as u128 / TICK_UNITS) as u64;
        }
        let k = (t_ns / NS_PER_S) as usize;
        self.extend_to(k);
        let within = (t_ns % NS_PER_S) as u128;
        let hz = (NOMINAL_HZ as i64 * MICRO + self.offsets[k]) as u128;
        ((self.integral[k] + hz * within) / TICK_UNITS) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nominal_oscillator_counts_32768_per_second() {
        let mut o = Oscillator::new(DriftModel::default());
        assert_eq!(o.ticks_at(NS_PER_S), 32768);
        assert_eq!(o.ticks_at(3600 * NS_PER_S), 32768 * 3600);
        assert_eq!(o.ticks_at(NS_PER_S / 32768 * 2), 1);
    }

    #[test]
    fn constant_drift_accumulates_exactly() {
        let mut o = Oscillator::new(DriftModel::Constant { offset_hz: 2.2 });
        // 600 s at 32770.2 Hz
        assert_eq!(o.ticks_at(600 * NS_PER_S), 32768 * 600 + 1320);
    }

    #[test]
    fn piecewise_models_are_monotonic_and_bounded() {
        for model in [
            DriftModel::Ramp {
                start_hz: -3.0,
                hz_per_hour: 200.0,
            },
            DriftModel::RandomWalk {
                start_hz: 0.0,
                step_hz: 0.5,
                bound_hz: 5.0,
                seed: 7,
            },
        ] {
            let mut o = Oscillator::new(model);
            let mut last = 0;
            for s in 0..7200u64 {
                let t = s * NS_PER_S + 123_456;
                let ticks = o.ticks_at(t);
                assert!(ticks >= last);
                last = ticks;
                assert!((o.frequency_hz(t) - 32768.0).abs() <= MAX_OFFSET_HZ);
            }
        }
    }

    #[test]
    fn ramp_matches_piecewise_integral() {
        let mut o = Oscillator::new(DriftModel::Ramp {
            start_hz: 0.0,
            hz_per_hour: 3600.0,
        });
        // Offsets 0, 1, 2 Hz in the first three seconds.
        assert_eq!(o.ticks_at(3 * NS_PER_S), 3 * 32768 + 3);
    }

    #[test]
    fn random_walk_is_reproducible() {
        let m = DriftModel::RandomWalk {
            start_hz: 1.0,
            step_hz: 0.1,
            bound_hz: 4.0,
            seed: 3,
        };
        let mut a = Oscillator::new(m.clone());
        let mut b = Oscillator::new(m);
        assert_eq!(a.ticks_at(5000 * NS_PER_S), b.ticks_at(5000 * NS_PER_S));
    }
}
