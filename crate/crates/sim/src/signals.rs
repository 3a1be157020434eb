//! Synthetic inputs for the sensors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Highest frequency present in the synthetic audio, in Hz.
pub const AUDIO_BAND_HZ: f64 = 340.0;
const ENVELOPE_BAND_HZ: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AudioParams {
    /// Sinusoidal components of the carrier.
    pub components: usize,
    /// RMS of the signal around the zero level, in ADC counts.
    pub rms_counts: f64,
    /// White noise added to every conversion, in ADC counts. Zero keeps the
    /// signal strictly band-limited.
    pub noise_counts: f64,
}

impl Default for AudioParams {
    fn default() -> Self {
        AudioParams {
            components: 24,
            rms_counts: 20.0,
            noise_counts: 0.0,
        }
    }
}

/// Speech-like band-limited signal: a sum of sinusoids below
/// [`AUDIO_BAND_HZ`] minus the envelope band, amplitude-modulated by a slow
/// envelope, so the product stays within the band.
#[derive(Debug, Clone)]
pub struct AudioSignal {
    carrier: Vec<(f64, f64, f64)>,
    envelope: Vec<(f64, f64, f64)>,
    noise: Option<(ChaCha8Rng, Normal<f64>)>,
}

impl AudioSignal {
    pub fn new(params: &AudioParams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = params.components.max(1);
        let amp = params.rms_counts * (2.0 / n as f64).sqrt();
        let carrier = (0..n)
            .map(|_| {
                (
                    rng.gen_range(40.0..AUDIO_BAND_HZ - ENVELOPE_BAND_HZ),
                    amp * rng.gen_range(0.5..1.5),
                    rng.gen_range(0.0..TAU),
                )
            })
            .collect();
        let envelope = (0..3)
            .map(|_| (rng.gen_range(0.2..ENVELOPE_BAND_HZ), rng.gen_range(0.1..0.3), rng.gen_range(0.0..TAU)))
            .collect();
        let noise = (params.noise_counts > 0.0).then(|| {
            (
                ChaCha8Rng::seed_from_u64(seed ^ 0x5eed),
                Normal::new(0.0, params.noise_counts).expect("finite noise"),
            )
        });
        AudioSignal { carrier, envelope, noise }
    }

    /// Analog value around zero at time `t` seconds, in ADC counts.
    pub fn value(&self, t: f64) -> f64 {
        let env = 0.6 + self.envelope.iter().map(|(f, a, p)| a * (TAU * f * t + p).sin()).sum::<f64>();
        let carrier: f64 = self.carrier.iter().map(|(f, a, p)| a * (TAU * f * t + p).sin()).sum();
        env.max(0.0) * carrier
    }

    /// One 8-bit conversion at time `t` seconds.
    pub fn adc(&mut self, t: f64) -> u8 {
        let noise = match &mut self.noise {
            Some((rng, dist)) => dist.sample(rng),
            None => 0.0,
        };
        (128.0 + self.value(t) + noise).round().clamp(0.0, 255.0) as u8
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionParams {
    /// Mean time between movement bursts, in seconds.
    pub mean_gap_s: f64,
    /// Burst length range in seconds.
    pub burst_s: (f64, f64),
    /// Peak acceleration range during bursts, in mg.
    pub peak_mg: (f64, f64),
}

impl Default for MotionParams {
    fn default() -> Self {
        MotionParams {
            mean_gap_s: 20.0,
            burst_s: (0.5, 3.0),
            peak_mg: (200.0, 800.0),
        }
    }
}

/// Wearer movement: gravity plus sinusoidal bursts at random times.
#[derive(Debug, Clone)]
pub struct Motion {
    params: MotionParams,
    rng: ChaCha8Rng,
    /// (start, end, peak, frequency) of the current or next burst.
    burst: (f64, f64, f64, f64),
}

impl Motion {
    pub fn new(params: MotionParams, seed: u64) -> Self {
        let mut m = Motion {
            params,
            rng: ChaCha8Rng::seed_from_u64(seed),
            burst: (0.0, 0.0, 0.0, 1.0),
        };
        m.next_burst(0.0);
        m
    }

    fn next_burst(&mut self, after: f64) {
        let p = &self.params;
        let gap = -p.mean_gap_s.max(0.001) * (1.0 - self.rng.gen::<f64>()).ln();
        let start = after + gap;
        let len = self.rng.gen_range(p.burst_s.0..=p.burst_s.1.max(p.burst_s.0));
        let peak = self.rng.gen_range(p.peak_mg.0..=p.peak_mg.1.max(p.peak_mg.0));
        let freq = self.rng.gen_range(1.0..3.0);
        self.burst = (start, start + len, peak, freq);
    }

    /// Acceleration in mg at time `t` seconds. Times must not decrease.
    pub fn sample(&mut self, t: f64) -> [i16; 3] {
        while t >= self.burst.1 {
            let end = self.burst.1;
            self.next_burst(end);
        }
        let (start, _, peak, f) = self.burst;
        let a = if t >= start { peak * (TAU * f * (t - start)).sin() } else { 0.0 };
        [(0.6 * a) as i16, (0.8 * a) as i16, (1000.0 + 0.3 * a) as i16]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatteryParams {
    pub start_v: f64,
    pub volts_per_hour: f64,
}

impl Default for BatteryParams {
    fn default() -> Self {
        BatteryParams {
            start_v: 3.0,
            volts_per_hour: 0.01,
        }
    }
}

impl BatteryParams {
    pub fn volts(&self, t: f64) -> f64 {
        (self.start_v - self.volts_per_hour * t / 3600.0).max(0.0)
    }

    /// 10-bit reading of the supply against the 1.2 V reference with 1/3
    /// prescaling.
    pub fn adc10(&self, t: f64) -> u16 {
        (self.volts(t) / 3.6 * 1024.0).round().clamp(0.0, 1023.0) as u16
    }
}

/// Received signal strength between two positions on a line, in dBm.
pub fn rssi(distance: f64, rng: &mut ChaCha8Rng) -> i8 {
    let base = -55.0 - 20.0 * (1.0 + distance.abs()).log10();
    let noise = Normal::new(0.0, 3.0).expect("valid").sample(rng);
    (base + noise).round().clamp(-100.0, -20.0) as i8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn audio_is_deterministic_and_centered() {
        let mut a = AudioSignal::new(&AudioParams::default(), 1);
        let mut b = AudioSignal::new(&AudioParams::default(), 1);
        let xs: Vec<u8> = (0..2000).map(|i| a.adc(i as f64 * 0.00142)).collect();
        let ys: Vec<u8> = (0..2000).map(|i| b.adc(i as f64 * 0.00142)).collect();
        assert_eq!(xs, ys);
        let mean = xs.iter().map(|&x| x as f64).sum::<f64>() / xs.len() as f64;
        assert!((mean - 128.0).abs() < 3.0, "{mean}");
    }

    #[test]
    fn audio_spectrum_stays_in_band() {
        let s = AudioSignal::new(&AudioParams::default(), 2);
        assert!(s.carrier.iter().all(|c| c.0 + ENVELOPE_BAND_HZ <= AUDIO_BAND_HZ));
        assert!(s.envelope.iter().all(|e| e.0 <= ENVELOPE_BAND_HZ));
    }

    #[test]
    fn motion_rests_between_bursts() {
        let mut m = Motion::new(MotionParams::default(), 3);
        let samples: Vec<[i16; 3]> = (0..6000).map(|i| m.sample(i as f64 * 0.1)).collect();
        assert!(samples.iter().any(|s| s == &[0, 0, 1000]));
        assert!(samples.iter().any(|s| s[1].abs() > 100));
    }

    #[test]
    fn battery_reading_matches_formula() {
        let b = BatteryParams {
            start_v: 3.0,
            volts_per_hour: 0.0,
        };
        assert_eq!(b.adc10(0.0), 853);
    }
}
