//! Signal processing applied between sampling and storage.
//!
//! Whenever a real value becomes an integer it is rounded half to even,
//! except mean RSSI aggregation, which rounds toward negative infinity.

use thiserror::Error;

use super::chunks::{Aggregation, BEACON_ID_MIN, SCAN_CAPACITY, SCAN_STORED_DEVICES};
use super::proto::ScanResultData;

/// ADC reading of the microphone at silence.
pub const MIC_ZERO_LEVEL: u8 = 128;
/// Microphone sampling timer period in microseconds (about 700 Hz).
pub const MIC_SAMPLE_PERIOD_US: u64 = 1420;
pub const BATTERY_MIN_V: f64 = 1.0;
pub const BATTERY_MAX_V: f64 = 3.55;
pub const ACCEL_HIGH_PASS_HZ: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("averaging window holds no samples")]
pub struct EmptyWindow;

/// `num / den` rounded to the nearest integer, ties to even.
pub fn div_round_half_even(num: u64, den: u64) -> u64 {
    assert!(den > 0);
    let q = num / den;
    let r = num % den;
    match (2 * r).cmp(&den) {
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q & 1),
        std::cmp::Ordering::Less => q,
    }
}

/// Mean amplitude `|s − 128|` over one averaging window.
pub fn mic_average(samples: &[u8]) -> Result<u8, EmptyWindow> {
    let mut acc = MicAccumulator::default();
    for &s in samples {
        acc.push(s);
    }
    acc.take()
}

/// Running sum and count of amplitudes between two averaging ticks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MicAccumulator {
    sum: u64,
    count: u64,
}

impl MicAccumulator {
    pub fn push(&mut self, adc: u8) {
        self.sum += adc.abs_diff(MIC_ZERO_LEVEL) as u64;
        self.count += 1;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Returns the window average and starts a new window.
    pub fn take(&mut self) -> Result<u8, EmptyWindow> {
        if self.count == 0 {
            return Err(EmptyWindow);
        }
        let avg = div_round_half_even(self.sum, self.count).min(255) as u8;
        *self = MicAccumulator::default();
        Ok(avg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct DeviceAggregate {
    id: u16,
    sum: i64,
    max: i8,
    packets: u32,
}

/// Per-device RSSI aggregation during one scan. Holds at most
/// [`SCAN_CAPACITY`] devices; packets from further devices are dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanAccumulator {
    aggregation: Aggregation,
    devices: Vec<DeviceAggregate>,
    dropped: u64,
}

impl ScanAccumulator {
    pub fn new(aggregation: Aggregation) -> Self {
        ScanAccumulator {
            aggregation,
            devices: Vec::new(),
            dropped: 0,
        }
    }

    pub fn observe(&mut self, id: u16, rssi: i8) {
        if let Some(d) = self.devices.iter_mut().find(|d| d.id == id) {
            d.sum += rssi as i64;
            d.max = d.max.max(rssi);
            d.packets += 1;
        } else if self.devices.len() < SCAN_CAPACITY {
            self.devices.push(DeviceAggregate {
                id,
                sum: rssi as i64,
                max: rssi,
                packets: 1,
            });
        } else {
            self.dropped += 1;
        }
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    /// Packets ignored because the device table was full.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    /// Aggregated devices in order of first sighting. The packet count
    /// saturates at 255.
    pub fn results(&self) -> Vec<ScanResultData> {
        self.devices
            .iter()
            .map(|d| ScanResultData {
                id: d.id,
                rssi: match self.aggregation {
                    Aggregation::Mean => d.sum.div_euclid(d.packets as i64) as i8,
                    Aggregation::Max => d.max,
                },
                count: d.packets.min(255) as u8,
            })
            .collect()
    }
}

pub fn is_beacon(id: u16) -> bool {
    id >= BEACON_ID_MIN
}

/// Multistage sort: beacons first, each group by RSSI descending, ties in
/// their original order. Then keeps the first [`SCAN_STORED_DEVICES`].
pub fn sort_and_truncate(devices: &mut Vec<ScanResultData>) {
    devices.sort_by_key(|d| (!is_beacon(d.id), std::cmp::Reverse(d.rssi)));
    devices.truncate(SCAN_STORED_DEVICES);
}

/// Aggregates raw `(id, rssi)` observations and returns the device list as
/// stored.
pub fn scan_aggregate_and_sort(observations: &[(u16, i8)], aggregation: Aggregation) -> Vec<ScanResultData> {
    let mut acc = ScanAccumulator::new(aggregation);
    for &(id, rssi) in observations {
        acc.observe(id, rssi);
    }
    let mut devices = acc.results();
    sort_and_truncate(&mut devices);
    devices
}

/// Exponentially weighted moving average; the first sample is taken as is.
pub fn battery_ewma(prev: Option<f64>, sample: f64, alpha: f64) -> f64 {
    match prev {
        None => sample,
        Some(s) => alpha * sample + (1.0 - alpha) * s,
    }
}

/// Supply voltage from a 10-bit ADC reading against the 1.2 V band gap
/// through a 1/3 divider.
pub fn battery_from_adc(adc10: u16) -> f64 {
    assert!(adc10 < 1024, "ADC reading has 10 bits");
    adc10 as f64 / 1024.0 * 3.0 * 1.2
}

/// One-byte voltage code `V·100 − 100`, saturating outside 1.00–3.55 V.
pub fn battery_encode(volts: f64) -> u8 {
    let b = (volts * 100.0 - 100.0).round_ties_even();
    if b.is_nan() {
        0
    } else {
        b.clamp(0.0, 255.0) as u8
    }
}

pub fn battery_decode(byte: u8) -> f64 {
    (byte as f64 + 100.0) / 100.0
}

/// Averaged supply voltage, fed by periodic ADC readings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryMonitor {
    alpha: f64,
    volts: Option<f64>,
}

impl BatteryMonitor {
    pub fn new(alpha: f64) -> Self {
        assert!(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
        BatteryMonitor { alpha, volts: None }
    }

    pub fn update(&mut self, adc10: u16) -> f64 {
        let v = battery_ewma(self.volts, battery_from_adc(adc10), self.alpha);
        self.volts = Some(v);
        v
    }

    pub fn volts(&self) -> Option<f64> {
        self.volts
    }

    /// Advertising byte; 0 before the first reading.
    pub fn byte(&self) -> u8 {
        self.volts.map(battery_encode).unwrap_or(0)
    }
}

/// First-order high-pass on three axes, removing gravity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighPass {
    a: f64,
    prev_in: Option<[f64; 3]>,
    prev_out: [f64; 3],
}

impl HighPass {
    pub fn new(cutoff_hz: f64, sample_rate_hz: f64) -> Self {
        let rc = 1.0 / (2.0 * std::f64::consts::PI * cutoff_hz);
        let dt = 1.0 / sample_rate_hz;
        HighPass {
            a: rc / (rc + dt),
            prev_in: None,
            prev_out: [0.0; 3],
        }
    }

    pub fn coefficient(&self) -> f64 {
        self.a
    }

    pub fn filter(&mut self, x: [f64; 3]) -> [f64; 3] {
        let out = match self.prev_in {
            // The filter starts settled on the first sample.
            None => [0.0; 3],
            Some(p) => std::array::from_fn(|i| self.a * (self.prev_out[i] + x[i] - p[i])),
        };
        self.prev_in = Some(x);
        self.prev_out = out;
        out
    }
}

/// `|x| + |y| + |z|` in mg, rounded and saturated to `u16`.
pub fn accel_magnitude(v: [f64; 3]) -> u16 {
    let s: f64 = v.iter().map(|c| c.abs()).sum();
    s.round_ties_even().min(u16::MAX as f64) as u16
}

/// Motion interrupt logic of the accelerometer: an event fires once some
/// axis has exceeded the threshold for at least `min_duration_ms`, and
/// events closer than `dead_time_ms` to the previous one are suppressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MotionDetector {
    threshold_mg: u16,
    min_duration_ms: u64,
    dead_time_ms: u64,
    above_since: Option<u64>,
    fired_this_episode: bool,
    last_event: Option<u64>,
}

impl MotionDetector {
    pub fn new(threshold_mg: u16, min_duration_ms: u16, dead_time_ms: u16) -> Self {
        MotionDetector {
            threshold_mg,
            min_duration_ms: min_duration_ms as u64,
            dead_time_ms: dead_time_ms as u64,
            above_since: None,
            fired_this_episode: false,
            last_event: None,
        }
    }

    /// Feeds one high-passed sample taken at `t_ms`; returns whether an
    /// interrupt fires.
    pub fn sample(&mut self, t_ms: u64, v: [f64; 3]) -> bool {
        let above = v.iter().any(|c| c.abs() > self.threshold_mg as f64);
        if !above {
            self.above_since = None;
            self.fired_this_episode = false;
            return false;
        }
        let since = *self.above_since.get_or_insert(t_ms);
        if self.fired_this_episode || t_ms - since < self.min_duration_ms {
            return false;
        }
        if let Some(last) = self.last_event {
            if t_ms - last < self.dead_time_ms {
                return false;
            }
        }
        self.fired_this_episode = true;
        self.last_event = Some(t_ms);
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dev(id: u16, rssi: i8, count: u8) -> ScanResultData {
        ScanResultData { id, rssi, count }
    }

    #[test]
    fn mic_average_examples() {
        assert_eq!(mic_average(&[128; 35]), Ok(0));
        assert_eq!(mic_average(&[128, 130, 126]), Ok(1));
        assert_eq!(mic_average(&[255; 10]), Ok(127));
        assert_eq!(mic_average(&[0]), Ok(128));
        assert_eq!(mic_average(&[]), Err(EmptyWindow));
    }

    #[test]
    fn mic_rounding_is_half_even() {
        // mean 0.5 -> 0, mean 1.5 -> 2, mean 2.5 -> 2
        assert_eq!(mic_average(&[128, 129]), Ok(0));
        assert_eq!(mic_average(&[129, 130]), Ok(2));
        assert_eq!(mic_average(&[130, 131]), Ok(2));
    }

    #[test]
    fn accumulator_resets_after_take() {
        let mut acc = MicAccumulator::default();
        acc.push(138);
        assert_eq!(acc.take(), Ok(10));
        assert_eq!(acc.count(), 0);
        assert_eq!(acc.take(), Err(EmptyWindow));
    }

    #[test]
    fn scan_example() {
        let out = scan_aggregate_and_sort(&[(16001, -80), (5, -40), (16002, -60), (7, -90)], Aggregation::Mean);
        assert_eq!(
            out,
            vec![dev(16002, -60, 1), dev(16001, -80, 1), dev(5, -40, 1), dev(7, -90, 1)]
        );
        assert!(scan_aggregate_and_sort(&[], Aggregation::Max).is_empty());
    }

    #[test]
    fn mean_rounds_toward_negative_infinity() {
        let out = scan_aggregate_and_sort(&[(3, -60), (3, -61)], Aggregation::Mean);
        assert_eq!(out, vec![dev(3, -61, 2)]);
        let out = scan_aggregate_and_sort(&[(3, -60), (3, -61), (3, -40)], Aggregation::Max);
        assert_eq!(out, vec![dev(3, -40, 3)]);
    }

    #[test]
    fn device_table_is_bounded() {
        let obs: Vec<(u16, i8)> = (0..300u16).map(|i| (i, -50)).collect();
        let mut acc = ScanAccumulator::new(Aggregation::Max);
        for &(id, r) in &obs {
            acc.observe(id, r);
        }
        assert_eq!(acc.len(), 255);
        assert_eq!(acc.dropped(), 45);
        assert_eq!(scan_aggregate_and_sort(&obs, Aggregation::Max).len(), 29);
    }

    #[test]
    fn packet_count_saturates() {
        let obs = vec![(9u16, -70i8); 300];
        assert_eq!(scan_aggregate_and_sort(&obs, Aggregation::Mean), vec![dev(9, -70, 255)]);
    }

    #[test]
    fn battery_examples() {
        assert_eq!(battery_ewma(None, 3.0, 0.5), 3.0);
        assert_eq!(battery_ewma(Some(3.0), 2.0, 0.5), 2.5);
        assert!((battery_from_adc(1023) - 3.596).abs() < 5e-4);
        assert_eq!(battery_encode(3.00), 200);
        assert_eq!(battery_encode(1.00), 0);
        assert_eq!(battery_encode(3.55), 255);
        assert_eq!(battery_encode(0.2), 0);
        assert_eq!(battery_encode(4.2), 255);
        assert_eq!(battery_decode(200), 3.0);
    }

    #[test]
    fn monitor_tracks_readings() {
        let mut m = BatteryMonitor::new(0.25);
        assert_eq!(m.byte(), 0);
        let first = m.update(853);
        assert_eq!(first, battery_from_adc(853));
        let second = m.update(800);
        assert!((second - (0.25 * battery_from_adc(800) + 0.75 * first)).abs() < 1e-12);
        assert_eq!(m.byte(), battery_encode(second));
    }

    #[test]
    fn high_pass_removes_constant_offset() {
        let mut hp = HighPass::new(ACCEL_HIGH_PASS_HZ, 50.0);
        let mut last = [0.0; 3];
        for _ in 0..2000 {
            last = hp.filter([0.0, 0.0, 1000.0]);
        }
        assert_eq!(last, [0.0; 3]);
        // A step is passed through and then decays.
        let step = hp.filter([300.0, 0.0, 1000.0]);
        assert!((step[0] - 300.0 * hp.coefficient()).abs() < 1e-9);
        let mut v = step;
        for _ in 0..500 {
            v = hp.filter([300.0, 0.0, 1000.0]);
        }
        assert!(v[0].abs() < 1.0);
    }

    #[test]
    fn magnitude_sums_absolute_axes() {
        assert_eq!(accel_magnitude([-10.0, 20.4, -0.5]), 31);
        assert_eq!(accel_magnitude([1e9, 0.0, 0.0]), u16::MAX);
    }

    #[test]
    fn motion_detector_honours_duration_and_dead_time() {
        let mut m = MotionDetector::new(100, 20, 1000);
        let hi = [150.0, 0.0, 0.0];
        let lo = [0.0; 3];
        assert!(!m.sample(0, hi));
        assert!(!m.sample(10, hi));
        assert!(m.sample(20, hi));
        assert!(!m.sample(30, hi), "one event per episode");
        assert!(!m.sample(40, lo));
        assert!(!m.sample(500, hi));
        assert!(!m.sample(520, hi), "inside dead time");
        assert!(!m.sample(600, lo));
        assert!(!m.sample(1100, hi));
        assert!(m.sample(1120, hi));
    }
}
