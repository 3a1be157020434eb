//! Badge clock derived from a 32768 Hz tick counter, corrected at every
//! synchronization message.
//!
//! The current time is a linear extrapolation from the last sync point:
//! `t = t_sync + m̄ · (ticks − ticks_sync)`. In EWMA mode the slope `m̄` is
//! an exponentially weighted average of the observed slopes between sync
//! points, each clamped to the range a healthy oscillator can produce.
//!
//! Slopes are kept in fixed point as milliseconds per tick scaled by 2^40,
//! so the nominal slope `1000/32768` is exactly `1000 · 2^25`.

use thiserror::Error;

pub const NOMINAL_HZ: u32 = 32_768;
pub const SLOPE_FRAC_BITS: u32 = 40;
pub const NOMINAL_SLOPE: u64 = 1000 << (SLOPE_FRAC_BITS - 15);

const ONE: f64 = (1u64 << SLOPE_FRAC_BITS) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyncMode {
    /// Legacy behaviour: re-anchor at every sync, slope fixed at nominal.
    Constant,
    Ewma,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncConfig {
    pub mode: SyncMode,
    pub alpha: f64,
    /// Largest tolerated oscillator deviation from nominal, in Hz.
    pub f_dev: f64,
}

impl Default for SyncConfig {
    fn default() -> Self {
        SyncConfig {
            mode: SyncMode::Ewma,
            alpha: 0.1,
            f_dev: 4.0,
        }
    }
}

impl SyncConfig {
    pub fn constant() -> Self {
        SyncConfig {
            mode: SyncMode::Constant,
            ..SyncConfig::default()
        }
    }

    /// Parameters that minimized the error in the reference measurements.
    pub fn optimal() -> Self {
        SyncConfig {
            mode: SyncMode::Ewma,
            alpha: 0.11,
            f_dev: 3.833,
        }
    }

    pub fn ewma(alpha: f64, f_dev: f64) -> Self {
        SyncConfig {
            mode: SyncMode::Ewma,
            alpha,
            f_dev,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyncSample {
    pub received_ms: i64,
    pub ticks: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SyncError {
    #[error("sync sample does not advance the tick counter")]
    NonIncreasingTicks,
    #[error("mean of an empty error list")]
    EmptyErrors,
}

/// What one accepted sync did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncOutcome {
    /// Prediction error before the update; `None` for the first sync.
    pub error_ms: Option<f64>,
    /// Clamped instantaneous slope fed into the average (EWMA mode, not on
    /// the first sync).
    pub instant_slope: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncState {
    config: SyncConfig,
    alpha_q32: u64,
    slope: u64,
    min_slope: u64,
    max_slope: u64,
    anchor: Option<SyncSample>,
    syncs: u64,
}

impl SyncState {
    pub fn new(config: SyncConfig) -> Self {
        assert!((0.0..=1.0).contains(&config.alpha), "alpha must lie in [0, 1]");
        assert!(config.f_dev >= 0.0 && config.f_dev < NOMINAL_HZ as f64);
        let hz = NOMINAL_HZ as f64;
        SyncState {
            config,
            alpha_q32: (config.alpha * 4_294_967_296.0).round() as u64,
            slope: NOMINAL_SLOPE,
            min_slope: (1000.0 * ONE / (hz + config.f_dev)).round() as u64,
            max_slope: (1000.0 * ONE / (hz - config.f_dev)).round() as u64,
            anchor: None,
            syncs: 0,
        }
    }

    pub fn config(&self) -> SyncConfig {
        self.config
    }

    pub fn is_synced(&self) -> bool {
        self.anchor.is_some()
    }

    pub fn sync_count(&self) -> u64 {
        self.syncs
    }

    /// Current averaged slope in ms/tick · 2^40.
    pub fn slope(&self) -> u64 {
        self.slope
    }

    pub fn slope_ms_per_tick(&self) -> f64 {
        self.slope as f64 / ONE
    }

    /// Inclusive clamp interval for instantaneous slopes.
    pub fn slope_bounds(&self) -> (u64, u64) {
        (self.min_slope, self.max_slope)
    }

    pub fn anchor(&self) -> Option<SyncSample> {
        self.anchor
    }

    /// Time at `ticks` in ms · 2^40.
    fn now_q(&self, ticks: u64) -> Option<i128> {
        let a = self.anchor?;
        let dt = ticks as i128 - a.ticks as i128;
        Some(((a.received_ms as i128) << SLOPE_FRAC_BITS) + self.slope as i128 * dt)
    }

    /// Extrapolated time in ms, or `None` before the first sync.
    pub fn now_ms_f64(&self, ticks: u64) -> Option<f64> {
        self.now_q(ticks).map(|q| q as f64 / ONE)
    }

    /// Extrapolated time rounded to the nearest millisecond (ties to even).
    pub fn now_ms(&self, ticks: u64) -> Option<i64> {
        let q = self.now_q(ticks)?;
        let whole = q >> SLOPE_FRAC_BITS;
        let frac = q - (whole << SLOPE_FRAC_BITS);
        let half = 1i128 << (SLOPE_FRAC_BITS - 1);
        let up = frac > half || (frac == half && whole & 1 == 1);
        Some((whole + up as i128) as i64)
    }

    /// `|received − now(ticks)|` under the current state.
    pub fn abs_error(&self, sample: SyncSample) -> Option<f64> {
        let q = self.now_q(sample.ticks)?;
        let diff = ((sample.received_ms as i128) << SLOPE_FRAC_BITS) - q;
        Some(diff.unsigned_abs() as f64 / ONE)
    }

    pub fn on_sync(&mut self, sample: SyncSample) -> Result<SyncOutcome, SyncError> {
        let Some(anchor) = self.anchor else {
            self.slope = NOMINAL_SLOPE;
            self.anchor = Some(sample);
            self.syncs = 1;
            return Ok(SyncOutcome {
                error_ms: None,
                instant_slope: None,
            });
        };
        if sample.ticks <= anchor.ticks {
            return Err(SyncError::NonIncreasingTicks);
        }
        let error_ms = self.abs_error(sample);
        let mut instant = None;
        if self.config.mode == SyncMode::Ewma {
            let dticks = (sample.ticks - anchor.ticks) as i128;
            let dt = (sample.received_ms - anchor.received_ms) as i128;
            let raw = (dt << SLOPE_FRAC_BITS).div_euclid(dticks);
            let m = raw.clamp(self.min_slope as i128, self.max_slope as i128) as u64;
            let a = self.alpha_q32 as u128;
            self.slope = ((a * m as u128 + ((1u128 << 32) - a) * self.slope as u128) >> 32) as u64;
            instant = Some(m);
        }
        self.anchor = Some(sample);
        self.syncs += 1;
        Ok(SyncOutcome {
            error_ms,
            instant_slope: instant,
        })
    }
}

/// Mean absolute error.
pub fn mae(errors: &[f64]) -> Result<f64, SyncError> {
    if errors.is_empty() {
        return Err(SyncError::EmptyErrors);
    }
    Ok(errors.iter().map(|e| e.abs()).sum::<f64>() / errors.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(received_ms: i64, ticks: u64) -> SyncSample {
        SyncSample { received_ms, ticks }
    }

    #[test]
    fn first_sync_anchors_at_nominal() {
        let mut st = SyncState::new(SyncConfig::default());
        assert_eq!(st.now_ms(0), None);
        st.on_sync(s(1000, 500)).unwrap();
        assert_eq!(st.slope(), NOMINAL_SLOPE);
        assert_eq!(st.slope_ms_per_tick(), 1000.0 / 32768.0);
        assert_eq!(st.now_ms(500), Some(1000));
    }

    #[test]
    fn clamped_second_sync() {
        let mut st = SyncState::new(SyncConfig::ewma(1.0, 4.0));
        st.on_sync(s(1000, 500)).unwrap();
        let out = st.on_sync(s(3000, 500 + 32768)).unwrap();
        let (_, max) = st.slope_bounds();
        assert_eq!(out.instant_slope, Some(max));
        assert_eq!(max, (1000.0 * ONE / 32764.0).round() as u64);
        assert_eq!(st.now_ms(500 + 32768 + 32764), Some(4000));
    }

    #[test]
    fn constant_mode_nominal_second() {
        let mut st = SyncState::new(SyncConfig::constant());
        st.on_sync(s(5000, 100)).unwrap();
        assert_eq!(st.now_ms(100 + 32768), Some(6000));
        st.on_sync(s(9000, 100 + 65536)).unwrap();
        assert_eq!(st.slope(), NOMINAL_SLOPE);
    }

    #[test]
    fn alpha_zero_never_moves() {
        let mut st = SyncState::new(SyncConfig::ewma(0.0, 4.0));
        st.on_sync(s(0, 0)).unwrap();
        st.on_sync(s(1003, 32768)).unwrap();
        assert_eq!(st.slope(), NOMINAL_SLOPE);
    }

    #[test]
    fn rejects_stale_ticks() {
        let mut st = SyncState::new(SyncConfig::default());
        st.on_sync(s(0, 10)).unwrap();
        let before = st.clone();
        assert_eq!(st.on_sync(s(50, 10)), Err(SyncError::NonIncreasingTicks));
        assert_eq!(st, before);
    }

    #[test]
    fn error_at_exact_prediction_is_zero() {
        let mut st = SyncState::new(SyncConfig::default());
        st.on_sync(s(0, 0)).unwrap();
        let out = st.on_sync(s(2000, 65536)).unwrap();
        assert_eq!(out.error_ms, Some(0.0));
    }

    #[test]
    fn mean_absolute_error() {
        assert_eq!(mae(&[3.0, 5.0]), Ok(4.0));
        assert_eq!(mae(&[]), Err(SyncError::EmptyErrors));
    }

    #[test]
    fn rounding_ties_to_even() {
        let mut st = SyncState::new(SyncConfig::constant());
        st.on_sync(s(0, 0)).unwrap();
        // 2048 ticks is exactly 62.5 ms, 6144 ticks 187.5 ms
        assert_eq!(st.now_ms(2048), Some(62));
        assert_eq!(st.now_ms(6144), Some(188));
        assert_eq!(st.now_ms(17), Some(1));
    }
}
