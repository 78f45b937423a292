//! Radio propagation and reception rules.
//!
//! Received power follows free-space attenuation up to the crossover
//! distance and a two-ray ground-reflection model beyond it. Reception is
//! deterministic: a frame is decodable when its power clears the receive
//! threshold and exceeds the summed interference by the capture ratio.

use crate::error::InputError;

pub const SPEED_OF_LIGHT_M_S: f64 = 3.0e8;

/// Radios closer than this are treated as this far apart, so co-located
/// antennas never produce unbounded power.
pub const MIN_PROP_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PhyConfig {
    /// Transmit power, watts.
    pub pt_w: f64,
    /// Carrier frequency, hertz.
    pub freq_hz: f64,
    /// Transmitter antenna gain, linear.
    pub gt: f64,
    /// Receiver antenna gain, linear.
    pub gr: f64,
    /// Transmitter antenna height, meters.
    pub ht_m: f64,
    /// Receiver antenna height, meters.
    pub hr_m: f64,
    /// System loss factor, linear, >= 1.
    pub sys_loss: f64,
    /// Minimum power for successful decode, watts.
    pub rx_thresh_w: f64,
    /// Minimum power at which the channel is sensed busy, watts.
    pub cs_thresh_w: f64,
    /// Signal must exceed summed interference by this factor to survive.
    pub capture_ratio: f64,
}

impl Default for PhyConfig {
    fn default() -> Self {
        let rx_thresh_w = 3.65262e-10;
        PhyConfig {
            pt_w: 0.2818,
            freq_hz: 2.412e9,
            gt: 1.0,
            gr: 1.0,
            ht_m: 1.5,
            hr_m: 1.5,
            sys_loss: 1.0,
            rx_thresh_w,
            cs_thresh_w: 0.9 * rx_thresh_w,
            capture_ratio: 10.0,
        }
    }
}

/// Outcome of attempting to decode one frame at a receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RxOutcome {
    Delivered,
    /// Signal never cleared the receive threshold.
    TooWeak,
    /// Signal was strong enough alone but lost to overlapping traffic.
    Collision,
}

impl PhyConfig {
    pub fn validate(&self) -> Result<(), InputError> {
        let positive = [
            ("phy.pt_w", self.pt_w),
            ("phy.freq_hz", self.freq_hz),
            ("phy.gt", self.gt),
            ("phy.gr", self.gr),
            ("phy.ht_m", self.ht_m),
            ("phy.hr_m", self.hr_m),
            ("phy.rx_thresh_w", self.rx_thresh_w),
            ("phy.cs_thresh_w", self.cs_thresh_w),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(InputError::ConfigKey {
                    key: key.into(),
                    msg: format!("must be positive and finite, got {v}"),
                });
            }
        }
        if self.sys_loss < 1.0 {
            return Err(InputError::ConfigKey {
                key: "phy.sys_loss".into(),
                msg: "must be >= 1".into(),
            });
        }
        if self.cs_thresh_w > self.rx_thresh_w {
            return Err(InputError::ConfigKey {
                key: "phy.cs_thresh_w".into(),
                msg: "carrier-sense threshold above receive threshold".into(),
            });
        }
        if self.capture_ratio < 1.0 {
            return Err(InputError::ConfigKey {
                key: "phy.capture_ratio".into(),
                msg: "must be >= 1".into(),
            });
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT_M_S / self.freq_hz
    }

    /// Distance where the free-space and ground-reflection curves meet.
    pub fn crossover_distance_m(&self) -> f64 {
        4.0 * std::f64::consts::PI * self.ht_m * self.hr_m / self.wavelength_m()
    }

    /// Received power in watts at separation `dist_m`.
    pub fn received_power_w(&self, dist_m: f64) -> f64 {
        let d = dist_m.max(MIN_PROP_DISTANCE_M);
        if d < self.crossover_distance_m() {
            let lam = self.wavelength_m();
            let denom = (4.0 * std::f64::consts::PI) * (4.0 * std::f64::consts::PI);
            self.pt_w * self.gt * self.gr * lam * lam / (denom * d * d * self.sys_loss)
        } else {
            self.pt_w * self.gt * self.gr * self.ht_m * self.ht_m * self.hr_m * self.hr_m
                / (d * d * d * d * self.sys_loss)
        }
    }

    /// Largest distance at which received power still reaches `thresh_w`,
    /// found by bisection over the monotone power curve.
    pub fn range_for_threshold_m(&self, thresh_w: f64) -> f64 {
        if self.received_power_w(MIN_PROP_DISTANCE_M) < thresh_w {
            return 0.0;
        }
        let mut lo = MIN_PROP_DISTANCE_M;
        let mut hi = 2.0 * self.crossover_distance_m().max(MIN_PROP_DISTANCE_M);
        while self.received_power_w(hi) >= thresh_w {
            lo = hi;
            hi *= 2.0;
            if hi > 1.0e9 {
                return hi;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.received_power_w(mid) >= thresh_w {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Maximum decode range.
    pub fn rx_range_m(&self) -> f64 {
        self.range_for_threshold_m(self.rx_thresh_w)
    }

    /// Maximum carrier-sense range.
    pub fn cs_range_m(&self) -> f64 {
        self.range_for_threshold_m(self.cs_thresh_w)
    }

    /// True when the summed power on the channel reads as busy.
    pub fn channel_busy(&self, total_power_w: f64) -> bool {
        total_power_w >= self.cs_thresh_w
    }

    /// Decode decision for a frame received at `signal_w` while frames at
    /// `interferers_w` overlapped it anywhere during its airtime.
    /// Interference weaker than the carrier-sense threshold is ignored.
    pub fn reception_outcome<I>(&self, signal_w: f64, interferers_w: I) -> RxOutcome
    where
        I: IntoIterator<Item = f64>,
    {
        if signal_w < self.rx_thresh_w {
            return RxOutcome::TooWeak;
        }
        let interference: f64 = interferers_w
            .into_iter()
            .filter(|&p| p >= self.cs_thresh_w)
            .sum();
        if signal_w >= self.capture_ratio * interference {
            RxOutcome::Delivered
        } else {
            RxOutcome::Collision
        }
    }
}
