//! Medium-access building blocks: the priority interface queue, contention
//! window handling, frame timing, and overlap-based reception resolution.
//!
//! The event-driven protocol (sensing, deferral, ACK timers) is executed by
//! the simulation engine; everything here is state and pure rules.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::InputError;
use crate::phy::{PhyConfig, RxOutcome};
use crate::road_network::Point2D;

/// Length of an acknowledgement frame, bytes.
pub const ACK_BYTES: u32 = 14;

#[derive(Debug, Clone, PartialEq)]
pub struct MacConfig {
    pub slot_s: f64,
    pub sifs_s: f64,
    pub difs_s: f64,
    pub cw_min: u32,
    pub cw_max: u32,
    pub retry_limit: u32,
    pub data_rate_bps: f64,
    pub basic_rate_bps: f64,
    pub ifq_len: usize,
}

impl Default for MacConfig {
    fn default() -> Self {
        MacConfig {
            slot_s: 20e-6,
            sifs_s: 10e-6,
            difs_s: 50e-6,
            cw_min: 31,
            cw_max: 1023,
            retry_limit: 7,
            data_rate_bps: 2e6,
            basic_rate_bps: 1e6,
            ifq_len: 50,
        }
    }
}

impl MacConfig {
    pub fn validate(&self) -> Result<(), InputError> {
        if self.cw_min >= self.cw_max {
            return Err(InputError::ConfigKey {
                key: "mac.cw_min".into(),
                msg: format!("cw_min {} must be below cw_max {}", self.cw_min, self.cw_max),
            });
        }
        for (key, v) in [
            ("mac.slot_us", self.slot_s),
            ("mac.sifs_us", self.sifs_s),
            ("mac.difs_us", self.difs_s),
            ("mac.data_rate_bps", self.data_rate_bps),
            ("mac.basic_rate_bps", self.basic_rate_bps),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(InputError::ConfigKey {
                    key: key.into(),
                    msg: format!("must be positive and finite, got {v}"),
                });
            }
        }
        if self.ifq_len == 0 {
            return Err(InputError::ConfigKey {
                key: "mac.ifq_len".into(),
                msg: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// Airtime of `bytes` at the data or basic rate.
    pub fn tx_duration_s(&self, bytes: u32, basic_rate: bool) -> f64 {
        let rate = if basic_rate { self.basic_rate_bps } else { self.data_rate_bps };
        f64::from(bytes) * 8.0 / rate
    }

    pub fn ack_duration_s(&self) -> f64 {
        self.tx_duration_s(ACK_BYTES, true)
    }

    /// How long a transmitter waits for an ACK before declaring the attempt
    /// failed: the ACK turnaround plus one slot of grace.
    pub fn ack_timeout_s(&self) -> f64 {
        self.sifs_s + self.ack_duration_s() + self.slot_s
    }

    /// Contention window after a failed attempt.
    pub fn next_cw(&self, cw: u32) -> u32 {
        (2 * cw + 1).min(self.cw_max)
    }
}

/// Uniform backoff draw over [0, cw] slots.
pub fn backoff_draw(cw: u32, rng: &mut ChaCha12Rng) -> u32 {
    rng.gen_range(0..=cw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    /// Routing control traffic, served first.
    Control,
    /// Application data.
    Data,
}

/// Drop-tail interface queue with a high band for routing control and a low
/// band for data, sharing one capacity.
#[derive(Debug, Clone)]
pub struct IfQueue<T> {
    capacity: usize,
    high: VecDeque<T>,
    low: VecDeque<T>,
}

impl<T> IfQueue<T> {
    pub fn new(capacity: usize) -> Self {
        IfQueue {
            capacity,
            high: VecDeque::new(),
            low: VecDeque::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.high.len() + self.low.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Enqueue at the tail of the band; a full queue rejects the newcomer
    /// and hands it back.
    pub fn enqueue(&mut self, item: T, band: Band) -> Result<(), T> {
        if self.len() >= self.capacity {
            return Err(item);
        }
        match band {
            Band::Control => self.high.push_back(item),
            Band::Data => self.low.push_back(item),
        }
        Ok(())
    }

    /// Next frame to transmit: control band strictly first.
    pub fn dequeue(&mut self) -> Option<(T, Band)> {
        if let Some(item) = self.high.pop_front() {
            return Some((item, Band::Control));
        }
        self.low.pop_front().map(|item| (item, Band::Data))
    }

    /// Remove every queued frame matching the predicate, preserving order
    /// of the survivors. Used to purge frames toward a broken next hop.
    pub fn drain_matching(&mut self, mut pred: impl FnMut(&T) -> bool) -> Vec<T> {
        let mut removed = Vec::new();
        for band in [&mut self.high, &mut self.low] {
            let mut kept = VecDeque::with_capacity(band.len());
            while let Some(item) = band.pop_front() {
                if pred(&item) {
                    removed.push(item);
                } else {
                    kept.push_back(item);
                }
            }
            *band = kept;
        }
        removed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Delivered,
    Collided,
    BelowThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmission {
    pub frame_id: u64,
    pub tx_pos: Point2D,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameOutcome {
    pub frame_id: u64,
    pub verdict: Verdict,
    pub power_w: f64,
}

/// Decide the fate of every frame in a set of time-overlapping
/// transmissions as heard at `rx_pos`.
pub fn resolve_receptions(
    overlapping: &[Transmission],
    rx_pos: Point2D,
    phy: &PhyConfig,
) -> Vec<FrameOutcome> {
    let powers: Vec<f64> = overlapping
        .iter()
        .map(|t| phy.received_power_w(t.tx_pos.distance(&rx_pos)))
        .collect();
    overlapping
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let interferers = powers
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &p)| p);
            let verdict = match phy.reception_outcome(powers[i], interferers) {
                RxOutcome::Delivered => Verdict::Delivered,
                RxOutcome::Collision => Verdict::Collided,
                RxOutcome::TooWeak => Verdict::BelowThreshold,
            };
            FrameOutcome {
                frame_id: t.frame_id,
                verdict,
                power_w: powers[i],
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_relative_eq;

    #[test]
    fn queue_accepts_until_capacity() {
        let mut q: IfQueue<u32> = IfQueue::new(50);
        assert!(q.enqueue(0, Band::Data).is_ok());
        for i in 1..50 {
            assert!(q.enqueue(i, Band::Data).is_ok());
        }
        assert_eq!(q.len(), 50);
        assert_eq!(q.enqueue(99, Band::Data), Err(99));
        assert_eq!(q.enqueue(99, Band::Control), Err(99));
        assert_eq!(q.len(), 50);
    }

    #[test]
    fn control_band_served_first() {
        let mut q: IfQueue<&str> = IfQueue::new(50);
        for _ in 0..49 {
            q.enqueue("data", Band::Data).unwrap();
        }
        q.enqueue("routing", Band::Control).unwrap();
        assert_eq!(q.enqueue("late-data", Band::Data), Err("late-data"));
        assert_eq!(q.dequeue(), Some(("routing", Band::Control)));
        assert_eq!(q.dequeue(), Some(("data", Band::Data)));
    }

    #[test]
    fn drain_purges_matching_frames_in_order() {
        let mut q: IfQueue<u32> = IfQueue::new(10);
        for i in 0..6 {
            q.enqueue(i, Band::Data).unwrap();
        }
        let removed = q.drain_matching(|&x| x % 2 == 0);
        assert_eq!(removed, vec![0, 2, 4]);
        assert_eq!(q.dequeue(), Some((1, Band::Data)));
        assert_eq!(q.dequeue(), Some((3, Band::Data)));
        assert_eq!(q.dequeue(), Some((5, Band::Data)));
        assert_eq!(q.dequeue(), None);
    }

    #[test]
    fn backoff_bounds_and_mean() {
        let mut rng = substream(2, "mac");
        assert_eq!(backoff_draw(0, &mut rng), 0);
        let n = 100_000;
        let mut sum = 0u64;
        for _ in 0..n {
            let d = backoff_draw(31, &mut rng);
            assert!(d <= 31);
            sum += u64::from(d);
        }
        let mean = sum as f64 / n as f64;
        assert!((mean - 15.5).abs() / 15.5 < 0.02, "mean {mean}");
    }

    #[test]
    fn contention_window_doubles_and_caps() {
        let cfg = MacConfig::default();
        let mut cw = cfg.cw_min;
        cw = cfg.next_cw(cw);
        assert_eq!(cw, 63);
        cw = cfg.next_cw(cw);
        assert_eq!(cw, 127);
        for _ in 0..10 {
            cw = cfg.next_cw(cw);
        }
        assert_eq!(cw, cfg.cw_max);
    }

    #[test]
    fn frame_timings() {
        let cfg = MacConfig::default();
        assert_relative_eq!(cfg.tx_duration_s(1028, false), 4.112e-3, max_relative = 1e-12);
        assert_relative_eq!(cfg.tx_duration_s(44, true), 3.52e-4, max_relative = 1e-12);
        assert_relative_eq!(cfg.ack_duration_s(), 1.12e-4, max_relative = 1e-12);
        assert_relative_eq!(cfg.ack_timeout_s(), 10e-6 + 1.12e-4 + 20e-6, max_relative = 1e-12);
    }

    #[test]
    fn reception_examples() {
        let phy = PhyConfig::default();
        // lone frame from 100 m away: far above threshold
        let out = resolve_receptions(
            &[Transmission { frame_id: 1, tx_pos: Point2D::new(0.0, 0.0) }],
            Point2D::new(100.0, 0.0),
            &phy,
        );
        assert_eq!(out[0].verdict, Verdict::Delivered);

        // two transmitters equidistant from the receiver: equal power, both die
        let out = resolve_receptions(
            &[
                Transmission { frame_id: 1, tx_pos: Point2D::new(0.0, 0.0) },
                Transmission { frame_id: 2, tx_pos: Point2D::new(200.0, 0.0) },
            ],
            Point2D::new(100.0, 0.0),
            &phy,
        );
        assert!(out.iter().all(|o| o.verdict == Verdict::Collided), "{out:?}");

        // near transmitter captures over a far one: free-space power ratio
        // (168/40)^2 = 17.6 > 10, both distances below crossover
        let out = resolve_receptions(
            &[
                Transmission { frame_id: 1, tx_pos: Point2D::new(60.0, 0.0) },
                Transmission { frame_id: 2, tx_pos: Point2D::new(268.0, 0.0) },
            ],
            Point2D::new(100.0, 0.0),
            &phy,
        );
        assert_eq!(out[0].verdict, Verdict::Delivered);
        assert_eq!(out[1].verdict, Verdict::Collided);

        // out of range entirely
        let out = resolve_receptions(
            &[Transmission { frame_id: 1, tx_pos: Point2D::new(0.0, 0.0) }],
            Point2D::new(400.0, 0.0),
            &phy,
        );
        assert_eq!(out[0].verdict, Verdict::BelowThreshold);
    }

    #[test]
    fn config_validation() {
        assert!(MacConfig::default().validate().is_ok());
        let mut cfg = MacConfig::default();
        cfg.cw_min = cfg.cw_max;
        assert!(cfg.validate().is_err());
        let mut cfg = MacConfig::default();
        cfg.ifq_len = 0;
        assert!(cfg.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn occupancy_never_exceeds_capacity(ops in proptest::collection::vec((0u8..3, 0u32..100), 0..300)) {
                let mut q: IfQueue<u32> = IfQueue::new(50);
                for (op, val) in ops {
                    match op {
                        0 => { let _ = q.enqueue(val, Band::Data); }
                        1 => { let _ = q.enqueue(val, Band::Control); }
                        _ => { let _ = q.dequeue(); }
                    }
                    prop_assert!(q.len() <= 50);
                }
            }

            #[test]
            fn draws_stay_in_window(cw in 0u32..2048, seed in 0u64..100) {
                let mut rng = substream(seed, "mac");
                let d = backoff_draw(cw, &mut rng);
                prop_assert!(d <= cw);
            }

            #[test]
            fn capture_is_asymmetric(d1 in 10.0..240.0f64, d2 in 10.0..240.0f64) {
                // if one frame captures, the other must not
                let phy = PhyConfig::default();
                let out = resolve_receptions(
                    &[
                        Transmission { frame_id: 1, tx_pos: Point2D::new(d1, 0.0) },
                        Transmission { frame_id: 2, tx_pos: Point2D::new(0.0, d2) },
                    ],
                    Point2D::new(0.0, 0.0),
                    &phy,
                );
                let delivered = out.iter().filter(|o| o.verdict == Verdict::Delivered).count();
                prop_assert!(delivered <= 1);
            }
        }
    }
}
