//! Connection-interval transport between the hub and one badge.
//!
//! Packets of at most 20 bytes move only during connection events, which
//! happen on a fixed grid while there is traffic. Each event carries at
//! most `packets_per_event` packets in total, hub packets first.

use std::collections::VecDeque;

use badge_core::badge::sender::MTU;

use crate::event::NS_PER_MS;
use crate::scenario::TransportConfig;

/// What one connection event moved.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Exchange {
    /// Hub to badge packets.
    pub down: Vec<Vec<u8>>,
    /// Badge to hub packets.
    pub up: Vec<Vec<u8>>,
    /// Badge packets of the previous event acknowledged now.
    pub acked: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkStats {
    pub events: u64,
    pub packets_down: u64,
    pub packets_up: u64,
    pub bytes_down: u64,
    pub bytes_up: u64,
    pub max_packets_per_event: usize,
}

#[derive(Debug, Clone)]
pub struct Link {
    interval_ns: u64,
    per_event: usize,
    buffer: usize,
    connected: bool,
    anchor: u64,
    last_event: Option<u64>,
    down: VecDeque<Vec<u8>>,
    radio: VecDeque<Vec<u8>>,
    in_flight: usize,
    stats: LinkStats,
}

impl Link {
    pub fn new(cfg: &TransportConfig) -> Link {
        Link {
            interval_ns: (cfg.interval_ms * NS_PER_MS as f64).round().max(1.0) as u64,
            per_event: cfg.packets_per_event,
            buffer: cfg.buffer_packets,
            connected: false,
            anchor: 0,
            last_event: None,
            down: VecDeque::new(),
            radio: VecDeque::new(),
            in_flight: 0,
            stats: LinkStats::default(),
        }
    }

    pub fn interval_ns(&self) -> u64 {
        self.interval_ns
    }

    /// Highest sustained badge to hub rate, in bytes per second.
    pub fn ceiling_bytes_per_s(&self) -> f64 {
        (self.per_event * MTU) as f64 * 1e9 / self.interval_ns as f64
    }

    /// Time of the first connection event.
    pub fn anchor(&self) -> u64 {
        self.anchor
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    /// Establishes the connection with its first event at `anchor`.
    pub fn connect(&mut self, anchor: u64) {
        self.connected = true;
        self.anchor = anchor;
        self.last_event = None;
    }

    pub fn disconnect(&mut self) {
        self.connected = false;
        self.down.clear();
        self.radio.clear();
        self.in_flight = 0;
    }

    pub fn stats(&self) -> &LinkStats {
        &self.stats
    }

    pub fn send_down(&mut self, packet: Vec<u8>) {
        assert!(packet.len() <= MTU && !packet.is_empty());
        self.down.push_back(packet);
    }

    pub fn down_len(&self) -> usize {
        self.down.len()
    }

    /// Whether the radio stack can take another badge packet.
    pub fn has_room(&self) -> bool {
        self.connected && self.radio.len() < self.buffer
    }

    pub fn send_up(&mut self, packet: Vec<u8>) {
        assert!(self.has_room());
        assert!(packet.len() <= MTU && !packet.is_empty());
        self.radio.push_back(packet);
    }

    pub fn radio_len(&self) -> usize {
        self.radio.len()
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight
    }

    /// Whether another connection event is needed.
    pub fn has_traffic(&self) -> bool {
        self.connected && (!self.down.is_empty() || !self.radio.is_empty() || self.in_flight > 0)
    }

    /// First grid point at or after `now` not yet used by an event.
    pub fn next_event_at(&self, now: u64) -> u64 {
        let from = match self.last_event {
            Some(last) => now.max(last + 1),
            None => now,
        };
        if from <= self.anchor {
            return self.anchor;
        }
        let k = (from - self.anchor).div_ceil(self.interval_ns);
        self.anchor + k * self.interval_ns
    }

    /// Runs the connection event at `now`, which must be a grid point.
    pub fn exchange(&mut self, now: u64) -> Exchange {
        debug_assert!(now >= self.anchor && (now - self.anchor).is_multiple_of(self.interval_ns));
        self.last_event = Some(now);
        let mut ex = Exchange {
            acked: self.in_flight,
            ..Exchange::default()
        };
        let n_down = self.down.len().min(self.per_event);
        ex.down.extend(self.down.drain(..n_down));
        let n_up = self.radio.len().min(self.per_event - n_down);
        ex.up.extend(self.radio.drain(..n_up));
        self.in_flight = n_up;

        self.stats.events += 1;
        self.stats.packets_down += n_down as u64;
        self.stats.packets_up += n_up as u64;
        self.stats.bytes_down += ex.down.iter().map(Vec::len).sum::<usize>() as u64;
        self.stats.bytes_up += ex.up.iter().map(Vec::len).sum::<usize>() as u64;
        self.stats.max_packets_per_event = self.stats.max_packets_per_event.max(n_down + n_up);
        ex
    }
}

/// Cuts a frame into transport packets.
pub fn packets(frame: &[u8]) -> impl Iterator<Item = Vec<u8>> + '_ {
    frame.chunks(MTU).map(<[u8]>::to_vec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link() -> Link {
        Link::new(&TransportConfig::default())
    }

    #[test]
    fn ceiling_is_2400_at_50_ms() {
        assert_eq!(link().ceiling_bytes_per_s(), 2400.0);
    }

    #[test]
    fn events_stay_on_the_grid() {
        let mut l = link();
        l.connect(7);
        assert_eq!(l.next_event_at(0), 7);
        assert_eq!(l.next_event_at(8), 50_000_007);
        l.exchange(50_000_007);
        assert_eq!(l.next_event_at(50_000_007), 100_000_007);
    }

    #[test]
    fn hub_packets_go_first_and_share_the_budget() {
        let mut l = link();
        l.connect(0);
        for _ in 0..4 {
            l.send_down(vec![1; 20]);
        }
        for _ in 0..6 {
            l.send_up(vec![2; 20]);
        }
        assert!(!l.has_room());
        let ex = l.exchange(0);
        assert_eq!((ex.down.len(), ex.up.len(), ex.acked), (4, 2, 0));
        let ex = l.exchange(50_000_000);
        assert_eq!((ex.down.len(), ex.up.len(), ex.acked), (0, 4, 2));
        assert_eq!(l.stats().max_packets_per_event, 6);
        assert!(l.has_traffic());
        let ex = l.exchange(100_000_000);
        assert_eq!(ex.acked, 4);
        assert!(!l.has_traffic());
    }

    #[test]
    fn frames_split_into_mtu_packets() {
        let sizes: Vec<usize> = packets(&[0; 126]).map(|p| p.len()).collect();
        assert_eq!(sizes, [20, 20, 20, 20, 20, 20, 6]);
    }
}
