//! A hub talking to the bridge over a real localhost socket.

use std::io::{Read, Write};
use std::net::TcpStream;
use std::thread;
use std::time::Duration;

use badge_core::badge::proto::{Response, ResponseKind};
use badge_core::badge::{frame, BadgeConfig, FrameReader, Source};
use badge_sim::bridge::{Bridge, SessionEnd};
use badge_sim::experiments::prerecorded_mic_image;
use badge_sim::hub;

struct Hub {
    stream: TcpStream,
    reader: FrameReader,
}

impl Hub {
    fn connect(addr: std::net::SocketAddr) -> Hub {
        let stream = TcpStream::connect(addr).unwrap();
        stream.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
        Hub {
            stream,
            reader: FrameReader::new(4096),
        }
    }

    fn send(&mut self, kind: badge_core::badge::proto::RequestKind) {
        self.stream.write_all(&frame(&hub::encode(kind))).unwrap();
    }

    /// Next response, or `None` once the bridge closed the socket.
    fn recv(&mut self) -> Option<Response> {
        let mut buf = [0u8; 256];
        loop {
            if let Some(payload) = self.reader.next_frame().unwrap() {
                return Some(hub::decode_response(&payload).unwrap());
            }
            let n = self.stream.read(&mut buf).unwrap();
            if n == 0 {
                return None;
            }
            self.reader.push(&buf[..n]).unwrap();
        }
    }
}

fn start_bridge(chunks: usize) -> (std::net::SocketAddr, thread::JoinHandle<Vec<SessionEnd>>) {
    let mut bridge = Bridge::bind("127.0.0.1:0", BadgeConfig::default(), prerecorded_mic_image(chunks)).unwrap();
    let addr = bridge.local_addr().unwrap();
    let handle = thread::spawn(move || (0..2).map(|_| bridge.serve_one().unwrap()).collect());
    (addr, handle)
}

#[test]
fn hub_syncs_and_pulls_all_stored_chunks() {
    let (addr, server) = start_bridge(12);

    let mut hub = Hub::connect(addr);
    hub.send(hub::status(1_600_000_000_000, Some((42, 3))));
    let Some(Response {
        kind: ResponseKind::Status(status),
    }) = hub.recv()
    else {
        panic!("expected a status response");
    };
    assert_eq!((status.id, status.group), (42, 3));
    assert_eq!(status.timestamp.seconds, 1_600_000_000);

    hub.send(hub::data_request(Source::Microphone, 0));
    let mut stamps = Vec::new();
    loop {
        match hub.recv().expect("bridge stays connected").kind {
            ResponseKind::MicrophoneChunk(c) => {
                assert_eq!(c.data.len(), 112);
                stamps.push((c.timestamp.seconds, c.timestamp.ms));
            }
            ResponseKind::DataEnd(end) => {
                assert_eq!((end.chunks, end.corrupted), (12, 0));
                break;
            }
            other => panic!("unexpected {other:?}"),
        }
    }
    assert_eq!(stamps.len(), 12);
    assert!(stamps.windows(2).all(|w| w[0] < w[1]), "{stamps:?}");
    drop(hub);

    let mut hub = Hub::connect(addr);
    hub.send(hub::status(1_600_000_100_000, None));
    assert!(matches!(hub.recv().unwrap().kind, ResponseKind::Status(_)));
    hub.send(badge_core::badge::proto::RequestKind::Restart(badge_core::badge::proto::Empty {}));
    assert!(hub.recv().is_none(), "restart closes the connection");

    assert_eq!(server.join().unwrap(), vec![SessionEnd::HubClosed, SessionEnd::BadgeClosed]);
}
