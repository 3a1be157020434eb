//! TCP bridge: serves one badge over a localhost socket so a hub written
//! in any language can talk to it in real time.
//!
//! The socket carries the link byte stream unchanged: length-prefixed
//! request frames in, length-prefixed response frames out. A TCP
//! connection maps to a link connection, and closing the socket is a
//! disconnect. When the badge drops the connection itself, the bridge
//! closes the socket. Badge ticks follow the wall clock from the moment
//! the bridge was created.
//!
//! Sensors are idle on the bridge: sources can be started and stopped,
//! but only chunks already in storage are served to data requests.

use std::io::{self, ErrorKind, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use badge_core::badge::{Badge, BadgeConfig, Job, StepOutcome};
use badge_core::seqfs::FsError;
use badge_core::timebase::NOMINAL_HZ;
use badge_core::vmem::VirtualStorage;

const POLL: Duration = Duration::from_millis(5);

pub struct Bridge {
    listener: TcpListener,
    badge: Badge,
    started: Instant,
}

/// How a session ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionEnd {
    /// The hub closed the socket.
    HubClosed,
    /// The badge dropped the connection.
    BadgeClosed,
}

impl Bridge {
    pub fn bind(addr: impl ToSocketAddrs, config: BadgeConfig, storage: VirtualStorage) -> Result<Bridge, BridgeError> {
        Ok(Bridge {
            listener: TcpListener::bind(addr)?,
            badge: Badge::new(config, storage).map_err(BridgeError::Mount)?,
            started: Instant::now(),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn badge(&self) -> &Badge {
        &self.badge
    }

    pub fn into_badge(self) -> Badge {
        self.badge
    }

    fn ticks(&self) -> u64 {
        (self.started.elapsed().as_secs_f64() * NOMINAL_HZ as f64) as u64
    }

    /// Accepts one hub and serves it until either side disconnects.
    pub fn serve_one(&mut self) -> io::Result<SessionEnd> {
        let (stream, _) = self.listener.accept()?;
        self.session(stream)
    }

    /// Serves hubs one after another, forever.
    pub fn serve_forever(&mut self) -> io::Result<()> {
        loop {
            self.serve_one()?;
        }
    }

    fn session(&mut self, mut stream: TcpStream) -> io::Result<SessionEnd> {
        stream.set_read_timeout(Some(POLL))?;
        stream.set_nodelay(true)?;
        self.badge.on_connect();
        let mut buf = [0u8; 512];
        let end = loop {
            match stream.read(&mut buf) {
                Ok(0) => {
                    self.badge.on_disconnect();
                    break SessionEnd::HubClosed;
                }
                Ok(n) => self.badge.on_receive(&buf[..n], self.ticks()),
                Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
                Err(e) if e.kind() == ErrorKind::Interrupted => continue,
                Err(e) => {
                    self.badge.on_disconnect();
                    return Err(e);
                }
            }
            if let Err(e) = self.pump(&mut stream) {
                self.badge.on_disconnect();
                return Err(e);
            }
            if !self.badge.is_connected() {
                break SessionEnd::BadgeClosed;
            }
        };
        let _ = stream.shutdown(Shutdown::Both);
        Ok(end)
    }

    /// Runs the badge's jobs and writes everything it sends, until it has
    /// nothing more to say.
    fn pump(&mut self, stream: &mut TcpStream) -> io::Result<()> {
        loop {
            let outcome = self.badge.run_jobs(self.ticks());
            while let Some(slice) = self.badge.sender_mut().take_slice() {
                stream.write_all(&slice)?;
            }
            match outcome {
                StepOutcome::Busy => self.badge.schedule(Job::Handle),
                StepOutcome::Disconnected => return Ok(()),
                StepOutcome::Idle | StepOutcome::More if self.badge.queued_jobs() == 0 => return Ok(()),
                _ => {}
            }
            if !self.badge.is_connected() {
                return Ok(());
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BridgeError {
    #[error("socket: {0}")]
    Io(#[from] io::Error),
    #[error("storage does not mount: {0}")]
    Mount(FsError),
}
