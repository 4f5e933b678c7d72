// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Byte-stream transports between workers.
//!
//! Endpoint addresses are UTF-8 strings: `host:port` for TCP and
//! `inproc:<n>` for the in-process transport.

use std::collections::HashMap;
use std::io::{self, BufWriter, Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, RecvTimeoutError, Sender};

use crate::error::{Error, Result};

/// Sending half of a connection.
pub trait WriteHalf: Write + Send {
    /// Signals end of stream to the peer.
    fn close(&mut self);
}

pub type ReadHalf = Box<dyn Read + Send>;

/// A reliable, ordered, full-duplex connection split into its halves.
pub struct Duplex {
    pub reader: ReadHalf,
    pub writer: Box<dyn WriteHalf>,
}

pub trait Listener: Send {
    fn address(&self) -> Vec<u8>;
    fn accept(&mut self, timeout: Duration) -> Result<Duplex>;
}

pub trait Transport: Send + Sync {
    fn listen(&self) -> Result<Box<dyn Listener>>;
    fn connect(&self, addr: &[u8]) -> Result<Duplex>;
    fn name(&self) -> &'static str;
}

fn addr_str(addr: &[u8]) -> Result<&str> {
    std::str::from_utf8(addr).map_err(|_| Error::invalid("endpoint address is not UTF-8"))
}

/// TCP transport. Listeners bind an ephemeral port on `bind_host`.
#[derive(Clone, Debug)]
pub struct TcpTransport {
    bind_host: String,
}

impl TcpTransport {
    pub fn new(bind_host: impl Into<String>) -> Self {
        Self {
            bind_host: bind_host.into(),
        }
    }

    pub fn localhost() -> Self {
        Self::new("127.0.0.1")
    }
}

impl Default for TcpTransport {
    fn default() -> Self {
        Self::localhost()
    }
}

struct TcpWriter {
    buf: BufWriter<TcpStream>,
}

impl Write for TcpWriter {
    fn write(&mut self, b: &[u8]) -> io::Result<usize> {
        self.buf.write(b)
    }
    fn write_all(&mut self, b: &[u8]) -> io::Result<()> {
        self.buf.write_all(b)
    }
    fn flush(&mut self) -> io::Result<()> {
        self.buf.flush()
    }
}

impl WriteHalf for TcpWriter {
    fn close(&mut self) {
        let _ = self.buf.flush();
        let _ = self.buf.get_ref().shutdown(Shutdown::Write);
    }
}

fn tcp_duplex(s: TcpStream) -> io::Result<Duplex> {
    s.set_nodelay(true)?;
    let reader = s.try_clone()?;
    Ok(Duplex {
        reader: Box::new(reader),
        writer: Box::new(TcpWriter {
            buf: BufWriter::with_capacity(64 * 1024, s),
        }),
    })
}

struct TcpListenerHalf {
    inner: TcpListener,
    addr: String,
}

impl Listener for TcpListenerHalf {
    fn address(&self) -> Vec<u8> {
        self.addr.clone().into_bytes()
    }

    fn accept(&mut self, timeout: Duration) -> Result<Duplex> {
        let deadline = Instant::now() + timeout;
        self.inner.set_nonblocking(true)?;
        loop {
            match self.inner.accept() {
                Ok((s, _)) => {
                    s.set_nonblocking(false)?;
                    return Ok(tcp_duplex(s)?);
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                    if Instant::now() >= deadline {
                        return Err(Error::Timeout(format!(
                            "no connection on {} within {timeout:?}",
                            self.addr
                        )));
                    }
                    thread::sleep(Duration::from_millis(2));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
}

impl Transport for TcpTransport {
    fn listen(&self) -> Result<Box<dyn Listener>> {
        let inner = TcpListener::bind((self.bind_host.as_str(), 0))?;
        let addr = inner.local_addr()?.to_string();
        Ok(Box::new(TcpListenerHalf { inner, addr }))
    }

    fn connect(&self, addr: &[u8]) -> Result<Duplex> {
        let a = addr_str(addr)?;
        let mut last = None;
        for sa in a.to_socket_addrs()? {
            match TcpStream::connect_timeout(&sa, Duration::from_secs(10)) {
                Ok(s) => return Ok(tcp_duplex(s)?),
                Err(e) => last = Some(e),
            }
        }
        Err(last
            .map(Error::from)
            .unwrap_or_else(|| Error::Connection(format!("{a} resolved to no address"))))
    }

    fn name(&self) -> &'static str {
        "tcp"
    }
}

/// Receiving end of an in-memory byte pipe.
struct PipeReader {
    rx: Receiver<Vec<u8>>,
    pending: Vec<u8>,
    pos: usize,
}

impl Read for PipeReader {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        if out.is_empty() {
            return Ok(0);
        }
        while self.pos == self.pending.len() {
            match self.rx.recv() {
                Ok(chunk) => {
                    self.pending = chunk;
                    self.pos = 0;
                }
                // every sender gone: end of stream
                Err(_) => return Ok(0),
            }
        }
        let n = out.len().min(self.pending.len() - self.pos);
        out[..n].copy_from_slice(&self.pending[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

struct PipeWriter {
    tx: Option<Sender<Vec<u8>>>,
}

impl Write for PipeWriter {
    fn write(&mut self, b: &[u8]) -> io::Result<usize> {
        if b.is_empty() {
            return Ok(0);
        }
        match &self.tx {
            Some(tx) => tx
                .send(b.to_vec())
                .map(|_| b.len())
                .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "in-process peer dropped its reader")),
            None => Err(io::Error::new(io::ErrorKind::BrokenPipe, "pipe closed")),
        }
    }
    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

impl WriteHalf for PipeWriter {
    fn close(&mut self) {
        self.tx = None;
    }
}

fn pipe() -> (PipeWriter, PipeReader) {
    let (tx, rx) = unbounded();
    (
        PipeWriter { tx: Some(tx) },
        PipeReader {
            rx,
            pending: Vec::new(),
            pos: 0,
        },
    )
}

fn duplex_pair() -> (Duplex, Duplex) {
    let (w1, r1) = pipe();
    let (w2, r2) = pipe();
    (
        Duplex {
            reader: Box::new(r2),
            writer: Box::new(w1),
        },
        Duplex {
            reader: Box::new(r1),
            writer: Box::new(w2),
        },
    )
}

/// Transport whose connections are pairs of in-memory queues. Clones
/// share one address space, so give every worker thread of a job a clone
/// of the same instance.
#[derive(Clone, Default)]
pub struct InProcTransport {
    registry: Arc<Mutex<HashMap<String, Sender<Duplex>>>>,
    next: Arc<AtomicU64>,
}

impl InProcTransport {
    pub fn new() -> Self {
        Self::default()
    }
}

struct InProcListener {
    addr: String,
    rx: Receiver<Duplex>,
    registry: Arc<Mutex<HashMap<String, Sender<Duplex>>>>,
}

impl Listener for InProcListener {
    fn address(&self) -> Vec<u8> {
        self.addr.clone().into_bytes()
    }

    fn accept(&mut self, timeout: Duration) -> Result<Duplex> {
        self.rx.recv_timeout(timeout).map_err(|e| match e {
            RecvTimeoutError::Timeout => Error::Timeout(format!("no connection on {} within {timeout:?}", self.addr)),
            RecvTimeoutError::Disconnected => Error::Connection(format!("{} unregistered", self.addr)),
        })
    }
}

impl Drop for InProcListener {
    fn drop(&mut self) {
        self.registry.lock().unwrap().remove(&self.addr);
    }
}

impl Transport for InProcTransport {
    fn listen(&self) -> Result<Box<dyn Listener>> {
        let addr = format!("inproc:{}", self.next.fetch_add(1, Ordering::Relaxed));
        let (tx, rx) = unbounded();
        self.registry.lock().unwrap().insert(addr.clone(), tx);
        Ok(Box::new(InProcListener {
            addr,
            rx,
            registry: Arc::clone(&self.registry),
        }))
    }

    fn connect(&self, addr: &[u8]) -> Result<Duplex> {
        let a = addr_str(addr)?;
        let tx = self
            .registry
            .lock()
            .unwrap()
            .get(a)
            .cloned()
            .ok_or_else(|| Error::Connection(format!("no in-process listener at {a}")))?;
        let (near, far) = duplex_pair();
        tx.send(far)
            .map_err(|_| Error::Connection(format!("listener at {a} is gone")))?;
        Ok(near)
    }

    fn name(&self) -> &'static str {
        "inproc"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn echo_roundtrip(t: &dyn Transport) {
        let mut l = t.listen().unwrap();
        let mut a = t.connect(&l.address()).unwrap();
        let mut b = l.accept(Duration::from_secs(5)).unwrap();
        a.writer.write_all(b"ping").unwrap();
        a.writer.flush().unwrap();
        let mut buf = [0u8; 4];
        b.reader.read_exact(&mut buf).unwrap();
        assert_eq!(&buf, b"ping");
        b.writer.write_all(b"pong").unwrap();
        b.writer.close();
        let mut rest = Vec::new();
        a.reader.read_to_end(&mut rest).unwrap();
        assert_eq!(rest, b"pong");
    }

    #[test]
    fn inproc_duplex() {
        echo_roundtrip(&InProcTransport::new());
    }

    #[test]
    fn tcp_duplex() {
        echo_roundtrip(&TcpTransport::localhost());
    }

    #[test]
    fn inproc_unknown_address() {
        assert!(matches!(
            InProcTransport::new().connect(b"inproc:99"),
            Err(Error::Connection(_))
        ));
    }

    #[test]
    fn accept_times_out() {
        let mut l = InProcTransport::new().listen().unwrap();
        assert!(matches!(l.accept(Duration::from_millis(10)), Err(Error::Timeout(_))));
        let mut l = TcpTransport::localhost().listen().unwrap();
        assert!(matches!(l.accept(Duration::from_millis(10)), Err(Error::Timeout(_))));
    }
}
