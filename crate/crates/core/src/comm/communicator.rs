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

//! Tagged nonblocking point-to-point channels.

use std::collections::{HashMap, VecDeque};
use std::io::{Read, Write};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, RecvTimeoutError, Sender};
use log::{debug, warn};

use super::frame::{read_frame, write_frame, FrameHeader};
use super::transport::{Duplex, Transport, WriteHalf};
use crate::bootstrap::OobContext;
use crate::error::{Error, Result};

/// Tags at or above this value are reserved for collective phases.
pub const USER_TAG_LIMIT: u32 = 1 << 24;

pub const DEFAULT_OP_TIMEOUT: Duration = Duration::from_secs(120);

const HANDSHAKE_MAGIC: u32 = 0x4444_4631;
const CONNECT_ATTEMPTS: u32 = 20;

pub type Handle = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpState {
    InFlight,
    Complete,
    Failed,
}

enum Outcome {
    Pending,
    Sent,
    Received(Vec<u8>),
    Failed { peer: usize, message: String },
}

struct Op {
    peer: usize,
    outcome: Outcome,
}

enum Event {
    Frame {
        peer: usize,
        header: FrameHeader,
        payload: Vec<u8>,
    },
    SendDone(Handle),
    SendFailed {
        handle: Handle,
        peer: usize,
        message: String,
    },
    Closed {
        peer: usize,
        error: Option<String>,
    },
}

struct WriteReq {
    handle: Handle,
    header: FrameHeader,
    payload: Vec<u8>,
}

struct Peer {
    tx: Option<Sender<WriteReq>>,
    writer: Option<JoinHandle<()>>,
    broken: Option<String>,
    closed: bool,
}

pub struct Communicator {
    rank: usize,
    world_size: usize,
    peers: Vec<Option<Peer>>,
    events: Receiver<Event>,
    ops: HashMap<Handle, Op>,
    next_handle: Handle,
    send_seq: HashMap<(usize, u32), u64>,
    recv_seq: HashMap<(usize, u32), u64>,
    unexpected: HashMap<(usize, u32), VecDeque<Vec<u8>>>,
    posted: HashMap<(usize, u32), VecDeque<Handle>>,
    dialed: usize,
    timeout: Duration,
    oob: Box<dyn OobContext>,
}

impl std::fmt::Debug for Communicator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Communicator")
            .field("rank", &self.rank)
            .field("world_size", &self.world_size)
            .field("pending", &self.ops.len())
            .finish()
    }
}

fn spawn_reader(peer: usize, mut reader: Box<dyn Read + Send>, events: Sender<Event>) {
    thread::spawn(move || loop {
        match read_frame(&mut reader) {
            Ok(Some((header, payload))) => {
                if events.send(Event::Frame { peer, header, payload }).is_err() {
                    return;
                }
            }
            Ok(None) => {
                let _ = events.send(Event::Closed { peer, error: None });
                return;
            }
            Err(e) => {
                let _ = events.send(Event::Closed {
                    peer,
                    error: Some(e.to_string()),
                });
                return;
            }
        }
    });
}

fn spawn_writer(
    peer: usize,
    mut writer: Box<dyn WriteHalf>,
    events: Sender<Event>,
) -> (Sender<WriteReq>, JoinHandle<()>) {
    let (tx, rx) = unbounded::<WriteReq>();
    let h = thread::spawn(move || {
        for req in rx {
            let ev = match write_frame(&mut writer, &req.header, &req.payload) {
                Ok(()) => Event::SendDone(req.handle),
                Err(e) => Event::SendFailed {
                    handle: req.handle,
                    peer,
                    message: e.to_string(),
                },
            };
            let failed = matches!(ev, Event::SendFailed { .. });
            let _ = events.send(ev);
            if failed {
                break;
            }
        }
        writer.close();
    });
    (tx, h)
}

fn read_handshake(d: &mut Duplex) -> Result<usize> {
    let mut b = [0u8; 8];
    d.reader.read_exact(&mut b)?;
    let magic = u32::from_le_bytes(b[0..4].try_into().unwrap());
    if magic != HANDSHAKE_MAGIC {
        return Err(Error::protocol(None, format!("bad handshake magic {magic:#x}")));
    }
    Ok(u32::from_le_bytes(b[4..8].try_into().unwrap()) as usize)
}

/// Connects every pair of members. Each rank listens, publishes its
/// address through the OOB context, dials all higher ranks and accepts
/// one connection from each lower rank.
pub fn init_communicator(oob: Box<dyn OobContext>, transport: Arc<dyn Transport>) -> Result<Communicator> {
    init_communicator_with(oob, transport, DEFAULT_OP_TIMEOUT)
}

/// Like [`init_communicator`] with an explicit bound on connection setup
/// and on every later blocking wait.
pub fn init_communicator_with(
    mut oob: Box<dyn OobContext>,
    transport: Arc<dyn Transport>,
    timeout: Duration,
) -> Result<Communicator> {
    let rank = oob.rank();
    let world_size = oob.world_size();
    let (ev_tx, ev_rx) = unbounded();
    let mut peers: Vec<Option<Peer>> = (0..world_size).map(|_| None).collect();
    let mut dialed = 0;

    if world_size > 1 {
        let mut listener = transport.listen()?;
        let endpoints = oob.exchange_endpoints(&listener.address())?;
        if endpoints.len() != world_size {
            return Err(Error::protocol(
                None,
                format!(
                    "endpoint exchange returned {} entries for {world_size} ranks",
                    endpoints.len()
                ),
            ));
        }
        let mut streams: Vec<Option<Duplex>> = (0..world_size).map(|_| None).collect();
        for (q, addr) in endpoints.iter().enumerate().skip(rank + 1) {
            let mut attempt = 0;
            let mut d = loop {
                match transport.connect(addr) {
                    Ok(d) => break d,
                    Err(e) if attempt + 1 < CONNECT_ATTEMPTS => {
                        debug!("rank {rank}: dial {q} failed ({e}), retrying");
                        attempt += 1;
                        thread::sleep(Duration::from_millis(10 << attempt.min(5)));
                    }
                    Err(e) => {
                        return Err(Error::ConnectFailure {
                            peer: q,
                            message: e.to_string(),
                        })
                    }
                }
            };
            let mut hs = HANDSHAKE_MAGIC.to_le_bytes().to_vec();
            hs.extend_from_slice(&(rank as u32).to_le_bytes());
            d.writer
                .write_all(&hs)
                .and_then(|_| d.writer.flush())
                .map_err(|e| Error::ConnectFailure {
                    peer: q,
                    message: e.to_string(),
                })?;
            streams[q] = Some(d);
            dialed += 1;
        }
        for _ in 0..rank {
            let mut d = listener.accept(timeout).map_err(|e| {
                let missing = (0..rank).find(|&q| streams[q].is_none()).unwrap_or(0);
                match e {
                    Error::Timeout(m) => Error::ConnectFailure {
                        peer: missing,
                        message: m,
                    },
                    other => other,
                }
            })?;
            let q = read_handshake(&mut d)?;
            if q >= rank || streams[q].is_some() {
                return Err(Error::protocol(
                    Some(q),
                    format!("unexpected handshake from rank {q} at rank {rank}"),
                ));
            }
            streams[q] = Some(d);
        }
        for (q, s) in streams.into_iter().enumerate() {
            if let Some(d) = s {
                spawn_reader(q, d.reader, ev_tx.clone());
                let (tx, h) = spawn_writer(q, d.writer, ev_tx.clone());
                peers[q] = Some(Peer {
                    tx: Some(tx),
                    writer: Some(h),
                    broken: None,
                    closed: false,
                });
            }
        }
    }
    debug!("rank {rank}/{world_size}: communicator ready, dialed {dialed}");
    Ok(Communicator {
        rank,
        world_size,
        peers,
        events: ev_rx,
        ops: HashMap::new(),
        next_handle: 1,
        send_seq: HashMap::new(),
        recv_seq: HashMap::new(),
        unexpected: HashMap::new(),
        posted: HashMap::new(),
        dialed,
        timeout,
        oob,
    })
}

impl Communicator {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn world_size(&self) -> usize {
        self.world_size
    }

    /// Connections this rank dialed during init. Summed over all ranks
    /// this is `w * (w - 1) / 2`.
    pub fn dialed_connections(&self) -> usize {
        self.dialed
    }

    /// Number of peers with a live stream.
    pub fn live_streams(&self) -> usize {
        self.peers
            .iter()
            .flatten()
            .filter(|p| p.broken.is_none() && !p.closed)
            .count()
    }

    pub fn set_timeout(&mut self, timeout: Duration) {
        self.timeout = timeout;
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub fn oob(&mut self) -> &mut dyn OobContext {
        self.oob.as_mut()
    }

    fn check_rank(&self, r: usize, what: &str) -> Result<()> {
        if r >= self.world_size {
            return Err(Error::invalid(format!(
                "{what} rank {r} out of range for world size {}",
                self.world_size
            )));
        }
        Ok(())
    }

    fn new_handle(&mut self, peer: usize) -> Handle {
        let h = self.next_handle;
        self.next_handle += 1;
        self.ops.insert(
            h,
            Op {
                peer,
                outcome: Outcome::Pending,
            },
        );
        h
    }

    /// Posts a send to `target` on a user tag (below `USER_TAG_LIMIT`).
    pub fn isend(&mut self, target: usize, tag: u32, payload: Vec<u8>) -> Result<Handle> {
        if tag >= USER_TAG_LIMIT {
            return Err(Error::invalid(format!("tag {tag:#x} is in the reserved range")));
        }
        self.isend_raw(target, tag, payload)
    }

    /// Posts a receive from `source` on a user tag.
    pub fn irecv(&mut self, source: usize, tag: u32) -> Result<Handle> {
        if tag >= USER_TAG_LIMIT {
            return Err(Error::invalid(format!("tag {tag:#x} is in the reserved range")));
        }
        self.irecv_raw(source, tag)
    }

    pub(crate) fn isend_raw(&mut self, target: usize, tag: u32, payload: Vec<u8>) -> Result<Handle> {
        self.check_rank(target, "target")?;
        let h = self.new_handle(target);
        if target == self.rank {
            self.deliver(target, tag, payload);
            self.ops.get_mut(&h).unwrap().outcome = Outcome::Sent;
            return Ok(h);
        }
        let seq = self.send_seq.entry((target, tag)).or_insert(0);
        let header = FrameHeader {
            source: self.rank as u32,
            tag,
            sequence: *seq,
            payload_len: payload.len() as u64,
        };
        *seq += 1;
        let peer = self.peers[target].as_ref().expect("peer stream");
        let failure = if let Some(m) = &peer.broken {
            Some(m.clone())
        } else {
            match &peer.tx {
                Some(tx) => tx
                    .send(WriteReq {
                        handle: h,
                        header,
                        payload,
                    })
                    .err()
                    .map(|_| "writer thread exited".to_string()),
                None => Some("stream closed locally".to_string()),
            }
        };
        if let Some(message) = failure {
            self.ops.get_mut(&h).unwrap().outcome = Outcome::Failed { peer: target, message };
        }
        Ok(h)
    }

    pub(crate) fn irecv_raw(&mut self, source: usize, tag: u32) -> Result<Handle> {
        self.check_rank(source, "source")?;
        let h = self.new_handle(source);
        let key = (source, tag);
        let waiting = self.posted.get(&key).is_some_and(|q| !q.is_empty());
        if !waiting {
            if let Some(p) = self.unexpected.get_mut(&key).and_then(|q| q.pop_front()) {
                self.ops.get_mut(&h).unwrap().outcome = Outcome::Received(p);
                return Ok(h);
            }
        }
        if source != self.rank {
            let peer = self.peers[source].as_ref().expect("peer stream");
            if let Some(m) = &peer.broken {
                let message = m.clone();
                self.ops.get_mut(&h).unwrap().outcome = Outcome::Failed { peer: source, message };
                return Ok(h);
            }
            if peer.closed {
                self.ops.get_mut(&h).unwrap().outcome = Outcome::Failed {
                    peer: source,
                    message: "peer closed its stream".into(),
                };
                return Ok(h);
            }
        }
        self.posted.entry(key).or_default().push_back(h);
        Ok(h)
    }

    fn deliver(&mut self, source: usize, tag: u32, payload: Vec<u8>) {
        let key = (source, tag);
        while let Some(h) = self.posted.get_mut(&key).and_then(|q| q.pop_front()) {
            if let Some(op) = self.ops.get_mut(&h) {
                if matches!(op.outcome, Outcome::Pending) {
                    op.outcome = Outcome::Received(payload);
                    return;
                }
            }
        }
        self.unexpected.entry(key).or_default().push_back(payload);
    }

    fn poison(&mut self, peer: usize, message: String) {
        warn!("rank {}: channel to {peer} broken: {message}", self.rank);
        if let Some(p) = self.peers[peer].as_mut() {
            if p.broken.is_none() {
                p.broken = Some(message.clone());
            }
        }
        for op in self.ops.values_mut() {
            if op.peer == peer && matches!(op.outcome, Outcome::Pending) {
                op.outcome = Outcome::Failed {
                    peer,
                    message: message.clone(),
                };
            }
        }
        self.posted.retain(|(s, _), _| *s != peer);
    }

    fn handle(&mut self, ev: Event) {
        match ev {
            Event::Frame { peer, header, payload } => {
                if self.peers[peer].as_ref().is_none_or(|p| p.broken.is_some()) {
                    return;
                }
                if header.source as usize != peer {
                    self.poison(
                        peer,
                        format!("frame claims source {} on stream from {peer}", header.source),
                    );
                    return;
                }
                let exp = self.recv_seq.entry((peer, header.tag)).or_insert(0);
                if header.sequence != *exp {
                    let m = format!(
                        "tag {:#x}: expected sequence {}, got {}",
                        header.tag, *exp, header.sequence
                    );
                    self.poison(peer, m);
                    return;
                }
                *exp += 1;
                self.deliver(peer, header.tag, payload);
            }
            Event::SendDone(h) => {
                if let Some(op) = self.ops.get_mut(&h) {
                    if matches!(op.outcome, Outcome::Pending) {
                        op.outcome = Outcome::Sent;
                    }
                }
            }
            Event::SendFailed { handle, peer, message } => {
                if let Some(op) = self.ops.get_mut(&handle) {
                    op.outcome = Outcome::Failed {
                        peer,
                        message: message.clone(),
                    };
                }
                self.poison(peer, message);
            }
            Event::Closed { peer, error } => match error {
                Some(m) => self.poison(peer, m),
                None => {
                    if let Some(p) = self.peers[peer].as_mut() {
                        p.closed = true;
                    }
                    let pending_recv = self.posted.iter().any(|((s, _), q)| *s == peer && !q.is_empty());
                    if pending_recv {
                        self.poison(peer, "peer closed its stream with receives outstanding".into());
                    }
                }
            },
        }
    }

    /// Processes every event that has already arrived, without blocking.
    pub fn progress(&mut self) {
        while let Ok(ev) = self.events.try_recv() {
            self.handle(ev);
        }
    }

    fn state_of(&self, h: Handle) -> Result<OpState> {
        match self.ops.get(&h) {
            None => Err(Error::invalid(format!("unknown handle {h}"))),
            Some(op) => Ok(match op.outcome {
                Outcome::Pending => OpState::InFlight,
                Outcome::Failed { .. } => OpState::Failed,
                _ => OpState::Complete,
            }),
        }
    }

    /// Local completion check. Never waits on a peer.
    pub fn test(&mut self, h: Handle) -> Result<OpState> {
        self.progress();
        self.state_of(h)
    }

    /// Blocks until `h` completes. Returns the payload for receives and
    /// `None` for sends. The handle is consumed.
    pub fn wait(&mut self, h: Handle) -> Result<Option<Vec<u8>>> {
        let deadline = Instant::now() + self.timeout;
        loop {
            self.progress();
            if self.state_of(h)? != OpState::InFlight {
                break;
            }
            let now = Instant::now();
            if now >= deadline {
                let peer = self.ops[&h].peer;
                return Err(Error::Timeout(format!(
                    "rank {}: operation {h} with peer {peer} incomplete after {:?}",
                    self.rank, self.timeout
                )));
            }
            match self.events.recv_timeout(deadline - now) {
                Ok(ev) => self.handle(ev),
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => {
                    let peer = self.ops[&h].peer;
                    self.poison(peer, "no live streams".into());
                }
            }
        }
        let op = self.ops.remove(&h).unwrap();
        match op.outcome {
            Outcome::Sent => Ok(None),
            Outcome::Received(p) => Ok(Some(p)),
            Outcome::Failed { peer, message } => Err(Error::ChannelBroken { peer, message }),
            Outcome::Pending => unreachable!(),
        }
    }

    /// Waits on every handle; the first failure is returned after all
    /// handles reached a terminal state or timed out.
    pub fn waitall(&mut self, hs: &[Handle]) -> Result<Vec<Option<Vec<u8>>>> {
        let mut out = Vec::with_capacity(hs.len());
        let mut first_err = None;
        for &h in hs {
            match self.wait(h) {
                Ok(v) => out.push(v),
                Err(e) => {
                    out.push(None);
                    if first_err.is_none() {
                        first_err = Some(e);
                    }
                }
            }
        }
        match first_err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    pub(crate) fn recv_raw(&mut self, source: usize, tag: u32) -> Result<Vec<u8>> {
        let h = self.irecv_raw(source, tag)?;
        Ok(self.wait(h)?.unwrap_or_default())
    }

    /// Closes every outbound stream and waits for queued sends to flush.
    fn close_streams(&mut self) {
        for p in self.peers.iter_mut().flatten() {
            p.tx = None;
        }
        for p in self.peers.iter_mut().flatten() {
            if let Some(h) = p.writer.take() {
                let _ = h.join();
            }
        }
    }

    /// Synchronizes, releases bootstrap state and closes all streams.
    pub fn finalize(mut self) -> Result<()> {
        let r = self.barrier();
        self.close_streams();
        r?;
        self.oob.teardown()
    }
}

impl Drop for Communicator {
    fn drop(&mut self) {
        self.close_streams();
    }
}
