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

//! Out-of-band contexts: the metadata exchange a communicator needs before
//! its own transport exists.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use super::kv::KvStoreClient;
use super::rendezvous::{self, PendingAllgather, RendezvousConfig, DEFAULT_TIMEOUT};
use super::resp::RespClient;
use crate::error::{Error, Result};

/// World size, rank, and an all-gather that works without the main
/// transport. A communicator is initialized purely through this trait, so
/// swapping the context swaps the bootstrap mechanism.
pub trait OobContext: Send {
    fn world_size(&self) -> usize;
    fn rank(&self) -> usize;

    /// Publishes this rank's contribution to all-gather `op_id` without
    /// waiting for peers. Distinct ids are independent: a rank may begin
    /// `k + 1` before others finish `k`.
    fn begin_allgather(&mut self, op_id: u64, local: &[u8], item_size: usize) -> Result<PendingAllgather>;

    /// Waits for all contributions; returns `world_size × item_size` bytes
    /// in rank order.
    fn finish_allgather(&mut self, pending: PendingAllgather) -> Result<Vec<u8>>;

    /// Variable-length exchange of endpoint addresses, rank ordered.
    fn exchange_endpoints(&mut self, my_addr: &[u8]) -> Result<Vec<Vec<u8>>>;

    /// Id for the next all-gather; counts up from 0.
    fn next_op_id(&mut self) -> u64;

    /// Releases out-of-band resources. Called once every member is done
    /// with the context.
    fn teardown(&mut self) -> Result<()> {
        Ok(())
    }

    fn oob_allgather(&mut self, op_id: u64, local: &[u8], item_size: usize) -> Result<Vec<u8>> {
        let p = self.begin_allgather(op_id, local, item_size)?;
        self.finish_allgather(p)
    }

    /// All-gather under the next id from [`OobContext::next_op_id`].
    fn allgather(&mut self, local: &[u8], item_size: usize) -> Result<Vec<u8>> {
        let id = self.next_op_id();
        self.oob_allgather(id, local, item_size)
    }
}

/// Context backed by a key-value rendezvous store.
pub struct KvOobContext {
    kv: Box<dyn KvStoreClient>,
    cfg: RendezvousConfig,
    rank: usize,
    next_op: u64,
    max_op: u64,
}

impl fmt::Debug for KvOobContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KvOobContext")
            .field("cfg", &self.cfg)
            .field("rank", &self.rank)
            .field("next_op", &self.next_op)
            .finish()
    }
}

impl KvOobContext {
    /// Dials the store named in `cfg` over TCP and claims a rank.
    pub fn connect(cfg: RendezvousConfig) -> Result<Self> {
        cfg.validate()?;
        let client = RespClient::connect_timeout(&cfg.store_address, cfg.timeout.min(Duration::from_secs(10)))?;
        Self::new(Box::new(client), cfg)
    }

    /// Claims a rank through an existing client.
    pub fn new(mut kv: Box<dyn KvStoreClient>, cfg: RendezvousConfig) -> Result<Self> {
        let rank = rendezvous::acquire_rank(&mut kv, &cfg)?;
        Ok(Self {
            kv,
            cfg,
            rank,
            next_op: 0,
            max_op: 0,
        })
    }

    pub fn config(&self) -> &RendezvousConfig {
        &self.cfg
    }
}

impl OobContext for KvOobContext {
    fn world_size(&self) -> usize {
        self.cfg.world_size
    }

    fn rank(&self) -> usize {
        self.rank
    }

    fn begin_allgather(&mut self, op_id: u64, local: &[u8], item_size: usize) -> Result<PendingAllgather> {
        self.max_op = self.max_op.max(op_id + 1);
        rendezvous::begin_allgather(&mut self.kv, &self.cfg, self.rank, op_id, local, item_size)
    }

    fn finish_allgather(&mut self, pending: PendingAllgather) -> Result<Vec<u8>> {
        rendezvous::finish_allgather(&mut self.kv, &self.cfg, self.rank, pending)
    }

    fn exchange_endpoints(&mut self, my_addr: &[u8]) -> Result<Vec<Vec<u8>>> {
        rendezvous::exchange_endpoints(&mut self.kv, &self.cfg, self.rank, my_addr)
    }

    fn next_op_id(&mut self) -> u64 {
        let id = self.next_op;
        self.next_op += 1;
        id
    }

    fn teardown(&mut self) -> Result<()> {
        rendezvous::teardown(&mut self.kv, &self.cfg, self.rank, self.max_op.max(self.next_op))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Slot {
    Endpoints,
    Gather(u64),
}

#[derive(Debug)]
struct ExchangeState {
    world_size: usize,
    slots: Mutex<HashMap<Slot, Vec<Option<Vec<u8>>>>>,
    filled: Condvar,
}

/// Shared memory standing in for an external launcher's all-gather, for
/// running several workers inside one process.
#[derive(Clone, Debug)]
pub struct StaticExchange {
    state: Arc<ExchangeState>,
}

impl StaticExchange {
    pub fn new(world_size: usize) -> Self {
        Self {
            state: Arc::new(ExchangeState {
                world_size,
                slots: Mutex::new(HashMap::new()),
                filled: Condvar::new(),
            }),
        }
    }

    pub fn world_size(&self) -> usize {
        self.state.world_size
    }

    /// One context per rank.
    pub fn contexts(&self) -> Vec<StaticOobContext> {
        (0..self.world_size())
            .map(|r| StaticOobContext::new(self.clone(), r).expect("rank in range"))
            .collect()
    }

    fn put(&self, slot: Slot, rank: usize, data: &[u8]) -> Result<()> {
        let mut m = self.state.slots.lock().unwrap();
        let row = m.entry(slot).or_insert_with(|| vec![None; self.state.world_size]);
        if row[rank].is_some() {
            return Err(Error::protocol(Some(rank), format!("contributed twice to {slot:?}")));
        }
        row[rank] = Some(data.to_vec());
        drop(m);
        self.state.filled.notify_all();
        Ok(())
    }

    fn wait_all(&self, slot: Slot, timeout: Duration) -> Result<Vec<Vec<u8>>> {
        let deadline = Instant::now() + timeout;
        let mut m = self.state.slots.lock().unwrap();
        loop {
            if let Some(row) = m.get(&slot) {
                if row.iter().all(Option::is_some) {
                    return Ok(row.iter().map(|v| v.clone().unwrap()).collect());
                }
            }
            let now = Instant::now();
            if now >= deadline {
                let missing: Vec<usize> = m
                    .get(&slot)
                    .map(|row| (0..row.len()).filter(|&r| row[r].is_none()).collect())
                    .unwrap_or_else(|| (0..self.state.world_size).collect());
                return Err(Error::BootstrapTimeout(format!(
                    "ranks {missing:?} never joined {slot:?}"
                )));
            }
            m = self.state.filled.wait_timeout(m, deadline - now).unwrap().0;
        }
    }
}

/// In-process context over a [`StaticExchange`].
#[derive(Debug)]
pub struct StaticOobContext {
    exchange: StaticExchange,
    rank: usize,
    next_op: u64,
    timeout: Duration,
}

impl StaticOobContext {
    pub fn new(exchange: StaticExchange, rank: usize) -> Result<Self> {
        if rank >= exchange.world_size() {
            return Err(Error::invalid(format!(
                "rank {rank} out of range for world size {}",
                exchange.world_size()
            )));
        }
        Ok(Self {
            exchange,
            rank,
            next_op: 0,
            timeout: DEFAULT_TIMEOUT,
        })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

impl OobContext for StaticOobContext {
    fn world_size(&self) -> usize {
        self.exchange.world_size()
    }

    fn rank(&self) -> usize {
        self.rank
    }

    fn begin_allgather(&mut self, op_id: u64, local: &[u8], item_size: usize) -> Result<PendingAllgather> {
        if local.len() != item_size {
            return Err(Error::invalid(format!(
                "all-gather contribution is {} bytes, item size is {item_size}",
                local.len()
            )));
        }
        self.exchange.put(Slot::Gather(op_id), self.rank, local)?;
        // the local copy is only needed by the store-backed context
        Ok(PendingAllgather::started(op_id, item_size, Vec::new()))
    }

    fn finish_allgather(&mut self, pending: PendingAllgather) -> Result<Vec<u8>> {
        let parts = self.exchange.wait_all(Slot::Gather(pending.op_id), self.timeout)?;
        if let Some(q) = parts.iter().position(|p| p.len() != pending.item_size) {
            return Err(Error::protocol(
                Some(q),
                format!(
                    "contributed {} bytes to an all-gather of {}-byte items",
                    parts[q].len(),
                    pending.item_size
                ),
            ));
        }
        Ok(parts.concat())
    }

    fn exchange_endpoints(&mut self, my_addr: &[u8]) -> Result<Vec<Vec<u8>>> {
        if my_addr.is_empty() {
            return Err(Error::invalid("endpoint address must not be empty"));
        }
        self.exchange.put(Slot::Endpoints, self.rank, my_addr)?;
        self.exchange.wait_all(Slot::Endpoints, self.timeout)
    }

    fn next_op_id(&mut self) -> u64 {
        let id = self.next_op;
        self.next_op += 1;
        id
    }
}

/// Bootstrap mechanism selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OobKind {
    KvStore,
    Static,
}

impl std::str::FromStr for OobKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kvstore" => Ok(OobKind::KvStore),
            "static" => Ok(OobKind::Static),
            other => Err(Error::invalid(format!("unknown OOB context kind {other:?}"))),
        }
    }
}

/// Construction parameters for [`make_oob_context`].
pub enum OobParams {
    /// Dial the store at `cfg.store_address`.
    KvStore(RendezvousConfig),
    /// Use an already connected client.
    KvStoreClient(Box<dyn KvStoreClient>, RendezvousConfig),
    Static {
        exchange: StaticExchange,
        rank: usize,
    },
}

/// Builds an OOB context of the named kind.
pub fn make_oob_context(kind: &str, params: OobParams) -> Result<Box<dyn OobContext>> {
    match (kind.parse::<OobKind>()?, params) {
        (OobKind::KvStore, OobParams::KvStore(cfg)) => Ok(Box::new(KvOobContext::connect(cfg)?)),
        (OobKind::KvStore, OobParams::KvStoreClient(kv, cfg)) => Ok(Box::new(KvOobContext::new(kv, cfg)?)),
        (OobKind::Static, OobParams::Static { exchange, rank }) => Ok(Box::new(StaticOobContext::new(exchange, rank)?)),
        (k, _) => Err(Error::invalid(format!("parameters do not match OOB kind {k:?}"))),
    }
}
