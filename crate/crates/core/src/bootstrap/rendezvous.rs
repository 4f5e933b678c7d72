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

//! Rank assignment and all-gather over a key-value store.
//!
//! Ranks come from an atomic counter: a worker's rank is the counter value
//! before its increment. Values are exchanged with a set/push/pop/get
//! protocol that never polls:
//!
//! 1. `SET <prefix>ep:<rank> = data`
//! 2. `RPUSH <prefix>sync:<rank>` with `world_size` tokens
//! 3. for every other rank `q`: `BLPOP <prefix>sync:<q>`, then
//!    `GET <prefix>ep:<q>`
//!
//! Because a rank only pushes tokens after its value is set, a successful
//! pop on `q`'s list guarantees the following get observes `q`'s value.
//! A worker never pops its own list; it reads its own value locally, so
//! one surplus token stays behind per list.

use std::time::{Duration, Instant};

use super::kv::KvStoreClient;
use crate::error::{Error, Result};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// Environment variable that supplies the store address.
pub const STORE_ENV: &str = "DISTDF_STORE";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RendezvousConfig {
    /// `host:port` of the store.
    pub store_address: String,
    /// Namespace for every key this job writes (`<job_id>:...`).
    pub job_id: String,
    pub world_size: usize,
    pub timeout: Duration,
}

impl RendezvousConfig {
    pub fn new(store_address: impl Into<String>, job_id: impl Into<String>, world_size: usize) -> Self {
        Self {
            store_address: store_address.into(),
            job_id: job_id.into(),
            world_size,
            timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Replaces the store address with `$DISTDF_STORE` when it is set.
    pub fn with_env_override(mut self) -> Self {
        if let Ok(addr) = std::env::var(STORE_ENV) {
            if !addr.is_empty() {
                self.store_address = addr;
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.world_size == 0 {
            return Err(Error::invalid("world size must be at least 1"));
        }
        if self.job_id.is_empty() {
            return Err(Error::invalid("job id must not be empty"));
        }
        Ok(())
    }

    pub fn key(&self, suffix: &str) -> String {
        format!("{}:{suffix}", self.job_id)
    }

    pub fn rank_counter_key(&self) -> String {
        self.key("rank_counter")
    }

    /// Key prefix of the endpoint exchange.
    pub fn endpoint_prefix(&self) -> String {
        self.key("")
    }

    /// Key prefix of all-gather number `op_id`.
    pub fn allgather_prefix(&self, op_id: u64) -> String {
        self.key(&format!("ag:{op_id}:"))
    }
}

/// Claims the next rank: `INCR <job>:rank_counter` minus one.
pub fn acquire_rank<K: KvStoreClient + ?Sized>(kv: &mut K, cfg: &RendezvousConfig) -> Result<usize> {
    cfg.validate()?;
    let after = kv.incr(&cfg.rank_counter_key())?;
    let rank = after - 1;
    if rank < 0 || rank as usize >= cfg.world_size {
        return Err(Error::TooManyWorkers {
            rank,
            world_size: cfg.world_size,
        });
    }
    Ok(rank as usize)
}

fn value_key(prefix: &str, rank: usize) -> String {
    format!("{prefix}ep:{rank}")
}

fn sync_key(prefix: &str, rank: usize) -> String {
    format!("{prefix}sync:{rank}")
}

/// Steps 1 and 2: publish our value and release the sync tokens.
fn publish<K: KvStoreClient + ?Sized>(
    kv: &mut K,
    prefix: &str,
    rank: usize,
    world_size: usize,
    data: &[u8],
) -> Result<()> {
    kv.set(&value_key(prefix, rank), data)?;
    if world_size > 1 {
        let token = rank.to_string();
        let tokens: Vec<&[u8]> = vec![token.as_bytes(); world_size];
        kv.rpush(&sync_key(prefix, rank), &tokens)?;
    }
    Ok(())
}

/// Step 3: wait for each peer's token, then read its value.
fn collect<K: KvStoreClient + ?Sized>(
    kv: &mut K,
    prefix: &str,
    rank: usize,
    world_size: usize,
    own: &[u8],
    item_size: Option<usize>,
    deadline: Instant,
) -> Result<Vec<Vec<u8>>> {
    let mut out = Vec::with_capacity(world_size);
    for q in 0..world_size {
        if q == rank {
            out.push(own.to_vec());
            continue;
        }
        let left = deadline.saturating_duration_since(Instant::now());
        if left.is_zero() || kv.blpop(&sync_key(prefix, q), left)?.is_none() {
            return Err(Error::BootstrapTimeout(format!(
                "rank {rank} gave up waiting for rank {q} under {prefix:?}"
            )));
        }
        let v = kv
            .get(&value_key(prefix, q))?
            .ok_or_else(|| Error::protocol(Some(q), format!("value under {prefix:?} missing after its sync token")))?;
        if let Some(n) = item_size {
            if v.len() != n {
                return Err(Error::protocol(
                    Some(q),
                    format!("contributed {} bytes to an all-gather of {n}-byte items", v.len()),
                ));
            }
        }
        out.push(v);
    }
    Ok(out)
}

/// Shares `my_addr` and returns every rank's address in rank order.
pub fn exchange_endpoints<K: KvStoreClient + ?Sized>(
    kv: &mut K,
    cfg: &RendezvousConfig,
    rank: usize,
    my_addr: &[u8],
) -> Result<Vec<Vec<u8>>> {
    if my_addr.is_empty() {
        return Err(Error::invalid("endpoint address must not be empty"));
    }
    let deadline = Instant::now() + cfg.timeout;
    let prefix = cfg.endpoint_prefix();
    publish(kv, &prefix, rank, cfg.world_size, my_addr)?;
    collect(kv, &prefix, rank, cfg.world_size, my_addr, None, deadline)
}

/// An all-gather whose contribution has been published but whose peers
/// have not been collected yet.
#[derive(Clone, Debug)]
pub struct PendingAllgather {
    pub op_id: u64,
    pub item_size: usize,
    local: Vec<u8>,
}

impl PendingAllgather {
    pub(crate) fn started(op_id: u64, item_size: usize, local: Vec<u8>) -> Self {
        Self {
            op_id,
            item_size,
            local,
        }
    }
}

/// Publishes this rank's contribution to all-gather `op_id` and returns
/// without waiting for anyone.
pub fn begin_allgather<K: KvStoreClient + ?Sized>(
    kv: &mut K,
    cfg: &RendezvousConfig,
    rank: usize,
    op_id: u64,
    local: &[u8],
    item_size: usize,
) -> Result<PendingAllgather> {
    if local.len() != item_size {
        return Err(Error::invalid(format!(
            "all-gather contribution is {} bytes, item size is {item_size}",
            local.len()
        )));
    }
    publish(kv, &cfg.allgather_prefix(op_id), rank, cfg.world_size, local)?;
    Ok(PendingAllgather {
        op_id,
        item_size,
        local: local.to_vec(),
    })
}

/// Collects every rank's contribution to a started all-gather. The result
/// is `world_size × item_size` bytes in rank order.
pub fn finish_allgather<K: KvStoreClient + ?Sized>(
    kv: &mut K,
    cfg: &RendezvousConfig,
    rank: usize,
    pending: PendingAllgather,
) -> Result<Vec<u8>> {
    let deadline = Instant::now() + cfg.timeout;
    let parts = collect(
        kv,
        &cfg.allgather_prefix(pending.op_id),
        rank,
        cfg.world_size,
        &pending.local,
        Some(pending.item_size),
        deadline,
    )?;
    Ok(parts.concat())
}

pub fn oob_allgather<K: KvStoreClient + ?Sized>(
    kv: &mut K,
    cfg: &RendezvousConfig,
    rank: usize,
    op_id: u64,
    local: &[u8],
    item_size: usize,
) -> Result<Vec<u8>> {
    let p = begin_allgather(kv, cfg, rank, op_id, local, item_size)?;
    finish_allgather(kv, cfg, rank, p)
}

/// Deletes the keys this rank wrote: its endpoint and sync list, those of
/// all-gathers `0..op_count`, and (rank 0) the rank counter. Only safe once
/// every peer is past the exchanges, e.g. after a barrier.
pub fn teardown<K: KvStoreClient + ?Sized>(
    kv: &mut K,
    cfg: &RendezvousConfig,
    rank: usize,
    op_count: u64,
) -> Result<()> {
    let mut keys = Vec::new();
    let ep = cfg.endpoint_prefix();
    keys.push(value_key(&ep, rank));
    keys.push(sync_key(&ep, rank));
    for op in 0..op_count {
        let p = cfg.allgather_prefix(op);
        keys.push(value_key(&p, rank));
        keys.push(sync_key(&p, rank));
    }
    if rank == 0 {
        keys.push(cfg.rank_counter_key());
    }
    let refs: Vec<&str> = keys.iter().map(String::as_str).collect();
    for chunk in refs.chunks(256) {
        kv.del(chunk)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bootstrap::kv::InProcStore;
    use std::thread;

    fn cfg(w: usize) -> RendezvousConfig {
        RendezvousConfig::new("unused", "job", w).with_timeout(Duration::from_secs(5))
    }

    #[test]
    fn first_rank_is_zero() {
        let s = InProcStore::new();
        assert_eq!(acquire_rank(&mut s.client(), &cfg(2)).unwrap(), 0);
        assert_eq!(acquire_rank(&mut s.client(), &cfg(2)).unwrap(), 1);
        assert!(matches!(
            acquire_rank(&mut s.client(), &cfg(2)),
            Err(Error::TooManyWorkers { rank: 2, world_size: 2 })
        ));
    }

    #[test]
    fn single_worker_exchange_only_sets() {
        let s = InProcStore::new();
        let out = exchange_endpoints(&mut s.client(), &cfg(1), 0, b"me").unwrap();
        assert_eq!(out, vec![b"me".to_vec()]);
        assert_eq!(s.keys(), vec!["job:ep:0".to_string()]);
    }

    #[test]
    fn allgather_checks_sizes() {
        let s = InProcStore::new();
        assert!(matches!(
            begin_allgather(&mut s.client(), &cfg(2), 0, 0, b"abc", 2),
            Err(Error::InvalidArgument(_))
        ));
        // rank 1 lies about its size by writing directly
        let c = cfg(2);
        let mut k = s.client();
        k.set(&format!("{}ep:1", c.allgather_prefix(3)), b"xyz").unwrap();
        k.rpush(&format!("{}sync:1", c.allgather_prefix(3)), &[b"1", b"1"])
            .unwrap();
        assert!(matches!(
            oob_allgather(&mut s.client(), &c, 0, 3, b"ab", 2),
            Err(Error::ProtocolViolation { rank: Some(1), .. })
        ));
    }

    #[test]
    fn withheld_peer_times_out() {
        let s = InProcStore::new();
        let c = cfg(2).with_timeout(Duration::from_millis(100));
        let r = exchange_endpoints(&mut s.client(), &c, 0, b"a");
        assert!(matches!(r, Err(Error::BootstrapTimeout(_))));
    }

    #[test]
    fn teardown_removes_job_keys() {
        let s = InProcStore::new();
        let c = cfg(2);
        let handles: Vec<_> = (0..2)
            .map(|_| {
                let (s, c) = (s.clone(), c.clone());
                thread::spawn(move || {
                    let mut k = s.client();
                    let r = acquire_rank(&mut k, &c).unwrap();
                    exchange_endpoints(&mut k, &c, r, format!("addr{r}").as_bytes()).unwrap();
                    oob_allgather(&mut k, &c, r, 0, &[r as u8], 1).unwrap();
                    r
                })
            })
            .collect();
        let ranks: Vec<usize> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        assert!(s.keys().iter().all(|k| k.starts_with("job:")));
        for r in ranks {
            teardown(&mut s.client(), &c, r, 1).unwrap();
        }
        assert!(s.keys().is_empty(), "left behind: {:?}", s.keys());
    }
}
