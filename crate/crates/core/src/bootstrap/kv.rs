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

//! Key-value store clients used for rendezvous.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};

/// The five store operations the bootstrap protocol relies on, plus `del`
/// for teardown.
///
/// `incr` must be atomic across all clients of one store, and
/// `rpush`/`blpop` must give FIFO list semantics with `blpop` blocking
/// until an element exists or the timeout passes.
pub trait KvStoreClient: Send {
    /// Atomically increments the integer at `key` (absent counts as 0) and
    /// returns the new value.
    fn incr(&mut self, key: &str) -> Result<i64>;
    fn set(&mut self, key: &str, value: &[u8]) -> Result<()>;
    fn get(&mut self, key: &str) -> Result<Option<Vec<u8>>>;
    /// Appends `values` to the list at `key`; returns the new list length.
    fn rpush(&mut self, key: &str, values: &[&[u8]]) -> Result<usize>;
    /// Pops the head of the list at `key`, waiting up to `timeout`.
    /// `Ok(None)` means the timeout expired.
    fn blpop(&mut self, key: &str, timeout: Duration) -> Result<Option<Vec<u8>>>;
    fn del(&mut self, keys: &[&str]) -> Result<usize>;
}

impl<T: KvStoreClient + ?Sized> KvStoreClient for Box<T> {
    fn incr(&mut self, key: &str) -> Result<i64> {
        (**self).incr(key)
    }
    fn set(&mut self, key: &str, value: &[u8]) -> Result<()> {
        (**self).set(key, value)
    }
    fn get(&mut self, key: &str) -> Result<Option<Vec<u8>>> {
        (**self).get(key)
    }
    fn rpush(&mut self, key: &str, values: &[&[u8]]) -> Result<usize> {
        (**self).rpush(key, values)
    }
    fn blpop(&mut self, key: &str, timeout: Duration) -> Result<Option<Vec<u8>>> {
        (**self).blpop(key, timeout)
    }
    fn del(&mut self, keys: &[&str]) -> Result<usize> {
        (**self).del(keys)
    }
}

#[derive(Debug)]
enum Entry {
    Str(Vec<u8>),
    List(VecDeque<Vec<u8>>),
}

const WRONGTYPE: &str = "WRONGTYPE Operation against a key holding the wrong kind of value";

/// Thread-safe in-memory store. Serves [`InProcClient`]s directly and
/// backs the embedded RESP server.
#[derive(Debug, Default)]
pub struct InProcStore {
    entries: Mutex<HashMap<String, Entry>>,
    pushed: Condvar,
}

impl InProcStore {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn client(self: &Arc<Self>) -> InProcClient {
        InProcClient {
            store: Arc::clone(self),
        }
    }

    pub fn incr_by(&self, key: &str, by: i64) -> Result<i64> {
        let mut m = self.entries.lock().unwrap();
        let cur = match m.get(key) {
            None => 0,
            Some(Entry::Str(s)) => std::str::from_utf8(s)
                .ok()
                .and_then(|s| s.parse::<i64>().ok())
                .ok_or_else(|| Error::Store("ERR value is not an integer or out of range".into()))?,
            Some(Entry::List(_)) => return Err(Error::Store(WRONGTYPE.into())),
        };
        let next = cur
            .checked_add(by)
            .ok_or_else(|| Error::Store("ERR increment or decrement would overflow".into()))?;
        m.insert(key.to_owned(), Entry::Str(next.to_string().into_bytes()));
        Ok(next)
    }

    pub fn set(&self, key: &str, value: &[u8]) {
        self.entries
            .lock()
            .unwrap()
            .insert(key.to_owned(), Entry::Str(value.to_vec()));
    }

    pub fn get(&self, key: &str) -> Result<Option<Vec<u8>>> {
        match self.entries.lock().unwrap().get(key) {
            None => Ok(None),
            Some(Entry::Str(s)) => Ok(Some(s.clone())),
            Some(Entry::List(_)) => Err(Error::Store(WRONGTYPE.into())),
        }
    }

    pub fn rpush(&self, key: &str, values: &[&[u8]]) -> Result<usize> {
        let mut m = self.entries.lock().unwrap();
        let entry = m.entry(key.to_owned()).or_insert_with(|| Entry::List(VecDeque::new()));
        let Entry::List(list) = entry else {
            return Err(Error::Store(WRONGTYPE.into()));
        };
        list.extend(values.iter().map(|v| v.to_vec()));
        let n = list.len();
        drop(m);
        self.pushed.notify_all();
        Ok(n)
    }

    /// Pops from the first non-empty list among `keys`; `None` timeout
    /// waits forever. Returns the key popped from and the value.
    pub fn blpop_any(&self, keys: &[&str], timeout: Option<Duration>) -> Result<Option<(String, Vec<u8>)>> {
        let deadline = timeout.map(|t| Instant::now() + t);
        let mut m = self.entries.lock().unwrap();
        loop {
            for &k in keys {
                match m.get_mut(k) {
                    Some(Entry::List(list)) => {
                        if let Some(v) = list.pop_front() {
                            if list.is_empty() {
                                m.remove(k);
                            }
                            return Ok(Some((k.to_owned(), v)));
                        }
                    }
                    Some(Entry::Str(_)) => return Err(Error::Store(WRONGTYPE.into())),
                    None => {}
                }
            }
            match deadline {
                None => m = self.pushed.wait(m).unwrap(),
                Some(d) => {
                    let now = Instant::now();
                    if now >= d {
                        return Ok(None);
                    }
                    m = self.pushed.wait_timeout(m, d - now).unwrap().0;
                }
            }
        }
    }

    pub fn del(&self, keys: &[&str]) -> usize {
        let mut m = self.entries.lock().unwrap();
        keys.iter().filter(|k| m.remove(**k).is_some()).count()
    }

    /// Keys currently present, sorted. Test and debugging aid.
    pub fn keys(&self) -> Vec<String> {
        let mut k: Vec<String> = self.entries.lock().unwrap().keys().cloned().collect();
        k.sort();
        k
    }

    /// Length of the list at `key` (0 when absent).
    pub fn list_len(&self, key: &str) -> usize {
        match self.entries.lock().unwrap().get(key) {
            Some(Entry::List(l)) => l.len(),
            _ => 0,
        }
    }
}

/// Client handle onto a shared [`InProcStore`].
#[derive(Clone, Debug)]
pub struct InProcClient {
    store: Arc<InProcStore>,
}

impl InProcClient {
    pub fn store(&self) -> &Arc<InProcStore> {
        &self.store
    }
}

impl KvStoreClient for InProcClient {
    fn incr(&mut self, key: &str) -> Result<i64> {
        self.store.incr_by(key, 1)
    }
    fn set(&mut self, key: &str, value: &[u8]) -> Result<()> {
        self.store.set(key, value);
        Ok(())
    }
    fn get(&mut self, key: &str) -> Result<Option<Vec<u8>>> {
        self.store.get(key)
    }
    fn rpush(&mut self, key: &str, values: &[&[u8]]) -> Result<usize> {
        self.store.rpush(key, values)
    }
    fn blpop(&mut self, key: &str, timeout: Duration) -> Result<Option<Vec<u8>>> {
        Ok(self.store.blpop_any(&[key], Some(timeout))?.map(|(_, v)| v))
    }
    fn del(&mut self, keys: &[&str]) -> Result<usize> {
        Ok(self.store.del(keys))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KvOp {
    Incr,
    Set,
    Get,
    Rpush,
    Blpop,
    Del,
}

/// One completed store call as seen by a recording client.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KvEvent {
    pub client: usize,
    pub op: KvOp,
    pub key: String,
    /// `get` found a value / `blpop` popped one.
    pub hit: bool,
}

/// Shared, ordered log of store calls made through [`RecordingClient`]s.
#[derive(Clone, Debug, Default)]
pub struct KvLog {
    events: Arc<Mutex<Vec<KvEvent>>>,
    next_client: Arc<AtomicUsize>,
}

impl KvLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn wrap<C: KvStoreClient>(&self, inner: C) -> RecordingClient<C> {
        RecordingClient {
            inner,
            id: self.next_client.fetch_add(1, Ordering::Relaxed),
            log: self.clone(),
        }
    }

    pub fn events(&self) -> Vec<KvEvent> {
        self.events.lock().unwrap().clone()
    }

    fn push(&self, client: usize, op: KvOp, key: &str, hit: bool) {
        self.events.lock().unwrap().push(KvEvent {
            client,
            op,
            key: key.to_owned(),
            hit,
        });
    }
}

/// Client wrapper that appends every call to a [`KvLog`].
pub struct RecordingClient<C> {
    inner: C,
    id: usize,
    log: KvLog,
}

impl<C> RecordingClient<C> {
    pub fn id(&self) -> usize {
        self.id
    }
}

impl<C: KvStoreClient> KvStoreClient for RecordingClient<C> {
    fn incr(&mut self, key: &str) -> Result<i64> {
        let r = self.inner.incr(key)?;
        self.log.push(self.id, KvOp::Incr, key, true);
        Ok(r)
    }
    fn set(&mut self, key: &str, value: &[u8]) -> Result<()> {
        self.inner.set(key, value)?;
        self.log.push(self.id, KvOp::Set, key, true);
        Ok(())
    }
    fn get(&mut self, key: &str) -> Result<Option<Vec<u8>>> {
        let r = self.inner.get(key)?;
        self.log.push(self.id, KvOp::Get, key, r.is_some());
        Ok(r)
    }
    fn rpush(&mut self, key: &str, values: &[&[u8]]) -> Result<usize> {
        let r = self.inner.rpush(key, values)?;
        for _ in values {
            self.log.push(self.id, KvOp::Rpush, key, true);
        }
        Ok(r)
    }
    fn blpop(&mut self, key: &str, timeout: Duration) -> Result<Option<Vec<u8>>> {
        let r = self.inner.blpop(key, timeout)?;
        self.log.push(self.id, KvOp::Blpop, key, r.is_some());
        Ok(r)
    }
    fn del(&mut self, keys: &[&str]) -> Result<usize> {
        let r = self.inner.del(keys)?;
        for k in keys {
            self.log.push(self.id, KvOp::Del, k, true);
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::thread;

    #[test]
    fn incr_counts_from_zero() {
        let s = InProcStore::new();
        let mut c = s.client();
        assert_eq!(c.incr("n").unwrap(), 1);
        assert_eq!(c.incr("n").unwrap(), 2);
        assert_eq!(c.get("n").unwrap().unwrap(), b"2");
    }

    #[test]
    fn lists_are_fifo() {
        let s = InProcStore::new();
        let mut c = s.client();
        assert_eq!(c.rpush("l", &[b"a", b"b"]).unwrap(), 2);
        c.rpush("l", &[b"c"]).unwrap();
        let t = Duration::from_millis(10);
        assert_eq!(c.blpop("l", t).unwrap().unwrap(), b"a");
        assert_eq!(c.blpop("l", t).unwrap().unwrap(), b"b");
        assert_eq!(c.blpop("l", t).unwrap().unwrap(), b"c");
        assert_eq!(c.blpop("l", t).unwrap(), None);
    }

    #[test]
    fn blpop_wakes_on_push() {
        let s = InProcStore::new();
        let mut waiter = s.client();
        let h = thread::spawn(move || waiter.blpop("l", Duration::from_secs(10)).unwrap());
        thread::sleep(Duration::from_millis(20));
        s.client().rpush("l", &[b"x"]).unwrap();
        assert_eq!(h.join().unwrap().unwrap(), b"x");
    }

    #[test]
    fn wrong_type() {
        let s = InProcStore::new();
        let mut c = s.client();
        c.set("k", b"v").unwrap();
        assert!(c.rpush("k", &[b"x"]).is_err());
        assert!(c.incr("k").is_err());
        c.rpush("l", &[b"x"]).unwrap();
        assert!(c.get("l").is_err());
    }

    #[test]
    fn recording_logs_hits() {
        let s = InProcStore::new();
        let log = KvLog::new();
        let mut c = log.wrap(s.client());
        c.get("missing").unwrap();
        c.set("k", b"v").unwrap();
        c.get("k").unwrap();
        let ev = log.events();
        assert_eq!(ev.len(), 3);
        assert!(!ev[0].hit);
        assert!(ev[2].hit);
    }
}
