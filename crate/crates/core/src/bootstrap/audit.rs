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

//! Checks over recorded store traffic.

use std::collections::{HashMap, HashSet};

use super::kv::{KvEvent, KvOp};

/// Violations of the no-premature-read rule found in a store log.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct ReadAudit {
    /// `get`s on a value key that came back empty.
    pub absent_gets: Vec<KvEvent>,
    /// `get`s on `<prefix>ep:<q>` not preceded, on the same client, by a
    /// successful pop of `<prefix>sync:<q>`.
    pub unsynchronized_gets: Vec<KvEvent>,
}

impl ReadAudit {
    pub fn is_clean(&self) -> bool {
        self.absent_gets.is_empty() && self.unsynchronized_gets.is_empty()
    }
}

/// Audits value reads in `events` (in per-client program order).
pub fn audit_reads(events: &[KvEvent]) -> ReadAudit {
    let mut audit = ReadAudit::default();
    let mut popped: HashMap<usize, HashSet<String>> = HashMap::new();
    for e in events {
        match e.op {
            KvOp::Blpop if e.hit => {
                if let Some((prefix, owner)) = e.key.rsplit_once("sync:") {
                    popped
                        .entry(e.client)
                        .or_default()
                        .insert(format!("{prefix}ep:{owner}"));
                }
            }
            KvOp::Get => {
                if !e.hit {
                    audit.absent_gets.push(e.clone());
                }
                let synced = popped.get(&e.client).is_some_and(|s| s.contains(&e.key));
                if e.key.contains("ep:") && !synced {
                    audit.unsynchronized_gets.push(e.clone());
                }
            }
            _ => {}
        }
    }
    audit
}

/// Per sync-list push and pop counts.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct TokenCounts {
    pub pushed: usize,
    pub popped: usize,
}

pub fn token_counts(events: &[KvEvent]) -> HashMap<String, TokenCounts> {
    let mut m: HashMap<String, TokenCounts> = HashMap::new();
    for e in events.iter().filter(|e| e.key.contains("sync:")) {
        match e.op {
            KvOp::Rpush => m.entry(e.key.clone()).or_default().pushed += 1,
            KvOp::Blpop if e.hit => m.entry(e.key.clone()).or_default().popped += 1,
            _ => {}
        }
    }
    m
}
