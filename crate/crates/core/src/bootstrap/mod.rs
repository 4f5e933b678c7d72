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

//! Process-group formation without an external launcher: ranks and
//! endpoint addresses are exchanged through a key-value rendezvous store.

pub mod audit;
mod kv;
mod oob;
mod rendezvous;
pub mod resp;

pub use kv::{InProcClient, InProcStore, KvEvent, KvLog, KvOp, KvStoreClient, RecordingClient};
pub use oob::{make_oob_context, KvOobContext, OobContext, OobKind, OobParams, StaticExchange, StaticOobContext};
pub use rendezvous::{
    acquire_rank, begin_allgather, exchange_endpoints, finish_allgather, oob_allgather, teardown, PendingAllgather,
    RendezvousConfig, DEFAULT_TIMEOUT, STORE_ENV,
};
pub use resp::{RespClient, RespServer};
