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

//! Communication between workers: framed point-to-point channels over a
//! pluggable transport, flat collectives, and the typed collectives on
//! tables, columns and scalars.

mod collectives;
mod communicator;
pub mod frame;
pub mod transport;
mod typed;
mod world;

pub use collectives::{GatherMode, ReduceOp, Reducible};
pub use communicator::{
    init_communicator, init_communicator_with, Communicator, Handle, OpState, DEFAULT_OP_TIMEOUT, USER_TAG_LIMIT,
};
pub use transport::{InProcTransport, TcpTransport, Transport};
pub use typed::{check_available, is_available, CommOp, DataKind};
pub use world::{run_inproc, run_world, run_world_owned};
