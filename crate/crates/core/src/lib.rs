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

//! A distributed-memory dataframe engine.
//!
//! Workers run the same program (SPMD) and meet at collective steps. The
//! layers, bottom up:
//!
//! * [`table`]: columnar tables and local kernels (partition, join,
//!   group-by, sort, set operations, reductions).
//! * [`serializer`]: tables to three-buffers-per-column wire form and back.
//! * [`bootstrap`]: rank assignment and endpoint exchange over a
//!   key-value rendezvous store, behind a pluggable out-of-band context.
//! * [`comm`]: tagged point-to-point channels, collectives built on them,
//!   and the typed table/column/scalar collective surface.
//! * [`dist`]: distributed operators composing the two.
//! * [`bench`]: synthetic data, the local launcher and scaling reports.

pub mod bench;
pub mod bootstrap;
pub mod comm;
pub mod dist;
pub mod error;
pub mod serializer;
pub mod table;

pub use error::{Error, Result};
