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

//! Runs a group of workers as threads of the current process.

use std::sync::Arc;
use std::thread;
use std::time::Duration;

use super::communicator::{init_communicator_with, Communicator, DEFAULT_OP_TIMEOUT};
use super::transport::{InProcTransport, Transport};
use crate::bootstrap::{StaticExchange, StaticOobContext};
use crate::error::{Error, Result};

/// Spawns `world_size` workers connected by `transport`, runs `f` on each
/// and finalizes the communicators. Results are returned in rank order;
/// if any worker fails, the lowest-ranked error is returned.
pub fn run_world<T, F>(world_size: usize, transport: Arc<dyn Transport>, timeout: Duration, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut Communicator) -> Result<T> + Sync,
{
    run_world_owned(world_size, transport, timeout, |mut comm| {
        let out = f(&mut comm)?;
        comm.finalize()?;
        Ok(out)
    })
}

/// Like [`run_world`] but hands each worker its communicator by value;
/// `f` is responsible for finalizing it.
pub fn run_world_owned<T, F>(
    world_size: usize,
    transport: Arc<dyn Transport>,
    timeout: Duration,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Communicator) -> Result<T> + Sync,
{
    if world_size == 0 {
        return Err(Error::invalid("world size must be at least 1"));
    }
    let exchange = StaticExchange::new(world_size);
    let results: Vec<Result<T>> = thread::scope(|s| {
        let handles: Vec<_> = (0..world_size)
            .map(|r| {
                let exchange = exchange.clone();
                let transport = Arc::clone(&transport);
                let f = &f;
                thread::Builder::new()
                    .name(format!("worker-{r}"))
                    .spawn_scoped(s, move || {
                        let oob = StaticOobContext::new(exchange, r)?.with_timeout(timeout);
                        f(init_communicator_with(Box::new(oob), transport, timeout)?)
                    })
                    .expect("spawn worker thread")
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::invalid("worker thread panicked")))
            })
            .collect()
    });
    results.into_iter().collect()
}

/// [`run_world`] over a fresh in-process transport.
pub fn run_inproc<T, F>(world_size: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut Communicator) -> Result<T> + Sync,
{
    run_world(world_size, Arc::new(InProcTransport::new()), DEFAULT_OP_TIMEOUT, f)
}
