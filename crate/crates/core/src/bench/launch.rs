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

//! Starting workers on the local machine.
//!
//! The inproc transport runs workers as threads of this process. The tcp
//! transport starts one OS process per worker (`distdf worker ...`); the
//! processes find each other through a key-value rendezvous store, which
//! is served from this process when no address is configured.

use std::io::Read;
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use log::{info, warn};

use super::config::{BenchConfig, TransportKind};
use super::report::BenchReport;
use super::worker::{run_worker, WorkerOutcome};
use crate::bootstrap::{make_oob_context, OobParams, RendezvousConfig, RespServer, DEFAULT_TIMEOUT, STORE_ENV};
use crate::comm::{init_communicator, InProcTransport, TcpTransport, DEFAULT_OP_TIMEOUT};
use crate::dist::{run_dist, DistContext};
use crate::error::{Error, Result};

/// Exit status of a worker process whose result failed verification.
pub const EXIT_VERIFICATION_FAILED: i32 = 2;
/// Exit status when the rendezvous did not complete in time.
pub const EXIT_BOOTSTRAP_TIMEOUT: i32 = 3;

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::VerificationFailed(_) => EXIT_VERIFICATION_FAILED,
        Error::BootstrapTimeout(_) => EXIT_BOOTSTRAP_TIMEOUT,
        _ => 1,
    }
}

/// The report covers every world size that completed; `error` is set if
/// a later one did not.
#[derive(Debug)]
pub struct LaunchOutcome {
    pub report: BenchReport,
    pub error: Option<Error>,
}

impl LaunchOutcome {
    /// The report, or the launch error, or a verification error if any
    /// world size failed verification.
    pub fn into_result(self) -> Result<BenchReport> {
        if let Some(e) = self.error {
            return Err(e);
        }
        if self.report.failed_verification() {
            return Err(Error::VerificationFailed(
                "distributed result differs from the oracle".into(),
            ));
        }
        Ok(self.report)
    }
}

/// Runs the configured benchmark for each world size in turn.
pub fn launch_local(cfg: &BenchConfig) -> LaunchOutcome {
    let mut report = BenchReport::new(cfg.clone());
    let error = run_all(cfg, &mut report).err();
    LaunchOutcome { report, error }
}

fn run_all(cfg: &BenchConfig, report: &mut BenchReport) -> Result<()> {
    cfg.validate()?;
    let mut embedded = None;
    for &w in &cfg.world_sizes {
        info!("{} with {w} workers over {}", cfg.op, cfg.transport);
        let outcomes = match cfg.transport {
            TransportKind::Inproc => run_dist(w, Arc::new(InProcTransport::new()), DEFAULT_OP_TIMEOUT, |ctx| {
                run_worker(ctx, cfg)
            })?,
            TransportKind::Tcp => {
                let store = match cfg.store.clone().or_else(|| std::env::var(STORE_ENV).ok()) {
                    Some(s) => s,
                    None => embedded.get_or_insert(RespServer::bind("127.0.0.1:0")?).address(),
                };
                launch_processes(cfg, w, &store)?
            }
        };
        report.add_world(&outcomes)?;
    }
    Ok(())
}

fn job_id(world_size: usize) -> String {
    let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos());
    format!("bench-{}-{nanos}-w{world_size}", std::process::id())
}

fn worker_exe(cfg: &BenchConfig) -> Result<PathBuf> {
    match &cfg.worker_exe {
        Some(p) => Ok(p.clone()),
        None => Ok(std::env::current_exe()?),
    }
}

fn launch_processes(cfg: &BenchConfig, w: usize, store: &str) -> Result<Vec<WorkerOutcome>> {
    let exe = worker_exe(cfg)?;
    let job = job_id(w);
    let spec = serde_json::to_string(cfg).map_err(|e| Error::invalid(e.to_string()))?;
    let mut children: Vec<Child> = Vec::with_capacity(w);
    for _ in 0..w {
        let child = Command::new(&exe)
            .args([
                "worker",
                "--config",
                &spec,
                "--store",
                store,
                "--job",
                &job,
                "--world-size",
            ])
            .arg(w.to_string())
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn();
        match child {
            Ok(c) => children.push(c),
            Err(e) => {
                for mut c in children {
                    let _ = c.kill();
                    let _ = c.wait();
                }
                return Err(Error::WorkerFailed(format!("cannot start {}: {e}", exe.display())));
            }
        }
    }
    let mut outcomes = Vec::with_capacity(w);
    let mut failure: Option<Error> = None;
    for (i, mut c) in children.into_iter().enumerate() {
        let mut stdout = String::new();
        if let Some(mut s) = c.stdout.take() {
            let _ = s.read_to_string(&mut stdout);
        }
        let status = c.wait()?;
        match stdout
            .lines()
            .rev()
            .find_map(|l| serde_json::from_str::<WorkerOutcome>(l).ok())
        {
            Some(o) => outcomes.push(o),
            None => {
                let e = match status.code() {
                    Some(EXIT_BOOTSTRAP_TIMEOUT) => {
                        Error::BootstrapTimeout(format!("worker process {i} gave up waiting for its peers"))
                    }
                    _ => Error::WorkerFailed(format!("worker process {i} exited with {status} and no result")),
                };
                warn!("{e}");
                failure.get_or_insert(e);
            }
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    outcomes.sort_by_key(|o| o.rank);
    Ok(outcomes)
}

/// Body of one tcp worker process: rendezvous, connect, run, report.
pub fn worker_main(
    cfg: &BenchConfig,
    store: &str,
    job: &str,
    world_size: usize,
    timeout: Option<Duration>,
) -> Result<WorkerOutcome> {
    let rcfg = RendezvousConfig::new(store, job, world_size).with_timeout(timeout.unwrap_or(DEFAULT_TIMEOUT));
    let oob = make_oob_context("kvstore", OobParams::KvStore(rcfg))?;
    let comm = init_communicator(oob, Arc::new(TcpTransport::localhost()))?;
    let mut ctx = DistContext::new(comm);
    let out = run_worker(&mut ctx, cfg)?;
    ctx.finalize()?;
    Ok(out)
}
