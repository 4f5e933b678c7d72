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

//! Error type shared by every layer of the engine.

use std::io;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("corrupt payload: {0}")]
    CorruptPayload(String),

    #[error("too many workers: acquired rank {rank} but world size is {world_size}")]
    TooManyWorkers { rank: i64, world_size: usize },

    #[error("connection error: {0}")]
    Connection(String),

    #[error("bootstrap timed out: {0}")]
    BootstrapTimeout(String),

    #[error("protocol violation{}: {message}", rank_suffix(.rank))]
    ProtocolViolation { rank: Option<usize>, message: String },

    #[error("channel to rank {peer} broken: {message}")]
    ChannelBroken { peer: usize, message: String },

    #[error("failed to connect to rank {peer}: {message}")]
    ConnectFailure { peer: usize, message: String },

    #[error("timed out: {0}")]
    Timeout(String),

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error("worker failed: {0}")]
    WorkerFailed(String),

    #[error("store error: {0}")]
    Store(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

fn rank_suffix(rank: &Option<usize>) -> String {
    match rank {
        Some(r) => format!(" (rank {r})"),
        None => String::new(),
    }
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn corrupt(msg: impl Into<String>) -> Self {
        Error::CorruptPayload(msg.into())
    }

    pub fn protocol(rank: Option<usize>, msg: impl Into<String>) -> Self {
        Error::ProtocolViolation {
            rank,
            message: msg.into(),
        }
    }

    /// Stable numeric code, returned as the status of C API calls.
    pub fn code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) => 1,
            Error::CorruptPayload(_) => 2,
            Error::TooManyWorkers { .. } => 3,
            Error::Connection(_) => 4,
            Error::BootstrapTimeout(_) => 5,
            Error::ProtocolViolation { .. } => 6,
            Error::ChannelBroken { .. } => 7,
            Error::ConnectFailure { .. } => 8,
            Error::VerificationFailed(_) => 9,
            Error::Store(_) => 10,
            Error::Io(_) => 11,
            Error::Timeout(_) => 12,
            Error::WorkerFailed(_) => 13,
        }
    }
}
