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

//! Wire framing for point-to-point messages.
//!
//! Every message is a 24-byte little-endian header followed by the
//! payload:
//!
//! | offset | size | field         |
//! |--------|------|---------------|
//! | 0      | 4    | source rank   |
//! | 4      | 4    | tag           |
//! | 8      | 8    | sequence      |
//! | 16     | 8    | payload bytes |
//!
//! Sequence numbers count up from 0 per (source, target, tag).

use std::io::{self, Read, Write};

pub const HEADER_LEN: usize = 24;

/// Upper bound on a single payload; anything larger is treated as a
/// corrupt header.
pub const MAX_PAYLOAD: u64 = 1 << 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameHeader {
    pub source: u32,
    pub tag: u32,
    pub sequence: u64,
    pub payload_len: u64,
}

impl FrameHeader {
    pub fn encode(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(&self.source.to_le_bytes());
        b[4..8].copy_from_slice(&self.tag.to_le_bytes());
        b[8..16].copy_from_slice(&self.sequence.to_le_bytes());
        b[16..24].copy_from_slice(&self.payload_len.to_le_bytes());
        b
    }

    pub fn decode(b: &[u8; HEADER_LEN]) -> Self {
        Self {
            source: u32::from_le_bytes(b[0..4].try_into().unwrap()),
            tag: u32::from_le_bytes(b[4..8].try_into().unwrap()),
            sequence: u64::from_le_bytes(b[8..16].try_into().unwrap()),
            payload_len: u64::from_le_bytes(b[16..24].try_into().unwrap()),
        }
    }
}

pub fn write_frame<W: Write + ?Sized>(w: &mut W, header: &FrameHeader, payload: &[u8]) -> io::Result<()> {
    debug_assert_eq!(header.payload_len, payload.len() as u64);
    w.write_all(&header.encode())?;
    w.write_all(payload)?;
    w.flush()
}

/// Reads one frame. `Ok(None)` on a clean end of stream at a frame
/// boundary; a stream that ends inside a frame is an `UnexpectedEof` error.
pub fn read_frame<R: Read + ?Sized>(r: &mut R) -> io::Result<Option<(FrameHeader, Vec<u8>)>> {
    let mut hdr = [0u8; HEADER_LEN];
    let mut got = 0;
    while got < HEADER_LEN {
        match r.read(&mut hdr[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => {
                return Err(io::Error::new(
                    io::ErrorKind::UnexpectedEof,
                    "stream closed inside a frame header",
                ))
            }
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    let header = FrameHeader::decode(&hdr);
    if header.payload_len > MAX_PAYLOAD {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("frame payload length {} is implausible", header.payload_len),
        ));
    }
    let mut payload = vec![0u8; header.payload_len as usize];
    r.read_exact(&mut payload).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            io::Error::new(io::ErrorKind::UnexpectedEof, "stream closed inside a frame payload")
        } else {
            e
        }
    })?;
    Ok(Some((header, payload)))
}
