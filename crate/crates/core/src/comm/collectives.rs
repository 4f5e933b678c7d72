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

//! Flat collectives over the point-to-point channels. Every member must
//! call the same collectives in the same order.

use std::str::FromStr;

use super::communicator::Communicator;
use crate::error::{Error, Result};
use crate::serializer::Reader;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
enum Phase {
    AllToAllSizes = 1,
    AllToAllData = 2,
    AllGather = 3,
    Gather = 4,
    Bcast = 5,
    Barrier = 6,
}

fn tag(p: Phase) -> u32 {
    (p as u32) << 24
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GatherMode {
    /// Payloads travel to the root only.
    #[default]
    Direct,
    /// Every member runs an allgather and non-roots drop the result.
    Emulated,
}

impl FromStr for GatherMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Self::Direct),
            "emulated" => Ok(Self::Emulated),
            _ => Err(Error::invalid(format!("unknown gather mode {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Min,
    Max,
    Land,
    Lor,
}

impl FromStr for ReduceOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Self::Sum),
            "min" => Ok(Self::Min),
            "max" => Ok(Self::Max),
            "land" => Ok(Self::Land),
            "lor" => Ok(Self::Lor),
            _ => Err(Error::invalid(format!("unknown reduce op {s:?}"))),
        }
    }
}

/// Fixed-width element types accepted by `allreduce_values`.
pub trait Reducible: Copy + Sized {
    const WIDTH: usize;
    fn put(&self, out: &mut Vec<u8>);
    fn get(b: &[u8]) -> Self;
    fn supports(op: ReduceOp) -> bool;
    fn combine(a: Self, b: Self, op: ReduceOp) -> Self;
}

impl Reducible for i64 {
    const WIDTH: usize = 8;
    fn put(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn get(b: &[u8]) -> Self {
        i64::from_le_bytes(b.try_into().unwrap())
    }
    fn supports(op: ReduceOp) -> bool {
        matches!(op, ReduceOp::Sum | ReduceOp::Min | ReduceOp::Max)
    }
    fn combine(a: Self, b: Self, op: ReduceOp) -> Self {
        match op {
            ReduceOp::Sum => a.wrapping_add(b),
            ReduceOp::Min => a.min(b),
            ReduceOp::Max => a.max(b),
            _ => unreachable!(),
        }
    }
}

impl Reducible for u64 {
    const WIDTH: usize = 8;
    fn put(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn get(b: &[u8]) -> Self {
        u64::from_le_bytes(b.try_into().unwrap())
    }
    fn supports(op: ReduceOp) -> bool {
        matches!(op, ReduceOp::Sum | ReduceOp::Min | ReduceOp::Max)
    }
    fn combine(a: Self, b: Self, op: ReduceOp) -> Self {
        match op {
            ReduceOp::Sum => a.wrapping_add(b),
            ReduceOp::Min => a.min(b),
            ReduceOp::Max => a.max(b),
            _ => unreachable!(),
        }
    }
}

impl Reducible for f64 {
    const WIDTH: usize = 8;
    fn put(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn get(b: &[u8]) -> Self {
        f64::from_le_bytes(b.try_into().unwrap())
    }
    fn supports(op: ReduceOp) -> bool {
        matches!(op, ReduceOp::Sum | ReduceOp::Min | ReduceOp::Max)
    }
    fn combine(a: Self, b: Self, op: ReduceOp) -> Self {
        match op {
            ReduceOp::Sum => a + b,
            ReduceOp::Min => a.min(b),
            ReduceOp::Max => a.max(b),
            _ => unreachable!(),
        }
    }
}

impl Reducible for bool {
    const WIDTH: usize = 1;
    fn put(&self, out: &mut Vec<u8>) {
        out.push(*self as u8);
    }
    fn get(b: &[u8]) -> Self {
        b[0] != 0
    }
    fn supports(op: ReduceOp) -> bool {
        !matches!(op, ReduceOp::Sum)
    }
    fn combine(a: Self, b: Self, op: ReduceOp) -> Self {
        match op {
            ReduceOp::Land | ReduceOp::Min => a && b,
            ReduceOp::Lor | ReduceOp::Max => a || b,
            ReduceOp::Sum => unreachable!(),
        }
    }
}

fn encode_lens(bufs: &[Vec<u8>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 * (bufs.len() + 1));
    out.extend_from_slice(&(bufs.len() as u64).to_le_bytes());
    for b in bufs {
        out.extend_from_slice(&(b.len() as u64).to_le_bytes());
    }
    out
}

fn decode_lens(peer: usize, b: &[u8]) -> Result<Vec<usize>> {
    let bad = || Error::protocol(Some(peer), "malformed size vector");
    let mut r = Reader::new(b);
    let n = r.u64().map_err(|_| bad())? as usize;
    if n.checked_mul(8) != Some(r.remaining()) {
        return Err(bad());
    }
    (0..n).map(|_| r.u64().map(|v| v as usize).map_err(|_| bad())).collect()
}

impl Communicator {
    fn check_root(&self, root: usize) -> Result<()> {
        if root >= self.world_size() {
            return Err(Error::invalid(format!(
                "root {root} out of range for world size {}",
                self.world_size()
            )));
        }
        Ok(())
    }

    /// Sends `out[q]` to rank q and returns what every rank sent here,
    /// indexed by source. Buffer counts and lengths travel first, then
    /// the non-empty payloads.
    pub fn all_to_all_buffers(&mut self, mut out: Vec<Vec<Vec<u8>>>) -> Result<Vec<Vec<Vec<u8>>>> {
        let w = self.world_size();
        let me = self.rank();
        if out.len() != w {
            return Err(Error::invalid(format!(
                "all_to_all needs {w} send lists, got {}",
                out.len()
            )));
        }
        let mut result: Vec<Vec<Vec<u8>>> = vec![Vec::new(); w];
        result[me] = std::mem::take(&mut out[me]);

        let size_recvs: Vec<_> = (0..w)
            .filter(|&q| q != me)
            .map(|q| self.irecv_raw(q, tag(Phase::AllToAllSizes)).map(|h| (q, h)))
            .collect::<Result<_>>()?;
        let mut sends = Vec::new();
        for q in (0..w).filter(|&q| q != me) {
            sends.push(self.isend_raw(q, tag(Phase::AllToAllSizes), encode_lens(&out[q]))?);
        }
        let mut lens = vec![Vec::new(); w];
        for (q, h) in size_recvs {
            let b = self.wait(h)?.unwrap_or_default();
            lens[q] = decode_lens(q, &b)?;
        }

        let mut data_recvs = Vec::new();
        for q in (0..w).filter(|&q| q != me) {
            for (i, &n) in lens[q].iter().enumerate() {
                if n > 0 {
                    data_recvs.push((q, i, n, self.irecv_raw(q, tag(Phase::AllToAllData))?));
                }
            }
            result[q] = vec![Vec::new(); lens[q].len()];
        }
        for q in (0..w).filter(|&q| q != me) {
            for b in std::mem::take(&mut out[q]) {
                if !b.is_empty() {
                    sends.push(self.isend_raw(q, tag(Phase::AllToAllData), b)?);
                }
            }
        }
        for (q, i, n, h) in data_recvs {
            let b = self.wait(h)?.unwrap_or_default();
            if b.len() != n {
                return Err(Error::protocol(
                    Some(q),
                    format!("announced {n} bytes for buffer {i}, delivered {}", b.len()),
                ));
            }
            result[q][i] = b;
        }
        self.waitall(&sends)?;
        Ok(result)
    }

    /// Every member receives every member's buffer, in rank order.
    pub fn allgather_v(&mut self, local: &[u8]) -> Result<Vec<Vec<u8>>> {
        self.exchange_all(local, tag(Phase::AllGather))
    }

    fn exchange_all(&mut self, local: &[u8], t: u32) -> Result<Vec<Vec<u8>>> {
        let w = self.world_size();
        let me = self.rank();
        let recvs: Vec<_> = (0..w)
            .filter(|&q| q != me)
            .map(|q| self.irecv_raw(q, t).map(|h| (q, h)))
            .collect::<Result<_>>()?;
        let mut sends = Vec::new();
        for q in (0..w).filter(|&q| q != me) {
            sends.push(self.isend_raw(q, t, local.to_vec())?);
        }
        let mut out = vec![Vec::new(); w];
        out[me] = local.to_vec();
        for (q, h) in recvs {
            out[q] = self.wait(h)?.unwrap_or_default();
        }
        self.waitall(&sends)?;
        Ok(out)
    }

    /// Rank-ordered buffers at `root`, `None` elsewhere.
    pub fn gather_v(&mut self, local: &[u8], root: usize, mode: GatherMode) -> Result<Option<Vec<Vec<u8>>>> {
        self.check_root(root)?;
        let me = self.rank();
        match mode {
            GatherMode::Emulated => {
                let all = self.allgather_v(local)?;
                Ok((me == root).then_some(all))
            }
            GatherMode::Direct if me == root => {
                let w = self.world_size();
                let recvs: Vec<_> = (0..w)
                    .filter(|&q| q != me)
                    .map(|q| self.irecv_raw(q, tag(Phase::Gather)).map(|h| (q, h)))
                    .collect::<Result<_>>()?;
                let mut out = vec![Vec::new(); w];
                out[me] = local.to_vec();
                for (q, h) in recvs {
                    out[q] = self.wait(h)?.unwrap_or_default();
                }
                Ok(Some(out))
            }
            GatherMode::Direct => {
                let h = self.isend_raw(root, tag(Phase::Gather), local.to_vec())?;
                self.wait(h)?;
                Ok(None)
            }
        }
    }

    /// The root passes `Some(bytes)`; every member returns the root's bytes.
    pub fn bcast_bytes(&mut self, buf: Option<Vec<u8>>, root: usize) -> Result<Vec<u8>> {
        self.check_root(root)?;
        let me = self.rank();
        if me == root {
            let buf = buf.ok_or_else(|| Error::invalid("bcast root must supply a buffer"))?;
            let mut sends = Vec::new();
            for q in (0..self.world_size()).filter(|&q| q != me) {
                sends.push(self.isend_raw(q, tag(Phase::Bcast), buf.clone())?);
            }
            self.waitall(&sends)?;
            Ok(buf)
        } else {
            self.recv_raw(root, tag(Phase::Bcast))
        }
    }

    /// Broadcasts a list of buffers: the count and lengths first, then
    /// the buffers themselves.
    pub fn bcast_buffers(&mut self, bufs: Option<Vec<Vec<u8>>>, root: usize) -> Result<Vec<Vec<u8>>> {
        self.check_root(root)?;
        let lens = self.bcast_bytes(bufs.as_ref().map(|b| encode_lens(b)), root)?;
        let lens = decode_lens(root, &lens)?;
        if self.rank() == root {
            let bufs = bufs.unwrap();
            for b in bufs.iter().filter(|b| !b.is_empty()) {
                self.bcast_bytes(Some(b.clone()), root)?;
            }
            Ok(bufs)
        } else {
            lens.iter()
                .map(|&n| {
                    if n == 0 {
                        return Ok(Vec::new());
                    }
                    let b = self.bcast_bytes(None, root)?;
                    if b.len() != n {
                        return Err(Error::protocol(
                            Some(root),
                            "broadcast buffer length differs from announced size",
                        ));
                    }
                    Ok(b)
                })
                .collect()
        }
    }

    /// Elementwise reduction, folded in rank order so every member
    /// computes bit-identical results.
    pub fn allreduce_values<T: Reducible>(&mut self, values: &[T], op: ReduceOp) -> Result<Vec<T>> {
        if !T::supports(op) {
            return Err(Error::invalid(format!(
                "reduce op {op:?} is not defined for this element type"
            )));
        }
        let mut local = Vec::with_capacity(values.len() * T::WIDTH);
        for v in values {
            v.put(&mut local);
        }
        let all = self.allgather_v(&local)?;
        for (q, b) in all.iter().enumerate() {
            if b.len() != local.len() {
                return Err(Error::protocol(
                    Some(q),
                    format!(
                        "allreduce vector length {} differs from {} at rank {}",
                        b.len() / T::WIDTH,
                        values.len(),
                        self.rank()
                    ),
                ));
            }
        }
        let mut acc: Vec<T> = all[0].chunks_exact(T::WIDTH).map(T::get).collect();
        for b in &all[1..] {
            for (a, c) in acc.iter_mut().zip(b.chunks_exact(T::WIDTH)) {
                *a = T::combine(*a, T::get(c), op);
            }
        }
        Ok(acc)
    }

    /// No member returns before every member has entered.
    pub fn barrier(&mut self) -> Result<()> {
        self.exchange_all(&[], tag(Phase::Barrier)).map(|_| ())
    }
}
