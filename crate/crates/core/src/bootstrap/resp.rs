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

//! RESP2 client and embedded server for the rendezvous store.
//!
//! Only the commands the bootstrap protocol needs are spoken: `SET`,
//! `GET`, `INCR`, `INCRBY`, `RPUSH`, `BLPOP` and `DEL` (plus `PING`). Any
//! server implementing those, including a stock Redis, can act as the
//! store.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use log::{debug, warn};

use super::kv::{InProcStore, KvStoreClient};
use crate::error::{Error, Result};

const MAX_BULK: usize = 512 * 1024 * 1024;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Reply {
    Simple(String),
    Error(String),
    Int(i64),
    Bulk(Option<Vec<u8>>),
    Array(Option<Vec<Reply>>),
}

/// Encodes a command as a RESP array of bulk strings.
pub fn encode_command(args: &[&[u8]]) -> Vec<u8> {
    let mut out = format!("*{}\r\n", args.len()).into_bytes();
    for a in args {
        out.extend_from_slice(format!("${}\r\n", a.len()).as_bytes());
        out.extend_from_slice(a);
        out.extend_from_slice(b"\r\n");
    }
    out
}

pub fn encode_reply(r: &Reply, out: &mut Vec<u8>) {
    match r {
        Reply::Simple(s) => out.extend_from_slice(format!("+{s}\r\n").as_bytes()),
        Reply::Error(s) => out.extend_from_slice(format!("-{s}\r\n").as_bytes()),
        Reply::Int(i) => out.extend_from_slice(format!(":{i}\r\n").as_bytes()),
        Reply::Bulk(None) => out.extend_from_slice(b"$-1\r\n"),
        Reply::Bulk(Some(b)) => {
            out.extend_from_slice(format!("${}\r\n", b.len()).as_bytes());
            out.extend_from_slice(b);
            out.extend_from_slice(b"\r\n");
        }
        Reply::Array(None) => out.extend_from_slice(b"*-1\r\n"),
        Reply::Array(Some(items)) => {
            out.extend_from_slice(format!("*{}\r\n", items.len()).as_bytes());
            for i in items {
                encode_reply(i, out);
            }
        }
    }
}

fn bad(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn read_line<R: BufRead>(r: &mut R) -> io::Result<String> {
    let mut line = Vec::new();
    if r.read_until(b'\n', &mut line)? == 0 {
        return Err(io::ErrorKind::UnexpectedEof.into());
    }
    if !line.ends_with(b"\r\n") {
        return Err(bad("RESP line not terminated by CRLF"));
    }
    line.truncate(line.len() - 2);
    String::from_utf8(line).map_err(|_| bad("RESP header is not UTF-8"))
}

fn parse_len(s: &str) -> io::Result<i64> {
    s.parse().map_err(|_| bad(format!("bad RESP length {s:?}")))
}

/// Reads one RESP value.
pub fn read_reply<R: BufRead>(r: &mut R) -> io::Result<Reply> {
    let line = read_line(r)?;
    if line.is_empty() {
        return Err(bad("empty RESP line"));
    }
    let (kind, rest) = line.split_at(1);
    match kind {
        "+" => Ok(Reply::Simple(rest.to_owned())),
        "-" => Ok(Reply::Error(rest.to_owned())),
        ":" => Ok(Reply::Int(parse_len(rest)?)),
        "$" => {
            let n = parse_len(rest)?;
            if n < 0 {
                return Ok(Reply::Bulk(None));
            }
            let n = n as usize;
            if n > MAX_BULK {
                return Err(bad(format!("bulk string of {n} bytes exceeds limit")));
            }
            let mut buf = vec![0u8; n + 2];
            r.read_exact(&mut buf)?;
            if &buf[n..] != b"\r\n" {
                return Err(bad("bulk string not terminated by CRLF"));
            }
            buf.truncate(n);
            Ok(Reply::Bulk(Some(buf)))
        }
        "*" => {
            let n = parse_len(rest)?;
            if n < 0 {
                return Ok(Reply::Array(None));
            }
            let items = (0..n).map(|_| read_reply(r)).collect::<io::Result<Vec<_>>>()?;
            Ok(Reply::Array(Some(items)))
        }
        _ => Err(bad(format!("unknown RESP type in line {line:?}"))),
    }
}

/// Blocking RESP client over one TCP connection.
pub struct RespClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    addr: String,
}

impl RespClient {
    pub fn connect(addr: &str) -> Result<Self> {
        Self::connect_timeout(addr, Duration::from_secs(10))
    }

    pub fn connect_timeout(addr: &str, timeout: Duration) -> Result<Self> {
        let conn_err = |e: io::Error| Error::Connection(format!("store at {addr}: {e}"));
        let sock_addrs: Vec<SocketAddr> = addr.to_socket_addrs().map_err(conn_err)?.collect();
        let mut last = None;
        for sa in sock_addrs {
            match TcpStream::connect_timeout(&sa, timeout) {
                Ok(s) => {
                    s.set_nodelay(true).ok();
                    let reader = BufReader::new(s.try_clone().map_err(conn_err)?);
                    return Ok(Self {
                        reader,
                        writer: s,
                        addr: addr.to_owned(),
                    });
                }
                Err(e) => last = Some(e),
            }
        }
        Err(conn_err(last.unwrap_or_else(|| {
            io::Error::new(io::ErrorKind::NotFound, "address resolved to nothing")
        })))
    }

    /// Sends one command and reads its reply. Server error replies become
    /// [`Error::Store`].
    pub fn command(&mut self, args: &[&[u8]]) -> Result<Reply> {
        let io_err = |e: io::Error| Error::Connection(format!("store at {}: {e}", self.addr));
        self.writer.write_all(&encode_command(args)).map_err(io_err)?;
        let reply =
            read_reply(&mut self.reader).map_err(|e| Error::Connection(format!("store at {}: {e}", self.addr)))?;
        match reply {
            Reply::Error(e) => Err(Error::Store(e)),
            r => Ok(r),
        }
    }

    fn unexpected(cmd: &str, r: Reply) -> Error {
        Error::Store(format!("unexpected reply to {cmd}: {r:?}"))
    }
}

impl KvStoreClient for RespClient {
    fn incr(&mut self, key: &str) -> Result<i64> {
        match self.command(&[b"INCR", key.as_bytes()])? {
            Reply::Int(i) => Ok(i),
            r => Err(Self::unexpected("INCR", r)),
        }
    }

    fn set(&mut self, key: &str, value: &[u8]) -> Result<()> {
        match self.command(&[b"SET", key.as_bytes(), value])? {
            Reply::Simple(_) => Ok(()),
            r => Err(Self::unexpected("SET", r)),
        }
    }

    fn get(&mut self, key: &str) -> Result<Option<Vec<u8>>> {
        match self.command(&[b"GET", key.as_bytes()])? {
            Reply::Bulk(b) => Ok(b),
            r => Err(Self::unexpected("GET", r)),
        }
    }

    fn rpush(&mut self, key: &str, values: &[&[u8]]) -> Result<usize> {
        let mut args: Vec<&[u8]> = vec![b"RPUSH", key.as_bytes()];
        args.extend_from_slice(values);
        match self.command(&args)? {
            Reply::Int(i) => Ok(i as usize),
            r => Err(Self::unexpected("RPUSH", r)),
        }
    }

    fn blpop(&mut self, key: &str, timeout: Duration) -> Result<Option<Vec<u8>>> {
        // 0 would mean "forever" to the server
        let secs = format!("{:.3}", timeout.as_secs_f64().max(0.001));
        match self.command(&[b"BLPOP", key.as_bytes(), secs.as_bytes()])? {
            Reply::Array(None) | Reply::Bulk(None) => Ok(None),
            Reply::Array(Some(mut items)) if items.len() == 2 => match items.pop() {
                Some(Reply::Bulk(Some(v))) => Ok(Some(v)),
                r => Err(Self::unexpected("BLPOP", r.unwrap_or(Reply::Array(None)))),
            },
            r => Err(Self::unexpected("BLPOP", r)),
        }
    }

    fn del(&mut self, keys: &[&str]) -> Result<usize> {
        if keys.is_empty() {
            return Ok(0);
        }
        let mut args: Vec<&[u8]> = vec![b"DEL"];
        args.extend(keys.iter().map(|k| k.as_bytes()));
        match self.command(&args)? {
            Reply::Int(i) => Ok(i as usize),
            r => Err(Self::unexpected("DEL", r)),
        }
    }
}

/// Embedded RESP server in front of an [`InProcStore`]. One thread per
/// connection; stops accepting when dropped.
pub struct RespServer {
    addr: SocketAddr,
    store: Arc<InProcStore>,
    stop: Arc<AtomicBool>,
    accept: Option<thread::JoinHandle<()>>,
}

impl RespServer {
    pub fn bind(addr: &str) -> Result<Self> {
        Self::bind_with(addr, InProcStore::new())
    }

    pub fn bind_with(addr: &str, store: Arc<InProcStore>) -> Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let local = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let accept = {
            let (store, stop) = (Arc::clone(&store), Arc::clone(&stop));
            thread::Builder::new()
                .name("resp-accept".into())
                .spawn(move || accept_loop(listener, store, stop))?
        };
        debug!("rendezvous store listening on {local}");
        Ok(Self {
            addr: local,
            store,
            stop,
            accept: Some(accept),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// `host:port` string clients should dial.
    pub fn address(&self) -> String {
        self.addr.to_string()
    }

    pub fn store(&self) -> &Arc<InProcStore> {
        &self.store
    }
}

impl Drop for RespServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the blocking accept
        let _ = TcpStream::connect_timeout(&self.addr, Duration::from_millis(200));
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

fn accept_loop(listener: TcpListener, store: Arc<InProcStore>, stop: Arc<AtomicBool>) {
    for conn in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        match conn {
            Ok(s) => {
                let store = Arc::clone(&store);
                let _ = thread::Builder::new().name("resp-conn".into()).spawn(move || {
                    if let Err(e) = serve_connection(s, &store) {
                        if e.kind() != io::ErrorKind::UnexpectedEof {
                            debug!("store connection ended: {e}");
                        }
                    }
                });
            }
            Err(e) => warn!("store accept failed: {e}"),
        }
    }
}

fn serve_connection(s: TcpStream, store: &InProcStore) -> io::Result<()> {
    s.set_nodelay(true).ok();
    let mut reader = BufReader::new(s.try_clone()?);
    let mut writer = s;
    loop {
        let req = match read_reply(&mut reader) {
            Ok(r) => r,
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => {
                let _ = writer.shutdown(Shutdown::Both);
                return Ok(());
            }
            Err(e) => return Err(e),
        };
        let reply = match req {
            Reply::Array(Some(items)) => {
                let args: Option<Vec<Vec<u8>>> = items
                    .into_iter()
                    .map(|i| match i {
                        Reply::Bulk(Some(b)) => Some(b),
                        _ => None,
                    })
                    .collect();
                match args {
                    Some(a) if !a.is_empty() => dispatch(store, &a),
                    _ => Reply::Error("ERR protocol error: expected array of bulk strings".into()),
                }
            }
            _ => Reply::Error("ERR protocol error: expected array".into()),
        };
        let mut out = Vec::new();
        encode_reply(&reply, &mut out);
        writer.write_all(&out)?;
    }
}

fn arity(name: &str) -> Reply {
    Reply::Error(format!(
        "ERR wrong number of arguments for '{}' command",
        name.to_lowercase()
    ))
}

fn store_err(e: Error) -> Reply {
    match e {
        Error::Store(m) => Reply::Error(m),
        other => Reply::Error(format!("ERR {other}")),
    }
}

fn utf8(b: &[u8]) -> Option<&str> {
    std::str::from_utf8(b).ok()
}

/// Executes one command against the store.
pub fn dispatch(store: &InProcStore, args: &[Vec<u8>]) -> Reply {
    let name = String::from_utf8_lossy(&args[0]).to_uppercase();
    let keys_of = |a: &[Vec<u8>]| -> Option<Vec<String>> { a.iter().map(|k| utf8(k).map(str::to_owned)).collect() };
    let Some(key) = args.get(1).and_then(|k| utf8(k)) else {
        return match name.as_str() {
            "PING" => Reply::Simple("PONG".into()),
            _ if args.len() < 2 => arity(&name),
            _ => Reply::Error("ERR key is not UTF-8".into()),
        };
    };
    match name.as_str() {
        "PING" => Reply::Bulk(Some(args[1].clone())),
        "SET" if args.len() == 3 => {
            store.set(key, &args[2]);
            Reply::Simple("OK".into())
        }
        "GET" if args.len() == 2 => store.get(key).map_or_else(store_err, Reply::Bulk),
        "INCR" if args.len() == 2 => store.incr_by(key, 1).map_or_else(store_err, Reply::Int),
        "INCRBY" if args.len() == 3 => match utf8(&args[2]).and_then(|s| s.parse::<i64>().ok()) {
            Some(by) => store.incr_by(key, by).map_or_else(store_err, Reply::Int),
            None => Reply::Error("ERR value is not an integer or out of range".into()),
        },
        "RPUSH" if args.len() >= 3 => {
            let vals: Vec<&[u8]> = args[2..].iter().map(Vec::as_slice).collect();
            store.rpush(key, &vals).map_or_else(store_err, |n| Reply::Int(n as i64))
        }
        "BLPOP" if args.len() >= 3 => {
            let Some(secs) = utf8(&args[args.len() - 1]).and_then(|s| s.parse::<f64>().ok()) else {
                return Reply::Error("ERR timeout is not a float or out of range".into());
            };
            if !(secs >= 0.0 && secs.is_finite()) {
                return Reply::Error("ERR timeout is negative".into());
            }
            let Some(keys) = keys_of(&args[1..args.len() - 1]) else {
                return Reply::Error("ERR key is not UTF-8".into());
            };
            let keys: Vec<&str> = keys.iter().map(String::as_str).collect();
            let timeout = (secs > 0.0).then(|| Duration::from_secs_f64(secs));
            match store.blpop_any(&keys, timeout) {
                Ok(Some((k, v))) => Reply::Array(Some(vec![Reply::Bulk(Some(k.into_bytes())), Reply::Bulk(Some(v))])),
                Ok(None) => Reply::Array(None),
                Err(e) => store_err(e),
            }
        }
        "DEL" if args.len() >= 2 => match keys_of(&args[1..]) {
            Some(keys) => {
                let keys: Vec<&str> = keys.iter().map(String::as_str).collect();
                Reply::Int(store.del(&keys) as i64)
            }
            None => Reply::Error("ERR key is not UTF-8".into()),
        },
        "SET" | "GET" | "INCR" | "INCRBY" | "RPUSH" | "BLPOP" | "DEL" => arity(&name),
        _ => Reply::Error(format!("ERR unknown command '{}'", String::from_utf8_lossy(&args[0]))),
    }
}
