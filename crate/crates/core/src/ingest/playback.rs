//! Recorded JSON-RPC fixtures and a local playback server.
//!
//! A fixture is a list of `(method, params) -> result` exchanges. It can be
//! recorded from a live node through [`RecordingTransport`], or synthesized
//! from canonical blocks with [`RpcFixture::from_blocks`]. [`PlaybackServer`]
//! serves a fixture over HTTP so the real client path can run offline.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::rpc::{block_to_verbose, RpcError, RpcTransport};
use crate::model::BlockRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub method: String,
    pub params: Value,
    pub result: Value,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RpcFixture {
    responses: BTreeMap<String, Value>,
}

fn key(method: &str, params: &Value) -> String {
    format!("{method} {params}")
}

impl RpcFixture {
    pub fn insert(&mut self, method: &str, params: Value, result: Value) {
        self.responses.insert(key(method, &params), result);
    }

    pub fn lookup(&self, method: &str, params: &Value) -> Option<&Value> {
        self.responses.get(&key(method, params))
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    /// Answers the three block-sync methods for `blocks`, as a node whose
    /// tip is the last block would.
    pub fn from_blocks(blocks: &[BlockRecord]) -> RpcFixture {
        let mut f = RpcFixture::default();
        if let Some(last) = blocks.last() {
            f.insert("getblockcount", json!([]), json!(last.height));
        }
        for b in blocks {
            let hash = b.hash.to_string();
            f.insert("getblockhash", json!([b.height]), json!(hash));
            f.insert("getblock", json!([hash, 2]), block_to_verbose(b));
        }
        f
    }

    pub fn exchanges(&self) -> Vec<Exchange> {
        self.responses
            .iter()
            .map(|(k, result)| {
                let (method, params) = k.split_once(' ').expect("fixture key");
                Exchange {
                    method: method.to_owned(),
                    params: serde_json::from_str(params).expect("fixture params"),
                    result: result.clone(),
                }
            })
            .collect()
    }

    /// One JSON exchange per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in self.exchanges() {
            writeln!(w, "{}", serde_json::to_string(&e)?)?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> std::io::Result<RpcFixture> {
        let mut f = RpcFixture::default();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: Exchange = serde_json::from_str(&line)?;
            f.insert(&e.method, e.params, e.result);
        }
        Ok(f)
    }
}

/// Serves answers straight from a fixture, without HTTP.
impl RpcTransport for RpcFixture {
    fn call(&self, method: &str, params: Value) -> Result<Value, RpcError> {
        self.lookup(method, &params)
            .cloned()
            .ok_or_else(|| RpcError::Server { code: -8, message: format!("no recorded answer for {method} {params}") })
    }
}

/// Wraps a transport and records every successful exchange.
pub struct RecordingTransport<T> {
    inner: T,
    recorded: Mutex<RpcFixture>,
}

impl<T: RpcTransport> RecordingTransport<T> {
    pub fn new(inner: T) -> Self {
        RecordingTransport { inner, recorded: Mutex::new(RpcFixture::default()) }
    }

    pub fn fixture(&self) -> RpcFixture {
        self.recorded.lock().unwrap().clone()
    }
}

impl<T: RpcTransport> RpcTransport for RecordingTransport<T> {
    fn call(&self, method: &str, params: Value) -> Result<Value, RpcError> {
        let result = self.inner.call(method, params.clone())?;
        self.recorded.lock().unwrap().insert(method, params, result.clone());
        Ok(result)
    }
}

/// Minimal HTTP/1.1 server answering JSON-RPC from a fixture.
pub struct PlaybackServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
    requests: Arc<AtomicUsize>,
}

impl PlaybackServer {
    pub fn start(fixture: RpcFixture) -> std::io::Result<PlaybackServer> {
        PlaybackServer::start_flaky(fixture, 0)
    }

    /// Like [`PlaybackServer::start`], but the first `fail_first` requests
    /// get an HTTP 503.
    pub fn start_flaky(fixture: RpcFixture, fail_first: usize) -> std::io::Result<PlaybackServer> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let requests = Arc::new(AtomicUsize::new(0));
        let fixture = Arc::new(fixture);
        let (stop2, requests2) = (stop.clone(), requests.clone());
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if stop2.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let fixture = fixture.clone();
                let n = requests2.fetch_add(1, Ordering::SeqCst);
                std::thread::spawn(move || {
                    let _ = serve_one(stream, &fixture, n < fail_first);
                });
            }
        });
        Ok(PlaybackServer { addr, stop, handle: Some(handle), requests })
    }

    pub fn url(&self) -> String {
        format!("http://{}/", self.addr)
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl Drop for PlaybackServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the accept loop.
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve_one(stream: TcpStream, fixture: &RpcFixture, fail: bool) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut content_length = 0usize;
    let mut line = String::new();
    reader.read_line(&mut line)?;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;

    let (status, payload) = if fail {
        ("503 Service Unavailable", String::from("busy"))
    } else {
        match serde_json::from_slice::<Value>(&body) {
            Ok(req) => {
                let method = req.get("method").and_then(Value::as_str).unwrap_or("");
                let params = req.get("params").cloned().unwrap_or(json!([]));
                let id = req.get("id").cloned().unwrap_or(Value::Null);
                match fixture.lookup(method, &params) {
                    Some(result) => ("200 OK", json!({"result": result, "error": null, "id": id}).to_string()),
                    None => (
                        "500 Internal Server Error",
                        json!({"result": null, "error": {"code": -8, "message": "Block height out of range"}, "id": id})
                            .to_string(),
                    ),
                }
            }
            Err(_) => ("400 Bad Request", String::from("bad request")),
        }
    };
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    )?;
    stream.flush()
}
