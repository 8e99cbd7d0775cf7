//! Node JSON-RPC ingestion.
//!
//! Speaks the `getblockcount` / `getblockhash` / `getblock <hash> 2` dialect
//! of zcashd-style full nodes. Amounts are taken from the `*Zat` integer
//! fields when present and from the decimal fields otherwise.

use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value};
use thiserror::Error;

use super::{IngestBatch, IngestError, Source};
use crate::amount::Amount;
use crate::model::{BlockRecord, Hash256, JoinSplitRecord, OutPoint, TxOutput, TxRecord};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RpcError {
    /// Connection-level failure or 5xx answer; worth retrying.
    #[error("transport error: {0}")]
    Transport(String),
    #[error("node returned error {code}: {message}")]
    Server { code: i64, message: String },
    #[error("malformed response: {0}")]
    Malformed(String),
}

impl RpcError {
    fn is_transient(&self) -> bool {
        matches!(self, RpcError::Transport(_))
    }
}

pub trait RpcTransport: Send + Sync {
    fn call(&self, method: &str, params: Value) -> Result<Value, RpcError>;
}

/// HTTP JSON-RPC 1.0 transport with optional basic auth.
pub struct HttpTransport {
    url: String,
    auth_header: Option<String>,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(url: impl Into<String>, credentials: Option<(String, String)>) -> HttpTransport {
        let auth_header = credentials.map(|(user, pass)| {
            format!("Basic {}", base64::engine::general_purpose::STANDARD.encode(format!("{user}:{pass}")))
        });
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpTransport { url: url.into(), auth_header, agent }
    }
}

impl RpcTransport for HttpTransport {
    fn call(&self, method: &str, params: Value) -> Result<Value, RpcError> {
        let body = json!({"jsonrpc": "1.0", "id": "zlinkage", "method": method, "params": params});
        let mut req = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(auth) = &self.auth_header {
            req = req.header("Authorization", auth);
        }
        let mut resp = req.send(body.to_string()).map_err(|e| RpcError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if matches!(status, 429 | 502..=504) {
            return Err(RpcError::Transport(format!("HTTP {status}")));
        }
        if status == 401 || status == 403 {
            return Err(RpcError::Server { code: i64::from(status), message: "unauthorized".into() });
        }
        // RPC-level failures come back as HTTP 500 or 404 with a JSON error body.
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| RpcError::Transport(e.to_string()))?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| RpcError::Malformed(format!("HTTP {status}: {e}")))?;
        if let Some(err) = v.get("error").filter(|e| !e.is_null()) {
            return Err(RpcError::Server {
                code: err.get("code").and_then(Value::as_i64).unwrap_or(0),
                message: err.get("message").and_then(Value::as_str).unwrap_or("").to_owned(),
            });
        }
        v.get("result").cloned().ok_or_else(|| RpcError::Malformed("missing result".into()))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 5, base_delay: Duration::from_millis(100), max_delay: Duration::from_secs(5) }
    }
}

/// Client with retry and bounded parallel block fetching.
pub struct RpcClient<T> {
    transport: T,
    pub retry: RetryPolicy,
    /// Upper bound on in-flight block requests.
    pub concurrency: usize,
}

impl<T: RpcTransport> RpcClient<T> {
    pub fn new(transport: T) -> Self {
        RpcClient { transport, retry: RetryPolicy::default(), concurrency: 4 }
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    fn call(&self, method: &str, params: Value) -> Result<Value, RpcError> {
        let mut delay = self.retry.base_delay;
        let mut attempt = 1;
        loop {
            match self.transport.call(method, params.clone()) {
                Err(e) if e.is_transient() && attempt < self.retry.max_attempts => {
                    std::thread::sleep(delay);
                    delay = (delay * 2).min(self.retry.max_delay);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    pub fn tip_height(&self) -> Result<u64, RpcError> {
        self.call("getblockcount", json!([]))?
            .as_u64()
            .ok_or_else(|| RpcError::Malformed("getblockcount is not an integer".into()))
    }

    pub fn block_at(&self, height: u64) -> Result<BlockRecord, RpcError> {
        let hash = self.call("getblockhash", json!([height]))?;
        let hash = hash.as_str().ok_or_else(|| RpcError::Malformed("getblockhash is not a string".into()))?;
        let raw = self.call("getblock", json!([hash, 2]))?;
        let block = block_from_verbose(&raw)?;
        if block.height != height {
            return Err(RpcError::Malformed(format!("asked for height {height}, got {}", block.height)));
        }
        Ok(block)
    }

    /// Fetches blocks `from..=to`, keeping at most `concurrency` requests in
    /// flight, and returns them in height order.
    pub fn fetch_range(&self, from: u64, to: u64) -> Result<IngestBatch, IngestError> {
        if from > to {
            return Err(IngestError::InvalidRange { from, to });
        }
        let tip = self.tip_height()?;
        if to > tip {
            return Err(IngestError::BeyondTip { requested: to, tip });
        }
        let heights: Vec<u64> = (from..=to).collect();
        let mut blocks = Vec::with_capacity(heights.len());
        for chunk in heights.chunks(self.concurrency.max(1)) {
            let fetched: Vec<Result<BlockRecord, RpcError>> = std::thread::scope(|s| {
                let handles: Vec<_> = chunk.iter().map(|&h| s.spawn(move || self.block_at(h))).collect();
                handles.into_iter().map(|h| h.join().expect("fetch thread panicked")).collect()
            });
            for b in fetched {
                let b = b?;
                b.validate().map_err(|e| IngestError::Rpc(RpcError::Malformed(e.to_string())))?;
                blocks.push(b);
            }
        }
        Ok(IngestBatch { blocks, source: Source::Rpc })
    }
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value, RpcError> {
    v.get(key).ok_or_else(|| RpcError::Malformed(format!("missing field {key:?}")))
}

fn hash_field(v: &Value, key: &str) -> Result<Hash256, RpcError> {
    let s = field(v, key)?.as_str().ok_or_else(|| RpcError::Malformed(format!("{key} is not a string")))?;
    Hash256::from_display_hex(s).map_err(|e| RpcError::Malformed(e.to_string()))
}

fn amount_field(v: &Value, key: &str) -> Result<Amount, RpcError> {
    if let Some(z) = v.get(format!("{key}Zat")) {
        let z = z.as_u64().ok_or_else(|| RpcError::Malformed(format!("{key}Zat is not a non-negative integer")))?;
        return Amount::from_zat(z).ok_or_else(|| RpcError::Malformed(format!("{key}Zat over the coin cap")));
    }
    // Decimal JSON numbers print with the shortest round-tripping digits,
    // which for ≤8-decimal coin values is the original string.
    let n = field(v, key)?;
    let s = match n {
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        _ => return Err(RpcError::Malformed(format!("{key} is not a number"))),
    };
    Amount::parse_coins(&s).map_err(|e| RpcError::Malformed(format!("{key}: {e}")))
}

fn u64_field(v: &Value, key: &str) -> Result<u64, RpcError> {
    field(v, key)?.as_u64().ok_or_else(|| RpcError::Malformed(format!("{key} is not an integer")))
}

/// Converts a `getblock <hash> 2` result into a canonical record.
pub fn block_from_verbose(v: &Value) -> Result<BlockRecord, RpcError> {
    let txs_json = field(v, "tx")?.as_array().ok_or_else(|| RpcError::Malformed("tx is not an array".into()))?;
    let mut txs = Vec::with_capacity(txs_json.len());
    for t in txs_json {
        let txid = hash_field(t, "txid")?;
        let vin = field(t, "vin")?.as_array().ok_or_else(|| RpcError::Malformed("vin is not an array".into()))?;
        let is_coinbase = vin.first().is_some_and(|i| i.get("coinbase").is_some());
        let mut inputs = Vec::new();
        if !is_coinbase {
            for i in vin {
                inputs.push(OutPoint { txid: hash_field(i, "txid")?, vout: u64_field(i, "vout")? as u32 });
            }
        }
        let mut outputs = Vec::new();
        for o in field(t, "vout")?.as_array().ok_or_else(|| RpcError::Malformed("vout is not an array".into()))? {
            let script_hex = o
                .get("scriptPubKey")
                .and_then(|s| s.get("hex"))
                .and_then(Value::as_str)
                .unwrap_or("");
            let script_id = hex::decode(script_hex).map_err(|e| RpcError::Malformed(format!("script hex: {e}")))?;
            outputs.push(TxOutput { value: amount_field(o, "value")?, script_id });
        }
        let mut joinsplits = Vec::new();
        if let Some(js) = t.get("vjoinsplit").and_then(Value::as_array) {
            for (i, j) in js.iter().enumerate() {
                joinsplits.push(JoinSplitRecord {
                    txid,
                    js_index: i as u32,
                    vpub_old: amount_field(j, "vpub_old")?,
                    vpub_new: amount_field(j, "vpub_new")?,
                });
            }
        }
        let lock_time = t.get("locktime").and_then(Value::as_u64).unwrap_or(0) as u32;
        txs.push(TxRecord { txid, is_coinbase, inputs, outputs, joinsplits, lock_time });
    }
    Ok(BlockRecord {
        height: u64_field(v, "height")?,
        hash: hash_field(v, "hash")?,
        time: field(v, "time")?.as_i64().ok_or_else(|| RpcError::Malformed("time is not an integer".into()))?,
        txs,
    })
}

/// Renders a canonical record the way a node answers `getblock <hash> 2`.
pub fn block_to_verbose(b: &BlockRecord) -> Value {
    let coin = |a: Amount| a.as_zat() as f64 / crate::amount::COIN as f64;
    let txs: Vec<Value> = b
        .txs
        .iter()
        .map(|t| {
            let vin: Vec<Value> = if t.is_coinbase {
                vec![json!({"coinbase": format!("{:08x}", b.height), "sequence": 4294967295u32})]
            } else {
                t.inputs.iter().map(|i| json!({"txid": i.txid.to_string(), "vout": i.vout})).collect()
            };
            let vout: Vec<Value> = t
                .outputs
                .iter()
                .enumerate()
                .map(|(n, o)| {
                    json!({"value": coin(o.value), "valueZat": o.value.as_zat(), "n": n,
                           "scriptPubKey": {"hex": hex::encode(&o.script_id)}})
                })
                .collect();
            let vjoinsplit: Vec<Value> = t
                .joinsplits
                .iter()
                .map(|j| {
                    json!({"vpub_old": coin(j.vpub_old), "vpub_oldZat": j.vpub_old.as_zat(),
                           "vpub_new": coin(j.vpub_new), "vpub_newZat": j.vpub_new.as_zat()})
                })
                .collect();
            json!({"txid": t.txid.to_string(), "version": if t.joinsplits.is_empty() { 1 } else { 2 },
                   "locktime": t.lock_time, "vin": vin, "vout": vout, "vjoinsplit": vjoinsplit})
        })
        .collect();
    json!({"hash": b.hash.to_string(), "height": b.height, "time": b.time, "tx": txs})
}
