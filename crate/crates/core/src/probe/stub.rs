//! In-process scoring stubs and a minimal HTTP server around them, for tests
//! and offline runs.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use super::wire::{
    ErrorBody, ErrorDetail, ScoreRequest, ScoreResponse, CODE_BAD_REQUEST, CODE_CAPABILITY, CODE_UNSCOREABLE,
    SCORE_PATH,
};
use super::LogitsClient;
use crate::axes::cosine;
use crate::embed_store::{resolve_word, EmbeddingSpace};
use crate::error::{Error, Result};
use crate::lexicon::FeatureLexicon;

fn unscoreable(candidate: &str) -> Error {
    Error::Protocol(format!("candidate `{candidate}` cannot be scored"))
}

/// Stub whose log-odds are linear in the cosine between the probed word's
/// (possibly overridden) vector and a hidden direction per feature.
///
/// A positive antonym of feature `f` gets log-probability
/// `gain * cos(v, h_f)`, a negative antonym its negation.
pub struct LinearStub {
    space: EmbeddingSpace,
    hidden: Vec<Vec<f64>>,
    antonyms: HashMap<String, (usize, f64)>,
    gain: f64,
    supports_overrides: bool,
    calls: AtomicUsize,
}

impl LinearStub {
    pub fn new(space: EmbeddingSpace, lexicon: &FeatureLexicon, hidden: Vec<Vec<f64>>, gain: f64) -> Result<Self> {
        if hidden.len() != lexicon.len() {
            return Err(Error::DimensionMismatch { expected: lexicon.len(), found: hidden.len() });
        }
        if let Some(h) = hidden.iter().find(|h| h.len() != space.dim()) {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: h.len() });
        }
        let mut antonyms = HashMap::new();
        for (f, spec) in lexicon.features().iter().enumerate() {
            for pair in &spec.pairs {
                antonyms.entry(pair.positive.clone()).or_insert((f, 1.0));
                antonyms.entry(pair.negative.clone()).or_insert((f, -1.0));
            }
        }
        Ok(Self { space, hidden, antonyms, gain, supports_overrides: true, calls: AtomicUsize::new(0) })
    }

    /// Makes the stub reject any request that carries overrides.
    pub fn without_overrides(mut self) -> Self {
        self.supports_overrides = false;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl LogitsClient for LinearStub {
    fn score(&self, request: &ScoreRequest) -> Result<Vec<f64>> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if !request.embedding_overrides.is_empty() && !self.supports_overrides {
            return Err(Error::Capability("embedding overrides are not supported".into()));
        }
        for o in &request.embedding_overrides {
            if self.space.vocab().id(&o.token).is_none() {
                return Err(Error::Capability(format!("override token {:?} is not in the vocabulary", o.token)));
            }
            if o.vector.len() != self.space.dim() {
                return Err(Error::Protocol(format!("override vector has {} entries", o.vector.len())));
            }
        }
        let word = request.probed_word().ok_or_else(|| Error::Protocol("cannot find the probed word".into()))?;
        let id = resolve_word(&self.space, word)
            .token_id
            .ok_or_else(|| Error::Protocol(format!("word {word:?} is not a single token")))?;
        let token = self.space.vocab().token(id).unwrap_or_default();
        let v: Vec<f64> = match request.embedding_overrides.iter().find(|o| o.token == token) {
            Some(o) => o.vector.iter().map(|&x| f64::from(x)).collect(),
            None => self.space.row_f64(id),
        };
        request
            .candidates
            .iter()
            .map(|c| {
                let &(f, polarity) = self.antonyms.get(c).ok_or_else(|| unscoreable(c))?;
                Ok(polarity * self.gain * cosine(&v, &self.hidden[f]))
            })
            .collect()
    }
}

/// Stub answering from a fixed table keyed by the ordered candidate pair.
#[derive(Debug, Default, Clone)]
pub struct TableStub {
    table: HashMap<(String, String), (f64, f64)>,
}

impl TableStub {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, first: &str, second: &str, l_first: f64, l_second: f64) -> Self {
        self.table.insert((first.to_string(), second.to_string()), (l_first, l_second));
        self
    }
}

impl LogitsClient for TableStub {
    fn score(&self, request: &ScoreRequest) -> Result<Vec<f64>> {
        let [a, b] = request.candidates.as_slice() else {
            return Err(Error::Protocol("expected exactly two candidates".into()));
        };
        self.table
            .get(&(a.clone(), b.clone()))
            .map(|&(x, y)| vec![x, y])
            .ok_or_else(|| unscoreable(a))
    }
}

/// Serves a [`LogitsClient`] over HTTP on a loopback port.
///
/// Errors are mapped to status codes: capability errors to 501, unscoreable
/// candidates to 422, anything else to 400. The server stops on drop.
pub struct StubServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
    requests: Arc<Mutex<Vec<String>>>,
}

impl StubServer {
    pub fn spawn(client: Arc<dyn LogitsClient + Send + Sync>) -> std::io::Result<Self> {
        Self::spawn_flaky(client, 0)
    }

    /// Like [`StubServer::spawn`], but the first `failures` requests get a 503.
    pub fn spawn_flaky(client: Arc<dyn LogitsClient + Send + Sync>, failures: usize) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let requests = Arc::new(Mutex::new(Vec::new()));
        let remaining = Arc::new(AtomicUsize::new(failures));
        let (stop2, requests2) = (stop.clone(), requests.clone());
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if stop2.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let (client, requests, remaining) = (client.clone(), requests2.clone(), remaining.clone());
                std::thread::spawn(move || {
                    let _ = serve(stream, client.as_ref(), &requests, &remaining);
                });
            }
        });
        Ok(Self { addr, stop, handle: Some(handle), requests })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Raw bodies of every request received so far.
    pub fn request_bodies(&self) -> Vec<String> {
        self.requests.lock().map(|r| r.clone()).unwrap_or_default()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(
    stream: TcpStream,
    client: &(dyn LogitsClient + Send + Sync),
    requests: &Mutex<Vec<String>>,
    remaining_failures: &AtomicUsize,
) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line.trim().is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.trim().eq_ignore_ascii_case("content-length") {
                content_length = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    let body = String::from_utf8_lossy(&body).into_owned();

    let mut parts = request_line.split_whitespace();
    let (method, path) = (parts.next().unwrap_or(""), parts.next().unwrap_or(""));
    let (status, payload) = if method != "POST" || path != SCORE_PATH {
        (404, error_json("not_found", "no such route", None))
    } else {
        if let Ok(mut r) = requests.lock() {
            r.push(body.clone());
        }
        if remaining_failures
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok()
        {
            (503, error_json("unavailable", "try again", None))
        } else {
            respond(client, &body)
        }
    };
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        422 => "Unprocessable Entity",
        501 => "Not Implemented",
        _ => "Service Unavailable",
    };
    let mut out = stream;
    write!(
        out,
        "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{payload}",
        payload.len()
    )?;
    out.flush()
}

fn respond(client: &(dyn LogitsClient + Send + Sync), body: &str) -> (u16, String) {
    let request: ScoreRequest = match serde_json::from_str(body) {
        Ok(r) => r,
        Err(e) => return (400, error_json(CODE_BAD_REQUEST, &e.to_string(), None)),
    };
    match client.score(&request) {
        Ok(l) => {
            let logprobs = l.into_iter().map(|x| x.is_finite().then_some(x)).collect();
            (200, serde_json::to_string(&ScoreResponse { logprobs }).unwrap_or_default())
        }
        Err(Error::Capability(m)) => (501, error_json(CODE_CAPABILITY, &m, None)),
        Err(Error::Protocol(m)) if m.contains("cannot be scored") => {
            let candidate = m.split('`').nth(1).map(str::to_string);
            (422, error_json(CODE_UNSCOREABLE, &m, candidate))
        }
        Err(e) => (400, error_json(CODE_BAD_REQUEST, &e.to_string(), None)),
    }
}

fn error_json(code: &str, message: &str, candidate: Option<String>) -> String {
    let body = ErrorBody { error: ErrorDetail { code: code.into(), message: message.into(), candidate } };
    serde_json::to_string(&body).unwrap_or_default()
}
