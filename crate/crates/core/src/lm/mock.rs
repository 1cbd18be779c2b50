//! Loopback next-token server speaking the v1 wire format. One request per
//! connection; meant for tests and local smoke runs.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockBehavior {
    /// Uniform vector of the requested size.
    Uniform,
    /// One entry more than requested.
    WrongLength,
    /// Accepts the request and stays silent for the given time.
    Stall(Duration),
    /// 200 with a body that is not JSON.
    Garbage,
    /// Empty response with this status code.
    Status(u16),
}

#[derive(Default)]
struct Shared {
    requests: AtomicU64,
    stop: AtomicBool,
    last_auth: Mutex<Option<String>>,
}

pub struct MockServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Binds an ephemeral loopback port and serves in a background thread.
    pub fn start(behavior: MockBehavior) -> io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared::default());
        let sh = shared.clone();
        let handle = thread::spawn(move || {
            for conn in listener.incoming() {
                if sh.stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = conn else { continue };
                let sh = sh.clone();
                thread::spawn(move || {
                    let _ = serve(stream, behavior, &sh);
                });
            }
        });
        Ok(MockServer {
            addr,
            shared,
            handle: Some(handle),
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Requests received so far.
    pub fn requests(&self) -> u64 {
        self.shared.requests.load(Ordering::SeqCst)
    }

    pub fn last_authorization(&self) -> Option<String> {
        self.shared.last_auth.lock().unwrap().clone()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(stream: TcpStream, behavior: MockBehavior, sh: &Shared) -> io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.is_empty() {
        return Ok(());
    }
    let mut length = 0usize;
    let mut auth = None;
    loop {
        let mut h = String::new();
        if reader.read_line(&mut h)? == 0 || h.trim().is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            let k = k.trim().to_ascii_lowercase();
            if k == "content-length" {
                length = v.trim().parse().unwrap_or(0);
            } else if k == "authorization" {
                auth = Some(v.trim().to_string());
            }
        }
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body)?;
    sh.requests.fetch_add(1, Ordering::SeqCst);
    *sh.last_auth.lock().unwrap() = auth;

    let size = serde_json::from_slice::<Value>(&body)
        .ok()
        .and_then(|v| v["vocab_size"].as_u64())
        .unwrap_or(0) as usize;
    let (status, payload) = match behavior {
        MockBehavior::Uniform => (200, uniform(size)),
        MockBehavior::WrongLength => (200, uniform(size + 1)),
        MockBehavior::Garbage => (200, "not json".to_string()),
        MockBehavior::Status(code) => (code, String::new()),
        MockBehavior::Stall(d) => {
            thread::sleep(d);
            return Ok(());
        }
    };
    let mut out = stream;
    write!(
        out,
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    )?;
    out.flush()
}

fn uniform(n: usize) -> String {
    let p = if n == 0 { 0.0 } else { 1.0 / n as f64 };
    json!({ "probs": vec![p; n] }).to_string()
}
