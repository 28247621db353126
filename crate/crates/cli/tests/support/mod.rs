//! A minimal local HTTP stub that plays the external grader.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

// Each integration-test binary compiles its own copy; not every binary uses
// every behavior.
#[allow(dead_code)]
#[derive(Clone)]
pub enum StubBehavior {
    /// Always answer with this status and JSON body.
    Respond { status: u16, body: String },
    /// Sleep before answering (for timeout tests).
    RespondAfter { delay: Duration, body: String },
    /// Drop the first `failures` connections, then answer normally.
    FailConnectionsThenRespond { failures: usize, body: String },
}

pub struct StubGrader {
    pub endpoint: String,
    address: std::net::SocketAddr,
    hits: Arc<AtomicUsize>,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl StubGrader {
    pub fn start(behavior: StubBehavior) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
        let address = listener.local_addr().expect("local addr");
        let hits = Arc::new(AtomicUsize::new(0));
        let shutdown = Arc::new(AtomicBool::new(false));

        let thread_hits = Arc::clone(&hits);
        let thread_shutdown = Arc::clone(&shutdown);
        let handle = std::thread::spawn(move || {
            for connection in listener.incoming() {
                if thread_shutdown.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(mut stream) = connection else { continue };
                let hit = thread_hits.fetch_add(1, Ordering::SeqCst) + 1;
                match &behavior {
                    StubBehavior::Respond { status, body } => {
                        read_request(&mut stream);
                        respond(&mut stream, *status, body);
                    }
                    StubBehavior::RespondAfter { delay, body } => {
                        read_request(&mut stream);
                        std::thread::sleep(*delay);
                        respond(&mut stream, 200, body);
                    }
                    StubBehavior::FailConnectionsThenRespond { failures, body } => {
                        if hit <= *failures {
                            drop(stream);
                        } else {
                            read_request(&mut stream);
                            respond(&mut stream, 200, body);
                        }
                    }
                }
            }
        });

        StubGrader {
            endpoint: format!("http://{address}/grade"),
            address,
            hits,
            shutdown,
            handle: Some(handle),
        }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for StubGrader {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Wake the accept loop so the thread can observe the flag.
        let _ = TcpStream::connect(self.address);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

/// Reads one HTTP request: headers, then a Content-Length body if present.
fn read_request(stream: &mut TcpStream) {
    let _ = stream.set_read_timeout(Some(Duration::from_secs(5)));
    let mut buffer = Vec::new();
    let mut chunk = [0u8; 512];
    let header_end = loop {
        match stream.read(&mut chunk) {
            Ok(0) => return,
            Ok(n) => {
                buffer.extend_from_slice(&chunk[..n]);
                if let Some(pos) = find_header_end(&buffer) {
                    break pos;
                }
            }
            Err(_) => return,
        }
    };
    let headers = String::from_utf8_lossy(&buffer[..header_end]).to_lowercase();
    let content_length: usize = headers
        .lines()
        .find_map(|line| line.strip_prefix("content-length:"))
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0);
    let mut body_read = buffer.len() - (header_end + 4);
    while body_read < content_length {
        match stream.read(&mut chunk) {
            Ok(0) | Err(_) => break,
            Ok(n) => body_read += n,
        }
    }
}

fn find_header_end(buffer: &[u8]) -> Option<usize> {
    buffer.windows(4).position(|w| w == b"\r\n\r\n")
}

fn respond(stream: &mut TcpStream, status: u16, body: &str) {
    let reason = if status == 200 { "OK" } else { "Error" };
    let response = format!(
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    let _ = stream.write_all(response.as_bytes());
    let _ = stream.flush();
}
