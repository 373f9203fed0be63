#![allow(dead_code)]

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use serde_json::Value;

pub const SERVER_BIN: &str = env!("CARGO_BIN_EXE_cloudcap-server");
pub const AGENT_BIN: &str = env!("CARGO_BIN_EXE_agent");

/// A `cloudcap-server` child process on an ephemeral port. Killed on drop.
pub struct Server {
    pub child: Child,
    pub url: String,
    pub data_dir: PathBuf,
}

impl Server {
    pub fn start(data_dir: &Path, extra_env: &[(&str, &str)]) -> Server {
        Self::try_start(data_dir, extra_env).unwrap_or_else(|e| panic!("server did not start: {e}"))
    }

    pub fn try_start(data_dir: &Path, extra_env: &[(&str, &str)]) -> Result<Server, String> {
        let mut cmd = Command::new(SERVER_BIN);
        cmd.env("CLOUDCAP_BIND", "127.0.0.1")
            .env("CLOUDCAP_PORT", "0")
            .env("CLOUDCAP_DATA_DIR", data_dir)
            .env("RUST_LOG", "warn")
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        for (k, v) in extra_env {
            cmd.env(k, v);
        }
        let mut child = cmd.spawn().map_err(|e| e.to_string())?;
        let stdout = child.stdout.take().unwrap();
        let mut line = String::new();
        BufReader::new(stdout).read_line(&mut line).map_err(|e| e.to_string())?;
        let Some(url) = line.trim().strip_prefix("listening on ").map(str::to_string) else {
            let status = child.wait().map_err(|e| e.to_string())?;
            let mut err = String::new();
            child.stderr.take().unwrap().read_to_string(&mut err).ok();
            return Err(format!("exit {status}: {err}"));
        };
        drain(child.stderr.take().unwrap());
        Ok(Server {
            child,
            url,
            data_dir: data_dir.to_path_buf(),
        })
    }

    /// SIGKILL, no cleanup.
    pub fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }

    pub fn api(&self, path: &str) -> String {
        format!("{}/api/v1{path}", self.url)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn drain(stream: impl Read + Send + 'static) {
    thread::spawn(move || {
        let mut sink = Vec::new();
        let _ = BufReader::new(stream).read_to_end(&mut sink);
    });
}

pub fn client() -> Client {
    Client::builder().timeout(Duration::from_secs(60)).build().unwrap()
}

pub fn upload(client: &Client, server: &Server, body: Vec<u8>, name: &str) -> (u16, Value) {
    let r = client.post(server.api("/captures")).header("x-filename", name).body(body).send().unwrap();
    let status = r.status().as_u16();
    (status, r.json().unwrap_or(Value::Null))
}

pub fn status(client: &Client, server: &Server, id: &str) -> Value {
    client.get(server.api(&format!("/captures/{id}"))).send().unwrap().json().unwrap()
}

/// Polls until the capture is complete or failed.
pub fn wait_terminal(client: &Client, server: &Server, id: &str, limit: Duration) -> Value {
    let start = Instant::now();
    loop {
        let s = status(client, server, id);
        if s["status"] == "complete" || s["status"] == "failed" {
            return s;
        }
        assert!(start.elapsed() < limit, "capture {id} stuck in {}", s["status"]);
        thread::sleep(Duration::from_millis(20));
    }
}

pub fn corpus(name: &str) -> PathBuf {
    cloudcap_testkit::testdata_dir().join("corpus").join(name)
}

pub fn malformed(name: &str) -> PathBuf {
    cloudcap_testkit::testdata_dir().join("malformed").join(name)
}

pub fn reference_counts() -> HashMap<String, u64> {
    let text = std::fs::read_to_string(cloudcap_testkit::testdata_dir().join("reference/packet_counts.csv")).unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let (f, n) = l.split_once(',').unwrap();
            (f.to_string(), n.parse().unwrap())
        })
        .collect()
}

/// One scripted answer of a [`StubServer`].
#[derive(Clone)]
pub struct Reply {
    pub status: u16,
    pub body: String,
    pub delay: Duration,
}

impl Reply {
    pub fn json(status: u16, body: &str) -> Reply {
        Reply {
            status,
            body: body.to_string(),
            delay: Duration::ZERO,
        }
    }

    pub fn slow(mut self, delay: Duration) -> Reply {
        self.delay = delay;
        self
    }
}

/// Minimal HTTP server that answers each request by method and path prefix
/// from a script, consuming replies in order and repeating the last one.
pub struct StubServer {
    pub url: String,
    pub requests: Arc<Mutex<Vec<String>>>,
}

type Routes = Arc<Mutex<Vec<(String, Vec<Reply>)>>>;

impl StubServer {
    pub fn start(routes: Vec<(&str, Vec<Reply>)>) -> StubServer {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let routes: Routes = Arc::new(Mutex::new(routes.into_iter().map(|(p, r)| (p.to_string(), r)).collect()));
        let log = requests.clone();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let routes = routes.clone();
                let log = log.clone();
                thread::spawn(move || serve_one(stream, &routes, &log));
            }
        });
        StubServer { url, requests }
    }

    pub fn count(&self, prefix: &str) -> usize {
        self.requests.lock().unwrap().iter().filter(|r| r.starts_with(prefix)).count()
    }
}

fn serve_one(mut stream: TcpStream, routes: &Mutex<Vec<(String, Vec<Reply>)>>, log: &Mutex<Vec<String>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).is_err() {
        return;
    }
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                content_length = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    let _ = reader.read_exact(&mut body);
    let mut parts = request_line.split_whitespace();
    let method = parts.next().unwrap_or("").to_string();
    let path = parts.next().unwrap_or("").to_string();
    let key = format!("{method} {path}");
    log.lock().unwrap().push(key.clone());

    let reply = {
        let mut routes = routes.lock().unwrap();
        routes.iter_mut().find(|(prefix, _)| key.starts_with(prefix.as_str())).map(|(_, replies)| {
            if replies.len() > 1 {
                replies.remove(0)
            } else {
                replies[0].clone()
            }
        })
    };
    let reply = reply.unwrap_or_else(|| Reply::json(404, "{\"error\":\"NotFound\",\"message\":\"stub\"}"));
    thread::sleep(reply.delay);
    let head = format!(
        "HTTP/1.1 {} Stub\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
        reply.status,
        reply.body.len()
    );
    let _ = stream.write_all(head.as_bytes());
    let _ = stream.write_all(reply.body.as_bytes());
}
