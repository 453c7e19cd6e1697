//! Brute-force reference implementations and test fixtures.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use acbo_core::dag::Dag;
use acbo_core::indep::{CiStatement, Hypothesis, PremiseSet};

/// Every DAG on `d` variables, by trying all three states of every pair
/// and keeping the acyclic results.
pub fn brute_dags(d: usize) -> Vec<Dag> {
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|a| (a + 1..d).map(move |b| (a, b))).collect();
    let total = 3usize.pow(pairs.len() as u32);
    let mut out = Vec::new();
    for code in 0..total {
        let mut c = code;
        let mut edges = Vec::new();
        for &(a, b) in &pairs {
            match c % 3 {
                1 => edges.push((a, b)),
                2 => edges.push((b, a)),
                _ => {}
            }
            c /= 3;
        }
        if let Ok(g) = Dag::from_edges(d, &edges) {
            out.push(g);
        }
    }
    out
}

fn simple_paths(g: &Dag, x: usize, y: usize) -> Vec<Vec<usize>> {
    fn walk(g: &Dag, path: &mut Vec<usize>, y: usize, out: &mut Vec<Vec<usize>>) {
        let last = *path.last().unwrap();
        if last == y {
            out.push(path.clone());
            return;
        }
        for next in 0..g.num_vars() {
            if g.adjacent(last, next) && !path.contains(&next) {
                path.push(next);
                walk(g, path, y, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(g, &mut vec![x], y, &mut out);
    out
}

/// d-separation by enumerating every simple path and testing whether it
/// is blocked.
pub fn brute_dsep(g: &Dag, x: usize, y: usize, cond: &[usize]) -> bool {
    simple_paths(g, x, y).iter().all(|path| {
        path.windows(3).any(|w| {
            let (a, m, b) = (w[0], w[1], w[2]);
            let collider = g.has_edge(a, m) && g.has_edge(b, m);
            if collider {
                let opened = cond.contains(&m) || g.descendants(m).iter().any(|v| cond.contains(v));
                !opened
            } else {
                cond.contains(&m)
            }
        })
    })
}

/// All conditional independences of `g` (every pair, every conditioning set).
pub fn full_ci_set(g: &Dag) -> Vec<(usize, usize, u64)> {
    let d = g.num_vars();
    let mut out = Vec::new();
    for x in 0..d {
        for y in x + 1..d {
            for mask in 0u64..(1 << d) {
                if mask & ((1 << x) | (1 << y)) != 0 {
                    continue;
                }
                let cond: Vec<usize> = (0..d).filter(|&v| mask & (1 << v) != 0).collect();
                if brute_dsep(g, x, y, &cond) {
                    out.push((x, y, mask));
                }
            }
        }
    }
    out
}

pub fn brute_satisfies(p: &PremiseSet, g: &Dag) -> bool {
    p.statements
        .iter()
        .all(|s: &CiStatement| brute_dsep(g, s.x, s.y, &s.cond) == s.independent)
}

/// Entailment by checking every DAG that reproduces the premise. `None`
/// when no DAG does.
pub fn brute_entails(p: &PremiseSet, h: &Hypothesis) -> Option<bool> {
    let consistent: Vec<Dag> = brute_dags(p.num_vars())
        .into_iter()
        .filter(|g| brute_satisfies(p, g))
        .collect();
    if consistent.is_empty() {
        return None;
    }
    Some(consistent.iter().all(|g| h.holds_in(g).unwrap()))
}

/// Minimal HTTP server answering chat-completion requests. `reply` maps
/// each request body to (status, response body).
pub struct MockServer {
    pub url: String,
    pub requests: Arc<Mutex<Vec<(String, String)>>>,
    _handle: JoinHandle<()>,
}

impl MockServer {
    pub fn start<F>(reply: F) -> MockServer
    where
        F: Fn(&serde_json::Value) -> (u16, String) + Send + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&requests);
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                let mut auth = String::new();
                let mut line = String::new();
                loop {
                    line.clear();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 {
                        break;
                    }
                    let t = line.trim_end();
                    if t.is_empty() {
                        break;
                    }
                    let lower = t.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap_or(0);
                    }
                    if lower.starts_with("authorization:") {
                        auth = t["authorization:".len()..].trim().to_string();
                    }
                }
                let mut body = vec![0u8; len];
                if reader.read_exact(&mut body).is_err() {
                    continue;
                }
                let body = String::from_utf8_lossy(&body).into_owned();
                let value: serde_json::Value = serde_json::from_str(&body).unwrap_or_default();
                let (status, text) = reply(&value);
                log.lock().unwrap().push((auth, body));
                let resp = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                    text.len()
                );
                let _ = stream.write_all(resp.as_bytes());
                let _ = stream.flush();
            }
        });
        MockServer {
            url,
            requests,
            _handle: handle,
        }
    }
}

pub fn chat_reply(content: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
}

/// The prompt sent in a chat-completion request body.
pub fn prompt_of(body: &serde_json::Value) -> String {
    body["messages"][0]["content"].as_str().unwrap_or_default().to_string()
}
