#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semlabel::graph_data::{Dataset, Node};
use semlabel::label_encoding::LabelVocabulary;
use serde_json::{json, Value};

/// Vector the mock returns for `text`: deterministic, awkward floats.
pub fn mock_vector(text: &str, dim: usize) -> Vec<f64> {
    let h = text
        .bytes()
        .fold(1469598103934665603u64, |h, b| (h ^ b as u64).wrapping_mul(1099511628211));
    (0..dim)
        .map(|k| ((h % 9973) as f64 * 0.7 + k as f64 * 1.3).sin() / 3.0)
        .collect()
}

#[derive(Debug, Clone)]
pub struct SeenRequest {
    pub path: String,
    pub authorization: Option<String>,
    pub model: String,
    pub inputs: Vec<String>,
}

/// What the mock sends back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MockBehavior {
    /// Items in reverse order, each tagged with its `index`.
    Reversed,
    /// HTTP 401 with a short body.
    Unauthorized,
    /// One item short of the batch.
    DropOne,
}

pub struct MockServer {
    pub base_url: String,
    pub requests: Arc<Mutex<Vec<SeenRequest>>>,
}

impl MockServer {
    pub fn start(dim: usize, behavior: MockBehavior) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base_url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let seen = Arc::clone(&requests);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                let seen = Arc::clone(&seen);
                thread::spawn(move || serve(stream, dim, behavior, &seen));
            }
        });
        Self { base_url, requests }
    }

    pub fn batch_sizes(&self) -> Vec<usize> {
        self.requests.lock().unwrap().iter().map(|r| r.inputs.len()).collect()
    }
}

fn serve(stream: TcpStream, dim: usize, behavior: MockBehavior, seen: &Mutex<Vec<SeenRequest>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut writer = stream;
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
        return;
    }
    let path = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
    let mut length = 0usize;
    let mut authorization = None;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        let (name, value) = line.split_once(':').unwrap();
        match name.to_ascii_lowercase().as_str() {
            "content-length" => length = value.trim().parse().unwrap(),
            "authorization" => authorization = Some(value.trim().to_string()),
            _ => {}
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).unwrap();
    let req: Value = serde_json::from_slice(&body).unwrap();
    let inputs: Vec<String> = req["input"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    seen.lock().unwrap().push(SeenRequest {
        path,
        authorization,
        model: req["model"].as_str().unwrap_or("").to_string(),
        inputs: inputs.clone(),
    });

    let (status, payload) = match behavior {
        MockBehavior::Unauthorized => ("401 Unauthorized", r#"{"error":"bad token"}"#.to_string()),
        MockBehavior::Reversed | MockBehavior::DropOne => {
            let mut data: Vec<Value> = inputs
                .iter()
                .enumerate()
                .map(|(i, t)| json!({"object": "embedding", "index": i, "embedding": mock_vector(t, dim)}))
                .collect();
            data.reverse();
            if behavior == MockBehavior::DropOne {
                data.pop();
            }
            ("200 OK", json!({"object": "list", "data": data, "model": req["model"]}).to_string())
        }
    };
    let _ = write!(
        writer,
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
    let _ = writer.flush();
}

/// Random single-project graph with `n` nodes, features in [-1, 1).
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, dim: usize, classes: usize) -> Dataset {
    let vocab = LabelVocabulary::new((0..classes).map(|c| format!("c{c}")).collect()).unwrap();
    let nodes = (0..n)
        .map(|id| Node {
            id,
            features: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            label_id: rng.random_range(0..classes),
            project_id: 0,
        })
        .collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if rng.random::<f64>() < 0.25 {
                edges.push((a, b));
            }
        }
    }
    Dataset::new(vec!["P".into()], vocab, nodes, edges).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
