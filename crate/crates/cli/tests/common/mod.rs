//! A service instance on an ephemeral port plus a small blocking client.
#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread::JoinHandle;

use sensorspace_cli::config::Config;
use sensorspace_cli::service::{serve_on, AppState};
use serde_json::Value;
use tokio::sync::oneshot;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn fixture_bytes(name: &str) -> Vec<u8> {
    std::fs::read(fixture(name)).unwrap()
}

pub struct TestServer {
    pub addr: SocketAddr,
    client: reqwest::blocking::Client,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl TestServer {
    pub fn start(data_dir: &Path) -> Self {
        let config = Config {
            data_dir: data_dir.to_path_buf(),
            ..Config::default()
        };
        Self::start_with(config)
    }

    pub fn start_with(config: Config) -> Self {
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let (stop_tx, stop_rx) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Runtime::new().unwrap();
            rt.block_on(async move {
                let state = Arc::new(AppState::open(config).unwrap());
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                addr_tx.send(listener.local_addr().unwrap()).unwrap();
                serve_on(listener, state, async {
                    let _ = stop_rx.await;
                })
                .await
                .unwrap();
            });
        });
        TestServer {
            addr: addr_rx.recv().unwrap(),
            client: reqwest::blocking::Client::new(),
            stop: Some(stop_tx),
            thread: Some(thread),
        }
    }

    /// Sends a raw body and returns the status and the parsed envelope.
    pub fn post(&self, path: &str, body: impl Into<Vec<u8>>) -> (u16, Value) {
        let resp = self
            .client
            .post(format!("http://{}{path}", self.addr))
            .header("content-type", "application/json")
            .body(body.into())
            .send()
            .unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().unwrap())
    }

    pub fn post_json(&self, path: &str, body: &Value) -> (u16, Value) {
        self.post(path, serde_json::to_vec(body).unwrap())
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        let resp = self
            .client
            .get(format!("http://{}{path}", self.addr))
            .send()
            .unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().unwrap())
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            t.join().unwrap();
        }
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}
