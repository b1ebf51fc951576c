#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use serde_json::Value;

pub fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn toy_dir() -> PathBuf {
    repo().join("configs/toy")
}

pub fn toy_csv() -> PathBuf {
    toy_dir().join("comments.csv")
}

pub fn hatespeech() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hatespeech"));
    c.env_remove("HATESPEECH_WEIGHTS_DIR").env("RUST_LOG", "error");
    c
}

pub fn run(args: &[&str]) -> Output {
    hatespeech().args(args).output().expect("spawn hatespeech")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exited by signal")
}

/// The shipped toy config written into `dir` under `name`, with absolute
/// data and vocabulary paths and each `(from, to)` replacement applied.
pub fn toy_config(dir: &Path, name: &str, patches: &[(&str, &str)]) -> PathBuf {
    let mut text = std::fs::read_to_string(toy_dir().join("toy.toml")).unwrap();
    let abs = |f: &str| toy_dir().join(f).canonicalize().unwrap().display().to_string();
    text = text
        .replace("\"comments.csv\"", &format!("{:?}", abs("comments.csv")))
        .replace("\"vocab.txt\"", &format!("{:?}", abs("vocab.txt")));
    for (from, to) in patches {
        assert!(text.contains(from), "toy.toml has no `{from}`");
        text = text.replacen(from, to, 1);
    }
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// A `hatespeech serve` child process, killed when dropped.
pub struct Server {
    pub child: Child,
    pub base: String,
}

impl Server {
    pub fn start(args: &[&str]) -> Server {
        let mut child = hatespeech()
            .arg("serve")
            .args(args)
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("spawn server");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let addr = line
            .strip_prefix("listening on ")
            .and_then(|r| r.split_whitespace().next())
            .unwrap_or_else(|| {
                let _ = child.kill();
                panic!("unexpected first line {line:?}")
            });
        Server {
            base: addr.to_string(),
            child,
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    /// SIGKILL, no graceful shutdown.
    pub fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub fn agent() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().into()
}

/// Status and body of a GET.
pub fn get(url: &str) -> (u16, String) {
    let mut r = agent().get(url).call().expect("GET");
    let status = r.status().as_u16();
    (status, r.body_mut().read_to_string().unwrap_or_default())
}

pub fn get_json(url: &str) -> (u16, Value) {
    let (s, body) = get(url);
    (s, serde_json::from_str(&body).unwrap_or(Value::Null))
}

pub fn post_json(url: &str, body: &Value) -> (u16, Value) {
    let mut r = agent().post(url).send_json(body).expect("POST");
    let status = r.status().as_u16();
    let text = r.body_mut().read_to_string().unwrap_or_default();
    (status, serde_json::from_str(&text).unwrap_or(Value::Null))
}
