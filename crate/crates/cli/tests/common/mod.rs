//! Helpers shared by the CLI test targets: running the binary and comparing
//! artifact trees.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

/// Small model and corpus so a full command chain takes seconds.
pub const SMALL_CONFIG: &str = r#"
[model]
d_model = 16
n_layers = 1
n_heads = 2
d_ff = 32
context_length = 96

[sft]
epochs = 1

[dpo]
epochs = 1

[sampler]
max_target_length = 16

[eval]
generation_room = 24
max_test_samples = 4

[synth]
count = 30
grounding = 1.0
"#;

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl From<Output> for Run {
    fn from(o: Output) -> Self {
        Run {
            code: o.status.code().unwrap_or(-1),
            stdout: String::from_utf8_lossy(&o.stdout).into_owned(),
            stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
        }
    }
}

/// Runs `finchat` in `dir` with `stdin` piped in and color disabled.
pub fn finchat(dir: &Path, args: &[&str], stdin: &str) -> Run {
    let mut child = Command::new(env!("CARGO_BIN_EXE_finchat"))
        .args(args)
        .current_dir(dir)
        .env("NO_COLOR", "1")
        .env_remove("FINCHAT_OUT_DIR")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn finchat");
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap().into()
}

/// Like [`finchat`] but panics unless the command succeeds.
pub fn ok(dir: &Path, args: &[&str], stdin: &str) -> Run {
    let run = finchat(dir, args, stdin);
    assert_eq!(run.code, 0, "finchat {args:?} failed: {}", run.stderr);
    run
}

/// Every regular file under `root`, keyed by relative path.
pub fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

pub const CHAT_SCRIPT: &str = "what gold bullion is used for ?\n/facts off\nhow do bonds work ?\n/reset\nis a mortgage used for buying a house ?\n/quit\n";

/// The full command chain in `dir`: synth, split, index, classifier, SFT,
/// preferences, DPO, ablation and a scripted chat.
pub fn pipeline(dir: &Path, seed: u64) {
    fs::write(dir.join("run.toml"), SMALL_CONFIG).unwrap();
    let s = seed.to_string();
    let c = ["--config", "run.toml"];
    let run = |args: &[&str]| ok(dir, &[&c[..], args].concat(), "");
    run(&["corpus", "synth", "--seed", &s, "--out", "corpus.jsonl"]);
    run(&[
        "corpus",
        "split",
        "corpus.jsonl",
        "--seed",
        &s,
        "--train",
        "0.8",
        "--dev",
        "0.1",
        "--test",
        "0.1",
        "--out",
        "split",
    ]);
    run(&["knowledge", "build", "--bank", "--out", "index.json"]);
    run(&["politeness", "train", "--corpus", "split/train.jsonl", "--seed", &s, "--out", "clf"]);
    run(&[
        "train",
        "sft",
        "--corpus",
        "split/train.jsonl",
        "--setting",
        "context",
        "--index",
        "index.json",
        "--seed",
        &s,
        "--out",
        "sft",
    ]);
    run(&[
        "train",
        "prefs",
        "--corpus",
        "split/train.jsonl",
        "--checkpoint",
        "sft",
        "--setting",
        "context",
        "--index",
        "index.json",
        "--seed",
        &s,
        "--out",
        "prefs.jsonl",
    ]);
    run(&["train", "dpo", "--checkpoint", "sft", "--prefs", "prefs.jsonl", "--seed", &s, "--out", "dpo"]);
    run(&["eval", "ablation", "--corpus", "split", "--index", "index.json", "--seed", &s, "--out", "ablation"]);
    ok(
        dir,
        &[
            &c[..],
            &[
                "chat",
                "--checkpoint",
                "dpo",
                "--index",
                "index.json",
                "--setting",
                "context",
                "--classifier",
                "clf",
                "--seed",
                &s,
                "--transcript",
                "chat.txt",
            ],
        ]
        .concat(),
        CHAT_SCRIPT,
    );
}

/// Files of two pipeline runs that differ, ignoring wall-clock timings.
pub fn differing_files(a: &Path, b: &Path) -> Vec<PathBuf> {
    let (ta, tb) = (tree(a), tree(b));
    let paths: BTreeSet<&PathBuf> = ta.keys().chain(tb.keys()).collect();
    paths.into_iter().filter(|p| !p.ends_with("timing.json") && ta.get(*p) != tb.get(*p)).cloned().collect()
}
