//! Acceptance run: one PASS, FAIL or SKIP line per criterion. Exits
//! nonzero when any criterion fails; skips do not count as failures.

mod common;

use std::collections::HashSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use hatespeech::annotation::ProjectStore;
use hatespeech::corpus::{flair_line, load_csv, parse_flair_line, split, ColumnMap, SplitSpec};
use hatespeech::metrics::{cohen_kappa, evaluate, scores, Confusion};
use hatespeech::models::{ClassifierConfig, Head, HeadKind};
use hatespeech::nn::{gradient_check, ParamStore};
use hatespeech::preprocess::{run_pipeline, PipelineLanguage, Resources, DEVANAGARI_BLOCK};
use hatespeech::tokenizer::{encode, wordpiece_tokenize, Vocabulary};
use hatespeech::Label::{self, Hate as H, NotHate as N};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

type Criterion = (&'static str, fn() -> Verdict);

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Verdict::*;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Fail(format!($($msg)+));
        }
    };
}

const EN_ROW: &str = "@amitshah You can't change the minds of such small minded people who are stuck in the past, they just don't understand logics.#IndiaAgainstCAA 🤬";
const HI_ROW: &str = "@narendramodi मेरा देश BHAI hate ni pyar phailata ha or jo pyar se nhi manta wo use ache se samjhate hain!! 🤔 https://twitter.com/4948747235330";

fn golden_preprocessing() -> Verdict {
    let start = Instant::now();
    let en = run_pipeline(PipelineLanguage::English, EN_ROW);
    let hi = run_pipeline(PipelineLanguage::Hinglish, HI_ROW);
    let took = start.elapsed();
    ensure!(
        en == "you cannot change mind small minded people stuck past understand logic facewithsymbolsonmouth",
        "english: {en:?}"
    );
    ensure!(hi == "meraa desh hate ni pyar phailata pyar nhi manta ache samjhate hain", "hinglish: {hi:?}");
    ensure!(took < Duration::from_secs(1), "took {took:?}");
    Pass(format!("both rows byte-exact in {:.1} ms", took.as_secs_f64() * 1e3))
}

const FRAGMENTS: &[&str] = &[
    "can't", "DON'T", "won’t", "u", "ur", "pls", "ppl", "thx", "i'm", "y'all", "you", "the", "logics", "minds",
    "people", "boxes", "news", "https://t.co/x1", "www.example.com", "@user", "#Tag", "🤬", "🤔", "👍🏽",
    "👩\u{200D}💻", "\u{FE0F}", "मेरा", "देश", "नहीं", "है", "क़", "।", ".", ",", "!!", "'", "’", "\"", "-", "(",
    "bhai", "hate", "pyar", "teko", "hain", "se", "BHAI", "2020s", "café", "\u{200B}",
];

/// Corpus lines with random fragments spliced in.
fn random_lines(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    let corpus = load_csv(toy_csv(), &ColumnMap::default()).unwrap().dataset;
    let seps = ["", " ", "  ", "\t"];
    (0..n)
        .map(|_| {
            let base = &corpus.comments()[rng.gen_range(0..corpus.len())].raw_text;
            let mut words: Vec<String> = base.split(' ').map(String::from).collect();
            for _ in 0..rng.gen_range(0..10) {
                let f = format!("{}{}", FRAGMENTS.choose(rng).unwrap(), seps.choose(rng).unwrap());
                let at = rng.gen_range(0..=words.len());
                words.insert(at, f);
            }
            words.join(" ")
        })
        .collect()
}

fn idempotence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut failures = Vec::new();
    for lang in [PipelineLanguage::English, PipelineLanguage::Hinglish] {
        for line in random_lines(&mut rng, 1000) {
            let once = run_pipeline(lang, &line);
            if run_pipeline(lang, &once) != once {
                failures.push(format!("{lang:?}: {line:?}"));
            }
        }
    }
    ensure!(failures.is_empty(), "{} failures, first {}", failures.len(), failures[0]);
    Pass("2 x 1000 lines, 0 failures".into())
}

fn transliteration() -> Verdict {
    let table = &Resources::bundled().translit;
    let mut vanished = Vec::new();
    for cp in DEVANAGARI_BLOCK {
        let c = char::from_u32(cp).unwrap();
        let (out, dropped) = table.transliterate(&c.to_string());
        ensure!(out.is_ascii(), "U+{cp:04X} -> {out:?}");
        if dropped > 0 {
            vanished.push(format!("U+{cp:04X}"));
        }
    }
    let (out, _) = table.transliterate("मेरा देश");
    ensure!(out == "meraa desh", "{out:?}");
    Pass(format!("128 codepoints ASCII; mapped to empty: {}", vanished.join(" ")))
}

const SPECIALS: [&str; 4] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"];
const TOY_PIECES: &[&str] = &["a", "b", "ab", "abc", "ba", "c", "##a", "##b", "##c", "##bc", "##ca", "cab", "##abc", "d", "##d"];

/// From each position take the longest remaining span that is in the set.
fn brute_force(word: &str, set: &HashSet<String>) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    'outer: while i < chars.len() {
        for j in (i + 1..=chars.len()).rev() {
            let body: String = chars[i..j].iter().collect();
            let piece = if i == 0 { body } else { format!("##{body}") };
            if set.contains(&piece) {
                out.push(piece);
                i = j;
                continue 'outer;
            }
        }
        return vec!["[UNK]".into()];
    }
    out
}

fn random_word(rng: &mut ChaCha8Rng) -> String {
    (0..rng.gen_range(1..=12)).map(|_| *b"abcde".choose(rng).unwrap() as char).collect()
}

fn tokenizer_oracle() -> Verdict {
    let vocab = Vocabulary::from_tokens(SPECIALS.iter().chain(TOY_PIECES).copied()).unwrap();
    let set: HashSet<String> = TOY_PIECES.iter().map(|s| s.to_string()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..1000 {
        let w = random_word(&mut rng);
        let got = wordpiece_tokenize(&w, &vocab);
        let want = brute_force(&w, &set);
        ensure!(got == want, "{w}: {got:?} vs {want:?}");
    }

    let multi = Vocabulary::from_tokens(SPECIALS.iter().chain(&["kaam", "karna", "he"]).copied()).unwrap();
    let mono = Vocabulary::from_tokens(SPECIALS.iter().chain(&["ka", "##am", "##rna", "he"]).copied()).unwrap();
    let m = encode("kaam karna he", &multi, 75).tokens;
    ensure!(m == ["[CLS]", "kaam", "karna", "he", "[SEP]"], "multilingual {m:?}");
    let s = encode("kaam karna he", &mono, 75).tokens;
    ensure!(s == ["[CLS]", "ka", "##am", "ka", "##rna", "he", "[SEP]"], "monolingual {s:?}");

    for max_len in [100, 75] {
        for _ in 0..500 {
            let n = rng.gen_range(0..150);
            let text: Vec<String> = (0..n).map(|_| random_word(&mut rng)).collect();
            let seq = encode(&text.join(" "), &vocab, max_len);
            ensure!(
                seq.ids.len() == max_len && seq.mask.len() == max_len,
                "{n} words at max_len {max_len}: {} ids",
                seq.ids.len()
            );
        }
    }
    Pass("1000 words match the oracle; both kaam segmentations; lengths 100 and 75 exact".into())
}

fn metrics_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let f1 = |p: f64, r: f64| if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    for trial in 0..1000 {
        let n = rng.gen_range(1..80);
        let (gb, pb) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let golds: Vec<Label> = (0..n).map(|_| if rng.gen_bool(gb) { H } else { N }).collect();
        let preds: Vec<Label> = (0..n).map(|_| if rng.gen_bool(pb) { H } else { N }).collect();
        let (mut tp, mut fp, mut fn_, mut tn) = (0.0, 0.0, 0.0, 0.0);
        for (g, p) in golds.iter().zip(&preds) {
            match (g, p) {
                (H, H) => tp += 1.0,
                (N, H) => fp += 1.0,
                (H, N) => fn_ += 1.0,
                (N, N) => tn += 1.0,
            }
        }
        let r = evaluate(&golds, &preds).unwrap();
        ensure!(
            r.confusion.0 == [[tp as u64, fn_ as u64], [fp as u64, tn as u64]],
            "trial {trial}: confusion {:?}",
            r.confusion.0
        );
        let total = n as f64;
        let (hp, hr, np, nr) = (div(tp, tp + fp), div(tp, tp + fn_), div(tn, tn + fn_), div(tn, tn + fp));
        let (hs, ns) = (tp + fn_, tn + fp);
        let checks = [
            (r.accuracy, (tp + tn) / total),
            (r.per_class[0].precision, hp),
            (r.per_class[0].recall, hr),
            (r.per_class[0].f1, f1(hp, hr)),
            (r.per_class[1].precision, np),
            (r.per_class[1].recall, nr),
            (r.per_class[1].f1, f1(np, nr)),
            (r.weighted_precision, (hs * hp + ns * np) / total),
            (r.weighted_recall, (hs * hr + ns * nr) / total),
            (r.weighted_f1, (hs * f1(hp, hr) + ns * f1(np, nr)) / total),
            (r.macro_precision, (hp + np) / 2.0),
            (r.macro_recall, (hr + nr) / 2.0),
            (r.macro_f1, (f1(hp, hr) + f1(np, nr)) / 2.0),
        ];
        for (i, (got, want)) in checks.iter().enumerate() {
            ensure!(close(*got, *want), "trial {trial}, quantity {i}: {got} vs {want}");
        }
    }

    let k = cohen_kappa(&[H, H, N, N, H], &[H, N, N, N, H]).unwrap();
    ensure!((k.kappa - 0.6153846).abs() < 1e-6, "kappa {}", k.kappa);

    for _ in 0..1000 {
        let m = Confusion([[rng.gen_range(0..300), rng.gen_range(0..300)], [rng.gen_range(0..300), rng.gen_range(0..300)]]);
        if m.total() == 0 {
            continue;
        }
        let s = scores(&m).unwrap();
        ensure!(close(s.weighted_recall, s.accuracy), "{m:?}: {} vs {}", s.weighted_recall, s.accuracy);
    }
    Pass(format!("1000 random pairs within 1e-9; kappa {:.7}; weighted recall = accuracy", k.kappa))
}

fn tiny_head(kind: HeadKind, dim: usize, seed: u64) -> (Head, ParamStore) {
    let mut cfg = ClassifierConfig::with_head(kind);
    cfg.max_len = 6;
    cfg.mlp_hidden = vec![3];
    cfg.bilstm_hidden = 3;
    cfg.seed = seed;
    let mut store = ParamStore::new();
    let head = Head::init(&cfg, dim, &mut store, "").unwrap();
    (head, store)
}

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.gen_range(-1.0..1.0))
}

const HEADS: [HeadKind; 3] = [HeadKind::Cnn, HeadKind::Mlp, HeadKind::Bilstm];

fn gradient_checks() -> Verdict {
    let mut worst = Vec::new();
    for kind in HEADS {
        let (head, mut store) = tiny_head(kind, 4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let x = random(&mut rng, 12, 4);
        let masks = vec![vec![true, true, true, true, false, false], vec![true; 6]];
        let ids: Vec<_> = store.ids().collect();
        let err = gradient_check(&mut store, &ids, 1e-5, |g| {
            let xv = g.input(x.clone());
            let logits = head.logits(g, xv, &masks).unwrap();
            g.cross_entropy(logits, &[0, 1])
        });
        ensure!(err < 1e-4, "{kind:?}: relative error {err:e}");
        worst.push(format!("{kind:?} {err:.1e}"));
    }
    Pass(format!("max relative error: {}", worst.join(", ")))
}

fn mask_invariance() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut trials = 0;
    for kind in HEADS {
        for seed in 0..100 {
            let (head, store) = tiny_head(kind, 3, seed);
            let valid = rng.gen_range(1..=6);
            let mut mask = vec![false; 6];
            for m in mask.iter_mut().take(valid) {
                *m = true;
            }
            mask.shuffle(&mut rng);
            let emb = random(&mut rng, 6, 3);
            let mut noisy = emb.clone();
            for (t, &m) in mask.iter().enumerate() {
                if !m {
                    noisy.row_mut(t).assign(&(random(&mut rng, 1, 3).row(0).to_owned() * 1e3));
                }
            }
            let a = head.probabilities(&store, &emb, &mask).unwrap();
            let b = head.probabilities(&store, &noisy, &mask).unwrap();
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            ensure!(bits(&a) == bits(&b), "{kind:?} seed {seed}: {a:?} vs {b:?}");
            trials += 1;
        }
    }
    Pass(format!("{trials} perturbed inputs, outputs bit-identical"))
}

fn toy_training() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_dir().join("toy.toml");
    let mut histories = Vec::new();
    let mut summary = String::new();
    for run in ["first", "second"] {
        let out = dir.path().join(run);
        let start = Instant::now();
        let o = run_train(&out, &config);
        let took = start.elapsed();
        ensure!(code(&o) == 0, "train exited {}: {}", code(&o), stderr(&o));
        ensure!(took < Duration::from_secs(120), "took {took:?}");
        let manifest = read_json(&out.join("toy/run.json"));
        let epochs = manifest["config"]["classifier"]["epochs"].as_u64().unwrap();
        ensure!(epochs <= 10, "{epochs} epochs configured");
        let acc = read_json(&out.join("toy/dev_report.json"))["accuracy"].as_f64().unwrap();
        ensure!(acc >= 0.95, "dev accuracy {acc}");
        let history: Vec<String> = stdout(&o).lines().filter(|l| l.starts_with("epoch")).map(String::from).collect();
        ensure!(history.len() as u64 == epochs, "history has {} epochs", history.len());
        if summary.is_empty() {
            summary = format!("dev accuracy {acc:.2} after {epochs} epochs in {:.1} s", took.as_secs_f64());
        }
        histories.push(history);
    }
    ensure!(histories[0] == histories[1], "histories differ:\n{:?}\n{:?}", histories[0], histories[1]);
    Pass(format!("{summary}; seeded reruns identical"))
}

fn run_train(out: &Path, config: &Path) -> std::process::Output {
    run(&["--out-dir", out.to_str().unwrap(), "train", config.to_str().unwrap()])
}

fn flair_export() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("flair");
    let o = run(&["export-flair", "--input", toy_csv().to_str().unwrap(), "--out", out.to_str().unwrap()]);
    ensure!(code(&o) == 0, "export-flair exited {}: {}", code(&o), stderr(&o));

    let data = load_csv(toy_csv(), &ColumnMap::default()).unwrap().dataset;
    let processed = data.map_processed(|t| run_pipeline(PipelineLanguage::English, t));
    let splits = split(&processed, &SplitSpec::standard(0)).unwrap();
    let mut lines = 0;
    for (name, part) in [("train", &splits.train), ("dev", &splits.dev), ("test", &splits.test)] {
        let want: String = part
            .iter()
            .map(|c| flair_line(c.gold_label.unwrap(), c.text()) + "\n")
            .collect();
        let got = fs::read_to_string(out.join(format!("{name}.txt"))).unwrap();
        ensure!(got == want, "{name}.txt differs from the expected bytes");
        for (line, c) in got.lines().zip(part) {
            let back = parse_flair_line(line);
            ensure!(
                back.as_ref().ok() == Some(&(c.gold_label.unwrap(), c.text().to_string())),
                "{line:?} parsed to {back:?}"
            );
            lines += 1;
        }
    }
    Pass(format!("{lines} lines bit-exact and recovered"))
}

fn annotation_persistence() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let project = dir.path().join("project.jsonl");
    let p = project.to_str().unwrap();
    let csv = toy_csv();
    let server = Server::start(&[
        "--project", p, "--init", csv.to_str().unwrap(), "--listen", "127.0.0.1:0", "--annotator", "a", "--annotator", "b",
    ]);

    // 25 comments each, correlated so kappa is neither 0 nor 1
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut script: Vec<(String, String, Label)> = Vec::new();
    let mut acked = 0;
    for _ in 0..25 {
        let base = if rng.gen_bool(0.5) { H } else { N };
        for who in ["a", "b"] {
            let (s, task) = get_json(&server.url(&format!("/api/tasks/next?annotator={who}")));
            ensure!(s == 200, "next task for {who}: {s}");
            let id = task["comment_id"].as_str().unwrap().to_string();
            let label = if rng.gen_bool(0.8) { base } else if base == H { N } else { H };
            let body = json!({"comment_id": id, "annotator_id": who, "label": label.as_str(), "language": "english"});
            let (s, ack) = post_json(&server.url("/api/labels"), &body);
            ensure!(s == 200, "submit: {s} {ack}");
            acked += 1;
            script.push((id, who.to_string(), label));
        }
    }
    ensure!(acked == 50, "{acked} acknowledged");
    server.kill();

    let server = Server::start(&["--project", p, "--listen", "127.0.0.1:0"]);
    let (_, stats) = get_json(&server.url("/api/stats"));
    ensure!(stats["label_records"] == 50, "after restart: {stats}");
    ensure!(stats["per_annotator"]["a"] == 25 && stats["per_annotator"]["b"] == 25, "{stats}");

    let labels = |who: &str| -> Vec<Label> { script.iter().filter(|s| s.1 == who).map(|s| s.2).collect() };
    let want = cohen_kappa(&labels("a"), &labels("b")).unwrap();
    let (s, got) = get_json(&server.url("/api/agreement?a=a&b=b"));
    ensure!(s == 200, "agreement: {s}");
    let gk = got["kappa"].as_f64().unwrap();
    ensure!((gk - want.kappa).abs() < 1e-12 && got["n_items"] == want.n_items, "served {got}, expected {want:?}");
    server.kill();

    let store = ProjectStore::open(&project).unwrap();
    for (id, who, label) in &script {
        let rec = store.labels_of(who).unwrap().into_iter().find(|r| &r.comment_id == id).map(|r| r.label);
        ensure!(rec == Some(*label), "{who} on {id}: {rec:?}, submitted {label:?}");
    }
    Pass(format!("50 of 50 records survive SIGKILL; kappa {:.4} matches", want.kappa))
}

const DAVIDSON_ENV: &str = "HATESPEECH_DAVIDSON_CSV";

/// Davidson et al. classes: 0 hate, 1 offensive, 2 neither. Hate and
/// offensive both become `hate`.
fn davidson_integration() -> Verdict {
    let Some(source) = std::env::var_os(DAVIDSON_ENV) else {
        return Skip(format!("{DAVIDSON_ENV} not set"));
    };
    let Some(weights) = std::env::var_os("HATESPEECH_WEIGHTS_DIR") else {
        return Skip("HATESPEECH_WEIGHTS_DIR not set".into());
    };
    if !Path::new(&weights).join("bert-base-uncased/weights.bin").exists() {
        return Skip("bert-base-uncased weights absent".into());
    }
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("davidson.csv");
    let mut rdr = csv::Reader::from_path(&source).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = |n: &str| headers.iter().position(|h| h == n).unwrap_or_else(|| panic!("no `{n}` column"));
    let (class, tweet) = (col("class"), col("tweet"));
    let mut w = csv::Writer::from_path(&corpus).unwrap();
    w.write_record(["id", "platform", "text", "language", "label"]).unwrap();
    for (i, row) in rdr.records().enumerate() {
        let row = row.unwrap();
        let label = if &row[class] == "2" { "not_hate" } else { "hate" };
        w.write_record([format!("d{i}").as_str(), "twitter", &row[tweet], "english", label]).unwrap();
    }
    w.flush().unwrap();
    let config = dir.path().join("davidson.toml");
    fs::write(
        &config,
        format!(
            "preset = \"english-bertbu-cnn\"\nname = \"davidson\"\n[data]\npath = {:?}\n[embedder]\ntrainable = true\n",
            corpus.display().to_string()
        ),
    )
    .unwrap();
    let out = dir.path().join("runs");
    let o = hatespeech()
        .env("HATESPEECH_WEIGHTS_DIR", &weights)
        .args(["--out-dir", out.to_str().unwrap(), "compare", config.to_str().unwrap()])
        .output()
        .unwrap();
    ensure!(code(&o) == 0, "compare exited {}: {}", code(&o), stderr(&o));
    let results = read_json(&out.join("compare/results.json"));
    let f1 = results[0]["report"]["weighted_f1"].as_f64().unwrap();
    ensure!((f1 - 0.93).abs() <= 0.05, "weighted F1 {f1:.3}");
    Pass(format!("weighted F1 {f1:.3}"))
}

fn main() {
    let criteria: &[Criterion] = &[
        ("golden preprocessing", golden_preprocessing),
        ("pipeline idempotence", idempotence),
        ("transliteration totality", transliteration),
        ("tokenizer oracle", tokenizer_oracle),
        ("metrics oracle", metrics_oracle),
        ("gradient checks", gradient_checks),
        ("mask invariance", mask_invariance),
        ("toy training", toy_training),
        ("flair export", flair_export),
        ("annotation persistence", annotation_persistence),
        ("davidson integration (optional)", davidson_integration),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Fail(format!("panicked: {msg}"))
        });
        let (tag, detail) = match verdict {
            Pass(d) => ("PASS", d),
            Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Skip(d) => ("SKIP", d),
        };
        println!("{tag}  {name:<32} {detail}");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
