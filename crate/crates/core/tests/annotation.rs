use std::collections::BTreeSet;
use std::time::Duration;

use hatespeech::annotation::{ExportStrategy, LabelSubmission, ProjectStore, TaskStatus};
use hatespeech::corpus::{Comment, Dataset, Label, Language};
use hatespeech::metrics::cohen_kappa;
use hatespeech::Error;
use proptest::prelude::*;

fn dataset(n: usize) -> Dataset {
    let comments = (1..=n).map(|i| Comment::new(format!("c{i}"), &format!("comment number {i} 🙂")).unwrap()).collect();
    Dataset::from_comments("d", comments).unwrap()
}

fn names(ids: &[&str]) -> Vec<String> {
    ids.iter().map(|s| s.to_string()).collect()
}

fn project(n: usize, annotators: &[&str]) -> (tempfile::TempDir, ProjectStore) {
    let dir = tempfile::tempdir().unwrap();
    let store = ProjectStore::create(dir.path().join("p.jsonl"), &dataset(n), &names(annotators)).unwrap();
    (dir, store)
}

fn sub(comment: &str, annotator: &str, label: &str, language: &str) -> LabelSubmission {
    LabelSubmission {
        comment_id: comment.into(),
        annotator_id: annotator.into(),
        label: label.into(),
        language: language.into(),
    }
}

fn label_str(l: Label) -> &'static str {
    l.as_str()
}

#[test]
fn tasks_come_in_project_order() {
    let (_d, mut st) = project(3, &["ann"]);
    let t = st.next_task("ann").unwrap().unwrap();
    assert_eq!(t.comment_id, "c1");
    assert_eq!(t.status, TaskStatus::Pending);
    assert_eq!(t.raw_text, "comment number 1 🙂");
    for id in ["c1", "c2", "c3"] {
        st.submit(&sub(id, "ann", "hate", "english")).unwrap();
    }
    assert_eq!(st.next_task("ann").unwrap(), None);
    assert!(matches!(st.next_task("ghost"), Err(Error::UnknownAnnotator(_))));
}

#[test]
fn interleaved_annotators_each_cover_everything_once() {
    let (_d, mut st) = project(7, &["a", "b"]);
    let mut seen = [Vec::new(), Vec::new()];
    let mut done = [false, false];
    let mut turn = 0;
    while !done.iter().all(|d| *d) {
        let who = ["a", "b"][turn % 2];
        let slot = turn % 2;
        // b asks twice as often as a
        let steps = if slot == 0 { 1 } else { 2 };
        for _ in 0..steps {
            match st.next_task(who).unwrap() {
                Some(t) => {
                    seen[slot].push(t.comment_id.clone());
                    st.submit(&sub(&t.comment_id, who, "not_hate", "hinglish")).unwrap();
                }
                None => done[slot] = true,
            }
        }
        turn += 1;
    }
    let all: Vec<String> = (1..=7).map(|i| format!("c{i}")).collect();
    for s in &seen {
        assert_eq!(s, &all);
    }
}

#[test]
fn one_annotator_in_two_sessions_is_never_offered_a_comment_twice() {
    let (_d, mut st) = project(4, &["ann"]);
    let first = st.next_task("ann").unwrap().unwrap();
    let second = st.next_task("ann").unwrap().unwrap();
    assert_ne!(first.comment_id, second.comment_id);
    st.submit(&sub(&second.comment_id, "ann", "hate", "english")).unwrap();
    let third = st.next_task("ann").unwrap().unwrap();
    assert_eq!(third.comment_id, "c3");

    // an abandoned lease is offered again once it lapses
    st.set_lease(Duration::ZERO);
    assert_eq!(st.next_task("ann").unwrap().unwrap().comment_id, "c1");
}

#[test]
fn submissions_count_and_revise() {
    let (_d, mut st) = project(3, &["a", "b"]);
    let ack = st.submit(&sub("c1", "a", "hate", "english")).unwrap();
    assert_eq!((ack.labeled_count, ack.revision), (1, 1));
    let ack = st.submit(&sub("c1", "a", "not_hate", "english")).unwrap();
    assert_eq!((ack.labeled_count, ack.revision), (1, 2));
    let ack = st.submit(&sub("c1", "b", "hate", "hindi")).unwrap();
    assert_eq!((ack.labeled_count, ack.revision), (1, 1));
    let ack = st.submit(&sub("c2", "b", "HATE", "Hinglish")).unwrap();
    assert_eq!(ack.labeled_count, 2);
    assert_eq!(st.labels_of("a").unwrap()[0].label, Label::NotHate);
    assert_eq!(st.labels_of("a").unwrap()[0].replaces, Some(Label::Hate));

    assert!(matches!(st.submit(&sub("x999", "a", "hate", "english")), Err(Error::NotFound(_))));
    let field = |e| match e {
        Error::Validation { field, .. } => field,
        other => panic!("{other:?}"),
    };
    assert_eq!(field(st.submit(&sub("c1", "a", "spam", "english")).unwrap_err()), "label");
    assert_eq!(field(st.submit(&sub("c1", "a", "hate", "klingon")).unwrap_err()), "language");
    assert!(matches!(st.submit(&sub("c1", "zed", "hate", "english")), Err(Error::UnknownAnnotator(_))));

    let stats = st.stats();
    assert_eq!(stats.total, 3);
    assert_eq!((stats.by_status.labeled, stats.by_status.pending), (2, 1));
    assert_eq!(stats.per_annotator["a"], 1);
    assert_eq!(stats.per_annotator["b"], 2);
    assert_eq!(stats.label_records, 4);
}

#[test]
fn agreement_matches_the_kappa_example() {
    let (_d, mut st) = project(6, &["a", "b", "c"]);
    let a = ["hate", "hate", "not_hate", "not_hate", "hate"];
    let b = ["hate", "not_hate", "not_hate", "not_hate", "hate"];
    for i in 0..5 {
        let id = format!("c{}", i + 1);
        st.submit(&sub(&id, "a", a[i], "english")).unwrap();
        st.submit(&sub(&id, "b", b[i], "english")).unwrap();
    }
    // only a labels c6, so it is outside the overlap
    st.submit(&sub("c6", "a", "hate", "english")).unwrap();
    let r = st.agreement("a", "b").unwrap();
    assert!((r.kappa - 0.6153846).abs() < 1e-6);
    assert_eq!(r.n_items, 5);
    assert_eq!(r, st.agreement("b", "a").unwrap());
    assert_eq!(st.agreement("a", "a").unwrap().kappa, 1.0);
    assert!(matches!(st.agreement("a", "c"), Err(Error::NoOverlap(..))));
    assert!(matches!(st.agreement("a", "nobody"), Err(Error::UnknownAnnotator(_))));
}

#[test]
fn export_strategies() {
    let (_d, mut st) = project(4, &["a", "b"]);
    st.submit(&sub("c1", "a", "hate", "hinglish")).unwrap();
    st.submit(&sub("c1", "b", "hate", "hinglish")).unwrap();
    st.submit(&sub("c2", "b", "not_hate", "english")).unwrap();
    st.submit(&sub("c2", "a", "hate", "hindi")).unwrap();
    st.submit(&sub("c3", "a", "not_hate", "english")).unwrap();

    let first = st.export(ExportStrategy::First).unwrap();
    assert_eq!(first.dataset.len(), st.labeled_count());
    assert_eq!(first.excluded, 0);
    let c2 = &first.dataset.comments()[1];
    // b labeled c2 first
    assert_eq!(c2.gold_label, Some(Label::NotHate));
    // english and hindi tie, b's english came first
    assert_eq!(c2.language, Language::English);
    assert_eq!(c2.annotator_labels.len(), 2);

    let unanimous = st.export(ExportStrategy::Unanimous).unwrap();
    assert_eq!(unanimous.excluded, 1);
    assert_eq!(unanimous.dataset.ids(), ["c1", "c3"]);
    assert_eq!(unanimous.dataset.comments()[0].language, Language::Hinglish);

    let majority = st.export(ExportStrategy::Majority).unwrap();
    assert_eq!(majority.excluded, 1);
    assert!("bogus".parse::<ExportStrategy>().is_err());
}

#[test]
fn majority_over_every_three_annotator_vote_pattern() {
    for pattern in 0u8..8 {
        let (_d, mut st) = project(1, &["x", "y", "z"]);
        let votes: Vec<Label> = (0..3).map(|i| if pattern >> i & 1 == 1 { Label::Hate } else { Label::NotHate }).collect();
        for (who, &v) in ["x", "y", "z"].iter().zip(&votes) {
            st.submit(&sub("c1", who, label_str(v), "english")).unwrap();
        }
        let hate = pattern.count_ones();
        let expected = if hate >= 2 { Label::Hate } else { Label::NotHate };
        let out = st.export(ExportStrategy::Majority).unwrap();
        assert_eq!(out.dataset.comments()[0].gold_label, Some(expected), "pattern {pattern:03b}");
        let unanimous = st.export(ExportStrategy::Unanimous).unwrap();
        assert_eq!(unanimous.excluded, usize::from(hate != 0 && hate != 3), "pattern {pattern:03b}");
    }
}

#[test]
fn restart_keeps_every_record() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.jsonl");
    let mut st = ProjectStore::create(&path, &dataset(20), &names(&["a", "b"])).unwrap();
    for i in 1..=20 {
        st.submit(&sub(&format!("c{i}"), "a", if i % 3 == 0 { "hate" } else { "not_hate" }, "english")).unwrap();
        if i % 2 == 0 {
            st.submit(&sub(&format!("c{i}"), "b", "hate", "hinglish")).unwrap();
        }
    }
    st.submit(&sub("c1", "a", "hate", "english")).unwrap();
    let before = (st.stats(), st.agreement("a", "b").unwrap(), st.export(ExportStrategy::First).unwrap());
    drop(st);

    let mut back = ProjectStore::open(&path).unwrap();
    assert_eq!(back.stats(), before.0);
    assert_eq!(back.agreement("a", "b").unwrap(), before.1);
    assert_eq!(back.export(ExportStrategy::First).unwrap(), before.2);
    assert_eq!(back.labels_of("a").unwrap()[0].revision, 2);
    // revisions continue after a restart
    assert_eq!(back.submit(&sub("c1", "a", "not_hate", "english")).unwrap().revision, 3);
    assert!(ProjectStore::create(&path, &dataset(1), &[]).is_err());
}

#[test]
fn torn_final_line_is_dropped_and_other_damage_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.jsonl");
    let mut st = ProjectStore::create(&path, &dataset(3), &names(&["a"])).unwrap();
    st.submit(&sub("c1", "a", "hate", "english")).unwrap();
    drop(st);
    let good = std::fs::read(&path).unwrap();

    let mut torn = good.clone();
    torn.extend_from_slice(br#"{"entry":"label","comment_id":"c2","annot"#);
    std::fs::write(&path, &torn).unwrap();
    let mut st = ProjectStore::open(&path).unwrap();
    assert_eq!(st.labeled_count(), 1);
    assert_eq!(std::fs::read(&path).unwrap(), good);
    st.submit(&sub("c2", "a", "hate", "english")).unwrap();
    drop(st);
    assert_eq!(ProjectStore::open(&path).unwrap().labeled_count(), 2);

    let mut damaged = good.clone();
    let at = damaged.iter().position(|&b| b == b'\n').unwrap() + 3;
    damaged[at] = b'#';
    std::fs::write(&path, &damaged).unwrap();
    assert!(matches!(ProjectStore::open(&path), Err(Error::ProjectFile { line: 2, .. })));
}

#[derive(Debug, Clone)]
enum Op {
    Next(usize),
    Label(usize, usize, bool),
}

fn ops() -> impl Strategy<Value = Vec<Op>> {
    prop::collection::vec(
        prop_oneof![
            (0..3usize).prop_map(Op::Next),
            (0..3usize, 0..6usize, any::<bool>()).prop_map(|(a, c, h)| Op::Label(a, c, h)),
        ],
        0..60,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn invariants_hold_under_random_traffic(ops in ops()) {
        let who = ["a", "b", "c"];
        let (_d, mut st) = project(6, &who);
        let mut labeled: [BTreeSet<String>; 3] = Default::default();
        for op in ops {
            match op {
                Op::Next(a) => {
                    if let Some(t) = st.next_task(who[a]).unwrap() {
                        prop_assert!(!labeled[a].contains(&t.comment_id));
                    }
                }
                Op::Label(a, c, h) => {
                    let id = format!("c{}", c + 1);
                    st.submit(&sub(&id, who[a], if h { "hate" } else { "not_hate" }, "english")).unwrap();
                    labeled[a].insert(id);
                }
            }
        }
        let any: BTreeSet<&String> = labeled.iter().flatten().collect();
        prop_assert_eq!(st.export(ExportStrategy::First).unwrap().dataset.len(), any.len());
        for x in 0..3 {
            for y in 0..3 {
                match (st.agreement(who[x], who[y]), st.agreement(who[y], who[x])) {
                    (Ok(p), Ok(q)) => {
                        prop_assert_eq!(p, q);
                        // same data straight through the metrics module
                        let common: Vec<_> = st.labels_of(who[x]).unwrap().into_iter()
                            .filter(|r| labeled[y].contains(&r.comment_id)).collect();
                        let la: Vec<Label> = common.iter().map(|r| r.label).collect();
                        let lb: Vec<Label> = common.iter().map(|r| {
                            st.labels_of(who[y]).unwrap().into_iter().find(|s| s.comment_id == r.comment_id).unwrap().label
                        }).collect();
                        prop_assert_eq!(p, cohen_kappa(&la, &lb).unwrap());
                    }
                    (Err(Error::NoOverlap(..)), Err(Error::NoOverlap(..))) => {}
                    other => prop_assert!(false, "{:?}", other),
                }
            }
        }
    }
}
