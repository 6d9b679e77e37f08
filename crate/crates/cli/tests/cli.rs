use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

const TRAIN: &str = "ab cd e\ncd ab\ne e ab\nabc d\ncd e ab\nd ab c\nab ab\ne cd\n";

fn dagseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dagseg")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn train_model(dir: &Path, variant: &str) -> std::path::PathBuf {
    let train = dir.join("train.txt");
    fs::write(&train, TRAIN).unwrap();
    let model = dir.join(format!("{variant}.bin"));
    let o = dagseg(&[
        "train",
        "--train",
        p(&train),
        "--out",
        p(&model),
        "--variant",
        variant,
        "--epochs",
        "2",
        "--d-e",
        "4",
        "--d-h",
        "4",
        "--batch",
        "4",
        "--seed",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    model
}

#[test]
fn train_logs_config_snapshot_and_epochs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    fs::write(&cfg, "# small\nd_e=4\nd_h=4\nepochs=5\nseed=9\n").unwrap();
    let train = dir.path().join("train.txt");
    fs::write(&train, TRAIN).unwrap();
    let log = dir.path().join("log.txt");
    let o = dagseg(&[
        "train",
        "--config",
        p(&cfg),
        "--epochs",
        "2",
        "--train",
        p(&train),
        "--out",
        p(&dir.path().join("m.bin")),
        "--log",
        p(&log),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("# seed=9\n"));
    assert!(out.contains("# d_e=4\n"));
    // the flag wins over the file
    assert!(out.contains("# epochs=2\n"));
    let epochs: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(epochs.len(), 2);
    assert_eq!(epochs[0].split('\t').count(), 6);
    assert_eq!(fs::read_to_string(&log).unwrap(), out);
}

#[test]
fn segment_round_trips_through_the_corpus_reader() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_model(dir.path(), "wi-dag");
    let raw = dir.path().join("raw.txt");
    fs::write(&raw, "abcde\n\ncdab e\n").unwrap();
    let seg = dir.path().join("seg.txt");
    let o = dagseg(&["segment", "--model", p(&model), "--input", p(&raw), "--output", p(&seg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&seg).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert_eq!(text.lines().nth(1), Some(""));
    let joined: String = text.split_whitespace().collect();
    assert_eq!(joined, "abcdecdabe");

    // stdin to stdout gives the same lines
    let mut child = Command::new(env!("CARGO_BIN_EXE_dagseg"))
        .args(["segment", "--model", p(&model)])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"abcde\n\ncdab e\n").unwrap();
    let piped = child.wait_with_output().unwrap();
    assert!(piped.status.success());
    assert_eq!(stdout(&piped), text);
}

#[test]
fn eval_prints_scores_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_model(dir.path(), "ws-dag");
    let gold = dir.path().join("train.txt");
    let report = dir.path().join("report.txt");
    let o = dagseg(&["eval", "--model", p(&model), "--gold", p(&gold), "--report", p(&report)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "P\tR\tF\tOOV");
    let scores: Vec<f64> = lines[1].split('\t').map(|v| v.parse().unwrap()).collect();
    assert_eq!(scores.len(), 4);
    assert!(scores.iter().all(|s| (0.0..=100.0).contains(s)));
    let r = fs::read_to_string(&report).unwrap();
    assert!(r.contains("# variant=ws-dag\n"));
    assert!(r.contains("# seed=3\n"));
    assert!(r.ends_with(&format!("{}\n", lines[1])));
}

#[test]
fn extra_vocab_needs_a_dag_model() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_model(dir.path(), "unigram");
    let words = dir.path().join("w.txt");
    fs::write(&words, "xy\n").unwrap();
    let raw = dir.path().join("raw.txt");
    fs::write(&raw, "xyab\n").unwrap();
    let o = dagseg(&[
        "segment",
        "--model",
        p(&model),
        "--input",
        p(&raw),
        "--extra-vocab",
        p(&words),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[config]: "));

    let dag = train_model(dir.path(), "ws-dag");
    let o = dagseg(&[
        "segment",
        "--model",
        p(&dag),
        "--input",
        p(&raw),
        "--extra-vocab",
        p(&words),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn lattice_dump_from_wordlist() {
    let dir = tempfile::tempdir().unwrap();
    let words = dir.path().join("w.txt");
    fs::write(&words, "ab\nbc\nabc\n").unwrap();
    let o = dagseg(&["lattice-dump", "--vocab", p(&words), "--sentence", "abc"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let fwd: Vec<&str> = out.split("# backward").next().unwrap().lines().skip(1).collect();
    assert!(fwd.contains(&"2 2 ab"));
    assert!(fwd.contains(&"3 3 abc"));
    assert!(fwd.contains(&"3 2 bc"));

    let o = dagseg(&[
        "lattice-dump",
        "--vocab",
        p(&words),
        "--sentence",
        "abc",
        "--max-word-len",
        "2",
    ]);
    assert!(!stdout(&o).contains("abc"));
}

#[test]
fn sweep_prints_one_row_per_rate() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.txt");
    fs::write(&train, TRAIN).unwrap();
    let o = dagseg(&[
        "sweep",
        "--train",
        p(&train),
        "--grid",
        "0,1",
        "--epochs",
        "1",
        "--d-e",
        "3",
        "--d-h",
        "3",
        "--dev-fraction",
        "0.25",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: Vec<String> = stdout(&o)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("0\t"));
    assert!(rows[2].starts_with("1\t"));

    let o = dagseg(&["sweep", "--train", p(&train), "--grid", "0,2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.bin");
    let o = dagseg(&["segment", "--model", p(&missing)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("error[io]: "));
    assert_eq!(stderr(&o).lines().count(), 1);

    let junk = dir.path().join("junk.bin");
    fs::write(&junk, b"not a model").unwrap();
    let o = dagseg(&["segment", "--model", p(&junk)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).starts_with("error[data]: "));

    let bad_corpus = dir.path().join("bad.txt");
    fs::write(&bad_corpus, [0xffu8, 0xfe, b'\n']).unwrap();
    let o = dagseg(&["train", "--train", p(&bad_corpus), "--out", p(&dir.path().join("m"))]);
    assert_eq!(o.status.code(), Some(4));

    let o = dagseg(&["train", "--train", p(&bad_corpus), "--out", "m", "--dropout", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
}
