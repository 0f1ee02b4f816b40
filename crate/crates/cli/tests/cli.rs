use std::fs;
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use dcyk_core::{corpus, cyk::recognizes, cyk_parse, grammar::parse_sentences, Chart};

fn dcyk() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dcyk"));
    for (key, _) in std::env::vars() {
        if key.starts_with("DCYK_") {
            cmd.env_remove(key);
        }
    }
    cmd
}

fn run(args: &[&str]) -> Output {
    dcyk().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const FIG1_CHART: [(usize, usize, &str); 5] = [
    (0, 1, "D"),
    (1, 2, "D"),
    (2, 3, "E"),
    (1, 3, "S"),
    (0, 3, "S"),
];

#[test]
fn parse_prints_the_chart_and_signals_recognition() {
    let o = run(&["parse", "--grammar", "fig1", "a", "a", "b"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.ends_with("# recognized\n"), "{text}");
    let chart = Chart::parse(&text, None).unwrap();
    assert_eq!(chart.len(), 5);
    for (i, j, s) in FIG1_CHART {
        assert!(chart.contains(i, j, s));
    }

    let o = run(&["parse", "--grammar", "fig1", "b", "a"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).ends_with("# not recognized\n"));
}

#[test]
fn errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.cfg");
    let o = run(&["parse", "--grammar", missing.to_str().unwrap(), "a", "b"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    assert_eq!(
        run(&["parse", "--grammar", "fig1", "a", "z"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["dparse", "--grammar", "fig1", "--dim", "4", "a", "b"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&[
            "dparse",
            "--grammar",
            "fig1",
            "--threshold",
            "1.5",
            "a",
            "b"
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn distributed_parse_matches_the_symbolic_output() {
    let symbolic = stdout(&run(&["parse", "--grammar", "fig1", "a", "a", "b"]));
    let o = run(&[
        "dparse",
        "--grammar",
        "fig1",
        "--dim",
        "2000",
        "--seed",
        "1",
        "a",
        "a",
        "b",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), symbolic);
}

#[test]
fn tiny_dimension_is_not_an_error() {
    let o = run(&["dparse", "--grammar", "fig1", "--dim", "8", "a", "a", "b"]);
    assert!(matches!(o.status.code(), Some(0 | 1)), "{:?}", o);
    Chart::parse(&stdout(&o), None).unwrap();
}

#[test]
fn lower_threshold_gives_a_superset() {
    let chart = |t: &str| {
        let o = run(&[
            "dparse",
            "--grammar",
            "g0",
            "--dim",
            "300",
            "--seed",
            "5",
            "--threshold",
            t,
            "c",
            "a",
            "b",
            "c",
        ]);
        Chart::parse(&stdout(&o), None).unwrap()
    };
    let (loose, strict) = (chart("0.5"), chart("0.99"));
    for (i, j, s) in strict.triples() {
        assert!(loose.contains(i, j, s), "({i},{j},{s}) lost at 0.5");
    }
}

#[test]
fn dparse_writes_chart_scores_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run(&[
        "dparse",
        "--grammar",
        "fig1",
        "--dim",
        "64",
        "--dump-scores",
        "--out",
        out.to_str().unwrap(),
        "a",
        "b",
    ]);
    assert!(matches!(o.status.code(), Some(0 | 1)));
    assert_eq!(
        fs::read_to_string(out.join("chart.txt")).unwrap(),
        stdout(&o)
    );
    let scores = fs::read_to_string(out.join("scores.csv")).unwrap();
    assert!(scores.starts_with("i,j,symbol,raw,score\n"));
    // 3 spans, 3 nonterminals.
    assert_eq!(scores.lines().count(), 1 + 3 * 3);

    // A bare boolean flag does not swallow the first token.
    let bare = run(&[
        "dparse",
        "--grammar",
        "fig1",
        "--dim",
        "64",
        "--dump-scores",
        "a",
        "b",
    ]);
    assert!(matches!(bare.status.code(), Some(0 | 1)), "{bare:?}");
    assert_eq!(String::from_utf8(bare.stderr).unwrap(), scores);

    // The written config reproduces the run.
    let config = out.join("config.txt");
    let again = dcyk()
        .args(["dparse", "--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(stdout(&again), stdout(&o));
}

#[test]
fn gen_is_deterministic_and_recognized() {
    let a = run(&[
        "gen",
        "--grammar",
        "g0",
        "--count",
        "200",
        "--max-len",
        "7",
        "--seed",
        "11",
    ]);
    let b = run(&[
        "gen",
        "--grammar",
        "g0",
        "--count",
        "200",
        "--max-len",
        "7",
        "--seed",
        "11",
    ]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let sentences = parse_sentences(&stdout(&a)).unwrap();
    assert_eq!(sentences.len(), 200);
    for (id, g) in corpus::family() {
        for w in &sentences {
            assert!(w.len() <= 7);
            assert!(
                recognizes(&cyk_parse(&g, w).unwrap(), &g),
                "{id} rejects {w}"
            );
        }
    }
}

#[test]
fn gen_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.txt");
    let o = run(&[
        "gen",
        "--grammar",
        "fig1",
        "--count",
        "0",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(&path).unwrap(), "");
    assert!(dir.path().join("empty.txt.config.txt").exists());

    let o = run(&["gen", "--grammar", "fig1", "--count", "3", "--max-len", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_reports_differences() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    fs::write(
        &a,
        stdout(&run(&["parse", "--grammar", "fig1", "a", "a", "b"])),
    )
    .unwrap();
    fs::write(
        &b,
        stdout(&run(&["parse", "--grammar", "fig1", "a", "a", "b"])),
    )
    .unwrap();
    let same = run(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(same.status.code(), Some(0));

    let mut chart = Chart::parse(&fs::read_to_string(&a).unwrap(), None).unwrap();
    chart.insert(0, 2, "S");
    fs::write(&b, chart.render()).unwrap();
    let diff = run(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(diff.status.code(), Some(1));
    let text = stdout(&diff);
    assert!(text.contains("+ 0 2 : S"), "{text}");
    assert!(
        text.contains("precision 0.833333 recall 1.000000"),
        "{text}"
    );
}

#[test]
fn flags_override_environment_which_overrides_config_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "grammar = fig1\nsentence = b a\ndim = 32\nthreshold = 0.7\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = dcyk()
        .args([
            "dparse",
            "--config",
            cfg.to_str().unwrap(),
            "--dim",
            "48",
            "--out",
            out.to_str().unwrap(),
        ])
        .env("DCYK_DIM", "40")
        .env("DCYK_THRESHOLD", "0.8")
        .env("DCYK_SEED", "9")
        .output()
        .unwrap();
    assert!(matches!(o.status.code(), Some(0 | 1)), "{o:?}");
    let written = fs::read_to_string(out.join("config.txt")).unwrap();
    for line in [
        "grammar = fig1",
        "sentence = b a",
        "dim = 48",
        "threshold = 0.8",
        "seed = 9",
    ] {
        assert!(
            written.lines().any(|l| l == line),
            "missing `{line}` in\n{written}"
        );
    }
}

fn sweep_args<'a>(out: &'a Path, workers: &'a str) -> Vec<String> {
    [
        "sweep",
        "--grammar",
        "g0",
        "--dim",
        "96,160",
        "--seed",
        "2,3",
        "--count",
        "30",
        "--workers",
        workers,
        "--out",
        out.to_str().unwrap(),
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

#[test]
fn sweep_writes_one_row_per_combination_and_resumes_identically() {
    let dir = tempfile::tempdir().unwrap();
    let full = dir.path().join("full");
    let o = dcyk().args(sweep_args(&full, "1")).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let rows = fs::read_to_string(full.join("rows.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 30 * 2 * 2);
    for file in [
        "config.txt",
        "sentences.txt",
        "timings.csv",
        "summary.csv",
        "summary.txt",
    ] {
        assert!(full.join(file).exists(), "{file}");
    }
    assert!(!full.join("rows.partial.csv").exists());

    // Interrupt a second run once some rows are on disk, then resume it.
    let resumed = dir.path().join("resumed");
    let mut child = dcyk()
        .args(sweep_args(&resumed, "1"))
        .stdout(Stdio::null())
        .spawn()
        .unwrap();
    let partial = resumed.join("rows.partial.csv");
    let start = Instant::now();
    loop {
        let lines = fs::read_to_string(&partial)
            .map(|t| t.lines().count())
            .unwrap_or(0);
        if lines > 5 || start.elapsed() > Duration::from_secs(60) {
            break;
        }
        if child.try_wait().unwrap().is_some() {
            break;
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    let _ = child.kill();
    let _ = child.wait();
    let mut other = sweep_args(&resumed, "1");
    other[4] = "96,200".into();
    assert_eq!(
        dcyk().args(other).output().unwrap().status.code(),
        Some(2),
        "a different config must not resume"
    );
    let o = dcyk().args(sweep_args(&resumed, "2")).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    assert_eq!(fs::read_to_string(resumed.join("rows.csv")).unwrap(), rows);
    assert_eq!(
        fs::read_to_string(resumed.join("summary.csv")).unwrap(),
        fs::read_to_string(full.join("summary.csv")).unwrap()
    );
}
