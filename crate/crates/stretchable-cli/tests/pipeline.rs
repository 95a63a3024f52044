//! Behavioral tests for the `stretchable` binary: exit codes, the
//! JSON error contract, configuration precedence, batching, and the
//! diagnose report.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stretchable"))
        .args(args)
        .output()
        .expect("the pipeline binary runs")
}

fn assert_ok(output: &Output) {
    assert!(
        output.status.success(),
        "expected success, stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

/// Exit code 2 with exactly one JSON object line on stderr.
fn assert_data_error(output: &Output) -> String {
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "expected one error line, got {stderr:?}");
    let doc: Value = serde_json::from_str(lines[0]).expect("stderr line is JSON");
    doc["error"]
        .as_str()
        .expect("error field is a string")
        .to_string()
}

fn write(path: &Path, contents: &str) {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).unwrap();
    }
    std::fs::write(path, contents).unwrap();
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["extract", "--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["shrink"]).status.code(), Some(1));
    assert_eq!(run(&["extract", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(
        run(&["extract", "--min-total", "many"]).status.code(),
        Some(1)
    );
}

#[test]
fn data_errors_exit_two_with_one_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let message = assert_data_error(&run(&["extract", "--output-dir", out]));
    assert!(message.contains("--input"), "got {message:?}");

    // Reading a stage input that does not exist.
    let message = assert_data_error(&run(&["analyze", "--output-dir", out]));
    assert!(message.contains("matches.tsv"), "got {message:?}");

    // A kernel that matched nothing.
    write(&dir.path().join("matches.tsv"), "(ha)\thaha\t5\n");
    let message = assert_data_error(&run(&["tree", "--output-dir", out, "--kernel", "[zz]oops"]));
    assert!(message.contains("kernel"), "got {message:?}");

    // Explicit --index files must exist.
    let message = assert_data_error(&run(&[
        "diagnose",
        "--output-dir",
        out,
        "--kernel",
        "(ha)",
        "--index",
        dir.path().join("nowhere.tsv").to_str().unwrap(),
    ]));
    assert!(message.contains("nowhere.tsv"), "got {message:?}");

    // The cutoff regression needs more ranks than the fit window.
    let message = assert_data_error(&run(&["analyze", "--output-dir", out, "--cutoff"]));
    assert!(message.contains("rank"), "got {message:?}");
}

#[test]
fn diagnose_requires_a_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let message = assert_data_error(&run(&[
        "diagnose",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]));
    assert!(message.contains("--kernel"), "got {message:?}");
}

#[test]
fn extract_writes_the_candidate_table() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    let long_goal = format!("G{}AL", "O".repeat(35));
    write(&corpus, &format!("{long_goal}!! what a goal\nhi there\n"));

    assert_ok(&run(&[
        "extract",
        "--input",
        corpus.to_str().unwrap(),
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]));
    let expected = format!("g{}al\t1\n", "o".repeat(35));
    assert_eq!(read(&dir.path().join("tokens.tsv")), expected);
}

#[test]
fn flags_override_config_file_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    write(&corpus, &format!("{}\n", "o".repeat(12)));
    let config = dir.path().join("pipeline.conf");
    write(&config, "# lower the candidate threshold\nmin_total = 10\n");
    let corpus = corpus.to_str().unwrap();
    let config = config.to_str().unwrap();

    // Default threshold (30): a 12-letter token is no candidate.
    let out = dir.path().join("defaults");
    assert_ok(&run(&[
        "extract",
        "--input",
        corpus,
        "--output-dir",
        out.to_str().unwrap(),
    ]));
    assert_eq!(read(&out.join("tokens.tsv")), "");

    // The config file lowers it to 10.
    let out = dir.path().join("filed");
    assert_ok(&run(&[
        "extract",
        "--input",
        corpus,
        "--config",
        config,
        "--output-dir",
        out.to_str().unwrap(),
    ]));
    assert_eq!(
        read(&out.join("tokens.tsv")),
        format!("{}\t1\n", "o".repeat(12))
    );

    // A flag beats the file.
    let out = dir.path().join("flagged");
    assert_ok(&run(&[
        "extract",
        "--input",
        corpus,
        "--config",
        config,
        "--min-total",
        "13",
        "--output-dir",
        out.to_str().unwrap(),
    ]));
    assert_eq!(read(&out.join("tokens.tsv")), "");

    // Unknown config keys are data errors.
    let broken = dir.path().join("broken.conf");
    write(&broken, "min_totale = 10\n");
    let message = assert_data_error(&run(&[
        "extract",
        "--input",
        corpus,
        "--config",
        broken.to_str().unwrap(),
        "--output-dir",
        dir.path().join("unused").to_str().unwrap(),
    ]));
    assert!(message.contains("min_totale"), "got {message:?}");
}

#[test]
fn one_window_flag_derives_the_other() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    write(&corpus, &format!("{}\n{}\n", "o".repeat(10), "o".repeat(9)));

    // --min-total 10 implies pair-repeat 8: the 10-run qualifies, the
    // 9-run does not.
    let out = dir.path().join("by-total");
    assert_ok(&run(&[
        "extract",
        "--input",
        corpus.to_str().unwrap(),
        "--min-total",
        "10",
        "--output-dir",
        out.to_str().unwrap(),
    ]));
    let by_total = read(&out.join("tokens.tsv"));
    assert_eq!(by_total, format!("{}\t1\n", "o".repeat(10)));

    // --pair-repeat 8 implies min-total 10: identical result.
    let out = dir.path().join("by-repeat");
    assert_ok(&run(&[
        "extract",
        "--input",
        corpus.to_str().unwrap(),
        "--pair-repeat",
        "8",
        "--output-dir",
        out.to_str().unwrap(),
    ]));
    assert_eq!(read(&out.join("tokens.tsv")), by_total);
}

#[test]
fn batched_distill_applies_the_persistence_filter() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    // [z] persists across two batches; [w] turns up once in one batch
    // (dropped); [q] turns up in one batch via two distinct words.
    write(
        &corpus,
        &format!(
            "1\t{z} once\n2\t{z} again\n3\t{w} lonely\n3\t{q} and {qq}\n",
            z = "z".repeat(30),
            w = "w".repeat(30),
            q = "q".repeat(30),
            qq = "q".repeat(31),
        ),
    );
    let out = dir.path().to_str().unwrap();

    assert_ok(&run(&[
        "extract",
        "--input",
        corpus.to_str().unwrap(),
        "--batched",
        "--output-dir",
        out,
    ]));
    let batches = read(&dir.path().join("batches.tsv"));
    assert_eq!(
        batches,
        format!(
            "1\t{z}\n2\t{z}\n3\t{q}\n3\t{qq}\n3\t{w}\n",
            z = "z".repeat(30),
            w = "w".repeat(30),
            q = "q".repeat(30),
            qq = "q".repeat(31),
        )
    );

    assert_ok(&run(&["distill", "--batched", "--output-dir", out]));
    assert_eq!(
        read(&dir.path().join("kernels.tsv")),
        "[q]\t\\b[q]+\\b\n[z]\t\\b[z]+\\b\n"
    );
}

#[test]
fn analyze_skips_kernels_without_stretched_tokens() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir.path().join("matches.tsv"), "n[o]\tno\t5\n");

    let output = run(&["analyze", "--output-dir", dir.path().to_str().unwrap()]);
    assert_ok(&output);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("no stretched tokens"),
        "expected a skip warning, got {stderr:?}"
    );
    assert_eq!(read(&dir.path().join("index.tsv")), "");
}

#[test]
fn tree_warns_and_writes_nothing_for_pairless_kernels() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir.path().join("matches.tsv"), "[q]\tqqqqq\t3\n");

    let output = run(&["tree", "--output-dir", dir.path().to_str().unwrap()]);
    assert_ok(&output);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("two-letter element"),
        "expected a skip warning, got {stderr:?}"
    );
    assert!(!dir.path().join("trees").exists());
}

#[test]
fn diagnose_assembles_ranks_metrics_and_tree() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    write(
        &dir.path().join("matches.tsv"),
        "(ha)\thaha\t5\n(pa)\tpapa\t99\n(pa)\tpaaaaaaaaaa\t1\n",
    );
    // analyze builds the index the report draws ranks from: (pa) has
    // one stretched token, (ha) none that split off, so (pa) ranks 1.
    assert_ok(&run(&["analyze", "--output-dir", out]));

    assert_ok(&run(&[
        "diagnose",
        "--output-dir",
        out,
        "--kernel",
        "(pa)",
        "--compare",
        "(ha)",
        "--compare",
        "(xy)",
    ]));
    let report: Value = serde_json::from_str(&read(&dir.path().join("reports/(pa).json"))).unwrap();

    assert_eq!(report["kernel"], "(pa)");
    assert_eq!(report["pattern"], "\\bp[pa]*a[pa]*\\b");
    assert_eq!(report["rank"], 1);
    assert_eq!(report["n_u"], 99);
    assert_eq!(report["n_s"], 1);
    let h = report["h"].as_f64().unwrap();
    let h_alt = report["h_alt"].as_f64().unwrap();
    assert!(
        h_alt > h,
        "token weighting must exceed group weighting here"
    );
    assert_eq!(
        report["distribution"],
        serde_json::json!([
            { "length": 4, "count": 99 },
            { "length": 11, "count": 1 },
        ])
    );
    assert_eq!(report["tree"]["pair"], "pa");
    assert_eq!(
        report["comparisons"],
        serde_json::json!([
            { "kernel": "(ha)", "rank": 2 },
            { "kernel": "(xy)", "rank": null },
        ])
    );

    // Without an index the ranks are unknown, not errors.
    let bare = dir.path().join("bare");
    write(
        &bare.join("matches.tsv"),
        "(pa)\tpapa\t99\n(pa)\tpaaaaaaaaaa\t1\n",
    );
    assert_ok(&run(&[
        "diagnose",
        "--output-dir",
        bare.to_str().unwrap(),
        "--kernel",
        "(pa)",
    ]));
    let report: Value = serde_json::from_str(&read(&bare.join("reports/(pa).json"))).unwrap();
    assert_eq!(report["rank"], Value::Null);
}

#[test]
fn match_validates_the_pattern_column() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    write(&corpus, "no nooo\n");
    write(&dir.path().join("kernels.tsv"), "n[o]\t\\bWRONG\\b\n");

    let message = assert_data_error(&run(&[
        "match",
        "--input",
        corpus.to_str().unwrap(),
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]));
    assert!(message.contains("pattern"), "got {message:?}");
}

#[test]
fn match_counts_every_token_matching_a_kernel_pattern() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    // "no" and "nooo" match n[o]; "noon" does not (o before final n);
    // "on" has the right letters in the wrong order.
    write(&corpus, "No nooo noon on no\n");
    write(&dir.path().join("kernels.tsv"), "n[o]\t\\bn[o]+\\b\n");

    assert_ok(&run(&[
        "match",
        "--input",
        corpus.to_str().unwrap(),
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]));
    assert_eq!(
        read(&dir.path().join("matches.tsv")),
        "n[o]\tno\t2\nn[o]\tnooo\t1\n"
    );
    assert_eq!(
        read(&dir.path().join("distributions/n[o].tsv")),
        "2\t2\n4\t1\n"
    );
}
