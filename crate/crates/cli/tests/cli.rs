use std::path::PathBuf;
use std::process::{Command, Output};

use dhkpr::report::Report;

/// `(name, args)` for each golden report.
fn golden() -> Vec<(String, Vec<String>)> {
    let text = std::fs::read_to_string(dir().join("tests/golden/manifest.txt")).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let mut words = l.split_whitespace().map(String::from);
            (words.next().unwrap(), words.collect())
        })
        .collect()
}

fn strs(args: &[String]) -> Vec<&str> {
    args.iter().map(String::as_str).collect()
}

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn dhkpr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dhkpr"))
        .args(args)
        .current_dir(dir())
        .env_remove("DHKPR_ROUND_CAP")
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = dhkpr(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn golden_reports() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for (name, args) in golden() {
        let path = dir().join("tests/golden").join(format!("{name}.txt"));
        let got = stdout(&strs(&args));
        if update {
            std::fs::write(&path, &got).unwrap();
            continue;
        }
        let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(got == want, "{name}: output differs from {}", path.display());
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    for (_, args) in golden() {
        let args = strs(&args);
        assert_eq!(stdout(&args), stdout(&args), "{args:?}");
    }
}

#[test]
fn reports_parse_and_carry_provenance() {
    for (name, args) in golden() {
        let text = stdout(&strs(&args));
        let report = Report::parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(report.to_string(), text, "{name}");
        let run = report.section("run").unwrap();
        assert_eq!(run.get("subcommand"), Some(args[0].as_str()));
        let prov = report.section("provenance").unwrap();
        assert!(!prov.fields.is_empty());
        let params = report.section("parameters").unwrap();
        let result = report.section("result");
        for (key, source) in &prov.fields {
            // --chain is reported as the sweep strategy; per-guess values as `<key>_used`.
            let shown = if key == "chain" { "strategy" } else { key.as_str() };
            let used = result.and_then(|r| r.get(&format!("{key}_used"))).is_some();
            assert!(
                params.get(shown).is_some() || used || source == "unset",
                "{name}: {key}"
            );
        }
    }
}

#[test]
fn provenance_names_the_source_of_each_value() {
    let text = stdout(&["cluster", "gen:two-clique:6", "--seed", "1", "--eps", "0.2"]);
    let report = Report::parse(&text).unwrap();
    let prov = report.section("provenance").unwrap();
    assert_eq!(prov.get("eps"), Some("flag"));
    assert_eq!(prov.get("c"), Some("default"));
    assert!(prov.get("sigma").unwrap().starts_with("derived"));
    assert!(prov.get("varsigma").unwrap().starts_with("derived"));

    let out = Command::new(env!("CARGO_BIN_EXE_dhkpr"))
        .args(["hkpr", "gen:path:4", "--seed", "1"])
        .env("DHKPR_ROUND_CAP", "500")
        .output()
        .unwrap();
    let report = Report::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(report.section("provenance").unwrap().get("round_cap"), Some("env"));
    assert_eq!(report.section("parameters").unwrap().get("round_cap"), Some("500"));
}

#[test]
fn exact_at_time_zero_is_the_indicator() {
    let report = Report::parse(&stdout(&["hkpr-exact", "gen:karate", "--seed-node", "5", "--t", "0"])).unwrap();
    let table = report.section("vector").unwrap().table.as_ref().unwrap();
    assert_eq!(table.rows.len(), 1);
    assert_eq!(table.rows[0][0], "5");
    assert_eq!(table.rows[0][1].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn planted_cluster_is_found() {
    let (_, args) = golden()
        .into_iter()
        .find(|(name, _)| name == "cluster_two_cliques")
        .unwrap();
    let report = Report::parse(&stdout(&strs(&args))).unwrap();
    let result = report.section("result").unwrap();
    assert_eq!(
        result.get("set"),
        Some("{0,1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,19}")
    );
    assert_eq!(result.get("ratio"), Some("1/381"));
}

#[test]
fn trace_file_covers_every_edge_load() {
    let path = std::env::temp_dir().join(format!("dhkpr-trace-{}.txt", std::process::id()));
    let text = stdout(&[
        "hkpr",
        "gen:path:6",
        "--seed",
        "4",
        "--eps",
        "0.4",
        "--trace",
        path.to_str().unwrap(),
    ]);
    let report = Report::parse(&text).unwrap();
    let stats = report.section("stats").unwrap();
    let field = |k: &str| stats.get(k).unwrap().parse::<u64>().unwrap();
    let trace = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    // One line per loaded edge direction per round, bits summed.
    let events: Vec<Vec<u64>> = trace
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(' ').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert!(!events.is_empty() && events.len() as u64 <= field("messages"));
    assert_eq!(events.iter().map(|e| e[3]).max(), Some(field("max_edge_bits")));
    assert!(events.iter().all(|e| e[0] >= 1 && e[0] <= field("logical_rounds")));
    assert!(events.windows(2).all(|w| w[0][0] <= w[1][0]));
}

fn exit_code(args: &[&str]) -> i32 {
    let out = dhkpr(args);
    assert!(out.stdout.is_empty(), "{args:?} printed a report");
    assert!(!out.stderr.is_empty());
    out.status.code().unwrap()
}

#[test]
fn argument_errors_exit_with_two() {
    assert_eq!(exit_code(&["hkpr", "gen:karate"]), 2);
    assert_eq!(exit_code(&["hkpr", "gen:karate", "--seed", "1", "--eps", "0.7"]), 2);
    assert_eq!(exit_code(&["hkpr", "gen:nope:3", "--seed", "1"]), 2);
    assert_eq!(
        exit_code(&["hkpr", "gen:karate", "--seed", "1", "--seed-node", "34"]),
        2
    );
    assert_eq!(exit_code(&["frobnicate"]), 2);
    assert_eq!(exit_code(&["kmachine", "--messages", "10"]), 2);
    assert_eq!(exit_code(&["sweep", "gen:karate", "--seed", "1", "--chain"]), 2);
}

#[test]
fn graph_errors_exit_with_one() {
    let tmp = std::env::temp_dir();
    let bad = [
        ("loop", "0 1\n1 1\n"),
        ("split", "0 1\n2 3\n"),
        ("junk", "0 x\n"),
        ("empty", "# nothing\n"),
    ];
    for (name, body) in bad {
        let path = tmp.join(format!("dhkpr-{name}-{}.txt", std::process::id()));
        std::fs::write(&path, body).unwrap();
        let code = exit_code(&["hkpr", path.to_str().unwrap(), "--seed", "1"]);
        std::fs::remove_file(&path).ok();
        assert_eq!(code, 1, "{name}");
    }
    assert_eq!(exit_code(&["hkpr", "tests/data/missing.txt", "--seed", "1"]), 1);
}
