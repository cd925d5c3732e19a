use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(name)
}

fn chclin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chclin")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn fib_is_safe() {
    let o = chclin(&["solve", "--format", "machine", corpus("fib.chc").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let first = stdout(&o).lines().next().unwrap().to_string();
    assert!(first.starts_with("verdict=safe k="), "{first}");
    let k: u32 = first.split_whitespace().nth(1).unwrap().trim_start_matches("k=").parse().unwrap();
    assert!(k <= 3);
}

#[test]
fn machine_model_passes_check_model() {
    let fib = corpus("fib.chc");
    let o = chclin(&["solve", "--format", "machine", fib.to_str().unwrap()]);
    let text = stdout(&o);
    let model: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
    assert!(model.contains("false :- 1=0."));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.chc");
    std::fs::write(&path, &model).unwrap();
    let c = chclin(&["check-model", fib.to_str().unwrap(), path.to_str().unwrap()]);
    assert_eq!(c.status.code(), Some(0), "{}", stdout(&c));
    assert_eq!(stdout(&c).trim(), "valid=true");
    // the whole output is accepted too
    std::fs::write(&path, &text).unwrap();
    assert_eq!(chclin(&["check-model", fib.to_str().unwrap(), path.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn a_wrong_model_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.chc");
    std::fs::write(&path, "fib(A,B) :- A=0, B=0.\n").unwrap();
    let c = chclin(&["check-model", corpus("fib.chc").to_str().unwrap(), path.to_str().unwrap()]);
    assert_eq!(c.status.code(), Some(1));
    assert_eq!(stdout(&c).trim(), "valid=false");
}

#[test]
fn kdim_of_fib_at_one_has_twelve_clauses() {
    let o = chclin(&["kdim", corpus("fib.chc").to_str().unwrap(), "-k", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().filter(|l| l.contains(":-")).count(), 12);
}

#[test]
fn machine_kdim_output_parses_back() {
    let o = chclin(&["kdim", "--format", "machine", corpus("fib.chc").to_str().unwrap(), "-k", "1"]);
    let p = chclin::ast::parse_program(&stdout(&o)).expect("exchange format parses");
    assert_eq!(p.clauses.len(), 12);
}

#[test]
fn linearised_output_is_linear() {
    let o = chclin(&["linearise", "--format", "machine", corpus("fib.chc").to_str().unwrap(), "-k", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("% s0 = []")));
    assert!(chclin::ast::parse_program(&text).unwrap().is_linear());
}

#[test]
fn missing_file_is_a_usage_error() {
    assert_eq!(chclin(&["solve", "nosuchfile"]).status.code(), Some(3));
    assert_eq!(chclin(&["solve"]).status.code(), Some(3));
    assert_eq!(chclin(&["frobnicate"]).status.code(), Some(3));
}

#[test]
fn syntax_error_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.chc");
    std::fs::write(&path, "p(X) :- X >= .\n").unwrap();
    assert_eq!(chclin(&["solve", path.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn exit_codes_match_verdicts() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/corpus");
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    for f in files {
        let o = chclin(&["solve", "--format", "machine", "--timeout", "60", f.to_str().unwrap()]);
        let first = stdout(&o).lines().next().unwrap_or_default().to_string();
        let want = match first.split_whitespace().next() {
            Some("verdict=safe") => 0,
            Some("verdict=unsafe") => 1,
            Some("verdict=unknown") => 2,
            other => panic!("{}: unexpected {other:?}", f.display()),
        };
        assert_eq!(o.status.code(), Some(want), "{}", f.display());
    }
}

#[test]
fn unsafe_output_is_a_confirmed_trace() {
    let bug = corpus("fib_bug.chc");
    let o = chclin(&["solve", "--format", "machine", bug.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let witness = stdout(&o).lines().nth(1).unwrap().to_string();
    assert_eq!(witness, "c3(c2(c2(c1,c1),c2(c1,c2(c1,c1))))");
    let p = chclin::ast::parse_program(&std::fs::read_to_string(&bug).unwrap()).unwrap();
    let t = chclin::dimension::TraceTree::parse(&witness).unwrap();
    assert!(chclin::driver::confirm_cex(&p, &t).unwrap());
}

#[test]
fn timeout_reports_unknown() {
    // with reuse on, fib does not settle within a second
    let o = chclin(&["solve", "--format", "machine", "--reuse", "on", "--timeout", "1", corpus("fib.chc").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).lines().next().unwrap().ends_with("reason=timeout"), "{}", stdout(&o));
}

#[test]
fn oracle_lists_the_fib_bug_witness() {
    let o = chclin(&["oracle", corpus("fib_bug.chc").to_str().unwrap(), "--depth", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("c3(c2(c2(c1,c1),c2(c1,c2(c1,c1))))"));
    assert!(text.contains("derivable=yes"));
}
