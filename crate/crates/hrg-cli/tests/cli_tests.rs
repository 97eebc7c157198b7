//! End-to-end tests of the `hrg` binary: output formats, exit codes,
//! determinism, and diagnostics.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn grammar(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../grammars")
        .join(name);
    p.to_str().unwrap().to_string()
}

fn hrg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hrg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_temp(name: &str, content: &str) -> String {
    let path = std::env::temp_dir().join(format!("hrg-test-{}-{name}", std::process::id()));
    fs::write(&path, content).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn analyze_reports_table_sizes_and_exit_codes() {
    let o = hrg(&["analyze", &grammar("trees.hrg")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o).lines().next().unwrap(),
        "states=4 items=10 transitions=4 conflicts=0 fec=yes"
    );

    let o = hrg(&["analyze", &grammar("persuade.hrg")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o).lines().next().unwrap(),
        "states=9 items=36 transitions=20 conflicts=0 fec=yes"
    );

    let o = hrg(&["analyze", &grammar("series-parallel.hrg")]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    let first = out.lines().next().unwrap();
    assert!(first.contains("fec=no"), "got {first}");
    assert!(!first.contains("conflicts=0"), "got {first}");
    assert!(out.contains("conflict state="));
    assert!(out.contains("fec-witness"));
}

#[test]
fn tables_output_is_byte_identical_across_runs() {
    let out1 = write_temp("tables1.txt", "");
    let out2 = write_temp("tables2.txt", "");
    for out in [&out1, &out2] {
        let o = hrg(&["tables", &grammar("persuade.hrg"), "-o", out]);
        assert_eq!(o.status.code(), Some(0));
    }
    let a = fs::read(&out1).unwrap();
    let b = fs::read(&out2).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn tables_dump_documents_convention_and_anchors() {
    let o = hrg(&["tables", &grammar("trees.hrg")]);
    assert_eq!(o.status.code(), Some(0));
    let dump = stdout(&o);
    assert!(dump.contains("# Counting convention"));
    assert!(dump.contains("reported states=4 items=10 transitions=4"));
    assert!(dump.contains("full states="));
    assert!(dump.contains("follow={e(b,_)}"));
    assert!(dump.contains("follow*={$,e(*,_),e(_,_),e(a,_)}"));
}

#[test]
fn parse_accepts_prints_derivation_and_is_order_insensitive() {
    let fwd = write_temp("t-fwd.graph", "root(1) e(1,2) e(1,3) e(2,4)\n");
    let rev = write_temp("t-rev.graph", "e(2,4)\ne(1,3)\ne(1,2)\nroot(1)\n");
    let o = hrg(&["parse", &grammar("trees.hrg"), &fwd]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 8);
    let o2 = hrg(&["parse", &grammar("trees.hrg"), &rev]);
    assert_eq!(o2.status.code(), Some(0));
    assert_eq!(stdout(&o), stdout(&o2));
}

#[test]
fn parse_rejects_with_diagnostic() {
    let bad = write_temp("t-bad.graph", "root(1) e(2,3)\n");
    let o = hrg(&["parse", &grammar("trees.hrg"), &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("result=reject"));
}

#[test]
fn parse_trace_and_fec_flags() {
    let t = write_temp("t-trace.graph", "root(1) e(1,2)\n");
    let o = hrg(&[
        "parse",
        &grammar("trees.hrg"),
        &t,
        "--trace",
        "--fec=check-dynamic",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let err = stderr(&o);
    assert!(err.lines().all(|l| l.starts_with("trace ")));
    assert!(err.lines().count() >= 4);

    // A conflicted grammar is refused before parsing.
    let o = hrg(&["parse", &grammar("series-parallel.hrg"), &t]);
    assert_eq!(o.status.code(), Some(2)); // input labels unknown to it
    let sp = write_temp("sp.graph", "e(1,2)\n");
    let o = hrg(&["parse", &grammar("series-parallel.hrg"), &sp]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("not-psr-parsable"));
}

#[test]
fn dot_exports_are_wellformed() {
    for flag in ["--ncfa", "--dcfa"] {
        let o = hrg(&["dot", &grammar("trees.hrg"), flag]);
        assert_eq!(o.status.code(), Some(0));
        let text = stdout(&o);
        assert!(text.starts_with("digraph"));
        assert!(text.trim_end().ends_with('}'));
        assert_eq!(text.matches('"').count() % 2, 0);
        for line in text.lines().skip(2).take_while(|l| *l != "}") {
            assert!(
                line.ends_with(';'),
                "statement not terminated: {line}"
            );
        }
    }
}

#[test]
fn oracle_crosscheck_passes_on_trees() {
    let o = hrg(&["oracle", &grammar("trees.hrg"), "--max-lits", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("disagreements=0"), "got {out}");
}

#[test]
fn file_diagnostics_use_key_value_form_and_exit_2() {
    let o = hrg(&["analyze", "/nonexistent.hrg"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error=io"));

    let bad = write_temp("bad.hrg", "start Z\nnonterm Z 0\nrule Z() -> what(x)\n");
    let o = hrg(&["analyze", &bad]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.starts_with("error=grammar"));
    assert!(err.contains("line=3"));
    assert!(err.contains("col="));

    let badgraph = write_temp("bad.graph", "e(1,1)\n");
    let o = hrg(&["parse", &grammar("trees.hrg"), &badgraph]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error=graph"));
}
