//! End-to-end tests of the `sdseq` binary: build/query round-trips, output
//! equality against an independent reference interpreter, report shapes,
//! fuzz pass/divergence paths, and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sdseq"))
}

fn scratch(tag: &str) -> PathBuf {
    let d = std::env::temp_dir()
        .join(format!("sdseq-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn write(p: &Path, data: impl AsRef<[u8]>) {
    std::fs::write(p, data).unwrap();
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn sdseq")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf8 stdout")
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).expect("utf8 stderr")
}

// === reference interpreter ==============================================
//
// A deliberately plain re-implementation of the query semantics over a byte
// vector, used to check the real tool byte for byte.

fn ref_render(b: u8) -> String {
    match b {
        b' ' => "\\s".into(),
        b'\t' => "\\t".into(),
        b'\n' => "\\n".into(),
        b'\\' => "\\\\".into(),
        0x21..=0x7e => (b as char).to_string(),
        _ => format!("\\x{b:02x}"),
    }
}

fn ref_sym(tok: &str) -> Option<u8> {
    let b = tok.as_bytes();
    match b {
        [c] => Some(*c),
        [b'\\', b's'] => Some(b' '),
        [b'\\', b't'] => Some(b'\t'),
        [b'\\', b'n'] => Some(b'\n'),
        [b'\\', b'\\'] => Some(b'\\'),
        [b'\\', b'x', h, l] => {
            let h = (*h as char).to_digit(16)?;
            let l = (*l as char).to_digit(16)?;
            Some((h * 16 + l) as u8)
        }
        _ => None,
    }
}

/// Returns (stdout, exit code). Only handles scripts whose symbols occur in
/// the input (the tests generate such scripts).
fn reference_query(input: &[u8], script: &str, keep_going: bool) -> (String, i32) {
    let mut text: Vec<u8> = input.to_vec();
    let mut out = String::new();
    for (no, raw) in script.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let no = no + 1;
        let t: Vec<&str> = line.split_whitespace().collect();
        let n = text.len() as u64;
        let mut fail = |out: &mut String, msg: String| -> bool {
            out.push_str(&format!("error: line {no}: {msg}\n"));
            !keep_going
        };
        match t[0] {
            "I" => {
                let pos: u64 = t[1].parse().unwrap();
                let sym = ref_sym(t[2]).unwrap();
                if pos > n + 1 {
                    if fail(&mut out, format!("position {pos} out of range (n={n})")) {
                        return (out, 2);
                    }
                    continue;
                }
                text.insert(pos as usize - 1, sym);
            }
            "D" => {
                let pos: u64 = t[1].parse().unwrap();
                if pos > n {
                    if fail(&mut out, format!("position {pos} out of range (n={n})")) {
                        return (out, 2);
                    }
                    continue;
                }
                text.remove(pos as usize - 1);
            }
            "R" => {
                let sym = ref_sym(t[1]).unwrap();
                let pos: u64 = t[2].parse().unwrap();
                if pos > n {
                    if fail(&mut out, format!("position {pos} out of range (n={n})")) {
                        return (out, 2);
                    }
                    continue;
                }
                let c = text[..pos as usize].iter().filter(|&&b| b == sym).count();
                out.push_str(&format!("{c}\n"));
            }
            "S" => {
                let sym = ref_sym(t[1]).unwrap();
                let k: u64 = t[2].parse().unwrap();
                let c = text.iter().filter(|&&b| b == sym).count() as u64;
                if k > c {
                    if fail(&mut out, format!("occurrence {k} out of range ({c} present)")) {
                        return (out, 2);
                    }
                    continue;
                }
                let p = text
                    .iter()
                    .enumerate()
                    .filter(|(_, &b)| b == sym)
                    .nth(k as usize - 1)
                    .unwrap()
                    .0;
                out.push_str(&format!("{}\n", p + 1));
            }
            "A" => {
                let pos: u64 = t[1].parse().unwrap();
                if pos > n || n == 0 {
                    if fail(&mut out, format!("position {pos} out of range (n={n})")) {
                        return (out, 2);
                    }
                    continue;
                }
                out.push_str(&format!("{}\n", ref_render(text[pos as usize - 1])));
            }
            "X" => {
                let pos: u64 = t[1].parse().unwrap();
                let len: u64 = t[2].parse().unwrap();
                if pos > n + 1 || pos - 1 + len > n {
                    if fail(&mut out, format!("range {pos}+{len} out of range (n={n})")) {
                        return (out, 2);
                    }
                    continue;
                }
                let s: String = text[pos as usize - 1..(pos - 1 + len) as usize]
                    .iter()
                    .map(|&b| ref_render(b))
                    .collect();
                out.push_str(&format!("{s}\n"));
            }
            other => panic!("reference interpreter got op {other}"),
        }
    }
    (out, 0)
}

// === tests ==============================================================

#[test]
fn build_then_extract_roundtrips_input() {
    let dir = scratch("roundtrip");
    let text = "mississippi riverbank";
    write(&dir.join("in.txt"), text);
    let o = run(bin()
        .arg("build")
        .arg(dir.join("in.txt"))
        .args(["--out"])
        .arg(dir.join("x.idx")));
    assert!(o.status.success(), "build failed: {}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains(&format!("n={}", text.len())), "report: {s}");
    assert!(s.contains("h0="), "report: {s}");
    assert!(s.contains("component"), "report: {s}");

    write(&dir.join("s.txt"), format!("X 1 {}\n", text.len()));
    let o = run(bin()
        .arg("query")
        .arg(dir.join("x.idx"))
        .arg(dir.join("s.txt")));
    assert!(o.status.success());
    // Spaces render as \s in result lines.
    assert_eq!(stdout(&o), "mississippi\\sriverbank\n");
}

#[test]
fn build_sigma_override_and_overflow() {
    let dir = scratch("sigma");
    write(&dir.join("dna.txt"), "ACGTACGTACCCGTA");
    let ok = run(bin()
        .arg("build")
        .arg(dir.join("dna.txt"))
        .args(["--sigma", "4", "--out"])
        .arg(dir.join("d.idx")));
    assert!(ok.status.success(), "{}", stderr(&ok));
    assert!(stdout(&ok).contains("sigma=4"));

    let bad = run(bin()
        .arg("build")
        .arg(dir.join("dna.txt"))
        .args(["--sigma", "3", "--out"])
        .arg(dir.join("d2.idx")));
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("symbol overflow"), "{}", stderr(&bad));
}

#[test]
fn build_empty_file_yields_valid_empty_index() {
    let dir = scratch("empty");
    write(&dir.join("e.txt"), "");
    let o = run(bin()
        .arg("build")
        .arg(dir.join("e.txt"))
        .args(["--out"])
        .arg(dir.join("e.idx")));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("n=0"));

    // Empty extraction works; any access is an error result.
    write(&dir.join("s.txt"), "X 1 0\n");
    let o = run(bin().arg("query").arg(dir.join("e.idx")).arg(dir.join("s.txt")));
    assert!(o.status.success());
    assert_eq!(stdout(&o), "\n");

    write(&dir.join("s2.txt"), "A 1\n");
    let o = run(bin().arg("query").arg(dir.join("e.idx")).arg(dir.join("s2.txt")));
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stdout(&o), "error: line 1: position 1 out of range (n=0)\n");
}

#[test]
fn query_output_matches_reference_interpreter() {
    let dir = scratch("oracle");
    // Deterministic input and script over a small alphabet with escapes.
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut next = move |m: u64| {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 33) % m
    };
    let alpha = b"abc d\\";
    let input: Vec<u8> = (0..400).map(|_| alpha[next(6) as usize]).collect();
    write(&dir.join("in.txt"), &input);

    let lit = |b: u8| match b {
        b' ' => "\\s".to_string(),
        b'\\' => "\\\\".to_string(),
        v => (v as char).to_string(),
    };
    let mut script = String::new();
    let mut n = input.len() as u64;
    for _ in 0..300 {
        let sym = lit(alpha[next(6) as usize]);
        // Positions drift out of range now and then to exercise error lines.
        let pos = next(n + 8) + 1;
        match next(6) {
            0 => {
                script.push_str(&format!("I {pos} {sym}\n"));
                if pos <= n + 1 {
                    n += 1;
                }
            }
            1 => {
                script.push_str(&format!("D {pos}\n"));
                if pos <= n && n > 0 {
                    n -= 1;
                }
            }
            2 => script.push_str(&format!("R {sym} {pos}\n")),
            3 => script.push_str(&format!("S {sym} {}\n", next(40) + 1)),
            4 => script.push_str(&format!("A {pos}\n")),
            _ => {
                let len = next(20);
                script.push_str(&format!("X {pos} {len}\n"));
            }
        }
    }
    write(&dir.join("s.txt"), &script);

    let o = run(bin()
        .arg("build")
        .arg(dir.join("in.txt"))
        .args(["--r", "3", "--out"])
        .arg(dir.join("x.idx")));
    assert!(o.status.success(), "{}", stderr(&o));

    let o = run(bin()
        .arg("query")
        .arg(dir.join("x.idx"))
        .arg(dir.join("s.txt"))
        .arg("--keep-going"));
    let (want, want_code) = reference_query(&input, &script, true);
    assert_eq!(o.status.code(), Some(want_code));
    assert_eq!(stdout(&o), want, "tool and reference interpreter disagree");

    // Without --keep-going both stop at the first failing op.
    let o = run(bin()
        .arg("query")
        .arg(dir.join("x.idx"))
        .arg(dir.join("s.txt")));
    let (want, want_code) = reference_query(&input, &script, false);
    assert_eq!(o.status.code(), Some(want_code));
    assert_eq!(stdout(&o), want);
}

#[test]
fn query_save_persists_mutations() {
    let dir = scratch("save");
    write(&dir.join("in.txt"), "hello");
    let o = run(bin()
        .arg("build")
        .arg(dir.join("in.txt"))
        .args(["--out"])
        .arg(dir.join("x.idx")));
    assert!(o.status.success());

    // Mutate without saving: original content remains.
    write(&dir.join("mut.txt"), "I 1 o\nD 6\n");
    let o = run(bin().arg("query").arg(dir.join("x.idx")).arg(dir.join("mut.txt")));
    assert!(o.status.success());
    write(&dir.join("show.txt"), "X 1 5\n");
    let o = run(bin().arg("query").arg(dir.join("x.idx")).arg(dir.join("show.txt")));
    assert_eq!(stdout(&o), "hello\n");

    // Mutate with --save: new content persists ("ohell" after insert+delete).
    let o = run(bin()
        .arg("query")
        .arg(dir.join("x.idx"))
        .arg(dir.join("mut.txt"))
        .arg("--save"));
    assert!(o.status.success());
    let o = run(bin().arg("query").arg(dir.join("x.idx")).arg(dir.join("show.txt")));
    assert_eq!(stdout(&o), "ohell\n");
}

#[test]
fn query_parse_error_is_line_numbered() {
    let dir = scratch("parse");
    write(&dir.join("in.txt"), "abc");
    let o = run(bin()
        .arg("build")
        .arg(dir.join("in.txt"))
        .args(["--out"])
        .arg(dir.join("x.idx")));
    assert!(o.status.success());
    write(&dir.join("s.txt"), "A 1\n\nZ 9 9\n");
    let o = run(bin().arg("query").arg(dir.join("x.idx")).arg(dir.join("s.txt")));
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("line 3") && e.contains("unknown op 'Z'"), "{e}");
    // Parsing happens before execution: no partial output.
    assert_eq!(stdout(&o), "");
}

#[test]
fn tokenize_mode_round_trips_tokens() {
    let dir = scratch("tok");
    write(&dir.join("in.txt"), "the quick fox the lazy fox fox");
    let o = run(bin()
        .arg("build")
        .arg(dir.join("in.txt"))
        .args(["--tokenize", "--out"])
        .arg(dir.join("x.idx")));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("sigma=4"), "{}", stdout(&o));

    write(&dir.join("s.txt"), "X 1 7\nR fox 7\nS the 2\nA 5\n");
    let o = run(bin().arg("query").arg(dir.join("x.idx")).arg(dir.join("s.txt")));
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "the quick fox the lazy fox fox\n3\n4\nlazy\n"
    );
}

#[test]
fn bench_report_shape() {
    let o = run(bin().args([
        "bench",
        "--synthetic",
        "uniform:n=4096,sigma=8",
        "--ops",
        "500",
        "--seed",
        "11",
    ]));
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    for key in ["source=", "n=4096", "sigma=8", "ops=500", "update_ops_max="] {
        assert!(s.contains(key), "missing {key} in:\n{s}");
    }
    assert!(s.contains("p50_ns"), "{s}");

    // Zero ops: header only, no table.
    let o = run(bin().args([
        "bench",
        "--synthetic",
        "uniform:n=1024,sigma=4",
        "--ops",
        "0",
    ]));
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("ops=0"));
    assert!(!s.contains("p50_ns"), "{s}");
}

#[test]
fn bench_extract_speedup_reported() {
    let o = run(bin().args([
        "bench",
        "--synthetic",
        "uniform:n=32768,sigma=16",
        "--ops",
        "0",
        "--extract-len",
        "4096",
        "--runs",
        "1",
    ]));
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("extract_speedup="), "{s}");
}

#[test]
fn fuzz_fixed_seed_passes() {
    let o = run(bin().args([
        "fuzz", "--seed", "5", "--ops", "500", "--init", "48", "--sigma", "6",
        "--r", "3",
    ]));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("ok "), "{}", stdout(&o));
}

#[test]
fn fuzz_zero_ops_passes() {
    let o = run(bin().args(["fuzz", "--ops", "0", "--init", "0"]));
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("ok ops=0"), "{}", stdout(&o));
}

#[test]
fn fuzz_injected_fault_reports_minimizes_and_replays() {
    let dir = scratch("fault");
    let rep = dir.join("rep.txt");
    let o = run(bin()
        .args([
            "fuzz",
            "--seed",
            "5",
            "--ops",
            "300",
            "--init",
            "48",
            "--sigma",
            "6",
            "--inject-fault",
            "10",
            "--repro-out",
        ])
        .arg(&rep));
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
    let s = stdout(&o);
    assert!(s.contains("divergence at op 10"), "{s}");
    assert!(s.contains("repro="), "{s}");
    let script = std::fs::read_to_string(&rep).unwrap();
    assert!(script.contains("# sigma=6"), "{script}");
    // The fault is keyed to op index 10, so the minimized script holds
    // exactly the 11 ops needed to reach it.
    let body = script.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(body, 11, "{script}");

    let o = run(bin()
        .args(["fuzz", "--inject-fault", "10", "--replay"])
        .arg(&rep));
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("divergence at op 10"), "{}", stdout(&o));

    // The same script replays clean without the fault.
    let o = run(bin().args(["fuzz", "--replay"]).arg(&rep));
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn usage_errors_exit_one() {
    let o = run(bin().arg("build"));
    assert_eq!(o.status.code(), Some(1));
    let o = run(bin().arg("no-such-command"));
    assert_eq!(o.status.code(), Some(1));
    let o = run(bin().args(["bench", "--mix", "1:2:3"]));
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn unreadable_input_exits_two() {
    let dir = scratch("unread");
    let o = run(bin()
        .arg("build")
        .arg(dir.join("missing.txt"))
        .args(["--out"])
        .arg(dir.join("x.idx")));
    assert_eq!(o.status.code(), Some(2));
    let o = run(bin().arg("query").arg(dir.join("missing.idx")).arg("-"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn corrupt_index_rejected() {
    let dir = scratch("corrupt");
    write(&dir.join("in.txt"), "abcabcabc");
    let o = run(bin()
        .arg("build")
        .arg(dir.join("in.txt"))
        .args(["--out"])
        .arg(dir.join("x.idx")));
    assert!(o.status.success());
    let mut data = std::fs::read(dir.join("x.idx")).unwrap();
    let mid = data.len() / 2;
    data[mid] ^= 0x5a;
    data.truncate(data.len() - 3);
    write(&dir.join("x.idx"), &data);
    write(&dir.join("s.txt"), "A 1\n");
    let o = run(bin().arg("query").arg(dir.join("x.idx")).arg(dir.join("s.txt")));
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
}
