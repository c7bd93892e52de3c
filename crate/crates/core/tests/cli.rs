//! Command-line behaviour through the built binary and the library entry points.

use std::path::Path;
use std::process::Command;

use cdl_fusion::cli::dictfile::DictionaryFile;
use cdl_fusion::{coupled_learn, Error, KsvdParams, TrainingSet};

const BIN: &str = env!("CARGO_BIN_EXE_cdl-fusion");

fn cdl(args: &[&str]) -> std::process::Output {
    Command::new(BIN)
        .args(args)
        .env("RUST_LOG", "error")
        .env("CDL_FUSION_THREADS", "1")
        .output()
        .unwrap()
}

fn small_dict(path: &Path) {
    let ts = TrainingSet::synthetic(2, 64, 2.0, 8, 1200, 1000).unwrap();
    let d = coupled_learn(
        &ts,
        &KsvdParams {
            atoms: 32,
            cycles: 2,
            ..KsvdParams::default()
        },
    )
    .unwrap();
    DictionaryFile::Pair(d).save(path).unwrap();
}

#[test]
fn help_exits_zero() {
    assert_eq!(cdl(&["--help"]).status.code(), Some(0));
    assert_eq!(cdl(&["fuse", "--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(cdl(&[]).status.code(), Some(1));
    assert_eq!(cdl(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        cdl(&["fuse", "only_one.png", "--dict", "d.cdl", "--out", "f.png"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn missing_files_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.cdl");
    let out = cdl(&[
        "fuse",
        "a.png",
        "b.png",
        "--dict",
        missing.to_str().unwrap(),
        "--out",
        dir.path().join("f.png").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_fuse_eval_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    let synth = cdl(&["synth", "--scenes", "1", "--size", "40x40", "--out", &p("scenes")]);
    assert_eq!(
        synth.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&synth.stderr)
    );
    let s1 = p("scenes/scene_000/source_1.png");
    let s2 = p("scenes/scene_000/source_2.png");
    assert!(Path::new(&s1).exists() && Path::new(&s2).exists());

    small_dict(&dir.path().join("d.cdl"));
    let fuse = cdl(&["fuse", &s1, &s2, "--dict", &p("d.cdl"), "--out", &p("fused.png")]);
    assert_eq!(fuse.status.code(), Some(0), "{}", String::from_utf8_lossy(&fuse.stderr));
    assert!(Path::new(&p("fused_mask.png")).exists());

    let eval = cdl(&[
        "eval",
        "--fused",
        &p("fused.png"),
        "--source",
        &s1,
        &s2,
        "--reference",
        &p("scenes/scene_000/sharp.png"),
    ]);
    assert_eq!(eval.status.code(), Some(0));
    let text = String::from_utf8(eval.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("id,nmi,qabf,ssim,mse"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "fused");
    assert!(row[1..].iter().all(|v| v.parse::<f64>().is_ok()));

    // omega outside [0.5, 1) is a usage error
    let bad = cdl(&[
        "fuse",
        &s1,
        &s2,
        "--dict",
        &p("d.cdl"),
        "--out",
        &p("g.png"),
        "--omega",
        "0.3",
    ]);
    assert_eq!(bad.status.code(), Some(1));

    // a TV run capped at one iteration fails only in strict mode
    let (d, o) = (p("d.cdl"), p("tv.png"));
    let capped = [
        "fuse",
        &s1,
        &s2,
        "--dict",
        &d,
        "--out",
        &o,
        "--tv",
        "--tv-eta",
        "0.05",
        "--tv-max-iters",
        "1",
    ];
    let tv = |strict: bool| {
        let mut args = capped.to_vec();
        if strict {
            args.push("--strict-convergence");
        }
        cdl(&args).status.code()
    };
    assert_eq!(tv(false), Some(0));
    assert_eq!(tv(true), Some(3));
}

#[test]
fn corrupted_dictionary_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.cdl");
    small_dict(&path);
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[100] ^= 0x40;
    std::fs::write(&path, &bytes).unwrap();
    let err = DictionaryFile::load(&path).unwrap_err();
    assert!(matches!(err, Error::Checksum { .. }));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn dictionary_file_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.cdl");
    small_dict(&path);
    let first = std::fs::read(&path).unwrap();
    let loaded = DictionaryFile::load(&path).unwrap();
    assert_eq!(loaded.to_bytes(), first);
}
