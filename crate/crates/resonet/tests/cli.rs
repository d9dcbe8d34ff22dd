use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use resonet::io::{self, load_manifest, load_report, read_spikes_bin, write_map_csv, write_spikes_bin};
use resonet_core::dft::RangeAngleMap;
use resonet_core::pipeline::{run_frame, Mode, ModelKind, ModelSpec, Sequential};

fn resonet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resonet")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = resonet(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    resonet(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, recipe: &str, n: usize, seed: u64) {
    ok(&["simulate", "--recipe", recipe, "--n-scenes", &n.to_string(), "--seed", &seed.to_string(), "--out", s(dir)]);
}

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p: PathBuf| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn simulate_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    simulate(&a, "mixed_5", 3, 5);
    simulate(&b, "mixed_5", 3, 5);
    simulate(&c, "mixed_5", 3, 6);
    let (ca, cb, cc) = (dir_contents(&a), dir_contents(&b), dir_contents(&c));
    assert_eq!(ca.len(), 6);
    assert_eq!(ca, cb);
    assert_ne!(ca, cc);
}

#[test]
fn simulate_guards_existing_data() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    simulate(&d, "targets_8", 3, 0);
    assert_eq!(code(&["simulate", "--recipe", "targets_8", "--out", s(&d)]), 2);
    ok(&["simulate", "--recipe", "persons_5", "--n-scenes", "1", "--out", s(&d), "--force"]);
    assert_eq!(dir_contents(&d).len(), 2);

    let out = resonet(&["simulate", "--recipe", "bogus", "--out", s(&tmp.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("close_targets_2010") && err.contains("targets_8"), "{err}");
}

#[test]
fn process_matches_library() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    simulate(&data, "close_targets_2010", 2, 3);
    for (model, mode) in [("rate", "single"), ("adaptive", "average"), ("ft", "single"), ("time", "continuous")] {
        let out = tmp.path().join(format!("out_{model}"));
        ok(&["process", "--data", s(&data), "--model", model, "--mode", mode, "--out", s(&out), "--threads", "2"]);
        let kind: ModelKind = model.parse().unwrap();
        let mode: Mode = mode.parse().unwrap();
        for i in 0..2 {
            let frame = io::load_frame(&data.join(format!("frame_{i:04}.nrrf"))).unwrap();
            let want = run_frame(&frame, &ModelSpec::defaults(kind), mode, &Sequential).unwrap();
            let mut map_bytes = Vec::new();
            write_map_csv(&mut map_bytes, &want.map).unwrap();
            assert_eq!(fs::read(out.join(format!("map_{i:04}.csv"))).unwrap(), map_bytes, "{model} map {i}");
            let spikes = out.join(format!("spikes_{i:04}.nrsp"));
            if kind.is_spiking() {
                let mut bytes = Vec::new();
                write_spikes_bin(&mut bytes, &want.spikes).unwrap();
                assert_eq!(fs::read(&spikes).unwrap(), bytes, "{model} spikes {i}");
            } else {
                assert!(!spikes.exists());
            }
        }
        let manifest = load_manifest(&out.join("process.json")).unwrap();
        assert_eq!(manifest.model, kind);
        assert_eq!(manifest.frames.len(), 2);
    }
}

#[test]
fn process_output_is_thread_invariant() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    simulate(&data, "mixed_5", 2, 1);
    for model in ["adaptive", "rate"] {
        let runs: Vec<_> = ["1", "2", "8"]
            .iter()
            .map(|t| {
                let out = tmp.path().join(format!("{model}_{t}"));
                ok(&["process", "--data", s(&data), "--model", model, "--mode", "continuous", "--out", s(&out), "--threads", t, "--dump-grid", "--spikes-csv"]);
                dir_contents(&out)
            })
            .collect();
        assert!(runs[0].contains_key("grid_0000.nrrg"));
        assert_eq!(runs[0], runs[1]);
        assert_eq!(runs[0], runs[2]);
    }
}

#[test]
fn time_codec_spikes_once_per_chirp() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    simulate(&data, "targets_8", 2, 2);
    let out = tmp.path().join("out");
    ok(&["process", "--data", s(&data), "--model", "time", "--mode", "continuous", "--u-th", "240", "--out", s(&out)]);
    let mut total = 0;
    for i in 0..2 {
        let spikes = read_spikes_bin(&mut fs::File::open(out.join(format!("spikes_{i:04}.nrsp"))).unwrap()).unwrap();
        let mut per: BTreeMap<_, usize> = BTreeMap::new();
        for e in &spikes {
            *per.entry((e.chirp, e.range_bin, e.angle_bin)).or_default() += 1;
        }
        assert!(per.values().all(|&c| c == 1));
        total += spikes.len();
    }
    assert!(total > 0);
}

#[test]
fn evaluate_identities() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    simulate(&data, "persons_5", 3, 0);
    let maps = tmp.path().join("maps");
    ok(&["process", "--data", s(&data), "--model", "gradient", "--out", s(&maps)]);

    let direct = tmp.path().join("direct");
    ok(&["evaluate", "--data", s(&data), "--model", "gradient", "--out", s(&direct)]);
    let via_maps = tmp.path().join("via_maps");
    ok(&["evaluate", "--data", s(&data), "--maps", s(&maps), "--out", s(&via_maps)]);
    let a = load_report(&direct.join("report.json")).unwrap();
    let b = load_report(&via_maps.join("report.json")).unwrap();
    assert_eq!(a.report.f_score, b.report.f_score);
    for sc in &a.report.scenes {
        assert_eq!(sc.counts.tp + sc.counts.fn_, sc.n_labels);
        assert_eq!(sc.n_labels, 5);
    }
    assert!(fs::read_to_string(direct.join("summary.csv")).unwrap().starts_with("model,f_score"));

    for i in 0..3 {
        let mut bytes = Vec::new();
        write_map_csv(&mut bytes, &RangeAngleMap::zeros(256, 32)).unwrap();
        fs::write(maps.join(format!("map_{i:04}.csv")), bytes).unwrap();
    }
    let zero = tmp.path().join("zero");
    ok(&["evaluate", "--data", s(&data), "--maps", s(&maps), "--out", s(&zero)]);
    let z = load_report(&zero.join("report.json")).unwrap().report;
    assert_eq!((z.f_score, z.snr, z.recall), (0.0, 0.0, 0.0));

    let other = tmp.path().join("other");
    simulate(&other, "persons_5", 2, 0);
    assert_eq!(code(&["evaluate", "--data", s(&other), "--maps", s(&maps), "--out", s(&zero)]), 3);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    simulate(&data, "mixed_5", 1, 0);
    let out = s(tmp.path()).to_string() + "/out";
    let missing = s(tmp.path()).to_string() + "/missing";

    assert_eq!(code(&["process", "--data", &missing, "--model", "rate", "--out", &out]), 3);
    assert_eq!(code(&["process", "--data", s(&data), "--out", &out, "--no-such-flag"]), 2);
    assert_eq!(code(&["process", "--data", s(&data), "--model", "rate", "--tau", "-1", "--out", &out]), 2);

    let params = tmp.path().join("params.json");
    fs::write(&params, "{ not json").unwrap();
    assert_eq!(code(&["process", "--data", s(&data), "--params", s(&params), "--out", &out]), 3);

    assert_eq!(code(&["early", "--data", s(&data), "--model", "ft"]), 2);
    assert_eq!(code(&["early", "--data", s(&data), "--model", "rate", "--stride", "100"]), 2);
    let early = ok(&["early", "--data", s(&data), "--model", "rate", "--stride", "128"]);
    assert_eq!(String::from_utf8_lossy(&early.stdout).lines().count(), 5);
}

#[test]
fn sweep_feeds_process() {
    let tmp = tempfile::tempdir().unwrap();
    let train = tmp.path().join("train");
    simulate(&train, "close_targets_0010", 2, 0);
    let sw = tmp.path().join("sweep");
    ok(&["sweep", "--model", "ft", "--train", s(&train), "--out", s(&sw), "--threads", "2"]);
    let table = fs::read_to_string(sw.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 6 * 7);
    let best = io::load_params(&sw.join("best_params.json")).unwrap();
    assert_eq!(best.model, ModelKind::Ft);
    let out = tmp.path().join("out");
    ok(&["process", "--data", s(&train), "--params", s(&sw.join("best_params.json")), "--out", s(&out)]);
    assert_eq!(load_manifest(&out.join("process.json")).unwrap().params, best.params);
}
