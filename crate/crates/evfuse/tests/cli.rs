//! End-to-end tests of the `evfuse` binary: exit codes, file outputs and
//! determinism of the full simulate -> bin -> reconstruct pipeline.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ndarray::{Array2, Array3, Axis};

use evfuse::io;
use evfuse::sensing::HighResTensor;
use evfuse::synth::{moving_square_video, MovingSquare};

fn evfuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evfuse"))
        .args(args)
        .env_remove("EVFUSE_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_video(dir: &Path, video: &HighResTensor) {
    std::fs::create_dir_all(dir).unwrap();
    for k in 0..video.num_frames() {
        io::write_pgm(video.frame(k), &dir.join(format!("f_{k:03}.pgm"))).unwrap();
    }
}

fn small_scene() -> HighResTensor {
    moving_square_video(
        24,
        24,
        5,
        MovingSquare {
            size: 5,
            background: 0.3,
            foreground: 0.6,
            x0: 3,
            y0: 10,
            dx: 3,
            dy: 0,
            strobe: Some((0, 0)),
            flash: None,
        },
        1000,
    )
}

#[test]
fn pipeline_simulate_bin_reconstruct() {
    let dir = tempfile::tempdir().unwrap();
    let video_dir = dir.path().join("video");
    write_video(&video_dir, &small_scene());

    let events = dir.path().join("events.txt");
    let out = evfuse(&["simulate", video_dir.to_str().unwrap(), "-o", events.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("simulated"));
    assert!(events.is_file());

    let tensor = dir.path().join("events.evft");
    let out = evfuse(&[
        "bin",
        events.to_str().unwrap(),
        "-o",
        tensor.to_str().unwrap(),
        "--strategy",
        "conflict",
        "--width",
        "24",
        "--height",
        "24",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let m = io::read_evft(&tensor).unwrap().shape()[0];
    assert_eq!(m, 4, "one binned frame per transition");

    let first = dir.path().join("first.pgm");
    let last = dir.path().join("last.pgm");
    let truth = small_scene();
    io::write_pgm(truth.frame(0), &first).unwrap();
    io::write_pgm(truth.frame(4), &last).unwrap();

    let out_dir = dir.path().join("recon");
    let out = evfuse(&[
        "reconstruct",
        "interpolate",
        first.to_str().unwrap(),
        last.to_str().unwrap(),
        "--events",
        tensor.to_str().unwrap(),
        "-o",
        out_dir.to_str().unwrap(),
        "--ground-truth",
        video_dir.to_str().unwrap(),
        "--epochs",
        "50",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for k in 0..5 {
        assert!(out_dir.join(format!("frame_{k:03}.pgm")).is_file());
    }
    assert!(out_dir.join("reconstruction.evft").is_file());
    assert!(out_dir.join("trace.csv").is_file());
    assert!(out_dir.join("metrics.txt").is_file());
    assert!(stdout(&out).contains("psnr"));

    // Endpoints of an interpolation stay anchored to the observations.
    let rec = io::read_tensor(&out_dir.join("reconstruction.evft")).unwrap();
    let f0 = io::read_pgm(&first).unwrap();
    let err: f64 =
        (&f0 - &rec.frame(0)).iter().map(|v| v.abs()).sum::<f64>() / f0.len() as f64;
    assert!(err < 0.05, "endpoint drifted by {err}");
}

#[test]
fn reconstruct_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let truth = small_scene();
    let video_dir = dir.path().join("video");
    write_video(&video_dir, &truth);
    let events = dir.path().join("events.txt");
    evfuse(&["simulate", video_dir.to_str().unwrap(), "-o", events.to_str().unwrap()]);
    let tensor = dir.path().join("events.evft");
    evfuse(&[
        "bin",
        events.to_str().unwrap(),
        "-o",
        tensor.to_str().unwrap(),
        "--strategy",
        "conflict",
        "--width",
        "24",
        "--height",
        "24",
    ]);
    let first = dir.path().join("first.pgm");
    let last = dir.path().join("last.pgm");
    io::write_pgm(truth.frame(0), &first).unwrap();
    io::write_pgm(truth.frame(4), &last).unwrap();

    let run = |out: &PathBuf| {
        let o = evfuse(&[
            "reconstruct",
            "interpolate",
            first.to_str().unwrap(),
            last.to_str().unwrap(),
            "--events",
            tensor.to_str().unwrap(),
            "-o",
            out.to_str().unwrap(),
            "--epochs",
            "40",
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    };
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    run(&out_a);
    run(&out_b);
    let trace_a = std::fs::read(out_a.join("trace.csv")).unwrap();
    let trace_b = std::fs::read(out_b.join("trace.csv")).unwrap();
    assert_eq!(trace_a, trace_b, "traces differ between identical runs");
    let rec_a = std::fs::read(out_a.join("reconstruction.evft")).unwrap();
    let rec_b = std::fs::read(out_b.join("reconstruction.evft")).unwrap();
    assert_eq!(rec_a, rec_b);
}

#[test]
fn zero_event_interpolation_stays_near_the_blend() {
    let dir = tempfile::tempdir().unwrap();
    // Two distinct endpoint frames and an all-zero event tensor.
    let first_frame = Array2::from_elem((12, 12), 0.2);
    let mut last_frame = Array2::from_elem((12, 12), 0.2);
    for y in 4..8 {
        for x in 4..8 {
            last_frame[(y, x)] = 0.8;
        }
    }
    let first = dir.path().join("first.pgm");
    let last = dir.path().join("last.pgm");
    io::write_pgm(first_frame.view(), &first).unwrap();
    io::write_pgm(last_frame.view(), &last).unwrap();
    let tensor = dir.path().join("zero.evft");
    io::write_evft(&Array3::<f64>::zeros((4, 12, 12)), &tensor).unwrap();

    // With the temporal prior alone the linear blend is a stationary
    // point, so the output reproduces it almost exactly.
    let out_dir = dir.path().join("out_t");
    let out = evfuse(&[
        "reconstruct",
        "interpolate",
        first.to_str().unwrap(),
        last.to_str().unwrap(),
        "--events",
        tensor.to_str().unwrap(),
        "-o",
        out_dir.to_str().unwrap(),
        "--lambda-e",
        "0",
        "--lambda-xy",
        "0",
        "--epochs",
        "60",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    check_blend_deviation(&out_dir, &first_frame, &last_frame, 0.01);

    // With the spatial prior active the interior may smooth a little, but
    // the solution still approximates the blend.
    let out_dir = dir.path().join("out_full");
    let out = evfuse(&[
        "reconstruct",
        "interpolate",
        first.to_str().unwrap(),
        last.to_str().unwrap(),
        "--events",
        tensor.to_str().unwrap(),
        "-o",
        out_dir.to_str().unwrap(),
        "--lambda-e",
        "0",
        "--epochs",
        "60",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    check_blend_deviation(&out_dir, &first_frame, &last_frame, 0.2);
}

fn check_blend_deviation(
    out_dir: &Path,
    first_frame: &Array2<f64>,
    last_frame: &Array2<f64>,
    tol: f64,
) {
    let rec = io::read_evft(&out_dir.join("reconstruction.evft")).unwrap();
    for k in 0..5 {
        let w = k as f64 / 4.0;
        let blend = first_frame.map(|&v| v * (1.0 - w)) + last_frame.map(|&v| v * w);
        let frame = rec.index_axis(Axis(0), k);
        let max_dev = blend
            .iter()
            .zip(frame.iter())
            .map(|(&b, &r)| (b - r).abs())
            .fold(0.0f64, f64::max);
        assert!(max_dev < tol, "frame {k} deviates from the blend by {max_dev} (tol {tol})");
    }
}

#[test]
fn twenty_event_frames_reconstruct_to_twenty_one() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.pgm");
    let last = dir.path().join("last.pgm");
    io::write_pgm(Array2::from_elem((12, 12), 0.3).view(), &first).unwrap();
    io::write_pgm(Array2::from_elem((12, 12), 0.7).view(), &last).unwrap();
    let tensor = dir.path().join("events.evft");
    io::write_evft(&Array3::<f64>::zeros((20, 12, 12)), &tensor).unwrap();

    let out_dir = dir.path().join("out");
    let out = evfuse(&[
        "reconstruct",
        "interpolate",
        first.to_str().unwrap(),
        last.to_str().unwrap(),
        "--events",
        tensor.to_str().unwrap(),
        "-o",
        out_dir.to_str().unwrap(),
        "--epochs",
        "3",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let frames: Vec<_> = std::fs::read_dir(&out_dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("frame_"))
        .collect();
    assert_eq!(frames.len(), 21);
}

#[test]
fn usage_errors_exit_one() {
    // Missing video directory.
    let out = evfuse(&["simulate", "/no/such/dir", "-o", "/tmp/evfuse_x.txt"]);
    assert_eq!(code(&out), 1);
    assert!(!stderr(&out).is_empty());

    // Stacked binning without --num-frames.
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("e.txt");
    std::fs::write(&events, "0.001 0 0 1\n").unwrap();
    let out = evfuse(&[
        "bin",
        events.to_str().unwrap(),
        "-o",
        dir.path().join("o.evft").to_str().unwrap(),
        "--strategy",
        "stacked",
    ]);
    assert_eq!(code(&out), 1);

    // Missing event tensor for reconstruct.
    let f = dir.path().join("f.pgm");
    io::write_pgm(Array2::from_elem((8, 8), 0.4).view(), &f).unwrap();
    let out = evfuse(&[
        "reconstruct",
        "predict",
        f.to_str().unwrap(),
        "--events",
        dir.path().join("missing.evft").to_str().unwrap(),
        "-o",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("missing event tensor"));

    // Unknown flags come from clap but still exit 1.
    let out = evfuse(&["simulate", "--bogus"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();

    // Unsorted event file.
    let events = dir.path().join("bad.txt");
    std::fs::write(&events, "0.002 0 0 1\n0.001 1 1 1\n").unwrap();
    let out = evfuse(&[
        "bin",
        events.to_str().unwrap(),
        "-o",
        dir.path().join("o.evft").to_str().unwrap(),
        "--strategy",
        "conflict",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));

    // A directory with a single frame.
    let video_dir = dir.path().join("one");
    std::fs::create_dir_all(&video_dir).unwrap();
    io::write_pgm(Array2::from_elem((4, 4), 0.2).view(), &video_dir.join("f.pgm")).unwrap();
    let out = evfuse(&[
        "simulate",
        video_dir.to_str().unwrap(),
        "-o",
        dir.path().join("e.txt").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);

    // Corrupt tensor container.
    let bad = dir.path().join("bad.evft");
    std::fs::write(&bad, b"NOPE").unwrap();
    let f = dir.path().join("f.pgm");
    io::write_pgm(Array2::from_elem((4, 4), 0.4).view(), &f).unwrap();
    let out = evfuse(&[
        "reconstruct",
        "predict",
        f.to_str().unwrap(),
        "--events",
        bad.to_str().unwrap(),
        "-o",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn gradcheck_command_contract() {
    let out = evfuse(&["gradcheck", "--seed", "0", "--shape", "6x6x4"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("interpolation"));
    assert!(text.contains("prediction"));
    assert!(text.contains("deblur"));
    assert!(text.contains("max rel error"));
    assert!(text.contains("OK"));

    let out = evfuse(&["gradcheck", "--seed", "0", "--shape", "6x6x4", "--corrupt-gradient"]);
    assert_ne!(code(&out), 0);
}

#[test]
fn thread_cap_environment_is_validated() {
    let run = |val: &str| {
        Command::new(env!("CARGO_BIN_EXE_evfuse"))
            .args(["gradcheck", "--shape", "4x4x3", "--case", "predict"])
            .env("EVFUSE_THREADS", val)
            .output()
            .expect("binary runs")
    };
    assert_eq!(run("2").status.code().unwrap(), 0);
    let bad = run("0");
    assert_eq!(bad.status.code().unwrap(), 1);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("EVFUSE_THREADS"));
}
