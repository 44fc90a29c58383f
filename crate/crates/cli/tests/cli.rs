mod common;

use std::fs;

use common::{tunalab, write_models, BIN};

fn stderr(o: &std::process::Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = tunalab(&["--help"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for cmd in [
        "train-generator",
        "fit",
        "edit",
        "invert",
        "interpolate",
        "metrics",
        "diagnose",
        "serve",
    ] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
    assert_eq!(tunalab(&["edit", "--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = tunalab(&["edit", "--delta", "glasses=+1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--model"), "{}", stderr(&o));
    assert_eq!(tunalab(&["transmogrify"], dir.path()).status.code(), Some(1));
    assert_eq!(tunalab(&[], dir.path()).status.code(), Some(1));
    let o = tunalab(
        &["fit", "--model", "g.tuna", "--space", "q", "--kind", "linear"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let o = tunalab(
        &["diagnose", "--model", "g.tuna", "--fm", "f.tuna", "--start", "spiral"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = tunalab(
        &["fit", "--model", "missing.tuna", "--space", "w", "--kind", "linear"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    fs::write(dir.path().join("junk.tuna"), b"not a model").unwrap();
    let o = tunalab(
        &["fit", "--model", "junk.tuna", "--space", "w", "--kind", "linear"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn delta_grammar() {
    use tunalab::faceworld::Attribute;
    use tunalab_cli::commands::parse_delta;
    assert_eq!(parse_delta("glasses=+1").unwrap(), (Attribute::Glasses, 1.0));
    assert_eq!(parse_delta("smile=-0.5").unwrap(), (Attribute::Smile, -0.5));
    assert_eq!(
        parse_delta(" hair_length = 0.25 ").unwrap(),
        (Attribute::HairLength, 0.25)
    );
    for bad in ["glasses", "halo=1", "smile=big", "smile=inf"] {
        assert!(parse_delta(bad).is_err(), "{bad}");
    }
}

#[test]
fn pipeline_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let run = |args: &[&str]| {
        let o = tunalab(args, p);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
    };
    run(&[
        "train-generator",
        "--seed",
        "2",
        "--epochs",
        "6",
        "--samples",
        "4000",
        "--out",
        "g.tuna",
    ]);
    run(&[
        "fit",
        "--model",
        "g.tuna",
        "--space",
        "w",
        "--kind",
        "nonlinear",
        "--samples",
        "2000",
        "--out",
        "fm.tuna",
    ]);
    run(&[
        "edit",
        "--model",
        "g.tuna",
        "--fm",
        "fm.tuna",
        "--space",
        "w",
        "--method",
        "nonlinear",
        "--delta",
        "glasses=+1",
        "--seed",
        "4",
        "--out",
        "out.png",
        "--trace",
        "trace.csv",
    ]);
    let png = fs::read(p.join("out.png")).unwrap();
    assert!(png.starts_with(b"\x89PNG"));
    let trace = fs::read_to_string(p.join("trace.csv")).unwrap();
    assert!(trace.starts_with("step,alpha_or_iter,w0,"));
}

#[test]
fn model_dir_is_the_default_search_path() {
    let models = tempfile::tempdir().unwrap();
    write_models(models.path());
    let work = tempfile::tempdir().unwrap();
    let o = std::process::Command::new(BIN)
        .args([
            "edit",
            "--space",
            "w",
            "--method",
            "linear",
            "--delta",
            "smile=0.5",
            "--out",
            "e.png",
        ])
        .current_dir(work.path())
        .env("TUNALAB_MODEL_DIR", models.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(work.path().join("e.png").exists());
    let o = std::process::Command::new(BIN)
        .args([
            "metrics",
            "--model",
            "generator.tuna",
            "--fm",
            "fm_linear_z.tuna",
            "--holdout",
            "300",
            "--images",
            "100",
            "--out",
            "m.json",
        ])
        .current_dir(work.path())
        .env("TUNALAB_MODEL_DIR", models.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(work.path().join("m.json")).unwrap()).unwrap();
    assert_eq!(report["space"], "z");
    assert_eq!(report["separability"]["per_attribute"].as_array().unwrap().len(), 5);
}

#[test]
fn every_command_writes_its_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let (g, fms) = write_models(p);
    let g = g.to_str().unwrap();
    let fm = |name: &str| {
        fms.iter()
            .find(|f| f.ends_with(name))
            .unwrap()
            .to_str()
            .unwrap()
            .to_string()
    };
    let run = |args: &[&str]| {
        let o = tunalab(args, p);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
    };
    // sample image to invert: an identity edit
    run(&[
        "edit",
        "--model",
        g,
        "--fm",
        &fm("fm_linear_w.tuna"),
        "--method",
        "linear",
        "--delta",
        "glasses=0",
        "--seed",
        "5",
        "--out",
        "src.png",
    ]);
    run(&[
        "invert", "--model", g, "--image", "src.png", "--iters", "50", "--out", "rec.png", "--report", "inv.json",
    ]);
    let inv: serde_json::Value = serde_json::from_slice(&fs::read(p.join("inv.json")).unwrap()).unwrap();
    assert_eq!(inv["latent"]["space"], "w");
    run(&[
        "edit",
        "--model",
        g,
        "--fm",
        &fm("fm_nonlinear_w.tuna"),
        "--image",
        "src.png",
        "--delta",
        "beard=1",
        "--out",
        "from_img.png",
    ]);
    run(&[
        "interpolate",
        "--model",
        g,
        "--from-seed",
        "1",
        "--to-seed",
        "2",
        "--frames",
        "4",
        "--out-dir",
        "frames",
        "--trace",
        "interp.csv",
    ]);
    assert!(p.join("frames/frame_003.png").exists());
    assert_eq!(fs::read_to_string(p.join("interp.csv")).unwrap().lines().count(), 5);
    run(&[
        "interpolate",
        "--model",
        g,
        "--fm",
        &fm("fm_nonlinear_w.tuna"),
        "--mode",
        "feature",
        "--from-seed",
        "1",
        "--to-seed",
        "2",
        "--frames",
        "3",
        "--out-dir",
        "ff",
    ]);
    run(&[
        "diagnose",
        "--model",
        g,
        "--fm",
        &fm("fm_linear_z.tuna"),
        "--start",
        "perturbed=0.001",
        "--steps",
        "16",
        "--out",
        "d.json",
        "--trace",
        "d.csv",
        "--spectrum",
        "s.csv",
    ]);
    let d: serde_json::Value = serde_json::from_slice(&fs::read(p.join("d.json")).unwrap()).unwrap();
    assert_eq!(d["steps"], 16);
    assert_eq!(fs::read_to_string(p.join("s.csv")).unwrap().lines().count(), 10);
}

#[test]
fn serve_answers_health() {
    use std::io::{Read, Write};
    use std::net::{TcpListener, TcpStream};
    use std::time::{Duration, Instant};

    let dir = tempfile::tempdir().unwrap();
    write_models(dir.path());
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let config = dir.path().join("service.json");
    fs::write(&config, format!(r#"{{"port": {port}, "server_seed": 5}}"#)).unwrap();
    let mut child = std::process::Command::new(BIN)
        .args(["serve", "--config", config.to_str().unwrap()])
        .env("TUNALAB_MODEL_DIR", dir.path())
        .stderr(std::process::Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(30);
    let response = loop {
        if let Ok(mut s) = TcpStream::connect(("127.0.0.1", port)) {
            s.write_all(b"GET /api/health HTTP/1.1\r\nhost: localhost\r\nconnection: close\r\n\r\n")
                .unwrap();
            let mut out = String::new();
            s.read_to_string(&mut out).unwrap();
            break out;
        }
        assert!(Instant::now() < deadline, "server did not start");
        std::thread::sleep(Duration::from_millis(100));
    };
    child.kill().unwrap();
    let _ = child.wait();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.contains("TUNAG1") && response.contains("TUNAM1"));
}

#[test]
fn serve_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"port": 0}"#).unwrap();
    let o = tunalab(
        &["serve", "--config", "c.json", "--model", "g.tuna", "--fm", "f.tuna"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    fs::write(dir.path().join("c.json"), r#"{"port": "eighty"}"#).unwrap();
    let o = tunalab(&["serve", "--config", "c.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}
