use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn codimlab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_codimlab"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn ok(o: Output) -> Output {
    assert_eq!(
        code(&o),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn header(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

fn rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempdir().unwrap();
    assert_eq!(code(&codimlab(dir.path(), &["no-such-command"])), 1);
    assert_eq!(
        code(&codimlab(dir.path(), &["gen-data", "--codim", "abc"])),
        1
    );
    assert_eq!(
        code(&codimlab(
            dir.path(),
            &["attack", "--data", "x.csv", "--norm", "l7"]
        )),
        1
    );
    assert_eq!(code(&codimlab(dir.path(), &["--help"])), 0);
}

#[test]
fn runtime_errors_exit_with_two() {
    let dir = tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let o = codimlab(dir.path(), &["train", "--data", missing.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.csv"));
    assert_eq!(
        code(&codimlab(
            dir.path(),
            &["gen-data", "--family", "circles", "--codim", "0"]
        )),
        2
    );
    assert_eq!(
        code(&codimlab(
            dir.path(),
            &["mnist-nn", "--mnist-dir", missing.to_str().unwrap()]
        )),
        2
    );
}

#[test]
fn gen_data_is_seeded() {
    let a = tempdir().unwrap();
    let b = tempdir().unwrap();
    let args = [
        "--seed",
        "4",
        "gen-data",
        "--family",
        "circles",
        "--codim",
        "3",
        "--n-per-class",
        "50",
        "--n-test-per-class",
        "20",
    ];
    ok(codimlab(a.path(), &args));
    ok(codimlab(b.path(), &args));
    let train = a.path().join("train.csv");
    assert_eq!(
        fs::read(&train).unwrap(),
        fs::read(b.path().join("train.csv")).unwrap()
    );
    assert_eq!(header(&train), "x1,x2,x3,x4,label");
    assert_eq!(rows(&train), 100);
    assert_eq!(rows(&a.path().join("test.csv")), 40);
    assert!(a.path().join("train.json").exists());
}

#[test]
fn cover_reports_counts() {
    let dir = tempdir().unwrap();
    ok(codimlab(
        dir.path(),
        &[
            "cover", "--family", "planes", "--delta", "0.5", "--probes", "2000",
        ],
    ));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("cover_check.json")).unwrap())
            .unwrap();
    assert_eq!(summary["points"], 1682);
    assert_eq!(rows(&dir.path().join("cover.csv")), 1682);
    let strict = tempdir().unwrap();
    ok(codimlab(
        strict.path(),
        &[
            "cover", "--family", "planes", "--delta", "1", "--strict", "--probes", "2000",
        ],
    ));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(strict.path().join("cover_check.json")).unwrap())
            .unwrap();
    assert_eq!(summary["is_cover"], true);
}

#[test]
fn bounds_table() {
    let dir = tempdir().unwrap();
    ok(codimlab(dir.path(), &["bounds", "--dims", "1,3,9"]));
    let path = dir.path().join("bounds.csv");
    assert_eq!(header(&path), "formula_id,d,inputs,value,log_value");
    let text = fs::read_to_string(&path).unwrap();
    let offset = |d: &str| -> f64 {
        let line = text
            .lines()
            .find(|l| l.starts_with(&format!("linf_axis_offset,{d},")))
            .unwrap();
        line.split(',').nth(3).unwrap().parse().unwrap()
    };
    assert_eq!(offset("1"), 1.0);
    assert!((offset("9") - 2.0 / 3.0).abs() < 1e-12);
    let svg = fs::read_to_string(dir.path().join("bounds.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("plane_coverage"));
}

#[test]
fn train_then_attack() {
    let dir = tempdir().unwrap();
    let p = |f: &str| dir.path().join(f).to_str().unwrap().to_string();
    ok(codimlab(
        dir.path(),
        &[
            "gen-data",
            "--codim",
            "1",
            "--n-per-class",
            "150",
            "--n-test-per-class",
            "25",
        ],
    ));
    ok(codimlab(
        dir.path(),
        &[
            "train",
            "--data",
            &p("train.csv"),
            "--test",
            &p("test.csv"),
            "--epochs",
            "80",
        ],
    ));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("training.json")).unwrap())
            .unwrap();
    assert!(summary["test_acc"].as_f64().unwrap() > 0.9);
    assert_eq!(summary["loss_trace"].as_array().unwrap().len(), 80);

    let (model, test) = (p("model.ckpt"), p("test.csv"));
    for method in ["fgsm", "bim", "pgd", "gradient-free"] {
        let mut args = vec![
            "attack", "--model", &model, "--data", &test, "--method", method, "--eps", "0.3,2.5",
        ];
        if matches!(method, "bim" | "pgd") {
            args.extend(["--step", "0.1", "--iters", "100"]);
        }
        ok(codimlab(dir.path(), &args));
        let csv = dir.path().join("attack.csv");
        assert_eq!(header(&csv), "row,eps,success,perturbation_norm");
        assert_eq!(rows(&csv), 100);
        for line in fs::read_to_string(&csv).unwrap().lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            let (eps, norm): (f64, f64) = (f[1].parse().unwrap(), f[3].parse().unwrap());
            assert!(norm <= eps + 1e-9, "{method}: {line}");
        }
        let s: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("attack.json")).unwrap())
                .unwrap();
        let rates: Vec<f64> = s["results"]
            .as_array()
            .unwrap()
            .iter()
            .map(|r| r["success_rate"].as_f64().unwrap())
            .collect();
        // ε = 2.5 reaches past the decision axis at radius 2 for every point.
        assert!(rates[1] > 0.9, "{method}: {rates:?}");
    }

    ok(codimlab(
        dir.path(),
        &[
            "attack",
            "--method",
            "nn-walk",
            "--train",
            &p("train.csv"),
            "--data",
            &p("test.csv"),
            "--eps",
            "0.5",
        ],
    ));
    let s: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("attack.json")).unwrap()).unwrap();
    assert_eq!(s["results"][0]["success_rate"], 0.0);
    assert_eq!(
        code(&codimlab(
            dir.path(),
            &["attack", "--method", "nn-walk", "--data", &p("test.csv")]
        )),
        2
    );
    assert_eq!(
        code(&codimlab(
            dir.path(),
            &["attack", "--method", "fgsm", "--data", &p("test.csv")]
        )),
        2
    );
}

#[test]
fn certify_assert_mode() {
    let dir = tempdir().unwrap();
    ok(codimlab(
        dir.path(),
        &[
            "cover", "--family", "planes", "--delta", "0.5", "--probes", "100",
        ],
    ));
    let cover = dir.path().join("cover.csv");
    let cover = cover.to_str().unwrap();
    ok(codimlab(
        dir.path(),
        &[
            "--assert",
            "certify",
            "--data",
            cover,
            "--eps",
            "0.7",
            "--tube-probes",
            "5000",
        ],
    ));
    let cert: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("certificate.json")).unwrap())
            .unwrap();
    assert_eq!(cert["holds"], true);
    assert_eq!(cert["tube_errors"], 0);
    // Admissible radius 2(1 − 0.9) = 0.2 is below the grid's gap.
    let o = codimlab(
        dir.path(),
        &[
            "--assert",
            "certify",
            "--data",
            cover,
            "--eps",
            "0.9",
            "--tube-probes",
            "100",
        ],
    );
    assert_eq!(code(&o), 3);
    assert_eq!(
        code(&codimlab(
            dir.path(),
            &[
                "certify",
                "--data",
                cover,
                "--eps",
                "0.9",
                "--tube-probes",
                "100"
            ]
        )),
        0
    );
}

#[test]
fn sweep_reproduces_from_emitted_config() {
    let a = tempdir().unwrap();
    ok(codimlab(
        a.path(),
        &[
            "sweep-codim",
            "--codims",
            "1,4",
            "--eps",
            "0.5,1",
            "--seeds",
            "2",
            "--epochs",
            "20",
        ],
    ));
    for f in [
        "report.json",
        "results.csv",
        "aggregates.csv",
        "mlp_robust_acc.svg",
        "nn_acc_on_mlp_adv.svg",
    ] {
        assert!(a.path().join(f).exists(), "{f}");
    }
    assert_eq!(
        header(&a.path().join("results.csv")),
        "seed,codim,dim,eps,metric,value"
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("report.json")).unwrap()).unwrap();
    let cfg_path = a.path().join("echo.json");
    fs::write(&cfg_path, serde_json::to_string(&report["config"]).unwrap()).unwrap();

    let b = tempdir().unwrap();
    ok(codimlab(
        b.path(),
        &["--config", cfg_path.to_str().unwrap(), "sweep-codim"],
    ));
    assert_eq!(
        fs::read(a.path().join("results.csv")).unwrap(),
        fs::read(b.path().join("results.csv")).unwrap()
    );
}

#[test]
fn small_experiments_write_outputs() {
    let dir = tempdir().unwrap();
    ok(codimlab(
        dir.path(),
        &["angles", "--codims", "2", "--seeds", "1", "--epochs", "20"],
    ));
    assert!(fs::read_to_string(dir.path().join("angles.svg"))
        .unwrap()
        .contains("codim 2"));

    ok(codimlab(
        dir.path(),
        &[
            "gradfield",
            "--grid-res",
            "11",
            "--epochs",
            "5",
            "--adv-eps",
            "0",
        ],
    ));
    assert_eq!(rows(&dir.path().join("gradfield.csv")), 121);
    assert_eq!(
        header(&dir.path().join("gradfield.csv")),
        "x,y,gx,gy,magnitude"
    );
    assert!(dir.path().join("gradfield.svg").exists());

    ok(codimlab(
        dir.path(),
        &[
            "--assert",
            "slices",
            "--runs",
            "1",
            "--z",
            "0",
            "--grid-res",
            "15",
            "--n-per-class",
            "1000",
            "--epochs",
            "10",
        ],
    ));
    assert_eq!(rows(&dir.path().join("slice_nn_z0.00.csv")), 225);
    assert!(dir.path().join("slice_mlp_z0.00.svg").exists());
}
