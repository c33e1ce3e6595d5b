use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ned_core::data::read_track;
use ned_core::geometry::{Landmarks68, Raster, SimilarityTransform2D};

fn ned(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ned")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = ned(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL_CONFIG: &str = r#"{"batch_size": 8, "iterations": 3, "hidden": {"hidden_g": 8, "hidden_e": 6, "hidden_d": 6, "mapping_hidden": 6}}"#;

#[test]
fn data_train_translate_and_score_tracks() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let data = t.join("data");
    ok(&["gen-data", "--out", p(&data), "--clips-per-domain", "2", "--length", "24", "--seed", "3"]);
    let manifest = data.join("manifest.json");
    assert!(manifest.exists() && data.join("domain_spec.json").exists());

    fs::write(t.join("config.json"), SMALL_CONFIG).unwrap();
    let run = t.join("run");
    ok(&["train", "--config", p(&t.join("config.json")), "--data", p(&manifest), "--out", p(&run), "--log-every", "0", "--seed", "5"]);
    let model = run.join("model.nedm");
    assert!(model.exists() && run.join("train_log.csv").exists());

    let clip = fs::read_dir(data.join("clips")).unwrap().next().unwrap().unwrap().path();
    let happy = t.join("happy.csv");
    ok(&["translate", "--model", p(&model), "--input", p(&clip), "--label", "happy", "--out", p(&happy), "--seed", "1"]);
    assert_eq!(read_track(&happy).unwrap().len(), read_track(&clip).unwrap().len());
    let again = t.join("again.csv");
    ok(&["translate", "--model", p(&model), "--input", p(&clip), "--label", "happy", "--out", p(&again), "--seed", "1"]);
    assert_eq!(fs::read(&happy).unwrap(), fs::read(&again).unwrap());

    let styled = t.join("styled.csv");
    ok(&["translate", "--model", p(&model), "--input", p(&clip), "--ref", p(&happy), "--out", p(&styled)]);

    let style = t.join("style.json");
    ok(&["extract-style", "--model", p(&model), "--ref", p(&clip), "--out", p(&style)]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&style).unwrap()).unwrap();
    assert_eq!(v["style"].as_array().unwrap().len(), 16);

    let report = t.join("report.json");
    ok(&["eval", "--gen", p(&happy), "--gt", p(&clip), "--out", p(&report)]);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(r["aggregate"]["jaw_pcc"].as_f64().unwrap().abs() <= 1.0);

    let bad = ned(&["translate", "--model", p(&model), "--input", p(&t.join("missing.csv")), "--label", "sad", "--out", p(&styled)]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("error:"));
}

#[test]
fn diverging_training_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let data = t.join("data");
    ok(&["gen-data", "--out", p(&data), "--clips-per-domain", "2", "--length", "24"]);
    let cfg = SMALL_CONFIG.replace("\"iterations\": 3", "\"iterations\": 50, \"learning_rate\": 1e30");
    fs::write(t.join("config.json"), cfg).unwrap();
    let out = ned(&["train", "--config", p(&t.join("config.json")), "--data", p(&data.join("manifest.json")), "--out", p(&t.join("run")), "--log-every", "0"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(ned(&["translate"]).status.code(), Some(1));
    assert_eq!(ned(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(ned(&["--help"]).status.code(), Some(0));
    let help = String::from_utf8(ned(&["--help"]).stdout).unwrap();
    for sub in ["gen-data", "train", "translate", "extract-style", "eval", "align", "blend"] {
        assert!(help.contains(sub), "{sub} missing from help");
    }
}

fn frame(w: usize, h: usize, shift: f32) -> Raster {
    Raster::from_fn(w, h, 3, |x, y, c| ((x * 3 + y * 5 + c * 40) % 200) as f32 / 255.0 + shift).unwrap()
}

#[test]
fn image_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let (gen, gt, masks) = (t.join("gen"), t.join("gt"), t.join("masks"));
    for d in [&gen, &gt, &masks] {
        fs::create_dir_all(d).unwrap();
    }
    for i in 0..2 {
        let name = format!("{i:04}.png");
        frame(64, 48, 0.0).write_png(&gt.join(&name)).unwrap();
        frame(64, 48, 5.0 / 255.0).write_png(&gen.join(&name)).unwrap();
        Raster::filled(64, 48, 1, 1.0).unwrap().write_png(&masks.join(&name)).unwrap();
    }
    fs::write(t.join("mouth.json"), r#"{"0000.png": [32, 30], "0001.png": [10, 10]}"#).unwrap();
    let report = t.join("report.json");
    ok(&["eval", "--gen", p(&gen), "--gt", p(&gt), "--masks", p(&masks), "--mouth", p(&t.join("mouth.json")), "--out", p(&report)]);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    for m in ["apd", "fapd", "mapd"] {
        assert!((r["metrics"][m]["mean"].as_f64().unwrap() - 5.0 * 3f64.sqrt()).abs() < 1e-9, "{m}");
    }

    let fg = t.join("fg.png");
    let bg = t.join("bg.png");
    let mask = t.join("mask.png");
    Raster::filled(64, 64, 3, 1.0).unwrap().write_png(&fg).unwrap();
    Raster::filled(64, 64, 3, 0.0).unwrap().write_png(&bg).unwrap();
    Raster::from_fn(64, 64, 1, |x, _, _| if x < 32 { 1.0 } else { 0.0 }).unwrap().write_png(&mask).unwrap();
    let out = t.join("blend.png");
    ok(&["blend", "--fg", p(&fg), "--bg", p(&bg), "--mask", p(&mask), "--erode", "2", "--out", p(&out)]);
    let b = Raster::read_png(&out, 3).unwrap();
    assert!(b.get(2, 30, 0) > 0.95 && b.get(61, 30, 0) < 0.05);
    assert_eq!(ned(&["blend", "--fg", p(&fg), "--bg", p(&bg), "--mask", p(&mask), "--levels", "99", "--out", p(&out)]).status.code(), Some(1));

    let template: Vec<[f64; 2]> = serde_json::from_str(include_str!("../data/face_template_256.json")).unwrap();
    let template = Landmarks68::new(template).unwrap();
    let shift = SimilarityTransform2D::new(1.0, 0.0, 6.0, -4.0).unwrap();
    let marks = t.join("marks.json");
    template.transformed(&shift).write(&marks).unwrap();
    let face = Raster::from_fn(256, 256, 3, |x, y, _| ((x / 16 + y / 16) % 2) as f32).unwrap();
    let img = t.join("face.png");
    face.write_png(&img).unwrap();
    let aligned = t.join("aligned.png");
    ok(&["align", "--landmarks", p(&marks), "--image", p(&img), "--out", p(&aligned), "--size", "256x256"]);
    let a = Raster::read_png(&aligned, 3).unwrap();
    assert_eq!(a.get(100, 100, 0), face.get(106, 96, 0));
}
