use std::ffi::CString;
use std::process::Command;
use std::ptr;

use ned_core::networks::{ManipulatorParams, NetConfig, NUM_EMOTIONS};
use ned_core::sequence::{EXPR_DIM, STYLE_DIM};
use ned_ffi::*;

fn c_path(p: &std::path::Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

#[test]
fn constants_match_core() {
    assert_eq!(NED_EXPR_DIM, EXPR_DIM);
    assert_eq!(NED_STYLE_DIM, STYLE_DIM);
    assert_eq!(NED_NUM_EMOTIONS as usize, NUM_EMOTIONS);
}

#[test]
fn translate_through_handles() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("model.nedm");
    ManipulatorParams::init(NetConfig::default(), 3).unwrap().save(&ckpt).unwrap();

    let frames = 25;
    let data: Vec<f32> = (0..frames * EXPR_DIM).map(|i| ((i * 7) % 13) as f32 * 0.1 - 0.6).collect();
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(ned_model_load(c_path(&ckpt).as_ptr(), &mut model), NedStatus::Ok);
        assert_eq!(ned_model_window(model), 10);

        let mut track = ptr::null_mut();
        assert_eq!(ned_track_new(data.as_ptr(), frames, &mut track), NedStatus::Ok);

        let mut style = [0.0f32; NED_STYLE_DIM];
        assert_eq!(ned_style_for_label(model, 2, 11, style.as_mut_ptr()), NedStatus::Ok);
        assert!(style.iter().all(|v| v.is_finite()));
        assert_eq!(ned_style_for_label(model, NED_NUM_EMOTIONS, 11, style.as_mut_ptr()), NedStatus::InvalidArgument);

        let mut out = ptr::null_mut();
        assert_eq!(ned_translate(model, track, style.as_ptr(), &mut out), NedStatus::Ok);
        assert_eq!(ned_track_frames(out), frames);

        let mut from_ref = [0.0f32; NED_STYLE_DIM];
        assert_eq!(ned_style_from_reference(model, out, from_ref.as_mut_ptr()), NedStatus::Ok);

        let csv = dir.path().join("out.csv");
        assert_eq!(ned_track_write(out, c_path(&csv).as_ptr()), NedStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(ned_track_read(c_path(&csv).as_ptr(), &mut back), NedStatus::Ok);
        assert_eq!(ned_track_frames(back), frames);

        let short = [0.0f32; 3 * EXPR_DIM];
        let mut tiny = ptr::null_mut();
        assert_eq!(ned_track_new(short.as_ptr(), 3, &mut tiny), NedStatus::Ok);
        let mut none = ptr::null_mut();
        assert_ne!(ned_translate(model, tiny, style.as_ptr(), &mut none), NedStatus::Ok);
        assert!(none.is_null());

        for t in [track, out, back, tiny] {
            ned_track_free(t);
        }
        ned_model_free(model);
    }
}

#[test]
fn header_compiles_as_c() {
    let root = env!("CARGO_MANIFEST_DIR");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"ned.h\"\n\
         int use(const char *p) {\n\
           NedModel *m = 0;\n\
           float s[NED_STYLE_DIM];\n\
           if (ned_model_load(p, &m) != NED_STATUS_OK) return 1;\n\
           NedStatus st = ned_style_for_label(m, 0, 1, s);\n\
           ned_model_free(m);\n\
           return (int)st;\n\
         }\n",
    )
    .unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(format!("{root}/include"))
        .arg(&src)
        .status()
        .expect("a C compiler named cc is needed for this test");
    assert!(status.success());
}
