use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use embdebias::data::embeddings::{save_embeddings, EmbeddingFormat, EmbeddingRow, EmbeddingTable};
use embdebias_ffi::*;

fn last_error() -> String {
    let p = ed_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn lda_separates_shifted_clouds() {
    // a: mean (1, 0), b: mean (-1, 0), identical spread along both axes
    let xa = [1.0, 1.0, 1.0, -1.0, 1.5, 0.0, 0.5, 0.0];
    let xb = [-1.0, 1.0, -1.0, -1.0, -0.5, 0.0, -1.5, 0.0];
    let mut w = [0.0; 2];
    let st = unsafe { ed_lda_fit(xa.as_ptr(), 4, xb.as_ptr(), 4, 2, 0.0, w.as_mut_ptr()) };
    assert_eq!(st, EdStatus::Ok);
    assert!((w[0] - 1.0).abs() < 1e-12 && w[1].abs() < 1e-12, "{w:?}");
    assert!(ed_last_error().is_null());
}

#[test]
fn degenerate_means_set_status_and_message() {
    let x = [0.0, 1.0, 1.0, 0.0];
    let mut w = [0.0; 2];
    let st = unsafe { ed_lda_fit(x.as_ptr(), 2, x.as_ptr(), 2, 2, 0.01, w.as_mut_ptr()) };
    assert_eq!(st, EdStatus::DegenerateMeans);
    assert!(last_error().contains("indistinguishable"));
}

#[test]
fn null_pointers_are_rejected() {
    let st = unsafe { ed_lda_fit(ptr::null(), 2, ptr::null(), 2, 2, 0.0, ptr::null_mut()) };
    assert_eq!(st, EdStatus::NullPointer);
    assert!(last_error().contains("xa"));
    let mut out = 0.0;
    let st = unsafe { ed_roc_auc(ptr::null(), ptr::null(), 3, &mut out) };
    assert_eq!(st, EdStatus::NullPointer);
}

#[test]
fn auc_and_correlation() {
    let scores = [0.1, 0.4, 0.35, 0.8];
    let labels = [0u8, 0, 1, 1];
    let mut auc = 0.0;
    assert_eq!(unsafe { ed_roc_auc(scores.as_ptr(), labels.as_ptr(), 4, &mut auc) }, EdStatus::Ok);
    assert_eq!(auc, 0.75);

    let same = [1u8; 4];
    assert_eq!(unsafe { ed_roc_auc(scores.as_ptr(), same.as_ptr(), 4, &mut auc) }, EdStatus::SingleClass);

    let w = [3.0, 4.0];
    let v = [4.0, -3.0];
    let mut c = 1.0;
    assert_eq!(unsafe { ed_bias_correlation(w.as_ptr(), v.as_ptr(), 2, &mut c) }, EdStatus::Ok);
    assert!(c.abs() < 1e-15);
}

#[test]
fn operator_removes_span() {
    let dirs = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
    let mut op = ptr::null_mut();
    let st = unsafe { ed_operator_from_directions(dirs.as_ptr(), 2, 3, 1e-6, &mut op) };
    assert_eq!(st, EdStatus::Ok);
    unsafe {
        assert_eq!(ed_operator_rank(op), 2);
        assert_eq!(ed_operator_dim(op), 3);
        let mut x = [2.0, -1.0, 5.0, 0.5, 0.5, -3.0];
        assert_eq!(ed_operator_apply(op, x.as_mut_ptr(), 2), EdStatus::Ok);
        for (got, want) in x.iter().zip([0.0, 0.0, 5.0, 0.0, 0.0, -3.0]) {
            assert!((got - want).abs() < 1e-12, "{x:?}");
        }
        ed_operator_free(op);
        ed_operator_free(ptr::null_mut());
    }

    let dup = [1.0, 0.0, 0.0, 2.0, 0.0, 0.0];
    let mut op = ptr::null_mut();
    let st = unsafe { ed_operator_from_directions(dup.as_ptr(), 2, 3, 1e-6, &mut op) };
    assert_eq!(st, EdStatus::RankDeficient);
    assert!(op.is_null());
}

#[test]
fn kernel_map_round_trip() {
    let sample: Vec<f64> = (0..40).map(|i| ((i * 7) % 11) as f64 / 3.0).collect();
    let mut map = ptr::null_mut();
    let st = unsafe { ed_kernel_map_new(4, 0, 0.0, 3, sample.as_ptr(), 10, &mut map) };
    assert_eq!(st, EdStatus::Ok);
    unsafe {
        assert_eq!(ed_kernel_map_input_dim(map), 4);
        assert_eq!(ed_kernel_map_output_dim(map), 16);
        assert!(ed_kernel_map_gamma(map) > 0.0);
        let mut z = vec![0.0; 2 * 16];
        assert_eq!(ed_kernel_map_transform(map, sample.as_ptr(), 2, z.as_mut_ptr()), EdStatus::Ok);
        let bound = (2.0f64 / 16.0).sqrt() + 1e-15;
        assert!(z.iter().all(|v| v.abs() <= bound));
        ed_kernel_map_free(map);
    }

    let mut map = ptr::null_mut();
    let st = unsafe { ed_kernel_map_new(4, 8, -1.0, 3, ptr::null(), 0, &mut map) };
    assert_ne!(st, EdStatus::Ok);
    assert!(map.is_null());
}

#[test]
fn embeddings_load_and_copy() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.emb");
    let table = EmbeddingTable::new(
        3,
        vec![
            EmbeddingRow {
                clip_id: "x1".into(),
                frame_index: 0,
                vector: vec![0.5, -1.25, 2.0],
            },
            EmbeddingRow {
                clip_id: "x2".into(),
                frame_index: 4,
                vector: vec![1.0, 0.0, -0.75],
            },
        ],
    )
    .unwrap();
    save_embeddings(&table, &path, EmbeddingFormat::Binary).unwrap();

    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { ed_embeddings_load(cpath.as_ptr(), 0, &mut t) }, EdStatus::Ok);
    unsafe {
        assert_eq!(ed_embeddings_rows(t), 2);
        assert_eq!(ed_embeddings_dim(t), 3);
        assert_eq!(CStr::from_ptr(ed_embeddings_clip_id(t, 1)).to_str().unwrap(), "x2");
        assert!(ed_embeddings_clip_id(t, 2).is_null());
        assert_eq!(ed_embeddings_frame(t, 1), 4);
        let mut buf = [0.0; 6];
        assert_eq!(ed_embeddings_copy(t, buf.as_mut_ptr(), 6), EdStatus::Ok);
        assert_eq!(buf, [0.5, -1.25, 2.0, 1.0, 0.0, -0.75]);
        assert_eq!(ed_embeddings_copy(t, buf.as_mut_ptr(), 5), EdStatus::DimensionMismatch);
        ed_embeddings_free(t);
    }

    let missing = CString::new(dir.path().join("nope.emb").to_str().unwrap()).unwrap();
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { ed_embeddings_load(missing.as_ptr(), 1, &mut t) }, EdStatus::Io);
}

fn header() -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/embdebias.h");
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn header_declares_every_symbol() {
    let h = header();
    for sym in [
        "ed_last_error",
        "ed_lda_fit",
        "ed_bias_correlation",
        "ed_roc_auc",
        "ed_operator_from_directions",
        "ed_operator_apply",
        "ed_operator_rank",
        "ed_operator_free",
        "ed_kernel_map_new",
        "ed_kernel_map_transform",
        "ed_kernel_map_output_dim",
        "ed_kernel_map_free",
        "ed_embeddings_load",
        "ed_embeddings_copy",
        "ed_embeddings_clip_id",
        "ed_embeddings_free",
        "ED_STATUS_OK = 0",
        "typedef struct EdOperator EdOperator",
    ] {
        assert!(h.contains(sym), "header lacks {sym}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(out) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", "-"])
        .arg("-I")
        .arg(Path::new(env!("CARGO_MANIFEST_DIR")).join("include"))
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .and_then(|mut child| {
            use std::io::Write;
            child
                .stdin
                .take()
                .unwrap()
                .write_all(b"#include \"embdebias.h\"\nint main(void) { return ED_STATUS_OK; }\n")?;
            child.wait_with_output()
        })
    else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
