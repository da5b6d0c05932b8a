use std::ffi::{CStr, CString};
use std::ptr;

use deepgraph::checkpoint::Checkpoint;
use deepgraph::commands::{cmd_describe, cmd_generate, cmd_train};
use deepgraph::config::RunConfig;
use deepgraph::descriptor::{compute_hks, fit_stats, histogram_descriptor, DiffusionSteps};
use deepgraph::features::RidgeModel;
use deepgraph::graph::Graph;
use deepgraph::pipeline::{FittedModel, ModelKind};
use deepgraph_ffi::*;

fn last_error() -> String {
    let p = dg_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn graph(n: usize, edges: &[(usize, usize)]) -> *mut DgGraph {
    let src: Vec<usize> = edges.iter().map(|e| e.0).collect();
    let dst: Vec<usize> = edges.iter().map(|e| e.1).collect();
    let mut g = ptr::null_mut();
    let s = unsafe { dg_graph_from_edges(n, src.as_ptr(), dst.as_ptr(), edges.len(), &mut g) };
    assert_eq!(s, DgStatus::Ok);
    g
}

const PETERSEN: [(usize, usize); 15] = [
    (0, 1), (1, 2), (2, 3), (3, 4), (4, 0),
    (0, 5), (1, 6), (2, 7), (3, 8), (4, 9),
    (5, 7), (7, 9), (9, 6), (6, 8), (8, 5),
];

#[test]
fn graph_and_ego_net() {
    let g = graph(10, &PETERSEN);
    let (mut n, mut m) = (0, 0);
    unsafe {
        assert_eq!(dg_graph_size(g, &mut n, &mut m), DgStatus::Ok);
        assert_eq!((n, m), (10, 15));
        let mut ego = ptr::null_mut();
        assert_eq!(dg_graph_ego_net(g, 0, 1, &mut ego), DgStatus::Ok);
        assert_eq!(dg_graph_size(ego, &mut n, &mut m), DgStatus::Ok);
        assert_eq!((n, m), (4, 3));
        dg_graph_free(ego);
        assert_eq!(dg_graph_ego_net(g, 99, 1, &mut ego), DgStatus::InvalidArgument);
        assert!(!last_error().is_empty());
        dg_graph_free(g);
    }
}

#[test]
fn hks_and_descriptor_match_the_library() {
    let core = Graph::from_edges(10, PETERSEN).unwrap();
    let steps = DiffusionSteps::new(0.1, 10.0, 6).unwrap();
    let want = compute_hks(&core, &steps, None).unwrap();
    let g = graph(10, &PETERSEN);
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(dg_hks_compute(g, 0.1, 10.0, 6, 0, &mut h), DgStatus::Ok);
        let (mut r, mut c) = (0, 0);
        dg_hks_shape(h, &mut r, &mut c);
        assert_eq!((r, c), (10, 6));
        let mut buf = vec![0.0; r * c];
        assert_eq!(dg_hks_copy(h, buf.as_mut_ptr(), buf.len()), DgStatus::Ok);
        assert_eq!(buf, want.as_slice());
        assert_eq!(dg_hks_copy(h, buf.as_mut_ptr(), 3), DgStatus::InvalidArgument);

        let hs = [h as *const DgHks];
        let mut s = ptr::null_mut();
        assert_eq!(dg_stats_fit(hs.as_ptr(), 1, 5, &mut s), DgStatus::Ok);
        let (mut b, mut t) = (0, 0);
        dg_stats_shape(s, &mut b, &mut t);
        assert_eq!((b, t), (5, 6));
        let mut d = vec![0.0; 30];
        assert_eq!(dg_descriptor_compute(h, s, 0, d.as_mut_ptr(), 30), DgStatus::Ok);
        let expect = histogram_descriptor(&want, &fit_stats([&want]).unwrap(), 5).unwrap();
        assert_eq!(d, expect.as_slice());
        // fitted statistics carry no pixel moments
        assert_eq!(dg_descriptor_compute(h, s, 1, d.as_mut_ptr(), 30), DgStatus::InvalidArgument);
        assert!(last_error().contains("pixel"));
        dg_stats_free(s);
        dg_hks_free(h);
        dg_graph_free(g);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let src = [0usize, 1];
        let dst = [1usize, 7];
        let mut g = ptr::null_mut();
        assert_eq!(dg_graph_from_edges(3, src.as_ptr(), dst.as_ptr(), 2, &mut g), DgStatus::InvalidArgument);
        assert!(g.is_null());
        assert_eq!(dg_graph_from_edges(3, ptr::null(), dst.as_ptr(), 2, &mut g), DgStatus::NullPointer);
        assert!(last_error().contains("src"));
        // a success clears the message
        let g = graph(2, &[(0, 1)]);
        assert!(dg_last_error_message().is_null());
        let mut h = ptr::null_mut();
        assert_eq!(dg_hks_compute(g, 5.0, 1.0, 4, 0, &mut h), DgStatus::InvalidArgument);
        dg_graph_free(g);
        dg_graph_free(ptr::null_mut());

        let missing = CString::new("/nonexistent/model.ckpt").unwrap();
        let mut m = ptr::null_mut();
        assert_eq!(dg_model_load(missing.as_ptr(), &mut m), DgStatus::Io);
        let mut s = ptr::null_mut();
        assert_eq!(dg_stats_load(missing.as_ptr(), &mut s), DgStatus::InvalidArgument);
    }
}

#[test]
fn ridge_checkpoint_predicts() {
    let dir = tempfile::tempdir().unwrap();
    let model = RidgeModel { weights: vec![2.0, -1.0], intercept: 0.5, l2: 1e-3, means: vec![1.0, 0.0], sds: vec![2.0, 1.0] };
    let path = dir.path().join("m.ckpt");
    Checkpoint::from_fitted(&FittedModel::Ridge { kind: ModelKind::GdLinear, model: model.clone(), val_mse: 0.1 }, None)
        .save(&path)
        .unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(dg_model_load(c.as_ptr(), &mut m), DgStatus::Ok);
        let mut len = 0;
        dg_model_input_len(m, &mut len);
        assert_eq!(len, 2);
        let x = [3.0, 1.0, -1.0, 0.5];
        let mut out = [0.0; 2];
        assert_eq!(dg_model_predict(m, x.as_ptr(), 2, out.as_mut_ptr()), DgStatus::Ok);
        assert_eq!(out[0], model.predict(&x[..2]).unwrap());
        assert_eq!(out[1], model.predict(&x[2..]).unwrap());
        dg_model_free(m);
    }
    std::fs::write(&path, b"garbage").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { dg_model_load(c.as_ptr(), &mut m) }, DgStatus::Format);
}

#[test]
fn run_directory_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::from_toml(
        r#"
seed = 3
[generator]
kind = "preferential-attachment"
n_nodes = 200
edges_per_node = 2
[split]
fractions = [0.6, 0.2, 0.2]
train = { graph_time = 100, growth_time = 197 }
val = { graph_time = 101, growth_time = 198 }
test = { graph_time = 102, growth_time = 199 }
[descriptor]
n_steps = 8
n_bins = 6
[train]
max_epochs = 2
"#,
    )
    .unwrap();
    cfg.out = Some(dir.path().to_path_buf());
    cmd_generate(&cfg, false).unwrap();
    cmd_describe(&cfg).unwrap();
    let fitted = cmd_train(&cfg, ModelKind::Deepgraph).unwrap();

    let g = graph(10, &PETERSEN);
    let root = CString::new(dir.path().to_str().unwrap()).unwrap();
    let ckpt = CString::new(dir.path().join("models/deepgraph.ckpt").to_str().unwrap()).unwrap();
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(dg_hks_compute(g, 0.1, 25.0, 8, 0, &mut h), DgStatus::Ok);
        let mut s = ptr::null_mut();
        assert_eq!(dg_stats_load(root.as_ptr(), &mut s), DgStatus::Ok);
        let mut x = vec![0.0; 48];
        assert_eq!(dg_descriptor_compute(h, s, 1, x.as_mut_ptr(), 48), DgStatus::Ok);
        let mut m = ptr::null_mut();
        assert_eq!(dg_model_load(ckpt.as_ptr(), &mut m), DgStatus::Ok);
        let mut y = 0.0;
        assert_eq!(dg_model_predict(m, x.as_ptr(), 1, &mut y), DgStatus::Ok);
        assert_eq!(y, fitted.predict_many(&[&x]).unwrap()[0]);
        dg_model_free(m);
        dg_stats_free(s);
        dg_hks_free(h);
        dg_graph_free(g);
    }
}

#[test]
fn header_lists_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/deepgraph.h")).unwrap();
    for name in [
        "dg_graph_from_edges", "dg_graph_ego_net", "dg_hks_compute", "dg_stats_load",
        "dg_descriptor_compute", "dg_model_load", "dg_model_predict", "dg_last_error_message",
        "DG_STATUS_PROVENANCE",
    ] {
        assert!(header.contains(name), "{name}");
    }
}
