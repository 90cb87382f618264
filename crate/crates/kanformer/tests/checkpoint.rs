use std::fs;

use kanformer::checkpoint::{self, BLOB, MANIFEST};
use kanformer::settings::ResolvedConfig;
use kanformer::train::evaluate;
use kanformer::Error;
use kanformer_core::metrics::RmseTracker;
use kanformer_core::transformer::Encoder;
use kanformer_core::{ParamStore, Rng};

fn saved(dir: &std::path::Path) -> (ResolvedConfig, ParamStore<f32>) {
    let mut c = ResolvedConfig::default();
    for (k, v) in [("model.dim", "16"), ("model.layers", "2"), ("model.heads", "2"), ("moe.num_experts", "4")] {
        c.set_flag(k, v).unwrap();
    }
    let run = c.build().unwrap();
    let mut store = ParamStore::new();
    Encoder::new(&run.model, &mut store, &mut Rng::new(9)).unwrap();
    checkpoint::save(dir, &run.resolved, &store).unwrap();
    (run.resolved, store)
}

#[test]
fn save_load_save_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let (_, store) = saved(&a);
    let loaded = checkpoint::load(&a).unwrap();
    assert_eq!(loaded.store, store);
    let b = tmp.path().join("b");
    checkpoint::save(&b, &loaded.run.resolved, &loaded.store).unwrap();
    assert_eq!(fs::read(a.join(BLOB)).unwrap(), fs::read(b.join(BLOB)).unwrap());
    assert_eq!(fs::read(a.join(MANIFEST)).unwrap(), fs::read(b.join(MANIFEST)).unwrap());
}

#[test]
fn reloaded_model_evaluates_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let (resolved, store) = saved(tmp.path());
    let run = resolved.build().unwrap();
    let data = kanformer::dataset::load(&run).unwrap();
    let enc = Encoder::new(&run.model, &mut ParamStore::<f32>::new(), &mut Rng::new(0)).unwrap();
    let before = evaluate(&enc, &store, &data.test, &mut RmseTracker::default()).unwrap();
    let loaded = checkpoint::load(tmp.path()).unwrap();
    let after = evaluate(&loaded.encoder, &loaded.store, &data.test, &mut RmseTracker::default()).unwrap();
    assert_eq!(before, after);
}

#[test]
fn truncated_blob_is_a_size_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    saved(tmp.path());
    let blob = tmp.path().join(BLOB);
    let mut bytes = fs::read(&blob).unwrap();
    let full = bytes.len() as u64;
    bytes.pop();
    fs::write(&blob, bytes).unwrap();
    match checkpoint::load(tmp.path()) {
        Err(Error::Truncated { expected, actual }) => assert_eq!((expected, actual), (full, full - 1)),
        other => panic!("{:?}", other.err()),
    }
}

#[test]
fn version_mismatch_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    saved(tmp.path());
    let path = tmp.path().join(MANIFEST);
    let text = fs::read_to_string(&path).unwrap().replace("format_version = 1", "format_version = 7");
    fs::write(&path, text).unwrap();
    assert!(matches!(
        checkpoint::load(tmp.path()),
        Err(Error::VersionMismatch { found: 7, expected: 1 })
    ));
}

#[test]
fn manifest_and_model_disagreement_is_inconsistent() {
    let tmp = tempfile::tempdir().unwrap();
    saved(tmp.path());
    let path = tmp.path().join(MANIFEST);
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, text.replacen("name = \"pos\"", "name = \"position\"", 1)).unwrap();
    assert!(matches!(checkpoint::load(tmp.path()), Err(Error::Inconsistent(_))));

    // Editing the embedded config without updating the fingerprint.
    fs::write(&path, text.replace("layers = 2", "layers = 3")).unwrap();
    assert!(matches!(checkpoint::load(tmp.path()), Err(Error::Inconsistent(_))));
}

#[test]
fn missing_checkpoint_has_its_own_error() {
    let err = checkpoint::load(std::path::Path::new("no/such/dir")).err().unwrap();
    assert!(matches!(err, Error::MissingCheckpoint(_)));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn blob_is_little_endian_f32_in_index_order() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, store) = saved(tmp.path());
    let bytes = fs::read(tmp.path().join(BLOB)).unwrap();
    let manifest = checkpoint::read_manifest(tmp.path()).unwrap();
    for (entry, e) in manifest.tensor.iter().zip(store.entries()) {
        let off = entry.offset as usize;
        let first = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        assert_eq!(first.to_bits(), e.tensor.data()[0].to_bits(), "{}", entry.name);
    }
}
