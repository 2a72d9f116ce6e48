use lwrcert_core::lwr::{
    lax_hopf_solve, read_dataset_file, write_csv, write_dataset_file, Environment, Grid, PiecewiseConstantProfile,
};
use lwrcert_core::nn::{layer_sizes, read_model_file, sample_dataset, train, write_model_file, TrainConfig};
use lwrcert_core::Error;

fn small_grid() -> Grid {
    Grid::new(0.0, 1000.0, 25.0, 50.0, 2.5).unwrap()
}

#[test]
fn dataset_file_roundtrip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let env = Environment::paper().with_v_f(35.0).unwrap();
    let (_, field) = lax_hopf_solve(&PiecewiseConstantProfile::paper(), &env, &small_grid()).unwrap();
    let path = dir.path().join("f.tsed");
    write_dataset_file(&field, &path).unwrap();
    assert_eq!(read_dataset_file(&path).unwrap(), field);

    let mut csv = Vec::new();
    write_csv(&field, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 1 + small_grid().node_count());
}

#[test]
fn model_file_roundtrip_preserves_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let env = Environment::paper();
    let grid = small_grid();
    let (_, field) = lax_hopf_solve(&PiecewiseConstantProfile::paper(), &env, &grid).unwrap();
    let samples = sample_dataset(&field, 200, 9).unwrap();
    let config = TrainConfig {
        layer_sizes: layer_sizes(2, 6),
        adam_iterations: 30,
        lbfgs_iterations: 30,
        ..TrainConfig::paper()
    };
    let (model, _) = train(&samples, &config).unwrap();
    let path = dir.path().join("m.tsem");
    write_model_file(&model, &path).unwrap();
    let back = read_model_file(&path).unwrap();
    assert_eq!(back, model);
    assert_eq!(
        back.evaluate_on_grid(&grid, &env).unwrap(),
        model.evaluate_on_grid(&grid, &env).unwrap()
    );
}

#[test]
fn missing_files_are_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.tsed");
    assert!(matches!(read_dataset_file(&missing), Err(Error::Io { .. })));
    assert!(matches!(read_model_file(&missing), Err(Error::Io { .. })));
}

#[test]
fn model_bytes_are_not_a_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let (_, field) = lax_hopf_solve(&PiecewiseConstantProfile::paper(), &Environment::paper(), &small_grid()).unwrap();
    let path = dir.path().join("f.tsed");
    write_dataset_file(&field, &path).unwrap();
    assert!(matches!(read_model_file(&path), Err(Error::Format { .. })));
}
