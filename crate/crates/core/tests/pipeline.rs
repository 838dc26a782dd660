use std::fs;
use std::path::{Path, PathBuf};

use ecomix_core::dataset::AgeBucket;
use ecomix_core::discovery::{AlphaMode, ArchetypeConfig, BandPlan, ReductionReport};
use ecomix_core::pipeline::*;
use ecomix_core::Error;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn run_all(root: &Path, seed: u64) {
    ingest(&IngestOptions {
        uci: data_dir().join("concrete.csv"),
        factors: data_dir().join("factors.example.json"),
        out: root.join("data"),
        seed,
        test_fraction: DEFAULT_TEST_FRACTION,
    })
    .unwrap();
    train(&TrainOptions {
        data: root.join("data"),
        out: root.join("models"),
        epochs: Some(3),
        seed,
        kl_weight: 1.0,
    })
    .unwrap();
    discover(&DiscoverOptions {
        models: root.join("models"),
        out: root.join("models"),
        n: 300,
        bands: "D7:30,40;D28:40/5".parse().unwrap(),
        seed,
        archetypes: ArchetypeConfig::default(),
        jobs: Some(2),
    })
    .unwrap();
    progression(&ProgressionOptions {
        models: root.join("models"),
        out: root.join("models"),
        n: 40,
        seed,
        mode: AlphaMode::Grid,
    })
    .unwrap();
}

fn listing(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn full_pipeline_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_all(a.path(), 7);
    run_all(b.path(), 7);
    for sub in ["data", "models"] {
        let (la, lb) = (listing(&a.path().join(sub)), listing(&b.path().join(sub)));
        assert_eq!(la.len(), lb.len());
        for ((na, ba), (nb, bb)) in la.iter().zip(&lb) {
            assert_eq!(na, nb);
            assert!(ba == bb, "{sub}/{na} differs between runs");
        }
    }

    let models = a.path().join("models");
    let checkpoints = fs::read_dir(&models)
        .unwrap()
        .filter(|e| {
            let n = e.as_ref().unwrap().file_name().to_string_lossy().into_owned();
            n == CVAE_FILE || n == IMPACT_FILE || n.starts_with("strength_")
        })
        .count();
    assert_eq!(checkpoints, 8);

    let manifest = Manifest::load(&models).unwrap().unwrap();
    let cmds: Vec<_> = manifest.commands.keys().cloned().collect();
    assert_eq!(cmds, ["discover", "progression", "train"]);
    let discover = &manifest.commands["discover"];
    assert_eq!(discover.seeds["discover"], 7);
    for (name, digest) in &discover.outputs {
        assert_eq!(&sha256_hex(&fs::read(models.join(name)).unwrap()), digest, "{name}");
    }
    assert_eq!(discover.inputs.len(), 10);
    let text = fs::read_to_string(models.join(MANIFEST_FILE)).unwrap();
    assert!(!text.contains(a.path().to_str().unwrap()), "manifest must not record paths");

    let trace = fs::read_to_string(models.join(LOSS_TRACE_FILE)).unwrap();
    assert_eq!(trace.lines().count(), 4);
    for line in trace.lines().skip(1) {
        for v in line.split(',') {
            assert!(v.parse::<f64>().unwrap().is_finite());
        }
    }

    let report: ReductionReport =
        serde_json::from_slice(&fs::read(models.join(REDUCTION_JSON)).unwrap()).unwrap();
    assert_eq!(report.rows.len(), 3);
    let csv = fs::read_to_string(models.join(REDUCTION_CSV)).unwrap();
    assert_eq!(csv.lines().count(), 4);
    for b in [AgeBucket::D7, AgeBucket::D28] {
        assert!(models.join(spectrum_file(b)).exists());
        assert!(models.join(extremal_file(b)).exists());
    }
    for b in AgeBucket::ALL {
        assert!(models.join(progression_file(b)).exists());
    }
    let rmse = fs::read_to_string(models.join(PROGRESSION_RMSE_CSV)).unwrap();
    assert_eq!(rmse.lines().count(), 7);
}

#[test]
fn different_seed_changes_outputs() {
    let a = tempfile::tempdir().unwrap();
    let opts = |out: PathBuf, seed| IngestOptions {
        uci: data_dir().join("concrete.csv"),
        factors: data_dir().join("factors.example.json"),
        out,
        seed,
        test_fraction: 0.2,
    };
    let m1 = ingest(&opts(a.path().join("1"), 1)).unwrap();
    let m2 = ingest(&opts(a.path().join("2"), 2)).unwrap();
    assert_eq!(m1.n_records, 1030);
    assert_eq!((m1.n_train, m1.n_test), (m2.n_train, m2.n_test));
    assert_ne!(m1.roles, m2.roles);
}

#[test]
fn corrupt_csv_is_a_data_error_naming_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = fs::read_to_string(data_dir().join("concrete.csv")).unwrap();
    csv = csv.replacen("540,0,0,162,2.5,1040,676,28,79.99", "540,0,0,162,oops,1040,676,28,79.99", 1);
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, csv).unwrap();
    let err = ingest(&IngestOptions {
        uci: bad,
        factors: data_dir().join("factors.example.json"),
        out: dir.path().join("out"),
        seed: 1,
        test_fraction: 0.2,
    })
    .unwrap_err();
    assert!(err.is_data_error());
    assert!(err.to_string().starts_with("row 1:"), "{err}");
}

#[test]
fn missing_inputs_are_environment_errors() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_models(dir.path()).unwrap_err();
    assert!(matches!(err, Error::File { .. }) && !err.is_data_error(), "{err}");
    let err = train(&TrainOptions {
        data: dir.path().join("nope"),
        out: dir.path().join("models"),
        epochs: Some(1),
        seed: 1,
        kl_weight: 1.0,
    })
    .unwrap_err();
    assert!(err.to_string().contains(LABELED_FILE), "{err}");
}

#[test]
fn tampered_checkpoints_are_rejected() {
    let root = tempfile::tempdir().unwrap();
    ingest(&IngestOptions {
        uci: data_dir().join("concrete.csv"),
        factors: data_dir().join("factors.example.json"),
        out: root.path().to_path_buf(),
        seed: 3,
        test_fraction: 0.2,
    })
    .unwrap();
    train(&TrainOptions {
        data: root.path().to_path_buf(),
        out: root.path().to_path_buf(),
        epochs: Some(1),
        seed: 3,
        kl_weight: 1.0,
    })
    .unwrap();
    let loaded = load_models(root.path()).unwrap();
    assert_eq!(loaded.format_version, 1);
    assert_eq!(loaded.meta.n_records, 1030);

    // a strength checkpoint stored under another bucket's name
    fs::copy(root.path().join(strength_file(AgeBucket::D7)), root.path().join(strength_file(AgeBucket::D14))).unwrap();
    let err = load_models(root.path()).unwrap_err();
    assert!(err.to_string().contains("strength_D14"), "{err}");

    fs::write(root.path().join(CVAE_FILE), b"{\"format_version\": 99}").unwrap();
    assert!(load_models(root.path()).unwrap_err().is_data_error());
}

#[test]
fn band_plan_round_trips_through_manifest_parameter() {
    let plan = BandPlan::standard();
    let text = plan.to_string();
    assert_eq!(text.parse::<BandPlan>().unwrap(), plan);
}

#[test]
fn d7_baseline_on_real_data_matches_linear_scan() {
    use ecomix_core::dataset::{parse_uci_csv, Dataset, FactorTable};
    use ecomix_core::discovery::{extant_baseline, StrengthBand};

    let raw = parse_uci_csv(&fs::read(data_dir().join("concrete.csv")).unwrap()).unwrap();
    let factors = FactorTable::from_json(&fs::read(data_dir().join("factors.example.json")).unwrap()).unwrap();
    let dataset = Dataset::build(&raw, &factors, 0.2, 42).unwrap();
    let band = StrengthBand::new(30.0, 1.0).unwrap();
    let base = extant_baseline(&dataset, AgeBucket::D7, band).unwrap();

    let mut min = [f64::INFINITY; 3];
    let mut count = 0;
    for r in dataset.records() {
        if r.raw.age_days == 7 && (29.0..=31.0).contains(&r.raw.strength_mpa) {
            count += 1;
            let v = [r.impacts.gwp, r.impacts.ap, r.impacts.cbw];
            for d in 0..3 {
                min[d] = min[d].min(v[d]);
            }
        }
    }
    assert!(count > 0);
    assert_eq!(base.count, count);
    assert_eq!(base.minima(), min);
}
