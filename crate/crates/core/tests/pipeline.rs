use proptest::prelude::*;
use qtomo::dynamics::{lindblad_exact, JumpOperator, LindbladModel};
use qtomo::io::{to_canonical_string, ChannelFile, MatrixFile, MeasureFile};
use qtomo::linalg::{self, c, max_norm, trace_distance};
use qtomo::measures::QuantumMeasure;
use qtomo::optics::{cascade_measure, OpticalNetwork};
use qtomo::random;
use qtomo::simulator::{
    empirical_coincidence_rates, empirical_rates, sample_coincidences, sample_detections, EventLog, Instrument,
    CHUNK_SHOTS,
};
use qtomo::superop::superop_from_kraus;
use qtomo::tomography::{
    detector_tomography, instrument_tomography, process_tomography, state_tomography, CoincidenceData, DetectorData,
    InstrumentProbe, StateObservation, TomographyOptions,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn sampled_log_survives_csv_and_feeds_state_tomography() {
    let rho = random::density(&mut rng(1), 2);
    let m = QuantumMeasure::pauli_six();
    let log = sample_detections(&rho, &m, 300_000, 9).unwrap();
    let mut buf = Vec::new();
    log.write_csv(&mut buf).unwrap();
    let back = EventLog::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back, log);

    let obs = StateObservation::from_rates(m, &empirical_rates(&back).unwrap()).unwrap();
    let rec = state_tomography(&[obs], &TomographyOptions::default()).unwrap();
    assert!(trace_distance(rec.estimate.matrix(), rho.matrix()) < 1e-2);
    assert!(!rec.report.has_flag("unweighted"));
}

#[test]
fn shorter_runs_are_prefixes_across_chunk_boundaries() {
    let rho = random::density(&mut rng(2), 3);
    let m = random::measure(&mut rng(3), 3, 5);
    let long = sample_detections(&rho, &m, 2 * CHUNK_SHOTS + 17, 4).unwrap();
    for n in [1, CHUNK_SHOTS - 1, CHUNK_SHOTS, CHUNK_SHOTS + 5] {
        let short = sample_detections(&rho, &m, n, 4).unwrap();
        assert_eq!(short.labels(), &long.labels()[..n]);
    }
}

#[test]
fn cascade_measure_is_recovered_by_detector_tomography() {
    let mut r = rng(5);
    let leaf = |r: &mut ChaCha8Rng| {
        let s = linalg::diag(&[0.9, 0.4]);
        OpticalNetwork::leaf(random::unitary(r, 2) * s * random::unitary(r, 2)).unwrap()
    };
    let net = OpticalNetwork::split(leaf(&mut r), OpticalNetwork::split(leaf(&mut r), leaf(&mut r)));
    let m = cascade_measure(&net).unwrap();
    let probes = (0..4).map(|_| random::density(&mut r, 2)).collect();
    let rec = detector_tomography(&DetectorData::exact(probes, &m).unwrap(), &TomographyOptions::default()).unwrap();
    assert!(rec.estimate.has_null());
    for (a, b) in rec.estimate.elements().iter().zip(m.elements()) {
        assert!(max_norm(&(a - b)) < 1e-10);
    }
}

#[test]
fn sampled_instrument_tomography_converges() {
    let inst = Instrument::projective(vec![linalg::diag(&[1.0, 0.0]), linalg::diag(&[0.0, 1.0])]).unwrap();
    let det = QuantumMeasure::pauli_six();
    let mut r = rng(6);
    let probes: Vec<InstrumentProbe> = (0..6u64)
        .map(|i| {
            let state = random::density(&mut r, 2);
            let log = sample_coincidences(&state, &inst, &det, 400_000, 100 + i).unwrap();
            InstrumentProbe { data: CoincidenceData::from_log(&log).unwrap(), state }
        })
        .collect();
    let rec = instrument_tomography(&probes, &det, &TomographyOptions::default()).unwrap();
    let truth = inst.branch_superops();
    for j in 1..truth.len() {
        assert!(rec.estimate.branches[j].action_distance(&truth[j]) < 2e-2, "branch {j}");
    }
    let rates = empirical_coincidence_rates(&sample_coincidences(&probes[0].state, &inst, &det, 1000, 1).unwrap());
    assert_eq!(rates.unwrap().branch_marginal.p_hat[0], 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn process_tomography_recovers_random_channels(seed in any::<u64>(), d in 2usize..=3, n in 1usize..=4) {
        let mut r = rng(seed);
        let k = random::kraus_set(&mut r, d, n);
        let e = superop_from_kraus(&k);
        let inputs: Vec<_> = (0..d * d).map(|_| random::density(&mut r, d).into_matrix()).collect();
        let outputs: Vec<_> = inputs.iter().map(|x| e.apply(x).unwrap()).collect();
        let rec = process_tomography(&inputs, &outputs, &TomographyOptions::default()).unwrap();
        prop_assert!(rec.estimate.action_distance(&e) < 1e-9);
        prop_assert!(!rec.report.has_flag("projected_to_cp"));
    }

    #[test]
    fn file_formats_round_trip(seed in any::<u64>(), d in 1usize..=4, k in 2usize..=5) {
        let mut r = rng(seed);
        let rho = MatrixFile::from_matrix(random::density(&mut r, d).matrix());
        let s = to_canonical_string(&rho).unwrap();
        let back: MatrixFile = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(to_canonical_string(&back).unwrap(), s);
        prop_assert_eq!(&back, &rho);

        let m = MeasureFile::from_measure(&random::measure(&mut r, d, k));
        let back: MeasureFile = serde_json::from_str(&to_canonical_string(&m).unwrap()).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert!(back.to_measure().is_ok());

        let ch = ChannelFile::from_kraus(&random::channel(&mut r, d, k));
        let back: ChannelFile = serde_json::from_str(&to_canonical_string(&ch).unwrap()).unwrap();
        prop_assert_eq!(back, ch);
    }

    #[test]
    fn exact_lindblad_flow_stays_a_state(seed in any::<u64>(), d in 2usize..=3, t in 0.0f64..3.0) {
        let mut r = rng(seed);
        let jumps = vec![JumpOperator { l: random::complex_matrix(&mut r, d, d) * c(0.5, 0.0), gamma: 0.4 }];
        let model = LindbladModel::new(random::hermitian(&mut r, d), jumps, 1.0).unwrap();
        let rho = random::density(&mut r, d);
        let out = lindblad_exact(&model, &rho, t).unwrap();
        prop_assert!((linalg::trace(&out).re - 1.0).abs() < 1e-10);
        prop_assert!(linalg::min_eigenvalue(&out) > -1e-10);
    }
}
