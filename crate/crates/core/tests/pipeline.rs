use linksched::harness::{load_records, run_experiment, save_records, ExperimentSpec, SweepSpec, TopologySpec};
use linksched::meanfield::{mf_solve, MfOptions};
use linksched::net::{generate_topology, outage_probability, PlacementRule};
use linksched::scheduler::{schedule, ResidualMode, ScheduleOptions};
use linksched::{Execution, NeighborhoodSystem, Network, SchedulingParams};

#[test]
fn network_json_round_trip_preserves_solutions() {
    let net = generate_topology(8, 40, 6.0, PlacementRule::default(), 4.0, 1e-4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    net.save(&path).unwrap();
    let back = Network::load(&path).unwrap();
    assert_eq!(back, net);
    let params = SchedulingParams::for_network(&net, 10.0).unwrap();
    let nb = NeighborhoodSystem::new(&net, 2.0).unwrap();
    let a = mf_solve(&net, &nb, &params, None, MfOptions::default()).unwrap();
    let b = mf_solve(&back, &nb, &params, None, MfOptions::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn reported_outage_is_the_full_information_outage() {
    let net = generate_topology(12, 120, 10.0, PlacementRule::default(), 4.0, 1e-4).unwrap();
    let params = SchedulingParams::for_network(&net, 10.0).unwrap();
    let nb = NeighborhoodSystem::new(&net, 1.5).unwrap();
    for mode in ["ignore", "mf", "mf-meas:0.2", "clt"] {
        let mode: ResidualMode = mode.parse().unwrap();
        let t = schedule(&net, &nb, &params, mode, &ScheduleOptions::with_seed(3)).unwrap();
        assert_eq!(t.outage, outage_probability(&t.config, &net, &params).unwrap(), "{mode}");
    }
}

#[test]
fn experiment_records_survive_a_file_round_trip() {
    let spec = ExperimentSpec {
        topology: TopologySpec { seeds: vec![2, 3], n_links: 50, area_side: 7.0, placement: PlacementRule::default(), noise: 1e-4 },
        sweep: SweepSpec { gamma_f: vec![2.0], alpha: vec![3.0, 4.0], sinr_th: vec![10.0] },
        modes: vec!["ignore".into(), "clt".into()],
        replications: 4,
        seed: 5,
        scheduler: Default::default(),
        exclude_nonconverged: false,
    };
    let result = run_experiment(&spec, Execution::default()).unwrap();
    assert_eq!(result.records.len(), 2 * 2 * 4);
    assert_eq!(result.report.points.len(), 4);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    save_records(&result.records, &path).unwrap();
    assert_eq!(load_records(&path).unwrap(), result.records);
    for p in &result.report.points {
        assert!((0.0..=1.0).contains(&p.mean_outage) && p.stderr_outage >= 0.0);
    }
}
