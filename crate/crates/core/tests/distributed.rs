//! Wall-clock integration: real workers over loopback TCP, from discovery
//! through scoring to dispatch and merge.

use std::net::UdpSocket;
use std::time::Duration;

use offkit::domain::{ExecutionMode, NodeClass, NodeId, NodeProfile, SearchTask};
use offkit::harness::generate_corpus;
use offkit::net::{
    discover, NodeAddress, Registry, RegistryEntry, RegistrySource, RemoteRunner, Worker,
    WorkerConfig,
};
use offkit::orchestrator::{execute, OrchestratorConfig};
use offkit::profiler::{profile_node, BenchmarkSuite, StaticContext};
use offkit::workload::kmp_search;

fn worker_context(id: &str) -> StaticContext {
    StaticContext {
        node_id: NodeId::new(id),
        class: NodeClass::Cloudlet,
        cpu_clock_ghz: 2.5,
        cpu_cores: 4,
        memory_gb: 16.0,
        battery_level_pct: None,
        charging: None,
    }
}

fn spawn_worker(id: &str, gflops: f64) -> String {
    let config = WorkerConfig {
        listen: "127.0.0.1:0".into(),
        context: worker_context(id),
        benchmark_gflops: gflops,
        beacon_target: None,
    };
    Worker::spawn(config).unwrap().to_string()
}

fn entry(id: &str, addr: String, profile: Option<NodeProfile>) -> RegistryEntry {
    RegistryEntry {
        node_id: NodeId::new(id),
        address: NodeAddress::Socket(addr),
        class: NodeClass::Cloudlet,
        link: None,
        profile,
    }
}

#[test]
fn full_offload_round_trip_over_tcp() {
    let addr = spawn_worker("w1", 2.56);
    let registry = Registry::from_entries(vec![entry("w1", addr, None)]).unwrap();
    let text = generate_corpus(5_000, 11);
    let pattern = b"ab".to_vec();
    let task = SearchTask::new("t", text.clone(), pattern.clone());
    let outcome = execute(
        &task,
        &ExecutionMode::FullOffload { target: NodeId::new("w1") },
        &registry,
        &OrchestratorConfig::default(),
        100.0,
    )
    .unwrap();
    assert_eq!(outcome.matches, kmp_search(&text, &pattern).unwrap());
    let rec = outcome.report.records.iter().find(|r| r.node_id.as_str() == "w1").unwrap();
    assert!(rec.bytes_sent as usize > text.len(), "frame overhead rides on top of the chunk");
    assert!(!rec.timed_out);
}

#[test]
fn partial_equal_splits_between_local_and_workers() {
    let a = spawn_worker("wa", 2.0);
    let b = spawn_worker("wb", 3.0);
    let registry =
        Registry::from_entries(vec![entry("wa", a, None), entry("wb", b, None)]).unwrap();
    let text = generate_corpus(20_000, 5);
    let pattern = b"th".to_vec();
    let task = SearchTask::new("t", text.clone(), pattern.clone());
    let outcome =
        execute(&task, &ExecutionMode::PartialEqual, &registry, &OrchestratorConfig::default(), 100.0)
            .unwrap();
    assert_eq!(outcome.matches, kmp_search(&text, &pattern).unwrap());
    let plan = outcome.report.plan.as_ref().unwrap();
    assert_eq!(plan.shares.len(), 3);
    for share in plan.shares.values() {
        assert!((share - 100.0 / 3.0).abs() < 1e-9);
    }
}

#[test]
fn engine_mode_profiles_workers_live() {
    // No stored profiles: the orchestrator must fetch them and probe RTT.
    let addr = spawn_worker("w1", 2.56);
    let registry = Registry::from_entries(vec![entry("w1", addr, None)]).unwrap();
    let text = generate_corpus(10_000, 3);
    let pattern = b"qa".to_vec();
    let task = SearchTask::new("t", text.clone(), pattern.clone());
    let cfg = OrchestratorConfig {
        local_node_id: Some(NodeId::new("offloader")),
        local_profile: Some(NodeProfile::mobile("offloader", 1.09, 1.3, 2, 1.0, 100.0, false)),
        ..OrchestratorConfig::default()
    };
    let outcome = execute(
        &task,
        &ExecutionMode::PartialEngineSingleSite { target: NodeId::new("w1") },
        &registry,
        &cfg,
        100.0,
    )
    .unwrap();
    assert_eq!(outcome.matches, kmp_search(&text, &pattern).unwrap());
    let plan = outcome.report.plan.as_ref().unwrap();
    assert!((plan.total_pct() - 100.0).abs() < 1e-9);
    // The worker advertises a much higher score than the offloader, so it
    // takes the larger share.
    assert!(plan.shares[&NodeId::new("w1")] > plan.shares[&NodeId::new("offloader")]);
}

#[test]
fn two_phase_profile_over_the_wire() {
    let addr = spawn_worker("w1", 0.0);
    let runner = RemoteRunner::connect(&addr, Duration::from_secs(5)).unwrap();
    let profile = profile_node(
        &worker_context("w1"),
        &runner,
        &BenchmarkSuite::fast(),
        Duration::from_secs(30),
    )
    .unwrap();
    // Phase 2 ran real workloads on the worker.
    assert!(profile.benchmark_gflops > 0.0);
    assert_eq!(profile.cpu_cores, 4);
}

#[test]
fn beacon_discovery_feeds_execution() {
    let beacon_port = UdpSocket::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let config = WorkerConfig {
        listen: "127.0.0.1:0".into(),
        context: worker_context("beaconed"),
        benchmark_gflops: 2.56,
        beacon_target: Some(format!("127.0.0.1:{beacon_port}")),
    };
    let worker = Worker::bind(config).unwrap();
    let service_port = worker.local_addr().unwrap().port();
    std::thread::spawn(move || {
        let _ = worker.run();
    });

    let registry = discover(&RegistrySource::Beacons {
        listen_port: beacon_port,
        window: Duration::from_secs(2),
    })
    .unwrap();
    let entry = registry.get(&NodeId::new("beaconed")).expect("beacon collected");
    assert_eq!(entry.address, NodeAddress::Socket(format!("127.0.0.1:{service_port}")));

    let text = generate_corpus(2_000, 8);
    let pattern = b"xy".to_vec();
    let task = SearchTask::new("t", text.clone(), pattern.clone());
    let outcome = execute(
        &task,
        &ExecutionMode::FullOffload { target: NodeId::new("beaconed") },
        &registry,
        &OrchestratorConfig::default(),
        100.0,
    )
    .unwrap();
    assert_eq!(outcome.matches, kmp_search(&text, &pattern).unwrap());
}
