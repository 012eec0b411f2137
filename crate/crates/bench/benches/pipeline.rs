//! Benchmarks for the hot paths: clique enumeration, delay evaluation,
//! relaying-network selection, and a small end-to-end simulation run.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use dda_core::delay::{expected_relay_delay, relay_delay_oracle, PrioritizedPdrVector};
use dda_core::relay_graph::{CandidateGraph, NodeId};
use dda_core::select::{select_relaying_network, RelayProfile, SelectConfig};
use dda_core::sim::{simulate, Scheme, SimParams, World};

fn complete_graph(m: u32) -> CandidateGraph {
    let ids: Vec<NodeId> = (0..m).map(NodeId).collect();
    let mut g = CandidateGraph::new(ids.clone()).unwrap();
    for i in 0..m as usize {
        for j in i + 1..m as usize {
            g.add_edge(ids[i], ids[j]).unwrap();
        }
    }
    g
}

fn bench_enumeration(c: &mut Criterion) {
    let k12 = complete_graph(12);
    let k16 = complete_graph(16);
    c.bench_function("enumerate_relaying_networks/K12", |b| {
        b.iter(|| black_box(&k12).enumerate_relaying_networks(2, 12).unwrap())
    });
    c.bench_function("enumerate_relaying_networks/K16", |b| {
        b.iter(|| black_box(&k16).enumerate_relaying_networks(2, 16).unwrap())
    });
}

fn bench_delay(c: &mut Criterion) {
    let pv = PrioritizedPdrVector::new(
        vec![0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2],
        45.0,
    )
    .unwrap();
    c.bench_function("expected_relay_delay/n8", |b| {
        b.iter(|| expected_relay_delay(black_box(&pv)))
    });
    c.bench_function("relay_delay_oracle/n8", |b| {
        b.iter(|| relay_delay_oracle(black_box(&pv)))
    });
}

fn bench_selection(c: &mut Criterion) {
    let graph = CandidateGraph::from_edge_list_str(
        "1 2\n1 3\n1 7\n2 3\n2 7\n3 7\n2 6\n6 7\n2 5\n4 5\n4 8\n5 8\n",
    )
    .unwrap();
    let pdrs = [0.9, 0.7, 0.8, 0.5, 0.6, 0.4, 0.85, 0.55];
    let profiles: Vec<RelayProfile> = (0..8)
        .map(|i| RelayProfile::new(NodeId(i as u32 + 1), pdrs[i], (i + 1) as f64).unwrap())
        .collect();
    let config = SelectConfig::default();
    c.bench_function("select_relaying_network/8-candidates", |b| {
        b.iter(|| {
            select_relaying_network(black_box(&graph), black_box(&profiles), 45.0, &config)
                .unwrap()
        })
    });
}

fn bench_simulation(c: &mut Criterion) {
    let params = SimParams {
        area_width_m: 800.0,
        area_height_m: 800.0,
        node_count: 60,
        cbr_flows: 10,
        sim_duration_s: 3.0,
        ..SimParams::default()
    };
    let world = World::build(params, 42).unwrap();
    for scheme in Scheme::ALL {
        c.bench_function(&format!("simulate/60-nodes-3s/{scheme}"), |b| {
            b.iter_batched(
                || world.clone(),
                |w| simulate(black_box(&w), scheme, 42).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
}

criterion_group!(
    benches,
    bench_enumeration,
    bench_delay,
    bench_selection,
    bench_simulation
);
criterion_main!(benches);
