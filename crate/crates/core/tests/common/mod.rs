#![allow(dead_code)]

use std::sync::Arc;

use cislunar_core::broadcastnet::{BroadcastConfig, BroadcastSetup, Link, Node, Role, Topology};
use cislunar_core::clockmodels::ClockModel;
use cislunar_core::relkinematics::{EphemerisConfig, Worldline};
use cislunar_core::truth::{ClockSpec, TruthTable};

pub fn clock(id: &str, role: Role, worldline: Worldline, model: ClockModel) -> ClockSpec {
    ClockSpec {
        id: id.into(),
        role,
        worldline,
        model,
    }
}

pub fn noisy(seed: u64, white: f64, frequency_offset: f64) -> ClockModel {
    ClockModel {
        frequency_offset,
        white_fm_sigma: white,
        rw_fm_sigma: 1e-17,
        seed,
        ..ClockModel::default()
    }
}

pub fn moon(latitude: f64, longitude: f64, mascon_anomaly: f64) -> Worldline {
    Worldline::MoonSurface {
        latitude,
        longitude,
        mascon_anomaly,
    }
}

/// Three polar lunar authorities, an Earth station, a lunar rover and a
/// low lunar orbiter, with day-scale outages on the station link.
pub fn lunar_network(days: f64, cadence: f64, sample_step: f64) -> BroadcastSetup {
    let clocks = vec![
        clock("lunar-1", Role::Authority, moon(-89.5, 0.0, 0.0), noisy(1, 1e-13, 0.0)),
        clock(
            "lunar-2",
            Role::Authority,
            moon(-89.0, 120.0, 0.0),
            noisy(2, 1e-13, 0.0),
        ),
        clock(
            "lunar-3",
            Role::Authority,
            moon(-88.5, 240.0, 0.0),
            noisy(3, 1e-13, 0.0),
        ),
        clock(
            "earth-station",
            Role::Dependent,
            Worldline::EarthSurface {
                latitude: 0.0,
                longitude: 0.0,
            },
            noisy(4, 1e-13, 1e-11),
        ),
        clock(
            "rover",
            Role::Dependent,
            moon(-85.0, 45.0, -1500.0),
            noisy(5, 1e-13, -4e-12),
        ),
        clock(
            "orbiter",
            Role::Dependent,
            Worldline::MoonOrbit { radius: 1.8374e6 },
            noisy(6, 1e-13, 0.0),
        ),
    ];
    let nodes = clocks
        .iter()
        .map(|c| Node {
            id: c.id.clone(),
            role: c.role,
        })
        .collect();
    let mut earth = Link::new("lunar-1", "earth-station", 1.28);
    earth.disruption_windows = vec![(21_600.0, 43_200.0), (64_800.0, 86_400.0)];
    // The rover sits in a crater that hides it from every node twice a day.
    let crater = vec![(10_800.0, 32_400.0), (54_000.0, 75_600.0)];
    let mut rover = Link::new("lunar-2", "rover", 0.005);
    rover.loss_probability = 0.2;
    rover.disruption_windows = crater.clone();
    let mut orbiter = Link::new("lunar-3", "orbiter", 0.01);
    orbiter.disruption_windows = vec![(3_000.0, 6_000.0), (40_000.0, 50_000.0)];
    let mut relay = Link::new("rover", "orbiter", 0.006);
    relay.disruption_windows = crater;
    let topology = Topology::new(nodes, vec![earth, rover, orbiter, relay]).unwrap();
    let step = cadence.min(sample_step);
    let truth = TruthTable::build(
        &EphemerisConfig::default(),
        clocks,
        days * 86_400.0,
        step,
        step.min(600.0),
        0.4,
    )
    .unwrap();
    let config = BroadcastConfig {
        cadence,
        sample_step,
        ..BroadcastConfig::default()
    };
    BroadcastSetup::new(Arc::new(truth), topology, config, 42).unwrap()
}
