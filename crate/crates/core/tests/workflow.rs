use oilchain::contracts::Trace;
use oilchain::identity::Role;
use oilchain::provenance;
use oilchain::scenario::{bundled, run_scenario, Scenario};
use oilchain::telemetry::{derive_seed, Channel, FaultSpec, SensorKind, SensorProfile};
use oilchain::workflow::{HopStatus, HopTerms, Setpoints, SupplyChain, Topology, WorkflowConfig, WorkflowError};

fn terms(oil_name: &str, price: u64, quantity: u64) -> HopTerms {
    HopTerms {
        oil_id: "101".into(),
        oil_name: oil_name.into(),
        price,
        quantity,
        setpoints: Setpoints { temperature: 22, humidity: 10, pressure: 8 },
        tolerance: 0,
        passphrase: None,
    }
}

fn settle(sc: &mut SupplyChain, hop: usize, faults: Vec<FaultSpec>) {
    let h = sc.hop(hop).unwrap().clone();
    let cred = sc.sign_acceptance(hop, h.buyer_role).unwrap();
    sc.accept_shipment(hop, &cred).unwrap();
    let channels = [SensorKind::Temperature, SensorKind::Humidity, SensorKind::Pressure]
        .into_iter()
        .map(|k| Channel::new(k, h.terms.setpoints.get(k).unwrap(), 0))
        .collect();
    let profile = SensorProfile { channels, duration: 6, faults };
    let gateway = sc.topology().gateway(h.seller_role).unwrap().address();
    let readings = profile.stream(gateway, derive_seed(1, "wf")).unwrap();
    sc.feed(hop, &readings).unwrap();
    sc.deliver(hop).unwrap();
    sc.close(hop).unwrap();
}

#[test]
fn full_custody_chain_to_consumer() {
    let topology = Topology::generate(11, &Role::ALL, 7, 2).unwrap();
    let mut sc = SupplyChain::new(topology, WorkflowConfig::default()).unwrap();
    sc.create_batch("101", 10).unwrap();
    let legs = [
        (Role::Driller, Role::Refinery, "Crude", 50, 1000),
        (Role::Refinery, Role::Storage, "Petrol", 80, 950),
        (Role::Storage, Role::Pump, "Petrol", 95, 900),
        (Role::Pump, Role::Consumer, "Petrol", 120, 40),
    ];
    let mut predecessor = None;
    for (i, (seller, buyer, name, price, qty)) in legs.into_iter().enumerate() {
        let hop = sc.initiate_hop("101", seller, buyer, terms(name, price, qty), predecessor).unwrap();
        let faults = if i == 2 {
            vec![FaultSpec { kind: SensorKind::Temperature, start: 1, end: 2, offset: 3 }]
        } else {
            vec![]
        };
        settle(&mut sc, hop, faults);
        assert_eq!(sc.hop(hop).unwrap().status, HopStatus::Settled);
        predecessor = Some(sc.hop(hop).unwrap().tracking_contract);
    }

    let dist = sc.distribution_contract("101").unwrap();
    let d = sc.runtime().state(&dist).unwrap().as_distribution().unwrap();
    assert_eq!(d.current_trace, Trace::Sold);
    assert_eq!(sc.settlements().len(), 4);
    assert_eq!(sc.settlements().iter().map(|s| s.amount).sum::<u64>(), 345);

    let report = sc.trace("101").unwrap();
    assert_eq!(report.hops.len(), 4);
    assert_eq!(report.violation_count, 2);
    let hop3 = &report.hops[2];
    assert!(hop3.violations.iter().all(|v| v.message == "Higher Temperature"));
    assert_eq!(hop3.seller_label.as_deref(), Some("storage"));
    let events: Vec<&str> = report.hops.iter().flat_map(|h| h.distribution.iter().map(|d| d.event.as_str())).collect();
    assert_eq!(events, ["InitiateDist", "FactoryDistribution", "StorageWholesale", "PumpOilSold"]);
    assert_eq!(report.hops[3].distribution[0].message, "Oil has been Sold at the Pump.");
    for c in sc.runtime().chains() {
        assert!(c.verify().valid, "{}", c.id);
    }
}

#[test]
fn too_many_faulty_validators_blocks_progress() {
    let topology = Topology::generate(3, &Role::ALL, 4, 2).unwrap();
    let mut sc = SupplyChain::new(topology, WorkflowConfig::default()).unwrap();
    let err = sc.create_batch("101", 10).unwrap_err();
    assert!(matches!(err, WorkflowError::Runtime(_)), "{err:?}");
    assert_eq!(sc.consortium().len(), 1);
    assert!(sc.batch_ids().next().is_none());
}

#[test]
fn distribution_transitions_are_ordered() {
    let topology = Topology::generate(4, &Role::ALL, 4, 0).unwrap();
    let mut sc = SupplyChain::new(topology, WorkflowConfig::default()).unwrap();
    sc.create_batch("b", 10).unwrap();
    let h1 = sc.initiate_hop("b", Role::Driller, Role::Refinery, terms("Crude", 1, 1), None).unwrap();
    let t1 = sc.hop(h1).unwrap().tracking_contract;
    let h2 = sc.initiate_hop("b", Role::Refinery, Role::Storage, terms("Petrol", 1, 1), Some(t1)).unwrap();
    for h in [h1, h2] {
        let role = sc.hop(h).unwrap().buyer_role;
        let c = sc.sign_acceptance(h, role).unwrap();
        sc.accept_shipment(h, &c).unwrap();
    }
    let err = sc.deliver(h2).unwrap_err();
    assert!(matches!(err, WorkflowError::Reverted { ref function, .. } if function == "ReadyToStorage"), "{err:?}");
    assert_eq!(sc.hop(h2).unwrap().status, HopStatus::Accepted);
    sc.deliver(h1).unwrap();
    sc.deliver(h2).unwrap();
}

#[test]
fn other_factory_branch_keeps_main_line_in_trace() {
    let scenario = Scenario::parse(bundled("other_factory_branch").unwrap()).unwrap();
    let run = run_scenario(&scenario, None, None).unwrap();
    let batch = &run.report.batches[0];
    assert_eq!(batch.hops.len(), 5);
    let branch = batch.hops.iter().find(|h| h.buyer == Role::OtherFactory).unwrap();
    let attempts: Vec<bool> = branch.accept_attempts.iter().map(|a| a.accepted).collect();
    assert_eq!(attempts, [false, false, true]);
    let consortium = run.chains.iter().find(|c| c.id == "consortium").unwrap();
    let path = provenance::custody_path(consortium, "B-7").unwrap();
    assert_eq!(path.len(), 4);
    assert!(!path.contains(&branch.tracking_contract));
    assert_eq!(run.report.settlements.len(), 5);
}
