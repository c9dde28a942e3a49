use proptest::prelude::*;

use qcl_core::analysis::{
    average_conservation, convergence_time, envelopes, limit_value_check, tcon_bound, LimitVerdict,
    AVERAGE_DRIFT_TOL,
};
use qcl_core::dynamics::{resolve_sliding, selection_velocity, ResolveContext, ResolverOptions};
use qcl_core::graphkit::{has_globally_reachable_node, unbounded_interactions_graph};
use qcl_core::scenarios::{random_connected, RandomScenarioParams, Switching};
use qcl_core::{simulate, QuantizerSpec, SelectionPolicy};

fn params() -> impl Strategy<Value = RandomScenarioParams> {
    (
        1usize..=6,
        any::<u64>(),
        0.05f64..0.8,
        prop::sample::select(vec![0.25, 0.5, 1.0, 2.0]),
        prop::bool::ANY,
        prop::sample::select(vec![
            SelectionPolicy::Sliding,
            SelectionPolicy::SequentialSlow,
        ]),
    )
        .prop_map(|(n, seed, edge_density, delta, symmetric, policy)| RandomScenarioParams {
            n,
            seed,
            edge_density,
            delta,
            x0_spread: 6.0 * delta,
            symmetric,
            policy,
            ..Default::default()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn static_runs_converge_within_bound(p in params()) {
        let c = random_connected(&p).unwrap();
        prop_assert!(has_globally_reachable_node(&unbounded_interactions_graph(&c.schedule)).is_some());
        let tr = simulate(&c).unwrap();
        let issues = tr.check_invariants(&c.schedule, 1e-9);
        prop_assert!(issues.is_empty(), "{:?}", issues);
        prop_assert!(envelopes(&tr).ok());
        let conv = convergence_time(&tr);
        prop_assert!(conv.is_some());
        let bound = tcon_bound(c.schedule.a_low(), c.schedule.a_high(), &c.x0, &c.quantizer).unwrap();
        prop_assert!(conv.unwrap().t_con <= bound);
        if p.symmetric {
            prop_assert!(average_conservation(&tr) <= AVERAGE_DRIFT_TOL);
            prop_assert_eq!(limit_value_check(&tr, &c.schedule), LimitVerdict::Pass);
        }
    }

    #[test]
    fn periodic_runs_certify(p in params(), graphs in 2usize..4, dwell in 0.1f64..1.0) {
        let p = RandomScenarioParams {
            switching: Some(Switching { graphs, dwell, vary_topology: true }),
            ..p
        };
        let c = random_connected(&p).unwrap();
        let tr = simulate(&c).unwrap();
        prop_assert!(tr.check_invariants(&c.schedule, 1e-9).is_empty());
        prop_assert!(envelopes(&tr).ok());
        prop_assert!(convergence_time(&tr).is_some());
    }

    #[test]
    fn runs_are_deterministic(p in params()) {
        let c = random_connected(&p).unwrap();
        prop_assert_eq!(simulate(&c).unwrap(), simulate(&c).unwrap());
    }

    #[test]
    fn resolved_selection_is_admissible(p in params(), snap in prop::collection::vec(prop::bool::ANY, 6)) {
        let c = random_connected(&p).unwrap();
        let q = &c.quantizer;
        // put some agents exactly on thresholds
        let x: Vec<f64> = c.x0.iter().zip(&snap).map(|(&v, &s)| {
            if s { q.next_threshold(v, 1).unwrap() } else { v }
        }).collect();
        let g = &c.schedule.segments()[0].graph;
        let sel = resolve_sliding(&x, q, g, &p.policy, &ResolveContext::default(), &ResolverOptions::default()).unwrap();
        let v = selection_velocity(&x, q, g, &sel.z).unwrap();
        for i in 0..x.len() {
            let scale = 1e-9 * (1.0 + g.out_degree(i)) * (1.0 + sel.z[i].abs());
            prop_assert!((v[i] - sel.velocity[i]).abs() <= scale);
            let (lo, hi) = q.krasovskii_set(x[i]);
            if sel.velocity[i] > 0.0 && lo < hi {
                prop_assert_eq!(sel.z[i], hi);
            }
            if sel.velocity[i] < 0.0 && lo < hi {
                prop_assert_eq!(sel.z[i], lo);
            }
        }
    }

    #[test]
    fn doubling_delta_and_state_keeps_clock(p in params()) {
        let c = random_connected(&p).unwrap();
        let mut scaled = c.clone();
        scaled.quantizer = QuantizerSpec::uniform(2.0 * p.delta).unwrap();
        scaled.x0 = c.x0.iter().map(|v| 2.0 * v).collect();
        let a = simulate(&c).unwrap();
        let b = simulate(&scaled).unwrap();
        prop_assert_eq!(a.events.len(), b.events.len());
        for (ea, eb) in a.events.iter().zip(&b.events) {
            prop_assert_eq!(ea.t, eb.t);
        }
    }
}
