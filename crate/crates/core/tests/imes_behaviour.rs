//! Behaviour of the distributed protocol: imitation flow, feasibility along
//! the trace, replay and budget reporting.

use relay_game::channel::CapacityParams;
use relay_game::config::ScenarioConfig;
use relay_game::imes::{
    attachment_counts, dao_round, run_imes, ImesScenario, LinkFactors, MmdAgent, OmdAgent, TraceStatus, UtilityModel,
};
use relay_game::mmd_game::MmdParams;

const LINK: LinkFactors = LinkFactors { tau: 1.1634, b: 1.125 };

/// Mean number of OMDs that move to the cheaper MMD in one imitation round,
/// starting from an even split of 40 members.
fn mean_first_round_flow(gap: f64, runs: u64) -> f64 {
    let cap = CapacityParams::default();
    let mmds = [
        MmdAgent::new(&MmdParams::new(20.0, 0.5, 1.0).unwrap(), 0.0, 0.0, 1.0),
        MmdAgent::new(&MmdParams::new(20.0, 0.5, 1.0 + gap).unwrap(), 0.0, 0.0, 1.0),
    ];
    let mut total = 0.0;
    for run in 0..runs {
        let mut agents: Vec<OmdAgent> = (0..40)
            .map(|k| {
                let mut a = OmdAgent::new(0, vec![Some(LINK), Some(LINK)], run * 1000 + k);
                a.current_mmd = Some((k % 2) as usize);
                a
            })
            .collect();
        dao_round(&mut agents, &mmds, UtilityModel::ModifiedLog, &cap, 1e-6);
        total += attachment_counts(&agents, 2)[0] as f64 - 20.0;
    }
    total / runs as f64
}

#[test]
fn imitation_flows_toward_the_cheaper_mmd() {
    let flows: Vec<f64> = [0.5, 1.0, 2.0].iter().map(|&gap| mean_first_round_flow(gap, 1000)).collect();
    assert!(flows[0] > 0.0, "no flow toward the cheaper MMD: {flows:?}");
    assert!(flows.windows(2).all(|w| w[1] > w[0]), "flow not monotone in the price gap: {flows:?}");
}

#[test]
fn trace_stays_feasible_and_within_budget() {
    let cfg = ScenarioConfig::default();
    let imes = cfg.imes_config();
    let trace = run_imes(&imes, &cfg.imes_scenario().unwrap()).unwrap();
    assert_eq!(trace.status, TraceStatus::Converged);
    let n: usize = cfg.group_sizes().iter().sum();
    for r in &trace.rounds {
        assert_eq!(r.mmds.len(), 2, "one update per MMD per round");
        assert!(r.inner_rounds <= imes.waiting_rounds);
        for m in &r.mmds {
            assert!((0.0..=50.0).contains(&m.omega) && m.price >= 0.0, "infeasible strategy {m:?}");
        }
        assert_eq!(r.mmds.iter().map(|m| m.attached).sum::<usize>(), n);
        assert_eq!(r.group_counts.iter().flatten().sum::<usize>(), n);
    }
    assert!(trace.final_attachment.iter().all(|a| a.is_some()));
}

#[test]
fn trace_replays_byte_for_byte() {
    let cfg = ScenarioConfig::default();
    let scenario = cfg.imes_scenario().unwrap();
    let a = run_imes(&cfg.imes_config(), &scenario).unwrap().to_csv_string();
    let b = run_imes(&cfg.imes_config(), &scenario).unwrap().to_csv_string();
    assert_eq!(a, b);
}

#[test]
fn single_mmd_single_group_is_deterministic() {
    let scenario = ImesScenario::from_groups(
        vec!["a".into()],
        &[10],
        vec![vec![LINK]],
        vec![MmdParams::new(20.0, 0.5, 1.0).unwrap()],
        CapacityParams::default(),
    )
    .unwrap();
    let mut imes = ScenarioConfig::default().imes_config();
    imes.max_rounds = 50;
    let first = run_imes(&imes, &scenario).unwrap();
    let second = run_imes(&imes, &scenario).unwrap();
    assert_eq!(first.to_csv_string(), second.to_csv_string());
    for r in &first.rounds {
        assert_eq!(r.mmds[0].attached, 10);
        assert!(r.mmds[0].omega >= 0.0 && r.mmds[0].omega <= 50.0 && r.mmds[0].price >= 0.0);
    }
}

#[test]
fn exhausted_budget_is_flagged_not_raised() {
    let cfg = ScenarioConfig::default();
    let mut imes = cfg.imes_config();
    imes.max_rounds = 2;
    let trace = run_imes(&imes, &cfg.imes_scenario().unwrap()).unwrap();
    assert_eq!(trace.status, TraceStatus::BudgetExhausted);
    assert_eq!(trace.rounds.len(), 2);
}
