//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::test_runner::{Config, TestCaseError, TestRunner};

use crisisflow_core::analysis::{check_soundness, DEFAULT_STATE_SPACE_CAP};
use crisisflow_core::compile::plan_to_net;
use crisisflow_core::corpus::{builtin_plan, fixture_log, FIXTURE_CASE_1, FIXTURE_CASE_2};
use crisisflow_core::engine::{auto_simulate, SimulationPolicy};
use crisisflow_core::eventlog::{project_completions, read_csv};
use crisisflow_core::mining::{alpha_discover, degree_stats, footprint, handover_network, token_replay, Relation};
use crisisflow_core::net::{Transition, WorkflowNet};
use crisisflow_core::testing;

type Outcome = Result<(), String>;
type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn ensure(ok: bool, what: impl Into<String>) -> Outcome {
    if ok {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn traces(cases: &[&[&str]]) -> Vec<Vec<String>> {
    cases
        .iter()
        .map(|t| t.iter().map(|a| a.to_string()).collect())
        .collect()
}

fn fixture_traces() -> Vec<Vec<String>> {
    traces(&[&FIXTURE_CASE_1, &FIXTURE_CASE_2])
}

fn footprint_reproduction() -> Outcome {
    let log = fixture_traces();
    let fp = footprint(&log);
    for (a, b, want) in [
        ("T4", "T5", Relation::Parallel),
        ("T18'", "T19", Relation::Parallel),
        ("T1", "T2", Relation::Causal),
        ("T2", "T4", Relation::Unrelated),
    ] {
        ensure(fp.relation(a, b) == Some(want), format!("relation({a},{b}) = {:?}", fp.relation(a, b)))?;
    }
    // Oracle: direct succession by index scan, classified pair by pair.
    let mut df = BTreeSet::new();
    for t in &log {
        for i in 0..t.len() {
            for j in 0..t.len() {
                if j == i + 1 {
                    df.insert((t[i].as_str(), t[j].as_str()));
                }
            }
        }
    }
    let acts: BTreeSet<&str> = log.iter().flatten().map(String::as_str).collect();
    for a in &acts {
        for b in &acts {
            let want = match (df.contains(&(*a, *b)), df.contains(&(*b, *a))) {
                (true, false) => Relation::Causal,
                (false, true) => Relation::ReverseCausal,
                (true, true) => Relation::Parallel,
                (false, false) => Relation::Unrelated,
            };
            ensure(fp.relation(a, b) == Some(want), format!("oracle disagrees on ({a},{b})"))?;
        }
    }
    ensure(fp.pairs().count() == acts.len() * acts.len(), "pair count")
}

fn alpha_discovery() -> Outcome {
    let textbook = traces(&[&["a", "b", "c", "d"], &["a", "c", "b", "d"]]);
    let net = alpha_discover(&textbook).map_err(|e| e.to_string())?;
    let r = token_replay(&net, &textbook);
    ensure(r.fitness == 1.0, format!("textbook fitness {}", r.fitness))?;
    let after_a = net.fire(&net.initial_marking(), "a").map_err(|e| e.to_string())?;
    ensure(net.enabled_transitions(&after_a) == vec!["b", "c"], "b and c not both enabled after a")?;
    let after_b = net.fire(&after_a, "b").map_err(|e| e.to_string())?;
    ensure(net.enabled_transitions(&after_b) == vec!["c"], "c not enabled after b")?;

    let fixture = fixture_traces();
    let mined = alpha_discover(&fixture).map_err(|e| e.to_string())?;
    let visible = mined.visible_transitions().count();
    ensure(visible == 24, format!("{visible} visible transitions"))?;
    let fitness = token_replay(&mined, &fixture).fitness;
    ensure(fitness >= 0.8, format!("fixture fitness {fitness}"))
}

fn soundness() -> Outcome {
    let net = plan_to_net(&builtin_plan()).map_err(|e| e.to_string())?;
    let report = check_soundness(&net, DEFAULT_STATE_SPACE_CAP).map_err(|e| e.to_string())?;
    ensure(report.sound, "corpus net not sound")?;
    ensure(report.dead_transitions.is_empty(), format!("dead: {:?}", report.dead_transitions))?;
    ensure(report.state_count < 100_000, format!("{} states", report.state_count))?;

    let mut cut = net.clone();
    let feed = cut.transitions["T20"].inputs.clone();
    for t in cut.transitions.values_mut() {
        t.outputs.retain(|p| !feed.contains(p));
    }
    let broken = check_soundness(&cut, DEFAULT_STATE_SPACE_CAP).map_err(|e| e.to_string())?;
    ensure(!broken.option_to_complete, "cut net still has option to complete")
}

/// Silent transitions fired while replaying `trace` with silent moves
/// chosen by shortest path, or an error naming the first misfit.
fn silent_moves(net: &WorkflowNet, trace: &[String]) -> Result<BTreeSet<String>, String> {
    let mut fired = BTreeSet::new();
    let mut m = net.initial_marking();
    for a in trace {
        let t = net.transitions_labeled(a).next().ok_or(format!("no transition {a}"))?;
        let (path, reached) = net
            .shortest_path(&m, Transition::is_silent, |x| net.is_enabled(x, t), 100_000)
            .ok_or(format!("{a} unreachable"))?;
        fired.extend(path);
        m = net.fire(&reached, &t.id).map_err(|e| e.to_string())?;
    }
    let (path, _) = net
        .shortest_path(&m, Transition::is_silent, |x| *x == net.final_marking(), 100_000)
        .ok_or("sink unreachable")?;
    fired.extend(path);
    Ok(fired)
}

fn fixture_replay() -> Outcome {
    let net = plan_to_net(&builtin_plan()).map_err(|e| e.to_string())?;
    for (k, trace) in fixture_traces().iter().enumerate() {
        let r = token_replay(&net, std::slice::from_ref(trace));
        ensure(r.fitness == 1.0, format!("case {} fitness {}", k + 1, r.fitness))?;
    }
    let skipped = silent_moves(&net, &fixture_traces()[1])?;
    for task in ["T8'", "T9'", "T13", "T18", "T19'"] {
        ensure(skipped.contains(&format!("skip:{task}")), format!("case 2 does not skip {task}"))?;
    }
    Ok(())
}

fn handover() -> Outcome {
    let log = fixture_log();
    let g = handover_network(&log).map_err(|e| e.to_string())?;
    // Oracle: count adjacent role pairs from the task table.
    let plan = builtin_plan();
    let mut hand: BTreeMap<(String, String), u64> = BTreeMap::new();
    for t in fixture_traces() {
        for w in t.windows(2) {
            let r = |a: &str| plan.task(a).unwrap().role.clone();
            *hand.entry((r(&w[0]), r(&w[1]))).or_default() += 1;
        }
    }
    ensure(hand[&("A1".to_string(), "A2".to_string())] == 4, "oracle A1->A2 != 4")?;
    ensure(g.weight("A1", "A2") == 4, format!("A1->A2 = {}", g.weight("A1", "A2")))?;
    ensure(g.edges == hand, "sociogram differs from hand count")?;
    let degrees = degree_stats(&g, false);
    let max = degrees.values().map(|d| d.total).max().unwrap_or(0);
    let leaders: Vec<&str> = degrees
        .iter()
        .filter(|(_, d)| d.total == max)
        .map(|(a, _)| a.as_str())
        .collect();
    ensure(leaders == ["A3"], format!("maximum degree {max} held by {leaders:?}"))
}

fn simulation() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let plan = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/hcmc-tsunami.json");
    let run = |name: &str| -> Result<(PathBuf, Vec<u8>), String> {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_crisisflow"))
            .arg("simulate")
            .arg(&plan)
            .args(["--cases", "100", "--seed", "42", "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), String::from_utf8_lossy(&status.stderr).to_string())?;
        let bytes = std::fs::read(&out).map_err(|e| e.to_string())?;
        Ok((out, bytes))
    };
    let (_, first) = run("first.csv")?;
    let (_, second) = run("second.csv")?;
    ensure(first == second, "logs differ between runs")?;
    let log = read_csv(&String::from_utf8(first).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(log.traces.len() == 100, format!("{} traces", log.traces.len()))?;
    let (mut t4_first, mut t5_first) = (false, false);
    for t in project_completions(&log) {
        ensure(t.first().map(String::as_str) == Some("T1"), "trace not starting with T1")?;
        ensure(t.last().map(String::as_str) == Some("T20"), "trace not ending with T20")?;
        ensure(t.iter().any(|a| a == "T8" || a == "T8'"), "trace without T8 or T8'")?;
        let p4 = t.iter().position(|a| a == "T4").ok_or("no T4")?;
        let p5 = t.iter().position(|a| a == "T5").ok_or("no T5")?;
        t4_first |= p4 < p5;
        t5_first |= p5 < p4;
    }
    ensure(t4_first && t5_first, "only one ordering of T4 and T5")
}

fn property_suites() -> Outcome {
    let config = Config {
        cases: 128,
        failure_persistence: None,
        ..Config::default()
    };
    let fail = |name: &str, e: String| format!("{name}: {e}");

    TestRunner::new(config.clone())
        .run(&testing::traces(), |log| {
            let fp = footprint(&log);
            for (a, b, r) in fp.pairs() {
                if fp.relation(b, a) != Some(r.inverse()) {
                    return Err(TestCaseError::fail(format!("asymmetric at ({a},{b})")));
                }
            }
            Ok(())
        })
        .map_err(|e| fail("footprint symmetry", e.to_string()))?;

    TestRunner::new(config.clone())
        .run(&(testing::small_net(), proptest::collection::vec(0usize..16, 0..12)), |(net, picks)| {
            let mut m = net.initial_marking();
            for pick in picks {
                let enabled: Vec<String> = net.enabled_transitions(&m).into_iter().map(String::from).collect();
                if enabled.is_empty() {
                    break;
                }
                let t = &net.transitions[&enabled[pick % enabled.len()]];
                let next = net.fire(&m, &t.id).map_err(|e| TestCaseError::fail(e.to_string()))?;
                let mut back = next.clone();
                for p in &t.outputs {
                    back.remove(p, 1);
                }
                for p in &t.inputs {
                    back.add(p, 1);
                }
                if back != m {
                    return Err(TestCaseError::fail(format!("{} not reversible", t.id)));
                }
                m = next;
            }
            Ok(())
        })
        .map_err(|e| fail("token conservation", e.to_string()))?;

    TestRunner::new(config.clone())
        .run(&(testing::plan(), proptest::num::u64::ANY), |(plan, seed)| {
            let net = plan_to_net(&plan).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let log = auto_simulate(&plan, 3, SimulationPolicy::seeded(seed))
                .map_err(|e| TestCaseError::fail(e.to_string()))?;
            let r = token_replay(&net, &project_completions(&log));
            if r.fitness != 1.0 {
                return Err(TestCaseError::fail(format!("fitness {}", r.fitness)));
            }
            Ok(())
        })
        .map_err(|e| fail("self-generated fitness", e.to_string()))?;

    TestRunner::new(config)
        .run(&testing::log_with_resources(), |log| {
            let g = handover_network(&log).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let want: u64 = log.traces.iter().map(|t| t.events.len().saturating_sub(1) as u64).sum();
            if g.total_weight() != want {
                return Err(TestCaseError::fail(format!("{} != {want}", g.total_weight())));
            }
            Ok(())
        })
        .map_err(|e| fail("sociogram weight sum", e.to_string()))?;
    Ok(())
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("footprint reproduction", footprint_reproduction, Some(Duration::from_secs(1))),
        ("alpha discovery", alpha_discovery, Some(Duration::from_secs(5))),
        ("soundness", soundness, Some(Duration::from_secs(10))),
        ("fixture replay", fixture_replay, None),
        ("handover network", handover, None),
        ("simulation determinism and coverage", simulation, Some(Duration::from_secs(10))),
        ("property suites", property_suites, None),
    ];
    let mut failed = 0;
    for (name, check, limit) in criteria {
        let start = Instant::now();
        let mut outcome = check();
        let took = start.elapsed();
        if let (Ok(()), Some(limit)) = (&outcome, limit) {
            if took > limit {
                outcome = Err(format!("took {took:?}, limit {limit:?}"));
            }
        }
        match outcome {
            Ok(()) => println!("PASS {name} ({} ms)", took.as_millis()),
            Err(why) => {
                failed += 1;
                println!("FAIL {name} ({} ms): {why}", took.as_millis());
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
