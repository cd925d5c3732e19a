//! Verdicts and cross-checks over the bundled programs.

mod common;

use chclin::ast::Query;
use chclin::dimension::{kdim, restrict_interpretation, Interpretation};
use chclin::driver::{check_model, confirm_cex, solve, Config, Outcome};
use chclin::linear_solver::{solve_linear, SolverConfig, SolverStatus};
use chclin::linearise::{index_bound, linearise_pe, Strategy};
use chclin::oracle::{derivable, enumerate_feasible_traces, linear_goal_derivable, Derivability, EnumBudget};
use chclin::polyhedra::{arg_dims, Polyhedron};
use std::time::Duration;

fn expected(name: &str) -> (&'static str, u32) {
    match name {
        "counter" => ("safe", 0),
        "fib" => ("safe", 2),
        "fib_bug" => ("unsafe", 2),
        "gap" => ("unknown", 0),
        "mutual" => ("safe", 1),
        "three_atoms" => ("safe", 0),
        "tree_sum" => ("safe", 1),
        "unsafe_now" => ("unsafe", 0),
        other => panic!("no expectation for {other}"),
    }
}

#[test]
fn corpus_has_the_required_shapes() {
    let corpus = common::corpus();
    assert!(corpus.len() >= 8);
    assert!(corpus.iter().any(|(_, p)| p.clauses.iter().any(|c| c.body.len() >= 3)));
    assert!(corpus.iter().any(|(_, p)| p.is_linear()));
}

#[test]
fn default_verdicts() {
    for (name, p) in common::corpus() {
        let out = solve(&p, &Config::default()).unwrap().outcome;
        assert_eq!((out.verdict(), out.k()), expected(&name), "{name}");
        match out {
            Outcome::Safe { model, .. } => assert!(check_model(&p, &model).unwrap(), "{name}"),
            Outcome::Unsafe { witness, .. } => {
                assert!(confirm_cex(&p, &witness).unwrap(), "{name}");
                // the witness is within reach of plain enumeration
                let b = EnumBudget::depth(witness.height()).unwrap();
                assert_eq!(derivable(&p, &Query::False, b).unwrap(), Derivability::Yes, "{name}");
            }
            Outcome::Unknown { .. } => {}
        }
    }
}

#[test]
fn both_loops_agree_when_both_decide() {
    for (name, p) in common::corpus() {
        let run = |reuse| {
            let cfg = Config { reuse, timeout: Some(Duration::from_secs(5)), ..Config::default() };
            solve(&p, &cfg).unwrap().outcome
        };
        let (plain, reusing) = (run(false), run(true));
        if plain.verdict() != "unknown" && reusing.verdict() != "unknown" {
            assert_eq!(plain.verdict(), reusing.verdict(), "{name}");
        }
    }
}

#[test]
fn strategies_agree_on_derivability() {
    let b = EnumBudget::depth(8).unwrap();
    for (name, p) in common::corpus() {
        for k in 0..=2 {
            let (pk, _) = kdim(&p, k).unwrap();
            let verdicts: Vec<Derivability> = [Strategy::Permute, Strategy::DimOrdered]
                .into_iter()
                .map(|s| linear_goal_derivable(&linearise_pe(&pk, index_bound(&p, k), s).unwrap(), b).unwrap())
                .collect();
            if verdicts.iter().all(|v| *v != Derivability::BudgetExhausted) {
                assert_eq!(verdicts[0], verdicts[1], "{name} k={k}");
            }
        }
    }
}

#[test]
fn linear_unsafe_paths_are_derivable() {
    for (name, p) in common::corpus() {
        for k in 0..=1 {
            let (pk, _) = kdim(&p, k).unwrap();
            let lp = linearise_pe(&pk, index_bound(&p, k), Strategy::Permute).unwrap();
            if let SolverStatus::Unsafe(path) = solve_linear(&lp.program, &SolverConfig::default()).unwrap() {
                let b = EnumBudget::depth(path.len()).unwrap();
                assert_eq!(derivable(&lp.program, &Query::False, b).unwrap(), Derivability::Yes, "{name} k={k}");
            }
        }
    }
}

#[test]
fn enumeration_is_deterministic() {
    for (_, p) in common::corpus() {
        let b = EnumBudget::depth(4).unwrap();
        let first = enumerate_feasible_traces(&p, &Query::False, b).unwrap();
        let second = enumerate_feasible_traces(&p, &Query::False, b).unwrap();
        assert_eq!(first.trees, second.trees);
    }
}

#[test]
fn restriction_is_idempotent() {
    let p = common::load("corpus/fib_bug.chc");
    let (pk, _) = kdim(&p, 2).unwrap();
    let mut s = Interpretation::new();
    for q in pk.predicates() {
        s.insert(q, vec![Polyhedron::top(arg_dims(2))]);
    }
    let traces = enumerate_feasible_traces(&pk, &pk.query, EnumBudget::depth(7).unwrap()).unwrap();
    assert!(!traces.trees.is_empty());
    for t in &traces.trees {
        let once = restrict_interpretation(&s, t, &pk).unwrap();
        assert!(once.len() < s.len());
        assert_eq!(restrict_interpretation(&once, t, &pk).unwrap(), once);
    }
}
