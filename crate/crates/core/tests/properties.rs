use proptest::prelude::*;

use stagelab::embedding::{embed_safe, embed_stage};
use stagelab::generators::TermGenerator;
use stagelab::host::parse_host_program;
use stagelab::machine::{default_suite_for, execute, format_machine, obs_equiv, parse_machine, run_machine, Env, RunResult};
use stagelab::staged_source::{collapse_escapes, parse_source, pretty, SourceTerm};
use stagelab::{compile_a, compile_a_safe, typecheck, CompiledProgram, MachineCode, DEFAULT_FUEL};

fn vars() -> Vec<String> {
    vec!["x".into(), "y".into(), "z".into()]
}

fn term() -> impl Strategy<Value = SourceTerm> {
    (any::<u64>(), 1usize..=6, any::<bool>()).prop_map(|(seed, depth, break_it)| {
        let mut g = TermGenerator::new(seed, &vars());
        let t = g.well_typed(depth);
        if break_it {
            g.ill_typed(&t)
        } else {
            t
        }
    })
}

fn well_typed_term() -> impl Strategy<Value = SourceTerm> {
    (any::<u64>(), 1usize..=6).prop_map(|(seed, depth)| TermGenerator::new(seed, &vars()).well_typed(depth))
}

fn machine_code() -> impl Strategy<Value = MachineCode> {
    (any::<u64>(), 1usize..24).prop_map(|(seed, len)| TermGenerator::new(seed, &vars()).machine_code(len))
}

fn env() -> impl Strategy<Value = Env> {
    (-50i64..50, -50i64..50, -50i64..50).prop_map(|(x, y, z)| Env::new().with("x", x).with("y", y).with("z", z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn vm_is_deterministic(code in machine_code(), env in env(), fuel in 1u64..200) {
        prop_assert_eq!(execute(&code, &env, fuel), execute(&code, &env, fuel));
    }

    #[test]
    fn more_fuel_never_changes_a_finished_run(code in machine_code(), env in env(), fuel in 1u64..40, extra in 0u64..100) {
        let short = run_machine(&code, &env, fuel);
        let long = run_machine(&code, &env, fuel + extra);
        if short != RunResult::FuelExhausted {
            prop_assert_eq!(short, long);
        }
        if long == RunResult::FuelExhausted {
            prop_assert_eq!(short, RunResult::FuelExhausted);
        }
    }

    #[test]
    fn obs_equiv_is_reflexive_and_symmetric(a in term(), b in term()) {
        let ca = compile_a(&a, DEFAULT_FUEL);
        let cb = compile_a_safe(&b, DEFAULT_FUEL);
        let suite = default_suite_for(&ca, &cb);
        prop_assert!(obs_equiv(&ca, &ca, &suite, DEFAULT_FUEL));
        prop_assert_eq!(obs_equiv(&ca, &cb, &suite, DEFAULT_FUEL), obs_equiv(&cb, &ca, &suite, DEFAULT_FUEL));
    }

    #[test]
    fn source_text_round_trips(t in term()) {
        prop_assert_eq!(parse_source(&pretty(&t)).unwrap(), t);
    }

    #[test]
    fn machine_text_round_trips(code in machine_code()) {
        prop_assert_eq!(parse_machine(&format_machine(&code)).unwrap(), code);
    }

    #[test]
    fn host_text_round_trips(t in term()) {
        for p in [embed_stage(&t), embed_safe(&t)] {
            prop_assert_eq!(parse_host_program(&p.to_string()).unwrap(), p);
        }
    }

    #[test]
    fn collapsing_escapes_preserves_compilation(t in well_typed_term()) {
        let collapsed = collapse_escapes(&t, DEFAULT_FUEL).unwrap();
        prop_assert!(!collapsed.contains_escape());
        prop_assert_eq!(compile_a(&collapsed, DEFAULT_FUEL), compile_a(&t, DEFAULT_FUEL));
    }

    #[test]
    fn safe_compiler_agrees_with_plain_when_it_accepts(t in term()) {
        match compile_a_safe(&t, DEFAULT_FUEL) {
            CompiledProgram::Unsafe => prop_assert!(!typecheck(&t).is_safe()),
            out => prop_assert_eq!(out, compile_a(&t, DEFAULT_FUEL)),
        }
    }

    #[test]
    fn embeddings_are_injective(a in term(), b in term()) {
        prop_assert_eq!(embed_stage(&a) == embed_stage(&b), a == b);
        prop_assert_eq!(embed_safe(&a) == embed_safe(&b), a == b);
    }

    #[test]
    fn embedding_compiles_like_source_compiler(t in term()) {
        prop_assert_eq!(stagelab::compile_u(&embed_stage(&t), DEFAULT_FUEL), compile_a(&t, DEFAULT_FUEL));
        prop_assert_eq!(stagelab::compile_u(&embed_safe(&t), DEFAULT_FUEL), compile_a_safe(&t, DEFAULT_FUEL));
    }
}
