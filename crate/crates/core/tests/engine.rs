use std::collections::BTreeMap;

use arw_core::chains::{build_ball, build_interval, BaseChain};
use arw_core::engine::{execute, stabilize, stabilize_idla, verify_abelian};
use arw_core::experiments::random_instance;
use arw_core::seeds::{self, Lane};
use arw_core::stats::EmpiricalLaw;
use arw_core::{exact, par_map, Configuration, FiringPolicy, Instruction, InstructionTape, Odometer, Rate, SiteState, SleepRates, VertexId};
use proptest::prelude::*;
use rand::RngExt;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn random_config(n: usize, particles: usize, seed: u64) -> Configuration {
    let mut rng = seeds::rng(seed);
    let mut c = Configuration::empty(n);
    for _ in 0..particles {
        c.add_particle(VertexId(rng.random_range(0..n) as u32));
    }
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn every_policy_gives_the_same_result(seed in any::<u64>()) {
        let (chain, rates, config) = random_instance(8, seed);
        let tape = InstructionTape::new(&chain, &rates, seeds::derive(seed, 0, Lane::Instructions));
        for p in FiringPolicy::ALL {
            prop_assert!(verify_abelian(&config, &tape, FiringPolicy::LowestIndex, p).unwrap());
        }
    }

    #[test]
    fn particles_are_conserved(seed in any::<u64>()) {
        let (chain, rates, config) = random_instance(8, seed);
        let tape = InstructionTape::new(&chain, &rates, seed);
        let arw = stabilize(&config, &mut tape.rewound(), FiringPolicy::Fifo).unwrap();
        prop_assert!(arw.config.is_sleeping());
        prop_assert_eq!(arw.config.total_particles() + arw.absorbed, config.total_particles());
        let idla = stabilize_idla(&config, &mut tape.rewound()).unwrap();
        prop_assert!(idla.config.sites().iter().all(|s| s.particles() <= 1));
        prop_assert_eq!(idla.config.total_particles() + idla.absorbed, config.total_particles());
    }

    #[test]
    fn truncated_odometer_is_below_complete(seed in any::<u64>(), frac in 0.0f64..=1.0) {
        let (chain, rates, config) = random_instance(8, seed);
        let tape = InstructionTape::new(&chain, &rates, seed);
        let complete = stabilize(&config, &mut tape.rewound(), FiringPolicy::LowestIndex).unwrap().odometer;
        let cut = (complete.total() as f64 * frac) as u64;
        let mut partial = config.clone();
        let mut t = tape.rewound();
        execute(&mut partial, &mut t, FiringPolicy::HighestIndex, cut);
        prop_assert!(t.consumed().le(&complete));
    }

    #[test]
    fn stabilizing_in_two_batches(seed in any::<u64>()) {
        let (chain, rates, phi1) = random_instance(8, seed);
        let n = chain.num_vertices();
        let phi2 = random_config(n, n, seeds::derive(seed, 1, Lane::Auxiliary));
        let tape = InstructionTape::new(&chain, &rates, seed);
        let whole = stabilize(&phi1.plus(&phi2), &mut tape.rewound(), FiringPolicy::Fifo).unwrap();
        let first = stabilize(&phi1, &mut tape.rewound(), FiringPolicy::SingleParticle).unwrap();
        let rest = stabilize(&first.config.plus(&phi2), &mut tape.fork(&first.odometer), FiringPolicy::HighestIndex).unwrap();
        prop_assert_eq!(&rest.config, &whole.config);
        prop_assert_eq!(&first.odometer + &rest.odometer, whole.odometer);
    }

    #[test]
    fn idla_first_then_arw(seed in any::<u64>()) {
        let (chain, rates, phi) = random_instance(8, seed);
        let tape = InstructionTape::new(&chain, &rates, seed);
        let direct = stabilize(&phi, &mut tape.rewound(), FiringPolicy::Fifo).unwrap();
        let idla = stabilize_idla(&phi, &mut tape.rewound()).unwrap();
        let rest = stabilize(&idla.config, &mut tape.fork(&idla.odometer), FiringPolicy::LowestIndex).unwrap();
        prop_assert_eq!(&rest.config, &direct.config);
        prop_assert_eq!(&idla.odometer + &rest.odometer, direct.odometer);
    }

    #[test]
    fn same_seed_same_output(seed in any::<u64>()) {
        let (chain, rates, config) = random_instance(8, seed);
        let a = stabilize(&config, &mut InstructionTape::new(&chain, &rates, seed), FiringPolicy::Fifo).unwrap();
        let b = stabilize(&config, &mut InstructionTape::new(&chain, &rates, seed), FiringPolicy::Fifo).unwrap();
        prop_assert_eq!(a.config, b.config);
        prop_assert_eq!(a.odometer, b.odometer);
    }

    #[test]
    fn fork_reads_shifted_instructions(seed in any::<u64>(), shift in proptest::collection::vec(0u64..50, 7)) {
        let chain = build_interval(3).unwrap();
        let rates = SleepRates::from_values(&[0.0, 0.5, 1.0, 3.0, f64::INFINITY]).unwrap();
        let mut base = InstructionTape::new(&chain, &rates, seed);
        let offset = Odometer::from_counts(shift[..5].to_vec());
        let mut fork = base.fork(&offset);
        for v in 0..5u32 {
            for n in 0..40 {
                prop_assert_eq!(fork.next(VertexId(v)), base.peek(VertexId(v), n + shift[v as usize]));
            }
        }
    }
}

#[test]
fn policies_agree_on_interval_example() {
    let chain = build_interval(3).unwrap();
    let rates = SleepRates::constant(5, Rate::new(1.0).unwrap());
    let config = Configuration::empty(5).with_particles([VertexId(2); 4]);
    for seed in 0..50 {
        let tape = InstructionTape::new(&chain, &rates, seed);
        assert!(verify_abelian(&config, &tape, FiringPolicy::LowestIndex, FiringPolicy::HighestIndex).unwrap());
    }
}

#[test]
fn thousand_random_instances_are_abelian() {
    let ok = par_map(1000, |i| {
        let (chain, rates, config) = random_instance(8, seeds::derive(99, i, Lane::Initial));
        let tape = InstructionTape::new(&chain, &rates, i);
        verify_abelian(&config, &tape, FiringPolicy::Fifo, FiringPolicy::SingleParticle).unwrap()
    });
    assert!(ok.iter().all(|&b| b));
}

/// Chi-square test of instruction frequencies on a forked tape against the
/// one-instruction law: Sleep w.p. q, Step(w) w.p. P(v, w)(1 - q).
#[test]
fn forked_instructions_have_the_right_law() {
    let chain = build_ball(2, 3.0).unwrap();
    let lambda = 0.7;
    let rates = SleepRates::constant(chain.num_vertices(), Rate::new(lambda).unwrap());
    let q = lambda / (1.0 + lambda);
    let v = chain.center().unwrap();
    let mut expected: BTreeMap<Option<VertexId>, f64> = BTreeMap::from([(None, q)]);
    for e in chain.edges(v) {
        *expected.entry(Some(e.target)).or_default() += (1.0 - q) * e.weight as f64 / chain.denominator(v) as f64;
    }
    let draws = 100_000u64;
    let mut offset = vec![0; chain.num_vertices()];
    offset[v.index()] = 12_345;
    let mut tape = InstructionTape::new(&chain, &rates, 4).fork(&Odometer::from_counts(offset));
    let mut observed: BTreeMap<Option<VertexId>, u64> = BTreeMap::new();
    for _ in 0..draws {
        let key = match tape.next(v) {
            Instruction::Sleep => None,
            Instruction::Step(w) => Some(w),
        };
        *observed.entry(key).or_default() += 1;
    }
    assert!(observed.keys().all(|k| expected.contains_key(k)));
    let stat: f64 = expected
        .iter()
        .map(|(k, p)| {
            let e = p * draws as f64;
            let o = *observed.get(k).unwrap_or(&0) as f64;
            (o - e).powi(2) / e
        })
        .sum();
    let critical = ChiSquared::new((expected.len() - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(stat < critical, "chi-square {stat} above {critical}");
}

/// Final-configuration law on the quenched tape (no-op sleeps at crowded
/// sites) against exact enumeration of the two-case dynamics.
#[test]
fn quenched_law_matches_two_case_law() {
    let cases: Vec<(BaseChain, SleepRates, Configuration)> = vec![
        (
            build_interval(2).unwrap(),
            SleepRates::constant(3, Rate::new(1.0).unwrap()),
            Configuration::empty(3).with_particles([VertexId(1); 3]),
        ),
        (
            build_interval(2).unwrap(),
            SleepRates::from_values(&[0.3, 2.0, f64::INFINITY]).unwrap(),
            Configuration::ones(3),
        ),
        (
            build_interval(3).unwrap(),
            SleepRates::constant(5, Rate::new(0.5).unwrap()),
            Configuration::empty(5).with_particles([VertexId(0), VertexId(2), VertexId(2), VertexId(4)]),
        ),
        {
            let (chain, _, _) = random_instance(4, 17);
            let n = chain.num_vertices();
            (chain, SleepRates::constant(n, Rate::new(3.0).unwrap()), Configuration::ones(n))
        },
    ];
    let samples = 100_000u64;
    for (chain, rates, start) in &cases {
        let exact = exact::stabilization_law(chain, rates, start).unwrap();
        let law: EmpiricalLaw = par_map(samples, |i| {
            let mut tape = InstructionTape::new(chain, rates, seeds::derive(5, i, Lane::Instructions));
            stabilize(start, &mut tape, FiringPolicy::Fifo).unwrap().config.sleep_mask()
        })
        .into_iter()
        .collect();
        let bound = 2.0 * (exact.len() as f64 / (2.0 * samples as f64)).sqrt();
        let tv = law.tv_to(&exact);
        assert!(tv <= bound, "{}: TV {tv} above {bound}", chain.label());
    }
}

#[test]
fn sleeping_input_is_a_fixed_point() {
    let chain = build_ball(2, 2.5).unwrap();
    let n = chain.num_vertices();
    let rates = SleepRates::constant(n, Rate::new(1.0).unwrap());
    let config = Configuration::from_sites((0..n).map(|i| if i % 3 == 0 { SiteState::Sleeping } else { SiteState::Empty }).collect());
    let out = stabilize(&config, &mut InstructionTape::new(&chain, &rates, 1), FiringPolicy::Fifo).unwrap();
    assert_eq!(out.config, config);
    assert!(out.odometer.is_zero());
}
