use dmm_core::sat::{
    brute_force_sat, clause_type_probabilities, evaluate, generate_planted, parse_dimacs,
    serialize_dimacs, Assignment, Clause, CnfFormula, Literal,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn formula_strategy(max_vars: usize, max_clauses: usize) -> impl Strategy<Value = CnfFormula> {
    (3..=max_vars).prop_flat_map(move |n| {
        let clause = (
            prop::sample::subsequence((1..=n as u32).collect::<Vec<_>>(), 3).prop_shuffle(),
            prop::array::uniform3(any::<bool>()),
        )
            .prop_map(|(vars, neg)| {
                Clause::new([
                    Literal::new(vars[0], neg[0]),
                    Literal::new(vars[1], neg[1]),
                    Literal::new(vars[2], neg[2]),
                ])
                .unwrap()
            });
        prop::collection::vec(clause, 0..=max_clauses)
            .prop_map(move |cs| CnfFormula::new(n, cs).unwrap())
    })
}

fn random_formula(rng: &mut ChaCha8Rng, n: usize, m: usize) -> CnfFormula {
    let clauses = (0..m)
        .map(|_| {
            let vars = rand::seq::index::sample(rng, n, 3);
            let lits: Vec<Literal> = vars
                .iter()
                .map(|v| Literal::new(v as u32 + 1, rng.random()))
                .collect();
            Clause::new([lits[0], lits[1], lits[2]]).unwrap()
        })
        .collect();
    CnfFormula::new(n, clauses).unwrap()
}

proptest! {
    #[test]
    fn dimacs_round_trip(f in formula_strategy(40, 60)) {
        let back = parse_dimacs(&serialize_dimacs(&f)).unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn incidence_index_is_consistent(f in formula_strategy(40, 60)) {
        prop_assert!(f.incidence_consistent());
        let total: usize = (0..f.n_vars()).map(|n| f.degree(n)).sum();
        prop_assert_eq!(total, 3 * f.n_clauses());
        for n in 0..f.n_vars() {
            for o in f.incidence(n) {
                let lit = f.clauses()[o.clause as usize].literals()[o.slot as usize];
                prop_assert_eq!(lit.index(), n);
            }
        }
    }

    #[test]
    fn planted_assignment_satisfies(n in 3usize..200, ratio in 0.5f64..6.0, p0 in 0.0f64..=0.25, seed in any::<u64>()) {
        prop_assume!(ratio * n as f64 >= 1.0);
        let (f, plant) = generate_planted(n, ratio, p0, seed).unwrap();
        prop_assert_eq!(f.n_clauses(), (ratio * n as f64).round() as usize);
        prop_assert!(evaluate(&f, &plant).unwrap().satisfied);
    }

    #[test]
    fn generator_is_deterministic(n in 3usize..100, seed in any::<u64>()) {
        let a = serialize_dimacs(&generate_planted(n, 4.3, 0.08, seed).unwrap().0);
        let b = serialize_dimacs(&generate_planted(n, 4.3, 0.08, seed).unwrap().0);
        prop_assert_eq!(a, b);
    }
}

#[test]
fn evaluate_matches_truth_table() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for k in 0..50 {
        let n = 4 + k % 13;
        let m = rng.random_range(1..=5 * n);
        let f = random_formula(&mut rng, n, m);
        let lits: Vec<[(usize, bool); 3]> = f
            .clauses()
            .iter()
            .map(|c| c.literals().map(|l| (l.var as usize - 1, l.negated)))
            .collect();
        for bits in 0u32..(1 << n) {
            let expected = lits
                .iter()
                .filter(|c| c.iter().all(|&(v, neg)| ((bits >> v) & 1 == 1) == neg))
                .count();
            let a = Assignment((0..n).map(|i| (bits >> i) & 1 == 1).collect());
            let e = evaluate(&f, &a).unwrap();
            assert_eq!(e.unsatisfied_count, expected, "formula {k}, bits {bits:b}");
            assert_eq!(e.satisfied, expected == 0);
        }
        match brute_force_sat(&f).unwrap() {
            Some(a) => assert!(evaluate(&f, &a).unwrap().satisfied),
            None => assert!((0u32..(1 << n)).all(|bits| {
                lits.iter()
                    .any(|c| c.iter().all(|&(v, neg)| ((bits >> v) & 1 == 1) == neg))
            })),
        }
    }
}

#[test]
fn clause_types_follow_the_stated_law() {
    let (p0, n, ratio) = (0.08, 5000, 4.3);
    let (f, plant) = generate_planted(n, ratio, p0, 99).unwrap();
    let m = f.n_clauses() as f64;
    let mut counts = [0.0f64; 3];
    let mut true_literals = 0usize;
    let mut pos = vec![0i64; n];
    for c in f.clauses() {
        let falsified = c
            .literals()
            .iter()
            .filter(|l| !l.is_true(plant.values()[l.index()]))
            .count();
        counts[falsified] += 1.0;
        true_literals += 3 - falsified;
        for l in c.literals() {
            pos[l.index()] += if l.negated { -1 } else { 1 };
        }
    }
    let q = clause_type_probabilities(p0);
    assert!(
        (q[0] - 0.08).abs() < 1e-15 && (q[1] - 0.34).abs() < 1e-15 && (q[2] - 0.58).abs() < 1e-15
    );
    let mut chi2 = 0.0;
    for t in 0..3 {
        let expected = m * q[t];
        let sigma = (m * q[t] * (1.0 - q[t])).sqrt();
        assert!(
            (counts[t] - expected).abs() < 3.0 * sigma,
            "type {t}: {} vs {expected}",
            counts[t]
        );
        chi2 += (counts[t] - expected).powi(2) / expected;
    }
    // chi-square, 2 degrees of freedom, p = 0.001
    assert!(chi2 < 13.8155, "chi2 = {chi2}");

    // unbiased plant: each literal is true with probability 1/2
    let lits = 3.0 * m;
    assert!((true_literals as f64 - lits / 2.0).abs() < 3.0 * (lits / 4.0).sqrt());
    // signs carry no information about the plant: the polarity balance of
    // a variable does not correlate with its planted value
    let agree: i64 = pos
        .iter()
        .zip(plant.values())
        .map(|(&p, &v)| if v { p } else { -p })
        .sum();
    assert!(
        (agree as f64).abs() < 3.0 * lits.sqrt(),
        "agreement {agree}"
    );
}
