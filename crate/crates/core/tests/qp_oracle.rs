mod common;

use common::qp_oracle::{brute_force_qp, random_problem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ritcbf::controller::{kkt_residual, solve_qp};
use ritcbf::Error;

#[test]
fn solver_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (mut feasible, mut infeasible) = (0, 0);
    for _ in 0..1500 {
        let p = random_problem(&mut rng);
        let oracle = brute_force_qp(&p);
        match (solve_qp(&p), oracle) {
            (Ok(sol), Some(x)) => {
                feasible += 1;
                assert!((&sol.u - &x).amax() <= 1e-8, "{p:?}\n{:?}\n{x:?}", sol.u);
                assert!(
                    kkt_residual(&p, &sol) <= 1e-10,
                    "{p:?} {sol:?} res {}",
                    kkt_residual(&p, &sol)
                );
            }
            (Err(Error::QpInfeasible), None) => infeasible += 1,
            (got, want) => panic!("{p:?}\nsolver {got:?}\noracle {want:?}"),
        }
    }
    assert!(feasible > 100 && infeasible > 20, "{feasible} {infeasible}");
}
