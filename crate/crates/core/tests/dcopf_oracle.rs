mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{grid_search_three_bus, random_three_bus, three_bus_flows};
use gridlink::power_grid::{kkt_residuals, solve_dcopf, GridCase, GridError};

/// Objective gap the 0.01 MW grid may leave: step times the steepest
/// marginal-cost difference over the generator ranges.
fn grid_slack(case: &GridCase) -> f64 {
    let mc = |i: usize| {
        let g = &case.generators[i];
        g.b + 2.0 * g.c * g.pmax
    };
    0.01 * (mc(0) + mc(1)) + 1e-9
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn three_bus_matches_grid_search(seed in any::<u64>()) {
        let case = random_three_bus(&mut ChaCha8Rng::seed_from_u64(seed));
        let brute = grid_search_three_bus(&case);
        let sol = solve_dcopf(&case, &[0.0; 3]);
        match (sol, brute) {
            (Ok(sol), Some((best, _))) => {
                prop_assert!(sol.total_cost <= best + 1e-7, "solver {} above grid optimum {}", sol.total_cost, best);
                prop_assert!(best - sol.total_cost <= grid_slack(&case));
                prop_assert!(kkt_residuals(&case, &sol).max() <= 1e-8);
                let flows = three_bus_flows(&case, sol.dispatch[0], sol.dispatch[1]);
                for (a, b) in flows.iter().zip(&sol.flows) {
                    prop_assert!((a - b).abs() <= 1e-7);
                }
            }
            (Err(GridError::Infeasible(_)), None) => {}
            // a feasible sliver narrower than the grid step
            (Ok(_), None) => {}
            (sol, brute) => prop_assert!(false, "solver {:?} vs grid {:?}", sol.map(|s| s.total_cost), brute),
        }
    }

    #[test]
    fn lmp_is_the_marginal_cost_of_load(seed in any::<u64>(), bus in 0usize..3) {
        let case = random_three_bus(&mut ChaCha8Rng::seed_from_u64(seed));
        let Ok(sol) = solve_dcopf(&case, &[0.0; 3]) else { return Ok(()) };
        let h = 1e-3;
        let mut up = [0.0; 3];
        up[bus] = 2.0 * h;
        let mut mid = [0.0; 3];
        mid[bus] = h;
        // shift the base so the lower probe also uses a non-negative extra load
        let (Ok(lo), Ok(c), Ok(hi)) = (solve_dcopf(&case, &[0.0; 3]), solve_dcopf(&case, &mid), solve_dcopf(&case, &up)) else {
            return Ok(());
        };
        prop_assume!(lo.binding == c.binding && c.binding == hi.binding);
        let fd = (hi.total_cost - lo.total_cost) / (2.0 * h);
        prop_assert!((fd - c.lmp[bus]).abs() <= 1e-3 * c.lmp[bus].abs().max(1.0), "fd {} lmp {}", fd, c.lmp[bus]);
        let _ = sol;
    }
}

#[test]
fn uncongested_case_has_one_price() {
    let mut case = GridCase::bundled_ieee9();
    for l in &mut case.lines {
        l.fmax = 1e6;
    }
    for extra in [0.0, 10.0, 20.0] {
        let sol = solve_dcopf(&case, &[extra; 9]).unwrap();
        let (lo, hi) = sol.lmp.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
        assert!(hi - lo <= 1e-6, "spread {}", hi - lo);
    }
}

#[test]
fn bundled_case_satisfies_kkt_under_load() {
    let case = GridCase::bundled_ieee9();
    for extra in [0.0, 5.0, 10.0, 15.0] {
        let sol = solve_dcopf(&case, &[extra; 9]).unwrap();
        assert!(kkt_residuals(&case, &sol).max() <= 1e-8);
        let demand: f64 = sol.demand.iter().sum();
        assert!((sol.dispatch.iter().sum::<f64>() - demand).abs() <= 1e-8);
    }
}
