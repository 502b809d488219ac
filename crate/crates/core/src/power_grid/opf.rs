use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::qp::{solve_qp, QpError, QpProblem};
use super::{susceptance_matrix, BusId, GridCase, GridError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Binding {
    GenMin {
        generator: usize,
    },
    GenMax {
        generator: usize,
    },
    /// Flow pinned at `fmax` in the from→to direction.
    LineForward {
        line: usize,
    },
    LineBackward {
        line: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcopfSolution {
    /// MW per generator.
    pub dispatch: Vec<f64>,
    /// Radians per bus; zero at the slack bus.
    pub theta: Vec<f64>,
    /// MW per line, positive from→to.
    pub flows: Vec<f64>,
    /// $/MWh per bus.
    pub lmp: Vec<f64>,
    /// $/h.
    pub total_cost: f64,
    pub binding: Vec<Binding>,
    /// Demand per bus including extra load, MW.
    pub demand: Vec<f64>,
    /// Multipliers of the nodal balance equalities (λ = −LMP).
    pub balance_multipliers: Vec<f64>,
    pub gen_min_multipliers: Vec<f64>,
    pub gen_max_multipliers: Vec<f64>,
    pub line_forward_multipliers: Vec<f64>,
    pub line_backward_multipliers: Vec<f64>,
}

impl DcopfSolution {
    pub fn lmp_at(&self, case: &GridCase, bus: BusId) -> Option<f64> {
        case.buses.iter().position(|b| b.id == bus).map(|i| self.lmp[i])
    }
}

/// Least-cost DC dispatch for the case with `extra_load_mw` added per bus.
///
/// Variables are generator outputs and the voltage angles of every bus but
/// the slack (fixed at zero). The nodal balance rows are equalities; generator
/// limits and both directions of every line limit are inequalities handled by
/// the active-set QP. LMPs are the negated balance multipliers.
pub fn solve_dcopf(case: &GridCase, extra_load_mw: &[f64]) -> Result<DcopfSolution, GridError> {
    let nb = case.buses.len();
    if extra_load_mw.len() != nb {
        return Err(GridError::LoadShape { got: extra_load_mw.len(), want: nb });
    }
    if extra_load_mw.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(GridError::Invalid(vec!["extra load must be finite and non-negative".into()]));
    }
    let demand: Vec<f64> = case.buses.iter().zip(extra_load_mw).map(|(b, &x)| b.base_load_mw + x).collect();
    let total_demand: f64 = demand.iter().sum();
    let pmax: f64 = case.generators.iter().map(|g| g.pmax).sum();
    let pmin: f64 = case.generators.iter().map(|g| g.pmin).sum();
    if pmax < total_demand {
        return Err(GridError::Infeasible(format!("demand {total_demand} MW exceeds total capacity {pmax} MW")));
    }
    if pmin > total_demand {
        return Err(GridError::Infeasible(format!("minimum generation {pmin} MW exceeds demand {total_demand} MW")));
    }

    let idx = case.bus_index();
    let slack = idx[&case.slack_bus];
    // angle column of each bus, None for the slack
    let theta_col: Vec<Option<usize>> = (0..nb)
        .map(|i| match i.cmp(&slack) {
            std::cmp::Ordering::Less => Some(i),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(i - 1),
        })
        .collect();
    let ng = case.generators.len();
    let nl = case.lines.len();
    let n = ng + nb - 1;

    let mut h = DMatrix::zeros(n, n);
    let mut g = DVector::zeros(n);
    for (k, gen) in case.generators.iter().enumerate() {
        h[(k, k)] = 2.0 * gen.c;
        g[k] = gen.b;
    }

    let bmat = susceptance_matrix(case);
    let mut a_eq = DMatrix::zeros(nb, n);
    for (k, gen) in case.generators.iter().enumerate() {
        a_eq[(idx[&gen.bus], k)] = 1.0;
    }
    for i in 0..nb {
        for j in 0..nb {
            if let Some(c) = theta_col[j] {
                a_eq[(i, ng + c)] = -bmat[(i, j)];
            }
        }
    }
    let b_eq = DVector::from_vec(demand.clone());

    let mi = 2 * ng + 2 * nl;
    let mut a_in = DMatrix::zeros(mi, n);
    let mut b_in = DVector::zeros(mi);
    for (k, gen) in case.generators.iter().enumerate() {
        a_in[(2 * k, k)] = -1.0;
        b_in[2 * k] = -gen.pmin;
        a_in[(2 * k + 1, k)] = 1.0;
        b_in[2 * k + 1] = gen.pmax;
    }
    for (l, line) in case.lines.iter().enumerate() {
        let (f, t) = (idx[&line.from], idx[&line.to]);
        let row = 2 * ng + 2 * l;
        for (bus, sign) in [(f, 1.0), (t, -1.0)] {
            if let Some(c) = theta_col[bus] {
                a_in[(row, ng + c)] = sign * line.susceptance;
                a_in[(row + 1, ng + c)] = -sign * line.susceptance;
            }
        }
        b_in[row] = line.fmax;
        b_in[row + 1] = line.fmax;
    }

    let sol = solve_qp(&QpProblem { h, g, a_eq, b_eq, a_in, b_in }).map_err(|e| match e {
        QpError::Infeasible { constraint } => {
            GridError::Infeasible(format!("limits cannot be met (blocking constraint {})", describe(case, constraint)))
        }
        QpError::SingularKkt { .. } => GridError::SingularKkt(e.to_string()),
        QpError::IterationLimit(_) => GridError::NoConvergence(e.to_string()),
    })?;

    let dispatch: Vec<f64> = (0..ng).map(|k| sol.x[k]).collect();
    let theta: Vec<f64> = theta_col.iter().map(|c| c.map_or(0.0, |c| sol.x[ng + c])).collect();
    let flows: Vec<f64> =
        case.lines.iter().map(|l| l.susceptance * (theta[idx[&l.from]] - theta[idx[&l.to]])).collect();
    let balance_multipliers: Vec<f64> = sol.lambda.iter().copied().collect();
    let lmp = balance_multipliers.iter().map(|l| -l).collect();
    let mut active = sol.active.clone();
    active.sort_unstable();
    let binding = active.into_iter().map(|c| binding_of(ng, c)).collect();

    Ok(DcopfSolution {
        total_cost: case.objective(&dispatch),
        dispatch,
        theta,
        flows,
        lmp,
        binding,
        demand,
        balance_multipliers,
        gen_min_multipliers: (0..ng).map(|k| sol.mu[2 * k]).collect(),
        gen_max_multipliers: (0..ng).map(|k| sol.mu[2 * k + 1]).collect(),
        line_forward_multipliers: (0..nl).map(|l| sol.mu[2 * ng + 2 * l]).collect(),
        line_backward_multipliers: (0..nl).map(|l| sol.mu[2 * ng + 2 * l + 1]).collect(),
    })
}

fn binding_of(ng: usize, c: usize) -> Binding {
    if c < 2 * ng {
        if c.is_multiple_of(2) {
            Binding::GenMin { generator: c / 2 }
        } else {
            Binding::GenMax { generator: c / 2 }
        }
    } else {
        let l = (c - 2 * ng) / 2;
        if (c - 2 * ng).is_multiple_of(2) {
            Binding::LineForward { line: l }
        } else {
            Binding::LineBackward { line: l }
        }
    }
}

fn describe(case: &GridCase, c: usize) -> String {
    match binding_of(case.generators.len(), c) {
        Binding::GenMin { generator } => format!("generator {generator} minimum"),
        Binding::GenMax { generator } => format!("generator {generator} maximum"),
        Binding::LineForward { line } | Binding::LineBackward { line } => {
            format!("line {} ({}-{}) limit", line, case.lines[line].from, case.lines[line].to)
        }
    }
}

/// Worst-case violations of the optimality conditions, recomputed from the
/// case data and the reported primal and dual values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub balance: f64,
    pub bounds: f64,
    pub dual_sign: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        [self.stationarity, self.balance, self.bounds, self.dual_sign, self.complementarity]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

pub fn kkt_residuals(case: &GridCase, sol: &DcopfSolution) -> KktResiduals {
    let idx = case.bus_index();
    let slack = idx[&case.slack_bus];
    let lam = &sol.balance_multipliers;
    let mut r = KktResiduals { stationarity: 0.0, balance: 0.0, bounds: 0.0, dual_sign: 0.0, complementarity: 0.0 };

    // d/dP_k: 2 c P + b + λ_bus − μ_min + μ_max
    for (k, gen) in case.generators.iter().enumerate() {
        let s = gen.marginal_cost(sol.dispatch[k]) + lam[idx[&gen.bus]] - sol.gen_min_multipliers[k]
            + sol.gen_max_multipliers[k];
        r.stationarity = r.stationarity.max(s.abs());
    }
    // d/dθ_j: −Σ_i λ_i B_ij + Σ_lines (μ_fwd − μ_bwd) ∂flow/∂θ_j
    let mut grad = vec![0.0; case.buses.len()];
    for (l, line) in case.lines.iter().enumerate() {
        let (f, t) = (idx[&line.from], idx[&line.to]);
        let b = line.susceptance;
        // balance rows: injection at f gains b(θf−θt), at t gains b(θt−θf)
        grad[f] -= lam[f] * b - lam[t] * b;
        grad[t] -= lam[t] * b - lam[f] * b;
        let m = sol.line_forward_multipliers[l] - sol.line_backward_multipliers[l];
        grad[f] += m * b;
        grad[t] -= m * b;
    }
    for (j, gj) in grad.iter().enumerate() {
        if j != slack {
            r.stationarity = r.stationarity.max(gj.abs());
        }
    }

    let mut injection = vec![0.0; case.buses.len()];
    for (k, gen) in case.generators.iter().enumerate() {
        injection[idx[&gen.bus]] += sol.dispatch[k];
    }
    for line in &case.lines {
        let flow = line.susceptance * (sol.theta[idx[&line.from]] - sol.theta[idx[&line.to]]);
        injection[idx[&line.from]] -= flow;
        injection[idx[&line.to]] += flow;
    }
    for (i, inj) in injection.iter().enumerate() {
        r.balance = r.balance.max((inj - sol.demand[i]).abs());
    }

    let mut check = |slack_value: f64, mu: f64| {
        r.bounds = r.bounds.max((-slack_value).max(0.0));
        r.dual_sign = r.dual_sign.max((-mu).max(0.0));
        r.complementarity = r.complementarity.max((mu * slack_value).abs());
    };
    for (k, gen) in case.generators.iter().enumerate() {
        let p = sol.dispatch[k];
        check(p - gen.pmin, sol.gen_min_multipliers[k]);
        check(gen.pmax - p, sol.gen_max_multipliers[k]);
    }
    for (l, line) in case.lines.iter().enumerate() {
        let flow = line.susceptance * (sol.theta[idx[&line.from]] - sol.theta[idx[&line.to]]);
        check(line.fmax - flow, sol.line_forward_multipliers[l]);
        check(line.fmax + flow, sol.line_backward_multipliers[l]);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::power_grid::{Bus, Generator, Line};

    fn bus(id: BusId, load: f64) -> Bus {
        Bus { id, base_load_mw: load, region: None, charging_capacity_evs: None }
    }

    fn gen(bus: BusId, b: f64, c: f64, pmin: f64, pmax: f64) -> Generator {
        Generator { bus, a: 3.0, b, c, pmin, pmax }
    }

    #[test]
    fn single_bus_calculus() {
        let case = GridCase {
            name: None,
            buses: vec![bus(1, 50.0)],
            generators: vec![gen(1, 10.0, 0.1, 0.0, 100.0)],
            lines: vec![],
            slack_bus: 1,
        };
        let s = solve_dcopf(&case, &[0.0]).unwrap();
        assert!((s.dispatch[0] - 50.0).abs() < 1e-9);
        assert!((s.total_cost - (3.0 + 500.0 + 250.0)).abs() < 1e-9);
        assert!((s.lmp[0] - 20.0).abs() < 1e-9);
    }

    fn two_bus(fmax: f64) -> GridCase {
        GridCase {
            name: None,
            buses: vec![bus(1, 0.0), bus(2, 100.0)],
            generators: vec![gen(1, 10.0, 0.01, 0.0, 200.0), gen(2, 30.0, 0.05, 0.0, 200.0)],
            lines: vec![Line { from: 1, to: 2, susceptance: 500.0, fmax }],
            slack_bus: 1,
        }
    }

    #[test]
    fn uncongested_two_bus_uniform_price() {
        let s = solve_dcopf(&two_bus(1e6), &[0.0, 0.0]).unwrap();
        // 10 + 0.02 P1 = 30 + 0.1 P2, P1 + P2 = 100  ->  P2 = 0 at the bound, so
        // the cheap unit carries everything: P1 = 100, price 12
        assert!((s.dispatch[0] - 100.0).abs() < 1e-9);
        assert!((s.lmp[0] - s.lmp[1]).abs() < 1e-6);
        assert!((s.lmp[0] - 12.0).abs() < 1e-9);
    }

    #[test]
    fn congested_two_bus_splits_prices() {
        // line caps the import at 60 MW, bus 2 covers 40 MW locally
        let s = solve_dcopf(&two_bus(60.0), &[0.0, 0.0]).unwrap();
        assert!((s.flows[0] - 60.0).abs() < 1e-9);
        assert!((s.dispatch[1] - 40.0).abs() < 1e-9);
        assert!((s.lmp[0] - (10.0 + 0.02 * 60.0)).abs() < 1e-9);
        assert!((s.lmp[1] - (30.0 + 0.1 * 40.0)).abs() < 1e-9);
        assert!(s.binding.contains(&Binding::LineForward { line: 0 }));
        assert!(kkt_residuals(&two_bus(60.0), &s).max() < 1e-8);
    }

    #[test]
    fn capacity_shortfall_is_infeasible() {
        assert!(matches!(solve_dcopf(&two_bus(1e6), &[0.0, 400.0]), Err(GridError::Infeasible(_))));
        // enough generation overall but the line cannot deliver it
        let mut c = two_bus(10.0);
        c.generators[1].pmax = 50.0;
        assert!(matches!(solve_dcopf(&c, &[0.0, 0.0]), Err(GridError::Infeasible(_))));
    }

    #[test]
    fn bundled_case_solves_cleanly() {
        let case = GridCase::bundled_ieee9();
        let s = solve_dcopf(&case, &[0.0; 9]).unwrap();
        assert!(kkt_residuals(&case, &s).max() < 1e-8);
        let total: f64 = s.dispatch.iter().sum();
        assert!((total - 610.0).abs() < 1e-8);
        assert!((s.total_cost - case.objective(&s.dispatch)).abs() < 1e-9);
        for (f, l) in s.flows.iter().zip(&case.lines) {
            assert!(f.abs() <= l.fmax + 1e-8);
        }
        assert_eq!(s.theta[0], 0.0);
    }

    #[test]
    fn load_shape_checked() {
        assert!(matches!(solve_dcopf(&two_bus(1.0), &[0.0]), Err(GridError::LoadShape { .. })));
    }
}
