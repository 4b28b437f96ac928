use fplap::kernel::KernelParams;
use fplap::lattice::{Axis, ExteriorRule, Grid, GridFunction, Idx, ReflectionFrame};
use fplap::operator::{reflect_function, Operator, QuadratureConfig};
use proptest::prelude::*;

const TAIL: f64 = 8.0;

#[derive(Clone, Debug)]
struct Profile {
    n: usize,
    s: f64,
    p: f64,
    bumps: Vec<(f64, [f64; 2], f64)>,
}

impl Profile {
    fn grid(&self) -> Grid {
        if self.n == 1 {
            Grid::cube(1, 1.0 / 32.0, 48).unwrap()
        } else {
            Grid::cube(2, 1.0 / 8.0, 12).unwrap()
        }
    }

    fn at(&self, x: &[f64; 3]) -> f64 {
        self.bumps
            .iter()
            .map(|(a, c, r)| {
                let mut d2 = 0.0;
                for k in 0..self.n {
                    d2 += (x[k] - c[k]).powi(2);
                }
                a * (1.0 - d2 / (r * r)).max(0.0).powi(3)
            })
            .sum()
    }

    fn function(&self, grid: &Grid) -> GridFunction {
        GridFunction::from_fn(grid.clone(), ExteriorRule::Zero, |x| self.at(x)).unwrap()
    }

    fn params(&self) -> KernelParams {
        KernelParams::new(self.n, self.s, self.p, 1.0).unwrap()
    }

    fn operator(&self) -> Operator {
        Operator::with_radius(self.params(), QuadratureConfig::default(), self.grid().h, TAIL).unwrap()
    }
}

fn profile() -> impl Strategy<Value = Profile> {
    (1usize..=2, 0.2f64..0.8, 1.5f64..4.0)
        .prop_flat_map(|(n, s, p)| {
            let bump = (-1.0f64..1.0, [-0.5f64..0.5, -0.5f64..0.5], 0.3f64..0.6);
            (Just(n), Just(s), Just(p), prop::collection::vec(bump, 1..4))
        })
        .prop_filter("inside the regime", |(n, s, p, _)| KernelParams::new(*n, *s, *p, 1.0).is_ok())
        .prop_map(|(n, s, p, bumps)| Profile { n, s, p, bumps })
}

/// Nodes inside `[-0.5, 0.5]^n`, all evaluable on both test grids.
fn probe_nodes(grid: &Grid) -> Vec<Idx> {
    grid.nodes()
        .filter(|i| grid.coord(i)[..grid.n].iter().all(|c| c.abs() <= 0.5))
        .step_by(3)
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs().max(b.abs()) + 1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn odd_in_u(pr in profile()) {
        let grid = pr.grid();
        let u = pr.function(&grid);
        let op = pr.operator();
        for x in probe_nodes(&grid) {
            prop_assert_eq!(op.value(&u.scaled(-1.0), &x).unwrap(), -op.value(&u, &x).unwrap());
        }
    }

    #[test]
    fn homogeneous_of_degree_p_minus_one(pr in profile(), alpha in 0.1f64..10.0) {
        let grid = pr.grid();
        let u = pr.function(&grid);
        let op = pr.operator();
        let scale = alpha.powf(pr.p - 1.0);
        for x in probe_nodes(&grid) {
            let a = op.value(&u.scaled(alpha), &x).unwrap();
            let b = scale * op.value(&u, &x).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * (b.abs() + 1e-12 * scale * u.max_abs().powf(pr.p - 1.0)), "{} vs {}", a, b);
        }
    }

    #[test]
    fn translation_invariant(pr in profile(), shift in -5i64..=5) {
        let grid = pr.grid();
        let u = pr.function(&grid);
        let t: Idx = [shift, if pr.n == 2 { -shift } else { 0 }, 0];
        let moved = grid.translated(&t);
        let v = GridFunction::new(moved, u.values.clone(), ExteriorRule::Zero).unwrap();
        let op = pr.operator();
        for x in probe_nodes(&grid) {
            let y = [x[0] + t[0], x[1] + t[1], 0];
            prop_assert!(rel(op.value(&u, &x).unwrap(), op.value(&v, &y).unwrap()) < 1e-13);
        }
    }

    #[test]
    fn reflection_covariant(pr in profile(), twice in -4i64..=4) {
        let grid = pr.grid();
        let u = pr.function(&grid);
        let frame = ReflectionFrame::from_half_steps(Axis::E1, twice, grid.h);
        let ul = reflect_function(&u, &frame);
        let op = pr.operator();
        // mirroring reverses the summation order along e1
        let scale = op.lattice_total() * u.max_abs().powf(pr.p - 1.0);
        for x in probe_nodes(&grid) {
            let xl = frame.reflect_idx(&x);
            let (a, b) = (op.value(&u, &x).unwrap(), op.value(&ul, &xl).unwrap());
            prop_assert!((a - b).abs() <= 1e-12 * scale, "{} vs {}", a, b);
        }
    }

    #[test]
    fn additive_when_p_is_two(a in profile(), b in profile()) {
        let n = a.n;
        let b = Profile { n, ..b };
        let a = Profile { p: 2.0, s: a.s.min(0.79), ..a };
        let grid = a.grid();
        let (ua, ub) = (a.function(&grid), b.function(&grid));
        let sum = GridFunction::new(grid.clone(), ua.values.iter().zip(&ub.values).map(|(x, y)| x + y).collect(), ExteriorRule::Zero).unwrap();
        let op = a.operator();
        let scale = op.lattice_total() * (ua.max_abs() + ub.max_abs());
        for x in probe_nodes(&grid) {
            let lhs = op.value(&sum, &x).unwrap();
            let rhs = op.value(&ua, &x).unwrap() + op.value(&ub, &x).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-13 * scale, "{} vs {}", lhs, rhs);
        }
    }

    #[test]
    fn decomposed_route_matches_direct(pr in profile(), twice in -2i64..=2) {
        let grid = pr.grid();
        let u = pr.function(&grid);
        let frame = ReflectionFrame::from_half_steps(Axis::E1, twice, grid.h);
        let op = pr.operator();
        for x in probe_nodes(&grid).into_iter().filter(|x| frame.in_sigma(x)) {
            let direct = op.difference_direct(&u, &frame, &x).unwrap();
            let split = op.difference_decomposed(&u, &frame, &x).unwrap();
            prop_assert!((split.c_times_sum - direct).abs() <= 1e-8 * (direct.abs() + 1e-14));
        }
    }

    #[test]
    fn evaluation_is_deterministic(pr in profile()) {
        let grid = pr.grid();
        let u = pr.function(&grid);
        let op = pr.operator();
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = serial.install(|| op.eval_interior(&u)).unwrap();
        let b = wide.install(|| op.eval_interior(&u)).unwrap();
        prop_assert_eq!(a, b);
    }
}
