mod common;

use common::{bump_oracle, gauss_kronrod};
use fplap::kernel::KernelParams;
use fplap::lattice::{ExteriorRule, Grid, GridFunction};
use fplap::operator::{Operator, QuadratureConfig};
use std::f64::consts::PI;

#[test]
fn kronrod_reference_integrals() {
    let v = gauss_kronrod(&f64::sin, 0.0, PI, 1e-13);
    assert!((v - 2.0).abs() < 1e-12, "{v}");
    let v = gauss_kronrod(&|t: f64| t.powf(-0.5), 0.0, 1.0, 1e-9);
    assert!((v - 2.0).abs() < 1e-8, "{v}");
}

#[test]
fn oracle_matches_closed_form() {
    // for C = 1 the bump is an eigenfunction with eigenvalue π / sin(πs)
    for s in [0.3, 0.5, 0.7] {
        let exact = PI / (PI * s).sin();
        for x in [0.0, 0.3, -0.55, 0.9] {
            let v = bump_oracle(x, s);
            assert!((v - exact).abs() < 1e-7 * exact, "s={s} x={x}: {v} vs {exact}");
        }
    }
}

#[test]
fn discrete_operator_within_two_percent() {
    let h = 1.0 / 128.0;
    for s in [0.3, 0.5, 0.7] {
        let params = KernelParams::new(1, s, 2.0, 1.0).unwrap();
        let grid = Grid::around_unit_ball(1, h, 8).unwrap();
        let u = GridFunction::from_fn(grid.clone(), ExteriorRule::Zero, |x| (1.0 - x[0] * x[0]).max(0.0).powf(s)).unwrap();
        let op = Operator::new(params, QuadratureConfig::default(), &grid).unwrap();
        let mut worst: f64 = 0.0;
        for i in grid.nodes() {
            let x = grid.coord(&i)[0];
            if x.abs() > 0.9 + 1e-12 {
                continue;
            }
            let v = op.value(&u, &i).unwrap();
            let o = bump_oracle(x, s);
            worst = worst.max((v - o).abs() / o.abs());
        }
        assert!(worst <= 0.02, "s={s}: {worst}");
    }
}
