use pohozaev::expr::{parse, ExprNode, SymbolSet};
use pohozaev::grid::{boundary_gradient, solve_scalar_grid, GridSolution, NewtonConfig, RectDomain};
use proptest::prelude::*;

fn expr(text: &str) -> ExprNode {
    parse(text, &SymbolSet::scalar(2)).unwrap()
}

/// Fourier series for `-Δu = 1` on `(-a, a)²`: the centre value and the
/// normal derivative at a face midpoint.
fn torsion_series(a: f64) -> (f64, f64) {
    let pi = std::f64::consts::PI;
    let (mut centre, mut slope) = (0.0, 0.0);
    for k in (1..200).step_by(2) {
        let k = k as f64;
        let sign = if (k as i64 / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let ch = (k * pi / 2.0).cosh();
        centre += sign / (k.powi(3) * ch);
        slope += 1.0 / (k * k * ch);
    }
    (a * a / 2.0 - 16.0 * a * a / pi.powi(3) * centre, a - 8.0 * a / (pi * pi) * slope)
}

fn torsion(points: usize) -> GridSolution {
    let grid = RectDomain::unit_square().mesh_points(points).unwrap();
    solve_scalar_grid(&grid, &expr("1"), &NewtonConfig::default()).unwrap()
}

#[test]
fn square_torsion_constant_by_richardson() {
    let c: Vec<f64> = [129, 257, 513].iter().map(|&n| torsion(n).center().unwrap()).collect();
    let order = ((c[1] - c[0]) / (c[2] - c[1])).log2();
    let extrapolated = c[2] + (c[2] - c[1]) / (2f64.powf(order) - 1.0);
    let (exact, _) = torsion_series(0.5);
    assert!((exact - 0.073_671_353_2).abs() < 1e-10);
    assert!((extrapolated - exact).abs() < 1e-8, "{extrapolated} vs {exact}");
}

#[test]
fn second_order_convergence_at_the_centre() {
    let c: Vec<f64> = [65, 129, 257].iter().map(|&n| torsion(n).center().unwrap()).collect();
    let order = ((c[1] - c[0]) / (c[2] - c[1])).log2();
    assert!((order - 2.0).abs() <= 0.2, "{order}");
}

#[test]
fn face_midpoint_gradient_converges() {
    let g: Vec<f64> = [65, 129, 257]
        .iter()
        .map(|&n| {
            let bg = boundary_gradient(&torsion(n));
            bg.right[(n - 1) / 2]
        })
        .collect();
    let extrapolated = g[2] + (g[2] - g[1]) / 3.0;
    let (_, exact) = torsion_series(0.5);
    assert!((extrapolated - exact).abs() < 1e-6, "{extrapolated} vs {exact}");
}

#[test]
fn dihedral_symmetry_on_the_square() {
    let grid = RectDomain::new(0.7, 0.7).unwrap().mesh(40, 40).unwrap();
    let sol = solve_scalar_grid(&grid, &expr("u^3 + 2"), &NewtonConfig::default()).unwrap();
    let n = grid.n1;
    let scale = sol.u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for j in 0..=n {
        for i in 0..=n {
            let v = sol.value(i, j);
            for w in [
                sol.value(j, i),
                sol.value(n - i, j),
                sol.value(i, n - j),
                sol.value(n - i, n - j),
                sol.value(n - j, i),
                sol.value(j, n - i),
                sol.value(n - j, n - i),
            ] {
                assert!((v - w).abs() <= 1e-10 * scale);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn maximum_principle(a in 0.2f64..2.0, b in 0.2f64..2.0, c in 0.0f64..3.0, k in 0.0f64..2.0) {
        let grid = RectDomain::new(a, b).unwrap().mesh(24, 18).unwrap();
        let f = expr(&format!("{c}*(1 + x1^2) + {k}*x2^2"));
        let sol = solve_scalar_grid(&grid, &f, &NewtonConfig::default()).unwrap();
        prop_assert!(sol.u.iter().all(|&u| u >= -1e-12));
    }
}
