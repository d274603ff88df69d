//! The residual terms evaluated on the finite-difference reference field.
//!
//! Derivatives come from second-order differences on the recorded lattice,
//! one-sided at layer ends and at the first and last rows. With balance
//! coefficients near their calibrated values every term stays below 1e-2,
//! except for the flame boundary at `t = 0`: the uniform initial field cannot
//! carry the convective flux there, and that single point dominates `b_shl`.

use thermopinn::physics::term_form;
use thermopinn::{
    build_grid, solve_fdm, BalanceCoefficients, DualState, EnvironmentConfig, FdmGrid, LayerId, ResidualTerm,
    ScaleConfig, Segments, TemperatureField,
};

const FLOOR: f64 = 1e-2;

fn diff(v: &[f64], i: usize, h: f64) -> f64 {
    let n = v.len() - 1;
    if i == 0 {
        (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    } else if i == n {
        (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * h)
    } else {
        (v[i + 1] - v[i - 1]) / (2.0 * h)
    }
}

fn diff2(v: &[f64], i: usize, h: f64) -> f64 {
    let n = v.len() - 1;
    let (a, s) = match i {
        0 => (0, 1isize),
        _ if i == n => (n, -1),
        _ => return (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h),
    };
    let at = |k: isize| v[(a as isize + s * k) as usize];
    (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / (h * h)
}

/// Rescaled state of the reference field in `layer` at lattice node `(row, col)`.
fn state(field: &TemperatureField, layer: LayerId, row: usize, col: usize, scale: &ScaleConfig) -> DualState<f64> {
    let xs = &field.x_mm[layer.index()];
    let dx = scale.from_millimetres(xs[1] - xs[0]);
    let dt = field.times[1] - field.times[0];
    let space = field.layer_row(layer, row);
    let time: Vec<f64> = (0..field.n_times()).map(|r| field.get(layer, r, col)).collect();
    let tu = scale.temperature_unit;
    DualState {
        value: space[col] / tu,
        d_dx: diff(space, col, dx) / tu,
        d_dt: diff(&time, row, dt) / tu,
        d2_dx2: diff2(space, col, dx) / tu,
    }
}

fn index_of(nodes: &[f64], v: f64) -> usize {
    nodes.iter().position(|n| (n - v).abs() < 1e-9).expect("collocation point on the reference lattice")
}

#[test]
fn reference_field_meets_the_balanced_residual_floor() {
    let env = EnvironmentConfig::benchmark();
    let grid = build_grid(&env, Segments::BENCHMARK).unwrap();
    let field = solve_fdm(&env, &FdmGrid::reference(&env, Segments::BENCHMARK).unwrap(), None).unwrap();
    let scale = ScaleConfig::FORWARD_BALANCED;
    let coeffs = BalanceCoefficients::new(1e-2, 1.3e-4, 4.3e-8);

    for term in ResidualTerm::ALL {
        let form = term_form::<f64>(term, &env, &scale);
        let k = coeffs.for_term(term);
        let points = grid.partition(term.domain());
        let (mut all, mut later) = (0.0, 0.0);
        let mut at_start = None;
        for &(x, t) in points {
            let row = index_of(&field.times, t);
            let states: Vec<_> = form
                .probes
                .iter()
                .map(|(layer, _)| state(&field, *layer, row, index_of(&field.x_mm[layer.index()], x), &scale))
                .collect();
            let r = form.eval(&states);
            all += (k * r).powi(2);
            if row > 0 {
                later += (k * r).powi(2);
            } else {
                at_start = Some(r);
            }
        }
        let (all, later) = (all / points.len() as f64, later / points.len() as f64);
        if term == ResidualTerm::BShl {
            let r0 = at_start.expect("flame boundary sampled at t = 0");
            let flux = env.h_g * (env.tg - env.t0);
            assert!((r0 + flux).abs() < 1e-9 * flux, "b_shl at t = 0: {r0} vs {}", -flux);
            assert!(all > FLOOR, "b_shl {all:.3e}");
            assert!(later < FLOOR, "b_shl for t > 0: {later:.3e}");
        } else {
            assert!(all < FLOOR, "{term}: {all:.3e}");
        }
    }
}
