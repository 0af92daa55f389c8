//! Adaptive Dormand-Prince 5(4) integrator for small ODE systems.

/// Outcome of an adaptive integration.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    /// Accepted step abscissae, including both endpoints.
    pub xs: Vec<f64>,
    /// State at each accepted step.
    pub ys: Vec<Vec<f64>>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum OdeError {
    #[error("step size underflow at x = {x}")]
    StepUnderflow { x: f64 },
    #[error("non-finite state at x = {x}")]
    NonFinite { x: f64 },
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate `dy/dx = f(x, y)` from `x0` to `x1` with relative tolerance
/// `rtol` and absolute tolerance `atol`, recording every accepted step.
pub fn integrate<F>(
    f: F,
    x0: f64,
    x1: f64,
    y0: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<OdeSolution, OdeError>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let dim = y0.len();
    let span = x1 - x0;
    assert!(span > 0.0, "forward integration only");
    let mut x = x0;
    let mut y = y0.to_vec();
    let mut h = (span * 1e-3).min(span);
    let hmin = span * 1e-14;
    let mut sol = OdeSolution {
        xs: vec![x0],
        ys: vec![y.clone()],
        steps_accepted: 0,
        steps_rejected: 0,
    };
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];

    while x < x1 {
        if h < hmin {
            return Err(OdeError::StepUnderflow { x });
        }
        if x + h > x1 {
            h = x1 - x;
        }
        for s in 0..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    for d in 0..dim {
                        ys[d] += h * a * kj[d];
                    }
                }
            }
            k[s] = f(x + C[s] * h, &ys);
        }
        let mut y5 = y.clone();
        let mut err: f64 = 0.0;
        for d in 0..dim {
            let mut dy5 = 0.0;
            let mut dy4 = 0.0;
            for s in 0..7 {
                dy5 += B5[s] * k[s][d];
                dy4 += B4[s] * k[s][d];
            }
            y5[d] += h * dy5;
            let sc = atol + rtol * y[d].abs().max(y5[d].abs());
            err = err.max((h * (dy5 - dy4)).abs() / sc);
        }
        if !err.is_finite() || y5.iter().any(|v| !v.is_finite()) {
            return Err(OdeError::NonFinite { x });
        }
        if err <= 1.0 {
            x += h;
            y = y5;
            sol.xs.push(x);
            sol.ys.push(y.clone());
            sol.steps_accepted += 1;
        } else {
            sol.steps_rejected += 1;
        }
        let fac = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
        h *= fac;
    }
    Ok(sol)
}
