use pkslab::profiles::{solve_profile, ProfileConfig};
use std::f64::consts::PI;

fn main() {
    let p = solve_profile(4.0 * PI, &ProfileConfig::default()).unwrap();
    let fine = solve_profile(
        4.0 * PI,
        &ProfileConfig {
            n_points: 8192,
            ..ProfileConfig::default()
        },
    )
    .unwrap();
    let gi = p.g.interp();
    let gf = fine.g.interp();
    let h_op = 12.0 / 1023.0;
    for k in 0..8 {
        let r = k as f64 * h_op;
        let a = gi.eval_decay(r);
        let b = gf.eval_decay(r);
        println!("r={r:8.5}  coarse={a:18.12e}  fine={b:18.12e}  diff={:10.3e}", a - b);
    }
    // also check c' interp consistency
    let vi = p.v_g.interp();
    let vf = fine.v_g.interp();
    for k in 1..6 {
        let r = k as f64 * h_op;
        println!("r={r:8.5}  dc diff={:10.3e}", vi.eval(r) - vf.eval(r));
    }
}
