use dqstab::model::solve_operating_point;
use dqstab::params::SystemParams;
use dqstab::sim::{estimate_oscillation, simulate, ParamStep, Scenario};
use dqstab::stability::eigen_verdict;

fn main() {
    let tau = std::f64::consts::TAU;

    // Infeasible setpoint: does it trip the divergence bound?
    let mut sc = Scenario::new(SystemParams::default());
    sc.duration = 20.0;
    sc.param_step = Some(ParamStep { path: "gfl.p_set".into(), value: -100e3, at: 0.0 });
    let ts = simulate(&sc).unwrap();
    println!("p_set -100 kW: divergence {:?}, last t {:?}", ts.divergence, ts.t.last());

    // Small-kick growth measurement at each flip config's own equilibrium.
    let configs: Vec<(&str, Vec<(&str, f64)>)> = vec![
        ("base", vec![]),
        ("cc70", vec![("gfl.alpha_cc", 70.0)]),
        ("pll4", vec![("gfl.alpha_pll", 2.0 * tau)]),
        ("pll8", vec![("gfl.alpha_pll", 4.0 * tau)]),
        ("c70L4", vec![("gfl.alpha_cc", 70.0), ("network.line", 4e-3)]),
        ("c70L6", vec![("gfl.alpha_cc", 70.0), ("network.line", 6e-3)]),
    ];
    for (tag, edits) in configs {
        let mut sys = SystemParams::default();
        for (p, v) in &edits {
            sys.set_path(p, *v).unwrap();
        }
        let op = solve_operating_point(&sys).unwrap();
        let eig = eigen_verdict(&sys, &op).unwrap();
        let dq = 0.001 * sys.gfm.s_rated;
        let (dur, win) = if eig.max_real > 0.3 { (8.0, 6.0) } else { (20.0, 15.0) };
        let mut sc = Scenario::new(sys.clone());
        sc.duration = dur;
        sc.param_step = Some(ParamStep { path: "gfl.q_set".into(), value: sys.gfl.q_set + dq, at: 0.0 });
        let ts = simulate(&sc).unwrap();
        print!("{tag:6} eigen {:+.4}/s @ {:.3} Hz | ", eig.max_real, eig.dominant.f_hz);
        match estimate_oscillation(&ts, "i_q", win) {
            Ok((f, g)) => println!("sim {g:+.4}/s @ {f:.3} Hz (div {:?})", ts.divergence.is_some()),
            Err(e) => println!("est err: {e}"),
        }
    }
}
