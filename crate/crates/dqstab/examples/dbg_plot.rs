use dqstab::extract::ExtractionContext;
use dqstab::freq::FrequencyGrid;
use dqstab::model;
use dqstab::params::SystemParams;
use dqstab::plot;
use dqstab::sim::{self, Scenario};
use dqstab::stability;

fn main() {
    let sys = SystemParams::default();
    let op = model::solve_operating_point(&sys).unwrap();
    let grid = FrequencyGrid::default();
    let ctx = ExtractionContext::new(&sys, &op).unwrap();
    let samples = stability::sample_minor_loop(&ctx, &grid, true).unwrap();
    std::fs::write("/tmp/nyq.svg", plot::nyquist_svg(&samples.loci, "extended minor loop, stock tuning").unwrap()).unwrap();
    std::fs::write("/tmp/bode.svg", plot::bode_svg(&samples.loci, "extended minor loop, stock tuning").unwrap()).unwrap();

    let mut traces = Vec::new();
    for cc in [100.0, 85.0, 70.0] {
        let mut s = sys.clone();
        s.gfl.alpha_cc = cc;
        let o = model::solve_operating_point(&s).unwrap();
        traces.push((cc, stability::system_eigenvalues(&s, &o).unwrap()));
    }
    std::fs::write("/tmp/eig.svg", plot::eigtrace_svg(&traces, "gfl.alpha_cc", "spectrum vs current-control bandwidth").unwrap()).unwrap();

    let mut sc = Scenario::new(sys.clone());
    sc.duration = 3.0;
    sc.param_step = Some(sim::ParamStep { path: "gfl.q_set".into(), value: 0.001 * sys.gfm.s_rated, at: 0.0 });
    let ts = sim::simulate(&sc).unwrap();
    std::fs::write("/tmp/ts.svg", plot::timeseries_svg(&ts, &["u_d", "i_q", "omega_v"], "reactive setpoint kick").unwrap()).unwrap();
    println!("ok");
}
