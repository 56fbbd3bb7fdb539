use dqstab::extract;
use dqstab::ident::{identify_csm_frequency_admittance, max_relative_error, InjectionPlan};
use dqstab::model::solve_operating_point;
use dqstab::params::SystemParams;

fn main() {
    let sys = SystemParams::default();
    let op = solve_operating_point(&sys).unwrap();
    for settle in [1.0, 2.0, 4.0] {
        for amp in [5e-3, 2e-3, 1e-3, 5e-4] {
            let mut plan = InjectionPlan::new(vec![1.0, 12.0, 80.0]);
            plan.settle = settle;
            plan.amplitude_frac = amp;
            let psi = identify_csm_frequency_admittance(&sys, &op, &plan).unwrap();
            let psi_ref = extract::csm_frequency_admittance(&sys, &op, psi.omega()).unwrap();
            print!("settle {settle:3.1} amp {amp:.0e}  per-freq:");
            for k in 0..psi.len() {
                let r = psi_ref.value(k);
                let scale = r.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                let err = (psi.value(k) - r).iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
                    / scale;
                print!(" {err:.2e}");
            }
            let worst = max_relative_error(&psi, &psi_ref).unwrap();
            println!("  worst {worst:.2e}");
        }
    }
}
