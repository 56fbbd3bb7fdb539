//! Tuning probe: stability landscape + AC6/AC9 metrics for candidate defaults.
use dqstab::extract::{vsm_frequency_impedance, vsm_frequency_impedance_virtual};
use dqstab::freq::FrequencyGrid;
use dqstab::model::solve_operating_point;
use dqstab::params::SystemParams;
use dqstab::stability::{analyze_gnc, eigen_verdict, Verdict};

fn eig_line(tag: &str, sys: &SystemParams) {
    match solve_operating_point(sys) {
        Ok(op) => match eigen_verdict(sys, &op) {
            Ok(r) => println!(
                "{tag:28} max_re {:+9.4}  f {:6.3} Hz  {:?}",
                r.max_real, r.dominant.f_hz, r.verdict
            ),
            Err(e) => println!("{tag:28} eigen error: {e}"),
        },
        Err(e) => println!("{tag:28} op error: {e}"),
    }
}

fn vr_err(sys: &SystemParams, r_v: f64) -> f64 {
    let op = solve_operating_point(sys).unwrap();
    let omegas = FrequencyGrid::default().omegas();
    let exact = vsm_frequency_impedance(sys, &op, &omegas).unwrap();
    let vr = vsm_frequency_impedance_virtual(sys, &op, r_v, &omegas).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..omegas.len() {
        let e = exact.value(k);
        let v = vr.value(k);
        let num = ((v[(0, 0)] - e[(0, 0)]).norm_sqr() + (v[(0, 1)] - e[(0, 1)]).norm_sqr()).sqrt();
        let den = (e[(0, 0)].norm_sqr() + e[(0, 1)].norm_sqr()).sqrt();
        worst = worst.max(num / den);
    }
    worst
}

fn max_re(sys: &SystemParams) -> f64 {
    let op = match solve_operating_point(sys) {
        Ok(op) => op,
        Err(_) => return f64::NAN,
    };
    match eigen_verdict(sys, &op) {
        Ok(r) => r.max_real,
        Err(e) => match e {
            dqstab::Error::Marginal { .. } => 0.0,
            _ => f64::NAN,
        },
    }
}

/// Line sweep law from the study: R tracks L at 0.05 Ω/mH plus 0.05 Ω.
fn set_line(s: &mut SystemParams, l: f64) {
    s.network.l_line = l;
    s.network.r_line = 0.05 + 50.0 * l;
}

fn flip_row(b: &SystemParams) -> (f64, f64, f64, f64, f64, f64) {
    let base = max_re(b);
    let mut s = b.clone();
    s.gfl.alpha_cc = 70.0;
    let cc70 = max_re(&s);
    let mut s = b.clone();
    s.gfl.alpha_pll = 4.0 * std::f64::consts::PI;
    let pll4 = max_re(&s);
    let mut s = b.clone();
    s.gfl.alpha_pll = 8.0 * std::f64::consts::PI;
    let pll8 = max_re(&s);
    let mut s = b.clone();
    s.gfl.alpha_cc = 70.0;
    set_line(&mut s, 4e-3);
    let l4 = max_re(&s);
    let mut s = b.clone();
    s.gfl.alpha_cc = 70.0;
    set_line(&mut s, 6e-3);
    let l6 = max_re(&s);
    (base, cc70, pll4, pll8, l4, l6)
}

fn candidate() -> SystemParams {
    let mut b = SystemParams::default();
    b.gfl.l_c = 15e-3;
    b.gfl.r_c = 1.0;
    b.gfm.alpha_v = 50.0;
    b.gfm.omega_c = std::f64::consts::TAU * 5.0;
    b
}

fn max_re_f(sys: &SystemParams) -> (f64, f64) {
    let op = match solve_operating_point(sys) {
        Ok(op) => op,
        Err(_) => return (f64::NAN, f64::NAN),
    };
    match eigen_verdict(sys, &op) {
        Ok(r) => (r.max_real, r.dominant.f_hz),
        Err(dqstab::Error::Marginal { .. }) => (0.0, f64::NAN),
        Err(_) => (f64::NAN, f64::NAN),
    }
}

fn scan() {
    let b = candidate();
    let probes: Vec<(&str, Box<dyn Fn(&mut SystemParams)>)> = vec![
        ("baseline", Box::new(|_| {})),
        ("droop_v 0.02", Box::new(|s| s.gfm.droop_volt_frac = 0.02)),
        ("droop_v 0.01", Box::new(|s| s.gfm.droop_volt_frac = 0.01)),
        ("droop_v 0.002", Box::new(|s| s.gfm.droop_volt_frac = 0.002)),
        ("droop_f 0.01", Box::new(|s| s.gfm.droop_freq_frac = 0.01)),
        ("droop_f 0.005", Box::new(|s| s.gfm.droop_freq_frac = 0.005)),
        ("droop_f 0.05", Box::new(|s| s.gfm.droop_freq_frac = 0.05)),
        ("zeta_v 1.5", Box::new(|s| s.gfm.zeta_v = 1.5)),
        ("zeta_v 2.5", Box::new(|s| s.gfm.zeta_v = 2.5)),
        ("alpha_v 20", Box::new(|s| s.gfm.alpha_v = 20.0)),
        ("alpha_v 10", Box::new(|s| s.gfm.alpha_v = 10.0)),
        ("alpha_v 200", Box::new(|s| s.gfm.alpha_v = 200.0)),
        ("gfm_cc 2000", Box::new(|s| s.gfm.alpha_cc = 2000.0)),
        ("gfm_cc 500", Box::new(|s| s.gfm.alpha_cc = 500.0)),
        ("c_f 20u", Box::new(|s| s.gfm.c_f = 20e-6)),
        ("c_f 50u", Box::new(|s| s.gfm.c_f = 50e-6)),
        ("l_f 1m", Box::new(|s| s.gfm.l_f = 1e-3)),
        ("l_f 5m", Box::new(|s| s.gfm.l_f = 5e-3)),
        ("r_f 0.3", Box::new(|s| s.gfm.r_f = 0.3)),
        ("omega_c 2pi*10", Box::new(|s| s.gfm.omega_c = std::f64::consts::TAU * 10.0)),
        ("omega_c 2pi*2", Box::new(|s| s.gfm.omega_c = std::f64::consts::TAU * 2.0)),
        ("r_load 4", Box::new(|s| s.network.r_load = 4.0)),
        ("r_load 6", Box::new(|s| s.network.r_load = 6.0)),
        ("r_load 12", Box::new(|s| s.network.r_load = 12.0)),
        ("r_load 16", Box::new(|s| s.network.r_load = 16.0)),
        ("r_load 32", Box::new(|s| s.network.r_load = 32.0)),
        ("p_set 1k", Box::new(|s| s.gfl.p_set = 1e3)),
        ("p_set 10k", Box::new(|s| s.gfl.p_set = 10e3)),
        ("q_set 2k", Box::new(|s| s.gfl.q_set = 2e3)),
        ("q_set -2k", Box::new(|s| s.gfl.q_set = -2e3)),
        ("zeta_pll 1.0", Box::new(|s| s.gfl.zeta_pll = 1.0)),
        ("l_c 25m", Box::new(|s| s.gfl.l_c = 25e-3)),
        ("l_c 40m", Box::new(|s| s.gfl.l_c = 40e-3)),
        ("r_c 1.5", Box::new(|s| s.gfl.r_c = 1.5)),
        ("r_c 2.5", Box::new(|s| s.gfl.r_c = 2.5)),
        ("p_star 5k", Box::new(|s| s.gfm.p_star = 5e3)),
        ("p_star 0", Box::new(|s| s.gfm.p_star = 0.0)),
    ];
    println!("{:>16} | {:>9} {:>7}", "probe", "max_re", "f_Hz");
    for (tag, f) in probes {
        let mut s = b.clone();
        f(&mut s);
        let (re, fh) = max_re_f(&s);
        println!("{tag:>16} | {re:>+9.3} {fh:>7.3}");
    }
}

fn flip_cell(tag: &str, s: &SystemParams) -> bool {
    let cases: Vec<(&str, SystemParams)> = {
        let mut v = Vec::new();
        v.push(("base", s.clone()));
        let mut c = s.clone();
        c.gfl.alpha_cc = 70.0;
        v.push(("cc70", c));
        let mut c = s.clone();
        c.gfl.alpha_pll = 4.0 * std::f64::consts::PI;
        v.push(("pll4", c));
        let mut c = s.clone();
        c.gfl.alpha_pll = 8.0 * std::f64::consts::PI;
        v.push(("pll8", c));
        let mut c = s.clone();
        c.gfl.alpha_cc = 70.0;
        set_line(&mut c, 4e-3);
        v.push(("c70L4", c));
        let mut c = s.clone();
        c.gfl.alpha_cc = 70.0;
        set_line(&mut c, 6e-3);
        v.push(("c70L6", c));
        v
    };
    let res: Vec<(&str, f64, f64)> = cases
        .iter()
        .map(|(t, c)| {
            let (re, fh) = max_re_f(c);
            (*t, re, fh)
        })
        .collect();
    let ok = res[0].1 < 0.0
        && res[1].1 > 0.0
        && res[2].1 > 0.0
        && res[3].1 > 0.0
        && res[4].1 < 0.0
        && res[5].1 > 0.0;
    print!("{tag:36} |");
    for (t, re, fh) in &res {
        print!(" {t} {re:+6.2}@{fh:4.2}");
    }
    println!("{}", if ok { "  <== FLIPS" } else { "" });
    ok
}

fn scan2() {
    for alpha_v in [10.0, 12.0, 15.0] {
        for zeta_v in [0.9, 1.5] {
            for droop_f in [0.02, 0.01] {
                for r_c in [1.0, 1.5] {
                    let mut s = candidate();
                    s.gfm.alpha_v = alpha_v;
                    s.gfm.zeta_v = zeta_v;
                    s.gfm.droop_freq_frac = droop_f;
                    s.gfl.r_c = r_c;
                    let tag =
                        format!("av{alpha_v} zv{zeta_v} df{droop_f} rc{r_c}");
                    flip_cell(&tag, &s);
                }
            }
        }
    }
}

fn scan4() {
    for alpha_v in [10.0, 12.0] {
        for l_c in [5e-3, 10e-3, 15e-3, 25e-3] {
            for r_c in [1.0, 1.5] {
                let mut s = candidate();
                s.gfm.alpha_v = alpha_v;
                s.gfm.zeta_v = 1.5;
                s.gfm.droop_freq_frac = 0.01;
                s.gfl.l_c = l_c;
                s.gfl.r_c = r_c;
                s.gfl.p_set = 10e3;
                let tag = format!("av{alpha_v} lc{:.0}m rc{r_c} P10k", l_c * 1e3);
                flip_cell(&tag, &s);
            }
        }
    }
}

fn scan5() {
    for zeta_v in [1.5, 2.0, 2.5] {
        for droop_f in [0.01, 0.005] {
            for alpha_v in [10.0, 12.0, 14.0] {
                for p_set in [10e3, 12e3] {
                    let mut s = candidate();
                    s.gfl.l_c = 5e-3;
                    s.gfl.r_c = 1.0;
                    s.gfm.alpha_v = alpha_v;
                    s.gfm.zeta_v = zeta_v;
                    s.gfm.droop_freq_frac = droop_f;
                    s.gfl.p_set = p_set;
                    let tag = format!(
                        "zv{zeta_v} df{droop_f} av{alpha_v} P{:.0}k",
                        p_set / 1e3
                    );
                    flip_cell(&tag, &s);
                }
            }
        }
    }
}

fn scan6() {
    for alpha_v in [10.5, 11.0, 11.5] {
        for p_set in [10e3, 11e3] {
            for r_load in [8.0, 12.0] {
                for omega_c in [std::f64::consts::TAU * 4.0, std::f64::consts::TAU * 5.0] {
                    let mut s = candidate();
                    s.gfl.l_c = 5e-3;
                    s.gfl.r_c = 1.0;
                    s.gfm.zeta_v = 2.5;
                    s.gfm.droop_freq_frac = 0.01;
                    s.gfm.alpha_v = alpha_v;
                    s.gfm.omega_c = omega_c;
                    s.gfl.p_set = p_set;
                    s.network.r_load = r_load;
                    let tag = format!(
                        "av{alpha_v} P{:.0}k rl{r_load} wc{omega_c:.0}",
                        p_set / 1e3
                    );
                    flip_cell(&tag, &s);
                }
            }
        }
    }
}

fn scan7() {
    let mut best: (f64, String) = (f64::NEG_INFINITY, String::new());
    for alpha_v in [10.0, 10.25, 10.5, 10.75, 11.0] {
        for p_set in [9.75e3, 10e3, 10.25e3, 10.5e3] {
            let mut s = candidate();
            s.gfl.l_c = 5e-3;
            s.gfl.r_c = 1.0;
            s.gfm.zeta_v = 2.5;
            s.gfm.droop_freq_frac = 0.01;
            s.gfm.alpha_v = alpha_v;
            s.gfm.omega_c = std::f64::consts::TAU * 4.0;
            s.gfl.p_set = p_set;
            let tag = format!("av{alpha_v} P{:.2}k", p_set / 1e3);
            let vals = [
                max_re_f(&s).0,
                {
                    let mut c = s.clone();
                    c.gfl.alpha_cc = 70.0;
                    max_re_f(&c).0
                },
                {
                    let mut c = s.clone();
                    c.gfl.alpha_pll = 4.0 * std::f64::consts::PI;
                    max_re_f(&c).0
                },
                {
                    let mut c = s.clone();
                    c.gfl.alpha_pll = 8.0 * std::f64::consts::PI;
                    max_re_f(&c).0
                },
                {
                    let mut c = s.clone();
                    c.gfl.alpha_cc = 70.0;
                    set_line(&mut c, 4e-3);
                    max_re_f(&c).0
                },
                {
                    let mut c = s.clone();
                    c.gfl.alpha_cc = 70.0;
                    set_line(&mut c, 6e-3);
                    max_re_f(&c).0
                },
            ];
            let worst = (-vals[0])
                .min(vals[1])
                .min(vals[2])
                .min(vals[3])
                .min(-vals[4])
                .min(vals[5]);
            println!(
                "{tag:20} worst {worst:+.4} | {:+.3} {:+.3} {:+.3} {:+.3} {:+.3} {:+.3}",
                vals[0], vals[1], vals[2], vals[3], vals[4], vals[5]
            );
            if worst > best.0 {
                best = (worst, tag);
            }
        }
    }
    println!("BEST: {} worst-margin {:+.4}", best.1, best.0);
}

fn gap_row(tag: &str, s: &SystemParams) {
    let op = match solve_operating_point(s) {
        Ok(op) => op,
        Err(e) => {
            println!("{tag:28} op error: {e}");
            return;
        }
    };
    let grid = FrequencyGrid::default();
    let (full, _) = max_re_f(s);
    let ext = analyze_gnc(s, &op, &grid, true);
    let std = analyze_gnc(s, &op, &grid, false);
    let fmt = |r: &dqstab::Result<(dqstab::stability::GncReport, dqstab::stability::LoopSamples)>| match r {
        Ok((rep, _)) => format!("{:?} d {:.3} @ {:.2} Hz", rep.verdict, rep.closest.distance, rep.closest.f_hz),
        Err(e) => format!("err {e}"),
    };
    println!("{tag:28} full {full:+7.3} | ext {} | std {}", fmt(&ext), fmt(&std));
}

fn scan8() {
    for omega_c in [
        std::f64::consts::TAU * 1.0,
        std::f64::consts::TAU * 2.0,
        std::f64::consts::TAU * 4.0,
        std::f64::consts::TAU * 8.0,
    ] {
        for droop_f in [0.01, 0.02, 0.04] {
            for alpha_v in [8.0, 10.5, 13.0] {
                let mut s = SystemParams::default();
                s.gfm.omega_c = omega_c;
                s.gfm.droop_freq_frac = droop_f;
                s.gfm.alpha_v = alpha_v;
                let tag = format!(
                    "wc{:.1} df{droop_f} av{alpha_v}",
                    omega_c / std::f64::consts::TAU
                );
                gap_row(&tag, &s);
            }
        }
    }
}

fn scan10() {
    for p_set in [-8e3, -10e3, -12e3] {
        for q_set in [-3e3, -5e3, -7e3] {
            for alpha_v in [8.0, 10.5, 13.0] {
                let mut s = SystemParams::default();
                s.gfl.p_set = p_set;
                s.gfl.q_set = q_set;
                s.gfm.alpha_v = alpha_v;
                let tag = format!(
                    "P{:+.0}k Q{:+.0}k av{alpha_v}",
                    p_set / 1e3,
                    q_set / 1e3
                );
                flip_cell(&tag, &s);
            }
        }
    }
}

fn scan11() {
    for q_set in [-5e3, -8e3, -11e3] {
        for alpha_v in [10.5, 13.0, 16.0] {
            let mut s = SystemParams::default();
            s.gfl.q_set = q_set;
            s.gfm.alpha_v = alpha_v;
            let tag = format!("Q{:+.0}k av{alpha_v}", q_set / 1e3);
            gap_row(&tag, &s);
            flip_cell(&tag, &s);
        }
    }
}

fn scan9() {
    for p_set in [-10e3, -5e3, 5e3, 10e3] {
        for q_set in [-5e3, 0.0, 5e3] {
            let mut s = SystemParams::default();
            s.gfl.p_set = p_set;
            s.gfl.q_set = q_set;
            let tag = format!("P{:+.0}k Q{:+.0}k", p_set / 1e3, q_set / 1e3);
            gap_row(&tag, &s);
        }
    }
    for r_load in [5.3, 16.0] {
        let mut s = SystemParams::default();
        s.network.r_load = r_load;
        gap_row(&format!("rl{r_load}"), &s);
    }
}

fn scan3() {
    for (alpha_v, zeta_v, droop_f, r_c) in
        [(10.0, 1.5, 0.02, 1.0), (12.0, 1.5, 0.01, 1.0), (12.0, 1.5, 0.02, 1.5)]
    {
        for p_set in [5e3, 8e3, 10e3, 12e3] {
            let mut s = candidate();
            s.gfm.alpha_v = alpha_v;
            s.gfm.zeta_v = zeta_v;
            s.gfm.droop_freq_frac = droop_f;
            s.gfl.r_c = r_c;
            s.gfl.p_set = p_set;
            let tag = format!("av{alpha_v} zv{zeta_v} df{droop_f} rc{r_c} P{:.0}k", p_set / 1e3);
            flip_cell(&tag, &s);
        }
    }
}

fn modes(tag: &str, sys: &SystemParams) {
    let op = solve_operating_point(sys).unwrap();
    let mut eigs = dqstab::stability::system_eigenvalues(sys, &op).unwrap();
    eigs.retain(|e| e.im >= 0.0);
    eigs.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap());
    print!("{tag:24}");
    for e in eigs.iter().take(6) {
        print!("  {:+7.2}{:+7.2}j({:5.2}Hz)", e.re, e.im, e.im / std::f64::consts::TAU);
    }
    println!();
}

fn mode_table() {
    let mut b = SystemParams::default();
    b.gfl.p_set = 10e3;
    let cases: Vec<(&str, Box<dyn Fn(&mut SystemParams)>)> = vec![
        ("base", Box::new(|_| {})),
        ("cc70", Box::new(|s| s.gfl.alpha_cc = 70.0)),
        ("cc50", Box::new(|s| s.gfl.alpha_cc = 50.0)),
        ("cc30", Box::new(|s| s.gfl.alpha_cc = 30.0)),
        ("cc200", Box::new(|s| s.gfl.alpha_cc = 200.0)),
        ("pll4pi", Box::new(|s| s.gfl.alpha_pll = 4.0 * std::f64::consts::PI)),
        ("pll8pi", Box::new(|s| s.gfl.alpha_pll = 8.0 * std::f64::consts::PI)),
        ("L4", Box::new(|s| s.network.l_line = 4e-3)),
        ("L3", Box::new(|s| s.network.l_line = 3e-3)),
    ];
    for (tag, f) in cases {
        let mut s = b.clone();
        f(&mut s);
        modes(tag, &s);
    }
    let _ = &mut b;
}

fn eigvec() {
    use nalgebra::DMatrix;
    let sys = SystemParams::default();
    let op = solve_operating_point(&sys).unwrap();
    let model = dqstab::linearize::assemble_system(&sys, &op).unwrap();
    let a = model.a();
    let eigs = dqstab::freq::complex_eigenvalues(a).unwrap();
    let dom = eigs.iter().cloned().max_by(|x, y| x.re.partial_cmp(&y.re).unwrap()).unwrap();
    println!("dominant {dom}");
    // Inverse iteration on (A - (dom+shift) I) to get the eigenvector.
    let n = a.nrows();
    let shift = num_complex::Complex64::new(dom.re + 1e-3, dom.im);
    let mut m = DMatrix::<num_complex::Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = num_complex::Complex64::new(a[(i, j)], 0.0);
        }
        m[(i, i)] -= shift;
    }
    let lu = m.lu();
    let mut v = DMatrix::<num_complex::Complex64>::from_element(n, 1, num_complex::Complex64::new(1.0, 0.0));
    for _ in 0..8 {
        v = lu.solve(&v).unwrap();
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        v /= num_complex::Complex64::new(norm, 0.0);
    }
    let scales = dqstab::model::state_scales(&sys.gfm);
    let labels = dqstab::model::sys_state_labels();
    let mut comps: Vec<(String, f64)> = (0..n)
        .map(|i| (labels[i].clone(), v[(i, 0)].norm() / scales[i]))
        .collect();
    let mx = comps.iter().map(|c| c.1).fold(0.0_f64, f64::max);
    comps.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    for (l, c) in comps.iter().take(8) {
        println!("  {l:12} {:.3}", c / mx);
    }
}

fn main() {
    if std::env::args().any(|a| a == "scan") {
        scan();
        return;
    }
    if std::env::args().any(|a| a == "scan2") {
        scan2();
        return;
    }
    if std::env::args().any(|a| a == "scan3") {
        scan3();
        return;
    }
    if std::env::args().any(|a| a == "scan4") {
        scan4();
        return;
    }
    if std::env::args().any(|a| a == "scan5") {
        scan5();
        return;
    }
    if std::env::args().any(|a| a == "scan6") {
        scan6();
        return;
    }
    if std::env::args().any(|a| a == "scan7") {
        scan7();
        return;
    }
    if std::env::args().any(|a| a == "scan8") {
        scan8();
        return;
    }
    if std::env::args().any(|a| a == "scan9") {
        scan9();
        return;
    }
    if std::env::args().any(|a| a == "scan10") {
        scan10();
        return;
    }
    if std::env::args().any(|a| a == "scan11") {
        scan11();
        return;
    }
    if std::env::args().any(|a| a == "vec") {
        eigvec();
        return;
    }
    if std::env::args().any(|a| a == "modes") {
        mode_table();
        return;
    }
    let base = SystemParams::default();
    println!("=== defaults: r_load {} ohm, p_set {} W, l_line {} H, omega_c {:.1}",
        base.network.r_load, base.gfl.p_set, base.network.l_line, base.gfm.omega_c);

    // Landscape for the flip targets.
    eig_line("base (cc100 pll2pi Ldft)", &base);
    let mut s = base.clone();
    s.gfl.alpha_cc = 70.0;
    eig_line("cc70", &s);
    let mut s = base.clone();
    s.gfl.alpha_pll = 8.0 * std::f64::consts::PI;
    eig_line("pll 8pi", &s);
    for l in [3e-3, 4e-3, 5e-3, 6e-3, 7e-3] {
        let mut s = base.clone();
        s.gfl.alpha_cc = 70.0;
        s.network.l_line = l;
        eig_line(&format!("cc70 L={:.0}mH", l * 1e3), &s);
    }
    for cc in [70.0, 80.0, 90.0, 100.0] {
        let mut s = base.clone();
        s.gfl.alpha_cc = cc;
        eig_line(&format!("cc{cc:.0}"), &s);
    }
    for k in [1.0, 2.0, 3.0, 4.0] {
        let mut s = base.clone();
        s.gfl.alpha_pll = k * std::f64::consts::TAU / 1.0;
        eig_line(&format!("pll {k:.0}*2pi"), &s);
    }

    // AC9: standard vs extended at base.
    let op = solve_operating_point(&base).unwrap();
    let grid = FrequencyGrid::default();
    match analyze_gnc(&base, &op, &grid, true) {
        Ok((r, _)) => println!("extended: {:?} closest {:.4} @ {:.3} Hz", r.verdict, r.closest.distance, r.closest.f_hz),
        Err(e) => println!("extended: error {e}"),
    }
    match analyze_gnc(&base, &op, &grid, false) {
        Ok((r, _)) => println!("standard: {:?} closest {:.4} @ {:.3} Hz", r.verdict, r.closest.distance, r.closest.f_hz),
        Err(e) => println!("standard: error {e}"),
    }
    let _ = Verdict::Stable;

    // AC6: virtual-resistor error.
    for r_v in [1e2, 1e3, 1e4] {
        println!("vr err @ {r_v:8.0}: {:.4e}", vr_err(&base, r_v));
    }
}
