//! Frequency-response kernel: state-space models with named ports, resolvent
//! evaluation by LU solve, 2×2 eigenvalue extraction, continuity sorting of
//! eigenvalue loci, and winding-number counting on mirrored Nyquist contours.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tol;

/// One named port: a label plus its B block (n×k, inputs) or C block (k×n,
/// outputs).
#[derive(Debug, Clone)]
pub struct Port {
    pub name: String,
    pub mat: DMatrix<f64>,
}

/// Linear time-invariant model ẋ = Ax + Σ B_p u_p, y_q = C_q x + Σ D_{pq} u_p
/// with named input/output port groups. Feedthrough blocks default to zero.
#[derive(Debug, Clone)]
pub struct StateSpaceModel {
    a: DMatrix<f64>,
    inputs: Vec<Port>,
    outputs: Vec<Port>,
    /// (input index, output index) → D block of shape (output dim × input dim).
    feedthrough: Vec<(usize, usize, DMatrix<f64>)>,
    state_labels: Vec<String>,
}

/// Incremental constructor for [`StateSpaceModel`]; `build` validates all
/// dimensions, label uniqueness, and finiteness.
pub struct ModelBuilder {
    a: DMatrix<f64>,
    inputs: Vec<Port>,
    outputs: Vec<Port>,
    feedthrough: Vec<(String, String, DMatrix<f64>)>,
    state_labels: Vec<String>,
}

impl ModelBuilder {
    pub fn new(a: DMatrix<f64>, state_labels: Vec<String>) -> Self {
        Self { a, inputs: Vec::new(), outputs: Vec::new(), feedthrough: Vec::new(), state_labels }
    }

    pub fn input(mut self, name: &str, b: DMatrix<f64>) -> Self {
        self.inputs.push(Port { name: name.to_string(), mat: b });
        self
    }

    pub fn output(mut self, name: &str, c: DMatrix<f64>) -> Self {
        self.outputs.push(Port { name: name.to_string(), mat: c });
        self
    }

    pub fn feedthrough(mut self, input: &str, output: &str, d: DMatrix<f64>) -> Self {
        self.feedthrough.push((input.to_string(), output.to_string(), d));
        self
    }

    pub fn build(self) -> Result<StateSpaceModel> {
        let n = self.a.nrows();
        if self.a.ncols() != n {
            return Err(Error::Dimension(format!("A is {}×{}", self.a.nrows(), self.a.ncols())));
        }
        if self.state_labels.len() != n {
            return Err(Error::Dimension(format!(
                "{} state labels for {} states",
                self.state_labels.len(),
                n
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &self.state_labels {
            if !seen.insert(l.clone()) {
                return Err(Error::Dimension(format!("duplicate state label {l:?}")));
            }
        }
        let mut names = std::collections::HashSet::new();
        for p in &self.inputs {
            if p.mat.nrows() != n {
                return Err(Error::Dimension(format!(
                    "input {:?} block has {} rows, model has {n} states",
                    p.name,
                    p.mat.nrows()
                )));
            }
            if !names.insert(format!("in:{}", p.name)) {
                return Err(Error::Dimension(format!("duplicate input port {:?}", p.name)));
            }
        }
        for p in &self.outputs {
            if p.mat.ncols() != n {
                return Err(Error::Dimension(format!(
                    "output {:?} block has {} cols, model has {n} states",
                    p.name,
                    p.mat.ncols()
                )));
            }
            if !names.insert(format!("out:{}", p.name)) {
                return Err(Error::Dimension(format!("duplicate output port {:?}", p.name)));
            }
        }
        let mut feed = Vec::new();
        for (iname, oname, d) in self.feedthrough {
            let i = self
                .inputs
                .iter()
                .position(|p| p.name == iname)
                .ok_or_else(|| Error::UnknownPort {
                    port: iname.clone(),
                    available: self.inputs.iter().map(|p| p.name.clone()).collect(),
                })?;
            let o = self
                .outputs
                .iter()
                .position(|p| p.name == oname)
                .ok_or_else(|| Error::UnknownPort {
                    port: oname.clone(),
                    available: self.outputs.iter().map(|p| p.name.clone()).collect(),
                })?;
            let (ku, ky) = (self.inputs[i].mat.ncols(), self.outputs[o].mat.nrows());
            if d.nrows() != ky || d.ncols() != ku {
                return Err(Error::Dimension(format!(
                    "feedthrough ({iname}→{oname}) is {}×{}, expected {ky}×{ku}",
                    d.nrows(),
                    d.ncols()
                )));
            }
            feed.push((i, o, d));
        }
        let model = StateSpaceModel {
            a: self.a,
            inputs: self.inputs,
            outputs: self.outputs,
            feedthrough: feed,
            state_labels: self.state_labels,
        };
        for (what, m) in std::iter::once(("A", &model.a))
            .chain(model.inputs.iter().map(|p| ("B", &p.mat)))
            .chain(model.outputs.iter().map(|p| ("C", &p.mat)))
            .chain(model.feedthrough.iter().map(|(_, _, d)| ("D", d)))
        {
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("{what} block")));
            }
        }
        Ok(model)
    }
}

impl StateSpaceModel {
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn state_labels(&self) -> &[String] {
        &self.state_labels
    }

    /// Index of a state by label.
    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.state_labels.iter().position(|l| l == label)
    }

    fn input_port(&self, name: &str) -> Result<&Port> {
        self.inputs.iter().find(|p| p.name == name).ok_or_else(|| Error::UnknownPort {
            port: name.to_string(),
            available: self.inputs.iter().map(|p| p.name.clone()).collect(),
        })
    }

    fn output_port(&self, name: &str) -> Result<&Port> {
        self.outputs.iter().find(|p| p.name == name).ok_or_else(|| Error::UnknownPort {
            port: name.to_string(),
            available: self.outputs.iter().map(|p| p.name.clone()).collect(),
        })
    }

    pub fn input_block(&self, name: &str) -> Result<&DMatrix<f64>> {
        Ok(&self.input_port(name)?.mat)
    }

    pub fn output_block(&self, name: &str) -> Result<&DMatrix<f64>> {
        Ok(&self.output_port(name)?.mat)
    }

    pub fn feedthrough_block(&self, input: &str, output: &str) -> Result<Option<&DMatrix<f64>>> {
        let i = self.inputs.iter().position(|p| p.name == input).ok_or_else(|| {
            Error::UnknownPort {
                port: input.to_string(),
                available: self.inputs.iter().map(|p| p.name.clone()).collect(),
            }
        })?;
        let o = self.outputs.iter().position(|p| p.name == output).ok_or_else(|| {
            Error::UnknownPort {
                port: output.to_string(),
                available: self.outputs.iter().map(|p| p.name.clone()).collect(),
            }
        })?;
        Ok(self.feedthrough.iter().find(|(fi, fo, _)| *fi == i && *fo == o).map(|(_, _, d)| d))
    }

    /// Eigenvalues of A (general real matrix, complex spectrum).
    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        complex_eigenvalues(&self.a)
    }

    /// (jωI − A)⁻¹·B_in by LU solve; shared by all output ports at this ω.
    fn resolvent_apply(&self, input: &str, omega: f64) -> Result<DMatrix<Complex64>> {
        let b = &self.input_port(input)?.mat;
        let n = self.n_states();
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = Complex64::new(-self.a[(i, j)], 0.0);
            }
            m[(i, i)] += Complex64::new(0.0, omega);
        }
        let lu = m.lu();
        // Relative pivot ratio detects jω landing on an imaginary-axis mode.
        let diag: Vec<f64> = (0..n).map(|i| lu.u()[(i, i)].norm()).collect();
        let max_p = diag.iter().cloned().fold(0.0_f64, f64::max);
        let min_p = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(max_p > 0.0) || min_p / max_p < tol::RESOLVENT_PIVOT_REL {
            return Err(Error::SingularResolvent { omega });
        }
        let bc = b.map(|x| Complex64::new(x, 0.0));
        lu.solve(&bc).ok_or(Error::SingularResolvent { omega })
    }

    /// C_out·(jωI − A)⁻¹·B_in + D, computed by linear solve.
    pub fn eval_response(&self, input: &str, output: &str, omega: f64) -> Result<DMatrix<Complex64>> {
        let x = self.resolvent_apply(input, omega)?;
        let c = self.output_port(output)?.mat.map(|v| Complex64::new(v, 0.0));
        let mut y = c * x;
        if let Some(d) = self.feedthrough_block(input, output)? {
            for i in 0..y.nrows() {
                for j in 0..y.ncols() {
                    y[(i, j)] += Complex64::new(d[(i, j)], 0.0);
                }
            }
        }
        Ok(y)
    }

    /// Sample one input→output response over a grid of angular frequencies.
    pub fn response_samples(&self, input: &str, output: &str, omegas: &[f64]) -> Result<TransferSamples> {
        let mut values = Vec::with_capacity(omegas.len());
        for &w in omegas {
            values.push(self.eval_response(input, output, w)?);
        }
        TransferSamples::new(omegas.to_vec(), values)
    }
}

/// Complex spectrum of a general real square matrix.
pub fn complex_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    let eigs: Vec<Complex64> = a.clone().complex_eigenvalues().iter().cloned().collect();
    if eigs.iter().any(|e| !e.re.is_finite() || !e.im.is_finite()) {
        return Err(Error::EigenSolver { n });
    }
    Ok(eigs)
}

/// Log-spaced frequency grid, endpoints included.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrequencyGrid {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub points_per_decade: usize,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        // ω = 0 excluded by construction: positive start frequency stands in
        // for the Nyquist indentation around any origin pole.
        Self { f_min_hz: 1e-2, f_max_hz: 1e4, points_per_decade: 100 }
    }
}

impl FrequencyGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_min_hz.is_finite() && self.f_min_hz > 0.0)
            || !(self.f_max_hz.is_finite() && self.f_max_hz > self.f_min_hz)
        {
            return Err(Error::Config(format!(
                "frequency grid needs 0 < f_min < f_max, got {} .. {} Hz",
                self.f_min_hz, self.f_max_hz
            )));
        }
        if self.points_per_decade == 0 {
            return Err(Error::Config("frequency grid needs at least 1 point per decade".into()));
        }
        Ok(())
    }

    /// Angular frequencies (rad/s), strictly increasing.
    pub fn omegas(&self) -> Vec<f64> {
        let lo = self.f_min_hz.log10();
        let hi = self.f_max_hz.log10();
        let n = ((hi - lo) * self.points_per_decade as f64).ceil() as usize + 1;
        (0..n)
            .map(|k| {
                let frac = k as f64 / (n - 1) as f64;
                10f64.powf(lo + frac * (hi - lo)) * std::f64::consts::TAU
            })
            .collect()
    }
}

/// Frequency-indexed complex matrix samples with a fixed shape
/// (2×2 impedance/admittance, 1×2 row, or 2×1 column).
#[derive(Debug, Clone)]
pub struct TransferSamples {
    omega: Vec<f64>,
    values: Vec<DMatrix<Complex64>>,
}

impl TransferSamples {
    pub fn new(omega: Vec<f64>, values: Vec<DMatrix<Complex64>>) -> Result<Self> {
        if values.len() != omega.len() {
            return Err(Error::Dimension(format!(
                "{} samples for {} frequencies",
                values.len(),
                omega.len()
            )));
        }
        if omega.is_empty() {
            return Err(Error::Dimension("empty frequency grid".into()));
        }
        if omega[0] <= 0.0 || omega.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Dimension("omega must be strictly increasing and positive".into()));
        }
        if omega.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("omega grid".into()));
        }
        let shape = (values[0].nrows(), values[0].ncols());
        for v in &values {
            if (v.nrows(), v.ncols()) != shape {
                return Err(Error::Dimension("inconsistent sample shapes".into()));
            }
            if v.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
                return Err(Error::NonFinite("transfer samples".into()));
            }
        }
        Ok(Self { omega, values })
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.values[0].nrows(), self.values[0].ncols())
    }

    pub fn value(&self, k: usize) -> &DMatrix<Complex64> {
        &self.values[k]
    }

    pub fn values(&self) -> &[DMatrix<Complex64>] {
        &self.values
    }

    fn same_grid(&self, other: &Self) -> Result<()> {
        if self.omega.len() != other.omega.len()
            || self.omega.iter().zip(&other.omega).any(|(a, b)| a != b)
        {
            return Err(Error::GridMismatch(format!(
                "{} vs {} points",
                self.omega.len(),
                other.omega.len()
            )));
        }
        Ok(())
    }

    /// Pointwise matrix product self(jω)·other(jω).
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        if self.shape().1 != other.shape().0 {
            return Err(Error::Dimension(format!(
                "cannot multiply {:?} by {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Self::new(self.omega.clone(), values)
    }

    /// Pointwise difference self(jω) − other(jω).
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!(
                "cannot subtract {:?} from {:?}",
                other.shape(),
                self.shape()
            )));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Self::new(self.omega.clone(), values)
    }
}

/// Per-frequency eigenvalue pair of the sampled 2×2 loop, continuity-sorted.
#[derive(Debug, Clone)]
pub struct EigenLoci {
    pub omega: Vec<f64>,
    pub lambda1: Vec<Complex64>,
    pub lambda2: Vec<Complex64>,
}

/// Both eigenvalues of a complex 2×2 matrix by the q-form quadratic formula
/// (the larger root in magnitude is computed first, the other as det/λ to
/// avoid subtractive cancellation).
pub fn eigen2(m: &DMatrix<Complex64>) -> (Complex64, Complex64) {
    debug_assert_eq!((m.nrows(), m.ncols()), (2, 2));
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let disc = (tr * tr - det * 4.0).sqrt();
    let cand = if (tr + disc).norm() >= (tr - disc).norm() { tr + disc } else { tr - disc };
    let l1 = cand * 0.5;
    let l2 = if l1.norm() > 0.0 { det / l1 } else { (tr - cand) * 0.5 };
    (l1, l2)
}

/// Continuity-sort an unordered eigenvalue pair sequence into two loci by
/// greedy nearest-neighbour matching from each grid point to the next.
pub fn sort_loci(omega: Vec<f64>, pairs: Vec<(Complex64, Complex64)>) -> Result<EigenLoci> {
    if pairs.len() != omega.len() || omega.is_empty() {
        return Err(Error::Dimension(format!(
            "{} pairs for {} frequencies",
            pairs.len(),
            omega.len()
        )));
    }
    let mut l1 = Vec::with_capacity(pairs.len());
    let mut l2 = Vec::with_capacity(pairs.len());
    l1.push(pairs[0].0);
    l2.push(pairs[0].1);
    for &(a, b) in pairs.iter().skip(1) {
        let (p1, p2) = (*l1.last().unwrap(), *l2.last().unwrap());
        let keep = (a - p1).norm() + (b - p2).norm();
        let swap = (b - p1).norm() + (a - p2).norm();
        if swap < keep {
            l1.push(b);
            l2.push(a);
        } else {
            l1.push(a);
            l2.push(b);
        }
    }
    Ok(EigenLoci { omega, lambda1: l1, lambda2: l2 })
}

/// Closed Nyquist contour for one locus sampled on the positive half-axis:
/// the negative half-axis is the complex-conjugate mirror, the near-dc and
/// high-frequency gaps are closed by straight segments (the latter is valid
/// once the loop has rolled off; callers enforce the closure-norm check).
pub fn mirror_closed(samples: &[Complex64]) -> Vec<Complex64> {
    let mut pts = Vec::with_capacity(2 * samples.len());
    for s in samples.iter().rev() {
        pts.push(s.conj());
    }
    pts.extend_from_slice(samples);
    pts
}

fn dist_point_segment(c: Complex64, p: Complex64, q: Complex64) -> f64 {
    let d = q - p;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (c - p).norm();
    }
    let t = ((c - p).re * d.re + (c - p).im * d.im) / len2;
    let t = t.clamp(0.0, 1.0);
    (c - (p + d * t)).norm()
}

/// Signed winding number of a closed polyline about a point, by summation of
/// the turn angles subtended by successive vertices. Errors out when the
/// polyline passes within `eps` of the point (count would be unreliable).
pub fn winding_number(polyline: &[Complex64], about: Complex64, eps: f64) -> Result<i64> {
    if polyline.len() < 3 {
        return Err(Error::Dimension("winding number needs ≥ 3 vertices".into()));
    }
    let n = polyline.len();
    let mut total = 0.0_f64;
    for k in 0..n {
        let p = polyline[k];
        let q = polyline[(k + 1) % n];
        let d = dist_point_segment(about, p, q);
        if d < eps {
            return Err(Error::PointOnCurve { distance: d, epsilon: eps });
        }
        total += ((q - about) / (p - about)).arg();
    }
    Ok((total / std::f64::consts::TAU).round() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn simple_model(a: DMatrix<f64>) -> StateSpaceModel {
        let n = a.nrows();
        ModelBuilder::new(a, (0..n).map(|i| format!("x{i}")).collect())
            .input("u", DMatrix::identity(n, n))
            .output("y", DMatrix::identity(n, n))
            .build()
            .unwrap()
    }

    #[test]
    fn response_of_minus_identity_at_dc_is_identity() {
        let m = simple_model(-DMatrix::<f64>::identity(2, 2));
        let y = m.eval_response("u", "y", 0.0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(y[(i, j)].re, expect, epsilon = 1e-14);
                assert_abs_diff_eq!(y[(i, j)].im, 0.0, epsilon = 1e-14);
            }
        }
    }

    /// dq model of a series RL branch: admittance response must be the exact
    /// inverse of Z(jω) = (R+jωL)·I + ω₀L·J.
    #[test]
    fn rl_branch_admittance_inverts_analytic_impedance() {
        let (r, l, w0) = (0.4, 7e-3, TAU * 50.0);
        let a = DMatrix::from_row_slice(2, 2, &[-r / l, w0, -w0, -r / l]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0 / l, 0.0, 0.0, 1.0 / l]);
        let model = ModelBuilder::new(a, vec!["i_d".into(), "i_q".into()])
            .input("v", b)
            .output("i", DMatrix::identity(2, 2))
            .build()
            .unwrap();
        for f in [0.01, 1.0, 50.0, 317.0, 1e4] {
            let w = TAU * f;
            let y = model.eval_response("v", "i", w).unwrap();
            let z = DMatrix::from_row_slice(
                2,
                2,
                &[c(r, w * l), c(-w0 * l, 0.0), c(w0 * l, 0.0), c(r, w * l)],
            );
            let prod = &y * &z;
            for i in 0..2 {
                for j in 0..2 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (prod[(i, j)] - c(expect, 0.0)).norm() < 1e-10,
                        "Y·Z ≠ I at f = {f} Hz: {:?}",
                        prod[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn strictly_proper_response_rolls_off() {
        let a = DMatrix::from_row_slice(2, 2, &[-3.0, 1.0, 0.0, -5.0]);
        let rho = complex_eigenvalues(&a).unwrap().iter().map(|e| e.norm()).fold(0.0, f64::max);
        let m = simple_model(a);
        let y = m.eval_response("u", "y", 1e6 * rho).unwrap();
        let norm: f64 = y.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        assert!(norm < 1e-4, "‖H(jω)‖ = {norm} at 10⁶·ρ(A)");
    }

    #[test]
    fn resolvent_on_imaginary_axis_pole_errors() {
        // Undamped oscillator: eigenvalues ±j.
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let m = simple_model(a);
        match m.eval_response("u", "y", 1.0) {
            Err(Error::SingularResolvent { .. }) => {}
            other => panic!("expected singular resolvent, got {other:?}"),
        }
    }

    #[test]
    fn unknown_port_and_bad_dims_are_rejected() {
        let m = simple_model(-DMatrix::<f64>::identity(2, 2));
        assert!(matches!(m.eval_response("nope", "y", 1.0), Err(Error::UnknownPort { .. })));
        let bad = ModelBuilder::new(DMatrix::identity(2, 2), vec!["a".into(), "b".into()])
            .input("u", DMatrix::identity(3, 3))
            .build();
        assert!(matches!(bad, Err(Error::Dimension(_))));
    }

    #[test]
    fn eigen2_identity_and_diagonal() {
        let id = DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(1., 0.)]);
        let (l1, l2) = eigen2(&id);
        assert!((l1 - c(1., 0.)).norm() < 1e-15 && (l2 - c(1., 0.)).norm() < 1e-15);

        let d = DMatrix::from_row_slice(2, 2, &[c(3., 1.), c(0., 0.), c(0., 0.), c(-2., 4.)]);
        let (l1, l2) = eigen2(&d);
        let mut got = [l1, l2];
        got.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((got[0] - c(-2., 4.)).norm() < 1e-14);
        assert!((got[1] - c(3., 1.)).norm() < 1e-14);
    }

    #[test]
    fn eigen2_companion_of_quadratic() {
        // λ² + 3λ + 2 has roots −1, −2.
        let m = DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(-2., 0.), c(-3., 0.)]);
        let (l1, l2) = eigen2(&m);
        let mut got = [l1.re, l2.re];
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_abs_diff_eq!(got[0], -2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(got[1], -1.0, epsilon = 1e-14);
    }

    proptest! {
        /// λ₁+λ₂ = tr and λ₁·λ₂ = det for arbitrary finite 2×2 matrices.
        #[test]
        fn eigen2_trace_det_consistency(entries in prop::array::uniform8(-10f64..10.0)) {
            let m = DMatrix::from_row_slice(2, 2, &[
                c(entries[0], entries[1]), c(entries[2], entries[3]),
                c(entries[4], entries[5]), c(entries[6], entries[7]),
            ]);
            let (l1, l2) = eigen2(&m);
            let tr = m[(0,0)] + m[(1,1)];
            let det = m[(0,0)]*m[(1,1)] - m[(0,1)]*m[(1,0)];
            let scale = tr.norm().max(det.norm()).max(1.0);
            prop_assert!((l1 + l2 - tr).norm() <= crate::tol::EIGEN2_CONSISTENCY_REL * scale);
            prop_assert!((l1 * l2 - det).norm() <= crate::tol::EIGEN2_CONSISTENCY_REL * scale);
        }

        /// H(−jω) = conj(H(jω)) for real state-space models, by evaluation.
        #[test]
        fn conjugate_symmetry_of_real_models(
            diag in prop::array::uniform3(-9f64..-1.0),
            off in prop::array::uniform3(-1f64..1.0),
            w in 0.01f64..100.0,
        ) {
            let a = DMatrix::from_row_slice(3, 3, &[
                diag[0], off[0], 0.0,
                off[1], diag[1], off[2],
                0.0, 0.0, diag[2],
            ]);
            let m = simple_model(a);
            let hp = m.eval_response("u", "y", w).unwrap();
            let hm = m.eval_response("u", "y", -w).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!((hm[(i,j)] - hp[(i,j)].conj()).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sort_loci_constant_pair_and_single_point() {
        let om = vec![1.0, 2.0, 3.0];
        let pairs = vec![(c(2., 0.), c(5., 0.)); 3];
        let loci = sort_loci(om, pairs).unwrap();
        assert!(loci.lambda1.iter().all(|l| (l - c(2., 0.)).norm() < 1e-15));
        assert!(loci.lambda2.iter().all(|l| (l - c(5., 0.)).norm() < 1e-15));

        let single = sort_loci(vec![1.0], vec![(c(1., 1.), c(2., 2.))]).unwrap();
        assert_eq!(single.lambda1.len(), 1);
    }

    /// Two branches whose magnitudes cross but whose phases stay apart: the
    /// sorter must follow phase continuity through the magnitude crossing,
    /// even when the raw pairs arrive ordered by magnitude.
    #[test]
    fn sort_loci_untangles_magnitude_crossing() {
        let n = 200;
        let omega: Vec<f64> = (0..n).map(|k| 1.0 + k as f64 * 0.02).collect();
        let branch1: Vec<Complex64> =
            omega.iter().map(|&w| Complex64::from_polar(w, 0.2)).collect();
        let branch2: Vec<Complex64> =
            omega.iter().map(|&w| Complex64::from_polar(10.0 / w, 2.0)).collect();
        let scrambled: Vec<(Complex64, Complex64)> = branch1
            .iter()
            .zip(&branch2)
            .map(|(&a, &b)| if a.norm() <= b.norm() { (a, b) } else { (b, a) })
            .collect();
        let loci = sort_loci(omega, scrambled).unwrap();
        // Up to a global swap, each output locus is one synthetic branch.
        let first_is_b1 = (loci.lambda1[0] - branch1[0]).norm() < 1e-12;
        let (want1, want2) = if first_is_b1 { (&branch1, &branch2) } else { (&branch2, &branch1) };
        for k in 0..n {
            assert!((loci.lambda1[k] - want1[k]).norm() < 1e-12, "branch mixup at {k}");
            assert!((loci.lambda2[k] - want2[k]).norm() < 1e-12, "branch mixup at {k}");
        }
    }

    fn circle(center: Complex64, radius: f64, n: usize, loops: usize) -> Vec<Complex64> {
        (0..n * loops)
            .map(|k| center + Complex64::from_polar(radius, TAU * k as f64 / n as f64))
            .collect()
    }

    #[test]
    fn winding_counts_basic_curves() {
        let about = c(-1., 0.);
        let once = circle(about, 0.5, 256, 1);
        assert_eq!(winding_number(&once, about, 1e-6).unwrap().abs(), 1);

        let inside_unit = circle(c(0., 0.), 0.8, 256, 1);
        assert_eq!(winding_number(&inside_unit, about, 1e-6).unwrap(), 0);
    }

    #[test]
    fn winding_counts_double_loop() {
        // e^{j2θ} − 1 traverses the unit circle about −1 twice.
        let pts: Vec<Complex64> = (0..512)
            .map(|k| {
                let th = TAU * k as f64 / 512.0;
                Complex64::from_polar(1.0, 2.0 * th) - 1.0
            })
            .collect();
        assert_eq!(winding_number(&pts, c(-1., 0.), 1e-6).unwrap(), 2);
    }

    #[test]
    fn winding_point_on_curve_errors() {
        let pts = circle(c(0., 0.), 1.0, 128, 1);
        match winding_number(&pts, c(1., 0.), 1e-3) {
            Err(Error::PointOnCurve { .. }) => {}
            other => panic!("expected point-on-curve, got {other:?}"),
        }
    }

    proptest! {
        /// The integer count must not change under uniform resampling.
        #[test]
        fn winding_invariant_under_resampling(n in 64usize..256, r in 0.3f64..2.5) {
            let about = c(-1.0, 0.0);
            let center = c(-1.2, 0.4);
            // Skip radii that graze the test point.
            prop_assume!(((center - about).norm() - r).abs() > 0.05);
            let coarse = circle(center, r, n, 1);
            let fine = circle(center, r, 2 * n, 1);
            let wc = winding_number(&coarse, about, 1e-9).unwrap();
            let wf = winding_number(&fine, about, 1e-9).unwrap();
            prop_assert_eq!(wc, wf);
        }
    }

    #[test]
    fn mirror_closure_produces_conjugate_first_half() {
        let samples = vec![c(1., 1.), c(0.5, 0.2), c(0.1, 0.05)];
        let closed = mirror_closed(&samples);
        assert_eq!(closed.len(), 6);
        assert_eq!(closed[0], samples[2].conj());
        assert_eq!(closed[3], samples[0]);
    }

    #[test]
    fn transfer_samples_reject_bad_grids() {
        let v = vec![DMatrix::from_element(1, 1, c(1., 0.))];
        assert!(TransferSamples::new(vec![-1.0], v.clone()).is_err());
        let v2 = vec![
            DMatrix::from_element(1, 1, c(1., 0.)),
            DMatrix::from_element(1, 1, c(1., 0.)),
        ];
        assert!(TransferSamples::new(vec![2.0, 1.0], v2).is_err());
        assert!(TransferSamples::new(vec![1.0, 2.0], v).is_err());
    }

    #[test]
    fn default_grid_spans_and_counts() {
        let g = FrequencyGrid::default();
        let om = g.omegas();
        assert_eq!(om.len(), 601);
        assert_abs_diff_eq!(om[0], TAU * 1e-2, epsilon = 1e-9);
        assert_abs_diff_eq!(om[600], TAU * 1e4, epsilon = 1e-6);
        assert!(om.windows(2).all(|w| w[0] < w[1]));
    }
}
