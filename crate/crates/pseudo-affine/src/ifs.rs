//! Pseudo-affine branches `f_0, f_1` synthesized from a proportion pair.
//!
//! `f_i′ = λ` on the Cantor set and `f_i′ = λ + θ_i(w) ρ((t − a_w)/|I_w|)` on
//! the gap `I_w`, where ρ is a flat bump of unit integral. Then
//! `∫_{I_w} f_i′ = (λ + θ_i(w))|I_w| = |I_{iw}|`, so `f_0(t) = ∫_0^t f_0′` and
//! `f_1(t) = τ + ∫_0^t f_1′` map the Cantor set onto its two halves.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::{Arc, OnceLock};

use serde_json::{json, Value};

use crate::cantor::{realize, GapTable, MAX_DESCENT};
use crate::error::{Error, Result};
use crate::proportions::{decay_envelope, ProportionPair};
use crate::scalar::{fmt17, Compensated, Scalar};
use crate::words::Word;

/// Number of intervals of the cumulative table.
pub const CUMULATIVE_INTERVALS: usize = 4096;

/// Highest derivative order with a tabulated sup-norm.
pub const SUP_NORM_ORDER: usize = 4;

const GAUSS_POINTS: usize = 10;

fn raw_bump(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        (-1.0 / (t * (1.0 - t))).exp()
    }
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(
        f: &impl Fn(f64) -> f64,
        (a, b): (f64, f64),
        (fa, fm, fb): (f64, f64, f64),
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(a, m, fa, flm, fm);
        let right = simpson(m, b, fm, frm, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, (a, m), (fa, flm, fm), left, tol / 2.0, depth - 1)
                + rec(f, (m, b), (fm, frm, fb), right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    rec(f, (a, b), (fa, fm, fb), whole, tol, 50)
}

/// Gauss–Legendre nodes and weights on [−1, 1], by Newton iteration on `P_n`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Polynomials `p_k` with `ρ^{(k)}(t) = p_k(t) q^{−2k} e^{−1/q} / norm`,
/// `q = t − t²`, via `p_{k+1} = p_k′ q² − 2k p_k q q′ + p_k q′`.
fn derivative_polys(order: usize) -> Vec<Vec<f64>> {
    fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    }
    fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len().max(b.len())];
        for (i, x) in a.iter().enumerate() {
            out[i] += x;
        }
        for (i, x) in b.iter().enumerate() {
            out[i] += x;
        }
        out
    }
    let q = [0.0, 1.0, -1.0];
    let dq = [1.0, -2.0];
    let q2 = mul(&q, &q);
    let mut polys = vec![vec![1.0]];
    for k in 0..order {
        let p = &polys[k];
        let dp: Vec<f64> = if p.len() > 1 { (1..p.len()).map(|j| j as f64 * p[j]).collect() } else { vec![0.0] };
        let t1 = mul(&dp, &q2);
        let t2: Vec<f64> = mul(&mul(p, &q), &dq).iter().map(|c| -2.0 * k as f64 * c).collect();
        let t3 = mul(p, &dq);
        polys.push(add(&add(&t1, &t2), &t3));
    }
    polys
}

fn horner(p: &[f64], t: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

/// The flat bump `ρ(t) ∝ exp(−1/(t(1−t)))` of unit integral, with a
/// tabulated cumulative `R(s) = ∫_0^s ρ`.
#[derive(Debug)]
pub struct BumpProfile {
    norm: f64,
    nodes: Vec<f64>,
    cumulative: Vec<f64>,
    slopes: Vec<(f64, f64)>,
    polys: Vec<Vec<f64>>,
    sup_norms: Vec<f64>,
    cumulative_error: f64,
}

impl BumpProfile {
    pub fn build() -> Self {
        let norm = adaptive_simpson(&raw_bump, 0.0, 1.0, 1e-14);
        let n = CUMULATIVE_INTERVALS;
        let nodes: Vec<f64> = (0..=n).map(|k| 0.5 * (1.0 - (PI * k as f64 / n as f64).cos())).collect();
        let gl = gauss_legendre(GAUSS_POINTS);
        let integrate = |a: f64, b: f64| {
            let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
            h * gl.iter().map(|&(x, w)| w * raw_bump(m + h * x)).sum::<f64>()
        };
        let mut cumulative = Vec::with_capacity(n + 1);
        let mut acc = Compensated::new();
        cumulative.push(0.0);
        for k in 0..n {
            acc.add(integrate(nodes[k], nodes[k + 1]) / norm);
            cumulative.push(acc.value());
        }
        let end = cumulative[n];
        cumulative[n] = 1.0;
        let rho = |t: f64| raw_bump(t) / norm;
        // Exact end slopes, limited per interval (Fritsch–Carlson) so the
        // Hermite interpolant stays monotone.
        let slopes: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let h = nodes[k + 1] - nodes[k];
                let delta = (cumulative[k + 1] - cumulative[k]) / h;
                let (mut m0, mut m1) = (rho(nodes[k]), rho(nodes[k + 1]));
                if delta <= 0.0 {
                    return (0.0, 0.0);
                }
                let (a, b) = (m0 / delta, m1 / delta);
                let r = a * a + b * b;
                if r > 9.0 {
                    let s = 3.0 / r.sqrt();
                    m0 = s * a * delta;
                    m1 = s * b * delta;
                }
                (m0, m1)
            })
            .collect();
        let polys = derivative_polys(SUP_NORM_ORDER);
        let mut profile = Self { norm, nodes, cumulative, slopes, polys, sup_norms: Vec::new(), cumulative_error: 0.0 };
        let grid = 20_000;
        profile.sup_norms = (0..=SUP_NORM_ORDER)
            .map(|k| (0..=grid).map(|j| profile.derivative(k, j as f64 / grid as f64).abs()).fold(0.0, f64::max))
            .collect();
        // Interpolation error probed at interval midpoints against quadrature.
        let mut worst: f64 = (end - 1.0).abs();
        for k in 0..n {
            let m = 0.5 * (profile.nodes[k] + profile.nodes[k + 1]);
            let exact = profile.cumulative[k] + integrate(profile.nodes[k], m) / norm;
            worst = worst.max((profile.cumulative(m) - exact).abs());
        }
        profile.cumulative_error = 2.0 * worst + 1e-15;
        profile
    }

    /// The shared default profile.
    pub fn standard() -> Arc<Self> {
        static PROFILE: OnceLock<Arc<BumpProfile>> = OnceLock::new();
        Arc::clone(PROFILE.get_or_init(|| Arc::new(Self::build())))
    }

    /// `∫_0^1 exp(−1/(t(1−t))) dt`.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// `ρ(t)`, zero outside (0, 1).
    pub fn value(&self, t: f64) -> f64 {
        raw_bump(t) / self.norm
    }

    /// `ρ^{(k)}(t)` for `k <= SUP_NORM_ORDER`.
    pub fn derivative(&self, k: usize, t: f64) -> f64 {
        assert!(k < self.polys.len(), "derivative order {k} not tabulated");
        if t <= 0.0 || t >= 1.0 {
            return 0.0;
        }
        let q = t * (1.0 - t);
        let e = (-1.0 / q).exp();
        if e == 0.0 {
            return 0.0;
        }
        horner(&self.polys[k], t) * q.powi(-2 * k as i32) * e / self.norm
    }

    /// `R(s) = ∫_0^s ρ`, monotone, with `R(0) = 0` and `R(1) = 1`.
    pub fn cumulative(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return 1.0;
        }
        let k = self.nodes.partition_point(|&x| x <= s).saturating_sub(1).min(CUMULATIVE_INTERVALS - 1);
        let (x0, x1) = (self.nodes[k], self.nodes[k + 1]);
        let h = x1 - x0;
        let u = (s - x0) / h;
        let (y0, y1) = (self.cumulative[k], self.cumulative[k + 1]);
        let (m0, m1) = self.slopes[k];
        let u2 = u * u;
        let u3 = u2 * u;
        let v = (2.0 * u3 - 3.0 * u2 + 1.0) * y0
            + (u3 - 2.0 * u2 + u) * h * m0
            + (-2.0 * u3 + 3.0 * u2) * y1
            + (u3 - u2) * h * m1;
        v.clamp(y0.min(y1), y0.max(y1))
    }

    /// `sup |ρ^{(k)}|` for `k = 0..=SUP_NORM_ORDER`, on a uniform grid.
    pub fn sup_norms(&self) -> &[f64] {
        &self.sup_norms
    }

    /// Bound on `|R_tabulated − R|`.
    pub fn cumulative_error(&self) -> f64 {
        self.cumulative_error
    }
}

/// The branches `f_0, f_1`.
#[derive(Debug, Clone)]
pub struct IfsBranchPair<T> {
    table: GapTable<T>,
    profile: Arc<BumpProfile>,
    tau: T,
    tol: T,
}

/// Builds the branches of `p` over a gap table of depth `depth`.
///
/// The represented maps are the untruncated ones: evaluation descends below
/// the stored table through the closed-form geometry as far as `tol` needs.
pub fn build_branches<T: Scalar>(p: &ProportionPair<T>, depth: usize, tol: T) -> Result<IfsBranchPair<T>> {
    let table = realize(p, depth, tol)?;
    IfsBranchPair::new(table, BumpProfile::standard(), tol)
}

impl<T: Scalar> IfsBranchPair<T> {
    pub fn new(table: GapTable<T>, profile: Arc<BumpProfile>, tol: T) -> Result<Self> {
        if !(tol > T::zero()) {
            return Err(Error::Domain(format!("tol = {tol} must be positive")));
        }
        let g = table.geometry();
        let tau = T::one() - table.lambda() - g.scale() * g.theta_mass(1, &[]);
        Ok(Self { table, profile, tau, tol })
    }

    pub fn lambda(&self) -> T {
        self.table.lambda()
    }

    pub fn tau(&self) -> T {
        self.tau
    }

    pub fn tol(&self) -> T {
        self.tol
    }

    pub fn depth(&self) -> usize {
        self.table.depth()
    }

    pub fn table(&self) -> &GapTable<T> {
        &self.table
    }

    pub fn pair(&self) -> &ProportionPair<T> {
        self.table.pair()
    }

    pub fn profile(&self) -> &BumpProfile {
        &self.profile
    }

    /// `sup_t f_i′(t)` bound: `λ + sup |θ| · ‖ρ‖_∞`.
    pub fn derivative_bound(&self) -> Result<T> {
        let p = self.pair();
        let theta_e = p.theta(0, &[]).abs().max(p.theta(1, &[]).abs());
        let sup = theta_e.max(decay_envelope(p, 0)?);
        Ok(self.lambda() + sup * T::lit(self.profile.sup_norms()[0]))
    }

    fn check_point(t: T) -> Result<()> {
        if t >= T::zero() && t <= T::one() {
            Ok(())
        } else {
            Err(Error::Domain(format!("t = {t} is outside [0, 1]")))
        }
    }

    /// `f_i(t)` to within `tol`.
    ///
    /// Walks down the cylinders containing `t`, adding `∫ θ_i ρ` over every
    /// gap left of `t` through the aggregated masses `Q_i`; stops inside the
    /// gap containing `t`, or once the remaining `L·Q_i` is below `tol / 2`.
    pub fn eval(&self, i: u8, t: T, tol: T) -> Result<T> {
        Self::check_point(t)?;
        if i > 1 {
            return Err(Error::Domain(format!("branch index {i} is not 0 or 1")));
        }
        let g = self.table.geometry();
        let p = self.pair();
        let l = g.scale();
        let half = T::lit(0.5);
        let floor = T::lit(8.0) * T::epsilon();
        let mut v: Vec<u8> = Vec::new();
        let mut left = Compensated::new();
        let mut acc = Compensated::new();
        let mut done = false;
        for _ in 0..MAX_DESCENT {
            let bound = g.theta_mass_bound(i, &v);
            if bound == T::zero() {
                done = true;
                break;
            }
            if l * bound <= (tol * half).max(floor) {
                let mass = g.mass(&v);
                let frac = ((t / l - left.value()) / mass).max(T::zero()).min(T::one());
                acc.add(g.theta_mass(i, &v) * frac);
                done = true;
                break;
            }
            let mut zero = v.clone();
            zero.push(0);
            let m0 = g.mass(&zero);
            let gap = g.psi(&v);
            let a = l * (left.value() + m0);
            let b = a + l * gap;
            if t < a {
                v = zero;
            } else if t <= b {
                let s = if b > a { ((t - a) / (b - a)).as_f64() } else { 0.0 };
                acc.add(g.theta_mass(i, &zero));
                acc.add(p.theta(i, &v) * gap * T::lit(self.profile.cumulative(s)));
                done = true;
                break;
            } else {
                acc.add(g.theta_mass(i, &zero) + p.theta(i, &v) * gap);
                left.add(m0);
                left.add(gap);
                v.push(1);
            }
        }
        if !done {
            return Err(Error::Capacity(format!("f_{i}({t}) did not reach tol {tol:e}")));
        }
        let base = self.lambda() * t + l * acc.value();
        Ok(if i == 1 { self.tau + base } else { base })
    }

    /// `f_i′(t)`: exact in gaps reached by the descent, `λ` on the Cantor
    /// set and wherever the remaining θ is below `tol / ‖ρ‖_∞`.
    pub fn eval_derivative(&self, i: u8, t: T, tol: T) -> Result<T> {
        Self::check_point(t)?;
        let g = self.table.geometry();
        let p = self.pair();
        let l = g.scale();
        let lambda = self.lambda();
        let rho_max = T::lit(self.profile.sup_norms()[0]);
        let mut v: Vec<u8> = Vec::new();
        let mut left = T::zero();
        for _ in 0..MAX_DESCENT {
            if g.theta_mass_bound(i, &v) == T::zero() {
                return Ok(lambda);
            }
            if !v.is_empty() && decay_envelope(p, v.len() - 1)? * rho_max <= tol {
                return Ok(lambda);
            }
            let mut zero = v.clone();
            zero.push(0);
            let m0 = g.mass(&zero);
            let gap = g.psi(&v);
            let a = l * (left + m0);
            let b = a + l * gap;
            if t < a {
                v = zero;
            } else if t <= b {
                let s = if b > a { ((t - a) / (b - a)).as_f64() } else { 0.0 };
                return Ok(lambda + p.theta(i, &v) * T::lit(self.profile.value(s)));
            } else {
                left = left + m0 + gap;
                v.push(1);
            }
        }
        Ok(lambda)
    }

    /// Writes `t,f0,f1,df0,df1` on the given grid.
    pub fn write_graph_csv<W: Write>(&self, out: W, grid: &[T]) -> Result<()> {
        let io = |e: csv::Error| Error::Capability(format!("csv output failed: {e}"));
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["t", "f0", "f1", "df0", "df1"]).map_err(io)?;
        for &t in grid {
            wtr.write_record([
                fmt17(t),
                fmt17(self.eval(0, t, self.tol)?),
                fmt17(self.eval(1, t, self.tol)?),
                fmt17(self.eval_derivative(0, t, self.tol)?),
                fmt17(self.eval_derivative(1, t, self.tol)?),
            ])
            .map_err(io)?;
        }
        wtr.flush().map_err(|e| Error::Capability(format!("csv output failed: {e}")))?;
        Ok(())
    }

    /// Proportion JSON plus depth and tolerance; enough to rebuild the pair.
    pub fn to_json(&self) -> Result<Value> {
        Ok(json!({
            "proportions": self.pair().to_json()?,
            "depth": self.depth(),
            "tol": self.tol.as_f64(),
            "tau": self.tau.as_f64(),
        }))
    }

    pub fn from_json(doc: &Value) -> Result<Self> {
        let p = ProportionPair::from_json(&doc["proportions"])?;
        let depth = doc["depth"].as_u64().ok_or_else(|| Error::Parse("missing \"depth\"".into()))? as usize;
        let tol = doc["tol"].as_f64().ok_or_else(|| Error::Parse("missing \"tol\"".into()))?;
        build_branches(&p, depth, T::lit(tol))
    }
}

/// `sup_w |θ_i(w)| / |I_w|^{r−1+α}` over the stored rows.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularityReport<T> {
    pub ratio_sup: T,
    pub witness: Word,
    /// The supremum restricted to each word length.
    pub per_level: Vec<T>,
}

pub fn regularity_report<T: Scalar>(branches: &IfsBranchPair<T>, r: u32, alpha: T) -> RegularityReport<T> {
    let exponent = T::from_u32(r).unwrap() - T::one() + alpha;
    let p = branches.pair();
    let mut per_level = vec![T::zero(); branches.depth() + 1];
    let mut best = (T::zero(), Word::empty());
    for (w, gap) in branches.table().rows() {
        let theta = p.theta(0, w.letters()).abs().max(p.theta(1, w.letters()).abs());
        let ratio = theta / gap.length.powf(exponent);
        let level = &mut per_level[w.len()];
        *level = level.max(ratio);
        if ratio > best.0 || (ratio == best.0 && w.len() < best.1.len()) {
            best = (ratio, w);
        }
    }
    RegularityReport { ratio_sup: best.0, witness: best.1, per_level }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor::CantorGeometry;
    use crate::examples::{as_proportions, gen_case_a, gen_case_b, Regularity};
    use crate::words::{sample_codings, Coding};
    use approx::assert_relative_eq;

    fn case_a2() -> ProportionPair<f64> {
        as_proportions(gen_case_a(0.3, Regularity::Finite(2.0), 30).unwrap())
    }

    fn case_b2() -> ProportionPair<f64> {
        as_proportions(gen_case_b(0.3, Regularity::Finite(2.0), 0.2, 30).unwrap())
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let gl = gauss_legendre(GAUSS_POINTS);
        let weights: f64 = gl.iter().map(|p| p.1).sum();
        assert_relative_eq!(weights, 2.0, max_relative = 1e-14);
        // ∫_{-1}^{1} x^18 = 2/19
        let m: f64 = gl.iter().map(|&(x, w)| w * x.powi(18)).sum();
        assert_relative_eq!(m, 2.0 / 19.0, max_relative = 1e-13);
    }

    #[test]
    fn profile_is_normalized() {
        let b = BumpProfile::standard();
        // Independent oracle: composite midpoint rule on a fine grid.
        let n = 200_000;
        let mid: f64 = (0..n).map(|k| raw_bump((k as f64 + 0.5) / n as f64)).sum::<f64>() / n as f64;
        assert_relative_eq!(b.norm(), mid, max_relative = 1e-10);
        assert_eq!(b.cumulative(0.0), 0.0);
        assert_eq!(b.cumulative(1.0), 1.0);
        assert_relative_eq!(b.cumulative(0.5), 0.5, max_relative = 1e-12);
        assert!(b.cumulative_error() < 1e-11);
    }

    #[test]
    fn cumulative_is_monotone_and_symmetric() {
        let b = BumpProfile::standard();
        let mut prev = 0.0;
        for k in 0..=10_000 {
            let s = k as f64 / 10_000.0;
            let r = b.cumulative(s);
            assert!(r >= prev);
            assert!((r + b.cumulative(1.0 - s) - 1.0).abs() < 1e-11);
            prev = r;
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let b = BumpProfile::standard();
        let h = 1e-6;
        for &t in &[0.2, 0.35, 0.5, 0.71] {
            for k in 0..SUP_NORM_ORDER {
                let fd = (b.derivative(k, t + h) - b.derivative(k, t - h)) / (2.0 * h);
                assert_relative_eq!(b.derivative(k + 1, t), fd, max_relative = 1e-5, epsilon = 1e-6);
            }
            assert_relative_eq!(b.derivative(0, t), b.value(t), max_relative = 1e-15);
        }
        assert!(b.sup_norms()[0] > 2.0 && b.sup_norms()[0] < 3.0);
    }

    #[test]
    fn zero_theta_is_affine() {
        let br = build_branches(&ProportionPair::constant(0.3).unwrap(), 6, 1e-12).unwrap();
        assert_relative_eq!(br.tau(), 0.7, max_relative = 1e-14);
        for &t in &[0.0, 0.1, 0.5, 0.93, 1.0] {
            assert_relative_eq!(br.eval(0, t, 1e-12).unwrap(), 0.3 * t, max_relative = 1e-14, epsilon = 1e-16);
            assert_relative_eq!(br.eval(1, t, 1e-12).unwrap(), 0.7 + 0.3 * t, max_relative = 1e-14);
            assert_eq!(br.eval_derivative(0, t, 1e-12).unwrap(), 0.3);
        }
        let m = build_branches(&ProportionPair::constant(1.0 / 3.0).unwrap(), 4, 1e-12).unwrap();
        assert_relative_eq!(m.eval(1, 0.5, 1e-12).unwrap(), 2.0 / 3.0 + 0.5 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn anchors() {
        for p in [case_a2(), case_b2()] {
            let br = build_branches(&p, 8, 1e-12).unwrap();
            assert_eq!(br.eval(0, 0.0, 1e-12).unwrap(), 0.0);
            assert!((br.eval(1, 1.0, 1e-12).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tau_matches_quadrature() {
        // τ = 1 − ∫_0^1 f_1′, with the integral done by brute-force midpoint
        // sums over the stored gaps plus λ on the rest.
        let p = case_a2();
        let br = build_branches(&p, 12, 1e-12).unwrap();
        let mut integral = 0.3;
        for (w, gap) in br.table().rows() {
            let n = 64;
            let h = gap.length / n as f64;
            let bumps: f64 =
                (0..n).map(|k| br.eval_derivative(1, gap.a + (k as f64 + 0.5) * h, 1e-14).unwrap() - 0.3).sum();
            integral += bumps * h;
            let _ = w;
        }
        // depth-12 truncation leaves at most the θ-mass below level 12
        assert!((1.0 - integral - br.tau()).abs() < 1e-7);
    }

    #[test]
    fn derivative_examples() {
        let a = build_branches(&case_a2(), 4, 1e-12).unwrap();
        let e = a.table().gap(&Word::empty()).unwrap();
        let mid = 0.5 * (e.a + e.b);
        assert_eq!(a.eval_derivative(0, mid, 1e-12).unwrap(), 0.3);
        let b = build_branches(&case_b2(), 4, 1e-12).unwrap();
        let e = b.table().gap(&Word::empty()).unwrap();
        let mid = 0.5 * (e.a + e.b);
        let expect = 0.3 + 0.2 * b.profile().value(0.5);
        assert_relative_eq!(b.eval_derivative(1, mid, 1e-12).unwrap(), expect, max_relative = 1e-12);
        assert_eq!(b.eval_derivative(0, mid, 1e-12).unwrap(), 0.3);
        // gap endpoints are Cantor points
        for (_, g) in b.table().rows() {
            assert_eq!(b.eval_derivative(1, g.a, 1e-12).unwrap(), 0.3);
        }
    }

    #[test]
    fn gap_integrals_are_proportions() {
        for p in [case_a2(), case_b2()] {
            let br = build_branches(&p, 8, 1e-12).unwrap();
            for (w, gap) in br.table().rows() {
                for i in 0..2 {
                    let lhs = br.eval(i, gap.b, 1e-13).unwrap() - br.eval(i, gap.a, 1e-13).unwrap();
                    let rhs = (0.3 + p.theta(i, w.letters())) * gap.length;
                    assert!((lhs - rhs).abs() < 1e-12, "{w} {i}: {lhs} vs {rhs}");
                }
            }
        }
    }

    #[test]
    fn invariance_on_sampled_codings() {
        let tol = 1e-8;
        for p in [case_a2(), case_b2()] {
            let br = build_branches(&p, 10, 1e-12).unwrap();
            let g: &CantorGeometry<f64> = br.table().geometry();
            for a in sample_codings(7, 100, 6, 4) {
                let x = g.embed(&a, tol).unwrap();
                for i in 0..2 {
                    let image = g.embed(&a.prepend(i), tol).unwrap();
                    let fx = br.eval(i, x, tol).unwrap();
                    assert!((fx - image).abs() <= 3.0 * tol, "{a} {i}");
                }
            }
            let _ = Coding::constant(0);
        }
    }

    #[test]
    fn monotone_on_a_grid() {
        for p in [case_a2(), case_b2()] {
            let br = build_branches(&p, 8, 1e-10).unwrap();
            for i in 0..2 {
                let mut prev = -1.0;
                for k in 0..=2000 {
                    let t = k as f64 / 2000.0;
                    let f = br.eval(i, t, 1e-12).unwrap();
                    assert!(f > prev);
                    prev = f;
                    assert!(br.eval_derivative(i, t, 1e-12).unwrap() > 0.0);
                }
            }
        }
    }

    #[test]
    fn contraction_depends_on_parameters() {
        // ε_1 = λ = 0.3 and ‖ρ‖_∞ ≈ 2.6 push f′ above 1 in the level-1 gaps.
        let a = build_branches(&case_a2(), 6, 1e-10).unwrap();
        assert!(a.derivative_bound().unwrap() > 1.0);
        let e = a.table().gap(&Word::new(vec![0]).unwrap()).unwrap();
        assert!(a.eval_derivative(0, 0.5 * (e.a + e.b), 1e-12).unwrap() > 1.0);
        let b = build_branches(&case_b2(), 6, 1e-10).unwrap();
        let bound = b.derivative_bound().unwrap();
        assert!(bound < 1.0);
        for k in 0..=2000 {
            let d = b.eval_derivative(1, k as f64 / 2000.0, 1e-12).unwrap();
            assert!(d <= bound + 1e-12);
        }
    }

    #[test]
    fn derivative_consistency_in_gap_interiors() {
        let br = build_branches(&case_b2(), 6, 1e-12).unwrap();
        let h = 1e-5;
        for (w, gap) in br.table().rows().into_iter().filter(|(w, _)| w.len() <= 2) {
            for frac in [0.3, 0.5, 0.6] {
                let t = gap.a + frac * gap.length;
                for i in 0..2 {
                    let fd = (br.eval(i, t + h, 1e-15).unwrap() - br.eval(i, t - h, 1e-15).unwrap()) / (2.0 * h);
                    let d = br.eval_derivative(i, t, 1e-15).unwrap();
                    assert_relative_eq!(fd, d, max_relative = 1e-6);
                    let _ = &w;
                }
            }
        }
    }

    #[test]
    fn regularity_probe() {
        let zero = build_branches(&ProportionPair::constant(0.3).unwrap(), 6, 1e-12).unwrap();
        assert_eq!(regularity_report(&zero, 1, 1.0).ratio_sup, 0.0);
        let a = build_branches(&case_a2(), 10, 1e-12).unwrap();
        let flat = regularity_report(&a, 1, 1.0);
        for &v in &flat.per_level[1..] {
            assert_relative_eq!(v, 1.0 / a.table().scale(), max_relative = 1e-10);
        }
        let steep = regularity_report(&a, 2, 0.5);
        for pair in steep.per_level[1..].windows(2) {
            assert!(pair[1] > pair[0]);
        }
        assert_eq!(steep.witness.len(), 10);
    }

    #[test]
    fn graph_export_and_json() {
        let br = build_branches(&case_b2(), 5, 1e-10).unwrap();
        let mut buf = Vec::new();
        br.write_graph_csv(&mut buf, &[0.0, 0.5, 1.0]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        let doc = br.to_json().unwrap();
        let back = IfsBranchPair::<f64>::from_json(&doc).unwrap();
        assert_eq!(back.tau(), br.tau());
    }

    #[test]
    fn out_of_range_points_are_rejected() {
        let br = build_branches(&case_a2(), 4, 1e-10).unwrap();
        assert!(br.eval(0, 1.5, 1e-10).is_err());
        assert!(br.eval_derivative(0, -0.1, 1e-10).is_err());
    }
}
