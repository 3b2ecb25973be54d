//! Diagnostics on branch pairs and proportion systems: periodic points and
//! the Livsic test, pseudo-affinity estimates, χ traces, and the affine
//! linearization of a contraction fixing 0.

use std::io::Write;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::cantor::{proportions_of, GapTable};
use crate::error::{Error, Result};
use crate::ifs::IfsBranchPair;
use crate::proportions::ProportionPair;
use crate::scalar::{fmt17, Scalar};
use crate::words::{words_of_length, Coding, Word};

/// Anything that can evaluate two branches and their derivatives on [0, 1].
pub trait BranchPair<T: Scalar>: Sync {
    fn eval(&self, i: u8, t: T) -> Result<T>;
    fn derivative(&self, i: u8, t: T) -> Result<T>;
}

impl<T: Scalar> BranchPair<T> for IfsBranchPair<T> {
    fn eval(&self, i: u8, t: T) -> Result<T> {
        IfsBranchPair::eval(self, i, t, self.tol())
    }

    fn derivative(&self, i: u8, t: T) -> Result<T> {
        self.eval_derivative(i, t, self.tol())
    }
}

pub type BranchFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// A user-supplied map with its derivative.
#[derive(Clone)]
pub struct ExternalBranch<T> {
    f: BranchFn<T>,
    df: BranchFn<T>,
}

impl<T> std::fmt::Debug for ExternalBranch<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ExternalBranch")
    }
}

impl<T: Scalar> ExternalBranch<T> {
    pub fn new(f: impl Fn(T) -> T + Send + Sync + 'static, df: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f), df: Arc::new(df) }
    }

    /// `t ↦ slope·t + offset`.
    pub fn affine(slope: T, offset: T) -> Self {
        Self::new(move |t| slope * t + offset, move |_| slope)
    }

    pub fn eval(&self, t: T) -> T {
        (self.f)(t)
    }

    pub fn derivative(&self, t: T) -> T {
        (self.df)(t)
    }
}

/// Two external branches.
#[derive(Clone, Debug)]
pub struct ExternalPair<T> {
    pub branches: [ExternalBranch<T>; 2],
}

impl<T: Scalar> ExternalPair<T> {
    pub fn new(f0: ExternalBranch<T>, f1: ExternalBranch<T>) -> Self {
        Self { branches: [f0, f1] }
    }

    /// `f_0 = s_0 t`, `f_1 = 1 − s_1 (1 − t)`.
    pub fn affine(s0: T, s1: T) -> Self {
        Self::new(ExternalBranch::affine(s0, T::zero()), ExternalBranch::affine(s1, T::one() - s1))
    }

    pub fn self_similar(lambda: T) -> Self {
        Self::affine(lambda, lambda)
    }
}

impl<T: Scalar> BranchPair<T> for ExternalPair<T> {
    fn eval(&self, i: u8, t: T) -> Result<T> {
        Ok(self.branches[i as usize].eval(t))
    }

    fn derivative(&self, i: u8, t: T) -> Result<T> {
        Ok(self.branches[i as usize].derivative(t))
    }
}

/// `F_w = f_{w_1} ∘ ⋯ ∘ f_{w_n}` at `x`.
pub fn compose<T: Scalar>(br: &impl BranchPair<T>, w: &Word, x: T) -> Result<T> {
    w.letters().iter().rev().try_fold(x, |y, &i| br.eval(i, y))
}

/// `F_w′(x)` by the chain rule along `x, f_{w_n}(x), …`.
pub fn derivative_along<T: Scalar>(br: &impl BranchPair<T>, w: &Word, x: T) -> Result<T> {
    let mut y = x;
    let mut product = T::one();
    for &i in w.letters().iter().rev() {
        product *= br.derivative(i, y)?;
        y = br.eval(i, y)?;
    }
    Ok(product)
}

/// The fixed point `x_w` of `F_w` and `F_w′(x_w)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicPoint<T> {
    pub word: Word,
    pub point: T,
    pub derivative_product: T,
}

const FIXED_POINT_CAP: usize = 10_000;

pub fn fixed_point<T: Scalar>(br: &impl BranchPair<T>, w: &Word, tol: T) -> Result<PeriodicPoint<T>> {
    if w.is_empty() {
        return Err(Error::Domain("fixed points need a nonempty word".into()));
    }
    let tol = tol.max(T::lit(4.0) * T::epsilon());
    let step = |x: T| -> Result<T> {
        let y = compose(br, w, x)?;
        if !(y >= T::zero() && y <= T::one()) {
            return Err(Error::Domain(format!("F_{w} leaves [0, 1] ({y})")));
        }
        Ok(y)
    };
    let mut orbit = vec![T::lit(0.5)];
    for _ in 0..3 {
        let x = *orbit.last().unwrap();
        orbit.push(step(x)?);
    }
    let diffs: Vec<T> = orbit.windows(2).map(|p| (p[1] - p[0]).abs()).collect();
    let mut x = orbit[3];
    let mu = if diffs[0] == T::zero() {
        x = orbit[0];
        T::zero()
    } else if diffs[1] == T::zero() || diffs[2] == T::zero() {
        T::zero()
    } else {
        (diffs[1] / diffs[0]).max(diffs[2] / diffs[1])
    };
    if mu >= T::one() {
        return Err(Error::Domain(format!("F_{w} does not contract (observed ratio {mu})")));
    }
    if mu > T::zero() && diffs[2] >= tol * (T::one() - mu) {
        let budget = (tol.ln() / mu.ln()).ceil().to_usize().unwrap_or(FIXED_POINT_CAP).min(FIXED_POINT_CAP) + 10;
        let mut converged = false;
        let mut last = diffs[2];
        for _ in 0..budget {
            let y = step(x)?;
            last = (y - x).abs();
            x = y;
            if last < tol * (T::one() - mu) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence { iterations: budget, residual: last.as_f64() });
        }
    }
    let derivative_product = derivative_along(br, w, x)?;
    if !(derivative_product > T::zero() && derivative_product < T::one()) {
        return Err(Error::Domain(format!("F_{w}′ = {derivative_product} at its fixed point")));
    }
    Ok(PeriodicPoint { word: w.clone(), point: x, derivative_product })
}

/// Periodic derivatives against powers of `λ̂ = f_0′(0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LivsicReport<T> {
    pub lambda_hat: T,
    pub max_len: usize,
    /// Word with the largest per-letter log deviation, shortest on ties.
    pub worst_word: Word,
    /// `|ln F_w′(x_w) − |w| ln λ̂| / |w|` at `worst_word`.
    pub worst_dev: T,
    /// `max_w |F_w′(x_w) − λ̂^{|w|}| / λ̂^{|w|}`.
    pub max_product_dev: T,
    pub pass: bool,
    pub words_checked: usize,
}

impl<T: Scalar> LivsicReport<T> {
    pub fn to_json(&self) -> Value {
        json!({
            "lambda_hat": self.lambda_hat.as_f64(),
            "max_len": self.max_len,
            "worst_word": self.worst_word.to_string(),
            "worst_dev": self.worst_dev.as_f64(),
            "max_product_dev": self.max_product_dev.as_f64(),
            "pass": self.pass,
            "words_checked": self.words_checked,
        })
    }
}

/// Checks `F_w′(x_w) = λ̂^{|w|}` within `rel_tol` for all `1 <= |w| <= max_len`.
pub fn livsic_check<T: Scalar>(br: &impl BranchPair<T>, max_len: usize, rel_tol: T) -> Result<LivsicReport<T>> {
    let tol = T::lit(1e-13).max(T::lit(16.0) * T::epsilon());
    let lambda_hat = fixed_point(br, &Word::new(vec![0])?, tol)?.derivative_product;
    let ln_lambda = lambda_hat.ln();
    let mut worst = (T::zero(), Word::new(vec![0])?);
    let mut max_product_dev = T::zero();
    let mut count = 0;
    for n in 1..=max_len {
        let target = lambda_hat.powi(n as i32);
        for w in words_of_length(n) {
            let product = fixed_point(br, &w, tol)?.derivative_product;
            count += 1;
            max_product_dev = max_product_dev.max((product - target).abs() / target);
            let dev = (product.ln() - T::from_usize(n).unwrap() * ln_lambda).abs() / T::from_usize(n).unwrap();
            // Words are visited shortest first; near-ties keep the earlier one.
            if dev > worst.0 * (T::one() + T::lit(1e-9)) {
                worst = (dev, w);
            }
        }
    }
    Ok(LivsicReport {
        lambda_hat,
        max_len,
        worst_word: worst.1,
        worst_dev: worst.0,
        max_product_dev,
        pass: max_product_dev <= rel_tol,
        words_checked: count,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PseudoAffinityReport<T> {
    /// `max |f_i′(x) − λ|` over the realized gap endpoints with `|w| <= max_len`.
    pub max_dev: T,
    /// `per_level[n] = max_{|w| = n, i} | |I_{iw}|/|I_w| − λ |`.
    pub per_level: Vec<T>,
}

pub fn pseudo_affinity_report<T: Scalar>(
    br: &impl BranchPair<T>,
    table: &GapTable<T>,
    max_len: usize,
) -> Result<PseudoAffinityReport<T>> {
    if table.depth() < max_len + 1 {
        return Err(Error::DepthExceeded { requested: max_len + 1, available: table.depth() });
    }
    let lambda = table.lambda();
    let mut per_level = Vec::with_capacity(max_len + 1);
    let mut max_dev = T::zero();
    for n in 0..=max_len {
        let mut level = T::zero();
        for w in words_of_length(n) {
            for i in 0..2 {
                level = level.max((proportions_of(table, i, &w)? - lambda).abs());
            }
            let gap = table.gap(&w)?;
            for x in [gap.a, gap.b] {
                for i in 0..2 {
                    max_dev = max_dev.max((br.derivative(i, x)? - lambda).abs());
                }
            }
        }
        per_level.push(level);
    }
    Ok(PseudoAffinityReport { max_dev, per_level })
}

/// `χ_n = Ψ_η(a_1⋯a_n) / Ψ_θ(a_1⋯a_n)` for `n = 0..=n_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChiTrace<T> {
    pub coding: Coding,
    pub values: Vec<(usize, T)>,
}

impl<T: Scalar> ChiTrace<T> {
    /// Writes `n,chi` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::Capability(format!("csv output failed: {e}"));
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["n", "chi"]).map_err(io)?;
        for (n, chi) in &self.values {
            wtr.write_record([n.to_string(), fmt17(*chi)]).map_err(io)?;
        }
        wtr.flush().map_err(|e| Error::Capability(format!("csv output failed: {e}")))?;
        Ok(())
    }

    pub fn last(&self) -> T {
        self.values.last().map(|v| v.1).unwrap_or(T::one())
    }
}

/// `Ψ_η(w) / Ψ_θ(w)` as a product of per-letter ratios.
pub fn cocycle_ratio<T: Scalar>(theta: &ProportionPair<T>, eta: &ProportionPair<T>, w: &[u8]) -> Result<T> {
    let mut ratio = T::one();
    for j in (0..w.len()).rev() {
        let suffix = &w[j + 1..];
        ratio = eta.factor(w[j], suffix)? / theta.factor(w[j], suffix)? * ratio;
    }
    Ok(ratio)
}

pub fn chi_trace<T: Scalar>(
    theta: &ProportionPair<T>,
    eta: &ProportionPair<T>,
    a: &Coding,
    n_max: usize,
) -> Result<ChiTrace<T>> {
    let letters = a.truncate(n_max);
    let values = (0..=n_max)
        .map(|n| Ok((n, cocycle_ratio(theta, eta, &letters.letters()[..n])?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ChiTrace { coding: a.clone(), values })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Converges,
    Oscillates,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Converges => "converges",
            Verdict::Oscillates => "oscillates",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConjugacyEvidence<T> {
    /// Per trace, `max − min` of `χ_n` over the last half.
    pub tail_spread: Vec<T>,
    /// Largest tail spread and the trace attaining it.
    pub max_spread: T,
    pub worst_trace: usize,
    /// `max − min` of the final values across traces.
    pub cross_spread: T,
    pub depth: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConjugacyReport<T> {
    pub verdict: Verdict,
    pub evidence: ConjugacyEvidence<T>,
}

impl<T: Scalar> ConjugacyReport<T> {
    pub fn to_json(&self) -> Value {
        json!({
            "verdict": self.verdict.as_str(),
            "max_spread": self.evidence.max_spread.as_f64(),
            "worst_trace": self.evidence.worst_trace,
            "cross_spread": self.evidence.cross_spread.as_f64(),
            "depth": self.evidence.depth,
            "tail_spread": self.evidence.tail_spread.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
        })
    }
}

/// Finite-depth verdict on an ensemble of traces of common length.
///
/// Oscillates when some trace moves by at least `osc_tol` over its last half
/// without being monotone there; converges when every trace stays within
/// `osc_tol` over its last half; inconclusive otherwise.
pub fn conjugacy_verdict<T: Scalar>(traces: &[ChiTrace<T>], osc_tol: T) -> Result<ConjugacyReport<T>> {
    let depth = traces.first().map(|t| t.values.len()).unwrap_or(0);
    if traces.is_empty() || traces.iter().any(|t| t.values.len() != depth) {
        return Err(Error::Domain("traces must be nonempty and of common depth".into()));
    }
    let mut tail_spread = Vec::with_capacity(traces.len());
    let mut oscillating = false;
    for trace in traces {
        let tail: Vec<T> = trace.values[depth / 2..].iter().map(|v| v.1).collect();
        let hi = tail.iter().copied().fold(T::neg_infinity(), T::max);
        let lo = tail.iter().copied().fold(T::infinity(), T::min);
        let spread = hi - lo;
        let monotone = tail.windows(2).all(|p| p[1] >= p[0]) || tail.windows(2).all(|p| p[1] <= p[0]);
        oscillating |= spread >= osc_tol && !monotone;
        tail_spread.push(spread);
    }
    let (worst_trace, max_spread) = tail_spread.iter().copied().enumerate().fold(
        (0, T::neg_infinity()),
        |best, (k, s)| {
            if s > best.1 {
                (k, s)
            } else {
                best
            }
        },
    );
    let last: Vec<T> = traces.iter().map(|t| t.last()).collect();
    let cross_spread =
        last.iter().copied().fold(T::neg_infinity(), T::max) - last.iter().copied().fold(T::infinity(), T::min);
    let verdict = if oscillating {
        Verdict::Oscillates
    } else if max_spread < osc_tol {
        Verdict::Converges
    } else {
        Verdict::Inconclusive
    };
    Ok(ConjugacyReport {
        verdict,
        evidence: ConjugacyEvidence {
            tail_spread,
            max_spread,
            worst_trace,
            cross_spread,
            depth: depth.saturating_sub(1),
        },
    })
}

/// `h` with `λ h = h ∘ g_0` sampled on a grid, and `h ∘ g_1 ∘ h⁻¹`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linearization<T> {
    pub lambda: T,
    pub grid: Vec<T>,
    pub h: Vec<T>,
    /// `max |λ h(t) − h(g_0(t))|` over the grid.
    pub residual: T,
    pub iterations: usize,
    /// `(s, h(g_1(h⁻¹(s))))` for grid points `s` in the range of `h`.
    pub conjugated: Vec<(T, T)>,
}

const LINEARIZE_CAP: usize = 2000;

fn koenigs<T: Scalar>(g: &ExternalBranch<T>, lambda: T, t: T, budget: usize, tol: T) -> Result<(T, usize)> {
    let mut y = t;
    let mut scale = T::one();
    let mut h = t;
    let mut residual = T::infinity();
    for n in 1..=budget {
        y = g.eval(y);
        scale /= lambda;
        let next = y * scale;
        residual = (next - h).abs();
        h = next;
        if residual < tol {
            return Ok((h, n));
        }
        if y == T::zero() || !scale.is_finite() {
            break;
        }
    }
    Err(Error::NoConvergence { iterations: budget, residual: residual.as_f64() })
}

/// Linearizes the branch fixing 0 by `h = lim λ^{−n} g_0^{∘n}`.
///
/// `s_hint > 1` sets the iteration budget from the expected rate
/// `λ^{s−1}`; `s_hint <= 1` gets a short budget, so C¹-only input surfaces
/// as `NoConvergence` instead of a silent answer.
pub fn linearize_branch<T: Scalar>(
    pair: &ExternalPair<T>,
    s_hint: f64,
    grid: &[T],
    tol: T,
) -> Result<Linearization<T>> {
    let g = &pair.branches[0];
    if g.eval(T::zero()).abs() > T::epsilon() {
        return Err(Error::Domain("the branch must fix 0".into()));
    }
    let lambda = g.derivative(T::zero());
    if !(lambda > T::zero() && lambda < T::one()) {
        return Err(Error::Domain(format!("g′(0) = {lambda} is not in (0, 1)")));
    }
    let exponent = if s_hint > 1.0 { (s_hint - 1.0).min(1.0) } else { 1.0 };
    let rate = lambda.as_f64().powf(exponent);
    let base = (tol.as_f64().ln() / rate.ln()).ceil().max(1.0) as usize;
    let budget = if s_hint > 1.0 { (2 * base + 20).min(LINEARIZE_CAP) } else { base + 5 };
    let mut h = Vec::with_capacity(grid.len());
    let mut iterations = 0;
    for &t in grid {
        let (v, n) = koenigs(g, lambda, t, budget, tol)?;
        h.push(v);
        iterations = iterations.max(n);
    }
    let mut residual = T::zero();
    for (&t, &ht) in grid.iter().zip(&h) {
        let hg = koenigs(g, lambda, g.eval(t), budget, tol)?.0;
        residual = residual.max((lambda * ht - hg).abs());
    }
    let h_of = |t: T| koenigs(g, lambda, t, budget, tol).map(|v| v.0);
    let h_one = h_of(T::one())?;
    let mut conjugated = Vec::new();
    for &s in grid {
        if s < T::zero() || s > h_one {
            continue;
        }
        // h⁻¹(s) by bisection; h is increasing on [0, 1].
        let (mut lo, mut hi) = (T::zero(), T::one());
        for _ in 0..200 {
            let mid = (lo + hi) / T::lit(2.0);
            if mid == lo || mid == hi {
                break;
            }
            if h_of(mid)? < s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = (lo + hi) / T::lit(2.0);
        conjugated.push((s, h_of(pair.branches[1].eval(x))?));
    }
    Ok(Linearization { lambda, grid: grid.to_vec(), h, residual, iterations, conjugated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor::realize;
    use crate::examples::{as_proportions, gen_case_a, gen_case_b, Regularity};
    use crate::ifs::build_branches;
    use crate::words::enumerate_words;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn case_a2() -> ProportionPair<f64> {
        as_proportions(gen_case_a(0.3, Regularity::Finite(2.0), 60).unwrap())
    }

    fn case_b2() -> ProportionPair<f64> {
        as_proportions(gen_case_b(0.3, Regularity::Finite(2.0), 0.2, 60).unwrap())
    }

    fn perturbed() -> ExternalPair<f64> {
        ExternalPair::affine(0.3, 0.31)
    }

    #[test]
    fn affine_fixed_points() {
        let ss = ExternalPair::self_similar(0.4);
        let p = fixed_point(&ss, &w("0"), 1e-14).unwrap();
        assert!(p.point < 1e-13);
        assert_relative_eq!(p.derivative_product, 0.4);
        let q = fixed_point(&ss, &w("01"), 1e-14).unwrap();
        assert_relative_eq!(q.derivative_product, 0.16, max_relative = 1e-15);
        let thirds = ExternalPair::self_similar(1.0 / 3.0);
        let r = fixed_point(&thirds, &w("10"), 1e-14).unwrap();
        // x = 2/3 + x/9
        assert_relative_eq!(r.point, 0.75, max_relative = 1e-13);
        assert_relative_eq!(r.derivative_product, 1.0 / 9.0, max_relative = 1e-14);
    }

    #[test]
    fn expanding_maps_are_rejected() {
        let bad = ExternalPair::new(
            ExternalBranch::new(|t: f64| 0.5 + 1.5 * (t - 0.5), |_| 1.5),
            ExternalBranch::affine(0.3, 0.7),
        );
        let err = fixed_point(&bad, &w("0"), 1e-12).unwrap_err();
        assert_eq!(err.kind(), crate::ErrorKind::Domain);
        assert!(fixed_point(&bad, &Word::empty(), 1e-12).is_err());
    }

    #[test]
    fn ifs_fixed_points_are_cantor_points() {
        let br = build_branches(&case_b2(), 10, 1e-13).unwrap();
        let g = br.table().geometry();
        for word in ["1", "01", "110", "0101"] {
            let p = fixed_point(&br, &w(word), 1e-13).unwrap();
            let x = g.embed(&Coding::periodic(&w(word)).unwrap(), 1e-14).unwrap();
            assert!((p.point - x).abs() < 1e-11, "{word}");
            assert!((compose(&br, &w(word), p.point).unwrap() - p.point).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_rule_splits_over_concatenation() {
        let pair = ExternalPair::new(
            ExternalBranch::new(|t: f64| 0.3 * t + 0.05 * t * t, |t| 0.3 + 0.1 * t),
            ExternalBranch::new(|t: f64| 0.6 + 0.35 * t + 0.05 * t * t, |t| 0.35 + 0.1 * t),
        );
        for uv in enumerate_words(8).unwrap().into_iter().filter(|x| !x.is_empty()) {
            let fp = fixed_point(&pair, &uv, 1e-14).unwrap();
            for cut in 1..uv.len() {
                let u = Word::new(uv.letters()[..cut].to_vec()).unwrap();
                let v = Word::new(uv.letters()[cut..].to_vec()).unwrap();
                let pv = derivative_along(&pair, &v, fp.point).unwrap();
                let pu = derivative_along(&pair, &u, compose(&pair, &v, fp.point).unwrap()).unwrap();
                assert_relative_eq!(pu * pv, fp.derivative_product, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn livsic_self_similar() {
        let r = livsic_check(&ExternalPair::self_similar(0.3), 6, 1e-12).unwrap();
        assert!(r.pass);
        assert!(r.worst_dev < 1e-14);
        assert_eq!(r.words_checked, 126);
    }

    #[test]
    fn livsic_constructed_and_perturbed() {
        let br = build_branches(&case_a2(), 10, 1e-13).unwrap();
        let r = livsic_check(&br, 6, 1e-6).unwrap();
        assert!(r.pass, "{r:?}");
        assert_relative_eq!(r.lambda_hat, 0.3, max_relative = 1e-12);
        let bad = livsic_check(&perturbed(), 6, 1e-6).unwrap();
        assert!(!bad.pass);
        assert_eq!(bad.worst_word, w("1"));
        assert_relative_eq!(bad.worst_dev, (0.31f64 / 0.3).ln(), max_relative = 1e-10);
    }

    #[test]
    fn pseudo_affinity_levels() {
        let p = case_a2();
        let table = realize(&p, 9, 1e-13).unwrap();
        let br = build_branches(&p, 9, 1e-13).unwrap();
        let r = pseudo_affinity_report(&br, &table, 8).unwrap();
        for n in 0..=8 {
            assert_relative_eq!(r.per_level[n], p.theta(0, &vec![0; n]), max_relative = 1e-10, epsilon = 1e-15);
        }
        assert!(r.max_dev < 1e-12);

        let q = case_b2();
        let table = realize(&q, 9, 1e-13).unwrap();
        let br = build_branches(&q, 9, 1e-13).unwrap();
        let r = pseudo_affinity_report(&br, &table, 8).unwrap();
        for k in 0..=4 {
            assert!(r.per_level[2 * k] >= q.theta(1, Word::alternating(k).letters()) * (1.0 - 1e-10));
        }
        for k in 0..4 {
            assert!(r.per_level[2 * k + 1] < 1e-12);
        }

        let c = ProportionPair::constant(0.3).unwrap();
        let table = realize(&c, 5, 1e-13).unwrap();
        let r = pseudo_affinity_report(&ExternalPair::self_similar(0.3), &table, 4).unwrap();
        assert!(r.max_dev == 0.0 && r.per_level.iter().all(|v| *v < 1e-14));
        assert!(pseudo_affinity_report(&ExternalPair::self_similar(0.3), &table, 5).is_err());
    }

    #[test]
    fn livsic_matches_pseudo_affinity() {
        // Both directions on a pseudo-affine and a perturbed pair.
        let c = ProportionPair::constant(0.3).unwrap();
        let table = realize(&c, 9, 1e-13).unwrap();
        let br = build_branches(&case_a2(), 9, 1e-13).unwrap();
        let table_a = realize(&case_a2(), 9, 1e-13).unwrap();
        let cases: Vec<(bool, bool)> = vec![
            (
                livsic_check(&br, 8, 1e-6).unwrap().pass,
                pseudo_affinity_report(&br, &table_a, 8).unwrap().max_dev <= 1e-6,
            ),
            (
                livsic_check(&perturbed(), 8, 1e-6).unwrap().pass,
                pseudo_affinity_report(&perturbed(), &table, 8).unwrap().max_dev <= 1e-6,
            ),
        ];
        assert_eq!(cases, vec![(true, true), (false, false)]);
    }

    #[test]
    fn chi_examples() {
        let a = case_a2();
        let zero = ProportionPair::constant(0.3).unwrap();
        let same = chi_trace(&a, &a, &"01(1)^inf".parse().unwrap(), 20).unwrap();
        assert!(same.values.iter().all(|v| v.1 == 1.0));

        // η = case (a) against θ ≡ 0: the product ∏_{k<n}(1 + ε_k/λ), the same for every coding.
        let oracle: Vec<f64> =
            (0..=40).map(|n| (0..n).map(|k| 1.0 + a.theta(0, &vec![0; k]) / 0.3).product()).collect();
        for c in ["(0)^inf", "(01)^inf", "1(0)^inf", "110(1)^inf"] {
            let t = chi_trace(&zero, &a, &c.parse().unwrap(), 40).unwrap();
            for (n, chi) in &t.values {
                assert_relative_eq!(*chi, oracle[*n], max_relative = 1e-13);
            }
        }

        let b = case_b2();
        let t = chi_trace(&zero, &b, &"(01)^inf".parse().unwrap(), 40).unwrap();
        for (n, chi) in &t.values {
            if n % 2 == 0 && *n > 0 {
                let direct: f64 = (0..n / 2).map(|k| 1.0 + b.theta(1, Word::alternating(k).letters()) / 0.3).product();
                assert_relative_eq!(*chi, direct, max_relative = 1e-14);
                assert!(*chi >= 5.0 / 3.0 - 1e-15);
            } else {
                assert_eq!(*chi, 1.0);
            }
        }
    }

    #[test]
    fn chi_is_multiplicative() {
        let zero = ProportionPair::constant(0.3).unwrap();
        let b = case_b2();
        for word in enumerate_words(8).unwrap().into_iter().filter(|x| !x.is_empty()) {
            let l = word.letters();
            let whole = cocycle_ratio(&zero, &b, l).unwrap();
            let tail = cocycle_ratio(&zero, &b, &l[1..]).unwrap();
            let gamma = b.factor(l[0], &l[1..]).unwrap() / zero.factor(l[0], &l[1..]).unwrap();
            assert_eq!(whole, gamma * tail);
            assert!(whole > 0.0);
        }
    }

    #[test]
    fn verdicts() {
        let zero = ProportionPair::constant(0.3).unwrap();
        let codings: Vec<Coding> =
            ["(0)^inf", "(01)^inf", "1(0)^inf", "(110)^inf"].iter().map(|s| s.parse().unwrap()).collect();
        let a_traces: Vec<_> = codings.iter().map(|c| chi_trace(&zero, &case_a2(), c, 40).unwrap()).collect();
        let r = conjugacy_verdict(&a_traces, 1e-6).unwrap();
        assert_eq!(r.verdict, Verdict::Converges);
        assert!(r.evidence.cross_spread <= 1e-6);

        let b_trace = chi_trace(&zero, &case_b2(), &codings[1], 40).unwrap();
        let r = conjugacy_verdict(&[b_trace], 1e-6).unwrap();
        assert_eq!(r.verdict, Verdict::Oscillates);
        assert!(r.evidence.max_spread >= 0.2 / 0.3 - 1e-9);

        let same: Vec<_> = codings.iter().map(|c| chi_trace(&zero, &zero, c, 40).unwrap()).collect();
        let r = conjugacy_verdict(&same, 1e-6).unwrap();
        assert_eq!(r.verdict, Verdict::Converges);
        assert_eq!(r.evidence.cross_spread, 0.0);

        let ramp = ChiTrace { coding: codings[0].clone(), values: (0..=40).map(|n| (n, n as f64)).collect() };
        assert_eq!(conjugacy_verdict(&[ramp], 1e-6).unwrap().verdict, Verdict::Inconclusive);
        assert!(conjugacy_verdict::<f64>(&[], 1e-6).is_err());
    }

    #[test]
    fn chi_csv() {
        let zero = ProportionPair::constant(0.3).unwrap();
        let t = chi_trace(&zero, &case_b2(), &"(01)^inf".parse().unwrap(), 4).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,chi\n0,"));
        assert_eq!(text.lines().count(), 6);
    }

    fn grid(n: usize) -> Vec<f64> {
        (0..=n).map(|k| k as f64 / n as f64).collect()
    }

    #[test]
    fn linearize_affine_is_identity() {
        let pair = ExternalPair::self_similar(0.3);
        let lin = linearize_branch(&pair, 2.0, &grid(20), 1e-13).unwrap();
        for (t, h) in lin.grid.iter().zip(&lin.h) {
            assert_relative_eq!(*h, *t, max_relative = 1e-14, epsilon = 1e-15);
        }
        for (s, v) in &lin.conjugated {
            assert_relative_eq!(*v, 0.7 + 0.3 * s, max_relative = 1e-10);
        }
    }

    #[test]
    fn linearize_quadratic() {
        let g0 = ExternalBranch::new(|t: f64| 0.3 * t + 0.05 * t * t, |t| 0.3 + 0.1 * t);
        let pair = ExternalPair::new(g0.clone(), ExternalBranch::affine(0.3, 0.7));
        let tol = 1e-12;
        let lin = linearize_branch(&pair, 2.0, &grid(50), tol).unwrap();
        assert_eq!(lin.h[0], 0.0);
        assert!(lin.h.windows(2).all(|p| p[1] > p[0]));
        assert!(lin.residual <= 10.0 * tol);
        // Oracle: the same limit run to twice the depth.
        for (&t, &h) in lin.grid.iter().zip(&lin.h) {
            let mut y = t;
            let mut s = 1.0;
            for _ in 0..2 * lin.iterations.max(1) {
                y = g0.eval(y);
                s /= 0.3;
            }
            assert!((y * s - h).abs() < 1e-10);
        }
        // h′(0) = 1 by one-sided differences at shrinking steps.
        let slopes: Vec<f64> = [1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&d| linearize_branch(&pair, 2.0, &[d], tol).unwrap().h[0] / d - 1.0)
            .collect();
        assert!(slopes.windows(2).all(|p| p[1].abs() < p[0].abs()));
        assert!(slopes[2].abs() < 1e-4);
    }

    #[test]
    fn linearize_c1_surfaces_failure() {
        // g(t) = λt(1 + 1/ln(1/t)) type correction: C¹ with no Hölder modulus.
        let g0 = ExternalBranch::new(
            |t: f64| {
                if t <= 0.0 {
                    0.0
                } else {
                    0.3 * t * (1.0 + 0.2 / (1.0 + (1.0 / t).ln()))
                }
            },
            |t: f64| {
                if t <= 0.0 {
                    0.3
                } else {
                    0.3 * (1.0 + 0.2 / (1.0 + (1.0 / t).ln()))
                }
            },
        );
        let pair = ExternalPair::new(g0, ExternalBranch::affine(0.3, 0.7));
        match linearize_branch(&pair, 1.0, &[0.5], 1e-12) {
            Err(Error::NoConvergence { residual, .. }) => assert!(residual > 0.0),
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn self_similar_products_are_powers(lambda in 0.05f64..0.49, bits in 0u64..256, len in 1usize..8) {
            let word = Word::from_bits(bits, len);
            let p = fixed_point(&ExternalPair::self_similar(lambda), &word, 1e-14).unwrap();
            prop_assert!((p.derivative_product / lambda.powi(len as i32) - 1.0).abs() < 1e-12);
            prop_assert!(p.point >= 0.0 && p.point <= 1.0);
        }

        #[test]
        fn chi_values_are_positive(bits in 0u64..1024, len in 0usize..10) {
            let zero = ProportionPair::constant(0.3).unwrap();
            let word = Word::from_bits(bits, len);
            let c = Coding::new(&word, &Word::new(vec![0, 1]).unwrap()).unwrap();
            let t = chi_trace(&zero, &case_b2(), &c, 30).unwrap();
            prop_assert!(t.values.iter().all(|v| v.1 > 0.0));
        }
    }
}
