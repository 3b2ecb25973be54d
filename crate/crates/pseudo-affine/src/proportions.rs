//! Dynamical proportions `λ_i(w) = λ + θ_i(w)`, the cocycle Ψ, and certified
//! sums of Ψ over all words.

use std::fmt;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::scalar::{Compensated, Scalar};
use crate::words::{words_of_length, Word};

/// Deepest level enumerated word by word for custom proportions.
pub const CUSTOM_MAX_DEPTH: usize = 20;

/// Deepest level summed for proportion kinds with structured level sums.
pub const STRUCTURED_MAX_DEPTH: usize = 100_000;

/// A perturbation sequence `ε_n` attached to a built-in proportion kind.
pub trait Epsilons<T>: Send + Sync + fmt::Debug {
    /// `ε_n`; values below the floating-point range come back as zero.
    fn eps(&self, n: usize) -> T;

    /// A certified upper bound for `sup_{m >= n} ε_m`.
    fn sup_from(&self, n: usize) -> T;

    /// Generator parameters, embedded in the proportion JSON document.
    fn params(&self) -> Value;
}

type ThetaFn<T> = dyn Fn(u8, &[u8]) -> T + Send + Sync;

/// A decay envelope `N ↦ sup_{|w|>N} |θ_i(w)|` for custom proportions.
pub type Envelope<T> = Arc<dyn Fn(usize) -> T + Send + Sync>;

/// Caller-supplied θ together with an optional decay envelope
/// `N ↦ sup_{|w|>N} |θ_i(w)|`.
#[derive(Clone)]
pub struct Custom<T> {
    theta: Arc<ThetaFn<T>>,
    envelope: Option<Envelope<T>>,
}

#[derive(Clone)]
pub enum Kind<T> {
    /// θ ≡ 0: the self-similar set of slope λ.
    Zero,
    /// `θ_0(w) = θ_1(w) = ε_{|w|}`.
    LengthOnly(Arc<dyn Epsilons<T>>),
    /// `θ_1((01)^k) = ε_k`, zero elsewhere.
    CaseB(Arc<dyn Epsilons<T>>),
    Custom(Custom<T>),
}

impl<T> fmt::Debug for Kind<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Zero => f.write_str("Zero"),
            Kind::LengthOnly(e) => write!(f, "LengthOnly({e:?})"),
            Kind::CaseB(e) => write!(f, "CaseB({e:?})"),
            Kind::Custom(c) => write!(f, "Custom(envelope: {})", c.envelope.is_some()),
        }
    }
}

/// The data `(λ, θ_0, θ_1)`.
#[derive(Clone, Debug)]
pub struct ProportionPair<T> {
    lambda: T,
    kind: Kind<T>,
}

fn check_lambda<T: Scalar>(lambda: T) -> Result<()> {
    if lambda > T::zero() && lambda < T::lit(0.5) {
        Ok(())
    } else {
        Err(Error::Domain(format!("lambda = {lambda} must lie in (0, 1/2)")))
    }
}

impl<T: Scalar> ProportionPair<T> {
    pub fn constant(lambda: T) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self { lambda, kind: Kind::Zero })
    }

    pub fn length_only(lambda: T, eps: Arc<dyn Epsilons<T>>) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self { lambda, kind: Kind::LengthOnly(eps) })
    }

    pub fn case_b(lambda: T, eps: Arc<dyn Epsilons<T>>) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self { lambda, kind: Kind::CaseB(eps) })
    }

    /// Arbitrary θ. Without an envelope, operations needing tail control
    /// (`sum_psi`, realization) fail with a capability error.
    pub fn custom(
        lambda: T,
        theta: impl Fn(u8, &[u8]) -> T + Send + Sync + 'static,
        envelope: Option<Envelope<T>>,
    ) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self { lambda, kind: Kind::Custom(Custom { theta: Arc::new(theta), envelope }) })
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn kind(&self) -> &Kind<T> {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            Kind::Zero => "constant-zero",
            Kind::LengthOnly(_) => "length-only",
            Kind::CaseB(_) => "case-b",
            Kind::Custom(_) => "custom",
        }
    }

    /// `θ_i(w)`.
    pub fn theta(&self, i: u8, w: &[u8]) -> T {
        match &self.kind {
            Kind::Zero => T::zero(),
            Kind::LengthOnly(e) => e.eps(w.len()),
            Kind::CaseB(e) => match alternating_power(w) {
                Some(k) if i == 1 => e.eps(k),
                _ => T::zero(),
            },
            Kind::Custom(c) => (c.theta)(i, w),
        }
    }

    /// `λ_i(w) = λ + θ_i(w)`, rejected unless it lies in (0, 1).
    pub fn factor(&self, i: u8, w: &[u8]) -> Result<T> {
        let v = self.lambda + self.theta(i, w);
        if v > T::zero() && v < T::one() {
            Ok(v)
        } else {
            Err(Error::Inadmissible {
                letter: i,
                suffix: Word::new(w.to_vec()).map(|w| w.to_string()).unwrap_or_default(),
                value: v.as_f64(),
            })
        }
    }

    /// Serializes to `{"lambda", "kind", "params"}`. Custom kinds cannot be
    /// serialized.
    pub fn to_json(&self) -> Result<Value> {
        let params = match &self.kind {
            Kind::Zero => json!({}),
            Kind::LengthOnly(e) | Kind::CaseB(e) => e.params(),
            Kind::Custom(_) => return Err(Error::Capability("custom proportions are not serializable".into())),
        };
        Ok(json!({
            "lambda": self.lambda.as_f64(),
            "kind": self.kind_name(),
            "params": params,
        }))
    }

    pub fn from_json(doc: &Value) -> Result<Self> {
        let lambda = doc
            .get("lambda")
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::Parse("missing numeric \"lambda\"".into()))?;
        let kind =
            doc.get("kind").and_then(Value::as_str).ok_or_else(|| Error::Parse("missing string \"kind\"".into()))?;
        let empty = json!({});
        let params = doc.get("params").unwrap_or(&empty);
        let lambda = T::lit(lambda);
        match kind {
            "constant-zero" => Self::constant(lambda),
            "length-only" | "case-b" => crate::examples::from_params(lambda, kind, params),
            other => Err(Error::Parse(format!("unknown proportion kind {other:?}"))),
        }
    }
}

/// `Some(k)` when `w = (01)^k`.
pub(crate) fn alternating_power(w: &[u8]) -> Option<usize> {
    if w.len() % 2 == 0 && w.chunks(2).all(|c| c == [0, 1]) {
        Some(w.len() / 2)
    } else {
        None
    }
}

/// `Ψ(w_1⋯w_n) = ∏_{i<n} λ_{w_i}(w_{i+1}⋯w_n) · λ_{w_n}(e)`, with `Ψ(e) = 1`.
///
/// Evaluated as the literal product, left to right.
pub fn psi<T: Scalar>(p: &ProportionPair<T>, w: &Word) -> Result<T> {
    let letters = w.letters();
    let mut acc = T::one();
    for j in 0..letters.len() {
        acc *= p.factor(letters[j], &letters[j + 1..])?;
    }
    Ok(acc)
}

/// Certified upper bound for `sup_{|w|>n} |θ_i(w)|`.
pub fn decay_envelope<T: Scalar>(p: &ProportionPair<T>, n: usize) -> Result<T> {
    match &p.kind {
        Kind::Zero => Ok(T::zero()),
        Kind::LengthOnly(e) => Ok(e.sup_from(n + 1)),
        // ε_k sits on (01)^k of length 2k, so |w| > n means k >= ⌊n/2⌋ + 1.
        Kind::CaseB(e) => Ok(e.sup_from(n / 2 + 1)),
        Kind::Custom(c) => c
            .envelope
            .as_ref()
            .map(|f| f(n))
            .ok_or_else(|| Error::Capability("custom proportions carry no decay envelope".into())),
    }
}

/// Result of [`sum_psi`].
#[derive(Clone, Debug)]
pub struct PsiSum<T> {
    /// Approximation of `∑_w Ψ(w)`.
    pub total: T,
    /// Deepest word length included in `total`.
    pub depth: usize,
    /// Certified bound on `|∑_w Ψ(w) − total|`.
    pub tail_bound: T,
    /// `level_sums[n] = ∑_{|w|=n} Ψ(w)` for `n <= depth`.
    pub level_sums: Vec<T>,
}

impl<T: Scalar> PsiSum<T> {
    /// The normalization `L = |I_e| = 1 / ∑ Ψ`.
    pub fn scale(&self) -> T {
        self.total.recip()
    }
}

/// Level sums `∑_{|w|=n} Ψ(w)` in increasing `n`.
///
/// Built-in kinds use their structure: length-only proportions make Ψ depend
/// on `|w|` alone, and for case (b) every level has exactly one word off the
/// θ ≡ 0 region (the suffix of `…0101` of that length), so the rest of the
/// level mass obeys a one-term recursion. Custom kinds are enumerated word by
/// word in ≺ order.
pub(crate) struct LevelSums<'a, T: Scalar> {
    p: &'a ProportionPair<T>,
    n: usize,
    state: LevelState<T>,
}

enum LevelState<T> {
    Geometric { next: T },
    Length { next: T },
    Spine { other: T, spine: T },
    Enumerate,
}

impl<'a, T: Scalar> LevelSums<'a, T> {
    pub(crate) fn new(p: &'a ProportionPair<T>) -> Self {
        let state = match p.kind {
            Kind::Zero => LevelState::Geometric { next: T::one() },
            Kind::LengthOnly(_) => LevelState::Length { next: T::one() },
            Kind::CaseB(_) => LevelState::Spine { other: T::zero(), spine: T::one() },
            Kind::Custom(_) => LevelState::Enumerate,
        };
        Self { p, n: 0, state }
    }

    pub(crate) fn next_level(&mut self) -> Result<T> {
        let n = self.n;
        let lambda = self.p.lambda;
        let two = T::lit(2.0);
        let out = match &mut self.state {
            LevelState::Geometric { next } => {
                let v = *next;
                *next = v * two * lambda;
                v
            }
            LevelState::Length { next } => {
                let v = *next;
                let f = self.p.factor(0, &vec![0; n])?;
                *next = v * two * f;
                v
            }
            LevelState::Spine { other, spine } => {
                let v = *other + *spine;
                let spine_word = spine_word(n);
                let letter = if n % 2 == 0 { 1 } else { 0 };
                let f = self.p.factor(letter, &spine_word)?;
                *other = two * lambda * *other + lambda * *spine;
                *spine = f * *spine;
                v
            }
            LevelState::Enumerate => {
                if n > CUSTOM_MAX_DEPTH {
                    return Err(Error::Capacity(format!(
                        "custom proportions are enumerated only to depth {CUSTOM_MAX_DEPTH}"
                    )));
                }
                let mut acc = Compensated::new();
                for w in words_of_length(n) {
                    acc.add(psi(self.p, &w)?);
                }
                acc.value()
            }
        };
        self.n += 1;
        Ok(out)
    }
}

/// The suffix of length `n` of `…010101`: `e, 1, 01, 101, 0101, …`.
pub(crate) fn spine_word(n: usize) -> Vec<u8> {
    (0..n).map(|j| if (n - j) % 2 == 1 { 1 } else { 0 }).collect()
}

/// `∑_{w} Ψ(w)` with a certified truncation bound.
///
/// Levels are accumulated breadth first with compensated summation. Past
/// depth `N` every factor belongs to a suffix of length `>= N`, so
/// `∑_{|w|=n} Ψ(w) <= T_N · q^{n−N}` with `q = 2(λ + sup_{|w|>=N}|θ|)` and
/// the tail is at most `T_N · q / (1 − q)`.
pub fn sum_psi<T: Scalar>(p: &ProportionPair<T>, tail_tol: T) -> Result<PsiSum<T>> {
    if !(tail_tol > T::zero()) {
        return Err(Error::Domain(format!("tail_tol = {tail_tol} must be positive")));
    }
    decay_envelope(p, 0)?;
    let max_depth = match p.kind {
        Kind::Custom(_) => CUSTOM_MAX_DEPTH,
        _ => STRUCTURED_MAX_DEPTH,
    };
    let two = T::lit(2.0);
    let mut levels = LevelSums::new(p);
    let mut acc = Compensated::new();
    let mut level_sums = Vec::new();
    let first = levels.next_level()?;
    acc.add(first);
    level_sums.push(first);
    let mut last_q = T::infinity();
    for n in 1..=max_depth {
        let t = levels.next_level()?;
        acc.add(t);
        level_sums.push(t);
        let q = two * (p.lambda + decay_envelope(p, n - 1)?);
        last_q = q;
        if q < T::one() {
            let total = acc.value();
            let bound = t * q / (T::one() - q) + two * T::epsilon() * total;
            if bound <= tail_tol {
                return Ok(PsiSum { total, depth: n, tail_bound: bound, level_sums });
            }
        }
    }
    if last_q >= T::one() {
        Err(Error::NotCertified(format!("2(lambda + envelope) = {last_q} >= 1 at depth {max_depth}")))
    } else {
        Err(Error::Capacity(format!("tail bound above {tail_tol} at depth {max_depth}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{as_proportions, gen_case_a, gen_case_a_s1, gen_case_b, Regularity};
    use crate::words::enumerate_words;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn case_b(lambda: f64, eps0: f64) -> ProportionPair<f64> {
        as_proportions(gen_case_b(lambda, Regularity::Finite(2.0), eps0, 40).unwrap())
    }

    fn case_a2(lambda: f64) -> ProportionPair<f64> {
        as_proportions(gen_case_a(lambda, Regularity::Finite(2.0), 40).unwrap())
    }

    #[test]
    fn psi_examples() {
        let p = ProportionPair::constant(0.3).unwrap();
        assert_relative_eq!(psi(&p, &w("011")).unwrap(), 0.027, max_relative = 1e-15);
        assert_eq!(psi(&p, &Word::empty()).unwrap(), 1.0);
        let b = case_b(0.3, 0.2);
        // (λ + θ_0(1)) · (λ + θ_1(e)) computed by hand.
        assert_relative_eq!(psi(&b, &w("01")).unwrap(), 0.3 * 0.5, max_relative = 1e-15);
        assert_eq!(psi(&b, &Word::empty()).unwrap(), 1.0);
    }

    #[test]
    fn inadmissible_factor_names_the_suffix() {
        let p = ProportionPair::custom(0.3, |i, w: &[u8]| if i == 0 && w == [1] { 0.8 } else { 0.0 }, None).unwrap();
        match psi(&p, &w("101")) {
            Err(Error::Inadmissible { letter, suffix, .. }) => {
                assert_eq!(letter, 0);
                assert_eq!(suffix, "1");
            }
            other => panic!("expected an admissibility error, got {other:?}"),
        }
    }

    #[test]
    fn lambda_domain() {
        assert!(ProportionPair::constant(0.5).is_err());
        assert!(ProportionPair::constant(0.0).is_err());
        assert!(ProportionPair::constant(0.6).is_err());
    }

    #[test]
    fn sum_psi_matches_geometric_series() {
        for (lambda, total) in [(0.3, 2.5), (1.0 / 3.0, 3.0)] {
            let p = ProportionPair::constant(lambda).unwrap();
            let s = sum_psi(&p, 1e-13).unwrap();
            // closed form 1 / (1 − 2λ)
            assert_relative_eq!(s.total, total, max_relative = 1e-13);
            assert_relative_eq!(s.scale(), 1.0 / total, max_relative = 1e-13);
            assert!(s.tail_bound <= 1e-13);
        }
    }

    #[test]
    fn sum_psi_case_a_is_certified() {
        let p = case_a2(0.3);
        let s = sum_psi(&p, 1e-12).unwrap();
        assert!(s.total > 2.5 && s.total.is_finite());
        assert!(s.tail_bound <= 1e-12);
    }

    /// Brute force: sum Ψ over every word to a fixed depth, with the same
    /// geometric tail argument evaluated independently.
    fn brute_total(p: &ProportionPair<f64>, depth: usize) -> f64 {
        enumerate_words(depth).unwrap().iter().map(|w| psi(p, w).unwrap()).sum()
    }

    #[test]
    fn structured_level_sums_agree_with_enumeration() {
        let pairs = [
            ProportionPair::constant(0.3).unwrap(),
            case_a2(0.3),
            case_b(0.3, 0.2),
            as_proportions(gen_case_a_s1(0.25, 2.0, 40).unwrap()),
            as_proportions(gen_case_b(0.2, Regularity::Infinite, 0.3, 40).unwrap()),
        ];
        for p in &pairs {
            let mut levels = LevelSums::new(p);
            for n in 0..=12 {
                let structured = levels.next_level().unwrap();
                let brute: f64 = words_of_length(n).map(|w| psi(p, &w).unwrap()).sum();
                assert_relative_eq!(structured, brute, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn custom_kind_needs_an_envelope() {
        let p = ProportionPair::custom(0.3, |_, _: &[u8]| 0.0, None).unwrap();
        assert!(matches!(sum_psi(&p, 1e-6), Err(Error::Capability(_))));
        assert!(matches!(decay_envelope(&p, 3), Err(Error::Capability(_))));
        assert!(p.to_json().is_err());
    }

    #[test]
    fn custom_kind_with_envelope_sums() {
        let env: Envelope<f64> = Arc::new(|n| if n < 2 { 0.1 } else { 0.0 });
        let p = ProportionPair::custom(0.2, |i, w: &[u8]| if w.len() <= 2 && i == 1 { 0.1 } else { 0.0 }, Some(env))
            .unwrap();
        let s = sum_psi(&p, 1e-6).unwrap();
        let brute = brute_total(&p, 18);
        assert!((s.total - brute).abs() <= s.tail_bound + 1e-6);
    }

    #[test]
    fn non_certifiable_envelope_is_reported() {
        let env: Envelope<f64> = Arc::new(|_| 0.3);
        let p = ProportionPair::custom(0.3, |_, _: &[u8]| 0.0, Some(env)).unwrap();
        assert!(matches!(sum_psi(&p, 1e-6), Err(Error::NotCertified(_))));
    }

    #[test]
    fn envelope_examples() {
        assert_eq!(decay_envelope(&ProportionPair::constant(0.3).unwrap(), 5).unwrap(), 0.0);
        let s1 = as_proportions(gen_case_a_s1(0.3, 2.0, 30).unwrap());
        assert_relative_eq!(decay_envelope(&s1, 10).unwrap(), 0.3 / 121.0, max_relative = 1e-15);
    }

    #[test]
    fn case_b_envelope_matches_a_scan() {
        let p = case_b(0.3, 0.2);
        for n in 0..9 {
            let scan = enumerate_words(2 * n + 2)
                .unwrap()
                .iter()
                .filter(|w| w.len() > n)
                .flat_map(|w| [p.theta(0, w.letters()), p.theta(1, w.letters())])
                .fold(0.0f64, f64::max);
            assert_eq!(decay_envelope(&p, n).unwrap(), scan);
        }
    }

    #[test]
    fn cocycle_identity_exhaustive() {
        for p in [case_a2(0.3), case_b(0.3, 0.2), ProportionPair::constant(0.4).unwrap()] {
            for w in enumerate_words(10).unwrap() {
                let base = psi(&p, &w).unwrap();
                for i in 0..=1 {
                    let lhs = psi(&p, &w.prepended(i)).unwrap();
                    let rhs = p.factor(i, w.letters()).unwrap() * base;
                    assert_relative_eq!(lhs, rhs, max_relative = 1e-14);
                }
            }
        }
    }

    #[test]
    fn json_round_trip() {
        for p in [ProportionPair::constant(0.3).unwrap(), case_a2(0.3), case_b(0.3, 0.2)] {
            let doc = p.to_json().unwrap();
            let q = ProportionPair::<f64>::from_json(&doc).unwrap();
            assert_eq!(q.to_json().unwrap(), doc);
            for w in enumerate_words(6).unwrap() {
                assert_eq!(psi(&p, &w).unwrap(), psi(&q, &w).unwrap());
            }
        }
    }

    #[test]
    fn spine_words() {
        assert_eq!(spine_word(0), Vec::<u8>::new());
        assert_eq!(spine_word(1), vec![1]);
        assert_eq!(spine_word(2), vec![0, 1]);
        assert_eq!(spine_word(3), vec![1, 0, 1]);
    }

    proptest! {
        #[test]
        fn constant_psi_is_a_power(lambda in 0.01f64..0.49, bits in 0u64..(1 << 20), len in 0usize..=20) {
            let p = ProportionPair::constant(lambda).unwrap();
            let w = Word::from_bits(bits & ((1u64 << len) - 1), len);
            prop_assert!((psi(&p, &w).unwrap() - lambda.powi(len as i32)).abs() <= 4.0 * f64::EPSILON * lambda.powi(len as i32) * len as f64 + f64::MIN_POSITIVE);
        }

        #[test]
        fn truncation_is_monotone(lambda in 0.05f64..0.45, tol_exp in 4i32..13) {
            let p = as_proportions(gen_case_a(lambda, Regularity::Finite(2.0), 10).unwrap());
            let s = sum_psi(&p, 10f64.powi(-tol_exp)).unwrap();
            let mut partial = 0.0;
            for &t in &s.level_sums {
                prop_assert!(t >= 0.0);
                prop_assert!(partial + t >= partial);
                partial += t;
            }
            // the bound dominates the first omitted level
            let mut levels = LevelSums::new(&p);
            let mut next = 0.0;
            for _ in 0..=s.depth + 1 {
                next = levels.next_level().unwrap();
            }
            prop_assert!(s.tail_bound >= next);
        }
    }
}
