//! The example families: ε-sequences for case (a) (θ depends on `|w|` only)
//! and case (b) (θ supported on the words `(01)^k`), at every regularity.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::proportions::{Epsilons, ProportionPair};
use crate::scalar::{fmt17, Scalar};

/// Default exponent of the `s = 1` family `ε_n = λ n^{−γ}`.
pub const DEFAULT_GAMMA: f64 = 2.0;

/// The regularity parameter `s ∈ [1, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regularity {
    Finite(f64),
    Infinite,
}

impl Regularity {
    fn to_json(self) -> Value {
        match self {
            Regularity::Finite(s) => json!(s),
            Regularity::Infinite => json!("inf"),
        }
    }

    fn from_json(v: &Value) -> Result<Self> {
        match v {
            Value::Number(n) => Ok(Regularity::Finite(n.as_f64().unwrap_or(f64::NAN))),
            Value::String(s) => s.parse(),
            _ => Err(Error::Parse(format!("regularity {v} is neither a number nor \"inf\""))),
        }
    }
}

impl FromStr for Regularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(Regularity::Infinite),
            other => other
                .parse::<f64>()
                .map(Regularity::Finite)
                .map_err(|_| Error::Parse(format!("cannot parse regularity {other:?}"))),
        }
    }
}

impl fmt::Display for Regularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regularity::Finite(s) => write!(f, "{s}"),
            Regularity::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SequenceKind {
    /// `ε_n = λ n^{−γ}`.
    AS1 { gamma: f64 },
    /// `ε_n = Ψ(n)^{s−1}`.
    AFinite { s: f64 },
    /// `ε_n = Ψ(n)^n`.
    AInfinite,
    /// `ε_k = (λ^k ∏_{r<k}(λ+ε_r))^{s−1}`.
    BFinite { s: f64, eps0: f64 },
    /// `ε_k = (λ^k ∏_{r<k}(λ+ε_r))^k`.
    BInfinite { eps0: f64 },
}

impl SequenceKind {
    pub fn is_case_b(&self) -> bool {
        matches!(self, SequenceKind::BFinite { .. } | SequenceKind::BInfinite { .. })
    }
}

/// One term of a sequence. Terms too small for the scalar type keep only
/// their logarithm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term<T> {
    /// `ε_n`, or zero when `log_only`.
    pub value: T,
    /// `ln ε_n` (`−∞` for an exact zero).
    pub ln: T,
    pub log_only: bool,
}

/// A lazily extended ε-sequence.
#[derive(Debug)]
pub struct EpsilonSequence<T> {
    kind: SequenceKind,
    lambda: T,
    terms: RwLock<Vec<Term<T>>>,
}

fn log_threshold<T: Scalar>() -> T {
    T::min_positive_value() / T::epsilon()
}

impl<T: Scalar> EpsilonSequence<T> {
    fn new(kind: SequenceKind, lambda: T, n_max: usize) -> Result<Self> {
        if !(lambda > T::zero() && lambda < T::lit(0.5)) {
            return Err(Error::Domain(format!("lambda = {lambda} must lie in (0, 1/2)")));
        }
        let first = match kind {
            SequenceKind::AS1 { .. } | SequenceKind::AFinite { .. } | SequenceKind::AInfinite => T::zero(),
            SequenceKind::BFinite { eps0, .. } | SequenceKind::BInfinite { eps0 } => T::lit(eps0),
        };
        let seq =
            Self { kind, lambda, terms: RwLock::new(vec![Term { value: first, ln: first.ln(), log_only: false }]) };
        seq.extend_to(n_max.max(1));
        for n in 0..=n_max.max(1) {
            let f = lambda + seq.term(n).value;
            if !(f > T::zero() && f < T::one()) {
                return Err(Error::Domain(format!("lambda + eps_{n} = {f} is outside (0, 1) for {kind:?}")));
            }
        }
        Ok(seq)
    }

    pub fn kind(&self) -> SequenceKind {
        self.kind
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// Number of terms generated so far.
    pub fn generated(&self) -> usize {
        self.terms.read().unwrap().len()
    }

    pub fn term(&self, n: usize) -> Term<T> {
        if let Some(t) = self.terms.read().unwrap().get(n) {
            return *t;
        }
        self.extend_to(n);
        self.terms.read().unwrap()[n]
    }

    /// `ε_n` in `f64`-independent log form: `ln ε_n`.
    pub fn ln_eps(&self, n: usize) -> T {
        self.term(n).ln
    }

    fn extend_to(&self, n: usize) {
        let mut terms = self.terms.write().unwrap();
        while terms.len() <= n {
            let m = terms.len();
            let next = self.next_term(m, terms[m - 1]);
            terms.push(next);
        }
    }

    /// Computes `ε_m` from `ε_{m−1}`.
    fn next_term(&self, m: usize, prev: Term<T>) -> Term<T> {
        let lambda = self.lambda;
        let one = T::one();
        let thr = log_threshold::<T>();
        let k = T::from_usize(m - 1).unwrap();
        let factor_ln = (lambda + prev.value).ln();
        let (value, ln) = match self.kind {
            SequenceKind::AS1 { gamma } => {
                let m = T::from_usize(m).unwrap();
                let g = T::lit(gamma);
                (lambda * m.powf(-g), lambda.ln() - g * m.ln())
            }
            SequenceKind::AFinite { s } => {
                let e = T::lit(s) - one;
                if m == 1 {
                    (lambda.powf(e), e * lambda.ln())
                } else {
                    (prev.value * (lambda + prev.value).powf(e), prev.ln + e * factor_ln)
                }
            }
            SequenceKind::AInfinite => {
                if m == 1 {
                    (lambda, lambda.ln())
                } else {
                    let p = (k + one) / k;
                    let n1 = k + one;
                    (prev.value.powf(p) * (lambda + prev.value).powf(n1), p * prev.ln + n1 * factor_ln)
                }
            }
            SequenceKind::BFinite { s, .. } => {
                let e = T::lit(s) - one;
                if m == 1 {
                    let base = lambda * (lambda + prev.value);
                    (base.powf(e), e * base.ln())
                } else {
                    ((lambda * (lambda + prev.value)).powf(e) * prev.value, e * lambda.ln() + prev.ln + e * factor_ln)
                }
            }
            SequenceKind::BInfinite { .. } => {
                if m == 1 {
                    let base = lambda * (lambda + prev.value);
                    (base, base.ln())
                } else {
                    let p = (k + one) / k;
                    let n1 = k + one;
                    (
                        lambda.powf(n1) * prev.value.powf(p) * (lambda + prev.value).powf(n1),
                        n1 * lambda.ln() + p * prev.ln + n1 * factor_ln,
                    )
                }
            }
        };
        if !prev.log_only && value >= thr {
            Term { value, ln: value.ln(), log_only: false }
        } else if ln >= thr.ln() {
            Term { value: ln.exp(), ln, log_only: false }
        } else {
            Term { value: T::zero(), ln, log_only: true }
        }
    }

    /// Writes `n,eps,ln_eps,log_only` rows for `n <= n_max`.
    pub fn write_csv<W: Write>(&self, out: W, n_max: usize) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Capability(format!("csv output failed: {e}"));
        wtr.write_record(["n", "eps", "ln_eps", "log_only"]).map_err(io)?;
        for n in 0..=n_max {
            let t = self.term(n);
            wtr.write_record([n.to_string(), fmt17(t.value), fmt17(t.ln), t.log_only.to_string()]).map_err(io)?;
        }
        wtr.flush().map_err(|e| Error::Capability(format!("csv output failed: {e}")))?;
        Ok(())
    }
}

impl<T: Scalar> Epsilons<T> for EpsilonSequence<T> {
    fn eps(&self, n: usize) -> T {
        self.term(n).value
    }

    /// Every built-in sequence is strictly decreasing from index 1 on, so the
    /// supremum of the tail is its first term (or the first two when `n = 0`).
    fn sup_from(&self, n: usize) -> T {
        let bound = |t: Term<T>| {
            if t.log_only {
                log_threshold::<T>()
            } else {
                t.value
            }
        };
        let head = bound(self.term(n.max(1)));
        if n == 0 {
            head.max(self.term(0).value)
        } else {
            head
        }
    }

    fn params(&self) -> Value {
        match self.kind {
            SequenceKind::AS1 { gamma } => json!({"s": 1.0, "gamma": gamma}),
            SequenceKind::AFinite { s } => json!({"s": s}),
            SequenceKind::AInfinite => json!({"s": Regularity::Infinite.to_json()}),
            SequenceKind::BFinite { s, eps0 } => json!({"s": s, "eps0": eps0}),
            SequenceKind::BInfinite { eps0 } => {
                json!({"s": Regularity::Infinite.to_json(), "eps0": eps0})
            }
        }
    }
}

/// Case (a): `ε_0 = 0`, and for `n >= 1`
/// `s = 1`: `ε_n = λ n^{−γ}` with `γ = 2`;
/// `1 < s < ∞`: `ε_1 = λ^{s−1}`, `ε_{n+1} = ε_n (λ+ε_n)^{s−1}`;
/// `s = ∞`: `ε_1 = λ`, `ε_{n+1} = ε_n^{(n+1)/n} (λ+ε_n)^{n+1}`.
pub fn gen_case_a<T: Scalar>(lambda: T, s: Regularity, n_max: usize) -> Result<EpsilonSequence<T>> {
    let kind = match s {
        Regularity::Finite(1.0) => SequenceKind::AS1 { gamma: DEFAULT_GAMMA },
        Regularity::Finite(s) if s > 1.0 && s.is_finite() => SequenceKind::AFinite { s },
        Regularity::Infinite => SequenceKind::AInfinite,
        Regularity::Finite(s) => return Err(Error::Domain(format!("s = {s} must lie in [1, inf]"))),
    };
    EpsilonSequence::new(kind, lambda, n_max)
}

/// Case (a) with `s = 1` and a chosen exponent: `ε_n = λ n^{−γ}`.
pub fn gen_case_a_s1<T: Scalar>(lambda: T, gamma: f64, n_max: usize) -> Result<EpsilonSequence<T>> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Domain(format!("gamma = {gamma} must be positive")));
    }
    EpsilonSequence::new(SequenceKind::AS1 { gamma }, lambda, n_max)
}

/// Case (b): `ε_0` given, and for `k >= 1`
/// `1 < s < ∞`: `ε_1 = (λ(λ+ε_0))^{s−1}`, `ε_{k+1} = λ^{s−1} ε_k (λ+ε_k)^{s−1}`;
/// `s = ∞`: `ε_1 = λ(λ+ε_0)`, `ε_{k+1} = λ^{k+1} ε_k^{(k+1)/k} (λ+ε_k)^{k+1}`.
pub fn gen_case_b<T: Scalar>(lambda: T, s: Regularity, eps0: f64, k_max: usize) -> Result<EpsilonSequence<T>> {
    if !(eps0 > 0.0 && eps0 < 0.5) {
        return Err(Error::Domain(format!("eps0 = {eps0} must lie in (0, 1/2)")));
    }
    let kind = match s {
        Regularity::Finite(s) if s > 1.0 && s.is_finite() => SequenceKind::BFinite { s, eps0 },
        Regularity::Infinite => SequenceKind::BInfinite { eps0 },
        Regularity::Finite(s) => return Err(Error::Domain(format!("s = {s} must lie in (1, inf] for case b"))),
    };
    EpsilonSequence::new(kind, lambda, k_max)
}

/// Case (a) gives `θ_0(w) = θ_1(w) = ε_{|w|}`; case (b) gives
/// `θ_1((01)^k) = ε_k` and zero elsewhere.
pub fn as_proportions<T: Scalar>(seq: EpsilonSequence<T>) -> ProportionPair<T> {
    let lambda = seq.lambda;
    let case_b = seq.kind.is_case_b();
    let seq: Arc<dyn Epsilons<T>> = Arc::new(seq);
    let p = if case_b { ProportionPair::case_b(lambda, seq) } else { ProportionPair::length_only(lambda, seq) };
    p.expect("lambda was validated by the sequence generator")
}

/// Rebuilds a proportion pair from its JSON `kind` and `params`.
pub fn from_params<T: Scalar>(lambda: T, kind: &str, params: &Value) -> Result<ProportionPair<T>> {
    let s = params
        .get("s")
        .map(Regularity::from_json)
        .transpose()?
        .ok_or_else(|| Error::Parse("params need \"s\"".into()))?;
    let seq = match kind {
        "length-only" => match (s, params.get("gamma").and_then(Value::as_f64)) {
            (Regularity::Finite(1.0), Some(gamma)) => gen_case_a_s1(lambda, gamma, 1)?,
            _ => gen_case_a(lambda, s, 1)?,
        },
        "case-b" => {
            let eps0 = params
                .get("eps0")
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::Parse("case-b params need numeric \"eps0\"".into()))?;
            gen_case_b(lambda, s, eps0, 1)?
        }
        other => return Err(Error::Parse(format!("no parametrized family named {other:?}"))),
    };
    Ok(as_proportions(seq))
}
