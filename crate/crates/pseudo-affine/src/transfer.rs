//! The tripling map `T x = 3x mod 1`, its Ruelle operator on depth-n ternary
//! cylinder functions, and the conjugacy `h` built from the eigenmeasure.
//!
//! Cylinders are indexed by `x = ∑ d_k 3^{n−k}` with `d_1` most significant.
//! A depth-n cylinder `y = j d_1 ⋯ d_{n−1}` is mapped by `T` onto the
//! depth-(n−1) cylinder `d_1 ⋯ d_{n−1}`, so
//! `(L f)[x] = ∑_j W[j·3^{n−1} + ⌊x/3⌋] f[j·3^{n−1} + ⌊x/3⌋]` with
//! `W[y] = e^{φ(y)}`. The operator is applied implicitly.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::scalar::{fmt17, Compensated, Scalar};

/// Largest supported cylinder depth (3^13 states).
pub const MAX_DEPTH: usize = 13;

/// Largest period for exhaustive orbit sums.
pub const MAX_PERIOD: usize = 12;

/// Half-width of the centered difference used by the derivative check.
pub const VERIFY_STEP: f64 = 1.0 / 32.0;

const POWER_TOL: f64 = 1e-12;

/// `T x = 3x mod 1` and the branch `⌊3x⌋`.
pub fn tripling<T: Scalar>(x: T) -> Result<(T, u8)> {
    if !(x >= T::zero() && x < T::one()) {
        return Err(Error::Domain(format!("x = {x} is outside [0, 1)")));
    }
    let y = T::lit(3.0) * x;
    let branch = y.floor().to_u8().unwrap_or(2).min(2);
    Ok((y - T::from_u8(branch).unwrap(), branch))
}

fn pow3(n: usize) -> usize {
    3usize.pow(n as u32)
}

/// A potential on [0, 1].
#[derive(Clone)]
pub enum Potential<T> {
    Constant(T),
    /// Depends on the first `depth` ternary digits; `values[x]` for the
    /// cylinder with index `x < 3^depth`.
    Digits {
        depth: usize,
        values: Vec<T>,
    },
    /// A continuous function, sampled at cylinder midpoints; `modulus(n)`
    /// bounds its oscillation on depth-n cylinders.
    Continuous {
        f: Arc<dyn Fn(T) -> T + Send + Sync>,
        modulus: Arc<dyn Fn(usize) -> T + Send + Sync>,
    },
}

impl<T: Scalar> std::fmt::Debug for Potential<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Potential::Constant(c) => write!(f, "Constant({c})"),
            Potential::Digits { depth, values } => {
                write!(f, "Digits {{ depth: {depth}, values: {values:?} }}")
            }
            Potential::Continuous { .. } => f.write_str("Continuous"),
        }
    }
}

impl<T: Scalar> Potential<T> {
    pub fn digits(depth: usize, values: Vec<T>) -> Result<Self> {
        if depth > MAX_DEPTH || values.len() != pow3(depth) {
            return Err(Error::Domain(format!(
                "a depth-{depth} potential needs 3^{depth} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("potential values must be finite".into()));
        }
        Ok(Potential::Digits { depth, values })
    }

    /// `φ(x) = v_{d_1(x)}`.
    pub fn one_digit(v: [T; 3]) -> Result<Self> {
        Self::digits(1, v.to_vec())
    }

    /// `φ = u − u∘T` for `u(x) = u_{d_1(x)}`, i.e. `φ(x) = u_{d_1} − u_{d_2}`.
    pub fn coboundary(u: [T; 3]) -> Self {
        let values = (0..9).map(|x| u[x / 3] - u[x % 3]).collect();
        Potential::Digits { depth: 2, values }
    }

    pub fn continuous(
        f: impl Fn(T) -> T + Send + Sync + 'static,
        modulus: impl Fn(usize) -> T + Send + Sync + 'static,
    ) -> Self {
        Potential::Continuous { f: Arc::new(f), modulus: Arc::new(modulus) }
    }

    /// `Some(m)` when φ depends on the first `m` digits only.
    pub fn range_depth(&self) -> Option<usize> {
        match self {
            Potential::Constant(_) => Some(0),
            Potential::Digits { depth, .. } => Some(*depth),
            Potential::Continuous { .. } => None,
        }
    }

    pub fn eval(&self, x: T) -> T {
        match self {
            Potential::Constant(c) => *c,
            Potential::Digits { depth, values } => {
                let cells = pow3(*depth);
                let k = (x * T::from_usize(cells).unwrap()).floor().to_usize().unwrap_or(0).min(cells - 1);
                values[k]
            }
            Potential::Continuous { f, .. } => f(x),
        }
    }

    /// `φ` on the depth-n cylinder with index `y`.
    pub fn on_cylinder(&self, n: usize, y: usize) -> T {
        match self {
            Potential::Constant(c) => *c,
            Potential::Digits { depth, values } => values[y / pow3(n - depth)],
            Potential::Continuous { f, .. } => {
                f((T::from_usize(y).unwrap() + T::lit(0.5)) / T::from_usize(pow3(n)).unwrap())
            }
        }
    }

    /// Sum of φ along the periodic orbit with digit block `block`.
    fn orbit_sum(&self, block: &[u8]) -> T {
        let n = block.len();
        let mut acc = Compensated::new();
        for k in 0..n {
            let digit = |j: usize| block[(k + j) % n] as usize;
            acc.add(match self {
                Potential::Constant(c) => *c,
                Potential::Digits { depth, values } => values[(0..*depth).fold(0, |x, j| 3 * x + digit(j))],
                Potential::Continuous { f, .. } => {
                    let num = (0..n).fold(0u64, |x, j| 3 * x + digit(j) as u64);
                    f(T::from_u64(num).unwrap() / T::from_u64(3u64.pow(n as u32) - 1).unwrap())
                }
            });
        }
        acc.value()
    }

    /// `sup |φ|` over the depth-`n` discretization.
    pub fn sup_norm(&self, n: usize) -> T {
        (0..pow3(n)).map(|y| self.on_cylinder(n, y).abs()).fold(T::zero(), T::max)
    }

    /// Whether `‖φ‖_∞ <= 1/4` on the depth-`n` discretization.
    pub fn is_small(&self, n: usize) -> bool {
        self.sup_norm(n) <= T::lit(0.25)
    }
}

/// The Ruelle operator at depth `n` with its leading eigendata and the
/// conjugacy knots `H_k = μ([0, k 3^{−n}])`.
#[derive(Clone, Debug)]
pub struct TransferSystem<T> {
    depth: usize,
    weights: Vec<T>,
    pressure: T,
    right_eig: Vec<T>,
    eigmeasure: Vec<T>,
    h_knots: Vec<T>,
    iterations: usize,
    approximation_error: Option<T>,
}

fn apply_right<T: Scalar>(w: &[T], f: &[T], n: usize) -> Vec<T> {
    let top = pow3(n - 1);
    (0..w.len())
        .map(|x| {
            let base = x / 3;
            (0..3).map(|j| j * top + base).map(|y| w[y] * f[y]).fold(T::zero(), |a, b| a + b)
        })
        .collect()
}

fn apply_left<T: Scalar>(w: &[T], nu: &[T], n: usize) -> Vec<T> {
    let top = pow3(n - 1);
    (0..w.len())
        .map(|y| {
            let r = y % top;
            w[y] * (nu[3 * r] + nu[3 * r + 1] + nu[3 * r + 2])
        })
        .collect()
}

fn normalize_sum<T: Scalar>(v: &mut [T]) -> T {
    let s: T = v.iter().copied().collect::<Compensated<T>>().value();
    for x in v.iter_mut() {
        *x /= s;
    }
    s
}

/// Power iteration on a positive vector; returns `(eigenvalue, vector, steps)`.
fn power<T: Scalar>(apply: impl Fn(&[T]) -> Vec<T>, size: usize, cap: usize) -> Result<(T, Vec<T>, usize)> {
    let mut v = vec![T::one() / T::from_usize(size).unwrap(); size];
    let mut eig = T::zero();
    let tol = T::lit(POWER_TOL);
    let mut residual = T::infinity();
    for step in 1..=cap {
        let mut next = apply(&v);
        let value = normalize_sum(&mut next);
        residual = next.iter().zip(&v).map(|(a, b)| (*a - *b).abs()).fold(T::zero(), T::max)
            / next.iter().copied().fold(T::zero(), T::max);
        let settled = (value - eig).abs() <= tol * value;
        eig = value;
        v = next;
        if settled && residual <= tol {
            return Ok((eig, v, step));
        }
    }
    Err(Error::NoConvergence { iterations: cap, residual: residual.as_f64() })
}

/// Builds the depth-`n` operator of `phi`.
///
/// Finite-range potentials with range `<= n` give the exact operator; a
/// continuous potential is replaced by its midpoint discretization and the
/// supplied modulus is reported as `approximation_error`.
pub fn build_system<T: Scalar>(phi: &Potential<T>, depth: usize) -> Result<TransferSystem<T>> {
    if depth == 0 || depth > MAX_DEPTH {
        return Err(Error::Capacity(format!("transfer depth must be in 1..={MAX_DEPTH}, got {depth}")));
    }
    if let Some(m) = phi.range_depth() {
        if m > depth {
            return Err(Error::Domain(format!("potential of range {m} needs depth >= {m}, got {depth}")));
        }
    }
    let size = pow3(depth);
    let weights: Vec<T> = (0..size).map(|y| phi.on_cylinder(depth, y).exp()).collect();
    if weights.iter().any(|w| !(w.is_finite() && *w > T::zero())) {
        return Err(Error::Domain("potential weights must be finite".into()));
    }
    // The operator maps depth-n functions to depth-(n−1) ones, so both
    // iterations settle after about n steps; the cap only guards stagnation.
    let cap = 20 * depth + 200;
    let (eig, mut psi, right_steps) = power(|f| apply_right(&weights, f, depth), size, cap)?;
    let (_, mu, left_steps) = power(|nu| apply_left(&weights, nu, depth), size, cap)?;
    let pairing: T = psi.iter().zip(&mu).map(|(a, b)| *a * *b).collect::<Compensated<T>>().value();
    for x in psi.iter_mut() {
        *x /= pairing;
    }
    if let Some(k) = mu.iter().position(|m| !(*m > T::zero())) {
        return Err(Error::Domain(format!("cylinder {k} has zero eigenmeasure mass; full support fails")));
    }
    let mut h_knots = Vec::with_capacity(size + 1);
    let mut acc = Compensated::new();
    h_knots.push(T::zero());
    for m in &mu {
        acc.add(*m);
        h_knots.push(acc.value());
    }
    h_knots[size] = T::one();
    let approximation_error = match phi {
        Potential::Continuous { modulus, .. } => Some(modulus(depth)),
        _ => None,
    };
    Ok(TransferSystem {
        depth,
        weights,
        pressure: eig.ln(),
        right_eig: psi,
        eigmeasure: mu,
        h_knots,
        iterations: right_steps.max(left_steps),
        approximation_error,
    })
}

impl<T: Scalar> TransferSystem<T> {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn pressure(&self) -> T {
        self.pressure
    }

    /// ψ with `∑ ψ μ = 1`.
    pub fn right_eig(&self) -> &[T] {
        &self.right_eig
    }

    /// Cylinder masses of the eigenmeasure, summing to 1.
    pub fn eigmeasure(&self) -> &[T] {
        &self.eigmeasure
    }

    /// `H_k = h⁻¹(k 3^{−n})` for `k = 0..=3^n`.
    pub fn h_knots(&self) -> &[T] {
        &self.h_knots
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Bound on `‖φ − φ_ε‖_∞` for continuous potentials.
    pub fn approximation_error(&self) -> Option<T> {
        self.approximation_error
    }

    /// `L f` for a depth-n cylinder function.
    pub fn apply(&self, f: &[T]) -> Vec<T> {
        apply_right(&self.weights, f, self.depth)
    }

    /// `‖L ψ − e^P ψ‖_∞ / ‖ψ‖_∞`.
    pub fn eigen_residual(&self) -> T {
        let lpsi = self.apply(&self.right_eig);
        let e = self.pressure.exp();
        let sup = self.right_eig.iter().copied().fold(T::zero(), T::max);
        lpsi.iter().zip(&self.right_eig).map(|(a, b)| (*a - e * *b).abs()).fold(T::zero(), T::max) / sup
    }

    /// `max_y |μ(T y) e^{φ(y) − P} − μ(y)| / μ(y)` over depth-n cylinders.
    pub fn transfer_law_residual(&self) -> T {
        let image = apply_left(&self.weights, &self.eigmeasure, self.depth);
        let e = self.pressure.exp();
        image.iter().zip(&self.eigmeasure).map(|(a, m)| (*a / e - *m).abs() / *m).fold(T::zero(), T::max)
    }

    fn cells(&self) -> T {
        T::from_usize(self.eigmeasure.len()).unwrap()
    }

    /// `h⁻¹(x) = μ([0, x])`, linear between knots.
    pub fn h_inverse(&self, x: T) -> T {
        let x = x.max(T::zero()).min(T::one());
        let u = x * self.cells();
        let k = u.floor().to_usize().unwrap_or(0).min(self.eigmeasure.len() - 1);
        let frac = u - T::from_usize(k).unwrap();
        self.h_knots[k] + frac * (self.h_knots[k + 1] - self.h_knots[k])
    }

    /// The inverse of `h_inverse`.
    pub fn h(&self, z: T) -> T {
        let z = z.max(T::zero()).min(T::one());
        let size = self.eigmeasure.len();
        let k = self.h_knots.partition_point(|&v| v <= z).saturating_sub(1).min(size - 1);
        let width = self.h_knots[k + 1] - self.h_knots[k];
        let frac = ((z - self.h_knots[k]) / width).max(T::zero()).min(T::one());
        (T::from_usize(k).unwrap() + frac) / self.cells()
    }

    /// `T̂ = h⁻¹ ∘ T ∘ h`.
    pub fn t_hat(&self, z: T) -> Result<T> {
        let x = self.h(z);
        if x >= T::one() {
            return Ok(T::one());
        }
        Ok(self.h_inverse(tripling(x)?.0))
    }

    /// Images of the branch cuts `1/3, 2/3` under `h⁻¹`.
    pub fn cuts(&self) -> [T; 2] {
        let third = self.eigmeasure.len() / 3;
        [self.h_knots[third], self.h_knots[2 * third]]
    }

    /// `count` deterministic sample points at least `VERIFY_STEP` from the
    /// cuts and the ends.
    pub fn samples(&self, count: usize, seed: u64) -> Vec<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let margin = VERIFY_STEP * 1.01;
        let cuts = self.cuts().map(|c| c.as_f64());
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let z: f64 = rng.gen_range(margin..1.0 - margin);
            if cuts.iter().all(|c| (z - c).abs() > margin) {
                out.push(T::lit(z));
            }
        }
        out
    }

    pub fn to_json(&self) -> Value {
        json!({
            "depth": self.depth,
            "pressure": self.pressure.as_f64(),
            "iterations": self.iterations,
            "eigen_residual": self.eigen_residual().as_f64(),
            "approximation_error": self.approximation_error.map(|v| v.as_f64()),
            "h_knots": self.h_knots.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
        })
    }

    /// Writes `x,h,h_inv,t_hat` on the given grid.
    pub fn write_csv<W: Write>(&self, out: W, grid: &[T]) -> Result<()> {
        let io = |e: csv::Error| Error::Capability(format!("csv output failed: {e}"));
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["x", "h", "h_inv", "t_hat"]).map_err(io)?;
        for &x in grid {
            wtr.write_record([fmt17(x), fmt17(self.h(x)), fmt17(self.h_inverse(x)), fmt17(self.t_hat(x)?)])
                .map_err(io)?;
        }
        wtr.flush().map_err(|e| Error::Capability(format!("csv output failed: {e}")))?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeCheck<T> {
    pub max_rel_dev: T,
    pub worst_sample: T,
}

/// Compares the centered slope of `T̂` with `exp(P − φ(h(z)))` at each sample.
pub fn verify_derivative_identity<T: Scalar>(
    sys: &TransferSystem<T>,
    phi: &Potential<T>,
    samples: &[T],
) -> Result<DerivativeCheck<T>> {
    let delta = T::lit(VERIFY_STEP);
    let cuts = sys.cuts();
    let mut worst = DerivativeCheck { max_rel_dev: T::zero(), worst_sample: T::zero() };
    for &z in samples {
        if z - delta <= T::zero() || z + delta >= T::one() || cuts.iter().any(|c| (z - *c).abs() <= delta) {
            return Err(Error::Domain(format!("sample {z} is within {delta} of a branch cut")));
        }
        let slope = (sys.t_hat(z + delta)? - sys.t_hat(z - delta)?) / (delta + delta);
        let expected = (sys.pressure() - phi.eval(sys.h(z))).exp();
        let dev = (slope - expected).abs() / expected;
        if dev > worst.max_rel_dev {
            worst = DerivativeCheck { max_rel_dev: dev, worst_sample: z };
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicSumReport<T> {
    pub max_abs_sum: T,
    /// Digit block of the worst orbit; its point is `numerator / (3^n − 1)`.
    pub worst_orbit: Vec<u8>,
    pub numerator: u64,
    pub denominator: u64,
}

/// `max |∑_{k<n} φ(T^k p)|` over all periodic points of period `n <= period_max`.
pub fn periodic_sum_check<T: Scalar>(phi: &Potential<T>, period_max: usize) -> Result<PeriodicSumReport<T>> {
    if period_max == 0 || period_max > MAX_PERIOD {
        return Err(Error::Capacity(format!("period_max must be in 1..={MAX_PERIOD}, got {period_max}")));
    }
    let mut best =
        PeriodicSumReport { max_abs_sum: T::neg_infinity(), worst_orbit: vec![], numerator: 0, denominator: 2 };
    for n in 1..=period_max {
        let mut block = vec![0u8; n];
        for code in 0..pow3(n) {
            let mut c = code;
            for slot in block.iter_mut().rev() {
                *slot = (c % 3) as u8;
                c /= 3;
            }
            let s = phi.orbit_sum(&block).abs();
            if s > best.max_abs_sum {
                best = PeriodicSumReport {
                    max_abs_sum: s,
                    worst_orbit: block.clone(),
                    numerator: code as u64,
                    denominator: 3u64.pow(n as u32) - 1,
                };
            }
        }
    }
    Ok(best)
}
