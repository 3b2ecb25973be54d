//! Realization of the binary Cantor set determined by a proportion pair.
//!
//! Every position is a sum of Ψ over a ≺-initial segment of words. Writing
//! `S(v) = ∑_u Ψ(vu)` for the mass of the cylinder `K_v` (in units of `L`),
//! the cylinder is `K_v = L·[left(v), left(v) + S(v)]` with
//! `left(v) = ∑_{k : v_{k+1} = 1} (S(v_1⋯v_k 0) + Ψ(v_1⋯v_k))`,
//! and the gap is `I_v = L·(left(v) + S(v0), left(v) + S(v0) + Ψ(v))`.
//! The built-in proportion kinds have closed forms for `S`, so positions are
//! exact to rounding at any depth; custom kinds are enumerated.

use std::io::Write;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::proportions::{decay_envelope, psi, sum_psi, Epsilons, Kind, ProportionPair, PsiSum, CUSTOM_MAX_DEPTH};
use crate::scalar::{fmt17, Compensated, Scalar};
use crate::words::{in_order, Coding, Word};

/// Deepest gap table [`realize`] builds (cylinders are stored one level deeper).
pub const MAX_TABLE_DEPTH: usize = 20;

/// Deepest level a coding is followed by [`CantorGeometry::embed`].
pub const MAX_DESCENT: usize = 4000;

/// Cylinder masses `S(v)`, gap masses `Ψ(v)` and θ-weighted masses
/// `Q_i(v) = ∑_u θ_i(vu) Ψ(vu)`.
#[derive(Debug)]
enum MassModel<T> {
    Zero,
    Length(LengthModel<T>),
    Spine(SpineModel<T>),
    Enumerated(EnumeratedModel<T>),
}

/// Length-only θ: `Ψ(w) = Ψ(|w|)`, `S(v) = Ψ(n) R(n)`, `Q(v) = Ψ(n) q(n)` with
/// `R(n) = 1 + 2(λ+ε_n) R(n+1)` and `q(n) = ε_n + 2(λ+ε_n) q(n+1)`.
#[derive(Debug)]
struct LengthModel<T> {
    eps: Arc<dyn Epsilons<T>>,
    psi: Vec<T>,
    ratio: Vec<T>,
    weighted: Vec<T>,
}

/// Case (b): only the spine words `c_j` (suffixes of `…0101`) carry a
/// non-trivial Ψ. A word ending in 1 whose longest alternating suffix has
/// length `A` has `Ψ = λ^{n−A} Ψ(c_A)`; any other word has `Ψ = λ^n`.
#[derive(Debug)]
struct SpineModel<T> {
    /// `Ψ(c_j)`.
    spine: Vec<T>,
    /// `tail[par][i] = ∑_{j >= i, j ≡ par} Ψ(c_j)`.
    tail: [Vec<T>; 2],
    /// `weighted[k] = ∑_{k' >= k} ε_{k'} Ψ(c_{2k'})`.
    weighted: Vec<T>,
    /// Mass off the spine, `λ C / (1 − 2λ)` with `C = ∑ Ψ(c_j)`.
    off_spine: T,
}

/// Custom θ: all masses tabulated bottom-up to a fixed depth.
#[derive(Debug)]
struct EnumeratedModel<T> {
    depth: usize,
    psi: Vec<T>,
    mass: Vec<T>,
    weighted: [Vec<T>; 2],
}

fn alternating_suffix(v: &[u8]) -> usize {
    if v.is_empty() {
        return 0;
    }
    let mut a = 1;
    while a < v.len() && v[v.len() - 1 - a] != v[v.len() - a] {
        a += 1;
    }
    a
}

fn is_alternating_prefix(v: &[u8]) -> bool {
    v.iter().enumerate().all(|(j, &l)| l as usize == j % 2)
}

impl<T: Scalar> LengthModel<T> {
    fn build(lambda: T, eps: Arc<dyn Epsilons<T>>) -> Result<Self> {
        let tiny = T::epsilon().powi(3);
        let two = T::lit(2.0);
        let mut psi = vec![T::one()];
        while *psi.last().unwrap() > tiny {
            let n = psi.len() - 1;
            if n > crate::proportions::STRUCTURED_MAX_DEPTH {
                return Err(Error::Capacity("cylinder masses do not decay".into()));
            }
            psi.push(psi[n] * (lambda + eps.eps(n)));
        }
        // Start the backward recursion where 2(λ + sup ε) < 1 and has been
        // applied often enough to damp the starting error below rounding.
        let mut m = psi.len() - 1;
        while two * (lambda + eps.sup_from(m)) >= T::one() {
            m += 1;
            if m > crate::proportions::STRUCTURED_MAX_DEPTH {
                return Err(Error::NotCertified("2(lambda + eps_n) stays >= 1".into()));
            }
        }
        let q = two * (lambda + eps.sup_from(m));
        let steps = (T::epsilon().ln() / q.ln()).ceil().to_usize().unwrap_or(0).max(1);
        let top = m + steps;
        let lower = T::one() / (T::one() - two * lambda);
        let upper = T::one() / (T::one() - q);
        let mut r = (lower + upper) / two;
        let mut w = eps.sup_from(m) * upper / two;
        let keep = psi.len();
        let mut ratio = vec![T::zero(); keep];
        let mut weighted = vec![T::zero(); keep];
        for n in (0..top).rev() {
            let f = two * (lambda + eps.eps(n));
            r = T::one() + f * r;
            w = eps.eps(n) + f * w;
            if n < keep {
                ratio[n] = r;
                weighted[n] = w;
            }
        }
        Ok(Self { eps, psi, ratio, weighted })
    }

    fn level(&self, lambda: T, n: usize) -> (T, T, T) {
        if n < self.psi.len() {
            return (self.psi[n], self.ratio[n], self.weighted[n]);
        }
        // Beyond the table Ψ is below ε³; extend with the asymptotic ratio.
        let last = self.psi.len() - 1;
        let mut p = self.psi[last];
        for j in last..n {
            p *= lambda + self.eps.eps(j);
        }
        let two = T::lit(2.0);
        let e = self.eps.sup_from(n);
        let r = T::one() / (T::one() - two * (lambda + e));
        (p, r, e * r)
    }
}

impl<T: Scalar> SpineModel<T> {
    fn build(lambda: T, eps: Arc<dyn Epsilons<T>>) -> Result<Self> {
        let tiny = T::epsilon().powi(3);
        let two = T::lit(2.0);
        let mut spine = vec![T::one()];
        while *spine.last().unwrap() > tiny || spine.len() % 2 == 0 {
            let j = spine.len() - 1;
            if j > crate::proportions::STRUCTURED_MAX_DEPTH {
                return Err(Error::Capacity("spine masses do not decay".into()));
            }
            let f = if j % 2 == 0 { lambda + eps.eps(j / 2) } else { lambda };
            spine.push(spine[j] * f);
        }
        let n = spine.len();
        let mut tail = [vec![T::zero(); n + 2], vec![T::zero(); n + 2]];
        for i in (0..n).rev() {
            let par = i % 2;
            tail[par][i] = tail[par][i + 2] + spine[i];
            tail[1 - par][i] = tail[1 - par][i + 1];
        }
        let kmax = (n - 1) / 2;
        let mut weighted = vec![T::zero(); kmax + 2];
        for k in (0..=kmax).rev() {
            weighted[k] = weighted[k + 1] + eps.eps(k) * spine[2 * k];
        }
        let c = tail[0][0] + tail[1][0];
        Ok(Self { spine, tail, weighted, off_spine: lambda * c / (T::one() - two * lambda) })
    }

    fn tail_sum(&self, from: usize, par: usize) -> T {
        self.tail[par % 2].get(from).copied().unwrap_or(T::zero())
    }

    fn spine_at(&self, j: usize) -> T {
        self.spine.get(j).copied().unwrap_or(T::zero())
    }

    fn psi(&self, lambda: T, v: &[u8]) -> T {
        let n = v.len();
        let a = if v.last() == Some(&1) { alternating_suffix(v) } else { 0 };
        lambda.powi((n - a) as i32) * self.spine_at(a)
    }

    fn mass(&self, lambda: T, v: &[u8]) -> T {
        let n = v.len();
        let Some(&last) = v.last() else {
            return self.off_spine + self.tail_sum(0, 0) + self.tail_sum(0, 1);
        };
        let a = alternating_suffix(v);
        let good = if last == 1 { 0 } else { 1 };
        let ln = lambda.powi(n as i32);
        ln * self.off_spine + lambda.powi((n - a) as i32) * self.tail_sum(a, good + a) + ln * self.tail_sum(0, 1 - good)
    }

    fn weighted(&self, i: u8, v: &[u8]) -> T {
        if i == 0 || !is_alternating_prefix(v) {
            return T::zero();
        }
        self.weighted.get(v.len().div_ceil(2)).copied().unwrap_or(T::zero())
    }
}

impl<T: Scalar> EnumeratedModel<T> {
    fn build(p: &ProportionPair<T>, depth: usize) -> Result<Self> {
        if depth > CUSTOM_MAX_DEPTH {
            return Err(Error::Capacity(format!("custom proportions are enumerated only to depth {CUSTOM_MAX_DEPTH}")));
        }
        let count = (1usize << (depth + 1)) - 1;
        let mut psi_t = Vec::new();
        psi_t.try_reserve_exact(count).map_err(|e| Error::Capacity(format!("cannot allocate {count} masses: {e}")))?;
        for idx in 0..count {
            psi_t.push(psi(p, &Word::from_heap_index(idx))?);
        }
        let mut mass = psi_t.clone();
        let mut weighted = [vec![T::zero(); count], vec![T::zero(); count]];
        for idx in (0..count).rev() {
            let w = Word::from_heap_index(idx);
            for (i, row) in weighted.iter_mut().enumerate() {
                row[idx] = p.theta(i as u8, w.letters()) * psi_t[idx];
            }
            if w.len() < depth {
                let (c0, c1) = (2 * idx + 1, 2 * idx + 2);
                mass[idx] = psi_t[idx] + mass[c0] + mass[c1];
                for row in weighted.iter_mut() {
                    row[idx] = row[idx] + row[c0] + row[c1];
                }
            }
        }
        Ok(Self { depth, psi: psi_t, mass, weighted })
    }

    fn index(&self, v: &[u8]) -> Option<usize> {
        (v.len() <= self.depth).then(|| Word::new(v.to_vec()).unwrap().heap_index())
    }
}

/// The closed-form (or tabulated) geometry of a realized Cantor set,
/// queryable at any depth.
#[derive(Debug)]
pub struct CantorGeometry<T> {
    pair: ProportionPair<T>,
    model: MassModel<T>,
    total: T,
    scale: T,
    certified: PsiSum<T>,
    sum_error: T,
}

impl<T: Scalar> CantorGeometry<T> {
    /// Certifies `∑ Ψ` with [`sum_psi`] and builds the mass model. Custom
    /// kinds are enumerated to at least `min_depth`.
    pub fn new(p: &ProportionPair<T>, tail_tol: T, min_depth: usize) -> Result<Self> {
        let certified = sum_psi(p, tail_tol)?;
        let lambda = p.lambda();
        let two = T::lit(2.0);
        let model = match p.kind() {
            Kind::Zero => MassModel::Zero,
            Kind::LengthOnly(e) => MassModel::Length(LengthModel::build(lambda, Arc::clone(e))?),
            Kind::CaseB(e) => MassModel::Spine(SpineModel::build(lambda, Arc::clone(e))?),
            Kind::Custom(_) => MassModel::Enumerated(EnumeratedModel::build(p, certified.depth.max(min_depth))?),
        };
        let mut geometry =
            Self { pair: p.clone(), model, total: T::one(), scale: T::one(), certified, sum_error: T::zero() };
        let total = match geometry.model {
            MassModel::Zero => T::one() / (T::one() - two * lambda),
            _ => geometry.mass(&[]),
        };
        geometry.total = total;
        geometry.scale = total.recip();
        let discrepancy = (total - geometry.certified.total).abs() + geometry.certified.tail_bound;
        geometry.sum_error = discrepancy * geometry.scale;
        Ok(geometry)
    }

    pub fn pair(&self) -> &ProportionPair<T> {
        &self.pair
    }

    /// `∑_w Ψ(w)`.
    pub fn total(&self) -> T {
        self.total
    }

    /// `L = |I_e| = 1 / ∑ Ψ`.
    pub fn scale(&self) -> T {
        self.scale
    }

    /// The breadth-first certified sum the geometry was checked against.
    pub fn certified_sum(&self) -> &PsiSum<T> {
        &self.certified
    }

    /// Certified bound on the relative error of `L`.
    pub fn sum_error(&self) -> T {
        self.sum_error
    }

    /// `Ψ(v)` from the mass model (agrees with [`psi`] to rounding).
    pub fn psi(&self, v: &[u8]) -> T {
        let lambda = self.pair.lambda();
        match &self.model {
            MassModel::Zero => lambda.powi(v.len() as i32),
            MassModel::Length(m) => m.level(lambda, v.len()).0,
            MassModel::Spine(m) => m.psi(lambda, v),
            MassModel::Enumerated(m) => match m.index(v) {
                Some(i) => m.psi[i],
                None => psi(&self.pair, &Word::new(v.to_vec()).unwrap()).unwrap_or(T::zero()),
            },
        }
    }

    /// `S(v) = ∑_u Ψ(vu)`, so that `|K_v| = L·S(v)`.
    pub fn mass(&self, v: &[u8]) -> T {
        let lambda = self.pair.lambda();
        match &self.model {
            MassModel::Zero => lambda.powi(v.len() as i32) / (T::one() - T::lit(2.0) * lambda),
            MassModel::Length(m) => {
                let (p, r, _) = m.level(lambda, v.len());
                p * r
            }
            MassModel::Spine(m) => m.mass(lambda, v),
            MassModel::Enumerated(m) => match m.index(v) {
                Some(i) => m.mass[i],
                None => self.psi(v),
            },
        }
    }

    /// `Q_i(v) = ∑_u θ_i(vu) Ψ(vu)`.
    pub fn theta_mass(&self, i: u8, v: &[u8]) -> T {
        let lambda = self.pair.lambda();
        match &self.model {
            MassModel::Zero => T::zero(),
            MassModel::Length(m) => {
                let (p, _, q) = m.level(lambda, v.len());
                p * q
            }
            MassModel::Spine(m) => m.weighted(i, v),
            MassModel::Enumerated(m) => match m.index(v) {
                Some(idx) => m.weighted[i as usize][idx],
                None => T::zero(),
            },
        }
    }

    /// Upper bound for `∑_u |θ_i(vu)| Ψ(vu)`: `sup_{|w| >= |v|} |θ| · S(v)`.
    /// Exactly zero when θ_i vanishes on every extension of `v`.
    pub fn theta_mass_bound(&self, i: u8, v: &[u8]) -> T {
        match &self.model {
            MassModel::Zero => return T::zero(),
            MassModel::Spine(_) if i == 0 || !is_alternating_prefix(v) => return T::zero(),
            _ => {}
        }
        let env = if v.is_empty() {
            let root = self.pair.theta(0, v).abs().max(self.pair.theta(1, v).abs());
            root.max(decay_envelope(&self.pair, 0).unwrap_or(T::infinity()))
        } else {
            decay_envelope(&self.pair, v.len() - 1).unwrap_or(T::infinity())
        };
        env * self.mass(v)
    }

    /// `left(v)` in units of `L`.
    pub fn left(&self, v: &[u8]) -> T {
        let mut acc = Compensated::new();
        for k in 0..v.len() {
            if v[k] == 1 {
                let mut child = v[..k].to_vec();
                acc.add(self.psi(&child));
                child.push(0);
                acc.add(self.mass(&child));
            }
        }
        acc.value()
    }

    /// `K_v` as `(left, right)`.
    pub fn cylinder(&self, v: &[u8]) -> (T, T) {
        let l = self.left(v);
        let s = self.mass(v);
        (self.scale * l, self.scale * (l + s))
    }

    /// `I_v` as `(a_v, b_v)`.
    pub fn gap(&self, v: &[u8]) -> (T, T) {
        let mut child = v.to_vec();
        child.push(0);
        let a = self.left(v) + self.mass(&child);
        (self.scale * a, self.scale * (a + self.psi(v)))
    }

    /// `Θ(a) = L ∑_{w ≺ a} Ψ(w)`, with error at most `tol`.
    ///
    /// Follows the nested cylinders `K_{a_1⋯a_k}` until one is shorter than
    /// `tol`; a constant tail `0^∞` or `1^∞` pins the point to an endpoint of
    /// the current cylinder exactly.
    pub fn embed(&self, a: &Coding, tol: T) -> Result<T> {
        let tail = a.constant_tail();
        let mut prefix = Vec::new();
        let mut left = Compensated::new();
        for k in 0..=MAX_DESCENT {
            let mass = self.mass(&prefix);
            if let Some((start, c)) = tail {
                if k >= start {
                    let l = left.value();
                    return Ok(self.scale * if c == 0 { l } else { l + mass });
                }
            }
            let width = self.scale * mass;
            if width <= tol {
                return Ok(self.scale * left.value() + width / T::lit(2.0));
            }
            let letter = a.at(k);
            if letter == 1 {
                let mut zero = prefix.clone();
                zero.push(0);
                left.add(self.psi(&prefix));
                left.add(self.mass(&zero));
            }
            prefix.push(letter);
        }
        Err(Error::Capacity(format!(
            "embedding {a} reached depth {MAX_DESCENT} with cylinder width {:e} above tol {tol:e}",
            (self.scale * self.mass(&prefix)).as_f64()
        )))
    }
}

/// A gap `I_w = (a, b)` with `length = |I_w|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gap<T> {
    pub a: T,
    pub b: T,
    pub length: T,
}

/// The hull `K_w = [left, right]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval<T> {
    pub left: T,
    pub right: T,
}

impl<T: Scalar> Interval<T> {
    pub fn diam(&self) -> T {
        self.right - self.left
    }

    pub fn contains(&self, x: T) -> bool {
        self.left <= x && x <= self.right
    }
}

/// A realized Cantor set to depth `N`: gaps for `|w| <= N` and cylinders for
/// `|w| <= N + 1`, both stored breadth first.
#[derive(Debug, Clone)]
pub struct GapTable<T> {
    depth: usize,
    tail_bound: T,
    rows: Vec<Gap<T>>,
    cylinders: Vec<Interval<T>>,
    geometry: Arc<CantorGeometry<T>>,
}

/// Realizes the Cantor set of `p` to depth `depth`.
///
/// Positions are prefix sums, in ≺ order, over the gaps `|w| <= N`
/// interleaved with the masses of the leaf cylinders `|v| = N + 1`; the gap
/// lengths are `L·Ψ(w)` with Ψ evaluated as the literal product.
pub fn realize<T: Scalar>(p: &ProportionPair<T>, depth: usize, tail_tol: T) -> Result<GapTable<T>> {
    let geometry = CantorGeometry::new(p, tail_tol, depth + 1)?;
    GapTable::from_geometry(Arc::new(geometry), depth)
}

impl<T: Scalar> GapTable<T> {
    pub fn from_geometry(geometry: Arc<CantorGeometry<T>>, depth: usize) -> Result<Self> {
        if depth > MAX_TABLE_DEPTH {
            return Err(Error::Capacity(format!(
                "gap tables are limited to depth {MAX_TABLE_DEPTH}, requested {depth}"
            )));
        }
        let p = geometry.pair().clone();
        let scale = geometry.scale();
        let n_rows = (1usize << (depth + 1)) - 1;
        let n_cyl = (1usize << (depth + 2)) - 1;
        let mut rows = Vec::new();
        let mut cylinders = Vec::new();
        rows.try_reserve_exact(n_rows)
            .and_then(|_| cylinders.try_reserve_exact(n_cyl))
            .map_err(|e| Error::Capacity(format!("cannot allocate a depth-{depth} table: {e}")))?;
        rows.resize(n_rows, Gap { a: T::zero(), b: T::zero(), length: T::zero() });
        cylinders.resize(n_cyl, Interval { left: T::zero(), right: T::zero() });

        let mut first_error = None;
        let mut acc = Compensated::new();
        let mut leaves = Compensated::new();
        let mut word = Word::empty();
        // In-order walk of the tree of depth N+1: leaves contribute cylinder
        // masses, inner nodes contribute gaps.
        in_order(&mut word, depth + 1, &mut |w| {
            let idx = w.heap_index();
            if w.len() == depth + 1 {
                let m = geometry.mass(w.letters());
                let left = acc.value();
                acc.add(m);
                leaves.add(m);
                cylinders[idx] = Interval { left: scale * left, right: scale * acc.value() };
            } else {
                let g = match psi(&p, w) {
                    Ok(g) => g,
                    Err(e) => {
                        first_error.get_or_insert(e);
                        T::zero()
                    }
                };
                let a = scale * acc.value();
                acc.add(g);
                rows[idx] = Gap { a, b: scale * acc.value(), length: scale * g };
            }
        });
        if let Some(e) = first_error {
            return Err(e);
        }
        for idx in (0..n_rows).rev() {
            let (l, r) = (cylinders[2 * idx + 1], cylinders[2 * idx + 2]);
            cylinders[idx] = Interval { left: l.left, right: r.right };
        }
        let rounding = T::lit((depth + 4) as f64) * T::epsilon();
        let tail_bound = scale * leaves.value() + geometry.sum_error() + rounding;
        Ok(Self { depth, tail_bound, rows, cylinders, geometry })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn lambda(&self) -> T {
        self.geometry.pair().lambda()
    }

    /// `L = |I_e|`.
    pub fn scale(&self) -> T {
        self.geometry.scale()
    }

    pub fn total(&self) -> T {
        self.geometry.total()
    }

    /// Bound on the measure not covered by the stored gaps.
    pub fn tail_bound(&self) -> T {
        self.tail_bound
    }

    /// Certified relative error of `L`.
    pub fn sum_error(&self) -> T {
        self.geometry.sum_error()
    }

    pub fn pair(&self) -> &ProportionPair<T> {
        self.geometry.pair()
    }

    pub fn geometry(&self) -> &Arc<CantorGeometry<T>> {
        &self.geometry
    }

    pub fn gap(&self, w: &Word) -> Result<Gap<T>> {
        if w.len() > self.depth {
            return Err(Error::DepthExceeded { requested: w.len(), available: self.depth });
        }
        Ok(self.rows[w.heap_index()])
    }

    pub fn cylinder(&self, w: &Word) -> Result<Interval<T>> {
        if w.len() > self.depth + 1 {
            return Err(Error::DepthExceeded { requested: w.len(), available: self.depth + 1 });
        }
        Ok(self.cylinders[w.heap_index()])
    }

    /// Rows in ≺ order, which is left-to-right order.
    pub fn rows(&self) -> Vec<(Word, Gap<T>)> {
        let mut out = Vec::with_capacity(self.rows.len());
        let mut word = Word::empty();
        in_order(&mut word, self.depth, &mut |w| out.push((w.clone(), self.rows[w.heap_index()])));
        out
    }

    /// `∑_{|w| <= N} |I_w|`.
    pub fn covered(&self) -> T {
        self.rows.iter().map(|g| g.length).collect::<Compensated<T>>().value()
    }

    /// Writes `word,a,b,length` rows in ≺ order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::Capability(format!("csv output failed: {e}"));
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["word", "a", "b", "length"]).map_err(io)?;
        for (w, g) in self.rows() {
            wtr.write_record([w.to_string(), fmt17(g.a), fmt17(g.b), fmt17(g.length)]).map_err(io)?;
        }
        wtr.flush().map_err(|e| Error::Capability(format!("csv output failed: {e}")))?;
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows()
            .into_iter()
            .map(|(w, g)| json!({"word": w.to_string(), "a": g.a.as_f64(), "b": g.b.as_f64(), "length": g.length.as_f64()}))
            .collect();
        json!({
            "lambda": self.lambda().as_f64(),
            "L": self.scale().as_f64(),
            "depth": self.depth,
            "total": self.total().as_f64(),
            "tail_bound": self.tail_bound.as_f64(),
            "sum_error": self.sum_error().as_f64(),
            "proportions": self.pair().to_json().ok(),
            "rows": rows,
        })
    }
}

/// `Θ(a)` for the Cantor set of `p`, with error at most `tol`.
pub fn theta_embed<T: Scalar>(p: &ProportionPair<T>, a: &Coding, tol: T) -> Result<T> {
    if !(tol > T::zero()) {
        return Err(Error::Domain(format!("tol = {tol} must be positive")));
    }
    let geometry = CantorGeometry::new(p, tol * T::lit(0.25), 0)?;
    geometry.embed(a, tol)
}

/// `λ_i(w) = |I_{iw}| / |I_w|` read back from the table.
pub fn proportions_of<T: Scalar>(table: &GapTable<T>, i: u8, w: &Word) -> Result<T> {
    if w.len() + 1 > table.depth() {
        return Err(Error::DepthExceeded { requested: w.len() + 1, available: table.depth() });
    }
    Ok(table.gap(&w.prepended(i))?.length / table.gap(w)?.length)
}

/// The ratios `(|K_{w0}|, |I_w|, |K_{w1}|) / |K_w|`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingRatios<T> {
    pub word: Word,
    pub r0: T,
    pub rgap: T,
    pub r1: T,
}

pub fn scaling_ratios<T: Scalar>(table: &GapTable<T>, w: &Word) -> Result<ScalingRatios<T>> {
    if w.len() + 1 > table.depth() {
        return Err(Error::DepthExceeded { requested: w.len() + 1, available: table.depth() });
    }
    let whole = table.cylinder(w)?.diam();
    let r0 = table.cylinder(&w.pushed(0))?.diam() / whole;
    let r1 = table.cylinder(&w.pushed(1))?.diam() / whole;
    Ok(ScalingRatios { word: w.clone(), r0, rgap: T::one() - r0 - r1, r1 })
}

/// `r(y_{−n}⋯y_{−1})` for each `n` in `schedule`, where the left-infinite
/// word `⋯y_{−2}y_{−1}` repeats `reversed_tail = y_{−1}y_{−2}⋯` periodically.
pub fn scaling_limit<T: Scalar>(
    table: &GapTable<T>,
    reversed_tail: &Word,
    schedule: &[usize],
) -> Result<Vec<ScalingRatios<T>>> {
    if reversed_tail.is_empty() {
        return Err(Error::Domain("reversed tail must be non-empty".into()));
    }
    let t = reversed_tail.letters();
    schedule
        .iter()
        .map(|&n| {
            let letters = (0..n).rev().map(|k| t[k % t.len()]).collect();
            scaling_ratios(table, &Word::new(letters)?)
        })
        .collect()
}
