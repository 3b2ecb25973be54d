//! Finite words and eventually periodic codings over {0,1}, with the order ≺.
//!
//! A word `w` labels the gap `I_w`; a coding labels a point of the Cantor set.
//! The order ≺ places every gap between the codings of its two endpoints:
//! `w0(1)^∞ ≺ w ≺ w1(0)^∞`. Everything here is symbolic, so the order can be
//! used before any Cantor set has been realized.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest `max_len` accepted by [`enumerate_words`].
pub const MAX_ENUMERATION_LEN: usize = 24;

/// A finite binary word. The empty word prints as `e`.
///
/// `Ord` is the order ≺ on gaps, not the lexicographic order on strings.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Word {
    letters: Vec<u8>,
}

impl Word {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(letters: Vec<u8>) -> Result<Self> {
        if let Some(&bad) = letters.iter().find(|&&l| l > 1) {
            return Err(Error::Parse(format!("letter {bad} is not in {{0,1}}")));
        }
        Ok(Self { letters })
    }

    /// Word of length `len` whose letters are the binary digits of `bits`,
    /// most significant first.
    pub fn from_bits(bits: u64, len: usize) -> Self {
        assert!(len <= 64);
        let letters = (0..len).map(|k| ((bits >> (len - 1 - k)) & 1) as u8).collect();
        Self { letters }
    }

    /// `(01)^k`.
    pub fn alternating(k: usize) -> Self {
        let mut letters = Vec::with_capacity(2 * k);
        for _ in 0..k {
            letters.extend_from_slice(&[0, 1]);
        }
        Self { letters }
    }

    pub fn letters(&self) -> &[u8] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn push(&mut self, letter: u8) {
        debug_assert!(letter <= 1);
        self.letters.push(letter);
    }

    pub fn pushed(&self, letter: u8) -> Self {
        let mut w = self.clone();
        w.push(letter);
        w
    }

    pub fn prepended(&self, letter: u8) -> Self {
        debug_assert!(letter <= 1);
        let mut letters = Vec::with_capacity(self.len() + 1);
        letters.push(letter);
        letters.extend_from_slice(&self.letters);
        Self { letters }
    }

    pub fn concat(&self, other: &Word) -> Self {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Self { letters }
    }

    pub fn repeat(&self, k: usize) -> Self {
        Self { letters: self.letters.repeat(k) }
    }

    /// Position in the breadth-first layout `e, 0, 1, 00, 01, ...`.
    pub fn heap_index(&self) -> usize {
        let value = self.letters.iter().fold(0usize, |acc, &l| (acc << 1) | l as usize);
        (1usize << self.len()) - 1 + value
    }

    pub fn from_heap_index(index: usize) -> Self {
        let len = (usize::BITS - 1 - (index + 1).leading_zeros()) as usize;
        let value = index + 1 - (1usize << len);
        Self::from_bits(value as u64, len)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return f.write_str("e");
        }
        for &l in &self.letters {
            f.write_str(if l == 0 { "0" } else { "1" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "e" || s.is_empty() {
            return Ok(Self::empty());
        }
        parse_letters(s).map(|letters| Self { letters })
    }
}

fn parse_letters(s: &str) -> Result<Vec<u8>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(Error::Parse(format!("unexpected character {c:?} in {s:?}"))),
        })
        .collect()
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_words(&self.letters, &other.letters)
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// ≺ on words: at the first difference the 0-branch is on the left; if one
/// word extends the other, the extension lies left of it iff it continues
/// with a 0.
fn cmp_words(u: &[u8], w: &[u8]) -> Ordering {
    for (a, b) in u.iter().zip(w) {
        if a != b {
            return a.cmp(b);
        }
    }
    match u.len().cmp(&w.len()) {
        Ordering::Equal => Ordering::Equal,
        Ordering::Less => {
            if w[u.len()] == 0 {
                Ordering::Greater
            } else {
                Ordering::Less
            }
        }
        Ordering::Greater => {
            if u[w.len()] == 0 {
                Ordering::Less
            } else {
                Ordering::Greater
            }
        }
    }
}

/// An eventually periodic infinite coding `prefix · block^∞`, kept in a
/// canonical form so that equal sequences compare equal structurally.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Coding {
    prefix: Vec<u8>,
    block: Vec<u8>,
}

impl Coding {
    pub fn new(prefix: &Word, block: &Word) -> Result<Self> {
        if block.is_empty() {
            return Err(Error::Parse("repeating block must be non-empty".into()));
        }
        Ok(Self::canonical(prefix.letters.clone(), block.letters.clone()))
    }

    /// `block^∞`.
    pub fn periodic(block: &Word) -> Result<Self> {
        Self::new(&Word::empty(), block)
    }

    /// `letter^∞`.
    pub fn constant(letter: u8) -> Self {
        Self::canonical(Vec::new(), vec![letter])
    }

    /// `w · tail`.
    pub fn after(w: &Word, tail: &Coding) -> Self {
        let mut prefix = w.letters.clone();
        prefix.extend_from_slice(&tail.prefix);
        Self::canonical(prefix, tail.block.clone())
    }

    fn canonical(mut prefix: Vec<u8>, mut block: Vec<u8>) -> Self {
        let n = block.len();
        if let Some(d) = (1..=n).find(|&d| n % d == 0 && (d..n).all(|i| block[i] == block[i - d])) {
            block.truncate(d);
        }
        while let Some(&last) = prefix.last() {
            if last != *block.last().unwrap() {
                break;
            }
            prefix.pop();
            block.rotate_right(1);
        }
        Self { prefix, block }
    }

    pub fn prefix(&self) -> Word {
        Word { letters: self.prefix.clone() }
    }

    pub fn block(&self) -> Word {
        Word { letters: self.block.clone() }
    }

    /// Letter at 0-based index `k`, i.e. `a_{k+1}`.
    pub fn at(&self, k: usize) -> u8 {
        if k < self.prefix.len() {
            self.prefix[k]
        } else {
            self.block[(k - self.prefix.len()) % self.block.len()]
        }
    }

    /// First `n` letters.
    pub fn truncate(&self, n: usize) -> Word {
        Word { letters: (0..n).map(|k| self.at(k)).collect() }
    }

    /// `letter · self`.
    pub fn prepend(&self, letter: u8) -> Self {
        let mut prefix = Vec::with_capacity(self.prefix.len() + 1);
        prefix.push(letter);
        prefix.extend_from_slice(&self.prefix);
        Self::canonical(prefix, self.block.clone())
    }

    /// The shift `σ(a) = a_2 a_3 ...`.
    pub fn shift(&self) -> Self {
        if self.prefix.is_empty() {
            let mut block = self.block.clone();
            block.rotate_left(1);
            Self::canonical(Vec::new(), block)
        } else {
            Self::canonical(self.prefix[1..].to_vec(), self.block.clone())
        }
    }

    /// If the coding ends in a constant tail `c^∞`, returns `(start, c)` where
    /// every index `>= start` carries `c`.
    pub fn constant_tail(&self) -> Option<(usize, u8)> {
        (self.block.len() == 1).then(|| (self.prefix.len(), self.block[0]))
    }
}

impl fmt::Display for Coding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &l in &self.prefix {
            f.write_str(if l == 0 { "0" } else { "1" })?;
        }
        f.write_str("(")?;
        for &l in &self.block {
            f.write_str(if l == 0 { "0" } else { "1" })?;
        }
        f.write_str(")^inf")
    }
}

impl fmt::Debug for Coding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Parses the grammar `prefix(block)^inf`, e.g. `01(10)^inf` or `(01)^inf`.
impl FromStr for Coding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let body = s
            .strip_suffix(")^inf")
            .or_else(|| s.strip_suffix(")^∞"))
            .ok_or_else(|| Error::Parse(format!("coding {s:?} must end with \")^inf\"")))?;
        let (prefix, block) = body.split_once('(').ok_or_else(|| Error::Parse(format!("coding {s:?} has no \"(\"")))?;
        let prefix = parse_letters(prefix)?;
        let block = parse_letters(block)?;
        if block.is_empty() {
            return Err(Error::Parse(format!("coding {s:?} has an empty block")));
        }
        Ok(Self::canonical(prefix, block))
    }
}

impl Ord for Coding {
    fn cmp(&self, other: &Self) -> Ordering {
        let n = self.prefix.len().max(other.prefix.len()) + lcm(self.block.len(), other.block.len());
        (0..n).map(|k| self.at(k).cmp(&other.at(k))).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
    }
}

impl PartialOrd for Coding {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

/// Either side of a comparison under ≺.
#[derive(Clone, Copy, Debug)]
pub enum Symbol<'a> {
    Word(&'a Word),
    Coding(&'a Coding),
}

impl<'a> From<&'a Word> for Symbol<'a> {
    fn from(w: &'a Word) -> Self {
        Symbol::Word(w)
    }
}

impl<'a> From<&'a Coding> for Symbol<'a> {
    fn from(a: &'a Coding) -> Self {
        Symbol::Coding(a)
    }
}

/// The total order ≺ on words and codings.
///
/// A word is identified with the open gap between its endpoint codings
/// `w01^∞` and `w10^∞`; no coding lies strictly between those two, so a
/// coding `a` is right of `w` exactly when `w10^∞ ⪯ a`.
pub fn compare<'a, 'b>(x: impl Into<Symbol<'a>>, y: impl Into<Symbol<'b>>) -> Ordering {
    match (x.into(), y.into()) {
        (Symbol::Word(u), Symbol::Word(w)) => u.cmp(w),
        (Symbol::Coding(a), Symbol::Coding(b)) => a.cmp(b),
        (Symbol::Word(w), Symbol::Coding(a)) => word_vs_coding(w, a),
        (Symbol::Coding(a), Symbol::Word(w)) => word_vs_coding(w, a).reverse(),
    }
}

fn word_vs_coding(w: &Word, a: &Coding) -> Ordering {
    let (_, right) = boundary_codings(w);
    if right <= *a {
        Ordering::Less
    } else {
        Ordering::Greater
    }
}

/// Codings `(w01^∞, w10^∞)` of the left and right endpoints of the gap `I_w`.
pub fn boundary_codings(w: &Word) -> (Coding, Coding) {
    let left = Coding::canonical(w.pushed(0).letters, vec![1]);
    let right = Coding::canonical(w.pushed(1).letters, vec![0]);
    (left, right)
}

/// All words of length `<= max_len`, sorted by ≺ (an in-order walk of the
/// binary tree).
pub fn enumerate_words(max_len: usize) -> Result<Vec<Word>> {
    if max_len > MAX_ENUMERATION_LEN {
        return Err(Error::Capacity(format!(
            "enumerating words up to length {max_len} exceeds the limit {MAX_ENUMERATION_LEN}"
        )));
    }
    let count = (1usize << (max_len + 1)) - 1;
    let mut out = Vec::new();
    out.try_reserve_exact(count).map_err(|e| Error::Capacity(format!("cannot allocate {count} words: {e}")))?;
    let mut stack = Word::empty();
    in_order(&mut stack, max_len, &mut |w| out.push(w.clone()));
    Ok(out)
}

/// Visits every word of length `<= max_len` in ≺ order.
pub fn in_order(prefix: &mut Word, max_len: usize, visit: &mut impl FnMut(&Word)) {
    if prefix.len() < max_len {
        prefix.push(0);
        in_order(prefix, max_len, visit);
        prefix.letters.pop();
    }
    visit(prefix);
    if prefix.len() < max_len {
        prefix.push(1);
        in_order(prefix, max_len, visit);
        prefix.letters.pop();
    }
}

/// Words of length exactly `n` in ≺ order (which is binary order).
pub fn words_of_length(n: usize) -> impl Iterator<Item = Word> {
    assert!(n < 64, "word length {n} too large to enumerate");
    (0..1u64 << n).map(move |bits| Word::from_bits(bits, n))
}

/// Deterministic sample of eventually periodic codings with prefix length
/// `<= max_prefix` and block length in `1..=max_block`.
pub fn sample_codings(seed: u64, count: usize, max_prefix: usize, max_block: usize) -> Vec<Coding> {
    assert!(max_block >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let p = rng.gen_range(0..=max_prefix);
            let b = rng.gen_range(1..=max_block);
            let prefix = (0..p).map(|_| rng.gen_range(0..=1u8)).collect();
            let block = (0..b).map(|_| rng.gen_range(0..=1u8)).collect();
            Coding::canonical(prefix, block)
        })
        .collect()
}
