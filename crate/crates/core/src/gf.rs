//! Exact arithmetic in GF(q) and GF(q²) for an odd prime `q`, together with the
//! calculus of q-polynomials `F(x) = a·x + b·x^q` over GF(q²).
//!
//! GF(q²) is realised as GF(q)[θ] with θ² = ξ, where ξ is the smallest
//! non-square of GF(q). Consequently θ^q = −θ and the Frobenius map is
//! `a₀ + a₁θ ↦ a₀ − a₁θ`. Elements are stored as small integer indices
//! (`a₀·q + a₁`), so the derived `Ord` on [`Fq2`] is the lexicographic order on
//! `(a₀, a₁)`. All products, inverses and discrete logarithms are table driven.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest field order accepted by [`GaloisField::new`].
pub const MAX_FIELD_ORDER: u32 = 31;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GfError {
    #[error("field order {0} is not an odd prime")]
    NotOddPrime(u32),
    #[error("field order {0} exceeds the supported bound {MAX_FIELD_ORDER}")]
    TooLarge(u32),
    #[error("q-polynomial {0} is singular (a^(q+1) = b^(q+1))")]
    SingularPolynomial(String),
}

/// Canonical representative `0..q` of an element of GF(q).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Fq(pub u16);

/// Element `a₀ + a₁θ` of GF(q²), stored as the index `a₀·q + a₁`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Fq2(pub u16);

impl Fq {
    #[inline]
    pub fn value(self) -> u32 {
        self.0 as u32
    }
}

impl Fq2 {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Fq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Minimal field interface used by the generic linear algebra helpers.
pub trait FieldOps {
    type Elem: Copy + Eq + fmt::Debug;
    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn add(&self, a: Self::Elem, b: Self::Elem) -> Self::Elem;
    fn sub(&self, a: Self::Elem, b: Self::Elem) -> Self::Elem;
    fn mul(&self, a: Self::Elem, b: Self::Elem) -> Self::Elem;
    fn inv(&self, a: Self::Elem) -> Option<Self::Elem>;
    fn is_zero(&self, a: Self::Elem) -> bool {
        a == self.zero()
    }
}

fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// The prime field GF(p), p odd.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimeField {
    p: u32,
    inverses: Vec<u16>,
    square: Vec<bool>,
}

impl PrimeField {
    pub fn new(p: u32) -> Result<Self, GfError> {
        if p > MAX_FIELD_ORDER {
            return Err(GfError::TooLarge(p));
        }
        if p % 2 == 0 || !is_prime(p) {
            return Err(GfError::NotOddPrime(p));
        }
        let mut inverses = vec![0u16; p as usize];
        let mut square = vec![false; p as usize];
        for a in 1..p {
            for b in 1..p {
                if a * b % p == 1 {
                    inverses[a as usize] = b as u16;
                }
            }
            square[(a * a % p) as usize] = true;
        }
        Ok(Self { p, inverses, square })
    }

    #[inline]
    pub fn order(&self) -> u32 {
        self.p
    }

    /// Reduces an arbitrary integer into GF(p).
    #[inline]
    pub fn elem(&self, n: i64) -> Fq {
        Fq(n.rem_euclid(self.p as i64) as u16)
    }

    #[inline]
    pub fn zero(&self) -> Fq {
        Fq(0)
    }

    #[inline]
    pub fn one(&self) -> Fq {
        Fq(1)
    }

    #[inline]
    pub fn add(&self, a: Fq, b: Fq) -> Fq {
        Fq(((a.0 as u32 + b.0 as u32) % self.p) as u16)
    }

    #[inline]
    pub fn sub(&self, a: Fq, b: Fq) -> Fq {
        Fq(((a.0 as u32 + self.p - b.0 as u32) % self.p) as u16)
    }

    #[inline]
    pub fn neg(&self, a: Fq) -> Fq {
        Fq(((self.p - a.0 as u32) % self.p) as u16)
    }

    #[inline]
    pub fn mul(&self, a: Fq, b: Fq) -> Fq {
        Fq((a.0 as u32 * b.0 as u32 % self.p) as u16)
    }

    #[inline]
    pub fn inv(&self, a: Fq) -> Option<Fq> {
        (a.0 != 0).then(|| Fq(self.inverses[a.0 as usize]))
    }

    pub fn div(&self, a: Fq, b: Fq) -> Option<Fq> {
        self.inv(b).map(|ib| self.mul(a, ib))
    }

    pub fn pow(&self, a: Fq, mut e: u64) -> Fq {
        let mut base = a;
        let mut acc = Fq(1);
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// True for non-zero squares.
    #[inline]
    pub fn is_square(&self, a: Fq) -> bool {
        self.square[a.0 as usize]
    }

    /// The smallest non-square in canonical order.
    pub fn smallest_nonsquare(&self) -> Fq {
        (1..self.p as u16)
            .map(Fq)
            .find(|&a| !self.is_square(a))
            .expect("odd prime fields have non-squares")
    }

    pub fn elements(&self) -> impl Iterator<Item = Fq> {
        (0..self.p as u16).map(Fq)
    }

    /// Signed representative in `(-p/2, p/2]`, handy for reports.
    pub fn to_signed(&self, a: Fq) -> i64 {
        let v = a.0 as i64;
        if v > self.p as i64 / 2 {
            v - self.p as i64
        } else {
            v
        }
    }
}

impl FieldOps for PrimeField {
    type Elem = Fq;
    fn zero(&self) -> Fq {
        Fq(0)
    }
    fn one(&self) -> Fq {
        Fq(1)
    }
    fn add(&self, a: Fq, b: Fq) -> Fq {
        PrimeField::add(self, a, b)
    }
    fn sub(&self, a: Fq, b: Fq) -> Fq {
        PrimeField::sub(self, a, b)
    }
    fn mul(&self, a: Fq, b: Fq) -> Fq {
        PrimeField::mul(self, a, b)
    }
    fn inv(&self, a: Fq) -> Option<Fq> {
        PrimeField::inv(self, a)
    }
}

#[derive(Debug, PartialEq, Eq)]
struct Tables {
    base: PrimeField,
    xi: Fq,
    generator: Fq2,
    add: Vec<u16>,
    mul: Vec<u16>,
    inv: Vec<u16>,
    frob: Vec<u16>,
    norm: Vec<u16>,
    trace: Vec<u16>,
    log: Vec<u32>,
}

/// GF(q²) = GF(q)[θ], θ² = ξ. Cloning is cheap (shared tables).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaloisField {
    t: Arc<Tables>,
}

impl GaloisField {
    pub fn new(q: u32) -> Result<Self, GfError> {
        let base = PrimeField::new(q)?;
        let xi = base.smallest_nonsquare();
        let n = (q * q) as usize;
        let split = |i: usize| -> (u32, u32) { (i as u32 / q, i as u32 % q) };
        let join = |a0: u32, a1: u32| -> u16 { (a0 % q * q + a1 % q) as u16 };

        let mut add = vec![0u16; n * n];
        let mut mul = vec![0u16; n * n];
        for i in 0..n {
            let (a0, a1) = split(i);
            for j in 0..n {
                let (b0, b1) = split(j);
                add[i * n + j] = join(a0 + b0, a1 + b1);
                let c0 = (a0 * b0 + xi.0 as u32 * (a1 * b1 % q)) % q;
                let c1 = (a0 * b1 + a1 * b0) % q;
                mul[i * n + j] = join(c0, c1);
            }
        }
        let one = q as usize;
        let mut inv = vec![0u16; n];
        for i in 1..n {
            inv[i] = (1..n)
                .find(|&j| mul[i * n + j] as usize == one)
                .expect("GF(q^2) is a field") as u16;
        }
        let mut frob = vec![0u16; n];
        let mut norm = vec![0u16; n];
        let mut trace = vec![0u16; n];
        for i in 0..n {
            let (a0, a1) = split(i);
            frob[i] = join(a0, (q - a1) % q);
            trace[i] = (2 * a0 % q) as u16;
            // (a0 + a1θ)(a0 − a1θ) = a0² − ξ a1²
            norm[i] = ((a0 * a0 + (q - xi.0 as u32) * (a1 * a1 % q)) % q) as u16;
        }

        let order = |g: usize| -> usize {
            let mut x = g;
            let mut k = 1;
            while x != one {
                x = mul[x * n + g] as usize;
                k += 1;
            }
            k
        };
        let generator = (1..n)
            .find(|&g| order(g) == n - 1)
            .expect("multiplicative group of a finite field is cyclic");
        let mut log = vec![u32::MAX; n];
        let mut x = one;
        for k in 0..(n - 1) as u32 {
            log[x] = k;
            x = mul[x * n + generator] as usize;
        }

        Ok(Self {
            t: Arc::new(Tables {
                base,
                xi,
                generator: Fq2(generator as u16),
                add,
                mul,
                inv,
                frob,
                norm,
                trace,
                log,
            }),
        })
    }

    #[inline]
    pub fn q(&self) -> u32 {
        self.t.base.order()
    }

    #[inline]
    pub fn base(&self) -> &PrimeField {
        &self.t.base
    }

    /// The non-square ξ = θ².
    pub fn xi(&self) -> Fq {
        self.t.xi
    }

    pub fn theta(&self) -> Fq2 {
        Fq2(1)
    }

    /// Smallest primitive element w (order q² − 1).
    pub fn generator(&self) -> Fq2 {
        self.t.generator
    }

    #[inline]
    fn n(&self) -> usize {
        (self.q() * self.q()) as usize
    }

    pub fn size(&self) -> usize {
        self.n()
    }

    #[inline]
    pub fn from_parts(&self, a0: Fq, a1: Fq) -> Fq2 {
        Fq2(a0.0 * self.q() as u16 + a1.0)
    }

    #[inline]
    pub fn parts(&self, x: Fq2) -> (Fq, Fq) {
        let q = self.q() as u16;
        (Fq(x.0 / q), Fq(x.0 % q))
    }

    #[inline]
    pub fn embed(&self, a: Fq) -> Fq2 {
        Fq2(a.0 * self.q() as u16)
    }

    /// Embeds an integer (reduced mod q).
    pub fn int(&self, n: i64) -> Fq2 {
        self.embed(self.base().elem(n))
    }

    #[inline]
    pub fn zero(&self) -> Fq2 {
        Fq2(0)
    }

    #[inline]
    pub fn one(&self) -> Fq2 {
        Fq2(self.q() as u16)
    }

    #[inline]
    pub fn add(&self, a: Fq2, b: Fq2) -> Fq2 {
        Fq2(self.t.add[a.index() * self.n() + b.index()])
    }

    #[inline]
    pub fn neg(&self, a: Fq2) -> Fq2 {
        let (a0, a1) = self.parts(a);
        let f = self.base();
        self.from_parts(f.neg(a0), f.neg(a1))
    }

    #[inline]
    pub fn sub(&self, a: Fq2, b: Fq2) -> Fq2 {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: Fq2, b: Fq2) -> Fq2 {
        Fq2(self.t.mul[a.index() * self.n() + b.index()])
    }

    /// Multiplication by a scalar of the base field.
    #[inline]
    pub fn scale(&self, c: Fq, a: Fq2) -> Fq2 {
        self.mul(self.embed(c), a)
    }

    #[inline]
    pub fn inv(&self, a: Fq2) -> Option<Fq2> {
        (a.0 != 0).then(|| Fq2(self.t.inv[a.index()]))
    }

    pub fn div(&self, a: Fq2, b: Fq2) -> Option<Fq2> {
        self.inv(b).map(|ib| self.mul(a, ib))
    }

    pub fn pow(&self, a: Fq2, mut e: u64) -> Fq2 {
        let mut base = a;
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// x ↦ x^q.
    #[inline]
    pub fn frob(&self, a: Fq2) -> Fq2 {
        Fq2(self.t.frob[a.index()])
    }

    /// Relative trace x + x^q.
    #[inline]
    pub fn trace(&self, a: Fq2) -> Fq {
        Fq(self.t.trace[a.index()])
    }

    /// Relative norm x^(q+1).
    #[inline]
    pub fn norm(&self, a: Fq2) -> Fq {
        Fq(self.t.norm[a.index()])
    }

    /// True iff `a` lies in the subfield GF(q).
    #[inline]
    pub fn is_base(&self, a: Fq2) -> bool {
        self.parts(a).1 .0 == 0
    }

    pub fn to_base(&self, a: Fq2) -> Option<Fq> {
        let (a0, a1) = self.parts(a);
        (a1.0 == 0).then_some(a0)
    }

    /// Discrete logarithm to the base [`generator`](Self::generator).
    pub fn dlog(&self, a: Fq2) -> Option<u32> {
        let l = self.t.log[a.index()];
        (l != u32::MAX).then_some(l)
    }

    /// Label of the coset `a·GF(q)*` in GF(q²)*/GF(q)* ≅ Z_(q+1).
    pub fn coset_label(&self, a: Fq2) -> Option<u32> {
        self.dlog(a).map(|l| l % (self.q() + 1))
    }

    /// All elements in canonical (lexicographic) order.
    pub fn elements(&self) -> impl Iterator<Item = Fq2> {
        (0..self.n() as u16).map(Fq2)
    }

    pub fn nonzero_elements(&self) -> impl Iterator<Item = Fq2> {
        (1..self.n() as u16).map(Fq2)
    }

    /// Smallest element (canonical order) with the given norm.
    pub fn smallest_with_norm(&self, n: Fq) -> Option<Fq2> {
        self.nonzero_elements().find(|&x| self.norm(x) == n)
    }

    /// μ: the smallest element of norm −1.
    pub fn mu(&self) -> Fq2 {
        let minus_one = self.base().elem(-1);
        self.smallest_with_norm(minus_one).expect("the norm is surjective")
    }

    /// ν = 1 when q ≡ 3 (mod 4), otherwise the smallest non-square; in both
    /// cases −ν is a non-square.
    pub fn nu(&self) -> Fq {
        if self.q() % 4 == 3 {
            Fq(1)
        } else {
            self.xi()
        }
    }

    /// δ with N(δ) = ν: 1 when ν = 1, otherwise the smallest element of norm ν.
    pub fn delta(&self) -> Fq2 {
        if self.nu() == Fq(1) {
            return self.one();
        }
        self.smallest_with_norm(self.nu()).expect("the norm is surjective")
    }

    pub fn constants(&self) -> FieldConstants {
        FieldConstants {
            q: self.q(),
            xi: self.xi().0,
            w: self.generator().0,
            mu: self.mu().0,
            delta: self.delta().0,
        }
    }

    pub fn display(&self, a: Fq2) -> String {
        let (a0, a1) = self.parts(a);
        match (a0.0, a1.0) {
            (_, 0) => format!("{}", a0.0),
            (0, 1) => "θ".to_string(),
            (0, _) => format!("{}θ", a1.0),
            (_, 1) => format!("{}+θ", a0.0),
            _ => format!("{}+{}θ", a0.0, a1.0),
        }
    }
}

impl FieldOps for GaloisField {
    type Elem = Fq2;
    fn zero(&self) -> Fq2 {
        Fq2(0)
    }
    fn one(&self) -> Fq2 {
        GaloisField::one(self)
    }
    fn add(&self, a: Fq2, b: Fq2) -> Fq2 {
        GaloisField::add(self, a, b)
    }
    fn sub(&self, a: Fq2, b: Fq2) -> Fq2 {
        GaloisField::sub(self, a, b)
    }
    fn mul(&self, a: Fq2, b: Fq2) -> Fq2 {
        GaloisField::mul(self, a, b)
    }
    fn inv(&self, a: Fq2) -> Option<Fq2> {
        GaloisField::inv(self, a)
    }
}

/// The deterministic choices made for a given q, as raw element indices. Used
/// to key caches so that fixtures stay stable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldConstants {
    pub q: u32,
    pub xi: u16,
    pub w: u16,
    pub mu: u16,
    pub delta: u16,
}

/// The q-polynomial `F(x) = a·x + b·x^q` over GF(q²), i.e. a GF(q)-linear
/// endomorphism of GF(q²).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QPoly {
    pub a: Fq2,
    pub b: Fq2,
}

impl QPoly {
    pub fn new(a: Fq2, b: Fq2) -> Self {
        Self { a, b }
    }

    pub fn zero() -> Self {
        Self { a: Fq2(0), b: Fq2(0) }
    }

    /// I(x) = x.
    pub fn identity(gf: &GaloisField) -> Self {
        Self { a: gf.one(), b: gf.zero() }
    }

    /// K(x) = x^q.
    pub fn frobenius(gf: &GaloisField) -> Self {
        Self { a: gf.zero(), b: gf.one() }
    }

    pub fn is_zero(&self) -> bool {
        self.a.0 == 0 && self.b.0 == 0
    }

    pub fn eval(&self, gf: &GaloisField, x: Fq2) -> Fq2 {
        gf.add(gf.mul(self.a, x), gf.mul(self.b, gf.frob(x)))
    }

    pub fn add(&self, gf: &GaloisField, other: &Self) -> Self {
        Self { a: gf.add(self.a, other.a), b: gf.add(self.b, other.b) }
    }

    pub fn neg(&self, gf: &GaloisField) -> Self {
        Self { a: gf.neg(self.a), b: gf.neg(self.b) }
    }

    /// `c·F` for a constant `c` of GF(q²) (left multiplication).
    pub fn scale(&self, gf: &GaloisField, c: Fq2) -> Self {
        Self { a: gf.mul(c, self.a), b: gf.mul(c, self.b) }
    }

    /// `self ∘ other`, reduced modulo x^(q²) − x.
    pub fn compose(&self, gf: &GaloisField, other: &Self) -> Self {
        let (a, b) = (self.a, self.b);
        let (c, d) = (other.a, other.b);
        Self {
            a: gf.add(gf.mul(a, c), gf.mul(b, gf.frob(d))),
            b: gf.add(gf.mul(a, d), gf.mul(b, gf.frob(c))),
        }
    }

    /// Adjoint with respect to `(x, y) ↦ Tr(xy)`: `F*(x) = a·x + b^q·x^q`.
    pub fn adjoint(&self, gf: &GaloisField) -> Self {
        Self { a: self.a, b: gf.frob(self.b) }
    }

    /// Determinant of the Dickson matrix, `a^(q+1) − b^(q+1)` ∈ GF(q).
    pub fn det(&self, gf: &GaloisField) -> Fq {
        gf.base().sub(gf.norm(self.a), gf.norm(self.b))
    }

    pub fn is_invertible(&self, gf: &GaloisField) -> bool {
        self.det(gf).0 != 0
    }

    /// Compositional inverse, from the inverse of the Dickson matrix.
    pub fn invert(&self, gf: &GaloisField) -> Result<Self, GfError> {
        let det = self.det(gf);
        let inv_det = gf
            .base()
            .inv(det)
            .ok_or_else(|| GfError::SingularPolynomial(self.display(gf)))?;
        let s = gf.embed(inv_det);
        Ok(Self { a: gf.mul(s, gf.frob(self.a)), b: gf.neg(gf.mul(s, self.b)) })
    }

    /// Dickson matrix `[[a, b], [b^q, a^q]]`.
    pub fn dickson(&self, gf: &GaloisField) -> [[Fq2; 2]; 2] {
        [[self.a, self.b], [gf.frob(self.b), gf.frob(self.a)]]
    }

    pub fn display(&self, gf: &GaloisField) -> String {
        format!("({})x + ({})x^q", gf.display(self.a), gf.display(self.b))
    }
}
