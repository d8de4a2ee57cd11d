//! Exact dimension arithmetic.
//!
//! Every dimension value `δ(A) = |A| − Σ αᵢ·wᵢ(A)` is an integer combination
//! of `1` and the weights, so it is stored as that combination ([`DimForm`]).
//! Sums and differences are exact; only [`Signature::sign`] looks at the
//! numeric weights.
//!
//! Sign decision:
//! 1. all coefficients zero → zero;
//! 2. `f64` evaluation with a forward error bound, accepted when the bound
//!    excludes zero;
//! 3. otherwise exact rational evaluation of the weights as written;
//! 4. a nonzero form whose exact value is zero can only occur when the written
//!    weights are rationally dependent. With independence mode on, the weights
//!    are read as `αᵢ + εᵢ` with `ε₁ ≫ ε₂ ≫ … > 0` infinitesimal, so the sign
//!    is that of the first nonzero weight coefficient. This keeps `sign` a
//!    total order compatible with addition.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;
use smallvec::SmallVec;

use crate::scalar::Scalar;
use crate::structure::{FiniteStructure, Signature, Vertex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    fn of_f64(v: f64) -> Self {
        if v > 0.0 {
            Sign::Positive
        } else if v < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }
}

/// `c0 + Σ cᵢ·αᵢ` with integer coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DimForm {
    c0: i64,
    coeffs: SmallVec<[i64; 4]>,
}

impl DimForm {
    pub fn zero(symbols: usize) -> Self {
        Self {
            c0: 0,
            coeffs: SmallVec::from_elem(0, symbols),
        }
    }

    pub fn new(c0: i64, coeffs: &[i64]) -> Self {
        Self {
            c0,
            coeffs: SmallVec::from_slice(coeffs),
        }
    }

    pub fn c0(&self) -> i64 {
        self.c0
    }

    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    pub fn symbols(&self) -> usize {
        self.coeffs.len()
    }

    /// True iff every coefficient vanishes.
    pub fn is_zero(&self) -> bool {
        self.c0 == 0 && self.coeffs.iter().all(|&c| c == 0)
    }

    /// Value at the given weights.
    pub fn eval<T: Scalar>(&self, alphas: &[T]) -> T {
        assert_eq!(alphas.len(), self.coeffs.len(), "weight count mismatch");
        self.coeffs
            .iter()
            .zip(alphas)
            .fold(T::from_i64(self.c0), |acc, (&c, a)| {
                acc + T::from_i64(c) * a.clone()
            })
    }

    /// Value at the signature's weights, as `f64`.
    pub fn value(&self, sig: &Signature) -> f64 {
        let a: Vec<f64> = sig.relations().iter().map(|r| r.alpha.value()).collect();
        self.eval(&a)
    }

    fn check_compatible(&self, other: &Self) {
        assert_eq!(
            self.coeffs.len(),
            other.coeffs.len(),
            "forms over different signatures"
        );
    }

    pub fn to_json(&self, sig: &Signature) -> serde_json::Value {
        serde_json::json!({
            "c0": self.c0,
            "coeffs": self.coeffs.as_slice(),
            "value": self.value(sig),
        })
    }

    /// `c0 + c1·α_R + …` followed by the numeric value.
    pub fn describe(&self, sig: &Signature) -> String {
        let mut s = self.c0.to_string();
        for (c, r) in self.coeffs.iter().zip(sig.relations()) {
            if *c == 0 {
                continue;
            }
            let op = if *c < 0 { '-' } else { '+' };
            s.push_str(&format!(" {op} {}·α_{}", c.abs(), r.name));
        }
        format!("{s} = {}", self.value(sig))
    }
}

impl fmt::Display for DimForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.c0)?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if *c != 0 {
                write!(f, " {} {}·α{}", if *c < 0 { '-' } else { '+' }, c.abs(), i)?;
            }
        }
        Ok(())
    }
}

impl AddAssign<&DimForm> for DimForm {
    fn add_assign(&mut self, rhs: &DimForm) {
        self.check_compatible(rhs);
        self.c0 += rhs.c0;
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
    }
}

impl SubAssign<&DimForm> for DimForm {
    fn sub_assign(&mut self, rhs: &DimForm) {
        self.check_compatible(rhs);
        self.c0 -= rhs.c0;
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= b;
        }
    }
}

impl Add<&DimForm> for &DimForm {
    type Output = DimForm;

    fn add(self, rhs: &DimForm) -> DimForm {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub<&DimForm> for &DimForm {
    type Output = DimForm;

    fn sub(self, rhs: &DimForm) -> DimForm {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Add for DimForm {
    type Output = DimForm;

    fn add(mut self, rhs: DimForm) -> DimForm {
        self += &rhs;
        self
    }
}

impl Sub for DimForm {
    type Output = DimForm;

    fn sub(mut self, rhs: DimForm) -> DimForm {
        self -= &rhs;
        self
    }
}

impl Neg for DimForm {
    type Output = DimForm;

    fn neg(mut self) -> DimForm {
        self.c0 = -self.c0;
        for c in self.coeffs.iter_mut() {
            *c = -*c;
        }
        self
    }
}

impl Signature {
    /// Sign of `c0 + Σ coeffs[i]·αᵢ`. See the module docs for the procedure.
    pub fn sign_of(&self, c0: i64, coeffs: &[i64]) -> Sign {
        assert_eq!(coeffs.len(), self.len(), "form does not match signature");
        if c0 == 0 && coeffs.iter().all(|&c| c == 0) {
            return Sign::Zero;
        }
        let mut value = c0 as f64;
        let mut magnitude = (c0 as f64).abs();
        for (&c, r) in coeffs.iter().zip(self.relations()) {
            let t = c as f64 * r.alpha.value();
            value += t;
            magnitude += t.abs();
        }
        let bound = (coeffs.len() as f64 + 4.0) * f64::EPSILON * magnitude;
        if value.abs() > bound {
            return Sign::of_f64(value);
        }
        let exact = coeffs.iter().zip(self.relations()).fold(
            BigRational::from_integer(BigInt::from(c0)),
            |acc, (&c, r)| acc + r.alpha.exact() * BigInt::from(c),
        );
        if !exact.is_zero() {
            return if exact.is_positive() {
                Sign::Positive
            } else {
                Sign::Negative
            };
        }
        if !self.independence_mode() {
            return Sign::Zero;
        }
        let lead = coeffs.iter().find(|&&c| c != 0).copied().unwrap_or(0);
        Sign::of_f64(lead as f64)
    }

    pub fn sign(&self, form: &DimForm) -> Sign {
        self.sign_of(form.c0, &form.coeffs)
    }

    /// Total order on forms induced by [`Signature::sign`].
    pub fn cmp_forms(&self, a: &DimForm, b: &DimForm) -> Ordering {
        match self.sign(&(a - b)) {
            Sign::Negative => Ordering::Less,
            Sign::Zero => Ordering::Equal,
            Sign::Positive => Ordering::Greater,
        }
    }
}

/// `δ(A) = |A| − Σ αᵢ·wᵢ(A)`.
pub fn delta(a: &FiniteStructure) -> DimForm {
    DimForm {
        c0: a.n() as i64,
        coeffs: a.edge_counts().into_iter().map(|w| -(w as i64)).collect(),
    }
}

/// `δ(B/A) = δ(B) − δ(A)` for `A` a vertex subset of `B`.
pub fn delta_rel(b: &FiniteStructure, base: &[Vertex]) -> DimForm {
    let base = crate::structure::vertex_set(base);
    let mut f = e_rel(b, &base);
    f = -f;
    f.c0 = b.n() as i64 - base.len() as i64;
    f
}

/// `e(B/A)`: per relation, hyperedges of `B` not inside `A`.
pub fn e_rel(b: &FiniteStructure, base: &[Vertex]) -> DimForm {
    let base = crate::structure::vertex_set(base);
    let inner = b.edge_counts_within(&base);
    DimForm {
        c0: 0,
        coeffs: b
            .edge_counts()
            .into_iter()
            .zip(inner)
            .map(|(w, wa)| (w - wa) as i64)
            .collect(),
    }
}

/// Product of `γᵢ` over the hyperedges of `B` not contained in `A`.
pub fn gamma_prod(b: &FiniteStructure, base: &[Vertex]) -> f64 {
    let e = e_rel(b, base);
    e.coeffs
        .iter()
        .zip(b.sig().relations())
        .map(|(&k, r)| r.gamma.powi(k as i32))
        .product()
}

/// `δ(outer/inner)` for vertex sets `inner ⊆ outer` of `m`.
pub fn delta_between(m: &FiniteStructure, outer: &[Vertex], inner: &[Vertex]) -> DimForm {
    let outer = crate::structure::vertex_set(outer);
    let inner = crate::structure::vertex_set(inner);
    let wo = m.edge_counts_within(&outer);
    let wi = m.edge_counts_within(&inner);
    DimForm {
        c0: outer.len() as i64 - inner.len() as i64,
        coeffs: wo
            .iter()
            .zip(&wi)
            .map(|(&o, &i)| -((o - i) as i64))
            .collect(),
    }
}

/// `δ` of the substructure induced on `set`.
pub fn delta_of_set(m: &FiniteStructure, set: &[Vertex]) -> DimForm {
    delta_between(m, set, &[])
}

/// `min δ(B)` over `A ⊆ B ⊆ N` with `|B − A| ≤ cap`. Equals `d(N, A)` once
/// `cap ≥ |N| − |A|`.
pub fn d_cap(n: &FiniteStructure, a: &[Vertex], cap: usize) -> DimForm {
    let a = crate::structure::vertex_set(a);
    let rest: Vec<Vertex> = (0..n.n() as Vertex)
        .filter(|v| a.binary_search(v).is_err())
        .collect();
    let sig = n.sig();
    let mut best = delta_of_set(n, &a);
    let mut pick = Vec::new();
    for size in 1..=cap.min(rest.len()) {
        for_each_combination(rest.len(), size, &mut pick, &mut |idx| {
            let mut b = a.clone();
            b.extend(idx.iter().map(|&i| rest[i]));
            b.sort_unstable();
            let d = delta_of_set(n, &b);
            if sig.cmp_forms(&d, &best) == Ordering::Less {
                best = d;
            }
        });
    }
    best
}

/// Calls `f` with every `k`-combination of `0..n` in lexicographic order.
pub(crate) fn for_each_combination(
    n: usize,
    k: usize,
    buf: &mut Vec<usize>,
    f: &mut impl FnMut(&[usize]),
) {
    buf.clear();
    if k > n {
        return;
    }
    buf.extend(0..k);
    loop {
        f(buf);
        let Some(i) = (0..k).rev().find(|&i| buf[i] < i + n - k) else {
            return;
        };
        buf[i] += 1;
        for j in i + 1..k {
            buf[j] = buf[j - 1] + 1;
        }
    }
}
