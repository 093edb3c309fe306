use std::fmt;

use serde::{Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignSymbol {
    Minus,
    Zero,
    Plus,
}

impl SignSymbol {
    pub fn negate(self) -> Self {
        match self {
            SignSymbol::Minus => SignSymbol::Plus,
            SignSymbol::Zero => SignSymbol::Zero,
            SignSymbol::Plus => SignSymbol::Minus,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            SignSymbol::Minus => '-',
            SignSymbol::Zero => '0',
            SignSymbol::Plus => '+',
        }
    }

    /// `+` for even `k`, `-` for odd.
    pub fn alternating(k: usize) -> Self {
        if k.is_multiple_of(2) {
            SignSymbol::Plus
        } else {
            SignSymbol::Minus
        }
    }

    pub fn is_strict(self) -> bool {
        self != SignSymbol::Zero
    }
}

impl fmt::Display for SignSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl Serialize for SignSymbol {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// `Zero` iff `|v| <= tol`.
pub fn sign_of(v: f64, tol: f64) -> SignSymbol {
    debug_assert!(tol >= 0.0);
    if v > tol {
        SignSymbol::Plus
    } else if v < -tol {
        SignSymbol::Minus
    } else {
        SignSymbol::Zero
    }
}

/// Ordered signs of a function over `[0, +∞]`, first symbol the limit at
/// `0+`, last the limit at `+∞`, no two neighbours equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignPattern {
    symbols: Vec<SignSymbol>,
}

impl SignPattern {
    /// Builds a pattern, merging repeated neighbours.
    pub fn new(symbols: impl IntoIterator<Item = SignSymbol>) -> Self {
        let mut out: Vec<SignSymbol> = Vec::new();
        for s in symbols {
            if out.last() != Some(&s) {
                out.push(s);
            }
        }
        Self { symbols: out }
    }

    /// `0 +0 -0 +0 ... ±^n 0`.
    pub fn pattern_a(n: usize) -> Self {
        let mut v = vec![SignSymbol::Zero];
        for k in 0..=n {
            v.push(SignSymbol::alternating(k));
            v.push(SignSymbol::Zero);
        }
        Self::new(v)
    }

    /// `+0 -0 +0 ... ±^n 0`.
    pub fn pattern_b(n: usize) -> Self {
        let mut v = Vec::new();
        for k in 0..=n {
            v.push(SignSymbol::alternating(k));
            v.push(SignSymbol::Zero);
        }
        Self::new(v)
    }

    pub fn negate(&self) -> Self {
        Self {
            symbols: self.symbols.iter().map(|s| s.negate()).collect(),
        }
    }

    /// Multiply every symbol by `(-1)^k`.
    pub fn times_sign(&self, k: usize) -> Self {
        if k.is_multiple_of(2) {
            self.clone()
        } else {
            self.negate()
        }
    }

    pub fn symbols(&self) -> &[SignSymbol] {
        &self.symbols
    }

    /// Number of interior zero symbols (endpoints excluded).
    pub fn interior_zeros(&self) -> usize {
        let n = self.symbols.len();
        if n <= 2 {
            return 0;
        }
        self.symbols[1..n - 1].iter().filter(|s| **s == SignSymbol::Zero).count()
    }

    pub fn parse(s: &str) -> Option<Self> {
        let mut v = Vec::new();
        for c in s.chars() {
            v.push(match c {
                '+' => SignSymbol::Plus,
                '-' | '−' => SignSymbol::Minus,
                '0' => SignSymbol::Zero,
                _ => return None,
            });
        }
        Some(Self::new(v))
    }
}

impl fmt::Display for SignPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.symbols {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl Serialize for SignPattern {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

fn strict_signs(samples: &[f64]) -> impl Iterator<Item = bool> + '_ {
    samples.iter().filter(|v| **v != 0.0).map(|v| *v > 0.0)
}

/// `S^-`: sign changes after deleting zeros.
pub fn count_sign_changes_open(samples: &[f64]) -> usize {
    let mut prev = None;
    let mut n = 0;
    for s in strict_signs(samples) {
        if prev.is_some_and(|p| p != s) {
            n += 1;
        }
        prev = Some(s);
    }
    n
}

/// `S^+`: the largest number of sign changes over all ways of giving each
/// zero entry a sign.
pub fn count_sign_changes_closed(samples: &[f64]) -> usize {
    // best[s] = most changes so far with the current entry assigned sign s
    let mut best: Option<[Option<usize>; 2]> = None;
    for &v in samples {
        let allowed = if v > 0.0 {
            [false, true]
        } else if v < 0.0 {
            [true, false]
        } else {
            [true, true]
        };
        let mut next = [None, None];
        for (s, ok) in allowed.iter().enumerate() {
            if !ok {
                continue;
            }
            next[s] = Some(match best {
                None => 0,
                Some(b) => {
                    let stay = b[s];
                    let flip = b[1 - s].map(|c| c + 1);
                    stay.max(flip).expect("at least one state is reachable")
                }
            });
        }
        best = Some(next);
    }
    best.map_or(0, |b| b.iter().flatten().copied().max().unwrap_or(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sign_of_examples() {
        assert_eq!(sign_of(-3.0, 0.0), SignSymbol::Minus);
        assert_eq!(sign_of(0.0, 0.0), SignSymbol::Zero);
        assert_eq!(sign_of(5e-13, 1e-12), SignSymbol::Zero);
        assert_eq!(sign_of(2e-12, 1e-12), SignSymbol::Plus);
    }

    #[test]
    fn open_examples() {
        assert_eq!(count_sign_changes_open(&[1.0, 0.0, -2.0, 3.0]), 2);
        assert_eq!(count_sign_changes_open(&[1.0, 2.0, 3.0]), 0);
        assert_eq!(count_sign_changes_open(&[0.0, 0.0]), 0);
    }

    #[test]
    fn closed_examples() {
        assert_eq!(count_sign_changes_closed(&[1.0, 0.0, 1.0]), 2);
        assert_eq!(count_sign_changes_closed(&[1.0, -1.0]), 1);
        assert_eq!(count_sign_changes_closed(&[0.0, 0.0]), 1);
        assert_eq!(count_sign_changes_closed(&[0.0]), 0);
    }

    #[test]
    fn canonical_patterns() {
        assert_eq!(SignPattern::pattern_a(0).to_string(), "0+0");
        assert_eq!(SignPattern::pattern_a(2).to_string(), "0+0-0+0");
        assert_eq!(SignPattern::pattern_b(0).to_string(), "+0");
        assert_eq!(SignPattern::pattern_b(1).to_string(), "+0-0");
        assert_eq!(SignPattern::pattern_b(1).times_sign(1).to_string(), "-0+0");
        assert_eq!(SignPattern::pattern_a(3).interior_zeros(), 3);
        assert_eq!(SignPattern::parse("0+0").unwrap(), SignPattern::pattern_a(0));
        assert_ne!(SignPattern::pattern_a(0), SignPattern::pattern_b(1));
    }

    #[test]
    fn constructor_merges_repeats() {
        let p = SignPattern::new([SignSymbol::Plus, SignSymbol::Plus]);
        assert_eq!(p.to_string(), "+");
    }

    fn brute_force_closed(v: &[f64]) -> usize {
        let zeros: Vec<usize> = (0..v.len()).filter(|&i| v[i] == 0.0).collect();
        let mut best = 0;
        for mask in 0..(1u32 << zeros.len()) {
            let mut w = v.to_vec();
            for (b, &i) in zeros.iter().enumerate() {
                w[i] = if mask >> b & 1 == 1 { 1.0 } else { -1.0 };
            }
            best = best.max(count_sign_changes_open(&w));
        }
        best
    }

    proptest! {
        #[test]
        fn open_never_exceeds_closed(v in prop::collection::vec(prop::sample::select(vec![-1.0, 0.0, 1.0, 2.5, -0.5]), 1..12)) {
            prop_assert!(count_sign_changes_open(&v) <= count_sign_changes_closed(&v));
        }

        #[test]
        fn closed_matches_brute_force(v in prop::collection::vec(prop::sample::select(vec![-1.0, 0.0, 1.0]), 1..10)) {
            prop_assert_eq!(count_sign_changes_closed(&v), brute_force_closed(&v));
        }

        #[test]
        fn negation_preserves_counts(v in prop::collection::vec(-3.0f64..3.0, 1..20)) {
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            prop_assert_eq!(count_sign_changes_open(&v), count_sign_changes_open(&neg));
            prop_assert_eq!(count_sign_changes_closed(&v), count_sign_changes_closed(&neg));
        }
    }
}
