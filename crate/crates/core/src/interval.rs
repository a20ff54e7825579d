use serde::{Deserialize, Serialize};

/// A subinterval `[lo, hi)` of the real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn len(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Half-open membership.
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x < self.hi
    }

    pub fn contains_closed(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (hi > lo).then_some(Interval { lo, hi })
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo < other.hi && other.lo < self.hi
    }

    /// `self ⊆ other` up to `tol` at each endpoint.
    pub fn within(&self, other: &Interval, tol: f64) -> bool {
        self.lo >= other.lo - tol && self.hi <= other.hi + tol
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    /// Closed-interval distance from `x`.
    pub fn distance(&self, x: f64) -> f64 {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else {
            0.0
        }
    }
}

/// Sorts and merges overlapping or touching intervals (gaps below `tol` are closed).
pub fn normalize(mut set: Vec<Interval>, tol: f64) -> Vec<Interval> {
    set.retain(|iv| iv.hi > iv.lo);
    set.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut out: Vec<Interval> = Vec::with_capacity(set.len());
    for iv in set {
        match out.last_mut() {
            Some(last) if iv.lo <= last.hi + tol => last.hi = last.hi.max(iv.hi),
            _ => out.push(iv),
        }
    }
    out
}

pub fn total_length(set: &[Interval]) -> f64 {
    set.iter().map(Interval::len).sum()
}

/// True when every interval of `inner` lies in some interval of `outer`, up to `tol`.
/// Both lists must be normalized.
pub fn set_within(inner: &[Interval], outer: &[Interval], tol: f64) -> bool {
    inner.iter().all(|iv| {
        let idx = outer.partition_point(|o| o.hi + tol < iv.hi);
        idx < outer.len() && iv.within(&outer[idx], tol)
    })
}

pub fn set_contains(set: &[Interval], x: f64) -> bool {
    let idx = set.partition_point(|iv| iv.hi <= x);
    idx < set.len() && set[idx].contains(x)
}

pub fn set_overlaps(set: &[Interval], iv: &Interval) -> bool {
    let idx = set.partition_point(|s| s.hi <= iv.lo);
    idx < set.len() && set[idx].overlaps(iv)
}

/// `a ∖ b` for normalized lists.
pub fn set_difference(a: &[Interval], b: &[Interval]) -> Vec<Interval> {
    let mut out = Vec::new();
    for iv in a {
        let mut pieces = vec![*iv];
        for cut in b.iter().filter(|c| c.overlaps(iv)) {
            let mut next = Vec::new();
            for p in pieces {
                if !p.overlaps(cut) {
                    next.push(p);
                    continue;
                }
                if p.lo < cut.lo {
                    next.push(Interval::new(p.lo, cut.lo));
                }
                if cut.hi < p.hi {
                    next.push(Interval::new(cut.hi, p.hi));
                }
            }
            pieces = next;
        }
        out.extend(pieces);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_merges_touching() {
        let s = normalize(
            vec![Interval::new(0.5, 0.7), Interval::new(0.0, 0.2), Interval::new(0.2, 0.3)],
            1e-12,
        );
        assert_eq!(s, vec![Interval::new(0.0, 0.3), Interval::new(0.5, 0.7)]);
    }

    #[test]
    fn difference_splits() {
        let d = set_difference(&[Interval::new(0.0, 1.0)], &[Interval::new(0.25, 0.5)]);
        assert_eq!(d, vec![Interval::new(0.0, 0.25), Interval::new(0.5, 1.0)]);
        assert!((total_length(&d) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn membership_is_half_open() {
        let s = vec![Interval::new(0.0, 0.5)];
        assert!(set_contains(&s, 0.0));
        assert!(!set_contains(&s, 0.5));
    }
}
