//! Half-open interval algebra on `(start, end)` pairs of seconds.
//!
//! Degenerate intervals (end <= start) contribute nothing and are dropped
//! during normalization.

/// Sort, drop degenerates, and merge touching or overlapping intervals.
pub fn normalize(intervals: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = intervals.iter().copied().filter(|(s, e)| e > s).collect();
    v.sort_by(|a, b| a.partial_cmp(b).expect("interval bounds must not be NaN"));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (s, e) in v {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

/// Total length covered by the union of the intervals.
pub fn union_duration(intervals: &[(f64, f64)]) -> f64 {
    normalize(intervals).iter().map(|(s, e)| e - s).sum()
}

/// Pairwise intersection of two interval sets, normalized.
pub fn intersect(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let a = normalize(a);
    let b = normalize(b);
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let s = a[i].0.max(b[j].0);
        let e = a[i].1.min(b[j].1);
        if e > s {
            out.push((s, e));
        }
        if a[i].1 <= b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Total length of the intersection of two interval sets.
pub fn intersection_duration(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    intersect(a, b).iter().map(|(s, e)| e - s).sum()
}

/// Everything in `a` not covered by `b`.
pub fn subtract(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let a = normalize(a);
    let b = normalize(b);
    let mut out = Vec::new();
    for &(s, e) in &a {
        let mut cursor = s;
        for &(bs, be) in &b {
            if be <= cursor || bs >= e {
                continue;
            }
            if bs > cursor {
                out.push((cursor, bs));
            }
            cursor = cursor.max(be);
            if cursor >= e {
                break;
            }
        }
        if cursor < e {
            out.push((cursor, e));
        }
    }
    out
}

/// Intersection-over-union of two interval sets; 0 when both are empty.
pub fn iou(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let inter = intersection_duration(a, b);
    let mut all: Vec<(f64, f64)> = a.to_vec();
    all.extend_from_slice(b);
    let union = union_duration(&all);
    if union == 0.0 {
        0.0
    } else {
        inter / union
    }
}
