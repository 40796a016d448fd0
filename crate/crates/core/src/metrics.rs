//! Pareto-front quality indicators: IGD, Spacing, Hypervolume, Pure
//! Diversity and Spread, plus reference-set construction.

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("non-finite coordinate in front")]
    NonFinite,
}

/// Nonempty set of finite objective vectors of a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontSet<T: Real = f64> {
    points: Vec<Vec<T>>,
}

impl<T: Real> FrontSet<T> {
    pub fn new(points: Vec<Vec<T>>) -> Result<Self, MetricsError> {
        let m = check(&points, 1)?;
        if m == 0 {
            return Err(MetricsError::DimensionMismatch("zero-dimensional points".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec<T>> {
        self.points
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Copy with exact duplicates removed, first occurrence kept.
    pub fn deduplicated(&self) -> Self {
        Self { points: dedup(&self.points) }
    }
}

fn check<T: Real>(points: &[Vec<T>], needed: usize) -> Result<usize, MetricsError> {
    if points.len() < needed {
        return Err(MetricsError::TooFewPoints { needed, got: points.len() });
    }
    let m = points.first().map_or(0, Vec::len);
    for p in points {
        if p.len() != m {
            return Err(MetricsError::DimensionMismatch(format!("points of length {m} and {}", p.len())));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(MetricsError::NonFinite);
        }
    }
    Ok(m)
}

fn check_pair<T: Real>(p: &[Vec<T>], q: &[Vec<T>]) -> Result<usize, MetricsError> {
    let m = check(p, 1)?;
    let mq = check(q, 1)?;
    if m != mq {
        return Err(MetricsError::DimensionMismatch(format!("fronts of dimension {m} and {mq}")));
    }
    Ok(m)
}

pub fn euclidean<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| (*x - *y) * (*x - *y)).sum::<T>().sqrt()
}

fn min_distance<T: Real>(x: &[T], set: &[Vec<T>]) -> T {
    set.iter().map(|p| euclidean(x, p)).fold(T::infinity(), T::min)
}

/// Nearest-neighbour distance of each member, excluding itself by index.
pub fn nearest_neighbor_distances<T: Real>(points: &[Vec<T>]) -> Vec<T> {
    (0..points.len())
        .map(|i| {
            points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| euclidean(&points[i], q))
                .fold(T::infinity(), T::min)
        })
        .collect()
}

/// Pareto dominance for minimisation.
pub fn dominates<T: Real>(a: &[T], b: &[T]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

fn dedup<T: Real>(points: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = Vec::with_capacity(points.len());
    for p in points {
        if !out.iter().any(|q| q == p) {
            out.push(p.clone());
        }
    }
    out
}

/// Deduplicated nondominated subset, in first-occurrence order.
pub fn nondominated<T: Real>(points: &[Vec<T>]) -> Vec<Vec<T>> {
    let unique = dedup(points);
    unique
        .iter()
        .filter(|p| !unique.iter().any(|q| dominates(q, p)))
        .cloned()
        .collect()
}

/// Mean distance from each reference point to its nearest member of `p`.
pub fn igd<T: Real>(p: &[Vec<T>], pstar: &[Vec<T>]) -> Result<T, MetricsError> {
    check_pair(p, pstar)?;
    let total: T = pstar.iter().map(|x| min_distance(x, p)).sum();
    Ok(total / T::from_usize(pstar.len()).unwrap())
}

/// Schott spacing with squared deviations.
pub fn spacing<T: Real>(p: &[Vec<T>]) -> Result<T, MetricsError> {
    check(p, 2)?;
    let d = nearest_neighbor_distances(p);
    let n = T::from_usize(d.len()).unwrap();
    let mean = d.iter().copied().sum::<T>() / n;
    let ss: T = d.iter().map(|&di| (mean - di) * (mean - di)).sum();
    Ok((ss / (n - T::one())).sqrt())
}

/// Exact hypervolume dominated by `p` and bounded by `r` (WFG recursion).
/// Points not strictly better than `r` in every objective contribute nothing.
pub fn hypervolume<T: Real>(p: &[Vec<T>], r: &[T]) -> Result<T, MetricsError> {
    if p.is_empty() {
        return Ok(T::zero());
    }
    let m = check(p, 1)?;
    if m != r.len() {
        return Err(MetricsError::DimensionMismatch(format!("points of dimension {m}, reference of {}", r.len())));
    }
    let inside: Vec<Vec<T>> = p.iter().filter(|y| y.iter().zip(r).all(|(a, b)| a < b)).cloned().collect();
    let mut front = nondominated(&inside);
    Ok(wfg(&mut front, r))
}

fn box_volume<T: Real>(y: &[T], r: &[T]) -> T {
    y.iter().zip(r).map(|(a, b)| *b - *a).fold(T::one(), |acc, v| acc * v)
}

fn hv2<T: Real>(front: &mut [Vec<T>], r: &[T]) -> T {
    front.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
    let mut vol = T::zero();
    let mut ceiling = r[1];
    for y in front.iter() {
        if y[1] < ceiling {
            vol += (r[0] - y[0]) * (ceiling - y[1]);
            ceiling = y[1];
        }
    }
    vol
}

/// `front` must be mutually nondominated and inside the reference box.
fn wfg<T: Real>(front: &mut Vec<Vec<T>>, r: &[T]) -> T {
    match front.len() {
        0 => return T::zero(),
        1 => return box_volume(&front[0], r),
        _ => {}
    }
    if r.len() == 2 {
        return hv2(front, r);
    }
    let last = r.len() - 1;
    front.sort_by(|a, b| b[last].partial_cmp(&a[last]).unwrap());
    let mut vol = T::zero();
    for k in 0..front.len() {
        let limited: Vec<Vec<T>> = front[k + 1..]
            .iter()
            .map(|q| q.iter().zip(&front[k]).map(|(a, b)| a.max(*b)).collect())
            .collect();
        let mut limited = nondominated(&limited);
        vol += box_volume(&front[k], r) - wfg(&mut limited, r);
    }
    vol
}

fn lex_less<T: Real>(a: &[T], b: &[T]) -> bool {
    a.iter().zip(b).find(|(x, y)| x != y).is_some_and(|(x, y)| x < y)
}

/// Greedy pure diversity: repeatedly removes the member farthest from its
/// nearest neighbour and accumulates that distance. Ties go to the
/// lexicographically smallest point.
pub fn pure_diversity<T: Real>(p: &[Vec<T>]) -> Result<T, MetricsError> {
    check(p, 1)?;
    let mut rest: Vec<Vec<T>> = p.to_vec();
    let mut total = T::zero();
    while rest.len() > 1 {
        let d = nearest_neighbor_distances(&rest);
        let mut best = 0;
        for (i, &di) in d.iter().enumerate() {
            if di > d[best] || (di == d[best] && lex_less(&rest[i], &rest[best])) {
                best = i;
            }
        }
        total += d[best];
        rest.remove(best);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpreadConvention {
    /// `d(χ, P)` for `χ ∈ P*` ignores members of `P` equal to `χ`.
    #[default]
    SelfExclusion,
    /// Plain minimum distance, zero for shared points.
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadValue<T: Real = f64> {
    pub value: T,
    /// Set when the denominator vanished; `value` is then 0.
    pub degenerate: bool,
}

pub fn spread<T: Real>(p: &[Vec<T>], pstar: &[Vec<T>]) -> Result<SpreadValue<T>, MetricsError> {
    spread_with(p, pstar, SpreadConvention::default())
}

pub fn spread_with<T: Real>(
    p: &[Vec<T>],
    pstar: &[Vec<T>],
    convention: SpreadConvention,
) -> Result<SpreadValue<T>, MetricsError> {
    let m = check_pair(p, pstar)?;
    let extremes: T = (0..m)
        .map(|k| {
            let mut best = 0;
            for (i, x) in pstar.iter().enumerate() {
                if x[k] > pstar[best][k] {
                    best = i;
                }
            }
            min_distance(&pstar[best], p)
        })
        .sum();
    let d_bar = pstar
        .iter()
        .map(|x| match convention {
            SpreadConvention::SelfExclusion => {
                p.iter().filter(|q| *q != x).map(|q| euclidean(x, q)).fold(T::infinity(), T::min)
            }
            SpreadConvention::Plain => min_distance(x, p),
        })
        .map(|d| if d.is_finite() { d } else { T::zero() })
        .sum::<T>()
        / T::from_usize(pstar.len()).unwrap();
    let nn: Vec<T> = if p.len() > 1 { nearest_neighbor_distances(p) } else { vec![T::zero()] };
    let dev: T = nn.iter().map(|&d| (d - d_bar).abs()).sum();
    let denom = extremes + T::from_usize(p.len()).unwrap() * d_bar;
    if !(denom > T::zero()) {
        return Ok(SpreadValue { value: T::zero(), degenerate: true });
    }
    Ok(SpreadValue { value: (extremes + dev) / denom, degenerate: false })
}

/// Deduplicated nondominated subset of the union of all runs.
pub fn build_reference_set<T: Real>(runs: &[Vec<Vec<T>>]) -> Result<Vec<Vec<T>>, MetricsError> {
    let all: Vec<Vec<T>> = runs.iter().flatten().cloned().collect();
    check(&all, 1)?;
    Ok(nondominated(&all))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[&[f64]]) -> Vec<Vec<f64>> {
        v.iter().map(|p| p.to_vec()).collect()
    }

    #[test]
    fn igd_examples() {
        let a = pts(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(igd(&a, &a).unwrap(), 0.0);
        assert!((igd(&pts(&[&[3.0, 4.0]]), &pts(&[&[0.0, 0.0]])).unwrap() - 5.0).abs() < 1e-12);
        assert!(matches!(igd(&pts(&[&[1.0]]), &a), Err(MetricsError::DimensionMismatch(_))));
    }

    #[test]
    fn spacing_examples() {
        assert_eq!(spacing(&pts(&[&[0.0, 0.0], &[1.0, 1.0]])).unwrap(), 0.0);
        assert!(spacing(&pts(&[&[0.0], &[1.0], &[2.0], &[3.0]])).unwrap().abs() < 1e-15);
        let sp = spacing(&pts(&[&[0.0, 0.0], &[1.0, 0.0], &[3.0, 0.0]])).unwrap();
        assert!((sp - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(matches!(spacing(&pts(&[&[0.0]])), Err(MetricsError::TooFewPoints { .. })));
    }

    #[test]
    fn hypervolume_examples() {
        assert!((hypervolume(&pts(&[&[1.0, 1.0]]), &[2.0, 2.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((hypervolume(&pts(&[&[1.0, 2.0], &[2.0, 1.0]]), &[3.0, 3.0]).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(hypervolume(&pts(&[&[3.0, 1.0]]), &[3.0, 3.0]).unwrap(), 0.0);
        let cube = pts(&[&[1.0, 2.0, 2.0], &[2.0, 1.0, 2.0], &[2.0, 2.0, 1.0]]);
        assert!((hypervolume(&cube, &[3.0, 3.0, 3.0]).unwrap() - (3.0 * 2.0 - 3.0 * 1.0 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn pure_diversity_examples() {
        assert_eq!(pure_diversity(&pts(&[&[1.0, 1.0]])).unwrap(), 0.0);
        assert!((pure_diversity(&pts(&[&[0.0, 0.0], &[3.0, 4.0]])).unwrap() - 5.0).abs() < 1e-12);
        let dup = pts(&[&[0.0, 0.0], &[3.0, 4.0], &[3.0, 4.0]]);
        assert!((pure_diversity(&dup).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn spread_examples() {
        let a = pts(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let s = spread(&a, &a).unwrap();
        assert!(!s.degenerate && s.value.abs() < 1e-12);
        let line = pts(&[&[0.0, 3.0], &[1.0, 2.0], &[2.0, 1.0], &[3.0, 0.0]]);
        assert!(spread(&line, &line).unwrap().value.abs() < 1e-12);
        let clustered = pts(&[&[0.0, 3.0], &[0.1, 2.9], &[0.2, 2.8], &[3.0, 0.0]]);
        assert!(spread(&clustered, &line).unwrap().value > spread(&line, &line).unwrap().value);
        let one = pts(&[&[1.0, 1.0]]);
        let s = spread(&one, &one).unwrap();
        assert!(s.degenerate && s.value == 0.0);
    }

    #[test]
    fn reference_set_examples() {
        let a = pts(&[&[2.0, 2.0], &[1.0, 3.0]]);
        let b = pts(&[&[1.0, 1.0], &[0.5, 2.0]]);
        assert_eq!(build_reference_set(&[a.clone()]).unwrap(), a);
        assert_eq!(build_reference_set(&[a, b.clone()]).unwrap(), b);
    }

    #[test]
    fn single_precision_hypervolume() {
        let p: Vec<Vec<f32>> = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!((hypervolume(&p, &[3.0f32, 3.0]).unwrap() - 3.0).abs() < 1e-6);
    }
}
