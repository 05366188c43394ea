//! Circle polygonization: slack widths, grid levels, the anchor point, the
//! inscribed polygon with its edge normals, projections and the candidate
//! grid points used by the truthful range.
//!
//! Construction runs in binary64; membership has a relative tolerance of
//! `1e-9`. Anything accepted here is re-checked exactly before it is emitted.

use num_bigint::BigInt;
use num_traits::{One, Signed};

use crate::error::{Error, Result};
use crate::model::ComplexDemand;
use crate::num::{floor_div, to_f64, Epsilon, Rational};

/// Relative tolerance for membership and grid-threshold comparisons.
pub const TOLERANCE: f64 = 1e-9;

const DEDUP: f64 = 1e-12;
const MAX_LEVEL: u32 = 1100;

/// Horizontal and vertical slack from `d_t` to the circle of radius `c`.
pub fn slack_widths(d_t: &ComplexDemand, c: &Rational) -> Result<(f64, f64)> {
    let c2 = c * c;
    let n2 = d_t.norm_sq();
    if n2 > c2 {
        return Err(Error::InvalidInput(format!("|{d_t}| exceeds the capacity")));
    }
    if n2 == c2 {
        return Ok((0.0, 0.0));
    }
    let wr = to_f64(&(&c2 - &d_t.im * &d_t.im)).sqrt() - to_f64(&d_t.re);
    let wi = to_f64(&(&c2 - &d_t.re * &d_t.re)).sqrt() - to_f64(&d_t.im);
    Ok((wr.max(0.0), wi.max(0.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridLevels {
    pub rho1: u32,
    pub rho2: u32,
}

fn level(w: f64, c: f64, eps: f64) -> Result<u32> {
    if !(w > 0.0) {
        return Err(Error::DegenerateSlack);
    }
    let target = eps * w / 4.0 * (1.0 + TOLERANCE);
    let mut step = c;
    for rho in 0..=MAX_LEVEL {
        if step <= target {
            return Ok(rho);
        }
        step /= 2.0;
    }
    Err(Error::DegenerateSlack)
}

/// Smallest `rho` with `C / 2^rho <= eps * w / 4` on each axis.
pub fn grid_levels(w_r: f64, w_i: f64, c: f64, eps: &Epsilon) -> Result<GridLevels> {
    let e = eps.as_f64();
    Ok(GridLevels {
        rho1: level(w_r, c, e)?,
        rho2: level(w_i, c, e)?,
    })
}

/// Grid levels of a point, i.e. of the singleton set `{d}`.
pub fn levels_of(d: &ComplexDemand, c: &Rational, eps: &Epsilon) -> Result<GridLevels> {
    let (wr, wi) = slack_widths(d, c)?;
    grid_levels(wr, wi, to_f64(c), eps)
}

fn pow2(rho: u32) -> Rational {
    Rational::from_integer(BigInt::one() << rho as usize)
}

/// Grid spacing `C / 2^rho`, exact.
pub fn spacing(c: &Rational, rho: u32) -> Rational {
    c / pow2(rho)
}

/// The lattice point of the coarse grid just below `d_t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Anchor {
    pub lambda1: BigInt,
    pub lambda2: BigInt,
    pub z: ComplexDemand,
}

pub fn anchor(d_t: &ComplexDemand, c: &Rational, levels: GridLevels) -> Anchor {
    let s1 = spacing(c, levels.rho1);
    let s2 = spacing(c, levels.rho2);
    let lambda1 = floor_div(&d_t.re, &s1);
    let lambda2 = floor_div(&d_t.im, &s2);
    let z = ComplexDemand::new(
        Rational::from_integer(lambda1.clone()) * &s1,
        Rational::from_integer(lambda2.clone()) * &s2,
    );
    Anchor {
        lambda1,
        lambda2,
        z,
    }
}

/// Projection of `mu` onto the direction of `nu`.
pub fn project(mu: [f64; 2], nu: [f64; 2]) -> Result<[f64; 2]> {
    let n2 = nu[0] * nu[0] + nu[1] * nu[1];
    if n2 == 0.0 {
        return Err(Error::InvalidInput("projection onto the zero vector".into()));
    }
    let t = (mu[0] * nu[0] + mu[1] * nu[1]) / n2;
    Ok([nu[0] * t, nu[1] * t])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VertexKind {
    Grid,
    Corner,
    Axis,
    Origin,
}

/// A boundary edge as a half-plane `normal . x <= offset` with a unit
/// outward normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub normal: [f64; 2],
    pub offset: f64,
}

impl Edge {
    /// The perpendicular from the origin to the edge line.
    pub fn sigma(&self) -> [f64; 2] {
        [self.normal[0] * self.offset, self.normal[1] * self.offset]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    vertices: Vec<[f64; 2]>,
    kinds: Vec<VertexKind>,
    edges: Vec<Edge>,
    capacity: f64,
    levels: Option<GridLevels>,
    anchor: Option<Anchor>,
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull, counterclockwise from the lexicographically smallest point,
/// collinear points dropped. Coincident points keep the highest kind.
fn hull(mut pts: Vec<([f64; 2], VertexKind)>, tol: f64) -> Vec<([f64; 2], VertexKind)> {
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite coordinates"));
    let mut uniq: Vec<([f64; 2], VertexKind)> = Vec::with_capacity(pts.len());
    for p in pts {
        match uniq.iter_mut().find(|q| (q.0[0] - p.0[0]).abs() <= tol && (q.0[1] - p.0[1]).abs() <= tol) {
            Some(q) => q.1 = q.1.max(p.1),
            None => uniq.push(p),
        }
    }
    if uniq.len() < 3 {
        return uniq;
    }
    let mut lower: Vec<([f64; 2], VertexKind)> = Vec::new();
    for p in &uniq {
        while lower.len() >= 2 && cross(lower[lower.len() - 2].0, lower[lower.len() - 1].0, p.0) <= 0.0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<([f64; 2], VertexKind)> = Vec::new();
    for p in uniq.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2].0, upper[upper.len() - 1].0, p.0) <= 0.0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn edge(a: [f64; 2], b: [f64; 2]) -> Edge {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len = (dx * dx + dy * dy).sqrt();
    let normal = [dy / len, -dx / len];
    let offset = (normal[0] * a[0] + normal[1] * a[1]).max(0.0);
    Edge { normal, offset }
}

fn edges_of(vertices: &[[f64; 2]]) -> Vec<Edge> {
    match vertices.len() {
        0 => Vec::new(),
        1 => {
            let [x, y] = vertices[0];
            vec![
                Edge { normal: [1.0, 0.0], offset: x },
                Edge { normal: [0.0, 1.0], offset: y },
                Edge { normal: [-1.0, 0.0], offset: -x },
                Edge { normal: [0.0, -1.0], offset: -y },
            ]
        }
        2 => {
            let (a, b) = (vertices[0], vertices[1]);
            let e = edge(a, b);
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            let u = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
            vec![
                e,
                Edge {
                    normal: [-e.normal[0], -e.normal[1]],
                    offset: -e.offset,
                },
                Edge {
                    normal: u,
                    offset: u[0] * b[0] + u[1] * b[1],
                },
                Edge {
                    normal: [-u[0], -u[1]],
                    offset: -(u[0] * a[0] + u[1] * a[1]),
                },
            ]
        }
        k => (0..k).map(|i| edge(vertices[i], vertices[(i + 1) % k])).collect(),
    }
}

fn sqrt_diff(c: f64, x: f64) -> f64 {
    ((c - x) * (c + x)).max(0.0).sqrt()
}

impl Polygon {
    fn from_points(points: Vec<([f64; 2], VertexKind)>, capacity: f64, levels: Option<GridLevels>, anchor: Option<Anchor>) -> Self {
        let h = hull(points, DEDUP * capacity);
        let vertices: Vec<[f64; 2]> = h.iter().map(|p| p.0).collect();
        let kinds = h.iter().map(|p| p.1).collect();
        let edges = edges_of(&vertices);
        Polygon {
            vertices,
            kinds,
            edges,
            capacity,
            levels,
            anchor,
        }
    }

    /// The inscribed polygon for an already summed guess `d_t`.
    pub fn build(d_t: &ComplexDemand, c: &Rational, eps: &Epsilon) -> Result<Self> {
        if d_t.re.is_negative() || d_t.im.is_negative() {
            return Err(Error::InvalidInput(format!("{d_t} is outside the first quadrant")));
        }
        let (wr, wi) = slack_widths(d_t, c)?;
        let cf = to_f64(c);
        let levels = match grid_levels(wr, wi, cf, eps) {
            Ok(l) => l,
            Err(Error::DegenerateSlack) => return Ok(Self::degenerate(d_t, cf)),
            Err(e) => return Err(e),
        };
        let anchor = anchor(d_t, c, levels);
        let c2 = c * c;
        let [zr, zi] = anchor.z.to_f64();
        let x_right = to_f64(&(&c2 - &anchor.z.im * &anchor.z.im)).sqrt();
        let y_top = to_f64(&(&c2 - &anchor.z.re * &anchor.z.re)).sqrt();
        let mut pts = vec![
            ([0.0, 0.0], VertexKind::Origin),
            ([x_right, 0.0], VertexKind::Axis),
            ([0.0, y_top], VertexKind::Axis),
            ([x_right, zi], VertexKind::Corner),
            ([zr, y_top], VertexKind::Corner),
        ];
        let s1 = to_f64(&spacing(c, levels.rho1));
        let lambda1 = to_f64(&Rational::from_integer(anchor.lambda1.clone()));
        let mut l = lambda1 + 1.0;
        while l * s1 <= x_right {
            let x = l * s1;
            pts.push(([x, sqrt_diff(cf, x)], VertexKind::Grid));
            l += 1.0;
        }
        let s2 = to_f64(&spacing(c, levels.rho2));
        let lambda2 = to_f64(&Rational::from_integer(anchor.lambda2.clone()));
        let mut l = lambda2 + 1.0;
        while l * s2 <= y_top {
            let y = l * s2;
            pts.push(([sqrt_diff(cf, y), y], VertexKind::Grid));
            l += 1.0;
        }
        Ok(Self::from_points(pts, cf, Some(levels), Some(anchor)))
    }

    /// Fallback when `d_t` lies on the circle: the hull of the origin,
    /// `d_t` and its axis projections.
    fn degenerate(d_t: &ComplexDemand, c: f64) -> Self {
        let [x, y] = d_t.to_f64();
        let pts = vec![
            ([0.0, 0.0], VertexKind::Origin),
            ([x, 0.0], VertexKind::Axis),
            ([0.0, y], VertexKind::Axis),
            ([x, y], VertexKind::Corner),
        ];
        Self::from_points(pts, c, None, None)
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn kinds(&self) -> &[VertexKind] {
        &self.kinds
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Number of sides.
    pub fn sides(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.levels.is_none()
    }

    pub fn levels(&self) -> Option<GridLevels> {
        self.levels
    }

    pub fn anchor(&self) -> Option<&Anchor> {
        self.anchor.as_ref()
    }

    /// Edges whose outward normal has no negative component. For
    /// first-quadrant points these are the only binding constraints.
    pub fn outer_edges(&self) -> Vec<Edge> {
        self.edges
            .iter()
            .filter(|e| e.normal[0] >= -TOLERANCE && e.normal[1] >= -TOLERANCE)
            .copied()
            .collect()
    }

    /// Half-plane membership with relative tolerance.
    pub fn contains(&self, x: [f64; 2]) -> bool {
        let tol = TOLERANCE * self.capacity;
        self.edges
            .iter()
            .all(|e| e.normal[0] * x[0] + e.normal[1] * x[1] <= e.offset + tol)
    }

    pub fn contains_demand(&self, x: &ComplexDemand) -> bool {
        self.contains(x.to_f64())
    }

    /// Shrinks the polygon to at most `cap` outer edges by keeping the
    /// origin, axis and corner vertices and an evenly spaced subset of the
    /// grid vertices.
    pub fn coarsened(&self, cap: usize) -> Polygon {
        if self.is_degenerate() || self.outer_edges().len() <= cap {
            return self.clone();
        }
        let keep_grid = cap.saturating_sub(3);
        let grid: Vec<usize> = (0..self.vertices.len())
            .filter(|&i| self.kinds[i] == VertexKind::Grid)
            .collect();
        let mut pts: Vec<([f64; 2], VertexKind)> = (0..self.vertices.len())
            .filter(|&i| self.kinds[i] != VertexKind::Grid)
            .map(|i| (self.vertices[i], self.kinds[i]))
            .collect();
        let g = grid.len();
        for j in 0..keep_grid.min(g) {
            let idx = ((j + 1) * (g + 1)) / (keep_grid + 1);
            let i = grid[idx.clamp(1, g) - 1];
            pts.push((self.vertices[i], VertexKind::Grid));
        }
        let mut out = Self::from_points(pts, self.capacity, self.levels, self.anchor.clone());
        // Fewer points can only merge edges, but guard against fp ties.
        while out.outer_edges().len() > cap {
            let pos = out.kinds.iter().rposition(|k| *k == VertexKind::Grid);
            let Some(pos) = pos else { break };
            let pts = out
                .vertices
                .iter()
                .zip(&out.kinds)
                .enumerate()
                .filter(|(i, _)| *i != pos)
                .map(|(_, (v, k))| (*v, *k))
                .collect();
            out = Self::from_points(pts, self.capacity, self.levels, self.anchor.clone());
        }
        out
    }
}

/// Polygon for a guessed set of demands.
pub fn build_polygon(t: &[ComplexDemand], c: &Rational, eps: &Epsilon) -> Result<Polygon> {
    let d_t: ComplexDemand = t.iter().sum();
    Polygon::build(&d_t, c, eps)
}

/// Minimal elements of a set of lattice points given as `(a, b)` pairs.
fn minimal(mut pts: Vec<(BigInt, BigInt)>) -> Vec<(BigInt, BigInt)> {
    pts.sort();
    let mut out: Vec<(BigInt, BigInt)> = Vec::new();
    for (a, b) in pts {
        if out.last().is_none_or(|(_, lb)| b < *lb) {
            out.push((a, b));
        }
    }
    out
}

/// Candidate aggregate points for a guess: `d_t` together with the minimal
/// grid points one level finer that dominate `d_t`, split by whether one or
/// both of their own grid levels step up.
pub fn candidate_points(d_t: &ComplexDemand, c: &Rational, eps: &Epsilon) -> Result<Vec<ComplexDemand>> {
    let (wr, wi) = slack_widths(d_t, c)?;
    let levels = match grid_levels(wr, wi, to_f64(c), eps) {
        Ok(l) => l,
        Err(Error::DegenerateSlack) => return Ok(vec![d_t.clone()]),
        Err(e) => return Err(e),
    };
    let (r1, r2) = (levels.rho1 + 1, levels.rho2 + 1);
    let s1 = spacing(c, r1);
    let s2 = spacing(c, r2);
    let c2 = c * c;
    let a0 = -floor_div(&-&d_t.re, &s1);
    let b0 = -floor_div(&-&d_t.im, &s2);
    let mut one: Vec<(BigInt, BigInt)> = Vec::new();
    let mut both: Vec<(BigInt, BigInt)> = Vec::new();
    let mut a = a0;
    loop {
        let x = Rational::from_integer(a.clone()) * &s1;
        if &x * &x > c2 {
            break;
        }
        let mut b = b0.clone();
        let (mut got_one, mut got_both) = (false, false);
        loop {
            let y = Rational::from_integer(b.clone()) * &s2;
            let z = ComplexDemand::new(x.clone(), y);
            if z.norm_sq() > c2 || (got_one && got_both) {
                break;
            }
            if let Ok(l) = levels_of(&z, c, eps) {
                let (u1, u2) = (l.rho1 == r1, l.rho2 == r2);
                if u1 != u2 && !got_one {
                    one.push((a.clone(), b.clone()));
                    got_one = true;
                }
                if u1 && u2 && !got_both {
                    both.push((a.clone(), b.clone()));
                    got_both = true;
                }
            }
            b += 1;
        }
        a += 1;
    }
    let mut out = vec![d_t.clone()];
    for (a, b) in minimal(one).into_iter().chain(minimal(both)) {
        let z = ComplexDemand::new(Rational::from_integer(a) * &s1, Rational::from_integer(b) * &s2);
        if !out.contains(&z) {
            out.push(z);
        }
    }
    out[1..].sort();
    Ok(out)
}

/// `true` when `x` has no negative component.
pub fn is_first_quadrant(x: &ComplexDemand) -> bool {
    !x.re.is_negative() && !x.im.is_negative()
}

/// Exact `|x|^2 <= c^2`.
pub fn inside_circle(x: &ComplexDemand, c: &Rational) -> bool {
    x.norm_sq() <= c * c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{int, rat};

    fn eps(q: u32) -> Epsilon {
        Epsilon::new(q).unwrap()
    }

    #[test]
    fn widths_examples() {
        assert_eq!(slack_widths(&ComplexDemand::zero(), &int(5)).unwrap(), (5.0, 5.0));
        assert_eq!(slack_widths(&ComplexDemand::from_ints(3, 4), &int(5)).unwrap(), (0.0, 0.0));
        let (wr, wi) = slack_widths(&ComplexDemand::from_ints(3, 0), &int(5)).unwrap();
        assert!((wr - 2.0).abs() < 1e-12 && (wi - 4.0).abs() < 1e-12);
        assert!(slack_widths(&ComplexDemand::from_ints(4, 4), &int(5)).is_err());
    }

    #[test]
    fn level_examples() {
        assert_eq!(grid_levels(1.0, 1.0, 1.0, &eps(4)).unwrap().rho1, 4);
        assert_eq!(grid_levels(0.5, 1.0, 1.0, &eps(4)).unwrap().rho1, 5);
        assert_eq!(grid_levels(1.0, 1.0, 8.0, &eps(8)).unwrap().rho1, 8);
        assert_eq!(grid_levels(0.5, 1.0, 8.0, &eps(8)).unwrap().rho1, 9);
        assert_eq!(grid_levels(0.0, 1.0, 1.0, &eps(4)), Err(Error::DegenerateSlack));
    }

    #[test]
    fn anchor_is_below_the_guess() {
        let d = ComplexDemand::new(rat(7, 10), rat(3, 10));
        let l = levels_of(&d, &int(1), &eps(4)).unwrap();
        let a = anchor(&d, &int(1), l);
        assert!(a.z.le_componentwise(&d));
        assert!(d.re < &a.z.re + spacing(&int(1), l.rho1));
        assert!(d.im < &a.z.im + spacing(&int(1), l.rho2));
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project([3.0, 4.0], [1.0, 0.0]).unwrap(), [3.0, 0.0]);
        let p = project([3.0, 4.0], [3.0, 4.0]).unwrap();
        assert!((p[0] - 3.0).abs() < 1e-12 && (p[1] - 4.0).abs() < 1e-12);
        assert_eq!(project([1.0, 0.0], [1.0, 1.0]).unwrap(), [0.5, 0.5]);
        assert!(project([1.0, 0.0], [0.0, 0.0]).is_err());
    }

    #[test]
    fn empty_guess_polygon() {
        let p = Polygon::build(&ComplexDemand::zero(), &int(1), &eps(4)).unwrap();
        assert!(p.sides() <= 18 * 4 + 3);
        assert_eq!(p.vertices()[0], [0.0, 0.0]);
        assert!(p.contains([0.0, 0.0]));
        assert!(p.contains([0.7, 0.7]));
        assert!(!p.contains([0.72, 0.72]));
        for v in p.vertices() {
            assert!(v[0] * v[0] + v[1] * v[1] <= (1.0 + 1e-9f64).powi(2));
        }
    }

    #[test]
    fn degenerate_polygon() {
        let d = ComplexDemand::from_ints(3, 4);
        let p = Polygon::build(&d, &int(5), &eps(5)).unwrap();
        assert!(p.is_degenerate());
        assert!(p.contains([3.0, 4.0]));
        assert!(p.contains([1.0, 1.0]));
        assert!(!p.contains([3.1, 4.0]));
        let q = Polygon::build(&ComplexDemand::from_ints(5, 0), &int(5), &eps(5)).unwrap();
        assert!(q.contains([2.0, 0.0]));
        assert!(!q.contains([2.0, 0.1]));
        assert!(!q.contains([5.1, 0.0]));
    }

    #[test]
    fn guess_is_inside_its_polygon() {
        for (re, im) in [(0, 0), (3, 1), (1, 3), (2, 2), (4, 2), (0, 4), (5, 0)] {
            let d = ComplexDemand::new(rat(re, 6), rat(im, 6));
            let p = Polygon::build(&d, &int(1), &eps(5)).unwrap();
            assert!(p.contains_demand(&d), "{d}");
        }
        let edge = ComplexDemand::new(rat(49, 10), int(0));
        assert!(Polygon::build(&edge, &int(5), &eps(5)).unwrap().contains_demand(&edge));
    }

    #[test]
    fn coarsening_shrinks() {
        let p = Polygon::build(&ComplexDemand::new(rat(1, 5), rat(1, 10)), &int(1), &eps(5)).unwrap();
        let q = p.coarsened(4);
        assert!(q.outer_edges().len() <= 4);
        for v in q.vertices() {
            assert!(p.contains(*v));
        }
        assert!(q.contains([0.2, 0.1]));
    }

    #[test]
    fn candidates_dominate_the_guess() {
        let d = ComplexDemand::new(rat(3, 10), rat(2, 10));
        let g = candidate_points(&d, &int(1), &eps(5)).unwrap();
        assert_eq!(g[0], d);
        assert!(g.len() > 1);
        for z in &g {
            assert!(d.le_componentwise(z));
            assert!(inside_circle(z, &int(1)));
        }
        let on = ComplexDemand::from_ints(3, 4);
        assert_eq!(candidate_points(&on, &int(5), &eps(5)).unwrap(), vec![on]);
    }
}
