//! Planar points, polylines and Ramer–Douglas–Peucker simplification.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Euclidean distance from `self` to the closed segment `a`–`b`.
    pub fn distance_to_segment(&self, a: &Self, b: &Self) -> T {
        let dx = b.x - a.x;
        let dy = b.y - a.y;
        let len2 = dx * dx + dy * dy;
        if len2 == T::zero() {
            return self.distance(a);
        }
        let t = ((self.x - a.x) * dx + (self.y - a.y) * dy) / len2;
        let t = t.max(T::zero()).min(T::one());
        let proj = Point::new(a.x + t * dx, a.y + t * dy);
        self.distance(&proj)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon<T> {
    pub vertices: Vec<Point<T>>,
}

impl<T: Real> Polygon<T> {
    pub fn new(vertices: Vec<Point<T>>) -> Self {
        Self { vertices }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Iterates the closed edges `(v[i], v[i+1 mod n])`.
    pub fn edges(&self) -> impl Iterator<Item = (Point<T>, Point<T>)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn perimeter(&self) -> T {
        self.edges()
            .fold(T::zero(), |acc, (a, b)| acc + a.distance(&b))
    }

    /// Smallest distance from `p` to any edge.
    pub fn distance_to_boundary(&self, p: &Point<T>) -> T {
        self.edges()
            .map(|(a, b)| p.distance_to_segment(&a, &b))
            .fold(T::infinity(), T::min)
    }

    /// Even-odd point-in-polygon test.
    pub fn contains(&self, p: &Point<T>) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn centroid(&self) -> Point<T> {
        let n = T::from_usize(self.vertices.len().max(1)).unwrap();
        let (sx, sy) = self
            .vertices
            .iter()
            .fold((T::zero(), T::zero()), |(sx, sy), v| (sx + v.x, sy + v.y));
        Point::new(sx / n, sy / n)
    }

    /// Axis-aligned bounds as `(min_x, min_y, max_x, max_y)`.
    pub fn bounds(&self) -> Option<(T, T, T, T)> {
        let first = self.vertices.first()?;
        Some(self.vertices.iter().fold(
            (first.x, first.y, first.x, first.y),
            |(x0, y0, x1, y1), v| (x0.min(v.x), y0.min(v.y), x1.max(v.x), y1.max(v.y)),
        ))
    }
}

/// Simplifies an open polyline with the recursive farthest-point rule.
///
/// Endpoints are always kept. Distances are measured to the chord segment,
/// not the infinite line, so every discarded point lies within `epsilon` of
/// the returned chain.
pub fn rdp_simplify<T: Real>(points: &[Point<T>], epsilon: T) -> Vec<Point<T>> {
    rdp_indices(points, epsilon)
        .into_iter()
        .map(|i| points[i])
        .collect()
}

/// Same as [`rdp_simplify`] but returns the indices of the kept points.
pub fn rdp_indices<T: Real>(points: &[Point<T>], epsilon: T) -> Vec<usize> {
    let n = points.len();
    if n <= 2 {
        return (0..n).collect();
    }
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[n - 1] = true;
    let mut stack = vec![(0usize, n - 1)];
    while let Some((start, end)) = stack.pop() {
        if end <= start + 1 {
            continue;
        }
        let (a, b) = (points[start], points[end]);
        let mut max_dist = T::zero();
        let mut max_idx = start;
        for (i, p) in points.iter().enumerate().take(end).skip(start + 1) {
            let d = p.distance_to_segment(&a, &b);
            if d > max_dist {
                max_dist = d;
                max_idx = i;
            }
        }
        if max_dist > epsilon {
            keep[max_idx] = true;
            stack.push((start, max_idx));
            stack.push((max_idx, end));
        }
    }
    keep.iter()
        .enumerate()
        .filter_map(|(i, &k)| k.then_some(i))
        .collect()
}

/// Simplifies a closed ring of points and returns the distinct vertices.
///
/// The ring is cut at its first point and at the point farthest from it;
/// both halves are simplified as open chains. Afterwards the two cut points
/// are dropped again if they turn out to lie within `epsilon` of the chord
/// between their neighbours.
pub fn simplify_closed<T: Real>(ring: &[Point<T>], epsilon: T) -> Vec<Point<T>> {
    let mut pts: Vec<Point<T>> = ring.to_vec();
    if pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    if pts.len() < 3 {
        return pts;
    }
    let origin = pts[0];
    let far = (1..pts.len())
        .max_by(|&i, &j| {
            origin
                .distance(&pts[i])
                .partial_cmp(&origin.distance(&pts[j]))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap_or(1);

    let first = rdp_simplify(&pts[..=far], epsilon);
    let mut second_chain: Vec<Point<T>> = pts[far..].to_vec();
    second_chain.push(origin);
    let second = rdp_simplify(&second_chain, epsilon);

    let mut out = first;
    out.extend_from_slice(&second[1..second.len() - 1]);

    // The cut points were forced; drop them if they are not real corners.
    let mut anchors = vec![out[0]];
    if let Some(p) = out.iter().find(|p| **p == pts[far]) {
        anchors.push(*p);
    }
    for anchor in anchors {
        if out.len() <= 3 {
            break;
        }
        let Some(i) = out.iter().position(|p| *p == anchor) else {
            continue;
        };
        let n = out.len();
        let prev = out[(i + n - 1) % n];
        let next = out[(i + 1) % n];
        if anchor.distance_to_segment(&prev, &next) <= epsilon {
            out.remove(i);
        }
    }
    out
}
