//! Procedural furniture-like instance samples.
//!
//! Shapes are unions of box surfaces (and one open cylinder) sampled uniformly
//! by area at a fixed density. Category ids follow the common 20-class indoor
//! labeling (2 cabinet, 4 chair, 6 table, 9 bookshelf, 19 other furniture).

use std::f64::consts::TAU;

use rand::Rng;

use crate::objectness::Sample;
use crate::Point3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShapeKind {
    Cabinet,
    Chair,
    Table,
    Bookshelf,
    Bin,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 5] = [
        ShapeKind::Cabinet,
        ShapeKind::Chair,
        ShapeKind::Table,
        ShapeKind::Bookshelf,
        ShapeKind::Bin,
    ];

    pub fn category(self) -> i32 {
        match self {
            ShapeKind::Cabinet => 2,
            ShapeKind::Chair => 4,
            ShapeKind::Table => 6,
            ShapeKind::Bookshelf => 9,
            ShapeKind::Bin => 19,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Cabinet => "cabinet",
            ShapeKind::Chair => "chair",
            ShapeKind::Table => "table",
            ShapeKind::Bookshelf => "bookshelf",
            ShapeKind::Bin => "otherfurniture",
        }
    }
}

/// An axis-aligned box given by its min corner and size.
#[derive(Debug, Clone, Copy)]
struct Slab {
    min: Point3,
    size: Point3,
}

impl Slab {
    fn new(min: Point3, size: Point3) -> Self {
        Slab { min, size }
    }

    fn face_areas(&self) -> [f64; 3] {
        let [x, y, z] = self.size;
        [y * z, x * z, x * y]
    }

    fn area(&self) -> f64 {
        2.0 * self.face_areas().iter().sum::<f64>()
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Point3 {
        let areas = self.face_areas();
        let total: f64 = areas.iter().sum();
        let mut pick = rng.random::<f64>() * total;
        let mut axis = 2;
        for (a, &area) in areas.iter().enumerate() {
            if pick < area {
                axis = a;
                break;
            }
            pick -= area;
        }
        let mut p = [0.0; 3];
        for (a, v) in p.iter_mut().enumerate() {
            *v = if a == axis {
                if rng.random::<bool>() {
                    self.size[a]
                } else {
                    0.0
                }
            } else {
                rng.random::<f64>() * self.size[a]
            };
            *v += self.min[a];
        }
        p
    }
}

fn sample_slabs<R: Rng>(slabs: &[Slab], density: f64, rng: &mut R) -> Vec<Point3> {
    let areas: Vec<f64> = slabs.iter().map(Slab::area).collect();
    let total: f64 = areas.iter().sum();
    let n = ((total * density).round() as usize).max(8);
    (0..n)
        .map(|_| {
            let mut pick = rng.random::<f64>() * total;
            let mut which = slabs.len() - 1;
            for (i, &a) in areas.iter().enumerate() {
                if pick < a {
                    which = i;
                    break;
                }
                pick -= a;
            }
            slabs[which].sample(rng)
        })
        .collect()
}

fn jitter<R: Rng>(rng: &mut R, base: f64) -> f64 {
    base * rng.random_range(0.85..1.15)
}

fn legs(w: f64, d: f64, h: f64, t: f64) -> [Slab; 4] {
    [
        Slab::new([0.0, 0.0, 0.0], [t, t, h]),
        Slab::new([w - t, 0.0, 0.0], [t, t, h]),
        Slab::new([0.0, d - t, 0.0], [t, t, h]),
        Slab::new([w - t, d - t, 0.0], [t, t, h]),
    ]
}

/// Surface samples of a randomly sized shape with about `density` points per m².
pub fn generate<R: Rng>(kind: ShapeKind, density: f64, rng: &mut R) -> Vec<Point3> {
    match kind {
        ShapeKind::Cabinet => {
            let (w, d, h) = (jitter(rng, 0.6), jitter(rng, 0.45), jitter(rng, 0.9));
            sample_slabs(&[Slab::new([0.0; 3], [w, d, h])], density, rng)
        }
        ShapeKind::Chair => {
            let (w, d) = (jitter(rng, 0.45), jitter(rng, 0.45));
            let seat_h = jitter(rng, 0.45);
            let back_h = jitter(rng, 0.45);
            let t = 0.04;
            let mut parts = legs(w, d, seat_h, t).to_vec();
            parts.push(Slab::new([0.0, 0.0, seat_h], [w, d, 0.05]));
            parts.push(Slab::new([0.0, d - t, seat_h + 0.05], [w, t, back_h]));
            sample_slabs(&parts, density, rng)
        }
        ShapeKind::Table => {
            let (w, d, h) = (jitter(rng, 1.2), jitter(rng, 0.75), jitter(rng, 0.72));
            let mut parts = legs(w, d, h, 0.05).to_vec();
            parts.push(Slab::new([0.0, 0.0, h], [w, d, 0.04]));
            sample_slabs(&parts, density, rng)
        }
        ShapeKind::Bookshelf => {
            let (w, d, h) = (jitter(rng, 0.9), jitter(rng, 0.3), jitter(rng, 1.6));
            let t = 0.03;
            let mut parts = vec![
                Slab::new([0.0, 0.0, 0.0], [t, d, h]),
                Slab::new([w - t, 0.0, 0.0], [t, d, h]),
                Slab::new([0.0, d - t, 0.0], [w, t, h]),
            ];
            for k in 0..5 {
                let z = k as f64 * (h - t) / 4.0;
                parts.push(Slab::new([0.0, 0.0, z], [w, d, t]));
            }
            sample_slabs(&parts, density, rng)
        }
        ShapeKind::Bin => {
            let r = jitter(rng, 0.16);
            let h = jitter(rng, 0.4);
            let side = TAU * r * h;
            let bottom = std::f64::consts::PI * r * r;
            let n = (((side + bottom) * density).round() as usize).max(8);
            (0..n)
                .map(|_| {
                    let a = rng.random::<f64>() * TAU;
                    if rng.random::<f64>() * (side + bottom) < side {
                        [r * a.cos(), r * a.sin(), rng.random::<f64>() * h]
                    } else {
                        let rr = r * rng.random::<f64>().sqrt();
                        [rr * a.cos(), rr * a.sin(), 0.0]
                    }
                })
                .collect()
        }
    }
}

pub fn random_sample<R: Rng>(density: f64, rng: &mut R) -> Sample {
    let kind = ShapeKind::ALL[rng.random_range(0..ShapeKind::ALL.len())];
    Sample {
        coords: generate(kind, density, rng),
        category: kind.category(),
    }
}

/// Lifts every point above `cut_fraction` of the sample's height by `gap`,
/// splitting it into two vertically separated fragments.
pub fn fragment_vertically(coords: &[Point3], cut_fraction: f64, gap: f64) -> Vec<Point3> {
    let (lo, hi) = coords
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p[2]), hi.max(p[2]))
        });
    let cut = lo + (hi - lo) * cut_fraction;
    coords
        .iter()
        .map(|p| {
            if p[2] > cut {
                [p[0], p[1], p[2] + gap]
            } else {
                *p
            }
        })
        .collect()
}
