//! The unit cube `[0,1]^d` with the Euclidean metric: points, sampling and
//! the RRT steering step.

use std::collections::VecDeque;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Largest supported dimension. Covering experiments scale like `ε^-d`, so
/// anything above this is almost certainly a misconfiguration.
pub const MAX_DIM: usize = 16;

/// Name of the pseudo-random generator behind [`RngStream`], recorded in
/// output metadata so runs can be reproduced.
pub const GENERATOR_NAME: &str = "rand_chacha::ChaCha8Rng(seed_from_u64,set_stream)";

pub fn check_dim(d: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&d) {
        Ok(())
    } else {
        Err(Error::InvalidDimension(d))
    }
}

/// A point of `[0,1]^d`.
#[derive(Clone, PartialEq)]
pub struct Point {
    coords: SmallVec<[f64; 3]>,
}

impl Point {
    /// Builds a point, validating the dimension and that every coordinate
    /// lies in the closed unit interval.
    pub fn new(coords: &[f64]) -> Result<Self> {
        check_dim(coords.len())?;
        for (axis, &value) in coords.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::OutOfCube { axis, value });
            }
        }
        Ok(Self {
            coords: SmallVec::from_slice(coords),
        })
    }

    pub fn origin(d: usize) -> Result<Self> {
        Self::new(&vec![0.0; d])
    }

    /// The centre `(1/2, …, 1/2)` of the cube.
    pub fn centre(d: usize) -> Result<Self> {
        Self::new(&vec![0.5; d])
    }

    pub(crate) fn from_unchecked(coords: SmallVec<[f64; 3]>) -> Self {
        Self { coords }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Point").field(&self.coords.as_slice()).finish()
    }
}

/// A reproducible stream of uniform draws.
///
/// `(seed, stream_index)` pins the sequence bit-for-bit; ChaCha's 64-bit
/// stream counter gives each replica its own independent stream without any
/// coordination between replicas.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_index: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_index);
        Self {
            seed,
            stream_index,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform integer in `0..n`.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        self.rng.random_range(0..n)
    }
}

/// Draws a point uniformly from `[0,1]^d`, one independent coordinate per axis.
pub fn uniform_sample(rng: &mut RngStream, d: usize) -> Point {
    debug_assert!(check_dim(d).is_ok());
    Point::from_unchecked((0..d).map(|_| rng.unit()).collect())
}

/// Anything that can hand the growth processes their next target point.
///
/// The RNG stream is the normal source; [`ScriptedTargets`] replays a fixed
/// list, which is how hand-checked growth scenarios are written.
pub trait TargetSource {
    fn next_target(&mut self, d: usize) -> Result<Point>;
}

impl TargetSource for RngStream {
    #[inline]
    fn next_target(&mut self, d: usize) -> Result<Point> {
        Ok(uniform_sample(self, d))
    }
}

/// Replays a predetermined sequence of targets.
#[derive(Clone, Debug, Default)]
pub struct ScriptedTargets {
    queue: VecDeque<Point>,
}

impl ScriptedTargets {
    pub fn new(points: impl IntoIterator<Item = Point>) -> Self {
        Self {
            queue: points.into_iter().collect(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.queue.len()
    }
}

impl TargetSource for ScriptedTargets {
    fn next_target(&mut self, d: usize) -> Result<Point> {
        let p = self
            .queue
            .pop_front()
            .ok_or_else(|| crate::error::invalid("targets", "scripted target list exhausted"))?;
        if p.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: p.dim(),
            });
        }
        Ok(p)
    }
}

/// Squared Euclidean distance, summed axis by axis in index order.
///
/// Every distance in the crate goes through this function so accelerated and
/// brute-force nearest-neighbour searches agree to the last bit.
#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let diff = x - y;
        acc += diff * diff;
    }
    acc
}

pub fn distance(a: &Point, b: &Point) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(squared_distance(a.coords(), b.coords()).sqrt())
}

/// Moves from `nearest` a distance `epsilon` toward `target`.
///
/// `dist` must be the already-computed `distance(nearest, target)`; it is used
/// to normalise the direction. Callers take the within-step branch
/// themselves, so `dist <= epsilon` is a contract violation.
pub fn steer(nearest: &Point, target: &Point, epsilon: f64, dist: f64) -> Result<Point> {
    if nearest.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: nearest.dim(),
            got: target.dim(),
        });
    }
    if dist == 0.0 || nearest == target {
        return Err(Error::ZeroDirection);
    }
    if dist <= epsilon {
        return Err(Error::SteerWithinStep { dist, epsilon });
    }
    let scale = epsilon / dist;
    let coords = nearest
        .coords()
        .iter()
        .zip(target.coords())
        .map(|(n, t)| (n + scale * (t - n)).clamp(0.0, 1.0))
        .collect();
    Ok(Point::from_unchecked(coords))
}

/// `true` iff `p[axis] >= threshold`.
pub fn in_half_space(p: &Point, axis: usize, threshold: f64) -> bool {
    debug_assert!(axis < p.dim());
    p.coords()[axis] >= threshold
}
