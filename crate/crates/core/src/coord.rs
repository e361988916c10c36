use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Core (router) position on the 2D mesh. `y` grows northwards.
///
/// Ordering is row-major: by `y`, then `x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Coord {
    pub x: u16,
    pub y: u16,
}

impl Coord {
    pub const fn new(x: u16, y: u16) -> Self {
        Self { x, y }
    }

    pub fn manhattan(self, other: Coord) -> u32 {
        (self.x.abs_diff(other.x) + self.y.abs_diff(other.y)) as u32
    }

    /// Row-major index inside a mesh of the given width.
    pub fn index(self, width: u16) -> usize {
        self.y as usize * width as usize + self.x as usize
    }

    pub fn from_index(index: usize, width: u16) -> Self {
        Self {
            x: (index % width as usize) as u16,
            y: (index / width as usize) as u16,
        }
    }
}

impl Ord for Coord {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for Coord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}
