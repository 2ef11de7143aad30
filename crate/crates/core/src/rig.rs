//! Camera identities and rig adjacency.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CameraId {
    Front,
    Left,
    Right,
    Rear,
}

impl CameraId {
    pub const ALL: [CameraId; 4] = [
        CameraId::Front,
        CameraId::Left,
        CameraId::Right,
        CameraId::Rear,
    ];

    /// Cameras refined by the search, in the order they are processed.
    pub const REFINED: [CameraId; 3] = [CameraId::Left, CameraId::Right, CameraId::Rear];

    /// Adjacent camera pairs sharing a corner overlap.
    pub const ADJACENT: [(CameraId, CameraId); 4] = [
        (CameraId::Front, CameraId::Left),
        (CameraId::Front, CameraId::Right),
        (CameraId::Left, CameraId::Rear),
        (CameraId::Right, CameraId::Rear),
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            CameraId::Front => "front",
            CameraId::Left => "left",
            CameraId::Right => "right",
            CameraId::Rear => "rear",
        }
    }

    /// Fixed neighbours this camera is scored against during refinement.
    pub fn reference_neighbors(self) -> &'static [CameraId] {
        match self {
            CameraId::Front => &[],
            CameraId::Left | CameraId::Right => &[CameraId::Front],
            CameraId::Rear => &[CameraId::Left, CameraId::Right],
        }
    }
}

impl fmt::Display for CameraId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CameraId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "front" => Ok(CameraId::Front),
            "left" => Ok(CameraId::Left),
            "right" => Ok(CameraId::Right),
            "rear" => Ok(CameraId::Rear),
            other => Err(format!("unknown camera id '{other}'")),
        }
    }
}

/// One value per camera, indexed by [`CameraId`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerCamera<T> {
    pub front: T,
    pub left: T,
    pub right: T,
    pub rear: T,
}

impl<T> PerCamera<T> {
    pub fn from_fn(mut f: impl FnMut(CameraId) -> T) -> Self {
        Self {
            front: f(CameraId::Front),
            left: f(CameraId::Left),
            right: f(CameraId::Right),
            rear: f(CameraId::Rear),
        }
    }

    pub fn get(&self, id: CameraId) -> &T {
        match id {
            CameraId::Front => &self.front,
            CameraId::Left => &self.left,
            CameraId::Right => &self.right,
            CameraId::Rear => &self.rear,
        }
    }

    pub fn get_mut(&mut self, id: CameraId) -> &mut T {
        match id {
            CameraId::Front => &mut self.front,
            CameraId::Left => &mut self.left,
            CameraId::Right => &mut self.right,
            CameraId::Rear => &mut self.rear,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(CameraId, &T) -> U) -> PerCamera<U> {
        PerCamera::from_fn(|id| f(id, self.get(id)))
    }

    pub fn iter(&self) -> impl Iterator<Item = (CameraId, &T)> {
        CameraId::ALL.into_iter().map(move |id| (id, self.get(id)))
    }
}
