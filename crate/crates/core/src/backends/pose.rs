use serde::{Deserialize, Serialize};

use super::BackendError;

pub const KEYPOINT_COUNT: usize = 17;

/// COCO keypoint order.
pub const COCO_KEYPOINT_NAMES: [&str; KEYPOINT_COUNT] = [
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
];

/// Limb pairs of the COCO skeleton, as indices into [`COCO_KEYPOINT_NAMES`].
pub const COCO_SKELETON: [(usize, usize); 19] = [
    (15, 13),
    (13, 11),
    (16, 14),
    (14, 12),
    (11, 12),
    (5, 11),
    (6, 12),
    (5, 6),
    (5, 7),
    (6, 8),
    (7, 9),
    (8, 10),
    (1, 2),
    (0, 1),
    (0, 2),
    (1, 3),
    (2, 4),
    (3, 5),
    (4, 6),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub visible: bool,
}

impl Keypoint {
    pub const HIDDEN: Keypoint = Keypoint {
        x: 0.0,
        y: 0.0,
        visible: false,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseKeypoints {
    points: [Keypoint; KEYPOINT_COUNT],
}

#[derive(Serialize, Deserialize)]
struct NamedKeypoint {
    name: String,
    x: f64,
    y: f64,
    #[serde(default = "yes")]
    visible: bool,
}

fn yes() -> bool {
    true
}

impl PoseKeypoints {
    pub fn new(points: [Keypoint; KEYPOINT_COUNT]) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[Keypoint; KEYPOINT_COUNT] {
        &self.points
    }

    pub fn get(&self, name: &str) -> Option<Keypoint> {
        COCO_KEYPOINT_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.points[i])
    }

    pub fn visible_count(&self) -> usize {
        self.points.iter().filter(|p| p.visible).count()
    }

    /// Marks points outside `[0, w) x [0, h)` or with non-finite coordinates invisible.
    pub fn hide_outside(mut self, w: u32, h: u32) -> Self {
        for p in &mut self.points {
            let inside =
                p.x.is_finite() && p.y.is_finite() && p.x >= 0.0 && p.y >= 0.0 && p.x < w as f64 && p.y < h as f64;
            if !inside {
                p.visible = false;
            }
        }
        self
    }

    /// Builds from named points in any order. Names absent from the list
    /// become invisible; unknown or repeated names are errors.
    pub fn from_named<'a>(named: impl IntoIterator<Item = (&'a str, Keypoint)>) -> Result<Self, BackendError> {
        let mut points = [Keypoint::HIDDEN; KEYPOINT_COUNT];
        let mut seen = [false; KEYPOINT_COUNT];
        for (name, kp) in named {
            let i = COCO_KEYPOINT_NAMES
                .iter()
                .position(|n| *n == name)
                .ok_or_else(|| BackendError::Malformed(format!("unknown keypoint {name:?}")))?;
            if seen[i] {
                return Err(BackendError::Malformed(format!("keypoint {name:?} repeated")));
            }
            seen[i] = true;
            points[i] = kp;
        }
        Ok(Self { points })
    }
}

impl Serialize for PoseKeypoints {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let named: Vec<NamedKeypoint> = self
            .points
            .iter()
            .zip(COCO_KEYPOINT_NAMES)
            .map(|(p, n)| NamedKeypoint {
                name: n.to_string(),
                x: p.x,
                y: p.y,
                visible: p.visible,
            })
            .collect();
        named.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PoseKeypoints {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let named = Vec::<NamedKeypoint>::deserialize(d)?;
        PoseKeypoints::from_named(named.iter().map(|k| {
            (
                k.name.as_str(),
                Keypoint {
                    x: k.x,
                    y: k.y,
                    visible: k.visible,
                },
            )
        }))
        .map_err(serde::de::Error::custom)
    }
}
