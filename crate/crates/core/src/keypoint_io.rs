//! Keypoint traces: validated in-memory types, the canonical line-oriented
//! file format, and an adapter for people-array pose-detector output.
//!
//! A canonical trace file is UTF-8. The first line is a header record
//! `{"fps":20.0,"label":1}` (label may be `null`), followed by one record
//! per frame: `{"frame":0,"points":[[x,y,c],...]}` with exactly ten points.

use std::io::{BufRead, Write};
use std::ops::Range;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const POINTS_PER_FRAME: usize = 10;
/// Point indices of the upper body part.
pub const TOP_PART: Range<usize> = 0..5;
/// Point indices of the middle body part.
pub const MID_PART: Range<usize> = 5..10;
pub const DEFAULT_FPS: f64 = 20.0;

/// One detected body point in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    /// Detector confidence; 0 marks an undetected point.
    pub confidence: f64,
}

impl Point {
    pub const MISSING: Point = Point {
        x: 0.0,
        y: 0.0,
        confidence: 0.0,
    };

    pub const fn new(x: f64, y: f64, confidence: f64) -> Self {
        Point { x, y, confidence }
    }

    fn validate(&self, frame: u64, point: usize) -> Result<()> {
        for (field, value) in [
            ("x", self.x),
            ("y", self.y),
            ("confidence", self.confidence),
        ] {
            // NaN fails the range test as well.
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::OutOfRange {
                    frame,
                    point,
                    field,
                    value,
                });
            }
        }
        Ok(())
    }
}

/// The ten tracked points of one video frame.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointFrame {
    frame_index: u64,
    points: [Point; POINTS_PER_FRAME],
}

impl KeypointFrame {
    pub fn new(frame_index: u64, points: &[Point]) -> Result<Self> {
        let points: [Point; POINTS_PER_FRAME] =
            points.try_into().map_err(|_| Error::PointCount {
                frame: frame_index,
                found: points.len(),
            })?;
        for (i, p) in points.iter().enumerate() {
            p.validate(frame_index, i)?;
        }
        Ok(KeypointFrame {
            frame_index,
            points,
        })
    }

    pub fn frame_index(&self) -> u64 {
        self.frame_index
    }

    pub fn points(&self) -> &[Point; POINTS_PER_FRAME] {
        &self.points
    }
}

/// Session-level concentration label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Low = 0,
    High = 1,
}

impl Label {
    pub fn from_u8(value: u8) -> Option<Label> {
        match value {
            0 => Some(Label::Low),
            1 => Some(Label::High),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.as_u8())
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Label::from_u8(v)
            .ok_or_else(|| serde::de::Error::custom(format!("label must be 0 or 1, got {v}")))
    }
}

/// A sequence of frames with strictly increasing indices, an optional
/// session label and the frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrace {
    frames: Vec<KeypointFrame>,
    label: Option<Label>,
    fps: f64,
}

impl LabeledTrace {
    pub fn new(frames: Vec<KeypointFrame>, label: Option<Label>, fps: f64) -> Result<Self> {
        check_fps(fps)?;
        for (i, pair) in frames.windows(2).enumerate() {
            if pair[1].frame_index <= pair[0].frame_index {
                return Err(Error::FrameOrder {
                    line: i + 3,
                    previous: pair[0].frame_index,
                    found: pair[1].frame_index,
                });
            }
        }
        Ok(LabeledTrace { frames, label, fps })
    }

    pub fn frames(&self) -> &[KeypointFrame] {
        &self.frames
    }

    pub fn label(&self) -> Option<Label> {
        self.label
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn with_label(mut self, label: Option<Label>) -> Self {
        self.label = label;
        self
    }
}

fn check_fps(fps: f64) -> Result<()> {
    if fps.is_finite() && fps > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "fps must be positive and finite, got {fps}"
        )))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderRecord {
    fps: f64,
    label: Option<Label>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    frame: u64,
    points: Vec<[f64; 3]>,
}

/// Reads a canonical trace. `label` and `fps`, when given, override the
/// header values.
pub fn parse_trace<R: BufRead>(
    input: R,
    label: Option<Label>,
    fps: Option<f64>,
) -> Result<LabeledTrace> {
    let mut header: Option<HeaderRecord> = None;
    let mut frames = Vec::new();
    let mut previous: Option<u64> = None;

    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            let h: HeaderRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: line_no,
                message: format!("bad header record: {e}"),
            })?;
            header = Some(h);
            continue;
        }
        let rec: FrameRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if let Some(prev) = previous {
            if rec.frame <= prev {
                return Err(Error::FrameOrder {
                    line: line_no,
                    previous: prev,
                    found: rec.frame,
                });
            }
        }
        previous = Some(rec.frame);
        let points: Vec<Point> = rec
            .points
            .iter()
            .map(|&[x, y, c]| Point::new(x, y, c))
            .collect();
        frames.push(KeypointFrame::new(rec.frame, &points)?);
    }

    let header = header.ok_or(Error::Parse {
        line: 1,
        message: "missing header record".into(),
    })?;
    let fps = fps.unwrap_or(header.fps);
    check_fps(fps)?;
    Ok(LabeledTrace {
        frames,
        label: label.or(header.label),
        fps,
    })
}

/// Writes `trace` in the canonical format. Reals use the shortest
/// representation that parses back to the identical `f64`.
pub fn serialize_trace<W: Write>(trace: &LabeledTrace, mut sink: W) -> Result<()> {
    let header = HeaderRecord {
        fps: trace.fps,
        label: trace.label,
    };
    serde_json::to_writer(&mut sink, &header).map_err(std::io::Error::from)?;
    sink.write_all(b"\n")?;
    for frame in &trace.frames {
        let rec = FrameRecord {
            frame: frame.frame_index,
            points: frame
                .points
                .iter()
                .map(|p| [p.x, p.y, p.confidence])
                .collect(),
        };
        serde_json::to_writer(&mut sink, &rec).map_err(std::io::Error::from)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Detector adapter
// ---------------------------------------------------------------------------

/// One frame of people-array detector output. Fields other than `people`
/// are ignored.
#[derive(Debug, Clone, Deserialize)]
pub struct DetectorFrame {
    pub people: Vec<DetectorPerson>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct DetectorPerson {
    /// Flat `[x0, y0, c0, x1, y1, c1, ...]` list.
    pub pose_keypoints_2d: Vec<f64>,
}

impl DetectorFrame {
    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Assigns a detector keypoint index to each of the ten canonical points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeypointMapping([usize; POINTS_PER_FRAME]);

impl KeypointMapping {
    pub fn new(indices: &[usize]) -> Result<Self> {
        let arr = indices.try_into().map_err(|_| {
            Error::Config(format!(
                "keypoint mapping needs exactly {POINTS_PER_FRAME} entries, got {}",
                indices.len()
            ))
        })?;
        Ok(KeypointMapping(arr))
    }

    pub fn identity() -> Self {
        KeypointMapping([0, 1, 2, 3, 4, 5, 6, 7, 8, 9])
    }

    /// BODY_25 layout: face points (nose, eyes, ears) as the top part,
    /// neck, shoulders and elbows as the middle part.
    pub fn body25_upper() -> Self {
        KeypointMapping([0, 15, 16, 17, 18, 1, 2, 5, 3, 6])
    }

    pub fn indices(&self) -> &[usize; POINTS_PER_FRAME] {
        &self.0
    }
}

impl Default for KeypointMapping {
    fn default() -> Self {
        Self::body25_upper()
    }
}

/// Coordinate units of detector output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coordinates {
    Normalized,
    Pixels { width: f64, height: f64 },
}

/// Converts detector frames into canonical frames numbered from 0.
///
/// Only the first person of each frame is used. A keypoint with zero
/// confidence, or a frame with nobody in it, yields [`Point::MISSING`].
/// Coordinates that land slightly outside the image are clamped to [0, 1].
pub fn adapt_detector_output(
    frames: &[DetectorFrame],
    mapping: &KeypointMapping,
    coords: Coordinates,
) -> Result<Vec<KeypointFrame>> {
    let (sx, sy) = match coords {
        Coordinates::Normalized => (1.0, 1.0),
        Coordinates::Pixels { width, height } => {
            if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
                return Err(Error::Config(format!(
                    "image dimensions must be positive, got {width}x{height}"
                )));
            }
            (width, height)
        }
    };

    frames
        .iter()
        .enumerate()
        .map(|(frame_no, frame)| {
            let frame_index = frame_no as u64;
            let mut points = [Point::MISSING; POINTS_PER_FRAME];
            if let Some(person) = frame.people.first() {
                let kp = &person.pose_keypoints_2d;
                for (slot, &src) in points.iter_mut().zip(mapping.0.iter()) {
                    let base = src * 3;
                    if base + 2 >= kp.len() {
                        return Err(Error::Config(format!(
                            "frame {frame_index}: detector index {src} out of range for {} keypoints",
                            kp.len() / 3
                        )));
                    }
                    let (x, y, c) = (kp[base], kp[base + 1], kp[base + 2]);
                    if !(x.is_finite() && y.is_finite() && c.is_finite()) {
                        return Err(Error::NonFinite(format!(
                            "detector keypoint {src} of frame {frame_index}"
                        )));
                    }
                    if c > 0.0 {
                        *slot = Point::new(
                            (x / sx).clamp(0.0, 1.0),
                            (y / sy).clamp(0.0, 1.0),
                            c.min(1.0),
                        );
                    }
                }
            }
            KeypointFrame::new(frame_index, &points)
        })
        .collect()
}
