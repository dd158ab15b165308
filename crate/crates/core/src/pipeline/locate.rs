use std::collections::BTreeMap;
use std::thread;

use serde::Serialize;

use crate::backends::{BackendError, Backends};
use crate::raster::{BoundingBox, Contour, ImageBuffer};
use crate::risk::ElementEntry;

/// One grounded instance of an element.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocatedInstance {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub confidence: f64,
    pub contour: Contour,
}

/// Localization result for one sensitive element. `instances` is empty when
/// nothing was found; `errors` holds backend failures, which never abort the
/// other elements.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElementLocation {
    pub element_id: u32,
    pub element: String,
    pub instances: Vec<LocatedInstance>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

impl ElementLocation {
    pub fn warning(&self) -> Option<String> {
        if !self.errors.is_empty() {
            Some(format!(
                "element {} ({}): {}",
                self.element_id,
                self.element,
                self.errors.join("; ")
            ))
        } else if self.instances.is_empty() {
            Some(format!(
                "element {} ({}): could not locate",
                self.element_id, self.element
            ))
        } else {
            None
        }
    }
}

fn locate_one(img: &ImageBuffer, id: u32, entry: &ElementEntry, backends: &Backends) -> ElementLocation {
    let mut loc = ElementLocation {
        element_id: id,
        element: entry.element.clone(),
        instances: Vec::new(),
        errors: Vec::new(),
    };
    let boxes = match backends.ground_phrase(img, &entry.element) {
        Ok(b) => b,
        Err(e) => {
            loc.errors.push(format!("grounding failed: {e}"));
            return loc;
        }
    };
    for g in boxes {
        match backends.segment(img, g.bbox) {
            Ok(contour) => loc.instances.push(LocatedInstance {
                bbox: g.bbox,
                confidence: g.confidence,
                contour,
            }),
            Err(e) => loc.errors.push(format!("segmentation of {:?} failed: {e}", g.bbox)),
        }
    }
    loc
}

/// Grounds and segments every element, one worker thread per element.
pub fn locate_elements(
    img: &ImageBuffer,
    elements: &BTreeMap<u32, ElementEntry>,
    backends: &Backends,
) -> Result<BTreeMap<u32, ElementLocation>, BackendError> {
    // Missing roles are configuration errors, not per-element failures.
    for role in [
        crate::backends::BackendRole::Grounder,
        crate::backends::BackendRole::Segmenter,
    ] {
        if !backends.has(role) {
            return Err(BackendError::Missing(role));
        }
    }
    let found = thread::scope(|s| {
        let handles: Vec<_> = elements
            .iter()
            .map(|(id, entry)| s.spawn(move || locate_one(img, *id, entry, backends)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("localization worker panicked"))
            .collect::<Vec<_>>()
    });
    Ok(found.into_iter().map(|l| (l.element_id, l)).collect())
}
