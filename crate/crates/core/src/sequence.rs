//! Ordered frames with per-frame ground truth, plus the trait that lets
//! training and tracking read frames lazily.

use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::controller::Window;
use crate::image::{crop_and_resize, Image};
use crate::metric::BBox;

/// Random access to the frames and boxes of one sequence.
pub trait FrameSource {
    fn name(&self) -> &str;
    fn len(&self) -> usize;
    fn frame(&self, index: usize) -> Result<Cow<'_, Image>>;
    fn gt_box(&self, index: usize) -> BBox;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `crop_and_resize` of frame `index`; sources that can render a
    /// sub-region cheaply override this.
    fn crop(&self, index: usize, window: &Window, out_size: usize) -> Result<Image> {
        Ok(crop_and_resize(self.frame(index)?.as_ref(), window, out_size))
    }
}

/// A fully materialised sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRecord {
    pub name: String,
    pub frames: Vec<Image>,
    pub boxes: Vec<BBox>,
}

impl SequenceRecord {
    pub fn new(name: impl Into<String>, frames: Vec<Image>, boxes: Vec<BBox>) -> Result<Self> {
        if frames.len() != boxes.len() {
            return Err(Error::Param(format!(
                "count mismatch: {} frames vs {} boxes",
                frames.len(),
                boxes.len()
            )));
        }
        if let Some(f) = frames.first() {
            let dims = (f.width(), f.height());
            if let Some(i) = frames.iter().position(|g| (g.width(), g.height()) != dims) {
                return Err(Error::Param(format!("frame {i} changes the frame size")));
            }
        }
        Ok(Self {
            name: name.into(),
            frames,
            boxes,
        })
    }
}

impl FrameSource for SequenceRecord {
    fn name(&self) -> &str {
        &self.name
    }

    fn len(&self) -> usize {
        self.frames.len()
    }

    fn frame(&self, index: usize) -> Result<Cow<'_, Image>> {
        self.frames
            .get(index)
            .map(Cow::Borrowed)
            .ok_or_else(|| Error::Param(format!("frame {index} out of range")))
    }

    fn gt_box(&self, index: usize) -> BBox {
        self.boxes[index]
    }
}
