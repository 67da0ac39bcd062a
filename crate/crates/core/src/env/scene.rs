use alloc::format;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EnvConfig;
use crate::error::{Error, Result};

/// Number of colour attributes. Colour is a fixed function of the category so
/// that colour questions are groundable from category embeddings alone.
pub const NUM_COLORS: usize = 4;
/// Number of size classes (small, medium, large).
pub const NUM_SIZES: usize = 3;
/// Attribute ids: `0..NUM_COLORS` are colours, the rest are size classes.
pub const NUM_ATTRIBUTES: usize = NUM_COLORS + NUM_SIZES;

/// Box side fractions of its grid cell for each size class.
const SIZE_FRACTIONS: [(f64, f64); NUM_SIZES] = [(0.2, 0.4), (0.45, 0.65), (0.7, 0.95)];

pub fn color_of_category(category: usize) -> usize {
    category % NUM_COLORS
}

pub fn size_attribute(size_class: usize) -> usize {
    NUM_COLORS + size_class
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub category_id: usize,
    /// `[x_min, y_min, width, height]` in pixels.
    pub bbox: [f64; 4],
    pub attribute_ids: Vec<usize>,
}

impl SceneObject {
    pub fn center(&self) -> (f64, f64) {
        let [x, y, w, h] = self.bbox;
        (x + w / 2.0, y + h / 2.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub width: f64,
    pub height: f64,
    pub objects: Vec<SceneObject>,
}

impl Scene {
    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Checks object count bounds and that every box is non-degenerate and
    /// inside the image.
    pub fn validate(&self) -> Result<()> {
        let m = self.objects.len();
        if !(3..=20).contains(&m) {
            return Err(Error::Contract(format!("scene has {m} objects, expected 3..=20")));
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(Error::Contract("scene has a degenerate image size".into()));
        }
        for (i, o) in self.objects.iter().enumerate() {
            let [x, y, w, h] = o.bbox;
            let inside = x >= 0.0 && y >= 0.0 && x + w <= self.width && y + h <= self.height;
            if !(w > 0.0 && h > 0.0) || !inside {
                return Err(Error::Contract(format!("object {i} has an invalid box {:?}", o.bbox)));
            }
        }
        Ok(())
    }

    /// True when at least two objects share a category.
    pub fn has_category_collision(&self) -> bool {
        self.objects
            .iter()
            .enumerate()
            .any(|(i, a)| self.objects[i + 1..].iter().any(|b| b.category_id == a.category_id))
    }
}

/// Generates a scene deterministically from `seed`.
///
/// Objects sit in distinct cells of a `grid_cols × grid_rows` grid, one box
/// per cell, sized according to a random size class.
pub fn generate_scene(seed: u64, config: &EnvConfig) -> Result<Scene> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(config.min_objects..=config.max_objects);
    let (cols, rows) = (config.grid_cols as usize, config.grid_rows as usize);
    let (width, height) = (config.width as usize, config.height as usize);
    let cells = sample(&mut rng, cols * rows, m);
    let mut objects = Vec::with_capacity(m);
    for cell in cells.iter() {
        let (col, row) = (cell % cols, cell / cols);
        let (x0, x1) = (col * width / cols, (col + 1) * width / cols);
        let (y0, y1) = (row * height / rows, (row + 1) * height / rows);
        let category = rng.gen_range(0..config.num_categories);
        let size_class = rng.gen_range(0..NUM_SIZES);
        let (lo, hi) = SIZE_FRACTIONS[size_class];
        let w = libm::round((x1 - x0) as f64 * rng.gen_range(lo..hi)).max(1.0) as usize;
        let h = libm::round((y1 - y0) as f64 * rng.gen_range(lo..hi)).max(1.0) as usize;
        let x = x0 + rng.gen_range(0..=(x1 - x0 - w));
        let y = y0 + rng.gen_range(0..=(y1 - y0 - h));
        objects.push(SceneObject {
            category_id: category,
            bbox: [x as f64, y as f64, w as f64, h as f64],
            attribute_ids: alloc::vec![color_of_category(category), size_attribute(size_class)],
        });
    }
    let scene = Scene { width: width as f64, height: height as f64, objects };
    scene.validate()?;
    Ok(scene)
}
