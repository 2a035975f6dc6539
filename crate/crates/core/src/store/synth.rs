//! Flat-color geometric logos with known color and shape labels, plus
//! planted near-duplicate groups for rank evaluation.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::manifest::{save_manifest, split_train_test, DatasetManifest, LogoRecord, Split, MANIFEST_VERSION};
use crate::error::{Error, Result};
use crate::preprocess::{RasterImage, TextMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthShape {
    Circle,
    Square,
    Triangle,
    Line,
    Polygon,
}

impl SynthShape {
    pub const ALL: [SynthShape; 5] = [
        SynthShape::Circle,
        SynthShape::Square,
        SynthShape::Triangle,
        SynthShape::Line,
        SynthShape::Polygon,
    ];

    pub fn vienna_code(self) -> &'static str {
        match self {
            SynthShape::Circle => "26.01.01",
            SynthShape::Square => "26.04.01",
            SynthShape::Triangle => "26.03.01",
            SynthShape::Line => "26.11.01",
            SynthShape::Polygon => "26.05.01",
        }
    }

    /// Whether the point `(dx, dy)` from the center lies inside a shape of
    /// half-size `h`.
    fn contains(self, dx: f64, dy: f64, h: f64) -> bool {
        let (ax, ay) = (dx.abs(), dy.abs());
        match self {
            SynthShape::Circle => dx * dx + dy * dy <= h * h,
            // Square frame whose hole is half the side.
            SynthShape::Square => ax <= h && ay <= h && !(ax < h / 2.0 && ay < h / 2.0),
            // Isosceles, apex up.
            SynthShape::Triangle => dy >= -h && dy <= h && ax <= (dy + h) / 2.0,
            // Two horizontal bands.
            SynthShape::Line => ax <= h && ay <= h && ay >= h / 3.0,
            // Regular hexagon, flat top and bottom.
            SynthShape::Polygon => {
                let s3 = 3f64.sqrt();
                ay <= h * s3 / 2.0 && s3 * ax + ay <= s3 * h
            }
        }
    }
}

/// The thirteen taxonomy colors with their render RGB and Vienna code.
pub const PALETTE: [(&str, [u8; 3], &str); 13] = [
    ("red", [255, 0, 0], "29.01.01"),
    ("yellow", [255, 255, 0], "29.01.02"),
    ("green", [0, 128, 0], "29.01.03"),
    ("blue", [0, 0, 255], "29.01.04"),
    ("violet", [128, 0, 255], "29.01.05"),
    ("white", [255, 255, 255], "29.01.06"),
    ("brown", [139, 69, 19], "29.01.07"),
    ("black", [0, 0, 0], "29.01.08"),
    ("silver", [192, 192, 192], "29.01.95"),
    ("gray", [128, 128, 128], "29.01.96"),
    ("gold", [212, 175, 55], "29.01.97"),
    ("orange", [255, 165, 0], "29.01.98"),
    ("pink", [255, 192, 203], "29.01.99"),
];

const WHITE: [u8; 3] = [255, 255, 255];
/// Background behind white logos.
const TEAL: [u8; 3] = [0, 80, 80];
const GLYPH: [u8; 3] = [0, 0, 0];
pub const TEXT_CODE: &str = "27.05.01";

fn palette_entry(name: &str) -> Option<&'static (&'static str, [u8; 3], &'static str)> {
    PALETTE.iter().find(|(n, _, _)| n.eq_ignore_ascii_case(name))
}

fn default_shapes() -> Vec<SynthShape> {
    SynthShape::ALL.to_vec()
}

fn default_colors() -> Vec<String> {
    PALETTE.iter().map(|(n, _, _)| n.to_string()).collect()
}

fn default_canvas() -> u32 {
    128
}

fn default_duplicates() -> usize {
    10
}

fn default_ratio() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_logos: usize,
    #[serde(default)]
    pub groups: usize,
    #[serde(default = "default_duplicates")]
    pub duplicates_per_group: usize,
    #[serde(default = "default_shapes")]
    pub shapes: Vec<SynthShape>,
    #[serde(default = "default_colors")]
    pub colors: Vec<String>,
    /// Share of logos that get a glyph strip and a text mask.
    #[serde(default)]
    pub text_fraction: f64,
    #[serde(default = "default_canvas")]
    pub canvas: u32,
    #[serde(default = "default_ratio")]
    pub train_ratio: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(n_logos: usize, seed: u64) -> Self {
        Self {
            n_logos,
            groups: 0,
            duplicates_per_group: default_duplicates(),
            shapes: default_shapes(),
            colors: default_colors(),
            text_fraction: 0.0,
            canvas: default_canvas(),
            train_ratio: default_ratio(),
            seed,
        }
    }

    pub fn with_groups(mut self, groups: usize, duplicates_per_group: usize) -> Self {
        self.groups = groups;
        self.duplicates_per_group = duplicates_per_group;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_logos == 0 {
            return bad("n_logos must be positive".into());
        }
        if self.shapes.is_empty() || self.colors.is_empty() {
            return bad("shape and color palettes must be non-empty".into());
        }
        if let Some(c) = self.colors.iter().find(|c| palette_entry(c).is_none()) {
            return bad(format!("unknown color {c:?}"));
        }
        if self.groups > 0 && self.duplicates_per_group < 2 {
            return bad("a duplicate group needs at least two logos".into());
        }
        if self.groups * self.duplicates_per_group > self.n_logos {
            return bad("duplicate groups exceed n_logos".into());
        }
        if !(0.0..=1.0).contains(&self.text_fraction) {
            return bad("text_fraction must lie in [0, 1]".into());
        }
        if self.canvas < 32 {
            return bad("canvas must be at least 32 pixels".into());
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return bad("train_ratio must lie in (0, 1)".into());
        }
        Ok(())
    }
}

/// Placement of one rendered logo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogoDraw {
    pub shape: SynthShape,
    pub rgb: [u8; 3],
    /// Half-size of the shape in pixels.
    pub half: f64,
    pub cx: f64,
    pub cy: f64,
    pub text: bool,
}

/// Renders one logo without anti-aliasing, plus its text mask when it has
/// a glyph strip.
pub fn render_logo(draw: &LogoDraw, canvas: u32) -> (RasterImage, Option<TextMask>) {
    let bg = if draw.rgb == WHITE { TEAL } else { WHITE };
    let glyph_top = draw.cy + draw.half + 4.0;
    let glyph_h = (canvas as f64 * 0.06).max(3.0);
    let in_glyph = |x: f64, y: f64| {
        draw.text
            && y >= glyph_top
            && y < glyph_top + glyph_h
            && (x - draw.cx).abs() <= draw.half
            && ((x - (draw.cx - draw.half)) as u32 / 3) % 2 == 0
    };
    let img = RasterImage::from_fn(canvas, canvas, |x, y| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        if in_glyph(px, py) {
            GLYPH
        } else if draw.shape.contains(px - draw.cx, py - draw.cy, draw.half) {
            draw.rgb
        } else {
            bg
        }
    });
    let mask = draw
        .text
        .then(|| TextMask::from_fn(canvas, canvas, |x, y| in_glyph(x as f64 + 0.5, y as f64 + 0.5)));
    (img, mask)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    #[serde(skip)]
    pub manifest: Option<DatasetManifest>,
    /// Logo ids of each planted near-duplicate group.
    pub groups: Vec<Vec<u64>>,
    /// Color name of each logo, by id order.
    pub colors: Vec<(u64, String)>,
}

/// Plans every logo. Group `g` shares one shape and color; the other logos
/// cycle through the colors and draw shapes at random.
pub fn plan_corpus(spec: &SyntheticSpec) -> Result<Vec<(LogoDraw, String, Option<usize>)>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let c = spec.canvas as f64;
    // Room for the glyph strip below the shape.
    let max_half = c * 0.32;
    let place = |rng: &mut ChaCha8Rng, half: f64| {
        let margin = half + 2.0;
        let cx = rng.gen_range(margin..=(c - margin));
        let cy = rng.gen_range(margin..=(c - margin - c * 0.12).max(margin));
        (cx, cy)
    };
    let mut plan = Vec::with_capacity(spec.n_logos);
    for g in 0..spec.groups {
        let shape = spec.shapes[g % spec.shapes.len()];
        let color = &spec.colors[g % spec.colors.len()];
        let base = rng.gen_range(0.6..0.9) * max_half;
        for _ in 0..spec.duplicates_per_group {
            let half = base * rng.gen_range(0.95..1.05);
            let (cx, cy) = place(&mut rng, half);
            let text = rng.gen_bool(spec.text_fraction);
            let rgb = palette_entry(color).unwrap().1;
            plan.push((LogoDraw { shape, rgb, half, cx, cy, text }, color.clone(), Some(g)));
        }
    }
    let mut next_color = spec.groups;
    while plan.len() < spec.n_logos {
        let shape = spec.shapes[rng.gen_range(0..spec.shapes.len())];
        let color = &spec.colors[next_color % spec.colors.len()];
        next_color += 1;
        let half = rng.gen_range(0.5..1.0) * max_half;
        let (cx, cy) = place(&mut rng, half);
        let text = rng.gen_bool(spec.text_fraction);
        let rgb = palette_entry(color).unwrap().1;
        plan.push((LogoDraw { shape, rgb, half, cx, cy, text }, color.clone(), None));
    }
    Ok(plan)
}

/// Writes `images/<id>.png`, `masks/<id>.png` for logos with text,
/// `manifest.jsonl` and `groups.json` under `out_dir`. Ids start at 1.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec, out_dir: impl AsRef<Path>) -> Result<SyntheticCorpus> {
    let plan = plan_corpus(spec)?;
    let out = out_dir.as_ref();
    fs::create_dir_all(out.join("images"))?;
    if plan.iter().any(|(d, _, _)| d.text) {
        fs::create_dir_all(out.join("masks"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x6e69_6365);
    let mut records = Vec::with_capacity(plan.len());
    let mut groups = vec![Vec::new(); spec.groups];
    let mut colors = Vec::with_capacity(plan.len());
    for (i, (draw, color, group)) in plan.iter().enumerate() {
        let id = i as u64 + 1;
        let (img, mask) = render_logo(draw, spec.canvas);
        img.save(out.join(format!("images/{id}.png")))?;
        if let Some(m) = mask {
            m.save(out.join(format!("masks/{id}.png")))?;
        }
        let mut vienna = vec![draw.shape.vienna_code().to_string(), palette_entry(color).unwrap().2.to_string()];
        if draw.text {
            vienna.push(TEXT_CODE.to_string());
        }
        let nice = {
            let first = rng.gen_range(1..=45u8);
            let mut n = vec![first];
            if rng.gen_bool(0.3) {
                let second = rng.gen_range(1..=45u8);
                if second != first {
                    n.push(second);
                    n.sort_unstable();
                }
            }
            n
        };
        records.push(LogoRecord {
            id,
            path: format!("images/{id}.png"),
            vienna,
            nice,
            split: Split::Train,
        });
        if let Some(g) = group {
            groups[*g].push(id);
        }
        colors.push((id, color.clone()));
    }
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        root: out.to_path_buf(),
        records,
    };
    let manifest = split_train_test(&manifest, spec.train_ratio, spec.seed)?;
    save_manifest(&manifest, out.join("manifest.jsonl"))?;
    let corpus = SyntheticCorpus {
        manifest: Some(manifest),
        groups,
        colors,
    };
    fs::write(out.join("groups.json"), serde_json::to_vec_pretty(&corpus)?)?;
    Ok(corpus)
}
