//! Sidecar rectangle annotations for training data.
//!
//! One rectangle per line: `path x y w h label`, where `label` is `focused`
//! or `blurred`, `(x, y)` is the top-left corner in pixels and paths are
//! relative to the annotation file. Blank lines and `#` comments are
//! ignored. A focused rectangle is paired with a blurred rectangle of the
//! same geometry in another image (the same scene region out of focus), in
//! order of appearance.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::imaging::{load_image, to_grayscale, Image};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FocusLabel {
    Focused,
    Blurred,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub path: PathBuf,
    pub rect: Rect,
    pub label: FocusLabel,
}

pub fn parse_annotations(text: &str, base: &Path, origin: &Path) -> Result<Vec<Annotation>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |msg: &str| Error::format(origin, format!("line {}: {msg}", n + 1));
        if fields.len() != 6 {
            return Err(bad("expected `path x y w h label`"));
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| bad(&format!("`{s}` is not a pixel count")))
        };
        let rect = Rect {
            x: num(fields[1])?,
            y: num(fields[2])?,
            w: num(fields[3])?,
            h: num(fields[4])?,
        };
        if rect.w == 0 || rect.h == 0 {
            return Err(bad("empty rectangle"));
        }
        let label = match fields[5].to_ascii_lowercase().as_str() {
            "focused" | "f" => FocusLabel::Focused,
            "blurred" | "b" => FocusLabel::Blurred,
            other => return Err(bad(&format!("unknown label `{other}`"))),
        };
        out.push(Annotation {
            path: base.join(fields[0]),
            rect,
            label,
        });
    }
    Ok(out)
}

pub fn load_annotations(path: &Path) -> Result<Vec<Annotation>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_annotations(&text, base, path)
}

/// Matches focused and blurred rectangles of identical geometry.
pub fn pair_annotations(annotations: &[Annotation]) -> Result<Vec<(Annotation, Annotation)>> {
    let mut groups: BTreeMap<Rect, (Vec<&Annotation>, Vec<&Annotation>)> = BTreeMap::new();
    for a in annotations {
        let entry = groups.entry(a.rect).or_default();
        match a.label {
            FocusLabel::Focused => entry.0.push(a),
            FocusLabel::Blurred => entry.1.push(a),
        }
    }
    let mut pairs = Vec::new();
    for (rect, (focused, blurred)) in groups {
        if focused.len() != blurred.len() {
            return Err(Error::ShapeMismatch(format!(
                "unpaired annotations for rectangle {}x{}+{}+{}: {} focused vs {} blurred",
                rect.w,
                rect.h,
                rect.x,
                rect.y,
                focused.len(),
                blurred.len()
            )));
        }
        for (f, b) in focused.into_iter().zip(blurred) {
            pairs.push((f.clone(), b.clone()));
        }
    }
    Ok(pairs)
}

/// Crops a gray rectangle out of an image.
pub fn crop(img: &Image, rect: Rect) -> Result<Image> {
    if rect.x + rect.w > img.width() || rect.y + rect.h > img.height() {
        return Err(Error::ShapeMismatch(format!(
            "rectangle {}x{}+{}+{} exceeds {}x{} image",
            rect.w,
            rect.h,
            rect.x,
            rect.y,
            img.width(),
            img.height()
        )));
    }
    let gray = to_grayscale(img);
    Image::from_fn(rect.h, rect.w, |r, c| gray.get(0, rect.y + r, rect.x + c))
}

/// Loads every annotated pair as (focused crop, blurred crop).
pub fn load_training_crops(pairs: &[(Annotation, Annotation)]) -> Result<Vec<(Image, Image)>> {
    let mut cache: BTreeMap<PathBuf, Image> = BTreeMap::new();
    let mut out = Vec::with_capacity(pairs.len());
    for (f, b) in pairs {
        for p in [&f.path, &b.path] {
            if !cache.contains_key(p) {
                cache.insert(p.clone(), load_image(p)?);
            }
        }
        out.push((crop(&cache[&f.path], f.rect)?, crop(&cache[&b.path], b.rect)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_pairs() {
        let text = "# training\na.png 0 0 16 16 focused\nb.png 0 0 16 16 blurred\n\nb.png 16 0 8 8 focused # far\na.png 16 0 8 8 blurred\n";
        let ann = parse_annotations(text, Path::new("/data"), Path::new("t.txt")).unwrap();
        assert_eq!(ann.len(), 4);
        assert_eq!(ann[0].path, Path::new("/data/a.png"));
        let pairs = pair_annotations(&ann).unwrap();
        assert_eq!(pairs.len(), 2);
        assert!(pairs
            .iter()
            .all(|(f, b)| f.label == FocusLabel::Focused && b.label == FocusLabel::Blurred));
    }

    #[test]
    fn unpaired_is_an_error() {
        let text = "a.png 0 0 16 16 focused\n";
        let ann = parse_annotations(text, Path::new("."), Path::new("t")).unwrap();
        assert!(pair_annotations(&ann).is_err());
    }

    #[test]
    fn malformed_lines_rejected() {
        for bad in [
            "a.png 0 0 16 focused",
            "a.png 0 0 0 4 focused",
            "a.png 0 0 4 4 sharp",
            "a.png x 0 4 4 blurred",
        ] {
            assert!(parse_annotations(bad, Path::new("."), Path::new("t")).is_err(), "{bad}");
        }
    }
}
