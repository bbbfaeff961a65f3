//! RGB to grayscale conversion and the screenshot preprocessing steps
//! (crop, background masking, saturation and contrast normalization).

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use thiserror::Error;

use crate::image_io::{GrayImage, RgbImage};
use crate::par::{self, Execution};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ColorError {
    #[error("weights must sum to exactly 1, got {0}")]
    WeightSum(String),
    #[error("invalid weight specification: {0}")]
    BadWeights(String),
    #[error("incomplete surjection: table has no entry for ({}, {}, {})", .0[0], .0[1], .0[2])]
    IncompleteSurjection([u8; 3]),
    #[error("surjection table line {line}: {reason}")]
    Table { line: usize, reason: String },
    #[error("crop rectangle {x},{y} {w}x{h} lies outside the {width}x{height} image")]
    Crop {
        x: usize,
        y: usize,
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },
    #[error("no conversion methods given")]
    NoMethods,
}

/// Nonnegative channel weights summing to exactly one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Weights {
    r: Ratio<u64>,
    g: Ratio<u64>,
    b: Ratio<u64>,
}

impl Weights {
    pub fn new(r: Ratio<u64>, g: Ratio<u64>, b: Ratio<u64>) -> Result<Self, ColorError> {
        let sum = r + g + b;
        if sum != Ratio::from_integer(1) {
            return Err(ColorError::WeightSum(sum.to_string()));
        }
        Ok(Self { r, g, b })
    }

    pub fn luminosity() -> Self {
        Self {
            r: Ratio::new(21, 100),
            g: Ratio::new(72, 100),
            b: Ratio::new(7, 100),
        }
    }

    pub fn as_ratios(&self) -> [Ratio<u64>; 3] {
        [self.r, self.g, self.b]
    }

    fn integer_form(&self) -> IntegerWeights {
        let den = [self.r, self.g, self.b]
            .iter()
            .fold(1u64, |acc, w| num_integer_lcm(acc, *w.denom()));
        let scale = |w: Ratio<u64>| u128::from(w.numer() * (den / w.denom()));
        IntegerWeights {
            num: [scale(self.r), scale(self.g), scale(self.b)],
            den: u128::from(den),
        }
    }
}

fn num_integer_lcm(a: u64, b: u64) -> u64 {
    fn gcd(mut a: u64, mut b: u64) -> u64 {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    }
    a / gcd(a, b) * b
}

/// Parse one exact decimal (`0.21`) or fraction (`21/100`).
fn parse_ratio(s: &str) -> Result<Ratio<u64>, ColorError> {
    let bad = || ColorError::BadWeights(s.to_string());
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: u64 = n.trim().parse().map_err(|_| bad())?;
        let d: u64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(n, d));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if (int.is_empty() && frac.is_empty()) || frac.len() > 18 {
        return Err(bad());
    }
    let digits = |t: &str| t.is_empty() || t.bytes().all(|b| b.is_ascii_digit());
    if !digits(int) || !digits(frac) {
        return Err(bad());
    }
    let int: u64 = if int.is_empty() {
        0
    } else {
        int.parse().map_err(|_| bad())?
    };
    let den = 10u64.pow(frac.len() as u32);
    let frac: u64 = if frac.is_empty() {
        0
    } else {
        frac.parse().map_err(|_| bad())?
    };
    let num = int
        .checked_mul(den)
        .and_then(|v| v.checked_add(frac))
        .ok_or_else(bad)?;
    Ok(Ratio::new(num, den))
}

impl FromStr for Weights {
    type Err = ColorError;

    /// `"0.5,0.25,0.25"` or `"1/2,1/4,1/4"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 3 {
            return Err(ColorError::BadWeights(s.to_string()));
        }
        Self::new(
            parse_ratio(parts[0])?,
            parse_ratio(parts[1])?,
            parse_ratio(parts[2])?,
        )
    }
}

struct IntegerWeights {
    num: [u128; 3],
    den: u128,
}

impl IntegerWeights {
    fn apply(&self, [r, g, b]: [u8; 3]) -> u8 {
        let s =
            self.num[0] * u128::from(r) + self.num[1] * u128::from(g) + self.num[2] * u128::from(b);
        // round half up; the weights sum to 1 so the result never exceeds 255
        ((2 * s + self.den) / (2 * self.den)).min(255) as u8
    }
}

/// Lookup table from quantized RGB triples to gray values.
///
/// Channels are quantized into bins of `bin_width` values; a bin is keyed by
/// its lower bound. `bin_width == 1` is the full 256^3 table.
#[derive(Clone, PartialEq, Eq)]
pub struct SurjectionTable {
    bin_width: u16,
    bins: usize,
    table: Vec<Option<u8>>,
}

impl fmt::Debug for SurjectionTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SurjectionTable")
            .field("bin_width", &self.bin_width)
            .field("bins", &self.bins)
            .field("filled", &self.table.iter().filter(|v| v.is_some()).count())
            .finish()
    }
}

impl SurjectionTable {
    /// An empty table; fill it with [`SurjectionTable::insert`].
    pub fn new(bin_width: u16) -> Result<Self, ColorError> {
        if bin_width == 0 || bin_width > 256 {
            return Err(ColorError::Table {
                line: 0,
                reason: format!("bin width {bin_width} must be in 1..=256"),
            });
        }
        let bins = 256usize.div_ceil(bin_width as usize);
        Ok(Self {
            bin_width,
            bins,
            table: vec![None; bins * bins * bins],
        })
    }

    /// Build a complete table by evaluating `f` at every bin's lower bound.
    pub fn from_fn(bin_width: u16, mut f: impl FnMut([u8; 3]) -> u8) -> Result<Self, ColorError> {
        let mut t = Self::new(bin_width)?;
        for i in 0..t.table.len() {
            let key = t.key_of(i);
            t.table[i] = Some(f(key));
        }
        Ok(t)
    }

    pub fn bin_width(&self) -> u16 {
        self.bin_width
    }

    fn slot(&self, [r, g, b]: [u8; 3]) -> usize {
        let w = self.bin_width as usize;
        ((r as usize / w) * self.bins + g as usize / w) * self.bins + b as usize / w
    }

    fn key_of(&self, slot: usize) -> [u8; 3] {
        let w = self.bin_width as usize;
        let b = slot % self.bins;
        let g = (slot / self.bins) % self.bins;
        let r = slot / (self.bins * self.bins);
        [(r * w) as u8, (g * w) as u8, (b * w) as u8]
    }

    /// Insert an entry keyed by a bin's lower bound.
    pub fn insert(&mut self, key: [u8; 3], gray: u8) -> Result<(), String> {
        let w = self.bin_width;
        if key.iter().any(|&c| u16::from(c) % w != 0) {
            return Err(format!(
                "key ({}, {}, {}) is not a multiple of bin width {w}",
                key[0], key[1], key[2]
            ));
        }
        let slot = self.slot(key);
        self.table[slot] = Some(gray);
        Ok(())
    }

    /// The smallest key (in r, g, b order) without an entry.
    pub fn first_missing(&self) -> Option<[u8; 3]> {
        self.table
            .iter()
            .position(Option::is_none)
            .map(|slot| self.key_of(slot))
    }

    pub fn lookup(&self, rgb: [u8; 3]) -> Option<u8> {
        self.table[self.slot(rgb)]
    }

    /// Parse the `r,g,b,gray` CSV form. An optional first line
    /// `bin_width=N` selects the binned form; blank lines and `#` comments
    /// are ignored. Missing entries are allowed here and rejected at
    /// conversion time.
    pub fn parse(text: &str) -> Result<Self, ColorError> {
        let mut table: Option<Self> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| ColorError::Table {
                line: line_no,
                reason,
            };
            if let Some(w) = line.strip_prefix("bin_width=") {
                if table.is_some() {
                    return Err(err("bin_width must precede all entries".into()));
                }
                let w: u16 = w
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("bad bin width {w:?}")))?;
                table = Some(Self::new(w).map_err(|_| err(format!("bad bin width {w}")))?);
                continue;
            }
            let t = match table.as_mut() {
                Some(t) => t,
                None => table.insert(Self::new(1)?),
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(err(format!("expected 4 fields, found {}", fields.len())));
            }
            let mut nums = [0u8; 4];
            for (n, f) in nums.iter_mut().zip(&fields) {
                *n = f
                    .parse()
                    .map_err(|_| err(format!("{f:?} is not an integer in 0..=255")))?;
            }
            t.insert([nums[0], nums[1], nums[2]], nums[3])
                .map_err(err)?;
        }
        match table {
            Some(t) => Ok(t),
            None => Self::new(1),
        }
    }
}

/// How RGB triples are mapped to a single gray value.
#[derive(Clone, Debug, PartialEq)]
pub enum ConversionMethod {
    /// Arithmetic mean of the three channels.
    Average,
    /// `0.21 R + 0.72 G + 0.07 B`.
    Luminosity,
    Weighted(Weights),
    Surjection(SurjectionTable),
}

impl ConversionMethod {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Average => "average",
            Self::Luminosity => "luminosity",
            Self::Weighted(_) => "weighted",
            Self::Surjection(_) => "surjection",
        }
    }
}

impl fmt::Display for ConversionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Weighted(w) => {
                let [r, g, b] = w.as_ratios();
                write!(f, "weighted({r},{g},{b})")
            }
            Self::Surjection(t) => write!(f, "surjection(bin_width={})", t.bin_width()),
            other => f.write_str(other.name()),
        }
    }
}

/// Gray value of one pixel under Average.
pub fn average(rgb: [u8; 3]) -> u8 {
    let s = u32::from(rgb[0]) + u32::from(rgb[1]) + u32::from(rgb[2]);
    ((2 * s + 3) / 6) as u8
}

/// Gray value of one pixel under Luminosity.
pub fn luminosity(rgb: [u8; 3]) -> u8 {
    Weights::luminosity().integer_form().apply(rgb)
}

pub fn to_gray(img: &RgbImage, method: &ConversionMethod) -> Result<GrayImage, ColorError> {
    to_gray_with(img, method, Execution::default())
}

pub fn to_gray_with(
    img: &RgbImage,
    method: &ConversionMethod,
    exec: Execution,
) -> Result<GrayImage, ColorError> {
    let px = img.pixels();
    let values = match method {
        ConversionMethod::Average => par::map_slice(exec, px, |&p| average(p)),
        ConversionMethod::Luminosity => {
            let w = Weights::luminosity().integer_form();
            par::map_slice(exec, px, |&p| w.apply(p))
        }
        ConversionMethod::Weighted(weights) => {
            let w = weights.integer_form();
            par::map_slice(exec, px, |&p| w.apply(p))
        }
        ConversionMethod::Surjection(table) => {
            if let Some(key) = table.first_missing() {
                return Err(ColorError::IncompleteSurjection(key));
            }
            par::map_slice(exec, px, |&p| table.lookup(p).unwrap_or_default())
        }
    };
    Ok(GrayImage::new(img.width(), img.height(), values).expect("dimensions preserved"))
}

/// Convert `img` once per method, preserving order.
pub fn compare_methods(
    img: &RgbImage,
    methods: &[ConversionMethod],
) -> Result<Vec<GrayImage>, ColorError> {
    if methods.is_empty() {
        return Err(ColorError::NoMethods);
    }
    methods.iter().map(|m| to_gray(img, m)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl FromStr for Rect {
    type Err = String;

    /// `x,y,w,h`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("bad rectangle {s:?}: {e}"))?;
        match v[..] {
            [x, y, w, h] => Ok(Self { x, y, w, h }),
            _ => Err(format!("rectangle {s:?} needs four fields x,y,w,h")),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PreprocessSpec {
    pub crop: Option<Rect>,
    pub background_colors: Vec<[u8; 3]>,
    /// Per-channel absolute tolerance for background matching.
    pub tolerance: u8,
    pub saturate: bool,
    pub contrast_stretch: bool,
}

/// Apply crop, background masking, saturation and contrast stretch, in
/// that order. Disabled steps are skipped.
pub fn preprocess(img: &RgbImage, spec: &PreprocessSpec) -> Result<RgbImage, ColorError> {
    let mut out = match spec.crop {
        Some(rect) => crop(img, rect)?,
        None => img.clone(),
    };
    if !spec.background_colors.is_empty() {
        mask_background(&mut out, &spec.background_colors, spec.tolerance);
    }
    if spec.saturate {
        for p in out.pixels_mut() {
            *p = saturate_pixel(*p);
        }
    }
    if spec.contrast_stretch {
        stretch_contrast(&mut out);
    }
    Ok(out)
}

pub fn crop(img: &RgbImage, r: Rect) -> Result<RgbImage, ColorError> {
    let fits = r.w > 0
        && r.h > 0
        && r.x.checked_add(r.w).is_some_and(|e| e <= img.width())
        && r.y.checked_add(r.h).is_some_and(|e| e <= img.height());
    if !fits {
        return Err(ColorError::Crop {
            x: r.x,
            y: r.y,
            w: r.w,
            h: r.h,
            width: img.width(),
            height: img.height(),
        });
    }
    Ok(RgbImage::from_fn(r.w, r.h, |x, y| img.get(r.x + x, r.y + y)).expect("nonempty crop"))
}

/// Set every pixel within `tolerance` (per channel) of a background color to black.
pub fn mask_background(img: &mut RgbImage, colors: &[[u8; 3]], tolerance: u8) {
    for p in img.pixels_mut() {
        let hit = colors
            .iter()
            .any(|c| (0..3).all(|i| p[i].abs_diff(c[i]) <= tolerance));
        if hit {
            *p = [0, 0, 0];
        }
    }
}

/// Push saturation to its maximum while keeping hue and value.
///
/// With S = 1 the smallest channel becomes 0, the largest keeps V and the
/// middle one is rescaled to `V * (mid - min) / (max - min)`. Achromatic
/// pixels have no hue and are returned unchanged.
pub fn saturate_pixel(p: [u8; 3]) -> [u8; 3] {
    let max = *p.iter().max().unwrap();
    let min = *p.iter().min().unwrap();
    if max == min {
        return p;
    }
    let span = u32::from(max - min);
    let v = u32::from(max);
    p.map(|c| {
        let n = v * u32::from(c - min);
        ((2 * n + span) / (2 * span)) as u8
    })
}

/// Per-channel linear stretch of the observed range onto `[0, 255]`.
pub fn stretch_contrast(img: &mut RgbImage) {
    for ch in 0..3 {
        let (lo, hi) = img.pixels().iter().fold((u8::MAX, u8::MIN), |(lo, hi), p| {
            (lo.min(p[ch]), hi.max(p[ch]))
        });
        if lo == hi {
            continue;
        }
        let span = u32::from(hi - lo);
        for p in img.pixels_mut() {
            let n = u32::from(p[ch] - lo) * 255;
            p[ch] = ((2 * n + span) / (2 * span)) as u8;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one(p: [u8; 3]) -> RgbImage {
        RgbImage::new(1, 1, vec![p]).unwrap()
    }

    fn gray_of(p: [u8; 3], m: &ConversionMethod) -> u8 {
        to_gray(&one(p), m).unwrap().values()[0]
    }

    #[test]
    fn formula_examples() {
        assert_eq!(gray_of([10, 20, 30], &ConversionMethod::Average), 20);
        assert_eq!(gray_of([0, 0, 255], &ConversionMethod::Average), 85);
        assert_eq!(gray_of([255, 0, 0], &ConversionMethod::Luminosity), 54);
        assert_eq!(gray_of([0, 255, 0], &ConversionMethod::Luminosity), 184);
        assert_eq!(gray_of([0, 255, 0], &ConversionMethod::Average), 85);
    }

    #[test]
    fn gray_pixels_are_fixed_points() {
        let methods = [
            ConversionMethod::Average,
            ConversionMethod::Luminosity,
            ConversionMethod::Weighted("0.5,0.25,0.25".parse().unwrap()),
        ];
        for v in 0..=255u8 {
            for m in &methods {
                assert_eq!(gray_of([v, v, v], m), v, "{m} at {v}");
            }
        }
    }

    #[test]
    fn weight_parsing() {
        let w: Weights = "1/2, 1/4, 0.25".parse().unwrap();
        assert_eq!(w.as_ratios()[0], Ratio::new(1, 2));
        assert!(matches!(
            "0.5,0.25,0.3".parse::<Weights>(),
            Err(ColorError::WeightSum(_))
        ));
        assert!(matches!(
            "0.5,0.5".parse::<Weights>(),
            Err(ColorError::BadWeights(_))
        ));
        assert!(matches!(
            "-0.5,1,0.5".parse::<Weights>(),
            Err(ColorError::BadWeights(_))
        ));
        assert!(".5,.5,0".parse::<Weights>().is_ok());
    }

    #[test]
    fn weighted_rounds_half_up() {
        // 0.5 * 1 = 0.5 -> 1
        let m = ConversionMethod::Weighted("0.5,0.5,0".parse().unwrap());
        assert_eq!(gray_of([1, 0, 0], &m), 1);
    }

    #[test]
    fn surjection_tables() {
        let text = "bin_width=128\n0,0,0,10\n0,0,128,20\n0,128,0,30\n0,128,128,40\n\
                    128,0,0,50\n128,0,128,60\n128,128,0,70\n128,128,128,80\n";
        let table = SurjectionTable::parse(text).unwrap();
        assert_eq!(table.first_missing(), None);
        let m = ConversionMethod::Surjection(table);
        assert_eq!(gray_of([200, 5, 130], &m), 60);

        let sparse = SurjectionTable::parse("bin_width=128\n0,0,0,10\n0,0,128,20\n").unwrap();
        let err = to_gray(&one([0, 0, 0]), &ConversionMethod::Surjection(sparse)).unwrap_err();
        assert_eq!(err, ColorError::IncompleteSurjection([0, 128, 0]));

        assert!(SurjectionTable::parse("bin_width=128\n3,0,0,1\n").is_err());
        assert!(SurjectionTable::parse("0,0,0,256\n").is_err());
        assert!(SurjectionTable::parse("0,0,0\n").is_err());
        assert!(SurjectionTable::parse("0,0,0,1\nbin_width=2\n").is_err());
    }

    #[test]
    fn compare_methods_preserves_order() {
        let img = RgbImage::new(2, 1, vec![[0, 255, 0], [9, 9, 9]]).unwrap();
        let out = compare_methods(
            &img,
            &[ConversionMethod::Average, ConversionMethod::Luminosity],
        )
        .unwrap();
        assert_eq!(out[0].values(), &[85, 9]);
        assert_eq!(out[1].values(), &[184, 9]);
        assert_eq!(compare_methods(&img, &[]), Err(ColorError::NoMethods));

        let gray = RgbImage::from_fn(3, 3, |x, y| [(x * 40 + y) as u8; 3]).unwrap();
        let out = compare_methods(
            &gray,
            &[ConversionMethod::Average, ConversionMethod::Luminosity],
        )
        .unwrap();
        assert_eq!(out[0], out[1]);
    }

    #[test]
    fn masking_corners() {
        let bg = [37, 37, 37];
        let img = RgbImage::from_fn(3, 3, |x, y| {
            if (x == 0 || x == 2) && (y == 0 || y == 2) {
                bg
            } else {
                [x as u8 * 10, y as u8 * 10, 200]
            }
        })
        .unwrap();
        let spec = PreprocessSpec {
            background_colors: vec![bg],
            ..Default::default()
        };
        let out = preprocess(&img, &spec).unwrap();
        for y in 0..3 {
            for x in 0..3 {
                let corner = (x == 0 || x == 2) && (y == 0 || y == 2);
                let want = if corner { [0, 0, 0] } else { img.get(x, y) };
                assert_eq!(out.get(x, y), want);
            }
        }
    }

    #[test]
    fn masking_tolerance() {
        let mut img = RgbImage::new(2, 1, vec![[40, 35, 37], [45, 37, 37]]).unwrap();
        mask_background(&mut img, &[[37, 37, 37]], 3);
        assert_eq!(img.pixels(), &[[0, 0, 0], [45, 37, 37]]);
    }

    #[test]
    fn saturation() {
        assert_eq!(saturate_pixel([200, 0, 0]), [200, 0, 0]);
        assert_eq!(saturate_pixel([100, 100, 100]), [100, 100, 100]);
        // hue 30 degrees at value 200: (200, 150, 100) -> (200, 100, 0)
        assert_eq!(saturate_pixel([200, 150, 100]), [200, 100, 0]);
    }

    #[test]
    fn contrast_stretch_single_channel() {
        let mut img = RgbImage::new(3, 1, vec![[50, 7, 0], [150, 7, 0], [100, 7, 0]]).unwrap();
        stretch_contrast(&mut img);
        let reds: Vec<u8> = img.pixels().iter().map(|p| p[0]).collect();
        assert_eq!(reds, vec![0, 255, 128]);
        // constant channels are untouched
        assert!(img.pixels().iter().all(|p| p[1] == 7 && p[2] == 0));
    }

    #[test]
    fn crop_bounds() {
        let img = RgbImage::from_fn(4, 3, |x, y| [x as u8, y as u8, 0]).unwrap();
        let r = Rect {
            x: 1,
            y: 1,
            w: 3,
            h: 2,
        };
        let c = crop(&img, r).unwrap();
        assert_eq!((c.width(), c.height()), (3, 2));
        assert_eq!(c.get(0, 0), [1, 1, 0]);
        assert_eq!(c.get(2, 1), [3, 2, 0]);
        assert!(matches!(
            crop(
                &img,
                Rect {
                    x: 2,
                    y: 0,
                    w: 3,
                    h: 1
                }
            ),
            Err(ColorError::Crop { .. })
        ));
        assert!(crop(
            &img,
            Rect {
                x: 0,
                y: 0,
                w: 0,
                h: 1
            }
        )
        .is_err());
        assert_eq!(
            "1,2,3,4".parse::<Rect>().unwrap(),
            Rect {
                x: 1,
                y: 2,
                w: 3,
                h: 4
            }
        );
        assert!("1,2,3".parse::<Rect>().is_err());
    }

    fn rgb_image() -> impl Strategy<Value = RgbImage> {
        (1usize..6, 1usize..6).prop_flat_map(|(w, h)| {
            prop::collection::vec(any::<[u8; 3]>(), w * h)
                .prop_map(move |v| RgbImage::new(w, h, v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn methods_are_monotone(a in any::<[u8; 3]>(), b in any::<[u8; 3]>(),
                                wr in 0u64..=10, wg in 0u64..=10) {
            prop_assume!(wr + wg <= 10);
            let lo = [a[0].min(b[0]), a[1].min(b[1]), a[2].min(b[2])];
            let hi = [a[0].max(b[0]), a[1].max(b[1]), a[2].max(b[2])];
            let w = Weights::new(Ratio::new(wr, 10), Ratio::new(wg, 10),
                                 Ratio::new(10 - wr - wg, 10)).unwrap();
            for m in [ConversionMethod::Average, ConversionMethod::Luminosity,
                      ConversionMethod::Weighted(w)] {
                prop_assert!(gray_of(lo, &m) <= gray_of(hi, &m));
            }
        }

        #[test]
        fn masking_is_idempotent(img in rgb_image(), c in any::<[u8; 3]>(), t in 0u8..40) {
            let mut once = img.clone();
            mask_background(&mut once, &[c], t);
            let mut twice = once.clone();
            mask_background(&mut twice, &[c], t);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn saturation_is_idempotent(p in any::<[u8; 3]>()) {
            let once = saturate_pixel(p);
            let twice = saturate_pixel(once);
            for i in 0..3 {
                prop_assert!(once[i].abs_diff(twice[i]) <= 1);
            }
            // value is preserved
            prop_assert_eq!(once.iter().max(), p.iter().max());
        }

        #[test]
        fn stretch_attains_extremes(img in rgb_image()) {
            let mut out = img.clone();
            stretch_contrast(&mut out);
            for ch in 0..3 {
                let constant = img.pixels().iter().all(|p| p[ch] == img.pixels()[0][ch]);
                let vals: Vec<u8> = out.pixels().iter().map(|p| p[ch]).collect();
                if !constant {
                    prop_assert_eq!(vals.iter().min(), Some(&0));
                    prop_assert_eq!(vals.iter().max(), Some(&255));
                }
            }
        }
    }
}
