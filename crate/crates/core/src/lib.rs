//! Persistent homology of grayscale and RGB images, computed on a
//! discrete-Morse-reduced cubical complex.
//!
//! The usual path is [`image_io`] to load, [`color`] to reduce RGB to
//! gray, then [`analyze`] for the persistence diagram, which [`export`]
//! writes out and [`predict`] consumes across dated snapshots.

pub mod color;
pub mod cubical;
pub mod export;
pub mod image_io;
pub mod morse;
pub mod par;
pub mod persistence;
pub mod predict;

pub use cubical::{build_complex, Cell, CubicalComplex};
pub use image_io::{GrayImage, RgbImage};
pub use morse::{build_gradient, build_morse_complex, GradientField, MorseComplex, MorseError};
pub use par::Execution;
pub use persistence::{compute_persistence, Death, PersistenceDiagram, PersistencePair};

/// Full route from a grayscale image to its persistence diagram.
///
/// With `invert` the superlevel filtration is used (`255 - v`). Zero-length
/// pairs are kept; callers filter as needed.
pub fn analyze(
    img: &GrayImage,
    invert: bool,
    exec: Execution,
) -> Result<PersistenceDiagram, MorseError> {
    let inverted;
    let img = if invert {
        inverted = img.inverted();
        &inverted
    } else {
        img
    };
    let k = build_complex(img);
    let g = morse::build_gradient_with(&k, morse::TieBreak::default(), exec);
    let m = morse::build_morse_complex_with(&g, &k, exec)?;
    Ok(compute_persistence(&m))
}
