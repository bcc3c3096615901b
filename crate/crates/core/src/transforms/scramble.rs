use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::rng::permutation;
use crate::scalar::Real;

/// Tile permutation used by [`tile_scramble`]: output tile `i` is source tile `perm[i]`.
pub fn scramble_permutation(tiles: usize, seed: u64) -> Vec<usize> {
    permutation(tiles, seed)
}

/// Crop to whole tiles, then relocate the `tile x tile` blocks by a seeded Fisher-Yates permutation.
///
/// The bottom/right remainder that does not fill a whole tile is discarded.
pub fn tile_scramble<T: Real>(img: &ImageTensor<T>, tile: usize, seed: u64) -> Result<ImageTensor<T>> {
    if tile == 0 {
        return Err(Error::param("tile", "tile size must be at least 1"));
    }
    let (h, w, c) = img.shape();
    if tile > h || tile > w {
        return Err(Error::Degenerate(format!("tile {tile} does not fit in a {h}x{w} image")));
    }
    let (rows, cols) = (h / tile, w / tile);
    let (oh, ow) = (rows * tile, cols * tile);
    let perm = scramble_permutation(rows * cols, seed);
    let src = img.data();
    let mut data = vec![T::zero(); oh * ow * c];
    let run = tile * c;
    for (dst_tile, &src_tile) in perm.iter().enumerate() {
        let (dy, dx) = (dst_tile / cols * tile, dst_tile % cols * tile);
        let (sy, sx) = (src_tile / cols * tile, src_tile % cols * tile);
        for r in 0..tile {
            let s = ((sy + r) * w + sx) * c;
            let d = ((dy + r) * ow + dx) * c;
            data[d..d + run].copy_from_slice(&src[s..s + run]);
        }
    }
    ImageTensor::new(oh, ow, c, data)
}
