use super::PlumeMask;

/// Keeps only the 8-connected plume component attached to the stack.
///
/// That is the component containing `stack_px` when it is a plume pixel,
/// otherwise the component holding the plume pixel nearest to it (ties go
/// to the first pixel in raster order). An empty mask comes back empty.
/// A stack pixel outside the raster is clamped to the nearest edge pixel.
pub fn attached_component(mask: &PlumeMask, stack_px: (u32, u32)) -> PlumeMask {
    let (w, h) = (mask.width(), mask.height());
    if w == 0 || h == 0 {
        return mask.clone();
    }
    let sc = stack_px.0.min(w - 1);
    let sr = stack_px.1.min(h - 1);
    let seed = if mask.get(sc, sr) {
        Some((sc, sr))
    } else {
        nearest_plume_pixel(mask, (sc, sr))
    };
    let mut out = mask.cleared();
    let Some(seed) = seed else {
        return out;
    };

    let mut stack = vec![seed];
    out.set(seed.0, seed.1, true);
    while let Some((c, r)) = stack.pop() {
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                let (nc, nr) = (i64::from(c) + dc, i64::from(r) + dr);
                if nc < 0 || nr < 0 || nc >= i64::from(w) || nr >= i64::from(h) {
                    continue;
                }
                let (nc, nr) = (nc as u32, nr as u32);
                if mask.get(nc, nr) && !out.get(nc, nr) {
                    out.set(nc, nr, true);
                    stack.push((nc, nr));
                }
            }
        }
    }
    out
}

fn nearest_plume_pixel(mask: &PlumeMask, (sc, sr): (u32, u32)) -> Option<(u32, u32)> {
    let w = mask.width() as usize;
    mask.pixels()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p)
        .map(|(i, _)| {
            let (c, r) = ((i % w) as i64, (i / w) as i64);
            let d2 = (c - i64::from(sc)).pow(2) + (r - i64::from(sr)).pow(2);
            (d2, i)
        })
        .min()
        .map(|(_, i)| ((i % w) as u32, (i / w) as u32))
}
