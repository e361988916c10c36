use crate::error::{Error, Result};

fn rotate(side: u32, x: &mut u32, y: &mut u32, rx: u32, ry: u32) {
    if ry == 0 {
        if rx == 1 {
            *x = side - 1 - *x;
            *y = side - 1 - *y;
        }
        std::mem::swap(x, y);
    }
}

/// Position of `(x, y)` along the Hilbert curve filling a
/// `2^order x 2^order` grid.
pub fn hilbert_index(x: u32, y: u32, order: u32) -> Result<u64> {
    if order > 16 {
        return Err(Error::InvalidParameter(format!("Hilbert order {order} > 16")));
    }
    let side = 1u32 << order;
    if x >= side || y >= side {
        return Err(Error::HilbertOutOfGrid { x, y, side });
    }
    let (mut x, mut y) = (x, y);
    let mut d = 0u64;
    let mut s = side / 2;
    while s > 0 {
        let rx = u32::from(x & s > 0);
        let ry = u32::from(y & s > 0);
        d += u64::from(s) * u64::from(s) * u64::from((3 * rx) ^ ry);
        rotate(side, &mut x, &mut y, rx, ry);
        s /= 2;
    }
    Ok(d)
}

/// Inverse of [`hilbert_index`].
pub fn hilbert_point(d: u64, order: u32) -> (u32, u32) {
    let side = 1u64 << order;
    let (mut x, mut y) = (0u32, 0u32);
    let mut t = d;
    let mut s = 1u64;
    while s < side {
        let rx = (1 & (t / 2)) as u32;
        let ry = (1 & (t ^ u64::from(rx))) as u32;
        rotate(s as u32, &mut x, &mut y, rx, ry);
        x += s as u32 * rx;
        y += s as u32 * ry;
        t /= 4;
        s *= 2;
    }
    (x, y)
}

/// Smallest order whose grid covers `extent` cells per side.
pub fn order_for_extent(extent: u32) -> u32 {
    let mut order = 0;
    while (1u64 << order) < u64::from(extent) {
        order += 1;
    }
    order
}
