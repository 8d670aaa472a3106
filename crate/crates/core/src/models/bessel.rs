//! Integer-order Bessel functions of the first kind by Miller's backward
//! recurrence, normalized with `J_0 + 2 sum_k J_2k = 1`.

/// `J_0(x), ..., J_max_order(x)`.
pub fn bessel_j_orders(x: f64, max_order: usize) -> Vec<f64> {
    let mut out = vec![0.0; max_order + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let scale = (max_order as f64).max(ax);
    let mut start = (scale + 30.0 + (40.0 * scale).sqrt()) as usize;
    start += start % 2;

    let mut next = 0.0; // J_{k+1}
    let mut current = 1e-300; // J_k
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        if k <= max_order {
            out[k] = current;
        }
        if k % 2 == 0 {
            norm += 2.0 * current;
        }
        let prev = 2.0 * k as f64 / ax * current - next;
        next = current;
        current = prev;
        if current.abs() > 1e250 {
            let s = 1e-250;
            current *= s;
            next *= s;
            norm *= s;
            out.iter_mut().for_each(|v| *v *= s);
        }
    }
    out[0] = current;
    norm += current;
    out.iter_mut().for_each(|v| *v /= norm);
    if x < 0.0 {
        for (k, v) in out.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

/// `J_nu(x)` for `nu` in `-max_order..=max_order`, index `nu + max_order`.
pub fn bessel_j_signed(x: f64, max_order: usize) -> Vec<f64> {
    let pos = bessel_j_orders(x, max_order);
    (0..=2 * max_order)
        .map(|i| {
            let nu = i as i64 - max_order as i64;
            let v = pos[nu.unsigned_abs() as usize];
            if nu < 0 && nu % 2 != 0 {
                -v
            } else {
                v
            }
        })
        .collect()
}
