//! Direct two-dimensional multi-band blend in `f64`.
//!
//! REDUCE and EXPAND are written as full 5×5 weighted sums over the binomial
//! kernel `w = [1, 4, 6, 4, 1] / 16` rather than as separable passes:
//!
//! - `REDUCE(g)(i, j) = Σ_{m,n} w(m) w(n) g(clamp(2i + m), clamp(2j + n))`
//! - `EXPAND(g)(i, j) = 4 Σ_{m,n} w(m) w(n) g(clamp((i − m) / 2), clamp((j − n) / 2))`,
//!   summed only where both halves are integers.

use ned_core::geometry::Raster;

const W: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

#[derive(Clone)]
struct Plane {
    w: usize,
    h: usize,
    v: Vec<f64>,
}

impl Plane {
    fn at(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.w as isize - 1) as usize;
        let y = y.clamp(0, self.h as isize - 1) as usize;
        self.v[y * self.w + x]
    }
}

fn reduce(g: &Plane) -> Plane {
    let (w, h) = (g.w.div_ceil(2), g.h.div_ceil(2));
    let mut v = vec![0.0; w * h];
    for j in 0..h {
        for i in 0..w {
            let mut acc = 0.0;
            for (n, wn) in W.iter().enumerate() {
                for (m, wm) in W.iter().enumerate() {
                    acc += wm * wn * g.at(2 * i as isize + m as isize - 2, 2 * j as isize + n as isize - 2);
                }
            }
            v[j * w + i] = acc;
        }
    }
    Plane { w, h, v }
}

fn expand(g: &Plane, w: usize, h: usize) -> Plane {
    let mut v = vec![0.0; w * h];
    for j in 0..h {
        for i in 0..w {
            let mut acc = 0.0;
            for (n, wn) in W.iter().enumerate() {
                let fy = j as isize - (n as isize - 2);
                if fy.rem_euclid(2) != 0 {
                    continue;
                }
                for (m, wm) in W.iter().enumerate() {
                    let fx = i as isize - (m as isize - 2);
                    if fx.rem_euclid(2) != 0 {
                        continue;
                    }
                    acc += 4.0 * wm * wn * g.at(fx.div_euclid(2), fy.div_euclid(2));
                }
            }
            v[j * w + i] = acc;
        }
    }
    Plane { w, h, v }
}

fn gaussian(p: Plane, levels: usize) -> Vec<Plane> {
    let mut g = vec![p];
    while g.len() < levels {
        let next = reduce(g.last().unwrap());
        g.push(next);
    }
    g
}

fn laplacian(p: Plane, levels: usize) -> Vec<Plane> {
    let g = gaussian(p, levels);
    let mut l: Vec<Plane> = g
        .windows(2)
        .map(|pair| {
            let up = expand(&pair[1], pair[0].w, pair[0].h);
            Plane {
                v: pair[0].v.iter().zip(&up.v).map(|(a, b)| a - b).collect(),
                ..pair[0].clone()
            }
        })
        .collect();
    l.push(g.last().unwrap().clone());
    l
}

fn channel(r: &Raster, c: usize) -> Plane {
    Plane {
        w: r.width(),
        h: r.height(),
        v: (0..r.height())
            .flat_map(|y| (0..r.width()).map(move |x| (x, y)))
            .map(|(x, y)| r.get(x, y, c) as f64)
            .collect(),
    }
}

/// Reference multi-band blend of `fg` over `bg` under a one-channel `mask`.
pub fn reference_blend(fg: &Raster, bg: &Raster, mask: &Raster, levels: usize) -> Raster {
    let gm = gaussian(channel(mask, 0), levels);
    let (w, h, ch) = (fg.width(), fg.height(), fg.channels());
    let mut out = vec![0.0f32; w * h * ch];
    for c in 0..ch {
        let lf = laplacian(channel(fg, c), levels);
        let lb = laplacian(channel(bg, c), levels);
        let mut acc: Option<Plane> = None;
        for k in (0..levels).rev() {
            let band = Plane {
                v: (0..lf[k].v.len())
                    .map(|i| gm[k].v[i] * lf[k].v[i] + (1.0 - gm[k].v[i]) * lb[k].v[i])
                    .collect(),
                ..lf[k].clone()
            };
            acc = Some(match acc {
                None => band,
                Some(coarse) => {
                    let up = expand(&coarse, band.w, band.h);
                    Plane {
                        v: band.v.iter().zip(&up.v).map(|(a, b)| a + b).collect(),
                        ..band
                    }
                }
            });
        }
        let acc = acc.unwrap();
        for (i, v) in acc.v.iter().enumerate() {
            out[i * ch + c] = v.clamp(0.0, 1.0) as f32;
        }
    }
    Raster::new(w, h, ch, out).unwrap()
}
