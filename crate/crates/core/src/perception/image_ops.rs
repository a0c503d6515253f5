//! Binary mask helpers: labeling and morphology.

/// Row-major boolean mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn get(&self, u: usize, v: usize) -> bool {
        self.bits[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, on: bool) {
        self.bits[v * self.width + u] = on;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn and(&self, other: &Mask) -> Mask {
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect();
        Mask { width: self.width, height: self.height, bits }
    }

    /// Square-element erosion: a pixel survives if its whole `(2r+1)^2` window is set.
    pub fn erode(&self, r: usize) -> Mask {
        self.morph(r, true)
    }

    /// Square-element dilation.
    pub fn dilate(&self, r: usize) -> Mask {
        self.morph(r, false)
    }

    fn morph(&self, r: usize, erode: bool) -> Mask {
        // separable: rows then columns
        let (w, h) = (self.width, self.height);
        let pass = |src: &[bool], horizontal: bool| -> Vec<bool> {
            let mut out = vec![false; w * h];
            for v in 0..h {
                for u in 0..w {
                    let (c, len) = if horizontal { (u, w) } else { (v, h) };
                    let lo = c.saturating_sub(r);
                    let hi = (c + r).min(len - 1);
                    let touches_border = c < r || c + r > len - 1;
                    let mut acc = erode;
                    for k in lo..=hi {
                        let idx = if horizontal { v * w + k } else { k * w + u };
                        if erode {
                            acc &= src[idx];
                        } else {
                            acc |= src[idx];
                        }
                    }
                    // outside the image counts as unset
                    if erode && touches_border {
                        acc = false;
                    }
                    out[v * w + u] = acc;
                }
            }
            out
        };
        let rows = pass(&self.bits, true);
        Mask { width: w, height: h, bits: pass(&rows, false) }
    }
}

/// 4-connected components as pixel lists, in raster order of their first pixel.
pub fn components(mask: &Mask) -> Vec<Vec<(usize, usize)>> {
    let (w, h) = (mask.width, mask.height);
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.bits[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut comp = Vec::new();
        while let Some(idx) = stack.pop() {
            let (u, v) = (idx % w, idx / w);
            comp.push((u, v));
            let mut visit = |n: usize| {
                if mask.bits[n] && !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            };
            if u > 0 {
                visit(idx - 1);
            }
            if u + 1 < w {
                visit(idx + 1);
            }
            if v > 0 {
                visit(idx - w);
            }
            if v + 1 < h {
                visit(idx + w);
            }
        }
        out.push(comp);
    }
    out
}
