//! Axis-aligned boxes in `[x, y, w, h]` pixel form and their overlap.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Box with top-left corner `(x, y)` and size `w` x `h`.
///
/// Serialized as the four-element array `[x, y, w, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[S; 4]", into = "[S; 4]")]
#[serde(bound = "S: Scalar")]
pub struct BBox<S = f64> {
    pub x: S,
    pub y: S,
    pub w: S,
    pub h: S,
}

impl<S: Scalar> From<[S; 4]> for BBox<S> {
    fn from([x, y, w, h]: [S; 4]) -> Self {
        Self { x, y, w, h }
    }
}

impl<S: Scalar> From<BBox<S>> for [S; 4] {
    fn from(b: BBox<S>) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

/// Outcome of fitting a box inside an image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Clamp<S> {
    Inside(BBox<S>),
    Clamped(BBox<S>),
    /// Nothing of positive area is left inside the image.
    Empty,
}

impl<S: Scalar> BBox<S> {
    pub fn new(x: S, y: S, w: S, h: S) -> Self {
        Self { x, y, w, h }
    }

    pub fn right(&self) -> S {
        self.x + self.w
    }

    pub fn bottom(&self) -> S {
        self.y + self.h
    }

    pub fn area(&self) -> S {
        self.w * self.h
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.w.is_finite() && self.h.is_finite()
    }

    /// `w > 0`, `h > 0`, `x >= 0`, `y >= 0` and `x + w <= width`, `y + h <= height`.
    pub fn fits(&self, width: S, height: S) -> bool {
        self.is_finite()
            && self.w > S::zero()
            && self.h > S::zero()
            && self.x >= S::zero()
            && self.y >= S::zero()
            && self.right() <= width
            && self.bottom() <= height
    }

    pub fn scaled(&self, factor: S) -> Self {
        Self::new(self.x * factor, self.y * factor, self.w * factor, self.h * factor)
    }

    /// Intersects the box with `[0, width] x [0, height]`.
    ///
    /// The clamped box always satisfies [`BBox::fits`], so clamping a clamped
    /// box reports [`Clamp::Inside`].
    pub fn clamp_to(&self, width: S, height: S) -> Clamp<S> {
        if self.fits(width, height) {
            return Clamp::Inside(*self);
        }
        let Some((x, w)) = clamp_span(self.x, self.w, width) else {
            return Clamp::Empty;
        };
        let Some((y, h)) = clamp_span(self.y, self.h, height) else {
            return Clamp::Empty;
        };
        Clamp::Clamped(Self::new(x, y, w, h))
    }
}

fn clamp_span<S: Scalar>(start: S, len: S, limit: S) -> Option<(S, S)> {
    let lo = start.max(S::zero());
    let hi = (start + len).min(limit);
    let mut len = hi - lo;
    // lo + (hi - lo) can round above hi
    let mut guard = 0;
    while len > S::zero() && lo + len > limit && guard < 64 {
        len -= S::epsilon() * limit.max(S::one());
        guard += 1;
    }
    (len > S::zero() && lo + len <= limit).then_some((lo, len))
}

/// Intersection over union; 0 for disjoint boxes or a degenerate union.
pub fn iou<S: Scalar>(a: &BBox<S>, b: &BBox<S>) -> S {
    let left = a.x.max(b.x);
    let top = a.y.max(b.y);
    let right = a.right().min(b.right());
    let bottom = a.bottom().min(b.bottom());
    if right <= left || bottom <= top {
        return S::zero();
    }
    let inter = (right - left) * (bottom - top);
    let union = a.area() + b.area() - inter;
    if union <= S::zero() {
        return S::zero();
    }
    (inter / union).min(S::one())
}
