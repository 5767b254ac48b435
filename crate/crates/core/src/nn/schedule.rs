/// Triangular cyclic learning rate: rises linearly from `lr_min` to `lr_max`
/// over `half_cycle` steps, falls back over the next `half_cycle`, repeats.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CyclicLr {
    pub lr_min: f64,
    pub lr_max: f64,
    pub half_cycle: usize,
}

pub const LR_MIN: f64 = 9e-5;
pub const LR_MAX: f64 = 1.5e-3;

impl CyclicLr {
    pub fn new(lr_min: f64, lr_max: f64, half_cycle: usize) -> Self {
        Self {
            lr_min,
            lr_max,
            half_cycle: half_cycle.max(1),
        }
    }

    pub fn lr(&self, step: usize) -> f64 {
        let h = self.half_cycle;
        let pos = step % (2 * h);
        let rise = if pos <= h { pos } else { 2 * h - pos };
        if rise == 0 {
            return self.lr_min;
        }
        if rise == h {
            return self.lr_max;
        }
        self.lr_min + (self.lr_max - self.lr_min) * rise as f64 / h as f64
    }
}

impl Default for CyclicLr {
    fn default() -> Self {
        Self::new(LR_MIN, LR_MAX, 250)
    }
}
