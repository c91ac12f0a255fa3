//! Airy values on an arithmetic progression of complex arguments.
//!
//! Anchors are evaluated with [`airy`](super::airy) roughly once per unit of
//! |u| and every other lattice point is reached by short Taylor steps from
//! its nearest anchor. Keeping the walk within half a unit bounds the growth
//! of the recessive-solution error by e^{√|u|}, which the guard digits absorb.

use super::airy::{airy_bits, taylor_step};
use super::{AiryValues, MpComplex, MpError, PrecisionContext};

#[derive(Clone, Debug)]
pub struct AiryLine {
    start: MpComplex,
    step: MpComplex,
    vals: Vec<AiryValues>,
    bits: u32,
}

impl AiryLine {
    /// Values at `start + n·step` for `n` in `0..count`.
    pub fn build(start: &MpComplex, step: &MpComplex, count: usize, ctx: &PrecisionContext) -> Result<Self, MpError> {
        let p = ctx.bits();
        let start = start.with_prec(p);
        let step = step.with_prec(p);
        let h = step.abs().to_f64();
        let guard = f64::from(ctx.guard_digits.max(4)) * std::f64::consts::LN_10;
        let mut vals: Vec<Option<AiryValues>> = vec![None; count];
        let mut lo = 0usize;
        while lo < count {
            let u_lo = point(&start, &step, lo);
            let r = u_lo.abs().to_f64().max(1.0);
            // half-span where e^{2√r·d} stays below e^{guard/2}
            let span = (0.25 * guard / r.sqrt()).clamp(0.05, 1.0);
            let k = if h > 0.0 { ((2.0 * span / h).floor() as usize).max(1) } else { count };
            let hi = (lo + k).min(count);
            let c = lo + (hi - lo) / 2;
            let uc = point(&start, &step, c);
            let vc = airy_bits(&uc.with_prec(p + 16), p + 16)?.with_prec(p);
            let mut prev = vc.clone();
            let mut u_prev = uc.clone();
            for (n, slot) in vals.iter_mut().enumerate().take(hi).skip(c + 1) {
                let un = point(&start, &step, n);
                prev = taylor_step(&u_prev, &prev, &step, p);
                u_prev = un;
                *slot = Some(prev.clone());
            }
            let back = -&step;
            let mut prev = vc.clone();
            let mut u_prev = uc.clone();
            for n in (lo..c).rev() {
                prev = taylor_step(&u_prev, &prev, &back, p);
                u_prev = point(&start, &step, n);
                vals[n] = Some(prev.clone());
            }
            vals[c] = Some(vc);
            lo = hi;
        }
        let vals = vals.into_iter().map(|v| v.expect("every lattice point filled")).collect();
        Ok(AiryLine { start, step, vals, bits: p })
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn get(&self, n: usize) -> &AiryValues {
        &self.vals[n]
    }

    pub fn point(&self, n: usize) -> MpComplex {
        point(&self.start, &self.step, n)
    }

    /// Values at an arbitrary `u`, stepped from the nearest lattice point.
    pub fn eval(&self, u: &MpComplex) -> AiryValues {
        let d = u - &self.start;
        let (dr, di) = d.to_f64_pair();
        let (sr, si) = self.step.to_f64_pair();
        let t = (dr * sr + di * si) / (sr * sr + si * si);
        let n = t.round().clamp(0.0, (self.vals.len() - 1) as f64) as usize;
        let un = self.point(n);
        let h = u - &un;
        taylor_step(&un, &self.vals[n], &h, self.bits)
    }
}

fn point(start: &MpComplex, step: &MpComplex, n: usize) -> MpComplex {
    let nf = rug::Float::with_val(step.prec(), n as u64);
    start + &step.scale(&nf)
}
