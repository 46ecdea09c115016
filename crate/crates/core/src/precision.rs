//! Simulated reduced-precision arithmetic.
//!
//! Every simulated value is carried in an `f64` that is exactly representable
//! in the target [`FpFormat`]. An arithmetic operation is evaluated once in
//! `f64` and the result is rounded into the format (round to nearest, ties to
//! even). No fused multiply-add is used anywhere: each multiply and each
//! subtract rounds on its own.
//!
//! # Why one `f64` evaluation followed by a rounding is exact
//!
//! For `+ - * / sqrt` on operands with `p` significand bits, rounding the
//! correctly rounded `f64` result to `p` bits gives the same answer as
//! rounding the exact result directly whenever `53 >= 2p + 2`. This covers
//! fp16 (`p = 11`), bfloat16 (`p = 8`) and fp32 (`p = 24`). The argument
//! carries over to the subnormal range because the subnormal grid of the
//! target is coarser still. For the fp64 format the rounding step is the
//! identity. Custom formats with `25 <= p < 53` are accepted but the
//! simulation is then only faithful up to a possible double rounding.
//!
//! Overflow is never materialised as an infinity. [`round_to`] reports it
//! through [`RoundFlags::overflow`] and withholds the value.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::FormatError;

/// A binary floating-point format with IEEE-style biased exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FpFormat {
    significand_bits: u32,
    exponent_bits: u32,
    subnormals: bool,
}

impl FpFormat {
    /// IEEE binary16.
    pub const FP16: FpFormat = FpFormat {
        significand_bits: 11,
        exponent_bits: 5,
        subnormals: true,
    };
    /// bfloat16; subnormals are not supported.
    pub const BF16: FpFormat = FpFormat {
        significand_bits: 8,
        exponent_bits: 8,
        subnormals: false,
    };
    /// IEEE binary32.
    pub const FP32: FpFormat = FpFormat {
        significand_bits: 24,
        exponent_bits: 8,
        subnormals: true,
    };
    /// IEEE binary64, the carrier format itself.
    pub const FP64: FpFormat = FpFormat {
        significand_bits: 53,
        exponent_bits: 11,
        subnormals: true,
    };

    /// Builds a custom format. `significand_bits` counts the implicit bit.
    pub fn new(
        significand_bits: u32,
        exponent_bits: u32,
        subnormals: bool,
    ) -> Result<Self, FormatError> {
        if !(2..=53).contains(&significand_bits) {
            return Err(FormatError::SignificandBits(significand_bits));
        }
        if !(2..=11).contains(&exponent_bits) {
            return Err(FormatError::ExponentBits(exponent_bits));
        }
        Ok(FpFormat {
            significand_bits,
            exponent_bits,
            subnormals,
        })
    }

    pub fn significand_bits(&self) -> u32 {
        self.significand_bits
    }

    pub fn exponent_bits(&self) -> u32 {
        self.exponent_bits
    }

    pub fn supports_subnormals(&self) -> bool {
        self.subnormals
    }

    /// Largest unbiased exponent of a finite number.
    pub fn emax(&self) -> i32 {
        (1i32 << (self.exponent_bits - 1)) - 1
    }

    /// Smallest unbiased exponent of a normalized number.
    pub fn emin(&self) -> i32 {
        1 - self.emax()
    }

    /// Unit roundoff `2^-p`.
    pub fn unit_roundoff(&self) -> f64 {
        exp2i(-(self.significand_bits as i32))
    }

    /// Smallest positive normalized number.
    pub fn x_min(&self) -> f64 {
        exp2i(self.emin())
    }

    /// Smallest positive subnormal, if the format has subnormals.
    pub fn x_s_min(&self) -> Option<f64> {
        self.subnormals
            .then(|| exp2i(self.emin() - self.significand_bits as i32 + 1))
    }

    /// Largest finite number `2^emax (2 - 2^(1-p))`.
    pub fn x_max(&self) -> f64 {
        let p = self.significand_bits as i32;
        // (2^p - 1) * 2^(emax - p + 1), both factors exact in f64
        let mantissa = (1u64 << p) as f64 - 1.0;
        mantissa * exp2i(self.emax() - p + 1)
    }

    /// Whether rounding into this format is the identity on finite `f64`.
    pub fn is_carrier(&self) -> bool {
        self.significand_bits == 53 && self.exponent_bits == 11 && self.subnormals
    }

    /// Half-precision formats get the overflow guards during factorization.
    pub fn is_half(&self) -> bool {
        self.significand_bits + self.exponent_bits <= 16
    }

    /// Short name for the built-in formats, or a `p<sig>e<exp>` tag otherwise.
    pub fn name(&self) -> String {
        match *self {
            FpFormat::FP16 => "fp16".into(),
            FpFormat::BF16 => "bf16".into(),
            FpFormat::FP32 => "fp32".into(),
            FpFormat::FP64 => "fp64".into(),
            f => format!(
                "p{}e{}{}",
                f.significand_bits,
                f.exponent_bits,
                if f.subnormals { "" } else { "n" }
            ),
        }
    }
}

impl fmt::Display for FpFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for FpFormat {
    type Err = FormatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fp16" | "half" | "binary16" => Ok(FpFormat::FP16),
            "bf16" | "bfloat16" => Ok(FpFormat::BF16),
            "fp32" | "single" | "binary32" => Ok(FpFormat::FP32),
            "fp64" | "double" | "binary64" => Ok(FpFormat::FP64),
            _ => Err(FormatError::UnknownName(s.to_string())),
        }
    }
}

/// `2^k` for any `k` in the `f64` range including subnormals.
pub(crate) fn exp2i(k: i32) -> f64 {
    if k >= -1022 {
        assert!(k <= 1023, "exponent {k} out of f64 range");
        f64::from_bits(((k + 1023) as u64) << 52)
    } else {
        assert!(k >= -1074, "exponent {k} below f64 subnormal range");
        f64::from_bits(1u64 << (k + 1074))
    }
}

/// `floor(log2(a))` for finite positive `a`, subnormals included.
fn ilog2(a: f64) -> i32 {
    let bits = a.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    if biased == 0 {
        let mantissa = bits & ((1u64 << 52) - 1);
        -1074 + (63 - mantissa.leading_zeros() as i32)
    } else {
        biased - 1023
    }
}

/// Side conditions raised by a rounding.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RoundFlags {
    pub overflow: bool,
    pub underflow_to_zero: bool,
    pub became_subnormal: bool,
}

/// Result of rounding a value into a format.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundOutcome {
    value: f64,
    pub flags: RoundFlags,
}

impl RoundOutcome {
    /// The rounded value, or `None` on overflow.
    pub fn value(&self) -> Option<f64> {
        (!self.flags.overflow).then_some(self.value)
    }

    pub fn is_overflow(&self) -> bool {
        self.flags.overflow
    }
}

/// Rounds `x` to nearest, ties to even, into `f`.
///
/// Non-finite input (only reachable through the fp64 format, where the `f64`
/// operation itself overflowed) is reported as overflow.
pub fn round_to(x: f64, f: FpFormat) -> RoundOutcome {
    debug_assert!(!x.is_nan(), "round_to called on NaN");
    let mut flags = RoundFlags::default();
    if !x.is_finite() {
        flags.overflow = true;
        return RoundOutcome { value: 0.0, flags };
    }
    if x == 0.0 {
        return RoundOutcome { value: x, flags };
    }
    let x_min = f.x_min();
    if f.is_carrier() {
        flags.became_subnormal = x.abs() < x_min;
        return RoundOutcome { value: x, flags };
    }

    let a = x.abs();
    let p = f.significand_bits as i32;
    let emin = f.emin();
    let rounded = if !f.subnormals && a < x_min {
        // 0 and x_min are the two neighbours; the midpoint goes to 0 (even).
        if a > 0.5 * x_min {
            x_min
        } else {
            0.0
        }
    } else {
        let e = ilog2(a).max(emin);
        let quantum = exp2i(e - (p - 1));
        (a / quantum).round_ties_even() * quantum
    };

    if rounded > f.x_max() {
        flags.overflow = true;
        return RoundOutcome {
            value: rounded.copysign(x),
            flags,
        };
    }
    if rounded == 0.0 {
        flags.underflow_to_zero = true;
    } else if rounded < x_min {
        flags.became_subnormal = true;
    }
    RoundOutcome {
        value: rounded.copysign(x),
        flags,
    }
}

/// Whether `x` is exactly representable (and finite) in `f`.
pub fn is_representable(x: f64, f: FpFormat) -> bool {
    let r = round_to(x, f);
    !r.is_overflow() && r.value == x
}

/// Arithmetic operations available to [`sim_op`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Sqrt,
}

/// Evaluates `op` on representable operands and rounds the result into `f`.
///
/// `Sqrt` ignores `y`.
pub fn sim_op(op: Op, x: f64, y: f64, f: FpFormat) -> RoundOutcome {
    debug_assert!(is_representable(x, f), "{x} not representable in {f}");
    let exact = match op {
        Op::Add => x + y,
        Op::Sub => x - y,
        Op::Mul => x * y,
        Op::Div => x / y,
        Op::Sqrt => {
            debug_assert!(x >= 0.0, "sqrt of negative operand {x}");
            x.sqrt()
        }
    };
    round_to(exact, f)
}

/// Overflow of a simulated operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Overflow;

/// Convenience wrappers returning `Err(Overflow)` instead of flags.
pub(crate) fn add(x: f64, y: f64, f: FpFormat) -> Result<f64, Overflow> {
    sim_op(Op::Add, x, y, f).value().ok_or(Overflow)
}

pub(crate) fn sub(x: f64, y: f64, f: FpFormat) -> Result<f64, Overflow> {
    sim_op(Op::Sub, x, y, f).value().ok_or(Overflow)
}

pub(crate) fn mul(x: f64, y: f64, f: FpFormat) -> Result<f64, Overflow> {
    sim_op(Op::Mul, x, y, f).value().ok_or(Overflow)
}

pub(crate) fn div(x: f64, y: f64, f: FpFormat) -> Result<f64, Overflow> {
    sim_op(Op::Div, x, y, f).value().ok_or(Overflow)
}

pub(crate) fn sqrt(x: f64, f: FpFormat) -> Result<f64, Overflow> {
    sim_op(Op::Sqrt, x, 0.0, f).value().ok_or(Overflow)
}

/// True when dividing any entry of magnitude at most `a` by the pivot `d`
/// cannot overflow `f`.
///
/// `a / x_max` is evaluated in `f64`, where it cannot overflow.
pub fn safe_scale_check(d: f64, a: f64, f: FpFormat) -> bool {
    d >= 1.0 || d >= a / f.x_max()
}

/// Overflow detected by [`safe_update`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UnsafeUpdate;

/// Computes `a - b*c` in `f`, or reports that the update could overflow.
///
/// The product is formed only when `|b| <= 1`, `|c| <= 1` or
/// `|b| <= x_max/|c|`. The subtraction is admitted only when the exact
/// difference `a - b*c` lies in `[-x_max, x_max]`; the tests are evaluated in
/// `f64`, where `x_max -/+ a` and `b*c` are exact for formats with at most
/// 26 significand bits. A final rounding that would still overflow (a tie at
/// `x_max + ulp/2` after the product was rounded up) is also reported.
pub fn safe_update(a: f64, b: f64, c: f64, f: FpFormat) -> Result<f64, UnsafeUpdate> {
    let x_max = f.x_max();
    let (ab, ac) = (b.abs(), c.abs());
    if !(ab <= 1.0 || ac <= 1.0 || ab <= x_max / ac) {
        return Err(UnsafeUpdate);
    }
    let w = mul(b, c, f).map_err(|_| UnsafeUpdate)?;
    let exact = b * c;
    let admissible = if a >= 0.0 {
        exact >= 0.0 || x_max - a >= -exact
    } else {
        exact < 0.0 || x_max + a >= exact
    };
    if !admissible {
        return Err(UnsafeUpdate);
    }
    sub(a, w, f).map_err(|_| UnsafeUpdate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_constants() {
        let f = FpFormat::FP16;
        assert_eq!(f.x_max(), 65504.0);
        assert_eq!(f.x_min(), 2f64.powi(-14));
        assert_eq!(f.x_s_min(), Some(2f64.powi(-24)));
        assert_eq!(f.unit_roundoff(), 2f64.powi(-11));
        assert_eq!(FpFormat::FP32.x_max(), f32::MAX as f64);
        assert_eq!(FpFormat::FP32.x_s_min(), Some(f32::from_bits(1) as f64));
        assert_eq!(FpFormat::FP64.x_max(), f64::MAX);
        assert_eq!(FpFormat::FP64.x_min(), f64::MIN_POSITIVE);
        assert_eq!(FpFormat::FP64.x_s_min(), Some(f64::from_bits(1)));
        assert_eq!(FpFormat::BF16.x_s_min(), None);
    }

    #[test]
    fn names_round_trip() {
        for f in [FpFormat::FP16, FpFormat::BF16, FpFormat::FP32, FpFormat::FP64] {
            assert_eq!(f.name().parse::<FpFormat>().unwrap(), f);
        }
        assert!("fp8".parse::<FpFormat>().is_err());
        assert!(FpFormat::new(60, 5, true).is_err());
        assert!(FpFormat::new(11, 12, true).is_err());
    }

    #[test]
    fn round_examples() {
        let f = FpFormat::FP16;
        let r = round_to(1.0, f);
        assert_eq!(r.value(), Some(1.0));
        assert_eq!(r.flags, RoundFlags::default());

        assert!(round_to(65520.0, f).is_overflow());
        assert_eq!(round_to(65519.9, f).value(), Some(65504.0));

        // 6.10e-5 sits just below x_min: nearest is the largest subnormal
        let near = round_to(6.10e-5, f).value().unwrap();
        assert_eq!(near, f.x_min() - f.x_s_min().unwrap());
        assert!((near - f.x_min()).abs() / f.x_min() < 1e-3);
        assert_eq!(round_to(6.104e-5, f).value(), Some(f.x_min()));

        let r = round_to(2.0e-8, f);
        assert_eq!(r.value(), Some(0.0));
        assert!(r.flags.underflow_to_zero);

        // exactly half of the smallest subnormal ties to zero
        assert_eq!(round_to(2f64.powi(-25), f).value(), Some(0.0));
        let r = round_to(2f64.powi(-25) * 1.0001, f);
        assert_eq!(r.value(), Some(2f64.powi(-24)));
        assert!(r.flags.became_subnormal);
        assert_eq!(round_to(-3.0, f).value(), Some(-3.0));
    }

    #[test]
    fn bf16_has_no_subnormals() {
        let f = FpFormat::BF16;
        let xm = f.x_min();
        assert_eq!(round_to(0.75 * xm, f).value(), Some(xm));
        assert_eq!(round_to(0.5 * xm, f).value(), Some(0.0));
        assert_eq!(round_to(0.25 * xm, f).value(), Some(0.0));
        assert!(round_to(0.25 * xm, f).flags.underflow_to_zero);
        // 1 + 2^-8 is a tie between 1 and 1 + 2^-7
        assert_eq!(round_to(1.0 + 2f64.powi(-8), f).value(), Some(1.0));
    }

    #[test]
    fn fp64_is_identity() {
        let f = FpFormat::FP64;
        for x in [1.0, 0.1, -1e300, 5e-324] {
            assert_eq!(round_to(x, f).value(), Some(x));
        }
        assert!(round_to(f64::INFINITY, f).is_overflow());
        assert!(sim_op(Op::Mul, 1e200, 1e200, f).is_overflow());
    }

    #[test]
    fn sim_op_examples() {
        let f = FpFormat::FP16;
        assert_eq!(sim_op(Op::Add, 1.0, 1.0, f).value(), Some(2.0));
        assert!(sim_op(Op::Mul, 256.0, 256.0, f).is_overflow());
        assert_eq!(sim_op(Op::Add, 1.0, 2f64.powi(-12), f).value(), Some(1.0));
        assert_eq!(sim_op(Op::Sqrt, 4.0, 0.0, f).value(), Some(2.0));
        assert_eq!(sim_op(Op::Div, 1.0, 3.0, f).value(), Some(0.333251953125));
    }

    #[test]
    fn scale_check_examples() {
        let f = FpFormat::FP16;
        assert!(safe_scale_check(1.0, 65504.0, f));
        assert!(safe_scale_check(1e-3, 60.0, f));
        assert!(!safe_scale_check(1e-4, 60.0, f));
    }

    #[test]
    fn safe_update_examples() {
        let f = FpFormat::FP16;
        assert_eq!(safe_update(0.0, 0.0, 0.0, f), Ok(0.0));
        assert_eq!(safe_update(0.0, 300.0, 300.0, f), Err(UnsafeUpdate));
        assert_eq!(safe_update(-60000.0, 100.0, 100.0, f), Err(UnsafeUpdate));
        assert_eq!(safe_update(100.0, 2.0, 3.0, f), Ok(94.0));
        // fp16 would round 65504 - 1 back up to 65504 and admit this
        assert_eq!(safe_update(1.0, -256.0, 255.875, f), Err(UnsafeUpdate));
        // product rounds up by a tie, sum lands exactly on 65520
        assert_eq!(safe_update(32688.0, -7.0, 4688.0, f), Err(UnsafeUpdate));
    }
}
