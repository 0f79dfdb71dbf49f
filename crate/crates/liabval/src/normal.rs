//! Standard normal density, distribution function and quantile function.
//!
//! The distribution function goes through a rational approximation of the
//! complementary error function (Cody's SPECFUN scheme, relative error near
//! machine precision for f64); the quantile function is Acklam's rational
//! approximation polished by one Newton step on the cdf.

use crate::scalar::Real;

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_287;
const SQRT_2: f64 = std::f64::consts::SQRT_2;
const SQRT_2PI: f64 = 2.506_628_274_631_000_502;

/// Standard normal density.
pub fn pdf<S: Real>(x: S) -> S {
    (-(x * x) / S::of(2.0)).exp() / S::of(SQRT_2PI)
}

/// Standard normal distribution function.
pub fn cdf<S: Real>(x: S) -> S {
    S::of(0.5) * erfc(-x / S::of(SQRT_2))
}

/// Standard normal quantile function, `p` strictly inside (0, 1).
pub fn inv_cdf<S: Real>(p: S) -> S {
    assert!(
        p > S::zero() && p < S::one(),
        "quantile level must lie in (0,1), got {p}"
    );
    let x = acklam(p);
    // One Newton step pushes the approximation below 1e-10 absolute error.
    x - (cdf(x) - p) / pdf(x)
}

fn erfc<S: Real>(x: S) -> S {
    let y = x.abs();
    let r = if y <= S::of(0.46875) {
        S::one() - erf_small(y)
    } else if y <= S::of(4.0) {
        erfc_mid(y)
    } else {
        erfc_tail(y)
    };
    if x < S::zero() {
        S::of(2.0) - r
    } else {
        r
    }
}

const ERF_A: [f64; 5] = [
    3.161_123_743_870_565_6e0,
    1.138_641_541_510_501_6e2,
    3.774_852_376_853_020_2e2,
    3.209_377_589_138_469_4e3,
    1.857_777_061_846_031_5e-1,
];
const ERF_B: [f64; 4] = [
    2.360_129_095_234_412_1e1,
    2.440_246_379_344_441_7e2,
    1.282_616_526_077_372_3e3,
    2.844_236_833_439_170_6e3,
];

fn erf_small<S: Real>(y: S) -> S {
    let z = y * y;
    let mut num = S::of(ERF_A[4]) * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + S::of(ERF_A[i])) * z;
        den = (den + S::of(ERF_B[i])) * z;
    }
    y * (num + S::of(ERF_A[3])) / (den + S::of(ERF_B[3]))
}

const ERF_C: [f64; 9] = [
    5.641_884_969_886_700_9e-1,
    8.883_149_794_388_375_9e0,
    6.611_919_063_714_163e1,
    2.986_351_381_974_001_3e2,
    8.819_522_212_417_690_9e2,
    1.712_047_612_634_070_6e3,
    2.051_078_377_826_071_5e3,
    1.230_339_354_797_997_2e3,
    2.153_115_354_744_038_5e-8,
];
const ERF_D: [f64; 8] = [
    1.574_492_611_070_983_5e1,
    1.176_939_508_913_125e2,
    5.371_811_018_620_098_6e2,
    1.621_389_574_566_690_2e3,
    3.290_799_235_733_459_6e3,
    4.362_619_090_143_247e3,
    3.439_367_674_143_721_6e3,
    1.230_339_354_803_749_4e3,
];

fn erfc_mid<S: Real>(y: S) -> S {
    let mut num = S::of(ERF_C[8]) * y;
    let mut den = y;
    for i in 0..7 {
        num = (num + S::of(ERF_C[i])) * y;
        den = (den + S::of(ERF_D[i])) * y;
    }
    (-(y * y)).exp() * (num + S::of(ERF_C[7])) / (den + S::of(ERF_D[7]))
}

const ERF_P: [f64; 6] = [
    3.053_266_349_612_323_4e-1,
    3.603_448_999_498_044_4e-1,
    1.257_817_261_112_292_5e-1,
    1.608_378_514_874_227_7e-2,
    6.587_491_615_298_378e-4,
    1.631_538_713_730_209_8e-2,
];
const ERF_Q: [f64; 5] = [
    2.568_520_192_289_822_4e0,
    1.872_952_849_923_460_5e0,
    5.279_051_029_514_284_1e-1,
    6.051_834_131_244_131_9e-2,
    2.335_204_976_268_691_8e-3,
];

fn erfc_tail<S: Real>(y: S) -> S {
    let z = (y * y).recip();
    let mut num = S::of(ERF_P[5]) * z;
    let mut den = z;
    for i in 0..4 {
        num = (num + S::of(ERF_P[i])) * z;
        den = (den + S::of(ERF_Q[i])) * z;
    }
    let r = z * (num + S::of(ERF_P[4])) / (den + S::of(ERF_Q[4]));
    (-(y * y)).exp() / y * (S::of(FRAC_1_SQRT_PI) - r)
}

const ACK_A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_690e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239e0,
];
const ACK_B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const ACK_C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838e0,
    -2.549_732_539_343_734e0,
    4.374_664_141_464_968e0,
    2.938_163_982_698_783e0,
];
const ACK_D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996e0,
    3.754_408_661_907_416e0,
];

fn acklam<S: Real>(p: S) -> S {
    let p_low = S::of(0.02425);
    let p_high = S::one() - p_low;
    if p < p_low {
        let q = (S::of(-2.0) * p.ln()).sqrt();
        tail_poly(q)
    } else if p > p_high {
        let q = (S::of(-2.0) * (S::one() - p).ln()).sqrt();
        -tail_poly(q)
    } else {
        let q = p - S::of(0.5);
        let r = q * q;
        let num = ((((S::of(ACK_A[0]) * r + S::of(ACK_A[1])) * r + S::of(ACK_A[2])) * r
            + S::of(ACK_A[3]))
            * r
            + S::of(ACK_A[4]))
            * r
            + S::of(ACK_A[5]);
        let den = ((((S::of(ACK_B[0]) * r + S::of(ACK_B[1])) * r + S::of(ACK_B[2])) * r
            + S::of(ACK_B[3]))
            * r
            + S::of(ACK_B[4]))
            * r
            + S::one();
        num * q / den
    }
}

fn tail_poly<S: Real>(q: S) -> S {
    let num = ((((S::of(ACK_C[0]) * q + S::of(ACK_C[1])) * q + S::of(ACK_C[2])) * q
        + S::of(ACK_C[3]))
        * q
        + S::of(ACK_C[4]))
        * q
        + S::of(ACK_C[5]);
    let den = (((S::of(ACK_D[0]) * q + S::of(ACK_D[1])) * q + S::of(ACK_D[2])) * q
        + S::of(ACK_D[3]))
        * q
        + S::one();
    num / den
}
