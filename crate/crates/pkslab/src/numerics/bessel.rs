//! Exponentially scaled modified Bessel function `i0e(x) = e^{-|x|} I_0(x)`.
//!
//! Chebyshev expansions on `[0, 8]` and `[8, inf)`, accurate to a few ulp.

const A: [f64; 30] = [
    -4.3447706395547665e-18,
    3.329942063880425e-17,
    -2.4312698460190526e-16,
    1.7153911715225191e-15,
    -1.1685332865345506e-14,
    7.67618549846838e-14,
    -4.856446783110493e-13,
    2.955052663129625e-12,
    -1.7268262914415555e-11,
    9.675809035373237e-11,
    -5.189795601635263e-10,
    2.6598237246823866e-9,
    -1.300025009986248e-8,
    6.046995022541919e-8,
    -2.670793853940612e-7,
    1.1173875391201037e-6,
    -4.4167383584587505e-6,
    1.6448448070728896e-5,
    -5.754195010082104e-5,
    1.8850288509584165e-4,
    -5.763755745385824e-4,
    1.6394756169413357e-3,
    -4.324309995050576e-3,
    1.0546460394594998e-2,
    -2.373741480589947e-2,
    4.930528423967071e-2,
    -9.490109704804764e-2,
    1.7162090152220877e-1,
    -3.046826723431984e-1,
    6.767952744094761e-1,
];

const B: [f64; 25] = [
    -8.426831378720737e-18,
    -4.581633502229098e-18,
    4.4850056848383685e-17,
    3.4547782110000875e-17,
    -2.827912585676212e-16,
    -3.425325424186502e-16,
    1.772563403871537e-15,
    3.811676982420339e-15,
    -9.554846711511285e-15,
    -4.150569271788972e-14,
    1.5400862025000743e-14,
    3.852778381476947e-13,
    7.180124451993766e-13,
    -1.794178531494118e-12,
    -1.3215811840464323e-11,
    -3.1499165279630827e-11,
    1.1889147107849741e-11,
    4.940602388224957e-10,
    3.396232025708386e-9,
    2.266668990498178e-8,
    2.0489185894690638e-7,
    2.8913705208347567e-6,
    6.889758346916825e-5,
    3.3691164782556943e-3,
    8.044904110141088e-1,
];

fn chbevl(x: f64, coeffs: &[f64]) -> f64 {
    let mut b0 = coeffs[0];
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in &coeffs[1..] {
        b2 = b1;
        b1 = b0;
        b0 = x * b1 - b2 + c;
    }
    0.5 * (b0 - b2)
}

/// `e^{-|x|} I_0(x)`.
pub fn i0e(x: f64) -> f64 {
    let x = x.abs();
    if x <= 8.0 {
        chbevl(x / 2.0 - 2.0, &A)
    } else {
        chbevl(32.0 / x - 2.0, &B) / x.sqrt()
    }
}
