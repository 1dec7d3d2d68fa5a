//! Fixtures shared by the benchmarks.

use std::f64::consts::FRAC_1_SQRT_2;

use stripewalk_core::linalg::re;
use stripewalk_core::{BandState, Coin, Kernel, Stripe, C64};

pub fn balanced() -> [C64; 2] {
    [re(FRAC_1_SQRT_2), re(FRAC_1_SQRT_2)]
}

/// Fresh Hadamard band of width `m` sized for `steps` steps.
pub fn band(m: usize, steps: usize, kernel: Kernel) -> BandState {
    BandState::init_product(
        &Coin::hadamard(),
        balanced(),
        Stripe::centered(m).expect("positive width"),
        steps,
    )
    .expect("valid start")
    .with_kernel(kernel)
}

/// Widths exercised by the benchmarks.
pub const WIDTHS: [usize; 4] = [1, 2, 10, 50];
