//! Fixtures shared by the benchmarks.

use idesmc_core::equiv_control::VolterraProblem;
use idesmc_core::integrator::FnIde;
use idesmc_core::linalg::vector;
use idesmc_core::{ExpTerm, Kernel, Mat, Result};

/// Two-state IDE with a two-term exponential memory; runs under both history
/// modes.
pub fn exponential_ide() -> Result<(FnIde, Kernel)> {
    let a = Mat::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -1.0]);
    let sys = FnIde::new(2, move |_, x| &a * x, |_, x| x.clone());
    let kernel = Kernel::exponential_series(
        2,
        vec![
            ExpTerm {
                rate: 1.0,
                coeff: Mat::from_row_slice(2, 2, &[0.0, 0.0, 0.5, 0.0]),
            },
            ExpTerm {
                rate: 3.0,
                coeff: Mat::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 0.25]),
            },
        ],
    )?;
    Ok((sys, kernel))
}

pub fn initial_state() -> idesmc_core::Vector {
    vector(&[1.0, -0.5])
}

/// Second-kind Volterra problem with a smooth non-convolution kernel on
/// `[0, 1]`.
pub fn volterra_problem(h: f64) -> Result<VolterraProblem> {
    VolterraProblem::new(
        2,
        |s, tau| Mat::from_row_slice(2, 2, &[(tau - s).exp(), 0.1, 0.0, 0.5 * (s * tau).cos()]),
        |s| vector(&[1.0, s.sin()]),
        0.0,
        1.0,
        h,
    )
}
