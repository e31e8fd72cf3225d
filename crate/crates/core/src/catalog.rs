//! Benchmark systems and published reduced models used by tests and examples.

use nalgebra::DMatrix;

use crate::polymat::{Monomial, PolyMatrix};
use crate::psys::{ParamStateSpace, SemialgebraicSet, TimeDomain};

/// `M0 + sum_k alpha_k M_k` from row-major coefficient slices.
pub fn affine(rows: usize, cols: usize, nvars: usize, constant: &[f64], linear: &[(usize, &[f64])]) -> PolyMatrix {
    let mut terms = vec![(Monomial::one(nvars), DMatrix::from_row_slice(rows, cols, constant))];
    for &(k, c) in linear {
        terms.push((Monomial::var(nvars, k), DMatrix::from_row_slice(rows, cols, c)));
    }
    PolyMatrix::from_terms(rows, cols, nvars, terms).expect("consistent shapes")
}

fn system(td: TimeDomain, set: SemialgebraicSet, a: PolyMatrix, b: &[f64], c: &[f64], d: f64) -> ParamStateSpace {
    let (n, p) = (a.rows(), set.nvars());
    ParamStateSpace::new(
        td,
        a,
        PolyMatrix::constant(DMatrix::from_row_slice(n, 1, b), p),
        PolyMatrix::constant(DMatrix::from_row_slice(1, n, c), p),
        PolyMatrix::constant(DMatrix::from_element(1, 1, d), p),
        set,
    )
    .expect("catalog systems are well formed")
}

/// Two-state discrete system, `A = [[0.5 a1, 0.1], [0.3, 0.5 a2]]`, on `[-1, 1]^2`.
pub fn illustrative_discrete() -> ParamStateSpace {
    let a = affine(2, 2, 2, &[0.0, 0.1, 0.3, 0.0], &[(0, &[0.5, 0.0, 0.0, 0.0]), (1, &[0.0, 0.0, 0.0, 0.5])]);
    system(TimeDomain::Discrete, SemialgebraicSet::from_box(vec![(-1.0, 1.0); 2]), a, &[1.0, 0.0], &[1.0, 0.0], 0.0)
}

fn alpha1_set() -> SemialgebraicSet {
    SemialgebraicSet::from_box(vec![(-1.0, 1.0)])
}

/// Published balanced truncation of [`illustrative_discrete`] dropping `a2`.
/// The printed `-1.7e-1` off-diagonal entries are `-sqrt(0.03)`.
pub fn illustrative_gramian_n2() -> ParamStateSpace {
    let s = -(0.03f64).sqrt();
    let a = affine(2, 2, 1, &[0.0, s, s, 0.0], &[(0, &[0.5, 0.0, 0.0, 0.0])]);
    system(TimeDomain::Discrete, alpha1_set(), a, &[-1.0, 0.0], &[-1.0, 0.0], 0.0)
}

/// Published one-state balanced truncation of [`illustrative_discrete`].
pub fn illustrative_gramian_n1() -> ParamStateSpace {
    let a = affine(1, 1, 1, &[0.0], &[(0, &[0.5])]);
    system(TimeDomain::Discrete, alpha1_set(), a, &[-1.0], &[-1.0], 0.0)
}

/// Published two-state SOS reduction of [`illustrative_discrete`].
pub fn illustrative_sos_n2() -> ParamStateSpace {
    let a = affine(2, 2, 1, &[0.0, -0.12, -0.33, 0.0], &[(0, &[0.5, 0.0, 0.0, -6.5e-4])]);
    let b = affine(2, 1, 1, &[1.0, 0.0], &[(0, &[0.0, 6.3e-2])]);
    let set = alpha1_set();
    ParamStateSpace::new(
        TimeDomain::Discrete,
        a,
        b,
        PolyMatrix::constant(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), 1),
        PolyMatrix::constant(DMatrix::from_element(1, 1, 7.9e-3), 1),
        set,
    )
    .expect("well formed")
}

/// Published one-state SOS reduction of [`illustrative_discrete`].
pub fn illustrative_sos_n1() -> ParamStateSpace {
    let a = affine(1, 1, 1, &[0.0], &[(0, &[0.52])]);
    system(TimeDomain::Discrete, alpha1_set(), a, &[0.99], &[1.0], 0.0)
}

/// Linearized two-generator network; `alpha` perturbs the line admittances
/// on `[-0.1, 0.1]^2`. Input and output at the first generator.
pub fn power_network() -> ParamStateSpace {
    #[rustfmt::skip]
    let a0 = [
        0.0, 1.0, 0.0, 0.0,
        -150.0, -0.25, 98.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        78.0, 0.0, -120.0, -0.2,
    ];
    let mut a1 = [0.0; 16];
    a1[4] = -27.0;
    let mut a2 = [0.0; 16];
    a2[14] = -23.0;
    let a = affine(4, 4, 2, &a0, &[(0, &a1), (1, &a2)]);
    let set = SemialgebraicSet::from_box(vec![(-0.1, 0.1); 2]);
    system(TimeDomain::Continuous, set, a, &[0.0, 1.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0], 0.0)
}

/// Published four-state reduction of [`power_network`] depending on `a1` only.
pub fn power_network_published() -> ParamStateSpace {
    #[rustfmt::skip]
    let a0 = [
        -4.2, 2.6e-2, 8.8e-3, 7.3e-2,
        4.4e-1, -6.4, -2.8e-1, -4.4e-1,
        1.5, 3.8e-2, -4.2e-1, 4.6e-2,
        -1.8e-2, -8.8e-1, 1.8e-1, -8.3e-1,
    ];
    #[rustfmt::skip]
    let a1 = [
        7.4e-4, 5.5e-4, 1.7e-4, -7.5e-4,
        -3.0e1, 1.9e-1, -4.4e-2, -1.4e-1,
        -6.6e-3, -2.3e-4, 2.8e-4, -1.0e-4,
        5.9e-2, -4.7e-5, 4.2e-3, -5.5e-3,
    ];
    let a = affine(4, 4, 1, &a0, &[(0, &a1)]);
    let set = SemialgebraicSet::from_box(vec![(-0.1, 0.1)]);
    system(
        TimeDomain::Continuous,
        set,
        a,
        &[9.0e-2, 3.8, -4.9e-2, 5.6e-1],
        &[1.1e-1, 4.3e-1, -3.2e-2, 1.1e-1],
        -0.10558,
    )
}

pub const NAMES: &[&str] = &[
    "illustrative_discrete",
    "illustrative_gramian_n2",
    "illustrative_gramian_n1",
    "illustrative_sos_n2",
    "illustrative_sos_n1",
    "power_network",
    "power_network_published",
];

pub fn by_name(name: &str) -> Option<ParamStateSpace> {
    Some(match name {
        "illustrative_discrete" => illustrative_discrete(),
        "illustrative_gramian_n2" => illustrative_gramian_n2(),
        "illustrative_gramian_n1" => illustrative_gramian_n1(),
        "illustrative_sos_n2" => illustrative_sos_n2(),
        "illustrative_sos_n1" => illustrative_sos_n1(),
        "power_network" => power_network(),
        "power_network_published" => power_network_published(),
        _ => return None,
    })
}
