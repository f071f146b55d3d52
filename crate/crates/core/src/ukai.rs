//! The half-space operator algebra: `U`, `P`, `V_h`, `V_d`, `M`, `G`, `N~`, `M~`.
//!
//! Every operator is a rational function of `D = d_d` per horizontal mode composed with an
//! extension, so each is evaluated through [`SpectralField::ext_mult`].

use crate::field::{ExtMode, Mode, Parity, SpectralField, VectorField};
use crate::quadrature::{lp_half, lp_norm};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

const Z: C64 = C64 { re: 0.0, im: 0.0 };

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `V_h u = u^h + S u^d`.
pub fn apply_vh(u: &VectorField) -> Vec<SpectralField> {
    let ud = u.vertical();
    u.horizontal().iter().enumerate().map(|(j, uj)| uj.add(&ud.s(j)).expect("same grid")).collect()
}

/// `V_d u = -S . u^h + u^d`.
pub fn apply_vd(u: &VectorField) -> SpectralField {
    let mut out = u.vertical().clone();
    for (j, uj) in u.horizontal().iter().enumerate() {
        out.axpy(-1.0, &uj.s(j)).expect("same grid");
    }
    out
}

/// `U f = r R_h.S (R_h.S e_a(f) + R_d e_s(f))`, the zero-trace solution of
/// `(d_d + |D_h|) w = |D_h| f`.
pub fn apply_u(f: &SpectralField) -> SpectralField {
    let a = f.ext_mult(ExtMode::Antisym, |m| [re(m.kappa * m.kappa), Z, Z]);
    let s = f.ext_mult(ExtMode::Sym, |m| [Z, re(-m.kappa), Z]);
    a.add(&s).expect("same grid")
}

/// `P f = int_0^{x_d} (I - U) f`, the zero-trace solution of `(d_d + |D_h|) v = f`.
///
/// On the horizontal mean `U` vanishes and the vertical antiderivative is taken exactly.
pub fn apply_p(f: &SpectralField) -> SpectralField {
    let a = f.ext_mult(ExtMode::Antisym, |m| [re(m.kappa), Z, Z]);
    let s = f.ext_mult(ExtMode::Sym, |m| [Z, re(if m.kappa == 0.0 { 0.0 } else { -1.0 }), Z]);
    let out = a.add(&s).expect("same grid");
    // replace the horizontal mean column by the exact antiderivative
    let g = *f.grid();
    let mean = f.map_columns(Parity::Raw, |m, car, lay| {
        if m.kappa != 0.0 {
            return (vec![Z; car.len()], vec![]);
        }
        let mut c = vec![Z; car.len()];
        let mut c0 = Z;
        for (i, v) in car.iter().enumerate().skip(1) {
            let xi = g.dxi_z(i);
            if xi != 0.0 {
                c[i] = v / C64::new(0.0, xi);
                c0 -= c[i];
            }
        }
        c[0] = c0;
        let mut l = vec![Z; lay.len().max(1) + 1];
        l[1] = car[0];
        for (k, b) in lay.iter().enumerate() {
            l[k + 1] += b / (k + 1) as f64;
        }
        (c, l)
    });
    out.add(&mean).expect("same grid")
}

/// `P f` as samples, by integrating the expansion of `(I - U) f` term by term in `x_d`.
pub fn p_by_antiderivative(f: &SpectralField) -> Vec<f64> {
    let w = f.sub(&apply_u(f)).expect("same grid");
    SpectralField::columns_to_samples(f.grid(), &w.antiderivative_columns())
}

/// `M e_a(h) = -r (d_d + |D_h|)(-Delta)^{-1} e_a(h)`.
pub fn apply_m(h: &SpectralField) -> SpectralField {
    h.ext_mult(ExtMode::Antisym, |m| [re(-m.kappa), re(-1.0), Z])
}

/// `G k = -r (R_d - R_h.S)(R_h . e_a(k^h) + R_d e_s(k^d))`.
pub fn apply_g(k: &VectorField) -> SpectralField {
    let mut out = k.vertical().ext_mult(ExtMode::Sym, |m| [Z, re(-m.kappa), re(-1.0)]);
    for (j, kj) in k.horizontal().iter().enumerate() {
        let t = kj.ext_mult(ExtMode::Antisym, |m| [-m.ixi(j) * m.kappa, -m.ixi(j), Z]);
        out.axpy(1.0, &t).expect("same grid");
    }
    out
}

/// `N~ f = r{[1 + R_d^2 - R_d R_h.S] e_s(f^d) + R_d^2 S.e_a(f^h) + R_d R_h.e_a(f^h)}`.
pub fn apply_ntilde(f: &VectorField) -> SpectralField {
    let mut out = f.vertical().ext_mult(ExtMode::Sym, |m| [re(m.kappa * m.kappa), re(m.kappa), Z]);
    for (j, fj) in f.horizontal().iter().enumerate() {
        let t = fj.ext_mult(ExtMode::Antisym, |m: &Mode| [Z, m.ixi(j), m.s(j)]);
        out.axpy(1.0, &t).expect("same grid");
    }
    out
}

/// The common factor `r[R_d - R_h.S](R_h.e_a(f^h) + R_d e_s(f^d))` of `M~` and `G`.
fn riesz_combination(f: &VectorField) -> SpectralField {
    let mut inner = f.vertical().ext_mult(ExtMode::Sym, |m| [Z, re(m.kappa), re(1.0)]);
    for (j, fj) in f.horizontal().iter().enumerate() {
        let t = fj.ext_mult(ExtMode::Antisym, |m| [m.ixi(j) * m.kappa, m.ixi(j), Z]);
        inner.axpy(1.0, &t).expect("same grid");
    }
    inner
}

/// `M~ f = r S [R_d - R_h.S](R_h.e_a(f^h) + R_d e_s(f^d)) + V_h f`.
pub fn apply_mtilde(f: &VectorField) -> Vec<SpectralField> {
    let inner = riesz_combination(f);
    apply_vh(f).into_iter().enumerate().map(|(j, v)| inner.s(j).add(&v).expect("same grid")).collect()
}

/// `V_h f - S M e_a(div f)`: the second evaluation path of `M~ f`.
pub fn mtilde_via_divergence(f: &VectorField) -> Vec<SpectralField> {
    let m = apply_m(&f.div());
    apply_vh(f).into_iter().enumerate().map(|(j, v)| v.sub(&m.s(j)).expect("same grid")).collect()
}

/// `H gamma f`.
pub fn h_gamma(f: &SpectralField) -> SpectralField {
    f.trace().harmonic_extend()
}

/// Verification record for one operator check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorReport {
    pub operator: String,
    pub input: String,
    /// Relative `L^2` residual of the defining equation.
    pub residual: f64,
    /// `L^2` norm of the trace of the output.
    pub trace_norm: f64,
}

/// Check `(d_d + |D_h|) U f = |D_h| f` and `gamma U f = 0`.
pub fn report_u(f: &SpectralField, input: &str) -> OperatorReport {
    let w = apply_u(f);
    let lhs = w.d_z().add(&w.dh_abs()).expect("same grid");
    let rhs = f.dh_abs();
    OperatorReport {
        operator: "U".into(),
        input: input.into(),
        residual: rel(&lhs, &rhs),
        trace_norm: w.trace().l2(),
    }
}

/// Check `(d_d + |D_h|) P f = f` and `gamma P f = 0`.
pub fn report_p(f: &SpectralField, input: &str) -> OperatorReport {
    let v = apply_p(f);
    let lhs = v.d_z().add(&v.dh_abs()).expect("same grid");
    OperatorReport { operator: "P".into(), input: input.into(), residual: rel(&lhs, f), trace_norm: v.trace().l2() }
}

/// Relative `L^2` distance between two half-space fields.
pub fn rel(a: &SpectralField, b: &SpectralField) -> f64 {
    let diff = a.sub(b).expect("same grid");
    let den = lp_norm(b, 2.0);
    let num = lp_norm(&diff, 2.0);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Relative `L^2` distance measured against `||scale||`.
pub fn rel_to(a: &SpectralField, b: &SpectralField, scale: f64) -> f64 {
    let diff = a.sub(b).expect("same grid");
    let num = lp_half(a.grid(), &diff.samples(), 2.0);
    if scale == 0.0 {
        num
    } else {
        num / scale
    }
}

/// Residuals of the six operator identities on one field:
/// `grad_h U = U grad_h`, `d_d U = (I - U)|D_h|`, `grad_h P = S U`, `d_d P = I - U`,
/// `Delta P = d_d - |D_h|`, `[P, d_d] = -H gamma`.
/// Each entry is `||lhs - rhs||_2 / max(||lhs||_2, ||rhs||_2)` (for the commutator the norms
/// of `P d_d f` and `d_d P f` enter the maximum too); vector identities take the largest
/// component.
pub fn identity_residuals(f: &SpectralField) -> [f64; 6] {
    let d = f.grid().d;
    let uf = apply_u(f);
    let pf = apply_p(f);
    let r = |a: &SpectralField, b: &SpectralField| {
        let scale = lp_norm(a, 2.0).max(lp_norm(b, 2.0));
        rel_to(a, b, scale)
    };
    let mut r1 = 0.0f64;
    let mut r3 = 0.0f64;
    for j in 0..d - 1 {
        r1 = r1.max(r(&uf.d_h(j), &apply_u(&f.d_h(j))));
        r3 = r3.max(r(&pf.d_h(j), &uf.s(j)));
    }
    let i_minus_u = f.sub(&uf).expect("same grid");
    let r2 = r(&uf.d_z(), &apply_u(&f.dh_abs()).neg().add(&f.dh_abs()).expect("same grid"));
    let r4 = r(&pf.d_z(), &i_minus_u);
    let r5 = r(&pf.laplacian(), &f.d_z().sub(&f.dh_abs()).expect("same grid"));
    // the commutator is small for nearly trace-free f, so measure it against its terms
    let p_dz = apply_p(&f.d_z());
    let dz_p = pf.d_z();
    let comm = p_dz.sub(&dz_p).expect("same grid");
    let hg = h_gamma(f).neg();
    let scale6 = lp_norm(&p_dz, 2.0).max(lp_norm(&dz_p, 2.0)).max(lp_norm(&hg, 2.0));
    let r6 = rel_to(&comm, &hg, scale6);
    [r1, r2, r3, r4, r5, r6]
}

pub const IDENTITY_NAMES: [&str; 6] = [
    "grad_h U = U grad_h",
    "d_d U = (I-U)|D_h|",
    "grad_h P = S U",
    "d_d P = I-U",
    "Delta P = d_d - |D_h|",
    "[P, d_d] = -H gamma",
];
