//! Phase-contrast flow encoding: density, nuisance phase and three velocity
//! components map to four complex images, and back.

use std::f64::consts::PI;

use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::{check_same_shape, BGrid, CGrid, Error, RGrid, Result, Shape};

#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub rho: RGrid,
    pub theta0: RGrid,
    pub v: [RGrid; 3],
    pub venc: f64,
    pub fluid_mask: BGrid,
}

impl FlowField {
    pub fn shape(&self) -> Shape {
        self.rho.dim()
    }

    /// Checks shapes, `rho >= 0`, `venc > 0` and the encoding limit inside
    /// the fluid region.
    pub fn validate(&self) -> Result<()> {
        check_venc(self.venc)?;
        let s = self.shape();
        check_same_shape("theta0", s, self.theta0.dim())?;
        check_same_shape("fluid mask", s, self.fluid_mask.dim())?;
        for v in &self.v {
            check_same_shape("velocity component", s, v.dim())?;
        }
        if let Some(r) = self.rho.iter().find(|r| !(**r >= 0.0)) {
            return Err(Error::input(format!("density must be non-negative, found {r}")));
        }
        for (k, v) in self.v.iter().enumerate() {
            let worst = Zip::from(v)
                .and(&self.fluid_mask)
                .fold(0.0f64, |m, &val, &inside| if inside { m.max(val.abs()) } else { m });
            if worst >= self.venc {
                return Err(Error::input(format!(
                    "|v{}| reaches {worst} inside the fluid region, must stay below venc = {}",
                    k + 1,
                    self.venc
                )));
            }
        }
        Ok(())
    }
}

/// The four complex images `x_0..x_3`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImageSet {
    pub x: [CGrid; 4],
}

impl ComplexImageSet {
    pub fn new(x: [CGrid; 4]) -> Result<Self> {
        let s = x[0].dim();
        for g in &x[1..] {
            check_same_shape("complex image set", s, g.dim())?;
        }
        Ok(Self { x })
    }

    pub fn shape(&self) -> Shape {
        self.x[0].dim()
    }
}

fn check_venc(venc: f64) -> Result<()> {
    if !(venc > 0.0) || !venc.is_finite() {
        return Err(Error::input(format!("venc must be positive, got {venc}")));
    }
    Ok(())
}

/// Principal argument in `[-pi, pi)` with `arg(0) = 0`.
pub fn arg(z: Complex64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        return 0.0;
    }
    let a = z.im.atan2(z.re);
    if a >= PI {
        -PI
    } else {
        a
    }
}

/// Reduces an angle to `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

/// `x_0 = rho e^{i theta0}`, `x_k = x_0 e^{i pi v_k / venc}`.
pub fn forward_4dflow(field: &FlowField) -> Result<ComplexImageSet> {
    check_venc(field.venc)?;
    let s = field.shape();
    check_same_shape("theta0", s, field.theta0.dim())?;
    for v in &field.v {
        check_same_shape("velocity component", s, v.dim())?;
    }
    let x0 = Zip::from(&field.rho)
        .and(&field.theta0)
        .map_collect(|&r, &t| Complex64::from_polar(r, t));
    let scale = PI / field.venc;
    let xk = |v: &RGrid| {
        Zip::from(&x0)
            .and(v)
            .map_collect(|&z, &vel| z * Complex64::from_polar(1.0, scale * vel))
    };
    let x1 = xk(&field.v[0]);
    let x2 = xk(&field.v[1]);
    let x3 = xk(&field.v[2]);
    Ok(ComplexImageSet { x: [x0, x1, x2, x3] })
}

/// Density, phase and velocities from four complex images.
///
/// The velocity phase is the difference of principal arguments reduced to
/// `[-pi, pi)`, so any field with `|v| < venc` is recovered regardless of the
/// nuisance phase. The fluid mask of the result is the support of `rho`.
pub fn inverse_4dflow(images: &ComplexImageSet, venc: f64) -> Result<FlowField> {
    check_venc(venc)?;
    let s = images.shape();
    for g in &images.x[1..] {
        check_same_shape("complex image set", s, g.dim())?;
    }
    let x0 = &images.x[0];
    let rho = x0.mapv(|z| z.norm());
    let theta0 = x0.mapv(arg);
    let scale = venc / PI;
    let vel = |xk: &CGrid| {
        Zip::from(xk)
            .and(&theta0)
            .map_collect(|&z, &t0| scale * wrap_angle(arg(z) - t0))
    };
    let v = [vel(&images.x[1]), vel(&images.x[2]), vel(&images.x[3])];
    let fluid_mask = rho.mapv(|r| r > 0.0);
    Ok(FlowField {
        rho,
        theta0,
        v,
        venc,
        fluid_mask,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SliceOrientation {
    /// Cross-section of the vessel; flow is through-plane (`v3`).
    Orthogonal,
    /// Cut along the vessel axis; flow runs along the band (`v1`).
    Longitudinal,
}

fn check_profile(vmax: f64, venc: f64) -> Result<()> {
    check_venc(venc)?;
    if !(vmax > 0.0) {
        return Err(Error::input(format!("vmax must be positive, got {vmax}")));
    }
    if vmax >= venc {
        return Err(Error::input(format!(
            "vmax = {vmax} must be below venc = {venc} to avoid phase wrapping"
        )));
    }
    Ok(())
}

/// Hagen-Poiseuille flow in a straight pipe of radius `radius` pixels,
/// centred on the grid, with unit density inside the lumen.
pub fn make_poiseuille(
    shape: Shape,
    orientation: SliceOrientation,
    radius: f64,
    vmax: f64,
    venc: f64,
) -> Result<FlowField> {
    check_profile(vmax, venc)?;
    let (rows, cols) = shape;
    let (cr, cc) = ((rows / 2) as f64, (cols / 2) as f64);
    let limit = match orientation {
        SliceOrientation::Orthogonal => cr.min(cc) - 1.0,
        SliceOrientation::Longitudinal => cr - 1.0,
    };
    if !(radius > 0.0) || radius > limit {
        return Err(Error::input(format!(
            "radius {radius} does not fit a {rows}x{cols} grid (max {limit})"
        )));
    }
    let dist: RGrid = match orientation {
        SliceOrientation::Orthogonal => Array2::from_shape_fn(shape, |(i, j)| {
            (i as f64 - cr).hypot(j as f64 - cc)
        }),
        SliceOrientation::Longitudinal => Array2::from_shape_fn(shape, |(i, _)| (i as f64 - cr).abs()),
    };
    let fluid_mask = dist.mapv(|d| d <= radius);
    let rho = fluid_mask.mapv(|f| if f { 1.0 } else { 0.0 });
    let profile = Zip::from(&dist)
        .and(&fluid_mask)
        .map_collect(|&d, &f| if f { vmax * (1.0 - (d / radius).powi(2)) } else { 0.0 });
    let zero = Array2::zeros(shape);
    let v = match orientation {
        SliceOrientation::Orthogonal => [zero.clone(), zero.clone(), profile],
        SliceOrientation::Longitudinal => [profile, zero.clone(), zero.clone()],
    };
    Ok(FlowField {
        rho,
        theta0: zero,
        v,
        venc,
        fluid_mask,
    })
}

/// Circular lumen with through-plane parabolic flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vessel {
    /// `(row, col)` in pixels.
    pub center: (f64, f64),
    pub radius: f64,
    /// Peak through-plane velocity; sign gives direction.
    pub vmax: f64,
}

/// Through-plane slice containing several non-overlapping vessels.
pub fn make_vessels(shape: Shape, vessels: &[Vessel], venc: f64) -> Result<FlowField> {
    check_venc(venc)?;
    let mut v3 = Array2::zeros(shape);
    let mut fluid_mask = Array2::from_elem(shape, false);
    for ves in vessels {
        check_profile(ves.vmax.abs(), venc)?;
        if !(ves.radius > 0.0) {
            return Err(Error::input("vessel radius must be positive"));
        }
        for ((i, j), inside) in fluid_mask.indexed_iter_mut() {
            let d = (i as f64 - ves.center.0).hypot(j as f64 - ves.center.1);
            if d <= ves.radius {
                if *inside {
                    return Err(Error::input("vessels overlap"));
                }
                *inside = true;
                v3[[i, j]] = ves.vmax * (1.0 - (d / ves.radius).powi(2));
            }
        }
    }
    let rho = fluid_mask.mapv(|f| if f { 1.0 } else { 0.0 });
    let zero = Array2::zeros(shape);
    Ok(FlowField {
        rho,
        theta0: zero.clone(),
        v: [zero.clone(), zero, v3],
        venc,
        fluid_mask,
    })
}

/// Axial slice through the ascending and descending aorta: a large lumen
/// with forward flow and a smaller one with reverse flow, scaled to `shape`.
pub fn make_aorta_like(shape: Shape, venc: f64) -> Result<FlowField> {
    let s = shape.0.min(shape.1) as f64 / 64.0;
    let sr = shape.0 as f64 / 64.0;
    let sc = shape.1 as f64 / 64.0;
    make_vessels(
        shape,
        &[
            Vessel { center: (24.0 * sr, 26.0 * sc), radius: 9.0 * s, vmax: 0.8 * venc },
            Vessel { center: (40.0 * sr, 40.0 * sc), radius: 6.0 * s, vmax: -0.6 * venc },
        ],
        venc,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn field_from(rho: RGrid, theta0: RGrid, v: [RGrid; 3], venc: f64) -> FlowField {
        let fluid_mask = rho.mapv(|r| r > 0.0);
        FlowField { rho, theta0, v, venc, fluid_mask }
    }

    fn random_field(shape: Shape, key: u64, venc: f64) -> FlowField {
        let n = shape.0 * shape.1;
        let u = rng::uniforms(key, 5 * n);
        let grid = |k: usize, f: &dyn Fn(f64) -> f64| {
            Array2::from_shape_fn(shape, |(i, j)| f(u[k * n + i * shape.1 + j]))
        };
        field_from(
            grid(0, &|t| 0.1 + t),
            grid(1, &|t| -PI + 2.0 * PI * t),
            [
                grid(2, &|t| venc * (1.8 * t - 0.9)),
                grid(3, &|t| venc * (1.8 * t - 0.9)),
                grid(4, &|t| venc * (1.8 * t - 0.9)),
            ],
            venc,
        )
    }

    #[test]
    fn trivial_field_gives_ones() {
        let s = (4, 4);
        let f = field_from(Array2::ones(s), Array2::zeros(s), [Array2::zeros(s), Array2::zeros(s), Array2::zeros(s)], 1.0);
        let x = forward_4dflow(&f).unwrap();
        for g in &x.x {
            assert!(g.iter().all(|z| *z == Complex64::new(1.0, 0.0)));
        }
    }

    #[test]
    fn half_venc_gives_i() {
        let s = (2, 2);
        let mut v1 = Array2::zeros(s);
        v1[[1, 0]] = 0.75;
        let f = field_from(Array2::ones(s), Array2::zeros(s), [v1, Array2::zeros(s), Array2::zeros(s)], 1.5);
        let x = forward_4dflow(&f).unwrap();
        assert!((x.x[1][[1, 0]] - Complex64::i()).norm() < 1e-15);
    }

    #[test]
    fn magnitudes_equal_rho() {
        let f = random_field((8, 8), 1, 2.0);
        let x = forward_4dflow(&f).unwrap();
        for g in &x.x {
            Zip::from(g).and(&f.rho).for_each(|z, r| assert_relative_eq!(z.norm(), *r, max_relative = 1e-14));
        }
    }

    #[test]
    fn inverse_examples() {
        let s = (1, 2);
        let mut x0 = Array2::zeros(s);
        let mut x1 = Array2::zeros(s);
        x0[[0, 0]] = Complex64::new(1.0, 0.0);
        x1[[0, 0]] = Complex64::i();
        let set = ComplexImageSet::new([x0, x1, Array2::zeros(s), Array2::zeros(s)]).unwrap();
        let f = inverse_4dflow(&set, 3.0).unwrap();
        assert_relative_eq!(f.v[0][[0, 0]], 1.5, epsilon = 1e-15);
        // all-zero pixel
        assert_eq!(f.rho[[0, 1]], 0.0);
        for k in 0..3 {
            assert_eq!(f.v[k][[0, 1]], 0.0);
        }
        assert!(!f.fluid_mask[[0, 1]]);
    }

    #[test]
    fn arg_branch() {
        assert_eq!(arg(Complex64::new(-1.0, 0.0)), -PI);
        assert_eq!(arg(Complex64::new(-1.0, -0.0)), -PI);
        assert_eq!(arg(Complex64::new(0.0, 0.0)), 0.0);
        assert_eq!(arg(Complex64::new(-0.0, 0.0)), 0.0);
        assert_relative_eq!(arg(Complex64::new(0.0, -2.0)), -PI / 2.0);
        assert_eq!(wrap_angle(PI), -PI);
        assert_relative_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn errors() {
        let s = (2, 2);
        let mut f = field_from(Array2::ones(s), Array2::zeros(s), [Array2::zeros(s), Array2::zeros(s), Array2::zeros(s)], 0.0);
        assert!(forward_4dflow(&f).is_err());
        f.venc = 1.0;
        f.v[2] = Array2::zeros((2, 3));
        assert!(matches!(forward_4dflow(&f), Err(Error::DimensionMismatch { .. })));
        let bad = ComplexImageSet::new([Array2::zeros(s), Array2::zeros(s), Array2::zeros((3, 2)), Array2::zeros(s)]);
        assert!(bad.is_err());
    }

    #[test]
    fn validate_rejects_encoding_violation() {
        let mut f = make_poiseuille((16, 16), SliceOrientation::Orthogonal, 4.0, 0.5, 1.0).unwrap();
        assert!(f.validate().is_ok());
        f.v[2][[8, 8]] = 1.0;
        assert!(f.validate().is_err());
        f.v[2][[8, 8]] = 0.0;
        f.rho[[0, 0]] = -1.0;
        assert!(f.validate().is_err());
    }

    #[test]
    fn poiseuille_profile() {
        let (r, vmax) = (10.0, 0.7);
        let f = make_poiseuille((64, 64), SliceOrientation::Orthogonal, r, vmax, 1.0).unwrap();
        assert_eq!(f.v[2][[32, 32]], vmax);
        assert_eq!(f.v[2][[32, 42]], 0.0);
        assert!(f.fluid_mask[[32, 42]]);
        assert!(!f.fluid_mask[[32, 43]]);
        assert!(f.v[0].iter().chain(f.v[1].iter()).all(|v| *v == 0.0));
        let total: f64 = f.v[2].sum();
        let exact = vmax * PI * r * r / 2.0;
        assert!((total - exact).abs() / exact < 0.02, "{total} vs {exact}");
        assert_eq!(f.fluid_mask, f.rho.mapv(|x| x > 0.0));
    }

    #[test]
    fn poiseuille_longitudinal() {
        let f = make_poiseuille((32, 64), SliceOrientation::Longitudinal, 5.0, 0.4, 0.5).unwrap();
        for j in 0..64 {
            assert_eq!(f.v[0][[16, j]], 0.4);
            assert_eq!(f.v[0][[21, j]], 0.0);
            assert!(f.fluid_mask[[11, j]] && !f.fluid_mask[[10, j]]);
        }
        assert_eq!(f.fluid_mask.iter().filter(|b| **b).count(), 11 * 64);
        assert!(f.v[2].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn poiseuille_errors() {
        let o = SliceOrientation::Orthogonal;
        assert!(make_poiseuille((32, 32), o, 5.0, 1.0, 1.0).is_err());
        assert!(make_poiseuille((32, 32), o, 5.0, 0.0, 1.0).is_err());
        assert!(make_poiseuille((32, 32), o, 16.0, 0.5, 1.0).is_err());
        assert!(make_poiseuille((32, 32), o, 0.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn aorta_like_has_two_opposite_flows() {
        let f = make_aorta_like((64, 64), 1.0).unwrap();
        f.validate().unwrap();
        assert!(f.v[2][[24, 26]] > 0.79);
        assert!(f.v[2][[40, 40]] < -0.59);
        assert!(make_vessels((16, 16), &[
            Vessel { center: (8.0, 8.0), radius: 3.0, vmax: 0.5 },
            Vessel { center: (8.0, 10.0), radius: 3.0, vmax: 0.5 },
        ], 1.0).is_err());
    }

    fn equal_magnitude_set(key: u64) -> ComplexImageSet {
        let s = (6, 5);
        let n = 30;
        let u = rng::uniforms(key, 5 * n);
        let rho = Array2::from_shape_fn(s, |(i, j)| if (i + j) % 7 == 3 { 0.0 } else { 0.2 + u[i * 5 + j] });
        let x = std::array::from_fn(|k| {
            Array2::from_shape_fn(s, |(i, j)| {
                let r = rho[[i, j]];
                // Stay off the branch cut.
                let t = -3.1 + 6.2 * u[(k + 1) * n + i * 5 + j];
                Complex64::from_polar(r, t)
            })
        });
        ComplexImageSet::new(x).unwrap()
    }

    #[test]
    fn right_inverse_on_equal_magnitudes() {
        for key in 0..5 {
            let x = equal_magnitude_set(key);
            let back = forward_4dflow(&inverse_4dflow(&x, 1.7).unwrap()).unwrap();
            for k in 0..4 {
                Zip::from(&x.x[k]).and(&back.x[k]).for_each(|a, b| {
                    assert!((a - b).norm() <= 1e-12 * a.norm().max(1e-300) || (a.norm() == 0.0 && b.norm() == 0.0));
                });
            }
        }
    }

    proptest! {
        #[test]
        fn phase_safety(key in 0u64..1000, venc in 0.1f64..10.0) {
            let f = random_field((4, 6), key, venc);
            let back = inverse_4dflow(&forward_4dflow(&f).unwrap(), venc).unwrap();
            for k in 0..3 {
                Zip::from(&f.v[k]).and(&back.v[k]).for_each(|a, b| {
                    assert!((a - b).abs() <= 1e-12 * venc.max(1.0), "{a} vs {b}");
                });
            }
            Zip::from(&f.rho).and(&back.rho).for_each(|a, b| assert!((a - b).abs() <= 1e-12));
        }

        #[test]
        fn magnitude_equality(key in 0u64..1000) {
            let f = random_field((3, 3), key, 1.0);
            let x = forward_4dflow(&f).unwrap();
            for k in 1..4 {
                Zip::from(&x.x[0]).and(&x.x[k]).for_each(|a, b| assert!((a.norm() - b.norm()).abs() < 1e-14));
            }
        }
    }
}
