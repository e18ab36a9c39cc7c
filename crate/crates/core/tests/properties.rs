use num_complex::Complex64;
use proptest::prelude::*;

use pilot_wave::constraints::{poisson_bracket, FieldPhaseSpaceState, LatticeFunctional, PhaseSpaceGradient, Variable};
use pilot_wave::grid::{gradient, inner_product, laplacian};
use pilot_wave::guidance::velocity_field;
use pilot_wave::output::Table;
use pilot_wave::scenario::{parse_scenario, Packet, InitialState, Scenario};
use pilot_wave::{ComplexLatticeField, DerivativeMethod, GridSpec};

const METHODS: [DerivativeMethod; 2] = [DerivativeMethod::FiniteDifference, DerivativeMethod::Spectral];
const VARIABLES: [Variable; 4] = [Variable::Psi, Variable::PiPsi, Variable::PsiStar, Variable::PiPsiStar];

fn complex() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| Complex64::new(a, b))
}

fn grid() -> impl Strategy<Value = GridSpec> {
    prop_oneof![
        (8usize..24, 1.0..20.0f64).prop_map(|(n, l)| GridSpec::periodic_1d(n, l).unwrap()),
        (8usize..12, 1.0..10.0f64).prop_map(|(n, l)| GridSpec::periodic_2d(n, l).unwrap()),
    ]
}

fn field_on(grid: GridSpec) -> impl Strategy<Value = ComplexLatticeField> {
    prop::collection::vec(complex(), grid.sites()).prop_map(move |v| ComplexLatticeField::new(grid, v).unwrap())
}

fn grid_and_fields() -> impl Strategy<Value = (ComplexLatticeField, ComplexLatticeField)> {
    grid().prop_flat_map(|g| (field_on(g), field_on(g)))
}

fn state() -> impl Strategy<Value = FieldPhaseSpaceState> {
    let g = GridSpec::periodic_1d(8, 4.0).unwrap();
    (field_on(g), field_on(g), field_on(g), field_on(g))
        .prop_map(|(a, b, c, d)| FieldPhaseSpaceState::new(a, b, c, d, 0.0).unwrap())
}

/// `c x_a y_b + d w_e`: a random quadratic functional with a linear part.
#[derive(Debug, Clone)]
struct Quadratic {
    c: Complex64,
    x: (usize, usize),
    y: (usize, usize),
    d: Complex64,
    w: (usize, usize),
}

impl Quadratic {
    fn eval(&self, s: &FieldPhaseSpaceState) -> Complex64 {
        let v = |(k, site): (usize, usize)| s.value(VARIABLES[k], site);
        self.c * v(self.x) * v(self.y) + self.d * v(self.w)
    }

    fn functional(&self) -> LatticeFunctional {
        let (q, dq) = (self.clone(), self.clone());
        LatticeFunctional::with_gradient(
            "quadratic",
            move |s| q.eval(s),
            move |s| {
                let v = |(k, site): (usize, usize)| s.value(VARIABLES[k], site);
                let mut grad = PhaseSpaceGradient::schrodinger(s.grid().sites());
                *grad.entry_mut(VARIABLES[dq.x.0], dq.x.1) += dq.c * v(dq.y);
                *grad.entry_mut(VARIABLES[dq.y.0], dq.y.1) += dq.c * v(dq.x);
                *grad.entry_mut(VARIABLES[dq.w.0], dq.w.1) += dq.d;
                grad
            },
        )
    }
}

fn quadratic() -> impl Strategy<Value = Quadratic> {
    let slot = (0usize..4, 0usize..8);
    (complex(), slot.clone(), slot.clone(), complex(), slot).prop_map(|(c, x, y, d, w)| Quadratic { c, x, y, d, w })
}

fn bracket_functional(f: LatticeFunctional, g: LatticeFunctional) -> LatticeFunctional {
    LatticeFunctional::numeric("bracket", move |s| poisson_bracket(&f, &g, s).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parseval((f, _) in grid_and_fields()) {
        let sites = f.grid().sites() as f64;
        let spectrum: f64 = f.fourier().iter().map(|z| z.norm_sqr()).sum();
        let direct: f64 = f.values().iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((spectrum / sites - direct).abs() <= 1e-12 * (1.0 + direct));
    }

    #[test]
    fn laplacian_is_self_adjoint((f, g) in grid_and_fields()) {
        for method in METHODS {
            let lhs = inner_product(&f, &laplacian(&g, method).unwrap()).unwrap();
            let rhs = inner_product(&laplacian(&f, method).unwrap(), &g).unwrap();
            let scale = f.norm() * laplacian(&g, method).unwrap().norm();
            prop_assert!((lhs - rhs).norm() <= 1e-11 * (1.0 + scale));
        }
    }

    #[test]
    fn derivatives_commute_with_conjugation((f, _) in grid_and_fields()) {
        for method in METHODS {
            let a = laplacian(&f.conj(), method).unwrap();
            let b = laplacian(&f, method).unwrap().conj();
            prop_assert!(a.l2_distance(&b).unwrap() <= 1e-12 * (1.0 + a.norm()));
            for (ga, gb) in gradient(&f.conj(), method).unwrap().iter().zip(gradient(&f, method).unwrap()) {
                prop_assert!(ga.l2_distance(&gb.conj()).unwrap() <= 1e-12 * (1.0 + ga.norm()));
            }
        }
    }

    #[test]
    fn bracket_is_antisymmetric_and_bilinear(s in state(), f in quadratic(), g in quadratic(), h in quadratic(), a in complex()) {
        let (ff, gf, hf) = (f.functional(), g.functional(), h.functional());
        let fg = poisson_bracket(&ff, &gf, &s).unwrap();
        let gfb = poisson_bracket(&gf, &ff, &s).unwrap();
        prop_assert!((fg + gfb).norm() <= 1e-8 * (1.0 + fg.norm()));

        let (f2, h2) = (f.clone(), h.clone());
        let combo = LatticeFunctional::numeric("f + a h", move |s| f2.eval(s) + a * h2.eval(s));
        let lhs = poisson_bracket(&combo, &gf, &s).unwrap();
        let rhs = fg + a * poisson_bracket(&hf, &gf, &s).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-8 * (1.0 + rhs.norm()));
    }

    #[test]
    fn bracket_obeys_jacobi(s in state(), f in quadratic(), g in quadratic(), h in quadratic()) {
        let (ff, gf, hf) = (f.functional(), g.functional(), h.functional());
        let a = poisson_bracket(&ff, &bracket_functional(gf.clone(), hf.clone()), &s).unwrap();
        let b = poisson_bracket(&gf, &bracket_functional(hf.clone(), ff.clone()), &s).unwrap();
        let c = poisson_bracket(&hf, &bracket_functional(ff, gf), &s).unwrap();
        let scale = a.norm() + b.norm() + c.norm();
        prop_assert!((a + b + c).norm() <= 1e-7 * (1.0 + scale));
    }

    #[test]
    fn velocity_ignores_phase_and_scale(
        x0 in -2.0..2.0f64,
        k in -2.0..2.0f64,
        theta in 0.0..std::f64::consts::TAU,
        scale in 1e-3..1e3f64,
    ) {
        let grid = GridSpec::periodic_1d(64, 20.0).unwrap();
        let psi = ComplexLatticeField::from_fn(grid, |x| {
            let d = x[0] - x0;
            Complex64::new(-d * d / 2.0, k * x[0]).exp()
        });
        let factor = Complex64::from_polar(scale, theta);
        let floor = 1e-6 * psi.max_abs().powi(2);
        for method in METHODS {
            let a = velocity_field(&psi, 1.0, &[1.0], method).unwrap();
            let b = velocity_field(&psi.scaled(factor), 1.0, &[1.0], method).unwrap();
            for s in 0..grid.sites() {
                if psi.values()[s].norm_sqr() < floor {
                    continue;
                }
                let (va, vb) = (a.components[0][s], b.components[0][s]);
                prop_assert!((va - vb).abs() <= 1e-12 * (1.0 + va.abs()));
            }
        }
    }

    #[test]
    fn csv_round_trips(rows in prop::collection::vec(prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 3), 1..20)) {
        let mut t = Table::new(&["a", "b", "c"]);
        for r in &rows {
            t.push(r.clone());
        }
        let parsed: Vec<Vec<f64>> = t
            .to_csv()
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
            .collect();
        prop_assert_eq!(parsed, rows);
    }

    #[test]
    fn scenario_round_trips(
        seed in any::<u64>(),
        points in 8usize..512,
        length in 1.0..100.0f64,
        center in -0.4..0.4f64,
        width in 0.1..3.0f64,
        dt in 1e-5..1e-2f64,
    ) {
        let mut s = Scenario { seed, ..Scenario::default() };
        s.grid.points = points;
        s.grid.length = length;
        s.integrator.dt = dt;
        s.initial = InitialState::Gaussian {
            packets: vec![Packet { center: vec![center * length], width, momentum: vec![0.5], weight: 1.0, phase: 0.0 }],
        };
        let back = parse_scenario(&s.to_toml().unwrap()).unwrap();
        prop_assert_eq!(back, s);
    }
}
