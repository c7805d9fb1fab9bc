use islm_core::io::{fmt_f64, trajectory_table, Table};
use islm_core::model::fd_partials;
use islm_core::*;
use proptest::prelude::*;

fn kaldor_ms(m_s: f64) -> ModelConfig {
    ModelConfig { m_s, ..ModelConfig::default_kaldor() }
}

/// Linear money market and an investment function with constant slope below
/// the saving rate: IS falls, LM rises.
fn monotone(i0: f64, slope: f64, s: f64, h: f64, g: f64, l: f64, d: f64, m_s: f64) -> ModelConfig {
    let mut c = ModelConfig::default_kaldor();
    c.regime = Regime::OriginalDegenerate;
    c.invest.i0 = i0;
    c.invest.a = 0.0;
    c.invest.linear_slope = slope;
    c.invest.h = h;
    c.save.s = s;
    c.save.g = g;
    c.demand.l = l;
    c.demand.d = d;
    c.supply.m = 0.0;
    c.supply.e = 0.0;
    c.mp = 0.0;
    c.pi_e = 0.0;
    c.m_s = m_s;
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigenvalues_sum_and_multiply(a in -5.0..5.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64, d in -5.0..5.0f64) {
        let j = Jacobian2::new(a, b, c, d);
        let e = eigen2(&j);
        let sum = e[0] + e[1];
        let prod = e[0] * e[1];
        let scale = 1.0 + j.trace.abs() + j.det.abs();
        prop_assert!((sum.re - j.trace).abs() < 1e-9 * scale && sum.im.abs() < 1e-9 * scale);
        prop_assert!((prod.re - j.det).abs() < 1e-9 * scale && prod.im.abs() < 1e-9 * scale);
    }

    #[test]
    fn refined_equilibria_satisfy_trace_and_det(m_s in 1.0..2.4f64) {
        let cfg = kaldor_ms(m_s);
        for e in find_equilibria(&cfg, &GridSpec::default()).unwrap() {
            let sum = e.eigs[0] + e.eigs[1];
            let prod = e.eigs[0] * e.eigs[1];
            prop_assert!((sum.re - e.jac.trace).abs() < 1e-9);
            prop_assert!((prod.re - e.jac.det).abs() < 1e-9);
            prop_assert!(cfg.goods_excess(e.state.y(), e.state.r()).abs() < 1e-10);
            prop_assert!(cfg.money_excess(e.state.y(), e.state.r()).abs() < 1e-10);
        }
    }

    #[test]
    fn common_rate_scaling_keeps_kinds(m_s in 1.0..2.4f64, k in 0.1..10.0f64) {
        let cfg = kaldor_ms(m_s);
        let scaled = ModelConfig { alpha: cfg.alpha * k, beta: cfg.beta * k, ..cfg.clone() };
        let w = GridSpec::default();
        let a = find_equilibria(&cfg, &w).unwrap();
        let b = find_equilibria(&scaled, &w).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.kind, y.kind);
            for (ex, ey) in x.eigs.iter().zip(&y.eigs) {
                prop_assert!((ex * k - ey).norm() <= 1e-9 * (1.0 + ey.norm()));
            }
        }
    }

    #[test]
    fn monotone_curves_give_attractors(
        i0 in 1.0..6.0f64, slope in 0.0..0.2f64, s in 0.25..0.5f64, h in 0.1..0.6f64,
        g in 0.05..0.3f64, l in 0.1..0.6f64, d in 0.1..0.6f64, m_s in 0.1..2.0f64,
    ) {
        let cfg = monotone(i0, slope, s, h, g, l, d, m_s);
        let w = GridSpec::default();
        let rep = verify_conditions(&cfg, &w).unwrap();
        prop_assume!(rep.passed());
        match find_equilibria(&cfg, &w) {
            Ok(eqs) => {
                for e in eqs {
                    prop_assert!(e.kind.is_attractor(), "{:?}", e.kind);
                }
            }
            Err(IslmError::NoEquilibrium) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn finite_differences_match_partials(y in 0.5..24.0f64, r in 0.5..7.5f64, three in any::<bool>()) {
        let cfg = if three { ModelConfig::default_three_phase() } else { ModelConfig::default_kaldor() };
        let p = cfg.partials(y, r);
        let f = fd_partials(&cfg, y, r);
        for (a, b) in [(p.i_y, f.i_y), (p.i_r, f.i_r), (p.s_y, f.s_y), (p.s_r, f.s_r), (p.l_y, f.l_y), (p.l_r, f.l_r), (p.m_y, f.m_y), (p.m_r, f.m_r)] {
            prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn demand_slope_in_short_rate_equals_slope_in_long_rate(y in 0.0..25.0f64, i in 0.0..8.0f64) {
        let cfg = ModelConfig::default_three_phase();
        let dm = &cfg.demand;
        // dL/di_S written directly in the short rate
        let l_i = -dm.d - dm.kappa_l * (i - dm.p) * (i - dm.q);
        let r = i + cfg.mp - cfg.pi_e;
        let p = cfg.partials(y, r);
        prop_assert!((p.l_r - l_i).abs() < 1e-10);
    }

    #[test]
    fn degenerate_field_is_plain_is_lm(y in 0.0..25.0f64, r in 0.0..8.0f64, m_s in 0.1..3.0f64) {
        let cfg = monotone(3.0, 0.1, 0.3, 0.4, 0.2, 0.45, 0.3, m_s);
        let v = vector_field(&State::new(y, r).unwrap(), &cfg);
        let i = 3.0 + 0.1 * y - 0.4 * r;
        let s = 0.3 * y + 0.2 * r;
        let l = 0.45 * y - 0.3 * r;
        prop_assert!((v.dy_dt - cfg.alpha * (i - s)).abs() < 1e-12);
        prop_assert!((v.dr_dt - cfg.epsilon * cfg.beta * (l - m_s)).abs() < 1e-12);
    }

    #[test]
    fn three_phase_sign_pattern_holds_for_every_income(y in 0.0..25.0f64) {
        let cfg = ModelConfig::default_three_phase();
        let (p, q) = (cfg.demand.p, cfg.demand.q);
        let slope = |i: f64| cfg.partials(y, i + cfg.mp - cfg.pi_e).money_r();
        prop_assert!(slope(p - 0.5) < 0.0);
        prop_assert!(slope(p).abs() < 1e-12);
        prop_assert!(slope(0.5 * (p + q)) > 0.0);
        prop_assert!(slope(q).abs() < 1e-12);
        prop_assert!(slope(q + 0.5) < 0.0);
    }

    #[test]
    fn isocline_samples_lie_on_the_curve(shift in -0.5..0.5f64, m_s in 1.0..2.4f64) {
        let mut cfg = kaldor_ms(m_s);
        cfg.invest.i0 += shift;
        let w = GridSpec::default();
        for which in [Curve::IS, Curve::LM] {
            let c = trace_isocline(which, &cfg, &w).unwrap();
            prop_assert!(c.max_residual(&cfg) <= 1e-8);
        }
    }

    #[test]
    fn config_json_round_trip(
        alpha in 0.1..5.0f64, eps in 1e-5..1.0f64, m_s in 0.01..5.0f64, i0 in -3.0..6.0f64,
        b in 0.01..2.0f64, kl in 0.0..1.0f64, e in 0.0..1.0f64, three in any::<bool>(),
    ) {
        let mut cfg = if three { ModelConfig::default_three_phase() } else { ModelConfig::default_kaldor() };
        cfg.alpha = alpha;
        cfg.epsilon = eps;
        cfg.m_s = m_s;
        cfg.invest.i0 = i0;
        cfg.invest.b = b;
        cfg.demand.kappa_l = kl;
        cfg.supply.e = e;
        let back = ModelConfig::from_json(&cfg.to_json_pretty()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn trajectory_csv_round_trip(y in 1.0..20.0f64, r in 0.5..3.0f64) {
        let cfg = ModelConfig::default_kaldor().with_epsilon(0.1);
        let tr = integrate(&State::new(y, r).unwrap(), &cfg, 20.0, &StepControl::default()).unwrap();
        let t = Table::parse(&trajectory_table(&tr).to_csv()).unwrap();
        let ts = t.column_f64("t").unwrap();
        let ys = t.column_f64("y").unwrap();
        let rs = t.column_f64("r").unwrap();
        prop_assert_eq!(ts.len(), tr.samples.len());
        for (k, s) in tr.samples.iter().enumerate() {
            prop_assert_eq!(ts[k].to_bits(), s.t.to_bits());
            prop_assert_eq!(ys[k].to_bits(), s.y.to_bits());
            prop_assert_eq!(rs[k].to_bits(), s.r.to_bits());
        }
    }

    #[test]
    fn shortest_decimal_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}
