use epiprotect::nimfa::{
    core_infection, residual, solve_general, v_bipartite, v_community, v_complete, Adjacency, MultiCommunitySpec,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use proptest::prelude::*;

const TAUS: [f64; 6] = [0.1, 0.5, 2.0 / 3.0, 1.0, 1.5, 5.0];

/// Root of `v = 1 - 1/(1 + tau ((n-1) v + u))` on `(0, 1]` by bisection.
fn community_by_bisection(n: usize, tau: f64, u: f64) -> f64 {
    // numerator of `s/(1+s) - v`; avoids cancellation near v = 0
    let f = |v: f64| {
        let s = tau * ((n as f64 - 1.0) * v + u);
        s - v * (1.0 + s)
    };
    // the grid has no positive root below 1e-9
    let lo = 1e-9;
    if f(lo) <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (lo, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest violation of the steady-state equations on the multi-community
/// graph with community-specific rates. Node 0 is the core.
fn heterogeneous_residual(sizes: &[usize], taus: &[f64], v: &[f64]) -> f64 {
    let adj = Adjacency::multi_community(sizes);
    let mut community = vec![usize::MAX];
    for (m, &s) in sizes.iter().enumerate() {
        community.extend(std::iter::repeat_n(m, s));
    }
    (0..adj.node_count())
        .map(|i| {
            let pressure: f64 = adj
                .neighbors(i)
                .iter()
                .map(|&j| {
                    let m = if i == 0 { community[j] } else { community[i] };
                    taus[m] * v[j]
                })
                .sum();
            (v[i] - (1.0 - 1.0 / (1.0 + pressure))).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn complete_closed_form_matches_solver() {
    for n in 2..=30 {
        for &tau in &TAUS {
            let s = solve_general(&Adjacency::complete(n), tau, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            let exact = v_complete(n, tau);
            for &v in &s.v {
                assert!((v - exact).abs() < 1e-8, "K_{n}, tau {tau}: {v} vs {exact}");
            }
        }
    }
}

#[test]
fn bipartite_closed_form_matches_solver() {
    for m in 1..=15 {
        for n in 1..=15 {
            for &tau in &TAUS {
                let s = solve_general(&Adjacency::complete_bipartite(m, n), tau, DEFAULT_TOL, DEFAULT_MAX_ITER)
                    .unwrap();
                let (vm, vn) = v_bipartite(m, n, tau);
                assert!(s.v[..m].iter().all(|v| (v - vm).abs() < 1e-8), "K_{m},{n} tau {tau}");
                assert!(s.v[m..].iter().all(|v| (v - vn).abs() < 1e-8), "K_{m},{n} tau {tau}");
            }
        }
    }
}

#[test]
fn closed_forms_satisfy_the_steady_state_equations() {
    for &tau in &TAUS {
        for n in 2..=20 {
            let v = vec![v_complete(n, tau); n];
            assert!(residual(&Adjacency::complete(n), tau, &v) < 1e-9);
        }
        for (m, n) in [(1, 1), (2, 5), (3, 3), (7, 11)] {
            let (vm, vn) = v_bipartite(m, n, tau);
            let mut v = vec![vm; m];
            v.extend(vec![vn; n]);
            assert!(residual(&Adjacency::complete_bipartite(m, n), tau, &v) < 1e-9);
        }
    }
}

#[test]
fn listed_closed_form_values() {
    assert_eq!(v_complete(2, 0.4), 0.0);
    assert!((v_complete(8, 2.0 / 3.0) - 11.0 / 14.0).abs() < 1e-15);
    assert!((v_complete(15, 2.0 / 3.0) - 25.0 / 28.0).abs() < 1e-15);
    assert_eq!(v_bipartite(1, 1, 0.5), (0.0, 0.0));
    let (a, b) = v_bipartite(3, 3, 2.0 / 3.0);
    assert!((a - 0.5).abs() < 1e-15 && (b - 0.5).abs() < 1e-15);
    let (a, b) = v_bipartite(2, 5, 1.0);
    assert!((a - 0.75).abs() < 1e-15 && (b - 0.6).abs() < 1e-15);
    assert!((v_community(10, 0.5, 0.0) - 7.0 / 9.0).abs() < 1e-15);
    assert!((v_community(1, 1.0, 0.5) - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn community_root_matches_bisection() {
    assert!((v_community(10, 0.5, 0.5) - community_by_bisection(10, 0.5, 0.5)).abs() < 1e-12);
    assert!((v_community(10, 0.5, 0.5) - 0.792338186).abs() < 1e-9);
    for n in 1..=40 {
        for &tau in &TAUS {
            for k in 0..=10 {
                let u = k as f64 / 10.0;
                let exact = community_by_bisection(n, tau, u);
                let v = v_community(n, tau, u);
                assert!((v - exact).abs() < 1e-10, "n {n} tau {tau} u {u}: {v} vs {exact}");
            }
        }
    }
}

#[test]
fn core_composition() {
    let spec = MultiCommunitySpec::new(vec![10], vec![0.5]).unwrap();
    assert_eq!(core_infection(&spec, &[0], 0.5), 0.0);
    let v = community_by_bisection(10, 0.5, 0.5);
    let expected = 1.0 - 1.0 / (1.0 + 0.5 * 10.0 * v);
    assert!((core_infection(&spec, &[10], 0.5) - expected).abs() < 1e-12);
    assert!((expected - 0.798455).abs() < 1e-6);
}

#[test]
fn multi_community_fixed_point_satisfies_steady_state() {
    let cases: [(&[usize], &[f64]); 3] = [
        (&[10, 15], &[0.5, 1.5]),
        (&[10, 15, 12, 8, 9, 4, 15], &[0.5, 1.5, 1.0, 1.2, 1.4, 0.8, 0.1]),
        (&[3, 1, 6], &[2.0, 0.7, 0.3]),
    ];
    for (sizes, taus) in cases {
        let spec = MultiCommunitySpec::new(sizes.to_vec(), taus.to_vec()).unwrap();
        let mut u = 1.0;
        for _ in 0..100_000 {
            let next = core_infection(&spec, sizes, u);
            let done = (next - u).abs() < 1e-15;
            u = next;
            if done {
                break;
            }
        }
        let mut v = vec![u];
        for (&s, &tau) in sizes.iter().zip(taus) {
            v.extend(std::iter::repeat_n(v_community(s, tau, u), s));
        }
        let r = heterogeneous_residual(sizes, taus, &v);
        assert!(r < 1e-9, "sizes {sizes:?}: residual {r}");
    }
}

#[test]
fn core_infection_is_monotone_in_counts() {
    let spec = MultiCommunitySpec::new(vec![6, 5], vec![0.8, 1.3]).unwrap();
    for k in 0..=10 {
        let u = k as f64 / 10.0;
        for a in 0..=6 {
            for b in 0..=5 {
                let base = core_infection(&spec, &[a, b], u);
                assert!((0.0..1.0).contains(&base));
                if a < 6 {
                    assert!(core_infection(&spec, &[a + 1, b], u) >= base);
                }
                if b < 5 {
                    assert!(core_infection(&spec, &[a, b + 1], u) >= base);
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn complete_monotone_and_in_range(n in 0usize..200, tau in 0.01f64..10.0, dtau in 0.0f64..1.0) {
        let v = v_complete(n, tau);
        prop_assert!((0.0..1.0).contains(&v));
        prop_assert!(v_complete(n + 1, tau) >= v);
        prop_assert!(v_complete(n, tau + dtau) >= v);
    }

    #[test]
    fn community_monotone_and_reduces(n in 0usize..100, tau in 0.01f64..5.0, u in 0.0f64..1.0, du in 0.0f64..0.5) {
        let v = v_community(n, tau, u);
        prop_assert!((0.0..1.0).contains(&v));
        prop_assert!(v_community(n, tau, (u + du).min(1.0)) >= v - 1e-15);
        prop_assert!(v_community(n + 1, tau, u) >= v - 1e-15);
        prop_assert_eq!(v_community(n, tau, 0.0), v_complete(n, tau));
    }

    #[test]
    fn bipartite_in_range(m in 0usize..50, n in 0usize..50, tau in 0.01f64..5.0) {
        let (a, b) = v_bipartite(m, n, tau);
        prop_assert!((0.0..1.0).contains(&a) && (0.0..1.0).contains(&b));
    }

    #[test]
    fn solver_on_random_graphs(edges in proptest::collection::vec((0usize..12, 0usize..12), 0..40), tau in 0.05f64..3.0) {
        let edges: Vec<_> = edges.into_iter().filter(|(i, j)| i != j).collect();
        let adj = Adjacency::from_edges(12, &edges).unwrap();
        let s = solve_general(&adj, tau, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        prop_assert!(s.v.iter().all(|v| (0.0..1.0).contains(v)));
        prop_assert!(s.residual < 1e-9);
        // isolated nodes never get infected
        for i in 0..12 {
            if adj.neighbors(i).is_empty() {
                prop_assert_eq!(s.v[i], 0.0);
            }
        }
    }
}
