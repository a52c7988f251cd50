use avgtrack::graph::{
    incidence_matrix, lambda2, laplacian, laplacian_spectrum, Graph, GraphError,
};
use avgtrack::matrix::Matrix;
use avgtrack::numerics::NumericsConfig;
use proptest::prelude::*;

fn graph_strategy(max_n: usize) -> impl Strategy<Value = Graph> {
    (1..=max_n).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        let count = pairs.len();
        proptest::collection::vec(any::<bool>(), count).prop_map(move |keep| {
            let edges = pairs.iter().zip(&keep).filter(|(_, &k)| k).map(|(&e, _)| e);
            Graph::new(n, edges).unwrap()
        })
    })
}

fn connected_strategy(max_n: usize) -> impl Strategy<Value = Graph> {
    graph_strategy(max_n).prop_filter("connected with two or more nodes", |g| {
        g.n_nodes() >= 2 && g.is_connected()
    })
}

proptest! {
    #[test]
    fn laplacian_rows_sum_to_zero(g in graph_strategy(8)) {
        let l: Matrix<i64> = laplacian(&g);
        for i in 0..g.n_nodes() {
            prop_assert_eq!(l.row(i).iter().sum::<i64>(), 0);
        }
    }

    #[test]
    fn laplacian_is_incidence_gram(g in graph_strategy(8)) {
        let d: Matrix<f64> = incidence_matrix(&g);
        let l: Matrix<f64> = laplacian(&g);
        prop_assert!((&l - &(&d * &d.transpose())).max_abs() <= 1e-12);
    }

    #[test]
    fn edge_order_does_not_matter(g in graph_strategy(7)) {
        let reversed = Graph::new(g.n_nodes(), g.edges().iter().rev().map(|&(i, j)| (j, i))).unwrap();
        let a: Matrix<f64> = laplacian(&g);
        let b: Matrix<f64> = laplacian(&reversed);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn spectrum_is_nonnegative_and_counts_components(g in graph_strategy(8)) {
        let spec: Vec<f64> = laplacian_spectrum(&g, &NumericsConfig::default()).unwrap();
        prop_assert!(spec.iter().all(|&v| v >= -1e-10));
        let zeros = spec.iter().filter(|v| v.abs() <= 1e-8).count();
        prop_assert_eq!(zeros, g.component_count());
    }

    #[test]
    fn rayleigh_quotient_bounded_by_lambda2(
        g in connected_strategy(8),
        raw in proptest::collection::vec(-1.0f64..1.0, 8),
    ) {
        let n = g.n_nodes();
        let mean = raw[..n].iter().sum::<f64>() / n as f64;
        let x: Vec<f64> = raw[..n].iter().map(|v| v - mean).collect();
        let xx: f64 = x.iter().map(|v| v * v).sum();
        prop_assume!(xx > 1e-6);
        let l: Matrix<f64> = laplacian(&g);
        let l2: f64 = lambda2(&g, &NumericsConfig::default()).unwrap();
        prop_assert!(l.quadratic_form(&x) >= (l2 - 1e-8) * xx);
    }

    #[test]
    fn lambda2_rejects_disconnected(g in graph_strategy(8)) {
        let r = lambda2::<f64>(&g, &NumericsConfig::default());
        if g.n_nodes() >= 2 && !g.is_connected() {
            let rejected = matches!(r, Err(GraphError::NotConnected { .. }));
            prop_assert!(rejected);
        }
    }
}

#[test]
fn known_algebraic_connectivity() {
    let cfg = NumericsConfig::default();
    let cases = [
        (Graph::path(2), 2.0),
        (Graph::complete(3), 3.0),
        (Graph::ring(6), 1.0),
        (Graph::complete(5), 5.0),
    ];
    for (g, want) in cases {
        let got: f64 = lambda2(&g, &cfg).unwrap();
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }
}
