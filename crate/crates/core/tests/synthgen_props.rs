use std::fs;

use hetspec::hetgraph::{build_all_views, save_heterograph, validate_heterograph};
use hetspec::synthgen::{generate, SynthConfig};

/// Pearson statistic of a 2x2 contingency table.
fn chi_square_2x2(t: [[f64; 2]; 2]) -> f64 {
    let total: f64 = t.iter().flatten().sum();
    let rows = [t[0][0] + t[0][1], t[1][0] + t[1][1]];
    let cols = [t[0][0] + t[1][0], t[0][1] + t[1][1]];
    let mut x = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let e = rows[i] * cols[j] / total;
            x += (t[i][j] - e).powi(2) / e;
        }
    }
    x
}

#[test]
fn equal_probabilities_give_equal_densities() {
    // 1 degree of freedom, alpha = 0.01
    const CRITICAL: f64 = 6.634_896_601;
    for seed in 0..10 {
        let cfg = SynthConfig {
            p_in: 0.05,
            p_out: 0.05,
            seed,
            ..Default::default()
        };
        let g = generate(&cfg).unwrap();
        let k = cfg.k_classes;
        for rel in &g.edges {
            let mut within_edges = 0.0;
            let mut cross_edges = 0.0;
            for e in rel {
                if e.src % k == e.dst % k {
                    within_edges += 1.0;
                } else {
                    cross_edges += 1.0;
                }
            }
            let mut within_pairs = 0.0;
            let mut cross_pairs = 0.0;
            for i in 0..cfg.n_target {
                for a in 0..cfg.aux_size {
                    if i % k == a % k {
                        within_pairs += 1.0;
                    } else {
                        cross_pairs += 1.0;
                    }
                }
            }
            let x = chi_square_2x2([
                [within_edges, within_pairs - within_edges],
                [cross_edges, cross_pairs - cross_edges],
            ]);
            assert!(x < CRITICAL, "seed {seed}: chi-square {x}");
        }
    }
}

#[test]
fn planted_structure_is_denser_within() {
    let cfg = SynthConfig::default();
    let g = generate(&cfg).unwrap();
    let within = g.edges[0].iter().filter(|e| e.src % 3 == e.dst % 3).count();
    let cross = g.edges[0].len() - within;
    // expected 1500 vs 300
    assert!(within > 3 * cross);
}

#[test]
fn generated_graphs_are_valid_with_nonempty_views() {
    for seed in 0..5 {
        let g = generate(&SynthConfig { seed, ..Default::default() }).unwrap();
        assert!(!validate_heterograph(&g).has_violations());
        for v in build_all_views(&g).unwrap() {
            assert!(v.num_edges() > 0);
        }
    }
}

#[test]
fn same_seed_gives_byte_identical_directory() {
    let cfg = SynthConfig { seed: 42, ..Default::default() };
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    save_heterograph(&generate(&cfg).unwrap(), d1.path(), None).unwrap();
    save_heterograph(&generate(&cfg).unwrap(), d2.path(), None).unwrap();
    let mut n = 0;
    for entry in fs::read_dir(d1.path()).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(
            fs::read(d1.path().join(&name)).unwrap(),
            fs::read(d2.path().join(&name)).unwrap()
        );
        n += 1;
    }
    assert_eq!(n, fs::read_dir(d2.path()).unwrap().count());
}
