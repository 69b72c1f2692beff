//! Timing probe for the exhaustive oracle exploration.

use covparse::oracle::ReferenceExploration;
use covparse::treebank::GoldTree;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn main() {
    for n in 4..=5usize {
        let start = std::time::Instant::now();
        let mut trees = 0u64;
        let mut states = 0u64;
        let mut heads = vec![0usize; n];
        enumerate(&mut heads, 0, n, &mut |t: &GoldTree| {
            trees += 1;
            let r = ReferenceExploration::explore(t).unwrap();
            states += r.len() as u64;
        });
        println!(
            "n={n}: {trees} trees, {states} states, {:?}",
            start.elapsed()
        );
    }
    let mut rng = StdRng::seed_from_u64(1);
    for n in 6..=7usize {
        let start = std::time::Instant::now();
        let mut states = 0u64;
        for _ in 0..3 {
            let tree = random_tree(n, &mut rng);
            let r = ReferenceExploration::explore(&tree).unwrap();
            states += r.len() as u64;
        }
        println!("n={n}: 3 trees, {states} states, {:?}", start.elapsed());
    }
}

fn enumerate(heads: &mut Vec<usize>, d: usize, n: usize, f: &mut dyn FnMut(&GoldTree)) {
    if d == n {
        if let Ok(t) = GoldTree::from_heads(heads, "dep") {
            f(&t);
        }
        return;
    }
    for h in 0..=n {
        if h == d + 1 {
            continue;
        }
        heads[d] = h;
        enumerate(heads, d + 1, n, f);
    }
}

fn random_tree(n: usize, rng: &mut StdRng) -> GoldTree {
    loop {
        let heads: Vec<usize> = (1..=n)
            .map(|d| loop {
                let h = rng.gen_range(0..=n);
                if h != d {
                    break h;
                }
            })
            .collect();
        if let Ok(t) = GoldTree::from_heads(&heads, "dep") {
            return t;
        }
    }
}
