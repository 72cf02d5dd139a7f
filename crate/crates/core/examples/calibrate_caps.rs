//! Prints the largest ratios behind the caps in `inequalities::caps`.

use rieszgrad::grid::{Grid, GridSpec};
use rieszgrad::inequalities::*;
use rieszgrad::weights::{power_weight, Weight};

fn main() {
    let mut worst = [0.0f64; 4];
    for (n, points) in [(1, 256), (2, 64)] {
        let g = Grid::new(GridSpec::centered(n, points, 4.0)).unwrap();
        let centre = vec![0.0; n];
        for seed in 0..4 {
            let fam = SampleFamily::standard(&g, seed, 8).unwrap();
            for s in [0.25, 0.5, 0.75] {
                for p in [1.5, 2.0, 3.0] {
                    for alpha in [0.0, 0.5] {
                        let w = if alpha == 0.0 {
                            Weight::unit(&g, p).unwrap()
                        } else {
                            power_weight(&g, &centre, alpha, p).unwrap()
                        };
                        let eq = equivalence_report(&fam, s, p, Some(&w)).unwrap();
                        worst[0] = worst[0].max(eq.max);
                        for (r, t) in [(0.0, 1.0), (0.0, 0.9), (0.1, 0.95)] {
                            let gn = gn_report(&fam, r, s, t, p, Some(&w)).unwrap();
                            worst[1] = worst[1].max(gn.max);
                        }
                        if s * p < n as f64 {
                            let so = sobolev_report(&fam, s, p, Some(&w)).unwrap();
                            worst[2] = worst[2].max(so.max);
                        }
                        for t in [0.0, 0.5 * s] {
                            let em = embedding_report(&fam, t, s, p, Some(&w)).unwrap();
                            worst[3] = worst[3].max(em.max);
                        }
                    }
                }
            }
        }
    }
    println!("equivalence          {:.4}", worst[0]);
    println!("gagliardo_nirenberg  {:.4}", worst[1]);
    println!("sobolev              {:.4}", worst[2]);
    println!("embedding            {:.4}", worst[3]);
}
