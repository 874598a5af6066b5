//! The exact solvers against slow, unpruned oracles built from the LP alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gds_core::boxdist::{box_exact, box_mm_exact, dis_coupling, distortion, hausdorff_on_set};
use gds_core::constructions::random_gds;
use gds_core::coupling::{random_coupling, ProgramMode, SetMassProgram};
use gds_core::model::gds_to_mm;
use gds_core::observable::dconc_exact;
use gds_core::scalar::sorted_distinct;
use gds_core::{Budget, CellSet, GeometricDataSet, Rational, Scalar};

type Gds = GeometricDataSet<Rational>;

fn one() -> Rational {
    Rational::from_int(1)
}

fn pair(seed: u64, max_n: usize, max_k: usize) -> (Gds, Gds) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || {
        random_gds(rng.random_range(1..=max_n), rng.random_range(1..=max_k), rng.random(), 1).unwrap()
    };
    (draw(), draw())
}

fn assignments(len: usize, choices: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|a| {
                (0..choices).map(move |c| {
                    let mut b = a.clone();
                    b.push(c);
                    b
                })
            })
            .collect();
    }
    out
}

/// `min_{u, v} min_k max(b_k, min_π max_E π(E_k))` with one LP per
/// assignment pair and level, no pruning.
fn dconc_oracle(x: &Gds, y: &Gds) -> Rational {
    let (fx, fy) = (x.features(), y.features());
    let (n, m) = (x.len(), y.len());
    let exceed = |f: &[Rational], g: &[Rational], level: &Rational| {
        CellSet::from_fn(n, m, |a, b| (f[a].clone() - &g[b]).abs() > *level).unwrap()
    };
    let mut levels = vec![Rational::from_int(0), one()];
    for f in fx.rows() {
        for g in fy.rows() {
            for fa in f {
                for gb in g {
                    levels.push((fa.clone() - gb).abs());
                }
            }
        }
    }
    let levels = sorted_distinct(levels);
    let mut best = one();
    for u in assignments(fx.len(), fy.len()) {
        for v in assignments(fy.len(), fx.len()) {
            for level in &levels {
                let mut sets: Vec<CellSet> = (0..fx.len()).map(|i| exceed(fx.row(i), fy.row(u[i]), level)).collect();
                sets.extend((0..fy.len()).map(|j| exceed(fx.row(v[j]), fy.row(j), level)));
                let program = SetMassProgram::new(
                    x.measure().weights().to_vec(),
                    y.measure().weights().to_vec(),
                    ProgramMode::MinimizeCommonCap(sets),
                )
                .unwrap();
                let cap = program.solve().unwrap().value;
                best = best.min(level.clone().max(cap));
            }
        }
    }
    best
}

fn max_mass_lp(x: &Gds, y: &Gds, set: &CellSet) -> Rational {
    SetMassProgram::new(
        x.measure().weights().to_vec(),
        y.measure().weights().to_vec(),
        ProgramMode::MaximizeMassOnSet(*set),
    )
    .unwrap()
    .solve()
    .unwrap()
    .value
}

fn all_sets(n: usize, m: usize) -> impl Iterator<Item = CellSet> {
    (0u128..1 << (n * m)).map(move |b| CellSet::from_bits(n, m, b).unwrap())
}

fn box_oracle(x: &Gds, y: &Gds) -> Rational {
    all_sets(x.len(), y.len())
        .map(|s| {
            let h = hausdorff_on_set(&s, x.features(), y.features());
            (one() - max_mass_lp(x, y, &s)).max(h.clone() + h)
        })
        .min()
        .unwrap()
}

#[test]
fn dconc_matches_unpruned_oracle() {
    for seed in 0..15 {
        let (x, y) = pair(seed, 3, 2);
        let exact = dconc_exact(&x, &y, &Budget::default()).unwrap().value;
        assert_eq!(exact, dconc_oracle(&x, &y), "seed {seed}");
    }
}

#[test]
fn box_matches_unpruned_oracle() {
    for seed in 100..115 {
        let (x, y) = pair(seed, 3, 2);
        let exact = box_exact(&x, &y, &Budget::default()).unwrap().value;
        assert_eq!(exact, box_oracle(&x, &y), "seed {seed}");
    }
}

#[test]
fn box_mm_matches_unpruned_oracle() {
    for seed in 200..215 {
        let (x, y) = pair(seed, 3, 2);
        let (mx, my) = (gds_to_mm(&x).unwrap(), gds_to_mm(&y).unwrap());
        let exact = box_mm_exact(&mx, &my, &Budget::default()).unwrap().value;
        let oracle = all_sets(x.len(), y.len())
            .map(|s| (one() - max_mass_lp(&x, &y, &s)).max(distortion(&s, mx.dist(), my.dist())))
            .min()
            .unwrap();
        assert_eq!(exact, oracle, "seed {seed}");
    }
}

#[test]
fn dis_coupling_matches_subset_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for seed in 300..330 {
        let (x, y) = pair(seed, 4, 2);
        let pi = random_coupling(x.measure().weights(), y.measure().weights(), &mut rng);
        let (value, set) = dis_coupling(&pi, x.metric(), y.metric(), &Budget::default()).unwrap();
        let oracle = all_sets(x.len(), y.len())
            .map(|s| (one() - pi.mass(&s)).max(distortion(&s, x.metric(), y.metric())))
            .min()
            .unwrap();
        assert_eq!(value, oracle, "seed {seed}");
        let witness = (one() - pi.mass(&set)).max(distortion(&set, x.metric(), y.metric()));
        assert_eq!(witness, value);
    }
}
