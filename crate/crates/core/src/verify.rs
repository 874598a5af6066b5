//! Randomised property suite.
//!
//! Each registered property runs on `trials` instances drawn from a seed
//! derived from the suite seed, the property index and the trial index, so a
//! report depends only on `(seed, trials)`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boxdist::{
    box_at_coupling, box_exact, box_mm_exact, dis_coupling, distortion, distortion_certificate,
    lip1_witness,
};
use crate::cells::CellSet;
use crate::constructions::{quotient_gds, random_gds};
use crate::coupling::{coupling_prohorov, random_coupling};
use crate::error::Result;
use crate::exec::{self, Budget};
use crate::metrics::{ky_fan, observable_diameter, prohorov, prohorov_brute_force, prohorov_of_pushforwards};
use crate::model::{gds_to_mm, is_lipschitz, sample_lip1, GeometricDataSet};
use crate::observable::{dconc_at_coupling, dconc_bounds, dconc_exact, dconc_heuristic, lip1_dataset, HeuristicOptions};
use crate::order::{check_domination, check_isomorphism, is_domination, quotient_universal_check, reduced_target};
use crate::scalar::{Rational, Scalar, Zero};

type Gds = GeometricDataSet<Rational>;

/// Outcome of one trial: `Ok` on pass, otherwise a description of the
/// instance.
type Verdict = std::result::Result<(), String>;

struct Property {
    name: &'static str,
    /// Failures of asserted properties fail the suite; empirical ones are
    /// only reported.
    asserted: bool,
    check: fn(&mut ChaCha8Rng, &Budget) -> (usize, Result<Verdict>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub trial: usize,
    /// Total point and feature count of the instance.
    pub size: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyReport {
    pub name: &'static str,
    pub asserted: bool,
    pub passed: usize,
    pub failed: usize,
    pub minimal_failure: Option<Failure>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteReport {
    pub seed: u64,
    pub trials: usize,
    pub properties: Vec<PropertyReport>,
}

impl SuiteReport {
    /// No asserted property failed.
    pub fn passed(&self) -> bool {
        self.properties.iter().all(|p| !p.asserted || p.failed == 0)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "property,kind,passed,failed,minimal_failure")?;
        for p in &self.properties {
            let kind = if p.asserted { "asserted" } else { "empirical" };
            let min = p
                .minimal_failure
                .as_ref()
                .map(|m| format!("trial {} size {}: {}", m.trial, m.size, m.detail))
                .unwrap_or_default();
            writeln!(f, "{},{},{},{},\"{}\"", p.name, kind, p.passed, p.failed, min.replace('"', "'"))?;
        }
        Ok(())
    }
}

fn draw(rng: &mut ChaCha8Rng, max_n: usize, max_k: usize) -> Result<Gds> {
    let n = rng.random_range(1..=max_n);
    let k = rng.random_range(1..=max_k);
    random_gds(n, k, rng.random(), 1)
}

fn size(xs: &[&Gds]) -> usize {
    xs.iter().map(|x| x.len() + x.features().len()).sum()
}

fn describe(xs: &[&Gds]) -> String {
    xs.iter()
        .map(|x| {
            let rows: Vec<String> = x
                .features()
                .rows()
                .iter()
                .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "))
                .collect();
            let w: Vec<String> = x.measure().weights().iter().map(|v| v.to_string()).collect();
            format!("w=[{}] F=[{}]", w.join(" "), rows.join("; "))
        })
        .collect::<Vec<_>>()
        .join(" | ")
}

fn verdict(ok: bool, xs: &[&Gds], what: impl FnOnce() -> String) -> Verdict {
    if ok {
        Ok(())
    } else {
        Err(format!("{}; {}", what(), describe(xs)))
    }
}

/// Runs a check on freshly drawn instances, reporting their size even when
/// the check errors.
fn with_instances(
    rng: &mut ChaCha8Rng,
    count: usize,
    max_n: usize,
    max_k: usize,
    body: impl FnOnce(&[&Gds], &mut ChaCha8Rng) -> Result<Verdict>,
) -> (usize, Result<Verdict>) {
    let drawn: Result<Vec<Gds>> = (0..count).map(|_| draw(rng, max_n, max_k)).collect();
    match drawn {
        Err(e) => (0, Err(e)),
        Ok(xs) => {
            let refs: Vec<&Gds> = xs.iter().collect();
            (size(&refs), body(&refs, rng))
        }
    }
}

fn le(a: &Rational, b: &Rational) -> bool {
    a <= b
}

fn random_set(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Result<CellSet> {
    let bits: u128 = rng.random::<u128>() & crate::cells::low_bits(n * m);
    let bits = if bits == 0 { 1 } else { bits };
    CellSet::from_bits(n, m, bits)
}

fn registry() -> Vec<Property> {
    vec![
        Property {
            name: "kyfan_dominates_prohorov_of_pushforwards",
            asserted: true,
            check: |rng, _| {
                with_instances(rng, 1, 4, 3, |xs, rng| {
                    let x = xs[0];
                    let (i, j) = (rng.random_range(0..x.features().len()), rng.random_range(0..x.features().len()));
                    let (f, g) = (x.features().row(i), x.features().row(j));
                    let w = x.measure().weights();
                    let kf = ky_fan(w, f, g)?;
                    let p = prohorov_of_pushforwards(w, f, g)?;
                    Ok(verdict(le(&p, &kf), xs, || format!("KF {kf} < P {p}")))
                })
            },
        },
        Property {
            name: "prohorov_routes_agree",
            asserted: true,
            check: |rng, _| {
                with_instances(rng, 1, 5, 2, |xs, rng| {
                    let x = xs[0];
                    let n = x.len();
                    let mu = x.measure().weights();
                    let nu = random_gds::<Rational>(n, 1, rng.random(), 1)?.measure().weights().to_vec();
                    let a = prohorov_brute_force(mu, &nu, x.metric())?;
                    let b = prohorov(mu, &nu, x.metric())?;
                    Ok(verdict(a == b, xs, || format!("brute {a} vs flow {b}")))
                })
            },
        },
        Property {
            name: "observable_diameter_monotone",
            asserted: true,
            check: |rng, _| {
                with_instances(rng, 1, 5, 3, |xs, rng| {
                    let a = Rational::from_ratio(rng.random_range(0..=8), 8);
                    let b = Rational::from_ratio(rng.random_range(0..=8), 8);
                    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                    let (u, v) = (observable_diameter(xs[0], &lo)?, observable_diameter(xs[0], &hi)?);
                    Ok(verdict(v <= u, xs, || format!("od({lo}) = {u} < od({hi}) = {v}")))
                })
            },
        },
        Property {
            name: "dconc_bracketed_by_bounds",
            asserted: true,
            check: |rng, budget| {
                with_instances(rng, 2, 3, 2, |xs, rng| {
                    let exact = dconc_exact(xs[0], xs[1], budget)?.value;
                    let bounds = dconc_bounds(xs[0], xs[1], rng.random())?;
                    Ok(verdict(bounds.lower <= exact && exact <= bounds.upper, xs, || {
                        format!("{} <= {exact} <= {} fails", bounds.lower, bounds.upper)
                    }))
                })
            },
        },
        Property {
            name: "dconc_heuristic_matches_exact",
            asserted: false,
            check: |rng, budget| {
                with_instances(rng, 2, 3, 2, |xs, rng| {
                    let exact = dconc_exact(xs[0], xs[1], budget)?.value;
                    let h = dconc_heuristic(xs[0], xs[1], &HeuristicOptions::with_seed(rng.random()))?.value;
                    Ok(verdict(h == exact, xs, || format!("heuristic {h} vs exact {exact}")))
                })
            },
        },
        Property {
            name: "dconc_triangle",
            asserted: true,
            check: |_rng, budget| {
                with_instances(_rng, 3, 3, 2, |xs, _| {
                    let ab = dconc_exact(xs[0], xs[1], budget)?.value;
                    let bc = dconc_exact(xs[1], xs[2], budget)?.value;
                    let ac = dconc_exact(xs[0], xs[2], budget)?.value;
                    Ok(verdict(ac <= ab.clone() + &bc, xs, || format!("{ac} > {ab} + {bc}")))
                })
            },
        },
        Property {
            name: "dconc_below_box",
            asserted: true,
            check: |rng, budget| {
                with_instances(rng, 2, 3, 2, |xs, _| {
                    let d = dconc_exact(xs[0], xs[1], budget)?.value;
                    let b = box_exact(xs[0], xs[1], budget)?.value;
                    Ok(verdict(d <= b, xs, || format!("dconc {d} > box {b}")))
                })
            },
        },
        Property {
            name: "box_symmetric",
            asserted: true,
            check: |rng, budget| {
                with_instances(rng, 2, 3, 2, |xs, _| {
                    let a = box_exact(xs[0], xs[1], budget)?.value;
                    let b = box_exact(xs[1], xs[0], budget)?.value;
                    Ok(verdict(a == b, xs, || format!("{a} vs {b}")))
                })
            },
        },
        Property {
            name: "box_triangle",
            asserted: true,
            check: |rng, budget| {
                with_instances(rng, 3, 3, 2, |xs, _| {
                    let ab = box_exact(xs[0], xs[1], budget)?.value;
                    let bc = box_exact(xs[1], xs[2], budget)?.value;
                    let ac = box_exact(xs[0], xs[2], budget)?.value;
                    Ok(verdict(ac <= ab.clone() + &bc, xs, || format!("{ac} > {ab} + {bc}")))
                })
            },
        },
        Property {
            name: "distortion_below_box_at_coupling",
            asserted: true,
            check: |rng, budget| {
                with_instances(rng, 2, 3, 2, |xs, rng| {
                    let (x, y) = (xs[0], xs[1]);
                    let pi = random_coupling(x.measure().weights(), y.measure().weights(), rng);
                    let (dis, _) = dis_coupling(&pi, x.metric(), y.metric(), budget)?;
                    let (bx, _) = box_at_coupling(&pi, x.features(), y.features(), budget)?;
                    Ok(verdict(dis <= bx, xs, || format!("dis {dis} > box {bx}")))
                })
            },
        },
        Property {
            name: "lip1_witness_gap",
            asserted: true,
            check: |rng, _| {
                with_instances(rng, 2, 3, 2, |xs, rng| {
                    let (x, y) = (xs[0], xs[1]);
                    let set = random_set(rng, x.len(), y.len())?;
                    let half = distortion(&set, x.metric(), y.metric()).half();
                    let family = sample_lip1(&gds_to_mm(x)?, 4, rng.random());
                    for f in family.rows() {
                        let g = lip1_witness(&set, f, x.metric(), y.metric())?;
                        let gap = crate::metrics::sup_on_cells(&set, f, &g);
                        if !is_lipschitz(&g, y.metric()) || gap > half {
                            return Ok(Err(format!("gap {gap} vs {half}; {}", describe(xs))));
                        }
                    }
                    Ok(Ok(()))
                })
            },
        },
        Property {
            name: "distortion_certificate_favorable",
            asserted: true,
            check: |rng, _| {
                with_instances(rng, 2, 3, 2, |xs, rng| {
                    let set = random_set(rng, xs[0].len(), xs[1].len())?;
                    let cert = distortion_certificate(&set, xs[0].metric(), xs[1].metric())?;
                    Ok(verdict(!cert.favorable || cert.is_tight(), xs, || format!("{cert:?}")))
                })
            },
        },
        Property {
            name: "distortion_certificate_unfavorable",
            asserted: false,
            check: |rng, _| {
                with_instances(rng, 2, 3, 2, |xs, rng| {
                    let set = random_set(rng, xs[0].len(), xs[1].len())?;
                    let cert = distortion_certificate(&set, xs[0].metric(), xs[1].metric())?;
                    Ok(verdict(cert.favorable || cert.is_tight(), xs, || format!("{cert:?}")))
                })
            },
        },
        Property {
            name: "box_coupling_continuity",
            asserted: true,
            check: |rng, budget| {
                with_instances(rng, 2, 3, 2, |xs, rng| {
                    let (x, y) = (xs[0], xs[1]);
                    let (mu, nu) = (x.measure().weights(), y.measure().weights());
                    let (pi, rho) = (random_coupling(mu, nu, rng), random_coupling(mu, nu, rng));
                    let dp = coupling_prohorov(&pi, &rho, x.metric(), y.metric())?;
                    let (a, _) = box_at_coupling(&pi, x.features(), y.features(), budget)?;
                    let (b, _) = box_at_coupling(&rho, x.features(), y.features(), budget)?;
                    let gap = (a.clone() - &b).abs();
                    Ok(verdict(gap <= dp.clone() * Rational::from_int(4), xs, || {
                        format!("|{a} - {b}| > 4 * {dp}")
                    }))
                })
            },
        },
        Property {
            name: "dconc_coupling_continuity",
            asserted: true,
            check: |rng, _| {
                with_instances(rng, 2, 3, 2, |xs, rng| {
                    let (x, y) = (xs[0], xs[1]);
                    let (mu, nu) = (x.measure().weights(), y.measure().weights());
                    let (pi, rho) = (random_coupling(mu, nu, rng), random_coupling(mu, nu, rng));
                    let dp = coupling_prohorov(&pi, &rho, x.metric(), y.metric())?;
                    let a = dconc_at_coupling(x, y, &pi)?;
                    let b = dconc_at_coupling(x, y, &rho)?;
                    let gap = (a.clone() - &b).abs();
                    Ok(verdict(gap <= dp.clone() * Rational::from_int(2), xs, || {
                        format!("|{a} - {b}| > 2 * {dp}")
                    }))
                })
            },
        },
        Property {
            name: "box_mm_below_generator_box",
            asserted: true,
            check: |rng, budget| {
                with_instances(rng, 2, 3, 2, |xs, _| {
                    let (mx, my) = (gds_to_mm(xs[0])?, gds_to_mm(xs[1])?);
                    let mm = box_mm_exact(&mx, &my, budget)?.value;
                    let generated = box_exact(&lip1_dataset(&mx, 0, 0)?, &lip1_dataset(&my, 0, 0)?, budget)?.value;
                    Ok(verdict(mm <= generated, xs, || format!("mm {mm} > generators {generated}")))
                })
            },
        },
        Property {
            name: "box_mm_matches_sampled_lip1",
            asserted: false,
            check: |rng, budget| {
                with_instances(rng, 2, 2, 2, |xs, rng| {
                    let (mx, my) = (gds_to_mm(xs[0])?, gds_to_mm(xs[1])?);
                    let mm = box_mm_exact(&mx, &my, budget)?.value;
                    let (a, b) = (lip1_dataset(&mx, 6, rng.random())?, lip1_dataset(&my, 6, rng.random())?);
                    let sampled = box_exact(&a, &b, budget)?.value;
                    let close = (mm.to_f64() - sampled.to_f64()).abs() <= 1e-6;
                    Ok(verdict(close, xs, || format!("mm {mm} vs sampled {sampled}")))
                })
            },
        },
        Property {
            name: "quotient_is_domination",
            asserted: true,
            check: |rng, _| {
                with_instances(rng, 1, 5, 3, |xs, rng| {
                    let x = xs[0];
                    let k = rng.random_range(1..=x.features().len());
                    let quotient = quotient_gds(x, &x.features().rows()[..k])?;
                    let y = &quotient.data;
                    let lipschitz = (0..x.len()).all(|a| {
                        (0..x.len()).all(|b| y.metric()[(quotient.map[a], quotient.map[b])] <= x.metric()[(a, b)])
                    });
                    let ok = lipschitz && is_domination(x, y, &quotient.map, &Rational::zero());
                    Ok(verdict(ok, xs, || format!("map {:?}", quotient.map)))
                })
            },
        },
        Property {
            name: "quotient_universal_property",
            asserted: true,
            check: |rng, budget| {
                with_instances(rng, 1, 4, 3, |xs, rng| {
                    let x = xs[0];
                    let k = rng.random_range(1..=x.features().len());
                    let g = &x.features().rows()[..k];
                    let z = quotient_gds(x, &g[..rng.random_range(1..=k)])?.data;
                    let check = quotient_universal_check(x, g, &z, &Rational::zero(), budget)?;
                    Ok(verdict(check.holds(), xs, || format!("{:?}", check.counterexample)))
                })
            },
        },
        Property {
            name: "domination_antisymmetric_up_to_isomorphism",
            asserted: true,
            check: |rng, budget| {
                with_instances(rng, 2, 3, 2, |xs, _| {
                    let t = Rational::zero();
                    let mutual = check_domination(xs[0], xs[1], &t, budget)?.is_some()
                        && check_domination(xs[1], xs[0], &t, budget)?.is_some();
                    let iso = check_isomorphism(xs[0], xs[1], &t, budget)?.is_some();
                    Ok(verdict(!mutual || iso, xs, || "mutual domination without isomorphism".into()))
                })
            },
        },
        Property {
            name: "reduced_target",
            asserted: true,
            check: |rng, budget| {
                with_instances(rng, 2, 3, 2, |xs, rng| {
                    let x = xs[0];
                    let k = rng.random_range(1..=x.features().len());
                    let x_prime = quotient_gds(x, &x.features().rows()[..k])?.data;
                    match reduced_target(x, &x_prime, xs[1], &Rational::zero(), budget)? {
                        None => Ok(Err(format!("quotient not dominated; {}", describe(xs)))),
                        Some(r) => Ok(verdict(r.holds(), xs, || {
                            format!(
                                "#F {} vs {}, dconc {} vs {}",
                                r.distinct_features, r.source_features, r.dconc_reduced, r.dconc_original
                            )
                        })),
                    }
                })
            },
        },
    ]
}

/// Names and kinds of the registered properties.
pub fn registered_properties() -> Vec<(&'static str, bool)> {
    registry().iter().map(|p| (p.name, p.asserted)).collect()
}

fn trial_seed(seed: u64, property: usize, trial: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((property as u64) << 40) ^ trial as u64
}

/// Runs every registered property on `trials` random instances.
pub fn verify_theorem_suite(seed: u64, trials: usize) -> SuiteReport {
    verify_theorem_suite_with(seed, trials, &Budget::default())
}

pub fn verify_theorem_suite_with(seed: u64, trials: usize, budget: &Budget) -> SuiteReport {
    let mut properties = Vec::new();
    if trials == 0 {
        return SuiteReport {
            seed,
            trials,
            properties,
        };
    }
    for (index, prop) in registry().into_iter().enumerate() {
        let outcomes = exec::map_range(budget.exec, trials, |trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, index, trial));
            (prop.check)(&mut rng, budget)
        });
        let mut report = PropertyReport {
            name: prop.name,
            asserted: prop.asserted,
            passed: 0,
            failed: 0,
            minimal_failure: None,
        };
        for (trial, (size, outcome)) in outcomes.into_iter().enumerate() {
            let detail = match outcome {
                Ok(Ok(())) => {
                    report.passed += 1;
                    continue;
                }
                Ok(Err(detail)) => detail,
                Err(e) => format!("error: {e}"),
            };
            report.failed += 1;
            if report.minimal_failure.as_ref().is_none_or(|m| size < m.size) {
                report.minimal_failure = Some(Failure { trial, size, detail });
            }
        }
        if report.failed > 0 && prop.asserted {
            log::warn!("{}: {} of {trials} trials failed", prop.name, report.failed);
        } else if report.failed > 0 {
            log::info!("{} (empirical): {} of {trials} trials failed", prop.name, report.failed);
        }
        properties.push(report);
    }
    SuiteReport {
        seed,
        trials,
        properties,
    }
}
