//! Acceptance run: one line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use flat_tiler::fixtures::{self, CorpusEntry, GridSpec};
use flat_tiler::level::{self, LevelOptions};
use flat_tiler::solver::{self, VertexSet};
use flat_tiler::tiler::{self, CurveLabel, FlatSurface, TileOptions};
use flat_tiler::{audit, io, surgery, svg, HarmonicField, PlanarComplex};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

const CORPUS_SIZE: usize = 52;
const CORPUS_SEED: u64 = 20240917;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn solved(complex: &PlanarComplex, k: f64) -> Result<HarmonicField, String> {
    solver::solve(complex, k).map_err(|e| e.to_string())
}

fn outer_length(complex: &PlanarComplex, f: &HarmonicField) -> Result<f64, String> {
    solver::flux_length(&f.values, complex, &VertexSet::interior_of(complex), complex.outer()).map_err(|e| e.to_string())
}

/// Fixtures with m >= 3 plus every corpus entry.
fn all_inputs(corpus: &[CorpusEntry]) -> Vec<(String, PlanarComplex, f64)> {
    let mut v = vec![
        ("pants".to_string(), fixtures::pants(), 1.0),
        ("ladder4".to_string(), fixtures::ladder4(), 1.0),
        ("ladder5".to_string(), fixtures::ladder5(), 1.0),
        ("triple-saddle".to_string(), fixtures::triple_saddle(), 1.0),
    ];
    v.extend(corpus.iter().map(|e| (e.name.clone(), e.complex.clone(), e.k)));
    v
}

fn c1() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for n in [4, 8, 16] {
        for k in [1.0, 2.5] {
            let a = fixtures::annulus(n);
            let f = solved(&a, k)?;
            for v in n..2 * n {
                let d = (f.values[v] - k / 2.0).abs();
                worst = worst.max(d / k);
                ensure(d <= 1e-12, || format!("A({n}) k={k}: middle vertex {v} = {}", f.values[v]))?;
            }
            let nf = n as f64;
            let c = solver::cycle_flux(&f.values, &a, a.outer());
            let e = solver::energy(&f.values, &a);
            let cyl = tiler::tile_annulus_with(&a, &f, TileOptions { allow_flat_edges: true }).map_err(|e| e.to_string())?;
            let checks = [
                ("C", c, nf * k / 2.0),
                ("E", e, nf * k * k / 2.0),
                ("cylinder C", cyl.circumference, nf * k / 2.0),
                ("cylinder area", cyl.area(), c * k),
                ("rect area", cyl.rects.iter().map(|r| r.area()).sum(), nf * k * k / 2.0),
            ];
            for (name, got, want) in checks {
                worst = worst.max(rel(got, want));
                ensure(rel(got, want) <= 1e-12, || format!("A({n}) k={k}: {name} = {got}, expected {want}"))?;
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(secs < 1.0, || format!("took {secs:.3}s"))?;
    Ok(format!("6 cases, worst relative error {worst:.1e}, {secs:.3}s"))
}

fn c2(corpus: &[CorpusEntry]) -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut max_v = 0;
    for e in corpus {
        let f = solved(&e.complex, e.k)?;
        level::check_generic(&f, &e.complex).map_err(|err| format!("{}: {err}", e.name))?;
        let energy = solver::energy(&f.values, &e.complex);
        let l = outer_length(&e.complex, &f)?;
        let r = rel(energy, e.k * l);
        worst = worst.max(r);
        max_v = max_v.max(e.complex.num_vertices());
        ensure(r <= 1e-9, || format!("{}: E = {energy}, k * length = {}", e.name, e.k * l))?;
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("took {secs:.2}s"))?;
    ensure(max_v <= 2000, || format!("corpus has a complex with {max_v} vertices"))?;
    Ok(format!("{} complexes (up to {max_v} vertices), worst relative error {worst:.1e}, {secs:.2}s", corpus.len()))
}

fn c3(corpus: &[CorpusEntry]) -> Outcome {
    let mut worst: f64 = 0.0;
    for e in corpus {
        let f = solved(&e.complex, e.k)?;
        let total: f64 = solver::boundary_fluxes(&f.values, &e.complex).iter().sum();
        let l = outer_length(&e.complex, &f)?;
        worst = worst.max(total.abs() / l);
        ensure(total.abs() <= 1e-9 * l, || format!("{}: boundary flux sum {total:e}, length {l}", e.name))?;
    }
    Ok(format!("{} complexes, worst |sum| / length {worst:.1e}", corpus.len()))
}

fn c4(corpus: &[CorpusEntry]) -> Outcome {
    let mut singular = 0;
    for e in corpus {
        let f = solved(&e.complex, e.k)?;
        let r = level::index_formula_check(&f, &e.complex).map_err(|err| format!("{}: {err}", e.name))?;
        let want = 2 - e.m as i64;
        ensure(r.sum == want, || format!("{}: index sum {} for m = {}", e.name, r.sum, e.m))?;
        let count = r.singular().count();
        ensure(e.m != 2 || count == 0, || format!("{}: annulus with {count} singular vertices", e.name))?;
        singular += count;
    }
    Ok(format!("{} complexes, {singular} singular vertices in total", corpus.len()))
}

fn c5(corpus: &[CorpusEntry]) -> Outcome {
    let mut annuli = 0;
    let mut worst_a: f64 = 0.0;
    let annulus_inputs = corpus.iter().filter(|e| e.m == 2).map(|e| (e.name.clone(), e.complex.clone(), e.k));
    for (name, complex, k) in annulus_inputs {
        let f = solved(&complex, k)?;
        let c = solver::cycle_flux(&f.values, &complex, complex.outer());
        for i in 0..20 {
            let h = k * (i as f64 + 0.5) / 20.0;
            let curve = level::extract_level(&f, &complex, h, LevelOptions::default()).map_err(|e| format!("{name} at {h}: {e}"))?;
            let l = level::level_length(&f, &complex, &curve);
            worst_a = worst_a.max(rel(l, c));
            ensure(rel(l, c) <= 1e-9, || format!("{name}: level {h} has length {l}, C = {c}"))?;
        }
        annuli += 1;
    }

    let mut cycles = 0;
    let mut worst_m: f64 = 0.0;
    let inputs = all_inputs(corpus).into_iter().filter(|(_, c, _)| c.m() >= 3);
    for (name, complex, k) in inputs {
        let f = solved(&complex, k)?;
        let crit = level::critical_values(&f, &complex).map_err(|e| e.to_string())?;
        for h in svg::regular_sample(&f, &crit, 10) {
            let curve = level::extract_level(&f, &complex, h, LevelOptions::default()).map_err(|e| format!("{name} at {h}: {e}"))?;
            let below = crit.iter().copied().filter(|&c| c < h).fold(f.bottom, f64::max);
            let lower = if below > f.bottom {
                Some(level::extract_level(&f, &complex, below, LevelOptions::default()).map_err(|e| format!("{name} at {below}: {e}"))?)
            } else {
                None
            };
            for cyc in curve.cycles() {
                let l = level::cycle_length(&f, &complex, cyc);
                let enclosed: f64 = match &lower {
                    Some(lc) => lc.cycles().filter(|c| cyc.contains(c.path[0])).map(|c| level::cycle_length(&f, &complex, c)).sum(),
                    None => complex
                        .inner()
                        .iter()
                        .filter(|b| cyc.contains(complex.coords[b[0]]))
                        .map(|b| solver::cycle_flux(&f.values, &complex, b).abs())
                        .sum(),
                };
                worst_m = worst_m.max(rel(l, enclosed));
                ensure(rel(l, enclosed) <= 1e-9, || {
                    format!("{name}: cycle at {h} has length {l}, enclosed length at {below} is {enclosed}")
                })?;
                cycles += 1;
            }
        }
    }
    Ok(format!("{annuli} annuli x 20 levels (worst {worst_a:.1e}); {cycles} cycles on m >= 3 inputs (worst {worst_m:.1e})"))
}

fn c6(corpus: &[CorpusEntry]) -> Outcome {
    let mut cuts = 0;
    let mut bouquets = 0;
    let mut worst: f64 = 0.0;
    let mut inputs = all_inputs(corpus);
    inputs.extend(corpus.iter().filter(|e| e.m == 2).map(|e| (e.name.clone(), e.complex.clone(), e.k)));
    inputs.dedup_by(|a, b| a.0 == b.0);
    for (name, complex, k) in inputs {
        let f = solved(&complex, k)?;
        let crit = level::critical_values(&f, &complex).map_err(|e| e.to_string())?;
        let mut levels: Vec<f64> = crit[1..crit.len() - 1].to_vec();
        levels.extend(svg::regular_sample(&f, &crit, 3));
        for h in levels {
            let curve = level::extract_level(&f, &complex, h, LevelOptions::default()).map_err(|e| format!("{name} at {h}: {e}"))?;
            let (li, le) = surgery::two_sided_length(&complex, &f, &curve).map_err(|e| format!("{name} cut at {h}: {e}"))?;
            worst = worst.max((li - le).abs() / le);
            ensure((li - le).abs() <= 1e-9 * le, || format!("{name} at {h}: interior {li}, exterior {le}"))?;
            cuts += 1;
            if !curve.singular_vertices.is_empty() {
                bouquets += 1;
            }
        }
    }
    ensure(bouquets > 0, || "no bouquet curves were cut".into())?;
    Ok(format!("{cuts} cuts ({bouquets} through singular curves), worst relative gap {worst:.1e}"))
}

fn c7(corpus: &[CorpusEntry]) -> Outcome {
    let mut inputs = all_inputs(corpus);
    inputs.extend(corpus.iter().filter(|e| e.m == 2).map(|e| (e.name.clone(), e.complex.clone(), e.k)));
    inputs.dedup_by(|a, b| a.0 == b.0);
    let mut cylinders = 0;
    let mut worst_area: f64 = 0.0;
    let mut worst_overlap: f64 = 0.0;
    let mut heights = 0;
    let mut tile = |name: &str, complex: &PlanarComplex, f: &HarmonicField, opts: TileOptions| -> Result<(), String> {
        let s = tiler::tile_surface(complex, f, opts).map_err(|e| format!("{name}: {e}"))?;
        for cyl in &s.cylinders {
            let r = tiler::verify_tiling(cyl);
            let ch = cyl.circumference * cyl.height;
            worst_area = worst_area.max(r.area_residual / r.expected_area);
            worst_overlap = worst_overlap.max(r.max_overlap / ch);
            heights += r.heights_sampled;
            ensure(r.area_residual <= 1e-9 * r.expected_area, || {
                format!("{name} cylinder {}: area residual {:e}", cyl.id, r.area_residual)
            })?;
            ensure(r.max_overlap <= 1e-9 * ch, || {
                format!("{name} cylinder {}: overlap {:e} in {:?}", cyl.id, r.max_overlap, r.overlap_pair)
            })?;
            ensure(r.gap_heights.is_empty(), || format!("{name} cylinder {}: gaps at heights {:?}", cyl.id, r.gap_heights))?;
            cylinders += 1;
        }
        Ok(())
    };
    for (name, complex, k) in &inputs {
        let f = solved(complex, *k)?;
        tile(name, complex, &f, TileOptions::default())?;
    }
    for n in [4, 8, 16] {
        let a = fixtures::annulus(n);
        tile(&format!("A({n})"), &a, &solved(&a, 1.0)?, TileOptions { allow_flat_edges: true })?;
    }
    Ok(format!(
        "{cylinders} cylinders, worst area residual {worst_area:.1e}, worst overlap {worst_overlap:.1e} of C*H, {heights} gap-sweep heights all full"
    ))
}

fn root_to_leaf_heights(s: &FlatSurface) -> Vec<f64> {
    let n = s.cylinders.len();
    let is_parent: Vec<bool> = (0..n).map(|i| s.cylinders.iter().any(|c| c.glue.as_ref().is_some_and(|g| g.parent == i))).collect();
    (0..n)
        .filter(|&i| !is_parent[i])
        .map(|leaf| {
            let mut total = 0.0;
            let mut at = Some(leaf);
            while let Some(i) = at {
                total += s.cylinders[i].height;
                at = s.cylinders[i].glue.as_ref().map(|g| g.parent);
            }
            total
        })
        .collect()
}

fn c8() -> Outcome {
    let mut details = Vec::new();
    for k in [1.0, 2.5] {
        let p = fixtures::pants();
        let f = solved(&p, k)?;
        let s = tiler::tile_pair_of_pants(&p, &f).map_err(|e| e.to_string())?;
        ensure(s.singular_points.len() == 1, || format!("{} singular points", s.singular_points.len()))?;
        let angle = s.singular_points[0].cone_angle;
        ensure((angle - 4.0 * PI).abs() <= 1e-9, || format!("cone angle {angle}"))?;
        let mut matched = 0;
        for b in &s.boundaries {
            let cycle = match b.label {
                CurveLabel::Outer => p.outer(),
                CurveLabel::Inner(i) => &p.inner()[i][..],
                CurveLabel::Level(_) => continue,
            };
            let flux = solver::cycle_flux(&f.values, &p, cycle).abs();
            ensure(rel(b.length, flux) <= 1e-9, || format!("boundary {:?}: length {}, flux {flux}", b.label, b.length))?;
            matched += 1;
        }
        ensure(matched == 3, || format!("{matched} input boundary lengths"))?;
        let sums = root_to_leaf_heights(&s);
        ensure(sums.len() == 2, || format!("{} leaves", sums.len()))?;
        for h in &sums {
            ensure((h - k).abs() <= 1e-12 * k, || format!("root-to-leaf height {h}, k = {k}"))?;
        }
        details.push(format!("k={k}: 3 cylinders, cone angle 4π{:+.1e}, heights {sums:?}", angle - 4.0 * PI));
    }
    Ok(details.join("; "))
}

fn c9() -> Outcome {
    let mut details = Vec::new();
    for (name, complex) in
        [("ladder4", fixtures::ladder4()), ("ladder5", fixtures::ladder5()), ("triple-saddle", fixtures::triple_saddle())]
    {
        let m = complex.m();
        let f = solved(&complex, 1.0)?;
        let s = tiler::tile_ladder(&complex, &f).map_err(|e| format!("{name}: {e}"))?;
        let mut sum_n = 0;
        for p in &s.singular_points {
            let n = -level::index(&f, &complex, p.vertex).map_err(|e| e.to_string())?;
            let want = 2.0 * (n as f64 + 1.0) * PI;
            ensure((p.cone_angle - want).abs() <= 1e-9, || {
                format!("{name} vertex {}: cone angle {}, expected {want}", p.vertex, p.cone_angle)
            })?;
            sum_n += n;
        }
        ensure(sum_n == m as i64 - 2, || format!("{name}: sum of n = {sum_n}, m = {m}"))?;
        let e = solver::energy(&f.values, &complex);
        let area: f64 = s.cylinders.iter().map(|c| c.area()).sum();
        ensure(rel(area, e) <= 1e-9, || format!("{name}: area {area}, energy {e}"))?;
        let failed: Vec<String> = audit::audit_surface(&complex, &f, &s, 1e-9)
            .map_err(|e| e.to_string())?
            .into_iter()
            .filter(|c| !c.passed)
            .map(|c| c.name)
            .collect();
        ensure(failed.is_empty(), || format!("{name}: failed identities {failed:?}"))?;
        details.push(format!("{name} (m={m}): {} cone points, sum n = {sum_n}", s.singular_points.len()));
    }
    Ok(details.join("; "))
}

fn c10(corpus: &[CorpusEntry]) -> Outcome {
    let mut cases: Vec<(String, PlanarComplex, f64, TileOptions)> = vec![
        ("A(8)".into(), fixtures::annulus(8), 1.0, TileOptions { allow_flat_edges: true }),
        ("pants".into(), fixtures::pants(), 1.0, TileOptions::default()),
        ("ladder4".into(), fixtures::ladder4(), 1.0, TileOptions::default()),
        ("ladder5".into(), fixtures::ladder5(), 1.0, TileOptions::default()),
    ];
    for m in 2..=5 {
        let e = corpus.iter().find(|e| e.m == m).ok_or_else(|| format!("no corpus entry with m = {m}"))?;
        cases.push((e.name.clone(), e.complex.clone(), e.k, TileOptions::default()));
    }
    let mut seen = Vec::new();
    for (name, complex, k, opts) in cases {
        let m = complex.m();
        let f = solved(&complex, k)?;
        let s = tiler::tile_surface(&complex, &f, opts).map_err(|e| format!("{name}: {e}"))?;
        let d = tiler::double(&s);
        ensure(d.genus == m - 1 && d.genus_from_boundaries == m - 1, || {
            format!("{name}: genus {} (from boundaries {}), m = {m}", d.genus, d.genus_from_boundaries)
        })?;
        ensure(d.area == 2.0 * s.area, || format!("{name}: doubled area {} is not twice {}", d.area, s.area))?;
        let e = solver::energy(&f.values, &complex);
        ensure(rel(d.area, 2.0 * e) <= 1e-9, || format!("{name}: doubled area {}, 2E = {}", d.area, 2.0 * e))?;
        seen.push(m);
    }
    seen.sort_unstable();
    seen.dedup();
    ensure(seen == [2, 3, 4, 5], || format!("covered m = {seen:?}"))?;
    Ok("genus m - 1 and area 2E for m = 2, 3, 4, 5 (fixtures and corpus)".into())
}

fn cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_flat-tiler")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn flagged(report: &str, identity: &str) -> bool {
    report.lines().any(|l| l.contains("check") && l.contains(identity) && l.contains("FAIL"))
}

fn c11() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let (input, surface) = (p("pants.json"), p("pants.surface.json"));
    let (code, _) = cli(&["fixture", "pants", "--out", &input]);
    ensure(code == 0, || format!("fixture exited {code}"))?;
    let (code, out) = cli(&["tile", &input, "--out", &surface]);
    ensure(code == 0, || format!("tile exited {code}:\n{out}"))?;
    let (code, out) = cli(&["verify", &surface, &input]);
    ensure(code == 0, || format!("untouched surface: verify exited {code}:\n{out}"))?;

    let text = std::fs::read_to_string(&surface).map_err(|e| e.to_string())?;
    let original: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    type Fault = fn(&mut serde_json::Value);
    let faults: [(&str, &str, Fault); 4] = [
        ("deleted rect", audit::NO_GAPS, |d| {
            d["surface"]["cylinders"][0]["rects"].as_array_mut().unwrap().remove(0);
        }),
        ("duplicated rect", audit::NO_OVERLAPS, |d| {
            let rects = d["surface"]["cylinders"][0]["rects"].as_array_mut().unwrap();
            let r = rects[0].clone();
            rects.push(r);
        }),
        ("cone angle 3π", audit::CONE_ANGLE, |d| {
            d["surface"]["singular_points"][0]["cone_angle"] = serde_json::json!(3.0 * PI);
        }),
        ("rect width +0.1", audit::ENERGY_AREA, |d| {
            let w = d["surface"]["cylinders"][0]["rects"][0]["width"].as_f64().unwrap();
            d["surface"]["cylinders"][0]["rects"][0]["width"] = serde_json::json!(w + 0.1);
        }),
    ];
    let mut names = Vec::new();
    for (what, identity, inject) in faults {
        let mut doc = original.clone();
        inject(&mut doc);
        let path = p("faulty.surface.json");
        std::fs::write(&path, serde_json::to_string(&doc).unwrap()).map_err(|e| e.to_string())?;
        let (code, out) = cli(&["verify", &path, &input]);
        ensure(code == 5, || format!("{what}: exit {code}:\n{out}"))?;
        ensure(flagged(&out, identity), || format!("{what}: \"{identity}\" not flagged:\n{out}"))?;
        names.push(format!("{what} -> \"{identity}\""));
    }
    ensure(Path::new(&surface).exists(), || "surface document vanished".into())?;
    Ok(format!("exit 5 with {}", names.join(", ")))
}

fn c12() -> Outcome {
    let complex = fixtures::random_grid(&GridSpec::new(100, 100, 1, 17));
    let n = complex.num_vertices();
    ensure(n >= 10_000, || format!("only {n} vertices"))?;
    let t = Instant::now();
    let f = solved(&complex, 1.0)?;
    let s = tiler::tile_surface(&complex, &f, TileOptions::default()).map_err(|e| e.to_string())?;
    let build = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let checks = audit::audit_surface(&complex, &f, &s, 1e-9).map_err(|e| e.to_string())?;
    let reports: Vec<_> = s.cylinders.iter().map(tiler::verify_tiling).collect();
    let doc = io::to_json(&s);
    let _: FlatSurface = io::from_json(&doc).map_err(|e| e.to_string())?;
    let verify = t.elapsed().as_secs_f64();
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    ensure(failed.is_empty(), || format!("failed identities {failed:?}"))?;
    ensure(reports.iter().all(|r| r.passes(1e-9)), || "tiling certificate failed".into())?;
    ensure(build < 10.0, || format!("solve + tile took {build:.2}s"))?;
    ensure(verify < 5.0, || format!("verification took {verify:.2}s"))?;
    Ok(format!("{n} vertices: solve + tile {build:.2}s, verification {verify:.2}s"))
}

fn main() {
    let corpus = fixtures::corpus(CORPUS_SIZE, CORPUS_SEED);
    let criteria: Vec<Criterion> = vec![
        ("closed-form annulus", Box::new(c1)),
        ("energy identity", Box::new(|| c2(&corpus))),
        ("flux conservation", Box::new(|| c3(&corpus))),
        ("index sum", Box::new(|| c4(&corpus))),
        ("level-length constancy", Box::new(|| c5(&corpus))),
        ("two-sided lengths", Box::new(|| c6(&corpus))),
        ("tiling certificates", Box::new(|| c7(&corpus))),
        ("pair of pants", Box::new(c8)),
        ("ladders", Box::new(c9)),
        ("doubling", Box::new(|| c10(&corpus))),
        ("fault injection", Box::new(c11)),
        ("scale", Box::new(c12)),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
