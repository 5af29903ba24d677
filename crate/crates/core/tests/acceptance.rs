//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Run with `cargo test -p snowcircle-core --test acceptance`.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snowcircle::builders::{self, BuildKind};
use snowcircle::diameter::AssouadBound;
use snowcircle::metric::{arc_diameter, bracket_arcs, distance, distance_in};
use snowcircle::oracle::brute_force_distance;
use snowcircle::rohde::{self, SnowPolygon};
use snowcircle::verify::assouad_estimate;
use snowcircle::{
    build_theorem_a, build_theorem_b, ChoiceSource, CirclePoint, Curve, DiameterFunction, DoublingVerdict,
    DyadicArc, Exact, GeneralArc, NamedRule, Param,
};

fn verdict(id: u32, title: &str, pass: bool, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    // Written to the stderr handle directly so the line survives test capture.
    let _ = writeln!(std::io::stderr(), "[{tag}] criterion {id:>2}: {title} ({detail})");
    assert!(pass, "criterion {id} failed: {detail}");
}

fn model(m: u32, p: &str, rule: NamedRule, seed: u64) -> DiameterFunction {
    DiameterFunction::rule(m, Param::parse(p).unwrap(), rule, seed).unwrap()
}

fn random(m: u32, p: &str, seed: u64) -> DiameterFunction {
    model(m, p, NamedRule::RandomBernoulli { p_snow: 0.5 }, seed)
}

fn alternating() -> DiameterFunction {
    model(1, "1", NamedRule::Alternating { first_snow: false }, 0).with_halving_horizon(Some(2))
}

fn grid(num: u64, level: u32) -> CirclePoint {
    CirclePoint::dyadic(num, level).unwrap()
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

#[test]
fn criterion_01_oracle_equivalence() {
    let start = Instant::now();
    let fixtures = [random(1, "1/2", 1), random(1, "0.7", 2), random(1, "0.9", 3), alternating()];
    let mut pairs = 0;
    let mut mismatches = 0;
    for df in &fixtures {
        for i in 0..16u64 {
            for j in i + 1..16 {
                let (x, y) = (grid(i, 4), grid(j, 4));
                let fast = distance_in::<Exact>(df, &x, &y, 8).unwrap();
                let slow = brute_force_distance(df, &x, &y, 8).unwrap();
                pairs += 1;
                if fast.upper != slow {
                    mismatches += 1;
                }
            }
        }
    }
    let t = secs(start.elapsed());
    verdict(
        1,
        "chain search equals exhaustive oracle",
        pairs == 480 && mismatches == 0 && t < 30.0,
        format!("{pairs} pairs, {mismatches} mismatches, {t:.1} s"),
    );
}

#[test]
fn criterion_02_grid_arc_diameter() {
    let start = Instant::now();
    let level = 6u32;
    let n = 1usize << level;
    let mut arcs = 0;
    let mut bad = Vec::new();
    for df in [random(1, "0.7", 5), random(1, "1/2", 6), alternating()] {
        let table: Vec<Vec<Exact>> = (0..n)
            .map(|i| {
                (i + 1..n)
                    .map(|j| brute_force_distance(&df, &grid(i as u64, level), &grid(j as u64, level), level).unwrap())
                    .collect()
            })
            .collect();
        let zero = Exact::from_integer(0.into());
        let lookup = |a: usize, b: usize| if a == b { &zero } else { &table[a.min(b)][a.max(b) - a.min(b) - 1] };
        for g in 1..=5u32 {
            let span = 1usize << (level - g);
            for k in 0..(1usize << g) {
                let delta = df.value_exact(&DyadicArc::new(g, k as u64).unwrap()).unwrap();
                let pts: Vec<usize> = (0..=span).map(|u| (k * span + u) % n).collect();
                let mut diam = Exact::from_integer(0.into());
                for &a in &pts {
                    for &b in &pts {
                        if lookup(a, b) > &diam {
                            diam = lookup(a, b).clone();
                        }
                    }
                }
                arcs += 1;
                if diam != delta {
                    bad.push(format!("({g},{k}): {diam} vs {delta}"));
                }
            }
        }
    }
    let t = secs(start.elapsed());
    verdict(
        2,
        "grid arc diameters equal the diameter function",
        bad.is_empty() && t < 10.0,
        format!("{arcs} arcs, {} mismatches {:?}, {t:.1} s", bad.len(), bad.first()),
    );
}

#[test]
fn criterion_03_lambda_recovery() {
    let df = model(1, "1/2", NamedRule::AllHalf, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let a = rng.gen_range(0..1u64 << 20);
        let b = rng.gen_range(0..1u64 << 20);
        let d = distance(&df, &grid(a, 20), &grid(b, 20), 20).unwrap();
        let gap = (a as f64 - b as f64).abs() / (1u64 << 20) as f64;
        let lambda = gap.min(1.0 - gap);
        worst = worst.max((d.upper - lambda).abs()).max((d.lower - lambda).abs());
    }
    verdict(3, "all-HALF model at 1/2 recovers arc length", worst <= 1e-9, format!("max error {worst:.2e}"));
}

#[test]
fn criterion_04_arc_bracket_sandwich() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0;
    let mut bad = Vec::new();
    for (m, df) in [(1u32, random(1, "0.7", 7)), (2, random(2, "0.3", 8))] {
        let depth = 16 / m;
        for _ in 0..1000 {
            let s = rng.gen::<f64>();
            let len = 0.5f64.powf(rng.gen_range(0.0..12.0)) * 0.999;
            let arc = GeneralArc::new(
                CirclePoint::from_f64(s).unwrap(),
                CirclePoint::from_f64((s + len).fract()).unwrap(),
            )
            .unwrap();
            let b = bracket_arcs(&df, &arc).unwrap();
            let star = b.delta_star;
            let raw_ok = arc.contains_dyadic(&b.inner_left)
                && arc.contains_dyadic(&b.inner_right)
                && b.outer_left.contains(&b.inner_left)
                && b.outer_right.contains(&b.inner_right)
                && [arc.start(), arc.end()]
                    .iter()
                    .all(|x| b.outer_left.contains_point(x) || b.outer_right.contains_point(x))
                && star == df.value(&b.inner_left).unwrap().max(df.value(&b.inner_right).unwrap());
            let d = arc_diameter(&df, &arc, depth).unwrap();
            let cap = f64::from(1u32 << (m + 1)) * star;
            let inside = star * (1.0 - 1e-12) <= d.lower && d.lower <= d.upper && d.upper <= cap * (1.0 + 1e-12);
            checked += 1;
            if !(raw_ok && inside) {
                bad.push(format!("m={m} {arc}: Δ*={star} [{}, {}]", d.lower, d.upper));
            }
        }
    }
    verdict(
        4,
        "arc diameter brackets inside [Δ*, 2^(m+1)Δ*]",
        bad.is_empty(),
        format!("{checked} arcs, {} violations {:?}", bad.len(), bad.first()),
    );
}

#[test]
fn criterion_05_extension_comparability() {
    let coarse = random(2, "0.3", 9);
    let fine = coarse.extend_to_dyadic().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pairs = 0;
    let mut violations = 0;
    while pairs < 500 {
        let (a, b) = (rng.gen_range(0..1u64 << 10), rng.gen_range(0..1u64 << 10));
        if a == b {
            continue;
        }
        let (x, y) = (grid(a, 10), grid(b, 10));
        let dj = distance(&coarse, &x, &y, 6).unwrap();
        let di = distance(&fine, &x, &y, 12).unwrap();
        pairs += 1;
        if di.upper < dj.lower / 4.0 || di.lower > dj.upper {
            violations += 1;
        }
    }
    verdict(5, "extension metric within [d/4, d]", violations == 0, format!("{pairs} pairs, {violations} violations"));
}

#[test]
fn criterion_06_theorem_a_round_circle() {
    let r = build_theorem_a(&Curve::RoundCircle, 10).unwrap();
    let mut arcs = 0;
    let mut bad = 0;
    for n in 1..=10u32 {
        for k in 0..(1usize << n) {
            let len = r.tree.arc(n, k).unwrap().length();
            let chord = if len >= 0.5 { 1.0 } else { (std::f64::consts::PI * len).sin() };
            let delta = r.model.value(&DyadicArc::new(n, k as u64).unwrap()).unwrap();
            arcs += 1;
            if !(0.5 * delta <= chord * (1.0 + 1e-12) && chord <= 2.0 * delta * (1.0 + 1e-12)) {
                bad += 1;
            }
        }
    }
    let rep = builders::distortion(&r, &Curve::RoundCircle, 10_000, 6).unwrap();
    verdict(
        6,
        "round circle: sandwich to depth 10 and distortion at most 8",
        bad == 0 && rep.l_est <= 8.0 && rep.violations == 0,
        format!("{arcs} arcs, {bad} sandwich failures, L_est {:.4}, {} violations", rep.l_est, rep.violations),
    );
}

#[test]
fn criterion_07_theorem_a_extremal_model() {
    let curve = Curve::model(model(1, "0.7", NamedRule::AllSnow, 0));
    let r = build_theorem_a(&curve, 8).unwrap();
    let rep = builders::distortion(&r, &curve, 10_000, 7).unwrap();
    verdict(
        7,
        "extremal 0.7 model: distortion at most 8",
        rep.l_est <= 8.0 && rep.violations == 0,
        format!("{} pairs, L_est {:.4}, {} violations", rep.pairs, rep.l_est, rep.violations),
    );
}

#[test]
fn criterion_08_theorem_b_round_circle() {
    let r = build_theorem_b(&Curve::RoundCircle, &Param::parse("0.8").unwrap(), Some(4), 3, 0).unwrap();
    assert_eq!(r.kind, BuildKind::TheoremB);
    let tau = 0.8f64.powi(4);
    let big_m = 16.0;
    let (k, l) = (tau * big_m, 2.0 * tau * big_m * big_m);
    let consts_ok = (r.constants.k - k).abs() <= 1e-12
        && (r.constants.l - l).abs() <= 1e-12
        && (r.constants.k - 6.5536).abs() <= 1e-12
        && (r.constants.l - 209.7152).abs() <= 1e-12;
    let mut bad = 0;
    let mut arcs = 0;
    for n in 1..=3u32 {
        for j in 0..(16usize.pow(n)) {
            let len = r.tree.arc(n, j).unwrap().length();
            let chord = if len >= 0.5 { 1.0 } else { (std::f64::consts::PI * len).sin() };
            let delta = r.model.value(&DyadicArc::new(4 * n, j as u64).unwrap()).unwrap();
            arcs += 1;
            if !(delta / k <= chord * (1.0 + 1e-12) && chord <= k * delta * (1.0 + 1e-12)) {
                bad += 1;
            }
        }
    }
    let line = big_m * 209.7152;
    let rep = builders::distortion(&r, &Curve::RoundCircle, 2000, 8).unwrap();
    verdict(
        8,
        "round circle at σ = 0.8, m = 4: sandwich, constants, distortion",
        consts_ok && bad == 0 && rep.l_est <= line && rep.l_upper <= line,
        format!(
            "K {} L {}, {arcs} arcs, {bad} sandwich failures, L_est {:.3} (bracket {:.3}) vs {line}",
            r.constants.k, r.constants.l, rep.l_est, rep.l_upper
        ),
    );
}

/// Classical Koch iteration on a counterclockwise polygon: every edge gets
/// an outward equilateral bump on its middle third.
fn koch_snowflake(steps: u32) -> Vec<[f64; 2]> {
    let mut pts = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let bump = 3f64.sqrt() / 6.0;
    for _ in 0..steps {
        let mut next = Vec::new();
        for i in 0..pts.len() {
            let a = pts[i];
            let b = pts[(i + 1) % pts.len()];
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let apex = [a[0] + dx / 2.0 + bump * dy, a[1] + dy / 2.0 - bump * dx];
            next.push(a);
            next.push([a[0] + dx / 3.0, a[1] + dy / 3.0]);
            next.push(apex);
            next.push([a[0] + 2.0 * dx / 3.0, a[1] + 2.0 * dy / 3.0]);
        }
        pts = next;
    }
    pts
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[test]
fn criterion_09_koch_coincidence() {
    let df = model(2, "1/3", NamedRule::AllSnow, 0);
    let polys = rohde::generate(1.0 / 3.0, &df, 3).unwrap();
    let poly = &polys[2];
    let got = poly.vertices();
    let want = koch_snowflake(poly.level - 1);
    let worst = if got.len() == want.len() {
        got.iter().zip(&want).map(|(a, b)| dist(*a, *b)).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    verdict(
        9,
        "p = 1/3 all-SNOW snowflake is the Koch snowflake",
        poly.level == 3 && worst <= 1e-12,
        format!("{} vertices, max deviation {worst:.2e}", got.len()),
    );
}

fn snowflakes(levels: u32) -> Vec<(f64, DiameterFunction, Vec<SnowPolygon<f64>>)> {
    [(0.26, "0.26"), (1.0 / 3.0, "1/3"), (0.45, "0.45")]
        .into_iter()
        .enumerate()
        .map(|(i, (p, text))| {
            let df = random(2, text, 40 + i as u64);
            let polys = rohde::generate(p, &df, levels).unwrap();
            (p, df, polys)
        })
        .collect()
}

#[test]
fn criterion_10_rohde_geometry() {
    let mut notes = Vec::new();
    let mut pass = true;
    for (p, df, polys) in snowflakes(6) {
        let first = df.value(&DyadicArc::new(2, 0).unwrap()).unwrap();
        let mut defect: f64 = 0.0;
        for poly in &polys {
            for (k, e) in poly.edges.iter().enumerate() {
                let delta = df.value(&DyadicArc::new(2 * poly.level, k as u64).unwrap()).unwrap() / first;
                defect = defect.max((dist(e.start, e.end) - delta).abs());
            }
        }
        let mut excess: f64 = 0.0;
        let mut separation = f64::INFINITY;
        for w in polys.windows(2) {
            let r = rohde::triangles(&w[0], &w[1], p).unwrap();
            excess = excess.max(r.nesting_excess);
            separation = separation.min(r.min_separation_ratio);
        }
        let c = 0.5 - p;
        pass &= defect <= 1e-12 && excess <= 1e-12 && separation >= c - 1e-12;
        notes.push(format!("p={p:.4}: defect {defect:.1e}, excess {excess:.1e}, separation {separation:.4} vs {c:.4}"));
    }
    verdict(10, "edge diameters, nesting and separation to level 6", pass, notes.join("; "));
}

#[test]
fn criterion_11_phi_bracket() {
    let mut notes = Vec::new();
    let mut pass = true;
    for (p, df, polys) in snowflakes(6) {
        let c = 0.5 - p;
        let first = df.value(&DyadicArc::new(2, 0).unwrap()).unwrap();
        let level4 = &polys[3];
        let v = rohde::phi_endpoints(level4);
        let mut violations = 0;
        let mut pairs = 0;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                let d = distance(&df, &grid(i as u64, 8), &grid(j as u64, 8), 4).unwrap();
                let (lo, hi) = (d.lower / first, d.upper / first);
                let e = dist(v[i], v[j]);
                pairs += 1;
                if e < c / 8.0 * lo * (1.0 - 1e-12) || e > 8.0 * hi * (1.0 + 1e-12) {
                    violations += 1;
                }
            }
        }
        let bt = rohde::bt_estimate(&polys[5], 2000, 11);
        let cap = 16.0 / (1.0 - 2.0 * p);
        pass &= violations == 0 && bt <= cap;
        notes.push(format!("p={p:.4}: {pairs} pairs, {violations} violations, BT {bt:.3} <= {cap:.3}"));
    }
    verdict(11, "φ bi-Lipschitz bracket and bounded turning", pass, notes.join("; "));
}

/// SNOW runs of length 1, 2, 4, 8 along the branch through 0, separated by
/// single halvings, and HALF everywhere else.
fn growing_runs() -> DiameterFunction {
    let mut pattern = Vec::new();
    for run in [1usize, 2, 4, 8] {
        pattern.push(false);
        pattern.extend(std::iter::repeat_n(true, run));
    }
    let levels = pattern
        .iter()
        .enumerate()
        .map(|(g, &snow)| {
            let mut bits = vec![false; 1 << g];
            bits[0] = snow;
            bits
        })
        .collect();
    DiameterFunction::new(1, Param::parse("1").unwrap(), ChoiceSource::Explicit { levels, fallback: None }).unwrap()
}

#[test]
fn criterion_12_doubling_classifier() {
    let mut notes = Vec::new();
    let mut pass = true;
    for s in ["1/2", "0.6", "0.7", "0.8", "0.9", "0.95"] {
        let sigma = Param::parse(s).unwrap().value();
        let want = (std::f64::consts::LN_2 / (1.0 / sigma).ln()).ceil() as u32;
        let got = model(1, s, NamedRule::RandomBernoulli { p_snow: 0.5 }, 12).doubling_test(8);
        let ok = matches!(got, DoublingVerdict::Doubling { n0, .. } if n0 == want);
        pass &= ok;
        notes.push(format!("σ={s}: n0 {want} {}", if ok { "ok" } else { "wrong" }));
    }
    let alt = model(1, "1", NamedRule::Alternating { first_snow: false }, 0).doubling_test(6);
    let alt_ok = alt == DoublingVerdict::Doubling { n0: 2, n: 16 };
    let grow = growing_runs().doubling_test(8);
    let grow_ok = matches!(&grow, DoublingVerdict::NotDoubling { run, witness } if *run >= 8 && witness.len() == 8);
    pass &= alt_ok && grow_ok;
    notes.push(format!("alternating {alt:?}"));
    notes.push(format!(
        "growing runs {}",
        match &grow {
            DoublingVerdict::NotDoubling { run, witness } => format!("not doubling, run {run}, witness ends at {}", witness.last().unwrap()),
            other => format!("{other:?}"),
        }
    ));
    verdict(12, "doubling classifier", pass, notes.join("; "));
}

#[test]
fn criterion_13_assouad() {
    let extremal = Curve::model(model(1, "0.7", NamedRule::AllSnow, 0));
    let half = Curve::model(model(1, "1/2", NamedRule::AllHalf, 0));
    let a = assouad_estimate(&extremal, 0.25, 6, 2, 5).unwrap().alpha;
    let b = assouad_estimate(&half, 0.25, 6, 2, 5).unwrap().alpha;
    let c = assouad_estimate(&Curve::RoundCircle, 0.25, 5, 4, 5).unwrap().alpha;
    let mut upper_err: f64 = 0.0;
    for s in ["0.55", "0.6", "0.7", "0.8", "0.9", "0.99"] {
        let sigma = Param::parse(s).unwrap().value();
        let want = std::f64::consts::LN_2 / (1.0 / sigma).ln();
        match model(1, s, NamedRule::AllSnow, 0).assouad_upper() {
            AssouadBound::Finite { value } => upper_err = upper_err.max((value - want).abs()),
            AssouadBound::Unbounded => upper_err = f64::INFINITY,
        }
    }
    let unbounded = model(1, "1", NamedRule::AllSnow, 0).assouad_upper() == AssouadBound::Unbounded;
    let pass = (a - 1.94).abs() <= 0.2 && (b - 1.0).abs() <= 0.1 && (c - 1.0).abs() <= 0.1 && upper_err <= 1e-12 && unbounded;
    verdict(
        13,
        "Assouad estimates and closed-form bound",
        pass,
        format!("0.7 → {a:.3}, 1/2 → {b:.3}, circle → {c:.3}, bound error {upper_err:.1e}"),
    );
}

#[test]
fn criterion_14_stage_convergence() {
    let mut worst_ratio: f64 = 0.0;
    let mut steps = 0;
    for (_, _, polys) in snowflakes(6) {
        for w in polys.windows(2) {
            let h = rohde::stage_hausdorff(&w[0], &w[1]).unwrap();
            let max = w[0].edges.iter().map(|e| e.diameter).fold(0.0, f64::max);
            worst_ratio = worst_ratio.max(h / max);
            steps += 1;
        }
    }
    verdict(
        14,
        "successive stages within the largest edge diameter",
        steps == 15 && worst_ratio <= 1.0,
        format!("{steps} refinements, worst Hausdorff / max Δ = {worst_ratio:.4}"),
    );
}
