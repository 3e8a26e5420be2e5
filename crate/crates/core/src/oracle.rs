//! Slow reference implementations used to cross-check the engine.
//!
//! Nothing here calls into [`crate::linprog`], [`crate::extensive`] or
//! [`crate::dro`]: constraint matrices are rebuilt straight from the instance,
//! LPs are solved by a separately written simplex that always uses Bland's
//! rule (or, for tiny problems, by listing every vertex), and the worst case
//! walks all `3^K` patterns.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::extensive::BatteryRhsMode;
use crate::model::{
    Arc, BetaMode, Channel, DemandModel, Design, DroConfig, NetworkSpec, Node, NodeId, OdPair, SolveMode,
};
use crate::report::{SolveError, SolveReport};

/// Largest design lattice [`oracle_design`] accepts.
pub const ORACLE_LATTICE_CAP: u64 = 1 << 16;
/// Largest number of pairs [`oracle_worst_case`] accepts.
pub const ORACLE_MAX_PAIRS: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("oracle size cap exceeded: {0}")]
    TooLarge(String),
}

/// Result of a small LP: `None` when infeasible.
type LpValue = Option<(f64, Vec<f64>)>;

/// `min cᵀx` over `A x = b, D x ≤ e, x ≥ 0` by a two-phase tableau with
/// Bland's rule throughout.
pub fn bland_lp(c: &[f64], a: &[Vec<f64>], b: &[f64], d: &[Vec<f64>], e: &[f64]) -> LpValue {
    let n = c.len();
    let m = a.len() + d.len();
    // Columns: x (n), slacks (d.len()), artificials (m), rhs.
    let ns = d.len();
    let width = n + ns + m + 1;
    let mut t: Vec<Vec<f64>> = Vec::with_capacity(m);
    for (row, &r) in a.iter().zip(b) {
        let mut v = vec![0.0; width];
        v[..n].copy_from_slice(row);
        v[width - 1] = r;
        t.push(v);
    }
    for (s, (row, &r)) in d.iter().zip(e).enumerate() {
        let mut v = vec![0.0; width];
        v[..n].copy_from_slice(row);
        v[n + s] = 1.0;
        v[width - 1] = r;
        t.push(v);
    }
    for (i, row) in t.iter_mut().enumerate() {
        if row[width - 1] < 0.0 {
            row.iter_mut().for_each(|x| *x = -*x);
        }
        row[n + ns + i] = 1.0;
    }
    let mut basis: Vec<usize> = (0..m).map(|i| n + ns + i).collect();

    fn run(t: &mut [Vec<f64>], basis: &mut [usize], obj: &mut Vec<f64>, allowed: usize) -> bool {
        let width = obj.len();
        for _ in 0..200_000 {
            let Some(col) = (0..allowed).find(|&j| obj[j] < -1e-10) else {
                return true;
            };
            let mut pick: Option<(usize, f64)> = None;
            for (i, row) in t.iter().enumerate() {
                if row[col] > 1e-10 {
                    let ratio = row[width - 1] / row[col];
                    pick = match pick {
                        None => Some((i, ratio)),
                        Some((p, r)) => {
                            if ratio < r - 1e-12 || (ratio <= r + 1e-12 && basis[i] < basis[p]) {
                                Some((i, ratio))
                            } else {
                                Some((p, r))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = pick else {
                return false;
            };
            let pv = t[r][col];
            t[r].iter_mut().for_each(|x| *x /= pv);
            let prow = t[r].clone();
            for (i, row) in t.iter_mut().enumerate() {
                if i != r && row[col] != 0.0 {
                    let f = row[col];
                    row.iter_mut().zip(&prow).for_each(|(x, p)| *x -= f * p);
                }
            }
            let f = obj[col];
            obj.iter_mut().zip(&prow).for_each(|(x, p)| *x -= f * p);
            basis[r] = col;
        }
        false
    }

    // Phase one.
    let mut obj = vec![0.0; width];
    for j in n + ns..n + ns + m {
        obj[j] = 1.0;
    }
    for row in &t {
        obj.iter_mut().zip(row).for_each(|(o, v)| *o -= v);
    }
    if !run(&mut t, &mut basis, &mut obj, n + ns) {
        return None;
    }
    let scale = b.iter().chain(e).fold(1.0f64, |s, v| s.max(v.abs()));
    if -obj[width - 1] > 1e-7 * scale {
        return None;
    }
    for i in 0..m {
        if basis[i] >= n + ns {
            if let Some(j) = (0..n + ns).find(|&j| t[i][j].abs() > 1e-7) {
                let pv = t[i][j];
                t[i].iter_mut().for_each(|x| *x /= pv);
                let prow = t[i].clone();
                for (k, row) in t.iter_mut().enumerate() {
                    if k != i && row[j] != 0.0 {
                        let f = row[j];
                        row.iter_mut().zip(&prow).for_each(|(x, p)| *x -= f * p);
                    }
                }
                basis[i] = j;
            } else {
                t[i][width - 1] = 0.0;
            }
        }
    }
    // Phase two.
    let mut obj = vec![0.0; width];
    obj[..n].copy_from_slice(c);
    for (i, row) in t.iter().enumerate() {
        let cb = if basis[i] < n { c[basis[i]] } else { 0.0 };
        if cb != 0.0 {
            obj.iter_mut().zip(row).for_each(|(o, v)| *o -= cb * v);
        }
    }
    if !run(&mut t, &mut basis, &mut obj, n + ns) {
        return Some((f64::NEG_INFINITY, Vec::new()));
    }
    let mut x = vec![0.0; n];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < n {
            x[bv] = t[i][width - 1].max(0.0);
        }
    }
    let value = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    Some((value, x))
}

fn solve_square(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                if f != 0.0 {
                    for k in col..n {
                        m[r][k] -= f * m[col][k];
                    }
                    rhs[r] -= f * rhs[col];
                }
            }
        }
    }
    Some((0..n).map(|i| rhs[i] / m[i][i]).collect())
}

/// Row-reduces `A x = b` to an equivalent system with independent rows.
/// `None` if the system is inconsistent.
fn independent_rows(a: &[Vec<f64>], b: &[f64]) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut rows: Vec<Vec<f64>> = a.to_vec();
    let mut rhs: Vec<f64> = b.to_vec();
    let n = a.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..n {
        let Some(piv) = (rank..rows.len()).max_by(|&p, &q| rows[p][col].abs().total_cmp(&rows[q][col].abs()))
        else {
            break;
        };
        if rows[piv][col].abs() < 1e-10 {
            continue;
        }
        rows.swap(rank, piv);
        rhs.swap(rank, piv);
        for r in 0..rows.len() {
            if r != rank {
                let f = rows[r][col] / rows[rank][col];
                if f != 0.0 {
                    for k in 0..n {
                        rows[r][k] -= f * rows[rank][k];
                    }
                    rhs[r] -= f * rhs[rank];
                }
            }
        }
        rank += 1;
    }
    if rhs[rank..].iter().any(|v| v.abs() > 1e-9) {
        return None;
    }
    rows.truncate(rank);
    rhs.truncate(rank);
    Some((rows, rhs))
}

/// Brute-force LP over every vertex of `{x ≥ 0 : A x = b, D x ≤ e}`. Only
/// for tiny problems: the search is exponential in rows plus variables.
pub fn vertex_enumeration_lp(c: &[f64], a: &[Vec<f64>], b: &[f64], d: &[Vec<f64>], e: &[f64]) -> Option<f64> {
    let n = c.len();
    let (a, b) = independent_rows(a, b)?;
    // Candidate tight constraints: inequality rows, then x_j = 0.
    let mut cand_rows: Vec<(Vec<f64>, f64)> = d.iter().cloned().zip(e.iter().copied()).collect();
    for j in 0..n {
        let mut r = vec![0.0; n];
        r[j] = 1.0;
        cand_rows.push((r, 0.0));
    }
    let total = cand_rows.len();
    assert!(total <= 24, "vertex enumeration limited to 24 candidate constraints");
    let feasible = |x: &[f64]| {
        let dot = |r: &[f64]| r.iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
        a.iter().zip(&b).all(|(r, v)| (dot(r) - v).abs() <= 1e-7 * v.abs().max(1.0))
            && d.iter().zip(e).all(|(r, v)| dot(r) <= v + 1e-7 * v.abs().max(1.0))
            && x.iter().all(|&v| v >= -1e-9)
    };
    let need = n - a.len();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << total) {
        if mask.count_ones() as usize != need {
            continue;
        }
        let mut rows = a.clone();
        let mut rhs = b.clone();
        for i in (0..total).filter(|&i| mask >> i & 1 == 1) {
            rows.push(cand_rows[i].0.clone());
            rhs.push(cand_rows[i].1);
        }
        if let Some(x) = solve_square(rows, rhs) {
            if feasible(&x) {
                let v: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                best = Some(best.map_or(v, |bv: f64| bv.min(v)));
            }
        }
    }
    best
}

/// Second-stage matrices rebuilt directly from the instance.
struct OracleLp {
    c: Vec<f64>,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    d: Vec<Vec<f64>>,
    e: Vec<f64>,
}

fn oracle_lp(spec: &NetworkSpec, design: &Design, b: &[f64], battery: BatteryRhsMode, big_m: f64) -> OracleLp {
    let na = spec.arcs.len();
    let nk = spec.od_pairs.len();
    let var = |arc: usize, k: usize| arc + na * k;
    let mut c = vec![0.0; na * nk];
    for (ai, arc) in spec.arcs.iter().enumerate() {
        for k in 0..nk {
            c[var(ai, k)] = arc.transport_cost[k];
        }
    }
    let mut a = Vec::new();
    let mut rhs = Vec::new();
    for (k, pair) in spec.od_pairs.iter().enumerate() {
        for node in 0..spec.nodes.len() {
            let mut row = vec![0.0; na * nk];
            for (ai, arc) in spec.arcs.iter().enumerate() {
                if arc.tail.0 == node {
                    row[var(ai, k)] = 1.0;
                } else if arc.head.0 == node {
                    row[var(ai, k)] = -1.0;
                }
            }
            let supply = if node == pair.origin.0 {
                b[k]
            } else if node == pair.destination.0 {
                -b[k]
            } else {
                0.0
            };
            a.push(row);
            rhs.push(supply);
        }
    }
    let mut d = Vec::new();
    let mut e = Vec::new();
    for (ai, arc) in spec.arcs.iter().enumerate() {
        let mut row = vec![0.0; na * nk];
        for k in 0..nk {
            row[var(ai, k)] = 1.0;
        }
        let cap: f64 = arc
            .channels
            .iter()
            .zip(&design.channels[ai])
            .map(|(ch, &y)| ch.capacity * y as f64)
            .sum();
        d.push(row);
        e.push(cap);
    }
    for (i, node) in spec.nodes.iter().enumerate() {
        let mut row = vec![0.0; na * nk];
        for (ai, arc) in spec.arcs.iter().enumerate() {
            for k in 0..nk {
                if arc.tail.0 == i {
                    row[var(ai, k)] += 1.0;
                }
                if arc.head.0 == i {
                    row[var(ai, k)] += 1.0;
                }
            }
        }
        d.push(row);
        e.push(if design.open[i] { node.airport_capacity } else { big_m });
    }
    let open_total = match battery {
        BatteryRhsMode::Literal => spec.arcs.iter().map(|arc| design.open[arc.tail.0] as u32 as f64).sum::<f64>(),
        BatteryRhsMode::NodeSum => design.open.iter().map(|&z| z as u32 as f64).sum::<f64>(),
    };
    for k in 0..nk {
        let mut row = vec![0.0; na * nk];
        for (ai, arc) in spec.arcs.iter().enumerate() {
            row[var(ai, k)] = arc.energy;
        }
        d.push(row);
        e.push(b[k] * spec.battery_boost * open_total);
    }
    OracleLp { c, a, b: rhs, d, e }
}

/// `Q(η, b)` by the oracle LP; `+∞` when infeasible.
pub fn oracle_second_stage(spec: &NetworkSpec, design: &Design, b: &[f64], battery: BatteryRhsMode, big_m: f64) -> f64 {
    let lp = oracle_lp(spec, design, b, battery, big_m);
    match bland_lp(&lp.c, &lp.a, &lp.b, &lp.d, &lp.e) {
        Some((v, _)) => v,
        None => f64::INFINITY,
    }
}

/// `Q(η, b)` by listing vertices; only for instances with a handful of
/// arcs, pairs and nodes.
pub fn oracle_second_stage_vertices(
    spec: &NetworkSpec,
    design: &Design,
    b: &[f64],
    battery: BatteryRhsMode,
    big_m: f64,
) -> f64 {
    let lp = oracle_lp(spec, design, b, battery, big_m);
    vertex_enumeration_lp(&lp.c, &lp.a, &lp.b, &lp.d, &lp.e).unwrap_or(f64::INFINITY)
}

/// Brute-force worst case over all `3^K` vertex patterns.
///
/// Returns `(value, b*)`. Ties prefer the smaller distance to the sample,
/// then the pattern that comes first with states ordered sample, upper,
/// lower.
pub fn oracle_worst_case(
    spec: &NetworkSpec,
    design: &Design,
    b_ref: &[f64],
    beta: f64,
    lower: &[f64],
    upper: &[f64],
    battery: BatteryRhsMode,
    big_m: f64,
) -> Result<(f64, Vec<f64>), OracleError> {
    let k = b_ref.len();
    if k > ORACLE_MAX_PAIRS {
        return Err(OracleError::TooLarge(format!("{k} pairs")));
    }
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for idx in 0..3usize.pow(k as u32) {
        let mut b = vec![0.0; k];
        let mut rest = idx;
        for p in (0..k).rev() {
            b[p] = match rest % 3 {
                0 => b_ref[p],
                1 => upper[p],
                _ => lower[p],
            };
            rest /= 3;
        }
        let q = oracle_second_stage(spec, design, &b, battery, big_m);
        if q.is_infinite() {
            return Ok((f64::INFINITY, b));
        }
        let dist: f64 = b.iter().zip(b_ref).map(|(x, y)| (x - y).abs()).sum();
        let v = q - beta * dist;
        let replace = match &best {
            None => true,
            Some((bv, bd, _)) => {
                let scale = 1e-9 * 1f64.max(v.abs()).max(bv.abs());
                if (v - bv).abs() <= scale {
                    dist < *bd && (dist - bd).abs() > 1e-9 * 1f64.max(dist.abs()).max(bd.abs())
                } else {
                    v > *bv
                }
            }
        };
        if replace {
            best = Some((v, dist, b));
        }
    }
    let (v, _, b) = best.expect("at least one pattern");
    Ok((v, b))
}

/// Exhaustive design search through the oracle routines only.
///
/// Admissible designs open both endpoints of every pair with a non-zero
/// demand box and build channels only between open airports. Fixed penalty
/// multiplier only.
pub fn oracle_design(spec: &NetworkSpec, demand: &DemandModel, config: &DroConfig) -> Result<SolveReport, SolveError> {
    if config.beta_mode == BetaMode::Search && !matches!(config.mode, SolveMode::Saa | SolveMode::Deterministic) {
        return Err(SolveError::Unsupported("oracle handles fixed beta only".into()));
    }
    let nv = spec.nodes.len();
    let big_m = spec.big_m.unwrap_or_else(|| 2.0 * demand.upper.iter().sum::<f64>());
    let mut must_open = vec![false; nv];
    for (k, pair) in spec.od_pairs.iter().enumerate() {
        if demand.upper[k] > 0.0 || demand.lower[k] > 0.0 {
            must_open[pair.origin.0] = true;
            must_open[pair.destination.0] = true;
        }
    }
    // Admissible designs, generated node set by node set.
    let mut designs = Vec::new();
    for zmask in 0u64..(1u64 << nv) {
        let open: Vec<bool> = (0..nv).map(|i| zmask >> i & 1 == 1).collect();
        if (0..nv).any(|i| must_open[i] && !open[i]) {
            continue;
        }
        let slots: Vec<(usize, usize, u32)> = spec
            .arcs
            .iter()
            .enumerate()
            .filter(|(_, arc)| open[arc.tail.0] && open[arc.head.0])
            .flat_map(|(ai, arc)| arc.channels.iter().enumerate().map(move |(t, ch)| (ai, t, ch.max_count)))
            .collect();
        let combos: u64 = slots.iter().map(|s| u64::from(s.2) + 1).product();
        if designs.len() as u64 + combos > ORACLE_LATTICE_CAP {
            return Err(SolveError::LatticeTooLarge {
                count: (designs.len() as u64 + combos) as f64,
                cap: ORACLE_LATTICE_CAP,
            });
        }
        for mut code in 0..combos {
            let mut channels: Vec<Vec<u32>> = spec.arcs.iter().map(|a| vec![0; a.channels.len()]).collect();
            for &(ai, t, mx) in &slots {
                channels[ai][t] = (code % (u64::from(mx) + 1)) as u32;
                code /= u64::from(mx) + 1;
            }
            designs.push(Design {
                open: open.clone(),
                channels,
            });
        }
    }

    let saa_only = matches!(config.mode, SolveMode::Saa | SolveMode::Deterministic);
    let battery = config.battery_rhs;
    let invest = |d: &Design| -> (f64, f64, f64) {
        let mut ch = 0.0;
        for (arc, ys) in spec.arcs.iter().zip(&d.channels) {
            for (c, &y) in arc.channels.iter().zip(ys) {
                ch += c.cost * y as f64;
            }
        }
        let mut inf = 0.0;
        let mut cap = 0.0;
        for (node, &o) in spec.nodes.iter().zip(&d.open) {
            if o {
                inf += node.infrastructure_cost;
                cap += node.capacity_unit_cost * node.airport_capacity;
            }
        }
        (ch, inf, cap)
    };
    let n = demand.samples.len() as f64;
    // Sample-average value: exact for the SAA modes, a lower bound otherwise.
    let saa: Vec<f64> = config.exec.map(&designs, |d| {
        let (ch, inf, cap) = invest(d);
        let mean: f64 = demand
            .samples
            .iter()
            .map(|s| oracle_second_stage(spec, d, s, battery, big_m))
            .sum::<f64>()
            / n;
        mean + ch + inf + cap
    });
    let mut order: Vec<usize> = (0..designs.len()).filter(|&i| saa[i].is_finite()).collect();
    order.sort_by(|&a, &b| saa[a].total_cmp(&saa[b]).then(a.cmp(&b)));

    let exact = |d: &Design| -> f64 {
        if saa_only {
            let (ch, inf, cap) = invest(d);
            let mean: f64 = demand
                .samples
                .iter()
                .map(|s| oracle_second_stage(spec, d, s, battery, big_m))
                .sum::<f64>()
                / n;
            return mean + ch + inf + cap;
        }
        let (ch, inf, cap) = invest(d);
        let mut total = 0.0;
        for s in &demand.samples {
            let (v, _) = oracle_worst_case(spec, d, s, config.beta, &demand.lower, &demand.upper, battery, big_m)
                .expect("pair count checked by caller");
            total += v;
        }
        total / n + config.theta * config.beta + ch + inf + cap
    };
    if !saa_only && demand.upper.len() > ORACLE_MAX_PAIRS {
        return Err(SolveError::Unsupported("too many pairs for the oracle".into()));
    }
    let radius = if saa_only { 0.0 } else { config.theta * config.beta };
    let mut scored: Vec<(usize, f64)> = Vec::new();
    let mut best = f64::INFINITY;
    for &i in &order {
        if saa[i] + radius > best + 1e-9 * best.abs().max(1.0) {
            break;
        }
        let v = exact(&designs[i]);
        best = best.min(v);
        scored.push((i, v));
    }
    if !best.is_finite() {
        return Err(SolveError::RobustlyInfeasible);
    }
    let tol = 1e-9 * best.abs().max(1.0);
    let (win, value) = scored
        .into_iter()
        .filter(|s| s.1 <= best + tol)
        .min_by(|a, b| {
            let (ia, ib) = (invest(&designs[a.0]), invest(&designs[b.0]));
            (ia.0 + ia.1 + ia.2)
                .total_cmp(&(ib.0 + ib.1 + ib.2))
                .then_with(|| designs[a.0].cmp(&designs[b.0]))
        })
        .expect("finite best exists");
    let design = designs[win].clone();
    let (ch, inf, cap) = invest(&design);
    let breakdown = crate::dro::objective::ObjectiveBreakdown {
        transport: value - ch - inf - cap - radius,
        penalty: 0.0,
        radius,
        channel: ch,
        infrastructure: inf,
        capacity: cap,
    };
    let mut diagnostics = crate::report::SolveDiagnostics::default();
    diagnostics.lattice_size = designs.len() as f64;
    diagnostics.designs_bounded = designs.len();
    Ok(SolveReport {
        mode: config.mode,
        design,
        objective: value,
        theta: config.theta,
        beta: if saa_only { 0.0 } else { config.beta },
        breakdown,
        worst_case: Vec::new(),
        diagnostics,
    })
}

/// Knobs for [`random_instance`].
#[derive(Clone, Copy, Debug)]
pub struct RandomShape {
    pub max_nodes: usize,
    pub max_pairs: usize,
    pub max_samples: usize,
    pub max_arcs: usize,
}

impl Default for RandomShape {
    fn default() -> Self {
        RandomShape {
            max_nodes: 4,
            max_pairs: 2,
            max_samples: 3,
            max_arcs: 6,
        }
    }
}

/// A small random instance with one channel type and binary channels.
///
/// Every pair has a direct arc so that some design is always robustly
/// feasible when capacities allow it.
pub fn random_instance(seed: u64, shape: RandomShape) -> (NetworkSpec, DemandModel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nv = rng.random_range(2..=shape.max_nodes.max(2));
    let nodes: Vec<Node> = (0..nv)
        .map(|i| Node {
            name: format!("n{i}"),
            airport_capacity: rng.random_range(40..=120) as f64,
            infrastructure_cost: rng.random_range(0..=200) as f64,
            capacity_unit_cost: rng.random_range(0..=2) as f64 * 0.5,
        })
        .collect();
    let nk = rng.random_range(1..=shape.max_pairs.max(1));
    let mut od_pairs: Vec<OdPair> = Vec::new();
    for k in 0..nk {
        let o = rng.random_range(0..nv);
        let mut d = rng.random_range(0..nv - 1);
        if d >= o {
            d += 1;
        }
        od_pairs.push(OdPair {
            name: format!("p{k}"),
            origin: NodeId(o),
            destination: NodeId(d),
        });
    }
    let mut ends: Vec<(usize, usize)> = Vec::new();
    for p in &od_pairs {
        if !ends.contains(&(p.origin.0, p.destination.0)) {
            ends.push((p.origin.0, p.destination.0));
        }
    }
    let mut all: Vec<(usize, usize)> = (0..nv)
        .flat_map(|i| (0..nv).filter(move |&j| j != i).map(move |j| (i, j)))
        .filter(|e| !ends.contains(e))
        .collect();
    while ends.len() < shape.max_arcs && !all.is_empty() {
        let pick = rng.random_range(0..all.len());
        let e = all.swap_remove(pick);
        if rng.random_bool(0.6) {
            ends.push(e);
        }
    }
    let arcs: Vec<Arc> = ends
        .iter()
        .map(|&(i, j)| Arc {
            tail: NodeId(i),
            head: NodeId(j),
            energy: rng.random_range(1..=5) as f64,
            channels: vec![Channel {
                capacity: rng.random_range(10..=40) as f64,
                cost: rng.random_range(0..=100) as f64,
                max_count: 1,
            }],
            transport_cost: (0..nk).map(|_| rng.random_range(1..=10) as f64).collect(),
        })
        .collect();
    let spec = NetworkSpec {
        nodes,
        arcs,
        channel_types: vec!["standard".into()],
        od_pairs,
        battery_boost: rng.random_range(1..=4) as f64,
        big_m: None,
    };
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for _ in 0..nk {
        let lo = rng.random_range(0..=5) as f64;
        lower.push(lo);
        upper.push(lo + rng.random_range(0..=20) as f64);
    }
    let n = rng.random_range(1..=shape.max_samples.max(1));
    let samples: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..nk)
                .map(|k| {
                    let v: f64 = rng.random_range(lower[k]..=upper[k]);
                    ((v * 4.0).round() / 4.0).clamp(lower[k], upper[k])
                })
                .collect()
        })
        .collect();
    let demand = DemandModel {
        labels: (0..n).map(|j| format!("s{j}")).collect(),
        samples,
        lower,
        upper,
    };
    (spec, demand)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_parallel_arcs() -> (NetworkSpec, Design) {
        let (mut spec, _) = crate::model::tests::single_arc(2.0, 4.0, 10.0);
        let mut second = spec.arcs[0].clone();
        second.transport_cost = vec![3.0];
        second.channels[0].capacity = 100.0;
        spec.arcs.push(second);
        let design = Design::full(&spec);
        (spec, design)
    }

    #[test]
    fn single_arc_is_cost_times_demand() {
        let (spec, _) = crate::model::tests::single_arc(2.0, 100.0, 10.0);
        let q = oracle_second_stage(&spec, &Design::full(&spec), &[10.0], BatteryRhsMode::Literal, 1e4);
        assert!((q - 20.0).abs() < 1e-9);
    }

    #[test]
    fn parallel_arcs_split_greedily() {
        let (spec, design) = two_parallel_arcs();
        let q = oracle_second_stage(&spec, &design, &[10.0], BatteryRhsMode::Literal, 1e4);
        assert!((q - 26.0).abs() < 1e-9, "{q}");
        let v = oracle_second_stage_vertices(&spec, &design, &[10.0], BatteryRhsMode::Literal, 1e4);
        assert!((v - 26.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn worst_case_slope_rules() {
        // Q(b) = 2b on the single arc; the sample sits at 5 in [0, 20].
        let (spec, _) = crate::model::tests::single_arc(2.0, 100.0, 10.0);
        let d = Design::full(&spec);
        let (v, b) = oracle_worst_case(&spec, &d, &[5.0], 3.0, &[0.0], &[20.0], BatteryRhsMode::Literal, 1e4).unwrap();
        assert_eq!(b, vec![5.0]);
        assert!((v - 10.0).abs() < 1e-9);
        let (v, b) = oracle_worst_case(&spec, &d, &[5.0], 1.0, &[0.0], &[20.0], BatteryRhsMode::Literal, 1e4).unwrap();
        assert_eq!(b, vec![20.0]);
        assert!((v - (40.0 - 15.0)).abs() < 1e-9);
    }

    #[test]
    fn vertex_enumeration_small_lp() {
        // min x + 2y s.t. x + y = 3, x <= 2.
        let v = vertex_enumeration_lp(&[1.0, 2.0], &[vec![1.0, 1.0]], &[3.0], &[vec![1.0, 0.0]], &[2.0]);
        assert_eq!(v, Some(4.0));
        let (b, _) = bland_lp(&[1.0, 2.0], &[vec![1.0, 1.0]], &[3.0], &[vec![1.0, 0.0]], &[2.0]).unwrap();
        assert!((b - 4.0).abs() < 1e-12);
    }

    #[test]
    fn random_instances_are_valid() {
        for seed in 0..50 {
            let (spec, demand) = random_instance(seed, RandomShape::default());
            let diags = crate::model::validate_instance(&spec, &demand);
            assert!(diags.is_empty(), "seed {seed}: {diags:?}");
        }
    }
}
