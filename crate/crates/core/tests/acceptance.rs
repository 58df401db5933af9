//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use chrono::{Datelike, NaiveDate};
use common::*;
use gridimpact::dataset::CHARGING_WINDOW;
use gridimpact::ingest::{compose_scenarios, DailyProfile};
use gridimpact::network::{Bus, BusId, BusKind, CableSegment, NetworkModel};
use gridimpact::pipeline::{cmd_run, Overrides};
use gridimpact::powerflow::{calculated_injections, jacobian, JacobianLayout};
use gridimpact::report::{branch_limits, render_tables, MANIFEST_FILE, TABLE_FILES};
use gridimpact::scenario::{
    run_day, run_study, solve_step, voltage_range, worst_swing_month, FailureKind, PreparedNetwork,
    StepOutcome, StudyOptions, StudyResult, StudyView,
};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cold(jobs: Option<usize>) -> StudyOptions {
    StudyOptions {
        warm_start: false,
        jobs,
        ..StudyOptions::default()
    }
}

fn bus(id: &str, kind: BusKind) -> Bus {
    Bus {
        id: BusId::new(id),
        name: String::new(),
        kind,
        nominal_kv: 1.0,
    }
}

fn cable(from: &str, to: &str, r: f64, x: f64) -> CableSegment {
    CableSegment {
        from_bus: BusId::new(from),
        to_bus: BusId::new(to),
        length_miles: 1.0,
        r_per_mile: r,
        x_per_mile: x,
        limit_mw: None,
    }
}

/// Fixed-point iteration V_i = (conj(S_i / V_i) - Σ_{j≠i} Y_ij V_j) / Y_ii
/// on an independently assembled dense admittance matrix.
fn gauss_seidel(n: usize, lines: &[(usize, usize, f64, f64)], s: &[Complex64]) -> Vec<Complex64> {
    let mut y = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for &(a, b, r, x) in lines {
        let yl = Complex64::new(1.0, 0.0) / Complex64::new(r, x);
        y[a][a] += yl;
        y[b][b] += yl;
        y[a][b] -= yl;
        y[b][a] -= yl;
    }
    let mut v = vec![Complex64::new(1.0, 0.0); n];
    for _ in 0..100_000 {
        let mut delta: f64 = 0.0;
        for i in 1..n {
            let sum: Complex64 = (0..n).filter(|&j| j != i).map(|j| y[i][j] * v[j]).sum();
            let next = ((s[i] / v[i]).conj() - sum) / y[i][i];
            delta = delta.max((next - v[i]).norm());
            v[i] = next;
        }
        if delta < 1e-14 {
            break;
        }
    }
    v
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let net = PreparedNetwork::new(toy_feeder(&[(0.0, 0.1)], None)).map_err(|e| e.to_string())?;
    let opts = StudyOptions::default().solver;
    let sol = match solve_step(
        &net,
        &constant_day(date(1, 1), &[("L1", 0.2, 0.0)]),
        0,
        &opts,
    ) {
        StepOutcome::Converged(s) => s,
        StepOutcome::Failed(f) => return Err(format!("two-bus failed: {f:?}")),
    };
    let px: f64 = 0.2 * 0.1;
    let a = (1.0 + (1.0 - 4.0 * px * px).sqrt()) / 2.0;
    let oracle = a.hypot(px);
    let err2 = (sol.v_mag[1] - oracle).abs();
    check(err2 <= 1e-9, || format!("two-bus |V2| error {err2:e}"))?;

    let model = NetworkModel {
        s_base_mva: 1.0,
        buses: vec![
            bus("S", BusKind::Slack),
            bus("A", BusKind::Load),
            bus("B", BusKind::Load),
        ],
        cables: vec![
            cable("S", "A", 0.02, 0.08),
            cable("A", "B", 0.03, 0.12),
            cable("B", "S", 0.025, 0.1),
        ],
        transformers: vec![],
        generators: vec![],
    };
    let net = PreparedNetwork::new(model).map_err(|e| e.to_string())?;
    let profile = constant_day(date(1, 1), &[("A", 0.6, 0.25), ("B", -0.2, 0.1)]);
    let sol = solve_step(&net, &profile, 0, &opts)
        .solution()
        .cloned()
        .ok_or("triangle did not converge")?;
    let s = [
        Complex64::new(0.0, 0.0),
        Complex64::new(-0.6, -0.25),
        Complex64::new(0.2, -0.1),
    ];
    let gs = gauss_seidel(
        3,
        &[(0, 1, 0.02, 0.08), (1, 2, 0.03, 0.12), (2, 0, 0.025, 0.1)],
        &s,
    );
    let err3 = (0..3)
        .map(|i| (Complex64::from_polar(sol.v_mag[i], sol.v_ang[i]) - gs[i]).norm())
        .fold(0.0, f64::max);
    check(err3 <= 1e-7, || {
        format!("triangle deviates {err3:e} from fixed-point oracle")
    })?;
    let secs = t.elapsed().as_secs_f64();
    check(secs < 1.0, || format!("took {secs:.3} s"))?;
    Ok(format!(
        "two-bus error {err2:.1e}, triangle error {err3:.1e}, {secs:.3} s"
    ))
}

fn criterion_2() -> Outcome {
    let inputs = bundled_inputs();
    let t = Instant::now();
    let study = run_study(
        &inputs.network,
        &inputs.base,
        &inputs.ev,
        &[1.0, 4.0],
        &cold(Some(1)),
    )
    .map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let s_base = inputs.network.s_base_mva();
    check(study.attempted_solves() == 2304, || {
        format!("{} solves", study.attempted_solves())
    })?;
    let (mut worst_balance, mut min_loss, mut converged) = (0.0f64, f64::INFINITY, 0);
    for day in study.days.values() {
        for (k, s) in day.steps.iter().enumerate() {
            let Some(sol) = s.solution() else { continue };
            converged += 1;
            let balance = (sol.slack_p_mw - day.total_load_mw[k] - sol.total_loss_mw()) / s_base;
            worst_balance = worst_balance.max(balance.abs());
            for f in &sol.branch_flows {
                min_loss = min_loss.min(f.loss_p_mw / s_base);
            }
        }
    }
    check(worst_balance <= 1e-6, || {
        format!("power balance off by {worst_balance:e} pu")
    })?;
    check(min_loss >= -1e-9, || format!("branch loss {min_loss:e} pu"))?;
    check(secs < 10.0, || {
        format!("study took {secs:.2} s single-threaded")
    })?;
    Ok(format!(
        "{converged}/2304 converged, max imbalance {worst_balance:.1e} pu, min branch loss {min_loss:.1e} pu, {secs:.2} s on 1 thread"
    ))
}

fn criterion_3() -> Outcome {
    let inputs = bundled_inputs();
    let net = &inputs.network;
    let n = net.bus_ids().len();
    let layout = JacobianLayout::minimum_degree(net.ybus(), net.slack());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    // Feasible states: converged solutions of randomly drawn study steps.
    for _ in 0..10 {
        let month = rng.gen_range(0..inputs.base.len());
        let factor = [0.0, 1.0, 4.0][rng.gen_range(0..3)];
        let profile = compose_scenarios(
            &inputs.base[month..=month],
            &inputs.ev[month..=month],
            factor,
        )
        .map_err(|e| e.to_string())?
        .combined(0);
        let step = rng.gen_range(0..96);
        let sol = solve_step(net, &profile, step, &StudyOptions::default().solver)
            .solution()
            .cloned()
            .ok_or("sampled step did not converge")?;
        let (v_mag, v_ang) = (sol.v_mag, sol.v_ang);
        let jac = jacobian(net.ybus(), &v_mag, &v_ang, &layout).to_dense();
        let h = 1e-6;
        let (mut num, mut den) = (0.0, 0.0);
        for k in (0..n).filter(|&k| k != net.slack()) {
            for (is_mag, col) in [
                (false, layout.theta[k].unwrap()),
                (true, layout.vmag[k].unwrap()),
            ] {
                let (mut vp, mut ap, mut vm, mut am) =
                    (v_mag.clone(), v_ang.clone(), v_mag.clone(), v_ang.clone());
                if is_mag {
                    vp[k] += h;
                    vm[k] -= h;
                } else {
                    ap[k] += h;
                    am[k] -= h;
                }
                let (pp, qp) = calculated_injections(net.ybus(), &vp, &ap);
                let (pm, qm) = calculated_injections(net.ybus(), &vm, &am);
                for i in (0..n).filter(|&i| i != net.slack()) {
                    let dp = (pp[i] - pm[i]) / (2.0 * h);
                    let dq = (qp[i] - qm[i]) / (2.0 * h);
                    let jp = jac[layout.theta[i].unwrap()][col];
                    let jq = jac[layout.vmag[i].unwrap()][col];
                    num += (dp - jp).powi(2) + (dq - jq).powi(2);
                    den += jp * jp + jq * jq;
                }
            }
        }
        worst = worst.max((num / den).sqrt());
    }
    check(worst <= 1e-5, || format!("relative error {worst:e}"))?;
    Ok(format!(
        "max relative error {worst:.1e} over 10 states, {n} buses"
    ))
}

fn criterion_4() -> Outcome {
    let mut totals: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    for path in bundled().meters() {
        let text = fs::read_to_string(&path).map_err(|e| e.to_string())?;
        for line in text.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            if f[3] == "pv_generation" {
                continue;
            }
            let d = NaiveDate::parse_from_str(&f[0][..10], "%Y-%m-%d").unwrap();
            let k = f[0][11..13].parse::<usize>().unwrap() * 4
                + f[0][14..16].parse::<usize>().unwrap() / 15;
            totals.entry(d).or_insert_with(|| vec![0.0; 96])[k] += f[4].parse::<f64>().unwrap();
        }
    }
    let picked = &bundled_inputs().dates;
    let mut ties = 0;
    for (i, month) in (1..=12u32).enumerate() {
        let peak = |d: &NaiveDate| totals[d].iter().cloned().fold(f64::MIN, f64::max);
        let days: Vec<&NaiveDate> = totals
            .keys()
            .filter(|d| d.month() == month && totals[*d].len() == 96)
            .collect();
        let best = days.iter().map(|d| peak(d)).fold(f64::MIN, f64::max);
        let first = **days.iter().find(|d| peak(d) == best).unwrap();
        ties += days.iter().filter(|d| peak(d) == best).count() - 1;
        check(picked[i] == first, || {
            format!("month {month}: picked {} but scan gives {first}", picked[i])
        })?;
        for d in &days {
            check(peak(&picked[i]) >= peak(d), || {
                format!("month {month}: {d} peaks higher")
            })?;
        }
    }
    Ok(format!(
        "12 months match the raw-CSV scan ({ties} tied days)"
    ))
}

fn base_vs_ev4() -> &'static StudyResult {
    use std::sync::OnceLock;
    static CELL: OnceLock<StudyResult> = OnceLock::new();
    CELL.get_or_init(|| {
        let inputs = bundled_inputs();
        run_study(
            &inputs.network,
            &inputs.base,
            &inputs.ev,
            &[0.0, 4.0],
            &cold(None),
        )
        .unwrap()
    })
}

fn criterion_5() -> Outcome {
    let inputs = bundled_inputs();
    let study = base_vs_ev4();
    let info = &bundled().dataset.info;
    let bus = &info.ev_buses[0];
    let i = study.bus_position(bus).unwrap();
    let mut compared = 0;
    for (m, ev) in study.months.iter().zip(&inputs.ev) {
        let (b, e) = (
            study.day(*m, "base").unwrap(),
            study.day(*m, "ev_x4").unwrap(),
        );
        for k in 0..96 {
            if ev.load(k, bus).p_mw == 0.0 {
                continue;
            }
            let (vb, ve) = (b.steps[k].solution(), e.steps[k].solution());
            let (vb, ve) = (
                vb.ok_or("base step failed")?.v_mag[i],
                ve.ok_or("ev step failed")?.v_mag[i],
            );
            check(ve <= vb, || {
                format!("month {m} step {k}: ev {ve} > base {vb}")
            })?;
            compared += 1;
        }
    }
    let rec = worst_swing_month(study, bus, "base", "ev_x4").map_err(|e| e.to_string())?;
    let mut brute = (0, f64::NEG_INFINITY);
    for m in 1..=12 {
        let range = |l: &str| {
            let v: Vec<f64> = study
                .day(m, l)
                .unwrap()
                .steps
                .iter()
                .map(|s| s.solution().unwrap().v_mag[i])
                .collect();
            v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
        };
        let d = range("ev_x4") - range("base");
        if d > brute.1 {
            brute = (m, d);
        }
    }
    check(rec.month == brute.0, || {
        format!(
            "selected month {} but brute force gives {}",
            rec.month, brute.0
        )
    })?;
    check(rec.month == info.ev_heavy_month, || {
        format!(
            "swing month {} is not the designated month {}",
            rec.month, info.ev_heavy_month
        )
    })?;
    Ok(format!(
        "bus {bus}: ev x4 <= base at {compared} EV steps; worst swing month {} (delta {:.4} pu)",
        rec.month, rec.delta_pu
    ))
}

fn criterion_6() -> Outcome {
    let study = base_vs_ev4();
    let (from, to) = &bundled().dataset.info.feeder_head;
    let (lo, hi) = CHARGING_WINDOW;
    let mut peaks = Vec::new();
    for m in 1..=12 {
        let b = study
            .branch_p_from(from, to, m, "base")
            .ok_or("missing base flows")?;
        let e = study
            .branch_p_from(from, to, m, "ev_x4")
            .ok_or("missing ev flows")?;
        let (b, e): (Vec<f64>, Vec<f64>) = (
            b.into_iter().flatten().collect(),
            e.into_iter().flatten().collect(),
        );
        check(b.len() == 96 && e.len() == 96, || {
            format!("month {m}: non-converged steps")
        })?;
        for k in 0..96 {
            check(e[k] >= b[k], || {
                format!("month {m} step {k}: ev {} < base {}", e[k], b[k])
            })?;
        }
        let peak = (0..96).fold(0, |best, k| if e[k] > e[best] { k } else { best });
        check((lo..=hi).contains(&peak), || {
            format!("month {m}: ev x4 peak at step {peak}")
        })?;
        peaks.push(peak);
    }
    Ok(format!(
        "feeder head {from}->{to}: ev x4 >= base at all steps; peak steps {peaks:?}"
    ))
}

fn strip_timestamps(text: &str) -> String {
    let mut v: serde_json::Value = serde_json::from_str(text).unwrap();
    let obj = v.as_object_mut().unwrap();
    obj.remove("started_at");
    obj.remove("finished_at");
    v.to_string()
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        cmd_run(&bundled().config(), out, &Overrides::default()).map_err(|e| e.to_string())?;
    }
    let mut bytes = 0;
    for name in TABLE_FILES.iter().chain([&MANIFEST_FILE]) {
        let (x, y) = (
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
        );
        check(x == y, || format!("{name} differs between runs"))?;
        bytes += x.len();
    }
    let run =
        |d: &Path| strip_timestamps(&fs::read_to_string(d.join("run_manifest.json")).unwrap());
    check(run(&a) == run(&b), || {
        "run manifests differ beyond timestamps".into()
    })?;

    let inputs = bundled_inputs();
    let opts = cold(None);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for month in [0usize, 3, 7] {
        let profile =
            compose_scenarios(&inputs.base[month..=month], &inputs.ev[month..=month], 4.0)
                .map_err(|e| e.to_string())?
                .combined(0);
        let reference =
            run_day(&inputs.network, &profile, "ev_x4", &opts).map_err(|e| e.to_string())?;
        let mut order: Vec<usize> = (0..96).collect();
        order.shuffle(&mut rng);
        let mut steps = vec![None; 96];
        for k in order {
            steps[k] = Some(solve_step(&inputs.network, &profile, k, &opts.solver));
        }
        let steps: Vec<StepOutcome> = steps.into_iter().flatten().collect();
        check(steps == reference.steps, || {
            format!("month index {month}: shuffled order differs")
        })?;
    }
    Ok(format!(
        "two cmd_run outputs identical ({bytes} bytes); shuffled step order identical for 3 days"
    ))
}

fn bits(study: &StudyResult) -> Vec<u64> {
    let mut out = Vec::new();
    for day in study.days.values() {
        for s in &day.steps {
            let sol = s.solution().unwrap();
            out.extend(sol.v_mag.iter().chain(&sol.v_ang).map(|x| x.to_bits()));
            for f in &sol.branch_flows {
                out.extend(
                    [
                        f.from_p_mw,
                        f.from_q_mvar,
                        f.to_p_mw,
                        f.to_q_mvar,
                        f.loss_p_mw,
                        f.loss_q_mvar,
                    ]
                    .map(f64::to_bits),
                );
            }
        }
    }
    out
}

fn criterion_8() -> Outcome {
    let inputs = bundled_inputs();
    let net = &inputs.network;
    let empty: Vec<DailyProfile> = inputs.dates.iter().map(|d| constant_day(*d, &[])).collect();
    let zero =
        run_study(net, &empty, &empty, &[0.0, 4.0], &cold(None)).map_err(|e| e.to_string())?;
    for day in zero.days.values() {
        for s in &day.steps {
            let sol = s.solution().ok_or("zero-injection step failed")?;
            check(sol.v_mag.iter().all(|&v| v == 1.0), || {
                "|V| != 1.0 in zero study".into()
            })?;
            check(
                sol.branch_flows.iter().all(|f| {
                    [
                        f.from_p_mw,
                        f.from_q_mvar,
                        f.to_p_mw,
                        f.to_q_mvar,
                        f.loss_p_mw,
                        f.loss_q_mvar,
                    ]
                    .iter()
                    .all(|&x| x == 0.0)
                }),
                || "non-zero flow in zero study".into(),
            )?;
        }
    }
    let scaled =
        run_study(net, &inputs.base, &inputs.ev, &[0.0], &cold(None)).map_err(|e| e.to_string())?;
    let base_only =
        run_study(net, &inputs.base, &empty, &[0.0], &cold(None)).map_err(|e| e.to_string())?;
    check(bits(&scaled) == bits(&base_only), || {
        "ev_scale 0 study differs bitwise from base".into()
    })?;
    let limits = branch_limits(net);
    let (ta, _) = render_tables(&scaled, &limits).map_err(|e| e.to_string())?;
    let (tb, _) = render_tables(&base_only, &limits).map_err(|e| e.to_string())?;
    check(ta == tb, || {
        "ev_scale 0 tables differ from base tables".into()
    })?;
    Ok(format!(
        "{} zero-injection solves flat and lossless; ev_scale 0 equals base over {} values",
        zero.attempted_solves(),
        bits(&scaled).len()
    ))
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    let topo = serde_json::to_string_pretty(&toy_feeder(&[(0.0, 0.1)], None)).unwrap();
    fs::write(root.join("topology.json"), topo).unwrap();
    let mut csv = String::from("timestamp,meter_id,bus_id,kind,p_kw,q_kvar\n");
    // Full year; the first of each month carries an infeasible 15 pu interval.
    let mut d = date(1, 1);
    while d.year() == 2023 {
        for k in 0..96 {
            let p = match (d.day(), k) {
                (1, 7) => 15_000.0,
                (1, _) => 100.0 + k as f64,
                _ => 50.0,
            };
            csv.push_str(&format!(
                "{d}T{:02}:{:02}:00,M,L1,building,{p},0\n",
                k / 4,
                (k % 4) * 15
            ));
        }
        d = d.succ_opt().unwrap();
    }
    fs::write(root.join("m.csv"), csv).unwrap();
    fs::write(
        root.join("config.json"),
        r#"{"topology": "topology.json", "meters": ["m.csv"], "ev_scale_factors": [0, 1]}"#,
    )
    .unwrap();
    let out = root.join("study");
    let run = cmd_run(&root.join("config.json"), &out, &Overrides::default())
        .map_err(|e| format!("study aborted: {e}"))?;
    let study = &run.study;
    for day in study.days.values() {
        match &day.steps[7] {
            StepOutcome::Failed(f) => check(f.kind == FailureKind::NonConvergence, || {
                format!("marker is {:?}", f.kind)
            })?,
            StepOutcome::Converged(_) => return Err("P = 15 pu step converged".into()),
        }
        check(day.non_converged() == 1, || "other steps failed".into())?;
    }
    check(
        run.manifest.non_converged == 24 && run.run.non_converged == 24,
        || {
            format!(
                "manifest counts {} / {}",
                run.manifest.non_converged, run.run.non_converged
            )
        },
    )?;
    check(run.manifest.attempted_solves == 12 * 96 * 2, || {
        "solve count".into()
    })?;
    let l1 = BusId::new("L1");
    let v = study.bus_voltages(&l1, 5, "base").unwrap();
    let converged: Vec<f64> = v.iter().flatten().copied().collect();
    let oracle = converged.iter().cloned().fold(f64::MIN, f64::max)
        - converged.iter().cloned().fold(f64::MAX, f64::min);
    check(voltage_range(&v) == Some(oracle), || {
        "range statistic includes the failed step".into()
    })?;
    let swing = fs::read_to_string(out.join("swing.csv")).unwrap();
    let row = swing
        .lines()
        .find(|l| l.starts_with("L1,"))
        .ok_or("no swing row")?;
    let base_range: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    check(base_range == oracle, || {
        format!("swing.csv range {base_range} != {oracle}")
    })?;
    Ok(format!(
        "24 NonConvergence markers recorded, {} other steps solved, range excludes them",
        run.manifest.attempted_solves - 24
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("solver oracle equivalence", criterion_1),
        ("conservation suite", criterion_2),
        ("Jacobian vs finite differences", criterion_3),
        ("worst-case-day property", criterion_4),
        ("EV-scaling shape", criterion_5),
        ("flow-comparison shape", criterion_6),
        ("determinism", criterion_7),
        ("zero/identity suite", criterion_8),
        ("non-convergence handling", criterion_9),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let t = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  {}. {name}: {detail} [{secs:.2} s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {}. {name}: {why} [{secs:.2} s]", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
