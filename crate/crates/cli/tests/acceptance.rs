//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::process::ExitCode;

use beamctl::export::{render_record, render_sweep, write_all, Format, Rendered};
use beamctl::{run_experiment, run_sweep, ExperimentConfig, SessionRecord, SweepTable};
use beamctl_core::a2rc::{check_first_step_branch, FirstStepBranch};
use beamctl_core::oracle::{audit_scenario, random_scenario, Audit, ScenarioSpec};
use beamctl_core::session::{Method, StepSummary};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const TOL_COMPLEX: f64 = 2e-3;
const TOL_DB: f64 = 0.05;
const TOL_J_REL: f64 = 0.02;

#[derive(Default)]
struct Checks {
    failures: Vec<String>,
    count: usize,
}

impl Checks {
    fn expect(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.count += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    fn complex(&mut self, name: &str, got: Complex64, want: (f64, f64)) {
        let ok = (got.re - want.0).abs() <= TOL_COMPLEX && (got.im - want.1).abs() <= TOL_COMPLEX;
        self.expect(ok, || {
            format!("{name} = {:.4}{:+.4}j, want {}{:+}j", got.re, got.im, want.0, want.1)
        });
    }

    fn real(&mut self, name: &str, got: f64, want: f64) {
        self.expect((got - want).abs() <= TOL_COMPLEX, || {
            format!("{name} = {got:.4}, want {want}")
        });
    }

    fn db(&mut self, name: &str, got: f64, want: f64) {
        self.expect((got - want).abs() <= TOL_DB, || {
            format!("{name} = {got:.4} dB, want {want} dB")
        });
    }

    fn rel(&mut self, name: &str, got: f64, want: f64) {
        let ok = ((got - want) / want).abs() <= TOL_J_REL;
        self.expect(ok, || format!("{name} = {got:.5e}, want {want:e}"));
    }

    fn at_most(&mut self, name: &str, got: f64, limit: f64) {
        self.expect(got <= limit, || format!("{name} = {got:e} exceeds {limit:e}"));
    }

    fn zero(&mut self, name: &str, got: usize) {
        self.expect(got == 0, || format!("{name} = {got}, want 0"));
    }
}

fn step(record: &SessionRecord, method: Method, k: usize) -> &StepSummary {
    &record.run(method).expect("method present").steps[k - 1]
}

fn c(v: [f64; 2]) -> Complex64 {
    Complex64::new(v[0], v[1])
}

fn criterion1(e1: &SessionRecord) -> Checks {
    let mut ck = Checks::default();
    let s = step(e1, Method::Oparc, 1);
    let g = s.gamma.as_ref().expect("gamma summary");
    let b = s.beta.as_ref().expect("beta summary");
    ck.complex("c_gamma", c(g.circle.center), (-0.1704, -0.0315));
    ck.complex("d", g.d_point, (-8.5231, -1.5766));
    ck.complex("gamma_a", g.gamma_a, (-0.1559, -0.0288));
    ck.complex("gamma_b", g.gamma_b, (-0.1849, -0.0342));
    ck.expect(g.zeta == 1.0, || format!("zeta = {}, want +1", g.zeta));
    ck.complex("c_beta", c(b.circle.center), (-0.1488, 0.0));
    ck.real("R_beta", b.circle.radius, 1.7171);
    ck.real("beta_star", b.beta_star, 1.5683);
    ck.real("beta_rejected", b.beta_rejected, -1.8659);
    let mu = step(e1, Method::A2rc, 1).mu.as_ref().expect("mu summary").mu;
    ck.expect((mu - g.gamma_star).norm() <= 1e-12, || {
        format!("mu_1 = {mu} differs from gamma_star = {}", g.gamma_star)
    });
    ck
}

fn a2rc_step2(ck: &mut Checks, rec: &SessionRecord, mu: (f64, f64), newest: (f64, f64), delta: (f64, f64)) {
    let m = step(rec, Method::A2rc, 2).mu.as_ref().expect("mu summary");
    ck.complex("mu_2", m.mu, mu);
    ck.complex("newest INR", m.newest_inr, newest);
    ck.complex("INR delta of step 1", m.deltas[0], delta);
}

fn criterion2(e1: &SessionRecord) -> Checks {
    let mut ck = Checks::default();
    let o = step(e1, Method::Oparc, 2);
    ck.complex("gamma_star", o.gamma.as_ref().unwrap().gamma_star, (-0.0685, -0.0399));
    ck.real("beta_star", o.beta.as_ref().unwrap().beta_star, 0.2504);
    let p = step(e1, Method::Parc, 2);
    ck.complex(
        "gamma_rejected",
        p.gamma.as_ref().unwrap().gamma_rejected,
        (-0.1148, -0.0695),
    );
    ck.real("beta_rejected", p.beta.as_ref().unwrap().beta_rejected, -0.4277);
    a2rc_step2(&mut ck, e1, (-0.0674, -0.0393), (0.2465, 0.0001), (-0.4120, 2.5879));
    ck
}

fn criterion3(e1: &SessionRecord) -> Checks {
    let mut ck = Checks::default();
    let table = [
        (Method::A2rc, 5.05, 4.72e-3, 10.0482, 10.0026),
        (Method::Parc, 0.86, 7.84e-3, 10.0331, 9.9653),
        (Method::Oparc, 0.51, 4.69e-3, 10.0482, 10.0074),
    ];
    for (m, d, j, g1, g2) in table {
        let s2 = step(e1, m, 2);
        ck.db(&format!("{m} D"), s2.metrics.d_db.unwrap_or(f64::NAN), d);
        ck.rel(&format!("{m} J"), s2.metrics.j_rms, j);
        ck.db(&format!("{m} G1"), step(e1, m, 1).gain_db, g1);
        ck.db(&format!("{m} G2"), s2.gain_db, g2);
    }
    ck
}

fn criterion4(e2: &SessionRecord) -> Checks {
    let mut ck = Checks::default();
    a2rc_step2(&mut ck, e2, (-0.5931, 0.8040), (-0.3923, -0.4011), (-1.8001, 0.0334));
    let p = step(e2, Method::Parc, 2);
    ck.complex(
        "gamma_rejected",
        p.gamma.as_ref().unwrap().gamma_rejected,
        (-0.7108, 0.7171),
    );
    ck.real("beta_rejected", p.beta.as_ref().unwrap().beta_rejected, -0.8522);
    let o = step(e2, Method::Oparc, 2);
    let g = o.gamma.as_ref().unwrap();
    ck.complex("gamma_star", g.gamma_star, (0.8352, -0.8438));
    ck.complex("gamma_b", g.gamma_b, (0.8352, -0.8438));
    ck.real("beta_star", o.beta.as_ref().unwrap().beta_star, -0.0577);
    ck
}

fn criterion5(e2: &SessionRecord) -> Checks {
    let mut ck = Checks::default();
    let table = [
        (Method::A2rc, 31.6001, 1.0685, 2.5060),
        (Method::Parc, 10.7083, 2.5149, 0.7366),
        (Method::Oparc, 1.2595, 0.0624, 13.1370),
    ];
    for (m, d, j, g2) in table {
        let s2 = step(e2, m, 2);
        ck.db(&format!("{m} D"), s2.metrics.d_db.unwrap_or(f64::NAN), d);
        ck.rel(&format!("{m} J"), s2.metrics.j_rms, j);
        ck.db(&format!("{m} G2"), s2.gain_db, g2);
    }
    ck
}

fn dominance(ck: &mut Checks, label: &str, table: &SweepTable, points: usize) {
    let oparc: Vec<_> = table.rows_for(Method::Oparc).collect();
    ck.expect(oparc.len() == points, || {
        format!("{label}: {} OPARC rows, want {points}", oparc.len())
    });
    for rival in [Method::Parc, Method::A2rc] {
        for (o, r) in oparc.iter().zip(table.rows_for(rival)) {
            let (od, rd) = (o.d_db.unwrap_or(f64::NAN), r.d_db.unwrap_or(f64::NAN));
            ck.expect(o.rho_db == r.rho_db && od <= rd, || {
                format!("{label} rho={}: OPARC D {od:.4} > {rival} D {rd:.4}", o.rho_db)
            });
            ck.expect(o.j_rms <= r.j_rms, || {
                format!(
                    "{label} rho={}: OPARC J {:.4e} > {rival} J {:.4e}",
                    o.rho_db, o.j_rms, r.j_rms
                )
            });
        }
    }
}

fn criterion6(s1: &SweepTable, s2: &SweepTable) -> Checks {
    let mut ck = Checks::default();
    dominance(&mut ck, "experiment 1", s1, 61);
    dominance(&mut ck, "experiment 2", s2, 41);
    ck
}

const AUDIT_SESSIONS: u64 = 500;
const AUDIT_SAMPLES: usize = 720;

fn criterion7() -> (Checks, String) {
    let mut ck = Checks::default();
    let audits: Vec<_> = (0..AUDIT_SESSIONS)
        .into_par_iter()
        .map(|i| {
            let sc = random_scenario(
                &mut ChaCha8Rng::seed_from_u64(0xACCE_0000 + i),
                &ScenarioSpec::default(),
            );
            audit_scenario(&sc, AUDIT_SAMPLES)
        })
        .collect();
    let mut a = Audit::default();
    let mut errors = 0;
    for r in &audits {
        match r {
            Ok(x) => a.merge(x),
            Err(_) => errors += 1,
        }
    }
    ck.zero("sessions with engine errors", errors);
    ck.at_most("exact-control |dL|/rho", a.max_level_error, 1e-9);
    ck.at_most("Hermitian defect", a.max_hermitian_defect, 1e-10);
    ck.zero("non-PD T_k", a.non_pd_steps);
    ck.at_most("Woodbury vs direct inverse", a.max_woodbury_gap, 1e-8);
    ck.zero("gamma-circle scan beats gamma_star", a.gamma_scan_violations);
    ck.zero("double-argmax disagreements", a.argmax_disagreements);
    ck.at_most("gamma/beta round trip", a.max_roundtrip_error, 1e-10);
    ck.at_most("steering-span residual", a.max_span_residual, 1e-8);
    ck.zero("beta sign mispredictions", a.sign_mismatches);

    let mut rng = ChaCha8Rng::seed_from_u64(0xC0_2011);
    let mut branches = [0usize; 2];
    let mut bad = 0;
    for i in 0..100 {
        let sc = random_scenario(
            &mut rng,
            &ScenarioSpec {
                max_steps: 1,
                ..ScenarioSpec::default()
            },
        );
        let rho_db: f64 = if i % 2 == 0 {
            rng.gen_range(-60.0..-3.0)
        } else {
            rng.gen_range(-3.0..0.0)
        };
        match check_first_step_branch(&sc.model, sc.theta0, sc.steps[0].0, 10f64.powf(rho_db / 10.0)) {
            Ok(rep) => {
                let scale = rep.gamma_star.norm().max(rep.gamma_rejected.norm()).max(1.0);
                bad += usize::from(!rep.holds(1e-9 * scale));
                branches[(rep.branch == FirstStepBranch::MatchesRejected) as usize] += 1;
            }
            Err(_) => bad += 1,
        }
    }
    ck.zero("first-step branch disagreements", bad);
    let detail = format!(
        "{} sessions, {} steps, level err {:.1e}, Woodbury {:.1e}, span {:.1e}, branches {}/{}",
        AUDIT_SESSIONS, a.steps, a.max_level_error, a.max_woodbury_gap, a.max_span_residual, branches[0], branches[1]
    );
    (ck, detail)
}

fn exports(name: &str) -> Rendered {
    let cfg = ExperimentConfig::bundled(name).expect("bundled config");
    let record = run_experiment(&cfg).expect("experiment runs");
    let mut files = Vec::new();
    for format in [Format::Csv, Format::Json] {
        for (n, body) in render_record(&record, format).expect("render") {
            files.push((format!("{name}/run/{n}"), body));
        }
    }
    for (n, body) in render_sweep(&run_sweep(&cfg).expect("sweep runs")).expect("render") {
        files.push((format!("{name}/sweep/{n}"), body));
    }
    files
}

fn criterion8() -> Checks {
    let mut ck = Checks::default();
    let dirs = [
        tempfile::tempdir().expect("tempdir"),
        tempfile::tempdir().expect("tempdir"),
    ];
    let mut written = Vec::new();
    for dir in &dirs {
        let mut run = Vec::new();
        for name in beamctl::config::BUNDLED_EXPERIMENTS {
            let files = exports(name);
            let paths = write_all(
                &dir.path().join(name),
                &files.iter().map(|(n, b)| (n.replace('/', "_"), b.clone())).collect(),
            )
            .expect("write exports");
            for p in paths {
                let rel = p.strip_prefix(dir.path()).unwrap().to_path_buf();
                run.push((rel, std::fs::read(&p).expect("read back")));
            }
        }
        written.push(run);
    }
    ck.expect(!written[0].is_empty(), || "no files exported".into());
    ck.expect(written[0].len() == written[1].len(), || {
        "runs exported different file sets".into()
    });
    for ((pa, a), (pb, b)) in written[0].iter().zip(&written[1]) {
        ck.expect(pa == pb && a == b, || format!("{} differs between runs", pa.display()));
    }
    ck
}

fn main() -> ExitCode {
    let e1 = run_experiment(&ExperimentConfig::bundled("experiment1").unwrap()).expect("experiment 1 runs");
    let e2 = run_experiment(&ExperimentConfig::bundled("experiment2").unwrap()).expect("experiment 2 runs");
    let s1 = run_sweep(&ExperimentConfig::bundled("experiment1").unwrap()).expect("sweep 1 runs");
    let s2 = run_sweep(&ExperimentConfig::bundled("experiment2").unwrap()).expect("sweep 2 runs");
    let (c7, c7_detail) = criterion7();

    let results = [
        (
            1,
            "experiment 1, step 1 circle and selection parameters",
            criterion1(&e1),
            String::new(),
        ),
        (
            2,
            "experiment 1, step 2 parameters for all three methods",
            criterion2(&e1),
            String::new(),
        ),
        (3, "experiment 1 table: D, J, G1, G2", criterion3(&e1), String::new()),
        (4, "experiment 2, step 2 parameters", criterion4(&e2), String::new()),
        (5, "experiment 2 table: D, J, G2", criterion5(&e2), String::new()),
        (
            6,
            "sweep dominance of OPARC on D and J",
            criterion6(&s1, &s2),
            String::new(),
        ),
        (7, "randomized property suite", c7, c7_detail),
        (8, "byte-identical exports across runs", criterion8(), String::new()),
    ];

    let mut failed = 0;
    for (n, label, ck, detail) in &results {
        let status = if ck.failures.is_empty() { "PASS" } else { "FAIL" };
        let extra = if detail.is_empty() {
            String::new()
        } else {
            format!(" [{detail}]")
        };
        println!("{status} criterion {n}: {label} ({} checks){extra}", ck.count);
        for f in &ck.failures {
            println!("    {f}");
        }
        failed += usize::from(!ck.failures.is_empty());
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
