use kinsusp_core::exec::ExecPolicy;
use kinsusp_core::integrator::{evolve, Observable, RunConfig};
use kinsusp_core::operators::{Engine, FlowSource, Terms};
use kinsusp_core::state::{flow_norm, random_state, read_checkpoint, write_checkpoint, FlowField, KineticState, Lattice, Params};

fn params() -> Params {
    Params {
        gamma: 0.8,
        iota: -2.0,
        nu: 2e-2,
        kmax: 1,
        lmax: 8,
    }
}

fn state(seed: u64) -> KineticState {
    let mut s = random_state(Lattice::new(1), 8, seed, |_, l| 1.0 / (1.0 + l as f64).powi(2));
    let n = s.l2_norm();
    s.scale(0.05 / n);
    s
}

#[test]
fn sequential_and_parallel_policies_agree_bitwise() {
    let p = params();
    let s = state(3);
    let seq = Engine::new(&p).unwrap().with_policy(ExecPolicy::Sequential);
    let par = Engine::new(&p).unwrap().with_policy(ExecPolicy::Parallel);
    let (a, fa) = seq.rhs(&s, Terms::FULL, FlowSource::Coupled).unwrap();
    let (b, fb) = par.rhs(&s, Terms::FULL, FlowSource::Coupled).unwrap();
    assert_eq!(a, b);
    assert_eq!(fa.modes(), fb.modes());
}

#[test]
fn evolution_is_reproducible_and_checkpoints_restore_it() {
    let p = params();
    let engine = Engine::new(&p).unwrap();
    let cfg = RunConfig {
        record_every: 5,
        ..RunConfig::new(0.01, 0.2)
    };
    let obs = [
        Observable::new("psi", |s: &KineticState, _: &FlowField| s.l2_norm()),
        Observable::new("u", |_: &KineticState, f: &FlowField| flow_norm(f, 1.0)),
    ];
    let (end_a, series_a) = evolve(&state(5), &engine, &cfg, &obs).unwrap();
    let (end_b, series_b) = evolve(&state(5), &engine, &cfg, &obs).unwrap();
    assert_eq!(series_a, series_b);
    assert_eq!(end_a, end_b);
    assert_eq!(series_a.rows.len(), 5);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.json");
    write_checkpoint(&path, &p, &end_a).unwrap();
    let (p2, restored) = read_checkpoint(&path).unwrap();
    assert_eq!(p2, p);
    assert_eq!(restored, end_a);
}

#[test]
fn coupled_run_keeps_mass_reality_and_incompressibility() {
    let p = params();
    let engine = Engine::new(&p).unwrap();
    let cfg = RunConfig::new(0.01, 0.3);
    let mut s = state(9);
    let m0 = s.mass();
    let obs = [
        Observable::new("mass", |s: &KineticState, _: &FlowField| (s.mass() - m0).norm()),
        Observable::new("reality", |s: &KineticState, _: &FlowField| s.reality_defect()),
        Observable::new("div", |_: &KineticState, f: &FlowField| f.divergence_defect()),
    ];
    s.t = 0.0;
    let (_, series) = evolve(&s, &engine, &cfg, &obs).unwrap();
    for name in ["mass", "reality", "div"] {
        let worst = series.column(name).unwrap().into_iter().fold(0.0, f64::max);
        assert!(worst < 1e-12, "{name}: {worst}");
    }
}
