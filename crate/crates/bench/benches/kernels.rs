use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use driftfv::flux::{bernoulli, gen_sg_flux_n, EdgeFluxInput};
use driftfv::problem::pn_cartesian_mesh;
use driftfv::sparse::{LinearSolver, SolverKind};
use driftfv::transient::linearized_matrices;
use driftfv::{pn_junction_preset, solve_equilibrium, DopingProfile, PnCase, Problem, Stepper, StepperConfig};

fn diode(case: PnCase, n: usize) -> Problem {
    Problem::discretize(&pn_junction_preset(case, DopingProfile::Pn), pn_cartesian_mesh(n, n).unwrap()).unwrap()
}

fn flux(c: &mut Criterion) {
    let xs: Vec<f64> = (0..1024).map(|i| -40.0 + 80.0 * i as f64 / 1023.0).collect();
    c.bench_function("bernoulli x1024", |b| b.iter(|| xs.iter().map(|&x| bernoulli(black_box(x))).sum::<f64>()));
    let inputs: Vec<EdgeFluxInput> =
        xs.iter().map(|&x| EdgeFluxInput { tau: 1.0, n_k: 0.7, n_ksigma: 0.2, dpsi: x / 4.0, dr: 0.8 }).collect();
    c.bench_function("generalized SG flux x1024", |b| {
        b.iter(|| inputs.iter().map(|i| gen_sg_flux_n(black_box(i))).sum::<f64>())
    });
}

fn linear_algebra(c: &mut Criterion) {
    let problem = diode(PnCase::LinearSrh, 32);
    let (n, p) = (&problem.n_initial, &problem.p_initial);
    let psi = vec![0.0; n.len()];
    let (a_n, _) = linearized_matrices(&problem, n, p, &psi, 0.03, 1e-2);
    let rhs = vec![1.0; n.len()];
    for kind in [SolverKind::Direct, SolverKind::BiCgStab] {
        c.bench_function(&format!("density solve 32x32 {kind:?}"), |b| {
            b.iter(|| LinearSolver::new(kind).solve(black_box(&a_n), &rhs).unwrap())
        });
    }
}

fn solvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("solvers");
    group.sample_size(10);
    for case in [PnCase::LinearSrh, PnCase::NonlinNondegenerate] {
        let problem = diode(case, 32);
        group.bench_function(format!("equilibrium 32x32 {}", case.name()), |b| {
            b.iter(|| solve_equilibrium(&problem, 1e-10, 100).unwrap())
        });
        let config = StepperConfig::default();
        let initial = Stepper::new(&problem, config.clone()).unwrap().initial_state().unwrap();
        group.bench_function(format!("first step 32x32 {}", case.name()), |b| {
            b.iter_batched(
                || Stepper::new(&problem, config.clone()).unwrap(),
                |mut stepper| stepper.advance(&initial).unwrap(),
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, flux, linear_algebra, solvers);
criterion_main!(benches);
