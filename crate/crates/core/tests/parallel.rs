use kolmo_core::lyapunov::{
    check_static_certificate, CertificateTarget, SampleSet, StaticCertificate,
};
use kolmo_core::operator::CoefficientField;
use kolmo_core::par;
use kolmo_core::solver::{solve_kernel_slice, SolverConfig, SpaceTimeGrid};

#[test]
fn sequential_and_parallel_modes_agree_bitwise() {
    let field = CoefficientField::example(1.0, 3.0, 2.0, 2).unwrap();
    let grid = SpaceTimeGrid::new(2, 3.0, 21, 0.0, 1.0, 16).unwrap();
    let cert = StaticCertificate::new(2, 0.25, 3.0, CertificateTarget::WithPotential).unwrap();
    let samples = SampleSet::standard(2, (0.0, 0.9), 4, 3.0, 17, 5);
    let run = || {
        let slice =
            solve_kernel_slice(&field, 1.0, &[0.0, 0.0], &SolverConfig::default(), &grid).unwrap();
        let rep = check_static_certificate(&field, &cert, &samples).unwrap();
        (slice.values, slice.masses, rep)
    };
    par::set_sequential(true);
    let seq = run();
    par::set_sequential(false);
    let parallel = run();
    assert_eq!(seq, parallel);
}
