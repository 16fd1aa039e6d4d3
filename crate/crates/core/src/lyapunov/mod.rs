//! Static certificates `Z = exp(δ|x|_*^β)` and time-dependent Lyapunov
//! functions `W(s,x) = exp(ε(t−s)^α|x|_*^β)` with their sampled checks.

mod report;
mod samples;
mod static_cert;
mod time_dep;

pub use report::{AsymptoticCheck, CertificateReport};
pub use samples::SampleSet;
pub use static_cert::{
    asymptotic_expansion, check_static_certificate, CertificateTarget, StaticCertificate,
};
pub use time_dep::{
    build_time_dependent_w, check_time_dependent, derive_h, LyapunovCase, RateFunction,
    TimeDependentLyapunov, WParameters,
};
