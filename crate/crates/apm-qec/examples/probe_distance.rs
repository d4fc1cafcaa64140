use apm_qec::code::{build_check_matrices, CodeSpec};
use apm_qec::distance::distance_upper_bound;

fn main() {
    let f = [(5u64,41u64),(85,77),(73,66),(1,0),(1,72),(37,9)];
    let g = [(61u64,15u64),(1,24),(89,62),(25,22),(85,93),(25,78)];
    let spec = CodeSpec::new(96, &f, &g).unwrap();
    let code = build_check_matrices(&spec).unwrap();
    for (trials, seed) in [(500u64, 2024u64), (2000, 2024), (4000, 2024)] {
        let t0 = std::time::Instant::now();
        let rep = distance_upper_bound(&code, trials, seed).unwrap();
        println!("trials={trials}: d_x<={} d_z<={}  ({:.1?})", rep.d_x_upper, rep.d_z_upper, t0.elapsed());
    }
}
