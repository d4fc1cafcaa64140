use apm_qec::code::CodeSpec;
use apm_qec::compile::DEFAULT_ORDERING;
use apm_qec::motion::{se_round_time, MotionConfig};

fn main() {
    let specs = [
        (96u64, vec![(5u64,41u64),(85,77),(73,66),(1,0),(1,72),(37,9)], vec![(61u64,15u64),(1,24),(89,62),(25,22),(85,93),(25,78)]),
        (192, vec![(71,127),(97,80),(67,117),(163,165),(25,60),(187,33)], vec![(163,165),(55,183),(167,79),(139,41),(109,78),(31,27)]),
    ];
    for (p, f, g) in specs {
        let spec = CodeSpec::new(p, &f, &g).unwrap();
        for aods in [2u8, 4] {
            let cfg = MotionConfig { n_aod_pairs: aods, ..Default::default() };
            let rep = se_round_time(&spec, &DEFAULT_ORDERING, &cfg).unwrap();
            println!("P={p} {aods}-AOD: {:.0} us (movement {:.0}, gates {:.0})", rep.total_us, rep.movement_us, rep.gate_us);
        }
    }
}
