use pnlv::checks::{run_check, Fixtures};

fn main() {
    let fx = Fixtures::default();
    let mut failed = 0;
    for id in 1..=12 {
        let out = run_check(id, &fx);
        let tag = if out.passed { "PASS" } else { "FAIL" };
        println!("{tag} {:>2} {} [{:.1}s] {}", out.id, out.name, out.seconds, out.detail);
        failed += usize::from(!out.passed);
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
