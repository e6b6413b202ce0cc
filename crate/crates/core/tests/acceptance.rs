use csf_lab::acceptance::{run, DEFAULT_SEED};

fn main() {
    let only: Option<usize> = std::env::var("CSF_CRITERION").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for id in 1..=13 {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let r = run(id, DEFAULT_SEED);
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] AC{:02} {}: {} ({:.1}s)", r.id, r.name, r.detail, r.seconds);
        failed += usize::from(!r.passed);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
