fn main() {
    for (name, bound) in [("fdc", 9)] {
        let m = enrichkit::instances::monad_by_name(name).unwrap();
        let start = std::time::Instant::now();
        let r = m.check_laws(bound).unwrap();
        println!(
            "{name} bound {bound}: ok={} checked={} skipped={} in {:.2?}",
            r.ok(), r.checked, r.skipped, start.elapsed()
        );
        if !r.ok() { print!("{}", r.render_text()); }
    }
}
