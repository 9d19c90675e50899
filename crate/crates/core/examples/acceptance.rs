//! Run the acceptance catalog and print one line per criterion.
fn main() {
    let outcomes = fracfreq::runner::acceptance::run_all();
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    std::process::exit(i32::from(failed > 0));
}
