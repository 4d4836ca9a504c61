fn main() {
    if let Err(e) = sari_sim::cli::agent_main() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
