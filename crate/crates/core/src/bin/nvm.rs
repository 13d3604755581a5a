fn main() {
    std::process::exit(noisy_voter::cli::run(std::env::args_os().collect()));
}
