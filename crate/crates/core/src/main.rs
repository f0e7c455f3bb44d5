fn main() {
    std::process::exit(freewill::cli::run_from_env());
}
