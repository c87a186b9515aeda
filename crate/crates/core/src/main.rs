fn main() {
    std::process::exit(surface_mmd::cli::run_from(std::env::args_os()));
}
