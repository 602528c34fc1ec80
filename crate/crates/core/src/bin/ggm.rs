fn main() {
    std::process::exit(ggm_core::cli::run(std::env::args_os()));
}
