fn main() {
    std::process::exit(robinflux::cli::main_with_args(std::env::args_os()));
}
