fn main() {
    std::process::exit(boat::cli::main_with_args(std::env::args_os()));
}
