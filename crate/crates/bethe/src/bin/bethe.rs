fn main() {
    std::process::exit(bethe::cli::main_with_args(std::env::args_os()));
}
